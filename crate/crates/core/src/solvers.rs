//! Conjugate gradients and the proximal map of the k-space fidelity term.

use crate::acquisition::{AcquisitionModel, KSpace};
use crate::error::{domain, numeric, Result};
use crate::scalar::Real;
use crate::tsmi::Tsmi;

pub const DEFAULT_CG_ITERS: usize = 5;
pub const DEFAULT_CG_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct CgOutcome<T: Real> {
    /// Iterate with the smallest relative residual.
    pub solution: Tsmi<T>,
    pub iterations: usize,
    /// Relative residual `|b - A x_i| / |b|` of every iterate, starting with the initial guess.
    pub residuals: Vec<T>,
}

impl<T: Real> CgOutcome<T> {
    pub fn final_residual(&self) -> T {
        self.residuals.iter().copied().fold(T::infinity(), T::min)
    }
}

/// Conjugate gradients for a self-adjoint positive semidefinite `apply`.
///
/// Starts from `warm_start` (zero if absent) and stops after `max_iters`
/// steps or once the relative residual falls to `tol`. A zero right-hand
/// side returns zero.
pub fn cg_solve<T, F>(apply: F, rhs: &Tsmi<T>, warm_start: Option<&Tsmi<T>>, max_iters: usize, tol: T) -> Result<CgOutcome<T>>
where
    T: Real,
    F: Fn(&Tsmi<T>) -> Result<Tsmi<T>>,
{
    if !rhs.is_finite() {
        return Err(numeric!("cg: right-hand side is not finite"));
    }
    let (c, h, w) = rhs.dim();
    let bnorm = rhs.norm();
    if bnorm == T::zero() {
        return Ok(CgOutcome { solution: Tsmi::zeros(c, h, w), iterations: 0, residuals: vec![T::zero()] });
    }
    let (mut x, mut r) = match warm_start {
        Some(x0) => {
            rhs.check_same_shape(x0, "cg warm start")?;
            let ax = apply(x0)?;
            (x0.clone(), rhs - &ax)
        }
        None => (Tsmi::zeros(c, h, w), rhs.clone()),
    };
    let mut rs = r.norm_sqr();
    let mut residuals = vec![rs.sqrt() / bnorm];
    if !residuals[0].is_finite() {
        return Err(numeric!("cg: initial residual is not finite"));
    }
    let mut best = (residuals[0], x.clone());
    let mut p = r.clone();
    let mut iterations = 0;
    while iterations < max_iters && best.0 > tol {
        let ap = apply(&p)?;
        let pap = p.inner(&ap).re;
        if !pap.is_finite() {
            return Err(numeric!("cg: operator produced non-finite values at iteration {}", iterations + 1));
        }
        if pap <= T::zero() {
            break;
        }
        let alpha = rs / pap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        let rs_new = r.norm_sqr();
        iterations += 1;
        let rel = rs_new.sqrt() / bnorm;
        if !rel.is_finite() {
            return Err(numeric!("cg: residual became non-finite at iteration {iterations}"));
        }
        residuals.push(rel);
        if rel < best.0 {
            best = (rel, x.clone());
        }
        let beta = rs_new / rs;
        p = Tsmi::lin_comb(T::one(), &r, beta, &p);
        rs = rs_new;
    }
    Ok(CgOutcome { solution: best.1, iterations, residuals })
}

#[derive(Debug, Clone)]
pub struct ProxParams<T: Real> {
    /// Quadratic anchor weight (`mu + gamma` in the sampler).
    pub weight: T,
    pub max_cg_iters: usize,
    pub cg_tol: T,
    pub warm_start: Option<Tsmi<T>>,
}

impl<T: Real> ProxParams<T> {
    pub fn new(weight: T) -> Self {
        Self { weight, max_cg_iters: DEFAULT_CG_ITERS, cg_tol: T::lit(DEFAULT_CG_TOL), warm_start: None }
    }

    pub fn with_cg(mut self, max_cg_iters: usize, cg_tol: T) -> Self {
        self.max_cg_iters = max_cg_iters;
        self.cg_tol = cg_tol;
        self
    }

    pub fn with_warm_start(mut self, x0: Option<Tsmi<T>>) -> Self {
        self.warm_start = x0;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.weight.is_finite() && self.weight > T::zero()) {
            return Err(domain!("prox weight must be finite and positive, got {}", self.weight));
        }
        if !(self.cg_tol > T::zero()) {
            return Err(domain!("cg tolerance must be positive"));
        }
        Ok(())
    }
}

/// `min_x |y - A x|^2 + weight/2 |x - w|^2` for a fixed measurement set,
/// with `A^H y` cached across calls.
#[derive(Debug, Clone)]
pub struct KspaceProx<'a, T: Real> {
    model: &'a AcquisitionModel<T>,
    y: &'a KSpace<T>,
    adj_y: Tsmi<T>,
}

impl<'a, T: Real> KspaceProx<'a, T> {
    pub fn new(model: &'a AcquisitionModel<T>, y: &'a KSpace<T>) -> Result<Self> {
        let adj_y = model.adjoint(y)?;
        Ok(Self { model, y, adj_y })
    }

    pub fn adjoint_data(&self) -> &Tsmi<T> {
        &self.adj_y
    }

    /// `|y - A x|^2 + weight/2 |x - w|^2`
    pub fn objective(&self, x: &Tsmi<T>, w: &Tsmi<T>, weight: T) -> Result<T> {
        let pred = self.model.forward(x)?;
        let fit: T = self.y.as_slice().iter().zip(pred.as_slice()).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok(fit + weight * T::lit(0.5) * (x - w).norm_sqr())
    }

    /// Solves `(2 A^H A + weight I) x = 2 A^H y + weight w` by CG, starting
    /// from `params.warm_start` or else from `w`, so the objective never
    /// exceeds its value at the anchor.
    pub fn solve(&self, w: &Tsmi<T>, params: &ProxParams<T>) -> Result<CgOutcome<T>> {
        params.validate()?;
        self.adj_y.check_same_shape(w, "prox anchor")?;
        let two = T::lit(2.0);
        let rhs = Tsmi::lin_comb(two, &self.adj_y, params.weight, w);
        let apply = |x: &Tsmi<T>| -> Result<Tsmi<T>> {
            let nx = self.model.normal(x)?;
            Ok(Tsmi::lin_comb(two, &nx, params.weight, x))
        };
        let start = params.warm_start.as_ref().unwrap_or(w);
        cg_solve(apply, &rhs, Some(start), params.max_cg_iters, params.cg_tol)
    }
}

/// Proximal map of `f(x) = |y - A x|^2` with anchor `w` and weight `params.weight`.
pub fn prox_f<T: Real>(model: &AcquisitionModel<T>, y: &KSpace<T>, w: &Tsmi<T>, params: &ProxParams<T>) -> Result<Tsmi<T>> {
    Ok(KspaceProx::new(model, y)?.solve(w, params)?.solution)
}
