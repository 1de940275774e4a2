//! Non-diffusion reference reconstructions.

use crate::acquisition::{AcquisitionModel, KSpace};
use crate::dictionary::{dict_match, Dictionary, MatchResult};
use crate::error::{domain, Result};
use crate::phantom::QMaps;
use crate::scalar::Real;
use crate::solvers::{KspaceProx, ProxParams};
use crate::tsmi::Tsmi;

pub const DEFAULT_ADMM_GAMMA: f64 = 0.1;
pub const DEFAULT_ADMM_ITERS: usize = 20;

#[derive(Debug, Clone)]
pub struct BaselineOutput<T: Real> {
    pub x_rec: Tsmi<T>,
    pub q_rec: QMaps<T>,
    pub matched: MatchResult<T>,
}

/// Zero-filled adjoint reconstruction followed by dictionary matching.
/// `x_rec` is the adjoint image before projection.
pub fn svdmrf<T: Real>(y: &KSpace<T>, model: &AcquisitionModel<T>, dict: &Dictionary<T>) -> Result<BaselineOutput<T>> {
    let x_rec = model.adjoint(y)?;
    let matched = dict_match(&x_rec, dict)?;
    Ok(BaselineOutput { q_rec: QMaps::from_match(&matched), x_rec, matched })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmIterate<T: Real> {
    pub iteration: usize,
    /// `100 |y - A z| / |y|`
    pub kspace_nrmse: T,
    /// Relative residual of the x-step normal equations.
    pub cg_residual: T,
    pub cg_iterations: usize,
}

/// ADMM on `min |y - A x|^2` subject to dictionary consistency.
///
/// Each iteration solves `(2 A^H A + gamma I) x = 2 A^H y + gamma (z - u)`
/// by CG (warm-started from the previous x), projects `x + u` onto the
/// dictionary, and accumulates the scaled dual `u += x - z`. Returns `z`.
pub fn admm_mrf<T: Real>(
    y: &KSpace<T>,
    model: &AcquisitionModel<T>,
    dict: &Dictionary<T>,
    n_iters: usize,
    gamma: T,
    prox: &ProxParams<T>,
) -> Result<(BaselineOutput<T>, Vec<AdmmIterate<T>>)> {
    if n_iters == 0 {
        return Err(domain!("admm needs at least one iteration"));
    }
    if !(gamma > T::zero() && gamma.is_finite()) {
        return Err(domain!("admm gamma must be finite and positive"));
    }
    let solver = KspaceProx::new(model, y)?;
    let (h, w) = model.dims();
    let s = model.basis().rank();
    let mut x = Tsmi::zeros(s, h, w);
    let mut z = Tsmi::zeros(s, h, w);
    let mut u = Tsmi::zeros(s, h, w);
    let mut matched = None;
    let mut trace = Vec::with_capacity(n_iters);
    for iteration in 1..=n_iters {
        let anchor = &z - &u;
        let params = ProxParams { weight: gamma, warm_start: Some(x), ..prox.clone() };
        let out = solver.solve(&anchor, &params)?;
        x = out.solution.clone();
        let m = dict_match(&(&x + &u), dict)?;
        z = m.projected.clone();
        u.axpy(T::one(), &x);
        u.axpy(-T::one(), &z);
        trace.push(AdmmIterate {
            iteration,
            kspace_nrmse: T::lit(100.0) * model.residual(y, &z)?,
            cg_residual: out.final_residual(),
            cg_iterations: out.iterations,
        });
        matched = Some(m);
    }
    let matched = matched.expect("at least one iteration");
    Ok((BaselineOutput { x_rec: z, q_rec: QMaps::from_match(&matched), matched }, trace))
}
