//! Physics-guided diffusion sampling.
//!
//! Every step denoises the current sample, pulls the estimate towards the
//! measurements with a k-space proximal step, projects onto the dictionary
//! with a single ADMM iteration, and re-noises the Bloch-consistent image
//! to the next noise level.

mod schedule;

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use schedule::{
    make_schedule, subsample_steps, DiffusionSchedule, DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_TOTAL_STEPS,
};

use crate::acquisition::{AcquisitionModel, KSpace};
use crate::denoise::{estimate_noise, NoiseEstimatorSpec};
use crate::dictionary::{dict_match, Dictionary, MatchResult};
use crate::error::{domain, numeric, Result};
use crate::metrics::nrmse;
use crate::phantom::QMaps;
use crate::scalar::Real;
use crate::solvers::{KspaceProx, ProxParams};
use crate::tsmi::Tsmi;

pub const DEFAULT_K: usize = 30;
pub const DEFAULT_LAMBDA: f64 = 1e-4;
pub const DEFAULT_TAU: f64 = 0.01;
pub const DEFAULT_XI: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerMode {
    /// Denoise, k-space prox, dictionary projection, dual update.
    Base,
    /// Denoise and k-space prox; no in-loop dictionary projection.
    KspaceOnly,
    /// Plain diffusion sampling with no physics steps.
    DdmOnly,
}

/// Image the deterministic noise term is predicted from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseSource {
    /// The Bloch-consistent image `z_{k-1}`.
    #[default]
    Z,
    /// The k-space consistent image `xhat_{0,k}`.
    XHat,
}

#[derive(Debug, Clone)]
pub struct SamplerParams<T: Real> {
    pub k: usize,
    pub lambda: T,
    pub tau: T,
    /// Weight of fresh stochastic noise when re-noising; 0 is deterministic.
    pub xi: T,
    /// CG settings for the k-space step; `weight` and `warm_start` are set per step.
    pub prox: ProxParams<T>,
    pub mode: SamplerMode,
    pub seed: u64,
    pub noise_source: NoiseSource,
}

impl<T: Real> Default for SamplerParams<T> {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            lambda: T::lit(DEFAULT_LAMBDA),
            tau: T::lit(DEFAULT_TAU),
            xi: T::lit(DEFAULT_XI),
            prox: ProxParams::new(T::one()),
            mode: SamplerMode::Base,
            seed: 0,
            noise_source: NoiseSource::Z,
        }
    }
}

impl<T: Real> SamplerParams<T> {
    pub fn schedule(&self) -> Result<DiffusionSchedule<T>> {
        DiffusionSchedule::standard(self.k, self.lambda, self.tau)
    }

    fn validate(&self, sched: &DiffusionSchedule<T>) -> Result<()> {
        if self.k == 0 || sched.len() != self.k {
            return Err(domain!("schedule has {} steps but K = {}", sched.len(), self.k));
        }
        if !(self.xi >= T::zero() && self.xi <= T::one()) {
            return Err(domain!("xi must lie in [0, 1], got {}", self.xi));
        }
        if !(self.lambda > T::zero()) || !(self.tau > T::zero()) {
            return Err(domain!("lambda and tau must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace<T: Real> {
    /// Sampling index, counting down from K to 1.
    pub step: usize,
    pub t: usize,
    pub sigma2: T,
    pub mu: T,
    pub gamma: T,
    /// `100 |y - A z_{k-1}| / |y|`
    pub kspace_nrmse: T,
    /// Channel-averaged NRMSE of `z_{k-1}` against supplied ground truth.
    pub tsmi_nrmse: Option<T>,
    pub cg_iterations: usize,
}

pub fn write_trace_csv<T: Real, W: Write>(trace: &[StepTrace<T>], mut out: W) -> std::io::Result<()> {
    writeln!(out, "step,sigma2,mu,gamma,kspace_nrmse,tsmi_nrmse")?;
    for s in trace {
        let tsmi = s.tsmi_nrmse.map(|v| format!("{v}")).unwrap_or_default();
        writeln!(out, "{},{:e},{:e},{:e},{},{}", s.step, s.sigma2, s.mu, s.gamma, s.kspace_nrmse, tsmi)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SampleOutput<T: Real> {
    pub x_rec: Tsmi<T>,
    pub q_rec: QMaps<T>,
    pub matched: MatchResult<T>,
    pub trace: Vec<StepTrace<T>>,
}

/// `sqrt(xi) eps + sqrt(1 - xi) eps_hat`
pub fn mix_noise<T: Real>(eps: &Tsmi<T>, eps_hat: &Tsmi<T>, xi: T) -> Tsmi<T> {
    Tsmi::lin_comb(xi.sqrt(), eps, (T::one() - xi).sqrt(), eps_hat)
}

/// `sqrt(abar_prev) z + sqrt(1 - abar_prev) mix_noise(eps, eps_hat, xi)`
pub fn renoise<T: Real>(z: &Tsmi<T>, eps_hat: &Tsmi<T>, eps: &Tsmi<T>, xi: T, alpha_bar_prev: T) -> Tsmi<T> {
    let mut x = mix_noise(eps, eps_hat, xi);
    x.scale((T::one() - alpha_bar_prev).sqrt());
    x.axpy(alpha_bar_prev.sqrt(), z);
    x
}

pub fn mrf_diph_sample<T: Real>(
    y: &KSpace<T>,
    model: &AcquisitionModel<T>,
    dict: &Dictionary<T>,
    est: &NoiseEstimatorSpec<T>,
    sched: &DiffusionSchedule<T>,
    params: &SamplerParams<T>,
) -> Result<SampleOutput<T>> {
    mrf_diph_sample_traced(y, model, dict, est, sched, params, None)
}

/// As [`mrf_diph_sample`], additionally tracing TSMI error against `truth`.
pub fn mrf_diph_sample_traced<T: Real>(
    y: &KSpace<T>,
    model: &AcquisitionModel<T>,
    dict: &Dictionary<T>,
    est: &NoiseEstimatorSpec<T>,
    sched: &DiffusionSchedule<T>,
    params: &SamplerParams<T>,
    truth: Option<&Tsmi<T>>,
) -> Result<SampleOutput<T>> {
    params.validate(sched)?;
    est.validate()?;
    if dict.rank() != model.basis().rank() {
        return Err(domain!("dictionary rank {} differs from model rank {}", dict.rank(), model.basis().rank()));
    }
    let (h, w) = model.dims();
    let s = dict.rank();
    let prox = KspaceProx::new(model, y)?;
    let ynorm = y.norm();
    if ynorm == T::zero() {
        return Err(domain!("measurements are identically zero"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut x = Tsmi::randn(s, h, w, &mut rng);
    let mut z = Tsmi::zeros(s, h, w);
    let mut v = Tsmi::zeros(s, h, w);
    let mut xhat_prev: Option<Tsmi<T>> = None;
    let mut last_match: Option<MatchResult<T>> = None;
    let mut noise = Tsmi::zeros(s, h, w);
    let mut trace = Vec::with_capacity(params.k);

    for k in (1..=params.k).rev() {
        let (mu, gamma) = (sched.mu[k - 1], sched.gamma[k - 1]);
        if !(gamma > T::zero()) {
            return Err(domain!("gamma vanished at step {k}"));
        }
        let ab = sched.alpha_bar_at(k);
        let ab_prev = sched.alpha_bar_at(k - 1);
        let (sa, s1a) = (ab.sqrt(), (T::one() - ab).sqrt());

        let eps = estimate_noise(est, &x, ab)?;
        let denoised = Tsmi::lin_comb(sa.recip(), &x, -s1a / sa, &eps);

        let mut cg_iterations = 0;
        let xhat = match params.mode {
            SamplerMode::DdmOnly => denoised,
            _ => {
                let weight = mu + gamma;
                let mut anchor = Tsmi::lin_comb(mu / weight, &denoised, gamma / weight, &z);
                anchor.axpy(-weight.recip(), &v);
                let step_params = ProxParams { weight, warm_start: xhat_prev.take(), ..params.prox.clone() };
                let out = prox.solve(&anchor, &step_params)?;
                cg_iterations = out.iterations;
                out.solution
            }
        };

        let z_next = match params.mode {
            SamplerMode::Base => {
                let mut target = xhat.clone();
                target.axpy(gamma.recip(), &v);
                let m = dict_match(&target, dict)?;
                let z_next = m.projected.clone();
                v.axpy(gamma, &xhat);
                v.axpy(-gamma, &z_next);
                last_match = Some(m);
                z_next
            }
            SamplerMode::KspaceOnly | SamplerMode::DdmOnly => xhat.clone(),
        };

        let source = match params.noise_source {
            NoiseSource::Z => &z_next,
            NoiseSource::XHat => &xhat,
        };
        let eps_hat = Tsmi::lin_comb(s1a.recip(), &x, -sa / s1a, source);
        noise.fill_randn(&mut rng);
        x = renoise(&z_next, &eps_hat, &noise, params.xi, ab_prev);

        if !x.is_finite() || !z_next.is_finite() || !v.is_finite() {
            return Err(numeric!("sampler state became non-finite at step {k}"));
        }
        trace.push(StepTrace {
            step: k,
            t: sched.steps[k - 1],
            sigma2: sched.sigma2[k - 1],
            mu,
            gamma,
            kspace_nrmse: T::lit(100.0) * model.residual(y, &z_next)?,
            tsmi_nrmse: truth.map(|gt| nrmse(&z_next, gt, true)).transpose()?,
            cg_iterations,
        });
        z = z_next;
        xhat_prev = Some(xhat);
    }

    let matched = match last_match {
        Some(m) => m,
        None => dict_match(&z, dict)?,
    };
    Ok(SampleOutput { x_rec: z, q_rec: QMaps::from_match(&matched), matched, trace })
}
