use crate::error::{domain, Result};
use crate::scalar::Real;

pub const DEFAULT_TOTAL_STEPS: usize = 1000;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;

/// Linearly spaced betas (both endpoints included) and their cumulative
/// products `alpha_bar_t = prod_{i <= t} (1 - beta_i)`.
pub fn make_schedule<T: Real>(total: usize, beta0: T, beta_t: T) -> Result<(Vec<T>, Vec<T>)> {
    if total == 0 {
        return Err(domain!("schedule needs at least one step"));
    }
    if !(beta0 > T::zero() && beta0 <= beta_t && beta_t < T::one()) {
        return Err(domain!("betas must satisfy 0 < beta0 <= betaT < 1, got {beta0}, {beta_t}"));
    }
    if total == 1 && beta0 != beta_t {
        return Err(domain!("a one-step schedule cannot span two distinct betas"));
    }
    let beta: Vec<T> = if total == 1 {
        vec![beta0]
    } else {
        let denom = T::from_usize_lossy(total - 1);
        (0..total).map(|i| beta0 + (beta_t - beta0) * T::from_usize_lossy(i) / denom).collect()
    };
    let mut alpha_bar = Vec::with_capacity(total);
    let mut acc = T::one();
    for &b in &beta {
        acc *= T::one() - b;
        alpha_bar.push(acc);
    }
    Ok((beta, alpha_bar))
}

/// `K` evenly spaced (rounded) timesteps in `[1, T]`, ending at `T`: `t_k = round(k T / K)`.
pub fn subsample_steps(total: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > total {
        return Err(domain!("need 1 <= K <= T, got K={k}, T={total}"));
    }
    Ok((1..=k).map(|i| (2 * i * total + k) / (2 * k)).collect())
}

/// Noise schedule restricted to the sampling sub-sequence together with the
/// per-step splitting weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule<T: Real> {
    pub total_steps: usize,
    pub beta: Vec<T>,
    pub alpha_bar: Vec<T>,
    /// 1-based timesteps `t_1 < ... < t_K`.
    pub steps: Vec<usize>,
    /// `(1 - abar) / abar` at each `t_k`.
    pub sigma2: Vec<T>,
    /// `lambda / sigma2_k`
    pub mu: Vec<T>,
    /// `tau * mu_k`
    pub gamma: Vec<T>,
}

impl<T: Real> DiffusionSchedule<T> {
    pub fn new(total: usize, beta0: T, beta_t: T, k: usize, lambda: T, tau: T) -> Result<Self> {
        if !(lambda > T::zero() && lambda.is_finite()) || !(tau > T::zero() && tau.is_finite()) {
            return Err(domain!("lambda and tau must be finite and positive"));
        }
        let (beta, alpha_bar) = make_schedule(total, beta0, beta_t)?;
        let steps = subsample_steps(total, k)?;
        let sigma2: Vec<T> = steps.iter().map(|&t| (T::one() - alpha_bar[t - 1]) / alpha_bar[t - 1]).collect();
        let mu: Vec<T> = sigma2.iter().map(|&s| lambda / s).collect();
        let gamma = mu.iter().map(|&m| tau * m).collect();
        Ok(Self { total_steps: total, beta, alpha_bar, steps, sigma2, mu, gamma })
    }

    /// Stock schedule: `T = 1000`, betas `1e-4 .. 0.02`.
    pub fn standard(k: usize, lambda: T, tau: T) -> Result<Self> {
        Self::new(DEFAULT_TOTAL_STEPS, T::lit(DEFAULT_BETA_START), T::lit(DEFAULT_BETA_END), k, lambda, tau)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `alpha_bar` at sampling index `k` (1-based); `k = 0` gives 1.
    pub fn alpha_bar_at(&self, k: usize) -> T {
        if k == 0 {
            T::one()
        } else {
            self.alpha_bar[self.steps[k - 1] - 1]
        }
    }
}
