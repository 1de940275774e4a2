//! Analytic noise estimators standing in for a trained diffusion network.

use crate::error::{domain, Result};
use crate::scalar::Real;
use crate::tsmi::Tsmi;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    /// Knows the clean image; inverts the forward noising exactly.
    Oracle,
    /// Predicts no noise, so the denoised image is `x_t / sqrt(abar)`.
    Zero,
    /// Gaussian spatial smoothing of the rescaled sample.
    Smoother,
}

#[derive(Debug, Clone)]
pub struct NoiseEstimatorSpec<T: Real> {
    pub kind: EstimatorKind,
    pub oracle_x0: Option<Tsmi<T>>,
    /// Blur width in pixels at unit noise level; scaled by `sqrt(1 - abar)`.
    pub smoother_sigma_px: T,
    /// Blend the smoothed estimate with `condition` (half each).
    pub conditioned: bool,
    pub condition: Option<Tsmi<T>>,
}

impl<T: Real> NoiseEstimatorSpec<T> {
    pub fn oracle(x0: Tsmi<T>) -> Self {
        Self { kind: EstimatorKind::Oracle, oracle_x0: Some(x0), smoother_sigma_px: T::zero(), conditioned: false, condition: None }
    }

    pub fn zero() -> Self {
        Self { kind: EstimatorKind::Zero, oracle_x0: None, smoother_sigma_px: T::zero(), conditioned: false, condition: None }
    }

    pub fn smoother(sigma_px: T) -> Self {
        Self { kind: EstimatorKind::Smoother, oracle_x0: None, smoother_sigma_px: sigma_px, conditioned: false, condition: None }
    }

    /// Enables conditioning on a low-quality reconstruction such as `A^H y`.
    pub fn conditioned_on(mut self, condition: Tsmi<T>) -> Self {
        self.conditioned = true;
        self.condition = Some(condition);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == EstimatorKind::Oracle && self.oracle_x0.is_none() {
            return Err(domain!("oracle estimator needs a clean image"));
        }
        if !(self.smoother_sigma_px.is_finite() && self.smoother_sigma_px >= T::zero()) {
            return Err(domain!("smoother sigma must be finite and >= 0"));
        }
        if self.conditioned && self.condition.is_none() {
            return Err(domain!("conditioned estimator needs a condition image"));
        }
        Ok(())
    }

    /// Clean-image estimate implied by this estimator at noise level `alpha_bar`.
    pub fn denoise(&self, x_t: &Tsmi<T>, alpha_bar: T) -> Result<Tsmi<T>> {
        check_alpha(alpha_bar)?;
        self.validate()?;
        let sa = alpha_bar.sqrt();
        Ok(match self.kind {
            EstimatorKind::Oracle => {
                let x0 = self.oracle_x0.as_ref().expect("validated");
                x_t.check_same_shape(x0, "oracle image")?;
                x0.clone()
            }
            EstimatorKind::Zero => x_t.scaled(sa.recip()),
            EstimatorKind::Smoother => {
                let sigma = self.smoother_sigma_px * (T::one() - alpha_bar).sqrt();
                let smooth = gaussian_blur(&x_t.scaled(sa.recip()), sigma);
                match (&self.condition, self.conditioned) {
                    (Some(c), true) => {
                        smooth.check_same_shape(c, "condition image")?;
                        Tsmi::lin_comb(T::lit(0.5), &smooth, T::lit(0.5), c)
                    }
                    _ => smooth,
                }
            }
        })
    }
}

fn check_alpha<T: Real>(alpha_bar: T) -> Result<()> {
    if !(alpha_bar > T::zero() && alpha_bar < T::one()) {
        return Err(domain!("alpha_bar must lie in (0, 1), got {alpha_bar}"));
    }
    Ok(())
}

/// Noise prediction `eps = (x_t - sqrt(abar) x0_hat) / sqrt(1 - abar)`.
pub fn estimate_noise<T: Real>(spec: &NoiseEstimatorSpec<T>, x_t: &Tsmi<T>, alpha_bar: T) -> Result<Tsmi<T>> {
    if spec.kind == EstimatorKind::Zero {
        check_alpha(alpha_bar)?;
        let (c, h, w) = x_t.dim();
        return Ok(Tsmi::zeros(c, h, w));
    }
    let x0 = spec.denoise(x_t, alpha_bar)?;
    let inv = (T::one() - alpha_bar).sqrt().recip();
    Ok(Tsmi::lin_comb(inv, x_t, -alpha_bar.sqrt() * inv, &x0))
}

/// Separable per-channel Gaussian blur with symmetric boundary reflection.
pub fn gaussian_blur<T: Real>(x: &Tsmi<T>, sigma_px: T) -> Tsmi<T> {
    let radius = (sigma_px * T::lit(3.0)).ceil().to_usize().unwrap_or(0);
    if radius == 0 || sigma_px <= T::zero() {
        return x.clone();
    }
    let kernel: Vec<T> = {
        let raw: Vec<T> = (0..=2 * radius)
            .map(|i| {
                let d = T::from_usize_lossy(i) - T::from_usize_lossy(radius);
                (-(d * d) / (T::lit(2.0) * sigma_px * sigma_px)).exp()
            })
            .collect();
        let total: T = raw.iter().copied().sum();
        raw.into_iter().map(|k| k / total).collect()
    };
    let (c, h, w) = x.dim();
    let reflect = |i: isize, n: usize| -> usize {
        let n = n as isize;
        let period = 2 * n;
        let mut m = i.rem_euclid(period);
        if m >= n {
            m = period - 1 - m;
        }
        m as usize
    };
    let mut out = x.clone();
    let mut tmp = vec![crate::scalar::czero::<T>(); h * w];
    for ch in 0..c {
        let src = x.channel(ch);
        for i in 0..h {
            for j in 0..w {
                let mut acc = crate::scalar::czero();
                for (o, &k) in kernel.iter().enumerate() {
                    let jj = reflect(j as isize + o as isize - radius as isize, w);
                    acc += src[i * w + jj] * k;
                }
                tmp[i * w + j] = acc;
            }
        }
        let dst = out.channel_mut(ch);
        for i in 0..h {
            for j in 0..w {
                let mut acc = crate::scalar::czero();
                for (o, &k) in kernel.iter().enumerate() {
                    let ii = reflect(i as isize + o as isize - radius as isize, h);
                    acc += tmp[ii * w + j] * k;
                }
                dst[i * w + j] = acc;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pair(seed: u64) -> (Tsmi<f64>, Tsmi<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (Tsmi::randn(3, 12, 10, &mut rng), Tsmi::randn(3, 12, 10, &mut rng))
    }

    #[test]
    fn oracle_recovers_injected_noise() {
        let (x0, eps) = pair(1);
        let ab: f64 = 0.37;
        let xt = Tsmi::lin_comb(ab.sqrt(), &x0, (1.0 - ab).sqrt(), &eps);
        let est = estimate_noise(&NoiseEstimatorSpec::oracle(x0), &xt, ab).unwrap();
        assert!((&est - &eps).norm() < 1e-13 * eps.norm());
    }

    #[test]
    fn zero_estimator() {
        let (x, _) = pair(2);
        assert_eq!(estimate_noise(&NoiseEstimatorSpec::zero(), &x, 0.5).unwrap().norm(), 0.0);
    }

    #[test]
    fn zero_width_smoother_predicts_no_noise() {
        let (x, _) = pair(3);
        let eps = estimate_noise(&NoiseEstimatorSpec::smoother(0.0), &x, 0.6).unwrap();
        assert!(eps.norm() < 1e-14);
    }

    #[test]
    fn denoised_image_roundtrip_all_kinds() {
        let (x0, xt) = pair(4);
        let ab: f64 = 0.25;
        let specs = [
            NoiseEstimatorSpec::oracle(x0.clone()),
            NoiseEstimatorSpec::zero(),
            NoiseEstimatorSpec::smoother(2.0),
            NoiseEstimatorSpec::smoother(1.5).conditioned_on(x0.scaled(0.3)),
        ];
        for spec in &specs {
            let eps = estimate_noise(spec, &xt, ab).unwrap();
            let back = Tsmi::lin_comb(1.0 / ab.sqrt(), &xt, -(1.0 - ab).sqrt() / ab.sqrt(), &eps);
            let internal = spec.denoise(&xt, ab).unwrap();
            assert!((&back - &internal).norm() < 1e-6 * internal.norm().max(1.0), "{:?}", spec.kind);
        }
    }

    #[test]
    fn smoother_is_linear_when_unconditioned() {
        let (x, _) = pair(5);
        let spec = NoiseEstimatorSpec::smoother(1.7);
        let a = estimate_noise(&spec, &x.scaled(-2.5), 0.4).unwrap();
        let b = estimate_noise(&spec, &x, 0.4).unwrap().scaled(-2.5);
        assert!((&a - &b).norm() < 1e-12 * b.norm());
    }

    #[test]
    fn blur_preserves_constants() {
        let mut x = Tsmi::<f64>::zeros(1, 9, 7);
        x.as_slice_mut().iter_mut().for_each(|z| *z = crate::scalar::cplx(2.0, -1.0));
        let y = gaussian_blur(&x, 1.3);
        assert!((&y - &x).norm() < 1e-12);
    }

    #[test]
    fn alpha_bar_domain() {
        let (x, _) = pair(6);
        for ab in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(estimate_noise(&NoiseEstimatorSpec::zero(), &x, ab).is_err());
        }
    }

    #[test]
    fn oracle_requires_image() {
        let mut spec = NoiseEstimatorSpec::<f64>::zero();
        spec.kind = EstimatorKind::Oracle;
        assert!(spec.validate().is_err());
    }
}
