//! 8-bit grayscale PGM rendering of parameter and error maps.

use ndarray::Array2;

pub const T1_WINDOW: (f64, f64) = (0.0, 4500.0);
pub const T2_WINDOW: (f64, f64) = (0.0, 2500.0);
pub const DEFAULT_APE_MAX: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gray {
    pub h: usize,
    pub w: usize,
    pub pixels: Vec<u8>,
}

impl Gray {
    /// Binary `P5` encoding.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.w, self.h).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Linear map of `[lo, hi]` onto `0..=255` with clamping; background is 0.
pub fn window(map: &Array2<f64>, mask: &Array2<bool>, (lo, hi): (f64, f64)) -> Gray {
    let (h, w) = map.dim();
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let pixels = map
        .iter()
        .zip(mask.iter())
        .map(|(&v, &m)| if m && v.is_finite() { (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8 } else { 0 })
        .collect();
    Gray { h, w, pixels }
}

/// Absolute percentage error `100 |est - ref| / ref` inside the mask.
pub fn ape_map(est: &Array2<f64>, reference: &Array2<f64>, mask: &Array2<bool>) -> Array2<f64> {
    Array2::from_shape_fn(est.dim(), |ij| if mask[ij] && reference[ij] > 0.0 { 100.0 * (est[ij] - reference[ij]).abs() / reference[ij] } else { 0.0 })
}
