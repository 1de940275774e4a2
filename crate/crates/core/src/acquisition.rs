//! Multi-coil, frame-varying Cartesian sampling operator on compressed series.
//!
//! `forward` maps `s` subspace images to zero-filled k-space of shape
//! `(coils, frames, h*w)`: decompress to `l` frames, weight by each coil
//! sensitivity, apply a unitary 2-D FFT, and keep the frame's mask.

use ndarray::{Array3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dictionary::Basis;
use crate::error::{domain, Result};
use crate::fft::Fft2;
use crate::scalar::{all_finite, cplx, czero, dot, norm_sqr, Cplx, Real};
use crate::tsmi::Tsmi;

/// Coil sensitivities `(c, h, w)` with unit sum-of-squares at every voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct CoilMaps<T: Real> {
    sens: Array3<Cplx<T>>,
}

impl<T: Real> CoilMaps<T> {
    pub fn new(sens: Array3<Cplx<T>>) -> Self {
        Self { sens: sens.as_standard_layout().into_owned() }
    }

    pub fn coils(&self) -> usize {
        self.sens.dim().0
    }

    pub fn dims(&self) -> (usize, usize) {
        let (_, h, w) = self.sens.dim();
        (h, w)
    }

    pub fn sens(&self) -> &Array3<Cplx<T>> {
        &self.sens
    }

    pub fn coil(&self, c: usize) -> &[Cplx<T>] {
        let (h, w) = self.dims();
        &self.sens.as_slice().expect("standard layout")[c * h * w..(c + 1) * h * w]
    }

    /// Largest deviation of the per-voxel sum of squares from one.
    pub fn sos_error(&self) -> T {
        let (h, w) = self.dims();
        (0..h * w)
            .map(|v| {
                let sos: T = (0..self.coils()).map(|c| self.coil(c)[v].norm_sqr()).sum();
                (sos - T::one()).abs()
            })
            .fold(T::zero(), T::max)
    }
}

/// Smooth synthetic receive coils: Gaussian bumps centred around the field
/// of view with a mild linear gain, constant phase per coil, and a small
/// phase ramp when more than one coil is present. Normalized to unit SOS.
pub fn make_coils<T: Real>(c: usize, h: usize, w: usize, seed: u64) -> Result<CoilMaps<T>> {
    if c == 0 || h == 0 || w == 0 {
        return Err(domain!("coil maps need c, h, w >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = std::f64::consts::TAU;
    let params: Vec<[f64; 7]> = (0..c)
        .map(|j| {
            let angle = tau * j as f64 / c as f64 + rng.random_range(-0.2..0.2);
            let radius = 0.55 + rng.random_range(-0.05..0.05);
            let width = 0.45 + rng.random_range(-0.05..0.05);
            let gx = rng.random_range(-0.2..0.2);
            let gy = rng.random_range(-0.2..0.2);
            let ramp = if c > 1 { rng.random_range(-0.5..0.5) } else { 0.0 };
            [angle, radius, width, gx, gy, ramp, tau * j as f64 / c as f64]
        })
        .collect();
    let mut sens = Array3::from_elem((c, h, w), czero::<T>());
    for (j, p) in params.iter().enumerate() {
        let [angle, radius, width, gx, gy, ramp, phase0] = *p;
        let (cy, cx) = (radius * angle.sin(), radius * angle.cos());
        for i in 0..h {
            for k in 0..w {
                let y = (i as f64 + 0.5) / h as f64 - 0.5;
                let x = (k as f64 + 0.5) / w as f64 - 0.5;
                let r2 = (y - cy).powi(2) + (x - cx).powi(2);
                let mag = (-r2 / (2.0 * width * width)).exp() * (1.0 + gx * x + gy * y);
                let phase = phase0 + ramp * (x + y);
                sens[(j, i, k)] = cplx(T::lit(mag * phase.cos()), T::lit(mag * phase.sin()));
            }
        }
    }
    for i in 0..h {
        for k in 0..w {
            let sos: T = (0..c).map(|j| sens[(j, i, k)].norm_sqr()).sum::<T>().sqrt();
            for j in 0..c {
                sens[(j, i, k)] = sens[(j, i, k)] / sos;
            }
        }
    }
    Ok(CoilMaps { sens })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskScheme {
    Uniform,
    VariableDensity,
}

/// Per-frame k-space sampling masks `(l, h, w)` in unshifted FFT order
/// (DC at index 0).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMasks {
    masks: Array3<bool>,
    pub seed: u64,
}

impl FrameMasks {
    pub fn new(masks: Array3<bool>, seed: u64) -> Result<Self> {
        let masks = masks.as_standard_layout().into_owned();
        if let Some(t) = masks.axis_iter(Axis(0)).position(|m| !m.iter().any(|&b| b)) {
            return Err(domain!("mask for frame {t} samples nothing"));
        }
        Ok(Self { masks, seed })
    }

    pub fn frames(&self) -> usize {
        self.masks.dim().0
    }

    pub fn dims(&self) -> (usize, usize) {
        let (_, h, w) = self.masks.dim();
        (h, w)
    }

    pub fn masks(&self) -> &Array3<bool> {
        &self.masks
    }

    pub fn frame(&self, t: usize) -> &[bool] {
        let (h, w) = self.dims();
        &self.masks.as_slice().expect("standard layout")[t * h * w..(t + 1) * h * w]
    }

    /// Number of sampled locations in frame `t`.
    pub fn samples(&self, t: usize) -> usize {
        self.frame(t).iter().filter(|&&b| b).count()
    }

    pub fn mean_fraction(&self) -> f64 {
        let (h, w) = self.dims();
        self.masks.iter().filter(|&&b| b).count() as f64 / (self.frames() * h * w) as f64
    }
}

/// Radial width of the variable-density weight in cycles per sample.
pub const DENSITY_SIGMA: f64 = 0.25;
/// Constant weight floor of the variable-density profile.
pub const DENSITY_FLOOR: f64 = 0.2;

/// Independent per-frame masks sampling `round(h*w/R)` locations each.
///
/// `VariableDensity` draws without replacement with weights
/// `DENSITY_FLOOR + exp(-r^2 / 2 DENSITY_SIGMA^2)` (centre favoured) and always keeps the DC sample.
pub fn make_masks(l: usize, h: usize, w: usize, r: f64, seed: u64, scheme: MaskScheme) -> Result<FrameMasks> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(domain!("acceleration R must be finite and >= 1, got {r}"));
    }
    if l == 0 || h == 0 || w == 0 {
        return Err(domain!("mask dimensions must be positive"));
    }
    let n = h * w;
    let m = (n as f64 / r).round() as usize;
    if m == 0 {
        return Err(domain!("R = {r} leaves no samples in a {h}x{w} frame"));
    }
    let weights: Vec<f64> = (0..n)
        .map(|v| {
            let (i, k) = (v / w, v % w);
            let fy = i.min(h - i) as f64 / h as f64;
            let fx = k.min(w - k) as f64 / w as f64;
            let r2 = fy * fy + fx * fx;
            DENSITY_FLOOR + (-r2 / (2.0 * DENSITY_SIGMA * DENSITY_SIGMA)).exp()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut masks = Array3::from_elem((l, h, w), false);
    let flat = masks.as_slice_mut().expect("standard layout");
    for t in 0..l {
        let frame = &mut flat[t * n..(t + 1) * n];
        match scheme {
            MaskScheme::Uniform => {
                let mut idx: Vec<usize> = (0..n).collect();
                for i in 0..m {
                    let j = rng.random_range(i..n);
                    idx.swap(i, j);
                    frame[idx[i]] = true;
                }
            }
            MaskScheme::VariableDensity => {
                frame[0] = true;
                // weighted reservoir keys: ln(u) / weight, largest wins
                let mut keys: Vec<(f64, usize)> = (1..n)
                    .map(|v| {
                        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                        (u.ln() / weights[v], v)
                    })
                    .collect();
                keys.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite").then(a.1.cmp(&b.1)));
                for &(_, v) in keys.iter().take(m - 1) {
                    frame[v] = true;
                }
            }
        }
    }
    FrameMasks::new(masks, seed)
}

/// Zero-filled multi-coil k-space `(c, l, h*w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpace<T: Real> {
    data: Array3<Cplx<T>>,
}

impl<T: Real> KSpace<T> {
    pub fn zeros(c: usize, l: usize, n: usize) -> Self {
        Self { data: Array3::from_elem((c, l, n), czero()) }
    }

    pub fn from_array(data: Array3<Cplx<T>>) -> Self {
        Self { data: data.as_standard_layout().into_owned() }
    }

    pub fn dim(&self) -> (usize, usize, usize) {
        self.data.dim()
    }

    pub fn data(&self) -> &Array3<Cplx<T>> {
        &self.data
    }

    pub fn as_slice(&self) -> &[Cplx<T>] {
        self.data.as_slice().expect("standard layout")
    }

    pub fn as_slice_mut(&mut self) -> &mut [Cplx<T>] {
        self.data.as_slice_mut().expect("standard layout")
    }

    pub fn inner(&self, other: &Self) -> Cplx<T> {
        dot(self.as_slice(), other.as_slice())
    }

    pub fn norm_sqr(&self) -> T {
        norm_sqr(self.as_slice())
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        all_finite(self.as_slice())
    }

    /// Zeroes every entry the masks do not sample.
    pub fn apply_masks(&mut self, masks: &FrameMasks) {
        let (c, l, n) = self.dim();
        let data = self.as_slice_mut();
        for ci in 0..c {
            for t in 0..l {
                let m = masks.frame(t);
                let row = &mut data[(ci * l + t) * n..(ci * l + t + 1) * n];
                for (z, &keep) in row.iter_mut().zip(m) {
                    if !keep {
                        *z = czero();
                    }
                }
            }
        }
    }

    /// True when every unsampled entry is exactly zero.
    pub fn respects_masks(&self, masks: &FrameMasks) -> bool {
        let (c, l, n) = self.dim();
        let data = self.as_slice();
        (0..c).all(|ci| {
            (0..l).all(|t| {
                let row = &data[(ci * l + t) * n..(ci * l + t + 1) * n];
                row.iter().zip(masks.frame(t)).all(|(z, &keep)| keep || *z == czero())
            })
        })
    }
}

#[derive(Debug, Clone)]
pub struct AcquisitionModel<T: Real> {
    coils: CoilMaps<T>,
    masks: FrameMasks,
    basis: Basis<T>,
    fft: Fft2<T>,
}

impl<T: Real> AcquisitionModel<T> {
    pub fn new(coils: CoilMaps<T>, masks: FrameMasks, basis: Basis<T>) -> Result<Self> {
        if coils.dims() != masks.dims() {
            return Err(domain!("coil maps {:?} and masks {:?} disagree on image size", coils.dims(), masks.dims()));
        }
        if masks.frames() != basis.frames() {
            return Err(domain!("{} mask frames but basis has {} frames", masks.frames(), basis.frames()));
        }
        let (h, w) = coils.dims();
        Ok(Self { coils, masks, basis, fft: Fft2::new(h, w) })
    }

    pub fn coils(&self) -> &CoilMaps<T> {
        &self.coils
    }

    pub fn masks(&self) -> &FrameMasks {
        &self.masks
    }

    pub fn basis(&self) -> &Basis<T> {
        &self.basis
    }

    pub fn dims(&self) -> (usize, usize) {
        self.coils.dims()
    }

    pub fn kspace_dim(&self) -> (usize, usize, usize) {
        let (h, w) = self.dims();
        (self.coils.coils(), self.masks.frames(), h * w)
    }

    fn check_image(&self, x: &Tsmi<T>) -> Result<()> {
        let (h, w) = self.dims();
        if x.channels() != self.basis.rank() || x.height() != h || x.width() != w {
            return Err(domain!(
                "image {:?} does not match model ({}, {h}, {w})",
                x.dim(),
                self.basis.rank()
            ));
        }
        Ok(())
    }

    fn check_kspace(&self, y: &KSpace<T>) -> Result<()> {
        if y.dim() != self.kspace_dim() {
            return Err(domain!("k-space {:?} does not match model {:?}", y.dim(), self.kspace_dim()));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tsmi<T>) -> Result<KSpace<T>> {
        self.check_image(x)?;
        let (c, l, n) = self.kspace_dim();
        let mut y = KSpace::zeros(c, l, n);
        y.as_slice_mut().par_chunks_mut(n).enumerate().for_each_init(
            || self.fft.workspace(),
            |work, (idx, dst)| {
                let (ci, t) = (idx / l, idx % l);
                self.basis.decompress_frame_into(x, t, dst);
                for (z, &s) in dst.iter_mut().zip(self.coils.coil(ci)) {
                    *z = *z * s;
                }
                self.fft.forward_with(dst, work);
                for (z, &keep) in dst.iter_mut().zip(self.masks.frame(t)) {
                    if !keep {
                        *z = czero();
                    }
                }
            },
        );
        Ok(y)
    }

    pub fn adjoint(&self, y: &KSpace<T>) -> Result<Tsmi<T>> {
        self.check_kspace(y)?;
        let (c, l, n) = self.kspace_dim();
        let (h, w) = self.dims();
        let src = y.as_slice();
        let mut frames = Tsmi::zeros(l, h, w);
        frames.as_slice_mut().par_chunks_mut(n).enumerate().for_each_init(
            || (self.fft.workspace(), vec![czero(); n]),
            |(work, buf), (t, acc)| {
                for ci in 0..c {
                    let row = &src[(ci * l + t) * n..(ci * l + t + 1) * n];
                    for ((b, &z), &keep) in buf.iter_mut().zip(row).zip(self.masks.frame(t)) {
                        *b = if keep { z } else { czero() };
                    }
                    self.fft.inverse_with(buf, work);
                    for ((a, &b), &s) in acc.iter_mut().zip(buf.iter()).zip(self.coils.coil(ci)) {
                        *a += s.conj() * b;
                    }
                }
            },
        );
        self.basis.compress(&frames)
    }

    /// `adjoint(forward(x))` without materializing k-space.
    pub fn normal(&self, x: &Tsmi<T>) -> Result<Tsmi<T>> {
        self.check_image(x)?;
        let (c, l, n) = self.kspace_dim();
        let (h, w) = self.dims();
        let mut frames = Tsmi::zeros(l, h, w);
        frames.as_slice_mut().par_chunks_mut(n).enumerate().for_each_init(
            || (self.fft.workspace(), vec![czero(); n], vec![czero(); n]),
            |(work, u, buf), (t, acc)| {
                self.basis.decompress_frame_into(x, t, u);
                for ci in 0..c {
                    let s = self.coils.coil(ci);
                    for ((b, &z), &sv) in buf.iter_mut().zip(u.iter()).zip(s) {
                        *b = z * sv;
                    }
                    self.fft.forward_with(buf, work);
                    for (b, &keep) in buf.iter_mut().zip(self.masks.frame(t)) {
                        if !keep {
                            *b = czero();
                        }
                    }
                    self.fft.inverse_with(buf, work);
                    for ((a, &b), &sv) in acc.iter_mut().zip(buf.iter()).zip(s) {
                        *a += sv.conj() * b;
                    }
                }
            },
        );
        self.basis.compress(&frames)
    }

    /// Adds complex white noise to the sampled entries of `y`, with standard
    /// deviation `rel_sigma` times their root-mean-square magnitude.
    pub fn add_noise(&self, y: &mut KSpace<T>, rel_sigma: T, seed: u64) -> Result<()> {
        self.check_kspace(y)?;
        if !(rel_sigma >= T::zero() && rel_sigma.is_finite()) {
            return Err(domain!("noise level must be finite and >= 0, got {rel_sigma}"));
        }
        let (c, l, n) = self.kspace_dim();
        let sampled: usize = (0..l).map(|t| self.masks.samples(t)).sum::<usize>() * c;
        if rel_sigma == T::zero() || sampled == 0 {
            return Ok(());
        }
        let sd = rel_sigma * (y.norm_sqr() / T::lit(sampled as f64)).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = std::f64::consts::FRAC_1_SQRT_2;
        for (row, chunk) in y.as_slice_mut().chunks_mut(n).enumerate() {
            for (z, &keep) in chunk.iter_mut().zip(self.masks.frame(row % l)) {
                if keep {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    *z = *z + cplx(T::lit(re * half), T::lit(im * half)) * sd;
                }
            }
        }
        Ok(())
    }

    /// Relative residual `|y - A x| / |y|` over sampled entries.
    pub fn residual(&self, y: &KSpace<T>, x: &Tsmi<T>) -> Result<T> {
        let pred = self.forward(x)?;
        let num: T = y.as_slice().iter().zip(pred.as_slice()).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok((num / y.norm_sqr()).sqrt())
    }
}
