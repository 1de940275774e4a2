//! Reconstruction error metrics, all reported in percent.

use ndarray::Array2;

use crate::acquisition::{AcquisitionModel, KSpace};
use crate::error::{domain, Result};
use crate::scalar::{Cplx, Real};
use crate::tsmi::Tsmi;

/// `100 * mean |est - ref| / |ref|` over masked voxels.
pub fn mape<T: Real>(est: &Array2<T>, reference: &Array2<T>, mask: &Array2<bool>) -> Result<T> {
    if est.dim() != reference.dim() || est.dim() != mask.dim() {
        return Err(domain!("mape: shapes {:?}, {:?}, {:?} differ", est.dim(), reference.dim(), mask.dim()));
    }
    let mut acc = T::zero();
    let mut count = 0usize;
    for ((&e, &r), &m) in est.iter().zip(reference.iter()).zip(mask.iter()) {
        if !m {
            continue;
        }
        if r == T::zero() {
            return Err(domain!("mape: reference is zero inside the mask"));
        }
        acc += ((e - r) / r).abs();
        count += 1;
    }
    if count == 0 {
        return Err(domain!("mape: empty mask"));
    }
    Ok(T::lit(100.0) * acc / T::from_usize_lossy(count))
}

/// NRMSE over `channels` equal contiguous blocks: the mean of per-block
/// ratios when `channel_averaged`, else one global ratio.
pub fn nrmse_blocks<T: Real>(est: &[Cplx<T>], reference: &[Cplx<T>], channels: usize, channel_averaged: bool) -> Result<T> {
    if est.len() != reference.len() || channels == 0 || reference.len() % channels != 0 {
        return Err(domain!("nrmse: incompatible lengths {} and {}", est.len(), reference.len()));
    }
    let ratio = |a: &[Cplx<T>], b: &[Cplx<T>]| -> Result<T> {
        let den: T = b.iter().map(|z| z.norm_sqr()).sum();
        if den == T::zero() {
            return Err(domain!("nrmse: reference has zero norm"));
        }
        let num: T = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        Ok((num / den).sqrt())
    };
    let hundred = T::lit(100.0);
    if !channel_averaged {
        return Ok(hundred * ratio(est, reference)?);
    }
    let n = reference.len() / channels;
    let mut acc = T::zero();
    for c in 0..channels {
        acc += ratio(&est[c * n..(c + 1) * n], &reference[c * n..(c + 1) * n])?;
    }
    Ok(hundred * acc / T::from_usize_lossy(channels))
}

pub fn nrmse<T: Real>(est: &Tsmi<T>, reference: &Tsmi<T>, channel_averaged: bool) -> Result<T> {
    est.check_same_shape(reference, "nrmse")?;
    nrmse_blocks(est.as_slice(), reference.as_slice(), reference.channels(), channel_averaged)
}

/// Global NRMSE between `y` and `A x_rec` over sampled k-space entries.
pub fn kspace_nrmse<T: Real>(y: &KSpace<T>, model: &AcquisitionModel<T>, x_rec: &Tsmi<T>) -> Result<T> {
    let pred = model.forward(x_rec)?;
    let (c, l, n) = y.dim();
    let (ys, ps) = (y.as_slice(), pred.as_slice());
    let (mut num, mut den) = (T::zero(), T::zero());
    for ci in 0..c {
        for t in 0..l {
            let mask = model.masks().frame(t);
            let base = (ci * l + t) * n;
            for (v, &keep) in mask.iter().enumerate() {
                if keep {
                    num += (ys[base + v] - ps[base + v]).norm_sqr();
                    den += ys[base + v].norm_sqr();
                }
            }
        }
    }
    if den == T::zero() {
        return Err(domain!("kspace_nrmse: measurements have zero norm"));
    }
    Ok(T::lit(100.0) * (num / den).sqrt())
}
