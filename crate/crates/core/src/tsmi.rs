//! Time-series of magnetization images.

use std::ops::{Add, Sub};

use ndarray::{Array2, Array3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Result};
use crate::scalar::{all_finite, cplx, czero, dot, norm_sqr, Cplx, Real};

/// Complex image series stored channel-major as `(channels, h, w)`.
///
/// The channel axis is either `l` time frames (full) or `s` subspace
/// coefficients (compressed); the type does not distinguish the two.
#[derive(Debug, Clone, PartialEq)]
pub struct Tsmi<T: Real> {
    data: Array3<Cplx<T>>,
}

impl<T: Real> Tsmi<T> {
    pub fn zeros(channels: usize, h: usize, w: usize) -> Self {
        Self { data: Array3::from_elem((channels, h, w), czero()) }
    }

    pub fn from_array(data: Array3<Cplx<T>>) -> Self {
        let data = if data.is_standard_layout() { data } else { data.as_standard_layout().into_owned() };
        Self { data }
    }

    pub fn from_vec(channels: usize, h: usize, w: usize, v: Vec<Cplx<T>>) -> Result<Self> {
        Array3::from_shape_vec((channels, h, w), v)
            .map(|data| Self { data })
            .map_err(|e| domain!("tsmi shape: {e}"))
    }

    /// Draws entries from the standard complex Gaussian (real and imaginary
    /// parts i.i.d. N(0, 1/2)), in memory order.
    pub fn randn<R: Rng + ?Sized>(channels: usize, h: usize, w: usize, rng: &mut R) -> Self {
        let mut out = Self::zeros(channels, h, w);
        out.fill_randn(rng);
        out
    }

    pub fn fill_randn<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let half = std::f64::consts::FRAC_1_SQRT_2;
        for z in self.as_slice_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z = cplx(T::lit(re * half), T::lit(im * half));
        }
    }

    pub fn channels(&self) -> usize {
        self.data.dim().0
    }

    pub fn height(&self) -> usize {
        self.data.dim().1
    }

    pub fn width(&self) -> usize {
        self.data.dim().2
    }

    pub fn voxels(&self) -> usize {
        self.height() * self.width()
    }

    pub fn dim(&self) -> (usize, usize, usize) {
        self.data.dim()
    }

    pub fn data(&self) -> &Array3<Cplx<T>> {
        &self.data
    }

    pub fn into_array(self) -> Array3<Cplx<T>> {
        self.data
    }

    pub fn as_slice(&self) -> &[Cplx<T>] {
        self.data.as_slice().expect("standard layout")
    }

    pub fn as_slice_mut(&mut self) -> &mut [Cplx<T>] {
        self.data.as_slice_mut().expect("standard layout")
    }

    /// Contiguous image of one channel.
    pub fn channel(&self, c: usize) -> &[Cplx<T>] {
        let n = self.voxels();
        &self.as_slice()[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [Cplx<T>] {
        let n = self.voxels();
        &mut self.as_slice_mut()[c * n..(c + 1) * n]
    }

    /// Signal of flat voxel index `v` across channels.
    pub fn voxel(&self, v: usize) -> Vec<Cplx<T>> {
        let n = self.voxels();
        let s = self.as_slice();
        (0..self.channels()).map(|c| s[c * n + v]).collect()
    }

    pub fn set_voxel(&mut self, v: usize, values: &[Cplx<T>]) {
        let n = self.voxels();
        let s = self.as_slice_mut();
        for (c, &z) in values.iter().enumerate() {
            s[c * n + v] = z;
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.dim() == other.dim()
    }

    pub fn check_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(domain!("{what}: shape {:?} vs {:?}", self.dim(), other.dim()))
        }
    }

    /// Hermitian inner product `<self, other>`.
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

    pub fn scale(&mut self, a: T) {
        for z in self.as_slice_mut() {
            *z = *z * a;
        }
    }

    pub fn scaled(&self, a: T) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn scaled_c(&self, a: Cplx<T>) -> Self {
        Self { data: self.data.mapv(|z| z * a) }
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: T, x: &Self) {
        debug_assert!(self.same_shape(x));
        for (z, &u) in self.as_slice_mut().iter_mut().zip(x.as_slice()) {
            *z += u * a;
        }
    }

    /// `a * x + b * y`
    pub fn lin_comb(a: T, x: &Self, b: T, y: &Self) -> Self {
        debug_assert!(x.same_shape(y));
        let v = x.as_slice().iter().zip(y.as_slice()).map(|(&u, &w)| u * a + w * b).collect();
        let (c, h, w) = x.dim();
        Self::from_vec(c, h, w, v).expect("shape preserved")
    }

    /// Magnitude of every voxel signal, `(h, w)`.
    pub fn voxel_norms(&self) -> Array2<T> {
        let (c, h, w) = self.dim();
        let n = h * w;
        let s = self.as_slice();
        Array2::from_shape_fn((h, w), |(i, j)| {
            let v = i * w + j;
            (0..c).map(|k| s[k * n + v].norm_sqr()).sum::<T>().sqrt()
        })
    }
}

impl<T: Real> Add for &Tsmi<T> {
    type Output = Tsmi<T>;
    fn add(self, rhs: Self) -> Tsmi<T> {
        Tsmi::lin_comb(T::one(), self, T::one(), rhs)
    }
}

impl<T: Real> Sub for &Tsmi<T> {
    type Output = Tsmi<T>;
    fn sub(self, rhs: Self) -> Tsmi<T> {
        Tsmi::lin_comb(T::one(), self, -T::one(), rhs)
    }
}
