//! Unitary 2-D FFT over row-major `h x w` images.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::scalar::{czero, Cplx, Real};

#[derive(Clone)]
pub(crate) struct Fft2<T: Real> {
    h: usize,
    w: usize,
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
    scale: T,
}

impl<T: Real> std::fmt::Debug for Fft2<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({}x{})", self.h, self.w)
    }
}

impl<T: Real> Fft2<T> {
    pub fn new(h: usize, w: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            h,
            w,
            row_fwd: planner.plan_fft_forward(w),
            row_inv: planner.plan_fft_inverse(w),
            col_fwd: planner.plan_fft_forward(h),
            col_inv: planner.plan_fft_inverse(h),
            scale: T::from_usize_lossy(h * w).sqrt().recip(),
        }
    }

    /// Reusable buffers for repeated transforms on one thread.
    pub fn workspace(&self) -> FftWork<T> {
        let scratch = self.row_fwd.get_inplace_scratch_len().max(self.col_fwd.get_inplace_scratch_len());
        let scratch = scratch.max(self.row_inv.get_inplace_scratch_len()).max(self.col_inv.get_inplace_scratch_len());
        FftWork { scratch: vec![czero(); scratch], t: vec![czero(); self.h * self.w] }
    }

    #[cfg(test)]
    pub fn forward(&self, buf: &mut [Cplx<T>]) {
        self.forward_with(buf, &mut self.workspace());
    }

    #[cfg(test)]
    pub fn inverse(&self, buf: &mut [Cplx<T>]) {
        self.inverse_with(buf, &mut self.workspace());
    }

    pub fn forward_with(&self, buf: &mut [Cplx<T>], work: &mut FftWork<T>) {
        self.run(buf, &self.row_fwd, &self.col_fwd, work);
    }

    pub fn inverse_with(&self, buf: &mut [Cplx<T>], work: &mut FftWork<T>) {
        self.run(buf, &self.row_inv, &self.col_inv, work);
    }

    fn run(&self, buf: &mut [Cplx<T>], rows: &Arc<dyn Fft<T>>, cols: &Arc<dyn Fft<T>>, work: &mut FftWork<T>) {
        let (h, w) = (self.h, self.w);
        debug_assert_eq!(buf.len(), h * w);
        if w > 1 {
            rows.process_with_scratch(buf, &mut work.scratch);
        }
        if h > 1 {
            transpose::transpose(buf, &mut work.t, w, h);
            cols.process_with_scratch(&mut work.t, &mut work.scratch);
            transpose::transpose(&work.t, buf, h, w);
        }
        for z in buf.iter_mut() {
            *z = *z * self.scale;
        }
    }
}

pub(crate) struct FftWork<T: Real> {
    scratch: Vec<Cplx<T>>,
    t: Vec<Cplx<T>>,
}
