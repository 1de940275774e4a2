//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use mrf_diph::acquisition::{AcquisitionModel, CoilMaps, FrameMasks, KSpace};
use mrf_diph::dictionary::{Basis, Dictionary};
use mrf_diph::epg::SequenceParams;
use mrf_diph::scalar::Cplx;
use mrf_diph::tsmi::Tsmi;
use mrf_diph::{make_coils, make_masks, MaskScheme};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type C = Complex64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Brute-force FISP simulation with `n_spins` isochromats spread over one
/// dephasing cycle, explicit rotation and relaxation.
pub fn isochromat_fisp(t1: f64, t2: f64, seq: &SequenceParams<f64>, n_spins: usize) -> Vec<C> {
    let mut m: Vec<[f64; 3]> = vec![[0.0, 0.0, 1.0]; n_spins];
    let rot_x = |m: &mut [f64; 3], a: f64| {
        let (c, s) = (a.cos(), a.sin());
        let (my, mz) = (m[1], m[2]);
        m[1] = c * my - s * mz;
        m[2] = s * my + c * mz;
    };
    let relax = |m: &mut [f64; 3], tau: f64| {
        let (e1, e2) = ((-tau / t1).exp(), (-tau / t2).exp());
        m[0] *= e2;
        m[1] *= e2;
        m[2] = m[2] * e1 + 1.0 - e1;
    };
    if seq.inversion {
        for s in m.iter_mut() {
            rot_x(s, std::f64::consts::PI);
            relax(s, seq.ti_ms);
        }
    }
    let mut out = Vec::with_capacity(seq.len());
    for &a in &seq.flip_angles_deg {
        let a = a.to_radians();
        let mut acc = C::new(0.0, 0.0);
        for (n, s) in m.iter_mut().enumerate() {
            rot_x(s, a);
            relax(s, seq.te_ms);
            acc += C::new(s[0], s[1]);
            relax(s, seq.tr_ms - seq.te_ms);
            let phi = 2.0 * std::f64::consts::PI * n as f64 / n_spins as f64;
            let (c, sn) = (phi.cos(), phi.sin());
            let (mx, my) = (s[0], s[1]);
            s[0] = c * mx - sn * my;
            s[1] = sn * mx + c * my;
        }
        out.push(acc / n_spins as f64);
    }
    out
}

pub fn vec_nrmse(est: &[C], reference: &[C]) -> f64 {
    let num: f64 = est.iter().zip(reference).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = reference.iter().map(|b| b.norm_sqr()).sum();
    (num / den).sqrt()
}

fn inner(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Minimises `|x - rho D_j|` over atoms `j` and complex `rho` by evaluating
/// every residual explicitly; the first minimiser wins.
pub fn naive_match(x: &[C], atoms: &[Vec<C>]) -> (usize, C) {
    let mut best = (0usize, C::new(0.0, 0.0), f64::INFINITY);
    for (j, d) in atoms.iter().enumerate() {
        let rho = inner(d, x) / inner(d, d).re;
        let res: f64 = x.iter().zip(d).map(|(xv, dv)| (xv - rho * dv).norm_sqr()).sum();
        if res < best.2 {
            best = (j, rho, res);
        }
    }
    if x.iter().all(|v| v.norm() == 0.0) {
        return (0, C::new(0.0, 0.0));
    }
    (best.0, best.1)
}

pub fn compressed_atoms(dict: &Dictionary<f64>) -> Vec<Vec<C>> {
    (0..dict.len()).map(|j| dict.atom(j).to_vec()).collect()
}

/// Dense matrix of the forward operator, one column per compressed unknown.
pub fn dense_forward(model: &AcquisitionModel<f64>) -> DMatrix<C> {
    let (h, w) = model.dims();
    let s = model.basis().rank();
    let n = s * h * w;
    let (c, l, hw) = model.kspace_dim();
    let mut a = DMatrix::<C>::zeros(c * l * hw, n);
    for col in 0..n {
        let mut e = Tsmi::<f64>::zeros(s, h, w);
        e.as_slice_mut()[col] = C::new(1.0, 0.0);
        let y = model.forward(&e).unwrap();
        for (row, v) in y.as_slice().iter().enumerate() {
            a[(row, col)] = *v;
        }
    }
    a
}

/// Solves `(2 A^H A + weight I) x = 2 A^H y + weight w` by dense LU.
pub fn dense_prox(model: &AcquisitionModel<f64>, y: &KSpace<f64>, w: &Tsmi<f64>, weight: f64) -> Vec<C> {
    let a = dense_forward(model);
    let ah = a.adjoint();
    let n = a.ncols();
    let lhs = (&ah * &a) * C::new(2.0, 0.0) + DMatrix::<C>::identity(n, n) * C::new(weight, 0.0);
    let yv = DVector::from_column_slice(y.as_slice());
    let wv = DVector::from_column_slice(w.as_slice());
    let rhs = (&ah * yv) * C::new(2.0, 0.0) + wv * C::new(weight, 0.0);
    lhs.lu().solve(&rhs).expect("nonsingular").iter().copied().collect()
}

/// Random complex matrix with orthonormal columns via QR.
pub fn random_basis(l: usize, s: usize, seed: u64) -> Basis<f64> {
    let mut r = rng(seed);
    let m = DMatrix::<C>::from_fn(l, s, |_, _| randc(&mut r));
    let q = m.qr().q();
    let v = ndarray::Array2::from_shape_fn((l, s), |(i, j)| q[(i, j)]);
    Basis::new(v, 1e-10).unwrap()
}

pub fn randc(r: &mut ChaCha8Rng) -> C {
    use rand_distr::{Distribution, StandardNormal};
    let re: f64 = StandardNormal.sample(r);
    let im: f64 = StandardNormal.sample(r);
    C::new(re, im)
}

pub fn random_kspace(model: &AcquisitionModel<f64>, seed: u64) -> KSpace<f64> {
    let (c, l, n) = model.kspace_dim();
    let mut r = rng(seed);
    let mut y = KSpace::zeros(c, l, n);
    for (idx, row) in y.as_slice_mut().chunks_mut(n).enumerate() {
        for (z, &keep) in row.iter_mut().zip(model.masks().frame(idx % l)) {
            if keep {
                *z = randc(&mut r);
            }
        }
    }
    y
}

pub fn small_model(h: usize, w: usize, c: usize, l: usize, s: usize, r: f64, seed: u64) -> AcquisitionModel<f64> {
    let coils: CoilMaps<f64> = make_coils(c, h, w, seed).unwrap();
    let masks: FrameMasks = make_masks(l, h, w, r, seed + 1, MaskScheme::Uniform).unwrap();
    AcquisitionModel::new(coils, masks, random_basis(l, s, seed + 2)).unwrap()
}

pub fn rel_diff(a: &[Cplx<f64>], b: &[Cplx<f64>]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

/// The standard desk experiment: on-grid 64x64 phantom, ramp sequence,
/// log-spaced dictionary, variable-density masks.
pub struct Desk {
    pub seq: SequenceParams<f64>,
    pub dict: Dictionary<f64>,
    pub q: mrf_diph::QMaps<f64>,
    pub x_ref: Tsmi<f64>,
    pub model: AcquisitionModel<f64>,
    pub y: KSpace<f64>,
}

pub struct DeskSpec {
    pub n: usize,
    pub l: usize,
    pub s: usize,
    pub r: f64,
    pub coils: usize,
    pub grid: usize,
    pub seed: u64,
}

impl Default for DeskSpec {
    fn default() -> Self {
        Self { n: 64, l: 200, s: 5, r: 5.0, coils: 4, grid: 60, seed: 1 }
    }
}

pub fn desk(spec: &DeskSpec) -> Desk {
    use mrf_diph::dictionary::{build_grid, GridRange, Spacing};
    use mrf_diph::epg::FlipScheme;
    let seq = SequenceParams::fisp(spec.l, FlipScheme::default()).unwrap();
    let lut = build_grid(GridRange::new(100.0, 4500.0, spec.grid), GridRange::new(10.0, 2500.0, spec.grid), Spacing::Log).unwrap();
    let dict = Dictionary::build(lut, &seq, spec.s).unwrap();
    let q = mrf_diph::make_phantom(spec.n, spec.n, spec.seed, Some(dict.lut())).unwrap();
    let x_ref = mrf_diph::qmaps_to_tsmi(&q, &seq, Some(dict.basis())).unwrap();
    let coils = make_coils(spec.coils, spec.n, spec.n, spec.seed).unwrap();
    let masks = make_masks(spec.l, spec.n, spec.n, spec.r, spec.seed + 1, MaskScheme::VariableDensity).unwrap();
    let model = AcquisitionModel::new(coils, masks, dict.basis().clone()).unwrap();
    let y = model.forward(&x_ref).unwrap();
    Desk { seq, dict, q, x_ref, model, y }
}
