//! Fingerprint dictionaries, temporal subspace compression, and matching.

use nalgebra::DMatrix;
use ndarray::{Array2, Array3};
use num_complex::Complex;
use rayon::prelude::*;

use crate::epg::{epg_fisp, SequenceParams};
use crate::error::{domain, numeric, Result};
use crate::scalar::{czero, dot, norm_sqr, Cplx, Real};
use crate::tsmi::Tsmi;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

/// One axis of a parameter grid: `count` points from `lo` to `hi` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRange<T> {
    pub lo: T,
    pub hi: T,
    pub count: usize,
}

impl<T: Real> GridRange<T> {
    pub fn new(lo: T, hi: T, count: usize) -> Self {
        Self { lo, hi, count }
    }

    pub fn points(&self, spacing: Spacing) -> Result<Vec<T>> {
        let GridRange { lo, hi, count } = *self;
        if count == 0 || !(lo > T::zero()) || !hi.is_finite() || hi < lo || (count > 1 && hi == lo) {
            return Err(domain!("grid range ({lo}, {hi}, {count}) needs 0 < lo < hi and count >= 1"));
        }
        if count == 1 {
            return Ok(vec![lo]);
        }
        let denom = T::from_usize_lossy(count - 1);
        Ok((0..count)
            .map(|i| {
                let f = T::from_usize_lossy(i) / denom;
                match spacing {
                    Spacing::Linear => lo + (hi - lo) * f,
                    Spacing::Log => lo * (hi / lo).powf(f),
                }
            })
            .collect())
    }
}

/// Lookup table of `(T1, T2)` pairs in milliseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Lut<T: Real> {
    entries: Vec<(T, T)>,
}

impl<T: Real> Lut<T> {
    pub fn new(entries: Vec<(T, T)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(domain!("lookup table is empty"));
        }
        for (j, &(t1, t2)) in entries.iter().enumerate() {
            if !(t2 > T::zero() && t2 <= t1 && t1.is_finite()) {
                return Err(domain!("lut entry {j} = ({t1}, {t2}) violates 0 < t2 <= t1"));
            }
        }
        let mut sorted: Vec<(T, T)> = entries.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(domain!("lookup table has duplicate pairs"));
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(T, T)] {
        &self.entries
    }

    pub fn get(&self, j: usize) -> (T, T) {
        self.entries[j]
    }

    pub fn contains(&self, t1: T, t2: T) -> bool {
        self.entries.iter().any(|&e| e == (t1, t2))
    }

    /// Entry closest in log-relaxation space; ties go to the lowest index.
    pub fn nearest(&self, t1: T, t2: T) -> usize {
        let (l1, l2) = (t1.ln(), t2.ln());
        let mut best = (0, T::infinity());
        for (j, &(a, b)) in self.entries.iter().enumerate() {
            let d = (a.ln() - l1).powi(2) + (b.ln() - l2).powi(2);
            if d < best.1 {
                best = (j, d);
            }
        }
        best.0
    }
}

/// Cartesian product of two 1-D grids, t1-major, keeping only `t2 <= t1`.
pub fn build_grid<T: Real>(t1: GridRange<T>, t2: GridRange<T>, spacing: Spacing) -> Result<Lut<T>> {
    let t1s = t1.points(spacing)?;
    let t2s = t2.points(spacing)?;
    let entries: Vec<(T, T)> = t1s
        .iter()
        .flat_map(|&a| t2s.iter().filter(move |&&b| b <= a).map(move |&b| (a, b)))
        .collect();
    if entries.is_empty() {
        return Err(domain!("no (t1, t2) pair satisfies t2 <= t1"));
    }
    Lut::new(entries)
}

/// Orthonormal temporal basis, `l x s`.
///
/// Compression maps a frame signal `u` (row vector) to `u V`; decompression
/// maps coefficients `c` back to `c V^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis<T: Real> {
    v: Array2<Cplx<T>>,
}

impl<T: Real> Basis<T> {
    pub fn new(v: Array2<Cplx<T>>, tol: T) -> Result<Self> {
        let b = Self { v: v.as_standard_layout().into_owned() };
        let err = b.orthonormality_error();
        if !(err <= tol) {
            return Err(domain!("basis columns not orthonormal (max deviation {err:e})"));
        }
        Ok(b)
    }

    pub fn identity(l: usize) -> Self {
        Self {
            v: Array2::from_shape_fn((l, l), |(i, j)| if i == j { Complex::new(T::one(), T::zero()) } else { czero() }),
        }
    }

    pub fn frames(&self) -> usize {
        self.v.nrows()
    }

    pub fn rank(&self) -> usize {
        self.v.ncols()
    }

    pub fn matrix(&self) -> &Array2<Cplx<T>> {
        &self.v
    }

    /// Max entry of `|V^H V - I|`.
    pub fn orthonormality_error(&self) -> T {
        let (l, s) = self.v.dim();
        let mut worst = T::zero();
        for a in 0..s {
            for b in 0..s {
                let mut acc = czero::<T>();
                for t in 0..l {
                    acc += self.v[(t, a)].conj() * self.v[(t, b)];
                }
                if a == b {
                    acc -= Complex::new(T::one(), T::zero());
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }

    pub fn compress_signal(&self, u: &[Cplx<T>]) -> Vec<Cplx<T>> {
        let (l, s) = self.v.dim();
        debug_assert_eq!(u.len(), l);
        (0..s)
            .map(|k| {
                let mut acc = czero();
                for t in 0..l {
                    acc += u[t] * self.v[(t, k)];
                }
                acc
            })
            .collect()
    }

    pub fn decompress_signal(&self, c: &[Cplx<T>]) -> Vec<Cplx<T>> {
        let (l, s) = self.v.dim();
        debug_assert_eq!(c.len(), s);
        (0..l)
            .map(|t| {
                let mut acc = czero();
                for k in 0..s {
                    acc += c[k] * self.v[(t, k)].conj();
                }
                acc
            })
            .collect()
    }

    /// `l`-frame series to `s` coefficient images.
    pub fn compress(&self, x: &Tsmi<T>) -> Result<Tsmi<T>> {
        let (l, s) = self.v.dim();
        if x.channels() != l {
            return Err(domain!("compress: series has {} frames, basis expects {l}", x.channels()));
        }
        let (h, w) = (x.height(), x.width());
        let mut out = Tsmi::zeros(s, h, w);
        let n = h * w;
        out.as_slice_mut().par_chunks_mut(n).enumerate().for_each(|(k, dst)| {
            for t in 0..l {
                let coef = self.v[(t, k)];
                for (d, &u) in dst.iter_mut().zip(x.channel(t)) {
                    *d += u * coef;
                }
            }
        });
        Ok(out)
    }

    /// `s` coefficient images to an `l`-frame series.
    pub fn decompress(&self, x: &Tsmi<T>) -> Result<Tsmi<T>> {
        let (l, s) = self.v.dim();
        if x.channels() != s {
            return Err(domain!("decompress: got {} channels, basis rank is {s}", x.channels()));
        }
        let (h, w) = (x.height(), x.width());
        let mut out = Tsmi::zeros(l, h, w);
        out.as_slice_mut().par_chunks_mut(h * w).enumerate().for_each(|(t, dst)| {
            self.decompress_frame_into(x, t, dst);
        });
        Ok(out)
    }

    /// Writes frame `t` of the decompressed series into `dst`.
    pub(crate) fn decompress_frame_into(&self, x: &Tsmi<T>, t: usize, dst: &mut [Cplx<T>]) {
        const BLOCK: usize = 512;
        let coefs: Vec<Cplx<T>> = (0..self.rank()).map(|k| self.v[(t, k)].conj()).collect();
        for (b, block) in dst.chunks_mut(BLOCK).enumerate() {
            block.fill(czero());
            for (k, &coef) in coefs.iter().enumerate() {
                for (d, &c) in block.iter_mut().zip(&x.channel(k)[b * BLOCK..]) {
                    *d += c * coef;
                }
            }
        }
    }
}

/// Free-function form of [`Basis::compress`].
pub fn compress<T: Real>(x: &Tsmi<T>, basis: &Basis<T>) -> Result<Tsmi<T>> {
    basis.compress(x)
}

/// Free-function form of [`Basis::decompress`].
pub fn decompress<T: Real>(x: &Tsmi<T>, basis: &Basis<T>) -> Result<Tsmi<T>> {
    basis.decompress(x)
}

#[derive(Debug, Clone)]
pub struct Dictionary<T: Real> {
    lut: Lut<T>,
    atoms_full: Array2<Cplx<T>>,
    basis: Basis<T>,
    atoms_compressed: Array2<Cplx<T>>,
    atom_norms: Vec<T>,
    /// Singular values of the full atom matrix, descending (length `l`).
    singular_values: Vec<T>,
    /// `conj(D_j) / |D_j|`, flattened `d x s`, used by the matcher.
    unit_conj: Vec<Cplx<T>>,
}

impl<T: Real> Dictionary<T> {
    /// Simulates every LUT entry and keeps the top-`s` right singular vectors.
    pub fn build(lut: Lut<T>, seq: &SequenceParams<T>, s: usize) -> Result<Self> {
        let atoms = simulate_atoms(&lut, seq)?;
        let (d, l) = atoms.dim();
        if s == 0 || s > d.min(l) {
            return Err(domain!("subspace rank s={s} must satisfy 1 <= s <= min(d={d}, l={l})"));
        }
        let (basis, singular_values) = svd_basis(&atoms, s)?;
        let mut dict = Self::from_atoms(lut, atoms, basis)?;
        dict.singular_values = singular_values;
        Ok(dict)
    }

    /// Assembles a dictionary from precomputed atoms and an externally chosen basis.
    pub fn from_atoms(lut: Lut<T>, atoms_full: Array2<Cplx<T>>, basis: Basis<T>) -> Result<Self> {
        let (d, l) = atoms_full.dim();
        if d != lut.len() {
            return Err(domain!("{d} atoms for a lut of {} entries", lut.len()));
        }
        if l != basis.frames() {
            return Err(domain!("atoms have {l} frames, basis has {}", basis.frames()));
        }
        let s = basis.rank();
        let atoms_full = atoms_full.as_standard_layout().into_owned();
        let rows: Vec<Vec<Cplx<T>>> = (0..d)
            .into_par_iter()
            .map(|j| basis.compress_signal(atoms_full.row(j).as_slice().expect("row")))
            .collect();
        let atoms_compressed = Array2::from_shape_vec((d, s), rows.concat()).expect("d x s");
        let atom_norms: Vec<T> = (0..d)
            .map(|j| norm_sqr(atoms_compressed.row(j).as_slice().expect("row")).sqrt())
            .collect();
        if let Some(j) = atom_norms.iter().position(|n| !(n.is_finite() && *n > T::zero())) {
            return Err(numeric!("atom {j} {:?} has zero or non-finite compressed norm", lut.get(j)));
        }
        let mut unit_conj = Vec::with_capacity(d * s);
        for j in 0..d {
            let inv = atom_norms[j].recip();
            unit_conj.extend(atoms_compressed.row(j).iter().map(|z| z.conj() * inv));
        }
        Ok(Self { lut, atoms_full, basis, atoms_compressed, atom_norms, singular_values: Vec::new(), unit_conj })
    }

    pub fn lut(&self) -> &Lut<T> {
        &self.lut
    }

    pub fn atoms_full(&self) -> &Array2<Cplx<T>> {
        &self.atoms_full
    }

    pub fn atoms_compressed(&self) -> &Array2<Cplx<T>> {
        &self.atoms_compressed
    }

    pub fn atom(&self, j: usize) -> &[Cplx<T>] {
        let s = self.rank();
        &self.atoms_compressed.as_slice().expect("standard layout")[j * s..(j + 1) * s]
    }

    pub fn atom_norms(&self) -> &[T] {
        &self.atom_norms
    }

    pub fn basis(&self) -> &Basis<T> {
        &self.basis
    }

    pub(crate) fn set_singular_values(&mut self, sv: Vec<T>) {
        self.singular_values = sv;
    }

    pub fn singular_values(&self) -> &[T] {
        &self.singular_values
    }

    pub fn len(&self) -> usize {
        self.lut.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lut.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    /// Fraction of atom-matrix energy outside the leading `s` singular directions.
    pub fn tail_energy(&self, s: usize) -> Option<T> {
        if self.singular_values.is_empty() {
            return None;
        }
        let total: T = self.singular_values.iter().map(|&x| x * x).sum();
        let tail: T = self.singular_values.iter().skip(s).map(|&x| x * x).sum();
        Some(tail / total)
    }

    /// Best atom for one compressed signal: `(index, rho)`.
    pub fn match_signal(&self, x: &[Cplx<T>]) -> (usize, Cplx<T>) {
        let s = self.rank();
        let mut best = (0usize, T::neg_infinity(), czero());
        for (j, unit) in self.unit_conj.chunks_exact(s).enumerate() {
            let mut acc = czero::<T>();
            for k in 0..s {
                acc += unit[k] * x[k];
            }
            let score = acc.norm_sqr();
            if score > best.1 {
                best = (j, score, acc);
            }
        }
        let (j, _, corr) = best;
        (j, corr / self.atom_norms[j])
    }
}

fn simulate_atoms<T: Real>(lut: &Lut<T>, seq: &SequenceParams<T>) -> Result<Array2<Cplx<T>>> {
    let rows: Vec<Vec<Cplx<T>>> = lut
        .entries()
        .par_iter()
        .map(|&(t1, t2)| epg_fisp(t1, t2, seq).map(|f| f.samples))
        .collect::<Result<_>>()?;
    Ok(Array2::from_shape_vec((lut.len(), seq.len()), rows.concat()).expect("d x l"))
}

/// Top-`s` right singular vectors from the Hermitian eigendecomposition of
/// `D^H D`, computed in double precision.
fn svd_basis<T: Real>(atoms: &Array2<Cplx<T>>, s: usize) -> Result<(Basis<T>, Vec<T>)> {
    let (d, l) = atoms.dim();
    let mut gram = DMatrix::<Complex<f64>>::zeros(l, l);
    let rows: Vec<Vec<Complex<f64>>> = (0..d)
        .map(|j| atoms.row(j).iter().map(|z| Complex::new(z.re.as_f64(), z.im.as_f64())).collect())
        .collect();
    let cols: Vec<Vec<Complex<f64>>> = (0..l)
        .into_par_iter()
        .map(|b| {
            (0..l)
                .map(|a| {
                    let mut acc = Complex::new(0.0, 0.0);
                    for r in &rows {
                        acc += r[a].conj() * r[b];
                    }
                    acc
                })
                .collect()
        })
        .collect();
    for (b, col) in cols.iter().enumerate() {
        for (a, &g) in col.iter().enumerate() {
            gram[(a, b)] = g;
        }
    }
    if gram.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(numeric!("atom matrix contains non-finite values"));
    }
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).expect("finite eigenvalues"));
    if !(eig.eigenvalues[order[0]] > 0.0) {
        return Err(numeric!("atom matrix has no energy; SVD is degenerate"));
    }
    let mut v = Array2::from_elem((l, s), czero::<T>());
    for (k, &col) in order.iter().take(s).enumerate() {
        let vec = eig.eigenvectors.column(col);
        // canonical phase: largest entry real and positive
        let pivot = vec.iter().copied().fold(Complex::new(0.0, 0.0), |m, z| if z.norm() > m.norm() { z } else { m });
        let phase = pivot.conj() / pivot.norm();
        for t in 0..l {
            let z = vec[t] * phase;
            v[(t, k)] = Complex::new(T::lit(z.re), T::lit(z.im));
        }
    }
    let singular: Vec<T> = order.iter().map(|&i| T::lit(eig.eigenvalues[i].max(0.0).sqrt())).collect();
    let tol = T::lit(1e-4).max(T::epsilon() * T::lit(100.0));
    let basis = Basis::new(v, tol).map_err(|e| numeric!("svd basis: {e}"))?;
    Ok((basis, singular))
}

#[derive(Debug, Clone)]
pub struct MatchResult<T: Real> {
    pub indices: Array2<usize>,
    pub t1_map: Array2<T>,
    pub t2_map: Array2<T>,
    pub rho_map: Array2<Cplx<T>>,
    /// Bloch-consistent projection `rho * D_j`, compressed.
    pub projected: Tsmi<T>,
}

/// Voxel-wise projection of a compressed series onto the dictionary.
///
/// Each voxel takes the atom maximizing the normalized correlation
/// magnitude (lowest index on ties) with the least-squares complex scale.
/// An all-zero voxel maps to atom 0 with `rho = 0`.
pub fn dict_match<T: Real>(x: &Tsmi<T>, dict: &Dictionary<T>) -> Result<MatchResult<T>> {
    let s = dict.rank();
    if x.channels() != s {
        return Err(domain!("dict_match: series has {} channels, dictionary rank is {s}", x.channels()));
    }
    let (h, w) = (x.height(), x.width());
    let n = h * w;
    let src = x.as_slice();
    let matches: Vec<(usize, Cplx<T>)> = (0..n)
        .into_par_iter()
        .map(|v| {
            let sig: Vec<Cplx<T>> = (0..s).map(|k| src[k * n + v]).collect();
            dict.match_signal(&sig)
        })
        .collect();

    let mut projected = Array3::from_elem((s, h, w), czero());
    let proj = projected.as_slice_mut().expect("standard layout");
    for (v, &(j, rho)) in matches.iter().enumerate() {
        for (k, &a) in dict.atom(j).iter().enumerate() {
            proj[k * n + v] = a * rho;
        }
    }
    let at = |f: &dyn Fn(usize) -> T| Array2::from_shape_fn((h, w), |(i, c)| f(i * w + c));
    Ok(MatchResult {
        indices: Array2::from_shape_fn((h, w), |(i, c)| matches[i * w + c].0),
        t1_map: at(&|v| dict.lut.get(matches[v].0).0),
        t2_map: at(&|v| dict.lut.get(matches[v].0).1),
        rho_map: Array2::from_shape_fn((h, w), |(i, c)| matches[i * w + c].1),
        projected: Tsmi::from_array(projected),
    })
}

/// Residual `|x - rho D_j|^2` of the best scale for atom `j` (closed form).
pub fn atom_residual<T: Real>(x: &[Cplx<T>], atom: &[Cplx<T>]) -> T {
    let c = dot(atom, x);
    norm_sqr(x) - c.norm_sqr() / norm_sqr(atom)
}
