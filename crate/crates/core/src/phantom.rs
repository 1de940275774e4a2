//! Synthetic brain-like quantitative maps and their Bloch-consistent series.

use std::collections::HashMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dictionary::{Basis, Lut, MatchResult};
use crate::epg::{epg_fisp, SequenceParams};
use crate::error::{domain, Result};
use crate::scalar::{cplx, czero, Cplx, Real};
use crate::tsmi::Tsmi;

/// Representative relaxation values (ms) and proton density per tissue.
/// Literature-typical figures for 1.5-3 T brain, chosen for the phantom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tissue {
    WhiteMatter,
    GreyMatter,
    Csf,
    DeepGrey,
    Lesion,
}

impl Tissue {
    pub const ALL: [Tissue; 5] = [Tissue::WhiteMatter, Tissue::GreyMatter, Tissue::Csf, Tissue::DeepGrey, Tissue::Lesion];

    /// `(T1 ms, T2 ms, proton density)`
    pub fn properties(self) -> (f64, f64, f64) {
        match self {
            Tissue::WhiteMatter => (800.0, 70.0, 0.70),
            Tissue::GreyMatter => (1300.0, 100.0, 0.80),
            Tissue::Csf => (4000.0, 1800.0, 1.00),
            Tissue::DeepGrey => (1100.0, 90.0, 0.78),
            Tissue::Lesion => (1600.0, 180.0, 0.85),
        }
    }
}

/// Per-voxel T1/T2 (ms), complex proton density, and foreground mask.
#[derive(Debug, Clone, PartialEq)]
pub struct QMaps<T: Real> {
    pub t1_map: Array2<T>,
    pub t2_map: Array2<T>,
    pub rho_map: Array2<Cplx<T>>,
    pub mask: Array2<bool>,
}

impl<T: Real> QMaps<T> {
    pub fn dims(&self) -> (usize, usize) {
        self.mask.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.mask.dim();
        if self.t1_map.dim() != dim || self.t2_map.dim() != dim || self.rho_map.dim() != dim {
            return Err(domain!("qmaps components disagree on shape"));
        }
        for ((i, j), &inside) in self.mask.indexed_iter() {
            let (t1, t2, rho) = (self.t1_map[(i, j)], self.t2_map[(i, j)], self.rho_map[(i, j)]);
            if inside {
                if !(t2 > T::zero() && t2 <= t1 && t1.is_finite() && rho.norm() > T::zero()) {
                    return Err(domain!("voxel ({i}, {j}) has invalid tissue values T1={t1} T2={t2}"));
                }
            } else if t1 != T::zero() || t2 != T::zero() || rho != czero() {
                return Err(domain!("voxel ({i}, {j}) outside the mask is not zero"));
            }
        }
        Ok(())
    }

    /// Maps from a dictionary match; voxels with `rho = 0` fall outside the mask.
    pub fn from_match(m: &MatchResult<T>) -> Self {
        let mask = m.rho_map.mapv(|r| r.norm() > T::zero());
        let keep = |a: &Array2<T>| Array2::from_shape_fn(a.dim(), |ij| if mask[ij] { a[ij] } else { T::zero() });
        Self { t1_map: keep(&m.t1_map), t2_map: keep(&m.t2_map), rho_map: m.rho_map.clone(), mask }
    }

    pub fn foreground(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, Copy)]
struct Ellipse {
    cy: f64,
    cx: f64,
    ay: f64,
    ax: f64,
    rot: f64,
}

impl Ellipse {
    fn level(&self, y: f64, x: f64) -> f64 {
        let (s, c) = self.rot.sin_cos();
        let (dy, dx) = (y - self.cy, x - self.cx);
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        (v / self.ay).powi(2) + (u / self.ax).powi(2)
    }

    fn contains(&self, y: f64, x: f64) -> bool {
        self.level(y, x) <= 1.0
    }
}

/// Ellipse-composition head phantom with five tissue classes.
///
/// `on_grid` snaps every tissue's `(T1, T2)` to its nearest LUT entry.
pub fn make_phantom<T: Real>(h: usize, w: usize, seed: u64, on_grid: Option<&Lut<T>>) -> Result<QMaps<T>> {
    if h < 16 || w < 16 {
        return Err(domain!("phantom needs h, w >= 16, got {h}x{w}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jit = |a: f64| rng.random_range(-a..=a);

    let head = Ellipse { cy: jit(0.03), cx: jit(0.03), ay: 0.82 * (1.0 + jit(0.04)), ax: 0.68 * (1.0 + jit(0.04)), rot: jit(0.08) };
    let scaled = |e: &Ellipse, f: f64| Ellipse { ay: e.ay * f, ax: e.ax * f, ..*e };
    let csf_rim = scaled(&head, 0.93);
    let cortex = scaled(&head, 0.80);
    let ventricles = [
        Ellipse { cy: head.cy - 0.12 + jit(0.02), cx: head.cx - 0.11, ay: 0.22 * (1.0 + jit(0.1)), ax: 0.07, rot: 0.3 + jit(0.1) },
        Ellipse { cy: head.cy - 0.12 + jit(0.02), cx: head.cx + 0.11, ay: 0.22 * (1.0 + jit(0.1)), ax: 0.07, rot: -0.3 + jit(0.1) },
    ];
    let deep = [
        Ellipse { cy: head.cy + 0.18, cx: head.cx - 0.2 + jit(0.02), ay: 0.11, ax: 0.09, rot: jit(0.2) },
        Ellipse { cy: head.cy + 0.18, cx: head.cx + 0.2 + jit(0.02), ay: 0.11, ax: 0.09, rot: jit(0.2) },
    ];
    let lesion = Ellipse { cy: head.cy + jit(0.4), cx: head.cx + 0.35 * jit(1.0), ay: 0.06, ax: 0.05, rot: 0.0 };
    let rho_coef = [jit(0.1), jit(0.1)];
    let phase_coef = [jit(0.4), jit(0.4), jit(0.3)];

    let values: HashMap<Tissue, (T, T)> = Tissue::ALL
        .iter()
        .map(|&t| {
            let (t1, t2, _) = t.properties();
            let (t1, t2) = (T::lit(t1), T::lit(t2));
            let v = match on_grid {
                Some(lut) => lut.get(lut.nearest(t1, t2)),
                None => (t1, t2),
            };
            (t, v)
        })
        .collect();

    let mut q = QMaps {
        t1_map: Array2::zeros((h, w)),
        t2_map: Array2::zeros((h, w)),
        rho_map: Array2::from_elem((h, w), czero()),
        mask: Array2::from_elem((h, w), false),
    };
    for i in 0..h {
        for j in 0..w {
            let y = 2.0 * (i as f64 + 0.5) / h as f64 - 1.0;
            let x = 2.0 * (j as f64 + 0.5) / w as f64 - 1.0;
            if !head.contains(y, x) {
                continue;
            }
            let tissue = if !csf_rim.contains(y, x) || ventricles.iter().any(|e| e.contains(y, x)) {
                Tissue::Csf
            } else if !cortex.contains(y, x) {
                Tissue::GreyMatter
            } else if lesion.contains(y, x) {
                Tissue::Lesion
            } else if deep.iter().any(|e| e.contains(y, x)) {
                Tissue::DeepGrey
            } else {
                Tissue::WhiteMatter
            };
            let (t1, t2) = values[&tissue];
            let pd = tissue.properties().2 * (1.0 + rho_coef[0] * y + rho_coef[1] * x);
            let phase = phase_coef[0] * y + phase_coef[1] * x + phase_coef[2] * y * y;
            q.t1_map[(i, j)] = t1;
            q.t2_map[(i, j)] = t2;
            q.rho_map[(i, j)] = cplx(T::lit(pd * phase.cos()), T::lit(pd * phase.sin()));
            q.mask[(i, j)] = true;
        }
    }
    Ok(q)
}

/// Bloch-consistent series `rho_v * fingerprint(T1_v, T2_v)`, zero outside
/// the mask, compressed when a basis is given.
///
/// Voxels sharing a `(T1, T2)` pair share one simulation.
pub fn qmaps_to_tsmi<T: Real>(q: &QMaps<T>, seq: &SequenceParams<T>, basis: Option<&Basis<T>>) -> Result<Tsmi<T>> {
    q.validate()?;
    if let Some(b) = basis {
        if b.frames() != seq.len() {
            return Err(domain!("basis has {} frames, sequence has {}", b.frames(), seq.len()));
        }
    }
    let (h, w) = q.dims();
    let mut pairs: Vec<(T, T)> = Vec::new();
    let mut slot: HashMap<(u64, u64), usize> = HashMap::new();
    let mut voxel_slot = vec![usize::MAX; h * w];
    for ((i, j), &inside) in q.mask.indexed_iter() {
        if !inside {
            continue;
        }
        let (t1, t2) = (q.t1_map[(i, j)], q.t2_map[(i, j)]);
        let key = (t1.as_f64().to_bits(), t2.as_f64().to_bits());
        let next = pairs.len();
        let idx = *slot.entry(key).or_insert_with(|| {
            pairs.push((t1, t2));
            next
        });
        voxel_slot[i * w + j] = idx;
    }
    let signals: Vec<Vec<Cplx<T>>> = pairs
        .par_iter()
        .map(|&(t1, t2)| {
            let fp = epg_fisp(t1, t2, seq)?;
            Ok(match basis {
                Some(b) => b.compress_signal(&fp.samples),
                None => fp.samples,
            })
        })
        .collect::<Result<_>>()?;
    let channels = basis.map_or(seq.len(), Basis::rank);
    let mut out = Tsmi::zeros(channels, h, w);
    let n = h * w;
    let rho = q.rho_map.as_standard_layout().into_owned();
    let rho = rho.as_slice().expect("standard layout");
    let data = out.as_slice_mut();
    for (v, &idx) in voxel_slot.iter().enumerate() {
        if idx == usize::MAX {
            continue;
        }
        for (k, &a) in signals[idx].iter().enumerate() {
            data[k * n + v] = a * rho[v];
        }
    }
    Ok(out)
}
