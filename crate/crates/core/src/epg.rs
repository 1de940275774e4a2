//! Extended phase graph simulation of an unbalanced FISP train.
//!
//! Each repetition applies an instantaneous RF rotation about a fixed axis,
//! relaxes for TE, samples the `F+_0` state, relaxes for the remainder of
//! TR, and then dephases by one unit gradient moment. An optional ideal
//! inversion followed by TI of free relaxation precedes the first pulse.

use crate::error::{domain, Result};
use crate::scalar::{cplx, czero, Cplx, Real};

pub const DEFAULT_TR_MS: f64 = 10.0;
pub const DEFAULT_TE_MS: f64 = 1.908;
pub const DEFAULT_TI_MS: f64 = 18.0;

/// Flip-angle train generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlipScheme {
    /// Half-sine lobes rising from `lo_deg` to `hi_deg` and back, each
    /// `lobe_len` frames long.
    SinusoidalRamp { lo_deg: f64, hi_deg: f64, lobe_len: usize },
    Constant { deg: f64 },
}

impl Default for FlipScheme {
    fn default() -> Self {
        FlipScheme::SinusoidalRamp { lo_deg: 10.0, hi_deg: 70.0, lobe_len: 100 }
    }
}

impl FlipScheme {
    pub fn angles<T: Real>(&self, l: usize) -> Vec<T> {
        match *self {
            FlipScheme::Constant { deg } => vec![T::lit(deg); l],
            FlipScheme::SinusoidalRamp { lo_deg, hi_deg, lobe_len } => {
                let lobe = lobe_len.max(1) as f64;
                (0..l)
                    .map(|i| {
                        let phase = (i % lobe_len.max(1)) as f64 / lobe;
                        T::lit(lo_deg + (hi_deg - lo_deg) * (std::f64::consts::PI * phase).sin())
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceParams<T: Real> {
    pub flip_angles_deg: Vec<T>,
    pub tr_ms: T,
    pub te_ms: T,
    pub ti_ms: T,
    pub inversion: bool,
    pub n_epg_states: usize,
}

impl<T: Real> SequenceParams<T> {
    /// Builds and validates a sequence with `l + 1` phase states.
    pub fn new(flip_angles_deg: Vec<T>, tr_ms: T, te_ms: T, ti_ms: T, inversion: bool) -> Result<Self> {
        let n_epg_states = default_states(flip_angles_deg.len());
        let seq = Self { flip_angles_deg, tr_ms, te_ms, ti_ms, inversion, n_epg_states };
        seq.validate()?;
        Ok(seq)
    }

    /// Inversion-prepared FISP with the stock timing (TR/TE/TI = 10/1.908/18 ms).
    pub fn fisp(l: usize, scheme: FlipScheme) -> Result<Self> {
        Self::new(
            scheme.angles(l),
            T::lit(DEFAULT_TR_MS),
            T::lit(DEFAULT_TE_MS),
            T::lit(DEFAULT_TI_MS),
            true,
        )
    }

    pub fn with_states(mut self, n: usize) -> Result<Self> {
        self.n_epg_states = n;
        self.validate()?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.flip_angles_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flip_angles_deg.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.flip_angles_deg.is_empty() {
            return Err(domain!("sequence needs at least one flip angle"));
        }
        if !(self.te_ms >= T::zero() && self.tr_ms > self.te_ms && self.tr_ms.is_finite()) {
            return Err(domain!("timing requires tr > te >= 0, got tr={} te={}", self.tr_ms, self.te_ms));
        }
        if !(self.ti_ms >= T::zero() && self.ti_ms.is_finite()) {
            return Err(domain!("ti must be finite and >= 0, got {}", self.ti_ms));
        }
        let max = T::lit(180.0);
        if let Some((i, a)) = self
            .flip_angles_deg
            .iter()
            .enumerate()
            .find(|(_, &a)| !(a >= T::zero() && a <= max))
        {
            return Err(domain!("flip angle {i} = {a} outside [0, 180] degrees"));
        }
        if self.n_epg_states < 2 {
            return Err(domain!("n_epg_states must be >= 2"));
        }
        Ok(())
    }
}

/// `l + 1` states represent an `l`-pulse train exactly.
pub fn default_states(l: usize) -> usize {
    (l + 1).max(2)
}

/// M0-normalized transverse signal sampled at TE after every excitation.
#[derive(Debug, Clone, PartialEq)]
pub struct Fingerprint<T: Real> {
    pub samples: Vec<Cplx<T>>,
}

struct PhaseGraph<T: Real> {
    fp: Vec<Cplx<T>>,
    fm: Vec<Cplx<T>>,
    z: Vec<Cplx<T>>,
    /// Number of leading orders that can be nonzero.
    active: usize,
}

impl<T: Real> PhaseGraph<T> {
    fn equilibrium(n: usize) -> Self {
        let mut z = vec![czero(); n];
        z[0] = cplx(T::one(), T::zero());
        Self { fp: vec![czero(); n], fm: vec![czero(); n], z, active: 1 }
    }

    fn rf(&mut self, alpha: T) {
        let half = alpha * T::lit(0.5);
        let (c2, s2) = (half.cos().powi(2), half.sin().powi(2));
        let (sa, ca) = (alpha.sin(), alpha.cos());
        let isa = cplx(T::zero(), sa);
        let ihalf = cplx(T::zero(), sa * T::lit(0.5));
        for k in 0..self.active {
            let (p, m, z) = (self.fp[k], self.fm[k], self.z[k]);
            self.fp[k] = p * c2 + m * s2 - isa * z;
            self.fm[k] = p * s2 + m * c2 + isa * z;
            self.z[k] = -ihalf * p + ihalf * m + z * ca;
        }
    }

    fn relax(&mut self, e1: T, e2: T) {
        for k in 0..self.active {
            self.fp[k] = self.fp[k] * e2;
            self.fm[k] = self.fm[k] * e2;
            self.z[k] = self.z[k] * e1;
        }
        self.z[0] += cplx(T::one() - e1, T::zero());
    }

    /// One unit of gradient dephasing; the highest order falls off the graph.
    fn dephase(&mut self) {
        let n = self.fp.len();
        let top = (self.active + 1).min(n);
        for k in (1..top).rev() {
            self.fp[k] = self.fp[k - 1];
        }
        for k in 0..top - 1 {
            self.fm[k] = self.fm[k + 1];
        }
        self.fm[top - 1] = czero();
        self.fp[0] = self.fm[0].conj();
        self.active = top;
    }
}

/// Simulates the FISP fingerprint of a tissue with relaxation times `t1_ms`, `t2_ms`.
pub fn epg_fisp<T: Real>(t1_ms: T, t2_ms: T, seq: &SequenceParams<T>) -> Result<Fingerprint<T>> {
    if !(t1_ms.is_finite() && t1_ms > T::zero() && t2_ms.is_finite() && t2_ms > T::zero()) {
        return Err(domain!("relaxation times must be finite and positive, got T1={t1_ms} T2={t2_ms}"));
    }
    seq.validate()?;
    let decay = |tau: T| ((-tau / t1_ms).exp(), (-tau / t2_ms).exp());
    let (e1_te, e2_te) = decay(seq.te_ms);
    let (e1_rest, e2_rest) = decay(seq.tr_ms - seq.te_ms);
    let deg = T::PI() / T::lit(180.0);

    let mut graph = PhaseGraph::equilibrium(seq.n_epg_states);
    if seq.inversion {
        graph.rf(T::PI());
        let (e1, e2) = decay(seq.ti_ms);
        graph.relax(e1, e2);
    }
    let mut samples = Vec::with_capacity(seq.len());
    for &alpha in &seq.flip_angles_deg {
        graph.rf(alpha * deg);
        graph.relax(e1_te, e2_te);
        samples.push(graph.fp[0]);
        graph.relax(e1_rest, e2_rest);
        graph.dephase();
    }
    Ok(Fingerprint { samples })
}
