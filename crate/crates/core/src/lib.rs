//! Physics-guided diffusion reconstruction for MR fingerprinting.
//!
//! The crate covers the whole desk-scale pipeline: FISP fingerprint
//! simulation by extended phase graphs ([`epg`]), dictionary construction,
//! temporal subspace compression and matching ([`dictionary`]), a
//! multi-coil Cartesian acquisition operator ([`acquisition`]), synthetic
//! phantoms ([`phantom`]), conjugate-gradient data consistency
//! ([`solvers`]), analytic noise estimators ([`denoise`]), the diffusion
//! sampler itself ([`sampler`]), reference reconstructions
//! ([`baselines`]), error metrics ([`metrics`]), and a small binary array
//! container ([`container`]).
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the precision for callers that do not care.

pub mod acquisition;
pub mod baselines;
pub mod container;
pub mod denoise;
pub mod dictionary;
pub mod epg;
pub mod error;
mod fft;
pub mod metrics;
pub mod phantom;
pub mod sampler;
pub mod scalar;
pub mod solvers;
pub mod tsmi;

pub use error::{Error, Result};
pub use scalar::{Cplx, Real};

pub use acquisition::{make_coils, make_masks, MaskScheme};
pub use baselines::{admm_mrf, svdmrf};
pub use denoise::{estimate_noise, EstimatorKind};
pub use dictionary::{build_grid, dict_match, GridRange, Spacing};
pub use epg::{epg_fisp, FlipScheme};
pub use metrics::{kspace_nrmse, mape, nrmse};
pub use phantom::{make_phantom, qmaps_to_tsmi};
pub use sampler::{mrf_diph_sample, NoiseSource, SamplerMode};
pub use solvers::{cg_solve, prox_f};

pub type Tsmi<T = f64> = tsmi::Tsmi<T>;
pub type Tsmi32 = tsmi::Tsmi<f32>;
pub type KSpace<T = f64> = acquisition::KSpace<T>;
pub type KSpace32 = acquisition::KSpace<f32>;
pub type Dictionary<T = f64> = dictionary::Dictionary<T>;
pub type Dictionary32 = dictionary::Dictionary<f32>;
pub type Lut<T = f64> = dictionary::Lut<T>;
pub type Basis<T = f64> = dictionary::Basis<T>;
pub type AcquisitionModel<T = f64> = acquisition::AcquisitionModel<T>;
pub type AcquisitionModel32 = acquisition::AcquisitionModel<f32>;
pub type CoilMaps<T = f64> = acquisition::CoilMaps<T>;
pub type QMaps<T = f64> = phantom::QMaps<T>;
pub type QMaps32 = phantom::QMaps<f32>;
pub type SequenceParams<T = f64> = epg::SequenceParams<T>;
pub type SequenceParams32 = epg::SequenceParams<f32>;
pub type DiffusionSchedule<T = f64> = sampler::DiffusionSchedule<T>;
pub type SamplerParams<T = f64> = sampler::SamplerParams<T>;
pub type ProxParams<T = f64> = solvers::ProxParams<T>;
pub type NoiseEstimatorSpec<T = f64> = denoise::NoiseEstimatorSpec<T>;
pub type MatchResult<T = f64> = dictionary::MatchResult<T>;
pub use acquisition::FrameMasks;
