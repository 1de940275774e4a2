//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mrf_diph::dictionary::{GridRange, Spacing};
use mrf_diph::epg::FlipScheme;
use mrf_diph::sampler::{NoiseSource, SamplerMode};
use mrf_diph::MaskScheme;

use crate::error::{CliError, CliResult};

/// Every accepted key with its default value.
pub const KEYS: &[(&str, &str)] = &[
    ("phantom.h", "64"),
    ("phantom.w", "64"),
    ("phantom.seed", "1"),
    ("phantom.on_grid", "false"),
    ("seq.l", "200"),
    ("seq.tr", "10"),
    ("seq.te", "1.908"),
    ("seq.ti", "18"),
    ("seq.inversion", "true"),
    ("seq.flip_scheme", "ramp:10:70:100"),
    ("dict.t1_grid", "100:4500:60"),
    ("dict.t2_grid", "10:2500:60"),
    ("dict.spacing", "log"),
    ("dict.s", "5"),
    ("acq.c", "4"),
    ("acq.R", "5"),
    ("acq.scheme", "variable_density"),
    ("acq.seed", "2"),
    ("acq.noise", "0"),
    ("sampler.T", "1000"),
    ("sampler.beta_start", "0.0001"),
    ("sampler.beta_end", "0.02"),
    ("sampler.K", "30"),
    ("sampler.lambda", "0.0001"),
    ("sampler.tau", "0.01"),
    ("sampler.xi", "1"),
    ("sampler.mode", "base"),
    ("sampler.cg_iters", "5"),
    ("sampler.cg_tol", "1e-6"),
    ("sampler.seed", "0"),
    ("sampler.noise_source", "z"),
    ("sampler.estimator.kind", "smoother"),
    ("sampler.estimator.sigma_px", "1"),
    ("sampler.estimator.conditioned", "false"),
    ("admm.iters", "20"),
    ("admm.gamma", "0.1"),
    ("recon.method", "diph"),
    ("out.dir", "out"),
];

#[derive(Debug, Clone)]
pub struct Config {
    values: BTreeMap<String, String>,
    /// Directory relative paths are resolved against.
    base: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Self::with_base(PathBuf::from("."))
    }
}

impl Config {
    fn with_base(base: PathBuf) -> Self {
        let values = KEYS.iter().map(|&(k, v)| (k.to_string(), v.to_string())).collect();
        Self { values, base }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("reading config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut cfg = Self::with_base(if base.as_os_str().is_empty() { PathBuf::from(".") } else { base });
        cfg.parse_into(&text, &path.display().to_string())?;
        Ok(cfg)
    }

    #[cfg(test)]
    pub fn parse(text: &str, base: &Path) -> CliResult<Self> {
        let mut cfg = Self::with_base(base.to_path_buf());
        cfg.parse_into(text, "<config>")?;
        Ok(cfg)
    }

    fn parse_into(&mut self, text: &str, origin: &str) -> CliResult<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{origin}:{}: expected `key = value`", n + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| CliError::Config(format!("{origin}:{}: {}", n + 1, e.message())))?;
        }
        Ok(())
    }

    /// Overrides one key; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(CliError::Config(format!("unknown key `{key}`"))),
        }
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> CliResult<()> {
        let (k, v) = pair.split_once('=').ok_or_else(|| CliError::Config(format!("override `{pair}` is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("key {key} is not registered"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<T> {
        let raw = self.raw(key);
        raw.parse().map_err(|_| CliError::Config(format!("key `{key}`: cannot parse `{raw}`")))
    }

    pub fn get_bool(&self, key: &str) -> CliResult<bool> {
        match self.raw(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            other => Err(CliError::Config(format!("key `{key}`: expected a boolean, got `{other}`"))),
        }
    }

    pub fn path(&self, key: &str) -> PathBuf {
        let p = PathBuf::from(self.raw(key));
        if p.is_absolute() {
            p
        } else {
            self.base.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.path("out.dir")
    }

    pub fn grid(&self, key: &str) -> CliResult<GridRange<f64>> {
        let raw = self.raw(key);
        let bad = || CliError::Config(format!("key `{key}`: expected `lo:hi:count`, got `{raw}`"));
        let parts: Vec<&str> = raw.split(':').map(str::trim).collect();
        let [lo, hi, n] = parts.as_slice() else { return Err(bad()) };
        Ok(GridRange::new(lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?))
    }

    pub fn spacing(&self) -> CliResult<Spacing> {
        match self.raw("dict.spacing") {
            "log" => Ok(Spacing::Log),
            "linear" => Ok(Spacing::Linear),
            other => Err(CliError::Config(format!("key `dict.spacing`: expected log or linear, got `{other}`"))),
        }
    }

    pub fn flip_scheme(&self) -> CliResult<FlipScheme> {
        let raw = self.raw("seq.flip_scheme");
        let bad = || CliError::Config(format!("key `seq.flip_scheme`: expected `ramp:lo:hi:lobe` or `constant:deg`, got `{raw}`"));
        let parts: Vec<&str> = raw.split(':').map(str::trim).collect();
        match parts.as_slice() {
            ["ramp", lo, hi, lobe] => Ok(FlipScheme::SinusoidalRamp {
                lo_deg: lo.parse().map_err(|_| bad())?,
                hi_deg: hi.parse().map_err(|_| bad())?,
                lobe_len: lobe.parse().map_err(|_| bad())?,
            }),
            ["constant", deg] => Ok(FlipScheme::Constant { deg: deg.parse().map_err(|_| bad())? }),
            _ => Err(bad()),
        }
    }

    pub fn mask_scheme(&self) -> CliResult<MaskScheme> {
        match self.raw("acq.scheme") {
            "variable_density" => Ok(MaskScheme::VariableDensity),
            "uniform" => Ok(MaskScheme::Uniform),
            other => Err(CliError::Config(format!("key `acq.scheme`: expected variable_density or uniform, got `{other}`"))),
        }
    }

    pub fn sampler_mode(&self) -> CliResult<SamplerMode> {
        match self.raw("sampler.mode") {
            "base" => Ok(SamplerMode::Base),
            "kspace_only" => Ok(SamplerMode::KspaceOnly),
            "ddm_only" => Ok(SamplerMode::DdmOnly),
            other => Err(CliError::Config(format!("key `sampler.mode`: expected base, kspace_only or ddm_only, got `{other}`"))),
        }
    }

    pub fn noise_source(&self) -> CliResult<NoiseSource> {
        match self.raw("sampler.noise_source") {
            "z" => Ok(NoiseSource::Z),
            "xhat" => Ok(NoiseSource::XHat),
            other => Err(CliError::Config(format!("key `sampler.noise_source`: expected z or xhat, got `{other}`"))),
        }
    }

    pub fn method(&self) -> CliResult<Method> {
        self.raw("recon.method").parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Svdmrf,
    Admm,
    Diph,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Svdmrf => "svdmrf",
            Method::Admm => "admm",
            Method::Diph => "diph",
        }
    }
}

impl FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "svdmrf" => Ok(Method::Svdmrf),
            "admm" => Ok(Method::Admm),
            "diph" => Ok(Method::Diph),
            other => Err(CliError::Config(format!("key `recon.method`: expected svdmrf, admm or diph, got `{other}`"))),
        }
    }
}
