//! Pipeline stages. Every stage reads and writes container files in the
//! output directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use mrf_diph::baselines::{admm_mrf, svdmrf, AdmmIterate};
use mrf_diph::container::{self, ArrayContainer};
use mrf_diph::denoise::{EstimatorKind, NoiseEstimatorSpec};
use mrf_diph::dictionary::{build_grid, Dictionary};
use mrf_diph::epg::SequenceParams;
use mrf_diph::metrics::{kspace_nrmse, mape, nrmse};
use mrf_diph::phantom::{make_phantom, qmaps_to_tsmi, QMaps};
use mrf_diph::sampler::{mrf_diph_sample_traced, write_trace_csv, DiffusionSchedule, SamplerParams};
use mrf_diph::solvers::ProxParams;
use mrf_diph::tsmi::Tsmi;
use mrf_diph::{make_coils, make_masks, AcquisitionModel, KSpace};

use crate::config::{Config, Method};
use crate::error::{CliError, CliResult, Context};
use crate::report;

pub const DICT_FILE: &str = "dict.mrfq";
pub const PHANTOM_FILE: &str = "phantom.mrfq";
pub const ACQ_FILE: &str = "acq.mrfq";

pub fn recon_file(method: Method) -> String {
    format!("recon_{}.mrfq", method.name())
}

pub fn trace_file(method: Method) -> String {
    format!("trace_{}.csv", method.name())
}

pub fn metrics_file(method: Method) -> String {
    format!("metrics_{}.csv", method.name())
}

fn out_path(cfg: &Config, name: &str) -> CliResult<PathBuf> {
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir).step(&format!("creating output directory {}", dir.display()))?;
    Ok(dir.join(name))
}

fn load(cfg: &Config, name: &str) -> CliResult<ArrayContainer> {
    let path = cfg.out_dir().join(name);
    ArrayContainer::load(&path).step(&format!("reading {}", path.display()))
}

fn save(c: &ArrayContainer, path: &Path) -> CliResult<()> {
    c.save(path).step(&format!("writing {}", path.display()))
}

pub fn sequence(cfg: &Config) -> CliResult<SequenceParams<f64>> {
    let l: usize = cfg.get("seq.l")?;
    let angles = cfg.flip_scheme()?.angles(l);
    SequenceParams::new(angles, cfg.get("seq.tr")?, cfg.get("seq.te")?, cfg.get("seq.ti")?, cfg.get_bool("seq.inversion")?)
        .step("seq")
}

pub fn dict_build(cfg: &Config) -> CliResult<PathBuf> {
    let seq = sequence(cfg)?;
    let lut = build_grid(cfg.grid("dict.t1_grid")?, cfg.grid("dict.t2_grid")?, cfg.spacing()?).step("dict grid")?;
    let dict = Dictionary::build(lut, &seq, cfg.get("dict.s")?).step("dict build")?;
    let mut c = ArrayContainer::new();
    container::put_dictionary(&mut c, &dict).step("dict build")?;
    container::put_sequence(&mut c, &seq).step("dict build")?;
    let path = out_path(cfg, DICT_FILE)?;
    save(&c, &path)?;
    Ok(path)
}

fn load_dict(cfg: &Config) -> CliResult<(Dictionary<f64>, SequenceParams<f64>)> {
    let c = load(cfg, DICT_FILE)?;
    let dict = container::get_dictionary(&c).step("loading dictionary")?;
    let seq = container::get_sequence(&c).step("loading sequence")?;
    Ok((dict, seq))
}

pub fn phantom_make(cfg: &Config) -> CliResult<PathBuf> {
    let on_grid = if cfg.get_bool("phantom.on_grid")? { Some(load_dict(cfg)?.0) } else { None };
    let q = make_phantom(cfg.get("phantom.h")?, cfg.get("phantom.w")?, cfg.get("phantom.seed")?, on_grid.as_ref().map(|d| d.lut()))
        .step("phantom make")?;
    let mut c = ArrayContainer::new();
    container::put_qmaps(&mut c, &q).step("phantom make")?;
    let path = out_path(cfg, PHANTOM_FILE)?;
    save(&c, &path)?;
    Ok(path)
}

fn load_phantom(cfg: &Config) -> CliResult<QMaps<f64>> {
    container::get_qmaps(&load(cfg, PHANTOM_FILE)?).step("loading phantom")
}

pub fn acquire(cfg: &Config) -> CliResult<PathBuf> {
    let seed: u64 = cfg.get("acq.seed")?;
    let (c, r, noise): (usize, f64, f64) = (cfg.get("acq.c")?, cfg.get("acq.R")?, cfg.get("acq.noise")?);
    let scheme = cfg.mask_scheme()?;
    let (dict, seq) = load_dict(cfg)?;
    let q = load_phantom(cfg)?;
    let (h, w) = q.dims();
    let x_ref = qmaps_to_tsmi(&q, &seq, Some(dict.basis())).step("acquire: simulating reference")?;
    let coils = make_coils(c, h, w, seed).step("acquire: coils")?;
    let masks = make_masks(seq.len(), h, w, r, seed, scheme).step("acquire: masks")?;
    let model = AcquisitionModel::new(coils, masks, dict.basis().clone()).step("acquire")?;
    let mut y = model.forward(&x_ref).step("acquire: forward")?;
    model.add_noise(&mut y, noise, seed.wrapping_add(1)).step("acquire: noise")?;
    let mut c = ArrayContainer::new();
    container::put_kspace(&mut c, &y).step("acquire")?;
    container::put_coils(&mut c, model.coils()).step("acquire")?;
    container::put_masks(&mut c, model.masks()).step("acquire")?;
    container::put_tsmi(&mut c, "x_ref", &x_ref).step("acquire")?;
    let path = out_path(cfg, ACQ_FILE)?;
    save(&c, &path)?;
    Ok(path)
}

struct Acquired {
    model: AcquisitionModel<f64>,
    y: KSpace<f64>,
    x_ref: Tsmi<f64>,
}

fn load_acq(cfg: &Config, dict: &Dictionary<f64>) -> CliResult<Acquired> {
    let c = load(cfg, ACQ_FILE)?;
    let coils = container::get_coils(&c).step("loading coils")?;
    let masks = container::get_masks(&c).step("loading masks")?;
    let model = AcquisitionModel::new(coils, masks, dict.basis().clone()).step("loading acquisition")?;
    let y = container::get_kspace(&c).step("loading k-space")?;
    let x_ref = container::get_tsmi(&c, "x_ref").step("loading reference")?;
    Ok(Acquired { model, y, x_ref })
}

pub struct ReconOutput {
    pub container: PathBuf,
    pub trace: Option<PathBuf>,
}

fn estimator(cfg: &Config, acq: &Acquired) -> CliResult<NoiseEstimatorSpec<f64>> {
    let key = "sampler.estimator.kind";
    let est = match cfg.raw(key) {
        "oracle" => NoiseEstimatorSpec::oracle(acq.x_ref.clone()),
        "zero" => NoiseEstimatorSpec::zero(),
        "smoother" => NoiseEstimatorSpec::smoother(cfg.get("sampler.estimator.sigma_px")?),
        other => return Err(CliError::Config(format!("key `{key}`: expected oracle, zero or smoother, got `{other}`"))),
    };
    if cfg.get_bool("sampler.estimator.conditioned")? {
        if est.kind == EstimatorKind::Oracle {
            return Err(CliError::Config("key `sampler.estimator.conditioned`: oracle estimator cannot be conditioned".into()));
        }
        let x_c = acq.model.adjoint(&acq.y).step("conditioning image")?;
        return Ok(est.conditioned_on(x_c));
    }
    Ok(est)
}

fn sampler_params(cfg: &Config) -> CliResult<(SamplerParams<f64>, DiffusionSchedule<f64>)> {
    let params = SamplerParams {
        k: cfg.get("sampler.K")?,
        lambda: cfg.get("sampler.lambda")?,
        tau: cfg.get("sampler.tau")?,
        xi: cfg.get("sampler.xi")?,
        prox: ProxParams::new(1.0).with_cg(cfg.get("sampler.cg_iters")?, cfg.get("sampler.cg_tol")?),
        mode: cfg.sampler_mode()?,
        seed: cfg.get("sampler.seed")?,
        noise_source: cfg.noise_source()?,
    };
    let sched = DiffusionSchedule::new(
        cfg.get("sampler.T")?,
        cfg.get("sampler.beta_start")?,
        cfg.get("sampler.beta_end")?,
        params.k,
        params.lambda,
        params.tau,
    )
    .step("sampler schedule")?;
    Ok((params, sched))
}

fn write_admm_trace(trace: &[AdmmIterate<f64>], path: &Path) -> CliResult<()> {
    let mut f = fs::File::create(path).step(&format!("writing {}", path.display()))?;
    writeln!(f, "iteration,kspace_nrmse,cg_residual,cg_iterations").step("writing trace")?;
    for it in trace {
        writeln!(f, "{},{},{:e},{}", it.iteration, it.kspace_nrmse, it.cg_residual, it.cg_iterations).step("writing trace")?;
    }
    Ok(())
}

pub fn recon(cfg: &Config) -> CliResult<ReconOutput> {
    let method = cfg.method()?;
    let (dict, _) = load_dict(cfg)?;
    let acq = load_acq(cfg, &dict)?;
    let trace_path = out_path(cfg, &trace_file(method))?;
    let (x_rec, q_rec, trace) = match method {
        Method::Svdmrf => {
            let out = svdmrf(&acq.y, &acq.model, &dict).step("recon svdmrf")?;
            (out.x_rec, out.q_rec, None)
        }
        Method::Admm => {
            let prox = ProxParams::new(1.0).with_cg(cfg.get("sampler.cg_iters")?, cfg.get("sampler.cg_tol")?);
            let (out, trace) = admm_mrf(&acq.y, &acq.model, &dict, cfg.get("admm.iters")?, cfg.get("admm.gamma")?, &prox)
                .step("recon admm")?;
            write_admm_trace(&trace, &trace_path)?;
            (out.x_rec, out.q_rec, Some(trace_path))
        }
        Method::Diph => {
            let est = estimator(cfg, &acq)?;
            let (params, sched) = sampler_params(cfg)?;
            let out = mrf_diph_sample_traced(&acq.y, &acq.model, &dict, &est, &sched, &params, Some(&acq.x_ref))
                .step("recon diph")?;
            let f = fs::File::create(&trace_path).step(&format!("writing {}", trace_path.display()))?;
            write_trace_csv(&out.trace, std::io::BufWriter::new(f)).step("writing trace")?;
            (out.x_rec, out.q_rec, Some(trace_path))
        }
    };
    let mut c = ArrayContainer::new();
    container::put_tsmi(&mut c, "x_rec", &x_rec).step("recon")?;
    container::put_qmaps(&mut c, &q_rec).step("recon")?;
    let path = out_path(cfg, &recon_file(method))?;
    save(&c, &path)?;
    Ok(ReconOutput { container: path, trace })
}

pub struct Metrics {
    pub method: Method,
    pub rows: Vec<(&'static str, f64)>,
}

impl Metrics {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,metric,value\n");
        for (name, v) in &self.rows {
            s.push_str(&format!("{},{},{:.6}\n", self.method.name(), name, v));
        }
        s
    }
}

fn load_recon(cfg: &Config, method: Method) -> CliResult<(Tsmi<f64>, QMaps<f64>)> {
    let c = load(cfg, &recon_file(method))?;
    let x = container::get_tsmi(&c, "x_rec").step("loading reconstruction")?;
    let q = container::get_qmaps(&c).step("loading reconstructed maps")?;
    Ok((x, q))
}

pub fn eval(cfg: &Config) -> CliResult<(PathBuf, Metrics)> {
    let method = cfg.method()?;
    let (dict, _) = load_dict(cfg)?;
    let truth = load_phantom(cfg)?;
    let acq = load_acq(cfg, &dict)?;
    let (x_rec, q_rec) = load_recon(cfg, method)?;
    let rows = vec![
        ("MAPE_T1", mape(&q_rec.t1_map, &truth.t1_map, &truth.mask).step("eval MAPE_T1")?),
        ("MAPE_T2", mape(&q_rec.t2_map, &truth.t2_map, &truth.mask).step("eval MAPE_T2")?),
        ("NRMSE_TSMI", nrmse(&x_rec, &acq.x_ref, true).step("eval NRMSE_TSMI")?),
        ("NRMSE_KSPACE", kspace_nrmse(&acq.y, &acq.model, &x_rec).step("eval NRMSE_KSPACE")?),
    ];
    let m = Metrics { method, rows };
    let path = out_path(cfg, &metrics_file(method))?;
    fs::write(&path, m.to_csv()).step(&format!("writing {}", path.display()))?;
    Ok((path, m))
}

pub fn report(cfg: &Config, ape_max: f64) -> CliResult<Vec<PathBuf>> {
    let method = cfg.method()?;
    let truth = load_phantom(cfg)?;
    let (_, q_rec) = load_recon(cfg, method)?;
    let dir = out_path(cfg, &format!("report_{}", method.name()))?;
    fs::create_dir_all(&dir).step(&format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    let mut emit = |name: &str, img: report::Gray| -> CliResult<()> {
        let path = dir.join(name);
        fs::write(&path, img.to_pgm()).step(&format!("writing {}", path.display()))?;
        written.push(path);
        Ok(())
    };
    emit("t1.pgm", report::window(&q_rec.t1_map, &truth.mask, report::T1_WINDOW))?;
    emit("t2.pgm", report::window(&q_rec.t2_map, &truth.mask, report::T2_WINDOW))?;
    emit("t1_ref.pgm", report::window(&truth.t1_map, &truth.mask, report::T1_WINDOW))?;
    emit("t2_ref.pgm", report::window(&truth.t2_map, &truth.mask, report::T2_WINDOW))?;
    emit("t1_ape.pgm", report::window(&report::ape_map(&q_rec.t1_map, &truth.t1_map, &truth.mask), &truth.mask, (0.0, ape_max)))?;
    emit("t2_ape.pgm", report::window(&report::ape_map(&q_rec.t2_map, &truth.t2_map, &truth.mask), &truth.mask, (0.0, ape_max)))?;
    Ok(written)
}
