//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::time::{Duration, Instant};

use common::{desk, isochromat_fisp, naive_match, random_basis, random_kspace, rng, small_model, vec_nrmse, Desk, DeskSpec};
use mrf_diph::acquisition::AcquisitionModel;
use mrf_diph::baselines::svdmrf;
use mrf_diph::denoise::NoiseEstimatorSpec;
use mrf_diph::dictionary::{build_grid, dict_match, Dictionary, GridRange, Spacing};
use mrf_diph::epg::{epg_fisp, FlipScheme, SequenceParams};
use mrf_diph::metrics::{mape, nrmse};
use mrf_diph::sampler::{make_schedule, mrf_diph_sample, DiffusionSchedule, SampleOutput, SamplerMode, SamplerParams};
use mrf_diph::solvers::{prox_f, KspaceProx, ProxParams};
use mrf_diph::tsmi::Tsmi;
use mrf_diph::{make_coils, make_masks, MaskScheme};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn timed<R>(f: impl FnOnce() -> R) -> (R, Duration) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed())
}

fn mean_mape(out: &SampleOutput<f64>, d: &Desk) -> (f64, f64) {
    let t1 = mape(&out.q_rec.t1_map, &d.q.t1_map, &d.q.mask).unwrap();
    let t2 = mape(&out.q_rec.t2_map, &d.q.t2_map, &d.q.mask).unwrap();
    (t1, t2)
}

fn run(d: &Desk, est: &NoiseEstimatorSpec<f64>, p: &SamplerParams<f64>) -> SampleOutput<f64> {
    let sched = p.schedule().unwrap();
    mrf_diph_sample(&d.y, &d.model, &d.dict, est, &sched, p).unwrap()
}

/// Operating point of the oracle recovery experiment.
fn oracle_params(k: usize) -> SamplerParams<f64> {
    let mut p = SamplerParams { k, lambda: 1e-4, tau: 0.01, xi: 0.0, seed: 1, ..Default::default() };
    p.prox = p.prox.with_cg(5, 1e-6);
    p
}

fn adjoint_correctness() -> Outcome {
    let (worst, dt) = timed(|| {
        let coils = make_coils(4, 64, 64, 11).unwrap();
        let masks = make_masks(64, 64, 64, 4.0, 12, MaskScheme::VariableDensity).unwrap();
        let model = AcquisitionModel::new(coils, masks, random_basis(64, 5, 13)).unwrap();
        let mut r = rng(14);
        let mut worst: f64 = 0.0;
        for i in 0..100 {
            let x = Tsmi::randn(5, 64, 64, &mut r);
            let y = random_kspace(&model, 1000 + i);
            let lhs = model.forward(&x).unwrap().inner(&y);
            let rhs = x.inner(&model.adjoint(&y).unwrap());
            worst = worst.max((lhs - rhs).norm() / (x.norm() * y.norm()));
        }
        worst
    });
    outcome(worst < 1e-5 && dt < Duration::from_secs(10), format!("worst dot-test error {worst:.2e}, {dt:.2?} (< 10 s)"))
}

fn dictionary_match_oracle() -> Outcome {
    let ((agree, total, worst_rho, d), dt) = timed(|| {
        let seq = SequenceParams::fisp(200, FlipScheme::default()).unwrap();
        let lut = build_grid(GridRange::new(100.0, 4500.0, 44), GridRange::new(10.0, 2500.0, 44), Spacing::Log).unwrap();
        let dict = Dictionary::build(lut, &seq, 5).unwrap();
        let atoms = common::compressed_atoms(&dict);
        let x = Tsmi::randn(5, 32, 32, &mut rng(21));
        let m = dict_match(&x, &dict).unwrap();
        let (mut agree, mut worst_rho) = (0, 0.0f64);
        for v in 0..x.voxels() {
            let (j, rho) = naive_match(&x.voxel(v), &atoms);
            let (i, k) = (v / 32, v % 32);
            worst_rho = worst_rho.max((m.rho_map[(i, k)] - rho).norm());
            if m.indices[(i, k)] == j && (m.rho_map[(i, k)] - rho).norm() < 1e-6 {
                agree += 1;
            }
        }
        (agree, x.voxels(), worst_rho, dict.len())
    });
    outcome(
        agree == total && d <= 2000 && dt < Duration::from_secs(30),
        format!("{agree}/{total} voxels agree, d = {d}, worst rho gap {worst_rho:.1e}, {dt:.2?} (< 30 s)"),
    )
}

fn epg_validity() -> Outcome {
    let ((worst, single_err, ir_err), dt) = timed(|| {
        let seq = SequenceParams::fisp(200, FlipScheme::default()).unwrap();
        let mut r = rng(31);
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let t1: f64 = r.random_range(100.0..4500.0);
            let t2: f64 = r.random_range(10.0..2500.0f64.min(t1));
            let epg = epg_fisp(t1, t2, &seq).unwrap().samples;
            worst = worst.max(vec_nrmse(&epg, &isochromat_fisp(t1, t2, &seq, 512)));
        }
        let single = SequenceParams::new(vec![90.0], 10.0, 1.908, 0.0, false).unwrap();
        let s0 = epg_fisp(1000.0, 100.0, &single).unwrap().samples[0].norm();
        let single_err = (s0 - (-1.908f64 / 100.0).exp()).abs();
        let ir = SequenceParams::new(vec![90.0], 10.0, 0.0, 18.0, true).unwrap();
        let i0 = epg_fisp(1000.0, 100.0, &ir).unwrap().samples[0].norm();
        let ir_err = (i0 - (1.0 - 2.0 * (-18.0f64 / 1000.0).exp()).abs()).abs();
        (worst, single_err, ir_err)
    });
    outcome(
        worst < 1e-2 && single_err < 1e-6 && ir_err < 1e-6 && dt < Duration::from_secs(30),
        format!("worst isochromat NRMSE {:.3}%, single-pulse error {single_err:.1e}, IR error {ir_err:.1e}, {dt:.2?} (< 30 s)", 100.0 * worst),
    )
}

fn prox_correctness() -> Outcome {
    let mut worst_dense: f64 = 0.0;
    for seed in 0..4 {
        let model = small_model(6, 5, 2, 7, 3, 2.0, seed);
        let y = random_kspace(&model, seed + 10);
        let w = Tsmi::randn(3, 6, 5, &mut rng(seed + 20));
        for weight in [0.05, 1.0, 7.0] {
            let params = ProxParams { weight, max_cg_iters: 300, cg_tol: 1e-12, warm_start: None };
            let x = prox_f(&model, &y, &w, &params).unwrap();
            worst_dense = worst_dense.max(common::rel_diff(x.as_slice(), &common::dense_prox(&model, &y, &w, weight)));
        }
    }
    let mut violations = 0;
    for trial in 0..100u64 {
        let model = small_model(8, 8, 2, 6, 3, 3.0, trial % 5);
        let y = random_kspace(&model, trial + 100);
        let mut r = rng(trial + 200);
        let w = Tsmi::randn(3, 8, 8, &mut r);
        let weight = 10f64.powf(r.random_range(-3.0..1.0));
        let iters = r.random_range(1..6);
        let prox = KspaceProx::new(&model, &y).unwrap();
        let x = prox.solve(&w, &ProxParams { weight, max_cg_iters: iters, cg_tol: 1e-10, warm_start: None }).unwrap().solution;
        if prox.objective(&x, &w, weight).unwrap() > prox.objective(&w, &w, weight).unwrap() {
            violations += 1;
        }
    }
    outcome(
        worst_dense < 1e-6 && violations == 0,
        format!("worst gap to dense solve {worst_dense:.1e}, objective above anchor in {violations}/100 trials"),
    )
}

fn oracle_recovery(d: &Desk) -> (Outcome, f64) {
    let est = NoiseEstimatorSpec::oracle(d.x_ref.clone());
    let (out, dt) = timed(|| run(d, &est, &oracle_params(30)));
    let (t1, t2) = mean_mape(&out, d);
    let n = nrmse(&out.x_rec, &d.x_ref, true).unwrap();
    let pass = t1 < 0.5 && t2 < 0.5 && n < 0.5 && dt < Duration::from_secs(120);
    (outcome(pass, format!("MAPE T1 {t1:.4}%, T2 {t2:.4}%, TSMI NRMSE {n:.4}%, {dt:.2?} (< 2 min)")), t1)
}

/// Strong Bloch coupling so the dictionary step guides the k-space step.
fn ordering_params(mode: SamplerMode, seed: u64) -> SamplerParams<f64> {
    SamplerParams { k: 30, lambda: 1e-2, tau: 10.0, xi: 0.0, mode, seed, ..Default::default() }
}

fn physics_ordering(d: &Desk) -> Outcome {
    let est = NoiseEstimatorSpec::smoother(1.0);
    let mut lines = Vec::new();
    let mut pass = true;
    for seed in 1..=5 {
        let score = |mode| {
            let out = run(d, &est, &ordering_params(mode, seed));
            let (t1, t2) = mean_mape(&out, d);
            ((t1 + t2) / 2.0, out.trace.last().unwrap().kspace_nrmse)
        };
        let (base, base_k) = score(SamplerMode::Base);
        let (kso, _) = score(SamplerMode::KspaceOnly);
        let (ddm, ddm_k) = score(SamplerMode::DdmOnly);
        pass &= base_k < ddm_k && base < kso && kso < ddm;
        lines.push(format!("seed {seed}: kNRMSE {base_k:.2} < {ddm_k:.1}, MAPE {base:.2} < {kso:.2} < {ddm:.1}"));
    }
    outcome(pass, lines.join("; "))
}

fn baseline_sanity(d: &Desk, oracle_t1: f64) -> Outcome {
    let b = svdmrf(&d.y, &d.model, &d.dict).unwrap();
    let svd_t1 = mape(&b.q_rec.t1_map, &d.q.t1_map, &d.q.mask).unwrap();
    outcome(svd_t1 >= 5.0 * oracle_t1, format!("SVDMRF T1 MAPE {svd_t1:.2}% vs MRF-DiPh oracle {oracle_t1:.4}% (factor >= 5)"))
}

fn determinism(d: &Desk) -> Outcome {
    let est = NoiseEstimatorSpec::smoother(1.0);
    let p = SamplerParams { k: 10, xi: 0.0, seed: 42, ..Default::default() };
    let in_pool = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run(d, &est, &p))
    };
    let a = in_pool(4);
    let b = in_pool(4);
    let c = in_pool(1);
    let same = |x: &SampleOutput<f64>, y: &SampleOutput<f64>| {
        x.x_rec == y.x_rec && x.q_rec.t1_map == y.q_rec.t1_map && x.q_rec.t2_map == y.q_rec.t2_map && x.trace == y.trace
    };
    let (rep, thr) = (same(&a, &b), same(&a, &c));
    outcome(rep && thr, format!("repeat identical: {rep}, 1 vs 4 threads identical: {thr}"))
}

fn schedule_invariants() -> Outcome {
    let (beta, abar) = make_schedule::<f64>(1000, 1e-4, 0.02).unwrap();
    let mut pass = beta.len() == 1000 && abar.windows(2).all(|w| w[1] < w[0]);
    let mut worst: f64 = 0.0;
    for k in [1000, 30, 7] {
        let s = DiffusionSchedule::<f64>::new(1000, 1e-4, 0.02, k, 1e-4, 0.01).unwrap();
        pass &= s.steps.windows(2).all(|w| w[0] < w[1]);
        pass &= s.sigma2.windows(2).all(|w| w[0] < w[1]);
        pass &= s.mu.windows(2).all(|w| w[0] > w[1]);
        for i in 0..k {
            let ab = s.alpha_bar[s.steps[i] - 1];
            let sigma2 = (1.0 - ab) / ab;
            worst = worst.max((s.sigma2[i] - sigma2).abs() / sigma2);
            worst = worst.max((s.mu[i] - 1e-4 / sigma2).abs() / s.mu[i]);
            worst = worst.max((s.gamma[i] - 0.01 * s.mu[i]).abs() / s.gamma[i]);
        }
    }
    pass &= worst < 1e-12;
    outcome(pass, format!("monotone alpha_bar, sigma2, mu; worst sigma2/mu/gamma relation error {worst:.1e}"))
}

fn tradeoff(d: &Desk) -> Outcome {
    let est = NoiseEstimatorSpec::oracle(d.x_ref.clone());
    let mut k_times = Vec::new();
    let mut mapes = Vec::new();
    for k in [5, 10, 20, 30, 50] {
        let (out, dt) = timed(|| run(d, &est, &oracle_params(k)));
        let (t1, t2) = mean_mape(&out, d);
        k_times.push(dt);
        mapes.push((k, (t1 + t2) / 2.0));
    }
    let mut cg_times = Vec::new();
    for cg in [1, 5, 10, 20] {
        let mut p = oracle_params(10);
        p.prox = p.prox.with_cg(cg, f64::MIN_POSITIVE);
        let (_, dt) = timed(|| run(d, &est, &p));
        cg_times.push(dt);
    }
    let inc = |t: &[Duration]| t.windows(2).all(|w| w[0] < w[1]);
    let m5 = mapes[0].1;
    let m30 = mapes[3].1;
    let pass = inc(&k_times) && inc(&cg_times) && m30 <= m5;
    let fmt = |t: &[Duration]| t.iter().map(|d| format!("{:.2}s", d.as_secs_f64())).collect::<Vec<_>>().join(" < ");
    outcome(
        pass,
        format!("K 5..50: {}; cg 1..20: {}; mean MAPE K=30 {m30:.4}% vs K=5 {m5:.4}%", fmt(&k_times), fmt(&cg_times)),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n: usize, name: &'static str, o: Outcome| {
        println!("criterion {n:>2} {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    report(1, "adjoint correctness", adjoint_correctness());
    report(2, "dictionary-match oracle equivalence", dictionary_match_oracle());
    report(3, "EPG validity", epg_validity());
    report(4, "CG/prox correctness", prox_correctness());
    let d = desk(&DeskSpec::default());
    let (o5, oracle_t1) = oracle_recovery(&d);
    report(5, "end-to-end oracle recovery", o5);
    report(6, "physics-guidance ordering", physics_ordering(&d));
    report(7, "baseline sanity", baseline_sanity(&d, oracle_t1));
    report(8, "determinism", determinism(&d));
    report(9, "schedule invariants", schedule_invariants());
    report(10, "K/CG trade-off trend", tradeoff(&d));
    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {}/{} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
