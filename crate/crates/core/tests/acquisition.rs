mod common;

use common::{random_kspace, rng, small_model, C};
use mrf_diph::acquisition::{AcquisitionModel, KSpace};
use mrf_diph::dictionary::Basis;
use mrf_diph::tsmi::Tsmi;
use mrf_diph::{make_coils, make_masks, MaskScheme};
use proptest::prelude::*;

fn rand_x(model: &AcquisitionModel<f64>, seed: u64) -> Tsmi<f64> {
    let (h, w) = model.dims();
    Tsmi::randn(model.basis().rank(), h, w, &mut rng(seed))
}

#[test]
fn coils_are_normalised_and_deterministic() {
    for c in [1, 2, 5, 8] {
        let m = make_coils::<f64>(c, 20, 24, 3).unwrap();
        assert!(m.sos_error() < 1e-6);
    }
    let one = make_coils::<f64>(1, 6, 6, 9).unwrap();
    let g = one.coil(0)[0];
    assert!(one.coil(0).iter().all(|z| (z - g).norm() < 1e-12 && (z.norm() - 1.0).abs() < 1e-12));
    let a = make_coils::<f64>(8, 16, 16, 4).unwrap();
    let b = make_coils::<f64>(8, 16, 16, 4).unwrap();
    let bits = |m: &mrf_diph::CoilMaps| m.sens().iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn mask_fractions() {
    let full = make_masks(5, 8, 8, 1.0, 0, MaskScheme::VariableDensity).unwrap();
    assert!(full.masks().iter().all(|&b| b));
    let m = make_masks(50, 32, 32, 4.0, 7, MaskScheme::Uniform).unwrap();
    for t in 0..50 {
        let f = m.samples(t) as f64 / 1024.0;
        assert!((0.225..=0.275).contains(&f));
    }
    let vd = make_masks(50, 32, 32, 5.0, 7, MaskScheme::VariableDensity).unwrap();
    assert!((vd.mean_fraction() - 0.2).abs() < 0.02);
    assert!((0..50).all(|t| vd.frame(t)[0]));
    assert!(make_masks(3, 4, 4, 100.0, 0, MaskScheme::Uniform).is_err());
    assert_eq!(make_masks(3, 8, 8, 4.0, 5, MaskScheme::VariableDensity).unwrap(), make_masks(3, 8, 8, 4.0, 5, MaskScheme::VariableDensity).unwrap());
}

#[test]
fn variable_density_favours_centre() {
    let m = make_masks(200, 32, 32, 5.0, 1, MaskScheme::VariableDensity).unwrap();
    let hits = |pred: &dyn Fn(usize, usize) -> bool| {
        let mut n = 0.0;
        let mut tot = 0.0;
        for t in 0..200 {
            for (v, &b) in m.frame(t).iter().enumerate() {
                let (i, k) = (v / 32, v % 32);
                let (di, dk) = (i.min(32 - i), k.min(32 - k));
                if pred(di, dk) {
                    tot += 1.0;
                    n += b as u8 as f64;
                }
            }
        }
        n / tot
    };
    assert!(hits(&|a, b| a < 4 && b < 4) > 2.0 * hits(&|a, b| a > 12 && b > 12));
}

#[test]
fn trivial_model_is_identity() {
    let coils = make_coils(1, 1, 1, 0).unwrap();
    let masks = make_masks(3, 1, 1, 1.0, 0, MaskScheme::Uniform).unwrap();
    let model = AcquisitionModel::new(coils, masks, Basis::identity(3)).unwrap();
    let x = rand_x(&model, 1);
    let y = model.forward(&x).unwrap();
    let g = model.coils().coil(0)[0];
    let xs: Vec<C> = x.as_slice().iter().map(|v| v * g).collect();
    assert!(common::rel_diff(y.as_slice(), &xs) < 1e-12);
}

#[test]
fn unitary_case_adjoint_inverts_forward() {
    let coils = make_coils(1, 8, 6, 0).unwrap();
    let masks = make_masks(4, 8, 6, 1.0, 0, MaskScheme::Uniform).unwrap();
    let model = AcquisitionModel::new(coils, masks, Basis::identity(4)).unwrap();
    let x = rand_x(&model, 2);
    let back = model.adjoint(&model.forward(&x).unwrap()).unwrap();
    assert!(common::rel_diff(back.as_slice(), x.as_slice()) < 1e-5);
}

#[test]
fn zero_maps_to_zero() {
    let model = small_model(8, 8, 2, 6, 3, 2.0, 1);
    let (h, w) = model.dims();
    assert_eq!(model.forward(&Tsmi::zeros(3, h, w)).unwrap().norm(), 0.0);
    let (c, l, n) = model.kspace_dim();
    assert_eq!(model.adjoint(&KSpace::zeros(c, l, n)).unwrap().norm(), 0.0);
    assert_eq!(model.normal(&Tsmi::zeros(3, h, w)).unwrap().norm(), 0.0);
}

#[test]
fn shape_errors() {
    let model = small_model(8, 8, 2, 6, 3, 2.0, 1);
    assert!(matches!(model.forward(&Tsmi::zeros(2, 8, 8)), Err(mrf_diph::Error::Domain(_))));
    assert!(matches!(model.adjoint(&KSpace::zeros(2, 5, 64)), Err(mrf_diph::Error::Domain(_))));
}

#[test]
fn forward_respects_masks_and_is_non_expansive() {
    let model = small_model(12, 10, 3, 8, 4, 3.0, 2);
    for seed in 0..100 {
        let x = rand_x(&model, seed);
        let y = model.forward(&x).unwrap();
        assert!(y.respects_masks(model.masks()));
        let u = model.basis().decompress(&x).unwrap();
        assert!(y.norm() <= u.norm() * (1.0 + 1e-12));
    }
}

#[test]
fn normal_matches_composition() {
    let model = small_model(16, 12, 3, 10, 4, 3.0, 3);
    for seed in 0..10 {
        let x = rand_x(&model, seed);
        let fused = model.normal(&x).unwrap();
        let composed = model.adjoint(&model.forward(&x).unwrap()).unwrap();
        assert!(common::rel_diff(fused.as_slice(), composed.as_slice()) < 1e-6);
    }
}

#[test]
fn measurement_noise_hits_requested_level_on_sampled_entries() {
    let model = small_model(16, 16, 3, 20, 4, 3.0, 9);
    let clean = model.forward(&rand_x(&model, 1)).unwrap();
    let mut same = clean.clone();
    model.add_noise(&mut same, 0.0, 5).unwrap();
    assert_eq!(same.as_slice(), clean.as_slice());

    let mut a = clean.clone();
    let mut b = clean.clone();
    model.add_noise(&mut a, 0.2, 5).unwrap();
    model.add_noise(&mut b, 0.2, 5).unwrap();
    assert_eq!(a.as_slice(), b.as_slice());

    let sampled = clean.as_slice().iter().filter(|z| z.norm() > 0.0).count() as f64;
    let rms = (clean.norm_sqr() / sampled).sqrt();
    let mut diff_sq = 0.0;
    for (n, c) in a.as_slice().iter().zip(clean.as_slice()) {
        if c.norm() == 0.0 {
            assert_eq!(*n, C::new(0.0, 0.0));
        }
        diff_sq += (n - c).norm_sqr();
    }
    let measured = (diff_sq / sampled).sqrt() / rms;
    assert!((measured - 0.2).abs() < 0.01, "noise level {measured}");
    assert!(model.add_noise(&mut a, -1.0, 0).is_err());
    assert!(model.add_noise(&mut a, f64::NAN, 0).is_err());
}

#[test]
fn single_precision_dot_test() {
    let coils = make_coils::<f32>(2, 16, 16, 1).unwrap();
    let masks = make_masks(10, 16, 16, 3.0, 2, MaskScheme::VariableDensity).unwrap();
    let m64 = small_model(16, 16, 2, 10, 3, 3.0, 5);
    let v = m64.basis().matrix().mapv(|z| num_complex::Complex32::new(z.re as f32, z.im as f32));
    let model = mrf_diph::AcquisitionModel32::new(coils, masks, Basis::new(v, 1e-5).unwrap()).unwrap();
    let mut r = rng(3);
    let x = Tsmi::<f32>::randn(3, 16, 16, &mut r);
    let y0 = model.forward(&Tsmi::<f32>::randn(3, 16, 16, &mut r)).unwrap();
    let lhs = model.forward(&x).unwrap().inner(&y0);
    let rhs = x.inner(&model.adjoint(&y0).unwrap());
    assert!((lhs - rhs).norm() / (x.norm() * y0.norm()) < 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dot_test(seed in 0u64..100_000) {
        let model = small_model(10, 8, 3, 9, 4, 3.0, seed % 7);
        let x = rand_x(&model, seed);
        let y = random_kspace(&model, seed + 1);
        let lhs = model.forward(&x).unwrap().inner(&y);
        let rhs = x.inner(&model.adjoint(&y).unwrap());
        prop_assert!((lhs - rhs).norm() / (x.norm() * y.norm()) < 1e-10);
    }

    #[test]
    fn linearity(seed in 0u64..100_000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let model = small_model(8, 8, 2, 7, 3, 2.0, seed % 5);
        let x1 = rand_x(&model, seed);
        let x2 = rand_x(&model, seed + 1);
        let lhs = model.forward(&Tsmi::lin_comb(a, &x1, b, &x2)).unwrap();
        let (y1, y2) = (model.forward(&x1).unwrap(), model.forward(&x2).unwrap());
        let rhs: Vec<C> = y1.as_slice().iter().zip(y2.as_slice()).map(|(p, q)| p * a + q * b).collect();
        let scale = (y1.norm() * a.abs() + y2.norm() * b.abs()).max(1e-300);
        let err: f64 = lhs.as_slice().iter().zip(&rhs).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(err / scale < 1e-6);
    }

    #[test]
    fn normal_is_self_adjoint_psd(seed in 0u64..100_000) {
        let model = small_model(8, 10, 2, 8, 3, 2.5, seed % 5);
        let x = rand_x(&model, seed);
        let z = rand_x(&model, seed + 7);
        let nx = model.normal(&x).unwrap();
        let nz = model.normal(&z).unwrap();
        let (a, b) = (nx.inner(&z), x.inner(&nz));
        prop_assert!((a - b).norm() <= 1e-5 * a.norm().max(1e-12));
        let q = x.inner(&nx);
        prop_assert!(q.re >= 0.0 && q.im.abs() <= 1e-9 * q.re.max(1.0));
    }
}
