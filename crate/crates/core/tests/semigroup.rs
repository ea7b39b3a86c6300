use jumpflow::grid::Lattice;
use jumpflow::levy_models::{symbol, LevyModel};
use jumpflow::rng::SeedTree;
use jumpflow::semigroup::{
    apply_batch, apply_semigroup, apply_shifted, gradient_semigroup, verify_gradient_decay, DecayConfig, Field, NoiseBatch,
    TestFunction,
};
use jumpflow::Error;
use proptest::prelude::*;

fn cos1(d: usize) -> TestFunction {
    let mut freq = vec![0.0; d];
    freq[0] = 1.0;
    TestFunction::Cos { freq }
}

#[test]
fn constants_are_preserved_exactly() {
    let model = LevyModel::tempered(2, 1.2, 1.0);
    let lat = Lattice::new(2, 2.0, 9).unwrap();
    let one = TestFunction::Constant { value: 1.0 };
    let g = apply_semigroup(&model, &one, 0.7, &lat, 2_000, SeedTree::new(1)).unwrap();
    assert!(g.values.iter().all(|v| *v == 1.0));
    let g = apply_shifted(&model, &one, 0.7, &[3.0, -1.0], &lat, 2_000, SeedTree::new(1)).unwrap();
    assert!(g.values.iter().all(|v| *v == 1.0));
}

#[test]
fn time_zero_is_restriction() {
    let model = LevyModel::isotropic(1, 1.5, 1.0);
    let lat = Lattice::new(1, 3.0, 31).unwrap();
    let f = TestFunction::Sin { freq: vec![2.0] };
    let g = apply_semigroup(&model, &f, 0.0, &lat, 10, SeedTree::new(2)).unwrap();
    for i in 0..lat.len() {
        assert_eq!(g.values[i], f.eval(&lat.point(i)));
    }
}

#[test]
fn zero_samples_rejected() {
    let model = LevyModel::isotropic(1, 1.5, 1.0);
    let lat = Lattice::new(1, 1.0, 3).unwrap();
    assert!(apply_semigroup(&model, &cos1(1), 1.0, &lat, 0, SeedTree::new(0)).is_err());
}

#[test]
fn cauchy_cosine_mode_decays_like_exp_minus_t() {
    // E cos(x + L_t) = Re(e^{ix} e^{−tψ(e₁)}) with ψ(e₁) = 1.
    let model = LevyModel::isotropic(2, 1.0, 1.0);
    let lat = Lattice::new(2, 1.5, 7).unwrap();
    let t = 0.8;
    let g = apply_semigroup(&model, &cos1(2), t, &lat, 40_000, SeedTree::new(3)).unwrap();
    let decay = (-t * symbol(&model, &[1.0, 0.0]).unwrap().re).exp();
    let se = g.provenance.standard_error;
    for i in 0..lat.len() {
        let x = lat.point(i);
        assert!((g.values[i] - decay * x[0].cos()).abs() < 4.0 * se, "node {i}");
    }
}

#[test]
fn shift_moves_the_cosine() {
    let model = LevyModel::isotropic(1, 1.0, 1.0);
    let lat = Lattice::new(1, 2.0, 9).unwrap();
    let t = 0.5;
    let seeds = SeedTree::new(4);
    let a = apply_shifted(&model, &cos1(1), t, &[0.0], &lat, 20_000, seeds).unwrap();
    let b = apply_semigroup(&model, &cos1(1), t, &lat, 20_000, seeds).unwrap();
    assert_eq!(a, b);
    let s = apply_shifted(&model, &cos1(1), t, &[1.0], &lat, 20_000, seeds).unwrap();
    let se = s.provenance.standard_error;
    for i in 0..lat.len() {
        let x = lat.point(i)[0];
        assert!((s.values[i] - (-t).exp() * (x + t).cos()).abs() < 4.0 * se);
    }
}

#[test]
fn gradient_of_constant_is_zero() {
    let model = LevyModel::isotropic(2, 1.5, 1.0);
    let lat = Lattice::new(2, 1.0, 5).unwrap();
    let g = gradient_semigroup(
        &model,
        &TestFunction::Constant { value: 2.0 },
        0.3,
        &lat,
        1_000,
        SeedTree::new(5),
        lat.spacing(),
        0.1,
    )
    .unwrap();
    assert_eq!(g.sup_norm(), 0.0);
    assert_eq!(g.components, 2);
}

#[test]
fn gradient_of_sine_at_origin() {
    // D R_t sin(x₁) at 0 is e^{−t} e₁ for the Cauchy process.
    let model = LevyModel::isotropic(2, 1.0, 1.0);
    let lat = Lattice::new(2, 0.5, 3).unwrap();
    let t = 0.6;
    let f = TestFunction::Sin { freq: vec![1.0, 0.0] };
    let g = gradient_semigroup(&model, &f, t, &lat, 50_000, SeedTree::new(6), 0.05, 0.1).unwrap();
    let origin = lat.flat(&[1, 1]);
    let grad = g.node(origin);
    // The step-0.05 difference quotient of sin carries a factor sin(s)/s.
    let expected = (-t).exp() * 0.05f64.sin() / 0.05;
    let se = g.provenance.standard_error;
    assert!((grad[0] - expected).abs() < 4.0 * se, "{grad:?} vs {expected}");
    assert!(grad[1].abs() < 4.0 * se);
}

#[test]
fn ramp_gradient_vanishes_for_large_times() {
    let model = LevyModel::isotropic(1, 1.5, 1.0);
    let lat = Lattice::new(1, 3.0, 61).unwrap();
    let f = TestFunction::Ramp { axis: 0, cap: 1.0 };
    let norms: Vec<f64> = [1.0, 4.0, 16.0]
        .iter()
        .map(|&t| {
            gradient_semigroup(&model, &f, t, &lat, 40_000, SeedTree::new(7), lat.spacing(), 0.1)
                .unwrap()
                .sup_norm()
        })
        .collect();
    assert!(norms[0] > norms[1] && norms[1] > norms[2], "{norms:?}");
    assert!(norms[2] < 0.25 * norms[0]);
}

fn decay_times() -> Vec<f64> {
    (0..7).map(|i| 10f64.powf(-2.0 + i as f64 / 3.0)).collect()
}

// Plateau of half-width 5 whose right edge sits at the origin; the sup of
// the gradient is attained within t^{1/α} of the edge.
fn sharp_bump() -> TestFunction {
    TestFunction::Bump {
        center: vec![-5.0],
        half_width: 5.0,
        edge: 0.002,
    }
}

#[test]
fn stable_gradient_decays_at_the_self_similar_rate() {
    let model = LevyModel::isotropic(1, 1.5, 1.0);
    let lat = Lattice::with_spacing(1, 0.5, 0.005).unwrap();
    let report = verify_gradient_decay(&model, &sharp_bump(), &decay_times(), &DecayConfig::new(lat)).unwrap();
    assert!(report.pass, "{report:?}");
    assert!((report.slope + 2.0 / 3.0).abs() < 0.1, "{report:?}");
}

#[test]
fn relativistic_gradient_decay_passes() {
    let model = LevyModel::relativistic(1, 1.0, 1.0);
    let lat = Lattice::with_spacing(1, 0.5, 0.005).unwrap();
    let report = verify_gradient_decay(&model, &sharp_bump(), &decay_times(), &DecayConfig::new(lat)).unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn constant_function_gives_degenerate_fit() {
    let model = LevyModel::isotropic(1, 1.5, 1.0);
    let mut cfg = DecayConfig::new(Lattice::new(1, 1.0, 5).unwrap());
    cfg.n_mc = 500;
    let err = verify_gradient_decay(&model, &TestFunction::Constant { value: 1.0 }, &decay_times(), &cfg).unwrap_err();
    assert!(matches!(err, Error::DegenerateFit(_)));
}

#[test]
fn semigroup_law_on_smooth_function() {
    let model = LevyModel::isotropic(1, 1.5, 1.0);
    let inner = Lattice::with_spacing(1, 25.0, 0.02).unwrap();
    let outer = Lattice::new(1, 2.0, 21).unwrap();
    let f = TestFunction::Cos { freq: vec![0.7] };
    let seeds = SeedTree::new(8);
    let direct = apply_semigroup(&model, &f, 0.5, &outer, 100_000, seeds.child(0)).unwrap();
    let half = apply_semigroup(&model, &f, 0.25, &inner, 20_000, seeds.child(1)).unwrap();
    let composed = apply_semigroup(&model, &half, 0.25, &outer, 100_000, seeds.child(2)).unwrap();
    let tol = 4.0 * (direct.provenance.standard_error + composed.provenance.standard_error + half.provenance.standard_error)
        + 0.02f64.powi(2);
    assert!(composed.provenance.out_of_box_fraction < 0.01);
    assert!(direct.max_abs_diff(&composed) < tol, "{} vs {tol}", direct.max_abs_diff(&composed));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn contraction_and_positivity(alpha in 0.4f64..1.9, t in 0.01f64..2.0, width in 0.05f64..2.0, seed in 0u64..1000) {
        let model = LevyModel::isotropic(1, alpha, 1.0);
        let lat = Lattice::new(1, 2.0, 21).unwrap();
        let f = TestFunction::Bump { center: vec![0.3], half_width: width, edge: 0.1 };
        let g = apply_semigroup(&model, &f, t, &lat, 2_000, SeedTree::new(seed)).unwrap();
        let se = g.provenance.standard_error;
        prop_assert!(g.sup_norm() <= 1.0 + 3.0 * se);
        prop_assert!(g.values.iter().all(|v| *v >= -3.0 * se));
    }

    #[test]
    fn same_seed_same_bits(seed in 0u64..1000, t in 0.0f64..1.0) {
        let model = LevyModel::truncated(2, 1.3, 1.0, 0.5);
        let lat = Lattice::new(2, 1.0, 5).unwrap();
        let f = cos1(2);
        let a = apply_semigroup(&model, &f, t, &lat, 500, SeedTree::new(seed)).unwrap();
        let b = apply_semigroup(&model, &f, t, &lat, 500, SeedTree::new(seed)).unwrap();
        prop_assert_eq!(a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let batch = NoiseBatch::draw(&model, t, 500, SeedTree::new(seed)).unwrap();
        let c = apply_batch(&f, &lat, &batch, &[0.0, 0.0]).unwrap();
        prop_assert_eq!(a.values, c.values);
    }
}
