use jumpflow::drift::DriftSpec;
use jumpflow::grid::{GridFunction, Lattice};
use jumpflow::levy_models::LevyModel;
use jumpflow::resolvent::*;
use jumpflow::semigroup::{FnField, TestFunction};
use jumpflow::Error;
use proptest::prelude::*;

fn mc(n: usize) -> McConfig {
    McConfig { n_mc: n, batches: 8, seed: 11 }
}

fn picard_cfg(n: usize) -> PicardConfig {
    PicardConfig { mc: mc(n), ..PicardConfig::default() }
}

fn cos1() -> TestFunction {
    TestFunction::Cos { freq: vec![1.0] }
}

/// `Re e^{ix}/(λ + |1|^α − ik)`: the resolvent of `cos` with constant drift `k`.
fn cos_oracle(lambda: f64, k: f64, x: f64) -> f64 {
    let a = lambda + 1.0;
    (a * x.cos() - k * x.sin()) / (a * a + k * k)
}

#[test]
fn constant_f_gives_f_over_lambda() {
    let model = LevyModel::isotropic(1, 1.5, 1.0);
    let lat = Lattice::with_spacing(1, 4.0, 0.02).unwrap();
    let f = TestFunction::Constant { value: 2.0 };
    let b = DriftSpec::holder_power(0.6, 1.0, 0.5);
    let sol = resolvent_holder_drift(&model, &b, &f, 4.0, &lat, &picard_cfg(1 << 14)).unwrap();
    for v in &sol.v.values {
        assert!((v - 0.5).abs() < 1e-3, "{v}");
    }
    assert!(sol.max_principle.pass);
}

#[test]
fn cauchy_cos_mode() {
    let model = LevyModel::isotropic(1, 1.0, 1.0);
    let lat = Lattice::with_spacing(1, 10.0, 0.02).unwrap();
    let sol = resolvent_constant_drift(&model, &[0.0], &cos1(), 1.0, &lat, 1e-6, mc(1 << 18), 0.5).unwrap();
    let err = (0..lat.len())
        .map(|i| (sol.v.values[i] - 0.5 * lat.point(i)[0].cos()).abs())
        .fold(0.0, f64::max);
    assert!(err < 5e-3, "{err}");
    assert!(sol.max_principle.pass);
}

#[test]
fn constant_drift_kernel_matches_closed_form() {
    let model = LevyModel::isotropic(1, 1.5, 1.0);
    let lat = Lattice::with_spacing(1, 10.0, 0.02).unwrap();
    let sol = resolvent_constant_drift(&model, &[0.7], &cos1(), 3.0, &lat, 1e-6, mc(1 << 16), 0.5).unwrap();
    let err = (0..lat.len())
        .map(|i| (sol.v.values[i] - cos_oracle(3.0, 0.7, lat.point(i)[0])).abs())
        .fold(0.0, f64::max);
    assert!(err < 3.0 * sol.error_budget.max(1e-3), "{err} budget {}", sol.error_budget);
}

#[test]
fn picard_with_constant_drift_matches_shifted_kernel() {
    let model = LevyModel::isotropic(1, 1.5, 1.0);
    let lat = Lattice::with_spacing(1, 10.0, 0.02).unwrap();
    let b = DriftSpec::Constant { value: vec![0.3] };
    let sol = resolvent_holder_drift(&model, &b, &cos1(), 4.0, &lat, &picard_cfg(1 << 16)).unwrap();
    // compare away from the faces, where the lattice derivative is one-sided
    let err = (0..lat.len())
        .filter(|&i| lat.point(i)[0].abs() < 8.0)
        .map(|i| (sol.v.values[i] - cos_oracle(4.0, 0.3, lat.point(i)[0])).abs())
        .fold(0.0, f64::max);
    assert!(err < 2e-3, "{err}");
    assert!(sol.contraction.unwrap() < 1.0);
}

#[test]
fn zero_drift_picard_is_the_plain_resolvent() {
    let model = LevyModel::isotropic(1, 1.5, 1.0);
    let lat = Lattice::with_spacing(1, 3.0, 0.02).unwrap();
    let f = TestFunction::Bump { center: vec![0.0], half_width: 0.5, edge: 0.5 };
    let a = resolvent_holder_drift(&model, &DriftSpec::zero(1), &f, 4.0, &lat, &picard_cfg(1 << 14)).unwrap();
    let b = resolvent_constant_drift(&model, &[0.0], &f, 4.0, &lat, 1e-6, mc(1 << 14), a.beta).unwrap();
    assert_eq!(a.v.values, b.v.values);
    assert!(a.iterations.is_empty());
}

#[test]
fn maximum_principle_battery() {
    let model = LevyModel::isotropic(1, 1.5, 1.0);
    let lat = Lattice::with_spacing(1, 4.0, 0.02).unwrap();
    let fields = [
        TestFunction::Constant { value: -1.5 },
        cos1(),
        TestFunction::Sin { freq: vec![3.0] },
        TestFunction::Bump { center: vec![0.5], half_width: 0.5, edge: 0.3 },
    ];
    for f in &fields {
        for lambda in [2.0, 8.0] {
            let cfg = PicardConfig { noise_tol: 5e-3, ..picard_cfg(1 << 16) };
            let sol = resolvent_holder_drift(&model, &DriftSpec::holder_power(0.6, 1.0, 0.25), f, lambda, &lat, &cfg).unwrap();
            let mp = &sol.max_principle;
            assert!(mp.pass, "{f:?} λ={lambda}: {} > {}", mp.lhs, mp.rhs);
        }
    }
}

#[test]
fn derivative_norm_decreases_in_lambda() {
    let model = LevyModel::isotropic(1, 1.5, 1.0);
    let lat = Lattice::with_spacing(1, 6.0, 0.01).unwrap();
    let b = DriftSpec::holder_power(0.6, 1.0, 0.5);
    let f = TestFunction::Bump { center: vec![0.0], half_width: 0.5, edge: 0.5 };
    let norms: Vec<f64> = [4.0, 16.0, 64.0]
        .iter()
        .map(|&l| resolvent_holder_drift(&model, &b, &f, l, &lat, &picard_cfg(1 << 15)).unwrap().norms.dv_sup)
        .collect();
    assert!(norms[0] > norms[1] && norms[1] > norms[2], "{norms:?}");
}

#[test]
fn schauder_ratio_does_not_depend_on_drift() {
    let model = LevyModel::isotropic(1, 1.2, 1.0);
    let lat = Lattice::with_spacing(1, 4.0, 0.005).unwrap();
    let f = TestFunction::Bump { center: vec![0.0], half_width: 1.0, edge: 2.0 };
    let rep = verify_schauder_k_independence(&model, &f, 200.0, &[vec![0.0], vec![10.0], vec![100.0]], 0.6, &lat, 1e-6, mc(1 << 16)).unwrap();
    assert!(rep.pass, "{:?}", rep.ratios);
}

#[test]
fn generator_residual_is_small_for_smooth_data() {
    let model = LevyModel::isotropic(1, 1.5, 1.0);
    let lat = Lattice::with_spacing(1, 30.0, 0.02).unwrap();
    let sol = resolvent_constant_drift(&model, &[0.0], &cos1(), 2.0, &lat, 1e-6, mc(1 << 16), 0.45).unwrap();
    let r = generator_residual(&model, &sol, &DriftSpec::zero(1), &cos1(), 250).unwrap();
    assert!(r < 2e-2, "{r}");
}

#[test]
fn weak_lambda_is_refused_with_a_suggestion() {
    let model = LevyModel::isotropic(1, 1.5, 1.0);
    let lat = Lattice::with_spacing(1, 3.0, 0.02).unwrap();
    let b = DriftSpec::holder_power(0.6, 1.0, 5.0);
    match resolvent_holder_drift(&model, &b, &cos1(), 1.0, &lat, &picard_cfg(1 << 12)) {
        Err(Error::NonContraction { q, suggested_lambda: Some(s), .. }) => {
            assert!(q >= 1.0);
            assert!(s > 1.0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn subcritical_noise_is_out_of_regime() {
    let model = LevyModel::isotropic(1, 0.8, 1.0);
    let lat = Lattice::with_spacing(1, 2.0, 0.05).unwrap();
    let b = DriftSpec::holder_power(0.5, 1.0, 1.0);
    assert!(matches!(
        resolvent_holder_drift(&model, &b, &cos1(), 4.0, &lat, &picard_cfg(1 << 10)),
        Err(Error::Regime(_))
    ));
}

#[test]
fn effective_beta_keeps_alpha_plus_beta_below_two() {
    assert_eq!(effective_beta(1.5, 0.3), 0.3);
    assert!((effective_beta(1.5, 0.6) - 0.475).abs() < 1e-15);
    assert!(1.5 + effective_beta(1.5, 0.6) < 2.0);
}

#[test]
fn time_quadrature_weights_sum_to_one_over_lambda() {
    for lambda in [0.5, 1.0, 16.0, 1024.0] {
        let q = TimeQuadrature::new(lambda, 1e-6).unwrap();
        let total = q.total_weight() + q.tail_bound();
        assert!((total * lambda - 1.0).abs() < 1e-6, "λ={lambda}: {total}");
    }
}

#[test]
fn holder_seminorm_of_a_power() {
    let lat = Lattice::with_spacing(1, 2.0, 0.01).unwrap();
    let g = GridFunction::from_fn(lat, 1, |x, o| o[0] = x[0].abs().powf(0.4));
    let s = estimate_holder_seminorm(&g, 0.4);
    assert!(s <= 1.0 + 1e-12 && s > 0.99, "{s}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]
    #[test]
    fn kernel_is_linear(a in -3.0f64..3.0, c in -2.0f64..2.0) {
        let model = LevyModel::isotropic(1, 1.5, 1.0);
        let lat = Lattice::with_spacing(1, 2.0, 0.05).unwrap();
        let kernel = ResolventKernel::build(&model, &[0.0], 2.0, &lat, 1e-6, mc(1 << 10)).unwrap();
        let f = FnField { f: |x: &[f64]| x[0].sin(), bound: 1.0 };
        let g = FnField { f: |x: &[f64]| (2.0 * x[0]).cos(), bound: 1.0 };
        let h = FnField { f: move |x: &[f64]| a * x[0].sin() + c * (2.0 * x[0]).cos(), bound: a.abs() + c.abs() };
        let (kf, kg, kh) = (kernel.apply_field(&f), kernel.apply_field(&g), kernel.apply_field(&h));
        for i in 0..lat.len() {
            prop_assert!((kh[i] - a * kf[i] - c * kg[i]).abs() < 1e-12);
        }
    }
}
