use jumpflow::levy_models::{symbol, LevyModel, SphericalMeasure};
use jumpflow::rng::SeedTree;
use jumpflow::samplers::stats::{ks_p_value, ks_statistic, ks_two_sample, median};
use jumpflow::samplers::*;
use jumpflow::Error;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn draws(alpha: f64, scale: f64, dt: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = SeedTree::new(seed).stream();
    (0..n).map(|_| sample_stable_increment(alpha, scale, dt, &mut rng).unwrap()).collect()
}

#[test]
fn cauchy_cdf_at_one() {
    let n = 100_000;
    let x = draws(1.0, 1.0, 1.0, n, 11);
    let frac = x.iter().filter(|v| **v <= 1.0).count() as f64 / n as f64;
    let se = (0.75f64 * 0.25 / n as f64).sqrt();
    assert!((frac - 0.75).abs() < 3.0 * se, "{frac}");
    let ks = ks_statistic(&x, |v| 0.5 + v.atan() / std::f64::consts::PI);
    assert!(ks < 1.36 / (n as f64).sqrt() * 1.5, "{ks}");
}

#[test]
fn cauchy_median_is_zero() {
    let n = 100_000;
    let x = draws(1.0, 1.0, 1.0, n, 12);
    // density at 0 is 1/π, so SE(median) = π / (2√n)
    let se = std::f64::consts::PI / (2.0 * (n as f64).sqrt());
    assert!(median(&x).abs() < 3.0 * se);
}

#[test]
fn stable_scaling_in_law() {
    for &alpha in &[0.5, 1.0, 1.5, 1.9] {
        let n = 20_000;
        let dt: f64 = 0.01;
        let small = draws(alpha, 1.0, dt, n, 21);
        let unit: Vec<f64> = draws(alpha, 1.0, 1.0, n, 22).iter().map(|v| v * dt.powf(1.0 / alpha)).collect();
        let d = ks_two_sample(&small, &unit);
        assert!(ks_p_value(d, n as f64 / 2.0) > 0.01, "alpha = {alpha}: D = {d}");
    }
}

#[test]
fn positive_stable_laplace_transform() {
    let mut rng = SeedTree::new(5).stream();
    for &rho in &[0.25, 0.5, 0.75, 0.95] {
        let n = 100_000;
        let m: f64 = (0..n).map(|_| (-positive_stable(rho, &mut rng)).exp()).sum::<f64>() / n as f64;
        let se = 0.5 / (n as f64).sqrt();
        assert!((m - (-1f64).exp()).abs() < 4.0 * se, "rho = {rho}: {m}");
    }
}

#[test]
fn zero_step_is_zero() {
    let mut rng = SeedTree::new(1).stream();
    assert_eq!(sample_relativistic_increment(2, 1.0, 1.0, 0.0, &mut rng).unwrap(), vec![0.0, 0.0]);
    assert_eq!(sample_stable_increment(1.2, 1.0, 0.0, &mut rng).unwrap(), 0.0);
    assert!(sample_stable_increment(2.0, 1.0, 1.0, &mut rng).is_err());
}

#[test]
fn rejection_cap_reports_acceptance_rate() {
    let mut rng = SeedTree::new(1).stream();
    match tilted_subordinator(1.0, 50.0, 1.0, 10, &mut rng) {
        Err(Error::RejectionExhausted { attempts, acceptance_rate }) => {
            assert_eq!(attempts, 10);
            assert!((acceptance_rate - (-50f64).exp()).abs() < 1e-30);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn relativistic_variance_approaches_brownian_limit() {
    // Var L_dt = dt ψ''(0) in d = 1, with ψ'' from a finite difference of
    // the closed-form symbol; it decreases in m.
    let (alpha, dt, n) = (1.0, 0.5, 100_000);
    let mut prev = f64::INFINITY;
    for (i, &m) in [1.0, 4.0, 16.0].iter().enumerate() {
        let model = LevyModel::relativistic(1, alpha, m);
        let h = 1e-3;
        let psi_h = symbol(&model, &[h]).unwrap().re;
        let oracle = dt * 2.0 * psi_h / (h * h);
        let mut rng = SeedTree::new(40 + i as u64).stream();
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_relativistic_increment(1, alpha, m, dt, &mut rng).unwrap()[0])
            .collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let fourth = xs.iter().map(|x| x.powi(4)).sum::<f64>() / n as f64;
        let se = ((fourth - var * var) / n as f64).sqrt();
        assert!((var - oracle).abs() < 4.0 * se + 1e-3 * oracle, "m = {m}: {var} vs {oracle}");
        assert!(oracle < prev);
        prev = oracle;
    }
}

fn probes(d: usize) -> Vec<Vec<f64>> {
    let dirs: [f64; 5] = [0.3, 0.7, 1.0, 1.6, 2.5];
    dirs.iter()
        .enumerate()
        .map(|(k, &r)| {
            let th = 0.9 * k as f64;
            let mut u = vec![0.0; d];
            u[0] = r * th.cos();
            if d > 1 {
                u[1] = r * th.sin();
            }
            u
        })
        .collect()
}

#[test]
fn characteristic_function_of_every_class() {
    let models = vec![
        LevyModel::isotropic(2, 1.5, 1.0),
        LevyModel::isotropic(1, 0.7, 0.5),
        LevyModel::axis(1.2, vec![1.0, 0.5]),
        LevyModel::truncated(2, 1.5, 1.0, 1.0),
        LevyModel::tempered(2, 1.2, 1.0),
        LevyModel::relativistic(2, 1.0, 1.0),
        LevyModel::spherical_radial(1.3, 1.0, SphericalMeasure::uniform(2, 1.0)),
    ];
    for (i, m) in models.iter().enumerate() {
        let c = empirical_cf_check(m, 1.0, &probes(m.dimension), 100_000, MarginalMethod::default_for(m), SeedTree::new(100 + i as u64)).unwrap();
        assert!(c.pass, "{:?}: {:?}", m.class, c.probes);
    }
}

#[test]
fn cf_at_time_zero_is_one() {
    let m = LevyModel::truncated(1, 1.0, 1.0, 1.0);
    let c = empirical_cf_check(&m, 0.0, &probes(1), 10_000, MarginalMethod::default_for(&m), SeedTree::new(3)).unwrap();
    assert_eq!(c.max_abs_deviation, 0.0);
}

#[test]
fn drop_scheme_deviation_within_recorded_bound() {
    let m = LevyModel::truncated(1, 1.0, 1.0, 1.0);
    let method = MarginalMethod::LevyIto { eps_cut: 0.1, scheme: SmallJumpScheme::Drop };
    let c = empirical_cf_check(&m, 1.0, &probes(1), 50_000, method, SeedTree::new(4)).unwrap();
    assert!(c.pass, "{:?}", c.probes);
    assert!(c.probes.iter().all(|p| p.bias_bound > 0.0));
}

#[test]
fn truncated_paths_have_no_jump_above_radius() {
    let m = LevyModel::truncated(2, 1.5, 1.0, 1.0);
    let spec = PathSpec::levy_ito(5.0, 100, 0.05, SmallJumpScheme::GaussianAr);
    for p in sample_paths(&m, &spec, SeedTree::new(9), 50).unwrap() {
        assert!(p.n_jumps() > 0);
        for j in 0..p.n_jumps() {
            let norm = p.jump(j).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm > 0.05 && norm <= 1.0 + 1e-12);
        }
    }
}

#[test]
fn drop_scheme_on_symmetric_model_has_zero_drift() {
    let m = LevyModel::tempered(2, 0.8, 1.0);
    let p = sample_path(&m, &PathSpec::levy_ito(1.0, 10, 0.5, SmallJumpScheme::Drop), SeedTree::new(2)).unwrap();
    assert_eq!(p.meta.compensation_drift, vec![0.0, 0.0]);
    assert!(p.small_increments.iter().all(|v| *v == 0.0));
}

#[test]
fn asymmetric_directions_get_compensation_drift() {
    let meas = SphericalMeasure::new(vec![vec![1.0], vec![-1.0]], vec![0.7, 0.3]);
    let m = LevyModel::spherical_radial(0.8, 1.0, meas);
    let p = sample_path(&m, &PathSpec::levy_ito(1.0, 10, 0.1, SmallJumpScheme::Drop), SeedTree::new(2)).unwrap();
    // −∫_{0.1}^{1} s·s^{−1.8} ds · (0.7 − 0.3)
    let expected = -(1.0 - 0.1f64.powf(0.2)) / 0.2 * 0.4;
    assert!((p.meta.compensation_drift[0] - expected).abs() < 1e-12);
}

#[test]
fn paths_are_bit_reproducible() {
    let m = LevyModel::isotropic(2, 1.5, 1.0);
    let spec = PathSpec::levy_ito(1.0, 64, 0.1, SmallJumpScheme::Auto);
    let a = sample_path(&m, &spec, SeedTree::new(77)).unwrap();
    let b = sample_path(&m, &spec, SeedTree::new(77)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.meta.scheme, SmallJumpScheme::GaussianAr);
    let c = sample_path(&m, &spec, SeedTree::new(78)).unwrap();
    assert_ne!(a.increments, c.increments);
}

#[test]
fn increments_sum_to_path_values_and_jumps_are_inside() {
    let m = LevyModel::tempered(1, 1.4, 1.0);
    let p = sample_path(&m, &PathSpec::levy_ito(2.0, 50, 0.05, SmallJumpScheme::GaussianAr), SeedTree::new(3)).unwrap();
    let vals = p.values();
    assert_eq!(vals[50], p.terminal()[0]);
    assert!(p.jump_times.iter().all(|t| *t > 0.0 && *t <= 2.0));
    let sum_small: f64 = p.small_increments.iter().sum();
    let sum_jumps: f64 = p.jump_sizes.iter().sum();
    assert!((sum_small + sum_jumps - p.terminal()[0]).abs() < 1e-10);
}

#[test]
fn jump_budget_refusal_suggests_eps() {
    let m = LevyModel::isotropic(1, 1.5, 1.0);
    let mut spec = PathSpec::levy_ito(1.0, 10, 1e-4, SmallJumpScheme::Drop);
    spec.jump_budget = 1000.0;
    match sample_path(&m, &spec, SeedTree::new(1)) {
        Err(Error::JumpBudget { suggested_eps, .. }) => {
            spec.eps_cut = Some(suggested_eps);
            assert!(sample_path(&m, &spec, SeedTree::new(1)).is_ok());
            assert!(suggested_eps > 1e-4);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn big_jump_counts_are_poisson() {
    let m = LevyModel::truncated(1, 1.2, 1.0, 1.0);
    let eps = 0.3;
    let spec = PathSpec::levy_ito(1.0, 4, eps, SmallJumpScheme::Drop);
    let paths = sample_paths(&m, &spec, SeedTree::new(500), 20_000).unwrap();
    let lambda = paths[0].meta.big_jump_intensity;
    let bins = 8;
    let mut observed = vec![0.0; bins];
    for p in &paths {
        observed[p.n_jumps().min(bins - 1)] += 1.0;
    }
    let pois = statrs::distribution::Poisson::new(lambda).unwrap();
    use statrs::distribution::{Discrete, DiscreteCDF};
    let n = paths.len() as f64;
    let mut chi2 = 0.0;
    for k in 0..bins {
        let p = if k == bins - 1 { 1.0 - pois.cdf(k as u64 - 1) } else { pois.pmf(k as u64) };
        chi2 += (observed[k] - n * p).powi(2) / (n * p);
    }
    let pval = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
    assert!(pval > 0.01, "chi2 = {chi2}, lambda = {lambda}");
}

#[test]
fn additivity_in_law() {
    let m = LevyModel::tempered(1, 1.3, 1.0);
    let n = 20_000;
    let long = PathSpec::levy_ito(2.0, 2, 0.05, SmallJumpScheme::GaussianAr);
    let short = PathSpec::levy_ito(1.0, 1, 0.05, SmallJumpScheme::GaussianAr);
    let a: Vec<f64> = sample_paths(&m, &long, SeedTree::new(1), n).unwrap().iter().map(|p| p.terminal()[0]).collect();
    let b1 = sample_paths(&m, &short, SeedTree::new(2), n).unwrap();
    let b2 = sample_paths(&m, &short, SeedTree::new(3), n).unwrap();
    let b: Vec<f64> = b1.iter().zip(&b2).map(|(x, y)| x.terminal()[0] + y.terminal()[0]).collect();
    let d = ks_two_sample(&a, &b);
    assert!(ks_p_value(d, n as f64 / 2.0) > 0.01, "D = {d}");
}

#[test]
fn symmetric_marginal_has_zero_median() {
    let m = LevyModel::truncated(1, 1.5, 1.0, 1.0);
    let n = 40_000;
    let xs = sample_marginals(&m, 1.0, n, MarginalMethod::default_for(&m), SeedTree::new(8)).unwrap();
    // |median| < 3 SE with SE = 1/(2 f(0) √n); f(0) bounded below by 0.2 here.
    let se = 1.0 / (2.0 * 0.2 * (n as f64).sqrt());
    assert!(median(&xs).abs() < 3.0 * se);
}

#[test]
fn coarsening_preserves_terminal_value() {
    let m = LevyModel::isotropic(1, 1.5, 1.0);
    let p = sample_path(&m, &PathSpec::levy_ito(1.0, 800, 0.05, SmallJumpScheme::GaussianAr), SeedTree::new(4)).unwrap();
    let c = p.coarsen(8).unwrap();
    assert_eq!(c.n_steps(), 100);
    assert!((c.terminal()[0] - p.terminal()[0]).abs() < 1e-12);
    assert_eq!(c.jump_times, p.jump_times);
    assert!(p.coarsen(7).is_err());
}

#[test]
fn batch_output_independent_of_thread_count() {
    let m = LevyModel::isotropic(2, 1.2, 1.0);
    let a = sample_marginals(&m, 1.0, 10_000, MarginalMethod::Exact, SeedTree::new(6)).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| sample_marginals(&m, 1.0, 10_000, MarginalMethod::Exact, SeedTree::new(6)).unwrap());
    assert_eq!(a, b);
}
