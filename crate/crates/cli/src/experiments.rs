//! One runner per experiment. Each writes its artifacts through an
//! [`Outputs`] collector and reports named gates.

use anyhow::{Context, Result};
use serde::Serialize;

use jumpflow::drift::DriftSpec;
use jumpflow::levy_models::{check_sector_bounds, small_jump_moment, symbol, LevyClass, LevyModel};
use jumpflow::resolvent::{
    resolvent_constant_drift, resolvent_holder_drift, verify_schauder_k_independence, McConfig,
};
use jumpflow::rng::SeedTree;
use jumpflow::samplers::{empirical_cf_check, sample_path};
use jumpflow::sde_engine::{
    flow_simulation, transform_consistency, uniqueness_dispersion, ConsistencyConfig, DispersionConfig, FlowConfig,
    NoiseConfig,
};
use jumpflow::semigroup::{verify_gradient_decay, DecayConfig};
use jumpflow::zvonkin::{
    auxiliary_coeffs, build_transform, dpsi_inverse_sup, psi_forward, psi_inverse, psi_inverse_traced, TransformConfig,
    ZvonkinTransform,
};

use crate::config::*;
use crate::manifest::{Gate, Outputs};

pub fn run_experiment(config: &RunConfig, out: &mut Outputs) -> Result<Vec<Gate>> {
    let seed = config.seed;
    match &config.experiment {
        Experiment::SymbolCheck(c) => symbol_check(c, out),
        Experiment::Sample(c) => sample(c, seed, out),
        Experiment::SemigroupDecay(c) => semigroup_decay(c, seed, out),
        Experiment::Resolvent(c) => resolvent(c, seed, out),
        Experiment::Transform(c) => transform(c, seed, out).map(|(gates, _)| gates),
        Experiment::Simulate(c) => simulate(c, seed, out),
        Experiment::Flow(c) => flow(c, seed, out),
        Experiment::Dispersion(c) => dispersion(c, seed, out),
        Experiment::RegimeSweep(c) => regime_sweep(c, seed, out),
    }
}

fn symbol_check(c: &SymbolCheckConfig, out: &mut Outputs) -> Result<Vec<Gate>> {
    let sector = check_sector_bounds(&c.model, c.m, c.n_probes)?;
    let mut gates = vec![Gate::new("sector_bounds_finite", sector.pass, format!("c1 = {}, c2 = {}", sector.c1, sector.c2))];
    if let Some(expected) = c.expected_sector_constant {
        let err = (sector.c1 - expected).abs().max((sector.c2 - expected).abs());
        gates.push(Gate::new("sector_constant", err < 1e-6, format!("max error {err:e}")));
    }
    let moment = match c.expected_moment {
        Some((sigma, expected)) => {
            let m = small_jump_moment(&c.model, sigma)?;
            gates.push(Gate::new("small_jump_moment", (m - expected).abs() < 1e-6, format!("σ = {sigma}: {m}")));
            Some(m)
        }
        None => None,
    };
    let psi0 = symbol(&c.model, &vec![0.0; c.model.dimension])?;
    if c.model.class == LevyClass::RelativisticStable {
        gates.push(Gate::new("symbol_at_origin", psi0.re == 0.0 && psi0.im == 0.0, format!("ψ(0) = {psi0}")));
    }
    out.json(
        "symbol_check.json",
        &serde_json::json!({
            "sector": sector,
            "small_jump_moment": moment,
            "symbol_at_origin": [psi0.re, psi0.im],
        }),
    )?;
    Ok(gates)
}

fn sample(c: &SampleConfig, seed: u64, out: &mut Outputs) -> Result<Vec<Gate>> {
    let root = SeedTree::new(seed);
    let check = empirical_cf_check(&c.model, c.t, &c.probes, c.n_samples, c.method, root.named("cf"))?;
    let mut csv = String::from("probe,u,empirical_re,empirical_im,exact_re,exact_im,deviation,standard_error,pass\n");
    for (i, p) in check.probes.iter().enumerate() {
        let u: Vec<String> = p.u.iter().map(|v| v.to_string()).collect();
        csv.push_str(&format!(
            "{i},{},{},{},{},{},{:e},{:e},{}\n",
            u.join(" "),
            p.empirical.0,
            p.empirical.1,
            p.exact.0,
            p.exact.1,
            p.deviation,
            p.standard_error,
            p.pass
        ));
    }
    out.text("cf_check.csv", &csv)?;
    if let Some(spec) = &c.path {
        let path = sample_path(&c.model, spec, root.named("path"))?;
        out.bytes("path.blob", &path.to_blob()?.to_bytes()?)?;
    }
    Ok(vec![Gate::new(
        "empirical_cf",
        check.pass,
        format!("max deviation {:e}, SE {:e}", check.max_abs_deviation, check.standard_error),
    )])
}

fn semigroup_decay(c: &SemigroupDecayConfig, seed: u64, out: &mut Outputs) -> Result<Vec<Gate>> {
    let config = DecayConfig {
        lattice: c.lattice.build()?,
        n_mc: c.n_mc,
        seed,
        step_factor: c.step_factor,
        slack: c.slack,
    };
    let rep = verify_gradient_decay(&c.model, &c.f, &c.t_list, &config)?;
    let mut csv = String::from("t,grad_sup,standard_error\n");
    for i in 0..rep.times.len() {
        csv.push_str(&format!("{:e},{:e},{:e}\n", rep.times[i], rep.norms[i], rep.standard_errors[i]));
    }
    out.text("decay.csv", &csv)?;
    out.json("decay.json", &rep)?;
    Ok(vec![Gate::new(
        "gradient_decay_slope",
        rep.pass,
        format!("slope {} (threshold {})", rep.slope, rep.threshold),
    )])
}

fn resolvent(c: &ResolventConfig, seed: u64, out: &mut Outputs) -> Result<Vec<Gate>> {
    let lattice = c.lattice.build()?;
    let picard = c.picard.with_seed(seed);
    let sol = match (&c.k, &c.drift) {
        (Some(k), _) => {
            let beta = jumpflow::resolvent::effective_beta(c.model.alpha, 0.99);
            resolvent_constant_drift(&c.model, k, &c.f, c.lambda, &lattice, picard.quad_tol, picard.mc, beta)?
        }
        (None, Some(b)) => resolvent_holder_drift(&c.model, b, &c.f, c.lambda, &lattice, &picard)?,
        (None, None) => resolvent_holder_drift(&c.model, &DriftSpec::zero(c.model.dimension), &c.f, c.lambda, &lattice, &picard)?,
    };
    let files = sol.write_bundle(&out.dir().join("resolvent"))?;
    for f in files {
        out.register(&f)?;
    }
    let mp = &sol.max_principle;
    let mut gates = vec![Gate::new("maximum_principle", mp.pass, format!("{} <= {}", mp.lhs, mp.rhs))];
    if let Some(s) = &c.schauder {
        let mc = McConfig { seed, ..picard.mc };
        let rep = verify_schauder_k_independence(
            &c.model,
            &c.f,
            s.lambda.unwrap_or(c.lambda),
            &s.k_list,
            s.beta,
            &lattice,
            picard.quad_tol,
            mc,
        )?;
        out.json("schauder.json", &rep)?;
        gates.push(Gate::new("schauder_spread", rep.pass, format!("spread {} over {:?}", rep.spread, rep.ratios)));
    }
    Ok(gates)
}

fn transform_config(c: &TransformRunConfig, seed: u64) -> Result<TransformConfig> {
    let mut cfg = TransformConfig::new(c.lattice.build()?);
    cfg.schedule = c.schedule.clone();
    cfg.picard = c.picard.with_seed(seed);
    cfg.allow_counterexample = c.allow_counterexample;
    Ok(cfg)
}

/// Round-trip, inverse-Jacobian and contraction checks on a built transform.
#[derive(Clone, Debug, Serialize)]
pub struct TransformChecks {
    pub round_trip_max: f64,
    pub dpsi_inverse_sup: f64,
    pub dpsi_inverse_bound: f64,
    pub max_contraction_ratio: f64,
}

pub fn transform_checks(t: &ZvonkinTransform) -> Result<TransformChecks> {
    let lat = t.u.lattice;
    let mut round_trip: f64 = 0.0;
    let mut ratio: f64 = 0.0;
    for i in 0..lat.len() {
        let x = lat.point(i);
        let y = psi_forward(t, &x);
        let back = psi_inverse(t, &y, 1e-13)?;
        let err = x.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        round_trip = round_trip.max(err);
        ratio = ratio.max(psi_inverse_traced(t, &y, 1e-14)?.max_ratio);
    }
    Ok(TransformChecks {
        round_trip_max: round_trip,
        dpsi_inverse_sup: dpsi_inverse_sup(t),
        dpsi_inverse_bound: 1.0 / (1.0 - t.c_lambda),
        max_contraction_ratio: ratio,
    })
}

fn transform(c: &TransformRunConfig, seed: u64, out: &mut Outputs) -> Result<(Vec<Gate>, ZvonkinTransform)> {
    let t = build_transform(&c.model, &c.drift, &transform_config(c, seed)?)?;
    let files = t.write_bundle(&out.dir().join("transform"))?;
    for f in files {
        out.register(&f)?;
    }
    let mut csv = String::from("lambda,q,c_lambda\n");
    for s in &t.steps {
        let c = s.c_lambda.map_or("".to_string(), |v| format!("{v:e}"));
        csv.push_str(&format!("{:e},{:e},{c}\n", s.lambda, s.q));
    }
    out.text("c_lambda_curve.csv", &csv)?;
    let checks = transform_checks(&t)?;
    out.json("transform_checks.json", &checks)?;
    let gates = vec![
        Gate::new("c_lambda_gate", t.c_lambda < 1.0 / 3.0, format!("c_λ = {} at λ = {}", t.c_lambda, t.lambda)),
        Gate::new("round_trip", checks.round_trip_max < 1e-8, format!("{:e}", checks.round_trip_max)),
        Gate::new(
            "inverse_jacobian",
            checks.dpsi_inverse_sup <= checks.dpsi_inverse_bound + 1e-3,
            format!("{} <= {}", checks.dpsi_inverse_sup, checks.dpsi_inverse_bound),
        ),
        Gate::new(
            "contraction_ratio",
            checks.max_contraction_ratio <= t.c_lambda + 0.05,
            format!("{} <= {}", checks.max_contraction_ratio, t.c_lambda + 0.05),
        ),
    ];
    Ok((gates, t))
}

/// `values[i+1] <= values[i]·(1 + allowance)` for every `i`.
pub fn non_increasing(values: &[f64], allowance: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] * (1.0 + allowance))
}

fn simulate(c: &SimulateConfig, seed: u64, out: &mut Outputs) -> Result<Vec<Gate>> {
    let root = SeedTree::new(seed);
    let (mut gates, t) = transform(&c.transform, root.named("transform").seed(), out)?;
    let model = &c.transform.model;
    let coeffs = auxiliary_coeffs(&t, model, c.eps_cut)?;
    let config = ConsistencyConfig {
        x0: c.x0.clone(),
        h_list: c.h_list.clone(),
        horizon: c.horizon,
        n_paths: c.n_paths,
        eps_cut: c.eps_cut,
        seed: root.named("paths").seed(),
        map: c.map,
    };
    let rep = transform_consistency(model, &c.transform.drift, &coeffs, &config)?;
    let mut csv = String::from("h,mean_sup_error,median_sup_error,mean_ito_defect\n");
    for i in 0..rep.h_list.len() {
        csv.push_str(&format!(
            "{:e},{:e},{:e},{:e}\n",
            rep.h_list[i], rep.sup_errors[i], rep.median_errors[i], rep.ito_defects[i]
        ));
    }
    out.text("consistency.csv", &csv)?;
    out.json("consistency.json", &rep)?;
    gates.push(Gate::new(
        "consistency_decreasing",
        non_increasing(&rep.sup_errors, c.allowance),
        format!("{:?}", rep.sup_errors),
    ));
    gates.push(Gate::new(
        "ito_defect_decreasing",
        non_increasing(&rep.ito_defects, c.allowance),
        format!("{:?}", rep.ito_defects),
    ));
    Ok(gates)
}

fn flow(c: &FlowRunConfig, seed: u64, out: &mut Outputs) -> Result<Vec<Gate>> {
    let config = FlowConfig {
        model: c.model.clone(),
        drift: c.drift.clone(),
        starts: c.starts.clone(),
        horizon: c.horizon,
        h: c.h,
        n_runs: c.n_runs,
        seed,
        noise: c.noise.clone(),
        fd_delta: c.fd_delta,
        keep_runs: c.keep_runs,
    };
    let res = flow_simulation(&config)?;
    for f in res.write_bundle(&out.dir().join("flow"))? {
        out.register(&f)?;
    }
    let d = &res.diagnostics;
    let mut gates = vec![Gate::new("injectivity", d.min_gap > 0.0, format!("min gap {:e}", d.min_gap))];
    if c.model.dimension == 1 {
        gates.push(Gate::new(
            "order_preserved",
            d.order_violations == 0,
            format!("{} violations over {} runs", d.order_violations, c.n_runs),
        ));
    }
    Ok(gates)
}

fn dispersion(c: &DispersionRunConfig, seed: u64, out: &mut Outputs) -> Result<Vec<Gate>> {
    let table = uniqueness_dispersion(&DispersionConfig {
        model: c.model.clone(),
        drift: c.drift.clone(),
        x0: c.x0.clone(),
        delta_list: c.delta_list.clone(),
        h_list: c.h_list.clone(),
        horizon: c.horizon,
        n_mc: c.n_mc,
        seed,
        noise: c.noise.clone(),
        allow_counterexample: c.allow_counterexample,
    })?;
    out.text("dispersion.csv", &table.to_csv())?;
    Ok(Vec::new())
}

/// Log-log slope of the statistic between the largest and smallest offset.
fn dispersion_slope(deltas: &[f64], stats: &[f64]) -> f64 {
    let (i, j) = (0, deltas.len() - 1);
    (stats[i] / stats[j]).ln() / (deltas[i] / deltas[j]).ln()
}

fn regime_sweep(c: &RegimeSweepConfig, seed: u64, out: &mut Outputs) -> Result<Vec<Gate>> {
    if c.delta_list.len() < 2 {
        anyhow::bail!("regime-sweep needs at least two offsets");
    }
    let root = SeedTree::new(seed);
    let mut csv = String::from("alpha,beta,alpha_plus_beta,beta_above_1_minus_alpha_half,alpha_plus_beta_above_1");
    for d in &c.delta_list {
        csv.push_str(&format!(",median_delta_{d:e}"));
    }
    csv.push_str(",slope,plateau\n");
    for (ia, &alpha) in c.alphas.iter().enumerate() {
        for (ib, &beta) in c.betas.iter().enumerate() {
            let table = uniqueness_dispersion(&DispersionConfig {
                model: LevyModel::isotropic(1, alpha, c.scale),
                drift: DriftSpec::holder_power(beta, c.kappa, c.bound),
                x0: vec![0.0],
                delta_list: c.delta_list.clone(),
                h_list: vec![c.h],
                horizon: c.horizon,
                n_mc: c.n_mc,
                seed: root.child((ia * c.betas.len() + ib) as u64).seed(),
                noise: NoiseConfig::exact(),
                allow_counterexample: true,
            })
            .with_context(|| format!("cell α = {alpha}, β = {beta}"))?;
            let stats: Vec<f64> = table.rows.iter().map(|r| r.median).collect();
            let slope = dispersion_slope(&c.delta_list, &stats);
            csv.push_str(&format!(
                "{alpha},{beta},{},{},{}",
                alpha + beta,
                beta > 1.0 - alpha / 2.0,
                alpha + beta > 1.0
            ));
            for s in &stats {
                csv.push_str(&format!(",{s:e}"));
            }
            csv.push_str(&format!(",{slope},{}\n", slope < c.slope_threshold));
        }
    }
    out.text("regime_sweep.csv", &csv)?;
    Ok(Vec::new())
}
