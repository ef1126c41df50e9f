use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use pathattr::data::PseudoObservation;
use pathattr::likelihood::{joint_loglik, JointModel};
use pathattr::lrtest::{mc_pvalue, sample_null};
use pathattr::pathway::PathwayGraph;
use pathattr::regress::StepModel;
use pathattr::synth::oracle::{analytic_pvalue_1d, ks_critical_1pct, ks_uniform_statistic, BivariateChain};
use pathattr::{ForcingLevel, Result};

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn level(x: f64) -> ForcingLevel {
    ForcingLevel::new(x).expect("non-negative level")
}

fn step(graph: &PathwayGraph, target: &str, theta: Vec<f64>, intercept: f64, sigma2: f64) -> Result<StepModel> {
    let parents = graph.parent_set(target)?;
    let k = theta.len();
    Ok(StepModel {
        target: target.into(),
        parents,
        theta,
        intercept,
        with_intercept: intercept != 0.0,
        sigma2,
        n_obs: 0,
        r2: f64::NAN,
        theta_std_errors: vec![0.0; k],
        intercept_std_error: None,
        excluded_forcings: Vec::new(),
    })
}

fn chain_model(m: &BivariateChain) -> Result<JointModel> {
    let graph = PathwayGraph::surface_cooling();
    let s1 = step(&graph, "FSNT", vec![m.b1], m.a1, m.s1)?;
    let s2 = step(&graph, "TREFHT", vec![m.b2, m.c], m.a2, m.s2)?;
    JointModel::new(graph, vec![s1, s2], None)
}

/// Monte Carlo p-values of a one-step model against the closed form.
fn analytic_grid(n_samples: u64, seed: u64) -> Result<Check> {
    let graph = PathwayGraph::single_step("F", "k");
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for &(theta, sigma2) in &[(1.0, 1.0), (-0.5, 2.0), (0.02, 0.01)] {
        let model = JointModel::new(graph.clone(), vec![step(&graph, "k", vec![theta], 0.0, sigma2)?], None)?;
        for &(f0, f1) in &[(0.0, 1.0), (3.0, 10.0), (15.0, 7.0)] {
            for &z in &[-1.0, 0.5, 2.0] {
                let k_obs = theta * f0 + z * sigma2.sqrt();
                let exact = analytic_pvalue_1d(theta, sigma2, f0, f1, k_obs)?;
                let obs = PseudoObservation::new([("k".to_string(), k_obs)].into());
                let mc = mc_pvalue(&model, level(f0), level(f1), &obs, n_samples, seed)?;
                let se = (exact * (1.0 - exact) / n_samples as f64).sqrt().max(1.0 / n_samples as f64);
                worst = worst.max((mc.p_value.value() - exact).abs() / se);
                points += 1;
            }
        }
    }
    Ok(Check {
        name: "analytic p-values",
        pass: worst < 4.5,
        detail: format!("{points} cells at n = {n_samples}, worst deviation {worst:.2} SE"),
    })
}

/// Factorized joint density of a two-step chain against the bivariate normal.
fn bivariate(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let m = BivariateChain {
            a1: rng.random_range(-1.0..1.0),
            b1: rng.random_range(-0.5..0.5),
            s1: rng.random_range(0.05..2.0),
            a2: rng.random_range(-1.0..1.0),
            b2: rng.random_range(-0.5..0.5),
            c: rng.random_range(-2.0..2.0),
            s2: rng.random_range(0.05..2.0),
        };
        let model = chain_model(&m)?;
        let f = rng.random_range(0.0..15.0);
        let (y1, y2) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let obs = PseudoObservation::new([("FSNT".to_string(), y1), ("TREFHT".to_string(), y2)].into());
        let ours = joint_loglik(&model, level(f), &obs)?.value();
        worst = worst.max((ours - m.joint_logpdf(f, y1, y2)).abs());
    }
    Ok(Check {
        name: "bivariate log-density",
        pass: worst < 1e-9,
        detail: format!("200 random chains, max |diff| {worst:.1e}"),
    })
}

/// p-values of observations drawn under the null should be uniform.
fn calibration(seed: u64) -> Result<Check> {
    let m = BivariateChain { a1: 0.2, b1: -0.3, s1: 0.3, a2: -0.1, b2: 0.02, c: 0.15, s2: 0.01 };
    let model = chain_model(&m)?;
    let (f0, f1) = (level(7.0), level(10.0));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = 300;
    let ps = (0..draws)
        .map(|i| {
            let obs = sample_null(&model, f0, &mut rng)?.to_observation();
            Ok(mc_pvalue(&model, f0, f1, &obs, 5_000, seed.wrapping_add(1 + i))?.p_value.value())
        })
        .collect::<Result<Vec<f64>>>()?;
    let d = ks_uniform_statistic(&ps);
    let crit = ks_critical_1pct(ps.len());
    Ok(Check {
        name: "null calibration",
        pass: d < crit,
        detail: format!("KS D = {d:.4} against 1% critical {crit:.4} over {draws} null draws"),
    })
}

pub fn run_all(n_samples: u64, seed: u64) -> Result<Vec<Check>> {
    Ok(vec![analytic_grid(n_samples, seed)?, bivariate(seed)?, calibration(seed)?])
}

pub fn to_json(checks: &[Check]) -> Value {
    Value::Array(
        checks
            .iter()
            .map(|c| json!({ "check": c.name, "pass": c.pass, "detail": c.detail }))
            .collect(),
    )
}
