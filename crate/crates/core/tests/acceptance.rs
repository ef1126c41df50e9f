//! Acceptance checks, one line per criterion.
//!
//! Criteria 1-3 run against the synthetic case-study analog. When
//! `PATHATTR_PUBLISHED_DATA` names a directory holding `global.csv`,
//! `NH.csv` and `NA.csv` in the long-form schema, they also run against
//! that dataset with the original tolerances.

mod common;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pathattr::data::{
    center_impacts, load_dataset, pseudo_observation, ColumnMapping, ForcingLevel, ImpactDataset,
    ScalarMetricTable,
};
use pathattr::fingerprint::{loo_assessment, FingerprintOptions};
use pathattr::likelihood::{joint_loglik, JointModel};
use pathattr::lrtest::{lr_statistic, mc_pvalue, sample_null};
use pathattr::ols::least_squares;
use pathattr::pathway::PathwayGraph;
use pathattr::regress::{build_design, fit_joint, fit_joint_normalized, StepModel};
use pathattr::synth::oracle::{analytic_pvalue_1d, ks_critical_5pct, ks_uniform_statistic, BivariateChain};
use pathattr::synth::reference::{
    analog_spec, fingerprint_analog_spec, ReferenceContext, GLOBAL_3YR_MULTI_P, GLOBAL_3YR_SINGLE_P_7TG,
    OBSERVATION_FORCING, REFERENCE_CONTEXTS,
};
use pathattr::synth::{generate_metrics, generate_series};

use common::{chain_model, level, levels, single_pathway, single_step_model};

const ANALOG_SEED: u64 = 1991;
const MC_SEED: u64 = 20240601;
const NULL_SET: [f64; 7] = [0.0, 1.0, 3.0, 5.0, 7.0, 13.0, 15.0];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, name: &str, limit: Duration, run: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let mut out = run();
        let elapsed = start.elapsed();
        if elapsed > limit {
            out.pass = false;
            out.detail += &format!("; runtime {:.1}s over {:.0}s budget", elapsed.as_secs_f64(), limit.as_secs_f64());
        }
        let tag = if out.pass { "PASS" } else { "FAIL" };
        if !out.pass {
            self.failures += 1;
        }
        println!("criterion {id:<3} {tag}  {name} ({:.2}s): {}", elapsed.as_secs_f64(), out.detail);
    }

    fn skip(&self, id: &str, name: &str, why: &str) {
        println!("criterion {id:<3} SKIP  {name}: {why}");
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Tolerance {
    /// Published tolerances.
    Strict,
    /// Published tolerances or three standard errors, whichever is looser.
    ThreeSe,
}

fn ten() -> ForcingLevel {
    level(OBSERVATION_FORCING)
}

struct ContextFits {
    table: ScalarMetricTable,
    single: JointModel,
    multi: JointModel,
    single_norm: JointModel,
    multi_norm: JointModel,
}

fn fit_context(table: ScalarMetricTable) -> ContextFits {
    let excluded = [ten()];
    let cooling = PathwayGraph::surface_cooling();
    ContextFits {
        single: fit_joint(&table, &single_pathway(), &excluded, true).unwrap(),
        multi: fit_joint(&table, &cooling, &excluded, true).unwrap(),
        single_norm: fit_joint_normalized(&table, &single_pathway(), &excluded, true).unwrap(),
        multi_norm: fit_joint_normalized(&table, &cooling, &excluded, true).unwrap(),
        table,
    }
}

fn analog_tables() -> Vec<(ReferenceContext, ScalarMetricTable)> {
    REFERENCE_CONTEXTS
        .iter()
        .map(|c| (*c, generate_metrics(&analog_spec(c, ANALOG_SEED)).unwrap()))
        .collect()
}

fn published_dir() -> Option<PathBuf> {
    std::env::var_os("PATHATTR_PUBLISHED_DATA").map(PathBuf::from)
}

fn region_file(dir: &Path, c: &ReferenceContext) -> PathBuf {
    dir.join(format!("{}.csv", c.region.region().name))
}

fn published_tables(dir: &Path) -> Vec<(ReferenceContext, ScalarMetricTable)> {
    REFERENCE_CONTEXTS
        .iter()
        .map(|c| {
            let raw = load_dataset(region_file(dir, c), &ColumnMapping::default()).unwrap();
            let centered = center_impacts(&raw).unwrap();
            let table =
                ScalarMetricTable::from_dataset(&centered, &c.window.window(), &c.region.region()).unwrap();
            (*c, table)
        })
        .collect()
}

fn step<'a>(m: &'a JointModel, target: &str) -> &'a StepModel {
    m.step(target).unwrap()
}

fn label(c: &ReferenceContext) -> String {
    format!("{}/{}", c.region.region().name, c.window.window().name)
}

const SUMMARY_NAMES: [&str; 7] =
    ["theta_SO2", "R2 single", "R2 FSNT", "R2 multi", "sigma2 single", "sigma2 FSNT", "sigma2 multi"];

/// Single-step slope, three R^2 values and three normalized residual variances.
fn summaries(fits: &ContextFits) -> [f64; 7] {
    [
        step(&fits.single, "TREFHT").theta[0],
        step(&fits.single, "TREFHT").r2,
        step(&fits.multi, "FSNT").r2,
        step(&fits.multi, "TREFHT").r2,
        step(&fits.single_norm, "TREFHT").sigma2,
        step(&fits.multi_norm, "FSNT").sigma2,
        step(&fits.multi_norm, "TREFHT").sigma2,
    ]
}

fn published(c: &ReferenceContext) -> [f64; 7] {
    let (s1, s2, s3) = c.normalized_sigma2;
    [c.single_theta, c.r2_single, c.r2_fsnt, c.r2_multi, s1, s2, s3]
}

fn published_tolerance(c: &ReferenceContext) -> [f64; 7] {
    let theta = (0.05 * c.single_theta.abs()).max(5e-4);
    [theta, 0.01, 0.01, 0.01, 0.005, 0.005, 0.005]
}

/// Standard deviation of each summary across independently seeded analogs.
fn replicate_sd(c: &ReferenceContext) -> [f64; 7] {
    const REPLICATES: u64 = 40;
    let draws: Vec<[f64; 7]> = (1..=REPLICATES)
        .map(|i| {
            let table = generate_metrics(&analog_spec(c, ANALOG_SEED + 1000 * i)).unwrap();
            summaries(&fit_context(table))
        })
        .collect();
    std::array::from_fn(|k| {
        let mean = draws.iter().map(|d| d[k]).sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d[k] - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        var.sqrt()
    })
}

fn regression_parity(tables: Vec<(ReferenceContext, ScalarMetricTable)>, tol: Tolerance) -> Outcome {
    let mut misses = Vec::new();
    let mut checks = 0;
    for (context, table) in tables {
        let got = summaries(&fit_context(table));
        let want = published(&context);
        let mut allowed = published_tolerance(&context);
        if tol == Tolerance::ThreeSe {
            for (a, sd) in allowed.iter_mut().zip(replicate_sd(&context)) {
                *a = a.max(3.0 * sd);
            }
        }
        for k in 0..7 {
            checks += 1;
            if (got[k] - want[k]).abs() > allowed[k] {
                misses.push(format!(
                    "{} {} {:.4} vs {:.4} (tol {:.4})",
                    label(&context),
                    SUMMARY_NAMES[k],
                    got[k],
                    want[k],
                    allowed[k]
                ));
            }
        }
    }
    let pass = misses.is_empty();
    let mut detail = format!("{}/{} values within tolerance", checks - misses.len(), checks);
    if !pass {
        detail += &format!("; misses: {}", misses.join("; "));
    }
    Outcome::new(pass, detail)
}

fn attribution_parity(tables: Vec<(ReferenceContext, ScalarMetricTable)>, tol: Tolerance) -> Outcome {
    let n = 1_000_000;
    let nulls = levels(&NULL_SET);
    let mut cells = 0;
    let mut ordered = 0;
    let mut problems = Vec::new();
    let mut notes = Vec::new();
    for (context, table) in tables {
        let fits = fit_context(table);
        let obs = pseudo_observation(&fits.table, ten()).unwrap();
        let global_3yr = context == REFERENCE_CONTEXTS[0];
        for &f0 in &nulls {
            let single = mc_pvalue(&fits.single, f0, ten(), &obs, n, MC_SEED).unwrap();
            let multi = mc_pvalue(&fits.multi, f0, ten(), &obs, n, MC_SEED).unwrap();
            cells += 1;
            if multi.p_value.value() <= single.p_value.value() {
                ordered += 1;
            }
            if !global_3yr {
                continue;
            }
            if multi.p_value.value() > 1.5e-5 {
                problems.push(format!("multi {f0} p={} > 1.5e-5", multi.p_value));
            }
            let reported = GLOBAL_3YR_MULTI_P.iter().find(|(f, _)| *f == f0.magnitude()).unwrap().1;
            if reported.is_none() && !multi.p_value.is_floored() {
                problems.push(format!("multi {f0} reported floored, got {}", multi.p_value));
            }
            if f0 == level(7.0) {
                let p = single.p_value.value();
                let in_band = (0.2..=0.35).contains(&p);
                let ok = match tol {
                    Tolerance::Strict => in_band,
                    Tolerance::ThreeSe => in_band || {
                        let (lo, hi) = single_step_band(&fits, f0);
                        (lo..=hi).contains(&GLOBAL_3YR_SINGLE_P_7TG)
                    },
                };
                if !ok {
                    problems.push(format!("single 7 Tg p={p:.3} outside [0.2, 0.35]"));
                } else if !in_band {
                    let (lo, hi) = single_step_band(&fits, f0);
                    notes.push(format!("single 7 Tg p={p:.3}, 3 SE band [{lo:.3}, {hi:.3}] holds {GLOBAL_3YR_SINGLE_P_7TG}"));
                }
            }
        }
    }
    let frac = ordered as f64 / cells as f64;
    if frac < 0.9 {
        problems.push(format!("multi <= single in only {ordered}/{cells} cells"));
    }
    Outcome::new(
        problems.is_empty(),
        format!(
            "multi <= single in {ordered}/{cells} cells{}",
            problems.iter().chain(&notes).map(|x| format!("; {x}")).collect::<String>()
        ),
    )
}

/// Range of single-step p-values for observations within three standard
/// errors of an ensemble mean around the fitted expectation at 10 Tg.
fn single_step_band(fits: &ContextFits, f0: ForcingLevel) -> (f64, f64) {
    let s = step(&fits.single, "TREFHT");
    let expected = s.theta[0] * OBSERVATION_FORCING;
    let members = fits.table.members_per_level() as f64;
    let shift = 3.0 * (s.sigma2 / members).sqrt();
    let p = |x: f64| analytic_pvalue_1d(s.theta[0], s.sigma2, f0.magnitude(), OBSERVATION_FORCING, x).unwrap();
    let (a, b) = (p(expected - shift), p(expected + shift));
    (a.min(b), a.max(b))
}

struct FingerprintCounts {
    two: f64,
    three: f64,
}

fn fingerprint_counts(dataset: &ImpactDataset) -> FingerprintCounts {
    let vars = vec!["TREFHT".to_string()];
    let window = pathattr::data::TimeWindow::three_year();
    let opts = FingerprintOptions::default();
    let two = loo_assessment(dataset, &vars, &levels(&[0.0, 10.0]), ten(), &window, 0.95, opts).unwrap();
    let three = loo_assessment(dataset, &vars, &levels(&[0.0, 7.0, 10.0]), ten(), &window, 0.95, opts).unwrap();
    FingerprintCounts {
        two: two.attribution_count(ten()) as f64,
        three: three.attribution_count(ten()) as f64,
    }
}

fn fingerprint_strict(c: &FingerprintCounts) -> bool {
    (9.0..=13.0).contains(&c.two) && c.three <= 5.0
}

fn fingerprint_analog() -> Outcome {
    let seeds = 20;
    let mut two = 0.0;
    let mut three = 0.0;
    for i in 0..seeds {
        let raw = generate_series(&fingerprint_analog_spec(ANALOG_SEED + i)).unwrap();
        let c = fingerprint_counts(&center_impacts(&raw).unwrap());
        two += c.two;
        three += c.three;
    }
    let mean = FingerprintCounts { two: two / seeds as f64, three: three / seeds as f64 };
    // binomial standard error of a 15-trial success rate at the reported rates
    let se = |p: f64| 15.0 * (p * (1.0 - p) / 15.0).sqrt();
    let widened = mean.two >= 11.25 - 3.0 * se(0.75) && mean.three <= 3.75 + 3.0 * se(0.25);
    Outcome::new(
        widened,
        format!(
            "mean over {seeds} analogs: {{0,10}} {:.2}/15, {{0,7,10}} {:.2}/15; published bands (9-13, <=5) {}",
            mean.two,
            mean.three,
            if fingerprint_strict(&mean) { "met" } else { "not met" }
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let n = 1_000_000u64;
    let mut worst: f64 = 0.0;
    let mut misses = Vec::new();
    let mut points = 0;
    // 50 single-step scenarios spanning p from about 1e-4 to 0.99
    let quantiles = [-2.3, -1.2, -0.4, 0.3, 1.0, 1.6, 2.2, 2.8, 3.3, 3.7];
    let models = [(-0.02, 0.002, 0.0, 10.0), (0.5, 1.0, 1.0, 4.0), (1.0, 1.0, 0.0, 1.0), (-3.0, 0.25, 7.0, 5.0), (0.1, 4.0, 2.0, 20.0)];
    for (i, &(theta, s2, f0, f1)) in models.iter().enumerate() {
        let model = single_step_model(theta, s2);
        let dir = (theta * (f1 - f0)).signum();
        for (j, q) in quantiles.iter().enumerate() {
            let k_obs = theta * f0 + dir * q * s2.sqrt();
            let exact = analytic_pvalue_1d(theta, s2, f0, f1, k_obs).unwrap();
            let obs = pathattr::data::PseudoObservation::new([("k".to_string(), k_obs)].into());
            let r = mc_pvalue(&model, level(f0), level(f1), &obs, n, MC_SEED + (10 * i + j) as u64).unwrap();
            let se = (exact * (1.0 - exact) / n as f64).sqrt();
            let z = (r.p_value.value() - exact).abs() / se;
            worst = worst.max(z);
            points += 1;
            if z > 3.0 {
                misses.push(format!("theta={theta} f0={f0} f1={f1} p={exact:.3e} mc={}", r.p_value));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut max_diff: f64 = 0.0;
    for trial in 0..40 {
        use rand::Rng;
        let m = BivariateChain {
            a1: rng.random_range(-1.0..1.0),
            b1: rng.random_range(-1.0..1.0),
            s1: rng.random_range(0.05..2.0),
            a2: rng.random_range(-1.0..1.0),
            b2: rng.random_range(-1.0..1.0),
            c: rng.random_range(-2.0..2.0),
            s2: rng.random_range(0.05..2.0),
        };
        let model = chain_model(&m);
        let f = (trial % 16) as f64;
        let (y1, y2) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let obs = pathattr::data::PseudoObservation::new([("FSNT".into(), y1), ("TREFHT".into(), y2)].into());
        let ours = joint_loglik(&model, level(f), &obs).unwrap().value();
        max_diff = max_diff.max((ours - m.joint_logpdf(f, y1, y2)).abs());
    }
    if max_diff > 1e-9 {
        misses.push(format!("bivariate log-density off by {max_diff:.2e}"));
    }
    Outcome::new(
        misses.is_empty(),
        format!(
            "{points} p-values, worst {worst:.2} MC SE; bivariate max |diff| {max_diff:.1e}{}",
            if misses.is_empty() { String::new() } else { format!("; misses: {}", misses.join("; ")) }
        ),
    )
}

fn calibration() -> Outcome {
    let table = generate_metrics(&analog_spec(&REFERENCE_CONTEXTS[0], ANALOG_SEED)).unwrap();
    let model = fit_joint(&table, &PathwayGraph::surface_cooling(), &[ten()], true).unwrap();
    let f0 = level(7.0);
    let mut rng = ChaCha8Rng::seed_from_u64(MC_SEED);
    let ps: Vec<f64> = (0..500)
        .map(|i| {
            let obs = sample_null(&model, f0, &mut rng).unwrap().to_observation();
            mc_pvalue(&model, f0, ten(), &obs, 20_000, MC_SEED + 1 + i).unwrap().p_value.value()
        })
        .collect();
    let d = ks_uniform_statistic(&ps);
    let crit = ks_critical_5pct(ps.len());
    Outcome::new(d < crit, format!("KS D = {d:.4}, 5% critical {crit:.4}, 500 null re-draws"))
}

fn power() -> Outcome {
    let trials = 200;
    let mut wins = 0;
    for t in 0..trials {
        let spec = analog_spec(&REFERENCE_CONTEXTS[0], 5000 + t);
        let table = generate_metrics(&spec).unwrap();
        let (f0, f1) = if t % 2 == 0 { (level(0.0), ten()) } else { (level(15.0), level(5.0)) };
        let single = fit_joint(&table, &single_pathway(), &[f1], true).unwrap();
        let multi = fit_joint(&table, &PathwayGraph::surface_cooling(), &[f1], true).unwrap();
        // one held-out member of the alternative ensemble is the observation
        let member = (t % 15) as usize;
        let obs = pathattr::data::PseudoObservation::new(
            ["FSNT", "TREFHT"]
                .iter()
                .map(|v| (v.to_string(), table.metrics(v, f1).unwrap()[member]))
                .collect(),
        );
        let ps = mc_pvalue(&single, f0, f1, &obs, 100_000, MC_SEED + t).unwrap();
        let pm = mc_pvalue(&multi, f0, f1, &obs, 100_000, MC_SEED + t).unwrap();
        if pm.p_value.value() <= ps.p_value.value() {
            wins += 1;
        }
    }
    let frac = wins as f64 / trials as f64;
    Outcome::new(frac >= 0.9, format!("multi <= single in {wins}/{trials} trials"))
}

fn identities() -> Outcome {
    let mut problems = Vec::new();
    let table = generate_metrics(&analog_spec(&REFERENCE_CONTEXTS[0], ANALOG_SEED)).unwrap();
    let graph = PathwayGraph::surface_cooling();
    let model = fit_joint(&table, &graph, &[ten()], true).unwrap();
    let obs = pseudo_observation(&table, ten()).unwrap();

    // antisymmetry
    for &a in &levels(&NULL_SET) {
        let fwd = lr_statistic(&model, a, ten(), &obs).unwrap().lambda;
        let back = lr_statistic(&model, ten(), a, &obs).unwrap().lambda;
        if fwd + back != 0.0 {
            problems.push(format!("lambda({a},10) + lambda(10,{a}) = {:e}", fwd + back));
        }
    }

    // affine rescaling of each observed variable
    let scales = [("FSNT", 37.0), ("TREFHT", 0.01)];
    let scaled_table = table
        .map_values(|v, x| x * scales.iter().find(|(n, _)| *n == v).unwrap().1)
        .unwrap();
    let scaled_model = fit_joint(&scaled_table, &graph, &[ten()], true).unwrap();
    let scaled_obs = pseudo_observation(&scaled_table, ten()).unwrap();
    let mut worst_lambda: f64 = 0.0;
    for &f0 in &levels(&[3.0, 7.0, 13.0]) {
        let a = mc_pvalue(&model, f0, ten(), &obs, 200_000, MC_SEED).unwrap();
        let b = mc_pvalue(&scaled_model, f0, ten(), &scaled_obs, 200_000, MC_SEED).unwrap();
        worst_lambda = worst_lambda.max((a.lambda_obs - b.lambda_obs).abs());
        if (a.p_value.value() - b.p_value.value()).abs() > 1e-9 {
            problems.push(format!("p at {f0} moved under rescaling: {} vs {}", a.p_value, b.p_value));
        }
    }
    if worst_lambda > 1e-9 {
        problems.push(format!("lambda moved by {worst_lambda:.2e} under rescaling"));
    }

    // residual orthogonality
    let mut worst_orth: f64 = 0.0;
    for target in ["FSNT", "TREFHT"] {
        let d = build_design(&table, &graph, target, &[ten()], true, None).unwrap();
        let fit = least_squares(&d.matrix, &d.response, &d.columns).unwrap();
        let y_norm = d.response.iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 0..d.matrix.ncols() {
            let col = d.matrix.column(j);
            let dot: f64 = col.iter().zip(&fit.residuals).map(|(a, b)| a * b).sum();
            worst_orth = worst_orth.max(dot.abs() / (col.norm() * y_norm));
        }
    }
    if worst_orth > 1e-8 {
        problems.push(format!("residual/column cosine {worst_orth:.2e}"));
    }

    // determinism across thread counts
    let run = |threads: usize| -> String {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let t = generate_metrics(&analog_spec(&REFERENCE_CONTEXTS[0], ANALOG_SEED)).unwrap();
            let m = fit_joint(&t, &graph, &[ten()], true).unwrap();
            let o = pseudo_observation(&t, ten()).unwrap();
            let r = mc_pvalue(&m, level(7.0), ten(), &o, 300_000, MC_SEED).unwrap();
            let raw = generate_series(&fingerprint_analog_spec(ANALOG_SEED)).unwrap();
            let loo = loo_assessment(
                &center_impacts(&raw).unwrap(),
                &["TREFHT".to_string()],
                &levels(&[0.0, 10.0]),
                ten(),
                &pathattr::data::TimeWindow::three_year(),
                0.95,
                FingerprintOptions::default(),
            )
            .unwrap();
            format!("{t:?}|{m:?}|{r:?}|{}", serde_json::to_string(&loo).unwrap())
        })
    };
    let reference = run(1);
    for threads in [2, 3, 8] {
        if run(threads) != reference {
            problems.push(format!("output differs with {threads} threads"));
        }
    }

    Outcome::new(
        problems.is_empty(),
        format!(
            "antisymmetry exact, rescaling |d lambda| {worst_lambda:.1e}, orthogonality {worst_orth:.1e}, threads 1/2/3/8{}",
            if problems.is_empty() { " identical".to_string() } else { format!("; {}", problems.join("; ")) }
        ),
    )
}

fn main() -> ExitCode {
    let mut report = Report { failures: 0 };
    let secs = Duration::from_secs;

    report.line("1", "regression parity [synthetic analog, 3 SE]", secs(10), || {
        regression_parity(analog_tables(), Tolerance::ThreeSe)
    });
    report.line("2", "attribution parity [synthetic analog, 3 SE]", secs(120), || {
        attribution_parity(analog_tables(), Tolerance::ThreeSe)
    });
    report.line("3", "fingerprint parity [synthetic analog, 3 SE]", secs(5), fingerprint_analog);

    match published_dir() {
        Some(dir) => {
            report.line("1p", "regression parity [published data]", secs(10), || {
                regression_parity(published_tables(&dir), Tolerance::Strict)
            });
            report.line("2p", "attribution parity [published data]", secs(120), || {
                attribution_parity(published_tables(&dir), Tolerance::Strict)
            });
            report.line("3p", "fingerprint parity [published data]", secs(5), || {
                let raw = load_dataset(region_file(&dir, &REFERENCE_CONTEXTS[0]), &ColumnMapping::default()).unwrap();
                let c = fingerprint_counts(&center_impacts(&raw).unwrap());
                Outcome::new(
                    fingerprint_strict(&c),
                    format!("{{0,10}} {}/15, {{0,7,10}} {}/15", c.two, c.three),
                )
            });
        }
        None => {
            for (id, name) in [("1p", "regression parity"), ("2p", "attribution parity"), ("3p", "fingerprint parity")] {
                report.skip(id, &format!("{name} [published data]"), "PATHATTR_PUBLISHED_DATA not set");
            }
        }
    }

    report.line("4", "oracle equivalence", secs(60), oracle_equivalence);
    report.line("5", "calibration", secs(120), calibration);
    report.line("6", "power ordering", secs(120), power);
    report.line("7", "exact structural identities", secs(120), identities);

    if report.failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", report.failures);
        ExitCode::FAILURE
    }
}
