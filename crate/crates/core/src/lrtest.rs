//! Likelihood-ratio tests between two forcing hypotheses with a Monte Carlo
//! null distribution.
//!
//! Null draws come from ancestral sampling of the fitted pathway at `f0`.
//! Sample `i` belongs to block `i / BLOCK_SIZE`, and each block draws from its
//! own ChaCha stream keyed by `(seed, block)`. Exceedance counts are summed
//! over blocks, so a result depends only on `(seed, n_samples)` and never on
//! how blocks are spread over threads.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ForcingLevel, PseudoObservation};
use crate::error::{Error, Result};
use crate::likelihood::{CompiledModel, JointModel};

pub const BLOCK_SIZE: u64 = 8192;

/// Deterministic generator for one block of Monte Carlo samples.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LRStatistic {
    pub f0: ForcingLevel,
    pub f1: ForcingLevel,
    /// `log L(f1) - log L(f0)`.
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum PValue {
    Estimate(f64),
    /// No exceedances; the p-value is below this bound (`1 / n_samples`).
    Below(f64),
}

impl PValue {
    /// Point value: the estimate, or the bound when floored.
    pub fn value(self) -> f64 {
        match self {
            PValue::Estimate(p) | PValue::Below(p) => p,
        }
    }

    pub fn is_floored(self) -> bool {
        matches!(self, PValue::Below(_))
    }
}

impl fmt::Display for PValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PValue::Estimate(p) => write!(f, "{p:.2e}"),
            PValue::Below(p) => write!(f, "< {p:.2e}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LRTestResult {
    pub f0: ForcingLevel,
    pub f1: ForcingLevel,
    pub lambda_obs: f64,
    pub n_samples: u64,
    pub exceed_count: u64,
    pub p_value: PValue,
    pub seed: u64,
}

/// One ancestral draw of every pathway variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSample {
    pub values: BTreeMap<String, f64>,
}

impl NullSample {
    pub fn to_observation(&self) -> PseudoObservation {
        PseudoObservation::new(self.values.clone())
    }
}

fn observation_vector(model: &JointModel, data: &PseudoObservation) -> Result<Vec<f64>> {
    model
        .variables()
        .map(|v| {
            data.get(v)
                .ok_or_else(|| Error::Observation(format!("data lacks variable '{v}'")))
        })
        .collect()
}

fn lambda(compiled: &CompiledModel, f0: f64, f1: f64, x: &[f64]) -> f64 {
    compiled.log_density(f1, x) - compiled.log_density(f0, x)
}

pub fn lr_statistic(
    model: &JointModel,
    f0: ForcingLevel,
    f1: ForcingLevel,
    data: &PseudoObservation,
) -> Result<LRStatistic> {
    let compiled = CompiledModel::new(model)?;
    let x = observation_vector(model, data)?;
    Ok(LRStatistic {
        f0,
        f1,
        lambda: lambda(&compiled, f0.magnitude(), f1.magnitude(), &x),
    })
}

/// Draw every variable from its conditional Gaussian at `f0`, parents first.
pub fn sample_null<R: Rng + ?Sized>(model: &JointModel, f0: ForcingLevel, rng: &mut R) -> Result<NullSample> {
    let compiled = CompiledModel::new(model)?;
    let z: Vec<f64> = (0..compiled.len()).map(|_| rng.sample(StandardNormal)).collect();
    let mut out = vec![0.0; compiled.len()];
    compiled.draw(f0.magnitude(), &z, &mut out);
    Ok(NullSample {
        values: model.variables().map(String::from).zip(out).collect(),
    })
}

fn count_exceedances(
    compiled: &CompiledModel,
    f0: f64,
    f1: f64,
    threshold: f64,
    n_samples: u64,
    seed: u64,
) -> u64 {
    let n_blocks = n_samples.div_ceil(BLOCK_SIZE);
    (0..n_blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = block_rng(seed, block);
            let start = block * BLOCK_SIZE;
            let len = BLOCK_SIZE.min(n_samples - start);
            let d = compiled.len();
            let mut z = vec![0.0; d];
            let mut x = vec![0.0; d];
            let mut count = 0u64;
            for _ in 0..len {
                for zi in z.iter_mut() {
                    *zi = rng.sample(StandardNormal);
                }
                compiled.draw(f0, &z, &mut x);
                if lambda(compiled, f0, f1, &x) >= threshold {
                    count += 1;
                }
            }
            count
        })
        .sum()
}

/// `Pr(Lambda >= lambda_obs)` under `f0`, estimated from `n_samples` null draws.
pub fn mc_pvalue(
    model: &JointModel,
    f0: ForcingLevel,
    f1: ForcingLevel,
    obs: &PseudoObservation,
    n_samples: u64,
    seed: u64,
) -> Result<LRTestResult> {
    if n_samples == 0 {
        return Err(Error::Config("n_samples must be at least 1".into()));
    }
    let compiled = CompiledModel::new(model)?;
    let x = observation_vector(model, obs)?;
    let (a, b) = (f0.magnitude(), f1.magnitude());
    let lambda_obs = lambda(&compiled, a, b, &x);
    let exceed_count = count_exceedances(&compiled, a, b, lambda_obs, n_samples, seed);
    let p_value = if exceed_count == 0 {
        PValue::Below(1.0 / n_samples as f64)
    } else {
        PValue::Estimate(exceed_count as f64 / n_samples as f64)
    };
    Ok(LRTestResult { f0, f1, lambda_obs, n_samples, exceed_count, p_value, seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathwayKind {
    Single,
    Multi,
}

impl fmt::Display for PathwayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PathwayKind::Single => "single",
            PathwayKind::Multi => "multi",
        })
    }
}

/// Where an attribution test was run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestContext {
    pub region: String,
    pub window: String,
    pub pathway_kind: PathwayKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRow {
    pub region: String,
    pub window: String,
    pub pathway_kind: PathwayKind,
    pub f0: f64,
    pub f1: f64,
    pub lambda_obs: f64,
    pub p_value: f64,
    pub floored: bool,
    pub exceed_count: u64,
    pub n_samples: u64,
    pub seed: u64,
}

impl AttributionRow {
    pub fn new(ctx: &TestContext, result: &LRTestResult) -> Self {
        AttributionRow {
            region: ctx.region.clone(),
            window: ctx.window.clone(),
            pathway_kind: ctx.pathway_kind,
            f0: result.f0.magnitude(),
            f1: result.f1.magnitude(),
            lambda_obs: result.lambda_obs,
            p_value: result.p_value.value(),
            floored: result.p_value.is_floored(),
            exceed_count: result.exceed_count,
            n_samples: result.n_samples,
            seed: result.seed,
        }
    }

    pub fn display_p(&self) -> String {
        if self.floored {
            format!("< {:.2e}", self.p_value)
        } else {
            format!("{:.2e}", self.p_value)
        }
    }
}

pub const ATTRIBUTION_HEADER: &str =
    "region,window,pathway_kind,f0,f1,lambda_obs,p_value,floored,exceed_count,n_samples,seed";

pub fn write_attribution_rows(rows: &[AttributionRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{ATTRIBUTION_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{:.12e},{:.6e},{},{},{},{}",
            r.region,
            r.window,
            r.pathway_kind,
            r.f0,
            r.f1,
            r.lambda_obs,
            r.p_value,
            r.floored,
            r.exceed_count,
            r.n_samples,
            r.seed
        )?;
    }
    Ok(())
}

/// One simple test per null forcing against `f1`.
pub fn attribution_table(
    ctx: &TestContext,
    model: &JointModel,
    null_set: &[ForcingLevel],
    f1: ForcingLevel,
    obs: &PseudoObservation,
    n_samples: u64,
    seed: u64,
) -> Result<Vec<AttributionRow>> {
    if null_set.is_empty() {
        return Err(Error::Config("null forcing set is empty".into()));
    }
    if null_set.contains(&f1) {
        return Err(Error::Config(format!("alternative forcing {f1} is in the null set")));
    }
    null_set
        .iter()
        .map(|&f0| mc_pvalue(model, f0, f1, obs, n_samples, seed).map(|r| AttributionRow::new(ctx, &r)))
        .collect()
}
