//! Synthetic linear-Gaussian pathway data with known ground truth.
//!
//! Every `(forcing level, member)` pair owns a counter-keyed random stream,
//! so any subset of the table can be regenerated independently and parallel
//! generation reproduces the serial output.

pub mod oracle;
pub mod reference;

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    EnsembleSeries, ForcingLevel, ImpactDataset, Provenance, Region, ScalarMetricTable, TimeWindow,
};
use crate::error::{Error, Result};
use crate::lrtest::block_rng;
use crate::pathway::PathwayGraph;

/// True conditional-mean coefficients and noise variance of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueStep {
    pub target: String,
    #[serde(default)]
    pub intercept: f64,
    #[serde(default)]
    pub forcing_coef: f64,
    #[serde(default)]
    pub parent_coefs: BTreeMap<String, f64>,
    pub sigma2: f64,
}

/// Monthly texture layered on each member's metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSpec {
    pub months: usize,
    #[serde(default)]
    pub seasonal_amplitude: f64,
    #[serde(default)]
    pub ar_coefficient: f64,
    #[serde(default)]
    pub ar_innovation_sd: f64,
    /// When set, the metric is spread over time as a pulse `(t/p) exp(1 - t/p)`
    /// peaking at month `p`, rescaled to unit mean over the series.
    #[serde(default)]
    pub response_peak_month: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub graph: PathwayGraph,
    pub steps: Vec<TrueStep>,
    pub forcing_levels: Vec<ForcingLevel>,
    pub members_per_level: u32,
    pub seed: u64,
    #[serde(default)]
    pub series: Option<SeriesSpec>,
}

const SERIES_STREAM_BIT: u64 = 1 << 63;

fn stream_id(level: usize, member: u32) -> u64 {
    ((level as u64) << 32) | u64::from(member)
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<Vec<&TrueStep>> {
        let report = self.graph.validate()?;
        if self.members_per_level == 0 {
            return Err(Error::Config("members_per_level must be at least 1".into()));
        }
        if self.forcing_levels.is_empty() {
            return Err(Error::Config("generator needs at least one forcing level".into()));
        }
        let mut levels = self.forcing_levels.clone();
        levels.sort();
        levels.dedup();
        if levels.len() != self.forcing_levels.len() {
            return Err(Error::Config("duplicate forcing levels in generator".into()));
        }
        let mut ordered = Vec::with_capacity(report.order.len());
        for v in &report.order {
            let matches: Vec<&TrueStep> = self.steps.iter().filter(|s| &s.target == v).collect();
            let step = match matches.as_slice() {
                [one] => *one,
                [] => return Err(Error::Config(format!("generator has no step for '{v}'"))),
                _ => return Err(Error::Config(format!("generator has several steps for '{v}'"))),
            };
            if !(step.sigma2 > 0.0) || !step.sigma2.is_finite() {
                return Err(Error::Config(format!("'{v}': true sigma2 must be positive")));
            }
            let parents = self.graph.parent_set(v)?;
            if !parents.includes_forcing && step.forcing_coef != 0.0 {
                return Err(Error::Config(format!(
                    "'{v}' has a forcing coefficient but the forcing is not its parent"
                )));
            }
            for p in step.parent_coefs.keys() {
                if !parents.variable_parents().contains(p) {
                    return Err(Error::Config(format!("'{p}' is not a parent of '{v}'")));
                }
            }
            ordered.push(step);
        }
        if self.steps.len() != ordered.len() {
            return Err(Error::Config("generator has steps for unknown variables".into()));
        }
        if let Some(s) = &self.series {
            if s.months == 0 {
                return Err(Error::Config("series months must be positive".into()));
            }
            if !(s.ar_coefficient.abs() < 1.0) || s.ar_innovation_sd < 0.0 {
                return Err(Error::Config("AR(1) needs |coefficient| < 1 and sd >= 0".into()));
            }
            if matches!(s.response_peak_month, Some(p) if !(p > 0.0)) {
                return Err(Error::Config("response_peak_month must be positive".into()));
            }
        }
        Ok(ordered)
    }

    /// Push every variable through its step in evaluation order, adding
    /// `noise()` standard deviations of residual to each.
    fn propagate(&self, steps: &[&TrueStep], level: usize, mut noise: impl FnMut() -> f64) -> Vec<f64> {
        let f = self.forcing_levels[level].magnitude();
        let mut values: Vec<f64> = Vec::with_capacity(steps.len());
        for (i, step) in steps.iter().enumerate() {
            let mut mu = step.intercept + step.forcing_coef * f;
            for (p, c) in &step.parent_coefs {
                let j = steps[..i].iter().position(|s| &s.target == p).expect("parent precedes child");
                mu += c * values[j];
            }
            values.push(mu + step.sigma2.sqrt() * noise());
        }
        values
    }

    /// Draw one member's metrics in evaluation order.
    fn draw_member(&self, steps: &[&TrueStep], level: usize, member: u32) -> Vec<f64> {
        let mut rng = block_rng(self.seed, stream_id(level, member));
        self.propagate(steps, level, || rng.sample(StandardNormal))
    }

    /// Expected metric of every variable at a forcing level.
    fn forced_means(&self, steps: &[&TrueStep], level: usize) -> Vec<f64> {
        self.propagate(steps, level, || 0.0)
    }

    fn cells(&self) -> Vec<(usize, u32)> {
        (0..self.forcing_levels.len())
            .flat_map(|l| (1..=self.members_per_level).map(move |m| (l, m)))
            .collect()
    }
}

/// Ancestral sample of every variable for every `(level, member)`.
pub fn generate_metrics(spec: &GeneratorSpec) -> Result<ScalarMetricTable> {
    let steps = spec.validate()?;
    let draws: Vec<Vec<f64>> = spec
        .cells()
        .par_iter()
        .map(|&(l, m)| spec.draw_member(&steps, l, m))
        .collect();

    let mut entries: BTreeMap<String, BTreeMap<ForcingLevel, Vec<f64>>> = BTreeMap::new();
    for ((l, _), values) in spec.cells().into_iter().zip(draws) {
        for (step, v) in steps.iter().zip(values) {
            entries
                .entry(step.target.clone())
                .or_default()
                .entry(spec.forcing_levels[l])
                .or_default()
                .push(v);
        }
    }
    let window = TimeWindow::new("metric", 0, spec.series.as_ref().map_or(1, |s| s.months as i64))?;
    ScalarMetricTable::new(entries, window, Region::global())
}

/// Unit-mean time profile of the forced response.
pub fn response_profile(series: &SeriesSpec) -> Vec<f64> {
    match series.response_peak_month {
        None => vec![1.0; series.months],
        Some(peak) => {
            let raw: Vec<f64> = (0..series.months)
                .map(|t| {
                    let x = (t as f64 + 0.5) / peak;
                    x * (1.0 - x).exp()
                })
                .collect();
            let mean = raw.iter().sum::<f64>() / raw.len() as f64;
            raw.into_iter().map(|r| r / mean).collect()
        }
    }
}

/// Seasonal cycle value at month `t`.
pub fn seasonal(series: &SeriesSpec, t: usize) -> f64 {
    series.seasonal_amplitude * (2.0 * std::f64::consts::PI * t as f64 / 12.0).sin()
}

/// Monthly series per member: `mu * profile_t + (k - mu) + seasonal_t + ar_t`,
/// where `mu` is the expected metric at the member's forcing level and `k`
/// is identical to what [`generate_metrics`] draws for that member. Only
/// the forced part follows the response profile.
pub fn generate_series(spec: &GeneratorSpec) -> Result<ImpactDataset> {
    let steps = spec.validate()?;
    let series_spec = spec
        .series
        .as_ref()
        .ok_or_else(|| Error::Config("generator has no series expansion configured".into()))?;
    let profile = response_profile(series_spec);
    let phi = series_spec.ar_coefficient;
    let sd = series_spec.ar_innovation_sd;
    let times: Vec<i64> = (0..series_spec.months as i64).collect();

    let per_cell: Vec<Vec<EnsembleSeries>> = spec
        .cells()
        .par_iter()
        .map(|&(l, m)| {
            let metrics = spec.draw_member(&steps, l, m);
            let forced = spec.forced_means(&steps, l);
            let mut rng = block_rng(spec.seed, SERIES_STREAM_BIT | stream_id(l, m));
            steps
                .iter()
                .zip(metrics.into_iter().zip(forced))
                .map(|(step, (k, mu))| {
                    let mut e = if sd > 0.0 {
                        let z: f64 = rng.sample(StandardNormal);
                        z * sd / (1.0 - phi * phi).sqrt()
                    } else {
                        0.0
                    };
                    let mut values = Vec::with_capacity(series_spec.months);
                    for (t, p) in profile.iter().enumerate() {
                        if t > 0 {
                            let z: f64 = rng.sample(StandardNormal);
                            e = phi * e + sd * z;
                        }
                        values.push(k + mu * (p - 1.0) + seasonal(series_spec, t) + e);
                    }
                    EnsembleSeries::new(step.target.clone(), spec.forcing_levels[l], m, times.clone(), values)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    ImpactDataset::new(
        per_cell.into_iter().flatten().collect(),
        ForcingLevel::COUNTERFACTUAL,
        Provenance::Raw,
    )
}
