//! Conditional Gaussian step densities and their chain-rule product.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{ForcingLevel, PseudoObservation};
use crate::error::{Error, Result};
use crate::pathway::PathwayGraph;
use crate::regress::{NormalizationRecord, StepModel, UnitRange};

/// Natural log of a probability density.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogDensity(pub f64);

impl LogDensity {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn density(self) -> f64 {
        self.0.exp()
    }
}

/// Fitted step models in evaluation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointModel {
    pub graph: PathwayGraph,
    pub steps: Vec<StepModel>,
    /// Present when the steps were fit on `[-1, 1]`-normalized data.
    pub unit_record: Option<NormalizationRecord>,
    /// Forcing levels present in the data the model came from.
    pub simulated_forcings: Vec<ForcingLevel>,
}

impl JointModel {
    pub fn new(
        graph: PathwayGraph,
        steps: Vec<StepModel>,
        unit_record: Option<NormalizationRecord>,
    ) -> Result<Self> {
        let report = graph.validate()?;
        if steps.len() != graph.variables().len() {
            return Err(Error::Graph(format!(
                "{} step models for {} variable nodes",
                steps.len(),
                graph.variables().len()
            )));
        }
        let mut position = BTreeMap::new();
        for (i, step) in steps.iter().enumerate() {
            if position.insert(step.target.as_str(), i).is_some() {
                return Err(Error::Graph(format!("two step models for '{}'", step.target)));
            }
            let expected = graph.parent_set(&step.target)?;
            if expected != step.parents {
                return Err(Error::Graph(format!(
                    "step '{}' regresses on [{}] but the pathway gives [{}]",
                    step.target,
                    step.parents.parents.join(", "),
                    expected.parents.join(", ")
                )));
            }
            if step.theta.len() != step.parents.parents.len() {
                return Err(Error::Graph(format!(
                    "step '{}' has {} coefficients for {} parents",
                    step.target,
                    step.theta.len(),
                    step.parents.parents.len()
                )));
            }
        }
        // every parent must be evaluated before its child
        for step in &steps {
            for p in step.parents.variable_parents() {
                if position[p.as_str()] > position[step.target.as_str()] {
                    return Err(Error::Graph(format!(
                        "step '{}' precedes its parent '{p}'",
                        step.target
                    )));
                }
            }
        }
        if let Some(record) = &unit_record {
            for v in &report.order {
                record.variable(v)?;
            }
        }
        Ok(JointModel { graph, steps, unit_record, simulated_forcings: Vec::new() })
    }

    pub fn with_simulated_forcings(mut self, forcings: Vec<ForcingLevel>) -> Self {
        self.simulated_forcings = forcings;
        self
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.steps.iter().map(|s| s.target.as_str())
    }

    pub fn step(&self, target: &str) -> Option<&StepModel> {
        self.steps.iter().find(|s| s.target == target)
    }

    pub fn is_simulated(&self, forcing: ForcingLevel) -> bool {
        self.simulated_forcings.contains(&forcing)
    }

    /// Each step's conditional log-density at the observation, in the
    /// observation's physical units.
    pub fn step_logpdfs(&self, f: ForcingLevel, obs: &PseudoObservation) -> Result<Vec<(String, LogDensity)>> {
        let lookup = |v: &str| {
            obs.get(v)
                .ok_or_else(|| Error::Observation(format!("observation lacks variable '{v}'")))
        };
        let mut out = Vec::with_capacity(self.steps.len());
        match &self.unit_record {
            None => {
                for step in &self.steps {
                    let k = lookup(&step.target)?;
                    let parents = parent_values(step, &lookup)?;
                    out.push((step.target.clone(), step_logpdf_at(step, f.magnitude(), &parents, k)?));
                }
            }
            Some(record) => {
                let fs = record.forcing.apply(f.magnitude());
                for step in &self.steps {
                    let scale = record.variable(&step.target)?;
                    let k = scale.apply(lookup(&step.target)?);
                    let mut parents = parent_values(step, &lookup)?;
                    for (name, x) in parents.iter_mut() {
                        *x = record.variable(name)?.apply(*x);
                    }
                    let LogDensity(ld) = step_logpdf_at(step, fs, &parents, k)?;
                    out.push((step.target.clone(), LogDensity(ld + scale.slope().ln())));
                }
            }
        }
        Ok(out)
    }
}

fn parent_values(
    step: &StepModel,
    lookup: &impl Fn(&str) -> Result<f64>,
) -> Result<BTreeMap<String, f64>> {
    step.parents
        .variable_parents()
        .iter()
        .map(|p| Ok((p.clone(), lookup(p)?)))
        .collect()
}

fn step_logpdf_at(step: &StepModel, f: f64, parent_values: &BTreeMap<String, f64>, k_obs: f64) -> Result<LogDensity> {
    if !(step.sigma2 > 0.0) {
        return Err(Error::Degenerate(format!(
            "step '{}' has residual variance {}; density undefined",
            step.target, step.sigma2
        )));
    }
    let mu = step.mean(f, |p| parent_values.get(p).copied())?;
    Ok(LogDensity(gaussian_logpdf(k_obs, mu, step.sigma2)))
}

pub(crate) fn gaussian_logpdf(x: f64, mean: f64, variance: f64) -> f64 {
    let r = x - mean;
    -0.5 * (2.0 * PI * variance).ln() - r * r / (2.0 * variance)
}

/// `log N(k_obs; intercept + theta_F f + sum theta_j k_j, sigma2)` in the step's own units.
pub fn step_logpdf(
    step: &StepModel,
    f: ForcingLevel,
    parent_values: &BTreeMap<String, f64>,
    k_obs: f64,
) -> Result<LogDensity> {
    step_logpdf_at(step, f.magnitude(), parent_values, k_obs)
}

/// `log P(observation | F = f)` as the sum of step log-densities.
pub fn joint_loglik(model: &JointModel, f: ForcingLevel, obs: &PseudoObservation) -> Result<LogDensity> {
    let steps = model.step_logpdfs(f, obs)?;
    Ok(LogDensity(steps.iter().map(|(_, ld)| ld.0).sum()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub forcing: ForcingLevel,
    /// Step target name, or `"joint"`.
    pub component: String,
    pub log_density: f64,
    /// The forcing level was not among the simulated levels.
    pub extrapolated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodCurve {
    pub rows: Vec<CurveRow>,
}

impl LikelihoodCurve {
    pub fn joint(&self) -> impl Iterator<Item = &CurveRow> {
        self.rows.iter().filter(|r| r.component == "joint")
    }

    /// Forcing with the largest joint log-likelihood.
    pub fn argmax(&self) -> Option<ForcingLevel> {
        self.joint()
            .max_by(|a, b| a.log_density.total_cmp(&b.log_density))
            .map(|r| r.forcing)
    }

    pub fn write_delimited(&self, mut out: impl Write, label: &str) -> std::io::Result<()> {
        for r in &self.rows {
            writeln!(
                out,
                "{label},{},{},{:.12e},{}",
                r.forcing.magnitude(),
                r.component,
                r.log_density,
                r.extrapolated
            )?;
        }
        Ok(())
    }
}

/// Per-step and joint log-likelihood at each forcing.
pub fn likelihood_curve(
    model: &JointModel,
    obs: &PseudoObservation,
    forcings: &[ForcingLevel],
) -> Result<LikelihoodCurve> {
    if forcings.is_empty() {
        return Err(Error::Config("likelihood curve needs at least one forcing level".into()));
    }
    let mut rows = Vec::new();
    for &f in forcings {
        let extrapolated = !model.is_simulated(f);
        let steps = model.step_logpdfs(f, obs)?;
        let joint: f64 = steps.iter().map(|(_, ld)| ld.0).sum();
        for (name, ld) in steps {
            rows.push(CurveRow { forcing: f, component: name, log_density: ld.0, extrapolated });
        }
        rows.push(CurveRow {
            forcing: f,
            component: "joint".into(),
            log_density: joint,
            extrapolated,
        });
    }
    Ok(LikelihoodCurve { rows })
}

/// Index-based form of a joint model for tight sampling loops. Values are
/// held in evaluation order and in physical units.
#[derive(Debug, Clone)]
pub(crate) struct CompiledModel {
    steps: Vec<CompiledStep>,
    forcing_scale: Option<UnitRange>,
    log_jacobian: f64,
}

#[derive(Debug, Clone)]
struct CompiledStep {
    intercept: f64,
    theta_forcing: f64,
    parents: Vec<(usize, f64)>,
    sigma: f64,
    inv_two_var: f64,
    log_norm: f64,
    scale: Option<UnitRange>,
}

impl CompiledModel {
    pub(crate) fn new(model: &JointModel) -> Result<Self> {
        let index: BTreeMap<&str, usize> = model
            .steps
            .iter()
            .enumerate()
            .map(|(i, s)| (s.target.as_str(), i))
            .collect();
        let mut steps = Vec::with_capacity(model.steps.len());
        let mut log_jacobian = 0.0;
        for step in &model.steps {
            if !(step.sigma2 > 0.0) {
                return Err(Error::Degenerate(format!(
                    "step '{}' has residual variance {}",
                    step.target, step.sigma2
                )));
            }
            let offset = usize::from(step.parents.includes_forcing);
            let parents = step
                .parents
                .variable_parents()
                .iter()
                .zip(&step.theta[offset..])
                .map(|(p, &t)| (index[p.as_str()], t))
                .collect();
            let scale = match &model.unit_record {
                Some(r) => {
                    let s = r.variable(&step.target)?;
                    log_jacobian += s.slope().ln();
                    Some(s)
                }
                None => None,
            };
            steps.push(CompiledStep {
                intercept: step.intercept,
                theta_forcing: if step.parents.includes_forcing { step.theta[0] } else { 0.0 },
                parents,
                sigma: step.sigma2.sqrt(),
                inv_two_var: 0.5 / step.sigma2,
                log_norm: -0.5 * (2.0 * PI * step.sigma2).ln(),
                scale,
            });
        }
        Ok(CompiledModel {
            steps,
            forcing_scale: model.unit_record.as_ref().map(|r| r.forcing),
            log_jacobian,
        })
    }

    pub(crate) fn len(&self) -> usize {
        self.steps.len()
    }

    fn forcing_value(&self, f: f64) -> f64 {
        self.forcing_scale.map_or(f, |s| s.apply(f))
    }

    fn model_units(&self, i: usize, x: f64) -> f64 {
        self.steps[i].scale.map_or(x, |s| s.apply(x))
    }

    fn mean(&self, i: usize, f: f64, values: &[f64]) -> f64 {
        let s = &self.steps[i];
        let mut mu = s.intercept + s.theta_forcing * f;
        for &(p, t) in &s.parents {
            mu += t * self.model_units(p, values[p]);
        }
        mu
    }

    /// Joint log-density of `values` (evaluation order, physical units).
    pub(crate) fn log_density(&self, f: f64, values: &[f64]) -> f64 {
        let f = self.forcing_value(f);
        let mut total = self.log_jacobian;
        for (i, s) in self.steps.iter().enumerate() {
            let r = self.model_units(i, values[i]) - self.mean(i, f, values);
            total += s.log_norm - r * r * s.inv_two_var;
        }
        total
    }

    /// Ancestral draw given standard normal deviates `z`, written into `out`.
    pub(crate) fn draw(&self, f: f64, z: &[f64], out: &mut [f64]) {
        let f = self.forcing_value(f);
        for i in 0..self.steps.len() {
            let s = &self.steps[i];
            let x = self.mean(i, f, out) + s.sigma * z[i];
            out[i] = s.scale.map_or(x, |sc| sc.invert(x));
        }
    }
}
