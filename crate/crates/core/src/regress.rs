//! Per-step linear forcing-response models fit by ordinary least squares.
//!
//! Each variable node is regressed on its parent set: the forcing magnitude
//! (repeated once per ensemble member) and the scalar metrics of its upstream
//! variables. Forcing levels listed as excluded never enter a fit, which keeps
//! the pseudo-observational level out of the models it will be tested against.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{ForcingLevel, ScalarMetricTable};
use crate::error::{Error, Result};
use crate::likelihood::JointModel;
use crate::ols::{least_squares, OlsFit};
use crate::pathway::{ParentSet, PathwayGraph};

pub const INTERCEPT: &str = "(intercept)";

/// Affine map `x -> 2 (x - min) / (max - min) - 1` onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitRange {
    pub min: f64,
    pub max: f64,
}

impl UnitRange {
    fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut it = values.into_iter();
        let first = it.next()?;
        let (min, max) = it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Some(UnitRange { min, max })
    }

    pub fn apply(&self, x: f64) -> f64 {
        2.0 * (x - self.min) / (self.max - self.min) - 1.0
    }

    pub fn invert(&self, y: f64) -> f64 {
        (y + 1.0) * (self.max - self.min) / 2.0 + self.min
    }

    /// `d apply / dx`.
    pub fn slope(&self) -> f64 {
        2.0 / (self.max - self.min)
    }
}

/// Per-variable ranges used to map a metric table onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub forcing: UnitRange,
    pub variables: BTreeMap<String, UnitRange>,
}

impl NormalizationRecord {
    pub fn variable(&self, name: &str) -> Result<UnitRange> {
        self.variables
            .get(name)
            .copied()
            .ok_or_else(|| Error::Lookup(format!("no normalization range for '{name}'")))
    }
}

/// Map every variable and the forcing axis onto `[-1, 1]` using the min and
/// max over the table as given.
pub fn normalize(metrics: &ScalarMetricTable) -> Result<(ScalarMetricTable, NormalizationRecord)> {
    let mut variables = BTreeMap::new();
    for (name, by_forcing) in metrics.entries() {
        let range = UnitRange::of(by_forcing.values().flatten().copied())
            .ok_or_else(|| Error::Normalization(format!("'{name}' has no values")))?;
        if !(range.max > range.min) {
            return Err(Error::Normalization(format!(
                "'{name}' is constant ({}), cannot normalize",
                range.min
            )));
        }
        variables.insert(name.clone(), range);
    }
    let forcing = UnitRange::of(metrics.forcings().into_iter().map(ForcingLevel::magnitude))
        .filter(|r| r.max > r.min)
        .ok_or_else(|| Error::Normalization("fewer than two forcing levels".into()))?;
    let record = NormalizationRecord { forcing, variables };
    let table = metrics.map_values(|v, x| record.variables[v].apply(x))?;
    Ok((table, record))
}

/// Regressors and response for one step.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub columns: Vec<String>,
    pub matrix: DMatrix<f64>,
    pub response: Vec<f64>,
    /// Forcing magnitude behind each row.
    pub forcing: Vec<ForcingLevel>,
}

/// Assemble `K_v` for `target`. Rows run over included forcing levels in
/// ascending order, then members.
pub fn build_design(
    metrics: &ScalarMetricTable,
    graph: &PathwayGraph,
    target: &str,
    excluded: &[ForcingLevel],
    with_intercept: bool,
    forcing_scale: Option<&UnitRange>,
) -> Result<DesignMatrix> {
    let parents = graph.parent_set(target)?;
    if parents.parents.is_empty() {
        return Err(Error::Graph(format!("'{target}' has no parents to regress on")));
    }
    for p in parents.variable_parents() {
        if !metrics.has_variable(p) {
            return Err(Error::Lookup(format!("parent '{p}' of '{target}' not in metric table")));
        }
    }

    let levels: Vec<ForcingLevel> = metrics
        .forcings()
        .into_iter()
        .filter(|f| !excluded.contains(f))
        .collect();
    let mut columns = Vec::new();
    if with_intercept {
        columns.push(INTERCEPT.to_string());
    }
    columns.extend(parents.parents.iter().cloned());

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut response = Vec::new();
    let mut forcing = Vec::new();
    for &level in &levels {
        let y = metrics.metrics(target, level)?;
        let parent_metrics = parents
            .variable_parents()
            .iter()
            .map(|p| metrics.metrics(p, level))
            .collect::<Result<Vec<_>>>()?;
        let f = match forcing_scale {
            Some(s) => s.apply(level.magnitude()),
            None => level.magnitude(),
        };
        for e in 0..y.len() {
            let mut row = Vec::with_capacity(columns.len());
            if with_intercept {
                row.push(1.0);
            }
            if parents.includes_forcing {
                row.push(f);
            }
            row.extend(parent_metrics.iter().map(|m| m[e]));
            rows.push(row);
            response.push(y[e]);
            forcing.push(level);
        }
    }

    let n_theta = parents.parents.len();
    let p = columns.len();
    if rows.len() < n_theta + 2 || rows.len() <= p {
        return Err(Error::Data(format!(
            "'{target}': {} rows after exclusions, need at least {} for {p} coefficients",
            rows.len(),
            (n_theta + 2).max(p + 1)
        )));
    }
    let matrix = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
    Ok(DesignMatrix { columns, matrix, response, forcing })
}

/// Fitted conditional-mean model for one variable node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepModel {
    pub target: String,
    pub parents: ParentSet,
    /// One coefficient per entry of `parents.parents`.
    pub theta: Vec<f64>,
    pub intercept: f64,
    pub with_intercept: bool,
    /// Residual variance, `RSS / (n - p)`.
    pub sigma2: f64,
    pub n_obs: usize,
    pub r2: f64,
    pub theta_std_errors: Vec<f64>,
    pub intercept_std_error: Option<f64>,
    pub excluded_forcings: Vec<ForcingLevel>,
}

impl StepModel {
    /// Conditional mean given the forcing regressor and a lookup for parent metrics.
    pub fn mean(&self, forcing: f64, parent_value: impl Fn(&str) -> Option<f64>) -> Result<f64> {
        let mut mu = self.intercept;
        for (name, theta) in self.parents.parents.iter().zip(&self.theta) {
            let x = if self.parents.includes_forcing && name == &self.parents.parents[0] {
                forcing
            } else {
                parent_value(name).ok_or_else(|| {
                    Error::Observation(format!("no value for parent '{name}' of '{}'", self.target))
                })?
            };
            mu += theta * x;
        }
        Ok(mu)
    }

    pub fn coefficient(&self, parent: &str) -> Option<f64> {
        self.parents
            .parents
            .iter()
            .position(|p| p == parent)
            .map(|i| self.theta[i])
    }

    pub fn std_error(&self, parent: &str) -> Option<f64> {
        self.parents
            .parents
            .iter()
            .position(|p| p == parent)
            .map(|i| self.theta_std_errors[i])
    }

    fn from_fit(
        target: &str,
        parents: ParentSet,
        with_intercept: bool,
        fit: &OlsFit,
        excluded: &[ForcingLevel],
    ) -> Self {
        let se = fit.std_errors();
        let offset = usize::from(with_intercept);
        StepModel {
            target: target.to_string(),
            parents,
            theta: fit.coefficients[offset..].to_vec(),
            intercept: if with_intercept { fit.coefficients[0] } else { 0.0 },
            with_intercept,
            sigma2: fit.sigma2(),
            n_obs: fit.n,
            r2: fit.r2(),
            theta_std_errors: se[offset..].to_vec(),
            intercept_std_error: with_intercept.then(|| se[0]),
            excluded_forcings: excluded.to_vec(),
        }
    }
}

fn fit_step_scaled(
    metrics: &ScalarMetricTable,
    graph: &PathwayGraph,
    target: &str,
    excluded: &[ForcingLevel],
    with_intercept: bool,
    forcing_scale: Option<&UnitRange>,
) -> Result<StepModel> {
    let design = build_design(metrics, graph, target, excluded, with_intercept, forcing_scale)?;
    let fit = least_squares(&design.matrix, &design.response, &design.columns)?;
    let mut excluded = excluded.to_vec();
    excluded.sort();
    excluded.dedup();
    Ok(StepModel::from_fit(
        target,
        graph.parent_set(target)?,
        with_intercept,
        &fit,
        &excluded,
    ))
}

/// Regress `target` on its parents over every non-excluded forcing level.
pub fn fit_step(
    metrics: &ScalarMetricTable,
    graph: &PathwayGraph,
    target: &str,
    excluded: &[ForcingLevel],
    with_intercept: bool,
) -> Result<StepModel> {
    fit_step_scaled(metrics, graph, target, excluded, with_intercept, None)
}

/// One step model per variable node, in evaluation order, fit in the table's units.
pub fn fit_joint(
    metrics: &ScalarMetricTable,
    graph: &PathwayGraph,
    excluded: &[ForcingLevel],
    with_intercept: bool,
) -> Result<JointModel> {
    let report = graph.validate()?;
    let steps = report
        .order
        .iter()
        .map(|v| fit_step(metrics, graph, v, excluded, with_intercept))
        .collect::<Result<Vec<_>>>()?;
    JointModel::new(graph.clone(), steps, None).map(|m| m.with_simulated_forcings(metrics.forcings()))
}

/// Same as [`fit_joint`] after mapping every variable and the forcing onto
/// `[-1, 1]` with ranges taken over the included forcing levels. The returned
/// model carries the record, so it still evaluates physical-unit observations.
pub fn fit_joint_normalized(
    metrics: &ScalarMetricTable,
    graph: &PathwayGraph,
    excluded: &[ForcingLevel],
    with_intercept: bool,
) -> Result<JointModel> {
    let report = graph.validate()?;
    let included = metrics.without_forcings(excluded)?;
    let (_, record) = normalize(&included)?;
    let scaled = metrics.map_values(|v, x| record.variables[v].apply(x))?;
    let steps = report
        .order
        .iter()
        .map(|v| fit_step_scaled(&scaled, graph, v, excluded, with_intercept, Some(&record.forcing)))
        .collect::<Result<Vec<_>>>()?;
    JointModel::new(graph.clone(), steps, Some(record))
        .map(|m| m.with_simulated_forcings(metrics.forcings()))
}

/// Human-readable fit report. `units` maps node names to unit strings.
pub fn format_report(model: &JointModel, units: &BTreeMap<String, String>) -> String {
    let unit = |name: &str| -> String {
        if model.unit_record.is_some() {
            "1".to_string()
        } else {
            units.get(name).cloned().unwrap_or_else(|| "1".into())
        }
    };
    let mut out = String::new();
    for step in &model.steps {
        let excluded: Vec<String> = step
            .excluded_forcings
            .iter()
            .map(|f| f.magnitude().to_string())
            .collect();
        let _ = writeln!(
            out,
            "{} ~ {}    n = {}, R2 = {:.4}, sigma2 = {:.6e} [{}^2], excluded forcings = [{}]",
            step.target,
            step.parents.parents.join(" + "),
            step.n_obs,
            step.r2,
            step.sigma2,
            unit(&step.target),
            excluded.join(", ")
        );
        if step.with_intercept {
            let _ = writeln!(
                out,
                "    {:<14} {:>14.6e} +/- {:.3e} [{}]",
                INTERCEPT,
                step.intercept,
                step.intercept_std_error.unwrap_or(f64::NAN),
                unit(&step.target)
            );
        }
        for ((name, theta), se) in step.parents.parents.iter().zip(&step.theta).zip(&step.theta_std_errors) {
            let _ = writeln!(
                out,
                "    {:<14} {:>14.6e} +/- {:.3e} [{}/{}]",
                name,
                theta,
                se,
                unit(&step.target),
                unit(name)
            );
        }
    }
    out
}
