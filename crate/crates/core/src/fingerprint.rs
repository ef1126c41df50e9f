//! Perfect-model, leave-one-out fingerprinting baseline.
//!
//! One member of the observation forcing's ensemble stands in for the
//! observations. The remaining members' ensemble means, stacked over
//! variables and normalized per variable to `[-1, 1]`, form the columns of
//! `Q`, and `obs = Q beta + eps` is solved by OLS with iid Gaussian errors.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::{EnsembleSeries, ForcingLevel, ImpactDataset, TimeWindow};
use crate::error::{Error, Result};
use crate::ols::least_squares;

/// Which ensembles lose the held-out member index when forming `Q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoldoutScope {
    /// Drop the index from every forcing's ensemble.
    #[default]
    AllForcings,
    /// Drop it only from the observation forcing's ensemble.
    ObservationOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FingerprintOptions {
    pub holdout_scope: HoldoutScope,
    pub with_intercept: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintDesign {
    /// `(N_t N_v) x N_f`, one column per forcing.
    pub q: DMatrix<f64>,
    pub obs: Vec<f64>,
    pub forcings: Vec<ForcingLevel>,
    pub variables: Vec<String>,
    pub holdout_member: u32,
    pub with_intercept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintFit {
    pub holdout_member: u32,
    pub forcings: Vec<ForcingLevel>,
    pub beta_hat: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub detected: Vec<bool>,
    pub attributed: Vec<bool>,
    pub confidence: f64,
    pub dof: usize,
}

fn windowed<'a>(s: &'a EnsembleSeries, window: &TimeWindow) -> impl Iterator<Item = f64> + 'a {
    let (start, end) = (window.start, window.end);
    s.times()
        .iter()
        .zip(s.values())
        .filter(move |(t, _)| start <= **t && **t < end)
        .map(|(_, v)| *v)
}

/// Stack the held-out member as `obs` and the remaining ensemble means as `Q`.
pub fn build_design(
    dataset: &ImpactDataset,
    variables: &[String],
    forcings: &[ForcingLevel],
    obs_forcing: ForcingLevel,
    holdout: u32,
    window: &TimeWindow,
    options: FingerprintOptions,
) -> Result<FingerprintDesign> {
    if variables.is_empty() || forcings.is_empty() {
        return Err(Error::Config("fingerprint design needs variables and forcings".into()));
    }
    if !forcings.contains(&obs_forcing) {
        return Err(Error::Config(format!(
            "observation forcing {obs_forcing} is not among the fingerprint forcings"
        )));
    }

    let mut q_blocks: Vec<Vec<f64>> = vec![Vec::new(); forcings.len()];
    let mut obs = Vec::new();
    for variable in variables {
        if dataset.get(variable, obs_forcing, holdout).is_none() {
            return Err(Error::Data(format!(
                "member {holdout} not in the {obs_forcing} ensemble of '{variable}'"
            )));
        }
        // per-variable range over every member of the considered forcings
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut block_len = None;
        for &f in forcings {
            let members: Vec<&EnsembleSeries> = dataset.series_for(variable, f).collect();
            if members.is_empty() {
                return Err(Error::Data(format!("no '{variable}' members at {f}")));
            }
            for s in members {
                let n = windowed(s, window).inspect(|v| {
                    lo = lo.min(*v);
                    hi = hi.max(*v);
                })
                .count();
                block_len.get_or_insert(n);
            }
        }
        let n_t = block_len.unwrap_or(0);
        if n_t == 0 {
            return Err(Error::Window(format!(
                "window '{}' holds no '{variable}' samples",
                window.name
            )));
        }
        if !(hi > lo) {
            return Err(Error::Normalization(format!("'{variable}' is constant over the window")));
        }
        let scale = |v: f64| 2.0 * (v - lo) / (hi - lo) - 1.0;

        for (col, &f) in forcings.iter().enumerate() {
            let drop = options.holdout_scope == HoldoutScope::AllForcings || f == obs_forcing;
            let kept: Vec<&EnsembleSeries> = dataset
                .series_for(variable, f)
                .filter(|s| !(drop && s.member == holdout))
                .collect();
            if kept.len() < 2 {
                return Err(Error::Data(format!(
                    "'{variable}' at {f} keeps {} member(s) after holding out member {holdout}; need 2",
                    kept.len()
                )));
            }
            let mut mean = vec![0.0; n_t];
            for s in &kept {
                for (m, v) in mean.iter_mut().zip(windowed(s, window)) {
                    *m += scale(v);
                }
            }
            q_blocks[col].extend(mean.into_iter().map(|m| m / kept.len() as f64));
        }
        let held = dataset.get(variable, obs_forcing, holdout).expect("checked above");
        obs.extend(windowed(held, window).map(scale));
    }

    let rows = obs.len();
    let q = DMatrix::from_fn(rows, forcings.len(), |i, j| q_blocks[j][i]);
    Ok(FingerprintDesign {
        q,
        obs,
        forcings: forcings.to_vec(),
        variables: variables.to_vec(),
        holdout_member: holdout,
        with_intercept: options.with_intercept,
    })
}

/// Slack for interval membership tests, so exact fits with a zero-width
/// interval still contain their own estimate.
fn slack(beta: f64) -> f64 {
    1e-12 * beta.abs().max(1.0)
}

/// OLS coefficients with two-sided Student-t intervals at `confidence`.
pub fn fit_fingerprint(design: &FingerprintDesign, confidence: f64) -> Result<FingerprintFit> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Config(format!("confidence {confidence} outside (0, 1)")));
    }
    let n_f = design.forcings.len();
    let offset = usize::from(design.with_intercept);
    let x = DMatrix::from_fn(design.q.nrows(), n_f + offset, |i, j| {
        if j < offset {
            1.0
        } else {
            design.q[(i, j - offset)]
        }
    });
    let mut names: Vec<String> = Vec::new();
    if design.with_intercept {
        names.push("(intercept)".into());
    }
    names.extend(design.forcings.iter().map(|f| f.to_string()));
    let fit = least_squares(&x, &design.obs, &names)?;
    let dof = fit.dof();
    if dof == 0 {
        return Err(Error::Data("no residual degrees of freedom".into()));
    }
    let t = StudentsT::new(0.0, 1.0, dof as f64)
        .map_err(|e| Error::Data(format!("t distribution: {e}")))?
        .inverse_cdf(0.5 + confidence / 2.0);
    let se = fit.std_errors();

    let beta_hat = fit.coefficients[offset..].to_vec();
    let std_errors = se[offset..].to_vec();
    let ci_low: Vec<f64> = beta_hat.iter().zip(&std_errors).map(|(b, s)| b - t * s).collect();
    let ci_high: Vec<f64> = beta_hat.iter().zip(&std_errors).map(|(b, s)| b + t * s).collect();
    let detected: Vec<bool> = (0..n_f)
        .map(|j| {
            let tol = slack(beta_hat[j]);
            ci_low[j] > tol || ci_high[j] < -tol
        })
        .collect();
    let attributed = (0..n_f)
        .map(|j| {
            let tol = slack(beta_hat[j]);
            detected[j] && ci_low[j] - tol <= 1.0 && 1.0 <= ci_high[j] + tol
        })
        .collect();

    Ok(FingerprintFit {
        holdout_member: design.holdout_member,
        forcings: design.forcings.clone(),
        beta_hat,
        std_errors,
        ci_low,
        ci_high,
        detected,
        attributed,
        confidence,
        dof,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooAssessment {
    pub fits: Vec<FingerprintFit>,
    pub detection_rate: BTreeMap<ForcingLevel, f64>,
    pub attribution_rate: BTreeMap<ForcingLevel, f64>,
}

impl LooAssessment {
    pub fn attribution_count(&self, forcing: ForcingLevel) -> usize {
        let Some(j) = self.fits.first().and_then(|f| f.forcings.iter().position(|x| *x == forcing)) else {
            return 0;
        };
        self.fits.iter().filter(|fit| fit.attributed[j]).count()
    }
}

/// Hold out each member of the observation ensemble in turn.
pub fn loo_assessment(
    dataset: &ImpactDataset,
    variables: &[String],
    forcings: &[ForcingLevel],
    obs_forcing: ForcingLevel,
    window: &TimeWindow,
    confidence: f64,
    options: FingerprintOptions,
) -> Result<LooAssessment> {
    let first = variables
        .first()
        .ok_or_else(|| Error::Config("no fingerprint variables".into()))?;
    let members = dataset.members(first, obs_forcing);
    if members.len() < 2 {
        return Err(Error::Data(format!(
            "leave-one-out needs at least 2 members at {obs_forcing}, found {}",
            members.len()
        )));
    }
    let fits = members
        .par_iter()
        .map(|&m| {
            let design = build_design(dataset, variables, forcings, obs_forcing, m, window, options)?;
            fit_fingerprint(&design, confidence)
        })
        .collect::<Result<Vec<_>>>()?;

    let n = fits.len() as f64;
    let mut detection_rate = BTreeMap::new();
    let mut attribution_rate = BTreeMap::new();
    for (j, &f) in forcings.iter().enumerate() {
        detection_rate.insert(f, fits.iter().filter(|x| x.detected[j]).count() as f64 / n);
        attribution_rate.insert(f, fits.iter().filter(|x| x.attributed[j]).count() as f64 / n);
    }
    Ok(LooAssessment { fits, detection_rate, attribution_rate })
}

pub const FINGERPRINT_HEADER: &str = "holdout,forcing,beta_hat,ci_low,ci_high,detected,attributed";

pub fn write_fingerprint_rows(assessment: &LooAssessment, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{FINGERPRINT_HEADER}")?;
    for fit in &assessment.fits {
        for (j, f) in fit.forcings.iter().enumerate() {
            writeln!(
                out,
                "{},{},{:.9e},{:.9e},{:.9e},{},{}",
                fit.holdout_member,
                f.magnitude(),
                fit.beta_hat[j],
                fit.ci_low[j],
                fit.ci_high[j],
                fit.detected[j],
                fit.attributed[j]
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Provenance;

    fn f(x: f64) -> ForcingLevel {
        ForcingLevel::new(x).unwrap()
    }

    fn design(q: DMatrix<f64>, obs: Vec<f64>) -> FingerprintDesign {
        let forcings = (0..q.ncols()).map(|j| f(j as f64)).collect();
        FingerprintDesign {
            q,
            obs,
            forcings,
            variables: vec!["T".into()],
            holdout_member: 1,
            with_intercept: false,
        }
    }

    #[test]
    fn exact_column_attributes() {
        let q = DMatrix::from_fn(12, 2, |i, j| if j == 0 { (i as f64 * 0.7).cos() } else { (i as f64 * 0.3).sin() });
        let obs: Vec<f64> = q.column(1).iter().copied().collect();
        let fit = fit_fingerprint(&design(q, obs), 0.95).unwrap();
        assert!((fit.beta_hat[1] - 1.0).abs() < 1e-12);
        assert!(fit.beta_hat[0].abs() < 1e-12);
        assert!(fit.detected[1] && fit.attributed[1]);
        assert!(!fit.detected[0]);
    }

    #[test]
    fn orthogonal_obs_detects_nothing() {
        let q = DMatrix::from_fn(4, 1, |i, _| if i < 2 { 1.0 } else { 0.0 });
        let obs = vec![1.0, -1.0, 0.5, 0.25];
        let fit = fit_fingerprint(&design(q, obs), 0.95).unwrap();
        assert!(fit.beta_hat[0].abs() < 1e-15);
        assert!(!fit.detected[0]);
        assert!(!fit.attributed[0]);
    }

    #[test]
    fn nested_confidence_intervals() {
        let q = DMatrix::from_fn(20, 2, |i, j| ((i * (j + 2)) as f64 * 0.37).sin());
        let obs: Vec<f64> = (0..20).map(|i| 0.8 * q[(i, 1)] + 0.05 * ((i * 7 % 5) as f64 - 2.0)).collect();
        let d = design(q, obs);
        let c90 = fit_fingerprint(&d, 0.90).unwrap();
        let c95 = fit_fingerprint(&d, 0.95).unwrap();
        let c99 = fit_fingerprint(&d, 0.99).unwrap();
        for j in 0..2 {
            assert!(c99.ci_low[j] <= c95.ci_low[j] && c95.ci_low[j] <= c90.ci_low[j]);
            assert!(c90.ci_high[j] <= c95.ci_high[j] && c95.ci_high[j] <= c99.ci_high[j]);
        }
        assert!(fit_fingerprint(&d, 1.0).is_err());
    }

    fn toy_dataset(members: u32, n_t: usize) -> ImpactDataset {
        let mut series = Vec::new();
        for (forcing, amp) in [(0.0, 0.0), (7.0, -0.7), (10.0, -1.0)] {
            for m in 1..=members {
                let values = (0..n_t)
                    .map(|t| amp * (-(t as f64) / 10.0).exp() + 0.01 * ((m as usize * 13 + t * 7) % 11) as f64)
                    .collect();
                series.push(
                    EnsembleSeries::new("TREFHT", f(forcing), m, (0..n_t as i64).collect(), values).unwrap(),
                );
                let values = (0..n_t).map(|t| 3.0 * amp * (t as f64 / 5.0).sin()).collect();
                series.push(EnsembleSeries::new("FSNT", f(forcing), m, (0..n_t as i64).collect(), values).unwrap());
            }
        }
        ImpactDataset::new(series, ForcingLevel::COUNTERFACTUAL, Provenance::Centered).unwrap()
    }

    #[test]
    fn design_dimensions() {
        let ds = toy_dataset(4, 37);
        let vars = vec!["FSNT".to_string(), "TREFHT".to_string()];
        let d = build_design(&ds, &vars, &[f(0.0), f(10.0)], f(10.0), 2, &TimeWindow::three_year(), FingerprintOptions::default())
            .unwrap();
        assert_eq!(d.q.shape(), (74, 2));
        assert_eq!(d.obs.len(), 74);
        let single = build_design(&ds, &vars[1..], &[f(10.0)], f(10.0), 2, &TimeWindow::three_year(), FingerprintOptions::default())
            .unwrap();
        assert_eq!(single.q.shape(), (37, 1));
        assert!(matches!(
            build_design(&ds, &vars, &[f(0.0), f(10.0)], f(10.0), 99, &TimeWindow::three_year(), FingerprintOptions::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn too_few_members_after_holdout() {
        let ds = toy_dataset(2, 12);
        let vars = vec!["TREFHT".to_string()];
        assert!(matches!(
            build_design(&ds, &vars, &[f(0.0), f(10.0)], f(10.0), 1, &TimeWindow::three_year(), FingerprintOptions::default()),
            Err(Error::Data(_))
        ));
        let one = toy_dataset(1, 12);
        assert!(matches!(
            loo_assessment(&one, &vars, &[f(0.0), f(10.0)], f(10.0), &TimeWindow::three_year(), 0.95, FingerprintOptions::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn holdout_scope_changes_only_other_columns() {
        let ds = toy_dataset(4, 24);
        let vars = vec!["TREFHT".to_string()];
        let w = TimeWindow::new("w", 0, 24).unwrap();
        let sym = build_design(&ds, &vars, &[f(0.0), f(10.0)], f(10.0), 3, &w, FingerprintOptions::default()).unwrap();
        let alt = build_design(
            &ds,
            &vars,
            &[f(0.0), f(10.0)],
            f(10.0),
            3,
            &w,
            FingerprintOptions { holdout_scope: HoldoutScope::ObservationOnly, with_intercept: false },
        )
        .unwrap();
        assert_eq!(sym.q.column(1), alt.q.column(1));
        assert_ne!(sym.q.column(0), alt.q.column(0));
        assert_eq!(sym.obs, alt.obs);
    }
}
