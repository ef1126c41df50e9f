//! Ensemble impact data: centering against the counterfactual, space and time
//! reduction to scalar metrics, and pseudo-observations.
//!
//! Month indices are relative to an epoch of June 1991 (index 0), so the
//! standard case-study windows are `[0, 37)` for June 1991 through June 1994,
//! `[7, 10)` for January to March 1992 and `[12, 15)` for June to August 1992.

mod grid;
mod longform;

use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use grid::{regional_average, GriddedSeries, Region, DEFAULT_POLAR_CLIP};
pub use longform::{load_dataset, read_dataset, write_dataset, ColumnMapping};

/// Magnitude of the upstream forcing (Tg SO2). The counterfactual is exactly zero.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ForcingLevel(f64);

impl ForcingLevel {
    pub const COUNTERFACTUAL: ForcingLevel = ForcingLevel(0.0);

    pub fn new(magnitude: f64) -> Result<Self> {
        if !magnitude.is_finite() || magnitude < 0.0 {
            return Err(Error::Config(format!(
                "forcing magnitude must be finite and nonnegative, got {magnitude}"
            )));
        }
        // fold -0.0 into +0.0 so equality and hashing agree
        Ok(ForcingLevel(magnitude + 0.0))
    }

    pub fn magnitude(self) -> f64 {
        self.0
    }

    pub fn is_counterfactual(self) -> bool {
        self.0 == 0.0
    }
}

impl TryFrom<f64> for ForcingLevel {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        ForcingLevel::new(value)
    }
}

impl From<ForcingLevel> for f64 {
    fn from(level: ForcingLevel) -> f64 {
        level.0
    }
}

impl PartialEq for ForcingLevel {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for ForcingLevel {}

impl PartialOrd for ForcingLevel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ForcingLevel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Hash for ForcingLevel {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

impl fmt::Display for ForcingLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} Tg", self.0)
    }
}

/// Half-open window `[start, end)` of month indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub name: String,
    pub start: i64,
    pub end: i64,
}

impl TimeWindow {
    pub fn new(name: impl Into<String>, start: i64, end: i64) -> Result<Self> {
        let name = name.into();
        if start >= end {
            return Err(Error::Window(format!(
                "window '{name}' must satisfy start < end, got [{start}, {end})"
            )));
        }
        Ok(TimeWindow { name, start, end })
    }

    /// June 1991 through June 1994 inclusive (37 months).
    pub fn three_year() -> Self {
        TimeWindow { name: "3yr".into(), start: 0, end: 37 }
    }

    /// January, February and March 1992.
    pub fn jfm_1992() -> Self {
        TimeWindow { name: "1992-JFM".into(), start: 7, end: 10 }
    }

    /// June, July and August 1992.
    pub fn jja_1992() -> Self {
        TimeWindow { name: "1992-JJA".into(), start: 12, end: 15 }
    }

    pub fn contains(&self, t: i64) -> bool {
        self.start <= t && t < self.end
    }

    pub fn len(&self) -> usize {
        (self.end - self.start) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }
}

/// Monthly series of one variable for one ensemble member at one forcing level.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSeries {
    pub variable: String,
    pub forcing: ForcingLevel,
    pub member: u32,
    times: Vec<i64>,
    values: Vec<f64>,
}

impl EnsembleSeries {
    pub fn new(
        variable: impl Into<String>,
        forcing: ForcingLevel,
        member: u32,
        times: Vec<i64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let variable = variable.into();
        let label = || format!("({variable}, {forcing}, member {member})");
        if times.len() != values.len() {
            return Err(Error::Ingestion(format!(
                "{}: {} time indices but {} values",
                label(),
                times.len(),
                values.len()
            )));
        }
        if times.is_empty() {
            return Err(Error::Ingestion(format!("{}: empty series", label())));
        }
        if let Some(w) = times.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Ingestion(format!(
                "{}: time indices not strictly increasing at {} -> {}",
                label(),
                w[0],
                w[1]
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Ingestion(format!(
                "{}: non-finite value at time index {}",
                label(),
                times[i]
            )));
        }
        Ok(EnsembleSeries { variable, forcing, member, times, values })
    }

    pub fn times(&self) -> &[i64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn key(&self) -> SeriesKey {
        SeriesKey {
            variable: self.variable.clone(),
            forcing: self.forcing,
            member: self.member,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct SeriesKey {
    variable: String,
    forcing: ForcingLevel,
    member: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Raw,
    Centered,
}

/// Collection of ensemble series sharing one time axis per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactDataset {
    series: BTreeMap<SeriesKey, EnsembleSeries>,
    counterfactual: ForcingLevel,
    provenance: Provenance,
}

impl ImpactDataset {
    pub fn new(
        series: Vec<EnsembleSeries>,
        counterfactual: ForcingLevel,
        provenance: Provenance,
    ) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::Ingestion("dataset contains no series".into()));
        }
        let mut map = BTreeMap::new();
        for s in series {
            let key = s.key();
            if map.contains_key(&key) {
                return Err(Error::Ingestion(format!(
                    "duplicate series ({}, {}, member {})",
                    s.variable, s.forcing, s.member
                )));
            }
            map.insert(key, s);
        }

        let mut reference: BTreeMap<&str, &EnsembleSeries> = BTreeMap::new();
        for s in map.values() {
            match reference.get(s.variable.as_str()) {
                None => {
                    reference.insert(&s.variable, s);
                }
                Some(r) if r.times != s.times => {
                    return Err(Error::Ingestion(format!(
                        "ragged time axis for ({}, {}, member {}): {} samples [{}..{}] vs {} samples [{}..{}] for ({}, {}, member {})",
                        s.variable,
                        s.forcing,
                        s.member,
                        s.len(),
                        s.times[0],
                        s.times[s.len() - 1],
                        r.len(),
                        r.times[0],
                        r.times[r.len() - 1],
                        r.variable,
                        r.forcing,
                        r.member
                    )));
                }
                Some(_) => {}
            }
        }

        Ok(ImpactDataset { series: map, counterfactual, provenance })
    }

    pub fn counterfactual(&self) -> ForcingLevel {
        self.counterfactual
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &EnsembleSeries> {
        self.series.values()
    }

    pub fn variables(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for key in self.series.keys() {
            if out.last() != Some(&key.variable) {
                out.push(key.variable.clone());
            }
        }
        out
    }

    pub fn forcings(&self) -> Vec<ForcingLevel> {
        let mut out: Vec<ForcingLevel> = self.series.keys().map(|k| k.forcing).collect();
        out.sort();
        out.dedup();
        out
    }

    /// Member indices present for `(variable, forcing)`, ascending.
    pub fn members(&self, variable: &str, forcing: ForcingLevel) -> Vec<u32> {
        self.series_for(variable, forcing).map(|s| s.member).collect()
    }

    pub fn series_for<'a>(
        &'a self,
        variable: &'a str,
        forcing: ForcingLevel,
    ) -> impl Iterator<Item = &'a EnsembleSeries> + 'a {
        self.series
            .values()
            .filter(move |s| s.variable == variable && s.forcing == forcing)
    }

    pub fn get(&self, variable: &str, forcing: ForcingLevel, member: u32) -> Option<&EnsembleSeries> {
        self.series.get(&SeriesKey {
            variable: variable.to_string(),
            forcing,
            member,
        })
    }

    /// Number of members per `(variable, forcing)` group.
    pub fn member_counts(&self) -> BTreeMap<(String, ForcingLevel), usize> {
        let mut counts = BTreeMap::new();
        for key in self.series.keys() {
            *counts.entry((key.variable.clone(), key.forcing)).or_insert(0) += 1;
        }
        counts
    }
}

/// Subtract the pointwise counterfactual ensemble mean from every series of the
/// same variable, counterfactual members included.
pub fn center_impacts(raw: &ImpactDataset) -> Result<ImpactDataset> {
    let cf = raw.counterfactual;
    let mut baselines: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for variable in raw.variables() {
        let members: Vec<&EnsembleSeries> = raw.series_for(&variable, cf).collect();
        if members.is_empty() {
            return Err(Error::Config(format!(
                "counterfactual forcing {cf} has no members for variable '{variable}'"
            )));
        }
        let n_t = members[0].len();
        let baseline: Vec<f64> = (0..n_t)
            .map(|t| {
                let column: Vec<f64> = members.iter().map(|s| s.values[t]).collect();
                ordered_mean(&column)
            })
            .collect();
        baselines.insert(variable, baseline);
    }

    let series = raw
        .series
        .values()
        .map(|s| {
            let baseline = &baselines[&s.variable];
            let values = s.values.iter().zip(baseline).map(|(v, b)| v - b).collect();
            EnsembleSeries {
                variable: s.variable.clone(),
                forcing: s.forcing,
                member: s.member,
                times: s.times.clone(),
                values,
            }
        })
        .collect();
    ImpactDataset::new(series, cf, Provenance::Centered)
}

/// Arithmetic mean of the series over the samples that fall inside `window`.
pub fn scalar_metric(series: &EnsembleSeries, window: &TimeWindow) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (t, v) in series.times.iter().zip(&series.values) {
        if window.contains(*t) {
            sum += v;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Window(format!(
            "window '{}' [{}, {}) contains no samples of ({}, {}, member {})",
            window.name, window.start, window.end, series.variable, series.forcing, series.member
        )));
    }
    Ok(sum / count as f64)
}

/// Scalar metrics `k[variable][forcing][member]` for one region and window.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMetricTable {
    entries: BTreeMap<String, BTreeMap<ForcingLevel, Vec<f64>>>,
    window: TimeWindow,
    region: Region,
}

impl ScalarMetricTable {
    pub fn new(
        entries: BTreeMap<String, BTreeMap<ForcingLevel, Vec<f64>>>,
        window: TimeWindow,
        region: Region,
    ) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Data("metric table has no variables".into()));
        }
        let mut expected: Option<(usize, String, ForcingLevel)> = None;
        let mut forcing_set: Option<Vec<ForcingLevel>> = None;
        for (variable, by_forcing) in &entries {
            let forcings: Vec<ForcingLevel> = by_forcing.keys().copied().collect();
            match &forcing_set {
                None => forcing_set = Some(forcings),
                Some(fs) if *fs != forcings => {
                    return Err(Error::Data(format!(
                        "variable '{variable}' covers a different set of forcing levels"
                    )))
                }
                Some(_) => {}
            }
            for (forcing, members) in by_forcing {
                if members.is_empty() {
                    return Err(Error::Data(format!("({variable}, {forcing}) has no members")));
                }
                if members.iter().any(|k| !k.is_finite()) {
                    return Err(Error::Data(format!(
                        "({variable}, {forcing}) contains a non-finite metric"
                    )));
                }
                match &expected {
                    None => expected = Some((members.len(), variable.clone(), *forcing)),
                    Some((n, v0, f0)) if *n != members.len() => {
                        return Err(Error::Data(format!(
                            "({variable}, {forcing}) has {} members but ({v0}, {f0}) has {n}",
                            members.len()
                        )))
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(ScalarMetricTable { entries, window, region })
    }

    /// Reduce every series of a (centered) dataset over `window`.
    pub fn from_dataset(dataset: &ImpactDataset, window: &TimeWindow, region: &Region) -> Result<Self> {
        let mut entries: BTreeMap<String, BTreeMap<ForcingLevel, Vec<f64>>> = BTreeMap::new();
        for s in dataset.iter() {
            let k = scalar_metric(s, window)?;
            entries
                .entry(s.variable.clone())
                .or_default()
                .entry(s.forcing)
                .or_default()
                .push(k);
        }
        ScalarMetricTable::new(entries, window.clone(), region.clone())
    }

    pub fn window(&self) -> &TimeWindow {
        &self.window
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn has_variable(&self, variable: &str) -> bool {
        self.entries.contains_key(variable)
    }

    pub fn forcings(&self) -> Vec<ForcingLevel> {
        self.entries
            .values()
            .next()
            .map(|m| m.keys().copied().collect())
            .unwrap_or_default()
    }

    pub fn members_per_level(&self) -> usize {
        self.entries
            .values()
            .next()
            .and_then(|m| m.values().next())
            .map_or(0, Vec::len)
    }

    /// Metrics `m_{v,f}` across members.
    pub fn metrics(&self, variable: &str, forcing: ForcingLevel) -> Result<&[f64]> {
        self.entries
            .get(variable)
            .ok_or_else(|| Error::Lookup(format!("variable '{variable}' not in metric table")))?
            .get(&forcing)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Lookup(format!("forcing {forcing} not in metric table")))
    }

    pub fn entries(&self) -> &BTreeMap<String, BTreeMap<ForcingLevel, Vec<f64>>> {
        &self.entries
    }

    /// Copy of the table without the given forcing levels.
    pub fn without_forcings(&self, excluded: &[ForcingLevel]) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|(v, by_f)| {
                let kept = by_f
                    .iter()
                    .filter(|(f, _)| !excluded.contains(f))
                    .map(|(f, m)| (*f, m.clone()))
                    .collect::<BTreeMap<_, _>>();
                (v.clone(), kept)
            })
            .collect();
        ScalarMetricTable::new(entries, self.window.clone(), self.region.clone())
    }

    /// Apply a per-variable map to every metric.
    pub fn map_values(&self, mut f: impl FnMut(&str, f64) -> f64) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|(v, by_f)| {
                let mapped = by_f
                    .iter()
                    .map(|(forcing, m)| (*forcing, m.iter().map(|&k| f(v, k)).collect()))
                    .collect::<BTreeMap<_, _>>();
                (v.clone(), mapped)
            })
            .collect();
        ScalarMetricTable::new(entries, self.window.clone(), self.region.clone())
    }
}

/// Observed scalar value per pathway variable (the forcing is never observed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoObservation {
    pub values: BTreeMap<String, f64>,
    pub source_forcing: Option<ForcingLevel>,
}

impl PseudoObservation {
    pub fn new(values: BTreeMap<String, f64>) -> Self {
        PseudoObservation { values, source_forcing: None }
    }

    pub fn get(&self, variable: &str) -> Option<f64> {
        self.values.get(variable).copied()
    }
}

/// Ensemble mean of every variable's metric at `forcing`.
pub fn pseudo_observation(metrics: &ScalarMetricTable, forcing: ForcingLevel) -> Result<PseudoObservation> {
    let mut values = BTreeMap::new();
    for (variable, by_forcing) in &metrics.entries {
        let members = by_forcing.get(&forcing).ok_or_else(|| {
            Error::Lookup(format!("forcing {forcing} not present in metric table"))
        })?;
        values.insert(variable.clone(), ordered_mean(members));
    }
    Ok(PseudoObservation { values, source_forcing: Some(forcing) })
}

/// Mean accumulated in sorted order, so the result does not depend on the
/// order in which members are listed.
pub(crate) fn ordered_mean(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(x: f64) -> ForcingLevel {
        ForcingLevel::new(x).unwrap()
    }

    fn series(var: &str, forcing: f64, member: u32, values: &[f64]) -> EnsembleSeries {
        let times = (0..values.len() as i64).collect();
        EnsembleSeries::new(var, f(forcing), member, times, values.to_vec()).unwrap()
    }

    #[test]
    fn forcing_rejects_negative_and_nan() {
        assert!(ForcingLevel::new(-1.0).is_err());
        assert!(ForcingLevel::new(f64::NAN).is_err());
        assert_eq!(ForcingLevel::new(-0.0).unwrap(), ForcingLevel::COUNTERFACTUAL);
    }

    #[test]
    fn window_requires_start_before_end() {
        assert!(TimeWindow::new("bad", 3, 3).is_err());
        assert_eq!(TimeWindow::three_year().len(), 37);
    }

    #[test]
    fn centering_constant_shift() {
        let raw = ImpactDataset::new(
            vec![series("T", 0.0, 1, &[5.0, 5.0]), series("T", 10.0, 1, &[7.0, 7.0])],
            ForcingLevel::COUNTERFACTUAL,
            Provenance::Raw,
        )
        .unwrap();
        let c = center_impacts(&raw).unwrap();
        assert_eq!(c.get("T", f(10.0), 1).unwrap().values(), &[2.0, 2.0]);
        assert_eq!(c.get("T", f(0.0), 1).unwrap().values(), &[0.0, 0.0]);
        assert_eq!(c.provenance(), Provenance::Centered);
    }

    #[test]
    fn centering_uses_counterfactual_mean() {
        let raw = ImpactDataset::new(
            vec![
                series("T", 0.0, 1, &[1.0]),
                series("T", 0.0, 2, &[3.0]),
                series("T", 5.0, 1, &[10.0]),
            ],
            ForcingLevel::COUNTERFACTUAL,
            Provenance::Raw,
        )
        .unwrap();
        let c = center_impacts(&raw).unwrap();
        assert_eq!(c.get("T", f(5.0), 1).unwrap().values(), &[8.0]);
    }

    #[test]
    fn centering_twice_is_stable() {
        let raw = ImpactDataset::new(
            vec![
                series("T", 0.0, 1, &[0.3, -1.7, 2.2]),
                series("T", 0.0, 2, &[1.1, 0.4, -0.9]),
                series("T", 0.0, 3, &[-0.2, 0.8, 0.05]),
                series("T", 7.0, 1, &[-3.0, -2.5, -1.0]),
            ],
            ForcingLevel::COUNTERFACTUAL,
            Provenance::Raw,
        )
        .unwrap();
        let once = center_impacts(&raw).unwrap();
        let twice = center_impacts(&once).unwrap();
        for (a, b) in once.iter().zip(twice.iter()) {
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() < 1e-14, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn centering_without_counterfactual_is_config_error() {
        let raw = ImpactDataset::new(
            vec![series("T", 5.0, 1, &[1.0])],
            ForcingLevel::COUNTERFACTUAL,
            Provenance::Raw,
        )
        .unwrap();
        assert!(matches!(center_impacts(&raw), Err(Error::Config(_))));
    }

    #[test]
    fn ragged_axes_name_offender() {
        let a = series("T", 0.0, 1, &[1.0, 2.0, 3.0]);
        let b = EnsembleSeries::new("T", f(5.0), 4, vec![0, 1], vec![1.0, 2.0]).unwrap();
        let err = ImpactDataset::new(vec![a, b], ForcingLevel::COUNTERFACTUAL, Provenance::Raw)
            .unwrap_err()
            .to_string();
        assert!(err.contains("(T, 5 Tg, member 4)"), "{err}");
    }

    #[test]
    fn scalar_metric_cases() {
        let s = series("T", 1.0, 1, &[1.0, 2.0, 3.0]);
        assert_eq!(scalar_metric(&s, &TimeWindow::new("all", 0, 3).unwrap()).unwrap(), 2.0);
        assert_eq!(scalar_metric(&s, &TimeWindow::new("one", 2, 3).unwrap()).unwrap(), 3.0);
        assert!(matches!(
            scalar_metric(&s, &TimeWindow::new("none", 10, 12).unwrap()),
            Err(Error::Window(_))
        ));

        let values: Vec<f64> = (0..37).map(|t| (t as f64).sin() + 0.1 * t as f64).collect();
        let long = series("T", 1.0, 1, &values);
        let expected = (values[8] + values[9] + values[10]) / 3.0;
        let got = scalar_metric(&long, &TimeWindow::new("jfm-analog", 8, 11).unwrap()).unwrap();
        assert!((got - expected).abs() < 1e-15);
    }

    fn table(members: &[f64]) -> ScalarMetricTable {
        let mut by_f = BTreeMap::new();
        by_f.insert(f(10.0), members.to_vec());
        let mut entries = BTreeMap::new();
        entries.insert("TREFHT".to_string(), by_f);
        ScalarMetricTable::new(entries, TimeWindow::three_year(), Region::global()).unwrap()
    }

    #[test]
    fn pseudo_observation_is_member_mean() {
        let obs = pseudo_observation(&table(&[-0.1, -0.2, -0.3]), f(10.0)).unwrap();
        assert!((obs.get("TREFHT").unwrap() + 0.2).abs() < 1e-15);
        let single = pseudo_observation(&table(&[0.42]), f(10.0)).unwrap();
        assert_eq!(single.get("TREFHT"), Some(0.42));
        assert!(matches!(
            pseudo_observation(&table(&[0.42]), f(3.0)),
            Err(Error::Lookup(_))
        ));
    }

    #[test]
    fn metric_table_rejects_unequal_member_counts() {
        let mut by_f = BTreeMap::new();
        by_f.insert(f(0.0), vec![0.0, 1.0]);
        by_f.insert(f(1.0), vec![0.0]);
        let mut entries = BTreeMap::new();
        entries.insert("T".to_string(), by_f);
        assert!(ScalarMetricTable::new(entries, TimeWindow::three_year(), Region::global()).is_err());
    }
}
