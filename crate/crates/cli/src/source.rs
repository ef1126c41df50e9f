use std::fs::File;
use std::path::PathBuf;

use serde::Deserialize;

use pathattr::data::{
    center_impacts, load_dataset, regional_average, EnsembleSeries, GriddedSeries, ImpactDataset, Provenance,
    Region, ScalarMetricTable, TimeWindow,
};
use pathattr::synth::reference::{analog_spec, fingerprint_analog_spec, REFERENCE_CONTEXTS};
use pathattr::synth::{generate_metrics, generate_series, GeneratorSpec};
use pathattr::{Error, ForcingLevel, Result};

use crate::config::{Run, SyntheticSection};

/// One (region, window) cell with its scalar metrics.
#[derive(Debug, Clone)]
pub struct Context {
    pub region: Region,
    pub window: TimeWindow,
    pub table: ScalarMetricTable,
}

fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl Run {
    fn columns(&self) -> pathattr::data::ColumnMapping {
        self.config.data.columns.clone().unwrap_or_default()
    }

    fn explicit_spec(&self, s: &SyntheticSection) -> Result<GeneratorSpec> {
        let forcing_levels = if s.forcing_levels.is_empty() {
            pathattr::synth::reference::FORCING_LEVELS.to_vec()
        } else {
            s.forcing_levels.clone()
        };
        let spec = GeneratorSpec {
            graph: self.graph.clone(),
            steps: s.steps.clone(),
            forcing_levels: forcing_levels.into_iter().map(ForcingLevel::new).collect::<Result<_>>()?,
            members_per_level: s.members_per_level,
            seed: self.config.seed,
            series: s.series.clone(),
        };
        spec.validate().map_err(|e| config(format!("field `data.synthetic.steps`: {e}")))?;
        Ok(spec)
    }

    /// Synthetic series for this run, if the data source can produce them.
    pub fn synthetic_series(&self) -> Result<Option<ImpactDataset>> {
        let Some(s) = &self.config.data.synthetic else {
            return Ok(None);
        };
        if s.preset.is_some() {
            return generate_series(&fingerprint_analog_spec(self.config.seed)).map(Some);
        }
        let spec = self.explicit_spec(s)?;
        if spec.series.is_none() {
            return Ok(None);
        }
        generate_series(&spec).map(Some)
    }

    /// Impact series for `region`, centered when configured.
    pub fn dataset(&self, region: &Region) -> Result<ImpactDataset> {
        let d = &self.config.data;
        let raw = if let Some(path) = d.files.get(&region.name) {
            load_dataset(self.resolve_path(path), &self.columns())?
        } else if let Some(manifest) = &d.grid_manifest {
            self.grid_dataset(&self.resolve_path(manifest), region)?
        } else {
            self.synthetic_series()?.ok_or_else(|| {
                config("field `data.synthetic.series`: time series are needed for this command")
            })?
        };
        if d.center && raw.provenance() == Provenance::Raw {
            center_impacts(&raw)
        } else {
            Ok(raw)
        }
    }

    fn grid_dataset(&self, manifest: &std::path::Path, region: &Region) -> Result<ImpactDataset> {
        #[derive(Deserialize)]
        struct Row {
            variable: String,
            forcing_tg: f64,
            member: u32,
            path: PathBuf,
        }
        let file = File::open(manifest).map_err(|source| Error::Io { path: manifest.display().to_string(), source })?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let base = manifest.parent().map(|p| p.to_path_buf()).unwrap_or_default();
        let mut series = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| Error::Ingestion(format!("grid manifest row {}: {e}", i + 2)))?;
            let row: Row = row
                .deserialize(Some(&csv::StringRecord::from(vec!["variable", "forcing_tg", "member", "path"])))
                .map_err(|e| Error::Ingestion(format!("grid manifest row {}: {e}", i + 2)))?;
            let path = if row.path.is_absolute() { row.path } else { base.join(row.path) };
            let f = File::open(&path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
            let grid = GriddedSeries::from_json_reader(std::io::BufReader::new(f))?;
            let values = regional_average(&grid, region)?;
            series.push(EnsembleSeries::new(
                row.variable,
                ForcingLevel::new(row.forcing_tg)?,
                row.member,
                grid.times().to_vec(),
                values,
            )?);
        }
        ImpactDataset::new(series, ForcingLevel::COUNTERFACTUAL, Provenance::Raw)
    }

    /// Scalar metric tables for every configured region and window.
    pub fn contexts(&self) -> Result<Vec<Context>> {
        let mut out = Vec::new();
        let synthetic = self.config.data.synthetic.as_ref();
        let flat = match synthetic {
            Some(s) if s.preset.is_none() && s.series.is_none() => Some(generate_metrics(&self.explicit_spec(s)?)?),
            _ => None,
        };
        for region in &self.regions {
            let dataset = match synthetic {
                Some(s) if s.preset.is_some() => None,
                _ if flat.is_some() => None,
                _ => Some(self.dataset(region)?),
            };
            for window in &self.windows {
                let table = if let Some(ds) = &dataset {
                    ScalarMetricTable::from_dataset(ds, window, region)?
                } else if let Some(t) = &flat {
                    ScalarMetricTable::new(t.entries().clone(), window.clone(), region.clone())?
                } else {
                    let reference = REFERENCE_CONTEXTS
                        .iter()
                        .find(|c| c.region.region().name == region.name && c.window.window().name == window.name)
                        .ok_or_else(|| {
                            config(format!(
                                "field `data.synthetic.preset`: case-study has no context for region '{}' window '{}'",
                                region.name, window.name
                            ))
                        })?;
                    let t = generate_metrics(&analog_spec(reference, self.config.seed))?;
                    ScalarMetricTable::new(t.entries().clone(), window.clone(), region.clone())?
                };
                out.push(Context { region: region.clone(), window: window.clone(), table });
            }
        }
        Ok(out)
    }
}

/// Metric rows as `region,window,variable,forcing_Tg,member,value`.
pub fn metric_rows(contexts: &[Context]) -> Vec<String> {
    let mut rows = Vec::new();
    for c in contexts {
        for (var, by_forcing) in c.table.entries() {
            for (f, values) in by_forcing {
                for (m, v) in values.iter().enumerate() {
                    rows.push(format!(
                        "{},{},{},{},{},{:.12e}",
                        c.region.name,
                        c.window.name,
                        var,
                        f.magnitude(),
                        m + 1,
                        v
                    ));
                }
            }
        }
    }
    rows
}
