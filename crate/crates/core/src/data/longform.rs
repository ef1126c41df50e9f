use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EnsembleSeries, ForcingLevel, ImpactDataset, Provenance};
use crate::error::{Error, Result};

/// Header names of the long-form columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub variable: String,
    pub forcing: String,
    pub member: String,
    pub time_index: String,
    pub value: String,
    pub delimiter: char,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            variable: "variable".into(),
            forcing: "forcing_Tg".into(),
            member: "member".into(),
            time_index: "time_index".into(),
            value: "value".into(),
            delimiter: ',',
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, schema: &ColumnMapping) -> Result<ImpactDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_dataset(file, schema)
}

/// Parse long-form rows into a raw dataset with a 0 Tg counterfactual.
pub fn read_dataset(reader: impl Read, schema: &ColumnMapping) -> Result<ImpactDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Ingestion(format!("cannot read header: {e}")))?
        .clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(Error::Ingestion("empty file".into()));
    }
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    };
    let i_var = column(&schema.variable)?;
    let i_forcing = column(&schema.forcing)?;
    let i_member = column(&schema.member)?;
    let i_time = column(&schema.time_index)?;
    let i_value = column(&schema.value)?;

    let mut groups: BTreeMap<(String, ForcingLevel, u32), Vec<(i64, f64)>> = BTreeMap::new();
    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::Ingestion(format!("line {line}: {e}")))?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let parse_err = |what: &str, text: &str| {
            Error::Ingestion(format!("line {line}: cannot parse {what} from '{text}'"))
        };
        let forcing: f64 = field(i_forcing)
            .parse()
            .map_err(|_| parse_err("forcing", field(i_forcing)))?;
        let forcing = ForcingLevel::new(forcing)
            .map_err(|e| Error::Ingestion(format!("line {line}: {e}")))?;
        let member: u32 = field(i_member)
            .parse()
            .map_err(|_| parse_err("member", field(i_member)))?;
        let t: i64 = field(i_time)
            .parse()
            .map_err(|_| parse_err("time index", field(i_time)))?;
        let value: f64 = field(i_value)
            .parse()
            .map_err(|_| parse_err("value", field(i_value)))?;
        groups
            .entry((field(i_var).to_string(), forcing, member))
            .or_default()
            .push((t, value));
    }
    if groups.is_empty() {
        return Err(Error::Ingestion("file contains no data rows".into()));
    }

    let mut series = Vec::with_capacity(groups.len());
    for ((variable, forcing, member), mut rows) in groups {
        rows.sort_by_key(|r| r.0);
        if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Ingestion(format!(
                "({variable}, {forcing}, member {member}): duplicate time index {}",
                w[0].0
            )));
        }
        let (times, values) = rows.into_iter().unzip();
        series.push(EnsembleSeries::new(variable, forcing, member, times, values)?);
    }
    ImpactDataset::new(series, ForcingLevel::COUNTERFACTUAL, Provenance::Raw)
}

/// Write a dataset in long form using the default header.
pub fn write_dataset(dataset: &ImpactDataset, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "variable,forcing_Tg,member,time_index,value")?;
    for s in dataset.iter() {
        for (t, v) in s.times().iter().zip(s.values()) {
            writeln!(
                out,
                "{},{},{},{},{}",
                s.variable,
                s.forcing.magnitude(),
                s.member,
                t,
                v
            )?;
        }
    }
    Ok(())
}
