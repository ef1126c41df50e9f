use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use pathattr::data::{ColumnMapping, Region, TimeWindow};
use pathattr::fingerprint::HoldoutScope;
use pathattr::pathway::PathwayGraph;
use pathattr::synth::{SeriesSpec, TrueStep};
use pathattr::{Error, ForcingLevel, Result};

pub const DEFAULT_SAMPLES: u64 = 1_000_000;
pub const DEFAULT_OBSERVATION: f64 = 10.0;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub n_samples: u64,
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_observation")]
    pub observation_forcing: f64,
    /// Defaults to the observation forcing.
    pub alternative_forcing: Option<f64>,
    #[serde(default = "default_nulls")]
    pub null_forcings: Vec<f64>,
    /// Defaults to `[observation_forcing]`.
    pub excluded_forcings: Option<Vec<f64>>,
    #[serde(default)]
    pub intercepts: Intercepts,
    pub pathway: PathwaySection,
    pub data: DataSection,
    #[serde(default = "default_regions")]
    pub regions: Vec<RegionSpec>,
    #[serde(default = "default_windows")]
    pub windows: Vec<WindowSpec>,
    pub fingerprint: Option<FingerprintSection>,
    pub curves: Option<CurvesSection>,
    #[serde(default)]
    pub units: BTreeMap<String, String>,
}

fn default_samples() -> u64 {
    DEFAULT_SAMPLES
}

fn default_observation() -> f64 {
    DEFAULT_OBSERVATION
}

fn default_nulls() -> Vec<f64> {
    vec![0.0, 1.0, 3.0, 5.0, 7.0, 13.0, 15.0]
}

fn default_regions() -> Vec<RegionSpec> {
    ["global", "NH", "NA"].map(|s| RegionSpec::Preset(s.into())).to_vec()
}

fn default_windows() -> Vec<WindowSpec> {
    ["3yr", "1992-JJA", "1992-JFM"].map(|s| WindowSpec::Preset(s.into())).to_vec()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intercepts {
    #[serde(default = "yes")]
    pub steps: bool,
    #[serde(default)]
    pub fingerprint: bool,
}

impl Default for Intercepts {
    fn default() -> Self {
        Intercepts { steps: true, fingerprint: false }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathwaySection {
    pub forcing: String,
    pub nodes: Vec<String>,
    pub edges: Vec<String>,
    /// Downstream node for the single-step comparison; defaults to the last
    /// node in evaluation order.
    pub impact: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// One long-form file of regional-mean series per region name.
    #[serde(default)]
    pub files: BTreeMap<String, PathBuf>,
    /// CSV manifest `variable,forcing_Tg,member,path` of JSON grid dumps.
    pub grid_manifest: Option<PathBuf>,
    #[serde(default)]
    pub columns: Option<ColumnMapping>,
    /// Subtract the counterfactual ensemble mean before reducing.
    #[serde(default = "yes")]
    pub center: bool,
    pub synthetic: Option<SyntheticSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    /// `"case-study"` reproduces the published regression summaries per
    /// region and window; otherwise `steps` define one generator.
    pub preset: Option<String>,
    #[serde(default)]
    pub steps: Vec<TrueStep>,
    #[serde(default)]
    pub forcing_levels: Vec<f64>,
    #[serde(default = "default_members")]
    pub members_per_level: u32,
    pub series: Option<SeriesSpec>,
}

fn default_members() -> u32 {
    15
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RegionSpec {
    Preset(String),
    Custom(Region),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum WindowSpec {
    Preset(String),
    Custom { name: String, start: i64, end: i64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerprintSection {
    #[serde(default = "default_fp_variables")]
    pub variables: Vec<String>,
    #[serde(default = "default_fp_forcings")]
    pub forcings: Vec<f64>,
    #[serde(default = "default_fp_region")]
    pub region: String,
    #[serde(default = "default_fp_window")]
    pub window: String,
    #[serde(default)]
    pub holdout_scope: HoldoutScope,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

fn default_fp_variables() -> Vec<String> {
    vec!["TREFHT".into()]
}

fn default_fp_forcings() -> Vec<f64> {
    vec![0.0, 10.0]
}

fn default_fp_region() -> String {
    "global".into()
}

fn default_fp_window() -> String {
    "3yr".into()
}

fn default_confidence() -> f64 {
    0.95
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvesSection {
    pub forcings: Vec<f64>,
}

/// A parsed configuration plus everything derived from it once.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub hash: String,
    pub graph: PathwayGraph,
    pub single_graph: Option<PathwayGraph>,
    pub regions: Vec<Region>,
    pub windows: Vec<TimeWindow>,
    pub observation: ForcingLevel,
    pub alternative: ForcingLevel,
    pub nulls: Vec<ForcingLevel>,
    pub excluded: Vec<ForcingLevel>,
}

fn field(name: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("field `{name}`: {msg}"))
}

fn level(name: &str, x: f64) -> Result<ForcingLevel> {
    ForcingLevel::new(x).map_err(|e| field(name, e))
}

fn levels(name: &str, xs: &[f64]) -> Result<Vec<ForcingLevel>> {
    xs.iter().map(|&x| level(name, x)).collect()
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RegionSpec {
    fn resolve(&self) -> Result<Region> {
        match self {
            RegionSpec::Preset(name) => match name.as_str() {
                "global" => Ok(Region::global()),
                "NH" => Ok(Region::northern_hemisphere()),
                "NA" => Ok(Region::north_america()),
                other => Err(field("regions", format!("unknown region preset '{other}' (global, NH, NA)"))),
            },
            RegionSpec::Custom(r) => {
                r.validate().map_err(|e| field("regions", e))?;
                Ok(r.clone())
            }
        }
    }
}

impl WindowSpec {
    fn resolve(&self) -> Result<TimeWindow> {
        match self {
            WindowSpec::Preset(name) => match name.as_str() {
                "3yr" => Ok(TimeWindow::three_year()),
                "1992-JJA" => Ok(TimeWindow::jja_1992()),
                "1992-JFM" => Ok(TimeWindow::jfm_1992()),
                other => Err(field(
                    "windows",
                    format!("unknown window preset '{other}' (3yr, 1992-JJA, 1992-JFM)"),
                )),
            },
            WindowSpec::Custom { name, start, end } => {
                TimeWindow::new(name.clone(), *start, *end).map_err(|e| field("windows", e))
            }
        }
    }
}

impl Run {
    pub fn load(path: &Path, seed: Option<u64>, samples: Option<u64>) -> Result<Run> {
        let bytes = std::fs::read(path).map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let text = String::from_utf8(bytes.clone()).map_err(|_| Error::Config("config is not UTF-8".into()))?;
        let mut config: RunConfig = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(s) = seed {
            config.seed = s;
        }
        if let Some(n) = samples {
            config.n_samples = n;
        }
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Run::from_config(config, base_dir, hash_bytes(&bytes))
    }

    pub fn from_config(config: RunConfig, base_dir: PathBuf, hash: String) -> Result<Run> {
        if config.n_samples == 0 {
            return Err(field("n_samples", "must be at least 1"));
        }
        let p = &config.pathway;
        let graph = PathwayGraph::from_edge_specs(p.forcing.clone(), p.nodes.clone(), &p.edges)
            .map_err(|e| field("pathway", e))?;
        let report = graph.validate().map_err(|e| field("pathway", e))?;
        let impact = match &p.impact {
            Some(v) if !graph.variables().contains(v) => {
                return Err(field("pathway.impact", format!("'{v}' is not a pathway node")));
            }
            Some(v) => v.clone(),
            None => report.order.last().cloned().expect("validated graph has nodes"),
        };
        let single_graph =
            (graph.variables().len() > 1).then(|| PathwayGraph::single_step(p.forcing.clone(), impact.clone()));

        let observation = level("observation_forcing", config.observation_forcing)?;
        let alternative = level("alternative_forcing", config.alternative_forcing.unwrap_or(config.observation_forcing))?;
        let nulls = levels("null_forcings", &config.null_forcings)?;
        if nulls.is_empty() {
            return Err(field("null_forcings", "must not be empty"));
        }
        if nulls.contains(&alternative) {
            return Err(field("null_forcings", format!("alternative forcing {alternative} is in the null set")));
        }
        let excluded = match &config.excluded_forcings {
            Some(x) => levels("excluded_forcings", x)?,
            None => vec![observation],
        };
        if !excluded.contains(&observation) {
            return Err(field(
                "excluded_forcings",
                format!("must include the observation forcing {observation} so it is not fit on"),
            ));
        }

        let regions = config.regions.iter().map(RegionSpec::resolve).collect::<Result<Vec<_>>>()?;
        let windows = config.windows.iter().map(WindowSpec::resolve).collect::<Result<Vec<_>>>()?;
        if regions.is_empty() {
            return Err(field("regions", "must not be empty"));
        }
        if windows.is_empty() {
            return Err(field("windows", "must not be empty"));
        }

        let d = &config.data;
        let sources = usize::from(!d.files.is_empty()) + usize::from(d.grid_manifest.is_some()) + usize::from(d.synthetic.is_some());
        if sources != 1 {
            return Err(field("data", "give exactly one of `files`, `grid_manifest` or `synthetic`"));
        }
        for r in &regions {
            if !d.files.is_empty() && !d.files.contains_key(&r.name) {
                return Err(field("data.files", format!("no file for region '{}'", r.name)));
            }
        }
        if let Some(s) = &d.synthetic {
            match s.preset.as_deref() {
                Some("case-study") => {}
                Some(other) => return Err(field("data.synthetic.preset", format!("unknown preset '{other}'"))),
                None if s.steps.is_empty() => {
                    return Err(field("data.synthetic", "needs a `preset` or generator `steps`"));
                }
                None => {
                    levels("data.synthetic.forcing_levels", &s.forcing_levels)?;
                }
            }
        }
        if let Some(f) = &config.fingerprint {
            if !(f.confidence > 0.0 && f.confidence < 1.0) {
                return Err(field("fingerprint.confidence", "must lie in (0, 1)"));
            }
            levels("fingerprint.forcings", &f.forcings)?;
        }
        if let Some(c) = &config.curves {
            levels("curves.forcings", &c.forcings)?;
        }

        Ok(Run {
            config,
            base_dir,
            hash,
            graph,
            single_graph,
            regions,
            windows,
            observation,
            alternative,
            nulls,
            excluded,
        })
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn region(&self, name: &str) -> Result<&Region> {
        self.regions
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| field("fingerprint.region", format!("region '{name}' is not configured")))
    }

    pub fn window(&self, name: &str) -> Result<&TimeWindow> {
        self.windows
            .iter()
            .find(|w| w.name == name)
            .ok_or_else(|| field("fingerprint.window", format!("window '{name}' is not configured")))
    }
}
