//! Published case-study summaries and a synthetic analog matched to them.
//!
//! The analog reproduces, in expectation, the single-step slope and the
//! three coefficients of determination reported for each region and window
//! of the Pinatubo-scale ensemble (SO2 -> FSNT -> TREFHT with a direct
//! SO2 -> TREFHT edge).

use std::collections::BTreeMap;

use crate::data::{ForcingLevel, Region, TimeWindow};
use crate::pathway::PathwayGraph;
use crate::synth::{GeneratorSpec, SeriesSpec, TrueStep};

/// Ensemble forcing levels in Tg of SO2.
pub const FORCING_LEVELS: [f64; 8] = [0.0, 1.0, 3.0, 5.0, 7.0, 10.0, 13.0, 15.0];
pub const MEMBERS_PER_LEVEL: u32 = 15;
pub const OBSERVATION_FORCING: f64 = 10.0;

/// Slope used for FSNT on the forcing; every fitted summary is invariant to it.
pub const DEFAULT_FSNT_SLOPE: f64 = -0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowKey {
    ThreeYear,
    Jja1992,
    Jfm1992,
}

impl WindowKey {
    pub fn window(self) -> TimeWindow {
        match self {
            WindowKey::ThreeYear => TimeWindow::three_year(),
            WindowKey::Jja1992 => TimeWindow::jja_1992(),
            WindowKey::Jfm1992 => TimeWindow::jfm_1992(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionKey {
    Global,
    NorthernHemisphere,
    NorthAmerica,
}

impl RegionKey {
    pub fn region(self) -> Region {
        match self {
            RegionKey::Global => Region::global(),
            RegionKey::NorthernHemisphere => Region::northern_hemisphere(),
            RegionKey::NorthAmerica => Region::north_america(),
        }
    }
}

/// Reported regression summaries for one region and window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceContext {
    pub region: RegionKey,
    pub window: WindowKey,
    /// TREFHT on SO2 slope, K per Tg.
    pub single_theta: f64,
    pub r2_single: f64,
    pub r2_fsnt: f64,
    pub r2_multi: f64,
    /// `(theta_SO2, theta_FSNT)` of the TREFHT step after scaling to [-1, 1].
    pub normalized_multi_theta: (f64, f64),
    /// Normalized residual variances: single TREFHT, FSNT, multi TREFHT.
    pub normalized_sigma2: (f64, f64, f64),
}

const fn ctx(
    region: RegionKey,
    window: WindowKey,
    single_theta: f64,
    r2: (f64, f64, f64),
    normalized_multi_theta: (f64, f64),
    normalized_sigma2: (f64, f64, f64),
) -> ReferenceContext {
    ReferenceContext {
        region,
        window,
        single_theta,
        r2_single: r2.0,
        r2_fsnt: r2.1,
        r2_multi: r2.2,
        normalized_multi_theta,
        normalized_sigma2,
    }
}

use RegionKey::*;
use WindowKey::*;

pub const REFERENCE_CONTEXTS: [ReferenceContext; 9] = [
    ctx(Global, ThreeYear, -0.0157, (0.788, 0.983, 0.881), (0.953, 1.810), (0.0501, 0.0067, 0.0282)),
    ctx(Global, Jja1992, -0.0265, (0.796, 0.922, 0.806), (-0.381, 0.330), (0.0521, 0.0238, 0.0500)),
    ctx(Global, Jfm1992, -0.0155, (0.421, 0.910, 0.498), (0.135, 0.688), (0.1000, 0.0284, 0.0879)),
    ctx(NorthernHemisphere, ThreeYear, -0.0223, (0.797, 0.976, 0.855), (0.450, 1.310), (0.0533, 0.0088, 0.0384)),
    ctx(NorthernHemisphere, Jja1992, -0.0403, (0.798, 0.899, 0.813), (-0.353, 0.364), (0.0484, 0.0281, 0.0451)),
    ctx(NorthernHemisphere, Jfm1992, -0.0188, (0.261, 0.925, 0.352), (0.344, 0.908), (0.1540, 0.0229, 0.1360)),
    ctx(NorthAmerica, ThreeYear, -0.0212, (0.406, 0.897, 0.543), (0.244, 0.842), (0.0907, 0.0294, 0.0706)),
    ctx(NorthAmerica, Jja1992, -0.0487, (0.629, 0.680, 0.824), (-0.094, 0.771), (0.0772, 0.0683, 0.0370)),
    ctx(NorthAmerica, Jfm1992, 0.0007, (0.005, 0.747, 0.075), (0.306, 0.433), (0.1750, 0.0653, 0.1640)),
];

/// Reported Monte Carlo p-value; `None` marks "below the sampling floor".
pub type ReportedP = Option<f64>;

/// Global three-year p-values for the two-step pathway, null levels
/// 0, 1, 3, 5, 7, 13, 15 Tg against 10 Tg, with 10^6 samples.
pub const GLOBAL_3YR_MULTI_P: [(f64, ReportedP); 7] = [
    (0.0, None),
    (1.0, None),
    (3.0, None),
    (5.0, None),
    (7.0, Some(1.40e-5)),
    (13.0, Some(1.00e-6)),
    (15.0, None),
];

/// Global three-year single-step p-value at the 7 Tg null.
pub const GLOBAL_3YR_SINGLE_P_7TG: f64 = 2.78e-1;

/// Population variance of the fitted forcing levels (observation level excluded).
pub fn fitted_forcing_variance() -> f64 {
    let levels: Vec<f64> = FORCING_LEVELS.iter().copied().filter(|f| *f != OBSERVATION_FORCING).collect();
    let n = levels.len() as f64;
    let mean = levels.iter().sum::<f64>() / n;
    levels.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / n
}

/// True parameters of the analog for `context`.
///
/// With `var_f` the spread of the forcing and `b` the FSNT slope:
/// FSNT noise makes its R^2 match, the total TREFHT variance follows from
/// the single-step slope and R^2, the TREFHT residual variance from the
/// multi-step R^2, and the FSNT coupling `g` carries the R^2 gained by
/// adding FSNT. The direct forcing term absorbs the rest of the slope.
pub fn analog_steps(context: &ReferenceContext, fsnt_slope: f64) -> Vec<TrueStep> {
    let var_f = fitted_forcing_variance();
    let b = fsnt_slope;
    let sigma1 = b * b * var_f * (1.0 - context.r2_fsnt) / context.r2_fsnt;
    let total_t = context.single_theta.powi(2) * var_f / context.r2_single;
    let sigma2 = total_t * (1.0 - context.r2_multi);
    let g = (total_t * (context.r2_multi - context.r2_single) / sigma1).sqrt();
    let d = context.single_theta - g * b;
    vec![
        TrueStep {
            target: "FSNT".into(),
            intercept: 0.0,
            forcing_coef: b,
            parent_coefs: BTreeMap::new(),
            sigma2: sigma1,
        },
        TrueStep {
            target: "TREFHT".into(),
            intercept: 0.0,
            forcing_coef: d,
            parent_coefs: BTreeMap::from([("FSNT".into(), g)]),
            sigma2,
        },
    ]
}

/// Generator for the analog of `context` at the ensemble design.
pub fn analog_spec(context: &ReferenceContext, seed: u64) -> GeneratorSpec {
    GeneratorSpec {
        graph: PathwayGraph::surface_cooling(),
        steps: analog_steps(context, DEFAULT_FSNT_SLOPE),
        forcing_levels: FORCING_LEVELS.iter().map(|&f| ForcingLevel::new(f).expect("valid level")).collect(),
        members_per_level: MEMBERS_PER_LEVEL,
        seed,
        series: None,
    }
}

/// Month-to-month persistence of the fingerprint analog's internal noise.
pub const FINGERPRINT_AR_COEFFICIENT: f64 = 0.6;
/// Innovation SD giving a 0.1 K marginal SD for monthly global-mean TREFHT.
pub const FINGERPRINT_AR_INNOVATION_SD: f64 = 0.08;

/// Monthly analog used for the fingerprint comparison: the global
/// three-year context with the forced response spread over a pulse
/// peaking in month 8, plus AR(1) month-to-month noise.
pub fn fingerprint_analog_spec(seed: u64) -> GeneratorSpec {
    let mut spec = analog_spec(&REFERENCE_CONTEXTS[0], seed);
    spec.series = Some(SeriesSpec {
        months: 37,
        seasonal_amplitude: 0.0,
        ar_coefficient: FINGERPRINT_AR_COEFFICIENT,
        ar_innovation_sd: FINGERPRINT_AR_INNOVATION_SD,
        response_peak_month: Some(8.0),
    });
    spec
}
