use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Latitude beyond which cells are dropped unless a region overrides it.
pub const DEFAULT_POLAR_CLIP: f64 = 66.0;

/// Latitude/longitude box. A box with `lon_min > lon_max` wraps across the
/// antimeridian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    #[serde(default = "default_clip")]
    pub polar_clip: f64,
}

fn default_clip() -> f64 {
    DEFAULT_POLAR_CLIP
}

impl Region {
    pub fn new(name: impl Into<String>, lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64) -> Result<Self> {
        let region = Region {
            name: name.into(),
            lat_min,
            lat_max,
            lon_min,
            lon_max,
            polar_clip: DEFAULT_POLAR_CLIP,
        };
        region.validate()?;
        Ok(region)
    }

    pub fn with_polar_clip(mut self, limit: f64) -> Result<Self> {
        self.polar_clip = limit;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let name = &self.name;
        if !(self.polar_clip > 0.0 && self.polar_clip <= 90.0) {
            return Err(Error::Region(format!(
                "region '{name}': polar clip {} outside (0, 90]",
                self.polar_clip
            )));
        }
        if !(self.lat_min < self.lat_max) {
            return Err(Error::Region(format!(
                "region '{name}': lat_min {} must be below lat_max {}",
                self.lat_min, self.lat_max
            )));
        }
        for lat in [self.lat_min, self.lat_max] {
            if lat.abs() > self.polar_clip {
                return Err(Error::Region(format!(
                    "region '{name}': latitude {lat} outside the polar clip ±{}",
                    self.polar_clip
                )));
            }
        }
        for lon in [self.lon_min, self.lon_max] {
            if !(-180.0..=180.0).contains(&lon) {
                return Err(Error::Region(format!(
                    "region '{name}': longitude {lon} outside [-180, 180]"
                )));
            }
        }
        Ok(())
    }

    /// 66S to 66N, all longitudes.
    pub fn global() -> Self {
        Region {
            name: "global".into(),
            lat_min: -66.0,
            lat_max: 66.0,
            lon_min: -180.0,
            lon_max: 180.0,
            polar_clip: DEFAULT_POLAR_CLIP,
        }
    }

    /// Equator to 66N, all longitudes.
    pub fn northern_hemisphere() -> Self {
        Region {
            name: "NH".into(),
            lat_min: 0.0,
            lat_max: 66.0,
            lon_min: -180.0,
            lon_max: 180.0,
            polar_clip: DEFAULT_POLAR_CLIP,
        }
    }

    /// 25N to 66N, 170W to 60W.
    pub fn north_america() -> Self {
        Region {
            name: "NA".into(),
            lat_min: 25.0,
            lat_max: 66.0,
            lon_min: -170.0,
            lon_max: -60.0,
            polar_clip: DEFAULT_POLAR_CLIP,
        }
    }

    pub fn contains_lat(&self, lat: f64) -> bool {
        lat >= self.lat_min && lat <= self.lat_max && lat.abs() <= self.polar_clip
    }

    pub fn contains_lon(&self, lon: f64) -> bool {
        let lon = wrap_lon(lon);
        if self.lon_min <= self.lon_max {
            lon >= self.lon_min && lon <= self.lon_max
        } else {
            lon >= self.lon_min || lon <= self.lon_max
        }
    }
}

fn wrap_lon(lon: f64) -> f64 {
    let w = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if w == -180.0 && lon > 0.0 {
        180.0
    } else {
        w
    }
}

/// Gridded field, values laid out time-major then latitude then longitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct GriddedSeries {
    latitudes: Vec<f64>,
    longitudes: Vec<f64>,
    times: Vec<i64>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawGrid {
    latitudes: Vec<f64>,
    longitudes: Vec<f64>,
    times: Vec<i64>,
    values: Vec<f64>,
}

impl TryFrom<RawGrid> for GriddedSeries {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        GriddedSeries::new(raw.latitudes, raw.longitudes, raw.times, raw.values)
    }
}

fn strictly_monotone(axis: &[f64]) -> bool {
    axis.windows(2).all(|w| w[0] < w[1]) || axis.windows(2).all(|w| w[0] > w[1])
}

impl GriddedSeries {
    pub fn new(latitudes: Vec<f64>, longitudes: Vec<f64>, times: Vec<i64>, values: Vec<f64>) -> Result<Self> {
        if latitudes.is_empty() || longitudes.is_empty() || times.is_empty() {
            return Err(Error::Ingestion("grid has an empty axis".into()));
        }
        if !strictly_monotone(&latitudes) || !strictly_monotone(&longitudes) {
            return Err(Error::Ingestion("grid axes must be strictly monotone".into()));
        }
        if !times.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Ingestion("grid time axis must be strictly increasing".into()));
        }
        if latitudes.iter().any(|l| !(-90.0..=90.0).contains(l)) {
            return Err(Error::Ingestion("grid latitude outside [-90, 90]".into()));
        }
        if longitudes.iter().any(|l| !(-180.0..180.0).contains(l)) {
            return Err(Error::Ingestion("grid longitude outside [-180, 180)".into()));
        }
        let expected = times.len() * latitudes.len() * longitudes.len();
        if values.len() != expected {
            return Err(Error::Ingestion(format!(
                "grid has {} values, axes imply {expected}",
                values.len()
            )));
        }
        Ok(GriddedSeries { latitudes, longitudes, times, values })
    }

    /// Parse the JSON grid dump `{latitudes, longitudes, times, values}`.
    pub fn from_json_reader(reader: impl Read) -> Result<Self> {
        serde_json::from_reader(reader).map_err(|e| Error::Ingestion(format!("grid dump: {e}")))
    }

    pub fn latitudes(&self) -> &[f64] {
        &self.latitudes
    }

    pub fn longitudes(&self) -> &[f64] {
        &self.longitudes
    }

    pub fn times(&self) -> &[i64] {
        &self.times
    }

    pub fn value(&self, t: usize, lat: usize, lon: usize) -> f64 {
        self.values[(t * self.latitudes.len() + lat) * self.longitudes.len() + lon]
    }
}

/// Cos-latitude weighted mean over the cells inside `region`, one value per time step.
pub fn regional_average(grid: &GriddedSeries, region: &Region) -> Result<Vec<f64>> {
    let cells: Vec<(usize, usize, f64)> = grid
        .latitudes
        .iter()
        .enumerate()
        .filter(|(_, lat)| region.contains_lat(**lat))
        .flat_map(|(i, lat)| {
            let w = lat.to_radians().cos();
            grid.longitudes
                .iter()
                .enumerate()
                .filter(|(_, lon)| region.contains_lon(**lon))
                .map(move |(j, _)| (i, j, w))
        })
        .collect();
    if cells.is_empty() {
        return Err(Error::Region(format!(
            "region '{}' contains no grid cells",
            region.name
        )));
    }

    (0..grid.times.len())
        .map(|t| {
            let mut num = 0.0;
            let mut den = 0.0;
            for &(i, j, w) in &cells {
                let x = grid.value(t, i, j);
                if !x.is_finite() {
                    return Err(Error::Data(format!(
                        "non-finite grid value at time {} lat {} lon {}",
                        grid.times[t], grid.latitudes[i], grid.longitudes[j]
                    )));
                }
                num += w * x;
                den += w;
            }
            Ok(num / den)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_cell_weighting() {
        let grid = GriddedSeries::new(vec![0.0, 60.0], vec![0.0], vec![0], vec![0.0, 1.0]).unwrap();
        let region = Region::new("box", -66.0, 66.0, -10.0, 10.0).unwrap();
        let avg = regional_average(&grid, &region).unwrap();
        assert!((avg[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_field_is_preserved() {
        let lats: Vec<f64> = (-65..=65).step_by(5).map(f64::from).collect();
        let lons: Vec<f64> = (-180..180).step_by(10).map(f64::from).collect();
        let n = lats.len() * lons.len() * 2;
        let grid = GriddedSeries::new(lats, lons, vec![0, 1], vec![1.0; n]).unwrap();
        for region in [Region::global(), Region::northern_hemisphere(), Region::north_america()] {
            let avg = regional_average(&grid, &region).unwrap();
            assert_eq!(avg, vec![1.0, 1.0]);
        }
    }

    #[test]
    fn region_outside_grid_is_error() {
        let grid = GriddedSeries::new(vec![-10.0, 10.0], vec![0.0, 1.0], vec![0], vec![0.0; 4]).unwrap();
        let region = Region::north_america();
        assert!(matches!(regional_average(&grid, &region), Err(Error::Region(_))));
    }

    #[test]
    fn wrapping_longitudes() {
        let r = Region::new("pacific", -10.0, 10.0, 170.0, -170.0).unwrap();
        assert!(r.contains_lon(175.0));
        assert!(r.contains_lon(-175.0));
        assert!(!r.contains_lon(0.0));
        let na = Region::north_america();
        assert!(na.contains_lon(-100.0));
        assert!(na.contains_lon(260.0));
    }

    #[test]
    fn polar_clip_is_configurable() {
        assert!(Region::new("arctic", 60.0, 80.0, -180.0, 180.0).is_err());
        let arctic = Region {
            name: "arctic".into(),
            lat_min: 60.0,
            lat_max: 80.0,
            lon_min: -180.0,
            lon_max: 180.0,
            polar_clip: 90.0,
        };
        assert!(arctic.validate().is_ok());
        assert!(arctic.contains_lat(80.0));
        assert!(Region::global().with_polar_clip(60.0).is_err());
        let wide = Region::new("wide", -60.0, 60.0, -180.0, 180.0).unwrap();
        assert!(!wide.contains_lat(70.0));
    }

    #[test]
    fn json_dump_round_trip() {
        let text = r#"{"latitudes":[0.0,60.0],"longitudes":[0.0],"times":[0,1],"values":[0.0,1.0,2.0,2.0]}"#;
        let grid = GriddedSeries::from_json_reader(text.as_bytes()).unwrap();
        let avg = regional_average(&grid, &Region::global()).unwrap();
        assert!((avg[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((avg[1] - 2.0).abs() < 1e-15);
        let bad = r#"{"latitudes":[0.0,60.0],"longitudes":[0.0],"times":[0],"values":[0.0]}"#;
        assert!(GriddedSeries::from_json_reader(bad.as_bytes()).is_err());
    }
}
