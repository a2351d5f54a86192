//! GPS trace ingestion.
//!
//! Traces are plain CSV with one fix per line, `vehicle_id,timestamp,lon,lat`.
//! The timestamp is either epoch seconds or an ISO-8601 date-time (naive
//! date-times are read as UTC). Lines that do not parse are counted and
//! skipped; fixes outside the bounding box are dropped silently.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius used by the equirectangular projection, in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot read trace: {0}")]
    Io(#[from] io::Error),
    #[error("no valid in-box records ({malformed} malformed lines)")]
    EmptyDataset { malformed: usize },
    #[error("no vehicle has a fix within {window} s of t = {instant}")]
    EmptySnapshot { instant: f64, window: f64 },
    #[error("invalid bounding box: {0}")]
    InvalidBox(String),
    #[error("snapshot window must be positive, got {0}")]
    InvalidWindow(f64),
    #[error("snapshot serialization failed: {0}")]
    Serialize(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpsRecord {
    pub vehicle_id: String,
    /// Seconds since the Unix epoch.
    pub timestamp: f64,
    pub lon: f64,
    pub lat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
}

impl BoundingBox {
    pub fn new(lon_min: f64, lon_max: f64, lat_min: f64, lat_max: f64) -> Result<Self, TraceError> {
        let all_finite = [lon_min, lon_max, lat_min, lat_max].iter().all(|v| v.is_finite());
        if !all_finite || lon_min >= lon_max || lat_min >= lat_max {
            return Err(TraceError::InvalidBox(format!("lon [{lon_min}, {lon_max}], lat [{lat_min}, {lat_max}]")));
        }
        Ok(Self { lon_min, lon_max, lat_min, lat_max })
    }

    /// Central Beijing, the study area of the taxi dataset.
    pub fn beijing() -> Self {
        Self { lon_min: 116.25, lon_max: 116.55, lat_min: 39.8, lat_max: 40.05 }
    }

    /// Inclusive on all four edges.
    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        lon >= self.lon_min && lon <= self.lon_max && lat >= self.lat_min && lat <= self.lat_max
    }

    /// South-west corner, the default projection origin.
    pub fn south_west(&self) -> (f64, f64) {
        (self.lon_min, self.lat_min)
    }
}

/// Records kept by [`parse_trace`] plus the number of lines that were rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTrace {
    pub records: Vec<GpsRecord>,
    pub malformed: usize,
}

/// Vehicle positions at one instant, in meters east/north of `origin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSnapshot {
    pub instant: f64,
    /// `(lon, lat)` of the planar frame's origin, degrees.
    pub origin: (f64, f64),
    pub positions: BTreeMap<String, (f64, f64)>,
}

impl VehicleSnapshot {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), TraceError> {
        let mut w = csv::Writer::from_writer(writer);
        let ser = |e: csv::Error| TraceError::Serialize(e.to_string());
        w.write_record(["vehicle_id", "x", "y"]).map_err(ser)?;
        for (id, (x, y)) in &self.positions {
            w.write_record([id.as_str(), &x.to_string(), &y.to_string()]).map_err(ser)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, TraceError> {
        serde_json::to_string_pretty(self).map_err(|e| TraceError::Serialize(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, TraceError> {
        serde_json::from_str(text).map_err(|e| TraceError::Serialize(e.to_string()))
    }
}

/// Equirectangular projection around `origin = (lon₀, lat₀)`.
pub fn project(lon: f64, lat: f64, origin: (f64, f64)) -> (f64, f64) {
    let (lon0, lat0) = origin;
    let x = EARTH_RADIUS_M * (lon - lon0).to_radians() * lat0.to_radians().cos();
    let y = EARTH_RADIUS_M * (lat - lat0).to_radians();
    (x, y)
}

/// Inverse of [`project`].
pub fn unproject(x: f64, y: f64, origin: (f64, f64)) -> (f64, f64) {
    let (lon0, lat0) = origin;
    let lon = lon0 + (x / (EARTH_RADIUS_M * lat0.to_radians().cos())).to_degrees();
    let lat = lat0 + (y / EARTH_RADIUS_M).to_degrees();
    (lon, lat)
}

/// Parses epoch seconds or an ISO-8601 date-time into seconds since the epoch.
pub fn parse_timestamp(field: &str) -> Option<f64> {
    let field = field.trim();
    if let Ok(secs) = field.parse::<f64>() {
        return secs.is_finite().then_some(secs);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(field) {
        return Some(dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) * 1e-9);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(field, fmt) {
            let utc = dt.and_utc();
            return Some(utc.timestamp() as f64 + f64::from(utc.timestamp_subsec_nanos()) * 1e-9);
        }
    }
    None
}

fn parse_line(line: &str) -> Option<GpsRecord> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    let [id, ts, lon, lat] = fields.as_slice() else {
        return None;
    };
    if id.is_empty() {
        return None;
    }
    let timestamp = parse_timestamp(ts)?;
    let lon: f64 = lon.parse().ok()?;
    let lat: f64 = lat.parse().ok()?;
    if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
        return None;
    }
    Some(GpsRecord { vehicle_id: (*id).to_string(), timestamp, lon, lat })
}

/// Reads trace lines from any buffered source. Blank lines, `#` comments and a
/// literal `vehicle_id,...` header are skipped without counting as malformed.
pub fn parse_trace_reader<R: BufRead>(reader: R, bbox: &BoundingBox) -> Result<ParsedTrace, TraceError> {
    let mut records = Vec::new();
    let mut malformed = 0;
    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with("vehicle_id,") {
            continue;
        }
        match parse_line(trimmed) {
            Some(rec) if bbox.contains(rec.lon, rec.lat) => records.push(rec),
            Some(_) => {}
            None => malformed += 1,
        }
    }
    if malformed > 0 {
        log::warn!("skipped {malformed} malformed trace lines");
    }
    if records.is_empty() {
        return Err(TraceError::EmptyDataset { malformed });
    }
    Ok(ParsedTrace { records, malformed })
}

pub fn parse_trace(path: impl AsRef<Path>, bbox: &BoundingBox) -> Result<ParsedTrace, TraceError> {
    let file = File::open(path)?;
    parse_trace_reader(BufReader::new(file), bbox)
}

/// Picks, per vehicle, the fix closest in time to `instant` within `window`
/// seconds (earlier fix wins ties) and projects it around the south-west
/// corner of the selected fixes.
pub fn snapshot(records: &[GpsRecord], instant: f64, window: f64) -> Result<VehicleSnapshot, TraceError> {
    let chosen = select_nearest(records, instant, window)?;
    let lon0 = chosen.values().map(|r| r.lon).fold(f64::INFINITY, f64::min);
    let lat0 = chosen.values().map(|r| r.lat).fold(f64::INFINITY, f64::min);
    Ok(project_selection(chosen, instant, (lon0, lat0)))
}

/// Like [`snapshot`] but with an explicit projection origin.
pub fn snapshot_with_origin(
    records: &[GpsRecord],
    instant: f64,
    window: f64,
    origin: (f64, f64),
) -> Result<VehicleSnapshot, TraceError> {
    let chosen = select_nearest(records, instant, window)?;
    Ok(project_selection(chosen, instant, origin))
}

fn select_nearest(records: &[GpsRecord], instant: f64, window: f64) -> Result<HashMap<&str, &GpsRecord>, TraceError> {
    if !(window > 0.0) {
        return Err(TraceError::InvalidWindow(window));
    }
    let mut chosen: HashMap<&str, &GpsRecord> = HashMap::new();
    for rec in records {
        let gap = (rec.timestamp - instant).abs();
        if gap > window {
            continue;
        }
        chosen
            .entry(rec.vehicle_id.as_str())
            .and_modify(|best| {
                let best_gap = (best.timestamp - instant).abs();
                if gap < best_gap || (gap == best_gap && rec.timestamp < best.timestamp) {
                    *best = rec;
                }
            })
            .or_insert(rec);
    }
    if chosen.is_empty() {
        return Err(TraceError::EmptySnapshot { instant, window });
    }
    Ok(chosen)
}

fn project_selection(chosen: HashMap<&str, &GpsRecord>, instant: f64, origin: (f64, f64)) -> VehicleSnapshot {
    let positions = chosen.into_iter().map(|(id, rec)| (id.to_string(), project(rec.lon, rec.lat, origin))).collect();
    VehicleSnapshot { instant, origin, positions }
}
