//! Synthetic traces: Gaussian hot spots over a uniform background, one fix
//! per vehicle, written in the trace CSV format `id,timestamp,lon,lat`.

use std::io::Write;

use anyhow::{bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use vanet_core::trace::{project, unproject};
use vanet_core::{BoundingBox, GpsRecord};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub n: usize,
    pub clusters: usize,
    /// Per-axis standard deviation of each hot spot, meters.
    pub sigma_m: f64,
    /// Fraction of vehicles placed uniformly over the whole box.
    pub background: f64,
    /// Timestamp shared by every fix, seconds since the epoch.
    pub timestamp: i64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { n: 2000, clusters: 5, sigma_m: 300.0, background: 0.05, timestamp: 1_202_000_000 }
    }
}

/// Vehicles `v00000, v00001, …`, all inside `bbox`. Deterministic in `seed`.
pub fn generate_synthetic(opts: &SynthOptions, seed: u64, bbox: &BoundingBox) -> Result<Vec<GpsRecord>> {
    if opts.n == 0 {
        bail!("synthetic trace needs at least one vehicle");
    }
    if !(0.0..=1.0).contains(&opts.background) {
        bail!("background fraction must lie in [0, 1], got {}", opts.background);
    }
    if !(opts.sigma_m > 0.0 && opts.sigma_m.is_finite()) {
        bail!("cluster spread must be positive, got {}", opts.sigma_m);
    }
    let origin = bbox.south_west();
    let width = project(bbox.lon_max, bbox.lat_min, origin).0;
    let height = project(bbox.lon_min, bbox.lat_max, origin).1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // hot spots keep clear of the border so most of their mass lies inside
    let margin_x = (3.0 * opts.sigma_m).min(width / 4.0);
    let margin_y = (3.0 * opts.sigma_m).min(height / 4.0);
    let centers: Vec<(f64, f64)> = (0..opts.clusters)
        .map(|_| (rng.random_range(margin_x..width - margin_x), rng.random_range(margin_y..height - margin_y)))
        .collect();
    let spread = Normal::new(0.0, opts.sigma_m)?;

    let mut records = Vec::with_capacity(opts.n);
    for i in 0..opts.n {
        let (x, y) = if centers.is_empty() || rng.random_bool(opts.background) {
            (rng.random_range(0.0..width), rng.random_range(0.0..height))
        } else {
            let (cx, cy) = centers[rng.random_range(0..centers.len())];
            loop {
                let p = (cx + spread.sample(&mut rng), cy + spread.sample(&mut rng));
                if (0.0..width).contains(&p.0) && (0.0..height).contains(&p.1) {
                    break p;
                }
            }
        };
        let (lon, lat) = unproject(x, y, origin);
        records.push(GpsRecord {
            vehicle_id: format!("v{i:05}"),
            timestamp: opts.timestamp as f64,
            lon: lon.clamp(bbox.lon_min, bbox.lon_max),
            lat: lat.clamp(bbox.lat_min, bbox.lat_max),
        });
    }
    Ok(records)
}

/// Headerless `id,timestamp,lon,lat` rows, the format the trace parser reads.
pub fn write_trace_csv<W: Write>(records: &[GpsRecord], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for r in records {
        w.write_record([r.vehicle_id.clone(), (r.timestamp as i64).to_string(), r.lon.to_string(), r.lat.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
