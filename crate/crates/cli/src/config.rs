//! Flat run configuration: a TOML document of `key = value` pairs, then
//! `--set key=value` overrides, then explicit subcommand flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use vanet_core::{BarrierOptions, BoundingBox, ClusterConfig, ImpedanceParams, ThroughputParams};

use crate::synth::SynthOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,

    pub trace: Option<PathBuf>,
    pub snapshot: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    /// Snapshot instant, seconds since the epoch. No default.
    pub instant: Option<f64>,
    /// Half-width of the snapshot window, seconds.
    pub window: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,

    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub zeta: f64,
    pub upsilon: f64,
    pub psi: f64,
    pub xi: f64,
    pub theta: f64,
    pub r: f64,
    pub r_c: f64,
    pub f_c: f64,
    pub floor_r: f64,

    pub tau: f64,
    pub varsigma: f64,
    pub p_tx_dbm: f64,
    pub noise_dbm: f64,
    pub shadowing_sigma_db: f64,

    pub k: usize,
    pub epsilon: f64,
    pub seed_index: Option<usize>,

    /// Smallest degree used in the power-law fit.
    pub k_min: usize,

    /// Total demand `Q` and uniform link capacity `c` for allocation.
    pub demand: f64,
    pub capacity: f64,
    pub method: String,
    pub gap: f64,

    /// Throughput scale `C` of the network capacity.
    pub scale: f64,

    pub f_c_list: Vec<f64>,
    pub r_list: Vec<f64>,
    pub r_c_list: Vec<f64>,

    pub vehicles: usize,
    pub clusters: usize,
    pub cluster_sigma: f64,
    pub background: f64,
    pub timestamp: i64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let imp = ImpedanceParams::default();
        let tp = ThroughputParams::default();
        let cc = ClusterConfig::default();
        let bbox = BoundingBox::beijing();
        let synth = SynthOptions::default();
        Self {
            seed: 42,
            out: PathBuf::from("out"),
            trace: None,
            snapshot: None,
            graph: None,
            instant: None,
            window: 30.0,
            lon_min: bbox.lon_min,
            lon_max: bbox.lon_max,
            lat_min: bbox.lat_min,
            lat_max: bbox.lat_max,
            alpha: imp.alpha,
            beta: imp.beta,
            mu: imp.mu,
            zeta: imp.zeta,
            upsilon: imp.upsilon,
            psi: imp.psi,
            xi: imp.xi,
            theta: imp.theta,
            r: imp.r,
            r_c: imp.r_c,
            f_c: imp.f_c,
            floor_r: imp.floor_r,
            tau: tp.tau,
            varsigma: tp.varsigma,
            p_tx_dbm: tp.p_tx_dbm,
            noise_dbm: tp.noise_dbm,
            shadowing_sigma_db: tp.shadowing_sigma_db,
            k: cc.k,
            epsilon: cc.epsilon,
            seed_index: cc.seed_index,
            k_min: 1,
            demand: 10.0,
            capacity: 10.0,
            method: "barrier".into(),
            gap: BarrierOptions::default().gap,
            scale: 1.0,
            f_c_list: vec![800.0, 900.0, 1800.0, 2000.0, 2400.0],
            r_list: (1..=10).map(|i| 100.0 * f64::from(i)).collect(),
            r_c_list: (1..=10).map(|i| 100.0 * f64::from(i)).collect(),
            vehicles: synth.n,
            clusters: synth.clusters,
            cluster_sigma: synth.sigma_m,
            background: synth.background,
            timestamp: synth.timestamp,
        }
    }
}

/// Parses the right-hand side of `--set key=value` as a TOML value; bare words
/// that are not valid TOML are taken as strings.
fn override_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

impl RunConfig {
    /// Defaults, then the file, then `key=value` overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str::<toml::Table>(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            let Some((key, raw)) = item.split_once('=') else {
                bail!("override `{item}` is not of the form key=value");
            };
            table.insert(key.trim().to_string(), override_value(raw.trim()));
        }
        let cfg: RunConfig = toml::Value::Table(table).try_into().context("invalid configuration")?;
        Ok(cfg)
    }

    pub fn bbox(&self) -> Result<BoundingBox> {
        Ok(BoundingBox::new(self.lon_min, self.lon_max, self.lat_min, self.lat_max)?)
    }

    pub fn impedance(&self) -> ImpedanceParams {
        ImpedanceParams {
            alpha: self.alpha,
            beta: self.beta,
            mu: self.mu,
            zeta: self.zeta,
            upsilon: self.upsilon,
            psi: self.psi,
            xi: self.xi,
            theta: self.theta,
            r: self.r,
            r_c: self.r_c,
            f_c: self.f_c,
            floor_r: self.floor_r,
        }
    }

    pub fn throughput(&self) -> ThroughputParams {
        ThroughputParams {
            tau: self.tau,
            varsigma: self.varsigma,
            p_tx_dbm: self.p_tx_dbm,
            noise_dbm: self.noise_dbm,
            shadowing_sigma_db: self.shadowing_sigma_db,
        }
    }

    pub fn cluster(&self) -> ClusterConfig {
        ClusterConfig { k: self.k, epsilon: self.epsilon, seed_index: self.seed_index }
    }

    pub fn barrier(&self) -> BarrierOptions {
        BarrierOptions { gap: self.gap, ..Default::default() }
    }

    pub fn synth(&self) -> SynthOptions {
        SynthOptions {
            n: self.vehicles,
            clusters: self.clusters,
            sigma_m: self.cluster_sigma,
            background: self.background,
            timestamp: self.timestamp,
        }
    }

    /// Every input file named in the configuration must exist.
    pub fn check_files(&self) -> Result<()> {
        for path in [&self.trace, &self.snapshot, &self.graph].into_iter().flatten() {
            if !path.is_file() {
                bail!("input file {} does not exist", path.display());
            }
        }
        Ok(())
    }

    pub fn check_sweeps(&self, lists: &[(&str, &[f64])]) -> Result<()> {
        for (name, list) in lists {
            if list.is_empty() {
                bail!("sweep list `{name}` is empty");
            }
            if list.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                bail!("sweep list `{name}` must hold positive finite values");
            }
        }
        Ok(())
    }
}
