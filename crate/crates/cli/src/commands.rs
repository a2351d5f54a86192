//! Subcommands. Each reads its inputs, writes its outputs under the run's
//! output directory and returns the paths it wrote, in write order.
//!
//! Input files default to the output of the previous pipeline step in the
//! same output directory, so `gen`, `ingest --at T`, `graph`, … chain without
//! extra flags.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Subcommand};
use serde::Serialize;
use vanet_core::clustering::{cluster, elbow};
use vanet_core::graph::build_weighted_graph;
use vanet_core::metrics::analyze;
use vanet_core::sources::{optimize_sources, pass_matrix, write_sorted_csv, Capacity, SourceError};
use vanet_core::trace::{parse_trace, snapshot};
use vanet_core::traffic::{allocate, build_problem, Method};
use vanet_core::{ImpedanceParams, VanetGraph, VehicleSnapshot};

use crate::config::RunConfig;
use crate::sweep::{sweep_handover, sweep_impedance, write_rows};
use crate::synth::{generate_synthetic, write_trace_csv};
use crate::SolverFailure;

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Write a synthetic trace.
    Gen(GenArgs),
    /// Parse a trace and take the snapshot at one instant.
    Ingest(IngestArgs),
    /// Build the impedance-weighted graph of a snapshot.
    Graph(GraphArgs),
    /// Per-node and network statistics of a graph.
    Metrics(MetricsArgs),
    /// Place base stations by farthest-first clustering.
    Cluster(ClusterArgs),
    /// Split a demand over the shortest paths from several sources.
    Allocate(AllocateArgs),
    /// Choose the information-source distribution that maximizes capacity.
    Sources(SourcesArgs),
    /// Mean link impedance over a grid of carrier frequencies and ranges.
    SweepImpedance(SweepArgs),
    /// Mean handovers per link over a grid of cell radii and ranges.
    SweepHandover(SweepArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct GenArgs {
    /// Number of vehicles.
    #[arg(short, long)]
    pub n: Option<usize>,
    /// Number of Gaussian hot spots.
    #[arg(long)]
    pub clusters: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct IngestArgs {
    /// Trace CSV `id,timestamp,lon,lat`; defaults to `<out>/trace.csv`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Snapshot instant, epoch seconds or ISO-8601.
    #[arg(long, value_parser = parse_instant)]
    pub at: Option<f64>,
    /// Half-width of the snapshot window, seconds.
    #[arg(long)]
    pub window: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GraphArgs {
    /// Snapshot JSON; defaults to `<out>/snapshot.json`.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    /// Communication range, meters.
    #[arg(long)]
    pub r: Option<f64>,
    /// Cell radius, meters.
    #[arg(long)]
    pub r_c: Option<f64>,
    /// Carrier frequency, MHz.
    #[arg(long)]
    pub f_c: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GraphInput {
    /// Graph JSON; defaults to `<out>/graph.json`.
    #[arg(long)]
    pub graph: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub input: GraphInput,
    /// Smallest degree in the power-law fit.
    #[arg(long)]
    pub k_min: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub input: GraphInput,
    /// Number of stations.
    #[arg(short, long)]
    pub k: Option<usize>,
    /// Weight of vehicle impedance against distance, in [0, 1].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Also write the radius for every k up to this value.
    #[arg(long, value_name = "KMAX")]
    pub elbow: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct AllocateArgs {
    #[command(flatten)]
    pub input: GraphInput,
    /// Source vehicle ids.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sources: Vec<String>,
    /// Destination vehicle id.
    #[arg(long)]
    pub dest: String,
    /// Total demand.
    #[arg(short = 'Q', long)]
    pub demand: Option<f64>,
    /// Capacity of every used link.
    #[arg(short = 'c', long)]
    pub capacity: Option<f64>,
    /// `barrier` or `simplex`.
    #[arg(long)]
    pub method: Option<String>,
    /// Target suboptimality of the barrier method.
    #[arg(long)]
    pub gap: Option<f64>,
    /// Write one CSV row per Newton step.
    #[arg(long)]
    pub dump_iterates: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SourcesArgs {
    #[command(flatten)]
    pub input: GraphInput,
    /// Throughput scale of the network capacity.
    #[arg(long)]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    /// Snapshot JSON; without one a synthetic snapshot is generated.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
}

fn parse_instant(s: &str) -> Result<f64, String> {
    vanet_core::trace::parse_timestamp(s).ok_or_else(|| format!("`{s}` is neither epoch seconds nor ISO-8601"))
}

/// Writes one output file through a buffered writer.
fn emit<F>(cfg: &RunConfig, name: &str, written: &mut Vec<PathBuf>, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let path = cfg.out.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    body(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush()?;
    written.push(path);
    Ok(())
}

fn emit_text(cfg: &RunConfig, name: &str, written: &mut Vec<PathBuf>, text: &str) -> Result<()> {
    emit(cfg, name, written, |w| {
        w.write_all(text.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

fn input_path(flag: &Option<PathBuf>, configured: &Option<PathBuf>, cfg: &RunConfig, default: &str) -> Result<PathBuf> {
    let path = flag.clone().or_else(|| configured.clone()).unwrap_or_else(|| cfg.out.join(default));
    if !path.is_file() {
        bail!("input file {} does not exist", path.display());
    }
    Ok(path)
}

fn read_graph(cfg: &RunConfig, input: &GraphInput) -> Result<VanetGraph> {
    let path = input_path(&input.graph, &cfg.graph, cfg, "graph.json")?;
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(VanetGraph::from_json(&text).with_context(|| format!("parsing {}", path.display()))?)
}

fn read_snapshot(path: &Path) -> Result<VehicleSnapshot> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(VehicleSnapshot::from_json(&text).with_context(|| format!("parsing {}", path.display()))?)
}

/// Parameters the graph was built with; the configuration only fills in for
/// graphs saved without them.
fn graph_params(cfg: &RunConfig, g: &VanetGraph) -> ImpedanceParams {
    g.params().copied().unwrap_or_else(|| cfg.impedance())
}

fn vehicle_impedances(cfg: &RunConfig, g: &VanetGraph) -> Result<Vec<f64>> {
    if g.betweenness().is_none() {
        bail!("graph carries no betweenness; rebuild it with the graph command");
    }
    Ok(g.vehicle_impedances(&graph_params(cfg, g), &cfg.throughput(), cfg.seed)?)
}

/// Runs one subcommand. `cfg` already holds every flag that maps onto a
/// configuration key; the remaining flags are read from `cmd`.
pub fn run(cfg: &RunConfig, cmd: &Command) -> Result<Vec<PathBuf>> {
    cfg.check_files()?;
    let mut written = Vec::new();
    match cmd {
        Command::Gen(_) => gen(cfg, &mut written)?,
        Command::Ingest(args) => ingest(cfg, args, &mut written)?,
        Command::Graph(args) => graph(cfg, args, &mut written)?,
        Command::Metrics(args) => metrics(cfg, &args.input, &mut written)?,
        Command::Cluster(args) => clusters(cfg, args, &mut written)?,
        Command::Allocate(args) => allocation(cfg, args, &mut written)?,
        Command::Sources(args) => sources(cfg, &args.input, &mut written)?,
        Command::SweepImpedance(args) => {
            cfg.check_sweeps(&[("f_c_list", &cfg.f_c_list), ("r_list", &cfg.r_list)])?;
            let points = sweep_points(cfg, args)?;
            let rows = sweep_impedance(&points, &cfg.impedance(), &cfg.f_c_list, &cfg.r_list)?;
            emit(cfg, "sweep_impedance.csv", &mut written, |w| write_rows(&rows, w))?;
        }
        Command::SweepHandover(args) => {
            cfg.check_sweeps(&[("r_c_list", &cfg.r_c_list), ("r_list", &cfg.r_list)])?;
            let points = sweep_points(cfg, args)?;
            let rows = sweep_handover(&points, &cfg.r_c_list, &cfg.r_list);
            emit(cfg, "sweep_handover.csv", &mut written, |w| write_rows(&rows, w))?;
        }
    }
    Ok(written)
}

/// Folds subcommand flags that shadow configuration keys into `cfg`.
pub fn apply_flags(cfg: &mut RunConfig, cmd: &Command) {
    fn set<T: Clone>(slot: &mut T, flag: &Option<T>) {
        if let Some(v) = flag {
            *slot = v.clone();
        }
    }
    match cmd {
        Command::Gen(a) => {
            set(&mut cfg.vehicles, &a.n);
            set(&mut cfg.clusters, &a.clusters);
        }
        Command::Ingest(a) => {
            if a.trace.is_some() {
                cfg.trace = a.trace.clone();
            }
            if a.at.is_some() {
                cfg.instant = a.at;
            }
            set(&mut cfg.window, &a.window);
        }
        Command::Graph(a) => {
            if a.snapshot.is_some() {
                cfg.snapshot = a.snapshot.clone();
            }
            set(&mut cfg.r, &a.r);
            set(&mut cfg.r_c, &a.r_c);
            set(&mut cfg.f_c, &a.f_c);
        }
        Command::Metrics(a) => set(&mut cfg.k_min, &a.k_min),
        Command::Cluster(a) => {
            set(&mut cfg.k, &a.k);
            set(&mut cfg.epsilon, &a.epsilon);
        }
        Command::Allocate(a) => {
            set(&mut cfg.demand, &a.demand);
            set(&mut cfg.capacity, &a.capacity);
            set(&mut cfg.method, &a.method);
            set(&mut cfg.gap, &a.gap);
        }
        Command::Sources(a) => set(&mut cfg.scale, &a.scale),
        Command::SweepImpedance(a) | Command::SweepHandover(a) => {
            if a.snapshot.is_some() {
                cfg.snapshot = a.snapshot.clone();
            }
        }
    }
}

fn gen(cfg: &RunConfig, written: &mut Vec<PathBuf>) -> Result<()> {
    let records = generate_synthetic(&cfg.synth(), cfg.seed, &cfg.bbox()?)?;
    emit(cfg, "trace.csv", written, |w| write_trace_csv(&records, w))
}

fn ingest(cfg: &RunConfig, args: &IngestArgs, written: &mut Vec<PathBuf>) -> Result<()> {
    let Some(instant) = cfg.instant else {
        bail!("no snapshot instant; pass --at or set `instant`");
    };
    let path = input_path(&args.trace, &cfg.trace, cfg, "trace.csv")?;
    let parsed = parse_trace(&path, &cfg.bbox()?).with_context(|| format!("reading {}", path.display()))?;
    let snap = snapshot(&parsed.records, instant, cfg.window)?;
    log::info!(
        "{} records ({} malformed), {} vehicles in the snapshot",
        parsed.records.len(),
        parsed.malformed,
        snap.len()
    );
    emit(cfg, "snapshot.csv", written, |w| Ok(snap.write_csv(w)?))?;
    emit_text(cfg, "snapshot.json", written, &snap.to_json()?)
}

fn graph(cfg: &RunConfig, args: &GraphArgs, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = input_path(&args.snapshot, &cfg.snapshot, cfg, "snapshot.json")?;
    let snap = read_snapshot(&path)?;
    let g = build_weighted_graph(&snap, &cfg.impedance())?;
    let r_i = vehicle_impedances(cfg, &g)?;
    log::info!("{} vehicles, {} links", g.n(), g.edge_count());
    emit_text(cfg, "graph.json", written, &g.to_json()?)?;
    emit(cfg, "edges.csv", written, |w| Ok(g.write_edge_csv(w)?))?;
    emit(cfg, "vehicle_impedance.csv", written, |w| Ok(write_sorted_csv(w, "R_i", g.ids(), &r_i)?))
}

#[derive(Serialize)]
struct DegreeRow {
    k: usize,
    count: usize,
    p: f64,
}

fn metrics(cfg: &RunConfig, input: &GraphInput, written: &mut Vec<PathBuf>) -> Result<()> {
    let g = read_graph(cfg, input)?;
    let report = analyze(&g, cfg.k_min);
    emit(cfg, "nodes.csv", written, |w| Ok(report.write_node_csv(w)?))?;
    emit_text(cfg, "summary.json", written, &report.summary_json()?)?;
    let rows: Vec<DegreeRow> = report
        .degrees
        .counts
        .iter()
        .map(|(&k, &count)| DegreeRow { k, count, p: count as f64 / report.degrees.n as f64 })
        .collect();
    emit(cfg, "degrees.csv", written, |w| write_rows(&rows, w))
}

#[derive(Serialize)]
struct ClusterFile<'a> {
    k: usize,
    epsilon: f64,
    centers: Vec<&'a str>,
    center_indices: &'a [usize],
    sizes: Vec<usize>,
    radius: f64,
}

#[derive(Serialize)]
struct ElbowRow {
    k: usize,
    radius: f64,
}

fn clusters(cfg: &RunConfig, args: &ClusterArgs, written: &mut Vec<PathBuf>) -> Result<()> {
    let g = read_graph(cfg, &args.input)?;
    let r_i = vehicle_impedances(cfg, &g)?;
    let config = cfg.cluster();
    let result = cluster(g.positions(), &r_i, &config)?;
    emit(cfg, "clusters.csv", written, |w| Ok(result.write_csv(w, g.ids(), g.positions())?))?;
    let mut sizes = vec![0; result.centers.len()];
    for &l in &result.labels {
        sizes[l] += 1;
    }
    let file = ClusterFile {
        k: config.k,
        epsilon: config.epsilon,
        centers: result.centers.iter().map(|&c| g.id(c)).collect(),
        center_indices: &result.centers,
        sizes,
        radius: result.radius,
    };
    emit_text(cfg, "clusters.json", written, &serde_json::to_string_pretty(&file)?)?;
    if let Some(k_max) = args.elbow {
        let curve = elbow(g.positions(), &r_i, &config, k_max)?;
        let rows: Vec<ElbowRow> = curve.into_iter().map(|(k, radius)| ElbowRow { k, radius }).collect();
        emit(cfg, "elbow.csv", written, |w| write_rows(&rows, w))?;
    }
    Ok(())
}

fn vehicle_index(g: &VanetGraph, id: &str) -> Result<usize> {
    g.index_of(id).ok_or_else(|| anyhow!("no vehicle with id `{id}` in the graph"))
}

fn allocation(cfg: &RunConfig, args: &AllocateArgs, written: &mut Vec<PathBuf>) -> Result<()> {
    let g = read_graph(cfg, &args.input)?;
    if !g.has_weights() {
        bail!("graph has no link impedances; rebuild it with the graph command");
    }
    let method: Method = cfg.method.parse()?;
    let sources = args.sources.iter().map(|id| vehicle_index(&g, id)).collect::<Result<Vec<_>>>()?;
    let dest = vehicle_index(&g, &args.dest)?;
    let problem = build_problem(&g, &sources, dest, cfg.demand, cfg.capacity)?;
    let options = vanet_core::BarrierOptions { record_iterates: args.dump_iterates, ..cfg.barrier() };
    let alloc = allocate(&problem, method, &options)?;

    emit_text(cfg, "problem.json", written, &problem.to_json()?)?;
    emit_text(cfg, "allocation.json", written, &serde_json::to_string_pretty(&alloc)?)?;
    if args.dump_iterates {
        emit(cfg, "iterates.csv", written, |w| Ok(alloc.report.write_iterates_csv(w)?))?;
    }
    if !alloc.is_optimal() {
        return Err(SolverFailure(format!("allocation ended with status {:?}", alloc.report.status)).into());
    }
    emit(cfg, "allocation.csv", written, |w| Ok(alloc.write_csv(w, &problem, &g)?))?;
    emit(cfg, "loads.csv", written, |w| Ok(alloc.write_loads_csv(w, &problem, &g)?))
}

#[derive(Serialize)]
struct SourcesFile<'a> {
    vehicles: Vec<&'a str>,
    p: &'a [f64],
    lambda: f64,
    capacity: Capacity,
    scale: f64,
    support: usize,
}

fn sources(cfg: &RunConfig, input: &GraphInput, written: &mut Vec<PathBuf>) -> Result<()> {
    let g = read_graph(cfg, input)?;
    let r_all = vehicle_impedances(cfg, &g)?;
    let pm = pass_matrix(&g)?;
    let r: Vec<f64> = pm.nodes.iter().map(|&v| r_all[v]).collect();
    let problem = vanet_core::SourceProblem::new(pm.a.clone(), r, cfg.scale)?;
    let sol = match optimize_sources(&problem) {
        Ok(sol) => sol,
        Err(SourceError::Solver(status)) => {
            return Err(SolverFailure(format!("source LP ended with status {status:?}")).into())
        }
        Err(e) => return Err(e.into()),
    };
    let ids: Vec<String> = pm.nodes.iter().map(|&v| g.id(v).to_string()).collect();
    emit(cfg, "sources.csv", written, |w| Ok(write_sorted_csv(w, "p", &ids, &sol.p)?))?;
    emit(cfg, "source_impedance.csv", written, |w| Ok(write_sorted_csv(w, "R_i", g.ids(), &r_all)?))?;
    let file = SourcesFile {
        vehicles: ids.iter().map(String::as_str).collect(),
        p: &sol.p,
        lambda: sol.lambda,
        capacity: sol.capacity,
        scale: cfg.scale,
        support: sol.support,
    };
    emit_text(cfg, "sources.json", written, &serde_json::to_string_pretty(&file)?)
}

/// Positions for the sweeps: the configured snapshot, or a synthetic one
/// drawn from the generator settings and the run seed.
fn sweep_points(cfg: &RunConfig, args: &SweepArgs) -> Result<Vec<(f64, f64)>> {
    let snap = match args.snapshot.as_ref().or(cfg.snapshot.as_ref()) {
        Some(path) => read_snapshot(path)?,
        None => {
            let records = generate_synthetic(&cfg.synth(), cfg.seed, &cfg.bbox()?)?;
            snapshot(&records, cfg.timestamp as f64, cfg.window)?
        }
    };
    Ok(snap.positions.values().copied().collect())
}
