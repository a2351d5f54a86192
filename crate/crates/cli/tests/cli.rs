use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vanet_core::VanetGraph;

const INSTANT: &str = "1202000000";

fn vanet(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vanet")).arg("--out").arg(out).args(args).output().expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> Vec<PathBuf> {
    let o = vanet(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap().lines().map(PathBuf::from).collect()
}

fn code(out: &Path, args: &[&str]) -> i32 {
    vanet(out, args).status.code().unwrap()
}

fn header(path: &Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().map(str::to_string).collect()
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

/// `gen`, `ingest` and `graph` on a small synthetic trace.
fn built(dir: &Path, n: &str) {
    ok(dir, &["--seed", "5", "gen", "-n", n]);
    ok(dir, &["ingest", "--at", INSTANT]);
    ok(dir, &["graph"]);
}

#[test]
fn pipeline_outputs_follow_their_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    built(out, "200");
    assert_eq!(header(&out.join("snapshot.csv")), ["vehicle_id", "x", "y"]);
    assert_eq!(header(&out.join("edges.csv")), ["i", "j", "d_ij", "n_s", "R_ij"]);
    assert_eq!(header(&out.join("vehicle_impedance.csv")), ["vehicle_id", "R_i"]);
    let g = VanetGraph::from_json(&fs::read_to_string(out.join("graph.json")).unwrap()).unwrap();
    assert_eq!(g.n(), 200);
    assert_eq!(rows(&out.join("edges.csv")).len(), g.edge_count());

    let files = ok(out, &["metrics"]);
    assert_eq!(files.len(), 3);
    assert_eq!(header(&out.join("nodes.csv")), ["id", "k", "C", "C2", "B"]);
    assert_eq!(rows(&out.join("nodes.csv")).len(), 200);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["N"], 200);
    let counts: usize = rows(&out.join("degrees.csv")).iter().map(|r| r[1].parse::<usize>().unwrap()).sum();
    assert_eq!(counts, 200);

    ok(out, &["cluster", "--k", "3", "--elbow", "6"]);
    assert_eq!(header(&out.join("clusters.csv")), ["vehicle_id", "x", "y", "label"]);
    assert!(rows(&out.join("clusters.csv")).iter().all(|r| r[3].parse::<usize>().unwrap() < 3));
    let elbow: Vec<f64> = rows(&out.join("elbow.csv")).iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(elbow.len(), 6);
    assert!(elbow.windows(2).all(|w| w[1] <= w[0]));

    ok(out, &["sources", "--scale", "3"]);
    let p: Vec<f64> = rows(&out.join("sources.csv")).iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(p.windows(2).all(|w| w[1] <= w[0]));
    assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-8);
    let r_i: Vec<f64> = rows(&out.join("source_impedance.csv")).iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(r_i.len(), 200);
    assert!(r_i.windows(2).all(|w| w[1] <= w[0]));

    let sol: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("sources.json")).unwrap()).unwrap();
    let ids: Vec<&str> = sol["vehicles"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    let sources = ids[1..4].join(",");
    ok(out, &["allocate", "--sources", &sources, "--dest", ids[0], "-Q", "5", "-c", "4", "--dump-iterates"]);
    assert_eq!(header(&out.join("allocation.csv")), ["commodity", "source", "x_i", "path"]);
    assert_eq!(header(&out.join("loads.csv")), ["u", "v", "load", "capacity"]);
    let alloc = rows(&out.join("allocation.csv"));
    assert_eq!(alloc.len(), 3);
    for row in &alloc {
        assert!(row[3].starts_with(&row[1]) && row[3].ends_with(ids[0]));
    }
    let total: f64 = alloc.iter().map(|r| r[2].parse::<f64>().unwrap()).sum();
    assert!(total >= 5.0 && total - 5.0 <= 1e-5);
    assert!(rows(&out.join("loads.csv")).iter().all(|r| r[2].parse::<f64>().unwrap() < 4.0));
    assert_eq!(header(&out.join("iterates.csv"))[..3], ["stage", "newton", "t"]);
}

#[test]
fn generated_traces_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(a.path(), &["--seed", "11", "gen", "-n", "50"]);
    ok(b.path(), &["--seed", "11", "gen", "-n", "50"]);
    let ta = fs::read(a.path().join("trace.csv")).unwrap();
    assert_eq!(ta, fs::read(b.path().join("trace.csv")).unwrap());
    assert_eq!(String::from_utf8(ta).unwrap().lines().count(), 50);
    ok(b.path(), &["--seed", "12", "gen", "-n", "50"]);
    assert_ne!(fs::read(a.path().join("trace.csv")).unwrap(), fs::read(b.path().join("trace.csv")).unwrap());
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(code(out, &["graph"]), 1);
    assert_eq!(code(out, &["ingest", "--at", INSTANT, "--trace", "/nonexistent.csv"]), 1);
    assert_eq!(code(out, &["--set", "radius=3", "gen"]), 1);
    assert_eq!(code(out, &["--set", "vehicles=0", "gen"]), 1);
    ok(out, &["gen", "-n", "20"]);
    assert_eq!(code(out, &["ingest"]), 1);
    assert_eq!(code(out, &["ingest", "--at", "1000"]), 1);
    ok(out, &["ingest", "--at", INSTANT]);
    ok(out, &["graph"]);
    assert_eq!(code(out, &["allocate", "--sources", "nobody", "--dest", "v00000"]), 1);
    assert_eq!(code(out, &["allocate", "--sources", "v00001", "--dest", "v00000", "--method", "newton"]), 1);
    assert_eq!(code(out, &["--set", "r_list=[]", "sweep-handover"]), 1);
}

#[test]
fn infeasible_allocation_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    built(out, "200");
    ok(out, &["sources"]);
    let sol: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("sources.json")).unwrap()).unwrap();
    let ids: Vec<&str> = sol["vehicles"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    // two links of capacity 1 cannot carry a demand of 100
    for method in ["barrier", "simplex"] {
        let args = ["allocate", "--sources", ids[1], "--dest", ids[0], "-Q", "100", "-c", "1", "--method", method];
        assert_eq!(code(out, &args), 2, "{method}");
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("allocation.json")).unwrap()).unwrap();
        assert_eq!(report["report"]["status"], "infeasible");
    }
}

#[test]
fn flags_override_config_file_and_set() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let config = dir.path().join("run.toml");
    fs::write(&config, format!("out = {:?}\nvehicles = 30\nseed = 3\n", out.display().to_string())).unwrap();
    let cfg = config.to_str().unwrap();
    let written = Command::new(env!("CARGO_BIN_EXE_vanet")).args(["--config", cfg, "gen"]).output().unwrap();
    assert!(written.status.success());
    assert_eq!(fs::read_to_string(out.join("trace.csv")).unwrap().lines().count(), 30);

    let o = Command::new(env!("CARGO_BIN_EXE_vanet"))
        .args(["--config", cfg, "--set", "vehicles=40", "gen", "-n", "25"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(out.join("trace.csv")).unwrap().lines().count(), 25);
    let o = Command::new(env!("CARGO_BIN_EXE_vanet"))
        .args(["--config", cfg, "--set", "vehicles=40", "gen"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(out.join("trace.csv")).unwrap().lines().count(), 40);
}

#[test]
fn sweeps_cover_the_grid_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let common = ["--set", "vehicles=300", "--set", "r_list=[1.0, 200.0, 400.0]"];
    let mut args = common.to_vec();
    args.extend(["--set", "f_c_list=[900, 1800]", "sweep-impedance"]);
    ok(out, &args);
    let imp = rows(&out.join("sweep_impedance.csv"));
    assert_eq!(header(&out.join("sweep_impedance.csv")), ["f_c", "r", "edges", "mean_impedance", "status"]);
    let grid: Vec<(String, String)> = imp.iter().map(|r| (r[0].to_string(), r[1].to_string())).collect();
    let want: Vec<(String, String)> = ["1.0", "200.0", "400.0"]
        .iter()
        .flat_map(|r| ["900.0", "1800.0"].iter().map(move |f| (f.to_string(), r.to_string())))
        .collect();
    assert_eq!(grid, want);
    // a 1 m range leaves the graph without links; the row is kept and flagged
    assert_eq!(&imp[0][4], "no-edges");
    assert_eq!(&imp[0][3], "");
    assert_eq!(&imp[2][4], "ok");

    let mut args = common.to_vec();
    args.extend(["--set", "r_c_list=[100, 1e9]", "sweep-handover"]);
    ok(out, &args);
    let ho = rows(&out.join("sweep_handover.csv"));
    assert_eq!(ho.len(), 6);
    assert_eq!(&ho[3][3], "0.0");
    assert_eq!(&ho[5][3], "0.0");
}
