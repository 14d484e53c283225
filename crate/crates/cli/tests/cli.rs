use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fragdiff_cli::config::RunConfig;
use fragdiff_core::align::{set_dihedral, torsion_specs};
use fragdiff_core::fixtures;
use fragdiff_core::liegroup::{exp_so3, RigidTransform, Vec3};
use fragdiff_core::molio::{write_sdf, MolecularGraph, Pocket};
use tempfile::TempDir;

struct Work {
    dir: TempDir,
}

impl Work {
    fn new() -> Self {
        let w = Work { dir: TempDir::new().unwrap() };
        let c = fixtures::biphenyl_complex();
        w.sdf("ligand.sdf", &c.graph, &c.graph.coordinates().unwrap());
        fs::write(w.path("pocket.json"), Pocket::from_positions("C", &c.pocket).to_json().unwrap()).unwrap();
        w
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn sdf(&self, name: &str, g: &MolecularGraph, x: &[Vec3]) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, write_sdf(g, x).unwrap()).unwrap();
        p
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_fragdiff"))
            .args(args)
            .current_dir(self.dir.path())
            .env("FRAGDIFF_IGSO3_CACHE", cache_dir())
            .output()
            .unwrap()
    }
}

/// One table cache shared by every test in this binary.
fn cache_dir() -> &'static Path {
    static DIR: std::sync::OnceLock<TempDir> = std::sync::OnceLock::new();
    DIR.get_or_init(|| TempDir::new().unwrap()).path()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn verify_passes_on_bundled_fixtures() {
    let w = Work::new();
    let o = w.run(&["verify"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 7, "{out}");
    for line in out.lines() {
        let (_, counts) = line.split_once(": ").unwrap();
        let (a, b) = counts.trim_end_matches(" passed").split_once('/').unwrap();
        assert_eq!(a, b, "{line}");
    }
}

#[test]
fn fragment_is_byte_identical_per_seed() {
    let w = Work::new();
    let a = w.run(&["fragment", "--ligand", "ligand.sdf", "--seed", "7"]);
    let b = w.run(&["fragment", "--ligand", "ligand.sdf", "--seed", "7"]);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["kind"], "fragment_set");
    assert_eq!(v["metadata"]["master_seed"], 7);
    assert_eq!(v["metadata"]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["data"]["fragments"].as_array().unwrap().len(), 2);
}

#[test]
fn emitted_config_reparses_to_the_same_run_config() {
    let w = Work::new();
    fs::write(w.path("run.cfg"), "# test\nsigma_max = 2.0\nn_seeds = 4\nseed = 3\n").unwrap();
    let o = w.run(&["fragment", "--ligand", "ligand.sdf", "--config", "run.cfg", "--set", "rho=2.5", "--seed", "11"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let cfg = RunConfig::parse(v["metadata"]["config"].as_str().unwrap()).unwrap();
    let expect = RunConfig { sigma_max: 2.0, n_seeds: 4, rho: 2.5, seed: 11, ..RunConfig::default() };
    assert_eq!(cfg, expect);
    assert_eq!(v["metadata"]["config_hash"], expect.hash());
}

#[test]
fn exit_codes() {
    let w = Work::new();
    let o = w.run(&["sample", "--ligand", "ligand.sdf", "--pocket", "missing.json", "--out", "out"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert_eq!(code(&w.run(&["dock"])), 1);
    assert_eq!(code(&w.run(&["fragment"])), 1);
    assert_eq!(code(&w.run(&["fragment", "--ligand", "ligand.sdf", "--set", "rho"])), 1);
    assert_eq!(code(&w.run(&["fragment", "--ligand", "ligand.sdf", "--set", "rhoo=2"])), 2);
    assert_eq!(code(&w.run(&["fragment", "--ligand", "ligand.sdf", "--set", "scale=-1"])), 2);
    fs::write(w.path("bad.sdf"), "not a molecule\n").unwrap();
    assert_eq!(code(&w.run(&["fragment", "--ligand", "bad.sdf"])), 2);
    assert_eq!(code(&w.run(&["--help"])), 0);

    // Two atoms cannot fix a rotation: the superposition fails numerically.
    let ethane = fixtures::alkane(3);
    let x = ethane.coordinates().unwrap();
    let collinear: Vec<Vec3> = (0..3).map(|i| Vec3::new(1.5 * i as f64, 0.0, 0.0)).collect();
    let g = MolecularGraph::new("line".into(), ethane.atoms().to_vec(), ethane.bonds().to_vec()).unwrap();
    w.sdf("line.sdf", &g, &collinear);
    w.sdf("bent.sdf", &g, &x);
    let o = w.run(&["align", "--conformer", "line.sdf", "--target", "bent.sdf"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("DegenerateConfiguration"), "{}", stderr(&o));
}

#[test]
fn sample_then_rank() {
    let w = Work::new();
    let o = w.run(&["sample", "--ligand", "ligand.sdf", "--pocket", "pocket.json", "--out", "out", "--n-seeds", "3", "--seed", "5", "--threads", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let poses: Vec<String> = (0..3).map(|k| format!("out/seed_{k:03}.json")).collect();
    for p in &poses {
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(w.path(p)).unwrap()).unwrap();
        assert_eq!(v["kind"], "sample");
        assert_eq!(v["metadata"]["master_seed"], 5);
    }
    let sdf = fs::read_to_string(w.path("out/samples.sdf")).unwrap();
    assert_eq!(sdf.matches("$$$$").count(), 3);
    assert!(sdf.contains("config_hash="));
    let diag = fs::read_to_string(w.path("out/diagnostics.csv")).unwrap();
    let lines: Vec<&str> = diag.lines().collect();
    assert!(lines[0].starts_with("# fragdiff"));
    assert_eq!(lines[1], "seed,status,final_t,steps,wall_seconds,error");
    assert_eq!(lines.len(), 5);
    assert!(lines[2].starts_with("0,ok,0.002,24,"));

    let mut args = vec!["rank", "--ligand", "ligand.sdf", "--pocket", "pocket.json"];
    args.extend(poses.iter().map(|s| s.as_str()));
    let o = w.run(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(2).collect();
    assert_eq!(rows.len(), 3);
    let scores: Vec<f64> = rows.iter().map(|r| r.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(scores.windows(2).all(|s| s[0] >= s[1]));
}

#[test]
fn train_toy_weights_drive_sampling() {
    let w = Work::new();
    let o = w.run(&["train-toy", "--ligand", "ligand.sdf", "--pocket", "pocket.json", "--steps", "20", "--out", "toy.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(w.path("toy.json")).unwrap()).unwrap();
    assert_eq!(v["kind"], "toy_weights");
    assert_eq!(v["data"]["spec"]["n_rbf"], 16);
    assert_eq!(v["data"]["weights"].as_array().unwrap().len(), 256);
    assert!(v["metadata"]["training"]["initial_loss"].as_f64().unwrap() > 0.0);
    let o = w.run(&["sample", "--ligand", "ligand.sdf", "--pocket", "pocket.json", "--weights", "toy.json", "--out", "toy_out", "--n-seeds", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(w.path("toy_out/seed_001.json").exists());
}

#[test]
fn audit_gram_and_align_reports() {
    let w = Work::new();
    let pentane = fixtures::pentane();
    w.sdf("pentane.sdf", &pentane, &pentane.coordinates().unwrap());
    let o = w.run(&["audit-gram", "--ligand", "pentane.sdf", "--out-json", "gram.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = stdout(&o);
    let rows: Vec<&str> = csv.lines().skip(2).collect();
    assert_eq!(rows.len(), 2, "{csv}");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(w.path("gram.json")).unwrap()).unwrap();
    assert_eq!(v["kind"], "gram_reports");

    let hexane = fixtures::hexane();
    let x = hexane.coordinates().unwrap();
    let specs = torsion_specs(&hexane).unwrap();
    let mut y = set_dihedral(&x, &specs[1], 1.0).unwrap();
    y = RigidTransform::new(Vec3::new(2.0, -1.0, 4.0), exp_so3(&Vec3::new(0.3, 1.2, -0.4))).apply(&y);
    w.sdf("hexane.sdf", &hexane, &x);
    w.sdf("target.sdf", &hexane, &y);
    let o = w.run(&["align", "--conformer", "hexane.sdf", "--target", "target.sdf", "--out", "aligned.sdf"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = stdout(&o);
    let row: Vec<&str> = report.lines().nth(2).unwrap().split(',').collect();
    let rmsd: f64 = row[4].parse().unwrap();
    assert!(rmsd < 0.05, "{report}");
    assert!(fs::read_to_string(w.path("aligned.sdf")).unwrap().contains("M  END"));
}
