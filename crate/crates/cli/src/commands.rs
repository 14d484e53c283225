use std::path::{Path, PathBuf};
use std::sync::Arc;

use fragdiff_core::align::{aligned_rmsd, joint_align, measure_dihedral, torsion_specs};
use fragdiff_core::audit::{fragment_gram, pose_checks, pseudo_energy, rank, torsional_gram, GramReport};
use fragdiff_core::fragment::{fr3d, FragmentSet};
use fragdiff_core::igso3::Igso3Table;
use fragdiff_core::molio::{write_sdf, MolecularGraph};
use fragdiff_core::sampler::{internal_pose, pocket_center, sample, seed_rng, SampleConfig, SampleOutput};
use fragdiff_core::scorehead::{
    toy_model_train, Datum, DockContext, FeatureSpec, OracleScore, ScoreModel, ToyModel, ToyWeights, TrainConfig,
};
use fragdiff_core::Vec3;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{self, Stamp};

fn table(cfg: &RunConfig) -> Result<Arc<Igso3Table>, CliError> {
    let dir = io::cache_dir();
    Ok(Arc::new(Igso3Table::load_or_build(cfg.igso3(), dir.as_deref())?))
}

/// Stream reserved for draws made outside any sampling seed.
const SETUP_STREAM: usize = usize::MAX;

pub fn fragment(cfg: &RunConfig, ligand: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let (g, _) = io::read_ligand(ligand)?;
    let fs = fr3d(&g, cfg.seed)?;
    eprintln!("{}: k = {} torsions, m = {} fragments, {} dummies", g.name(), fs.k(), fs.m(), fs.n_dummies());
    io::emit(out, &Stamp::new(cfg).json("fragment_set", fs)?)
}

pub fn align(
    cfg: &RunConfig,
    conformer: &Path,
    target: &Path,
    max_rounds: usize,
    out: Option<&Path>,
    report: Option<&Path>,
) -> Result<(), CliError> {
    let (g, x) = io::read_ligand(conformer)?;
    let (h, y) = io::read_ligand(target)?;
    let same = g.n_atoms() == h.n_atoms() && g.atoms().iter().zip(h.atoms()).all(|(a, b)| a.element == b.element);
    if !same {
        return Err(CliError::Input(format!(
            "{} and {} do not list the same heavy atoms in the same order",
            conformer.display(),
            target.display()
        )));
    }
    let specs = torsion_specs(&g)?;
    let (before, _) = aligned_rmsd(&x, &y)?;
    let res = joint_align(&x, &y, &specs, max_rounds)?;
    let stamp = Stamp::new(cfg);
    if let Some(p) = out {
        io::write_file(p, &stamp.sdf(&write_sdf(&g, &res.coords)?))?;
    }
    let row = vec![
        g.name().to_string(),
        g.n_atoms().to_string(),
        specs.len().to_string(),
        format!("{before:.6}"),
        format!("{:.6}", res.rmsd),
        (res.history.len() - 1).to_string(),
    ];
    let header = ["name", "n_atoms", "n_torsions", "rmsd_rigid", "rmsd_aligned", "rounds"];
    io::emit(report, &stamp.csv(&header, &[row])?)
}

fn docking_frame(
    cfg: &RunConfig,
    g: &MolecularGraph,
    x: &[Vec3],
    pocket: &[Vec3],
    jitter: bool,
) -> Result<(FragmentSet, DockContext, fragdiff_core::fragment::PoseState), CliError> {
    let mut rng = seed_rng(cfg.seed, SETUP_STREAM);
    let center = pocket_center(pocket, if jitter { cfg.sigma_com } else { 0.0 }, &mut rng)?;
    let fs = fr3d(g, cfg.seed)?.scaled(cfg.scale);
    let ctx = DockContext::new(pocket, center, cfg.scale)?;
    let z0 = internal_pose(&fs, x, &ctx)?;
    Ok((fs, ctx, z0))
}

#[allow(clippy::too_many_arguments)]
pub fn sample_cmd(
    cfg: &RunConfig,
    ligand: &Path,
    pocket: &Path,
    weights: Option<&Path>,
    out: &Path,
    threads: Option<usize>,
) -> Result<(), CliError> {
    let (g, x) = io::read_ligand(ligand)?;
    let pocket = io::read_pocket(pocket)?;
    let weights = weights.map(|p| io::read_envelope::<ToyWeights>(p, "toy_weights")).transpose()?;
    let table = table(cfg)?;
    let sched = cfg.schedule();
    let (fs, ctx, z0) = docking_frame(cfg, &g, &x, &pocket, true)?;
    let model: Box<dyn ScoreModel> = match weights {
        Some(w) => Box::new(ToyModel { params: w.data, sched, table }),
        None => Box::new(OracleScore::new(z0, sched, table)),
    };
    let grid = cfg.grid()?;
    let anneal = cfg.anneal();
    let scfg = SampleConfig { grid: &grid, anneal: &anneal, sched: &sched, master_seed: cfg.seed, n_seeds: cfg.n_seeds };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let results = pool.install(|| sample(model.as_ref(), &fs, &ctx, scfg));

    let stamp = Stamp::new(cfg);
    let mut sdf = String::new();
    let mut rows = Vec::new();
    let mut ok = 0;
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => {
                ok += 1;
                let named = MolecularGraph::new(format!("{} seed {k}", g.name()), g.atoms().to_vec(), g.bonds().to_vec())?;
                sdf.push_str(&write_sdf(&named, &s.coords)?);
                rows.push(vec![
                    k.to_string(),
                    "ok".into(),
                    s.final_t.to_string(),
                    s.steps.to_string(),
                    format!("{:.6}", s.wall_seconds),
                    String::new(),
                ]);
                io::write_file(&out.join(format!("seed_{k:03}.json")), &stamp.json("sample", s)?)?;
            }
            Err(e) => {
                eprintln!("seed {k} failed: {}: {e}", e.name());
                rows.push(vec![k.to_string(), "failed".into(), String::new(), String::new(), String::new(), e.name().into()]);
            }
        }
    }
    io::write_file(&out.join("samples.sdf"), &stamp.sdf(&sdf))?;
    let header = ["seed", "status", "final_t", "steps", "wall_seconds", "error"];
    io::write_file(&out.join("diagnostics.csv"), &stamp.csv(&header, &rows)?)?;
    eprintln!("{ok}/{} seeds written to {}", cfg.n_seeds, out.display());
    if ok == 0 {
        return Err(CliError::Numeric(fragdiff_core::Error::NonFinite("every seed failed")));
    }
    Ok(())
}

pub fn train_toy(
    cfg: &RunConfig,
    ligand: &Path,
    pocket: &Path,
    steps: Option<usize>,
    lr: Option<f64>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let (g, x) = io::read_ligand(ligand)?;
    let pocket = io::read_pocket(pocket)?;
    let table = table(cfg)?;
    let (fs, ctx, z0) = docking_frame(cfg, &g, &x, &pocket, false)?;
    let mut tc = TrainConfig::default();
    if let Some(s) = steps {
        tc.steps = s;
    }
    if let Some(l) = lr {
        if !(l > 0.0 && l.is_finite()) {
            return Err(CliError::Usage("--lr must be positive".into()));
        }
        tc.learning_rate = l;
    }
    let mut rng = seed_rng(cfg.seed, 0);
    let data = [Datum { fs, ctx, z0 }];
    let (model, report) = toy_model_train(&data, FeatureSpec::default(), cfg.schedule(), table, &tc, &mut rng)?;
    eprintln!(
        "loss {:.4} -> {:.4} over {} steps (ratio {:.3})",
        report.initial_loss,
        report.final_loss,
        tc.steps,
        report.final_loss / report.initial_loss
    );
    let stamp = Stamp::new(cfg);
    let mut env = stamp.envelope("toy_weights", model.params);
    env.metadata.insert("training".into(), serde_json::to_value(&report).map_err(fragdiff_core::Error::from)?);
    let mut text = env.to_json()?;
    text.push('\n');
    io::emit(out, &text)
}

pub fn audit_gram(cfg: &RunConfig, ligand: &Path, out_json: Option<&Path>, out_csv: Option<&Path>) -> Result<(), CliError> {
    let (g, x) = io::read_ligand(ligand)?;
    let mut reports: Vec<GramReport> = Vec::new();
    let specs = torsion_specs(&g)?;
    if !specs.is_empty() {
        let u = specs.iter().map(|s| measure_dihedral(&x, s)).collect::<Result<Vec<_>, _>>()?;
        reports.push(torsional_gram(&x, &specs, &u)?);
    }
    let fs = fr3d(&g, cfg.seed)?;
    reports.push(fragment_gram(&fs, &fs.reference_pose()?)?);
    let stamp = Stamp::new(cfg);
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                r.gram.len().to_string(),
                r.block_sizes.len().to_string(),
                format!("{:.6e}", r.offdiag_block_max),
                format!("{:.6e}", r.symmetry_error),
                format!("{:.6e}", r.min_eigenvalue),
                opt(r.couplings.map(|c| c.torsion_torsion)),
                opt(r.couplings.map(|c| c.torsion_translation)),
                opt(r.couplings.map(|c| c.torsion_rotation)),
                opt(r.determinant.map(|d| d.rel_error)),
            ]
        })
        .collect();
    let header = [
        "label",
        "n_params",
        "n_blocks",
        "offdiag_block_max",
        "symmetry_error",
        "min_eigenvalue",
        "torsion_torsion",
        "torsion_translation",
        "torsion_rotation",
        "det_rel_error",
    ];
    let csv = stamp.csv(&header, &rows)?;
    if let Some(p) = out_json {
        io::write_file(p, &stamp.json("gram_reports", reports)?)?;
    }
    io::emit(out_csv, &csv)
}

pub fn rank_cmd(
    cfg: &RunConfig,
    ligand: &Path,
    pocket: &Path,
    poses: &[PathBuf],
    out: Option<&Path>,
) -> Result<(), CliError> {
    if poses.is_empty() {
        return Err(CliError::Usage("rank needs at least one pose file".into()));
    }
    let (g, reference) = io::read_ligand(ligand)?;
    let pocket = io::read_pocket(pocket)?;
    let mut scored = Vec::with_capacity(poses.len());
    let mut seeds = Vec::with_capacity(poses.len());
    for p in poses {
        let s: SampleOutput = io::read_envelope(p, "sample")?.data;
        if s.coords.len() != g.n_atoms() {
            return Err(CliError::Input(format!(
                "{}: {} coordinates for a ligand with {} atoms",
                p.display(),
                s.coords.len(),
                g.n_atoms()
            )));
        }
        let b = pseudo_energy(&s.coords, &pocket);
        let checks = pose_checks(&s.coords, &g, &reference, &pocket)?;
        scored.push((b, checks.fraction()));
        seeds.push(s.seed_index);
    }
    let ranked = rank(&scored, cfg.rank_beta)?;
    let rows: Vec<Vec<String>> = ranked
        .iter()
        .enumerate()
        .map(|(pos, r)| {
            vec![
                (pos + 1).to_string(),
                poses[r.index].display().to_string(),
                seeds[r.index].to_string(),
                format!("{:.6}", r.energy),
                format!("{:.4}", r.check_fraction),
                format!("{:.6}", r.score),
            ]
        })
        .collect();
    let header = ["rank", "file", "seed", "energy", "check_fraction", "score"];
    io::emit(out, &Stamp::new(cfg).csv(&header, &rows)?)
}
