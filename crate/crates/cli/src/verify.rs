//! Invariant checks over the bundled fixtures.

use std::sync::Arc;

use fragdiff_core::align::{kabsch, torsion_specs};
use fragdiff_core::audit::{fragment_gram, rank, torsional_gram};
use fragdiff_core::diffusion::{conditional_score, DiffusionSchedule};
use fragdiff_core::fixtures;
use fragdiff_core::fragment::{centroid, fr3d, FragmentSet};
use fragdiff_core::igso3::{sample_uniform_so3, Igso3Table};
use fragdiff_core::liegroup::{exp_so3, geodesic_angle, log_so3, RigidTransform, Vec3};
use fragdiff_core::sampler::{internal_pose, karras_grid, sample, AnnealSchedule, SampleConfig, DEFAULT_SCALE};
use fragdiff_core::scorehead::{newton_euler_head, DockContext, OracleScore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::CliError;

pub struct Suite {
    pub name: &'static str,
    pub passed: usize,
    pub total: usize,
}

struct Tally {
    passed: usize,
    total: usize,
}

impl Tally {
    fn new() -> Self {
        Tally { passed: 0, total: 0 }
    }

    fn check(&mut self, ok: bool) {
        self.total += 1;
        if ok {
            self.passed += 1;
        }
    }

    fn done(self, name: &'static str) -> Suite {
        Suite { name, passed: self.passed, total: self.total }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> Vec3 {
    fragdiff_core::diffusion::standard_normal_vec(rng)
}

fn lie(rng: &mut ChaCha8Rng) -> Suite {
    let mut t = Tally::new();
    for _ in 0..200 {
        let mut v = normal(rng);
        if v.norm() >= 3.0 {
            v *= 3.0 / v.norm();
        }
        let back = log_so3(&exp_so3(&v)).map(|w| (w - v).norm() < 1e-9).unwrap_or(false);
        t.check(back);
    }
    t.done("lie group")
}

fn fragmentation() -> Suite {
    let mut t = Tally::new();
    for g in fixtures::flexible_corpus().iter().chain(&fixtures::coupled_torsion_fixtures()) {
        let Ok(fs) = fr3d(g, 7) else {
            t.check(false);
            continue;
        };
        t.check(fs.m() <= fs.k() + 1);
        let mut owners = vec![0; g.n_atoms()];
        for f in &fs.fragments {
            for &a in &f.atoms {
                owners[a] += 1;
            }
        }
        t.check(owners.iter().all(|&c| c == 1));
        let unmerged = fs.torsions.iter().filter(|r| r.cut).count();
        t.check(fs.n_dummies() == 2 * unmerged - fs.n_pruned());
        t.check(fr3d(g, 7).map(|again| again == fs).unwrap_or(false));
    }
    t.done("fragmentation")
}

fn diffusion(table: &Igso3Table, rng: &mut ChaCha8Rng) -> Suite {
    let mut t = Tally::new();
    let sched = DiffusionSchedule::default();
    for _ in 0..20 {
        let z0 = fragdiff_core::sampler::sample_prior(2, rng);
        // At z_t = z_0 the rotational score vanishes and the translational one is -p/(1 + α).
        let a = sched.alpha(0.01);
        let ok = conditional_score(&sched, table, &z0, &z0, 0.01).map(|s| {
            let tr = s.translation.iter().zip(&z0.transforms).all(|(v, z)| (v + z.translation / (1.0 + a)).norm() < 1e-12);
            tr && s.rotation.iter().all(|v| v.norm() < 1e-12)
        });
        t.check(ok.unwrap_or(false));
    }
    for w in [0.3, 1.0, 2.5] {
        t.check(table.cdf(std::f64::consts::PI, w).map(|c| (c - 1.0).abs() < 1e-9).unwrap_or(false));
    }
    t.done("diffusion")
}

fn head(table: &Igso3Table, rng: &mut ChaCha8Rng) -> Suite {
    let mut t = Tally::new();
    let sched = DiffusionSchedule::default();
    for _ in 0..50 {
        let n = rng.random_range(3..8);
        let x: Vec<Vec3> = (0..n).map(|_| normal(rng)).collect();
        let f: Vec<Vec3> = (0..n).map(|_| normal(rng)).collect();
        let pose = RigidTransform::new(centroid(&x), sample_uniform_so3(rng));
        let q = sample_uniform_so3(rng);
        let xq: Vec<Vec3> = x.iter().map(|p| q.rotate(p)).collect();
        let fq: Vec<Vec3> = f.iter().map(|p| q.rotate(p)).collect();
        let pq = RigidTransform::new(q.rotate(&pose.translation), q * pose.rotation);
        let ok = match (
            newton_euler_head(&f, &x, &pose, 0.4, &sched, table),
            newton_euler_head(&fq, &xq, &pq, 0.4, &sched, table),
        ) {
            (Ok(a), Ok(b)) => {
                (b.translation - q.rotate(&a.translation)).norm() < 1e-10 && (b.rotation - a.rotation).norm() < 1e-10
            }
            _ => false,
        };
        t.check(ok);
    }
    t.done("prediction head")
}

fn sampling(table: Arc<Igso3Table>) -> Suite {
    let mut t = Tally::new();
    let c = fixtures::terphenyl_complex();
    let run = || -> fragdiff_core::Result<Vec<bool>> {
        let fs = FragmentSet::from_cuts(&c.graph, &c.cuts)?.scaled(DEFAULT_SCALE);
        let ctx = DockContext::new(&c.pocket, centroid(&c.pocket), DEFAULT_SCALE)?;
        let z0 = internal_pose(&fs, &c.graph.coordinates()?, &ctx)?;
        let sched = DiffusionSchedule::default();
        let model = OracleScore::new(z0.clone(), sched, table.clone());
        let grid = karras_grid(25, 0.002, 1.0, 3.0)?;
        let anneal = AnnealSchedule::deterministic();
        let cfg = SampleConfig { grid: &grid, anneal: &anneal, sched: &sched, master_seed: 1, n_seeds: 4 };
        Ok(sample(&model, &fs, &ctx, cfg)
            .into_iter()
            .map(|o| {
                o.map(|o| {
                    o.pose.transforms.iter().zip(&z0.transforms).all(|(a, b)| {
                        (a.translation - b.translation).norm() < 0.1
                            && geodesic_angle(&(b.rotation.transpose() * a.rotation)) < 0.1
                    })
                })
                .unwrap_or(false)
            })
            .collect())
    };
    match run() {
        Ok(v) => v.into_iter().for_each(|ok| t.check(ok)),
        Err(_) => t.check(false),
    }
    t.done("oracle sampling")
}

fn alignment(rng: &mut ChaCha8Rng) -> Suite {
    let mut t = Tally::new();
    let x = fixtures::hexane().coordinates().unwrap_or_default();
    for _ in 0..20 {
        let g = RigidTransform::new(normal(rng) * 3.0, sample_uniform_so3(rng));
        let y = g.apply(&x);
        let ok = kabsch(&x, &y).map(|h| (h.apply(&x).iter().zip(&y).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)) < 1e-10);
        t.check(ok.unwrap_or(false));
    }
    t.done("alignment")
}

fn audit() -> Suite {
    let mut t = Tally::new();
    for g in fixtures::coupled_torsion_fixtures() {
        let ok = (|| -> fragdiff_core::Result<(bool, bool)> {
            let x = g.coordinates()?;
            let specs = torsion_specs(&g)?;
            let u = vec![0.5; specs.len()];
            let tg = torsional_gram(&x, &specs, &u)?;
            let fs = fr3d(&g, 7)?;
            let fg = fragment_gram(&fs, &fs.reference_pose()?)?;
            Ok((tg.couplings.map(|c| c.torsion_torsion > 1e-3).unwrap_or(false), fg.offdiag_block_max < 1e-12))
        })();
        let (a, b) = ok.unwrap_or((false, false));
        t.check(a);
        t.check(b);
    }
    let order = |s: &[(f64, f64)]| rank(s, 4.0).map(|r| r.iter().map(|x| x.index).collect::<Vec<_>>()).ok();
    t.check(order(&[(-5.0, 1.0), (-10.0, 0.5)]) == Some(vec![0, 1]));
    t.done("audit")
}

pub fn run(cfg: &RunConfig) -> Result<Vec<Suite>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dir = crate::io::cache_dir();
    let table = Arc::new(Igso3Table::load_or_build(Default::default(), dir.as_deref())?);
    Ok(vec![
        lie(&mut rng),
        fragmentation(),
        diffusion(&table, &mut rng),
        head(&table, &mut rng),
        sampling(table.clone()),
        alignment(&mut rng),
        audit(),
    ])
}
