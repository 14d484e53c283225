mod common;

use std::sync::Arc;

use fragdiff_core::diffusion::{DiffusionSchedule, TangentScore};
use fragdiff_core::fixtures;
use fragdiff_core::fragment::{centroid, FragmentSet, PoseState};
use fragdiff_core::liegroup::{geodesic_angle, Rotation, Vec3};
use fragdiff_core::sampler::{
    internal_pose, karras_grid, pocket_center, reverse_rotation_step, run_trajectory, sample, sample_prior,
    AnnealSchedule, RngNoise, SampleConfig, DEFAULT_SCALE,
};
use fragdiff_core::scorehead::{DockContext, OracleScore, ScoreModel};
use fragdiff_core::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

struct Setup {
    fs: FragmentSet,
    ctx: DockContext,
    z0: PoseState,
}

fn setup() -> Setup {
    let c = fixtures::terphenyl_complex();
    let fs = FragmentSet::from_cuts(&c.graph, &c.cuts).unwrap().scaled(DEFAULT_SCALE);
    let ctx = DockContext::new(&c.pocket, centroid(&c.pocket), DEFAULT_SCALE).unwrap();
    let z0 = internal_pose(&fs, &c.graph.coordinates().unwrap(), &ctx).unwrap();
    Setup { fs, ctx, z0 }
}

#[test]
fn fixed_master_seed_reproduces_bitwise() {
    let s = setup();
    let sched = DiffusionSchedule::default();
    let model = OracleScore::new(s.z0.clone(), sched, Arc::new(table().clone()));
    let grid = karras_grid(25, 0.002, 1.0, 3.0).unwrap();
    let anneal = AnnealSchedule::default();
    let cfg = SampleConfig { grid: &grid, anneal: &anneal, sched: &sched, master_seed: 42, n_seeds: 3 };
    let a = sample(&model, &s.fs, &s.ctx, cfg);
    let b = sample(&model, &s.fs, &s.ctx, cfg);
    for (x, y) in a.iter().zip(&b) {
        let (x, y) = (x.as_ref().unwrap(), y.as_ref().unwrap());
        assert_eq!(x.pose, y.pose);
        assert_eq!(x.coords, y.coords);
        assert_eq!(x.steps, 24);
        assert_eq!(x.final_t, 0.002);
    }
    assert_ne!(a[0].as_ref().unwrap().coords, a[1].as_ref().unwrap().coords);
}

/// Fails whenever the first fragment starts on the positive x side.
struct Picky(OracleScore);

impl ScoreModel for Picky {
    fn score(&self, z: &PoseState, t: f64, fs: &FragmentSet, ctx: &DockContext) -> Result<TangentScore> {
        if t == 1.0 && z.transforms[0].translation.x > 0.0 {
            return Err(Error::NonFinite("score"));
        }
        self.0.score(z, t, fs, ctx)
    }
}

#[test]
fn failing_seed_does_not_abort_the_others() {
    let s = setup();
    let sched = DiffusionSchedule::default();
    let model = Picky(OracleScore::new(s.z0.clone(), sched, Arc::new(table().clone())));
    let grid = karras_grid(10, 0.002, 1.0, 3.0).unwrap();
    let anneal = AnnealSchedule::deterministic();
    let cfg = SampleConfig { grid: &grid, anneal: &anneal, sched: &sched, master_seed: 9, n_seeds: 12 };
    let out = sample(&model, &s.fs, &s.ctx, cfg);
    let failed = out.iter().filter(|o| o.is_err()).count();
    assert!(failed > 0 && failed < 12, "{failed} of 12 failed");
    for (k, o) in out.iter().enumerate() {
        if let Ok(o) = o {
            assert_eq!(o.seed_index, k);
        }
    }
}

#[test]
fn noise_only_rotation_step_matches_igso3() {
    let sched = DiffusionSchedule::default();
    let tab = table();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (t, dt, gamma) in [(0.5, 0.01, 1.0), (0.2, 0.02, 0.5), (0.8, 0.005, 1.0)] {
        let sigma = (dt * sched.g(t)).sqrt() * gamma;
        let mut angles: Vec<f64> = (0..10_000)
            .map(|_| {
                let r = reverse_rotation_step(&Rotation::identity(), &Vec3::zeros(), t, dt, gamma, &sched, &normal_vec(&mut rng));
                geodesic_angle(&r)
            })
            .collect();
        let ks = ks_statistic(&mut angles, |w| tab.cdf(w, sigma).unwrap());
        assert!(ks < 0.03, "t {t}: sigma {sigma:.3} KS {ks:.4}");
    }
}

#[test]
fn oracle_trajectory_closes_in_on_the_reference() {
    let s = setup();
    let sched = DiffusionSchedule::default();
    let model = OracleScore::new(s.z0.clone(), sched, Arc::new(table().clone()));
    let grid = karras_grid(25, 0.002, 1.0, 3.0).unwrap();
    let anneal = AnnealSchedule::default();
    let n_runs = 40;
    let mut mean_angle = vec![0.0; grid.times.len()];
    let mut drift = 0.0f64;
    for k in 0..n_runs {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + k);
        let z1 = sample_prior(s.fs.m(), &mut rng);
        let traj = run_trajectory(&model, &s.fs, &s.ctx, z1, &grid, &anneal, &sched, &mut RngNoise(&mut rng)).unwrap();
        for (i, z) in traj.poses.iter().enumerate() {
            for (a, b) in z.transforms.iter().zip(&s.z0.transforms) {
                mean_angle[i] += geodesic_angle(&(b.rotation.transpose() * a.rotation));
                drift = drift.max(a.rotation.orthonormality_error());
            }
        }
    }
    assert!(drift < 1e-8);
    // Compare quarters of the trajectory so Monte Carlo noise cannot flip the order.
    let q = |r: std::ops::Range<usize>| r.clone().map(|i| mean_angle[i]).sum::<f64>() / r.len() as f64;
    let (a, b, c, d) = (q(0..6), q(6..12), q(12..18), q(18..25));
    assert!(a > b && b > c && c > d, "{a} {b} {c} {d}");
    assert!(mean_angle[24] / (n_runs as f64 * 3.0) < 0.1);
}

#[test]
fn scaling_roundtrip_and_pocket_jitter() {
    let s = setup();
    let x = Vec3::new(3.2, -1.7, 8.9);
    assert!((s.ctx.to_angstrom(&s.ctx.to_internal(&x)) - x).norm() < 1e-12);
    let pocket = fixtures::biphenyl_complex().pocket;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    assert_eq!(pocket_center(&pocket, 0.0, &mut rng).unwrap(), centroid(&pocket));
    let n = 4000;
    let c = centroid(&pocket);
    let var: f64 = (0..n)
        .map(|_| (pocket_center(&pocket, 0.5, &mut rng).unwrap() - c).norm_squared())
        .sum::<f64>()
        / n as f64;
    assert!((var / (3.0 * 0.25) - 1.0).abs() < 0.1, "variance {var}");
    assert!(pocket_center(&[], 0.5, &mut rng).is_err());
}
