//! Reverse-time generation on SE(3)^m.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{standard_normal_vec, DiffusionSchedule};
use crate::error::{Error, Result};
use crate::fragment::{centroid, FragmentSet, PoseState};
use crate::igso3::sample_uniform_so3;
use crate::liegroup::{exp_so3, RigidTransform, Rotation, Vec3};
use crate::scorehead::{DockContext, ScoreModel};

/// Å per internal length unit.
pub const DEFAULT_SCALE: f64 = 2.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub n_steps: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub rho: f64,
    /// From `t_max` down to `t_min`.
    pub times: Vec<f64>,
}

/// `t_k = (t_max^{1/ρ} + k/(N−1) (t_min^{1/ρ} − t_max^{1/ρ}))^ρ`.
pub fn karras_grid(n: usize, t_min: f64, t_max: f64, rho: f64) -> Result<TimeGrid> {
    if n < 2 || !(t_min > 0.0 && t_min < t_max && t_max <= 1.0) || !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "grid needs N >= 2, 0 < t_min < t_max <= 1, rho > 0; got N={n}, t=[{t_min}, {t_max}], rho={rho}"
        )));
    }
    let times = karras_values(n, t_min, t_max, rho);
    Ok(TimeGrid { n_steps: n, t_min, t_max, rho, times })
}

fn karras_values(n: usize, lo: f64, hi: f64, rho: f64) -> Vec<f64> {
    let a = hi.powf(1.0 / rho);
    let b = lo.powf(1.0 / rho);
    let mut v: Vec<f64> = (0..n).map(|k| (a + k as f64 / (n - 1) as f64 * (b - a)).powf(rho)).collect();
    v[0] = hi;
    v[n - 1] = lo;
    v
}

/// Noise scale per step, following the same spacing as the time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub rho: f64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule { gamma_min: 0.0, gamma_max: 0.5, rho: 2.0 }
    }
}

impl AnnealSchedule {
    pub fn deterministic() -> Self {
        AnnealSchedule { gamma_min: 0.0, gamma_max: 0.0, rho: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_min >= 0.0 && self.gamma_max >= self.gamma_min && self.rho > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "anneal needs 0 <= gamma_min <= gamma_max and rho > 0, got {self:?}"
            )));
        }
        Ok(())
    }

    /// `γ_k` aligned with `t_k`: the largest value at `t_max`.
    pub fn gammas(&self, n: usize) -> Vec<f64> {
        if self.gamma_max == self.gamma_min || n < 2 {
            return vec![self.gamma_max; n];
        }
        karras_values(n, self.gamma_min, self.gamma_max, self.rho)
    }
}

/// `p + Δt (½ β p + β s_p) + γ √(Δt β) ε`.
pub fn reverse_translation_step(
    p: &Vec3,
    s_p: &Vec3,
    t: f64,
    dt: f64,
    gamma: f64,
    sched: &DiffusionSchedule,
    noise: &Vec3,
) -> Vec3 {
    let beta = sched.beta(t);
    p + (p * 0.5 + s_p) * (dt * beta) + noise * (gamma * (dt * beta).sqrt())
}

/// `R exp([Δt g a + γ √(Δt g) ε]×)` for left coefficient `a`.
pub fn reverse_rotation_step(
    r: &Rotation,
    a: &Vec3,
    t: f64,
    dt: f64,
    gamma: f64,
    sched: &DiffusionSchedule,
    noise: &Vec3,
) -> Rotation {
    let g = sched.g(t);
    let v = a * (dt * g) + noise * (gamma * (dt * g).sqrt());
    (*r * exp_so3(&v)).renormalized()
}

/// Source of the standard-normal draws consumed by a trajectory, per step and fragment.
pub trait NoiseSource {
    /// `(translation noise, rotation noise)`.
    fn draw(&mut self, step: usize, fragment: usize) -> (Vec3, Vec3);
}

pub struct RngNoise<'a, R: Rng + ?Sized>(pub &'a mut R);

impl<R: Rng + ?Sized> NoiseSource for RngNoise<'_, R> {
    fn draw(&mut self, _step: usize, _fragment: usize) -> (Vec3, Vec3) {
        let a = standard_normal_vec(self.0);
        let b = standard_normal_vec(self.0);
        (a, b)
    }
}

/// Prior draw: `p ~ N(0, I)` and uniform `R`, per fragment.
pub fn sample_prior<R: Rng + ?Sized>(m: usize, rng: &mut R) -> PoseState {
    PoseState {
        transforms: (0..m)
            .map(|_| {
                let p = standard_normal_vec(rng);
                RigidTransform::new(p, sample_uniform_so3(rng))
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    /// Poses at every grid time, starting with the initial state.
    pub poses: Vec<PoseState>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&PoseState> {
        self.poses.last()
    }
}

/// Runs the reverse steps over `grid` from `z_init`.
#[allow(clippy::too_many_arguments)]
pub fn run_trajectory(
    model: &dyn ScoreModel,
    fs: &FragmentSet,
    ctx: &DockContext,
    z_init: PoseState,
    grid: &TimeGrid,
    anneal: &AnnealSchedule,
    sched: &DiffusionSchedule,
    noise: &mut dyn NoiseSource,
) -> Result<Trajectory> {
    if z_init.len() != fs.m() {
        return Err(Error::DimensionMismatch { expected: fs.m(), got: z_init.len() });
    }
    let gammas = anneal.gammas(grid.times.len());
    let mut poses = Vec::with_capacity(grid.times.len());
    let mut z = z_init;
    poses.push(z.clone());
    for step in 0..grid.times.len() - 1 {
        let t = grid.times[step];
        let dt = t - grid.times[step + 1];
        let gamma = gammas[step];
        let s = model.score(&z, t, fs, ctx)?;
        if s.len() != z.len() {
            return Err(Error::DimensionMismatch { expected: z.len(), got: s.len() });
        }
        if !s.is_finite() {
            return Err(Error::NonFinite("score"));
        }
        let mut next = Vec::with_capacity(z.len());
        for (i, tr) in z.transforms.iter().enumerate() {
            let (n_p, n_r) = noise.draw(step, i);
            let p = reverse_translation_step(&tr.translation, &s.translation[i], t, dt, gamma, sched, &n_p);
            let r = reverse_rotation_step(&tr.rotation, &s.rotation[i], t, dt, gamma, sched, &n_r);
            next.push(RigidTransform::new(p, r));
        }
        z = PoseState { transforms: next };
        poses.push(z.clone());
    }
    Ok(Trajectory { poses })
}

/// Pose of `coords` (Å) in the internal frame of `ctx`, using the local
/// frames of `fs` (identity rotations, centroid translations).
pub fn internal_pose(fs: &FragmentSet, coords: &[Vec3], ctx: &DockContext) -> Result<PoseState> {
    if coords.len() != fs.n_atoms() {
        return Err(Error::DimensionMismatch { expected: fs.n_atoms(), got: coords.len() });
    }
    Ok(PoseState {
        transforms: fs
            .fragments
            .iter()
            .map(|f| {
                let pts: Vec<Vec3> = f.members.iter().map(|m| ctx.to_internal(&coords[m.atom])).collect();
                RigidTransform::from_translation(centroid(&pts))
            })
            .collect(),
    })
}

/// Pocket center, optionally jittered by `N(0, σ_CoM² I)`.
pub fn pocket_center<R: Rng + ?Sized>(pocket: &[Vec3], sigma_com: f64, rng: &mut R) -> Result<Vec3> {
    if pocket.is_empty() {
        return Err(Error::InvalidParameter("pocket has no atoms".into()));
    }
    let c = centroid(pocket);
    Ok(if sigma_com > 0.0 { c + standard_normal_vec(rng) * sigma_com } else { c })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutput {
    pub seed_index: usize,
    /// Final pose in internal units.
    pub pose: PoseState,
    /// Ligand coordinates in Å.
    pub coords: Vec<Vec3>,
    pub final_t: f64,
    pub steps: usize,
    pub wall_seconds: f64,
}

/// Independent random stream for seed `index` under `master`.
pub fn seed_rng(master: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64);
    rng
}

#[derive(Debug, Clone, Copy)]
pub struct SampleConfig<'a> {
    pub grid: &'a TimeGrid,
    pub anneal: &'a AnnealSchedule,
    pub sched: &'a DiffusionSchedule,
    pub master_seed: u64,
    pub n_seeds: usize,
}

/// Draws `n_seeds` poses in parallel. `fs` must already be in internal units.
/// A failing seed yields its error without affecting the others.
pub fn sample(
    model: &dyn ScoreModel,
    fs: &FragmentSet,
    ctx: &DockContext,
    cfg: SampleConfig<'_>,
) -> Vec<Result<SampleOutput>> {
    (0..cfg.n_seeds)
        .into_par_iter()
        .map(|k| {
            let start = Instant::now();
            let mut rng = seed_rng(cfg.master_seed, k);
            let z1 = sample_prior(fs.m(), &mut rng);
            let traj = run_trajectory(model, fs, ctx, z1, cfg.grid, cfg.anneal, cfg.sched, &mut RngNoise(&mut rng))?;
            let pose = traj.poses.last().cloned().unwrap_or_default();
            let coords = fs.phi(&pose)?.iter().map(|x| ctx.to_angstrom(x)).collect();
            Ok(SampleOutput {
                seed_index: k,
                pose,
                coords,
                final_t: cfg.grid.t_min,
                steps: cfg.grid.times.len() - 1,
                wall_seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}
