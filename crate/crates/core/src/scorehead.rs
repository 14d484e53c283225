//! Score models: the force-to-score head, the model trait, an exact oracle
//! and a small trainable linear model.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::SymmetricEigen;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::{conditional_score, forward_sample, DiffusionSchedule, LossScales, TangentScore};
use crate::error::{Error, Result};
use crate::fragment::{FragmentSet, PoseState};
use crate::igso3::Igso3Table;
use crate::liegroup::{Mat3, RigidTransform, Vec3};

/// Relative singular-value cutoff for the inertia pseudo-inverse.
pub const INERTIA_RCOND: f64 = 1e-8;

/// Binding-site information in the model's coordinate frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DockContext {
    /// Pocket atoms, already centered and divided by `scale`.
    pub pocket: Vec<Vec3>,
    /// Pocket center in Å (the origin of the scaled frame).
    pub center: Vec3,
    /// Å per internal length unit.
    pub scale: f64,
}

impl DockContext {
    /// Centers Å pocket coordinates on `center` and divides by `scale`.
    pub fn new(pocket_angstrom: &[Vec3], center: Vec3, scale: f64) -> Result<Self> {
        if pocket_angstrom.is_empty() {
            return Err(Error::InvalidParameter("pocket has no atoms".into()));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {scale}")));
        }
        Ok(DockContext { pocket: pocket_angstrom.iter().map(|y| (y - center) / scale).collect(), center, scale })
    }

    pub fn to_internal(&self, x: &Vec3) -> Vec3 {
        (x - self.center) / self.scale
    }

    pub fn to_angstrom(&self, x: &Vec3) -> Vec3 {
        x * self.scale + self.center
    }
}

/// Anything that maps a noised pose to a per-fragment score.
pub trait ScoreModel: Send + Sync {
    fn score(&self, z: &PoseState, t: f64, fs: &FragmentSet, ctx: &DockContext) -> Result<TangentScore>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadOutput {
    /// Translational score `F / (n √(1 − α_t))`.
    pub translation: Vec3,
    /// Left-trivialized rotational coefficient `a` with score `R [a]×`.
    pub rotation: Vec3,
    /// World-frame rotational vector `w` with score `[w]× R` (`w = R a`).
    pub rotation_world: Vec3,
    /// `I⁺ τ`, the inertia-normalized torque.
    pub angular: Vec3,
    /// Whether the inertia tensor needed the pseudo-inverse.
    pub singular_inertia: bool,
}

/// `Σ (‖r‖² I − r rᵀ)` over offsets `r` from the reference point.
pub fn inertia_tensor(offsets: &[Vec3]) -> Mat3 {
    let mut m = Mat3::zeros();
    for r in offsets {
        m += Mat3::identity() * r.norm_squared() - r * r.transpose();
    }
    m
}

/// Moore–Penrose inverse of a symmetric positive semidefinite 3×3 matrix.
/// Returns the inverse and whether any eigenvalue was discarded.
pub fn pseudo_inverse_psd(m: &Mat3) -> (Mat3, bool) {
    let eig = SymmetricEigen::new(*m);
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut inv = Mat3::zeros();
    let mut dropped = false;
    for k in 0..3 {
        let lam = eig.eigenvalues[k];
        if max > 0.0 && lam.abs() > INERTIA_RCOND * max {
            let v = eig.eigenvectors.column(k);
            inv += v * v.transpose() / lam;
        } else {
            dropped = true;
        }
    }
    (inv, dropped)
}

/// Turns per-point forces on one fragment into its translational and rotational scores.
///
/// `coords` are current world positions and `pose.translation` the fragment
/// centroid. Torque and inertia are taken about that centroid.
pub fn newton_euler_head(
    forces: &[Vec3],
    coords: &[Vec3],
    pose: &RigidTransform,
    t: f64,
    sched: &DiffusionSchedule,
    table: &Igso3Table,
) -> Result<HeadOutput> {
    if forces.len() != coords.len() {
        return Err(Error::DimensionMismatch { expected: coords.len(), got: forces.len() });
    }
    if coords.is_empty() {
        return Err(Error::InvalidParameter("fragment has no points".into()));
    }
    let n = coords.len() as f64;
    let p = pose.translation;
    let offsets: Vec<Vec3> = coords.iter().map(|x| x - p).collect();
    let force: Vec3 = forces.iter().sum();
    let torque: Vec3 = offsets.iter().zip(forces).map(|(r, f)| r.cross(f)).sum();
    let (inv, singular) = pseudo_inverse_psd(&inertia_tensor(&offsets));
    let u = inv * torque;
    let alpha = sched.alpha(t);
    let translation = force / (n * (1.0 - alpha).sqrt());
    let omega = u.norm();
    let h = table.score_over_omega(omega, sched.sigma(t))?;
    let rotation_world = -u * h;
    let rotation = pose.rotation.transpose().rotate(&rotation_world);
    Ok(HeadOutput { translation, rotation, rotation_world, angular: u, singular_inertia: singular })
}

/// Exact conditional score for a single known pose.
#[derive(Debug, Clone)]
pub struct OracleScore {
    pub z0: PoseState,
    pub sched: DiffusionSchedule,
    pub table: Arc<Igso3Table>,
}

impl OracleScore {
    pub fn new(z0: PoseState, sched: DiffusionSchedule, table: Arc<Igso3Table>) -> Self {
        OracleScore { z0, sched, table }
    }
}

impl ScoreModel for OracleScore {
    fn score(&self, z: &PoseState, t: f64, _fs: &FragmentSet, _ctx: &DockContext) -> Result<TangentScore> {
        conditional_score(&self.sched, &self.table, z, &self.z0, t)
    }
}

/// Shape of the toy model's features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub n_rbf: usize,
    /// Largest RBF center in Å; centers are evenly spaced from 0.
    pub rbf_max: f64,
    pub n_time: usize,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec { n_rbf: 16, rbf_max: 12.0, n_time: 8 }
    }
}

impl FeatureSpec {
    /// Pocket block then centroid block.
    pub fn n_weights(&self) -> usize {
        2 * self.n_rbf * self.n_time
    }

    fn spacing(&self) -> f64 {
        self.rbf_max / (self.n_rbf - 1) as f64
    }

    fn rbf(&self, d: f64, out: &mut [f64]) {
        let w = self.spacing();
        for (k, o) in out.iter_mut().enumerate() {
            let z = (d - k as f64 * w) / w;
            *o = (-0.5 * z * z).exp();
        }
    }

    /// `1, cos πt, sin πt, cos 2πt, sin 2πt, …`
    fn time(&self, t: f64, out: &mut [f64]) {
        for (m, o) in out.iter_mut().enumerate() {
            let f = m.div_ceil(2) as f64 * PI * t;
            *o = if m == 0 {
                1.0
            } else if m % 2 == 1 {
                f.cos()
            } else {
                f.sin()
            };
        }
    }
}

/// Per-point force linear in fixed features of pocket distances, distance to
/// the fragment centroid and time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyWeights {
    pub spec: FeatureSpec,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ToyModel {
    pub params: ToyWeights,
    pub sched: DiffusionSchedule,
    pub table: Arc<Igso3Table>,
}

/// Feature vectors `e_{f,i} ∈ R³` of one fragment, stored as `[f][i]`.
struct FragmentFeatures {
    coords: Vec<Vec3>,
    pose: RigidTransform,
    basis: Vec<Vec<Vec3>>,
}

impl ToyModel {
    pub fn zeros(spec: FeatureSpec, sched: DiffusionSchedule, table: Arc<Igso3Table>) -> Self {
        ToyModel { params: ToyWeights { spec, weights: vec![0.0; spec.n_weights()] }, sched, table }
    }

    fn features(&self, z: &PoseState, t: f64, fs: &FragmentSet, ctx: &DockContext) -> Result<Vec<FragmentFeatures>> {
        let spec = self.params.spec;
        let nf = spec.n_weights();
        let half = nf / 2;
        let mut rbf = vec![0.0; spec.n_rbf];
        let mut tf = vec![0.0; spec.n_time];
        spec.time(t, &mut tf);
        let points = fs.fragment_points(z)?;
        let mut out = Vec::with_capacity(points.len());
        for (pts, pose) in points.into_iter().zip(&z.transforms) {
            let mut basis = vec![vec![Vec3::zeros(); pts.len()]; nf];
            for (i, x) in pts.iter().enumerate() {
                for y in &ctx.pocket {
                    let diff = x - y;
                    let d = diff.norm();
                    if d < 1e-12 {
                        continue;
                    }
                    let dir = diff / d;
                    spec.rbf(d * ctx.scale, &mut rbf);
                    for (k, &phi) in rbf.iter().enumerate() {
                        if phi < 1e-12 {
                            continue;
                        }
                        for (m, &psi) in tf.iter().enumerate() {
                            basis[k * spec.n_time + m][i] += dir * (phi * psi);
                        }
                    }
                }
                let r = x - pose.translation;
                let d = r.norm();
                if d > 1e-12 {
                    spec.rbf(d * ctx.scale, &mut rbf);
                    for (k, &phi) in rbf.iter().enumerate() {
                        for (m, &psi) in tf.iter().enumerate() {
                            basis[half + k * spec.n_time + m][i] = r / d * (phi * psi);
                        }
                    }
                }
            }
            out.push(FragmentFeatures { coords: pts, pose: *pose, basis });
        }
        Ok(out)
    }

    fn forces(&self, feat: &FragmentFeatures) -> Vec<Vec3> {
        let mut f = vec![Vec3::zeros(); feat.coords.len()];
        for (w, col) in self.params.weights.iter().zip(&feat.basis) {
            if *w == 0.0 {
                continue;
            }
            for (fi, e) in f.iter_mut().zip(col) {
                *fi += e * *w;
            }
        }
        f
    }

    /// Weighted loss against `target` and its gradient in the weights.
    pub fn loss_and_gradient(
        &self,
        z: &PoseState,
        t: f64,
        fs: &FragmentSet,
        ctx: &DockContext,
        target: &TangentScore,
        scales: LossScales,
    ) -> Result<(f64, Vec<f64>)> {
        let (lp, lr) = crate::diffusion::loss_weights(&self.sched, &self.table, t, scales)?;
        let sigma = self.sched.sigma(t);
        let tr_scale = 1.0 / (1.0 - self.sched.alpha(t)).sqrt();
        let feats = self.features(z, t, fs, ctx)?;
        let nf = self.params.weights.len();
        let mut grad = vec![0.0; nf];
        let mut loss = 0.0;
        for (fi, feat) in feats.iter().enumerate() {
            let forces = self.forces(feat);
            let head = newton_euler_head(&forces, &feat.coords, &feat.pose, t, &self.sched, &self.table)?;
            let dp = head.translation - target.translation[fi];
            let dr = head.rotation - target.rotation[fi];
            loss += lp * dp.norm_squared() + lr * dr.norm_squared();

            let n = feat.coords.len() as f64;
            let offsets: Vec<Vec3> = feat.coords.iter().map(|x| x - feat.pose.translation).collect();
            let (inv, _) = pseudo_inverse_psd(&inertia_tensor(&offsets));
            let u = head.angular;
            let omega = u.norm();
            let h = self.table.score_over_omega(omega, sigma)?;
            let dh = self.table.score_over_omega_derivative(omega, sigma)?;
            let rt = feat.pose.rotation.transpose();
            for (f, col) in feat.basis.iter().enumerate() {
                let sum: Vec3 = col.iter().sum();
                let d_trans = sum * (tr_scale / n);
                let d_torque: Vec3 = offsets.iter().zip(col).map(|(r, e)| r.cross(e)).sum();
                let q = inv * d_torque;
                let mut d_world = q * h;
                if omega > 0.0 {
                    d_world += u * (dh * u.dot(&q) / omega);
                }
                let d_rot = -rt.rotate(&d_world);
                grad[f] += 2.0 * lp * dp.dot(&d_trans) + 2.0 * lr * dr.dot(&d_rot);
            }
        }
        Ok((loss, grad))
    }
}

impl ScoreModel for ToyModel {
    fn score(&self, z: &PoseState, t: f64, fs: &FragmentSet, ctx: &DockContext) -> Result<TangentScore> {
        let feats = self.features(z, t, fs, ctx)?;
        let mut out = TangentScore::zeros(feats.len());
        for (i, feat) in feats.iter().enumerate() {
            let forces = self.forces(feat);
            let head = newton_euler_head(&forces, &feat.coords, &feat.pose, t, &self.sched, &self.table)?;
            out.translation[i] = head.translation;
            out.rotation[i] = head.rotation;
        }
        Ok(out)
    }
}

/// One training complex: fragments and pocket in internal units, and the true pose.
#[derive(Debug, Clone)]
pub struct Datum {
    pub fs: FragmentSet,
    pub ctx: DockContext,
    pub z0: PoseState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    /// Noised samples per step.
    pub batch: usize,
    /// Training and evaluation times are drawn uniformly from `[t_lo, t_hi]`.
    pub t_lo: f64,
    pub t_hi: f64,
    /// Size of the fixed evaluation set per datum.
    pub eval_samples: usize,
    /// Steps between evaluations.
    pub eval_every: usize,
    pub scales: LossScales,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 2000,
            learning_rate: 0.001,
            batch: 16,
            t_lo: 0.05,
            t_hi: 1.0,
            eval_samples: 256,
            eval_every: 50,
            scales: LossScales::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    /// `(step, evaluation loss)` every `eval_every` steps.
    pub eval_history: Vec<(usize, f64)>,
    /// Mean batch loss per step.
    pub batch_losses: Vec<f64>,
}

struct EvalPoint {
    datum: usize,
    t: f64,
    z: PoseState,
    target: TangentScore,
}

fn draw_point<R: Rng + ?Sized>(
    data: &[Datum],
    sched: &DiffusionSchedule,
    table: &Igso3Table,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<EvalPoint> {
    let datum = rng.random_range(0..data.len());
    let t = rng.random_range(cfg.t_lo..=cfg.t_hi);
    let d = &data[datum];
    let z = forward_sample(sched, table, &d.z0, t, rng)?;
    let target = conditional_score(sched, table, &z, &d.z0, t)?;
    Ok(EvalPoint { datum, t, z, target })
}

fn mean_loss(model: &ToyModel, data: &[Datum], points: &[EvalPoint], scales: LossScales) -> Result<f64> {
    let mut total = 0.0;
    for p in points {
        let d = &data[p.datum];
        let s = model.score(&p.z, p.t, &d.fs, &d.ctx)?;
        total += crate::diffusion::score_matching_loss(&s, &p.target, p.t, &model.sched, &model.table, scales)?;
    }
    Ok(total / points.len() as f64)
}

/// Fits the toy model by Adam on freshly noised samples each step.
///
/// Progress is measured on a fixed evaluation set drawn up front; training
/// aborts with [`Error::Divergence`] if that loss exceeds ten times its
/// initial value.
pub fn toy_model_train<R: Rng + ?Sized>(
    data: &[Datum],
    spec: FeatureSpec,
    sched: DiffusionSchedule,
    table: Arc<Igso3Table>,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(ToyModel, TrainReport)> {
    if data.is_empty() {
        return Err(Error::InvalidParameter("training set is empty".into()));
    }
    if !(cfg.t_lo > 0.0 && cfg.t_lo <= cfg.t_hi && cfg.t_hi <= 1.0) {
        return Err(Error::InvalidParameter("training times must satisfy 0 < t_lo <= t_hi <= 1".into()));
    }
    let mut model = ToyModel::zeros(spec, sched, table.clone());
    let eval: Vec<EvalPoint> = (0..cfg.eval_samples.max(1))
        .map(|_| draw_point(data, &sched, &table, cfg, rng))
        .collect::<Result<_>>()?;
    let initial = mean_loss(&model, data, &eval, cfg.scales)?;
    let mut report = TrainReport { initial_loss: initial, ..Default::default() };
    report.eval_history.push((0, initial));

    let nw = spec.n_weights();
    let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut m1 = vec![0.0; nw];
    let mut m2 = vec![0.0; nw];
    for step in 1..=cfg.steps {
        let mut grad = vec![0.0; nw];
        let mut batch_loss = 0.0;
        for _ in 0..cfg.batch.max(1) {
            let p = draw_point(data, &sched, &table, cfg, rng)?;
            let d = &data[p.datum];
            let (l, g) = model.loss_and_gradient(&p.z, p.t, &d.fs, &d.ctx, &p.target, cfg.scales)?;
            batch_loss += l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        let inv_b = 1.0 / cfg.batch.max(1) as f64;
        report.batch_losses.push(batch_loss * inv_b);
        let c1 = 1.0 - b1.powi(step as i32);
        let c2 = 1.0 - b2.powi(step as i32);
        for k in 0..nw {
            let g = grad[k] * inv_b;
            m1[k] = b1 * m1[k] + (1.0 - b1) * g;
            m2[k] = b2 * m2[k] + (1.0 - b2) * g * g;
            model.params.weights[k] -= cfg.learning_rate * (m1[k] / c1) / ((m2[k] / c2).sqrt() + eps);
        }
        if step % cfg.eval_every.max(1) == 0 || step == cfg.steps {
            let l = mean_loss(&model, data, &eval, cfg.scales)?;
            if !l.is_finite() || l > 10.0 * initial {
                return Err(Error::Divergence { step, loss: l, initial });
            }
            report.eval_history.push((step, l));
        }
    }
    report.final_loss = report.eval_history.last().map(|&(_, l)| l).unwrap_or(initial);
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pseudo_inverse_of_rank_one() {
        let v = Vec3::new(1.0, 2.0, 2.0) / 3.0;
        let m = v * v.transpose() * 4.0;
        let (inv, dropped) = pseudo_inverse_psd(&m);
        assert!(dropped);
        assert!((inv * v - v / 4.0).norm() < 1e-12);
        let (inv, dropped) = pseudo_inverse_psd(&Mat3::identity());
        assert!(!dropped);
        assert!((inv - Mat3::identity()).norm() < 1e-12);
        let (inv, dropped) = pseudo_inverse_psd(&Mat3::zeros());
        assert!(dropped && inv == Mat3::zeros());
    }

    #[test]
    fn time_and_rbf_features() {
        let spec = FeatureSpec::default();
        let mut t = vec![0.0; 8];
        spec.time(0.25, &mut t);
        assert_eq!(t[0], 1.0);
        assert!((t[1] - (PI * 0.25).cos()).abs() < 1e-15);
        assert!((t[2] - (PI * 0.25).sin()).abs() < 1e-15);
        assert!((t[3] - (2.0 * PI * 0.25).cos()).abs() < 1e-15);
        let mut r = vec![0.0; 16];
        spec.rbf(0.8, &mut r);
        assert!((r[1] - 1.0).abs() < 1e-12);
        assert_eq!(spec.n_weights(), 256);
    }
}
