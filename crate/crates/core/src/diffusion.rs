//! Forward noising on SE(3)^m, its conditional scores and the weighted
//! score-matching loss.
//!
//! Translations follow a variance-preserving Ornstein–Uhlenbeck process with a
//! linear `β(t)`; rotations follow Brownian motion on SO(3) whose marginal at
//! time `t` is the isotropic Gaussian with scale `σ(t)`. Time runs on `[0, 1]`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fragment::PoseState;
use crate::igso3::{loss_weight_translation, Igso3Table};
use crate::liegroup::{log_so3_total, RigidTransform, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSchedule {
    pub beta_min: f64,
    pub beta_max: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl Default for DiffusionSchedule {
    fn default() -> Self {
        DiffusionSchedule { beta_min: 0.1, beta_max: 20.0, sigma_min: 0.01, sigma_max: 2.5 }
    }
}

impl DiffusionSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_min > 0.0 && self.beta_max >= self.beta_min && self.beta_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < beta_min <= beta_max, got [{}, {}]",
                self.beta_min, self.beta_max
            )));
        }
        if !(self.sigma_min > 0.0 && self.sigma_max > self.sigma_min && self.sigma_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < sigma_min < sigma_max, got [{}, {}]",
                self.sigma_min, self.sigma_max
            )));
        }
        Ok(())
    }

    pub fn beta(&self, t: f64) -> f64 {
        self.beta_min + t * (self.beta_max - self.beta_min)
    }

    /// `exp(−½ ∫₀ᵗ β)`.
    pub fn alpha(&self, t: f64) -> f64 {
        (-0.5 * (self.beta_min * t + 0.5 * t * t * (self.beta_max - self.beta_min))).exp()
    }

    /// `log(t e^{σ_max} + (1 − t) e^{σ_min})`.
    pub fn sigma(&self, t: f64) -> f64 {
        self.sigma_mix(t).ln()
    }

    fn sigma_mix(&self, t: f64) -> f64 {
        t * self.sigma_max.exp() + (1.0 - t) * self.sigma_min.exp()
    }

    pub fn sigma_dot(&self, t: f64) -> f64 {
        (self.sigma_max.exp() - self.sigma_min.exp()) / self.sigma_mix(t)
    }

    /// Rotational diffusion rate `d σ² / dt`.
    pub fn g(&self, t: f64) -> f64 {
        2.0 * self.sigma(t) * self.sigma_dot(t)
    }
}

/// Per-fragment score: a world-frame translation component and the
/// left-trivialized rotation coefficient `v` of the tangent `R [v]×`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TangentScore {
    pub translation: Vec<Vec3>,
    pub rotation: Vec<Vec3>,
}

impl TangentScore {
    pub fn zeros(m: usize) -> Self {
        TangentScore { translation: vec![Vec3::zeros(); m], rotation: vec![Vec3::zeros(); m] }
    }

    pub fn len(&self) -> usize {
        self.translation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.translation.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.translation.iter().chain(&self.rotation).all(|v| v.iter().all(|x| x.is_finite()))
    }
}

pub fn standard_normal_vec<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    Vec3::new(StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng))
}

/// Draws `z_t` given `z_0` independently per fragment.
pub fn forward_sample<R: Rng + ?Sized>(
    sched: &DiffusionSchedule,
    table: &Igso3Table,
    z0: &PoseState,
    t: f64,
    rng: &mut R,
) -> Result<PoseState> {
    let alpha = sched.alpha(t);
    let std = (1.0 - alpha * alpha).sqrt();
    let sigma = sched.sigma(t);
    let mut transforms = Vec::with_capacity(z0.len());
    for tr in &z0.transforms {
        let p = tr.translation * alpha + standard_normal_vec(rng) * std;
        let r = table.sample_igso3(&tr.rotation, sigma, rng)?;
        transforms.push(RigidTransform::new(p, r));
    }
    Ok(PoseState { transforms })
}

/// Gradient of the log forward-kernel density at `z_t` given `z_0`.
pub fn conditional_score(
    sched: &DiffusionSchedule,
    table: &Igso3Table,
    zt: &PoseState,
    z0: &PoseState,
    t: f64,
) -> Result<TangentScore> {
    if zt.len() != z0.len() {
        return Err(Error::DimensionMismatch { expected: z0.len(), got: zt.len() });
    }
    let alpha = sched.alpha(t);
    let var = 1.0 - alpha * alpha;
    let sigma = sched.sigma(t);
    let mut out = TangentScore::zeros(zt.len());
    for (i, (a, b)) in zt.transforms.iter().zip(&z0.transforms).enumerate() {
        out.translation[i] = -(a.translation - b.translation * alpha) / var;
        let rel = b.rotation.transpose() * a.rotation;
        let v = log_so3_total(&rel);
        let omega = v.norm();
        out.rotation[i] = v * table.score_over_omega(omega, sigma)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossScales {
    pub c_p: f64,
    pub c_r: f64,
}

impl Default for LossScales {
    fn default() -> Self {
        LossScales { c_p: 1.0, c_r: 1.0 }
    }
}

/// `(λ_p(t), λ_R(t))`.
pub fn loss_weights(sched: &DiffusionSchedule, table: &Igso3Table, t: f64, scales: LossScales) -> Result<(f64, f64)> {
    let lp = loss_weight_translation(sched.alpha(t), scales.c_p);
    let lr = table.loss_weight_rotation(sched.sigma(t), scales.c_r)?;
    Ok((lp, lr))
}

/// `λ_p Σ‖Δp‖² + λ_R Σ‖Δv‖²`; with the `½ tr(S Sᵀ)` metric the rotational
/// norm of `R[v]×` is `‖v‖`.
pub fn score_matching_loss(
    model: &TangentScore,
    target: &TangentScore,
    t: f64,
    sched: &DiffusionSchedule,
    table: &Igso3Table,
    scales: LossScales,
) -> Result<f64> {
    if model.len() != target.len() || model.rotation.len() != target.rotation.len() {
        return Err(Error::DimensionMismatch { expected: target.len(), got: model.len() });
    }
    let (lp, lr) = loss_weights(sched, table, t, scales)?;
    let tr: f64 = model.translation.iter().zip(&target.translation).map(|(a, b)| (a - b).norm_squared()).sum();
    let rot: f64 = model.rotation.iter().zip(&target.rotation).map(|(a, b)| (a - b).norm_squared()).sum();
    Ok(lp * tr + lr * rot)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        let s = DiffusionSchedule::default();
        assert_eq!(s.alpha(0.0), 1.0);
        assert!((s.sigma(0.0) - s.sigma_min).abs() < 1e-15);
        assert!((s.sigma(1.0) - s.sigma_max).abs() < 1e-14);
        let c = DiffusionSchedule { beta_min: 1.0, beta_max: 1.0, ..s };
        assert!((c.alpha(1.0) - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn alpha_matches_quadrature() {
        let s = DiffusionSchedule::default();
        for k in 1..=100 {
            let t = k as f64 / 100.0;
            // Composite Simpson on the linear β is exact up to roundoff.
            let n = 64;
            let h = t / n as f64;
            let mut integral = s.beta(0.0) + s.beta(t);
            for j in 1..n {
                integral += if j % 2 == 1 { 4.0 } else { 2.0 } * s.beta(j as f64 * h);
            }
            integral *= h / 3.0;
            assert!((s.alpha(t) - (-0.5 * integral).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn g_matches_finite_difference() {
        let s = DiffusionSchedule::default();
        for k in 1..100 {
            let t = k as f64 / 100.0;
            let e = 1e-6;
            let fd = (s.sigma(t + e).powi(2) - s.sigma(t - e).powi(2)) / (2.0 * e);
            assert!((s.g(t) - fd).abs() < 1e-6 * fd.abs());
            assert!(s.g(t) > 0.0 && s.sigma_dot(t) > 0.0);
        }
    }

    #[test]
    fn loss_scales_quadratically() {
        let table = Igso3Table::build(crate::igso3::Igso3Params { n_sigma: 32, n_omega: 512, ..Default::default() }).unwrap();
        let s = DiffusionSchedule::default();
        let target = TangentScore {
            translation: vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, -2.0, 1.0)],
            rotation: vec![Vec3::new(0.1, 0.2, 0.3), Vec3::new(-0.5, 0.0, 0.4)],
        };
        assert_eq!(score_matching_loss(&target, &target, 0.4, &s, &table, LossScales::default()).unwrap(), 0.0);
        let zero = TangentScore::zeros(2);
        let l1 = score_matching_loss(&zero, &target, 0.4, &s, &table, LossScales::default()).unwrap();
        let doubled = TangentScore {
            translation: target.translation.iter().map(|v| v * 2.0).collect(),
            rotation: target.rotation.iter().map(|v| v * 2.0).collect(),
        };
        let l2 = score_matching_loss(&zero, &doubled, 0.4, &s, &table, LossScales::default()).unwrap();
        assert!((l2 - 4.0 * l1).abs() < 1e-12 * l2);
        assert!(score_matching_loss(&TangentScore::zeros(1), &target, 0.4, &s, &table, LossScales::default()).is_err());
    }
}
