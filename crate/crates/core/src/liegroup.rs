//! Exact SO(3) and SE(3) primitives.
//!
//! Rotations are stored as explicit 3×3 matrices. The so(3) basis follows the
//! usual convention: `hat(e_3)` has `-1` at (0, 1) and `+1` at (1, 0).

use nalgebra::{Matrix3, Vector3, SVD};
use serde::{Deserialize, Serialize};
use std::ops::Mul;

use crate::error::LieError;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Below this angle `exp`/`log` switch to their Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-6;

/// `log_so3` refuses rotations whose trace is within this of `-1`.
pub const NEAR_PI_TRACE_EPS: f64 = 1e-9;

/// Drift in `RᵀR - I` beyond which products are projected back onto SO(3).
pub const ORTHONORMAL_DRIFT: f64 = 1e-10;

/// Skew-symmetric matrix `[v]×` with `hat(v) * w == v × w`.
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Reads the antisymmetric part, so it tolerates a
/// slightly non-skew input.
pub fn vee(m: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// A rotation matrix in SO(3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Wraps a matrix that is known to be a rotation.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Rotation(m)
    }

    /// Validates orthonormality and orientation to within `1e-9`.
    pub fn try_from_matrix(m: Mat3) -> Result<Self, LieError> {
        let drift = orthonormality_error(&m);
        let det = m.determinant();
        if !m.iter().all(|x| x.is_finite()) || drift > 1e-9 || (det - 1.0).abs() > 1e-9 {
            return Err(LieError::NotARotation { drift, det });
        }
        Ok(Rotation(m))
    }

    /// Nearest rotation in the Frobenius sense (polar projection).
    pub fn project(m: &Mat3) -> Self {
        let svd = SVD::new(*m, true, true);
        let u = svd.u.expect("3x3 SVD always yields U");
        let v_t = svd.v_t.expect("3x3 SVD always yields Vᵀ");
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut u = u;
            u.column_mut(2).neg_mut();
            r = u * v_t;
        }
        Rotation(r)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// `‖RᵀR − I‖∞`.
    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.0)
    }

    /// Re-projects onto SO(3) if accumulated drift exceeds [`ORTHONORMAL_DRIFT`].
    pub fn renormalized(self) -> Self {
        if self.orthonormality_error() > ORTHONORMAL_DRIFT {
            Rotation::project(&self.0)
        } else {
            self
        }
    }

    pub fn to_rows(&self) -> [[f64; 3]; 3] {
        let m = &self.0;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Rotation::identity()
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0).renormalized()
    }
}

impl Mul<&Rotation> for &Rotation {
    type Output = Rotation;
    fn mul(self, rhs: &Rotation) -> Rotation {
        *self * *rhs
    }
}

impl TryFrom<[[f64; 3]; 3]> for Rotation {
    type Error = LieError;
    fn try_from(rows: [[f64; 3]; 3]) -> Result<Self, Self::Error> {
        Rotation::try_from_matrix(Mat3::from_fn(|i, j| rows[i][j]))
    }
}

impl From<Rotation> for [[f64; 3]; 3] {
    fn from(r: Rotation) -> Self {
        r.to_rows()
    }
}

fn orthonormality_error(m: &Mat3) -> f64 {
    (m.transpose() * m - Mat3::identity()).amax()
}

/// Unit axis and angle in `[0, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisAngle {
    pub axis: Vec3,
    pub angle: f64,
}

impl AxisAngle {
    /// Splits a rotation vector. The zero vector maps to angle 0 about `z`.
    pub fn from_rotation_vector(v: &Vec3) -> Self {
        let angle = v.norm();
        if angle == 0.0 {
            AxisAngle { axis: Vec3::z(), angle: 0.0 }
        } else {
            AxisAngle { axis: v / angle, angle }
        }
    }

    pub fn rotation_vector(&self) -> Vec3 {
        self.axis * self.angle
    }
}

/// Rodrigues' formula, with a second-order series below [`SMALL_ANGLE`].
pub fn exp_so3(v: &Vec3) -> Rotation {
    let theta = v.norm();
    let s = hat(v);
    let s2 = s * s;
    let (a, b) = if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    };
    Rotation(Mat3::identity() + s * a + s2 * b)
}

/// `(sin ω, cos ω)` of the rotation angle, read from the antisymmetric part
/// and the trace respectively.
fn angle_sin_cos(r: &Mat3) -> (f64, f64) {
    let sin = vee(r).norm();
    let cos = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    (sin.min(1.0), cos)
}

/// Geodesic distance from the identity, in `[0, π]`.
pub fn geodesic_angle(r: &Rotation) -> f64 {
    let (sin, cos) = angle_sin_cos(&r.0);
    sin.atan2(cos)
}

/// Rotation vector `v` with `exp_so3(v) == r`.
pub fn log_so3(r: &Rotation) -> Result<Vec3, LieError> {
    let trace = r.0.trace();
    if trace <= -1.0 + NEAR_PI_TRACE_EPS {
        return Err(LieError::AngleNearPi { trace });
    }
    let axis_sin = vee(&r.0);
    let (sin, cos) = angle_sin_cos(&r.0);
    let theta = sin.atan2(cos);
    let scale = if theta < SMALL_ANGLE {
        1.0 + theta * theta / 6.0
    } else {
        theta / theta.sin()
    };
    Ok(axis_sin * scale)
}

/// Like [`log_so3`] but defined on all of SO(3). Near π the axis is read
/// from the symmetric part `cos θ I + (1 − cos θ) n nᵀ` and its sign from the
/// antisymmetric part; at exactly π either sign may come back.
pub fn log_so3_total(r: &Rotation) -> Vec3 {
    if let Ok(v) = log_so3(r) {
        return v;
    }
    let m = r.0;
    let (sin, cos) = angle_sin_cos(&m);
    let theta = sin.atan2(cos);
    let b = (m + m.transpose()) * 0.5 - Mat3::identity() * cos;
    let k = (0..3).max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)])).unwrap_or(0);
    let mut n: Vec3 = b.column(k).into_owned().normalize();
    if n.dot(&vee(&m)) < 0.0 {
        n = -n;
    }
    n * theta
}

/// Rigid motion `x ↦ p + R x`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RigidTransform {
    pub translation: Vec3,
    pub rotation: Rotation,
}

impl RigidTransform {
    pub fn new(translation: Vec3, rotation: Rotation) -> Self {
        RigidTransform { translation, rotation }
    }

    pub fn identity() -> Self {
        RigidTransform::default()
    }

    pub fn from_translation(translation: Vec3) -> Self {
        RigidTransform { translation, rotation: Rotation::identity() }
    }

    pub fn from_rotation(rotation: Rotation) -> Self {
        RigidTransform { translation: Vec3::zeros(), rotation }
    }

    pub fn apply_point(&self, x: &Vec3) -> Vec3 {
        self.translation + self.rotation.rotate(x)
    }

    pub fn apply(&self, points: &[Vec3]) -> Vec<Vec3> {
        points.iter().map(|x| self.apply_point(x)).collect()
    }

    /// `(p, R)·(p', R') = (p + R p', R R')`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            translation: self.translation + self.rotation.rotate(&other.translation),
            rotation: self.rotation * other.rotation,
        }
    }

    /// `(p, R)⁻¹ = (−R⁻¹ p, R⁻¹)`.
    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.inverse();
        RigidTransform { translation: -rt.rotate(&self.translation), rotation: rt }
    }
}

impl Mul for RigidTransform {
    type Output = RigidTransform;
    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        self.compose(&rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_vec(rng: &mut impl Rng, scale: f64) -> Vec3 {
        Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ) * scale
    }

    fn random_unit(rng: &mut impl Rng) -> Vec3 {
        loop {
            let v = random_vec(rng, 1.0);
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                return v / n;
            }
        }
    }

    fn random_rotation(rng: &mut impl Rng) -> Rotation {
        exp_so3(&(random_unit(rng) * rng.random_range(0.0..PI - 0.01)))
    }

    #[test]
    fn total_log_near_pi() {
        let n = Vec3::new(1.0, -2.0, 0.5).normalize();
        for theta in [PI - 1e-6, PI - 1e-9, PI] {
            let r = exp_so3(&(n * theta));
            let v = log_so3_total(&r);
            assert!((v.norm() - theta).abs() < 1e-7);
            assert!((exp_so3(&v).matrix() - r.matrix()).amax() < 1e-7);
        }
    }

    #[test]
    fn hat_of_zero_and_basis() {
        assert_eq!(hat(&Vec3::zeros()), Mat3::zeros());
        let e3 = hat(&Vec3::z());
        assert_eq!(e3[(0, 1)], -1.0);
        assert_eq!(e3[(1, 0)], 1.0);
        for (i, j) in [(0, 2), (2, 0), (1, 2), (2, 1)] {
            assert_eq!(e3[(i, j)], 0.0);
        }
    }

    #[test]
    fn hat_is_cross_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_vec(&mut rng, 3.0);
        let h = hat(&v);
        assert!((h + h.transpose()).amax() == 0.0);
        for _ in 0..10 {
            let w = random_vec(&mut rng, 3.0);
            assert!((h * w - v.cross(&w)).amax() < 1e-12);
        }
        assert!((vee(&h) - v).amax() < 1e-15);
    }

    #[test]
    fn exp_known_values() {
        assert_eq!(*exp_so3(&Vec3::zeros()).matrix(), Mat3::identity());
        let q = exp_so3(&Vec3::new(0.0, 0.0, FRAC_PI_2));
        let expected = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((q.matrix() - expected).amax() < 1e-15);
    }

    #[test]
    fn log_known_values() {
        assert_eq!(log_so3(&Rotation::identity()).unwrap(), Vec3::zeros());
        let q = Rotation::try_from_matrix(Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0))
            .unwrap();
        let v = log_so3(&q).unwrap();
        assert!((v - Vec3::new(0.0, 0.0, FRAC_PI_2)).amax() < 1e-15);
        assert!((geodesic_angle(&q) - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(geodesic_angle(&Rotation::identity()), 0.0);
    }

    #[test]
    fn log_rejects_half_turn() {
        let r = exp_so3(&(Vec3::new(1.0, 2.0, -0.5).normalize() * PI));
        assert!(matches!(log_so3(&r), Err(LieError::AngleNearPi { .. })));
    }

    #[test]
    fn exp_log_roundtrip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let v = random_unit(&mut rng) * rng.random_range(0.0..PI - 0.01);
            let r = exp_so3(&v);
            assert!(r.orthonormality_error() < 1e-14);
            assert!((r.matrix().determinant() - 1.0).abs() < 1e-12);
            let back = log_so3(&r).unwrap();
            assert!((back - v).norm() < 1e-9, "{v:?} -> {back:?}");
        }
    }

    #[test]
    fn small_angle_branches_agree_with_series() {
        for &t in &[0.0, 1e-12, 1e-8, 5e-7, 2e-6] {
            let v = Vec3::new(0.3, -0.4, 0.5).normalize() * t;
            let r = exp_so3(&v);
            let back = log_so3(&r).unwrap();
            assert!((back - v).norm() < 1e-15 + 1e-9 * t);
        }
    }

    #[test]
    fn geodesic_angle_matches_exponent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let w = rng.random_range(1e-6..PI);
            let r = exp_so3(&(random_unit(&mut rng) * w));
            assert!((geodesic_angle(&r) - w).abs() < 1e-10);
        }
    }

    #[test]
    fn conjugation_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let r = random_rotation(&mut rng);
            let v = random_vec(&mut rng, 2.0);
            let lhs = hat(&r.rotate(&v));
            let rhs = r.matrix() * hat(&v) * r.matrix().transpose();
            assert!((lhs - rhs).amax() < 1e-12);
        }
    }

    #[test]
    fn group_action_and_composition() {
        let p = [Vec3::new(0.0, 0.0, 0.0)];
        let t = RigidTransform::from_translation(Vec3::x());
        assert_eq!(t.apply(&p), vec![Vec3::x()]);
        assert_eq!(RigidTransform::identity().apply(&p), p.to_vec());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let a = RigidTransform::new(random_vec(&mut rng, 5.0), random_rotation(&mut rng));
            let b = RigidTransform::new(random_vec(&mut rng, 5.0), random_rotation(&mut rng));
            let x = random_vec(&mut rng, 5.0);
            let lhs = a.compose(&b).apply_point(&x);
            let rhs = a.apply_point(&b.apply_point(&x));
            assert!((lhs - rhs).amax() < 1e-12);

            let e = RigidTransform::identity().compose(&a);
            assert!((e.translation - a.translation).amax() == 0.0);
            let id = a.compose(&a.inverse());
            assert!(id.translation.amax() < 1e-12);
            assert!((id.rotation.matrix() - Mat3::identity()).amax() < 1e-12);

            let inv = a.inverse();
            let expect = -(a.rotation.matrix().transpose() * a.translation);
            assert!((inv.translation - expect).amax() < 1e-15);
        }
    }

    #[test]
    fn long_composition_chain_stays_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut r = Rotation::identity();
        for _ in 0..1000 {
            r = r * random_rotation(&mut rng);
        }
        assert!(r.orthonormality_error() < 1e-8);
    }

    #[test]
    fn projection_recovers_rotation() {
        let r = exp_so3(&Vec3::new(0.2, 0.1, -0.3));
        let noisy = r.matrix() + Mat3::from_element(1e-7);
        let p = Rotation::project(&noisy);
        assert!(p.orthonormality_error() < 1e-14);
        assert!((p.matrix() - r.matrix()).amax() < 1e-6);
        assert!(Rotation::try_from_matrix(noisy).is_err());
    }
}
