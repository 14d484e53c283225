//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::OnceLock;

use fragdiff_core::igso3::{Igso3Params, Igso3Table};
use fragdiff_core::liegroup::{exp_so3, Rotation, Vec3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Table with default parameters, built once per test binary.
pub fn table() -> &'static Igso3Table {
    static T: OnceLock<Igso3Table> = OnceLock::new();
    T.get_or_init(|| Igso3Table::build(Igso3Params::default()).expect("default table builds"))
}

/// `f0(ω, σ) = Σ (2l+1) e^{−l(l+1)σ²/2} sin((l+½)ω) / sin(ω/2)`, summed directly.
pub fn series_f0(omega: f64, sigma: f64, l_max: usize) -> f64 {
    let mut s = 0.0;
    for l in 0..=l_max {
        let lf = l as f64;
        let w = (-lf * (lf + 1.0) * sigma * sigma / 2.0).exp();
        if w == 0.0 {
            break;
        }
        let ratio = if omega.abs() < 1e-12 {
            2.0 * lf + 1.0
        } else {
            ((lf + 0.5) * omega).sin() / (omega / 2.0).sin()
        };
        s += (2.0 * lf + 1.0) * w * ratio;
    }
    s
}

/// Angle density on `[0, π]` from the direct series.
pub fn series_density(omega: f64, sigma: f64) -> f64 {
    (1.0 - omega.cos()) / PI * series_f0(omega, sigma, 2000)
}

pub fn uniform_angle_density(omega: f64) -> f64 {
    (1.0 - omega.cos()) / PI
}

/// `∫₀^ω (1 − cos x)/π dx`.
pub fn uniform_angle_cdf(omega: f64) -> f64 {
    (omega - omega.sin()) / PI
}

/// Standard normal CDF via a Simpson quadrature of the density.
pub fn normal_cdf(x: f64) -> f64 {
    if x < -9.0 {
        return 0.0;
    }
    if x > 9.0 {
        return 1.0;
    }
    let n = 2000;
    let (a, b) = (0.0f64, x);
    let h = (b - a) / n as f64;
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
    let mut s = pdf(a) + pdf(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(a + i as f64 * h);
    }
    0.5 + s * h / 3.0
}

/// Two-sided Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    d
}

pub fn normal_vec<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    Vec3::new(StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng))
}

/// Rotation from a Gaussian tangent, not Haar distributed.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    exp_so3(&(normal_vec(rng) * 1.5))
}

pub fn max_abs_diff(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max)
}
