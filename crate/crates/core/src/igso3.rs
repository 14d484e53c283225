//! Isotropic Gaussian distribution on SO(3).
//!
//! The angle density is `f(ω, σ) = (1 − cos ω)/π · f0(ω, σ)` with
//!
//! ```text
//! f0(ω, σ) = Σ_l (2l + 1) exp(−l(l + 1) σ² / 2) χ_l(ω),   χ_l(ω) = sin((l + ½) ω) / sin(ω / 2)
//! ```
//!
//! `f0` is the density with respect to the Haar measure, so the score of the
//! distribution at a rotation with angle `ω` from the mean has magnitude
//! `∂_ω f0 / f0`. Everything is tabulated once on a `(ω, log σ)` grid and
//! bilinearly interpolated afterwards.

use std::f64::consts::PI;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::liegroup::{exp_so3, Rotation, Vec3};

/// Below this angle `∂_ω f0 / (ω f0)` is replaced by its limit at zero.
pub const SMALL_OMEGA: f64 = 1e-3;

/// Points where `f0` falls below this fraction of its row maximum are treated
/// as numerically unresolved: the alternating series cancels to roundoff there.
const RESOLVED_FRACTION: f64 = 1e-9;

/// Series terms whose Gaussian factor is below `exp(-UNDERFLOW_EXPONENT)` are dropped.
const UNDERFLOW_EXPONENT: f64 = 700.0;

const CACHE_MAGIC: &[u8; 8] = b"IGSO3TAB";
const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Igso3Params {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub n_sigma: usize,
    pub n_omega: usize,
    /// Highest series order `L`.
    pub truncation: usize,
}

impl Default for Igso3Params {
    fn default() -> Self {
        Igso3Params { sigma_min: 0.01, sigma_max: 10.0, n_sigma: 256, n_omega: 2048, truncation: 2000 }
    }
}

impl Igso3Params {
    pub fn validate(&self) -> Result<()> {
        let p = self;
        if !(p.sigma_min > 0.0 && p.sigma_min < p.sigma_max && p.sigma_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < sigma_min < sigma_max, got [{}, {}]",
                p.sigma_min, p.sigma_max
            )));
        }
        if p.n_sigma < 2 {
            return Err(Error::InvalidParameter("n_sigma must be at least 2".into()));
        }
        if p.n_omega < 512 {
            return Err(Error::InvalidParameter("n_omega must be at least 512".into()));
        }
        if p.truncation < 100 {
            return Err(Error::InvalidParameter("series truncation must be at least 100".into()));
        }
        Ok(())
    }
}

/// Series value and `ω`-derivative of `f0` at one angle, by three-term recurrence on `χ_l`.
fn series_point(omega: f64, weights: &[f64]) -> (f64, f64) {
    let (s, c) = omega.sin_cos();
    let mut chi_prev = 1.0;
    let mut dchi_prev = 0.0;
    let mut f0 = weights[0];
    let mut df0 = 0.0;
    if weights.len() == 1 {
        return (f0, df0);
    }
    let mut chi = 1.0 + 2.0 * c;
    let mut dchi = -2.0 * s;
    f0 += weights[1] * chi;
    df0 += weights[1] * dchi;
    for &w in &weights[2..] {
        let chi_next = 2.0 * c * chi - chi_prev;
        let dchi_next = 2.0 * c * dchi - 2.0 * s * chi - dchi_prev;
        chi_prev = chi;
        dchi_prev = dchi;
        chi = chi_next;
        dchi = dchi_next;
        f0 += w * chi;
        df0 += w * dchi;
    }
    (f0, df0)
}

fn series_weights(sigma: f64, truncation: usize) -> Vec<f64> {
    let half_var = 0.5 * sigma * sigma;
    let mut w = Vec::new();
    for l in 0..=truncation {
        let lf = l as f64;
        let expo = lf * (lf + 1.0) * half_var;
        if expo > UNDERFLOW_EXPONENT {
            break;
        }
        w.push((2.0 * lf + 1.0) * (-expo).exp());
    }
    w
}

struct Row {
    density: Vec<f64>,
    cdf: Vec<f64>,
    score: Vec<f64>,
    slope_at_zero: f64,
    mean_sq_score: f64,
}

fn build_row(sigma: f64, n_omega: usize, truncation: usize) -> Result<Row> {
    let h = PI / n_omega as f64;
    let weights = series_weights(sigma, truncation);

    let mut f0 = vec![0.0; n_omega + 1];
    let mut df0 = vec![0.0; n_omega + 1];
    for j in 0..=n_omega {
        let (v, d) = series_point(j as f64 * h, &weights);
        f0[j] = v;
        df0[j] = d;
    }

    // d²χ_l/dω² at 0 is −l(l+1)(2l+1)/3; f0'(0) = 0, so (f0'/f0)'(0) = f0''(0)/f0(0).
    let mut second = 0.0;
    for (l, w) in weights.iter().enumerate() {
        let lf = l as f64;
        second -= w * lf * (lf + 1.0) * (2.0 * lf + 1.0) / 3.0;
    }
    let slope_at_zero = second / f0[0];

    let peak = f0.iter().cloned().fold(f64::MIN, f64::max);
    let first_unresolved = (0..=n_omega).find(|&j| f0[j] < RESOLVED_FRACTION * peak);

    let mut density = vec![0.0; n_omega + 1];
    let mut negative_mass = 0.0;
    for j in 0..=n_omega {
        let omega = j as f64 * h;
        let d = (1.0 - omega.cos()) / PI * f0[j];
        let weight = if j == 0 || j == n_omega { 0.5 * h } else { h };
        if d < 0.0 {
            negative_mass += d * weight;
        }
        density[j] = d;
    }
    if negative_mass < -1e-6 {
        return Err(Error::TruncationInsufficient { sigma, mass: negative_mass });
    }

    let mut score = vec![0.0; n_omega + 1];
    for j in 1..=n_omega {
        score[j] = df0[j] / f0[j];
    }
    if let Some(start) = first_unresolved {
        // Continue the score linearly from the last two resolved grid points.
        let j2 = start.saturating_sub(1).max(2);
        let j1 = j2 - 1;
        let gradient = (score[j2] - score[j1]) / h;
        for j in start..=n_omega {
            score[j] = score[j2] + gradient * (j - j2) as f64 * h;
            density[j] = 0.0;
        }
    }
    for d in density.iter_mut() {
        if *d < 0.0 {
            *d = 0.0;
        }
    }

    let mut cdf = vec![0.0; n_omega + 1];
    for j in 1..=n_omega {
        cdf[j] = cdf[j - 1] + 0.5 * h * (density[j - 1] + density[j]);
    }
    let total = cdf[n_omega];
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::TruncationInsufficient { sigma, mass: total });
    }
    for v in cdf.iter_mut() {
        *v /= total;
    }
    cdf[n_omega] = 1.0;

    let mut mean_sq_score = 0.0;
    for j in 1..=n_omega {
        let a = density[j - 1] * score[j - 1] * score[j - 1];
        let b = density[j] * score[j] * score[j];
        mean_sq_score += 0.5 * h * (a + b);
    }
    mean_sq_score /= total;

    if score.iter().any(|s| !s.is_finite()) || !slope_at_zero.is_finite() {
        return Err(Error::NonFinite("IGSO(3) score row"));
    }

    Ok(Row { density, cdf, score, slope_at_zero, mean_sq_score })
}

/// Cached density, CDF and score coefficient on a `(ω, log σ)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Igso3Table {
    params: Igso3Params,
    sigmas: Vec<f64>,
    /// Row-major `[n_sigma][n_omega + 1]`; column 0 is `ω = 0`.
    density: Vec<f64>,
    cdf: Vec<f64>,
    score: Vec<f64>,
    slope_at_zero: Vec<f64>,
    mean_sq_score: Vec<f64>,
}

/// Location of `σ` between two table rows.
#[derive(Debug, Clone, Copy)]
struct SigmaCell {
    row: usize,
    /// Weight of `row + 1`.
    frac: f64,
}

impl Igso3Table {
    pub fn build(params: Igso3Params) -> Result<Self> {
        params.validate()?;
        let n = params.n_sigma;
        let log_min = params.sigma_min.ln();
        let log_max = params.sigma_max.ln();
        let mut sigmas: Vec<f64> = (0..n)
            .map(|k| (log_min + (log_max - log_min) * k as f64 / (n - 1) as f64).exp())
            .collect();
        sigmas[0] = params.sigma_min;
        sigmas[n - 1] = params.sigma_max;

        let rows: Vec<Row> = sigmas
            .par_iter()
            .map(|&s| build_row(s, params.n_omega, params.truncation))
            .collect::<Result<_>>()?;

        let width = params.n_omega + 1;
        let mut table = Igso3Table {
            params,
            sigmas,
            density: Vec::with_capacity(n * width),
            cdf: Vec::with_capacity(n * width),
            score: Vec::with_capacity(n * width),
            slope_at_zero: Vec::with_capacity(n),
            mean_sq_score: Vec::with_capacity(n),
        };
        for row in rows {
            table.density.extend_from_slice(&row.density);
            table.cdf.extend_from_slice(&row.cdf);
            table.score.extend_from_slice(&row.score);
            table.slope_at_zero.push(row.slope_at_zero);
            table.mean_sq_score.push(row.mean_sq_score);
        }
        Ok(table)
    }

    pub fn params(&self) -> &Igso3Params {
        &self.params
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn omega_step(&self) -> f64 {
        PI / self.params.n_omega as f64
    }

    /// Grid angles including the implicit `ω = 0` column.
    pub fn omegas(&self) -> Vec<f64> {
        let h = self.omega_step();
        (0..=self.params.n_omega).map(|j| j as f64 * h).collect()
    }

    fn width(&self) -> usize {
        self.params.n_omega + 1
    }

    pub fn density_row(&self, k: usize) -> &[f64] {
        &self.density[k * self.width()..(k + 1) * self.width()]
    }

    pub fn cdf_row(&self, k: usize) -> &[f64] {
        &self.cdf[k * self.width()..(k + 1) * self.width()]
    }

    pub fn score_row(&self, k: usize) -> &[f64] {
        &self.score[k * self.width()..(k + 1) * self.width()]
    }

    fn locate_sigma(&self, sigma: f64) -> Result<SigmaCell> {
        let lo = self.params.sigma_min;
        let hi = self.params.sigma_max;
        let slack = 1e-12;
        if !(sigma.is_finite() && sigma >= lo * (1.0 - slack) && sigma <= hi * (1.0 + slack)) {
            return Err(Error::OutOfRange { sigma, min: lo, max: hi });
        }
        let n = self.params.n_sigma;
        let x = (sigma.ln() - lo.ln()) / (hi.ln() - lo.ln()) * (n - 1) as f64;
        let x = x.clamp(0.0, (n - 1) as f64);
        let row = (x.floor() as usize).min(n - 2);
        Ok(SigmaCell { row, frac: x - row as f64 })
    }

    fn locate_omega(&self, omega: f64) -> (usize, f64) {
        let n = self.params.n_omega;
        let x = (omega / self.omega_step()).clamp(0.0, n as f64);
        let j = (x.floor() as usize).min(n - 1);
        (j, x - j as f64)
    }

    fn bilinear(&self, data: &[f64], omega: f64, cell: SigmaCell) -> f64 {
        let w = self.width();
        let (j, s) = self.locate_omega(omega);
        let at = |k: usize| {
            let r = &data[k * w..(k + 1) * w];
            r[j] + s * (r[j + 1] - r[j])
        };
        (1.0 - cell.frac) * at(cell.row) + cell.frac * at(cell.row + 1)
    }

    /// Angle density `f(ω, σ)` on `[0, π]`.
    pub fn density(&self, omega: f64, sigma: f64) -> Result<f64> {
        let cell = self.locate_sigma(sigma)?;
        Ok(self.bilinear(&self.density, omega, cell).max(0.0))
    }

    /// `∂_ω f0 / f0` at `(ω, σ)`.
    pub fn score_coeff(&self, omega: f64, sigma: f64) -> Result<f64> {
        let cell = self.locate_sigma(sigma)?;
        Ok(self.bilinear(&self.score, omega, cell))
    }

    /// `(∂_ω f0 / f0) / ω`, finite at `ω = 0`.
    pub fn score_over_omega(&self, omega: f64, sigma: f64) -> Result<f64> {
        let cell = self.locate_sigma(sigma)?;
        if omega < SMALL_OMEGA {
            let a = self.slope_at_zero[cell.row];
            let b = self.slope_at_zero[cell.row + 1];
            Ok(a + cell.frac * (b - a))
        } else {
            Ok(self.bilinear(&self.score, omega, cell) / omega)
        }
    }

    /// Derivative in `ω` of [`Self::score_over_omega`] for the interpolant.
    ///
    /// Within a grid cell `c(ω) = a + b ω`, so `c/ω` has derivative `−a/ω²`.
    pub fn score_over_omega_derivative(&self, omega: f64, sigma: f64) -> Result<f64> {
        let cell = self.locate_sigma(sigma)?;
        if omega < SMALL_OMEGA {
            return Ok(0.0);
        }
        if omega >= PI {
            // The interpolant is held constant beyond π.
            return Ok(-self.bilinear(&self.score, PI, cell) / (omega * omega));
        }
        let w = self.width();
        let h = self.omega_step();
        let (j, _) = self.locate_omega(omega);
        let intercept = |k: usize| {
            let r = &self.score[k * w..(k + 1) * w];
            let b = (r[j + 1] - r[j]) / h;
            r[j] - b * j as f64 * h
        };
        let a = (1.0 - cell.frac) * intercept(cell.row) + cell.frac * intercept(cell.row + 1);
        Ok(-a / (omega * omega))
    }

    /// CDF of the interpolated density, `P(angle ≤ ω)`.
    pub fn cdf(&self, omega: f64, sigma: f64) -> Result<f64> {
        let cell = self.locate_sigma(sigma)?;
        let (j, s) = self.locate_omega(omega);
        let h = self.omega_step();
        let row_cdf = |k: usize| {
            let d = self.density_row(k);
            let c = self.cdf_row(k);
            let total = self.row_total(k);
            // Exact integral of the linear density over the partial cell.
            let partial = h * (d[j] * s + 0.5 * (d[j + 1] - d[j]) * s * s) / total;
            (c[j] + partial).min(1.0)
        };
        Ok((1.0 - cell.frac) * row_cdf(cell.row) + cell.frac * row_cdf(cell.row + 1))
    }

    fn row_total(&self, k: usize) -> f64 {
        let d = self.density_row(k);
        let h = self.omega_step();
        d.windows(2).map(|p| 0.5 * h * (p[0] + p[1])).sum()
    }

    /// Samples an angle from one row by inverting its piecewise-quadratic CDF.
    fn sample_row(&self, k: usize, u: f64) -> f64 {
        let c = self.cdf_row(k);
        let d = self.density_row(k);
        let h = self.omega_step();
        let n = self.params.n_omega;
        let j = c.partition_point(|&v| v <= u).clamp(1, n) - 1;
        let total = self.row_total(k);
        // Solve h (d_j s + ½ (d_{j+1} − d_j) s²) / total = u − c_j for s ∈ [0, 1].
        let target = (u - c[j]).max(0.0) * total / h;
        let a = 0.5 * (d[j + 1] - d[j]);
        let b = d[j];
        let s = if a.abs() < 1e-14 * (b.abs() + 1e-300) {
            if b > 0.0 {
                target / b
            } else {
                0.5
            }
        } else {
            let disc = (b * b + 4.0 * a * target).max(0.0);
            2.0 * target / (b + disc.sqrt())
        };
        let s = if s.is_finite() { s.clamp(0.0, 1.0) } else { 0.5 };
        (j as f64 + s) * h
    }

    /// Draws an angle from the interpolated density.
    ///
    /// Between two rows the interpolated density is the mixture of the rows,
    /// so a row is picked with its interpolation weight and sampled exactly.
    pub fn sample_angle<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> Result<f64> {
        let cell = self.locate_sigma(sigma)?;
        let pick: f64 = rng.random();
        let row = if pick < cell.frac { cell.row + 1 } else { cell.row };
        let u: f64 = rng.random();
        Ok(self.sample_row(row, u))
    }

    /// `exp([ω u]×) · R0` with `ω` from the table and `u` uniform on the sphere.
    pub fn sample_igso3<R: Rng + ?Sized>(
        &self,
        r0: &Rotation,
        sigma: f64,
        rng: &mut R,
    ) -> Result<Rotation> {
        let omega = self.sample_angle(sigma, rng)?;
        let axis = random_unit_vector(rng);
        Ok(exp_so3(&(axis * omega)) * *r0)
    }

    /// `E_{ω∼f(·,σ)}[(∂_ω f0 / f0)²]`, the expected squared rotational score norm.
    pub fn expected_sq_score(&self, sigma: f64) -> Result<f64> {
        let cell = self.locate_sigma(sigma)?;
        let a = self.mean_sq_score[cell.row];
        let b = self.mean_sq_score[cell.row + 1];
        Ok(a + cell.frac * (b - a))
    }

    /// Rotational loss weight `C_R / E[score²]`.
    pub fn loss_weight_rotation(&self, sigma: f64, c_r: f64) -> Result<f64> {
        Ok(c_r / self.expected_sq_score(sigma)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(16 + 8 * (self.density.len() * 3 + 64));
        buf.extend_from_slice(CACHE_MAGIC);
        buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        write_params(&mut buf, &self.params);
        for block in [&self.sigmas, &self.density, &self.cdf, &self.score, &self.slope_at_zero, &self.mean_sq_score] {
            for v in block.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&buf)?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Loads a cached table; `Ok(None)` if the file is absent, stale or built
    /// with different parameters.
    pub fn load(path: &Path, params: &Igso3Params) -> Result<Option<Self>> {
        let mut bytes = Vec::new();
        match fs::File::open(path) {
            Ok(mut f) => {
                f.read_to_end(&mut bytes)?;
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        }
        let mut cursor = Cursor { bytes: &bytes, pos: 0 };
        if cursor.take(8) != Some(&CACHE_MAGIC[..]) {
            return Ok(None);
        }
        match cursor.u32() {
            Some(CACHE_VERSION) => {}
            _ => return Ok(None),
        }
        let stored = match read_params(&mut cursor) {
            Some(p) => p,
            None => return Ok(None),
        };
        if stored != *params {
            return Ok(None);
        }
        let n = params.n_sigma;
        let cells = n * (params.n_omega + 1);
        let mut next = |len: usize| cursor.f64s(len);
        let (Some(sigmas), Some(density), Some(cdf), Some(score), Some(slope), Some(msq)) =
            (next(n), next(cells), next(cells), next(cells), next(n), next(n))
        else {
            return Ok(None);
        };
        Ok(Some(Igso3Table {
            params: *params,
            sigmas,
            density,
            cdf,
            score,
            slope_at_zero: slope,
            mean_sq_score: msq,
        }))
    }

    /// Builds the table or loads it from `dir` when a matching cache exists.
    pub fn load_or_build(params: Igso3Params, dir: Option<&Path>) -> Result<Self> {
        let Some(dir) = dir else {
            return Igso3Table::build(params);
        };
        let path = cache_path(dir, &params);
        if let Some(t) = Igso3Table::load(&path, &params)? {
            return Ok(t);
        }
        let table = Igso3Table::build(params)?;
        fs::create_dir_all(dir)?;
        table.save(&path)?;
        Ok(table)
    }
}

pub fn cache_path(dir: &Path, p: &Igso3Params) -> PathBuf {
    dir.join(format!(
        "igso3_{:e}_{:e}_{}_{}_{}.bin",
        p.sigma_min, p.sigma_max, p.n_sigma, p.n_omega, p.truncation
    ))
}

fn write_params(buf: &mut Vec<u8>, p: &Igso3Params) {
    buf.extend_from_slice(&p.sigma_min.to_le_bytes());
    buf.extend_from_slice(&p.sigma_max.to_le_bytes());
    for v in [p.n_sigma, p.n_omega, p.truncation] {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
}

fn read_params(c: &mut Cursor<'_>) -> Option<Igso3Params> {
    Some(Igso3Params {
        sigma_min: c.f64()?,
        sigma_max: c.f64()?,
        n_sigma: c.u64()? as usize,
        n_omega: c.u64()? as usize,
        truncation: c.u64()? as usize,
    })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }
    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }
    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
    fn f64(&mut self) -> Option<f64> {
        Some(f64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
    fn f64s(&mut self, n: usize) -> Option<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let [x, y, z]: [f64; 3] = UnitSphere.sample(rng);
    Vec3::new(x, y, z)
}

/// CDF of the Haar angle density `(1 − cos ω)/π`.
pub fn uniform_angle_cdf(omega: f64) -> f64 {
    let w = omega.clamp(0.0, PI);
    (w - w.sin()) / PI
}

/// Inverts [`uniform_angle_cdf`] by safeguarded Newton iteration.
pub fn uniform_angle_quantile(u: f64) -> f64 {
    let target = u.clamp(0.0, 1.0);
    let (mut lo, mut hi) = (0.0, PI);
    // The CDF behaves like ω³/(6π) near zero; start from that.
    let mut w = (6.0 * PI * target).cbrt().min(PI);
    for _ in 0..100 {
        let f = uniform_angle_cdf(w) - target;
        if f > 0.0 {
            hi = w;
        } else {
            lo = w;
        }
        let df = (1.0 - w.cos()) / PI;
        let mut next = if df > 0.0 { w - f / df } else { 0.5 * (lo + hi) };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - w).abs() < 1e-15 {
            return next;
        }
        w = next;
    }
    w
}

/// Haar-distributed rotation: angle from `(1 − cos ω)/π`, axis uniform.
pub fn sample_uniform_so3<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    let u: f64 = rng.random();
    let omega = uniform_angle_quantile(u);
    let axis = random_unit_vector(rng);
    exp_so3(&(axis * omega))
}

/// Translational loss weight `C_p (1 − α_t²)`.
pub fn loss_weight_translation(alpha_t: f64, c_p: f64) -> f64 {
    c_p * (1.0 - alpha_t * alpha_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_params() -> Igso3Params {
        Igso3Params { n_sigma: 64, n_omega: 1024, ..Igso3Params::default() }
    }

    fn direct_f0(omega: f64, sigma: f64, l_max: usize) -> f64 {
        (0..=l_max)
            .map(|l| {
                let lf = l as f64;
                let chi = ((lf + 0.5) * omega).sin() / (0.5 * omega).sin();
                (2.0 * lf + 1.0) * (-lf * (lf + 1.0) * sigma * sigma / 2.0).exp() * chi
            })
            .sum()
    }

    #[test]
    fn recurrence_matches_direct_series() {
        for &sigma in &[0.1, 0.5, 2.0] {
            let w = series_weights(sigma, 2000);
            for &omega in &[0.05, 0.7, 1.9, 3.0] {
                let (f, df) = series_point(omega, &w);
                let direct = direct_f0(omega, sigma, w.len() - 1);
                assert!((f - direct).abs() < 1e-9 * direct.abs().max(1.0));
                let e = 1e-6;
                let fd = (direct_f0(omega + e, sigma, w.len() - 1)
                    - direct_f0(omega - e, sigma, w.len() - 1))
                    / (2.0 * e);
                assert!((df - fd).abs() < 1e-5 * fd.abs().max(1.0), "{sigma} {omega} {df} {fd}");
            }
        }
    }

    #[test]
    fn validation_rejects_bad_params() {
        let bad = Igso3Params { n_omega: 100, ..Igso3Params::default() };
        assert!(Igso3Table::build(bad).is_err());
        let bad = Igso3Params { sigma_min: 1.0, sigma_max: 0.5, ..Igso3Params::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rows_normalized_and_monotone() {
        let t = Igso3Table::build(small_params()).unwrap();
        let h = t.omega_step();
        for k in 0..t.sigmas().len() {
            let d = t.density_row(k);
            assert!(d.iter().all(|&v| v >= 0.0));
            let mass: f64 = d.windows(2).map(|p| 0.5 * h * (p[0] + p[1])).sum();
            assert!((mass - 1.0).abs() < 1e-3, "sigma {} mass {mass}", t.sigmas()[k]);
            let c = t.cdf_row(k);
            assert!(c[0] >= 0.0 && c[c.len() - 1] == 1.0);
            assert!(c.windows(2).all(|p| p[1] >= p[0]));
        }
    }

    #[test]
    fn out_of_range_sigma() {
        let t = Igso3Table::build(small_params()).unwrap();
        assert!(matches!(t.density(1.0, 20.0), Err(Error::OutOfRange { .. })));
        assert!(matches!(t.score_coeff(1.0, 0.001), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn small_angle_score_is_gaussian() {
        let t = Igso3Table::build(small_params()).unwrap();
        for &sigma in &[0.02, 0.05] {
            let omega = 0.5 * sigma;
            let c = t.score_coeff(omega, sigma).unwrap();
            let gauss = -omega / (sigma * sigma);
            assert!((c - gauss).abs() < 0.1 * gauss.abs(), "{c} vs {gauss}");
            let limit = t.score_over_omega(1e-5, sigma).unwrap();
            assert!((limit * sigma * sigma + 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn cache_roundtrip_and_invalidation() {
        let dir = std::env::temp_dir().join(format!("igso3-test-{}", std::process::id()));
        let p = Igso3Params { n_sigma: 8, n_omega: 512, truncation: 200, sigma_min: 0.1, sigma_max: 2.0 };
        let built = Igso3Table::load_or_build(p, Some(&dir)).unwrap();
        let path = cache_path(&dir, &p);
        let loaded = Igso3Table::load(&path, &p).unwrap().unwrap();
        assert_eq!(built, loaded);
        let other = Igso3Params { truncation: 300, ..p };
        assert!(Igso3Table::load(&path, &other).unwrap().is_none());
        fs::write(&path, b"garbage").unwrap();
        assert!(Igso3Table::load(&path, &p).unwrap().is_none());
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn uniform_quantile_inverts_cdf() {
        for i in 0..=100 {
            let u = i as f64 / 100.0;
            let w = uniform_angle_quantile(u);
            assert!((uniform_angle_cdf(w) - u).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_rotations_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let r = sample_uniform_so3(&mut rng);
            let m = r.matrix();
            for i in 0..3 {
                assert!((m.column(i).norm() - 1.0).abs() < 1e-12);
                for j in 0..i {
                    assert!(m.column(i).dot(&m.column(j)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn translation_weight() {
        assert_eq!(loss_weight_translation(0.0, 1.0), 1.0);
        assert!((loss_weight_translation(0.5, 2.0) - 1.5).abs() < 1e-15);
    }
}
