//! Gram-matrix audits of the torsional and fragment parametrizations, pose
//! checks, a stand-in binding energy and mixed-score ranking.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::align::{rotate_about_bond, set_dihedral, DihedralSpec};
use crate::error::{Error, Result};
use crate::fragment::{centroid, FragmentSet, PoseState};
use crate::liegroup::{exp_so3, RigidTransform, Vec3};
use crate::molio::MolecularGraph;

/// Central-difference step for Jacobian columns (rad or internal length).
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorsionCouplings {
    /// Largest off-diagonal torsion–torsion entry.
    pub torsion_torsion: f64,
    /// Largest torsion–translation entry (centroid drift).
    pub torsion_translation: f64,
    /// Largest torsion–rotation entry (torque).
    pub torsion_rotation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetFactorization {
    pub det: f64,
    pub product_of_blocks: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramReport {
    pub label: String,
    pub gram: Vec<Vec<f64>>,
    pub block_sizes: Vec<usize>,
    /// Largest |entry| outside the diagonal blocks.
    pub offdiag_block_max: f64,
    pub symmetry_error: f64,
    pub min_eigenvalue: f64,
    pub couplings: Option<TorsionCouplings>,
    pub determinant: Option<DetFactorization>,
}

impl GramReport {
    fn from_jacobian(label: &str, j: &DMatrix<f64>, block_sizes: Vec<usize>) -> Self {
        let g = j.transpose() * j;
        let n = g.nrows();
        let mut sym = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                sym = sym.max((g[(a, b)] - g[(b, a)]).abs());
            }
        }
        let starts = block_starts(&block_sizes);
        let block_of = |i: usize| starts.iter().rposition(|&s| s <= i).unwrap_or(0);
        let mut off = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                if block_of(a) != block_of(b) {
                    off = off.max(g[(a, b)].abs());
                }
            }
        }
        let min_eig = SymmetricEigen::new(g.clone()).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        GramReport {
            label: label.to_string(),
            gram: (0..n).map(|a| (0..n).map(|b| g[(a, b)]).collect()).collect(),
            block_sizes,
            offdiag_block_max: off,
            symmetry_error: sym,
            min_eigenvalue: min_eig,
            couplings: None,
            determinant: None,
        }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.gram.len();
        DMatrix::from_fn(n, n, |a, b| self.gram[a][b])
    }

    /// Diagonal block `i`.
    pub fn block(&self, i: usize) -> DMatrix<f64> {
        let s = block_starts(&self.block_sizes)[i];
        let n = self.block_sizes[i];
        DMatrix::from_fn(n, n, |a, b| self.gram[s + a][s + b])
    }

    /// Off-diagonal block `(i, j)`.
    pub fn cross_block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let st = block_starts(&self.block_sizes);
        DMatrix::from_fn(self.block_sizes[i], self.block_sizes[j], |a, b| self.gram[st[i] + a][st[j] + b])
    }
}

fn block_starts(sizes: &[usize]) -> Vec<usize> {
    let mut s = Vec::with_capacity(sizes.len());
    let mut acc = 0;
    for &n in sizes {
        s.push(acc);
        acc += n;
    }
    s
}

fn flatten_into(col: &mut DMatrix<f64>, c: usize, plus: &[Vec3], minus: &[Vec3], h: f64) {
    for (i, (a, b)) in plus.iter().zip(minus).enumerate() {
        let d = (a - b) / (2.0 * h);
        for k in 0..3 {
            col[(3 * i + k, c)] = d[k];
        }
    }
}

/// Coordinates with each listed dihedral set to the matching entry of `u`.
pub fn torsion_map(conformer: &[Vec3], specs: &[DihedralSpec], u: &[f64]) -> Result<Vec<Vec3>> {
    if u.len() != specs.len() {
        return Err(Error::DimensionMismatch { expected: specs.len(), got: u.len() });
    }
    let mut x = conformer.to_vec();
    for (s, &a) in specs.iter().zip(u) {
        x = set_dihedral(&x, s, a)?;
    }
    Ok(x)
}

/// Gram matrix of the map (dihedrals, rigid motion) → coordinates at `u`.
///
/// Columns: one per dihedral (the `D` side rotates), then three translations
/// and three infinitesimal rotations about the centroid.
pub fn torsional_gram(conformer: &[Vec3], specs: &[DihedralSpec], u: &[f64]) -> Result<GramReport> {
    let x = torsion_map(conformer, specs, u)?;
    let n = x.len();
    let k = specs.len();
    let mut j = DMatrix::zeros(3 * n, k + 6);
    for (c, s) in specs.iter().enumerate() {
        let plus = rotate_about_bond(&x, s, FD_STEP);
        let minus = rotate_about_bond(&x, s, -FD_STEP);
        flatten_into(&mut j, c, &plus, &minus, FD_STEP);
    }
    let com = centroid(&x);
    for a in 0..3 {
        let e = Vec3::ith(a, 1.0);
        for i in 0..n {
            j[(3 * i + a, k + a)] = 1.0;
            let r = e.cross(&(x[i] - com));
            for b in 0..3 {
                j[(3 * i + b, k + 3 + a)] = r[b];
            }
        }
    }
    let mut sizes = vec![1; k];
    sizes.push(6);
    let mut rep = GramReport::from_jacobian("torsional", &j, sizes);
    let g = rep.matrix();
    let mut c = TorsionCouplings { torsion_torsion: 0.0, torsion_translation: 0.0, torsion_rotation: 0.0 };
    for a in 0..k {
        for b in 0..k {
            if a != b {
                c.torsion_torsion = c.torsion_torsion.max(g[(a, b)].abs());
            }
        }
        for b in 0..3 {
            c.torsion_translation = c.torsion_translation.max(g[(a, k + b)].abs());
            c.torsion_rotation = c.torsion_rotation.max(g[(a, k + 3 + b)].abs());
        }
    }
    rep.couplings = Some(c);
    Ok(rep)
}

fn perturbed(t: &RigidTransform, param: usize, h: f64) -> RigidTransform {
    if param < 3 {
        RigidTransform::new(t.translation + Vec3::ith(param, h), t.rotation)
    } else {
        RigidTransform::new(t.translation, exp_so3(&Vec3::ith(param - 3, h)) * t.rotation)
    }
}

/// Gram matrix of the fragment parametrization, six parameters per fragment
/// (world translation, then world-frame rotation about the fragment origin).
/// Rows cover every fragment point, dummies included.
pub fn fragment_gram(fs: &FragmentSet, z: &PoseState) -> Result<GramReport> {
    let base = fs.fragment_points(z)?;
    let n: usize = base.iter().map(|p| p.len()).sum();
    let m = fs.m();
    let mut j = DMatrix::zeros(3 * n, 6 * m);
    let flat = |pts: Vec<Vec<Vec3>>| -> Vec<Vec3> { pts.into_iter().flatten().collect() };
    for f in 0..m {
        for p in 0..6 {
            let mut zp = z.clone();
            zp.transforms[f] = perturbed(&z.transforms[f], p, FD_STEP);
            let mut zm = z.clone();
            zm.transforms[f] = perturbed(&z.transforms[f], p, -FD_STEP);
            let plus = flat(fs.fragment_points(&zp)?);
            let minus = flat(fs.fragment_points(&zm)?);
            flatten_into(&mut j, 6 * f + p, &plus, &minus, FD_STEP);
        }
    }
    let mut rep = GramReport::from_jacobian("fragment", &j, vec![6; m]);
    let det = rep.matrix().lu().determinant();
    let prod: f64 = (0..m).map(|i| rep.block(i).lu().determinant()).product();
    let rel = if prod != 0.0 { ((det - prod) / prod).abs() } else { (det - prod).abs() };
    rep.determinant = Some(DetFactorization { det, product_of_blocks: prod, rel_error: rel });
    Ok(rep)
}

pub const BOND_LENGTH_TOL: f64 = 0.25;
pub const BOND_ANGLE_TOL_DEG: f64 = 25.0;
pub const INTRA_CLASH: f64 = 1.7;
pub const POCKET_CLASH: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseChecks {
    pub bond_lengths: bool,
    pub bond_angles: bool,
    pub no_internal_clash: bool,
    pub no_pocket_clash: bool,
}

impl PoseChecks {
    pub fn fraction(&self) -> f64 {
        let ok = [self.bond_lengths, self.bond_angles, self.no_internal_clash, self.no_pocket_clash];
        ok.iter().filter(|&&b| b).count() as f64 / 4.0
    }
}

fn angle(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let u = a - b;
    let v = c - b;
    u.cross(&v).norm().atan2(u.dot(&v))
}

/// Four geometry checks against a reference conformer and the pocket. Chirality is not checked.
pub fn pose_checks(coords: &[Vec3], g: &MolecularGraph, reference: &[Vec3], pocket: &[Vec3]) -> Result<PoseChecks> {
    let n = g.n_atoms();
    if coords.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: coords.len() });
    }
    if reference.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: reference.len() });
    }
    let bond_lengths = g.bonds().iter().all(|b| {
        let d = (coords[b.i] - coords[b.j]).norm();
        let r = (reference[b.i] - reference[b.j]).norm();
        (d - r).abs() <= BOND_LENGTH_TOL * r
    });
    let tol = BOND_ANGLE_TOL_DEG.to_radians();
    let mut bond_angles = true;
    let mut near = vec![vec![false; n]; n];
    for c in 0..n {
        near[c][c] = true;
        let nb: Vec<usize> = g.neighbors(c).iter().map(|&(x, _)| x).collect();
        for (ia, &a) in nb.iter().enumerate() {
            near[a][c] = true;
            near[c][a] = true;
            for &b in &nb[ia + 1..] {
                near[a][b] = true;
                near[b][a] = true;
                let now = angle(&coords[a], &coords[c], &coords[b]);
                let r = angle(&reference[a], &reference[c], &reference[b]);
                if (now - r).abs() > tol {
                    bond_angles = false;
                }
            }
        }
    }
    let mut no_internal_clash = true;
    for a in 0..n {
        for b in a + 1..n {
            if !near[a][b] && (coords[a] - coords[b]).norm() < INTRA_CLASH {
                no_internal_clash = false;
            }
        }
    }
    let no_pocket_clash = coords.iter().all(|x| pocket.iter().all(|y| (x - y).norm() >= POCKET_CLASH));
    Ok(PoseChecks { bond_lengths, bond_angles, no_internal_clash, no_pocket_clash })
}

pub const ENERGY_CUTOFF: f64 = 8.0;

/// Clash penalty below 1.5 Å and a Gaussian contact reward centered at 3.5 Å.
/// Not a physical binding energy.
pub fn pseudo_energy(coords: &[Vec3], pocket: &[Vec3]) -> f64 {
    let mut e = 0.0;
    for x in coords {
        for y in pocket {
            let d = (x - y).norm();
            if d < POCKET_CLASH {
                e += 10.0 * (POCKET_CLASH - d).powi(2);
            } else if d <= ENERGY_CUTOFF {
                e -= (-(d - 3.5).powi(2) / 2.0).exp();
            }
        }
    }
    e
}

/// `s = −b p^β`.
pub fn mixed_score(b: f64, p: f64, beta: f64) -> f64 {
    -b * p.powf(beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSample {
    /// Position in the input list.
    pub index: usize,
    pub energy: f64,
    pub check_fraction: f64,
    pub score: f64,
}

/// Orders `(b, p)` pairs by descending mixed score; ties keep input order.
pub fn rank(samples: &[(f64, f64)], beta: f64) -> Result<Vec<RankedSample>> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")));
    }
    let mut out: Vec<RankedSample> = samples
        .iter()
        .enumerate()
        .map(|(index, &(b, p))| RankedSample { index, energy: b, check_fraction: p, score: mixed_score(b, p, beta) })
        .collect();
    out.sort_by(|x, y| y.score.total_cmp(&x.score));
    Ok(out)
}
