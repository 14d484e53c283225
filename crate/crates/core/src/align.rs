//! Rigid superposition, dihedral geometry and joint rigid + torsional registration.
//!
//! RMSD here is plain (no symmetry correction over graph automorphisms).

use std::f64::consts::PI;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fragment::centroid;
use crate::liegroup::{exp_so3, RigidTransform, Rotation, Vec3};
use crate::molio::MolecularGraph;

/// Dihedral `A–B–C–D` about bond `B–C`; the side containing `D` moves when set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DihedralSpec {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub d: usize,
    pub bond: usize,
    /// Atoms that move with `D`.
    pub moving: Vec<bool>,
}

impl DihedralSpec {
    pub fn new(g: &MolecularGraph, a: usize, b: usize, c: usize, d: usize) -> Result<Self> {
        let n = g.n_atoms();
        if [a, b, c, d].iter().any(|&x| x >= n) {
            return Err(Error::InvalidGraph(format!("dihedral ({a},{b},{c},{d}) out of range")));
        }
        let bond = g
            .bond_between(b, c)
            .ok_or_else(|| Error::InvalidGraph(format!("atoms {b} and {c} are not bonded")))?;
        if !g.is_torsional(bond) {
            return Err(Error::NotTorsional(bond));
        }
        if g.bond_between(a, b).is_none() || g.bond_between(c, d).is_none() || a == c || d == b {
            return Err(Error::InvalidGraph(format!("({a},{b},{c},{d}) is not a bonded path")));
        }
        let moving = g.side_of_bond(c, bond);
        Ok(DihedralSpec { a, b, c, d, bond, moving })
    }

    /// Uses the lowest-index outer neighbor on each side.
    pub fn for_bond(g: &MolecularGraph, bond: usize) -> Result<Self> {
        let bd = g.bonds().get(bond).ok_or_else(|| Error::InvalidGraph(format!("no bond {bond}")))?;
        let (b, c) = (bd.i, bd.j);
        let outer = |x: usize, skip: usize| g.neighbors(x).iter().map(|&(nb, _)| nb).find(|&nb| nb != skip);
        let a = outer(b, c).ok_or(Error::NotTorsional(bond))?;
        let d = outer(c, b).ok_or(Error::NotTorsional(bond))?;
        Self::new(g, a, b, c, d)
    }
}

/// One spec per torsional bond of `g`, in bond order.
pub fn torsion_specs(g: &MolecularGraph) -> Result<Vec<DihedralSpec>> {
    g.torsional_bonds().iter().map(|&b| DihedralSpec::for_bond(g, b)).collect()
}

/// Best rigid motion taking `p` onto `q` in the least-squares sense.
pub fn kabsch(p: &[Vec3], q: &[Vec3]) -> Result<RigidTransform> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    if p.len() < 3 {
        return Err(Error::DegenerateConfiguration(format!("need at least 3 points, got {}", p.len())));
    }
    let cp = centroid(p);
    let cq = centroid(q);
    let mut h = Matrix3::zeros();
    for (a, b) in p.iter().zip(q) {
        h += (a - cp) * (b - cq).transpose();
    }
    let svd = h.svd(true, true);
    let mut sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if !(sv[0] > 0.0) || sv[1] <= 1e-10 * sv[0] {
        return Err(Error::DegenerateConfiguration("point sets are collinear or coincident".into()));
    }
    let u = svd.u.ok_or_else(|| Error::DegenerateConfiguration("SVD failed".into()))?;
    let vt = svd.v_t.ok_or_else(|| Error::DegenerateConfiguration("SVD failed".into()))?;
    let v = vt.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let mut k = 0;
    for i in 1..3 {
        if svd.singular_values[i] < svd.singular_values[k] {
            k = i;
        }
    }
    let mut corr = Matrix3::identity();
    corr[(k, k)] = d;
    let r = Rotation::project(&(v * corr * u.transpose()));
    Ok(RigidTransform::new(cq - r.rotate(&cp), r))
}

pub fn rmsd(p: &[Vec3], q: &[Vec3]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    if p.is_empty() {
        return Ok(0.0);
    }
    let s: f64 = p.iter().zip(q).map(|(a, b)| (a - b).norm_squared()).sum();
    Ok((s / p.len() as f64).sqrt())
}

/// RMSD after superposing `p` onto `q`, with the superposed copy of `p`.
pub fn aligned_rmsd(p: &[Vec3], q: &[Vec3]) -> Result<(f64, Vec<Vec3>)> {
    let t = kabsch(p, q)?;
    let moved = t.apply(p);
    Ok((rmsd(&moved, q)?, moved))
}

/// Signed dihedral in `(−π, π]`.
pub fn dihedral_angle(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> Result<f64> {
    let b0 = a - b;
    let b1 = c - b;
    let b2 = d - c;
    let n1 = b0.cross(&b1);
    let n2 = b2.cross(&b1);
    let len = b1.norm();
    if len < 1e-12 || n1.norm() < 1e-8 * b0.norm() * len || n2.norm() < 1e-8 * b2.norm() * len {
        return Err(Error::UndefinedDihedral);
    }
    let m = n1.cross(&(b1 / len));
    let x = n1.dot(&n2);
    let y = m.dot(&n2);
    Ok(-y.atan2(x))
}

pub fn measure_dihedral(coords: &[Vec3], spec: &DihedralSpec) -> Result<f64> {
    dihedral_angle(&coords[spec.a], &coords[spec.b], &coords[spec.c], &coords[spec.d])
}

/// Rotates the moving side about `B→C` until the dihedral equals `angle`.
pub fn set_dihedral(coords: &[Vec3], spec: &DihedralSpec, angle: f64) -> Result<Vec<Vec3>> {
    let current = measure_dihedral(coords, spec)?;
    Ok(rotate_about_bond(coords, spec, angle - current))
}

/// Rotates the moving side of `spec` by `delta` about the `B→C` axis.
pub fn rotate_about_bond(coords: &[Vec3], spec: &DihedralSpec, delta: f64) -> Vec<Vec3> {
    let origin = coords[spec.c];
    let axis = (coords[spec.c] - coords[spec.b]).normalize();
    let r = exp_so3(&(axis * delta));
    coords
        .iter()
        .zip(&spec.moving)
        .map(|(x, &mv)| if mv { origin + r.rotate(&(x - origin)) } else { *x })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignResult {
    /// Conformer after torsional adjustment and superposition onto the target.
    pub coords: Vec<Vec3>,
    pub rmsd: f64,
    /// Dihedral values of the adjusted conformer.
    pub dihedrals: Vec<f64>,
    /// RMSD after each round, starting with the plain rigid fit.
    pub history: Vec<f64>,
}

pub const DEFAULT_MAX_ROUNDS: usize = 50;
const ROUND_TOL: f64 = 1e-4;
const GOLDEN_TOL: f64 = 1e-7;
const SCAN_POINTS: usize = 24;

/// Coordinate descent over dihedrals, each objective evaluated as RMSD after
/// rigid superposition. Every accepted move lowers the RMSD.
///
/// When a sweep stalls, each dihedral in turn is kicked by a quarter, half
/// and three-quarter turn and descended from there; the first kick that ends
/// lower is kept. The search stops once neither helps.
pub fn joint_align(
    conformer: &[Vec3],
    target: &[Vec3],
    specs: &[DihedralSpec],
    max_rounds: usize,
) -> Result<AlignResult> {
    let (mut best, _) = aligned_rmsd(conformer, target)?;
    let mut x = conformer.to_vec();
    let mut history = vec![best];
    for _ in 0..max_rounds {
        let before = best;
        sweep(&mut x, &mut best, target, specs);
        if before - best < ROUND_TOL {
            if let Some((y, fy)) = kick(&x, best, target, specs) {
                x = y;
                best = fy;
            }
        }
        history.push(best);
        if before - best < ROUND_TOL {
            break;
        }
    }
    let dihedrals = specs.iter().map(|s| measure_dihedral(&x, s)).collect::<Result<Vec<_>>>()?;
    let (rmsd, coords) = aligned_rmsd(&x, target)?;
    Ok(AlignResult { coords, rmsd, dihedrals, history })
}

/// One pass of scan + golden-section over every dihedral.
fn sweep(x: &mut Vec<Vec3>, best: &mut f64, target: &[Vec3], specs: &[DihedralSpec]) {
    for spec in specs {
        let f = |delta: f64| -> f64 {
            let y = rotate_about_bond(x, spec, delta);
            aligned_rmsd(&y, target).map(|(r, _)| r).unwrap_or(f64::INFINITY)
        };
        // Coarse scan over the circle brackets the best basin.
        let step = 2.0 * PI / SCAN_POINTS as f64;
        let mut k_best = 0;
        let mut f_scan = *best;
        for k in 1..SCAN_POINTS {
            let fk = f(k as f64 * step);
            if fk < f_scan {
                f_scan = fk;
                k_best = k;
            }
        }
        let center = k_best as f64 * step;
        let (delta, fd) = golden_section(&f, center - step, center + step, GOLDEN_TOL);
        if fd < *best {
            *x = rotate_about_bond(x, spec, delta);
            *best = fd;
        }
    }
}

const KICK_SWEEPS: usize = 20;

fn kick(x: &[Vec3], best: f64, target: &[Vec3], specs: &[DihedralSpec]) -> Option<(Vec<Vec3>, f64)> {
    for spec in specs {
        for turn in [0.5 * PI, PI, 1.5 * PI] {
            let mut y = rotate_about_bond(x, spec, turn);
            let mut fy = aligned_rmsd(&y, target).map(|(r, _)| r).unwrap_or(f64::INFINITY);
            for _ in 0..KICK_SWEEPS {
                let prev = fy;
                sweep(&mut y, &mut fy, target, specs);
                if prev - fy < ROUND_TOL {
                    break;
                }
            }
            if fy < best - ROUND_TOL {
                return Some((y, fy));
            }
        }
    }
    None
}

/// Minimizer of `f` on `[lo, hi]` assuming a single basin.
fn golden_section(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}
