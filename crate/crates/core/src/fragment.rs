//! Rigid fragmentation of a ligand and the pose map `φ: SE(3)^m → R^{3n}`.
//!
//! Cutting a torsional bond B–C splits the molecule and leaves a dummy copy of
//! C inside B's fragment (and of B inside C's), so each rigid body keeps the
//! bond length and angle at the cut. Dropping a cut merges the two sides; a
//! merge is kept only if every resulting fragment with more than three points
//! is free of internal torsions. Dummies hanging off an endpoint of a merged
//! torsion are pruned: they would pin that torsion's dihedral.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liegroup::{RigidTransform, Rotation, Vec3};
use crate::molio::MolecularGraph;

pub const DEFAULT_MERGE_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DummyAtom {
    /// Atom on the far side of the cut bond that this dummy mirrors.
    pub mirrors: usize,
    /// Real atom of this fragment the dummy is bonded to.
    pub anchor: usize,
    /// Torsional bond (index into the graph's bonds) that was cut.
    pub bond: usize,
    pub over_constrained: bool,
}

/// One point of a rigid fragment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Member {
    pub atom: usize,
    pub dummy: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fragment {
    /// Real atoms, ascending.
    pub atoms: Vec<usize>,
    /// Every dummy created by the cut set, including pruned ones.
    pub dummies: Vec<DummyAtom>,
    /// Points of the rigid body: real atoms, then free dummies.
    pub members: Vec<Member>,
    /// Centered local coordinates, one per member.
    pub local: Vec<Vec3>,
}

impl Fragment {
    pub fn free_dummies(&self) -> impl Iterator<Item = &DummyAtom> {
        self.dummies.iter().filter(|d| !d.over_constrained)
    }

    pub fn n_points(&self) -> usize {
        self.members.len()
    }

    pub fn contains_real(&self, atom: usize) -> bool {
        self.atoms.binary_search(&atom).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorsionRecord {
    pub bond: usize,
    pub b: usize,
    pub c: usize,
    pub cut: bool,
    pub fragment_b: usize,
    pub fragment_c: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangulationEdge {
    pub i: usize,
    pub j: usize,
    pub fragment_i: usize,
    pub fragment_j: usize,
    /// Conformer distance in the set's length unit.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentSet {
    pub graph: MolecularGraph,
    pub cuts: Vec<usize>,
    pub fragments: Vec<Fragment>,
    pub torsions: Vec<TorsionRecord>,
    pub edges: Vec<TriangulationEdge>,
    /// Owning fragment of each real atom.
    pub atom_fragment: Vec<usize>,
    /// Length unit relative to Å (1 for Å, 2.7 after default scaling).
    #[serde(default = "unit_scale")]
    pub length_scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseState {
    pub transforms: Vec<RigidTransform>,
}

impl PoseState {
    pub fn len(&self) -> usize {
        self.transforms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transforms.is_empty()
    }

    /// Left action of a global rigid motion on every fragment.
    pub fn left_apply(&self, g: &RigidTransform) -> PoseState {
        PoseState { transforms: self.transforms.iter().map(|t| g.compose(t)).collect() }
    }
}

/// Fragment membership for a cut set, without coordinates.
struct Topology {
    component: Vec<usize>,
    atoms: Vec<Vec<usize>>,
    dummies: Vec<Vec<DummyAtom>>,
}

fn topology(g: &MolecularGraph, is_cut: &[bool]) -> Topology {
    let n = g.n_atoms();
    let mut component = vec![usize::MAX; n];
    let mut atoms = Vec::new();
    for s in 0..n {
        if component[s] != usize::MAX {
            continue;
        }
        let id = atoms.len();
        let mut members = vec![s];
        component[s] = id;
        let mut stack = vec![s];
        while let Some(a) = stack.pop() {
            for &(nb, b) in g.neighbors(a) {
                if !is_cut[b] && component[nb] == usize::MAX {
                    component[nb] = id;
                    members.push(nb);
                    stack.push(nb);
                }
            }
        }
        members.sort_unstable();
        atoms.push(members);
    }
    // Components are discovered in order of their smallest atom, so fragment
    // ids already follow that order.
    let mut dummies = vec![Vec::new(); atoms.len()];
    let merged_endpoint = |a: usize| g.neighbors(a).iter().any(|&(_, b)| g.is_torsional(b) && !is_cut[b]);
    for (b, bond) in g.bonds().iter().enumerate() {
        if !is_cut[b] {
            continue;
        }
        for (anchor, mirrors) in [(bond.i, bond.j), (bond.j, bond.i)] {
            dummies[component[anchor]].push(DummyAtom {
                mirrors,
                anchor,
                bond: b,
                over_constrained: merged_endpoint(anchor),
            });
        }
    }
    Topology { component, atoms, dummies }
}

fn cut_mask(g: &MolecularGraph, cuts: &[usize]) -> Result<Vec<bool>> {
    let mut mask = vec![false; g.bonds().len()];
    for &c in cuts {
        if c >= mask.len() || !g.is_torsional(c) {
            return Err(Error::NotTorsional(c));
        }
        mask[c] = true;
    }
    Ok(mask)
}

fn state_is_valid(g: &MolecularGraph, is_cut: &[bool], topo: &Topology) -> bool {
    for (f, atoms) in topo.atoms.iter().enumerate() {
        let free: Vec<&DummyAtom> = topo.dummies[f].iter().filter(|d| !d.over_constrained).collect();
        if atoms.len() + free.len() <= 3 {
            continue;
        }
        let in_fragment_degree = |a: usize| {
            let real = g.neighbors(a).iter().filter(|&&(_, b)| !is_cut[b]).count();
            let dummy = free.iter().filter(|d| d.anchor == a).count();
            real + dummy
        };
        for &t in g.torsional_bonds() {
            if is_cut[t] {
                continue;
            }
            let bond = &g.bonds()[t];
            if topo.component[bond.i] != f {
                continue;
            }
            if in_fragment_degree(bond.i) >= 2 && in_fragment_degree(bond.j) >= 2 {
                return false;
            }
        }
    }
    true
}

/// Whether fragmenting at `cuts` leaves every fragment with more than three
/// points free of internal torsions.
pub fn valid_state(g: &MolecularGraph, cuts: &[usize]) -> Result<bool> {
    let mask = cut_mask(g, cuts)?;
    let topo = topology(g, &mask);
    Ok(state_is_valid(g, &mask, &topo))
}

/// Every cut set reachable from the full set by dropping one cut at a time
/// through valid states, in lexicographic order.
pub fn rec_merge(g: &MolecularGraph, limit: usize) -> Result<Vec<Vec<usize>>> {
    let all: Vec<usize> = g.torsional_bonds().to_vec();
    let mut found: BTreeSet<Vec<usize>> = BTreeSet::new();
    found.insert(all.clone());
    let mut stack = vec![all];
    while let Some(current) = stack.pop() {
        for idx in 0..current.len() {
            let mut next = current.clone();
            next.remove(idx);
            if found.contains(&next) {
                continue;
            }
            if valid_state(g, &next)? {
                found.insert(next.clone());
                if found.len() > limit {
                    return Err(Error::CombinatorialLimit { limit });
                }
                stack.push(next);
            }
        }
    }
    Ok(found.into_iter().collect())
}

/// Builds fragments for `cuts` from the graph's conformer.
pub fn cut_fragments(g: &MolecularGraph, cuts: &[usize]) -> Result<Vec<Fragment>> {
    let coords = g.coordinates()?;
    let mask = cut_mask(g, cuts)?;
    let topo = topology(g, &mask);
    Ok(build_fragments(&topo, &coords))
}

fn build_fragments(topo: &Topology, coords: &[Vec3]) -> Vec<Fragment> {
    topo.atoms
        .iter()
        .zip(&topo.dummies)
        .map(|(atoms, dummies)| {
            let mut members: Vec<Member> = atoms.iter().map(|&a| Member { atom: a, dummy: false }).collect();
            members.extend(dummies.iter().filter(|d| !d.over_constrained).map(|d| Member { atom: d.mirrors, dummy: true }));
            let pts: Vec<Vec3> = members.iter().map(|m| coords[m.atom]).collect();
            let center = centroid(&pts);
            Fragment {
                atoms: atoms.clone(),
                dummies: dummies.clone(),
                members,
                local: pts.iter().map(|p| p - center).collect(),
            }
        })
        .collect()
}

pub fn centroid(points: &[Vec3]) -> Vec3 {
    let sum: Vec3 = points.iter().sum();
    sum / points.len() as f64
}

/// Angle at the middle vertex of a triangle from its three side lengths.
pub fn law_of_cosines_angle(left: f64, right: f64, opposite: f64) -> f64 {
    let c = (left * left + right * right - opposite * opposite) / (2.0 * left * right);
    c.clamp(-1.0, 1.0).acos()
}

impl FragmentSet {
    /// Fragments the graph's conformer at `cuts`.
    pub fn from_cuts(g: &MolecularGraph, cuts: &[usize]) -> Result<Self> {
        let coords = g.coordinates()?;
        let mut sorted = cuts.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mask = cut_mask(g, &sorted)?;
        let topo = topology(g, &mask);
        let fragments = build_fragments(&topo, &coords);
        let torsions = g
            .torsional_bonds()
            .iter()
            .map(|&t| {
                let bond = &g.bonds()[t];
                TorsionRecord {
                    bond: t,
                    b: bond.i,
                    c: bond.j,
                    cut: mask[t],
                    fragment_b: topo.component[bond.i],
                    fragment_c: topo.component[bond.j],
                }
            })
            .collect();
        let mut fs = FragmentSet {
            graph: g.clone(),
            cuts: sorted,
            fragments,
            torsions,
            edges: Vec::new(),
            atom_fragment: topo.component,
            length_scale: 1.0,
        };
        fs.edges = fs.triangulation_edges(&coords);
        Ok(fs)
    }

    pub fn m(&self) -> usize {
        self.fragments.len()
    }

    /// Number of torsional bonds of the parent molecule.
    pub fn k(&self) -> usize {
        self.torsions.len()
    }

    pub fn n_atoms(&self) -> usize {
        self.atom_fragment.len()
    }

    pub fn n_dummies(&self) -> usize {
        self.fragments.iter().map(|f| f.members.iter().filter(|m| m.dummy).count()).sum()
    }

    pub fn n_pruned(&self) -> usize {
        self.fragments.iter().map(|f| f.dummies.iter().filter(|d| d.over_constrained).count()).sum()
    }

    /// For each cut torsion B–C: an edge from the smallest real neighbour A of
    /// B (inside B's fragment) to C, and from B to the smallest real
    /// neighbour D of C.
    pub fn triangulation_edges(&self, coords: &[Vec3]) -> Vec<TriangulationEdge> {
        let g = &self.graph;
        let mut edges: Vec<TriangulationEdge> = Vec::new();
        for t in self.torsions.iter().filter(|t| t.cut) {
            for (b, c) in [(t.b, t.c), (t.c, t.b)] {
                let fb = self.atom_fragment[b];
                let fc = self.atom_fragment[c];
                let a = g
                    .neighbors(b)
                    .iter()
                    .map(|&(nb, _)| nb)
                    .filter(|&nb| nb != c && self.atom_fragment[nb] == fb)
                    .min();
                if let Some(a) = a {
                    let (i, j) = if a < c { (a, c) } else { (c, a) };
                    if edges.iter().any(|e| e.i == i && e.j == j) {
                        continue;
                    }
                    let (fi, fj) = if a < c { (fb, fc) } else { (fc, fb) };
                    edges.push(TriangulationEdge {
                        i,
                        j,
                        fragment_i: fi,
                        fragment_j: fj,
                        distance: (coords[i] - coords[j]).norm() / self.length_scale,
                    });
                }
            }
        }
        edges
    }

    /// Pose that reproduces the construction conformer: centroids, identity rotations.
    pub fn reference_pose(&self) -> Result<PoseState> {
        let coords = self.graph.coordinates()?;
        Ok(PoseState {
            transforms: self
                .fragments
                .iter()
                .map(|f| {
                    let pts: Vec<Vec3> = f.members.iter().map(|m| coords[m.atom] / self.length_scale).collect();
                    RigidTransform::from_translation(centroid(&pts))
                })
                .collect(),
        })
    }

    /// Ligand coordinates for a pose; dummies are dropped.
    pub fn phi(&self, z: &PoseState) -> Result<Vec<Vec3>> {
        if z.len() != self.m() {
            return Err(Error::DimensionMismatch { expected: self.m(), got: z.len() });
        }
        let mut out = vec![Vec3::zeros(); self.n_atoms()];
        for (f, t) in self.fragments.iter().zip(&z.transforms) {
            for (m, x) in f.members.iter().zip(&f.local) {
                if !m.dummy {
                    out[m.atom] = t.apply_point(x);
                }
            }
        }
        Ok(out)
    }

    /// World positions of every fragment point (dummies included), per fragment.
    pub fn fragment_points(&self, z: &PoseState) -> Result<Vec<Vec<Vec3>>> {
        if z.len() != self.m() {
            return Err(Error::DimensionMismatch { expected: self.m(), got: z.len() });
        }
        Ok(self
            .fragments
            .iter()
            .zip(&z.transforms)
            .map(|(f, t)| t.apply(&f.local))
            .collect())
    }

    /// Re-derives local frames from ligand coordinates: centroids become the
    /// translations, rotations reset to identity.
    pub fn phi_inverse(&self, coords: &[Vec3]) -> Result<(FragmentSet, PoseState)> {
        if coords.len() != self.n_atoms() {
            return Err(Error::DimensionMismatch { expected: self.n_atoms(), got: coords.len() });
        }
        let mut fs = self.clone();
        let mut transforms = Vec::with_capacity(self.m());
        for f in fs.fragments.iter_mut() {
            let pts: Vec<Vec3> = f.members.iter().map(|m| coords[m.atom]).collect();
            let c = centroid(&pts);
            f.local = pts.iter().map(|p| p - c).collect();
            transforms.push(RigidTransform::from_translation(c));
        }
        Ok((fs, PoseState { transforms }))
    }

    /// Copy with local coordinates and edge distances divided by `scale`.
    pub fn scaled(&self, scale: f64) -> FragmentSet {
        let mut fs = self.clone();
        for f in fs.fragments.iter_mut() {
            for x in f.local.iter_mut() {
                *x /= scale;
            }
        }
        for e in fs.edges.iter_mut() {
            e.distance /= scale;
        }
        fs.length_scale = self.length_scale * scale;
        fs
    }

    /// Rotates fragment `i`'s local frame: `x̃ ↦ R_s x̃`.
    pub fn reorient(&mut self, i: usize, r_s: &Rotation) {
        for x in self.fragments[i].local.iter_mut() {
            *x = r_s.rotate(x);
        }
    }

    pub fn to_json(&self) -> Result<String> {
        crate::molio::Envelope::new("fragment_set", self.clone()).to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(crate::molio::Envelope::<FragmentSet>::from_json(text, "fragment_set")?.data)
    }
}

/// Samples one valid cut set uniformly (seeded) and builds its fragments.
pub fn fr3d(g: &MolecularGraph, seed: u64) -> Result<FragmentSet> {
    fr3d_with_limit(g, seed, DEFAULT_MERGE_LIMIT)
}

pub fn fr3d_with_limit(g: &MolecularGraph, seed: u64, limit: usize) -> Result<FragmentSet> {
    if !g.has_coordinates() {
        return Err(Error::NoCoordinates);
    }
    let sets = rec_merge(g, limit)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = rng.random_range(0..sets.len());
    FragmentSet::from_cuts(g, &sets[pick])
}
