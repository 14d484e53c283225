//! Synthetic heavy-atom molecules with idealized 3-D geometry.
//!
//! Chains are grown with the natural-extension-reference-frame construction:
//! C–C 1.54 Å, tetrahedral angles, staggered dihedrals. Aromatic rings are
//! regular hexagons with 1.39 Å edges.

use std::f64::consts::PI;

use crate::liegroup::Vec3;
use crate::molio::{Atom, Bond, BondOrder, MolecularGraph};

pub const CC_SINGLE: f64 = 1.54;
pub const CC_AROMATIC: f64 = 1.39;
pub const RING_LINK: f64 = 1.50;
pub const TETRAHEDRAL: f64 = 109.47;

/// Position of `d` with `|cd| = bond`, `∠bcd = angle`, dihedral `abcd = torsion` (degrees).
pub fn place(a: &Vec3, b: &Vec3, c: &Vec3, bond: f64, angle_deg: f64, torsion_deg: f64) -> Vec3 {
    let bc = (c - b).normalize();
    let n = (b - a).cross(&bc).normalize();
    let m = n.cross(&bc);
    let theta = angle_deg.to_radians();
    let phi = torsion_deg.to_radians();
    let d_local = Vec3::new(-bond * theta.cos(), bond * theta.sin() * phi.cos(), bond * theta.sin() * phi.sin());
    c + bc * d_local.x + m * d_local.y + n * d_local.z
}

/// Incremental molecule assembly.
#[derive(Debug, Clone, Default)]
pub struct Builder {
    name: String,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
}

impl Builder {
    pub fn new(name: &str) -> Self {
        Builder { name: name.to_string(), ..Default::default() }
    }

    pub fn pos(&self, i: usize) -> Vec3 {
        self.atoms[i].pos().expect("builder atoms always have positions")
    }

    pub fn add_atom(&mut self, element: &str, p: Vec3) -> usize {
        self.atoms.push(Atom::new(element, p));
        self.atoms.len() - 1
    }

    pub fn add_bond(&mut self, i: usize, j: usize, order: BondOrder) {
        self.bonds.push(Bond::new(i, j, order));
    }

    /// Adds an atom bonded to `c` and placed from the reference triple `(a, b, c)`.
    pub fn grow(&mut self, a: usize, b: usize, c: usize, element: &str, bond: f64, torsion_deg: f64) -> usize {
        let p = place(&self.pos(a), &self.pos(b), &self.pos(c), bond, TETRAHEDRAL, torsion_deg);
        let d = self.add_atom(element, p);
        self.add_bond(c, d, BondOrder::Single);
        d
    }

    /// Appends a linear run of `n` carbons continuing the chain `a → b → c`.
    /// Returns the new atom indices.
    pub fn chain(&mut self, a: usize, b: usize, c: usize, n: usize, torsion_deg: f64) -> Vec<usize> {
        let (mut p, mut q, mut r) = (a, b, c);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let d = self.grow(p, q, r, "C", CC_SINGLE, torsion_deg);
            out.push(d);
            p = q;
            q = r;
            r = d;
        }
        out
    }

    /// Attaches a phenyl ring to `c` (whose previous chain atoms are `a`, `b`).
    /// `twist_deg` rotates the ring plane about the link. Returns ring atoms,
    /// ipso carbon first, in ring order.
    pub fn phenyl(&mut self, a: usize, b: usize, c: usize, torsion_deg: f64, twist_deg: f64) -> Vec<usize> {
        let pa = self.pos(a);
        let pb = self.pos(b);
        let pc = self.pos(c);
        let ipso = place(&pa, &pb, &pc, RING_LINK, TETRAHEDRAL, torsion_deg);
        self.ring_at(c, ipso, pb, twist_deg)
    }

    /// Builds a hexagon whose first atom is at `ipso`, bonded to `anchor`,
    /// with the ring axis pointing away from the anchor. `plane_hint` fixes the
    /// ring plane before twisting.
    pub fn ring_at(&mut self, anchor: usize, ipso: Vec3, plane_hint: Vec3, twist_deg: f64) -> Vec<usize> {
        let pc = self.pos(anchor);
        let u = (ipso - pc).normalize();
        let mut v = plane_hint - pc;
        v -= u * v.dot(&u);
        if v.norm() < 1e-8 {
            v = if u.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
            v -= u * v.dot(&u);
        }
        let v = v.normalize();
        let w = u.cross(&v);
        let t = twist_deg.to_radians();
        let v = v * t.cos() + w * t.sin();
        let center = ipso + u * CC_AROMATIC;
        let mut ring = Vec::with_capacity(6);
        for k in 0..6 {
            let th = PI / 3.0 * k as f64;
            let p = center + (-u * th.cos() + v * th.sin()) * CC_AROMATIC;
            ring.push(self.add_atom("C", p));
        }
        self.add_bond(anchor, ring[0], BondOrder::Single);
        for k in 0..6 {
            self.add_bond(ring[k], ring[(k + 1) % 6], BondOrder::Aromatic);
        }
        ring
    }

    pub fn finish(self) -> MolecularGraph {
        MolecularGraph::new(self.name, self.atoms, self.bonds).expect("fixture graphs are valid")
    }
}

/// Starts a chain with three carbons in the xy-plane; returns the builder and the indices.
fn seed_chain(name: &str) -> (Builder, [usize; 3]) {
    let mut b = Builder::new(name);
    let a0 = b.add_atom("C", Vec3::zeros());
    let a1 = b.add_atom("C", Vec3::new(CC_SINGLE, 0.0, 0.0));
    let th = (180.0 - TETRAHEDRAL).to_radians();
    let a2 = b.add_atom("C", Vec3::new(CC_SINGLE * (1.0 + th.cos()), CC_SINGLE * th.sin(), 0.0));
    b.add_bond(a0, a1, BondOrder::Single);
    b.add_bond(a1, a2, BondOrder::Single);
    (b, [a0, a1, a2])
}

/// Linear alkane with `n ≥ 3` carbons and the given backbone dihedrals
/// (cycled if shorter than `n − 3`; all-anti if empty).
pub fn alkane_with_dihedrals(n: usize, dihedrals_deg: &[f64]) -> MolecularGraph {
    assert!(n >= 3, "alkane needs at least three carbons");
    let (mut b, [a0, a1, a2]) = seed_chain(&format!("C{n}-alkane"));
    let (mut p, mut q, mut r) = (a0, a1, a2);
    for k in 0..n - 3 {
        let t = if dihedrals_deg.is_empty() { 180.0 } else { dihedrals_deg[k % dihedrals_deg.len()] };
        let d = b.grow(p, q, r, "C", CC_SINGLE, t);
        p = q;
        q = r;
        r = d;
    }
    b.finish()
}

pub fn alkane(n: usize) -> MolecularGraph {
    alkane_with_dihedrals(n, &[])
}

pub fn butane() -> MolecularGraph {
    alkane_with_dihedrals(4, &[-65.0])
}

pub fn pentane() -> MolecularGraph {
    alkane_with_dihedrals(5, &[-65.0, 175.0])
}

pub fn hexane() -> MolecularGraph {
    alkane_with_dihedrals(6, &[-65.0, 175.0, 70.0])
}

/// Tree-shaped alkane from a parent list (`parents[0] = None`, `parents[i] < i`).
/// Siblings take staggered dihedrals 180°, 300°, 60° in order.
pub fn branched(name: &str, parents: &[Option<usize>]) -> MolecularGraph {
    let n = parents.len();
    assert!(n >= 1 && parents[0].is_none());
    // Two virtual atoms give the root a parent and grandparent to measure from.
    let virt_parent = Vec3::new(-CC_SINGLE, 0.0, 0.0);
    let virt_grand = Vec3::new(-CC_SINGLE - 0.5, 1.4, 0.0);
    let mut pos: Vec<Vec3> = Vec::with_capacity(n);
    let mut children_seen = vec![0usize; n];
    let parent_pos = |pos: &Vec<Vec3>, x: usize| match parents[x] {
        Some(p) => pos[p],
        None => virt_parent,
    };
    let grand_pos = |pos: &Vec<Vec3>, x: usize| match parents[x] {
        Some(p) => parent_pos(pos, p),
        None => virt_grand,
    };
    let mut bonds = Vec::new();
    for i in 0..n {
        match parents[i] {
            None => pos.push(Vec3::zeros()),
            Some(p) => {
                assert!(p < i, "parents must precede children");
                let k = children_seen[p];
                children_seen[p] += 1;
                let torsion = 180.0 + 120.0 * k as f64;
                let x = place(&grand_pos(&pos, p), &parent_pos(&pos, p), &pos[p], CC_SINGLE, TETRAHEDRAL, torsion);
                pos.push(x);
                bonds.push(Bond::new(p, i, BondOrder::Single));
            }
        }
    }
    let atoms = pos.iter().map(|p| Atom::new("C", *p)).collect();
    MolecularGraph::new(name.to_string(), atoms, bonds).expect("fixture graphs are valid")
}

fn chain_parents(n: usize) -> Vec<Option<usize>> {
    (0..n).map(|i| if i == 0 { None } else { Some(i - 1) }).collect()
}

/// 3-methylhexane: hexane backbone with a methyl on C3.
pub fn methylhexane() -> MolecularGraph {
    let mut p = chain_parents(6);
    p.push(Some(2));
    branched("3-methylhexane", &p)
}

/// 3-ethyl-4-methylheptane.
pub fn ethylmethylheptane() -> MolecularGraph {
    let mut p = chain_parents(7);
    p.push(Some(2));
    p.push(Some(7));
    p.push(Some(3));
    branched("3-ethyl-4-methylheptane", &p)
}

/// 4-propylheptane: three propyl arms on one carbon.
pub fn propylheptane() -> MolecularGraph {
    let mut p = chain_parents(7);
    p.push(Some(3));
    p.push(Some(7));
    p.push(Some(8));
    branched("4-propylheptane", &p)
}

pub fn benzene() -> MolecularGraph {
    let mut b = Builder::new("benzene");
    let ring: Vec<usize> = (0..6)
        .map(|k| {
            let th = PI / 3.0 * k as f64;
            b.add_atom("C", Vec3::new(th.cos(), th.sin(), 0.0) * CC_AROMATIC)
        })
        .collect();
    for k in 0..6 {
        b.add_bond(ring[k], ring[(k + 1) % 6], BondOrder::Aromatic);
    }
    b.finish()
}

/// Two hexagons joined by one single bond, rings twisted by `twist_deg`.
pub fn biphenyl_twisted(twist_deg: f64) -> MolecularGraph {
    let mut b = Builder::new("biphenyl");
    let ring: Vec<usize> = (0..6)
        .map(|k| {
            let th = PI / 3.0 * k as f64;
            b.add_atom("C", Vec3::new(th.cos(), th.sin(), 0.0) * CC_AROMATIC)
        })
        .collect();
    for k in 0..6 {
        b.add_bond(ring[k], ring[(k + 1) % 6], BondOrder::Aromatic);
    }
    let ipso = Vec3::new(CC_AROMATIC + RING_LINK, 0.0, 0.0);
    b.ring_at(ring[0], ipso, Vec3::new(0.0, 1.0, 0.0), twist_deg);
    b.finish()
}

pub fn biphenyl() -> MolecularGraph {
    biphenyl_twisted(40.0)
}

/// Phenyl–(CH2)n chain: `n_chain ≥ 2` sp3 carbons after the ring, ending in a
/// second phenyl when `cap_phenyl` is set.
pub fn phenyl_chain(n_chain: usize, cap_phenyl: bool, dihedrals_deg: &[f64]) -> MolecularGraph {
    assert!(n_chain >= 2, "phenyl chain needs at least two sp3 carbons");
    let name = format!("phenyl-C{n_chain}{}", if cap_phenyl { "-phenyl" } else { "" });
    let (mut b, [a0, a1, a2]) = seed_chain(&name);
    let mut atoms = vec![a0, a1, a2];
    let tors = |k: usize| if dihedrals_deg.is_empty() { 180.0 } else { dihedrals_deg[k % dihedrals_deg.len()] };
    let mut k = 0;
    while atoms.len() < n_chain + 1 {
        let l = atoms.len();
        let d = b.grow(atoms[l - 3], atoms[l - 2], atoms[l - 1], "C", CC_SINGLE, tors(k));
        k += 1;
        atoms.push(d);
    }
    // Atom a0 is turned into the ipso carbon of the first ring.
    let ipso = b.pos(a0);
    let start = b.atoms.len();
    let ring_center_dir = (b.pos(a0) - b.pos(a1)).normalize();
    let mut v = b.pos(a2) - b.pos(a1);
    v -= ring_center_dir * v.dot(&ring_center_dir);
    let v = v.normalize();
    let center = ipso + ring_center_dir * CC_AROMATIC;
    for m in 1..6 {
        let th = PI / 3.0 * m as f64;
        let p = center + (-ring_center_dir * th.cos() + v * th.sin()) * CC_AROMATIC;
        b.add_atom("C", p);
    }
    let ring: Vec<usize> = std::iter::once(a0).chain(start..start + 5).collect();
    for m in 0..6 {
        b.add_bond(ring[m], ring[(m + 1) % 6], BondOrder::Aromatic);
    }
    let l = atoms.len();
    if cap_phenyl {
        b.phenyl(atoms[l - 3], atoms[l - 2], atoms[l - 1], tors(k), 30.0);
    }
    b.finish()
}

/// Para-terphenyl-like chain of `n_rings` hexagons linked by single bonds.
pub fn polyphenyl(n_rings: usize, twist_deg: f64) -> MolecularGraph {
    assert!(n_rings >= 1);
    let mut b = Builder::new(&format!("polyphenyl-{n_rings}"));
    let mut ring: Vec<usize> = (0..6)
        .map(|k| {
            let th = PI / 3.0 * k as f64;
            b.add_atom("C", Vec3::new(th.cos(), th.sin(), 0.0) * CC_AROMATIC)
        })
        .collect();
    for k in 0..6 {
        b.add_bond(ring[k], ring[(k + 1) % 6], BondOrder::Aromatic);
    }
    // Each new ring hangs off the atom para to the previous link.
    let mut link_from = ring[3];
    let mut inward = ring[0];
    for r in 1..n_rings {
        let dir = (b.pos(link_from) - b.pos(inward)).normalize();
        let ipso = b.pos(link_from) + dir * RING_LINK;
        let hint = b.pos(ring[2]);
        let twist = if r % 2 == 1 { twist_deg } else { -twist_deg };
        ring = b.ring_at(link_from, ipso, hint, twist);
        inward = ring[0];
        link_from = ring[3];
    }
    b.finish()
}

/// Pocket atoms `offset` Å from every ligand atom: one pointing away from the
/// ligand centroid and two along ± the ligand's thinnest principal axis.
pub fn shell_pocket(coords: &[Vec3], offset: f64) -> Vec<Vec3> {
    let n = coords.len() as f64;
    let c: Vec3 = coords.iter().sum::<Vec3>() / n;
    let mut cov = nalgebra::Matrix3::zeros();
    for x in coords {
        cov += (x - c) * (x - c).transpose();
    }
    let eig = nalgebra::SymmetricEigen::new(cov);
    let imin = eig.eigenvalues.imin();
    let normal: Vec3 = eig.eigenvectors.column(imin).into_owned();
    let mut out = Vec::with_capacity(3 * coords.len());
    for x in coords {
        let r = x - c;
        let radial = if r.norm() > 1e-6 { r.normalize() } else { normal };
        out.push(x + radial * offset);
        out.push(x + normal * offset);
        out.push(x - normal * offset);
    }
    out
}

/// Ligand, bonds to cut, and a pocket in Å.
#[derive(Debug, Clone)]
pub struct Complex {
    pub graph: MolecularGraph,
    pub cuts: Vec<usize>,
    pub pocket: Vec<Vec3>,
}

fn complex(graph: MolecularGraph) -> Complex {
    let coords = graph.coordinates().expect("fixture has coordinates");
    let cuts = graph.torsional_bonds().to_vec();
    Complex { pocket: shell_pocket(&coords, 3.5), graph, cuts }
}

/// Terphenyl cut at both ring links: three rigid fragments.
pub fn terphenyl_complex() -> Complex {
    complex(polyphenyl(3, 35.0))
}

/// Biphenyl cut at the ring link: two rigid fragments.
pub fn biphenyl_complex() -> Complex {
    complex(biphenyl())
}

/// Flexible-chain corpus used for fragment-count statistics.
pub fn flexible_corpus() -> Vec<MolecularGraph> {
    let mut out = Vec::new();
    for n in 4..=12 {
        out.push(alkane_with_dihedrals(n, &[180.0, -65.0, 175.0, 70.0]));
    }
    out.push(methylhexane());
    out.push(ethylmethylheptane());
    out.push(propylheptane());
    for n in 2..=6 {
        out.push(phenyl_chain(n, false, &[180.0, 65.0]));
    }
    for n in 2..=5 {
        out.push(phenyl_chain(n, true, &[180.0, -60.0]));
    }
    out.push(polyphenyl(3, 35.0));
    out.push(polyphenyl(4, 35.0));
    out
}

/// Fixtures with at least two coupled torsions, used by the Gram audit.
pub fn coupled_torsion_fixtures() -> Vec<MolecularGraph> {
    vec![pentane(), methylhexane(), ethylmethylheptane()]
}
