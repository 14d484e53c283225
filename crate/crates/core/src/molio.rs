//! Molecular graphs: V2000 connection tables, ring and torsion perception,
//! and the JSON envelopes used for graphs, fragment sets, poses and pockets.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liegroup::Vec3;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(BondOrder::Single),
            2 => Some(BondOrder::Double),
            3 => Some(BondOrder::Triple),
            4 => Some(BondOrder::Aromatic),
            _ => None,
        }
    }

    pub fn code(self) -> u32 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub element: String,
    #[serde(default)]
    pub charge: i32,
    #[serde(default)]
    pub position: Option<[f64; 3]>,
}

impl Atom {
    pub fn new(element: &str, position: Vec3) -> Self {
        Atom { element: element.to_string(), charge: 0, position: Some([position.x, position.y, position.z]) }
    }

    pub fn is_hydrogen(&self) -> bool {
        matches!(self.element.as_str(), "H" | "D" | "T")
    }

    pub fn pos(&self) -> Option<Vec3> {
        self.position.map(|[x, y, z]| Vec3::new(x, y, z))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn new(i: usize, j: usize, order: BondOrder) -> Self {
        Bond { i, j, order }
    }

    pub fn other(&self, a: usize) -> usize {
        if self.i == a {
            self.j
        } else {
            self.i
        }
    }
}

/// Serialized form of a graph; perception results are recomputed on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    #[serde(default)]
    pub name: String,
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
}

/// Heavy-atom molecular graph with ring and torsion annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphRecord", into = "GraphRecord")]
pub struct MolecularGraph {
    name: String,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
    atom_in_ring: Vec<bool>,
    bond_in_ring: Vec<bool>,
    torsional: Vec<usize>,
}

impl TryFrom<GraphRecord> for MolecularGraph {
    type Error = Error;
    fn try_from(r: GraphRecord) -> Result<Self> {
        MolecularGraph::new(r.name, r.atoms, r.bonds)
    }
}

impl From<MolecularGraph> for GraphRecord {
    fn from(g: MolecularGraph) -> Self {
        GraphRecord { name: g.name, atoms: g.atoms, bonds: g.bonds }
    }
}

impl MolecularGraph {
    /// Validates the connection table and runs ring and torsion perception.
    /// Hydrogens must already be removed.
    pub fn new(name: String, atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self> {
        let n = atoms.len();
        if n == 0 {
            return Err(Error::InvalidGraph("no atoms".into()));
        }
        let mut adjacency = vec![Vec::new(); n];
        for (b, bond) in bonds.iter().enumerate() {
            if bond.i >= n || bond.j >= n {
                return Err(Error::InvalidGraph(format!("bond {b} references a missing atom")));
            }
            if bond.i == bond.j {
                return Err(Error::InvalidGraph(format!("bond {b} is a self loop")));
            }
            if adjacency[bond.i].iter().any(|&(nb, _)| nb == bond.j) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate bond between atoms {} and {}",
                    bond.i + 1,
                    bond.j + 1
                )));
            }
            adjacency[bond.i].push((bond.j, b));
            adjacency[bond.j].push((bond.i, b));
        }
        for list in adjacency.iter_mut() {
            list.sort_unstable();
        }
        let components = count_components(&adjacency);
        if components > 1 {
            return Err(Error::Disconnected { components });
        }
        let mut g = MolecularGraph {
            name,
            atoms,
            bonds,
            adjacency,
            atom_in_ring: vec![false; n],
            bond_in_ring: Vec::new(),
            torsional: Vec::new(),
        };
        g.detect_rings();
        g.detect_torsional_bonds();
        Ok(g)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// `(neighbor, bond index)` pairs sorted by neighbor.
    pub fn neighbors(&self, a: usize) -> &[(usize, usize)] {
        &self.adjacency[a]
    }

    pub fn degree(&self, a: usize) -> usize {
        self.adjacency[a].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency[a].iter().find(|&&(nb, _)| nb == b).map(|&(_, id)| id)
    }

    pub fn atom_in_ring(&self, a: usize) -> bool {
        self.atom_in_ring[a]
    }

    pub fn bond_in_ring(&self, b: usize) -> bool {
        self.bond_in_ring[b]
    }

    /// Indices of torsional bonds, ascending.
    pub fn torsional_bonds(&self) -> &[usize] {
        &self.torsional
    }

    pub fn is_torsional(&self, b: usize) -> bool {
        self.torsional.binary_search(&b).is_ok()
    }

    pub fn has_coordinates(&self) -> bool {
        self.atoms.iter().all(|a| a.position.is_some())
    }

    pub fn coordinates(&self) -> Result<Vec<Vec3>> {
        self.atoms.iter().map(|a| a.pos().ok_or(Error::NoCoordinates)).collect()
    }

    /// Copy of the graph with new atom positions.
    pub fn with_coordinates(&self, coords: &[Vec3]) -> Result<Self> {
        if coords.len() != self.atoms.len() {
            return Err(Error::DimensionMismatch { expected: self.atoms.len(), got: coords.len() });
        }
        let mut g = self.clone();
        for (a, x) in g.atoms.iter_mut().zip(coords) {
            a.position = Some([x.x, x.y, x.z]);
        }
        Ok(g)
    }

    /// A bond lies on a cycle iff it is not a bridge; an atom is in a ring iff
    /// one of its bonds is.
    fn detect_rings(&mut self) {
        let bridges = find_bridges(&self.adjacency);
        self.bond_in_ring = (0..self.bonds.len()).map(|b| !bridges[b]).collect();
        self.atom_in_ring = vec![false; self.atoms.len()];
        for (b, bond) in self.bonds.iter().enumerate() {
            if self.bond_in_ring[b] {
                self.atom_in_ring[bond.i] = true;
                self.atom_in_ring[bond.j] = true;
            }
        }
    }

    /// Single, acyclic bonds whose endpoints both have heavy-atom degree ≥ 2.
    fn detect_torsional_bonds(&mut self) {
        self.torsional = self
            .bonds
            .iter()
            .enumerate()
            .filter(|(b, bond)| {
                bond.order == BondOrder::Single
                    && !self.bond_in_ring[*b]
                    && self.degree(bond.i) >= 2
                    && self.degree(bond.j) >= 2
            })
            .map(|(b, _)| b)
            .collect();
    }

    /// Atoms reachable from `start` without crossing bond `blocked`.
    pub fn side_of_bond(&self, start: usize, blocked: usize) -> Vec<bool> {
        let mut seen = vec![false; self.atoms.len()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(a) = stack.pop() {
            for &(nb, b) in &self.adjacency[a] {
                if b != blocked && !seen[nb] {
                    seen[nb] = true;
                    stack.push(nb);
                }
            }
        }
        seen
    }
}

fn count_components(adjacency: &[Vec<(usize, usize)>]) -> usize {
    let n = adjacency.len();
    let mut seen = vec![false; n];
    let mut count = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(a) = stack.pop() {
            for &(nb, _) in &adjacency[a] {
                if !seen[nb] {
                    seen[nb] = true;
                    stack.push(nb);
                }
            }
        }
    }
    count
}

/// Bridge flags per bond, by iterative low-link DFS.
fn find_bridges(adjacency: &[Vec<(usize, usize)>]) -> Vec<bool> {
    let n = adjacency.len();
    let n_bonds = adjacency.iter().map(|l| l.len()).sum::<usize>() / 2;
    let mut bridge = vec![false; n_bonds];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (vertex, bond used to enter, next neighbor slot)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (v, parent_bond, ref mut slot)) = stack.last_mut() {
            if *slot < adjacency[v].len() {
                let (w, b) = adjacency[v][*slot];
                *slot += 1;
                if b == parent_bond {
                    continue;
                }
                if disc[w] == usize::MAX {
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    stack.push((w, b, 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(u, _, _)) = stack.last() {
                    low[u] = low[u].min(low[v]);
                    if low[v] > disc[u] {
                        bridge[parent_bond] = true;
                    }
                }
            }
        }
    }
    bridge
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn field(line: &str, start: usize, end: usize) -> Option<&str> {
    let end = end.min(line.len());
    if start >= end {
        return None;
    }
    line.get(start..end).map(str::trim)
}

fn charge_from_code(code: i32) -> i32 {
    match code {
        1 => 3,
        2 => 2,
        3 => 1,
        5 => -1,
        6 => -2,
        7 => -3,
        _ => 0,
    }
}

fn charge_to_code(charge: i32) -> i32 {
    match charge {
        3 => 1,
        2 => 2,
        1 => 3,
        -1 => 5,
        -2 => 6,
        -3 => 7,
        _ => 0,
    }
}

fn parse_atom_line(line: &str, lineno: usize) -> Result<Atom> {
    let fixed = || -> Option<Atom> {
        let x = field(line, 0, 10)?.parse().ok()?;
        let y = field(line, 10, 20)?.parse().ok()?;
        let z = field(line, 20, 30)?.parse().ok()?;
        let element = field(line, 31, 34)?;
        if element.is_empty() || !element.chars().all(|c| c.is_ascii_alphabetic()) {
            return None;
        }
        let code = field(line, 36, 39).and_then(|c| c.parse().ok()).unwrap_or(0);
        Some(Atom { element: element.to_string(), charge: charge_from_code(code), position: Some([x, y, z]) })
    };
    if let Some(a) = fixed() {
        return Ok(a);
    }
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() < 4 {
        return Err(parse_err(lineno, "atom line needs x, y, z and element"));
    }
    let coord = |s: &str| s.parse::<f64>().map_err(|_| parse_err(lineno, format!("bad coordinate '{s}'")));
    let (x, y, z) = (coord(tokens[0])?, coord(tokens[1])?, coord(tokens[2])?);
    let element = tokens[3];
    if !element.chars().all(|c| c.is_ascii_alphabetic()) {
        return Err(parse_err(lineno, format!("bad element symbol '{element}'")));
    }
    let code = tokens.get(5).and_then(|c| c.parse().ok()).unwrap_or(0);
    if !(x.is_finite() && y.is_finite() && z.is_finite()) {
        return Err(parse_err(lineno, "non-finite coordinate"));
    }
    Ok(Atom { element: element.to_string(), charge: charge_from_code(code), position: Some([x, y, z]) })
}

fn parse_bond_line(line: &str, lineno: usize, n_atoms: usize) -> Result<Bond> {
    let fixed = || -> Option<(usize, usize, u32)> {
        Some((
            field(line, 0, 3)?.parse().ok()?,
            field(line, 3, 6)?.parse().ok()?,
            field(line, 6, 9)?.parse().ok()?,
        ))
    };
    let (i, j, code) = match fixed() {
        Some(t) => t,
        None => {
            let t: Vec<&str> = line.split_whitespace().collect();
            let num = |k: usize| -> Result<usize> {
                t.get(k)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| parse_err(lineno, "bond line needs i, j and order"))
            };
            (num(0)?, num(1)?, num(2)? as u32)
        }
    };
    let order = BondOrder::from_code(code)
        .ok_or_else(|| parse_err(lineno, format!("unsupported bond order {code}")))?;
    if i == 0 || j == 0 || i > n_atoms || j > n_atoms {
        return Err(parse_err(lineno, format!("bond atom index out of range 1..={n_atoms}")));
    }
    if i == j {
        return Err(parse_err(lineno, "bond joins an atom to itself"));
    }
    Ok(Bond::new(i - 1, j - 1, order))
}

/// Parses the first record of a V2000 MOL/SDF text and strips hydrogens.
pub fn parse_sdf(text: &str) -> Result<MolecularGraph> {
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() < 4 {
        return Err(parse_err(lines.len() + 1, "missing header or counts line"));
    }
    let name = lines[0].trim().to_string();
    let counts = lines[3];
    let read_count = |s: usize, e: usize| field(counts, s, e).and_then(|v| v.parse::<usize>().ok());
    let (n_atoms, n_bonds) = match (read_count(0, 3), read_count(3, 6)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            let t: Vec<&str> = counts.split_whitespace().collect();
            match (t.first().and_then(|s| s.parse().ok()), t.get(1).and_then(|s| s.parse().ok())) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(parse_err(4, "malformed counts line")),
            }
        }
    };
    if counts.contains("V3000") {
        return Err(parse_err(4, "V3000 connection tables are not supported"));
    }
    if n_atoms == 0 {
        return Err(parse_err(4, "molecule has no atoms"));
    }
    if lines.len() < 4 + n_atoms + n_bonds {
        return Err(parse_err(lines.len() + 1, "connection table truncated"));
    }

    let mut atoms = Vec::with_capacity(n_atoms);
    for k in 0..n_atoms {
        atoms.push(parse_atom_line(lines[4 + k], 5 + k)?);
    }
    let mut bonds = Vec::with_capacity(n_bonds);
    for k in 0..n_bonds {
        let lineno = 5 + n_atoms + k;
        bonds.push(parse_bond_line(lines[4 + n_atoms + k], lineno, n_atoms)?);
    }
    for (k, line) in lines.iter().enumerate().skip(4 + n_atoms + n_bonds) {
        if line.starts_with("M  END") || line.starts_with("$$$$") {
            break;
        }
        if let Some(rest) = line.strip_prefix("M  CHG") {
            let t: Vec<i64> = rest.split_whitespace().filter_map(|s| s.parse().ok()).collect();
            for pair in t.get(1..).unwrap_or(&[]).chunks(2) {
                if let [idx, chg] = *pair {
                    let idx = idx as usize;
                    if idx == 0 || idx > n_atoms {
                        return Err(parse_err(k + 1, "charge entry references a missing atom"));
                    }
                    atoms[idx - 1].charge = chg as i32;
                }
            }
        }
    }

    strip_hydrogens(name, atoms, bonds)
}

fn strip_hydrogens(name: String, atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<MolecularGraph> {
    let mut remap = vec![usize::MAX; atoms.len()];
    let mut heavy = Vec::new();
    for (i, a) in atoms.into_iter().enumerate() {
        if !a.is_hydrogen() {
            remap[i] = heavy.len();
            heavy.push(a);
        }
    }
    if heavy.is_empty() {
        return Err(parse_err(4, "molecule has no heavy atoms"));
    }
    let bonds = bonds
        .into_iter()
        .filter(|b| remap[b.i] != usize::MAX && remap[b.j] != usize::MAX)
        .map(|b| Bond::new(remap[b.i], remap[b.j], b.order))
        .collect();
    MolecularGraph::new(name, heavy, bonds)
}

/// Writes a V2000 record with 4-decimal coordinates.
pub fn write_sdf(g: &MolecularGraph, coords: &[Vec3]) -> Result<String> {
    if coords.len() != g.n_atoms() {
        return Err(Error::DimensionMismatch { expected: g.n_atoms(), got: coords.len() });
    }
    let mut out = String::new();
    out.push_str(g.name());
    out.push('\n');
    out.push_str("  fragdiff\n\n");
    out.push_str(&format!("{:>3}{:>3}  0  0  0  0  0  0  0  0999 V2000\n", g.n_atoms(), g.bonds().len()));
    for (a, x) in g.atoms().iter().zip(coords) {
        out.push_str(&format!(
            "{:>10.4}{:>10.4}{:>10.4} {:<3} 0{:>3}  0  0  0  0  0  0  0  0  0  0\n",
            x.x,
            x.y,
            x.z,
            a.element,
            charge_to_code(a.charge)
        ));
    }
    for b in g.bonds() {
        out.push_str(&format!("{:>3}{:>3}{:>3}  0  0  0  0\n", b.i + 1, b.j + 1, b.order.code()));
    }
    out.push_str("M  END\n$$$$\n");
    Ok(out)
}

/// Versioned JSON wrapper shared by every serialized artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema_version: u32,
    pub kind: String,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub metadata: serde_json::Map<String, serde_json::Value>,
    pub data: T,
}

impl<T: Serialize + DeserializeOwned> Envelope<T> {
    pub fn new(kind: &str, data: T) -> Self {
        Envelope { schema_version: SCHEMA_VERSION, kind: kind.to_string(), metadata: Default::default(), data }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and checks schema version and kind.
    pub fn from_json(text: &str, kind: &str) -> Result<Self> {
        let env: Envelope<T> = serde_json::from_str(text)?;
        if env.schema_version != SCHEMA_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                env.schema_version
            )));
        }
        if env.kind != kind {
            return Err(Error::Serialization(format!("expected a '{kind}' document, found '{}'", env.kind)));
        }
        Ok(env)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PocketAtom {
    pub element: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Pre-extracted binding-site atoms.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Pocket {
    pub atoms: Vec<PocketAtom>,
}

impl Pocket {
    pub fn from_positions(element: &str, positions: &[Vec3]) -> Self {
        Pocket {
            atoms: positions
                .iter()
                .map(|p| PocketAtom { element: element.to_string(), x: p.x, y: p.y, z: p.z })
                .collect(),
        }
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.atoms.iter().map(|a| Vec3::new(a.x, a.y, a.z)).collect()
    }

    pub fn centroid(&self) -> Option<Vec3> {
        if self.atoms.is_empty() {
            return None;
        }
        let sum: Vec3 = self.positions().iter().sum();
        Some(sum / self.atoms.len() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        Envelope::new("pocket", self.clone()).to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p = Envelope::<Pocket>::from_json(text, "pocket")?.data;
        if p.atoms.iter().any(|a| !(a.x.is_finite() && a.y.is_finite() && a.z.is_finite())) {
            return Err(Error::Serialization("pocket contains non-finite coordinates".into()));
        }
        Ok(p)
    }
}

pub fn graph_to_json(g: &MolecularGraph) -> Result<String> {
    Envelope::new("graph", g.clone()).to_json()
}

pub fn graph_from_json(text: &str) -> Result<MolecularGraph> {
    Ok(Envelope::<MolecularGraph>::from_json(text, "graph")?.data)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BUTANE: &str = "butane
  test

  4  3  0  0  0  0  0  0  0  0999 V2000
   -1.9000    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
   -0.6000    0.8000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    0.6000    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    1.9000    0.8000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
  1  2  1  0  0  0  0
  2  3  1  0  0  0  0
  3  4  1  0  0  0  0
M  END
$$$$
";

    #[test]
    fn butane_has_one_torsion() {
        let g = parse_sdf(BUTANE).unwrap();
        assert_eq!(g.n_atoms(), 4);
        assert_eq!(g.bonds().len(), 3);
        assert_eq!(g.torsional_bonds(), &[1]);
        assert!((0..4).all(|a| !g.atom_in_ring(a)));
    }

    #[test]
    fn hydrogens_are_stripped() {
        let text = "ethane


  3  2  0  0  0  0  0  0  0  0999 V2000
    0.0000    0.0000    0.0000 C   0  0
    1.5000    0.0000    0.0000 C   0  0
   -0.5000    0.9000    0.0000 H   0  0
  1  2  1  0
  1  3  1  0
M  END
";
        let g = parse_sdf(text).unwrap();
        assert_eq!(g.n_atoms(), 2);
        assert_eq!(g.bonds().len(), 1);
        assert!(g.torsional_bonds().is_empty());
    }

    #[test]
    fn empty_molecule_is_a_parse_error() {
        let text = "empty\n\n\n  0  0  0  0  0  0  0  0  0  0999 V2000\nM  END\n";
        assert!(matches!(parse_sdf(text), Err(Error::Parse { line: 4, .. })));
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let bad_counts = BUTANE.replace("  4  3  0", "  x  y  z");
        assert!(matches!(parse_sdf(&bad_counts), Err(Error::Parse { line: 4, .. })));
        let bad_atom = BUTANE.replace("    0.6000    0.0000    0.0000 C", "    abc");
        assert!(matches!(parse_sdf(&bad_atom), Err(Error::Parse { line: 7, .. })));
        let bad_bond = BUTANE.replace("  3  4  1", "  3  9  1");
        assert!(matches!(parse_sdf(&bad_bond), Err(Error::Parse { line: 11, .. })));
        let truncated: String = BUTANE.lines().take(6).collect::<Vec<_>>().join("\n");
        assert!(matches!(parse_sdf(&truncated), Err(Error::Parse { .. })));
    }

    #[test]
    fn disconnected_is_rejected() {
        let text = BUTANE.replace("  4  3  0", "  4  2  0").replace("  2  3  1  0  0  0  0\n", "");
        assert!(matches!(parse_sdf(&text), Err(Error::Disconnected { components: 2 })));
    }

    #[test]
    fn duplicate_bond_is_rejected() {
        let atoms = vec![Atom::new("C", Vec3::zeros()), Atom::new("C", Vec3::x())];
        let bonds = vec![Bond::new(0, 1, BondOrder::Single), Bond::new(1, 0, BondOrder::Single)];
        assert!(MolecularGraph::new(String::new(), atoms, bonds).is_err());
    }

    #[test]
    fn charges_roundtrip() {
        let text = BUTANE.replace(
            "    1.9000    0.8000    0.0000 C   0  0",
            "    1.9000    0.8000    0.0000 N   0  3",
        );
        let g = parse_sdf(&text).unwrap();
        assert_eq!(g.atoms()[3].charge, 1);
        let out = write_sdf(&g, &g.coordinates().unwrap()).unwrap();
        assert_eq!(parse_sdf(&out).unwrap(), g);
    }

    #[test]
    fn json_roundtrip_and_kind_check() {
        let g = parse_sdf(BUTANE).unwrap();
        let s = graph_to_json(&g).unwrap();
        assert_eq!(graph_from_json(&s).unwrap(), g);
        assert!(Pocket::from_json(&s).is_err());
        let p = Pocket::from_positions("C", &[Vec3::new(1.0, 2.0, 3.0)]);
        assert_eq!(Pocket::from_json(&p.to_json().unwrap()).unwrap(), p);
    }
}
