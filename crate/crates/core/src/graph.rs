//! Scalar Feynman graphs: representation, power counting, isomorphism,
//! enumeration and the subgraph/cograph operations used by the coproduct.
//!
//! Graphs are multigraphs of internal edges between vertices, plus labeled
//! external legs attached to vertices. Two canonical forms exist: one that
//! fixes every leg label ([`LegMode::Labeled`], used for enumeration and
//! symmetry factors) and one that only remembers where legs sit
//! ([`LegMode::Unlabeled`], used for Hopf-algebra generators).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;
use num::{BigInt, BigRational, One};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("power counting of an empty component")]
    EmptyComponent,
    #[error("deleting the empty subgraph or the whole graph is handled by the caller")]
    TrivialDeletion,
    #[error("loop order {requested} exceeds the configured bound {bound}")]
    LoopBound { requested: u32, bound: u32 },
    #[error("{0} internal edges is too many for exhaustive subgraph search")]
    TooLarge(usize),
    #[error("malformed graph key `{0}`")]
    BadKey(String),
}

pub type Result<T> = std::result::Result<T, GraphError>;

/// Scalar theory with an m-valent interaction in d dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Theory {
    pub m: u32,
    pub d: u32,
}

impl Theory {
    pub const PHI3_D6: Theory = Theory { m: 3, d: 6 };

    pub fn new(m: u32, d: u32) -> Result<Self> {
        if m < 3 || d < 1 {
            return Err(GraphError::Invalid(format!("theory m={m}, d={d} needs m >= 3, d >= 1")));
        }
        Ok(Theory { m, d })
    }

    /// Scaling degree of a single propagator.
    pub fn propagator_weight(&self) -> i64 {
        self.d as i64 - 2
    }

    /// Vertex and edge counts of a 1PI graph with `n` legs and `loops` loops,
    /// or `None` when they are not integral. Tree-level propagator gives (0, -1).
    pub fn euler_counts(&self, n: u32, loops: u32) -> Option<(i64, i64)> {
        let m = self.m as i64;
        let l = loops as i64;
        let n = n as i64;
        let vn = 2 * (l - 1) + n;
        let en = m * (l - 1) + n;
        if vn % (m - 2) != 0 || en % (m - 2) != 0 {
            return None;
        }
        Some((vn / (m - 2), en / (m - 2)))
    }
}

impl Default for Theory {
    fn default() -> Self {
        Theory::PHI3_D6
    }
}

/// Residue of a Green's function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Residue {
    #[serde(alias = "propagator")]
    Prop,
    #[serde(alias = "vertex")]
    Vert,
}

impl Residue {
    pub fn n_ext(self, t: Theory) -> u32 {
        match self {
            Residue::Prop => 2,
            Residue::Vert => t.m,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Residue::Prop => "prop",
            Residue::Vert => "vert",
        }
    }
}

impl std::str::FromStr for Residue {
    type Err = GraphError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prop" | "propagator" | "edge" => Ok(Residue::Prop),
            "vert" | "vertex" => Ok(Residue::Vert),
            _ => Err(GraphError::Invalid(format!("unknown residue `{s}` (expected prop or vert)"))),
        }
    }
}

impl fmt::Display for Residue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A multigraph with labeled external legs.
///
/// `edges` holds vertex-index pairs, `legs` holds (vertex index, leg label).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeynmanGraph {
    pub theory: Theory,
    pub vertices: Vec<String>,
    pub edges: Vec<(usize, usize)>,
    pub legs: Vec<(usize, u32)>,
}

/// Pairs (vertex of the removed piece, vertex of the remaining graph) glued
/// together by an insertion.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IdentificationMap {
    pub pairs: Vec<(String, String)>,
}

impl IdentificationMap {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphJson {
    theory: Theory,
    vertices: Vec<String>,
    edges: Vec<(String, String)>,
    external: Vec<(String, u32)>,
}

impl Serialize for FeynmanGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut edges: Vec<(String, String)> = self
            .edges
            .iter()
            .map(|&(a, b)| {
                let (a, b) = (&self.vertices[a], &self.vertices[b]);
                if a <= b {
                    (a.clone(), b.clone())
                } else {
                    (b.clone(), a.clone())
                }
            })
            .collect();
        edges.sort();
        let mut external: Vec<(String, u32)> =
            self.legs.iter().map(|&(v, l)| (self.vertices[v].clone(), l)).collect();
        external.sort_by_key(|e| e.1);
        let mut vertices = self.vertices.clone();
        vertices.sort();
        GraphJson { theory: self.theory, vertices, edges, external }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FeynmanGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = GraphJson::deserialize(d)?;
        let edges: Vec<(&str, &str)> = j.edges.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let legs: Vec<(&str, u32)> = j.external.iter().map(|(v, l)| (v.as_str(), *l)).collect();
        let verts: Vec<&str> = j.vertices.iter().map(|s| s.as_str()).collect();
        FeynmanGraph::new(j.theory, &verts, &edges, &legs).map_err(serde::de::Error::custom)
    }
}

impl FeynmanGraph {
    /// Build from vertex names. Only referential integrity is checked here;
    /// use [`FeynmanGraph::validate`] for the valence condition.
    pub fn new(theory: Theory, vertices: &[&str], edges: &[(&str, &str)], legs: &[(&str, u32)]) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, v) in vertices.iter().enumerate() {
            if index.insert(*v, i).is_some() {
                return Err(GraphError::Invalid(format!("duplicate vertex `{v}`")));
            }
        }
        let look = |v: &str| {
            index.get(v).copied().ok_or_else(|| GraphError::Invalid(format!("unknown vertex `{v}`")))
        };
        let edges = edges.iter().map(|(a, b)| Ok((look(a)?, look(b)?))).collect::<Result<Vec<_>>>()?;
        let legs = legs.iter().map(|(v, l)| Ok((look(v)?, *l))).collect::<Result<Vec<_>>>()?;
        let mut labels: Vec<u32> = legs.iter().map(|l| l.1).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(GraphError::Invalid("repeated external leg label".into()));
        }
        Ok(FeynmanGraph { theory, vertices: vertices.iter().map(|s| s.to_string()).collect(), edges, legs })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| GraphError::Invalid(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serialization")
    }

    pub fn empty(theory: Theory) -> Self {
        FeynmanGraph { theory, vertices: vec![], edges: vec![], legs: vec![] }
    }

    /// Checks leg labels are 1..n and every vertex has total degree m.
    pub fn validate(&self) -> Result<()> {
        let mut labels: Vec<u32> = self.legs.iter().map(|l| l.1).collect();
        labels.sort_unstable();
        if labels.iter().enumerate().any(|(i, &l)| l != i as u32 + 1) {
            return Err(GraphError::Invalid("external leg labels must be exactly 1..n".into()));
        }
        for v in 0..self.vertices.len() {
            let deg = self.degree(v) + self.legs_at(v);
            if deg != self.theory.m as usize {
                return Err(GraphError::Invalid(format!(
                    "vertex `{}` has degree {deg}, expected {}",
                    self.vertices[v], self.theory.m
                )));
            }
        }
        Ok(())
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_external(&self) -> usize {
        self.legs.len()
    }

    /// Internal half-edges at `v` (a self-loop counts twice).
    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().map(|&(a, b)| (a == v) as usize + (b == v) as usize).sum()
    }

    pub fn legs_at(&self, v: usize) -> usize {
        self.legs.iter().filter(|l| l.0 == v).count()
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == name)
    }

    /// Connected components as vertex-index sets. Isolated vertices count.
    pub fn components(&self) -> Vec<Vec<usize>> {
        components_of(self.vertices.len(), self.edges.iter().copied())
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    pub fn loop_number(&self) -> usize {
        (self.edges.len() + self.components().len()) - self.vertices.len()
    }

    /// `(d-2)E - d(V - b0)`, the sum of the per-component degrees.
    pub fn sdd(&self) -> Result<i64> {
        if self.vertices.is_empty() {
            return Err(GraphError::EmptyComponent);
        }
        let d = self.theory.d as i64;
        Ok(self.theory.propagator_weight() * self.edges.len() as i64
            - d * (self.vertices.len() as i64 - self.components().len() as i64))
    }

    /// Per-edge bridge flags.
    pub fn bridges(&self) -> Vec<bool> {
        bridges_of(self.vertices.len(), &self.edges)
    }

    pub fn is_1pi(&self) -> bool {
        self.is_connected() && !self.bridges().iter().any(|&b| b)
    }

    /// Connected pieces that carry at least one internal edge. Edgeless
    /// pieces evaluate to the unit and are dropped.
    pub fn split_components(&self) -> Vec<FeynmanGraph> {
        let mut out = Vec::new();
        for comp in self.components() {
            let set: BTreeSet<usize> = comp.iter().copied().collect();
            let edges: Vec<usize> = (0..self.edges.len()).filter(|&e| set.contains(&self.edges[e].0)).collect();
            if edges.is_empty() {
                continue;
            }
            out.push(self.induced(&comp, &edges, false));
        }
        out
    }

    /// Subgraph on `verts` with the listed edges. With `fill_legs` every
    /// vertex is topped up with fresh legs until it has degree m.
    fn induced(&self, verts: &[usize], edges: &[usize], fill_legs: bool) -> FeynmanGraph {
        let pos: BTreeMap<usize, usize> = verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let e = edges.iter().map(|&e| (pos[&self.edges[e].0], pos[&self.edges[e].1])).collect_vec();
        let mut g = FeynmanGraph {
            theory: self.theory,
            vertices: verts.iter().map(|&v| self.vertices[v].clone()).collect(),
            edges: e,
            legs: vec![],
        };
        if fill_legs {
            let mut label = 1;
            for i in 0..verts.len() {
                for _ in g.degree(i)..self.theory.m as usize {
                    g.legs.push((i, label));
                    label += 1;
                }
            }
        } else {
            g.legs = self.legs.iter().filter(|l| pos.contains_key(&l.0)).map(|&(v, l)| (pos[&v], l)).collect();
        }
        g
    }
}

fn components_of(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in 0..n {
        let r = find(&mut parent, v);
        groups.entry(r).or_default().push(v);
    }
    groups.into_values().collect()
}

fn bridges_of(n: usize, edges: &[(usize, usize)]) -> Vec<bool> {
    let base = components_of(n, edges.iter().copied()).len();
    (0..edges.len())
        .map(|skip| {
            if edges[skip].0 == edges[skip].1 {
                return false;
            }
            let rest = edges.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, &e)| e);
            components_of(n, rest).len() > base
        })
        .collect()
}

/// An edge subset of a parent graph.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Subgraph {
    pub edges: BTreeSet<usize>,
}

impl Subgraph {
    pub fn new(edges: impl IntoIterator<Item = usize>) -> Self {
        Subgraph { edges: edges.into_iter().collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn is_whole(&self, g: &FeynmanGraph) -> bool {
        self.edges.len() == g.edges.len()
    }

    pub fn vertices(&self, g: &FeynmanGraph) -> BTreeSet<usize> {
        self.edges.iter().flat_map(|&e| [g.edges[e].0, g.edges[e].1]).collect()
    }

    /// All parent edges and legs at `v` belong to the subgraph.
    pub fn is_internal_vertex(&self, g: &FeynmanGraph, v: usize) -> bool {
        g.legs_at(v) == 0
            && (0..g.edges.len())
                .filter(|&e| g.edges[e].0 == v || g.edges[e].1 == v)
                .all(|e| self.edges.contains(&e))
    }

    pub fn external_vertices(&self, g: &FeynmanGraph) -> Vec<usize> {
        self.vertices(g).into_iter().filter(|&v| !self.is_internal_vertex(g, v)).collect()
    }

    pub fn internal_vertices(&self, g: &FeynmanGraph) -> Vec<usize> {
        self.vertices(g).into_iter().filter(|&v| self.is_internal_vertex(g, v)).collect()
    }

    /// Connected components, each again a subgraph of the parent.
    pub fn components(&self, g: &FeynmanGraph) -> Vec<Subgraph> {
        let verts: Vec<usize> = self.vertices(g).into_iter().collect();
        let pos: BTreeMap<usize, usize> = verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let comps = components_of(verts.len(), self.edges.iter().map(|&e| (pos[&g.edges[e].0], pos[&g.edges[e].1])));
        comps
            .into_iter()
            .map(|c| {
                let cv: BTreeSet<usize> = c.into_iter().map(|i| verts[i]).collect();
                Subgraph::new(self.edges.iter().copied().filter(|&e| cv.contains(&g.edges[e].0)))
            })
            .collect()
    }

    /// Per-component degree of divergence.
    pub fn sdd(&self, g: &FeynmanGraph) -> Result<Vec<i64>> {
        if self.is_empty() {
            return Err(GraphError::EmptyComponent);
        }
        Ok(self.components(g).iter().map(|c| c.as_graph(g).sdd().expect("nonempty")).collect())
    }

    /// The subgraph as a stand-alone graph, legs added so every vertex is m-valent.
    pub fn as_graph(&self, g: &FeynmanGraph) -> FeynmanGraph {
        let verts: Vec<usize> = self.vertices(g).into_iter().collect();
        let edges: Vec<usize> = self.edges.iter().copied().collect();
        g.induced(&verts, &edges, true)
    }

    pub fn edge_names(&self, g: &FeynmanGraph) -> Vec<String> {
        self.edges
            .iter()
            .map(|&e| {
                let (a, b) = (&g.vertices[g.edges[e].0], &g.vertices[g.edges[e].1]);
                if a <= b {
                    format!("{a}{b}")
                } else {
                    format!("{b}{a}")
                }
            })
            .sorted()
            .collect()
    }
}

/// Every edge subset whose components are 1PI with non-negative degree,
/// including the empty subset and (when it qualifies) the whole graph.
pub fn divergent_subgraphs(g: &FeynmanGraph) -> Result<Vec<Subgraph>> {
    let e = g.edges.len();
    if e > 24 {
        return Err(GraphError::TooLarge(e));
    }
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << e) {
        let s = Subgraph::new((0..e).filter(|i| mask >> i & 1 == 1));
        if s.is_empty() || s.components(g).iter().all(|c| is_divergent_piece(g, c)) {
            out.push(s);
        }
    }
    out.sort_by(|a, b| a.edges.len().cmp(&b.edges.len()).then_with(|| a.cmp(b)));
    Ok(out)
}

fn is_divergent_piece(g: &FeynmanGraph, c: &Subgraph) -> bool {
    let h = c.as_graph(g);
    h.is_1pi() && h.sdd().map(|s| s >= 0).unwrap_or(false)
}

/// Remove the subgraph's edges and internal vertices; external vertices stay
/// and are identified with the subgraph's copies.
pub fn delete_subgraph(g: &FeynmanGraph, s: &Subgraph) -> Result<(FeynmanGraph, IdentificationMap)> {
    if s.is_empty() || s.is_whole(g) {
        return Err(GraphError::TrivialDeletion);
    }
    let internal: BTreeSet<usize> = s.internal_vertices(g).into_iter().collect();
    let keep: Vec<usize> = (0..g.vertices.len()).filter(|v| !internal.contains(v)).collect();
    let edges: Vec<usize> = (0..g.edges.len()).filter(|e| !s.edges.contains(e)).collect();
    let cograph = g.induced(&keep, &edges, false);
    let ident = IdentificationMap {
        pairs: s.external_vertices(g).into_iter().map(|v| (g.vertices[v].clone(), g.vertices[v].clone())).collect(),
    };
    Ok((cograph, ident))
}

/// Replace chosen vertices and edges by open slots.
///
/// Each vertex in `exploded` is removed; every half-edge that met it ends on a
/// fresh slot vertex (a leg there moves onto its own slot). An edge with
/// `insertions[e] = k` is split into k+1 segments whose inner ends are slots.
/// One identification map is produced per exploded vertex and per insertion.
pub fn cut_graph(
    g: &FeynmanGraph,
    exploded: &BTreeSet<usize>,
    insertions: &[u32],
) -> (FeynmanGraph, Vec<IdentificationMap>) {
    assert_eq!(insertions.len(), g.edges.len());
    let mut out = FeynmanGraph::empty(g.theory);
    let mut new_index = vec![usize::MAX; g.vertices.len()];
    for v in 0..g.vertices.len() {
        if !exploded.contains(&v) {
            new_index[v] = out.vertices.len();
            out.vertices.push(g.vertices[v].clone());
        }
    }
    let mut slot_count = 0usize;
    let mut slot = |out: &mut FeynmanGraph| {
        slot_count += 1;
        out.vertices.push(format!("s{slot_count}"));
        out.vertices.len() - 1
    };
    let mut vertex_maps: BTreeMap<usize, IdentificationMap> = exploded.iter().map(|&v| (v, Default::default())).collect();
    let mut edge_maps = Vec::new();
    for &(v, label) in &g.legs {
        if exploded.contains(&v) {
            let s = slot(&mut out);
            out.legs.push((s, label));
            vertex_maps.get_mut(&v).unwrap().pairs.push((g.vertices[v].clone(), out.vertices[s].clone()));
        } else {
            out.legs.push((new_index[v], label));
        }
    }
    for (e, &(a, b)) in g.edges.iter().enumerate() {
        let mut end = |v: usize, out: &mut FeynmanGraph| {
            if exploded.contains(&v) {
                let s = slot(out);
                vertex_maps.get_mut(&v).unwrap().pairs.push((g.vertices[v].clone(), out.vertices[s].clone()));
                s
            } else {
                new_index[v]
            }
        };
        let start = end(a, &mut out);
        let stop = end(b, &mut out);
        let mut cur = start;
        for _ in 0..insertions[e] {
            let s1 = slot(&mut out);
            let s2 = slot(&mut out);
            out.edges.push((cur, s1));
            edge_maps.push(IdentificationMap {
                pairs: vec![
                    ("in".to_string(), out.vertices[s1].clone()),
                    ("out".to_string(), out.vertices[s2].clone()),
                ],
            });
            cur = s2;
        }
        out.edges.push((cur, stop));
    }
    let mut maps: Vec<IdentificationMap> = vertex_maps.into_values().collect();
    maps.extend(edge_maps);
    (out, maps)
}

/// How legs enter a canonical form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LegMode {
    /// Leg labels are fixed pointwise.
    Labeled,
    /// Only the number of legs at each vertex matters.
    Unlabeled,
}

/// Canonical key of an isomorphism class. The string is also a complete
/// encoding of the class and can be decoded back into a representative.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GraphKey(pub String);

impl GraphKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }

    /// Short stable tag for display.
    pub fn short(&self) -> String {
        format!("{:08x}", fnv1a(self.0.as_bytes()) as u32)
    }

    /// Rebuild a representative with vertices named `v0, v1, ...`.
    pub fn decode(&self) -> Result<FeynmanGraph> {
        let bad = || GraphError::BadKey(self.0.clone());
        let parts: Vec<&str> = self.0.split(';').collect();
        if parts.len() != 4 {
            return Err(bad());
        }
        let (m, d) = parts[0].strip_prefix('m').and_then(|s| s.split_once('d')).ok_or_else(bad)?;
        let theory = Theory { m: m.parse().map_err(|_| bad())?, d: d.parse().map_err(|_| bad())? };
        let nv: usize = parts[1].strip_prefix('v').ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let list = |s: &str, p: char| -> Result<Vec<String>> {
            let body = s.strip_prefix(p).ok_or_else(bad)?;
            Ok(if body.is_empty() { vec![] } else { body.split('.').map(String::from).collect() })
        };
        let mut edges = Vec::new();
        for e in list(parts[2], 'e')? {
            let (a, b) = e.split_once('-').ok_or_else(bad)?;
            let (a, b): (usize, usize) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
            if a >= nv || b >= nv {
                return Err(bad());
            }
            edges.push((a, b));
        }
        let mut legs = Vec::new();
        for (i, l) in list(parts[3], 'l')?.into_iter().enumerate() {
            let (v, label) = match l.split_once(':') {
                Some((v, lab)) => (v.parse::<usize>().map_err(|_| bad())?, lab.parse::<u32>().map_err(|_| bad())?),
                None => (l.parse::<usize>().map_err(|_| bad())?, i as u32 + 1),
            };
            if v >= nv {
                return Err(bad());
            }
            legs.push((v, label));
        }
        Ok(FeynmanGraph { theory, vertices: (0..nv).map(|i| format!("v{i}")).collect(), edges, legs })
    }
}

impl fmt::Display for GraphKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Result of a canonical labeling.
#[derive(Clone, Debug)]
pub struct Canonical {
    pub key: GraphKey,
    /// `order[i]` is the original vertex placed at canonical position i.
    pub order: Vec<usize>,
    /// Number of vertex permutations preserving the graph.
    pub vertex_automorphisms: u64,
}

type Encoding = (Vec<(usize, usize)>, Vec<(usize, u32)>);

/// Canonical labeling by exhaustive search over colour-class permutations.
pub fn canonicalize(g: &FeynmanGraph, mode: LegMode) -> Canonical {
    let n = g.vertices.len();
    let colors = refine_colors(g, mode);
    let mut cells: Vec<Vec<usize>> = vec![];
    for (_, grp) in &(0..n).sorted_by_key(|&v| (colors[v], v)).group_by(|&v| colors[v]) {
        cells.push(grp.collect());
    }
    let cell_perms: Vec<Vec<Vec<usize>>> =
        cells.iter().map(|c| c.iter().copied().permutations(c.len()).collect()).collect();

    let mut best: Option<(Encoding, Vec<usize>)> = None;
    let mut count = 0u64;
    let mut order = Vec::with_capacity(n);
    search_orders(&cell_perms, 0, &mut order, &mut |ord: &[usize]| {
        let enc = encode(g, ord, mode);
        match &best {
            Some((b, _)) if enc > *b => {}
            Some((b, _)) if enc == *b => count += 1,
            _ => {
                best = Some((enc, ord.to_vec()));
                count = 1;
            }
        }
    });
    let (enc, order) = best.unwrap_or_default();
    Canonical { key: key_string(g.theory, n, &enc, mode), order, vertex_automorphisms: count }
}

fn search_orders(cells: &[Vec<Vec<usize>>], i: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if i == cells.len() {
        f(cur);
        return;
    }
    for p in &cells[i] {
        let len = cur.len();
        cur.extend_from_slice(p);
        search_orders(cells, i + 1, cur, f);
        cur.truncate(len);
    }
}

fn encode(g: &FeynmanGraph, order: &[usize], mode: LegMode) -> Encoding {
    let mut pos = vec![0; order.len()];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let mut edges: Vec<(usize, usize)> = g
        .edges
        .iter()
        .map(|&(a, b)| (pos[a].min(pos[b]), pos[a].max(pos[b])))
        .collect();
    edges.sort_unstable();
    let mut legs: Vec<(usize, u32)> = g
        .legs
        .iter()
        .map(|&(v, l)| (pos[v], if mode == LegMode::Labeled { l } else { 0 }))
        .collect();
    legs.sort_unstable();
    (edges, legs)
}

fn key_string(t: Theory, n: usize, enc: &Encoding, mode: LegMode) -> GraphKey {
    let e = enc.0.iter().map(|(a, b)| format!("{a}-{b}")).join(".");
    let l = enc
        .1
        .iter()
        .map(|(v, lab)| if mode == LegMode::Labeled { format!("{v}:{lab}") } else { v.to_string() })
        .join(".");
    GraphKey(format!("m{}d{};v{n};e{e};l{l}", t.m, t.d))
}

/// Iterated colour refinement; colours are ranks of sorted signatures, so
/// they depend only on the isomorphism class.
fn refine_colors(g: &FeynmanGraph, mode: LegMode) -> Vec<usize> {
    let n = g.vertices.len();
    let init: Vec<Vec<i64>> = (0..n)
        .map(|v| {
            let mut legs: Vec<i64> = g
                .legs
                .iter()
                .filter(|l| l.0 == v)
                .map(|l| if mode == LegMode::Labeled { l.1 as i64 } else { 0 })
                .collect();
            legs.sort_unstable();
            let loops = g.edges.iter().filter(|&&(a, b)| a == v && b == v).count() as i64;
            let mut sig = vec![g.degree(v) as i64, loops, legs.len() as i64];
            sig.extend(legs);
            sig
        })
        .collect();
    let mut colors = ranks(&init);
    loop {
        let sigs: Vec<Vec<i64>> = (0..n)
            .map(|v| {
                let mut nb: Vec<i64> = g
                    .edges
                    .iter()
                    .filter_map(|&(a, b)| match (a == v, b == v) {
                        (true, false) => Some(colors[b] as i64),
                        (false, true) => Some(colors[a] as i64),
                        _ => None,
                    })
                    .collect();
                nb.sort_unstable();
                let mut s = vec![colors[v] as i64];
                s.extend(nb);
                s
            })
            .collect();
        let next = ranks(&sigs);
        let distinct = |c: &[usize]| c.iter().collect::<BTreeSet<_>>().len();
        if distinct(&next) == distinct(&colors) {
            return next;
        }
        colors = next;
    }
}

fn ranks(sigs: &[Vec<i64>]) -> Vec<usize> {
    let sorted: Vec<&Vec<i64>> = sigs.iter().sorted().dedup().collect();
    sigs.iter().map(|s| sorted.binary_search(&s).unwrap()).collect()
}

/// Canonical key fixing external leg labels.
pub fn canonical_form(g: &FeynmanGraph) -> GraphKey {
    canonicalize(g, LegMode::Labeled).key
}

/// Canonical key forgetting leg labels.
pub fn unlabeled_form(g: &FeynmanGraph) -> GraphKey {
    canonicalize(g, LegMode::Unlabeled).key
}

/// Order of the automorphism group with legs fixed: vertex permutations
/// times swaps of parallel edges and flips of self-loops.
pub fn automorphism_count(g: &FeynmanGraph) -> u64 {
    symmetry_order(g, canonicalize(g, LegMode::Labeled).vertex_automorphisms)
}

fn symmetry_order(g: &FeynmanGraph, vertex_aut: u64) -> u64 {
    let mut mult: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for &(a, b) in &g.edges {
        *mult.entry((a.min(b), a.max(b))).or_default() += 1;
    }
    let fact = |k: u64| (1..=k).product::<u64>();
    let edge_part: u64 = mult
        .iter()
        .map(|(&(a, b), &k)| if a == b { fact(k) * 2u64.pow(k as u32) } else { fact(k) })
        .product();
    vertex_aut * edge_part
}

/// One isomorphism class from [`enumerate_1pi`].
#[derive(Clone, Debug, Serialize)]
pub struct ClassEntry {
    pub key: GraphKey,
    pub graph: FeynmanGraph,
    pub automorphisms: u64,
    #[serde(serialize_with = "ser_ratio")]
    pub weight: BigRational,
}

fn ser_ratio<S: serde::Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

#[derive(Clone, Debug)]
pub struct EnumOptions {
    pub loop_bound: u32,
    pub allow_self_loops: bool,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions { loop_bound: 3, allow_self_loops: false }
    }
}

/// One representative per isomorphism class (legs fixed) of connected 1PI
/// graphs with `n` legs and `loops` loops, weighted by 1/|Aut|, sorted by key.
pub fn enumerate_1pi(t: Theory, n: u32, loops: u32, opts: &EnumOptions) -> Result<Vec<ClassEntry>> {
    if loops > opts.loop_bound {
        return Err(GraphError::LoopBound { requested: loops, bound: opts.loop_bound });
    }
    if n < 1 || loops < 1 {
        return Err(GraphError::Invalid(format!("enumeration needs n >= 1 and loops >= 1 (got n={n}, L={loops})")));
    }
    let Some((nv, ne)) = t.euler_counts(n, loops) else { return Ok(vec![]) };
    let (nv, ne) = (nv as usize, ne as usize);
    let candidates = candidate_multigraphs(t, n, nv, ne, opts.allow_self_loops);
    let found: Vec<(GraphKey, FeynmanGraph)> = candidates
        .into_par_iter()
        .filter(|g| g.is_1pi())
        .map(|g| (canonical_form(&g), g))
        .collect();
    let mut classes: BTreeMap<GraphKey, FeynmanGraph> = BTreeMap::new();
    for (k, g) in found {
        classes.entry(k).or_insert(g);
    }
    let out = classes
        .into_par_iter()
        .map(|(key, _)| {
            let graph = key.decode().expect("own key");
            let automorphisms = automorphism_count(&graph);
            let weight = BigRational::new(BigInt::one(), BigInt::from(automorphisms));
            ClassEntry { key, graph, automorphisms, weight }
        })
        .collect::<Vec<_>>();
    let mut out = out;
    out.sort_by(|a, b| a.key.cmp(&b.key));
    Ok(out)
}

/// Vertex-labeled multigraphs with the given counts. Leg placements are taken
/// up to relabeling of vertices, edges are generated as sorted multisets.
fn candidate_multigraphs(t: Theory, n: u32, nv: usize, ne: usize, self_loops: bool) -> Vec<FeynmanGraph> {
    let m = t.m as usize;
    let mut placements = Vec::new();
    fn place(leg: usize, n: usize, nv: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if leg == n {
            out.push(cur.clone());
            return;
        }
        let used = cur.iter().copied().max().map_or(0, |x| x + 1);
        for v in 0..=used.min(nv - 1) {
            if cur.iter().filter(|&&u| u == v).count() < m {
                cur.push(v);
                place(leg + 1, n, nv, m, cur, out);
                cur.pop();
            }
        }
    }
    if nv == 0 {
        return vec![];
    }
    place(0, n as usize, nv, m, &mut vec![], &mut placements);

    let mut out = Vec::new();
    for p in placements {
        let mut rem: Vec<usize> = (0..nv).map(|v| m - p.iter().filter(|&&u| u == v).count()).collect();
        if rem.iter().sum::<usize>() != 2 * ne {
            continue;
        }
        let legs: Vec<(usize, u32)> = p.iter().enumerate().map(|(i, &v)| (v, i as u32 + 1)).collect();
        let mut edges = Vec::new();
        fill_edges(&mut rem, &mut edges, self_loops, &mut |edges| {
            out.push(FeynmanGraph {
                theory: t,
                vertices: (0..nv).map(|i| format!("v{i}")).collect(),
                edges: edges.to_vec(),
                legs: legs.clone(),
            });
        });
    }
    out
}

fn fill_edges(
    rem: &mut [usize],
    edges: &mut Vec<(usize, usize)>,
    self_loops: bool,
    emit: &mut impl FnMut(&[(usize, usize)]),
) {
    let Some(i) = rem.iter().position(|&r| r > 0) else {
        emit(edges);
        return;
    };
    let start = match edges.last() {
        Some(&(a, b)) if a == i => b,
        _ => i,
    };
    for j in start..rem.len() {
        if j == i {
            if !self_loops || rem[i] < 2 {
                continue;
            }
            rem[i] -= 2;
            edges.push((i, i));
            fill_edges(rem, edges, self_loops, emit);
            edges.pop();
            rem[i] += 2;
        } else if rem[j] > 0 {
            rem[i] -= 1;
            rem[j] -= 1;
            edges.push((i, j));
            fill_edges(rem, edges, self_loops, emit);
            edges.pop();
            rem[i] += 1;
            rem[j] += 1;
        }
    }
}

/// Named graphs in φ³, used by the command line and in tests.
pub mod builtin {
    use super::{FeynmanGraph, Theory};

    const T: Theory = Theory::PHI3_D6;

    fn build(v: &[&str], e: &[(&str, &str)], l: &[(&str, u32)]) -> FeynmanGraph {
        FeynmanGraph::new(T, v, e, l).expect("builtin graph")
    }

    pub fn bubble() -> FeynmanGraph {
        build(&["x", "y"], &[("x", "y"), ("x", "y")], &[("x", 1), ("y", 2)])
    }

    pub fn triangle() -> FeynmanGraph {
        build(&["x", "y", "z"], &[("x", "y"), ("y", "z"), ("x", "z")], &[("x", 1), ("y", 2), ("z", 3)])
    }

    /// Two-loop propagator graph with overlapping triangles {xy,xw,yw} and {yz,zw,yw}.
    pub fn bubble_vertex_correction() -> FeynmanGraph {
        build(
            &["x", "y", "z", "w"],
            &[("x", "y"), ("x", "w"), ("y", "z"), ("w", "z"), ("w", "y")],
            &[("x", 1), ("z", 2)],
        )
    }

    /// Bubble with a bubble inserted into its upper line.
    pub fn bubble_upper_edge_correction() -> FeynmanGraph {
        build(
            &["x", "y", "z", "w"],
            &[("x", "y"), ("y", "z"), ("x", "w"), ("z", "w"), ("z", "w")],
            &[("x", 1), ("y", 2)],
        )
    }

    pub fn bubble_lower_edge_correction() -> FeynmanGraph {
        build(
            &["p", "q", "a", "b"],
            &[("p", "a"), ("a", "b"), ("a", "b"), ("b", "q"), ("p", "q")],
            &[("p", 1), ("q", 2)],
        )
    }

    /// Triangle on legs 1,2,3 with the corner carrying leg `corner` replaced by a triangle.
    pub fn triangle_vertex_correction(corner: u32) -> FeynmanGraph {
        let (a, b, c) = rotate(corner);
        build(
            &[a, b, c, "u", "w"],
            &[(a, "u"), (a, "w"), ("u", "w"), ("u", b), ("w", c), (b, c)],
            &legs(),
        )
    }

    /// Triangle with a bubble inserted into the side opposite leg `opposite`.
    pub fn triangle_edge_correction(opposite: u32) -> FeynmanGraph {
        let (a, b, c) = rotate(opposite);
        build(
            &[a, b, c, "u", "w"],
            &[(a, b), (a, c), (b, "u"), ("u", "w"), ("u", "w"), ("w", c)],
            &legs(),
        )
    }

    /// Each external vertex joined to both internal vertices.
    pub fn triangle_nonplanar() -> FeynmanGraph {
        build(
            &["x", "y", "z", "u", "w"],
            &[("x", "u"), ("x", "w"), ("y", "u"), ("y", "w"), ("z", "u"), ("z", "w")],
            &legs(),
        )
    }

    fn legs() -> [(&'static str, u32); 3] {
        [("x", 1), ("y", 2), ("z", 3)]
    }

    fn rotate(first: u32) -> (&'static str, &'static str, &'static str) {
        match first {
            1 => ("x", "y", "z"),
            2 => ("y", "z", "x"),
            _ => ("z", "x", "y"),
        }
    }

    /// Look up by command-line name.
    pub fn by_name(name: &str) -> Option<FeynmanGraph> {
        Some(match name {
            "bubble" => bubble(),
            "triangle" => triangle(),
            "bubble-vertex-correction" | "kite" => bubble_vertex_correction(),
            "bubble-edge-correction" | "bubble-upper-edge-correction" => bubble_upper_edge_correction(),
            "bubble-lower-edge-correction" => bubble_lower_edge_correction(),
            "triangle-vertex-correction-1" => triangle_vertex_correction(1),
            "triangle-vertex-correction-2" => triangle_vertex_correction(2),
            "triangle-vertex-correction-3" => triangle_vertex_correction(3),
            "triangle-edge-correction-1" => triangle_edge_correction(1),
            "triangle-edge-correction-2" => triangle_edge_correction(2),
            "triangle-edge-correction-3" => triangle_edge_correction(3),
            "triangle-nonplanar" => triangle_nonplanar(),
            _ => return None,
        })
    }

    pub const NAMES: &[&str] = &[
        "bubble",
        "triangle",
        "bubble-vertex-correction",
        "bubble-upper-edge-correction",
        "bubble-lower-edge-correction",
        "triangle-vertex-correction-1",
        "triangle-vertex-correction-2",
        "triangle-vertex-correction-3",
        "triangle-edge-correction-1",
        "triangle-edge-correction-2",
        "triangle-edge-correction-3",
        "triangle-nonplanar",
    ];
}
