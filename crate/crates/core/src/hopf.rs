//! The renormalization Hopf algebra on graph classes.
//!
//! Generators are connected graphs with at least one internal edge, keyed by
//! their [`LegMode::Unlabeled`] canonical form. The coproduct sums over
//! divergent subgraphs γ the term γ ⊗ Γ\γ; the cograph is split into its
//! connected pieces, edgeless pieces being units.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use itertools::Itertools;
use num::{BigInt, BigRational, One, Signed, Zero};
use thiserror::Error;

use crate::graph::{
    self, cut_graph, delete_subgraph, divergent_subgraphs, enumerate_1pi, unlabeled_form, EnumOptions, FeynmanGraph,
    GraphError, GraphKey, IdentificationMap, Residue, Subgraph, Theory,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HopfError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("loop number {found} exceeds the configured bound {bound}")]
    LoopBound { found: usize, bound: u32 },
    #[error("reduced coproduct needs an element of the augmentation ideal (unit coefficient {0})")]
    NotAugmentation(String),
}

pub type Result<T> = std::result::Result<T, HopfError>;

/// Commutative monomial in graph classes; the empty monomial is the unit.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GraphMonomial(BTreeMap<GraphKey, u32>);

impl GraphMonomial {
    pub fn unit() -> Self {
        GraphMonomial::default()
    }

    pub fn single(k: GraphKey) -> Self {
        GraphMonomial(BTreeMap::from([(k, 1)]))
    }

    pub fn from_keys(keys: impl IntoIterator<Item = GraphKey>) -> Self {
        let mut m = GraphMonomial::unit();
        for k in keys {
            *m.0.entry(k).or_default() += 1;
        }
        m
    }

    pub fn is_unit(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mul(&self, other: &GraphMonomial) -> GraphMonomial {
        let mut out = self.clone();
        for (k, e) in &other.0 {
            *out.0.entry(k.clone()).or_default() += e;
        }
        out
    }

    /// Factors with multiplicity.
    pub fn factors(&self) -> impl Iterator<Item = (&GraphKey, u32)> {
        self.0.iter().map(|(k, &e)| (k, e))
    }

    pub fn expanded(&self) -> Vec<GraphKey> {
        self.0.iter().flat_map(|(k, &e)| std::iter::repeat(k.clone()).take(e as usize)).collect()
    }

    pub fn degree(&self) -> u32 {
        self.0.values().sum()
    }

    pub fn loops(&self) -> usize {
        self.0.iter().map(|(k, &e)| key_loops(k) * e as usize).sum()
    }
}

impl fmt::Display for GraphMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_unit() {
            return f.write_str("1");
        }
        let parts = self.0.iter().map(|(k, &e)| {
            if e == 1 {
                display_name(k)
            } else {
                format!("{}^{e}", display_name(k))
            }
        });
        f.write_str(&parts.joined("*"))
    }
}

trait Joined {
    fn joined(self, sep: &str) -> String;
}

impl<I: Iterator<Item = String>> Joined for I {
    fn joined(self, sep: &str) -> String {
        self.collect::<Vec<_>>().join(sep)
    }
}

/// Loop number of the class behind a key.
pub fn key_loops(k: &GraphKey) -> usize {
    static CACHE: OnceLock<Mutex<HashMap<GraphKey, usize>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(&l) = cache.lock().unwrap().get(k) {
        return l;
    }
    let l = k.decode().map(|g| g.loop_number()).unwrap_or(0);
    cache.lock().unwrap().insert(k.clone(), l);
    l
}

/// Readable name for a generator: named graphs get their name, others `G<hash>`.
pub fn display_name(k: &GraphKey) -> String {
    static NAMES: OnceLock<HashMap<GraphKey, &'static str>> = OnceLock::new();
    let names = NAMES.get_or_init(|| {
        let mut m = HashMap::new();
        for &n in graph::builtin::NAMES.iter().rev() {
            let g = graph::builtin::by_name(n).unwrap();
            m.insert(unlabeled_form(&g), n);
        }
        m
    });
    match names.get(k) {
        Some(n) => n.to_string(),
        None => format!("G{}", k.short()),
    }
}

/// Finitely supported rational combination of monomials.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GraphPolynomial {
    terms: BTreeMap<GraphMonomial, BigRational>,
}

impl GraphPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn unit() -> Self {
        Self::monomial(GraphMonomial::unit(), BigRational::one())
    }

    pub fn monomial(m: GraphMonomial, c: BigRational) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    /// A single graph as its (unlabeled) class.
    pub fn graph(g: &FeynmanGraph) -> Self {
        let mut p = Self::unit();
        for part in g.split_components() {
            p = p.mul(&Self::monomial(GraphMonomial::single(unlabeled_form(&part)), BigRational::one()));
        }
        p
    }

    pub fn add_term(&mut self, m: GraphMonomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(m.clone()).or_insert_with(BigRational::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&GraphMonomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &GraphMonomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Counit: the coefficient of the unit.
    pub fn counit(&self) -> BigRational {
        self.coefficient(&GraphMonomial::unit())
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&-BigRational::one()))
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        let mut out = Self::zero();
        for (m, a) in &self.terms {
            out.add_term(m.clone(), a * c);
        }
        out
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = Self::zero();
        for (a, x) in &self.terms {
            for (b, y) in &o.terms {
                out.add_term(a.mul(b), x * y);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::unit(), |acc, _| acc.mul(self))
    }

    /// Part of loop number exactly `l`.
    pub fn restrict_loops(&self, l: usize) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            if m.loops() == l {
                out.add_term(m.clone(), c.clone());
            }
        }
        out
    }

    pub fn max_loops(&self) -> usize {
        self.terms.keys().map(|m| m.loops()).max().unwrap_or(0)
    }

    pub fn without_unit(&self) -> Self {
        let mut out = self.clone();
        out.terms.remove(&GraphMonomial::unit());
        out
    }
}

impl fmt::Display for GraphPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let body = self
            .terms
            .iter()
            .sorted_by(|a, b| (a.0.loops(), a.0).cmp(&(b.0.loops(), b.0)))
            .map(|(m, c)| if m.is_unit() { fmt_coef(c) } else { format!("{} {}", fmt_coef(c), m) })
            .joined(" + ");
        f.write_str(&body)
    }
}

fn fmt_coef(c: &BigRational) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

/// Key of a tensor term: both slots plus the sorted sizes of the
/// identification maps glued in by the insertion.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TensorKey {
    pub left: GraphMonomial,
    pub right: GraphMonomial,
    pub pattern: Vec<u32>,
}

impl TensorKey {
    pub fn new(left: GraphMonomial, right: GraphMonomial, mut pattern: Vec<u32>) -> Self {
        pattern.sort_unstable();
        TensorKey { left, right, pattern }
    }
}

#[derive(Clone, Debug, Default)]
pub struct TensorPolynomial {
    terms: BTreeMap<TensorKey, BigRational>,
    /// First identification maps seen for a key; display only.
    tags: BTreeMap<TensorKey, Vec<IdentificationMap>>,
}

impl PartialEq for TensorPolynomial {
    fn eq(&self, o: &Self) -> bool {
        self.terms == o.terms
    }
}

impl TensorPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn unit() -> Self {
        let mut t = Self::zero();
        t.add_term(TensorKey::default(), BigRational::one(), vec![]);
        t
    }

    pub fn add_term(&mut self, k: TensorKey, c: BigRational, tags: Vec<IdentificationMap>) {
        if c.is_zero() {
            return;
        }
        self.tags.entry(k.clone()).or_insert(tags);
        let e = self.terms.entry(k.clone()).or_insert_with(BigRational::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&k);
            self.tags.remove(&k);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&TensorKey, &BigRational)> {
        self.terms.iter()
    }

    pub fn tags(&self, k: &TensorKey) -> &[IdentificationMap] {
        self.tags.get(k).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, k: &TensorKey) -> BigRational {
        self.terms.get(k).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (k, c) in &o.terms {
            out.add_term(k.clone(), c.clone(), o.tags(k).to_vec());
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&-BigRational::one()))
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        let mut out = Self::zero();
        for (k, a) in &self.terms {
            out.add_term(k.clone(), a * c, self.tags(k).to_vec());
        }
        out
    }

    /// Product in H ⊗ H; identification maps accumulate.
    pub fn mul(&self, o: &Self) -> Self {
        let mut out = Self::zero();
        for (a, x) in &self.terms {
            for (b, y) in &o.terms {
                let mut pattern = a.pattern.clone();
                pattern.extend(&b.pattern);
                let k = TensorKey::new(a.left.mul(&b.left), a.right.mul(&b.right), pattern);
                let mut tags = self.tags(a).to_vec();
                tags.extend(o.tags(b).iter().cloned());
                out.add_term(k, x * y, tags);
            }
        }
        out
    }

    /// `left ⊗ right` with the given pattern on every pair of terms.
    pub fn outer(left: &GraphPolynomial, right: &GraphPolynomial, pattern: &[u32]) -> Self {
        let mut out = Self::zero();
        for (a, x) in left.terms() {
            for (b, y) in right.terms() {
                out.add_term(TensorKey::new(a.clone(), b.clone(), pattern.to_vec()), x * y, vec![]);
            }
        }
        out
    }

    /// Multiply the slots together, forgetting identifications.
    pub fn multiply_out(&self) -> GraphPolynomial {
        let mut out = GraphPolynomial::zero();
        for (k, c) in &self.terms {
            out.add_term(k.left.mul(&k.right), c.clone());
        }
        out
    }

    /// Drop the 𝕀⊗· and ·⊗𝕀 terms.
    pub fn without_endpoints(&self) -> Self {
        let mut out = Self::zero();
        for (k, c) in &self.terms {
            if !k.left.is_unit() && !k.right.is_unit() {
                out.add_term(k.clone(), c.clone(), self.tags(k).to_vec());
            }
        }
        out
    }
}

impl fmt::Display for TensorPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut first = true;
        for (k, c) in &self.terms {
            if !first {
                writeln!(f)?;
            }
            first = false;
            write!(f, "{} · [{}] (x) [{}]", fmt_coef(c), k.left, k.right)?;
            if !k.pattern.is_empty() {
                write!(f, " {{δ: {}}}", k.pattern.iter().join(","))?;
            }
        }
        Ok(())
    }
}

/// Three-slot tensors for coassociativity.
pub type Tensor3 = BTreeMap<(GraphMonomial, GraphMonomial, GraphMonomial, Vec<u32>), BigRational>;

/// One proper term of the coproduct of a concrete graph.
#[derive(Clone, Debug)]
pub struct CoproductTerm {
    pub subgraph: Subgraph,
    /// Connected components of the subgraph as stand-alone graphs.
    pub components: Vec<FeynmanGraph>,
    /// External-vertex identifications, one map per component.
    pub identifications: Vec<IdentificationMap>,
    /// The cograph before splitting into pieces.
    pub cograph: FeynmanGraph,
}

impl CoproductTerm {
    /// Loop number of the cograph once each component's external vertices
    /// are glued to a point.
    pub fn quotient_loops(&self) -> i64 {
        let glued: i64 = self.identifications.iter().map(|m| m.len() as i64 - 1).sum();
        self.cograph.n_edges() as i64 - self.cograph.n_vertices() as i64 + glued + 1
    }

    pub fn key(&self) -> TensorKey {
        let left = GraphMonomial::from_keys(self.components.iter().map(unlabeled_form));
        let right = GraphMonomial::from_keys(self.cograph.split_components().iter().map(unlabeled_form));
        TensorKey::new(left, right, self.identifications.iter().map(|m| m.len() as u32).collect())
    }
}

/// The proper terms γ ⊗ Γ\γ (γ neither empty nor everything).
pub fn coproduct_terms(g: &FeynmanGraph) -> Result<Vec<CoproductTerm>> {
    let mut out = Vec::new();
    for s in divergent_subgraphs(g)? {
        if s.is_empty() || s.is_whole(g) {
            continue;
        }
        let (cograph, _) = delete_subgraph(g, &s)?;
        let comps = s.components(g);
        let identifications = comps
            .iter()
            .map(|c| IdentificationMap {
                pairs: c
                    .external_vertices(g)
                    .into_iter()
                    .map(|v| (g.vertices[v].clone(), g.vertices[v].clone()))
                    .collect(),
            })
            .collect();
        out.push(CoproductTerm {
            components: comps.iter().map(|c| c.as_graph(g)).collect(),
            subgraph: s,
            identifications,
            cograph,
        });
    }
    Ok(out)
}

/// Hopf-algebra operations under a loop bound, with per-generator caches.
pub struct Hopf {
    pub theory: Theory,
    pub loop_bound: u32,
    coproducts: Mutex<HashMap<GraphKey, Arc<TensorPolynomial>>>,
    antipodes: Mutex<HashMap<GraphKey, Arc<GraphPolynomial>>>,
    greens: Mutex<HashMap<(Residue, u32), Arc<GraphPolynomial>>>,
}

impl Hopf {
    pub fn new(theory: Theory, loop_bound: u32) -> Self {
        Hopf {
            theory,
            loop_bound,
            coproducts: Default::default(),
            antipodes: Default::default(),
            greens: Default::default(),
        }
    }

    fn check_bound(&self, k: &GraphKey) -> Result<()> {
        let l = key_loops(k);
        if l > self.loop_bound as usize {
            return Err(HopfError::LoopBound { found: l, bound: self.loop_bound });
        }
        Ok(())
    }

    /// Δ of a single generator.
    pub fn generator_coproduct(&self, k: &GraphKey) -> Result<Arc<TensorPolynomial>> {
        if let Some(t) = self.coproducts.lock().unwrap().get(k) {
            return Ok(t.clone());
        }
        self.check_bound(k)?;
        let g = k.decode()?;
        let gen = GraphMonomial::single(k.clone());
        let mut t = TensorPolynomial::zero();
        t.add_term(TensorKey::new(GraphMonomial::unit(), gen.clone(), vec![]), BigRational::one(), vec![]);
        t.add_term(TensorKey::new(gen, GraphMonomial::unit(), vec![]), BigRational::one(), vec![]);
        for term in coproduct_terms(&g)? {
            t.add_term(term.key(), BigRational::one(), term.identifications.clone());
        }
        let t = Arc::new(t);
        self.coproducts.lock().unwrap().insert(k.clone(), t.clone());
        Ok(t)
    }

    pub fn monomial_coproduct(&self, m: &GraphMonomial) -> Result<TensorPolynomial> {
        let mut out = TensorPolynomial::unit();
        for k in m.expanded() {
            out = out.mul(&*self.generator_coproduct(&k)?);
        }
        Ok(out)
    }

    pub fn coproduct(&self, x: &GraphPolynomial) -> Result<TensorPolynomial> {
        let mut out = TensorPolynomial::zero();
        for (m, c) in x.terms() {
            out = out.add(&self.monomial_coproduct(m)?.scale(c));
        }
        Ok(out)
    }

    /// Δ̃ = Δ − 𝕀⊗x − x⊗𝕀 on the augmentation ideal.
    pub fn reduced_coproduct(&self, x: &GraphPolynomial) -> Result<TensorPolynomial> {
        let c = x.counit();
        if !c.is_zero() {
            return Err(HopfError::NotAugmentation(c.to_string()));
        }
        let full = self.coproduct(x)?;
        let u = GraphPolynomial::unit();
        Ok(full.sub(&TensorPolynomial::outer(&u, x, &[])).sub(&TensorPolynomial::outer(x, &u, &[])))
    }

    pub fn antipode(&self, x: &GraphPolynomial) -> Result<GraphPolynomial> {
        let mut out = GraphPolynomial::zero();
        for (m, c) in x.terms() {
            let mut prod = GraphPolynomial::unit();
            for k in m.expanded() {
                prod = prod.mul(&*self.generator_antipode(&k)?);
            }
            out = out.add(&prod.scale(c));
        }
        Ok(out)
    }

    /// S(Γ) = −Γ − Σ_{proper γ} S(γ)·(Γ\γ).
    pub fn generator_antipode(&self, k: &GraphKey) -> Result<Arc<GraphPolynomial>> {
        if let Some(s) = self.antipodes.lock().unwrap().get(k) {
            return Ok(s.clone());
        }
        let delta = self.generator_coproduct(k)?;
        let mut s = GraphPolynomial::monomial(GraphMonomial::single(k.clone()), -BigRational::one());
        for (t, c) in delta.terms() {
            if t.left.is_unit() || t.right.is_unit() {
                continue;
            }
            let left = self.antipode(&GraphPolynomial::monomial(t.left.clone(), BigRational::one()))?;
            let right = GraphPolynomial::monomial(t.right.clone(), c.clone());
            s = s.sub(&left.mul(&right));
        }
        let s = Arc::new(s);
        self.antipodes.lock().unwrap().insert(k.clone(), s.clone());
        Ok(s)
    }

    /// Symmetry-weighted sum of 1PI graphs of residue `r` at `loops` loops,
    /// without the unit and without the sign.
    pub fn precombinatorial(&self, r: Residue, loops: u32) -> Result<GraphPolynomial> {
        if loops == 0 {
            return Ok(GraphPolynomial::zero());
        }
        if let Some(p) = self.greens.lock().unwrap().get(&(r, loops)) {
            return Ok((**p).clone());
        }
        let opts = EnumOptions { loop_bound: self.loop_bound, ..Default::default() };
        let mut p = GraphPolynomial::zero();
        for c in enumerate_1pi(self.theory, r.n_ext(self.theory), loops, &opts)? {
            p = p.add(&GraphPolynomial::graph(&c.graph).scale(&c.weight));
        }
        self.greens.lock().unwrap().insert((r, loops), Arc::new(p.clone()));
        Ok(p)
    }

    /// X^r_L: 𝕀 at tree level, then ± the weighted graph sum (+ vertex, − propagator).
    pub fn greens_function(&self, r: Residue, loops: u32) -> Result<GraphPolynomial> {
        if loops == 0 {
            return Ok(GraphPolynomial::unit());
        }
        let p = self.precombinatorial(r, loops)?;
        Ok(match r {
            Residue::Vert => p,
            Residue::Prop => p.scale(&-BigRational::one()),
        })
    }

    /// C_{e,v}: every way of removing `v` vertices and cutting `e` times
    /// into internal edges (an edge may be cut repeatedly).
    pub fn cut(&self, x: &GraphPolynomial, e: u32, v: u32) -> Result<GraphPolynomial> {
        self.cut_impl(x, e, v, false)
    }

    /// Like [`Hopf::cut`] but each distinct cut shape of a graph counted once.
    pub fn cut_distinct(&self, x: &GraphPolynomial, e: u32, v: u32) -> Result<GraphPolynomial> {
        self.cut_impl(x, e, v, true)
    }

    fn cut_impl(&self, x: &GraphPolynomial, e: u32, v: u32, distinct: bool) -> Result<GraphPolynomial> {
        let mut out = GraphPolynomial::zero();
        for (m, c) in x.terms() {
            if m.is_unit() {
                if e == 0 && v == 0 {
                    out.add_term(m.clone(), c.clone());
                }
                continue;
            }
            let g = disjoint_union(&m.expanded())?;
            let mut shapes = BTreeMap::new();
            for verts in (0..g.n_vertices()).combinations(v as usize) {
                let verts: BTreeSet<usize> = verts.into_iter().collect();
                for ins in compositions(e, g.n_edges()) {
                    let (cg, _) = cut_graph(&g, &verts, &ins);
                    let shape = GraphMonomial::from_keys(cg.split_components().iter().map(unlabeled_form));
                    *shapes.entry(shape).or_insert(0u64) += 1;
                }
            }
            for (shape, count) in shapes {
                let k = if distinct { BigRational::one() } else { BigRational::from_integer(count.into()) };
                out.add_term(shape, c * k);
            }
        }
        Ok(out)
    }

    /// Y^r_{i,e,v}. At tree level the formal counts (vertices, edges) =
    /// (0, −1) or (1, 0) enter through generalized binomials.
    pub fn cut_greens(&self, r: Residue, i: u32, e: u32, v: u32, distinct: bool) -> Result<GraphPolynomial> {
        if i == 0 {
            let (v0, e0) = self.theory.euler_counts(r.n_ext(self.theory), 0).expect("tree counts");
            let c = binomial(v0, v as i64) * binomial(-e0, e as i64) * if e % 2 == 1 { -1 } else { 1 };
            return Ok(GraphPolynomial::unit().scale(&BigRational::from_integer(c.into())));
        }
        let x = self.greens_function(r, i)?;
        self.cut_impl(&x, e, v, distinct)
    }

    /// Checks Δ(X^r_L) = Σ_l Σ_{e,v} [(x^v)^v (x^e)^e]_l ⊗ Y^r_{L−l,e,v}.
    pub fn verify_coproduct_identity(&self, r: Residue, loops: u32) -> Result<CoproductIdentityReport> {
        let lhs = self.coproduct(&self.greens_function(r, loops)?)?;
        let (m, mut rhs) = (self.theory.m, TensorPolynomial::zero());
        let mut groups = Vec::new();
        for l in 0..=loops {
            let i = loops - l;
            for (e, v) in insertion_counts(l) {
                let left = self.insertion_monomials(e, v, l)?;
                if left.is_zero() {
                    continue;
                }
                let pattern: Vec<u32> = if i == 0 || l == 0 {
                    vec![]
                } else {
                    std::iter::repeat(m).take(v as usize).chain(std::iter::repeat(2).take(e as usize)).collect()
                };
                let y = self.cut_greens(r, i, e, v, false)?;
                let group = TensorPolynomial::outer(&left, &y, &pattern);
                if l > 0 && i > 0 && !group.is_zero() {
                    let y1 = self.cut_greens(r, i, e, v, true)?;
                    let base = TensorPolynomial::outer(&left, &y1, &pattern);
                    groups.push(MultiplicityEntry { left_loops: l, edges: e, vertices: v, multiplicity: proportion(&group, &base) });
                }
                rhs = rhs.add(&group);
            }
        }
        Ok(CoproductIdentityReport { residue: r, loops, holds: lhs == rhs, lhs, rhs, multiplicities: groups })
    }

    /// [(x^vert)^v (x^prop)^e]_l.
    pub fn insertion_monomials(&self, e: u32, v: u32, l: u32) -> Result<GraphPolynomial> {
        let xv = self.precombinatorial_series(Residue::Vert, l)?;
        let xe = self.precombinatorial_series(Residue::Prop, l)?;
        Ok(xv.pow(v).mul(&xe.pow(e)).restrict_loops(l as usize))
    }

    fn precombinatorial_series(&self, r: Residue, up_to: u32) -> Result<GraphPolynomial> {
        let mut p = GraphPolynomial::zero();
        for k in 1..=up_to {
            p = p.add(&self.precombinatorial(r, k)?);
        }
        Ok(p)
    }

    /// (Δ⊗id)Δ(x) and (id⊗Δ)Δ(x).
    pub fn coassociativity_sides(&self, x: &GraphPolynomial) -> Result<(Tensor3, Tensor3)> {
        let d = self.coproduct(x)?;
        let (mut a, mut b) = (Tensor3::new(), Tensor3::new());
        for (k, c) in d.terms() {
            for (k2, c2) in self.monomial_coproduct(&k.left)?.terms() {
                let mut p = k.pattern.clone();
                p.extend(&k2.pattern);
                p.sort_unstable();
                add3(&mut a, (k2.left.clone(), k2.right.clone(), k.right.clone(), p), c * c2);
            }
            for (k2, c2) in self.monomial_coproduct(&k.right)?.terms() {
                let mut p = k.pattern.clone();
                p.extend(&k2.pattern);
                p.sort_unstable();
                add3(&mut b, (k.left.clone(), k2.left.clone(), k2.right.clone(), p), c * c2);
            }
        }
        Ok((a, b))
    }

    /// ((ε⊗id)Δ(x), (id⊗ε)Δ(x)).
    pub fn counit_sides(&self, x: &GraphPolynomial) -> Result<(GraphPolynomial, GraphPolynomial)> {
        let d = self.coproduct(x)?;
        let (mut l, mut r) = (GraphPolynomial::zero(), GraphPolynomial::zero());
        for (k, c) in d.terms() {
            if k.left.is_unit() {
                l.add_term(k.right.clone(), c.clone());
            }
            if k.right.is_unit() {
                r.add_term(k.left.clone(), c.clone());
            }
        }
        Ok((l, r))
    }

    /// (m∘(S⊗id)∘Δ(x), m∘(id⊗S)∘Δ(x)); both should be ε(x)𝕀.
    pub fn antipode_sides(&self, x: &GraphPolynomial) -> Result<(GraphPolynomial, GraphPolynomial)> {
        let d = self.coproduct(x)?;
        let (mut l, mut r) = (GraphPolynomial::zero(), GraphPolynomial::zero());
        for (k, c) in d.terms() {
            let one = BigRational::one();
            let left = GraphPolynomial::monomial(k.left.clone(), one.clone());
            let right = GraphPolynomial::monomial(k.right.clone(), one);
            l = l.add(&self.antipode(&left)?.mul(&right).scale(c));
            r = r.add(&left.mul(&self.antipode(&right)?).scale(c));
        }
        Ok((l, r))
    }
}

fn add3(t: &mut Tensor3, k: (GraphMonomial, GraphMonomial, GraphMonomial, Vec<u32>), c: BigRational) {
    let e = t.entry(k.clone()).or_insert_with(BigRational::zero);
    *e += c;
    if e.is_zero() {
        t.remove(&k);
    }
}

/// All (e, v) with e·1 + v·1 ≤ l loops available, for l > 0; only (0,0) and
/// the tree-level counts when l = 0.
fn insertion_counts(l: u32) -> Vec<(u32, u32)> {
    if l == 0 {
        return vec![(0, 0)];
    }
    (0..=l).flat_map(|tot| (0..=tot).map(move |v| (tot - v, v))).filter(|&(e, v)| e + v >= 1).collect()
}

/// Ratio `a / b` when `a` is a constant multiple of `b`.
fn proportion(a: &TensorPolynomial, b: &TensorPolynomial) -> Option<BigRational> {
    let (k, c) = b.terms().next()?;
    let ratio = a.coefficient(k) / c;
    (a.sub(&b.scale(&ratio)).is_zero()).then_some(ratio)
}

#[derive(Clone, Debug)]
pub struct MultiplicityEntry {
    pub left_loops: u32,
    pub edges: u32,
    pub vertices: u32,
    /// Group of terms divided by the same group built from distinct cut shapes.
    pub multiplicity: Option<BigRational>,
}

#[derive(Clone, Debug)]
pub struct CoproductIdentityReport {
    pub residue: Residue,
    pub loops: u32,
    pub lhs: TensorPolynomial,
    pub rhs: TensorPolynomial,
    pub holds: bool,
    pub multiplicities: Vec<MultiplicityEntry>,
}

impl CoproductIdentityReport {
    /// Multiplicity of the single-edge and single-vertex insertion groups.
    pub fn one_insertion_multiplicities(&self) -> (Option<BigRational>, Option<BigRational>) {
        let find = |e, v| {
            self.multiplicities.iter().find(|g| g.edges == e && g.vertices == v).and_then(|g| g.multiplicity.clone())
        };
        (find(1, 0), find(0, 1))
    }
}

/// Disjoint union of the representatives of `keys`.
pub fn disjoint_union(keys: &[GraphKey]) -> Result<FeynmanGraph> {
    let mut out: Option<FeynmanGraph> = None;
    for (i, k) in keys.iter().enumerate() {
        let g = k.decode()?;
        let acc = out.get_or_insert_with(|| FeynmanGraph::empty(g.theory));
        let off = acc.vertices.len();
        let label_off = acc.legs.len() as u32;
        acc.vertices.extend(g.vertices.iter().map(|v| format!("{v}.{i}")));
        acc.edges.extend(g.edges.iter().map(|&(a, b)| (a + off, b + off)));
        acc.legs.extend(g.legs.iter().map(|&(v, l)| (v + off, l + label_off)));
    }
    out.ok_or_else(|| GraphError::Invalid("empty union".into()).into())
}

/// Ways to distribute `total` identical cuts over `slots` edges.
fn compositions(total: u32, slots: usize) -> Vec<Vec<u32>> {
    if slots == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    let mut cur = vec![0; slots];
    fn rec(i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur[i] = k;
            rec(i + 1, left - k, cur, out);
        }
    }
    rec(0, total, &mut cur, &mut out);
    out
}

/// Generalized binomial coefficient with integer top.
pub fn binomial(n: i64, k: i64) -> i64 {
    if k < 0 {
        return 0;
    }
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for i in 0..k {
        num *= n - i;
        den *= i + 1;
    }
    let q = num / den;
    i64::try_from(q.abs()).map(|a| if q.is_negative() { -a } else { a }).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::builtin;

    #[test]
    fn binomials() {
        assert_eq!(binomial(1, 1), 1);
        assert_eq!(binomial(0, 1), 0);
        assert_eq!(binomial(-1, 3), -1);
        assert_eq!(binomial(5, 2), 10);
    }

    #[test]
    fn primitive_bubble() {
        let h = Hopf::new(Theory::PHI3_D6, 3);
        let b = GraphPolynomial::graph(&builtin::bubble());
        let d = h.reduced_coproduct(&b).unwrap();
        assert!(d.is_zero());
        assert_eq!(h.antipode(&b).unwrap(), b.scale(&-BigRational::one()));
        assert_eq!(h.antipode(&GraphPolynomial::unit()).unwrap(), GraphPolynomial::unit());
    }

    #[test]
    fn reduced_coproduct_rejects_unit() {
        let h = Hopf::new(Theory::PHI3_D6, 3);
        assert!(h.reduced_coproduct(&GraphPolynomial::unit()).is_err());
    }

    #[test]
    fn empty_cut_is_identity() {
        let h = Hopf::new(Theory::PHI3_D6, 3);
        let x = h.greens_function(Residue::Prop, 1).unwrap();
        assert_eq!(h.cut(&x, 0, 0).unwrap(), x);
    }
}
