//! Partially finite ε-expansions with exact symbolic coefficients.
//!
//! An element is a finite sum Σ c_{α,β} Π_i ε_i^{α_i} log^{β_i} ε_i over named
//! variables, with coefficients polynomials over ℚ in structured atoms.

use crate::graph::IdentificationMap;
use num::{BigRational, One, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub const DEFAULT_TRUNCATION: i64 = 4;

#[derive(Debug, Error, PartialEq)]
pub enum PfError {
    #[error("variable lists differ: {left:?} vs {right:?}")]
    VariableMismatch { left: Vec<String>, right: Vec<String> },
    #[error("singular terms present: {0:?}")]
    SingularTerms(Vec<String>),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("index length {found} does not match {expected} variables")]
    IndexLength { found: usize, expected: usize },
}

pub type Result<T> = std::result::Result<T, PfError>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PowerIndex {
    pub alpha: Vec<i64>,
    pub beta: Vec<u32>,
}

impl PowerIndex {
    pub fn new(alpha: Vec<i64>, beta: Vec<u32>) -> Self {
        assert_eq!(alpha.len(), beta.len(), "power index halves differ in length");
        PowerIndex { alpha, beta }
    }

    pub fn zero(n: usize) -> Self {
        PowerIndex { alpha: vec![0; n], beta: vec![0; n] }
    }

    pub fn single(alpha: i64, beta: u32) -> Self {
        PowerIndex { alpha: vec![alpha], beta: vec![beta] }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn total(&self) -> (i64, u32) {
        (self.alpha.iter().sum(), self.beta.iter().sum())
    }

    pub fn is_zero(&self) -> bool {
        self.alpha.iter().all(|&a| a == 0) && self.beta.iter().all(|&b| b == 0)
    }

    fn add(&self, o: &PowerIndex) -> PowerIndex {
        PowerIndex {
            alpha: self.alpha.iter().zip(&o.alpha).map(|(a, b)| a + b).collect(),
            beta: self.beta.iter().zip(&o.beta).map(|(a, b)| a + b).collect(),
        }
    }

    fn concat(&self, o: &PowerIndex) -> PowerIndex {
        PowerIndex {
            alpha: self.alpha.iter().chain(&o.alpha).copied().collect(),
            beta: self.beta.iter().chain(&o.beta).copied().collect(),
        }
    }

    /// Nonzero (α_i, β_i) columns, sorted.
    pub fn aligned(&self) -> Vec<(i64, u32)> {
        let mut v: Vec<(i64, u32)> =
            self.alpha.iter().zip(&self.beta).map(|(&a, &b)| (a, b)).filter(|&c| c != (0, 0)).collect();
        v.sort();
        v
    }
}

impl Ord for PowerIndex {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        (self.total(), &self.alpha, &self.beta).cmp(&(o.total(), &o.alpha, &o.beta))
    }
}

impl PartialOrd for PowerIndex {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

impl fmt::Display for PowerIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a: Vec<String> = self.alpha.iter().map(|x| x.to_string()).collect();
        let b: Vec<String> = self.beta.iter().map(|x| x.to_string()).collect();
        write!(f, "({}|{})", a.join(","), b.join(","))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DegreeSign {
    Negative,
    Zero,
    Positive,
}

/// Which power indices count as singular.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DegreeConvention {
    /// Σα < 0, or Σα = 0 with a logarithm present.
    #[default]
    Corrected,
    /// Σα < 0 only, so pure logarithms are regular.
    Literal,
}

pub fn degree_sign(i: &PowerIndex, conv: DegreeConvention) -> DegreeSign {
    let (a, b) = i.total();
    match (a.signum(), b, conv) {
        (-1, _, _) => DegreeSign::Negative,
        (0, 0, _) => DegreeSign::Zero,
        (0, _, DegreeConvention::Corrected) => DegreeSign::Negative,
        _ => DegreeSign::Positive,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AtomKind {
    AmplitudeFinitePart,
    PoleCoefficient,
    Moment,
    Free,
    /// Formal pairing δ for an insertion, payload = number of identified pairs.
    DeltaPairing,
}

impl AtomKind {
    fn letter(self) -> char {
        match self {
            AtomKind::AmplitudeFinitePart => 'A',
            AtomKind::PoleCoefficient => 'P',
            AtomKind::Moment => 'M',
            AtomKind::Free => 'F',
            AtomKind::DeltaPairing => 'D',
        }
    }

    fn from_letter(c: char) -> Option<AtomKind> {
        Some(match c {
            'A' => AtomKind::AmplitudeFinitePart,
            'P' => AtomKind::PoleCoefficient,
            'M' => AtomKind::Moment,
            'F' => AtomKind::Free,
            'D' => AtomKind::DeltaPairing,
            _ => return None,
        })
    }
}

/// A coefficient symbol. Atoms compare by their data, so the order is stable
/// across runs and threads.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CoeffAtom {
    pub kind: AtomKind,
    pub label: String,
    pub index: Vec<i64>,
}

impl CoeffAtom {
    pub fn new(kind: AtomKind, label: impl Into<String>, index: Vec<i64>) -> Self {
        let label = label.into();
        assert!(
            !label.chars().any(|c| matches!(c, '[' | ']' | '·' | ' ' | '+' | '(' | ')')),
            "atom label {label:?} contains a reserved character"
        );
        CoeffAtom { kind, label, index }
    }

    pub fn free(label: &str) -> Self {
        CoeffAtom::new(AtomKind::Free, label, vec![])
    }

    pub fn delta(pairs: usize) -> Self {
        CoeffAtom::new(AtomKind::DeltaPairing, "delta", vec![pairs as i64])
    }
}

impl fmt::Display for CoeffAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ix: Vec<String> = self.index.iter().map(|x| x.to_string()).collect();
        write!(f, "{}[{}]({})", self.kind.letter(), self.label, ix.join(","))
    }
}

impl FromStr for CoeffAtom {
    type Err = PfError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || PfError::Parse(format!("bad atom {s:?}"));
        let mut chars = s.chars();
        let kind = chars.next().and_then(AtomKind::from_letter).ok_or_else(bad)?;
        let rest = chars.as_str().strip_prefix('[').ok_or_else(bad)?;
        let (label, rest) = rest.split_once(']').ok_or_else(bad)?;
        let inner = rest.strip_prefix('(').and_then(|r| r.strip_suffix(')')).ok_or_else(bad)?;
        let index = if inner.is_empty() {
            vec![]
        } else {
            inner.split(',').map(|x| x.parse::<i64>().map_err(|_| bad())).collect::<Result<_>>()?
        };
        Ok(CoeffAtom { kind, label: label.to_string(), index })
    }
}

/// Commutative polynomial over ℚ; monomials are sorted atom multisets.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct CoeffPolynomial(BTreeMap<Vec<CoeffAtom>, BigRational>);

impl CoeffPolynomial {
    pub fn zero() -> Self {
        CoeffPolynomial(BTreeMap::new())
    }

    pub fn one() -> Self {
        CoeffPolynomial::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = CoeffPolynomial::zero();
        p.add_monomial(vec![], c);
        p
    }

    pub fn atom(a: CoeffAtom) -> Self {
        let mut p = CoeffPolynomial::zero();
        p.add_monomial(vec![a], BigRational::one());
        p
    }

    pub fn add_monomial(&mut self, mut atoms: Vec<CoeffAtom>, c: BigRational) {
        if c.is_zero() {
            return;
        }
        atoms.sort();
        let e = self.0.entry(atoms.clone()).or_insert_with(BigRational::zero);
        *e += c;
        if e.is_zero() {
            self.0.remove(&atoms);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<CoeffAtom>, &BigRational)> {
        self.0.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The rational value if the polynomial has no atoms.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.0.len() {
            0 => Some(BigRational::zero()),
            1 => self.0.get(&vec![]).cloned(),
            _ => None,
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (m, c) in &o.0 {
            r.add_monomial(m.clone(), c.clone());
        }
        r
    }

    pub fn neg(&self) -> Self {
        self.scale(&-BigRational::one())
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return CoeffPolynomial::zero();
        }
        CoeffPolynomial(self.0.iter().map(|(m, x)| (m.clone(), x * c)).collect())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut r = CoeffPolynomial::zero();
        for (m1, c1) in &self.0 {
            for (m2, c2) in &o.0 {
                let m: Vec<CoeffAtom> = m1.iter().chain(m2).cloned().collect();
                r.add_monomial(m, c1 * c2);
            }
        }
        r
    }

    /// Replace atoms by polynomials; atoms not in the map are kept.
    pub fn substitute(&self, f: &dyn Fn(&CoeffAtom) -> Option<CoeffPolynomial>) -> Self {
        let mut r = CoeffPolynomial::zero();
        for (m, c) in &self.0 {
            let mut acc = CoeffPolynomial::constant(c.clone());
            for a in m {
                let v = f(a).unwrap_or_else(|| CoeffPolynomial::atom(a.clone()));
                acc = acc.mul(&v);
            }
            r = r.add(&acc);
        }
        r
    }
}

fn fmt_rational(c: &BigRational) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || PfError::Parse(format!("bad rational {s:?}"));
    match s.split_once('/') {
        Some((n, d)) => {
            let d: num::BigInt = d.parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(n.parse().map_err(|_| bad())?, d))
        }
        None => Ok(BigRational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

impl fmt::Display for CoeffPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(m, c)| std::iter::once(fmt_rational(c)).chain(m.iter().map(|a| a.to_string())).collect::<Vec<_>>().join("·"))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl FromStr for CoeffPolynomial {
    type Err = PfError;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = CoeffPolynomial::zero();
        if s.trim() == "0" {
            return Ok(p);
        }
        for mono in s.split(" + ") {
            let mut pieces = mono.split('·');
            let c = parse_rational(pieces.next().unwrap_or_default())?;
            let atoms = pieces.map(CoeffAtom::from_str).collect::<Result<Vec<_>>>()?;
            p.add_monomial(atoms, c);
        }
        Ok(p)
    }
}

/// How two elements are multiplied in Rota–Baxter checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProductMode {
    Shared,
    Tensor,
}

#[derive(Clone, Debug)]
pub struct PFElement {
    variables: Vec<String>,
    terms: BTreeMap<PowerIndex, CoeffPolynomial>,
    truncation_order: i64,
    truncated: bool,
}

impl PartialEq for PFElement {
    /// Structural equality; the truncation flag is bookkeeping and ignored.
    fn eq(&self, o: &Self) -> bool {
        self.variables == o.variables && self.terms == o.terms && self.truncation_order == o.truncation_order
    }
}

fn canonical_vars(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("e{i}")).collect()
}

impl PFElement {
    pub fn zero(variables: Vec<String>) -> Self {
        PFElement { variables, terms: BTreeMap::new(), truncation_order: DEFAULT_TRUNCATION, truncated: false }
    }

    /// The constant 1 over no variables.
    pub fn unit() -> Self {
        PFElement::constant(CoeffPolynomial::one())
    }

    pub fn constant(c: CoeffPolynomial) -> Self {
        let mut f = PFElement::zero(vec![]);
        f.add_term(PowerIndex::zero(0), c);
        f
    }

    /// Zero over canonical variables e1..en.
    pub fn zero_in(n: usize) -> Self {
        PFElement::zero(canonical_vars(n))
    }

    pub fn from_terms(
        variables: Vec<String>,
        terms: impl IntoIterator<Item = (PowerIndex, CoeffPolynomial)>,
    ) -> Result<Self> {
        let mut f = PFElement::zero(variables);
        for (i, c) in terms {
            if i.len() != f.variables.len() {
                return Err(PfError::IndexLength { found: i.len(), expected: f.variables.len() });
            }
            f.add_term(i, c);
        }
        Ok(f)
    }

    pub fn with_truncation(mut self, n: i64) -> Self {
        self.truncation_order = n;
        let drop: Vec<PowerIndex> = self.terms.keys().filter(|i| i.total().0 > n).cloned().collect();
        for i in drop {
            self.terms.remove(&i);
            self.truncated = true;
        }
        self
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn truncation_order(&self) -> i64 {
        self.truncation_order
    }

    /// Whether any term was discarded above the truncation order.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PowerIndex, &CoeffPolynomial)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, i: &PowerIndex) -> CoeffPolynomial {
        self.terms.get(i).cloned().unwrap_or_default()
    }

    fn add_term(&mut self, i: PowerIndex, c: CoeffPolynomial) {
        debug_assert_eq!(i.len(), self.variables.len());
        if c.is_zero() {
            return;
        }
        if i.total().0 > self.truncation_order {
            self.truncated = true;
            return;
        }
        let e = self.terms.entry(i.clone()).or_default();
        *e = e.add(&c);
        if e.is_zero() {
            self.terms.remove(&i);
        }
    }

    fn map_terms(&self, f: impl Fn(&PowerIndex, &CoeffPolynomial) -> Option<CoeffPolynomial>) -> Self {
        let mut r = PFElement { terms: BTreeMap::new(), ..self.clone() };
        for (i, c) in &self.terms {
            if let Some(c) = f(i, c) {
                r.add_term(i.clone(), c);
            }
        }
        r
    }

    /// Re-express over `vars`, which must contain every variable of `self`.
    fn padded(&self, vars: &[String]) -> Self {
        let pos: Vec<usize> =
            self.variables.iter().map(|v| vars.iter().position(|w| w == v).expect("variable missing")).collect();
        let mut r = PFElement { variables: vars.to_vec(), terms: BTreeMap::new(), ..self.clone() };
        for (i, c) in &self.terms {
            let mut j = PowerIndex::zero(vars.len());
            for (k, &p) in pos.iter().enumerate() {
                j.alpha[p] = i.alpha[k];
                j.beta[p] = i.beta[k];
            }
            r.add_term(j, c.clone());
        }
        r
    }

    /// Sum; variables are united by name, missing slots padded with ε^0.
    pub fn add(&self, o: &Self) -> Self {
        let mut vars = self.variables.clone();
        for v in &o.variables {
            if !vars.contains(v) {
                vars.push(v.clone());
            }
        }
        let n = self.truncation_order.min(o.truncation_order);
        let mut r = self.padded(&vars).with_truncation(n);
        r.truncated |= o.truncated;
        for (i, c) in o.padded(&vars).terms {
            r.add_term(i, c);
        }
        r
    }

    pub fn neg(&self) -> Self {
        self.map_terms(|_, c| Some(c.neg()))
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        self.map_terms(|_, x| Some(x.scale(c)))
    }

    pub fn scale_poly(&self, c: &CoeffPolynomial) -> Self {
        self.map_terms(|_, x| Some(x.mul(c)))
    }

    /// Product in A: the variables of `g` follow those of `f`, and the result
    /// is named e1..e_{n+n'}.
    pub fn tensor_product(&self, g: &Self) -> Self {
        let n = self.variables.len() + g.variables.len();
        let mut r = PFElement::zero(canonical_vars(n));
        r.truncation_order = self.truncation_order.min(g.truncation_order);
        r.truncated = self.truncated || g.truncated;
        for (i, a) in &self.terms {
            for (j, b) in &g.terms {
                r.add_term(i.concat(j), a.mul(b));
            }
        }
        r
    }

    /// Pointwise product over a shared variable list.
    pub fn shared_product(&self, g: &Self) -> Result<Self> {
        if self.variables != g.variables {
            return Err(PfError::VariableMismatch { left: self.variables.clone(), right: g.variables.clone() });
        }
        let mut r = PFElement::zero(self.variables.clone());
        r.truncation_order = self.truncation_order.min(g.truncation_order);
        r.truncated = self.truncated || g.truncated;
        for (i, a) in &self.terms {
            for (j, b) in &g.terms {
                r.add_term(i.add(j), a.mul(b));
            }
        }
        Ok(r)
    }

    /// Tensor product with one formal δ atom per identification.
    pub fn insertion_product(&self, v: &Self, idents: &[IdentificationMap]) -> Self {
        let mut delta = CoeffPolynomial::one();
        for id in idents.iter().filter(|id| !id.is_empty()) {
            delta = delta.mul(&CoeffPolynomial::atom(CoeffAtom::delta(id.len())));
        }
        self.tensor_product(v).scale_poly(&delta)
    }

    /// The scheme R: keep the singular terms.
    pub fn singular_part(&self, conv: DegreeConvention) -> Self {
        self.map_terms(|i, c| (degree_sign(i, conv) == DegreeSign::Negative).then(|| c.clone()))
    }

    /// (1 − R).
    pub fn regular_part(&self, conv: DegreeConvention) -> Self {
        self.map_terms(|i, c| (degree_sign(i, conv) != DegreeSign::Negative).then(|| c.clone()))
    }

    /// Coefficient of ε^0 once no singular terms remain.
    pub fn finite_limit(&self, conv: DegreeConvention) -> Result<CoeffPolynomial> {
        let bad: Vec<String> = self.singular_part(conv).terms.keys().map(|i| i.to_string()).collect();
        if !bad.is_empty() {
            return Err(PfError::SingularTerms(bad));
        }
        Ok(self.terms.iter().filter(|(i, _)| i.is_zero()).map(|(_, c)| c.clone()).fold(CoeffPolynomial::zero(), |a, c| a.add(&c)))
    }

    /// Terms keyed by their sorted nonzero columns, so elements differing only
    /// by variable order or padding compare equal.
    pub fn aligned(&self) -> BTreeMap<Vec<(i64, u32)>, CoeffPolynomial> {
        let mut m: BTreeMap<Vec<(i64, u32)>, CoeffPolynomial> = BTreeMap::new();
        for (i, c) in &self.terms {
            let e = m.entry(i.aligned()).or_default();
            *e = e.add(c);
        }
        m.retain(|_, c| !c.is_zero());
        m
    }

    pub fn aligned_eq(&self, o: &Self) -> bool {
        self.aligned() == o.aligned()
    }

    /// Indices with total Σα, Σβ.
    pub fn total_degrees(&self) -> BTreeSet<(i64, u32)> {
        self.terms.keys().map(|i| i.total()).collect()
    }

    pub fn substitute(&self, f: &dyn Fn(&CoeffAtom) -> Option<CoeffPolynomial>) -> Self {
        self.map_terms(|_, c| Some(c.substitute(f)))
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "vars [{}] order {}{}\n",
            self.variables.join(","),
            self.truncation_order,
            if self.truncated { " truncated" } else { "" }
        );
        for (i, c) in &self.terms {
            s.push_str(&format!("{i} : {c}\n"));
        }
        s
    }

    pub fn from_text(s: &str) -> Result<Self> {
        let bad = |m: &str| PfError::Parse(m.to_string());
        let mut lines = s.lines().filter(|l| !l.trim().is_empty());
        let head = lines.next().ok_or_else(|| bad("empty input"))?;
        let rest = head.strip_prefix("vars [").ok_or_else(|| bad("missing header"))?;
        let (vars, rest) = rest.split_once(']').ok_or_else(|| bad("unterminated variable list"))?;
        let variables: Vec<String> =
            if vars.is_empty() { vec![] } else { vars.split(',').map(str::to_string).collect() };
        let mut words = rest.split_whitespace();
        if words.next() != Some("order") {
            return Err(bad("missing order"));
        }
        let order: i64 = words.next().and_then(|w| w.parse().ok()).ok_or_else(|| bad("bad order"))?;
        let truncated = match words.next() {
            None => false,
            Some("truncated") => true,
            Some(w) => return Err(bad(&format!("unexpected {w:?}"))),
        };
        let mut f = PFElement::zero(variables);
        f.truncation_order = order;
        for line in lines {
            let (ix, c) = line.split_once(" : ").ok_or_else(|| bad("missing ' : '"))?;
            let i = parse_index(ix)?;
            if i.len() != f.variables.len() {
                return Err(PfError::IndexLength { found: i.len(), expected: f.variables.len() });
            }
            f.add_term(i, c.parse()?);
        }
        f.truncated = truncated;
        Ok(f)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(PfJson::from(self)).expect("serializable")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let j: PfJson = serde_json::from_value(v.clone()).map_err(|e| PfError::Parse(e.to_string()))?;
        j.try_into()
    }
}

fn parse_index(s: &str) -> Result<PowerIndex> {
    let bad = || PfError::Parse(format!("bad index {s:?}"));
    let inner = s.trim().strip_prefix('(').and_then(|x| x.strip_suffix(')')).ok_or_else(bad)?;
    let (a, b) = inner.split_once('|').ok_or_else(bad)?;
    let alpha: Vec<i64> =
        if a.is_empty() { vec![] } else { a.split(',').map(|x| x.parse().map_err(|_| bad())).collect::<Result<_>>()? };
    let beta: Vec<u32> =
        if b.is_empty() { vec![] } else { b.split(',').map(|x| x.parse().map_err(|_| bad())).collect::<Result<_>>()? };
    if alpha.len() != beta.len() {
        return Err(bad());
    }
    Ok(PowerIndex { alpha, beta })
}

impl fmt::Display for PFElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(i, c)| format!("{i} : {c}")).collect();
        write!(f, "{}", parts.join("\n"))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MonoJson {
    atoms: Vec<CoeffAtom>,
    value: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermJson {
    alpha: Vec<i64>,
    beta: Vec<u32>,
    coefficient: Vec<MonoJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PfJson {
    variables: Vec<String>,
    truncation_order: i64,
    truncated: bool,
    terms: Vec<TermJson>,
}

impl From<&PFElement> for PfJson {
    fn from(f: &PFElement) -> Self {
        PfJson {
            variables: f.variables.clone(),
            truncation_order: f.truncation_order,
            truncated: f.truncated,
            terms: f
                .terms
                .iter()
                .map(|(i, c)| TermJson {
                    alpha: i.alpha.clone(),
                    beta: i.beta.clone(),
                    coefficient: c.terms().map(|(m, x)| MonoJson { atoms: m.clone(), value: fmt_rational(x) }).collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<PfJson> for PFElement {
    type Error = PfError;

    fn try_from(j: PfJson) -> Result<Self> {
        let mut f = PFElement::zero(j.variables);
        f.truncation_order = j.truncation_order;
        for t in j.terms {
            if t.alpha.len() != f.variables.len() || t.beta.len() != f.variables.len() {
                return Err(PfError::IndexLength { found: t.alpha.len(), expected: f.variables.len() });
            }
            let mut c = CoeffPolynomial::zero();
            for m in t.coefficient {
                c.add_monomial(m.atoms, parse_rational(&m.value)?);
            }
            f.add_term(PowerIndex { alpha: t.alpha, beta: t.beta }, c);
        }
        f.truncated = j.truncated;
        Ok(f)
    }
}

fn product(f: &PFElement, g: &PFElement, mode: ProductMode) -> Result<PFElement> {
    match mode {
        ProductMode::Shared => f.shared_product(g),
        ProductMode::Tensor => Ok(f.tensor_product(g)),
    }
}

/// Both sides of R(f)R(g) + R(fg) = R(R(f)g + fR(g)).
pub fn rota_baxter_sides(f: &PFElement, g: &PFElement, mode: ProductMode, conv: DegreeConvention) -> Result<(PFElement, PFElement)> {
    let (rf, rg) = (f.singular_part(conv), g.singular_part(conv));
    let lhs = product(&rf, &rg, mode)?.add(&product(f, g, mode)?.singular_part(conv));
    let rhs = product(&rf, g, mode)?.add(&product(f, &rg, mode)?).singular_part(conv);
    Ok((lhs, rhs))
}

pub fn check_rota_baxter(f: &PFElement, g: &PFElement, mode: ProductMode, conv: DegreeConvention) -> Result<bool> {
    let (l, r) = rota_baxter_sides(f, g, mode, conv)?;
    Ok(l == r)
}

/// ε^α log^β ε in one variable with coefficient `c`.
pub fn monomial(alpha: i64, beta: u32, c: CoeffPolynomial) -> PFElement {
    PFElement::from_terms(vec!["e1".into()], [(PowerIndex::single(alpha, beta), c)]).expect("one variable")
}

pub fn rational(a: i64, b: i64) -> BigRational {
    BigRational::new(a.into(), b.into())
}
