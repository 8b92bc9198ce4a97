//! Characters into the ε-expansion algebra, the Bogoliubov recursion and
//! Z-factors.

use crate::graph::{GraphError, GraphKey, Residue, Theory};
use crate::hopf::{binomial, display_name, key_loops, GraphMonomial, GraphPolynomial, Hopf, HopfError, TensorPolynomial};
use crate::pfalg::{AtomKind, CoeffAtom, CoeffPolynomial, DegreeConvention, PFElement, PowerIndex};
use num::{BigRational, Zero};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BirkhoffError {
    #[error(transparent)]
    Hopf(#[from] HopfError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("non-integral vertex/edge counts for {n} external legs at {loops} loops")]
    NonIntegralCounts { n: u32, loops: u32 },
}

pub type Result<T> = std::result::Result<T, BirkhoffError>;

/// An algebra morphism from graph polynomials to ε-expansions, given by its
/// values on generators.
pub trait Character: Sync {
    fn name(&self) -> String;

    fn generator(&self, k: &GraphKey) -> Result<PFElement>;

    fn monomial(&self, m: &GraphMonomial) -> Result<PFElement> {
        let mut out = PFElement::unit();
        for k in m.expanded() {
            out = out.tensor_product(&self.generator(&k)?);
        }
        Ok(out)
    }

    fn eval(&self, x: &GraphPolynomial) -> Result<PFElement> {
        let mut out = PFElement::zero(vec![]);
        for (m, c) in x.terms() {
            out = out.add(&self.monomial(m)?.scale(c));
        }
        Ok(out)
    }
}

/// Generic Feynman rules: each generator gets fresh atoms over the index range
/// its divergence degree allows.
pub struct SymbolicRules {
    pub theory: Theory,
}

impl SymbolicRules {
    pub fn new(theory: Theory) -> Self {
        SymbolicRules { theory }
    }

    pub fn atom(k: &GraphKey, alpha: i64, beta: u32) -> CoeffAtom {
        let kind = if alpha == 0 && beta == 0 { AtomKind::AmplitudeFinitePart } else { AtomKind::PoleCoefficient };
        CoeffAtom::new(kind, display_name(k), vec![alpha, beta as i64])
    }
}

impl Character for SymbolicRules {
    fn name(&self) -> String {
        "Phi".into()
    }

    fn generator(&self, k: &GraphKey) -> Result<PFElement> {
        let g = k.decode()?;
        let s = g.sdd()?;
        let l = g.loop_number() as u32;
        let mut idx = Vec::new();
        if s < 0 || l == 0 {
            idx.push((0, 0));
            idx.push((1, 0));
        } else {
            for a in -s..0 {
                for b in 0..l {
                    idx.push((a, b));
                }
            }
            for b in 0..=l {
                idx.push((0, b));
            }
        }
        let terms = idx.into_iter().map(|(a, b)| (PowerIndex::single(a, b), CoeffPolynomial::atom(Self::atom(k, a, b))));
        Ok(PFElement::from_terms(vec!["e1".into()], terms).expect("one variable"))
    }
}

/// 𝕀 ↦ 1, every generator ↦ 0.
pub struct UnitCharacter;

impl Character for UnitCharacter {
    fn name(&self) -> String {
        "e".into()
    }

    fn generator(&self, _: &GraphKey) -> Result<PFElement> {
        Ok(PFElement::zero(vec![]))
    }
}

/// The projector R used in the decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Hadamard(DegreeConvention),
    Zero,
    Identity,
}

impl Default for Scheme {
    fn default() -> Self {
        Scheme::Hadamard(DegreeConvention::Corrected)
    }
}

impl Scheme {
    pub fn apply(&self, f: &PFElement) -> PFElement {
        match self {
            Scheme::Hadamard(c) => f.singular_part(*c),
            Scheme::Zero => f.scale(&BigRational::zero()),
            Scheme::Identity => f.clone(),
        }
    }
}

/// δ-pairing factor for an insertion pattern.
pub fn delta_factor(pattern: &[u32]) -> CoeffPolynomial {
    pattern
        .iter()
        .fold(CoeffPolynomial::one(), |acc, &p| acc.mul(&CoeffPolynomial::atom(CoeffAtom::delta(p as usize))))
}

/// m ∘ (f ⊗_δ g) ∘ Δ.
pub fn convolution(hopf: &Hopf, f: &dyn Character, g: &dyn Character, x: &GraphPolynomial) -> Result<PFElement> {
    pair_tensor(&hopf.coproduct(x)?, f, g)
}

/// Apply f ⊗_δ g to a tensor polynomial and multiply out.
pub fn pair_tensor(t: &TensorPolynomial, f: &dyn Character, g: &dyn Character) -> Result<PFElement> {
    let mut out = PFElement::zero(vec![]);
    for (k, c) in t.terms() {
        let v = f.monomial(&k.left)?.tensor_product(&g.monomial(&k.right)?).scale_poly(&delta_factor(&k.pattern));
        out = out.add(&v.scale(c));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Bar,
    Minus,
    Plus,
}

/// Birkhoff decomposition Φ = (Φ⁻)⋆⁻¹ ⋆ Φ⁺ of a character, memoized per generator.
pub struct Birkhoff<'a> {
    pub hopf: &'a Hopf,
    pub phi: &'a dyn Character,
    pub scheme: Scheme,
    bar: Mutex<HashMap<GraphKey, Arc<PFElement>>>,
    minus_monomials: Mutex<HashMap<GraphMonomial, Arc<PFElement>>>,
}

impl<'a> Birkhoff<'a> {
    pub fn new(hopf: &'a Hopf, phi: &'a dyn Character, scheme: Scheme) -> Self {
        Birkhoff { hopf, phi, scheme, bar: Default::default(), minus_monomials: Default::default() }
    }

    /// Φ̄(Γ) = Φ(Γ) + Σ Φ⁻(γ) ⊗_δ Φ(Γ\γ) over proper terms.
    pub fn bogoliubov(&self, k: &GraphKey) -> Result<Arc<PFElement>> {
        if let Some(v) = self.bar.lock().unwrap().get(k) {
            return Ok(v.clone());
        }
        let delta = self.hopf.generator_coproduct(k)?;
        let mut v = self.phi.generator(k)?;
        for (t, c) in delta.terms() {
            if t.left.is_unit() || t.right.is_unit() {
                continue;
            }
            let minus = self.minus_monomial(&t.left)?;
            let term = minus.tensor_product(&self.phi.monomial(&t.right)?).scale_poly(&delta_factor(&t.pattern));
            v = v.add(&term.scale(c));
        }
        let v = Arc::new(v);
        self.bar.lock().unwrap().insert(k.clone(), v.clone());
        Ok(v)
    }

    pub fn part_generator(&self, part: Part, k: &GraphKey) -> Result<PFElement> {
        let b = self.bogoliubov(k)?;
        Ok(match part {
            Part::Bar => (*b).clone(),
            Part::Minus => self.scheme.apply(&b).neg(),
            Part::Plus => b.sub(&self.scheme.apply(&b)),
        })
    }

    fn minus_monomial(&self, m: &GraphMonomial) -> Result<PFElement> {
        let mut out = PFElement::unit();
        for k in m.expanded() {
            out = out.tensor_product(&self.part_generator(Part::Minus, &k)?);
        }
        Ok(out)
    }

    pub fn character(&self, part: Part) -> PartCharacter<'_, 'a> {
        PartCharacter { b: self, part }
    }

    /// Φ⁻ extended linearly and multiplicatively.
    pub fn counterterm(&self, x: &GraphPolynomial) -> Result<PFElement> {
        self.character(Part::Minus).eval(x)
    }

    /// Φ⁺ extended linearly and multiplicatively.
    pub fn renormalized(&self, x: &GraphPolynomial) -> Result<PFElement> {
        self.character(Part::Plus).eval(x)
    }

    /// Φ⁻ on a monomial by the recursion applied to the monomial itself,
    /// without assuming multiplicativity.
    pub fn counterterm_recursive(&self, m: &GraphMonomial) -> Result<PFElement> {
        if m.is_unit() {
            return Ok(PFElement::unit());
        }
        if let Some(v) = self.minus_monomials.lock().unwrap().get(m) {
            return Ok((**v).clone());
        }
        let mut bar = self.phi.monomial(m)?;
        for (t, c) in self.hopf.monomial_coproduct(m)?.terms() {
            if t.left.is_unit() || t.right.is_unit() {
                continue;
            }
            let minus = self.counterterm_recursive(&t.left)?;
            let term = minus.tensor_product(&self.phi.monomial(&t.right)?).scale_poly(&delta_factor(&t.pattern));
            bar = bar.add(&term.scale(c));
        }
        let v = self.scheme.apply(&bar).neg();
        self.minus_monomials.lock().unwrap().insert(m.clone(), Arc::new(v.clone()));
        Ok(v)
    }

    pub fn z_factor(&self, r: Residue, max_loops: u32) -> Result<ZFactorSeries> {
        let mut coefficients = BTreeMap::new();
        for l in 1..=max_loops {
            coefficients.insert(l, self.counterterm(&self.hopf.precombinatorial(r, l)?)?);
        }
        Ok(ZFactorSeries { residue: r, coefficients })
    }

    /// Σ_l Σ_{j,K} [(Z^v − 1)^j (1 − Z^e)^K]_{L−l} ⊗_δ Φ(Y^r_{l,K,j}).
    pub fn multiplicative_rules(&self, r: Residue, loops: u32) -> Result<PFElement> {
        let m = self.hopf.theory.m;
        let zv = self.z_factor(Residue::Vert, loops)?.series().sub_one();
        let ze = self.z_factor(Residue::Prop, loops)?.series().sub_one().neg();
        let mut out = PFElement::zero(vec![]);
        for l in 0..=loops {
            let rest = loops - l;
            for j in 0..=rest {
                for kk in 0..=rest {
                    let left = if rest == 0 {
                        if j + kk > 0 {
                            continue;
                        }
                        PFElement::unit()
                    } else {
                        zv.pow(j, loops).mul(&ze.pow(kk, loops), loops).grade(rest)
                    };
                    if left.is_zero() {
                        continue;
                    }
                    let y = self.hopf.cut_greens(r, l, kk, j, false)?;
                    if y.is_zero() {
                        continue;
                    }
                    let pattern: Vec<u32> = if l == 0 || rest == 0 {
                        vec![]
                    } else {
                        std::iter::repeat(m).take(j as usize).chain(std::iter::repeat(2).take(kk as usize)).collect()
                    };
                    let term = left.tensor_product(&self.phi.eval(&y)?).scale_poly(&delta_factor(&pattern));
                    out = out.add(&term);
                }
            }
        }
        Ok(out)
    }

    /// Σ_l [(Z^v)^{v(r,l)} (Z^e)^{−e(r,l)}]_{L−l} ⊗ Φ(X^r_l): the Z-power form,
    /// in which every cut graph is replaced by its parent.
    pub fn z_power_rules(&self, r: Residue, loops: u32) -> Result<PFElement> {
        let zv = self.z_factor(Residue::Vert, loops)?.series();
        let ze = self.z_factor(Residue::Prop, loops)?.series();
        let mut out = PFElement::zero(vec![]);
        for l in 0..=loops {
            let (v, e) = vertex_edge_counts(self.hopf.theory, r, l)?;
            let z = zv.powi(v, loops).mul(&ze.powi(-e, loops), loops).grade(loops - l);
            let x = self.hopf.greens_function(r, l)?;
            out = out.add(&z.tensor_product(&self.phi.eval(&x)?));
        }
        Ok(out)
    }

    /// Route (a) with Φ(cut graph) replaced by Φ(parent) and no δ factors;
    /// equals [`Birkhoff::z_power_rules`] exactly when the cut counts obey the
    /// binomial expansion of the Z-powers.
    pub fn collapsed_rules(&self, r: Residue, loops: u32) -> Result<PFElement> {
        let zv = self.z_factor(Residue::Vert, loops)?.series().sub_one();
        let ze = self.z_factor(Residue::Prop, loops)?.series().sub_one().neg();
        let mut out = PFElement::zero(vec![]);
        for l in 0..=loops {
            let rest = loops - l;
            let x = self.hopf.greens_function(r, l)?;
            for j in 0..=rest {
                for kk in 0..=rest {
                    let left = if rest == 0 {
                        if j + kk > 0 {
                            continue;
                        }
                        PFElement::unit()
                    } else {
                        zv.pow(j, loops).mul(&ze.pow(kk, loops), loops).grade(rest)
                    };
                    if left.is_zero() {
                        continue;
                    }
                    let mut parents = GraphPolynomial::zero();
                    if l == 0 {
                        let y = self.hopf.cut_greens(r, 0, kk, j, false)?;
                        parents = y;
                    } else {
                        for (mono, c) in x.terms() {
                            let one = GraphPolynomial::monomial(mono.clone(), c.clone());
                            let n: BigRational = self.hopf.cut(&one, kk, j)?.terms().map(|(_, w)| w.clone()).sum();
                            parents = parents.add(&GraphPolynomial::monomial(mono.clone(), n));
                        }
                    }
                    out = out.add(&left.tensor_product(&self.phi.eval(&parents)?));
                }
            }
        }
        Ok(out)
    }

    pub fn verify_multiplicative_renormalization(&self, r: Residue, loops: u32) -> Result<MultiplicativeReport> {
        let rules = self.multiplicative_rules(r, loops)?;
        let renormalized = self.renormalized(&self.hopf.greens_function(r, loops)?)?;
        let equal = rules.aligned_eq(&renormalized);
        Ok(MultiplicativeReport { residue: r, loops, rules, renormalized, equal })
    }

    pub fn ledger(&self, k: &GraphKey) -> Result<GraphLedger> {
        let phi = self.phi.generator(k)?;
        Ok(GraphLedger {
            key: k.as_str().to_string(),
            name: display_name(k),
            loops: key_loops(k),
            phi: phi.to_text(),
            bar: self.part_generator(Part::Bar, k)?.to_text(),
            minus: self.part_generator(Part::Minus, k)?.to_text(),
            plus: self.part_generator(Part::Plus, k)?.to_text(),
        })
    }
}

/// Φ̄, Φ⁻ or Φ⁺ as a character.
pub struct PartCharacter<'b, 'a> {
    b: &'b Birkhoff<'a>,
    part: Part,
}

impl Character for PartCharacter<'_, '_> {
    fn name(&self) -> String {
        match self.part {
            Part::Bar => "Phi_bar".into(),
            Part::Minus => "Phi_minus".into(),
            Part::Plus => "Phi_plus".into(),
        }
    }

    fn generator(&self, k: &GraphKey) -> Result<PFElement> {
        self.b.part_generator(self.part, k)
    }
}

/// Number of vertices and internal edges of any graph of residue `r` at `l` loops.
pub fn vertex_edge_counts(t: Theory, r: Residue, l: u32) -> Result<(i64, i64)> {
    let n = r.n_ext(t);
    t.euler_counts(n, l).ok_or(BirkhoffError::NonIntegralCounts { n, loops: l })
}

/// Formal power series in the loop grading with ε-expansion coefficients.
#[derive(Clone, Debug)]
pub struct LoopSeries(pub BTreeMap<u32, PFElement>);

impl LoopSeries {
    pub fn one() -> Self {
        LoopSeries(BTreeMap::from([(0, PFElement::unit())]))
    }

    pub fn grade(&self, l: u32) -> PFElement {
        self.0.get(&l).cloned().unwrap_or_else(|| PFElement::zero(vec![]))
    }

    fn push(&mut self, l: u32, f: PFElement) {
        let e = self.0.entry(l).or_insert_with(|| PFElement::zero(vec![]));
        *e = e.add(&f);
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (&l, f) in &o.0 {
            r.push(l, f.clone());
        }
        r
    }

    pub fn neg(&self) -> Self {
        LoopSeries(self.0.iter().map(|(&l, f)| (l, f.neg())).collect())
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        LoopSeries(self.0.iter().map(|(&l, f)| (l, f.scale(c))).collect())
    }

    pub fn sub_one(&self) -> Self {
        self.add(&LoopSeries::one().neg())
    }

    /// Product truncated above `max` loops.
    pub fn mul(&self, o: &Self, max: u32) -> Self {
        let mut r = LoopSeries(BTreeMap::new());
        for (&a, f) in &self.0 {
            for (&b, g) in &o.0 {
                if a + b <= max {
                    r.push(a + b, f.tensor_product(g));
                }
            }
        }
        r
    }

    pub fn pow(&self, k: u32, max: u32) -> Self {
        (0..k).fold(LoopSeries::one(), |acc, _| acc.mul(self, max))
    }

    /// Z^p = Σ_j C(p, j) (Z − 1)^j for a series with constant term 1.
    pub fn powi(&self, p: i64, max: u32) -> Self {
        let s = self.sub_one();
        let mut r = LoopSeries(BTreeMap::new());
        for j in 0..=max {
            let c = binomial(p, j as i64);
            if c != 0 {
                r = r.add(&s.pow(j, max).scale(&BigRational::from_integer(c.into())));
            }
        }
        r
    }

    /// Whether two series agree gradewise up to canonical variable alignment.
    pub fn aligned_eq(&self, o: &Self, max: u32) -> bool {
        (0..=max).all(|l| self.grade(l).aligned_eq(&o.grade(l)))
    }
}

#[derive(Clone, Debug)]
pub struct ZFactorSeries {
    pub residue: Residue,
    /// C^r_L = Φ⁻(x^r_L).
    pub coefficients: BTreeMap<u32, PFElement>,
}

impl ZFactorSeries {
    /// +1 for vertices, −1 for propagators.
    pub fn sign(&self) -> i64 {
        match self.residue {
            Residue::Vert => 1,
            Residue::Prop => -1,
        }
    }

    pub fn max_loops(&self) -> u32 {
        self.coefficients.keys().max().copied().unwrap_or(0)
    }

    /// Z^r = 1 ± Σ C^r_L.
    pub fn series(&self) -> LoopSeries {
        let s = BigRational::from_integer(self.sign().into());
        let mut z = LoopSeries::one();
        for (&l, c) in &self.coefficients {
            z.push(l, c.scale(&s));
        }
        z
    }

    /// 1/Z^r by the geometric series.
    pub fn inverse(&self) -> LoopSeries {
        self.series().powi(-1, self.max_loops())
    }

    pub fn truncated(&self, l: u32) -> ZFactorSeries {
        ZFactorSeries { residue: self.residue, coefficients: self.coefficients.iter().filter(|(&k, _)| k <= l).map(|(&k, v)| (k, v.clone())).collect() }
    }
}

#[derive(Clone, Debug)]
pub struct MultiplicativeReport {
    pub residue: Residue,
    pub loops: u32,
    pub rules: PFElement,
    pub renormalized: PFElement,
    pub equal: bool,
}

/// Per-graph Φ, Φ̄, Φ⁻, Φ⁺ in text form.
#[derive(Clone, Debug, Serialize)]
pub struct GraphLedger {
    pub key: String,
    pub name: String,
    pub loops: usize,
    pub phi: String,
    pub bar: String,
    pub minus: String,
    pub plus: String,
}

/// Generators of all monomials in `x`.
pub fn generators(x: &GraphPolynomial) -> Vec<GraphKey> {
    let mut v: Vec<GraphKey> = x.terms().flat_map(|(m, _)| m.factors().map(|(k, _)| k.clone()).collect::<Vec<_>>()).collect();
    v.sort();
    v.dedup();
    v
}
