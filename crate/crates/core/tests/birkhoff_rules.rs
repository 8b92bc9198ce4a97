use ckren::birkhoff::*;
use ckren::graph::builtin::*;
use ckren::graph::*;
use ckren::hopf::*;
use ckren::pfalg::*;
use num::{BigRational, One};
use proptest::prelude::*;

const T: Theory = Theory::PHI3_D6;
const COR: DegreeConvention = DegreeConvention::Corrected;

fn key(g: &FeynmanGraph) -> GraphKey {
    unlabeled_form(g)
}

fn gp(g: &FeynmanGraph) -> GraphPolynomial {
    GraphPolynomial::graph(g)
}

fn q(a: i64, b: i64) -> BigRational {
    BigRational::new(a.into(), b.into())
}

fn delta(p: &[u32]) -> CoeffPolynomial {
    delta_factor(p)
}

/// Generators of all 1PI graphs up to two loops.
fn one_pi_generators(h: &Hopf) -> Vec<GraphKey> {
    let mut x = GraphPolynomial::zero();
    for r in [Residue::Prop, Residue::Vert] {
        for l in 1..=2 {
            x = x.add(&h.precombinatorial(r, l).unwrap());
        }
    }
    generators(&x)
}

#[test]
fn symbolic_rules_index_ranges() {
    let phi = SymbolicRules::new(T);
    let b = phi.generator(&key(&bubble())).unwrap();
    let idx: Vec<(i64, u32)> = b.terms().map(|(i, _)| (i.alpha[0], i.beta[0])).collect();
    assert_eq!(idx, vec![(-2, 0), (-1, 0), (0, 0), (0, 1)]);
    let t = phi.generator(&key(&triangle())).unwrap();
    let idx: Vec<(i64, u32)> = t.terms().map(|(i, _)| (i.alpha[0], i.beta[0])).collect();
    assert_eq!(idx, vec![(0, 0), (0, 1)]);
    assert_eq!(phi.eval(&GraphPolynomial::unit()).unwrap(), PFElement::unit());
}

#[test]
fn convolution_examples() {
    let h = Hopf::new(T, 3);
    let phi = SymbolicRules::new(T);
    let bk = Birkhoff::new(&h, &phi, Scheme::default());
    let minus = bk.character(Part::Minus);
    let eta = UnitCharacter;

    let nested = gp(&bubble_upper_edge_correction());
    assert!(convolution(&h, &phi, &eta, &nested).unwrap().aligned_eq(&phi.eval(&nested).unwrap()));

    let b = gp(&bubble());
    let expect = minus.eval(&b).unwrap().add(&phi.eval(&b).unwrap());
    assert!(convolution(&h, &minus, &phi, &b).unwrap().aligned_eq(&expect));

    let d = h.reduced_coproduct(&nested).unwrap();
    let (t, _) = d.terms().next().unwrap();
    let inner = minus.monomial(&t.left).unwrap().tensor_product(&phi.monomial(&t.right).unwrap()).scale_poly(&delta(&[2]));
    let expect = phi.eval(&nested).unwrap().add(&minus.eval(&nested).unwrap()).add(&inner);
    assert!(convolution(&h, &minus, &phi, &nested).unwrap().aligned_eq(&expect));
}

#[test]
fn bogoliubov_examples() {
    let h = Hopf::new(T, 3);
    let phi = SymbolicRules::new(T);
    let bk = Birkhoff::new(&h, &phi, Scheme::default());
    let tri = key(&triangle());
    assert_eq!(*bk.bogoliubov(&tri).unwrap(), phi.generator(&tri).unwrap());

    // vertex graph with two triangle subgraphs
    let g = bubble_vertex_correction();
    let rphi_tri = phi.generator(&tri).unwrap().singular_part(COR);
    let mut expect = phi.eval(&gp(&g)).unwrap();
    for t in coproduct_terms(&g).unwrap() {
        let right = GraphPolynomial::graph(&t.cograph);
        expect = expect.sub(&rphi_tri.tensor_product(&phi.eval(&right).unwrap()).scale_poly(&delta(&[3])));
    }
    assert!(bk.bogoliubov(&key(&g)).unwrap().aligned_eq(&expect));

    let n = bubble_upper_edge_correction();
    let rphi_b = phi.generator(&key(&bubble())).unwrap().singular_part(COR);
    let t = &coproduct_terms(&n).unwrap()[0];
    let expect = phi
        .eval(&gp(&n))
        .unwrap()
        .sub(&rphi_b.tensor_product(&phi.eval(&GraphPolynomial::graph(&t.cograph)).unwrap()).scale_poly(&delta(&[2])));
    assert!(bk.bogoliubov(&key(&n)).unwrap().aligned_eq(&expect));
}

#[test]
fn decomposition_properties() {
    let h = Hopf::new(T, 3);
    let phi = SymbolicRules::new(T);
    let bk = Birkhoff::new(&h, &phi, Scheme::default());
    let (minus, plus) = (bk.character(Part::Minus), bk.character(Part::Plus));
    for k in one_pi_generators(&h) {
        let x = GraphPolynomial::monomial(GraphMonomial::single(k.clone()), BigRational::one());
        let p = plus.eval(&x).unwrap();
        let m = minus.eval(&x).unwrap();
        assert!(p.singular_part(COR).is_zero(), "{}", display_name(&k));
        assert!(m.regular_part(COR).is_zero(), "{}", display_name(&k));
        assert!(convolution(&h, &minus, &phi, &x).unwrap().aligned_eq(&p), "{}", display_name(&k));
    }
}

#[test]
fn counterterms_multiply_without_assuming_it() {
    let h = Hopf::new(T, 3);
    let phi = SymbolicRules::new(T);
    let bk = Birkhoff::new(&h, &phi, Scheme::default());
    let gens = one_pi_generators(&h);
    let minus = bk.character(Part::Minus);
    for a in gens.iter().filter(|k| key_loops(k) == 1) {
        for b in &gens {
            let m = GraphMonomial::from_keys([a.clone(), b.clone()]);
            let rec = bk.counterterm_recursive(&m).unwrap();
            assert!(rec.aligned_eq(&minus.monomial(&m).unwrap()), "{} {}", display_name(a), display_name(b));
        }
    }
}

#[test]
fn extreme_schemes() {
    let h = Hopf::new(T, 3);
    let phi = SymbolicRules::new(T);
    let zero = Birkhoff::new(&h, &phi, Scheme::Zero);
    let id = Birkhoff::new(&h, &phi, Scheme::Identity);
    for k in one_pi_generators(&h) {
        let x = GraphPolynomial::monomial(GraphMonomial::single(k), BigRational::one());
        assert!(zero.renormalized(&x).unwrap().aligned_eq(&phi.eval(&x).unwrap()));
        assert!(zero.counterterm(&x).unwrap().is_zero());
        assert!(id.renormalized(&x).unwrap().is_zero());
    }
}

#[test]
fn one_loop_renormalized_rules() {
    let h = Hopf::new(T, 3);
    let phi = SymbolicRules::new(T);
    let bk = Birkhoff::new(&h, &phi, Scheme::default());
    for r in [Residue::Prop, Residue::Vert] {
        let x1 = h.greens_function(r, 1).unwrap();
        let c = phi.eval(&x1).unwrap().singular_part(COR).neg();
        let expect = phi.eval(&x1).unwrap().add(&c);
        assert!(bk.renormalized(&x1).unwrap().aligned_eq(&expect), "{r}");
    }
}

/// Φ of the distinct-cut shapes of x^r_1.
fn y_distinct(h: &Hopf, phi: &SymbolicRules, r: Residue, e: u32, v: u32) -> PFElement {
    phi.eval(&h.cut_distinct(&h.precombinatorial(r, 1).unwrap(), e, v).unwrap()).unwrap()
}

#[test]
fn two_loop_renormalized_rules_and_counterterms() {
    let h = Hopf::new(T, 3);
    let phi = SymbolicRules::new(T);
    let bk = Birkhoff::new(&h, &phi, Scheme::default());
    let c = |r, l| bk.counterterm(&h.precombinatorial(r, l).unwrap()).unwrap();
    let rphi = |r, l| phi.eval(&h.precombinatorial(r, l).unwrap()).unwrap().singular_part(COR);
    for (r, mult) in [(Residue::Prop, 2), (Residue::Vert, 3)] {
        let x2 = h.precombinatorial(r, 2).unwrap();
        let ye = y_distinct(&h, &phi, r, 1, 0);
        let yv = y_distinct(&h, &phi, r, 0, 1);
        let m = q(mult, 1);
        let ins = c(Residue::Prop, 1)
            .tensor_product(&ye)
            .scale_poly(&delta(&[2]))
            .add(&c(Residue::Vert, 1).tensor_product(&yv).scale_poly(&delta(&[3])))
            .scale(&m);
        let expect = phi.eval(&x2).unwrap().add(&ins).add(&c(r, 2));
        assert!(bk.renormalized(&x2).unwrap().aligned_eq(&expect), "{r}");

        let inner = rphi(Residue::Prop, 1)
            .tensor_product(&ye)
            .scale_poly(&delta(&[2]))
            .add(&rphi(Residue::Vert, 1).tensor_product(&yv).scale_poly(&delta(&[3])))
            .scale(&m);
        let formula = inner.singular_part(COR).sub(&rphi(r, 2));
        assert!(c(r, 2).aligned_eq(&formula), "{r}");
        // written with C in place of RΦ the sign of the first group flips
        let flipped = inner.neg().singular_part(COR).sub(&rphi(r, 2));
        assert!(!c(r, 2).aligned_eq(&flipped));
    }
}

#[test]
fn z_factors() {
    let h = Hopf::new(T, 3);
    let phi = SymbolicRules::new(T);
    let bk = Birkhoff::new(&h, &phi, Scheme::default());
    let zp = bk.z_factor(Residue::Prop, 2).unwrap();
    let zv = bk.z_factor(Residue::Vert, 2).unwrap();
    let c1 = bk.counterterm(&h.precombinatorial(Residue::Prop, 1).unwrap()).unwrap();
    assert!(zp.series().grade(1).aligned_eq(&c1.neg()));
    assert!(zv.series().grade(1).aligned_eq(&bk.counterterm(&h.precombinatorial(Residue::Vert, 1).unwrap()).unwrap()));

    // Z_Kin = 1/(1 − Σ C) is the geometric series
    let kin = zp.inverse();
    let geo = LoopSeries::one().add(&LoopSeries(zp.coefficients.clone()));
    let geo = geo.add(&LoopSeries(zp.coefficients.clone()).mul(&LoopSeries(zp.coefficients.clone()), 2));
    assert!(kin.aligned_eq(&geo, 2));
    assert!(kin.mul(&zp.series(), 2).aligned_eq(&LoopSeries::one(), 2));
    assert!(zp.truncated(0).series().aligned_eq(&LoopSeries::one(), 2));
    assert_eq!(zv.sign(), 1);
    assert_eq!(zp.sign(), -1);
}

#[test]
fn vertex_edge_count_exponents() {
    for l in 0..=3i64 {
        let (v, e) = vertex_edge_counts(T, Residue::Prop, l as u32).unwrap();
        assert_eq!((-e, v), (1 - 3 * l, 2 * l));
        let (v, e) = vertex_edge_counts(T, Residue::Vert, l as u32).unwrap();
        assert_eq!((-e, v), (-3 * l, 1 + 2 * l));
    }
    let quintic = Theory::new(5, 4).unwrap();
    assert!(matches!(vertex_edge_counts(quintic, Residue::Prop, 1), Err(BirkhoffError::NonIntegralCounts { .. })));
}

#[test]
fn multiplicative_renormalization() {
    let h = Hopf::new(T, 3);
    let phi = SymbolicRules::new(T);
    let bk = Birkhoff::new(&h, &phi, Scheme::default());
    for r in [Residue::Prop, Residue::Vert] {
        for l in 0..=2 {
            let rep = bk.verify_multiplicative_renormalization(r, l).unwrap();
            assert!(rep.equal, "{r} L={l}\nrules\n{}\nrenormalized\n{}", rep.rules, rep.renormalized);
            let lit = bk.z_power_rules(r, l).unwrap();
            assert!(lit.aligned_eq(&bk.collapsed_rules(r, l).unwrap()), "{r} L={l}");
        }
    }
    let rep = bk.verify_multiplicative_renormalization(Residue::Vert, 0).unwrap();
    assert_eq!(rep.rules, PFElement::unit());
    let p1 = bk.multiplicative_rules(Residue::Prop, 1).unwrap();
    let x1 = h.greens_function(Residue::Prop, 1).unwrap();
    let c1 = bk.counterterm(&x1).unwrap();
    assert!(p1.aligned_eq(&phi.eval(&x1).unwrap().add(&c1)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parts_are_characters(i in 0usize..64, j in 0usize..64) {
        let h = Hopf::new(T, 3);
        let phi = SymbolicRules::new(T);
        let bk = Birkhoff::new(&h, &phi, Scheme::default());
        let gens = one_pi_generators(&h);
        let (a, b) = (&gens[i % gens.len()], &gens[j % gens.len()]);
        prop_assume!(key_loops(a) + key_loops(b) <= 3);
        let m = GraphMonomial::from_keys([a.clone(), b.clone()]);
        let x = GraphPolynomial::monomial(m, BigRational::one());
        let plus = bk.character(Part::Plus);
        let minus = bk.character(Part::Minus);
        let ga = GraphPolynomial::monomial(GraphMonomial::single(a.clone()), BigRational::one());
        let gb = GraphPolynomial::monomial(GraphMonomial::single(b.clone()), BigRational::one());
        prop_assert!(plus.eval(&x).unwrap().aligned_eq(&plus.eval(&ga).unwrap().tensor_product(&plus.eval(&gb).unwrap())));
        prop_assert!(convolution(&h, &minus, &phi, &x).unwrap().aligned_eq(&plus.eval(&x).unwrap()));
    }
}
