use ckren::graph::IdentificationMap;
use ckren::pfalg::*;
use proptest::prelude::*;

fn c(a: i64, b: i64) -> CoeffPolynomial {
    CoeffPolynomial::constant(rational(a, b))
}

fn atom(s: &str) -> CoeffPolynomial {
    CoeffPolynomial::atom(CoeffAtom::free(s))
}

fn mono(a: i64, b: u32, k: CoeffPolynomial) -> PFElement {
    monomial(a, b, k)
}

const COR: DegreeConvention = DegreeConvention::Corrected;

#[test]
fn tensor_product_examples() {
    let f = mono(-1, 0, atom("a"));
    let g = mono(0, 0, atom("b"));
    let p = f.tensor_product(&g);
    assert_eq!(p.variables(), ["e1", "e2"]);
    assert_eq!(p.len(), 1);
    assert_eq!(p.coefficient(&PowerIndex::new(vec![-1, 0], vec![0, 0])), atom("a").mul(&atom("b")));

    let u = f.tensor_product(&PFElement::unit());
    assert_eq!(u.variables(), ["e1"]);
    assert_eq!(u, f);
    let one = PFElement::from_terms(vec!["e1".into()], [(PowerIndex::zero(1), CoeffPolynomial::one())]).unwrap();
    let padded = f.tensor_product(&one);
    assert_eq!(padded.variables().len(), 2);
    assert!(padded.aligned_eq(&f));

    let x = mono(-1, 0, c(1, 1)).add(&mono(0, 0, atom("c")));
    let y = mono(-1, 0, c(1, 1)).add(&mono(0, 0, atom("d")));
    let p = x.tensor_product(&y);
    let ix = |a: i64, b: i64| PowerIndex::new(vec![a, b], vec![0, 0]);
    assert_eq!(p.len(), 4);
    assert_eq!(p.coefficient(&ix(-1, -1)), c(1, 1));
    assert_eq!(p.coefficient(&ix(-1, 0)), atom("d"));
    assert_eq!(p.coefficient(&ix(0, -1)), atom("c"));
    assert_eq!(p.coefficient(&ix(0, 0)), atom("c").mul(&atom("d")));
}

#[test]
fn shared_product_examples() {
    assert_eq!(mono(-2, 0, c(1, 1)).shared_product(&mono(1, 0, c(1, 1))).unwrap(), mono(-1, 0, c(1, 1)));
    let l2 = mono(0, 1, c(1, 1)).shared_product(&mono(0, 1, c(1, 1))).unwrap();
    assert_eq!(l2, mono(0, 2, c(1, 1)));
    assert_eq!(degree_sign(&PowerIndex::single(0, 2), COR), DegreeSign::Negative);

    let x = mono(-1, 0, c(1, 1)).add(&mono(0, 0, c(1, 1)));
    let y = mono(1, 0, c(1, 1)).add(&mono(2, 0, c(-1, 1)));
    // the ±ε cross terms cancel
    let expect = mono(0, 0, c(1, 1)).add(&mono(2, 0, c(-1, 1)));
    assert_eq!(x.shared_product(&y).unwrap(), expect);

    let z = mono(-1, 0, c(1, 1)).tensor_product(&PFElement::unit().tensor_product(&mono(0, 0, c(1, 1))));
    assert!(matches!(x.shared_product(&z), Err(PfError::VariableMismatch { .. })));
}

#[test]
fn singular_part_examples() {
    let f = mono(-2, 0, c(1, 1)).add(&mono(0, 0, atom("c0"))).add(&mono(1, 0, atom("c1")));
    assert_eq!(f.singular_part(COR), mono(-2, 0, c(1, 1)));
    assert!(mono(0, 0, atom("c")).singular_part(COR).is_zero());
    let g = mono(-1, 0, atom("a")).add(&mono(0, 1, atom("b"))).add(&mono(0, 0, atom("d")));
    assert_eq!(g.singular_part(COR), mono(-1, 0, atom("a")).add(&mono(0, 1, atom("b"))));
    // the literal ordering leaves the logarithm in the regular part
    assert_eq!(g.singular_part(DegreeConvention::Literal), mono(-1, 0, atom("a")));
}

#[test]
fn rota_baxter_examples() {
    for mode in [ProductMode::Shared, ProductMode::Tensor] {
        assert!(check_rota_baxter(&mono(-1, 0, c(1, 1)), &mono(1, 0, c(1, 1)), mode, COR).unwrap());
        assert!(check_rota_baxter(&mono(0, 1, c(1, 1)), &mono(0, 1, c(1, 1)), mode, COR).unwrap());
    }
    // R(ε⁻¹)R(ε) = 0 and R(1) = 0, so both sides vanish
    let (l, r) = rota_baxter_sides(&mono(-1, 0, c(1, 1)), &mono(1, 0, c(1, 1)), ProductMode::Shared, COR).unwrap();
    assert!(l.is_zero() && r.is_zero());
}

#[test]
fn insertion_product_examples() {
    let u = mono(-1, 0, atom("u"));
    let v = mono(-2, 0, atom("v")).add(&mono(0, 0, c(1, 1)));
    assert_eq!(u.insertion_product(&v, &[]), u.tensor_product(&v));

    let id = IdentificationMap { pairs: vec![("z".into(), "v1".into()), ("w".into(), "v1".into())] };
    let p = u.insertion_product(&v, std::slice::from_ref(&id));
    assert_eq!(p.variables().len(), 2);
    let d = CoeffPolynomial::atom(CoeffAtom::delta(2));
    assert_eq!(p, u.tensor_product(&v).scale_poly(&d));

    // nested insertions associate
    let w = mono(0, 1, atom("w"));
    let left = u.insertion_product(&v, std::slice::from_ref(&id)).insertion_product(&w, std::slice::from_ref(&id));
    let right = u.insertion_product(&v.insertion_product(&w, std::slice::from_ref(&id)), std::slice::from_ref(&id));
    assert_eq!(left, right);
}

#[test]
fn finite_limit_examples() {
    let f = mono(0, 0, atom("c")).add(&mono(1, 0, c(3, 1)));
    assert_eq!(f.finite_limit(COR).unwrap(), atom("c"));
    let g = mono(-1, 0, c(1, 1)).add(&mono(0, 0, atom("c")));
    assert_eq!(g.regular_part(COR).finite_limit(COR).unwrap(), atom("c"));
    assert_eq!(mono(-1, 0, c(1, 1)).finite_limit(COR), Err(PfError::SingularTerms(vec!["(-1|0)".into()])));
}

#[test]
fn truncation_is_recorded() {
    let f = mono(3, 0, c(1, 1));
    let p = f.shared_product(&f).unwrap();
    assert!(p.is_zero());
    assert!(p.truncated());
    assert!(p.add(&mono(0, 0, c(1, 1))).truncated());
    assert!(!f.truncated());
    let low = f.clone().with_truncation(2);
    assert!(low.is_zero() && low.truncated());
}

fn arb_coeff() -> impl Strategy<Value = CoeffPolynomial> {
    let atoms = prop::sample::select(vec!["a", "b", "c"]);
    prop::collection::vec((-4i64..=4, 1i64..=3, prop::collection::vec(atoms, 0..3)), 1..3).prop_map(|ms| {
        let mut p = CoeffPolynomial::zero();
        for (n, d, a) in ms {
            p.add_monomial(a.into_iter().map(CoeffAtom::free).collect(), rational(n, d));
        }
        p
    })
}

fn arb_pf(vars: usize) -> impl Strategy<Value = PFElement> {
    let names: Vec<String> = (1..=vars).map(|i| format!("e{i}")).collect();
    prop::collection::vec(
        (prop::collection::vec(-3i64..=3, vars), prop::collection::vec(0u32..=2, vars), arb_coeff()),
        0..6,
    )
    .prop_map(move |ts| {
        PFElement::from_terms(names.clone(), ts.into_iter().map(|(a, b, k)| (PowerIndex::new(a, b), k))).unwrap()
    })
}

/// Large enough that no product of generated elements is truncated.
fn arb_exact(vars: usize) -> impl Strategy<Value = PFElement> {
    arb_pf(vars).prop_map(|f| f.with_truncation(64))
}

fn is_singular(f: &PFElement, conv: DegreeConvention) -> bool {
    f.terms().all(|(i, _)| degree_sign(i, conv) == DegreeSign::Negative)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rota_baxter_shared(f in arb_pf(1), g in arb_pf(1)) {
        prop_assert!(check_rota_baxter(&f, &g, ProductMode::Shared, COR).unwrap());
        prop_assert!(check_rota_baxter(&f, &g, ProductMode::Shared, DegreeConvention::Literal).unwrap());
    }

    #[test]
    fn rota_baxter_tensor(f in arb_pf(1), g in arb_pf(2)) {
        prop_assert!(check_rota_baxter(&f, &g, ProductMode::Tensor, COR).unwrap());
        prop_assert!(check_rota_baxter(&f, &g, ProductMode::Tensor, DegreeConvention::Literal).unwrap());
    }

    #[test]
    fn projector_identities(f in arb_pf(2)) {
        let r = f.singular_part(COR);
        let q = f.regular_part(COR);
        prop_assert_eq!(r.singular_part(COR), r.clone());
        prop_assert_eq!(q.regular_part(COR), q.clone());
        prop_assert_eq!(r.add(&q), f.clone());
        prop_assert!(q.singular_part(COR).is_zero());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn image_and_kernel_are_subalgebras(f in arb_pf(1), g in arb_pf(1)) {
        let (rf, rg) = (f.singular_part(COR), g.singular_part(COR));
        prop_assert!(is_singular(&rf.shared_product(&rg).unwrap(), COR));
        let (qf, qg) = (f.regular_part(COR), g.regular_part(COR));
        prop_assert!(qf.shared_product(&qg).unwrap().singular_part(COR).is_zero());
    }

    #[test]
    fn tensor_is_associative_and_unital(f in arb_exact(1), g in arb_exact(2), h in arb_exact(1)) {
        prop_assert_eq!(f.tensor_product(&g).tensor_product(&h), f.tensor_product(&g.tensor_product(&h)));
        let one = PFElement::unit().with_truncation(64);
        prop_assert_eq!(f.tensor_product(&one), f.clone());
        prop_assert_eq!(one.tensor_product(&f), f.clone());
    }

    #[test]
    fn shared_ring_axioms(f in arb_exact(1), g in arb_exact(1), h in arb_exact(1)) {
        let fg = f.shared_product(&g).unwrap();
        prop_assert_eq!(&fg, &g.shared_product(&f).unwrap());
        prop_assert_eq!(fg.shared_product(&h).unwrap(), f.shared_product(&g.shared_product(&h).unwrap()).unwrap());
        prop_assert_eq!(f.shared_product(&g.add(&h)).unwrap(), fg.add(&f.shared_product(&h).unwrap()));
    }

    /// Dropping terms above N loses at most the outer factor's pole order, here 3.
    #[test]
    fn truncated_products_agree_below_lost_precision(f in arb_pf(1), g in arb_pf(2), h in arb_pf(1)) {
        let m = DEFAULT_TRUNCATION - 3;
        let a = f.tensor_product(&g).tensor_product(&h).with_truncation(m);
        let b = f.tensor_product(&g.tensor_product(&h)).with_truncation(m);
        let exact = f.clone().with_truncation(64).tensor_product(&g).tensor_product(&h).with_truncation(m);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a, &exact);
    }

    #[test]
    fn text_and_json_round_trip(f in arb_pf(2)) {
        prop_assert_eq!(PFElement::from_text(&f.to_text()).unwrap(), f.clone());
        prop_assert_eq!(PFElement::from_json(&f.to_json()).unwrap(), f.clone());
    }

    #[test]
    fn aligned_equality_ignores_variable_order(f in arb_pf(1), g in arb_pf(1)) {
        prop_assert!(f.tensor_product(&g).aligned_eq(&g.tensor_product(&f)));
    }
}
