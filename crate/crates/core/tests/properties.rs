use std::sync::Arc;

use conslaw_core::cochain::Placement;
use conslaw_core::hodge::SlotHodges;
use conslaw_core::io::{read_snapshot_csv, snapshot_csv};
use conslaw_core::{
    build_elastic_hodge, build_hodge, energy, exactness_defects, Cochain, CubicalComplex, FieldSlot, GeneralField,
    LameField, MaterialField, MaterialTag, SlotKind,
};
use proptest::prelude::*;

fn complex_strategy() -> impl Strategy<Value = CubicalComplex> {
    (
        prop::collection::vec(1usize..6, 3),
        prop::collection::vec(0.1f64..2.0, 3),
        prop::collection::vec(any::<bool>(), 3),
    )
        .prop_map(|(e, h, p)| CubicalComplex::with_periodicity(&e, &h, &p).unwrap())
}

fn fill(c: &Arc<CubicalComplex>, degree: usize, fiber: usize, placement: Placement, seed: &[f64]) -> Cochain {
    let mut x = Cochain::zeros(c.clone(), degree, fiber, placement).unwrap();
    let n = seed.len();
    for (i, v) in x.values_mut().iter_mut().enumerate() {
        *v = seed[i % n] + 0.01 * i as f64;
    }
    x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn derivative_squares_to_zero(c in complex_strategy()) {
        for (p, defect) in exactness_defects(&c).unwrap() {
            prop_assert_eq!(defect, 0, "d{}∘d{} has a nonzero entry", p + 1, p);
        }
        for p in 0..2 {
            let dd = c.exterior_derivative(p + 1).unwrap().compose(c.exterior_derivative(p).unwrap());
            prop_assert!(dd.iter().all(|&(_, _, v)| v == 0));
        }
    }

    #[test]
    fn hodge_energy_is_positive_and_quadratic(
        c in complex_strategy(),
        seed in prop::collection::vec(-3.0f64..3.0, 1..20),
        alpha in -4.0f64..4.0,
        eps in 0.2f64..5.0,
    ) {
        let c = Arc::new(c);
        let hodges = SlotHodges::vacuum(c.clone(), Placement::Primal).unwrap()
            .with(FieldSlot::T1, build_hodge(&c, 1, &MaterialField::Constant(eps), MaterialTag::Permittivity).unwrap())
            .unwrap();
        let mut f = GeneralField::zero(c.clone(), 1, Placement::Primal).unwrap();
        for slot in FieldSlot::ALL {
            f.set(slot, fill(&c, slot.degree(), 1, Placement::Primal, &seed)).unwrap();
        }
        let e = energy(&f, &hodges).unwrap();
        if f.norm_l2() > 0.0 {
            prop_assert!(e > 0.0);
        }
        let scaled = energy(&f.scaled(alpha), &hodges).unwrap();
        prop_assert!((scaled - alpha * alpha * e).abs() <= 1e-10 * e.max(1.0) * (1.0 + alpha * alpha));
    }

    #[test]
    fn hodge_is_linear_and_invertible(
        c in complex_strategy(),
        p in 0usize..4,
        a in prop::collection::vec(-3.0f64..3.0, 1..10),
        b in prop::collection::vec(-3.0f64..3.0, 1..10),
        s in -3.0f64..3.0,
    ) {
        let c = Arc::new(c);
        let h = build_hodge(&c, p, &MaterialField::Constant(1.7), MaterialTag::Custom("k".into())).unwrap();
        let (x, y) = (fill(&c, p, 1, Placement::Primal, &a), fill(&c, p, 1, Placement::Primal, &b));
        let lhs = h.apply(&Cochain::linear_combination(1.0, &x, s, &y).unwrap()).unwrap();
        let rhs = Cochain::linear_combination(1.0, &h.apply(&x).unwrap(), s, &h.apply(&y).unwrap()).unwrap();
        let d = Cochain::linear_combination(1.0, &lhs, -1.0, &rhs).unwrap().norm_max();
        prop_assert!(d <= 1e-12 * (1.0 + lhs.norm_max()));
        let back = h.apply_inverse(&h.apply(&x).unwrap()).unwrap();
        prop_assert!(Cochain::linear_combination(1.0, &back, -1.0, &x).unwrap().norm_max() <= 1e-12 * (1.0 + x.norm_max()));
    }

    #[test]
    fn field_arithmetic_round_trips(
        c in complex_strategy(),
        a in prop::collection::vec(-3.0f64..3.0, 1..10),
        b in prop::collection::vec(-3.0f64..3.0, 1..10),
    ) {
        let c = Arc::new(c);
        let mut f = GeneralField::zero(c.clone(), 3, Placement::Dual).unwrap();
        let mut g = GeneralField::zero(c.clone(), 3, Placement::Dual).unwrap();
        for slot in FieldSlot::ALL {
            f.set(slot, fill(&c, slot.degree(), 3, Placement::Dual, &a)).unwrap();
            g.set(slot, fill(&c, slot.degree(), 3, Placement::Dual, &b)).unwrap();
        }
        let back = f.add(&g).unwrap().sub(&g).unwrap();
        prop_assert!(back.sub(&f).unwrap().norm_l2() <= 1e-12 * (1.0 + f.norm_l2()));
    }

    #[test]
    fn elastic_hodge_is_positive_semidefinite(
        n in prop::collection::vec(1usize..4, 3),
        lambda in -0.6f64..5.0,
        mu in 0.1f64..3.0,
        seed in prop::collection::vec(-1.0f64..1.0, 3..30),
    ) {
        let c = Arc::new(CubicalComplex::periodic(&n, &[0.5, 0.7, 1.1]).unwrap());
        prop_assume!(3.0 * lambda + 2.0 * mu > 0.0);
        let k = build_elastic_hodge(&c, &LameField::constant(lambda, mu)).unwrap();
        let x = fill(&c, 1, 3, Placement::Primal, &seed);
        let q = k.pairing(&x, &x).unwrap();
        prop_assert!(q >= -1e-10 * x.norm_l2().powi(2), "{}", q);
    }

    #[test]
    fn rigid_motion_has_no_strain_energy(
        n in prop::collection::vec(2usize..5, 3),
        t in prop::array::uniform3(-2.0f64..2.0),
        w in prop::array::uniform3(-2.0f64..2.0),
    ) {
        let c = Arc::new(CubicalComplex::new(&n, &[0.3, 0.5, 0.4]).unwrap());
        let k = build_elastic_hodge(&c, &LameField::constant(1.3, 0.8)).unwrap();
        // u = t + w × x on vertices; strain = d u
        let u = conslaw_core::project_function(&c, 0, 3, Placement::Primal, |x, _, i| {
            let r = [w[1] * x[2] - w[2] * x[1], w[2] * x[0] - w[0] * x[2], w[0] * x[1] - w[1] * x[0]];
            t[i] + r[i]
        })
        .unwrap();
        let d = c.exterior_derivative(0).unwrap();
        let (nv, ne) = (c.cell_count(0), c.cell_count(1));
        let mut strain = vec![0.0; 3 * ne];
        for i in 0..3 {
            d.apply_into(&u.values()[i * nv..(i + 1) * nv], 1.0, &mut strain[i * ne..(i + 1) * ne]);
        }
        let s = Cochain::from_values(c.clone(), 1, 3, Placement::Primal, strain).unwrap();
        let q = k.pairing(&s, &s).unwrap();
        prop_assert!(q.abs() <= 1e-12 * (1.0 + s.norm_l2().powi(2)), "{}", q);
    }

    #[test]
    fn snapshot_csv_round_trip(c in complex_strategy(), p in 0usize..4, seed in prop::collection::vec(-1e3f64..1e3, 1..8)) {
        let c = Arc::new(c);
        let x = fill(&c, p, 1, Placement::Primal, &seed);
        let back = read_snapshot_csv(&c, &snapshot_csv("x", &x, 0, 0.0)).unwrap();
        prop_assert_eq!(back, x);
    }
}
