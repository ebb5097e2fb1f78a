//! Randomized invariants over the core types.

use proptest::prelude::*;

use expand_embed::constructor::{schedule_from_f64, BoxFamily};
use expand_embed::index_tree::{Code, DistanceModel, Relation};
use expand_embed::modulus::ModulusSpec;
use expand_embed::rational::{rat_from_str, rat_to_string};
use expand_embed::verifier::{verify_embedding, Mode};

proptest! {
    /// omega and its bisection inverse are mutually inverse on the range.
    #[test]
    fn modulus_invert_round_trip(
        p in 1.0f64..3.0,
        y in 1e-6f64..0.5,
    ) {
        let spec = ModulusSpec::power(p, 2);
        let r = spec.invert(y).unwrap();
        let back = spec.eval(r).unwrap();
        prop_assert!((back - y).abs() <= 1e-9 * y.max(1e-12));
    }

    /// Same round trip for the logarithmically corrected family, kept to
    /// the monotone part of its domain.
    #[test]
    fn powerlog_invert_round_trip(
        a in 0.5f64..3.0,
        y in 1e-6f64..0.05,
    ) {
        let spec = ModulusSpec::power_log(2.0, a, 2);
        let r = spec.invert(y).unwrap();
        let back = spec.eval(r).unwrap();
        prop_assert!((back - y).abs() <= 1e-8 * y.max(1e-12));
    }

    /// Codes survive the string round trip and order like (depth, bits).
    #[test]
    fn code_string_round_trip(bits in 0u64..1024, depth in 0usize..10) {
        let bits = bits & ((1u64 << depth) - (depth > 0) as u64);
        if let Ok(code) = Code::from_value(bits, depth) {
            let s = code.to_string();
            let back: Code = s.parse().unwrap();
            prop_assert_eq!(code, back);
            prop_assert_eq!(s.len(), depth);
        }
    }

    /// relate() is symmetric up to swapping ancestor/descendant.
    #[test]
    fn relation_symmetry(a in 0u64..256, b in 0u64..256, da in 1usize..9, db in 1usize..9) {
        let a = Code::from_value(a & ((1 << da) - 1), da).unwrap();
        let b = Code::from_value(b & ((1 << db) - 1), db).unwrap();
        let ab = a.relate(&b);
        let ba = b.relate(&a);
        match (ab, ba) {
            (Relation::Equal, Relation::Equal) => {}
            (Relation::Ancestor, Relation::Descendant) => {}
            (Relation::Descendant, Relation::Ancestor) => {}
            (Relation::Disjoint { k: k1 }, Relation::Disjoint { k: k2 }) => {
                prop_assert_eq!(k1, k2)
            }
            other => prop_assert!(false, "asymmetric relation {:?}", other),
        }
    }

    /// Rational string form "p/q" round-trips exactly.
    #[test]
    fn rational_string_round_trip(p in -100_000i64..100_000, q in 1i64..100_000) {
        let r = expand_embed::Rat::new(p.into(), q.into());
        let back = rat_from_str(&rat_to_string(&r)).unwrap();
        prop_assert_eq!(r, back);
    }

    /// Structural soundness: whenever structural mode passes on a random
    /// geometric gap family, exhaustive mode passes too.
    #[test]
    fn structural_implies_exhaustive(base in 0.1f64..0.45, depth in 2usize..6) {
        let r: Vec<f64> = (1..=depth as i32).map(|i| base.powi(i)).collect();
        let schedule = schedule_from_f64(&r, 2, depth).unwrap();
        let family = BoxFamily::build(schedule, depth).unwrap();
        let model = DistanceModel::cantor(r).unwrap();
        let st = verify_embedding(&family, &model, depth, Mode::Structural).unwrap();
        if st.violations.is_empty() {
            let ex = verify_embedding(&family, &model, depth, Mode::Exhaustive).unwrap();
            prop_assert!(ex.violations.is_empty());
        }
    }
}
