//! Relation operations against a pair-set model, on explicit and lazy
//! representations alike.

use std::collections::BTreeSet;

use proptest::prelude::*;
use relcorr::correctness::relation_from_mask;
use relcorr::{parse_space, Relation, Space};

type Pairs = BTreeSet<(usize, usize)>;

fn space(n: usize) -> Space {
    parse_space(&format!("space S {{ s: int 0..{}; }}", n - 1)).unwrap()
}

fn model(n: usize, mask: u64) -> Pairs {
    (0..n)
        .flat_map(|s| (0..n).map(move |t| (s, t)))
        .filter(|(s, t)| mask >> (s * n + t) & 1 == 1)
        .collect()
}

fn pairs(r: &Relation) -> Pairs {
    r.pairs().collect()
}

fn lazy(sp: &Space, mask: u64) -> Relation {
    let n = sp.len();
    Relation::from_fn(sp, move |s, t| mask >> (s * n + t) & 1 == 1)
}

fn all(n: usize) -> Pairs {
    model(n, u64::MAX)
}

fn compose(n: usize, a: &Pairs, b: &Pairs) -> Pairs {
    let mut out = Pairs::new();
    for s in 0..n {
        for u in 0..n {
            for t in 0..n {
                if a.contains(&(s, u)) && b.contains(&(u, t)) {
                    out.insert((s, t));
                }
            }
        }
    }
    out
}

fn dom(a: &Pairs) -> BTreeSet<usize> {
    a.iter().map(|p| p.0).collect()
}

fn case() -> impl Strategy<Value = (usize, u64, u64, u64)> {
    (1usize..=4).prop_flat_map(|n| {
        let m = if n * n == 64 { u64::MAX } else { (1u64 << (n * n)) - 1 };
        (Just(n), 0..=m, 0..=m, 0..=m)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn boolean_operations_match_the_model((n, a, b, _) in case()) {
        let sp = space(n);
        let (ma, mb) = (model(n, a), model(n, b));
        for (ra, rb) in [
            (relation_from_mask(&sp, a), relation_from_mask(&sp, b)),
            (lazy(&sp, a), lazy(&sp, b)),
            (relation_from_mask(&sp, a), lazy(&sp, b)),
        ] {
            prop_assert_eq!(pairs(&ra.union(&rb).unwrap()), &ma | &mb);
            prop_assert_eq!(pairs(&ra.intersection(&rb).unwrap()), &ma & &mb);
            prop_assert_eq!(pairs(&ra.difference(&rb).unwrap()), &ma - &mb);
            prop_assert_eq!(pairs(&ra.complement()), &all(n) - &ma);
            prop_assert_eq!(ra.is_subset(&rb).unwrap(), ma.is_subset(&mb));
            prop_assert_eq!(ra.equals(&rb).unwrap(), ma == mb);
        }
    }

    #[test]
    fn converse_composition_and_domain((n, a, b, c) in case()) {
        let sp = space(n);
        let (ma, mb, mc) = (model(n, a), model(n, b), model(n, c));
        let (ra, rb, rc) = (relation_from_mask(&sp, a), lazy(&sp, b), relation_from_mask(&sp, c));

        let conv: Pairs = ma.iter().map(|&(s, t)| (t, s)).collect();
        prop_assert_eq!(pairs(&ra.converse()), conv.clone());
        prop_assert_eq!(pairs(&lazy(&sp, a).converse()), conv);

        let ab = ra.compose(&rb).unwrap();
        prop_assert_eq!(pairs(&ab), compose(n, &ma, &mb));
        let left = ab.compose(&rc).unwrap();
        let right = ra.compose(&rb.compose(&rc).unwrap()).unwrap();
        prop_assert!(left.equals(&right).unwrap());
        prop_assert_eq!(pairs(&left), compose(n, &compose(n, &ma, &mb), &mc));

        let id = Relation::identity(&sp);
        prop_assert!(ra.compose(&id).unwrap().equals(&ra).unwrap());
        prop_assert!(id.compose(&ra).unwrap().equals(&ra).unwrap());
        prop_assert!(ab.converse().equals(&rb.converse().compose(&ra.converse()).unwrap()).unwrap());

        let d: BTreeSet<usize> = ra.dom().iter().collect();
        prop_assert_eq!(&d, &dom(&ma));
        let rl = ra.compose(&Relation::universal(&sp)).unwrap();
        prop_assert!(ra.dom_vector().equals(&rl).unwrap());
        for s in 0..n {
            prop_assert_eq!(ra.has_image(s), d.contains(&s));
            prop_assert_eq!(lazy(&sp, a).has_image(s), d.contains(&s));
        }
    }

    #[test]
    fn lazy_and_explicit_agree((n, a, b, _) in case()) {
        let sp = space(n);
        let mixed = lazy(&sp, a)
            .union(&relation_from_mask(&sp, b))
            .unwrap()
            .intersection(&lazy(&sp, b).complement())
            .unwrap();
        let want = &model(n, a) - &model(n, b);
        prop_assert_eq!(pairs(&mixed), want.clone());
        let m = mixed.materialize().unwrap();
        prop_assert!(m.is_explicit());
        prop_assert_eq!(pairs(&m), want);
        prop_assert_eq!(m.pair_count(), mixed.pair_count());
    }

    #[test]
    fn properties_match_definitions((n, a, _, _) in case()) {
        let sp = space(n);
        let m = model(n, a);
        let r = relation_from_mask(&sp, a);
        let has = |s: usize, t: usize| m.contains(&(s, t));
        let states = 0..n;
        prop_assert_eq!(r.is_reflexive().unwrap(), states.clone().all(|s| has(s, s)));
        prop_assert_eq!(r.is_symmetric().unwrap(), m.iter().all(|&(s, t)| has(t, s)));
        prop_assert_eq!(
            r.is_antisymmetric().unwrap(),
            m.iter().all(|&(s, t)| s == t || !has(t, s))
        );
        prop_assert_eq!(r.is_asymmetric().unwrap(), m.iter().all(|&(s, t)| !has(t, s)));
        prop_assert_eq!(
            r.is_transitive().unwrap(),
            compose(n, &m, &m).is_subset(&m)
        );
        prop_assert_eq!(r.is_total().unwrap(), dom(&m).len() == n);
        prop_assert_eq!(
            r.is_deterministic().unwrap(),
            states.clone().all(|s| m.iter().filter(|p| p.0 == s).count() <= 1)
        );
        let vector = states.clone().all(|s| {
            let row = m.iter().filter(|p| p.0 == s).count();
            row == 0 || row == n
        });
        prop_assert_eq!(r.is_vector().unwrap(), vector);
    }
}
