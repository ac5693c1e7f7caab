//! Refinement, competence domains, relative correctness and projection
//! against direct set computations.

use std::collections::BTreeSet;

use proptest::prelude::*;
use relcorr::correctness::relation_from_mask;
use relcorr::{
    competence_domain, hasse, is_correct, more_correct, more_correct_det, parse_space, projection,
    refines, NamedRelation, Relation, Space,
};

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

fn dom(a: &Pairs) -> BTreeSet<usize> {
    a.iter().map(|p| p.0).collect()
}

fn image(a: &Pairs, s: usize) -> BTreeSet<usize> {
    a.iter().filter(|p| p.0 == s).map(|p| p.1).collect()
}

/// `R′ ⊒ R`: `dom R ⊆ dom R′` and `R′` stays within `R` on `dom R`.
fn refines_model(r2: &Pairs, r1: &Pairs) -> bool {
    let d1 = dom(r1);
    d1.is_subset(&dom(r2)) && r2.iter().all(|p| !d1.contains(&p.0) || r1.contains(p))
}

fn cd_model(p: &Pairs, r: &Pairs) -> BTreeSet<usize> {
    dom(&(p & r))
}

fn more_correct_model(p2: &Pairs, p1: &Pairs, r: &Pairs) -> bool {
    let (cd2, cd1) = (cd_model(p2, r), cd_model(p1, r));
    cd1.is_subset(&cd2)
        && cd1
            .iter()
            .all(|&s| image(p2, s).iter().all(|&t| r.contains(&(s, t)) || p1.contains(&(s, t))))
}

fn projection_model(r: &Pairs, p: &Pairs) -> Pairs {
    let cd = cd_model(p, r);
    (r | p).into_iter().filter(|q| cd.contains(&q.0)).collect()
}

fn set(r: &Relation) -> Pairs {
    r.pairs().collect()
}

/// A partial function packed the way `relation_from_mask` expects.
fn function_mask(n: usize, choice: &[usize]) -> u64 {
    let mut m = 0;
    for (s, &c) in choice.iter().enumerate().take(n) {
        if c % (n + 1) > 0 {
            m |= 1 << (s * n + c % (n + 1) - 1);
        }
    }
    m
}

fn triple() -> impl Strategy<Value = (usize, u64, u64, u64)> {
    (1usize..=4).prop_flat_map(|n| {
        let m = (1u64 << (n * n)) - 1;
        (Just(n), 0..=m, 0..=m, 0..=m)
    })
}

fn functions() -> impl Strategy<Value = (usize, u64, u64, u64, u64)> {
    (1usize..=4).prop_flat_map(|n| {
        let m = (1u64 << (n * n)) - 1;
        let f = proptest::collection::vec(0..=n, n);
        (Just(n), 0..=m, f.clone(), f.clone(), f)
            .prop_map(move |(n, r, a, b, c)| {
                (n, r, function_mask(n, &a), function_mask(n, &b), function_mask(n, &c))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn definitions_match_the_model((n, r, p1, p2) in triple()) {
        let sp = space(n);
        let (mr, m1, m2) = (model(n, r), model(n, p1), model(n, p2));
        let (rr, r1, r2) = (
            relation_from_mask(&sp, r),
            relation_from_mask(&sp, p1),
            relation_from_mask(&sp, p2),
        );
        prop_assert_eq!(refines(&r2, &r1).unwrap(), refines_model(&m2, &m1));
        prop_assert_eq!(is_correct(&r1, &rr).unwrap(), refines_model(&m1, &mr));
        let cd: BTreeSet<usize> = competence_domain(&r1, &rr).unwrap().iter().collect();
        prop_assert_eq!(cd, cd_model(&m1, &mr));
        prop_assert_eq!(more_correct(&r2, &r1, &rr).unwrap(), more_correct_model(&m2, &m1, &mr));
        prop_assert_eq!(set(&projection(&rr, &r1).unwrap()), projection_model(&mr, &m1));
    }

    #[test]
    fn projection_laws((n, r, p, _) in triple()) {
        let sp = space(n);
        let (rr, rp) = (relation_from_mask(&sp, r), relation_from_mask(&sp, p));
        let proj = projection(&rr, &rp).unwrap();
        prop_assert!(projection(&rr, &proj).unwrap().equals(&proj).unwrap());
        prop_assert!(refines(&rp, &proj).unwrap());
        prop_assert!(refines(&rr, &proj).unwrap());
        prop_assert_eq!(is_correct(&rp, &rr).unwrap(), proj.equals(&rr).unwrap());
        // Projection keeps the competence domain.
        prop_assert_eq!(
            competence_domain(&proj, &rr).unwrap(),
            competence_domain(&rp, &rr).unwrap()
        );
    }

    #[test]
    fn deterministic_laws((n, r, a, b, c) in functions()) {
        let sp = space(n);
        let rr = relation_from_mask(&sp, r);
        let (pa, pb, pc) = (
            relation_from_mask(&sp, a),
            relation_from_mask(&sp, b),
            relation_from_mask(&sp, c),
        );
        let det = more_correct_det(&pb, &pa, &rr).unwrap();
        prop_assert_eq!(det, more_correct(&pb, &pa, &rr).unwrap());
        let via = refines(&projection(&rr, &pb).unwrap(), &projection(&rr, &pa).unwrap()).unwrap();
        prop_assert_eq!(det, via);
        if refines(&pb, &pa).unwrap() {
            prop_assert!(det);
        }
        prop_assert!(more_correct_det(&pa, &pa, &rr).unwrap());
        if det && more_correct_det(&pc, &pb, &rr).unwrap() {
            prop_assert!(more_correct_det(&pc, &pa, &rr).unwrap());
        }
    }

    #[test]
    fn hasse_is_a_reduced_strict_order((n, r, a, b, c) in functions(), d in any::<u64>()) {
        let sp = space(n);
        let rr = relation_from_mask(&sp, r);
        let choice: Vec<usize> = (0..n).map(|k| (d >> (8 * k)) as usize % 5).collect();
        let progs: Vec<NamedRelation> = [a, b, c, function_mask(n, &choice)]
            .iter()
            .enumerate()
            .map(|(i, &m)| NamedRelation::new(format!("p{i}"), relation_from_mask(&sp, m)))
            .collect();
        let h = hasse(&rr, &progs).unwrap();
        let cd = |node: usize| {
            let name = &h.nodes[node].names[0];
            let p = progs.iter().find(|p| &p.name == name).unwrap();
            competence_domain(&p.relation, &rr).unwrap()
        };
        for &(lo, hi) in &h.edges {
            prop_assert!(cd(lo).is_strict_subset(&cd(hi)).unwrap());
            // No edge is implied by a longer path.
            for mid in 0..h.nodes.len() {
                prop_assert!(!(h.edges.contains(&(lo, mid)) && h.edges.contains(&(mid, hi))));
            }
        }
        for (i, node) in h.nodes.iter().enumerate() {
            for w in node.names.windows(2) {
                prop_assert!(w[0] < w[1]);
            }
            prop_assert_eq!(node.competence_domain_size, cd(i).len());
        }
    }
}
