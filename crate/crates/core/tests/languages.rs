//! Spaces, specifications and programs checked against plain Rust
//! computations over the same states.

use std::collections::BTreeSet;

use proptest::prelude::*;
use relcorr::{
    parse_prog, parse_space, parse_spec, parse_state_predicate, Space, StateSet, Value,
};

fn int_space(n: i64) -> Space {
    parse_space(&format!("space T {{ s: int 0..{}; }}", n - 1)).unwrap()
}

fn pairs(r: &relcorr::Relation) -> BTreeSet<(usize, usize)> {
    r.pairs().collect()
}

fn subset(sp: &Space, mask: u64) -> StateSet {
    StateSet::from_fn(sp, |i| mask >> (i % 64) & 1 == 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn indices_are_row_major(
        bounds in proptest::collection::vec((-3i64..3, 0i64..4), 1..4),
    ) {
        let decls: Vec<String> = bounds
            .iter()
            .enumerate()
            .map(|(k, (lo, w))| format!("v{k}: int {lo}..{};", lo + w))
            .collect();
        let sp = parse_space(&format!("space M {{ {} }}", decls.join(" "))).unwrap();
        let radix: Vec<usize> = bounds.iter().map(|(_, w)| *w as usize + 1).collect();
        prop_assert_eq!(sp.len(), radix.iter().product::<usize>());
        for i in 0..sp.len() {
            let st = sp.state_at(i as u64).unwrap();
            prop_assert_eq!(sp.index(&st).unwrap(), i as u64);
            let mut rest = i;
            for v in (0..radix.len()).rev() {
                let want = bounds[v].0 + (rest % radix[v]) as i64;
                rest /= radix[v];
                prop_assert_eq!(st.get(v), &Value::Int(want));
            }
        }
    }

    #[test]
    fn state_sets_form_a_boolean_algebra(a in any::<u64>(), b in any::<u64>(), n in 1i64..40) {
        let sp = int_space(n);
        let (x, y) = (subset(&sp, a), subset(&sp, b));
        let u = x.union(&y).unwrap();
        let i = x.intersection(&y).unwrap();
        prop_assert_eq!(u.complement(), x.complement().intersection(&y.complement()).unwrap());
        prop_assert_eq!(i.complement(), x.complement().union(&y.complement()).unwrap());
        prop_assert_eq!(x.difference(&y).unwrap(), x.intersection(&y.complement()).unwrap());
        prop_assert_eq!(x.is_subset(&y).unwrap(), u == y);
        prop_assert!(x.union(&x.complement()).unwrap() == StateSet::full(&sp));
        prop_assert!(x.intersection(&x.complement()).unwrap().is_empty());
        prop_assert_eq!(u.len() + i.len(), x.len() + y.len());
    }

    #[test]
    fn affine_specs_and_programs(a in 0i64..5, b in 0i64..9, m in 1i64..12, n in 1i64..14) {
        let sp = int_space(n);
        let f = |s: i64| (a * s + b) % m;
        let want: BTreeSet<(usize, usize)> = (0..n)
            .filter(|&s| f(s) < n)
            .map(|s| (s as usize, f(s) as usize))
            .collect();

        let spec = parse_spec(&format!("spec A on T := s' == (s * {a} + {b}) % {m};"), &sp).unwrap();
        prop_assert_eq!(pairs(&spec.as_relation()), want.clone());
        let again = parse_spec(&spec.to_string(), &sp).unwrap();
        prop_assert_eq!(again.predicate(), spec.predicate());
        let lazy = spec.as_relation();
        prop_assert!(lazy.materialize().unwrap().equals(&lazy).unwrap());

        let prog = parse_prog(&format!("prog p on T {{ s = (s * {a} + {b}) % {m}; }}"), &sp).unwrap();
        let ex = prog.extract_function(1000).unwrap();
        prop_assert_eq!(pairs(&ex.relation), want);
        prop_assert_eq!(ex.runtime_error_paths, (0..n).filter(|&s| f(s) >= n).count() as u64);
        let again = parse_prog(&prog.to_string(), &sp).unwrap();
        prop_assert!(again.extract_function(1000).unwrap().relation.equals(&ex.relation).unwrap());
    }

    #[test]
    fn loops_and_choice(k in 0i64..16, d in 1i64..4, c1 in 0i64..16, c2 in 0i64..16) {
        let sp = int_space(16);
        let prog = parse_prog(&format!("prog w on T {{ while (s < {k}) {{ s = s + {d}; }} }}"), &sp).unwrap();
        let want: BTreeSet<(usize, usize)> = (0..16)
            .filter_map(|s| {
                let mut t = s;
                while t < k {
                    t += d;
                }
                (t < 16).then_some((s as usize, t as usize))
            })
            .collect();
        prop_assert_eq!(pairs(&prog.extract_function(1000).unwrap().relation), want);

        let choice = parse_prog(
            &format!("prog e on T {{ either {{ s = {c1}; }} or {{ s = {c2}; }} }}"),
            &sp,
        )
        .unwrap();
        prop_assert!(choice.has_choice());
        let rel = choice.extract_function(1000).unwrap().relation;
        for s in 0..16 {
            let img: BTreeSet<u32> = rel.image(s).iter().copied().collect();
            prop_assert_eq!(img, BTreeSet::from([c1 as u32, c2 as u32]));
        }
    }

    #[test]
    fn quantifiers_agree_with_count(lo in -3i64..6, hi in -3i64..9, m in 1i64..5, r in 0i64..5) {
        let sp = int_space(8);
        let body = format!("(s + k) % {m} == {r}");
        let q = |kind: &str| {
            parse_state_predicate(&format!("{kind}(k in {lo}..{hi} : {body})"), &sp).unwrap()
        };
        let count = |c: i64| {
            parse_state_predicate(&format!("count(k in {lo}..{hi} : {body}) == {c}"), &sp).unwrap()
        };
        let width = (hi - lo + 1).max(0);
        let (all, any) = (q("forall"), q("exists"));
        for s in 0..8usize {
            let n = (lo..=hi).filter(|k| (s as i64 + k) % m == r).count() as i64;
            prop_assert!(count(n).holds(s));
            prop_assert_eq!(all.holds(s), n == width);
            prop_assert_eq!(any.holds(s), n >= 1);
        }
    }
}

fn words(alphabet: &[char], maxlen: usize) -> Vec<Vec<char>> {
    let mut out = vec![vec![]];
    let mut layer = vec![vec![]];
    for _ in 0..maxlen {
        layer = layer
            .iter()
            .flat_map(|w: &Vec<char>| {
                alphabet.iter().map(move |&c| {
                    let mut v = w.clone();
                    v.push(c);
                    v
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

#[test]
fn sequences_are_ordered_by_length_then_lexicographically() {
    let sp = parse_space(r#"space Q { q: seq over "ba" maxlen 3; }"#).unwrap();
    let all = words(&['b', 'a'], 3);
    assert_eq!(sp.len(), all.len());
    for (i, w) in all.iter().enumerate() {
        assert_eq!(sp.state_at(i as u64).unwrap().get(0), &Value::Seq(w.clone()));
    }
}

#[test]
fn quantifiers_over_sequences() {
    let sp = parse_space(r#"space Q { q: seq over "ab" maxlen 3; }"#).unwrap();
    let all = words(&['a', 'b'], 3);
    let cases: [(&str, fn(&[char]) -> bool); 5] = [
        ("forall(k in 0..len(q)-1 : q[k] == 'a')", |w| w.iter().all(|&c| c == 'a')),
        ("exists(k in 0..len(q)-1 : q[k] == 'b')", |w| w.contains(&'b')),
        ("count(k in 0..len(q)-1 : q[k] == 'a') == 2", |w| {
            w.iter().filter(|&&c| c == 'a').count() == 2
        }),
        ("forall(k in 0..len(q)-2 : q[k] != q[k+1])", |w| w.windows(2).all(|p| p[0] != p[1])),
        ("exists(k in 5..9 : q[k] == 'a') || len(q) == 0", |w| w.is_empty()),
    ];
    for (text, oracle) in cases {
        let p = parse_state_predicate(text, &sp).unwrap();
        for (i, w) in all.iter().enumerate() {
            assert_eq!(p.holds(i), oracle(w), "{text} on {w:?}");
        }
    }
}
