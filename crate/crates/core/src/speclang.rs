//! Specifications: pair predicates over `(s, s′)` turned into lazy relations.
//!
//! ```text
//! spec R on Cube := s*s <= s' && s' <= s*s*s;
//! domain := s <= 11;
//! ```
//!
//! Evaluation never fails loudly. Overflow, division by zero and
//! out-of-bounds indexing make the pair fall outside the relation and bump a
//! per-spec tally ([`SpecDef::eval_errors`]).
//!
//! A predicate only reads some variables. Rows that agree on the unprimed
//! variables it reads have the same image, and primed variables it never
//! reads are unconstrained; witness search and image enumeration exploit
//! both, which is what makes the two-million-state Fermat space tractable.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::relalg::{PairPredicate, Relation};
use crate::rng;
use crate::space::{Space, State, StateSet};
use crate::syntax::{EvalError, Evaluator, Expr, PairEnv, ParseError, ParseErrorKind, Parser, Scope};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpecError {
    #[error("spec `{0}` has no domain claim")]
    NoDomainClaim(String),
    #[error("budget must be positive")]
    ZeroBudget,
}

struct SpecInner {
    name: String,
    space: Space,
    pred: Expr,
    domain: Option<Expr>,
    /// Unprimed variables read by the predicate.
    pre_vars: Vec<usize>,
    /// Primed variables read by the predicate.
    post_vars: Vec<usize>,
    errors: AtomicU64,
}

/// A parsed specification. Cheap to clone; clones share the error tally.
#[derive(Clone)]
pub struct SpecDef(Arc<SpecInner>);

impl fmt::Debug for SpecDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpecDef")
            .field("name", &self.0.name)
            .field("space", &self.0.space.name())
            .field("pred", &self.0.pred.to_string())
            .finish()
    }
}

impl fmt::Display for SpecDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "spec {} on {} := {};", self.0.name, self.0.space.name(), self.0.pred)?;
        if let Some(d) = &self.0.domain {
            write!(f, "\ndomain := {d};")?;
        }
        Ok(())
    }
}

/// Outcome of checking a domain claim against witness search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DomainVerdict {
    /// Every row class was checked and agreed.
    Verified { rows: u64 },
    /// Claim and witness search disagree on these (representative) states.
    Refuted { witnesses: Vec<ClaimMismatch> },
    /// The budget only allowed checking `rows` sampled row classes; all agreed.
    SampledOk { rows: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClaimMismatch {
    pub state: State,
    /// What the claim said; witness search found the opposite.
    pub claimed: bool,
}

/// Parse `spec NAME on SPACE := pred; [domain := pred;]` against `space`.
pub fn parse_spec(text: &str, space: &Space) -> Result<SpecDef, ParseError> {
    let mut p = Parser::new(text)?;
    let spec = p.spec_decl(|name| (name == space.name()).then(|| space.clone()))?;
    p.expect_end()?;
    Ok(spec)
}

impl Parser {
    pub(crate) fn spec_decl(
        &mut self,
        lookup: impl Fn(&str) -> Option<Space>,
    ) -> Result<SpecDef, ParseError> {
        self.expect_kw("spec")?;
        let name = self.ident()?;
        self.expect_kw("on")?;
        let pos = self.pos();
        let space_name = self.ident()?;
        let space = lookup(&space_name).ok_or(ParseError {
            pos,
            kind: ParseErrorKind::UnknownSpace(space_name),
        })?;
        self.expect_sym(":=")?;
        let mut scope = Scope::new(&space);
        scope.allow_primed = true;
        let pred = self.pred(&mut scope)?;
        self.expect_sym(";")?;
        let domain = if self.eat_kw("domain") {
            self.expect_sym(":=")?;
            let mut scope = Scope::new(&space);
            let d = self.pred(&mut scope)?;
            self.expect_sym(";")?;
            Some(d)
        } else {
            None
        };
        Ok(SpecDef::new(name, space, pred, domain))
    }
}

impl SpecDef {
    pub(crate) fn new(name: String, space: Space, pred: Expr, domain: Option<Expr>) -> Self {
        let vars = pred.state_vars();
        let pre_vars = vars.iter().filter(|v| !v.1).map(|v| v.0).collect();
        let post_vars = vars.iter().filter(|v| v.1).map(|v| v.0).collect();
        SpecDef(Arc::new(SpecInner {
            name,
            space,
            pred,
            domain,
            pre_vars,
            post_vars,
            errors: AtomicU64::new(0),
        }))
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    pub fn space(&self) -> &Space {
        &self.0.space
    }

    pub fn predicate(&self) -> &Expr {
        &self.0.pred
    }

    pub fn domain_claim(&self) -> Option<&Expr> {
        self.0.domain.as_ref()
    }

    /// Names of the variables the predicate reads; primed ones end in `'`.
    pub fn free_variables(&self) -> BTreeSet<String> {
        let vars = self.0.space.vars();
        self.0
            .pred
            .state_vars()
            .into_iter()
            .map(|(i, primed)| format!("{}{}", vars[i].name, if primed { "'" } else { "" }))
            .collect()
    }

    /// Evaluation failures folded to `false` so far.
    pub fn eval_errors(&self) -> u64 {
        self.0.errors.load(Ordering::Relaxed)
    }

    pub fn eval_pred(&self, s: &State, s2: &State) -> bool {
        let pre = self.0.space.index(s).expect("state outside spec space") as usize;
        let post = self.0.space.index(s2).expect("state outside spec space") as usize;
        self.0.holds(pre, post)
    }

    /// Truth of the domain claim at `s`; `None` without a claim.
    pub fn eval_claim(&self, s: &State) -> Option<bool> {
        let idx = self.0.space.index(s).expect("state outside spec space") as usize;
        self.0.claim(idx)
    }

    /// The specification as a lazy relation.
    pub fn as_relation(&self) -> Relation {
        Relation::from_predicate(&self.0.space, Box::new(SpecPredicate(self.0.clone())))
    }

    /// Compare the domain claim against per-row witness search.
    ///
    /// Rows are grouped by the unprimed variables either predicate reads; one
    /// representative per group is checked. Checking is exhaustive when
    /// `groups × witness-search size ≤ budget`, and otherwise covers a
    /// uniformly sampled subset of groups that fits the budget.
    pub fn check_domain_claim(&self, budget: u64) -> Result<DomainVerdict, SpecError> {
        if budget == 0 {
            return Err(SpecError::ZeroBudget);
        }
        let claim_vars = match &self.0.domain {
            Some(d) => d.state_vars(),
            None => return Err(SpecError::NoDomainClaim(self.0.name.clone())),
        };
        let sp = &self.0.space;
        let mut class_vars: Vec<usize> = self.0.pre_vars.clone();
        class_vars.extend(claim_vars.iter().map(|v| v.0));
        class_vars.sort_unstable();
        class_vars.dedup();
        let classes: u128 = class_vars.iter().map(|&v| sp.radix(v) as u128).product();
        let cost: u128 = self.0.post_vars.iter().map(|&v| sp.radix(v) as u128).product();

        let representative = |mut k: u128| {
            let mut idx = 0usize;
            for &v in class_vars.iter().rev() {
                let r = sp.radix(v) as u128;
                idx = sp.with_ordinal(idx, v, (k % r) as u64);
                k /= r;
            }
            idx
        };
        let check = |k: u128| -> Option<ClaimMismatch> {
            let idx = representative(k);
            let claimed = self.0.claim(idx).expect("claim present");
            let actual = self.0.witness(idx);
            (claimed != actual).then(|| ClaimMismatch {
                state: sp.state_at(idx as u64).expect("in range"),
                claimed,
            })
        };

        let (rows, mut witnesses): (u64, Vec<ClaimMismatch>) = if classes * cost <= budget as u128 {
            (classes as u64, (0..classes).filter_map(check).collect())
        } else {
            let n = (budget as u128 / cost).clamp(1, classes) as u64;
            let mut rng = rng::stream(0x5eed);
            let mut picked: Vec<u128> = (0..n).map(|_| rng.random_range(0..classes)).collect();
            picked.sort_unstable();
            picked.dedup();
            (n, picked.into_iter().filter_map(check).collect())
        };
        if !witnesses.is_empty() {
            witnesses.sort_by_key(|w| sp.index(&w.state).unwrap_or(u64::MAX));
            return Ok(DomainVerdict::Refuted { witnesses });
        }
        if rows as u128 == classes {
            Ok(DomainVerdict::Verified { rows })
        } else {
            Ok(DomainVerdict::SampledOk { rows })
        }
    }

    /// dom(R). Uses the domain claim when it verifies exhaustively within
    /// `budget`, and per-row witness search otherwise.
    pub fn domain(&self, budget: u64) -> StateSet {
        if let Ok(DomainVerdict::Verified { .. }) = self.check_domain_claim(budget) {
            return StateSet::from_fn(&self.0.space, |i| self.0.claim(i) == Some(true));
        }
        self.as_relation().dom()
    }
}

impl SpecInner {
    fn tally<T: Default>(&self, r: Result<T, EvalError>) -> T {
        r.unwrap_or_else(|_| {
            self.errors.fetch_add(1, Ordering::Relaxed);
            T::default()
        })
    }

    #[inline]
    fn holds(&self, pre: usize, post: usize) -> bool {
        let env = PairEnv {
            space: &self.space,
            pre,
            post,
        };
        let r = Evaluator::new(&env, self.space.symbols()).bool(&self.pred);
        self.tally(r)
    }

    fn claim(&self, idx: usize) -> Option<bool> {
        let d = self.domain.as_ref()?;
        let env = PairEnv {
            space: &self.space,
            pre: idx,
            post: idx,
        };
        let r = Evaluator::new(&env, self.space.symbols()).bool(d);
        Some(self.tally(r))
    }

    /// Calls `f` with each state that varies only the primed variables the
    /// predicate reads (the rest at ordinal 0); stops when `f` returns true.
    fn scan_post(&self, mut f: impl FnMut(usize) -> bool) {
        let sp = &self.space;
        let vars = &self.post_vars;
        let mut ords = vec![0u64; vars.len()];
        let mut idx = 0usize;
        loop {
            if f(idx) {
                return;
            }
            // Odometer increment over the read primed variables.
            let mut k = vars.len();
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                let v = vars[k];
                ords[k] += 1;
                if ords[k] < sp.radix(v) {
                    idx = sp.with_ordinal(idx, v, ords[k]);
                    break;
                }
                ords[k] = 0;
                idx = sp.with_ordinal(idx, v, 0);
            }
        }
    }

    fn witness(&self, pre: usize) -> bool {
        let mut found = false;
        self.scan_post(|post| {
            found = self.holds(pre, post);
            found
        });
        found
    }

    fn image(&self, pre: usize) -> Vec<u32> {
        let sp = &self.space;
        let mut hits = Vec::new();
        self.scan_post(|post| {
            if self.holds(pre, post) {
                hits.push(post);
            }
            false
        });
        // Expand over the primed variables the predicate never reads.
        let free: Vec<usize> = (0..sp.vars().len())
            .filter(|v| !self.post_vars.contains(v))
            .collect();
        for &v in &free {
            let radix = sp.radix(v);
            hits = hits
                .into_iter()
                .flat_map(|i| (0..radix).map(move |o| (i, o)))
                .map(|(i, o)| sp.with_ordinal(i, v, o))
                .collect();
        }
        let mut out: Vec<u32> = hits.into_iter().map(|i| i as u32).collect();
        out.sort_unstable();
        out
    }
}

struct SpecPredicate(Arc<SpecInner>);

impl PairPredicate for SpecPredicate {
    fn holds(&self, from: usize, to: usize) -> bool {
        self.0.holds(from, to)
    }

    fn row_key(&self, from: usize) -> usize {
        let sp = &self.0.space;
        self.0
            .pre_vars
            .iter()
            .fold(0usize, |k, &v| k * sp.radix(v) as usize + sp.ordinal(from, v) as usize)
    }

    fn image(&self, from: usize, _space: &Space) -> Vec<u32> {
        self.0.image(from)
    }

    fn has_image(&self, from: usize, _space: &Space) -> bool {
        self.0.witness(from)
    }
}

/// A predicate over single states, such as an expected competence domain.
/// Evaluation failures count as `false`.
#[derive(Debug, Clone)]
pub struct StatePredicate {
    space: Space,
    expr: Expr,
}

pub fn parse_state_predicate(text: &str, space: &Space) -> Result<StatePredicate, ParseError> {
    let mut p = Parser::new(text)?;
    let expr = p.pred(&mut Scope::new(space))?;
    p.expect_end()?;
    Ok(StatePredicate {
        space: space.clone(),
        expr,
    })
}

impl StatePredicate {
    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn holds(&self, index: usize) -> bool {
        let env = PairEnv {
            space: &self.space,
            pre: index,
            post: index,
        };
        Evaluator::new(&env, self.space.symbols())
            .bool(&self.expr)
            .unwrap_or(false)
    }

    /// The states satisfying the predicate.
    pub fn to_set(&self) -> StateSet {
        let members: Vec<usize> = (0..self.space.len())
            .into_par_iter()
            .filter(|&i| self.holds(i))
            .collect();
        StateSet::from_indices(&self.space, members)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{parse_space, Value};

    fn cube(hi: i64) -> SpecDef {
        let sp = parse_space(&format!("space T {{ s: int 0..{hi}; }}")).unwrap();
        parse_spec("spec R on T := s*s <= s' && s' <= s*s*s;", &sp).unwrap()
    }

    fn st(sp: &Space, vals: &[(&str, Value)]) -> State {
        sp.state(vals).unwrap()
    }

    #[test]
    fn state_predicates() {
        let sp = parse_space("space T { s: int 0..9; }").unwrap();
        let even = parse_state_predicate("s % 2 == 0 && 10 / s > 1", &sp).unwrap();
        assert_eq!(even.to_set().iter().collect::<Vec<_>>(), vec![2, 4]);
        assert!(parse_state_predicate("s' == 0", &sp).is_err());
    }

    #[test]
    fn parse_examples() {
        let r = cube(3);
        assert_eq!(
            r.free_variables(),
            ["s".to_string(), "s'".to_string()].into_iter().collect()
        );
        let f = parse_space("space Fermat { n: int 0..20; x: int 0..10; y: int 0..10; }").unwrap();
        parse_spec("spec F on Fermat := n == x'*x' - y'*y' && 0 <= y' && y' <= x';", &f).unwrap();
        let q = parse_space("space SqrtSp { n: int 0..20; x: int 0..5; }").unwrap();
        parse_spec(
            "spec Sq on SqrtSp := x'*x' <= n && n < (x'+1)*(x'+1) && x' >= 0;",
            &q,
        )
        .unwrap();
    }

    #[test]
    fn parse_errors() {
        let sp = parse_space(r#"space S { n: int 0..3; q: seq over "ab" maxlen 1; }"#).unwrap();
        let kind = |t: &str| parse_spec(t, &sp).unwrap_err().kind;
        assert!(matches!(kind("spec R on S := m' == 0;"), ParseErrorKind::UnknownVariable(_)));
        assert!(matches!(kind("spec R on X := n' == 0;"), ParseErrorKind::UnknownSpace(_)));
        assert!(matches!(
            kind("spec R on S := count(i in 0..1 : i' == 0) == 0;"),
            ParseErrorKind::PrimedIndex(_)
        ));
        assert!(matches!(kind("spec R on S := len(n) == 0;"), ParseErrorKind::TypeMismatch(_)));
        assert!(matches!(
            kind("spec R on S := true; domain := n' == 0;"),
            ParseErrorKind::PrimedNotAllowed(_)
        ));
        assert!(matches!(kind("spec R on S := n == ;"), ParseErrorKind::Syntax(_)));
    }

    #[test]
    fn cube_evaluation() {
        let r = cube(125);
        let sp = r.space().clone();
        let s = |v| st(&sp, &[("s", Value::Int(v))]);
        assert!(r.eval_pred(&s(2), &s(6)));
        assert!(!r.eval_pred(&s(2), &s(9)));
        // Oracle: enumerate the image of 2 directly from the definition.
        let want: Vec<u32> = (0..=125u32).filter(|&t| 4 <= t && t <= 8).collect();
        assert_eq!(&*r.as_relation().image(2), want.as_slice());
    }

    #[test]
    fn string_counting() {
        let sp = parse_space(
            r#"space Str { q: seq over "Aa7#" maxlen 2; let: int 0..2; dig: int 0..2; other: int 0..2; }"#,
        )
        .unwrap();
        let r = parse_spec(
            "spec R on Str := let' == count(i in 0..len(q)-1 : isupper(q[i])) + count(i in 0..len(q)-1 : islower(q[i])) \
             && dig' == count(i in 0..len(q)-1 : isdigit(q[i])) && other' == count(i in 0..len(q)-1 : issym(q[i]));",
            &sp,
        )
        .unwrap();
        let s = |q: &str, l, d, o| {
            st(
                &sp,
                &[
                    ("q", Value::Seq(q.chars().collect())),
                    ("let", Value::Int(l)),
                    ("dig", Value::Int(d)),
                    ("other", Value::Int(o)),
                ],
            )
        };
        assert!(r.eval_pred(&s("A7", 0, 0, 0), &s("", 1, 1, 0)));
        assert!(!r.eval_pred(&s("A7", 0, 0, 0), &s("", 2, 0, 0)));
        assert!(r.eval_pred(&s("#a", 0, 0, 0), &s("A7", 1, 0, 1)));
    }

    #[test]
    fn errors_fold_to_false_and_are_tallied() {
        let sp = parse_space("space T { s: int 0..3; }").unwrap();
        let r = parse_spec("spec D on T := s' == 6 / s;", &sp).unwrap();
        let s = |v| sp.state_at(v).unwrap();
        assert!(!r.eval_pred(&s(0), &s(0)));
        assert_eq!(r.eval_errors(), 1);
        assert!(r.eval_pred(&s(2), &s(3)));
        let big = parse_spec("spec B on T := s ** 100 == s';", &sp).unwrap();
        assert!(!big.eval_pred(&s(3), &s(0)));
        assert_eq!(big.eval_errors(), 1);
    }

    #[test]
    fn empty_predicate() {
        let sp = parse_space("space T { s: int 0..3; }").unwrap();
        let r = parse_spec("spec E on T := false;", &sp).unwrap();
        assert!(r
            .as_relation()
            .equals(&Relation::empty(&sp))
            .unwrap());
    }

    #[test]
    fn quantifier_semantics() {
        let sp = parse_space("space T { s: int 0..6; }").unwrap();
        let p = |t: &str| parse_spec(&format!("spec Q on T := {t};"), &sp).unwrap();
        let s = |v| sp.state_at(v).unwrap();
        // Empty ranges: forall vacuously true, exists false, count zero.
        assert!(p("forall(i in 3..2 : false)").eval_pred(&s(0), &s(0)));
        assert!(!p("exists(i in 3..2 : true)").eval_pred(&s(0), &s(0)));
        assert!(p("count(i in 3..2 : true) == 0").eval_pred(&s(0), &s(0)));
        // count over an inclusive range
        assert!(p("count(i in 1..s : i % 2 == 0) == s / 2").eval_pred(&s(6), &s(0)));
        assert!(p("exists(i in 0..s : i * i == s)").eval_pred(&s(4), &s(0)));
        assert!(!p("exists(i in 0..s : i * i == s)").eval_pred(&s(5), &s(0)));
    }

    #[test]
    fn domain_claims() {
        let sp = parse_space("space F { n: int 0..60; x: int 0..31; y: int 0..31; }").unwrap();
        let good = parse_spec(
            "spec F on F := n == x'*x' - y'*y' && 0 <= y' && y' <= x'; domain := n % 2 == 1 || n % 4 == 0;",
            &sp,
        )
        .unwrap();
        assert_eq!(
            good.check_domain_claim(u64::MAX).unwrap(),
            DomainVerdict::Verified { rows: 61 }
        );
        let bad = parse_spec(
            "spec F on F := n == x'*x' - y'*y' && 0 <= y' && y' <= x'; domain := n % 2 == 1;",
            &sp,
        )
        .unwrap();
        let DomainVerdict::Refuted { witnesses } = bad.check_domain_claim(u64::MAX).unwrap() else {
            panic!("wrong claim not refuted")
        };
        let ns: Vec<i64> = witnesses
            .iter()
            .map(|w| match w.state.get(0) {
                Value::Int(n) => *n,
                _ => unreachable!(),
            })
            .collect();
        // Brute force: n = x^2 - y^2 with 0 <= y <= x <= 31 and n even.
        let oracle: Vec<i64> = (0..=60)
            .filter(|n| n % 2 == 0)
            .filter(|n| (0..=31).any(|x: i64| (0..=x).any(|y| x * x - y * y == *n)))
            .collect();
        assert_eq!(ns, oracle);
        assert!(ns.contains(&4));
        assert!(witnesses.iter().all(|w| !w.claimed));

        assert!(matches!(good.check_domain_claim(0), Err(SpecError::ZeroBudget)));
        assert!(matches!(
            good.check_domain_claim(61 * 1024 - 1).unwrap(),
            DomainVerdict::SampledOk { .. }
        ));
        let none = parse_spec("spec G on F := true;", &sp).unwrap();
        assert!(matches!(none.check_domain_claim(10), Err(SpecError::NoDomainClaim(_))));
    }

    #[test]
    fn factored_image_matches_full_scan() {
        let sp = parse_space("space F { n: int 0..12; x: int 0..4; y: int 0..4; }").unwrap();
        let r = parse_spec("spec F on F := n == x'*x' - y'*y' && 0 <= y' && y' <= x';", &sp)
            .unwrap()
            .as_relation();
        let brute = Relation::from_fn(&sp, {
            let sp = sp.clone();
            move |a, b| {
                let n = sp.scalar(a, 0);
                let (x, y) = (sp.scalar(b, 1), sp.scalar(b, 2));
                n == x * x - y * y && 0 <= y && y <= x
            }
        });
        assert!(r.equals(&brute).unwrap());
        assert_eq!(r.dom(), brute.dom());
    }

    #[test]
    fn display_reparses_to_same_ast() {
        let r = cube(10);
        let again = parse_spec(&r.to_string(), r.space()).unwrap();
        assert_eq!(again.predicate(), r.predicate());
    }
}
