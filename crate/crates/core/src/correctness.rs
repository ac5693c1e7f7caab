//! Refinement, absolute and relative correctness, competence domains,
//! projections and derivation-chain ordering.
//!
//! Argument order follows the mathematics: `refines(r2, r1)` asks whether
//! `r2` refines `r1`, `more_correct(p2, p1, r)` whether `p2` is at least as
//! correct as `p1` with respect to `r`.

use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::relalg::{RelError, Relation};
use crate::space::{Space, StateSet};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorrectnessError {
    #[error(transparent)]
    Relation(#[from] RelError),
    #[error("`{0}` is not deterministic")]
    Nondeterministic(String),
    #[error("a chain needs at least two programs, got {0}")]
    ShortChain(usize),
    #[error("no programs given")]
    NoPrograms,
    #[error("space has {states} states; {mode} mode allows at most {max}")]
    TooLarge {
        states: usize,
        mode: BruteForceMode,
        max: usize,
    },
}

type Result<T> = std::result::Result<T, CorrectnessError>;

/// `r2` refines `r1`: `r1 L ⊆ r2 L` and `r1 L ∩ r2 ⊆ r1`.
pub fn refines(r2: &Relation, r1: &Relation) -> Result<bool> {
    r2.space().check_same(r1.space()).map_err(RelError::from)?;
    Ok((0..r1.space().len()).into_par_iter().all(|s| {
        if !r1.has_image(s) {
            return true;
        }
        let img = r2.image(s);
        !img.is_empty() && img.iter().all(|&t| r1.contains(s, t as usize))
    }))
}

/// The program function `p` refines the specification `r`.
pub fn is_correct(p: &Relation, r: &Relation) -> Result<bool> {
    refines(p, r)
}

/// `dom(r ∩ p)`: the states on which `p` can deliver an outcome `r` allows.
pub fn competence_domain(p: &Relation, r: &Relation) -> Result<StateSet> {
    r.space().check_same(p.space()).map_err(RelError::from)?;
    let (driver, filter) = if p.is_explicit() || !r.is_explicit() {
        (p, r)
    } else {
        (r, p)
    };
    let members: Vec<usize> = (0..p.space().len())
        .into_par_iter()
        .filter(|&s| {
            driver
                .image(s)
                .iter()
                .any(|&t| filter.contains(s, t as usize))
        })
        .collect();
    Ok(StateSet::from_indices(p.space(), members))
}

fn require_deterministic(p: &Relation, label: &str) -> Result<()> {
    if p.is_deterministic()? {
        Ok(())
    } else {
        Err(CorrectnessError::Nondeterministic(label.to_string()))
    }
}

/// Relative correctness for deterministic programs: `(r ∩ p2)L ⊇ (r ∩ p1)L`.
pub fn more_correct_det(p2: &Relation, p1: &Relation, r: &Relation) -> Result<bool> {
    require_deterministic(p2, "p2")?;
    require_deterministic(p1, "p1")?;
    let cd2 = competence_domain(p2, r)?;
    let cd1 = competence_domain(p1, r)?;
    Ok(cd1.is_subset(&cd2).map_err(RelError::from)?)
}

/// Strict relative correctness for deterministic programs: `(r ∩ p2)L ⊃ (r ∩ p1)L`.
pub fn strictly_more_correct_det(p2: &Relation, p1: &Relation, r: &Relation) -> Result<bool> {
    require_deterministic(p2, "p2")?;
    require_deterministic(p1, "p1")?;
    let cd2 = competence_domain(p2, r)?;
    let cd1 = competence_domain(p1, r)?;
    Ok(cd1.is_strict_subset(&cd2).map_err(RelError::from)?)
}

/// Relative correctness for arbitrary programs:
/// `(r ∩ p2)L ⊇ (r ∩ p1)L` and `(r ∩ p1)L ∩ r̅ ∩ p2 ⊆ p1`.
pub fn more_correct(p2: &Relation, p1: &Relation, r: &Relation) -> Result<bool> {
    r.space().check_same(p2.space()).map_err(RelError::from)?;
    let cd2 = competence_domain(p2, r)?;
    let cd1 = competence_domain(p1, r)?;
    more_correct_given(p2, p1, r, &cd2, &cd1)
}

fn more_correct_given(
    p2: &Relation,
    p1: &Relation,
    r: &Relation,
    cd2: &StateSet,
    cd1: &StateSet,
) -> Result<bool> {
    if !cd1.is_subset(cd2).map_err(RelError::from)? {
        return Ok(false);
    }
    let members: Vec<usize> = cd1.iter().collect();
    Ok(members.into_par_iter().all(|s| {
        p2.image(s).iter().all(|&t| {
            let t = t as usize;
            r.contains(s, t) || p1.contains(s, t)
        })
    }))
}

/// `π_r(p) = (r ∩ p)L ∩ (r ∪ p)`.
pub fn projection(r: &Relation, p: &Relation) -> Result<Relation> {
    let cd = competence_domain(p, r)?;
    Ok(r.union(p)?.restrict_pre(&cd)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    StrictlyMoreCorrect,
    MoreCorrect,
    LessCorrect,
    Incomparable,
}

impl Verdict {
    /// Verdict for `later` relative to `earlier`.
    pub fn from_flags(later_ge: bool, earlier_ge: bool) -> Verdict {
        match (later_ge, earlier_ge) {
            (true, false) => Verdict::StrictlyMoreCorrect,
            (true, true) => Verdict::MoreCorrect,
            (false, true) => Verdict::LessCorrect,
            (false, false) => Verdict::Incomparable,
        }
    }

    pub fn is_improvement(self) -> bool {
        matches!(self, Verdict::StrictlyMoreCorrect | Verdict::MoreCorrect)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::StrictlyMoreCorrect => "strictly_more_correct",
            Verdict::MoreCorrect => "more_correct",
            Verdict::LessCorrect => "less_correct",
            Verdict::Incomparable => "incomparable",
        })
    }
}

/// A program function with a display name.
#[derive(Debug, Clone)]
pub struct NamedRelation {
    pub name: String,
    pub relation: Relation,
}

impl NamedRelation {
    pub fn new(name: impl Into<String>, relation: Relation) -> Self {
        NamedRelation {
            name: name.into(),
            relation,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainVerdict {
    pub names: Vec<String>,
    /// `verdicts[i]` compares program `i + 1` with program `i`.
    pub verdicts: Vec<Verdict>,
    pub competence_domains: Vec<StateSet>,
    pub final_correct: bool,
}

impl ChainVerdict {
    pub fn all_improving(&self) -> bool {
        self.verdicts.iter().all(|v| v.is_improvement())
    }

    pub fn all_strict(&self) -> bool {
        self.verdicts
            .iter()
            .all(|v| *v == Verdict::StrictlyMoreCorrect)
    }
}

/// Compare each program of a derivation chain with its predecessor.
pub fn order_chain(r: &Relation, progs: &[NamedRelation]) -> Result<ChainVerdict> {
    if progs.len() < 2 {
        return Err(CorrectnessError::ShortChain(progs.len()));
    }
    let cds = progs
        .iter()
        .map(|p| competence_domain(&p.relation, r))
        .collect::<Result<Vec<_>>>()?;
    let mut verdicts = Vec::with_capacity(progs.len() - 1);
    for i in 1..progs.len() {
        let (a, b) = (&progs[i - 1].relation, &progs[i].relation);
        let fwd = more_correct_given(b, a, r, &cds[i], &cds[i - 1])?;
        let bwd = more_correct_given(a, b, r, &cds[i - 1], &cds[i])?;
        verdicts.push(Verdict::from_flags(fwd, bwd));
    }
    let final_correct = is_correct(&progs[progs.len() - 1].relation, r)?;
    Ok(ChainVerdict {
        names: progs.iter().map(|p| p.name.clone()).collect(),
        verdicts,
        competence_domains: cds,
        final_correct,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HasseNode {
    /// Equally correct programs, sorted.
    pub names: Vec<String>,
    pub competence_domain_size: usize,
    pub correct: bool,
}

/// Programs ordered by relative correctness. Edges run from less to more
/// correct and form the transitive reduction of the strict order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HasseDiagram {
    pub nodes: Vec<HasseNode>,
    pub edges: Vec<(usize, usize)>,
}

impl HasseDiagram {
    pub fn node_of(&self, name: &str) -> Option<usize> {
        self.nodes
            .iter()
            .position(|n| n.names.iter().any(|m| m == name))
    }

    pub fn has_edge(&self, lower: &str, upper: &str) -> bool {
        match (self.node_of(lower), self.node_of(upper)) {
            (Some(a), Some(b)) => self.edges.contains(&(a, b)),
            _ => false,
        }
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph hasse {\n    rankdir=BT;\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let _ = writeln!(
                out,
                "    n{i} [label=\"{}\"{}];",
                n.names.join(", "),
                if n.correct { ", peripheries=2" } else { "" }
            );
        }
        for (a, b) in &self.edges {
            let _ = writeln!(out, "    n{a} -> n{b};");
        }
        out.push_str("}\n");
        out
    }
}

/// Order candidate programs by relative correctness with respect to `r`.
pub fn hasse(r: &Relation, progs: &[NamedRelation]) -> Result<HasseDiagram> {
    if progs.is_empty() {
        return Err(CorrectnessError::NoPrograms);
    }
    let mut sorted: Vec<&NamedRelation> = progs.iter().collect();
    sorted.sort_by(|a, b| a.name.cmp(&b.name));
    let n = sorted.len();
    let cds = sorted
        .iter()
        .map(|p| competence_domain(&p.relation, r))
        .collect::<Result<Vec<_>>>()?;
    let det = sorted
        .iter()
        .map(|p| Ok(p.relation.is_deterministic()?))
        .collect::<Result<Vec<bool>>>()?;
    // ge[i][j]: program i is at least as correct as program j.
    let mut ge = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            ge[i][j] = if det[i] && det[j] {
                cds[j].is_subset(&cds[i]).map_err(RelError::from)?
            } else {
                more_correct_given(&sorted[i].relation, &sorted[j].relation, r, &cds[i], &cds[j])?
            };
        }
    }

    // Merge mutually related programs; classes ordered by their first name.
    let mut class_of = vec![usize::MAX; n];
    let mut reps: Vec<usize> = Vec::new();
    for i in 0..n {
        if let Some(c) = reps.iter().position(|&k| ge[i][k] && ge[k][i]) {
            class_of[i] = c;
        } else {
            class_of[i] = reps.len();
            reps.push(i);
        }
    }
    let k = reps.len();
    let below = |a: usize, b: usize| ge[reps[b]][reps[a]] && !ge[reps[a]][reps[b]];
    let mut edges = Vec::new();
    for a in 0..k {
        for b in 0..k {
            if below(a, b) && !(0..k).any(|c| below(a, c) && below(c, b)) {
                edges.push((a, b));
            }
        }
    }
    let mut nodes: Vec<HasseNode> = reps
        .iter()
        .map(|&i| HasseNode {
            names: Vec::new(),
            competence_domain_size: cds[i].len(),
            correct: false,
        })
        .collect();
    for i in 0..n {
        nodes[class_of[i]].names.push(sorted[i].name.clone());
    }
    for (c, &i) in reps.iter().enumerate() {
        nodes[c].correct = is_correct(&sorted[i].relation, r)?;
    }
    Ok(HasseDiagram { nodes, edges })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BruteForceMode {
    /// Programs range over partial functions.
    Deterministic,
    /// Programs range over all relations.
    All,
}

impl fmt::Display for BruteForceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BruteForceMode::Deterministic => "deterministic",
            BruteForceMode::All => "all",
        })
    }
}

/// A pair of programs for which refinement and "more correct for every
/// specification" disagree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub p2: Vec<(usize, usize)>,
    pub p1: Vec<(usize, usize)>,
    pub refines: bool,
    /// A specification for which `p2` is not more correct than `p1`, if any.
    pub spec: Option<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BruteForceReport {
    pub states: usize,
    pub mode: BruteForceMode,
    pub programs: usize,
    pub specs: usize,
    pub pairs_checked: usize,
    pub counterexample_count: usize,
    /// The first few counterexamples in enumeration order.
    pub counterexamples: Vec<Counterexample>,
}

impl BruteForceReport {
    pub fn holds(&self) -> bool {
        self.counterexample_count == 0
    }
}

const REPORTED_COUNTEREXAMPLES: usize = 8;

/// Relation whose pair `(s, t)` is present when bit `s * n + t` of `mask` is set.
pub fn relation_from_mask(space: &Space, mask: u64) -> Relation {
    let n = space.len();
    let rows = (0..n)
        .map(|s| {
            (0..n)
                .filter(|&t| mask >> (s * n + t) & 1 == 1)
                .map(|t| t as u32)
                .collect()
        })
        .collect();
    Relation::from_rows(space, rows)
}

/// Every partial function on an `n`-state space, in a fixed order.
fn partial_function_masks(n: usize) -> Vec<u64> {
    let choices = n + 1;
    let total = choices.pow(n as u32);
    (0..total)
        .map(|mut k| {
            let mut mask = 0u64;
            for s in 0..n {
                let c = k % choices;
                k /= choices;
                if c > 0 {
                    mask |= 1 << (s * n + c - 1);
                }
            }
            mask
        })
        .collect()
}

/// Check `refines(p2, p1) ⟺ ∀r: more_correct(p2, p1, r)` over every pair of
/// programs on `space`, quantifying `r` over all relations.
pub fn refinement_equiv_bruteforce(space: &Space, mode: BruteForceMode) -> Result<BruteForceReport> {
    let n = space.len();
    let max = match mode {
        BruteForceMode::Deterministic => 4,
        BruteForceMode::All => 3,
    };
    if n > max {
        return Err(CorrectnessError::TooLarge {
            states: n,
            mode,
            max,
        });
    }
    let program_masks = match mode {
        BruteForceMode::Deterministic => partial_function_masks(n),
        BruteForceMode::All => (0..1u64 << (n * n)).collect(),
    };
    let programs: Vec<Relation> = program_masks
        .iter()
        .map(|&m| relation_from_mask(space, m))
        .collect();
    let specs: Vec<Relation> = (0..1u64 << (n * n))
        .map(|m| relation_from_mask(space, m))
        .collect();

    let pairs: Vec<(usize, usize)> = (0..programs.len())
        .flat_map(|i| (0..programs.len()).map(move |j| (i, j)))
        .collect();
    let outcomes = pairs
        .par_iter()
        .map(|&(i2, i1)| -> Result<Option<Counterexample>> {
            let (p2, p1) = (&programs[i2], &programs[i1]);
            let refines = refines(p2, p1)?;
            let mut failing = None;
            for (k, r) in specs.iter().enumerate() {
                if !more_correct(p2, p1, r)? {
                    failing = Some(k);
                    break;
                }
            }
            if refines == failing.is_none() {
                return Ok(None);
            }
            Ok(Some(Counterexample {
                p2: p2.pairs().collect(),
                p1: p1.pairs().collect(),
                refines,
                spec: failing.map(|k| specs[k].pairs().collect()),
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let found: Vec<Counterexample> = outcomes.into_iter().flatten().collect();
    Ok(BruteForceReport {
        states: n,
        mode,
        programs: programs.len(),
        specs: specs.len(),
        pairs_checked: pairs.len(),
        counterexample_count: found.len(),
        counterexamples: found.into_iter().take(REPORTED_COUNTEREXAMPLES).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::parse_space;

    fn staircase() -> (Space, Relation, Relation, Relation) {
        let sp = parse_space("space F2 { s: int 0..3; }").unwrap();
        let r = Relation::from_pairs(
            &sp,
            [(0, 0), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2), (3, 3)],
        )
        .unwrap();
        let p = Relation::from_pairs(&sp, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let pp = Relation::from_pairs(&sp, [(1, 0), (2, 1), (3, 2)]).unwrap();
        (sp, r, p, pp)
    }

    #[test]
    fn relative_correctness_without_refinement() {
        let (_, r, p, pp) = staircase();
        assert!(more_correct(&pp, &p, &r).unwrap());
        assert!(!more_correct(&p, &pp, &r).unwrap());
        assert!(more_correct_det(&pp, &p, &r).unwrap());
        assert!(strictly_more_correct_det(&pp, &p, &r).unwrap());
        assert!(!refines(&pp, &p).unwrap());
        assert_eq!(
            competence_domain(&p, &r).unwrap().iter().collect::<Vec<_>>(),
            vec![1, 2]
        );
        assert_eq!(
            competence_domain(&pp, &r).unwrap().iter().collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
    }

    #[test]
    fn refinement_basics() {
        let (sp, r, p, _) = staircase();
        assert!(refines(&r, &r).unwrap());
        assert!(refines(&p, &Relation::empty(&sp)).unwrap());
        assert!(!is_correct(&Relation::empty(&sp), &r).unwrap());
        assert!(is_correct(&Relation::identity(&sp), &Relation::universal(&sp)).unwrap());
    }

    #[test]
    fn deterministic_order_rejects_nondeterminism() {
        let (_, r, p, _) = staircase();
        assert!(matches!(
            more_correct_det(&r, &p, &r),
            Err(CorrectnessError::Nondeterministic(_))
        ));
    }

    #[test]
    fn general_order_rejects_new_wrong_outcomes() {
        let sp = parse_space("space B { s: int 0..1; }").unwrap();
        let r = Relation::from_pairs(&sp, [(0, 0)]).unwrap();
        let p1 = Relation::from_pairs(&sp, [(0, 0)]).unwrap();
        let p2 = Relation::from_pairs(&sp, [(0, 0), (0, 1)]).unwrap();
        assert!(!more_correct(&p2, &p1, &r).unwrap());
        assert!(more_correct(&p1, &p2, &r).unwrap());
    }

    #[test]
    fn projection_examples() {
        let (sp, r, p, _) = staircase();
        assert!(projection(&r, &Relation::empty(&sp))
            .unwrap()
            .equals(&Relation::empty(&sp))
            .unwrap());
        let i = Relation::identity(&sp);
        assert!(projection(&i, &i).unwrap().equals(&i).unwrap());
        // Rows 1 and 2 keep R ∪ P, everything else is dropped.
        let pr = projection(&r, &p).unwrap();
        let want =
            Relation::from_pairs(&sp, [(1, 0), (1, 2), (2, 1), (2, 3)]).unwrap();
        assert!(pr.equals(&want).unwrap());
    }

    #[test]
    fn chain_verdicts() {
        let (sp, r, p, pp) = staircase();
        let chain = [
            NamedRelation::new("empty", Relation::empty(&sp)),
            NamedRelation::new("p", p.clone()),
            NamedRelation::new("pp", pp.clone()),
            NamedRelation::new("pp2", pp.clone()),
        ];
        let v = order_chain(&r, &chain).unwrap();
        assert_eq!(
            v.verdicts,
            vec![
                Verdict::StrictlyMoreCorrect,
                Verdict::StrictlyMoreCorrect,
                Verdict::MoreCorrect
            ]
        );
        assert!(!v.final_correct);
        let back = order_chain(&r, &[chain[2].clone(), chain[1].clone()]).unwrap();
        assert_eq!(back.verdicts, vec![Verdict::LessCorrect]);
        assert!(matches!(
            order_chain(&r, &chain[..1]),
            Err(CorrectnessError::ShortChain(1))
        ));
    }

    #[test]
    fn hasse_merges_and_reduces() {
        let sp = parse_space("space H { s: int 0..2; }").unwrap();
        let r = Relation::identity(&sp);
        let f = |pairs: &[(usize, usize)]| Relation::from_pairs(&sp, pairs.iter().copied()).unwrap();
        let progs = [
            NamedRelation::new("a", f(&[])),
            NamedRelation::new("b", f(&[(0, 0)])),
            NamedRelation::new("c", f(&[(1, 1)])),
            NamedRelation::new("d", f(&[(0, 0), (1, 1), (2, 2)])),
            NamedRelation::new("e", f(&[(0, 0), (1, 1), (2, 2)])),
        ];
        let h = hasse(&r, &progs).unwrap();
        assert_eq!(h.nodes.len(), 4);
        assert_eq!(h.nodes[3].names, vec!["d", "e"]);
        assert!(h.nodes[3].correct);
        assert!(h.has_edge("a", "b") && h.has_edge("a", "c"));
        assert!(h.has_edge("b", "d") && h.has_edge("c", "e"));
        assert!(!h.has_edge("a", "d"));
        assert!(!h.has_edge("b", "c") && !h.has_edge("c", "b"));
        let dot = h.to_dot();
        assert!(dot.contains("rankdir=BT"));
        assert!(dot.contains("label=\"d, e\", peripheries=2"));
    }

    #[test]
    fn partial_functions_are_enumerated_once() {
        let masks = partial_function_masks(3);
        assert_eq!(masks.len(), 64);
        let mut sorted = masks.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 64);
        let sp = parse_space("space Z { s: int 0..2; }").unwrap();
        for m in masks {
            assert!(relation_from_mask(&sp, m).is_deterministic().unwrap());
        }
    }

    #[test]
    fn bruteforce_two_states() {
        let sp = parse_space("space Z { s: int 0..1; }").unwrap();
        let rep = refinement_equiv_bruteforce(&sp, BruteForceMode::Deterministic).unwrap();
        assert_eq!((rep.programs, rep.specs, rep.pairs_checked), (9, 16, 81));
        assert!(rep.holds());
        let big = parse_space("space Y { s: int 0..4; }").unwrap();
        assert!(matches!(
            refinement_equiv_bruteforce(&big, BruteForceMode::Deterministic),
            Err(CorrectnessError::TooLarge { .. })
        ));
    }
}
