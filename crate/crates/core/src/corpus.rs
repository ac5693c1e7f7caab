//! The bundled case studies and their replay.
//!
//! Each case pairs a specification and a derivation chain with the
//! competence domains the chain is expected to reach, written twice: as a
//! predicate in the specification language and as a brute-force oracle
//! over the decoded state. A replay extracts every program, recomputes the
//! competence domains and checks them against both.
//!
//! Bounds are finite, so some values differ from the unbounded originals.
//! On the cube space `s ≤ 125`, `s³` and `(s² + s³)/2` leave the space for
//! `s ≥ 6`, so `p8` and `p9` are only competent on `0..=5` while `p7` is
//! competent on all of `dom(R) = 0..=11`.

use num_rational::BigRational;
use serde::Serialize;
use thiserror::Error;

use crate::correctness::{self, CorrectnessError, HasseDiagram, NamedRelation, Verdict};
use crate::minilang::{ExecError, ProgramDef};
use crate::oracle;
use crate::relalg::{RelError, Relation};
use crate::reliability::{self, Candidate, Distribution, ReliabilityError, ReliabilityReport};
use crate::space::{Space, StateSet, Value};
use crate::speclang::{self, DomainVerdict, SpecDef, SpecError};
use crate::syntax::ParseError;
use crate::workspace::{Workspace, WorkspaceError};

macro_rules! sources {
    ($dir:literal: $($file:literal),+ $(,)?) => {
        &[$(($file, include_str!(concat!("../corpus/", $dir, "/", $file)))),+]
    };
}

pub const CUBE: &[(&str, &str)] = sources!("cube":
    "cube.space", "cube.spec", "p0.prog", "p1.prog", "p2.prog", "p3.prog", "p4.prog",
    "p5.prog", "p6.prog", "p7.prog", "p8.prog", "p9.prog",
);
pub const FERMAT: &[(&str, &str)] =
    sources!("fermat": "fermat.space", "fermat.spec", "p0.prog", "p1.prog", "p2.prog", "p3.prog");
pub const SQRT: &[(&str, &str)] = sources!("sqrt":
    "sqrt.space", "sqrt.spec", "p0.prog", "p1.prog", "p2.prog", "p3.prog", "f.prog",
);
pub const STRINGS: &[(&str, &str)] = sources!("strings":
    "strings.space", "strings.spec", "p0.prog", "p1.prog", "p2.prog", "p3.prog", "p4.prog",
);
pub const PROJECTION: &[(&str, &str)] =
    sources!("projection": "xy.space", "sum.spec", "loop.prog");

pub const CASE_NAMES: &[&str] = &["cube", "fermat", "sqrt", "strings"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("unknown case `{0}`")]
    UnknownCase(String),
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Relation(#[from] RelError),
    #[error(transparent)]
    Correctness(#[from] CorrectnessError),
    #[error(transparent)]
    Reliability(#[from] ReliabilityError),
}

type Result<T> = std::result::Result<T, CorpusError>;

/// Oracle membership test for an expected competence domain.
pub type Oracle = fn(&Space, usize) -> bool;

#[derive(Debug, Clone, Copy)]
pub struct ExpectedCd {
    pub program: &'static str,
    pub predicate: &'static str,
    pub oracle: Oracle,
}

#[derive(Debug, Clone)]
pub struct CorpusCase {
    pub name: &'static str,
    pub sources: &'static [(&'static str, &'static str)],
    pub space: &'static str,
    pub spec: &'static str,
    /// Programs whose competence domains are checked, in report order.
    pub programs: Vec<ExpectedCd>,
    /// The derivation chain, a sublist of `programs`.
    pub chain: Vec<&'static str>,
    pub final_correct: bool,
    /// Expected Hasse edges between the given program names.
    pub hasse_edges: Vec<(&'static str, &'static str)>,
    /// Programs expected to share a Hasse node.
    pub hasse_merged: Vec<Vec<&'static str>>,
}

fn int(sp: &Space, i: usize, var: &str) -> u64 {
    sp.scalar(i, sp.var_index(var).expect("declared")) as u64
}

fn seq(sp: &Space, i: usize, var: &str) -> Vec<char> {
    let v = sp.var_index(var).expect("declared");
    match sp.vars()[v].domain.value_at(sp.ordinal(i, v)) {
        Value::Seq(cs) => cs,
        other => panic!("`{var}` holds {other}, not a sequence"),
    }
}

/// Competence domain of `s ↦ f(s)` on the cube space, computed directly.
fn cube_cd(sp: &Space, i: usize, f: fn(i128) -> i128) -> bool {
    let s = int(sp, i, "s") as i128;
    let t = f(s);
    (0..=125).contains(&t) && s * s <= t && t <= s * s * s
}

fn never(_: &Space, _: usize) -> bool {
    false
}

fn always(_: &Space, _: usize) -> bool {
    true
}

fn chars_all(sp: &Space, i: usize, ok: fn(char) -> bool) -> bool {
    seq(sp, i, "q").into_iter().all(ok)
}

pub fn case(name: &str) -> Result<CorpusCase> {
    let e = |program, predicate, oracle| ExpectedCd {
        program,
        predicate,
        oracle,
    };
    Ok(match name {
        "cube" => CorpusCase {
            name: "cube",
            sources: CUBE,
            space: "T",
            spec: "R",
            programs: vec![
                e("p0", "false", never),
                e("p1", "s == 0", |sp, i| cube_cd(sp, i, |_| 0)),
                e("p2", "s == 1", |sp, i| cube_cd(sp, i, |_| 1)),
                e("p3", "s == 2", |sp, i| cube_cd(sp, i, |s| 2 * s.pow(3) - 8)),
                e("p4", "s == 0 || s == 1", |sp, i| cube_cd(sp, i, |s| s)),
                e("p5", "s == 1 || s == 2", |sp, i| {
                    cube_cd(sp, i, |s| 2 * s.pow(3) - 3 * s.pow(2) + 2)
                }),
                e("p6", "s == 0 || s == 2", |sp, i| cube_cd(sp, i, |s| s.pow(4) - 5 * s)),
                e("p7", "s <= 11", |sp, i| cube_cd(sp, i, |s| s.pow(2))),
                e("p8", "s <= 5", |sp, i| cube_cd(sp, i, |s| s.pow(3))),
                e("p9", "s <= 5", |sp, i| cube_cd(sp, i, |s| (s.pow(2) + s.pow(3)) / 2)),
            ],
            chain: vec!["p0", "p1", "p4", "p8", "p7"],
            final_correct: true,
            hasse_edges: vec![
                ("p0", "p1"),
                ("p0", "p2"),
                ("p0", "p3"),
                ("p1", "p4"),
                ("p1", "p6"),
                ("p2", "p4"),
                ("p2", "p5"),
                ("p3", "p5"),
                ("p3", "p6"),
                ("p4", "p8"),
                ("p5", "p8"),
                ("p6", "p8"),
                ("p8", "p7"),
            ],
            hasse_merged: vec![vec!["p8", "p9"]],
        },
        "fermat" => CorpusCase {
            name: "fermat",
            sources: FERMAT,
            space: "Fermat",
            spec: "R",
            programs: vec![
                e("p0", "false", never),
                e("p1", "issq(n)", |sp, i| oracle::perfect_square(int(sp, i, "n"))),
                e(
                    "p2",
                    "exists(c in 0..15 : c*c >= n && (c == 0 || (c-1)*(c-1) < n) && issq(c*c - n))",
                    |sp, i| {
                        let n = int(sp, i, "n");
                        let c = oracle::isqrt_ceil(n);
                        oracle::perfect_square(c * c - n)
                    },
                ),
                e("p3", "n % 2 == 1 || n % 4 == 0", |sp, i| {
                    oracle::difference_of_squares(int(sp, i, "n"), 101)
                }),
            ],
            chain: vec!["p0", "p1", "p2", "p3"],
            final_correct: true,
            hasse_edges: vec![("p0", "p1"), ("p1", "p2"), ("p2", "p3")],
            hasse_merged: vec![],
        },
        "sqrt" => CorpusCase {
            name: "sqrt",
            sources: SQRT,
            space: "SqrtSp",
            spec: "R",
            programs: vec![
                e("p0", "false", never),
                e("p1", "n == 0", |sp, i| int(sp, i, "n") == 0),
                e("p2", "issq(n)", |sp, i| oracle::perfect_square(int(sp, i, "n"))),
                e("p3", "true", always),
            ],
            chain: vec!["p0", "p1", "p2", "p3"],
            final_correct: true,
            hasse_edges: vec![("p0", "p1"), ("p1", "p2"), ("p2", "p3")],
            hasse_merged: vec![],
        },
        "strings" => CorpusCase {
            name: "strings",
            sources: STRINGS,
            space: "Str",
            spec: "R",
            programs: vec![
                e("p0", "false", never),
                e("p1", "forall(k in 0..len(q)-1 : isupper(q[k]))", |sp, i| {
                    chars_all(sp, i, |c| c.is_ascii_uppercase())
                }),
                e(
                    "p2",
                    "forall(k in 0..len(q)-1 : isupper(q[k]) || islower(q[k]))",
                    |sp, i| chars_all(sp, i, |c| c.is_ascii_alphabetic()),
                ),
                e(
                    "p3",
                    "forall(k in 0..len(q)-1 : isupper(q[k]) || islower(q[k]) || isdigit(q[k]))",
                    |sp, i| chars_all(sp, i, |c| c.is_ascii_alphanumeric()),
                ),
                e("p4", STR_CLASSES, always),
            ],
            chain: vec!["p0", "p1", "p2", "p3", "p4"],
            final_correct: true,
            hasse_edges: vec![("p0", "p1"), ("p1", "p2"), ("p2", "p3"), ("p3", "p4")],
            hasse_merged: vec![],
        },
        other => return Err(CorpusError::UnknownCase(other.to_string())),
    })
}

const STR_CLASSES: &str =
    "forall(k in 0..len(q)-1 : isupper(q[k]) || islower(q[k]) || isdigit(q[k]) || issym(q[k]))";

/// Knobs for a replay.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReplayOptions {
    pub seed: u64,
    pub samples: u64,
    pub fuel: u64,
    pub budget: u64,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        ReplayOptions {
            seed: 0x5eed,
            samples: 4000,
            fuel: crate::minilang::DEFAULT_FUEL,
            budget: 1 << 24,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProgramReport {
    pub program: String,
    pub deterministic: bool,
    pub competence_domain_size: usize,
    pub matches_predicate: bool,
    pub matches_oracle: bool,
    pub divergent_states: u64,
    pub runtime_error_paths: u64,
    pub abort_paths: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseReport {
    pub case: String,
    pub states: u64,
    pub domain_claim: String,
    pub domain_size: usize,
    pub programs: Vec<ProgramReport>,
    pub chain: Vec<String>,
    pub verdicts: Vec<Verdict>,
    pub final_correct: bool,
    pub hasse: HasseDiagram,
    pub reliability: ReliabilityReport,
    pub failures: Vec<String>,
}

impl CaseReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusReport {
    pub options: ReplayOptions,
    pub cases: Vec<CaseReport>,
    pub passed: bool,
}

impl CorpusReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// A case study loaded and extracted, ready for further queries.
pub struct LoadedCase {
    pub case: CorpusCase,
    pub workspace: Workspace,
    pub space: Space,
    pub spec: SpecDef,
    pub spec_relation: Relation,
    pub domain: StateSet,
    pub domain_verdict: DomainVerdict,
    /// `(program, extraction)` for every program of the case, in order.
    pub extracted: Vec<(ProgramDef, crate::minilang::Extraction)>,
}

impl LoadedCase {
    pub fn function(&self, program: &str) -> Option<&Relation> {
        self.extracted
            .iter()
            .find(|(p, _)| p.name() == program)
            .map(|(_, e)| &e.relation)
    }

    pub fn program(&self, program: &str) -> Option<&ProgramDef> {
        self.extracted
            .iter()
            .find(|(p, _)| p.name() == program)
            .map(|(p, _)| p)
    }

    fn named(&self, names: &[&str]) -> Vec<NamedRelation> {
        names
            .iter()
            .map(|n| NamedRelation::new(*n, self.function(n).expect("extracted").clone()))
            .collect()
    }
}

/// Load and extract every program of a case.
pub fn load(name: &str, opts: &ReplayOptions) -> Result<LoadedCase> {
    let case = case(name)?;
    let mut workspace = Workspace::new();
    workspace.load(case.sources.iter().copied())?;
    let space = workspace.space(case.space)?.clone();
    let spec = workspace.spec(case.spec)?.clone();
    let domain_verdict = spec.check_domain_claim(opts.budget)?;
    let domain = spec.domain(opts.budget);
    let mut extracted = Vec::new();
    for exp in &case.programs {
        let prog = workspace.program(exp.program)?.clone();
        let ex = prog.extract_function(opts.fuel)?;
        extracted.push((prog, ex));
    }
    Ok(LoadedCase {
        spec_relation: spec.as_relation(),
        case,
        workspace,
        space,
        spec,
        domain,
        domain_verdict,
        extracted,
    })
}

fn describe_verdict(v: &DomainVerdict) -> String {
    match v {
        DomainVerdict::Verified { rows } => format!("verified ({rows} rows)"),
        DomainVerdict::SampledOk { rows } => format!("sampled ok ({rows} rows)"),
        DomainVerdict::Refuted { witnesses } => format!("refuted ({} witnesses)", witnesses.len()),
    }
}

fn first_difference(a: &StateSet, b: &StateSet) -> Option<usize> {
    a.iter()
        .find(|&s| !b.contains(s))
        .or_else(|| b.iter().find(|&s| !a.contains(s)))
}

/// Replay one case and check every expectation.
pub fn replay(name: &str, opts: &ReplayOptions) -> Result<CaseReport> {
    let lc = load(name, opts)?;
    let case = &lc.case;
    let r = &lc.spec_relation;
    let sp = &lc.space;
    let mut failures = Vec::new();

    if !matches!(lc.domain_verdict, DomainVerdict::Verified { .. }) {
        failures.push(format!("domain claim: {}", describe_verdict(&lc.domain_verdict)));
    }

    let mut programs = Vec::new();
    let mut cds = Vec::new();
    for (exp, (prog, ex)) in case.programs.iter().zip(&lc.extracted) {
        let cd = correctness::competence_domain(&ex.relation, r)?;
        let pred = speclang::parse_state_predicate(exp.predicate, sp)?.to_set();
        let oracle = StateSet::from_fn(sp, |i| (exp.oracle)(sp, i));
        let deterministic = ex.relation.is_deterministic()?;
        for (what, want) in [("predicate", &pred), ("oracle", &oracle)] {
            if let Some(s) = first_difference(&cd, want) {
                failures.push(format!(
                    "{}: competence domain differs from {what} at {}",
                    prog.name(),
                    sp.describe(s)
                ));
            }
        }
        if !cd.is_subset(&lc.domain).map_err(RelError::from)? {
            failures.push(format!("{}: competence domain exceeds dom(R)", prog.name()));
        }
        if !prog.has_choice() && !deterministic {
            failures.push(format!("{}: choice-free program is nondeterministic", prog.name()));
        }
        programs.push(ProgramReport {
            program: prog.name().to_string(),
            deterministic,
            competence_domain_size: cd.len(),
            matches_predicate: cd.len() == pred.len() && cd.is_subset(&pred).unwrap_or(false),
            matches_oracle: cd.len() == oracle.len() && cd.is_subset(&oracle).unwrap_or(false),
            divergent_states: ex.divergent_states,
            runtime_error_paths: ex.runtime_error_paths,
            abort_paths: ex.abort_paths,
        });
        cds.push(cd);
    }

    let chain = correctness::order_chain(r, &lc.named(&case.chain))?;
    if !chain.all_strict() {
        failures.push(format!("chain verdicts {:?} are not all strict", chain.verdicts));
    }
    if chain.final_correct != case.final_correct {
        failures.push(format!("final correctness is {}", chain.final_correct));
    }
    let last = chain.competence_domains.last().expect("nonempty chain");
    if case.final_correct && last.len() != lc.domain.len() {
        failures.push("final competence domain differs from dom(R)".to_string());
    }

    let names: Vec<&str> = case.programs.iter().map(|e| e.program).collect();
    let hasse = correctness::hasse(r, &lc.named(&names))?;
    for (a, b) in &case.hasse_edges {
        if !hasse.has_edge(a, b) {
            failures.push(format!("missing Hasse edge {a} -> {b}"));
        }
    }
    let expected_edges = case.hasse_edges.len();
    if hasse.edges.len() != expected_edges {
        failures.push(format!(
            "Hasse diagram has {} edges, expected {expected_edges}",
            hasse.edges.len()
        ));
    }
    for group in &case.hasse_merged {
        let nodes: Vec<Option<usize>> = group.iter().map(|n| hasse.node_of(n)).collect();
        if nodes.windows(2).any(|w| w[0] != w[1]) {
            failures.push(format!("{group:?} are not merged"));
        }
    }

    let d: Distribution<BigRational> = Distribution::uniform(lc.domain.clone());
    let candidates: Vec<Candidate<'_>> = case
        .chain
        .iter()
        .map(|n| Candidate {
            program: lc.program(n).expect("extracted"),
            function: lc.function(n).expect("extracted"),
        })
        .collect();
    let reliability =
        reliability::chain_report(&lc.spec, &candidates, &d, opts.samples, opts.seed, opts.fuel)?;
    if !reliability.monotone {
        failures.push("exact reliability is not monotone along the chain".to_string());
    }
    let ends = (
        reliability.entries.first().map(|e| e.exact),
        reliability.entries.last().map(|e| e.exact),
    );
    if ends != (Some(0.0), Some(1.0)) {
        failures.push(format!("reliability endpoints are {ends:?}"));
    }

    Ok(CaseReport {
        case: case.name.to_string(),
        states: sp.cardinality(),
        domain_claim: describe_verdict(&lc.domain_verdict),
        domain_size: lc.domain.len(),
        programs,
        chain: chain.names.clone(),
        verdicts: chain.verdicts.clone(),
        final_correct: chain.final_correct,
        hasse,
        reliability,
        failures,
    })
}

/// Replay the named cases (`"all"` for every case) into one report.
pub fn run(names: &[&str], opts: &ReplayOptions) -> Result<CorpusReport> {
    let mut list: Vec<&str> = Vec::new();
    for n in names {
        if *n == "all" {
            list.extend(CASE_NAMES);
        } else {
            list.push(n);
        }
    }
    let cases = list
        .into_iter()
        .map(|n| replay(n, opts))
        .collect::<Result<Vec<_>>>()?;
    let passed = cases.iter().all(CaseReport::passed);
    Ok(CorpusReport {
        options: *opts,
        cases,
        passed,
    })
}
