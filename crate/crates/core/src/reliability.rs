//! Reliability of a program with respect to a specification and a usage
//! distribution on the specification's domain.
//!
//! Exact reliability is the measure of the competence domain and is generic
//! over the probability type: `f64`/`f32` for speed, `BigRational` when the
//! answer must be exact. Monte Carlo estimates are always `f64`.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::correctness::{self, CorrectnessError, NamedRelation, Verdict};
use crate::minilang::{ExecError, ProgramDef};
use crate::relalg::{RelError, Relation};
use crate::rng;
use crate::space::{Space, StateSet};
use crate::speclang::SpecDef;

/// Draws allowed per sample before rejection sampling gives up.
pub const RETRY_CAP: u32 = 10_000;

/// Tolerance on the total weight before renormalization is reported.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReliabilityError {
    #[error(transparent)]
    Relation(#[from] RelError),
    #[error(transparent)]
    Correctness(#[from] CorrectnessError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("state {0} carries weight but is outside the specification's domain")]
    SupportMismatch(usize),
    #[error("weight for state {0} is negative")]
    NegativeWeight(usize),
    #[error("state index {index} is out of range for a space of {cardinality} states")]
    IndexOutOfRange { index: usize, cardinality: usize },
    #[error("weights sum to zero")]
    ZeroMass,
    #[error("line {line}: {message}")]
    WeightsFile { line: usize, message: String },
    #[error("sample count must be positive")]
    NoSamples,
    #[error("no state of the domain drawn within {RETRY_CAP} tries")]
    RetryCapExceeded,
}

type Result<T> = std::result::Result<T, ReliabilityError>;

/// Number types usable as probabilities.
pub trait Probability:
    Num + Clone + PartialOrd + FromPrimitive + ToPrimitive + fmt::Display + fmt::Debug + Send + Sync
{
    /// `num / den`, exact where the type allows.
    fn ratio(num: u64, den: u64) -> Self;

    /// Parse a weight written as a decimal or as `a/b`.
    fn parse_weight(text: &str) -> Option<Self>;

    /// Whether `self` is 1 within the type's natural tolerance.
    fn is_unit(&self) -> bool;
}

fn split_fraction(text: &str) -> Option<(&str, &str)> {
    let (a, b) = text.split_once('/')?;
    Some((a.trim(), b.trim()))
}

macro_rules! float_probability {
    ($t:ty) => {
        impl Probability for $t {
            fn ratio(num: u64, den: u64) -> Self {
                (num as f64 / den as f64) as $t
            }

            fn parse_weight(text: &str) -> Option<Self> {
                let v = match split_fraction(text) {
                    Some((a, b)) => a.parse::<$t>().ok()? / b.parse::<$t>().ok()?,
                    None => text.parse::<$t>().ok()?,
                };
                v.is_finite().then_some(v)
            }

            fn is_unit(&self) -> bool {
                ((*self as f64) - 1.0).abs() <= NORMALIZATION_TOLERANCE.max(<$t>::EPSILON as f64 * 4.0)
            }
        }
    };
}

float_probability!(f32);
float_probability!(f64);

fn parse_decimal(text: &str) -> Option<BigRational> {
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    let v = BigRational::new(numer, denom);
    Some(if neg { -v } else { v })
}

impl Probability for BigRational {
    fn ratio(num: u64, den: u64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn parse_weight(text: &str) -> Option<Self> {
        match split_fraction(text) {
            Some((a, b)) => {
                let a = parse_decimal(a)?;
                let b = parse_decimal(b)?;
                (!b.is_zero()).then(|| a / b)
            }
            None => parse_decimal(text),
        }
    }

    fn is_unit(&self) -> bool {
        self.is_one()
    }
}

#[derive(Debug, Clone)]
enum Weights<T> {
    Uniform,
    /// Normalized weights of the states carrying mass, by state index.
    Explicit {
        entries: Vec<(usize, T)>,
        cumulative: Vec<f64>,
    },
}

/// A probability distribution on the domain of a specification.
#[derive(Debug, Clone)]
pub struct Distribution<T> {
    support: StateSet,
    weights: Weights<T>,
}

impl<T: Probability> Distribution<T> {
    /// Uniform over `support`.
    pub fn uniform(support: StateSet) -> Self {
        Distribution {
            support,
            weights: Weights::Uniform,
        }
    }

    /// Weighted distribution on `support`. Repeated indices accumulate;
    /// weights are normalized, with a warning if they do not already sum to 1.
    pub fn from_weights(
        support: StateSet,
        weights: impl IntoIterator<Item = (usize, T)>,
    ) -> Result<Self> {
        let n = support.space().len();
        let mut entries: Vec<(usize, T)> = Vec::new();
        for (i, w) in weights {
            if i >= n {
                return Err(ReliabilityError::IndexOutOfRange {
                    index: i,
                    cardinality: n,
                });
            }
            if w < T::zero() {
                return Err(ReliabilityError::NegativeWeight(i));
            }
            if w.is_zero() {
                continue;
            }
            if !support.contains(i) {
                return Err(ReliabilityError::SupportMismatch(i));
            }
            entries.push((i, w));
        }
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, T)> = Vec::with_capacity(entries.len());
        for (i, w) in entries {
            match merged.last_mut() {
                Some((j, acc)) if *j == i => *acc = acc.clone() + w,
                _ => merged.push((i, w)),
            }
        }
        let total = merged.iter().fold(T::zero(), |acc, (_, w)| acc + w.clone());
        if total.is_zero() {
            return Err(ReliabilityError::ZeroMass);
        }
        if !total.is_unit() {
            log::warn!("weights sum to {total}; normalizing");
        }
        let entries: Vec<(usize, T)> = merged
            .into_iter()
            .map(|(i, w)| (i, w / total.clone()))
            .collect();
        let mut acc = 0.0;
        let cumulative = entries
            .iter()
            .map(|(_, w)| {
                acc += w.to_f64().unwrap_or(0.0);
                acc
            })
            .collect();
        Ok(Distribution {
            support,
            weights: Weights::Explicit {
                entries,
                cumulative,
            },
        })
    }

    /// Parse a weights file: one `state-index weight` pair per line, `#`
    /// starting a comment.
    pub fn parse_weights(support: StateSet, text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: &str| ReliabilityError::WeightsFile {
                line: k + 1,
                message: message.to_string(),
            };
            let mut fields = line.split_whitespace();
            let (Some(idx), Some(w), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(err("expected `state-index weight`"));
            };
            let idx: usize = idx.parse().map_err(|_| err("bad state index"))?;
            let w = T::parse_weight(w).ok_or_else(|| err("bad weight"))?;
            pairs.push((idx, w));
        }
        Distribution::from_weights(support, pairs)
    }

    pub fn support(&self) -> &StateSet {
        &self.support
    }

    pub fn space(&self) -> &Space {
        self.support.space()
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.weights, Weights::Uniform)
    }

    /// Probability of state `s`.
    pub fn weight(&self, s: usize) -> T {
        match &self.weights {
            Weights::Uniform if self.support.contains(s) => T::ratio(1, self.support.len() as u64),
            Weights::Uniform => T::zero(),
            Weights::Explicit { entries, .. } => entries
                .binary_search_by_key(&s, |e| e.0)
                .map(|k| entries[k].1.clone())
                .unwrap_or_else(|_| T::zero()),
        }
    }

    /// Probability of `set`.
    pub fn measure(&self, set: &StateSet) -> T {
        match &self.weights {
            Weights::Uniform => {
                let hit = set.iter().filter(|&s| self.support.contains(s)).count();
                T::ratio(hit as u64, self.support.len() as u64)
            }
            Weights::Explicit { entries, .. } => entries
                .iter()
                .filter(|(s, _)| set.contains(*s))
                .fold(T::zero(), |acc, (_, w)| acc + w.clone()),
        }
    }

    /// Draw one state. Uniform distributions draw from the whole space and
    /// reject states outside the support.
    pub fn sample(&self, rng: &mut impl Rng) -> Result<usize> {
        match &self.weights {
            Weights::Uniform => {
                if self.support.is_empty() {
                    return Err(ReliabilityError::ZeroMass);
                }
                let n = self.space().len() as u64;
                for _ in 0..RETRY_CAP {
                    let s = rng.random_range(0..n) as usize;
                    if self.support.contains(s) {
                        return Ok(s);
                    }
                }
                Err(ReliabilityError::RetryCapExceeded)
            }
            Weights::Explicit {
                entries,
                cumulative,
            } => {
                let total = cumulative.last().copied().unwrap_or(0.0);
                let u = rng.random::<f64>() * total;
                let k = cumulative.partition_point(|&c| c <= u).min(entries.len() - 1);
                Ok(entries[k].0)
            }
        }
    }
}

fn check_support<T: Probability>(r: &Relation, d: &Distribution<T>) -> Result<()> {
    r.space().check_same(d.space()).map_err(RelError::from)?;
    let states: Vec<usize> = match &d.weights {
        Weights::Uniform => d.support.iter().collect(),
        Weights::Explicit { entries, .. } => entries.iter().map(|e| e.0).collect(),
    };
    match states.into_par_iter().find_first(|&s| !r.has_image(s)) {
        Some(s) => Err(ReliabilityError::SupportMismatch(s)),
        None => Ok(()),
    }
}

/// Probability that `p` delivers an outcome allowed by `r` on a state drawn
/// from `d`: the measure of the competence domain.
pub fn exact_reliability<T: Probability>(p: &Relation, r: &Relation, d: &Distribution<T>) -> Result<T> {
    check_support(r, d)?;
    let cd = correctness::competence_domain(p, r)?;
    Ok(d.measure(&cd))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: u64,
    pub successes: u64,
}

impl McEstimate {
    /// Whether `value` lies within `k` standard errors of the estimate. A
    /// zero standard error only admits the estimate itself.
    pub fn within(&self, value: f64, k: f64) -> bool {
        (self.estimate - value).abs() <= k * self.std_error + 1e-12
    }
}

/// Estimate reliability by running `prog` on `n` states drawn from `d`.
///
/// A run succeeds when some final state is allowed by the specification.
/// Sample `i` uses the stream `rng::sample_stream(seed, i)`.
pub fn mc_reliability<T: Probability>(
    prog: &ProgramDef,
    spec: &SpecDef,
    d: &Distribution<T>,
    n: u64,
    seed: u64,
    fuel: u64,
) -> Result<McEstimate> {
    if n == 0 {
        return Err(ReliabilityError::NoSamples);
    }
    let r = spec.as_relation();
    let sp = prog.space();
    let successes = (0..n)
        .into_par_iter()
        .map(|i| -> Result<u64> {
            let mut rng = rng::sample_stream(seed, i);
            let s = d.sample(&mut rng)?;
            let state = sp.state_at(s as u64).expect("sampled index in range");
            let out = prog.exec(&state, fuel)?;
            let ok = out
                .finals
                .iter()
                .any(|t| r.contains(s, sp.index(t).expect("final in space") as usize));
            Ok(ok as u64)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let p = successes as f64 / n as f64;
    Ok(McEstimate {
        estimate: p,
        std_error: (p * (1.0 - p) / n as f64).sqrt(),
        samples: n,
        successes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReliabilityEntry {
    pub program: String,
    pub exact: f64,
    /// The exact value as written by the probability type, e.g. `21/401`.
    pub exact_text: String,
    pub estimate: f64,
    pub std_error: f64,
    pub samples: u64,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReliabilityReport {
    pub spec: String,
    pub seed: u64,
    pub entries: Vec<ReliabilityEntry>,
    /// Verdict of each program against its predecessor.
    pub verdicts: Vec<Verdict>,
    /// Exact reliability never decreases along the chain.
    pub monotone: bool,
    /// Every improving step has nondecreasing exact reliability.
    pub dominance_holds: bool,
    /// The last program has reliability 1 exactly when it is correct.
    pub final_consistent: bool,
}

/// A program together with its extracted function.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub program: &'a ProgramDef,
    pub function: &'a Relation,
}

/// Exact and sampled reliability of each program of a derivation chain.
pub fn chain_report<T: Probability>(
    spec: &SpecDef,
    progs: &[Candidate<'_>],
    d: &Distribution<T>,
    n: u64,
    seed: u64,
    fuel: u64,
) -> Result<ReliabilityReport> {
    let r = spec.as_relation();
    let mut entries = Vec::with_capacity(progs.len());
    let mut exacts: Vec<T> = Vec::with_capacity(progs.len());
    for c in progs {
        let exact = exact_reliability(c.function, &r, d)?;
        let mc = mc_reliability(c.program, spec, d, n, seed, fuel)?;
        entries.push(ReliabilityEntry {
            program: c.program.name().to_string(),
            exact: exact.to_f64().unwrap_or(f64::NAN),
            exact_text: exact.to_string(),
            estimate: mc.estimate,
            std_error: mc.std_error,
            samples: mc.samples,
            correct: correctness::is_correct(c.function, &r)?,
        });
        exacts.push(exact);
    }
    let verdicts = if progs.len() >= 2 {
        let named: Vec<NamedRelation> = progs
            .iter()
            .map(|c| NamedRelation::new(c.program.name(), c.function.clone()))
            .collect();
        correctness::order_chain(&r, &named)?.verdicts
    } else {
        Vec::new()
    };
    let monotone = exacts.windows(2).all(|w| w[0] <= w[1]);
    let dominance_holds = verdicts
        .iter()
        .zip(exacts.windows(2))
        .all(|(v, w)| !v.is_improvement() || w[0] <= w[1]);
    let final_consistent = match (entries.last(), exacts.last()) {
        (Some(e), Some(x)) => e.correct == x.is_unit(),
        _ => true,
    };
    Ok(ReliabilityReport {
        spec: spec.name().to_string(),
        seed,
        entries,
        verdicts,
        monotone,
        dominance_holds,
        final_consistent,
    })
}
