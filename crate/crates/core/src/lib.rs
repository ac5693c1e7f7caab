//! Relational correctness over finite state spaces.
//!
//! Specifications and programs are binary relations on an enumerable state
//! space. Programs are written in a small imperative language and their
//! functions extracted by exhaustive execution; specifications are
//! predicates over pairs of states. On top of that sit refinement, absolute
//! and relative correctness, competence domains, projections and
//! reliability.

pub mod corpus;
pub mod correctness;
pub mod minilang;
pub mod oracle;
pub mod relalg;
pub mod reliability;
pub mod rng;
pub mod space;
pub mod speclang;
pub mod syntax;
pub mod workspace;

use num_rational::BigRational;

pub use correctness::{
    competence_domain, hasse, is_correct, more_correct, more_correct_det, order_chain, projection,
    refines, strictly_more_correct_det, ChainVerdict, CorrectnessError, HasseDiagram,
    NamedRelation, Verdict,
};
pub use minilang::{parse_prog, ExecError, ExecOutcome, Extraction, ProgramDef, DEFAULT_FUEL};
pub use relalg::{PairPredicate, RelError, Relation};
pub use reliability::{
    chain_report, exact_reliability, mc_reliability, Distribution, McEstimate, Probability,
    ReliabilityError, ReliabilityReport,
};
pub use space::{parse_space, Domain, Space, SpaceError, State, StateSet, Value, VarDecl};
pub use speclang::{parse_spec, parse_state_predicate, DomainVerdict, SpecDef, SpecError};
pub use syntax::{Expr, ParseError, ParseErrorKind};
pub use workspace::{Workspace, WorkspaceError};

/// Exact probabilities.
pub type Rational = BigRational;

pub type FloatDistribution = Distribution<f64>;
pub type SingleDistribution = Distribution<f32>;
pub type ExactDistribution = Distribution<Rational>;
