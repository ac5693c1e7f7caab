//! A small imperative language and function extraction.
//!
//! ```text
//! prog p1 on Fermat local r: -1000..20000; {
//!     x = 0; y = 0; r = 0;
//!     while (r < n) { r = r + 2*x + 1; x = x + 1; }
//! }
//! ```
//!
//! Execution explores every `either`/`or` branch. A path terminates (its
//! final state is recorded), aborts, hits a runtime error (an assignment
//! outside the target's declared range, a failed evaluation) or runs out of
//! fuel. Only terminating paths contribute to the program's function, which
//! treats divergence and errors as absence from the domain.
//!
//! [`ProgramDef::extract_function`] does not run the program once per state.
//! It starts with every input variable unknown and only splits on a variable
//! when some path actually reads its initial value; variables a path never
//! reads before overwriting are carried through symbolically.

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::relalg::{RelError, Relation};
use crate::space::{Space, State};
use crate::syntax::{
    Env, EvalError, Evaluator, Expr, ParseError, ParseErrorKind, Parser, Pos, Scope,
};

/// Statement steps allowed per path unless overridden.
pub const DEFAULT_FUEL: u64 = 100_000;

/// Forks allowed per initial state (or per class of initial states).
pub const FORK_CAP: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalDecl {
    pub name: String,
    pub lo: i64,
    pub hi: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    State(usize),
    Local(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Assign { target: Target, value: Expr },
    If { cond: Expr, then: Vec<Stmt>, els: Vec<Stmt> },
    While { cond: Expr, body: Vec<Stmt> },
    Either { left: Vec<Stmt>, right: Vec<Stmt> },
    Skip,
    Abort,
}

#[derive(Debug, Clone)]
pub struct ProgramDef {
    name: String,
    space: Space,
    locals: Vec<LocalDecl>,
    body: Vec<Stmt>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExecError {
    #[error("more than {FORK_CAP} forks from one initial state")]
    PathExplosion,
    #[error("fuel must be positive")]
    ZeroFuel,
    #[error(transparent)]
    Relation(#[from] RelError),
}

/// Result of running a program from one initial state.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExecOutcome {
    /// Distinct final states of terminating paths, in index order.
    pub finals: Vec<State>,
    pub fuel_exhausted_paths: u64,
    pub runtime_error_paths: u64,
    pub abort_paths: u64,
}

/// A program's function with aggregate diagnostics.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub relation: Relation,
    pub fuel_exhausted_paths: u64,
    pub runtime_error_paths: u64,
    pub abort_paths: u64,
    /// Initial states with at least one fuel-exhausted path.
    pub divergent_states: u64,
    /// Number of distinct executions needed.
    pub runs: usize,
}

/// Parse `prog NAME on SPACE [local x: lo..hi;]* { ... }` against `space`.
pub fn parse_prog(text: &str, space: &Space) -> Result<ProgramDef, ParseError> {
    let mut p = Parser::new(text)?;
    let prog = p.prog_decl(|name| (name == space.name()).then(|| space.clone()))?;
    p.expect_end()?;
    Ok(prog)
}

impl Parser {
    pub(crate) fn prog_decl(
        &mut self,
        lookup: impl Fn(&str) -> Option<Space>,
    ) -> Result<ProgramDef, ParseError> {
        self.expect_kw("prog")?;
        let name = self.ident()?;
        self.expect_kw("on")?;
        let pos = self.pos();
        let space_name = self.ident()?;
        let space = lookup(&space_name).ok_or(ParseError {
            pos,
            kind: ParseErrorKind::UnknownSpace(space_name),
        })?;
        let mut locals: Vec<LocalDecl> = Vec::new();
        while self.eat_kw("local") {
            let pos = self.pos();
            let lname = self.binder()?;
            if space.var_index(&lname).is_some() || locals.iter().any(|l| l.name == lname) {
                return Err(ParseError {
                    pos,
                    kind: ParseErrorKind::DuplicateVariable(lname),
                });
            }
            self.expect_sym(":")?;
            let (lo, hi) = self.range()?;
            self.expect_sym(";")?;
            locals.push(LocalDecl { name: lname, lo, hi });
        }
        let names: Vec<String> = locals.iter().map(|l| l.name.clone()).collect();
        let mut scope = Scope::new(&space);
        scope.locals = &names;
        let body = self.block(&mut scope)?;
        Ok(ProgramDef {
            name,
            space: space.clone(),
            locals,
            body,
        })
    }

    fn block(&mut self, scope: &mut Scope<'_>) -> Result<Vec<Stmt>, ParseError> {
        self.expect_sym("{")?;
        let mut out = Vec::new();
        while !self.eat_sym("}") {
            out.push(self.stmt(scope)?);
        }
        Ok(out)
    }

    fn stmt(&mut self, scope: &mut Scope<'_>) -> Result<Stmt, ParseError> {
        if self.eat_kw("skip") {
            self.expect_sym(";")?;
            return Ok(Stmt::Skip);
        }
        if self.eat_kw("abort") {
            self.expect_sym(";")?;
            return Ok(Stmt::Abort);
        }
        if self.eat_kw("if") {
            self.expect_sym("(")?;
            let cond = self.pred(scope)?;
            self.expect_sym(")")?;
            let then = self.block(scope)?;
            let els = if self.eat_kw("else") {
                if self.is_kw("if") {
                    vec![self.stmt(scope)?]
                } else {
                    self.block(scope)?
                }
            } else {
                Vec::new()
            };
            return Ok(Stmt::If { cond, then, els });
        }
        if self.eat_kw("while") {
            self.expect_sym("(")?;
            let cond = self.pred(scope)?;
            self.expect_sym(")")?;
            let body = self.block(scope)?;
            return Ok(Stmt::While { cond, body });
        }
        if self.eat_kw("either") {
            let left = self.block(scope)?;
            self.expect_kw("or")?;
            let right = self.block(scope)?;
            return Ok(Stmt::Either { left, right });
        }
        let pos = self.pos();
        let name = self.ident()?;
        let target = self.target(pos, name, scope)?;
        self.expect_sym("=")?;
        let value = self.expr(scope)?;
        self.expect_sym(";")?;
        Ok(Stmt::Assign { target, value })
    }

    fn target(&self, pos: Pos, name: String, scope: &Scope<'_>) -> Result<Target, ParseError> {
        if let Some(i) = scope.locals.iter().position(|l| *l == name) {
            return Ok(Target::Local(i));
        }
        match scope.space.var_index(&name) {
            Some(i) if scope.space.vars()[i].domain.is_seq() => Err(ParseError {
                pos,
                kind: ParseErrorKind::WriteToSequence(name),
            }),
            Some(i) => Ok(Target::State(i)),
            None => Err(ParseError {
                pos,
                kind: ParseErrorKind::UndeclaredLocal(name),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cell {
    /// Still holds the initial value.
    Input,
    Val(i64),
    Uninit,
}

struct ExecEnv<'a> {
    space: &'a Space,
    /// Initial ordinals; `None` where the class leaves a variable open.
    input: &'a [Option<u64>],
    cells: &'a [Cell],
}

impl ExecEnv<'_> {
    fn input_ordinal(&self, var: usize) -> Result<u64, EvalError> {
        self.input[var].ok_or(EvalError::NeedsInput(var))
    }
}

impl Env for ExecEnv<'_> {
    fn scalar(&self, var: usize, _primed: bool) -> Result<i64, EvalError> {
        match self.cells[var] {
            Cell::Val(v) => Ok(v),
            Cell::Input => {
                let ord = self.input_ordinal(var)?;
                Ok(self.space.vars()[var].domain.scalar_at(ord))
            }
            Cell::Uninit => Err(EvalError::Uninitialized),
        }
    }

    fn seq_len(&self, var: usize, _primed: bool) -> Result<i64, EvalError> {
        let ord = self.input_ordinal(var)?;
        Ok(self.space.vars()[var].domain.seq_len_at(ord) as i64)
    }

    fn seq_at(&self, var: usize, _primed: bool, i: i64) -> Result<i64, EvalError> {
        let ord = self.input_ordinal(var)?;
        let i = usize::try_from(i).map_err(|_| EvalError::IndexOutOfBounds)?;
        self.space.vars()[var]
            .domain
            .seq_char_at(ord, i)
            .ok_or(EvalError::IndexOutOfBounds)
    }

    fn local(&self, index: usize) -> Result<i64, EvalError> {
        match self.cells[self.space.vars().len() + index] {
            Cell::Val(v) => Ok(v),
            _ => Err(EvalError::Uninitialized),
        }
    }
}

#[derive(Clone)]
struct Path<'p> {
    cells: Vec<Cell>,
    stack: Vec<(&'p [Stmt], usize)>,
    steps: u64,
}

/// Outcome of one run over a class of initial states. A `None` in a final
/// state means the variable still holds its initial value.
#[derive(Debug, Default)]
struct ClassOutcome {
    finals: Vec<Vec<Option<i64>>>,
    fuel_exhausted: u64,
    runtime_errors: u64,
    aborts: u64,
}

enum RunError {
    NeedsInput(usize),
    Exec(ExecError),
}

impl ProgramDef {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn locals(&self) -> &[LocalDecl] {
        &self.locals
    }

    pub fn body(&self) -> &[Stmt] {
        &self.body
    }

    /// Whether the program contains an `either`/`or` choice.
    pub fn has_choice(&self) -> bool {
        fn any(stmts: &[Stmt]) -> bool {
            stmts.iter().any(|s| match s {
                Stmt::Either { .. } => true,
                Stmt::If { then, els, .. } => any(then) || any(els),
                Stmt::While { body, .. } => any(body),
                _ => false,
            })
        }
        any(&self.body)
    }

    fn in_range(&self, target: Target, v: i64) -> bool {
        match target {
            Target::State(i) => self.space.vars()[i].domain.ordinal_of_scalar(v).is_some(),
            Target::Local(i) => {
                let l = &self.locals[i];
                l.lo <= v && v <= l.hi
            }
        }
    }

    fn run(&self, input: &[Option<u64>], fuel: u64) -> Result<ClassOutcome, RunError> {
        let nvars = self.space.vars().len();
        let mut cells = vec![Cell::Input; nvars];
        cells.extend(std::iter::repeat(Cell::Uninit).take(self.locals.len()));
        let mut work = vec![Path {
            cells,
            stack: vec![(&self.body[..], 0)],
            steps: 0,
        }];
        let mut out = ClassOutcome::default();
        let mut forks = 0u64;
        let symbols = self.space.symbols();

        'paths: while let Some(mut path) = work.pop() {
            loop {
                let Some((block, i)) = path.stack.pop() else {
                    let fin: Vec<Option<i64>> = path.cells[..nvars]
                        .iter()
                        .map(|c| match c {
                            Cell::Val(v) => Some(*v),
                            _ => None,
                        })
                        .collect();
                    if !out.finals.contains(&fin) {
                        out.finals.push(fin);
                    }
                    continue 'paths;
                };
                if i >= block.len() {
                    continue;
                }
                if i + 1 < block.len() {
                    path.stack.push((block, i + 1));
                }
                if path.steps >= fuel {
                    out.fuel_exhausted += 1;
                    continue 'paths;
                }
                path.steps += 1;
                let stmt = &block[i];
                let env = ExecEnv {
                    space: &self.space,
                    input,
                    cells: &path.cells,
                };
                let mut ev = Evaluator::new(&env, symbols);
                let cond = |r: Result<bool, EvalError>| match r {
                    Err(EvalError::NeedsInput(v)) => Err(RunError::NeedsInput(v)),
                    other => Ok(other.ok()),
                };
                match stmt {
                    Stmt::Skip => {}
                    Stmt::Abort => {
                        out.aborts += 1;
                        continue 'paths;
                    }
                    Stmt::Assign { target, value } => match ev.int(value) {
                        Err(EvalError::NeedsInput(v)) => return Err(RunError::NeedsInput(v)),
                        Ok(v) if self.in_range(*target, v) => {
                            let slot = match target {
                                Target::State(k) => *k,
                                Target::Local(k) => nvars + k,
                            };
                            path.cells[slot] = Cell::Val(v);
                        }
                        _ => {
                            out.runtime_errors += 1;
                            continue 'paths;
                        }
                    },
                    Stmt::If { cond: c, then, els } => match cond(ev.bool(c))? {
                        Some(true) => path.stack.push((then, 0)),
                        Some(false) => path.stack.push((els, 0)),
                        None => {
                            out.runtime_errors += 1;
                            continue 'paths;
                        }
                    },
                    Stmt::While { cond: c, body } => match cond(ev.bool(c))? {
                        Some(true) => {
                            path.stack.push((std::slice::from_ref(stmt), 0));
                            path.stack.push((body, 0));
                        }
                        Some(false) => {}
                        None => {
                            out.runtime_errors += 1;
                            continue 'paths;
                        }
                    },
                    Stmt::Either { left, right } => {
                        forks += 1;
                        if forks > FORK_CAP {
                            return Err(RunError::Exec(ExecError::PathExplosion));
                        }
                        let mut other = path.clone();
                        other.stack.push((right, 0));
                        work.push(other);
                        path.stack.push((left, 0));
                    }
                }
            }
        }
        Ok(out)
    }

    fn final_index(&self, initial: usize, fin: &[Option<i64>]) -> usize {
        let sp = &self.space;
        let mut idx = 0u64;
        for (var, v) in fin.iter().enumerate() {
            let ord = match v {
                Some(v) => sp.vars()[var]
                    .domain
                    .ordinal_of_scalar(*v)
                    .expect("assignments are range-checked"),
                None => sp.ordinal(initial, var),
            };
            idx += ord * sp.stride(var);
        }
        idx as usize
    }

    /// Run from `s`, exploring every nondeterministic branch.
    pub fn exec(&self, s: &State, fuel: u64) -> Result<ExecOutcome, ExecError> {
        if fuel == 0 {
            return Err(ExecError::ZeroFuel);
        }
        let idx = self
            .space
            .index(s)
            .map_err(|e| ExecError::Relation(e.into()))? as usize;
        self.exec_index(idx, fuel)
    }

    pub(crate) fn exec_index(&self, idx: usize, fuel: u64) -> Result<ExecOutcome, ExecError> {
        let input: Vec<Option<u64>> = (0..self.space.vars().len())
            .map(|v| Some(self.space.ordinal(idx, v)))
            .collect();
        let o = match self.run(&input, fuel) {
            Ok(o) => o,
            Err(RunError::Exec(e)) => return Err(e),
            Err(RunError::NeedsInput(_)) => unreachable!("all inputs are fixed"),
        };
        let mut finals: Vec<usize> = o.finals.iter().map(|f| self.final_index(idx, f)).collect();
        finals.sort_unstable();
        finals.dedup();
        Ok(ExecOutcome {
            finals: finals
                .into_iter()
                .map(|i| self.space.state_at(i as u64).expect("in range"))
                .collect(),
            fuel_exhausted_paths: o.fuel_exhausted,
            runtime_error_paths: o.runtime_errors,
            abort_paths: o.aborts,
        })
    }

    fn classes(
        &self,
        input: Vec<Option<u64>>,
        fuel: u64,
    ) -> Result<Vec<(Vec<Option<u64>>, ClassOutcome)>, ExecError> {
        match self.run(&input, fuel) {
            Ok(o) => Ok(vec![(input, o)]),
            Err(RunError::Exec(e)) => Err(e),
            Err(RunError::NeedsInput(v)) => {
                let parts = (0..self.space.radix(v))
                    .into_par_iter()
                    .map(|ord| {
                        let mut next = input.clone();
                        next[v] = Some(ord);
                        self.classes(next, fuel)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(parts.into_iter().flatten().collect())
            }
        }
    }

    /// The program's function `{(s, s′) | s′ is a final state of a terminating run from s}`.
    pub fn extract_function(&self, fuel: u64) -> Result<Extraction, ExecError> {
        if fuel == 0 {
            return Err(ExecError::ZeroFuel);
        }
        let sp = &self.space;
        if !sp.materializable() {
            return Err(RelError::CapExceeded {
                space: sp.name().to_string(),
                cardinality: sp.cardinality(),
                cap: sp.materialization_cap(),
            }
            .into());
        }
        let classes = self.classes(vec![None; sp.vars().len()], fuel)?;

        struct Part {
            pairs: Vec<(usize, usize)>,
            size: u64,
            fuel: u64,
            errors: u64,
            aborts: u64,
        }
        let parts: Vec<Part> = classes
            .par_iter()
            .map(|(input, outcome)| {
                let open: Vec<usize> = (0..input.len()).filter(|&v| input[v].is_none()).collect();
                let base: u64 = input
                    .iter()
                    .enumerate()
                    .map(|(v, o)| o.unwrap_or(0) * sp.stride(v))
                    .sum();
                let size: u64 = open.iter().map(|&v| sp.radix(v)).product();
                let mut pairs = Vec::with_capacity(size as usize * outcome.finals.len());
                for k in 0..size {
                    let mut rest = k;
                    let mut s = base;
                    for &v in open.iter().rev() {
                        s += (rest % sp.radix(v)) * sp.stride(v);
                        rest /= sp.radix(v);
                    }
                    for f in &outcome.finals {
                        pairs.push((s as usize, self.final_index(s as usize, f)));
                    }
                }
                Part {
                    pairs,
                    size,
                    fuel: outcome.fuel_exhausted,
                    errors: outcome.runtime_errors,
                    aborts: outcome.aborts,
                }
            })
            .collect();

        let mut ex = Extraction {
            relation: Relation::empty(sp),
            fuel_exhausted_paths: 0,
            runtime_error_paths: 0,
            abort_paths: 0,
            divergent_states: 0,
            runs: parts.len(),
        };
        let mut all = Vec::with_capacity(parts.iter().map(|p| p.pairs.len()).sum());
        for p in parts {
            ex.fuel_exhausted_paths += p.fuel * p.size;
            ex.runtime_error_paths += p.errors * p.size;
            ex.abort_paths += p.aborts * p.size;
            if p.fuel > 0 {
                ex.divergent_states += p.size;
            }
            all.extend(p.pairs);
        }
        ex.relation = Relation::from_pairs(sp, all)?;
        Ok(ex)
    }

    /// Whether every initial state has at most one final state.
    pub fn is_deterministic_prog(&self, fuel: u64) -> Result<bool, ExecError> {
        Ok(self.extract_function(fuel)?.relation.is_deterministic()?)
    }
}

impl fmt::Display for ProgramDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn block(
            f: &mut fmt::Formatter<'_>,
            p: &ProgramDef,
            stmts: &[Stmt],
            depth: usize,
        ) -> fmt::Result {
            writeln!(f, "{{")?;
            for s in stmts {
                write!(f, "{:width$}", "", width = (depth + 1) * 4)?;
                match s {
                    Stmt::Skip => writeln!(f, "skip;")?,
                    Stmt::Abort => writeln!(f, "abort;")?,
                    Stmt::Assign { target, value } => {
                        let name = match target {
                            Target::State(i) => &p.space.vars()[*i].name,
                            Target::Local(i) => &p.locals[*i].name,
                        };
                        writeln!(f, "{name} = {value};")?
                    }
                    Stmt::If { cond, then, els } => {
                        write!(f, "if ({cond}) ")?;
                        block(f, p, then, depth + 1)?;
                        if !els.is_empty() {
                            write!(f, "{:width$}else ", "", width = (depth + 1) * 4)?;
                            block(f, p, els, depth + 1)?;
                        }
                    }
                    Stmt::While { cond, body } => {
                        write!(f, "while ({cond}) ")?;
                        block(f, p, body, depth + 1)?;
                    }
                    Stmt::Either { left, right } => {
                        write!(f, "either ")?;
                        block(f, p, left, depth + 1)?;
                        write!(f, "{:width$}or ", "", width = (depth + 1) * 4)?;
                        block(f, p, right, depth + 1)?;
                    }
                }
            }
            writeln!(f, "{:width$}}}", "", width = depth * 4)
        }
        write!(f, "prog {} on {}", self.name, self.space.name())?;
        for l in &self.locals {
            write!(f, " local {}: {}..{};", l.name, l.lo, l.hi)?;
        }
        write!(f, " ")?;
        block(f, self, &self.body, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{parse_space, Value};

    fn cube() -> Space {
        parse_space("space T { s: int 0..125; }").unwrap()
    }

    #[test]
    fn parses_basic_programs() {
        let t = cube();
        parse_prog("prog p4 on T { skip; }", &t).unwrap();
        parse_prog("prog p0 on T { abort; }", &t).unwrap();
        let xy = parse_space("space XY { x: int -8..8; y: int -8..8; }").unwrap();
        parse_prog("prog p on XY { while (y != 0) { x = x + 1; y = y - 1; } }", &xy).unwrap();
    }

    #[test]
    fn parse_errors() {
        let sp = parse_space(r#"space S { n: int 0..3; q: seq over "ab" maxlen 2; }"#).unwrap();
        let kind = |t: &str| parse_prog(t, &sp).unwrap_err().kind;
        assert!(matches!(kind("prog p on S { q = 1; }"), ParseErrorKind::WriteToSequence(_)));
        assert!(matches!(kind("prog p on S { r = 1; }"), ParseErrorKind::UndeclaredLocal(_)));
        assert!(matches!(kind("prog p on S { n = m; }"), ParseErrorKind::UnknownVariable(_)));
        assert!(matches!(kind("prog p on S { n = n' ; }"), ParseErrorKind::PrimedNotAllowed(_)));
        assert!(matches!(
            kind("prog p on S local n: 0..1; { skip; }"),
            ParseErrorKind::DuplicateVariable(_)
        ));
        assert!(matches!(kind("prog p on S { skip }"), ParseErrorKind::Syntax(_)));
        assert!(matches!(kind("prog p on S local r: 2..1; { skip; }"), ParseErrorKind::EmptyRange(..)));
    }

    #[test]
    fn abort_has_no_final_state() {
        let t = cube();
        let p = parse_prog("prog p0 on T { abort; }", &t).unwrap();
        let out = p.exec(&t.state_at(3).unwrap(), 10).unwrap();
        assert!(out.finals.is_empty());
        assert_eq!(out.abort_paths, 1);
        assert!(p.is_deterministic_prog(10).unwrap());
    }

    #[test]
    fn skip_extracts_identity() {
        let t = cube();
        let p = parse_prog("prog p4 on T { skip; }", &t).unwrap();
        let ex = p.extract_function(DEFAULT_FUEL).unwrap();
        assert!(ex.relation.equals(&Relation::identity(&t)).unwrap());
        assert_eq!(ex.runs, 1);
    }

    #[test]
    fn square_truncates_at_bound() {
        let t = cube();
        let p = parse_prog("prog p7 on T { s = s**2; }", &t).unwrap();
        let ex = p.extract_function(DEFAULT_FUEL).unwrap();
        let want = Relation::from_pairs(&t, (0..=11).map(|s| (s, s * s))).unwrap();
        assert!(ex.relation.equals(&want).unwrap());
        assert_eq!(ex.runtime_error_paths, 126 - 12);
    }

    #[test]
    fn choice_is_nondeterministic() {
        let sp = parse_space("space X { x: int 0..3; }").unwrap();
        let p = parse_prog("prog c on X { either { x = 0; } or { x = 1; } }", &sp).unwrap();
        assert!(p.has_choice());
        let out = p.exec(&sp.state_at(2).unwrap(), 10).unwrap();
        assert_eq!(out.finals.len(), 2);
        assert!(!p.is_deterministic_prog(10).unwrap());
    }

    #[test]
    fn mixed_divergence_keeps_terminating_outcomes() {
        let sp = parse_space("space X { x: int 0..3; }").unwrap();
        let p = parse_prog(
            "prog c on X { either { while (true) { skip; } } or { x = 1; } }",
            &sp,
        )
        .unwrap();
        let out = p.exec(&sp.state_at(0).unwrap(), 50).unwrap();
        assert_eq!(out.finals, vec![sp.state_at(1).unwrap()]);
        assert_eq!(out.fuel_exhausted_paths, 1);
        let ex = p.extract_function(50).unwrap();
        assert_eq!(ex.divergent_states, 4);
        assert_eq!(ex.relation.pair_count(), 4);
    }

    #[test]
    fn fork_cap() {
        let sp = parse_space("space X { x: int 0..1; }").unwrap();
        let p = parse_prog(
            "prog c on X local i: 0..20; { i = 0; while (i < 17) { either { skip; } or { skip; } i = i + 1; } }",
            &sp,
        )
        .unwrap();
        assert_eq!(p.extract_function(DEFAULT_FUEL).unwrap_err(), ExecError::PathExplosion);
    }

    #[test]
    fn uninitialized_local_is_a_runtime_error() {
        let sp = parse_space("space X { x: int 0..3; }").unwrap();
        let p = parse_prog("prog u on X local r: 0..3; { x = r; }", &sp).unwrap();
        let out = p.exec(&sp.state_at(0).unwrap(), 10).unwrap();
        assert!(out.finals.is_empty());
        assert_eq!(out.runtime_error_paths, 1);
    }

    #[test]
    fn sequences_and_characters() {
        let sp = parse_space(
            r#"space S { q: seq over "aB1" maxlen 2; up: int 0..2; }"#,
        )
        .unwrap();
        let p = parse_prog(
            "prog u on S local i: 0..3; local c: 0..255; { up = 0; i = 0; \
             while (i < len(q)) { c = q[i]; i = i + 1; if (isupper(c)) { up = up + 1; } } }",
            &sp,
        )
        .unwrap();
        let ex = p.extract_function(DEFAULT_FUEL).unwrap();
        // `up` is overwritten before it is read: one run per sequence.
        assert_eq!(ex.runs, 13);
        let s = sp
            .state(&[("q", Value::Seq(vec!['B', 'B'])), ("up", Value::Int(0))])
            .unwrap();
        let out = p.exec(&s, 100).unwrap();
        assert_eq!(out.finals[0].get(1), &Value::Int(2));
    }

    #[test]
    fn fuel_is_monotone() {
        let sp = parse_space("space X { x: int 0..20; y: int 0..20; }").unwrap();
        let p = parse_prog("prog l on X { while (y > 0) { x = x + 1; y = y - 1; } }", &sp).unwrap();
        let small = p.extract_function(10).unwrap().relation;
        let large = p.extract_function(1000).unwrap().relation;
        let larger = p.extract_function(2000).unwrap().relation;
        assert!(small.is_subset(&large).unwrap());
        assert!(large.equals(&larger).unwrap());
    }

    #[test]
    fn display_reparses() {
        let sp = parse_space("space X { x: int 0..20; y: int 0..20; }").unwrap();
        let p = parse_prog(
            "prog l on X local t: 0..5; { t = 0; if (x > 1) { x = 0; } else if (y > 1) { y = 0; } \
             while (y > 0) { either { y = y - 1; } or { abort; } } }",
            &sp,
        )
        .unwrap();
        let again = parse_prog(&p.to_string(), &sp).unwrap();
        assert_eq!(again.body(), p.body());
    }
}
