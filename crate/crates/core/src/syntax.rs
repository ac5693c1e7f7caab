//! Lexer, expression language and evaluator shared by the space, spec and
//! program DSLs.
//!
//! Expressions are resolved and type-checked while parsing: identifiers are
//! bound to state variables (primed or not), program locals or quantifier
//! indices, so evaluation never looks names up.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::space::{Domain, Space, SpaceError, VarDecl};

/// Words that cannot be used as variable names.
pub const RESERVED: &[&str] = &[
    "space", "int", "char", "seq", "over", "maxlen", "spec", "on", "domain", "forall",
    "exists", "count", "in", "prog", "local", "if", "else", "while", "either", "or", "skip",
    "abort", "true", "false", "len", "isupper", "islower", "isdigit", "issym", "issq",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("empty range {0}..{1}")]
    EmptyRange(i64, i64),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown space `{0}`")]
    UnknownSpace(String),
    #[error("quantifier index `{0}` cannot be primed")]
    PrimedIndex(String),
    #[error("primed variable `{0}` not allowed here")]
    PrimedNotAllowed(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("cannot assign to sequence variable `{0}`")]
    WriteToSequence(String),
    #[error("assignment to undeclared variable `{0}`")]
    UndeclaredLocal(String),
    #[error("`{0}` is a reserved word")]
    Reserved(String),
    #[error("{0}")]
    Space(#[from] SpaceError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pos}: {kind}")]
pub struct ParseError {
    pub pos: Pos,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Primed(String),
    Int(i64),
    Str(String),
    Char(char),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Primed(s) => write!(f, "`{s}'`"),
            Tok::Int(v) => write!(f, "`{v}`"),
            Tok::Str(s) => write!(f, "{s:?}"),
            Tok::Char(c) => write!(f, "{c:?}"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

const SYMBOLS: &[&str] = &[
    ":=", "..", "==", "!=", "<=", ">=", "&&", "||", "**", "{", "}", "(", ")", "[", "]", ";",
    ":", ",", "=", "<", ">", "+", "-", "*", "/", "%", "!",
];

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |pos: Pos, msg: String| ParseError {
        pos,
        kind: ParseErrorKind::Syntax(msg),
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            if chars.get(i) == Some(&'\'') {
                i += 1;
                out.push((Tok::Primed(word), pos));
            } else {
                out.push((Tok::Ident(word), pos));
            }
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().collect();
            let v = digits
                .parse::<i64>()
                .map_err(|_| err(pos, format!("integer literal {digits} out of range")))?;
            out.push((Tok::Int(v), pos));
        } else if c == '"' {
            i += 1;
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(err(pos, "unterminated string".into())),
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some('\\') => {
                        let e = *chars
                            .get(i + 1)
                            .ok_or_else(|| err(pos, "unterminated string".into()))?;
                        s.push(e);
                        i += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            out.push((Tok::Str(s), pos));
        } else if c == '\'' {
            let (ch, len) = match (chars.get(i + 1), chars.get(i + 2), chars.get(i + 3)) {
                (Some('\\'), Some(&e), Some('\'')) => (e, 4),
                (Some(&ch), Some('\''), _) if ch != '\\' && ch != '\n' => (ch, 3),
                _ => return Err(err(pos, "malformed character literal".into())),
            };
            i += len;
            out.push((Tok::Char(ch), pos));
        } else {
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            let sym = SYMBOLS
                .iter()
                .find(|s| rest.starts_with(**s))
                .ok_or_else(|| err(pos, format!("unexpected character {c:?}")))?;
            i += sym.chars().count();
            out.push((Tok::Sym(sym), pos));
        }
        col += i - start;
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

/// A reference to something an expression can read.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Var {
    State { index: usize, primed: bool, name: String },
    Local { index: usize, name: String },
    /// Quantifier index; `level` counts binders from the outermost one.
    Bound { level: usize, name: String },
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::State { name, primed: true, .. } => write!(f, "{name}'"),
            Var::State { name, .. } | Var::Local { name, .. } | Var::Bound { name, .. } => {
                write!(f, "{name}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LogicOp {
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuantKind {
    Forall,
    Exists,
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CharClass {
    Upper,
    Lower,
    Digit,
    Symbol,
}

/// A resolved, type-checked expression.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Char(char),
    Bool(bool),
    Var(Var),
    Len(Var),
    At(Var, Box<Expr>),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Logic(LogicOp, Box<Expr>, Box<Expr>),
    /// Range elements at which the body indexes outside a sequence are
    /// skipped, so the range is clipped to valid indices.
    Quant {
        kind: QuantKind,
        name: String,
        lo: Box<Expr>,
        hi: Box<Expr>,
        body: Box<Expr>,
    },
    Class(CharClass, Box<Expr>),
    IsSq(Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ty {
    Int,
    Bool,
}

impl Expr {
    pub fn ty(&self) -> Ty {
        match self {
            Expr::Int(_) | Expr::Char(_) | Expr::Var(_) | Expr::Len(_) | Expr::At(..) => Ty::Int,
            Expr::Neg(_) | Expr::Arith(..) => Ty::Int,
            Expr::Quant { kind: QuantKind::Count, .. } => Ty::Int,
            _ => Ty::Bool,
        }
    }

    /// State variables this expression reads, as `(index, primed)`.
    pub fn state_vars(&self) -> BTreeSet<(usize, bool)> {
        let mut out = BTreeSet::new();
        self.collect_state_vars(&mut out);
        out
    }

    fn collect_state_vars(&self, out: &mut BTreeSet<(usize, bool)>) {
        let mut var = |v: &Var| {
            if let Var::State { index, primed, .. } = v {
                out.insert((*index, *primed));
            }
        };
        match self {
            Expr::Int(_) | Expr::Char(_) | Expr::Bool(_) => {}
            Expr::Var(v) | Expr::Len(v) => var(v),
            Expr::At(v, e) => {
                var(v);
                e.collect_state_vars(out);
            }
            Expr::Neg(e) | Expr::Not(e) | Expr::Class(_, e) | Expr::IsSq(e) => {
                e.collect_state_vars(out)
            }
            Expr::Arith(_, a, b) | Expr::Cmp(_, a, b) | Expr::Logic(_, a, b) => {
                a.collect_state_vars(out);
                b.collect_state_vars(out);
            }
            Expr::Quant { lo, hi, body, .. } => {
                lo.collect_state_vars(out);
                hi.collect_state_vars(out);
                body.collect_state_vars(out);
            }
        }
    }
}

fn write_char_lit(f: &mut fmt::Formatter<'_>, c: char) -> fmt::Result {
    match c {
        '\'' | '\\' => write!(f, "'\\{c}'"),
        _ => write!(f, "'{c}'"),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Char(c) => write_char_lit(f, *c),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Len(v) => write!(f, "len({v})"),
            Expr::At(v, i) => write!(f, "{v}[{i}]"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Not(e) => write!(f, "(!{e})"),
            Expr::Arith(op, a, b) => {
                let s = match op {
                    ArithOp::Add => "+",
                    ArithOp::Sub => "-",
                    ArithOp::Mul => "*",
                    ArithOp::Div => "/",
                    ArithOp::Rem => "%",
                    ArithOp::Pow => "**",
                };
                write!(f, "({a} {s} {b})")
            }
            Expr::Cmp(op, a, b) => {
                let s = match op {
                    CmpOp::Eq => "==",
                    CmpOp::Ne => "!=",
                    CmpOp::Lt => "<",
                    CmpOp::Le => "<=",
                    CmpOp::Gt => ">",
                    CmpOp::Ge => ">=",
                };
                write!(f, "({a} {s} {b})")
            }
            Expr::Logic(op, a, b) => {
                let s = if *op == LogicOp::And { "&&" } else { "||" };
                write!(f, "({a} {s} {b})")
            }
            Expr::Quant { kind, name, lo, hi, body } => {
                let k = match kind {
                    QuantKind::Forall => "forall",
                    QuantKind::Exists => "exists",
                    QuantKind::Count => "count",
                };
                write!(f, "{k}({name} in {lo}..{hi} : {body})")
            }
            Expr::Class(c, e) => {
                let k = match c {
                    CharClass::Upper => "isupper",
                    CharClass::Lower => "islower",
                    CharClass::Digit => "isdigit",
                    CharClass::Symbol => "issym",
                };
                write!(f, "{k}({e})")
            }
            Expr::IsSq(e) => write!(f, "issq({e})"),
        }
    }
}

/// What identifiers in an expression may resolve to.
pub(crate) struct Scope<'a> {
    pub space: &'a Space,
    pub locals: &'a [String],
    pub allow_primed: bool,
    pub allow_unprimed: bool,
    pub bound: Vec<String>,
}

impl<'a> Scope<'a> {
    pub fn new(space: &'a Space) -> Self {
        Scope {
            space,
            locals: &[],
            allow_primed: false,
            allow_unprimed: true,
            bound: Vec::new(),
        }
    }
}

pub(crate) struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    pub fn new(text: &str) -> Result<Self, ParseError> {
        Ok(Parser { toks: lex(text)?, at: 0 })
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.at + k).min(self.toks.len() - 1)].0
    }

    pub fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    pub fn reset(&mut self, at: usize) {
        self.at = at;
    }

    pub fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    pub fn error(&self, kind: ParseErrorKind) -> ParseError {
        ParseError { pos: self.pos(), kind }
    }

    pub fn syntax<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(self.error(ParseErrorKind::Syntax(msg.into())))
    }

    pub fn at_end(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn expect_end(&mut self) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            let t = self.peek().clone();
            self.syntax(format!("expected end of input, found {t}"))
        }
    }

    pub fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    pub fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(t) if t == kw)
    }

    pub fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            let t = self.peek().clone();
            self.syntax(format!("expected `{s}`, found {t}"))
        }
    }

    pub fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            let t = self.peek().clone();
            self.syntax(format!("expected `{kw}`, found {t}"))
        }
    }

    pub fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            t => self.syntax(format!("expected identifier, found {t}")),
        }
    }

    /// An identifier usable as a variable name.
    pub fn binder(&mut self) -> Result<String, ParseError> {
        let pos = self.pos();
        let name = self.ident()?;
        if RESERVED.contains(&name.as_str()) {
            return Err(ParseError {
                pos,
                kind: ParseErrorKind::Reserved(name),
            });
        }
        Ok(name)
    }

    /// Possibly negative integer literal.
    pub fn int_lit(&mut self) -> Result<i64, ParseError> {
        let neg = self.eat_sym("-");
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(if neg { -v } else { v })
            }
            t => self.syntax(format!("expected integer, found {t}")),
        }
    }

    fn string_lit(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(s)
            }
            t => self.syntax(format!("expected string, found {t}")),
        }
    }

    /// `lo .. hi`, rejecting empty ranges.
    pub fn range(&mut self) -> Result<(i64, i64), ParseError> {
        let pos = self.pos();
        let lo = self.int_lit()?;
        self.expect_sym("..")?;
        let hi = self.int_lit()?;
        if lo > hi {
            return Err(ParseError {
                pos,
                kind: ParseErrorKind::EmptyRange(lo, hi),
            });
        }
        Ok((lo, hi))
    }

    pub fn space_decl(&mut self) -> Result<Space, ParseError> {
        let start = self.pos();
        self.expect_kw("space")?;
        let name = self.ident()?;
        self.expect_sym("{")?;
        let mut vars: Vec<VarDecl> = Vec::new();
        loop {
            let pos = self.pos();
            let vname = self.binder()?;
            if vars.iter().any(|v| v.name == vname) {
                return Err(ParseError {
                    pos,
                    kind: ParseErrorKind::DuplicateVariable(vname),
                });
            }
            self.expect_sym(":")?;
            let domain = if self.eat_kw("int") {
                let (lo, hi) = self.range()?;
                Domain::Int { lo, hi }
            } else if self.eat_kw("char") {
                self.expect_kw("over")?;
                Domain::Char {
                    alphabet: self.string_lit()?.chars().collect(),
                }
            } else if self.eat_kw("seq") {
                self.expect_kw("over")?;
                let alphabet = self.string_lit()?.chars().collect();
                self.expect_kw("maxlen")?;
                let max_len = self.int_lit()?;
                if max_len < 0 {
                    return self.syntax("maxlen must be non-negative");
                }
                Domain::Seq {
                    alphabet,
                    max_len: max_len as usize,
                }
            } else {
                let t = self.peek().clone();
                return self.syntax(format!("expected `int`, `char` or `seq`, found {t}"));
            };
            self.expect_sym(";")?;
            vars.push(VarDecl::new(vname, domain));
            if self.eat_sym("}") {
                break;
            }
        }
        Space::new(name, vars).map_err(|e| ParseError {
            pos: start,
            kind: e.into(),
        })
    }

    /// A boolean expression.
    pub fn pred(&mut self, scope: &mut Scope<'_>) -> Result<Expr, ParseError> {
        let pos = self.pos();
        let e = self.or_expr(scope)?;
        self.want(pos, &e, Ty::Bool)?;
        Ok(e)
    }

    /// An integer expression.
    pub fn expr(&mut self, scope: &mut Scope<'_>) -> Result<Expr, ParseError> {
        let pos = self.pos();
        let e = self.or_expr(scope)?;
        self.want(pos, &e, Ty::Int)?;
        Ok(e)
    }

    fn want(&self, pos: Pos, e: &Expr, ty: Ty) -> Result<(), ParseError> {
        if e.ty() == ty {
            Ok(())
        } else {
            let what = match ty {
                Ty::Int => "integer",
                Ty::Bool => "boolean",
            };
            Err(ParseError {
                pos,
                kind: ParseErrorKind::TypeMismatch(format!("expected {what} expression, found `{e}`")),
            })
        }
    }

    fn or_expr(&mut self, scope: &mut Scope<'_>) -> Result<Expr, ParseError> {
        let pos = self.pos();
        let mut lhs = self.and_expr(scope)?;
        while self.is_sym("||") {
            self.want(pos, &lhs, Ty::Bool)?;
            self.bump();
            let p = self.pos();
            let rhs = self.and_expr(scope)?;
            self.want(p, &rhs, Ty::Bool)?;
            lhs = Expr::Logic(LogicOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self, scope: &mut Scope<'_>) -> Result<Expr, ParseError> {
        let pos = self.pos();
        let mut lhs = self.not_expr(scope)?;
        while self.is_sym("&&") {
            self.want(pos, &lhs, Ty::Bool)?;
            self.bump();
            let p = self.pos();
            let rhs = self.not_expr(scope)?;
            self.want(p, &rhs, Ty::Bool)?;
            lhs = Expr::Logic(LogicOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn not_expr(&mut self, scope: &mut Scope<'_>) -> Result<Expr, ParseError> {
        if self.eat_sym("!") {
            let pos = self.pos();
            let e = self.not_expr(scope)?;
            self.want(pos, &e, Ty::Bool)?;
            return Ok(Expr::Not(Box::new(e)));
        }
        self.cmp_expr(scope)
    }

    fn cmp_expr(&mut self, scope: &mut Scope<'_>) -> Result<Expr, ParseError> {
        let pos = self.pos();
        let lhs = self.sum_expr(scope)?;
        let op = match self.peek() {
            Tok::Sym("==") => CmpOp::Eq,
            Tok::Sym("!=") => CmpOp::Ne,
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym(">=") => CmpOp::Ge,
            _ => return Ok(lhs),
        };
        self.want(pos, &lhs, Ty::Int)?;
        self.bump();
        let p = self.pos();
        let rhs = self.sum_expr(scope)?;
        self.want(p, &rhs, Ty::Int)?;
        Ok(Expr::Cmp(op, Box::new(lhs), Box::new(rhs)))
    }

    fn sum_expr(&mut self, scope: &mut Scope<'_>) -> Result<Expr, ParseError> {
        let pos = self.pos();
        let mut lhs = self.prod_expr(scope)?;
        loop {
            let op = match self.peek() {
                Tok::Sym("+") => ArithOp::Add,
                Tok::Sym("-") => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.want(pos, &lhs, Ty::Int)?;
            self.bump();
            let p = self.pos();
            let rhs = self.prod_expr(scope)?;
            self.want(p, &rhs, Ty::Int)?;
            lhs = Expr::Arith(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn prod_expr(&mut self, scope: &mut Scope<'_>) -> Result<Expr, ParseError> {
        let pos = self.pos();
        let mut lhs = self.unary_expr(scope)?;
        loop {
            let op = match self.peek() {
                Tok::Sym("*") => ArithOp::Mul,
                Tok::Sym("/") => ArithOp::Div,
                Tok::Sym("%") => ArithOp::Rem,
                _ => return Ok(lhs),
            };
            self.want(pos, &lhs, Ty::Int)?;
            self.bump();
            let p = self.pos();
            let rhs = self.unary_expr(scope)?;
            self.want(p, &rhs, Ty::Int)?;
            lhs = Expr::Arith(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary_expr(&mut self, scope: &mut Scope<'_>) -> Result<Expr, ParseError> {
        if self.eat_sym("-") {
            let pos = self.pos();
            let e = self.unary_expr(scope)?;
            self.want(pos, &e, Ty::Int)?;
            return Ok(Expr::Neg(Box::new(e)));
        }
        let pos = self.pos();
        let base = self.atom(scope)?;
        if self.eat_sym("**") {
            self.want(pos, &base, Ty::Int)?;
            let p = self.pos();
            let exp = self.unary_expr(scope)?;
            self.want(p, &exp, Ty::Int)?;
            return Ok(Expr::Arith(ArithOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self, scope: &mut Scope<'_>) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::Char(c) => {
                self.bump();
                Ok(Expr::Char(c))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.or_expr(scope)?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(word) if matches!(self.peek_at(1), Tok::Sym("(")) => {
                self.call(&word, scope)
            }
            Tok::Ident(word) if word == "true" || word == "false" => {
                self.bump();
                Ok(Expr::Bool(word == "true"))
            }
            Tok::Ident(name) => {
                self.bump();
                self.reference(pos, name, false, scope)
            }
            Tok::Primed(name) => {
                self.bump();
                self.reference(pos, name, true, scope)
            }
            t => self.syntax(format!("expected expression, found {t}")),
        }
    }

    fn reference(
        &mut self,
        pos: Pos,
        name: String,
        primed: bool,
        scope: &mut Scope<'_>,
    ) -> Result<Expr, ParseError> {
        let var = self.resolve(pos, name, primed, scope)?;
        if self.eat_sym("[") {
            self.require_seq(pos, &var, scope)?;
            let idx = self.expr(scope)?;
            self.expect_sym("]")?;
            return Ok(Expr::At(var, Box::new(idx)));
        }
        if let Var::State { index, name, .. } = &var {
            if scope.space.vars()[*index].domain.is_seq() {
                return Err(ParseError {
                    pos,
                    kind: ParseErrorKind::TypeMismatch(format!(
                        "sequence `{name}` used as a scalar; use len() or indexing"
                    )),
                });
            }
        }
        Ok(Expr::Var(var))
    }

    fn require_seq(&self, pos: Pos, var: &Var, scope: &Scope<'_>) -> Result<(), ParseError> {
        match var {
            Var::State { index, .. } if scope.space.vars()[*index].domain.is_seq() => Ok(()),
            other => Err(ParseError {
                pos,
                kind: ParseErrorKind::TypeMismatch(format!(
                    "sequence operation on non-sequence `{other}`"
                )),
            }),
        }
    }

    pub fn resolve(
        &self,
        pos: Pos,
        name: String,
        primed: bool,
        scope: &Scope<'_>,
    ) -> Result<Var, ParseError> {
        let fail = |kind| Err(ParseError { pos, kind });
        if let Some(level) = scope.bound.iter().rposition(|b| *b == name) {
            if primed {
                return fail(ParseErrorKind::PrimedIndex(name));
            }
            return Ok(Var::Bound { level, name });
        }
        if !primed {
            if let Some(index) = scope.locals.iter().position(|l| *l == name) {
                return Ok(Var::Local { index, name });
            }
        }
        match scope.space.var_index(&name) {
            Some(index) => {
                if primed && !scope.allow_primed {
                    return fail(ParseErrorKind::PrimedNotAllowed(name));
                }
                if !primed && !scope.allow_unprimed {
                    return fail(ParseErrorKind::UnknownVariable(name));
                }
                Ok(Var::State { index, primed, name })
            }
            None => fail(ParseErrorKind::UnknownVariable(name)),
        }
    }

    fn call(&mut self, word: &str, scope: &mut Scope<'_>) -> Result<Expr, ParseError> {
        let pos = self.pos();
        let quant = match word {
            "forall" => Some(QuantKind::Forall),
            "exists" => Some(QuantKind::Exists),
            "count" => Some(QuantKind::Count),
            _ => None,
        };
        if let Some(kind) = quant {
            self.bump();
            self.expect_sym("(")?;
            let name = self.binder()?;
            self.expect_kw("in")?;
            let lo = self.expr(scope)?;
            self.expect_sym("..")?;
            let hi = self.expr(scope)?;
            self.expect_sym(":")?;
            scope.bound.push(name.clone());
            let body = self.pred(scope);
            scope.bound.pop();
            let body = body?;
            self.expect_sym(")")?;
            return Ok(Expr::Quant {
                kind,
                name,
                lo: Box::new(lo),
                hi: Box::new(hi),
                body: Box::new(body),
            });
        }
        self.bump();
        self.expect_sym("(")?;
        let e = match word {
            "len" => {
                let p = self.pos();
                let (name, primed) = match self.bump() {
                    Tok::Ident(n) => (n, false),
                    Tok::Primed(n) => (n, true),
                    t => return self.syntax(format!("len() expects a variable, found {t}")),
                };
                let var = self.resolve(p, name, primed, scope)?;
                self.require_seq(p, &var, scope)?;
                Expr::Len(var)
            }
            "isupper" | "islower" | "isdigit" | "issym" => {
                let class = match word {
                    "isupper" => CharClass::Upper,
                    "islower" => CharClass::Lower,
                    "isdigit" => CharClass::Digit,
                    _ => CharClass::Symbol,
                };
                Expr::Class(class, Box::new(self.expr(scope)?))
            }
            "issq" => Expr::IsSq(Box::new(self.expr(scope)?)),
            _ => {
                return Err(ParseError {
                    pos,
                    kind: ParseErrorKind::Syntax(format!("unknown function `{word}`")),
                })
            }
        };
        self.expect_sym(")")?;
        Ok(e)
    }
}

/// Failure while evaluating an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("arithmetic overflow")]
    Overflow,
    #[error("division by zero")]
    DivisionByZero,
    #[error("negative exponent")]
    NegativeExponent,
    #[error("sequence index out of bounds")]
    IndexOutOfBounds,
    #[error("read of uninitialized local")]
    Uninitialized,
    /// The evaluator needs the initial value of a state variable that the
    /// caller has left unspecified.
    #[error("value of state variable {0} not fixed")]
    NeedsInput(usize),
}

/// Source of variable values during evaluation. Characters are integer
/// code points.
pub(crate) trait Env {
    fn scalar(&self, var: usize, primed: bool) -> Result<i64, EvalError>;
    fn seq_len(&self, var: usize, primed: bool) -> Result<i64, EvalError>;
    fn seq_at(&self, var: usize, primed: bool, i: i64) -> Result<i64, EvalError>;
    fn local(&self, _index: usize) -> Result<i64, EvalError> {
        Err(EvalError::Uninitialized)
    }
}

/// Values read straight from the indices of a `(pre, post)` state pair.
pub(crate) struct PairEnv<'a> {
    pub space: &'a Space,
    pub pre: usize,
    pub post: usize,
}

impl Env for PairEnv<'_> {
    #[inline]
    fn scalar(&self, var: usize, primed: bool) -> Result<i64, EvalError> {
        let idx = if primed { self.post } else { self.pre };
        Ok(self.space.scalar(idx, var))
    }

    fn seq_len(&self, var: usize, primed: bool) -> Result<i64, EvalError> {
        let idx = if primed { self.post } else { self.pre };
        let ord = self.space.ordinal(idx, var);
        Ok(self.space.vars()[var].domain.seq_len_at(ord) as i64)
    }

    fn seq_at(&self, var: usize, primed: bool, i: i64) -> Result<i64, EvalError> {
        let idx = if primed { self.post } else { self.pre };
        let ord = self.space.ordinal(idx, var);
        let i = usize::try_from(i).map_err(|_| EvalError::IndexOutOfBounds)?;
        self.space.vars()[var]
            .domain
            .seq_char_at(ord, i)
            .ok_or(EvalError::IndexOutOfBounds)
    }
}

pub(crate) struct Evaluator<'a, E: Env> {
    pub env: &'a E,
    pub symbols: &'a [char],
    bound: Vec<i64>,
}

impl<'a, E: Env> Evaluator<'a, E> {
    pub fn new(env: &'a E, symbols: &'a [char]) -> Self {
        Evaluator {
            env,
            symbols,
            bound: Vec::new(),
        }
    }

    fn read(&self, v: &Var) -> Result<i64, EvalError> {
        match v {
            Var::State { index, primed, .. } => self.env.scalar(*index, *primed),
            Var::Local { index, .. } => self.env.local(*index),
            Var::Bound { level, .. } => Ok(self.bound[*level]),
        }
    }

    pub fn int(&mut self, e: &Expr) -> Result<i64, EvalError> {
        match e {
            Expr::Int(v) => Ok(*v),
            Expr::Char(c) => Ok(*c as i64),
            Expr::Var(v) => self.read(v),
            Expr::Len(Var::State { index, primed, .. }) => self.env.seq_len(*index, *primed),
            Expr::At(Var::State { index, primed, .. }, i) => {
                let i = self.int(i)?;
                self.env.seq_at(*index, *primed, i)
            }
            Expr::Neg(e) => self.int(e)?.checked_neg().ok_or(EvalError::Overflow),
            Expr::Arith(op, a, b) => {
                let a = self.int(a)?;
                let b = self.int(b)?;
                arith(*op, a, b)
            }
            Expr::Quant {
                kind: QuantKind::Count,
                lo,
                hi,
                body,
                ..
            } => {
                let lo = self.int(lo)?;
                let hi = self.int(hi)?;
                let mut n = 0i64;
                let mut i = lo;
                while i <= hi {
                    self.bound.push(i);
                    let r = self.bool(body);
                    self.bound.pop();
                    match r {
                        Ok(true) => n += 1,
                        Ok(false) | Err(EvalError::IndexOutOfBounds) => {}
                        Err(e) => return Err(e),
                    }
                    i += 1;
                }
                Ok(n)
            }
            other => unreachable!("`{other}` is not an integer expression"),
        }
    }

    pub fn bool(&mut self, e: &Expr) -> Result<bool, EvalError> {
        match e {
            Expr::Bool(b) => Ok(*b),
            Expr::Not(e) => Ok(!self.bool(e)?),
            Expr::Logic(LogicOp::And, a, b) => Ok(self.bool(a)? && self.bool(b)?),
            Expr::Logic(LogicOp::Or, a, b) => Ok(self.bool(a)? || self.bool(b)?),
            Expr::Cmp(op, a, b) => {
                let a = self.int(a)?;
                let b = self.int(b)?;
                Ok(match op {
                    CmpOp::Eq => a == b,
                    CmpOp::Ne => a != b,
                    CmpOp::Lt => a < b,
                    CmpOp::Le => a <= b,
                    CmpOp::Gt => a > b,
                    CmpOp::Ge => a >= b,
                })
            }
            Expr::Quant {
                kind,
                lo,
                hi,
                body,
                ..
            } => {
                let lo = self.int(lo)?;
                let hi = self.int(hi)?;
                let want = *kind == QuantKind::Exists;
                let mut i = lo;
                while i <= hi {
                    self.bound.push(i);
                    let r = self.bool(body);
                    self.bound.pop();
                    match r {
                        Ok(b) if b == want => return Ok(want),
                        Ok(_) | Err(EvalError::IndexOutOfBounds) => {}
                        Err(e) => return Err(e),
                    }
                    i += 1;
                }
                Ok(!want)
            }
            Expr::Class(class, e) => {
                let c = self.int(e)?;
                let is = |lo: char, hi: char| (lo as i64..=hi as i64).contains(&c);
                Ok(match class {
                    CharClass::Upper => is('A', 'Z'),
                    CharClass::Lower => is('a', 'z'),
                    CharClass::Digit => is('0', '9'),
                    CharClass::Symbol => {
                        !is('A', 'Z')
                            && !is('a', 'z')
                            && !is('0', '9')
                            && self.symbols.iter().any(|&s| s as i64 == c)
                    }
                })
            }
            Expr::IsSq(e) => Ok(is_perfect_square(self.int(e)?)),
            other => unreachable!("`{other}` is not a boolean expression"),
        }
    }
}

pub(crate) fn arith(op: ArithOp, a: i64, b: i64) -> Result<i64, EvalError> {
    match op {
        ArithOp::Add => a.checked_add(b).ok_or(EvalError::Overflow),
        ArithOp::Sub => a.checked_sub(b).ok_or(EvalError::Overflow),
        ArithOp::Mul => a.checked_mul(b).ok_or(EvalError::Overflow),
        ArithOp::Div if b == 0 => Err(EvalError::DivisionByZero),
        ArithOp::Rem if b == 0 => Err(EvalError::DivisionByZero),
        ArithOp::Div => a.checked_div(b).ok_or(EvalError::Overflow),
        ArithOp::Rem => a.checked_rem(b).ok_or(EvalError::Overflow),
        ArithOp::Pow => {
            if b < 0 {
                return Err(EvalError::NegativeExponent);
            }
            let b = u32::try_from(b).map_err(|_| EvalError::Overflow)?;
            a.checked_pow(b).ok_or(EvalError::Overflow)
        }
    }
}

/// Integer square root (floor) of a non-negative value.
pub(crate) fn isqrt(n: i64) -> i64 {
    debug_assert!(n >= 0);
    let mut r = (n as f64).sqrt() as i64;
    while r > 0 && r.checked_mul(r).map_or(true, |sq| sq > n) {
        r -= 1;
    }
    while (r + 1).checked_mul(r + 1).is_some_and(|sq| sq <= n) {
        r += 1;
    }
    r
}

pub(crate) fn is_perfect_square(n: i64) -> bool {
    n >= 0 && {
        let r = isqrt(n);
        r * r == n
    }
}
