//! Finite state spaces.
//!
//! A [`Space`] is an ordered list of typed variables, each with a finite
//! domain. States are enumerated row-major in declaration order (the first
//! variable is the most significant digit), so every state has a stable
//! ordinal index in `0..cardinality`.

use std::fmt;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::syntax::{ParseError, Parser};

/// Spaces at or below this many states may have relations materialized
/// extensionally.
pub const DEFAULT_MATERIALIZATION_CAP: u64 = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpaceError {
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("empty range {lo}..{hi} for `{name}`")]
    EmptyRange { name: String, lo: i64, hi: i64 },
    #[error("empty alphabet for `{0}`")]
    EmptyAlphabet(String),
    #[error("repeated character {1:?} in alphabet of `{0}`")]
    RepeatedCharacter(String, char),
    #[error("space cardinality overflows 64 bits")]
    TooLarge,
    #[error("state does not belong to space `{0}`")]
    NotInSpace(String),
    #[error("index {index} out of range for space of {cardinality} states")]
    IndexOutOfRange { index: u64, cardinality: u64 },
    #[error("operands live in different spaces (`{0}` vs `{1}`)")]
    Mismatch(String, String),
}

/// The value set of one variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Domain {
    /// Integers `lo..=hi`.
    Int { lo: i64, hi: i64 },
    /// One character from the alphabet.
    Char { alphabet: Vec<char> },
    /// Sequences over the alphabet of length `0..=max_len`, ordered by
    /// length and then lexicographically by alphabet position.
    Seq { alphabet: Vec<char>, max_len: usize },
}

impl Domain {
    pub fn cardinality(&self) -> Option<u64> {
        match self {
            Domain::Int { lo, hi } => (*hi as i128 - *lo as i128 + 1).try_into().ok(),
            Domain::Char { alphabet } => Some(alphabet.len() as u64),
            Domain::Seq { alphabet, max_len } => {
                let base = alphabet.len() as u64;
                let mut total: u64 = 0;
                let mut level: u64 = 1;
                for k in 0..=*max_len {
                    if k > 0 {
                        level = level.checked_mul(base)?;
                    }
                    total = total.checked_add(level)?;
                }
                Some(total)
            }
        }
    }

    pub fn is_seq(&self) -> bool {
        matches!(self, Domain::Seq { .. })
    }

    /// Value with the given ordinal. The ordinal must be in range.
    pub fn value_at(&self, ordinal: u64) -> Value {
        match self {
            Domain::Int { lo, .. } => Value::Int(lo + ordinal as i64),
            Domain::Char { alphabet } => Value::Char(alphabet[ordinal as usize]),
            Domain::Seq { alphabet, .. } => {
                let (len, rank) = seq_split(alphabet.len() as u64, ordinal);
                let base = alphabet.len() as u64;
                let mut chars = vec![' '; len];
                let mut r = rank;
                for slot in chars.iter_mut().rev() {
                    *slot = alphabet[(r % base) as usize];
                    r /= base;
                }
                Value::Seq(chars)
            }
        }
    }

    pub fn ordinal_of(&self, value: &Value) -> Option<u64> {
        match (self, value) {
            (Domain::Int { lo, hi }, Value::Int(v)) => {
                (lo <= v && v <= hi).then(|| (v - lo) as u64)
            }
            (Domain::Char { alphabet }, Value::Char(c)) => {
                alphabet.iter().position(|a| a == c).map(|p| p as u64)
            }
            (Domain::Seq { alphabet, max_len }, Value::Seq(chars)) => {
                if chars.len() > *max_len {
                    return None;
                }
                let base = alphabet.len() as u64;
                let mut rank = 0u64;
                for c in chars {
                    let p = alphabet.iter().position(|a| a == c)? as u64;
                    rank = rank * base + p;
                }
                Some(seq_offset(base, chars.len()) + rank)
            }
            _ => None,
        }
    }

    /// Ordinal of an integer-coded scalar (integers, or characters by code
    /// point). `None` when the value lies outside the domain.
    pub fn ordinal_of_scalar(&self, v: i64) -> Option<u64> {
        match self {
            Domain::Int { lo, hi } => (*lo <= v && v <= *hi).then(|| (v - lo) as u64),
            Domain::Char { alphabet } => alphabet
                .iter()
                .position(|&a| a as i64 == v)
                .map(|p| p as u64),
            Domain::Seq { .. } => None,
        }
    }

    /// Integer code of the scalar with this ordinal.
    pub fn scalar_at(&self, ordinal: u64) -> i64 {
        match self {
            Domain::Int { lo, .. } => lo + ordinal as i64,
            Domain::Char { alphabet } => alphabet[ordinal as usize] as i64,
            Domain::Seq { .. } => panic!("scalar_at on a sequence domain"),
        }
    }

    /// Length of the sequence with this ordinal.
    pub fn seq_len_at(&self, ordinal: u64) -> usize {
        match self {
            Domain::Seq { alphabet, .. } => seq_split(alphabet.len() as u64, ordinal).0,
            _ => panic!("seq_len_at on a scalar domain"),
        }
    }

    /// Character code at position `i` of the sequence with this ordinal.
    pub fn seq_char_at(&self, ordinal: u64, i: usize) -> Option<i64> {
        match self {
            Domain::Seq { alphabet, .. } => {
                let base = alphabet.len() as u64;
                let (len, rank) = seq_split(base, ordinal);
                if i >= len {
                    return None;
                }
                let shift = base.pow((len - 1 - i) as u32);
                Some(alphabet[((rank / shift) % base) as usize] as i64)
            }
            _ => panic!("seq_char_at on a scalar domain"),
        }
    }

    fn alphabet(&self) -> &[char] {
        match self {
            Domain::Int { .. } => &[],
            Domain::Char { alphabet } | Domain::Seq { alphabet, .. } => alphabet,
        }
    }
}

fn seq_offset(base: u64, len: usize) -> u64 {
    (0..len).map(|k| base.pow(k as u32)).sum()
}

fn seq_split(base: u64, ordinal: u64) -> (usize, u64) {
    let mut len = 0usize;
    let mut level = 1u64;
    let mut rest = ordinal;
    while rest >= level {
        rest -= level;
        len += 1;
        level *= base;
    }
    (len, rest)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VarDecl {
    pub name: String,
    pub domain: Domain,
}

impl VarDecl {
    pub fn new(name: impl Into<String>, domain: Domain) -> Self {
        VarDecl { name: name.into(), domain }
    }
}

/// A single variable value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Char(char),
    Seq(Vec<char>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Char(c) => write!(f, "'{c}'"),
            Value::Seq(cs) => write!(f, "\"{}\"", cs.iter().collect::<String>()),
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
struct SpaceInner {
    name: String,
    vars: Vec<VarDecl>,
    radices: Vec<u64>,
    strides: Vec<u64>,
    cardinality: u64,
    symbols: Vec<char>,
    materialization_cap: u64,
}

/// A finite state space. Cheap to clone.
#[derive(Clone)]
pub struct Space(Arc<SpaceInner>);

impl PartialEq for Space {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.vars == other.0.vars && self.0.name == other.0.name)
    }
}

impl Eq for Space {}

impl fmt::Debug for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Space")
            .field("name", &self.0.name)
            .field("vars", &self.0.vars)
            .field("cardinality", &self.0.cardinality)
            .finish()
    }
}

impl Space {
    pub fn new(name: impl Into<String>, vars: Vec<VarDecl>) -> Result<Space, SpaceError> {
        let name = name.into();
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].iter().any(|w| w.name == v.name) {
                return Err(SpaceError::DuplicateVariable(v.name.clone()));
            }
            match &v.domain {
                Domain::Int { lo, hi } if lo > hi => {
                    return Err(SpaceError::EmptyRange {
                        name: v.name.clone(),
                        lo: *lo,
                        hi: *hi,
                    })
                }
                Domain::Char { alphabet } | Domain::Seq { alphabet, .. } => {
                    if alphabet.is_empty() {
                        return Err(SpaceError::EmptyAlphabet(v.name.clone()));
                    }
                    for (j, c) in alphabet.iter().enumerate() {
                        if alphabet[..j].contains(c) {
                            return Err(SpaceError::RepeatedCharacter(v.name.clone(), *c));
                        }
                    }
                }
                _ => {}
            }
        }
        let radices = vars
            .iter()
            .map(|v| v.domain.cardinality().ok_or(SpaceError::TooLarge))
            .collect::<Result<Vec<_>, _>>()?;
        let mut strides = vec![1u64; vars.len()];
        let mut cardinality = 1u64;
        for i in (0..vars.len()).rev() {
            strides[i] = cardinality;
            cardinality = cardinality
                .checked_mul(radices[i])
                .ok_or(SpaceError::TooLarge)?;
        }
        let mut symbols: Vec<char> = vars
            .iter()
            .flat_map(|v| v.domain.alphabet().iter().copied())
            .collect();
        symbols.sort_unstable();
        symbols.dedup();
        Ok(Space(Arc::new(SpaceInner {
            name,
            vars,
            radices,
            strides,
            cardinality,
            symbols,
            materialization_cap: DEFAULT_MATERIALIZATION_CAP,
        })))
    }

    /// Same space with a different cap on extensional materialization.
    pub fn with_materialization_cap(&self, cap: u64) -> Space {
        let inner = &self.0;
        Space(Arc::new(SpaceInner {
            name: inner.name.clone(),
            vars: inner.vars.clone(),
            radices: inner.radices.clone(),
            strides: inner.strides.clone(),
            cardinality: inner.cardinality,
            symbols: inner.symbols.clone(),
            materialization_cap: cap,
        }))
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    pub fn vars(&self) -> &[VarDecl] {
        &self.0.vars
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.0.vars.iter().position(|v| v.name == name)
    }

    pub fn cardinality(&self) -> u64 {
        self.0.cardinality
    }

    pub fn materialization_cap(&self) -> u64 {
        self.0.materialization_cap
    }

    pub fn materializable(&self) -> bool {
        self.0.cardinality <= self.0.materialization_cap
    }

    /// Number of states as a `usize`, for index-based containers.
    pub fn len(&self) -> usize {
        usize::try_from(self.0.cardinality).expect("space too large to index")
    }

    pub fn is_empty(&self) -> bool {
        self.0.cardinality == 0
    }

    pub(crate) fn radix(&self, var: usize) -> u64 {
        self.0.radices[var]
    }

    pub(crate) fn stride(&self, var: usize) -> u64 {
        self.0.strides[var]
    }

    /// Every character declared by some alphabet in this space, sorted.
    pub fn symbols(&self) -> &[char] {
        &self.0.symbols
    }

    /// Ordinal of variable `var` within state `index`.
    #[inline]
    pub fn ordinal(&self, index: usize, var: usize) -> u64 {
        (index as u64 / self.0.strides[var]) % self.0.radices[var]
    }

    /// Integer code of scalar variable `var` in state `index`.
    #[inline]
    pub fn scalar(&self, index: usize, var: usize) -> i64 {
        self.0.vars[var].domain.scalar_at(self.ordinal(index, var))
    }

    /// State `index` with variable `var` replaced by ordinal `ordinal`.
    pub fn with_ordinal(&self, index: usize, var: usize, ordinal: u64) -> usize {
        let old = self.ordinal(index, var);
        let stride = self.0.strides[var];
        (index as u64 - old * stride + ordinal * stride) as usize
    }

    pub fn state_at(&self, index: u64) -> Result<State, SpaceError> {
        if index >= self.0.cardinality {
            return Err(SpaceError::IndexOutOfRange {
                index,
                cardinality: self.0.cardinality,
            });
        }
        let values = self
            .0
            .vars
            .iter()
            .enumerate()
            .map(|(k, v)| v.domain.value_at((index / self.0.strides[k]) % self.0.radices[k]))
            .collect();
        Ok(State { values })
    }

    pub fn index(&self, state: &State) -> Result<u64, SpaceError> {
        if state.values.len() != self.0.vars.len() {
            return Err(SpaceError::NotInSpace(self.0.name.clone()));
        }
        let mut index = 0u64;
        for (k, (v, value)) in self.0.vars.iter().zip(&state.values).enumerate() {
            let ord = v
                .domain
                .ordinal_of(value)
                .ok_or_else(|| SpaceError::NotInSpace(self.0.name.clone()))?;
            index += ord * self.0.strides[k];
        }
        Ok(index)
    }

    /// Build a state from `(name, value)` pairs; every variable must be given.
    pub fn state(&self, assignments: &[(&str, Value)]) -> Result<State, SpaceError> {
        let mut values = Vec::with_capacity(self.0.vars.len());
        for v in &self.0.vars {
            let value = assignments
                .iter()
                .find(|(n, _)| *n == v.name)
                .map(|(_, val)| val.clone())
                .ok_or_else(|| SpaceError::NotInSpace(self.0.name.clone()))?;
            values.push(value);
        }
        let state = State { values };
        self.index(&state)?;
        Ok(state)
    }

    /// All states in ascending index order.
    pub fn enumerate(&self) -> impl Iterator<Item = State> + '_ {
        (0..self.0.cardinality).map(move |i| self.state_at(i).expect("index in range"))
    }

    pub fn check_same(&self, other: &Space) -> Result<(), SpaceError> {
        if self == other {
            Ok(())
        } else {
            Err(SpaceError::Mismatch(self.name().into(), other.name().into()))
        }
    }

    /// Renders state `index` as `(v1=.., v2=..)`.
    pub fn describe(&self, index: usize) -> String {
        match self.state_at(index as u64) {
            Ok(s) => s.display(self).to_string(),
            Err(e) => e.to_string(),
        }
    }
}

/// Parse a single `space NAME { ... }` declaration.
pub fn parse_space(text: &str) -> Result<Space, ParseError> {
    let mut parser = Parser::new(text)?;
    let space = parser.space_decl()?;
    parser.expect_end()?;
    Ok(space)
}

/// One value per variable of a space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    values: Vec<Value>,
}

impl State {
    pub fn new(values: Vec<Value>) -> Self {
        State { values }
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn get(&self, var: usize) -> &Value {
        &self.values[var]
    }

    pub fn display<'a>(&'a self, space: &'a Space) -> impl fmt::Display + 'a {
        StateDisplay { state: self, space }
    }
}

struct StateDisplay<'a> {
    state: &'a State,
    space: &'a Space,
}

impl fmt::Display for StateDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, (v, value)) in self.space.vars().iter().zip(&self.state.values).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}={}", v.name, value)?;
        }
        write!(f, ")")
    }
}

/// A subset of a space's states, stored as a dense bit set.
#[derive(Clone, PartialEq, Eq)]
pub struct StateSet {
    space: Space,
    bits: FixedBitSet,
}

impl fmt::Debug for StateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.bits.ones()).finish()
    }
}

impl StateSet {
    pub fn empty(space: &Space) -> Self {
        StateSet {
            space: space.clone(),
            bits: FixedBitSet::with_capacity(space.len()),
        }
    }

    pub fn full(space: &Space) -> Self {
        let mut set = Self::empty(space);
        set.bits.insert_range(..);
        set
    }

    pub fn from_indices(space: &Space, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut set = Self::empty(space);
        for i in indices {
            set.bits.insert(i);
        }
        set
    }

    pub fn from_fn(space: &Space, mut member: impl FnMut(usize) -> bool) -> Self {
        let mut set = Self::empty(space);
        for i in 0..space.len() {
            if member(i) {
                set.bits.insert(i);
            }
        }
        set
    }

    pub(crate) fn from_bits(space: &Space, bits: FixedBitSet) -> Self {
        debug_assert_eq!(bits.len(), space.len());
        StateSet { space: space.clone(), bits }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    #[inline]
    pub fn contains(&self, index: usize) -> bool {
        self.bits.contains(index)
    }

    pub fn insert(&mut self, index: usize) {
        self.bits.insert(index);
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.ones()
    }

    pub fn union(&self, other: &StateSet) -> Result<StateSet, SpaceError> {
        self.space.check_same(&other.space)?;
        let mut bits = self.bits.clone();
        bits.union_with(&other.bits);
        Ok(StateSet::from_bits(&self.space, bits))
    }

    pub fn intersection(&self, other: &StateSet) -> Result<StateSet, SpaceError> {
        self.space.check_same(&other.space)?;
        let mut bits = self.bits.clone();
        bits.intersect_with(&other.bits);
        Ok(StateSet::from_bits(&self.space, bits))
    }

    pub fn difference(&self, other: &StateSet) -> Result<StateSet, SpaceError> {
        self.space.check_same(&other.space)?;
        let mut bits = self.bits.clone();
        bits.difference_with(&other.bits);
        Ok(StateSet::from_bits(&self.space, bits))
    }

    pub fn complement(&self) -> StateSet {
        let mut bits = self.bits.clone();
        bits.toggle_range(..);
        StateSet::from_bits(&self.space, bits)
    }

    pub fn is_subset(&self, other: &StateSet) -> Result<bool, SpaceError> {
        self.space.check_same(&other.space)?;
        Ok(self.bits.is_subset(&other.bits))
    }

    /// Proper subset.
    pub fn is_strict_subset(&self, other: &StateSet) -> Result<bool, SpaceError> {
        Ok(self.is_subset(other)? && self.bits != other.bits)
    }

    pub fn states(&self) -> impl Iterator<Item = State> + '_ {
        self.iter()
            .map(move |i| self.space.state_at(i as u64).expect("member index in range"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int(name: &str, lo: i64, hi: i64) -> VarDecl {
        VarDecl::new(name, Domain::Int { lo, hi })
    }

    #[test]
    fn cardinalities() {
        assert_eq!(parse_space("space T { s: int 0..3; }").unwrap().cardinality(), 4);
        let f = parse_space("space F { n: int 0..200; x: int 0..101; y: int 0..101; }").unwrap();
        assert_eq!(f.cardinality(), 2_091_204);
        let q = parse_space(r#"space Q { q: seq over "ab" maxlen 2; }"#).unwrap();
        assert_eq!(q.cardinality(), 7);
    }

    #[test]
    fn enumeration_order() {
        let s = Space::new("S", vec![int("s", 0, 1)]).unwrap();
        let states: Vec<_> = s.enumerate().collect();
        assert_eq!(states, vec![State::new(vec![Value::Int(0)]), State::new(vec![Value::Int(1)])]);

        let q = parse_space(r#"space Q { q: seq over "ab" maxlen 1; }"#).unwrap();
        let seqs: Vec<_> = q.enumerate().map(|s| s.get(0).clone()).collect();
        assert_eq!(
            seqs,
            vec![Value::Seq(vec![]), Value::Seq(vec!['a']), Value::Seq(vec!['b'])]
        );
    }

    #[test]
    fn index_round_trip() {
        let q = parse_space(r#"space Q { q: seq over "ab" maxlen 2; }"#).unwrap();
        for k in 0..7 {
            let s = q.state_at(k).unwrap();
            assert_eq!(q.index(&s).unwrap(), k);
        }
        let t = Space::new("T", vec![int("s", 0, 3)]).unwrap();
        assert_eq!(t.index(&State::new(vec![Value::Int(2)])).unwrap(), 2);
    }

    #[test]
    fn row_major_two_variables() {
        let sp = Space::new("AB", vec![int("a", 0, 1), int("b", 0, 2)]).unwrap();
        // Oracle: walk the enumeration and count until (a=1, b=0) shows up.
        let target = State::new(vec![Value::Int(1), Value::Int(0)]);
        let counted = sp.enumerate().position(|s| s == target).unwrap() as u64;
        assert_eq!(counted, 3);
        assert_eq!(sp.index(&target).unwrap(), counted);
    }

    #[test]
    fn seq_accessors_agree_with_values() {
        let q = parse_space(r#"space Q { q: seq over "xyz" maxlen 3; }"#).unwrap();
        let dom = &q.vars()[0].domain;
        for i in 0..q.len() {
            let Value::Seq(chars) = q.state_at(i as u64).unwrap().get(0).clone() else {
                panic!()
            };
            let ord = q.ordinal(i, 0);
            assert_eq!(dom.seq_len_at(ord), chars.len());
            for (k, c) in chars.iter().enumerate() {
                assert_eq!(dom.seq_char_at(ord, k), Some(*c as i64));
            }
            assert_eq!(dom.seq_char_at(ord, chars.len()), None);
        }
    }

    #[test]
    fn errors() {
        assert_eq!(
            Space::new("D", vec![int("a", 0, 1), int("a", 0, 2)]).unwrap_err(),
            SpaceError::DuplicateVariable("a".into())
        );
        assert!(matches!(
            Space::new("E", vec![int("a", 3, 1)]).unwrap_err(),
            SpaceError::EmptyRange { .. }
        ));
        let t = Space::new("T", vec![int("s", 0, 3)]).unwrap();
        assert!(t.state_at(4).is_err());
        assert!(t.index(&State::new(vec![Value::Int(9)])).is_err());
        assert!(parse_space("space T { s: int 3..0; }").is_err());
        assert!(parse_space("space T { s: int 0..1; s: int 0..1; }").is_err());
    }

    #[test]
    fn set_algebra_basics() {
        let t = Space::new("T", vec![int("s", 0, 9)]).unwrap();
        let a = StateSet::from_indices(&t, [1, 3, 5]);
        let b = StateSet::from_indices(&t, [3, 4]);
        assert_eq!(a.union(&b).unwrap().iter().collect::<Vec<_>>(), vec![1, 3, 4, 5]);
        assert_eq!(a.intersection(&b).unwrap().iter().collect::<Vec<_>>(), vec![3]);
        assert_eq!(a.difference(&b).unwrap().iter().collect::<Vec<_>>(), vec![1, 5]);
        assert_eq!(a.complement().len(), 7);
        let other = Space::new("U", vec![int("s", 0, 9)]).unwrap();
        assert!(a.union(&StateSet::empty(&other)).is_err());
    }
}
