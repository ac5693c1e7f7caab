//! Binary relations over a finite [`Space`].
//!
//! A [`Relation`] is either *explicit* (a sorted image list per source
//! state, stored compressed-row) or *lazy* (a pair predicate answered on
//! demand). Set operations with an explicit operand produce explicit results;
//! complement and converse of lazy relations stay lazy, so large spaces never
//! pay for `S × S` unless an operation intrinsically needs it.
//!
//! Lazy row images are memoized on first touch behind a lock, so relations
//! can be shared freely between threads.

use std::collections::HashMap;
use std::fmt;
use std::ops::Deref;
use std::sync::{Arc, RwLock};

use rayon::prelude::*;
use thiserror::Error;

use crate::space::{Space, SpaceError, StateSet};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RelError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("space `{space}` has {cardinality} states, above the materialization cap of {cap}")]
    CapExceeded {
        space: String,
        cardinality: u64,
        cap: u64,
    },
}

/// A relation given by a pair predicate over state indices.
pub trait PairPredicate: Send + Sync {
    fn holds(&self, from: usize, to: usize) -> bool;

    /// Rows with equal keys must have equal images.
    fn row_key(&self, from: usize) -> usize {
        from
    }

    /// Sorted image of `from`. The default scans the whole space.
    fn image(&self, from: usize, space: &Space) -> Vec<u32> {
        (0..space.len())
            .filter(|&to| self.holds(from, to))
            .map(|to| to as u32)
            .collect()
    }

    fn has_image(&self, from: usize, space: &Space) -> bool {
        (0..space.len()).any(|to| self.holds(from, to))
    }
}

struct FnPredicate<F>(F);

impl<F> PairPredicate for FnPredicate<F>
where
    F: Fn(usize, usize) -> bool + Send + Sync,
{
    fn holds(&self, from: usize, to: usize) -> bool {
        (self.0)(from, to)
    }
}

/// Compressed-row storage: row `s` is `targets[offsets[s]..offsets[s+1]]`.
#[derive(PartialEq, Eq)]
struct Rows {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Rows {
    fn row(&self, s: usize) -> &[u32] {
        &self.targets[self.offsets[s]..self.offsets[s + 1]]
    }

    fn from_rows(rows: Vec<Vec<u32>>) -> Rows {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        offsets.push(0);
        let total = rows.iter().map(Vec::len).sum();
        let mut targets = Vec::with_capacity(total);
        for row in rows {
            targets.extend_from_slice(&row);
            offsets.push(targets.len());
        }
        Rows { offsets, targets }
    }

    /// `pairs` must be sorted and deduplicated.
    fn from_sorted_pairs(n: usize, pairs: &[(u32, u32)]) -> Rows {
        let mut offsets = vec![0usize; n + 1];
        for &(s, _) in pairs {
            offsets[s as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Rows {
            offsets,
            targets: pairs.iter().map(|&(_, t)| t).collect(),
        }
    }

    fn build(space: &Space, row: impl Fn(usize) -> Vec<u32> + Sync) -> Rows {
        let rows: Vec<Vec<u32>> = (0..space.len()).into_par_iter().map(&row).collect();
        Rows::from_rows(rows)
    }
}

enum Lazy {
    Pred(Box<dyn PairPredicate>),
    Not(Relation),
    And(Relation, Relation),
    Or(Relation, Relation),
    Diff(Relation, Relation),
    Converse(Relation),
    /// `A × S`.
    Vector(StateSet),
}

struct LazyRows {
    kind: Lazy,
    images: RwLock<HashMap<usize, Arc<[u32]>>>,
    nonempty: RwLock<HashMap<usize, bool>>,
}

#[derive(Clone)]
enum Body {
    Explicit(Arc<Rows>),
    Lazy(Arc<LazyRows>),
}

/// A binary relation on the states of a space.
#[derive(Clone)]
pub struct Relation {
    space: Space,
    body: Body,
}

/// Borrowed or shared image of one row.
pub enum Image<'a> {
    Borrowed(&'a [u32]),
    Shared(Arc<[u32]>),
}

impl Deref for Image<'_> {
    type Target = [u32];

    fn deref(&self) -> &[u32] {
        match self {
            Image::Borrowed(s) => s,
            Image::Shared(s) => s,
        }
    }
}

fn merge_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

impl Relation {
    fn explicit(space: &Space, rows: Rows) -> Relation {
        Relation {
            space: space.clone(),
            body: Body::Explicit(Arc::new(rows)),
        }
    }

    fn lazy(space: &Space, kind: Lazy) -> Relation {
        Relation {
            space: space.clone(),
            body: Body::Lazy(Arc::new(LazyRows {
                kind,
                images: RwLock::new(HashMap::new()),
                nonempty: RwLock::new(HashMap::new()),
            })),
        }
    }

    /// ∅
    pub fn empty(space: &Space) -> Relation {
        Relation::explicit(
            space,
            Rows {
                offsets: vec![0; space.len() + 1],
                targets: Vec::new(),
            },
        )
    }

    /// L = S × S
    pub fn universal(space: &Space) -> Relation {
        Relation::vector(&StateSet::full(space))
    }

    /// I
    pub fn identity(space: &Space) -> Relation {
        let n = space.len();
        Relation::explicit(
            space,
            Rows {
                offsets: (0..=n).collect(),
                targets: (0..n as u32).collect(),
            },
        )
    }

    /// The vector `A × S`.
    pub fn vector(set: &StateSet) -> Relation {
        Relation::lazy(set.space(), Lazy::Vector(set.clone()))
    }

    pub fn from_pairs(
        space: &Space,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Relation, RelError> {
        let n = space.len();
        let mut v: Vec<(u32, u32)> = Vec::new();
        for (s, t) in pairs {
            for i in [s, t] {
                if i >= n {
                    return Err(SpaceError::IndexOutOfRange {
                        index: i as u64,
                        cardinality: n as u64,
                    }
                    .into());
                }
            }
            v.push((s as u32, t as u32));
        }
        v.sort_unstable();
        v.dedup();
        Ok(Relation::explicit(space, Rows::from_sorted_pairs(n, &v)))
    }

    /// Explicit relation from per-row image lists (any order, duplicates allowed).
    pub fn from_rows(space: &Space, rows: Vec<Vec<u32>>) -> Relation {
        assert_eq!(rows.len(), space.len(), "one row per state");
        let rows = rows
            .into_iter()
            .map(|mut r| {
                r.sort_unstable();
                r.dedup();
                r
            })
            .collect();
        Relation::explicit(space, Rows::from_rows(rows))
    }

    /// Lazy relation from a closure over state indices.
    pub fn from_fn(
        space: &Space,
        pred: impl Fn(usize, usize) -> bool + Send + Sync + 'static,
    ) -> Relation {
        Relation::from_predicate(space, Box::new(FnPredicate(pred)))
    }

    pub fn from_predicate(space: &Space, pred: Box<dyn PairPredicate>) -> Relation {
        Relation::lazy(space, Lazy::Pred(pred))
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn is_explicit(&self) -> bool {
        matches!(self.body, Body::Explicit(_))
    }

    fn check_cap(&self) -> Result<(), RelError> {
        if self.space.materializable() {
            Ok(())
        } else {
            Err(RelError::CapExceeded {
                space: self.space.name().to_string(),
                cardinality: self.space.cardinality(),
                cap: self.space.materialization_cap(),
            })
        }
    }

    fn check_same(&self, other: &Relation) -> Result<(), RelError> {
        Ok(self.space.check_same(&other.space)?)
    }

    #[inline]
    pub fn contains(&self, from: usize, to: usize) -> bool {
        match &self.body {
            Body::Explicit(rows) => rows.row(from).binary_search(&(to as u32)).is_ok(),
            Body::Lazy(l) => match &l.kind {
                Lazy::Pred(p) => p.holds(from, to),
                Lazy::Not(r) => !r.contains(from, to),
                Lazy::And(a, b) => a.contains(from, to) && b.contains(from, to),
                Lazy::Or(a, b) => a.contains(from, to) || b.contains(from, to),
                Lazy::Diff(a, b) => a.contains(from, to) && !b.contains(from, to),
                Lazy::Converse(r) => r.contains(to, from),
                Lazy::Vector(set) => set.contains(from),
            },
        }
    }

    fn row_key(&self, from: usize) -> usize {
        match &self.body {
            Body::Explicit(_) => from,
            Body::Lazy(l) => match &l.kind {
                Lazy::Pred(p) => p.row_key(from),
                Lazy::Not(r) => r.row_key(from),
                Lazy::Vector(set) => usize::from(!set.contains(from)),
                _ => from,
            },
        }
    }

    /// Sorted image of state `from`.
    pub fn image(&self, from: usize) -> Image<'_> {
        let l = match &self.body {
            Body::Explicit(rows) => return Image::Borrowed(rows.row(from)),
            Body::Lazy(l) => l,
        };
        let key = self.row_key(from);
        if let Some(img) = l.images.read().unwrap().get(&key) {
            return Image::Shared(img.clone());
        }
        let img: Arc<[u32]> = self.compute_image(&l.kind, from).into();
        l.images.write().unwrap().insert(key, img.clone());
        Image::Shared(img)
    }

    fn compute_image(&self, kind: &Lazy, from: usize) -> Vec<u32> {
        let n = self.space.len();
        match kind {
            Lazy::Pred(p) => p.image(from, &self.space),
            Lazy::Not(r) => {
                let img = r.image(from);
                let mut out = Vec::with_capacity(n - img.len());
                let mut it = img.iter().peekable();
                for t in 0..n as u32 {
                    if it.peek() == Some(&&t) {
                        it.next();
                    } else {
                        out.push(t);
                    }
                }
                out
            }
            Lazy::And(a, b) => {
                let (driver, other) = if !a.is_explicit() && b.is_explicit() {
                    (b, a)
                } else {
                    (a, b)
                };
                driver
                    .image(from)
                    .iter()
                    .copied()
                    .filter(|&t| other.contains(from, t as usize))
                    .collect()
            }
            Lazy::Or(a, b) => merge_sorted(&a.image(from), &b.image(from)),
            Lazy::Diff(a, b) => a
                .image(from)
                .iter()
                .copied()
                .filter(|&t| !b.contains(from, t as usize))
                .collect(),
            Lazy::Converse(r) => (0..n)
                .filter(|&t| r.contains(t, from))
                .map(|t| t as u32)
                .collect(),
            Lazy::Vector(set) => {
                if set.contains(from) {
                    (0..n as u32).collect()
                } else {
                    Vec::new()
                }
            }
        }
    }

    /// Whether `from` is in the domain.
    pub fn has_image(&self, from: usize) -> bool {
        let l = match &self.body {
            Body::Explicit(rows) => return !rows.row(from).is_empty(),
            Body::Lazy(l) => l,
        };
        let key = self.row_key(from);
        if let Some(img) = l.images.read().unwrap().get(&key) {
            return !img.is_empty();
        }
        if let Some(b) = l.nonempty.read().unwrap().get(&key) {
            return *b;
        }
        let n = self.space.len();
        let b = match &l.kind {
            Lazy::Pred(p) => p.has_image(from, &self.space),
            Lazy::Not(r) => r.image(from).len() < n,
            Lazy::And(a, b) => {
                let (driver, other) = if !a.is_explicit() && b.is_explicit() {
                    (b, a)
                } else {
                    (a, b)
                };
                driver
                    .image(from)
                    .iter()
                    .any(|&t| other.contains(from, t as usize))
            }
            Lazy::Or(a, b) => a.has_image(from) || b.has_image(from),
            Lazy::Diff(a, b) => a.image(from).iter().any(|&t| !b.contains(from, t as usize)),
            Lazy::Converse(r) => (0..n).any(|t| r.contains(t, from)),
            Lazy::Vector(set) => set.contains(from) && n > 0,
        };
        l.nonempty.write().unwrap().insert(key, b);
        b
    }

    /// An explicit copy of this relation.
    pub fn materialize(&self) -> Result<Relation, RelError> {
        if self.is_explicit() {
            return Ok(self.clone());
        }
        self.check_cap()?;
        Ok(Relation::explicit(
            &self.space,
            Rows::build(&self.space, |s| self.image(s).to_vec()),
        ))
    }

    /// All pairs, in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.space.len()).flat_map(move |s| {
            self.image(s)
                .iter()
                .map(|&t| (s, t as usize))
                .collect::<Vec<_>>()
        })
    }

    pub fn pair_count(&self) -> usize {
        (0..self.space.len())
            .into_par_iter()
            .map(|s| self.image(s).len())
            .sum()
    }

    pub fn union(&self, other: &Relation) -> Result<Relation, RelError> {
        self.check_same(other)?;
        if self.is_explicit() && other.is_explicit() {
            return Ok(Relation::explicit(
                &self.space,
                Rows::build(&self.space, |s| merge_sorted(&self.image(s), &other.image(s))),
            ));
        }
        Ok(Relation::lazy(
            &self.space,
            Lazy::Or(self.clone(), other.clone()),
        ))
    }

    pub fn intersection(&self, other: &Relation) -> Result<Relation, RelError> {
        self.check_same(other)?;
        let (driver, filter) = match (self.is_explicit(), other.is_explicit()) {
            (true, _) => (self, other),
            (false, true) => (other, self),
            (false, false) => {
                return Ok(Relation::lazy(
                    &self.space,
                    Lazy::And(self.clone(), other.clone()),
                ))
            }
        };
        Ok(Relation::explicit(
            &self.space,
            Rows::build(&self.space, |s| {
                driver
                    .image(s)
                    .iter()
                    .copied()
                    .filter(|&t| filter.contains(s, t as usize))
                    .collect()
            }),
        ))
    }

    pub fn difference(&self, other: &Relation) -> Result<Relation, RelError> {
        self.check_same(other)?;
        if self.is_explicit() {
            return Ok(Relation::explicit(
                &self.space,
                Rows::build(&self.space, |s| {
                    self.image(s)
                        .iter()
                        .copied()
                        .filter(|&t| !other.contains(s, t as usize))
                        .collect()
                }),
            ));
        }
        Ok(Relation::lazy(
            &self.space,
            Lazy::Diff(self.clone(), other.clone()),
        ))
    }

    /// `L \ R`; always lazy.
    pub fn complement(&self) -> Relation {
        if let Body::Lazy(l) = &self.body {
            if let Lazy::Not(r) = &l.kind {
                return r.clone();
            }
        }
        Relation::lazy(&self.space, Lazy::Not(self.clone()))
    }

    /// R̂
    pub fn converse(&self) -> Relation {
        match &self.body {
            Body::Explicit(_) => {
                let mut pairs: Vec<(u32, u32)> = self
                    .pairs()
                    .map(|(s, t)| (t as u32, s as u32))
                    .collect();
                pairs.sort_unstable();
                Relation::explicit(
                    &self.space,
                    Rows::from_sorted_pairs(self.space.len(), &pairs),
                )
            }
            Body::Lazy(l) => match &l.kind {
                Lazy::Converse(r) => r.clone(),
                _ => Relation::lazy(&self.space, Lazy::Converse(self.clone())),
            },
        }
    }

    /// `R ∘ R′ = {(s, s′) | ∃s″: (s, s″) ∈ R ∧ (s″, s′) ∈ R′}`.
    pub fn compose(&self, other: &Relation) -> Result<Relation, RelError> {
        self.check_same(other)?;
        self.check_cap()?;
        Ok(Relation::explicit(
            &self.space,
            Rows::build(&self.space, |s| {
                let mut out: Vec<u32> = Vec::new();
                for &m in self.image(s).iter() {
                    out.extend_from_slice(&other.image(m as usize));
                }
                out.sort_unstable();
                out.dedup();
                out
            }),
        ))
    }

    /// dom(R)
    pub fn dom(&self) -> StateSet {
        let members: Vec<usize> = (0..self.space.len())
            .into_par_iter()
            .filter(|&s| self.has_image(s))
            .collect();
        StateSet::from_indices(&self.space, members)
    }

    /// `RL = dom(R) × S`.
    pub fn dom_vector(&self) -> Relation {
        Relation::vector(&self.dom())
    }

    /// `{(s, s′) ∈ R | s ∈ A}`.
    pub fn restrict_pre(&self, set: &StateSet) -> Result<Relation, RelError> {
        self.space.check_same(set.space())?;
        if self.is_explicit() {
            return Ok(Relation::explicit(
                &self.space,
                Rows::build(&self.space, |s| {
                    if set.contains(s) {
                        self.image(s).to_vec()
                    } else {
                        Vec::new()
                    }
                }),
            ));
        }
        Ok(Relation::lazy(
            &self.space,
            Lazy::And(self.clone(), Relation::vector(set)),
        ))
    }

    pub fn is_subset(&self, other: &Relation) -> Result<bool, RelError> {
        self.check_same(other)?;
        Ok((0..self.space.len()).into_par_iter().all(|s| {
            self.image(s)
                .iter()
                .all(|&t| other.contains(s, t as usize))
        }))
    }

    /// Semantic equality of pair sets, independent of representation.
    pub fn equals(&self, other: &Relation) -> Result<bool, RelError> {
        self.check_same(other)?;
        Ok((0..self.space.len())
            .into_par_iter()
            .all(|s| *self.image(s) == *other.image(s)))
    }

    fn all_rows(&self, pred: impl Fn(usize, &[u32]) -> bool + Sync) -> Result<bool, RelError> {
        if !self.is_explicit() {
            self.check_cap()?;
        }
        Ok((0..self.space.len())
            .into_par_iter()
            .all(|s| pred(s, &self.image(s))))
    }

    /// I ⊆ R
    pub fn is_reflexive(&self) -> Result<bool, RelError> {
        self.all_rows(|s, img| img.binary_search(&(s as u32)).is_ok())
    }

    /// R = R̂
    pub fn is_symmetric(&self) -> Result<bool, RelError> {
        self.all_rows(|s, img| img.iter().all(|&t| self.contains(t as usize, s)))
    }

    /// R ∩ R̂ ⊆ I
    pub fn is_antisymmetric(&self) -> Result<bool, RelError> {
        self.all_rows(|s, img| {
            img.iter()
                .all(|&t| t as usize == s || !self.contains(t as usize, s))
        })
    }

    /// R ∩ R̂ = ∅
    pub fn is_asymmetric(&self) -> Result<bool, RelError> {
        self.all_rows(|s, img| img.iter().all(|&t| !self.contains(t as usize, s)))
    }

    /// RR ⊆ R
    pub fn is_transitive(&self) -> Result<bool, RelError> {
        self.all_rows(|s, img| {
            img.iter().all(|&m| {
                self.image(m as usize)
                    .iter()
                    .all(|&t| self.contains(s, t as usize))
            })
        })
    }

    /// I ⊆ RR̂, i.e. every state has an image.
    pub fn is_total(&self) -> Result<bool, RelError> {
        if !self.is_explicit() {
            self.check_cap()?;
        }
        Ok((0..self.space.len()).into_par_iter().all(|s| self.has_image(s)))
    }

    /// R̂R ⊆ I, i.e. at most one image per state.
    pub fn is_deterministic(&self) -> Result<bool, RelError> {
        self.all_rows(|_, img| img.len() <= 1)
    }

    /// RL = R
    pub fn is_vector(&self) -> Result<bool, RelError> {
        let n = self.space.len();
        self.all_rows(|_, img| img.is_empty() || img.len() == n)
    }
}

impl fmt::Debug for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.space.len() <= 64 {
            f.debug_set().entries(self.pairs()).finish()
        } else {
            write!(
                f,
                "Relation({} states, {})",
                self.space.len(),
                if self.is_explicit() { "explicit" } else { "lazy" }
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Domain, VarDecl};

    fn space(n: i64) -> Space {
        Space::new("T", vec![VarDecl::new("s", Domain::Int { lo: 0, hi: n - 1 })]).unwrap()
    }

    fn rel(sp: &Space, pairs: &[(usize, usize)]) -> Relation {
        Relation::from_pairs(sp, pairs.iter().copied()).unwrap()
    }

    /// A specification and two deterministic candidates on four states.
    fn staircase() -> (Space, Relation, Relation, Relation) {
        let sp = space(4);
        let r = rel(&sp, &[(0, 0), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2), (3, 3)]);
        let p = rel(&sp, &[(0, 1), (1, 2), (2, 3)]);
        let p2 = rel(&sp, &[(1, 0), (2, 1), (3, 2)]);
        (sp, r, p, p2)
    }

    fn pairs(r: &Relation) -> Vec<(usize, usize)> {
        r.pairs().collect()
    }

    #[test]
    fn special_relations() {
        let sp = space(2);
        assert_eq!(Relation::universal(&sp).pair_count(), 4);
        let id = Relation::identity(&space(4));
        assert_eq!(pairs(&id), vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
        let e = Relation::empty(&sp);
        assert_eq!(e.pair_count(), 0);
        assert!(e.dom().is_empty());
    }

    #[test]
    fn staircase_intersections() {
        let (sp, r, p, p2) = staircase();
        assert_eq!(pairs(&r.intersection(&p).unwrap()), vec![(1, 2), (2, 3)]);
        assert_eq!(
            pairs(&r.intersection(&p2).unwrap()),
            vec![(1, 0), (2, 1), (3, 2)]
        );
        let expect = Relation::vector(&StateSet::from_indices(&sp, [1, 2]));
        assert!(r.intersection(&p).unwrap().dom_vector().equals(&expect).unwrap());
        let expect = Relation::vector(&StateSet::from_indices(&sp, [1, 2, 3]));
        assert!(r.intersection(&p2).unwrap().dom_vector().equals(&expect).unwrap());
        assert!(p.is_deterministic().unwrap());
        assert!(!p.is_total().unwrap());
    }

    #[test]
    fn converse_and_identity() {
        let sp = space(4);
        assert_eq!(pairs(&rel(&sp, &[(1, 2)]).converse()), vec![(2, 1)]);
        let id = Relation::identity(&sp);
        assert!(id.converse().equals(&id).unwrap());
        for pred in [
            Relation::is_reflexive,
            Relation::is_symmetric,
            Relation::is_antisymmetric,
            Relation::is_transitive,
            Relation::is_deterministic,
        ] {
            assert!(pred(&id).unwrap());
        }
        let l = Relation::universal(&space(3));
        assert!(l.is_total().unwrap());
        assert!(!l.is_deterministic().unwrap());
    }

    #[test]
    fn restrict_and_dom() {
        let sp = space(3);
        let one = StateSet::from_indices(&sp, [1]);
        let l = Relation::universal(&sp);
        assert!(l
            .restrict_pre(&one)
            .unwrap()
            .equals(&Relation::vector(&one))
            .unwrap());
        let r = rel(&sp, &[(0, 1), (2, 2)]);
        assert!(r.restrict_pre(&r.dom()).unwrap().equals(&r).unwrap());
    }

    #[test]
    fn lazy_matches_explicit() {
        let sp = space(5);
        let lazy = Relation::from_fn(&sp, |s, t| (s * 3 + t) % 4 == 1);
        let explicit = lazy.materialize().unwrap();
        assert!(explicit.is_explicit());
        assert!(lazy.equals(&explicit).unwrap());
        assert!(lazy.complement().complement().equals(&explicit).unwrap());
        assert!(lazy.converse().equals(&explicit.converse()).unwrap());
    }

    #[test]
    fn space_mismatch_is_an_error() {
        let a = Relation::identity(&space(3));
        let b = Relation::identity(&space(4));
        assert!(matches!(a.union(&b), Err(RelError::Space(_))));
        assert!(matches!(a.compose(&b), Err(RelError::Space(_))));
    }

    #[test]
    fn cap_is_enforced() {
        let sp = space(10).with_materialization_cap(5);
        let lazy = Relation::from_fn(&sp, |s, t| s == t);
        assert!(matches!(lazy.materialize(), Err(RelError::CapExceeded { .. })));
        assert!(matches!(lazy.compose(&lazy), Err(RelError::CapExceeded { .. })));
        assert!(matches!(lazy.is_total(), Err(RelError::CapExceeded { .. })));
        // Row-streaming operations still work.
        assert_eq!(lazy.dom().len(), 10);
    }
}
