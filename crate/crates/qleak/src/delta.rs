//! Finite disjunctions of probability pairs `(p, q)` with `q >= p`.
//!
//! A pair stands for the probabilities `(P(phi & psi), P(psi))` reached by
//! one resolution of nondeterminism. `rmax` is the best ratio `p / q`.
//! Normalization drops pairs that can never be the better choice, whatever
//! is later added or scaled:
//!
//! 1. same `p`: keep the smallest `q`;
//! 2. same `q`: keep the largest `p`;
//! 3. same `q - p`: keep the largest `p`.

use crate::rational::Prob;
use num::{One, Zero};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaExpr {
    pairs: Vec<(Prob, Prob)>,
}

impl DeltaExpr {
    /// Builds a normalized expression. Panics if some `q < p`.
    pub fn new(pairs: impl IntoIterator<Item = (Prob, Prob)>) -> Self {
        let items: Vec<(Prob, Prob, ())> = pairs.into_iter().map(|(p, q)| (p, q, ())).collect();
        DeltaExpr::from_items(normalize(items))
    }

    /// Builds an expression without normalizing it.
    pub fn raw(pairs: impl IntoIterator<Item = (Prob, Prob)>) -> Self {
        let pairs: Vec<(Prob, Prob)> = pairs.into_iter().collect();
        assert!(pairs.iter().all(|(p, q)| q >= p && !p.is_negative_rat()), "pairs need 0 <= p <= q");
        DeltaExpr { pairs }
    }

    fn from_items(items: Vec<(Prob, Prob, ())>) -> Self {
        DeltaExpr { pairs: items.into_iter().map(|(p, q, _)| (p, q)).collect() }
    }

    pub fn zero() -> Self {
        DeltaExpr { pairs: vec![(Prob::zero(), Prob::zero())] }
    }

    pub fn pairs(&self) -> &[(Prob, Prob)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn normalized(&self) -> Self {
        DeltaExpr::new(self.pairs.iter().cloned())
    }

    /// Disjunction of two expressions.
    pub fn or(&self, other: &DeltaExpr) -> Self {
        DeltaExpr::new(self.pairs.iter().chain(&other.pairs).cloned())
    }
}

trait NonNeg {
    fn is_negative_rat(&self) -> bool;
}

impl NonNeg for Prob {
    fn is_negative_rat(&self) -> bool {
        *self < Prob::zero()
    }
}

/// Normalizes pairs carrying an arbitrary payload; the surviving payloads
/// are those of the kept pairs. The output is sorted by `(p, q)`.
pub fn normalize<T>(mut items: Vec<(Prob, Prob, T)>) -> Vec<(Prob, Prob, T)> {
    items.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
    items.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    loop {
        let before = items.len();
        // rule 1: equal p, keep min q (first in sorted order)
        items.dedup_by(|later, earlier| later.0 == earlier.0);
        // rule 2: equal q, keep max p
        let mut best_p: BTreeMap<Prob, Prob> = BTreeMap::new();
        for (p, q, _) in &items {
            let e = best_p.entry(q.clone()).or_insert_with(|| p.clone());
            if p > e {
                *e = p.clone();
            }
        }
        items.retain(|(p, q, _)| best_p[q] == *p);
        // rule 3: equal q - p, keep max p
        let mut best_shift: BTreeMap<Prob, Prob> = BTreeMap::new();
        for (p, q, _) in &items {
            let d = q - p;
            let e = best_shift.entry(d).or_insert_with(|| p.clone());
            if p > e {
                *e = p.clone();
            }
        }
        items.retain(|(p, q, _)| best_shift[&(q - p)] == *p);
        if items.len() == before {
            return items;
        }
    }
}

/// `c ⊙ d`: scales every pair.
pub fn delta_scale(c: &Prob, d: &DeltaExpr) -> DeltaExpr {
    DeltaExpr::new(d.pairs.iter().map(|(p, q)| (c * p, c * q)))
}

/// `a ⊕ b`: all pairwise sums.
pub fn delta_add(a: &DeltaExpr, b: &DeltaExpr) -> DeltaExpr {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for (p1, q1) in &a.pairs {
        for (p2, q2) in &b.pairs {
            out.push((p1 + p2, q1 + q2));
        }
    }
    DeltaExpr::new(out)
}

/// `⊤ d`: the largest quotient `p / q` over pairs with `q != 0`, or 0.
pub fn delta_rmax(d: &DeltaExpr) -> Prob {
    rmax_of(d.pairs.iter().map(|(p, q)| (p, q)))
}

pub(crate) fn rmax_of<'a>(pairs: impl Iterator<Item = (&'a Prob, &'a Prob)>) -> Prob {
    let mut best = Prob::zero();
    for (p, q) in pairs {
        if !q.is_zero() {
            let r = p / q;
            if r > best {
                best = r;
            }
        }
    }
    best
}

/// Index of the pair attaining `rmax` (first in order on ties), if any
/// pair has a nonzero denominator.
pub(crate) fn argmax_of<'a>(pairs: impl Iterator<Item = (&'a Prob, &'a Prob)>) -> Option<usize> {
    let mut best: Option<(usize, Prob)> = None;
    for (i, (p, q)) in pairs.enumerate() {
        if q.is_zero() {
            continue;
        }
        let r = p / q;
        if best.as_ref().is_none_or(|(_, b)| r > *b) {
            best = Some((i, r));
        }
    }
    best.map(|(i, _)| i)
}

impl Default for DeltaExpr {
    fn default() -> Self {
        DeltaExpr::zero()
    }
}

/// Whether the pair is a valid component: `0 <= p <= q`.
pub fn valid_pair(p: &Prob, q: &Prob) -> bool {
    !p.is_negative_rat() && q >= p
}

/// The neutral element of `⊕`.
pub fn unit() -> DeltaExpr {
    DeltaExpr::zero()
}

/// The pair `(1, 1)`.
pub fn certain() -> DeltaExpr {
    DeltaExpr { pairs: vec![(Prob::one(), Prob::one())] }
}
