//! Regular expressions over `(action, probability, state)` triples, built by
//! state elimination, and their normal-form terms.
//!
//! The value of an expression is the probability mass of the paths it
//! denotes: atoms give their probability, concatenation multiplies, union
//! adds and `r*` gives `1 / (1 - val(r))`.

use crate::graph::tarjan;
use crate::ihs::{ActionKind, Ihs};
use crate::leakage::{fmt_trace, Trace};
use crate::rational::{fmt_rational, Prob};
use crate::{Error, Result};
use num::{One, Zero};
use std::collections::BTreeMap;

/// Largest number of normal-form terms expanded by default.
pub const DEFAULT_TERM_LIMIT: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Regex {
    Eps,
    Atom { action: String, prob: Prob, state: usize },
    Cat(Vec<Regex>),
    Union(Vec<Regex>),
    Star(Box<Regex>),
}

impl Regex {
    /// The empty language.
    pub fn empty() -> Regex {
        Regex::Union(Vec::new())
    }

    pub fn is_empty_language(&self) -> bool {
        matches!(self, Regex::Union(v) if v.is_empty())
    }

    pub fn cat(parts: impl IntoIterator<Item = Regex>) -> Regex {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Regex::Eps => {}
                Regex::Cat(inner) => out.extend(inner),
                r if r.is_empty_language() => return Regex::empty(),
                r => out.push(r),
            }
        }
        match out.len() {
            0 => Regex::Eps,
            1 => out.pop().unwrap(),
            _ => Regex::Cat(out),
        }
    }

    pub fn union(parts: impl IntoIterator<Item = Regex>) -> Regex {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Regex::Union(inner) => out.extend(inner),
                r => out.push(r),
            }
        }
        if out.len() == 1 {
            out.pop().unwrap()
        } else {
            Regex::Union(out)
        }
    }

    pub fn star(r: Regex) -> Regex {
        match r {
            Regex::Eps => Regex::Eps,
            r if r.is_empty_language() => Regex::Eps,
            r => Regex::Star(Box::new(r)),
        }
    }

    /// Number of normal-form terms, saturating.
    pub fn term_count(&self) -> u128 {
        match self {
            Regex::Eps | Regex::Atom { .. } | Regex::Star(_) => 1,
            Regex::Union(v) => v.iter().fold(0u128, |a, r| a.saturating_add(r.term_count())),
            Regex::Cat(v) => v.iter().fold(1u128, |a, r| a.saturating_mul(r.term_count())),
        }
    }

    /// Renders atoms as `<action,p,state>` using the state names of `h`.
    pub fn display(&self, h: &Ihs) -> String {
        match self {
            Regex::Eps => "ε".into(),
            Regex::Atom { action, prob, state } => format!("<{action},{},{}>", fmt_rational(prob), h.states[*state]),
            Regex::Cat(v) => v.iter().map(|r| wrap(r, h)).collect::<Vec<_>>().join(" "),
            Regex::Union(v) if v.is_empty() => "∅".into(),
            Regex::Union(v) => v.iter().map(|r| r.display(h)).collect::<Vec<_>>().join(" + "),
            Regex::Star(r) => format!("({})*", r.display(h)),
        }
    }
}

fn wrap(r: &Regex, h: &Ihs) -> String {
    match r {
        Regex::Union(v) if v.len() > 1 => format!("({})", r.display(h)),
        _ => r.display(h),
    }
}

/// Probability mass denoted by `r`. A star whose body has value 1 or more
/// would loop forever and is reported as divergent.
pub fn regex_val(r: &Regex) -> Result<Prob> {
    Ok(match r {
        Regex::Eps => Prob::one(),
        Regex::Atom { prob, .. } => prob.clone(),
        Regex::Cat(v) => {
            let mut acc = Prob::one();
            for x in v {
                acc *= regex_val(x)?;
            }
            acc
        }
        Regex::Union(v) => {
            let mut acc = Prob::zero();
            for x in v {
                acc += regex_val(x)?;
            }
            acc
        }
        Regex::Star(b) => {
            let v = regex_val(b)?;
            if v >= Prob::one() {
                return Err(Error::Divergent(format!("star body has value {}", fmt_rational(&v))));
            }
            Prob::one() / (Prob::one() - v)
        }
    })
}

/// Equivalent expression for the complete paths of `h`, obtained by
/// eliminating states sinks-first along the component order and by index
/// inside a component.
pub fn to_regex(h: &Ihs) -> Result<Regex> {
    if h.variable_prior {
        return Err(Error::VariablePrior);
    }
    let n = h.len();
    let fin = n;
    let mut edges: BTreeMap<(usize, usize), Regex> = BTreeMap::new();
    let add = |edges: &mut BTreeMap<(usize, usize), Regex>, u: usize, v: usize, r: Regex| {
        let e = edges.remove(&(u, v));
        let joined = match e {
            Some(old) => Regex::union([old, r]),
            None => r,
        };
        edges.insert((u, v), joined);
    };
    let mut has_incoming_init = false;
    for q in 0..n {
        if h.is_terminal(q) {
            add(&mut edges, q, fin, Regex::Eps);
        }
        for e in h.trans[q].iter().flatten() {
            has_incoming_init |= e.target == h.init;
            let atom = Regex::Atom { action: e.action.clone(), prob: e.prob.clone(), state: e.target };
            add(&mut edges, q, e.target, atom);
        }
    }
    let start = if has_incoming_init {
        add(&mut edges, n + 1, h.init, Regex::Eps);
        n + 1
    } else {
        h.init
    };
    for q in elimination_order(h).into_iter().filter(|&q| q != start) {
        let loop_r = edges.remove(&(q, q)).map(Regex::star).unwrap_or(Regex::Eps);
        let ins: Vec<(usize, Regex)> =
            edges.iter().filter(|((_, v), _)| *v == q).map(|((u, _), r)| (*u, r.clone())).collect();
        let outs: Vec<(usize, Regex)> =
            edges.iter().filter(|((u, _), _)| *u == q).map(|((_, v), r)| (*v, r.clone())).collect();
        edges.retain(|(u, v), _| *u != q && *v != q);
        for (u, rin) in &ins {
            for (v, rout) in &outs {
                add(&mut edges, *u, *v, Regex::cat([rin.clone(), loop_r.clone(), rout.clone()]));
            }
        }
    }
    Ok(edges.remove(&(start, fin)).unwrap_or_else(Regex::empty))
}

fn elimination_order(h: &Ihs) -> Vec<usize> {
    let mut order = Vec::with_capacity(h.len());
    for mut comp in tarjan(&h.successors()) {
        comp.sort_unstable();
        order.extend(comp);
    }
    order
}

/// One summand of the normal form: a concatenation of atoms and stars.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub factors: Vec<Regex>,
    pub secret: Trace,
    pub observable: Trace,
    pub val: Prob,
}

impl Term {
    pub fn as_regex(&self) -> Regex {
        Regex::cat(self.factors.iter().cloned())
    }

    /// Target states of the top-level atoms, starting with `from`.
    pub fn skeleton(&self, from: usize) -> Vec<usize> {
        let mut out = vec![from];
        out.extend(self.factors.iter().filter_map(|f| match f {
            Regex::Atom { state, .. } => Some(*state),
            _ => None,
        }));
        out
    }
}

/// Normal-form terms with the ones dropped for divergence.
#[derive(Debug, Clone)]
pub struct TermSet {
    pub terms: Vec<Term>,
    pub warnings: Vec<String>,
}

/// Distributes concatenation over union everywhere except inside stars.
pub fn normal_form(r: &Regex, limit: usize) -> Result<Vec<Vec<Regex>>> {
    if r.term_count() > limit as u128 {
        return Err(Error::TermExplosion(limit));
    }
    Ok(expand(r))
}

fn expand(r: &Regex) -> Vec<Vec<Regex>> {
    match r {
        Regex::Eps => vec![vec![]],
        Regex::Atom { .. } | Regex::Star(_) => vec![vec![r.clone()]],
        Regex::Union(v) => v.iter().flat_map(expand).collect(),
        Regex::Cat(v) => {
            let mut acc: Vec<Vec<Regex>> = vec![vec![]];
            for part in v {
                let tails = expand(part);
                let mut next = Vec::with_capacity(acc.len() * tails.len());
                for a in &acc {
                    for t in &tails {
                        let mut x = a.clone();
                        x.extend(t.iter().cloned());
                        next.push(x);
                    }
                }
                acc = next;
            }
            acc
        }
    }
}

/// Normal-form terms of `h` in expansion order, each with its traces and
/// value. Terms whose value diverges are dropped with a warning.
pub fn regex_terms(h: &Ihs, limit: usize) -> Result<TermSet> {
    let r = to_regex(h)?;
    let mut terms = Vec::new();
    let mut warnings = Vec::new();
    for factors in normal_form(&r, limit)? {
        let mut secret = Vec::new();
        let mut observable = Vec::new();
        for f in &factors {
            match f {
                Regex::Atom { action, .. } => match h.kind_of(action) {
                    ActionKind::Secret => secret.push(action.clone()),
                    ActionKind::Observable => observable.push(action.clone()),
                    ActionKind::Internal => {}
                },
                Regex::Star(body) if !internal_only(h, body) => {
                    return Err(Error::Unsupported("visible action under a star".into()));
                }
                _ => {}
            }
        }
        let term = Regex::cat(factors.iter().cloned());
        match regex_val(&term) {
            Ok(val) => terms.push(Term { factors, secret, observable, val }),
            Err(e) => warnings.push(format!(
                "term ({}, {}) dropped: {e}",
                fmt_trace(&secret),
                fmt_trace(&observable)
            )),
        }
    }
    Ok(TermSet { terms, warnings })
}

fn internal_only(h: &Ihs, r: &Regex) -> bool {
    match r {
        Regex::Eps => true,
        Regex::Atom { action, .. } => h.kind_of(action) == ActionKind::Internal,
        Regex::Cat(v) | Regex::Union(v) => v.iter().all(|x| internal_only(h, x)),
        Regex::Star(b) => internal_only(h, b),
    }
}
