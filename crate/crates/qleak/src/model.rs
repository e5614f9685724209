//! Markov chains and Markov decision processes with exact probabilities.

use crate::prop::Prop;
use crate::rational::{is_probability, Prob};
use num::{One, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Mc,
    Mdp,
}

/// Finitely supported distribution over state indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Distribution {
    pub entries: BTreeMap<usize, Prob>,
}

impl Distribution {
    pub fn dirac(target: usize) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(target, Prob::one());
        Distribution { entries }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, Prob)>) -> Self {
        let mut entries: BTreeMap<usize, Prob> = BTreeMap::new();
        for (t, p) in pairs {
            if p.is_zero() {
                continue;
            }
            *entries.entry(t).or_insert_with(Prob::zero) += p;
        }
        Distribution { entries }
    }

    pub fn total(&self) -> Prob {
        self.entries.values().fold(Prob::zero(), |a, b| a + b)
    }

    pub fn prob(&self, t: usize) -> Prob {
        self.entries.get(&t).cloned().unwrap_or_else(Prob::zero)
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().filter(|(_, p)| !p.is_zero()).map(|(t, _)| *t)
    }

    pub fn is_dirac_on(&self, s: usize) -> bool {
        self.entries.len() == 1 && self.entries.get(&s).is_some_and(|p| p.is_one())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Choice {
    pub label: String,
    pub dist: Distribution,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkovModel {
    pub kind: ModelKind,
    pub states: Vec<String>,
    pub init: usize,
    pub labels: Vec<BTreeSet<String>>,
    pub choices: Vec<Vec<Choice>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

impl MarkovModel {
    /// Builds an MC from one row per state. Names default to `s0, s1, ...`.
    pub fn mc(rows: Vec<Distribution>, init: usize, labels: Vec<BTreeSet<String>>) -> Self {
        let n = rows.len();
        MarkovModel {
            kind: ModelKind::Mc,
            states: (0..n).map(|i| format!("s{i}")).collect(),
            init,
            labels,
            choices: rows
                .into_iter()
                .map(|dist| vec![Choice { label: "0".to_string(), dist }])
                .collect(),
        }
    }

    /// Builds an MDP from per-state choice lists with positional labels.
    pub fn mdp(choices: Vec<Vec<Distribution>>, init: usize, labels: Vec<BTreeSet<String>>) -> Self {
        let n = choices.len();
        MarkovModel {
            kind: ModelKind::Mdp,
            states: (0..n).map(|i| format!("s{i}")).collect(),
            init,
            labels,
            choices: choices
                .into_iter()
                .map(|cs| {
                    cs.into_iter()
                        .enumerate()
                        .map(|(i, dist)| Choice { label: i.to_string(), dist })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_mc(&self) -> bool {
        self.kind == ModelKind::Mc
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn row(&self, s: usize) -> &Distribution {
        &self.choices[s][0].dist
    }

    /// States satisfying `p`.
    pub fn sat(&self, p: &Prop) -> Vec<bool> {
        self.labels.iter().map(|l| p.eval(l)).collect()
    }

    /// Union of the supports of all choices, sorted and deduplicated.
    pub fn successors(&self) -> Vec<Vec<usize>> {
        self.choices
            .iter()
            .map(|cs| {
                let set: BTreeSet<usize> = cs.iter().flat_map(|c| c.dist.support()).collect();
                set.into_iter().collect()
            })
            .collect()
    }

    /// Every choice of `s` is a Dirac self-loop.
    pub fn is_absorbing(&self, s: usize) -> bool {
        self.choices[s].iter().all(|c| c.dist.is_dirac_on(s))
    }

    /// Same model viewed as an MDP.
    pub fn as_mdp(&self) -> MarkovModel {
        MarkovModel { kind: ModelKind::Mdp, ..self.clone() }
    }
}

/// Structural checks; an empty report means the model is well formed.
pub fn validate_model(m: &MarkovModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = m.states.len();
    let at = |s: usize| format!("state {}", m.states.get(s).cloned().unwrap_or_else(|| s.to_string()));
    if n == 0 {
        out.push(Violation { location: "model".into(), message: "no states".into() });
        return out;
    }
    if m.init >= n {
        out.push(Violation { location: "model".into(), message: "initial state out of range".into() });
    }
    if m.labels.len() != n || m.choices.len() != n {
        out.push(Violation {
            location: "model".into(),
            message: "label or choice table length differs from state count".into(),
        });
        return out;
    }
    let mut seen = BTreeSet::new();
    for (i, name) in m.states.iter().enumerate() {
        if !seen.insert(name) {
            out.push(Violation { location: at(i), message: "duplicate state name".into() });
        }
    }
    for (s, cs) in m.choices.iter().enumerate() {
        if cs.is_empty() {
            out.push(Violation { location: at(s), message: "no choices".into() });
        }
        if m.kind == ModelKind::Mc && cs.len() > 1 {
            out.push(Violation {
                location: at(s),
                message: format!("Markov chain state has {} choices", cs.len()),
            });
        }
        for c in cs {
            let loc = if m.kind == ModelKind::Mc { at(s) } else { format!("{}, choice {}", at(s), c.label) };
            for (t, p) in &c.dist.entries {
                if *t >= n {
                    out.push(Violation { location: loc.clone(), message: format!("target index {t} out of range") });
                }
                if !is_probability(p) || p.is_zero() {
                    out.push(Violation { location: loc.clone(), message: format!("probability {p} outside (0,1]") });
                }
            }
            let total = c.dist.total();
            if !total.is_one() {
                out.push(Violation { location: loc, message: format!("row sum {total} != 1") });
            }
        }
    }
    out
}
