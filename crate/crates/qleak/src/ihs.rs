//! Information-hiding systems: fully probabilistic automata whose actions
//! are split into secrets, observables and internal steps.

use crate::graph::tarjan;
use crate::model::Violation;
use crate::rational::{is_probability, Prob};
use crate::{Error, Result};
use num::{One, Zero};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActEntry {
    pub prob: Prob,
    pub action: String,
    pub target: usize,
}

/// A distribution over `(action, state)` pairs, in declaration order.
pub type ActDist = Vec<ActEntry>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ihs {
    pub states: Vec<String>,
    pub init: usize,
    pub secrets: Vec<String>,
    pub observables: Vec<String>,
    /// Distributions per state: none for a terminal state, one otherwise,
    /// and one Dirac choice per secret at the initial state of a
    /// variable-prior system.
    pub trans: Vec<Vec<ActDist>>,
    pub variable_prior: bool,
    /// Secrets and observables may interleave anywhere.
    pub interactive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    Secret,
    Observable,
    Internal,
}

impl Ihs {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn kind_of(&self, action: &str) -> ActionKind {
        if self.secrets.iter().any(|a| a == action) {
            ActionKind::Secret
        } else if self.observables.iter().any(|a| a == action) {
            ActionKind::Observable
        } else {
            ActionKind::Internal
        }
    }

    pub fn is_terminal(&self, q: usize) -> bool {
        self.trans[q].is_empty()
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    /// Underlying graph over all distributions.
    pub fn successors(&self) -> Vec<Vec<usize>> {
        self.trans
            .iter()
            .map(|ds| {
                let mut v: Vec<usize> = ds.iter().flatten().map(|e| e.target).collect();
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect()
    }
}

/// A priori distribution over secrets, in the system's secret order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prior {
    pub entries: Vec<(String, Prob)>,
}

impl Prior {
    pub fn get(&self, secret: &str) -> Prob {
        self.entries.iter().find(|(s, _)| s == secret).map(|(_, p)| p.clone()).unwrap_or_else(Prob::zero)
    }

    pub fn uniform(secrets: &[String]) -> Prior {
        let p = Prob::new(1.into(), (secrets.len() as i64).into());
        Prior { entries: secrets.iter().map(|s| (s.clone(), p.clone())).collect() }
    }

    pub fn total(&self) -> Prob {
        self.entries.iter().fold(Prob::zero(), |acc, (_, p)| acc + p)
    }

    pub fn vulnerability(&self) -> Prob {
        self.entries.iter().map(|(_, p)| p.clone()).max().unwrap_or_else(Prob::zero)
    }
}

fn at(h: &Ihs, q: usize, c: usize) -> String {
    if h.trans[q].len() > 1 {
        format!("state {}, choice {c}", h.states[q])
    } else {
        format!("state {}", h.states[q])
    }
}

pub fn validate_ihs(h: &Ihs) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |location: String, message: String| out.push(Violation { location, message });
    let n = h.len();
    if h.init >= n {
        push("init".into(), format!("initial state index {} out of range", h.init));
        return out;
    }
    for a in &h.secrets {
        if h.observables.contains(a) {
            push("actions".into(), format!("action `{a}` is both secret and observable"));
        }
    }
    if h.variable_prior && h.interactive {
        push("header".into(), "a system cannot be both interactive and variable-prior".into());
    }
    let mut names = BTreeMap::new();
    for (q, name) in h.states.iter().enumerate() {
        if let Some(prev) = names.insert(name.clone(), q) {
            push(format!("state {name}"), format!("duplicate state name (also state {prev})"));
        }
    }
    let mut structural = true;
    for q in 0..n {
        let ds = &h.trans[q];
        if ds.len() > 1 && !(h.variable_prior && q == h.init) {
            push(
                format!("state {}", h.states[q]),
                format!("state has {} distributions; only the initial state of a variable-prior system may branch", ds.len()),
            );
        }
        for (c, d) in ds.iter().enumerate() {
            let mut total = Prob::zero();
            for e in d {
                if e.target >= n {
                    push(at(h, q, c), format!("target index {} out of range", e.target));
                    structural = false;
                }
                if !is_probability(&e.prob) || e.prob.is_zero() {
                    push(at(h, q, c), format!("probability {} outside (0,1]", e.prob));
                }
                total += &e.prob;
            }
            if !total.is_one() {
                push(at(h, q, c), format!("row sum {total} != 1"));
            }
        }
    }
    if !structural {
        return out;
    }
    // secret placement
    if !h.interactive {
        let mut count: BTreeMap<&str, usize> = BTreeMap::new();
        for (c, d) in h.trans[h.init].iter().enumerate() {
            if h.variable_prior && !(d.len() == 1 && h.kind_of(&d[0].action) == ActionKind::Secret) {
                push(at(h, h.init, c), "initial choice must be a single secret transition with probability 1".into());
            }
            for e in d {
                if h.kind_of(&e.action) == ActionKind::Secret {
                    *count.entry(e.action.as_str()).or_default() += 1;
                } else if !h.variable_prior {
                    push(at(h, h.init, c), format!("initial distribution emits non-secret action `{}`", e.action));
                }
            }
        }
        for (a, k) in &count {
            if *k > 1 {
                push(format!("state {}", h.states[h.init]), format!("secret `{a}` occurs on {k} initial transitions"));
            }
        }
        if h.variable_prior {
            for a in &h.secrets {
                if !count.contains_key(a.as_str()) {
                    push(format!("state {}", h.states[h.init]), format!("secret `{a}` has no initial choice"));
                }
            }
        }
        for q in (0..n).filter(|&q| q != h.init) {
            for (c, d) in h.trans[q].iter().enumerate() {
                for e in d {
                    if h.kind_of(&e.action) == ActionKind::Secret {
                        push(at(h, q, c), format!("secret `{}` emitted outside the initial state", e.action));
                    }
                }
            }
        }
    }
    // cycles may only use internal actions
    let comps = tarjan(&h.successors());
    let mut comp_of = vec![0; n];
    for (k, c) in comps.iter().enumerate() {
        for &q in c {
            comp_of[q] = k;
        }
    }
    for q in 0..n {
        for (c, d) in h.trans[q].iter().enumerate() {
            for e in d {
                if comp_of[e.target] == comp_of[q] && h.kind_of(&e.action) != ActionKind::Internal {
                    push(at(h, q, c), format!("non-internal action `{}` on cycle", e.action));
                }
            }
        }
    }
    // termination: bottom components must be single terminal states
    let succ = h.successors();
    for (k, comp) in comps.iter().enumerate() {
        let bottom = comp.iter().all(|&q| succ[q].iter().all(|&t| comp_of[t] == k));
        if bottom && !(comp.len() == 1 && h.is_terminal(comp[0])) {
            let mut names: Vec<&str> = comp.iter().map(|&q| h.states[q].as_str()).collect();
            names.sort_unstable();
            push(
                format!("state {}", names[0]),
                format!("non-terminating with probability 1: bottom component {{{}}} is not a terminal state", names.join(",")),
            );
        }
    }
    out
}

/// The a priori distribution read off the initial state. Interactive
/// systems derive it from the joint matrix over secret traces, so their
/// entries are keyed by trace.
pub fn prior_of(h: &Ihs) -> Result<Prior> {
    if h.variable_prior {
        return Err(Error::VariablePrior);
    }
    if h.interactive {
        let j = crate::leakage::joint_matrix(h)?;
        return Ok(j.row_prior());
    }
    let mut entries: Vec<(String, Prob)> = h.secrets.iter().map(|s| (s.clone(), Prob::zero())).collect();
    for d in &h.trans[h.init] {
        for e in d {
            if let Some(slot) = entries.iter_mut().find(|(s, _)| *s == e.action) {
                slot.1 += &e.prob;
            }
        }
    }
    Ok(Prior { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn e(p: Prob, a: &str, t: usize) -> ActEntry {
        ActEntry { prob: p, action: a.into(), target: t }
    }

    fn names(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    /// init -a-> q1 -o-> end, init -b-> q2 -o-> end.
    fn small() -> Ihs {
        Ihs {
            states: names(&["init", "q1", "q2", "end"]),
            init: 0,
            secrets: names(&["a", "b"]),
            observables: names(&["o"]),
            trans: vec![
                vec![vec![e(ratio(1, 4), "a", 1), e(ratio(3, 4), "b", 2)]],
                vec![vec![e(ratio(1, 1), "o", 3)]],
                vec![vec![e(ratio(1, 1), "o", 3)]],
                vec![],
            ],
            variable_prior: false,
            interactive: false,
        }
    }

    #[test]
    fn valid_system_and_prior() {
        let h = small();
        assert!(validate_ihs(&h).is_empty());
        let p = prior_of(&h).unwrap();
        assert_eq!(p.get("a"), ratio(1, 4));
        assert_eq!(p.total(), ratio(1, 1));
    }

    #[test]
    fn observable_self_loop_rejected() {
        let mut h = small();
        h.trans[1] = vec![vec![e(ratio(1, 2), "o", 1), e(ratio(1, 2), "o", 3)]];
        let v = validate_ihs(&h);
        assert!(v.iter().any(|x| x.message.contains("non-internal action `o` on cycle")), "{v:?}");
    }

    #[test]
    fn internal_bottom_component_rejected() {
        let mut h = small();
        h.states.push("x".into());
        h.trans.push(vec![vec![e(ratio(1, 1), "tau", 1)]]);
        // q1 <-> x now forms a bottom component without terminal state
        h.trans[1] = vec![vec![e(ratio(1, 1), "tau", 4)]];
        let v = validate_ihs(&h);
        assert!(v.iter().any(|x| x.message.contains("non-terminating")), "{v:?}");
    }

    #[test]
    fn secret_outside_init_rejected() {
        let mut h = small();
        h.trans[1] = vec![vec![e(ratio(1, 1), "a", 3)]];
        assert!(validate_ihs(&h).iter().any(|x| x.message.contains("outside the initial state")));
    }

    #[test]
    fn variable_prior_has_no_prior() {
        let mut h = small();
        h.variable_prior = true;
        h.trans[0] = vec![vec![e(ratio(1, 1), "a", 1)], vec![e(ratio(1, 1), "b", 2)]];
        assert!(validate_ihs(&h).is_empty());
        assert!(matches!(prior_of(&h), Err(Error::VariablePrior)));
    }
}
