//! Product of a model with status automata tracking path formulas.

use crate::formula::PathFormula;
use crate::model::{Choice, Distribution, MarkovModel};
use crate::rational::Prob;
use crate::reach::{solve_terminal, Mode};
use num::{One, Zero};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Progress of one path formula along a run. Globally formulas never
/// become `Sat`; they stay `Pending` while alive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Status {
    Pending,
    Sat,
    Fail,
}

impl Status {
    fn code(self) -> char {
        match self {
            Status::Pending => 'p',
            Status::Sat => 's',
            Status::Fail => 'f',
        }
    }
}

/// Status after entering a state with the given labels.
pub fn step(f: &PathFormula, st: Status, labels: &BTreeSet<String>) -> Status {
    if st != Status::Pending {
        return st;
    }
    match f {
        PathFormula::Until(a, b) => {
            if b.eval(labels) {
                Status::Sat
            } else if a.eval(labels) {
                Status::Pending
            } else {
                Status::Fail
            }
        }
        PathFormula::Globally(a) => {
            if a.eval(labels) {
                Status::Pending
            } else {
                Status::Fail
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Product {
    pub model: MarkovModel,
    /// Underlying state of every product state.
    pub base: Vec<usize>,
    pub status: Vec<Vec<Status>>,
}

/// Reachable part of the product; choices mirror the underlying model.
pub fn product(m: &MarkovModel, formulas: &[PathFormula]) -> Product {
    let start: Vec<Status> = formulas.iter().map(|f| step(f, Status::Pending, &m.labels[m.init])).collect();
    let mut index: BTreeMap<(usize, Vec<Status>), usize> = BTreeMap::new();
    let mut base = Vec::new();
    let mut status = Vec::new();
    let mut queue = VecDeque::new();
    index.insert((m.init, start.clone()), 0);
    base.push(m.init);
    status.push(start.clone());
    queue.push_back((m.init, start));
    let mut raw: Vec<Vec<Vec<(usize, Prob)>>> = Vec::new();
    while let Some((s, st)) = queue.pop_front() {
        let mut cs = Vec::new();
        for c in &m.choices[s] {
            let mut d = Vec::new();
            for (&t, p) in &c.dist.entries {
                let nst: Vec<Status> =
                    formulas.iter().zip(&st).map(|(f, &x)| step(f, x, &m.labels[t])).collect();
                let key = (t, nst.clone());
                let id = match index.get(&key) {
                    Some(&i) => i,
                    None => {
                        let i = base.len();
                        index.insert(key, i);
                        base.push(t);
                        status.push(nst.clone());
                        queue.push_back((t, nst));
                        i
                    }
                };
                d.push((id, p.clone()));
            }
            cs.push(d);
        }
        raw.push(cs);
    }
    let model = MarkovModel {
        kind: m.kind,
        states: base
            .iter()
            .zip(&status)
            .map(|(&s, st)| format!("{}[{}]", m.states[s], st.iter().map(|x| x.code()).collect::<String>()))
            .collect(),
        init: 0,
        labels: base.iter().map(|&s| m.labels[s].clone()).collect(),
        choices: raw
            .into_iter()
            .zip(&base)
            .map(|(cs, &s)| {
                cs.into_iter()
                    .zip(&m.choices[s])
                    .map(|(d, c)| Choice { label: c.label.clone(), dist: Distribution::from_pairs(d) })
                    .collect()
            })
            .collect(),
    };
    Product { model, base, status }
}

/// Whether every formula is settled true: until formulas satisfied and no
/// globally formula failed.
pub fn settled_true(formulas: &[PathFormula], st: &[Status]) -> bool {
    formulas.iter().zip(st).all(|(f, &x)| match f {
        PathFormula::Until(..) => x == Status::Sat,
        PathFormula::Globally(..) => x != Status::Fail,
    })
}

/// Per product state: the optimal probability that all globally formulas
/// survive forever from there.
pub fn survival_values(p: &Product, formulas: &[PathFormula], mode: Mode) -> Vec<Prob> {
    let gs: Vec<usize> =
        (0..formulas.len()).filter(|&i| matches!(formulas[i], PathFormula::Globally(_))).collect();
    if gs.is_empty() {
        return vec![Prob::one(); p.model.len()];
    }
    let fail: Vec<Option<Prob>> = p
        .status
        .iter()
        .map(|st| if gs.iter().any(|&i| st[i] == Status::Fail) { Some(Prob::one()) } else { None })
        .collect();
    let r = solve_terminal(&p.model, &fail, mode.opposite());
    r.values.into_iter().map(|v| Prob::one() - v).collect()
}

/// Optimal probability (from the initial state) that all formulas hold.
pub fn conjunction_prob(m: &MarkovModel, formulas: &[PathFormula], mode: Mode) -> Prob {
    conjunction_values(m, formulas, mode).1
}

pub fn conjunction_values(m: &MarkovModel, formulas: &[PathFormula], mode: Mode) -> (Product, Prob) {
    let p = product(m, formulas);
    let safe = survival_values(&p, formulas, mode);
    let terminal: Vec<Option<Prob>> = p
        .status
        .iter()
        .enumerate()
        .map(|(i, st)| {
            if st.contains(&Status::Fail) {
                Some(Prob::zero())
            } else if settled_true(formulas, st) {
                Some(safe[i].clone())
            } else {
                None
            }
        })
        .collect();
    let r = solve_terminal(&p.model, &terminal, mode);
    let v = r.values[p.model.init].clone();
    (p, v)
}
