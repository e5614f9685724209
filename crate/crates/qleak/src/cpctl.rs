//! Conditional probabilities `CP[φ | ψ]` on Markov chains and decision
//! processes.
//!
//! On an MDP the maximum is computed on the acyclic reduction whose
//! absorbing states are the stopping condition of the query. Every state
//! of the reduction carries a set of pairs `(P(φ ∧ ψ), P(ψ))`, one per way
//! of resolving the choices below it, and the answer is the best quotient
//! at the initial state. Once a stopping state is reached, only one
//! optimal probability matters there, so those states get closed-form
//! pairs.
//!
//! The numerator is always kept as an until formula `a U b` together with
//! a polarity: `Neg` stands for "the until formula does not hold", which
//! covers both `G χ` (as `¬(true U ¬χ)`) and the complement used for
//! minima, `CP⁻[φ|ψ] = 1 − CP⁺[¬φ|ψ]`.

use crate::delta::{argmax_of, normalize, rmax_of, DeltaExpr};
use crate::formula::{PathFormula, StateFormula};
use crate::graph::{reduce_mdp_acyclic_set, topological_order, AcyclicMdp, ReducedChoice, DEFAULT_SCHEDULER_LIMIT};
use crate::model::{Choice, Distribution, MarkovModel, ModelKind};
use crate::product::{conjunction_prob, Status};
use crate::prop::Prop;
use crate::rational::Prob;
use crate::reach::{opt_values, MemorylessScheduler, Mode};
use crate::Result;
use num::{One, Zero};
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Pos,
    Neg,
}

/// A query `max_σ P_σ(N ∧ ψ) / P_σ(ψ)` where `N` is `a U b` (Pos) or its
/// negation (Neg).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CondQuery {
    pub num: (Prop, Prop),
    pub pol: Polarity,
    pub psi: PathFormula,
}

impl CondQuery {
    /// The query whose value is `CP⁺[φ | ψ]`.
    pub fn maximum(phi: &PathFormula, psi: &PathFormula) -> CondQuery {
        match phi {
            PathFormula::Until(a, b) => CondQuery { num: (a.clone(), b.clone()), pol: Polarity::Pos, psi: psi.clone() },
            PathFormula::Globally(c) => {
                CondQuery { num: (Prop::True, Prop::not(c.clone())), pol: Polarity::Neg, psi: psi.clone() }
            }
        }
    }

    /// Same conditioning, negated numerator.
    pub fn complement(&self) -> CondQuery {
        let pol = match self.pol {
            Polarity::Pos => Polarity::Neg,
            Polarity::Neg => Polarity::Pos,
        };
        CondQuery { num: self.num.clone(), pol, psi: self.psi.clone() }
    }

    pub fn numerator_until(&self) -> PathFormula {
        PathFormula::Until(self.num.0.clone(), self.num.1.clone())
    }

    pub fn stop_condition(&self) -> Prop {
        Prop::or(self.numerator_until().stop_condition(), self.psi.stop_condition())
    }
}

/// Which optimal continuation a stopping state uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum After {
    /// Everything is decided; any continuation will do.
    Free,
    MaxPsi,
    MinPsi,
    /// Maximize the numerator event (which minimizes `a U b` under Neg).
    MaxNum,
}

/// Where a pair of the recursion comes from.
#[derive(Debug)]
pub enum Node {
    /// Stopping state of the reduction.
    Base { state: usize, after: After },
    /// Synthetic state holding the mass that stays in a component forever.
    Trap { state: usize },
    /// A choice of a non-stopping state and the pair chosen at every
    /// successor. A choice that loops on its state has no children.
    Step { state: usize, choice: usize, children: Vec<(usize, Rc<Node>)> },
}

type Item = (Prob, Prob, Rc<Node>);

/// Pair sets of every state of the reduction, with provenance.
pub struct DeltaTable {
    pub red: AcyclicMdp,
    pub items: Vec<Vec<Item>>,
}

impl DeltaTable {
    pub fn expr(&self, s: usize) -> DeltaExpr {
        DeltaExpr::raw(self.items[s].iter().map(|(p, q, _)| (p.clone(), q.clone())))
    }

    /// Best quotient at the initial state and the pair attaining it.
    pub fn best(&self) -> (Prob, Option<&Item>) {
        let init = &self.items[self.red.model.init];
        let value = rmax_of(init.iter().map(|(p, q, _)| (p, q)));
        let arg = argmax_of(init.iter().map(|(p, q, _)| (p, q))).map(|i| &init[i]);
        (value, arg)
    }
}

fn status_of(f: &PathFormula, labels: &std::collections::BTreeSet<String>) -> Status {
    crate::product::step(f, Status::Pending, labels)
}

/// Pair of a run that stays forever in non-stopping states: the until
/// numerator never holds, an until condition fails, a globally one holds.
fn trapped_pair(q: &CondQuery) -> (Prob, Prob) {
    match (&q.psi, q.pol) {
        (PathFormula::Until(..), _) => (Prob::zero(), Prob::zero()),
        (PathFormula::Globally(_), Polarity::Pos) => (Prob::zero(), Prob::one()),
        (PathFormula::Globally(_), Polarity::Neg) => (Prob::one(), Prob::one()),
    }
}

struct Optima {
    psi_max: Vec<Prob>,
    psi_min: Vec<Prob>,
    /// Maximal probability of the numerator event.
    num_max: Vec<Prob>,
}

fn optima(m: &MarkovModel, q: &CondQuery) -> Optima {
    let u = q.numerator_until();
    let num_max = match q.pol {
        Polarity::Pos => opt_values(m, &u, Mode::Max).values,
        Polarity::Neg => opt_values(m, &u, Mode::Min).values.into_iter().map(|v| Prob::one() - v).collect(),
    };
    Optima {
        psi_max: opt_values(m, &q.psi, Mode::Max).values,
        psi_min: opt_values(m, &q.psi, Mode::Min).values,
        num_max,
    }
}

/// Pair and continuation kind at a stopping state `s` (original index).
fn base_pair(m: &MarkovModel, q: &CondQuery, opt: &Optima, s: usize) -> (Prob, Prob, After) {
    let l = &m.labels[s];
    let n = status_of(&q.numerator_until(), l);
    let num_true = match (n, q.pol) {
        (Status::Pending, _) => None,
        (Status::Sat, Polarity::Pos) | (Status::Fail, Polarity::Neg) => Some(true),
        _ => Some(false),
    };
    match (status_of(&q.psi, l), num_true) {
        (Status::Fail, _) => (Prob::zero(), Prob::zero(), After::Free),
        (Status::Sat, Some(true)) => (Prob::one(), Prob::one(), After::Free),
        (Status::Sat, Some(false)) => (Prob::zero(), Prob::one(), After::Free),
        (Status::Sat, None) => (opt.num_max[s].clone(), Prob::one(), After::MaxNum),
        (Status::Pending, Some(true)) => (opt.psi_max[s].clone(), opt.psi_max[s].clone(), After::MaxPsi),
        (Status::Pending, Some(false)) => (Prob::zero(), opt.psi_min[s].clone(), After::MinPsi),
        (Status::Pending, None) => unreachable!("stopping state with both formulas pending"),
    }
}

fn scheduler_limit() -> u64 {
    std::env::var("QLEAK_SCHEDULER_LIMIT").ok().and_then(|v| v.parse().ok()).unwrap_or(DEFAULT_SCHEDULER_LIMIT)
}

/// Pair sets for the query on the reduction of `m`.
pub fn delta_table(m: &MarkovModel, q: &CondQuery) -> Result<DeltaTable> {
    delta_table_with_limit(m, q, scheduler_limit())
}

pub fn delta_table_with_limit(m: &MarkovModel, q: &CondQuery, limit: u64) -> Result<DeltaTable> {
    let stop = m.sat(&q.stop_condition());
    let red = reduce_mdp_acyclic_set(m, &stop, limit)?;
    let items = recurse(&red, m, q);
    Ok(DeltaTable { red, items })
}

fn recurse(red: &AcyclicMdp, m: &MarkovModel, q: &CondQuery) -> Vec<Vec<Item>> {
    let opt = optima(m, q);
    let rm = &red.model;
    let order = topological_order(&rm.successors());
    let mut items: Vec<Option<Vec<Item>>> = vec![None; rm.len()];
    let trapped = trapped_pair(q);
    for &s in order.iter().rev() {
        let list = if red.is_trap[s] {
            vec![(trapped.0.clone(), trapped.1.clone(), Rc::new(Node::Trap { state: s }))]
        } else if red.stop[s] {
            let (p, qq, after) = base_pair(m, q, &opt, red.origin[s]);
            vec![(p, qq, Rc::new(Node::Base { state: s, after }))]
        } else {
            let mut all: Vec<Item> = Vec::new();
            for (c, choice) in rm.choices[s].iter().enumerate() {
                if choice.dist.is_dirac_on(s) {
                    let node = Rc::new(Node::Step { state: s, choice: c, children: Vec::new() });
                    all.push((trapped.0.clone(), trapped.1.clone(), node));
                    continue;
                }
                // ⊕ over successors of π(t) ⊙ δ(t), keeping the chosen child pairs
                let mut acc: Vec<(Prob, Prob, Vec<(usize, Rc<Node>)>)> = vec![(Prob::zero(), Prob::zero(), Vec::new())];
                for (&t, pr) in &choice.dist.entries {
                    let child = items[t].as_ref().expect("successor evaluated first");
                    let mut next = Vec::with_capacity(acc.len() * child.len());
                    for (p, qq, kids) in &acc {
                        for (cp, cq, node) in child {
                            let mut k = kids.clone();
                            k.push((t, node.clone()));
                            next.push((p + pr * cp, qq + pr * cq, k));
                        }
                    }
                    acc = normalize(next);
                }
                for (p, qq, children) in acc {
                    all.push((p, qq, Rc::new(Node::Step { state: s, choice: c, children })));
                }
            }
            normalize(all)
        };
        items[s] = Some(list);
    }
    items.into_iter().map(|x| x.unwrap_or_default()).collect()
}

fn until_query(phi1: &Prop, phi2: &Prop, psi: PathFormula) -> CondQuery {
    CondQuery { num: (phi1.clone(), phi2.clone()), pol: Polarity::Pos, psi }
}

/// Pair expressions for `φ₁ U φ₂ | ψ₁ U ψ₂` on every state of `red`, which
/// must be the reduction of `m` for the stopping condition of the query.
pub fn delta_until(red: &AcyclicMdp, m: &MarkovModel, phi1: &Prop, phi2: &Prop, psi1: &Prop, psi2: &Prop) -> Vec<DeltaExpr> {
    let q = until_query(phi1, phi2, PathFormula::Until(psi1.clone(), psi2.clone()));
    exprs(recurse(red, m, &q))
}

/// Pair expressions for `φ₁ U φ₂ | G ψ₁`.
pub fn delta_globally(red: &AcyclicMdp, m: &MarkovModel, phi1: &Prop, phi2: &Prop, psi1: &Prop) -> Vec<DeltaExpr> {
    let q = until_query(phi1, phi2, PathFormula::Globally(psi1.clone()));
    exprs(recurse(red, m, &q))
}

fn exprs(items: Vec<Vec<Item>>) -> Vec<DeltaExpr> {
    items.iter().map(|l| DeltaExpr::raw(l.iter().map(|(p, q, _)| (p.clone(), q.clone())))).collect()
}

/// `P(p1 ∧ p2)` on a Markov chain.
pub fn mc_conjunction_prob(m: &MarkovModel, p1: &PathFormula, p2: &PathFormula) -> Prob {
    conjunction_prob(m, &[p1.clone(), p2.clone()], Mode::Max)
}

fn mc_quotient(m: &MarkovModel, phi: &PathFormula, psi: &PathFormula) -> Option<Prob> {
    let den = crate::reach::opt_prob(m, psi, Mode::Max);
    if den.is_zero() {
        None
    } else {
        Some(mc_conjunction_prob(m, phi, psi) / den)
    }
}

/// `CP⁺[φ | ψ]`, zero when no scheduler gives `ψ` positive probability.
pub fn cp_max(m: &MarkovModel, phi: &PathFormula, psi: &PathFormula) -> Result<Prob> {
    if m.is_mc() {
        return Ok(mc_quotient(m, phi, psi).unwrap_or_else(Prob::zero));
    }
    Ok(delta_table(m, &CondQuery::maximum(phi, psi))?.best().0)
}

/// `CP⁻[φ | ψ]`, one when no scheduler gives `ψ` positive probability.
pub fn cp_min(m: &MarkovModel, phi: &PathFormula, psi: &PathFormula) -> Result<Prob> {
    if m.is_mc() {
        return Ok(mc_quotient(m, phi, psi).unwrap_or_else(Prob::one));
    }
    let t = delta_table(m, &CondQuery::maximum(phi, psi).complement())?;
    Ok(Prob::one() - t.best().0)
}

/// Cheap sound bounds `lower ≤ CP⁺[φ|ψ] ≤ upper` from four optimal
/// probabilities.
pub fn cp_bounds(m: &MarkovModel, phi: &PathFormula, psi: &PathFormula) -> (Prob, Prob) {
    let both = [phi.clone(), psi.clone()];
    let and_min = conjunction_prob(m, &both, Mode::Min);
    let and_max = conjunction_prob(m, &both, Mode::Max);
    let psi_max = crate::reach::opt_prob(m, psi, Mode::Max);
    let psi_min = crate::reach::opt_prob(m, psi, Mode::Min);
    let lower = if psi_max.is_zero() { Prob::zero() } else { and_min / psi_max };
    let upper = if psi_min.is_zero() { Prob::one() } else { (and_max / psi_min).min(Prob::one()) };
    (lower, upper)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub holds: bool,
    /// The probability compared with the bound of a top-level P or CP.
    pub value: Option<Prob>,
}

pub fn check_cpctl(m: &MarkovModel, f: &StateFormula) -> Result<CheckResult> {
    match f {
        StateFormula::Prop(p) => Ok(CheckResult { holds: p.eval(&m.labels[m.init]), value: None }),
        StateFormula::Not(x) => Ok(CheckResult { holds: !check_cpctl(m, x)?.holds, value: None }),
        StateFormula::And(a, b) => {
            Ok(CheckResult { holds: check_cpctl(m, a)?.holds && check_cpctl(m, b)?.holds, value: None })
        }
        StateFormula::P { cmp, bound, path } => {
            let mode = if cmp.is_upper() { Mode::Max } else { Mode::Min };
            let v = crate::reach::opt_prob(m, path, mode);
            Ok(CheckResult { holds: cmp.holds(&v, bound), value: Some(v) })
        }
        StateFormula::Cp { cmp, bound, phi, psi } => {
            let v = if cmp.is_upper() { cp_max(m, phi, psi)? } else { cp_min(m, phi, psi)? };
            Ok(CheckResult { holds: cmp.holds(&v, bound), value: Some(v) })
        }
    }
}

/// A Markov chain obtained by resolving an MDP with the optimal
/// conditional scheduler. Before the stopping condition the resolution may
/// depend on the path taken, so states are copies of original states.
#[derive(Debug, Clone)]
pub struct Unfolding {
    pub model: MarkovModel,
    /// Original state of every copy.
    pub origin: Vec<usize>,
    /// Choice taken by every copy in the original MDP.
    pub choice: Vec<usize>,
}

impl Unfolding {
    /// The trivial memoryless scheduler of the unfolded chain.
    pub fn scheduler(&self) -> MemorylessScheduler {
        MemorylessScheduler::lowest(&self.model)
    }
}

struct Builder<'a> {
    m: &'a MarkovModel,
    red: &'a AcyclicMdp,
    afters: BTreeMap<After, MemorylessScheduler>,
    q: &'a CondQuery,
    names: Vec<String>,
    origin: Vec<usize>,
    choice: Vec<usize>,
    rows: Vec<Vec<(usize, Prob)>>,
    node_state: HashMap<*const Node, usize>,
    after_state: BTreeMap<(usize, After), usize>,
}

impl Builder<'_> {
    fn fresh(&mut self, orig: usize, choice: usize, tag: &str) -> usize {
        let id = self.origin.len();
        self.names.push(format!("{}@{tag}", self.m.states[orig]));
        self.origin.push(orig);
        self.choice.push(choice);
        self.rows.push(Vec::new());
        id
    }

    fn after_sched(&mut self, after: After) -> MemorylessScheduler {
        if let Some(s) = self.afters.get(&after) {
            return s.clone();
        }
        let m = self.m;
        let s = match after {
            After::Free => MemorylessScheduler::lowest(m),
            After::MaxPsi => opt_values(m, &self.q.psi, Mode::Max).scheduler,
            After::MinPsi => opt_values(m, &self.q.psi, Mode::Min).scheduler,
            After::MaxNum => {
                let mode = if self.q.pol == Polarity::Pos { Mode::Max } else { Mode::Min };
                opt_values(m, &self.q.numerator_until(), mode).scheduler
            }
        };
        self.afters.insert(after, s.clone());
        s
    }

    fn after_copy(&mut self, s: usize, after: After) -> usize {
        if let Some(&id) = self.after_state.get(&(s, after)) {
            return id;
        }
        let sched = self.after_sched(after);
        let tag = match after {
            After::Free => "free",
            After::MaxPsi => "maxpsi",
            After::MinPsi => "minpsi",
            After::MaxNum => "maxnum",
        };
        let c = sched.choice_of[s];
        let id = self.fresh(s, c, tag);
        self.after_state.insert((s, after), id);
        let row: Vec<(usize, Prob)> = self.m.choices[s][c].dist.entries.iter().map(|(t, p)| (*t, p.clone())).collect();
        let mut out = Vec::new();
        for (t, p) in row {
            out.push((self.after_copy(t, after), p));
        }
        self.rows[id] = out;
        id
    }

    fn enter(&mut self, node: &Rc<Node>) -> usize {
        let key = Rc::as_ptr(node);
        if let Some(&id) = self.node_state.get(&key) {
            return id;
        }
        let id = match &**node {
            Node::Base { state, after } => self.after_copy(self.red.origin[*state], *after),
            Node::Trap { state } => {
                // only reachable through a component expansion, which keeps
                // the trapped mass inside the component instead
                let o = self.red.origin[*state];
                let id = self.fresh(o, 0, "trap");
                self.rows[id] = vec![(id, Prob::one())];
                id
            }
            Node::Step { state, choice, children } => self.expand(*state, *choice, children),
        };
        self.node_state.insert(key, id);
        id
    }

    fn expand(&mut self, s: usize, c: usize, children: &[(usize, Rc<Node>)]) -> usize {
        let tag = format!("n{}", self.origin.len());
        let orig = self.red.origin[s];
        match &self.red.provenance[s][c] {
            ReducedChoice::Original(oc) => {
                let id = self.fresh(orig, *oc, &tag);
                if children.is_empty() {
                    self.rows[id] = vec![(id, Prob::one())];
                    return id;
                }
                let dist: Vec<(usize, Prob)> =
                    self.red.model.choices[s][c].dist.entries.iter().map(|(t, p)| (*t, p.clone())).collect();
                let mut row = Vec::new();
                for (t, p) in dist {
                    let child = &children.iter().find(|(x, _)| *x == t).expect("child for every successor").1;
                    row.push((self.enter(child), p));
                }
                self.rows[id] = row;
                id
            }
            ReducedChoice::Component { scheduler, .. } => {
                let eta: BTreeMap<usize, usize> = scheduler.iter().copied().collect();
                // copies for component states reachable from the input under η
                let mut local: BTreeMap<usize, usize> = BTreeMap::new();
                let mut stack = vec![orig];
                let mut order = Vec::new();
                while let Some(u) = stack.pop() {
                    if local.contains_key(&u) {
                        continue;
                    }
                    let id = self.fresh(u, eta[&u], &tag);
                    local.insert(u, id);
                    order.push(u);
                    for t in self.m.choices[u][eta[&u]].dist.support() {
                        if eta.contains_key(&t) && !local.contains_key(&t) {
                            stack.push(t);
                        }
                    }
                }
                for u in order {
                    let dist: Vec<(usize, Prob)> =
                        self.m.choices[u][eta[&u]].dist.entries.iter().map(|(t, p)| (*t, p.clone())).collect();
                    let mut row = Vec::new();
                    for (t, p) in dist {
                        let target = match local.get(&t) {
                            Some(&id) => id,
                            None => {
                                let r = self.red.reduced_of[t].expect("component output kept");
                                let child = &children.iter().find(|(x, _)| *x == r).expect("child for output").1;
                                self.enter(child)
                            }
                        };
                        row.push((target, p));
                    }
                    self.rows[local[&u]] = row;
                }
                local[&orig]
            }
        }
    }
}

/// `CP⁺[φ | ψ]` together with a Markov chain realizing it.
pub fn optimal_unfolding(m: &MarkovModel, phi: &PathFormula, psi: &PathFormula) -> Result<(Prob, Unfolding)> {
    if m.is_mc() {
        let v = mc_quotient(m, phi, psi).unwrap_or_else(Prob::zero);
        let u = Unfolding { model: m.clone(), origin: (0..m.len()).collect(), choice: vec![0; m.len()] };
        return Ok((v, u));
    }
    let q = CondQuery::maximum(phi, psi);
    let table = delta_table(m, &q)?;
    let (value, best) = table.best();
    let root = match best {
        Some((_, _, node)) => node.clone(),
        None => table.items[table.red.model.init][0].2.clone(),
    };
    let mut b = Builder {
        m,
        red: &table.red,
        afters: BTreeMap::new(),
        q: &q,
        names: Vec::new(),
        origin: Vec::new(),
        choice: Vec::new(),
        rows: Vec::new(),
        node_state: HashMap::new(),
        after_state: BTreeMap::new(),
    };
    let init = b.enter(&root);
    let model = MarkovModel {
        kind: ModelKind::Mc,
        states: b.names,
        init,
        labels: b.origin.iter().map(|&o| m.labels[o].clone()).collect(),
        choices: b.rows.into_iter().map(|r| vec![Choice { label: "0".into(), dist: Distribution::from_pairs(r) }]).collect(),
    };
    Ok((value, Unfolding { model, origin: b.origin, choice: b.choice }))
}
