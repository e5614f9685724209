//! Counterexamples and debugging reports: torrent counterexamples for
//! reachability bounds, approximate leakage with error certificates,
//! counterexamples to conditional bounds and high-leakage sources.

use crate::cpctl::{optimal_unfolding, Unfolding};
use crate::formula::PathFormula;
use crate::graph::{can_reach, make_absorbing_set, reduce_mc_acyclic};
use crate::ihs::{prior_of, ActionKind, Ihs, Prior};
use crate::leakage::{fmt_trace, joint_matrix, Trace, TraceMatrix};
use crate::model::{Distribution, MarkovModel};
use crate::product::{product, settled_true, survival_values, Product, Status};
use crate::prop::Prop;
use crate::rails::{rails_by_probability, torrent_of, RailStream, TorrentSummary};
use crate::rational::{fmt_rational, Prob};
use crate::reach::{extract_opt_scheduler, induce_mc, MemorylessScheduler, Mode};
use crate::regex::{regex_terms, DEFAULT_TERM_LIMIT};
use crate::{Error, Result};
use num::{One, Zero};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

/// Either the property holds, with the relevant probability, or a
/// counterexample.
#[derive(Debug, Clone)]
pub enum Outcome<T> {
    Holds { value: Prob },
    Violated(T),
}

impl<T> Outcome<T> {
    pub fn is_violated(&self) -> bool {
        matches!(self, Outcome::Violated(_))
    }
}

#[derive(Debug, Clone)]
pub struct TorrentCounterexample {
    pub witnesses: Vec<TorrentSummary>,
    pub total_mass: Prob,
    pub bound: Prob,
    pub strict: bool,
    pub property: String,
    /// The chain the witnesses live in: the model itself, or the chain
    /// induced by the maximizing scheduler.
    pub chain: MarkovModel,
    pub scheduler: Option<MemorylessScheduler>,
}

fn exceeds(mass: &Prob, bound: &Prob, strict: bool) -> bool {
    if strict {
        mass >= bound
    } else {
        mass > bound
    }
}

/// Counterexample to `P<=bound [F psi]`, or to `P<bound [F psi]` when
/// `strict`: the most probable torrents, accumulated until their mass
/// exceeds the bound.
pub fn torrent_counterexample(
    m: &MarkovModel,
    psi: &Prop,
    bound: &Prob,
    strict: bool,
) -> Result<Outcome<TorrentCounterexample>> {
    let target = PathFormula::eventually(psi.clone());
    let (chain, scheduler) = if m.is_mc() {
        (m.clone(), None)
    } else {
        let s = extract_opt_scheduler(m, &target, Mode::Max);
        (induce_mc(m, &s), Some(s))
    };
    let goal = chain.sat(psi);
    let total = crate::graph::reach_prob_mc(&chain, chain.init, &goal);
    if !exceeds(&total, bound, strict) {
        return Ok(Outcome::Holds { value: total });
    }
    let ab = make_absorbing_set(&chain, &goal);
    let acyc = reduce_mc_acyclic(&ab.model);
    let mut witnesses = Vec::new();
    let mut mass = Prob::zero();
    for rail in rails_by_probability(&acyc, &ab.goal) {
        mass += &rail.mass;
        witnesses.push(torrent_of(&rail, &acyc, &ab.model));
        if exceeds(&mass, bound, strict) {
            break;
        }
    }
    let property = format!("P{}{} [F {}]", if strict { "<" } else { "<=" }, fmt_rational(bound), psi);
    Ok(Outcome::Violated(TorrentCounterexample {
        witnesses,
        total_mass: mass,
        bound: bound.clone(),
        strict,
        property,
        chain: ab.model,
        scheduler,
    }))
}

// ---------------------------------------------------------------------------
// grouped paths of an information-hiding system

/// One step of a grouped path: the visible action taken, if any, and the
/// state reached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupStep {
    pub action: Option<String>,
    pub state: String,
    pub prob: Prob,
}

/// A set of complete paths sharing secret and observable traces, with its
/// probability mass and a representative path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathGroup {
    pub secret: Trace,
    pub observable: Trace,
    pub mass: Prob,
    pub start: String,
    pub steps: Vec<GroupStep>,
}

impl PathGroup {
    pub fn display_path(&self) -> String {
        let mut out = self.start.clone();
        for s in &self.steps {
            match &s.action {
                Some(a) => out.push_str(&format!(" -{a}-> {}", s.state)),
                None => out.push_str(&format!(" -> {}", s.state)),
            }
        }
        out
    }
}

/// Chain over the states of `h` plus one state per visible `(action,
/// target)` pair, so that paths of the chain remember visible actions.
/// Terminal states absorb.
struct GroupingChain {
    model: MarkovModel,
    /// Visible action and target of every extra state.
    visible: Vec<Option<(String, usize)>>,
    terminal: Vec<bool>,
}

fn grouping_chain(h: &Ihs) -> GroupingChain {
    let n = h.len();
    let mut visible: Vec<Option<(String, usize)>> = vec![None; n];
    let mut node: BTreeMap<(String, usize), usize> = BTreeMap::new();
    let mut rows: Vec<Distribution> = Vec::with_capacity(n);
    for q in 0..n {
        if h.is_terminal(q) {
            rows.push(Distribution::dirac(q));
            continue;
        }
        let mut acc: BTreeMap<usize, Prob> = BTreeMap::new();
        for e in h.trans[q].iter().flatten() {
            let t = if h.kind_of(&e.action) == ActionKind::Internal {
                e.target
            } else {
                *node.entry((e.action.clone(), e.target)).or_insert_with(|| {
                    visible.push(Some((e.action.clone(), e.target)));
                    visible.len() - 1
                })
            };
            *acc.entry(t).or_insert_with(Prob::zero) += &e.prob;
        }
        rows.push(Distribution { entries: acc });
    }
    for v in &visible[n..] {
        rows.push(Distribution::dirac(v.as_ref().unwrap().1));
    }
    let total = rows.len();
    let mut states = h.states.clone();
    states.extend(visible[n..].iter().map(|v| {
        let (a, t) = v.as_ref().unwrap();
        format!("{a}>{}", h.states[*t])
    }));
    let terminal: Vec<bool> = (0..total).map(|s| s < n && h.is_terminal(s)).collect();
    let model = MarkovModel::mc(rows, h.init, vec![BTreeSet::new(); total]);
    let model = MarkovModel { states, ..model };
    GroupingChain { model, visible, terminal }
}

impl GroupingChain {
    fn group(&self, h: &Ihs, path: &[usize], mass: Prob) -> PathGroup {
        let mut secret = Vec::new();
        let mut observable = Vec::new();
        let mut steps = Vec::new();
        let mut pending: Option<(String, Prob)> = None;
        for w in path.windows(2) {
            let p = self.model.row(w[0]).prob(w[1]);
            match &self.visible[w[1]] {
                Some((a, _)) => {
                    match h.kind_of(a) {
                        ActionKind::Secret => secret.push(a.clone()),
                        _ => observable.push(a.clone()),
                    }
                    pending = Some((a.clone(), p));
                }
                None => {
                    let (action, prob) = match pending.take() {
                        Some((a, q)) => (Some(a), q),
                        None => (None, p),
                    };
                    steps.push(GroupStep { action, state: h.states[w[1]].clone(), prob });
                }
            }
        }
        PathGroup { secret, observable, mass, start: h.states[path[0]].clone(), steps }
    }
}

/// Groups of complete paths that differ only inside components, by
/// non-increasing mass.
pub fn scc_groups(h: &Ihs) -> Result<Vec<PathGroup>> {
    if h.variable_prior {
        return Err(Error::VariablePrior);
    }
    let chain = grouping_chain(h);
    let acyc = reduce_mc_acyclic(&chain.model);
    let out = rails_by_probability(&acyc, &chain.terminal)
        .map(|rail| {
            let t = torrent_of(&rail, &acyc, &chain.model);
            chain.group(h, &t.representant, rail.mass)
        })
        .collect();
    Ok(out)
}

/// Stream of single complete paths of `h` by non-increasing probability.
pub struct PathStream<'a> {
    h: &'a Ihs,
    chain: GroupingChain,
    best: Vec<Prob>,
    heap: BinaryHeap<PathEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct PathEntry {
    bound: Prob,
    mass: Prob,
    path: Vec<usize>,
}

impl Ord for PathEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.cmp(&other.bound).then_with(|| other.path.cmp(&self.path))
    }
}

impl PartialOrd for PathEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Best probability of reaching a terminal state from each state, by a
/// Dijkstra pass backwards from the terminal states.
fn best_to_terminal(m: &MarkovModel, terminal: &[bool]) -> Vec<Prob> {
    let n = m.len();
    let mut pred: Vec<Vec<(usize, Prob)>> = vec![Vec::new(); n];
    for s in 0..n {
        if terminal[s] {
            continue;
        }
        for (&t, p) in &m.row(s).entries {
            if t != s {
                pred[t].push((s, p.clone()));
            }
        }
    }
    let mut best = vec![Prob::zero(); n];
    let mut done = vec![false; n];
    for s in 0..n {
        if terminal[s] {
            best[s] = Prob::one();
        }
    }
    loop {
        let next = (0..n).filter(|&s| !done[s] && !best[s].is_zero()).max_by(|&a, &b| best[a].cmp(&best[b]).then(b.cmp(&a)));
        let Some(u) = next else { break };
        done[u] = true;
        for (s, p) in &pred[u] {
            let v = p * &best[u];
            if !done[*s] && v > best[*s] {
                best[*s] = v;
            }
        }
    }
    best
}

impl<'a> PathStream<'a> {
    pub fn new(h: &'a Ihs) -> Self {
        let chain = grouping_chain(h);
        let best = best_to_terminal(&chain.model, &chain.terminal);
        let mut heap = BinaryHeap::new();
        let init = chain.model.init;
        if !best[init].is_zero() {
            heap.push(PathEntry { bound: best[init].clone(), mass: Prob::one(), path: vec![init] });
        }
        PathStream { h, chain, best, heap }
    }
}

impl Iterator for PathStream<'_> {
    type Item = PathGroup;

    fn next(&mut self) -> Option<PathGroup> {
        while let Some(e) = self.heap.pop() {
            let last = *e.path.last().unwrap();
            if self.chain.terminal[last] {
                return Some(self.chain.group(self.h, &e.path, e.mass));
            }
            for (&t, p) in &self.chain.model.row(last).entries {
                if self.best[t].is_zero() {
                    continue;
                }
                let mass = &e.mass * p;
                let mut path = e.path.clone();
                path.push(t);
                self.heap.push(PathEntry { bound: &mass * &self.best[t], mass, path });
            }
        }
        None
    }
}

// ---------------------------------------------------------------------------
// partial leakage

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Paths,
    RegexTerms,
    SccGroups,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "paths" => Ok(Strategy::Paths),
            "regexTerms" | "regex" => Ok(Strategy::RegexTerms),
            "sccGroups" | "scc" => Ok(Strategy::SccGroups),
            other => Err(format!("unknown strategy `{other}` (paths, regexTerms, sccGroups)")),
        }
    }
}

/// When to stop adding groups. With neither field set, every group of a
/// finite strategy is added.
#[derive(Debug, Clone, Default)]
pub struct StopWhen {
    pub epsilon: Option<Prob>,
    pub budget: Option<usize>,
}

/// Multiplicative leakage bounds after `k` groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub k: usize,
    pub lower: Prob,
    pub upper: Prob,
}

impl Certificate {
    pub fn width(&self) -> Prob {
        &self.upper - &self.lower
    }
}

#[derive(Debug, Clone)]
pub struct PartialLeakage {
    /// Sub-stochastic joint matrix accumulated so far.
    pub partial_joint: TraceMatrix,
    /// Mass of every row of the partial channel matrix, in secret order.
    pub row_mass: Vec<(Trace, Prob)>,
    pub leak_lower: Prob,
    pub leak_upper: Prob,
    pub groups: Vec<PathGroup>,
    /// Bounds after every prefix, starting with the empty one.
    pub history: Vec<Certificate>,
    pub warnings: Vec<String>,
}

struct Accumulator {
    secrets: Vec<Trace>,
    prior: Vec<Prob>,
    prior_vuln: Prob,
    observables: Vec<Trace>,
    cells: BTreeMap<(usize, usize), Prob>,
}

impl Accumulator {
    fn add(&mut self, g: &PathGroup) {
        let Some(i) = self.secrets.iter().position(|s| *s == g.secret) else { return };
        let k = match self.observables.iter().position(|o| *o == g.observable) {
            Some(k) => k,
            None => {
                self.observables.push(g.observable.clone());
                self.observables.len() - 1
            }
        };
        *self.cells.entry((i, k)).or_insert_with(Prob::zero) += &g.mass;
    }

    fn cell(&self, i: usize, k: usize) -> Prob {
        self.cells.get(&(i, k)).cloned().unwrap_or_else(Prob::zero)
    }

    /// Row masses `p_i` of the partial channel matrix.
    fn row_mass(&self) -> Vec<Prob> {
        (0..self.secrets.len())
            .map(|i| {
                let joint = (0..self.observables.len()).fold(Prob::zero(), |a, k| a + self.cell(i, k));
                joint / &self.prior[i]
            })
            .collect()
    }

    fn certificate(&self, k: usize) -> Certificate {
        let post: Prob = (0..self.observables.len())
            .map(|o| (0..self.secrets.len()).map(|i| self.cell(i, o)).max().unwrap_or_else(Prob::zero))
            .fold(Prob::zero(), |a, b| a + b);
        let lower = post / &self.prior_vuln;
        let width = self.row_mass().into_iter().fold(Prob::zero(), |a, p| a + (Prob::one() - p));
        Certificate { k, upper: &lower + width, lower }
    }

    fn matrix(&self) -> TraceMatrix {
        TraceMatrix {
            secrets: self.secrets.clone(),
            observables: self.observables.clone(),
            cells: (0..self.secrets.len())
                .map(|i| (0..self.observables.len()).map(|k| self.cell(i, k)).collect())
                .collect(),
        }
    }
}

fn secret_rows(h: &Ihs, prior: &Prior) -> Result<(Vec<Trace>, Vec<Prob>)> {
    let mut secrets = Vec::new();
    let mut probs = Vec::new();
    for (s, p) in &prior.entries {
        if p.is_zero() {
            return Err(Error::ZeroPrior(s.clone()));
        }
        // interactive priors are keyed by rendered secret traces
        let trace: Trace = if h.interactive && s != "ε" {
            s.split('.').map(String::from).collect()
        } else if h.interactive {
            Vec::new()
        } else {
            vec![s.clone()]
        };
        secrets.push(trace);
        probs.push(p.clone());
    }
    Ok((secrets, probs))
}

/// Approximates the multiplicative leakage of `h` by adding groups of
/// complete paths to a partial joint matrix, most probable groups first.
/// After `k` groups the exact leakage lies in `[lower, lower + Σ(1 - p_i)]`
/// where `p_i` is the mass of row `i` of the partial channel matrix.
pub fn partial_leakage(h: &Ihs, strategy: Strategy, stop: &StopWhen) -> Result<PartialLeakage> {
    let prior = prior_of(h)?;
    let (secrets, prior_probs) = secret_rows(h, &prior)?;
    let prior_vuln = prior.vulnerability();
    let mut acc = Accumulator { secrets, prior: prior_probs, prior_vuln, observables: Vec::new(), cells: BTreeMap::new() };
    let mut warnings = Vec::new();
    let source: Box<dyn Iterator<Item = PathGroup>> = match strategy {
        Strategy::Paths => {
            if stop.budget.is_none() && stop.epsilon.as_ref().is_none_or(|e| e.is_zero()) {
                return Err(Error::Unsupported(
                    "the paths strategy needs a budget or a positive epsilon".into(),
                ));
            }
            Box::new(PathStream::new(h))
        }
        Strategy::RegexTerms => {
            let set = regex_terms(h, DEFAULT_TERM_LIMIT)?;
            warnings.extend(set.warnings);
            let start = h.states[h.init].clone();
            let mut terms = set.terms;
            // stable: equal values keep expansion order
            terms.sort_by(|a, b| b.val.cmp(&a.val));
            Box::new(terms.into_iter().map(move |t| {
                let mut steps = Vec::new();
                for f in &t.factors {
                    if let crate::regex::Regex::Atom { action, prob, state } = f {
                        let visible = h.kind_of(action) != ActionKind::Internal;
                        steps.push(GroupStep {
                            action: visible.then(|| action.clone()),
                            state: h.states[*state].clone(),
                            prob: prob.clone(),
                        });
                    }
                }
                PathGroup { secret: t.secret, observable: t.observable, mass: t.val, start: start.clone(), steps }
            }))
        }
        Strategy::SccGroups => Box::new(scc_groups(h)?.into_iter()),
    };
    let mut history = vec![acc.certificate(0)];
    let mut groups = Vec::new();
    let done = |c: &Certificate, n: usize| {
        stop.epsilon.as_ref().is_some_and(|e| c.width() <= *e) || stop.budget.is_some_and(|b| n >= b)
    };
    if !done(&history[0], 0) {
        for g in source {
            acc.add(&g);
            groups.push(g);
            let c = acc.certificate(groups.len());
            let stop_now = done(&c, groups.len());
            history.push(c);
            if stop_now {
                break;
            }
        }
    }
    let last = history.last().unwrap().clone();
    if let Some(e) = &stop.epsilon {
        let exhausted = stop.budget.is_none_or(|b| groups.len() < b);
        if last.width() > *e && exhausted {
            return Err(Error::EpsilonUnreachable {
                width: fmt_rational(&last.width()),
                epsilon: fmt_rational(e),
                reason: if warnings.is_empty() {
                    "all groups were added".into()
                } else {
                    warnings.join("; ")
                },
            });
        }
    }
    let row_mass = acc.secrets.iter().cloned().zip(acc.row_mass()).collect();
    Ok(PartialLeakage {
        partial_joint: acc.matrix(),
        row_mass,
        leak_lower: last.lower,
        leak_upper: last.upper,
        groups,
        history,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// conditional counterexamples

#[derive(Debug, Clone)]
pub struct CpctlCounterexample {
    /// Chain realizing the optimal conditional probability; its trivial
    /// memoryless scheduler is `scheduler`.
    pub unfolding: Unfolding,
    pub scheduler: MemorylessScheduler,
    /// Product of the unfolding with the two path formulas; witness states
    /// index into it.
    pub product: MarkovModel,
    /// Witnesses of `φ ∧ ψ`, each with the mass it contributes.
    pub delta1: Vec<(TorrentSummary, Prob)>,
    /// Witnesses of `¬ψ`.
    pub delta2: Vec<(TorrentSummary, Prob)>,
    pub mass1: Prob,
    pub mass2: Prob,
    pub ratio: Prob,
    /// Exact `CP⁺[φ|ψ]`.
    pub value: Prob,
}

struct Witnesses<'a> {
    stream: RailStream<'a>,
    acyc: &'a crate::graph::AcyclicMc,
    model: &'a MarkovModel,
    weight: Vec<Prob>,
    peeked: Option<(TorrentSummary, Prob)>,
}

impl Witnesses<'_> {
    fn peek(&mut self) -> Option<&(TorrentSummary, Prob)> {
        if self.peeked.is_none() {
            for rail in self.stream.by_ref() {
                let w = &rail.mass * &self.weight[*rail.states.last().unwrap()];
                if w.is_zero() {
                    continue;
                }
                self.peeked = Some((torrent_of(&rail, self.acyc, self.model), w));
                break;
            }
        }
        self.peeked.as_ref()
    }
}

/// Counterexample to `CP<=a [φ | ψ]` (or `CP<a` when `strict`): a chain
/// resolving the nondeterminism, a set Δ₁ of paths satisfying `φ ∧ ψ` and
/// a set Δ₂ of paths violating `ψ` with `P(Δ₁) / (1 - P(Δ₂))` above `a`.
/// Both sets grow greedily, each step taking the candidate that raises the
/// ratio more.
pub fn cpctl_counterexample(
    m: &MarkovModel,
    phi: &PathFormula,
    psi: &PathFormula,
    a: &Prob,
    strict: bool,
) -> Result<Outcome<CpctlCounterexample>> {
    let (value, unfolding) = optimal_unfolding(m, phi, psi)?;
    if !exceeds(&value, a, strict) {
        return Ok(Outcome::Holds { value });
    }
    let formulas = [phi.clone(), psi.clone()];
    let p: Product = product(&unfolding.model, &formulas);
    let n = p.model.len();
    let survive = survival_values(&p, &formulas, Mode::Max);
    let good: Vec<bool> = (0..n).map(|s| settled_true(&formulas, &p.status[s]) && !survive[s].is_zero()).collect();
    let psi_sat: Vec<bool> = (0..n).map(|s| p.status[s][1] == Status::Sat).collect();
    let reach_sat = can_reach(&p.model.successors(), &psi_sat);
    let bad: Vec<bool> = (0..n)
        .map(|s| {
            p.status[s][1] == Status::Fail || (matches!(psi, PathFormula::Until(..)) && !reach_sat[s])
        })
        .collect();
    let ab1 = make_absorbing_set(&p.model, &good);
    let acyc1 = reduce_mc_acyclic(&ab1.model);
    let ab2 = make_absorbing_set(&p.model, &bad);
    let acyc2 = reduce_mc_acyclic(&ab2.model);
    let mut w1 = Witnesses {
        stream: rails_by_probability(&acyc1, &good),
        acyc: &acyc1,
        model: &ab1.model,
        weight: survive,
        peeked: None,
    };
    let mut w2 = Witnesses {
        stream: rails_by_probability(&acyc2, &bad),
        acyc: &acyc2,
        model: &ab2.model,
        weight: vec![Prob::one(); n],
        peeked: None,
    };
    let ratio_of = |m1: &Prob, m2: &Prob| {
        let den = Prob::one() - m2;
        if den.is_zero() {
            Prob::zero()
        } else {
            m1 / den
        }
    };
    let (mut mass1, mut mass2) = (Prob::zero(), Prob::zero());
    let (mut delta1, mut delta2) = (Vec::new(), Vec::new());
    let mut ratio = Prob::zero();
    while !exceeds(&ratio, a, strict) {
        let r1 = w1.peek().map(|(_, w)| ratio_of(&(&mass1 + w), &mass2));
        let r2 = w2.peek().map(|(_, w)| ratio_of(&mass1, &(&mass2 + w)));
        let take_first = match (&r1, &r2) {
            (None, None) => break,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (Some(x), Some(y)) => x >= y,
        };
        if take_first {
            let (t, w) = w1.peeked.take().unwrap();
            mass1 += &w;
            delta1.push((t, w));
        } else {
            let (t, w) = w2.peeked.take().unwrap();
            mass2 += &w;
            delta2.push((t, w));
        }
        ratio = ratio_of(&mass1, &mass2);
    }
    let scheduler = unfolding.scheduler();
    Ok(Outcome::Violated(CpctlCounterexample {
        scheduler,
        product: p.model,
        unfolding,
        delta1,
        delta2,
        mass1,
        mass2,
        ratio,
        value,
    }))
}

// ---------------------------------------------------------------------------
// high-leakage sources

/// The transition singled out as a debugging hint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hint {
    pub from: String,
    pub action: String,
    pub to: String,
    pub prob: Prob,
}

#[derive(Debug, Clone)]
pub struct ObservableSource {
    pub observable: Trace,
    /// Secrets maximizing the joint column; more than one means a tie.
    pub argmax: Vec<Trace>,
    pub joint: Prob,
    pub witnesses: Vec<PathGroup>,
    pub hint: Option<Hint>,
}

impl ObservableSource {
    pub fn no_dominant_secret(&self) -> bool {
        self.argmax.len() > 1
    }
}

/// For every observable, the secrets that best explain it together with
/// the most probable path groups producing the pair and the most probable
/// visible transition along the top group.
pub fn leakage_sources(h: &Ihs, top_k: usize) -> Result<Vec<ObservableSource>> {
    let j = joint_matrix(h)?;
    let groups = scc_groups(h)?;
    let mut out = Vec::new();
    for (k, o) in j.observables.iter().enumerate() {
        let col: Vec<&Prob> = j.cells.iter().map(|r| &r[k]).collect();
        let best = col.iter().copied().max().cloned().unwrap_or_else(Prob::zero);
        let argmax: Vec<Trace> = j.secrets.iter().zip(&col).filter(|(_, v)| **v == &best).map(|(s, _)| s.clone()).collect();
        let witnesses: Vec<PathGroup> = groups
            .iter()
            .filter(|g| g.observable == *o && argmax.contains(&g.secret))
            .take(top_k)
            .cloned()
            .collect();
        let hint = witnesses.first().and_then(|g| hint_of(h, g));
        out.push(ObservableSource { observable: o.clone(), argmax, joint: best, witnesses, hint });
    }
    Ok(out)
}

/// Most probable observable transition of the group, falling back to any
/// visible one; the first wins ties.
fn hint_of(h: &Ihs, g: &PathGroup) -> Option<Hint> {
    let mut prev = g.start.clone();
    let mut obs: Option<Hint> = None;
    let mut any: Option<Hint> = None;
    for s in &g.steps {
        if let Some(a) = &s.action {
            let cand = Hint { from: prev.clone(), action: a.clone(), to: s.state.clone(), prob: s.prob.clone() };
            let slot = if h.kind_of(a) == ActionKind::Observable { &mut obs } else { &mut any };
            if slot.as_ref().is_none_or(|x| cand.prob > x.prob) {
                *slot = Some(cand);
            }
        }
        prev = s.state.clone();
    }
    obs.or(any)
}

/// Renders a trace pair for reports.
pub fn fmt_pair(secret: &Trace, observable: &Trace) -> String {
    format!("({}, {})", fmt_trace(secret), fmt_trace(observable))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use crate::text::{parse_model, ParsedModel};

    fn ihs(src: &str) -> Ihs {
        match parse_model(src).unwrap() {
            ParsedModel::Ihs(h) => h,
            _ => unreachable!(),
        }
    }

    fn mc(src: &str) -> MarkovModel {
        match parse_model(src).unwrap() {
            ParsedModel::Markov(m) => m,
            _ => unreachable!(),
        }
    }

    #[test]
    fn crowds_scc_groups() {
        let h = ihs(include_str!("../fixtures/crowds.ihs"));
        let g = scc_groups(&h).unwrap();
        let masses: Vec<Prob> = g.iter().map(|x| x.mass.clone()).collect();
        assert_eq!(masses, vec![ratio(7, 20), ratio(7, 40), ratio(1, 6), ratio(3, 20), ratio(1, 12), ratio(3, 40)]);
        assert_eq!(g[1].display_path(), "init -a-> q_a -A-> corr -> S");
    }

    #[test]
    fn intro_counterexamples() {
        let m = mc(include_str!("../fixtures/intro.mc"));
        let psi = Prop::atom("psi");
        let Outcome::Violated(c) = torrent_counterexample(&m, &psi, &ratio(1, 2), false).unwrap() else { panic!() };
        assert_eq!(c.witnesses.len(), 1);
        assert_eq!(c.witnesses[0].rail, vec![0, 2, 4]);
        let Outcome::Violated(c) = torrent_counterexample(&m, &psi, &ratio(9, 10), false).unwrap() else { panic!() };
        assert_eq!(c.witnesses.len(), 2);
        assert_eq!(c.total_mass, Prob::one());
        assert!(!torrent_counterexample(&m, &psi, &Prob::one(), false).unwrap().is_violated());
    }

    #[test]
    fn six_sevenths() {
        let m = mc(include_str!("../fixtures/sixsevenths.mc"));
        let phi = PathFormula::eventually(Prop::atom("B"));
        let psi = PathFormula::Globally(Prop::atom("P"));
        let Outcome::Violated(c) = cpctl_counterexample(&m, &phi, &psi, &ratio(3, 4), false).unwrap() else {
            panic!()
        };
        assert_eq!(c.mass1, ratio(3, 4));
        assert_eq!(c.mass2, ratio(1, 8));
        assert_eq!(c.ratio, ratio(6, 7));
        assert_eq!(c.value, ratio(13, 14));
        assert!(!cpctl_counterexample(&m, &phi, &psi, &Prob::one(), false).unwrap().is_violated());
    }

    #[test]
    fn crowds_sources() {
        let h = ihs(include_str!("../fixtures/crowds.ihs"));
        let s = leakage_sources(&h, 3).unwrap();
        let a = s.iter().find(|x| x.observable == vec!["A".to_string()]).unwrap();
        assert_eq!(a.argmax, vec![vec!["a".to_string()]]);
        assert_eq!(a.witnesses[0].mass, ratio(7, 40));
        let hint = a.hint.as_ref().unwrap();
        assert_eq!((hint.from.as_str(), hint.action.as_str(), hint.to.as_str()), ("q_a", "A", "corr"));
    }

    #[test]
    fn crowds_partial_scc() {
        let h = ihs(include_str!("../fixtures/crowds.ihs"));
        let r = partial_leakage(&h, Strategy::SccGroups, &StopWhen::default()).unwrap();
        assert_eq!(r.groups.len(), 6);
        assert_eq!(r.leak_lower, ratio(83, 80));
        assert_eq!(r.leak_upper, ratio(83, 80));
        assert_eq!(r.history[0].width(), ratio(2, 1));
    }

    #[test]
    fn crowds_partial_paths_sandwich() {
        let h = ihs(include_str!("../fixtures/crowds.ihs"));
        let stop = StopWhen { epsilon: None, budget: Some(60) };
        let r = partial_leakage(&h, Strategy::Paths, &stop).unwrap();
        let exact = ratio(83, 80);
        for w in r.history.windows(2) {
            assert!(w[0].lower <= w[1].lower);
            assert!(w[1].width() <= w[0].width());
        }
        for c in &r.history {
            assert!(c.lower <= exact && exact <= c.upper);
        }
    }
}
