//! Strongly connected components, absorbing transforms, acyclic reductions
//! and exact reachability probabilities.

use crate::error::{Error, Result};
use crate::linalg::solve_multi;
use crate::model::{Choice, Distribution, MarkovModel, ModelKind};
use crate::prop::Prop;
use crate::rational::Prob;
use num::{One, Zero};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Default bound on memoryless schedulers enumerated per component.
pub const DEFAULT_SCHEDULER_LIMIT: u64 = 1 << 20;

/// Tarjan's algorithm. Components come out sinks first, so every edge
/// between components goes from a higher index to a lower one.
pub fn tarjan(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut next = 0usize;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        // explicit call stack of (vertex, next edge position)
        let mut calls: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = calls.last_mut() {
            if *pos < adj[v].len() {
                let w = adj[v][*pos];
                *pos += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    calls.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                calls.pop();
                if let Some(&(parent, _)) = calls.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SccDecomposition {
    /// Components in reverse topological order (sinks first).
    pub components: Vec<Vec<usize>>,
    pub component_of: Vec<usize>,
    pub trivial: Vec<bool>,
}

impl SccDecomposition {
    pub fn is_trivial_state(&self, s: usize) -> bool {
        self.trivial[self.component_of[s]]
    }

    pub fn same(&self, a: usize, b: usize) -> bool {
        self.component_of[a] == self.component_of[b]
    }
}

pub fn scc_decompose(m: &MarkovModel) -> SccDecomposition {
    let adj = m.successors();
    let components = tarjan(&adj);
    let mut component_of = vec![0; m.len()];
    for (k, c) in components.iter().enumerate() {
        for &s in c {
            component_of[s] = k;
        }
    }
    let trivial = components
        .iter()
        .map(|c| c.len() == 1 && (!adj[c[0]].contains(&c[0]) || m.is_absorbing(c[0])))
        .collect();
    SccDecomposition { components, component_of, trivial }
}

/// States from which some state in `targets` is reachable (graph-wise).
pub fn can_reach(adj: &[Vec<usize>], targets: &[bool]) -> Vec<bool> {
    let n = adj.len();
    let mut rev = vec![Vec::new(); n];
    for (s, succ) in adj.iter().enumerate() {
        for &t in succ {
            rev[t].push(s);
        }
    }
    let mut seen = targets.to_vec();
    let mut queue: VecDeque<usize> = (0..n).filter(|&s| targets[s]).collect();
    while let Some(t) = queue.pop_front() {
        for &s in &rev[t] {
            if !seen[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
    }
    seen
}

/// States reachable from `start`.
pub fn reachable_from(adj: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(s) = queue.pop_front() {
        for &t in &adj[s] {
            if !seen[t] {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    seen
}

/// Result of making goal states and hopeless states absorbing.
#[derive(Debug, Clone)]
pub struct Absorbed {
    pub model: MarkovModel,
    pub goal: Vec<bool>,
    /// States that reach the goal with positive probability.
    pub sat_f: Vec<bool>,
}

pub fn make_absorbing(m: &MarkovModel, goal: &Prop) -> Absorbed {
    make_absorbing_set(m, &m.sat(goal))
}

/// Goal states, and states that cannot reach the goal, get a single Dirac
/// self-loop; every other row is left untouched.
pub fn make_absorbing_set(m: &MarkovModel, goal: &[bool]) -> Absorbed {
    let adj = m.successors();
    let sat_f = can_reach(&adj, goal);
    let mut model = m.clone();
    for s in 0..m.len() {
        if goal[s] || !sat_f[s] {
            model.choices[s] = vec![Choice { label: "0".into(), dist: Distribution::dirac(s) }];
        }
    }
    Absorbed { model, goal: goal.to_vec(), sat_f }
}

/// Makes the given states absorbing and nothing else.
pub fn absorb_states(m: &MarkovModel, stop: &[bool]) -> MarkovModel {
    let mut model = m.clone();
    for (s, &st) in stop.iter().enumerate() {
        if st {
            model.choices[s] = vec![Choice { label: "0".into(), dist: Distribution::dirac(s) }];
        }
    }
    model
}

/// Reachability probabilities of `goal` from every state of an MC.
///
/// Only states that can reach the goal enter the linear system, which
/// selects the minimal solution and keeps the system nonsingular.
pub fn reach_probs_mc(m: &MarkovModel, goal: &[bool]) -> Vec<Prob> {
    let weights: Vec<Option<Prob>> =
        goal.iter().map(|&g| if g { Some(Prob::one()) } else { None }).collect();
    absorption_values(m, &weights)
}

/// Expected terminal value of an MC where states with `Some(w)` stop and pay
/// `w`; runs that never stop pay zero.
pub fn absorption_values(m: &MarkovModel, terminal: &[Option<Prob>]) -> Vec<Prob> {
    let n = m.len();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|s| if terminal[s].is_some() { Vec::new() } else { m.row(s).support().collect() })
        .collect();
    let positive: Vec<bool> = terminal.iter().map(|t| t.as_ref().is_some_and(|w| !w.is_zero())).collect();
    let live = can_reach(&adj, &positive);
    let unknown: Vec<usize> = (0..n).filter(|&s| live[s] && terminal[s].is_none()).collect();
    let mut local = vec![usize::MAX; n];
    for (i, &s) in unknown.iter().enumerate() {
        local[s] = i;
    }
    let k = unknown.len();
    let mut a = vec![vec![Prob::zero(); k]; k];
    let mut b = vec![Prob::zero(); k];
    for (i, &s) in unknown.iter().enumerate() {
        a[i][i] = Prob::one();
        for (&t, p) in &m.row(s).entries {
            if let Some(w) = &terminal[t] {
                b[i] += p * w;
            } else if live[t] {
                a[i][local[t]] -= p;
            }
        }
    }
    let x = if k == 0 {
        Vec::new()
    } else {
        let mut sol = solve_multi(a, vec![b]).expect("reachability system restricted to live states is nonsingular");
        sol.pop().unwrap_or_default()
    };
    (0..n)
        .map(|s| match &terminal[s] {
            Some(w) => w.clone(),
            None if live[s] => x[local[s]].clone(),
            None => Prob::zero(),
        })
        .collect()
}

pub fn reach_prob_mc(m: &MarkovModel, from: usize, goal: &[bool]) -> Prob {
    reach_probs_mc(m, goal).swap_remove(from)
}

/// Input/output interface of one nontrivial component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SccInterface {
    pub component: usize,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    /// Exit probabilities `(input, output) -> R`, original state indices.
    pub reach: BTreeMap<(usize, usize), Prob>,
}

/// Acyclic MC keeping only common and input states.
#[derive(Debug, Clone)]
pub struct AcyclicMc {
    pub model: MarkovModel,
    /// Reduced index to original index.
    pub origin: Vec<usize>,
    /// Original index to reduced index.
    pub reduced_of: Vec<Option<usize>>,
    pub scc: SccDecomposition,
    pub interfaces: Vec<SccInterface>,
}

impl AcyclicMc {
    /// Interface of the component whose input state is `s` (original index).
    pub fn interface_of_input(&self, s: usize) -> Option<&SccInterface> {
        let k = self.scc.component_of[s];
        if self.scc.trivial[k] {
            return None;
        }
        self.interfaces.iter().find(|i| i.component == k)
    }
}

fn component_inputs(m: &MarkovModel, scc: &SccDecomposition, adj: &[Vec<usize>]) -> Vec<BTreeSet<usize>> {
    let mut inputs = vec![BTreeSet::new(); scc.components.len()];
    for (u, succ) in adj.iter().enumerate() {
        for &v in succ {
            if !scc.same(u, v) {
                inputs[scc.component_of[v]].insert(v);
            }
        }
    }
    inputs[scc.component_of[m.init]].insert(m.init);
    inputs
}

/// Replaces every nontrivial component by its input states, each jumping
/// directly to the component's outputs with the exact exit probabilities.
pub fn reduce_mc_acyclic(m: &MarkovModel) -> AcyclicMc {
    let n = m.len();
    let adj = m.successors();
    let scc = scc_decompose(m);
    let inputs = component_inputs(m, &scc, &adj);
    let mut interfaces = Vec::new();
    let mut new_rows: BTreeMap<usize, Distribution> = BTreeMap::new();
    for (k, comp) in scc.components.iter().enumerate() {
        if scc.trivial[k] {
            continue;
        }
        let choice: BTreeMap<usize, usize> = comp.iter().map(|&s| (s, 0)).collect();
        let (outputs, exits) = component_exits(m, comp, &choice, &scc, k);
        let mut reach = BTreeMap::new();
        for &s in &inputs[k] {
            let dist = &exits[&s];
            if dist.is_empty() {
                new_rows.insert(s, Distribution::dirac(s));
            } else {
                new_rows.insert(s, Distribution::from_pairs(dist.iter().map(|(t, p)| (*t, p.clone()))));
            }
            for (t, p) in dist {
                reach.insert((s, *t), p.clone());
            }
        }
        interfaces.push(SccInterface {
            component: k,
            inputs: inputs[k].iter().copied().collect(),
            outputs,
            reach,
        });
    }
    let keep: Vec<usize> = (0..n).filter(|&s| scc.is_trivial_state(s) || new_rows.contains_key(&s)).collect();
    let mut reduced_of = vec![None; n];
    for (i, &s) in keep.iter().enumerate() {
        reduced_of[s] = Some(i);
    }
    let remap = |d: &Distribution| {
        Distribution::from_pairs(d.entries.iter().map(|(t, p)| (reduced_of[*t].expect("kept target"), p.clone())))
    };
    let model = MarkovModel {
        kind: ModelKind::Mc,
        states: keep.iter().map(|&s| m.states[s].clone()).collect(),
        init: reduced_of[m.init].expect("initial state kept"),
        labels: keep.iter().map(|&s| m.labels[s].clone()).collect(),
        choices: keep
            .iter()
            .map(|&s| {
                let d = new_rows.get(&s).unwrap_or_else(|| m.row(s));
                vec![Choice { label: "0".into(), dist: remap(d) }]
            })
            .collect(),
    };
    AcyclicMc { model, origin: keep, reduced_of, scc, interfaces }
}

/// Exit probabilities of a component under a fixed choice per state.
/// Returns the component's outputs and, for every state of the component,
/// the probabilities of leaving to each output (mass that never leaves is
/// simply missing).
fn component_exits(
    m: &MarkovModel,
    comp: &[usize],
    choice: &BTreeMap<usize, usize>,
    scc: &SccDecomposition,
    k: usize,
) -> (Vec<usize>, BTreeMap<usize, Vec<(usize, Prob)>>) {
    let dist = |s: usize| &m.choices[s][choice[&s]].dist;
    let mut outputs = BTreeSet::new();
    for &s in comp {
        for t in dist(s).support() {
            if scc.component_of[t] != k {
                outputs.insert(t);
            }
        }
    }
    let outputs: Vec<usize> = outputs.into_iter().collect();
    let local: BTreeMap<usize, usize> = comp.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    // states of the component that can still leave under this choice
    let inner_adj: Vec<Vec<usize>> = comp
        .iter()
        .map(|&s| dist(s).support().filter_map(|t| local.get(&t).copied()).collect())
        .collect();
    let leaves: Vec<bool> = comp.iter().map(|&s| dist(s).support().any(|t| !local.contains_key(&t))).collect();
    let live = can_reach(&inner_adj, &leaves);
    let rows: Vec<usize> = (0..comp.len()).filter(|&i| live[i]).collect();
    let pos: BTreeMap<usize, usize> = rows.iter().enumerate().map(|(j, &i)| (i, j)).collect();
    let r = rows.len();
    let mut a = vec![vec![Prob::zero(); r]; r];
    let mut rhs = vec![vec![Prob::zero(); r]; outputs.len()];
    for (j, &i) in rows.iter().enumerate() {
        a[j][j] = Prob::one();
        for (&t, p) in &dist(comp[i]).entries {
            match local.get(&t) {
                Some(&li) => {
                    if let Some(&lj) = pos.get(&li) {
                        a[j][lj] -= p;
                    }
                }
                None => {
                    let o = outputs.binary_search(&t).expect("output listed");
                    rhs[o][j] += p;
                }
            }
        }
    }
    let sol = if r == 0 { vec![Vec::new(); outputs.len()] } else { solve_multi(a, rhs).expect("exit system nonsingular") };
    let mut exits = BTreeMap::new();
    for (i, &s) in comp.iter().enumerate() {
        let mut d = Vec::new();
        if let Some(&j) = pos.get(&i) {
            for (o, &t) in outputs.iter().enumerate() {
                if !sol[o][j].is_zero() {
                    d.push((t, sol[o][j].clone()));
                }
            }
        }
        exits.insert(s, d);
    }
    (outputs, exits)
}

/// Where a choice of the reduced MDP comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReducedChoice {
    /// Choice `index` of the original state.
    Original(usize),
    /// Memoryless scheduler of a component, as (original state, choice) pairs.
    Component { component: usize, scheduler: Vec<(usize, usize)> },
}

/// Acyclic MDP obtained from an MDP with absorbing stop states.
#[derive(Debug, Clone)]
pub struct AcyclicMdp {
    pub model: MarkovModel,
    /// Original state of every reduced state (a trap maps to its input state).
    pub origin: Vec<usize>,
    pub reduced_of: Vec<Option<usize>>,
    /// Synthetic states collecting mass that stays in a component forever.
    pub is_trap: Vec<bool>,
    pub provenance: Vec<Vec<ReducedChoice>>,
    pub stop: Vec<bool>,
    /// Decomposition of the stop-absorbed original model.
    pub scc: SccDecomposition,
}

pub fn reduce_mdp_acyclic(m: &MarkovModel, stop: &Prop, limit: u64) -> Result<AcyclicMdp> {
    reduce_mdp_acyclic_set(m, &m.sat(stop), limit)
}

/// Makes stop states absorbing, then replaces every nontrivial component by
/// its input states. An input state receives one distribution per distinct
/// exit behaviour of a deterministic memoryless scheduler of the component.
/// Mass that such a scheduler keeps inside the component forever goes to a
/// trap state carrying the input state's labels, or to a self-loop when no
/// mass leaves at all.
pub fn reduce_mdp_acyclic_set(m: &MarkovModel, stop: &[bool], limit: u64) -> Result<AcyclicMdp> {
    let n = m.len();
    let absorbed = absorb_states(m, stop);
    let adj = absorbed.successors();
    let scc = scc_decompose(&absorbed);
    let inputs = component_inputs(&absorbed, &scc, &adj);

    // per input state: list of (distribution over original ids + optional trap mass, provenance)
    type Exit = (Vec<(usize, Prob)>, Prob);
    let mut scc_choices: BTreeMap<usize, Vec<(Exit, ReducedChoice)>> = BTreeMap::new();
    for (k, comp) in scc.components.iter().enumerate() {
        if scc.trivial[k] {
            continue;
        }
        let count = comp
            .iter()
            .fold(1u128, |acc, &s| acc.saturating_mul(absorbed.choices[s].len() as u128));
        if count > limit as u128 {
            return Err(Error::SchedulerExplosion { component: k, count, limit });
        }
        let mut counter = vec![0usize; comp.len()];
        loop {
            let choice: BTreeMap<usize, usize> = comp.iter().copied().zip(counter.iter().copied()).collect();
            let (_, exits) = component_exits(&absorbed, comp, &choice, &scc, k);
            for &s in &inputs[k] {
                let d = exits[&s].clone();
                let left: Prob = d.iter().fold(Prob::zero(), |a, (_, p)| a + p);
                let exit = (d, Prob::one() - left);
                let list = scc_choices.entry(s).or_default();
                if !list.iter().any(|(e, _)| *e == exit) {
                    let scheduler = choice.iter().map(|(&a, &b)| (a, b)).collect();
                    list.push((exit, ReducedChoice::Component { component: k, scheduler }));
                }
            }
            // odometer over the product of choice counts
            let mut i = 0;
            loop {
                if i == comp.len() {
                    break;
                }
                counter[i] += 1;
                if counter[i] < absorbed.choices[comp[i]].len() {
                    break;
                }
                counter[i] = 0;
                i += 1;
            }
            if i == comp.len() {
                break;
            }
        }
    }

    let keep: Vec<usize> = (0..n).filter(|&s| scc.is_trivial_state(s) || scc_choices.contains_key(&s)).collect();
    let mut reduced_of = vec![None; n];
    for (i, &s) in keep.iter().enumerate() {
        reduced_of[s] = Some(i);
    }
    let mut states: Vec<String> = keep.iter().map(|&s| m.states[s].clone()).collect();
    let mut labels: Vec<BTreeSet<String>> = keep.iter().map(|&s| m.labels[s].clone()).collect();
    let mut origin = keep.clone();
    let mut is_trap = vec![false; keep.len()];
    let mut choices: Vec<Vec<Choice>> = Vec::with_capacity(keep.len());
    let mut provenance: Vec<Vec<ReducedChoice>> = Vec::with_capacity(keep.len());
    let mut traps: Vec<(usize, usize)> = Vec::new(); // (input original id, trap reduced id)
    let remap = |t: usize| reduced_of[t].expect("kept target");
    for &s in &keep {
        match scc_choices.get(&s) {
            None => {
                choices.push(
                    absorbed.choices[s]
                        .iter()
                        .map(|c| Choice {
                            label: c.label.clone(),
                            dist: Distribution::from_pairs(c.dist.entries.iter().map(|(t, p)| (remap(*t), p.clone()))),
                        })
                        .collect(),
                );
                provenance.push((0..absorbed.choices[s].len()).map(ReducedChoice::Original).collect());
            }
            Some(list) => {
                let mut cs = Vec::new();
                let mut ps = Vec::new();
                for (i, ((d, trapped), prov)) in list.iter().enumerate() {
                    let mut pairs: Vec<(usize, Prob)> = d.iter().map(|(t, p)| (remap(*t), p.clone())).collect();
                    let dist = if d.is_empty() {
                        Distribution::dirac(reduced_of[s].expect("input kept"))
                    } else {
                        if !trapped.is_zero() {
                            let trap = match traps.iter().find(|(src, _)| *src == s) {
                                Some(&(_, t)) => t,
                                None => {
                                    let t = keep.len() + traps.len();
                                    traps.push((s, t));
                                    t
                                }
                            };
                            pairs.push((trap, trapped.clone()));
                        }
                        Distribution::from_pairs(pairs)
                    };
                    cs.push(Choice { label: i.to_string(), dist });
                    ps.push(prov.clone());
                }
                choices.push(cs);
                provenance.push(ps);
            }
        }
    }
    for &(s, t) in &traps {
        debug_assert_eq!(t, states.len());
        states.push(format!("{}~trap", m.states[s]));
        labels.push(m.labels[s].clone());
        origin.push(s);
        is_trap.push(true);
        choices.push(vec![Choice { label: "0".into(), dist: Distribution::dirac(t) }]);
        provenance.push(Vec::new());
    }
    let stop_reduced: Vec<bool> = origin.iter().zip(&is_trap).map(|(&o, &tr)| !tr && stop[o]).collect();
    let model = MarkovModel {
        kind: ModelKind::Mdp,
        states,
        init: reduced_of[m.init].expect("initial state kept"),
        labels,
        choices,
    };
    Ok(AcyclicMdp { model, origin, reduced_of, is_trap, provenance, stop: stop_reduced, scc })
}

/// Topological order (sources first) of a graph whose only cycles are
/// self-loops.
pub fn topological_order(adj: &[Vec<usize>]) -> Vec<usize> {
    let mut comps = tarjan(adj);
    comps.reverse();
    comps.into_iter().flatten().collect()
}
