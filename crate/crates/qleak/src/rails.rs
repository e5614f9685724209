//! Rails and torrents: paths of the acyclic reduction and the sets of
//! original paths they stand for.
//!
//! A rail is a path of the reduced chain from the initial state to a goal
//! state. Its torrent collects the original paths that follow the rail and
//! wander arbitrarily inside each component they enter. Rails come out of
//! [`RailStream`] by non-increasing mass, ties broken by the
//! lexicographically smaller state sequence.

use crate::graph::{AcyclicMc, SccInterface};
use crate::model::MarkovModel;
use crate::rational::Prob;
use num::{One, Zero};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rail {
    /// Original state indices.
    pub states: Vec<usize>,
    pub mass: Prob,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    bound: Prob,
    mass: Prob,
    path: Vec<usize>,
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.cmp(&other.bound).then_with(|| other.path.cmp(&self.path))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lazy best-first enumeration of rails. The heuristic is the exact best
/// completion probability, so a rail is emitted as soon as it is popped.
pub struct RailStream<'a> {
    acyc: &'a AcyclicMc,
    goal: Vec<bool>,
    best: Vec<Prob>,
    heap: BinaryHeap<Entry>,
}

/// Rails of `acyc` towards the original states marked in `goal`, which
/// are expected to be absorbing.
pub fn rails_by_probability<'a>(acyc: &'a AcyclicMc, goal: &[bool]) -> RailStream<'a> {
    let m = &acyc.model;
    let goal: Vec<bool> = acyc.origin.iter().map(|&s| goal[s]).collect();
    let best = best_completion(m, &goal);
    let mut heap = BinaryHeap::new();
    if !best[m.init].is_zero() {
        heap.push(Entry { bound: best[m.init].clone(), mass: Prob::one(), path: vec![m.init] });
    }
    RailStream { acyc, goal, best, heap }
}

fn best_completion(m: &MarkovModel, goal: &[bool]) -> Vec<Prob> {
    let adj: Vec<Vec<usize>> =
        (0..m.len()).map(|s| if goal[s] { Vec::new() } else { m.row(s).support().filter(|&t| t != s).collect() }).collect();
    let mut best = vec![Prob::zero(); m.len()];
    for s in crate::graph::topological_order(&adj).into_iter().rev() {
        if goal[s] {
            best[s] = Prob::one();
            continue;
        }
        for &t in &adj[s] {
            let v = m.row(s).prob(t) * &best[t];
            if v > best[s] {
                best[s] = v;
            }
        }
    }
    best
}

impl Iterator for RailStream<'_> {
    type Item = Rail;

    fn next(&mut self) -> Option<Rail> {
        let m = &self.acyc.model;
        while let Some(e) = self.heap.pop() {
            let last = *e.path.last().unwrap();
            if self.goal[last] {
                let states = e.path.iter().map(|&s| self.acyc.origin[s]).collect();
                return Some(Rail { states, mass: e.mass });
            }
            for (&t, p) in &m.row(last).entries {
                if t == last || self.best[t].is_zero() {
                    continue;
                }
                let mass = &e.mass * p;
                let mut path = e.path.clone();
                path.push(t);
                self.heap.push(Entry { bound: &mass * &self.best[t], mass, path });
            }
        }
        None
    }
}

/// A component traversal whose representant covers at most half of the
/// exit probability, reported together with the component's interface.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SccExpansion {
    pub states: Vec<usize>,
    pub input: usize,
    pub output: usize,
    pub exit_prob: Prob,
    pub segment_mass: Prob,
    pub interface: SccInterface,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorrentSummary {
    pub rail: Vec<usize>,
    pub mass: Prob,
    /// Most probable generator of the torrent.
    pub representant: Vec<usize>,
    pub representant_mass: Prob,
    pub expansions: Vec<SccExpansion>,
}

/// Expands a rail of `acyc` into its representant, using the transitions of
/// the unreduced chain `m`.
pub fn torrent_of(rail: &Rail, acyc: &AcyclicMc, m: &MarkovModel) -> TorrentSummary {
    let mut representant = vec![rail.states[0]];
    let mut representant_mass = Prob::one();
    let mut expansions = Vec::new();
    for w in rail.states.windows(2) {
        let (s, t) = (w[0], w[1]);
        match acyc.interface_of_input(s) {
            None => {
                representant_mass *= m.row(s).prob(t);
                representant.push(t);
            }
            Some(iface) => {
                let comp = &acyc.scc.components[iface.component];
                let (seg, mass) = best_segment(m, comp, s, t);
                let exit_prob = iface.reach.get(&(s, t)).cloned().unwrap_or_else(Prob::zero);
                if !exit_prob.is_zero() && &mass / &exit_prob <= Prob::new(1.into(), 2.into()) {
                    let mut states = comp.clone();
                    states.sort_unstable();
                    expansions.push(SccExpansion {
                        states,
                        input: s,
                        output: t,
                        exit_prob,
                        segment_mass: mass.clone(),
                        interface: iface.clone(),
                    });
                }
                representant_mass *= mass;
                representant.extend_from_slice(&seg[1..]);
            }
        }
    }
    TorrentSummary { rail: rail.states.clone(), mass: rail.mass.clone(), representant, representant_mass, expansions }
}

/// Most probable path from `s` through `comp` ending with a step to `t`
/// outside it. Products of probabilities only shrink along a path, so the
/// Dijkstra settling order is exact.
fn best_segment(m: &MarkovModel, comp: &[usize], s: usize, t: usize) -> (Vec<usize>, Prob) {
    let mut best: BTreeMap<usize, (Prob, Vec<usize>)> = BTreeMap::new();
    best.insert(s, (Prob::one(), vec![s]));
    let mut done: Vec<usize> = Vec::new();
    loop {
        let next = best
            .iter()
            .filter(|(u, _)| !done.contains(u))
            .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then_with(|| b.1 .1.cmp(&a.1 .1)))
            .map(|(u, _)| *u);
        let Some(u) = next else { break };
        done.push(u);
        let (pu, path) = best[&u].clone();
        for (&v, p) in &m.row(u).entries {
            if v == u || !comp.contains(&v) || done.contains(&v) {
                continue;
            }
            let cand = &pu * p;
            let mut cpath = path.clone();
            cpath.push(v);
            let better = match best.get(&v) {
                None => true,
                Some((q, qp)) => cand > *q || (cand == *q && cpath < *qp),
            };
            if better {
                best.insert(v, (cand, cpath));
            }
        }
    }
    let mut out: Option<(Prob, Vec<usize>)> = None;
    for (u, (pu, path)) in &best {
        let p = m.row(*u).prob(t);
        if p.is_zero() {
            continue;
        }
        let cand = pu * &p;
        let mut cpath = path.clone();
        cpath.push(t);
        let better = match &out {
            None => true,
            Some((q, qp)) => cand > *q || (cand == *q && cpath < *qp),
        };
        if better {
            out = Some((cand, cpath));
        }
    }
    let (mass, path) = out.expect("rail step leaves the component");
    (path, mass)
}

/// Whether the finite original path `path` is a generator of the rail's
/// torrent: it matches the rail step by step, and inside a component it
/// stays in that component until it takes the rail's exit.
pub fn is_generator(path: &[usize], rail: &[usize], acyc: &AcyclicMc) -> bool {
    if path.first() != rail.first() {
        return false;
    }
    let mut j = 0;
    for w in rail.windows(2) {
        let (s, t) = (w[0], w[1]);
        if path[j] != s {
            return false;
        }
        if acyc.interface_of_input(s).is_some() {
            let k = acyc.scc.component_of[s];
            while j + 1 < path.len() && acyc.scc.component_of[path[j + 1]] == k {
                j += 1;
            }
        }
        j += 1;
        if j >= path.len() || path[j] != t {
            return false;
        }
    }
    j + 1 == path.len()
}

/// Probability of the cone of a finite path.
pub fn path_mass(m: &MarkovModel, path: &[usize]) -> Prob {
    path.windows(2).fold(Prob::one(), |acc, w| acc * m.row(w[0]).prob(w[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_absorbing, reduce_mc_acyclic};
    use crate::model::Distribution;
    use crate::prop::Prop;
    use crate::rational::ratio;
    use std::collections::BTreeSet;

    fn intro() -> MarkovModel {
        let lab = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
        MarkovModel::mc(
            vec![
                Distribution::from_pairs([(1, ratio(2, 5)), (2, ratio(3, 5))]),
                Distribution::from_pairs([(1, ratio(1, 2)), (3, ratio(1, 2))]),
                Distribution::from_pairs([(2, ratio(99, 100)), (4, ratio(1, 100))]),
                Distribution::dirac(3),
                Distribution::dirac(4),
            ],
            0,
            vec![lab(&[]), lab(&[]), lab(&[]), lab(&["psi"]), lab(&["psi"])],
        )
    }

    #[test]
    fn intro_rails() {
        let ab = make_absorbing(&intro(), &Prop::atom("psi"));
        let acyc = reduce_mc_acyclic(&ab.model);
        let rails: Vec<Rail> = rails_by_probability(&acyc, &ab.goal).collect();
        assert_eq!(rails.len(), 2);
        assert_eq!(rails[0].states, vec![0, 2, 4]);
        assert_eq!(rails[0].mass, ratio(3, 5));
        assert_eq!(rails[1].states, vec![0, 1, 3]);
        let t = torrent_of(&rails[1], &acyc, &ab.model);
        assert_eq!(t.representant, vec![0, 1, 3]);
        assert_eq!(t.representant_mass, ratio(1, 5));
        assert_eq!(t.expansions.len(), 1);
        let t0 = torrent_of(&rails[0], &acyc, &ab.model);
        assert_eq!(t0.representant_mass, ratio(6, 1000));
    }

    #[test]
    fn generators() {
        let ab = make_absorbing(&intro(), &Prop::atom("psi"));
        let acyc = reduce_mc_acyclic(&ab.model);
        assert!(is_generator(&[0, 1, 1, 1, 3], &[0, 1, 3], &acyc));
        assert!(is_generator(&[0, 1, 3], &[0, 1, 3], &acyc));
        assert!(!is_generator(&[0, 2, 4], &[0, 1, 3], &acyc));
        assert!(!is_generator(&[0, 1, 3, 3], &[0, 1, 3], &acyc));
    }
}
