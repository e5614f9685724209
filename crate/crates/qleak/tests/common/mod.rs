#![allow(dead_code)]

use qleak::formula::PathFormula;
use qleak::graph::reach_probs_mc;
use qleak::model::{Distribution, MarkovModel};
use qleak::product::{step, Status};
use qleak::prop::Prop;
use qleak::rational::{ratio, Prob};
use qleak::reach::{induce_mc, MemorylessScheduler};
use num::{One, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::BTreeSet;

pub const ATOMS: [&str; 3] = ["a", "b", "c"];

/// Random distribution over `targets` with a common denominator at most 8.
pub fn random_dist<R: Rng>(rng: &mut R, n: usize) -> Distribution {
    let k = rng.gen_range(1..=3.min(n));
    let mut states: Vec<usize> = (0..n).collect();
    states.shuffle(rng);
    let targets = &states[..k];
    let den = rng.gen_range(k as i64..=8);
    // split den into k positive parts
    let mut cuts: Vec<i64> = (1..den).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<i64> = cuts.into_iter().take(k - 1).collect();
    cuts.sort_unstable();
    let mut prev = 0;
    let mut parts = Vec::new();
    for c in cuts.into_iter().chain(std::iter::once(den)) {
        parts.push(c - prev);
        prev = c;
    }
    Distribution::from_pairs(targets.iter().zip(parts).map(|(&t, p)| (t, ratio(p, den))))
}

pub fn random_labels<R: Rng>(rng: &mut R, n: usize) -> Vec<BTreeSet<String>> {
    (0..n)
        .map(|_| ATOMS.iter().filter(|_| rng.gen_bool(0.45)).map(|s| s.to_string()).collect())
        .collect()
}

pub fn random_mdp<R: Rng>(rng: &mut R, max_states: usize, max_choices: usize) -> MarkovModel {
    let n = rng.gen_range(2..=max_states);
    let choices = (0..n)
        .map(|_| (0..rng.gen_range(1..=max_choices)).map(|_| random_dist(rng, n)).collect())
        .collect();
    MarkovModel::mdp(choices, 0, random_labels(rng, n))
}

pub fn random_mc<R: Rng>(rng: &mut R, max_states: usize) -> MarkovModel {
    let n = rng.gen_range(2..=max_states);
    let rows = (0..n).map(|_| random_dist(rng, n)).collect();
    MarkovModel::mc(rows, 0, random_labels(rng, n))
}

pub fn random_prop<R: Rng>(rng: &mut R) -> Prop {
    let atom = Prop::atom(ATOMS.choose(rng).unwrap());
    match rng.gen_range(0..5) {
        0 => Prop::True,
        1 => Prop::not(atom),
        2 => Prop::or(atom, Prop::atom(ATOMS.choose(rng).unwrap())),
        _ => atom,
    }
}

pub fn random_path<R: Rng>(rng: &mut R) -> PathFormula {
    if rng.gen_bool(0.3) {
        PathFormula::Globally(random_prop(rng))
    } else {
        let goal = Prop::atom(ATOMS.choose(rng).unwrap());
        PathFormula::Until(random_prop(rng), goal)
    }
}

/// Every deterministic memoryless scheduler, as choice vectors; states not
/// in `free` keep choice 0.
pub fn all_schedulers(m: &MarkovModel, free: &[bool]) -> Vec<MemorylessScheduler> {
    let mut out = vec![MemorylessScheduler { choice_of: vec![0; m.len()] }];
    for s in 0..m.len() {
        if !free[s] {
            continue;
        }
        let mut next = Vec::new();
        for sch in &out {
            for c in 0..m.choices[s].len() {
                let mut x = sch.clone();
                x.choice_of[s] = c;
                next.push(x);
            }
        }
        out = next;
    }
    out
}

fn fresh_status(f: &PathFormula, l: &BTreeSet<String>) -> Status {
    step(f, Status::Pending, l)
}

fn holds_forever_pending(f: &PathFormula) -> bool {
    matches!(f, PathFormula::Globally(_))
}

/// `max P(φ∧ψ)/P(ψ)` over semi history-independent deterministic
/// schedulers: one memoryless choice per non-stopping state, and after the
/// stopping condition any memoryless continuation, chosen per stopping
/// state. Zero when no scheduler gives `ψ` positive mass.
pub fn oracle_cp_max(m: &MarkovModel, phi: &PathFormula, psi: &PathFormula) -> Prob {
    let n = m.len();
    let stop: Vec<bool> = (0..n)
        .map(|s| fresh_status(phi, &m.labels[s]) != Status::Pending || fresh_status(psi, &m.labels[s]) != Status::Pending)
        .collect();
    // continuation pairs per stopping state
    let everything = vec![true; n];
    let afters = all_schedulers(m, &everything);
    let mut options: Vec<Vec<(Prob, Prob)>> = vec![Vec::new(); n];
    for s in (0..n).filter(|&s| stop[s]) {
        let mut seen: Vec<(Prob, Prob)> = Vec::new();
        for sch in &afters {
            let mut mc = induce_mc(m, sch);
            mc.init = s;
            let both = qleak::cpctl::mc_conjunction_prob(&mc, phi, psi);
            let den = qleak::reach::opt_prob(&mc, psi, qleak::reach::Mode::Max);
            let pair = (both, den);
            if !seen.contains(&pair) {
                seen.push(pair);
            }
        }
        options[s] = seen;
    }
    let free: Vec<bool> = stop.iter().map(|&x| !x).collect();
    let mut best = Prob::zero();
    for eta in all_schedulers(m, &free) {
        let mut mc = induce_mc(m, &eta);
        for s in 0..n {
            if stop[s] {
                mc.choices[s][0].dist = Distribution::dirac(s);
            }
        }
        let mut reach: Vec<(usize, Prob)> = Vec::new();
        let mut total = Prob::zero();
        for s in (0..n).filter(|&s| stop[s]) {
            let mut goal = vec![false; n];
            goal[s] = true;
            let r = reach_probs_mc(&mc, &goal)[m.init].clone();
            if !r.is_zero() {
                total += &r;
                reach.push((s, r));
            }
        }
        let trapped = Prob::one() - total;
        let p0 = if holds_forever_pending(phi) && holds_forever_pending(psi) { trapped.clone() } else { Prob::zero() };
        let q0 = if holds_forever_pending(psi) { trapped } else { Prob::zero() };
        // every combination of continuation pairs
        let mut acc: Vec<(Prob, Prob)> = vec![(p0, q0)];
        for (s, r) in &reach {
            let mut next = Vec::new();
            for (p, q) in &acc {
                for (op, oq) in &options[*s] {
                    let pair = (p + r * op, q + r * oq);
                    if !next.contains(&pair) {
                        next.push(pair);
                    }
                }
            }
            acc = next;
        }
        for (p, q) in acc {
            if !q.is_zero() {
                let v = p / q;
                if v > best {
                    best = v;
                }
            }
        }
    }
    best
}

/// Random simple information-hiding system. States sit in layers; internal
/// steps may go anywhere within a layer or forward, visible steps only go
/// forward, so cycles stay internal. The last state is the only terminal.
pub fn random_ihs<R: Rng>(rng: &mut R) -> qleak::ihs::Ihs {
    use qleak::ihs::{ActEntry, Ihs};
    let secrets: Vec<String> = ["s1", "s2", "s3"][..rng.gen_range(2..=3)].iter().map(|s| s.to_string()).collect();
    let observables: Vec<String> = ["o1", "o2", "o3"].iter().map(|s| s.to_string()).collect();
    let layers = rng.gen_range(1..=3);
    let width = 2;
    // state 0 = init, then layers of `width`, then the terminal
    let n = 1 + layers * width + 1;
    let end = n - 1;
    let layer_of = |q: usize| if q == 0 { 0 } else if q == end { layers + 1 } else { 1 + (q - 1) / width };
    let mut trans = vec![Vec::new(); n];
    let first: Vec<usize> = (1..=width).collect();
    // one entry per secret, all secrets present
    let k = secrets.len();
    let den = rng.gen_range(k as i64..=8);
    let mut parts = vec![1i64; k];
    for _ in 0..(den - k as i64) {
        parts[rng.gen_range(0..k)] += 1;
    }
    trans[0] = vec![secrets
        .iter()
        .zip(&parts)
        .map(|(s, &c)| ActEntry { prob: ratio(c, den), action: s.clone(), target: *first.choose(rng).unwrap() })
        .collect()];
    for q in 1..end {
        let l = layer_of(q);
        let forward: Vec<usize> = (1..n).filter(|&t| layer_of(t) > l).collect();
        let same: Vec<usize> = (1..end).filter(|&t| layer_of(t) == l).collect();
        let m = rng.gen_range(1..=3);
        let den = rng.gen_range(m as i64..=8);
        let mut parts = vec![1i64; m];
        for _ in 0..(den - m as i64) {
            parts[rng.gen_range(0..m)] += 1;
        }
        let mut row: Vec<ActEntry> = Vec::new();
        for (j, c) in parts.into_iter().enumerate() {
            // the first entry always leaves the layer so termination is certain
            let (action, target) = if j == 0 || rng.gen_bool(0.5) {
                let t = *forward.choose(rng).unwrap();
                let a = if rng.gen_bool(0.7) { observables.choose(rng).unwrap().clone() } else { "tau".to_string() };
                (a, t)
            } else {
                ("tau".to_string(), *same.choose(rng).unwrap())
            };
            match row.iter_mut().find(|e| e.action == action && e.target == target) {
                Some(e) => e.prob += ratio(c, den),
                None => row.push(ActEntry { prob: ratio(c, den), action, target }),
            }
        }
        trans[q] = vec![row];
    }
    Ihs {
        states: (0..n).map(|q| format!("q{q}")).collect(),
        init: 0,
        secrets,
        observables,
        trans,
        variable_prior: false,
        interactive: false,
    }
}
