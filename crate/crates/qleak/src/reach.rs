//! Maximal and minimal probabilities of until/globally formulas on MDPs by
//! policy iteration with exact linear solves.

use crate::formula::PathFormula;
use crate::graph::absorption_values;
use crate::model::{Choice, MarkovModel, ModelKind};
use crate::prop::Prop;
use crate::rational::Prob;
use num::{One, Zero};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Max,
    Min,
}

impl Mode {
    pub fn opposite(self) -> Mode {
        match self {
            Mode::Max => Mode::Min,
            Mode::Min => Mode::Max,
        }
    }
}

/// Deterministic memoryless scheduler: one choice index per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemorylessScheduler {
    pub choice_of: Vec<usize>,
}

impl MemorylessScheduler {
    pub fn lowest(m: &MarkovModel) -> Self {
        MemorylessScheduler { choice_of: vec![0; m.len()] }
    }

    pub fn is_valid_for(&self, m: &MarkovModel) -> bool {
        self.choice_of.len() == m.len() && self.choice_of.iter().enumerate().all(|(s, &c)| c < m.choices[s].len())
    }
}

#[derive(Debug, Clone)]
pub struct OptResult {
    pub values: Vec<Prob>,
    pub scheduler: MemorylessScheduler,
}

/// The MC obtained by resolving every state with the scheduler's choice.
pub fn induce_mc(m: &MarkovModel, sched: &MemorylessScheduler) -> MarkovModel {
    MarkovModel {
        kind: ModelKind::Mc,
        states: m.states.clone(),
        init: m.init,
        labels: m.labels.clone(),
        choices: m
            .choices
            .iter()
            .zip(&sched.choice_of)
            .map(|(cs, &c)| vec![Choice { label: cs[c].label.clone(), dist: cs[c].dist.clone() }])
            .collect(),
    }
}

fn q_value(m: &MarkovModel, s: usize, c: usize, v: &[Prob]) -> Prob {
    m.choices[s][c].dist.entries.iter().fold(Prob::zero(), |acc, (t, p)| acc + p * &v[*t])
}

/// Optimal expected terminal value. States with `Some(w)` stop and pay `w`;
/// runs that never stop pay zero.
pub fn solve_terminal(m: &MarkovModel, terminal: &[Option<Prob>], mode: Mode) -> OptResult {
    let n = m.len();
    let mut sched = MemorylessScheduler::lowest(m);
    let mut fixed = terminal.to_vec();
    if mode == Mode::Min {
        // states that can avoid every positive payoff forever are worth zero
        let mut zone: Vec<bool> = (0..n)
            .map(|s| match &terminal[s] {
                Some(w) => w.is_zero(),
                None => true,
            })
            .collect();
        loop {
            let mut changed = false;
            for s in 0..n {
                if zone[s] && terminal[s].is_none() {
                    let stay = m.choices[s].iter().position(|c| c.dist.support().all(|t| zone[t]));
                    match stay {
                        Some(c) => sched.choice_of[s] = c,
                        None => {
                            zone[s] = false;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        for s in 0..n {
            if zone[s] && terminal[s].is_none() {
                fixed[s] = Some(Prob::zero());
            }
        }
    }
    loop {
        let values = absorption_values(&induce_mc(m, &sched), &fixed);
        let mut changed = false;
        for s in 0..n {
            if fixed[s].is_some() {
                continue;
            }
            let mut best = sched.choice_of[s];
            let mut best_q = values[s].clone();
            for c in 0..m.choices[s].len() {
                let q = q_value(m, s, c, &values);
                let better = match mode {
                    Mode::Max => q > best_q,
                    Mode::Min => q < best_q,
                };
                if better {
                    best = c;
                    best_q = q;
                }
            }
            if best != sched.choice_of[s] {
                sched.choice_of[s] = best;
                changed = true;
            }
        }
        if !changed {
            return OptResult { values, scheduler: sched };
        }
    }
}

/// Terminal payoffs for `a U b`: `b` states pay 1, `!a & !b` states pay 0.
pub fn until_terminal(m: &MarkovModel, a: &Prop, b: &Prop) -> Vec<Option<Prob>> {
    m.labels
        .iter()
        .map(|l| {
            if b.eval(l) {
                Some(Prob::one())
            } else if !a.eval(l) {
                Some(Prob::zero())
            } else {
                None
            }
        })
        .collect()
}

/// Optimal values from every state together with an optimal scheduler.
pub fn opt_values(m: &MarkovModel, path: &PathFormula, mode: Mode) -> OptResult {
    match path {
        PathFormula::Until(a, b) => solve_terminal(m, &until_terminal(m, a, b), mode),
        PathFormula::Globally(a) => {
            let dual = solve_terminal(m, &until_terminal(m, &Prop::True, &Prop::not(a.clone())), mode.opposite());
            OptResult {
                values: dual.values.into_iter().map(|v| Prob::one() - v).collect(),
                scheduler: dual.scheduler,
            }
        }
    }
}

pub fn opt_prob(m: &MarkovModel, path: &PathFormula, mode: Mode) -> Prob {
    opt_values(m, path, mode).values.swap_remove(m.init)
}

pub fn extract_opt_scheduler(m: &MarkovModel, path: &PathFormula, mode: Mode) -> MemorylessScheduler {
    opt_values(m, path, mode).scheduler
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::reach_probs_mc;
    use crate::model::Distribution;
    use crate::rational::ratio;
    use std::collections::BTreeSet;

    fn lab(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    /// s0 chooses between reaching the goal w.p. 1/2 or 1/3.
    fn two_choice() -> MarkovModel {
        MarkovModel::mdp(
            vec![
                vec![
                    Distribution::from_pairs([(1, ratio(1, 3)), (2, ratio(2, 3))]),
                    Distribution::from_pairs([(1, ratio(1, 2)), (2, ratio(1, 2))]),
                ],
                vec![Distribution::dirac(1)],
                vec![Distribution::dirac(2)],
            ],
            0,
            vec![lab(&[]), lab(&["goal"]), lab(&[])],
        )
    }

    #[test]
    fn max_and_min_on_two_choices() {
        let m = two_choice();
        let f = PathFormula::eventually(Prop::atom("goal"));
        assert_eq!(opt_prob(&m, &f, Mode::Max), ratio(1, 2));
        assert_eq!(opt_prob(&m, &f, Mode::Min), ratio(1, 3));
        let s = extract_opt_scheduler(&m, &f, Mode::Max);
        assert_eq!(s.choice_of[0], 1);
        let mc = induce_mc(&m, &s);
        assert_eq!(reach_probs_mc(&mc, &[false, true, false])[0], ratio(1, 2));
    }

    #[test]
    fn target_at_init() {
        let m = two_choice();
        assert_eq!(opt_prob(&m, &PathFormula::eventually(Prop::True), Mode::Max), ratio(1, 1));
    }

    #[test]
    fn zero_probability_keeps_lowest_index() {
        let m = two_choice();
        let s = extract_opt_scheduler(&m, &PathFormula::eventually(Prop::atom("nowhere")), Mode::Max);
        assert_eq!(s.choice_of, vec![0, 0, 0]);
    }

    #[test]
    fn min_can_loop_forever() {
        // s0: either loop on itself or go to the goal
        let m = MarkovModel::mdp(
            vec![vec![Distribution::dirac(1), Distribution::dirac(0)], vec![Distribution::dirac(1)]],
            0,
            vec![lab(&[]), lab(&["goal"])],
        );
        let f = PathFormula::eventually(Prop::atom("goal"));
        assert_eq!(opt_prob(&m, &f, Mode::Min), ratio(0, 1));
        assert_eq!(opt_prob(&m, &f, Mode::Max), ratio(1, 1));
        assert_eq!(extract_opt_scheduler(&m, &f, Mode::Min).choice_of[0], 1);
    }

    #[test]
    fn globally_duality() {
        let m = two_choice();
        let g = PathFormula::Globally(Prop::not(Prop::atom("goal")));
        let f = PathFormula::eventually(Prop::atom("goal"));
        assert_eq!(opt_prob(&m, &g, Mode::Max) + opt_prob(&m, &f, Mode::Min), ratio(1, 1));
        assert_eq!(opt_prob(&m, &g, Mode::Max), ratio(2, 3));
    }
}
