//! Joint and channel matrices of information-hiding systems, min-entropy
//! vulnerability and leakage, and maximum leakage over priors.
//!
//! Trace probabilities come from the backward system in the unknowns
//! `x_q^λ` (probability of emitting exactly the visible suffix `λ` from
//! `q` until termination). With `H` the internal-step matrix, every suffix
//! gives `(I - H) x^λ = b^λ`, where `b^λ` only involves strictly shorter
//! suffixes, so suffixes are solved shortest first, one block per length.

use crate::ihs::{validate_ihs, ActEntry, ActionKind, Ihs, Prior};
use crate::linalg::solve_multi;
use crate::rational::Prob;
use crate::{Error, Result};
use num::{One, Zero};
use std::collections::{BTreeMap, BTreeSet, HashSet};

pub type Trace = Vec<String>;

pub fn fmt_trace(t: &[String]) -> String {
    if t.is_empty() {
        "ε".to_string()
    } else {
        t.join(".")
    }
}

/// Rows are secret traces, columns observable traces. Used both for the
/// joint matrix and for the (row-conditioned) channel matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceMatrix {
    pub secrets: Vec<Trace>,
    pub observables: Vec<Trace>,
    pub cells: Vec<Vec<Prob>>,
}

pub type JointMatrix = TraceMatrix;
pub type ChannelMatrix = TraceMatrix;

impl TraceMatrix {
    pub fn row_sums(&self) -> Vec<Prob> {
        self.cells.iter().map(|r| r.iter().fold(Prob::zero(), |a, x| a + x)).collect()
    }

    pub fn total(&self) -> Prob {
        self.row_sums().into_iter().fold(Prob::zero(), |a, x| a + x)
    }

    pub fn secret_index(&self, s: &str) -> Option<usize> {
        self.secrets.iter().position(|t| fmt_trace(t) == s)
    }

    pub fn observable_index(&self, o: &str) -> Option<usize> {
        self.observables.iter().position(|t| fmt_trace(t) == o)
    }

    pub fn cell(&self, s: &str, o: &str) -> Option<&Prob> {
        Some(&self.cells[self.secret_index(s)?][self.observable_index(o)?])
    }

    /// The marginal over rows, keyed by formatted secret trace.
    pub fn row_prior(&self) -> Prior {
        Prior { entries: self.secrets.iter().map(|s| fmt_trace(s)).zip(self.row_sums()).collect() }
    }

    /// Sum over columns of the column maximum.
    pub fn column_max_sum(&self) -> Prob {
        (0..self.observables.len())
            .map(|o| self.cells.iter().map(|r| r[o].clone()).max().unwrap_or_else(Prob::zero))
            .fold(Prob::zero(), |a, x| a + x)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeakageReport {
    pub prior_vuln: Prob,
    pub post_vuln: Prob,
    pub multiplicative: Prob,
    pub additive: Prob,
}

/// Everything computed for one system with a fixed prior.
#[derive(Debug, Clone)]
pub struct ChannelData {
    pub joint: JointMatrix,
    pub channel: ChannelMatrix,
    pub prior: Prior,
    pub report: LeakageReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxMode {
    Mult,
    Add,
}

#[derive(Debug, Clone)]
pub struct MaxLeakage {
    pub value: Prob,
    pub prior: Prior,
}

/// Largest number of secrets for which corner points are enumerated.
pub const CORNER_LIMIT: usize = 20;

fn check(h: &Ihs) -> Result<()> {
    let v = validate_ihs(h);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidModel(v))
    }
}

/// Visible traces to termination in first-encounter order of a depth-first
/// walk following transitions in declaration order.
pub fn discover_traces(h: &Ihs) -> Vec<Trace> {
    fn walk(h: &Ihs, q: usize, prefix: &mut Trace, seen: &mut HashSet<(usize, Trace)>, out: &mut Vec<Trace>) {
        if !seen.insert((q, prefix.clone())) {
            return;
        }
        if h.is_terminal(q) && !out.contains(prefix) {
            out.push(prefix.clone());
        }
        for e in h.trans[q].iter().flatten() {
            if h.kind_of(&e.action) == ActionKind::Internal {
                walk(h, e.target, prefix, seen, out);
            } else {
                prefix.push(e.action.clone());
                walk(h, e.target, prefix, seen, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(h, h.init, &mut Vec::new(), &mut HashSet::new(), &mut out);
    out
}

/// Exact probability of every full visible trace from the initial state.
/// Requires a single distribution per state.
pub fn trace_probabilities(h: &Ihs) -> Result<Vec<(Trace, Prob)>> {
    if h.variable_prior {
        return Err(Error::VariablePrior);
    }
    check(h)?;
    let traces = discover_traces(h);
    let n = h.len();
    let sink = n;
    let dim = n + 1;
    // a = I - H over states plus the synthetic final sink
    let mut a = vec![vec![Prob::zero(); dim]; dim];
    for (q, row) in a.iter_mut().enumerate() {
        row[q] = Prob::one();
    }
    let mut visible: Vec<Vec<&ActEntry>> = vec![Vec::new(); n];
    for q in 0..n {
        if h.is_terminal(q) {
            a[q][sink] -= Prob::one();
        }
        for e in h.trans[q].iter().flatten() {
            if h.kind_of(&e.action) == ActionKind::Internal {
                a[q][e.target] -= &e.prob;
            } else {
                visible[q].push(e);
            }
        }
    }
    let mut suffixes: BTreeSet<(usize, Trace)> = BTreeSet::new();
    for t in &traces {
        for i in 0..=t.len() {
            suffixes.insert((t.len() - i, t[i..].to_vec()));
        }
    }
    let mut x: BTreeMap<Trace, Vec<Prob>> = BTreeMap::new();
    let max_len = suffixes.iter().map(|(l, _)| *l).max().unwrap_or(0);
    for len in 0..=max_len {
        let level: Vec<&Trace> = suffixes.iter().filter(|(l, _)| *l == len).map(|(_, t)| t).collect();
        if level.is_empty() {
            continue;
        }
        let rhs: Vec<Vec<Prob>> = level
            .iter()
            .map(|lam| {
                let mut b = vec![Prob::zero(); dim];
                if lam.is_empty() {
                    b[sink] = Prob::one();
                } else {
                    let rest = &x[&lam[1..].to_vec()];
                    for q in 0..n {
                        for e in &visible[q] {
                            if e.action == lam[0] {
                                b[q] += &e.prob * &rest[e.target];
                            }
                        }
                    }
                }
                b
            })
            .collect();
        let sol = solve_multi(a.clone(), rhs)
            .ok_or_else(|| Error::Singular("internal steps do not terminate with probability 1".into()))?;
        for (lam, col) in level.into_iter().zip(sol) {
            x.insert(lam.clone(), col);
        }
    }
    Ok(traces.into_iter().map(|t| {
        let p = x[&t][h.init].clone();
        (t, p)
    })
    .collect())
}

fn project(h: &Ihs, t: &[String], kind: ActionKind) -> Trace {
    t.iter().filter(|a| h.kind_of(a) == kind).cloned().collect()
}

/// Joint probabilities `P([s] ∩ [o])` over secret and observable traces.
/// Simple systems list every declared secret as a one-symbol row.
pub fn joint_matrix(h: &Ihs) -> Result<JointMatrix> {
    let probs = trace_probabilities(h)?;
    let mut secrets: Vec<Trace> = if h.interactive { Vec::new() } else { h.secrets.iter().map(|s| vec![s.clone()]).collect() };
    let mut observables: Vec<Trace> = Vec::new();
    let mut acc: Vec<(Trace, Trace, Prob)> = Vec::new();
    for (t, p) in probs {
        let s = project(h, &t, ActionKind::Secret);
        let o = project(h, &t, ActionKind::Observable);
        if !secrets.contains(&s) {
            secrets.push(s.clone());
        }
        if !observables.contains(&o) {
            observables.push(o.clone());
        }
        acc.push((s, o, p));
    }
    let mut cells = vec![vec![Prob::zero(); observables.len()]; secrets.len()];
    for (s, o, p) in acc {
        let i = secrets.iter().position(|x| *x == s).unwrap();
        let j = observables.iter().position(|x| *x == o).unwrap();
        cells[i][j] += p;
    }
    Ok(TraceMatrix { secrets, observables, cells })
}

/// Joint matrix of an interactive system over pairs of secret and
/// observable traces.
pub fn interactive_joint(h: &Ihs) -> Result<JointMatrix> {
    if !h.interactive {
        return Err(Error::Unsupported("system is not marked interactive".into()));
    }
    joint_matrix(h)
}

/// Divides each joint row by its prior mass.
pub fn condition_rows(j: &JointMatrix) -> Result<ChannelMatrix> {
    let sums = j.row_sums();
    let mut cells = Vec::with_capacity(j.cells.len());
    for (i, row) in j.cells.iter().enumerate() {
        if sums[i].is_zero() {
            return Err(Error::ZeroPrior(fmt_trace(&j.secrets[i])));
        }
        cells.push(row.iter().map(|c| c / &sums[i]).collect());
    }
    Ok(TraceMatrix { secrets: j.secrets.clone(), observables: j.observables.clone(), cells })
}

/// Conditional probabilities `P(o | s)`. A variable-prior system is first
/// instantiated with the uniform prior; its channel does not depend on it.
pub fn channel_matrix(h: &Ihs) -> Result<ChannelMatrix> {
    if h.variable_prior {
        let u = instantiate_prior(h, &Prior::uniform(&h.secrets))?;
        return condition_rows(&joint_matrix(&u)?);
    }
    condition_rows(&joint_matrix(h)?)
}

/// `P(o | s)` for one cell of a joint matrix, if the row has mass.
pub fn conditional(j: &JointMatrix, secret: &str, observable: &str) -> Option<Prob> {
    let i = j.secret_index(secret)?;
    let k = j.observable_index(observable)?;
    let mass = j.row_sums().swap_remove(i);
    if mass.is_zero() {
        None
    } else {
        Some(&j.cells[i][k] / mass)
    }
}

pub fn leakage(j: &JointMatrix, prior: &Prior) -> LeakageReport {
    let prior_vuln = prior.vulnerability();
    let post_vuln = j.column_max_sum();
    let multiplicative = if prior_vuln.is_zero() { Prob::zero() } else { &post_vuln / &prior_vuln };
    let additive = &post_vuln - &prior_vuln;
    LeakageReport { prior_vuln, post_vuln, multiplicative, additive }
}

/// Joint, channel, prior and leakage of a fixed-prior system.
pub fn analyze(h: &Ihs) -> Result<ChannelData> {
    let joint = joint_matrix(h)?;
    let prior = if h.interactive { joint.row_prior() } else { crate::ihs::prior_of(h)? };
    let channel = condition_rows(&joint)?;
    let report = leakage(&joint, &prior);
    Ok(ChannelData { joint, channel, prior, report })
}

fn check_prior(h: &Ihs, prior: &Prior) -> Result<()> {
    for (s, p) in &prior.entries {
        if !h.secrets.contains(s) {
            return Err(Error::PriorMismatch(format!("`{s}` is not a secret")));
        }
        if p.is_zero() || *p < Prob::zero() {
            return Err(Error::PriorMismatch(format!("secret `{s}` needs positive probability")));
        }
    }
    for s in &h.secrets {
        if !prior.entries.iter().any(|(x, _)| x == s) {
            return Err(Error::PriorMismatch(format!("secret `{s}` missing from the prior")));
        }
    }
    if !prior.total().is_one() {
        return Err(Error::PriorMismatch(format!("prior sums to {}", prior.total())));
    }
    Ok(())
}

/// The fixed-prior system obtained by weighting each initial secret branch
/// with `prior`. Also re-weights the initial distribution of a simple
/// system.
pub fn instantiate_prior(h: &Ihs, prior: &Prior) -> Result<Ihs> {
    if h.interactive {
        return Err(Error::Unsupported("interactive systems have no separable prior".into()));
    }
    check_prior(h, prior)?;
    let mut entries = Vec::new();
    for s in &h.secrets {
        let target = h.trans[h.init]
            .iter()
            .flatten()
            .find(|e| e.action == *s)
            .map(|e| e.target)
            .ok_or_else(|| Error::PriorMismatch(format!("secret `{s}` has no initial transition")))?;
        entries.push(ActEntry { prob: prior.get(s), action: s.clone(), target });
    }
    let mut out = h.clone();
    out.trans[h.init] = vec![entries];
    out.variable_prior = false;
    Ok(out)
}

/// Maximum leakage over all priors: multiplicative at the uniform prior,
/// additive over corner points.
pub fn max_leakage(h: &Ihs, mode: MaxMode) -> Result<MaxLeakage> {
    if h.interactive {
        return Err(Error::Unsupported("maximum leakage needs a prior-independent channel".into()));
    }
    let c = channel_matrix(h)?;
    let names: Vec<String> = c.secrets.iter().map(|s| fmt_trace(s)).collect();
    match mode {
        MaxMode::Mult => Ok(MaxLeakage { value: c.column_max_sum(), prior: Prior::uniform(&names) }),
        MaxMode::Add => {
            let n = names.len();
            if n > CORNER_LIMIT {
                return Err(Error::CornerExplosion(n, (1u128 << n) - 1));
            }
            let mut best: Option<(Prob, u64)> = None;
            for mask in 1u64..(1u64 << n) {
                let k = Prob::from_integer(mask.count_ones().into());
                let mut post = Prob::zero();
                for o in 0..c.observables.len() {
                    let m = (0..n)
                        .filter(|i| mask >> i & 1 == 1)
                        .map(|i| c.cells[i][o].clone())
                        .max()
                        .unwrap_or_else(Prob::zero);
                    post += m;
                }
                let value = (post - Prob::one()) / k;
                if best.as_ref().is_none_or(|(b, _)| value > *b) {
                    best = Some((value, mask));
                }
            }
            let (value, mask) = best.expect("at least one secret");
            let k = Prob::from_integer(mask.count_ones().into());
            let prior = Prior {
                entries: names
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (s.clone(), if mask >> i & 1 == 1 { Prob::one() / &k } else { Prob::zero() }))
                    .collect(),
            };
            Ok(MaxLeakage { value, prior })
        }
    }
}
