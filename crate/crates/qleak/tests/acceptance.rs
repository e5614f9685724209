//! Acceptance runner. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Run with `cargo test -p qleak --test acceptance`.

mod common;

use common::{oracle_cp_max, random_mc, random_mdp, random_path, random_prop};
use num::Zero;
use qleak::cpctl::{check_cpctl, cp_max};
use qleak::delta::{delta_add, delta_rmax, delta_scale, DeltaExpr};
use qleak::diagnostics::{cpctl_counterexample, partial_leakage, torrent_counterexample, Outcome, StopWhen, Strategy};
use qleak::formula::{parse_formula, Cmp, PathFormula, StateFormula};
use qleak::graph::{make_absorbing, reach_prob_mc, reduce_mc_acyclic};
use qleak::ihs::{prior_of, Ihs};
use qleak::leakage::{analyze, channel_matrix, conditional, fmt_trace, joint_matrix};
use qleak::model::MarkovModel;
use qleak::rails::{is_generator, rails_by_probability};
use qleak::rational::{ratio, Prob};
use qleak::regex::{regex_terms, DEFAULT_TERM_LIMIT};
use qleak::text::{parse_model, ParsedModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

const CROWDS_RUNTIME: Duration = Duration::from_secs(1);
const CPCTL_RUNTIME: Duration = Duration::from_secs(60);
const CPCTL_INSTANCES: usize = 200;
const DELTA_INSTANCES: usize = 1000;
const REDUCTION_INSTANCES: usize = 200;
const SOUNDNESS_INSTANCES: usize = 200;

type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn fixture(name: &str) -> ParsedModel {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_model(&std::fs::read_to_string(path).expect("fixture")).expect("fixture parses")
}

fn ihs(name: &str) -> Ihs {
    match fixture(name) {
        ParsedModel::Ihs(h) => h,
        _ => panic!("{name} is not an ihs"),
    }
}

fn chain(name: &str) -> MarkovModel {
    match fixture(name) {
        ParsedModel::Markov(m) => m,
        _ => panic!("{name} is not a chain"),
    }
}

fn c1_crowds_joint() -> Check {
    let start = Instant::now();
    let h = ihs("crowds.ihs");
    let j = joint_matrix(&h).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let want = [
        [ratio(7, 40), ratio(3, 40), ratio(1, 12)],
        [ratio(3, 20), ratio(7, 20), ratio(1, 6)],
    ];
    let cols: Vec<String> = j.observables.iter().map(|o| fmt_trace(o)).collect();
    ensure!(cols == ["A", "B", "U"], "columns {cols:?}");
    for (row, w) in j.cells.iter().zip(&want) {
        ensure!(row[..] == w[..], "row {row:?}");
    }
    ensure!(elapsed < CROWDS_RUNTIME, "took {elapsed:?}");
    Ok(())
}

fn c2_crowds_channel_and_terms() -> Check {
    let h = ihs("crowds.ihs");
    let c = channel_matrix(&h).map_err(|e| e.to_string())?;
    ensure!(c.cells[0] == [ratio(21, 40), ratio(9, 40), ratio(1, 4)], "row a {:?}", c.cells[0]);
    ensure!(c.cells[1] == [ratio(9, 40), ratio(21, 40), ratio(1, 4)], "row b {:?}", c.cells[1]);
    let terms = regex_terms(&h, DEFAULT_TERM_LIMIT).map_err(|e| e.to_string())?.terms;
    for v in [ratio(7, 20), ratio(1, 7), ratio(1, 21), ratio(9, 280)] {
        ensure!(terms.iter().any(|t| t.val == v), "no term with value {v}");
    }
    let mut sums: BTreeMap<(String, String), Prob> = BTreeMap::new();
    for t in &terms {
        *sums.entry((fmt_trace(&t.secret), fmt_trace(&t.observable))).or_insert_with(Prob::zero) += &t.val;
    }
    let j = joint_matrix(&h).map_err(|e| e.to_string())?;
    for (i, s) in j.secrets.iter().enumerate() {
        for (k, o) in j.observables.iter().enumerate() {
            let got = sums.get(&(fmt_trace(s), fmt_trace(o))).cloned().unwrap_or_else(Prob::zero);
            ensure!(got == j.cells[i][k], "terms for ({}, {}) sum to {got}", fmt_trace(s), fmt_trace(o));
        }
    }
    Ok(())
}

fn c3_ebay() -> Check {
    let h = ihs("ebay.ihs");
    let j = joint_matrix(&h).map_err(|e| e.to_string())?;
    ensure!(j.cells[0] == [ratio(8, 25), ratio(2, 25), ratio(1, 25), ratio(2, 75)], "poor {:?}", j.cells[0]);
    ensure!(j.cells[1] == [ratio(1, 5), ratio(1, 15), ratio(19, 75), ratio(1, 75)], "rich {:?}", j.cells[1]);
    let p = prior_of(&h).map_err(|e| e.to_string())?;
    ensure!(p.get("poor") == ratio(7, 15) && p.get("rich") == ratio(8, 15), "prior {p:?}");
    let r = analyze(&h).map_err(|e| e.to_string())?.report;
    ensure!(r.multiplicative == ratio(51, 40), "L* {}", r.multiplicative);
    ensure!(r.additive == ratio(11, 75), "L+ {}", r.additive);
    let branching = conditional(&j, "poor", "cheap.sell");
    ensure!(branching == Some(ratio(24, 35)), "P(cheap.sell|poor) {branching:?}");
    let u = joint_matrix(&ihs("ebay_uniform.ihs")).map_err(|e| e.to_string())?;
    let uniform = conditional(&u, "poor", "cheap.sell");
    ensure!(uniform == Some(ratio(8, 15)), "uniform P(cheap.sell|poor) {uniform:?}");
    Ok(())
}

fn c4_intro_counterexamples() -> Check {
    let m = chain("intro.mc");
    let psi = qleak::prop::Prop::atom("psi");
    let run = |bound: Prob| match torrent_counterexample(&m, &psi, &bound, false) {
        Ok(Outcome::Violated(c)) => Ok(c.witnesses.iter().map(|w| (w.rail.clone(), w.mass.clone())).collect::<Vec<_>>()),
        Ok(Outcome::Holds { .. }) => Err(format!("P<={bound} reported as holding")),
        Err(e) => Err(e.to_string()),
    };
    let half = run(ratio(1, 2))?;
    ensure!(half == [(vec![0, 2, 4], ratio(3, 5))], "P<=0.5 witnesses {half:?}");
    let most = run(ratio(9, 10))?;
    ensure!(most == [(vec![0, 2, 4], ratio(3, 5)), (vec![0, 1, 3], ratio(2, 5))], "P<=0.9 witnesses {most:?}");

    let mut rng = ChaCha8Rng::seed_from_u64(0xc4);
    let mut checked = 0;
    while checked < 100 {
        let m = random_mc(&mut rng, 8);
        let goal = random_prop(&mut rng);
        let ab = make_absorbing(&m, &goal);
        let acyc = reduce_mc_acyclic(&ab.model);
        let rails: Vec<_> = rails_by_probability(&acyc, &ab.goal).collect();
        let total = rails.iter().fold(Prob::zero(), |a, r| a + &r.mass);
        if total.is_zero() {
            continue;
        }
        checked += 1;
        let bound = &total * ratio(3, 4);
        let Ok(Outcome::Violated(c)) = torrent_counterexample(&m, &goal, &bound, false) else {
            return Err(format!("no counterexample for reach {total} against {bound}"));
        };
        ensure!(c.witnesses.len() <= rails.len(), "more witnesses than rails");
        ensure!(c.total_mass > bound, "total {} within {bound}", c.total_mass);
        for w in c.witnesses.windows(2) {
            ensure!(w[0].mass >= w[1].mass, "witness masses out of order");
        }
        for (i, w) in c.witnesses.iter().enumerate() {
            for (k, v) in c.witnesses.iter().enumerate() {
                ensure!(is_generator(&w.representant, &v.rail, &acyc) == (i == k), "torrents {i} and {k} overlap");
            }
        }
    }
    Ok(())
}

fn c5_cpctl_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xc5);
    for i in 0..CPCTL_INSTANCES {
        let m = random_mdp(&mut rng, 6, 3);
        let phi = random_path(&mut rng);
        let psi = random_path(&mut rng);
        let f = StateFormula::Cp { cmp: Cmp::Le, bound: ratio(1, 2), phi: phi.clone(), psi: psi.clone() };
        let got = check_cpctl(&m, &f).map_err(|e| e.to_string())?.value.unwrap_or_default();
        let want = oracle_cp_max(&m, &phi, &psi);
        ensure!(got == want, "instance {i}: CP+[{phi} | {psi}] = {got}, enumeration gives {want}");
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < CPCTL_RUNTIME, "took {elapsed:?}");
    Ok(())
}

fn random_delta<R: Rng>(rng: &mut R) -> DeltaExpr {
    let n = rng.gen_range(1..7);
    DeltaExpr::raw((0..n).map(|_| {
        let den = rng.gen_range(1..=12);
        let q = rng.gen_range(0..=den);
        let p = rng.gen_range(0..=q);
        (ratio(p, den), ratio(q, den))
    }))
}

fn random_scalar<R: Rng>(rng: &mut R) -> Prob {
    let d = rng.gen_range(1..=9);
    ratio(rng.gen_range(0..=d), d)
}

fn c6_delta_algebra() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc6);
    for i in 0..DELTA_INSTANCES {
        let a = random_delta(&mut rng);
        let b = random_delta(&mut rng);
        let na = a.normalized();
        let nb = b.normalized();
        ensure!(delta_rmax(&a) == delta_rmax(&na), "instance {i}: normalization moved the best ratio");
        let (c, d) = (random_scalar(&mut rng), random_scalar(&mut rng));
        let lhs = delta_add(&delta_scale(&c, &a), &delta_scale(&d, &b));
        let rhs = delta_add(&delta_scale(&c, &na), &delta_scale(&d, &nb));
        ensure!(delta_rmax(&lhs) == delta_rmax(&rhs), "instance {i}: sum does not commute");
        ensure!(delta_rmax(&a.or(&b)) == delta_rmax(&na.or(&nb)), "instance {i}: disjunction does not commute");
        // random rewrite sequence against a fixed context
        let (mut raw_e, mut norm_e) = (a.clone(), na.clone());
        for _ in 0..rng.gen_range(1..4) {
            let s = random_scalar(&mut rng);
            let ctx = random_delta(&mut rng);
            raw_e = DeltaExpr::raw(delta_add(&delta_scale(&s, &raw_e), &ctx).pairs().to_vec());
            norm_e = delta_add(&delta_scale(&s, &norm_e), &ctx).normalized();
            ensure!(delta_rmax(&raw_e) == delta_rmax(&norm_e), "instance {i}: rewrite changed the best ratio");
        }
    }
    Ok(())
}

fn c7_reductions() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc7);
    for i in 0..REDUCTION_INSTANCES {
        let m = random_mc(&mut rng, 8);
        let goal = random_prop(&mut rng);
        let exact = reach_prob_mc(&m, m.init, &m.sat(&goal));
        let ab = make_absorbing(&m, &goal);
        let acyc = reduce_mc_acyclic(&ab.model);
        let goal_red: Vec<bool> = acyc.origin.iter().map(|&s| ab.goal[s]).collect();
        let reduced = reach_prob_mc(&acyc.model, acyc.model.init, &goal_red);
        ensure!(reduced == exact, "instance {i}: reduced reach {reduced}, original {exact}");
        let total = rails_by_probability(&acyc, &ab.goal).fold(Prob::zero(), |a, r| a + r.mass);
        ensure!(total == exact, "instance {i}: torrents sum to {total}, reach {exact}");
    }
    Ok(())
}

fn c8_partial_certificates() -> Check {
    let h = ihs("crowds.ihs");
    let exact = ratio(83, 80);
    let scc = partial_leakage(&h, Strategy::SccGroups, &StopWhen { epsilon: Some(Prob::zero()), budget: None })
        .map_err(|e| e.to_string())?;
    let last = scc.history.last().ok_or("empty history")?;
    ensure!(last.k == 6 && last.width().is_zero(), "sccGroups reached width {} after {} groups", last.width(), last.k);
    ensure!(scc.history.iter().filter(|c| c.width().is_zero()).count() == 1, "width reached 0 before 6 groups");
    let paths = partial_leakage(&h, Strategy::Paths, &StopWhen { epsilon: None, budget: Some(200) })
        .map_err(|e| e.to_string())?;
    for w in paths.history.windows(2) {
        ensure!(w[0].lower <= w[1].lower, "leakLower decreased at k={}", w[1].k);
    }
    for c in &paths.history {
        ensure!(c.lower <= exact && exact <= c.upper, "k={}: [{}, {}] misses {exact}", c.k, c.lower, c.upper);
    }
    Ok(())
}

fn c9_cpctl_counterexample() -> Check {
    let m = chain("sixsevenths.mc");
    let StateFormula::Cp { phi, psi, bound, .. } = parse_formula("CP<=3/4 [ F B | G P ]").map_err(|e| e.to_string())? else {
        return Err("not a conditional formula".into());
    };
    let Ok(Outcome::Violated(c)) = cpctl_counterexample(&m, &phi, &psi, &bound, false) else {
        return Err("fixture not violated".into());
    };
    ensure!(c.ratio == ratio(6, 7), "ratio {}", c.ratio);
    ensure!(c.mass1 == ratio(3, 4) && c.mass2 == ratio(1, 8), "masses {} and {}", c.mass1, c.mass2);

    let mut rng = ChaCha8Rng::seed_from_u64(0xc9);
    let mut checked = 0;
    while checked < SOUNDNESS_INSTANCES {
        let m = random_mc(&mut rng, 6);
        let phi: PathFormula = random_path(&mut rng);
        let psi = random_path(&mut rng);
        let value = cp_max(&m, &phi, &psi).map_err(|e| e.to_string())?;
        if value.is_zero() {
            continue;
        }
        checked += 1;
        let a = &value * ratio(2, 3);
        match cpctl_counterexample(&m, &phi, &psi, &a, false) {
            Ok(Outcome::Violated(c)) => {
                ensure!(c.ratio > a && c.ratio <= value, "ratio {} outside ({a}, {value}]", c.ratio)
            }
            Ok(Outcome::Holds { .. }) => return Err(format!("CP {value} above {a} reported as holding")),
            Err(e) => return Err(e.to_string()),
        }
    }
    Ok(())
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("crowds joint matrix", c1_crowds_joint),
        ("crowds channel and regex terms", c2_crowds_channel_and_terms),
        ("ebay interactive system", c3_ebay),
        ("intro counterexamples and witness properties", c4_intro_counterexamples),
        ("conditional maximum against scheduler enumeration", c5_cpctl_oracle),
        ("delta expression algebra", c6_delta_algebra),
        ("reductions preserve reachability", c7_reductions),
        ("partial leakage certificates", c8_partial_certificates),
        ("conditional counterexamples", c9_cpctl_counterexample),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(()) => println!("PASS {} {name} ({secs:.2}s)", i + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL {} {name} ({secs:.2}s): {e}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
