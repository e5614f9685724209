mod common;

use common::{random_ihs, random_mc, random_path, random_prop};
use num::{One, Zero};
use qleak::cpctl::{cp_max, mc_conjunction_prob};
use qleak::diagnostics::{
    cpctl_counterexample, partial_leakage, torrent_counterexample, Outcome, StopWhen, Strategy,
};
use qleak::formula::PathFormula;
use qleak::graph::{make_absorbing, reduce_mc_acyclic};
use qleak::leakage::analyze;
use qleak::rails::{is_generator, rails_by_probability};
use qleak::rational::{ratio, Prob};
use qleak::reach::{opt_prob, Mode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn witness_properties_on_random_chains() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    for _ in 0..300 {
        let m = random_mc(&mut rng, 8);
        let psi = random_prop(&mut rng);
        let ab = make_absorbing(&m, &psi);
        let acyc = reduce_mc_acyclic(&ab.model);
        let rails: Vec<_> = rails_by_probability(&acyc, &ab.goal).collect();
        let total = rails.iter().fold(Prob::zero(), |a, r| a + &r.mass);
        if total.is_zero() {
            continue;
        }
        let bound = &total * ratio(2, 3);
        let Outcome::Violated(c) = torrent_counterexample(&m, &psi, &bound, false).unwrap() else {
            panic!("mass {total} exceeds {bound}")
        };
        checked += 1;
        // finiteness and minimality among prefixes
        assert!(c.witnesses.len() <= rails.len());
        assert!(c.total_mass > bound);
        let before: Prob = c.witnesses[..c.witnesses.len() - 1].iter().fold(Prob::zero(), |a, w| a + &w.mass);
        assert!(before <= bound);
        // accuracy: non-increasing masses
        for w in c.witnesses.windows(2) {
            assert!(w[0].mass >= w[1].mass);
        }
        // significance: no omitted rail is heavier than a kept witness
        let lightest = &c.witnesses.last().unwrap().mass;
        for r in &rails[c.witnesses.len()..] {
            assert!(r.mass <= *lightest);
        }
        // originality: representants belong only to their own torrent
        for (i, w) in c.witnesses.iter().enumerate() {
            for (j, v) in c.witnesses.iter().enumerate() {
                assert_eq!(is_generator(&w.representant, &v.rail, &acyc), i == j);
            }
        }
    }
    assert!(checked >= 100, "only {checked} instances had reachable goals");
}

#[test]
fn conditional_counterexamples_are_sound() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    for _ in 0..300 {
        let m = random_mc(&mut rng, 6);
        let phi = random_path(&mut rng);
        let psi = random_path(&mut rng);
        let value = cp_max(&m, &phi, &psi).unwrap();
        if value.is_zero() {
            assert!(!cpctl_counterexample(&m, &phi, &psi, &Prob::zero(), false).unwrap().is_violated());
            continue;
        }
        let a = &value * ratio(1, 2);
        let Outcome::Violated(c) = cpctl_counterexample(&m, &phi, &psi, &a, false).unwrap() else {
            panic!("CP {value} exceeds {a}")
        };
        checked += 1;
        assert_eq!(c.value, value);
        assert!(c.ratio > a);
        assert!(c.ratio <= value, "ratio {} above CP {}", c.ratio, value);
        assert!(c.mass1 <= mc_conjunction_prob(&m, &phi, &psi));
        let not_psi = Prob::one() - opt_prob(&m, &psi, Mode::Max);
        assert!(c.mass2 <= not_psi);
        assert!(!cpctl_counterexample(&m, &phi, &psi, &Prob::one(), false).unwrap().is_violated());
    }
    assert!(checked >= 50, "only {checked} instances");
}

#[test]
fn strict_bound_on_certain_event() {
    let m = match qleak::text::parse_model(include_str!("../fixtures/intro.mc")).unwrap() {
        qleak::text::ParsedModel::Markov(m) => m,
        _ => unreachable!(),
    };
    let psi = qleak::prop::Prop::atom("psi");
    assert!(!torrent_counterexample(&m, &psi, &Prob::one(), false).unwrap().is_violated());
    // P<1 fails on a certain event; both witnesses are needed
    let Outcome::Violated(c) = torrent_counterexample(&m, &psi, &Prob::one(), true).unwrap() else { panic!() };
    assert_eq!(c.witnesses.len(), 2);
    let _ = PathFormula::eventually(psi);
}

#[test]
fn partial_certificates_on_random_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..60 {
        let h = random_ihs(&mut rng);
        let exact = analyze(&h).unwrap().report.multiplicative;
        for strategy in [Strategy::Paths, Strategy::RegexTerms, Strategy::SccGroups] {
            let stop = StopWhen { epsilon: None, budget: Some(25) };
            let r = partial_leakage(&h, strategy, &stop).unwrap();
            for w in r.history.windows(2) {
                assert!(w[0].lower <= w[1].lower);
                assert!(w[1].width() <= w[0].width());
            }
            for c in &r.history {
                assert!(c.lower <= exact && exact <= c.upper, "{strategy:?}: {} <= {exact} <= {}", c.lower, c.upper);
            }
            if strategy != Strategy::Paths && r.groups.len() < 25 {
                assert_eq!(r.leak_lower, exact);
                assert!(r.history.last().unwrap().width().is_zero());
            }
        }
    }
}

#[test]
fn epsilon_stops_early() {
    let h = match qleak::text::parse_model(include_str!("../fixtures/crowds.ihs")).unwrap() {
        qleak::text::ParsedModel::Ihs(h) => h,
        _ => unreachable!(),
    };
    let stop = StopWhen { epsilon: Some(ratio(1, 10)), budget: None };
    let r = partial_leakage(&h, Strategy::Paths, &stop).unwrap();
    assert!(r.history.last().unwrap().width() <= ratio(1, 10));
    assert!(r.history[r.history.len() - 2].width() > ratio(1, 10));
    let none = StopWhen::default();
    assert!(partial_leakage(&h, Strategy::Paths, &none).is_err());
}
