use qleak::ihs::{prior_of, validate_ihs, Ihs};
use qleak::leakage::{analyze, channel_matrix, conditional, fmt_trace, instantiate_prior, joint_matrix, max_leakage, MaxMode};
use qleak::rational::ratio;
use qleak::text::{parse_model, ParsedModel};
use qleak::ihs::Prior;

fn load(name: &str) -> Ihs {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    match parse_model(&std::fs::read_to_string(path).unwrap()).unwrap() {
        ParsedModel::Ihs(h) => h,
        _ => panic!("not an ihs"),
    }
}

#[test]
fn crowds_joint_and_channel() {
    let h = load("crowds.ihs");
    assert!(validate_ihs(&h).is_empty());
    let j = joint_matrix(&h).unwrap();
    let cols: Vec<String> = j.observables.iter().map(|o| fmt_trace(o)).collect();
    assert_eq!(cols, ["A", "B", "U"]);
    assert_eq!(j.cells[0], vec![ratio(7, 40), ratio(3, 40), ratio(1, 12)]);
    assert_eq!(j.cells[1], vec![ratio(3, 20), ratio(7, 20), ratio(1, 6)]);
    assert_eq!(j.total(), ratio(1, 1));
    let c = channel_matrix(&h).unwrap();
    assert_eq!(c.cells[0], vec![ratio(21, 40), ratio(9, 40), ratio(1, 4)]);
    assert_eq!(c.cells[1], vec![ratio(9, 40), ratio(21, 40), ratio(1, 4)]);
    let d = analyze(&h).unwrap();
    assert_eq!(d.report.post_vuln, ratio(83, 120));
    assert_eq!(d.report.multiplicative, ratio(83, 80));
    assert_eq!(d.report.additive, ratio(1, 40));
}

#[test]
fn crowds_variable_prior() {
    let v = load("crowds_variable.ihs");
    assert!(validate_ihs(&v).is_empty());
    let p = Prior { entries: vec![("a".into(), ratio(1, 3)), ("b".into(), ratio(2, 3))] };
    let fixed = instantiate_prior(&v, &p).unwrap();
    let crowds = load("crowds.ihs");
    assert_eq!(fixed.trans, crowds.trans);
    let m = max_leakage(&v, MaxMode::Mult).unwrap();
    assert_eq!(m.value, ratio(13, 10));
    let u = instantiate_prior(&v, &Prior::uniform(&v.secrets)).unwrap();
    assert_eq!(analyze(&u).unwrap().report.multiplicative, m.value);
}

#[test]
fn ebay_interactive() {
    let h = load("ebay.ihs");
    assert!(validate_ihs(&h).is_empty());
    let j = joint_matrix(&h).unwrap();
    let cols: Vec<String> = j.observables.iter().map(|o| fmt_trace(o)).collect();
    assert_eq!(cols, ["cheap.sell", "cheap.cancel", "expensive.sell", "expensive.cancel"]);
    assert_eq!(j.cells[0], vec![ratio(8, 25), ratio(2, 25), ratio(1, 25), ratio(2, 75)]);
    assert_eq!(j.cells[1], vec![ratio(1, 5), ratio(1, 15), ratio(19, 75), ratio(1, 75)]);
    let p = prior_of(&h).unwrap();
    assert_eq!(p.get("poor"), ratio(7, 15));
    assert_eq!(p.get("rich"), ratio(8, 15));
    let d = analyze(&h).unwrap();
    assert_eq!(d.report.multiplicative, ratio(51, 40));
    assert_eq!(d.report.additive, ratio(11, 75));
    assert_eq!(conditional(&j, "poor", "cheap.sell"), Some(ratio(24, 35)));
    let u = joint_matrix(&load("ebay_uniform.ihs")).unwrap();
    assert_eq!(conditional(&u, "poor", "cheap.sell"), Some(ratio(8, 15)));
}
