//! Line-based text format for Markov chains, decision processes and
//! information-hiding systems.
//!
//! ```text
//! model mc|mdp|ihs
//! state <id> [<prop>...]
//! init <id>
//! row <src> : <p> <dst> [, <p> <dst>]...               # mc
//! choice <src> [<label>] : <p> <dst> [, <p> <dst>]...  # mdp
//! act <src> : <p> <action> <dst> [, ...]                 # ihs
//! secret <a>...
//! observable <a>...
//! variable-prior
//! interactive
//! ```
//!
//! `#` starts a comment. Probabilities are `num/den` or decimals. States
//! of an mc/mdp without outgoing transitions get a self-loop; ihs states
//! without `act` lines are terminal.

use crate::error::ParseError;
use crate::ihs::{validate_ihs, ActEntry, Ihs};
use crate::model::{validate_model, Choice, Distribution, MarkovModel, ModelKind, Violation};
use crate::rational::{fmt_rational, parse_rational, Prob};
use crate::{Error, Result};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedModel {
    Markov(MarkovModel),
    Ihs(Ihs),
}

impl ParsedModel {
    pub fn violations(&self) -> Vec<Violation> {
        match self {
            ParsedModel::Markov(m) => validate_model(m),
            ParsedModel::Ihs(h) => validate_ihs(h),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Tok {
    text: String,
    col: usize,
}

fn tokenize(line: &str) -> Vec<Tok> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut start = 0;
    let body = line.split('#').next().unwrap_or("");
    for (i, ch) in body.chars().enumerate() {
        let col = i + 1;
        if ch.is_whitespace() || ch == ',' || ch == ':' {
            if !cur.is_empty() {
                out.push(Tok { text: std::mem::take(&mut cur), col: start });
            }
            if ch != ' ' && !ch.is_whitespace() {
                out.push(Tok { text: ch.to_string(), col });
            }
        } else {
            if cur.is_empty() {
                start = col;
            }
            cur.push(ch);
        }
    }
    if !cur.is_empty() {
        out.push(Tok { text: cur, col: start });
    }
    out
}

struct Line {
    no: usize,
    toks: Vec<Tok>,
    end: usize,
}

impl Line {
    fn err(&self, col: usize, msg: impl Into<String>) -> Error {
        Error::Parse(ParseError::new(self.no, col, msg))
    }

    fn at_end(&self, msg: impl Into<String>) -> Error {
        self.err(self.end, msg)
    }
}

/// A transition list after the colon: groups of `width` tokens separated
/// by commas.
fn groups<'a>(line: &'a Line, from: usize, width: usize) -> Result<Vec<&'a [Tok]>> {
    let mut out = Vec::new();
    let mut i = from;
    loop {
        if i + width > line.toks.len() || line.toks[i..i + width].iter().any(|t| t.text == ",") {
            return Err(line.at_end(format!("expected {width} fields per transition")));
        }
        out.push(&line.toks[i..i + width]);
        i += width;
        if i == line.toks.len() {
            return Ok(out);
        }
        if line.toks[i].text != "," {
            return Err(line.err(line.toks[i].col, format!("expected `,`, found `{}`", line.toks[i].text)));
        }
        i += 1;
    }
}

fn prob(line: &Line, t: &Tok) -> Result<Prob> {
    parse_rational(&t.text).map_err(|e| line.err(t.col, e.0))
}

fn name_ok(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || "_-.'~[]".contains(c))
}

pub fn parse_model(text: &str) -> Result<ParsedModel> {
    let m = parse_model_unvalidated(text)?;
    let v = m.violations();
    if v.is_empty() {
        Ok(m)
    } else {
        Err(Error::InvalidModel(v))
    }
}

/// Syntax only; structural checks are left to the caller.
pub fn parse_model_unvalidated(text: &str) -> Result<ParsedModel> {
    let lines: Vec<Line> = text
        .lines()
        .enumerate()
        .map(|(i, l)| Line { no: i + 1, toks: tokenize(l), end: l.split('#').next().unwrap_or("").chars().count() + 1 })
        .filter(|l| !l.toks.is_empty())
        .collect();
    let first = lines.first().ok_or_else(|| Error::Parse(ParseError::new(1, 1, "empty model: expected `model mc|mdp|ihs`")))?;
    if first.toks[0].text != "model" {
        return Err(first.err(first.toks[0].col, "expected `model mc|mdp|ihs` header"));
    }
    let kind = match first.toks.get(1).map(|t| t.text.as_str()) {
        Some("mc") | Some("mdp") | Some("ihs") => first.toks[1].text.clone(),
        Some(other) => return Err(first.err(first.toks[1].col, format!("unknown model kind `{other}`"))),
        None => return Err(first.at_end("missing model kind")),
    };
    if first.toks.len() > 2 {
        return Err(first.err(first.toks[2].col, "unexpected token after model kind"));
    }
    let body = &lines[1..];
    // states first so transitions may refer forward
    let mut states: Vec<String> = Vec::new();
    let mut labels: Vec<BTreeSet<String>> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for l in body {
        if l.toks[0].text == "state" {
            let t = l.toks.get(1).ok_or_else(|| l.at_end("missing state name"))?;
            if !name_ok(&t.text) {
                return Err(l.err(t.col, format!("invalid state name `{}`", t.text)));
            }
            if index.contains_key(&t.text) {
                return Err(l.err(t.col, format!("duplicate state `{}`", t.text)));
            }
            let mut props = BTreeSet::new();
            for p in &l.toks[2..] {
                if !name_ok(&p.text) {
                    return Err(l.err(p.col, format!("invalid proposition `{}`", p.text)));
                }
                if kind == "ihs" {
                    return Err(l.err(p.col, "ihs states carry no propositions"));
                }
                props.insert(p.text.clone());
            }
            index.insert(t.text.clone(), states.len());
            states.push(t.text.clone());
            labels.push(props);
        }
    }
    let state_ref = |l: &Line, t: &Tok| -> Result<usize> {
        index.get(&t.text).copied().ok_or_else(|| l.err(t.col, format!("undeclared state `{}`", t.text)))
    };
    let mut init: Option<usize> = None;
    let mut secrets: Vec<String> = Vec::new();
    let mut observables: Vec<String> = Vec::new();
    let mut variable_prior = false;
    let mut interactive = false;
    let mut rows: Vec<Option<Distribution>> = vec![None; states.len()];
    let mut choices: Vec<Vec<Choice>> = vec![Vec::new(); states.len()];
    let mut acts: Vec<Vec<Vec<ActEntry>>> = vec![Vec::new(); states.len()];
    for l in body {
        let head = &l.toks[0];
        let allowed = match head.text.as_str() {
            "state" | "init" => true,
            "row" => kind == "mc",
            "choice" => kind == "mdp",
            "act" | "secret" | "observable" | "variable-prior" | "interactive" => kind == "ihs",
            "model" => return Err(l.err(head.col, "duplicate `model` header")),
            other => return Err(l.err(head.col, format!("unknown directive `{other}`"))),
        };
        if !allowed {
            return Err(l.err(head.col, format!("`{}` is not allowed in a {kind} model", head.text)));
        }
        match head.text.as_str() {
            "state" => {}
            "init" => {
                let t = l.toks.get(1).ok_or_else(|| l.at_end("missing initial state"))?;
                if l.toks.len() > 2 {
                    return Err(l.err(l.toks[2].col, "unexpected token after initial state"));
                }
                if init.is_some() {
                    return Err(l.err(head.col, "duplicate `init`"));
                }
                init = Some(state_ref(l, t)?);
            }
            "secret" | "observable" => {
                let target = if head.text == "secret" { &mut secrets } else { &mut observables };
                if l.toks.len() < 2 {
                    return Err(l.at_end("expected at least one action name"));
                }
                for t in &l.toks[1..] {
                    if !name_ok(&t.text) {
                        return Err(l.err(t.col, format!("invalid action name `{}`", t.text)));
                    }
                    if !target.contains(&t.text) {
                        target.push(t.text.clone());
                    }
                }
            }
            "variable-prior" | "interactive" => {
                if l.toks.len() > 1 {
                    return Err(l.err(l.toks[1].col, "flag takes no arguments"));
                }
                if head.text == "interactive" {
                    interactive = true;
                } else {
                    variable_prior = true;
                }
            }
            "row" | "choice" | "act" => {
                let src_tok = l.toks.get(1).ok_or_else(|| l.at_end("missing source state"))?;
                let src = state_ref(l, src_tok)?;
                let colon = l.toks.iter().position(|t| t.text == ":").ok_or_else(|| l.at_end("expected `:`"))?;
                let label = match head.text.as_str() {
                    "choice" if colon == 3 => Some(l.toks[2].text.clone()),
                    "choice" if colon == 2 => None,
                    _ if colon == 2 => None,
                    _ => return Err(l.err(l.toks[colon.min(l.toks.len() - 1)].col, "malformed transition header")),
                };
                if head.text == "act" {
                    let mut d = Vec::new();
                    for g in groups(l, colon + 1, 3)? {
                        if !name_ok(&g[1].text) {
                            return Err(l.err(g[1].col, format!("invalid action name `{}`", g[1].text)));
                        }
                        d.push(ActEntry { prob: prob(l, &g[0])?, action: g[1].text.clone(), target: state_ref(l, &g[2])? });
                    }
                    acts[src].push(d);
                } else {
                    let mut pairs = Vec::new();
                    for g in groups(l, colon + 1, 2)? {
                        pairs.push((state_ref(l, &g[1])?, prob(l, &g[0])?));
                    }
                    // keep zero entries visible to validation
                    let dist = Distribution { entries: accumulate(pairs) };
                    if head.text == "row" {
                        if rows[src].is_some() {
                            return Err(l.err(src_tok.col, format!("duplicate row for state `{}`", src_tok.text)));
                        }
                        rows[src] = Some(dist);
                    } else {
                        let label = label.unwrap_or_else(|| choices[src].len().to_string());
                        if choices[src].iter().any(|c| c.label == label) {
                            return Err(l.err(l.toks[2].col, format!("duplicate choice label `{label}`")));
                        }
                        choices[src].push(Choice { label, dist });
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    if states.is_empty() {
        return Err(first.at_end("model declares no states"));
    }
    let init = init.ok_or_else(|| Error::Parse(ParseError::new(lines.last().map_or(1, |l| l.no), 1, "missing `init`")))?;
    if kind == "ihs" {
        return Ok(ParsedModel::Ihs(Ihs { states, init, secrets, observables, trans: acts, variable_prior, interactive }));
    }
    let mk = if kind == "mc" { ModelKind::Mc } else { ModelKind::Mdp };
    let choices: Vec<Vec<Choice>> = (0..states.len())
        .map(|s| match mk {
            ModelKind::Mc => vec![Choice {
                label: "0".into(),
                dist: rows[s].take().unwrap_or_else(|| Distribution::dirac(s)),
            }],
            ModelKind::Mdp => {
                if choices[s].is_empty() {
                    vec![Choice { label: "0".into(), dist: Distribution::dirac(s) }]
                } else {
                    std::mem::take(&mut choices[s])
                }
            }
        })
        .collect();
    Ok(ParsedModel::Markov(MarkovModel { kind: mk, states, init, labels, choices }))
}

fn accumulate(pairs: Vec<(usize, Prob)>) -> BTreeMap<usize, Prob> {
    let mut m: BTreeMap<usize, Prob> = BTreeMap::new();
    for (t, p) in pairs {
        *m.entry(t).or_insert_with(|| Prob::from_integer(0.into())) += p;
    }
    m
}

pub fn emit_model(m: &ParsedModel) -> String {
    let mut out = String::new();
    match m {
        ParsedModel::Markov(m) => {
            let kind = if m.is_mc() { "mc" } else { "mdp" };
            let _ = writeln!(out, "model {kind}");
            for (s, name) in m.states.iter().enumerate() {
                let _ = write!(out, "state {name}");
                for p in &m.labels[s] {
                    let _ = write!(out, " {p}");
                }
                out.push('\n');
            }
            let _ = writeln!(out, "init {}", m.states[m.init]);
            for (s, cs) in m.choices.iter().enumerate() {
                for c in cs {
                    let body = c
                        .dist
                        .entries
                        .iter()
                        .map(|(t, p)| format!("{} {}", fmt_rational(p), m.states[*t]))
                        .collect::<Vec<_>>()
                        .join(", ");
                    if m.is_mc() {
                        let _ = writeln!(out, "row {} : {body}", m.states[s]);
                    } else {
                        let _ = writeln!(out, "choice {} {} : {body}", m.states[s], c.label);
                    }
                }
            }
        }
        ParsedModel::Ihs(h) => {
            let _ = writeln!(out, "model ihs");
            if h.interactive {
                let _ = writeln!(out, "interactive");
            }
            if h.variable_prior {
                let _ = writeln!(out, "variable-prior");
            }
            if !h.secrets.is_empty() {
                let _ = writeln!(out, "secret {}", h.secrets.join(" "));
            }
            if !h.observables.is_empty() {
                let _ = writeln!(out, "observable {}", h.observables.join(" "));
            }
            for name in &h.states {
                let _ = writeln!(out, "state {name}");
            }
            let _ = writeln!(out, "init {}", h.states[h.init]);
            for (q, ds) in h.trans.iter().enumerate() {
                for d in ds {
                    let body = d
                        .iter()
                        .map(|e| format!("{} {} {}", fmt_rational(&e.prob), e.action, h.states[e.target]))
                        .collect::<Vec<_>>()
                        .join(", ");
                    let _ = writeln!(out, "act {} : {body}", h.states[q]);
                }
            }
        }
    }
    out
}

/// Reads and parses a model file.
pub fn load_model(path: &std::path::Path) -> Result<ParsedModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(ParseError::new(0, 0, format!("cannot read {}: {e}", path.display()))))?;
    parse_model(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    const INTRO: &str = "\
model mc
# two ways to reach psi
state s0
state s1
state s2
state s3 psi
state s4 psi
init s0
row s0 : 0.4 s1, 0.6 s2
row s1 : 0.5 s1, 0.5 s3
row s2 : 0.99 s2, 0.01 s4
";

    #[test]
    fn parses_chain_with_implicit_loops() {
        let ParsedModel::Markov(m) = parse_model(INTRO).unwrap() else { panic!() };
        assert_eq!(m.len(), 5);
        assert_eq!(m.row(0).prob(2), ratio(3, 5));
        assert!(m.row(3).is_dirac_on(3));
        assert!(m.labels[4].contains("psi"));
    }

    #[test]
    fn round_trip() {
        let a = parse_model(INTRO).unwrap();
        let b = parse_model(&emit_model(&a)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mdp_default_labels() {
        let t = "model mdp\nstate x\nstate y goal\ninit x\nchoice x : 1 y\nchoice x : 1/2 x, 1/2 y\n";
        let ParsedModel::Markov(m) = parse_model(t).unwrap() else { panic!() };
        assert_eq!(m.choices[0][1].label, "1");
        assert_eq!(m.choices[0].len(), 2);
    }

    #[test]
    fn errors_have_positions() {
        let e = parse_model("model mc\nstate a\ninit a\nrow a : 1 b\n").unwrap_err();
        match e {
            Error::Parse(p) => assert_eq!((p.line, p.column), (4, 11)),
            other => panic!("{other}"),
        }
        let e = parse_model("model mc\nstate a\ninit a\nrow a : x a\n").unwrap_err();
        assert!(matches!(e, Error::Parse(ParseError { line: 4, column: 9, .. })), "{e}");
    }

    #[test]
    fn non_stochastic_row_is_invalid_not_syntax() {
        let t = "model mc\nstate a\nstate b\ninit a\nrow a : 9/10 b\n";
        assert!(parse_model_unvalidated(t).is_ok());
        assert!(matches!(parse_model(t), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn ihs_round_trip() {
        let t = "model ihs\nvariable-prior\nsecret a b\nobservable o\nstate i\nstate p\nstate e\ninit i\n\
                 act i : 1 a p\nact i : 1 b p\nact p : 1 o e\n";
        let m = parse_model(t).unwrap();
        assert_eq!(parse_model(&emit_model(&m)).unwrap(), m);
    }
}
