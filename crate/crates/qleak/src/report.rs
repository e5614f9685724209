//! Report trees and their text, JSON and CSV renderings. Rationals are
//! always emitted exactly as `num/den`; the text format adds a decimal
//! approximation.

use crate::diagnostics::{CpctlCounterexample, ObservableSource, PartialLeakage, PathGroup, TorrentCounterexample};
use crate::ihs::Prior;
use crate::leakage::{fmt_trace, LeakageReport, TraceMatrix};
use crate::model::{MarkovModel, Violation};
use crate::rails::TorrentSummary;
use crate::rational::{fmt_decimal, fmt_rational, Prob};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Rational(Prob),
    Text(String),
    Bool(bool),
    Int(usize),
    List(Vec<Field>),
    Record(Vec<(String, Field)>),
    Matrix(TraceMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub query: String,
    pub result: Vec<(String, Field)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "text" => Ok(Format::Text),
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format `{other}` (text, json, csv)")),
        }
    }
}

fn rec(fields: Vec<(&str, Field)>) -> Field {
    Field::Record(fields.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

fn rat(p: &Prob) -> Field {
    Field::Rational(p.clone())
}

fn text(s: impl Into<String>) -> Field {
    Field::Text(s.into())
}

pub fn emit_report(r: &Report, format: Format) -> String {
    match format {
        Format::Json => emit_json(r),
        Format::Text => emit_text(r),
        Format::Csv => emit_csv(r),
    }
}

// ---------------------------------------------------------------------------
// json

pub fn field_json(f: &Field) -> Value {
    match f {
        Field::Rational(p) => Value::String(fmt_rational(p)),
        Field::Text(s) => Value::String(s.clone()),
        Field::Bool(b) => Value::Bool(*b),
        Field::Int(n) => Value::from(*n),
        Field::List(v) => Value::Array(v.iter().map(field_json).collect()),
        Field::Record(kv) => Value::Object(kv.iter().map(|(k, v)| (k.clone(), field_json(v))).collect()),
        Field::Matrix(m) => {
            let mut o = Map::new();
            o.insert("secrets".into(), m.secrets.iter().map(|s| Value::String(fmt_trace(s))).collect());
            o.insert("observables".into(), m.observables.iter().map(|s| Value::String(fmt_trace(s))).collect());
            o.insert(
                "cells".into(),
                m.cells
                    .iter()
                    .map(|row| row.iter().map(|p| Value::String(fmt_rational(p))).collect::<Value>())
                    .collect(),
            );
            Value::Object(o)
        }
    }
}

fn emit_json(r: &Report) -> String {
    let mut o = Map::new();
    o.insert("query".into(), Value::String(r.query.clone()));
    o.insert("result".into(), field_json(&Field::Record(r.result.clone())));
    let mut s = serde_json::to_string_pretty(&Value::Object(o)).expect("serializable");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// text

fn scalar_text(f: &Field) -> Option<String> {
    match f {
        Field::Rational(p) => {
            let d = fmt_decimal(p);
            let e = fmt_rational(p);
            Some(if d == e { e } else { format!("{e} (~{d})") })
        }
        Field::Text(s) => Some(s.clone()),
        Field::Bool(b) => Some(b.to_string()),
        Field::Int(n) => Some(n.to_string()),
        Field::List(v) if v.is_empty() => Some("[]".into()),
        _ => None,
    }
}

fn text_into(out: &mut String, key: &str, f: &Field, indent: usize) {
    let pad = "  ".repeat(indent);
    if let Some(s) = scalar_text(f) {
        out.push_str(&format!("{pad}{key}: {s}\n"));
        return;
    }
    out.push_str(&format!("{pad}{key}:\n"));
    match f {
        Field::List(v) => {
            for (i, x) in v.iter().enumerate() {
                text_into(out, &format!("[{}]", i + 1), x, indent + 1);
            }
        }
        Field::Record(kv) => {
            for (k, v) in kv {
                text_into(out, k, v, indent + 1);
            }
        }
        Field::Matrix(m) => {
            for line in matrix_table(m) {
                out.push_str(&format!("{pad}  {line}\n"));
            }
        }
        _ => unreachable!(),
    }
}

fn matrix_table(m: &TraceMatrix) -> Vec<String> {
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut head = vec![String::new()];
    head.extend(m.observables.iter().map(|o| fmt_trace(o)));
    rows.push(head);
    for (s, cells) in m.secrets.iter().zip(&m.cells) {
        let mut row = vec![fmt_trace(s)];
        row.extend(cells.iter().map(fmt_rational));
        rows.push(row);
    }
    let cols = rows[0].len();
    let widths: Vec<usize> =
        (0..cols).map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
    rows.iter()
        .map(|r| {
            r.iter()
                .zip(&widths)
                .map(|(x, w)| format!("{x:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        })
        .collect()
}

fn emit_text(r: &Report) -> String {
    let mut out = format!("query: {}\n", r.query);
    for (k, v) in &r.result {
        text_into(&mut out, k, v, 0);
    }
    out
}

// ---------------------------------------------------------------------------
// csv

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn find_matrix(fields: &[(String, Field)]) -> Option<&TraceMatrix> {
    fields.iter().find_map(|(_, f)| match f {
        Field::Matrix(m) => Some(m),
        Field::Record(kv) => find_matrix(kv),
        _ => None,
    })
}

fn flatten(prefix: &str, f: &Field, out: &mut Vec<(String, String)>) {
    match f {
        Field::Rational(p) => out.push((prefix.into(), fmt_rational(p))),
        Field::Text(s) => out.push((prefix.into(), s.clone())),
        Field::Bool(b) => out.push((prefix.into(), b.to_string())),
        Field::Int(n) => out.push((prefix.into(), n.to_string())),
        Field::List(v) if v.is_empty() => out.push((prefix.into(), "[]".into())),
        Field::List(v) => {
            for (i, x) in v.iter().enumerate() {
                flatten(&format!("{prefix}.{}", i + 1), x, out);
            }
        }
        Field::Record(kv) => {
            for (k, v) in kv {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        Field::Matrix(m) => {
            for (s, row) in m.secrets.iter().zip(&m.cells) {
                for (o, p) in m.observables.iter().zip(row) {
                    out.push((format!("{prefix}.{}.{}", fmt_trace(s), fmt_trace(o)), fmt_rational(p)));
                }
            }
        }
    }
}

/// A report holding a matrix renders as that matrix, one row per secret;
/// any other report renders as `key,value` lines.
fn emit_csv(r: &Report) -> String {
    let mut out = String::new();
    if let Some(m) = find_matrix(&r.result) {
        let mut head = vec!["secret".to_string()];
        head.extend(m.observables.iter().map(|o| csv_cell(&fmt_trace(o))));
        out.push_str(&head.join(","));
        out.push('\n');
        for (s, row) in m.secrets.iter().zip(&m.cells) {
            let mut line = vec![csv_cell(&fmt_trace(s))];
            line.extend(row.iter().map(fmt_rational));
            out.push_str(&line.join(","));
            out.push('\n');
        }
        return out;
    }
    let mut flat = Vec::new();
    flatten("", &Field::Record(r.result.clone()), &mut flat);
    out.push_str("key,value\n");
    for (k, v) in flat {
        out.push_str(&format!("{},{}\n", csv_cell(&k), csv_cell(&v)));
    }
    out
}

// ---------------------------------------------------------------------------
// builders

pub fn prior_field(p: &Prior) -> Field {
    Field::Record(p.entries.iter().map(|(s, v)| (s.clone(), rat(v))).collect())
}

pub fn leakage_fields(r: &LeakageReport) -> Vec<(String, Field)> {
    vec![
        ("prior_vulnerability".into(), rat(&r.prior_vuln)),
        ("posterior_vulnerability".into(), rat(&r.post_vuln)),
        ("multiplicative_leakage".into(), rat(&r.multiplicative)),
        ("additive_leakage".into(), rat(&r.additive)),
    ]
}

pub fn violations_field(v: &[Violation]) -> Field {
    Field::List(v.iter().map(|x| rec(vec![("location", text(&x.location)), ("message", text(&x.message))])).collect())
}

fn names(m: &MarkovModel, path: &[usize]) -> Field {
    text(path.iter().map(|&s| m.states[s].as_str()).collect::<Vec<_>>().join(" "))
}

pub fn torrent_field(m: &MarkovModel, t: &TorrentSummary) -> Field {
    let mut fields = vec![
        ("rail", names(m, &t.rail)),
        ("mass", rat(&t.mass)),
        ("representant", names(m, &t.representant)),
        ("representant_mass", rat(&t.representant_mass)),
    ];
    if !t.expansions.is_empty() {
        let exps = t
            .expansions
            .iter()
            .map(|e| {
                let reach = e
                    .interface
                    .reach
                    .iter()
                    .map(|((i, o), p)| {
                        rec(vec![("input", text(&m.states[*i])), ("output", text(&m.states[*o])), ("prob", rat(p))])
                    })
                    .collect();
                rec(vec![
                    ("component", names(m, &e.states)),
                    ("input", text(&m.states[e.input])),
                    ("output", text(&m.states[e.output])),
                    ("exit_prob", rat(&e.exit_prob)),
                    ("segment_mass", rat(&e.segment_mass)),
                    ("reach", Field::List(reach)),
                ])
            })
            .collect();
        fields.push(("scc_expansions", Field::List(exps)));
    }
    rec(fields)
}

pub fn torrent_fields(c: &TorrentCounterexample) -> Vec<(String, Field)> {
    vec![
        ("verdict".into(), text("violated")),
        ("property".into(), text(&c.property)),
        ("bound".into(), rat(&c.bound)),
        ("total_mass".into(), rat(&c.total_mass)),
        ("witnesses".into(), Field::List(c.witnesses.iter().map(|t| torrent_field(&c.chain, t)).collect())),
    ]
}

pub fn cpctl_fields(c: &CpctlCounterexample) -> Vec<(String, Field)> {
    let side = |xs: &[(TorrentSummary, Prob)]| {
        Field::List(
            xs.iter()
                .map(|(t, w)| {
                    let mut f = torrent_field(&c.product, t);
                    if let Field::Record(kv) = &mut f {
                        kv.push(("weight".into(), rat(w)));
                    }
                    f
                })
                .collect(),
        )
    };
    let sched = c
        .unfolding
        .origin
        .iter()
        .zip(&c.unfolding.choice)
        .enumerate()
        .map(|(i, (_, ch))| {
            rec(vec![("state", text(&c.unfolding.model.states[i])), ("choice", Field::Int(*ch))])
        })
        .collect();
    vec![
        ("verdict".into(), text("violated")),
        ("value".into(), rat(&c.value)),
        ("ratio".into(), rat(&c.ratio)),
        ("delta1_mass".into(), rat(&c.mass1)),
        ("delta2_mass".into(), rat(&c.mass2)),
        ("delta1".into(), side(&c.delta1)),
        ("delta2".into(), side(&c.delta2)),
        ("scheduler".into(), Field::List(sched)),
    ]
}

pub fn group_field(g: &PathGroup) -> Field {
    rec(vec![
        ("secret", text(fmt_trace(&g.secret))),
        ("observable", text(fmt_trace(&g.observable))),
        ("mass", rat(&g.mass)),
        ("path", text(g.display_path())),
    ])
}

pub fn partial_fields(p: &PartialLeakage) -> Vec<(String, Field)> {
    vec![
        ("leak_lower".into(), rat(&p.leak_lower)),
        ("leak_upper".into(), rat(&p.leak_upper)),
        ("width".into(), rat(&(&p.leak_upper - &p.leak_lower))),
        ("groups_added".into(), Field::Int(p.groups.len())),
        (
            "row_mass".into(),
            Field::Record(p.row_mass.iter().map(|(s, m)| (fmt_trace(s), rat(m))).collect()),
        ),
        ("partial_joint".into(), Field::Matrix(p.partial_joint.clone())),
        ("warnings".into(), Field::List(p.warnings.iter().map(text).collect())),
    ]
}

pub fn sources_fields(s: &[ObservableSource]) -> Vec<(String, Field)> {
    let items = s
        .iter()
        .map(|o| {
            let mut f = vec![
                ("observable", text(fmt_trace(&o.observable))),
                ("argmax", Field::List(o.argmax.iter().map(|s| text(fmt_trace(s))).collect())),
                ("joint", rat(&o.joint)),
                ("no_dominant_secret", Field::Bool(o.no_dominant_secret())),
                ("witnesses", Field::List(o.witnesses.iter().map(group_field).collect())),
            ];
            if let Some(h) = &o.hint {
                f.push((
                    "hint",
                    rec(vec![
                        ("from", text(&h.from)),
                        ("action", text(&h.action)),
                        ("to", text(&h.to)),
                        ("prob", rat(&h.prob)),
                    ]),
                ));
            }
            rec(f)
        })
        .collect();
    vec![("sources".into(), Field::List(items))]
}
