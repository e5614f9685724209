//! The `qleak` command line. Exit codes: 0 success or property holds,
//! 1 property violated, 2 usage or parse error, 3 invalid model.

use crate::cpctl::{check_cpctl, cp_bounds};
use crate::diagnostics::{
    cpctl_counterexample, leakage_sources, partial_leakage, torrent_counterexample, Outcome, StopWhen, Strategy,
};
use crate::formula::{parse_formula, parse_prop, Cmp, PathFormula, StateFormula};
use crate::graph::absorb_states;
use crate::ihs::{Ihs, Prior};
use crate::leakage::{analyze, instantiate_prior, max_leakage, MaxMode};
use crate::model::MarkovModel;
use crate::prop::Prop;
use crate::rational::parse_rational;
use crate::report::*;
use crate::text::{load_model, parse_model_unvalidated, ParsedModel};
use crate::{Error, Prob};
use clap::{Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "qleak", version, about = "Exact conditional model checking, leakage analysis and counterexamples")]
struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Fmt::Text)]
    format: Fmt,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Fmt {
    Text,
    Json,
    Csv,
}

impl From<Fmt> for Format {
    fn from(f: Fmt) -> Format {
        match f {
            Fmt::Text => Format::Text,
            Fmt::Json => Format::Json,
            Fmt::Csv => Format::Csv,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MaxArg {
    Mult,
    Add,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a P or CP formula on a Markov chain or decision process.
    Check {
        model: PathBuf,
        #[arg(long)]
        formula: String,
        /// Only compute the cheap bounds on a conditional probability.
        #[arg(long)]
        bounds_only: bool,
    },
    /// Leakage of an information-hiding system.
    Leakage {
        model: PathBuf,
        /// A priori distribution, e.g. `a=1/3,b=2/3`.
        #[arg(long)]
        prior: Option<String>,
        /// Maximum leakage over all priors.
        #[arg(long, value_enum)]
        max: Option<MaxArg>,
        /// Approximate with a partial matrix: paths, regexTerms or sccGroups.
        #[arg(long)]
        approx: Option<String>,
        #[arg(long, requires = "approx")]
        epsilon: Option<String>,
        /// Largest number of path groups added.
        #[arg(long, requires = "approx")]
        budget: Option<usize>,
    },
    /// Channel matrix of an information-hiding system.
    Channel {
        model: PathBuf,
        #[arg(long, value_enum)]
        out: Option<Fmt>,
    },
    /// Torrent counterexample to `P<=bound [F target]`.
    Counterexample {
        model: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long)]
        bound: String,
        /// Refute `P<bound` instead.
        #[arg(long)]
        strict: bool,
    },
    /// Path groups behind the most leaking secret of every observable.
    Sources {
        model: PathBuf,
        #[arg(long, default_value_t = 3)]
        top: usize,
    },
    /// Report every violation of the model's well-formedness conditions.
    Validate { model: PathBuf },
}

struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidModel(_) => EXIT_INVALID,
            _ => EXIT_USAGE,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

/// Runs the command line and returns the exit status. Reports go to `out`
/// and diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    let format: Format = cli.format.into();
    match dispatch(cli.command, format) {
        Ok((code, report, fmt)) => {
            let _ = write!(out, "{}", emit_report(&report, fmt));
            code
        }
        Err(f) => {
            let _ = writeln!(err, "qleak: {}", f.message);
            f.code
        }
    }
}

type Outcome3 = (i32, Report, Format);

fn dispatch(cmd: Command, format: Format) -> Result<Outcome3, Failure> {
    match cmd {
        Command::Check { model, formula, bounds_only } => {
            let m = markov(&model)?;
            let f = parse_formula(&formula)?;
            let (code, result) = check(&m, &f, bounds_only)?;
            Ok((code, Report { query: format!("check {f}"), result }, format))
        }
        Command::Leakage { model, prior, max, approx, epsilon, budget } => {
            let h = ihs(&model)?;
            let result = leakage_cmd(&h, prior.as_deref(), max, approx.as_deref(), epsilon.as_deref(), budget)?;
            Ok((EXIT_OK, Report { query: "leakage".into(), result }, format))
        }
        Command::Channel { model, out } => {
            let h = ihs(&model)?;
            let data = analyze(&h)?;
            let result = vec![
                ("channel".to_string(), Field::Matrix(data.channel)),
                ("prior".to_string(), prior_field(&data.prior)),
            ];
            let fmt = out.map(Format::from).unwrap_or(format);
            Ok((EXIT_OK, Report { query: "channel".into(), result }, fmt))
        }
        Command::Counterexample { model, target, bound, strict } => {
            let m = markov(&model)?;
            let psi = parse_prop(&target)?;
            let bound = rational(&bound)?;
            let (code, result) = counterexample(&m, &psi, &bound, strict)?;
            let op = if strict { "<" } else { "<=" };
            Ok((code, Report { query: format!("counterexample P{op}{bound} [F {psi}]"), result }, format))
        }
        Command::Sources { model, top } => {
            let h = ihs(&model)?;
            let s = leakage_sources(&h, top)?;
            Ok((EXIT_OK, Report { query: format!("sources top {top}"), result: sources_fields(&s) }, format))
        }
        Command::Validate { model } => {
            let src = std::fs::read_to_string(&model)
                .map_err(|e| usage(format!("cannot read {}: {e}", model.display())))?;
            let parsed = parse_model_unvalidated(&src)?;
            let v = parsed.violations();
            let code = if v.is_empty() { EXIT_OK } else { EXIT_INVALID };
            let result = vec![("valid".to_string(), Field::Bool(v.is_empty())), ("violations".to_string(), violations_field(&v))];
            Ok((code, Report { query: "validate".into(), result }, format))
        }
    }
}

fn rational(s: &str) -> Result<Prob, Failure> {
    parse_rational(s).map_err(|e| usage(format!("bad rational `{s}`: {}", e.0)))
}

fn markov(path: &std::path::Path) -> Result<MarkovModel, Failure> {
    match load_model(path)? {
        ParsedModel::Markov(m) => Ok(m),
        ParsedModel::Ihs(_) => Err(usage("this command needs a Markov chain or decision process")),
    }
}

fn ihs(path: &std::path::Path) -> Result<Ihs, Failure> {
    match load_model(path)? {
        ParsedModel::Ihs(h) => Ok(h),
        ParsedModel::Markov(_) => Err(usage("this command needs an information-hiding system")),
    }
}

type Fields = Vec<(String, Field)>;

fn verdict(holds: bool) -> Field {
    Field::Text(if holds { "holds" } else { "violated" }.into())
}

fn check(m: &MarkovModel, f: &StateFormula, bounds_only: bool) -> Result<(i32, Fields), Failure> {
    if bounds_only {
        let StateFormula::Cp { cmp, bound, phi, psi } = f else {
            return Err(usage("--bounds-only applies to a top-level CP formula"));
        };
        let (lower, upper) = cp_bounds(m, phi, psi);
        // the bounds bracket CP⁺; they decide an upper-bound query when the
        // whole interval lies on one side
        let decided = if cmp.is_upper() {
            if cmp.holds(&upper, bound) {
                Some(true)
            } else if !cmp.holds(&lower, bound) {
                Some(false)
            } else {
                None
            }
        } else {
            None
        };
        let v = match decided {
            Some(h) => verdict(h),
            None => Field::Text("inconclusive".into()),
        };
        let fields = vec![
            ("verdict".into(), v),
            ("bounds".into(), Field::Record(vec![("lower".into(), Field::Rational(lower)), ("upper".into(), Field::Rational(upper))])),
        ];
        let code = if decided == Some(false) { EXIT_VIOLATED } else { EXIT_OK };
        return Ok((code, fields));
    }
    let r = check_cpctl(m, f)?;
    if r.holds {
        let mut fields = vec![("verdict".into(), verdict(true))];
        if let Some(v) = r.value {
            fields.push(("value".into(), Field::Rational(v)));
        }
        return Ok((EXIT_OK, fields));
    }
    let mut fields: Fields = match f {
        StateFormula::P { cmp: cmp @ (Cmp::Le | Cmp::Lt), bound, path: PathFormula::Until(a, b) } => {
            let chain = if *a == Prop::True {
                m.clone()
            } else {
                let leave = m.sat(&Prop::and(Prop::not(a.clone()), Prop::not(b.clone())));
                absorb_states(m, &leave)
            };
            match torrent_counterexample(&chain, b, bound, *cmp == Cmp::Lt)? {
                Outcome::Violated(c) => torrent_fields(&c),
                Outcome::Holds { .. } => vec![("verdict".into(), verdict(false))],
            }
        }
        StateFormula::Cp { cmp: cmp @ (Cmp::Le | Cmp::Lt), bound, phi, psi } => {
            match cpctl_counterexample(m, phi, psi, bound, *cmp == Cmp::Lt)? {
                Outcome::Violated(c) => cpctl_fields(&c),
                Outcome::Holds { .. } => vec![("verdict".into(), verdict(false))],
            }
        }
        _ => vec![("verdict".into(), verdict(false))],
    };
    if let Some(v) = r.value {
        fields.insert(1, ("value".into(), Field::Rational(v)));
    }
    Ok((EXIT_VIOLATED, fields))
}

fn counterexample(m: &MarkovModel, psi: &Prop, bound: &Prob, strict: bool) -> Result<(i32, Fields), Failure> {
    Ok(match torrent_counterexample(m, psi, bound, strict)? {
        Outcome::Holds { value } => {
            (EXIT_OK, vec![("verdict".into(), verdict(true)), ("value".into(), Field::Rational(value)), ("witnesses".into(), Field::List(vec![]))])
        }
        Outcome::Violated(c) => (EXIT_VIOLATED, torrent_fields(&c)),
    })
}

fn parse_prior(h: &Ihs, text: &str) -> Result<Prior, Failure> {
    let mut entries = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| usage(format!("prior entry `{part}` is not `secret=p`")))?;
        entries.push((k.trim().to_string(), rational(v.trim())?));
    }
    let mut ordered = Vec::new();
    for s in &h.secrets {
        let p = entries.iter().find(|(k, _)| k == s).map(|(_, p)| p.clone());
        ordered.push((s.clone(), p.ok_or_else(|| usage(format!("prior misses secret `{s}`")))?));
    }
    if let Some((k, _)) = entries.iter().find(|(k, _)| !h.secrets.contains(k)) {
        return Err(usage(format!("prior names unknown secret `{k}`")));
    }
    Ok(Prior { entries: ordered })
}

fn leakage_cmd(
    h: &Ihs,
    prior: Option<&str>,
    max: Option<MaxArg>,
    approx: Option<&str>,
    epsilon: Option<&str>,
    budget: Option<usize>,
) -> Result<Fields, Failure> {
    if let Some(mode) = max {
        if prior.is_some() || approx.is_some() {
            return Err(usage("--max cannot be combined with --prior or --approx"));
        }
        let mode = match mode {
            MaxArg::Mult => MaxMode::Mult,
            MaxArg::Add => MaxMode::Add,
        };
        let r = max_leakage(h, mode)?;
        let name = match mode {
            MaxMode::Mult => "max_multiplicative_leakage",
            MaxMode::Add => "max_additive_leakage",
        };
        return Ok(vec![(name.into(), Field::Rational(r.value)), ("attained_at".into(), prior_field(&r.prior))]);
    }
    let inst = match prior {
        Some(p) => instantiate_prior(h, &parse_prior(h, p)?)?,
        None => h.clone(),
    };
    if let Some(strategy) = approx {
        let strategy: Strategy = strategy.parse().map_err(usage)?;
        let stop = StopWhen { epsilon: epsilon.map(rational).transpose()?, budget };
        let p = partial_leakage(&inst, strategy, &stop)?;
        return Ok(partial_fields(&p));
    }
    let data = analyze(&inst)?;
    let mut fields = vec![("prior".to_string(), prior_field(&data.prior))];
    fields.extend(leakage_fields(&data.report));
    fields.push(("joint".into(), Field::Matrix(data.joint)));
    Ok(fields)
}
