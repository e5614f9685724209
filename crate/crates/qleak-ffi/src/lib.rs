//! C interface to the qleak analyses.
//!
//! Models live behind an opaque `QleakModel` handle. Every fallible call
//! returns a `QleakStatus`; on failure the message is available from
//! `qleak_last_error` until the next call on the same thread. Strings
//! handed out by the library are released with `qleak_string_free`.

use qleak::cpctl::check_cpctl;
use qleak::diagnostics::{torrent_counterexample, Outcome};
use qleak::formula::{parse_formula, parse_prop};
use qleak::leakage::analyze;
use qleak::rational::{fmt_rational, parse_rational};
use qleak::report::{emit_report, leakage_fields, prior_field, torrent_fields, Field, Format, Report};
use qleak::text::{parse_model, ParsedModel};
use qleak::Error;
use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::ptr;

/// Result codes of the C interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QleakStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidModel = 4,
    WrongModelKind = 5,
    AnalysisError = 6,
    Io = 7,
}

/// Opaque model handle.
pub struct QleakModel {
    inner: ParsedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: QleakStatus, msg: impl Into<String>) -> QleakStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> QleakStatus {
    let status = match e {
        Error::Parse(_) | Error::Nesting(_) => QleakStatus::ParseError,
        Error::InvalidModel(_) => QleakStatus::InvalidModel,
        _ => QleakStatus::AnalysisError,
    };
    fail(status, e.to_string())
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, QleakStatus> {
    if p.is_null() {
        return Err(fail(QleakStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(QleakStatus::InvalidUtf8, "argument is not UTF-8"))
}

fn give_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("no interior nul").into_raw()
}

unsafe fn model_ref<'a>(m: *const QleakModel) -> Result<&'a QleakModel, QleakStatus> {
    m.as_ref().ok_or_else(|| fail(QleakStatus::NullArgument, "null model handle"))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Message of the last failed call on this thread, or null. The pointer is
/// owned by the library.
#[no_mangle]
pub extern "C" fn qleak_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses and validates a model from its text. On success `*out` holds a
/// handle to release with `qleak_model_free`.
///
/// # Safety
/// `text` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qleak_model_parse(text: *const c_char, out: *mut *mut QleakModel) -> QleakStatus {
    if out.is_null() {
        return fail(QleakStatus::NullArgument, "null output pointer");
    }
    let src = tri!(read_str(text));
    match parse_model(src) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(QleakModel { inner }));
            QleakStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Reads, parses and validates a model file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qleak_model_load(path: *const c_char, out: *mut *mut QleakModel) -> QleakStatus {
    let p = tri!(read_str(path));
    let src = match std::fs::read_to_string(p) {
        Ok(s) => s,
        Err(e) => return fail(QleakStatus::Io, format!("cannot read {p}: {e}")),
    };
    let c = CString::new(src).map_err(|_| fail(QleakStatus::InvalidUtf8, "file contains a nul byte"));
    let c = tri!(c);
    qleak_model_parse(c.as_ptr(), out)
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `m` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qleak_model_free(m: *mut QleakModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// 0 for a Markov chain, 1 for a decision process, 2 for an
/// information-hiding system, -1 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qleak_model_kind(m: *const QleakModel) -> c_int {
    match m.as_ref().map(|m| &m.inner) {
        Some(ParsedModel::Markov(mm)) if mm.is_mc() => 0,
        Some(ParsedModel::Markov(_)) => 1,
        Some(ParsedModel::Ihs(_)) => 2,
        None => -1,
    }
}

/// Checks a state formula at the initial state. `*holds` receives the
/// verdict; `*value`, when not null, receives the compared probability as
/// `num/den` (or null when the formula has no top-level operator).
///
/// # Safety
/// `m` must be a live handle, `formula` nul-terminated, `holds` valid and
/// `value` null or valid.
#[no_mangle]
pub unsafe extern "C" fn qleak_check(
    m: *const QleakModel,
    formula: *const c_char,
    holds: *mut bool,
    value: *mut *mut c_char,
) -> QleakStatus {
    let model = tri!(model_ref(m));
    let f = tri!(read_str(formula));
    if holds.is_null() {
        return fail(QleakStatus::NullArgument, "null verdict pointer");
    }
    let ParsedModel::Markov(mm) = &model.inner else {
        return fail(QleakStatus::WrongModelKind, "formulas are checked on Markov models");
    };
    let f = match parse_formula(f) {
        Ok(f) => f,
        Err(e) => return from_error(e),
    };
    match check_cpctl(mm, &f) {
        Ok(r) => {
            *holds = r.holds;
            if !value.is_null() {
                *value = r.value.map_or(ptr::null_mut(), |v| give_string(fmt_rational(&v)));
            }
            QleakStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Leakage report of an information-hiding system as JSON.
///
/// # Safety
/// `m` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qleak_leakage_json(m: *const QleakModel, out: *mut *mut c_char) -> QleakStatus {
    let model = tri!(model_ref(m));
    if out.is_null() {
        return fail(QleakStatus::NullArgument, "null output pointer");
    }
    let ParsedModel::Ihs(h) = &model.inner else {
        return fail(QleakStatus::WrongModelKind, "leakage needs an information-hiding system");
    };
    match analyze(h) {
        Ok(d) => {
            let mut result = vec![("prior".to_string(), prior_field(&d.prior))];
            result.extend(leakage_fields(&d.report));
            result.push(("joint".into(), Field::Matrix(d.joint)));
            *out = give_string(emit_report(&Report { query: "leakage".into(), result }, Format::Json));
            QleakStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Channel matrix as CSV, one row per secret.
///
/// # Safety
/// `m` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qleak_channel_csv(m: *const QleakModel, out: *mut *mut c_char) -> QleakStatus {
    let model = tri!(model_ref(m));
    if out.is_null() {
        return fail(QleakStatus::NullArgument, "null output pointer");
    }
    let ParsedModel::Ihs(h) = &model.inner else {
        return fail(QleakStatus::WrongModelKind, "channel needs an information-hiding system");
    };
    match analyze(h) {
        Ok(d) => {
            let r = Report { query: "channel".into(), result: vec![("channel".into(), Field::Matrix(d.channel))] };
            *out = give_string(emit_report(&r, Format::Csv));
            QleakStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Torrent counterexample to `P<=bound [F target]` (`P<bound` when
/// `strict`). `*violated` tells whether one exists; `*json` receives the
/// report either way.
///
/// # Safety
/// `m` must be a live handle, strings nul-terminated, pointers valid.
#[no_mangle]
pub unsafe extern "C" fn qleak_counterexample_json(
    m: *const QleakModel,
    target: *const c_char,
    bound: *const c_char,
    strict: bool,
    violated: *mut bool,
    json: *mut *mut c_char,
) -> QleakStatus {
    let model = tri!(model_ref(m));
    let t = tri!(read_str(target));
    let b = tri!(read_str(bound));
    if violated.is_null() || json.is_null() {
        return fail(QleakStatus::NullArgument, "null output pointer");
    }
    let ParsedModel::Markov(mm) = &model.inner else {
        return fail(QleakStatus::WrongModelKind, "counterexamples need a Markov model");
    };
    let psi = match parse_prop(t) {
        Ok(p) => p,
        Err(e) => return from_error(e),
    };
    let bound = match parse_rational(b) {
        Ok(v) => v,
        Err(e) => return fail(QleakStatus::ParseError, format!("bad rational `{b}`: {}", e.0)),
    };
    match torrent_counterexample(mm, &psi, &bound, strict) {
        Ok(Outcome::Violated(c)) => {
            *violated = true;
            let r = Report { query: c.property.clone(), result: torrent_fields(&c) };
            *json = give_string(emit_report(&r, Format::Json));
            QleakStatus::Ok
        }
        Ok(Outcome::Holds { value }) => {
            *violated = false;
            let result = vec![
                ("verdict".to_string(), Field::Text("holds".into())),
                ("value".to_string(), Field::Rational(value)),
                ("witnesses".to_string(), Field::List(vec![])),
            ];
            *json = give_string(emit_report(&Report { query: "counterexample".into(), result }, Format::Json));
            QleakStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qleak_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CROWDS: &str = include_str!("../../qleak/fixtures/crowds.ihs");
    const INTRO: &str = include_str!("../../qleak/fixtures/intro.mc");

    unsafe fn parse(src: &str) -> *mut QleakModel {
        let c = CString::new(src).unwrap();
        let mut m = ptr::null_mut();
        assert_eq!(qleak_model_parse(c.as_ptr(), &mut m), QleakStatus::Ok);
        m
    }

    #[test]
    fn channel_round_trip() {
        unsafe {
            let m = parse(CROWDS);
            assert_eq!(qleak_model_kind(m), 2);
            let mut out = ptr::null_mut();
            assert_eq!(qleak_channel_csv(m, &mut out), QleakStatus::Ok);
            let s = CStr::from_ptr(out).to_str().unwrap().to_owned();
            assert!(s.contains("a,21/40,9/40,1/4"));
            qleak_string_free(out);
            qleak_model_free(m);
        }
    }

    #[test]
    fn check_and_counterexample() {
        unsafe {
            let m = parse(INTRO);
            let f = CString::new("P<=1/2 [ F psi ]").unwrap();
            let mut holds = true;
            let mut value = ptr::null_mut();
            assert_eq!(qleak_check(m, f.as_ptr(), &mut holds, &mut value), QleakStatus::Ok);
            assert!(!holds);
            assert_eq!(CStr::from_ptr(value).to_str().unwrap(), "1");
            qleak_string_free(value);
            let t = CString::new("psi").unwrap();
            let b = CString::new("1/2").unwrap();
            let mut violated = false;
            let mut json = ptr::null_mut();
            assert_eq!(qleak_counterexample_json(m, t.as_ptr(), b.as_ptr(), false, &mut violated, &mut json), QleakStatus::Ok);
            assert!(violated);
            assert!(CStr::from_ptr(json).to_str().unwrap().contains("s0 s2 s4"));
            qleak_string_free(json);
            qleak_model_free(m);
        }
    }

    #[test]
    fn errors_are_reported() {
        unsafe {
            let c = CString::new("model mc\nstate a\ninit b\n").unwrap();
            let mut m = ptr::null_mut();
            assert_eq!(qleak_model_parse(c.as_ptr(), &mut m), QleakStatus::ParseError);
            assert!(m.is_null());
            assert!(!qleak_last_error().is_null());
            let m = parse(INTRO);
            let mut out = ptr::null_mut();
            assert_eq!(qleak_leakage_json(m, &mut out), QleakStatus::WrongModelKind);
            let mut mm = ptr::null_mut();
            assert_eq!(qleak_model_parse(ptr::null(), &mut mm), QleakStatus::NullArgument);
            qleak_model_free(m);
        }
    }
}
