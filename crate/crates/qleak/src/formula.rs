//! Formula syntax: propositional state formulas, probabilistic and
//! conditional probabilistic operators over until/globally path formulas.

use crate::error::{Error, ParseError, Result};
use crate::prop::Prop;
use crate::rational::{fmt_rational, parse_rational, Prob};
use std::fmt;

/// Path formula with propositional arguments. `F x` is stored as `true U x`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PathFormula {
    Until(Prop, Prop),
    Globally(Prop),
}

impl PathFormula {
    pub fn eventually(p: Prop) -> Self {
        PathFormula::Until(Prop::True, p)
    }

    /// Proposition that settles the formula one way or the other.
    pub fn stop_condition(&self) -> Prop {
        match self {
            PathFormula::Until(a, b) => Prop::or(Prop::not(a.clone()), b.clone()),
            PathFormula::Globally(a) => Prop::not(a.clone()),
        }
    }
}

impl fmt::Display for PathFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathFormula::Until(Prop::True, b) => write!(f, "F {}", Paren(b)),
            PathFormula::Until(a, b) => write!(f, "{} U {}", Paren(a), Paren(b)),
            PathFormula::Globally(a) => write!(f, "G {}", Paren(a)),
        }
    }
}

/// Wraps non-atomic propositions in parentheses.
struct Paren<'a>(&'a Prop);

impl fmt::Display for Paren<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Prop::Atom(_) | Prop::True | Prop::False | Prop::Not(_) => write!(f, "{}", self.0),
            other => write!(f, "({other})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    pub fn holds(self, value: &Prob, bound: &Prob) -> bool {
        match self {
            Cmp::Lt => value < bound,
            Cmp::Le => value <= bound,
            Cmp::Gt => value > bound,
            Cmp::Ge => value >= bound,
        }
    }

    /// Upper-bound comparisons are decided by the maximal probability.
    pub fn is_upper(self) -> bool {
        matches!(self, Cmp::Lt | Cmp::Le)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StateFormula {
    Prop(Prop),
    Not(Box<StateFormula>),
    And(Box<StateFormula>, Box<StateFormula>),
    P { cmp: Cmp, bound: Prob, path: PathFormula },
    Cp { cmp: Cmp, bound: Prob, phi: PathFormula, psi: PathFormula },
}

impl fmt::Display for StateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateFormula::Prop(p) => write!(f, "{}", Paren(p)),
            StateFormula::Not(x) => match **x {
                StateFormula::And(..) => write!(f, "!({x})"),
                _ => write!(f, "!{x}"),
            },
            StateFormula::And(a, b) => {
                write!(f, "{a} & ")?;
                match **b {
                    StateFormula::And(..) => write!(f, "({b})"),
                    _ => write!(f, "{b}"),
                }
            }
            StateFormula::P { cmp, bound, path } => {
                write!(f, "P{}{} [ {} ]", cmp.symbol(), fmt_rational(bound), path)
            }
            StateFormula::Cp { cmp, bound, phi, psi } => {
                write!(f, "CP{}{} [ {} | {} ]", cmp.symbol(), fmt_rational(bound), phi, psi)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(String),
    Cmp(Cmp),
    LBrack,
    RBrack,
    LParen,
    RParen,
    Bar,
    OrOr,
    Amp,
    Bang,
    End,
}

fn lex(text: &str, line: usize) -> std::result::Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let (tok, len) = match c {
            '[' => (Tok::LBrack, 1),
            ']' => (Tok::RBrack, 1),
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '&' => (Tok::Amp, if two == "&&" { 2 } else { 1 }),
            '!' | '¬' => (Tok::Bang, 1),
            '|' if two == "||" => (Tok::OrOr, 2),
            '|' => (Tok::Bar, 1),
            '<' if two == "<=" => (Tok::Cmp(Cmp::Le), 2),
            '<' => (Tok::Cmp(Cmp::Lt), 1),
            '>' if two == ">=" => (Tok::Cmp(Cmp::Ge), 2),
            '>' => (Tok::Cmp(Cmp::Gt), 1),
            '≤' => (Tok::Cmp(Cmp::Le), 1),
            '≥' => (Tok::Cmp(Cmp::Ge), 1),
            c if c.is_ascii_digit() || c == '.' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.' || chars[j] == '/') {
                    j += 1;
                }
                (Tok::Num(chars[i..j].iter().collect()), j - i)
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_' || chars[j] == '\'') {
                    j += 1;
                }
                (Tok::Ident(chars[i..j].iter().collect()), j - i)
            }
            other => return Err(ParseError::new(line, col, format!("unexpected character `{other}`"))),
        };
        out.push((tok, col));
        i += len;
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
}

enum Failure {
    Syntax(ParseError),
    Nesting(String),
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        Failure::Syntax(e)
    }
}

type PResult<T> = std::result::Result<T, Failure>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].0
    }

    fn col(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(Failure::Syntax(ParseError::new(self.line, self.col(), msg)))
    }

    fn expect(&mut self, t: Tok, what: &str) -> PResult<()> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn state(&mut self) -> PResult<StateFormula> {
        let mut left = self.state_unary()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let right = self.state_unary()?;
            left = StateFormula::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn state_unary(&mut self) -> PResult<StateFormula> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                Ok(StateFormula::Not(Box::new(self.state_unary()?)))
            }
            Tok::LParen => {
                self.bump();
                let f = self.state()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(id) if (id == "P" || id == "CP") && matches!(self.peek2(), Tok::Cmp(_)) => {
                self.bump();
                let cmp = match self.bump() {
                    Tok::Cmp(c) => c,
                    _ => unreachable!(),
                };
                let bound = self.number()?;
                self.expect(Tok::LBrack, "`[`")?;
                let phi = self.path()?;
                let f = if id == "P" {
                    StateFormula::P { cmp, bound, path: phi }
                } else {
                    self.expect(Tok::Bar, "`|` separating the conditional path formulas")?;
                    let psi = self.path()?;
                    StateFormula::Cp { cmp, bound, phi, psi }
                };
                self.expect(Tok::RBrack, "`]`")?;
                Ok(f)
            }
            Tok::Ident(_) => Ok(StateFormula::Prop(self.prop_atom()?)),
            _ => self.err("expected a state formula"),
        }
    }

    fn number(&mut self) -> PResult<Prob> {
        let col = self.col();
        match self.bump() {
            Tok::Num(s) => {
                let v = parse_rational(&s).map_err(|e| ParseError::new(self.line, col, e.to_string()))?;
                if v > Prob::from_integer(1.into()) {
                    return Err(Failure::Syntax(ParseError::new(self.line, col, "probability bound above 1")));
                }
                Ok(v)
            }
            _ => Err(Failure::Syntax(ParseError::new(self.line, col, "expected a probability bound"))),
        }
    }

    fn path(&mut self) -> PResult<PathFormula> {
        match self.peek().clone() {
            Tok::Ident(id) if id == "F" => {
                self.bump();
                Ok(PathFormula::eventually(self.prop_unary()?))
            }
            Tok::Ident(id) if id == "G" => {
                self.bump();
                Ok(PathFormula::Globally(self.prop_unary()?))
            }
            _ => {
                let left = self.prop()?;
                match self.peek() {
                    Tok::Ident(id) if id == "U" => {
                        self.bump();
                        let right = self.prop()?;
                        Ok(PathFormula::Until(left, right))
                    }
                    _ => self.err("expected `U` after the left argument of an until formula"),
                }
            }
        }
    }

    fn prop(&mut self) -> PResult<Prop> {
        let mut left = self.prop_and()?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            let right = self.prop_and()?;
            left = Prop::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn prop_and(&mut self) -> PResult<Prop> {
        let mut left = self.prop_unary()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let right = self.prop_unary()?;
            left = Prop::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn prop_unary(&mut self) -> PResult<Prop> {
        match self.peek() {
            Tok::Bang => {
                self.bump();
                Ok(Prop::Not(Box::new(self.prop_unary()?)))
            }
            Tok::LParen => {
                self.bump();
                let p = self.prop()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(p)
            }
            _ => self.prop_atom(),
        }
    }

    fn prop_atom(&mut self) -> PResult<Prop> {
        match self.peek().clone() {
            Tok::Ident(id) => {
                if (id == "P" || id == "CP") && matches!(self.peek2(), Tok::Cmp(_)) {
                    return Err(Failure::Nesting(format!(
                        "column {}: probabilistic operator inside a path formula",
                        self.col()
                    )));
                }
                if id == "F" || id == "G" || id == "U" {
                    return Err(Failure::Nesting(format!(
                        "column {}: temporal operator `{id}` used as a propositional argument",
                        self.col()
                    )));
                }
                self.bump();
                Ok(match id.as_str() {
                    "true" => Prop::True,
                    "false" => Prop::False,
                    _ => Prop::Atom(id),
                })
            }
            _ => self.err("expected a proposition"),
        }
    }
}

fn run<T>(text: &str, f: impl FnOnce(&mut Parser) -> PResult<T>) -> Result<T> {
    let toks = lex(text, 1)?;
    let mut p = Parser { toks, pos: 0, line: 1 };
    let out = f(&mut p).and_then(|v| if *p.peek() == Tok::End { Ok(v) } else { p.err("trailing input") });
    out.map_err(|e| match e {
        Failure::Syntax(e) => Error::Parse(e),
        Failure::Nesting(m) => Error::Nesting(m),
    })
}

pub fn parse_formula(text: &str) -> Result<StateFormula> {
    run(text, |p| p.state())
}

pub fn parse_path(text: &str) -> Result<PathFormula> {
    run(text, |p| p.path())
}

pub fn parse_prop(text: &str) -> Result<Prop> {
    run(text, |p| p.prop())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn conditional_with_eventually() {
        let f = parse_formula("CP<=0.5 [ F B | G P ]").unwrap();
        assert_eq!(
            f,
            StateFormula::Cp {
                cmp: Cmp::Le,
                bound: ratio(1, 2),
                phi: PathFormula::Until(Prop::True, Prop::atom("B")),
                psi: PathFormula::Globally(Prop::atom("P")),
            }
        );
    }

    #[test]
    fn probabilistic_until() {
        let f = parse_formula("P>=1 [ a U b ]").unwrap();
        assert_eq!(
            f,
            StateFormula::P {
                cmp: Cmp::Ge,
                bound: ratio(1, 1),
                path: PathFormula::Until(Prop::atom("a"), Prop::atom("b")),
            }
        );
    }

    #[test]
    fn conjunction_inside_argument() {
        let f = parse_formula("CP<0.75 [ F (B & !C) | G P ]").unwrap();
        match f {
            StateFormula::Cp { cmp: Cmp::Lt, phi: PathFormula::Until(Prop::True, arg), .. } => {
                assert_eq!(arg, Prop::and(Prop::atom("B"), Prop::not(Prop::atom("C"))));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nesting_is_rejected() {
        assert!(matches!(parse_formula("P<=0.5 [ F P>0.1 [ F a ] ]"), Err(Error::Nesting(_))));
        assert!(matches!(parse_formula("P<=0.5 [ F F a ]"), Err(Error::Nesting(_))));
        assert!(matches!(parse_formula("P<=0.5 [ F a"), Err(Error::Parse(_))));
        assert!(matches!(parse_formula("P<=2 [ F a ]"), Err(Error::Parse(_))));
    }

    #[test]
    fn display_round_trips() {
        for text in [
            "CP<=1/2 [ F B | G P ]",
            "P>=1 [ a U b ]",
            "!P<1/10 [ G !(a & b) ] & ok",
            "CP>3/4 [ (a || b) U c | F d ]",
        ] {
            let f = parse_formula(text).unwrap();
            assert_eq!(parse_formula(&f.to_string()).unwrap(), f, "{text} -> {f}");
        }
    }
}
