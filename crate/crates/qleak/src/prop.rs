//! Propositional state formulas over atomic labels.

use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Prop {
    True,
    False,
    Atom(String),
    Not(Box<Prop>),
    And(Box<Prop>, Box<Prop>),
    Or(Box<Prop>, Box<Prop>),
}

impl Prop {
    pub fn atom(name: &str) -> Prop {
        Prop::Atom(name.to_string())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(p: Prop) -> Prop {
        match p {
            Prop::True => Prop::False,
            Prop::False => Prop::True,
            Prop::Not(inner) => *inner,
            other => Prop::Not(Box::new(other)),
        }
    }

    pub fn and(a: Prop, b: Prop) -> Prop {
        match (a, b) {
            (Prop::True, x) | (x, Prop::True) => x,
            (Prop::False, _) | (_, Prop::False) => Prop::False,
            (a, b) => Prop::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn or(a: Prop, b: Prop) -> Prop {
        match (a, b) {
            (Prop::False, x) | (x, Prop::False) => x,
            (Prop::True, _) | (_, Prop::True) => Prop::True,
            (a, b) => Prop::Or(Box::new(a), Box::new(b)),
        }
    }

    pub fn eval(&self, labels: &BTreeSet<String>) -> bool {
        match self {
            Prop::True => true,
            Prop::False => false,
            Prop::Atom(a) => labels.contains(a),
            Prop::Not(p) => !p.eval(labels),
            Prop::And(a, b) => a.eval(labels) && b.eval(labels),
            Prop::Or(a, b) => a.eval(labels) || b.eval(labels),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Prop::Or(..) => 1,
            Prop::And(..) => 2,
            _ => 3,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.precedence() < min;
        if paren {
            write!(f, "(")?;
        }
        match self {
            Prop::True => write!(f, "true")?,
            Prop::False => write!(f, "false")?,
            Prop::Atom(a) => write!(f, "{a}")?,
            Prop::Not(p) => {
                write!(f, "!")?;
                p.fmt_at(f, 3)?;
            }
            Prop::And(a, b) => {
                a.fmt_at(f, 2)?;
                write!(f, " & ")?;
                b.fmt_at(f, 3)?;
            }
            Prop::Or(a, b) => {
                a.fmt_at(f, 1)?;
                write!(f, " || ")?;
                b.fmt_at(f, 2)?;
            }
        }
        if paren {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Prop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn evaluation() {
        let p = Prop::and(Prop::atom("B"), Prop::not(Prop::atom("C")));
        assert!(p.eval(&labels(&["B"])));
        assert!(!p.eval(&labels(&["B", "C"])));
        assert!(Prop::or(Prop::atom("x"), Prop::True).eval(&labels(&[])));
    }

    #[test]
    fn display_parenthesizes() {
        let p = Prop::and(Prop::or(Prop::atom("a"), Prop::atom("b")), Prop::atom("c"));
        assert_eq!(p.to_string(), "(a || b) & c");
        assert_eq!(Prop::not(Prop::and(Prop::atom("a"), Prop::atom("b"))).to_string(), "!(a & b)");
    }
}
