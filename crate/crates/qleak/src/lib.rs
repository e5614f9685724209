//! Exact analysis of probabilistic systems: conditional temporal properties
//! over Markov chains and decision processes, min-entropy leakage of
//! information-hiding systems, and counterexamples built from grouped paths.

pub mod error;
pub mod formula;
pub mod cli;
pub mod cpctl;
pub mod delta;
pub mod diagnostics;
pub mod graph;
pub mod ihs;
pub mod leakage;
pub mod linalg;
pub mod model;
pub mod product;
pub mod prop;
pub mod rails;
pub mod rational;
pub mod text;
pub mod reach;
pub mod regex;
pub mod report;

pub use error::{Error, ParseError, Result};
pub use model::{Choice, Distribution, MarkovModel, ModelKind, Violation};
pub use prop::Prop;
pub use rational::Prob;
