//! Error type shared by every module.

use serde::Serialize;
use thiserror::Error;

/// One schema or consistency problem, located by a JSON pointer.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Issue {
    pub pointer: String,
    pub message: String,
}

impl Issue {
    pub fn new(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Issue {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}

fn list(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(|i| {
            format!(
                "{}: {}",
                if i.pointer.is_empty() {
                    "/"
                } else {
                    &i.pointer
                },
                i.message
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Errors raised by model construction, mechanism runs and verification.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A signal lies outside its declared signal space.
    #[error("signal {value} of agent {agent} (item {item}) outside [{lo}, {hi}]")]
    Domain {
        agent: usize,
        item: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    /// Model parameters or shape are invalid.
    #[error("invalid model: {0}")]
    InvalidModel(String),
    /// Vectors or matrices have the wrong dimensions.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// The agent wins at no bid of its grid.
    #[error("agent {agent} cannot win at any grid bid")]
    NoCriticalBid { agent: usize },
    /// A strategy table has no entry for a signal that verification needs.
    #[error("strategy of agent {agent} does not cover signal {signal}")]
    Coverage { agent: usize, signal: String },
    /// Prior probabilities are malformed.
    #[error("invalid prior: {0}")]
    Prior(String),
    /// A welfare report was requested for a profile that is not an equilibrium.
    #[error("not an equilibrium: agent {agent} gains {gain} by deviating to {deviation}")]
    NotEquilibrium {
        agent: usize,
        gain: f64,
        deviation: String,
    },
    /// Scenario or parameter error, located by a JSON pointer.
    #[error("{pointer}: {message}")]
    Config { pointer: String, message: String },
    /// A scenario failed validation.
    #[error("invalid scenario: {}", list(.0))]
    Schema(Vec<Issue>),
    /// Unknown experiment name.
    #[error("unknown experiment '{0}'")]
    UnknownExperiment(String),
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}

impl Error {
    /// The problems behind this error, each with a pointer.
    pub fn issues(&self) -> Vec<Issue> {
        match self {
            Error::Schema(v) => v.clone(),
            Error::Config { pointer, message } => {
                vec![Issue::new(pointer.clone(), message.clone())]
            }
            other => vec![Issue::new("", other.to_string())],
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
