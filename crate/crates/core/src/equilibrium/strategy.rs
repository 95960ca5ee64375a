use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::MultiReport;
use crate::valuation::{SignalProfile, SignalSpace, ValuationModel, DEFAULT_TOL};

/// A single-item bidding strategy: a map from own signal to bid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BidRule {
    Truthful,
    /// `scale * s + shift`.
    Affine {
        scale: f64,
        shift: f64,
    },
    Constant {
        bid: f64,
    },
    /// One bid per grid point of `space`.
    Table {
        space: SignalSpace,
        bids: Vec<f64>,
    },
}

impl BidRule {
    pub fn bid(&self, agent: usize, x: f64) -> Result<f64> {
        match self {
            BidRule::Truthful => Ok(x),
            BidRule::Affine { scale, shift } => Ok(scale * x + shift),
            BidRule::Constant { bid } => Ok(*bid),
            BidRule::Table { space, bids } => space
                .index_of(x, DEFAULT_TOL)
                .and_then(|k| bids.get(k).copied())
                .ok_or_else(|| Error::Coverage {
                    agent,
                    signal: format!("{x}"),
                }),
        }
    }
}

/// Single-item strategies of all agents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub agents: Vec<BidRule>,
}

impl StrategyProfile {
    pub fn truthful(n: usize) -> Self {
        StrategyProfile {
            agents: vec![BidRule::Truthful; n],
        }
    }

    /// Tabulates `f(agent, own signal)` on each agent's signal grid.
    pub fn tabulate(model: &ValuationModel, f: impl Fn(usize, f64) -> f64) -> Self {
        StrategyProfile {
            agents: (0..model.n())
                .map(|i| {
                    let space = model.space(i, 0).clone();
                    let bids = space.points().into_iter().map(|x| f(i, x)).collect();
                    BidRule::Table { space, bids }
                })
                .collect(),
        }
    }

    pub fn bids(&self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.agents.len() {
            return Err(Error::Shape(
                "strategy profile and signals differ in length".into(),
            ));
        }
        s.iter()
            .zip(&self.agents)
            .enumerate()
            .map(|(i, (&x, r))| r.bid(i, x))
            .collect()
    }
}

/// A multi-item strategy: own signal row to bids and participation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MultiRule {
    /// Participate everywhere, bidding the true signal.
    Truthful,
    /// The same report whatever the signals.
    Fixed { report: MultiReport },
    /// Bid `scale * s_il` on the items in `participate`.
    Scaled { scale: f64, participate: Vec<bool> },
    /// Explicit entries keyed by the own signal row.
    Table {
        entries: Vec<(Vec<f64>, MultiReport)>,
    },
}

impl MultiRule {
    pub fn report(&self, agent: usize, row: &[f64]) -> Result<MultiReport> {
        match self {
            MultiRule::Truthful => Ok(MultiReport::all_in(row.to_vec())),
            MultiRule::Fixed { report } => Ok(report.clone()),
            MultiRule::Scaled { scale, participate } => Ok(MultiReport {
                bids: row.iter().map(|x| scale * x).collect(),
                participate: participate.clone(),
            }),
            MultiRule::Table { entries } => entries
                .iter()
                .find(|(k, _)| {
                    k.len() == row.len()
                        && k.iter().zip(row).all(|(a, b)| (a - b).abs() <= DEFAULT_TOL)
                })
                .map(|(_, r)| r.clone())
                .ok_or_else(|| Error::Coverage {
                    agent,
                    signal: format!("{row:?}"),
                }),
        }
    }
}

/// Multi-item strategies of all agents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiStrategyProfile {
    pub agents: Vec<MultiRule>,
}

impl MultiStrategyProfile {
    pub fn truthful(n: usize) -> Self {
        MultiStrategyProfile {
            agents: vec![MultiRule::Truthful; n],
        }
    }

    /// Every agent plays the given report at every signal.
    pub fn fixed(reports: Vec<MultiReport>) -> Self {
        MultiStrategyProfile {
            agents: reports
                .into_iter()
                .map(|report| MultiRule::Fixed { report })
                .collect(),
        }
    }

    pub fn reports(&self, s: &SignalProfile) -> Result<Vec<MultiReport>> {
        if s.n() != self.agents.len() {
            return Err(Error::Shape(
                "strategy profile and signals differ in size".into(),
            ));
        }
        self.agents
            .iter()
            .enumerate()
            .map(|(i, r)| r.report(i, s.row(i)))
            .collect()
    }
}

/// A discrete, possibly correlated prior over signal profiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    atoms: Vec<(SignalProfile, f64)>,
}

impl Prior {
    /// Probabilities must be non-negative and sum to one within `1e-12`.
    pub fn new(atoms: Vec<(SignalProfile, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Prior("no atoms".into()));
        }
        let (n, m) = (atoms[0].0.n(), atoms[0].0.m());
        if atoms.iter().any(|(s, _)| s.n() != n || s.m() != m) {
            return Err(Error::Prior("atoms differ in shape".into()));
        }
        if atoms.iter().any(|(_, p)| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Prior("probabilities must be non-negative".into()));
        }
        let total: f64 = atoms.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Prior(format!("probabilities sum to {total}")));
        }
        Ok(Prior { atoms })
    }

    pub fn point(s: SignalProfile) -> Self {
        Prior {
            atoms: vec![(s, 1.0)],
        }
    }

    /// Independent single-item prior from per-agent marginals of
    /// `(signal, probability)` pairs.
    pub fn product(marginals: &[Vec<(f64, f64)>]) -> Result<Self> {
        let mut atoms: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
        for marg in marginals {
            let mut next = Vec::with_capacity(atoms.len() * marg.len());
            for (prefix, p) in &atoms {
                for &(x, q) in marg {
                    let mut v = prefix.clone();
                    v.push(x);
                    next.push((v, p * q));
                }
            }
            atoms = next;
        }
        let total: f64 = atoms.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Prior(format!("marginals sum to {total}")));
        }
        Prior::new(
            atoms
                .into_iter()
                .map(|(s, p)| (SignalProfile::single(s), p / total))
                .collect(),
        )
    }

    pub fn atoms(&self) -> &[(SignalProfile, f64)] {
        &self.atoms
    }

    /// Distinct own signal rows of agent `i`, in order of first appearance.
    pub fn own_rows(&self, i: usize) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for (s, _) in &self.atoms {
            if !out.iter().any(|r| r.as_slice() == s.row(i)) {
                out.push(s.row(i).to_vec());
            }
        }
        out
    }

    /// Atoms with agent `i`'s row equal to `row`, renormalized.
    pub fn conditional(&self, i: usize, row: &[f64]) -> Vec<(SignalProfile, f64)> {
        let sel: Vec<_> = self
            .atoms
            .iter()
            .filter(|(s, p)| s.row(i) == row && *p > 0.0)
            .cloned()
            .collect();
        let total: f64 = sel.iter().map(|(_, p)| p).sum();
        sel.into_iter().map(|(s, p)| (s, p / total)).collect()
    }
}
