use serde::{Deserialize, Serialize};

use super::single::Auction;
use super::{argmax_lowest, ItemDiagnostics, MechanismKind, Outcome};
use crate::error::{Error, Result};
use crate::valuation::{SignalProfile, ValuationModel};

/// One agent's report in a simultaneous auction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiReport {
    pub bids: Vec<f64>,
    pub participate: Vec<bool>,
}

impl MultiReport {
    pub fn all_in(bids: Vec<f64>) -> Self {
        let m = bids.len();
        MultiReport {
            bids,
            participate: vec![true; m],
        }
    }

    pub fn abstain(m: usize) -> Self {
        MultiReport {
            bids: vec![0.0; m],
            participate: vec![false; m],
        }
    }

    /// Participates in item `l` only, bidding `b` there.
    pub fn single_item(m: usize, l: usize, b: f64) -> Self {
        let mut r = MultiReport::abstain(m);
        r.bids[l] = b;
        r.participate[l] = true;
        r
    }
}

impl Auction<'_> {
    /// Runs a simultaneous per-item auction on the reports of all agents.
    pub fn run_multi(&self, reports: &[MultiReport]) -> Result<Outcome> {
        let (n, m) = (self.model.n(), self.model.m());
        if reports.len() != n
            || reports
                .iter()
                .any(|r| r.bids.len() != m || r.participate.len() != m)
        {
            return Err(Error::Shape(format!("need {n} reports over {m} items")));
        }
        let mut winners = Vec::with_capacity(m);
        let mut payments = vec![0.0; n];
        let mut diagnostics = Vec::with_capacity(m);
        match self.kind {
            MechanismKind::SimPrivatizedSpa => {
                for l in 0..m {
                    let scores: Vec<f64> = (0..n)
                        .map(|i| {
                            if reports[i].participate[l] {
                                self.model.privatized_value(i, l, reports[i].bids[l])
                            } else {
                                f64::NEG_INFINITY
                            }
                        })
                        .collect();
                    let w = argmax_lowest(&scores).filter(|&w| scores[w] > f64::NEG_INFINITY);
                    if let Some(w) = w {
                        let second = scores
                            .iter()
                            .enumerate()
                            .filter(|&(j, _)| j != w)
                            .map(|(_, &x)| x)
                            .fold(0.0, f64::max);
                        payments[w] += second;
                    }
                    winners.push(w);
                    diagnostics.push(ItemDiagnostics {
                        scores: scores.iter().map(|&x| x.max(0.0)).collect(),
                        critical_bid: None,
                    });
                }
            }
            MechanismKind::SimSecondPriceMandatory => {
                for l in 0..m {
                    let col: Vec<f64> = reports.iter().map(|r| r.bids[l]).collect();
                    let scores = self.model.values(l, &col);
                    let w = argmax_lowest(&scores).expect("at least one agent");
                    let second = scores
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != w)
                        .map(|(_, &x)| x)
                        .fold(0.0, f64::max);
                    payments[w] += second;
                    winners.push(Some(w));
                    diagnostics.push(ItemDiagnostics {
                        scores,
                        critical_bid: None,
                    });
                }
            }
            ref other => {
                return Err(Error::config(
                    "/mechanism",
                    format!("{other} is not a simultaneous multi-item mechanism"),
                ))
            }
        }
        Ok(Outcome {
            winners,
            payments,
            diagnostics,
        })
    }
}

/// Unit-demand utility: the best won item at the true signals minus all
/// payments.
pub fn multi_utility(model: &ValuationModel, out: &Outcome, i: usize, s: &SignalProfile) -> f64 {
    let best = out
        .winners
        .iter()
        .enumerate()
        .filter(|&(_, w)| *w == Some(i))
        .map(|(l, _)| model.value(i, l, &s.column(l)))
        .fold(0.0, f64::max);
    best - out.payments[i]
}

/// Unit-demand value of agent `i` for the items it wins.
pub fn won_value(model: &ValuationModel, out: &Outcome, i: usize, s: &SignalProfile) -> f64 {
    out.winners
        .iter()
        .enumerate()
        .filter(|&(_, w)| *w == Some(i))
        .map(|(l, _)| model.value(i, l, &s.column(l)))
        .fold(0.0, f64::max)
}
