use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::collections::HashMap;

use super::{argmax_lowest, ItemDiagnostics, MechanismKind, Outcome};
use crate::error::{Error, Result};
use crate::valuation::{SignalSpace, ValuationModel};

/// Expected allocation and payments of a single-item run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lottery {
    pub win: Vec<f64>,
    pub pay: Vec<f64>,
}

impl Lottery {
    /// Expected utility of agent `i` whose true value is `value`.
    pub fn utility(&self, i: usize, value: f64) -> f64 {
        self.win[i] * value - self.pay[i]
    }
}

/// Exact random-sampling Vickrey statistics over all splits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RsvExpectation {
    pub win_prob: Vec<f64>,
    pub expected_payment: Vec<f64>,
    pub expected_welfare: f64,
    pub opt: f64,
}

type CacheKey = (usize, usize, Vec<u64>);

/// A mechanism bound to a model and per-agent bid grids.
///
/// Critical bids are searched on the bid grid: the first winning grid point
/// is found by scanning, then the switch point inside the preceding cell is
/// located by bisection. Grid scans are cached per `(agent, b_-i)`; an
/// `Auction` is therefore not `Sync`, clone it per thread.
pub struct Auction<'a> {
    pub model: &'a ValuationModel,
    pub kind: MechanismKind,
    grids: Vec<SignalSpace>,
    cache: RefCell<HashMap<CacheKey, Option<usize>>>,
}

impl Clone for Auction<'_> {
    fn clone(&self) -> Self {
        Auction {
            model: self.model,
            kind: self.kind.clone(),
            grids: self.grids.clone(),
            cache: RefCell::new(HashMap::new()),
        }
    }
}

/// The shareable part of an [`Auction`], used to build per-thread copies.
#[derive(Clone, Debug)]
pub struct AuctionSpec<'a> {
    model: &'a ValuationModel,
    kind: MechanismKind,
    grids: Vec<SignalSpace>,
}

impl<'a> AuctionSpec<'a> {
    pub fn build(&self) -> Auction<'a> {
        Auction {
            model: self.model,
            kind: self.kind.clone(),
            grids: self.grids.clone(),
            cache: RefCell::new(HashMap::new()),
        }
    }
}

const MAX_RSV_AGENTS: usize = 20;

impl<'a> Auction<'a> {
    /// Bid grids default to the model's signal spaces.
    pub fn new(model: &'a ValuationModel, kind: MechanismKind) -> Self {
        let grids = (0..model.n())
            .flat_map(|i| (0..model.m()).map(move |l| (i, l)))
            .map(|(i, l)| model.space(i, l).clone())
            .collect();
        Auction {
            model,
            kind,
            grids,
            cache: RefCell::new(HashMap::new()),
        }
    }

    /// Replaces the bid grids: one per agent or one per (agent, item).
    pub fn with_grids(mut self, grids: Vec<SignalSpace>) -> Result<Self> {
        let (n, m) = (self.model.n(), self.model.m());
        self.grids = if grids.len() == n {
            grids
                .into_iter()
                .flat_map(|g| std::iter::repeat_n(g, m))
                .collect()
        } else if grids.len() == n * m {
            grids
        } else {
            return Err(Error::Shape(format!("need {n} or {} bid grids", n * m)));
        };
        self.cache.borrow_mut().clear();
        Ok(self)
    }

    pub fn spec(&self) -> AuctionSpec<'a> {
        AuctionSpec {
            model: self.model,
            kind: self.kind.clone(),
            grids: self.grids.clone(),
        }
    }

    pub fn grid(&self, i: usize, l: usize) -> &SignalSpace {
        &self.grids[i * self.model.m() + l]
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    fn check_bids(&self, bids: &[f64]) -> Result<()> {
        if bids.len() != self.n() {
            return Err(Error::Shape(format!(
                "expected {} bids, got {}",
                self.n(),
                bids.len()
            )));
        }
        if let Some(j) = bids.iter().position(|b| !b.is_finite()) {
            return Err(Error::Shape(format!("bid of agent {j} is not finite")));
        }
        Ok(())
    }

    /// Winner of the single item under `bids`: highest value, ties to the
    /// lowest index.
    pub fn winner(&self, bids: &[f64]) -> usize {
        argmax_lowest(&self.model.values(0, bids)).expect("at least one agent")
    }

    fn wins(&self, i: usize, bids: &mut [f64], b: f64) -> bool {
        let keep = bids[i];
        bids[i] = b;
        let w = self.winner(bids);
        bids[i] = keep;
        w == i
    }

    /// Index of the first grid bid at which `i` wins against `bids_{-i}`.
    fn first_winning_index(&self, i: usize, bids: &[f64]) -> Option<usize> {
        let key: CacheKey = (
            i,
            0,
            bids.iter()
                .enumerate()
                .map(|(j, b)| if j == i { 0 } else { b.to_bits() })
                .collect(),
        );
        if let Some(hit) = self.cache.borrow().get(&key) {
            return *hit;
        }
        let grid = self.grid(i, 0);
        let mut work = bids.to_vec();
        let found = (0..grid.len()).find(|&k| self.wins(i, &mut work, grid.point(k)));
        self.cache.borrow_mut().insert(key, found);
        found
    }

    /// Bisection between a losing bid `lo` and a winning bid `hi`.
    fn refine(&self, i: usize, bids: &[f64], mut lo: f64, mut hi: f64) -> f64 {
        let mut work = bids.to_vec();
        for _ in 0..200 {
            if hi - lo <= 1e-12 * hi.abs().max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.wins(i, &mut work, mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Critical bid of agent `i` against `bids_{-i}` (the own entry of
    /// `bids` is ignored).
    pub fn critical_bid(&self, i: usize, bids: &[f64]) -> Result<f64> {
        self.check_bids(bids)?;
        let grid = self.grid(i, 0);
        let k = self
            .first_winning_index(i, bids)
            .ok_or(Error::NoCriticalBid { agent: i })?;
        if k == 0 {
            return Ok(grid.point(0));
        }
        Ok(self.refine(i, bids, grid.point(k - 1), grid.point(k)))
    }

    /// Critical bid of the current winner `w`, also valid when `b_w` is off
    /// the grid and wins below the first winning grid point.
    fn winner_critical(&self, w: usize, bids: &[f64]) -> f64 {
        let grid = self.grid(w, 0);
        let b = bids[w];
        match self.first_winning_index(w, bids) {
            Some(k) if grid.point(k) <= b => {
                if k == 0 {
                    grid.point(0)
                } else {
                    self.refine(w, bids, grid.point(k - 1), grid.point(k))
                }
            }
            _ => {
                let below = (0..grid.len()).rev().find(|&k| grid.point(k) < b);
                match below {
                    Some(k) => self.refine(w, bids, grid.point(k), b),
                    None => b,
                }
            }
        }
    }

    /// Deterministic single-item run for GVA, second price and first price.
    pub fn run_single(&self, bids: &[f64]) -> Result<Outcome> {
        self.check_bids(bids)?;
        let n = self.n();
        let scores = self.model.values(0, bids);
        let w = argmax_lowest(&scores).expect("at least one agent");
        let mut payments = vec![0.0; n];
        let mut critical = None;
        match &self.kind {
            MechanismKind::Gva => {
                let t = self.winner_critical(w, bids);
                let mut at = bids.to_vec();
                at[w] = t;
                payments[w] = self.model.value(w, 0, &at);
                critical = Some(t);
            }
            MechanismKind::SecondPrice => {
                payments[w] = scores
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != w)
                    .map(|(_, &v)| v)
                    .fold(0.0, f64::max);
            }
            MechanismKind::FirstPrice => payments[w] = scores[w],
            other => {
                return Err(Error::config(
                    "/mechanism",
                    format!("{other} is not a deterministic single-item mechanism"),
                ))
            }
        }
        Ok(Outcome {
            winners: vec![Some(w)],
            payments,
            diagnostics: vec![ItemDiagnostics {
                scores,
                critical_bid: critical,
            }],
        })
    }

    /// Random-sampling Vickrey for a fixed split; `in_b[i]` puts agent `i`
    /// in the competing side `B`. Each `i` in `B` is scored by its value with
    /// `A`'s bids, its own bid and the rest of `B` zeroed; the winner pays
    /// its full value at its threshold bid.
    pub fn run_rsv(&self, bids: &[f64], in_b: &[bool]) -> Result<Outcome> {
        self.check_bids(bids)?;
        if in_b.len() != self.n() {
            return Err(Error::Shape("split must name every agent".into()));
        }
        let n = self.n();
        let mask = in_b
            .iter()
            .enumerate()
            .fold(0u64, |m, (i, &b)| if b { m | (1 << i) } else { m });
        let scores: Vec<f64> = (0..n)
            .map(|i| {
                if in_b[i] {
                    self.rsv_score(i, bids, mask, bids[i])
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let mut payments = vec![0.0; n];
        let (winner, critical) = match self.rsv_winner(&scores) {
            None => (None, None),
            Some(w) => {
                let t = self.rsv_threshold(w, bids, mask, &scores);
                let mut at = bids.to_vec();
                at[w] = t;
                payments[w] = self.model.value(w, 0, &at);
                (Some(w), Some(t))
            }
        };
        Ok(Outcome {
            winners: vec![winner],
            payments,
            diagnostics: vec![ItemDiagnostics {
                scores: scores
                    .iter()
                    .map(|&x| if x.is_finite() { x } else { 0.0 })
                    .collect(),
                critical_bid: critical,
            }],
        })
    }

    fn rsv_score(&self, i: usize, bids: &[f64], mask: u64, b: f64) -> f64 {
        let col: Vec<f64> = (0..self.n())
            .map(|j| {
                if j == i {
                    b
                } else if mask >> j & 1 == 1 {
                    0.0
                } else {
                    bids[j]
                }
            })
            .collect();
        self.model.value(i, 0, &col)
    }

    fn rsv_winner(&self, scores: &[f64]) -> Option<usize> {
        argmax_lowest(scores).filter(|&w| scores[w] > f64::NEG_INFINITY)
    }

    /// Least bid with which `w` still wins the split `mask`; competitors'
    /// scores do not depend on `w`'s bid.
    fn rsv_threshold(&self, w: usize, bids: &[f64], mask: u64, scores: &[f64]) -> f64 {
        let beats = |b: f64| {
            let z = self.rsv_score(w, bids, mask, b);
            scores
                .iter()
                .enumerate()
                .all(|(j, &s)| j == w || if j < w { z > s } else { z >= s })
        };
        let grid = self.grid(w, 0);
        let b = bids[w];
        let first = (0..grid.len()).find(|&k| grid.point(k) <= b && beats(grid.point(k)));
        let bisect = |mut lo: f64, mut hi: f64| {
            for _ in 0..200 {
                if hi - lo <= 1e-12 * hi.abs().max(1.0) {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if beats(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        };
        match first {
            Some(0) => grid.point(0),
            Some(k) => bisect(grid.point(k - 1), grid.point(k)),
            None => match (0..grid.len()).rev().find(|&k| grid.point(k) < b) {
                Some(k) => bisect(grid.point(k), b),
                None => b,
            },
        }
    }

    /// Exact expectation of random-sampling Vickrey over all `2^n` splits,
    /// with welfare measured at the true signals `s`.
    pub fn rsv_expectation(&self, bids: &[f64], s: &[f64]) -> Result<RsvExpectation> {
        self.check_bids(bids)?;
        let n = self.n();
        if n > MAX_RSV_AGENTS {
            return Err(Error::InvalidModel(format!(
                "exact random-sampling expectation needs n <= {MAX_RSV_AGENTS}"
            )));
        }
        let truth = self.model.values(0, s);
        let lot = self.rsv_lottery(bids);
        let expected_welfare = lot.win.iter().zip(&truth).map(|(p, v)| p * v).sum();
        Ok(RsvExpectation {
            win_prob: lot.win,
            expected_payment: lot.pay,
            expected_welfare,
            opt: truth.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        })
    }

    fn rsv_lottery(&self, bids: &[f64]) -> Lottery {
        let n = self.n();
        let mut win = vec![0.0; n];
        let mut pay = vec![0.0; n];
        let splits = 1u64 << n;
        let p = 1.0 / splits as f64;
        let mut scores = vec![f64::NEG_INFINITY; n];
        for mask in 0..splits {
            for i in 0..n {
                scores[i] = if mask >> i & 1 == 1 {
                    self.rsv_score(i, bids, mask, bids[i])
                } else {
                    f64::NEG_INFINITY
                };
            }
            if let Some(w) = self.rsv_winner(&scores) {
                let t = self.rsv_threshold(w, bids, mask, &scores);
                let mut at = bids.to_vec();
                at[w] = t;
                win[w] += p;
                pay[w] += p * self.model.value(w, 0, &at);
            }
        }
        Lottery { win, pay }
    }

    /// Expected allocation and payments of any single-item mechanism.
    pub fn lottery(&self, bids: &[f64]) -> Result<Lottery> {
        self.check_bids(bids)?;
        let n = self.n();
        match &self.kind {
            MechanismKind::Gva | MechanismKind::SecondPrice | MechanismKind::FirstPrice => {
                let out = self.run_single(bids)?;
                let mut win = vec![0.0; n];
                if let Some(w) = out.winners[0] {
                    win[w] = 1.0;
                }
                Ok(Lottery {
                    win,
                    pay: out.payments,
                })
            }
            MechanismKind::RandomSamplingVickrey => {
                if n > MAX_RSV_AGENTS {
                    return Err(Error::InvalidModel(format!(
                        "exact random-sampling expectation needs n <= {MAX_RSV_AGENTS}"
                    )));
                }
                Ok(self.rsv_lottery(bids))
            }
            MechanismKind::Proportional => Ok(proportional(bids)),
            MechanismKind::Mixture { inner, eps } => {
                let inner = Auction {
                    model: self.model,
                    kind: (**inner).clone(),
                    grids: self.grids.clone(),
                    cache: RefCell::new(std::mem::take(&mut *self.cache.borrow_mut())),
                };
                let a = inner.lottery(bids);
                *self.cache.borrow_mut() = inner.cache.into_inner();
                let a = a?;
                let b = proportional(bids);
                Ok(Lottery {
                    win: (0..n)
                        .map(|i| (1.0 - eps) * a.win[i] + eps * b.win[i])
                        .collect(),
                    pay: (0..n).map(|i| (1.0 - eps) * a.pay[i]).collect(),
                })
            }
            other => Err(Error::config(
                "/mechanism",
                format!("{other} is a multi-item mechanism"),
            )),
        }
    }

    /// Expected utility of agent `i` under `bids` when the true signals are `s`.
    pub fn utility(&self, i: usize, bids: &[f64], s: &[f64]) -> Result<f64> {
        let lot = self.lottery(bids)?;
        Ok(lot.utility(i, self.model.value(i, 0, s)))
    }
}

/// Proportional allocation `b_i / (sum_j b_j + 1)` with no payments.
pub fn proportional(bids: &[f64]) -> Lottery {
    let total: f64 = bids.iter().sum::<f64>() + 1.0;
    Lottery {
        win: bids.iter().map(|b| b / total).collect(),
        pay: vec![0.0; bids.len()],
    }
}
