use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::{argmax_lowest, multi_utility, Auction, MechanismKind, MultiReport};
use crate::valuation::{SignalProfile, ValuationModel};

/// Both sides of the single-item smoothness inequality
/// `u_i((s_i, b_-i); s) >= v_i(s) - max(gamma, c) v_w(b)(s)` with `i` the
/// highest-value agent at `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessCheck {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub agent: usize,
    pub winner: usize,
}

/// Checks smoothness of GVA at signals `s` and bids `b`, with critical bids
/// searched on the model's signal grids.
pub fn check_smoothness_single(
    model: &ValuationModel,
    gamma: f64,
    c: f64,
    s: &[f64],
    b: &[f64],
    tol: f64,
) -> Result<SmoothnessCheck> {
    if s.len() != model.n() || b.len() != model.n() {
        return Err(Error::Shape(
            "signals and bids must name every agent".into(),
        ));
    }
    let auction = Auction::new(model, MechanismKind::Gva);
    let truth = model.values(0, s);
    let i = argmax_lowest(&truth).expect("at least one agent");
    let w = auction.winner(b);
    let mut dev = b.to_vec();
    dev[i] = s[i];
    let lhs = auction.lottery(&dev)?.utility(i, truth[i]);
    let rhs = truth[i] - gamma.max(c) * truth[w];
    Ok(SmoothnessCheck {
        holds: lhs >= rhs - tol * truth[i].abs().max(1.0),
        lhs,
        rhs,
        agent: i,
        winner: w,
    })
}

/// Utility of the all-in deviation and the two lower bounds on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllInCheck {
    /// Utility of agent `i` after participating only in item `l` with bid `s_il`.
    pub utility: f64,
    /// `v^_il(s) - max_{j != i, a_jl = 1} v^_jl(b)`.
    pub bound_i: f64,
    /// Truncated-value bound against the current winner of item `l`.
    pub bound_ii: f64,
    pub holds_i: bool,
    pub holds_ii: bool,
}

/// Checks both all-in bounds for agent `i` and item `l` of the
/// simultaneous privatized second-price auction.
#[allow(clippy::too_many_arguments)]
pub fn check_allin_lemma(
    model: &ValuationModel,
    gamma: f64,
    c: f64,
    s: &SignalProfile,
    reports: &[MultiReport],
    i: usize,
    l: usize,
    tol: f64,
) -> Result<AllInCheck> {
    let (n, m) = (model.n(), model.m());
    if s.n() != n || s.m() != m || reports.len() != n || i >= n || l >= m {
        return Err(Error::Shape(
            "signals, reports, agent or item out of shape".into(),
        ));
    }
    let auction = Auction::new(model, MechanismKind::SimPrivatizedSpa);
    let current = auction.run_multi(reports)?;
    let mut dev = reports.to_vec();
    dev[i] = MultiReport::single_item(m, l, s.get(i, l));
    let utility = multi_utility(model, &auction.run_multi(&dev)?, i, s);

    let rival = (0..n)
        .filter(|&j| j != i && reports[j].participate[l])
        .map(|j| model.privatized_value(j, l, reports[j].bids[l]))
        .fold(0.0, f64::max);
    let bound_i = model.privatized_value(i, l, s.get(i, l)) - rival;

    let col = s.column(l);
    let tilde = model.truncated_value(i, l, &col)?;
    let bound_ii = match current.winners[l] {
        None => tilde,
        Some(j) if j == i => tilde - model.value(i, l, &col),
        Some(j) => {
            let mut at = col.clone();
            at[j] = reports[j].bids[l];
            tilde - gamma.max(c + 1.0) * model.value(j, l, &at)
        }
    };
    let slack = tol * col.iter().map(|x| x.abs()).fold(1.0, f64::max);
    Ok(AllInCheck {
        utility,
        bound_i,
        bound_ii,
        holds_i: utility >= bound_i - slack,
        holds_ii: utility >= bound_ii - slack,
    })
}
