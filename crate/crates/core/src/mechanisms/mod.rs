//! Auction mechanisms: single-item GVA, second- and first-price auctions,
//! random-sampling Vickrey, proportional allocation and mixtures, and the
//! simultaneous per-item auctions for unit-demand bidders.

mod multi;
mod single;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use multi::{multi_utility, won_value, MultiReport};
pub use single::proportional;
pub use single::{Auction, AuctionSpec, Lottery, RsvExpectation};

/// The mechanisms this crate implements.
#[derive(Clone, Debug, PartialEq)]
pub enum MechanismKind {
    /// Generalized VCG: highest value at the reported signals wins and pays
    /// its value at its critical bid.
    Gva,
    /// Highest value wins and pays the highest other value.
    SecondPrice,
    /// Highest value wins and pays its own value.
    FirstPrice,
    /// Random-sampling Vickrey with a uniform split of the agents.
    RandomSamplingVickrey,
    /// Agent `i` wins with probability `b_i / (sum_j b_j + 1)` and pays nothing.
    Proportional,
    /// With probability `1 - eps` run `inner`, otherwise the proportional auction.
    Mixture { inner: Box<MechanismKind>, eps: f64 },
    /// Per-item second-price auction on privatized values among participants.
    SimPrivatizedSpa,
    /// Per-item second-price auction on full values, every agent in every item.
    SimSecondPriceMandatory,
}

impl MechanismKind {
    pub fn is_multi(&self) -> bool {
        matches!(
            self,
            MechanismKind::SimPrivatizedSpa | MechanismKind::SimSecondPriceMandatory
        )
    }

    pub fn is_randomized(&self) -> bool {
        matches!(
            self,
            MechanismKind::RandomSamplingVickrey
                | MechanismKind::Proportional
                | MechanismKind::Mixture { .. }
        )
    }

    /// Whether the mechanism reads the participation matrix.
    pub fn uses_participation(&self) -> bool {
        matches!(self, MechanismKind::SimPrivatizedSpa)
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            MechanismKind::Gva => f.write_str("gva"),
            MechanismKind::SecondPrice => f.write_str("second_price"),
            MechanismKind::FirstPrice => f.write_str("first_price"),
            MechanismKind::RandomSamplingVickrey => f.write_str("rsv"),
            MechanismKind::Proportional => f.write_str("proportional"),
            MechanismKind::Mixture { inner, eps } => write!(f, "mixture:{inner}:{eps}"),
            MechanismKind::SimPrivatizedSpa => f.write_str("sim_privatized_spa"),
            MechanismKind::SimSecondPriceMandatory => f.write_str("sim_spa_mandatory"),
        }
    }
}

impl FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("/mechanism", format!("unknown mechanism '{s}'"));
        Ok(match s {
            "gva" => MechanismKind::Gva,
            "second_price" | "spa" | "2pa" => MechanismKind::SecondPrice,
            "first_price" | "fpa" => MechanismKind::FirstPrice,
            "rsv" | "random_sampling_vickrey" => MechanismKind::RandomSamplingVickrey,
            "proportional" => MechanismKind::Proportional,
            "sim_privatized_spa" => MechanismKind::SimPrivatizedSpa,
            "sim_spa_mandatory" | "sim_second_price_mandatory" => {
                MechanismKind::SimSecondPriceMandatory
            }
            _ => {
                let rest = s.strip_prefix("mixture:").ok_or_else(bad)?;
                let (inner, eps) = rest.rsplit_once(':').ok_or_else(bad)?;
                let eps: f64 = eps.parse().map_err(|_| bad())?;
                if !(0.0..=1.0).contains(&eps) {
                    return Err(Error::config(
                        "/mechanism",
                        "mixture eps must lie in [0, 1]",
                    ));
                }
                let inner: MechanismKind = inner.parse()?;
                if inner.is_multi() {
                    return Err(Error::config(
                        "/mechanism",
                        "mixture needs a single-item inner mechanism",
                    ));
                }
                MechanismKind::Mixture {
                    inner: Box::new(inner),
                    eps,
                }
            }
        })
    }
}

impl Serialize for MechanismKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for MechanismKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Reported bids and, for multi-item auctions, participation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BidProfile {
    /// `n x m` bids; single-item profiles have one column.
    pub bids: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participation: Option<Vec<Vec<bool>>>,
}

impl BidProfile {
    pub fn single(b: &[f64]) -> Self {
        BidProfile {
            bids: b.iter().map(|&x| vec![x]).collect(),
            participation: None,
        }
    }

    /// The single-item bid vector, if every row has one entry.
    pub fn as_single(&self) -> Option<Vec<f64>> {
        self.bids
            .iter()
            .map(|r| (r.len() == 1).then(|| r[0]))
            .collect()
    }
}

/// Per-item diagnostics of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemDiagnostics {
    /// The values the allocation rule compared, one per agent.
    pub scores: Vec<f64>,
    /// Critical bid of the winner, when the payment rule uses one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critical_bid: Option<f64>,
}

/// Allocation and payments of a deterministic run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    /// Winner of each item, if any.
    pub winners: Vec<Option<usize>>,
    /// Total payment of each agent.
    pub payments: Vec<f64>,
    pub diagnostics: Vec<ItemDiagnostics>,
}

/// Index of the largest entry, ties to the lowest index.
pub fn argmax_lowest(xs: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in xs.iter().enumerate() {
        match best {
            Some(b) if x <= xs[b] => {}
            _ => best = Some(i),
        }
    }
    best
}
