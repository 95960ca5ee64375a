use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mechanisms::{multi_utility, Auction, MultiReport};
use crate::valuation::SignalProfile;

/// Utilities and deviation gains of every pure profile of a finite game.
///
/// Profiles are numbered in mixed radix with agent 0 most significant.
#[derive(Clone, Debug)]
pub struct ProfileScan {
    pub sizes: Vec<usize>,
    /// `utilities[p * n + i]`.
    pub utilities: Vec<f64>,
    /// Largest gain any agent obtains by a unilateral deviation from `p`.
    pub gains: Vec<f64>,
}

impl ProfileScan {
    pub fn n(&self) -> usize {
        self.sizes.len()
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn decode(&self, mut p: usize) -> Vec<usize> {
        let mut idx = vec![0; self.n()];
        for j in (0..self.n()).rev() {
            idx[j] = p % self.sizes[j];
            p /= self.sizes[j];
        }
        idx
    }

    /// Profiles whose largest deviation gain is at most `eps`.
    pub fn equilibria(&self, eps: f64) -> Vec<usize> {
        (0..self.len()).filter(|&p| self.gains[p] <= eps).collect()
    }

    /// Profile with the smallest largest gain, ties to the lowest index.
    pub fn min_gain(&self) -> (usize, f64) {
        self.gains.iter().enumerate().fold(
            (0, f64::INFINITY),
            |a, (p, &g)| if g < a.1 { (p, g) } else { a },
        )
    }
}

/// Builds the utility table with `util(state, profile) -> utilities` and
/// derives each profile's best unilateral gain.
pub fn scan_profiles<S, I, F>(sizes: Vec<usize>, init: I, util: F) -> Result<ProfileScan>
where
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, &[usize]) -> Result<Vec<f64>> + Sync + Send,
{
    let n = sizes.len();
    let total: usize = sizes.iter().product();
    let decode = |mut p: usize| {
        let mut idx = vec![0; n];
        for j in (0..n).rev() {
            idx[j] = p % sizes[j];
            p /= sizes[j];
        }
        idx
    };
    let rows: Vec<Vec<f64>> = (0..total)
        .into_par_iter()
        .map_init(init, |st, p| util(st, &decode(p)))
        .collect::<Result<_>>()?;
    let utilities: Vec<f64> = rows.into_iter().flatten().collect();
    let mut gains = vec![0.0_f64; total];
    let mut stride = 1;
    for i in (0..n).rev() {
        let size = sizes[i];
        for p in 0..total {
            if (p / stride) % size != 0 {
                continue;
            }
            let best = (0..size)
                .map(|d| utilities[(p + d * stride) * n + i])
                .fold(f64::NEG_INFINITY, f64::max);
            for d in 0..size {
                let q = p + d * stride;
                gains[q] = gains[q].max(best - utilities[q * n + i]);
            }
        }
        stride *= size;
    }
    Ok(ProfileScan {
        sizes,
        utilities,
        gains,
    })
}

/// All single-item bid profiles on per-agent bid lists at true signals `s`.
pub fn single_item_scan(
    auction: &Auction,
    s: &[f64],
    bid_lists: &[Vec<f64>],
) -> Result<ProfileScan> {
    let n = auction.n();
    let sizes = bid_lists.iter().map(|b| b.len()).collect();
    let truth = auction.model.values(0, s);
    let spec = auction.spec();
    scan_profiles(
        sizes,
        move || spec.build(),
        |auc, idx| {
            let bids: Vec<f64> = idx
                .iter()
                .enumerate()
                .map(|(i, &k)| bid_lists[i][k])
                .collect();
            let lot = auc.lottery(&bids)?;
            Ok((0..n).map(|i| lot.utility(i, truth[i])).collect())
        },
    )
}

/// All multi-item report profiles on per-agent report lists at signals `s`.
pub fn multi_item_scan(
    auction: &Auction,
    s: &SignalProfile,
    reports: &[Vec<MultiReport>],
) -> Result<ProfileScan> {
    let n = auction.n();
    let sizes = reports.iter().map(|r| r.len()).collect();
    let spec = auction.spec();
    scan_profiles(
        sizes,
        move || spec.build(),
        |auc, idx| {
            let reps: Vec<MultiReport> = idx
                .iter()
                .enumerate()
                .map(|(i, &k)| reports[i][k].clone())
                .collect();
            let out = auc.run_multi(&reps)?;
            Ok((0..n)
                .map(|i| multi_utility(auc.model, &out, i, s))
                .collect())
        },
    )
}

/// Certificate that no bid profile of a grid is an `eps`-PNE.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoPneCertificate {
    pub profiles: u64,
    /// Smallest over profiles of the largest deviation gain.
    #[serde(with = "crate::json")]
    pub min_max_gain: f64,
    /// Profile attaining `min_max_gain`.
    pub argmin: Vec<f64>,
    /// Number of profiles that are `eps`-PNE.
    pub equilibria: u64,
    pub eps: f64,
}

/// Scans every profile of the bid lists at signals `s` and reports the
/// smallest largest gain.
pub fn no_pne_certificate(
    auction: &Auction,
    s: &[f64],
    bid_lists: &[Vec<f64>],
    eps: f64,
) -> Result<NoPneCertificate> {
    let scan = single_item_scan(auction, s, bid_lists)?;
    let (p, g) = scan.min_gain();
    let argmin = scan
        .decode(p)
        .iter()
        .enumerate()
        .map(|(i, &k)| bid_lists[i][k])
        .collect();
    Ok(NoPneCertificate {
        profiles: scan.len() as u64,
        min_max_gain: g,
        argmin,
        equilibria: scan.equilibria(eps).len() as u64,
        eps,
    })
}
