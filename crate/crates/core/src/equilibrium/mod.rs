//! Equilibrium verification over finite bid grids.
//!
//! Strategies map signals to bids (and, for simultaneous auctions, to
//! participation). A profile is checked as a pure Nash equilibrium at one
//! signal profile, as an ex-post equilibrium over a signal grid, or as a
//! Bayes-Nash equilibrium under a discrete prior with exact expectations.

mod lemmas;
mod scan;
mod strategy;
mod verify;

pub use lemmas::{check_allin_lemma, check_smoothness_single, AllInCheck, SmoothnessCheck};
pub use scan::{
    multi_item_scan, no_pne_certificate, scan_profiles, single_item_scan, NoPneCertificate,
    ProfileScan,
};
pub use strategy::{BidRule, MultiRule, MultiStrategyProfile, Prior, StrategyProfile};
pub use verify::{
    best_response_gain, best_response_gain_multi, check_nob, check_nob_multi, multi_deviations,
    verify, verify_multi, Deviation, EquilibriumReport, Mode, NobReport, Target, VerifyConfig,
};
