use std::f64::consts::PI;

use proptest::prelude::*;

use ivauctions::equilibrium::{
    best_response_gain, check_nob, check_smoothness_single, verify, BidRule, Mode, Prior,
    StrategyProfile, Target, VerifyConfig,
};
use ivauctions::mechanisms::{Auction, MechanismKind};
use ivauctions::valuation::{Family, SignalProfile, SignalSpace, ValuationModel};

fn constant(bids: &[f64]) -> StrategyProfile {
    StrategyProfile {
        agents: bids.iter().map(|&bid| BidRule::Constant { bid }).collect(),
    }
}

fn linear3() -> ValuationModel {
    ValuationModel::linear(vec![
        vec![2.0, 0.5, 0.1],
        vec![0.3, 1.5, 0.2],
        vec![0.0, 0.4, 1.0],
    ])
    .unwrap()
    .with_steps(4)
}

#[test]
fn no_overbidding_checks() {
    let m = ValuationModel::wallet(3).with_steps(10);
    assert!(check_nob(&m, &StrategyProfile::truthful(3)).unwrap().pass);

    let shifted = StrategyProfile {
        agents: vec![
            BidRule::Affine {
                scale: 1.0,
                shift: 0.1
            };
            3
        ],
    };
    let r = check_nob(&m, &shifted).unwrap();
    assert!(!r.pass);
    assert!((r.margin + 0.1).abs() < 1e-12, "{}", r.margin);

    let lb = ValuationModel::lower_bound_case1(100.0, 2.0, 0.01);
    let space = SignalSpace::singleton(1.0);
    let lb = lb.with_spaces(vec![space; 3]).unwrap();
    assert!(check_nob(&lb, &constant(&[0.0, 1.0, 1.0])).unwrap().pass);
}

#[test]
fn vickrey_truth_telling_has_no_gain() {
    let m = ValuationModel::linear(vec![vec![1.0, 0.0], vec![0.0, 1.0]])
        .unwrap()
        .with_steps(10);
    let a = Auction::new(&m, MechanismKind::Gva);
    for i in 0..2 {
        let (g, _) = best_response_gain(&a, i, &[0.3, 0.7], &[0.3, 0.7], false).unwrap();
        assert!(g <= 1e-12, "agent {i} gains {g}");
    }
}

#[test]
fn case1_profile_is_a_pure_equilibrium() {
    let m = ValuationModel::lower_bound_case1(100.0, 2.0, 0.01);
    let a = Auction::new(&m, MechanismKind::Gva);
    for i in 0..3 {
        let (g, _) = best_response_gain(&a, i, &[1.0; 3], &[0.0, 1.0, 1.0], true).unwrap();
        assert!(g <= 1e-9, "agent {i} gains {g}");
    }
    let rep = verify(
        &a,
        &constant(&[0.0, 1.0, 1.0]),
        Mode::Pne,
        &Target::Point(SignalProfile::single(vec![1.0; 3])),
        &VerifyConfig::default(),
    )
    .unwrap();
    assert!(rep.pass, "{rep:?}");
}

#[test]
fn bad_examples_are_ex_post_equilibria() {
    let n = 6;
    let cfg = VerifyConfig {
        context_steps: Some(2),
        ..Default::default()
    };
    let m = ValuationModel::single(Family::BadExample1 { eps: 0.01 }, n)
        .unwrap()
        .with_steps(4);
    let mut bids = vec![0.0; n];
    bids[0] = 1.0;
    bids[1] = 1.0;
    let a = Auction::new(&m, MechanismKind::Gva);
    let rep = verify(&a, &constant(&bids), Mode::Epe, &Target::Grid, &cfg).unwrap();
    assert!(rep.pass, "{rep:?}");

    let m = ValuationModel::single(Family::BadExample2 { eps: 0.01 }, n)
        .unwrap()
        .with_steps(4);
    let mut agents = vec![BidRule::Constant { bid: 0.0 }; n];
    agents[0] = BidRule::Truthful;
    agents[1] = BidRule::Truthful;
    let a = Auction::new(&m, MechanismKind::Gva);
    let rep = verify(
        &a,
        &StrategyProfile { agents },
        Mode::Epe,
        &Target::Grid,
        &cfg,
    )
    .unwrap();
    assert!(rep.pass, "{rep:?}");
}

#[test]
fn truthful_gva_is_ex_post_under_single_crossing() {
    let m = linear3();
    let a = Auction::new(&m, MechanismKind::Gva);
    let sigma = StrategyProfile::truthful(3);
    let rep = verify(
        &a,
        &sigma,
        Mode::Epe,
        &Target::Grid,
        &VerifyConfig::default(),
    )
    .unwrap();
    assert!(rep.pass, "{rep:?}");
    let pts: Vec<Vec<(f64, f64)>> = (0..3)
        .map(|i| {
            m.space(i, 0)
                .points()
                .into_iter()
                .map(|x| (x, 0.2))
                .collect()
        })
        .collect();
    let prior = Prior::product(&pts).unwrap();
    let rep = verify(
        &a,
        &sigma,
        Mode::Bne,
        &Target::Prior(prior),
        &VerifyConfig::default(),
    )
    .unwrap();
    assert!(rep.pass, "{rep:?}");
}

#[test]
fn first_price_truth_telling_is_not_an_equilibrium() {
    let m = linear3();
    let a = Auction::new(&m, MechanismKind::FirstPrice);
    let rep = verify(
        &a,
        &StrategyProfile::truthful(3),
        Mode::Epe,
        &Target::Grid,
        &VerifyConfig::default(),
    )
    .unwrap();
    assert!(!rep.pass);
    assert!(rep.worst.is_some());
}

#[test]
fn smoothness_on_case2_profile() {
    let m = ValuationModel::lower_bound_case2(100.0, 3.0, 0.01);
    let r = check_smoothness_single(&m, 3.0, 1.0, &[1.0; 3], &[0.0, 1.0, 1.0], 1e-9).unwrap();
    assert!(r.holds);
    assert_eq!((r.agent, r.winner), (2, 1));
    assert!((r.rhs - (300.01 - 3.0 * 101.0)).abs() < 1e-9, "{}", r.rhs);

    let r = check_smoothness_single(&m, 3.0, 1.0, &[1.0; 3], &[1.0; 3], 1e-9).unwrap();
    assert!(r.holds);
}

#[test]
fn uncovered_strategy_table_is_a_configuration_error() {
    let m = linear3();
    let a = Auction::new(&m, MechanismKind::Gva);
    let sigma = StrategyProfile {
        agents: vec![
            BidRule::Table {
                space: SignalSpace::new(0.0, 1.0, 2).unwrap(),
                bids: vec![0.0, 0.5, 1.0],
            };
            3
        ],
    };
    assert!(verify(
        &a,
        &sigma,
        Mode::Epe,
        &Target::Grid,
        &VerifyConfig::default()
    )
    .is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sine_pair_loser_always_deviates(k0 in 0usize..300, k1 in 0usize..300) {
        let m = ValuationModel::sine_pair();
        let grid = SignalSpace::new(0.0, 2.0 * PI, 299).unwrap();
        let a = Auction::new(&m, MechanismKind::Gva).with_grids(vec![grid.clone(); 2]).unwrap();
        let s = [2.0 * PI; 2];
        let b = [grid.point(k0), grid.point(k1)];
        let w = a.winner(&b);
        let (g, _) = best_response_gain(&a, 1 - w, &s, &b, true).unwrap();
        prop_assert!(g > 0.5, "loser {} gains only {g} at {b:?}", 1 - w);
    }

    /// EPE implies PNE at every grid profile and BNE under any grid prior.
    #[test]
    fn equilibrium_hierarchy(
        kind in 0usize..3,
        table in prop::collection::vec(0usize..5, 15),
        weights in prop::collection::vec(0.05f64..1.0, 5),
    ) {
        let m = linear3();
        let kind = [MechanismKind::Gva, MechanismKind::SecondPrice, MechanismKind::FirstPrice][kind].clone();
        let a = Auction::new(&m, kind);
        let pts = m.space(0, 0).points();
        let sigma = StrategyProfile {
            agents: (0..3)
                .map(|i| BidRule::Table {
                    space: m.space(i, 0).clone(),
                    bids: (0..5).map(|k| pts[table[5 * i + k].min(k)]).collect(),
                })
                .collect(),
        };
        let cfg = VerifyConfig::default();
        let epe = verify(&a, &sigma, Mode::Epe, &Target::Grid, &cfg).unwrap();
        let total: f64 = weights.iter().sum();
        let marg: Vec<(f64, f64)> = pts.iter().zip(&weights).map(|(&x, &w)| (x, w / total)).collect();
        let prior = Prior::product(&[marg.clone(), marg.clone(), marg]).unwrap();
        let bne = verify(&a, &sigma, Mode::Bne, &Target::Prior(prior.clone()), &cfg).unwrap();
        if epe.pass {
            prop_assert!(bne.pass, "EPE but not BNE: {bne:?}");
            for (s, _) in prior.atoms() {
                let pne = verify(&a, &sigma, Mode::Pne, &Target::Point(s.clone()), &cfg).unwrap();
                prop_assert!(pne.pass);
            }
        }
        prop_assert!(bne.max_gain <= epe.max_gain + 1e-9);
    }
}
