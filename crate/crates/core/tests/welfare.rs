use proptest::prelude::*;

use ivauctions::equilibrium::{BidRule, Mode, Prior, StrategyProfile, Target, VerifyConfig};
use ivauctions::mechanisms::{Auction, MechanismKind};
use ivauctions::valuation::{Family, SignalProfile, ValuationModel};
use ivauctions::welfare::{
    asymmetry_d, brute_force_matching, decompose_self_other, max_weight_matching, opt, poa_report,
    truncated_opt,
};
use ivauctions::Error;

fn constant(bids: &[f64]) -> StrategyProfile {
    StrategyProfile {
        agents: bids.iter().map(|&bid| BidRule::Constant { bid }).collect(),
    }
}

fn linear_multi(w: Vec<Vec<f64>>, m: usize) -> ValuationModel {
    let n = w.len();
    ValuationModel::new(
        Family::LinearWeighted {
            weights: vec![w],
            offsets: vec![vec![0.0; n]],
        },
        n,
        m,
    )
    .unwrap()
    .with_steps(4)
}

#[test]
fn matching_examples() {
    let id = max_weight_matching(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
    assert_eq!(id.value, 2.0);
    assert_eq!(id.edges, vec![(0, 0), (1, 1)]);
    assert_eq!(
        max_weight_matching(&[vec![2.0, 1.0], vec![2.0, 1.0]]).value,
        3.0
    );
}

#[test]
fn optimal_welfare_examples() {
    let lb = ValuationModel::lower_bound_case2(100.0, 3.0, 0.01);
    let o = opt(&lb, &SignalProfile::single(vec![1.0; 3])).unwrap();
    assert!((o - 300.01).abs() < 1e-9, "{o}");

    let bad = ValuationModel::single(Family::BadExample1 { eps: 0.01 }, 20).unwrap();
    let o = opt(&bad, &SignalProfile::single(vec![1.0; 20])).unwrap();
    assert!((o - 20.01).abs() < 1e-9, "{o}");
}

#[test]
fn private_values_have_no_other_part() {
    let model = linear_multi(
        vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 0.5],
        ],
        2,
    );
    let prior = Prior::new(vec![
        (
            SignalProfile::from_rows(vec![vec![1.0, 0.25], vec![0.5, 0.5], vec![0.75, 1.0]])
                .unwrap(),
            0.5,
        ),
        (SignalProfile::filled(3, 2, 0.5), 0.5),
    ])
    .unwrap();
    let d = decompose_self_other(&model, &prior).unwrap();
    assert!(d.other.abs() < 1e-12, "{d:?}");
    assert!((d.self_part - d.opt_tilde).abs() < 1e-12);
}

#[test]
fn common_term_has_almost_no_self_part() {
    let w = (0..3)
        .map(|i| (0..3).map(|j| if i == j { 1e-6 } else { 1.0 }).collect())
        .collect();
    let model = linear_multi(w, 2);
    let d = decompose_self_other(&model, &Prior::point(SignalProfile::filled(3, 2, 1.0))).unwrap();
    assert!(d.self_part < 1e-5, "{d:?}");
    assert!((d.self_part + d.other - d.opt_tilde).abs() < 1e-9);
}

#[test]
fn tilde_opt_gap_grows_with_items() {
    // At s_0 = 1 and every other signal 0 the truncated optimum keeps only
    // agent 0's item, while OPT also collects (m - 1)(1 - eps).
    let (m, eps) = (10, 0.1);
    let model = ValuationModel::new(Family::TildeOptFar { eps }, m + 1, m).unwrap();
    let mut s = SignalProfile::filled(m + 1, m, 0.0);
    for l in 0..m {
        s.set(0, l, 1.0);
    }
    let d = asymmetry_d(&model, &Prior::point(s)).unwrap();
    assert!(
        (d - (1.0 + (m - 1) as f64 * (1.0 - eps))).abs() < 1e-9,
        "{d}"
    );
}

#[test]
fn lower_bound_price_of_anarchy() {
    let s = SignalProfile::single(vec![1.0; 3]);
    let cases = [
        (
            ValuationModel::lower_bound_case1(100.0, 2.0, 0.01),
            200.01 / 101.0,
        ),
        (
            ValuationModel::lower_bound_case2(100.0, 3.0, 0.01),
            300.01 / 101.0,
        ),
    ];
    for (model, want) in cases {
        let a = Auction::new(&model, MechanismKind::Gva);
        let rep = poa_report(
            &a,
            &constant(&[0.0, 1.0, 1.0]),
            Mode::Pne,
            &Target::Point(s.clone()),
            &Prior::point(s.clone()),
            &VerifyConfig::default(),
        )
        .unwrap();
        assert!((rep.ratio - want).abs() < 1e-9, "{} vs {want}", rep.ratio);
    }
}

#[test]
fn non_equilibria_are_rejected() {
    let model = ValuationModel::lower_bound_case1(100.0, 2.0, 0.01);
    let s = SignalProfile::single(vec![1.0; 3]);
    let a = Auction::new(&model, MechanismKind::FirstPrice);
    let err = poa_report(
        &a,
        &StrategyProfile::truthful(3),
        Mode::Pne,
        &Target::Point(s.clone()),
        &Prior::point(s),
        &VerifyConfig::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::NotEquilibrium { .. }), "{err}");
}

proptest! {
    #[test]
    fn matching_agrees_with_enumeration(
        n in 1usize..6,
        m in 1usize..6,
        cells in prop::collection::vec(0u8..5, 36),
    ) {
        // Small integer weights make ties common.
        let w: Vec<Vec<f64>> = (0..n).map(|i| (0..m).map(|l| cells[6 * i + l] as f64).collect()).collect();
        let fast = max_weight_matching(&w);
        let slow = brute_force_matching(&w);
        prop_assert_eq!(fast.value, slow.value);
        prop_assert_eq!(fast.edges, slow.edges);
    }

    #[test]
    fn truncated_optimum_is_below_optimum(
        cells in prop::collection::vec(0usize..5, 6),
        w in prop::collection::vec(0.0f64..2.0, 9),
    ) {
        let mut w: Vec<Vec<f64>> = w.chunks(3).map(|r| r.to_vec()).collect();
        for (i, row) in w.iter_mut().enumerate() {
            row[i] += 0.5;
        }
        let model = linear_multi(w, 2);
        let s = SignalProfile::new(3, 2, cells.iter().map(|&k| k as f64 / 4.0).collect()).unwrap();
        let t = truncated_opt(&model, &s).unwrap();
        let o = opt(&model, &s).unwrap();
        prop_assert!(t <= o + 1e-12);
        let d = decompose_self_other(&model, &Prior::point(s)).unwrap();
        prop_assert!((d.self_part + d.other - t).abs() < 1e-9);
        prop_assert!(d.self_part >= -1e-12 && d.other >= -1e-12);
    }
}
