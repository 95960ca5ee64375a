use std::f64::consts::PI;

use proptest::prelude::*;

use ivauctions::valuation::{
    check_property, estimate_c, estimate_gamma, Family, GridConfig, Property, SignalProfile,
    SignalSpace, ValuationModel,
};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

fn cfg() -> GridConfig {
    GridConfig::with_steps(8)
}

#[test]
fn wallet_value_is_the_sum() {
    let m = ValuationModel::wallet(3)
        .with_spaces(vec![SignalSpace::new(0.0, 3.0, 12).unwrap(); 3])
        .unwrap();
    let v = m
        .eval(1, &SignalProfile::single(vec![1.0, 2.0, 3.0]), None)
        .unwrap();
    assert_eq!(v, 6.0);
}

#[test]
fn lower_bound_case2_middle_agent() {
    let m = ValuationModel::lower_bound_case2(100.0, 3.0, 0.01);
    let v = m
        .eval(1, &SignalProfile::single(vec![1.0; 3]), None)
        .unwrap();
    assert!(close(v, 101.0, 1e-12), "{v}");
}

#[test]
fn sine_pair_at_two_pi() {
    let m = ValuationModel::sine_pair();
    let v = m
        .eval(0, &SignalProfile::single(vec![2.0 * PI; 2]), None)
        .unwrap();
    assert!(close(v, 8.0 * PI, 1e-12), "{v}");
}

#[test]
fn eval_rejects_bad_input() {
    let m = ValuationModel::wallet(3);
    assert!(m
        .eval(3, &SignalProfile::single(vec![0.0; 3]), None)
        .is_err());
    assert!(m
        .eval(0, &SignalProfile::single(vec![0.0, 5.0, 0.0]), None)
        .is_err());
    assert!(m
        .eval(0, &SignalProfile::single(vec![0.0; 2]), None)
        .is_err());
}

#[test]
fn single_crossing_estimates() {
    let cases = [
        (ValuationModel::lower_bound_case1(100.0, 2.0, 0.01), 2.0),
        (ValuationModel::wallet(3), 1.0),
        (ValuationModel::lower_bound_case2(100.0, 3.0, 0.01), 1.0),
    ];
    for (m, want) in cases {
        let r = estimate_c(&m, &cfg());
        let got = r.estimate.unwrap();
        assert!(close(got, want, 1e-9), "{}: c = {got}", m.family().name());
    }
}

#[test]
fn heterogeneity_estimates() {
    let cases = [
        (ValuationModel::wallet(3), 1.0),
        (ValuationModel::lower_bound_case2(100.0, 3.0, 0.01), 3.0),
        (ValuationModel::lower_bound_case1(100.0, 2.0, 0.01), 1.0),
    ];
    for (m, want) in cases {
        let r = estimate_gamma(&m, &cfg());
        let got = r.estimate.unwrap();
        assert!(
            close(got, want, 1e-9),
            "{}: gamma = {got}",
            m.family().name()
        );
    }
}

#[test]
fn wallet_has_homogeneous_influence() {
    let r = check_property(
        &ValuationModel::wallet(3),
        &Property::HomogeneousInfluence,
        &cfg(),
    );
    assert!(r.pass);
}

#[test]
fn difference_bound_on_case2() {
    let m = ValuationModel::lower_bound_case2(100.0, 3.0, 0.01);
    let r = check_property(&m, &Property::LemmaDiffBound { gamma: 3.0, c: 1.0 }, &cfg());
    assert!(r.pass, "margin {}", r.margin);
}

#[test]
fn product_cross_is_not_submodular() {
    let m = ValuationModel::single(Family::ProductCross, 3).unwrap();
    let r = check_property(&m, &Property::Submodular, &cfg());
    assert!(!r.pass);
    assert!(r.witness.is_some());
}

#[test]
fn privatized_values() {
    let resale = ValuationModel::new(Family::ResaleStyle { alpha: 0.5 }, 2, 1).unwrap();
    assert_eq!(resale.privatized_value(0, 0, 2.0), 2.0);
    assert_eq!(
        resale.privatized_value(1, 0, 0.0),
        resale.value(1, 0, &[0.0, 0.0])
    );
    let bins = ValuationModel::new(Family::BallsAndBins, 3, 2).unwrap();
    assert_eq!(bins.privatized_value(0, 1, 1.0), 2.0);
}

#[test]
fn truncated_values() {
    let w = ValuationModel::wallet(3);
    assert_eq!(w.truncated_value(0, 0, &[1.0, 2.0, 3.0]).unwrap(), 3.0);
    let pc = ValuationModel::single(Family::ProductCross, 3).unwrap();
    for j in 1..3 {
        assert_eq!(pc.truncated_value(j, 0, &[1.0; 3]).unwrap(), 0.0);
    }
    let lone = ValuationModel::wallet(1);
    assert!(lone.truncated_value(0, 0, &[0.5]).is_err());
}

fn families() -> Vec<ValuationModel> {
    vec![
        ValuationModel::wallet(3),
        ValuationModel::lower_bound_case1(100.0, 2.0, 0.01),
        ValuationModel::lower_bound_case2(100.0, 3.0, 0.01),
        ValuationModel::single(Family::ResaleStyle { alpha: 0.4 }, 3).unwrap(),
        ValuationModel::single(Family::BadExample1 { eps: 0.01 }, 4).unwrap(),
        ValuationModel::linear(vec![
            vec![2.0, 0.5, 0.1],
            vec![0.3, 1.5, 0.2],
            vec![0.0, 0.4, 1.0],
        ])
        .unwrap(),
    ]
}

/// A random grid point of every agent's space.
fn point(m: &ValuationModel, picks: &[usize]) -> Vec<f64> {
    (0..m.n())
        .map(|i| {
            let pts = m.space(i, 0).points();
            pts[picks[i] % pts.len()]
        })
        .collect()
}

#[test]
fn declared_parameters_cover_estimates() {
    for m in families() {
        let d = m.declared();
        let c = estimate_c(&m, &cfg()).estimate.unwrap();
        let g = estimate_gamma(&m, &cfg()).estimate.unwrap();
        if let Some(dc) = d.c {
            assert!(
                dc >= c - 1e-9,
                "{}: declared c {dc} < {c}",
                m.family().name()
            );
        }
        if let Some(dg) = d.gamma {
            assert!(
                dg >= g - 1e-9,
                "{}: declared gamma {dg} < {g}",
                m.family().name()
            );
        }
    }
}

proptest! {
    #[test]
    fn values_are_monotone(
        which in 0usize..6,
        picks in prop::collection::vec(0usize..64, 4),
        agent in 0usize..4,
        up in 0usize..4,
    ) {
        let m = &families()[which];
        let (i, k) = (agent % m.n(), up % m.n());
        let s = point(m, &picks);
        let space = m.space(k, 0);
        let mut t = s.clone();
        t[k] = (t[k] + space.step()).min(space.points().last().copied().unwrap());
        let (a, b) = (m.value(i, 0, &s), m.value(i, 0, &t));
        prop_assert!(b >= a - 1e-12, "v_{i} fell from {a} to {b} raising s_{k}");
    }

    #[test]
    fn truncation_never_raises(picks in prop::collection::vec(0usize..64, 4), agent in 0usize..3) {
        for m in families() {
            let i = agent % m.n();
            let s = point(&m, &picks);
            prop_assert!(m.truncated_value(i, 0, &s).unwrap() <= m.value(i, 0, &s) + 1e-12);
        }
    }
}
