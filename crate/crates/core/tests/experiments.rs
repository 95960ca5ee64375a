use serde_json::json;

use ivauctions::experiments::{montecarlo_weighted_sum, reproduce, ExperimentSpec};

#[test]
fn participation_necessity_ratio() {
    let rep = reproduce(&ExperimentSpec::new("participation_necessity")).unwrap();
    assert!(rep.pass, "{:?}", rep.checks);
    let r = rep.get("ratio").unwrap().measured;
    assert!((r - 105.5 / 11.0).abs() < 1e-9, "{r}");
    assert!(r >= 9.0);
}

#[test]
fn lower_bound_case2_ratio_window() {
    let spec = ExperimentSpec::new("single_lb_case2")
        .param("beta", 1e4)
        .param("gamma", 3.0)
        .param("eps", 0.01);
    let rep = reproduce(&spec).unwrap();
    assert!(rep.pass);
    let r = rep.get("ratio_exact").unwrap().measured;
    assert!((2.99..=3.0).contains(&r), "{r}");
}

#[test]
fn epic_sqrt_n_ratio() {
    let rep = reproduce(&ExperimentSpec::new("epic_sqrt_n").param("n", 16)).unwrap();
    assert!(rep.pass);
    assert!((rep.get("ratio").unwrap().measured - 16.01 / 4.0).abs() < 1e-6);
}

#[test]
fn weighted_sum_stays_under_the_bound() {
    let bound = 1.0 + std::f64::consts::E.powi(2);
    for n in [2, 10] {
        let rep = montecarlo_weighted_sum(n, 1.0, 500, 3).unwrap();
        let d = rep.get("d").unwrap().measured;
        assert!(d <= bound, "n = {n}: {d}");
        assert!(d >= 1.0 - 1e-9);
    }
}

#[test]
fn reports_are_deterministic() {
    let spec = ExperimentSpec::new("weighted_sum_mhr")
        .param("trials", 300)
        .param("seed", 11);
    let a = serde_json::to_string(&reproduce(&spec).unwrap()).unwrap();
    let b = serde_json::to_string(&reproduce(&spec).unwrap()).unwrap();
    assert_eq!(a, b);
    let other = ExperimentSpec::new("weighted_sum_mhr")
        .param("trials", 300)
        .param("seed", 12);
    let c = serde_json::to_string(&reproduce(&other).unwrap()).unwrap();
    assert_ne!(a, c);
}

#[test]
fn bad_specs_are_rejected() {
    assert!(reproduce(&ExperimentSpec::new("no_such_experiment")).is_err());
    assert!(reproduce(&ExperimentSpec::new("epic_sqrt_n").param("colour", "red")).is_err());
    assert!(reproduce(&ExperimentSpec::new("epic_sqrt_n").param("n", 1000)).is_err());
    assert!(reproduce(&ExperimentSpec::new("epic_sqrt_n").param("n", json!("many"))).is_err());
}
