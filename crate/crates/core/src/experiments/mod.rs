//! Named reproductions of the constructions and probabilistic claims.
//!
//! Every experiment builds its instance from a parameter map, verifies the
//! claimed equilibrium where there is one, and reports each measured
//! quantity next to its target and tolerance.

mod montecarlo;
mod multi;
mod single;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::cell::RefCell;
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::valuation::{Family, SignalSpace, ValuationModel};

pub use montecarlo::{montecarlo_multineg, montecarlo_weighted_sum};

/// Experiment names accepted by [`reproduce`].
pub const NAMES: &[&str] = &[
    "single_lb_case1",
    "single_lb_case2",
    "spa_lb",
    "gva_poa_linear",
    "epic_sqrt_n",
    "no_pne_sine",
    "rsv_exponential",
    "proportional_mixture",
    "participation_necessity",
    "tildeopt_far",
    "ballsbins_multineg",
    "weighted_sum_mhr",
    "allin_lemma_sweep",
    "covers_lemma_sweep",
    "smoothness_sweep",
    "upper_bound_search",
    "lemma_diff_sweep",
    "multi_bound_search",
];

/// An experiment name with parameter overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

impl ExperimentSpec {
    pub fn new(name: &str) -> Self {
        ExperimentSpec {
            name: name.to_string(),
            params: Map::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }
}

/// How a measured quantity is compared with its target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `measured <= target + tol`.
    AtMost,
    /// `measured >= target - tol`.
    AtLeast,
    /// `|measured - target| <= tol`.
    Near,
}

/// One measured quantity against its target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(with = "crate::json")]
    pub measured: f64,
    pub relation: Relation,
    #[serde(with = "crate::json")]
    pub target: f64,
    #[serde(with = "crate::json")]
    pub tol: f64,
    pub pass: bool,
    /// Distance to failing; negative when the check fails.
    #[serde(with = "crate::json")]
    pub margin: f64,
}

impl Check {
    pub fn new(name: &str, measured: f64, relation: Relation, target: f64, tol: f64) -> Self {
        let margin = match relation {
            Relation::AtMost => target + tol - measured,
            Relation::AtLeast => measured - (target - tol),
            Relation::Near => tol - (measured - target).abs(),
        };
        let margin = if margin.is_nan() {
            f64::NEG_INFINITY
        } else {
            margin
        };
        Check {
            name: name.to_string(),
            measured,
            relation,
            target,
            tol,
            pass: margin >= 0.0,
            margin,
        }
    }

    /// A yes/no condition, reported as `1` against target `1`.
    pub fn flag(name: &str, ok: bool) -> Self {
        Check::new(name, if ok { 1.0 } else { 0.0 }, Relation::Near, 1.0, 0.0)
    }
}

/// Result of [`reproduce`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    /// Parameters after defaults were applied.
    pub params: Map<String, Value>,
    pub pass: bool,
    pub checks: Vec<Check>,
    /// Further measurements that have no pass/fail target.
    pub quantities: Map<String, Value>,
    /// The instance is a reconstruction rather than a construction given in full.
    pub reconstructed: bool,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    fn new(name: &str, params: Map<String, Value>) -> Self {
        ExperimentReport {
            name: name.to_string(),
            params,
            pass: true,
            checks: Vec::new(),
            quantities: Map::new(),
            reconstructed: false,
            notes: Vec::new(),
        }
    }

    fn check(&mut self, c: Check) {
        self.pass &= c.pass;
        self.checks.push(c);
    }

    fn put(&mut self, key: &str, v: impl Serialize) {
        let v = serde_json::to_value(v).unwrap_or(Value::Null);
        self.quantities.insert(key.to_string(), v);
    }

    fn put_num(&mut self, key: &str, x: f64) {
        self.quantities.insert(key.to_string(), num(x));
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// Looks up a check by name.
    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// A numeric quantity by name.
    pub fn quantity(&self, name: &str) -> Option<f64> {
        match self.quantities.get(name)? {
            Value::Number(x) => x.as_f64(),
            Value::String(s) => crate::json::parse_ext(s),
            _ => None,
        }
    }
}

/// JSON number, with non-finite values as strings.
pub(crate) fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .unwrap_or_else(|| Value::String(crate::json::fmt_ext(x)))
}

/// Parameter access with defaults, range checks and detection of unknown
/// keys. Resolved values are recorded for the report.
pub(crate) struct Params {
    given: Map<String, Value>,
    resolved: RefCell<Map<String, Value>>,
    seen: RefCell<BTreeSet<String>>,
}

impl Params {
    fn new(given: &Map<String, Value>) -> Self {
        Params {
            given: given.clone(),
            resolved: RefCell::new(Map::new()),
            seen: RefCell::new(BTreeSet::new()),
        }
    }

    fn raw(&self, key: &str) -> Option<&Value> {
        self.seen.borrow_mut().insert(key.to_string());
        self.given.get(key)
    }

    pub fn f64(&self, key: &str, default: f64, lo: f64, hi: f64) -> Result<f64> {
        let x = match self.raw(key) {
            None => default,
            Some(Value::Number(x)) => x.as_f64().unwrap_or(f64::NAN),
            Some(Value::String(s)) => s.parse().map_err(|_| bad_param(key, "not a number"))?,
            Some(_) => return Err(bad_param(key, "not a number")),
        };
        if !(x >= lo && x <= hi) {
            return Err(bad_param(key, &format!("{x} outside [{lo}, {hi}]")));
        }
        self.resolved.borrow_mut().insert(key.to_string(), num(x));
        Ok(x)
    }

    pub fn u64(&self, key: &str, default: u64, lo: u64, hi: u64) -> Result<u64> {
        let x = match self.raw(key) {
            None => default,
            Some(Value::Number(x)) => x
                .as_u64()
                .ok_or_else(|| bad_param(key, "not a non-negative integer"))?,
            Some(Value::String(s)) => s
                .parse()
                .map_err(|_| bad_param(key, "not a non-negative integer"))?,
            Some(_) => return Err(bad_param(key, "not a non-negative integer")),
        };
        if x < lo || x > hi {
            return Err(bad_param(key, &format!("{x} outside [{lo}, {hi}]")));
        }
        self.resolved.borrow_mut().insert(key.to_string(), x.into());
        Ok(x)
    }

    pub fn usize(&self, key: &str, default: usize, lo: usize, hi: usize) -> Result<usize> {
        Ok(self.u64(key, default as u64, lo as u64, hi as u64)? as usize)
    }

    pub fn bool(&self, key: &str, default: bool) -> Result<bool> {
        let x = match self.raw(key) {
            None => default,
            Some(Value::Bool(b)) => *b,
            Some(Value::String(s)) if s == "true" => true,
            Some(Value::String(s)) if s == "false" => false,
            Some(_) => return Err(bad_param(key, "not a boolean")),
        };
        self.resolved.borrow_mut().insert(key.to_string(), x.into());
        Ok(x)
    }

    pub fn string(&self, key: &str, default: &str, allowed: &[&str]) -> Result<String> {
        let x = match self.raw(key) {
            None => default.to_string(),
            Some(Value::String(s)) => s.clone(),
            Some(_) => return Err(bad_param(key, "not a string")),
        };
        if !allowed.contains(&x.as_str()) {
            return Err(bad_param(key, &format!("'{x}' is not one of {allowed:?}")));
        }
        self.resolved
            .borrow_mut()
            .insert(key.to_string(), x.clone().into());
        Ok(x)
    }

    /// Fails on parameters the experiment did not read.
    pub fn finish(&self) -> Result<Map<String, Value>> {
        let seen = self.seen.borrow();
        if let Some(k) = self.given.keys().find(|k| !seen.contains(*k)) {
            return Err(bad_param(k, "unknown parameter"));
        }
        Ok(self.resolved.borrow().clone())
    }
}

fn bad_param(key: &str, msg: &str) -> Error {
    Error::config(format!("/params/{key}"), msg)
}

/// Runs the named experiment.
pub fn reproduce(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let p = Params::new(&spec.params);
    match spec.name.as_str() {
        "single_lb_case1" => single::lower_bound(&p, 1),
        "single_lb_case2" => single::lower_bound(&p, 2),
        "spa_lb" => single::spa_lb(&p),
        "gva_poa_linear" => single::gva_poa_linear(&p),
        "epic_sqrt_n" => single::epic_sqrt_n(&p),
        "no_pne_sine" => single::no_pne_sine(&p),
        "rsv_exponential" => single::rsv_exponential(&p),
        "proportional_mixture" => single::proportional_mixture(&p),
        "upper_bound_search" => single::upper_bound_search(&p),
        "smoothness_sweep" => single::smoothness_sweep(&p),
        "lemma_diff_sweep" => single::lemma_diff_sweep(&p),
        "participation_necessity" => multi::participation_necessity(&p),
        "tildeopt_far" => multi::tildeopt_far(&p),
        "allin_lemma_sweep" => multi::allin_lemma_sweep(&p),
        "covers_lemma_sweep" => multi::covers_lemma_sweep(&p),
        "multi_bound_search" => multi::multi_bound_search(&p),
        "ballsbins_multineg" => montecarlo::ballsbins(&p),
        "weighted_sum_mhr" => montecarlo::weighted_sum(&p),
        other => Err(Error::UnknownExperiment(other.to_string())),
    }
}

/// Random linear model with positive own weights and cross weights in
/// `[0.1, 2]`. With `sc`, every agent's signal moves the others' values by
/// at most its own weight, and by exactly its own weight for one agent, so
/// the single-crossing parameter is one.
pub(crate) fn random_linear(
    rng: &mut ChaCha8Rng,
    n: usize,
    m: usize,
    steps: usize,
    sc: bool,
) -> ValuationModel {
    let weights: Vec<Vec<Vec<f64>>> = (0..m)
        .map(|_| {
            let own: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
            let mut w = vec![vec![0.0; n]; n];
            for i in 0..n {
                w[i][i] = own[i];
                let tight = if n > 1 {
                    (i + 1 + rng.gen_range(0..n - 1)) % n
                } else {
                    i
                };
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    // w[j][i]: effect of agent i's signal on agent j.
                    w[j][i] = if sc {
                        if j == tight {
                            own[i]
                        } else {
                            rng.gen_range(0.1..=1.0) * own[i]
                        }
                    } else {
                        rng.gen_range(0.1..2.0)
                    };
                }
            }
            w
        })
        .collect();
    ValuationModel::new(
        Family::LinearWeighted {
            weights,
            offsets: vec![vec![0.0; n]],
        },
        n,
        m,
    )
    .expect("valid random instance")
    .with_steps(steps)
}

/// Random grid point of a space.
pub(crate) fn grid_point(rng: &mut ChaCha8Rng, sp: &SignalSpace) -> f64 {
    sp.point(rng.gen_range(0..sp.len()))
}

/// `max(gamma, c)` from the model's declared parameters.
pub(crate) fn declared_max(model: &ValuationModel) -> Result<(f64, f64)> {
    let d = model.declared();
    match (d.gamma, d.c) {
        (Some(g), Some(c)) => Ok((g, c)),
        _ => Err(Error::InvalidModel(format!(
            "{} does not declare gamma and c",
            model.family().name()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_names_and_params() {
        assert!(matches!(
            reproduce(&ExperimentSpec::new("nope")),
            Err(Error::UnknownExperiment(_))
        ));
        let err =
            reproduce(&ExperimentSpec::new("single_lb_case1").param("betta", 3.0)).unwrap_err();
        assert!(matches!(err, Error::Config { ref pointer, .. } if pointer == "/params/betta"));
        let err =
            reproduce(&ExperimentSpec::new("single_lb_case1").param("beta", -1.0)).unwrap_err();
        assert!(matches!(err, Error::Config { ref pointer, .. } if pointer == "/params/beta"));
    }

    #[test]
    fn check_relations() {
        assert!(Check::new("a", 1.0, Relation::AtMost, 1.0, 0.0).pass);
        assert!(!Check::new("a", 1.1, Relation::AtMost, 1.0, 0.05).pass);
        assert!(Check::new("a", 0.96, Relation::AtLeast, 1.0, 0.05).pass);
        assert!(Check::new("a", 2.0, Relation::Near, 2.0 + 1e-9, 1e-6).pass);
        assert!(!Check::new("a", f64::NAN, Relation::Near, 1.0, 1.0).pass);
    }
}
