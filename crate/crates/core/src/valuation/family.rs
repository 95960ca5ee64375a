use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// One term `coef * prod_j s_j^p_j` of a custom valuation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    /// Sparse exponents as `(agent, power)` pairs.
    #[serde(default)]
    pub powers: Vec<(usize, u32)>,
}

/// Valuation families. Every family is evaluated per item on the column of
/// signals of that item, so single-item models are the `m == 1` case.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// `v_i = a_i + sum_j W[i][j] s_j`, one matrix per item or one shared.
    LinearWeighted {
        weights: Vec<Vec<Vec<f64>>>,
        offsets: Vec<Vec<f64>>,
    },
    /// Own use plus a resale component: `v_i = s_i + alpha * sum_{j != i} s_j`.
    ResaleStyle {
        alpha: f64,
    },
    /// `v_i = sum_j s_j`.
    WalletGame,
    /// Common value `v_i = sum_j w_j s_j`.
    CommonValue {
        weights: Vec<f64>,
    },
    /// Two agents, `sin(s1 + s2 (+ pi)) + 2 (s1 + s2)`.
    SinePair,
    BadExample1 {
        eps: f64,
    },
    BadExample2 {
        eps: f64,
    },
    LowerBoundCase1 {
        beta: f64,
        c: f64,
        eps: f64,
    },
    LowerBoundCase2 {
        beta: f64,
        gamma: f64,
        eps: f64,
    },
    RsvExample {
        c: f64,
    },
    /// Multi-item: `v_il = 1 + sum_j s_jl`.
    BallsAndBins,
    /// `v = s_0 s_1 + s_0 s_2` for every agent.
    ProductCross,
    /// Multi-item: `v_0l = s_0l`, `v_il = (1 - eps) s_0l + s_il`.
    TildeOptFar {
        eps: f64,
    },
    /// Multi-item: `alpha s_il + beta sum_j s_jl + beta max_{j != i} s_jl`.
    WeightedSum {
        alpha: f64,
        beta: f64,
    },
    /// Multi-item: `v_0l = sum_j s_jl + 1`, `v_il = sum_j s_jl + 1/2`.
    ParticipationNecessity,
    /// Per-agent sums of monomials, shared across items.
    Custom {
        terms: Vec<Vec<Monomial>>,
    },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::LinearWeighted { .. } => "linear_weighted",
            Family::ResaleStyle { .. } => "resale_style",
            Family::WalletGame => "wallet_game",
            Family::CommonValue { .. } => "common_value",
            Family::SinePair => "sine_pair",
            Family::BadExample1 { .. } => "bad_example1",
            Family::BadExample2 { .. } => "bad_example2",
            Family::LowerBoundCase1 { .. } => "lower_bound_case1",
            Family::LowerBoundCase2 { .. } => "lower_bound_case2",
            Family::RsvExample { .. } => "rsv_example",
            Family::BallsAndBins => "balls_and_bins",
            Family::ProductCross => "product_cross",
            Family::TildeOptFar { .. } => "tilde_opt_far",
            Family::WeightedSum { .. } => "weighted_sum",
            Family::ParticipationNecessity => "participation_necessity",
            Family::Custom { .. } => "custom",
        }
    }

    /// Value of agent `i` on item `l` given that item's signal column.
    /// No domain checks; zeroed coordinates may lie outside signal spaces.
    pub fn value(&self, i: usize, l: usize, s: &[f64]) -> f64 {
        let n = s.len();
        match self {
            Family::LinearWeighted { weights, offsets } => {
                let w = &weights[if weights.len() == 1 { 0 } else { l }];
                let a = &offsets[if offsets.len() == 1 { 0 } else { l }];
                let mut v = a[i];
                for (wj, sj) in w[i].iter().zip(s) {
                    v += wj * sj;
                }
                v
            }
            Family::ResaleStyle { alpha } => {
                let others: f64 = s.iter().sum::<f64>() - s[i];
                s[i] + alpha * others
            }
            Family::WalletGame => s.iter().sum(),
            Family::CommonValue { weights } => weights.iter().zip(s).map(|(w, x)| w * x).sum(),
            Family::SinePair => {
                let x = s[0] + s[1];
                if i == 0 {
                    x.sin() + 2.0 * x
                } else {
                    (x + PI).sin() + 2.0 * x
                }
            }
            Family::BadExample1 { eps } => match i {
                0 => s.iter().sum::<f64>() + eps,
                1 => 2.0 * (s[1] + eps),
                _ => s[i],
            },
            Family::BadExample2 { eps } => match i {
                0 => s.iter().sum::<f64>() + eps,
                1 => (n as f64).sqrt() * s[1],
                _ => s[i],
            },
            Family::LowerBoundCase1 { beta, c, eps } => match i {
                0 => beta * s[0] + 1.0,
                _ => c * beta * s[0] + eps * s[i],
            },
            Family::LowerBoundCase2 { beta, gamma, eps } => match i {
                0 => gamma * beta * s[0],
                1 => beta * s[0] + s[1],
                _ => gamma * beta * s[0] + eps * s[i],
            },
            Family::RsvExample { c } => {
                if i == 0 {
                    s[0] + c * s[1..].iter().sum::<f64>()
                } else {
                    s[i] + 2.0 * (i + 1) as f64
                }
            }
            Family::BallsAndBins => 1.0 + s.iter().sum::<f64>(),
            Family::ProductCross => s[0] * s[1] + s[0] * s[2],
            Family::TildeOptFar { eps } => {
                if i == 0 {
                    s[0]
                } else {
                    (1.0 - eps) * s[0] + s[i]
                }
            }
            Family::WeightedSum { alpha, beta } => {
                let total: f64 = s.iter().sum();
                let top = s
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &x)| x)
                    .fold(0.0_f64, f64::max);
                alpha * s[i] + beta * total + beta * top
            }
            Family::ParticipationNecessity => {
                let total: f64 = s.iter().sum();
                if i == 0 {
                    total + 1.0
                } else {
                    total + 0.5
                }
            }
            Family::Custom { terms } => terms[i]
                .iter()
                .map(|t| {
                    t.powers
                        .iter()
                        .fold(t.coef, |acc, &(j, p)| acc * s[j].powi(p as i32))
                })
                .sum(),
        }
    }

    /// Checks that the parameters fit `n` agents and `m` items.
    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        let exact = |k: usize| {
            if n != k {
                Err(Error::InvalidModel(format!(
                    "{} needs exactly {k} agents, got {n}",
                    self.name()
                )))
            } else {
                Ok(())
            }
        };
        if n == 0 || m == 0 {
            return bad("need at least one agent and one item".into());
        }
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match self {
            Family::LinearWeighted { weights, offsets } => {
                if weights.is_empty() || (weights.len() != 1 && weights.len() != m) {
                    return bad("weights need one matrix or one per item".into());
                }
                if offsets.is_empty() || (offsets.len() != 1 && offsets.len() != m) {
                    return bad("offsets need one vector or one per item".into());
                }
                for w in weights {
                    if w.len() != n || w.iter().any(|r| r.len() != n || !finite(r)) {
                        return bad(format!("weights must be {n}x{n} finite"));
                    }
                    if w.iter().flatten().any(|&x| x < 0.0) {
                        return bad("weights must be non-negative".into());
                    }
                    if (0..n).any(|i| w[i][i] <= 0.0) {
                        return bad("own weights must be positive".into());
                    }
                }
                if offsets.iter().any(|a| a.len() != n || !finite(a)) {
                    return bad(format!("offsets must have length {n}"));
                }
                Ok(())
            }
            Family::ResaleStyle { alpha } => {
                if !(alpha.is_finite() && *alpha >= 0.0) {
                    return bad("alpha must be non-negative".into());
                }
                Ok(())
            }
            Family::CommonValue { weights } => {
                if weights.len() != n || weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
                    return bad(format!("common_value needs {n} positive weights"));
                }
                Ok(())
            }
            Family::SinePair => exact(2),
            Family::LowerBoundCase1 { beta, c, eps } => {
                if !(*beta > 0.0 && *c >= 1.0 && *eps > 0.0) {
                    return bad("need beta > 0, c >= 1, eps > 0".into());
                }
                exact(3)
            }
            Family::LowerBoundCase2 { beta, gamma, eps } => {
                if !(*beta > 0.0 && *gamma >= 1.0 && *eps > 0.0) {
                    return bad("need beta > 0, gamma >= 1, eps > 0".into());
                }
                exact(3)
            }
            Family::ProductCross => exact(3),
            Family::BadExample1 { eps } | Family::BadExample2 { eps } => {
                if n < 3 {
                    return bad("bad examples need n >= 3".into());
                }
                if !(*eps > 0.0) {
                    return bad("eps must be positive".into());
                }
                Ok(())
            }
            Family::RsvExample { c } => {
                if n < 2 || !(*c > 0.0) {
                    return bad("rsv_example needs n >= 2 and c > 0".into());
                }
                Ok(())
            }
            Family::TildeOptFar { eps } => {
                if n < 2 || !(*eps >= 0.0 && *eps < 1.0) {
                    return bad("tilde_opt_far needs n >= 2 and eps in [0, 1)".into());
                }
                Ok(())
            }
            Family::WeightedSum { alpha, beta } => {
                if n < 2 || !(*alpha >= 0.0 && *beta > 0.0) {
                    return bad("weighted_sum needs n >= 2, alpha >= 0, beta > 0".into());
                }
                Ok(())
            }
            Family::Custom { terms } => {
                if terms.len() != n {
                    return bad(format!("custom needs terms for {n} agents"));
                }
                if terms
                    .iter()
                    .flatten()
                    .any(|t| t.powers.iter().any(|&(j, _)| j >= n))
                {
                    return bad("custom term references a missing agent".into());
                }
                Ok(())
            }
            Family::WalletGame | Family::BallsAndBins | Family::ParticipationNecessity => Ok(()),
        }
    }

    /// Parameters with defaults filled in, as a JSON object.
    pub fn params(&self) -> Map<String, Value> {
        let v = match self {
            Family::LinearWeighted { weights, offsets } => {
                json!({"weights": weights, "offsets": offsets})
            }
            Family::ResaleStyle { alpha } => json!({ "alpha": alpha }),
            Family::CommonValue { weights } => json!({ "weights": weights }),
            Family::BadExample1 { eps } | Family::BadExample2 { eps } => json!({ "eps": eps }),
            Family::LowerBoundCase1 { beta, c, eps } => json!({"beta": beta, "c": c, "eps": eps}),
            Family::LowerBoundCase2 { beta, gamma, eps } => {
                json!({"beta": beta, "gamma": gamma, "eps": eps})
            }
            Family::RsvExample { c } => json!({ "c": c }),
            Family::TildeOptFar { eps } => json!({ "eps": eps }),
            Family::WeightedSum { alpha, beta } => json!({"alpha": alpha, "beta": beta}),
            Family::Custom { terms } => json!({ "terms": terms }),
            Family::WalletGame
            | Family::SinePair
            | Family::BallsAndBins
            | Family::ProductCross
            | Family::ParticipationNecessity => json!({}),
        };
        match v {
            Value::Object(map) => map,
            _ => unreachable!(),
        }
    }

    /// Builds a family from its name and JSON parameters. Missing numeric
    /// parameters take the defaults of the worked examples.
    pub fn from_params(name: &str, params: &Map<String, Value>, n: usize) -> Result<Family> {
        let num = |key: &str, default: f64| -> Result<f64> {
            match params.get(key) {
                None => Ok(default),
                Some(v) => v.as_f64().ok_or_else(|| {
                    Error::config(format!("/model/params/{key}"), "expected a number")
                }),
            }
        };
        let parse = |key: &str| -> Result<Option<Value>> { Ok(params.get(key).cloned()) };
        let fam = match name {
            "linear_weighted" => {
                let w = parse("weights")?
                    .ok_or_else(|| Error::config("/model/params/weights", "required"))?;
                let weights: Vec<Vec<Vec<f64>>> =
                    match serde_json::from_value::<Vec<Vec<f64>>>(w.clone()) {
                        Ok(single) => vec![single],
                        Err(_) => serde_json::from_value(w).map_err(|e| {
                            Error::config("/model/params/weights", format!("expected matrix: {e}"))
                        })?,
                    };
                let offsets: Vec<Vec<f64>> = match parse("offsets")? {
                    None => vec![vec![0.0; n]],
                    Some(o) => match serde_json::from_value::<Vec<f64>>(o.clone()) {
                        Ok(single) => vec![single],
                        Err(_) => serde_json::from_value(o).map_err(|e| {
                            Error::config("/model/params/offsets", format!("expected vector: {e}"))
                        })?,
                    },
                };
                Family::LinearWeighted { weights, offsets }
            }
            "resale_style" => Family::ResaleStyle {
                alpha: num("alpha", 0.5)?,
            },
            "wallet_game" => Family::WalletGame,
            "common_value" => {
                let weights = match parse("weights")? {
                    None => vec![1.0; n],
                    Some(w) => serde_json::from_value(w).map_err(|e| {
                        Error::config("/model/params/weights", format!("expected vector: {e}"))
                    })?,
                };
                Family::CommonValue { weights }
            }
            "sine_pair" => Family::SinePair,
            "bad_example1" => Family::BadExample1 {
                eps: num("eps", 0.01)?,
            },
            "bad_example2" => Family::BadExample2 {
                eps: num("eps", 0.01)?,
            },
            "lower_bound_case1" => Family::LowerBoundCase1 {
                beta: num("beta", 100.0)?,
                c: num("c", 2.0)?,
                eps: num("eps", 0.01)?,
            },
            "lower_bound_case2" => Family::LowerBoundCase2 {
                beta: num("beta", 100.0)?,
                gamma: num("gamma", 3.0)?,
                eps: num("eps", 0.01)?,
            },
            "rsv_example" => Family::RsvExample {
                c: num("c", 2048.0)?,
            },
            "balls_and_bins" => Family::BallsAndBins,
            "product_cross" => Family::ProductCross,
            "tilde_opt_far" => Family::TildeOptFar {
                eps: num("eps", 0.1)?,
            },
            "weighted_sum" => Family::WeightedSum {
                alpha: num("alpha", 0.0)?,
                beta: num("beta", 1.0)?,
            },
            "participation_necessity" => Family::ParticipationNecessity,
            "custom" => {
                let t = parse("terms")?
                    .ok_or_else(|| Error::config("/model/params/terms", "required"))?;
                let terms = serde_json::from_value(t).map_err(|e| {
                    Error::config("/model/params/terms", format!("expected terms: {e}"))
                })?;
                Family::Custom { terms }
            }
            other => {
                return Err(Error::config(
                    "/model/family",
                    format!("unknown family '{other}'"),
                ))
            }
        };
        Ok(fam)
    }
}
