use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::f64::consts::PI;

use super::family::Family;
use super::space::{SignalProfile, SignalSpace};
use crate::error::{Error, Result};

/// Default grid resolution of signal spaces.
pub const DEFAULT_STEPS: usize = 64;
/// Default numerical tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Parameters a family is known to satisfy.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Declared {
    pub gamma: Option<f64>,
    pub c: Option<f64>,
    pub submodular: bool,
}

/// A valuation family instantiated for `n` agents and `m` items, with one
/// signal space per (agent, item).
#[derive(Clone, Debug, PartialEq)]
pub struct ValuationModel {
    family: Family,
    n: usize,
    m: usize,
    spaces: Vec<SignalSpace>,
}

/// JSON form of a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: String,
    #[serde(default)]
    pub params: Map<String, Value>,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Either one space for every agent or one per agent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spaces: Option<Vec<SignalSpace>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

impl ValuationModel {
    /// Model with the family's default signal spaces at `DEFAULT_STEPS`.
    pub fn new(family: Family, n: usize, m: usize) -> Result<Self> {
        family.validate(n, m)?;
        let spaces = default_spaces(&family, n, m, DEFAULT_STEPS);
        Ok(ValuationModel {
            family,
            n,
            m,
            spaces,
        })
    }

    pub fn single(family: Family, n: usize) -> Result<Self> {
        Self::new(family, n, 1)
    }

    /// Replaces the signal spaces; `spaces` holds one entry per agent
    /// (shared across items) or one per (agent, item).
    pub fn with_spaces(mut self, spaces: Vec<SignalSpace>) -> Result<Self> {
        let full = if spaces.len() == self.n {
            let mut out = Vec::with_capacity(self.n * self.m);
            for sp in &spaces {
                for _ in 0..self.m {
                    out.push(sp.clone());
                }
            }
            out
        } else if spaces.len() == self.n * self.m {
            spaces
        } else {
            return Err(Error::Shape(format!(
                "need {} or {} signal spaces, got {}",
                self.n,
                self.n * self.m,
                spaces.len()
            )));
        };
        self.spaces = full;
        Ok(self)
    }

    /// Same spaces with a different grid resolution.
    pub fn with_steps(mut self, steps: usize) -> Self {
        for sp in &mut self.spaces {
            *sp = sp.with_steps(steps);
        }
        self
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn is_single(&self) -> bool {
        self.m == 1
    }

    pub fn space(&self, i: usize, l: usize) -> &SignalSpace {
        &self.spaces[i * self.m + l]
    }

    /// Spaces of all agents on item `l`.
    pub fn item_spaces(&self, l: usize) -> Vec<SignalSpace> {
        (0..self.n).map(|i| self.space(i, l).clone()).collect()
    }

    /// Unchecked value of agent `i` on item `l` for the signal column `s`.
    #[inline]
    pub fn value(&self, i: usize, l: usize, s: &[f64]) -> f64 {
        self.family.value(i, l, s)
    }

    /// All agents' values on item `l`.
    pub fn values(&self, l: usize, s: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i, l, s)).collect()
    }

    /// Checked evaluation of `v_i(s)` (single item) or `v_il(s_l)`.
    pub fn eval(&self, i: usize, s: &SignalProfile, item: Option<usize>) -> Result<f64> {
        if s.n() != self.n || s.m() != self.m {
            return Err(Error::Shape(format!(
                "profile is {}x{}, model is {}x{}",
                s.n(),
                s.m(),
                self.n,
                self.m
            )));
        }
        if i >= self.n {
            return Err(Error::Shape(format!("agent {i} out of range")));
        }
        let l = item.unwrap_or(0);
        if l >= self.m {
            return Err(Error::Shape(format!("item {l} out of range")));
        }
        let col = s.column(l);
        self.check_column(l, &col)?;
        Ok(self.value(i, l, &col))
    }

    /// Domain check of one item's signal column.
    pub fn check_column(&self, l: usize, col: &[f64]) -> Result<()> {
        for (j, &x) in col.iter().enumerate() {
            let sp = self.space(j, l);
            if !x.is_finite() || !sp.contains(x, DEFAULT_TOL) {
                return Err(Error::Domain {
                    agent: j,
                    item: l,
                    value: x,
                    lo: sp.lo,
                    hi: sp.hi,
                });
            }
        }
        Ok(())
    }

    /// Privatized value: agent `i` reports `b`, everybody else is zeroed.
    pub fn privatized_value(&self, i: usize, l: usize, b: f64) -> f64 {
        let mut col = vec![0.0; self.n];
        col[i] = b;
        self.value(i, l, &col)
    }

    /// Truncated value: the least value of agent `i` after zeroing the
    /// signal of any single other agent. Needs `n >= 2`.
    pub fn truncated_value(&self, i: usize, l: usize, s: &[f64]) -> Result<f64> {
        if self.n < 2 {
            return Err(Error::InvalidModel("truncated value needs n >= 2".into()));
        }
        let mut col = s.to_vec();
        let mut best = f64::INFINITY;
        for k in 0..self.n {
            if k == i {
                continue;
            }
            let keep = col[k];
            col[k] = 0.0;
            best = best.min(self.value(i, l, &col));
            col[k] = keep;
        }
        Ok(best)
    }

    /// Parameters the family satisfies by construction.
    pub fn declared(&self) -> Declared {
        let n = self.n;
        match &self.family {
            Family::LinearWeighted { weights, .. } => {
                let mut c = 0.0_f64;
                let mut gamma = 1.0_f64;
                for w in weights {
                    for i in 0..n {
                        for k in 0..n {
                            if k != i {
                                c = c.max(w[k][i] / w[i][i]);
                            }
                        }
                        for j in 0..n {
                            for jj in 0..n {
                                if j == i || jj == i || j == jj {
                                    continue;
                                }
                                let (a, b) = (w[jj][i], w[j][i]);
                                if a > 0.0 {
                                    gamma = gamma.max(if b > 0.0 { a / b } else { f64::INFINITY });
                                }
                            }
                        }
                    }
                }
                Declared {
                    gamma: Some(gamma),
                    c: Some(c),
                    submodular: true,
                }
            }
            Family::ResaleStyle { alpha } => Declared {
                gamma: Some(1.0),
                c: Some(*alpha),
                submodular: true,
            },
            Family::WalletGame
            | Family::CommonValue { .. }
            | Family::BallsAndBins
            | Family::ParticipationNecessity => Declared {
                gamma: Some(1.0),
                c: Some(1.0),
                submodular: true,
            },
            Family::SinePair => Declared {
                gamma: Some(1.0),
                c: Some(3.0),
                submodular: false,
            },
            Family::BadExample1 { .. } | Family::BadExample2 { .. } => Declared {
                gamma: Some(f64::INFINITY),
                c: Some(1.0),
                submodular: true,
            },
            Family::LowerBoundCase1 { c, .. } => Declared {
                gamma: Some(1.0),
                c: Some(*c),
                submodular: true,
            },
            Family::LowerBoundCase2 { gamma, .. } => Declared {
                gamma: Some(*gamma),
                c: Some(1.0),
                submodular: true,
            },
            Family::RsvExample { c } => Declared {
                gamma: Some(if n > 2 { f64::INFINITY } else { 1.0 }),
                c: Some(*c),
                submodular: true,
            },
            Family::TildeOptFar { eps } => Declared {
                gamma: Some(1.0),
                c: Some(1.0 - eps),
                submodular: true,
            },
            Family::WeightedSum { alpha, beta } => Declared {
                gamma: Some(if n > 2 { 2.0 } else { 1.0 }),
                c: Some(2.0 * beta / (alpha + beta)),
                submodular: true,
            },
            Family::ProductCross | Family::Custom { .. } => Declared::default(),
        }
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let m = spec
            .m
            .unwrap_or_else(|| default_items(&spec.family, spec.n));
        let family = Family::from_params(&spec.family, &spec.params, spec.n)?;
        let mut model = ValuationModel::new(family, spec.n, m)?;
        if let Some(spaces) = &spec.spaces {
            let spaces = if spaces.len() == 1 && spec.n > 1 {
                vec![spaces[0].clone(); spec.n]
            } else {
                spaces.clone()
            };
            for sp in &spaces {
                SignalSpace::new(sp.lo, sp.hi, sp.steps)
                    .map_err(|e| Error::config("/model/spaces", e.to_string()))?;
            }
            model = model
                .with_spaces(spaces)
                .map_err(|e| Error::config("/model/spaces", e.to_string()))?;
        }
        if let Some(steps) = spec.steps {
            if steps == 0 {
                return Err(Error::config("/model/steps", "must be positive"));
            }
            model = model.with_steps(steps);
        }
        Ok(model)
    }

    /// Canonical spec: all parameters and spaces explicit.
    pub fn to_spec(&self) -> ModelSpec {
        let per_agent_shared =
            (0..self.n).all(|i| (0..self.m).all(|l| self.space(i, l) == self.space(i, 0)));
        let spaces = if per_agent_shared {
            (0..self.n).map(|i| self.space(i, 0).clone()).collect()
        } else {
            self.spaces.clone()
        };
        ModelSpec {
            family: self.family.name().to_string(),
            params: self.family.params(),
            n: self.n,
            m: Some(self.m),
            spaces: Some(spaces),
            steps: None,
        }
    }
}

fn default_items(family: &str, n: usize) -> usize {
    match family {
        "balls_and_bins" => n * n,
        "weighted_sum" | "participation_necessity" => n,
        "tilde_opt_far" => n.saturating_sub(1).max(1),
        _ => 1,
    }
}

fn default_spaces(family: &Family, n: usize, m: usize, steps: usize) -> Vec<SignalSpace> {
    let per_agent: Vec<SignalSpace> = (0..n)
        .map(|i| match family {
            Family::SinePair => SignalSpace {
                lo: 0.0,
                hi: 3.0 * PI,
                steps,
            },
            Family::BadExample1 { .. } if i < 2 => SignalSpace::singleton(1.0),
            Family::TildeOptFar { .. } if i > 0 => SignalSpace::singleton(0.0),
            _ => SignalSpace::unit(steps),
        })
        .collect();
    let mut out = Vec::with_capacity(n * m);
    for sp in per_agent {
        for _ in 0..m {
            out.push(sp.clone());
        }
    }
    out
}

/// Shorthand constructors for the named instances.
impl ValuationModel {
    pub fn lower_bound_case1(beta: f64, c: f64, eps: f64) -> Self {
        Self::single(Family::LowerBoundCase1 { beta, c, eps }, 3).expect("valid parameters")
    }

    pub fn lower_bound_case2(beta: f64, gamma: f64, eps: f64) -> Self {
        Self::single(Family::LowerBoundCase2 { beta, gamma, eps }, 3).expect("valid parameters")
    }

    pub fn wallet(n: usize) -> Self {
        Self::single(Family::WalletGame, n).expect("valid parameters")
    }

    pub fn sine_pair() -> Self {
        Self::single(Family::SinePair, 2).expect("valid parameters")
    }

    pub fn linear(weights: Vec<Vec<f64>>) -> Result<Self> {
        let n = weights.len();
        Self::single(
            Family::LinearWeighted {
                weights: vec![weights],
                offsets: vec![vec![0.0; n]],
            },
            n,
        )
    }
}
