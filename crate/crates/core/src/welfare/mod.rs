//! Welfare benchmarks: optimal and truncated-optimal welfare, the SELF/OTHER
//! split of the truncated optimum, the asymmetry ratio `d` and price of
//! anarchy reports for verified equilibria.

mod matching;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{
    verify, verify_multi, EquilibriumReport, Mode, MultiStrategyProfile, Prior, StrategyProfile,
    Target, VerifyConfig,
};
use crate::error::{Error, Result};
use crate::mechanisms::{won_value, Auction};
use crate::valuation::{SignalProfile, ValuationModel};

pub use matching::{brute_force_matching, max_weight_matching, max_weight_value, Matching};

/// `W[i][l] = v_il(s_l)`.
pub fn value_matrix(model: &ValuationModel, s: &SignalProfile) -> Vec<Vec<f64>> {
    let cols: Vec<Vec<f64>> = (0..model.m()).map(|l| s.column(l)).collect();
    (0..model.n())
        .map(|i| {
            (0..model.m())
                .map(|l| model.value(i, l, &cols[l]))
                .collect()
        })
        .collect()
}

/// `W[i][l] = ~v_il(s_l)`.
pub fn truncated_matrix(model: &ValuationModel, s: &SignalProfile) -> Result<Vec<Vec<f64>>> {
    let cols: Vec<Vec<f64>> = (0..model.m()).map(|l| s.column(l)).collect();
    (0..model.n())
        .map(|i| {
            (0..model.m())
                .map(|l| model.truncated_value(i, l, &cols[l]))
                .collect()
        })
        .collect()
}

fn check_shape(model: &ValuationModel, s: &SignalProfile) -> Result<()> {
    if s.n() != model.n() || s.m() != model.m() {
        return Err(Error::Shape(format!(
            "signals are {}x{}, model is {}x{}",
            s.n(),
            s.m(),
            model.n(),
            model.m()
        )));
    }
    Ok(())
}

/// Optimal welfare: the highest value for one item, a maximum-weight
/// unit-demand matching for several.
pub fn opt(model: &ValuationModel, s: &SignalProfile) -> Result<f64> {
    check_shape(model, s)?;
    if model.is_single() {
        return Ok(model
            .values(0, s.as_single())
            .into_iter()
            .fold(0.0, f64::max));
    }
    Ok(max_weight_value(&value_matrix(model, s)))
}

/// Optimal welfare with respect to truncated values.
pub fn truncated_opt(model: &ValuationModel, s: &SignalProfile) -> Result<f64> {
    check_shape(model, s)?;
    Ok(max_weight_value(&truncated_matrix(model, s)?))
}

/// The SELF/OTHER split of the truncated optimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// Expected privatized value of the truncated-optimal matching.
    #[serde(rename = "self")]
    pub self_part: f64,
    pub other: f64,
    pub opt_tilde: f64,
}

/// Splits `E[OPT~]` into the privatized part of the canonical truncated
/// matching and the remainder.
pub fn decompose_self_other(model: &ValuationModel, prior: &Prior) -> Result<Decomposition> {
    let mut out = Decomposition {
        self_part: 0.0,
        other: 0.0,
        opt_tilde: 0.0,
    };
    for (s, p) in prior.atoms() {
        check_shape(model, s)?;
        let mm = max_weight_matching(&truncated_matrix(model, s)?);
        let own: f64 = mm
            .edges
            .iter()
            .map(|&(i, l)| model.privatized_value(i, l, s.get(i, l)))
            .sum();
        out.self_part += p * own;
        out.other += p * (mm.value - own);
        out.opt_tilde += p * mm.value;
    }
    Ok(out)
}

/// `a / b` with `x / 0 = inf` for `x > 0` and `0 / 0 = 1`.
pub fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else if a > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Exact `d = E[OPT] / E[OPT~]` over a discrete prior.
pub fn asymmetry_d(model: &ValuationModel, prior: &Prior) -> Result<f64> {
    let (mut o, mut t) = (0.0, 0.0);
    for (s, p) in prior.atoms() {
        o += p * opt(model, s)?;
        t += p * truncated_opt(model, s)?;
    }
    Ok(ratio(o, t))
}

/// Signal distributions for sampled expectations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalDistribution {
    /// Uniform on each signal space.
    Uniform,
    /// i.i.d. exponential signals.
    Exponential { rate: f64 },
    /// i.i.d. Bernoulli signals.
    Bernoulli { p: f64 },
}

impl SignalDistribution {
    pub fn sample<R: Rng>(&self, model: &ValuationModel, rng: &mut R) -> Result<SignalProfile> {
        let (n, m) = (model.n(), model.m());
        let mut data = Vec::with_capacity(n * m);
        match self {
            SignalDistribution::Uniform => {
                for i in 0..n {
                    for l in 0..m {
                        let sp = model.space(i, l);
                        data.push(if sp.is_singleton() {
                            sp.lo
                        } else {
                            rng.gen_range(sp.lo..=sp.hi)
                        });
                    }
                }
            }
            SignalDistribution::Exponential { rate } => {
                let d = Exp::new(*rate)
                    .map_err(|e| Error::config("/distribution/rate", e.to_string()))?;
                data.extend((0..n * m).map(|_| d.sample(rng)));
            }
            SignalDistribution::Bernoulli { p } => {
                let d = Bernoulli::new(*p)
                    .map_err(|e| Error::config("/distribution/p", e.to_string()))?;
                data.extend((0..n * m).map(|_| if d.sample(rng) { 1.0 } else { 0.0 }));
            }
        }
        SignalProfile::new(n, m, data)
    }
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    #[serde(with = "crate::json")]
    pub mean: f64,
    #[serde(with = "crate::json")]
    pub se: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let k = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / k;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            se: (var / k).sqrt(),
        }
    }
}

/// Monte Carlo `OPT`, `OPT~` and their ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledD {
    pub opt: Estimate,
    pub opt_tilde: Estimate,
    /// Ratio of means; the standard error comes from the delta method.
    pub d: Estimate,
    pub samples: u64,
    pub seed: u64,
}

/// RNG of sample `k`: one ChaCha stream per sample so results do not depend
/// on the thread count.
pub fn sample_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Monte Carlo estimate of `d = E[OPT] / E[OPT~]`.
pub fn asymmetry_d_sampled(
    model: &ValuationModel,
    dist: &SignalDistribution,
    samples: u64,
    seed: u64,
) -> Result<SampledD> {
    if samples == 0 {
        return Err(Error::config("/samples", "need at least one sample"));
    }
    let pairs: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let s = dist.sample(model, &mut sample_rng(seed, k))?;
            Ok((opt(model, &s)?, truncated_opt(model, &s)?))
        })
        .collect::<Result<_>>()?;
    let ys: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let xs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (ey, ex) = (Estimate::from_samples(&ys), Estimate::from_samples(&xs));
    let r = ratio(ey.mean, ex.mean);
    let k = samples as f64;
    let se = if k > 1.0 && ex.mean > 0.0 {
        let cov = pairs
            .iter()
            .map(|(y, x)| (y - ey.mean) * (x - ex.mean))
            .sum::<f64>()
            / (k - 1.0);
        let (vy, vx) = ((ey.se.powi(2)) * k, (ex.se.powi(2)) * k);
        ((vy - 2.0 * r * cov + r * r * vx).max(0.0) / k).sqrt() / ex.mean
    } else {
        0.0
    };
    Ok(SampledD {
        opt: ey,
        opt_tilde: ex,
        d: Estimate { mean: r, se },
        samples,
        seed,
    })
}

/// Both sides of `max(gamma, c) ~v_jl(s) >= ~v_il(s) - v_il(s_il, 0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoversCheck {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// Whether the model declares submodularity, which the inequality needs.
    pub precondition: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn check_covers_lemma(
    model: &ValuationModel,
    gamma: f64,
    c: f64,
    s: &SignalProfile,
    i: usize,
    j: usize,
    l: usize,
    tol: f64,
) -> Result<CoversCheck> {
    check_shape(model, s)?;
    if i >= model.n() || j >= model.n() || l >= model.m() || i == j {
        return Err(Error::Shape("agents must be distinct and in range".into()));
    }
    let col = s.column(l);
    let lhs = gamma.max(c) * model.truncated_value(j, l, &col)?;
    let rhs = model.truncated_value(i, l, &col)? - model.privatized_value(i, l, col[i]);
    Ok(CoversCheck {
        holds: lhs >= rhs - tol * rhs.abs().max(1.0),
        lhs,
        rhs,
        precondition: model.declared().submodular,
    })
}

/// Welfare of a verified equilibrium against the benchmarks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelfareReport {
    #[serde(with = "crate::json")]
    pub opt: f64,
    #[serde(with = "crate::json::opt")]
    pub opt_tilde: Option<f64>,
    #[serde(with = "crate::json")]
    pub eq: f64,
    #[serde(rename = "self", with = "crate::json::opt")]
    pub self_part: Option<f64>,
    #[serde(with = "crate::json::opt")]
    pub other: Option<f64>,
    #[serde(with = "crate::json::opt")]
    pub d: Option<f64>,
    /// `OPT / EQ`.
    #[serde(with = "crate::json")]
    pub ratio: f64,
    /// `OPT~ / EQ`.
    #[serde(with = "crate::json::opt")]
    pub ratio_tilde: Option<f64>,
    /// Number of prior atoms the expectations run over.
    pub atoms: u64,
    pub equilibrium: EquilibriumReport,
}

fn reject(rep: &EquilibriumReport) -> Error {
    match &rep.worst {
        Some(d) => Error::NotEquilibrium {
            agent: d.agent,
            gain: d.gain,
            deviation: serde_json::to_string(d).unwrap_or_default(),
        },
        None => Error::NotEquilibrium {
            agent: 0,
            gain: rep.max_gain,
            deviation: String::new(),
        },
    }
}

fn assemble(
    model: &ValuationModel,
    eval: &Prior,
    eq: f64,
    equilibrium: EquilibriumReport,
) -> Result<WelfareReport> {
    let mut o = 0.0;
    for (s, p) in eval.atoms() {
        o += p * opt(model, s)?;
    }
    let dec = if model.n() >= 2 {
        Some(decompose_self_other(model, eval)?)
    } else {
        None
    };
    let t = dec.as_ref().map(|d| d.opt_tilde);
    Ok(WelfareReport {
        opt: o,
        opt_tilde: t,
        eq,
        self_part: dec.as_ref().map(|d| d.self_part),
        other: dec.as_ref().map(|d| d.other),
        d: t.map(|t| ratio(o, t)),
        ratio: ratio(o, eq),
        ratio_tilde: t.map(|t| ratio(t, eq)),
        atoms: eval.atoms().len() as u64,
        equilibrium,
    })
}

/// Expected welfare of single-item bids at signals `s`.
pub fn welfare_single(auction: &Auction, bids: &[f64], s: &[f64]) -> Result<f64> {
    let lot = auction.lottery(bids)?;
    let truth = auction.model.values(0, s);
    Ok(lot.win.iter().zip(&truth).map(|(w, v)| w * v).sum())
}

/// Unit-demand welfare of a multi-item outcome at signals `s`.
pub fn welfare_multi(
    auction: &Auction,
    s: &SignalProfile,
    reports: &[crate::mechanisms::MultiReport],
) -> Result<f64> {
    let out = auction.run_multi(reports)?;
    Ok((0..auction.n())
        .map(|i| won_value(auction.model, &out, i, s))
        .sum())
}

/// Verifies `sigma` and reports its welfare, in expectation over `eval`,
/// against the optimal benchmarks. Non-equilibria are rejected.
pub fn poa_report(
    auction: &Auction,
    sigma: &StrategyProfile,
    mode: Mode,
    target: &Target,
    eval: &Prior,
    cfg: &VerifyConfig,
) -> Result<WelfareReport> {
    let rep = verify(auction, sigma, mode, target, cfg)?;
    if !rep.pass {
        return Err(reject(&rep));
    }
    let mut eq = 0.0;
    for (s, p) in eval.atoms() {
        check_shape(auction.model, s)?;
        let bids = sigma.bids(s.as_single())?;
        eq += p * welfare_single(auction, &bids, s.as_single())?;
    }
    assemble(auction.model, eval, eq, rep)
}

/// Multi-item counterpart of [`poa_report`].
pub fn poa_report_multi(
    auction: &Auction,
    sigma: &MultiStrategyProfile,
    mode: Mode,
    target: &Target,
    eval: &Prior,
    cfg: &VerifyConfig,
) -> Result<WelfareReport> {
    let rep = verify_multi(auction, sigma, mode, target, cfg)?;
    if !rep.pass {
        return Err(reject(&rep));
    }
    let mut eq = 0.0;
    for (s, p) in eval.atoms() {
        check_shape(auction.model, s)?;
        eq += p * welfare_multi(auction, s, &sigma.reports(s)?)?;
    }
    assemble(auction.model, eval, eq, rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::MechanismKind;
    use crate::valuation::Family;

    #[test]
    fn single_item_opt() {
        let m = ValuationModel::lower_bound_case2(100.0, 3.0, 0.01);
        let s = SignalProfile::single(vec![1.0; 3]);
        assert!((opt(&m, &s).unwrap() - 300.01).abs() < 1e-9);
        let m = ValuationModel::single(Family::BadExample1 { eps: 0.01 }, 20).unwrap();
        let s = SignalProfile::single(vec![1.0; 20]);
        assert!((opt(&m, &s).unwrap() - 20.01).abs() < 1e-9);
    }

    #[test]
    fn private_values_have_no_other_part() {
        let w = vec![vec![vec![1.0, 0.0], vec![0.0, 2.0]]; 2];
        let model = ValuationModel::new(
            Family::LinearWeighted {
                weights: w,
                offsets: vec![vec![0.0; 2]; 2],
            },
            2,
            2,
        )
        .unwrap();
        let s = SignalProfile::from_rows(vec![vec![0.3, 0.9], vec![0.5, 0.2]]).unwrap();
        let dec = decompose_self_other(&model, &Prior::point(s.clone())).unwrap();
        assert!(dec.other.abs() < 1e-12);
        assert!((dec.self_part - truncated_opt(&model, &s).unwrap()).abs() < 1e-12);
        assert!((truncated_opt(&model, &s).unwrap() - opt(&model, &s).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn product_cross_breaks_covers() {
        let model = ValuationModel::single(Family::ProductCross, 3).unwrap();
        let s = SignalProfile::single(vec![1.0; 3]);
        let c = check_covers_lemma(&model, 1.0, 1.0, &s, 0, 1, 0, 1e-9).unwrap();
        assert!(!c.holds);
        assert_eq!((c.lhs, c.rhs), (0.0, 1.0));
    }

    #[test]
    fn tilde_opt_far_d() {
        let model = ValuationModel::new(Family::TildeOptFar { eps: 0.1 }, 11, 10).unwrap();
        let s = SignalProfile::from_rows(
            (0..11)
                .map(|i| vec![if i == 0 { 1.0 } else { 0.0 }; 10])
                .collect(),
        )
        .unwrap();
        let d = asymmetry_d(&model, &Prior::point(s)).unwrap();
        assert!(d >= 9.0 - 1e-9, "d = {d}");
    }

    #[test]
    fn sampled_d_is_deterministic() {
        let model = ValuationModel::new(
            Family::WeightedSum {
                alpha: 0.0,
                beta: 1.0,
            },
            5,
            5,
        )
        .unwrap();
        let dist = SignalDistribution::Exponential { rate: 1.0 };
        let a = asymmetry_d_sampled(&model, &dist, 200, 7).unwrap();
        let b = asymmetry_d_sampled(&model, &dist, 200, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.d.mean >= 1.0 && a.d.se > 0.0);
    }

    #[test]
    fn non_equilibrium_is_rejected() {
        let model = ValuationModel::lower_bound_case2(100.0, 3.0, 0.01);
        let auction = Auction::new(&model, MechanismKind::Gva);
        let s = SignalProfile::single(vec![1.0; 3]);
        let sigma = StrategyProfile::tabulate(&model, |_, _| 0.0);
        let err = poa_report(
            &auction,
            &sigma,
            Mode::Pne,
            &Target::Point(s.clone()),
            &Prior::point(s),
            &VerifyConfig::default(),
        );
        assert!(matches!(err, Err(Error::NotEquilibrium { .. })));
    }
}
