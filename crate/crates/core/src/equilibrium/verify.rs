use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::rc::Rc;
use std::str::FromStr;

use super::strategy::{MultiStrategyProfile, Prior, StrategyProfile};
use crate::error::{Error, Result};
use crate::mechanisms::{multi_utility, won_value, Auction, MultiReport};
use crate::valuation::{SignalProfile, SignalSpace, DEFAULT_TOL};

/// Equilibrium notion to verify.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Pure Nash equilibrium at one signal profile.
    Pne,
    /// Ex-post equilibrium: a PNE at every grid signal profile.
    Epe,
    /// Bayes-Nash equilibrium under a discrete prior.
    Bne,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pne" => Ok(Mode::Pne),
            "epe" => Ok(Mode::Epe),
            "bne" => Ok(Mode::Bne),
            _ => Err(Error::config("/mode", format!("unknown mode '{s}'"))),
        }
    }
}

/// Signals at which a strategy profile is verified.
#[derive(Clone, Debug)]
pub enum Target {
    /// One signal profile (PNE).
    Point(SignalProfile),
    /// The product grid of the signal spaces (EPE).
    Grid,
    /// An explicit list of signal profiles (EPE over a sub-grid).
    Profiles(Vec<SignalProfile>),
    /// A discrete prior (BNE).
    Prior(Prior),
}

/// Verification settings.
#[derive(Clone, Debug)]
pub struct VerifyConfig {
    /// Largest tolerated deviation gain.
    pub eps: f64,
    /// Restrict deviations to bids at most the own signal.
    pub nob: bool,
    /// Grid resolution of the signal profiles for `Target::Grid`.
    pub context_steps: Option<usize>,
    /// Above this many grid profiles the EPE check samples profiles.
    pub max_contexts: u64,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            eps: 1e-9,
            nob: true,
            context_steps: None,
            max_contexts: 2_000_000,
            seed: 0,
        }
    }
}

/// A profitable deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub agent: usize,
    /// Signal profile of the context, or the agent's own row for BNE.
    pub signals: Vec<Vec<f64>>,
    pub bids: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participate: Option<Vec<bool>>,
    #[serde(with = "crate::json")]
    pub gain: f64,
}

/// Result of an equilibrium check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub mode: Mode,
    pub pass: bool,
    #[serde(with = "crate::json")]
    pub max_gain: f64,
    pub worst: Option<Deviation>,
    pub contexts: u64,
    pub sampled: bool,
}

#[derive(Clone)]
struct AgentTable {
    cur: (f64, f64),
    devs: Vec<(f64, f64, f64)>,
}

type TableCache = HashMap<Vec<u64>, Rc<Vec<AgentTable>>>;

fn tables(auction: &Auction, cache: &mut TableCache, bids: &[f64]) -> Result<Rc<Vec<AgentTable>>> {
    let key: Vec<u64> = bids.iter().map(|b| b.to_bits()).collect();
    if let Some(t) = cache.get(&key) {
        return Ok(t.clone());
    }
    let n = auction.n();
    let base = auction.lottery(bids)?;
    let mut out = Vec::with_capacity(n);
    let mut work = bids.to_vec();
    for i in 0..n {
        let mut devs = Vec::new();
        for d in auction.grid(i, 0).points() {
            work[i] = d;
            let lot = auction.lottery(&work)?;
            devs.push((d, lot.win[i], lot.pay[i]));
        }
        work[i] = bids[i];
        out.push(AgentTable {
            cur: (base.win[i], base.pay[i]),
            devs,
        });
    }
    let rc = Rc::new(out);
    cache.insert(key, rc.clone());
    Ok(rc)
}

/// Best deviation of agent `i` against a list of `(prob, signals, tables)`
/// scenarios sharing the agent's own signal `own`.
fn best_single(
    auction: &Auction,
    i: usize,
    own: f64,
    scen: &[(f64, &[f64], Rc<Vec<AgentTable>>)],
    nob: bool,
) -> (f64, f64) {
    let model = auction.model;
    let values: Vec<f64> = scen.iter().map(|(_, s, _)| model.value(i, 0, s)).collect();
    let cur: f64 = scen
        .iter()
        .zip(&values)
        .map(|((p, _, t), v)| p * (t[i].cur.0 * v - t[i].cur.1))
        .sum();
    let ndev = scen[0].2[i].devs.len();
    let mut best = (0.0, f64::NAN);
    for k in 0..ndev {
        let d = scen[0].2[i].devs[k].0;
        if nob && d > own + DEFAULT_TOL {
            continue;
        }
        let u: f64 = scen
            .iter()
            .zip(&values)
            .map(|((p, _, t), v)| {
                let (_, w, pay) = t[i].devs[k];
                p * (w * v - pay)
            })
            .sum();
        if u - cur > best.0 {
            best = (u - cur, d);
        }
    }
    best
}

/// Signal profiles of a grid target, possibly sampled.
fn grid_profiles(
    spaces: &[SignalSpace],
    n: usize,
    m: usize,
    cfg: &VerifyConfig,
) -> (Vec<SignalProfile>, bool) {
    let total = spaces
        .iter()
        .fold(1u64, |a, sp| a.saturating_mul(sp.len() as u64));
    let decode = |mut k: u64| {
        let mut data = vec![0.0; spaces.len()];
        for j in (0..spaces.len()).rev() {
            let len = spaces[j].len() as u64;
            data[j] = spaces[j].point((k % len) as usize);
            k /= len;
        }
        SignalProfile::new(n, m, data).expect("shape")
    };
    if total <= cfg.max_contexts {
        ((0..total).map(decode).collect(), false)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let draws = (0..cfg.max_contexts)
            .map(|_| {
                let data = spaces
                    .iter()
                    .map(|sp| sp.point(rng.gen_range(0..sp.len())))
                    .collect();
                SignalProfile::new(n, m, data).expect("shape")
            })
            .collect();
        (draws, true)
    }
}

fn context_spaces(auction: &Auction, cfg: &VerifyConfig) -> Vec<SignalSpace> {
    let model = auction.model;
    (0..model.n())
        .flat_map(|i| (0..model.m()).map(move |l| (i, l)))
        .map(|(i, l)| {
            let sp = model.space(i, l);
            match cfg.context_steps {
                Some(k) => sp.with_steps(k),
                None => sp.clone(),
            }
        })
        .collect()
}

fn pick(
    a: Option<(usize, Deviation)>,
    b: Option<(usize, Deviation)>,
) -> Option<(usize, Deviation)> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => {
            if y.1.gain > x.1.gain || (y.1.gain == x.1.gain && y.0 < x.0) {
                Some(y)
            } else {
                Some(x)
            }
        }
    }
}

fn report(
    mode: Mode,
    worst: Option<(usize, Deviation)>,
    contexts: u64,
    sampled: bool,
    eps: f64,
) -> EquilibriumReport {
    let worst = worst.map(|(_, d)| d);
    let max_gain = worst.as_ref().map_or(0.0, |d| d.gain);
    EquilibriumReport {
        mode,
        pass: max_gain <= eps,
        max_gain,
        worst,
        contexts,
        sampled,
    }
}

/// Verifies a single-item strategy profile.
pub fn verify(
    auction: &Auction,
    sigma: &StrategyProfile,
    mode: Mode,
    target: &Target,
    cfg: &VerifyConfig,
) -> Result<EquilibriumReport> {
    if !auction.model.is_single() {
        return Err(Error::config(
            "/model",
            "single-item verification needs m = 1",
        ));
    }
    match (mode, target) {
        (Mode::Pne, Target::Point(s)) => {
            pointwise_single(auction, sigma, mode, std::slice::from_ref(s), false, cfg)
        }
        (Mode::Epe, Target::Grid) => {
            let (profiles, sampled) =
                grid_profiles(&context_spaces(auction, cfg), auction.n(), 1, cfg);
            pointwise_single(auction, sigma, mode, &profiles, sampled, cfg)
        }
        (Mode::Epe, Target::Profiles(ps)) => pointwise_single(auction, sigma, mode, ps, false, cfg),
        (Mode::Bne, Target::Prior(prior)) => bayes_single(auction, sigma, prior, cfg),
        _ => Err(Error::config(
            "/mode",
            "mode does not match the verification target",
        )),
    }
}

fn pointwise_single(
    auction: &Auction,
    sigma: &StrategyProfile,
    mode: Mode,
    profiles: &[SignalProfile],
    sampled: bool,
    cfg: &VerifyConfig,
) -> Result<EquilibriumReport> {
    let n = auction.n();
    let spec = auction.spec();
    let worst = profiles
        .par_iter()
        .enumerate()
        .map_init(
            || (spec.build(), TableCache::new()),
            |(auc, cache), (k, sp)| -> Result<Option<(usize, Deviation)>> {
                let s = sp.as_single();
                let bids = sigma.bids(s)?;
                let t = tables(auc, cache, &bids)?;
                let mut local: Option<(usize, Deviation)> = None;
                for i in 0..n {
                    let (gain, d) = best_single(auc, i, s[i], &[(1.0, s, t.clone())], cfg.nob);
                    if gain > 0.0 {
                        let mut dev_bids = bids.clone();
                        dev_bids[i] = d;
                        local = pick(
                            local,
                            Some((
                                k * n + i,
                                Deviation {
                                    agent: i,
                                    signals: sp.rows(),
                                    bids: dev_bids,
                                    participate: None,
                                    gain,
                                },
                            )),
                        );
                    }
                }
                Ok(local)
            },
        )
        .try_reduce(|| None, |a, b| Ok(pick(a, b)))?;
    Ok(report(mode, worst, profiles.len() as u64, sampled, cfg.eps))
}

fn bayes_single(
    auction: &Auction,
    sigma: &StrategyProfile,
    prior: &Prior,
    cfg: &VerifyConfig,
) -> Result<EquilibriumReport> {
    let n = auction.n();
    let mut cases = Vec::new();
    for i in 0..n {
        for row in prior.own_rows(i) {
            cases.push((i, row));
        }
    }
    let spec = auction.spec();
    let worst = cases
        .par_iter()
        .enumerate()
        .map_init(
            || (spec.build(), TableCache::new()),
            |(auc, cache), (k, (i, row))| -> Result<Option<(usize, Deviation)>> {
                let cond = prior.conditional(*i, row);
                let mut scen = Vec::with_capacity(cond.len());
                for (s, p) in &cond {
                    let bids = sigma.bids(s.as_single())?;
                    scen.push((*p, s.as_single(), tables(auc, cache, &bids)?));
                }
                let (gain, d) = best_single(auc, *i, row[0], &scen, cfg.nob);
                Ok((gain > 0.0).then(|| {
                    (
                        k,
                        Deviation {
                            agent: *i,
                            signals: vec![row.clone()],
                            bids: vec![d],
                            participate: None,
                            gain,
                        },
                    )
                }))
            },
        )
        .try_reduce(|| None, |a, b| Ok(pick(a, b)))?;
    Ok(report(Mode::Bne, worst, cases.len() as u64, false, cfg.eps))
}

/// Largest gain of agent `i` from a grid deviation at true signals `s`
/// against `bids`, with the best deviation bid (`NaN` if none gains).
pub fn best_response_gain(
    auction: &Auction,
    i: usize,
    s: &[f64],
    bids: &[f64],
    nob: bool,
) -> Result<(f64, f64)> {
    let mut cache = TableCache::new();
    let t = tables(auction, &mut cache, bids)?;
    Ok(best_single(auction, i, s[i], &[(1.0, s, t)], nob))
}

/// Deviation reports of agent `i` with own row `row`.
///
/// Participation rows: all `2^m` when `m <= 12`, otherwise the current row,
/// its single flips, the single-item rows and the all-in row. Bids on the
/// participated items: the full grid product when it has at most 4096
/// entries, otherwise single-item changes of the current bids and uniform
/// grid levels.
pub fn multi_deviations(
    auction: &Auction,
    i: usize,
    row: &[f64],
    current: &MultiReport,
    nob: bool,
) -> Vec<MultiReport> {
    let m = auction.model.m();
    let grids: Vec<Vec<f64>> = (0..m)
        .map(|l| {
            let g = auction.grid(i, l);
            let pts: Vec<f64> = g
                .points()
                .into_iter()
                .filter(|&x| !nob || x <= row[l] + DEFAULT_TOL)
                .collect();
            if pts.is_empty() {
                vec![g.lo]
            } else {
                pts
            }
        })
        .collect();
    let base_bids: Vec<f64> = (0..m)
        .map(|l| {
            if nob {
                current.bids[l].min(row[l])
            } else {
                current.bids[l]
            }
        })
        .collect();
    let rows: Vec<Vec<bool>> = if !auction.kind.uses_participation() {
        vec![vec![true; m]]
    } else if m <= 12 {
        (0..1u32 << m)
            .map(|mask| (0..m).map(|l| mask >> l & 1 == 1).collect())
            .collect()
    } else {
        let mut rs = vec![current.participate.clone(), vec![true; m], vec![false; m]];
        for l in 0..m {
            let mut f = current.participate.clone();
            f[l] = !f[l];
            rs.push(f);
            let mut single = vec![false; m];
            single[l] = true;
            rs.push(single);
        }
        rs
    };
    let mut out = vec![current.clone()];
    for part in rows {
        let items: Vec<usize> = (0..m).filter(|&l| part[l]).collect();
        if items.is_empty() {
            out.push(MultiReport {
                bids: base_bids.clone(),
                participate: part,
            });
            continue;
        }
        let size = items
            .iter()
            .fold(1usize, |a, &l| a.saturating_mul(grids[l].len()));
        if size <= 4096 {
            let mut idx = vec![0usize; items.len()];
            loop {
                let mut bids = base_bids.clone();
                for (t, &l) in items.iter().enumerate() {
                    bids[l] = grids[l][idx[t]];
                }
                out.push(MultiReport {
                    bids,
                    participate: part.clone(),
                });
                let mut t = items.len();
                let done = loop {
                    if t == 0 {
                        break true;
                    }
                    t -= 1;
                    idx[t] += 1;
                    if idx[t] < grids[items[t]].len() {
                        break false;
                    }
                    idx[t] = 0;
                };
                if done {
                    break;
                }
            }
        } else {
            for &l in &items {
                for &g in &grids[l] {
                    let mut bids = base_bids.clone();
                    bids[l] = g;
                    out.push(MultiReport {
                        bids,
                        participate: part.clone(),
                    });
                }
            }
            let levels = items.iter().map(|&l| grids[l].len()).max().unwrap_or(1);
            for t in 0..levels {
                let mut bids = base_bids.clone();
                for &l in &items {
                    bids[l] = grids[l][t.min(grids[l].len() - 1)];
                }
                out.push(MultiReport {
                    bids,
                    participate: part.clone(),
                });
            }
        }
    }
    out
}

/// Best deviation of agent `i` against `(prob, signals, reports)` scenarios.
fn best_multi(
    auction: &Auction,
    i: usize,
    row: &[f64],
    scen: &[(f64, &SignalProfile, Vec<MultiReport>)],
    nob: bool,
) -> Result<(f64, Option<MultiReport>)> {
    let model = auction.model;
    let mut cur = 0.0;
    for (p, s, reps) in scen {
        cur += p * multi_utility(model, &auction.run_multi(reps)?, i, s);
    }
    let devs = multi_deviations(auction, i, row, &scen[0].2[i], nob);
    let mut best = (0.0, None);
    let mut work: Vec<Vec<MultiReport>> = scen.iter().map(|(_, _, r)| r.clone()).collect();
    for dev in devs {
        let mut u = 0.0;
        for (k, (p, s, _)) in scen.iter().enumerate() {
            work[k][i] = dev.clone();
            u += p * multi_utility(model, &auction.run_multi(&work[k])?, i, s);
        }
        if u - cur > best.0 {
            best = (u - cur, Some(dev));
        }
    }
    Ok(best)
}

/// Verifies a multi-item strategy profile of a simultaneous auction.
pub fn verify_multi(
    auction: &Auction,
    sigma: &MultiStrategyProfile,
    mode: Mode,
    target: &Target,
    cfg: &VerifyConfig,
) -> Result<EquilibriumReport> {
    if !auction.kind.is_multi() {
        return Err(Error::config(
            "/mechanism",
            "multi-item verification needs a simultaneous auction",
        ));
    }
    let n = auction.n();
    let m = auction.model.m();
    let (profiles, sampled) = match (mode, target) {
        (Mode::Pne, Target::Point(s)) => (vec![s.clone()], false),
        (Mode::Epe, Target::Profiles(ps)) => (ps.clone(), false),
        (Mode::Epe, Target::Grid) => grid_profiles(&context_spaces(auction, cfg), n, m, cfg),
        (Mode::Bne, Target::Prior(prior)) => return bayes_multi(auction, sigma, prior, cfg),
        _ => {
            return Err(Error::config(
                "/mode",
                "mode does not match the verification target",
            ))
        }
    };
    let spec = auction.spec();
    let worst = profiles
        .par_iter()
        .enumerate()
        .map_init(
            || spec.build(),
            |auc, (k, s)| -> Result<Option<(usize, Deviation)>> {
                let reps = sigma.reports(s)?;
                let mut local = None;
                for i in 0..n {
                    let (gain, dev) =
                        best_multi(auc, i, s.row(i), &[(1.0, s, reps.clone())], cfg.nob)?;
                    if let Some(dev) = dev {
                        local = pick(
                            local,
                            Some((
                                k * n + i,
                                Deviation {
                                    agent: i,
                                    signals: s.rows(),
                                    bids: dev.bids,
                                    participate: Some(dev.participate),
                                    gain,
                                },
                            )),
                        );
                    }
                }
                Ok(local)
            },
        )
        .try_reduce(|| None, |a, b| Ok(pick(a, b)))?;
    Ok(report(mode, worst, profiles.len() as u64, sampled, cfg.eps))
}

fn bayes_multi(
    auction: &Auction,
    sigma: &MultiStrategyProfile,
    prior: &Prior,
    cfg: &VerifyConfig,
) -> Result<EquilibriumReport> {
    let n = auction.n();
    let mut cases = Vec::new();
    for i in 0..n {
        for row in prior.own_rows(i) {
            cases.push((i, row));
        }
    }
    let spec = auction.spec();
    let worst = cases
        .par_iter()
        .enumerate()
        .map_init(
            || spec.build(),
            |auc, (k, (i, row))| -> Result<Option<(usize, Deviation)>> {
                let cond = prior.conditional(*i, row);
                let mut scen = Vec::with_capacity(cond.len());
                for (s, p) in &cond {
                    scen.push((*p, s, sigma.reports(s)?));
                }
                let (gain, dev) = best_multi(auc, *i, row, &scen, cfg.nob)?;
                Ok(dev.map(|dev| {
                    (
                        k,
                        Deviation {
                            agent: *i,
                            signals: vec![row.clone()],
                            bids: dev.bids,
                            participate: Some(dev.participate),
                            gain,
                        },
                    )
                }))
            },
        )
        .try_reduce(|| None, |a, b| Ok(pick(a, b)))?;
    Ok(report(Mode::Bne, worst, cases.len() as u64, false, cfg.eps))
}

/// Largest gain of agent `i` from a multi-item deviation at signals `s`.
pub fn best_response_gain_multi(
    auction: &Auction,
    i: usize,
    s: &SignalProfile,
    reports: &[MultiReport],
    nob: bool,
) -> Result<(f64, Option<MultiReport>)> {
    best_multi(auction, i, s.row(i), &[(1.0, s, reports.to_vec())], nob)
}

/// No-overbidding check result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NobReport {
    pub pass: bool,
    #[serde(with = "crate::json")]
    pub margin: f64,
    pub agent: Option<usize>,
    pub signal: Option<Vec<f64>>,
}

/// Single-item no-overbidding: `sigma_i(s_i) <= s_i` on every grid signal.
pub fn check_nob(
    model: &crate::valuation::ValuationModel,
    sigma: &StrategyProfile,
) -> Result<NobReport> {
    let mut worst = (f64::INFINITY, None, None);
    for i in 0..model.n() {
        for x in model.space(i, 0).points() {
            let b = sigma.agents[i].bid(i, x)?;
            let margin = x - b;
            if margin < worst.0 {
                worst = (margin, Some(i), Some(vec![x]));
            }
        }
    }
    Ok(NobReport {
        pass: worst.0 >= -DEFAULT_TOL,
        margin: worst.0,
        agent: worst.1,
        signal: worst.2,
    })
}

/// Multi-item no-overbidding in expectation: for every agent,
/// `E[sum_{l in X_i} v_il(b_il, s_-il)] <= E[v_i(X_i; s)]` where `X_i` is the
/// set the agent wins.
pub fn check_nob_multi(
    auction: &Auction,
    sigma: &MultiStrategyProfile,
    prior: &Prior,
) -> Result<NobReport> {
    let model = auction.model;
    let n = model.n();
    let mut lhs = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for (s, p) in prior.atoms() {
        let reps = sigma.reports(s)?;
        let out = auction.run_multi(&reps)?;
        for i in 0..n {
            rhs[i] += p * won_value(model, &out, i, s);
            for (l, w) in out.winners.iter().enumerate() {
                if *w == Some(i) {
                    let mut col = s.column(l);
                    col[i] = reps[i].bids[l];
                    lhs[i] += p * model.value(i, l, &col);
                }
            }
        }
    }
    let (agent, margin) = (0..n)
        .map(|i| (i, rhs[i] - lhs[i]))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    Ok(NobReport {
        pass: margin >= -DEFAULT_TOL,
        margin,
        agent: Some(agent),
        signal: None,
    })
}
