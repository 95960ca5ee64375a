//! Grid estimators for the single-crossing and heterogeneity parameters and
//! checkers for the structural properties of a model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{ValuationModel, DEFAULT_TOL};
use super::space::SignalSpace;

/// Budget and resolution of a property scan.
#[derive(Clone, Debug)]
pub struct GridConfig {
    /// Overrides the model's grid resolution.
    pub steps: Option<usize>,
    pub tol: f64,
    /// Above this many value evaluations the scan switches to sampling.
    pub budget: usize,
    /// Number of sampled profiles when sampling.
    pub samples: usize,
    pub seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            steps: None,
            tol: DEFAULT_TOL,
            budget: 10_000_000,
            samples: 1_000_000,
            seed: 0,
        }
    }
}

impl GridConfig {
    pub fn with_steps(steps: usize) -> Self {
        GridConfig {
            steps: Some(steps),
            ..Default::default()
        }
    }
}

/// Properties checked by [`check_property`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Property {
    /// Own value strictly increasing in own signal, weakly in the others.
    Monotone,
    /// Every agent's signal moves all other agents' values equally.
    HomogeneousInfluence,
    /// Decreasing differences in the own signal.
    Submodular,
    /// `v_j(s+d) - v_j(s) >= (v_i(s+d) - v_i(s)) / max(gamma, c)` when `d_i = 0`.
    LemmaDiffBound { gamma: f64, c: f64 },
    /// `v_j(s) >= v_i(s)/d` implies the same after raising signals other than `i`.
    CorollaryRatio { gamma: f64, c: f64, d: f64 },
}

impl Property {
    pub fn name(&self) -> &'static str {
        match self {
            Property::Monotone => "monotone",
            Property::HomogeneousInfluence => "homogeneous_influence",
            Property::Submodular => "submodular",
            Property::LemmaDiffBound { .. } => "lemma_diff_bound",
            Property::CorollaryRatio { .. } => "corollary_ratio",
        }
    }
}

/// A tuple at which an estimate is attained or a property fails.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub item: usize,
    /// Agents involved, in the order the property names them.
    pub agents: Vec<usize>,
    pub profile: Vec<f64>,
    pub delta: Vec<f64>,
}

/// Outcome of an estimate or a property check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub property: String,
    pub pass: bool,
    #[serde(with = "crate::json")]
    pub margin: f64,
    #[serde(
        default,
        with = "crate::json::opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub estimate: Option<f64>,
    pub witness: Option<Witness>,
    pub evaluated: usize,
    pub sampled: bool,
}

type Key = (u64, u32);

/// Fold state: the minimum score with its earliest tuple, and the earliest
/// violating tuple.
#[derive(Clone)]
struct Acc {
    best: f64,
    best_key: Key,
    best_w: Option<Witness>,
    first_bad: Option<(Key, Witness)>,
    evaluated: usize,
}

impl Acc {
    fn new() -> Self {
        Acc {
            best: f64::INFINITY,
            best_key: (u64::MAX, u32::MAX),
            best_w: None,
            first_bad: None,
            evaluated: 0,
        }
    }

    fn offer(&mut self, score: f64, key: Key, bad: bool, w: impl Fn() -> Witness) {
        if score < self.best || (score == self.best && key < self.best_key) {
            self.best = score;
            self.best_key = key;
            self.best_w = Some(w());
        }
        if bad && self.first_bad.as_ref().is_none_or(|(k, _)| key < *k) {
            self.first_bad = Some((key, w()));
        }
    }

    fn merge(mut self, o: Acc) -> Acc {
        if o.best < self.best || (o.best == self.best && o.best_key < self.best_key) {
            self.best = o.best;
            self.best_key = o.best_key;
            self.best_w = o.best_w;
        }
        match (&self.first_bad, o.first_bad) {
            (Some((k, _)), Some((ok, ow))) if ok < *k => self.first_bad = Some((ok, ow)),
            (None, Some(x)) => self.first_bad = Some(x),
            _ => {}
        }
        self.evaluated += o.evaluated;
        self
    }
}

struct Plan {
    spaces: Vec<Vec<SignalSpace>>,
    totals: Vec<u64>,
    sampled: bool,
    jobs: u64,
}

fn plan(model: &ValuationModel, cfg: &GridConfig, cost: usize) -> Plan {
    let spaces: Vec<Vec<SignalSpace>> = (0..model.m())
        .map(|l| {
            model
                .item_spaces(l)
                .into_iter()
                .map(|sp| match cfg.steps {
                    Some(k) => sp.with_steps(k),
                    None => sp,
                })
                .collect()
        })
        .collect();
    let totals: Vec<u64> = spaces
        .iter()
        .map(|sps| {
            sps.iter()
                .fold(1u64, |acc, sp| acc.saturating_mul(sp.len() as u64))
        })
        .collect();
    let all: u64 = totals.iter().fold(0u64, |a, &t| a.saturating_add(t));
    let sampled = all.saturating_mul(cost as u64) > cfg.budget as u64;
    let jobs = if sampled { cfg.samples as u64 } else { all };
    Plan {
        spaces,
        totals,
        sampled,
        jobs,
    }
}

impl Plan {
    /// Item and grid column of job `k`. Exhaustive jobs are numbered in
    /// lexicographic order of (item, s_0, s_1, ...).
    fn decode(&self, k: u64, seed: u64) -> (usize, Vec<f64>) {
        if self.sampled {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let l = rng.gen_range(0..self.spaces.len());
            let col = self.spaces[l]
                .iter()
                .map(|sp| sp.point(rng.gen_range(0..sp.len())))
                .collect();
            return (l, col);
        }
        let mut rest = k;
        let mut l = 0;
        while rest >= self.totals[l] {
            rest -= self.totals[l];
            l += 1;
        }
        let sps = &self.spaces[l];
        let mut idx = vec![0usize; sps.len()];
        for j in (0..sps.len()).rev() {
            let len = sps[j].len() as u64;
            idx[j] = (rest % len) as usize;
            rest /= len;
        }
        (l, idx.iter().zip(sps).map(|(&t, sp)| sp.point(t)).collect())
    }
}

fn scan<F>(model: &ValuationModel, cfg: &GridConfig, cost: usize, f: F) -> (Acc, bool)
where
    F: Fn(u64, usize, &[f64], &[SignalSpace], &mut Acc) + Sync,
{
    let plan = plan(model, cfg, cost);
    let acc = (0..plan.jobs)
        .into_par_iter()
        .fold(Acc::new, |mut acc, k| {
            let (l, col) = plan.decode(k, cfg.seed);
            f(k, l, &col, &plan.spaces[l], &mut acc);
            acc
        })
        .reduce(Acc::new, Acc::merge);
    (acc, plan.sampled)
}

fn bumped(col: &[f64], i: usize, d: f64) -> Vec<f64> {
    let mut c = col.to_vec();
    c[i] += d;
    c
}

fn fits(sp: &SignalSpace, x: f64, tol: f64) -> bool {
    x <= sp.hi + tol
}

fn ratio(num: f64, den: f64, tol: f64) -> f64 {
    if num <= tol {
        0.0
    } else if den <= tol {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Smallest `c` such that raising agent `i`'s signal raises `v_i` by at
/// least `1/c` times what it raises any other `v_k`, over the grid.
pub fn estimate_c(model: &ValuationModel, cfg: &GridConfig) -> PropertyReport {
    let n = model.n();
    let tol = cfg.tol;
    let (acc, sampled) = scan(model, cfg, 4 * n * n, |k, l, col, sps, acc| {
        let base = model.values(l, col);
        for i in 0..n {
            for (di, &d) in sps[i].deltas().iter().enumerate() {
                if !fits(&sps[i], col[i] + d, tol) {
                    continue;
                }
                let up = bumped(col, i, d);
                let v = model.values(l, &up);
                acc.evaluated += n;
                let den = v[i] - base[i];
                for ii in 0..n {
                    if ii == i {
                        continue;
                    }
                    let r = ratio(v[ii] - base[ii], den, tol);
                    let key = (k, ((i * 3 + di) * n + ii) as u32);
                    acc.offer(-r, key, false, || Witness {
                        item: l,
                        agents: vec![i, ii],
                        profile: col.to_vec(),
                        delta: bumped(&vec![0.0; n], i, d),
                    });
                }
            }
        }
    });
    let est = if acc.best == f64::NEG_INFINITY {
        f64::INFINITY
    } else if acc.best.is_finite() {
        (-acc.best).max(0.0)
    } else {
        0.0
    };
    estimate_report("estimate_c", est, model.declared().c, acc, sampled)
}

/// Smallest `gamma >= 1` such that agent `i`'s signal moves any two other
/// agents' values within a factor `gamma` of each other, over the grid.
pub fn estimate_gamma(model: &ValuationModel, cfg: &GridConfig) -> PropertyReport {
    let n = model.n();
    let tol = cfg.tol;
    let (acc, sampled) = scan(model, cfg, 4 * n * n, |k, l, col, sps, acc| {
        if n < 3 {
            return;
        }
        let base = model.values(l, col);
        for i in 0..n {
            for (di, &d) in sps[i].deltas().iter().enumerate() {
                if !fits(&sps[i], col[i] + d, tol) {
                    continue;
                }
                let up = bumped(col, i, d);
                let v = model.values(l, &up);
                acc.evaluated += n;
                for j in 0..n {
                    for jj in 0..n {
                        if j == i || jj == i || j == jj {
                            continue;
                        }
                        let r = ratio(v[jj] - base[jj], v[j] - base[j], tol);
                        let key = (k, (((i * 3 + di) * n + j) * n + jj) as u32);
                        acc.offer(-r, key, false, || Witness {
                            item: l,
                            agents: vec![i, j, jj],
                            profile: col.to_vec(),
                            delta: bumped(&vec![0.0; n], i, d),
                        });
                    }
                }
            }
        }
    });
    let raw = if acc.best == f64::NEG_INFINITY {
        f64::INFINITY
    } else if acc.best.is_finite() {
        -acc.best
    } else {
        1.0
    };
    estimate_report(
        "estimate_gamma",
        raw.max(1.0),
        model.declared().gamma,
        acc,
        sampled,
    )
}

fn estimate_report(
    name: &str,
    est: f64,
    declared: Option<f64>,
    acc: Acc,
    sampled: bool,
) -> PropertyReport {
    let margin = match declared {
        Some(d) if d.is_finite() || est.is_finite() => d - est,
        _ => 0.0,
    };
    PropertyReport {
        property: name.into(),
        pass: est.is_finite(),
        margin,
        estimate: Some(est),
        witness: acc.best_w,
        evaluated: acc.evaluated,
        sampled,
    }
}

/// Checks a structural property over the grid.
pub fn check_property(
    model: &ValuationModel,
    property: &Property,
    cfg: &GridConfig,
) -> PropertyReport {
    let n = model.n();
    let tol = cfg.tol;
    let (acc, sampled) = match property {
        Property::HomogeneousInfluence => {
            let g = estimate_gamma(model, cfg);
            let est = g.estimate.unwrap_or(1.0);
            let margin = 1.0 - est;
            return PropertyReport {
                property: property.name().into(),
                pass: margin >= -tol,
                margin,
                estimate: Some(est),
                witness: if margin >= -tol { None } else { g.witness },
                evaluated: g.evaluated,
                sampled: g.sampled,
            };
        }
        Property::Monotone => scan(model, cfg, 4 * n * n, |k, l, col, sps, acc| {
            let base = model.values(l, col);
            for i in 0..n {
                for (di, &d) in sps[i].deltas().iter().enumerate() {
                    if !fits(&sps[i], col[i] + d, tol) {
                        continue;
                    }
                    let up = bumped(col, i, d);
                    let v = model.values(l, &up);
                    acc.evaluated += n;
                    for kk in 0..n {
                        let diff = v[kk] - base[kk];
                        let score = if kk == i { diff - 2.0 * tol } else { diff };
                        let key = (k, ((i * 3 + di) * n + kk) as u32);
                        acc.offer(score, key, score < -tol, || Witness {
                            item: l,
                            agents: vec![i, kk],
                            profile: col.to_vec(),
                            delta: bumped(&vec![0.0; n], i, d),
                        });
                    }
                }
            }
        }),
        Property::Submodular => scan(model, cfg, 16 * n * n, |k, l, col, sps, acc| {
            for i in 0..n {
                for (di, &d) in sps[i].deltas().iter().enumerate() {
                    if !fits(&sps[i], col[i] + d, tol) {
                        continue;
                    }
                    let lo_gain = model.value(i, l, &bumped(col, i, d)) - model.value(i, l, col);
                    for kk in 0..n {
                        if kk == i || sps[kk].is_singleton() {
                            continue;
                        }
                        let h = sps[kk].step();
                        if !fits(&sps[kk], col[kk] + h, tol) {
                            continue;
                        }
                        let hi_col = bumped(col, kk, h);
                        let hi_gain =
                            model.value(i, l, &bumped(&hi_col, i, d)) - model.value(i, l, &hi_col);
                        acc.evaluated += 4;
                        let score = lo_gain - hi_gain;
                        let key = (k, ((i * 3 + di) * n + kk) as u32);
                        acc.offer(score, key, score < -tol, || {
                            let mut delta = vec![0.0; n];
                            delta[i] = d;
                            delta[kk] = h;
                            Witness {
                                item: l,
                                agents: vec![i, kk],
                                profile: col.to_vec(),
                                delta,
                            }
                        });
                    }
                }
            }
        }),
        Property::LemmaDiffBound { gamma, c } => {
            let big = gamma.max(*c);
            scan(model, cfg, 64 * n * n, |k, l, col, sps, acc| {
                let base = model.values(l, col);
                for i in 0..n {
                    for (vi, delta) in delta_vectors(col, sps, i, tol).iter().enumerate() {
                        let up: Vec<f64> = col.iter().zip(delta).map(|(a, b)| a + b).collect();
                        let v = model.values(l, &up);
                        acc.evaluated += n;
                        let di = v[i] - base[i];
                        for j in 0..n {
                            if j == i {
                                continue;
                            }
                            let score = (v[j] - base[j]) - di / big;
                            let key = (k, ((i * 4096 + vi) * n + j) as u32);
                            acc.offer(score, key, score < -tol, || Witness {
                                item: l,
                                agents: vec![i, j],
                                profile: col.to_vec(),
                                delta: delta.clone(),
                            });
                        }
                    }
                }
            })
        }
        Property::CorollaryRatio { d, .. } => {
            let d = *d;
            scan(model, cfg, 64 * n * n, |k, l, col, sps, acc| {
                let base = model.values(l, col);
                for i in 0..n {
                    let deltas = delta_vectors(col, sps, i, tol);
                    for j in 0..n {
                        if j == i || base[j] - base[i] / d < 0.0 {
                            continue;
                        }
                        for (vi, delta) in deltas.iter().enumerate() {
                            let up: Vec<f64> = col.iter().zip(delta).map(|(a, b)| a + b).collect();
                            let vj = model.value(j, l, &up);
                            let vi_ = model.value(i, l, &up);
                            acc.evaluated += 2;
                            let score = vj - vi_ / d;
                            let key = (k, ((i * 4096 + vi) * n + j) as u32);
                            acc.offer(score, key, score < -tol, || Witness {
                                item: l,
                                agents: vec![i, j],
                                profile: col.to_vec(),
                                delta: delta.clone(),
                            });
                        }
                    }
                }
            })
        }
    };
    let margin = if acc.best.is_finite() { acc.best } else { 0.0 };
    let pass = acc.first_bad.is_none();
    PropertyReport {
        property: property.name().into(),
        pass,
        margin,
        estimate: None,
        witness: acc.first_bad.map(|(_, w)| w),
        evaluated: acc.evaluated,
        sampled,
    }
}

/// Non-negative perturbations with a zero in coordinate `i`: the full
/// product of per-coordinate choices when small, otherwise single-coordinate
/// and uniform moves.
fn delta_vectors(col: &[f64], sps: &[SignalSpace], i: usize, tol: f64) -> Vec<Vec<f64>> {
    let n = col.len();
    let opts: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let mut o = vec![0.0];
            if k != i {
                o.extend(
                    sps[k]
                        .deltas()
                        .into_iter()
                        .filter(|&d| fits(&sps[k], col[k] + d, tol)),
                );
            }
            o
        })
        .collect();
    let product: usize = opts.iter().map(|o| o.len()).product();
    let mut out = Vec::new();
    if product <= 64 {
        let mut idx = vec![0usize; n];
        loop {
            if idx.iter().any(|&t| t > 0) {
                out.push(idx.iter().enumerate().map(|(k, &t)| opts[k][t]).collect());
            }
            let mut k = n;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < opts[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
    for k in 0..n {
        for &d in &opts[k][1..] {
            let mut v = vec![0.0; n];
            v[k] = d;
            out.push(v);
        }
    }
    for t in 1..4 {
        let v: Vec<f64> = opts.iter().map(|o| o[t.min(o.len() - 1)]).collect();
        if v.iter().any(|&x| x > 0.0) {
            out.push(v);
        }
    }
    out
}
