use rand::Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

use super::{declared_max, grid_point, random_linear, Check, ExperimentReport, Params, Relation};
use crate::equilibrium::{
    no_pne_certificate, single_item_scan, verify, BidRule, EquilibriumReport, Mode,
    StrategyProfile, Target, VerifyConfig,
};
use crate::error::Result;
use crate::mechanisms::{Auction, MechanismKind};
use crate::valuation::{
    estimate_c, estimate_gamma, Family, GridConfig, SignalProfile, SignalSpace, ValuationModel,
    DEFAULT_TOL,
};
use crate::welfare::{opt, ratio, sample_rng, welfare_single};

fn constant(bids: &[f64]) -> StrategyProfile {
    StrategyProfile {
        agents: bids.iter().map(|&bid| BidRule::Constant { bid }).collect(),
    }
}

fn point(s: &[f64]) -> Target {
    Target::Point(SignalProfile::single(s.to_vec()))
}

fn ok_eq(rep: &mut ExperimentReport, prefix: &str, eq: &EquilibriumReport) {
    rep.check(Check::new(
        &format!("{prefix}equilibrium_gain"),
        eq.max_gain,
        Relation::AtMost,
        0.0,
        VerifyConfig::default().eps,
    ));
    if let Some(w) = &eq.worst {
        rep.put(&format!("{prefix}deviation"), w);
    }
}

struct LbRun {
    eq: EquilibriumReport,
    payment: f64,
    welfare: f64,
    opt: f64,
}

/// One lower-bound instance: bids `(0, 1, 1)` at `s = 1`.
fn lb_run(
    case: u8,
    beta: f64,
    k: f64,
    eps: f64,
    steps: usize,
    kind: &MechanismKind,
) -> Result<LbRun> {
    let model = if case == 1 {
        ValuationModel::lower_bound_case1(beta, k, eps)
    } else {
        ValuationModel::lower_bound_case2(beta, k, eps)
    }
    .with_steps(steps);
    let auction = Auction::new(&model, kind.clone());
    let bids = [0.0, 1.0, 1.0];
    let s = [1.0; 3];
    let eq = verify(
        &auction,
        &constant(&bids),
        Mode::Pne,
        &point(&s),
        &VerifyConfig::default(),
    )?;
    let out = auction.run_single(&bids)?;
    let w = out.winners[0].expect("someone wins");
    Ok(LbRun {
        eq,
        payment: out.payments[w],
        welfare: model.value(w, 0, &s),
        opt: opt(&model, &SignalProfile::single(s.to_vec()))?,
    })
}

#[allow(clippy::too_many_arguments)]
fn lb_checks(
    rep: &mut ExperimentReport,
    prefix: &str,
    case: u8,
    beta: f64,
    k: f64,
    eps: f64,
    steps: usize,
    kind: &MechanismKind,
    sweep: bool,
) -> Result<()> {
    let run = lb_run(case, beta, k, eps, steps, kind)?;
    ok_eq(rep, prefix, &run.eq);
    // Agent 0 wins at its critical bid 0 under GVA in the first case; every
    // other combination pays the runner-up value eps.
    let pay = if case == 1 && *kind == MechanismKind::Gva {
        1.0
    } else {
        eps
    };
    rep.check(Check::new(
        &format!("{prefix}payment"),
        run.payment,
        Relation::Near,
        pay,
        1e-9,
    ));
    rep.check(Check::new(
        &format!("{prefix}welfare"),
        run.welfare,
        Relation::Near,
        beta + 1.0,
        1e-9 * beta,
    ));
    let r = ratio(run.opt, run.welfare);
    rep.check(Check::new(
        &format!("{prefix}ratio_exact"),
        r,
        Relation::Near,
        (k * beta + eps) / (beta + 1.0),
        1e-9,
    ));
    rep.check(Check::new(
        &format!("{prefix}ratio"),
        r,
        Relation::Near,
        k,
        0.01 * k,
    ));
    rep.put_num(&format!("{prefix}opt"), run.opt);
    if sweep {
        let mut ratios = Vec::new();
        let mut verified = true;
        for b in [1e2, 1e3, 1e4] {
            let run = lb_run(case, b, k, eps, steps, kind)?;
            verified &= run.eq.pass;
            ratios.push(ratio(run.opt, run.welfare));
        }
        let monotone = ratios
            .windows(2)
            .all(|w| w[1] >= w[0] && (k - w[1]).abs() <= (k - w[0]).abs());
        rep.put(&format!("{prefix}sweep_ratios"), &ratios);
        rep.check(Check::flag(&format!("{prefix}sweep_verified"), verified));
        rep.check(Check::flag(&format!("{prefix}sweep_monotone"), monotone));
    }
    Ok(())
}

fn mechanism_param(p: &Params) -> Result<MechanismKind> {
    p.string("mechanism", "gva", &["gva", "second_price"])?
        .parse()
}

pub(super) fn lower_bound(p: &Params, case: u8) -> Result<ExperimentReport> {
    let beta = p.f64("beta", 1e4, 1.0, 1e8)?;
    let k = if case == 1 {
        p.f64("c", 2.0, 1.0, 100.0)?
    } else {
        p.f64("gamma", 3.0, 1.0, 100.0)?
    };
    let eps = p.f64("eps", 0.01, 1e-6, 0.5)?;
    let steps = p.usize("steps", 100, 2, 10_000)?;
    let sweep = p.bool("sweep", true)?;
    let kind = mechanism_param(p)?;
    let name = format!("single_lb_case{case}");
    let mut rep = ExperimentReport::new(&name, p.finish()?);
    lb_checks(&mut rep, "", case, beta, k, eps, steps, &kind, sweep)?;
    Ok(rep)
}

pub(super) fn spa_lb(p: &Params) -> Result<ExperimentReport> {
    let beta = p.f64("beta", 1e4, 1.0, 1e8)?;
    let c = p.f64("c", 2.0, 1.0, 100.0)?;
    let gamma = p.f64("gamma", 3.0, 1.0, 100.0)?;
    let eps = p.f64("eps", 0.01, 1e-6, 0.5)?;
    let steps = p.usize("steps", 100, 2, 10_000)?;
    let sweep = p.bool("sweep", true)?;
    let mut rep = ExperimentReport::new("spa_lb", p.finish()?);
    let kind = MechanismKind::SecondPrice;
    lb_checks(&mut rep, "case1.", 1, beta, c, eps, steps, &kind, sweep)?;
    lb_checks(&mut rep, "case2.", 2, beta, gamma, eps, steps, &kind, sweep)?;
    Ok(rep)
}

/// Grids for deviations: each agent's space at `steps`.
fn grids(model: &ValuationModel, steps: usize) -> Vec<SignalSpace> {
    (0..model.n())
        .map(|i| model.space(i, 0).with_steps(steps))
        .collect()
}

fn ex_post(
    rep: &mut ExperimentReport,
    model: &ValuationModel,
    sigma: &StrategyProfile,
    steps: usize,
    context_steps: usize,
) -> Result<Option<f64>> {
    let auction = Auction::new(model, MechanismKind::Gva).with_grids(grids(model, steps))?;
    let cfg = VerifyConfig {
        context_steps: Some(context_steps),
        ..Default::default()
    };
    let eq = verify(&auction, sigma, Mode::Epe, &Target::Grid, &cfg)?;
    rep.put("contexts", eq.contexts);
    rep.put("sampled_contexts", eq.sampled);
    ok_eq(rep, "", &eq);
    if !eq.pass {
        return Ok(None);
    }
    let s = vec![1.0; model.n()];
    let w = welfare_single(&auction, &sigma.bids(&s)?, &s)?;
    let o = opt(model, &SignalProfile::single(s))?;
    rep.put_num("eq", w);
    rep.put_num("opt", o);
    Ok(Some(ratio(o, w)))
}

pub(super) fn gva_poa_linear(p: &Params) -> Result<ExperimentReport> {
    let n = p.usize("n", 20, 3, 24)?;
    let eps = p.f64("eps", 0.01, 1e-6, 0.5)?;
    let steps = p.usize("steps", 4, 1, 64)?;
    let context_steps = p.usize("context_steps", 1, 1, 8)?;
    let mut rep = ExperimentReport::new("gva_poa_linear", p.finish()?);
    let model = ValuationModel::single(Family::BadExample1 { eps }, n)?;
    let mut bids = vec![0.0; n];
    bids[0] = 1.0;
    bids[1] = 1.0;
    if let Some(r) = ex_post(&mut rep, &model, &constant(&bids), steps, context_steps)? {
        let target = (n as f64 + eps) / (2.0 + 2.0 * eps);
        rep.check(Check::new("ratio", r, Relation::Near, target, 1e-6));
    }
    Ok(rep)
}

pub(super) fn epic_sqrt_n(p: &Params) -> Result<ExperimentReport> {
    let n = p.usize("n", 16, 3, 20)?;
    let eps = p.f64("eps", 0.01, 1e-6, 0.5)?;
    let steps = p.usize("steps", 4, 1, 64)?;
    let context_steps = p.usize("context_steps", 1, 1, 8)?;
    let mut rep = ExperimentReport::new("epic_sqrt_n", p.finish()?);
    rep.note("instantiated with GVA, which is ex-post IC-IR under single crossing");
    let model = ValuationModel::single(Family::BadExample2 { eps }, n)?;
    let mut agents = vec![BidRule::Constant { bid: 0.0 }; n];
    agents[0] = BidRule::Truthful;
    agents[1] = BidRule::Truthful;
    let sigma = StrategyProfile { agents };
    if let Some(r) = ex_post(&mut rep, &model, &sigma, steps, context_steps)? {
        let target = (n as f64 + eps) / (n as f64).sqrt();
        rep.check(Check::new("ratio", r, Relation::Near, target, 1e-6));
    }
    Ok(rep)
}

pub(super) fn no_pne_sine(p: &Params) -> Result<ExperimentReport> {
    let points = p.usize("points", 300, 2, 2000)?;
    let threshold = p.f64("threshold", 0.5, 0.0, 10.0)?;
    let mut rep = ExperimentReport::new("no_pne_sine", p.finish()?);
    let model = ValuationModel::sine_pair();
    let grid = SignalSpace::new(0.0, 2.0 * PI, points - 1)?;
    let s = [2.0 * PI; 2];
    let lists = vec![grid.points(); 2];
    for kind in [MechanismKind::Gva, MechanismKind::SecondPrice] {
        let auction = Auction::new(&model, kind.clone()).with_grids(vec![grid.clone(); 2])?;
        let cert = no_pne_certificate(&auction, &s, &lists, VerifyConfig::default().eps)?;
        rep.check(Check::new(
            &format!("{kind}.min_max_gain"),
            cert.min_max_gain,
            Relation::AtLeast,
            threshold,
            0.0,
        ));
        rep.put(&format!("{kind}.certificate"), &cert);
    }
    Ok(rep)
}

fn rsv_ratio(n: usize, c: f64, rep: Option<&mut ExperimentReport>) -> Result<f64> {
    let model = ValuationModel::single(Family::RsvExample { c }, n)?;
    let auction = Auction::new(&model, MechanismKind::RandomSamplingVickrey);
    let mut bids = vec![0.0; n];
    bids[0] = 1.0;
    let s = vec![1.0; n];
    let e = auction.rsv_expectation(&bids, &s)?;
    let r = ratio(e.opt, e.expected_welfare);
    if let Some(rep) = rep {
        let split = 0.5_f64.powi(n as i32);
        let opt = 1.0 + c * (n - 1) as f64;
        let bound = split * opt + (1.0 - split) * (2 * n + 1) as f64;
        rep.check(Check::new(
            "win_prob_agent0",
            e.win_prob[0],
            Relation::Near,
            split,
            1e-15,
        ));
        rep.check(Check::new("opt", e.opt, Relation::Near, opt, 1e-9 * opt));
        rep.check(Check::new(
            "welfare",
            e.expected_welfare,
            Relation::AtMost,
            bound,
            1e-9,
        ));
        rep.check(Check::new("ratio", r, Relation::AtLeast, 0.25 / split, 0.0));
        rep.put("win_prob", &e.win_prob);
    }
    Ok(r)
}

pub(super) fn rsv_exponential(p: &Params) -> Result<ExperimentReport> {
    let n = p.usize("n", 10, 3, 12)?;
    let c = p.f64("c", 2.0 * 2f64.powi(n as i32), 0.0, 1e12)?;
    let steps = p.usize("steps", 4, 1, 64)?;
    let sweep = p.bool("sweep", true)?;
    let mut rep = ExperimentReport::new("rsv_exponential", p.finish()?);
    let model = ValuationModel::single(Family::RsvExample { c }, n)?.with_steps(steps);
    let auction = Auction::new(&model, MechanismKind::RandomSamplingVickrey);
    let mut agents = vec![BidRule::Constant { bid: 0.0 }; n];
    agents[0] = BidRule::Truthful;
    let sigma = StrategyProfile { agents };
    let s = vec![1.0; n];
    let cfg = VerifyConfig::default();
    let eq = verify(&auction, &sigma, Mode::Pne, &point(&s), &cfg)?;
    ok_eq(&mut rep, "", &eq);
    let cfg = VerifyConfig {
        context_steps: Some(1),
        ..cfg
    };
    let epe = verify(&auction, &sigma, Mode::Epe, &Target::Grid, &cfg)?;
    ok_eq(&mut rep, "ex_post.", &epe);
    rsv_ratio(n, c, Some(&mut rep))?;
    if sweep {
        let ratios: Vec<f64> = (6..=12)
            .map(|k| rsv_ratio(k, 2.0 * 2f64.powi(k as i32), None))
            .collect::<Result<_>>()?;
        let growth: Vec<f64> = ratios.windows(2).map(|w| w[1] / w[0]).collect();
        let lo = growth.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = growth.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        rep.put("sweep_ratios", &ratios);
        rep.put("sweep_growth", &growth);
        rep.check(Check::new("growth_min", lo, Relation::AtLeast, 1.5, 0.0));
        rep.check(Check::new("growth_max", hi, Relation::AtMost, 2.5, 0.0));
    }
    Ok(rep)
}

/// Violations of truthful bidding being a best response, over every grid
/// signal profile and every no-overbidding report of the others.
fn dsic_violations(model: &ValuationModel) -> Result<(u64, u64, f64)> {
    let n = model.n();
    let auction = Auction::new(model, MechanismKind::Gva);
    let pts: Vec<Vec<f64>> = (0..n).map(|i| model.space(i, 0).points()).collect();
    let sizes: Vec<usize> = pts.iter().map(|p| p.len()).collect();
    let total: usize = sizes.iter().product();
    let decode = |mut p: usize| {
        let mut idx = vec![0; n];
        for j in (0..n).rev() {
            idx[j] = p % sizes[j];
            p /= sizes[j];
        }
        idx
    };
    // Lottery of every grid bid profile.
    let spec = auction.spec();
    let lots: Vec<(Vec<f64>, Vec<f64>)> = (0..total)
        .into_par_iter()
        .map_init(
            || spec.build(),
            |auc, p| {
                let b: Vec<f64> = decode(p)
                    .iter()
                    .enumerate()
                    .map(|(i, &k)| pts[i][k])
                    .collect();
                auc.lottery(&b).map(|l| (l.win, l.pay))
            },
        )
        .collect::<Result<_>>()?;
    let stride = |i: usize| sizes[i + 1..].iter().product::<usize>();
    let (checked, bad, worst) = (0..total)
        .into_par_iter()
        .map(|sp| {
            let si = decode(sp);
            let s: Vec<f64> = si.iter().enumerate().map(|(i, &k)| pts[i][k]).collect();
            let truth = model.values(0, &s);
            let (mut checked, mut bad, mut worst) = (0u64, 0u64, 0.0_f64);
            for i in 0..n {
                let st = stride(i);
                // Others bid on the grid at most their signals.
                let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                let mut idx = vec![0usize; n];
                loop {
                    let base: usize = (0..n).filter(|&j| j != i).map(|j| idx[j] * stride(j)).sum();
                    let u = |k: usize| {
                        let (w, p) = &lots[base + k * st];
                        w[i] * truth[i] - p[i]
                    };
                    let honest = u(si[i]);
                    for k in 0..=si[i] {
                        let g = u(k) - honest;
                        checked += 1;
                        if g > DEFAULT_TOL * truth[i].abs().max(1.0) {
                            bad += 1;
                        }
                        worst = worst.max(g);
                    }
                    if honest < -DEFAULT_TOL {
                        bad += 1;
                    }
                    // Next context of the others.
                    let mut t = 0;
                    while t < others.len() {
                        let j = others[t];
                        if idx[j] < si[j] {
                            idx[j] += 1;
                            break;
                        }
                        idx[j] = 0;
                        t += 1;
                    }
                    if t == others.len() {
                        break;
                    }
                }
            }
            (checked, bad, worst)
        })
        .reduce(|| (0, 0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2.max(b.2)));
    Ok((checked, bad, worst))
}

pub(super) fn proportional_mixture(p: &Params) -> Result<ExperimentReport> {
    let eps = p.f64("eps", 0.1, 1e-3, 0.9)?;
    let n = p.usize("n", 3, 2, 4)?;
    let steps = p.usize("steps", 10, 2, 20)?;
    let dsic_steps = p.usize("dsic_steps", 19, 1, 40)?;
    let seed = p.u64("seed", 7, 0, u64::MAX)?;
    let mut rep = ExperimentReport::new("proportional_mixture", p.finish()?);
    let mut rng = sample_rng(seed, 0);
    let model = random_linear(&mut rng, n, 1, steps, true);
    rep.put(
        "weights",
        match model.family() {
            Family::LinearWeighted { weights, .. } => &weights[0],
            _ => unreachable!(),
        },
    );

    // Every no-overbidding grid profile of the mixture at a grid signal with
    // positive entries: truthful must be the only equilibrium.
    let s: Vec<f64> = (0..n)
        .map(|i| model.space(i, 0).point(rng.gen_range(1..=steps)))
        .collect();
    let kind = MechanismKind::Mixture {
        inner: Box::new(MechanismKind::Gva),
        eps,
    };
    let auction = Auction::new(&model, kind);
    let lists: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            model
                .space(i, 0)
                .points()
                .into_iter()
                .filter(|&x| x <= s[i] + DEFAULT_TOL)
                .collect()
        })
        .collect();
    let scan = single_item_scan(&auction, &s, &lists)?;
    let eqs = scan.equilibria(VerifyConfig::default().eps);
    let truthful_only = eqs.len() == 1 && {
        let idx = scan.decode(eqs[0]);
        idx.iter()
            .enumerate()
            .all(|(i, &k)| (lists[i][k] - s[i]).abs() <= DEFAULT_TOL)
    };
    rep.put("signals", &s);
    rep.put("profiles", scan.len());
    rep.put("equilibria", eqs.len());
    rep.check(Check::flag("truthful_unique", truthful_only));

    let w = welfare_single(&auction, &s, &s)?;
    let o = opt(&model, &SignalProfile::single(s.clone()))?;
    rep.check(Check::new(
        "ratio",
        ratio(o, w),
        Relation::AtMost,
        1.0 / (1.0 - eps),
        1e-9,
    ));

    let (checked, bad, worst) = dsic_violations(&model.clone().with_steps(dsic_steps))?;
    rep.put("dsic_cases", checked);
    rep.put_num("dsic_worst_gain", worst);
    rep.check(Check::new(
        "dsic_violations",
        bad as f64,
        Relation::AtMost,
        0.0,
        0.0,
    ));
    Ok(rep)
}

pub(super) fn upper_bound_search(p: &Params) -> Result<ExperimentReport> {
    let instances = p.u64("instances", 200, 1, 100_000)?;
    let seed = p.u64("seed", 11, 0, u64::MAX)?;
    let eps = p.f64("eps", 1e-9, 0.0, 1.0)?;
    let mut rep = ExperimentReport::new("upper_bound_search", p.finish()?);

    struct Found {
        exact_sc: bool,
        equilibria: u64,
        worst_general: f64,
        worst_sc: f64,
    }
    let found: Vec<Found> = (0..instances)
        .into_par_iter()
        .map(|k| {
            let mut rng = sample_rng(seed, k);
            let n = 2 + (k % 3) as usize;
            let steps = [8, 5, 3][n - 2];
            let model = random_linear(&mut rng, n, 1, steps, k % 2 == 0);
            let g = estimate_gamma(&model, &GridConfig::default())
                .estimate
                .unwrap_or(f64::INFINITY);
            let c = estimate_c(&model, &GridConfig::default())
                .estimate
                .unwrap_or(f64::INFINITY);
            let exact_sc = c <= 1.0 + 1e-9;
            let s: Vec<f64> = (0..n)
                .map(|i| grid_point(&mut rng, model.space(i, 0)))
                .collect();
            let o = opt(&model, &SignalProfile::single(s.clone()))?;
            let lists: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    model
                        .space(i, 0)
                        .points()
                        .into_iter()
                        .filter(|&x| x <= s[i] + DEFAULT_TOL)
                        .collect()
                })
                .collect();
            let mut out = Found {
                exact_sc,
                equilibria: 0,
                worst_general: f64::INFINITY,
                worst_sc: f64::INFINITY,
            };
            for kind in [MechanismKind::Gva, MechanismKind::SecondPrice] {
                let auction = Auction::new(&model, kind.clone());
                let scan = single_item_scan(&auction, &s, &lists)?;
                for q in scan.equilibria(eps) {
                    let bids: Vec<f64> = scan
                        .decode(q)
                        .iter()
                        .enumerate()
                        .map(|(i, &j)| lists[i][j])
                        .collect();
                    let r = ratio(o, welfare_single(&auction, &bids, &s)?);
                    out.equilibria += 1;
                    out.worst_general = out.worst_general.min(1.0 + g.max(c) - r);
                    if exact_sc && kind == MechanismKind::Gva {
                        out.worst_sc = out.worst_sc.min(g - r);
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let exact = found.iter().filter(|f| f.exact_sc).count();
    let with_eq = found.iter().filter(|f| f.equilibria > 0).count();
    let total: u64 = found.iter().map(|f| f.equilibria).sum();
    let general = found
        .iter()
        .map(|f| f.worst_general)
        .fold(f64::INFINITY, f64::min);
    let sc = found
        .iter()
        .map(|f| f.worst_sc)
        .fold(f64::INFINITY, f64::min);
    rep.put("instances_with_equilibria", with_eq);
    rep.put("equilibria", total);
    rep.put("exact_sc_instances", exact);
    rep.check(Check::new(
        "exact_sc_share",
        exact as f64 / instances as f64,
        Relation::AtLeast,
        0.5,
        0.0,
    ));
    rep.check(Check::new(
        "general_bound_margin",
        general,
        Relation::AtLeast,
        0.0,
        1e-6,
    ));
    rep.check(Check::new(
        "gamma_bound_margin",
        sc,
        Relation::AtLeast,
        0.0,
        1e-6,
    ));
    Ok(rep)
}

pub(super) fn smoothness_sweep(p: &Params) -> Result<ExperimentReport> {
    let cases = p.u64("cases", 10_000, 1, 10_000_000)?;
    let seed = p.u64("seed", 13, 0, u64::MAX)?;
    let steps = p.usize("steps", 8, 1, 64)?;
    let mut rep = ExperimentReport::new("smoothness_sweep", p.finish()?);
    let (bad, worst) = (0..cases)
        .into_par_iter()
        .map(|k| {
            let mut rng = sample_rng(seed, k);
            let n = rng.gen_range(2..=4);
            let sc = rng.gen_bool(0.5);
            let model = random_linear(&mut rng, n, 1, steps, sc);
            let (g, c) = declared_max(&model)?;
            let s: Vec<f64> = (0..n)
                .map(|i| grid_point(&mut rng, model.space(i, 0)))
                .collect();
            let b: Vec<f64> = (0..n)
                .map(|i| {
                    let sp = model.space(i, 0);
                    let top = sp.index_of(s[i], DEFAULT_TOL).unwrap_or(0);
                    sp.point(rng.gen_range(0..=top))
                })
                .collect();
            let chk = crate::equilibrium::check_smoothness_single(&model, g, c, &s, &b, 1e-9)?;
            Ok(((!chk.holds) as u64, chk.lhs - chk.rhs))
        })
        .try_reduce(|| (0, f64::INFINITY), |a, b| Ok((a.0 + b.0, a.1.min(b.1))))?;
    rep.put("cases", cases);
    rep.put_num("min_slack", worst);
    rep.check(Check::new(
        "violations",
        bad as f64,
        Relation::AtMost,
        0.0,
        0.0,
    ));
    Ok(rep)
}

pub(super) fn lemma_diff_sweep(p: &Params) -> Result<ExperimentReport> {
    let cases = p.u64("cases", 10_000, 1, 10_000_000)?;
    let seed = p.u64("seed", 17, 0, u64::MAX)?;
    let mut rep = ExperimentReport::new("lemma_diff_sweep", p.finish()?);
    let (lemma_bad, cor_bad, antecedent) = (0..cases)
        .into_par_iter()
        .map(|k| {
            let mut rng = sample_rng(seed, k);
            let model = match k % 4 {
                0 => {
                    let n = rng.gen_range(2..=5);
                    let sc = rng.gen_bool(0.5);
                    random_linear(&mut rng, n, 1, 8, sc)
                }
                1 => {
                    let n = rng.gen_range(2..=5);
                    let alpha = rng.gen_range(0.0..3.0);
                    ValuationModel::single(Family::ResaleStyle { alpha }, n)?
                }
                2 => ValuationModel::lower_bound_case1(
                    rng.gen_range(1.0..1e3),
                    rng.gen_range(1.0..5.0),
                    rng.gen_range(0.001..0.5),
                ),
                _ => ValuationModel::lower_bound_case2(
                    rng.gen_range(1.0..1e3),
                    rng.gen_range(1.0..5.0),
                    rng.gen_range(0.001..0.5),
                ),
            };
            let n = model.n();
            let (g, c) = declared_max(&model)?;
            let big = g.max(c);
            let i = rng.gen_range(0..n);
            let j = (i + rng.gen_range(1..n)) % n;
            let s: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let delta: Vec<f64> = (0..n)
                .map(|t| {
                    if t == i || rng.gen_bool(0.3) {
                        0.0
                    } else {
                        rng.gen::<f64>()
                    }
                })
                .collect();
            let moved: Vec<f64> = s.iter().zip(&delta).map(|(a, b)| a + b).collect();
            let (vi, vi2) = (model.value(i, 0, &s), model.value(i, 0, &moved));
            let (vj, vj2) = (model.value(j, 0, &s), model.value(j, 0, &moved));
            let slack = 1e-9
                * [vi, vi2, vj, vj2]
                    .iter()
                    .fold(1.0_f64, |a, v| a.max(v.abs()));
            let lemma_ok = vj2 - vj >= (vi2 - vi) / big - slack;
            let d = big * (1.0 + rng.gen::<f64>());
            let pre = vj >= vi / d;
            let cor_ok = !pre || vj2 >= vi2 / d - slack;
            Ok(((!lemma_ok) as u64, (!cor_ok) as u64, pre as u64))
        })
        .try_reduce(|| (0, 0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1, a.2 + b.2)))?;
    rep.put("cases", cases);
    rep.put("corollary_antecedent_holds", antecedent);
    rep.check(Check::new(
        "lemma_violations",
        lemma_bad as f64,
        Relation::AtMost,
        0.0,
        0.0,
    ));
    rep.check(Check::new(
        "corollary_violations",
        cor_bad as f64,
        Relation::AtMost,
        0.0,
        0.0,
    ));
    Ok(rep)
}
