use rand::Rng;
use rayon::prelude::*;

use super::{declared_max, random_linear, Check, ExperimentReport, Params, Relation};
use crate::equilibrium::{
    check_allin_lemma, check_nob_multi, multi_item_scan, verify_multi, Mode, MultiRule,
    MultiStrategyProfile, Prior, Target, VerifyConfig,
};
use crate::error::Result;
use crate::mechanisms::{Auction, MechanismKind, MultiReport};
use crate::valuation::{Family, SignalProfile, ValuationModel, DEFAULT_TOL};
use crate::welfare::{
    asymmetry_d, check_covers_lemma, decompose_self_other, opt, ratio, sample_rng, welfare_multi,
};

pub(super) fn participation_necessity(p: &Params) -> Result<ExperimentReport> {
    let n = p.usize("n", 10, 2, 12)?;
    let m = p.usize("m", 10, 1, 12)?;
    let steps = p.usize("steps", 4, 1, 64)?;
    let mut rep = ExperimentReport::new("participation_necessity", p.finish()?);
    let model = ValuationModel::new(Family::ParticipationNecessity, n, m)?.with_steps(steps);
    let auction = Auction::new(&model, MechanismKind::SimSecondPriceMandatory);
    let mut agents = vec![MultiRule::Truthful; n];
    agents[0] = MultiRule::Fixed {
        report: MultiReport::all_in(vec![0.0; m]),
    };
    let sigma = MultiStrategyProfile { agents };
    let s = SignalProfile::filled(n, m, 1.0);
    let eq = verify_multi(
        &auction,
        &sigma,
        Mode::Pne,
        &Target::Point(s.clone()),
        &VerifyConfig::default(),
    )?;
    rep.check(Check::new(
        "equilibrium_gain",
        eq.max_gain,
        Relation::AtMost,
        0.0,
        1e-9,
    ));
    if let Some(w) = &eq.worst {
        rep.put("deviation", w);
    }
    let w = welfare_multi(&auction, &s, &sigma.reports(&s)?)?;
    let o = opt(&model, &s)?;
    let k = n.min(m) as f64;
    let nf = n as f64;
    rep.check(Check::new("eq", w, Relation::Near, nf + 1.0, 1e-9));
    rep.check(Check::new(
        "opt",
        o,
        Relation::Near,
        nf + 1.0 + (k - 1.0) * (nf + 0.5),
        1e-9,
    ));
    rep.check(Check::new(
        "ratio",
        ratio(o, w),
        Relation::AtLeast,
        0.9 * m as f64,
        0.0,
    ));
    // Bidding zero while winning everything overbids in the multi-item
    // sense; reported, not required.
    let nob = check_nob_multi(&auction, &sigma, &Prior::point(s))?;
    rep.put("nob", &nob);
    rep.note("the equilibrium violates multi-item no-overbidding for agent 0; participation is mandatory");
    Ok(rep)
}

pub(super) fn tildeopt_far(p: &Params) -> Result<ExperimentReport> {
    let n = p.usize("n", 11, 3, 13)?;
    let eps = p.f64("eps", 0.1, 0.0, 1.0)?;
    let steps = p.usize("steps", 4, 1, 16)?;
    let mut rep = ExperimentReport::new("tildeopt_far", p.finish()?);
    rep.reconstructed = true;
    rep.note("valuations reconstructed from the welfare claims of the example");
    let m = n - 1;
    let model = ValuationModel::new(Family::TildeOptFar { eps }, n, m)?.with_steps(steps);
    let auction = Auction::new(&model, MechanismKind::SimPrivatizedSpa);
    let mut agents = vec![
        MultiRule::Fixed {
            report: MultiReport::abstain(m)
        };
        n
    ];
    agents[0] = MultiRule::Scaled {
        scale: 1.0 / m as f64,
        participate: vec![true; m],
    };
    let sigma = MultiStrategyProfile { agents };
    let diagonal = |x: f64| {
        let mut s = SignalProfile::filled(n, m, 0.0);
        for l in 0..m {
            s.set(0, l, x);
        }
        s
    };
    let contexts: Vec<SignalProfile> = model
        .space(0, 0)
        .points()
        .into_iter()
        .map(diagonal)
        .collect();
    let eq = verify_multi(
        &auction,
        &sigma,
        Mode::Epe,
        &Target::Profiles(contexts.clone()),
        &VerifyConfig::default(),
    )?;
    rep.put("contexts", eq.contexts);
    rep.check(Check::new(
        "equilibrium_gain",
        eq.max_gain,
        Relation::AtMost,
        0.0,
        1e-9,
    ));
    if let Some(w) = &eq.worst {
        rep.put("deviation", w);
    }
    let k = contexts.len() as f64;
    let uniform = Prior::new(contexts.into_iter().map(|s| (s, 1.0 / k)).collect())?;
    let nob = check_nob_multi(&auction, &sigma, &uniform)?;
    rep.check(Check::new(
        "nob_margin",
        nob.margin,
        Relation::AtLeast,
        0.0,
        DEFAULT_TOL,
    ));

    let s = diagonal(1.0);
    let w = welfare_multi(&auction, &s, &sigma.reports(&s)?)?;
    let o = opt(&model, &s)?;
    let d = asymmetry_d(&model, &Prior::point(s))?;
    let target = m as f64 * (1.0 - eps);
    rep.put_num("eq", w);
    rep.put_num("opt", o);
    rep.check(Check::new(
        "ratio",
        ratio(o, w),
        Relation::AtLeast,
        target,
        1e-9,
    ));
    rep.check(Check::new("d", d, Relation::AtLeast, target, 1e-9));
    Ok(rep)
}

/// Random signals in `[0, 1]` for every (agent, item).
fn random_signals(rng: &mut impl Rng, n: usize, m: usize) -> SignalProfile {
    SignalProfile::new(n, m, (0..n * m).map(|_| rng.gen()).collect()).expect("shape")
}

pub(super) fn allin_lemma_sweep(p: &Params) -> Result<ExperimentReport> {
    let cases = p.u64("cases", 10_000, 1, 10_000_000)?;
    let seed = p.u64("seed", 19, 0, u64::MAX)?;
    let mut rep = ExperimentReport::new("allin_lemma_sweep", p.finish()?);
    let (bad_i, bad_ii, worst_i, worst_ii) = (0..cases)
        .into_par_iter()
        .map(|k| {
            let mut rng = sample_rng(seed, k);
            let n = rng.gen_range(2..=4);
            let m = rng.gen_range(1..=3);
            let sc = rng.gen_bool(0.5);
            let model = random_linear(&mut rng, n, m, 8, sc);
            let (g, c) = declared_max(&model)?;
            let s = random_signals(&mut rng, n, m);
            let reports: Vec<MultiReport> = (0..n)
                .map(|_| MultiReport {
                    bids: (0..m).map(|_| rng.gen()).collect(),
                    participate: (0..m).map(|_| rng.gen_bool(0.6)).collect(),
                })
                .collect();
            let i = rng.gen_range(0..n);
            let l = rng.gen_range(0..m);
            let chk = check_allin_lemma(&model, g, c, &s, &reports, i, l, 1e-9)?;
            Ok((
                (!chk.holds_i) as u64,
                (!chk.holds_ii) as u64,
                chk.utility - chk.bound_i,
                chk.utility - chk.bound_ii,
            ))
        })
        .try_reduce(
            || (0, 0, f64::INFINITY, f64::INFINITY),
            |a, b| Ok((a.0 + b.0, a.1 + b.1, a.2.min(b.2), a.3.min(b.3))),
        )?;
    rep.put("cases", cases);
    rep.put_num("min_slack_i", worst_i);
    rep.put_num("min_slack_ii", worst_ii);
    rep.check(Check::new(
        "violations_i",
        bad_i as f64,
        Relation::AtMost,
        0.0,
        0.0,
    ));
    rep.check(Check::new(
        "violations_ii",
        bad_ii as f64,
        Relation::AtMost,
        0.0,
        0.0,
    ));
    Ok(rep)
}

pub(super) fn covers_lemma_sweep(p: &Params) -> Result<ExperimentReport> {
    let cases = p.u64("cases", 10_000, 1, 10_000_000)?;
    let seed = p.u64("seed", 23, 0, u64::MAX)?;
    let mut rep = ExperimentReport::new("covers_lemma_sweep", p.finish()?);
    let (bad, worst) = (0..cases)
        .into_par_iter()
        .map(|k| {
            let mut rng = sample_rng(seed, k);
            let n = rng.gen_range(2..=5);
            let m = rng.gen_range(1..=3);
            let sc = rng.gen_bool(0.5);
            let model = random_linear(&mut rng, n, m, 8, sc);
            let (g, c) = declared_max(&model)?;
            let s = random_signals(&mut rng, n, m);
            let i = rng.gen_range(0..n);
            let j = (i + rng.gen_range(1..n)) % n;
            let l = rng.gen_range(0..m);
            let chk = check_covers_lemma(&model, g, c, &s, i, j, l, 1e-9)?;
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

    // Without submodularity the inequality fails: 0 on the left, 1 on the right.
    let cross = ValuationModel::single(Family::ProductCross, 3)?;
    let ones = SignalProfile::single(vec![1.0; 3]);
    let chk = check_covers_lemma(&cross, 1.0, 1.0, &ones, 0, 1, 0, 1e-9)?;
    rep.put("product_cross", &chk);
    rep.check(Check::flag("product_cross_fails", !chk.holds));
    rep.check(Check::new(
        "product_cross_lhs",
        chk.lhs,
        Relation::Near,
        0.0,
        1e-12,
    ));
    rep.check(Check::new(
        "product_cross_rhs",
        chk.rhs,
        Relation::Near,
        1.0,
        1e-12,
    ));
    Ok(rep)
}

/// Reports of one agent: every participation set, with grid bids at most
/// the own signal on the participated items.
fn report_list(model: &ValuationModel, s: &SignalProfile, i: usize) -> Vec<MultiReport> {
    let m = model.m();
    let mut out = Vec::new();
    for mask in 0..1u32 << m {
        let part: Vec<bool> = (0..m).map(|l| mask >> l & 1 == 1).collect();
        let choices: Vec<Vec<f64>> = (0..m)
            .map(|l| {
                if part[l] {
                    model
                        .space(i, l)
                        .points()
                        .into_iter()
                        .filter(|&x| x <= s.get(i, l) + DEFAULT_TOL)
                        .collect()
                } else {
                    vec![0.0]
                }
            })
            .collect();
        let mut idx = vec![0usize; m];
        loop {
            out.push(MultiReport {
                bids: (0..m).map(|l| choices[l][idx[l]]).collect(),
                participate: part.clone(),
            });
            let mut t = 0;
            while t < m {
                idx[t] += 1;
                if idx[t] < choices[t].len() {
                    break;
                }
                idx[t] = 0;
                t += 1;
            }
            if t == m {
                break;
            }
        }
    }
    out
}

pub(super) fn multi_bound_search(p: &Params) -> Result<ExperimentReport> {
    let instances = p.usize("instances", 20, 1, 1000)?;
    let max_tries = p.usize("max_tries", 400, 1, 100_000)?;
    let seed = p.u64("seed", 29, 0, u64::MAX)?;
    let eps = p.f64("eps", 1e-9, 0.0, 1.0)?;
    let max_profiles = p.usize("max_profiles", 2_000_000, 1, 50_000_000)?;
    let mut rep = ExperimentReport::new("multi_bound_search", p.finish()?);

    let mut found = 0usize;
    let mut tries = 0usize;
    let mut equilibria = 0u64;
    let (mut self_margin, mut other_margin, mut tilde_margin) =
        (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    while found < instances && tries < max_tries {
        let mut rng = sample_rng(seed, tries as u64);
        tries += 1;
        let (size, steps) = if tries % 2 == 1 { (2, 4) } else { (3, 2) };
        let sc = rng.gen_bool(0.5);
        let model = random_linear(&mut rng, size, size, steps, sc);
        let (g, c) = declared_max(&model)?;
        let big = g.max(c);
        let other_k = big * (g.max(c + 1.0) + 2.0);
        let mut s = SignalProfile::filled(size, size, 0.0);
        for i in 0..size {
            for l in 0..size {
                let sp = model.space(i, l);
                s.set(i, l, sp.point(rng.gen_range(0..sp.len())));
            }
        }
        let lists: Vec<Vec<MultiReport>> = (0..size).map(|i| report_list(&model, &s, i)).collect();
        let total: usize = lists.iter().map(|r| r.len()).product();
        if total > max_profiles {
            continue;
        }
        let auction = Auction::new(&model, MechanismKind::SimPrivatizedSpa);
        let scan = multi_item_scan(&auction, &s, &lists)?;
        let dec = decompose_self_other(&model, &Prior::point(s.clone()))?;
        let mut any = false;
        for q in scan.equilibria(eps) {
            let reps: Vec<MultiReport> = scan
                .decode(q)
                .iter()
                .enumerate()
                .map(|(i, &k)| lists[i][k].clone())
                .collect();
            let sigma = MultiStrategyProfile::fixed(reps.clone());
            if !check_nob_multi(&auction, &sigma, &Prior::point(s.clone()))?.pass {
                continue;
            }
            any = true;
            equilibria += 1;
            let w = welfare_multi(&auction, &s, &reps)?;
            let scale = dec.opt_tilde.abs().max(1.0);
            self_margin = self_margin.min((2.0 * w - dec.self_part) / scale);
            other_margin = other_margin.min((other_k * w - dec.other) / scale);
            tilde_margin = tilde_margin.min(((2.0 + other_k) * w - dec.opt_tilde) / scale);
        }
        found += any as usize;
    }
    rep.put("instances_with_equilibria", found);
    rep.put("tries", tries);
    rep.put("equilibria", equilibria);
    rep.check(Check::new(
        "instances",
        found as f64,
        Relation::AtLeast,
        instances as f64,
        0.0,
    ));
    rep.check(Check::new(
        "self_margin",
        self_margin,
        Relation::AtLeast,
        0.0,
        1e-9,
    ));
    rep.check(Check::new(
        "other_margin",
        other_margin,
        Relation::AtLeast,
        0.0,
        1e-9,
    ));
    rep.check(Check::new(
        "opt_tilde_margin",
        tilde_margin,
        Relation::AtLeast,
        0.0,
        1e-9,
    ));
    Ok(rep)
}
