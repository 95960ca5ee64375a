use rand::seq::index::sample;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde_json::{Map, Value};

use super::{Check, ExperimentReport, ExperimentSpec, Params, Relation};
use crate::error::Result;
use crate::valuation::{Family, ValuationModel};
use crate::welfare::{
    asymmetry_d_sampled, max_weight_value, sample_rng, Estimate, SignalDistribution,
};

/// Balls-and-bins instance: `n` agents, `n^2` items, each signal one with
/// probability `1/n`, item value `1 + sum_j s_jl` for every agent.
pub fn montecarlo_multineg(n: usize, trials: u64, seed: u64) -> Result<ExperimentReport> {
    super::reproduce(
        &ExperimentSpec::new("ballsbins_multineg")
            .param("n", n as u64)
            .param("trials", trials)
            .param("seed", seed),
    )
}

/// `OPT / OPT~` of the weighted-sum family under exponential signals.
pub fn montecarlo_weighted_sum(
    n: usize,
    beta: f64,
    trials: u64,
    seed: u64,
) -> Result<ExperimentReport> {
    let mut params = Map::new();
    params.insert("n".into(), Value::from(n as u64));
    params.insert("beta".into(), Value::from(beta));
    params.insert("trials".into(), Value::from(trials));
    params.insert("seed".into(), Value::from(seed));
    super::reproduce(&ExperimentSpec {
        name: "weighted_sum_mhr".into(),
        params,
    })
}

struct Trial {
    block_max: f64,
    global_max: f64,
    subset_max: f64,
    block_sum: f64,
    opt: f64,
}

/// Counts of integer-valued samples as `[value, count]` rows, ascending.
fn histogram(xs: impl Iterator<Item = f64>) -> Vec<[u64; 2]> {
    let mut counts = std::collections::BTreeMap::new();
    for x in xs {
        *counts.entry(x as u64).or_insert(0u64) += 1;
    }
    counts.into_iter().map(|(v, c)| [v, c]).collect()
}

pub(super) fn ballsbins(p: &Params) -> Result<ExperimentReport> {
    let n = p.usize("n", 64, 16, 256)?;
    let trials = p.u64("trials", 1000, 100, 1_000_000)?;
    let seed = p.u64("seed", 31, 0, u64::MAX)?;
    let mut rep = ExperimentReport::new("ballsbins_multineg", p.finish()?);

    let nf = n as f64;
    let (l1, l2) = (nf.ln(), nf.ln().ln());
    let l3 = l2.ln();
    let subset = (l1 * l1).floor() as usize;
    let binom = Binomial::new(n as u64, 1.0 / nf).expect("valid binomial");

    let rows: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = sample_rng(seed, t);
            // The signals of one item only enter through their sum.
            let values: Vec<f64> = (0..n * n)
                .map(|_| 1.0 + binom.sample(&mut rng) as f64)
                .collect();
            let blocks: Vec<f64> = values
                .chunks(n)
                .map(|b| b.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
                .collect();
            let block_sum: f64 = blocks.iter().sum();
            let global_max = blocks.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let subset_max = sample(&mut rng, n * n, subset)
                .iter()
                .map(|k| values[k])
                .fold(f64::NEG_INFINITY, f64::max);
            // Common values: every agent values an item alike, so the
            // optimum matches the n agents to the n best items.
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let top = &sorted[..n];
            let w: Vec<Vec<f64>> = (0..n).map(|_| top.to_vec()).collect();
            Trial {
                block_max: block_sum / nf,
                global_max,
                subset_max,
                block_sum,
                opt: max_weight_value(&w),
            }
        })
        .collect();

    let est =
        |f: fn(&Trial) -> f64| Estimate::from_samples(&rows.iter().map(f).collect::<Vec<_>>());
    let block = est(|t| t.block_max);
    let global = est(|t| t.global_max);
    let sub = est(|t| t.subset_max);
    let opt = est(|t| t.opt);
    let block_sum = est(|t| t.block_sum);
    let gap = est(|t| t.opt - t.block_sum);

    let lb_block = 1.0 + l1 / (3.0 * l2);
    let ub_max = 4.0 * l1 / l2 + 3.0;
    let ub_subset = 4.0 * l2 / l3 + 4.0;
    rep.put("block_max", block);
    rep.put("global_max", global);
    rep.put("subset_max", sub);
    rep.put("subset_size", subset);
    rep.put("global_max_histogram", histogram(rows.iter().map(|t| t.global_max)));
    rep.put("subset_max_histogram", histogram(rows.iter().map(|t| t.subset_max)));
    rep.put("opt", opt);
    rep.put("block_sum", block_sum);
    rep.put_num("opt_scale", nf * l1 / l2);
    rep.put_num("opt_over_scale", opt.mean / (nf * l1 / l2));
    rep.check(Check::new(
        "a.block_max",
        block.mean,
        Relation::AtLeast,
        lb_block,
        3.0 * block.se,
    ));
    rep.check(Check::new(
        "b.global_max",
        global.mean,
        Relation::AtMost,
        ub_max,
        3.0 * global.se,
    ));
    rep.check(Check::new(
        "c.subset_max",
        sub.mean,
        Relation::AtMost,
        ub_subset,
        3.0 * sub.se,
    ));
    rep.check(Check::new(
        "d.opt_minus_block_sum",
        gap.mean,
        Relation::AtLeast,
        0.0,
        0.0,
    ));

    // Per-agent cap on equilibrium value: the measured best value in a
    // random ln^2 n set, the most generous reading of the two claims. The
    // Markov mixture with the global maximum is reported alongside.
    let tail = (ub_max / (l1 * l1)).min(1.0);
    let mixed = (1.0 - tail) * sub.mean + tail * global.mean;
    rep.put_num("ratio_markov_mixture", block.mean / mixed);
    rep.check(Check::new(
        "ratio",
        block.mean / sub.mean,
        Relation::AtLeast,
        1.3,
        0.0,
    ));
    rep.note("the ratio target is not reached at n = 64; see the ratio check");
    Ok(rep)
}

pub(super) fn weighted_sum(p: &Params) -> Result<ExperimentReport> {
    let n = p.usize("n", 10, 2, 64)?;
    let beta = p.f64("beta", 1.0, 1e-9, 100.0)?;
    let alpha = p.f64("alpha", 0.0, 0.0, 100.0)?;
    let trials = p.u64("trials", 2000, 10, 10_000_000)?;
    let seed = p.u64("seed", 37, 0, u64::MAX)?;
    let mut rep = ExperimentReport::new("weighted_sum_mhr", p.finish()?);
    rep.reconstructed = true;
    rep.note("weighted-sum valuations reconstructed from the bound's derivation");
    let model = ValuationModel::new(Family::WeightedSum { alpha, beta }, n, n)?;
    let d = asymmetry_d_sampled(
        &model,
        &SignalDistribution::Exponential { rate: 1.0 },
        trials,
        seed,
    )?;
    let bound = 1.0 + std::f64::consts::E.powi(2);
    rep.put("opt", d.opt);
    rep.put("opt_tilde", d.opt_tilde);
    rep.put("d", d.d);
    rep.check(Check::new(
        "d",
        d.d.mean,
        Relation::AtMost,
        bound,
        3.0 * d.d.se,
    ));
    Ok(rep)
}
