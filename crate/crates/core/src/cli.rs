//! Command dispatch and report emission for the `ivauctions` binary.
//!
//! Exit codes: 0 when every check passes, 2 when a check fails with a
//! witness, 1 on usage or configuration errors.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use crate::equilibrium::{
    no_pne_certificate, verify, verify_multi, Mode, Prior, Target, VerifyConfig,
};
use crate::error::{Error, Result};
use crate::experiments::{reproduce, ExperimentSpec};
use crate::mechanisms::{multi_utility, Auction, MechanismKind};
use crate::scenario::{load_scenario, sha256_hex, Scenario, Strategy};
use crate::valuation::{
    check_property, estimate_c, estimate_gamma, GridConfig, Property, SignalProfile,
};
use crate::welfare::{opt, poa_report, poa_report_multi, welfare_multi, welfare_single};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAIL: i32 = 2;

/// Environment variable that overrides `--threads`.
pub const THREADS_ENV: &str = "IVAUCTIONS_THREADS";

const MONTECARLO: [&str; 2] = ["ballsbins_multineg", "weighted_sum_mhr"];

#[derive(Parser, Debug)]
#[command(
    name = "ivauctions",
    version,
    about = "Interdependent-value auctions: checks, equilibria, welfare and experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario's mechanism.
    #[arg(long)]
    mechanism: Option<String>,
    #[arg(long, default_value = "pne")]
    mode: String,
    /// Re-grids every signal space to this many steps.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long)]
    name: String,
    /// `key=value`; values are read as JSON when they parse, else as strings.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate gamma and c and check structural properties of the model.
    Check {
        #[command(flatten)]
        s: ScenarioArgs,
        /// monotone, homogeneous_influence, submodular, lemma_diff_bound,
        /// corollary_ratio; repeat or separate with commas.
        #[arg(long, value_delimiter = ',')]
        property: Vec<String>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        d: Option<f64>,
    },
    /// Run the mechanism on the scenario's bids.
    Run {
        #[command(flatten)]
        s: ScenarioArgs,
    },
    /// Verify the scenario's strategy, or search the NOB grid for a PNE.
    Equilibrium {
        #[command(flatten)]
        s: ScenarioArgs,
    },
    /// Welfare of the scenario's strategy against OPT and OPT~.
    Welfare {
        #[command(flatten)]
        s: ScenarioArgs,
    },
    /// Run a named experiment.
    Reproduce {
        #[command(flatten)]
        e: ExperimentArgs,
    },
    /// Run a Monte Carlo experiment.
    Montecarlo {
        #[command(flatten)]
        e: ExperimentArgs,
    },
}

/// Report body plus verdict.
struct Outcome {
    command: &'static str,
    pass: bool,
    hash: Option<String>,
    grid: Option<usize>,
    seed: Option<u64>,
    result: Value,
}

/// A finished report: the verdict and the JSON document.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub pass: bool,
    pub value: Value,
}

impl From<Outcome> for Report {
    fn from(o: Outcome) -> Self {
        Report {
            pass: o.pass,
            value: envelope(&o),
        }
    }
}

/// Runs `check` (default properties), `run`, `equilibrium` or `welfare` on
/// a loaded scenario.
pub fn scenario_command(command: &str, sc: &Scenario, mode: Mode) -> Result<Report> {
    let o = match command {
        "check" => check(sc, &[], None, None, None)?,
        "run" => run(sc)?,
        "equilibrium" => equilibrium(sc, mode)?,
        "welfare" => welfare(sc, mode)?,
        other => {
            return Err(Error::config(
                "/command",
                format!("unknown command '{other}'"),
            ))
        }
    };
    Ok(o.into())
}

/// Runs a named experiment and wraps its report.
pub fn experiment_command(spec: &ExperimentSpec) -> Result<Report> {
    Ok(experiment_spec("reproduce", spec)?.into())
}

/// Parses `argv` (program name first), runs the command and writes the
/// report. Returns the process exit code.
pub fn execute<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_PASS
            };
        }
    };
    if let Some(t) = threads(cli.threads) {
        // A second call in one process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    let out = match dispatch(&cli.command) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Schema(issues) = &e {
                for i in issues {
                    eprintln!(
                        "  {}: {}",
                        if i.pointer.is_empty() {
                            "/"
                        } else {
                            &i.pointer
                        },
                        i.message
                    );
                }
            }
            return EXIT_USAGE;
        }
    };
    let report = Report::from(out);
    let text = render(&report.value, cli.format);
    let written = match &cli.out {
        Some(p) => std::fs::write(p, text.as_bytes()).map_err(|e| format!("{}: {e}", p.display())),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    if report.pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

fn threads(flag: Option<usize>) -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .or(flag)
        .filter(|&t| t > 0)
}

fn dispatch(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::Check {
            s,
            property,
            gamma,
            c,
            d,
        } => {
            let sc = load(s)?;
            check(&sc, property, *gamma, *c, *d)
        }
        Command::Run { s } => run(&load(s)?),
        Command::Equilibrium { s } => equilibrium(&load(s)?, s.mode.parse()?),
        Command::Welfare { s } => welfare(&load(s)?, s.mode.parse()?),
        Command::Reproduce { e } => experiment("reproduce", e),
        Command::Montecarlo { e } => {
            if !MONTECARLO.contains(&e.name.as_str()) {
                return Err(Error::config(
                    "/name",
                    format!("montecarlo runs one of {}", MONTECARLO.join(", ")),
                ));
            }
            experiment("montecarlo", e)
        }
    }
}

fn load(a: &ScenarioArgs) -> Result<Scenario> {
    let mut sc = load_scenario(&a.scenario)?;
    if let Some(g) = a.grid {
        if g == 0 {
            return Err(Error::config("/grid", "must be positive"));
        }
        sc.model = sc.model.clone().with_steps(g);
    }
    if let Some(k) = &a.mechanism {
        let k: MechanismKind = k.parse()?;
        if !k.is_multi() && !sc.model.is_single() {
            return Err(Error::config(
                "/mechanism",
                format!("{k} needs a single-item model"),
            ));
        }
        if k.is_multi() != sc.mechanism.is_multi() && sc.strategy.is_some() {
            return Err(Error::config(
                "/mechanism",
                "strategy does not fit this mechanism",
            ));
        }
        sc.mechanism = k;
    }
    if let Some(e) = a.eps {
        if !(e.is_finite() && e >= 0.0) {
            return Err(Error::config("/eps", "expected a non-negative number"));
        }
        sc.eps = e;
    }
    if let Some(s) = a.seed {
        sc.seed = s;
    }
    Ok(sc)
}

fn value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report serializes")
}

fn scenario_outcome(command: &'static str, sc: &Scenario, pass: bool, result: Value) -> Outcome {
    Outcome {
        command,
        pass,
        hash: Some(sc.hash()),
        grid: Some(sc.grid()),
        seed: Some(sc.seed),
        result,
    }
}

fn parse_property(name: &str, gamma: f64, c: f64, d: Option<f64>) -> Result<Property> {
    Ok(match name.trim() {
        "monotone" => Property::Monotone,
        "homogeneous_influence" => Property::HomogeneousInfluence,
        "submodular" => Property::Submodular,
        "lemma_diff_bound" => Property::LemmaDiffBound { gamma, c },
        "corollary_ratio" => Property::CorollaryRatio {
            gamma,
            c,
            d: d.ok_or_else(|| Error::config("/d", "corollary_ratio needs --d"))?,
        },
        other => {
            return Err(Error::config(
                "/property",
                format!("unknown property '{other}'"),
            ))
        }
    })
}

fn check(
    sc: &Scenario,
    props: &[String],
    gamma: Option<f64>,
    c: Option<f64>,
    d: Option<f64>,
) -> Result<Outcome> {
    let cfg = GridConfig {
        tol: sc.tol,
        seed: sc.seed,
        ..Default::default()
    };
    let g = estimate_gamma(&sc.model, &cfg);
    let ce = estimate_c(&sc.model, &cfg);
    let gamma = gamma.or(g.estimate).unwrap_or(f64::INFINITY);
    let c = c.or(ce.estimate).unwrap_or(f64::INFINITY);
    let names: Vec<String> = if props.is_empty() {
        vec!["monotone".into()]
    } else {
        props.to_vec()
    };
    let reports = names
        .iter()
        .map(|n| parse_property(n, gamma, c, d).map(|p| check_property(&sc.model, &p, &cfg)))
        .collect::<Result<Vec<_>>>()?;
    let declared = sc.model.declared();
    let pass = reports.iter().all(|r| r.pass);
    Ok(scenario_outcome(
        "check",
        sc,
        pass,
        json!({
            "family": sc.model.family().name(),
            "estimates": {"gamma": value(&g), "c": value(&ce)},
            "declared": {
                "gamma": declared.gamma,
                "c": declared.c,
                "submodular": declared.submodular,
            },
            "properties": value(&reports),
        }),
    ))
}

fn run(sc: &Scenario) -> Result<Outcome> {
    let auction = Auction::new(&sc.model, sc.mechanism.clone());
    let mut r = Map::new();
    r.insert("mechanism".into(), Value::from(sc.mechanism.to_string()));
    if sc.mechanism.is_multi() {
        let reports = match (sc.reports(), &sc.strategy, &sc.signals) {
            (Some(r), _, _) => r,
            (None, Some(Strategy::Multi(p)), Some(s)) => p.reports(s)?,
            _ => {
                return Err(Error::config(
                    "/bids",
                    "required, or a strategy with signals",
                ))
            }
        };
        let out = auction.run_multi(&reports)?;
        r.insert("outcome".into(), value(&out));
        if let Some(s) = &sc.signals {
            let u: Vec<f64> = (0..sc.model.n())
                .map(|i| multi_utility(&sc.model, &out, i, s))
                .collect();
            r.insert("utilities".into(), value(&u));
            r.insert(
                "welfare".into(),
                value(&welfare_multi(&auction, s, &reports)?),
            );
            r.insert("opt".into(), value(&opt(&sc.model, s)?));
        }
    } else {
        let bids = match (&sc.bids, &sc.strategy, &sc.signals) {
            (Some(b), _, _) => b.as_single().expect("single-item bids"),
            (None, Some(Strategy::Single(p)), Some(s)) => p.bids(s.as_single())?,
            _ => {
                return Err(Error::config(
                    "/bids",
                    "required, or a strategy with signals",
                ))
            }
        };
        if !sc.mechanism.is_randomized() {
            r.insert("outcome".into(), value(&auction.run_single(&bids)?));
        }
        let lot = auction.lottery(&bids)?;
        if let Some(s) = &sc.signals {
            let s = s.as_single();
            let u: Vec<f64> = (0..sc.model.n())
                .map(|i| lot.utility(i, sc.model.value(i, 0, s)))
                .collect();
            r.insert("values".into(), value(&sc.model.values(0, s)));
            r.insert("utilities".into(), value(&u));
            r.insert(
                "welfare".into(),
                value(&welfare_single(&auction, &bids, s)?),
            );
            r.insert(
                "opt".into(),
                value(&opt(&sc.model, &SignalProfile::single(s.to_vec()))?),
            );
        }
        r.insert("lottery".into(), value(&lot));
    }
    Ok(scenario_outcome("run", sc, true, Value::Object(r)))
}

fn verify_config(sc: &Scenario) -> VerifyConfig {
    VerifyConfig {
        eps: sc.eps,
        context_steps: sc.context_steps,
        seed: sc.seed,
        ..Default::default()
    }
}

fn target(sc: &Scenario, mode: Mode) -> Result<Target> {
    Ok(match mode {
        Mode::Pne => Target::Point(
            sc.signals
                .clone()
                .ok_or_else(|| Error::config("/signals", "pne mode needs signals"))?,
        ),
        Mode::Epe => Target::Grid,
        Mode::Bne => Target::Prior(
            sc.prior
                .clone()
                .ok_or_else(|| Error::config("/prior", "bne mode needs a prior"))?,
        ),
    })
}

fn equilibrium(sc: &Scenario, mode: Mode) -> Result<Outcome> {
    let auction = Auction::new(&sc.model, sc.mechanism.clone());
    let cfg = verify_config(sc);
    match &sc.strategy {
        Some(strategy) => {
            let t = target(sc, mode)?;
            let rep = match strategy {
                Strategy::Single(p) => verify(&auction, p, mode, &t, &cfg)?,
                Strategy::Multi(p) => verify_multi(&auction, p, mode, &t, &cfg)?,
            };
            let verdict = if rep.pass {
                "equilibrium verified"
            } else {
                "profitable deviation found"
            };
            Ok(scenario_outcome(
                "equilibrium",
                sc,
                rep.pass,
                json!({"search": "verify", "verdict": verdict, "report": value(&rep)}),
            ))
        }
        None => {
            if mode != Mode::Pne || sc.mechanism.is_multi() {
                return Err(Error::config(
                    "/strategy",
                    "required unless searching single-item pure equilibria",
                ));
            }
            let s = sc
                .signals
                .as_ref()
                .ok_or_else(|| Error::config("/signals", "pne mode needs signals"))?
                .as_single();
            // No-overbidding bids: grid points at most the own signal.
            let lists: Vec<Vec<f64>> = (0..sc.model.n())
                .map(|i| {
                    sc.model
                        .space(i, 0)
                        .points()
                        .into_iter()
                        .filter(|&b| b <= s[i] + sc.tol)
                        .collect()
                })
                .collect();
            let cert = no_pne_certificate(&auction, s, &lists, sc.eps)?;
            let pass = cert.equilibria > 0;
            let verdict = if pass {
                "eps-PNE found on grid"
            } else {
                "no eps-PNE on grid"
            };
            Ok(scenario_outcome(
                "equilibrium",
                sc,
                pass,
                json!({"search": "exhaustive_nob", "verdict": verdict, "certificate": value(&cert)}),
            ))
        }
    }
}

fn welfare(sc: &Scenario, mode: Mode) -> Result<Outcome> {
    let auction = Auction::new(&sc.model, sc.mechanism.clone());
    let cfg = verify_config(sc);
    let t = target(sc, mode)?;
    let eval = match (&sc.prior, &sc.signals) {
        (Some(p), _) if mode != Mode::Pne => p.clone(),
        (_, Some(s)) => Prior::point(s.clone()),
        (Some(p), None) => p.clone(),
        (None, None) => return Err(Error::config("/prior", "welfare needs a prior or signals")),
    };
    let rep = match &sc.strategy {
        Some(Strategy::Single(p)) => poa_report(&auction, p, mode, &t, &eval, &cfg),
        Some(Strategy::Multi(p)) => poa_report_multi(&auction, p, mode, &t, &eval, &cfg),
        None => return Err(Error::config("/strategy", "welfare needs a strategy")),
    };
    match rep {
        Ok(r) => Ok(scenario_outcome("welfare", sc, true, value(&r))),
        Err(Error::NotEquilibrium {
            agent,
            gain,
            deviation,
        }) => {
            let dev = serde_json::from_str::<Value>(&deviation).unwrap_or(Value::from(deviation));
            Ok(scenario_outcome(
                "welfare",
                sc,
                false,
                json!({
                    "verdict": "not an equilibrium",
                    "agent": agent,
                    "gain": crate::experiments::num(gain),
                    "deviation": dev,
                }),
            ))
        }
        Err(e) => Err(e),
    }
}

fn parse_param(kv: &str) -> Result<(String, Value)> {
    let (k, v) = kv
        .split_once('=')
        .ok_or_else(|| Error::config("/params", format!("expected key=value, got '{kv}'")))?;
    let v = serde_json::from_str(v).unwrap_or_else(|_| Value::from(v));
    Ok((k.trim().to_string(), v))
}

fn experiment(command: &'static str, a: &ExperimentArgs) -> Result<Outcome> {
    let mut spec = ExperimentSpec::new(&a.name);
    for kv in &a.params {
        let (k, v) = parse_param(kv)?;
        spec.params.insert(k, v);
    }
    if let Some(s) = a.seed {
        spec.params.insert("seed".into(), Value::from(s));
    }
    experiment_spec(command, &spec)
}

fn experiment_spec(command: &'static str, spec: &ExperimentSpec) -> Result<Outcome> {
    let rep = reproduce(spec)?;
    let resolved = json!({"name": rep.name, "params": rep.params});
    let hash = sha256_hex(
        serde_json::to_string(&resolved)
            .expect("params serialize")
            .as_bytes(),
    );
    Ok(Outcome {
        command,
        pass: rep.pass,
        hash: Some(hash),
        grid: rep
            .params
            .get("steps")
            .and_then(Value::as_u64)
            .map(|g| g as usize),
        seed: rep.params.get("seed").and_then(Value::as_u64),
        result: value(&rep),
    })
}

fn envelope(o: &Outcome) -> Value {
    json!({
        "tool": "ivauctions",
        "version": env!("CARGO_PKG_VERSION"),
        "command": o.command,
        "scenario_hash": o.hash,
        "grid": o.grid,
        "seed": o.seed,
        "pass": o.pass,
        "result": o.result,
    })
}

fn render(v: &Value, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(v).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut rows = Vec::new();
            flatten("", v, &mut rows);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["pointer", "value"])
                .expect("in-memory write");
            for (k, x) in rows {
                w.write_record([k, x]).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
        }
    }
}

/// Leaves of `v` as (JSON pointer, scalar text) in document order.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let k = k.replace('~', "~0").replace('/', "~1");
                flatten(&format!("{prefix}/{k}"), x, out);
            }
        }
        Value::Array(xs) => {
            for (i, x) in xs.iter().enumerate() {
                flatten(&format!("{prefix}/{i}"), x, out);
            }
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Null => out.push((prefix.to_string(), String::new())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_escapes_keys() {
        let mut rows = Vec::new();
        flatten("", &json!({"a/b": [1, {"c": null}], "d": "x"}), &mut rows);
        assert_eq!(
            rows,
            vec![
                ("/a~1b/0".to_string(), "1".to_string()),
                ("/a~1b/1/c".to_string(), String::new()),
                ("/d".to_string(), "x".to_string()),
            ]
        );
    }

    #[test]
    fn params_parse_as_json_or_string() {
        assert_eq!(parse_param("beta=1e4").unwrap().1, json!(1e4));
        assert_eq!(parse_param("mechanism=gva").unwrap().1, json!("gva"));
        assert!(parse_param("nokey").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(execute(["ivauctions", "frobnicate"]), EXIT_USAGE);
        assert_eq!(
            execute(["ivauctions", "reproduce", "--name", "nope"]),
            EXIT_USAGE
        );
        assert_eq!(
            execute(["ivauctions", "montecarlo", "--name", "spa_lb"]),
            EXIT_USAGE
        );
    }
}
