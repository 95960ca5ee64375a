//! Scenario files: a model, optional bids, strategies and prior, and the
//! numerical settings of a run.
//!
//! Loading collects every problem it finds, each located by a JSON pointer,
//! instead of stopping at the first. A loaded scenario serializes back to a
//! canonical form with all defaults explicit; its SHA-256 is the scenario
//! hash embedded in reports.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use std::path::Path;

use crate::equilibrium::{MultiStrategyProfile, Prior, StrategyProfile};
use crate::error::{Error, Issue, Result};
use crate::mechanisms::{BidProfile, MechanismKind, MultiReport};
use crate::valuation::{ModelSpec, SignalProfile, ValuationModel, DEFAULT_TOL};

pub const SCHEMA_VERSION: u64 = 1;

/// Top-level keys a scenario may carry.
pub const FIELDS: [&str; 13] = [
    "schema_version",
    "model",
    "mechanism",
    "signals",
    "bids",
    "participation",
    "strategy",
    "prior",
    "grid",
    "context_steps",
    "tol",
    "eps",
    "seed",
];

/// Strategies, single- or multi-item depending on the mechanism.
#[derive(Clone, Debug, PartialEq)]
pub enum Strategy {
    Single(StrategyProfile),
    Multi(MultiStrategyProfile),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Atom {
    signals: Value,
    p: f64,
}

/// A validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub model: ValuationModel,
    pub mechanism: MechanismKind,
    pub signals: Option<SignalProfile>,
    pub bids: Option<BidProfile>,
    pub strategy: Option<Strategy>,
    pub prior: Option<Prior>,
    /// Resolution of the signal grid for ex-post checks.
    pub context_steps: Option<usize>,
    pub tol: f64,
    pub eps: f64,
    pub seed: u64,
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Scenario::from_json_str(&text)
}

fn default_mechanism(model: &ValuationModel) -> MechanismKind {
    if model.is_single() {
        MechanismKind::Gva
    } else {
        MechanismKind::SimPrivatizedSpa
    }
}

/// Reads an `n x m` matrix, or a flat vector of `n` values when `m == 1`.
fn matrix(v: &Value, n: usize, m: usize, ptr: &str) -> std::result::Result<Vec<Vec<f64>>, Issue> {
    let shape = if m == 1 {
        format!("expected {n} values")
    } else {
        format!("expected a {n}x{m} matrix")
    };
    let rows = v.as_array().ok_or_else(|| Issue::new(ptr, shape.clone()))?;
    if rows.len() != n {
        return Err(Issue::new(ptr, format!("{shape}, got {}", rows.len())));
    }
    let mut out = Vec::with_capacity(n);
    for (i, r) in rows.iter().enumerate() {
        let row: Vec<f64> = match r {
            Value::Array(xs) => xs
                .iter()
                .map(|x| x.as_f64())
                .collect::<Option<_>>()
                .ok_or_else(|| Issue::new(format!("{ptr}/{i}"), "expected numbers"))?,
            x if m == 1 => vec![x
                .as_f64()
                .ok_or_else(|| Issue::new(format!("{ptr}/{i}"), "expected a number"))?],
            _ => return Err(Issue::new(format!("{ptr}/{i}"), "expected a row")),
        };
        if row.len() != m {
            return Err(Issue::new(
                format!("{ptr}/{i}"),
                format!("expected {m} entries, got {}", row.len()),
            ));
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Issue::new(format!("{ptr}/{i}"), "entries must be finite"));
        }
        out.push(row);
    }
    Ok(out)
}

fn flat_or_rows(rows: &[Vec<f64>]) -> Value {
    if rows.iter().all(|r| r.len() == 1) {
        Value::from(rows.iter().map(|r| r[0]).collect::<Vec<_>>())
    } else {
        serde_json::to_value(rows).expect("finite matrix")
    }
}

fn pointer_of(e: &Error, fallback: &str) -> Issue {
    match e {
        Error::Config { pointer, message } => Issue::new(pointer.clone(), message.clone()),
        other => Issue::new(fallback, other.to_string()),
    }
}

impl Scenario {
    /// A scenario with defaults for everything but the model.
    pub fn new(model: ValuationModel) -> Self {
        Scenario {
            mechanism: default_mechanism(&model),
            model,
            signals: None,
            bids: None,
            strategy: None,
            prior: None,
            context_steps: None,
            tol: DEFAULT_TOL,
            eps: DEFAULT_TOL,
            seed: 0,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Scenario> {
        let v: Value = serde_json::from_str(text).map_err(|e| {
            Error::Schema(vec![Issue::new(
                "",
                format!(
                    "not valid JSON at line {} column {}: {e}",
                    e.line(),
                    e.column()
                ),
            )])
        })?;
        Scenario::from_value(&v)
    }

    pub fn from_value(v: &Value) -> Result<Scenario> {
        let mut issues = Vec::new();
        let Some(obj) = v.as_object() else {
            return Err(Error::Schema(vec![Issue::new("", "expected an object")]));
        };
        for k in obj.keys() {
            if !FIELDS.contains(&k.as_str()) {
                issues.push(Issue::new(format!("/{k}"), "unknown field"));
            }
        }
        match obj.get("schema_version") {
            None => issues.push(Issue::new("/schema_version", "required")),
            Some(x) if x.as_u64() == Some(SCHEMA_VERSION) => {}
            Some(x) => issues.push(Issue::new(
                "/schema_version",
                format!("unsupported version {x}, expected {SCHEMA_VERSION}"),
            )),
        }
        let model = match obj.get("model") {
            None => {
                issues.push(Issue::new("/model", "required"));
                None
            }
            Some(m) => match serde_json::from_value::<ModelSpec>(m.clone()) {
                Err(e) => {
                    issues.push(Issue::new("/model", e.to_string()));
                    None
                }
                Ok(spec) => match ValuationModel::from_spec(&spec) {
                    Ok(model) => Some(model),
                    Err(e) => {
                        issues.push(pointer_of(&e, "/model"));
                        None
                    }
                },
            },
        };

        let uint = |key: &str, issues: &mut Vec<Issue>| -> Option<u64> {
            let x = obj.get(key)?;
            let n = x.as_u64();
            if n.is_none() {
                issues.push(Issue::new(
                    format!("/{key}"),
                    "expected a non-negative integer",
                ));
            }
            n
        };
        let grid = uint("grid", &mut issues);
        if grid == Some(0) {
            issues.push(Issue::new("/grid", "must be positive"));
        }
        let context_steps = uint("context_steps", &mut issues);
        if context_steps == Some(0) {
            issues.push(Issue::new("/context_steps", "must be positive"));
        }
        let seed = uint("seed", &mut issues).unwrap_or(0);
        let float = |key: &str, default: f64, issues: &mut Vec<Issue>| -> f64 {
            match obj.get(key) {
                None => default,
                Some(x) => match x.as_f64() {
                    Some(f) if f.is_finite() && f >= 0.0 => f,
                    _ => {
                        issues.push(Issue::new(
                            format!("/{key}"),
                            "expected a non-negative number",
                        ));
                        default
                    }
                },
            }
        };
        let tol = float("tol", DEFAULT_TOL, &mut issues);
        let eps = float("eps", DEFAULT_TOL, &mut issues);
        if obj.get("tol").is_some() && tol == 0.0 {
            issues.push(Issue::new("/tol", "must be positive"));
        }

        let Some(mut model) = model else {
            return Err(Error::Schema(issues));
        };
        if let Some(g) = grid.filter(|&g| g > 0) {
            model = model.with_steps(g as usize);
        }
        let mut sc = Scenario::new(model);
        sc.tol = tol;
        sc.eps = eps;
        sc.seed = seed;
        sc.context_steps = context_steps.filter(|&c| c > 0).map(|c| c as usize);
        let (n, m) = (sc.model.n(), sc.model.m());

        if let Some(x) = obj.get("mechanism") {
            match x.as_str().map(str::parse::<MechanismKind>) {
                None => issues.push(Issue::new("/mechanism", "expected a string")),
                Some(Err(e)) => issues.push(pointer_of(&e, "/mechanism")),
                Some(Ok(k)) => {
                    if !k.is_multi() && m > 1 {
                        issues.push(Issue::new(
                            "/mechanism",
                            format!("{k} needs a single-item model"),
                        ));
                    }
                    sc.mechanism = k;
                }
            }
        }
        let multi = sc.mechanism.is_multi();

        if let Some(x) = obj.get("signals") {
            match matrix(x, n, m, "/signals") {
                Err(e) => issues.push(e),
                Ok(rows) => {
                    for (i, r) in rows.iter().enumerate() {
                        for (l, &y) in r.iter().enumerate() {
                            if !sc.model.space(i, l).contains(y, tol) {
                                let sp = sc.model.space(i, l);
                                let ptr = if m == 1 {
                                    format!("/signals/{i}")
                                } else {
                                    format!("/signals/{i}/{l}")
                                };
                                issues.push(Issue::new(
                                    ptr,
                                    format!("{y} outside [{}, {}]", sp.lo, sp.hi),
                                ));
                            }
                        }
                    }
                    sc.signals = SignalProfile::from_rows(rows).ok();
                }
            }
        }
        if let Some(x) = obj.get("bids") {
            match matrix(x, n, m, "/bids") {
                Err(e) => issues.push(e),
                Ok(bids) => {
                    sc.bids = Some(BidProfile {
                        bids,
                        participation: None,
                    })
                }
            }
        }
        if let Some(x) = obj.get("participation") {
            match serde_json::from_value::<Vec<Vec<bool>>>(x.clone()) {
                Err(_) => issues.push(Issue::new(
                    "/participation",
                    "expected a matrix of booleans",
                )),
                Ok(p) if p.len() != n || p.iter().any(|r| r.len() != m) => issues.push(Issue::new(
                    "/participation",
                    format!("expected a {n}x{m} matrix"),
                )),
                Ok(p) => match &mut sc.bids {
                    Some(b) => b.participation = Some(p),
                    None => issues.push(Issue::new("/participation", "needs bids")),
                },
            }
        }
        if let Some(x) = obj.get("strategy") {
            let parsed = if multi {
                serde_json::from_value::<MultiStrategyProfile>(x.clone()).map(|s| {
                    let l = s.agents.len();
                    (Strategy::Multi(s), l)
                })
            } else {
                serde_json::from_value::<StrategyProfile>(x.clone()).map(|s| {
                    let l = s.agents.len();
                    (Strategy::Single(s), l)
                })
            };
            match parsed {
                Err(e) => issues.push(Issue::new("/strategy", e.to_string())),
                Ok((_, l)) if l != n => issues.push(Issue::new(
                    "/strategy/agents",
                    format!("expected {n} agents, got {l}"),
                )),
                Ok((s, _)) => {
                    if let Strategy::Multi(p) = &s {
                        for (i, r) in p.agents.iter().enumerate() {
                            if let crate::equilibrium::MultiRule::Scaled { participate, .. } = r {
                                if participate.len() != m {
                                    issues.push(Issue::new(
                                        format!("/strategy/agents/{i}/participate"),
                                        format!("expected {m} entries"),
                                    ));
                                }
                            }
                        }
                    }
                    sc.strategy = Some(s);
                }
            }
        }
        if let Some(x) = obj.get("prior") {
            match serde_json::from_value::<Vec<Atom>>(x.clone()) {
                Err(e) => issues.push(Issue::new("/prior", e.to_string())),
                Ok(atoms) => {
                    let mut parsed = Vec::with_capacity(atoms.len());
                    for (k, a) in atoms.iter().enumerate() {
                        match matrix(&a.signals, n, m, &format!("/prior/{k}/signals")) {
                            Err(e) => issues.push(e),
                            Ok(rows) => parsed.push((
                                SignalProfile::from_rows(rows).expect("checked shape"),
                                a.p,
                            )),
                        }
                    }
                    if parsed.len() == atoms.len() {
                        match Prior::new(parsed) {
                            Ok(p) => sc.prior = Some(p),
                            Err(e) => issues.push(Issue::new("/prior", e.to_string())),
                        }
                    }
                }
            }
        }

        if issues.is_empty() {
            Ok(sc)
        } else {
            Err(Error::Schema(issues))
        }
    }

    /// Canonical JSON value: every default explicit, keys sorted.
    pub fn to_value(&self) -> Value {
        let mut o = Map::new();
        o.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
        o.insert(
            "model".into(),
            serde_json::to_value(self.model.to_spec()).expect("model spec serializes"),
        );
        o.insert("mechanism".into(), Value::from(self.mechanism.to_string()));
        if let Some(s) = &self.signals {
            o.insert("signals".into(), flat_or_rows(&s.rows()));
        }
        if let Some(b) = &self.bids {
            o.insert("bids".into(), flat_or_rows(&b.bids));
            if let Some(p) = &b.participation {
                o.insert(
                    "participation".into(),
                    serde_json::to_value(p).expect("bools"),
                );
            }
        }
        match &self.strategy {
            Some(Strategy::Single(s)) => {
                o.insert(
                    "strategy".into(),
                    serde_json::to_value(s).expect("strategy serializes"),
                );
            }
            Some(Strategy::Multi(s)) => {
                o.insert(
                    "strategy".into(),
                    serde_json::to_value(s).expect("strategy serializes"),
                );
            }
            None => {}
        }
        if let Some(p) = &self.prior {
            let atoms: Vec<Atom> = p
                .atoms()
                .iter()
                .map(|(s, p)| Atom {
                    signals: flat_or_rows(&s.rows()),
                    p: *p,
                })
                .collect();
            o.insert(
                "prior".into(),
                serde_json::to_value(atoms).expect("atoms serialize"),
            );
        }
        if let Some(c) = self.context_steps {
            o.insert("context_steps".into(), Value::from(c as u64));
        }
        o.insert("tol".into(), Value::from(self.tol));
        o.insert("eps".into(), Value::from(self.eps));
        o.insert("seed".into(), Value::from(self.seed));
        Value::Object(o)
    }

    /// Canonical JSON text, pretty-printed with a trailing newline.
    pub fn canonical_json(&self) -> String {
        let mut s =
            serde_json::to_string_pretty(&self.to_value()).expect("canonical form serializes");
        s.push('\n');
        s
    }

    /// Hex SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        sha256_hex(self.canonical_json().as_bytes())
    }

    /// The finest signal grid of the model.
    pub fn grid(&self) -> usize {
        let (n, m) = (self.model.n(), self.model.m());
        (0..n)
            .flat_map(|i| (0..m).map(move |l| (i, l)))
            .map(|(i, l)| self.model.space(i, l).steps)
            .max()
            .unwrap_or(0)
    }

    /// Bids as multi-item reports; missing participation means all-in.
    pub fn reports(&self) -> Option<Vec<MultiReport>> {
        let b = self.bids.as_ref()?;
        Some(
            b.bids
                .iter()
                .enumerate()
                .map(|(i, row)| MultiReport {
                    bids: row.clone(),
                    participate: b
                        .participation
                        .as_ref()
                        .map_or_else(|| vec![true; row.len()], |p| p[i].clone()),
                })
                .collect(),
        )
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn issues(v: Value) -> Vec<Issue> {
        match Scenario::from_value(&v) {
            Err(Error::Schema(i)) => i,
            other => panic!("expected schema errors, got {other:?}"),
        }
    }

    #[test]
    fn wallet_defaults() {
        let sc = Scenario::from_value(&json!({
            "schema_version": 1,
            "model": {"family": "wallet_game", "n": 3}
        }))
        .unwrap();
        assert_eq!(sc.grid(), 64);
        assert_eq!(sc.tol, 1e-9);
        assert_eq!(sc.mechanism, MechanismKind::Gva);
    }

    #[test]
    fn bids_shape_pointer() {
        let i = issues(json!({
            "schema_version": 1,
            "model": {"family": "wallet_game", "n": 3},
            "bids": [0.1, 0.2]
        }));
        assert_eq!(i.len(), 1);
        assert_eq!(i[0].pointer, "/bids");
    }

    #[test]
    fn collects_several_issues() {
        let i = issues(json!({
            "schema_version": 2,
            "model": {"family": "wallet_game", "n": 2},
            "signals": [0.5, 7.0],
            "bogus": true,
            "tol": -1
        }));
        let ptrs: Vec<&str> = i.iter().map(|x| x.pointer.as_str()).collect();
        for p in ["/bogus", "/schema_version", "/tol", "/signals/1"] {
            assert!(ptrs.contains(&p), "{p} missing from {ptrs:?}");
        }
    }

    #[test]
    fn model_errors_keep_pointer() {
        let i = issues(json!({"schema_version": 1, "model": {"family": "nope", "n": 2}}));
        assert_eq!(i[0].pointer, "/model/family");
    }

    #[test]
    fn canonical_round_trip() {
        let sc = Scenario::from_value(&json!({
            "schema_version": 1,
            "model": {"family": "tilde_opt_far", "n": 3},
            "signals": [[0.5, 0.25], [0, 0], [0, 0]],
            "bids": [[0.5, 0.25], [0, 0], [0, 0]],
            "participation": [[true, false], [true, true], [false, false]],
            "strategy": {"agents": [{"kind": "truthful"}, {"kind": "truthful"}, {"kind": "truthful"}]},
            "prior": [{"signals": [[0.5, 0.25], [0, 0], [0, 0]], "p": 1.0}]
        }))
        .unwrap();
        let text = sc.canonical_json();
        let again = Scenario::from_json_str(&text).unwrap();
        assert_eq!(again.canonical_json(), text);
        assert_eq!(again.hash(), sc.hash());
    }

    #[test]
    fn single_mechanism_on_multi_model() {
        let i = issues(json!({
            "schema_version": 1,
            "model": {"family": "balls_and_bins", "n": 2},
            "mechanism": "gva"
        }));
        assert_eq!(i[0].pointer, "/mechanism");
    }
}
