//! Flat key/value experiment configuration.
//!
//! The file is TOML without tables. Every key is optional; defaults are
//! listed on [`ExperimentConfig`]. Validation collects every problem instead
//! of stopping at the first.

use std::fmt;

use orthant_core::cone::Eta;
use orthant_core::lattice::{ModelKind, MAX_DIM, MIN_DIM};
use orthant_core::oracle::DEFAULT_SITE_CAP;
use orthant_core::walk::WalkMode;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub d: usize,
    pub model: ModelKind,
    pub eta: Eta,
    pub p_grid: Vec<f64>,
    pub n_list: Vec<i64>,
    /// Window radius; ignored where `window_scale` applies.
    pub window: u32,
    /// When set, windows scale as `window_scale · n`.
    pub window_scale: Option<u32>,
    pub trials: u64,
    pub seed: u64,
    pub round_cap: Option<u32>,
    pub tol: f64,
    pub threshold: f64,
    pub min_successes: u64,
    pub walk_steps: u64,
    pub walks: u64,
    pub walk_mode: WalkMode,
    pub k: i64,
    /// Shape directions.
    pub u: Vec<Vec<i32>>,
    pub site_cap: u32,
    /// Depth of the `p_c` statistic; half the window by default.
    pub depth: Option<u32>,
    /// Exact enumeration for `osss-check`.
    pub exact: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d: 2,
            model: ModelKind::Orthant,
            eta: Eta::zero(),
            p_grid: vec![0.5],
            n_list: vec![1],
            window: 8,
            window_scale: None,
            trials: 1000,
            seed: 0,
            round_cap: None,
            tol: 0.01,
            threshold: 0.5,
            min_successes: 5,
            walk_steps: 1000,
            walks: 100,
            walk_mode: WalkMode::Annealed,
            k: 1,
            u: vec![vec![1, 0]],
            site_cap: DEFAULT_SITE_CAP,
            depth: None,
            exact: true,
        }
    }
}

/// Raw file contents before validation.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    d: Option<i64>,
    model: Option<String>,
    eta: Option<toml::Value>,
    p: Option<f64>,
    p_grid: Option<Vec<f64>>,
    n: Option<i64>,
    n_list: Option<Vec<i64>>,
    window: Option<i64>,
    window_scale: Option<i64>,
    trials: Option<i64>,
    seed: Option<u64>,
    round_cap: Option<i64>,
    tol: Option<f64>,
    threshold: Option<f64>,
    min_successes: Option<i64>,
    walk_steps: Option<i64>,
    walks: Option<i64>,
    walk_mode: Option<String>,
    k: Option<i64>,
    u: Option<Vec<Vec<i32>>>,
    site_cap: Option<i64>,
    depth: Option<i64>,
    exact: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

/// All validation failures of one configuration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        write!(f, "invalid configuration: {}", msgs.join("; "))
    }
}

impl std::error::Error for ConfigErrors {}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        ConfigErrors(vec![ConfigError {
            key: "<file>".into(),
            message: e.message().to_string(),
        }])
    })?;
    validate(raw)
}

fn validate(raw: RawConfig) -> Result<ExperimentConfig, ConfigErrors> {
    let mut errs = Vec::new();
    let mut err = |key: &str, message: String| {
        errs.push(ConfigError {
            key: key.into(),
            message,
        })
    };
    let mut c = ExperimentConfig::default();

    if let Some(d) = raw.d {
        if (MIN_DIM as i64..=MAX_DIM as i64).contains(&d) {
            c.d = d as usize;
        } else {
            err("d", format!("dimension {d} outside {MIN_DIM}..={MAX_DIM}"));
        }
    }
    if let Some(m) = raw.model {
        match m.parse() {
            Ok(m) => c.model = m,
            Err(_) => err("model", format!("unknown model `{m}` (orthant or half-orthant)")),
        }
    }
    if let Some(v) = raw.eta {
        let text = match &v {
            toml::Value::String(s) => s.clone(),
            toml::Value::Integer(i) => i.to_string(),
            other => other.to_string(),
        };
        match text.parse::<Eta>() {
            Ok(e) => c.eta = e,
            Err(e) => err("eta", e.to_string()),
        }
    }
    match (raw.p, raw.p_grid) {
        (Some(_), Some(_)) => err("p", "give either p or p_grid".into()),
        (Some(p), None) => c.p_grid = vec![p],
        (None, Some(g)) => c.p_grid = g,
        (None, None) => {}
    }
    if c.p_grid.is_empty() {
        err("p_grid", "empty grid".into());
    }
    for &p in &c.p_grid {
        if !(0.0..=1.0).contains(&p) {
            err("p_grid", format!("p = {p} outside [0, 1]"));
        }
    }
    match (raw.n, raw.n_list) {
        (Some(_), Some(_)) => err("n", "give either n or n_list".into()),
        (Some(n), None) => c.n_list = vec![n],
        (None, Some(l)) => c.n_list = l,
        (None, None) => {}
    }
    if c.n_list.is_empty() {
        err("n_list", "empty list".into());
    }
    for &n in &c.n_list {
        if n < 0 {
            err("n_list", format!("n = {n} is negative"));
        }
    }
    let mut nonneg_u32 = |key: &str, v: Option<i64>, min: i64| -> Option<u32> {
        let v = v?;
        if v < min || v > u32::MAX as i64 {
            errs.push(ConfigError {
                key: key.into(),
                message: format!("{v} outside {min}..={}", u32::MAX),
            });
            None
        } else {
            Some(v as u32)
        }
    };
    if let Some(w) = nonneg_u32("window", raw.window, 0) {
        c.window = w;
    }
    c.window_scale = nonneg_u32("window_scale", raw.window_scale, 1);
    c.round_cap = nonneg_u32("round_cap", raw.round_cap, 0);
    c.depth = nonneg_u32("depth", raw.depth, 0);
    if let Some(s) = nonneg_u32("site_cap", raw.site_cap, 1) {
        c.site_cap = s;
    }
    let mut positive = |key: &str, v: Option<i64>, min: i64| -> Option<u64> {
        let v = v?;
        if v < min {
            errs.push(ConfigError {
                key: key.into(),
                message: format!("{v} is below {min}"),
            });
            None
        } else {
            Some(v as u64)
        }
    };
    if let Some(t) = positive("trials", raw.trials, 1) {
        c.trials = t;
    }
    if let Some(m) = positive("min_successes", raw.min_successes, 1) {
        c.min_successes = m;
    }
    if let Some(s) = positive("walk_steps", raw.walk_steps, 1) {
        c.walk_steps = s;
    }
    if let Some(w) = positive("walks", raw.walks, 30) {
        c.walks = w;
    }
    let mut err = |key: &str, message: String| {
        errs.push(ConfigError {
            key: key.into(),
            message,
        })
    };
    if let Some(s) = raw.seed {
        c.seed = s;
    }
    if let Some(t) = raw.tol {
        if t > 0.0 && t < 1.0 {
            c.tol = t;
        } else {
            err("tol", format!("{t} outside (0, 1)"));
        }
    }
    if let Some(t) = raw.threshold {
        if t > 0.0 && t < 1.0 {
            c.threshold = t;
        } else {
            err("threshold", format!("{t} outside (0, 1)"));
        }
    }
    if let Some(m) = raw.walk_mode {
        match m.as_str() {
            "annealed" => c.walk_mode = WalkMode::Annealed,
            "quenched" => c.walk_mode = WalkMode::Quenched,
            _ => err("walk_mode", format!("unknown mode `{m}` (annealed or quenched)")),
        }
    }
    if let Some(k) = raw.k {
        c.k = k;
    }
    if let Some(u) = raw.u {
        if u.is_empty() {
            err("u", "empty direction list".into());
        }
        c.u = u;
    }
    for u in &c.u {
        if u.len() != c.d {
            err("u", format!("direction {u:?} has {} coordinates, d = {}", u.len(), c.d));
        }
    }
    if let Some(e) = raw.exact {
        c.exact = e;
    }
    if errs.is_empty() {
        Ok(c)
    } else {
        Err(ConfigErrors(errs))
    }
}

impl ExperimentConfig {
    /// Canonical text form; parsing it returns an equal configuration.
    pub fn emit(&self) -> String {
        let raw = RawConfig {
            d: Some(self.d as i64),
            model: Some(self.model.to_string()),
            eta: Some(toml::Value::String(self.eta.to_string())),
            p: None,
            p_grid: Some(self.p_grid.clone()),
            n: None,
            n_list: Some(self.n_list.clone()),
            window: Some(self.window as i64),
            window_scale: self.window_scale.map(i64::from),
            trials: Some(self.trials as i64),
            seed: Some(self.seed),
            round_cap: self.round_cap.map(i64::from),
            tol: Some(self.tol),
            threshold: Some(self.threshold),
            min_successes: Some(self.min_successes as i64),
            walk_steps: Some(self.walk_steps as i64),
            walks: Some(self.walks as i64),
            walk_mode: Some(
                match self.walk_mode {
                    WalkMode::Annealed => "annealed",
                    WalkMode::Quenched => "quenched",
                }
                .into(),
            ),
            k: Some(self.k),
            u: Some(self.u.clone()),
            site_cap: Some(self.site_cap as i64),
            depth: self.depth.map(i64::from),
            exact: Some(self.exact),
        };
        toml::to_string(&raw).expect("config serialises")
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.emit().as_bytes()))
    }
}

/// Applies `key = value` overrides to config text. A value that is not a
/// TOML literal is taken as a string, so `eta=1/2` works unquoted.
pub fn apply_overrides(text: &str, overrides: &[(String, String)]) -> Result<String, ConfigErrors> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| {
        ConfigErrors(vec![ConfigError {
            key: "<file>".into(),
            message: e.message().to_string(),
        }])
    })?;
    for (key, value) in overrides {
        let key = key.replace('-', "_");
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.clone()));
        // `p` and `p_grid` (likewise `n`, `n_list`) are alternatives.
        match key.as_str() {
            "p" => drop(table.remove("p_grid")),
            "p_grid" => drop(table.remove("p")),
            "n" => drop(table.remove("n_list")),
            "n_list" => drop(table.remove("n")),
            _ => {}
        }
        table.insert(key, parsed);
    }
    Ok(toml::to_string(&table).expect("table serialises"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_forms() {
        assert_eq!(parse_config("eta = \"1/2\"").unwrap().eta, Eta::new(1, 2).unwrap());
        assert_eq!(parse_config("eta = 1").unwrap().eta, Eta::new(1, 1).unwrap());
        assert_eq!(parse_config("eta = \"2/4\"").unwrap().eta.to_string(), "1/2");
    }

    #[test]
    fn every_error_is_reported() {
        let e = parse_config("eta = \"3/2\"\nd = 7\np_grid = []\nn_list = []").unwrap_err();
        let keys: Vec<&str> = e.0.iter().map(|e| e.key.as_str()).collect();
        assert_eq!(keys, ["d", "eta", "p_grid", "n_list"]);
        assert!(parse_config("eta = \"x/2\"").is_err());
        assert!(parse_config("bogus = 1").is_err());
        assert!(parse_config("p = 0.3\np_grid = [0.2]").is_err());
    }

    #[test]
    fn emit_round_trips() {
        let c = parse_config("d = 3\neta = \"1/10\"\np_grid = [0.1, 0.9]\nn = 4\nwindow_scale = 8\nu = [[1, 2, 3]]\nwalk_mode = \"quenched\"").unwrap();
        let again = parse_config(&c.emit()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.hash(), again.hash());
        assert_ne!(c.hash(), ExperimentConfig::default().hash());
    }

    #[test]
    fn overrides_replace_alternatives() {
        let text = apply_overrides(
            "p = 0.3\nn_list = [1, 2]",
            &[
                ("p-grid".into(), "[0.1, 0.2]".into()),
                ("n".into(), "3".into()),
                ("eta".into(), "1/4".into()),
            ],
        )
        .unwrap();
        let c = parse_config(&text).unwrap();
        assert_eq!(c.p_grid, vec![0.1, 0.2]);
        assert_eq!(c.n_list, vec![3]);
        assert_eq!(c.eta, Eta::new(1, 4).unwrap());
    }
}
