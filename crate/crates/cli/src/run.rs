//! Subcommand dispatch and result files.
//!
//! Every result file starts with provenance: `#`-prefixed lines for CSV, a
//! leading `provenance` object for JSON, a first `{"provenance": …}` line for
//! JSON-lines. Result files carry no timestamps; those live in
//! `manifest.json` only.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use orthant_core::cone::Window;
use orthant_core::error::Error as CoreError;
use orthant_core::estimate::{
    containment_excess, estimate_gamma, estimate_pc, estimate_ptilde, estimate_theta, fit_decay, hausdorff,
    shape_cloud, trial_field, WindowPolicy,
};
use orthant_core::explore::{run_tree, TreeParams};
use orthant_core::lattice::{Vertex, GENERATOR_ID};
use orthant_core::oracle::enumerate_theta;
use orthant_core::osss::{osss_check, CheckMode, ExactInstance, RevealmentMethod};
use orthant_core::walk::{ballisticity_report, walk, walk_seeds};
use orthant_core::SiteField;
use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Theta,
    Sweep,
    Critical,
    Shape,
    Walk,
    OsssCheck,
    RussoCheck,
    Oracle,
    ExploreTrace,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Theta => "theta",
            Command::Sweep => "sweep",
            Command::Critical => "critical",
            Command::Shape => "shape",
            Command::Walk => "walk",
            Command::OsssCheck => "osss-check",
            Command::RussoCheck => "russo-check",
            Command::Oracle => "oracle",
            Command::ExploreTrace => "explore-trace",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub generator: String,
    pub artifact_version: String,
    pub threads: usize,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub files: Vec<String>,
}

/// A failure carrying a stable kind for downstream scripts.
#[derive(Debug, Serialize)]
pub struct Diagnostic {
    pub kind: String,
    pub message: String,
}

impl Diagnostic {
    pub fn from_error(e: &anyhow::Error) -> Self {
        let kind = if let Some(c) = e.downcast_ref::<CoreError>() {
            c.kind().to_string()
        } else if e.downcast_ref::<crate::config::ConfigErrors>().is_some() {
            "InvalidConfig".to_string()
        } else {
            "Io".to_string()
        };
        Self {
            kind,
            message: format!("{e:#}"),
        }
    }
}

struct Writer<'a> {
    dir: &'a Path,
    cmd: Command,
    cfg: &'a ExperimentConfig,
    files: Vec<String>,
}

impl Writer<'_> {
    fn header_lines(&self) -> String {
        format!(
            "# orthant {} {}\n# config_hash {}\n# generator {}\n",
            ARTIFACT_VERSION,
            self.cmd.name(),
            self.cfg.hash(),
            GENERATOR_ID
        )
    }

    fn provenance(&self) -> serde_json::Value {
        json!({
            "command": self.cmd.name(),
            "config_hash": self.cfg.hash(),
            "generator": GENERATOR_ID,
            "artifact_version": ARTIFACT_VERSION,
        })
    }

    fn put(&mut self, name: &str, body: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn csv<R: AsRef<[u8]>>(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<R>>,
    ) -> Result<()> {
        let mut out = self.header_lines().into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(header)?;
            for r in rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        self.put(name, &out)
    }

    fn json<T: Serialize>(&mut self, name: &str, data: &T) -> Result<()> {
        let doc = json!({ "provenance": self.provenance(), "data": data });
        let mut body = serde_json::to_vec_pretty(&doc)?;
        body.push(b'\n');
        self.put(name, &body)
    }

    fn jsonl<T: Serialize>(&mut self, name: &str, lines: &[T]) -> Result<()> {
        let mut body = serde_json::to_vec(&json!({ "provenance": self.provenance() }))?;
        body.push(b'\n');
        for l in lines {
            serde_json::to_writer(&mut body, l)?;
            body.push(b'\n');
        }
        self.put(name, &body)
    }
}

fn policy(cfg: &ExperimentConfig) -> WindowPolicy {
    match cfg.window_scale {
        Some(f) => WindowPolicy::Scaled(f),
        None => WindowPolicy::Fixed(cfg.window),
    }
}

fn fmt_vertex(u: &[i32]) -> String {
    let parts: Vec<String> = u.iter().map(|c| c.to_string()).collect();
    format!("({})", parts.join(","))
}

/// Runs `cmd` with `threads` workers (0: one per core) and writes results
/// plus `manifest.json` under `out_dir`.
pub fn run(cmd: Command, cfg: &ExperimentConfig, threads: usize, out_dir: &Path) -> Result<RunManifest> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let started = now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let mut w = Writer {
        dir: out_dir,
        cmd,
        cfg,
        files: Vec::new(),
    };
    pool.install(|| dispatch(cmd, cfg, &mut w))?;
    let manifest = RunManifest {
        command: cmd.name().into(),
        config_hash: cfg.hash(),
        generator: GENERATOR_ID.into(),
        artifact_version: ARTIFACT_VERSION.into(),
        threads: pool.current_num_threads(),
        started_unix: started,
        finished_unix: now(),
        files: w.files.clone(),
    };
    let mut body = serde_json::to_vec_pretty(&manifest)?;
    body.push(b'\n');
    fs::write(out_dir.join("manifest.json"), body)?;
    fs::write(out_dir.join("config.toml"), cfg.emit())?;
    Ok(manifest)
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn dispatch(cmd: Command, cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    match cmd {
        Command::Theta => theta(cfg, w).map(|_| ()),
        Command::Sweep => sweep(cfg, w),
        Command::Critical => critical(cfg, w),
        Command::Shape => shape(cfg, w),
        Command::Walk => walk_cmd(cfg, w),
        Command::OsssCheck => osss(cfg, w),
        Command::RussoCheck => russo(cfg, w),
        Command::Oracle => oracle(cfg, w),
        Command::ExploreTrace => trace(cfg, w),
    }
}

fn theta(cfg: &ExperimentConfig, w: &mut Writer) -> Result<orthant_core::estimate::ThetaCurve> {
    let curve = estimate_theta(
        cfg.d,
        cfg.seed,
        &cfg.p_grid,
        &cfg.n_list,
        cfg.eta,
        policy(cfg),
        cfg.trials,
    );
    let eta = cfg.eta.to_string();
    w.csv(
        "theta.csv",
        &["p", "n", "eta", "successes", "trials", "window", "truncation_rate"],
        curve.cells.iter().map(|c| {
            vec![
                c.p.to_string(),
                c.n.to_string(),
                eta.clone(),
                c.successes.to_string(),
                c.trials.to_string(),
                c.window.to_string(),
                c.truncation_rate().to_string(),
            ]
        }),
    )?;
    Ok(curve)
}

fn sweep(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let curve = theta(cfg, w)?;
    let mut rows = Vec::new();
    let mut details = Vec::new();
    for &p in &cfg.p_grid {
        match fit_decay(&curve, p, cfg.min_successes) {
            Ok(f) => {
                rows.push(vec![
                    p.to_string(),
                    cfg.eta.to_string(),
                    f.c_p.to_string(),
                    f.stderr.to_string(),
                    f.r2.to_string(),
                ]);
                details.push(json!({ "p": p, "fit": f }));
            }
            Err(e) => {
                details.push(json!({ "p": p, "error": CoreError::from(e.clone()).kind(), "message": e.to_string() }))
            }
        }
    }
    w.csv("fits.csv", &["p", "eta", "c_p", "stderr", "r2"], rows)?;
    w.json("fits.json", &details)
}

fn critical(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let mut rows = Vec::new();
    let mut details = Vec::new();
    for &n in &cfg.n_list {
        let win = policy(cfg).window(n);
        let e = estimate_ptilde(cfg.d, cfg.seed, cfg.eta, n, win, cfg.trials, cfg.tol, cfg.threshold)
            .map_err(CoreError::from)?;
        rows.push(vec![
            cfg.eta.to_string(),
            e.p_lo.to_string(),
            e.p_hi.to_string(),
            n.to_string(),
            win.radius.to_string(),
        ]);
        details.push(e);
    }
    w.csv("critical.csv", &["eta", "p_lo", "p_hi", "n", "window"], rows)?;
    let win = Window::new(cfg.window);
    let pc =
        estimate_pc(cfg.d, cfg.seed, win, cfg.depth, cfg.trials, cfg.tol, cfg.threshold).map_err(CoreError::from)?;
    w.csv(
        "critical_pc.csv",
        &["eta", "p_lo", "p_hi", "n", "window"],
        [vec![
            String::new(),
            pc.p_lo.to_string(),
            pc.p_hi.to_string(),
            pc.n.to_string(),
            pc.window.to_string(),
        ]],
    )?;
    w.json("critical.json", &json!({ "ptilde": details, "pc": pc }))
}

fn shape(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let mut rows = Vec::new();
    let mut estimates = Vec::new();
    for u in &cfg.u {
        let uv = Vertex::new(u);
        let e = estimate_gamma(
            cfg.seed,
            cfg.p_grid[0],
            &uv,
            &cfg.n_list,
            policy(cfg),
            cfg.trials.max(2),
        )
        .map_err(CoreError::from)?;
        for l in &e.levels {
            rows.push(vec![
                fmt_vertex(u),
                l.n.to_string(),
                l.mean.to_string(),
                l.stderr.to_string(),
            ]);
        }
        estimates.push(e);
    }
    w.csv("gamma.csv", &["u", "n", "gamma_hat", "stderr"], rows)?;
    let n = *cfg.n_list.iter().max().unwrap();
    let win = policy(cfg).window(n);
    let field = trial_field(cfg.seed, cfg.d, 0);
    let cloud = shape_cloud(&field, cfg.p_grid[0], n.max(1), win);
    let fan: Vec<(Vec<f64>, f64)> = estimates
        .iter()
        .map(|e| (e.u.coords().iter().map(|&c| c as f64).collect(), e.gamma_hat))
        .collect();
    let coarse = shape_cloud(
        &field,
        cfg.p_grid[0],
        (n / 2).max(1),
        policy(cfg).window((n / 2).max(1)),
    );
    let mut header: Vec<String> = vec!["seed".into()];
    header.extend((1..=cfg.d).map(|i| format!("x{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    w.csv(
        "cloud.csv",
        &header,
        cloud.points.iter().map(|p| {
            let mut r = vec![cloud.seed.to_string()];
            r.extend(p.iter().map(|x| x.to_string()));
            r
        }),
    )?;
    w.json(
        "shape.json",
        &json!({
            "estimates": estimates,
            "cloud": { "seed": cloud.seed, "n": cloud.n, "window": cloud.window, "points": cloud.points.len() },
            "containment_excess": containment_excess(&cloud.points, &fan),
            "hausdorff_to_half_scale": hausdorff(&cloud.points, &coarse.points),
        }),
    )
}

fn walk_cmd(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let p = cfg.p_grid[0];
    let stats = ballisticity_report(cfg.d, p, cfg.walk_steps, cfg.walks, cfg.seed, cfg.walk_mode);
    w.json("walk_stats.json", &stats)?;
    let (e, s) = walk_seeds(cfg.seed, cfg.walk_mode, 0);
    let path = walk(&SiteField::new(e, cfg.d), p, cfg.walk_steps, s);
    let mut header: Vec<String> = vec!["step".into()];
    header.extend((1..=cfg.d).map(|i| format!("x{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    w.csv(
        "path.csv",
        &header,
        path.positions.iter().enumerate().map(|(i, x)| {
            let mut r = vec![i.to_string()];
            r.extend(x.coords().iter().map(|c| c.to_string()));
            r
        }),
    )
}

fn osss(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let n = cfg.n_list[0];
    let win = Window::new(cfg.window);
    let reports = if cfg.exact {
        let inst = ExactInstance::build(cfg.d, n, cfg.eta, win, cfg.site_cap, RevealmentMethod::PerConfiguration)?;
        let reports: Vec<_> = cfg.p_grid.iter().map(|&p| inst.osss_report(p)).collect();
        json!({ "exact": true, "tree_mismatches": inst.tree_mismatches(), "reports": reports })
    } else {
        let reports = cfg
            .p_grid
            .iter()
            .map(|&p| {
                osss_check(
                    cfg.d,
                    p,
                    n,
                    cfg.eta,
                    win,
                    CheckMode::MonteCarlo {
                        master_seed: cfg.seed,
                        trials: cfg.trials,
                    },
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        json!({ "exact": false, "reports": reports })
    };
    w.json("osss.json", &reports)
}

fn russo(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let rep = orthant_core::osss::russo_check(
        cfg.d,
        cfg.n_list[0],
        cfg.eta,
        Window::new(cfg.window),
        &cfg.p_grid,
        cfg.site_cap,
    )?;
    w.json("russo.json", &rep)
}

fn oracle(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let n = cfg.n_list[0];
    let poly = enumerate_theta(cfg.d, n, cfg.eta, Window::new(cfg.window), cfg.site_cap).map_err(CoreError::from)?;
    let values: Vec<_> = cfg
        .p_grid
        .iter()
        .map(|&p| json!({ "p": p, "theta": poly.eval(p) }))
        .collect();
    w.json(
        "oracle.json",
        &json!({ "n": n, "eta": cfg.eta, "window": cfg.window, "polynomial": poly, "values": values }),
    )
}

fn trace(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let n = cfg.n_list[0];
    let p = cfg.p_grid[0];
    let mut params = TreeParams::new(cfg.d, cfg.eta, n, cfg.k, Window::new(cfg.window));
    if let Some(cap) = cfg.round_cap {
        params = params.with_round_cap(cap);
    }
    let field = trial_field(cfg.seed, cfg.d, 0);
    let t = run_tree(&field.at(p), params).map_err(CoreError::from)?;
    w.jsonl("trace.jsonl", &t.revealed)?;
    w.json(
        "trace_summary.json",
        &json!({
            "k": t.k, "n": t.n, "eta": t.eta, "window": t.window, "p": p,
            "field_seed": field.seed(), "outcome": t.outcome,
            "revealed": t.revealed.len(), "active_a": t.active_a, "active_b": t.active_b,
        }),
    )
}

/// Paths of the result files listed in a manifest.
pub fn result_paths(dir: &Path, m: &RunManifest) -> Vec<PathBuf> {
    m.files.iter().map(|f| dir.join(f)).collect()
}
