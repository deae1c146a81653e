use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser};
use orthant_cli::run::Diagnostic;
use orthant_cli::{apply_overrides, parse_config, run, Command};

/// Orthant percolation experiments.
#[derive(Parser, Debug)]
#[command(name = "orthant", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Flat TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0: one per core).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[command(flatten)]
    keys: KeyOverrides,
}

/// Every configuration key, overriding the file.
#[derive(Args, Debug)]
struct KeyOverrides {
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long, alias = "p_grid")]
    p_grid: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long, alias = "n_list")]
    n_list: Option<String>,
    #[arg(long)]
    window: Option<String>,
    #[arg(long, alias = "window_scale")]
    window_scale: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long, alias = "round_cap")]
    round_cap: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long, alias = "min_successes")]
    min_successes: Option<String>,
    #[arg(long, alias = "walk_steps")]
    walk_steps: Option<String>,
    #[arg(long)]
    walks: Option<String>,
    #[arg(long, alias = "walk_mode")]
    walk_mode: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    u: Option<String>,
    #[arg(long, alias = "site_cap")]
    site_cap: Option<String>,
    #[arg(long)]
    depth: Option<String>,
    #[arg(long)]
    exact: Option<String>,
}

impl KeyOverrides {
    fn pairs(&self) -> Vec<(String, String)> {
        let fields = [
            ("d", &self.d),
            ("model", &self.model),
            ("eta", &self.eta),
            ("p", &self.p),
            ("p_grid", &self.p_grid),
            ("n", &self.n),
            ("n_list", &self.n_list),
            ("window", &self.window),
            ("window_scale", &self.window_scale),
            ("trials", &self.trials),
            ("round_cap", &self.round_cap),
            ("tol", &self.tol),
            ("threshold", &self.threshold),
            ("min_successes", &self.min_successes),
            ("walk_steps", &self.walk_steps),
            ("walks", &self.walks),
            ("walk_mode", &self.walk_mode),
            ("k", &self.k),
            ("u", &self.u),
            ("site_cap", &self.site_cap),
            ("depth", &self.depth),
            ("exact", &self.exact),
        ];
        fields
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

fn main_inner(cli: Cli) -> anyhow::Result<()> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        None => String::new(),
    };
    let mut overrides = cli.keys.pairs();
    if let Some(seed) = cli.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    let cfg = parse_config(&apply_overrides(&text, &overrides)?)?;
    let manifest = run(cli.command, &cfg, cli.threads, &cli.out_dir)?;
    for f in &manifest.files {
        println!("{}", cli.out_dir.join(f).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let d = Diagnostic::from_error(&e);
            eprintln!("{}", serde_json::to_string(&d).unwrap_or_else(|_| d.message.clone()));
            ExitCode::from(2)
        }
    }
}
