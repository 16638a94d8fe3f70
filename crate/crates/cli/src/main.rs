//! `arratia`: simulate, compare and verify coalescing and mollified flows.
//!
//! Exit codes: 0 all checks passed, 1 a check failed or an existing run
//! directory disagrees, 2 configuration error, 3 I/O or internal error.

mod config;
mod run;
mod store;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Command;
use store::StoreOutcome;

#[derive(Parser)]
#[command(name = "arratia", version, about = "Coalescing and mollified flow studies driven by a Brownian sheet")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one path of the configured flow.
    Simulate(Common),
    /// Compare the coalescing flow with mollified flows on shared sheets.
    Compare(Common),
    /// Check invariants, quadratic variation and the martingale property.
    Verify(Common),
    /// Ito-formula residual study for a cylinder functional.
    Ito(Common),
    /// Statistical battery on sampled and reconstructed sheets.
    SheetCheck(Common),
    /// Scan of inverse mass moments in time.
    MassStats(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory under which run directories are created.
    #[arg(long, env = "ARRATIA_OUTPUT_ROOT", default_value = "runs")]
    output_root: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, common) = match cli.command {
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Compare(c) => (Command::Compare, c),
        Cmd::Verify(c) => (Command::Verify, c),
        Cmd::Ito(c) => (Command::Ito, c),
        Cmd::SheetCheck(c) => (Command::SheetCheck, c),
        Cmd::MassStats(c) => (Command::MassStats, c),
    };
    ExitCode::from(execute(cmd, &common))
}

fn execute(cmd: Command, common: &Common) -> u8 {
    let src = match std::fs::read_to_string(&common.config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", common.config.display());
            return 2;
        }
    };
    let cfg = match config::parse(&src, cmd, common.seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", common.config.display());
            return 2;
        }
    };
    let outcome = match cmd {
        Command::Simulate => run::simulate(&cfg),
        Command::Compare => run::compare(&cfg),
        Command::Verify => run::verify(&cfg),
        Command::Ito => run::ito(&cfg),
        Command::SheetCheck => run::sheet_check(&cfg),
        Command::MassStats => run::mass_stats(&cfg),
    };
    let outcome = match outcome {
        Ok(o) => o,
        Err(arratia_core::Error::Config(msg)) => {
            eprintln!("error: {}: {msg}", common.config.display());
            return 2;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return 3;
        }
    };
    let hash = store::config_hash(cmd.name(), &cfg);
    let root = cfg.output_dir.as_deref().unwrap_or(&common.output_root);
    let dir = root.join(format!("{}-{}", cmd.name(), &hash[..12]));
    let mut files = vec![(store::MANIFEST.to_string(), store::manifest_text(cmd.name(), &cfg, &hash).into_bytes())];
    files.extend(outcome.files);
    let dir = match store::store(&dir, &files) {
        Ok(StoreOutcome::Written(d)) | Ok(StoreOutcome::Reused(d)) => d,
        Ok(StoreOutcome::Mismatch(d, why)) => {
            eprintln!("error: existing run {} does not match this run ({why}); left unchanged", d.display());
            return 1;
        }
        Err(e) => {
            eprintln!("error: writing {}: {e}", dir.display());
            return 3;
        }
    };
    summarize(&outcome.report, &dir)
}

fn summarize(report: &arratia_core::analysis::Report, dir: &Path) -> u8 {
    println!("{}", dir.display());
    for t in &report.tests {
        let mark = if t.pass { "ok  " } else { "FAIL" };
        println!("{mark} {} ({:.4} vs {:.4}, n={})", t.test_name, t.statistic, t.threshold, t.n_samples);
    }
    if report.all_pass() {
        0
    } else {
        eprintln!("checks failed; see {}", dir.join("report.json").display());
        1
    }
}
