//! `pathattr` command-line front end.

mod commands;
mod config;
mod source;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pathattr::{Error, ErrorClass, Result};

use commands::Output;
use config::Run;

const DEFAULT_OUT: &str = "pathattr-out";
const VERIFY_SAMPLES: u64 = 200_000;

#[derive(Parser, Debug)]
#[command(name = "pathattr", version, about = "Pathway attribution of climate impacts to forcing magnitude")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the number of Monte Carlo samples.
    #[arg(long, global = true)]
    samples: Option<u64>,

    /// Output directory; falls back to `output_dir` in the config, then PATHATTR_OUT.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Generate the synthetic dataset described by the config.
    Simulate,
    /// Scalar metric tables per region and window.
    Metrics,
    /// Single-step, multi-step and normalized regression reports.
    Fit,
    /// Monte Carlo likelihood-ratio p-value grid.
    Attribute,
    /// Leave-one-out fingerprinting baseline.
    Fingerprint,
    /// Log-likelihood as a function of forcing.
    Curves,
    /// Analytic-oracle and calibration checks.
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Metrics => "metrics",
            Command::Fit => "fit",
            Command::Attribute => "attribute",
            Command::Fingerprint => "fingerprint",
            Command::Curves => "curves",
            Command::Verify => "verify",
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Configuration => 1,
        ErrorClass::Data => 2,
        ErrorClass::Numerical => 3,
    }
}

fn out_dir(cli: &Cli, configured: Option<&PathBuf>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| configured.cloned())
        .or_else(|| std::env::var_os("PATHATTR_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn verify(cli: &Cli) -> Result<bool> {
    let (hash, seed, configured) = match &cli.config {
        Some(path) => {
            let run = Run::load(path, cli.seed, None)?;
            (run.hash.clone(), run.config.seed, run.config.output_dir.clone().map(|p| run.resolve_path(&p)))
        }
        None => ("none".to_string(), cli.seed.unwrap_or(0), None),
    };
    let n = cli.samples.unwrap_or(VERIFY_SAMPLES);
    if n == 0 {
        return Err(Error::Config("flag `--samples`: must be at least 1".into()));
    }
    let mut out = Output::new(out_dir(cli, configured.as_ref()), "verify", hash, seed, n, cli.quiet)?;
    let checks = verify::run_all(n, seed)?;
    let mut body = String::from("check,pass,detail\n");
    for c in &checks {
        body.push_str(&format!("{},{},\"{}\"\n", c.name, c.pass, c.detail));
        out.say(&format!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    out.text("verify.csv", &body)?;
    out.summary(verify::to_json(&checks))?;
    Ok(checks.iter().all(|c| c.pass))
}

fn run(cli: &Cli) -> Result<bool> {
    if let Command::Verify = cli.command {
        return verify(cli);
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config(format!("flag `--config` is required for `{}`", cli.command.name())))?;
    let run = Run::load(path, cli.seed, cli.samples)?;
    for w in run.graph.validate()?.warnings {
        if !cli.quiet {
            eprintln!("warning: {w}");
        }
    }
    let configured = run.config.output_dir.as_ref().map(|p| run.resolve_path(p));
    let mut out = Output::new(
        out_dir(cli, configured.as_ref()),
        cli.command.name(),
        run.hash.clone(),
        run.config.seed,
        run.config.n_samples,
        cli.quiet,
    )?;
    match cli.command {
        Command::Simulate => commands::simulate(&run, &mut out)?,
        Command::Metrics => commands::metrics(&run, &mut out)?,
        Command::Fit => commands::fit(&run, &mut out)?,
        Command::Attribute => commands::attribute(&run, &mut out)?,
        Command::Fingerprint => commands::fingerprint(&run, &mut out)?,
        Command::Curves => commands::curves(&run, &mut out)?,
        Command::Verify => unreachable!(),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: verification failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
