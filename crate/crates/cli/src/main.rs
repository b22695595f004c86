//! `fracdiff`: constants, ε-ladder runs, Barenblatt profiles, verification
//! suites and the logarithmic `s = 1/2` case.
//!
//! Exit codes: 0 ok, 1 parse/config, 2 solver/IO, 3 failed check.

mod commands;
mod config;
mod verify;

use clap::{Args, Parser, Subcommand};
use commands::Failure;
use config::ExperimentConfig;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use verify::Suite;

#[derive(Parser, Debug)]
#[command(name = "fracdiff", version, about = "Very singular fractional diffusion in 1D")]
struct Cli {
    /// Worker threads; FRACDIFF_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print exponents and constants for (s, n).
    Constants {
        #[arg(long)]
        s: f64,
        #[arg(long)]
        n: f64,
    },
    /// Run the ε-ladder described by a config file.
    Evolve(RunArgs),
    /// Long run toward the self-similar profile; writes profile.csv and fit.json.
    Barenblatt(RunArgs),
    /// Run a named verification suite.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs from the explicit logarithmic solution at s = 1/2.
    Loghalf(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides [output] dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides s from the config.
    #[arg(long)]
    s: Option<f64>,
    /// Overrides n from the config.
    #[arg(long)]
    n: Option<f64>,
}

impl RunArgs {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf), Failure> {
        let text = std::fs::read_to_string(&self.config)
            .map_err(|e| Failure::Parse(format!("{}: {e}", self.config.display())))?;
        let cfg = ExperimentConfig::parse(&text, self.s, self.n).map_err(Failure::Parse)?;
        let base = self.config.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    fn out_dir(&self, cfg: &ExperimentConfig, default: &str) -> PathBuf {
        self.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from(default))
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    match std::env::var("FRACDIFF_THREADS") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| Failure::Parse(format!("FRACDIFF_THREADS={v:?} is not a count"))),
        Err(_) => Ok(flag),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(k) = thread_count(cli.threads)? {
        if k == 0 {
            return Err(Failure::Parse("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().map_err(|e| Failure::Solver(e.to_string()))?;
    }
    match cli.command {
        Command::Constants { s, n } => {
            print!("{}", commands::constants(s, n)?);
        }
        Command::Evolve(args) => {
            let (cfg, base) = args.load()?;
            let out = args.out_dir(&cfg, "fracdiff-out/evolve");
            let summary = commands::evolve(&cfg, &base, &out)?;
            println!("verdict {:?} at t = {}", summary.verdict, cfg.ladder.as_ref().map_or(0.0, |l| l.t_end));
            report_checks(&summary.bundle, &out.join("summary.json"))?;
        }
        Command::Barenblatt(args) => {
            let (cfg, _) = args.load()?;
            let out = args.out_dir(&cfg, "fracdiff-out/barenblatt");
            let b = commands::barenblatt(&cfg, &out)?;
            let r = &b.report;
            println!("profile mass {:.6}, residual {:.3e}", r.mass, r.profile_residual.unwrap_or(f64::NAN));
            println!("tail gamma {:.4} (expected {:.4}), c_inf {:.4} (C = {:.4})", r.gamma_fit, r.gamma_tail, r.c_inf_fit, r.c_vss);
            println!("snapshot L1 distances {:?}", b.l1_distances);
            println!("wrote {}", out.display());
        }
        Command::Verify { suite, out } => {
            let out = out.unwrap_or_else(|| PathBuf::from("fracdiff-out/verify"));
            let bundle = verify::run_suite(suite).map_err(commands::classify)?;
            std::fs::create_dir_all(&out).map_err(|e| Failure::Solver(e.to_string()))?;
            report_checks(&bundle, &out.join(format!("verify_{}.json", suite.name())))?;
        }
        Command::Loghalf(args) => {
            let (cfg, _) = args.load()?;
            let out = args.out_dir(&cfg, "fracdiff-out/loghalf");
            let r = commands::loghalf(&cfg, &out)?;
            println!("mass slope {:.4} (explicit solution: {:.4})", r.mass_decay_slope, -2.0 * std::f64::consts::PI);
            println!("extinction observed {:?}, ||U0||/2pi = {:.4}", r.t_observed, r.t_exact);
            println!("L1 error at T/2 {:.3e}", r.l1_error_half);
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn report_checks(bundle: &fracdiff_core::diagnostics::ReportBundle, path: &Path) -> Result<(), Failure> {
    let json = bundle.to_json().map_err(|e| Failure::Solver(e.to_string()))?;
    std::fs::write(path, json).map_err(|e| Failure::Solver(format!("{}: {e}", path.display())))?;
    for c in &bundle.checks {
        let tag = match (c.hard, c.pass) {
            (true, true) => "PASS",
            (true, false) => "FAIL",
            (false, _) => "INFO",
        };
        println!("{tag} {}: {}", c.name, c.detail);
    }
    println!("wrote {}", path.display());
    if bundle.all_hard_pass() {
        Ok(())
    } else {
        let failed: Vec<&str> = bundle.checks.iter().filter(|c| c.hard && !c.pass).map(|c| c.name.as_str()).collect();
        Err(Failure::Check(failed.join(", ")))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("fracdiff: {f}");
            ExitCode::from(f.code() as u8)
        }
    }
}
