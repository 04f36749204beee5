use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use ris_power::cli::{execute, Mode, Outcome, RunConfig};
use ris_power::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Solve,
    Sweep,
    Check,
    Simulate,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Solve => Mode::Solve,
            ModeArg::Sweep => Mode::Sweep,
            ModeArg::Check => Mode::Check,
            ModeArg::Simulate => Mode::Simulate,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Fault {
    GradientSign,
}

/// Minimum-power RIS phase design under per-user SEP targets.
///
/// Flags override values from the config file. The output directory
/// defaults to $RIS_POWER_OUT_DIR, then ./out.
#[derive(Debug, Parser)]
#[command(name = "ris-power", version)]
struct Args {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long, value_enum)]
    mode: Option<ModeArg>,

    /// Master seed for channels, symbols and noise.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Symbol vectors per RIS size in a sweep.
    #[arg(long)]
    symbols: Option<usize>,

    /// Worker threads (0 = available parallelism).
    #[arg(long)]
    threads: Option<usize>,

    /// SEP exponent for solve/simulate: every target is 10^-tau.
    #[arg(long)]
    tau: Option<f64>,

    /// Monte Carlo noise draws for simulate.
    #[arg(long)]
    trials: Option<u64>,

    /// Finite-difference tolerance for check.
    #[arg(long)]
    fd_tol: Option<f64>,

    #[arg(long, value_enum, hide = true)]
    inject_fault: Option<Fault>,
}

fn build_config(args: &Args) -> ris_power::Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(m) = args.mode {
        cfg.mode = m.into();
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out_dir = Some(o.clone());
    }
    if let Some(n) = args.symbols {
        cfg.sweep.symbol_count = n;
    }
    if let Some(t) = args.threads {
        cfg.threads = Some(t);
    }
    if let Some(t) = args.tau {
        cfg.instance.tau = t;
    }
    if let Some(t) = args.trials {
        cfg.simulate.trials = t;
    }
    if let Some(t) = args.fd_tol {
        cfg.check.fd_tol = t;
    }
    if let Some(Fault::GradientSign) = args.inject_fault {
        cfg.check.inject_gradient_sign_flip = true;
    }
    Ok(cfg)
}

fn report(outcome: &Outcome) {
    match outcome {
        Outcome::Solve(res) | Outcome::Simulate(res, _) => {
            if res.feasible {
                println!("P_opt = {:.6}", res.p_opt);
                println!("P_n = {:.4} dB", res.p_n_db);
                println!("iterations = {}", res.iterations);
            } else {
                eprintln!(
                    "infeasible: targets not met even at P = {} (max constraint {:.3e})",
                    res.p_opt, res.f_value
                );
            }
            if let Outcome::Simulate(_, est) = outcome {
                for (k, (sep, se)) in est.per_user_sep.iter().zip(&est.stderr).enumerate() {
                    println!("user {k}: SEP = {sep:.3e} +- {se:.1e} ({} trials)", est.trials);
                }
            }
        }
        Outcome::Sweep(records) => {
            println!("N,tau,avg_P_n_dB,solved,infeasible");
            for r in records {
                println!("{},{},{:.4},{},{}", r.n, r.tau, r.avg_p_n_db, r.solved, r.infeasible);
            }
        }
        Outcome::Check(rep) => print!("{rep}"),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match build_config(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match execute(&cfg) {
        Ok(outcome) => {
            report(&outcome);
            if outcome.success() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e @ (Error::Config(_) | Error::InvalidArgument(_) | Error::Parse { .. } | Error::Dimension { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
