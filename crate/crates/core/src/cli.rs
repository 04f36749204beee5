//! Run configuration and the command implementations behind the
//! `ris-power` binary.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::check::{run_checks, CheckConfig, CheckReport};
use crate::constellation::{PskConstellation, SymbolVector};
use crate::error::{Error, Result};
use crate::simulate::{
    run_sweep_with_threads, simulate_sep, write_sweep_csv, write_sweep_table, Averaging, ChannelPolicy, SepEstimate,
    SweepConfig, SweepRecord,
};
use crate::solver::{bisect, BisectionConfig, Instance, SolveResult};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "RIS_POWER_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Solve,
    Sweep,
    Check,
    Simulate,
}

/// Single-instance description used by `solve` and `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstanceConfig {
    pub n: usize,
    pub k: usize,
    pub alpha_s: usize,
    pub tau: f64,
    pub noise_var: f64,
    /// Channel matrix file (generator row then user rows). Relative paths
    /// resolve against the config file's directory.
    pub channel_file: Option<PathBuf>,
    /// Explicit symbol indices; drawn at random when absent.
    pub symbols: Option<Vec<usize>>,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        Self {
            n: 30,
            k: 5,
            alpha_s: 4,
            tau: 2.0,
            noise_var: 1.0,
            channel_file: None,
            symbols: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    pub n_list: Vec<usize>,
    pub tau_list: Vec<f64>,
    pub symbol_count: usize,
    pub channel_policy: ChannelPolicy,
    pub averaging: Averaging,
}

impl Default for SweepParams {
    fn default() -> Self {
        let d = SweepConfig::default();
        Self {
            n_list: d.n_list,
            tau_list: d.tau_list,
            symbol_count: d.symbol_count,
            channel_policy: d.channel_policy,
            averaging: d.averaging,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateParams {
    pub trials: u64,
}

impl Default for SimulateParams {
    fn default() -> Self {
        Self { trials: 100_000 }
    }
}

/// Everything a run needs. Loaded from TOML; command-line flags override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    /// Worker threads; `None` uses the available parallelism.
    pub threads: Option<usize>,
    pub instance: InstanceConfig,
    pub bisection: BisectionConfig,
    pub sweep: SweepParams,
    pub simulate: SimulateParams,
    pub check: CheckConfig,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    /// Output directory: explicit setting, then [`OUT_DIR_ENV`], then `out`.
    pub fn resolved_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn thread_count(&self) -> usize {
        self.threads
            .filter(|&t| t > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, usize::from))
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            n_list: self.sweep.n_list.clone(),
            k: self.instance.k,
            alpha_s: self.instance.alpha_s,
            tau_list: self.sweep.tau_list.clone(),
            symbol_count: self.sweep.symbol_count,
            seed: self.seed,
            noise_var: self.instance.noise_var,
            channel_policy: self.sweep.channel_policy,
            averaging: self.sweep.averaging,
            bisection: self.bisection.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bisection.validate()?;
        match self.mode {
            Mode::Sweep => self.sweep_config().validate(),
            Mode::Simulate if self.simulate.trials == 0 => Err(Error::Config("trials must be >= 1".into())),
            _ => Ok(()),
        }
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if path.is_relative() => base.join(path),
            _ => path.to_path_buf(),
        }
    }

    /// Builds the single instance, reading the channel file if configured.
    pub fn build_instance(&self) -> Result<Instance> {
        let ic = &self.instance;
        let psk = PskConstellation::new(ic.alpha_s)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let channels = match &ic.channel_file {
            Some(path) => {
                let path = self.resolve(path);
                let text = fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("cannot read channel file {}: {e}", path.display())))?;
                ChannelSet::from_text(&text, ic.noise_var)?
            }
            None => ChannelSet::generate_rayleigh(ic.n, ic.k, ic.noise_var, &mut rng)?,
        };
        let symbols = match &ic.symbols {
            Some(idx) => SymbolVector::new(idx.clone(), &psk)?,
            None => psk.random_symbols(channels.k(), &mut rng)?,
        };
        Instance::with_tau(channels, symbols, psk, ic.tau)
    }
}

/// What a command produced, for printing and exit-status decisions.
#[derive(Debug)]
pub enum Outcome {
    Solve(SolveResult),
    Sweep(Vec<SweepRecord>),
    Check(CheckReport),
    Simulate(SolveResult, SepEstimate),
}

impl Outcome {
    pub fn success(&self) -> bool {
        match self {
            Outcome::Solve(r) => r.feasible,
            Outcome::Sweep(records) => records.iter().all(|r| r.solved > 0),
            Outcome::Check(report) => report.all_passed(),
            Outcome::Simulate(r, _) => r.feasible,
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

#[derive(Serialize)]
struct Echo<'a, T: Serialize> {
    config: &'a RunConfig,
    result: T,
}

#[derive(Serialize)]
struct SolveRow {
    seed: u64,
    n: usize,
    k: usize,
    alpha_s: usize,
    tau: f64,
    p_opt: f64,
    p_n_db: f64,
    iterations: usize,
    feasible: bool,
}

fn solve_row(cfg: &RunConfig, inst: &Instance, res: &SolveResult) -> SolveRow {
    SolveRow {
        seed: cfg.seed,
        n: inst.channels.n(),
        k: inst.channels.k(),
        alpha_s: inst.constellation.order(),
        tau: cfg.instance.tau,
        p_opt: res.p_opt,
        p_n_db: res.p_n_db,
        iterations: res.iterations,
        feasible: res.feasible,
    }
}

fn write_solve_csv(path: &Path, row: &SolveRow) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.serialize(row)?;
    w.flush()?;
    Ok(())
}

/// Validates the configuration, prepares all inputs, and only then creates
/// the output directory and runs the requested mode.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let out = cfg.resolved_out_dir();
    match cfg.mode {
        Mode::Solve => {
            let inst = cfg.build_instance()?;
            fs::create_dir_all(&out)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let res = bisect(&inst, &cfg.bisection, &mut rng)?;
            write_solve_csv(&out.join("solve.csv"), &solve_row(cfg, &inst, &res))?;
            write_json(
                &out.join("solve.json"),
                &Echo {
                    config: cfg,
                    result: &res,
                },
            )?;
            Ok(Outcome::Solve(res))
        }
        Mode::Simulate => {
            let inst = cfg.build_instance()?;
            fs::create_dir_all(&out)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let res = bisect(&inst, &cfg.bisection, &mut rng)?;
            let est = simulate_sep(
                &res.theta_opt,
                res.p_opt,
                &inst.channels,
                &inst.symbols,
                &inst.constellation,
                cfg.simulate.trials,
                &mut rng,
            )?;
            let mut w = csv::Writer::from_path(out.join("simulate.csv"))?;
            w.write_record(["user", "target", "errors", "trials", "sep", "stderr"])?;
            for k in 0..inst.channels.k() {
                w.write_record([
                    k.to_string(),
                    inst.targets[k].to_string(),
                    est.per_user_errors[k].to_string(),
                    est.trials.to_string(),
                    est.per_user_sep[k].to_string(),
                    est.stderr[k].to_string(),
                ])?;
            }
            w.flush()?;
            write_json(
                &out.join("simulate.json"),
                &Echo {
                    config: cfg,
                    result: (&res, &est),
                },
            )?;
            Ok(Outcome::Simulate(res, est))
        }
        Mode::Sweep => {
            fs::create_dir_all(&out)?;
            let records = run_sweep_with_threads(&cfg.sweep_config(), cfg.thread_count())?;
            write_sweep_csv(&records, fs::File::create(out.join("sweep.csv"))?)?;
            write_sweep_table(&records, fs::File::create(out.join("sweep_table.csv"))?)?;
            write_json(
                &out.join("sweep.json"),
                &Echo {
                    config: cfg,
                    result: &records,
                },
            )?;
            Ok(Outcome::Sweep(records))
        }
        Mode::Check => {
            fs::create_dir_all(&out)?;
            let report = run_checks(&cfg.check, cfg.seed)?;
            fs::write(out.join("check.txt"), report.to_string())?;
            write_json(
                &out.join("check.json"),
                &Echo {
                    config: cfg,
                    result: &report,
                },
            )?;
            Ok(Outcome::Check(report))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_partial_toml() {
        let cfg = RunConfig::from_toml(
            r#"
            mode = "sweep"
            seed = 9
            [sweep]
            n_list = [8]
            tau_list = [1.0, 2.0]
            symbol_count = 3
            [bisection]
            eps_tol = 1e-5
            [bisection.rcg]
            max_iters = 100
            "#,
        )
        .unwrap();
        assert_eq!(cfg.mode, Mode::Sweep);
        assert_eq!(cfg.sweep.symbol_count, 3);
        assert_eq!(cfg.bisection.eps_tol, 1e-5);
        assert_eq!(cfg.bisection.rcg.max_iters, 100);
        assert_eq!(cfg.bisection.rcg.grad_tol, 1e-8);
        assert_eq!(cfg.instance.k, 5);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(RunConfig::from_toml("sede = 3\n").is_err());
        assert!(RunConfig::from_toml("[instance]\nfoo = 1\n").is_err());
    }

    #[test]
    fn invalid_bracket_is_config_error() {
        let cfg = RunConfig::from_toml("[bisection]\np_lower = 10.0\np_upper = 1.0\n").unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
