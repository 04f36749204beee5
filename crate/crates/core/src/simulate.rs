//! Monte Carlo link simulation and power-versus-target sweeps.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::constellation::{PskConstellation, SymbolVector};
use crate::error::{invalid, Error, Result};
use crate::geometry::PhasePoint;
use crate::solver::{bisect_from, initialize_point, normalized_power_db, BisectionConfig, Instance};

/// Per-user symbol error counts over a number of noise realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SepEstimate {
    pub per_user_errors: Vec<u64>,
    pub trials: u64,
    pub per_user_sep: Vec<f64>,
    /// Binomial standard error `sqrt(r (1 - r) / trials)`.
    pub stderr: Vec<f64>,
}

impl SepEstimate {
    fn from_counts(per_user_errors: Vec<u64>, trials: u64) -> Self {
        let per_user_sep: Vec<f64> = per_user_errors.iter().map(|&e| e as f64 / trials as f64).collect();
        let stderr = per_user_sep
            .iter()
            .map(|r| (r * (1.0 - r) / trials as f64).sqrt())
            .collect();
        Self {
            per_user_errors,
            trials,
            per_user_sep,
            stderr,
        }
    }

    /// True when every user's rate is at most `target + sigmas * stderr`.
    pub fn within(&self, targets: &[f64], sigmas: f64) -> bool {
        self.per_user_sep
            .iter()
            .zip(&self.stderr)
            .zip(targets)
            .all(|((r, s), p)| *r <= p + sigmas * s)
    }
}

/// Transmits `symbols` through `theta` at `power` for `trials` independent
/// noise draws and counts hard-decision errors per user.
///
/// Noise is circularly-symmetric with variance `noise_var` (each real
/// component `noise_var / 2`).
pub fn simulate_sep<R: Rng + ?Sized>(
    theta: &[Complex64],
    power: f64,
    channels: &ChannelSet,
    symbols: &SymbolVector,
    constellation: &PskConstellation,
    trials: u64,
    rng: &mut R,
) -> Result<SepEstimate> {
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    if theta.len() != channels.n() {
        return Err(Error::Dimension {
            context: "phase vector length",
            expected: channels.n(),
            actual: theta.len(),
        });
    }
    if symbols.len() != channels.k() {
        return Err(Error::Dimension {
            context: "symbol vector length",
            expected: channels.k(),
            actual: symbols.len(),
        });
    }
    if let Some(bad) = theta.iter().find(|t| (t.norm() - 1.0).abs() > 1e-9) {
        return Err(invalid(format!("phase entries must be unit modulus, got |{bad}|")));
    }
    let amp = power.sqrt();
    let noiseless: Vec<Complex64> = (0..channels.k()).map(|k| channels.received(k, theta) * amp).collect();
    let noise_std = (channels.noise_var() / 2.0).sqrt();
    let mut errors = vec![0u64; channels.k()];
    for _ in 0..trials {
        for ((r, &sent), err) in noiseless.iter().zip(symbols.indices()).zip(errors.iter_mut()) {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            let z = r + Complex64::new(re, im) * noise_std;
            if constellation.detect(z) != sent {
                *err += 1;
            }
        }
    }
    Ok(SepEstimate::from_counts(errors, trials))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelPolicy {
    /// New channel realization for every symbol vector.
    #[default]
    PerSymbol,
    /// One realization per RIS size, shared by all symbol vectors.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Averaging {
    /// Mean of linear powers, then converted to dB.
    #[default]
    Linear,
    /// Mean of per-instance dB values.
    Decibel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub n_list: Vec<usize>,
    pub k: usize,
    pub alpha_s: usize,
    pub tau_list: Vec<f64>,
    pub symbol_count: usize,
    pub seed: u64,
    pub noise_var: f64,
    pub channel_policy: ChannelPolicy,
    pub averaging: Averaging,
    pub bisection: BisectionConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n_list: vec![30, 40, 50, 60],
            k: 5,
            alpha_s: 4,
            tau_list: (1..=10).map(f64::from).collect(),
            symbol_count: 2000,
            seed: 1,
            noise_var: 1.0,
            channel_policy: ChannelPolicy::PerSymbol,
            averaging: Averaging::Linear,
            bisection: BisectionConfig::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return Err(Error::Config("n_list must be non-empty with N >= 1".into()));
        }
        if self.k == 0 || self.alpha_s < 2 || self.symbol_count == 0 {
            return Err(Error::Config("need k >= 1, alpha_s >= 2, symbol_count >= 1".into()));
        }
        if self.tau_list.is_empty() {
            return Err(Error::Config("tau_list must be non-empty".into()));
        }
        if let Some(t) = self
            .tau_list
            .iter()
            .find(|&&t| !(10f64.powf(-t) > 0.0 && 10f64.powf(-t) <= 0.5))
        {
            return Err(Error::Config(format!("tau {t} gives a target outside (0, 0.5]")));
        }
        if !(self.noise_var > 0.0) {
            return Err(Error::Config("noise_var must be positive".into()));
        }
        self.bisection.validate()
    }
}

/// One row of the sweep table: average normalized power at `(N, tau)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub seed: u64,
    pub n: usize,
    pub k: usize,
    pub alpha_s: usize,
    pub tau: f64,
    pub avg_p_n_db: f64,
    pub symbol_count: usize,
    /// Instances included in the average.
    pub solved: usize,
    /// Instances that stayed infeasible after bracket repair (excluded).
    pub infeasible: usize,
}

/// Deterministic generator for task `index` at RIS size `n`, independent of
/// scheduling.
pub fn task_rng(master_seed: u64, n: usize, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((n as u64) << 32) ^ index);
    rng
}

/// Channel, symbols and initialization point for one sweep task, followed
/// by one bisection per target. Returns `(p_opt, feasible)` per tau.
fn solve_task(cfg: &SweepConfig, n: usize, index: usize, psk: &PskConstellation) -> Result<Vec<(f64, bool)>> {
    let mut rng = task_rng(cfg.seed, n, index as u64);
    let channels = match cfg.channel_policy {
        ChannelPolicy::PerSymbol => ChannelSet::generate_rayleigh(n, cfg.k, cfg.noise_var, &mut rng)?,
        ChannelPolicy::Fixed => {
            let mut shared = task_rng(cfg.seed, n, u64::from(u32::MAX));
            ChannelSet::generate_rayleigh(n, cfg.k, cfg.noise_var, &mut shared)?
        }
    };
    let symbols = psk.random_symbols(cfg.k, &mut rng)?;
    let base = Instance::with_tau(channels, symbols, psk.clone(), cfg.tau_list[0])?;
    let dirs = base.direction_matrices()?;
    let start = PhasePoint::random(n, &mut rng)?;
    let theta0 = initialize_point(&dirs, &cfg.bisection.rcg_init, start)?;
    cfg.tau_list
        .iter()
        .map(|&tau| {
            let inst = Instance {
                targets: vec![10f64.powf(-tau); cfg.k],
                ..base.clone()
            };
            let res = bisect_from(&inst, &dirs, theta0.clone(), &cfg.bisection)?;
            Ok((res.p_opt, res.feasible))
        })
        .collect()
}

/// Solves `symbol_count` random instances per RIS size at every target and
/// averages the resulting powers.
///
/// All targets of one instance share its channel, symbols and initialization
/// point. Tasks run on the current rayon pool; results do not depend on the
/// number of threads.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let psk = PskConstellation::new(cfg.alpha_s)?;
    let tasks: Vec<(usize, usize)> = cfg
        .n_list
        .iter()
        .flat_map(|&n| (0..cfg.symbol_count).map(move |i| (n, i)))
        .collect();
    let outcomes = tasks
        .par_iter()
        .map(|&(n, i)| solve_task(cfg, n, i, &psk))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::with_capacity(cfg.n_list.len() * cfg.tau_list.len());
    for (block, &n) in outcomes.chunks(cfg.symbol_count).zip(&cfg.n_list) {
        for (t, &tau) in cfg.tau_list.iter().enumerate() {
            let solved: Vec<f64> = block.iter().filter(|o| o[t].1).map(|o| o[t].0).collect();
            let infeasible = block.len() - solved.len();
            let avg_p_n_db = if solved.is_empty() {
                f64::NAN
            } else {
                match cfg.averaging {
                    Averaging::Linear => {
                        normalized_power_db(solved.iter().sum::<f64>() / solved.len() as f64, cfg.noise_var)
                    }
                    Averaging::Decibel => {
                        solved
                            .iter()
                            .map(|&p| normalized_power_db(p, cfg.noise_var))
                            .sum::<f64>()
                            / solved.len() as f64
                    }
                }
            };
            records.push(SweepRecord {
                seed: cfg.seed,
                n,
                k: cfg.k,
                alpha_s: cfg.alpha_s,
                tau,
                avg_p_n_db,
                symbol_count: cfg.symbol_count,
                solved: solved.len(),
                infeasible,
            });
        }
    }
    Ok(records)
}

/// Runs [`run_sweep`] on a dedicated pool of `threads` workers.
pub fn run_sweep_with_threads(cfg: &SweepConfig, threads: usize) -> Result<Vec<SweepRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_sweep(cfg))
}

pub fn write_sweep_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepRecord>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Pivoted table: one row per tau, one `N=<n>` column per RIS size.
pub fn write_sweep_table<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut ns: Vec<usize> = Vec::new();
    let mut taus: Vec<f64> = Vec::new();
    for r in records {
        if !ns.contains(&r.n) {
            ns.push(r.n);
        }
        if !taus.contains(&r.tau) {
            taus.push(r.tau);
        }
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["tau".to_string()];
    header.extend(ns.iter().map(|n| format!("N={n}")));
    w.write_record(&header)?;
    for tau in &taus {
        let mut row = vec![tau.to_string()];
        for n in &ns {
            let cell = records
                .iter()
                .find(|r| r.n == *n && r.tau == *tau)
                .map_or_else(String::new, |r| r.avg_p_n_db.to_string());
            row.push(cell);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
