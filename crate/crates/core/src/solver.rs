//! Bisection over transmit power with a manifold feasibility oracle.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::constellation::{PskConstellation, SymbolVector};
use crate::error::{invalid, Error, Result};
use crate::geometry::{DirectionMatrices, PhasePoint};
use crate::objective::{validate_targets, FeasibilityProblem, InitObjective};
use crate::rcg::{minimize, RcgConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BisectionConfig {
    pub p_lower: f64,
    pub p_upper: f64,
    pub eps_tol: f64,
    pub i_max: usize,
    /// How many times the upper power may be doubled when the first probe is
    /// infeasible. Zero disables bracket repair.
    pub bracket_repairs: u32,
    /// Start each feasibility solve from the last certified-feasible point
    /// instead of the initialization point.
    pub warm_start: bool,
    pub rcg: RcgConfig,
    pub rcg_init: RcgConfig,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        Self {
            p_lower: 0.0,
            p_upper: 100.0,
            eps_tol: 1e-7,
            i_max: 100,
            bracket_repairs: 4,
            warm_start: true,
            rcg: RcgConfig::default(),
            rcg_init: RcgConfig::for_initialization(),
        }
    }
}

impl BisectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_lower >= 0.0 && self.p_lower < self.p_upper && self.p_upper.is_finite()) {
            return Err(Error::Config(format!(
                "power bracket must satisfy 0 <= p_lower < p_upper, got [{}, {}]",
                self.p_lower, self.p_upper
            )));
        }
        if !(self.eps_tol > 0.0) {
            return Err(Error::Config("eps_tol must be positive".into()));
        }
        if self.i_max == 0 {
            return Err(Error::Config("i_max must be at least 1".into()));
        }
        self.rcg.validate()?;
        self.rcg_init.validate()
    }
}

/// A single precoding problem: channels, the symbols to deliver, and the
/// per-user SEP targets.
#[derive(Debug, Clone)]
pub struct Instance {
    pub channels: ChannelSet,
    pub symbols: SymbolVector,
    pub constellation: PskConstellation,
    pub targets: Vec<f64>,
}

impl Instance {
    pub fn new(
        channels: ChannelSet,
        symbols: SymbolVector,
        constellation: PskConstellation,
        targets: Vec<f64>,
    ) -> Result<Self> {
        if symbols.len() != channels.k() {
            return Err(Error::Dimension {
                context: "symbol vector length",
                expected: channels.k(),
                actual: symbols.len(),
            });
        }
        if targets.len() != channels.k() {
            return Err(Error::Dimension {
                context: "SEP target count",
                expected: channels.k(),
                actual: targets.len(),
            });
        }
        validate_targets(&targets)?;
        // re-check indices against this constellation
        let symbols = SymbolVector::new(symbols.indices().to_vec(), &constellation)?;
        Ok(Self {
            channels,
            symbols,
            constellation,
            targets,
        })
    }

    /// Same target `10^-tau` for every user.
    pub fn with_tau(
        channels: ChannelSet,
        symbols: SymbolVector,
        constellation: PskConstellation,
        tau: f64,
    ) -> Result<Self> {
        let k = channels.k();
        Self::new(channels, symbols, constellation, vec![10f64.powf(-tau); k])
    }

    pub fn direction_matrices(&self) -> Result<DirectionMatrices> {
        let rotated = self.channels.rotate(&self.symbols, &self.constellation)?;
        Ok(DirectionMatrices::build(&rotated, self.constellation.half_angle()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Feasible,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub power: f64,
    pub f_value: f64,
    pub branch: Branch,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    /// Smallest certified-feasible power (linear). For an infeasible
    /// instance this is the last upper power probed.
    pub p_opt: f64,
    #[serde(with = "complex_vec")]
    pub theta_opt: Vec<Complex64>,
    pub feasible: bool,
    pub iterations: usize,
    /// `max_k g_k` at `(theta_opt, p_opt)`.
    pub f_value: f64,
    pub trace: Vec<BisectionStep>,
    /// `10 log10(p_opt / sigma_w^2)`.
    pub p_n_db: f64,
}

mod complex_vec {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

/// `10 log10(P / sigma_w^2)`.
pub fn normalized_power_db(power: f64, noise_var: f64) -> f64 {
    10.0 * (power / noise_var).log10()
}

/// Minimizes the smoothed negative minimum trace from `start`.
pub fn initialize_point(dirs: &DirectionMatrices, cfg: &RcgConfig, start: PhasePoint) -> Result<PhasePoint> {
    let report = minimize(&InitObjective::new(dirs), start, cfg)?;
    Ok(report.final_point)
}

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub feasible: bool,
    pub theta: PhasePoint,
    /// Hard `max_k g_k` at `theta`.
    pub f_value: f64,
    pub diagnostic: Option<String>,
}

/// Decides whether `power` admits a phase configuration meeting every target.
///
/// Runs the conjugate-gradient solver on the smoothed objective and then
/// classifies the result with the hard maximum, so the smoothing overshoot
/// never turns a feasible point into an infeasible verdict or vice versa.
pub fn feasibility_oracle(
    power: f64,
    dirs: &DirectionMatrices,
    targets: &[f64],
    sigma_w: f64,
    start: &PhasePoint,
    cfg: &RcgConfig,
) -> Result<OracleOutcome> {
    let problem = FeasibilityProblem::new(dirs, targets, power, sigma_w)?;
    match minimize(&problem, start.clone(), cfg) {
        Ok(report) => {
            let f_value = problem.f_max(report.final_point.matrix());
            Ok(OracleOutcome {
                feasible: f_value <= 0.0,
                theta: report.final_point,
                f_value,
                diagnostic: None,
            })
        }
        Err(Error::NonFinite { iteration }) => Ok(OracleOutcome {
            feasible: false,
            theta: start.clone(),
            f_value: problem.f_max(start.matrix()),
            diagnostic: Some(format!("non-finite objective at RCG iteration {iteration}")),
        }),
        Err(e) => Err(e),
    }
}

/// Runs the bisection for `instance`. `rng` only supplies the random start
/// of the initialization solve.
pub fn bisect<R: Rng + ?Sized>(instance: &Instance, cfg: &BisectionConfig, rng: &mut R) -> Result<SolveResult> {
    cfg.validate()?;
    let dirs = instance.direction_matrices()?;
    let start = PhasePoint::random(instance.channels.n(), rng)?;
    let theta0 = initialize_point(&dirs, &cfg.rcg_init, start)?;
    bisect_from(instance, &dirs, theta0, cfg)
}

/// Bisection from a given initialization point.
pub fn bisect_from(
    instance: &Instance,
    dirs: &DirectionMatrices,
    theta0: PhasePoint,
    cfg: &BisectionConfig,
) -> Result<SolveResult> {
    cfg.validate()?;
    if theta0.n() != dirs.n() {
        return Err(invalid("initial point has the wrong number of elements"));
    }
    let sigma_w = instance.channels.sigma_w();
    let noise_var = instance.channels.noise_var();
    let targets = &instance.targets;
    let mut trace = Vec::new();
    let mut record = |out: &OracleOutcome, power: f64| {
        trace.push(BisectionStep {
            power,
            f_value: out.f_value,
            branch: if out.feasible {
                Branch::Feasible
            } else {
                Branch::Infeasible
            },
        });
    };

    let mut lower = cfg.p_lower;
    let mut upper = cfg.p_upper;
    let mut probe = feasibility_oracle(upper, dirs, targets, sigma_w, &theta0, &cfg.rcg)?;
    record(&probe, upper);
    let mut repairs = 0;
    while !probe.feasible && repairs < cfg.bracket_repairs {
        lower = upper;
        upper *= 2.0;
        probe = feasibility_oracle(upper, dirs, targets, sigma_w, &theta0, &cfg.rcg)?;
        record(&probe, upper);
        repairs += 1;
    }
    if !probe.feasible {
        return Ok(SolveResult {
            p_opt: upper,
            theta_opt: probe.theta.to_complex(),
            feasible: false,
            iterations: 0,
            f_value: probe.f_value,
            trace,
            p_n_db: normalized_power_db(upper, noise_var),
        });
    }

    let mut best = probe.theta;
    let mut best_f = probe.f_value;
    let mut iterations = 0;
    while upper - lower > cfg.eps_tol && iterations < cfg.i_max {
        let mid = 0.5 * (upper + lower);
        let start = if cfg.warm_start { &best } else { &theta0 };
        let out = feasibility_oracle(mid, dirs, targets, sigma_w, start, &cfg.rcg)?;
        record(&out, mid);
        if out.feasible {
            upper = mid;
            best = out.theta;
            best_f = out.f_value;
        } else {
            lower = mid;
        }
        iterations += 1;
    }

    Ok(SolveResult {
        p_opt: upper,
        theta_opt: best.to_complex(),
        feasible: true,
        iterations,
        f_value: best_f,
        trace,
        p_n_db: normalized_power_db(upper, noise_var),
    })
}
