//! Self-check suite run by `ris-power --mode check`.

use std::fmt;

use nalgebra::Matrix2xX;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::constellation::{PskConstellation, SymbolVector};
use crate::error::Result;
use crate::geometry::{DirectionMatrices, PhasePoint};
use crate::manifold::{project_tangent, retract};
use crate::objective::{v_init, v_init_grad, FeasibilityProblem};
use crate::solver::{bisect, BisectionConfig, Instance};
use crate::special::single_user_power;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckConfig {
    pub instances: usize,
    pub fd_step: f64,
    /// Relative tolerance for analytic vs. finite-difference gradients.
    pub fd_tol: f64,
    pub sandwich_slack: f64,
    pub manifold_tol: f64,
    /// Relative tolerance of the closed-form single-user power.
    pub oracle_tol: f64,
    /// Flips the sign of the analytic gradients before comparison.
    pub inject_gradient_sign_flip: bool,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            instances: 20,
            fd_step: 1e-6,
            fd_tol: 1e-5,
            sandwich_slack: 1e-12,
            manifold_tol: 1e-10,
            oracle_tol: 1e-3,
            inject_gradient_sign_flip: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub rows: Vec<CheckRow>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
        writeln!(f, "{:<width$}  status  detail", "check")?;
        for r in &self.rows {
            let status = if r.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{:<width$}  {status:<6}  {}", r.name, r.detail)?;
        }
        Ok(())
    }
}

fn random_case(seed: u64, n: usize, k: usize) -> Result<(DirectionMatrices, PhasePoint)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let psk = PskConstellation::new(4)?;
    let cs = ChannelSet::generate_rayleigh(n, k, 1.0, &mut rng)?;
    let s = psk.random_symbols(k, &mut rng)?;
    let dirs = DirectionMatrices::build(&cs.rotate(&s, &psk)?, psk.half_angle());
    Ok((dirs, PhasePoint::random(n, &mut rng)?))
}

/// Worst relative gap between `analytic` and central differences of `f`.
/// Entries are compared relative to `max(|numeric_i|, max_j |numeric_j|)`.
pub fn gradient_error(
    f: impl Fn(&Matrix2xX<f64>) -> f64,
    analytic: &Matrix2xX<f64>,
    at: &Matrix2xX<f64>,
    step: f64,
) -> f64 {
    let mut probe = at.clone();
    let mut numeric = Matrix2xX::zeros(at.ncols());
    for i in 0..at.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let up = f(&probe);
        probe[i] = orig - step;
        let down = f(&probe);
        probe[i] = orig;
        numeric[i] = (up - down) / (2.0 * step);
    }
    let scale = numeric.amax().max(f64::MIN_POSITIVE);
    (0..at.len())
        .map(|i| (analytic[i] - numeric[i]).abs() / numeric[i].abs().max(scale))
        .fold(0.0, f64::max)
}

/// Runs every check and collects one row per check.
pub fn run_checks(cfg: &CheckConfig, seed: u64) -> Result<CheckReport> {
    let sign = if cfg.inject_gradient_sign_flip { -1.0 } else { 1.0 };
    let shapes = [(4usize, 2usize), (16, 5), (32, 2)];
    let mut rows = Vec::new();

    let mut worst_f0: f64 = 0.0;
    let mut worst_v0: f64 = 0.0;
    for i in 0..cfg.instances {
        let (n, k) = shapes[i % shapes.len()];
        let (dirs, theta) = random_case(seed.wrapping_add(i as u64), n, k)?;
        let targets: Vec<f64> = (0..k).map(|j| 10f64.powi(-(1 + j as i32 % 4))).collect();
        let prob = FeasibilityProblem::new(&dirs, &targets, 1.0 / n as f64, 1.0)?;
        let g = prob.f_smooth_grad(theta.matrix()) * sign;
        worst_f0 = worst_f0.max(gradient_error(|x| prob.f_smooth(x), &g, theta.matrix(), cfg.fd_step));
        let g = v_init_grad(theta.matrix(), &dirs) * sign;
        worst_v0 = worst_v0.max(gradient_error(|x| v_init(x, &dirs), &g, theta.matrix(), cfg.fd_step));
    }
    for (name, worst) in [("gradient_f0", worst_f0), ("gradient_v0", worst_v0)] {
        rows.push(CheckRow {
            name: name.into(),
            passed: worst <= cfg.fd_tol,
            detail: format!("max rel err {worst:.3e} (tol {:.1e})", cfg.fd_tol),
        });
    }

    let mut violations = 0;
    let mut pairs = 0;
    for i in 0..cfg.instances * 10 {
        let (n, k) = shapes[i % shapes.len()];
        let (dirs, theta) = random_case(seed.wrapping_add(10_000 + i as u64), n, k)?;
        let targets = vec![1e-2; k];
        let power = (i % 7) as f64;
        let prob = FeasibilityProblem::new(&dirs, &targets, power, 1.0)?;
        let hard = prob.f_max(theta.matrix());
        let soft = prob.f_smooth(theta.matrix());
        if hard > soft + cfg.sandwich_slack || soft > hard + (k as f64).ln() + cfg.sandwich_slack {
            violations += 1;
        }
        pairs += 1;
    }
    rows.push(CheckRow {
        name: "lse_sandwich".into(),
        passed: violations == 0,
        detail: format!("{violations} violations in {pairs} pairs"),
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut worst_norm: f64 = 0.0;
    for _ in 0..cfg.instances {
        let p = PhasePoint::random(24, &mut rng)?;
        let ambient = Matrix2xX::from_fn(24, |_, _| StandardNormal.sample(&mut rng));
        let xi = project_tangent(&p, &ambient);
        for t in [1e-6, 1e-2, 1.0, 1e3] {
            worst_norm = worst_norm.max(retract(&p, &xi, t)?.max_norm_error());
        }
    }
    rows.push(CheckRow {
        name: "retraction".into(),
        passed: worst_norm <= cfg.manifold_tol,
        detail: format!("max column norm error {worst_norm:.3e}"),
    });

    let psk = PskConstellation::new(4)?;
    let inst = Instance::with_tau(
        ChannelSet::ones(1, 1, 1.0)?,
        SymbolVector::new(vec![0], &psk)?,
        psk.clone(),
        3.0,
    )?;
    let cfg_bisect = BisectionConfig {
        eps_tol: 1e-6,
        ..BisectionConfig::default()
    };
    let res = bisect(&inst, &cfg_bisect, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let want = single_user_power(1e-3, 1.0, psk.half_angle(), 1.0);
    let rel = ((res.p_opt - want) / want).abs();
    rows.push(CheckRow {
        name: "closed_form_power".into(),
        passed: res.feasible && rel <= cfg.oracle_tol,
        detail: format!("p_opt {:.6} vs {want:.6}, rel {rel:.2e}", res.p_opt),
    });

    Ok(CheckReport { rows })
}
