//! Riemannian conjugate gradient on the oblique manifold.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::PhasePoint;
use crate::manifold::{inner, project_tangent, retract, transport, TangentVector};
use crate::objective::CostFunction;

/// Maximum number of step halvings tried in one line search.
const MAX_BACKTRACKS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaRule {
    /// `max(0, <g+, g+ - T(g)> / <g, g>)`
    PolakRibierePlus,
    FletcherReeves,
    /// `beta = 0`: plain Riemannian steepest descent.
    SteepestDescent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RcgConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
    pub initial_step: f64,
    pub beta_rule: BetaRule,
}

impl Default for RcgConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-8,
            armijo_c1: 1e-4,
            backtrack_factor: 0.5,
            initial_step: 1.0,
            beta_rule: BetaRule::PolakRibierePlus,
        }
    }
}

impl RcgConfig {
    /// Defaults for the starting-point solve.
    pub fn for_initialization() -> Self {
        Self {
            max_iters: 200,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0) {
            return Err(invalid(format!("armijo_c1 must be in (0, 1), got {}", self.armijo_c1)));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(invalid(format!(
                "backtrack_factor must be in (0, 1), got {}",
                self.backtrack_factor
            )));
        }
        if !(self.grad_tol > 0.0) {
            return Err(invalid("grad_tol must be positive"));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(invalid("initial_step must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct RcgReport {
    pub final_point: PhasePoint,
    pub final_value: f64,
    pub final_grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Objective value at the start and after every accepted step.
    pub value_trace: Vec<f64>,
    /// Riemannian gradient norm, aligned with `value_trace`.
    pub grad_norm_trace: Vec<f64>,
    /// Iterations where the conjugacy coefficient was clamped to zero.
    pub restarts: usize,
}

impl RcgReport {
    /// `iteration,value,grad_norm` rows with a header.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "value", "grad_norm"])?;
        for (i, (v, g)) in self.value_trace.iter().zip(&self.grad_norm_trace).enumerate() {
            w.write_record([i.to_string(), v.to_string(), g.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Iterate {
    point: PhasePoint,
    value: f64,
    grad: TangentVector,
}

fn evaluate<C: CostFunction + ?Sized>(cost: &C, point: PhasePoint, iteration: usize) -> Result<Iterate> {
    let (value, egrad) = cost.cost_and_gradient(point.matrix());
    if !value.is_finite() || egrad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite { iteration });
    }
    let grad = project_tangent(&point, &egrad);
    Ok(Iterate { point, value, grad })
}

/// Armijo backtracking along `dir` from `at`. Returns the accepted point,
/// its value and the step used.
fn line_search<C: CostFunction + ?Sized>(
    cost: &C,
    at: &Iterate,
    dir: &TangentVector,
    slope: f64,
    first_step: f64,
    cfg: &RcgConfig,
    iteration: usize,
) -> Result<Option<(PhasePoint, f64, f64)>> {
    let mut step = first_step;
    for _ in 0..MAX_BACKTRACKS {
        match retract(&at.point, dir, step) {
            Ok(candidate) => {
                let value = cost.cost(candidate.matrix());
                if !value.is_finite() {
                    return Err(Error::NonFinite { iteration });
                }
                if value <= at.value + cfg.armijo_c1 * step * slope && value < at.value {
                    return Ok(Some(refine(cost, at, dir, slope, (candidate, value, step))));
                }
            }
            Err(Error::DegenerateStep { .. }) => {}
            Err(e) => return Err(e),
        }
        step *= cfg.backtrack_factor;
    }
    Ok(None)
}

/// One probe at the minimizer of the quadratic through `f(0)`, `f'(0)` and
/// the accepted `f(t)`, kept only if it lowers the value further.
fn refine<C: CostFunction + ?Sized>(
    cost: &C,
    at: &Iterate,
    dir: &TangentVector,
    slope: f64,
    accepted: (PhasePoint, f64, f64),
) -> (PhasePoint, f64, f64) {
    let (_, value, step) = accepted;
    let curvature = value - at.value - slope * step;
    if curvature <= 0.0 {
        return accepted;
    }
    let guess = -slope * step * step / (2.0 * curvature);
    if !(guess > 0.1 * step && guess < 0.9 * step) {
        return accepted;
    }
    match retract(&at.point, dir, guess) {
        Ok(candidate) => {
            let v = cost.cost(candidate.matrix());
            if v.is_finite() && v < value {
                (candidate, v, guess)
            } else {
                accepted
            }
        }
        Err(_) => accepted,
    }
}

/// Minimizes `cost` over the oblique manifold starting from `start`.
///
/// Never returns a point worse than `start`. Stops when the Riemannian
/// gradient norm drops to `grad_tol`, after `max_iters` accepted steps, or
/// when neither the conjugate nor the steepest-descent direction admits an
/// Armijo step.
pub fn minimize<C: CostFunction + ?Sized>(cost: &C, start: PhasePoint, cfg: &RcgConfig) -> Result<RcgReport> {
    cfg.validate()?;
    let mut current = evaluate(cost, start, 0)?;
    let mut grad_norm = current.grad.norm();
    let mut value_trace = vec![current.value];
    let mut grad_norm_trace = vec![grad_norm];
    let mut dir = current.grad.scaled(-1.0);
    let mut step_guess = cfg.initial_step;
    let mut restarts = 0;
    let mut iterations = 0;

    let stop_reason = loop {
        if grad_norm <= cfg.grad_tol {
            break StopReason::GradientTolerance;
        }
        if iterations >= cfg.max_iters {
            break StopReason::MaxIterations;
        }

        let mut slope = inner(&current.grad, &dir);
        if slope >= 0.0 {
            dir = current.grad.scaled(-1.0);
            slope = -grad_norm * grad_norm;
            restarts += 1;
        }
        let mut accepted = line_search(cost, &current, &dir, slope, step_guess, cfg, iterations)?;
        if accepted.is_none() && slope != -grad_norm * grad_norm {
            // retry once along steepest descent
            dir = current.grad.scaled(-1.0);
            slope = -grad_norm * grad_norm;
            restarts += 1;
            accepted = line_search(cost, &current, &dir, slope, cfg.initial_step, cfg, iterations)?;
        }
        let Some((point, _, step)) = accepted else {
            break StopReason::LineSearchFailed;
        };

        iterations += 1;
        let next = evaluate(cost, point, iterations)?;
        let next_norm = next.grad.norm();

        let old_grad = transport(&next.point, &current.grad);
        let old_dir = transport(&next.point, &dir);
        let denom = grad_norm * grad_norm;
        let beta = match cfg.beta_rule {
            BetaRule::PolakRibierePlus => {
                let raw = (inner(&next.grad, &next.grad) - inner(&next.grad, &old_grad)) / denom;
                if raw < 0.0 {
                    restarts += 1;
                    0.0
                } else {
                    raw
                }
            }
            BetaRule::FletcherReeves => next_norm * next_norm / denom,
            BetaRule::SteepestDescent => 0.0,
        };
        dir = TangentVector(-&next.grad.0 + old_dir.0 * beta);
        step_guess = 2.0 * step;

        current = next;
        grad_norm = next_norm;
        value_trace.push(current.value);
        grad_norm_trace.push(grad_norm);
    };

    Ok(RcgReport {
        final_value: current.value,
        final_grad_norm: grad_norm,
        final_point: current.point,
        iterations,
        converged: stop_reason == StopReason::GradientTolerance,
        stop_reason,
        value_trace,
        grad_norm_trace,
        restarts,
    })
}
