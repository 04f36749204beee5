//! Feasibility objectives over the `2 x N` phase matrix.
//!
//! For a fixed power `P` each user has a constraint
//! `g_k(Theta) = sum_nu erfc(sqrt(P)/sigma * tr(Theta U_{nu,k}))/2 - p_k`.
//! The feasibility test uses the hard maximum over users; the descent
//! solver minimizes its log-sum-exp smoothing instead. A second smooth
//! objective, `v0`, pushes every trace positive and supplies the starting
//! point.

use nalgebra::Matrix2xX;

use crate::error::{invalid, Error, Result};
use crate::geometry::DirectionMatrices;
use crate::special::erfc;

/// Scalar objective with a Euclidean gradient in the `2 x N` ambient space.
pub trait CostFunction {
    fn cost(&self, theta: &Matrix2xX<f64>) -> f64;

    fn cost_and_gradient(&self, theta: &Matrix2xX<f64>) -> (f64, Matrix2xX<f64>);
}

impl<C: CostFunction + ?Sized> CostFunction for &C {
    fn cost(&self, theta: &Matrix2xX<f64>) -> f64 {
        (**self).cost(theta)
    }

    fn cost_and_gradient(&self, theta: &Matrix2xX<f64>) -> (f64, Matrix2xX<f64>) {
        (**self).cost_and_gradient(theta)
    }
}

/// Adapts a closure returning `(value, gradient)` into a [`CostFunction`].
pub struct FnCost<F>(pub F);

impl<F> CostFunction for FnCost<F>
where
    F: Fn(&Matrix2xX<f64>) -> (f64, Matrix2xX<f64>),
{
    fn cost(&self, theta: &Matrix2xX<f64>) -> f64 {
        (self.0)(theta).0
    }

    fn cost_and_gradient(&self, theta: &Matrix2xX<f64>) -> (f64, Matrix2xX<f64>) {
        (self.0)(theta)
    }
}

/// `ln sum exp(x_i)` evaluated as `m + ln sum exp(x_i - m)`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Softmax weights `exp(x_i) / sum exp(x_j)`, overflow safe.
fn softmax(values: &[f64]) -> Vec<f64> {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = values.iter().map(|v| (v - m).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// Per-user SEP constraints at a fixed transmit power.
#[derive(Debug, Clone)]
pub struct FeasibilityProblem<'a> {
    dirs: &'a DirectionMatrices,
    targets: Vec<f64>,
    power: f64,
    sigma_w: f64,
}

impl<'a> FeasibilityProblem<'a> {
    pub fn new(dirs: &'a DirectionMatrices, targets: &[f64], power: f64, sigma_w: f64) -> Result<Self> {
        if targets.len() != dirs.k() {
            return Err(Error::Dimension {
                context: "SEP target count",
                expected: dirs.k(),
                actual: targets.len(),
            });
        }
        validate_targets(targets)?;
        if !(power >= 0.0 && power.is_finite()) {
            return Err(invalid(format!("power must be finite and >= 0, got {power}")));
        }
        if !(sigma_w > 0.0 && sigma_w.is_finite()) {
            return Err(invalid(format!("noise std must be positive, got {sigma_w}")));
        }
        Ok(Self {
            dirs,
            targets: targets.to_vec(),
            power,
            sigma_w,
        })
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn dirs(&self) -> &DirectionMatrices {
        self.dirs
    }

    fn scale(&self) -> f64 {
        (self.power / (self.sigma_w * self.sigma_w)).sqrt()
    }

    /// `g_k(Theta)` for a single user.
    pub fn constraint(&self, k: usize, theta: &Matrix2xX<f64>) -> f64 {
        let c = self.scale();
        let t1 = self.dirs.trace(theta, 1, k);
        let t2 = self.dirs.trace(theta, 2, k);
        0.5 * erfc(c * t1) + 0.5 * erfc(c * t2) - self.targets[k]
    }

    pub fn constraints(&self, theta: &Matrix2xX<f64>) -> Vec<f64> {
        let c = self.scale();
        self.dirs
            .traces(theta)
            .iter()
            .zip(&self.targets)
            .map(|(t, p)| 0.5 * erfc(c * t[0]) + 0.5 * erfc(c * t[1]) - p)
            .collect()
    }

    /// `max_k g_k`; the targets are met iff this is `<= 0`.
    pub fn f_max(&self, theta: &Matrix2xX<f64>) -> f64 {
        self.constraints(theta).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `ln sum_k exp(g_k)`.
    pub fn f_smooth(&self, theta: &Matrix2xX<f64>) -> f64 {
        log_sum_exp(&self.constraints(theta))
    }

    pub fn f_smooth_grad(&self, theta: &Matrix2xX<f64>) -> Matrix2xX<f64> {
        self.smooth_value_and_gradient(theta).1
    }

    fn smooth_value_and_gradient(&self, theta: &Matrix2xX<f64>) -> (f64, Matrix2xX<f64>) {
        let c = self.scale();
        let traces = self.dirs.traces(theta);
        let g: Vec<f64> = traces
            .iter()
            .zip(&self.targets)
            .map(|(t, p)| 0.5 * erfc(c * t[0]) + 0.5 * erfc(c * t[1]) - p)
            .collect();
        let weights = softmax(&g);
        // d/dt erfc(c t)/2 = -(c / sqrt(pi)) exp(-c^2 t^2)
        let lead = -c / std::f64::consts::PI.sqrt();
        let mut grad = Matrix2xX::zeros(theta.ncols());
        for (k, (t, w)) in traces.iter().zip(&weights).enumerate() {
            for (nu, &tr) in t.iter().enumerate() {
                let arg = c * tr;
                let weight = w * lead * (-arg * arg).exp();
                if weight != 0.0 {
                    self.dirs.accumulate_transpose(&mut grad, nu + 1, k, weight);
                }
            }
        }
        (log_sum_exp(&g), grad)
    }
}

impl CostFunction for FeasibilityProblem<'_> {
    fn cost(&self, theta: &Matrix2xX<f64>) -> f64 {
        self.f_smooth(theta)
    }

    fn cost_and_gradient(&self, theta: &Matrix2xX<f64>) -> (f64, Matrix2xX<f64>) {
        self.smooth_value_and_gradient(theta)
    }
}

pub(crate) fn validate_targets(targets: &[f64]) -> Result<()> {
    match targets.iter().find(|&&p| !(p > 0.0 && p <= 0.5)) {
        Some(bad) => Err(invalid(format!("SEP target must lie in (0, 0.5], got {bad}"))),
        None => Ok(()),
    }
}

/// Smoothed negative minimum trace,
/// `v0 = ln sum_k (exp(-tr(Theta U_1k)) + exp(-tr(Theta U_2k)))`.
#[derive(Debug, Clone, Copy)]
pub struct InitObjective<'a> {
    dirs: &'a DirectionMatrices,
}

impl<'a> InitObjective<'a> {
    pub fn new(dirs: &'a DirectionMatrices) -> Self {
        Self { dirs }
    }

    fn negated_traces(&self, theta: &Matrix2xX<f64>) -> Vec<f64> {
        self.dirs.traces(theta).iter().flat_map(|t| [-t[0], -t[1]]).collect()
    }

    pub fn value(&self, theta: &Matrix2xX<f64>) -> f64 {
        log_sum_exp(&self.negated_traces(theta))
    }

    pub fn gradient(&self, theta: &Matrix2xX<f64>) -> Matrix2xX<f64> {
        self.cost_and_gradient(theta).1
    }
}

impl CostFunction for InitObjective<'_> {
    fn cost(&self, theta: &Matrix2xX<f64>) -> f64 {
        self.value(theta)
    }

    fn cost_and_gradient(&self, theta: &Matrix2xX<f64>) -> (f64, Matrix2xX<f64>) {
        let x = self.negated_traces(theta);
        let weights = softmax(&x);
        let mut grad = Matrix2xX::zeros(theta.ncols());
        for (i, w) in weights.iter().enumerate() {
            self.dirs.accumulate_transpose(&mut grad, i % 2 + 1, i / 2, -w);
        }
        (log_sum_exp(&x), grad)
    }
}

/// Free-function form of `v0`.
pub fn v_init(theta: &Matrix2xX<f64>, dirs: &DirectionMatrices) -> f64 {
    InitObjective::new(dirs).value(theta)
}

pub fn v_init_grad(theta: &Matrix2xX<f64>, dirs: &DirectionMatrices) -> Matrix2xX<f64> {
    InitObjective::new(dirs).gradient(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelSet, RotatedChannels};
    use crate::constellation::PskConstellation;
    use crate::geometry::PhasePoint;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_4;

    fn instance(seed: u64, n: usize, k: usize) -> (DirectionMatrices, PhasePoint) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psk = PskConstellation::new(4).unwrap();
        let cs = ChannelSet::generate_rayleigh(n, k, 1.0, &mut rng).unwrap();
        let s = psk.random_symbols(k, &mut rng).unwrap();
        let a = cs.rotate(&s, &psk).unwrap();
        (
            DirectionMatrices::build(&a, psk.half_angle()),
            PhasePoint::random(n, &mut rng).unwrap(),
        )
    }

    /// Unit channel rotated so that the phase point `theta = 1` sees
    /// `omega = sqrt(2) * e^{j0}`, i.e. both traces equal one.
    fn aligned_single_user() -> (DirectionMatrices, PhasePoint) {
        let a = RotatedChannels::from_rows(vec![vec![Complex64::new(2f64.sqrt(), 0.0)]]).unwrap();
        (
            DirectionMatrices::build(&a, FRAC_PI_4),
            PhasePoint::from_phases(&[0.0]).unwrap(),
        )
    }

    #[test]
    fn zero_power_gives_one_minus_target() {
        let (dirs, theta) = instance(1, 6, 3);
        let targets = [1e-2, 1e-3, 0.2];
        let prob = FeasibilityProblem::new(&dirs, &targets, 0.0, 1.0).unwrap();
        for (k, p) in targets.iter().enumerate() {
            assert!((prob.constraint(k, theta.matrix()) - (1.0 - p)).abs() < 1e-15);
        }
        let half = FeasibilityProblem::new(&dirs, &[0.5; 3], 0.0, 1.0).unwrap();
        assert!((half.f_max(theta.matrix()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn aligned_user_at_unit_snr() {
        let (dirs, theta) = aligned_single_user();
        assert!((dirs.trace(theta.matrix(), 1, 0) - 1.0).abs() < 1e-15);
        let prob = FeasibilityProblem::new(&dirs, &[1e-2], 1.0, 1.0).unwrap();
        let g = prob.constraint(0, theta.matrix());
        assert!((g - (0.157_299_207_050_285_13 - 1e-2)).abs() < 1e-6);
        assert_eq!(prob.f_max(theta.matrix()), g);
        assert!((prob.f_smooth(theta.matrix()) - g).abs() < 1e-15);
    }

    #[test]
    fn f_max_is_largest_constraint() {
        for seed in 0..10 {
            let (dirs, theta) = instance(seed, 8, 4);
            let prob = FeasibilityProblem::new(&dirs, &[0.01, 0.02, 0.05, 0.1], 3.0, 1.0).unwrap();
            let want = (0..4)
                .map(|k| prob.constraint(k, theta.matrix()))
                .fold(f64::MIN, f64::max);
            assert_eq!(prob.f_max(theta.matrix()), want);
        }
    }

    #[test]
    fn lse_constant_and_singleton() {
        assert!((log_sum_exp(&[0.3; 5]) - (0.3 + 5f64.ln())).abs() < 1e-15);
        assert_eq!(log_sum_exp(&[-2.5]), -2.5);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn v0_closed_forms() {
        let (dirs, theta) = aligned_single_user();
        // both traces are 1 => ln(2) - 1
        assert!((v_init(theta.matrix(), &dirs) - (2f64.ln() - 1.0)).abs() < 1e-14);
        // a zero channel gives all-zero traces => ln(2K)
        let zero = RotatedChannels::from_rows(vec![vec![Complex64::new(0.0, 0.0); 3]; 4]).unwrap();
        let dz = DirectionMatrices::build(&zero, FRAC_PI_4);
        let t = PhasePoint::from_phases(&[0.1, 0.2, 0.3]).unwrap();
        assert!((v_init(t.matrix(), &dz) - 8f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn target_validation() {
        let (dirs, _) = instance(3, 4, 2);
        assert!(FeasibilityProblem::new(&dirs, &[0.1], 1.0, 1.0).is_err());
        assert!(FeasibilityProblem::new(&dirs, &[0.1, 0.0], 1.0, 1.0).is_err());
        assert!(FeasibilityProblem::new(&dirs, &[0.1, 0.7], 1.0, 1.0).is_err());
        assert!(FeasibilityProblem::new(&dirs, &[0.1, 0.1], -1.0, 1.0).is_err());
        assert!(FeasibilityProblem::new(&dirs, &[0.1, 0.1], 1.0, 0.0).is_err());
    }

    /// Central differences in the ambient space.
    fn finite_difference(f: impl Fn(&Matrix2xX<f64>) -> f64, x: &Matrix2xX<f64>, h: f64) -> Matrix2xX<f64> {
        let mut grad = Matrix2xX::zeros(x.ncols());
        let mut probe = x.clone();
        for i in 0..x.len() {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            grad[i] = (up - down) / (2.0 * h);
        }
        grad
    }

    fn assert_grad_close(analytic: &Matrix2xX<f64>, numeric: &Matrix2xX<f64>) {
        let scale = numeric.amax().max(1e-8);
        for i in 0..analytic.len() {
            let err = (analytic[i] - numeric[i]).abs() / numeric[i].abs().max(scale);
            assert!(err < 1e-5, "entry {i}: {} vs {}", analytic[i], numeric[i]);
        }
    }

    #[test]
    fn smooth_gradient_matches_finite_differences() {
        for seed in 0..5 {
            let (dirs, theta) = instance(100 + seed, 10, 3);
            let prob = FeasibilityProblem::new(&dirs, &[1e-2, 1e-3, 5e-2], 0.05, 1.0).unwrap();
            let numeric = finite_difference(|x| prob.f_smooth(x), theta.matrix(), 1e-6);
            assert_grad_close(&prob.f_smooth_grad(theta.matrix()), &numeric);
        }
    }

    #[test]
    fn init_gradient_matches_finite_differences() {
        for seed in 0..5 {
            let (dirs, theta) = instance(200 + seed, 7, 4);
            let numeric = finite_difference(|x| v_init(x, &dirs), theta.matrix(), 1e-6);
            assert_grad_close(&v_init_grad(theta.matrix(), &dirs), &numeric);
        }
    }

    #[test]
    fn huge_power_saturates_gradient_without_nan() {
        let (dirs, theta) = instance(9, 6, 2);
        let prob = FeasibilityProblem::new(&dirs, &[1e-3, 1e-3], 1e12, 1.0).unwrap();
        let (v, g) = prob.cost_and_gradient(theta.matrix());
        assert!(v.is_finite());
        assert!(g.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn f_max_decreases_with_power_when_traces_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // Single user, theta aligned with the conjugate channel phases.
        let a: Vec<Complex64> = (0..5)
            .map(|_| Complex64::from_polar(rng.random_range(0.5..1.5), rng.random_range(-3.0..3.0)))
            .collect();
        let theta: Vec<f64> = a.iter().map(|z| -z.arg()).collect();
        let dirs = DirectionMatrices::build(&RotatedChannels::from_rows(vec![a]).unwrap(), FRAC_PI_4);
        let theta = PhasePoint::from_phases(&theta).unwrap();
        assert!(dirs.min_trace(theta.matrix()) > 0.0);
        let mut prev = f64::INFINITY;
        for p in [0.0, 0.01, 0.1, 0.5, 1.0, 2.0] {
            let v = FeasibilityProblem::new(&dirs, &[1e-3], p, 1.0)
                .unwrap()
                .f_max(theta.matrix());
            assert!(v < prev);
            prev = v;
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn lse_sandwich(seed in 0u64..10_000, k in 1usize..7, n in 1usize..12, power in 0.0f64..50.0) {
                let (dirs, theta) = instance(seed, n, k);
                let targets: Vec<f64> = (0..k).map(|i| 10f64.powi(-(1 + (i as i32 % 6)))).collect();
                let prob = FeasibilityProblem::new(&dirs, &targets, power, 1.0).unwrap();
                let hard = prob.f_max(theta.matrix());
                let soft = prob.f_smooth(theta.matrix());
                prop_assert!(hard <= soft + 1e-12);
                prop_assert!(soft <= hard + (k as f64).ln() + 1e-12);
            }
        }
    }
}
