//! Decision-boundary distances, the union-bound SEP, and the real-valued
//! direction matrices that turn those distances into traces against a point
//! of the oblique manifold.

use nalgebra::{Matrix2xX, MatrixXx2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::RotatedChannels;
use crate::error::{invalid, Error, Result};
use crate::special::erfc;

/// Column-norm tolerance for membership in the oblique manifold.
pub const MANIFOLD_TOL: f64 = 1e-10;

/// RIS phase configuration as a `2 x N` real matrix with unit columns.
///
/// Row 0 holds `Re(theta)`, row 1 holds `Im(theta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    theta: Matrix2xX<f64>,
}

impl PhasePoint {
    /// Wraps a matrix, rejecting columns whose norm is off by more than
    /// [`MANIFOLD_TOL`].
    pub fn from_matrix(theta: Matrix2xX<f64>) -> Result<Self> {
        if theta.ncols() == 0 {
            return Err(invalid("phase point needs at least one element"));
        }
        for (column, col) in theta.column_iter().enumerate() {
            let norm = col.norm();
            if !((norm - 1.0).abs() <= MANIFOLD_TOL) {
                return Err(Error::NotOnManifold { column, norm });
            }
        }
        Ok(Self { theta })
    }

    /// Normalizes every column. Fails on a zero (or non-finite) column.
    pub fn normalized(mut theta: Matrix2xX<f64>) -> Result<Self> {
        if theta.ncols() == 0 {
            return Err(invalid("phase point needs at least one element"));
        }
        for (column, mut col) in theta.column_iter_mut().enumerate() {
            let norm = col.norm();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::DegenerateStep { column });
            }
            col /= norm;
        }
        Ok(Self { theta })
    }

    pub(crate) fn from_matrix_unchecked(theta: Matrix2xX<f64>) -> Self {
        Self { theta }
    }

    pub fn from_phases(phases: &[f64]) -> Result<Self> {
        let theta = Matrix2xX::from_fn(
            phases.len(),
            |r, c| {
                if r == 0 {
                    phases[c].cos()
                } else {
                    phases[c].sin()
                }
            },
        );
        Self::from_matrix(theta)
    }

    pub fn from_complex(theta: &[Complex64]) -> Result<Self> {
        let m = Matrix2xX::from_fn(theta.len(), |r, c| if r == 0 { theta[c].re } else { theta[c].im });
        Self::from_matrix(m)
    }

    /// Uniformly distributed point (each column uniform on the circle).
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        loop {
            let m = Matrix2xX::from_fn(n, |_, _| StandardNormal.sample(rng));
            match Self::normalized(m) {
                Ok(p) => return Ok(p),
                Err(Error::DegenerateStep { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
    }

    pub fn n(&self) -> usize {
        self.theta.ncols()
    }

    pub fn matrix(&self) -> &Matrix2xX<f64> {
        &self.theta
    }

    pub fn into_matrix(self) -> Matrix2xX<f64> {
        self.theta
    }

    /// `theta = Theta[0, :] + j Theta[1, :]`.
    pub fn to_complex(&self) -> Vec<Complex64> {
        self.theta.column_iter().map(|c| Complex64::new(c[0], c[1])).collect()
    }

    /// Largest deviation of a column norm from one.
    pub fn max_norm_error(&self) -> f64 {
        self.theta
            .column_iter()
            .map(|c| (c.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Signed distances from the noiseless received point to the two boundaries
/// of its decision sector, in amplitude units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MddtPair {
    pub d1: f64,
    pub d2: f64,
}

/// Distances for the rotated noiseless sample `omega = a_k^T theta` at
/// transmit power `power`.
pub fn mddt(omega: Complex64, power: f64, half_angle: f64) -> MddtPair {
    let amp = power.sqrt();
    let (s, c) = half_angle.sin_cos();
    MddtPair {
        d1: amp * (omega.re * s - omega.im * c),
        d2: amp * (omega.re * s + omega.im * c),
    }
}

/// `erfc(d1/sigma)/2 + erfc(d2/sigma)/2`.
pub fn union_bound_sep(d: MddtPair, sigma_w: f64) -> f64 {
    0.5 * erfc(d.d1 / sigma_w) + 0.5 * erfc(d.d2 / sigma_w)
}

/// The `2K` matrices `U_{nu,k}`, each `N x 2`, with
/// `tr(Theta U_{1,k}) = Re(omega) sin(phi) - Im(omega) cos(phi)` and
/// `tr(Theta U_{2,k}) = Re(omega) sin(phi) + Im(omega) cos(phi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionMatrices {
    u1: Vec<MatrixXx2<f64>>,
    u2: Vec<MatrixXx2<f64>>,
}

impl DirectionMatrices {
    pub fn build(rotated: &RotatedChannels, half_angle: f64) -> Self {
        let (s, c) = half_angle.sin_cos();
        let n = rotated.n();
        let mut u1 = Vec::with_capacity(rotated.k());
        let mut u2 = Vec::with_capacity(rotated.k());
        for row in rotated.rows() {
            u1.push(MatrixXx2::from_fn(n, |i, j| {
                let a = row[i];
                if j == 0 {
                    a.re * s - a.im * c
                } else {
                    -a.re * c - a.im * s
                }
            }));
            u2.push(MatrixXx2::from_fn(n, |i, j| {
                let a = row[i];
                if j == 0 {
                    a.re * s + a.im * c
                } else {
                    a.re * c - a.im * s
                }
            }));
        }
        Self { u1, u2 }
    }

    pub fn k(&self) -> usize {
        self.u1.len()
    }

    pub fn n(&self) -> usize {
        self.u1[0].nrows()
    }

    /// `U_{nu,k}` with `nu` in `{1, 2}`.
    pub fn u(&self, nu: usize, k: usize) -> &MatrixXx2<f64> {
        match nu {
            1 => &self.u1[k],
            2 => &self.u2[k],
            _ => panic!("boundary index must be 1 or 2, got {nu}"),
        }
    }

    /// `tr(Theta U_{nu,k})`.
    pub fn trace(&self, theta: &Matrix2xX<f64>, nu: usize, k: usize) -> f64 {
        trace_product(theta, self.u(nu, k))
    }

    /// Both traces for every user, as `[tr(Theta U_1k), tr(Theta U_2k)]`.
    pub fn traces(&self, theta: &Matrix2xX<f64>) -> Vec<[f64; 2]> {
        self.u1
            .iter()
            .zip(&self.u2)
            .map(|(a, b)| [trace_product(theta, a), trace_product(theta, b)])
            .collect()
    }

    /// Smallest trace over all users and both boundaries.
    pub fn min_trace(&self, theta: &Matrix2xX<f64>) -> f64 {
        self.traces(theta)
            .iter()
            .flat_map(|t| t.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    /// Union-bound SEP of every user at `power`.
    pub fn union_bound(&self, theta: &Matrix2xX<f64>, power: f64, sigma_w: f64) -> Vec<f64> {
        let amp = power.sqrt();
        self.traces(theta)
            .iter()
            .map(|t| {
                union_bound_sep(
                    MddtPair {
                        d1: amp * t[0],
                        d2: amp * t[1],
                    },
                    sigma_w,
                )
            })
            .collect()
    }

    /// Adds `weight * U_{nu,k}^T` into the `2 x N` accumulator.
    pub(crate) fn accumulate_transpose(&self, acc: &mut Matrix2xX<f64>, nu: usize, k: usize, weight: f64) {
        let u = self.u(nu, k);
        for (n, mut col) in acc.column_iter_mut().enumerate() {
            col[0] += weight * u[(n, 0)];
            col[1] += weight * u[(n, 1)];
        }
    }
}

fn trace_product(theta: &Matrix2xX<f64>, u: &MatrixXx2<f64>) -> f64 {
    debug_assert_eq!(theta.ncols(), u.nrows());
    let mut acc = 0.0;
    for (n, col) in theta.column_iter().enumerate() {
        acc += col[0] * u[(n, 0)] + col[1] * u[(n, 1)];
    }
    acc
}
