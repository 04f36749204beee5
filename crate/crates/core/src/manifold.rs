//! Oblique manifold of `2 x N` matrices with unit-norm columns.
//!
//! Uses the embedded Frobenius metric, column-normalization retraction and
//! projection-based vector transport.

use nalgebra::Matrix2xX;

use crate::error::{Error, Result};
use crate::geometry::PhasePoint;

/// Tangent vector at some base point (columnwise orthogonal to it).
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector(pub Matrix2xX<f64>);

impl TangentVector {
    pub fn zeros(n: usize) -> Self {
        Self(Matrix2xX::zeros(n))
    }

    pub fn matrix(&self) -> &Matrix2xX<f64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(&self.0 * factor)
    }

    /// Largest `|<Theta_n, xi_n>|` over columns.
    pub fn max_radial_component(&self, base: &PhasePoint) -> f64 {
        base.matrix()
            .column_iter()
            .zip(self.0.column_iter())
            .map(|(t, x)| t.dot(&x).abs())
            .fold(0.0, f64::max)
    }
}

/// Frobenius inner product.
pub fn inner(a: &TangentVector, b: &TangentVector) -> f64 {
    a.0.dot(&b.0)
}

/// Removes the radial part of each column: `G_n - <Theta_n, G_n> Theta_n`.
pub fn project_tangent(base: &PhasePoint, ambient: &Matrix2xX<f64>) -> TangentVector {
    let mut xi = ambient.clone();
    for (t, mut g) in base.matrix().column_iter().zip(xi.column_iter_mut()) {
        let radial = t.dot(&g);
        g -= t * radial;
    }
    TangentVector(xi)
}

/// `(Theta_n + t xi_n) / ||Theta_n + t xi_n||` per column.
pub fn retract(base: &PhasePoint, xi: &TangentVector, step: f64) -> Result<PhasePoint> {
    let mut moved = base.matrix() + &xi.0 * step;
    for (column, mut col) in moved.column_iter_mut().enumerate() {
        let norm = col.norm();
        if !(norm > 1e-300 && norm.is_finite()) {
            return Err(Error::DegenerateStep { column });
        }
        col /= norm;
    }
    Ok(PhasePoint::from_matrix_unchecked(moved))
}

/// Moves `xi` into the tangent space at `new_base` by projection.
pub fn transport(new_base: &PhasePoint, xi: &TangentVector) -> TangentVector {
    project_tangent(new_base, &xi.0)
}
