//! PSK symbol alphabets and hard angular detection.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A uniformly spaced `order`-PSK alphabet rotated by `offset` radians.
///
/// Symbol `i` sits at phase `2*pi*i/order + offset`. Each decision region is
/// the angular sector of half-width `half_angle = pi/order` centred on its
/// symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct PskConstellation {
    order: usize,
    half_angle: f64,
    offset: f64,
    symbols: Vec<Complex64>,
}

impl PskConstellation {
    /// Builds the alphabet with the default rotation: `pi/order` for even
    /// orders from 4 up, `0` for BPSK (symbols `+1`, `-1`) and odd orders.
    pub fn new(order: usize) -> Result<Self> {
        let offset = if order.is_multiple_of(2) && order >= 4 {
            PI / order as f64
        } else {
            0.0
        };
        Self::with_offset(order, offset)
    }

    pub fn with_offset(order: usize, offset: f64) -> Result<Self> {
        if order < 2 {
            return Err(invalid(format!("PSK order must be >= 2, got {order}")));
        }
        if !offset.is_finite() {
            return Err(invalid("constellation offset must be finite"));
        }
        let symbols = (0..order)
            .map(|i| Complex64::from_polar(1.0, Self::phase_of(order, offset, i)))
            .collect();
        Ok(Self {
            order,
            half_angle: PI / order as f64,
            offset,
            symbols,
        })
    }

    fn phase_of(order: usize, offset: f64, i: usize) -> f64 {
        2.0 * PI * i as f64 / order as f64 + offset
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Half-width of a decision sector, `pi / order`.
    pub fn half_angle(&self) -> f64 {
        self.half_angle
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }

    pub fn symbol(&self, index: usize) -> Complex64 {
        self.symbols[index]
    }

    /// Phase of symbol `index` in radians.
    pub fn symbol_phase(&self, index: usize) -> f64 {
        Self::phase_of(self.order, self.offset, index)
    }

    /// Hard decision: index of the sector containing `z`.
    ///
    /// A sample exactly on a sector boundary resolves to the smaller of the
    /// two adjacent indices. `z = 0` has no phase and maps to index 0.
    pub fn detect(&self, z: Complex64) -> usize {
        if z.re == 0.0 && z.im == 0.0 {
            return 0;
        }
        let order = self.order as f64;
        // Sector coordinate: symbol i sits at u = i, boundaries at i + 1/2.
        let u = ((z.arg() - self.offset) / (2.0 * self.half_angle)).rem_euclid(order);
        let lower = u.floor();
        let frac = u - lower;
        let lower = lower as usize % self.order;
        let upper = (lower + 1) % self.order;
        if frac < 0.5 {
            lower
        } else if frac > 0.5 {
            upper
        } else {
            lower.min(upper)
        }
    }

    /// Draws `k` i.i.d. uniform symbol indices.
    pub fn random_symbols<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<SymbolVector> {
        if k == 0 {
            return Err(invalid("symbol vector needs at least one user"));
        }
        let indices = (0..k).map(|_| rng.random_range(0..self.order)).collect();
        Ok(SymbolVector(indices))
    }
}

/// Per-user symbol indices into a [`PskConstellation`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolVector(Vec<usize>);

impl SymbolVector {
    /// Wraps explicit indices, checking each against `constellation`.
    pub fn new(indices: Vec<usize>, constellation: &PskConstellation) -> Result<Self> {
        if indices.is_empty() {
            return Err(invalid("symbol vector needs at least one user"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= constellation.order()) {
            return Err(invalid(format!(
                "symbol index {bad} out of range for {}-PSK",
                constellation.order()
            )));
        }
        Ok(Self(indices))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    /// Complex symbols `s_k` for every user.
    pub fn points(&self, constellation: &PskConstellation) -> Vec<Complex64> {
        self.0.iter().map(|&i| constellation.symbol(i)).collect()
    }
}
