//! Minimum-power symbol-level precoding for a RIS-based passive PSK
//! transmitter.
//!
//! Given channels, per-user symbols and per-user union-bound SEP targets,
//! [`solver::bisect`] finds the smallest generator power for which some RIS
//! phase configuration meets every target. Feasibility at a fixed power is
//! decided by a Riemannian conjugate-gradient solve over the oblique
//! manifold ([`rcg`], [`manifold`]) on a log-sum-exp smoothing of the worst
//! per-user constraint ([`objective`]). [`simulate`] checks solutions by
//! Monte Carlo and drives power-versus-target sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod check;
pub mod cli;
pub mod constellation;
pub mod error;
pub mod geometry;
pub mod manifold;
pub mod objective;
pub mod rcg;
pub mod simulate;
pub mod solver;
pub mod special;

pub use channel::{ChannelSet, RotatedChannels};
pub use constellation::{PskConstellation, SymbolVector};
pub use error::{Error, Result};
pub use geometry::{DirectionMatrices, MddtPair, PhasePoint};
pub use objective::{CostFunction, FeasibilityProblem, InitObjective};
pub use rcg::{RcgConfig, RcgReport};
pub use solver::{bisect, BisectionConfig, Instance, SolveResult};
