//! Asymptotic secret key rates for practical QKD protocols with arbitrary
//! encodings.
//!
//! Source and encoding imperfections are summarized by a *bias angle* between
//! measurement bases. The bias angle fixes a correction factor `M` that turns
//! measured error rates into the constraint values fed to a numerical
//! lower bound on `H(Z_A|E)`, obtained by minimizing `D(ρ‖Z(ρ))` over all
//! states compatible with the observed statistics.
//!
//! Module map:
//! - [`linalg`]: Hermitian operators, density matrices, key maps, fidelity, entropies.
//! - [`bias`]: bias angles from state overlaps, the `M` factor, modified error rates.
//! - [`modes`]: HG/LG/rotated-HG mode algebra for the high-dimensional RFI protocol.
//! - [`decoy`]: fiber and twin-field channel models, decoy bounds, GLLP phase error.
//! - [`optimizer`]: certified relative-entropy minimization.
//! - [`protocols`]: constraint sets and key-rate formulas for the worked protocols.
//! - [`scan`]: distance sweeps producing key-rate curves.
//! - [`config`]: presets and run configuration.
//! - [`io`]: constraint/key-map text files and CSV rows.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bias;
pub mod config;
pub mod decoy;
mod error;
pub mod io;
pub mod linalg;
pub mod modes;
pub mod optimizer;
pub mod protocols;
pub mod scan;

pub use error::{Error, Result};
pub use linalg::{
    entropy_h_d, fidelity, matrix_log_clipped, pinch, CMatrix, CVector, DensityMatrix, HermitianOperator, KeyMap,
};
pub use optimizer::{Constraint, OptimizerOptions, OptimizerResult, SolveStatus};
pub use scan::{KeyRateCurve, KeyRatePoint, Method, PointStatus};
