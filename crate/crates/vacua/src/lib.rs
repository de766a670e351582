//! Ground-state ("vacuum") spectroscopy of ultrastrongly coupled cavity-QED
//! models.
//!
//! The crate simulates a driven, dissipative ancilla qubit weakly coupled to
//! a cavity system whose ground state becomes nontrivial at ultrastrong
//! light-matter coupling — photon-populated, squeezed, or nearly degenerate.
//! Three collective models are implemented on a truncated boson ⊗ collective
//! spin ⊗ ancilla Hilbert space:
//!
//! * **Dicke** — `ω_c a†a + ω_0 J_z + (λ/√N)(a† + a)(J₊ + J₋)`, with a ℤ₂
//!   parity symmetry and a superradiant transition;
//! * **Tavis-Cummings** — the rotating-wave version
//!   `ω_c a†a + ω_0 J_z + (λ/√N)(a† J₋ + a J₊)`, with a conserved excitation
//!   number and step-like ground-state changes;
//! * **Hopfield** — Dicke plus a quadratic boson term `D (a† + a)²`
//!   (`D = λ²/ω_0` by default), squeezed vacuum, no transition.
//!
//! The ancilla qubit `M` (frequency `ω_M`, coupling `g_M`) probes the vacuum
//! nondestructively: its transition acquires a vacuum-dependent Lamb shift,
//! computed exactly by diagonalization ([`spectra`]) and analytically to
//! second order in `g_M`. Dissipation at zero temperature uses jump
//! operators dressed by the interacting eigenbasis ([`dynamics`]), which
//! keeps the true ground state dark where a naive bare-operator treatment
//! would heat it. Driven steady states yield the ancilla spectroscopy signal
//! `n_up(ω_p)` and the measurement fidelity. [`sweep`] orchestrates the
//! parameter scans and persists CSV/JSON; the `vacua` binary exposes them.
//!
//! Units: all frequencies and rates are dimensionless multiples of the
//! cavity frequency `ω_c`, and `ħ = 1`.

pub mod dynamics;
pub mod hilbert;
pub mod linalg;
pub mod models;
pub mod spectra;
pub mod sweep;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
    #[error("space has no ancilla factor, required by {op}")]
    MissingAncilla { op: &'static str },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("invalid {what}: {why}")]
    InvalidSpec { what: &'static str, why: String },
    #[error("analytic shift has a pole at omega_M = omega_c (got omega_M = {omega_m})")]
    AnalyticPole { omega_m: f64 },
    #[error("steady state did not converge: residual {residual:e} after {steps} steps")]
    NonConvergence { residual: f64, steps: usize },
    #[error("no interior maximum in scan data")]
    NoInteriorPeak,
    #[error("scan grid does not bracket the half-maximum on both sides of the peak")]
    HalfMaxNotBracketed,
    #[error("truncation not converged up to n_max = {max_tried}")]
    TruncationNotConverged { max_tried: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
