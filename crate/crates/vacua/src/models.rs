//! The three cavity-QED model Hamiltonians and the system + ancilla
//! Hamiltonian.
//!
//! With `X = a† + a` and collective spin operators on the symmetric sector:
//!
//! * Dicke: `H = ω_c a†a + ω_0 J_z + (λ/√N) X (J₊ + J₋)`
//! * Tavis-Cummings: `H = ω_c a†a + ω_0 J_z + (λ/√N)(a† J₋ + a J₊)`
//! * Hopfield: `H_Dicke + D X²` with `D = λ²/ω_0` unless overridden
//!
//! and the ancilla probe enters as `H_{S+M} = H_S + (ω_M/2) σ_z + g_M X σ_x`.

use crate::hilbert::{self, OperatorMatrix, Pauli, SpaceSpec, Spin};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Which cavity model to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Dicke,
    TavisCummings,
    Hopfield,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Dicke => "dicke",
            ModelKind::TavisCummings => "tavis_cummings",
            ModelKind::Hopfield => "hopfield",
        }
    }
}

/// Physical parameters of the cavity system `S`. All frequencies in units of
/// `ω_c`; `omega_c` is kept explicit so the unit convention is visible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default = "one")]
    pub omega_c: f64,
    #[serde(default = "one")]
    pub omega_0: f64,
    pub lambda: f64,
    #[serde(rename = "N")]
    pub n_atoms: usize,
    /// Boson-renormalization strength `D`. Defaults to `λ²/ω_0` for
    /// Hopfield and to `0` otherwise; the override exists for the Bogoliubov
    /// oracle and the `Hopfield(D=0) == Dicke` identity.
    #[serde(rename = "D_override", default)]
    pub d_override: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn new(kind: ModelKind, lambda: f64, n_atoms: usize) -> Self {
        Self { kind, omega_c: 1.0, omega_0: 1.0, lambda, n_atoms, d_override: None }
    }

    /// Effective quadratic-term strength actually used in the Hamiltonian.
    pub fn effective_d(&self) -> f64 {
        match self.d_override {
            Some(d) => d,
            None => match self.kind {
                ModelKind::Hopfield => self.lambda * self.lambda / self.omega_0,
                _ => 0.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_c > 0.0) {
            return Err(Error::InvalidSpec { what: "ModelSpec", why: format!("omega_c must be > 0, got {}", self.omega_c) });
        }
        if !(self.omega_0 > 0.0) {
            return Err(Error::InvalidSpec { what: "ModelSpec", why: format!("omega_0 must be > 0, got {}", self.omega_0) });
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidSpec { what: "ModelSpec", why: format!("lambda must be >= 0, got {}", self.lambda) });
        }
        if self.n_atoms < 1 {
            return Err(Error::InvalidSpec { what: "ModelSpec", why: "N must be >= 1".into() });
        }
        if let Some(d) = self.d_override {
            if !(d >= 0.0) {
                return Err(Error::InvalidSpec { what: "ModelSpec", why: format!("D_override must be >= 0, got {d}") });
            }
        }
        Ok(())
    }

    /// Space of the given truncation for this model.
    pub fn space(&self, n_max: usize, include_ancilla: bool) -> Result<SpaceSpec> {
        SpaceSpec::new(n_max, self.n_atoms, include_ancilla)
    }
}

/// Ancilla (measurement qubit) parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AncillaSpec {
    #[serde(rename = "omega_M")]
    pub omega_m: f64,
    #[serde(rename = "g_M")]
    pub g_m: f64,
}

impl AncillaSpec {
    pub fn new(omega_m: f64, g_m: f64) -> Self {
        Self { omega_m, g_m }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_m > 0.0) {
            return Err(Error::InvalidSpec { what: "AncillaSpec", why: format!("omega_M must be > 0, got {}", self.omega_m) });
        }
        if !(self.g_m >= 0.0) {
            return Err(Error::InvalidSpec { what: "AncillaSpec", why: format!("g_M must be >= 0, got {}", self.g_m) });
        }
        Ok(())
    }
}

/// Build the system Hamiltonian `H_S` on `space` (which may include the
/// ancilla factor; system terms act as identity on it).
pub fn build_system_hamiltonian(model: &ModelSpec, space: &SpaceSpec) -> Result<OperatorMatrix> {
    model.validate()?;
    if space.n_atoms != model.n_atoms {
        return Err(Error::DimensionMismatch { left: space.n_atoms, right: model.n_atoms });
    }
    let a = hilbert::boson_annihilator(space).entries;
    let x = &a + &a.t();
    let jz = hilbert::collective_spin(space, Spin::Jz).entries;
    let jp = hilbert::collective_spin(space, Spin::Jplus).entries;
    let jm = hilbert::collective_spin(space, Spin::Jminus).entries;
    let g = model.lambda / (model.n_atoms as f64).sqrt();

    let mut h = a.t().dot(&a) * model.omega_c + &jz * model.omega_0;
    match model.kind {
        ModelKind::Dicke | ModelKind::Hopfield => {
            h = h + x.dot(&(&jp + &jm)) * g;
        }
        ModelKind::TavisCummings => {
            h = h + (a.t().dot(&jm) + a.dot(&jp)) * g;
        }
    }
    let d = model.effective_d();
    if d != 0.0 {
        h = h + x.dot(&x) * d;
    }
    Ok(OperatorMatrix::new(h, format!("H_{}", model.kind.name())))
}

/// Build the full Hamiltonian `H_{S+M} = H_S + (ω_M/2) σ_z + g_M X σ_x`.
pub fn build_full_hamiltonian(
    model: &ModelSpec,
    ancilla: &AncillaSpec,
    space: &SpaceSpec,
) -> Result<OperatorMatrix> {
    ancilla.validate()?;
    if !space.include_ancilla {
        return Err(Error::MissingAncilla { op: "build_full_hamiltonian" });
    }
    let h_s = build_system_hamiltonian(model, space)?;
    let a = hilbert::boson_annihilator(space).entries;
    let x = &a + &a.t();
    let sz = hilbert::ancilla_pauli(space, Pauli::Z)?.entries;
    let sx = hilbert::ancilla_pauli(space, Pauli::X)?.entries;
    let h = h_s.entries + &sz * (ancilla.omega_m / 2.0) + x.dot(&sx) * ancilla.g_m;
    Ok(OperatorMatrix::new(h, format!("H_{}+M", model.kind.name())))
}

/// Largest element magnitude of the commutator `HS - SH`.
pub fn check_symmetry(h: &OperatorMatrix, s: &OperatorMatrix) -> Result<f64> {
    if h.dim != s.dim {
        return Err(Error::DimensionMismatch { left: h.dim, right: s.dim });
    }
    let c = h.entries.dot(&s.entries) - s.entries.dot(&h.entries);
    Ok(c.iter().fold(0.0f64, |m, x| m.max(x.abs())))
}

/// Commutator defect of the system Hamiltonian with its conserved charge:
/// the parity `(-1)^(a†a + J_z + j)` for the Dicke and Hopfield models, the
/// excitation number `a†a + J_z + j` for Tavis-Cummings. Zero (to roundoff)
/// certifies the interaction structure; returned as `‖[H, Q]‖_∞`.
pub fn conserved_charge_defect(model: &ModelSpec, space: &SpaceSpec) -> Result<f64> {
    let h = build_system_hamiltonian(model, space)?;
    let q = match model.kind {
        ModelKind::Dicke | ModelKind::Hopfield => hilbert::parity_operator(space),
        ModelKind::TavisCummings => hilbert::excitation_number(space),
    };
    check_symmetry(&h, &q)
}
