//! Truncated Hilbert spaces and elementary operators.
//!
//! The composite space is boson ⊗ collective spin ⊗ ancilla with row-major
//! tensor ordering: basis index `(n, s, q)` maps to
//! `(n * (N+1) + s) * 2 + q` when the ancilla is present. The boson factor
//! keeps Fock levels `0..=n_max`; the `N` atoms are restricted to the
//! symmetric (maximal-spin, `j = N/2`) sector of dimension `N+1`, which every
//! collective operator used here preserves; the ancilla basis is
//! `index 0 = |↓⟩` (ground), `index 1 = |↑⟩`, so `σ_z = diag(-1, +1)`.
//!
//! All operators are real in this basis, and every Hamiltonian assembled from
//! them is real symmetric.

use crate::{Error, Result};
use ndarray::{linalg::kron, Array2};
use serde::{Deserialize, Serialize};

/// Truncated composite Hilbert space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    /// Highest boson Fock level retained (levels `0..=n_max`).
    pub n_max: usize,
    /// Number of two-level atoms `N`; the spin factor has dimension `N+1`.
    #[serde(rename = "N")]
    pub n_atoms: usize,
    /// Whether the two-level ancilla factor is included.
    pub include_ancilla: bool,
}

impl SpaceSpec {
    pub fn new(n_max: usize, n_atoms: usize, include_ancilla: bool) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidSpec { what: "SpaceSpec", why: format!("n_max must be >= 1, got {n_max}") });
        }
        if n_atoms < 1 {
            return Err(Error::InvalidSpec { what: "SpaceSpec", why: format!("N must be >= 1, got {n_atoms}") });
        }
        Ok(Self { n_max, n_atoms, include_ancilla })
    }

    pub fn boson_dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn spin_dim(&self) -> usize {
        self.n_atoms + 1
    }

    pub fn ancilla_dim(&self) -> usize {
        if self.include_ancilla { 2 } else { 1 }
    }

    /// Total dimension `(n_max+1) × (N+1) × (2 if ancilla else 1)`.
    pub fn dim(&self) -> usize {
        self.boson_dim() * self.spin_dim() * self.ancilla_dim()
    }

    /// The same space without the ancilla factor.
    pub fn system_only(&self) -> SpaceSpec {
        SpaceSpec { include_ancilla: false, ..*self }
    }
}

/// Dense operator on a composite space. Real-valued: every operator this
/// crate builds is real in the chosen basis (complex structure only enters
/// through density matrices in [`crate::dynamics`]).
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub dim: usize,
    pub entries: Array2<f64>,
    pub label: String,
}

impl OperatorMatrix {
    pub fn new(entries: Array2<f64>, label: impl Into<String>) -> Self {
        let (rows, cols) = entries.dim();
        assert_eq!(rows, cols, "operator matrices are square");
        Self { dim: rows, entries, label: label.into() }
    }

    /// Largest element magnitude of `M - Mᵀ` (Hermiticity defect for the
    /// real operators used here).
    pub fn hermiticity_defect(&self) -> f64 {
        crate::linalg::symmetry_defect(&self.entries)
    }
}

/// Collective spin component selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spin {
    Jz,
    Jplus,
    Jminus,
    Jx,
}

/// Ancilla Pauli selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Z,
    Plus,
    Minus,
}

fn identity(dim: usize) -> Array2<f64> {
    Array2::eye(dim)
}

/// Raw boson annihilator on the Fock factor alone: `⟨n-1|a|n⟩ = √n`.
fn boson_factor(n_max: usize) -> Array2<f64> {
    let d = n_max + 1;
    let mut a = Array2::zeros((d, d));
    for n in 1..=n_max {
        a[[n - 1, n]] = (n as f64).sqrt();
    }
    a
}

/// Raw collective spin operator on the spin factor alone, in the `j = N/2`
/// sector with basis `|j, m⟩`, `m = -j..j` ascending (`s = m + j`).
fn spin_factor(n_atoms: usize, which: Spin) -> Array2<f64> {
    let d = n_atoms + 1;
    let j = n_atoms as f64 / 2.0;
    let mut m_op = Array2::zeros((d, d));
    match which {
        Spin::Jz => {
            for s in 0..d {
                m_op[[s, s]] = s as f64 - j;
            }
        }
        Spin::Jplus | Spin::Jminus | Spin::Jx => {
            let mut jp = Array2::zeros((d, d));
            for s in 0..d - 1 {
                let m = s as f64 - j;
                jp[[s + 1, s]] = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
            }
            m_op = match which {
                Spin::Jplus => jp,
                Spin::Jminus => jp.t().to_owned(),
                Spin::Jx => (&jp + &jp.t()) * 0.5,
                Spin::Jz => unreachable!(),
            };
        }
    }
    m_op
}

fn pauli_factor(which: Pauli) -> Array2<f64> {
    let mut p = Array2::zeros((2, 2));
    match which {
        Pauli::X => {
            p[[0, 1]] = 1.0;
            p[[1, 0]] = 1.0;
        }
        Pauli::Z => {
            p[[0, 0]] = -1.0;
            p[[1, 1]] = 1.0;
        }
        Pauli::Plus => p[[1, 0]] = 1.0,
        Pauli::Minus => p[[0, 1]] = 1.0,
    }
    p
}

/// Embed per-factor matrices into the composite space (identity where `None`).
fn embed(
    space: &SpaceSpec,
    boson: Option<&Array2<f64>>,
    spin: Option<&Array2<f64>>,
    ancilla: Option<&Array2<f64>>,
) -> Array2<f64> {
    let eye_b = identity(space.boson_dim());
    let eye_s = identity(space.spin_dim());
    let bs = kron(boson.unwrap_or(&eye_b), spin.unwrap_or(&eye_s));
    if space.include_ancilla {
        let eye_a = identity(2);
        kron(&bs, ancilla.unwrap_or(&eye_a))
    } else {
        bs
    }
}

/// Boson annihilation operator `a` embedded in the composite space.
pub fn boson_annihilator(space: &SpaceSpec) -> OperatorMatrix {
    let a = boson_factor(space.n_max);
    OperatorMatrix::new(embed(space, Some(&a), None, None), "a")
}

/// Collective spin operator embedded in the composite space.
pub fn collective_spin(space: &SpaceSpec, which: Spin) -> OperatorMatrix {
    let m = spin_factor(space.n_atoms, which);
    let label = match which {
        Spin::Jz => "Jz",
        Spin::Jplus => "J+",
        Spin::Jminus => "J-",
        Spin::Jx => "Jx",
    };
    OperatorMatrix::new(embed(space, None, Some(&m), None), label)
}

/// Ancilla Pauli operator embedded in the composite space.
pub fn ancilla_pauli(space: &SpaceSpec, which: Pauli) -> Result<OperatorMatrix> {
    if !space.include_ancilla {
        return Err(Error::MissingAncilla { op: "ancilla_pauli" });
    }
    let p = pauli_factor(which);
    let label = match which {
        Pauli::X => "sigma_x",
        Pauli::Z => "sigma_z",
        Pauli::Plus => "sigma_+",
        Pauli::Minus => "sigma_-",
    };
    Ok(OperatorMatrix::new(embed(space, None, Some(&identity(space.spin_dim())), Some(&p)), label))
}

/// Parity operator `exp(iπ(a†a + J_z + N/2 [+ (σ_z+1)/2]))`: diagonal with
/// entries `(-1)^(n + s [+ q])`.
pub fn parity_operator(space: &SpaceSpec) -> OperatorMatrix {
    let dim = space.dim();
    let mut p = Array2::zeros((dim, dim));
    let sd = space.spin_dim();
    let ad = space.ancilla_dim();
    for n in 0..space.boson_dim() {
        for s in 0..sd {
            for q in 0..ad {
                let idx = (n * sd + s) * ad + q;
                p[[idx, idx]] = if (n + s + q) % 2 == 0 { 1.0 } else { -1.0 };
            }
        }
    }
    OperatorMatrix::new(p, "parity")
}

/// System excitation number `a†a + J_z + N/2` (identity on the ancilla):
/// diagonal with entries `n + s`.
pub fn excitation_number(space: &SpaceSpec) -> OperatorMatrix {
    let dim = space.dim();
    let mut c = Array2::zeros((dim, dim));
    let sd = space.spin_dim();
    let ad = space.ancilla_dim();
    for n in 0..space.boson_dim() {
        for s in 0..sd {
            for q in 0..ad {
                let idx = (n * sd + s) * ad + q;
                c[[idx, idx]] = (n + s) as f64;
            }
        }
    }
    OperatorMatrix::new(c, "excitation_number")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn commutator(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
        a.dot(b) - b.dot(a)
    }

    fn max_abs(m: &Array2<f64>) -> f64 {
        m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
    }

    #[test]
    fn boson_factor_single_excitation() {
        let a = boson_factor(1);
        assert_eq!(a.dim(), (2, 2));
        assert_abs_diff_eq!(a[[0, 1]], 1.0, epsilon = 1e-15);
        assert_eq!(a.iter().filter(|x| **x != 0.0).count(), 1);
    }

    #[test]
    fn boson_factor_sqrt_two() {
        let a = boson_factor(2);
        assert_abs_diff_eq!(a[[1, 2]], std::f64::consts::SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn number_operator_eigenvalues() {
        let space = SpaceSpec::new(5, 1, false).unwrap();
        let a = boson_annihilator(&space);
        let n_op = a.entries.t().dot(&a.entries);
        // diagonal in the Fock basis with eigenvalue n on |n, s⟩
        let sd = space.spin_dim();
        for n in 0..=5 {
            for s in 0..sd {
                let idx = n * sd + s;
                assert_abs_diff_eq!(n_op[[idx, idx]], n as f64, epsilon = 1e-14);
            }
        }
        assert_abs_diff_eq!(max_abs(&(&n_op - &Array2::from_diag(&n_op.diag().to_owned()))), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn boson_commutator_defect_only_at_cutoff() {
        let n_max = 4;
        let a = boson_factor(n_max);
        let c = commutator(&a, &a.t().to_owned());
        for i in 0..=n_max {
            for j in 0..=n_max {
                let expect = if i == j {
                    if i == n_max { -(n_max as f64) } else { 1.0 }
                } else {
                    0.0
                };
                assert_abs_diff_eq!(c[[i, j]], expect, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn spin_half_matrices() {
        let jz = spin_factor(1, Spin::Jz);
        assert_abs_diff_eq!(jz[[0, 0]], -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(jz[[1, 1]], 0.5, epsilon = 1e-15);
        let jp = spin_factor(1, Spin::Jplus);
        assert_abs_diff_eq!(jp[[1, 0]], 1.0, epsilon = 1e-15);
        assert_eq!(jp.iter().filter(|x| **x != 0.0).count(), 1);
    }

    #[test]
    fn ladder_matrix_element_n3() {
        // N=3: from the lowest state m = -3/2, ⟨J₊⟩ = √(j(j+1) - m(m+1)) = √3
        let jp = spin_factor(3, Spin::Jplus);
        assert_abs_diff_eq!(jp[[1, 0]], 3.0f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn su2_commutators() {
        for n_atoms in [1usize, 2, 3, 5] {
            let jp = spin_factor(n_atoms, Spin::Jplus);
            let jm = spin_factor(n_atoms, Spin::Jminus);
            let jz = spin_factor(n_atoms, Spin::Jz);
            let c1 = commutator(&jp, &jm) - &jz * 2.0;
            assert!(max_abs(&c1) < 1e-12, "[J+, J-] = 2Jz failed for N = {n_atoms}");
            let c2 = commutator(&jz, &jp) - &jp;
            assert!(max_abs(&c2) < 1e-12, "[Jz, J+] = J+ failed for N = {n_atoms}");
            let c3 = commutator(&jz, &jm) + &jm;
            assert!(max_abs(&c3) < 1e-12, "[Jz, J-] = -J- failed for N = {n_atoms}");
        }
    }

    #[test]
    fn pauli_properties() {
        let space = SpaceSpec::new(2, 2, true).unwrap();
        let sx = ancilla_pauli(&space, Pauli::X).unwrap();
        let sz = ancilla_pauli(&space, Pauli::Z).unwrap();
        let sp = ancilla_pauli(&space, Pauli::Plus).unwrap();
        let sm = ancilla_pauli(&space, Pauli::Minus).unwrap();
        let dim = space.dim();
        // σ_x² = 1
        assert!(max_abs(&(sx.entries.dot(&sx.entries) - identity(dim))) < 1e-14);
        // σ_z eigenvalues ±1 with equal multiplicity (diagonal here)
        let plus = sz.entries.diag().iter().filter(|x| **x == 1.0).count();
        let minus = sz.entries.diag().iter().filter(|x| **x == -1.0).count();
        assert_eq!(plus, dim / 2);
        assert_eq!(minus, dim / 2);
        // σ₊ maps |↓⟩ → |↑⟩ only: σ₊ = (σ_x + iσ_y)/2 has a single 2×2-factor
        // entry at (1, 0); σ₋ is its transpose
        assert!(max_abs(&(&sp.entries - &sm.entries.t())) < 1e-15);
        assert!(max_abs(&(&sp.entries + &sm.entries - &sx.entries)) < 1e-15);
        // σ₊ annihilates ancilla-up states: σ₊² = 0
        assert!(max_abs(&sp.entries.dot(&sp.entries)) < 1e-15);
    }

    #[test]
    fn ancilla_requires_flag() {
        let space = SpaceSpec::new(2, 1, false).unwrap();
        assert!(matches!(ancilla_pauli(&space, Pauli::X), Err(Error::MissingAncilla { .. })));
    }

    #[test]
    fn parity_basics() {
        let space = SpaceSpec::new(3, 2, true).unwrap();
        let p = parity_operator(&space);
        // vacuum ⊗ all-down ⊗ ancilla-down is index 0: parity +1
        assert_abs_diff_eq!(p.entries[[0, 0]], 1.0, epsilon = 1e-15);
        // one photon added flips sign: index of (n=1, s=0, q=0)
        let idx = space.spin_dim() * space.ancilla_dim();
        assert_abs_diff_eq!(p.entries[[idx, idx]], -1.0, epsilon = 1e-15);
        // Π² = 1
        assert!(max_abs(&(p.entries.dot(&p.entries) - identity(space.dim()))) < 1e-15);
    }

    #[test]
    fn excitation_number_spectrum() {
        let space = SpaceSpec::new(3, 2, true).unwrap();
        let c = excitation_number(&space);
        // vacuum ⊗ all-down → 0; |n=1⟩ ⊗ all-down → 1
        assert_abs_diff_eq!(c.entries[[0, 0]], 0.0, epsilon = 1e-15);
        let idx = space.spin_dim() * space.ancilla_dim();
        assert_abs_diff_eq!(c.entries[[idx, idx]], 1.0, epsilon = 1e-15);
        // non-negative integer spectrum; ancilla excluded (adjacent q share values)
        for (i, x) in c.entries.diag().iter().enumerate() {
            assert!(*x >= 0.0 && (x - x.round()).abs() < 1e-15, "entry {i} = {x}");
        }
    }

    #[test]
    fn embedded_factors_commute() {
        let space = SpaceSpec::new(3, 2, true).unwrap();
        let a = boson_annihilator(&space);
        let jx = collective_spin(&space, Spin::Jx);
        let sx = ancilla_pauli(&space, Pauli::X).unwrap();
        assert!(max_abs(&commutator(&a.entries, &jx.entries)) < 1e-14);
        assert!(max_abs(&commutator(&a.entries, &sx.entries)) < 1e-14);
        assert!(max_abs(&commutator(&jx.entries, &sx.entries)) < 1e-14);
    }

    #[test]
    fn dimensions() {
        let space = SpaceSpec::new(16, 3, true).unwrap();
        assert_eq!(space.dim(), 17 * 4 * 2);
        assert_eq!(space.system_only().dim(), 17 * 4);
        assert!(SpaceSpec::new(0, 3, true).is_err());
        assert!(SpaceSpec::new(4, 0, true).is_err());
    }
}
