//! Open-system dynamics of the probed vacuum.
//!
//! In the ultrastrong-coupling regime a Lindblad equation written with the
//! *bare* lowering operators `a`, `J_-`, `σ_-` pumps excitations out of its
//! own reservoirs even at zero temperature, because those operators connect
//! the true (dressed) ground state to excited eigenstates. The cure is to
//! build jump operators in the eigenbasis of the full Hamiltonian, keeping
//! only energy-decreasing matrix elements of the physical coupling operators
//! `X = a + a†`, `J_x`, `σ_x^(M)`:
//!
//! ```text
//! 𝒰[A] = Σ_{l,l'} Θ(ε_{l'} - ε_l) ⟨l|A|l'⟩ |l⟩⟨l'| ,
//! ρ̇ = -i[H(t), ρ] + Σ_i (γ_i/2) ( 2 U_i ρ U_i† - U_i†U_i ρ - ρ U_i†U_i ) ,
//! ```
//!
//! with a coherent ancilla drive `Ω_p cos(ω_p t) σ_x^(M)` inside `H(t)`.
//! Both mistreatments are available behind [`DissipationMode`] so the
//! zero-temperature instability of the bare choice can be demonstrated.
//!
//! Two steady-state engines are provided: direct fixed-step 4th-order
//! time integration with period-averaged convergence ([`propagate`]), and a
//! harmonic-balance solver ([`FloquetSolver`]) that expands
//! `ρ(t) = Σ_n ρ_n e^{-inω_p t}` to two harmonics and solves the coupled
//! linear system — equivalent at weak drive and much faster per grid point.

use crate::hilbert::{self, OperatorMatrix, Pauli, SpaceSpec, Spin};
use crate::linalg::{self, ZLu};
use crate::models::{self, AncillaSpec, ModelSpec};
use crate::spectra::{self, EigenDecomposition};
use crate::{Error, Result};
use ndarray::linalg::kron;
use ndarray::{Array1, Array2, Zip};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default eigenbasis truncation for the dissipative generator.
pub const DEFAULT_K_LEVELS: usize = 24;
/// Default tolerance below which a level splitting counts as degenerate and
/// is excluded from jump operators.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-9;

/// Which operators feed the dissipators.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissipationMode {
    /// Energy-decreasing parts of `a+a†`, `J_x`, `σ_x^(M)` in the dressed
    /// eigenbasis — the physically consistent zero-temperature choice.
    #[default]
    Dressed,
    /// Bare lowering operators `a`, `J_-`, `σ_-^(M)` — diagnostics only;
    /// excites the system out of its own ground state once the coupling has
    /// reshaped the vacuum.
    Bare,
}

/// Reservoir coupling rates for the cavity, the atoms, and the ancilla.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissipationSpec {
    pub gamma_c: f64,
    pub gamma_0: f64,
    #[serde(rename = "gamma_M")]
    pub gamma_m: f64,
    #[serde(default)]
    pub mode: DissipationMode,
}

impl DissipationSpec {
    pub fn new(gamma_c: f64, gamma_0: f64, gamma_m: f64, mode: DissipationMode) -> Self {
        Self { gamma_c, gamma_0, gamma_m, mode }
    }

    /// All three channels at the same rate, dressed mode.
    pub fn uniform(gamma: f64) -> Self {
        Self::new(gamma, gamma, gamma, DissipationMode::Dressed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma_c < 0.0 || self.gamma_0 < 0.0 || self.gamma_m < 0.0 {
            return Err(Error::InvalidSpec {
                what: "dissipation",
                why: format!(
                    "rates must be non-negative, got ({}, {}, {})",
                    self.gamma_c, self.gamma_0, self.gamma_m
                ),
            });
        }
        Ok(())
    }
}

/// Coherent ancilla drive `Ω_p cos(ω_p t) σ_x^(M)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSpec {
    pub omega_p: f64,
    #[serde(rename = "Omega_p")]
    pub amplitude: f64,
}

impl DriveSpec {
    pub fn new(omega_p: f64, amplitude: f64) -> Self {
        Self { omega_p, amplitude }
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega_p <= 0.0 || self.amplitude < 0.0 {
            return Err(Error::InvalidSpec {
                what: "drive",
                why: format!("need omega_p > 0 and Omega_p >= 0, got ({}, {})", self.omega_p, self.amplitude),
            });
        }
        Ok(())
    }
}

/// Density matrix in the truncated eigenbasis of the full Hamiltonian.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub entries: Array2<Complex64>,
}

impl DensityMatrix {
    /// `|level⟩⟨level|` in a `dim`-level basis.
    pub fn pure(dim: usize, level: usize) -> Self {
        let mut entries = Array2::zeros((dim, dim));
        entries[[level, level]] = Complex64::new(1.0, 0.0);
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.diag().sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let mut defect = 0.0f64;
        for i in 0..self.dim() {
            for j in i..self.dim() {
                defect = defect.max((self.entries[[i, j]] - self.entries[[j, i]].conj()).norm());
            }
        }
        defect
    }

    /// `Re Tr(ρ O)` for a real observable `O` in the same basis.
    pub fn expectation_real(&self, op: &Array2<f64>) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += self.entries[[i, j]].re * op[[j, i]];
            }
        }
        acc
    }

    /// Eigenvalues of the Hermitian part, via the real symmetric embedding
    /// `[[R, -I], [I, R]]` (each eigenvalue appears twice).
    fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.dim();
        let mut e = Array2::<f64>::zeros((2 * n, 2 * n));
        for i in 0..n {
            for j in 0..n {
                let z = (self.entries[[i, j]] + self.entries[[j, i]].conj()) * 0.5;
                e[[i, j]] = z.re;
                e[[n + i, n + j]] = z.re;
                e[[i, n + j]] = -z.im;
                e[[n + i, j]] = z.im;
            }
        }
        let vals = linalg::eigvalsh(&e)?;
        // keep one copy of each doubled eigenvalue
        Ok(vals.iter().step_by(2).copied().collect())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let vals = self.hermitian_eigenvalues()?;
        Ok(vals.iter().copied().fold(f64::INFINITY, f64::min))
    }

    /// Trace distance `T(ρ,σ) = (1/2) Σ |eig(ρ-σ)|`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { left: self.dim(), right: other.dim() });
        }
        let diff = DensityMatrix { entries: &self.entries - &other.entries };
        let vals = diff.hermitian_eigenvalues()?;
        Ok(0.5 * vals.iter().map(|v| v.abs()).sum::<f64>())
    }

    /// Check Hermiticity (1e-10), unit trace (1e-8), and positivity
    /// (smallest eigenvalue ≥ −1e-8).
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_defect();
        if herm > 1e-10 {
            return Err(Error::InvalidSpec {
                what: "density_matrix",
                why: format!("hermiticity defect {herm:e}"),
            });
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
            return Err(Error::InvalidSpec {
                what: "density_matrix",
                why: format!("trace = {tr}"),
            });
        }
        let min = self.min_eigenvalue()?;
        if min < -1e-8 {
            return Err(Error::InvalidSpec {
                what: "density_matrix",
                why: format!("negative eigenvalue {min:e}"),
            });
        }
        Ok(())
    }
}

/// One point of a drive-frequency scan.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectroscopyPoint {
    pub omega_p: f64,
    /// Ancilla excited-state population `Tr[ρ (1+σ_z^(M))/2]`.
    pub n_up: f64,
    /// Measurement fidelity `⟨G_S| Tr_M ρ |G_S⟩`.
    pub fidelity_f: f64,
}

/// Energy-decreasing part of `A` in the eigenbasis of `eig`:
/// `𝒰[A] = Σ_{l,l'} Θ(ε_{l'} - ε_l) ⟨l|A|l'⟩ |l⟩⟨l'|`, with transitions
/// closer than `degeneracy_tol` excluded so that near-degenerate doublets do
/// not generate spurious intra-doublet jumps.
pub fn dressed_jump_operator(
    eig: &EigenDecomposition,
    a: &OperatorMatrix,
    degeneracy_tol: f64,
) -> Result<OperatorMatrix> {
    if a.dim != eig.dim() {
        return Err(Error::DimensionMismatch { left: a.dim, right: eig.dim() });
    }
    let ae = eig.states.t().dot(&a.entries).dot(&eig.states);
    Ok(OperatorMatrix::new(
        theta_filter(&ae, &eig.energies, degeneracy_tol),
        format!("U[{}]", a.label),
    ))
}

/// Apply the Θ filter entrywise: keep `[l, l']` only when
/// `ε_{l'} - ε_l > degeneracy_tol`.
fn theta_filter(ae: &Array2<f64>, energies: &Array1<f64>, degeneracy_tol: f64) -> Array2<f64> {
    let k = ae.nrows();
    let mut u = Array2::zeros((k, k));
    for l in 0..k {
        for lp in 0..k {
            if energies[lp] - energies[l] > degeneracy_tol {
                u[[l, lp]] = ae[[l, lp]];
            }
        }
    }
    u
}

/// Everything the steady-state engines need, in the truncated eigenbasis of
/// the full system+ancilla Hamiltonian.
#[derive(Debug, Clone)]
pub struct DressedFrame {
    pub k_levels: usize,
    /// Lowest `k_levels` absolute eigenenergies.
    pub energies: Array1<f64>,
    /// `(rate, jump operator)` pairs in the truncated eigenbasis.
    pub jumps: Vec<(f64, Array2<f64>)>,
    /// `σ_x^(M)` in the truncated eigenbasis (drive coupling).
    pub drive_op: Array2<f64>,
    /// `(1+σ_z^(M))/2` in the truncated eigenbasis.
    pub n_up_op: Array2<f64>,
    /// `|G_S⟩⊗|q⟩` projected into the truncated eigenbasis, `q = ↓, ↑`.
    pub ground_u: [Array1<f64>; 2],
    /// Excitation energy `ε_{l*} - ε_G` of the dominant spectroscopic level.
    pub resonance: f64,
    pub dominant_level: usize,
    pub dominant_weight: f64,
    /// Ground-state fidelity `𝓕_G` of the undriven vacuum.
    pub fidelity_g: f64,
    pub mode: DissipationMode,
}

fn project(a: &Array2<f64>, vk: &Array2<f64>) -> Array2<f64> {
    vk.t().dot(&a.dot(vk))
}

/// Diagonalize the full Hamiltonian and assemble the truncated dissipative
/// frame for the given mode.
pub fn build_frame(
    model: &ModelSpec,
    ancilla: &AncillaSpec,
    dissipation: &DissipationSpec,
    n_max: usize,
    k_levels: usize,
    degeneracy_tol: f64,
) -> Result<DressedFrame> {
    model.validate()?;
    ancilla.validate()?;
    dissipation.validate()?;
    let space = model.space(n_max, true)?;
    let space_s = space.system_only();
    let h = models::build_full_hamiltonian(model, ancilla, &space)?;
    let eig = spectra::diagonalize(&h)?;
    let h_s = models::build_system_hamiltonian(model, &space_s)?;
    let eig_s = spectra::diagonalize(&h_s)?;
    frame_from_eig(&space, &eig, &eig_s, ancilla, dissipation, k_levels, degeneracy_tol)
}

fn frame_from_eig(
    space: &SpaceSpec,
    eig: &EigenDecomposition,
    eig_s: &EigenDecomposition,
    ancilla: &AncillaSpec,
    dissipation: &DissipationSpec,
    k_levels: usize,
    degeneracy_tol: f64,
) -> Result<DressedFrame> {
    if k_levels < 2 {
        return Err(Error::InvalidSpec {
            what: "k_levels",
            why: format!("need at least 2 levels, got {k_levels}"),
        });
    }
    let dim = eig.dim();
    let k = k_levels.min(dim);
    let vk = eig.states.slice(ndarray::s![.., ..k]).to_owned();
    let energies = eig.energies.slice(ndarray::s![..k]).to_owned();

    let sx_full = hilbert::ancilla_pauli(space, Pauli::X)?;
    let rates = [dissipation.gamma_c, dissipation.gamma_0, dissipation.gamma_m];
    let couplings: Vec<Array2<f64>> = match dissipation.mode {
        DissipationMode::Dressed => {
            let a = hilbert::boson_annihilator(space).entries;
            let x = &a + &a.t();
            let jx = hilbert::collective_spin(space, Spin::Jx).entries;
            vec![x, jx, sx_full.entries.clone()]
        }
        DissipationMode::Bare => vec![
            hilbert::boson_annihilator(space).entries,
            hilbert::collective_spin(space, Spin::Jminus).entries,
            hilbert::ancilla_pauli(space, Pauli::Minus)?.entries,
        ],
    };
    let jumps: Vec<(f64, Array2<f64>)> = rates
        .iter()
        .zip(couplings.iter())
        .map(|(&rate, c)| {
            let projected = project(c, &vk);
            let op = match dissipation.mode {
                DissipationMode::Dressed => theta_filter(&projected, &energies, degeneracy_tol),
                DissipationMode::Bare => projected,
            };
            (rate, op)
        })
        .collect();

    let drive_op = project(&sx_full.entries, &vk);
    let mut p_up = Array2::<f64>::zeros((dim, dim));
    for i in 0..dim / 2 {
        p_up[[2 * i + 1, 2 * i + 1]] = 1.0;
    }
    let n_up_op = project(&p_up, &vk);

    let gs = eig_s.ground();
    let dim_s = eig_s.dim();
    let mut u = [Array1::<f64>::zeros(dim), Array1::<f64>::zeros(dim)];
    for q in 0..2 {
        for i in 0..dim_s {
            u[q][2 * i + q] = gs[i];
        }
    }
    let ground_u = [vk.t().dot(&u[0]), vk.t().dot(&u[1])];

    let num = spectra::lamb_shift_numeric(eig, &sx_full, ancilla.omega_m);
    let fidelity_g = spectra::ground_state_fidelity(eig, eig_s)?;

    Ok(DressedFrame {
        k_levels: k,
        energies,
        jumps,
        drive_op,
        n_up_op,
        ground_u,
        resonance: num.shift + ancilla.omega_m,
        dominant_level: num.dominant_level,
        dominant_weight: num.weight,
        fidelity_g,
        mode: dissipation.mode,
    })
}

/// Undriven Liouvillian as a dense superoperator on row-major-vectorized
/// `K×K` density matrices: `vec(AρB) = (A ⊗ Bᵀ) vec(ρ)`.
pub fn build_generator(frame: &DressedFrame) -> Array2<Complex64> {
    let k = frame.k_levels;
    let eye: Array2<f64> = Array2::eye(k);
    let mut diss = Array2::<f64>::zeros((k * k, k * k));
    for (rate, u) in &frame.jumps {
        if *rate == 0.0 {
            continue;
        }
        let w = u.t().dot(u);
        diss = diss + (rate / 2.0) * (2.0 * kron(u, u) - kron(&w, &eye) - kron(&eye, &w.t()));
    }
    let mut l0 = diss.mapv(|x| Complex64::new(x, 0.0));
    for i in 0..k {
        for j in 0..k {
            let m = i * k + j;
            l0[[m, m]] += Complex64::new(0.0, -(frame.energies[i] - frame.energies[j]));
        }
    }
    l0
}

/// Commutator superoperator `-i(S⊗I - I⊗Sᵀ)` of the drive coupling.
pub fn drive_superop(frame: &DressedFrame) -> Array2<Complex64> {
    let k = frame.k_levels;
    let eye: Array2<f64> = Array2::eye(k);
    let real = kron(&frame.drive_op, &eye) - kron(&eye, &frame.drive_op.t());
    real.mapv(|x| Complex64::new(0.0, -x))
}

fn vec_dagger(v: &Array1<Complex64>, k: usize) -> Array1<Complex64> {
    let mut out = Array1::zeros(k * k);
    for i in 0..k {
        for j in 0..k {
            out[i * k + j] = v[j * k + i].conj();
        }
    }
    out
}

/// Factor the trace-bordered generator `[[L0, vec(I)/K], [vec(I)ᵀ, 0]]`,
/// which is nonsingular when the undriven steady state is unique.
fn bordered_lu(l0: &Array2<Complex64>, k: usize) -> Result<ZLu> {
    let n2 = k * k;
    let mut ab = Array2::<Complex64>::zeros((n2 + 1, n2 + 1));
    ab.slice_mut(ndarray::s![..n2, ..n2]).assign(l0);
    let scale = 1.0 / k as f64;
    for i in 0..k {
        ab[[i * k + i, n2]] = Complex64::new(scale, 0.0);
        ab[[n2, i * k + i]] = Complex64::new(1.0, 0.0);
    }
    Ok(ZLu::factor(&ab)?)
}

fn bordered_solve(lu: &ZLu, rhs: &Array1<Complex64>, k: usize) -> Result<Array2<Complex64>> {
    let n2 = k * k;
    let mut b = vec![Complex64::new(0.0, 0.0); n2 + 1];
    b[..n2].copy_from_slice(rhs.as_slice().expect("contiguous"));
    b[n2] = Complex64::new(1.0, 0.0);
    lu.solve_in_place(&mut b)?;
    Ok(Array2::from_shape_vec((k, k), b[..n2].to_vec()).expect("shape"))
}

/// Steady state of the undriven generator (unit-trace null vector).
pub fn steady_state_undriven(frame: &DressedFrame) -> Result<DensityMatrix> {
    let k = frame.k_levels;
    let l0 = build_generator(frame);
    let lu = bordered_lu(&l0, k)?;
    let rhs = Array1::zeros(k * k);
    let entries = bordered_solve(&lu, &rhs, k)?;
    Ok(DensityMatrix { entries })
}

/// Harmonic-balance steady state of the driven master equation.
///
/// Expands `ρ(t) = ρ0 + (ρ1 e^{-iω_p t} + h.c.) + (ρ2 e^{-2iω_p t} + h.c.)`;
/// the drive `Ω cos(ω_p t)` couples adjacent harmonics. Eliminating
/// `ρ2` and `ρ1` exactly leaves a fixed-point equation for `ρ0`, solved by
/// iteration with the trace-bordered undriven generator.
pub struct FloquetSolver {
    k: usize,
    l0: Array2<Complex64>,
    /// `(Ω/2) L1`.
    l1_half: Array2<Complex64>,
    bordered: ZLu,
    /// Iteration cap and convergence threshold on `max |Δρ0|`.
    pub max_iters: usize,
    pub tol: f64,
}

impl FloquetSolver {
    pub fn new(frame: &DressedFrame, amplitude: f64) -> Result<Self> {
        if amplitude < 0.0 {
            return Err(Error::InvalidSpec {
                what: "drive",
                why: format!("Omega_p must be >= 0, got {amplitude}"),
            });
        }
        let k = frame.k_levels;
        let l0 = build_generator(frame);
        let l1_half = drive_superop(frame).mapv(|z| z * (amplitude / 2.0));
        let bordered = bordered_lu(&l0, k)?;
        Ok(Self { k, l0, l1_half, bordered, max_iters: 200, tol: 1e-12 })
    }

    /// Solve for the time-averaged steady state at one drive frequency;
    /// returns the zeroth harmonic and the iteration count.
    pub fn solve(&self, omega_p: f64) -> Result<(DensityMatrix, usize)> {
        let k = self.k;
        let n2 = k * k;
        // A_n = L0 - i n ω_p, n = 1, 2
        let mut a1 = self.l0.clone();
        let mut a2 = self.l0.clone();
        for m in 0..n2 {
            a1[[m, m]] -= Complex64::new(0.0, omega_p);
            a2[[m, m]] -= Complex64::new(0.0, 2.0 * omega_p);
        }
        let b1 = ZLu::factor(&a1)?.solve_matrix(&self.l1_half)?;
        let b2 = ZLu::factor(&a2)?.solve_matrix(&self.l1_half)?;
        // ρ1 = -(I - B1 B2)^{-1} B1 ρ0
        let mut m = linalg::matmul_z(&b1, &b2).mapv(|z| -z);
        for i in 0..n2 {
            m[[i, i]] += Complex64::new(1.0, 0.0);
        }
        let lu_m = ZLu::factor(&m)?;

        let mut rho0 = Array1::<Complex64>::zeros(n2);
        rho0[0] = Complex64::new(1.0, 0.0);
        let mut residual = f64::INFINITY;
        for it in 0..self.max_iters {
            let mut r1 = b1.dot(&rho0);
            lu_m.solve_in_place(r1.as_slice_mut().expect("contiguous"))?;
            r1.mapv_inplace(|z| -z);
            let source = &r1 + &vec_dagger(&r1, k);
            let rhs = self.l1_half.dot(&source).mapv(|z| -z);
            let new = bordered_solve(&self.bordered, &rhs, k)?;
            let flat = Array1::from_iter(new.iter().copied());
            residual = flat
                .iter()
                .zip(rho0.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0f64, f64::max);
            rho0 = flat;
            if residual < self.tol {
                return Ok((
                    DensityMatrix {
                        entries: Array2::from_shape_vec((k, k), rho0.to_vec()).expect("shape"),
                    },
                    it + 1,
                ));
            }
        }
        Err(Error::NonConvergence { residual, steps: self.max_iters })
    }
}

/// Settings for direct time integration.
#[derive(Debug, Clone, Copy)]
pub struct PropagateSettings {
    /// Maximum number of 10-drive-period averaging windows.
    pub max_windows: usize,
    /// Relative change of window-averaged `n_up` declaring convergence.
    pub rel_tol: f64,
}

impl Default for PropagateSettings {
    fn default() -> Self {
        Self { max_windows: 500, rel_tol: 1e-6 }
    }
}

/// Split real/imaginary master-equation derivative. For real `H` and real
/// jump operators the dissipator acts identically on both parts, while the
/// commutator mixes them: `dR = [H, I]_c + D(R)`, `dI = -[H, R]_c + D(I)`
/// with `[H, M]_c = HM - MH`.
struct SplitGenerator {
    h0: Array1<f64>,
    drive: Array2<f64>,
    /// `(γ, U, UᵀU)` triples.
    jumps: Vec<(f64, Array2<f64>, Array2<f64>)>,
}

impl SplitGenerator {
    fn new(frame: &DressedFrame) -> Self {
        let jumps = frame
            .jumps
            .iter()
            .filter(|(rate, _)| *rate > 0.0)
            .map(|(rate, u)| (*rate, u.clone(), u.t().dot(u)))
            .collect();
        Self { h0: frame.energies.clone(), drive: frame.drive_op.clone(), jumps }
    }

    fn dissipator(&self, m: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(m.raw_dim());
        for (rate, u, w) in &self.jumps {
            let umu = u.dot(m).dot(&u.t());
            let wm = w.dot(m);
            let mw = m.dot(w);
            out = out + (rate / 2.0) * (2.0 * umu - wm - mw);
        }
        out
    }

    /// `H(t) M - M H(t)` with `H(t) = diag(h0) + c · drive`.
    fn commutator(&self, c: f64, m: &Array2<f64>) -> Array2<f64> {
        let k = m.nrows();
        let mut out = Array2::zeros(m.raw_dim());
        for i in 0..k {
            for j in 0..k {
                out[[i, j]] = (self.h0[i] - self.h0[j]) * m[[i, j]];
            }
        }
        if c != 0.0 {
            out = out + c * (self.drive.dot(m) - m.dot(&self.drive));
        }
        out
    }

    /// `(dR, dI)` at drive amplitude `c = Ω cos(ω_p t)`.
    fn derivative(&self, c: f64, r: &Array2<f64>, im: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let dr = self.commutator(c, im) + self.dissipator(r);
        let di = -self.commutator(c, r) + self.dissipator(im);
        (dr, di)
    }
}

/// Integrate the driven master equation from `rho0` with a fixed-step
/// classical 4th-order scheme until the window-averaged ancilla population
/// settles; returns the final window-averaged density matrix.
///
/// The step obeys `h ≤ T_p/64` and `h ≤ 0.05/max(γ_max, ε_K - ε_G)`;
/// averaging windows span 10 drive periods.
pub fn propagate(
    frame: &DressedFrame,
    drive: &DriveSpec,
    rho0: &DensityMatrix,
    settings: &PropagateSettings,
) -> Result<DensityMatrix> {
    drive.validate()?;
    if rho0.dim() != frame.k_levels {
        return Err(Error::DimensionMismatch { left: rho0.dim(), right: frame.k_levels });
    }
    rho0.validate()?;
    let k = frame.k_levels;
    let generator = SplitGenerator::new(frame);
    let t_p = std::f64::consts::TAU / drive.omega_p;
    let gamma_max = frame.jumps.iter().map(|(g, _)| *g).fold(0.0f64, f64::max);
    let span = frame.energies[k - 1] - frame.energies[0];
    let h_cap = (0.05 / gamma_max.max(span).max(1e-12)).min(t_p / 64.0);
    let window = 10.0 * t_p;
    let steps_per_window = (window / h_cap).ceil() as usize;
    let h = window / steps_per_window as f64;

    let mut r: Array2<f64> = rho0.entries.mapv(|z| z.re);
    let mut im: Array2<f64> = rho0.entries.mapv(|z| z.im);
    let mut t = 0.0;
    let mut prev_avg: Option<f64> = None;
    let mut residual = f64::INFINITY;
    for _ in 0..settings.max_windows {
        let mut avg_nup = 0.0;
        let mut avg_r = Array2::<f64>::zeros((k, k));
        let mut avg_i = Array2::<f64>::zeros((k, k));
        for _ in 0..steps_per_window {
            avg_nup += Zip::from(&r).and(&frame.n_up_op.t()).fold(0.0, |acc, a, b| acc + a * b);
            avg_r += &r;
            avg_i += &im;
            let c = |tt: f64| drive.amplitude * (drive.omega_p * tt).cos();
            let (k1r, k1i) = generator.derivative(c(t), &r, &im);
            let (k2r, k2i) =
                generator.derivative(c(t + 0.5 * h), &(&r + &(0.5 * h * &k1r)), &(&im + &(0.5 * h * &k1i)));
            let (k3r, k3i) =
                generator.derivative(c(t + 0.5 * h), &(&r + &(0.5 * h * &k2r)), &(&im + &(0.5 * h * &k2i)));
            let (k4r, k4i) = generator.derivative(c(t + h), &(&r + &(h * &k3r)), &(&im + &(h * &k3i)));
            r = r + (h / 6.0) * (&k1r + &(2.0 * &k2r) + &(2.0 * &k3r) + &k4r);
            im = im + (h / 6.0) * (&k1i + &(2.0 * &k2i) + &(2.0 * &k3i) + &k4i);
            t += h;
        }
        let scale = 1.0 / steps_per_window as f64;
        avg_nup *= scale;
        avg_r *= scale;
        avg_i *= scale;
        // drift guards: the generator preserves trace and Hermitian structure,
        // so any violation signals a numerical problem
        let tr: f64 = r.diag().sum();
        if (tr - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidSpec {
                what: "density_matrix",
                why: format!("trace drifted to {tr} during propagation"),
            });
        }
        if let Some(prev) = prev_avg {
            residual = (avg_nup - prev).abs() / prev.abs().max(1e-300);
            if residual < settings.rel_tol {
                let entries = Array2::from_shape_fn((k, k), |(i, j)| {
                    Complex64::new(avg_r[[i, j]], avg_i[[i, j]])
                });
                return Ok(DensityMatrix { entries });
            }
        }
        prev_avg = Some(avg_nup);
    }
    Err(Error::NonConvergence { residual, steps: settings.max_windows })
}

/// `Tr[ρ (1+σ_z^(M))/2]` in the truncated eigenbasis.
pub fn ancilla_population(frame: &DressedFrame, rho: &DensityMatrix) -> f64 {
    rho.expectation_real(&frame.n_up_op)
}

/// `𝓕 = ⟨G_S| Tr_M ρ |G_S⟩`, evaluated through the two ancilla components of
/// `|G_S⟩` projected into the truncated eigenbasis.
pub fn measurement_fidelity(frame: &DressedFrame, rho: &DensityMatrix) -> f64 {
    let mut f = 0.0;
    for u in &frame.ground_u {
        let mut amp = Complex64::new(0.0, 0.0);
        for i in 0..frame.k_levels {
            for j in 0..frame.k_levels {
                amp += Complex64::new(u[i], 0.0) * rho.entries[[i, j]] * u[j];
            }
        }
        f += amp.re;
    }
    f
}

/// Steady-state engine selection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Harmonic balance (fast, weak-drive exact to two harmonics).
    #[default]
    Floquet,
    /// Direct fixed-step time integration.
    TimeIntegration,
}

/// Uniform drive-frequency grid of `points` values spanning
/// `resonance ± half_width`. Errors when the resonant level itself fell
/// outside the truncated basis — scanning would probe a transition the
/// generator cannot represent.
pub fn scan_grid(frame: &DressedFrame, half_width: f64, points: usize) -> Result<Vec<f64>> {
    if frame.dominant_level >= frame.k_levels {
        return Err(Error::InvalidSpec {
            what: "k_levels",
            why: format!(
                "dominant spectroscopic level {} lies outside the truncated basis (K = {}); \
                 increase k_levels",
                frame.dominant_level, frame.k_levels
            ),
        });
    }
    let n = points.max(2);
    Ok((0..n)
        .map(|i| frame.resonance - half_width + 2.0 * half_width * i as f64 / (n - 1) as f64)
        .collect())
}

/// Scan the drive frequency over `grid`, returning one steady-state point per
/// frequency. Grid points are independent and run in parallel.
pub fn spectroscopy_scan(
    frame: &DressedFrame,
    amplitude: f64,
    grid: &[f64],
    engine: Engine,
) -> Result<Vec<SpectroscopyPoint>> {
    let point = |rho: &DensityMatrix, omega_p: f64| SpectroscopyPoint {
        omega_p,
        n_up: ancilla_population(frame, rho),
        fidelity_f: measurement_fidelity(frame, rho),
    };
    match engine {
        Engine::Floquet => {
            let solver = FloquetSolver::new(frame, amplitude)?;
            grid.par_iter()
                .map(|&wp| {
                    let (rho, _) = solver.solve(wp)?;
                    Ok(point(&rho, wp))
                })
                .collect()
        }
        Engine::TimeIntegration => {
            let rho0 = DensityMatrix::pure(frame.k_levels, 0);
            let settings = PropagateSettings::default();
            grid.par_iter()
                .map(|&wp| {
                    let drive = DriveSpec::new(wp, amplitude);
                    let rho = propagate(frame, &drive, &rho0, &settings)?;
                    Ok(point(&rho, wp))
                })
                .collect()
        }
    }
}

/// Parabolic peak refinement of a scan.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PeakEstimate {
    pub peak_frequency: f64,
    pub peak_height: f64,
    /// Full width at half maximum from linear interpolation.
    pub linewidth: f64,
}

/// Locate the `n_up` resonance: three-point parabolic refinement of the
/// interior argmax, and FWHM by linear interpolation of the half-maximum
/// crossings on both flanks.
pub fn peak_extract(points: &[SpectroscopyPoint]) -> Result<PeakEstimate> {
    if points.len() < 5 {
        return Err(Error::InvalidSpec {
            what: "scan",
            why: format!("need at least 5 points, got {}", points.len()),
        });
    }
    let mut imax = 0;
    for (i, p) in points.iter().enumerate() {
        if p.n_up > points[imax].n_up {
            imax = i;
        }
    }
    if imax == 0 || imax == points.len() - 1 {
        return Err(Error::NoInteriorPeak);
    }
    let (x0, y0) = (points[imax - 1].omega_p, points[imax - 1].n_up);
    let (x1, y1) = (points[imax].omega_p, points[imax].n_up);
    let (x2, y2) = (points[imax + 1].omega_p, points[imax + 1].n_up);
    // vertex of the parabola through three (possibly non-uniform) points
    let d0 = (y1 - y0) / (x1 - x0);
    let d1 = (y2 - y1) / (x2 - x1);
    let curv = (d1 - d0) / (x2 - x0);
    let (peak_frequency, peak_height) = if curv.abs() < f64::EPSILON * y1.abs().max(1.0) {
        (x1, y1)
    } else {
        // Newton form p(x) = y0 + d0(x-x0) + curv(x-x0)(x-x1), vertex at p' = 0
        let xv = 0.5 * (x0 + x1 - d0 / curv);
        let p = |x: f64| y0 + d0 * (x - x0) + curv * (x - x0) * (x - x1);
        (xv, p(xv))
    };
    let half = peak_height / 2.0;
    let cross = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = imax;
        for i in range {
            if points[i].n_up <= half {
                let (xa, ya) = (points[prev].omega_p, points[prev].n_up);
                let (xb, yb) = (points[i].omega_p, points[i].n_up);
                return Some(xa + (half - ya) * (xb - xa) / (yb - ya));
            }
            prev = i;
        }
        None
    };
    let left = cross(&mut (0..imax).rev()).ok_or(Error::HalfMaxNotBracketed)?;
    let right = cross(&mut (imax + 1..points.len())).ok_or(Error::HalfMaxNotBracketed)?;
    Ok(PeakEstimate { peak_frequency, peak_height, linewidth: right - left })
}
