//! Thin, safe wrappers around the system LAPACK/BLAS for the dense kernels
//! this crate needs: symmetric eigendecomposition (`dsyevd`), complex LU
//! factorization and solves (`zgetrf`/`zgetrs`), and complex matrix products
//! (`zgemm`).
//!
//! All matrices in this crate are stored row-major (ndarray standard layout).
//! LAPACK is column-major, so the wrappers exploit two identities instead of
//! converting layouts:
//!
//! * a symmetric matrix equals its transpose, so its row-major buffer can be
//!   handed to `dsyevd` directly; the eigenvectors come back as rows of the
//!   output buffer and are transposed once on return;
//! * a row-major buffer viewed column-major is the transpose, so factoring it
//!   with `zgetrf` factors `Aᵀ`, and `zgetrs` with `trans = 'T'` then solves
//!   the original `A x = b`.

use ndarray::{Array1, Array2, ShapeBuilder};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: max |A - A'| = {defect:e}")]
    NotSymmetric { defect: f64 },
    #[error("dimension mismatch: matrix is {n}x{n}, vector has length {len}")]
    ShapeMismatch { n: usize, len: usize },
    #[error("LAPACK {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },
}

extern "C" {
    fn dsyevd_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        w: *mut f64,
        work: *mut f64,
        lwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );
    fn zgetrf_(
        m: *const i32,
        n: *const i32,
        a: *mut Complex64,
        lda: *const i32,
        ipiv: *mut i32,
        info: *mut i32,
    );
    fn zgetrs_(
        trans: *const u8,
        n: *const i32,
        nrhs: *const i32,
        a: *const Complex64,
        lda: *const i32,
        ipiv: *const i32,
        b: *mut Complex64,
        ldb: *const i32,
        info: *mut i32,
    );
    fn zgemm_(
        transa: *const u8,
        transb: *const u8,
        m: *const i32,
        n: *const i32,
        k: *const i32,
        alpha: *const Complex64,
        a: *const Complex64,
        lda: *const i32,
        b: *const Complex64,
        ldb: *const i32,
        beta: *const Complex64,
        c: *mut Complex64,
        ldc: *const i32,
    );
}

/// Maximum permitted symmetry defect of an "exactly symmetric" input.
pub const SYMMETRY_TOL: f64 = 1e-12;

fn check_square<T>(a: &Array2<T>) -> Result<usize, LinalgError> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(LinalgError::NotSquare { rows, cols });
    }
    Ok(rows)
}

/// Largest element magnitude of `A - Aᵀ`.
pub fn symmetry_defect(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut defect = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            defect = defect.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    defect
}

fn dsyevd(a: &Array2<f64>, vectors: bool) -> Result<(Array1<f64>, Option<Array2<f64>>), LinalgError> {
    let n = check_square(a)?;
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let defect = symmetry_defect(a);
    if defect > SYMMETRY_TOL * scale {
        return Err(LinalgError::NotSymmetric { defect });
    }
    let mut buf: Vec<f64> = a.iter().copied().collect();
    let mut w = vec![0.0f64; n];
    let jobz = if vectors { b'V' } else { b'N' };
    let uplo = b'L';
    let n_i = n as i32;
    let mut info = 0i32;

    // Workspace query.
    let mut work_query = [0.0f64];
    let mut iwork_query = [0i32];
    let neg1 = -1i32;
    unsafe {
        dsyevd_(
            &jobz, &uplo, &n_i, buf.as_mut_ptr(), &n_i, w.as_mut_ptr(),
            work_query.as_mut_ptr(), &neg1, iwork_query.as_mut_ptr(), &neg1, &mut info,
        );
    }
    if info != 0 {
        return Err(LinalgError::Lapack { routine: "dsyevd (workspace query)", info });
    }
    let lwork = work_query[0] as i32;
    let liwork = iwork_query[0];
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    let mut iwork = vec![0i32; liwork.max(1) as usize];
    unsafe {
        dsyevd_(
            &jobz, &uplo, &n_i, buf.as_mut_ptr(), &n_i, w.as_mut_ptr(),
            work.as_mut_ptr(), &lwork, iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(LinalgError::Lapack { routine: "dsyevd", info });
    }
    let energies = Array1::from_vec(w);
    if !vectors {
        return Ok((energies, None));
    }
    // LAPACK wrote eigenvectors as column-major columns, i.e. rows of the
    // row-major buffer; transpose so that column l of the result is vector l.
    let rows = Array2::from_shape_vec((n, n), buf).expect("shape checked above");
    let states = rows.t().as_standard_layout().into_owned();
    Ok((energies, Some(states)))
}

/// Full eigendecomposition of a real symmetric matrix.
///
/// Returns ascending eigenvalues and the matrix whose column `l` is the
/// eigenvector for eigenvalue `l`.
pub fn eigh(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>), LinalgError> {
    let (w, v) = dsyevd(a, true)?;
    Ok((w, v.expect("vectors requested")))
}

/// Ascending eigenvalues of a real symmetric matrix (no vectors).
pub fn eigvalsh(a: &Array2<f64>) -> Result<Array1<f64>, LinalgError> {
    Ok(dsyevd(a, false)?.0)
}

/// LU factorization of a square complex matrix, reusable for many solves.
pub struct ZLu {
    n: usize,
    lu: Vec<Complex64>,
    ipiv: Vec<i32>,
}

impl ZLu {
    /// Factor `a` (consumed). Fails on exact singularity.
    pub fn factor(a: &Array2<Complex64>) -> Result<Self, LinalgError> {
        let n = check_square(a)?;
        let mut lu: Vec<Complex64> = a.iter().copied().collect();
        let mut ipiv = vec![0i32; n];
        let n_i = n as i32;
        let mut info = 0i32;
        unsafe {
            zgetrf_(&n_i, &n_i, lu.as_mut_ptr(), &n_i, ipiv.as_mut_ptr(), &mut info);
        }
        if info != 0 {
            return Err(LinalgError::Lapack { routine: "zgetrf", info });
        }
        Ok(Self { n, lu, ipiv })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve `A x = b` in place for a single right-hand side.
    pub fn solve_in_place(&self, b: &mut [Complex64]) -> Result<(), LinalgError> {
        if b.len() != self.n {
            return Err(LinalgError::ShapeMismatch { n: self.n, len: b.len() });
        }
        let trans = b'T'; // buffer holds Aᵀ in LAPACK's view
        let n_i = self.n as i32;
        let one = 1i32;
        let mut info = 0i32;
        unsafe {
            zgetrs_(
                &trans, &n_i, &one, self.lu.as_ptr(), &n_i, self.ipiv.as_ptr(),
                b.as_mut_ptr(), &n_i, &mut info,
            );
        }
        if info != 0 {
            return Err(LinalgError::Lapack { routine: "zgetrs", info });
        }
        Ok(())
    }

    /// Solve `A X = B` for a full right-hand-side matrix, returning `X`.
    pub fn solve_matrix(&self, b: &Array2<Complex64>) -> Result<Array2<Complex64>, LinalgError> {
        let (rows, nrhs) = b.dim();
        if rows != self.n {
            return Err(LinalgError::ShapeMismatch { n: self.n, len: rows });
        }
        // LAPACK wants right-hand sides as column-major columns: the row-major
        // buffer of Bᵀ is exactly that.
        let mut buf: Vec<Complex64> = b.t().iter().copied().collect();
        let trans = b'T';
        let n_i = self.n as i32;
        let nrhs_i = nrhs as i32;
        let mut info = 0i32;
        unsafe {
            zgetrs_(
                &trans, &n_i, &nrhs_i, self.lu.as_ptr(), &n_i, self.ipiv.as_ptr(),
                buf.as_mut_ptr(), &n_i, &mut info,
            );
        }
        if info != 0 {
            return Err(LinalgError::Lapack { routine: "zgetrs", info });
        }
        let x_cm = Array2::from_shape_vec((self.n, nrhs).f(), buf).expect("shape checked above");
        Ok(x_cm.as_standard_layout().into_owned())
    }
}

/// Complex matrix product `A · B` through BLAS `zgemm`.
pub fn matmul_z(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let (p, q) = a.dim();
    let (q2, r) = b.dim();
    assert_eq!(q, q2, "inner dimensions must match: {q} vs {q2}");
    let mut c = vec![Complex64::new(0.0, 0.0); p * r];
    // Row-major C = A·B equals column-major Cᵀ = Bᵀ·Aᵀ, and the row-major
    // buffers viewed column-major are exactly those transposes.
    let (m, n, k) = (r as i32, p as i32, q as i32);
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let a_buf: Vec<Complex64>;
    let b_buf: Vec<Complex64>;
    let a_ptr = if let Some(s) = a.as_slice() {
        s.as_ptr()
    } else {
        a_buf = a.iter().copied().collect();
        a_buf.as_ptr()
    };
    let b_ptr = if let Some(s) = b.as_slice() {
        s.as_ptr()
    } else {
        b_buf = b.iter().copied().collect();
        b_buf.as_ptr()
    };
    let no = b'N';
    unsafe {
        zgemm_(
            &no, &no, &m, &n, &k, &one, b_ptr, &m, a_ptr, &k, &zero,
            c.as_mut_ptr(), &m,
        );
    }
    Array2::from_shape_vec((p, r), c).expect("allocated to shape")
}
