fn main() {
    // Dense symmetric eigendecomposition and complex LU factorization are
    // delegated to the system LAPACK/BLAS (see src/linalg.rs for the FFI
    // surface). Any conforming implementation works; on Debian-family
    // systems `liblapack.so.3` / `libblas.so.3` are provided through the
    // alternatives mechanism (reference netlib, OpenBLAS, ...).
    println!("cargo:rustc-link-lib=dylib=lapack");
    println!("cargo:rustc-link-lib=dylib=blas");
}
