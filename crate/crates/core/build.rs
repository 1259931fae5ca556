// ndarray-linalg and ndarray's blas feature only declare the LAPACK/CBLAS
// symbols; the system OpenBLAS provides both.
fn main() {
    println!("cargo:rustc-link-lib=openblas");
}
