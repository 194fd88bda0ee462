//! Small dense complex linear algebra: Paulis, Hilbert-Schmidt norms,
//! commutators, Kronecker products and sums, vectorization, and matrix
//! exponentials with Fréchet derivatives.

mod expm;
mod matrix;
mod pauli;

pub use expm::{expm, expm_frechet};
pub use matrix::CMatrix;
pub use num_complex::Complex64 as C64;
pub use pauli::{pauli_string_matrix, Pauli, PauliString};

use crate::error::{Error, Result};

/// Largest iterated-commutator order accepted by [`iterated_ad`].
pub const MAX_AD_ORDER: usize = 64;

fn check_dims(a: &CMatrix, b: &CMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

/// Hilbert-Schmidt norm squared, normalized by the matrix's own dimension:
/// `(1/d) Tr(A†A)`.
pub fn hs_norm_sq(a: &CMatrix) -> f64 {
    a.frobenius_sq() / a.dim() as f64
}

/// `[A, B] = AB − BA`
pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    check_dims(a, b)?;
    Ok(comm(a, b))
}

#[inline]
pub(crate) fn comm(a: &CMatrix, b: &CMatrix) -> CMatrix {
    &(a * b) - &(b * a)
}

/// `ad_H^n(X)`: `ad^0 = X`, `ad^n = [H, ad^{n−1}]`.
pub fn iterated_ad(h: &CMatrix, x: &CMatrix, n: usize) -> Result<CMatrix> {
    check_dims(h, x)?;
    if n > MAX_AD_ORDER {
        return Err(Error::OrderTooHigh {
            order: n,
            max: MAX_AD_ORDER,
        });
    }
    let mut out = x.clone();
    for _ in 0..n {
        out = comm(h, &out);
    }
    Ok(out)
}

/// Kronecker product; entry `((a, b), (c, e))` is `A[a, c] · B[b, e]`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (da, db) = (a.dim(), b.dim());
    CMatrix::from_fn(da * db, |r, c| a[(r / db, c / db)] * b[(r % db, c % db)])
}

/// Kronecker sum `A ⊗ I + I ⊗ B`.
pub fn kron_sum(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let ia = CMatrix::identity(a.dim());
    let ib = CMatrix::identity(b.dim());
    &kron(a, &ib) + &kron(&ia, b)
}

/// Column-major vectorization.
pub fn vec(a: &CMatrix) -> Vec<C64> {
    let d = a.dim();
    (0..d * d).map(|i| a[(i % d, i / d)]).collect()
}

/// Inverse of [`vec`].
pub fn unvec(v: &[C64]) -> Result<CMatrix> {
    let d = (v.len() as f64).sqrt().round() as usize;
    if d == 0 || d * d != v.len() {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            got: v.len(),
        });
    }
    Ok(CMatrix::from_fn(d, |r, c| v[c * d + r]))
}

/// Dense matrix-vector product.
pub fn matvec(a: &CMatrix, v: &[C64]) -> Vec<C64> {
    let d = a.dim();
    assert_eq!(d, v.len());
    (0..d)
        .map(|r| (0..d).map(|c| a[(r, c)] * v[c]).sum())
        .collect()
}
