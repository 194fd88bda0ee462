//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants of degree 3, 5, 7, 9 or 13, and its Fréchet derivative via
//! the block-triangular identity
//!
//! ```text
//! exp([[A, E], [0, A]]) = [[exp(A), L(A, E)], [0, exp(A)]]
//! ```

use num_complex::Complex64 as C64;

use super::CMatrix;
use crate::error::{Error, Result};

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Squarings beyond this indicate a norm far outside anything a physical
/// generator produces here.
const MAX_SQUARINGS: i32 = 60;

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Odd/even Padé parts `(U, V)` for the low-degree approximants.
fn pade_low(a: &CMatrix, b: &[f64]) -> (CMatrix, CMatrix) {
    let d = a.dim();
    let a2 = a * a;
    let mut powers = vec![CMatrix::identity(d), a2.clone()];
    while powers.len() < b.len() / 2 {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }
    let mut u = CMatrix::zeros(d);
    let mut v = CMatrix::zeros(d);
    for (k, p) in powers.iter().enumerate() {
        v.axpy(real(b[2 * k]), p);
        u.axpy(real(b[2 * k + 1]), p);
    }
    (a * &u, v)
}

fn pade_13(a: &CMatrix) -> (CMatrix, CMatrix) {
    let d = a.dim();
    let id = CMatrix::identity(d);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &B13;

    let mut inner = a6.scale_real(b[13]);
    inner.axpy(real(b[11]), &a4);
    inner.axpy(real(b[9]), &a2);
    let mut u = &a6 * &inner;
    u.axpy(real(b[7]), &a6);
    u.axpy(real(b[5]), &a4);
    u.axpy(real(b[3]), &a2);
    u.axpy(real(b[1]), &id);
    let u = a * &u;

    let mut inner = a6.scale_real(b[12]);
    inner.axpy(real(b[10]), &a4);
    inner.axpy(real(b[8]), &a2);
    let mut v = &a6 * &inner;
    v.axpy(real(b[6]), &a6);
    v.axpy(real(b[4]), &a4);
    v.axpy(real(b[2]), &a2);
    v.axpy(real(b[0]), &id);
    (u, v)
}

fn pade_solve(u: &CMatrix, v: &CMatrix, norm: f64) -> Result<CMatrix> {
    let p = v + u;
    let q = v - u;
    q.solve(&p).ok_or(Error::Overflow { norm })
}

/// Matrix exponential `exp(A)`.
pub fn expm(a: &CMatrix) -> Result<CMatrix> {
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let norm = a.norm1();
    for &(m, theta) in &THETA {
        if norm <= theta {
            let b: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let (u, v) = pade_low(a, b);
            return pade_solve(&u, &v, norm);
        }
    }
    let s = (norm / THETA_13).log2().ceil().max(0.0) as i32;
    if s > MAX_SQUARINGS {
        return Err(Error::Overflow { norm });
    }
    let scaled = a.scale_real(2f64.powi(-s));
    let (u, v) = pade_13(&scaled);
    let mut r = pade_solve(&u, &v, norm)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if !r.is_finite() {
        return Err(Error::Overflow { norm });
    }
    Ok(r)
}

/// Returns `(exp(A), L(A, D))`, where `L(A, D)` is the Fréchet derivative of
/// the exponential at `A` in direction `D`.
///
/// Both outputs are read off one `2d × 2d` block exponential. `D` is rescaled
/// to the norm of `A` first so its size does not drive the squaring count.
pub fn expm_frechet(a: &CMatrix, dir: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let d = a.dim();
    if dir.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: dir.dim(),
        });
    }
    if !dir.is_finite() {
        return Err(Error::NonFinite);
    }
    let dn = dir.norm1();
    let an = a.norm1();
    let sigma = if dn == 0.0 { 1.0 } else { an.max(1e-3) / dn };
    let mut block = CMatrix::zeros(2 * d);
    block.set_block(0, 0, a);
    block.set_block(d, d, a);
    block.set_block(0, d, &dir.scale_real(sigma));
    let e = expm(&block)?;
    let l = e.block(0, d, d).scale_real(1.0 / sigma);
    Ok((e.block(0, 0, d), l))
}
