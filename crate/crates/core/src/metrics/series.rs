//! Truncated Δt-series for the per-interval integrals
//!
//! ```text
//! (1/Δt) ∫₀^Δt e^{iHt} E e^{−iHt} dt = Σ_n (iΔt)ⁿ/(n+1)! · ad_Hⁿ(E)
//! (1/Δt) ∫₀^Δt e^{Lt} dt             = Σ_n Δtⁿ/(n+1)! · Lⁿ = φ₁(ΔtL)
//! ```

use crate::algebra::{comm, kron, CMatrix, C64};
use crate::error::{Error, Result};

/// Highest series order the coefficient routines accept.
pub const MAX_SERIES_ORDER: usize = 30;

/// `1/n!`, from the exact integer factorial.
pub fn inv_factorial(n: usize) -> f64 {
    assert!(n <= 33, "factorial exceeds u128");
    let f: u128 = (1..=n as u128).product();
    1.0 / f as f64
}

fn check_order(j: usize) -> Result<()> {
    if j > MAX_SERIES_ORDER {
        return Err(Error::OrderTooHigh {
            order: j,
            max: MAX_SERIES_ORDER,
        });
    }
    Ok(())
}

/// Coefficient `(iΔt)ⁿ/(n+1)!` of the toggling series.
fn toggling_coeff(n: usize, dt: f64) -> C64 {
    C64::new(0.0, dt).powu(n as u32) * inv_factorial(n + 1)
}

/// `E^{(j)} = Σ_{n=0}^{j} (iΔt)ⁿ/(n+1)! ad_Hⁿ(E)`
pub fn toggling_coefficients(h: &CMatrix, e: &CMatrix, j: usize, dt: f64) -> Result<CMatrix> {
    check_order(j)?;
    if h.dim() != e.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: e.dim() });
    }
    let mut out = e.clone();
    let mut ad = e.clone();
    for n in 1..=j {
        ad = comm(h, &ad);
        out.axpy(toggling_coeff(n, dt), &ad);
    }
    Ok(out)
}

/// Derivative of `E^{(j)}` with respect to `H` in direction `K`.
pub(crate) fn toggling_coefficients_deriv(h: &CMatrix, e: &CMatrix, k: &CMatrix, j: usize, dt: f64) -> CMatrix {
    let d = h.dim();
    let mut out = CMatrix::zeros(d);
    let mut ad = e.clone();
    let mut dad = CMatrix::zeros(d);
    for n in 1..=j {
        let next_dad = &comm(k, &ad) + &comm(h, &dad);
        ad = comm(h, &ad);
        dad = next_dad;
        out.axpy(toggling_coeff(n, dt), &dad);
    }
    out
}

/// Generator `−iH ⊕ iH*` of `U ⊗ U*`.
pub fn vectorized_generator(h: &CMatrix) -> CMatrix {
    let id = CMatrix::identity(h.dim());
    let mi = C64::new(0.0, -1.0);
    (&kron(h, &id) - &kron(&id, &h.conj())).scale(mi)
}

/// `I^{(j)} = Σ_{n=0}^{j} Δtⁿ/(n+1)! (−iH ⊕ iH*)ⁿ`
pub fn universal_coefficients(h: &CMatrix, j: usize, dt: f64) -> Result<CMatrix> {
    check_order(j)?;
    let l = vectorized_generator(h);
    let mut out = CMatrix::identity(l.dim());
    let mut p = CMatrix::identity(l.dim());
    for n in 1..=j {
        p = &l * &p;
        out.axpy(C64::new(dt.powi(n as i32) * inv_factorial(n + 1), 0.0), &p);
    }
    Ok(out)
}

/// Derivative of `I^{(j)}` with respect to `H` in direction `K`.
pub(crate) fn universal_coefficients_deriv(h: &CMatrix, k: &CMatrix, j: usize, dt: f64) -> CMatrix {
    let l = vectorized_generator(h);
    let dl = vectorized_generator(k);
    let m = l.dim();
    let mut out = CMatrix::zeros(m);
    let mut p = CMatrix::identity(m);
    let mut dp = CMatrix::zeros(m);
    for n in 1..=j {
        let next_dp = &(&dl * &p) + &(&l * &dp);
        p = &l * &p;
        dp = next_dp;
        out.axpy(C64::new(dt.powi(n as i32) * inv_factorial(n + 1), 0.0), &dp);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Pauli;

    #[test]
    fn factorials_exact() {
        assert_eq!(inv_factorial(0), 1.0);
        assert_eq!(inv_factorial(5), 1.0 / 120.0);
        assert_eq!(inv_factorial(13), 1.0 / 6227020800.0);
    }

    #[test]
    fn low_orders() {
        let h = Pauli::X.matrix().scale_real(0.7);
        let e = Pauli::Z.matrix();
        assert_eq!(toggling_coefficients(&h, &e, 0, 0.3).unwrap(), e);
        let one = toggling_coefficients(&h, &e, 1, 0.3).unwrap();
        let mut want = e.clone();
        want.axpy(C64::new(0.0, 0.15), &comm(&h, &e));
        assert!(one.max_abs_diff(&want) < 1e-15);
        assert_eq!(universal_coefficients(&h, 0, 0.3).unwrap(), CMatrix::identity(4));
    }

    #[test]
    fn commuting_generators_leave_series_trivial() {
        let h = Pauli::Z.matrix().scale_real(1.3);
        let e = Pauli::Z.matrix().scale_real(-0.4);
        for j in 0..=12 {
            assert!(toggling_coefficients(&h, &e, j, 0.9).unwrap().max_abs_diff(&e) < 1e-15);
            let u = universal_coefficients(&CMatrix::zeros(2), j, 0.9).unwrap();
            assert_eq!(u, CMatrix::identity(4));
        }
    }

    #[test]
    fn order_limit() {
        let z = Pauli::Z.matrix();
        assert!(toggling_coefficients(&z, &z, MAX_SERIES_ORDER + 1, 0.1).is_err());
        assert!(universal_coefficients(&z, MAX_SERIES_ORDER + 1, 0.1).is_err());
    }

    #[test]
    fn directional_derivatives_match_finite_differences() {
        let h = &Pauli::X.matrix().scale_real(0.6) + &Pauli::Y.matrix().scale_real(-0.4);
        let e = Pauli::Z.matrix();
        let k = &Pauli::Z.matrix().scale_real(0.5) + &Pauli::X.matrix().scale_real(0.2);
        let step = 1e-6;
        let hp = &h + &k.scale_real(step);
        let hm = &h - &k.scale_real(step);
        let j = 5;
        let fd = (&toggling_coefficients(&hp, &e, j, 0.8).unwrap() - &toggling_coefficients(&hm, &e, j, 0.8).unwrap())
            .scale_real(0.5 / step);
        assert!(fd.max_abs_diff(&toggling_coefficients_deriv(&h, &e, &k, j, 0.8)) < 1e-8);
        let fd = (&universal_coefficients(&hp, j, 0.8).unwrap() - &universal_coefficients(&hm, j, 0.8).unwrap())
            .scale_real(0.5 / step);
        assert!(fd.max_abs_diff(&universal_coefficients_deriv(&h, &k, j, 0.8)) < 1e-8);
    }
}
