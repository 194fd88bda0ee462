//! First-order error susceptibility estimators.
//!
//! Every estimator approximates
//!
//! ```text
//! 𝓔(E) = (1/t_f²) ‖∫₀^{t_f} U(t)† E(t) U(t) dt‖²
//! ```
//!
//! with the own-dimension-normalized Hilbert-Schmidt norm. For an
//! [`ErrorModel`] with several channels the reported value is the sum of the
//! per-channel susceptibilities.
//!
//! * fine-grid: midpoint sum on a refined grid with exact sub-interval propagators;
//! * toggling(j): one sample per interval, integrand corrected to order `j` in Δt;
//! * universal(j): error-agnostic bound built from `U ⊗ U*`;
//! * adjoint: from `∂U(t_f)/∂ε`, exact under zero-order hold.

pub mod series;

use serde::{Deserialize, Serialize};

use crate::algebra::{expm, kron, CMatrix, PauliString, C64};
use crate::dynamics::{
    adjoint_rollout, interval_hamiltonians, rollout, ControlSystem, ControlTrajectory, ErrorModel,
};
use crate::error::{Error, Result};

pub use series::{toggling_coefficients, universal_coefficients, MAX_SERIES_ORDER};

/// Highest Δt-expansion order accepted by the estimators.
pub const MAX_ORDER: usize = 12;

/// Minimum number of points on the fine grid.
pub const FINE_GRID_POINTS: usize = 1 << 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub order_j: usize,
    /// Substeps per interval for the fine-grid oracle; `None` picks enough
    /// for at least [`FINE_GRID_POINTS`] points in total.
    pub oversample: Option<usize>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            order_j: 0,
            oversample: None,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        check_order(self.order_j)?;
        if self.oversample == Some(0) {
            return Err(Error::InvalidProblem("oversample must be positive".into()));
        }
        Ok(())
    }

    pub fn oversample_for(&self, n_knots: usize) -> usize {
        self.oversample
            .unwrap_or_else(|| default_oversample(n_knots))
    }
}

pub fn default_oversample(n_knots: usize) -> usize {
    FINE_GRID_POINTS.div_ceil(n_knots.saturating_sub(1).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "order", rename_all = "snake_case")]
pub enum Estimator {
    Fine,
    Toggling(usize),
    Universal(usize),
    Adjoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SusceptibilityReport {
    pub value: f64,
    pub estimator: Estimator,
    pub channels: Vec<String>,
}

fn check_order(j: usize) -> Result<()> {
    if j > MAX_ORDER {
        return Err(Error::OrderTooHigh { order: j, max: MAX_ORDER });
    }
    Ok(())
}

fn check_error_dim(sys: &ControlSystem, err: &ErrorModel) -> Result<()> {
    if err.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: err.dim(),
        });
    }
    Ok(())
}

/// Normalized value `(1/t_f²)·(1/dim)·Tr(S†S)` of an integrated operator.
fn normalized(op: &CMatrix, tf: f64) -> f64 {
    crate::algebra::hs_norm_sq(op) / (tf * tf)
}

/// `Σ_k Δt U_k† E_k^{(j)} U_k` over the `N − 1` intervals.
pub fn toggling_operator(states: &[CMatrix], hams: &[CMatrix], errs: &[CMatrix], dt: f64, j: usize) -> Result<CMatrix> {
    let d = states[0].dim();
    let mut sum = CMatrix::zeros(d);
    for ((u, h), e) in states.iter().zip(hams).zip(errs) {
        let m = toggling_coefficients(h, e, j, dt)?;
        sum.axpy(C64::new(dt, 0.0), &(&u.adjoint() * &(&m * u)));
    }
    Ok(sum)
}

/// `Σ_k Δt I_k^{(j)} (U_k ⊗ U_k*)` over the `N − 1` intervals.
pub fn universal_operator(states: &[CMatrix], hams: &[CMatrix], dt: f64, j: usize) -> Result<CMatrix> {
    let d = states[0].dim();
    let mut sum = CMatrix::zeros(d * d);
    for (u, h) in states.iter().zip(hams) {
        let w = kron(u, &u.conj());
        let term = if j == 0 { w } else { &universal_coefficients(h, j, dt)? * &w };
        sum.axpy(C64::new(dt, 0.0), &term);
    }
    Ok(sum)
}

/// Midpoint sum `Σ_s δ U(t_s)† E U(t_s)` with `oversample` substeps per interval.
pub fn fine_operator(states: &[CMatrix], hams: &[CMatrix], errs: &[CMatrix], dt: f64, oversample: usize) -> Result<CMatrix> {
    let d = states[0].dim();
    let delta = dt / oversample as f64;
    let mut sum = CMatrix::zeros(d);
    for ((u, h), e) in states.iter().zip(hams).zip(errs) {
        let step = expm(&h.scale(C64::new(0.0, -delta)))?;
        let mut cur = &expm(&h.scale(C64::new(0.0, -0.5 * delta)))? * u;
        let mut local = CMatrix::zeros(d);
        for _ in 0..oversample {
            local += &(&cur.adjoint() * &(e * &cur));
            cur = &step * &cur;
        }
        sum.axpy(C64::new(delta, 0.0), &local);
    }
    Ok(sum)
}

/// Midpoint sum `Σ_s δ U(t_s) ⊗ U(t_s)*` with `oversample` substeps per interval.
pub fn universal_fine_operator(states: &[CMatrix], hams: &[CMatrix], dt: f64, oversample: usize) -> Result<CMatrix> {
    let d = states[0].dim();
    let delta = dt / oversample as f64;
    let mut sum = CMatrix::zeros(d * d);
    for (u, h) in states.iter().zip(hams) {
        let step = expm(&h.scale(C64::new(0.0, -delta)))?;
        let mut cur = &expm(&h.scale(C64::new(0.0, -0.5 * delta)))? * u;
        for _ in 0..oversample {
            sum.axpy(C64::new(delta, 0.0), &kron(&cur, &cur.conj()));
            cur = &step * &cur;
        }
    }
    Ok(sum)
}

struct Prepared {
    states: Vec<CMatrix>,
    hams: Vec<CMatrix>,
    dt: f64,
    tf: f64,
}

fn prepare(sys: &ControlSystem, traj: &ControlTrajectory) -> Result<Prepared> {
    let ut = rollout(sys, traj)?;
    let hams = interval_hamiltonians(sys, traj)?;
    Ok(Prepared {
        states: ut.knots,
        hams,
        dt: traj.dt,
        tf: traj.duration(),
    })
}

/// Fine-grid oracle on a grid with `oversample` midpoint samples per interval.
pub fn susceptibility_fine(
    sys: &ControlSystem,
    traj: &ControlTrajectory,
    err: &ErrorModel,
    oversample: usize,
) -> Result<f64> {
    if oversample == 0 {
        return Err(Error::InvalidProblem("oversample must be positive".into()));
    }
    check_error_dim(sys, err)?;
    let p = prepare(sys, traj)?;
    let mut total = 0.0;
    for seq in err.sequences(p.hams.len())? {
        total += normalized(&fine_operator(&p.states, &p.hams, &seq, p.dt, oversample)?, p.tf);
    }
    Ok(total)
}

/// Toggling estimator with an order-`j` correction of each interval's integrand.
pub fn susceptibility_toggling(
    sys: &ControlSystem,
    traj: &ControlTrajectory,
    err: &ErrorModel,
    j: usize,
) -> Result<f64> {
    check_order(j)?;
    check_error_dim(sys, err)?;
    let p = prepare(sys, traj)?;
    let mut total = 0.0;
    for seq in err.sequences(p.hams.len())? {
        total += normalized(&toggling_operator(&p.states, &p.hams, &seq, p.dt, j)?, p.tf);
    }
    Ok(total)
}

/// Error-agnostic universal susceptibility, normalized by `d²`.
pub fn susceptibility_universal(sys: &ControlSystem, traj: &ControlTrajectory, j: usize) -> Result<f64> {
    check_order(j)?;
    let p = prepare(sys, traj)?;
    Ok(normalized(&universal_operator(&p.states, &p.hams, p.dt, j)?, p.tf))
}

/// Universal susceptibility evaluated on the fine grid.
pub fn universal_fine(sys: &ControlSystem, traj: &ControlTrajectory, oversample: usize) -> Result<f64> {
    if oversample == 0 {
        return Err(Error::InvalidProblem("oversample must be positive".into()));
    }
    let p = prepare(sys, traj)?;
    Ok(normalized(&universal_fine_operator(&p.states, &p.hams, p.dt, oversample)?, p.tf))
}

/// Per-channel adjoint susceptibilities `(1/t_f²)‖U_N† ∂U_N/∂ε_c‖²`.
pub fn adjoint_channel_values(sys: &ControlSystem, traj: &ControlTrajectory, err: &ErrorModel) -> Result<Vec<f64>> {
    check_error_dim(sys, err)?;
    let (ut, derivs) = adjoint_rollout(sys, traj, err)?;
    let tf = traj.duration();
    let un_dag = ut.final_unitary().adjoint();
    Ok(derivs
        .iter()
        .map(|list| normalized(&(&un_dag * list.last().unwrap()), tf))
        .collect())
}

/// Adjoint estimator, exact under zero-order hold.
pub fn susceptibility_adjoint(sys: &ControlSystem, traj: &ControlTrajectory, err: &ErrorModel) -> Result<f64> {
    Ok(adjoint_channel_values(sys, traj, err)?.iter().sum())
}

pub fn evaluate(
    sys: &ControlSystem,
    traj: &ControlTrajectory,
    err: &ErrorModel,
    estimator: Estimator,
    cfg: &MetricConfig,
) -> Result<SusceptibilityReport> {
    cfg.validate()?;
    let value = match estimator {
        Estimator::Fine => susceptibility_fine(sys, traj, err, cfg.oversample_for(traj.n_knots()))?,
        Estimator::Toggling(j) => susceptibility_toggling(sys, traj, err, j)?,
        Estimator::Universal(j) => {
            err.static_operators()?;
            susceptibility_universal(sys, traj, j)?
        }
        Estimator::Adjoint => susceptibility_adjoint(sys, traj, err)?,
    };
    Ok(SusceptibilityReport {
        value,
        estimator,
        channels: err.channels().iter().map(|c| c.label.clone()).collect(),
    })
}

/// Raw (unnormalized) form of the universal bound for one static error:
/// returns `(𝓔_raw(E), 𝓔_U,raw · ‖vec E‖²)` using the order-`j` toggling and
/// universal sums, for which the inequality holds exactly.
pub fn universal_bound(
    sys: &ControlSystem,
    traj: &ControlTrajectory,
    e: &CMatrix,
    j: usize,
) -> Result<(f64, f64)> {
    check_order(j)?;
    if e.dim() != sys.dim() {
        return Err(Error::DimensionMismatch { expected: sys.dim(), got: e.dim() });
    }
    let p = prepare(sys, traj)?;
    let errs = vec![e.clone(); p.hams.len()];
    let t2 = p.tf * p.tf;
    let lhs = toggling_operator(&p.states, &p.hams, &errs, p.dt, j)?.frobenius_sq() / t2;
    let u_raw = universal_operator(&p.states, &p.hams, p.dt, j)?.frobenius_sq() / t2;
    Ok((lhs, u_raw * e.frobenius_sq()))
}

/// Adjoint susceptibility of every non-identity Pauli string with unit weight.
pub fn pauli_susceptibility_scan(
    sys: &ControlSystem,
    traj: &ControlTrajectory,
    n_qubits: usize,
) -> Result<Vec<(PauliString, f64)>> {
    if sys.dim() != 1 << n_qubits {
        return Err(Error::DimensionMismatch {
            expected: 1 << n_qubits,
            got: sys.dim(),
        });
    }
    let strings = PauliString::all_non_identity(n_qubits);
    let model = ErrorModel::from_paulis(&strings.iter().map(|p| (p.clone(), 1.0)).collect::<Vec<_>>())?;
    let values = adjoint_channel_values(sys, traj, &model)?;
    Ok(strings.into_iter().zip(values).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Pauli;
    use std::f64::consts::PI;

    fn xyz() -> ControlSystem {
        ControlSystem::from_paulis(&["X", "Y", "Z"].map(|s| s.parse().unwrap())).unwrap()
    }

    fn z_error() -> ErrorModel {
        ErrorModel::single("Z", Pauli::Z.matrix()).unwrap()
    }

    #[test]
    fn idle_trajectory_gives_unit_susceptibility() {
        let traj = ControlTrajectory::constant(0.7, 9, &[0.0; 3]).unwrap();
        let sys = xyz();
        assert!((susceptibility_fine(&sys, &traj, &z_error(), 4).unwrap() - 1.0).abs() < 1e-14);
        assert!((susceptibility_adjoint(&sys, &traj, &z_error()).unwrap() - 1.0).abs() < 1e-14);
        for j in 0..=MAX_ORDER {
            assert!((susceptibility_toggling(&sys, &traj, &z_error(), j).unwrap() - 1.0).abs() < 1e-14);
            assert!((susceptibility_universal(&sys, &traj, j).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_error_gives_zero() {
        let traj = ControlTrajectory::constant(0.5, 6, &[0.3, -0.2, 0.1]).unwrap();
        let zero = ErrorModel::single("0", CMatrix::zeros(2)).unwrap();
        assert_eq!(susceptibility_adjoint(&xyz(), &traj, &zero).unwrap(), 0.0);
    }

    #[test]
    fn full_period_x_drive_cancels_z() {
        let n = 11;
        let dt = 0.9;
        let tf = (n - 1) as f64 * dt;
        let traj = ControlTrajectory::constant(dt, n, &[PI / tf, 0.0, 0.0]).unwrap();
        let sys = xyz();
        assert!(susceptibility_fine(&sys, &traj, &z_error(), 1 << 12).unwrap() < 1e-10);
        assert!(susceptibility_adjoint(&sys, &traj, &z_error()).unwrap() < 1e-10);
    }

    #[test]
    fn order_and_dimension_checks() {
        let traj = ControlTrajectory::constant(0.5, 4, &[0.0; 3]).unwrap();
        assert!(susceptibility_toggling(&xyz(), &traj, &z_error(), MAX_ORDER + 1).is_err());
        let wrong = ErrorModel::single("ZZ", "ZZ".parse::<PauliString>().unwrap().matrix()).unwrap();
        assert!(susceptibility_adjoint(&xyz(), &traj, &wrong).is_err());
        assert!(pauli_susceptibility_scan(&xyz(), &traj, 2).is_err());
    }

    #[test]
    fn universal_rejects_time_dependent_errors() {
        let traj = ControlTrajectory::constant(0.5, 4, &[0.1; 3]).unwrap();
        let td = ErrorModel::time_dependent("z", vec![Pauli::Z.matrix(); 3]).unwrap();
        let r = evaluate(&xyz(), &traj, &td, Estimator::Universal(0), &MetricConfig::default());
        assert_eq!(r, Err(Error::TimeDependentUniversal));
        assert!(evaluate(&xyz(), &traj, &td, Estimator::Toggling(2), &MetricConfig::default()).is_ok());
        assert!(evaluate(&xyz(), &traj, &td, Estimator::Adjoint, &MetricConfig::default()).is_ok());
    }

    #[test]
    fn scan_on_idle_and_x_drive() {
        let sys = xyz();
        let idle = ControlTrajectory::constant(0.5, 5, &[0.0; 3]).unwrap();
        let rows = pauli_susceptibility_scan(&sys, &idle, 1).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|(_, v)| (v - 1.0).abs() < 1e-14));
        let drive = ControlTrajectory::constant(0.5, 5, &[0.8, 0.0, 0.0]).unwrap();
        let rows = pauli_susceptibility_scan(&sys, &drive, 1).unwrap();
        assert_eq!(rows[0].0.label(), "X");
        assert!((rows[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn default_oversample_covers_fine_grid() {
        for n in [2, 16, 40, 257, 2000] {
            assert!(default_oversample(n) * (n - 1) >= FINE_GRID_POINTS);
        }
    }
}
