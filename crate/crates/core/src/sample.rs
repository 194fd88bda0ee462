//! Seeded random draws shared by initialization, tests and experiments.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{CMatrix, C64};
use crate::dynamics::{ControlSystem, ControlTrajectory};
use crate::error::Result;

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Number of Fourier modes in [`smooth_controls`].
pub const FOURIER_MODES: usize = 4;

/// Hermitian matrix with entries of real and imaginary parts in `[-1, 1]`.
pub fn hermitian<R: Rng>(rng: &mut R, d: usize) -> CMatrix {
    let mut a = CMatrix::from_fn(d, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    a = &a + &a.adjoint();
    a.scale_real(0.5)
}

/// Haar-ish unitary from the exponential of a random Hermitian matrix.
pub fn unitary<R: Rng>(rng: &mut R, d: usize) -> CMatrix {
    let h = hermitian(rng, d).scale(C64::new(0.0, -PI));
    crate::algebra::expm(&h).expect("bounded generator")
}

/// `n` knots of `j` smooth control channels: each channel is a sum of the
/// first [`FOURIER_MODES`] Fourier modes over the horizon with uniform
/// random coefficients, normalized to a peak magnitude of one.
pub fn smooth_controls<R: Rng>(rng: &mut R, n: usize, j: usize) -> Vec<Vec<f64>> {
    let mut u = vec![vec![0.0; j]; n];
    for c in 0..j {
        let coeffs: Vec<(f64, f64)> = (0..FOURIER_MODES)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let offset: f64 = rng.gen_range(-1.0..1.0);
        for (k, row) in u.iter_mut().enumerate() {
            let s = if n > 1 { k as f64 / (n - 1) as f64 } else { 0.0 };
            row[c] = 0.5 * offset
                + coeffs
                    .iter()
                    .enumerate()
                    .map(|(m, (a, b))| {
                        let w = 2.0 * PI * (m + 1) as f64 * s;
                        a * w.cos() + b * w.sin()
                    })
                    .sum::<f64>();
        }
        let peak = u.iter().map(|r| r[c].abs()).fold(0.0, f64::max);
        if peak > 0.0 {
            for row in &mut u {
                row[c] /= peak;
            }
        }
    }
    u
}

/// Smooth random controls for `sys`, scaled so that `Δt·max_k ‖H_k‖`
/// equals `step_norm` (exactly when the drift is zero).
pub fn trajectory<R: Rng>(
    rng: &mut R,
    sys: &ControlSystem,
    n: usize,
    dt: f64,
    step_norm: f64,
) -> Result<ControlTrajectory> {
    let mut traj = ControlTrajectory::from_controls(dt, smooth_controls(rng, n, sys.n_controls()))?;
    let peak = sys.max_generator_norm(&traj)?;
    if peak > 0.0 {
        let s = step_norm / (dt * peak);
        for v in [&mut traj.u, &mut traj.du, &mut traj.ddu] {
            v.iter_mut().flatten().for_each(|x| *x *= s);
        }
    }
    Ok(traj)
}
