use serde::{Deserialize, Serialize};

use crate::algebra::{CMatrix, C64};
use crate::dynamics::ControlTrajectory;
use crate::error::{Error, Result};

/// Flat indexing of the decision vector.
///
/// Direct layouts start with the state blocks: for every knot, `blocks`
/// complex `d × d` matrices (`U_k`, then one derivative `D_{c,k}` per error
/// channel when the adjoint objective is used), each stored row-major with
/// interleaved real and imaginary parts. Indirect layouts have no state
/// blocks. Controls follow: `u` (`N × J`), `u̇` (`N × J`), `ü` (`(N − 1) × J`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableLayout {
    pub n_knots: usize,
    pub n_controls: usize,
    pub dim: usize,
    /// State blocks per knot; zero for the indirect formulation.
    pub blocks: usize,
}

impl VariableLayout {
    pub fn block_len(&self) -> usize {
        2 * self.dim * self.dim
    }

    pub fn n_state_vars(&self) -> usize {
        self.n_knots * self.blocks * self.block_len()
    }

    pub fn state_offset(&self, knot: usize, block: usize) -> usize {
        debug_assert!(knot < self.n_knots && block < self.blocks);
        (knot * self.blocks + block) * self.block_len()
    }

    pub fn u_offset(&self) -> usize {
        self.n_state_vars()
    }

    pub fn du_offset(&self) -> usize {
        self.u_offset() + self.n_knots * self.n_controls
    }

    pub fn ddu_offset(&self) -> usize {
        self.du_offset() + self.n_knots * self.n_controls
    }

    pub fn len(&self) -> usize {
        self.ddu_offset() + (self.n_knots - 1) * self.n_controls
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn u(&self, knot: usize, j: usize) -> usize {
        self.u_offset() + knot * self.n_controls + j
    }

    pub fn du(&self, knot: usize, j: usize) -> usize {
        self.du_offset() + knot * self.n_controls + j
    }

    pub fn ddu(&self, interval: usize, j: usize) -> usize {
        self.ddu_offset() + interval * self.n_controls + j
    }

    pub fn state(&self, x: &[f64], knot: usize, block: usize) -> CMatrix {
        unpack(&x[self.state_offset(knot, block)..][..self.block_len()], self.dim)
    }

    /// State blocks of one knot.
    pub fn states_at(&self, x: &[f64], knot: usize) -> Vec<CMatrix> {
        (0..self.blocks).map(|b| self.state(x, knot, b)).collect()
    }

    /// All state blocks, indexed `[knot][block]`.
    pub fn states(&self, x: &[f64]) -> Vec<Vec<CMatrix>> {
        (0..self.n_knots)
            .map(|k| self.states_at(x, k))
            .collect()
    }

    pub fn set_state(&self, x: &mut [f64], knot: usize, block: usize, m: &CMatrix) {
        let off = self.state_offset(knot, block);
        pack_into(m, &mut x[off..off + self.block_len()]);
    }

    /// Adds a complex gradient block `G` (with `∂/∂Re = Re G`, `∂/∂Im = Im G`).
    pub fn add_state_grad(&self, out: &mut [f64], knot: usize, block: usize, g: &CMatrix, scale: f64) {
        let off = self.state_offset(knot, block);
        for (i, z) in g.as_slice().iter().enumerate() {
            out[off + 2 * i] += scale * z.re;
            out[off + 2 * i + 1] += scale * z.im;
        }
    }

    pub fn control_row(&self, x: &[f64], knot: usize) -> Vec<f64> {
        x[self.u(knot, 0)..][..self.n_controls].to_vec()
    }

    pub fn trajectory(&self, x: &[f64], dt: f64) -> Result<ControlTrajectory> {
        if x.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: x.len(),
            });
        }
        let j = self.n_controls;
        let rows = |off: usize, n: usize| -> Vec<Vec<f64>> { (0..n).map(|k| x[off + k * j..][..j].to_vec()).collect() };
        ControlTrajectory::new(
            dt,
            rows(self.u_offset(), self.n_knots),
            rows(self.du_offset(), self.n_knots),
            rows(self.ddu_offset(), self.n_knots - 1),
        )
    }

    pub fn set_trajectory(&self, x: &mut [f64], traj: &ControlTrajectory) {
        for k in 0..self.n_knots {
            for j in 0..self.n_controls {
                x[self.u(k, j)] = traj.u[k][j];
                x[self.du(k, j)] = traj.du[k][j];
                if k + 1 < self.n_knots {
                    x[self.ddu(k, j)] = traj.ddu[k][j];
                }
            }
        }
    }
}

pub(crate) fn unpack(v: &[f64], d: usize) -> CMatrix {
    CMatrix::from_vec((0..d * d).map(|i| C64::new(v[2 * i], v[2 * i + 1])).collect()).expect("square block")
}

pub(crate) fn pack_into(m: &CMatrix, out: &mut [f64]) {
    for (i, z) in m.as_slice().iter().enumerate() {
        out[2 * i] = z.re;
        out[2 * i + 1] = z.im;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_are_disjoint_and_exhaustive() {
        let l = VariableLayout {
            n_knots: 5,
            n_controls: 3,
            dim: 2,
            blocks: 2,
        };
        let mut seen = vec![0u8; l.len()];
        for k in 0..5 {
            for b in 0..2 {
                let o = l.state_offset(k, b);
                seen[o..o + l.block_len()].iter_mut().for_each(|s| *s += 1);
            }
            for j in 0..3 {
                seen[l.u(k, j)] += 1;
                seen[l.du(k, j)] += 1;
                if k < 4 {
                    seen[l.ddu(k, j)] += 1;
                }
            }
        }
        assert!(seen.iter().all(|&s| s == 1));
        assert_eq!(l.len(), 5 * 2 * 8 + 5 * 3 * 2 + 4 * 3);
    }

    #[test]
    fn state_and_trajectory_roundtrip() {
        let l = VariableLayout {
            n_knots: 3,
            n_controls: 1,
            dim: 2,
            blocks: 1,
        };
        let mut x = vec![0.0; l.len()];
        let m = CMatrix::from_fn(2, |r, c| C64::new(r as f64, c as f64 - 0.5));
        l.set_state(&mut x, 2, 0, &m);
        assert_eq!(l.state(&x, 2, 0), m);
        let t = ControlTrajectory::from_controls(0.5, vec![vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        l.set_trajectory(&mut x, &t);
        assert_eq!(l.trajectory(&x, 0.5).unwrap(), t);
    }
}
