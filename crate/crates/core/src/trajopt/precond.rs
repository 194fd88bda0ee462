//! Gauss-Newton preconditioner `ρ JᵀJ + diag(curvature)` for the truncated
//! Newton inner solver.
//!
//! Constraint rows of interval `k` touch only the variables of knots `k`
//! and `k + 1`, so `JᵀJ` is block tridiagonal in knot order and factors in
//! time linear in the knot count.

use nalgebra::DMatrix;

use crate::dynamics::{hamiltonian_at, JointStep};
use crate::error::Result;
use crate::nlp::BlockTridiagonal;

use super::{layout, Formulation, TrajProblem};

/// Control perturbation for the forward-difference Jacobian columns.
const CONTROL_STEP: f64 = 1e-6;
/// Curvature assumed for the state variables, whose objective Hessian is
/// not formed. Small enough not to mask the constraint curvature.
const STATE_SHIFT: f64 = 1e-5;

impl TrajProblem {
    /// Decision variables of knot `k`: its state blocks, `u_k`, `u̇_k`, and
    /// `ü_k` when `k` starts an interval.
    fn knot_vars(&self, k: usize) -> Vec<usize> {
        let l = &self.layout;
        let j = l.n_controls;
        let mut v = Vec::new();
        if l.blocks > 0 {
            let off = l.state_offset(k, 0);
            v.extend(off..off + l.blocks * l.block_len());
        }
        v.extend((0..j).map(|i| l.u(k, i)));
        v.extend((0..j).map(|i| l.du(k, i)));
        if k + 1 < l.n_knots {
            v.extend((0..j).map(|i| l.ddu(k, i)));
        }
        v
    }

    /// Jacobian of the equality rows of interval `k` with respect to the
    /// variables of knots `k` and `k + 1`, in [`Self::knot_vars`] order.
    fn interval_jacobian(&self, x: &[f64], k: usize, bk: usize, bk1: usize) -> Result<DMatrix<f64>> {
        let l = &self.layout;
        let (j, dt) = (l.n_controls, self.spec.dt);
        let ns = l.blocks * l.block_len();
        let mut jac = DMatrix::zeros(ns + 2 * j, bk + bk1);
        if self.formulation == Formulation::Direct {
            let bl = l.block_len();
            let errs: Vec<_> = self.cost.errors[..self.n_derivs()].iter().map(|s| s[k].clone()).collect();
            let row = l.control_row(x, k);
            let step = JointStep::new(&hamiltonian_at(&self.spec.system, &row)?, &errs, dt)?;
            let pack = |blocks: &[crate::algebra::CMatrix]| {
                let mut out = vec![0.0; ns];
                for (b, m) in blocks.iter().enumerate() {
                    layout::pack_into(m, &mut out[b * bl..(b + 1) * bl]);
                }
                out
            };
            // the step is linear in the state
            let mut basis = vec![0.0; ns];
            for col in 0..ns {
                basis[col] = 1.0;
                let state: Vec<_> = (0..l.blocks).map(|b| layout::unpack(&basis[b * bl..(b + 1) * bl], l.dim)).collect();
                basis[col] = 0.0;
                for (r, v) in pack(&step.apply(&state)).into_iter().enumerate() {
                    jac[(r, col)] = -v;
                }
                jac[(col, bk + col)] = 1.0;
            }
            let state = &self.layout.states_at(x, k);
            let base = pack(&step.apply(state));
            for c in 0..j {
                let mut moved = row.clone();
                moved[c] += CONTROL_STEP;
                let s = JointStep::new(&hamiltonian_at(&self.spec.system, &moved)?, &errs, dt)?;
                for (r, (a, b)) in pack(&s.apply(state)).into_iter().zip(&base).enumerate() {
                    jac[(r, ns + c)] = -(a - b) / CONTROL_STEP;
                }
            }
        }
        for i in 0..j {
            let (r1, r2) = (ns + i, ns + j + i);
            jac[(r1, bk + ns + i)] = 1.0;
            jac[(r1, ns + i)] = -1.0;
            jac[(r1, ns + j + i)] = -dt;
            jac[(r2, bk + ns + j + i)] = 1.0;
            jac[(r2, ns + j + i)] = -1.0;
            jac[(r2, ns + 2 * j + i)] = -dt;
        }
        Ok(jac)
    }

    /// `ρ JᵀJ` plus the regularization curvature `2R` on the controls and a
    /// small shift on every variable, factored by knots.
    pub(super) fn gauss_newton(&self, x: &[f64], rho: f64, fixed: &[bool]) -> Result<Option<BlockTridiagonal>> {
        let n = self.spec.n_knots;
        let ns = self.layout.blocks * self.layout.block_len();
        let index: Vec<Vec<usize>> = (0..n).map(|k| self.knot_vars(k)).collect();
        let mut diag: Vec<DMatrix<f64>> = index.iter().map(|v| DMatrix::zeros(v.len(), v.len())).collect();
        let mut lower = Vec::with_capacity(n - 1);
        for k in 0..n - 1 {
            let (bk, bk1) = (index[k].len(), index[k + 1].len());
            let jac = self.interval_jacobian(x, k, bk, bk1)?;
            let jtj = jac.tr_mul(&jac) * rho;
            diag[k] += jtj.view((0, 0), (bk, bk));
            diag[k + 1] += jtj.view((bk, bk), (bk1, bk1));
            lower.push(jtj.view((bk, 0), (bk1, bk)).into_owned());
        }
        for (k, d) in diag.iter_mut().enumerate() {
            for i in 0..index[k].len() {
                d[(i, i)] += if i < ns { STATE_SHIFT } else { 2.0 * self.spec.r + STATE_SHIFT };
            }
        }
        for k in 0..n {
            for (li, &gi) in index[k].iter().enumerate() {
                if !fixed[gi] {
                    continue;
                }
                diag[k].row_mut(li).fill(0.0);
                diag[k].column_mut(li).fill(0.0);
                diag[k][(li, li)] = 1.0;
                if k > 0 {
                    lower[k - 1].row_mut(li).fill(0.0);
                }
                if k + 1 < n {
                    lower[k].column_mut(li).fill(0.0);
                }
            }
        }
        Ok(BlockTridiagonal::factor(index, diag, lower))
    }
}
