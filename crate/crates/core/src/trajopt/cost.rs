//! Objective terms that depend on the unitary trajectory, with analytic
//! gradients with respect to the state blocks and the knot controls.
//!
//! Gradients with respect to a complex block `U` are returned as the complex
//! matrix `G = ∂f/∂Re U + i ∂f/∂Im U`, so that `df = Re⟨G, dU⟩`.

use crate::algebra::{kron, CMatrix, C64};
use crate::error::Result;
use crate::metrics::series::{
    toggling_coefficients, toggling_coefficients_deriv, universal_coefficients, universal_coefficients_deriv,
};

use super::Objective;

/// Gradient accumulator indexed `[knot][block]` and `[knot][control]`.
pub(crate) struct CostGrad {
    pub states: Vec<Vec<CMatrix>>,
    pub controls: Vec<Vec<f64>>,
}

impl CostGrad {
    pub fn zeros(n_knots: usize, blocks: usize, d: usize, n_controls: usize) -> Self {
        CostGrad {
            states: vec![vec![CMatrix::zeros(d); blocks]; n_knots],
            controls: vec![vec![0.0; n_controls]; n_knots],
        }
    }
}

pub(crate) struct Cost {
    pub objective: Objective,
    pub q: f64,
    pub fidelity_weight: f64,
    /// Weighted error operators `[channel][interval]`.
    pub errors: Vec<Vec<CMatrix>>,
    pub goal: CMatrix,
    pub control_ops: Vec<CMatrix>,
    pub dt: f64,
    pub tf: f64,
}

impl Cost {
    fn d(&self) -> usize {
        self.goal.dim()
    }

    /// `τ = Tr(U_N† G)`
    fn overlap(&self, u_n: &CMatrix) -> C64 {
        u_n.inner(&self.goal)
    }

    /// `F² = |Tr(U_N† G)|² / d²`
    pub fn fidelity_sq(&self, u_n: &CMatrix) -> f64 {
        let d = self.d() as f64;
        self.overlap(u_n).norm_sqr() / (d * d)
    }

    pub fn fidelity_sq_grad(&self, u_n: &CMatrix) -> CMatrix {
        let d = self.d() as f64;
        self.goal.scale(self.overlap(u_n).conj() * (2.0 / (d * d)))
    }

    /// Robustness metric from knot states and interval Hamiltonians.
    pub fn metric(&self, states: &[Vec<CMatrix>], hams: &[CMatrix]) -> Result<f64> {
        let d = self.d() as f64;
        let t2 = self.tf * self.tf;
        Ok(match self.objective {
            Objective::None => 0.0,
            Objective::Toggling(j) => {
                let mut total = 0.0;
                for errs in &self.errors {
                    total += self.toggling_sum(states, hams, errs, j)?.frobenius_sq();
                }
                total / (d * t2)
            }
            Objective::Universal(j) => self.universal_sum(states, hams, j)?.frobenius_sq() / (d * d * t2),
            Objective::Adjoint => {
                let last = states.last().unwrap();
                let u_dag = last[0].adjoint();
                last[1..].iter().map(|dn| (&u_dag * dn).frobenius_sq()).sum::<f64>() / (d * t2)
            }
        })
    }

    fn toggling_sum(&self, states: &[Vec<CMatrix>], hams: &[CMatrix], errs: &[CMatrix], j: usize) -> Result<CMatrix> {
        let mut s = CMatrix::zeros(self.d());
        for ((y, h), e) in states.iter().zip(hams).zip(errs) {
            let u = &y[0];
            let m = toggling_coefficients(h, e, j, self.dt)?;
            s.axpy(C64::new(self.dt, 0.0), &(&u.adjoint() * &(&m * u)));
        }
        Ok(s)
    }

    fn universal_sum(&self, states: &[Vec<CMatrix>], hams: &[CMatrix], j: usize) -> Result<CMatrix> {
        let d = self.d();
        let mut w = CMatrix::zeros(d * d);
        for (y, h) in states.iter().zip(hams) {
            let uu = kron(&y[0], &y[0].conj());
            let term = if j == 0 { uu } else { &universal_coefficients(h, j, self.dt)? * &uu };
            w.axpy(C64::new(self.dt, 0.0), &term);
        }
        Ok(w)
    }

    /// Adds `scale · ∇metric` into `g`.
    pub fn metric_grad(&self, states: &[Vec<CMatrix>], hams: &[CMatrix], scale: f64, g: &mut CostGrad) -> Result<()> {
        let d = self.d();
        let t2 = self.tf * self.tf;
        let dt = self.dt;
        match self.objective {
            Objective::None => {}
            Objective::Toggling(j) => {
                let c = 2.0 * scale / (d as f64 * t2);
                for errs in &self.errors {
                    let s = self.toggling_sum(states, hams, errs, j)?;
                    let s_dag = s.adjoint();
                    for (k, ((y, h), e)) in states.iter().zip(hams).zip(errs).enumerate() {
                        let u = &y[0];
                        let m = toggling_coefficients(h, e, j, dt)?;
                        let mut gu = &m * &(u * &s_dag);
                        gu += &(&m.adjoint() * &(u * &s));
                        g.states[k][0].axpy(C64::new(c * dt, 0.0), &gu);
                        if j > 0 {
                            let x = u * &(&s * &u.adjoint());
                            for (gj, hj) in g.controls[k].iter_mut().zip(&self.control_ops) {
                                let dm = toggling_coefficients_deriv(h, e, hj, j, dt);
                                *gj += c * dt * x.inner(&dm).re;
                            }
                        }
                    }
                }
            }
            Objective::Universal(j) => {
                let c = 2.0 * scale / ((d * d) as f64 * t2);
                let w = self.universal_sum(states, hams, j)?;
                for (k, (y, h)) in states.iter().zip(hams).enumerate() {
                    let u = &y[0];
                    let coeffs = if j == 0 { None } else { Some(universal_coefficients(h, j, dt)?) };
                    let t = match &coeffs {
                        Some(i) => &i.adjoint() * &w,
                        None => w.clone(),
                    };
                    let mut gu = CMatrix::zeros(d);
                    for a in 0..d {
                        for b in 0..d {
                            for cc in 0..d {
                                for e in 0..d {
                                    let tv = t[(a * d + b, cc * d + e)];
                                    gu[(a, cc)] += tv * u[(b, e)];
                                    gu[(b, e)] += tv.conj() * u[(a, cc)];
                                }
                            }
                        }
                    }
                    g.states[k][0].axpy(C64::new(c * dt, 0.0), &gu);
                    if j > 0 {
                        let x = &w * &kron(u, &u.conj()).adjoint();
                        for (gj, hj) in g.controls[k].iter_mut().zip(&self.control_ops) {
                            let di = universal_coefficients_deriv(h, hj, j, dt);
                            *gj += c * dt * x.inner(&di).re;
                        }
                    }
                }
            }
            Objective::Adjoint => {
                let c = 2.0 * scale / (d as f64 * t2);
                let last = states.len() - 1;
                let u = &states[last][0];
                let u_dag = u.adjoint();
                for b in 1..states[last].len() {
                    let dn = &states[last][b];
                    let z = &u_dag * dn;
                    g.states[last][0].axpy(C64::new(c, 0.0), &(dn * &z.adjoint()));
                    g.states[last][b].axpy(C64::new(c, 0.0), &(u * &z));
                }
            }
        }
        Ok(())
    }

    /// `Q·metric + w_F·(1 − F²)`
    pub fn value(&self, states: &[Vec<CMatrix>], hams: &[CMatrix]) -> Result<f64> {
        let mut v = 0.0;
        if self.q != 0.0 {
            v += self.q * self.metric(states, hams)?;
        }
        if self.fidelity_weight != 0.0 {
            v += self.fidelity_weight * (1.0 - self.fidelity_sq(&states.last().unwrap()[0]));
        }
        Ok(v)
    }

    /// Gradient of [`Cost::value`] plus `fid_extra · ∇(−F²)`, the weighted
    /// fidelity inequality `F_min² − F² ≤ 0`.
    pub fn grad(&self, states: &[Vec<CMatrix>], hams: &[CMatrix], fid_extra: f64, g: &mut CostGrad) -> Result<()> {
        if self.q != 0.0 {
            self.metric_grad(states, hams, self.q, g)?;
        }
        let coeff = self.fidelity_weight + fid_extra;
        if coeff != 0.0 {
            let last = states.len() - 1;
            let gf = self.fidelity_sq_grad(&states[last][0]);
            g.states[last][0].axpy(C64::new(-coeff, 0.0), &gf);
        }
        Ok(())
    }
}
