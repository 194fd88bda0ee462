//! Projected truncated Newton trust-region method on the augmented
//! Lagrangian.
//!
//! Each step runs preconditioned conjugate gradients on the free variables
//! (Steihaug), stopping at the trust-region boundary or on negative
//! curvature. The radius is measured in the preconditioner's norm.
//! Hessian-vector products are forward differences of the merit gradient.

use super::lbfgs::{dot, fixed_mask, merit_eval, InnerResult};
use super::{project, projected_gradient_norm, Merit, Preconditioner, Problem, SolverOptions, Trace};

const ACCEPT: f64 = 1e-4;
const MAX_REJECTS: usize = 30;

/// `(∇M(x + h·v) − ∇M(x)) / h`
fn hess_vec<P: Problem>(p: &P, x: &[f64], g: &[f64], v: &[f64], merit: &Merit, buf: &mut [f64], xv: &mut [f64]) -> bool {
    let vmax = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if vmax == 0.0 {
        buf.fill(0.0);
        return true;
    }
    let xmax = x.iter().fold(1.0f64, |m, a| m.max(a.abs()));
    let h = 1e-7 * xmax / vmax;
    for i in 0..x.len() {
        xv[i] = x[i] + h * v[i];
    }
    let (_, m) = merit_eval(p, xv, merit, buf);
    if !m.is_finite() {
        return false;
    }
    for (b, gi) in buf.iter_mut().zip(g) {
        *b = (*b - gi) / h;
    }
    true
}

struct Step {
    d: Vec<f64>,
    /// Model decrease `−(gᵀd + ½ dᵀHd)`.
    predicted: f64,
    on_boundary: bool,
}

/// Positive `σ` with `‖d + σp‖_M = radius`, from `dᵀMd`, `dᵀMp`, `pᵀMp`.
fn to_boundary(dmd: f64, dmp: f64, pmp: f64, radius: f64) -> f64 {
    let disc = (dmp * dmp + pmp * (radius * radius - dmd)).max(0.0);
    (-dmp + disc.sqrt()) / pmp
}

struct Cg<'a, P: Problem> {
    p: &'a P,
    x: &'a [f64],
    g: &'a [f64],
    fixed: &'a [bool],
    merit: &'a Merit,
    precond: Option<&'a dyn Preconditioner>,
}

impl<P: Problem> Cg<'_, P> {
    fn mask(&self, v: &mut [f64]) {
        for (vi, f) in v.iter_mut().zip(self.fixed) {
            if *f {
                *vi = 0.0;
            }
        }
    }

    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        match self.precond {
            Some(m) => m.apply(r, z),
            None => z.copy_from_slice(r),
        }
        self.mask(z);
    }

    /// Initial radius: the `M`-norm of the preconditioned gradient step.
    fn first_radius(&self) -> f64 {
        let mut r: Vec<f64> = self.g.iter().map(|v| -v).collect();
        self.mask(&mut r);
        let mut z = vec![0.0; r.len()];
        self.precondition(&r, &mut z);
        dot(&r, &z).max(0.0).sqrt()
    }

    /// Steihaug conjugate gradients for `H d = −g` inside `‖d‖_M ≤ radius`.
    fn solve(&self, radius: f64, max_iter: usize) -> Option<Step> {
        let n = self.x.len();
        let mut r: Vec<f64> = self.g.iter().map(|v| -v).collect();
        self.mask(&mut r);
        let gnorm = dot(&r, &r).sqrt();
        let forcing = gnorm.sqrt().min(0.5) * gnorm;
        let mut z = vec![0.0; n];
        self.precondition(&r, &mut z);
        let mut dir = z.clone();
        let mut rz = dot(&r, &z);
        let (mut dmd, mut dmp, mut pmp) = (0.0, 0.0, rz);
        let mut d = vec![0.0; n];
        let mut hp = vec![0.0; n];
        let mut xv = vec![0.0; n];
        let mut on_boundary = false;
        for _ in 0..max_iter.max(1) {
            if !hess_vec(self.p, self.x, self.g, &dir, self.merit, &mut hp, &mut xv) {
                return None;
            }
            self.mask(&mut hp);
            let curv = dot(&dir, &hp);
            let alpha = rz / curv;
            let leaves = curv <= 0.0 || dmd + 2.0 * alpha * dmp + alpha * alpha * pmp >= radius * radius;
            let step = if leaves { to_boundary(dmd, dmp, pmp, radius) } else { alpha };
            for i in 0..n {
                d[i] += step * dir[i];
                r[i] -= step * hp[i];
            }
            if leaves {
                on_boundary = true;
                break;
            }
            dmd += 2.0 * alpha * dmp + alpha * alpha * pmp;
            if dot(&r, &r).sqrt() <= forcing {
                break;
            }
            self.precondition(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            dmp = beta * (dmp + alpha * pmp);
            pmp = rz + beta * beta * pmp;
            for i in 0..n {
                dir[i] = z[i] + beta * dir[i];
            }
        }
        // With H d = −g − r along the CG path, m(d) = ½(gᵀd − rᵀd).
        let predicted = -0.5 * (dot(self.g, &d) - dot(&r, &d));
        Some(Step { d, predicted, on_boundary })
    }

    /// Model decrease of an arbitrary step, at the cost of one product.
    fn predicted(&self, s: &[f64]) -> Option<f64> {
        let n = s.len();
        let (mut hs, mut xv) = (vec![0.0; n], vec![0.0; n]);
        if !hess_vec(self.p, self.x, self.g, s, self.merit, &mut hs, &mut xv) {
            return None;
        }
        Some(-(dot(self.g, s) + 0.5 * dot(s, &hs)))
    }
}

pub(super) fn minimize<P: Problem>(
    p: &P,
    x: &mut Vec<f64>,
    merit: &Merit,
    tol: f64,
    opts: &SolverOptions,
    trace: &mut Trace,
) -> InnerResult {
    let (lo, hi) = (p.lower(), p.upper());
    let n = x.len();
    let mut g = vec![0.0; n];
    let (mut vals, mut phi) = merit_eval(p, x, merit, &mut g);
    if !phi.is_finite() {
        return InnerResult { iterations: 0, values: vals, optimality: f64::NAN, non_finite: true };
    }
    let mut g_new = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut iterations = 0;
    let mut rejects = 0;
    let mut radius = f64::NAN;
    let mut optimality = projected_gradient_norm(x, &g, lo, hi);

    while iterations < opts.max_inner && optimality > tol && rejects < MAX_REJECTS {
        let mut fixed = fixed_mask(x, &g, lo, hi);
        for (f, (l, h)) in fixed.iter_mut().zip(lo.iter().zip(hi)) {
            *f |= l == h;
        }
        let precond = p.preconditioner(x, merit.rho, &fixed);
        let cg = Cg {
            p,
            x,
            g: &g,
            fixed: &fixed,
            merit,
            precond: precond.as_deref(),
        };
        if !radius.is_finite() {
            radius = cg.first_radius();
        }
        let Some(step) = cg.solve(radius, opts.cg_max_iter) else {
            radius *= 0.25;
            rejects += 1;
            continue;
        };
        for i in 0..n {
            trial[i] = x[i] + step.d[i];
        }
        project(&mut trial, lo, hi);
        let s: Vec<f64> = trial.iter().zip(x.iter()).map(|(t, v)| t - v).collect();
        let clipped = s.iter().zip(&step.d).any(|(a, b)| a != b);
        let predicted = if clipped { cg.predicted(&s) } else { Some(step.predicted) };
        let (v, m) = merit_eval(p, &trial, merit, &mut g_new);
        let ratio = match predicted {
            Some(pred) if pred > 0.0 && m.is_finite() => (phi - m) / pred,
            _ => f64::NEG_INFINITY,
        };
        if ratio < 0.25 {
            radius *= 0.25;
        } else if ratio > 0.75 && step.on_boundary {
            radius *= 2.0;
        }
        if ratio < ACCEPT {
            rejects += 1;
            continue;
        }
        rejects = 0;
        x.copy_from_slice(&trial);
        std::mem::swap(&mut g, &mut g_new);
        vals = v;
        phi = m;
        iterations += 1;
        trace.push(x, &vals);
        optimality = projected_gradient_norm(x, &g, lo, hi);
    }
    InnerResult { iterations, values: vals, optimality, non_finite: false }
}
