//! Projected L-BFGS on the augmented Lagrangian with box constraints.

use std::collections::VecDeque;

use super::{project, projected_gradient_norm, Merit, Problem, SolverOptions, Trace, Values};

pub(super) const ARMIJO: f64 = 1e-4;
pub(super) const MAX_BACKTRACKS: usize = 40;

pub(super) struct InnerResult {
    pub iterations: usize,
    pub values: Values,
    pub optimality: f64,
    pub non_finite: bool,
}

pub(super) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Merit value and gradient at `x`.
pub(super) fn merit_eval<P: Problem>(p: &P, x: &[f64], merit: &Merit, grad: &mut [f64]) -> (Values, f64) {
    let (v, cache) = p.evaluate(x);
    if !v.is_finite() {
        return (v, f64::NAN);
    }
    let (w_eq, w_in) = merit.weights(&v);
    p.gradient(x, &cache, &w_eq, &w_in, grad);
    let m = merit.value(&v);
    (v, m)
}

/// Variables held at a bound by the current gradient.
pub(super) fn fixed_mask(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> Vec<bool> {
    (0..x.len())
        .map(|i| (x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0))
        .collect()
}

/// Two-loop recursion for `−H g` on the free variables.
fn direction(g: &[f64], fixed: &[bool], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.iter().zip(fixed).map(|(v, f)| if *f { 0.0 } else { *v }).collect();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = mem.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter()
        .zip(fixed)
        .map(|(v, f)| if *f { 0.0 } else { -v })
        .collect()
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
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.lbfgs_memory);
    let mut g_new = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut iterations = 0;
    let mut optimality = projected_gradient_norm(x, &g, lo, hi);

    while iterations < opts.max_inner && optimality > tol {
        let fixed = fixed_mask(x, &g, lo, hi);
        let mut d = direction(&g, &fixed, &mem);
        if dot(&d, &g) >= 0.0 {
            mem.clear();
            d = g.iter().zip(&fixed).map(|(v, f)| if *f { 0.0 } else { -v }).collect();
        }
        let mut alpha = if mem.is_empty() {
            (1.0 / d.iter().fold(0.0f64, |m, v| m.max(v.abs()))).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for i in 0..n {
                trial[i] = x[i] + alpha * d[i];
            }
            project(&mut trial, lo, hi);
            let step: Vec<f64> = trial.iter().zip(x.iter()).map(|(t, v)| t - v).collect();
            let decrease = dot(&g, &step);
            if decrease >= 0.0 && step.iter().all(|s| *s == 0.0) {
                break;
            }
            let (v, m) = merit_eval(p, &trial, merit, &mut g_new);
            if m.is_finite() && m <= phi + ARMIJO * decrease.min(0.0) && decrease < 0.0 {
                accepted = Some((v, m, step));
                break;
            }
            alpha *= 0.5;
        }
        let Some((v, m, s)) = accepted else {
            if mem.is_empty() {
                break;
            }
            // retry from steepest descent before giving up
            mem.clear();
            continue;
        };

        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if mem.len() == opts.lbfgs_memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
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
