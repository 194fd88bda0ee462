//! Constrained nonlinear programming.
//!
//! ```text
//! minimize f(x)  subject to  c(x) = 0,  g(x) ≤ 0,  lo ≤ x ≤ hi
//! ```
//!
//! solved by an augmented Lagrangian outer loop around a bound-constrained
//! inner minimizer: a projected truncated Newton trust-region method by
//! default, projected L-BFGS on request. Inequalities enter the merit through the slack-free
//! `max(0, μ + ρg)²` term; boxes are handled by projection.

mod banded;
mod check;
mod lbfgs;
mod newton;

use serde::{Deserialize, Serialize};

pub use banded::BlockTridiagonal;
pub use check::{check_gradient, check_gradient_components, check_problem};

/// Objective and constraint values at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Values {
    pub objective: f64,
    pub eq: Vec<f64>,
    pub ineq: Vec<f64>,
}

impl Values {
    pub fn is_finite(&self) -> bool {
        self.objective.is_finite() && self.eq.iter().chain(&self.ineq).all(|v| v.is_finite())
    }

    /// Largest equality residual or positive inequality value.
    pub fn violation(&self) -> f64 {
        let e = self.eq.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        self.ineq.iter().fold(e, |m, g| m.max(*g))
    }
}

/// A constrained program. `evaluate` may return an arbitrary cache that
/// `gradient` then reuses at the same point.
pub trait Problem {
    type Cache;

    fn n_vars(&self) -> usize;
    fn n_eq(&self) -> usize;
    fn n_ineq(&self) -> usize;
    fn lower(&self) -> &[f64];
    fn upper(&self) -> &[f64];

    fn evaluate(&self, x: &[f64]) -> (Values, Self::Cache);

    /// Writes `∇f + J_eqᵀ w_eq + J_ineqᵀ w_ineq` at `x` into `out`.
    fn gradient(&self, x: &[f64], cache: &Self::Cache, w_eq: &[f64], w_ineq: &[f64], out: &mut [f64]);

    /// Approximate inverse of the merit Hessian at `x` for penalty `rho`,
    /// acting as the identity on the `fixed` variables. Used by the
    /// truncated Newton inner solver; plain conjugate gradients without it.
    fn preconditioner(&self, _x: &[f64], _rho: f64, _fixed: &[bool]) -> Option<Box<dyn Preconditioner + '_>> {
        None
    }
}

pub trait Preconditioner {
    fn apply(&self, r: &[f64], out: &mut [f64]);
}

type ValueFn<'a> = Box<dyn Fn(&[f64]) -> f64 + 'a>;
type GradFn<'a> = Box<dyn Fn(&[f64], &mut [f64]) + 'a>;
type ConstraintFn<'a> = Box<dyn Fn(&[f64], &mut [f64]) + 'a>;
type JacTFn<'a> = Box<dyn Fn(&[f64], &[f64], &mut [f64]) + 'a>;

/// A [`Problem`] assembled from closures. Constraint closures fill a value
/// slice; Jacobian closures add `Jᵀw` into the output.
pub struct FnProblem<'a> {
    n: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    objective: ValueFn<'a>,
    objective_grad: GradFn<'a>,
    eq: Option<(usize, ConstraintFn<'a>, JacTFn<'a>)>,
    ineq: Option<(usize, ConstraintFn<'a>, JacTFn<'a>)>,
}

impl<'a> FnProblem<'a> {
    pub fn new(
        n: usize,
        objective: impl Fn(&[f64]) -> f64 + 'a,
        objective_grad: impl Fn(&[f64], &mut [f64]) + 'a,
    ) -> Self {
        FnProblem {
            n,
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
            objective: Box::new(objective),
            objective_grad: Box::new(objective_grad),
            eq: None,
            ineq: None,
        }
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), self.n);
        assert_eq!(upper.len(), self.n);
        assert!(lower.iter().zip(&upper).all(|(l, u)| l <= u), "lower bound above upper bound");
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn with_eq(
        mut self,
        m: usize,
        c: impl Fn(&[f64], &mut [f64]) + 'a,
        jac_t: impl Fn(&[f64], &[f64], &mut [f64]) + 'a,
    ) -> Self {
        self.eq = Some((m, Box::new(c), Box::new(jac_t)));
        self
    }

    pub fn with_ineq(
        mut self,
        m: usize,
        g: impl Fn(&[f64], &mut [f64]) + 'a,
        jac_t: impl Fn(&[f64], &[f64], &mut [f64]) + 'a,
    ) -> Self {
        self.ineq = Some((m, Box::new(g), Box::new(jac_t)));
        self
    }
}

impl Problem for FnProblem<'_> {
    type Cache = ();

    fn n_vars(&self) -> usize {
        self.n
    }

    fn n_eq(&self) -> usize {
        self.eq.as_ref().map_or(0, |e| e.0)
    }

    fn n_ineq(&self) -> usize {
        self.ineq.as_ref().map_or(0, |e| e.0)
    }

    fn lower(&self) -> &[f64] {
        &self.lower
    }

    fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn evaluate(&self, x: &[f64]) -> (Values, ()) {
        let mut eq = vec![0.0; self.n_eq()];
        if let Some((_, c, _)) = &self.eq {
            c(x, &mut eq);
        }
        let mut ineq = vec![0.0; self.n_ineq()];
        if let Some((_, g, _)) = &self.ineq {
            g(x, &mut ineq);
        }
        let objective = (self.objective)(x);
        (Values { objective, eq, ineq }, ())
    }

    fn gradient(&self, x: &[f64], _: &(), w_eq: &[f64], w_ineq: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        (self.objective_grad)(x, out);
        if let Some((_, _, jt)) = &self.eq {
            jt(x, w_eq, out);
        }
        if let Some((_, _, jt)) = &self.ineq {
            jt(x, w_ineq, out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub tol_opt: f64,
    pub tol_feas: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub penalty_init: f64,
    pub penalty_growth: f64,
    pub penalty_max: f64,
    pub multiplier_bound: f64,
    pub inner: InnerMethod,
    pub lbfgs_memory: usize,
    /// Conjugate-gradient iterations per truncated Newton step.
    pub cg_max_iter: usize,
    pub record_iterates: bool,
}

/// Minimizer for the bound-constrained subproblems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerMethod {
    Lbfgs,
    #[default]
    NewtonCg,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_opt: 1e-6,
            tol_feas: 1e-6,
            max_outer: 40,
            max_inner: 1000,
            penalty_init: 1.0,
            penalty_growth: 10.0,
            penalty_max: 1e10,
            multiplier_bound: 1e8,
            inner: InnerMethod::default(),
            lbfgs_memory: 30,
            cg_max_iter: 100,
            record_iterates: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIter,
    Stalled,
    Infeasible,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIter => "max_iter",
            Status::Stalled => "stalled",
            Status::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: Status,
    pub x: Vec<f64>,
    pub objective: f64,
    pub violation: f64,
    /// Projected gradient of the Lagrangian at `x` with the final multipliers.
    pub optimality: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Objective after every accepted inner step, starting with `x0`.
    pub objective_history: Vec<f64>,
    /// Max constraint violation, aligned with `objective_history`.
    pub violation_history: Vec<f64>,
    /// Variables aligned with the histories, when requested.
    pub iterates: Option<Vec<Vec<f64>>>,
    /// Augmented Lagrangian merit at the start and end of each outer iteration.
    pub merit: Vec<(f64, f64)>,
    pub eq_multipliers: Vec<f64>,
    pub ineq_multipliers: Vec<f64>,
    pub message: String,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

/// `‖P(x − g) − x‖_∞`
fn projected_gradient_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for i in 0..x.len() {
        let p = (x[i] - g[i]).clamp(lo[i], hi[i]);
        m = m.max((p - x[i]).abs());
    }
    m
}

/// Multiplier state and the merit built on it.
pub(crate) struct Merit {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub rho: f64,
}

impl Merit {
    pub fn value(&self, v: &Values) -> f64 {
        let rho = self.rho;
        let mut m = v.objective;
        for (l, c) in self.lambda.iter().zip(&v.eq) {
            m += l * c + 0.5 * rho * c * c;
        }
        for (mu, g) in self.mu.iter().zip(&v.ineq) {
            let s = (mu + rho * g).max(0.0);
            m += (s * s - mu * mu) / (2.0 * rho);
        }
        m
    }

    pub fn weights(&self, v: &Values) -> (Vec<f64>, Vec<f64>) {
        let w_eq = self.lambda.iter().zip(&v.eq).map(|(l, c)| l + self.rho * c).collect();
        let w_in = self.mu.iter().zip(&v.ineq).map(|(m, g)| (m + self.rho * g).max(0.0)).collect();
        (w_eq, w_in)
    }
}

/// Recording sink shared with the inner loop.
pub(crate) struct Trace {
    pub objective: Vec<f64>,
    pub violation: Vec<f64>,
    pub iterates: Option<Vec<Vec<f64>>>,
}

impl Trace {
    pub fn push(&mut self, x: &[f64], v: &Values) {
        self.objective.push(v.objective);
        self.violation.push(v.violation());
        if let Some(it) = &mut self.iterates {
            it.push(x.to_vec());
        }
    }
}

/// Minimizes `p` from `x0` (projected onto the bounds first).
pub fn solve<P: Problem>(p: &P, x0: &[f64], opts: &SolverOptions) -> SolveReport {
    assert_eq!(x0.len(), p.n_vars(), "initial point has wrong length");
    let (lo, hi) = (p.lower(), p.upper());
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);

    let mut merit = Merit {
        lambda: vec![0.0; p.n_eq()],
        mu: vec![0.0; p.n_ineq()],
        rho: opts.penalty_init,
    };
    let mut trace = Trace {
        objective: Vec::new(),
        violation: Vec::new(),
        iterates: opts.record_iterates.then(Vec::new),
    };
    let mut merit_log = Vec::new();
    let mut inner_total = 0;

    let (mut vals, _) = p.evaluate(&x);
    trace.push(&x, &vals);
    if !vals.is_finite() {
        return finish(p, x, vals, &merit, trace, merit_log, 0, 0, Status::Stalled, "non-finite values at the initial point".into(), opts);
    }

    let mut prev_violation = vals.violation();
    let mut inner_tol = 1e-2f64.max(opts.tol_opt);
    let mut stalled_rounds = 0;
    for outer in 1..=opts.max_outer {
        let start = merit.value(&vals);
        let inner = match opts.inner {
            InnerMethod::Lbfgs => lbfgs::minimize(p, &mut x, &merit, inner_tol, opts, &mut trace),
            InnerMethod::NewtonCg => newton::minimize(p, &mut x, &merit, inner_tol, opts, &mut trace),
        };
        inner_total += inner.iterations;
        vals = inner.values;
        merit_log.push((start, merit.value(&vals)));
        if inner.non_finite {
            return finish(p, x, vals, &merit, trace, merit_log, outer, inner_total, Status::Stalled, "non-finite objective or constraint value".into(), opts);
        }

        let violation = vals.violation();
        let (w_eq, w_in) = merit.weights(&vals);
        let bound = opts.multiplier_bound;
        merit.lambda = w_eq.iter().map(|l| l.clamp(-bound, bound)).collect();
        merit.mu = w_in.iter().map(|m| m.min(bound)).collect();

        if violation <= opts.tol_feas && inner.optimality <= opts.tol_opt {
            return finish(p, x, vals, &merit, trace, merit_log, outer, inner_total, Status::Converged, String::new(), opts);
        }
        stalled_rounds = if inner.iterations == 0 { stalled_rounds + 1 } else { 0 };
        if stalled_rounds >= 3 && violation <= opts.tol_feas {
            return finish(p, x, vals, &merit, trace, merit_log, outer, inner_total, Status::Stalled, "no progress in three outer iterations".into(), opts);
        }
        if violation > 0.25 * prev_violation && violation > opts.tol_feas {
            merit.rho = (merit.rho * opts.penalty_growth).min(opts.penalty_max);
        }
        prev_violation = violation;
        inner_tol = (inner_tol * 0.1).max(opts.tol_opt);
    }
    let status = if vals.violation() > opts.tol_feas { Status::Infeasible } else { Status::MaxIter };
    let msg = format!("stopped after {} outer iterations", opts.max_outer);
    finish(p, x, vals, &merit, trace, merit_log, opts.max_outer, inner_total, status, msg, opts)
}

#[allow(clippy::too_many_arguments)]
fn finish<P: Problem>(
    p: &P,
    x: Vec<f64>,
    vals: Values,
    merit: &Merit,
    trace: Trace,
    merit_log: Vec<(f64, f64)>,
    outer: usize,
    inner: usize,
    status: Status,
    message: String,
    _opts: &SolverOptions,
) -> SolveReport {
    let optimality = if vals.is_finite() {
        let (_, cache) = p.evaluate(&x);
        let mut g = vec![0.0; x.len()];
        p.gradient(&x, &cache, &merit.lambda, &merit.mu, &mut g);
        projected_gradient_norm(&x, &g, p.lower(), p.upper())
    } else {
        f64::NAN
    };
    SolveReport {
        status,
        objective: vals.objective,
        violation: vals.violation(),
        optimality,
        x,
        outer_iterations: outer,
        inner_iterations: inner,
        objective_history: trace.objective,
        violation_history: trace.violation,
        iterates: trace.iterates,
        merit: merit_log,
        eq_multipliers: merit.lambda.clone(),
        ineq_multipliers: merit.mu.clone(),
        message,
    }
}

/// `f + Σ w_eq·c + Σ w_ineq·g` and its gradient, for gradient verification.
pub fn lagrangian<P: Problem>(p: &P, x: &[f64], w_eq: &[f64], w_ineq: &[f64]) -> (f64, Vec<f64>) {
    let (v, cache) = p.evaluate(x);
    let mut g = vec![0.0; x.len()];
    p.gradient(x, &cache, w_eq, w_ineq, &mut g);
    let value = v.objective
        + v.eq.iter().zip(w_eq).map(|(a, b)| a * b).sum::<f64>()
        + v.ineq.iter().zip(w_ineq).map(|(a, b)| a * b).sum::<f64>();
    (value, g)
}
