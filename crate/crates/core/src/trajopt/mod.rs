//! Quantum gate synthesis as a nonlinear program.
//!
//! Two formulations share one objective:
//!
//! * direct: states `U_k` (and, for the adjoint objective, the error
//!   derivatives `∂U_k/∂ε_c`) are decision variables next to the controls;
//!   the zero-order-hold dynamics are equality constraints per interval;
//! * indirect: controls only; states come from a rollout and gradients from
//!   reverse accumulation through the stored step propagators.
//!
//! In both, `ü` is free per interval and `u`, `u̇` are tied to it by the
//! linear chain `u_{k+1} = u_k + Δt·u̇_k`, `u̇_{k+1} = u̇_k + Δt·ü_k`.

mod cost;
mod layout;
mod precond;

use serde::{Deserialize, Serialize};

use crate::algebra::CMatrix;
use crate::dynamics::{
    hamiltonian_at, rollout, ControlSystem, ControlTrajectory, ErrorModel, GateTarget, JointStep,
};
use crate::error::{Error, Result};
use crate::metrics::MAX_ORDER;
use crate::nlp::{Preconditioner, Problem, SolveReport, Values};
use crate::sample;

use cost::{Cost, CostGrad};
pub use layout::VariableLayout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "order", rename_all = "snake_case")]
pub enum Objective {
    None,
    Toggling(usize),
    Universal(usize),
    Adjoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    #[default]
    Direct,
    Indirect,
}

/// A magnitude cap, shared by all channels or given per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cap {
    Uniform(f64),
    PerChannel(Vec<f64>),
}

impl Cap {
    pub fn get(&self, j: usize) -> f64 {
        match self {
            Cap::Uniform(v) => *v,
            Cap::PerChannel(v) => v[j],
        }
    }

    fn validate(&self, name: &str, n: usize) -> Result<()> {
        let vals: &[f64] = match self {
            Cap::Uniform(v) => std::slice::from_ref(v),
            Cap::PerChannel(v) => {
                if v.len() != n {
                    return Err(Error::InvalidProblem(format!("{name} bound has {} entries for {n} controls", v.len())));
                }
                v
            }
        };
        if vals.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidProblem(format!("{name} bound must be positive")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlBounds {
    pub u: Option<Cap>,
    pub du: Option<Cap>,
    pub ddu: Option<Cap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub system: ControlSystem,
    pub target: GateTarget,
    pub n_knots: usize,
    pub dt: f64,
    pub objective: Objective,
    pub error: ErrorModel,
    /// Robustness weight `Q`.
    pub q: f64,
    /// Regularization weight `R`.
    pub r: f64,
    /// Weight of the soft infidelity term `1 − F²`.
    #[serde(default)]
    pub fidelity_weight: f64,
    pub fidelity_min: Option<f64>,
    #[serde(default)]
    pub bounds: ControlBounds,
    #[serde(default)]
    pub formulation: Formulation,
    /// Whether the control boxes are enforced. When false they only scale
    /// the initial guess and serve as reporting thresholds.
    #[serde(default = "default_true")]
    pub constrain_controls: bool,
}

fn default_true() -> bool {
    true
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        let sys = ControlSystem::new(
            self.system.drift().clone(),
            self.system.controls().to_vec(),
            self.system.labels().to_vec(),
        )?;
        GateTarget::new(self.target.goal().clone())?;
        ErrorModel::new(self.error.channels().to_vec())?;
        let d = sys.dim();
        if self.target.goal().dim() != d || self.error.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: if self.target.goal().dim() != d { self.target.goal().dim() } else { self.error.dim() },
            });
        }
        if self.n_knots < 2 {
            return Err(Error::InvalidProblem(format!("need at least 2 knots, got {}", self.n_knots)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidProblem(format!("timestep must be positive, got {}", self.dt)));
        }
        for (name, w) in [("Q", self.q), ("R", self.r), ("fidelity_weight", self.fidelity_weight)] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidProblem(format!("{name} must be a finite non-negative weight, got {w}")));
            }
        }
        if let Some(f) = self.fidelity_min {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidProblem(format!("fidelity_min must lie in (0, 1], got {f}")));
            }
        }
        match self.objective {
            Objective::Toggling(j) | Objective::Universal(j) if j > MAX_ORDER => {
                return Err(Error::OrderTooHigh { order: j, max: MAX_ORDER });
            }
            Objective::Universal(_) if !self.error.is_static() => return Err(Error::TimeDependentUniversal),
            _ => {}
        }
        self.error.sequences(self.n_knots - 1)?;
        let j = sys.n_controls();
        for (name, cap) in [("u", &self.bounds.u), ("du", &self.bounds.du), ("ddu", &self.bounds.ddu)] {
            if let Some(c) = cap {
                c.validate(name, j)?;
            }
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        (self.n_knots - 1) as f64 * self.dt
    }

    fn uses_derivative_states(&self) -> bool {
        self.objective == Objective::Adjoint
    }
}

/// `Σ_k ‖u_k‖² + ‖u̇_k‖² + ‖ü_k‖²` with its gradient, flattened as `u`, `u̇`,
/// `ü` rows.
pub fn regularization(traj: &ControlTrajectory) -> (f64, Vec<f64>) {
    let flat: Vec<f64> = traj.u.iter().chain(&traj.du).chain(&traj.ddu).flatten().copied().collect();
    let value = flat.iter().map(|v| v * v).sum();
    (value, flat.iter().map(|v| 2.0 * v).collect())
}

/// A built program; implements [`Problem`].
pub struct TrajProblem {
    spec: ProblemSpec,
    formulation: Formulation,
    layout: VariableLayout,
    cost: Cost,
    lower: Vec<f64>,
    upper: Vec<f64>,
    n_eq: usize,
}

pub struct EvalCache {
    states: Vec<Vec<CMatrix>>,
    hams: Vec<CMatrix>,
    steps: Vec<JointStep>,
}

pub fn build_direct(spec: &ProblemSpec) -> Result<TrajProblem> {
    TrajProblem::new(spec, Formulation::Direct)
}

pub fn build_indirect(spec: &ProblemSpec) -> Result<TrajProblem> {
    TrajProblem::new(spec, Formulation::Indirect)
}

/// Builds the formulation named in the spec.
pub fn build(spec: &ProblemSpec) -> Result<TrajProblem> {
    TrajProblem::new(spec, spec.formulation)
}

impl TrajProblem {
    fn new(spec: &ProblemSpec, formulation: Formulation) -> Result<Self> {
        spec.validate()?;
        let d = spec.system.dim();
        let j = spec.system.n_controls();
        let n = spec.n_knots;
        let deriv_blocks = if spec.uses_derivative_states() { spec.error.n_channels() } else { 0 };
        let layout = VariableLayout {
            n_knots: n,
            n_controls: j,
            dim: d,
            blocks: match formulation {
                Formulation::Direct => 1 + deriv_blocks,
                Formulation::Indirect => 0,
            },
        };
        let mut lower = vec![f64::NEG_INFINITY; layout.len()];
        let mut upper = vec![f64::INFINITY; layout.len()];
        if formulation == Formulation::Direct {
            // Entries of a unitary have modulus at most one. Without this box
            // the fidelity terms are unbounded below off the unitary manifold.
            for k in 1..n {
                let off = layout.state_offset(k, 0);
                lower[off..off + layout.block_len()].fill(-1.0);
                upper[off..off + layout.block_len()].fill(1.0);
            }
            // U₁ = I and D_{c,1} = 0, fixed through the bounds
            let mut fixed = vec![0.0; layout.block_len()];
            layout::pack_into(&CMatrix::identity(d), &mut fixed);
            for b in 0..layout.blocks {
                let off = layout.state_offset(0, b);
                for i in 0..layout.block_len() {
                    let v = if b == 0 { fixed[i] } else { 0.0 };
                    lower[off + i] = v;
                    upper[off + i] = v;
                }
            }
        }
        if spec.constrain_controls {
            for k in 0..n {
                for c in 0..j {
                    let mut set = |idx: usize, cap: &Option<Cap>| {
                        if let Some(cap) = cap {
                            lower[idx] = -cap.get(c);
                            upper[idx] = cap.get(c);
                        }
                    };
                    set(layout.u(k, c), &spec.bounds.u);
                    set(layout.du(k, c), &spec.bounds.du);
                    if k + 1 < n {
                        set(layout.ddu(k, c), &spec.bounds.ddu);
                    }
                }
            }
        }
        let dynamics_eq = match formulation {
            Formulation::Direct => (n - 1) * layout.blocks * layout.block_len(),
            Formulation::Indirect => 0,
        };
        let cost = Cost {
            objective: spec.objective,
            q: spec.q,
            fidelity_weight: spec.fidelity_weight,
            errors: spec.error.sequences(n - 1)?,
            goal: spec.target.goal().clone(),
            control_ops: spec.system.controls().to_vec(),
            dt: spec.dt,
            tf: spec.duration(),
        };
        Ok(TrajProblem {
            spec: spec.clone(),
            formulation,
            layout,
            cost,
            lower,
            upper,
            n_eq: dynamics_eq + 2 * (n - 1) * j,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn formulation(&self) -> Formulation {
        self.formulation
    }

    pub fn layout(&self) -> &VariableLayout {
        &self.layout
    }

    fn n_derivs(&self) -> usize {
        if self.spec.uses_derivative_states() {
            self.spec.error.n_channels()
        } else {
            0
        }
    }

    pub fn trajectory(&self, x: &[f64]) -> Result<ControlTrajectory> {
        self.layout.trajectory(x, self.spec.dt)
    }

    fn hamiltonians(&self, x: &[f64]) -> Result<Vec<CMatrix>> {
        (0..self.spec.n_knots - 1)
            .map(|k| hamiltonian_at(&self.spec.system, &self.layout.control_row(x, k)))
            .collect()
    }

    fn steps(&self, hams: &[CMatrix]) -> Result<Vec<JointStep>> {
        let nd = self.n_derivs();
        hams.iter()
            .enumerate()
            .map(|(k, h)| {
                let errs: Vec<CMatrix> = self.cost.errors[..nd].iter().map(|s| s[k].clone()).collect();
                JointStep::new(h, &errs, self.spec.dt)
            })
            .collect()
    }

    fn roll(&self, steps: &[JointStep]) -> Vec<Vec<CMatrix>> {
        let d = self.spec.system.dim();
        let mut state: Vec<CMatrix> = std::iter::once(CMatrix::identity(d))
            .chain((0..self.n_derivs()).map(|_| CMatrix::zeros(d)))
            .collect();
        let mut out = vec![state.clone()];
        for s in steps {
            state = s.apply(&state);
            out.push(state.clone());
        }
        out
    }

    fn cache(&self, x: &[f64]) -> Result<EvalCache> {
        let hams = self.hamiltonians(x)?;
        let steps = self.steps(&hams)?;
        let states = match self.formulation {
            Formulation::Direct => self.layout.states(x),
            Formulation::Indirect => self.roll(&steps),
        };
        Ok(EvalCache { states, hams, steps })
    }

    fn control_slice<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.layout.u_offset()..]
    }

    /// Seeded initial point: smooth random controls scaled into half of each
    /// control box (so the derivative chain holds exactly), with states from
    /// a rollout in the direct layout.
    pub fn initialize(&self, seed: u64) -> Result<Vec<f64>> {
        let n = self.spec.n_knots;
        let j = self.spec.system.n_controls();
        let mut rng = sample::rng(seed);
        let mut traj = ControlTrajectory::from_controls(self.spec.dt, sample::smooth_controls(&mut rng, n, j))?;
        let b = &self.spec.bounds;
        for c in 0..j {
            let peak = |rows: &[Vec<f64>]| rows.iter().fold(0.0f64, |m, r| m.max(r[c].abs()));
            let mut s = f64::INFINITY;
            for (cap, rows) in [(&b.u, &traj.u), (&b.du, &traj.du), (&b.ddu, &traj.ddu)] {
                if let Some(cap) = cap {
                    let p = peak(rows);
                    if p > 0.0 {
                        s = s.min(0.5 * cap.get(c) / p);
                    }
                }
            }
            if !s.is_finite() {
                s = 0.5;
            }
            for rows in [&mut traj.u, &mut traj.du, &mut traj.ddu] {
                rows.iter_mut().for_each(|r| r[c] *= s);
            }
        }
        self.point_from_trajectory(&traj)
    }

    /// Decision vector for the given controls, with rollout-consistent states.
    pub fn point_from_trajectory(&self, traj: &ControlTrajectory) -> Result<Vec<f64>> {
        if traj.n_knots() != self.spec.n_knots || traj.n_controls() != self.spec.system.n_controls() {
            return Err(Error::InvalidTrajectory("trajectory shape does not match the problem".into()));
        }
        let mut x = vec![0.0; self.layout.len()];
        self.layout.set_trajectory(&mut x, traj);
        if self.formulation == Formulation::Direct {
            let hams = self.hamiltonians(&x)?;
            let states = self.roll(&self.steps(&hams)?);
            for (k, blocks) in states.iter().enumerate() {
                for (b, m) in blocks.iter().enumerate() {
                    self.layout.set_state(&mut x, k, b, m);
                }
            }
        }
        Ok(x)
    }

    /// Fidelity of the rolled-out controls.
    pub fn fidelity(&self, x: &[f64]) -> Result<f64> {
        let traj = self.trajectory(x)?;
        let u = rollout(&self.spec.system, &traj)?;
        crate::dynamics::fidelity(u.final_unitary(), &self.spec.target)
    }

    /// Fidelity read from the final state variables (direct) or rollout.
    pub fn state_fidelity(&self, x: &[f64]) -> Result<f64> {
        match self.formulation {
            Formulation::Direct => Ok(self.cost.fidelity_sq(&self.layout.state(x, self.spec.n_knots - 1, 0)).sqrt()),
            Formulation::Indirect => self.fidelity(x),
        }
    }

    /// Largest entry of the dynamics residual; zero for the indirect form.
    pub fn dynamics_residual(&self, x: &[f64]) -> Result<f64> {
        if self.formulation == Formulation::Indirect {
            return Ok(0.0);
        }
        let c = self.cache(x)?;
        let mut m = 0.0f64;
        for (k, step) in c.steps.iter().enumerate() {
            for (next, got) in step.apply(&c.states[k]).iter().zip(&c.states[k + 1]) {
                m = m.max(next.max_abs_diff(got));
            }
        }
        Ok(m)
    }

    fn objective_value(&self, x: &[f64], c: &EvalCache) -> Result<f64> {
        let reg: f64 = self.control_slice(x).iter().map(|v| v * v).sum();
        Ok(self.cost.value(&c.states, &c.hams)? + self.spec.r * reg)
    }

    fn try_evaluate(&self, x: &[f64]) -> Result<(Values, EvalCache)> {
        let c = self.cache(x)?;
        let l = &self.layout;
        let (n, j, dt) = (self.spec.n_knots, self.spec.system.n_controls(), self.spec.dt);
        let mut eq = Vec::with_capacity(self.n_eq);
        if self.formulation == Formulation::Direct {
            let mut buf = vec![0.0; l.block_len()];
            for (k, step) in c.steps.iter().enumerate() {
                for (next, got) in step.apply(&c.states[k]).iter().zip(&c.states[k + 1]) {
                    layout::pack_into(&(got - next), &mut buf);
                    eq.extend_from_slice(&buf);
                }
            }
        }
        for k in 0..n - 1 {
            for i in 0..j {
                eq.push(x[l.u(k + 1, i)] - x[l.u(k, i)] - dt * x[l.du(k, i)]);
            }
        }
        for k in 0..n - 1 {
            for i in 0..j {
                eq.push(x[l.du(k + 1, i)] - x[l.du(k, i)] - dt * x[l.ddu(k, i)]);
            }
        }
        let ineq = match self.spec.fidelity_min {
            Some(f) => vec![f * f - self.cost.fidelity_sq(&c.states[n - 1][0])],
            None => vec![],
        };
        let objective = self.objective_value(x, &c)?;
        Ok((Values { objective, eq, ineq }, c))
    }

    fn try_gradient(&self, x: &[f64], c: &EvalCache, w_eq: &[f64], w_in: &[f64], out: &mut [f64]) -> Result<()> {
        let l = &self.layout;
        let (n, j, dt) = (self.spec.n_knots, self.spec.system.n_controls(), self.spec.dt);
        let d = self.spec.system.dim();
        let ops = self.spec.system.controls();
        out.fill(0.0);
        let u0 = l.u_offset();
        for (o, v) in out[u0..].iter_mut().zip(&x[u0..]) {
            *o = 2.0 * self.spec.r * v;
        }

        let blocks = 1 + self.n_derivs();
        let mut cg = CostGrad::zeros(n, blocks, d, j);
        let fid_extra = w_in.first().copied().unwrap_or(0.0);
        self.cost.grad(&c.states, &c.hams, fid_extra, &mut cg)?;

        let mut eq_at = 0;
        match self.formulation {
            Formulation::Direct => {
                let bl = l.block_len();
                for (k, step) in c.steps.iter().enumerate() {
                    let w: Vec<CMatrix> = (0..blocks)
                        .map(|b| layout::unpack(&w_eq[eq_at + b * bl..][..bl], d))
                        .collect();
                    eq_at += blocks * bl;
                    let (gs, gu) = step.vjp(&w, &c.states[k], ops, dt)?;
                    for b in 0..blocks {
                        cg.states[k + 1][b] += &w[b];
                        cg.states[k][b] -= &gs[b];
                    }
                    for (g, v) in cg.controls[k].iter_mut().zip(gu) {
                        *g -= v;
                    }
                }
                for k in 0..n {
                    for b in 0..blocks {
                        l.add_state_grad(out, k, b, &cg.states[k][b], 1.0);
                    }
                }
            }
            Formulation::Indirect => {
                let mut lam = cg.states[n - 1].clone();
                for k in (0..n - 1).rev() {
                    let (gs, gu) = c.steps[k].vjp(&lam, &c.states[k], ops, dt)?;
                    for (g, v) in cg.controls[k].iter_mut().zip(gu) {
                        *g += v;
                    }
                    lam = cg.states[k].iter().zip(&gs).map(|(a, b)| a + b).collect();
                }
            }
        }
        for k in 0..n {
            for i in 0..j {
                out[l.u(k, i)] += cg.controls[k][i];
            }
        }
        for k in 0..n - 1 {
            for i in 0..j {
                let w = w_eq[eq_at + k * j + i];
                out[l.u(k + 1, i)] += w;
                out[l.u(k, i)] -= w;
                out[l.du(k, i)] -= dt * w;
            }
        }
        eq_at += (n - 1) * j;
        for k in 0..n - 1 {
            for i in 0..j {
                let w = w_eq[eq_at + k * j + i];
                out[l.du(k + 1, i)] += w;
                out[l.du(k, i)] -= w;
                out[l.ddu(k, i)] -= dt * w;
            }
        }
        Ok(())
    }
}

impl Problem for TrajProblem {
    type Cache = Option<EvalCache>;

    fn n_vars(&self) -> usize {
        self.layout.len()
    }

    fn n_eq(&self) -> usize {
        self.n_eq
    }

    fn n_ineq(&self) -> usize {
        usize::from(self.spec.fidelity_min.is_some())
    }

    fn lower(&self) -> &[f64] {
        &self.lower
    }

    fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn evaluate(&self, x: &[f64]) -> (Values, Option<EvalCache>) {
        match self.try_evaluate(x) {
            Ok((v, c)) => (v, Some(c)),
            Err(_) => (
                Values {
                    objective: f64::NAN,
                    eq: vec![f64::NAN; self.n_eq],
                    ineq: vec![f64::NAN; self.n_ineq()],
                },
                None,
            ),
        }
    }

    fn gradient(&self, x: &[f64], cache: &Option<EvalCache>, w_eq: &[f64], w_ineq: &[f64], out: &mut [f64]) {
        let ok = cache
            .as_ref()
            .map(|c| self.try_gradient(x, c, w_eq, w_ineq, out).is_ok())
            .unwrap_or(false);
        if !ok {
            out.fill(f64::NAN);
        }
    }

    fn preconditioner(&self, x: &[f64], rho: f64, fixed: &[bool]) -> Option<Box<dyn Preconditioner + '_>> {
        match self.gauss_newton(x, rho, fixed) {
            Ok(Some(m)) => Some(Box::new(m)),
            _ => None,
        }
    }
}

/// Per-iterate summary for constraint studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateStats {
    pub iteration: usize,
    pub max_du: f64,
    pub max_ddu: f64,
    pub objective: f64,
    pub fidelity: f64,
}

/// Control-derivative maxima over all knots and channels, objective and
/// fidelity for every recorded iterate.
pub fn analyze_iterates(problem: &TrajProblem, report: &SolveReport) -> Result<Vec<IterateStats>> {
    let iterates = report
        .iterates
        .as_ref()
        .ok_or_else(|| Error::InvalidProblem("solve report has no iterate snapshots".into()))?;
    iterates
        .iter()
        .zip(&report.objective_history)
        .enumerate()
        .map(|(i, (x, &objective))| {
            let traj = problem.trajectory(x)?;
            Ok(IterateStats {
                iteration: i,
                max_du: traj.max_abs_du(),
                max_ddu: traj.max_abs_ddu(),
                objective,
                fidelity: problem.state_fidelity(x)?,
            })
        })
        .collect()
}
