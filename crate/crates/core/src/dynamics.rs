//! Controlled closed-system dynamics under zero-order hold.
//!
//! A trajectory has `N` knots and `N − 1` intervals; the control at knot `k`
//! is held over interval `k`, so `t_f = (N − 1)·Δt`.

use serde::{Deserialize, Serialize};

use crate::algebra::{expm, expm_frechet, CMatrix, PauliString, C64};
use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSystem {
    drift: CMatrix,
    controls: Vec<CMatrix>,
    labels: Vec<String>,
}

impl ControlSystem {
    pub fn new(drift: CMatrix, controls: Vec<CMatrix>, labels: Vec<String>) -> Result<Self> {
        let d = drift.dim();
        if labels.len() != controls.len() {
            return Err(Error::InvalidProblem(format!(
                "{} control labels for {} control operators",
                labels.len(),
                controls.len()
            )));
        }
        if !drift.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::NotHermitian("drift".into()));
        }
        for (h, label) in controls.iter().zip(&labels) {
            if h.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: h.dim() });
            }
            if !h.is_hermitian(HERMITIAN_TOL) {
                return Err(Error::NotHermitian(label.clone()));
            }
        }
        Ok(ControlSystem { drift, controls, labels })
    }

    /// Control operators given as Pauli strings; the drift is zero.
    pub fn from_paulis(controls: &[PauliString]) -> Result<Self> {
        let first = controls
            .first()
            .ok_or_else(|| Error::InvalidProblem("no control operators".into()))?;
        let d = 1usize << first.n_qubits();
        ControlSystem::new(
            CMatrix::zeros(d),
            controls.iter().map(|p| p.matrix()).collect(),
            controls.iter().map(|p| p.label()).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    pub fn n_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn drift(&self) -> &CMatrix {
        &self.drift
    }

    pub fn controls(&self) -> &[CMatrix] {
        &self.controls
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Largest normalized norm `‖H(u)‖ = sqrt((1/d)Tr H²)` over the knots, the
    /// scale in `Δt·‖H‖`. For a single qubit this is the spectral norm.
    pub fn max_generator_norm(&self, traj: &ControlTrajectory) -> Result<f64> {
        let mut m = 0.0f64;
        for u in &traj.u {
            m = m.max(crate::algebra::hs_norm_sq(&hamiltonian_at(self, u)?).sqrt());
        }
        Ok(m)
    }
}

/// Knot-point controls with their first and second time derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlTrajectory {
    pub dt: f64,
    /// `N × J`
    pub u: Vec<Vec<f64>>,
    /// `N × J`
    pub du: Vec<Vec<f64>>,
    /// `(N − 1) × J`, one per interval
    pub ddu: Vec<Vec<f64>>,
}

impl ControlTrajectory {
    pub fn new(dt: f64, u: Vec<Vec<f64>>, du: Vec<Vec<f64>>, ddu: Vec<Vec<f64>>) -> Result<Self> {
        let t = ControlTrajectory { dt, u, du, ddu };
        t.validate()?;
        Ok(t)
    }

    /// Builds `u̇` and `ü` by forward differences so the derivative chain
    /// `u_{k+1} = u_k + Δt·u̇_k`, `u̇_{k+1} = u̇_k + Δt·ü_k` holds exactly.
    /// The last interval's acceleration is zero.
    pub fn from_controls(dt: f64, u: Vec<Vec<f64>>) -> Result<Self> {
        let n = u.len();
        if n < 2 {
            return Err(Error::InvalidTrajectory(format!("need at least 2 knots, got {n}")));
        }
        let j = u[0].len();
        let mut du = vec![vec![0.0; j]; n];
        for k in 0..n - 1 {
            for c in 0..j {
                du[k][c] = (u[k + 1][c] - u[k][c]) / dt;
            }
        }
        du[n - 1] = du[n - 2].clone();
        let mut ddu = vec![vec![0.0; j]; n - 1];
        for k in 0..n - 2 {
            for c in 0..j {
                ddu[k][c] = (du[k + 1][c] - du[k][c]) / dt;
            }
        }
        ControlTrajectory::new(dt, u, du, ddu)
    }

    /// Constant controls over `n` knots.
    pub fn constant(dt: f64, n: usize, value: &[f64]) -> Result<Self> {
        Self::from_controls(dt, vec![value.to_vec(); n])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.u.len();
        if n < 2 {
            return Err(Error::InvalidTrajectory(format!("need at least 2 knots, got {n}")));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidTrajectory(format!("timestep must be positive, got {}", self.dt)));
        }
        let j = self.u[0].len();
        if self.du.len() != n || self.ddu.len() != n - 1 {
            return Err(Error::InvalidTrajectory(format!(
                "derivative lengths {}/{} do not match {n} knots",
                self.du.len(),
                self.ddu.len()
            )));
        }
        let rows = self.u.iter().chain(&self.du).chain(&self.ddu);
        for row in rows {
            if row.len() != j {
                return Err(Error::InvalidTrajectory("ragged control rows".into()));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidTrajectory("non-finite control value".into()));
            }
        }
        Ok(())
    }

    pub fn n_knots(&self) -> usize {
        self.u.len()
    }

    pub fn n_intervals(&self) -> usize {
        self.u.len() - 1
    }

    pub fn n_controls(&self) -> usize {
        self.u[0].len()
    }

    pub fn duration(&self) -> f64 {
        self.n_intervals() as f64 * self.dt
    }

    /// Largest residual of the finite-difference derivative chain.
    pub fn chain_residual(&self) -> f64 {
        let mut r = 0.0f64;
        for k in 0..self.n_intervals() {
            for c in 0..self.n_controls() {
                r = r.max((self.u[k + 1][c] - self.u[k][c] - self.dt * self.du[k][c]).abs());
                r = r.max((self.du[k + 1][c] - self.du[k][c] - self.dt * self.ddu[k][c]).abs());
            }
        }
        r
    }

    pub fn max_abs_u(&self) -> f64 {
        max_abs(&self.u)
    }

    pub fn max_abs_du(&self) -> f64 {
        max_abs(&self.du)
    }

    pub fn max_abs_ddu(&self) -> f64 {
        max_abs(&self.ddu)
    }
}

fn max_abs(rows: &[Vec<f64>]) -> f64 {
    rows.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryTrajectory {
    pub knots: Vec<CMatrix>,
    pub dt: f64,
}

impl UnitaryTrajectory {
    pub fn duration(&self) -> f64 {
        (self.knots.len() - 1) as f64 * self.dt
    }

    pub fn final_unitary(&self) -> &CMatrix {
        self.knots.last().expect("non-empty trajectory")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateTarget {
    goal: CMatrix,
}

impl GateTarget {
    pub fn new(goal: CMatrix) -> Result<Self> {
        if goal.unitarity_defect() > 1e-10 {
            return Err(Error::InvalidProblem("gate target is not unitary".into()));
        }
        Ok(GateTarget { goal })
    }

    pub fn goal(&self) -> &CMatrix {
        &self.goal
    }
}

/// Operator of one error channel: constant, or one operator per interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelOperator {
    Static(CMatrix),
    PerKnot(Vec<CMatrix>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorChannel {
    pub label: String,
    pub weight: f64,
    pub operator: ChannelOperator,
}

/// Independent coherent error sources. Channel `c` perturbs the generator as
/// `H + ε_c·w_c·E_c`; susceptibilities of a model are the sums of the
/// per-channel susceptibilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    channels: Vec<ErrorChannel>,
}

impl ErrorModel {
    pub fn new(channels: Vec<ErrorChannel>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidProblem("error model has no channels".into()));
        }
        let mut dim = None;
        for ch in &channels {
            let ops: &[CMatrix] = match &ch.operator {
                ChannelOperator::Static(m) => std::slice::from_ref(m),
                ChannelOperator::PerKnot(seq) => seq,
            };
            if ops.is_empty() {
                return Err(Error::InvalidProblem(format!("channel `{}` has no operators", ch.label)));
            }
            for op in ops {
                if *dim.get_or_insert(op.dim()) != op.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: dim.unwrap(),
                        got: op.dim(),
                    });
                }
                if !op.is_hermitian(HERMITIAN_TOL) {
                    return Err(Error::NotHermitian(ch.label.clone()));
                }
            }
            if !ch.weight.is_finite() {
                return Err(Error::InvalidProblem(format!("channel `{}` weight is not finite", ch.label)));
            }
        }
        Ok(ErrorModel { channels })
    }

    /// One static channel with unit weight.
    pub fn single(label: &str, op: CMatrix) -> Result<Self> {
        Self::new(vec![ErrorChannel {
            label: label.into(),
            weight: 1.0,
            operator: ChannelOperator::Static(op),
        }])
    }

    pub fn from_paulis(channels: &[(PauliString, f64)]) -> Result<Self> {
        Self::new(
            channels
                .iter()
                .map(|(p, w)| ErrorChannel {
                    label: p.label(),
                    weight: *w,
                    operator: ChannelOperator::Static(p.matrix()),
                })
                .collect(),
        )
    }

    /// One channel with an explicit operator per interval.
    pub fn time_dependent(label: &str, ops: Vec<CMatrix>) -> Result<Self> {
        Self::new(vec![ErrorChannel {
            label: label.into(),
            weight: 1.0,
            operator: ChannelOperator::PerKnot(ops),
        }])
    }

    pub fn channels(&self) -> &[ErrorChannel] {
        &self.channels
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn dim(&self) -> usize {
        match &self.channels[0].operator {
            ChannelOperator::Static(m) => m.dim(),
            ChannelOperator::PerKnot(s) => s[0].dim(),
        }
    }

    pub fn is_static(&self) -> bool {
        self.channels
            .iter()
            .all(|c| matches!(c.operator, ChannelOperator::Static(_)))
    }

    /// Multiplies every channel weight by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut m = self.clone();
        for ch in &mut m.channels {
            ch.weight *= c;
        }
        m
    }

    /// Weighted operators `w_c·E_{c,k}` for each channel over `n_intervals`.
    /// Static channels are expanded to a constant sequence.
    pub fn sequences(&self, n_intervals: usize) -> Result<Vec<Vec<CMatrix>>> {
        self.channels
            .iter()
            .map(|ch| match &ch.operator {
                ChannelOperator::Static(m) => Ok(vec![m.scale_real(ch.weight); n_intervals]),
                ChannelOperator::PerKnot(seq) => {
                    if seq.len() != n_intervals {
                        return Err(Error::InvalidTrajectory(format!(
                            "channel `{}` has {} operators for {} intervals",
                            ch.label,
                            seq.len(),
                            n_intervals
                        )));
                    }
                    Ok(seq.iter().map(|m| m.scale_real(ch.weight)).collect())
                }
            })
            .collect()
    }

    /// Weighted static operators; errors for time-dependent channels.
    pub fn static_operators(&self) -> Result<Vec<CMatrix>> {
        self.channels
            .iter()
            .map(|ch| match &ch.operator {
                ChannelOperator::Static(m) => Ok(m.scale_real(ch.weight)),
                ChannelOperator::PerKnot(_) => Err(Error::TimeDependentUniversal),
            })
            .collect()
    }
}

fn check_controls(sys: &ControlSystem, u: &[f64]) -> Result<()> {
    if u.len() != sys.n_controls() {
        return Err(Error::DimensionMismatch {
            expected: sys.n_controls(),
            got: u.len(),
        });
    }
    Ok(())
}

/// `H₀ + Σ_j u_j H_j`
pub fn hamiltonian_at(sys: &ControlSystem, u: &[f64]) -> Result<CMatrix> {
    check_controls(sys, u)?;
    let mut h = sys.drift.clone();
    for (x, hj) in u.iter().zip(&sys.controls) {
        if *x != 0.0 {
            h.axpy(C64::new(*x, 0.0), hj);
        }
    }
    Ok(h)
}

/// `exp(−i H(u) Δt)`
pub fn step_propagator(sys: &ControlSystem, u: &[f64], dt: f64) -> Result<CMatrix> {
    if !(dt > 0.0) {
        return Err(Error::InvalidTrajectory(format!("timestep must be positive, got {dt}")));
    }
    let h = hamiltonian_at(sys, u)?;
    expm(&h.scale(C64::new(0.0, -dt)))
}

fn check_traj(sys: &ControlSystem, traj: &ControlTrajectory) -> Result<()> {
    traj.validate()?;
    if traj.n_controls() != sys.n_controls() {
        return Err(Error::DimensionMismatch {
            expected: sys.n_controls(),
            got: traj.n_controls(),
        });
    }
    Ok(())
}

/// Knot Hamiltonians `H_k` for the `N − 1` intervals.
pub fn interval_hamiltonians(sys: &ControlSystem, traj: &ControlTrajectory) -> Result<Vec<CMatrix>> {
    check_traj(sys, traj)?;
    traj.u[..traj.n_intervals()]
        .iter()
        .map(|u| hamiltonian_at(sys, u))
        .collect()
}

/// `U₁ = I`, `U_{k+1} = exp(−i H(u_k) Δt) U_k`.
pub fn rollout(sys: &ControlSystem, traj: &ControlTrajectory) -> Result<UnitaryTrajectory> {
    check_traj(sys, traj)?;
    let mut knots = Vec::with_capacity(traj.n_knots());
    knots.push(CMatrix::identity(sys.dim()));
    for u in &traj.u[..traj.n_intervals()] {
        let p = step_propagator(sys, u, traj.dt)?;
        let next = &p * knots.last().unwrap();
        knots.push(next);
    }
    Ok(UnitaryTrajectory { knots, dt: traj.dt })
}

/// `(1/d)|Tr(U†G)|`
pub fn fidelity(u: &CMatrix, target: &GateTarget) -> Result<f64> {
    if u.dim() != target.goal.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.goal.dim(),
            got: u.dim(),
        });
    }
    Ok(u.inner(&target.goal).norm() / u.dim() as f64)
}

/// Rollout together with `∂U_k/∂ε_c` at `ε = 0` for every channel, via the
/// block-triangular zero-order-hold step. Returns one derivative list per
/// channel, each starting at `∂U₁/∂ε = 0`.
pub fn adjoint_rollout(
    sys: &ControlSystem,
    traj: &ControlTrajectory,
    err: &ErrorModel,
) -> Result<(UnitaryTrajectory, Vec<Vec<CMatrix>>)> {
    check_traj(sys, traj)?;
    if err.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: err.dim(),
        });
    }
    let n = traj.n_intervals();
    let seqs = err.sequences(n)?;
    let d = sys.dim();
    let mut state: Vec<CMatrix> = std::iter::once(CMatrix::identity(d))
        .chain(seqs.iter().map(|_| CMatrix::zeros(d)))
        .collect();
    let mut knots = vec![state[0].clone()];
    let mut derivs: Vec<Vec<CMatrix>> = seqs.iter().map(|_| vec![CMatrix::zeros(d)]).collect();
    for k in 0..n {
        let h = hamiltonian_at(sys, &traj.u[k])?;
        let errs: Vec<CMatrix> = seqs.iter().map(|s| s[k].clone()).collect();
        let step = JointStep::new(&h, &errs, traj.dt)?;
        state = step.apply(&state);
        knots.push(state[0].clone());
        for (c, list) in derivs.iter_mut().enumerate() {
            list.push(state[c + 1].clone());
        }
    }
    Ok((UnitaryTrajectory { knots, dt: traj.dt }, derivs))
}

/// One zero-order-hold interval of the joint dynamics of `U` and its
/// derivatives `D_c = ∂U/∂ε_c`:
///
/// ```text
/// U' = P U,   D_c' = L_c U + P D_c,
/// P = exp(A), L_c = L(A, B_c),  A = −iΔt H,  B_c = −iΔt E_c
/// ```
///
/// which is the block-triangular exponential of `−iΔt [[H, 0], [E_c, H]]`.
#[derive(Debug, Clone)]
pub struct JointStep {
    gen: CMatrix,
    dirs: Vec<CMatrix>,
    pub propagator: CMatrix,
    pub derivs: Vec<CMatrix>,
}

impl JointStep {
    pub fn new(h: &CMatrix, errors: &[CMatrix], dt: f64) -> Result<Self> {
        let mi = C64::new(0.0, -dt);
        let gen = h.scale(mi);
        let propagator = expm(&gen)?;
        let dirs: Vec<CMatrix> = errors.iter().map(|e| e.scale(mi)).collect();
        let derivs = dirs
            .iter()
            .map(|b| expm_frechet(&gen, b).map(|(_, l)| l))
            .collect::<Result<Vec<_>>>()?;
        Ok(JointStep {
            gen,
            dirs,
            propagator,
            derivs,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.dirs.len()
    }

    /// Advances the stacked state `[U, D_1, …, D_C]` by one interval.
    pub fn apply(&self, state: &[CMatrix]) -> Vec<CMatrix> {
        debug_assert_eq!(state.len(), 1 + self.dirs.len());
        let u = &state[0];
        let mut out = Vec::with_capacity(state.len());
        out.push(&self.propagator * u);
        for (c, l) in self.derivs.iter().enumerate() {
            let mut next = l * u;
            next += &(&self.propagator * &state[c + 1]);
            out.push(next);
        }
        out
    }

    /// Vector-Jacobian product of [`JointStep::apply`].
    ///
    /// For output weights `w` (one block per state block) returns the
    /// gradient of `Re⟨w, apply(state)⟩` with respect to the input blocks and
    /// with respect to each control coefficient, where `control_ops[j]` is the
    /// Hamiltonian `H_j` multiplying that coefficient.
    pub fn vjp(
        &self,
        w: &[CMatrix],
        state: &[CMatrix],
        control_ops: &[CMatrix],
        dt: f64,
    ) -> Result<(Vec<CMatrix>, Vec<f64>)> {
        let nc = self.dirs.len();
        debug_assert_eq!(w.len(), 1 + nc);
        let p_dag = self.propagator.adjoint();
        let mut grad_state = Vec::with_capacity(1 + nc);
        let mut gu = &p_dag * &w[0];
        for (c, l) in self.derivs.iter().enumerate() {
            gu += &(&l.adjoint() * &w[c + 1]);
        }
        grad_state.push(gu);
        for wc in &w[1..] {
            grad_state.push(&p_dag * wc);
        }

        let d = self.gen.dim();
        let mi = C64::new(0.0, -dt);
        let mut grad_u = vec![0.0; control_ops.len()];
        if nc == 0 {
            // Re⟨W, L(A, K) U⟩ = Re⟨L(A†, W U†), K⟩
            let (_, m) = expm_frechet(&self.gen.adjoint(), &(&w[0] * &state[0].adjoint()))?;
            for (g, hj) in grad_u.iter_mut().zip(control_ops) {
                *g = (m.inner(hj) * mi).re;
            }
            return Ok((grad_state, grad_u));
        }
        let gen_dag = self.gen.adjoint();
        for c in 0..nc {
            // Pair system [[A, 0], [B_c, A]] acting on [U; D_c]; the top
            // weight is counted once, through the first channel.
            let mut big_dag = CMatrix::zeros(2 * d);
            big_dag.set_block(0, 0, &gen_dag);
            big_dag.set_block(d, d, &gen_dag);
            big_dag.set_block(0, d, &self.dirs[c].adjoint());
            let top = if c == 0 { w[0].clone() } else { CMatrix::zeros(d) };
            let (u, dc) = (&state[0], &state[c + 1]);
            let (u_dag, dc_dag) = (u.adjoint(), dc.adjoint());
            let mut outer = CMatrix::zeros(2 * d);
            outer.set_block(0, 0, &(&top * &u_dag));
            outer.set_block(0, d, &(&top * &dc_dag));
            outer.set_block(d, 0, &(&w[c + 1] * &u_dag));
            outer.set_block(d, d, &(&w[c + 1] * &dc_dag));
            let (_, m) = expm_frechet(&big_dag, &outer)?;
            let m00 = m.block(0, 0, d);
            let m11 = m.block(d, d, d);
            for (g, hj) in grad_u.iter_mut().zip(control_ops) {
                *g += ((m00.inner(hj) + m11.inner(hj)) * mi).re;
            }
        }
        Ok((grad_state, grad_u))
    }
}
