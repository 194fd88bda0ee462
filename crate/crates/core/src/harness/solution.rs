use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algebra::CMatrix;
use crate::dynamics::{fidelity, rollout, ControlTrajectory};
use crate::error::{Error, Result};
use crate::metrics::{
    default_oversample, susceptibility_adjoint, susceptibility_fine, susceptibility_toggling, susceptibility_universal,
};
use crate::nlp::{Problem, SolveReport, Status};
use crate::trajopt::{build, Formulation, ProblemSpec, TrajProblem};

/// Every estimator evaluated on one set of controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBlock {
    pub fidelity: f64,
    pub e_fine: f64,
    pub e_adjoint: f64,
    pub e_toggling0: f64,
    pub e_toggling4: f64,
    pub e_universal0: f64,
    pub max_du: f64,
    pub max_ddu: f64,
}

pub fn cross_evaluate(spec: &ProblemSpec, traj: &ControlTrajectory, oversample: Option<usize>) -> Result<MetricBlock> {
    let sys = &spec.system;
    let err = &spec.error;
    let ut = rollout(sys, traj)?;
    let os = oversample.unwrap_or_else(|| default_oversample(traj.n_knots()));
    Ok(MetricBlock {
        fidelity: fidelity(ut.final_unitary(), &spec.target)?,
        e_fine: susceptibility_fine(sys, traj, err, os)?,
        e_adjoint: susceptibility_adjoint(sys, traj, err)?,
        e_toggling0: susceptibility_toggling(sys, traj, err, 0)?,
        e_toggling4: susceptibility_toggling(sys, traj, err, 4)?,
        e_universal0: susceptibility_universal(sys, traj, 0)?,
        max_du: traj.max_abs_du(),
        max_ddu: traj.max_abs_ddu(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub status: Status,
    pub objective: f64,
    pub violation: f64,
    pub optimality: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub message: String,
}

impl From<&SolveReport> for SolverSummary {
    fn from(r: &SolveReport) -> Self {
        SolverSummary {
            status: r.status,
            objective: r.objective,
            violation: r.violation,
            optimality: r.optimality,
            outer_iterations: r.outer_iterations,
            inner_iterations: r.inner_iterations,
            message: r.message.clone(),
        }
    }
}

/// A solved cell, complete enough to rebuild the program and re-evaluate
/// every constraint and metric without solving again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub scenario: String,
    pub seed: u64,
    pub sweep_value: Option<f64>,
    pub spec: ProblemSpec,
    pub n_knots: usize,
    pub dt: f64,
    pub u: Vec<Vec<f64>>,
    pub du: Vec<Vec<f64>>,
    pub ddu: Vec<Vec<f64>>,
    /// Knot states `[knot][block]`: the decision variables of a direct
    /// solve, the rolled-out unitaries of an indirect one.
    pub states: Vec<Vec<CMatrix>>,
    pub solver: SolverSummary,
    pub metrics: MetricBlock,
}

/// Constraint values recomputed from a solution file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    /// Largest equality residual or positive inequality value of the program.
    pub violation: f64,
    pub dynamics_residual: f64,
    pub chain_residual: f64,
    /// Largest amount by which any enforced control box is exceeded.
    pub bound_excess: f64,
    pub fidelity: f64,
    pub state_fidelity: f64,
}

impl Verification {
    pub fn within(&self, tol: f64) -> bool {
        self.violation <= tol && self.dynamics_residual <= tol && self.chain_residual <= tol && self.bound_excess <= tol
    }
}

impl Solution {
    pub fn new(
        scenario: &str,
        seed: u64,
        sweep_value: Option<f64>,
        problem: &TrajProblem,
        report: &SolveReport,
        metrics: MetricBlock,
    ) -> Result<Self> {
        let spec = problem.spec();
        let traj = problem.trajectory(&report.x)?;
        let states = match problem.formulation() {
            Formulation::Direct => problem.layout().states(&report.x),
            Formulation::Indirect => rollout(&spec.system, &traj)?.knots.into_iter().map(|u| vec![u]).collect(),
        };
        Ok(Solution {
            scenario: scenario.into(),
            seed,
            sweep_value,
            spec: spec.clone(),
            n_knots: spec.n_knots,
            dt: spec.dt,
            u: traj.u,
            du: traj.du,
            ddu: traj.ddu,
            states,
            solver: SolverSummary::from(report),
            metrics,
        })
    }

    pub fn trajectory(&self) -> Result<ControlTrajectory> {
        if self.u.len() != self.n_knots {
            return Err(Error::Solution(format!("{} control rows for {} knots", self.u.len(), self.n_knots)));
        }
        ControlTrajectory::new(self.dt, self.u.clone(), self.du.clone(), self.ddu.clone())
    }

    /// Rebuilds the program and its decision vector.
    pub fn point(&self) -> Result<(TrajProblem, Vec<f64>)> {
        let problem = build(&self.spec)?;
        let traj = self.trajectory()?;
        let mut x = vec![0.0; problem.layout().len()];
        let layout = problem.layout();
        layout.set_trajectory(&mut x, &traj);
        if problem.formulation() == Formulation::Direct {
            if self.states.len() != layout.n_knots || self.states.iter().any(|s| s.len() != layout.blocks) {
                return Err(Error::Solution("state blocks do not match the problem layout".into()));
            }
            for (k, blocks) in self.states.iter().enumerate() {
                for (b, m) in blocks.iter().enumerate() {
                    if m.dim() != layout.dim {
                        return Err(Error::Solution(format!("state block ({k}, {b}) has dimension {}", m.dim())));
                    }
                    layout.set_state(&mut x, k, b, m);
                }
            }
        }
        Ok((problem, x))
    }

    pub fn verify(&self) -> Result<Verification> {
        let (problem, x) = self.point()?;
        let (values, _) = problem.evaluate(&x);
        let traj = self.trajectory()?;
        let bound_excess = x
            .iter()
            .zip(problem.lower().iter().zip(problem.upper()))
            .skip(problem.layout().u_offset())
            .map(|(v, (lo, hi))| (lo - v).max(v - hi).max(0.0))
            .fold(0.0, f64::max);
        Ok(Verification {
            violation: values.violation(),
            dynamics_residual: problem.dynamics_residual(&x)?,
            chain_residual: traj.chain_residual(),
            bound_excess,
            fidelity: problem.fidelity(&x)?,
            state_fidelity: problem.state_fidelity(&x)?,
        })
    }

    /// Recomputes the metric block from the stored controls.
    pub fn recompute_metrics(&self, oversample: Option<usize>) -> Result<MetricBlock> {
        cross_evaluate(&self.spec, &self.trajectory()?, oversample)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Solution(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Solution(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}
