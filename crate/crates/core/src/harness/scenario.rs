use std::f64::consts::FRAC_PI_4;

use crate::algebra::{expm, CMatrix, PauliString, C64};
use crate::dynamics::{ControlSystem, ErrorModel, GateTarget};
use crate::error::{Error, Result};
use crate::trajopt::{Cap, ControlBounds, Formulation, Objective, ProblemSpec};

use super::config::{Scenario, SpecParams, SweepParam};

pub const HADAMARD_KNOTS: usize = 40;
pub const HADAMARD_DT: f64 = 0.8;
pub const ISWAP_SEEDS: usize = 16;

const FIDELITY_MIN: f64 = 0.9999;
const DEFAULT_Q: f64 = 1.0;
const DEFAULT_R: f64 = 1e-2;

fn paulis(labels: &[&str]) -> Vec<PauliString> {
    labels.iter().map(|l| l.parse().expect("valid Pauli label")).collect()
}

fn defaults(system: ControlSystem, goal: CMatrix, error: ErrorModel, bounds: ControlBounds) -> Result<ProblemSpec> {
    Ok(ProblemSpec {
        system,
        target: GateTarget::new(goal)?,
        n_knots: HADAMARD_KNOTS,
        dt: HADAMARD_DT,
        objective: Objective::Adjoint,
        error,
        q: DEFAULT_Q,
        r: DEFAULT_R,
        fidelity_weight: 0.0,
        fidelity_min: Some(FIDELITY_MIN),
        bounds,
        formulation: Formulation::Direct,
        constrain_controls: true,
    })
}

/// Single-qubit Hadamard with `X`, `Y`, `Z` controls and a static `Z`
/// error, with `params` applied on top of the defaults.
pub fn scenario_hadamard(params: &SpecParams) -> Result<ProblemSpec> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let goal = CMatrix::from_real_rows(&[&[s, s], &[s, -s]]);
    let system = ControlSystem::from_paulis(&paulis(&["X", "Y", "Z"]))?;
    let error = ErrorModel::from_paulis(&[("Z".parse()?, 1.0)])?;
    let bounds = ControlBounds {
        u: None,
        du: Some(Cap::Uniform(1.0)),
        ddu: Some(Cap::Uniform(2.0)),
    };
    apply(defaults(system, goal, error, bounds)?, params)
}

/// `X₁X₂ + Y₁Y₂`
fn exchange() -> CMatrix {
    let xx: PauliString = "XX".parse().expect("label");
    let yy: PauliString = "YY".parse().expect("label");
    &xx.matrix() + &yy.matrix()
}

/// Two-qubit iSWAP with local `X`, `Y`, `Z` drives on both qubits and a
/// tunable exchange coupling; errors `Z₁`, `Z₂`, `Z₁Z₂` with unit weights.
pub fn scenario_iswap(params: &SpecParams) -> Result<ProblemSpec> {
    let local = paulis(&["XI", "YI", "ZI", "IX", "IY", "IZ"]);
    let mut ops: Vec<CMatrix> = local.iter().map(|p| p.matrix()).collect();
    let mut labels: Vec<String> = local.iter().map(|p| p.label()).collect();
    ops.push(exchange());
    labels.push("XX+YY".into());
    let system = ControlSystem::new(CMatrix::zeros(4), ops, labels)?;
    let goal = expm(&exchange().scale(C64::new(0.0, FRAC_PI_4)))?;
    let error = ErrorModel::from_paulis(&[("ZI".parse()?, 1.0), ("IZ".parse()?, 1.0), ("ZZ".parse()?, 1.0)])?;
    let bounds = ControlBounds {
        u: None,
        du: None,
        ddu: Some(Cap::Uniform(1.0)),
    };
    apply(defaults(system, goal, error, bounds)?, params)
}

fn apply(mut spec: ProblemSpec, p: &SpecParams) -> Result<ProblemSpec> {
    if let Some(sys) = &p.system {
        spec.system = sys.clone();
    }
    if let Some(t) = &p.target {
        spec.target = t.clone();
    }
    if let Some(e) = &p.error {
        spec.error = e.clone();
    }
    if let Some(w) = &p.error_weights {
        if w.len() != spec.error.n_channels() {
            return Err(Error::InvalidProblem(format!(
                "{} error weights for {} channels",
                w.len(),
                spec.error.n_channels()
            )));
        }
        let mut channels = spec.error.channels().to_vec();
        for (ch, w) in channels.iter_mut().zip(w) {
            ch.weight = *w;
        }
        spec.error = ErrorModel::new(channels)?;
    }
    if let Some(n) = p.n_knots {
        spec.n_knots = n;
    }
    if let Some(dt) = p.dt {
        spec.dt = dt;
    }
    if let Some(o) = p.objective {
        spec.objective = o;
    }
    if let Some(q) = p.q {
        spec.q = q;
    }
    if let Some(r) = p.r {
        spec.r = r;
    }
    if let Some(w) = p.fidelity_weight {
        spec.fidelity_weight = w;
    }
    if let Some(f) = p.fidelity_min {
        spec.fidelity_min = f;
    }
    if let Some(b) = &p.bounds {
        spec.bounds = b.clone();
    }
    if let Some(f) = p.formulation {
        spec.formulation = f;
    }
    if let Some(c) = p.constrain_controls {
        spec.constrain_controls = c;
    }
    Ok(spec)
}

/// Spec for one sweep cell. A knot-count sweep keeps the gate duration of
/// the base spec fixed and rescales `Δt`.
pub fn build_spec(scenario: Scenario, params: &SpecParams, sweep: Option<SweepParam>, value: Option<f64>) -> Result<ProblemSpec> {
    let mut spec = match scenario {
        Scenario::Hadamard => scenario_hadamard(params)?,
        Scenario::Iswap => scenario_iswap(params)?,
        Scenario::Custom => {
            let (Some(system), Some(target), Some(error)) = (&params.system, &params.target, &params.error) else {
                return Err(Error::InvalidProblem("custom scenario needs `system`, `target` and `error`".into()));
            };
            let bounds = params.bounds.clone().unwrap_or_default();
            apply(defaults(system.clone(), target.goal().clone(), error.clone(), bounds)?, params)?
        }
    };
    if let (Some(param), Some(v)) = (sweep, value) {
        match param {
            SweepParam::Q => spec.q = v,
            SweepParam::NKnots => {
                let tf = spec.duration();
                spec.n_knots = v as usize;
                spec.dt = tf / (spec.n_knots - 1) as f64;
            }
            SweepParam::DduBound => spec.bounds.ddu = Some(Cap::Uniform(v)),
            SweepParam::OrderJ => {
                let j = v as usize;
                spec.objective = match spec.objective {
                    Objective::Toggling(_) => Objective::Toggling(j),
                    Objective::Universal(_) => Objective::Universal(j),
                    other => {
                        return Err(Error::InvalidProblem(format!(
                            "order sweep needs a toggling or universal objective, not {other:?}"
                        )))
                    }
                };
            }
        }
    }
    spec.validate()?;
    Ok(spec)
}
