use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::dynamics::{ControlSystem, ErrorModel, GateTarget};
use crate::error::{Error, Result};
use crate::metrics::MAX_ORDER;
use crate::nlp::SolverOptions;
use crate::parallel::Execution;
use crate::trajopt::{ControlBounds, Formulation, Objective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Hadamard,
    Iswap,
    Custom,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Hadamard => "hadamard",
            Scenario::Iswap => "iswap",
            Scenario::Custom => "custom",
        }
    }
}

/// Overrides applied on top of a scenario's defaults. A custom scenario
/// must provide `system`, `target` and `error`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpecParams {
    pub n_knots: Option<usize>,
    pub dt: Option<f64>,
    pub objective: Option<Objective>,
    pub q: Option<f64>,
    pub r: Option<f64>,
    pub fidelity_weight: Option<f64>,
    /// Absent keeps the scenario default; `null` removes the constraint.
    #[serde(deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub fidelity_min: Option<Option<f64>>,
    pub bounds: Option<ControlBounds>,
    pub formulation: Option<Formulation>,
    pub constrain_controls: Option<bool>,
    /// Per-channel weights replacing the scenario's error weights.
    pub error_weights: Option<Vec<f64>>,
    pub system: Option<ControlSystem>,
    pub target: Option<GateTarget>,
    pub error: Option<ErrorModel>,
}

fn present<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Option<f64>>, D::Error> {
    Option::<f64>::deserialize(d).map(Some)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Q,
    NKnots,
    DduBound,
    OrderJ,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Q => "q",
            SweepParam::NKnots => "n_knots",
            SweepParam::DduBound => "ddu_bound",
            SweepParam::OrderJ => "order_j",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub spec: SpecParams,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub solver: SolverOptions,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub execution: Execution,
    /// Fine-grid substeps per interval for cross-evaluation.
    #[serde(default)]
    pub oversample: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("`seeds` must not be empty".into()));
        }
        if self.oversample == Some(0) {
            return Err(Error::Config("`oversample` must be positive".into()));
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return Err(Error::Config("`sweep.values` must not be empty".into()));
            }
            for (i, v) in sw.values.iter().enumerate() {
                let bad = |why: &str| Error::Config(format!("`sweep.values[{i}]` = {v}: {why}"));
                if !v.is_finite() {
                    return Err(bad("not finite"));
                }
                let integral = v.fract() == 0.0;
                match sw.param {
                    SweepParam::Q if *v < 0.0 => return Err(bad("Q must be non-negative")),
                    SweepParam::DduBound if *v <= 0.0 => return Err(bad("bound must be positive")),
                    SweepParam::NKnots if !integral || *v < 2.0 => return Err(bad("knot count must be an integer ≥ 2")),
                    SweepParam::OrderJ if !integral || *v < 0.0 || *v > MAX_ORDER as f64 => {
                        return Err(bad("order must be an integer in 0..=12"))
                    }
                    _ => {}
                }
            }
        }
        for v in self.cell_values() {
            super::build_spec(self.scenario, &self.spec, self.sweep.as_ref().map(|s| s.param), v)
                .map_err(|e| Error::Config(format!("spec: {e}")))?;
        }
        Ok(())
    }

    /// Sweep values, or a single `None` when there is no sweep.
    pub fn cell_values(&self) -> Vec<Option<f64>> {
        match &self.sweep {
            Some(s) => s.values.iter().copied().map(Some).collect(),
            None => vec![None],
        }
    }
}

/// Parses and validates a config. Errors name the offending field and the
/// line and column in the source text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        let path = e.path().to_string();
        let at = if path == "." { String::new() } else { format!(" at `{path}`") };
        Error::Config(format!("{}{at} (line {}, column {})", strip_position(&inner.to_string()), inner.line(), inner.column()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn strip_position(msg: &str) -> &str {
    msg.find(" at line ").map_or(msg, |i| &msg[..i])
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses() {
        let cfg = parse_config(r#"{"scenario": "hadamard", "seeds": [1], "output_dir": "out"}"#).unwrap();
        assert_eq!(cfg.scenario, Scenario::Hadamard);
        assert_eq!(cfg.cell_values(), vec![None]);
        assert_eq!(cfg.solver, SolverOptions::default());
    }

    #[test]
    fn fidelity_min_null_is_distinct_from_absent() {
        let a: SpecParams = serde_json::from_str("{}").unwrap();
        let b: SpecParams = serde_json::from_str(r#"{"fidelity_min": null}"#).unwrap();
        assert_eq!(a.fidelity_min, None);
        assert_eq!(b.fidelity_min, Some(None));
    }

    #[test]
    fn diagnostics_name_field_and_line() {
        let text = "{\n  \"scenario\": \"hadamard\",\n  \"spec\": {\"q\": \"big\"},\n  \"seeds\": [0],\n  \"output_dir\": \"o\"\n}";
        let msg = parse_config(text).unwrap_err().to_string();
        assert!(msg.contains("spec.q"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");

        let text = r#"{"scenario": "hadamard", "seeds": [0], "output_dir": "o", "solver": {"tol": 1}}"#;
        let msg = parse_config(text).unwrap_err().to_string();
        assert!(msg.contains("solver") && msg.contains("tol"), "{msg}");
    }

    #[test]
    fn semantic_errors_are_reported() {
        let bad = [
            r#"{"scenario": "hadamard", "seeds": [], "output_dir": "o"}"#,
            r#"{"scenario": "hadamard", "seeds": [0], "output_dir": "o", "sweep": {"param": "n_knots", "values": [3.5]}}"#,
            r#"{"scenario": "hadamard", "seeds": [0], "output_dir": "o", "sweep": {"param": "order_j", "values": [13]}}"#,
            r#"{"scenario": "custom", "seeds": [0], "output_dir": "o"}"#,
            r#"{"scenario": "hadamard", "seeds": [0], "output_dir": "o", "spec": {"q": -1}}"#,
        ];
        for text in bad {
            assert!(matches!(parse_config(text), Err(Error::Config(_))), "{text}");
        }
    }
}
