use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::pauli_susceptibility_scan;

use super::run::ResultRow;
use super::solution::Solution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub sweep_value: Option<f64>,
    pub n_rows: usize,
    pub n_feasible: usize,
    pub mean_e_adjoint: f64,
    pub min_e_adjoint: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Frontier {
    /// No row passed the feasibility filter.
    Empty,
    Points(Vec<FrontierPoint>),
}

/// Mean and minimum adjoint susceptibility per sweep value over feasible
/// rows. Feasibility is the program's own: every constraint, including the
/// squared-fidelity floor when the spec sets one, holds within the solver's
/// tolerance. Sweep values keep their first appearance order; values without
/// feasible rows are dropped.
pub fn report_pareto(rows: &[ResultRow]) -> Frontier {
    let mut order: Vec<Option<f64>> = Vec::new();
    for r in rows {
        if !order.iter().any(|v| same_value(*v, r.sweep_value)) {
            order.push(r.sweep_value);
        }
    }
    let points: Vec<FrontierPoint> = order
        .into_iter()
        .filter_map(|v| {
            let group: Vec<&ResultRow> = rows.iter().filter(|r| same_value(r.sweep_value, v)).collect();
            let vals: Vec<f64> = group
                .iter()
                .filter(|r| r.feasible)
                .filter_map(|r| r.e_adjoint)
                .collect();
            if vals.is_empty() {
                return None;
            }
            Some(FrontierPoint {
                sweep_value: v,
                n_rows: group.len(),
                n_feasible: vals.len(),
                mean_e_adjoint: vals.iter().sum::<f64>() / vals.len() as f64,
                min_e_adjoint: vals.iter().copied().fold(f64::INFINITY, f64::min),
            })
        })
        .collect();
    if points.is_empty() {
        Frontier::Empty
    } else {
        Frontier::Points(points)
    }
}

fn same_value(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x.to_bits() == y.to_bits(),
        (None, None) => true,
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliRow {
    pub label: String,
    pub e_adjoint: f64,
    /// Whether the string is one of the solution's error channels.
    pub targeted: bool,
}

/// Adjoint susceptibility of every non-identity Pauli string on the
/// solution's controls.
pub fn report_pauli_scan(solution: &Solution) -> Result<Vec<PauliRow>> {
    let d = solution.spec.system.dim();
    if d < 2 || !d.is_power_of_two() {
        return Err(Error::DimensionMismatch {
            expected: d.next_power_of_two().max(2),
            got: d,
        });
    }
    let n = d.trailing_zeros() as usize;
    let targeted: Vec<&str> = solution.spec.error.channels().iter().map(|c| c.label.as_str()).collect();
    let scan = pauli_susceptibility_scan(&solution.spec.system, &solution.trajectory()?, n)?;
    Ok(scan
        .into_iter()
        .map(|(p, v)| {
            let label = p.label();
            PauliRow {
                targeted: targeted.contains(&label.as_str()),
                label,
                e_adjoint: v,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub seed: u64,
    pub sweep_value: Option<f64>,
    pub a_status: String,
    pub b_status: String,
    pub a_feasible: bool,
    pub b_feasible: bool,
    pub a_e_adjoint: Option<f64>,
    pub b_e_adjoint: Option<f64>,
    /// `b / a`
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub pairs: usize,
    pub both_feasible: usize,
    /// Pairs, both feasible, where `a` has the lower adjoint susceptibility.
    pub a_lower: usize,
    pub b_lower: usize,
    pub median_ratio: Option<f64>,
}

/// Pairs rows of two runs by `(seed, sweep value)`. Rows without a partner
/// are skipped.
pub fn compare(a: &[ResultRow], b: &[ResultRow]) -> (Vec<ComparisonRow>, ComparisonSummary) {
    let mut rows = Vec::new();
    for ra in a {
        let Some(rb) = b.iter().find(|r| r.seed == ra.seed && same_value(r.sweep_value, ra.sweep_value)) else {
            continue;
        };
        let ratio = match (ra.e_adjoint, rb.e_adjoint) {
            (Some(x), Some(y)) if x > 0.0 => Some(y / x),
            _ => None,
        };
        rows.push(ComparisonRow {
            seed: ra.seed,
            sweep_value: ra.sweep_value,
            a_status: ra.status.clone(),
            b_status: rb.status.clone(),
            a_feasible: ra.feasible,
            b_feasible: rb.feasible,
            a_e_adjoint: ra.e_adjoint,
            b_e_adjoint: rb.e_adjoint,
            ratio,
        });
    }
    let both: Vec<&ComparisonRow> = rows.iter().filter(|r| r.a_feasible && r.b_feasible).collect();
    let lower = |f: fn(f64, f64) -> bool| {
        both.iter()
            .filter(|r| matches!((r.a_e_adjoint, r.b_e_adjoint), (Some(x), Some(y)) if f(x, y)))
            .count()
    };
    let mut ratios: Vec<f64> = both.iter().filter_map(|r| r.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let summary = ComparisonSummary {
        pairs: rows.len(),
        both_feasible: both.len(),
        a_lower: lower(|x, y| x < y),
        b_lower: lower(|x, y| y < x),
        median_ratio: median(&ratios),
    };
    (rows, summary)
}

fn median(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some(0.5 * (sorted[n / 2 - 1] + sorted[n / 2])),
    }
}
