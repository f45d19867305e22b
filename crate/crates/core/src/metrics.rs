//! Grid-side and vehicle-side outcome measures.

use alloc::vec::Vec;

use crate::dynamics::PhaseResult;
use crate::error::{DraError, Result};
use crate::model::{FleetState, PevSpec, Scenario};
use crate::payoff::{aggregate_loads, AggregateLoads};

/// SoC before the first slot and after each slot.
pub fn soc_trajectory(pev: &PevSpec, x_row: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(x_row.len() + 1);
    let mut soc = pev.soc_init;
    out.push(soc);
    for (k, x) in x_row.iter().enumerate() {
        soc += x;
        if soc < pev.soc_lower || soc > pev.soc_upper {
            return Err(DraError::BoundViolation { slot: k, soc });
        }
        out.push(soc);
    }
    Ok(out)
}

/// Sum of squared interior second differences.
pub fn smoothness(loads: &[f64]) -> Result<f64> {
    if loads.len() < 3 {
        return Err(DraError::Size {
            what: "load profile",
            min: 3,
            found: loads.len(),
        });
    }
    Ok(loads
        .windows(3)
        .map(|w| {
            let d = 2.0 * w[1] - w[0] - w[2];
            d * d
        })
        .sum())
}

/// Population variance.
pub fn variance(loads: &[f64]) -> f64 {
    if loads.is_empty() {
        return 0.0;
    }
    let n = loads.len() as f64;
    let mean = loads.iter().sum::<f64>() / n;
    loads.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// `max - min`; zero for an empty slice.
pub fn consensus_spread(outputs: &[f64]) -> f64 {
    if outputs.is_empty() {
        return 0.0;
    }
    let (lo, hi) = outputs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    hi - lo
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub soc_trajectories: Vec<Vec<f64>>,
    pub final_loads: AggregateLoads,
    pub baseline_loads: AggregateLoads,
    pub smoothness_with: f64,
    pub smoothness_without: f64,
    pub variance_with: f64,
    pub variance_without: f64,
    pub active: PhaseResult,
    pub reactive: PhaseResult,
}

impl RunReport {
    pub fn converged(&self) -> bool {
        self.active.converged && self.reactive.converged
    }

    /// Fractional reduction of the smoothness metric, `1 - with / without`.
    pub fn smoothing_improvement(&self) -> f64 {
        if self.smoothness_without == 0.0 {
            0.0
        } else {
            1.0 - self.smoothness_with / self.smoothness_without
        }
    }
}

/// Compares the active-power profile with the fleet at its final strategies
/// against the baseline with no vehicles connected.
pub fn build_report(s: &Scenario, active: PhaseResult, reactive: PhaseResult) -> Result<RunReport> {
    let state = &reactive.final_state;
    let soc_trajectories = s
        .fleet()
        .iter()
        .zip(&state.x)
        .map(|(pev, row)| soc_trajectory(pev, row))
        .collect::<Result<Vec<_>>>()?;
    let final_loads = aggregate_loads(s.grid(), s.fleet(), state)?;
    let baseline_loads = aggregate_loads(s.grid(), &[], &FleetState::zeros(0, s.slots()))?;
    Ok(RunReport {
        soc_trajectories,
        smoothness_with: smoothness(&final_loads.active)?,
        smoothness_without: smoothness(&baseline_loads.active)?,
        variance_with: variance(&final_loads.active),
        variance_without: variance(&baseline_loads.active),
        final_loads,
        baseline_loads,
        active,
        reactive,
    })
}
