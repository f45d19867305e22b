//! Feasible intervals of the strategy variables and the barrier that keeps
//! the consensus flow inside them.

use alloc::vec::Vec;

use crate::error::{DraError, Result};
use crate::model::PevSpec;

/// Open interval `(lower, upper)` with `lower < upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInterval {
    pub lower: f64,
    pub upper: f64,
}

impl BoundInterval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        // written so that NaN endpoints also fail
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(lower < upper) {
            return Err(DraError::CollapsedInterval { lower, upper });
        }
        Ok(BoundInterval { lower, upper })
    }

    /// Symmetric interval `(-half_width, half_width)`.
    pub fn symmetric(half_width: f64) -> Result<Self> {
        Self::new(-half_width, half_width)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn midpoint(&self) -> f64 {
        (self.lower + self.upper) / 2.0
    }

    pub fn contains_open(&self, v: f64) -> bool {
        v > self.lower && v < self.upper
    }
}

/// Per-slot reactive limits and their total.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactiveEnvelope {
    pub per_slot_limit: Vec<f64>,
    pub total_capacity: f64,
}

/// SoC before slot `k`: initial SoC plus every committed slot before `k`.
fn soc_before(pev: &PevSpec, k: usize, x_row: &[f64]) -> f64 {
    pev.soc_init + x_row[..k].iter().sum::<f64>()
}

/// Interval for `x_row[k]` given the energy already committed in slots
/// before `k`: the battery box intersected with the charger limit.
pub fn active_bounds(pev: &PevSpec, k: usize, x_row: &[f64]) -> Result<BoundInterval> {
    if k >= x_row.len() || k >= pev.slot_widths.len() {
        return Err(DraError::Shape {
            what: "slot index",
            expected: pev.slot_widths.len(),
            found: k,
        });
    }
    let committed = soc_before(pev, k, x_row);
    let charger = pev.slot_widths[k] * pev.charger_power;
    let lower = (pev.soc_lower - committed).max(-charger);
    let upper = (pev.soc_upper - committed).min(charger);
    BoundInterval::new(lower, upper)
}

/// Reactive headroom left by the active strategies in each slot.
pub fn reactive_envelope(pev: &PevSpec, x_row: &[f64]) -> Result<ReactiveEnvelope> {
    if x_row.len() != pev.slot_widths.len() {
        return Err(DraError::Shape {
            what: "x_row",
            expected: pev.slot_widths.len(),
            found: x_row.len(),
        });
    }
    let p = pev.charger_power;
    let per_slot_limit = x_row
        .iter()
        .zip(&pev.slot_widths)
        .map(|(x, t)| {
            let power = x / t;
            if power.abs() > p {
                Err(DraError::Domain {
                    what: "active power above charger rating",
                    value: power,
                })
            } else {
                Ok(libm::sqrt(p * p - power * power))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let total_capacity = per_slot_limit.iter().sum();
    Ok(ReactiveEnvelope {
        per_slot_limit,
        total_capacity,
    })
}

/// Logarithmic barrier `ln((v - a) / (b - v))` on `(a, b)`.
///
/// Evaluated in centred form `2 atanh(z)` with `z` the position relative to
/// the midpoint, so the midpoint maps to exactly zero.
pub fn barrier(v: f64, b: &BoundInterval) -> Result<f64> {
    let z = centred(v, b)?;
    Ok(2.0 * libm::atanh(z))
}

/// Derivative of [`barrier`] with respect to `v`.
pub fn barrier_slope(v: f64, b: &BoundInterval) -> Result<f64> {
    let z = centred(v, b)?;
    let half = b.width() / 2.0;
    Ok(2.0 / (half * (1.0 - z * z)))
}

fn centred(v: f64, b: &BoundInterval) -> Result<f64> {
    if !b.contains_open(v) {
        return Err(DraError::Domain {
            what: "barrier argument",
            value: v,
        });
    }
    let z = (v - b.midpoint()) / (b.width() / 2.0);
    // rounding can land exactly on +-1 for points within an ulp of a bound
    if z.abs() >= 1.0 {
        return Err(DraError::Domain {
            what: "barrier argument",
            value: v,
        });
    }
    Ok(z)
}

/// `(-Q, Q)` for the slack variable.
pub fn slack_bounds(env: &ReactiveEnvelope) -> Result<BoundInterval> {
    BoundInterval::symmetric(env.total_capacity)
}
