//! Scenario-level domain types and their validation.
//!
//! Units are fixed throughout the crate: energies in Wh, active power in W,
//! reactive power in VAr, durations in hours. A strategy `x[i][k]` is the
//! energy PEV `i` exchanges in slot `k` (negative means discharging), so its
//! power contribution to the grid is `x[i][k] / t[k]`.
//!
//! Slots are indexed from zero.

use alloc::vec;
use alloc::vec::Vec;

use crate::constraints::{active_bounds, BoundInterval};
use crate::error::{DraError, Result};
use crate::graph::Topology;

/// One vehicle's battery, charger and preference data.
#[derive(Debug, Clone, PartialEq)]
pub struct PevSpec {
    pub soc_init: f64,
    pub soc_target: f64,
    pub soc_upper: f64,
    pub soc_lower: f64,
    /// Nominal charger power, W.
    pub charger_power: f64,
    /// Slot widths, hours.
    pub slot_widths: Vec<f64>,
    /// Owner commitment factor.
    pub commitment: f64,
    /// Preferred energy per slot, Wh.
    pub preferred_rates: Vec<f64>,
}

impl PevSpec {
    pub fn slots(&self) -> usize {
        self.slot_widths.len()
    }

    /// Energy that must be moved into the battery over the window.
    pub fn demand(&self) -> f64 {
        self.soc_target - self.soc_init
    }

    /// Largest energy the charger can move in either direction over the window.
    pub fn charger_capacity(&self) -> f64 {
        self.slot_widths.iter().map(|t| t * self.charger_power).sum()
    }
}

/// Baseline grid loads without any vehicles.
#[derive(Debug, Clone, PartialEq)]
pub struct GridProfile {
    /// a_k, W.
    pub active_base: Vec<f64>,
    /// r_k, VAr.
    pub reactive_base: Vec<f64>,
}

impl GridProfile {
    pub fn slots(&self) -> usize {
        self.active_base.len()
    }

    /// Level profile with one additive step over `step` (inclusive slot range).
    pub fn step(
        slots: usize,
        active_level: f64,
        active_step: f64,
        reactive_level: f64,
        reactive_step: f64,
        step: core::ops::RangeInclusive<usize>,
    ) -> Self {
        let build = |level: f64, bump: f64| -> Vec<f64> {
            (0..slots)
                .map(|k| if step.contains(&k) { level + bump } else { level })
                .collect()
        };
        GridProfile {
            active_base: build(active_level, active_step),
            reactive_base: build(reactive_level, reactive_step),
        }
    }
}

/// Run-wide parameters. `None` selects the automatic value computed at run
/// start from the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    /// Smoothing factor set by the grid manager.
    pub eta: f64,
    /// Lowest commitment an owner may choose.
    pub min_commitment: f64,
    /// Barrier weight.
    pub epsilon: Option<f64>,
    /// Base Euler step.
    pub step_size: Option<f64>,
    /// Output spread at which a PEV counts as converged.
    pub tolerance: Option<f64>,
    pub max_steps: usize,
    pub record_stride: usize,
    pub topology: Topology,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            eta: 0.8,
            min_commitment: 0.0,
            epsilon: None,
            step_size: None,
            tolerance: None,
            max_steps: 5_000_000,
            record_stride: 100,
            topology: Topology::Ring,
        }
    }
}

/// A validated scenario. Construct with [`validate_scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    grid: GridProfile,
    fleet: Vec<PevSpec>,
    params: SimParams,
    mean_commitment: f64,
}

impl Scenario {
    pub fn grid(&self) -> &GridProfile {
        &self.grid
    }

    pub fn fleet(&self) -> &[PevSpec] {
        &self.fleet
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    /// Arithmetic mean of all commitments; zero for an empty fleet.
    pub fn mean_commitment(&self) -> f64 {
        self.mean_commitment
    }

    pub fn slots(&self) -> usize {
        self.grid.slots()
    }

    pub fn into_parts(self) -> (GridProfile, Vec<PevSpec>, SimParams) {
        (self.grid, self.fleet, self.params)
    }
}

fn check(ok: bool, field: &'static str, value: f64) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(DraError::Range { field, value })
    }
}

fn check_opt_positive(field: &'static str, v: Option<f64>) -> Result<()> {
    match v {
        Some(v) => check(v.is_finite() && v > 0.0, field, v),
        None => Ok(()),
    }
}

/// Validates every field bound and shape and computes the mean commitment.
pub fn validate_scenario(
    grid: GridProfile,
    fleet: Vec<PevSpec>,
    params: SimParams,
) -> Result<Scenario> {
    let k = grid.active_base.len();
    if k < 2 {
        return Err(DraError::Size {
            what: "grid profile",
            min: 2,
            found: k,
        });
    }
    if grid.reactive_base.len() != k {
        return Err(DraError::Shape {
            what: "reactive_base",
            expected: k,
            found: grid.reactive_base.len(),
        });
    }
    for &v in grid.active_base.iter() {
        check(v.is_finite(), "active_base", v)?;
    }
    for &v in grid.reactive_base.iter() {
        check(v.is_finite(), "reactive_base", v)?;
    }

    let p = &params;
    check((0.0..=1.0).contains(&p.eta), "eta", p.eta)?;
    check(
        (0.0..1.0).contains(&p.min_commitment),
        "min_commitment",
        p.min_commitment,
    )?;
    check_opt_positive("epsilon", p.epsilon)?;
    check_opt_positive("step_size", p.step_size)?;
    check_opt_positive("tolerance", p.tolerance)?;
    check(p.record_stride > 0, "record_stride", p.record_stride as f64)?;

    for (i, pev) in fleet.iter().enumerate() {
        validate_pev(i, pev, k, p.min_commitment)?;
    }

    let mean_commitment = if fleet.is_empty() {
        0.0
    } else {
        fleet.iter().map(|p| p.commitment).sum::<f64>() / fleet.len() as f64
    };

    Ok(Scenario {
        grid,
        fleet,
        params,
        mean_commitment,
    })
}

fn validate_pev(i: usize, pev: &PevSpec, k: usize, min_commitment: f64) -> Result<()> {
    if pev.slot_widths.len() != k {
        return Err(DraError::Shape {
            what: "slot_widths",
            expected: k,
            found: pev.slot_widths.len(),
        });
    }
    if pev.preferred_rates.len() != k {
        return Err(DraError::Shape {
            what: "preferred_rates",
            expected: k,
            found: pev.preferred_rates.len(),
        });
    }
    for v in [pev.soc_init, pev.soc_target, pev.soc_upper, pev.soc_lower] {
        check(!v.is_nan(), "soc", v)?;
    }
    check(pev.soc_lower < pev.soc_init, "soc_init", pev.soc_init)?;
    check(pev.soc_init <= pev.soc_upper, "soc_init", pev.soc_init)?;
    check(pev.soc_lower <= pev.soc_target, "soc_target", pev.soc_target)?;
    check(pev.soc_target <= pev.soc_upper, "soc_target", pev.soc_target)?;
    check(
        pev.charger_power.is_finite() && pev.charger_power > 0.0,
        "charger_power",
        pev.charger_power,
    )?;
    for &t in &pev.slot_widths {
        check(t.is_finite() && t > 0.0, "slot_widths", t)?;
    }
    for &r in &pev.preferred_rates {
        check(r.is_finite(), "preferred_rates", r)?;
    }
    check(
        pev.commitment >= min_commitment && pev.commitment < 1.0,
        "commitment",
        pev.commitment,
    )?;
    let capacity = pev.charger_capacity();
    if pev.demand().abs() > capacity {
        return Err(DraError::InfeasibleDemand {
            pev: i,
            demand: pev.demand(),
            capacity,
        });
    }
    Ok(())
}

/// Strategies of the whole fleet.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetState {
    /// Active energy per PEV and slot, Wh.
    pub x: Vec<Vec<f64>>,
    /// Reactive power per PEV and slot, VAr.
    pub y: Vec<Vec<f64>>,
    /// Reactive slack per PEV, VAr.
    pub slack: Vec<f64>,
}

impl FleetState {
    pub fn zeros(n: usize, k: usize) -> Self {
        FleetState {
            x: vec![vec![0.0; k]; n],
            y: vec![vec![0.0; k]; n],
            slack: vec![0.0; n],
        }
    }

    pub fn pevs(&self) -> usize {
        self.x.len()
    }
}

/// Relative margin kept between a strategy and its bounds.
pub const BOUND_MARGIN: f64 = 1e-9;

/// True if `v` sits inside `b` with a margin of `BOUND_MARGIN` widths.
pub(crate) fn strictly_inside(v: f64, b: &BoundInterval) -> bool {
    let m = BOUND_MARGIN * b.width();
    v > b.lower + m && v < b.upper - m
}

/// Returns the first slot of `row` outside its active bounds, if any.
pub(crate) fn first_active_violation(pev: &PevSpec, row: &[f64]) -> Option<usize> {
    (0..row.len()).find(|&k| match active_bounds(pev, k, row) {
        Ok(b) => !strictly_inside(row[k], &b),
        Err(_) => true,
    })
}

/// Uniform split of each PEV's demand with zero reactive strategies and slack.
///
/// A slot that the uniform split would push outside its bounds is pinned to
/// its bound midpoint and the residual is spread evenly over the remaining
/// free slots, repeating until the row is feasible or every slot is pinned.
pub fn init_fleet_state(s: &Scenario) -> Result<FleetState> {
    let k = s.slots();
    let mut state = FleetState::zeros(s.fleet().len(), k);
    for (i, pev) in s.fleet().iter().enumerate() {
        state.x[i] = feasible_split(i, pev, k)?;
    }
    Ok(state)
}

fn feasible_split(i: usize, pev: &PevSpec, k: usize) -> Result<Vec<f64>> {
    let demand = pev.demand();
    let infeasible = || DraError::InfeasibleDemand {
        pev: i,
        demand,
        capacity: pev.charger_capacity(),
    };
    let mut row = vec![demand / k as f64; k];
    let mut pinned = vec![false; k];
    absorb_residual(&mut row, &pinned, demand);
    for _ in 0..=k {
        let Some(bad) = first_active_violation(pev, &row) else {
            return Ok(row);
        };
        let b = active_bounds(pev, bad, &row).map_err(|_| infeasible())?;
        row[bad] = b.midpoint();
        pinned[bad] = true;
        let free = pinned.iter().filter(|p| !**p).count();
        if free == 0 {
            break;
        }
        let fixed: f64 = row
            .iter()
            .zip(&pinned)
            .filter(|(_, p)| **p)
            .map(|(v, _)| *v)
            .sum();
        let share = (demand - fixed) / free as f64;
        for (v, p) in row.iter_mut().zip(&pinned) {
            if !*p {
                *v = share;
            }
        }
        absorb_residual(&mut row, &pinned, demand);
    }
    Err(infeasible())
}

/// Puts the rounding residual of `sum(row) - demand` on the last free slot.
fn absorb_residual(row: &mut [f64], pinned: &[bool], demand: f64) {
    let Some(last) = pinned.iter().rposition(|p| !p) else {
        return;
    };
    let others: f64 = row
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != last)
        .map(|(_, v)| *v)
        .sum();
    row[last] = demand - others;
}
