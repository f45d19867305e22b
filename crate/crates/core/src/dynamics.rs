//! Consensus flows over each PEV's strategy graph.
//!
//! Every strategy node `k` of PEV `i` evolves as `x'_k = sum_j a_kj (o_j - o_k)`
//! where `o` is the node's consensus output. Velocities of one PEV sum to
//! zero, so the energy (active phase) or the reactive balance `sum y + s`
//! (reactive phase) of each PEV is conserved. The output is
//! `epsilon * barrier - payoff`, increasing in the node's own strategy, which
//! makes equal outputs an attracting rest point and keeps the flow inside
//! the feasible box.
//!
//! Integration is forward Euler. Each PEV takes the largest halving of the
//! base step that respects a stiffness cap and keeps every node strictly
//! inside its interval. Loads are refreshed once per step from the whole
//! fleet, so all PEVs in a step see the same snapshot.

use alloc::vec;
use alloc::vec::Vec;

use crate::constraints::{
    active_bounds, barrier_slope, reactive_envelope, slack_bounds, BoundInterval,
};
use crate::error::{DraError, Result};
use crate::graph::{is_connected, StrategyGraph};
use crate::metrics::consensus_spread;
use crate::model::{strictly_inside, FleetState, Scenario};
use crate::payoff::{
    active_consensus_output, active_payoff, aggregate_loads, reactive_consensus_output,
    reactive_payoff, slack_output, Weights,
};

/// Halvings of the step allowed for feasibility before giving up.
pub const MAX_HALVINGS: u32 = 20;
/// Auto step moves no strategy more than this fraction of its interval.
pub const FIRST_STEP_FRACTION: f64 = 0.01;
/// Auto tolerance relative to the initial output spread.
pub const TOLERANCE_FRACTION: f64 = 1e-6;
/// Auto barrier weight relative to the largest raw payoff at the start.
pub const EPSILON_FRACTION: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    Active,
    Reactive,
}

/// Receives snapshots every `record_stride` steps and at the end of a phase.
pub trait Observer {
    fn record(&mut self, phase: PhaseKind, step: usize, state: &FleetState, spreads: &[f64]);
}

impl Observer for () {
    fn record(&mut self, _: PhaseKind, _: usize, _: &FleetState, _: &[f64]) {}
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseResult {
    pub final_state: FleetState,
    pub steps_taken: usize,
    /// Per PEV, max minus min consensus output at the end.
    pub final_spread: Vec<f64>,
    /// Per PEV, deviation of the conserved quantity from its target.
    pub conservation_drift: Vec<f64>,
    pub converged: bool,
    pub epsilon: f64,
    pub step_size: f64,
    pub tolerance: f64,
}

/// Per-PEV drift of both conserved quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drift {
    /// `|sum_k x - (soc_target - soc_init)|`, Wh.
    pub active: f64,
    /// `|sum_k y + s|`, VAr.
    pub reactive: f64,
}

/// `-L * outputs`, computed edge by edge.
pub fn consensus_velocity(outputs: &[f64], g: &StrategyGraph) -> Result<Vec<f64>> {
    if outputs.len() != g.n_nodes() {
        return Err(DraError::Shape {
            what: "consensus outputs",
            expected: g.n_nodes(),
            found: outputs.len(),
        });
    }
    Ok((0..outputs.len())
        .map(|k| {
            g.neighbors(k)
                .iter()
                .map(|&j| outputs[j] - outputs[k])
                .sum()
        })
        .collect())
}

pub fn conservation_check(state: &FleetState, s: &Scenario) -> Vec<Drift> {
    s.fleet()
        .iter()
        .enumerate()
        .map(|(i, pev)| Drift {
            active: (state.x[i].iter().sum::<f64>() - pev.demand()).abs(),
            reactive: (state.y[i].iter().sum::<f64>() + state.slack[i]).abs(),
        })
        .collect()
}

/// One phase's view of the fleet: which variables move, their outputs,
/// feasibility and stiffness.
trait Field {
    const KIND: PhaseKind;

    fn graph(&self) -> &StrategyGraph;
    fn row(&self, st: &FleetState, i: usize) -> Vec<f64>;
    fn set_row(&self, st: &mut FleetState, i: usize, row: &[f64]);
    /// Consensus outputs of every PEV, from one load snapshot.
    fn outputs(&self, st: &FleetState) -> Result<Vec<Vec<f64>>>;
    /// First node of `row` outside its interval.
    fn violation(&self, i: usize, row: &[f64]) -> Option<usize>;
    /// Interval width of every node of `row`.
    fn widths(&self, i: usize, row: &[f64]) -> Vec<f64>;
    /// Upper bound on the output's sensitivity to the strategies.
    fn stiffness(&self, i: usize, row: &[f64]) -> f64;
    fn drift(&self, i: usize, row: &[f64]) -> f64;
}

fn weights(s: &Scenario) -> Weights {
    Weights {
        mu: s.mean_commitment(),
        eta: s.params().eta,
    }
}

/// Sensitivity of the payoff part of one node's output to the fleet.
fn payoff_gain(s: &Scenario, w: Weights) -> f64 {
    let n = s.fleet().len() as f64;
    (1.0 - w.mu) + n * w.mu * (w.eta + 4.0 * (1.0 - w.eta))
}

fn build_graph(s: &Scenario, n: usize) -> Result<StrategyGraph> {
    let g = s.params().topology.build(n)?;
    debug_assert!(is_connected(&g));
    Ok(g)
}

fn fallback_epsilon(s: &Scenario) -> f64 {
    let p = s
        .fleet()
        .iter()
        .map(|p| p.charger_power)
        .fold(0.0, f64::max);
    EPSILON_FRACTION * p
}

struct ActiveField<'a> {
    s: &'a Scenario,
    w: Weights,
    epsilon: f64,
    graph: StrategyGraph,
}

impl<'a> ActiveField<'a> {
    fn new(s: &'a Scenario, st: &FleetState) -> Result<Self> {
        let w = weights(s);
        let epsilon = match s.params().epsilon {
            Some(e) => e,
            None => auto_active_epsilon(s, st)?,
        };
        Ok(ActiveField {
            s,
            w,
            epsilon,
            graph: build_graph(s, s.slots())?,
        })
    }
}

/// `EPSILON_FRACTION` times the largest raw active payoff magnitude at `st`.
pub fn auto_active_epsilon(s: &Scenario, st: &FleetState) -> Result<f64> {
    let loads = aggregate_loads(s.grid(), s.fleet(), st)?;
    let w = weights(s);
    let mut m: f64 = 0.0;
    for (i, pev) in s.fleet().iter().enumerate() {
        for k in 0..s.slots() {
            m = m.max(active_payoff(pev, k, st.x[i][k], &loads, w).abs());
        }
    }
    Ok(if m > 0.0 {
        EPSILON_FRACTION * m
    } else {
        fallback_epsilon(s)
    })
}

/// `EPSILON_FRACTION` times the largest raw reactive payoff magnitude at `st`.
pub fn auto_reactive_epsilon(s: &Scenario, st: &FleetState) -> Result<f64> {
    let loads = aggregate_loads(s.grid(), s.fleet(), st)?;
    let w = weights(s);
    let mut m: f64 = 0.0;
    for i in 0..s.fleet().len() {
        for k in 0..s.slots() {
            m = m.max(reactive_payoff(k, st.y[i][k], &loads, w).abs());
        }
    }
    Ok(if m > 0.0 {
        EPSILON_FRACTION * m
    } else {
        fallback_epsilon(s)
    })
}

impl Field for ActiveField<'_> {
    const KIND: PhaseKind = PhaseKind::Active;

    fn graph(&self) -> &StrategyGraph {
        &self.graph
    }

    fn row(&self, st: &FleetState, i: usize) -> Vec<f64> {
        st.x[i].clone()
    }

    fn set_row(&self, st: &mut FleetState, i: usize, row: &[f64]) {
        st.x[i].copy_from_slice(row);
    }

    fn outputs(&self, st: &FleetState) -> Result<Vec<Vec<f64>>> {
        let loads = aggregate_loads(self.s.grid(), self.s.fleet(), st)?;
        self.s
            .fleet()
            .iter()
            .zip(&st.x)
            .map(|(pev, row)| {
                (0..row.len())
                    .map(|k| {
                        let b = active_bounds(pev, k, row)?;
                        active_consensus_output(pev, k, row[k], &b, &loads, self.w, self.epsilon)
                    })
                    .collect()
            })
            .collect()
    }

    fn violation(&self, i: usize, row: &[f64]) -> Option<usize> {
        crate::model::first_active_violation(&self.s.fleet()[i], row)
    }

    fn widths(&self, i: usize, row: &[f64]) -> Vec<f64> {
        let pev = &self.s.fleet()[i];
        (0..row.len())
            .map(|k| active_bounds(pev, k, row).map_or(0.0, |b| b.width()))
            .collect()
    }

    fn stiffness(&self, i: usize, row: &[f64]) -> f64 {
        let pev = &self.s.fleet()[i];
        let t_min = pev.slot_widths.iter().copied().fold(f64::INFINITY, f64::min);
        let slope = (0..row.len())
            .filter_map(|k| {
                let b = active_bounds(pev, k, row).ok()?;
                barrier_slope(row[k], &b).ok()
            })
            .fold(0.0, f64::max);
        payoff_gain(self.s, self.w) / t_min + 2.0 * self.epsilon * slope
    }

    fn drift(&self, i: usize, row: &[f64]) -> f64 {
        (row.iter().sum::<f64>() - self.s.fleet()[i].demand()).abs()
    }
}

/// Reactive strategies followed by the slack as the last node.
struct ReactiveField<'a> {
    s: &'a Scenario,
    w: Weights,
    epsilon: f64,
    graph: StrategyGraph,
    slot_bounds: Vec<Vec<BoundInterval>>,
    slack_bounds: Vec<BoundInterval>,
}

impl<'a> ReactiveField<'a> {
    fn new(s: &'a Scenario, st: &FleetState) -> Result<Self> {
        let mut slot_bounds = Vec::with_capacity(s.fleet().len());
        let mut slack = Vec::with_capacity(s.fleet().len());
        for (pev, row) in s.fleet().iter().zip(&st.x) {
            let env = reactive_envelope(pev, row)?;
            slot_bounds.push(
                env.per_slot_limit
                    .iter()
                    .map(|&q| BoundInterval::symmetric(q))
                    .collect::<Result<Vec<_>>>()?,
            );
            slack.push(slack_bounds(&env)?);
        }
        let epsilon = match s.params().epsilon {
            Some(e) => e,
            None => auto_reactive_epsilon(s, st)?,
        };
        Ok(ReactiveField {
            s,
            w: weights(s),
            epsilon,
            graph: build_graph(s, s.slots() + 1)?,
            slot_bounds,
            slack_bounds: slack,
        })
    }

    fn bound(&self, i: usize, node: usize) -> &BoundInterval {
        self.slot_bounds[i]
            .get(node)
            .unwrap_or(&self.slack_bounds[i])
    }
}

impl Field for ReactiveField<'_> {
    const KIND: PhaseKind = PhaseKind::Reactive;

    fn graph(&self) -> &StrategyGraph {
        &self.graph
    }

    fn row(&self, st: &FleetState, i: usize) -> Vec<f64> {
        let mut row = st.y[i].clone();
        row.push(st.slack[i]);
        row
    }

    fn set_row(&self, st: &mut FleetState, i: usize, row: &[f64]) {
        let (slack, y) = row.split_last().expect("reactive row has a slack node");
        st.y[i].copy_from_slice(y);
        st.slack[i] = *slack;
    }

    fn outputs(&self, st: &FleetState) -> Result<Vec<Vec<f64>>> {
        let loads = aggregate_loads(self.s.grid(), self.s.fleet(), st)?;
        (0..self.s.fleet().len())
            .map(|i| {
                let mut out = st.y[i]
                    .iter()
                    .enumerate()
                    .map(|(k, &y)| {
                        reactive_consensus_output(
                            k,
                            y,
                            &self.slot_bounds[i][k],
                            &loads,
                            self.w,
                            self.epsilon,
                        )
                    })
                    .collect::<Result<Vec<f64>>>()?;
                out.push(slack_output(st.slack[i], &self.slack_bounds[i], self.epsilon)?);
                Ok(out)
            })
            .collect()
    }

    fn violation(&self, i: usize, row: &[f64]) -> Option<usize> {
        (0..row.len()).find(|&k| !strictly_inside(row[k], self.bound(i, k)))
    }

    fn widths(&self, i: usize, row: &[f64]) -> Vec<f64> {
        (0..row.len()).map(|k| self.bound(i, k).width()).collect()
    }

    fn stiffness(&self, i: usize, row: &[f64]) -> f64 {
        let slope = (0..row.len())
            .filter_map(|k| barrier_slope(row[k], self.bound(i, k)).ok())
            .fold(0.0, f64::max);
        payoff_gain(self.s, self.w) + 2.0 * self.epsilon * slope
    }

    fn drift(&self, _i: usize, row: &[f64]) -> f64 {
        row.iter().sum::<f64>().abs()
    }
}

fn spreads(outputs: &[Vec<f64>]) -> Vec<f64> {
    outputs.iter().map(|o| consensus_spread(o)).collect()
}

/// Largest step `h / 2^m` no larger than the PEV's stiffness cap.
fn capped_step<F: Field>(field: &F, i: usize, row: &[f64], h: f64) -> f64 {
    let cap = 1.0 / (field.graph().spectral_bound() * field.stiffness(i, row));
    let mut h = h;
    // the cap is finite and positive for any interior row
    while h > cap && h > 0.0 {
        h /= 2.0;
    }
    h
}

/// Advances every PEV one synchronous step from the `outputs` snapshot.
fn advance<F: Field>(
    field: &F,
    st: &FleetState,
    outputs: &[Vec<f64>],
    h: f64,
) -> Result<FleetState> {
    let mut next = st.clone();
    for (i, out) in outputs.iter().enumerate() {
        let v = consensus_velocity(out, field.graph())?;
        if v.iter().all(|&u| u == 0.0) {
            continue;
        }
        let row = field.row(st, i);
        let mut step = capped_step(field, i, &row, h);
        let mut candidate = vec![0.0; row.len()];
        let mut accepted = false;
        let mut last_bad = 0;
        for _ in 0..=MAX_HALVINGS {
            for ((c, r), u) in candidate.iter_mut().zip(&row).zip(&v) {
                *c = r + step * u;
            }
            match field.violation(i, &candidate) {
                None => {
                    accepted = true;
                    break;
                }
                Some(k) => {
                    last_bad = k;
                    step /= 2.0;
                }
            }
        }
        if !accepted {
            return Err(DraError::StepCollapse {
                pev: i,
                slot: last_bad,
            });
        }
        field.set_row(&mut next, i, &candidate);
    }
    Ok(next)
}

/// Base step so that the first move shifts no node by more than
/// `FIRST_STEP_FRACTION` of its interval width, capped by stiffness.
fn auto_step<F: Field>(field: &F, st: &FleetState, outputs: &[Vec<f64>]) -> Result<f64> {
    let mut h = f64::INFINITY;
    for (i, out) in outputs.iter().enumerate() {
        let row = field.row(st, i);
        let v = consensus_velocity(out, field.graph())?;
        for (u, w) in v.iter().zip(field.widths(i, &row)) {
            if *u != 0.0 {
                h = h.min(FIRST_STEP_FRACTION * w / u.abs());
            }
        }
        let cap = 1.0 / (field.graph().spectral_bound() * field.stiffness(i, &row));
        h = h.min(cap);
    }
    Ok(if h.is_finite() { h } else { 1.0 })
}

fn run_phase<F: Field, O: Observer + ?Sized>(
    field: &F,
    s: &Scenario,
    mut state: FleetState,
    epsilon: f64,
    observer: &mut O,
) -> Result<PhaseResult> {
    let params = s.params();
    let mut outputs = field.outputs(&state)?;
    let mut spread = spreads(&outputs);
    let h = match params.step_size {
        Some(h) => h,
        None => auto_step(field, &state, &outputs)?,
    };
    let tolerance = params
        .tolerance
        .unwrap_or_else(|| TOLERANCE_FRACTION * spread.iter().copied().fold(0.0, f64::max));

    let mut steps = 0;
    let mut last_recorded = None;
    let converged = loop {
        if steps % params.record_stride == 0 {
            observer.record(F::KIND, steps, &state, &spread);
            last_recorded = Some(steps);
        }
        if spread.iter().all(|&d| d <= tolerance) {
            break true;
        }
        if steps >= params.max_steps {
            break false;
        }
        state = advance(field, &state, &outputs, h)?;
        steps += 1;
        outputs = field.outputs(&state)?;
        spread = spreads(&outputs);
    };
    if last_recorded != Some(steps) {
        observer.record(F::KIND, steps, &state, &spread);
    }

    let conservation_drift = (0..s.fleet().len())
        .map(|i| field.drift(i, &field.row(&state, i)))
        .collect();
    Ok(PhaseResult {
        final_state: state,
        steps_taken: steps,
        final_spread: spread,
        conservation_drift,
        converged,
        epsilon,
        step_size: h,
        tolerance,
    })
}

/// One synchronous Euler step of the active flow with base step `h`.
pub fn step_active(s: &Scenario, state: &FleetState, h: f64) -> Result<FleetState> {
    let field = ActiveField::new(s, state)?;
    let outputs = field.outputs(state)?;
    advance(&field, state, &outputs, h)
}

/// Integrates the active flow until every PEV reaches output consensus or
/// `max_steps` is exhausted.
pub fn run_active_phase<O: Observer + ?Sized>(
    s: &Scenario,
    state: FleetState,
    observer: &mut O,
) -> Result<PhaseResult> {
    let field = ActiveField::new(s, &state)?;
    let eps = field.epsilon;
    run_phase(&field, s, state, eps, observer)
}

/// Integrates the reactive flow with the active strategies of `state` frozen.
pub fn run_reactive_phase<O: Observer + ?Sized>(
    s: &Scenario,
    state: FleetState,
    observer: &mut O,
) -> Result<PhaseResult> {
    let field = ReactiveField::new(s, &state)?;
    let eps = field.epsilon;
    run_phase(&field, s, state, eps, observer)
}

/// Active phase to convergence, then the reactive phase from its final state.
pub fn simulate<O: Observer + ?Sized>(
    s: &Scenario,
    initial: FleetState,
    observer: &mut O,
) -> Result<(PhaseResult, PhaseResult)> {
    let active = run_active_phase(s, initial, observer)?;
    let reactive = run_reactive_phase(s, active.final_state.clone(), observer)?;
    Ok((active, reactive))
}
