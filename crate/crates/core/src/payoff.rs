//! Aggregate grid loads and the per-slot payoffs built on them.

use alloc::vec::Vec;

use crate::constraints::{barrier, BoundInterval};
use crate::error::{DraError, Result};
use crate::model::{FleetState, GridProfile, PevSpec};

/// Grid loads with the fleet connected.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateLoads {
    /// A_k, W.
    pub active: Vec<f64>,
    /// R_k, VAr.
    pub reactive: Vec<f64>,
}

/// Mean commitment and smoothing factor, the two knobs shared by every payoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub mu: f64,
    pub eta: f64,
}

/// `A_k = a_k + sum_i x[i][k] / t_ik`, `R_k = r_k + sum_i y[i][k]`.
pub fn aggregate_loads(
    grid: &GridProfile,
    fleet: &[PevSpec],
    state: &FleetState,
) -> Result<AggregateLoads> {
    let k = grid.slots();
    if state.x.len() != fleet.len() || state.y.len() != fleet.len() {
        return Err(DraError::Shape {
            what: "fleet state rows",
            expected: fleet.len(),
            found: state.x.len().min(state.y.len()),
        });
    }
    let mut active = grid.active_base.clone();
    let mut reactive = grid.reactive_base.clone();
    for (i, pev) in fleet.iter().enumerate() {
        let (x, y) = (&state.x[i], &state.y[i]);
        if x.len() != k || y.len() != k || pev.slot_widths.len() != k {
            return Err(DraError::Shape {
                what: "fleet state slots",
                expected: k,
                found: x.len(),
            });
        }
        for j in 0..k {
            active[j] += x[j] / pev.slot_widths[j];
            reactive[j] += y[j];
        }
    }
    Ok(AggregateLoads { active, reactive })
}

/// `(loads[k-1], loads[k], loads[k+1])` with the end values replicated past
/// either edge of the window.
pub fn extended_load(loads: &[f64], k: usize) -> (f64, f64, f64) {
    let last = loads.len() - 1;
    let prev = loads[k.saturating_sub(1)];
    let next = loads[(k + 1).min(last)];
    (prev, loads[k], next)
}

/// Grid term shared by both payoffs: level weighted by `mu*eta`, second
/// difference weighted by `mu*(1-eta)`.
fn grid_term(loads: &[f64], k: usize, w: Weights) -> f64 {
    let (prev, cur, next) = extended_load(loads, k);
    w.mu * w.eta * cur + w.mu * (1.0 - w.eta) * (2.0 * cur - prev - next)
}

/// Active payoff of slot `k` for a PEV holding `x_ik` there.
pub fn active_payoff(pev: &PevSpec, k: usize, x_ik: f64, loads: &AggregateLoads, w: Weights) -> f64 {
    let t = pev.slot_widths[k];
    -(1.0 - w.mu) * (x_ik - pev.preferred_rates[k]) / t - grid_term(&loads.active, k, w)
}

/// Reactive payoff of slot `k`.
pub fn reactive_payoff(k: usize, y_ik: f64, loads: &AggregateLoads, w: Weights) -> f64 {
    -(1.0 - w.mu) * y_ik - grid_term(&loads.reactive, k, w)
}

/// Active payoff plus `epsilon * barrier`.
pub fn modified_active_output(
    pev: &PevSpec,
    k: usize,
    x_ik: f64,
    bounds: &BoundInterval,
    loads: &AggregateLoads,
    w: Weights,
    epsilon: f64,
) -> Result<f64> {
    Ok(active_payoff(pev, k, x_ik, loads, w) + epsilon * barrier(x_ik, bounds)?)
}

/// Reactive payoff plus `epsilon * barrier`.
pub fn modified_reactive_output(
    k: usize,
    y_ik: f64,
    bounds: &BoundInterval,
    loads: &AggregateLoads,
    w: Weights,
    epsilon: f64,
) -> Result<f64> {
    Ok(reactive_payoff(k, y_ik, loads, w) + epsilon * barrier(y_ik, bounds)?)
}

/// The slack node carries no payoff of its own, only the barrier.
pub fn slack_output(slack: f64, bounds: &BoundInterval, epsilon: f64) -> Result<f64> {
    Ok(epsilon * barrier(slack, bounds)?)
}

/// Signal equalized by the active consensus flow: `epsilon * barrier - payoff`.
///
/// Increasing in `x_ik`, so `x' = -L * signal` moves energy away from slots
/// whose signal is above their neighbours'. Its spread equals the spread of
/// `payoff - epsilon * barrier`.
pub fn active_consensus_output(
    pev: &PevSpec,
    k: usize,
    x_ik: f64,
    bounds: &BoundInterval,
    loads: &AggregateLoads,
    w: Weights,
    epsilon: f64,
) -> Result<f64> {
    Ok(epsilon * barrier(x_ik, bounds)? - active_payoff(pev, k, x_ik, loads, w))
}

/// Reactive counterpart of [`active_consensus_output`].
pub fn reactive_consensus_output(
    k: usize,
    y_ik: f64,
    bounds: &BoundInterval,
    loads: &AggregateLoads,
    w: Weights,
    epsilon: f64,
) -> Result<f64> {
    Ok(epsilon * barrier(y_ik, bounds)? - reactive_payoff(k, y_ik, loads, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pev(k: usize, x_star: f64) -> PevSpec {
        PevSpec {
            soc_init: 15500.0,
            soc_target: 16000.0,
            soc_upper: 18500.0,
            soc_lower: 13500.0,
            charger_power: 3000.0,
            slot_widths: vec![1.0; k],
            commitment: 0.5,
            preferred_rates: vec![x_star; k],
        }
    }

    fn loads(active: &[f64], reactive: &[f64]) -> AggregateLoads {
        AggregateLoads {
            active: active.to_vec(),
            reactive: reactive.to_vec(),
        }
    }

    #[test]
    fn empty_fleet_leaves_baseline() {
        let g = GridProfile {
            active_base: vec![1.0, 2.0, 3.0],
            reactive_base: vec![4.0, 5.0, 6.0],
        };
        let l = aggregate_loads(&g, &[], &FleetState::zeros(0, 3)).unwrap();
        assert_eq!(l.active, g.active_base);
        assert_eq!(l.reactive, g.reactive_base);
    }

    #[test]
    fn fleet_contributions_add_as_power() {
        let g = GridProfile {
            active_base: vec![10_000.0, 10_000.0],
            reactive_base: vec![0.0, 0.0],
        };
        let mut a = pev(2, 0.0);
        a.slot_widths = vec![0.5, 1.0];
        let b = pev(2, 0.0);
        let mut st = FleetState::zeros(2, 2);
        st.x[0] = vec![250.0, 0.0]; // 500 W over half an hour
        st.x[1] = vec![-200.0, 0.0];
        st.y[0] = vec![100.0, 0.0];
        st.y[1] = vec![-100.0, 0.0];
        let l = aggregate_loads(&g, &[a, b], &st).unwrap();
        assert_eq!(l.active[0], 10_300.0);
        assert_eq!(l.reactive[0], 0.0);
    }

    #[test]
    fn shape_mismatch() {
        let g = GridProfile {
            active_base: vec![0.0; 3],
            reactive_base: vec![0.0; 3],
        };
        assert!(aggregate_loads(&g, &[pev(3, 0.0)], &FleetState::zeros(2, 3)).is_err());
        assert!(aggregate_loads(&g, &[pev(3, 0.0)], &FleetState::zeros(1, 4)).is_err());
    }

    #[test]
    fn edge_replication() {
        let l = [5.0, 7.0, 9.0];
        assert_eq!(extended_load(&l, 0), (5.0, 5.0, 7.0));
        assert_eq!(extended_load(&l, 1), (5.0, 7.0, 9.0));
        assert_eq!(extended_load(&l, 2), (7.0, 9.0, 9.0));
    }

    #[test]
    fn active_payoff_cases() {
        let p = pev(3, 50.0);
        let l = loads(&[10_000.0, 10_300.0, 10_100.0], &[0.0; 3]);
        let w0 = Weights { mu: 0.0, eta: 0.3 };
        assert_eq!(active_payoff(&p, 1, 50.0, &l, w0), 0.0);
        let w1 = Weights { mu: 1.0, eta: 1.0 };
        assert_eq!(active_payoff(&p, 1, 123.0, &l, w1), -10_300.0);
        let w = Weights { mu: 0.5, eta: 0.8 };
        let f = active_payoff(&p, 1, 100.0, &l, w);
        assert!((f - (-4195.0)).abs() < 1e-9, "{f}");
    }

    #[test]
    fn reactive_payoff_cases() {
        let l = loads(&[0.0; 3], &[200.0, 260.0, 230.0]);
        assert_eq!(reactive_payoff(1, 0.0, &l, Weights { mu: 0.0, eta: 0.5 }), 0.0);
        assert_eq!(reactive_payoff(1, 7.0, &l, Weights { mu: 1.0, eta: 1.0 }), -260.0);
        let g = reactive_payoff(1, 40.0, &l, Weights { mu: 0.5, eta: 0.8 });
        assert!((g - (-133.0)).abs() < 1e-9, "{g}");
    }

    #[test]
    fn modified_outputs() {
        let p = pev(3, 50.0);
        let l = loads(&[10_000.0, 10_300.0, 10_100.0], &[200.0, 260.0, 230.0]);
        let w = Weights { mu: 0.5, eta: 0.8 };
        let b = BoundInterval::new(-2000.0, 3000.0).unwrap();
        let mid = b.midpoint();
        assert_eq!(
            modified_active_output(&p, 1, mid, &b, &l, w, 40.0).unwrap(),
            active_payoff(&p, 1, mid, &l, w)
        );
        let near = b.upper - 1e-9 * b.width();
        let raw = active_payoff(&p, 1, near, &l, w);
        assert!(modified_active_output(&p, 1, near, &b, &l, w, 2.0).unwrap() >= raw + 2.0 * 15.0);
        for x in [-1500.0, 0.0, 2500.0] {
            assert_eq!(
                modified_active_output(&p, 1, x, &b, &l, w, 0.0).unwrap(),
                active_payoff(&p, 1, x, &l, w)
            );
        }
        assert!(modified_active_output(&p, 1, 3000.0, &b, &l, w, 1.0).is_err());

        let q = BoundInterval::symmetric(3000.0).unwrap();
        let zero = loads(&[0.0; 3], &[0.0; 3]);
        assert_eq!(
            modified_reactive_output(1, 0.0, &q, &zero, Weights { mu: 0.0, eta: 0.5 }, 1.0)
                .unwrap(),
            0.0
        );
        let r = modified_reactive_output(1, 40.0, &q, &l, w, 0.0).unwrap();
        assert!((r + 133.0).abs() < 1e-9);
        let s = BoundInterval::symmetric(30_000.0).unwrap();
        assert_eq!(slack_output(0.0, &s, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn consensus_output_is_negated_payoff_at_midpoint() {
        let p = pev(3, 50.0);
        let l = loads(&[10_000.0, 10_300.0, 10_100.0], &[0.0; 3]);
        let w = Weights { mu: 0.5, eta: 0.8 };
        let b = BoundInterval::new(-2000.0, 3000.0).unwrap();
        let c = active_consensus_output(&p, 1, b.midpoint(), &b, &l, w, 9.0).unwrap();
        assert_eq!(c, -active_payoff(&p, 1, b.midpoint(), &l, w));
    }

    #[test]
    fn active_payoff_decreases_with_own_strategy() {
        // A_k includes the slot's own contribution x/t.
        let p = pev(4, 50.0);
        for (mu, eta) in [(0.0, 0.0), (0.3, 0.2), (0.5, 0.8), (0.99, 1.0), (0.7, 0.0)] {
            let w = Weights { mu, eta };
            let base = [10_000.0, 11_000.0, 9_000.0, 10_500.0];
            let eval = |x: f64| {
                let mut a = base.to_vec();
                a[2] += x;
                let l = loads(&a, &[0.0; 4]);
                active_payoff(&p, 2, x, &l, w)
            };
            let mut prev = eval(-2000.0);
            for step in 1..40 {
                let cur = eval(-2000.0 + 100.0 * step as f64);
                assert!(cur < prev);
                prev = cur;
            }
        }
    }
}
