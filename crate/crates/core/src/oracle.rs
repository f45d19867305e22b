//! Brute-force equilibrium solver and a fixed-step reference integrator,
//! both independent of the main integrator, for cross-checking small cases.

use alloc::vec;
use alloc::vec::Vec;

use crate::constraints::{active_bounds, barrier};
use crate::dynamics::auto_active_epsilon;
use crate::error::{DraError, Result};
use crate::metrics::consensus_spread;
use crate::model::{FleetState, GridProfile, PevSpec, Scenario};
use crate::payoff::{active_payoff, aggregate_loads, AggregateLoads, Weights};

/// Bisection depth for both the multiplier and the per-slot roots.
pub const BISECTION_DEPTH: usize = 80;
const MAX_SWEEPS: usize = 200;
const ROOT_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSolution {
    pub x_star: Vec<f64>,
    pub consensus_value: f64,
    /// `max_k |output_k(x_star) - consensus_value|`.
    pub residual: f64,
    /// Gauss-Seidel sweeps used to settle the neighbour coupling.
    pub sweeps: usize,
}

/// Single-vehicle problem: one PEV against a baseline plus a fixed
/// contribution from everybody else.
struct SinglePev<'a> {
    pev: &'a PevSpec,
    base: Vec<f64>,
    w: Weights,
    epsilon: f64,
}

impl SinglePev<'_> {
    fn loads(&self, row: &[f64]) -> AggregateLoads {
        let active = self
            .base
            .iter()
            .zip(row)
            .zip(&self.pev.slot_widths)
            .map(|((a, x), t)| a + x / t)
            .collect();
        AggregateLoads {
            active,
            reactive: vec![0.0; row.len()],
        }
    }

    /// Consensus output of slot `k`; `-inf`/`+inf` outside the open interval.
    fn output(&self, row: &[f64], k: usize) -> f64 {
        let b = match active_bounds(self.pev, k, row) {
            Ok(b) => b,
            Err(_) => return f64::NAN,
        };
        if row[k] <= b.lower {
            return f64::NEG_INFINITY;
        }
        if row[k] >= b.upper {
            return f64::INFINITY;
        }
        let beta = match barrier(row[k], &b) {
            Ok(v) => v,
            Err(_) if row[k] < b.midpoint() => return f64::NEG_INFINITY,
            Err(_) => return f64::INFINITY,
        };
        let loads = self.loads(row);
        self.epsilon * beta - active_payoff(self.pev, k, row[k], &loads, self.w)
    }

    /// Solves `output_k = lambda` slot by slot, earlier slots taken from
    /// this sweep and later ones from `prev`.
    fn sweep(&self, prev: &[f64], lambda: f64) -> Vec<f64> {
        let mut row = prev.to_vec();
        for k in 0..row.len() {
            let b = active_bounds(self.pev, k, &row).expect("prefix stays inside SoC box");
            let (mut lo, mut hi) = (b.lower, b.upper);
            for _ in 0..BISECTION_DEPTH {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                row[k] = mid;
                if self.output(&row, k) < lambda {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            row[k] = 0.5 * (lo + hi);
        }
        row
    }

    fn excess(&self, prev: &[f64], lambda: f64) -> f64 {
        self.sweep(prev, lambda).iter().sum::<f64>() - self.pev.demand()
    }

    fn solve_lambda(&self, prev: &[f64]) -> Result<f64> {
        let scale = (0..prev.len())
            .map(|k| self.output(prev, k).abs())
            .filter(|v| v.is_finite())
            .fold(1.0, f64::max);
        let (mut lo, mut hi) = (-scale, scale);
        let mut bracketed = false;
        for _ in 0..200 {
            let (el, eh) = (self.excess(prev, lo), self.excess(prev, hi));
            if el <= 0.0 && eh >= 0.0 {
                bracketed = true;
                break;
            }
            if el > 0.0 {
                lo *= 2.0;
            }
            if eh < 0.0 {
                hi *= 2.0;
            }
        }
        if !bracketed {
            return Err(DraError::NoRoot {
                what: "consensus multiplier",
            });
        }
        for _ in 0..BISECTION_DEPTH {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.excess(prev, mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Counts sign changes of `output_k - lambda` across the slot's interval.
    fn root_count(&self, row: &[f64], k: usize, lambda: f64) -> usize {
        let b = active_bounds(self.pev, k, row).expect("feasible row");
        let mut probe = row.to_vec();
        let mut changes = 0;
        let mut last: Option<bool> = None;
        for j in 1..ROOT_SAMPLES {
            probe[k] = b.lower + b.width() * j as f64 / ROOT_SAMPLES as f64;
            let above = self.output(&probe, k) >= lambda;
            if let Some(prev) = last {
                if prev != above {
                    changes += 1;
                }
            }
            last = Some(above);
        }
        changes
    }
}

/// Equal-output point of one PEV under the resource constraint.
///
/// `others_fixed` is a constant active power per slot added to the
/// baseline; pass zeros for a lone vehicle. The PEV's own commitment is used
/// as the mean commitment.
pub fn solve_single_pev(
    pev: &PevSpec,
    grid: &GridProfile,
    eta: f64,
    epsilon: f64,
    others_fixed: &[f64],
) -> Result<EquilibriumSolution> {
    let k = grid.slots();
    if pev.slots() != k || others_fixed.len() != k {
        return Err(DraError::Shape {
            what: "oracle inputs",
            expected: k,
            found: others_fixed.len().min(pev.slots()),
        });
    }
    let problem = SinglePev {
        pev,
        base: grid
            .active_base
            .iter()
            .zip(others_fixed)
            .map(|(a, o)| a + o)
            .collect(),
        w: Weights {
            mu: pev.commitment,
            eta,
        },
        epsilon,
    };

    let mut x = vec![pev.demand() / k as f64; k];
    let mut lambda = 0.0;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        lambda = problem.solve_lambda(&x)?;
        let next = problem.sweep(&x, lambda);
        let scale = next.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let moved = next
            .iter()
            .zip(&x)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        x = next;
        if moved <= 1e-13 * scale {
            break;
        }
    }

    for slot in 0..k {
        let count = problem.root_count(&x, slot, lambda);
        if count > 1 {
            return Err(DraError::MultiRoot { slot, count });
        }
    }
    let residual = (0..k)
        .map(|slot| (problem.output(&x, slot) - lambda).abs())
        .fold(0.0, f64::max);
    Ok(EquilibriumSolution {
        x_star: x,
        consensus_value: lambda,
        residual,
        sweeps,
    })
}

/// Bisection root of a scalar function on `[lo, hi]` that fails loudly when
/// sampling shows more than one sign change.
pub fn bisect_unique<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<f64> {
    let mut changes = 0;
    let mut last = f(lo) >= 0.0;
    for j in 1..=ROOT_SAMPLES {
        let v = f(lo + (hi - lo) * j as f64 / ROOT_SAMPLES as f64) >= 0.0;
        if v != last {
            changes += 1;
        }
        last = v;
    }
    match changes {
        0 => return Err(DraError::NoRoot { what: "scalar bisection" }),
        1 => {}
        n => return Err(DraError::MultiRoot { slot: 0, count: n }),
    }
    let rising = f(hi) >= 0.0;
    let (mut a, mut b) = (lo, hi);
    for _ in 0..BISECTION_DEPTH {
        let m = 0.5 * (a + b);
        if (f(m) >= 0.0) == rising {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Fixed-step Euler integration of the active flow with a dense Laplacian
/// product and no step control. A step that leaves the feasible box is an
/// error rather than being retried.
pub fn reference_integrate(s: &Scenario, state: &FleetState, h_fine: f64) -> Result<FleetState> {
    let params = s.params();
    let k = s.slots();
    let w = Weights {
        mu: s.mean_commitment(),
        eta: params.eta,
    };
    let epsilon = match params.epsilon {
        Some(e) => e,
        None => auto_active_epsilon(s, state)?,
    };
    let graph = params.topology.build(k)?;
    let lap = graph.laplacian();

    let outputs = |st: &FleetState| -> Result<Vec<Vec<f64>>> {
        let loads = aggregate_loads(s.grid(), s.fleet(), st)?;
        s.fleet()
            .iter()
            .zip(&st.x)
            .map(|(pev, row)| {
                (0..k)
                    .map(|j| {
                        let b = active_bounds(pev, j, row)?;
                        Ok(epsilon * barrier(row[j], &b)? - active_payoff(pev, j, row[j], &loads, w))
                    })
                    .collect()
            })
            .collect()
    };

    let mut st = state.clone();
    let mut out = outputs(&st)?;
    let initial = out.iter().map(|o| consensus_spread(o)).fold(0.0, f64::max);
    let tol = params.tolerance.unwrap_or(1e-6 * initial);
    for _ in 0..params.max_steps {
        if out.iter().all(|o| consensus_spread(o) <= tol) {
            break;
        }
        for (i, o) in out.iter().enumerate() {
            for (x, row) in st.x[i].iter_mut().zip(lap) {
                let lo: f64 = row.iter().zip(o).map(|(l, v)| l * v).sum();
                *x -= h_fine * lo;
            }
            if let Some(slot) = crate::model::first_active_violation(&s.fleet()[i], &st.x[i]) {
                return Err(DraError::StepCollapse { pev: i, slot });
            }
        }
        out = outputs(&st)?;
    }
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pev(k: usize) -> PevSpec {
        PevSpec {
            soc_init: 15500.0,
            soc_target: 16000.0,
            soc_upper: 18500.0,
            soc_lower: 13500.0,
            charger_power: 3000.0,
            slot_widths: vec![1.0; k],
            commitment: 0.5,
            preferred_rates: vec![500.0 / k as f64; k],
        }
    }

    fn flat(k: usize) -> GridProfile {
        GridProfile {
            active_base: vec![10_000.0; k],
            reactive_base: vec![0.0; k],
        }
    }

    #[test]
    fn zero_commitment_recovers_preferences() {
        let mut p = pev(4);
        p.commitment = 0.0;
        p.preferred_rates = vec![-100.0, 300.0, 250.0, 50.0];
        let sol = solve_single_pev(&p, &flat(4), 0.5, 1e-9, &[0.0; 4]).unwrap();
        for (x, want) in sol.x_star.iter().zip(&p.preferred_rates) {
            assert!((x - want).abs() < 1e-6, "{x} vs {want}");
        }
        assert!(sol.residual < 1e-8);
    }

    #[test]
    fn symmetric_two_slots_split_evenly() {
        let mut p = pev(2);
        p.soc_upper = f64::INFINITY;
        p.soc_lower = f64::NEG_INFINITY;
        let sol = solve_single_pev(&p, &flat(2), 0.8, 40.0, &[0.0; 2]).unwrap();
        assert!((sol.x_star[0] - 250.0).abs() < 1e-9);
        assert!((sol.x_star[1] - 250.0).abs() < 1e-9);
    }

    #[test]
    fn resource_constraint_and_residual() {
        let grid = GridProfile {
            active_base: vec![10_000.0, 13_000.0, 10_000.0],
            reactive_base: vec![0.0; 3],
        };
        let sol = solve_single_pev(&pev(3), &grid, 0.8, 45.0, &[0.0; 3]).unwrap();
        let sum: f64 = sol.x_star.iter().sum();
        assert!((sum - 500.0).abs() < 1e-10 * 500.0);
        assert!(sol.residual < 1e-8, "{}", sol.residual);
        // less energy goes into the loaded slot
        assert!(sol.x_star[1] < sol.x_star[0]);
    }

    #[test]
    fn others_fixed_shifts_the_load() {
        let g = flat(3);
        let bump = [0.0, 2_000.0, 0.0];
        let a = solve_single_pev(&pev(3), &g, 1.0, 45.0, &bump).unwrap();
        let stepped = GridProfile {
            active_base: vec![10_000.0, 12_000.0, 10_000.0],
            reactive_base: vec![0.0; 3],
        };
        let b = solve_single_pev(&pev(3), &stepped, 1.0, 45.0, &[0.0; 3]).unwrap();
        assert_eq!(a.x_star, b.x_star);
    }

    #[test]
    fn shape_errors() {
        assert!(solve_single_pev(&pev(3), &flat(3), 0.8, 1.0, &[0.0; 2]).is_err());
        assert!(solve_single_pev(&pev(4), &flat(3), 0.8, 1.0, &[0.0; 3]).is_err());
    }

    #[test]
    fn scalar_bisection_flags_multiple_roots() {
        let r = bisect_unique(|x| x - 0.3, 0.0, 1.0).unwrap();
        assert!((r - 0.3).abs() < 1e-12);
        let r = bisect_unique(|x| 0.3 - x, 0.0, 1.0).unwrap();
        assert!((r - 0.3).abs() < 1e-12);
        assert!(matches!(
            bisect_unique(|x| (x - 0.25) * (x - 0.75), 0.0, 1.0),
            Err(DraError::MultiRoot { count: 2, .. })
        ));
        assert!(matches!(
            bisect_unique(|x| x + 1.0, 0.0, 1.0),
            Err(DraError::NoRoot { .. })
        ));
    }
}
