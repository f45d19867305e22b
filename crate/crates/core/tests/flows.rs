use dra_core::constraints::{active_bounds, reactive_envelope, slack_bounds};
use dra_core::dynamics::{
    conservation_check, run_active_phase, run_reactive_phase, simulate, Observer, PhaseKind,
};
use dra_core::metrics::consensus_spread;
use dra_core::model::{init_fleet_state, validate_scenario};
use dra_core::oracle::{reference_integrate, solve_single_pev};
use dra_core::{FleetState, GridProfile, PevSpec, Scenario, SimParams};

fn reference_pev(k: usize) -> PevSpec {
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

fn step_grid() -> GridProfile {
    GridProfile::step(10, 10_000.0, 3_000.0, 2_000.0, 600.0, 4..=6)
}

fn scenario(fleet: Vec<PevSpec>, params: SimParams) -> Scenario {
    validate_scenario(step_grid(), fleet, params).unwrap()
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

/// Checks bounds at every recorded step and keeps the spread history.
struct Invariants<'a> {
    s: &'a Scenario,
    violations: usize,
    records: usize,
    history: Vec<(PhaseKind, f64)>,
}

impl Observer for Invariants<'_> {
    fn record(&mut self, phase: PhaseKind, _step: usize, st: &FleetState, spreads: &[f64]) {
        self.records += 1;
        for (i, pev) in self.s.fleet().iter().enumerate() {
            let row = &st.x[i];
            for k in 0..row.len() {
                match active_bounds(pev, k, row) {
                    Ok(b) if b.contains_open(row[k]) => {}
                    _ => self.violations += 1,
                }
            }
            let env = reactive_envelope(pev, row).unwrap();
            for (y, q) in st.y[i].iter().zip(&env.per_slot_limit) {
                if y.abs() >= *q {
                    self.violations += 1;
                }
            }
            if !slack_bounds(&env).unwrap().contains_open(st.slack[i]) {
                self.violations += 1;
            }
        }
        self.history
            .push((phase, spreads.iter().copied().fold(0.0, f64::max)));
    }
}

#[test]
fn six_pev_run_stays_feasible_and_spread_settles() {
    let s = scenario(vec![reference_pev(10); 6], SimParams {
        record_stride: 5,
        ..SimParams::default()
    });
    let mut obs = Invariants {
        s: &s,
        violations: 0,
        records: 0,
        history: Vec::new(),
    };
    let (a, r) = simulate(&s, init_fleet_state(&s).unwrap(), &mut obs).unwrap();
    assert!(a.converged && r.converged);
    assert!(obs.records > 50);
    assert_eq!(obs.violations, 0);

    for phase in [PhaseKind::Active, PhaseKind::Reactive] {
        let spreads: Vec<f64> = obs
            .history
            .iter()
            .filter(|(p, _)| *p == phase)
            .map(|(_, s)| *s)
            .collect();
        let tail = &spreads[spreads.len() / 10..];
        for w in tail.windows(2) {
            assert!(w[1] <= w[0], "{phase:?}: spread grew {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn long_run_conservation_budget() {
    let s = scenario(vec![reference_pev(10); 6], SimParams {
        tolerance: Some(1e-300),
        max_steps: 100_000,
        ..SimParams::default()
    });
    let r = run_active_phase(&s, init_fleet_state(&s).unwrap(), &mut ()).unwrap();
    assert_eq!(r.steps_taken, 100_000);
    for d in conservation_check(&r.final_state, &s) {
        assert!(d.active < 1e-6 * 500.0, "{}", d.active);
    }
}

#[test]
fn single_pev_outputs_reach_common_value() {
    let s = scenario(vec![reference_pev(10)], SimParams::default());
    let a = run_active_phase(&s, init_fleet_state(&s).unwrap(), &mut ()).unwrap();
    assert!(a.converged);
    // output scale: the largest raw payoff is 100 epsilon
    let scale = 100.0 * a.epsilon;
    assert!(a.final_spread[0] <= 1e-6 * scale);
    let soc: f64 = 15500.0 + a.final_state.x[0].iter().sum::<f64>();
    assert!((soc - 16000.0).abs() < 1e-9);
}

#[test]
fn zero_commitment_follows_preferences() {
    let mut pev = reference_pev(10);
    pev.commitment = 0.0;
    pev.preferred_rates = vec![20.0, 80.0, 30.0, 70.0, 40.0, 60.0, 45.0, 55.0, 50.0, 50.0];
    let s = scenario(vec![pev.clone(); 3], SimParams {
        epsilon: Some(1e-6),
        ..SimParams::default()
    });
    let a = run_active_phase(&s, init_fleet_state(&s).unwrap(), &mut ()).unwrap();
    assert!(a.converged);
    for row in &a.final_state.x {
        for (x, want) in row.iter().zip(&pev.preferred_rates) {
            assert!((x - want).abs() <= 0.01 * want.abs(), "{x} vs {want}");
        }
    }
}

#[test]
fn permuting_pevs_permutes_results() {
    let mut a = reference_pev(10);
    a.commitment = 0.3;
    let mut b = reference_pev(10);
    b.soc_target = 16500.0;
    b.preferred_rates = vec![100.0; 10];
    let mut c = reference_pev(10);
    c.charger_power = 2500.0;
    let fwd = scenario(vec![a.clone(), b.clone(), c.clone()], SimParams::default());
    let rev = scenario(vec![c, b, a], SimParams::default());
    let (_, rf) = simulate(&fwd, init_fleet_state(&fwd).unwrap(), &mut ()).unwrap();
    let (_, rr) = simulate(&rev, init_fleet_state(&rev).unwrap(), &mut ()).unwrap();
    for (i, j) in [(0, 2), (1, 1), (2, 0)] {
        assert!(rel_diff(&rf.final_state.x[i], &rr.final_state.x[j]) < 1e-9);
        assert!(rel_diff(&rf.final_state.y[i], &rr.final_state.y[j]) < 1e-9);
    }
}

#[test]
fn reactive_phase_keeps_active_strategies() {
    let s = scenario(vec![reference_pev(10); 2], SimParams::default());
    let a = run_active_phase(&s, init_fleet_state(&s).unwrap(), &mut ()).unwrap();
    let r = run_reactive_phase(&s, a.final_state.clone(), &mut ()).unwrap();
    assert_eq!(r.final_state.x, a.final_state.x);
    let env = reactive_envelope(&s.fleet()[0], &a.final_state.x[0]).unwrap();
    assert!(r.conservation_drift[0] < 1e-9 * env.total_capacity);
}

fn k3_case(base: [f64; 3]) -> (PevSpec, GridProfile) {
    (
        reference_pev(3),
        GridProfile {
            active_base: base.to_vec(),
            reactive_base: vec![0.0; 3],
        },
    )
}

#[test]
fn oracle_matches_flow_on_flat_baseline() {
    let (pev, grid) = k3_case([10_000.0; 3]);
    let s = validate_scenario(grid.clone(), vec![pev.clone()], SimParams::default()).unwrap();
    let a = run_active_phase(&s, init_fleet_state(&s).unwrap(), &mut ()).unwrap();
    let sol = solve_single_pev(&pev, &grid, 0.8, a.epsilon, &[0.0; 3]).unwrap();
    assert!(sol.residual < 1e-8, "{}", sol.residual);
    assert!(rel_diff(&a.final_state.x[0], &sol.x_star) < 1e-4);
}

#[test]
fn reference_integrator_agrees_and_is_step_converged() {
    let (pev, grid) = k3_case([10_000.0, 13_000.0, 10_000.0]);
    let s = validate_scenario(grid.clone(), vec![pev.clone()], SimParams::default()).unwrap();
    let start = init_fleet_state(&s).unwrap();
    let a = run_active_phase(&s, start.clone(), &mut ()).unwrap();
    let fixed = validate_scenario(
        grid,
        vec![pev],
        SimParams {
            epsilon: Some(a.epsilon),
            tolerance: Some(a.tolerance),
            ..SimParams::default()
        },
    )
    .unwrap();
    let h = a.step_size / 100.0;
    let fine = reference_integrate(&fixed, &start, h).unwrap();
    let finer = reference_integrate(&fixed, &start, h / 2.0).unwrap();
    assert!(rel_diff(&a.final_state.x[0], &fine.x[0]) < 1e-4);
    assert!(rel_diff(&fine.x[0], &finer.x[0]) < 1e-6);
}

#[test]
fn reference_integrator_at_rest_returns_input() {
    let mut pev = reference_pev(4);
    pev.soc_upper = f64::INFINITY;
    pev.soc_lower = f64::NEG_INFINITY;
    let grid = GridProfile {
        active_base: vec![10_000.0; 4],
        reactive_base: vec![0.0; 4],
    };
    let s = validate_scenario(grid, vec![pev], SimParams::default()).unwrap();
    let st = init_fleet_state(&s).unwrap();
    assert_eq!(reference_integrate(&s, &st, 1e-3).unwrap(), st);
}

#[test]
fn spread_of_outputs_matches_report() {
    let s = scenario(vec![reference_pev(10); 2], SimParams::default());
    let a = run_active_phase(&s, init_fleet_state(&s).unwrap(), &mut ()).unwrap();
    assert_eq!(a.final_spread.len(), 2);
    assert!(a.final_spread.iter().all(|&d| d <= a.tolerance));
    assert_eq!(consensus_spread(&[]), 0.0);
}
