//! Commitment / smoothing-factor sweeps.

use std::env;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use dra_core::metrics::RunReport;
use dra_core::model::validate_scenario;
use dra_core::Scenario;

use crate::output::fmt_sig;
use crate::run_scenario;

pub const DEFAULT_MU: [f64; 4] = [0.0, 0.25, 0.5, 0.75];
pub const DEFAULT_ETA: [f64; 5] = [0.0, 0.2, 0.5, 0.8, 1.0];

/// Environment variable capping the number of sweep worker threads.
pub const THREADS_VAR: &str = "DRA_GRID_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub mu: f64,
    pub eta: f64,
    pub smoothness_with: f64,
    pub variance_with: f64,
    pub converged: bool,
    /// Set when the cell could not be run at all.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub mu_values: Vec<f64>,
    pub eta_values: Vec<f64>,
    /// `rows[m * eta_values.len() + e]` holds cell `(mu_values[m], eta_values[e])`.
    pub rows: Vec<SweepRow>,
}

impl SweepGrid {
    pub fn cell(&self, m: usize, e: usize) -> &SweepRow {
        &self.rows[m * self.eta_values.len() + e]
    }

    /// `sweep.csv` contents, rows ordered by `(mu, eta)`.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<&SweepRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| a.mu.total_cmp(&b.mu).then(a.eta.total_cmp(&b.eta)));
        let mut out = String::from("mu,eta,smoothness_with,variance_with,converged,error\n");
        for r in rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt_sig(r.mu),
                fmt_sig(r.eta),
                fmt_sig(r.smoothness_with),
                fmt_sig(r.variance_with),
                r.converged,
                r.error.as_deref().unwrap_or("").replace([',', '\n'], ";")
            ));
        }
        out
    }
}

/// `base` with every commitment set to `mu` and the smoothing factor to `eta`.
pub fn override_cell(base: &Scenario, mu: f64, eta: f64) -> Result<Scenario, dra_core::DraError> {
    let (grid, mut fleet, mut params) = base.clone().into_parts();
    for pev in &mut fleet {
        pev.commitment = mu;
    }
    params.eta = eta;
    validate_scenario(grid, fleet, params)
}

pub fn run_cell(base: &Scenario, mu: f64, eta: f64) -> Result<RunReport, dra_core::DraError> {
    run_scenario(&override_cell(base, mu, eta)?, &mut ())
}

fn worker_count(cells: usize) -> usize {
    let available = thread::available_parallelism().map_or(1, |n| n.get());
    let cap = env::var(THREADS_VAR)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(available);
    cap.min(cells).max(1)
}

/// Runs every `(mu, eta)` cell. Cells are independent and may run on
/// several threads; a failing cell is recorded in its row.
pub fn sweep(base: &Scenario, mu_values: &[f64], eta_values: &[f64]) -> SweepGrid {
    let cells: Vec<(f64, f64)> = mu_values
        .iter()
        .flat_map(|&m| eta_values.iter().map(move |&e| (m, e)))
        .collect();
    let slots: Vec<Mutex<Option<SweepRow>>> = cells.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    thread::scope(|scope| {
        for _ in 0..worker_count(cells.len()) {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(mu, eta)) = cells.get(idx) else {
                    break;
                };
                let row = match run_cell(base, mu, eta) {
                    Ok(r) => SweepRow {
                        mu,
                        eta,
                        smoothness_with: r.smoothness_with,
                        variance_with: r.variance_with,
                        converged: r.converged(),
                        error: None,
                    },
                    Err(e) => SweepRow {
                        mu,
                        eta,
                        smoothness_with: f64::NAN,
                        variance_with: f64::NAN,
                        converged: false,
                        error: Some(e.to_string()),
                    },
                };
                *slots[idx].lock().expect("sweep slot lock") = Some(row);
            });
        }
    });
    SweepGrid {
        mu_values: mu_values.to_vec(),
        eta_values: eta_values.to_vec(),
        rows: slots
            .into_iter()
            .map(|m| m.into_inner().expect("sweep slot lock").expect("every cell ran"))
            .collect(),
    }
}
