//! File formats, command-line entry points and parameter sweeps around the
//! `dra-core` consensus charging simulator.

pub mod error;
pub mod output;
pub mod scenario;
pub mod sweep;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use dra_core::dynamics::{simulate, Observer, PhaseKind};
use dra_core::metrics::{build_report, RunReport};
use dra_core::model::init_fleet_state;
use dra_core::{FleetState, Scenario};

pub use error::GridError;
pub use scenario::{load_scenario, parse_scenario, scenario_to_json};

/// Exit status of `run` and `sweep`: converged.
pub const EXIT_OK: i32 = 0;
/// Failure to load inputs, write outputs, or integrate.
pub const EXIT_ERROR: i32 = 1;
/// Results were written but at least one phase did not converge.
pub const EXIT_NOT_CONVERGED: i32 = 2;

/// Both phases from the uniform initial split, then the report.
pub fn run_scenario<O: Observer + ?Sized>(
    s: &Scenario,
    observer: &mut O,
) -> Result<RunReport, dra_core::DraError> {
    let initial = init_fleet_state(s)?;
    let (active, reactive) = simulate(s, initial, observer)?;
    build_report(s, active, reactive)
}

/// Collects per-PEV output spreads as `phase,step,pev,spread` CSV rows.
#[derive(Debug, Default)]
pub struct Telemetry {
    csv: String,
}

impl Telemetry {
    pub fn new() -> Self {
        Telemetry {
            csv: String::from("phase,step,pev,spread\n"),
        }
    }

    pub fn into_csv(self) -> String {
        self.csv
    }
}

impl Observer for Telemetry {
    fn record(&mut self, phase: PhaseKind, step: usize, _state: &FleetState, spreads: &[f64]) {
        let name = match phase {
            PhaseKind::Active => "active",
            PhaseKind::Reactive => "reactive",
        };
        for (i, s) in spreads.iter().enumerate() {
            let _ = writeln!(self.csv, "{name},{step},{},{}", i + 1, output::fmt_sig(*s));
        }
    }
}

/// Options shared by `run` and `sweep` that override scenario parameters.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub topology: Option<dra_core::graph::Topology>,
    pub max_steps: Option<usize>,
}

impl Overrides {
    fn apply(&self, s: Scenario) -> Result<Scenario, GridError> {
        if self.topology.is_none() && self.max_steps.is_none() {
            return Ok(s);
        }
        let (grid, fleet, mut params) = s.into_parts();
        if let Some(t) = self.topology {
            params.topology = t;
        }
        if let Some(n) = self.max_steps {
            params.max_steps = n;
        }
        Ok(dra_core::model::validate_scenario(grid, fleet, params)?)
    }
}

fn try_run(
    scenario: &Path,
    out_dir: &Path,
    overrides: &Overrides,
    telemetry: bool,
) -> Result<bool, GridError> {
    let s = overrides.apply(load_scenario(scenario)?)?;
    let mut log = Telemetry::new();
    let report = run_scenario(&s, &mut log)?;
    output::write_run(out_dir, &s, &report)?;
    if telemetry {
        let path = out_dir.join("telemetry.csv");
        fs::write(&path, log.into_csv()).map_err(GridError::io(path))?;
    }
    Ok(report.converged())
}

/// `dra-grid run`: integrates both phases and writes the result files.
pub fn run_command(scenario: &Path, out_dir: &Path, overrides: &Overrides, telemetry: bool) -> i32 {
    match try_run(scenario, out_dir, overrides, telemetry) {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            eprintln!("warning: consensus not reached within max_steps; results written");
            EXIT_NOT_CONVERGED
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn try_sweep(
    scenario: &Path,
    mu: &[f64],
    eta: &[f64],
    out_dir: &Path,
    overrides: &Overrides,
) -> Result<bool, GridError> {
    let s = overrides.apply(load_scenario(scenario)?)?;
    let grid = sweep::sweep(&s, mu, eta);
    fs::create_dir_all(out_dir).map_err(GridError::io(out_dir))?;
    let path = out_dir.join("sweep.csv");
    fs::write(&path, grid.to_csv()).map_err(GridError::io(path))?;
    Ok(grid.rows.iter().all(|r| r.converged))
}

/// `dra-grid sweep`: one run per `(mu, eta)` cell, summarized in `sweep.csv`.
pub fn sweep_command(
    scenario: &Path,
    mu: &[f64],
    eta: &[f64],
    out_dir: &Path,
    overrides: &Overrides,
) -> i32 {
    match try_sweep(scenario, mu, eta, out_dir, overrides) {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            eprintln!("warning: some sweep cells failed or did not converge; see sweep.csv");
            EXIT_NOT_CONVERGED
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// `dra-grid report`: pretty-prints a run directory's `report.json`.
pub fn report_command(dir: &Path) -> i32 {
    match output::ReportFile::read(dir) {
        Ok(r) => {
            print!("{}", r.render());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
