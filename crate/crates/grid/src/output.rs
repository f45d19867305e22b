//! Result files written by `run`: `strategies.csv`, `soc.csv`, `loads.csv`
//! and `report.json`. PEV and slot numbers in files start at 1.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use dra_core::dynamics::PhaseResult;
use dra_core::metrics::RunReport;
use dra_core::Scenario;
use serde::{Deserialize, Serialize};

use crate::error::GridError;

/// Decimal rendering with 9 significant digits.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).clamp(0, 20) as usize;
    let s = format!("{v:.decimals$}");
    if s.trim_start_matches('-').trim_matches(['0', '.']).is_empty() {
        "0".into()
    } else {
        s
    }
}

pub fn strategies_csv(report: &RunReport) -> String {
    let st = &report.reactive.final_state;
    let mut out = String::from("pev,slot,x_Wh,y_VAr\n");
    for (i, (x, y)) in st.x.iter().zip(&st.y).enumerate() {
        for k in 0..x.len() {
            let _ = writeln!(out, "{},{},{},{}", i + 1, k + 1, fmt_sig(x[k]), fmt_sig(y[k]));
        }
    }
    out
}

pub fn soc_csv(report: &RunReport) -> String {
    let slots = report
        .soc_trajectories
        .first()
        .map_or(report.final_loads.active.len() + 1, Vec::len);
    let mut out = String::from("pev");
    for k in 0..slots {
        let _ = write!(out, ",soc_{k}");
    }
    out.push('\n');
    for (i, row) in report.soc_trajectories.iter().enumerate() {
        out.push_str(&(i + 1).to_string());
        for v in row {
            out.push(',');
            out.push_str(&fmt_sig(*v));
        }
        out.push('\n');
    }
    out
}

pub fn loads_csv(report: &RunReport) -> String {
    let (base, with) = (&report.baseline_loads, &report.final_loads);
    let mut out = String::from("slot,baseline_W,with_dra_W,baseline_VAr,with_dra_VAr\n");
    for k in 0..base.active.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            k + 1,
            fmt_sig(base.active[k]),
            fmt_sig(with.active[k]),
            fmt_sig(base.reactive[k]),
            fmt_sig(with.reactive[k])
        );
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PhaseSummary {
    pub converged: bool,
    pub steps_taken: usize,
    pub epsilon: f64,
    pub step_size: f64,
    pub tolerance: f64,
    pub final_spread: Vec<f64>,
    pub conservation_drift: Vec<f64>,
}

impl From<&PhaseResult> for PhaseSummary {
    fn from(p: &PhaseResult) -> Self {
        PhaseSummary {
            converged: p.converged,
            steps_taken: p.steps_taken,
            epsilon: p.epsilon,
            step_size: p.step_size,
            tolerance: p.tolerance,
            final_spread: p.final_spread.clone(),
            conservation_drift: p.conservation_drift.clone(),
        }
    }
}

/// Contents of `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportFile {
    pub converged: bool,
    pub pevs: usize,
    pub slots: usize,
    pub mean_commitment: f64,
    pub eta: f64,
    pub smoothness_with: f64,
    pub smoothness_without: f64,
    pub smoothing_improvement: f64,
    pub variance_with: f64,
    pub variance_without: f64,
    pub final_soc: Vec<f64>,
    pub slack: Vec<f64>,
    pub active: PhaseSummary,
    pub reactive: PhaseSummary,
}

impl ReportFile {
    pub fn new(s: &Scenario, r: &RunReport) -> Self {
        ReportFile {
            converged: r.converged(),
            pevs: s.fleet().len(),
            slots: s.slots(),
            mean_commitment: s.mean_commitment(),
            eta: s.params().eta,
            smoothness_with: r.smoothness_with,
            smoothness_without: r.smoothness_without,
            smoothing_improvement: r.smoothing_improvement(),
            variance_with: r.variance_with,
            variance_without: r.variance_without,
            final_soc: r
                .soc_trajectories
                .iter()
                .map(|t| *t.last().expect("trajectory has the initial SoC"))
                .collect(),
            slack: r.reactive.final_state.slack.clone(),
            active: (&r.active).into(),
            reactive: (&r.reactive).into(),
        }
    }

    pub fn read(dir: &Path) -> Result<Self, GridError> {
        let path = dir.join("report.json");
        let text = fs::read_to_string(&path).map_err(GridError::io(&path))?;
        serde_json::from_str(&text).map_err(GridError::parse)
    }

    /// Human-readable summary for the `report` subcommand.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} PEVs x {} slots, mean commitment {}, eta {}",
            self.pevs, self.slots, self.mean_commitment, self.eta
        );
        for (name, p) in [("active", &self.active), ("reactive", &self.reactive)] {
            let spread = p.final_spread.iter().copied().fold(0.0, f64::max);
            let drift = p.conservation_drift.iter().copied().fold(0.0, f64::max);
            let _ = writeln!(
                out,
                "{name:>8}: {} after {} steps (max spread {}, tolerance {}, max drift {})",
                if p.converged { "converged" } else { "NOT converged" },
                p.steps_taken,
                fmt_sig(spread),
                fmt_sig(p.tolerance),
                fmt_sig(drift)
            );
        }
        let _ = writeln!(
            out,
            "smoothness {} -> {} ({:.1}% reduction)",
            fmt_sig(self.smoothness_without),
            fmt_sig(self.smoothness_with),
            100.0 * self.smoothing_improvement
        );
        let _ = writeln!(
            out,
            "variance   {} -> {}",
            fmt_sig(self.variance_without),
            fmt_sig(self.variance_with)
        );
        let socs: Vec<String> = self.final_soc.iter().map(|v| fmt_sig(*v)).collect();
        let _ = writeln!(out, "final SoC (Wh): {}", socs.join(", "));
        out
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), GridError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(GridError::io(path))
}

pub fn write_run(dir: &Path, s: &Scenario, report: &RunReport) -> Result<(), GridError> {
    fs::create_dir_all(dir).map_err(GridError::io(dir))?;
    write(dir, "strategies.csv", &strategies_csv(report))?;
    write(dir, "soc.csv", &soc_csv(report))?;
    write(dir, "loads.csv", &loads_csv(report))?;
    let json = serde_json::to_string_pretty(&ReportFile::new(s, report))
        .expect("report serializes to JSON");
    write(dir, "report.json", &(json + "\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(-0.0), "0");
        assert_eq!(fmt_sig(16000.0), "16000.0000");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig(-2000.0 / 3.0), "-666.666667");
        assert_eq!(fmt_sig(1.5e-7), "0.000000150000000");
        assert_eq!(fmt_sig(123456789012.0), "123456789012");
        assert_eq!(fmt_sig(f64::NAN), "NaN");
    }
}
