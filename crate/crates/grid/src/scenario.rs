//! JSON scenario files.
//!
//! ```json
//! {
//!   "baseline": { "kind": "step", "slots": 10, "active_level": 10000,
//!                 "active_step": 3000, "first_slot": 5, "last_slot": 7 },
//!   "pevs": [ { "count": 6, "soc_init": 15500, "soc_target": 16000, ... } ],
//!   "params": { "eta": 0.8 }
//! }
//! ```
//!
//! Either `grid` (explicit `active_base` / `reactive_base` arrays) or
//! `baseline` (generated profile) must be present. Slot numbers in files
//! start at 1.

use std::fs;
use std::path::Path;

use dra_core::graph::Topology;
use dra_core::model::validate_scenario;
use dra_core::{GridProfile, PevSpec, Scenario, SimParams};
use serde::{Deserialize, Serialize};

use crate::error::GridError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Baseline>,
    pub pevs: Vec<PevFile>,
    #[serde(default)]
    pub params: ParamsFile,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub active_base: Vec<f64>,
    pub reactive_base: Vec<f64>,
}

/// Synthetic baseline generators.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Baseline {
    /// Constant level plus one additive step over `first_slot..=last_slot`.
    Step {
        slots: usize,
        active_level: f64,
        active_step: f64,
        #[serde(default)]
        reactive_level: f64,
        #[serde(default)]
        reactive_step: f64,
        first_slot: usize,
        last_slot: usize,
    },
}

impl Baseline {
    fn profile(&self) -> Result<GridProfile, GridError> {
        match *self {
            Baseline::Step {
                slots,
                active_level,
                active_step,
                reactive_level,
                reactive_step,
                first_slot,
                last_slot,
            } => {
                if first_slot == 0 || first_slot > last_slot || last_slot > slots {
                    return Err(GridError::Schema(format!(
                        "step slots {first_slot}..={last_slot} outside 1..={slots}"
                    )));
                }
                Ok(GridProfile::step(
                    slots,
                    active_level,
                    active_step,
                    reactive_level,
                    reactive_step,
                    first_slot - 1..=last_slot - 1,
                ))
            }
        }
    }
}

fn one() -> usize {
    1
}

fn is_one(n: &usize) -> bool {
    *n == 1
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PevFile {
    /// Number of identical vehicles described by this entry.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub count: usize,
    pub soc_init: f64,
    pub soc_target: f64,
    pub soc_upper: f64,
    pub soc_lower: f64,
    pub charger_power: f64,
    pub slot_widths: Vec<f64>,
    pub commitment: f64,
    pub preferred_rates: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum TopologyName {
    #[default]
    Ring,
    Complete,
}

impl From<TopologyName> for Topology {
    fn from(t: TopologyName) -> Self {
        match t {
            TopologyName::Ring => Topology::Ring,
            TopologyName::Complete => Topology::Complete,
        }
    }
}

impl From<Topology> for TopologyName {
    fn from(t: Topology) -> Self {
        match t {
            Topology::Ring => TopologyName::Ring,
            Topology::Complete => TopologyName::Complete,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsFile {
    pub eta: f64,
    pub min_commitment: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub max_steps: usize,
    pub record_stride: usize,
    pub topology: TopologyName,
}

impl Default for ParamsFile {
    fn default() -> Self {
        SimParams::default().into()
    }
}

impl From<SimParams> for ParamsFile {
    fn from(p: SimParams) -> Self {
        ParamsFile {
            eta: p.eta,
            min_commitment: p.min_commitment,
            epsilon: p.epsilon,
            step_size: p.step_size,
            tolerance: p.tolerance,
            max_steps: p.max_steps,
            record_stride: p.record_stride,
            topology: p.topology.into(),
        }
    }
}

impl From<&ParamsFile> for SimParams {
    fn from(p: &ParamsFile) -> Self {
        SimParams {
            eta: p.eta,
            min_commitment: p.min_commitment,
            epsilon: p.epsilon,
            step_size: p.step_size,
            tolerance: p.tolerance,
            max_steps: p.max_steps,
            record_stride: p.record_stride,
            topology: p.topology.into(),
        }
    }
}

impl PevFile {
    fn spec(&self) -> PevSpec {
        PevSpec {
            soc_init: self.soc_init,
            soc_target: self.soc_target,
            soc_upper: self.soc_upper,
            soc_lower: self.soc_lower,
            charger_power: self.charger_power,
            slot_widths: self.slot_widths.clone(),
            commitment: self.commitment,
            preferred_rates: self.preferred_rates.clone(),
        }
    }
}

impl From<&PevSpec> for PevFile {
    fn from(p: &PevSpec) -> Self {
        PevFile {
            count: 1,
            soc_init: p.soc_init,
            soc_target: p.soc_target,
            soc_upper: p.soc_upper,
            soc_lower: p.soc_lower,
            charger_power: p.charger_power,
            slot_widths: p.slot_widths.clone(),
            commitment: p.commitment,
            preferred_rates: p.preferred_rates.clone(),
        }
    }
}

impl ScenarioFile {
    /// Expands generators and counts, then validates.
    pub fn into_scenario(self) -> Result<Scenario, GridError> {
        let grid = match (self.grid, self.baseline) {
            (Some(g), None) => GridProfile {
                active_base: g.active_base,
                reactive_base: g.reactive_base,
            },
            (None, Some(b)) => b.profile()?,
            (Some(_), Some(_)) => {
                return Err(GridError::Schema(
                    "give either `grid` or `baseline`, not both".into(),
                ))
            }
            (None, None) => return Err(GridError::Schema("missing `grid` or `baseline`".into())),
        };
        let fleet = self
            .pevs
            .iter()
            .flat_map(|p| std::iter::repeat_n(p.spec(), p.count))
            .collect();
        Ok(validate_scenario(grid, fleet, (&self.params).into())?)
    }

    /// Explicit form of a validated scenario: grid arrays, one entry per PEV.
    pub fn from_scenario(s: &Scenario) -> Self {
        ScenarioFile {
            grid: Some(GridFile {
                active_base: s.grid().active_base.clone(),
                reactive_base: s.grid().reactive_base.clone(),
            }),
            baseline: None,
            pevs: s.fleet().iter().map(PevFile::from).collect(),
            params: s.params().clone().into(),
        }
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, GridError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(GridError::parse)?;
    file.into_scenario()
}

pub fn load_scenario(path: &Path) -> Result<Scenario, GridError> {
    let text = fs::read_to_string(path).map_err(|source| GridError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text)
}

pub fn scenario_to_json(s: &Scenario) -> String {
    serde_json::to_string_pretty(&ScenarioFile::from_scenario(s))
        .expect("scenario serializes to JSON")
}
