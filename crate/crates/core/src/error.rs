use core::fmt;

/// Errors raised by scenario validation, constraint evaluation and the
/// consensus integrator.
#[derive(Debug, Clone, PartialEq)]
pub enum DraError {
    /// A scalar field is outside its admissible range.
    Range { field: &'static str, value: f64 },
    /// Two sequences that must share a length do not.
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// Graph or profile too small for the requested construction.
    Size { what: &'static str, min: usize, found: usize },
    /// The requested energy cannot be delivered by the charger in the window.
    InfeasibleDemand { pev: usize, demand: f64, capacity: f64 },
    /// A feasible interval collapsed (lower >= upper).
    CollapsedInterval { lower: f64, upper: f64 },
    /// Argument outside the domain of a function (barrier, envelope).
    Domain { what: &'static str, value: f64 },
    /// No step halving kept the state strictly feasible.
    StepCollapse { pev: usize, slot: usize },
    /// A bracketing root search found no sign change.
    NoRoot { what: &'static str },
    /// More than one root was detected in an interval expected to hold one.
    MultiRoot { slot: usize, count: usize },
    /// SoC trajectory left the battery box.
    BoundViolation { slot: usize, soc: f64 },
}

impl fmt::Display for DraError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DraError::Range { field, value } => write!(f, "{field} out of range: {value}"),
            DraError::Shape {
                what,
                expected,
                found,
            } => write!(f, "shape mismatch in {what}: expected {expected}, found {found}"),
            DraError::Size { what, min, found } => {
                write!(f, "{what} too small: need at least {min}, got {found}")
            }
            DraError::InfeasibleDemand {
                pev,
                demand,
                capacity,
            } => write!(
                f,
                "pev {pev}: demand {demand} Wh exceeds charger capacity {capacity} Wh"
            ),
            DraError::CollapsedInterval { lower, upper } => {
                write!(f, "collapsed interval ({lower}, {upper})")
            }
            DraError::Domain { what, value } => write!(f, "{what}: {value} outside domain"),
            DraError::StepCollapse { pev, slot } => write!(
                f,
                "step collapse: no halving keeps pev {pev} slot {slot} feasible"
            ),
            DraError::NoRoot { what } => write!(f, "no root bracketed for {what}"),
            DraError::MultiRoot { slot, count } => {
                write!(f, "slot {slot}: {count} roots detected")
            }
            DraError::BoundViolation { slot, soc } => {
                write!(f, "SoC {soc} Wh leaves battery box after slot {slot}")
            }
        }
    }
}

impl core::error::Error for DraError {}

pub type Result<T> = core::result::Result<T, DraError>;
