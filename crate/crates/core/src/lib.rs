//! Simulation and verification of the modified Arratia flow and its
//! mollified short-range approximation, both driven by a shared Brownian sheet.

pub mod analysis;
pub mod coalescing;
pub mod error;
pub mod functionals;
pub mod isotonic;
pub mod mollifier;
pub mod path;
pub mod quantile;
pub mod representation;
pub mod rng;
pub mod sheet;
pub mod smooth;

pub use coalescing::{ParticleSystem, StepMode};
pub use error::{Error, Result};
pub use functionals::{Basis, CylinderFunctional, Outer};
pub use mollifier::{MollifierParams, PlateauRule, Profile};
pub use path::{FlowPath, MergeEvent, PathKind};
pub use quantile::{InitialCondition, QuantileState, StepMeasure};
pub use sheet::{GridSpec, SheetField, SheetGrid};
pub use smooth::{MonotoneRepair, SmoothConfig, SmoothState};
