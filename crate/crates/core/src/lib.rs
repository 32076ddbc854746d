//! Spontaneous emission and emission interference for a V-type atom embedded
//! in a planar waveguide whose core may be a negative-index medium.
//!
//! Lengths are measured in units of `c / omega` and frequencies in units of
//! the atomic transition frequency.

// negated comparisons below are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dynamics;
pub mod green;
pub mod kernel;
pub mod materials;
pub mod modes;
pub mod numerics;
pub mod presets;
pub mod quadrature;
pub mod rates;
pub mod scan;

pub use num_complex::Complex64 as C64;

pub use config::{Quantity, ScanConfig};
pub use dynamics::{DensityMatrix3, SgcParams};
pub use green::{ClassMethod, GreenOptions, RateClass, RateComponents, RegionSplit};
pub use kernel::{Layer, PhaseFold, Polarization, TransverseContext};
pub use materials::{AtomPosition, DrudeLorentz, LayerStack, MaterialModel, Medium, StackOptics};
pub use modes::{ModeClass, ModeRoot};
pub use rates::RateBreakdown;
