//! Numerical diagnostics for circle extensions `f(x, s) = (E(x), s + τ(x))`
//! of expanding circle maps: inverse-branch enumeration, cone-image slope
//! intervals and their overlap counts, coboundary tests, and seeded
//! Monte Carlo genericity scans over perturbation families.

// Validation sites use `!(x > y)` on purpose: a NaN must fail validation,
// and the de Morgan form `x <= y` would accept it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod branch_enum;
pub mod captivity;
pub mod circle_map;
pub mod cocycle;
pub mod error;
pub mod genericity;
pub mod report;
mod sweep;
pub mod trig;

pub use branch_enum::{BranchState, BranchView, PeriodicPoint, Word};
pub use captivity::{ConeInterval, Ncal, NcalAt, OverlapMode, XStrategy};
pub use circle_map::{BranchPartition, CircleMap};
pub use cocycle::{PerturbationFamily, RoofFunction};
pub use error::{Error, Result};
pub use genericity::{AffineParameterMap, CaptivityWitness, ProofConstants};
pub use trig::TrigPoly;
