//! Active disturbance rejection control for fractional-order plants.
//!
//! Plant: `y^(mu) + a_o y = b_o u + d`, `0 < mu < 1`. Three controller
//! structures share the outer loop `u0 = K (v_d - z1)` and differ in the
//! extended state observer: integer-order (IADRC), fractional-order (FADRC)
//! and improved fractional-order (IFADRC).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod error;
pub mod experiments;
pub mod fracops;
pub mod freqdom;
pub mod observers;
pub mod plant;
pub mod stability;

pub use control::{run_closed_loop, AdrcConfig, StepMetrics, Trajectory, Variant};
pub use error::{Error, Result};
pub use plant::{PlantParams, Signal};
pub use stability::StabilityReport;
