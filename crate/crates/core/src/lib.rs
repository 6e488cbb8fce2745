//! Software twin of a hybrid pneumatic / shape-memory-alloy soft bending
//! module and its camera-in-the-loop bending-angle testbed.

pub mod control;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod kinematics;
pub mod vision;
pub mod plant;

pub use error::{Error, Result};
pub use geometry::Vec2;
