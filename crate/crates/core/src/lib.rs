//! Navigation stack for a camera-headed snake robot using a rectilinear gait.
//!
//! The gait is simulated link by link and averaged into a fixed-speed
//! unicycle ([`gait`]); that reduced model drives pose propagation
//! ([`kinematics`]), perception-space planning over binary traversability
//! images ([`perception`], [`planner`]), trajectory tracking
//! ([`controller`]), motion-prior localization ([`localization`]) and the
//! cycle-level world simulation ([`world`]).

// `!(x > 0.0)` is how validation rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod controller;
pub mod format;
pub mod gait;
pub mod kinematics;
pub mod localization;
pub mod perception;
pub mod planner;
pub mod raster;
pub mod scene;
pub mod world;

pub use gait::{BodyVelocity, GaitParams, ReductionMap};
pub use kinematics::{Pose, VelocityCommand};
