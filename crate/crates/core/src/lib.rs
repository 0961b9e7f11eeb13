//! Online POMDP planning for crossing an unsignalized T-junction.
//!
//! The crate holds the planner's world model, an IMM belief tracker, a
//! generic tree search with progressive widening, a small IDM traffic
//! simulator used as ground truth, and the decision policies.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod idm;
pub mod imm;
pub mod kinematics;
pub mod linalg;
pub mod model;
pub mod policy;
pub mod pomcp;
pub mod sim;

pub use error::{ConfigError, FilterError, SimError};
pub use geometry::{Footprint, IntersectionLayout, Lane, OrientedBox, PathSpec, Turn};
pub use imm::{ImmBelief, ImmConfig};
pub use kinematics::{AccelAction, BehaviorMode, VehicleState};
pub use model::{IntersectionModel, ModelConfig, RewardConfig, WorldState};
pub use pomcp::{plan, SolverConfig};
