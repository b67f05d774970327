//! Tracking of articulated robot arms by fusing joint-encoder streams with
//! delayed depth images.

pub mod kinematics;
pub mod depth;
pub mod encoder_filter;
pub mod image_update;
pub mod fusion;
pub mod simulator;
pub mod eval;
