//! Synthesis of safety-certified satisficing controllers for disturbed
//! control-affine polynomial systems.

pub mod model;
pub mod poly;
pub mod sdp;
pub mod sim;
pub mod sos;
pub mod srpi;
