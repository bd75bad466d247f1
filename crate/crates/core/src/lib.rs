//! Simulation and analysis toolkit for documenting indoor crime scenes with a
//! small buoyant camera blimp.

pub mod blimp;
pub mod geometry;
pub mod planner;
pub mod sensors;
pub mod stains;
pub mod world;

