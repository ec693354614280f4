//! Oracles shared by the focused test files and the acceptance run.
#![allow(dead_code)]

pub mod fuzz;
pub mod gradcheck;
pub mod raster;
pub mod tracing;
