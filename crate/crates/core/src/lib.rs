//! Simulation and numerical-analysis toolkit for stochastic reaction networks
//! that tracks the fate of individual molecules.
//!
//! The crate provides:
//! - exact Gillespie simulation of a network and of the coupled chain
//!   (tracked-molecule status, species counts) ([`ssa`]);
//! - deterministic fluid trajectories with dense output ([`fluid`]);
//! - the fluid-driven single-molecule jump process and its exact simulation
//!   by thinning ([`singlemol`]);
//! - the parallel aggregate approximation built from independent
//!   single-molecule paths ([`aggregate`]);
//! - explicit non-asymptotic error bounds for all three approximations
//!   ([`bounds`]);
//! - path functionals and empirical-distribution distances ([`paths`]);
//! - a uniformization oracle for exact transient distributions on small state
//!   spaces ([`transient`]);
//! - a plain-text model file format ([`model`]) and bundled example models
//!   ([`models`]).

pub mod aggregate;
pub mod bounds;
pub mod fluid;
pub mod model;
pub mod models;
pub mod network;
pub mod paths;
pub mod rng;
pub mod singlemol;
pub mod ssa;
pub mod transient;
