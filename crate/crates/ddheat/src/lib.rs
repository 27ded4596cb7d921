//! Data-driven finite element solver for steady heat diffusion in 2D.
//!
//! Instead of a fitted constitutive law, the solver couples the conservation
//! law `div q = f` to a raw material dataset of states `{T*, g*, q*}`: each
//! iteration searches the dataset for the closest state at every integration
//! point and re-solves a fixed linear system whose right-hand side carries the
//! assigned states. Two formulations are provided:
//!
//! * **stronger** — temperature in a continuous `H^1` space, flux in a
//!   discontinuous `L^2` space (the original data-driven setup);
//! * **weaker** — discontinuous temperature/gradient, `H(div)`-conforming
//!   flux with single-valued normal traces, which enforces the conservation
//!   law elementwise and supplies cheap a posteriori error indicators.
//!
//! On top of the weaker formulation the crate implements distance-aware
//! adaptive hp-refinement and a perturb-and-resolve ensemble that quantifies
//! the solution non-uniqueness caused by imperfect datasets.
//!
//! See the `examples/` directory for runnable entry points covering each
//! capability, and the `ddheat` binary for the file-driven pipeline.

pub mod adaptivity;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fem;
pub mod geom;
pub mod indicators;
pub mod io;
pub mod mesh;
pub mod solvers;
pub mod uq;

pub use error::DdError;
