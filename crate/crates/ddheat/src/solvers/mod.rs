//! The solvers: classical reference FEM (linear and Newton-Raphson), the
//! stronger data-driven formulation, the weaker conservative mixed
//! formulation, and the data-driven fixed-point driver.

mod common;
pub mod exphat;
mod iterate;
mod ordering;
pub mod problems;
pub mod reference;
pub mod stronger;
pub mod weaker;

pub use common::{BoundaryTable, BoundaryValue, FieldCoeffs, FieldSample, GaussPoint};
pub use iterate::{comparative_rms_of_samples, dd_iterate, search_fields, DdState, InitMode, SolveReport, StopRule};
pub use ordering::nd_cell_order;
pub use stronger::StrongerDd;
pub use weaker::WeakerDd;

use crate::dataset::{self, MaterialDataset, Query, Scaling};
use crate::fem::system::LinearSystem;
use std::sync::Arc;

/// Which solver a problem runs through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    ReferenceLinear,
    ReferenceNonlinear,
    DdStronger,
    DdWeaker,
}

/// Quadratic conductivity model k(T) = c0 + c1 T + c2 T^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KCoeffs {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl KCoeffs {
    pub const fn constant(k: f64) -> KCoeffs {
        KCoeffs { c0: k, c1: 0.0, c2: 0.0 }
    }

    /// Graphite model from high-temperature reactor studies; temperature in
    /// degrees Celsius, k in W/(m K).
    pub const GRAPHITE: KCoeffs = KCoeffs { c0: 134.0, c1: -0.1074, c2: 3.719e-5 };

    #[inline]
    pub fn k(&self, t: f64) -> f64 {
        self.c0 + self.c1 * t + self.c2 * t * t
    }

    #[inline]
    pub fn dk_dt(&self, t: f64) -> f64 {
        self.c1 + 2.0 * self.c2 * t
    }
}

/// Material information driving the data-driven iteration.
#[derive(Clone)]
pub enum MaterialSource {
    Dataset(Arc<MaterialDataset>),
    /// Fully saturated dataset: analytic projection onto the line q = -k g,
    /// carried out in the scaled metric so it agrees with the tree search.
    LineOracle { k: f64, scaling: Scaling },
}

impl std::fmt::Debug for MaterialSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MaterialSource::Dataset(ds) => {
                write!(f, "Dataset({} points, {:?})", ds.len(), ds.dim)
            }
            MaterialSource::LineOracle { k, .. } => write!(f, "LineOracle(k={k})"),
        }
    }
}

/// One assigned material state at a Gauss point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointAssignment {
    /// Dataset point id; `None` for the line oracle.
    pub index: Option<u32>,
    pub t_star: f64,
    pub g_star: [f64; 2],
    pub q_star: [f64; 2],
    pub distance: f64,
}

impl PointAssignment {
    pub const ZERO: PointAssignment = PointAssignment {
        index: None,
        t_star: 0.0,
        g_star: [0.0; 2],
        q_star: [0.0; 2],
        distance: 0.0,
    };
}

impl MaterialSource {
    pub fn scaling(&self) -> Scaling {
        match self {
            MaterialSource::Dataset(ds) => ds.scaling,
            MaterialSource::LineOracle { scaling, .. } => *scaling,
        }
    }

    pub fn is_dataset(&self) -> bool {
        matches!(self, MaterialSource::Dataset(_))
    }

    /// Closest material state to the field sample.
    pub fn assign(&self, sample: &FieldSample) -> PointAssignment {
        match self {
            MaterialSource::Dataset(ds) => {
                let query = Query {
                    temperature: matches!(ds.dim, dataset::DatasetDim::Five).then_some(sample.t),
                    gradient: sample.g,
                    flux: sample.q,
                };
                let (idx, point, distance) = ds.nearest(&query);
                PointAssignment {
                    index: Some(idx as u32),
                    t_star: point.temperature.unwrap_or(0.0),
                    g_star: point.gradient,
                    q_star: point.flux,
                    distance,
                }
            }
            MaterialSource::LineOracle { k, scaling } => {
                let pr = dataset::scaled_line_projection(sample.g, sample.q, *k, *scaling);
                PointAssignment {
                    index: None,
                    t_star: sample.t,
                    g_star: pr.gradient,
                    q_star: pr.flux,
                    distance: pr.distance,
                }
            }
        }
    }
}

/// Common interface of the two assembled data-driven operators.
pub trait DdOperator: Sync {
    fn gauss(&self) -> &[GaussPoint];
    fn domain_area(&self) -> f64;
    /// Resolve with the stored factorization; the matrix never changes
    /// between iterations.
    fn solve(&self, assign: &[PointAssignment]) -> FieldCoeffs;
    /// Field samples (T, g, q) at every Gauss point.
    fn evaluate(&self, coeffs: &FieldCoeffs) -> Vec<FieldSample>;
    fn system(&self) -> &LinearSystem;
    fn search_scaling(&self) -> Scaling;
    /// Whether the temperature participates in the distance metric (5D).
    fn search_uses_temperature(&self) -> bool;
}
