//! File outputs: VTK legacy ASCII fields and CSV reports.

pub mod report;
pub mod vtk;
