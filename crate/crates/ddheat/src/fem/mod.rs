//! Reference-element machinery: quadrature, bases, dof maps, linear algebra.

pub mod basis;
pub mod dofmap;
pub mod poly;
pub mod quadrature;
pub mod smalldense;
pub mod system;
