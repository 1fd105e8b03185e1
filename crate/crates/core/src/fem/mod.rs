//! Q1 finite elements on the adaptive forest: quadrature, degrees of
//! freedom, affine constraints and field evaluation/transfer.

pub mod constraints;
pub mod dofs;
pub mod field;
pub mod quadrature;

pub use constraints::{Constraint, ConstraintSet, Dirichlet};
pub use dofs::DofMap;
pub use field::{evaluate, interpolate, transfer, Component, FieldVector, PointValue, Transfer};
pub use quadrature::{Quadrature, ReferenceElement};
