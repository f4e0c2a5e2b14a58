//! Analysis-suitable G1 and C0 spline surfaces on unstructured quadrilateral
//! control nets: construction, refinement, shell-validity checks and
//! Galerkin solvers.

pub mod archive;
pub mod check;
pub mod construct_c0;
pub mod construct_g1;
pub mod error;
pub mod evaluate;
pub mod extraction;
pub mod local;
pub mod mesh;
pub mod nets;
pub mod quality;
pub mod quadrature;
pub mod refine;
pub mod solve;

pub use construct_c0::{build_c0, C0Surface};
pub use construct_g1::{build, build_g1, BasisDiagnostics};
pub use error::{Error, Result};
pub use evaluate::{GSplineSurface, SurfaceFrame, Variant};
pub use extraction::ElementExtraction;
pub use mesh::{CNet, ControlNet, ElementClass, Point3, VertexClass};
