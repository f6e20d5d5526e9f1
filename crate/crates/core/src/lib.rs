//! Self-contracted curves as gradient flows of convex functions.
//!
//! The crate follows one pipeline: an arc-length parameterized [`curve::Curve`]
//! is classified by [`contract`], a speed profile `m` satisfying the
//! (M)-inequality is built in [`repar`], the resulting trace jet `(f, G)` is
//! checked and extended to a convex function in [`extend`], and [`flow`]
//! integrates the gradient flow of that function to compare it with the
//! reparameterized curve. [`pipeline`] wires the stages together.

pub mod linalg;
pub mod par;
pub mod quad;
pub mod spline;

pub mod curve;
pub mod contract;
pub mod repar;
pub mod extend;
pub mod flow;
pub mod io;
pub mod pipeline;
