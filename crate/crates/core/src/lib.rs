//! Matérn-type Gaussian random fields on point clouds via graph Laplacians.
//!
//! Pipeline: build a point cloud, turn it into a weighted graph, form a
//! Laplacian, and use it as the discrete operator in a GMRF of Matérn type.
//! The [`lgm`] module layers latent Gaussian models on top (regression,
//! hierarchical inversion, probit classification) and [`converge`] compares
//! discrete objects against their continuum limits on the circle and sphere.

pub mod converge;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod lgm;
pub mod matern;
pub mod pointcloud;
pub mod sparse;
pub mod special;
pub mod spectral;

mod kdtree;

pub use error::{Error, Result};
