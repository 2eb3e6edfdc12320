//! Rhomboid tilings of small point clouds, the order-k Delaunay slices they
//! carry, and a graph pooling network built on the induced clusterings.

pub mod clustering;
pub mod dataset;
pub mod error;
pub mod export;
pub mod geometry;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod spectral;
pub mod synthetic;
pub mod tiling;

pub use error::{Error, Result};
