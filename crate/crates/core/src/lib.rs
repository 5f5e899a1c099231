//! Physics-constrained layout optimization for reconstructed 3D scenes.

pub mod canon;
pub mod eval;
pub mod fixtures;
pub mod geom;
pub mod json;
pub mod opt;
pub mod scene;
pub mod sim;
