pub mod acceptance;
pub mod bl_metric;
pub mod diffusion;
pub mod discrete_scheme;
pub mod error;
pub mod experiments;
pub mod exec;
pub mod lattice_walk;
pub mod lt_analytics;
pub mod quad;
pub mod semigroups;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
