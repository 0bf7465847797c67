pub mod discretize;
pub mod divergence;
pub mod error;
pub mod experiments;
pub mod io;
pub mod langevin;
pub mod mixture;
pub mod npmle;
pub mod numeric;
pub mod polymer;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use mixture::{restrict_mass, BoxRegion, Dataset, GmmDensity, MixingMeasure};
