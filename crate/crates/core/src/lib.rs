pub mod cauchy_riesz;
pub mod error;
pub mod fourier;
pub mod glm;
pub mod grid;
pub mod io;
pub mod pipeline;
pub mod riccati;
pub mod zs_akns;

pub use error::{Error, Result};
pub use grid::{Domain, Grid, SampledFunction, SplitFunction};
