//! Fixtures shared by the benchmarks.

use miura_core::cauchy_riesz::ReflectionData;
use miura_core::pipeline::{direct_map, DirectRun};
use miura_core::riccati::Preset;
use miura_core::{Grid, Result};

/// Output grid of half width `l` and step `dx`, and the doubled window the
/// direct map runs on.
pub fn grids(l: f64, dx: f64) -> Result<(Grid, Grid)> {
    Ok((Grid::centered(l, dx)?, Grid::centered(2.0 * l, dx)?))
}

pub fn direct_preset(name: &str, l: f64, dx: f64) -> Result<DirectRun> {
    let (g, gp) = grids(l, dx)?;
    direct_map(&Preset::by_name(name)?.triple(&g)?, &gp)
}

pub fn reflection(name: &str, l: f64, dx: f64) -> Result<ReflectionData> {
    Ok(direct_preset(name, l, dx)?.reflection)
}
