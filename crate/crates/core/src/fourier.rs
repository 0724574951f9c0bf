//! Fourier transforms `f^(k) = int e^{2ikx} f(x) dx` on paired grids, and the
//! Cauchy projections built from them.
//!
//! A centered space grid of `N` points with step `dx` is paired with the
//! wavenumber grid of step `dk = pi / (N dx)` whose nodes sit at half-integer
//! multiples of `dk`. The discrete pair is then exactly invertible and
//! `||f^||^2 = pi ||f||^2` holds to round-off.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{Domain, Grid, SampledFunction};

/// Relative endpoint magnitude above which a transform refuses to run.
pub const DEFAULT_DECAY_TOL: f64 = 1e-8;

/// Sign of the exponent in a wavenumber-to-space transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelSign {
    /// `(1/pi) int e^{-2ikx} g(k) dk`, the inverse of the forward transform.
    Minus,
    /// `(1/pi) int e^{+2ikx} g(k) dk`.
    Plus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

/// Fails when either endpoint is larger than `tol` times the peak magnitude.
pub fn check_decay(f: &SampledFunction, tol: f64) -> Result<()> {
    let peak = f.max_abs();
    if peak == 0.0 {
        return Ok(());
    }
    let left = f.values[0].norm();
    let right = f.values[f.values.len() - 1].norm();
    if left > tol * peak || right > tol * peak {
        return Err(Error::TruncationRisk { left, right, peak, tol });
    }
    Ok(())
}

#[inline]
fn cis_turns(turns: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * turns.rem_euclid(1.0))
}

/// Offsets `a`, `b` with `2 k_m x_j = (2 pi / N)(m + a)(j + b)`.
fn offsets(n: usize) -> (f64, f64) {
    let nf = n as f64;
    (0.5 - nf / 2.0, -nf / 2.0)
}

pub fn fourier_forward(f: &SampledFunction) -> Result<SampledFunction> {
    fourier_forward_with(f, DEFAULT_DECAY_TOL)
}

pub fn fourier_inverse(g: &SampledFunction, sign: KernelSign) -> Result<SampledFunction> {
    fourier_inverse_with(g, sign, DEFAULT_DECAY_TOL)
}

pub fn fourier_forward_with(f: &SampledFunction, decay_tol: f64) -> Result<SampledFunction> {
    f.expect_domain(Domain::Space)?;
    let kgrid = f.grid.wavenumber_grid()?;
    check_decay(f, decay_tol)?;
    Ok(SampledFunction {
        grid: kgrid,
        values: forward_raw(&f.values, f.grid.step),
        domain: Domain::Wavenumber,
    })
}

pub fn fourier_inverse_with(
    g: &SampledFunction,
    sign: KernelSign,
    decay_tol: f64,
) -> Result<SampledFunction> {
    g.expect_domain(Domain::Wavenumber)?;
    let xgrid = g.grid.space_grid()?;
    check_decay(g, decay_tol)?;
    Ok(SampledFunction {
        grid: xgrid,
        values: inverse_raw(&g.values, g.grid.step, sign),
        domain: Domain::Space,
    })
}

/// Forward transform of samples on a centered space grid with step `dx`.
pub fn forward_raw(f: &[Complex64], dx: f64) -> Vec<Complex64> {
    let n = f.len();
    let nf = n as f64;
    let (a, b) = offsets(n);
    let mut buf: Vec<Complex64> = f
        .iter()
        .enumerate()
        .map(|(j, &v)| v * cis_turns(a * j as f64 / nf))
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf.iter_mut()
        .enumerate()
        .for_each(|(m, v)| *v *= cis_turns((m as f64 + a) * b / nf) * dx);
    buf
}

/// Wavenumber-to-space transform of samples on a half-integer grid with step `dk`.
pub fn inverse_raw(g: &[Complex64], dk: f64, sign: KernelSign) -> Vec<Complex64> {
    let n = g.len();
    let nf = n as f64;
    let (a, b) = offsets(n);
    let s = match sign {
        KernelSign::Minus => -1.0,
        KernelSign::Plus => 1.0,
    };
    let mut buf: Vec<Complex64> = g
        .iter()
        .enumerate()
        .map(|(m, &v)| v * cis_turns(s * m as f64 * b / nf))
        .collect();
    let mut planner = FftPlanner::new();
    match sign {
        KernelSign::Minus => planner.plan_fft_forward(n).process(&mut buf),
        KernelSign::Plus => planner.plan_fft_inverse(n).process(&mut buf),
    }
    let scale = dk / PI;
    buf.iter_mut()
        .enumerate()
        .for_each(|(j, v)| *v *= cis_turns(s * a * (j as f64 + b) / nf) * scale);
    buf
}

/// Weight of the half line `side` at each node of a centered space grid.
///
/// The origin and the wrap-around node `-L` get one half on each side.
pub fn half_line_weights(grid: &Grid, side: Side) -> Vec<f64> {
    let origin = grid.count / 2;
    (0..grid.count)
        .map(|j| {
            if j == origin || j == 0 {
                0.5
            } else if (j > origin) == (side == Side::Plus) {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Cauchy projection of a wavenumber-domain function.
///
/// `C+ g` is the transform of the part of `F^{-1} g` on `x > 0`, and
/// `C- g = -(transform of the part on x < 0)`, so `C+ - C- = I`.
pub fn cauchy_project(g: &SampledFunction, side: Side) -> Result<SampledFunction> {
    cauchy_project_with(g, side, DEFAULT_DECAY_TOL)
}

pub fn cauchy_project_with(g: &SampledFunction, side: Side, decay_tol: f64) -> Result<SampledFunction> {
    let h = fourier_inverse_with(g, KernelSign::Minus, decay_tol)?;
    let w = half_line_weights(&h.grid, side);
    let cut: Vec<Complex64> = h.values.iter().zip(&w).map(|(v, w)| v * *w).collect();
    let mut p = forward_raw(&cut, h.grid.step);
    if side == Side::Minus {
        p.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(SampledFunction { grid: g.grid, values: p, domain: Domain::Wavenumber })
}

/// Relative L2 mass `int_wrong |h|^2 / int |h|^2` of `h = F^{-1} g` on the
/// half line opposite to `side`.
///
/// Small values mean `g` lies in the Hardy space of the upper (`Plus`) or
/// lower (`Minus`) half plane.
pub fn wrong_side_mass(g: &SampledFunction, side: Side) -> Result<f64> {
    let h = fourier_inverse_with(g, KernelSign::Minus, f64::INFINITY)?;
    let other = match side {
        Side::Plus => Side::Minus,
        Side::Minus => Side::Plus,
    };
    let w = half_line_weights(&h.grid, other);
    let total: f64 = h.values.iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let wrong: f64 = h.values.iter().zip(&w).map(|(v, w)| v.norm_sqr() * w).sum();
    Ok(wrong / total)
}

/// Relative L2 mass on the wrong half line of a function whose transform
/// `g` decays only like `1/k` because of a jump at the origin.
///
/// The jump is fitted on the outer tenth of the band and removed with the
/// exactly one-sided model `J e^{-|x|}` on the correct half line, so the
/// truncated transform does not ring across the origin. The mass is taken
/// relative to the full `int |h|^2`.
pub fn hardy_mass(g: &SampledFunction, side: Side) -> Result<f64> {
    g.expect_domain(Domain::Wavenumber)?;
    let ks = g.grid.points();
    let n = ks.len();
    // (1 -+ 2ik) is the reciprocal transform of e^{-|x|} on the chosen half line
    let s = match side {
        Side::Plus => -1.0,
        Side::Minus => 1.0,
    };
    let den = |k: f64| Complex64::new(1.0, s * 2.0 * k);
    let band: Vec<usize> = (n - n / 10..n).chain(0..n / 10).collect();
    let jump = band.iter().map(|&i| (g.values[i] * den(ks[i])).re).sum::<f64>() / band.len() as f64;
    let resid: Vec<Complex64> = (0..n).map(|i| g.values[i] - jump / den(ks[i])).collect();
    let total: f64 = g.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.grid.step / PI;
    if total == 0.0 {
        return Ok(0.0);
    }
    let h = inverse_raw(&resid, g.grid.step, KernelSign::Minus);
    let xg = g.grid.space_grid()?;
    let other = match side {
        Side::Plus => Side::Minus,
        Side::Minus => Side::Plus,
    };
    let w = half_line_weights(&xg, other);
    let wrong: f64 = h.iter().zip(&w).map(|(v, w)| v.norm_sqr() * w).sum::<f64>() * xg.step;
    Ok(wrong / total)
}
