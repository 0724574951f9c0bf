//! The inverse map: Marchenko kernels, the GLM equations per `x`, and the
//! readout of a Riccati triple.
//!
//! Both problems are solved by one right-problem solver. The left problem at
//! `x` with kernel `F#` is the right problem at `-x` with kernel `s -> F#(-s)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::cauchy_riesz::{involution_with, reconstruct_t, validate_membership, ReflectionData, Transmission};
use crate::error::{Error, Result};
use crate::fourier::{inverse_raw, KernelSign};
use crate::grid::{Grid, SplitFunction};
use crate::riccati::RiccatiTriple;
use crate::zs_akns::{ClassTag, JostSide};

/// `c/(2ik - beta) + d/(2ik - beta)^2`, whose `e^{+2ikx}` transform is
/// `-(c + d x) e^{beta x}` on `x < 0` and zero on `x > 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub c: f64,
    pub d: f64,
    pub beta: f64,
}

impl TailModel {
    pub fn at_k(&self, k: f64) -> Complex64 {
        let z = Complex64::new(-self.beta, 2.0 * k);
        self.c / z + self.d / (z * z)
    }

    /// One-sided value; `left` selects the limit from `x < 0` at the origin.
    pub fn at_x(&self, x: f64, left: bool) -> f64 {
        if x < 0.0 || (x == 0.0 && left) {
            -(self.c + self.d * x) * (self.beta * x).exp()
        } else {
            0.0
        }
    }
}

/// Least-squares fit of the tail model on the outer 30% of the band.
pub fn fit_tail(kgrid: &Grid, r: &[Complex64]) -> TailModel {
    let beta = 1.0;
    let ks = kgrid.points();
    let kmax = ks.iter().fold(0.0f64, |m, k| m.max(k.abs()));
    let mut ata = [[0.0f64; 2]; 2];
    let mut atb = [0.0f64; 2];
    for (k, z) in ks.iter().zip(r) {
        if k.abs() < 0.7 * kmax {
            continue;
        }
        let p1 = 1.0 / Complex64::new(-beta, 2.0 * k);
        let p2 = p1 * p1;
        for (a, b, y) in [(p1.re, p2.re, z.re), (p1.im, p2.im, z.im)] {
            let row = [a, b];
            for p in 0..2 {
                atb[p] += row[p] * y;
                for q in 0..2 {
                    ata[p][q] += row[p] * row[q];
                }
            }
        }
    }
    let det = ata[0][0] * ata[1][1] - ata[0][1] * ata[1][0];
    if !(det.abs() > 1e-300) {
        return TailModel { c: 0.0, d: 0.0, beta };
    }
    TailModel {
        c: (atb[0] * ata[1][1] - atb[1] * ata[0][1]) / det,
        d: (ata[0][0] * atb[1] - ata[1][0] * atb[0]) / det,
        beta,
    }
}

/// `(1/pi) int r(k) e^{2ikx} dk` on the space grid paired with `kgrid`, with
/// its one-sided limits at the origin. Returns the kernel, the fitted tail and
/// the largest imaginary part met.
pub fn plus_kernel(kgrid: &Grid, r: &[Complex64]) -> Result<(SplitFunction, TailModel, f64)> {
    let tail = fit_tail(kgrid, r);
    let ks = kgrid.points();
    let rest: Vec<Complex64> = ks.iter().zip(r).map(|(&k, z)| z - tail.at_k(k)).collect();
    let h = inverse_raw(&rest, kgrid.step, KernelSign::Plus);
    let xg = kgrid.space_grid()?;
    let max_imag = h.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let values: Vec<f64> = xg
        .points()
        .iter()
        .zip(&h)
        .map(|(&x, z)| z.re + tail.at_x(x, false))
        .collect();
    let o = xg.origin_index().expect("paired grid is centered");
    let left = h[o].re + tail.at_x(0.0, true);
    Ok((SplitFunction::new(xg, values, left)?, tail, max_imag))
}

/// `x -> f(-x)` on the same centered grid; the node at `-L` has no mirror
/// inside the window and is set to zero.
pub fn mirror_split(f: &SplitFunction) -> SplitFunction {
    let n = f.grid.count;
    let o = f.origin;
    let mut values = vec![0.0; n];
    for (i, v) in values.iter_mut().enumerate().skip(1) {
        *v = f.values[n - i];
    }
    values[o] = f.left_limit;
    SplitFunction { grid: f.grid, values, origin: o, left_limit: f.values[o] }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarchenkoKernel {
    /// `F(x) = (1/pi) int r(k) e^{2ikx} dk`.
    pub f: SplitFunction,
    /// `F#(x) = (1/pi) int r#(k) e^{-2ikx} dk`.
    pub f_sharp: SplitFunction,
    pub max_imag: f64,
    pub tails: [TailModel; 2],
    /// `int |F|` over the outermost unit of each end of the window, the
    /// part of the kernel that the truncation throws away first.
    pub truncation_mass: f64,
}

impl MarchenkoKernel {
    /// Kernels from right and left reflection coefficients on the same grid.
    pub fn from_pair(kgrid: &Grid, r: &[Complex64], r_sharp: &[Complex64]) -> Result<Self> {
        let (f, t1, i1) = plus_kernel(kgrid, r)?;
        let (fs_mirror, t2, i2) = plus_kernel(kgrid, r_sharp)?;
        Ok(Self::from_samples(f, mirror_split(&fs_mirror), [t1, t2], i1.max(i2)))
    }

    /// Injected kernels; the test seam for the solver.
    pub fn from_samples(f: SplitFunction, f_sharp: SplitFunction, tails: [TailModel; 2], max_imag: f64) -> Self {
        let h = f.grid.step;
        let band = ((1.0 / h).round() as usize).clamp(1, f.grid.count / 2);
        let n = f.grid.count;
        let edge = |v: &[f64]| -> f64 { v[..band].iter().chain(&v[n - band..]).map(|x| x.abs() * h).sum() };
        let truncation_mass = edge(&f.values).max(edge(&f_sharp.values));
        MarchenkoKernel { f, f_sharp, max_imag, tails, truncation_mass }
    }

    pub fn grid(&self) -> Grid {
        self.f.grid
    }

    /// `s -> F#(-s)`, the kernel of the mirrored left problem.
    pub fn mirrored_sharp(&self) -> SplitFunction {
        mirror_split(&self.f_sharp)
    }

    /// The kernel the right-problem solver sees for `side`.
    pub fn for_side(&self, side: JostSide) -> SplitFunction {
        match side {
            JostSide::Right => self.f.clone(),
            JostSide::Left => self.mirrored_sharp(),
        }
    }

    /// Jump of `F + F#` across the origin; zero for kernels of a potential.
    pub fn sum_jump(&self) -> f64 {
        self.f.jump() + self.f_sharp.jump()
    }
}

/// Kernels for generic reflection data, with `r#` from the involution.
pub fn marchenko_kernels(d: &ReflectionData) -> Result<(MarchenkoKernel, Transmission, ReflectionData)> {
    if d.class_tag != ClassTag::Generic {
        return Err(Error::ClassMismatch("the inverse map needs generic-class reflection data".into()));
    }
    let tr = reconstruct_t(d)?;
    let sharp = involution_with(d, &tr);
    let k = MarchenkoKernel::from_pair(&d.kgrid, &d.r, &sharp.r)?;
    Ok((k, tr, sharp))
}

fn fft_len(min: usize) -> usize {
    let mut best = min.next_power_of_two();
    let mut p3 = 1usize;
    while p3 < best {
        let mut p = p3;
        while p < min {
            p *= 2;
        }
        best = best.min(p);
        p3 *= 3;
    }
    best
}

/// The discretised operator `T_F(x)` on `zeta_j = j dx`, `j < M`, with
/// trapezoid weights and the kernel treated as zero beyond the window.
pub struct GlmSystem {
    pub x: f64,
    pub index: usize,
    pub step: f64,
    /// `F(x + n dx)` for `n < 2M - 1`.
    pub generator: Vec<f64>,
    pub weights: Vec<f64>,
    spectrum: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl GlmSystem {
    pub fn new(kernel: &SplitFunction, index: usize, planner: &mut FftPlanner<f64>) -> Result<Self> {
        let g = kernel.grid;
        let n = g.count;
        if index >= n {
            return Err(Error::InvalidInput(format!("x index {index} outside a window of {n} points")));
        }
        let o = kernel.origin;
        let m = n - index;
        let generator: Vec<f64> = (0..2 * m - 1)
            .map(|j| {
                let s = index + j;
                if s >= n {
                    0.0
                } else if s == o && index < o {
                    // interior jump: trapezoid wants the mean of the two limits
                    kernel.node_mean(o)
                } else {
                    kernel.values[s]
                }
            })
            .collect();
        let mut weights = vec![g.step; m];
        weights[0] *= 0.5;
        weights[m - 1] *= if m > 1 { 0.5 } else { 1.0 };
        let p = fft_len(2 * m - 1);
        let forward = planner.plan_fft_forward(p);
        let inverse = planner.plan_fft_inverse(p);
        let mut spectrum: Vec<Complex64> = generator.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        spectrum.resize(p, Complex64::new(0.0, 0.0));
        forward.process(&mut spectrum);
        Ok(GlmSystem { x: g.point(index), index, step: g.step, generator, weights, spectrum, forward, inverse })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `F(x + zeta_i)`.
    pub fn rhs(&self) -> &[f64] {
        &self.generator[..self.len()]
    }

    /// `(T psi)_i = sum_j F(x + zeta_i + zeta_j) w_j psi_j` by FFT.
    pub fn apply(&self, psi: &[f64]) -> Vec<f64> {
        let m = self.len();
        let p = self.spectrum.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); p];
        for j in 0..m {
            buf[m - 1 - j] = Complex64::new(self.weights[j] * psi[j], 0.0);
        }
        self.forward.process(&mut buf);
        buf.iter_mut().zip(&self.spectrum).for_each(|(b, s)| *b *= s);
        self.inverse.process(&mut buf);
        let scale = 1.0 / p as f64;
        (0..m).map(|i| buf[i + m - 1].re * scale).collect()
    }

    /// Same product by direct summation.
    pub fn apply_direct(&self, psi: &[f64]) -> Vec<f64> {
        let m = self.len();
        (0..m)
            .map(|i| (0..m).map(|j| self.generator[i + j] * self.weights[j] * psi[j]).sum())
            .collect()
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let m = self.len();
        DMatrix::from_fn(m, m, |i, j| self.generator[i + j] * self.weights[j])
    }

    /// Weighted inner product in which `T` is self-adjoint.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.weights).map(|((x, y), w)| x * y * w).sum()
    }

    /// Power iteration for the norm of `T` in the weighted inner product.
    pub fn norm_estimate(&self, steps: usize) -> f64 {
        let m = self.len();
        // deterministic start vector with no special symmetry
        let mut v: Vec<f64> = (0..m).map(|j| 1.0 + 0.5 * ((j as f64) * 0.618).sin()).collect();
        let mut est = 0.0;
        for _ in 0..steps {
            let nv = self.inner(&v, &v).sqrt();
            if nv == 0.0 {
                return 0.0;
            }
            v.iter_mut().for_each(|x| *x /= nv);
            let tv = self.apply(&v);
            // T is self-adjoint, so T^2 has the top eigenvalue ||T||^2
            let ttv = self.apply(&tv);
            est = self.inner(&v, &ttv).max(0.0).sqrt();
            v = ttv;
        }
        est
    }

    fn cg(&self, sign: f64, b: &[f64], x0: Option<&[f64]>, tol: f64, max_iter: usize) -> (Vec<f64>, usize, bool) {
        let m = self.len();
        let op = |v: &[f64]| -> Vec<f64> {
            let t = self.apply(v);
            v.iter().zip(&t).map(|(a, b)| a + sign * b).collect()
        };
        let mut x = match x0 {
            Some(v) => {
                let mut x = v.to_vec();
                x.resize(m, 0.0);
                x
            }
            None => vec![0.0; m],
        };
        let bnorm = self.inner(b, b).sqrt();
        if bnorm == 0.0 {
            return (vec![0.0; m], 0, true);
        }
        // backward-error stop: ||r|| <= tol (||b|| + ||A|| ||x||) with ||A|| <= 2
        let target = |x: &[f64]| tol * (bnorm + 2.0 * self.inner(x, x).sqrt());
        let ax = op(&x);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
        if self.inner(&r, &r).sqrt() >= bnorm {
            // a warm start worse than zero only adds roundoff
            x.iter_mut().for_each(|v| *v = 0.0);
            r = b.to_vec();
        }
        let mut p = r.clone();
        let mut rr = self.inner(&r, &r);
        for it in 0..max_iter {
            if rr.sqrt() <= target(&x) {
                return (x, it, true);
            }
            let ap = op(&p);
            let pap = self.inner(&p, &ap);
            if !(pap > 0.0) {
                return (x, it, false);
            }
            let alpha = rr / pap;
            for j in 0..m {
                x[j] += alpha * p[j];
                r[j] -= alpha * ap[j];
            }
            let rr_new = self.inner(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            for j in 0..m {
                p[j] = r[j] + beta * p[j];
            }
        }
        let ok = rr.sqrt() <= target(&x);
        (x, max_iter, ok)
    }

    /// Normwise backward error of `(I - T^2) g12 = -f`,
    /// `||res|| / (||f|| + ||g12|| + ||T^2 g12||)`.
    pub fn residual(&self, gamma12: &[f64]) -> f64 {
        let f = self.rhs();
        let t1 = self.apply(gamma12);
        let t2 = self.apply(&t1);
        let res: Vec<f64> = (0..self.len()).map(|j| gamma12[j] - t2[j] + f[j]).collect();
        let norm = |v: &[f64]| self.inner(v, v).sqrt();
        let scale = norm(f) + norm(gamma12) + norm(&t2);
        if scale == 0.0 {
            0.0
        } else {
            norm(&res) / scale
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    /// Conjugate gradients on `(I + T) K = -f` and `(I - T) D = -f` with FFT products.
    Fast,
    /// LU on the dense `(I - T^2)`.
    Dense,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GlmOptions {
    pub method: SolverMethod,
    pub tol: f64,
    pub max_iter: usize,
    /// Power-iteration norm estimates are taken at every `norm_stride`-th `x`.
    pub norm_stride: usize,
    pub norm_steps: usize,
    /// How far past the origin each problem is solved.
    pub overlap: f64,
    /// Half width of the reconstructed triple; the whole window when `None`.
    pub half_width: Option<f64>,
}

impl Default for GlmOptions {
    fn default() -> Self {
        GlmOptions {
            method: SolverMethod::Fast,
            tol: 1e-12,
            max_iter: 2000,
            norm_stride: 8,
            norm_steps: 20,
            overlap: 5.0,
            half_width: None,
        }
    }
}

/// `Gamma12(x, .)` and `Gamma11(x, .)` on `zeta_j = j dx`. For the left
/// problem `zeta_j = -j dx`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GlmSolution {
    pub x: f64,
    pub side: JostSide,
    pub step: f64,
    pub gamma12: Vec<f64>,
    pub gamma11: Vec<f64>,
    pub solver_residual: f64,
    pub operator_norm_estimate: Option<f64>,
    pub iterations: usize,
}

impl GlmSolution {
    /// `K = Gamma11 + Gamma12`.
    pub fn k_kernel(&self) -> Vec<f64> {
        self.gamma11.iter().zip(&self.gamma12).map(|(a, b)| a + b).collect()
    }
}

fn solve_system(sys: &GlmSystem, opts: &GlmOptions, warm: Option<(&[f64], &[f64])>) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let f: Vec<f64> = sys.rhs().iter().map(|v| -v).collect();
    if opts.method == SolverMethod::Fast {
        let (k, ik, okk) = sys.cg(1.0, &f, warm.map(|w| w.0), opts.tol, opts.max_iter);
        let (d, id, okd) = sys.cg(-1.0, &f, warm.map(|w| w.1), opts.tol, opts.max_iter);
        if okk && okd {
            return Ok((k, d, ik + id));
        }
        log::warn!("conjugate gradients stalled at x = {}; falling back to a dense solve", sys.x);
    }
    let m = sys.len();
    let t = sys.dense();
    let fv = DVector::from_vec(f.clone());
    let solve = |a: DMatrix<f64>| -> Result<Vec<f64>> {
        a.lu()
            .solve(&fv)
            .map(|v| v.iter().copied().collect())
            .ok_or_else(|| Error::NonConvergence(format!("singular GLM system at x = {}", sys.x)))
    };
    let id = DMatrix::<f64>::identity(m, m);
    let k = solve(&id + &t)?;
    let d = solve(&id - &t)?;
    Ok((k, d, 0))
}

fn finish(sys: &GlmSystem, side: JostSide, k: &[f64], d: &[f64], iterations: usize, norm: Option<f64>) -> GlmSolution {
    let gamma12: Vec<f64> = k.iter().zip(d).map(|(a, b)| 0.5 * (a + b)).collect();
    let gamma11: Vec<f64> = k.iter().zip(d).map(|(a, b)| 0.5 * (a - b)).collect();
    let solver_residual = sys.residual(&gamma12);
    GlmSolution {
        x: match side {
            JostSide::Right => sys.x,
            JostSide::Left => -sys.x,
        },
        side,
        step: sys.step,
        gamma12,
        gamma11,
        solver_residual,
        operator_norm_estimate: norm,
        iterations,
    }
}

/// Dense reference solve of `(I - T^2) Gamma12 = -F(x + .)`, with
/// `Gamma11 = -T Gamma12`.
pub fn solve_glm_dense(kernel: &SplitFunction, index: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut planner = FftPlanner::new();
    let sys = GlmSystem::new(kernel, index, &mut planner)?;
    let t = sys.dense();
    let m = sys.len();
    let a = DMatrix::<f64>::identity(m, m) - &t * &t;
    let f = DVector::from_iterator(m, sys.rhs().iter().map(|v| -v));
    let g12 = a
        .lu()
        .solve(&f)
        .ok_or_else(|| Error::NonConvergence(format!("singular GLM system at x = {}", sys.x)))?;
    let g11 = -(&t * &g12);
    Ok((g12.iter().copied().collect(), g11.iter().copied().collect()))
}

fn index_of(grid: &Grid, x: f64) -> Result<usize> {
    grid.nearest_index(x)
        .ok_or_else(|| Error::InvalidInput(format!("x = {x} lies outside the kernel window")))
}

/// One GLM solve at `x` for the right (`F`) or left (`F#`) problem.
pub fn solve_glm(kernel: &MarchenkoKernel, x: f64, side: JostSide, opts: &GlmOptions) -> Result<GlmSolution> {
    let f = kernel.for_side(side);
    let xs = match side {
        JostSide::Right => x,
        JostSide::Left => -x,
    };
    let idx = index_of(&f.grid, xs)?;
    let mut planner = FftPlanner::new();
    let sys = GlmSystem::new(&f, idx, &mut planner)?;
    let norm = sys.norm_estimate(opts.norm_steps);
    if norm >= 1.0 {
        log::warn!("operator norm estimate {norm:.6} >= 1 at x = {x}; attempting the solve anyway");
    }
    let (k, d, it) = solve_system(&sys, opts, None)?;
    Ok(finish(&sys, side, &k, &d, it, Some(norm)))
}

/// `T_F(x) psi` for `psi` on `zeta_j = j dx`.
pub fn apply_tf(kernel: &SplitFunction, x: f64, psi: &[f64]) -> Result<Vec<f64>> {
    let idx = index_of(&kernel.grid, x)?;
    let sys = GlmSystem::new(kernel, idx, &mut FftPlanner::new())?;
    if psi.len() != sys.len() {
        return Err(Error::InvalidInput(format!("psi has {} samples, expected {}", psi.len(), sys.len())));
    }
    Ok(sys.apply(psi))
}

/// Per-`x` record of a sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub x: f64,
    /// `-Gamma12(x, 0)` of the solved problem.
    pub readout: f64,
    pub residual: f64,
    pub norm_estimate: Option<f64>,
    pub iterations: usize,
}

/// Solves the right problem for kernel indices `lo..=hi`, warm-starting
/// each solve from the previous one.
pub fn sweep(kernel: &SplitFunction, lo: usize, hi: usize, opts: &GlmOptions) -> Result<Vec<SweepRow>> {
    let mut planner = FftPlanner::new();
    let mut rows = Vec::with_capacity(hi + 1 - lo);
    let mut warm: Option<(Vec<f64>, Vec<f64>)> = None;
    for idx in lo..=hi {
        let sys = GlmSystem::new(kernel, idx, &mut planner)?;
        let norm = if opts.norm_stride > 0 && (idx - lo) % opts.norm_stride == 0 {
            Some(sys.norm_estimate(opts.norm_steps))
        } else {
            None
        };
        let (k, d, it) = solve_system(&sys, opts, warm.as_ref().map(|(a, b)| (&a[1..], &b[1..])))?;
        let gamma12_0 = 0.5 * (k[0] + d[0]);
        let residual = sys.residual(&k.iter().zip(&d).map(|(a, b)| 0.5 * (a + b)).collect::<Vec<_>>());
        if !(residual < 1e-6) {
            return Err(Error::NonConvergence(format!(
                "GLM residual {residual:.3e} at x = {}",
                sys.x
            )));
        }
        rows.push(SweepRow { x: sys.x, readout: -gamma12_0, residual, norm_estimate: norm, iterations: it });
        warm = Some((k, d));
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReconstructionDiagnostics {
    pub right: Vec<SweepRow>,
    pub left: Vec<SweepRow>,
    pub max_residual: f64,
    pub max_norm_estimate: f64,
    /// `1 - ||T||^2` at the worst sampled `x`, a lower bound for the
    /// smallest singular value of `I - T^2`.
    pub min_singular_estimate: f64,
    pub truncation_mass: f64,
    pub max_imag: f64,
    /// Largest adjacent-sample jump of `w# - w` on the overlap.
    pub max_v_jump: f64,
    pub v0_from_right_limits: f64,
    pub v0_from_left_limits: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub triple: RiccatiTriple,
    /// `w` on `[-overlap, L)`; the value at the origin is `w(0+)`.
    pub w_full: SplitFunction,
    /// `w#` on `[-L, overlap]`; the value at the origin is `w#(0+)`.
    pub w_sharp_full: SplitFunction,
    pub v0_readout: f64,
    pub diagnostics: ReconstructionDiagnostics,
}

/// `w = -Gamma12(x, 0)`, `w# = Gamma12#(x, 0)` and `v0 = (w# - w)(0)`.
pub fn reconstruct_riccati(kernel: &MarchenkoKernel, opts: &GlmOptions) -> Result<ReconstructionResult> {
    let g = kernel.grid();
    let n = g.count;
    let o = kernel.f.origin;
    let h = g.step;
    let window = o as f64 * h;
    let half = opts.half_width.unwrap_or(window).min(window);
    let n_out = ((half / h).round() as usize).min(o);
    let n_ov = ((opts.overlap / h).round() as usize).clamp(1, o);
    let lo = o - n_ov;
    // one past L_out so that the mirrored side reaches -L_out
    let hi = (o + n_out).min(n - 1);

    let right_k = kernel.f.clone();
    let left_k = kernel.mirrored_sharp();
    let (right, left) = rayon::join(|| sweep(&right_k, lo, hi, opts), || sweep(&left_k, lo, hi, opts));
    let (right, left) = (right?, left?);

    let f = &kernel.f;
    let fs = &kernel.f_sharp;
    let w_at = |rows: &[SweepRow], idx: usize| rows[idx - lo].readout;

    // w on [-overlap, L): values at kernel indices lo..=hi
    let w_vals: Vec<f64> = (lo..=hi).map(|i| w_at(&right, i)).collect();
    let w0p = w_at(&right, o);
    let w0m = w0p + f.left_limit - f.values[o];
    let w_grid = Grid::new(g.point(lo), h, hi + 1 - lo)?;
    let w_full = SplitFunction::new(w_grid, w_vals, w0m)?;

    // w#(x) = -w'(-x) where w' is the mirrored readout at index n - i
    let s_lo = n - hi;
    let s_hi = n - lo;
    let ws_vals: Vec<f64> = (s_lo..=s_hi).map(|i| -w_at(&left, n - i)).collect();
    let ws0m = -w_at(&left, o);
    let ws0p = ws0m + fs.left_limit - fs.values[o];
    let ws_grid = Grid::new(g.point(s_lo), h, s_hi + 1 - s_lo)?;
    let mut w_sharp_full = SplitFunction::new(ws_grid, ws_vals, ws0m)?;
    let so = w_sharp_full.origin;
    w_sharp_full.values[so] = ws0p;

    let from_right = ws0p - w0p;
    let from_left = ws0m - w0m;
    let mut v0 = 0.5 * (from_right + from_left);
    if v0 < -1e-3 {
        return Err(Error::Instability(format!("negative v0 readout {v0:.3e}")));
    }
    if v0 < 0.0 {
        log::warn!("clamping v0 readout {v0:.3e} to zero");
        v0 = 0.0;
    }

    // w# - w on the overlap, with right limits at the origin
    let mut max_v_jump = 0.0f64;
    let mut prev: Option<f64> = None;
    for i in lo..=(o + n_ov).min(hi) {
        let wv = w_full.values[i - lo];
        let wsv = w_sharp_full.values[i - s_lo];
        let v = wsv - wv;
        if let Some(p) = prev {
            max_v_jump = max_v_jump.max((v - p).abs());
        }
        prev = Some(v);
    }

    let plus: Vec<f64> = (o..o + n_out).map(|i| if i <= hi { w_full.values[i - lo] } else { 0.0 }).collect();
    let mut minus: Vec<f64> =
        (o - n_out..o).map(|i| if i >= s_lo { w_sharp_full.values[i - s_lo] } else { 0.0 }).collect();
    minus.push(ws0m);
    let triple = RiccatiTriple::from_samples(h, -(n_out as f64) * h, plus, minus, v0)?;

    let rows = right.iter().chain(&left);
    let max_residual = rows.clone().map(|r| r.residual).fold(0.0, f64::max);
    let max_norm_estimate = rows.filter_map(|r| r.norm_estimate).fold(0.0, f64::max);
    let diagnostics = ReconstructionDiagnostics {
        max_residual,
        max_norm_estimate,
        min_singular_estimate: 1.0 - max_norm_estimate * max_norm_estimate,
        truncation_mass: kernel.truncation_mass,
        max_imag: kernel.max_imag,
        max_v_jump,
        v0_from_right_limits: from_right,
        v0_from_left_limits: from_left,
        right,
        left,
    };
    Ok(ReconstructionResult { triple, w_full, w_sharp_full, v0_readout: v0, diagnostics })
}

/// Full inverse map for generic reflection data.
pub fn invert(d: &ReflectionData, opts: &GlmOptions) -> Result<(ReconstructionResult, MarchenkoKernel)> {
    validate_membership(d).require()?;
    let (kernel, _, _) = marchenko_kernels(d)?;
    Ok((reconstruct_riccati(&kernel, opts)?, kernel))
}

/// Filon weights for `int_0^Z g(zeta) e^{i omega zeta} dzeta` with `g`
/// piecewise linear on `zeta_j = j h`.
fn filon_sum(g: &[f64], h: f64, omega: f64) -> Complex64 {
    let m = g.len();
    if m < 2 {
        return Complex64::new(0.0, 0.0);
    }
    let th = omega * h;
    let (e, b) = if th.abs() < 0.5 {
        // series for E = int_0^1 e^{i th s}, B = int_0^1 s e^{i th s}
        let mut e = Complex64::new(0.0, 0.0);
        let mut b = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for n in 0..14 {
            e += term / (n as f64 + 1.0);
            b += term / (n as f64 + 2.0);
            term *= Complex64::new(0.0, th) / (n as f64 + 1.0);
        }
        (e, b)
    } else {
        let it = Complex64::new(0.0, th);
        let ei = it.exp();
        ((ei - 1.0) / it, ei / it - (ei - 1.0) / (it * it))
    };
    let a = e - b;
    let step = Complex64::from_polar(1.0, th);
    let back = Complex64::from_polar(1.0, -th);
    let mut phase = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    for (j, &v) in g.iter().enumerate() {
        let w = if j == 0 {
            a
        } else if j == m - 1 {
            back * b
        } else {
            a + back * b
        };
        sum += phase * w * v;
        phase *= step;
    }
    sum * h
}

/// `f(x,k) = e^{ikx}(1 + int_0 K(x,z) e^{2ikz} dz)` and the left analogue
/// `f#(x,k) = e^{-ikx}(1 + int_-inf^0 K#(x,z) e^{-2ikz} dz)`.
pub fn reconstructed_jost(
    kernel: &MarchenkoKernel,
    x: f64,
    ks: &[f64],
    opts: &GlmOptions,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let right = solve_glm(kernel, x, JostSide::Right, opts)?;
    let left = solve_glm(kernel, x, JostSide::Left, opts)?;
    let kr = right.k_kernel();
    let kl = left.k_kernel();
    let h = right.step;
    let f = ks
        .par_iter()
        .map(|&k| Complex64::from_polar(1.0, k * x) * (1.0 + filon_sum(&kr, h, 2.0 * k)))
        .collect();
    let fs = ks
        .par_iter()
        .map(|&k| Complex64::from_polar(1.0, -k * x) * (1.0 + filon_sum(&kl, h, 2.0 * k)))
        .collect();
    Ok((f, fs))
}

/// Residual of `K + F(x + .) + T K = 0` in `L2` over `zeta`, by direct summation.
pub fn k_kernel_residual(kernel: &MarchenkoKernel, sol: &GlmSolution) -> Result<f64> {
    let f = kernel.for_side(sol.side);
    let xs = match sol.side {
        JostSide::Right => sol.x,
        JostSide::Left => -sol.x,
    };
    let sys = GlmSystem::new(&f, index_of(&f.grid, xs)?, &mut FftPlanner::new())?;
    let k = sol.k_kernel();
    let tk = sys.apply_direct(&k);
    let res: f64 = (0..sys.len()).map(|j| (k[j] + sys.rhs()[j] + tk[j]).powi(2)).sum::<f64>() * sys.step;
    Ok(res.sqrt())
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// `max |f#(x,k) - a(k) f(x,-k) + b(-k) f(x,k)| / max(1, |a|)`.
    pub left_relation: f64,
    /// `max |f(x,k) - a(k) f#(x,-k) - b(k) f#(x,k)| / max(1, |a|)`.
    pub right_relation: f64,
    pub unitarity: f64,
    pub samples: usize,
}

/// Checks the relations tying the reconstructed Jost functions to
/// `a = 1/t` and `b = r# a` at the given `x` for `kmin <= |k| <= kmax`.
pub fn consistency_check(
    kernel: &MarchenkoKernel,
    tr: &Transmission,
    sharp: &ReflectionData,
    xs: &[f64],
    kmin: f64,
    kmax: f64,
    opts: &GlmOptions,
) -> Result<ConsistencyReport> {
    let kg = tr.kgrid;
    let idx: Vec<usize> = (0..kg.count)
        .filter(|&i| {
            let k = kg.point(i).abs();
            k >= kmin && k <= kmax
        })
        .collect();
    let ks: Vec<f64> = idx.iter().map(|&i| kg.point(i)).collect();
    let a: Vec<Complex64> = idx.iter().map(|&i| 1.0 / tr.t[i]).collect();
    let b: Vec<Complex64> = idx.iter().zip(&a).map(|(&i, a)| sharp.r[i] * a).collect();
    // position of -k inside the selection
    let pos = |j: usize| -> usize { idx.len() - 1 - j };
    let mut rep = ConsistencyReport::default();
    for j in 0..idx.len() {
        rep.unitarity = rep.unitarity.max((a[j].norm_sqr() - b[j].norm_sqr() - 1.0).abs());
    }
    for &x in xs {
        let (f, fs) = reconstructed_jost(kernel, x, &ks, opts)?;
        for j in 0..idx.len() {
            let mj = pos(j);
            let scale = a[j].norm().max(1.0);
            let l = (fs[j] - a[j] * f[mj] + b[mj] * f[j]).norm() / scale;
            let r = (f[j] - a[j] * fs[mj] - b[j] * fs[j]).norm() / scale;
            rep.left_relation = rep.left_relation.max(l);
            rep.right_relation = rep.right_relation.max(r);
            rep.samples += 1;
        }
    }
    Ok(rep)
}

/// `L2` norm over `zeta` of `d/dx Gamma11 - w Gamma12` at `x`, with a
/// central difference in `x` on the kernel grid.
pub fn differential_identity_residual(kernel: &SplitFunction, x: f64) -> Result<f64> {
    let idx = index_of(&kernel.grid, x)?;
    if idx == 0 || idx + 2 >= kernel.grid.count {
        return Err(Error::InvalidInput(format!("x = {x} too close to the window edge")));
    }
    let (g12, _) = solve_glm_dense(kernel, idx)?;
    let (_, g11m) = solve_glm_dense(kernel, idx - 1)?;
    let (_, g11p) = solve_glm_dense(kernel, idx + 1)?;
    let h = kernel.grid.step;
    let w = -g12[0];
    let m = g11p.len();
    let s: f64 = (0..m)
        .map(|j| {
            let d = (g11p[j] - g11m[j]) / (2.0 * h) - w * g12[j];
            d * d
        })
        .sum::<f64>()
        * h;
    Ok(s.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delta_data(alpha: f64, l: f64, dx: f64) -> ReflectionData {
        let kg = Grid::centered(l, dx).unwrap().wavenumber_grid().unwrap();
        let r = kg.points().iter().map(|&k| alpha / Complex64::new(-alpha, 2.0 * k)).collect();
        ReflectionData::new(kg, r, ClassTag::Generic).unwrap()
    }

    #[test]
    fn tail_model_transform_is_exact() {
        let kg = Grid::centered(20.0, 1.0 / 32.0).unwrap().wavenumber_grid().unwrap();
        let m = TailModel { c: 0.7, d: -0.3, beta: 1.0 };
        let r: Vec<Complex64> = kg.points().iter().map(|&k| m.at_k(k)).collect();
        let (f, fit, _) = plus_kernel(&kg, &r).unwrap();
        assert!((fit.c - 0.7).abs() < 1e-10 && (fit.d + 0.3).abs() < 1e-10);
        for (i, &x) in f.grid.points().iter().enumerate() {
            assert!((f.values[i] - m.at_x(x, false)).abs() < 1e-9, "x={x}");
        }
        assert!((f.left_limit + 0.7).abs() < 1e-9);
    }

    #[test]
    fn delta_kernel_closed_form() {
        for alpha in [0.5, 1.0, 2.0] {
            let (k, _, _) = marchenko_kernels(&delta_data(alpha, 20.0, 1.0 / 64.0)).unwrap();
            for (i, &x) in k.f.grid.points().iter().enumerate() {
                if x.abs() < 0.05 || x.abs() > 15.0 {
                    continue;
                }
                let want = if x < 0.0 { -alpha * (alpha * x).exp() } else { 0.0 };
                assert!((k.f.values[i] - want).abs() < 1e-4, "alpha {alpha} x {x}");
                assert!((k.f_sharp.values[i] - if x > 0.0 { -alpha * (-alpha * x).exp() } else { 0.0 }).abs() < 1e-4);
            }
            assert!((k.f.left_limit + alpha).abs() < 1e-4);
            assert!(k.sum_jump().abs() < 1e-4);
            assert!(k.max_imag < 1e-10);
        }
    }

    #[test]
    fn fft_product_matches_direct_and_is_self_adjoint() {
        let (k, _, _) = marchenko_kernels(&delta_data(1.0, 4.0, 1.0 / 16.0)).unwrap();
        let mut planner = FftPlanner::new();
        for x in [-2.0, -0.5, 0.0, 1.0] {
            let sys = GlmSystem::new(&k.f, k.f.grid.nearest_index(x).unwrap(), &mut planner).unwrap();
            let m = sys.len();
            let psi: Vec<f64> = (0..m).map(|j| ((j * 7 + 3) % 11) as f64 - 5.0).collect();
            let phi: Vec<f64> = (0..m).map(|j| ((j * 5 + 1) % 13) as f64 * 0.3).collect();
            let a = sys.apply(&psi);
            let b = sys.apply_direct(&psi);
            for j in 0..m {
                assert!((a[j] - b[j]).abs() < 1e-12);
            }
            let lhs = sys.inner(&sys.apply(&psi), &phi);
            let rhs = sys.inner(&psi, &sys.apply(&phi));
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn vanishing_kernel_gives_zero_operator() {
        let (k, _, _) = marchenko_kernels(&delta_data(1.0, 4.0, 1.0 / 16.0)).unwrap();
        let g = k.f.grid;
        let zero = SplitFunction::continuous(g, vec![0.0; g.count]).unwrap();
        let idx = g.nearest_index(0.5).unwrap();
        let psi = vec![1.0; g.count - idx];
        assert!(apply_tf(&zero, 0.5, &psi).unwrap().iter().all(|v| *v == 0.0));
        let (g12, g11) = solve_glm_dense(&zero, idx).unwrap();
        assert!(g12.iter().chain(&g11).all(|v| *v == 0.0));
    }

    #[test]
    fn fast_and_dense_solvers_agree() {
        let (k, _, _) = marchenko_kernels(&delta_data(1.0, 6.0, 1.0 / 16.0)).unwrap();
        let opts = GlmOptions::default();
        for x in [-3.0, -0.5, 0.0, 0.75] {
            let s = solve_glm(&k, x, JostSide::Right, &opts).unwrap();
            let (g12, g11) = solve_glm_dense(&k.f, k.f.grid.nearest_index(x).unwrap()).unwrap();
            for j in 0..g12.len() {
                assert!((s.gamma12[j] - g12[j]).abs() < 1e-9);
                assert!((s.gamma11[j] - g11[j]).abs() < 1e-9);
            }
            assert!(s.solver_residual < 1e-8);
        }
    }

    #[test]
    fn delta_readout_at_a_point() {
        let (k, _, _) = marchenko_kernels(&delta_data(1.0, 20.0, 1.0 / 64.0)).unwrap();
        let s = solve_glm(&k, -0.5, JostSide::Right, &GlmOptions::default()).unwrap();
        assert!((-s.gamma12[0] + 1.0 / 1.5).abs() < 1e-3, "{}", -s.gamma12[0]);
        assert!(s.operator_norm_estimate.unwrap() < 1.0);
    }

    #[test]
    fn right_norm_is_non_increasing() {
        let (k, _, _) = marchenko_kernels(&delta_data(1.0, 10.0, 1.0 / 32.0)).unwrap();
        let opts = GlmOptions { norm_steps: 60, ..Default::default() };
        let xs = [-4.0, -2.0, -1.0, -0.25, 0.5];
        let norms: Vec<f64> = xs
            .iter()
            .map(|&x| solve_glm(&k, x, JostSide::Right, &opts).unwrap().operator_norm_estimate.unwrap())
            .collect();
        for w in norms.windows(2) {
            assert!(w[1] <= w[0] + 1e-8, "{norms:?}");
        }
    }

    #[test]
    fn filon_integrates_linear_pieces_exactly() {
        let h = 0.1;
        let g: Vec<f64> = (0..11).map(|j| 1.0 + j as f64 * h).collect();
        for omega in [0.0, 0.3, 7.0, 40.0] {
            let num = filon_sum(&g, h, omega);
            // int_0^1 (1 + z) e^{i w z} dz
            let exact = if omega == 0.0 {
                Complex64::new(1.5, 0.0)
            } else {
                let iw = Complex64::new(0.0, omega);
                let e = iw.exp();
                (e - 1.0) / iw + e / iw - (e - 1.0) / (iw * iw)
            };
            assert!((num - exact).norm() < 1e-12, "omega {omega}: {num} vs {exact}");
        }
    }
}
