//! Direct scattering through the first-order ZS-AKNS system
//! `Psi' = (i k sigma3 + Q) Psi`, `Q = [[0, u], [u, 0]]`.
//!
//! The system is integrated in the rotating frame `phi = e^{-ikx sigma3} Psi`
//! with piecewise-linear `u`: each cell uses the exact oscillatory integrals
//! of `u e^{-+2ikx}` plus the second Magnus term, exponentiated in closed form.
//! The step matrices lie in SU(1,1), so `|a|^2 - |b|^2 = 1` holds to round-off.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{inverse_raw, KernelSign};
use crate::grid::{cumulative_integral, Grid, SplitFunction};
use crate::riccati::ExtremalPair;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassTag {
    Generic,
    Exceptional,
}

impl ClassTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassTag::Generic => "generic",
            ClassTag::Exceptional => "exceptional",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "generic" => Ok(ClassTag::Generic),
            "exceptional" => Ok(ClassTag::Exceptional),
            other => Err(Error::Parse(format!("unknown class tag '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JostSide {
    /// `f+ ~ e^{ikx}` as `x -> +inf`, built from `u+`.
    Right,
    /// `f- ~ e^{-ikx}` as `x -> -inf`, built from `u-`.
    Left,
}

/// Jost solution and its quasi-derivative `f' - u f` on the whole grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JostSolution {
    pub k: f64,
    pub side: JostSide,
    pub grid: Grid,
    pub f: Vec<Complex64>,
    pub quasi: Vec<Complex64>,
    /// Largest departure of the SU(1,1) invariant from its initial value.
    pub det_drift: f64,
}

/// Per-wavenumber quadrature weights for one cell of width `h`.
#[derive(Clone, Copy, Debug)]
struct CellWeights {
    /// `int_0^h (1 - s/h) e^{-2iks} ds`.
    wa: Complex64,
    /// `int_0^h (s/h) e^{-2iks} ds`.
    wb: Complex64,
    /// `(2kh - sin 2kh) / (4k^2)`, the second Magnus factor.
    magnus2: f64,
}

impl CellWeights {
    fn new(k: f64, h: f64) -> Self {
        let eta = -2.0 * k * h;
        let z = Complex64::new(0.0, eta);
        let (p1, p2) = if eta.abs() < 0.25 {
            // p1 = sum z^n/(n+1)!, p2 = sum z^n / ((n+2) n!)
            let mut p1 = Complex64::new(0.0, 0.0);
            let mut p2 = Complex64::new(0.0, 0.0);
            let mut zn = Complex64::new(1.0, 0.0);
            let mut fact = 1.0;
            for n in 0..14 {
                p1 += zn / (fact * (n + 1) as f64);
                p2 += zn / (fact * (n + 2) as f64);
                fact *= (n + 1) as f64;
                zn *= z;
            }
            (p1, p2)
        } else {
            let e = z.exp();
            ((e - 1.0) / z, (e * (z - 1.0) + 1.0) / (z * z))
        };
        let theta = 2.0 * k * h;
        let magnus2 = if theta.abs() < 0.05 {
            let t2 = theta * theta;
            k * h * h * h / 3.0 * (1.0 - t2 / 20.0 + t2 * t2 / 840.0)
        } else {
            (theta - theta.sin()) / (4.0 * k * k)
        };
        CellWeights { wa: (p1 - p2) * h, wb: p2 * h, magnus2 }
    }
}

/// `exp(s * Omega)` for `Omega = [[-i g, z], [conj z, i g]]`, `s = +-1`,
/// applied to a 2-vector.
#[inline]
fn apply_exp(z: Complex64, g: f64, sign: f64, v: [Complex64; 2]) -> [Complex64; 2] {
    let d2 = z.norm_sqr() - g * g;
    let (c, s) = if d2.abs() < 1e-4 {
        (
            1.0 + d2 / 2.0 + d2 * d2 / 24.0 + d2 * d2 * d2 / 720.0,
            1.0 + d2 / 6.0 + d2 * d2 / 120.0 + d2 * d2 * d2 / 5040.0,
        )
    } else if d2 > 0.0 {
        let d = d2.sqrt();
        (d.cosh(), d.sinh() / d)
    } else {
        let d = (-d2).sqrt();
        (d.cos(), d.sin() / d)
    };
    let s = s * sign;
    let zz = z * s;
    let ig = Complex64::new(0.0, g * s);
    [
        v[0] * c - ig * v[0] + zz * v[1],
        zz.conj() * v[0] + v[1] * c + ig * v[1],
    ]
}

#[inline]
fn cell_omega(u: &SplitFunction, j: usize, k: f64, w: &CellWeights) -> (Complex64, f64) {
    let (ua, ub) = u.cell(j);
    let x = u.grid.point(j);
    let phase = Complex64::from_polar(1.0, -2.0 * k * x);
    let z = phase * (w.wa * ua + w.wb * ub);
    let mean = 0.5 * (ua + ub);
    (z, mean * mean * w.magnus2)
}

/// Rotating-frame solution column on nodes `lo..=hi`.
///
/// `Right` starts from `(1, 0)` at `hi` and integrates towards `lo`;
/// `Left` starts from `(0, 1)` at `lo` and integrates towards `hi`.
pub fn integrate_akns(u: &SplitFunction, k: f64, side: JostSide, lo: usize, hi: usize) -> Vec<[Complex64; 2]> {
    let w = CellWeights::new(k, u.grid.step);
    let n = hi - lo + 1;
    let mut out = vec![[Complex64::new(0.0, 0.0); 2]; n];
    match side {
        JostSide::Right => {
            let mut v = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
            out[n - 1] = v;
            for j in (lo..hi).rev() {
                let (z, g) = cell_omega(u, j, k, &w);
                v = apply_exp(z, g, -1.0, v);
                out[j - lo] = v;
            }
        }
        JostSide::Left => {
            let mut v = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
            out[0] = v;
            for j in lo..hi {
                let (z, g) = cell_omega(u, j, k, &w);
                v = apply_exp(z, g, 1.0, v);
                out[j + 1 - lo] = v;
            }
        }
    }
    out
}

/// End value only, without storing the path.
fn integrate_to(u: &SplitFunction, k: f64, side: JostSide, lo: usize, hi: usize) -> [Complex64; 2] {
    let w = CellWeights::new(k, u.grid.step);
    match side {
        JostSide::Right => {
            let mut v = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
            for j in (lo..hi).rev() {
                let (z, g) = cell_omega(u, j, k, &w);
                v = apply_exp(z, g, -1.0, v);
            }
            v
        }
        JostSide::Left => {
            let mut v = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
            for j in lo..hi {
                let (z, g) = cell_omega(u, j, k, &w);
                v = apply_exp(z, g, 1.0, v);
            }
            v
        }
    }
}

/// `(f, f' - u f)` at `x` from the rotating-frame column.
#[inline]
fn to_jost(k: f64, x: f64, v: [Complex64; 2]) -> (Complex64, Complex64) {
    let e = Complex64::from_polar(1.0, k * x);
    let p1 = e * v[0];
    let p2 = e.conj() * v[1];
    (p1 + p2, I * k * (p1 - p2))
}

fn check_k(k: f64) -> Result<()> {
    if k == 0.0 || !k.is_finite() {
        return Err(Error::InvalidInput(
            "Jost solutions need a finite nonzero k; use zero_energy_jost at k = 0".into(),
        ));
    }
    Ok(())
}

/// Jost solution on the whole grid.
pub fn jost(pair: &ExtremalPair, k: f64, side: JostSide) -> Result<JostSolution> {
    check_k(k)?;
    let g = pair.grid;
    let u = match side {
        JostSide::Right => &pair.u_plus,
        JostSide::Left => &pair.u_minus,
    };
    let col = integrate_akns(u, k, side, 0, g.count - 1);
    let target = match side {
        JostSide::Right => 1.0,
        JostSide::Left => -1.0,
    };
    let det_drift = col
        .iter()
        .map(|v| (v[0].norm_sqr() - v[1].norm_sqr() - target).abs())
        .fold(0.0, f64::max);
    let (f, quasi) = col.iter().enumerate().map(|(i, &v)| to_jost(k, g.point(i), v)).unzip();
    Ok(JostSolution { k, side, grid: g, f, quasi, det_drift })
}

/// Jost solution and quasi-derivative at the single node `index`.
pub fn jost_at(pair: &ExtremalPair, k: f64, side: JostSide, index: usize) -> Result<(Complex64, Complex64)> {
    check_k(k)?;
    let g = pair.grid;
    let v = match side {
        JostSide::Right => integrate_to(&pair.u_plus, k, side, index, g.count - 1),
        JostSide::Left => integrate_to(&pair.u_minus, k, side, 0, index),
    };
    Ok(to_jost(k, g.point(index), v))
}

/// `W+{f-, f+} = f- (f+)^[1] - f+ ((f-)^[1] + v f-)`, converting the
/// quasi-derivative of `f-` from `u-` to `u+`.
#[inline]
pub fn wronskian_modified(
    f_minus: Complex64,
    quasi_minus: Complex64,
    f_plus: Complex64,
    quasi_plus: Complex64,
    v: f64,
) -> Complex64 {
    f_minus * quasi_plus - f_plus * (quasi_minus + f_minus * v)
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ScatteringDiagnostics {
    pub max_unitarity_defect: f64,
    pub max_symmetry_defect: f64,
    pub max_det_drift: f64,
    pub wronskian_variation: f64,
    pub refinement_requested: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScatteringData {
    pub kgrid: Grid,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    pub r_plus: Vec<Complex64>,
    pub r_minus: Vec<Complex64>,
    pub t: Vec<Complex64>,
    /// `k/(k+i) a(k)`.
    pub a_reg: Vec<Complex64>,
    /// Limit of `2ik a(k)` at `k = 0`.
    pub theta: f64,
    pub class_tag: ClassTag,
    pub diagnostics: ScatteringDiagnostics,
}

/// Threshold rule separating the two classes.
pub fn classify(theta: f64, a_reg_sup: f64) -> ClassTag {
    if theta.abs() > 1e-3 * (1.0 + a_reg_sup) {
        ClassTag::Generic
    } else {
        ClassTag::Exceptional
    }
}

/// Number of innermost samples used by [`extrapolate_even`].
pub const EXTRAPOLATION_POINTS: usize = 4;

/// Value at `k = 0` of an even function sampled at `k_j = (j + 1/2) dk`,
/// by Lagrange extrapolation in `k^2` through the given samples.
pub fn extrapolate_even(samples: &[f64]) -> f64 {
    let s: Vec<f64> = (0..samples.len()).map(|j| ((2 * j + 1) * (2 * j + 1)) as f64).collect();
    samples
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let w: f64 = (0..s.len()).filter(|&l| l != j).map(|l| s[l] / (s[l] - s[j])).product();
            w * v
        })
        .sum()
}

/// Extrapolated `k = 0` value of the even part of `values` on a symmetric
/// half-integer wavenumber grid.
pub fn value_at_zero(values: &[f64]) -> f64 {
    let c = values.len() / 2;
    let m = EXTRAPOLATION_POINTS.min(c);
    let even: Vec<f64> = (0..m).map(|j| 0.5 * (values[c + j] + values[c - 1 - j])).collect();
    extrapolate_even(&even)
}

/// `a`, `b`, `r+-`, `t` on the wavenumber grid paired with the pair's grid.
///
/// `a` and `b` are the coefficients in `f+(k) = a f-(-k) + b f-(k)`, so that
/// `t f- = f+(-k) + r+ f+(k)` and `t f+ = f-(-k) + r- f-(k)`.
///
/// Only the native half-line data enter: `f+` is integrated on `[0, L]`
/// with `u+ = w+` and `f-` on `[-L, 0]` with `u- = w-`, and the two meet
/// at the origin through the modified Wronskian.
pub fn scattering_ab(pair: &ExtremalPair) -> Result<ScatteringData> {
    let g = pair.grid;
    let kgrid = g.wavenumber_grid()?;
    let o = pair.u_plus.origin;
    let n = kgrid.count;
    let ks = kgrid.points();

    let at_origin: Vec<((Complex64, Complex64), (Complex64, Complex64))> = ks
        .par_iter()
        .map(|&k| {
            let vp = integrate_to(&pair.u_plus, k, JostSide::Right, o, g.count - 1);
            let vm = integrate_to(&pair.u_minus, k, JostSide::Left, 0, o);
            (to_jost(k, 0.0, vp), to_jost(k, 0.0, vm))
        })
        .collect();

    let v0 = pair.v0;
    let mut a = vec![Complex64::new(0.0, 0.0); n];
    let mut b = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        let k = ks[i];
        let ((fp, qp), (fm, qm)) = at_origin[i];
        let (_, (fmn, qmn)) = at_origin[kgrid.mirror(i)];
        let two_ik = I * (2.0 * k);
        a[i] = wronskian_modified(fm, qm, fp, qp, v0) / two_ik;
        // f+(k) = a f-(-k) + b f-(k)
        b[i] = -wronskian_modified(fmn, qmn, fp, qp, v0) / two_ik;
    }

    let mut r_plus = vec![Complex64::new(0.0, 0.0); n];
    let mut r_minus = vec![Complex64::new(0.0, 0.0); n];
    let mut t = vec![Complex64::new(0.0, 0.0); n];
    let mut a_reg = vec![Complex64::new(0.0, 0.0); n];
    let mut unit = 0.0f64;
    let mut sym = 0.0f64;
    for i in 0..n {
        let k = ks[i];
        let m = kgrid.mirror(i);
        if a[i].norm() < 1.0 - 1e-10 {
            return Err(Error::Instability(format!(
                "|a(k)| = {} < 1 at k = {k}; the computed coefficients violate |a|^2 = 1 + |b|^2",
                a[i].norm()
            )));
        }
        r_plus[i] = -b[m] / a[i];
        r_minus[i] = b[i] / a[i];
        t[i] = 1.0 / a[i];
        a_reg[i] = a[i] * k / Complex64::new(k, 1.0);
        unit = unit.max((a[i].norm_sqr() - b[i].norm_sqr() - 1.0).abs() / a[i].norm_sqr());
        sym = sym.max((a[m] - a[i].conj()).norm()).max((b[m] - b[i].conj()).norm() / a[i].norm());
    }

    let g: Vec<f64> = (0..n).map(|i| (a[i] * I * (2.0 * ks[i])).re).collect();
    let theta = value_at_zero(&g);
    let a_reg_sup = a_reg.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let class_tag = classify(theta, a_reg_sup);

    let wronskian_variation = wronskian_spread(pair, &ks)?;
    let max_det_drift = unit;
    let diagnostics = ScatteringDiagnostics {
        max_unitarity_defect: unit,
        max_symmetry_defect: sym,
        max_det_drift,
        wronskian_variation,
        refinement_requested: max_det_drift > 1e-6,
    };
    Ok(ScatteringData { kgrid, a, b, r_plus, r_minus, t, a_reg, theta, class_tag, diagnostics })
}

/// Relative spread of `W+{f-, f+}` over `x` for a few sample wavenumbers.
fn wronskian_spread(pair: &ExtremalPair, ks: &[f64]) -> Result<f64> {
    let n = ks.len();
    let picks = [n / 2, n / 2 + n / 64, n / 2 + n / 16, n / 2 + n / 6];
    let g = pair.grid;
    let xs: Vec<usize> = [-4.0, -1.0, -0.25, 0.25, 1.0, 4.0]
        .iter()
        .filter_map(|&x| g.nearest_index(x))
        .collect();
    let mut worst = 0.0f64;
    for &p in picks.iter().filter(|&&p| p < n) {
        let k = ks[p];
        let jp = jost(pair, k, JostSide::Right)?;
        let jm = jost(pair, k, JostSide::Left)?;
        let at = |i: usize| {
            wronskian_modified(jm.f[i], jm.quasi[i], jp.f[i], jp.quasi[i], pair.v[i])
        };
        let w0 = at(pair.u_plus.origin);
        for &i in &xs {
            worst = worst.max((at(i) - w0).norm() / w0.norm());
        }
    }
    Ok(worst)
}

/// `f+(x, 0) = exp(-int_x^inf u+)` and `f-(x, 0) = exp(int_-inf^x u-)` on the grid.
pub fn zero_energy_jost(pair: &ExtremalPair) -> (Vec<f64>, Vec<f64>) {
    let g = pair.grid;
    let h = g.step;
    let o = pair.u_plus.origin;
    // int_0^L w+ and int_-L^0 w-
    let wp = pair.u_plus.right_half();
    let wm = pair.u_minus.left_half();
    let tail_plus = *cumulative_integral(wp, h).last().unwrap_or(&0.0);
    let tail_minus = *cumulative_integral(&wm, h).last().unwrap_or(&0.0);
    let cp = (-tail_plus).exp();
    let cm = tail_minus.exp();
    let fp: Vec<f64> = pair.y_plus.iter().map(|y| cp * y).collect();
    let fm: Vec<f64> = pair.y_minus.iter().map(|y| cm * y).collect();
    debug_assert!(o < g.count);
    (fp, fm)
}

/// Relative L2 mass (squared norm ratio) on `y > 0` of the function `G(x, .)` whose transform is
/// `m(x,-k) + e^{+-2ikx} r(k) m(x,k) - 1`, for the right (`+`) or left (`-`)
/// normalised Jost function `m`.
///
/// The function jumps at the edge of its support; that jump is removed with an
/// exactly one-sided model `J e^{-s} 1_{s>0}` before transforming, so the
/// truncated transform does not ring across the edge.
pub fn hardy_defect(pair: &ExtremalPair, data: &ScatteringData, x: f64, side: JostSide) -> Result<f64> {
    let g = pair.grid;
    let ix = g
        .nearest_index(x)
        .ok_or_else(|| Error::InvalidInput(format!("x = {x} is outside the grid")))?;
    let x = g.point(ix);
    let kg = data.kgrid;
    let ks = kg.points();
    let (sgn, r) = match side {
        JostSide::Right => (1.0, &data.r_plus),
        JostSide::Left => (-1.0, &data.r_minus),
    };
    let m: Vec<Complex64> = ks
        .par_iter()
        .map(|&k| {
            let (f, _) = jost_at(pair, k, side, ix)?;
            Ok(f * Complex64::from_polar(1.0, -sgn * k * x))
        })
        .collect::<Result<_>>()?;
    let n = kg.count;
    let h: Vec<Complex64> = (0..n)
        .map(|i| {
            let k = ks[i];
            m[kg.mirror(i)] + Complex64::from_polar(1.0, sgn * 2.0 * k * x) * r[i] * m[i] - 1.0
        })
        .collect();

    // fit (2ik) h ~ A + B e^{2ik s0}, s0 = +-x, on the outer tenth of the band;
    // A is the jump at the support edge, B the interior jump at s0
    let s0 = sgn * x;
    let mut ata = [[0.0f64; 2]; 2];
    let mut atb = [0.0f64; 2];
    for i in (n - n / 10..n).chain(0..n / 10) {
        let k = ks[i];
        let y = h[i] * I * (2.0 * k);
        let e = Complex64::from_polar(1.0, 2.0 * k * s0);
        for (row, val) in [([1.0, e.re], y.re), ([0.0, e.im], y.im)] {
            for p in 0..2 {
                atb[p] += row[p] * val;
                for q in 0..2 {
                    ata[p][q] += row[p] * row[q];
                }
            }
        }
    }
    let det = ata[0][0] * ata[1][1] - ata[0][1] * ata[1][0];
    let (amp_a, amp_b) = if det.abs() > 1e-9 * ata[0][0] * ata[1][1] {
        (
            (atb[0] * ata[1][1] - atb[1] * ata[0][1]) / det,
            (ata[0][0] * atb[1] - ata[1][0] * atb[0]) / det,
        )
    } else {
        (atb[0] / ata[0][0], 0.0)
    };
    // J e^{-(s - c)} 1_{s > c} transforms to J e^{2ikc} / (1 - 2ik), and (2ik) of that tends to -J
    let interior = if s0 > 0.0 { -amp_b } else { 0.0 };
    let resid: Vec<Complex64> = (0..n)
        .map(|i| {
            let k = ks[i];
            let d = Complex64::new(1.0, -2.0 * k);
            h[i] + amp_a / d - interior * Complex64::from_polar(1.0, 2.0 * k * s0) / d
        })
        .collect();
    let total: f64 = h.iter().map(|z| z.norm_sqr()).sum();
    // G vanishes to rounding (free potential): nothing sits on either side
    if h.iter().all(|z| z.norm() < 1e-12) {
        return Ok(0.0);
    }
    let gx = inverse_raw(&resid, kg.step, KernelSign::Minus);
    let xg = kg.space_grid()?;
    let o = xg.count / 2;
    // F^{-1} maps the transform back to s -> G(x, -s); the support is s >= 0
    let wrong: f64 = gx
        .iter()
        .enumerate()
        .map(|(j, z)| match j {
            0 => 0.5 * z.norm_sqr(),
            j if j < o => z.norm_sqr(),
            j if j == o => 0.5 * z.norm_sqr(),
            _ => 0.0,
        })
        .sum();
    // Parseval: sum |G|^2 dx = (1/pi) sum |h|^2 dk
    let total_x = total * kg.step / std::f64::consts::PI / xg.step;
    Ok(wrong / total_x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riccati::{extend_extremal, Preset};

    fn grid() -> Grid {
        Grid::centered(20.0, 1.0 / 64.0).unwrap()
    }

    fn pair(p: Preset) -> ExtremalPair {
        extend_extremal(&p.triple(&grid()).unwrap()).unwrap()
    }

    #[test]
    fn free_potential_gives_plane_waves() {
        let p = pair(Preset::Free);
        let j = jost(&p, 1.7, JostSide::Right).unwrap();
        for (i, &x) in p.grid.points().iter().enumerate() {
            assert!((j.f[i] - Complex64::from_polar(1.0, 1.7 * x)).norm() < 1e-12);
        }
        let s = scattering_ab(&p).unwrap();
        assert!(s.r_plus.iter().all(|r| r.norm() < 1e-12));
        assert_eq!(s.class_tag, ClassTag::Exceptional);
    }

    #[test]
    fn delta_coefficients_match_closed_form() {
        for alpha in [0.5, 1.0, 2.0] {
            let s = scattering_ab(&pair(Preset::Delta { alpha })).unwrap();
            for (i, &k) in s.kgrid.points().iter().enumerate() {
                let d = Complex64::new(-alpha, 2.0 * k);
                let r = alpha / d;
                let t = Complex64::new(0.0, 2.0 * k) / d;
                assert!((s.r_plus[i] - r).norm() < 1e-12, "k={k}");
                assert!((s.r_minus[i] - r).norm() < 1e-12, "k={k}");
                assert!((s.t[i] - t).norm() < 1e-12, "k={k}");
            }
            assert!((s.theta + alpha).abs() < 1e-9);
            assert_eq!(s.class_tag, ClassTag::Generic);
        }
    }

    /// Independent oracle: classical RK4 on the Schrodinger form `-f'' + q f = k^2 f`
    /// for a smooth `u` with `q = u' + u^2`.
    fn rk4_r(k: f64, u: impl Fn(f64) -> f64, du: impl Fn(f64) -> f64, l: f64, steps: usize) -> Complex64 {
        let q = |x: f64| du(x) + u(x) * u(x);
        let h = 2.0 * l / steps as f64;
        // start from f- = e^{-ikx} at -l and march to +l
        let mut y = [Complex64::from_polar(1.0, k * l), Complex64::from_polar(1.0, k * l) * Complex64::new(0.0, -k)];
        let rhs = |x: f64, y: [Complex64; 2]| [y[1], (q(x) - k * k) * y[0]];
        let mut x = -l;
        for _ in 0..steps {
            let k1 = rhs(x, y);
            let k2 = rhs(x + h / 2.0, [y[0] + k1[0] * (h / 2.0), y[1] + k1[1] * (h / 2.0)]);
            let k3 = rhs(x + h / 2.0, [y[0] + k2[0] * (h / 2.0), y[1] + k2[1] * (h / 2.0)]);
            let k4 = rhs(x + h, [y[0] + k3[0] * h, y[1] + k3[1] * h]);
            for c in 0..2 {
                y[c] += (k1[c] + k2[c] * 2.0 + k3[c] * 2.0 + k4[c]) * (h / 6.0);
            }
            x += h;
        }
        // f- = A e^{-ikx} + B e^{ikx} at +l; t f- = f+(-k) + r+ f+(k) gives r+ = B / A
        let e = Complex64::from_polar(1.0, k * l);
        let ik = Complex64::new(0.0, k);
        let bb = (y[1] + ik * y[0]) / (ik * 2.0 * e);
        let aa = (ik * y[0] - y[1]) / (ik * 2.0 * e.conj());
        bb / aa
    }

    #[test]
    fn smooth_potential_matches_rk4_oracle() {
        let u = |x: f64| 0.6 * (-(x - 0.3) * (x - 0.3)).exp();
        let du = |x: f64| -1.2 * (x - 0.3) * (-(x - 0.3) * (x - 0.3)).exp();
        let g = Grid::centered(10.0, 1.0 / 128.0).unwrap();
        let t = crate::riccati::RiccatiTriple::on_grid(&g, u, u, 0.0).unwrap();
        let s = scattering_ab(&extend_extremal(&t).unwrap()).unwrap();
        for &kk in &[0.3, 1.0, 4.0, 15.0] {
            let i = s.kgrid.nearest_index(kk).unwrap();
            let k = s.kgrid.point(i);
            let oracle = rk4_r(k, u, du, 10.0, 200_000);
            assert!((s.r_plus[i] - oracle).norm() < 3e-5, "k={k}: {} vs {}", s.r_plus[i], oracle);
        }
    }

    #[test]
    fn large_k_cells_stay_accurate() {
        // kh ~ 1.5: compare the default grid with a 4x finer one at the same k
        let coarse = pair(Preset::Bump { amp_plus: 0.5, amp_minus: 0.3, center: 1.0, width: 1.0, v0: 0.0 });
        let fine_grid = Grid::centered(20.0, 1.0 / 256.0).unwrap();
        let fine = extend_extremal(
            &Preset::Bump { amp_plus: 0.5, amp_minus: 0.3, center: 1.0, width: 1.0, v0: 0.0 }
                .triple(&fine_grid)
                .unwrap(),
        )
        .unwrap();
        for k in [40.0, 90.0] {
            let a = jost_at(&coarse, k, JostSide::Right, coarse.grid.count / 2).unwrap();
            let b = jost_at(&fine, k, JostSide::Right, fine.grid.count / 2).unwrap();
            assert!((a.0 - b.0).norm() < 1e-4, "k={k} {} {}", a.0, b.0);
        }
    }

    #[test]
    fn bump_is_unitary_and_symmetric() {
        let s = scattering_ab(&pair(Preset::by_name("bump").unwrap())).unwrap();
        assert!(s.diagnostics.max_unitarity_defect < 1e-10);
        assert!(s.diagnostics.max_symmetry_defect < 1e-10);
        assert_eq!(s.class_tag, ClassTag::Generic);
    }

    #[test]
    fn theta_magnitude_matches_zero_energy_product() {
        for p in [Preset::Delta { alpha: 1.0 }, Preset::by_name("bump").unwrap()] {
            let pr = pair(p);
            let s = scattering_ab(&pr).unwrap();
            let (fp, fm) = zero_energy_jost(&pr);
            let o = pr.u_plus.origin;
            let expect = pr.v0 * fp[o] * fm[o];
            assert!((s.theta.abs() - expect).abs() < 1e-4, "{} vs {}", s.theta, expect);
        }
    }

    #[test]
    fn zero_energy_jost_of_delta() {
        let pr = pair(Preset::Delta { alpha: 1.0 });
        let (fp, _) = zero_energy_jost(&pr);
        let i = pr.grid.nearest_index(-1.0).unwrap();
        assert!((fp[i] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn extrapolation_is_exact_for_low_degree() {
        let dk = 0.1;
        let f = |k: f64| 2.0 - 3.0 * k * k + 0.5 * k.powi(4) - k.powi(6);
        let samples: Vec<f64> = (0..4).map(|j| f((j as f64 + 0.5) * dk)).collect();
        assert!((extrapolate_even(&samples) - 2.0).abs() < 1e-13);
        assert!((extrapolate_even(&samples[..2]) - 2.0).abs() > 1e-6);
    }

    #[test]
    fn jost_combinations_live_on_one_half_line() {
        let pr = pair(Preset::Delta { alpha: 1.0 });
        let s = scattering_ab(&pr).unwrap();
        for x in [-1.0, 0.5] {
            for side in [JostSide::Right, JostSide::Left] {
                let m = hardy_defect(&pr, &s, x, side).unwrap();
                assert!(m < 1e-4, "x {x} {side:?}: {m:e}");
            }
        }
        let free = pair(Preset::Free);
        let s = scattering_ab(&free).unwrap();
        assert_eq!(hardy_defect(&free, &s, 0.5, JostSide::Right).unwrap(), 0.0);
    }
}
