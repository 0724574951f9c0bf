//! Riccati representatives: triples `(w+, w-, v0)`, their extremal pair
//! `(u+, u-)` and the Miura map `u -> u' + u^2` in weak form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{cumulative_integral, trapezoid, x_norm_real, Grid, SplitFunction};

/// Real samples on one half line, sharing the step of the full grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfLine {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl HalfLine {
    pub fn x_norm(&self) -> f64 {
        x_norm_real(&self.values, self.grid.step)
    }

    /// Linear interpolation, zero outside the sampled range.
    pub fn eval(&self, x: f64) -> f64 {
        let r = (x - self.grid.start) / self.grid.step;
        let n = self.values.len();
        if n == 0 || r < -1e-9 || r > (n - 1) as f64 + 1e-9 {
            return 0.0;
        }
        if n == 1 {
            return self.values[0];
        }
        let r = r.clamp(0.0, (n - 1) as f64);
        let j = (r.floor() as usize).min(n - 2);
        let t = r - j as f64;
        self.values[j] * (1.0 - t) + self.values[j + 1] * t
    }
}

/// `w+` on `[0, L]`, `w-` on `[-L, 0]` and `v0 >= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiccatiTriple {
    pub w_plus: HalfLine,
    pub w_minus: HalfLine,
    pub v0: f64,
}

impl RiccatiTriple {
    /// Samples `w+` and `w-` on the two halves of a centered grid.
    pub fn on_grid(
        grid: &Grid,
        w_plus: impl Fn(f64) -> f64,
        w_minus: impl Fn(f64) -> f64,
        v0: f64,
    ) -> Result<Self> {
        let o = grid
            .origin_index()
            .ok_or_else(|| Error::InvalidGrid("grid does not contain the origin".into()))?;
        let plus = (o..grid.count).map(|i| w_plus(grid.point(i))).collect();
        let minus = (0..=o).map(|i| w_minus(grid.point(i))).collect();
        Self::from_samples(grid.step, grid.start, plus, minus, v0)
    }

    /// `w_plus[j]` sits at `j dx`, `w_minus[j]` at `x0 + j dx` with the last one at zero.
    pub fn from_samples(dx: f64, x0: f64, w_plus: Vec<f64>, w_minus: Vec<f64>, v0: f64) -> Result<Self> {
        if w_minus.is_empty() || w_plus.is_empty() {
            return Err(Error::InvalidInput("empty half-line samples".into()));
        }
        let expected = -(w_minus.len() as f64 - 1.0) * dx;
        if (x0 - expected).abs() > 1e-9 * dx.max(x0.abs()) {
            return Err(Error::InvalidInput(format!(
                "w_minus has {} samples but x0 = {x0} (expected {expected})",
                w_minus.len()
            )));
        }
        let triple = RiccatiTriple {
            w_plus: HalfLine { grid: Grid::new(0.0, dx, w_plus.len().max(2))?, values: w_plus },
            w_minus: HalfLine { grid: Grid::new(x0, dx, w_minus.len().max(2))?, values: w_minus },
            v0,
        };
        triple.validate()?;
        Ok(triple)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v0.is_finite() && self.v0 >= 0.0) {
            return Err(Error::InvalidInput(format!("v0 must be finite and non-negative, got {}", self.v0)));
        }
        for (name, h) in [("w_plus", &self.w_plus), ("w_minus", &self.w_minus)] {
            if let Some(i) = h.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonIntegrable(format!(
                    "{name} is not finite at x = {}",
                    h.grid.point(i)
                )));
            }
            if !h.x_norm().is_finite() {
                return Err(Error::NonIntegrable(format!("{name} has infinite X-norm")));
            }
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        self.w_plus.grid.step
    }

    /// The centered grid on which both halves live, when they have matching lengths.
    pub fn grid(&self) -> Result<Grid> {
        let n_plus = self.w_plus.values.len();
        let n_minus = self.w_minus.values.len();
        if n_minus != n_plus + 1 {
            return Err(Error::InvalidInput(format!(
                "half lines of {n_minus} and {n_plus} samples do not form a centered grid; resample first"
            )));
        }
        Grid::new(self.w_minus.grid.start, self.step(), 2 * n_plus)
    }

    /// Linear resampling onto a centered grid, zero outside the sampled range.
    pub fn resample(&self, grid: &Grid) -> Result<Self> {
        RiccatiTriple::on_grid(grid, |x| self.w_plus.eval(x), |x| self.w_minus.eval(x), self.v0)
    }

    /// The potential obtained by gluing `w-` on `x < 0` to `w+` on `x > 0`.
    pub fn glued(&self) -> Result<SplitFunction> {
        let grid = self.grid()?;
        let mut values = self.w_minus.values.clone();
        let left = values.pop().unwrap_or(0.0);
        values.extend_from_slice(&self.w_plus.values);
        SplitFunction::new(grid, values, left)
    }

    /// X-norm of the triple, `||w+|| + ||w-|| + v0`.
    pub fn x_norm(&self) -> f64 {
        self.w_plus.x_norm() + self.w_minus.x_norm() + self.v0
    }

    /// X-norm distance between two triples on the same half-line grids.
    pub fn distance(&self, other: &RiccatiTriple) -> Result<f64> {
        Ok(self.component_distances(other)?.iter().sum())
    }

    /// X-norm discrepancies of `w+`, `w-` and `v0` separately.
    pub fn component_distances(&self, other: &RiccatiTriple) -> Result<[f64; 3]> {
        if self.w_plus.values.len() != other.w_plus.values.len()
            || self.w_minus.values.len() != other.w_minus.values.len()
            || (self.step() - other.step()).abs() > 1e-12 * self.step()
        {
            return Err(Error::InvalidInput("triples live on different grids".into()));
        }
        let dp: Vec<f64> = self.w_plus.values.iter().zip(&other.w_plus.values).map(|(a, b)| a - b).collect();
        let dm: Vec<f64> = self.w_minus.values.iter().zip(&other.w_minus.values).map(|(a, b)| a - b).collect();
        Ok([x_norm_real(&dp, self.step()), x_norm_real(&dm, self.step()), (self.v0 - other.v0).abs()])
    }
}

/// Extremal Riccati representatives of one potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalPair {
    pub grid: Grid,
    pub u_plus: SplitFunction,
    pub u_minus: SplitFunction,
    pub y_plus: Vec<f64>,
    pub y_minus: Vec<f64>,
    /// `u- - u+`, continuous and positive when `v0 > 0`.
    pub v: Vec<f64>,
    pub v0: f64,
}

/// Extends `w+` to the left and `w-` to the right with the Wronskian
/// normalisation `v(0) = v0`.
pub fn extend_extremal(triple: &RiccatiTriple) -> Result<ExtremalPair> {
    triple.validate()?;
    let grid = triple.grid()?;
    let h = grid.step;
    let o = grid.origin_index().expect("centered grid");
    let n = grid.count;
    let alpha = triple.v0;

    let wp = &triple.w_plus.values;
    let wm = &triple.w_minus.values;

    // right half, index i <-> x = (i - o) h
    let int_wp = cumulative_integral(wp, h);
    let yp_right: Vec<f64> = int_wp.iter().map(|s| s.exp()).collect();
    // left half walked outward from the origin
    let wm_rev: Vec<f64> = wm.iter().rev().copied().collect();
    let int_wm_rev = cumulative_integral(&wm_rev, h);
    let ym_left_rev: Vec<f64> = int_wm_rev.iter().map(|s| (-s).exp()).collect();

    let inv_sq = |y: &[f64]| -> Vec<f64> { y.iter().map(|v| 1.0 / (v * v)).collect() };
    let jr = cumulative_integral(&inv_sq(&yp_right), h);
    let il_rev = cumulative_integral(&inv_sq(&ym_left_rev), h);

    let mut y_plus = vec![0.0; n];
    let mut y_minus = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut up = vec![0.0; n];
    let mut um = vec![0.0; n];

    for (r, i) in (o..n).enumerate() {
        let yp = yp_right[r];
        let g = 1.0 + alpha * jr[r];
        y_plus[i] = yp;
        y_minus[i] = yp * g;
        v[i] = alpha / (yp * yp * g);
        up[i] = wp[r];
        um[i] = wp[r] + v[i];
    }
    for r in 0..=o {
        let i = o - r;
        let ym = ym_left_rev[r];
        let g = 1.0 + alpha * il_rev[r];
        y_minus[i] = ym;
        y_plus[i] = ym * g;
        let vi = alpha / (ym * ym * g);
        if i < o {
            v[i] = vi;
            um[i] = wm_rev[r];
            up[i] = wm_rev[r] - vi;
        }
    }
    let u_plus = SplitFunction::new(grid, up, wm[o] - alpha)?;
    let u_minus = SplitFunction::new(grid, um, wm[o])?;
    for (name, arr) in [("y_plus", &y_plus), ("y_minus", &y_minus), ("v", &v)] {
        if arr.iter().any(|x| !x.is_finite()) {
            return Err(Error::Instability(format!("{name} overflowed during the extension")));
        }
    }
    Ok(ExtremalPair { grid, u_plus, u_minus, y_plus, y_minus, v, v0: alpha })
}

/// `v0 exp(-int_0^x (u+ + u-))`, integrating each half line from the origin.
pub fn v_profile(pair: &ExtremalPair) -> Vec<f64> {
    let o = pair.u_plus.origin;
    let n = pair.grid.count;
    let h = pair.grid.step;
    let s_right: Vec<f64> = (o..n)
        .map(|i| pair.u_plus.values[i] + pair.u_minus.values[i])
        .collect();
    let s_left_rev: Vec<f64> = pair
        .u_plus
        .left_half()
        .iter()
        .zip(pair.u_minus.left_half().iter())
        .rev()
        .map(|(a, b)| a + b)
        .collect();
    let cr = cumulative_integral(&s_right, h);
    let cl = cumulative_integral(&s_left_rev, h);
    let mut out = vec![0.0; n];
    for (r, i) in (o..n).enumerate() {
        out[i] = pair.v0 * (-cr[r]).exp();
    }
    for r in 1..=o {
        out[o - r] = pair.v0 * cl[r].exp();
    }
    out
}

/// Test function samples and derivative on a grid.
#[derive(Clone, Debug)]
pub struct TestFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub derivative: Vec<f64>,
}

impl TestFunction {
    pub fn from_fns(grid: Grid, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> Self {
        let xs = grid.points();
        TestFunction {
            grid,
            values: xs.iter().map(|&x| f(x)).collect(),
            derivative: xs.iter().map(|&x| df(x)).collect(),
        }
    }

    /// Derivative by second-order central differences.
    pub fn from_samples(grid: Grid, values: Vec<f64>) -> Self {
        let n = values.len();
        let h = grid.step;
        let derivative = (0..n)
            .map(|i| {
                if i == 0 {
                    (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
                } else if i == n - 1 {
                    (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h)
                } else {
                    (values[i + 1] - values[i - 1]) / (2.0 * h)
                }
            })
            .collect();
        TestFunction { grid, values, derivative }
    }

    /// Standard bump `exp(-1/(1-t^2))` centred at `c` with half width `eps`.
    pub fn bump(grid: Grid, c: f64, eps: f64) -> Self {
        let f = move |x: f64| {
            let t = (x - c) / eps;
            if t.abs() < 1.0 {
                (-1.0 / (1.0 - t * t)).exp()
            } else {
                0.0
            }
        };
        let df = move |x: f64| {
            let t = (x - c) / eps;
            if t.abs() < 1.0 {
                let d = 1.0 - t * t;
                (-1.0 / d).exp() * (-2.0 * t / (d * d)) / eps
            } else {
                0.0
            }
        };
        Self::from_fns(grid, f, df)
    }
}

/// `<u' + u^2, phi> = -int u phi' + int u^2 phi`, integrating each half line separately.
pub fn miura_apply(u: &SplitFunction, phi: &TestFunction) -> Result<f64> {
    if u.grid != phi.grid {
        return Err(Error::InvalidInput("potential and test function use different grids".into()));
    }
    let n = u.grid.count;
    let scale = phi.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if phi.values[0].abs() > 1e-12 * scale || phi.values[n - 1].abs() > 1e-12 * scale {
        return Err(Error::InvalidInput("test function support reaches the grid boundary".into()));
    }
    let o = u.origin;
    let h = u.grid.step;
    let integrand = |uu: &[f64], range: std::ops::Range<usize>| -> f64 {
        let vals: Vec<f64> = range
            .clone()
            .zip(uu.iter())
            .map(|(i, &ui)| -ui * phi.derivative[i] + ui * ui * phi.values[i])
            .collect();
        trapezoid(&vals, h)
    };
    let left = u.left_half();
    Ok(integrand(&left, 0..o + 1) + integrand(u.right_half(), o..n))
}

/// Named potentials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", content = "params", rename_all = "snake_case")]
pub enum Preset {
    /// `q = alpha delta`.
    Delta {
        #[serde(default = "one")]
        alpha: f64,
    },
    /// Smooth compactly supported `w+`, `w-` and a chosen `v0`. The defaults
    /// satisfy `w-(x) = -w+(-x)`, so the potential is even.
    Bump {
        #[serde(default = "minus_half")]
        amp_plus: f64,
        #[serde(default = "half")]
        amp_minus: f64,
        #[serde(default = "center")]
        center: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default = "v0_default")]
        v0: f64,
    },
    /// Even `u = |x|^{-alpha} sin |x|^beta`.
    Oscillatory {
        #[serde(default = "two")]
        alpha: f64,
        #[serde(default = "four")]
        beta: f64,
    },
    /// `u = alpha phi(x) log|x|` with a smooth cutoff `phi`.
    LogSingular {
        #[serde(default = "one")]
        alpha: f64,
    },
    /// `q = 0`.
    Free,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn four() -> f64 {
    4.0
}
fn half() -> f64 {
    0.5
}
fn minus_half() -> f64 {
    -0.5
}
fn center() -> f64 {
    1.5
}
fn v0_default() -> f64 {
    0.7
}

pub const PRESET_NAMES: [&str; 5] = ["delta", "bump", "oscillatory", "log_singular", "free"];

/// `e * exp(-1/(1-t^2))` on `|t| < 1`, peak value one.
pub fn smooth_bump(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

/// Smooth cutoff equal to one on `|x| <= 1` and zero for `|x| >= 2`.
pub fn smooth_cutoff(x: f64) -> f64 {
    let s = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let a = s(2.0 - x.abs());
    let b = s(x.abs() - 1.0);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Delta { .. } => "delta",
            Preset::Bump { .. } => "bump",
            Preset::Oscillatory { .. } => "oscillatory",
            Preset::LogSingular { .. } => "log_singular",
            Preset::Free => "free",
        }
    }

    /// Preset with default parameters.
    pub fn by_name(name: &str) -> Result<Self> {
        Self::from_params(name, &serde_json::json!({}))
    }

    pub fn from_params(name: &str, params: &serde_json::Value) -> Result<Self> {
        let v = if name == "free" {
            serde_json::json!({ "preset": name })
        } else {
            serde_json::json!({ "preset": name, "params": params })
        };
        serde_json::from_value(v).map_err(|e| {
            Error::InvalidInput(format!(
                "unknown preset or bad parameters for '{name}' ({e}); known presets: {}",
                PRESET_NAMES.join(", ")
            ))
        })
    }

    /// Whether the potential carries a nonzero `v0`.
    pub fn is_generic(&self) -> bool {
        match self {
            Preset::Delta { alpha } => *alpha > 0.0,
            Preset::Bump { v0, .. } => *v0 > 0.0,
            _ => false,
        }
    }

    pub fn triple(&self, grid: &Grid) -> Result<RiccatiTriple> {
        match *self {
            Preset::Delta { alpha } => {
                if !(alpha.is_finite() && alpha >= 0.0) {
                    return Err(Error::InvalidInput(format!("delta strength must be >= 0, got {alpha}")));
                }
                RiccatiTriple::on_grid(grid, |_| 0.0, |_| 0.0, alpha)
            }
            Preset::Bump { amp_plus, amp_minus, center, width, v0 } => {
                if !(width > 0.0) {
                    return Err(Error::InvalidInput(format!("bump width must be positive, got {width}")));
                }
                RiccatiTriple::on_grid(
                    grid,
                    |x| amp_plus * smooth_bump((x - center) / width),
                    |x| amp_minus * smooth_bump((-x - center) / width),
                    v0,
                )
            }
            Preset::Oscillatory { alpha, beta } => {
                if !(alpha > 1.0 && beta - alpha > -0.5) {
                    return Err(Error::NonIntegrable(format!(
                        "|x|^-{alpha} sin|x|^{beta} is not in L1 + L2 (need alpha > 1 and beta - alpha > -1/2)"
                    )));
                }
                let h = grid.step;
                let u = move |x: f64| {
                    let r = x.abs();
                    if r == 0.0 {
                        if beta > alpha {
                            0.0
                        } else if beta == alpha {
                            1.0
                        } else {
                            let r = 0.5 * h;
                            r.powf(-alpha) * r.powf(beta).sin()
                        }
                    } else {
                        r.powf(-alpha) * r.powf(beta).sin()
                    }
                };
                RiccatiTriple::on_grid(grid, u, u, 0.0)
            }
            Preset::LogSingular { alpha } => {
                let h = grid.step;
                let u = move |x: f64| alpha * smooth_cutoff(x) * x.abs().max(0.5 * h).ln();
                RiccatiTriple::on_grid(grid, u, u, 0.0)
            }
            Preset::Free => RiccatiTriple::on_grid(grid, |_| 0.0, |_| 0.0, 0.0),
        }
    }
}
