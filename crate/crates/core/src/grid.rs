//! Uniform grids, sampled functions and quadrature.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Space,
    Wavenumber,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::Space => "space",
            Domain::Wavenumber => "wavenumber",
        }
    }
}

/// Uniform grid `start + i * step`, `i = 0..count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl Grid {
    pub fn new(start: f64, step: f64, count: usize) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidGrid(format!("step must be positive, got {step}")));
        }
        if !start.is_finite() {
            return Err(Error::InvalidGrid(format!("start must be finite, got {start}")));
        }
        if count < 2 {
            return Err(Error::InvalidGrid(format!("need at least two points, got {count}")));
        }
        Ok(Grid { start, step, count })
    }

    /// Space grid on `[-half_length, half_length)` with the origin as a node.
    pub fn centered(half_length: f64, step: f64) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half length must be positive, got {half_length}"
            )));
        }
        let ratio = half_length / step;
        let half = ratio.round();
        if (ratio - half).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "half length {half_length} is not a multiple of the step {step}"
            )));
        }
        let half = half as usize;
        Grid::new(-(half as f64) * step, step, 2 * half)
    }

    #[inline]
    pub fn point(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.point(i)).collect()
    }

    pub fn last(&self) -> f64 {
        self.point(self.count - 1)
    }

    /// Index of the node at zero, if there is one.
    pub fn origin_index(&self) -> Option<usize> {
        let r = -self.start / self.step;
        let i = r.round();
        if i >= 0.0 && (i as usize) < self.count && (r - i).abs() < 1e-9 {
            Some(i as usize)
        } else {
            None
        }
    }

    /// Nearest node to `x`, if `x` lies within half a step of the grid.
    pub fn nearest_index(&self, x: f64) -> Option<usize> {
        let r = ((x - self.start) / self.step).round();
        if r < 0.0 || r as usize >= self.count {
            None
        } else {
            Some(r as usize)
        }
    }

    /// True for grids `-N/2 * step .. (N/2 - 1) * step` with `N` even.
    pub fn is_centered(&self) -> bool {
        self.count % 2 == 0
            && (self.start + (self.count / 2) as f64 * self.step).abs() < 1e-9 * self.step
    }

    /// True for the symmetric half-integer grids produced by [`Grid::wavenumber_grid`].
    pub fn is_half_integer(&self) -> bool {
        let n = self.count as f64;
        (self.start - (0.5 - n / 2.0) * self.step).abs() < 1e-9 * self.step
    }

    /// Wavenumber grid paired with a centered space grid: `N dx dk = pi`,
    /// nodes at half-integer multiples of `dk`.
    pub fn wavenumber_grid(&self) -> Result<Grid> {
        if !self.is_centered() {
            return Err(Error::InvalidGrid(
                "transforms need a centered space grid with an even number of points".into(),
            ));
        }
        let n = self.count as f64;
        let dk = std::f64::consts::PI / (n * self.step);
        Grid::new((0.5 - n / 2.0) * dk, dk, self.count)
    }

    /// Inverse of [`Grid::wavenumber_grid`].
    pub fn space_grid(&self) -> Result<Grid> {
        if !self.is_half_integer() || self.count % 2 != 0 {
            return Err(Error::InvalidGrid(
                "wavenumber grid must be symmetric with half-integer nodes".into(),
            ));
        }
        let n = self.count as f64;
        let dx = std::f64::consts::PI / (n * self.step);
        Grid::new(-(n / 2.0) * dx, dx, self.count)
    }

    /// Index of `-k` for a symmetric wavenumber grid.
    #[inline]
    pub fn mirror(&self, i: usize) -> usize {
        self.count - 1 - i
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub grid: Grid,
    pub values: Vec<Complex64>,
    pub domain: Domain,
}

impl SampledFunction {
    pub fn new(grid: Grid, values: Vec<Complex64>, domain: Domain) -> Result<Self> {
        if values.len() != grid.count {
            return Err(Error::InvalidInput(format!(
                "{} samples for a grid of {} points",
                values.len(),
                grid.count
            )));
        }
        Ok(SampledFunction { grid, values, domain })
    }

    pub fn from_fn(grid: Grid, domain: Domain, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.points().into_iter().map(f).collect();
        SampledFunction { grid, values, domain }
    }

    pub fn from_real(grid: Grid, domain: Domain, values: &[f64]) -> Result<Self> {
        Self::new(
            grid,
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            domain,
        )
    }

    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn expect_domain(&self, domain: Domain) -> Result<()> {
        if self.domain == domain {
            Ok(())
        } else {
            Err(Error::DomainMismatch {
                expected: domain.name(),
                found: self.domain.name(),
            })
        }
    }
}

/// Real samples on a grid containing the origin, allowed to jump there.
///
/// `values[origin]` holds the right limit, `left_limit` the left one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub origin: usize,
    pub left_limit: f64,
}

impl SplitFunction {
    pub fn new(grid: Grid, values: Vec<f64>, left_limit: f64) -> Result<Self> {
        let origin = grid
            .origin_index()
            .ok_or_else(|| Error::InvalidGrid("grid does not contain the origin".into()))?;
        if values.len() != grid.count {
            return Err(Error::InvalidInput(format!(
                "{} samples for a grid of {} points",
                values.len(),
                grid.count
            )));
        }
        Ok(SplitFunction { grid, values, origin, left_limit })
    }

    pub fn continuous(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let origin = grid
            .origin_index()
            .ok_or_else(|| Error::InvalidGrid("grid does not contain the origin".into()))?;
        let left = values.get(origin).copied().unwrap_or(0.0);
        Self::new(grid, values, left)
    }

    pub fn right_limit(&self) -> f64 {
        self.values[self.origin]
    }

    pub fn jump(&self) -> f64 {
        self.right_limit() - self.left_limit
    }

    /// Values at the two ends of cell `[x_j, x_{j+1}]` as seen from inside the cell.
    #[inline]
    pub fn cell(&self, j: usize) -> (f64, f64) {
        let a = self.values[j];
        let b = if j + 1 == self.origin { self.left_limit } else { self.values[j + 1] };
        (a, b)
    }

    /// Value used by quadrature rules: the mean of the one-sided limits at the origin.
    #[inline]
    pub fn node_mean(&self, i: usize) -> f64 {
        if i == self.origin {
            0.5 * (self.values[i] + self.left_limit)
        } else {
            self.values[i]
        }
    }

    /// Samples on `x <= 0` ending with the left limit at the origin.
    pub fn left_half(&self) -> Vec<f64> {
        let mut out = self.values[..=self.origin].to_vec();
        out[self.origin] = self.left_limit;
        out
    }

    pub fn right_half(&self) -> &[f64] {
        &self.values[self.origin..]
    }

    /// Linear interpolation, taking one-sided data on either side of the origin.
    pub fn eval(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x < g.start || x > g.last() {
            return 0.0;
        }
        let r = (x - g.start) / g.step;
        let j = (r.floor() as usize).min(g.count - 2);
        let t = r - j as f64;
        let (a, b) = self.cell(j);
        a + (b - a) * t
    }

    pub fn to_sampled(&self, domain: Domain) -> SampledFunction {
        let values = (0..self.grid.count)
            .map(|i| Complex64::new(self.node_mean(i), 0.0))
            .collect();
        SampledFunction { grid: self.grid, values, domain }
    }
}

/// Composite trapezoid rule on uniform samples.
pub fn trapezoid(values: &[f64], step: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => step * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1])),
    }
}

/// Running integral `int_{x_0}^{x_i} f` with cell-wise cubic interpolation.
///
/// Fourth order for smooth data; falls back to lower order for very short arrays.
pub fn cumulative_integral(values: &[f64], step: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    let f = values;
    let h = step;
    for j in 0..n - 1 {
        let cell = if n == 2 {
            0.5 * h * (f[0] + f[1])
        } else if n == 3 {
            if j == 0 {
                h / 12.0 * (5.0 * f[0] + 8.0 * f[1] - f[2])
            } else {
                h / 12.0 * (-f[0] + 8.0 * f[1] + 5.0 * f[2])
            }
        } else if j == 0 {
            h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
        } else if j == n - 2 {
            h / 24.0 * (f[n - 4] - 5.0 * f[n - 3] + 19.0 * f[n - 2] + 9.0 * f[n - 1])
        } else {
            h / 24.0 * (-f[j - 1] + 13.0 * f[j] + 13.0 * f[j + 1] - f[j + 2])
        };
        out[j + 1] = out[j] + cell;
    }
    out
}

/// X-norm `||f||_1 + ||f||_2` by trapezoid quadrature.
pub fn x_norm(f: &SampledFunction) -> f64 {
    let abs: Vec<f64> = f.values.iter().map(|z| z.norm()).collect();
    x_norm_real(&abs, f.grid.step)
}

/// X-norm of real samples with uniform spacing `step`.
pub fn x_norm_real(values: &[f64], step: f64) -> f64 {
    let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
    trapezoid(&abs, step) + trapezoid(&sq, step).sqrt()
}

/// X-norm of a function with a jump at the origin, integrating each half separately.
pub fn x_norm_split(f: &SplitFunction) -> f64 {
    let left = f.left_half();
    let right = f.right_half();
    let h = f.grid.step;
    let l1 = trapezoid(&left.iter().map(|v| v.abs()).collect::<Vec<_>>(), h)
        + trapezoid(&right.iter().map(|v| v.abs()).collect::<Vec<_>>(), h);
    let l2 = trapezoid(&left.iter().map(|v| v * v).collect::<Vec<_>>(), h)
        + trapezoid(&right.iter().map(|v| v * v).collect::<Vec<_>>(), h);
    l1 + l2.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_grid_has_origin_in_the_middle() {
        let g = Grid::centered(20.0, 1.0 / 64.0).unwrap();
        assert_eq!(g.count, 2560);
        assert_eq!(g.origin_index(), Some(1280));
        assert!(g.is_centered());
        let k = g.wavenumber_grid().unwrap();
        assert!((k.step - std::f64::consts::PI / 40.0).abs() < 1e-15);
        assert!((k.point(k.count / 2) - 0.5 * k.step).abs() < 1e-14);
        assert_eq!(k.space_grid().unwrap(), g);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(Grid::new(0.0, 0.0, 10).is_err());
        assert!(Grid::new(0.0, 1.0, 1).is_err());
        assert!(Grid::centered(1.0, 0.3).is_err());
        assert!(Grid::new(0.1, 1.0, 8).unwrap().wavenumber_grid().is_err());
    }

    #[test]
    fn x_norm_of_indicator_and_exponential() {
        let g = Grid::centered(20.0, 1.0 / 64.0).unwrap();
        let ind = SampledFunction::from_fn(g, Domain::Space, |x| {
            let v = if x == 0.0 || x == 1.0 {
                0.5
            } else if (0.0..1.0).contains(&x) {
                1.0
            } else {
                0.0
            };
            Complex64::new(v, 0.0)
        });
        assert!((x_norm(&ind) - 2.0).abs() < 1e-2);
        let e = SampledFunction::from_fn(g, Domain::Space, |x| Complex64::new((-x.abs()).exp(), 0.0));
        assert!((x_norm(&e) - 3.0).abs() < 1e-4);
    }

    #[test]
    fn cumulative_integral_is_fourth_order() {
        let err = |n: usize| {
            let h = 2.0 / (n - 1) as f64;
            let v: Vec<f64> = (0..n).map(|i| (i as f64 * h).sin()).collect();
            let c = cumulative_integral(&v, h);
            (0..n)
                .map(|i| (c[i] - (1.0 - (i as f64 * h).cos())).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(33), err(65));
        assert!(e1 < 1e-6);
        assert!((e1 / e2).log2() > 3.7, "order {}", (e1 / e2).log2());
    }

    #[test]
    fn split_function_cells_respect_the_jump() {
        let g = Grid::centered(2.0, 0.5).unwrap();
        let vals: Vec<f64> = g.points().iter().map(|&x| if x >= 0.0 { 1.0 } else { -1.0 }).collect();
        let f = SplitFunction::new(g, vals, -1.0).unwrap();
        assert_eq!(f.cell(f.origin - 1), (-1.0, -1.0));
        assert_eq!(f.cell(f.origin), (1.0, 1.0));
        assert_eq!(f.node_mean(f.origin), 0.0);
        assert_eq!(f.jump(), 2.0);
        assert!((x_norm_split(&f) - (3.5 + 3.5f64.sqrt())).abs() < 1e-12);
    }
}
