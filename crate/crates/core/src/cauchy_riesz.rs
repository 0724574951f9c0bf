//! Reflection data: membership checks, transmission from one reflection
//! coefficient through a Cauchy projection, and the right/left involution.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{forward_raw, fourier_inverse_with, half_line_weights, hardy_mass, KernelSign, Side};
use crate::grid::{Domain, Grid, SampledFunction};
use crate::zs_akns::{value_at_zero, ClassTag, ScatteringData};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Unimodular constant relating reconstructed and direct transmission
/// coefficients, `t = PHASE_SIGN * k/(k+i) * exp(C+ log ...)`.
pub const PHASE_SIGN: f64 = 1.0;

/// Endpoint-to-peak ratio allowed for the logarithm before projecting.
/// It decays only like `1/k^2`, so the default transform tolerance is far too strict.
pub const LOG_DECAY_TOL: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReflectionData {
    pub kgrid: Grid,
    pub r: Vec<Complex64>,
    /// `(1 - |r|^2) / k^2`.
    pub r_tilde: Vec<f64>,
    pub class_tag: ClassTag,
}

fn check_kgrid(kgrid: &Grid, len: usize) -> Result<()> {
    if !kgrid.is_half_integer() {
        return Err(Error::InvalidGrid(
            "reflection data must live on a symmetric half-integer wavenumber grid".into(),
        ));
    }
    if len != kgrid.count {
        return Err(Error::InvalidInput(format!("{len} samples for a grid of {} points", kgrid.count)));
    }
    Ok(())
}

impl ReflectionData {
    /// Computes `r_tilde` from `r`.
    pub fn new(kgrid: Grid, r: Vec<Complex64>, class_tag: ClassTag) -> Result<Self> {
        check_kgrid(&kgrid, r.len())?;
        let r_tilde = kgrid
            .points()
            .iter()
            .zip(&r)
            .map(|(k, z)| (1.0 - z.norm_sqr()) / (k * k))
            .collect();
        Ok(ReflectionData { kgrid, r, r_tilde, class_tag })
    }

    /// Keeps a stored `r_tilde` as given; [`validate_membership`] checks it.
    pub fn from_parts(kgrid: Grid, r: Vec<Complex64>, r_tilde: Vec<f64>, class_tag: ClassTag) -> Result<Self> {
        check_kgrid(&kgrid, r.len())?;
        if r_tilde.len() != r.len() {
            return Err(Error::InvalidInput("r and r_tilde have different lengths".into()));
        }
        Ok(ReflectionData { kgrid, r, r_tilde, class_tag })
    }

    /// Tags the data generic when `r(0)` extrapolates to within `0.01` of `-1`.
    pub fn inferred(kgrid: Grid, r: Vec<Complex64>) -> Result<Self> {
        let mut d = Self::new(kgrid, r, ClassTag::Exceptional)?;
        if (d.r_at_zero() + 1.0).abs() < 1e-2 {
            d.class_tag = ClassTag::Generic;
        }
        Ok(d)
    }

    pub fn right(s: &ScatteringData) -> Result<Self> {
        Self::new(s.kgrid, s.r_plus.clone(), s.class_tag)
    }

    pub fn left(s: &ScatteringData) -> Result<Self> {
        Self::new(s.kgrid, s.r_minus.clone(), s.class_tag)
    }

    /// Extrapolated `r(0)`; the odd imaginary part vanishes there.
    pub fn r_at_zero(&self) -> f64 {
        let re: Vec<f64> = self.r.iter().map(|z| z.re).collect();
        value_at_zero(&re)
    }

    pub fn r_tilde_at_zero(&self) -> f64 {
        value_at_zero(&self.r_tilde)
    }

    pub fn as_sampled(&self) -> SampledFunction {
        SampledFunction { grid: self.kgrid, values: self.r.clone(), domain: Domain::Wavenumber }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MembershipTolerances {
    /// Allowed `|r(0) + 1|` in the generic class.
    pub r0: f64,
    pub symmetry: f64,
    pub consistency: f64,
    /// Allowed ratio of `max |r|` on the outer twentieth of the band to `max |r|`.
    pub decay: f64,
}

impl Default for MembershipTolerances {
    fn default() -> Self {
        MembershipTolerances { r0: 1e-3, symmetry: 1e-8, consistency: 1e-10, decay: 0.1 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MembershipReport {
    pub class_tag: ClassTag,
    pub checks: Vec<Check>,
    /// `1 - max |r|`.
    pub min_gap: f64,
    pub r0: f64,
    pub r0_plus_one: f64,
    pub r_tilde0: f64,
    pub symmetry_defect: f64,
    pub consistency_defect: f64,
    pub edge_ratio: f64,
}

impl MembershipReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }

    /// Turns the first failed check into a membership error.
    pub fn require(self) -> Result<Self> {
        match self.first_failure() {
            Some(c) => Err(Error::Membership {
                check: c.name.clone(),
                detail: format!("measured margin {:.3e}", c.margin),
            }),
            None => Ok(self),
        }
    }
}

pub fn validate_membership(d: &ReflectionData) -> MembershipReport {
    validate_membership_with(d, &MembershipTolerances::default())
}

pub fn validate_membership_with(d: &ReflectionData, tol: &MembershipTolerances) -> MembershipReport {
    let n = d.kgrid.count;
    let ks = d.kgrid.points();
    let max_r = d.r.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let symmetry_defect = (0..n)
        .map(|i| (d.r[d.kgrid.mirror(i)] - d.r[i].conj()).norm())
        .fold(0.0, f64::max);
    let consistency_defect = (0..n)
        .map(|i| (d.r_tilde[i] * ks[i] * ks[i] - (1.0 - d.r[i].norm_sqr())).abs())
        .fold(0.0, f64::max);
    let band = (n / 40).max(1);
    let edge = d.r[..band]
        .iter()
        .chain(&d.r[n - band..])
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let edge_ratio = if max_r > 0.0 { edge / max_r } else { 0.0 };
    let r0 = d.r_at_zero();
    let r_tilde0 = d.r_tilde_at_zero();

    let mut checks = vec![
        Check { name: "symmetry r(-k) = conj r(k)".into(), passed: symmetry_defect <= tol.symmetry, margin: symmetry_defect },
        Check { name: "|r(k)| < 1".into(), passed: max_r < 1.0, margin: 1.0 - max_r },
        Check {
            name: "r_tilde k^2 = 1 - |r|^2".into(),
            passed: consistency_defect <= tol.consistency,
            margin: consistency_defect,
        },
        Check { name: "decay of r at the band edge".into(), passed: edge_ratio <= tol.decay, margin: edge_ratio },
    ];
    match d.class_tag {
        ClassTag::Generic => {
            checks.push(Check { name: "r(0) = -1".into(), passed: (r0 + 1.0).abs() <= tol.r0, margin: r0 + 1.0 });
            checks.push(Check { name: "r_tilde(0) > 0".into(), passed: r_tilde0 > 0.0, margin: r_tilde0 });
        }
        ClassTag::Exceptional => {
            checks.push(Check { name: "|r(0)| < 1".into(), passed: r0.abs() < 1.0, margin: 1.0 - r0.abs() });
        }
    }
    MembershipReport {
        class_tag: d.class_tag,
        checks,
        min_gap: 1.0 - max_r,
        r0,
        r0_plus_one: r0 + 1.0,
        r_tilde0,
        symmetry_defect,
        consistency_defect,
        edge_ratio,
    }
}

fn require_generic(d: &ReflectionData, what: &str) -> Result<()> {
    if d.class_tag != ClassTag::Generic {
        return Err(Error::ClassMismatch(format!("{what} needs generic-class reflection data")));
    }
    Ok(())
}

/// `(1 - |r|^2)(k^2 + 1)/k^2 = (1 - |r|^2) + r_tilde`, which is `|t(k)(k+i)/k|^2`.
pub fn log_argument(d: &ReflectionData) -> Result<Vec<f64>> {
    require_generic(d, "the transmission reconstruction")?;
    let out: Vec<f64> = d.r.iter().zip(&d.r_tilde).map(|(z, rt)| (1.0 - z.norm_sqr()) + rt).collect();
    if let Some(i) = out.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Membership {
            check: "1 - |r|^2 + r_tilde > 0".into(),
            detail: format!("value {:.3e} at k = {}", out[i], d.kgrid.point(i)),
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Transmission {
    pub kgrid: Grid,
    pub t: Vec<Complex64>,
    /// `(k+i)/k t`, analytic in the upper half plane and tending to one.
    pub t_reg: Vec<Complex64>,
    /// Limit of `2ik / t` at zero.
    pub theta: f64,
    /// `max |t_reg(-k) - conj t_reg(k)|` before symmetrisation.
    pub symmetry_defect: f64,
}

pub fn reconstruct_t(d: &ReflectionData) -> Result<Transmission> {
    let g = log_argument(d)?;
    let n = d.kgrid.count;
    let logs = SampledFunction {
        grid: d.kgrid,
        values: g.iter().map(|v| Complex64::new(v.ln(), 0.0)).collect(),
        domain: Domain::Wavenumber,
    };
    let p = project_even_plus(&logs)?;
    let raw: Vec<Complex64> = p.iter().map(|z| z.exp()).collect();
    let mut symmetry_defect = 0.0f64;
    let t_reg: Vec<Complex64> = (0..n)
        .map(|i| {
            let m = raw[d.kgrid.mirror(i)].conj();
            symmetry_defect = symmetry_defect.max((raw[i] - m).norm());
            0.5 * (raw[i] + m)
        })
        .collect();
    if symmetry_defect > 1e-8 {
        log::warn!("reconstructed transmission symmetry defect {symmetry_defect:.3e} exceeds 1e-8");
    }
    let ks = d.kgrid.points();
    let t: Vec<Complex64> = ks
        .iter()
        .zip(&t_reg)
        .map(|(&k, tr)| PHASE_SIGN * k * tr / Complex64::new(k, 1.0))
        .collect();
    // 2ik/t = 2i(k+i)/t_reg is smooth through zero
    let s: Vec<f64> = ks
        .iter()
        .zip(&t_reg)
        .map(|(&k, tr)| (2.0 * I * Complex64::new(k, 1.0) / (PHASE_SIGN * tr)).re)
        .collect();
    Ok(Transmission { kgrid: d.kgrid, t, t_reg, theta: value_at_zero(&s), symmetry_defect })
}

/// `C+ g` for real even `g` whose inverse transform `H` is continuous with a kink at 0.
///
/// The plain discrete projection cuts `H` at the origin, and the trapezoid
/// rule then misses an endpoint term growing like `k dx^2 H(0)`. A one-sided
/// model `(J + J1 x) e^{-x}` matching `H(0)` and `H'(0+)` is removed first and
/// its odd (imaginary) part is added back in closed form. Its even part stays
/// discrete, so `P(k) + P(-k) = g(k)` still holds to round-off.
fn project_even_plus(g: &SampledFunction) -> Result<Vec<Complex64>> {
    let h = fourier_inverse_with(g, KernelSign::Minus, LOG_DECAY_TOL)?;
    let xg = h.grid;
    let o = xg.count / 2;
    let dx = xg.step;
    let hv: Vec<f64> = h.values.iter().map(|z| z.re).collect();
    let j0 = hv[o];
    let slope = (-3.0 * hv[o] + 4.0 * hv[o + 1] - hv[o + 2]) / (2.0 * dx);
    let j1 = slope + j0;
    let model = |x: f64| {
        let a = x.abs();
        (j0 + j1 * a) * (-a).exp()
    };
    let w = half_line_weights(&xg, Side::Plus);
    let cut: Vec<Complex64> = (0..xg.count)
        .map(|j| Complex64::new((hv[j] - model(xg.point(j))) * w[j], 0.0))
        .collect();
    let even: Vec<Complex64> = xg.points().iter().map(|&x| Complex64::new(model(x), 0.0)).collect();
    let p = forward_raw(&cut, dx);
    let e = forward_raw(&even, dx);
    Ok(g.grid
        .points()
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let d = Complex64::new(1.0, -2.0 * k);
            let exact = j0 / d + j1 / (d * d);
            p[i] + 0.5 * e[i].re + I * exact.im
        })
        .collect())
}

/// Relative L2 mass of the inverse transform of `t_reg - 1` on `x < 0`.
pub fn transmission_hardy_mass(t: &Transmission) -> Result<f64> {
    let g = SampledFunction {
        grid: t.kgrid,
        values: t.t_reg.iter().map(|z| z - 1.0).collect(),
        domain: Domain::Wavenumber,
    };
    hardy_mass(&g, Side::Plus)
}

/// `r#(k) = -(t(k)/t(-k)) r(-k)`; `r_tilde` is carried over unchanged.
pub fn involution(d: &ReflectionData) -> Result<ReflectionData> {
    let tr = reconstruct_t(d)?;
    Ok(involution_with(d, &tr))
}

pub fn involution_with(d: &ReflectionData, tr: &Transmission) -> ReflectionData {
    let n = d.kgrid.count;
    let r = (0..n)
        .map(|i| {
            let m = d.kgrid.mirror(i);
            -(tr.t[i] / tr.t[m]) * d.r[m]
        })
        .collect();
    ReflectionData { kgrid: d.kgrid, r, r_tilde: d.r_tilde.clone(), class_tag: d.class_tag }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kgrid() -> Grid {
        Grid::centered(20.0, 1.0 / 64.0).unwrap().wavenumber_grid().unwrap()
    }

    fn delta(alpha: f64) -> ReflectionData {
        let kg = kgrid();
        let r = kg.points().iter().map(|&k| alpha / Complex64::new(-alpha, 2.0 * k)).collect();
        ReflectionData::new(kg, r, ClassTag::Generic).unwrap()
    }

    #[test]
    fn delta_membership_margins() {
        let rep = validate_membership(&delta(1.0));
        assert!(rep.passed(), "{:?}", rep.first_failure());
        assert!(rep.r0_plus_one.abs() < 1e-4, "{}", rep.r0_plus_one);
        assert!((rep.r_tilde0 - 4.0).abs() < 1e-4, "{}", rep.r_tilde0);
    }

    #[test]
    fn zero_reflection_is_exceptional() {
        let kg = kgrid();
        let d = ReflectionData::inferred(kg, vec![Complex64::new(0.0, 0.0); kg.count]).unwrap();
        assert_eq!(d.class_tag, ClassTag::Exceptional);
        assert!(validate_membership(&d).passed());
        assert!(matches!(log_argument(&d), Err(Error::ClassMismatch(_))));
    }

    #[test]
    fn constant_reflection_fails_decay() {
        let kg = kgrid();
        let d = ReflectionData::inferred(kg, vec![Complex64::new(0.5, 0.0); kg.count]).unwrap();
        let rep = validate_membership(&d);
        assert_eq!(rep.first_failure().unwrap().name, "decay of r at the band edge");
    }

    #[test]
    fn tiny_reflection_tagged_generic_is_rejected() {
        let kg = kgrid();
        let r = kg.points().iter().map(|k| Complex64::new(1e-9 * (-k * k).exp(), 0.0)).collect();
        let d = ReflectionData::new(kg, r, ClassTag::Generic).unwrap();
        let err = validate_membership(&d).require().unwrap_err();
        assert!(err.to_string().contains("r(0) = -1"));
    }

    #[test]
    fn log_argument_closed_form() {
        let d = delta(1.0);
        let g = log_argument(&d).unwrap();
        for (k, v) in d.kgrid.points().iter().zip(&g) {
            let want = 4.0 * (k * k + 1.0) / (4.0 * k * k + 1.0);
            assert!((v - want).abs() < 1e-10 * want);
        }
        assert!((value_at_zero(&g) - 4.0).abs() < 1e-4);
    }

    #[test]
    fn transmission_of_delta() {
        for alpha in [0.5, 1.0, 2.0] {
            let d = delta(alpha);
            let tr = reconstruct_t(&d).unwrap();
            let mut worst = 0.0f64;
            for (i, &k) in d.kgrid.points().iter().enumerate() {
                let exact = Complex64::new(0.0, 2.0 * k) / Complex64::new(-alpha, 2.0 * k);
                assert!((tr.t[i].norm_sqr() - (1.0 - d.r[i].norm_sqr())).abs() < 1e-10);
                worst = worst.max((tr.t[i] - exact).norm());
            }
            assert!(worst < 1e-4, "alpha {alpha}: {worst}");
            assert!((tr.theta + alpha).abs() < 1e-3, "{}", tr.theta);
            assert!(transmission_hardy_mass(&tr).unwrap() < 1e-4);
        }
    }

    #[test]
    fn involution_fixes_delta_and_is_an_involution() {
        let d = delta(1.0);
        let once = involution(&d).unwrap();
        let twice = involution(&once).unwrap();
        for i in 0..d.kgrid.count {
            assert!((once.r[i] - d.r[i]).norm() < 1e-3);
            assert!((once.r[i].norm() - d.r[i].norm()).abs() < 1e-12);
            assert!((twice.r[i] - d.r[i]).norm() < 1e-10);
        }
        assert_eq!(once.r_tilde, d.r_tilde);
    }
}
