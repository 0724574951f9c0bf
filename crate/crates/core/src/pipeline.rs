//! Orchestration shared by the command-line tool, the tests and the benches.

use std::f64::consts::PI;
use std::path::PathBuf;

use log::info;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cauchy_riesz::{
    involution_with, reconstruct_t, transmission_hardy_mass, validate_membership, MembershipReport, ReflectionData,
};
use crate::error::{Error, Result};
use crate::fourier::{inverse_raw, KernelSign};
use crate::glm::{invert, GlmOptions, MarchenkoKernel, ReconstructionDiagnostics, ReconstructionResult};
use crate::grid::{x_norm, Domain, Grid, SampledFunction};
use crate::io::PotentialFile;
use crate::riccati::{extend_extremal, ExtremalPair, Preset, RiccatiTriple, PRESET_NAMES};
use crate::zs_akns::{hardy_defect, scattering_ab, zero_energy_jost, ClassTag, JostSide, ScatteringData};

pub const DEFAULT_L: f64 = 20.0;
pub const DEFAULT_DX: f64 = 1.0 / 64.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub grid_l: f64,
    /// `None` means derived from `kmax`, or the default step.
    pub grid_dx: Option<f64>,
    pub kmax: Option<f64>,
    /// Linear-solver tolerance of the GLM solves.
    pub tol: f64,
    pub input: Option<PathBuf>,
    pub preset: Option<String>,
    pub params: Option<serde_json::Value>,
    pub out: PathBuf,
    pub jobs: Option<usize>,
    pub seed: u64,
    /// How far past the origin the GLM problems are solved.
    pub overlap: f64,
    /// The direct map runs on a window `pad` times wider than the output.
    pub pad: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid_l: DEFAULT_L,
            grid_dx: None,
            kmax: None,
            tol: 1e-12,
            input: None,
            preset: None,
            params: None,
            out: PathBuf::from("out"),
            jobs: None,
            seed: 0,
            overlap: 5.0,
            pad: 2.0,
        }
    }
}

impl RunConfig {
    /// Step after reconciling `grid_dx` with `kmax = pi / (2 dx)`.
    pub fn step(&self) -> Result<f64> {
        let from_k = match self.kmax {
            Some(k) if !(k.is_finite() && k > 0.0) => {
                return Err(Error::InvalidGrid(format!("kmax must be positive, got {k}")))
            }
            Some(k) => Some(PI / (2.0 * k)),
            None => None,
        };
        match (self.grid_dx, from_k) {
            (Some(dx), _) if !(dx.is_finite() && dx > 0.0) => {
                Err(Error::InvalidGrid(format!("grid step must be positive, got {dx}")))
            }
            (Some(dx), Some(d)) if (dx - d).abs() > 1e-9 * dx => Err(Error::InvalidGrid(format!(
                "grid step {dx} and kmax {} disagree: the pairing fixes kmax = pi/(2 dx) = {}",
                self.kmax.unwrap_or(0.0),
                PI / (2.0 * dx)
            ))),
            (Some(dx), _) => Ok(dx),
            (None, Some(d)) => Ok(d),
            (None, None) => Ok(DEFAULT_DX),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance must be positive, got {}", self.tol)));
        }
        if !(self.overlap > 0.0) {
            return Err(Error::InvalidInput(format!("overlap must be positive, got {}", self.overlap)));
        }
        if !(self.pad >= 1.0) {
            return Err(Error::InvalidInput(format!("pad factor must be at least 1, got {}", self.pad)));
        }
        if self.jobs == Some(0) {
            return Err(Error::InvalidInput("jobs must be at least 1".into()));
        }
        self.grid()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::centered(self.grid_l, self.step()?)
    }

    /// The widened window of the direct map, a whole number of steps.
    pub fn padded_grid(&self) -> Result<Grid> {
        let dx = self.step()?;
        let half = (self.grid_l * self.pad / dx).round();
        Grid::centered(half * dx, dx)
    }

    pub fn glm_options(&self) -> GlmOptions {
        GlmOptions { tol: self.tol, overlap: self.overlap, half_width: Some(self.grid_l), ..Default::default() }
    }

    /// The potential named by `input` (a JSON file) or by `preset`/`params`.
    pub fn potential(&self) -> Result<PotentialFile> {
        match (&self.input, &self.preset) {
            (Some(_), Some(_)) => Err(Error::InvalidInput("give either an input file or a preset, not both".into())),
            (Some(p), None) => crate::io::read_potential(p),
            (None, Some(name)) => {
                Ok(PotentialFile::Preset { preset: name.clone(), params: self.params.clone().unwrap_or_default() })
            }
            (None, None) => Err(Error::InvalidInput("no potential given: pass --input or --preset".into())),
        }
    }

    pub fn reflection(&self) -> Result<ReflectionData> {
        match &self.input {
            Some(p) => crate::io::read_reflection_csv(p),
            None => Err(Error::InvalidInput("no reflection data given: pass --input".into())),
        }
    }
}

/// Runs `f` on a pool of `jobs` threads, or the global pool.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Direct map of `triple`, computed on the padded window.
pub struct DirectRun {
    pub triple: RiccatiTriple,
    pub pair: ExtremalPair,
    pub scattering: ScatteringData,
    pub reflection: ReflectionData,
}

pub fn direct_map(triple: &RiccatiTriple, padded: &Grid) -> Result<DirectRun> {
    let wide = triple.resample(padded)?;
    let pair = extend_extremal(&wide)?;
    let scattering = scattering_ab(&pair)?;
    let reflection = ReflectionData::right(&scattering)?;
    Ok(DirectRun { triple: triple.clone(), pair, scattering, reflection })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HardyRow {
    pub x: f64,
    pub side: JostSide,
    pub mass: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransmissionCheck {
    /// `max | |t|^2 - (1 - |r|^2) |` for the reconstructed `t`.
    pub unitarity: f64,
    /// `max | |t| - |t_direct| |`.
    pub modulus_vs_direct: f64,
    /// Wrong-side mass of the inverse transform of `t_tilde - 1`.
    pub hardy_mass: f64,
    /// `sup |I(I(r)) - r|`.
    pub involution_twice: f64,
    /// `sup |I(r+) - r-|` against the left coefficient of the direct map.
    pub involution_vs_left: f64,
    pub theta_from_t: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DirectReport {
    pub class: ClassTag,
    pub theta: f64,
    /// `v0 f+(0,0) f-(0,0)`.
    pub theta_zero_energy: f64,
    pub membership: MembershipReport,
    pub max_unitarity_defect: f64,
    pub max_symmetry_defect: f64,
    pub hardy: Vec<HardyRow>,
    pub transmission: Option<TransmissionCheck>,
}

/// Three grid points in `[-3, 3]` drawn from `seed`.
pub fn hardy_sample_points(grid: &Grid, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs: Vec<f64> = Vec::new();
    while xs.len() < 3 {
        let x = rng.gen_range(-3.0..3.0);
        let xi = grid.nearest_index(x).map(|i| grid.point(i)).unwrap_or(0.0);
        if !xs.contains(&xi) {
            xs.push(xi);
        }
    }
    xs
}

pub fn direct_report(run: &DirectRun, seed: u64) -> Result<DirectReport> {
    let s = &run.scattering;
    let (fp, fm) = zero_energy_jost(&run.pair);
    let o = run.pair.u_plus.origin;
    let theta_zero_energy = run.pair.v0 * fp[o] * fm[o];
    let membership = validate_membership(&run.reflection);
    let mut hardy = Vec::new();
    for x in hardy_sample_points(&run.pair.grid, seed) {
        for side in [JostSide::Right, JostSide::Left] {
            hardy.push(HardyRow { x, side, mass: hardy_defect(&run.pair, s, x, side)? });
        }
    }
    let transmission = if s.class_tag == ClassTag::Generic && membership.passed() {
        let tr = reconstruct_t(&run.reflection)?;
        let sharp = involution_with(&run.reflection, &tr);
        let twice = involution_with(&sharp, &reconstruct_t(&sharp)?);
        let mut check = TransmissionCheck {
            unitarity: 0.0,
            modulus_vs_direct: 0.0,
            hardy_mass: transmission_hardy_mass(&tr)?,
            involution_twice: 0.0,
            involution_vs_left: 0.0,
            theta_from_t: tr.theta,
        };
        for i in 0..s.kgrid.count {
            let r = run.reflection.r[i];
            check.unitarity = check.unitarity.max((tr.t[i].norm_sqr() - (1.0 - r.norm_sqr())).abs());
            check.modulus_vs_direct = check.modulus_vs_direct.max((tr.t[i].norm() - s.t[i].norm()).abs());
            check.involution_twice = check.involution_twice.max((twice.r[i] - r).norm());
            check.involution_vs_left = check.involution_vs_left.max((sharp.r[i] - s.r_minus[i]).norm());
        }
        Some(check)
    } else {
        None
    };
    Ok(DirectReport {
        class: s.class_tag,
        theta: s.theta,
        theta_zero_energy,
        membership,
        max_unitarity_defect: s.diagnostics.max_unitarity_defect,
        max_symmetry_defect: s.diagnostics.max_symmetry_defect,
        hardy,
        transmission,
    })
}

/// Direct map of the configured potential with its report.
pub fn cmd_direct(cfg: &RunConfig) -> Result<(DirectRun, DirectReport)> {
    cfg.validate()?;
    let triple = cfg.potential()?.triple(&cfg.grid()?)?;
    let run = direct_map(&triple, &cfg.padded_grid()?)?;
    info!("direct map done: class {}, theta {}", run.scattering.class_tag.as_str(), run.scattering.theta);
    let report = direct_report(&run, cfg.seed)?;
    Ok((run, report))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvertReport {
    pub membership: MembershipReport,
    pub v0_readout: f64,
    pub kernel_max_imag: f64,
    pub kernel_sum_jump: f64,
    pub truncation_mass: f64,
    pub diagnostics: ReconstructionDiagnostics,
}

/// Membership check, then the inverse map.
pub fn cmd_invert(cfg: &RunConfig, data: &ReflectionData) -> Result<(ReconstructionResult, InvertReport)> {
    cfg.validate()?;
    let membership = validate_membership(data).require()?;
    let (res, kernel) = invert(data, &cfg.glm_options())?;
    info!("inverse map done: v0 = {}", res.v0_readout);
    let report = invert_report(membership, &res, &kernel);
    Ok((res, report))
}

fn invert_report(membership: MembershipReport, res: &ReconstructionResult, kernel: &MarchenkoKernel) -> InvertReport {
    InvertReport {
        membership,
        v0_readout: res.v0_readout,
        kernel_max_imag: kernel.max_imag,
        kernel_sum_jump: kernel.sum_jump(),
        truncation_mass: kernel.truncation_mass,
        diagnostics: res.diagnostics.clone(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundTripReport {
    /// X-norm discrepancies of `w+`, `w-` and `v0`.
    pub w_plus: f64,
    pub w_minus: f64,
    pub v0: f64,
    pub v0_readout: f64,
    /// `sup |r2 - r1|` where `r2 = direct(invert(r1))`.
    pub r_sup: f64,
    /// X-norm of the inverse transform of `r2 - r1`.
    pub r_hat_norm: f64,
    pub max_glm_residual: f64,
    pub max_operator_norm: f64,
    pub truncation_mass: f64,
}

impl RoundTripReport {
    pub fn worst(&self) -> f64 {
        [self.w_plus, self.w_minus, self.v0, self.r_sup, self.r_hat_norm].into_iter().fold(0.0, f64::max)
    }
}

/// `invert(direct(q))` against `q`, and `direct(invert(r))` against `r`.
pub fn cmd_roundtrip(cfg: &RunConfig) -> Result<(ReconstructionResult, RoundTripReport)> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let padded = cfg.padded_grid()?;
    let triple = cfg.potential()?.triple(&grid)?;
    let first = direct_map(&triple, &padded)?;
    let (res, _) = cmd_invert(cfg, &first.reflection)?;
    roundtrip_report(&triple, &first, res, &padded)
}

pub fn roundtrip_report(
    triple: &RiccatiTriple,
    first: &DirectRun,
    res: ReconstructionResult,
    padded: &Grid,
) -> Result<(ReconstructionResult, RoundTripReport)> {
    let [w_plus, w_minus, v0] = res.triple.component_distances(triple)?;
    let second = direct_map(&res.triple, padded)?;
    let r1 = &first.reflection.r;
    let r2 = &second.reflection.r;
    let diff: Vec<Complex64> = r1.iter().zip(r2).map(|(a, b)| b - a).collect();
    let r_sup = diff.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let kg = first.reflection.kgrid;
    let back = inverse_raw(&diff, kg.step, KernelSign::Minus);
    let r_hat_norm = x_norm(&SampledFunction::new(kg.space_grid()?, back, Domain::Space)?);
    let d = &res.diagnostics;
    let report = RoundTripReport {
        w_plus,
        w_minus,
        v0,
        v0_readout: res.v0_readout,
        r_sup,
        r_hat_norm,
        max_glm_residual: d.max_residual,
        max_operator_norm: d.max_norm_estimate,
        truncation_mass: d.truncation_mass,
    };
    Ok((res, report))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvolutionReport {
    pub involution_twice: f64,
    pub modulus_change: f64,
    pub theta: f64,
}

pub fn cmd_involve(data: &ReflectionData) -> Result<(ReflectionData, InvolutionReport)> {
    validate_membership(data).require()?;
    let tr = reconstruct_t(data)?;
    let sharp = involution_with(data, &tr);
    let twice = involution_with(&sharp, &reconstruct_t(&sharp)?);
    let mut rep = InvolutionReport { involution_twice: 0.0, modulus_change: 0.0, theta: tr.theta };
    for i in 0..data.kgrid.count {
        rep.involution_twice = rep.involution_twice.max((twice.r[i] - data.r[i]).norm());
        rep.modulus_change = rep.modulus_change.max((sharp.r[i].norm() - data.r[i].norm()).abs());
    }
    Ok((sharp, rep))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub quantity: String,
    /// Sup differences between levels `h, h/2` and `h/2, h/4`.
    pub differences: [f64; 2],
    /// `log2` of their ratio; `None` once differences reach rounding level.
    pub order: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub steps: [f64; 3],
    pub rows: Vec<ConvergenceRow>,
}

/// Below this the differences are rounding noise and no order is reported.
pub const ROUNDING_LEVEL: f64 = 1e-12;

fn convergence_row(quantity: &str, levels: &[Vec<f64>]) -> ConvergenceRow {
    let sup = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let d = [sup(&levels[0], &levels[1]), sup(&levels[1], &levels[2])];
    let order = if d[1] > ROUNDING_LEVEL && d[0] > ROUNDING_LEVEL { Some((d[0] / d[1]).log2()) } else { None };
    ConvergenceRow { quantity: quantity.to_string(), differences: d, order }
}

pub const CONVERGE_K: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
pub const CONVERGE_X: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];

fn w_samples(res: &ReconstructionResult) -> Vec<f64> {
    CONVERGE_X
        .iter()
        .map(|&x| if x < 0.0 { res.w_full.eval(x) } else { res.triple.w_plus.eval(x) })
        .collect()
}

/// Reruns the pipeline at `dx`, `dx/2` and `dx/4`.
///
/// Potentials: `r+` at fixed `k` and, for the generic class, the readout
/// `w` at fixed `x`. Reflection input: the file is the finest level and the
/// coarser ones keep the central half and quarter of its band.
pub fn cmd_converge(cfg: &RunConfig) -> Result<ConvergenceTable> {
    cfg.validate()?;
    let is_csv = cfg.input.as_ref().and_then(|p| p.extension()).is_some_and(|e| e == "csv");
    if is_csv {
        let fine = cfg.reflection()?;
        let dx = fine.kgrid.space_grid()?.step;
        let steps = [4.0 * dx, 2.0 * dx, dx];
        let mut w = Vec::new();
        for factor in [4usize, 2, 1] {
            let d = sub_band(&fine, factor)?;
            let (res, _) = cmd_invert(cfg, &d)?;
            w.push(w_samples(&res));
        }
        return Ok(ConvergenceTable { steps, rows: vec![convergence_row("w at fixed x", &w)] });
    }
    let pot = cfg.potential()?;
    let dx = cfg.step()?;
    let steps = [dx, dx / 2.0, dx / 4.0];
    let mut r = Vec::new();
    let mut w = Vec::new();
    for h in steps {
        let c = RunConfig { grid_dx: Some(h), kmax: None, ..cfg.clone() };
        let triple = pot.triple(&c.grid()?)?;
        let run = direct_map(&triple, &c.padded_grid()?)?;
        let kg = run.reflection.kgrid;
        let mut row = Vec::new();
        for k in CONVERGE_K {
            let i = kg.nearest_index(k).ok_or_else(|| Error::InvalidGrid(format!("k = {k} outside the band")))?;
            row.extend([run.reflection.r[i].re, run.reflection.r[i].im]);
        }
        r.push(row);
        if run.scattering.class_tag == ClassTag::Generic {
            let (res, _) = cmd_invert(&c, &run.reflection)?;
            w.push(w_samples(&res));
        }
        info!("converge: level dx = {h} done");
    }
    let mut rows = vec![convergence_row("r+ at fixed k", &r)];
    if w.len() == 3 {
        rows.push(convergence_row("w at fixed x", &w));
    }
    Ok(ConvergenceTable { steps, rows })
}

/// Central `1/factor` of the band: same `dk`, `factor` times the step in `x`.
pub fn sub_band(d: &ReflectionData, factor: usize) -> Result<ReflectionData> {
    let n = d.kgrid.count;
    if factor == 0 || n % (2 * factor) != 0 {
        return Err(Error::InvalidGrid(format!("cannot take 1/{factor} of a band of {n} nodes")));
    }
    let m = n / factor;
    let lo = (n - m) / 2;
    let grid = Grid::new(d.kgrid.point(lo), d.kgrid.step, m)?;
    ReflectionData::from_parts(grid, d.r[lo..lo + m].to_vec(), d.r_tilde[lo..lo + m].to_vec(), d.class_tag)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PresetInfo {
    pub name: String,
    pub class: ClassTag,
    pub defaults: serde_json::Value,
}

pub fn cmd_presets() -> Result<Vec<PresetInfo>> {
    PRESET_NAMES
        .iter()
        .map(|name| {
            let p = Preset::by_name(name)?;
            let mut v = serde_json::to_value(&p).map_err(|e| Error::Parse(e.to_string()))?;
            let defaults = v.get_mut("params").map(serde_json::Value::take).unwrap_or_else(|| serde_json::json!({}));
            let class = if p.is_generic() { ClassTag::Generic } else { ClassTag::Exceptional };
            Ok(PresetInfo { name: name.to_string(), class, defaults })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_and_kmax_reconcile() {
        let c = RunConfig::default();
        assert_eq!(c.step().unwrap(), DEFAULT_DX);
        let c = RunConfig { kmax: Some(PI * 32.0), ..Default::default() };
        assert!((c.step().unwrap() - 1.0 / 64.0).abs() < 1e-15);
        let c = RunConfig { kmax: Some(25.0), grid_dx: Some(1.0 / 64.0), ..Default::default() };
        assert!(matches!(c.step(), Err(Error::InvalidGrid(_))));
        let c = RunConfig { tol: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn padded_grid_contains_the_base_grid() {
        let c = RunConfig { grid_l: 3.0, grid_dx: Some(0.25), pad: 1.5, ..Default::default() };
        let g = c.padded_grid().unwrap();
        assert_eq!(g.count, 36);
        assert!(g.origin_index().is_some());
    }

    #[test]
    fn hardy_points_depend_only_on_the_seed() {
        let g = Grid::centered(5.0, 1.0 / 16.0).unwrap();
        let a = hardy_sample_points(&g, 7);
        assert_eq!(a, hardy_sample_points(&g, 7));
        assert_ne!(a, hardy_sample_points(&g, 8));
        assert!(a.iter().all(|x| x.abs() <= 3.0));
    }

    #[test]
    fn sub_band_keeps_the_center() {
        let kg = Grid::centered(4.0, 0.125).unwrap().wavenumber_grid().unwrap();
        let r = kg.points().iter().map(|&k| 0.5 / Complex64::new(-0.5, 2.0 * k)).collect();
        let d = ReflectionData::new(kg, r, ClassTag::Generic).unwrap();
        let h = sub_band(&d, 2).unwrap();
        assert_eq!(h.kgrid.count, kg.count / 2);
        assert!(h.kgrid.is_half_integer());
        assert!((h.kgrid.space_grid().unwrap().step - 0.25).abs() < 1e-12);
    }

    #[test]
    fn presets_are_listed_with_defaults() {
        let list = cmd_presets().unwrap();
        assert_eq!(list.len(), PRESET_NAMES.len());
        assert_eq!(list[0].defaults["alpha"], 1.0);
    }
}
