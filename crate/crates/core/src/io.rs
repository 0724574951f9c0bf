//! Plain CSV and JSON formats for potentials, scattering data and reports.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cauchy_riesz::ReflectionData;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::riccati::{Preset, RiccatiTriple};
use crate::zs_akns::{ClassTag, ScatteringData};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Samples {
    pub x0: f64,
    pub dx: f64,
    pub w_plus: Vec<f64>,
    pub w_minus: Vec<f64>,
    pub v0: f64,
}

/// Potential file: either a named preset or explicit samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialFile {
    Preset {
        preset: String,
        #[serde(default)]
        params: serde_json::Value,
    },
    Samples { samples: Samples },
}

impl PotentialFile {
    pub fn from_triple(t: &RiccatiTriple) -> Self {
        PotentialFile::Samples {
            samples: Samples {
                x0: t.w_minus.grid.start,
                dx: t.step(),
                w_plus: t.w_plus.values.clone(),
                w_minus: t.w_minus.values.clone(),
                v0: t.v0,
            },
        }
    }

    /// The triple on `grid`: presets are sampled there, explicit samples are
    /// resampled onto it.
    pub fn triple(&self, grid: &Grid) -> Result<RiccatiTriple> {
        match self {
            PotentialFile::Preset { preset, params } => {
                let params = if params.is_null() { serde_json::json!({}) } else { params.clone() };
                Preset::from_params(preset, &params)?.triple(grid)
            }
            PotentialFile::Samples { samples: s } => {
                let t = RiccatiTriple::from_samples(s.dx, s.x0, s.w_plus.clone(), s.w_minus.clone(), s.v0)?;
                if (s.dx - grid.step).abs() > 1e-12 * grid.step
                    || t.w_minus.values.len() != grid.origin_index().map_or(0, |o| o + 1)
                    || t.w_plus.values.len() != grid.count - grid.origin_index().unwrap_or(0)
                {
                    t.resample(grid)
                } else {
                    Ok(t)
                }
            }
        }
    }

    /// Sample spacing of an explicit-sample file.
    pub fn native_step(&self) -> Option<f64> {
        match self {
            PotentialFile::Samples { samples } => Some(samples.dx),
            PotentialFile::Preset { .. } => None,
        }
    }
}

pub fn read_potential(path: &Path) -> Result<PotentialFile> {
    let text = std::fs::read_to_string(path)?;
    parse_potential(&text)
}

pub fn parse_potential(text: &str) -> Result<PotentialFile> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("potential file: {e}")))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Parse(e.to_string()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

pub fn write_scattering_csv(path: &Path, s: &ScatteringData) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# theta={} class={}", s.theta, s.class_tag.as_str())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "k", "re_a", "im_a", "re_b", "im_b", "re_r_plus", "im_r_plus", "re_r_minus", "im_r_minus", "re_t", "im_t",
    ])
    .map_err(csv_err)?;
    for i in 0..s.kgrid.count {
        let row = [
            s.kgrid.point(i),
            s.a[i].re,
            s.a[i].im,
            s.b[i].re,
            s.b[i].im,
            s.r_plus[i].re,
            s.r_plus[i].im,
            s.r_minus[i].re,
            s.r_minus[i].im,
            s.t[i].re,
            s.t[i].im,
        ];
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of a scattering CSV: `(theta, class, columns)`.
pub fn read_scattering_csv(path: &Path) -> Result<(f64, ClassTag, Vec<[f64; 11]>)> {
    let (meta, rows) = read_table::<11>(path, &["k", "re_a", "im_a", "re_b", "im_b", "re_r_plus", "im_r_plus", "re_r_minus", "im_r_minus", "re_t", "im_t"])?;
    let theta = meta_value(&meta, "theta")?
        .parse()
        .map_err(|_| Error::Parse("bad theta in metadata".into()))?;
    let class = ClassTag::parse(&meta_value(&meta, "class")?)?;
    Ok((theta, class, rows))
}

pub fn write_reflection_csv(path: &Path, d: &ReflectionData) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# class={}", d.class_tag.as_str())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "re_r", "im_r", "r_tilde"]).map_err(csv_err)?;
    for i in 0..d.kgrid.count {
        let row = [d.kgrid.point(i), d.r[i].re, d.r[i].im, d.r_tilde[i]];
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_reflection_csv(path: &Path) -> Result<ReflectionData> {
    let (meta, rows) = read_table::<4>(path, &["k", "re_r", "im_r", "r_tilde"])?;
    let class = ClassTag::parse(&meta_value(&meta, "class")?)?;
    if rows.len() < 2 {
        return Err(Error::Parse("reflection file needs at least two rows".into()));
    }
    let k0 = rows[0][0];
    let dk = (rows[rows.len() - 1][0] - k0) / (rows.len() - 1) as f64;
    let grid = Grid::new(k0, dk, rows.len())?;
    for (i, row) in rows.iter().enumerate() {
        if (row[0] - grid.point(i)).abs() > 1e-9 * dk.max(1.0) {
            return Err(Error::InvalidGrid(format!("k column is not uniform at row {}", i + 1)));
        }
    }
    if !grid.is_half_integer() {
        return Err(Error::InvalidGrid("k nodes must sit at half-integer multiples of dk".into()));
    }
    let r = rows.iter().map(|row| Complex64::new(row[1], row[2])).collect();
    let rt = rows.iter().map(|row| row[3]).collect();
    ReflectionData::from_parts(grid, r, rt, class)
}

fn meta_value(meta: &str, key: &str) -> Result<String> {
    meta.split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .find(|(k, _)| *k == key)
        .map(|(_, v)| v.to_string())
        .ok_or_else(|| Error::Parse(format!("metadata line lacks '{key}='")))
}

/// Reads a `# key=value` line followed by a CSV table with the given header.
fn read_table<const C: usize>(path: &Path, header: &[&str]) -> Result<(String, Vec<[f64; C]>)> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut meta = String::new();
    reader.read_line(&mut meta)?;
    let meta = meta
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse(format!("{}: first line must be a '#' metadata line", path.display())))?
        .to_string();
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let got: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if got != header {
        return Err(Error::Parse(format!("expected columns {header:?}, found {got:?}")));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let mut row = [0.0; C];
        for (j, f) in rec.iter().enumerate().take(C) {
            row[j] = f
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: '{f}' is not a number", line + 1)))?;
        }
        rows.push(row);
    }
    Ok((meta, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_csv_round_trips_exactly() {
        let kg = Grid::centered(4.0, 0.125).unwrap().wavenumber_grid().unwrap();
        let r = kg.points().iter().map(|&k| 0.7 / Complex64::new(-0.7, 2.0 * k)).collect();
        let d = ReflectionData::new(kg, r, ClassTag::Generic).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_reflection_csv(&p, &d).unwrap();
        let back = read_reflection_csv(&p).unwrap();
        assert_eq!(back.r, d.r);
        assert_eq!(back.r_tilde, d.r_tilde);
        assert_eq!(back.class_tag, ClassTag::Generic);
    }

    #[test]
    fn potential_file_forms() {
        let p = parse_potential(r#"{"preset": "delta", "params": {"alpha": 2.0}}"#).unwrap();
        let g = Grid::centered(2.0, 0.25).unwrap();
        assert_eq!(p.triple(&g).unwrap().v0, 2.0);
        let t = Preset::by_name("bump").unwrap().triple(&g).unwrap();
        let text = serde_json::to_string(&PotentialFile::from_triple(&t)).unwrap();
        let back = parse_potential(&text).unwrap().triple(&g).unwrap();
        assert_eq!(back, t);
        assert!(parse_potential(r#"{"preset": "nope"}"#).unwrap().triple(&g).is_err());
        assert!(parse_potential("[1, 2]").is_err());
    }

    #[test]
    fn malformed_reflection_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        std::fs::write(&p, "k,re_r,im_r,r_tilde\n0.5,0,0,1\n").unwrap();
        assert!(matches!(read_reflection_csv(&p), Err(Error::Parse(_))));
        std::fs::write(&p, "# class=generic\nk,re_r,im_r,r_tilde\n0.5,x,0,1\n1.5,0,0,1\n").unwrap();
        assert!(matches!(read_reflection_csv(&p), Err(Error::Parse(_))));
    }
}
