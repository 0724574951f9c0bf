use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use miura_core::io::{write_json, write_reflection_csv, write_scattering_csv, PotentialFile};
use miura_core::pipeline::{self, RunConfig};
use miura_core::{Error, Result};

/// Direct and inverse scattering for Miura potentials.
#[derive(Parser)]
#[command(name = "miura", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand)]
enum Command {
    /// Reflection and transmission coefficients of a potential.
    Direct,
    /// Reconstruct a Riccati triple from a reflection CSV.
    Invert,
    /// Direct map, inverse map and comparison with the input.
    Roundtrip,
    /// Apply the involution r -> r# to a reflection CSV.
    Involve,
    /// Observed convergence orders under step halving.
    Converge,
    /// List the built-in potentials and their default parameters.
    Presets,
}

#[derive(Args)]
struct Opts {
    /// Half width L of the output window [-L, L).
    #[arg(long, global = true, default_value_t = pipeline::DEFAULT_L)]
    grid_l: f64,
    /// Space step; defaults to 1/64 unless --kmax fixes it.
    #[arg(long, global = true)]
    grid_dx: Option<f64>,
    /// Band edge; the grid pairing sets dx = pi / (2 kmax).
    #[arg(long, global = true)]
    kmax: Option<f64>,
    /// Linear-solver tolerance of the GLM solves.
    #[arg(long, global = true, default_value_t = 1e-12)]
    tol: f64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed of the randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Potential JSON (direct, roundtrip, converge) or reflection CSV (invert, involve, converge).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Built-in potential, instead of --input.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Preset parameters as a JSON object.
    #[arg(long, global = true)]
    params: Option<String>,
    /// Distance past the origin over which each GLM problem is solved.
    #[arg(long, global = true, default_value_t = 5.0)]
    overlap: f64,
    /// Window widening factor of the direct map.
    #[arg(long, global = true, default_value_t = 2.0)]
    pad: f64,
}

impl Opts {
    fn config(&self) -> Result<RunConfig> {
        let params = match &self.params {
            Some(s) => Some(serde_json::from_str(s).map_err(|e| Error::Parse(format!("--params: {e}")))?),
            None => None,
        };
        Ok(RunConfig {
            grid_l: self.grid_l,
            grid_dx: self.grid_dx,
            kmax: self.kmax,
            tol: self.tol,
            input: self.input.clone(),
            preset: self.preset.clone(),
            params,
            out: self.out.clone(),
            jobs: self.jobs,
            seed: self.seed,
            overlap: self.overlap,
            pad: self.pad,
        })
    }
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.out)?;
    Ok(&cfg.out)
}

fn run(cmd: Command, cfg: &RunConfig) -> Result<()> {
    match cmd {
        Command::Presets => {
            for p in pipeline::cmd_presets()? {
                println!("{:<13} {:<12} {}", p.name, p.class.as_str(), p.defaults);
            }
        }
        Command::Direct => {
            let (run, report) = pipeline::cmd_direct(cfg)?;
            let dir = out_dir(cfg)?;
            write_scattering_csv(&dir.join("scattering.csv"), &run.scattering)?;
            write_reflection_csv(&dir.join("reflection.csv"), &run.reflection)?;
            write_json(&dir.join("direct_report.json"), &report)?;
            println!("class {} theta {}", report.class.as_str(), report.theta);
            report.membership.require()?;
        }
        Command::Invert => {
            let data = cfg.reflection()?;
            let (res, report) = pipeline::cmd_invert(cfg, &data)?;
            let dir = out_dir(cfg)?;
            write_json(&dir.join("potential.json"), &PotentialFile::from_triple(&res.triple))?;
            write_json(&dir.join("diagnostics.json"), &report)?;
            println!("v0 {} max residual {:.3e}", res.v0_readout, report.diagnostics.max_residual);
        }
        Command::Roundtrip => {
            let (res, report) = pipeline::cmd_roundtrip(cfg)?;
            let dir = out_dir(cfg)?;
            write_json(&dir.join("potential.json"), &PotentialFile::from_triple(&res.triple))?;
            write_json(&dir.join("roundtrip.json"), &report)?;
            println!(
                "w+ {:.3e} w- {:.3e} v0 {:.3e} r sup {:.3e} r X-hat {:.3e}",
                report.w_plus, report.w_minus, report.v0, report.r_sup, report.r_hat_norm
            );
        }
        Command::Involve => {
            let data = cfg.reflection()?;
            let (sharp, report) = pipeline::cmd_involve(&data)?;
            let dir = out_dir(cfg)?;
            write_reflection_csv(&dir.join("involved.csv"), &sharp)?;
            write_json(&dir.join("involution.json"), &report)?;
            println!("I(I(r)) - r: {:.3e}", report.involution_twice);
        }
        Command::Converge => {
            let table = pipeline::cmd_converge(cfg)?;
            write_json(&out_dir(cfg)?.join("convergence.json"), &table)?;
            println!("steps {:?}", table.steps);
            for row in &table.rows {
                let order = row.order.map_or("n/a".to_string(), |o| format!("{o:.3}"));
                println!("{:<14} {:.3e} {:.3e} order {order}", row.quantity, row.differences[0], row.differences[1]);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MIURA_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = cli.opts.config().and_then(|cfg| {
        cfg.validate()?;
        pipeline::with_jobs(cfg.jobs, || run(cli.command, &cfg))?
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
