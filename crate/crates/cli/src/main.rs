use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use epifront::classifier::{classify_run, critical_mu, MuMap, Tolerance};
use epifront::dynamics::{default_t_max, dt_stab, resolve_dt, run_free_boundary, run_free_boundary_with_dt, NoHooks};
use epifront::io::{self, ParsedConfig, RunManifest};
use epifront::model::ModelConfig;
use epifront::spectral::{critical_length, principal_eigen, CriticalLengthOutcome};
use epifront::steady::{solve_bounded_steady, solve_halfline_steady};
use epifront::Error;

#[derive(Parser)]
#[command(name = "epifront", version, about = "Nonlocal epidemic model with a free boundary")]
struct Cli {
    /// Directory receiving outputs and the run manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate a configuration and print its scalar diagnostics.
    Check { config: PathBuf },
    /// Principal eigenvalue at one length or over a sweep.
    Eigen {
        config: PathBuf,
        #[command(flatten)]
        at: EigenAt,
    },
    /// Critical length by bisection.
    Critlen { config: PathBuf },
    /// Positive steady state on a bounded interval or the half line.
    Steady {
        config: PathBuf,
        #[command(flatten)]
        on: SteadyOn,
    },
    /// Free-boundary simulation.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        tmax: Option<f64>,
    },
    /// Spreading/vanishing verdict with its certificate.
    Classify {
        config: PathBuf,
        #[arg(long)]
        tmax: Option<f64>,
    },
    /// Threshold expansion rate along `mu2 = f(mu1)`.
    Critmu {
        config: PathBuf,
        /// `identity` or `linear:<k>`.
        #[arg(long, default_value = "identity")]
        f: String,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// Interpret `--tol` as an absolute width instead of relative.
        #[arg(long)]
        absolute: bool,
        #[arg(long)]
        tmax: Option<f64>,
    },
    /// Checks that the run of `config2` dominates the run of `config1`.
    Compare {
        config1: PathBuf,
        config2: PathBuf,
        #[arg(long)]
        tmax: Option<f64>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct EigenAt {
    #[arg(long)]
    l: Option<f64>,
    /// `l0:l1:n`, n evenly spaced lengths.
    #[arg(long)]
    sweep: Option<String>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct SteadyOn {
    #[arg(long)]
    l: Option<f64>,
    #[arg(long)]
    halfline: bool,
}

enum Failure {
    Usage(Error),
    Module(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ParseError(_) | Error::ValidationError(_) => Failure::Usage(e),
            _ => Failure::Module(e),
        }
    }
}

/// Collects outputs for the manifest.
struct Run<'a> {
    out: &'a Path,
    command: String,
    config_hash: String,
    dx: Option<f64>,
    dt: Option<f64>,
    outputs: Vec<String>,
    start: Instant,
}

impl<'a> Run<'a> {
    fn new(out: &'a Path, command: &str, hash: String) -> Self {
        Self { out, command: command.into(), config_hash: hash, dx: None, dt: None, outputs: Vec::new(), start: Instant::now() }
    }

    fn emit(&mut self, name: &str, contents: &str) -> Result<(), Failure> {
        io::write_output(self.out, name, contents)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn emit_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<String, Failure> {
        let s = io::to_json(value)?;
        self.emit(name, &s)?;
        Ok(s)
    }

    fn finish(self, status: &str) -> Result<(), Failure> {
        let manifest = RunManifest {
            config_hash: self.config_hash,
            command: self.command,
            dx: self.dx,
            dt: self.dt,
            outputs: self.outputs,
            wall_clock_s: self.start.elapsed().as_secs_f64(),
            status: status.into(),
        };
        io::write_output(self.out, "manifest.json", &io::to_json(&manifest)?)?;
        Ok(())
    }
}

fn load(path: &Path) -> Result<ParsedConfig, Failure> {
    io::parse_config(path).map_err(|e| match e {
        Error::Io(_) => Failure::Usage(e),
        e => e.into(),
    })
}

fn parse_sweep(s: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Usage(Error::ParseError(format!("sweep must be l0:l1:n, got {s}")));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let l0: f64 = parts[0].parse().map_err(|_| bad())?;
    let l1: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if n < 2 || !(l0 > 0.0 && l1 > l0) {
        return Err(bad());
    }
    Ok((0..n).map(|i| l0 + (l1 - l0) * i as f64 / (n - 1) as f64).collect())
}

fn parse_mu_map(s: &str) -> Result<MuMap, Failure> {
    match s.split_once(':') {
        None if s == "identity" => Ok(MuMap::Identity),
        Some(("linear", k)) => match k.parse::<f64>() {
            Ok(k) if k > 0.0 => Ok(MuMap::Linear { k }),
            _ => Err(Failure::Usage(Error::ParseError(format!("bad slope in {s}")))),
        },
        _ => Err(Failure::Usage(Error::ParseError(format!("unknown map {s}; expected identity or linear:<k>")))),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let out = cli.out.as_path();
    match cli.cmd {
        Cmd::Check { config } => {
            let p = load(&config)?;
            let mut r = Run::new(out, "check", io::config_hash(&p.config));
            let s = r.emit_json("check.json", &p)?;
            print!("{s}");
            r.finish("ok")
        }
        Cmd::Eigen { config, at } => {
            let c = load(&config)?.config;
            let mut r = Run::new(out, "eigen", io::config_hash(&c));
            r.dx = Some(c.dx());
            let ls = match (at.l, at.sweep) {
                (Some(l), _) => vec![l],
                (None, Some(s)) => parse_sweep(&s)?,
                (None, None) => unreachable!("clap enforces the group"),
            };
            let rows = ls.par_iter().map(|&l| principal_eigen(&c, l)).collect::<Result<Vec<_>, _>>()?;
            r.emit("eigen.csv", &io::eigen_csv(&rows))?;
            r.finish("ok")
        }
        Cmd::Critlen { config } => {
            let c = load(&config)?.config;
            let mut r = Run::new(out, "critlen", io::config_hash(&c));
            r.dx = Some(c.dx());
            let outcome = critical_length(&c)?;
            let s = r.emit_json("critlen.json", &outcome)?;
            if let CriticalLengthOutcome::Found(cl) = &outcome {
                r.emit("critlen_trace.csv", &io::critlen_trace_csv(cl))?;
            }
            print!("{s}");
            r.finish("ok")
        }
        Cmd::Steady { config, on } => {
            let c = load(&config)?.config;
            let mut r = Run::new(out, "steady", io::config_hash(&c));
            r.dx = Some(c.dx());
            let s = if on.halfline { solve_halfline_steady(&c, c.halfline_trunc())? } else { solve_bounded_steady(&c, on.l.unwrap())? };
            r.emit("steady.csv", &io::profile_csv(&s))?;
            let summary = serde_json::json!({
                "domain": s.domain,
                "residual": s.residual,
                "iterations": s.iterations,
                "bracket_gap": s.bracket_gap,
            });
            r.emit_json("steady.json", &summary)?;
            r.finish("ok")
        }
        Cmd::Simulate { config, tmax } => {
            let c = load(&config)?.config;
            let mut r = Run::new(out, "simulate", io::config_hash(&c));
            let t_max = tmax.unwrap_or_else(|| default_t_max(&c));
            let ell = critical_length(&c)?;
            let tr = run_free_boundary(&c, t_max, &mut NoHooks)?;
            let (class, _) = classify_run(&c, t_max, Some(tr.dt), &ell)?;
            r.dx = Some(tr.dx);
            r.dt = Some(tr.dt);
            r.emit("front.csv", &io::front_csv(&tr))?;
            r.emit("snapshots.csv", &io::snapshots_csv(&tr))?;
            let summary = serde_json::json!({
                "status": tr.status,
                "t_max": t_max,
                "h_final": tr.final_state.h,
                "t_final": tr.final_state.t,
                "classification": class,
            });
            let s = r.emit_json("simulate.json", &summary)?;
            print!("{s}");
            r.finish(&format!("{:?}", tr.status))
        }
        Cmd::Classify { config, tmax } => {
            let c = load(&config)?.config;
            let mut r = Run::new(out, "classify", io::config_hash(&c));
            let t_max = tmax.unwrap_or_else(|| default_t_max(&c));
            let ell = critical_length(&c)?;
            let (class, _) = classify_run(&c, t_max, None, &ell)?;
            r.dx = Some(c.dx());
            r.dt = class.diagnostics.dt;
            let s = r.emit_json("classify.json", &class)?;
            print!("{s}");
            r.finish(&format!("{:?}", class.verdict))
        }
        Cmd::Critmu { config, f, tol, absolute, tmax } => {
            let c = load(&config)?.config;
            let map = parse_mu_map(&f)?;
            if !(tol > 0.0) {
                return Err(Failure::Usage(Error::ParseError(format!("tolerance must be positive, got {tol}"))));
            }
            let tol = if absolute { Tolerance::Absolute(tol) } else { Tolerance::Relative(tol) };
            let mut r = Run::new(out, "critmu", io::config_hash(&c));
            let res = critical_mu(&c, map, tol, tmax)?;
            r.dx = Some(c.dx());
            r.dt = Some(res.dt);
            r.emit("critmu_probes.csv", &io::probes_csv(&res.probes))?;
            let summary = serde_json::json!({
                "mu_lower": res.mu_lower,
                "mu_upper": res.mu_upper,
                "verdict_lower": res.verdict_lower,
                "verdict_upper": res.verdict_upper,
                "map": map,
                "tolerance": tol,
                "dt": res.dt,
                "t_max": res.t_max,
            });
            let s = r.emit_json("critmu.json", &summary)?;
            print!("{s}");
            r.finish("ok")
        }
        Cmd::Compare { config1, config2, tmax } => {
            let c1 = load(&config1)?.config;
            let c2 = load(&config2)?.config;
            let hash = format!("{}+{}", io::config_hash(&c1), io::config_hash(&c2));
            let mut r = Run::new(out, "compare", hash);
            let dt = common_dt(&c1, &c2)?;
            let t_max = tmax.unwrap_or_else(|| default_t_max(&c1));
            let t1 = run_free_boundary_with_dt(&c1, t_max, dt, &mut NoHooks)?;
            let t2 = run_free_boundary_with_dt(&c2, t_max, dt, &mut NoHooks)?;
            let rep = epifront::dynamics::compare_runs(&t1, &t2)?;
            r.dx = Some(t1.dx);
            r.dt = Some(dt);
            let s = r.emit_json("compare.json", &rep)?;
            print!("{s}");
            r.finish(if rep.ordered { "ordered" } else { "violated" })
        }
    }
}

/// A step admissible for both runs.
fn common_dt(c1: &ModelConfig, c2: &ModelConfig) -> Result<f64, Failure> {
    let (a, b) = (resolve_dt(c1)?, resolve_dt(c2)?);
    match (c1.numerics.dt, c2.numerics.dt) {
        (Some(x), Some(y)) if x != y => Err(Failure::Usage(Error::ValidationError(format!("configured steps differ: {x} vs {y}")))),
        (Some(x), _) | (_, Some(x)) => {
            let stab = dt_stab(c1).min(dt_stab(c2));
            if x > stab {
                return Err(Failure::Module(Error::StabilityViolation { dt: x, dt_stab: stab }));
            }
            Ok(x)
        }
        (None, None) => Ok(a.min(b)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, e) = match f {
                Failure::Usage(e) => (2, e),
                Failure::Module(e) => (1, e),
            };
            let msg = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            println!("{msg}");
            ExitCode::from(code)
        }
    }
}
