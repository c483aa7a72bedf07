//! Command-line front end: `step`, `approx`, `solve`, `check` and `study`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bolza::{self, assemble, assemble_from_reference, Mode, Status};
use crate::error::{Error, Result};
use crate::implicit::{approximate_trajectory, implicit_step};
use crate::kkt::{self, KktReport, Multipliers};
use crate::linalg::Vector;
use crate::par;
use crate::problem::ProblemFile;
use crate::reference::{DiscreteTrajectory, ReferenceTrajectory};

#[derive(Parser, Debug)]
#[command(name = "rosl", version, about = "Implicit Euler discretization and optimality checks for differential inclusions")]
struct Cli {
    /// Seed for all randomized parts (multi-start, sampling)
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Leave the timestamp out of the reproducibility header
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One implicit Euler step from `x` at time `t`
    Step {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        h: f64,
        /// Target point; defaults to `x`
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        guess: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Implicit Euler approximation of a reference trajectory
    Approx {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Solves the discrete problem at `k`
    Solve {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value = "pk")]
        mode: Mode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Checks a solution file against the discrete optimality conditions
    Check {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        sol: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Solves over a sweep of `k` and tabulates the results
    Study {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
        k: Vec<usize>,
        #[arg(long, default_value = "pk")]
        mode: Mode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Reproducibility header written into every output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub version: String,
    pub seed: u64,
    pub inputs: Vec<InputHash>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

impl Header {
    fn new(seed: u64, inputs: &[&Path], timestamp: bool) -> Result<Self> {
        let inputs = inputs
            .iter()
            .map(|p| {
                let bytes = fs::read(p)?;
                Ok(InputHash {
                    path: p.display().to_string(),
                    sha256: hex::encode(Sha256::digest(&bytes)),
                })
            })
            .collect::<Result<_>>()?;
        let timestamp = timestamp.then(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
        Ok(Header {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            inputs,
            timestamp,
        })
    }

    /// `#` comment lines for CSV outputs.
    fn write_comments(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "# rosl {}", self.version)?;
        writeln!(out, "# seed {}", self.seed)?;
        for input in &self.inputs {
            writeln!(out, "# sha256 {} {}", input.sha256, input.path)?;
        }
        if let Some(ts) = self.timestamp {
            writeln!(out, "# timestamp {ts}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultiplierFile {
    pub lambda: Vec<f64>,
    pub p: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
}

/// Contents of the file written by `solve` and read by `check`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionFile {
    pub header: Header,
    pub mode: String,
    pub k: usize,
    pub h: f64,
    pub eta_k: f64,
    pub x: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub cost: f64,
    pub status: String,
    pub multipliers: MultiplierFile,
}

fn rows(vs: &[Vector]) -> Vec<Vec<f64>> {
    vs.iter().map(|v| v.as_slice().to_vec()).collect()
}

fn vectors(rows: &[Vec<f64>]) -> Vec<Vector> {
    rows.iter().map(|r| Vector::from_column_slice(r)).collect()
}

impl MultiplierFile {
    fn from_multipliers(m: &Multipliers) -> Self {
        MultiplierFile {
            lambda: m.lambda.clone(),
            p: rows(&m.p),
            theta: rows(&m.theta),
            mu: m.mu.clone(),
        }
    }

    fn to_multipliers(&self) -> Multipliers {
        Multipliers {
            lambda: self.lambda.clone(),
            p: vectors(&self.p),
            theta: vectors(&self.theta),
            mu: self.mu.clone(),
        }
    }
}

#[derive(Serialize)]
struct CheckOutput<'a> {
    header: &'a Header,
    feasible: bool,
    max_violation: f64,
    kkt: &'a KktReport,
    pass: bool,
}

/// Exit status for an error: 2 for bad input or configuration, 3 for
/// numerical failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::RootFinding { .. }
        | Error::NoConvergence { .. }
        | Error::StepFailed { .. }
        | Error::Infeasible
        | Error::PointNotInSet { .. }
        | Error::PointNotOnGraph { .. } => 3,
        _ => 2,
    }
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("ROSL_THREADS") {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| Error::Config(format!("ROSL_THREADS must be a positive integer, got {s:?}"))),
        Err(_) => Ok(None),
    }
}

/// Runs the CLI on `argv` (including the program name) and returns the exit
/// status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match threads_from_env() {
        Ok(threads) => {
            par::init_threads(threads);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    }
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn json_line(value: &impl Serialize) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let stamp = !cli.no_timestamp;
    match &cli.command {
        Command::Step {
            problem,
            x,
            t,
            h,
            guess,
            tol,
        } => {
            let header = Header::new(cli.seed, &[problem], stamp)?;
            let map = ProblemFile::load(problem)?.set_map()?;
            let x = Vector::from_column_slice(x);
            let guess = guess.as_deref().map(Vector::from_column_slice).unwrap_or_else(|| x.clone());
            let step = implicit_step(&map, &x, *t, *h, &guess, *tol)?;
            let out = serde_json::json!({
                "header": header,
                "y": step.y.as_slice(),
                "residual": step.residual,
                "iterations": step.iterations,
            });
            write_output(None, &json_line(&out)?)?;
            Ok(0)
        }
        Command::Approx {
            problem,
            reference,
            k,
            out,
            tol,
        } => {
            let header = Header::new(cli.seed, &[problem, reference], stamp)?;
            let spec = ProblemFile::load(problem)?.spec()?;
            let reference = ReferenceTrajectory::read_csv(reference)?;
            let (traj, report) = approximate_trajectory(&spec.dynamics, &reference, *k, *tol)?;
            let mut csv = Vec::new();
            header.write_comments(&mut csv)?;
            traj.write_csv(&mut csv)?;
            fs::write(out, csv)?;
            let summary = serde_json::json!({
                "header": header,
                "k": report.k,
                "h": report.h,
                "xi_k": report.xi_k,
                "zeta_k": report.zeta_k,
                "tau": report.tau,
                "eta_k": report.eta_k,
                "max_gap": report.max_gap,
                "gap_bound": report.gap_bound,
                "sup_err": report.sup_err,
                "w12_err": report.w12_err,
                "bound_ok": report.bound_ok,
            });
            write_output(None, &json_line(&summary)?)?;
            Ok(0)
        }
        Command::Solve {
            problem,
            reference,
            k,
            mode,
            out,
        } => {
            let header = Header::new(cli.seed, &[problem, reference], stamp)?;
            let file = ProblemFile::load(problem)?;
            let spec = file.spec()?;
            let reference = ReferenceTrajectory::read_csv(reference)?;
            let (dp, _) = assemble_from_reference(spec, *k, *mode, reference, 1e-10)?;
            let sol = bolza::solve(&dp, &file.solve_options(cli.seed))?;
            let doc = SolutionFile {
                header,
                mode: mode.to_string(),
                k: *k,
                h: dp.h(),
                eta_k: dp.eta_k,
                x: rows(&sol.traj.x),
                u: rows(&sol.controls),
                cost: sol.cost,
                status: sol.status.to_string(),
                multipliers: MultiplierFile::from_multipliers(&sol.multipliers),
            };
            write_output(out.as_deref(), &json_line(&doc)?)?;
            Ok(0)
        }
        Command::Check {
            problem,
            sol,
            reference,
            tol,
        } => {
            let header = Header::new(cli.seed, &[problem, sol, reference], stamp)?;
            let spec = ProblemFile::load(problem)?.spec()?;
            let doc: SolutionFile = serde_json::from_str(&fs::read_to_string(sol)?)
                .map_err(|e| Error::Config(format!("solution file: {e}")))?;
            let status: Status = doc.status.parse()?;
            let mode: Mode = doc.mode.parse()?;
            let reference = ReferenceTrajectory::read_csv(reference)?;
            let dp = assemble(spec, doc.k, mode, doc.eta_k, reference)?;
            if doc.x.len() != doc.k + 1 {
                return Err(Error::Invalid(format!(
                    "solution has {} nodes, expected {}",
                    doc.x.len(),
                    doc.k + 1
                )));
            }
            let traj = DiscreteTrajectory::new(dp.h(), vectors(&doc.x));
            let feas = dp.feasible(&traj, 1e-6);
            let report = kkt::check(&dp, &traj, &doc.multipliers.to_multipliers(), *tol)?;
            let pass = feas.pass && report.pass && status != Status::Infeasible;
            let out = CheckOutput {
                header: &header,
                feasible: feas.pass,
                max_violation: feas.max_violation(),
                kkt: &report,
                pass,
            };
            write_output(None, &json_line(&out)?)?;
            Ok(if pass { 0 } else { 1 })
        }
        Command::Study {
            problem,
            reference,
            k,
            mode,
            out,
        } => {
            let header = Header::new(cli.seed, &[problem, reference], stamp)?;
            let file = ProblemFile::load(problem)?;
            let spec = file.spec()?;
            let reference = ReferenceTrajectory::read_csv(reference)?;
            let results = bolza::study(&spec, &reference, k, *mode, &file.solve_options(cli.seed))?;
            for (row, kk) in results.iter().zip(k) {
                if let Err(e) = row {
                    eprintln!("warning: k = {kk} failed: {e}");
                }
            }
            let mut csv = Vec::new();
            header.write_comments(&mut csv)?;
            bolza::write_study_csv(&results, k, &mut csv)?;
            write_output(out.as_deref(), &csv)?;
            Ok(0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::StepsizeTooLarge { lh: 1.0, bound: 1.0 }), 2);
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Infeasible), 3);
        assert_eq!(exit_code(&Error::RootFinding { residual: 1.0 }), 3);
    }

    #[test]
    fn bad_arguments_exit_2() {
        assert_eq!(run(["rosl", "nonsense"]), 2);
        assert_eq!(run(["rosl", "step", "--problem", "/nonexistent.json", "--x", "0", "--t", "0", "--h", "0.1"]), 2);
        assert_eq!(run(["rosl", "--version"]), 0);
    }

    #[test]
    fn header_comments() {
        let h = Header {
            version: "0.1.0".into(),
            seed: 7,
            inputs: vec![InputHash {
                path: "p.json".into(),
                sha256: "ab".into(),
            }],
            timestamp: None,
        };
        let mut buf = Vec::new();
        h.write_comments(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# rosl 0.1.0\n# seed 7\n# sha256 ab p.json\n");
    }
}
