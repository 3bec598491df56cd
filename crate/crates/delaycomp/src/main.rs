use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use delaycomp::controller::DynamicController;
use delaycomp::densela::eigenvalues;
use delaycomp::error::Error;
use delaycomp::io::{load_json, save_json, write_trajectory_csv, RunSpec};
use delaycomp::lmi::{assemble_blocks, find_min_l, Certificate, FeasOptions, MinLReport};
use delaycomp::matrix::Matrix;
use delaycomp::sim::{lyapunov_trace, compare_metrics, simulate_closed_loop, simulate_ideal};

const EXAMPLE1: &str = include_str!("../../../specs/example1.json");
const EXAMPLE2: &str = include_str!("../../../specs/example2.json");
const EXAMPLE3: &str = include_str!("../../../specs/example3.json");

/// Exit codes: 0 success/feasible, 2 validation error, 3 certificate not
/// found, 4 numerical failure.
const EXIT_NOT_FOUND: u8 = 3;

#[derive(Parser)]
#[command(
    name = "delaycomp",
    version,
    about = "Finite-dimensional compensation of input delays: controller synthesis, LMI stability certification, and closed-loop simulation"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize the dynamic controller and write the controller document
    Synth {
        #[arg(long)]
        spec: PathBuf,
        /// Output directory (default: current directory)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the approximation order N
        #[arg(long)]
        n: Option<usize>,
    },
    /// Search for a stability certificate at l = 1..=l_max
    Certify {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long = "l-max")]
        l_max: Option<usize>,
    },
    /// Simulate the closed loop and the ideal predictor loop, export CSV
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        /// Override the integration step
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Certify every order N = 2..=n and report the minimal feasible l
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Largest order to sweep (default: the spec's N)
        #[arg(long)]
        n: Option<usize>,
        #[arg(long = "l-max")]
        l_max: Option<usize>,
    },
    /// Re-run a bundled literature example and check the published values
    Reproduce {
        /// Example number: 1, 2 or 3
        #[arg(long)]
        example: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Synth { spec, out, n } => cmd_synth(&spec, out.as_deref(), n),
        Cmd::Certify { spec, out, n, l_max } => cmd_certify(&spec, out.as_deref(), n, l_max),
        Cmd::Simulate { spec, out, n, dt } => cmd_simulate(&spec, out.as_deref(), n, dt),
        Cmd::Sweep { spec, out, n, l_max } => cmd_sweep(&spec, out.as_deref(), n, l_max),
        Cmd::Reproduce { example, out } => cmd_reproduce(example, out.as_deref()),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_of(&e))
        }
    }
}

fn exit_code_of(e: &Error) -> u8 {
    match e {
        Error::Singular { .. }
        | Error::NonHurwitz { .. }
        | Error::Convergence(_)
        | Error::Solver(_) => 4,
        _ => 2,
    }
}

fn out_dir(out: Option<&Path>) -> Result<PathBuf, Error> {
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn sweep_threads() -> usize {
    std::env::var("DELAYCOMP_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or(1)
}

fn cmd_synth(spec_path: &Path, out: Option<&Path>, n: Option<usize>) -> Result<u8, Error> {
    let spec = RunSpec::from_file(spec_path)?;
    let dir = out_dir(out)?;
    let (plant, k, ctrl) = spec.synthesize(n)?;
    let path = dir.join("controller.json");
    save_json(&path, &ctrl)?;
    println!(
        "synthesized order-{} controller for n = {} plant, delay D = {}",
        ctrl.cfg.n_basis,
        plant.state_dim(),
        plant.delay
    );
    println!("  K  = {:?}", k.as_slice());
    println!("  K1 = {:?}", ctrl.k1.as_slice());
    println!("  K2 = {:?}", ctrl.k2.as_slice());
    println!("  H  = {}", ctrl.h_ff);
    println!("wrote {}", path.display());
    Ok(0)
}

fn run_certify(
    spec: &RunSpec,
    n: Option<usize>,
    l_max: Option<usize>,
) -> Result<(DynamicController, MinLReport), Error> {
    let (plant, _, ctrl) = spec.synthesize(n)?;
    let l_max = l_max.unwrap_or(spec.l_max);
    let report = find_min_l(&plant, &ctrl, l_max, &FeasOptions::default(), sweep_threads())?;
    Ok((ctrl, report))
}

fn print_report(report: &MinLReport) {
    for e in &report.entries {
        match &e.error {
            Some(msg) => println!("  l = {}: solver error: {msg}", e.l),
            None => println!(
                "  l = {}: {} (margin {:.3e})",
                e.l,
                if e.feasible { "feasible" } else { "infeasible" },
                e.margin
            ),
        }
    }
}

fn cmd_certify(
    spec_path: &Path,
    out: Option<&Path>,
    n: Option<usize>,
    l_max: Option<usize>,
) -> Result<u8, Error> {
    let spec = RunSpec::from_file(spec_path)?;
    let dir = out_dir(out)?;
    let (_, report) = run_certify(&spec, n, l_max)?;
    print_report(&report);
    match (&report.first_feasible, &report.certificate) {
        (Some(l), Some(cert)) => {
            let path = dir.join("certificate.json");
            save_json(&path, cert)?;
            println!(
                "feasible at l = {l}: lambda_min(P) = {:.3e}, alpha = {:.3e}, lambda_max(Lambda) = {:.3e}",
                cert.margins.lambda_min_p, cert.alpha, cert.margins.lambda_max_lambda
            );
            println!("wrote {}", path.display());
            Ok(0)
        }
        _ => {
            println!("no certificate found up to l = {}", spec.l_max);
            Ok(EXIT_NOT_FOUND)
        }
    }
}

fn cmd_simulate(
    spec_path: &Path,
    out: Option<&Path>,
    n: Option<usize>,
    dt: Option<f64>,
) -> Result<u8, Error> {
    let spec = RunSpec::from_file(spec_path)?;
    let dir = out_dir(out)?;
    let (plant, k, ctrl) = spec.synthesize(n)?;
    let cfg = spec.sim_config(dt)?;
    let traj = simulate_closed_loop(&plant, &ctrl, &cfg)?;
    let ideal = simulate_ideal(&plant, &k, &cfg)?;

    // attach the Lyapunov trace when a matching certificate sits in the
    // output directory
    let cert_path = dir.join("certificate.json");
    let v = match load_json::<Certificate>(&cert_path) {
        Ok(cert) if cert.n == plant.state_dim() && cert.n_basis == ctrl.cfg.n_basis => {
            let blocks = assemble_blocks(&plant, &ctrl, cert.l)?;
            Some(lyapunov_trace(&traj, &cert, &blocks)?)
        }
        _ => None,
    };

    let path = dir.join("trajectory.csv");
    write_trajectory_csv(&path, &traj, Some(&ideal), v.as_deref())?;
    let ideal_path = dir.join("ideal.csv");
    write_trajectory_csv(&ideal_path, &ideal, Some(&ideal), None)?;

    if let Some(t) = traj.diverged_at {
        println!("closed loop DIVERGED at t = {t}");
    } else {
        let m = compare_metrics(&traj, &ideal)?;
        println!(
            "deviation from ideal: sup |y - y_ideal| = {:.6e}, integral squared = {:.6e}",
            m.sup_deviation, m.integral_squared
        );
    }
    println!("wrote {} and {}", path.display(), ideal_path.display());
    Ok(0)
}

#[derive(serde::Serialize)]
struct SweepRow {
    n_basis: usize,
    first_feasible: Option<usize>,
    entries: Vec<(usize, bool, f64)>,
}

fn cmd_sweep(
    spec_path: &Path,
    out: Option<&Path>,
    n: Option<usize>,
    l_max: Option<usize>,
) -> Result<u8, Error> {
    let spec = RunSpec::from_file(spec_path)?;
    let dir = out_dir(out)?;
    let n_max = n.unwrap_or(spec.n_basis).max(2);
    let mut rows = Vec::new();
    let mut all_feasible = true;
    for order in 2..=n_max {
        let (_, report) = run_certify(&spec, Some(order), l_max)?;
        match report.first_feasible {
            Some(l) => println!("N = {order}: minimal feasible l = {l}"),
            None => {
                println!("N = {order}: no certificate up to l = {}", l_max.unwrap_or(spec.l_max));
                all_feasible = false;
            }
        }
        rows.push(SweepRow {
            n_basis: order,
            first_feasible: report.first_feasible,
            entries: report
                .entries
                .iter()
                .map(|e| (e.l, e.feasible, e.margin))
                .collect(),
        });
    }
    let path = dir.join("sweep.json");
    save_json(&path, &rows)?;
    println!("wrote {}", path.display());
    Ok(if all_feasible { 0 } else { EXIT_NOT_FOUND })
}

struct Checker {
    failures: Vec<String>,
}

impl Checker {
    fn new() -> Self {
        Checker { failures: Vec::new() }
    }

    fn matrix(&mut self, name: &str, got: &Matrix, want: &Matrix, tol: f64) {
        let err = (got - want).max_abs();
        if err <= tol {
            println!("  [ok]   {name} matches (max abs error {err:.2e})");
        } else {
            println!("  [FAIL] {name}: max abs error {err:.2e} > {tol:.0e}");
            println!("         got  {:?}", got.as_slice());
            println!("         want {:?}", want.as_slice());
            self.failures.push(name.to_string());
        }
    }

    fn scalar(&mut self, name: &str, got: f64, want: f64, tol: f64) {
        let err = (got - want).abs();
        if err <= tol {
            println!("  [ok]   {name} = {got:.4} matches (error {err:.2e})");
        } else {
            println!("  [FAIL] {name}: got {got}, want {want} (error {err:.2e})");
            self.failures.push(name.to_string());
        }
    }

    fn table_row(&mut self, spec: &RunSpec, n: usize, l_listed: usize) -> Result<(), Error> {
        let (_, report) = run_certify(spec, Some(n), Some(l_listed))?;
        match report.first_feasible {
            Some(l) if l <= l_listed => {
                println!("  [ok]   N = {n}: certificate at l = {l} (listed {l_listed})");
            }
            _ => {
                println!("  [FAIL] N = {n}: no certificate up to the listed l = {l_listed}");
                self.failures.push(format!("table row N = {n}"));
            }
        }
        Ok(())
    }

    fn verdict(self) -> u8 {
        if self.failures.is_empty() {
            println!("all published values reproduced");
            0
        } else {
            println!("MISMATCHES: {}", self.failures.join(", "));
            2
        }
    }
}

fn cmd_reproduce(example: usize, out: Option<&Path>) -> Result<u8, Error> {
    let text = match example {
        1 => EXAMPLE1,
        2 => EXAMPLE2,
        3 => EXAMPLE3,
        _ => return Err(Error::Domain("example must be 1, 2 or 3".into())),
    };
    let spec = RunSpec::from_str(text)?;
    let dir = out_dir(out)?;
    let mut check = Checker::new();
    let tol = 1e-3;

    println!("example {example}: synthesizing at N = {}", spec.n_basis);
    let (plant, k, ctrl) = spec.synthesize(None)?;
    save_json(&dir.join("controller.json"), &ctrl)?;

    match example {
        1 => {
            check.matrix("K1", &ctrl.k1, &Matrix::row(&[-2.0, -1.4366]), tol);
            check.matrix("K2", &ctrl.k2, &Matrix::row(&[-5.4366]), tol);
            check.matrix(
                "A~d",
                &ctrl.a_tilde,
                &Matrix::from_rows(&[vec![3.0, 5.8731], vec![-9.0, -8.7463]]),
                tol,
            );
            check.matrix("B~d", &ctrl.b_tilde, &Matrix::column(&[10.8731, -21.7463]), tol);
            check.scalar("H", ctrl.h_ff, 1.0, tol);
            for (n, l) in [(2usize, 4usize), (3, 4), (10, 7)] {
                check.table_row(&spec, n, l)?;
            }
        }
        2 => {
            check.matrix("K1", &ctrl.k1, &Matrix::row(&[-2.4026, -1.6969]), tol);
            check.matrix("K2", &ctrl.k2, &Matrix::row(&[-47.0112, -3.1933, -13.2171]), tol);
            check.matrix(
                "A~d",
                &ctrl.a_tilde,
                &Matrix::from_rows(&[vec![7.6103, 12.7876], vec![-21.2206, -19.5753]]),
                tol,
            );
            check.matrix(
                "B~d",
                &ctrl.b_tilde,
                &Matrix::from_rows(&[
                    vec![188.0448, 12.7732, 52.8685],
                    vec![-376.0896, -25.5463, -105.7369],
                ]),
                tol,
            );
            check.scalar("H", ctrl.h_ff, 5.6125, tol);
            for (n, l) in [(2usize, 5usize), (3, 6), (4, 5)] {
                check.table_row(&spec, n, l)?;
            }
        }
        3 => {
            // pole placement is checked through the closed-loop spectrum
            let closed = &plant.a + &(&plant.b * &k);
            let mut eigs = eigenvalues(&closed)?;
            eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut want = [(-2.0, 0.0), (-0.5, -1.0), (-0.5, 1.0)];
            want.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (i, ((re, im), (wre, wim))) in eigs.iter().zip(want.iter()).enumerate() {
                check.scalar(&format!("eig {i} re"), *re, *wre, 1e-6);
                check.scalar(&format!("eig {i} im"), *im, *wim, 1e-6);
            }
            for (n, l) in [(4usize, 5usize), (5, 5), (6, 7)] {
                check.table_row(&spec, n, l)?;
            }
        }
        _ => unreachable!(),
    }

    let cfg = spec.sim_config(None)?;
    let traj = simulate_closed_loop(&plant, &ctrl, &cfg)?;
    let ideal = simulate_ideal(&plant, &k, &cfg)?;
    write_trajectory_csv(&dir.join("trajectory.csv"), &traj, Some(&ideal), None)?;
    match traj.diverged_at {
        Some(t) => println!("  closed loop diverged at t = {t}"),
        None => {
            let m = compare_metrics(&traj, &ideal)?;
            println!(
                "  deviation from ideal: sup = {:.6e}, integral squared = {:.6e}",
                m.sup_deviation, m.integral_squared
            );
        }
    }
    Ok(check.verdict())
}
