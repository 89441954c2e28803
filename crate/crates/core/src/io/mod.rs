//! Configuration, command dispatch and result export.
//!
//! Commands never touch the filesystem: they return their stdout text and
//! named output files, which the binary writes under `--out`.

mod config;
mod expr;

pub use config::*;
pub use expr::*;

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::bundle::{BundleError, DhData};
use crate::functionals::{l_functional, mabuchi_functional, stability_lambda, FunctionalError, PrescribedData};
use crate::operators::{abreu_apply, OperatorError};
use crate::polytope::{build_grid, validate_delzant, GridError, GridSpec, Polytope, PolytopeError};
use crate::potentials::GuilleminPotential;
use crate::solver::{build_path, continue_path, ContinuityPath, SolveTrace, SolverError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Validate,
    Curvature,
    Functional,
    Stability,
    Solve,
    ExportPlot,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Curvature => "curvature",
            Command::Functional => "functional",
            Command::Stability => "stability",
            Command::Solve => "solve",
            Command::ExportPlot => "export-plot",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOptions {
    /// Overrides `grid.h`.
    pub grid_h: Option<f64>,
    /// Seed for the random direction of the Jacobian check in `solve`.
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Artifacts {
    pub stdout: String,
    /// `(file name, contents)` in a fixed order.
    pub files: Vec<(String, String)>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("grid: {0}")]
    Grid(#[from] GridError),
    #[error("polytope: {0}")]
    Polytope(#[from] PolytopeError),
    #[error("bundle: {0}")]
    Bundle(#[from] BundleError),
    #[error("bundle: data is not admissible\n{0}")]
    Admissibility(String),
    #[error("operators: {0}")]
    Operator(#[from] OperatorError),
    #[error("functionals: {0}")]
    Functional(FunctionalError),
    #[error("functionals (stability LP): {0}")]
    Lp(FunctionalError),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
}

impl RunError {
    /// 2 config, 3 polytope, 4 admissibility, 5 operator, 6 functional,
    /// 7 stability LP, 8 solver. Code 1 is left for I/O failures in the binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Grid(_) => 2,
            RunError::Polytope(_) => 3,
            RunError::Bundle(_) | RunError::Admissibility(_) => 4,
            RunError::Operator(_) => 5,
            RunError::Functional(_) => 6,
            RunError::Lp(_) => 7,
            RunError::Solver(_) => 8,
        }
    }
}

impl From<FunctionalError> for RunError {
    fn from(e: FunctionalError) -> Self {
        match e {
            FunctionalError::LpInfeasible
            | FunctionalError::LpUnbounded
            | FunctionalError::LpIterationLimit(_)
            | FunctionalError::Certificate { .. } => RunError::Lp(e),
            e => RunError::Functional(e),
        }
    }
}

/// A failed command with whatever it produced before failing.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct RunFailure {
    pub error: RunError,
    pub partial: Artifacts,
}

impl<E: Into<RunError>> From<E> for RunFailure {
    fn from(e: E) -> Self {
        RunFailure {
            error: e.into(),
            partial: Artifacts::default(),
        }
    }
}

/// Parses `config_text` and runs `command` on it.
pub fn run_command(command: Command, config_text: &str, opts: &RunOptions) -> Result<Artifacts, RunFailure> {
    let mut config = parse_config(config_text)?;
    if let Some(h) = opts.grid_h {
        if !(h > 0.0 && h.is_finite()) {
            return Err(RunError::Config(ConfigError {
                kind: ConfigErrorKind::Domain,
                line: 0,
                column: 0,
                message: format!("--grid-h must be positive, got {h}"),
            })
            .into());
        }
        config = config.with_grid_h(h);
    }
    let problem = Problem::assemble(&config)?;
    match command {
        Command::Validate => Ok(problem.validate_report()),
        Command::Curvature => problem.curvature(),
        Command::Functional => problem.functional(),
        Command::Stability => problem.stability(),
        Command::Solve => problem.solve(opts.seed),
        Command::ExportPlot => problem.export_plot(),
    }
}

struct Problem<'a> {
    config: &'a ProblemConfig,
    poly: Polytope,
    dh: DhData,
    prescribed: PrescribedData,
    report: String,
}

impl<'a> Problem<'a> {
    fn assemble(config: &'a ProblemConfig) -> Result<Self, RunError> {
        let validation = validate_delzant(&config.polytope.facets)?;
        let poly = config.polytope()?;
        let dh = config.dh()?;
        let admissibility = dh.check_admissibility(&poly);
        let report = format!("{validation}\n{admissibility}\n");
        if !admissibility.passed() {
            return Err(RunError::Admissibility(report));
        }
        let prescribed = config.prescribed(dh.clone());
        Ok(Problem {
            config,
            poly,
            dh,
            prescribed,
            report,
        })
    }

    fn grid(&self) -> Result<Arc<GridSpec>, RunError> {
        let g = &self.config.grid;
        Ok(Arc::new(build_grid(&self.poly, g.h, g.h_min())?))
    }

    fn validate_report(&self) -> Artifacts {
        Artifacts {
            stdout: self.report.clone(),
            files: Vec::new(),
        }
    }

    fn curvature(&self) -> Result<Artifacts, RunFailure> {
        let grid = self.grid()?;
        let field = abreu_apply(&crate::potentials::SymplecticPotential::guillemin(&self.poly, grid.clone()), &self.dh)?;
        let mut csv = String::from("node,i,j,xi1,xi2,masked,value\n");
        for (k, n) in grid.nodes().iter().enumerate() {
            let _ = writeln!(
                csv,
                "{k},{},{},{:?},{:?},{},{:?}",
                n.i, n.j, n.xi[0], n.xi[1], field.masked[k] as u8, field.values[k]
            );
        }
        let values = field.unmasked_values();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(Artifacts {
            stdout: format!("unmasked nodes: {}\nmin: {lo:?}\nmax: {hi:?}\n", values.len()),
            files: vec![("curvature.csv".into(), csv)],
        })
    }

    fn functional(&self) -> Result<Artifacts, RunFailure> {
        #[derive(Serialize)]
        struct Report {
            l_value: f64,
            l_error: f64,
            mabuchi_value: f64,
            mabuchi_error: f64,
        }
        let v = GuilleminPotential::new(&self.poly);
        let q = self.config.quadrature;
        let l = l_functional(&self.prescribed, &self.poly, |x| v.closure_value(x), q)?;
        let f = mabuchi_functional(&self.prescribed, &self.poly, &v, q)?;
        let r = Report {
            l_value: l.value,
            l_error: l.error,
            mabuchi_value: f.value,
            mabuchi_error: f.error,
        };
        let json = serde_json::to_string_pretty(&r).expect("report serializes") + "\n";
        Ok(Artifacts {
            stdout: format!("L_A(v) = {:?}\nF_A(v) = {:?}\n", l.value, f.value),
            files: vec![("functional.json".into(), json)],
        })
    }

    fn stability(&self) -> Result<Artifacts, RunFailure> {
        let cert = stability_lambda(&self.prescribed, &self.poly, self.config.stability_size, &self.config.stability_options())?;
        let mut stdout = format!(
            "lambda_star = {:?}\nbinding constraints: {}\n",
            cert.lambda_star, cert.binding_constraints
        );
        if !cert.certified {
            let _ = writeln!(stdout, "warning: A does not annihilate affine functions (residual {:?})", cert.affine_residual);
        }
        Ok(Artifacts {
            stdout,
            files: vec![("certificate.json".into(), cert.to_json() + "\n")],
        })
    }

    fn solve(&self, seed: u64) -> Result<Artifacts, RunFailure> {
        let solver = self.config.solver_config();
        solver.validate()?;
        let grid = self.grid()?;
        let mut path = build_path(&self.poly, &self.dh, &self.prescribed, grid)?;
        let trace = match continue_path(&mut path, &solver) {
            Ok(t) => t,
            Err(SolverError::Stalled { t, dt, trace }) => {
                let partial = Artifacts {
                    stdout: format!("stalled at t = {t:?} with dt = {dt:?}\n"),
                    files: trace_files(&path, &trace),
                };
                return Err(RunFailure {
                    error: SolverError::Stalled { t, dt, trace }.into(),
                    partial,
                });
            }
            Err(e) => return Err(e.into()),
        };
        let check = jacobian_check(&path, &trace.psi, seed)?;
        let last = trace.steps.iter().rev().find(|s| s.accepted);
        let stdout = format!(
            "reached t = {:?} in {} steps\nfinal residual: {:?}\njacobian check relative error: {check:?}\n",
            trace.reached,
            trace.accepted_steps(),
            last.map_or(f64::NAN, |s| s.residual)
        );
        Ok(Artifacts {
            stdout,
            files: trace_files(&path, &trace),
        })
    }

    fn export_plot(&self) -> Result<Artifacts, RunFailure> {
        let grid = self.grid()?;
        let pot = crate::potentials::SymplecticPotential::guillemin(&self.poly, grid.clone());
        let mut nodes = String::from("node,i,j,xi1,xi2,masked,min_delta,nearest_facet\n");
        let mut potential = String::from("node,u\n");
        for (k, n) in grid.nodes().iter().enumerate() {
            let _ = writeln!(
                nodes,
                "{k},{},{},{:?},{:?},{},{:?},{}",
                n.i,
                n.j,
                n.xi[0],
                n.xi[1],
                grid.is_masked(k) as u8,
                n.min_delta(),
                n.nearest_facet
            );
            let _ = writeln!(potential, "{k},{:?}", pot.node_value(k));
        }
        let mut boundary = String::from("vertex,xi1,xi2,facet_out\n");
        for e in self.poly.boundary_cycle() {
            let v = &self.poly.vertices()[e.start];
            let _ = writeln!(boundary, "{},{:?},{:?},{}", e.start, v.point[0], v.point[1], e.facet);
        }
        Ok(Artifacts {
            stdout: format!("active nodes: {}\n", grid.len()),
            files: vec![
                ("nodes.csv".into(), nodes),
                ("potential.csv".into(), potential),
                ("boundary.csv".into(), boundary),
            ],
        })
    }
}

fn trace_files(path: &ContinuityPath, trace: &SolveTrace) -> Vec<(String, String)> {
    let mut csv = String::from("node,i,j,xi1,xi2,psi\n");
    for (k, (n, v)) in path.grid().nodes().iter().zip(&trace.psi).enumerate() {
        let _ = writeln!(csv, "{k},{},{},{:?},{:?},{v:?}", n.i, n.j, n.xi[0], n.xi[1]);
    }
    vec![("trace.jsonl".into(), trace.to_json_lines()), ("psi.csv".into(), csv)]
}

/// Relative error between the Jacobian applied to a random smooth direction
/// and a central difference of the operator along it.
pub fn jacobian_check(path: &ContinuityPath, psi: &[f64], seed: u64) -> Result<f64, SolverError> {
    let dir = smooth_direction(path, seed);
    let jac = path.jacobian(psi)?;
    let jd = &jac * nalgebra::DVector::from_column_slice(&dir);
    let eps = 1e-5;
    let shifted = |s: f64| {
        let mut p = psi.to_vec();
        for (&k, d) in path.unmasked().iter().zip(&dir) {
            p[k] += s * d;
        }
        path.operator(&p)
    };
    let (plus, minus) = (shifted(eps)?, shifted(-eps)?);
    let fd: Vec<f64> = plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
    let diff = fd.iter().zip(jd.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm = jd.norm().max(f64::MIN_POSITIVE);
    Ok(diff / norm)
}

/// A few low sine modes over the bounding box, with random amplitudes,
/// sampled at the unmasked nodes.
pub fn smooth_direction(path: &ContinuityPath, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = path.grid();
    let (lx, ly) = ((grid.nx - 1) as f64 * grid.h, (grid.ny - 1) as f64 * grid.h);
    let modes: Vec<(f64, f64, f64)> = (1..=3)
        .flat_map(|m| (1..=3).map(move |n| (m as f64, n as f64)))
        .map(|(m, n)| (m, n, rng.gen_range(-1.0..1.0) / (m * n)))
        .collect();
    path.unmasked()
        .iter()
        .map(|&k| {
            let xi = grid.nodes()[k].xi;
            let (s, t) = ((xi[0] - grid.origin[0]) / lx, (xi[1] - grid.origin[1]) / ly);
            modes
                .iter()
                .map(|(m, n, a)| a * (std::f64::consts::PI * m * s).sin() * (std::f64::consts::PI * n * t).sin())
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "[polytope]\nfacets = [[1, 0, 0], [0, 1, 0], [-1, 0, -1], [0, -1, -1]]\n[grid]\nh = 0.0625\n";

    #[test]
    fn validate_prints_both_reports() {
        let a = run_command(Command::Validate, SQUARE, &RunOptions::default()).unwrap();
        assert!(a.stdout.contains("delzant: valid"));
        assert!(a.stdout.contains("admissible: true"));
    }

    #[test]
    fn failure_classes_have_distinct_codes() {
        let not_delzant = "[polytope]\nfacets = [[1, 0, 0], [0, 1, 0], [-1, -2, -2]]\n";
        let e = run_command(Command::Validate, not_delzant, &RunOptions::default()).unwrap_err();
        assert_eq!(e.error.exit_code(), 3, "{e}");
        let inadmissible = format!("{SQUARE}[bundle]\nroots = [[1, 0]]\n");
        let e = run_command(Command::Validate, &inadmissible, &RunOptions::default()).unwrap_err();
        assert_eq!(e.error.exit_code(), 4, "{e}");
        let e = run_command(Command::Validate, "[grid]\nh = 1\n", &RunOptions::default()).unwrap_err();
        assert_eq!(e.error.exit_code(), 2);
    }

    #[test]
    fn solve_with_endpoint_target_is_one_step() {
        let a = run_command(Command::Solve, SQUARE, &RunOptions::default()).unwrap();
        let trace = &a.files[0].1;
        assert_eq!(trace.lines().filter(|l| l.contains("\"accepted\":true")).count(), 2, "{trace}");
        assert!(a.stdout.contains("in 1 steps"), "{}", a.stdout);
    }
}
