//! Continuity-method solver for `S_D(v + ψ) = A_t`, `A_t = t A₁ + (1 − t) A₀`.
//!
//! The unknowns are the values of `ψ` at the unmasked grid nodes. Values on
//! the masked ring stay at their initial values and the rest of the bounding
//! box follows by the grid's linear extrapolation, which removes the affine
//! null directions of the operator. The path parameters `λ_t` appearing in
//! the stability bounds are not used numerically.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bundle::DhData;
use crate::functionals::PrescribedData;
use crate::operators::{diagnostics, AbreuStencil, OperatorError, Range};
use crate::polytope::{GridSpec, Polytope};
use crate::potentials::{NodalHessian, PotentialError, SymplecticPotential};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("target field has {got} values, expected {expected}")]
    TargetSize { got: usize, expected: usize },
    #[error("Newton failed at t = {t}: {failure}")]
    Newton { t: f64, failure: Box<NewtonFailure> },
    #[error("continuation stalled at t = {t} with Δt = {dt:e} below the minimum")]
    Stalled { t: f64, dt: f64, trace: Box<SolveTrace> },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonConfig {
    pub tol_residual: f64,
    pub max_iters: usize,
    /// Maximum number of step halvings per iteration.
    pub max_halvings: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol_residual: 1e-8,
            max_iters: 20,
            max_halvings: 12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathConfig {
    pub dt_init: f64,
    pub dt_min: f64,
    pub growth: f64,
    pub shrink: f64,
    /// Steps converging within this many iterations grow `Δt`.
    pub fast_iters: usize,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            dt_init: 0.1,
            dt_min: 1e-4,
            growth: 1.5,
            shrink: 0.5,
            fast_iters: 3,
        }
    }
}

/// Warning thresholds, as multiples of the diagnostics at `t = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonitorConfig {
    pub oscillation_factor: f64,
    pub h_proxy_factor: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            oscillation_factor: 10.0,
            h_proxy_factor: 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub h: f64,
    pub h_min: f64,
    pub newton: NewtonConfig,
    pub path: PathConfig,
    pub monitors: MonitorConfig,
}

impl SolverConfig {
    /// Defaults for grid spacing `h`, with `h_min = 4h`.
    pub fn new(h: f64) -> Self {
        SolverConfig {
            h,
            h_min: 4.0 * h,
            newton: NewtonConfig::default(),
            path: PathConfig::default(),
            monitors: MonitorConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = [
            ("h", self.h),
            ("h_min", self.h_min),
            ("tol_residual", self.newton.tol_residual),
            ("dt_init", self.path.dt_init),
            ("dt_min", self.path.dt_min),
            ("oscillation_factor", self.monitors.oscillation_factor),
            ("h_proxy_factor", self.monitors.h_proxy_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SolverError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.path.dt_min > self.path.dt_init {
            return Err(SolverError::Config(format!(
                "dt_min = {} exceeds dt_init = {}",
                self.path.dt_min, self.path.dt_init
            )));
        }
        if !(self.path.growth >= 1.0) || !(self.path.shrink > 0.0 && self.path.shrink < 1.0) {
            return Err(SolverError::Config("growth must be >= 1 and shrink in (0, 1)".into()));
        }
        if self.newton.max_iters == 0 {
            return Err(SolverError::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Endpoints of the path on the unmasked nodes, with the discrete operator.
#[derive(Clone, Debug)]
pub struct ContinuityPath {
    potential: SymplecticPotential,
    stencil: AbreuStencil,
    unmasked: Vec<usize>,
    start: Vec<f64>,
    target: Vec<f64>,
    /// Accepted values of `t`, strictly increasing from 0.
    pub schedule: Vec<f64>,
}

/// `A₀ = S_D(v)` from the discrete operator and `A₁` from `target`, where the
/// endpoint `A₀` seen by `target` is the discrete field.
pub fn build_path(poly: &Polytope, dh: &DhData, target: &PrescribedData, grid: Arc<GridSpec>) -> Result<ContinuityPath, SolverError> {
    let potential = SymplecticPotential::guillemin(poly, grid);
    let stencil = AbreuStencil::new(&potential, dh)?;
    let unmasked: Vec<usize> = stencil.unmasked_nodes().collect();
    let start = stencil.apply(&NodalHessian::zeros(potential.grid().box_len()))?;
    let nodes = potential.grid().nodes();
    let target: Vec<f64> = unmasked
        .iter()
        .zip(&start)
        .map(|(&k, &a0)| target.value_given_endpoint(nodes[k].xi, a0))
        .collect();
    Ok(ContinuityPath {
        potential,
        stencil,
        unmasked,
        start,
        target,
        schedule: vec![0.0],
    })
}

impl ContinuityPath {
    /// Same path with `A₁` given directly on the unmasked nodes.
    pub fn with_target(&self, target: Vec<f64>) -> Result<Self, SolverError> {
        if target.len() != self.unmasked.len() {
            return Err(SolverError::TargetSize {
                got: target.len(),
                expected: self.unmasked.len(),
            });
        }
        Ok(ContinuityPath {
            target,
            schedule: vec![0.0],
            ..self.clone()
        })
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        self.potential.grid()
    }

    /// `u = v` on the path's grid.
    pub fn guillemin(&self) -> &SymplecticPotential {
        &self.potential
    }

    pub fn unmasked(&self) -> &[usize] {
        &self.unmasked
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    /// `A_t` on the unmasked nodes.
    pub fn field_at(&self, t: f64) -> Vec<f64> {
        self.start.iter().zip(&self.target).map(|(a0, a1)| t * a1 + (1.0 - t) * a0).collect()
    }

    /// `u = v + ψ` for `ψ` given on the active nodes.
    pub fn potential_for(&self, psi: &[f64]) -> Result<SymplecticPotential, SolverError> {
        Ok(self.potential.with_active_psi(psi)?)
    }

    fn box_values(&self, psi: &[f64], out: &mut [f64]) {
        self.grid().extend_to_box(psi, out);
    }

    /// `S_D(v + ψ)` on the unmasked nodes.
    pub fn operator(&self, psi: &[f64]) -> Result<Vec<f64>, SolverError> {
        let grid = self.grid();
        let mut values = vec![0.0; grid.box_len()];
        self.box_values(psi, &mut values);
        let mut hess = NodalHessian::zeros(grid.box_len());
        self.potential.spline().nodal_hessian(&values, &mut hess);
        Ok(self.stencil.apply(&hess)?)
    }

    /// `R(ψ) = S_D(v + ψ) − A_t` on the unmasked nodes.
    pub fn residual(&self, psi: &[f64], t: f64) -> Result<Vec<f64>, SolverError> {
        let mut r = self.operator(psi)?;
        for (r, a) in r.iter_mut().zip(self.field_at(t)) {
            *r -= a;
        }
        Ok(r)
    }

    /// Forward-difference Jacobian of `R` with respect to the unmasked values of `ψ`.
    pub fn jacobian(&self, psi: &[f64]) -> Result<DMatrix<f64>, SolverError> {
        let base = self.operator(psi)?;
        let grid = self.grid();
        let n = self.unmasked.len();
        let eta = f64::EPSILON.sqrt() * grid.h * grid.h;
        let mut box_base = vec![0.0; grid.box_len()];
        self.box_values(psi, &mut box_base);
        let spline = self.potential.spline();
        let columns: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map_init(
                || (box_base.clone(), NodalHessian::zeros(grid.box_len())),
                |(values, hess), j| {
                    let node = &grid.nodes()[self.unmasked[j]];
                    let f = grid.flat(node.i, node.j);
                    values[f] = box_base[f] + eta;
                    grid.apply_fill(values);
                    spline.nodal_hessian(values, hess);
                    values[f] = box_base[f];
                    let r = self.stencil.apply(hess)?;
                    Ok(r.iter().zip(&base).map(|(a, b)| (a - b) / eta).collect())
                },
            )
            .collect::<Result<_, OperatorError>>()?;
        Ok(DMatrix::from_fn(n, n, |i, j| columns[j][i]))
    }

    fn with_unknowns(&self, psi: &[f64], step: &[f64], scale: f64) -> Vec<f64> {
        let mut out = psi.to_vec();
        for (&k, d) in self.unmasked.iter().zip(step) {
            out[k] += scale * d;
        }
        out
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NewtonFailureKind {
    /// Every damped step left the convex cone or failed to reduce the residual.
    ConvexityLost,
    MaxIterations,
    SingularJacobian,
    /// The initial iterate is not convex at some node.
    NonConvexStart,
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("{kind:?} after {} iterations, residual history {residual_history:?}", residual_history.len().saturating_sub(1))]
pub struct NewtonFailure {
    pub kind: NewtonFailureKind,
    pub last_psi: Vec<f64>,
    pub residual_history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonOutcome {
    /// `ψ` on the active nodes.
    pub psi: Vec<f64>,
    pub iterations: usize,
    /// `‖R‖_∞` before each iteration and after the last.
    pub residual_history: Vec<f64>,
}

impl NewtonOutcome {
    pub fn residual(&self) -> f64 {
        *self.residual_history.last().expect("history is nonempty")
    }
}

/// Damped Newton iteration for `R(ψ) = 0` at fixed `t`, starting from
/// `psi_init` on the active nodes.
pub fn newton_solve(path: &ContinuityPath, t: f64, psi_init: &[f64], config: &NewtonConfig) -> Result<NewtonOutcome, NewtonFailure> {
    let fail = |kind, psi: &[f64], history: &[f64]| NewtonFailure {
        kind,
        last_psi: psi.to_vec(),
        residual_history: history.to_vec(),
    };
    let mut psi = psi_init.to_vec();
    let Ok(mut r) = path.residual(&psi, t) else {
        return Err(fail(NewtonFailureKind::NonConvexStart, &psi, &[]));
    };
    let mut norm = max_norm(&r);
    let mut history = vec![norm];
    for iter in 0..config.max_iters {
        if norm <= config.tol_residual {
            return Ok(NewtonOutcome {
                psi,
                iterations: iter,
                residual_history: history,
            });
        }
        let jac = match path.jacobian(&psi) {
            Ok(j) => j,
            Err(_) => return Err(fail(NewtonFailureKind::ConvexityLost, &psi, &history)),
        };
        let rhs = DVector::from_iterator(r.len(), r.iter().map(|v| -v));
        let Some(step) = jac.lu().solve(&rhs) else {
            return Err(fail(NewtonFailureKind::SingularJacobian, &psi, &history));
        };
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=config.max_halvings {
            let trial = path.with_unknowns(&psi, step.as_slice(), scale);
            if let Ok(rt) = path.residual(&trial, t) {
                let nt = max_norm(&rt);
                if nt < (1.0 - 1e-4 * scale) * norm {
                    accepted = Some((trial, rt, nt));
                    break;
                }
            }
            scale *= 0.5;
        }
        let Some((trial, rt, nt)) = accepted else {
            return Err(fail(NewtonFailureKind::ConvexityLost, &psi, &history));
        };
        psi = trial;
        r = rt;
        norm = nt;
        history.push(norm);
    }
    if norm <= config.tol_residual {
        Ok(NewtonOutcome {
            psi,
            iterations: config.max_iters,
            residual_history: history,
        })
    } else {
        Err(fail(NewtonFailureKind::MaxIterations, &psi, &history))
    }
}

/// Diagnostics recorded after an accepted path step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepDiagnostics {
    /// `max u − min u` over active nodes.
    pub oscillation: f64,
    pub h_proxy: Range,
    /// Per facet, `min δ_k det Hess u` near that facet.
    pub boundary_det: Vec<Option<f64>>,
}

/// One attempted step of the continuation, accepted or not.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathStep {
    pub t: f64,
    pub dt: f64,
    pub accepted: bool,
    pub iterations: usize,
    pub residual: f64,
    pub diagnostics: Option<StepDiagnostics>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveTrace {
    pub steps: Vec<PathStep>,
    /// Last accepted `t`.
    pub reached: f64,
    /// `ψ` on the active nodes at `reached`.
    pub psi: Vec<f64>,
    /// `[c, g₁, g₂]` of the affine function making `u(p_o) = 0` and `∇u(p_o) = 0`.
    pub normalization: [f64; 3],
}

impl SolveTrace {
    pub fn accepted_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.accepted && s.t > 0.0).count()
    }

    /// One JSON object per line, one line per attempted step.
    pub fn to_json_lines(&self) -> String {
        self.steps
            .iter()
            .map(|s| serde_json::to_string(s).expect("steps serialize") + "\n")
            .collect()
    }
}

fn step_diagnostics(path: &ContinuityPath, psi: &[f64]) -> Result<StepDiagnostics, SolverError> {
    let d = diagnostics(&path.potential_for(psi)?)?;
    Ok(StepDiagnostics {
        oscillation: d.oscillation,
        h_proxy: d.h_proxy,
        boundary_det: d.facet_det_bounds,
    })
}

fn monitor_warnings(reference: &StepDiagnostics, now: &StepDiagnostics, m: &MonitorConfig) -> Vec<String> {
    let mut w = Vec::new();
    if now.oscillation > m.oscillation_factor * reference.oscillation {
        w.push(format!("oscillation {:?} exceeds cap {:?}", now.oscillation, m.oscillation_factor * reference.oscillation));
    }
    let (lo, hi) = (reference.h_proxy.min / m.h_proxy_factor, reference.h_proxy.max * m.h_proxy_factor);
    if now.h_proxy.min < lo || now.h_proxy.max > hi {
        w.push(format!("H-proxy range [{:?}, {:?}] leaves [{lo:?}, {hi:?}]", now.h_proxy.min, now.h_proxy.max));
    }
    for (k, (r, n)) in reference.boundary_det.iter().zip(&now.boundary_det).enumerate() {
        if let (Some(r), Some(n)) = (r, n) {
            if *n < r / m.oscillation_factor {
                w.push(format!("boundary determinant proxy on facet {k} fell to {n:?}"));
            }
        }
    }
    w
}

fn normalization(path: &ContinuityPath, psi: &[f64]) -> Result<[f64; 3], SolverError> {
    let u = path.potential_for(psi)?;
    let p = u.polytope().base_point();
    let a = u.normalized_at(p)?.affine();
    Ok([a.constant, a.linear[0], a.linear[1]])
}

/// Marches `t` from 0 to 1 with adaptive steps and a secant predictor.
pub fn continue_path(path: &mut ContinuityPath, config: &SolverConfig) -> Result<SolveTrace, SolverError> {
    config.validate()?;
    let pc = &config.path;
    let n_active = path.grid().len();
    let mut psi = vec![0.0; n_active];
    let mut prev: Option<(f64, Vec<f64>)> = None;
    let mut t = 0.0;
    let reference = step_diagnostics(path, &psi)?;
    let r0 = max_norm(&path.residual(&psi, 0.0)?);
    let mut steps = vec![PathStep {
        t: 0.0,
        dt: 0.0,
        accepted: true,
        iterations: 0,
        residual: r0,
        diagnostics: Some(reference.clone()),
        warnings: Vec::new(),
    }];
    path.schedule = vec![0.0];
    let constant = max_norm(&path.start.iter().zip(&path.target).map(|(a, b)| a - b).collect::<Vec<_>>()) <= config.newton.tol_residual;
    let mut dt = if constant { 1.0 } else { pc.dt_init };
    while t < 1.0 {
        let t_next = (t + dt).min(1.0);
        let guess = match &prev {
            Some((tp, pp)) => {
                let s = (t_next - t) / (t - tp);
                psi.iter().zip(pp).map(|(a, b)| a + s * (a - b)).collect()
            }
            None => psi.clone(),
        };
        let attempt = newton_solve(path, t_next, &guess, &config.newton).or_else(|e| {
            if prev.is_some() {
                newton_solve(path, t_next, &psi, &config.newton)
            } else {
                Err(e)
            }
        });
        match attempt {
            Ok(out) => {
                let diag = step_diagnostics(path, &out.psi)?;
                steps.push(PathStep {
                    t: t_next,
                    dt: t_next - t,
                    accepted: true,
                    iterations: out.iterations,
                    residual: out.residual(),
                    warnings: monitor_warnings(&reference, &diag, &config.monitors),
                    diagnostics: Some(diag),
                });
                prev = Some((t, std::mem::replace(&mut psi, out.psi.clone())));
                t = t_next;
                path.schedule.push(t);
                if out.iterations <= pc.fast_iters {
                    dt *= pc.growth;
                }
            }
            Err(failure) => {
                steps.push(PathStep {
                    t: t_next,
                    dt: t_next - t,
                    accepted: false,
                    iterations: failure.residual_history.len().saturating_sub(1),
                    residual: failure.residual_history.last().copied().unwrap_or(f64::NAN),
                    diagnostics: None,
                    warnings: vec![format!("{:?}", failure.kind)],
                });
                dt *= pc.shrink;
                if dt < pc.dt_min {
                    let normalization = normalization(path, &psi)?;
                    return Err(SolverError::Stalled {
                        t,
                        dt,
                        trace: Box::new(SolveTrace {
                            steps,
                            reached: t,
                            psi,
                            normalization,
                        }),
                    });
                }
            }
        }
    }
    let normalization = normalization(path, &psi)?;
    Ok(SolveTrace {
        steps,
        reached: t,
        psi,
        normalization,
    })
}
