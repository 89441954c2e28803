//! The linear functional `L_A`, the Mabuchi functional, and the uniform
//! stability constant estimated by linear programming over convex
//! piecewise-linear functions.

mod lp;
mod quadrature;
mod triangulation;

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bundle::DhData;
use crate::operators::{guillemin_abreu_exact, OperatorError};
use crate::polytope::Polytope;
use crate::potentials::{ClosedPotential, PotentialError};

pub use lp::{Column, DenseSimplex, LpEngine, LpSolution, LpStatus, StandardForm};
pub use quadrature::{
    gauss_legendre, graded_breakpoints, integrate_boundary, integrate_polygon, triangle_rule, with_estimate,
    CompositeRule, Estimate, QuadratureOptions,
};
pub use triangulation::{barycentric, BoundaryEdge, Hinge, Triangulation};

#[derive(Debug, Error)]
pub enum FunctionalError {
    #[error("prescribed field: {0}")]
    Field(#[from] OperatorError),
    #[error("potential: {0}")]
    Potential(#[from] PotentialError),
    #[error("quadrature did not reach tolerance {tol:e}: value {value}, estimated error {error:e}")]
    Quadrature { value: f64, error: f64, tol: f64 },
    #[error("node values have length {got}, triangulation has {expected} nodes")]
    SizeMismatch { got: usize, expected: usize },
    #[error("stability LP is infeasible (degenerate triangulation)")]
    LpInfeasible,
    #[error("stability LP is unbounded (normalization constraint lost)")]
    LpUnbounded,
    #[error("stability LP hit the iteration limit after {0} iterations")]
    LpIterationLimit(usize),
    #[error("extremal function fails verification: hinge violation {hinge:e}, normalization error {normalization:e}")]
    Certificate { hinge: f64, normalization: f64 },
}

/// Which sign joins the interior term in `L_A(u) = ∫_{∂Δ} u D dσ ± ∫_Δ A u D dμ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LSign {
    /// The sign under which `L_{S_D(v)}` vanishes on affine functions.
    #[default]
    Minus,
    Plus,
}

impl LSign {
    pub fn factor(self) -> f64 {
        match self {
            LSign::Minus => -1.0,
            LSign::Plus => 1.0,
        }
    }
}

/// A user field `A(ξ, A₀(ξ))`.
pub type FieldFn = Arc<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>;

/// The prescribed function `A` on the closed polytope.
#[derive(Clone)]
pub enum PrescribedField {
    Constant(f64),
    /// `A₀ = S_D(v)`, the curvature of the Guillemin potential.
    Endpoint,
    /// An arbitrary field; `uses_endpoint` requests `A₀` as its second argument.
    Custom { f: FieldFn, uses_endpoint: bool },
}

impl fmt::Debug for PrescribedField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrescribedField::Constant(c) => write!(f, "Constant({c:?})"),
            PrescribedField::Endpoint => write!(f, "Endpoint"),
            PrescribedField::Custom { uses_endpoint, .. } => {
                write!(f, "Custom {{ uses_endpoint: {uses_endpoint} }}")
            }
        }
    }
}

/// `A` together with the bundle data and the sign convention of `L_A`.
#[derive(Clone, Debug)]
pub struct PrescribedData {
    pub field: PrescribedField,
    pub dh: DhData,
    pub l_sign: LSign,
}

impl PrescribedData {
    pub fn new(field: PrescribedField, dh: DhData) -> Self {
        PrescribedData {
            field,
            dh,
            l_sign: LSign::default(),
        }
    }

    pub fn endpoint(dh: DhData) -> Self {
        Self::new(PrescribedField::Endpoint, dh)
    }

    pub fn constant(c: f64, dh: DhData) -> Self {
        Self::new(PrescribedField::Constant(c), dh)
    }

    /// `A₀ + c`.
    pub fn shifted_endpoint(c: f64, dh: DhData) -> Self {
        Self::new(
            PrescribedField::Custom {
                f: Arc::new(move |_, a0| a0 + c),
                uses_endpoint: true,
            },
            dh,
        )
    }

    /// `s·A`, keeping the sign convention.
    pub fn scaled(&self, s: f64) -> Self {
        let inner = self.clone();
        PrescribedData {
            field: PrescribedField::Custom {
                f: Arc::new(move |xi, a0| s * inner.eval_with(xi, a0)),
                uses_endpoint: self.uses_endpoint(),
            },
            dh: self.dh.clone(),
            l_sign: self.l_sign,
        }
    }

    pub fn with_sign(mut self, sign: LSign) -> Self {
        self.l_sign = sign;
        self
    }

    pub fn uses_endpoint(&self) -> bool {
        match &self.field {
            PrescribedField::Constant(_) => false,
            PrescribedField::Endpoint => true,
            PrescribedField::Custom { uses_endpoint, .. } => *uses_endpoint,
        }
    }

    fn eval_with(&self, xi: [f64; 2], a0: f64) -> f64 {
        match &self.field {
            PrescribedField::Constant(c) => *c,
            PrescribedField::Endpoint => a0,
            PrescribedField::Custom { f, .. } => f(xi, a0),
        }
    }

    /// `A(ξ)` given an already known `A₀(ξ)`.
    pub fn value_given_endpoint(&self, xi: [f64; 2], a0: f64) -> f64 {
        self.eval_with(xi, a0)
    }

    /// `A(ξ)` on the closed polytope.
    pub fn value(&self, poly: &Polytope, xi: [f64; 2]) -> Result<f64, FunctionalError> {
        let a0 = if self.uses_endpoint() {
            endpoint_value(poly, &self.dh, xi)?
        } else {
            f64::NAN
        };
        Ok(self.eval_with(xi, a0))
    }

    /// `𝕊 = A + h_G`.
    pub fn total_curvature(&self, poly: &Polytope, xi: [f64; 2]) -> Result<f64, FunctionalError> {
        let h = self.dh.h_g_value(xi).map_err(OperatorError::from)?;
        Ok(self.value(poly, xi)? + h)
    }
}

/// `A₀ = S_D(v)` on the closed polytope.
pub fn endpoint_value(poly: &Polytope, dh: &DhData, xi: [f64; 2]) -> Result<f64, FunctionalError> {
    Ok(guillemin_abreu_exact(poly, dh, xi)?)
}

fn checked(est: Estimate, tol: f64) -> Result<f64, FunctionalError> {
    if est.error > tol || !est.value.is_finite() {
        Err(FunctionalError::Quadrature {
            value: est.value,
            error: est.error,
            tol,
        })
    } else {
        Ok(est.value)
    }
}

/// `L_A(u)` for `u` continuous on the closed polytope.
pub fn l_functional<U>(data: &PrescribedData, poly: &Polytope, u: U, opts: QuadratureOptions) -> Result<Estimate, FunctionalError>
where
    U: Fn([f64; 2]) -> f64 + Sync,
{
    let sign = data.l_sign.factor();
    let est = with_estimate(opts, |order, levels| {
        let boundary = integrate_boundary(poly, |x| Ok::<_, FunctionalError>(u(x) * data.dh.dh_value(x)), order, levels)?;
        let interior = integrate_polygon(
            poly,
            |x| Ok::<_, FunctionalError>(data.value(poly, x)? * u(x) * data.dh.dh_value(x)),
            order,
            levels,
        )?;
        Ok::<_, FunctionalError>(boundary + sign * interior)
    })?;
    checked(est, opts.tol)?;
    Ok(est)
}

/// `max |L_A(ℓ)|` over `ℓ ∈ {1, ξ₁, ξ₂}`.
pub fn check_affine_vanishing(data: &PrescribedData, poly: &Polytope, opts: QuadratureOptions) -> Result<f64, FunctionalError> {
    let basis: [fn([f64; 2]) -> f64; 3] = [|_| 1.0, |x| x[0], |x| x[1]];
    let mut worst = 0.0f64;
    for l in basis {
        worst = worst.max(l_functional(data, poly, l, opts)?.value.abs());
    }
    Ok(worst)
}

/// `𝓕_A(u) = −∫_Δ log det(u_ij) D dμ + L_A(u)`.
pub fn mabuchi_functional(
    data: &PrescribedData,
    poly: &Polytope,
    u: &dyn ClosedPotential,
    opts: QuadratureOptions,
) -> Result<Estimate, FunctionalError> {
    let log_det = with_estimate(opts, |order, levels| {
        integrate_polygon(
            poly,
            |x| Ok::<_, FunctionalError>(u.hessian(x)?.det.ln() * data.dh.dh_value(x)),
            order,
            levels,
        )
    })?;
    checked(log_det, opts.tol)?;
    let l = l_functional(data, poly, |x| u.closure_value(x), opts)?;
    Ok(Estimate {
        value: l.value - log_det.value,
        error: l.error + log_det.error,
    })
}

/// `L_A` restricted to piecewise-linear functions on a triangulation:
/// `L_A(g) = Σ_i g_i (boundary_i ± interior_i)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlCoefficients {
    /// `∫_{∂Δ} φ_i D dσ`.
    pub boundary: Vec<f64>,
    /// `∫_Δ A φ_i D dμ`.
    pub interior: Vec<f64>,
    pub sign: f64,
}

impl PlCoefficients {
    pub fn objective(&self, i: usize) -> f64 {
        self.boundary[i] + self.sign * self.interior[i]
    }

    pub fn l_value(&self, g: &[f64]) -> f64 {
        (0..g.len()).map(|i| g[i] * self.objective(i)).sum()
    }

    pub fn normalization(&self, g: &[f64]) -> f64 {
        g.iter().zip(&self.boundary).map(|(g, b)| g * b).sum()
    }
}

const PL_ORDER: usize = 8;

pub fn pl_coefficients(data: &PrescribedData, poly: &Polytope, tri: &Triangulation) -> Result<PlCoefficients, FunctionalError> {
    let n = tri.nodes.len();
    let mut boundary = vec![0.0; n];
    let (gn, gw) = gauss_legendre(PL_ORDER);
    for e in &tri.boundary {
        let [a, b] = e.nodes.map(|i| tri.nodes[i]);
        let normal = poly.facets()[e.facet].normal_f64();
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt() / normal[0].hypot(normal[1]);
        for (&t, &w) in gn.iter().zip(&gw) {
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let d = w * len * data.dh.dh_value(x);
            boundary[e.nodes[0]] += d * (1.0 - t);
            boundary[e.nodes[1]] += d * t;
        }
    }
    let rule = triangle_rule(PL_ORDER);
    let per_cell: Vec<[f64; 3]> = (0..tri.cells.len())
        .into_par_iter()
        .map(|c| {
            let v = tri.cells[c].map(|i| tri.nodes[i]);
            let area = tri.cell_area(c);
            let mut acc = [0.0; 3];
            for (l, w) in &rule {
                let x = [
                    l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
                    l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
                ];
                let f = w * area * data.value(poly, x)? * data.dh.dh_value(x);
                for k in 0..3 {
                    acc[k] += f * l[k];
                }
            }
            Ok(acc)
        })
        .collect::<Result<_, FunctionalError>>()?;
    let mut interior = vec![0.0; n];
    for (c, acc) in per_cell.iter().enumerate() {
        for k in 0..3 {
            interior[tri.cells[c][k]] += acc[k];
        }
    }
    Ok(PlCoefficients {
        boundary,
        interior,
        sign: data.l_sign.factor(),
    })
}

/// `L_A(g)` for the piecewise-linear function with node values `g`.
pub fn l_functional_pl(data: &PrescribedData, poly: &Polytope, tri: &Triangulation, g: &[f64]) -> Result<f64, FunctionalError> {
    if g.len() != tri.nodes.len() {
        return Err(FunctionalError::SizeMismatch {
            got: g.len(),
            expected: tri.nodes.len(),
        });
    }
    Ok(pl_coefficients(data, poly, tri)?.l_value(g))
}

/// Outcome of the stability linear program.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityCertificate {
    pub lambda_star: f64,
    pub size: usize,
    pub nodes: Vec<[f64; 2]>,
    pub cells: Vec<[usize; 3]>,
    pub base_node: usize,
    /// Node values of the extremal convex function.
    pub values: Vec<f64>,
    pub status: LpStatus,
    /// `max |L_A(ℓ)|` over affine `ℓ`.
    pub affine_residual: f64,
    /// False when `A` does not annihilate affine functions, so `λ*` does not
    /// certify anything.
    pub certified: bool,
    pub max_hinge_violation: f64,
    pub normalization_error: f64,
    pub binding_constraints: usize,
    pub iterations: usize,
}

impl StabilityCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

/// Settings for [`stability_lambda`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityOptions {
    pub quadrature: QuadratureOptions,
    pub engine: DenseSimplex,
    pub verify_tol: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            quadrature: QuadratureOptions::default(),
            engine: DenseSimplex::default(),
            verify_tol: 1e-8,
        }
    }
}

/// `λ* = min L_A(g)` over convex piecewise-linear `g ≥ 0` on the fan
/// triangulation of the given size, with `g(p_o) = 0` and `∫_{∂Δ} g D dσ = 1`.
///
/// The LP is solved in dual form `max μ` subject to `Hᵀy + μ w ≤ c`, `y ≥ 0`,
/// whose multipliers are the extremal node values.
pub fn stability_lambda(data: &PrescribedData, poly: &Polytope, size: usize, opts: &StabilityOptions) -> Result<StabilityCertificate, FunctionalError> {
    let affine_residual = check_affine_vanishing(data, poly, opts.quadrature)?;
    let tri = Triangulation::fan(poly, size);
    let coeffs = pl_coefficients(data, poly, &tri)?;
    stability_lp(&tri, &coeffs, affine_residual, opts.quadrature.tol, &opts.engine, opts.verify_tol)
}

/// The LP part of [`stability_lambda`] for precomputed coefficients.
pub fn stability_lp(
    tri: &Triangulation,
    coeffs: &PlCoefficients,
    affine_residual: f64,
    tol_quad: f64,
    engine: &dyn LpEngine,
    verify_tol: f64,
) -> Result<StabilityCertificate, FunctionalError> {
    let n = tri.nodes.len();
    let row_of: Vec<Option<usize>> = {
        let mut next = 0;
        (0..n)
            .map(|i| {
                (i != tri.base).then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    };
    let rows = n - 1;
    let rhs: Vec<f64> = (0..n).filter(|&i| i != tri.base).map(|i| coeffs.objective(i)).collect();
    let mut lp = StandardForm::new(rows, rhs);
    for h in &tri.hinges {
        let col: Column = h
            .nodes
            .iter()
            .zip(&h.coeffs)
            .filter_map(|(&i, &c)| row_of[i].map(|r| (r, c)))
            .collect();
        lp.add_column(0.0, col);
    }
    let w: Column = (0..n).filter_map(|i| row_of[i].map(|r| (r, coeffs.boundary[i]))).filter(|e| e.1 != 0.0).collect();
    lp.add_column(-1.0, w.clone());
    lp.add_column(1.0, w.iter().map(|&(r, v)| (r, -v)).collect());
    for r in 0..rows {
        lp.add_column(0.0, vec![(r, 1.0)]);
    }
    let sol = engine.solve(&lp);
    match sol.status {
        LpStatus::Optimal => {}
        // the dual being unbounded means no normalized convex function exists
        LpStatus::Unbounded => return Err(FunctionalError::LpInfeasible),
        LpStatus::Infeasible => return Err(FunctionalError::LpUnbounded),
        LpStatus::IterationLimit => return Err(FunctionalError::LpIterationLimit(sol.iterations)),
    }
    let mut values = vec![0.0; n];
    for i in 0..n {
        if let Some(r) = row_of[i] {
            values[i] = -sol.duals[r];
        }
    }
    let lambda_star = -sol.objective;
    let hinge_values: Vec<f64> = tri.hinges.iter().map(|h| h.eval(&values)).collect();
    let min_value = values.iter().fold(0.0f64, |m, v| m.min(*v));
    let max_hinge_violation = hinge_values.iter().fold(-min_value, |m, v| m.max(-v)).max(0.0);
    let normalization_error = (coeffs.normalization(&values) - 1.0).abs();
    if max_hinge_violation > verify_tol || normalization_error > verify_tol {
        return Err(FunctionalError::Certificate {
            hinge: max_hinge_violation,
            normalization: normalization_error,
        });
    }
    let binding_constraints = hinge_values.iter().filter(|v| v.abs() <= verify_tol).count();
    Ok(StabilityCertificate {
        lambda_star,
        size: tri.size,
        nodes: tri.nodes.clone(),
        cells: tri.cells.clone(),
        base_node: tri.base,
        values,
        status: sol.status,
        affine_residual,
        certified: affine_residual <= 10.0 * tol_quad,
        max_hinge_violation,
        normalization_error,
        binding_constraints,
        iterations: sol.iterations,
    })
}

/// Smallest `c` (to relative precision `rel`) found by doubling then
/// bisection for which `A₀ + c` gives `λ* < 0`, with its certificate.
pub fn destabilizing_shift(
    dh: &DhData,
    poly: &Polytope,
    size: usize,
    rel: f64,
    opts: &StabilityOptions,
) -> Result<(f64, StabilityCertificate), FunctionalError> {
    let tri = Triangulation::fan(poly, size);
    let base = pl_coefficients(&PrescribedData::endpoint(dh.clone()), poly, &tri)?;
    let mass = pl_coefficients(&PrescribedData::constant(1.0, dh.clone()), poly, &tri)?;
    let solve = |c: f64| {
        let coeffs = PlCoefficients {
            boundary: base.boundary.clone(),
            interior: base.interior.iter().zip(&mass.interior).map(|(a, m)| a + c * m).collect(),
            sign: base.sign,
        };
        let affine = c * poly.area();
        stability_lp(&tri, &coeffs, affine, opts.quadrature.tol, &opts.engine, opts.verify_tol)
    };
    let mut hi = 1.0;
    let mut cert = solve(hi)?;
    while cert.lambda_star >= 0.0 {
        hi *= 2.0;
        cert = solve(hi)?;
    }
    let mut lo = 0.0;
    while hi - lo > rel * hi {
        let mid = 0.5 * (lo + hi);
        let c = solve(mid)?;
        if c.lambda_star < 0.0 {
            hi = mid;
            cert = c;
        } else {
            lo = mid;
        }
    }
    Ok((hi, cert))
}
