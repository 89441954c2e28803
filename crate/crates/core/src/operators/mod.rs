//! The generalized Abreu operator `S_D(u) = −(1/D) Σ_ij ∂_i∂_j (D u^{ij})`,
//! scalar and Ricci curvature, and consistency diagnostics.
//!
//! On a grid, the inner Hessians `u_{ij}` are exact for the Guillemin part and
//! read from the spline for `ψ`; only the outer second derivatives of
//! `D u^{ij}` are central differences of spacing `h`. Nodes whose 3×3
//! neighbourhood leaves the active set are masked.

mod jet;

pub use jet::Jet;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bundle::{BundleError, DhData};
use crate::polytope::{GridSpec, Polytope};
use crate::potentials::{
    legendre_inverse, NodalHessian, Potential, PotentialError, Sym2, SymplecticPotential,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("Hessian is not positive definite at stencil point ({}, {})", xi[0], xi[1])]
    NotConvex { xi: [f64; 2] },
    #[error("D is not positive at ({}, {})", xi[0], xi[1])]
    NonPositiveDh { xi: [f64; 2] },
    #[error("grid has no unmasked node")]
    NoUnmaskedNodes,
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Values of an operator on the active nodes of a grid; masked nodes hold NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorField {
    pub values: Vec<f64>,
    pub masked: Vec<bool>,
    pub det_hess: Vec<f64>,
    pub dh: Vec<f64>,
    pub h_g: Vec<f64>,
    /// `F = D / det Hess u`.
    pub f_delta: Vec<f64>,
}

impl OperatorField {
    pub fn unmasked_values(&self) -> Vec<f64> {
        self.values.iter().zip(&self.masked).filter(|(_, m)| !**m).map(|(v, _)| *v).collect()
    }

    pub fn max_deviation(&self, target: f64) -> f64 {
        self.unmasked_values().iter().map(|v| (v - target).abs()).fold(0.0, f64::max)
    }

    /// `max − min` over unmasked nodes.
    pub fn spread(&self) -> f64 {
        let v = self.unmasked_values();
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        hi - lo
    }
}

/// Per-grid data for repeated evaluation of the discrete operator with
/// varying `ψ`.
#[derive(Clone, Debug)]
pub struct AbreuStencil {
    guillemin_hess: Vec<Sym2>,
    dh: Vec<f64>,
    h_g: Vec<f64>,
    flat: Vec<usize>,
    xi: Vec<[f64; 2]>,
    /// Unmasked node indices with their 3×3 neighbourhoods, row `a + 1`,
    /// column `b + 1` holding the node at offset `(a, b)`.
    centers: Vec<(usize, [[usize; 3]; 3])>,
    h: f64,
}

impl AbreuStencil {
    pub fn new(pot: &SymplecticPotential, dh: &DhData) -> Result<Self, OperatorError> {
        let grid = pot.grid();
        let v = pot.guillemin_part();
        let mut dh_vals = Vec::with_capacity(grid.len());
        let mut h_g = Vec::with_capacity(grid.len());
        for n in grid.nodes() {
            let d = dh.dh_value(n.xi);
            if !(d > 0.0) {
                return Err(OperatorError::NonPositiveDh { xi: n.xi });
            }
            dh_vals.push(d);
            h_g.push(dh.h_g_value(n.xi)?);
        }
        let centers: Vec<_> = grid.unmasked().map(|k| (k, neighbourhood(grid, k))).collect();
        if centers.is_empty() {
            return Err(OperatorError::NoUnmaskedNodes);
        }
        Ok(AbreuStencil {
            guillemin_hess: grid.nodes().iter().map(|n| v.hessian_from_deltas(&n.deltas)).collect(),
            dh: dh_vals,
            h_g,
            flat: grid.nodes().iter().map(|n| grid.flat(n.i, n.j)).collect(),
            xi: grid.nodes().iter().map(|n| n.xi).collect(),
            centers,
            h: grid.h,
        })
    }

    pub fn unmasked_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.centers.iter().map(|c| c.0)
    }

    pub fn unmasked_len(&self) -> usize {
        self.centers.len()
    }

    /// `D u^{ij}` at every active node, for the given nodal `ψ`-Hessian over the box.
    pub fn weighted_inverse(&self, psi: &NodalHessian) -> Result<Vec<Sym2>, OperatorError> {
        (0..self.flat.len())
            .map(|k| {
                let f = self.flat[k];
                let h = self.guillemin_hess[k].add(&Sym2::new(psi.fxx[f], psi.fxy[f], psi.fyy[f]));
                if !h.is_positive_definite() {
                    return Err(OperatorError::NotConvex { xi: self.xi[k] });
                }
                let inv = h.inverse();
                let d = self.dh[k];
                Ok(Sym2::new(d * inv.xx, d * inv.xy, d * inv.yy))
            })
            .collect()
    }

    /// `S_D` at the unmasked nodes, in grid order.
    pub fn apply(&self, psi: &NodalHessian) -> Result<Vec<f64>, OperatorError> {
        let w = self.weighted_inverse(psi)?;
        Ok(self.centers.iter().map(|(k, nb)| self.divergence(&w, *k, nb)).collect())
    }

    fn divergence(&self, w: &[Sym2], k: usize, nb: &[[usize; 3]; 3]) -> f64 {
        let h2 = self.h * self.h;
        let at = |a: usize, b: usize| &w[nb[a][b]];
        let d11 = (at(2, 1).xx - 2.0 * at(1, 1).xx + at(0, 1).xx) / h2;
        let d12 = (at(2, 2).xy - at(2, 0).xy - at(0, 2).xy + at(0, 0).xy) / (4.0 * h2);
        let d22 = (at(1, 2).yy - 2.0 * at(1, 1).yy + at(1, 0).yy) / h2;
        -(d11 + 2.0 * d12 + d22) / self.dh[k]
    }
}

fn neighbourhood(grid: &GridSpec, k: usize) -> [[usize; 3]; 3] {
    let n = &grid.nodes()[k];
    let mut nb = [[0usize; 3]; 3];
    for (a, row) in nb.iter_mut().enumerate() {
        for (b, slot) in row.iter_mut().enumerate() {
            *slot = grid
                .active_at(n.i as isize + a as isize - 1, n.j as isize + b as isize - 1)
                .expect("unmasked nodes have active neighbourhoods");
        }
    }
    nb
}

fn psi_nodal_hessian(pot: &SymplecticPotential) -> NodalHessian {
    let p = pot.psi();
    NodalHessian {
        fxx: p.fxx.clone(),
        fxy: p.fxy.clone(),
        fyy: p.fyy.clone(),
    }
}

/// `S_D(u)` on the unmasked nodes of the potential's grid.
pub fn abreu_apply(pot: &SymplecticPotential, dh: &DhData) -> Result<OperatorField, OperatorError> {
    let stencil = AbreuStencil::new(pot, dh)?;
    let psi = psi_nodal_hessian(pot);
    let grid = pot.grid();
    let values = stencil.apply(&psi)?;
    let mut field = vec![f64::NAN; grid.len()];
    for ((k, _), v) in stencil.centers.iter().zip(values) {
        field[*k] = v;
    }
    let det_hess: Vec<f64> = (0..grid.len())
        .map(|k| {
            let f = stencil.flat[k];
            stencil.guillemin_hess[k].add(&Sym2::new(psi.fxx[f], psi.fxy[f], psi.fyy[f])).det()
        })
        .collect();
    Ok(OperatorField {
        masked: (0..grid.len()).map(|k| grid.is_masked(k)).collect(),
        f_delta: det_hess.iter().zip(&stencil.dh).map(|(d, dh)| dh / d).collect(),
        values: field,
        det_hess,
        dh: stencil.dh,
        h_g: stencil.h_g,
    })
}

/// The toric operator `−Σ_ij ∂_i∂_j u^{ij}`, coded without any `D` weighting.
pub fn plain_abreu_apply(pot: &SymplecticPotential) -> Result<Vec<f64>, OperatorError> {
    let grid = pot.grid();
    let inverses: Vec<Sym2> = (0..grid.len())
        .map(|k| {
            let n = &grid.nodes()[k];
            let h = pot.guillemin_part().hessian_from_deltas(&n.deltas).add(&pot.psi_node_hessian(k));
            if h.is_positive_definite() {
                Ok(h.inverse())
            } else {
                Err(OperatorError::NotConvex { xi: n.xi })
            }
        })
        .collect::<Result<_, _>>()?;
    let h2 = grid.h * grid.h;
    let mut out = vec![f64::NAN; grid.len()];
    for k in grid.unmasked() {
        let n = &grid.nodes()[k];
        let (i, j) = (n.i as isize, n.j as isize);
        let u = |a: isize, b: isize| inverses[grid.active_at(i + a, j + b).expect("unmasked")];
        let d11 = (u(1, 0).xx - 2.0 * u(0, 0).xx + u(-1, 0).xx) / h2;
        let d12 = (u(1, 1).xy - u(1, -1).xy - u(-1, 1).xy + u(-1, -1).xy) / (4.0 * h2);
        let d22 = (u(0, 1).yy - 2.0 * u(0, 0).yy + u(0, -1).yy) / h2;
        out[k] = -(d11 + 2.0 * d12 + d22);
    }
    Ok(out)
}

/// `𝕊 = S_D(u) + h_G` on the unmasked nodes.
pub fn scalar_curvature(pot: &SymplecticPotential, dh: &DhData) -> Result<OperatorField, OperatorError> {
    let mut f = abreu_apply(pot, dh)?;
    for (v, g) in f.values.iter_mut().zip(&f.h_g) {
        *v += g;
    }
    Ok(f)
}

/// `S_D(v)` of the Guillemin potential evaluated exactly on the closed polytope.
///
/// With `P = Π_k δ_k`, the inverse Hessian of `v` is `N / Q` for the
/// polynomials `N = Σ_k (P/δ_k) t_k t_kᵀ` (`t_k` the edge direction of facet
/// `k`) and `Q = Σ_{k<l} (P/δ_k δ_l) (n_k × n_l)²`, so no singular term is
/// ever formed and the value stays accurate up to the boundary.
pub fn guillemin_abreu_exact(poly: &Polytope, dh: &DhData, xi: [f64; 2]) -> Result<f64, OperatorError> {
    if !(xi[0].is_finite() && xi[1].is_finite()) || poly.min_delta(xi) < 0.0 {
        return Err(PotentialError::Outside { xi }.into());
    }
    let normals: Vec<[f64; 2]> = poly.facets().iter().map(|f| f.normal_f64()).collect();
    let deltas: Vec<Jet> = poly
        .facets()
        .iter()
        .zip(&normals)
        .map(|(f, n)| Jet::affine(xi, n[0], n[1], crate::polytope::rational_to_f64(&f.offset)))
        .collect();
    let product_except = |skip: &[usize]| {
        deltas
            .iter()
            .enumerate()
            .filter(|(m, _)| !skip.contains(m))
            .fold(Jet::constant(1.0), |acc, (_, d)| acc * *d)
    };
    let zero = Jet::constant(0.0);
    let (mut n11, mut n12, mut n22, mut q) = (zero, zero, zero, zero);
    for (k, n) in normals.iter().enumerate() {
        let p = product_except(&[k]);
        n11 = n11 + p.scale(n[1] * n[1]);
        n12 = n12 - p.scale(n[0] * n[1]);
        n22 = n22 + p.scale(n[0] * n[0]);
        for (l, m) in normals.iter().enumerate().skip(k + 1) {
            let c = n[0] * m[1] - n[1] * m[0];
            if c != 0.0 {
                q = q + product_except(&[k, l]).scale(c * c);
            }
        }
    }
    let mut d = Jet::constant(1.0);
    for m in dh.roots_f64() {
        d = d * Jet::affine(xi, 2.0 * m[0], 2.0 * m[1], 0.0);
    }
    if !(d.v > 0.0) {
        return Err(OperatorError::NonPositiveDh { xi });
    }
    let dq = d / q;
    let (w11, w12, w22) = (n11 * dq, n12 * dq, n22 * dq);
    Ok(-(w11.h[0] + 2.0 * w12.h[1] + w22.h[2]) / d.v)
}

/// One evaluation of the operator written in gradient coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XFormSample {
    pub x: [f64; 2],
    pub xi: [f64; 2],
    pub h_x: f64,
    pub value: f64,
    /// Gradient of `log F` in `x`.
    pub log_f_grad: [f64; 2],
    /// Hessian of `log F` in `x`.
    pub log_f_hess: Sym2,
    /// `u_{ij}` at `ξ`, which is `f^{ij}` in gradient coordinates.
    pub metric: Sym2,
}

fn log_f(p: &dyn Potential, dh: &DhData, xi: [f64; 2]) -> Result<f64, OperatorError> {
    let d = dh.dh_value(xi);
    if !(d > 0.0) {
        return Err(OperatorError::NonPositiveDh { xi });
    }
    Ok(d.ln() - p.hessian(xi)?.det.ln())
}

/// Evaluates `−Σ f^{ij}(log F)_{ij} − Σ f^{ij}(log D)_i (log F)_j` at a
/// point `x` in gradient coordinates, with `F = D / det Hess u`.
///
/// Derivatives of `log F` in `x` are central differences with spacing
/// `h_x = h·√λ_max(Hess u)`, each stencil point pulled back by the Legendre
/// inverse; `∇_x log D = u^{-1} ∇_ξ log D` is analytic.
pub fn abreu_x_form(
    p: &dyn Potential,
    dh: &DhData,
    x: [f64; 2],
    seed: [f64; 2],
    h: f64,
) -> Result<XFormSample, OperatorError> {
    let xi = legendre_inverse(p, x, seed)?;
    let hess = p.hessian(xi)?;
    let h_x = h * hess.hess.max_eigenvalue().sqrt();
    let mut lf = [[0.0; 3]; 3];
    for (a, row) in lf.iter_mut().enumerate() {
        for (b, slot) in row.iter_mut().enumerate() {
            let da = a as f64 - 1.0;
            let db = b as f64 - 1.0;
            let point = if a == 1 && b == 1 {
                xi
            } else {
                legendre_inverse(p, [x[0] + da * h_x, x[1] + db * h_x], xi)?
            };
            *slot = log_f(p, dh, point)?;
        }
    }
    let g = [(lf[2][1] - lf[0][1]) / (2.0 * h_x), (lf[1][2] - lf[1][0]) / (2.0 * h_x)];
    let h2 = h_x * h_x;
    let lh = Sym2::new(
        (lf[2][1] - 2.0 * lf[1][1] + lf[0][1]) / h2,
        (lf[2][2] - lf[2][0] - lf[0][2] + lf[0][0]) / (4.0 * h2),
        (lf[1][2] - 2.0 * lf[1][1] + lf[1][0]) / h2,
    );
    let metric = hess.hess;
    let grad_log_d_xi = dh.grad_log_dh(xi)?;
    let grad_log_d = hess.inv.apply(grad_log_d_xi);
    let mut value = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            value -= metric.get(i, j) * lh.get(i, j);
        }
    }
    let gd = metric.apply(grad_log_d);
    value -= gd[0] * g[0] + gd[1] * g[1];
    Ok(XFormSample {
        x,
        xi,
        h_x,
        value,
        log_f_grad: g,
        log_f_hess: lh,
        metric,
    })
}

/// Ricci curvature in the invariant frame: a horizontal 2×2 block and one
/// diagonal fiber entry per root. Mixed horizontal–fiber entries vanish.
#[derive(Clone, Debug, PartialEq)]
pub struct RicciComponents {
    pub xi: [f64; 2],
    /// `−¼ Hess_x log F`.
    pub horizontal: Sym2,
    /// `−¼ Σ f^{kl}(D_α)_{x_k}(log F)_{x_l} + ¼ Σ_k ∂_{ξ_k}D_α σ_k`, per root.
    pub fiber: Vec<f64>,
    pub metric: Sym2,
    pub factors: Vec<f64>,
}

impl RicciComponents {
    /// Scalar contraction `4 Σ u_{jk} Ric_{jk} + Σ_α (4/D_α) Ric_α`.
    pub fn scalar_trace(&self) -> f64 {
        let mut s = 0.0;
        for j in 0..2 {
            for k in 0..2 {
                s += 4.0 * self.metric.get(j, k) * self.horizontal.get(j, k);
            }
        }
        for (r, d) in self.fiber.iter().zip(&self.factors) {
            s += 4.0 * r / d;
        }
        s
    }
}

pub fn ricci_components(
    p: &dyn Potential,
    dh: &DhData,
    x: [f64; 2],
    seed: [f64; 2],
    h: f64,
) -> Result<RicciComponents, OperatorError> {
    let s = abreu_x_form(p, dh, x, seed, h)?;
    let inv = p.hessian(s.xi)?.inv;
    let sigma = dh.sigma();
    let mut fiber = Vec::with_capacity(dh.roots().len());
    let mut factors = Vec::with_capacity(dh.roots().len());
    for (a, m) in dh.roots_f64().iter().enumerate() {
        // (D_α)_{x_k} = 2 Σ_j M_α^j u^{jk}
        let dx = inv.apply([2.0 * m[0], 2.0 * m[1]]);
        let mg = s.metric.apply(dx);
        let transport = mg[0] * s.log_f_grad[0] + mg[1] * s.log_f_grad[1];
        let twist = 2.0 * m[0] * sigma[0] + 2.0 * m[1] * sigma[1];
        fiber.push(-0.25 * transport + 0.25 * twist);
        factors.push(dh.factor(a, s.xi));
    }
    let lh = s.log_f_hess;
    Ok(RicciComponents {
        xi: s.xi,
        horizontal: Sym2::new(-0.25 * lh.xx, -0.25 * lh.xy, -0.25 * lh.yy),
        fiber,
        metric: s.metric,
        factors,
    })
}

/// Range of a per-node quantity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub fn of(values: impl Iterator<Item = f64>) -> Range {
        values.fold(
            Range {
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
            },
            |r, v| Range {
                min: r.min.min(v),
                max: r.max.max(v),
            },
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    /// `max u − min u` over active nodes.
    pub oscillation: f64,
    /// Per facet, `min δ_k·det Hess u` over the nodes nearest to it within
    /// one grid layer of the clipping distance; `None` if no node qualifies.
    pub facet_det_bounds: Vec<Option<f64>>,
    /// Range of `det Hess v / det Hess u` over active nodes.
    pub h_proxy: Range,
}

pub fn diagnostics(pot: &SymplecticPotential) -> Result<DiagnosticsReport, OperatorError> {
    let grid = pot.grid();
    let v = pot.guillemin_part();
    let per_node: Vec<(f64, f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let n = &grid.nodes()[k];
            let det_u = pot.node_hessian(k)?.det;
            let det_v = v.hessian_from_deltas(&n.deltas).det();
            Ok((pot.node_value(k), det_u, det_v))
        })
        .collect::<Result<_, OperatorError>>()?;
    let values = Range::of(per_node.iter().map(|t| t.0));
    let nfacets = pot.polytope().facets().len();
    let mut facet_det_bounds = vec![None; nfacets];
    let cutoff = grid.h_min + grid.h;
    for (n, t) in grid.nodes().iter().zip(&per_node) {
        let k = n.nearest_facet;
        if n.deltas[k] < cutoff {
            let b = n.deltas[k] * t.1;
            facet_det_bounds[k] = Some(facet_det_bounds[k].map_or(b, |m: f64| m.min(b)));
        }
    }
    Ok(DiagnosticsReport {
        oscillation: values.max - values.min,
        facet_det_bounds,
        h_proxy: Range::of(per_node.iter().map(|t| t.2 / t.1)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::build_grid;
    use crate::potentials::{Affine, QuadraticPatch};
    use std::sync::Arc;

    fn guillemin(poly: &Polytope, h: f64) -> SymplecticPotential {
        SymplecticPotential::guillemin(poly, Arc::new(build_grid(poly, h, 4.0 * h).unwrap()))
    }

    #[test]
    fn square_is_constant_four() {
        let u = guillemin(&Polytope::square(1), 1.0 / 16.0);
        let f = abreu_apply(&u, &DhData::toric()).unwrap();
        assert!(f.max_deviation(4.0) < 1e-9);
        assert!(f.masked.iter().any(|m| *m));
    }

    #[test]
    fn simplex_is_constant_six() {
        let s = Polytope::standard_simplex();
        let u = guillemin(&s, 1.0 / 32.0);
        let f = abreu_apply(&u, &DhData::toric()).unwrap();
        assert!(f.max_deviation(6.0) < 1e-8);
        let exact = guillemin_abreu_exact(&s, &DhData::toric(), [0.2, 0.3]).unwrap();
        assert!((exact - 6.0).abs() < 1e-12);
    }

    #[test]
    fn affine_terms_do_not_change_the_field() {
        let s = Polytope::standard_simplex();
        let u = guillemin(&s, 1.0 / 16.0).with_psi_fn(|x| 0.02 * (x[0] * x[1]).powi(2));
        let dh = DhData::toric();
        let a = abreu_apply(&u, &dh).unwrap();
        let b = abreu_apply(
            &u.add_affine(Affine {
                constant: 3.0,
                linear: [-1.0, 2.5],
            }),
            &dh,
        )
        .unwrap();
        assert_eq!(
            a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn toric_reduction_is_bitwise() {
        let u = guillemin(&Polytope::square(1), 1.0 / 16.0).with_psi_fn(|x| 0.1 * (x[0] - x[1]).powi(4));
        let f = abreu_apply(&u, &DhData::toric()).unwrap();
        let plain = plain_abreu_apply(&u).unwrap();
        for (a, b) in f.values.iter().zip(&plain) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(f.h_g.iter().all(|g| *g == 0.0));
        let s = scalar_curvature(&u, &DhData::toric()).unwrap();
        assert_eq!(s.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), f.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn scalar_curvature_adds_h_g() {
        let poly = Polytope::square_between(10, 11);
        let dh = DhData::from_integer_roots(&[[1, 0]], [1.0, 0.0]).unwrap();
        let u = guillemin(&poly, 1.0 / 16.0);
        let s = scalar_curvature(&u, &dh).unwrap();
        let a = abreu_apply(&u, &dh).unwrap();
        for (k, n) in u.grid().nodes().iter().enumerate() {
            if !a.masked[k] {
                assert!((s.values[k] - a.values[k] - 1.0 / n.xi[0]).abs() < 1e-12);
            }
        }
        let zero = DhData::from_integer_roots(&[[1, 0]], [0.0, 0.0]).unwrap();
        let z = scalar_curvature(&u, &zero).unwrap();
        assert_eq!(z.unmasked_values(), abreu_apply(&u, &zero).unwrap().unmasked_values());
    }

    #[test]
    fn exact_guillemin_matches_grid_operator_with_roots() {
        let poly = Polytope::square_between(10, 11);
        let dh = DhData::from_integer_roots(&[[1, 0]], [1.0, 0.0]).unwrap();
        let u = guillemin(&poly, 1.0 / 16.0);
        let f = abreu_apply(&u, &dh).unwrap();
        for (k, n) in u.grid().nodes().iter().enumerate() {
            if !f.masked[k] {
                let e = guillemin_abreu_exact(&poly, &dh, n.xi).unwrap();
                assert!((f.values[k] - e).abs() < 1e-7, "{} vs {}", f.values[k], e);
            }
        }
    }

    #[test]
    fn x_form_examples() {
        let flat = abreu_x_form(&QuadraticPatch, &DhData::toric(), [0.3, 0.2], [0.0, 0.0], 0.01).unwrap();
        assert!(flat.value.abs() < 1e-8);
        let u = guillemin(&Polytope::square(1), 1.0 / 32.0);
        let s = abreu_x_form(&u, &DhData::toric(), [0.4, -0.3], [0.5, 0.5], 1.0 / 32.0).unwrap();
        assert!((s.value - 4.0).abs() < 1e-2);
    }

    #[test]
    fn ricci_examples() {
        let r = ricci_components(&QuadraticPatch, &DhData::toric(), [0.1, 0.1], [0.0, 0.0], 0.01).unwrap();
        assert!(r.horizontal.frobenius_diff(&Sym2::default()) < 1e-8);
        assert!(r.fiber.is_empty());

        let poly = Polytope::square_between(10, 11);
        let dh = DhData::from_integer_roots(&[[1, 0]], [1.0, 0.0]).unwrap();
        let u = guillemin(&poly, 1.0 / 32.0);
        let xi = [10.4, 10.7];
        let x = u.gradient(xi).unwrap();
        let r = ricci_components(&u, &dh, x, [10.5, 10.5], 1.0 / 32.0).unwrap();
        let scalar = guillemin_abreu_exact(&poly, &dh, xi).unwrap() + dh.h_g_value(xi).unwrap();
        assert!((r.scalar_trace() - scalar).abs() < 1e-2, "{} vs {}", r.scalar_trace(), scalar);
    }

    #[test]
    fn diagnostics_with_zero_correction() {
        let u = guillemin(&Polytope::square(1), 1.0 / 16.0);
        let d = diagnostics(&u).unwrap();
        assert_eq!(d.h_proxy, Range { min: 1.0, max: 1.0 });
        for (k, b) in d.facet_det_bounds.iter().enumerate() {
            let b = b.unwrap_or_else(|| panic!("facet {k} has near nodes"));
            // closed form at the first layer: δ = 1/4, other coordinate 1/2 is the minimizer
            let t = 0.25f64;
            let pred = t * (1.0 / t + 1.0 / (1.0 - t)) * 4.0;
            assert!(b >= 0.5 * pred);
        }
    }

    #[test]
    fn h_proxy_contracts_with_quadratic_size() {
        let s = Polytope::square(1);
        let p = s.base_point();
        let mut widths = Vec::new();
        for eps in [1e-1, 1e-2, 1e-3] {
            let u = guillemin(&s, 1.0 / 16.0).with_psi_fn(|x| eps * ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)));
            let d = diagnostics(&u).unwrap();
            widths.push((d.h_proxy.max - 1.0).abs().max((1.0 - d.h_proxy.min).abs()));
        }
        assert!(widths[0] > widths[1] && widths[1] > widths[2]);
    }
}
