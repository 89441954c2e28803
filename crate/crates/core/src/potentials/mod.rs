//! Symplectic potentials `u = v + ψ + ℓ`: the Guillemin potential `v` in
//! closed form, a grid-sampled smooth correction `ψ` and an affine term `ℓ`
//! used for normalization.

mod spline;

pub use spline::{AxisSpline, NodalHessian, SplineData, SplineEval, TensorSpline};

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use thiserror::Error;

use crate::polytope::{GridSpec, Polytope};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("point ({}, {}) is not strictly inside the polytope", xi[0], xi[1])]
    Outside { xi: [f64; 2] },
    #[error("Hessian is not positive definite at ({}, {}) (det = {det})", xi[0], xi[1])]
    NotConvex { xi: [f64; 2], det: f64 },
    #[error("Legendre inverse did not converge: last iterate ({}, {}), residual {residual}", last[0], last[1])]
    NoConvergence { last: [f64; 2], residual: f64 },
    #[error("point ({}, {}) is not an active grid node", xi[0], xi[1])]
    NotANode { xi: [f64; 2] },
    #[error("grid nodes are not connected")]
    Disconnected,
    #[error("correction has {got} values, grid expects {expected}")]
    SizeMismatch { got: usize, expected: usize },
}

/// Symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 {
        xx: 1.0,
        xy: 0.0,
        yy: 1.0,
    };

    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Sym2 { xx, xy, yy }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn inverse(&self) -> Sym2 {
        let d = self.det();
        Sym2::new(self.yy / d, -self.xy / d, self.xx / d)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.xx > 0.0 && self.det() > 0.0
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.xx * v[0] + self.xy * v[1], self.xy * v[0] + self.yy * v[1]]
    }

    pub fn quad(&self, v: [f64; 2]) -> f64 {
        let a = self.apply(v);
        a[0] * v[0] + a[1] * v[1]
    }

    pub fn add(&self, o: &Sym2) -> Sym2 {
        Sym2::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (0, 0) => self.xx,
            (1, 1) => self.yy,
            _ => self.xy,
        }
    }

    pub fn max_eigenvalue(&self) -> f64 {
        let m = 0.5 * (self.xx + self.yy);
        let r = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        m + r
    }

    pub fn frobenius_diff(&self, o: &Sym2) -> f64 {
        ((self.xx - o.xx).powi(2) + 2.0 * (self.xy - o.xy).powi(2) + (self.yy - o.yy).powi(2)).sqrt()
    }
}

/// Hessian with its inverse `u^{ij}` and determinant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HessianEval {
    pub hess: Sym2,
    pub inv: Sym2,
    pub det: f64,
}

impl HessianEval {
    pub fn checked(hess: Sym2, xi: [f64; 2]) -> Result<Self, PotentialError> {
        let det = hess.det();
        if !(hess.xx > 0.0 && det > 0.0) || !det.is_finite() {
            return Err(PotentialError::NotConvex { xi, det });
        }
        Ok(HessianEval {
            hess,
            inv: hess.inverse(),
            det,
        })
    }
}

/// Result of [`eval_u`]: derivatives up to the requested order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialEval {
    pub value: f64,
    pub grad: Option<[f64; 2]>,
    pub hessian: Option<HessianEval>,
}

/// A strictly convex function on an open convex domain.
pub trait Potential: Sync {
    fn contains(&self, xi: [f64; 2]) -> bool;
    fn value(&self, xi: [f64; 2]) -> Result<f64, PotentialError>;
    fn gradient(&self, xi: [f64; 2]) -> Result<[f64; 2], PotentialError>;
    fn hessian(&self, xi: [f64; 2]) -> Result<HessianEval, PotentialError>;
}

/// A potential whose value extends continuously to the closed polytope.
pub trait ClosedPotential: Potential {
    fn closure_value(&self, xi: [f64; 2]) -> f64;
}

impl ClosedPotential for GuilleminPotential {
    fn closure_value(&self, xi: [f64; 2]) -> f64 {
        GuilleminPotential::closure_value(self, xi)
    }
}

impl ClosedPotential for SymplecticPotential {
    fn closure_value(&self, xi: [f64; 2]) -> f64 {
        SymplecticPotential::closure_value(self, xi)
    }
}

pub fn eval_u(p: &dyn Potential, xi: [f64; 2], order: usize) -> Result<PotentialEval, PotentialError> {
    if !p.contains(xi) {
        return Err(PotentialError::Outside { xi });
    }
    Ok(PotentialEval {
        value: p.value(xi)?,
        grad: if order >= 1 { Some(p.gradient(xi)?) } else { None },
        hessian: if order >= 2 { Some(p.hessian(xi)?) } else { None },
    })
}

#[inline]
fn xlogx(d: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else {
        d * d.ln()
    }
}

/// `v(ξ) = Σ_k δ_k(ξ) log δ_k(ξ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GuilleminPotential {
    poly: Polytope,
    normals: Vec<[f64; 2]>,
    offsets: Vec<f64>,
}

impl GuilleminPotential {
    pub fn new(poly: &Polytope) -> Self {
        GuilleminPotential {
            normals: poly.facets().iter().map(|f| f.normal_f64()).collect(),
            offsets: poly.facets().iter().map(|f| crate::polytope::rational_to_f64(&f.offset)).collect(),
            poly: poly.clone(),
        }
    }

    pub fn polytope(&self) -> &Polytope {
        &self.poly
    }

    pub fn normals(&self) -> &[[f64; 2]] {
        &self.normals
    }

    #[inline]
    pub fn delta(&self, k: usize, xi: [f64; 2]) -> f64 {
        let n = self.normals[k];
        n[0] * xi[0] + n[1] * xi[1] - self.offsets[k]
    }

    fn check(&self, xi: [f64; 2]) -> Result<(), PotentialError> {
        if self.contains(xi) {
            Ok(())
        } else {
            Err(PotentialError::Outside { xi })
        }
    }

    /// Value on the closed polytope, using `0 log 0 = 0` on the boundary.
    pub fn closure_value(&self, xi: [f64; 2]) -> f64 {
        (0..self.normals.len()).map(|k| xlogx(self.delta(k, xi).max(0.0))).sum()
    }

    /// `Σ_k n_k n_kᵀ / δ_k` with the `δ_k` given.
    pub fn hessian_from_deltas(&self, deltas: &[f64]) -> Sym2 {
        let mut h = Sym2::default();
        for (n, &d) in self.normals.iter().zip(deltas) {
            let w = 1.0 / d;
            h.xx += n[0] * n[0] * w;
            h.xy += n[0] * n[1] * w;
            h.yy += n[1] * n[1] * w;
        }
        h
    }

    pub fn raw_hessian(&self, xi: [f64; 2]) -> Sym2 {
        let mut h = Sym2::default();
        for (k, n) in self.normals.iter().enumerate() {
            let w = 1.0 / self.delta(k, xi);
            h.xx += n[0] * n[0] * w;
            h.xy += n[0] * n[1] * w;
            h.yy += n[1] * n[1] * w;
        }
        h
    }
}

impl Potential for GuilleminPotential {
    fn contains(&self, xi: [f64; 2]) -> bool {
        xi[0].is_finite() && xi[1].is_finite() && (0..self.normals.len()).all(|k| self.delta(k, xi) > 0.0)
    }

    fn value(&self, xi: [f64; 2]) -> Result<f64, PotentialError> {
        self.check(xi)?;
        Ok((0..self.normals.len()).map(|k| xlogx(self.delta(k, xi))).sum())
    }

    fn gradient(&self, xi: [f64; 2]) -> Result<[f64; 2], PotentialError> {
        self.check(xi)?;
        let mut g = [0.0; 2];
        for (k, n) in self.normals.iter().enumerate() {
            let l = 1.0 + self.delta(k, xi).ln();
            g[0] += n[0] * l;
            g[1] += n[1] * l;
        }
        Ok(g)
    }

    fn hessian(&self, xi: [f64; 2]) -> Result<HessianEval, PotentialError> {
        self.check(xi)?;
        HessianEval::checked(self.raw_hessian(xi), xi)
    }
}

/// `u(ξ) = |ξ|²/2` on the whole plane, a flat reference potential.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QuadraticPatch;

impl Potential for QuadraticPatch {
    fn contains(&self, xi: [f64; 2]) -> bool {
        xi[0].is_finite() && xi[1].is_finite()
    }

    fn value(&self, xi: [f64; 2]) -> Result<f64, PotentialError> {
        Ok(0.5 * (xi[0] * xi[0] + xi[1] * xi[1]))
    }

    fn gradient(&self, xi: [f64; 2]) -> Result<[f64; 2], PotentialError> {
        Ok(xi)
    }

    fn hessian(&self, _xi: [f64; 2]) -> Result<HessianEval, PotentialError> {
        Ok(HessianEval {
            hess: Sym2::IDENTITY,
            inv: Sym2::IDENTITY,
            det: 1.0,
        })
    }
}

/// Affine function `c + ⟨g, ξ⟩`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Affine {
    pub constant: f64,
    pub linear: [f64; 2],
}

impl Affine {
    pub fn eval(&self, xi: [f64; 2]) -> f64 {
        self.constant + self.linear[0] * xi[0] + self.linear[1] * xi[1]
    }
}

/// `u = v + ψ + ℓ` with `ψ` sampled on the bounding box of a grid.
#[derive(Clone, Debug)]
pub struct SymplecticPotential {
    guillemin: GuilleminPotential,
    grid: Arc<GridSpec>,
    spline: Arc<TensorSpline>,
    psi: SplineData,
    affine: Affine,
}

impl SymplecticPotential {
    /// `u = v`, with `ψ ≡ 0`.
    pub fn guillemin(poly: &Polytope, grid: Arc<GridSpec>) -> Self {
        let spline = Arc::new(TensorSpline::new(grid.nx, grid.ny, grid.h, grid.origin));
        SymplecticPotential {
            guillemin: GuilleminPotential::new(poly),
            psi: SplineData::zeros(grid.nx, grid.ny, grid.h, grid.origin),
            grid,
            spline,
            affine: Affine::default(),
        }
    }

    /// Same potential with `ψ` replaced by values on the active nodes; the
    /// rest of the box is filled by the grid's extrapolation plan.
    pub fn with_active_psi(&self, values: &[f64]) -> Result<Self, PotentialError> {
        if values.len() != self.grid.len() {
            return Err(PotentialError::SizeMismatch {
                got: values.len(),
                expected: self.grid.len(),
            });
        }
        let mut full = vec![0.0; self.grid.box_len()];
        self.grid.extend_to_box(values, &mut full);
        self.with_box_psi(&full)
    }

    /// Same potential with `ψ` given at every point of the bounding box.
    pub fn with_box_psi(&self, values: &[f64]) -> Result<Self, PotentialError> {
        if values.len() != self.grid.box_len() {
            return Err(PotentialError::SizeMismatch {
                got: values.len(),
                expected: self.grid.box_len(),
            });
        }
        Ok(SymplecticPotential {
            psi: self.spline.fit(values),
            ..self.clone()
        })
    }

    /// Samples `ψ = f` over the whole bounding box.
    pub fn with_psi_fn(&self, f: impl Fn([f64; 2]) -> f64) -> Self {
        let g = &self.grid;
        let mut values = vec![0.0; g.box_len()];
        for i in 0..g.nx {
            for j in 0..g.ny {
                values[g.flat(i, j)] = f(g.point(i, j));
            }
        }
        self.with_box_psi(&values).expect("sized from the grid")
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn spline(&self) -> &Arc<TensorSpline> {
        &self.spline
    }

    pub fn guillemin_part(&self) -> &GuilleminPotential {
        &self.guillemin
    }

    pub fn polytope(&self) -> &Polytope {
        self.guillemin.polytope()
    }

    pub fn psi(&self) -> &SplineData {
        &self.psi
    }

    /// `ψ` on the active nodes, in grid order.
    pub fn psi_active(&self) -> Vec<f64> {
        self.grid
            .nodes()
            .iter()
            .map(|n| self.psi.f[self.grid.flat(n.i, n.j)])
            .collect()
    }

    pub fn affine(&self) -> Affine {
        self.affine
    }

    pub fn add_affine(&self, a: Affine) -> Self {
        let mut out = self.clone();
        out.affine.constant += a.constant;
        out.affine.linear[0] += a.linear[0];
        out.affine.linear[1] += a.linear[1];
        out
    }

    /// Adds the affine function making `u(p) = 0` and `∇u(p) = 0`.
    pub fn normalized_at(&self, p: [f64; 2]) -> Result<Self, PotentialError> {
        let u0 = self.value(p)?;
        let g0 = self.gradient(p)?;
        Ok(self.add_affine(Affine {
            constant: -u0 + g0[0] * p[0] + g0[1] * p[1],
            linear: [-g0[0], -g0[1]],
        }))
    }

    /// Value on the closed polytope, with the Guillemin part extended by continuity.
    pub fn closure_value(&self, xi: [f64; 2]) -> f64 {
        self.guillemin.closure_value(xi) + self.psi.eval(xi).value + self.affine.eval(xi)
    }

    /// Hessian of `ψ` at an active node, read from the nodal spline data.
    pub fn psi_node_hessian(&self, node: usize) -> Sym2 {
        let n = &self.grid.nodes()[node];
        let k = self.grid.flat(n.i, n.j);
        Sym2::new(self.psi.fxx[k], self.psi.fxy[k], self.psi.fyy[k])
    }

    /// Hessian of `u` at an active node.
    pub fn node_hessian(&self, node: usize) -> Result<HessianEval, PotentialError> {
        let n = &self.grid.nodes()[node];
        let h = self.guillemin.hessian_from_deltas(&n.deltas).add(&self.psi_node_hessian(node));
        HessianEval::checked(h, n.xi)
    }

    /// Value of `u` at an active node.
    pub fn node_value(&self, node: usize) -> f64 {
        let n = &self.grid.nodes()[node];
        let v: f64 = n.deltas.iter().map(|&d| xlogx(d)).sum();
        v + self.psi.f[self.grid.flat(n.i, n.j)] + self.affine.eval(n.xi)
    }
}

impl Potential for SymplecticPotential {
    fn contains(&self, xi: [f64; 2]) -> bool {
        self.guillemin.contains(xi)
    }

    fn value(&self, xi: [f64; 2]) -> Result<f64, PotentialError> {
        Ok(self.guillemin.value(xi)? + self.psi.eval(xi).value + self.affine.eval(xi))
    }

    fn gradient(&self, xi: [f64; 2]) -> Result<[f64; 2], PotentialError> {
        let g = self.guillemin.gradient(xi)?;
        let p = self.psi.eval(xi).grad;
        let a = self.affine.linear;
        Ok([g[0] + p[0] + a[0], g[1] + p[1] + a[1]])
    }

    fn hessian(&self, xi: [f64; 2]) -> Result<HessianEval, PotentialError> {
        if !self.contains(xi) {
            return Err(PotentialError::Outside { xi });
        }
        let p = self.psi.eval(xi).hess;
        let h = self.guillemin.raw_hessian(xi).add(&Sym2::new(p[0], p[1], p[2]));
        HessianEval::checked(h, xi)
    }
}

/// Gradient coordinates `x = ∇u(ξ)`, the Legendre dual `f(x) = ⟨x, ξ⟩ − u(ξ)`
/// and `Hess f(x) = (Hess u(ξ))⁻¹`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LegendrePoint {
    pub xi: [f64; 2],
    pub x: [f64; 2],
    pub dual_value: f64,
    pub dual_hessian: Sym2,
}

pub fn legendre_forward(p: &dyn Potential, xi: [f64; 2]) -> Result<LegendrePoint, PotentialError> {
    let e = eval_u(p, xi, 2)?;
    let x = e.grad.expect("order 2");
    Ok(LegendrePoint {
        xi,
        x,
        dual_value: x[0] * xi[0] + x[1] * xi[1] - e.value,
        dual_hessian: e.hessian.expect("order 2").inv,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            max_iters: 50,
        }
    }
}

pub fn legendre_inverse(p: &dyn Potential, x: [f64; 2], seed: [f64; 2]) -> Result<[f64; 2], PotentialError> {
    legendre_inverse_with(p, x, seed, NewtonOptions::default())
}

/// Solves `∇u(ξ) = x` by Newton's method, halving steps until the iterate
/// stays inside and `u(ξ) − ⟨x, ξ⟩` decreases.
pub fn legendre_inverse_with(
    p: &dyn Potential,
    x: [f64; 2],
    seed: [f64; 2],
    opts: NewtonOptions,
) -> Result<[f64; 2], PotentialError> {
    if !p.contains(seed) {
        return Err(PotentialError::Outside { xi: seed });
    }
    let merit = |xi: [f64; 2]| p.value(xi).map(|u| u - x[0] * xi[0] - x[1] * xi[1]);
    let mut xi = seed;
    let mut phi = merit(xi)?;
    let mut residual = f64::INFINITY;
    for _ in 0..=opts.max_iters {
        let g = p.gradient(xi)?;
        let r = [g[0] - x[0], g[1] - x[1]];
        residual = r[0].hypot(r[1]);
        if residual <= opts.tol {
            return Ok(xi);
        }
        let h = p.hessian(xi)?;
        let step = h.inv.apply(r);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = [xi[0] - t * step[0], xi[1] - t * step[1]];
            if p.contains(cand) {
                if let Ok(c) = merit(cand) {
                    if c <= phi + 1e-14 * phi.abs().max(1.0) {
                        xi = cand;
                        phi = c;
                        accepted = true;
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(PotentialError::NoConvergence { last: xi, residual })
}

#[derive(Clone, Copy, PartialEq)]
struct Frontier {
    dist: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, o: &Self) -> Ordering {
        o.dist.total_cmp(&self.dist).then_with(|| o.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Length of the shortest path between two grid nodes in the 8-neighbour
/// graph, each edge weighted by `√(Δξᵀ Hess u(midpoint) Δξ)`.
///
/// Paths are restricted to grid directions, so the result is biased upward
/// and converges to the Calabi distance only under refinement.
pub fn calabi_distance(pot: &dyn Potential, p: [f64; 2], q: [f64; 2], grid: &GridSpec) -> Result<f64, PotentialError> {
    let find = |xi: [f64; 2]| -> Result<usize, PotentialError> {
        let k = grid.nearest_node(xi);
        let n = grid.nodes()[k].xi;
        if (n[0] - xi[0]).abs() <= 1e-9 * grid.h && (n[1] - xi[1]).abs() <= 1e-9 * grid.h {
            Ok(k)
        } else {
            Err(PotentialError::NotANode { xi })
        }
    };
    let (src, dst) = (find(p)?, find(q)?);
    let mut dist = vec![f64::INFINITY; grid.len()];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Frontier { dist: 0.0, node: src });
    while let Some(Frontier { dist: d, node }) = heap.pop() {
        if node == dst {
            return Ok(d);
        }
        if d > dist[node] {
            continue;
        }
        let n = &grid.nodes()[node];
        for di in -1isize..=1 {
            for dj in -1isize..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let Some(m) = grid.active_at(n.i as isize + di, n.j as isize + dj) else {
                    continue;
                };
                let b = grid.nodes()[m].xi;
                let step = [b[0] - n.xi[0], b[1] - n.xi[1]];
                let mid = [0.5 * (b[0] + n.xi[0]), 0.5 * (b[1] + n.xi[1])];
                let w = pot.hessian(mid)?.hess.quad(step).sqrt();
                if d + w < dist[m] {
                    dist[m] = d + w;
                    heap.push(Frontier { dist: d + w, node: m });
                }
            }
        }
    }
    Err(PotentialError::Disconnected)
}
