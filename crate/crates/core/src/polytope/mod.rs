//! Two-dimensional Delzant polytopes in facet form.
//!
//! A polytope is stored as the list of its facet inequalities
//! `δ_k(ξ) = ⟨n_k, ξ⟩ − c_k > 0` with primitive integer normals and exact
//! rational offsets. Vertices, edges and all combinatorial predicates are
//! derived in exact rational arithmetic; floating point only appears in the
//! cached coordinates used by the numerical modules.

mod grid;

pub use grid::{build_grid, FillStep, GridError, GridNode, GridSpec};

use std::cmp::Ordering;
use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Exact rational scalar used for offsets, vertices and bundle coefficients.
pub type Rational = Ratio<i128>;

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolytopeError {
    #[error("polytope has no facets")]
    NoFacets,
    #[error("facet {facet} has non-primitive normal ({}, {})", normal[0], normal[1])]
    NonPrimitiveNormal { facet: usize, normal: [i64; 2] },
    #[error("facet {facet} duplicates the direction of facet {other}")]
    ParallelFacets { facet: usize, other: usize },
    #[error("the facet inequalities do not bound a region")]
    Unbounded,
    #[error("the facet inequalities have empty interior")]
    EmptyInterior,
    #[error("facet {facet} does not support an edge of the polytope")]
    RedundantFacet { facet: usize },
    #[error("not Delzant: facets {} and {} meet at ({}, {}) with determinant {determinant}",
        facets.0, facets.1, vertex[0], vertex[1])]
    NotDelzant {
        vertex: [f64; 2],
        facets: (usize, usize),
        determinant: i64,
    },
    #[error("base point ({}, {}) is not strictly inside the polytope", point[0], point[1])]
    BasePointNotInterior { point: [f64; 2] },
    #[error("facet index {0} out of range")]
    FacetOutOfRange(usize),
}

/// One facet inequality `⟨normal, ξ⟩ − offset ≥ 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Facet {
    pub normal: [i64; 2],
    pub offset: Rational,
}

impl Facet {
    pub fn new(normal: [i64; 2], offset: Rational) -> Self {
        Facet { normal, offset }
    }

    pub fn from_ints(normal: [i64; 2], offset: i64) -> Self {
        Facet::new(normal, Rational::from_integer(offset as i128))
    }

    #[inline]
    pub fn delta(&self, xi: [f64; 2]) -> f64 {
        self.normal[0] as f64 * xi[0] + self.normal[1] as f64 * xi[1] - rational_to_f64(&self.offset)
    }

    pub fn delta_exact(&self, p: &[Rational; 2]) -> Rational {
        p[0] * Rational::from_integer(self.normal[0] as i128)
            + p[1] * Rational::from_integer(self.normal[1] as i128)
            - self.offset
    }

    pub fn normal_f64(&self) -> [f64; 2] {
        [self.normal[0] as f64, self.normal[1] as f64]
    }

    fn is_primitive(&self) -> bool {
        let g = (self.normal[0] as i128).gcd(&(self.normal[1] as i128));
        g == 1
    }
}

impl fmt::Display for Facet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "normal = [{}, {}], offset = {}", self.normal[0], self.normal[1], self.offset)
    }
}

fn cross(a: [i64; 2], b: [i64; 2]) -> i64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Per-vertex entry of a [`ValidationReport`].
#[derive(Clone, Debug, PartialEq)]
pub struct VertexCheck {
    pub vertex: [Rational; 2],
    pub facets: (usize, usize),
    pub determinant: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    /// Vertices in counterclockwise order with the two facets meeting there.
    pub vertices: Vec<VertexCheck>,
    pub valid: bool,
}

impl ValidationReport {
    pub fn first_failure(&self) -> Option<&VertexCheck> {
        self.vertices.iter().find(|v| v.determinant.abs() != 1)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.vertices {
            writeln!(
                f,
                "vertex ({}, {}) facets ({}, {}) det {}",
                v.vertex[0], v.vertex[1], v.facets.0, v.facets.1, v.determinant
            )?;
        }
        write!(f, "delzant: {}", if self.valid { "valid" } else { "INVALID" })
    }
}

/// Checks primitivity, boundedness, non-emptiness and the Delzant
/// determinant condition of a facet list, all in exact arithmetic.
pub fn validate_delzant(facets: &[Facet]) -> Result<ValidationReport, PolytopeError> {
    let (vertices, _) = combinatorics(facets)?;
    let mut valid = true;
    let checks = vertices
        .into_iter()
        .map(|(p, (a, b))| {
            let det = cross(facets[a].normal, facets[b].normal);
            if det.abs() != 1 {
                valid = false;
            }
            VertexCheck {
                vertex: p,
                facets: (a, b),
                determinant: det,
            }
        })
        .collect();
    Ok(ValidationReport {
        vertices: checks,
        valid,
    })
}

type ExactVertex = ([Rational; 2], (usize, usize));

/// Vertices in counterclockwise order, each with its (incoming, outgoing)
/// facet pair, plus for every facet the index of its start vertex.
fn combinatorics(facets: &[Facet]) -> Result<(Vec<ExactVertex>, Vec<usize>), PolytopeError> {
    if facets.is_empty() {
        return Err(PolytopeError::NoFacets);
    }
    for (k, f) in facets.iter().enumerate() {
        if !f.is_primitive() {
            return Err(PolytopeError::NonPrimitiveNormal {
                facet: k,
                normal: f.normal,
            });
        }
    }
    for a in 0..facets.len() {
        for b in (a + 1)..facets.len() {
            let (na, nb) = (facets[a].normal, facets[b].normal);
            if cross(na, nb) == 0 && na[0] * nb[0] + na[1] * nb[1] > 0 {
                return Err(PolytopeError::ParallelFacets { facet: b, other: a });
            }
        }
    }
    // Bounded iff the normals positively span the plane: consecutive normals
    // (sorted by angle) turn by strictly less than π.
    if facets.len() < 3 {
        return Err(PolytopeError::Unbounded);
    }
    let mut order: Vec<usize> = (0..facets.len()).collect();
    order.sort_by(|&a, &b| angle_cmp(facets[a].normal, facets[b].normal));
    for w in 0..order.len() {
        let a = facets[order[w]].normal;
        let b = facets[order[(w + 1) % order.len()]].normal;
        if cross(a, b) <= 0 {
            return Err(PolytopeError::Unbounded);
        }
    }

    // Feasible pairwise intersections.
    let mut points: Vec<[Rational; 2]> = Vec::new();
    for a in 0..facets.len() {
        for b in (a + 1)..facets.len() {
            let (fa, fb) = (&facets[a], &facets[b]);
            let det = cross(fa.normal, fb.normal);
            if det == 0 {
                continue;
            }
            let det = Rational::from_integer(det as i128);
            let x = (fa.offset * Rational::from_integer(fb.normal[1] as i128)
                - fb.offset * Rational::from_integer(fa.normal[1] as i128))
                / det;
            let y = (fb.offset * Rational::from_integer(fa.normal[0] as i128)
                - fa.offset * Rational::from_integer(fb.normal[0] as i128))
                / det;
            let p = [x, y];
            if facets.iter().all(|f| !f.delta_exact(&p).is_negative()) && !points.contains(&p) {
                points.push(p);
            }
        }
    }
    if points.len() < 3 {
        return Err(PolytopeError::EmptyInterior);
    }
    let p0 = points[0];
    let d1 = [points[1][0] - p0[0], points[1][1] - p0[1]];
    let collinear = points.iter().all(|p| {
        let d = [p[0] - p0[0], p[1] - p0[1]];
        (d1[0] * d[1] - d1[1] * d[0]).is_zero()
    });
    if collinear {
        return Err(PolytopeError::EmptyInterior);
    }

    // Every facet must carry an edge (two distinct vertices).
    let mut on_facet: Vec<Vec<usize>> = vec![Vec::new(); facets.len()];
    for (pi, p) in points.iter().enumerate() {
        for (k, f) in facets.iter().enumerate() {
            if f.delta_exact(p).is_zero() {
                on_facet[k].push(pi);
            }
        }
    }
    for (k, vs) in on_facet.iter().enumerate() {
        if vs.len() < 2 {
            return Err(PolytopeError::RedundantFacet { facet: k });
        }
    }

    // Counterclockwise traversal: facets sorted by normal angle appear in
    // counterclockwise order along the boundary; the edge of facet order[w]
    // ends at its intersection with order[w+1].
    let m = order.len();
    let mut vertices = Vec::with_capacity(m);
    let mut start_vertex = vec![0usize; facets.len()];
    for w in 0..m {
        let a = order[w];
        let b = order[(w + 1) % m];
        let p = on_facet[a]
            .iter()
            .find(|pi| on_facet[b].contains(pi))
            .copied()
            .ok_or(PolytopeError::RedundantFacet { facet: b })?;
        vertices.push((points[p], (a, b)));
    }
    for w in 0..m {
        // facet order[w] starts at the vertex shared with its predecessor.
        let k = order[w];
        start_vertex[k] = (w + m - 1) % m;
    }
    Ok((vertices, start_vertex))
}

fn angle_cmp(a: [i64; 2], b: [i64; 2]) -> Ordering {
    let half = |v: [i64; 2]| if v[1] > 0 || (v[1] == 0 && v[0] > 0) { 0 } else { 1 };
    half(a)
        .cmp(&half(b))
        .then_with(|| 0.cmp(&cross(a, b)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub exact: [Rational; 2],
    pub point: [f64; 2],
    /// The two facets meeting here, in counterclockwise order: the edge of
    /// `facets.0` ends here and the edge of `facets.1` starts here.
    pub facets: (usize, usize),
}

/// Edge of the polytope carried by a facet, oriented counterclockwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub facet: usize,
    pub start: usize,
    pub end: usize,
}

/// Measure `dσ` on one facet, normalized by `dσ ∧ dδ_k = dμ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FacetMeasure {
    pub facet: usize,
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub euclidean_length: f64,
    /// Density of `dσ` with respect to Euclidean arc length, `1/|n_k|`.
    pub density: f64,
}

impl FacetMeasure {
    pub fn total_mass(&self) -> f64 {
        self.density * self.euclidean_length
    }

    pub fn point_at(&self, t: f64) -> [f64; 2] {
        [
            self.start[0] + t * (self.end[0] - self.start[0]),
            self.start[1] + t * (self.end[1] - self.start[1]),
        ]
    }
}

/// A validated two-dimensional Delzant polytope with a base point `p_o`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polytope {
    facets: Vec<Facet>,
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    base_point: [f64; 2],
}

impl Polytope {
    pub fn new(facets: Vec<Facet>, base_point: [f64; 2]) -> Result<Self, PolytopeError> {
        let report = validate_delzant(&facets)?;
        if let Some(bad) = report.first_failure() {
            return Err(PolytopeError::NotDelzant {
                vertex: [rational_to_f64(&bad.vertex[0]), rational_to_f64(&bad.vertex[1])],
                facets: bad.facets,
                determinant: bad.determinant,
            });
        }
        let (exact, start_vertex) = combinatorics(&facets)?;
        let vertices: Vec<Vertex> = exact
            .into_iter()
            .map(|(p, fs)| Vertex {
                point: [rational_to_f64(&p[0]), rational_to_f64(&p[1])],
                exact: p,
                facets: fs,
            })
            .collect();
        let n = vertices.len();
        let edges = (0..facets.len())
            .map(|k| Edge {
                facet: k,
                start: start_vertex[k],
                end: (start_vertex[k] + 1) % n,
            })
            .collect();
        let poly = Polytope {
            facets,
            vertices,
            edges,
            base_point,
        };
        if !poly.is_interior(base_point) {
            return Err(PolytopeError::BasePointNotInterior { point: base_point });
        }
        Ok(poly)
    }

    /// Builds the polytope with the vertex centroid as base point.
    pub fn with_centroid_base(facets: Vec<Facet>) -> Result<Self, PolytopeError> {
        let (exact, _) = combinatorics(&facets)?;
        let n = exact.len() as f64;
        let mut c = [0.0; 2];
        for (p, _) in &exact {
            c[0] += rational_to_f64(&p[0]) / n;
            c[1] += rational_to_f64(&p[1]) / n;
        }
        Polytope::new(facets, c)
    }

    /// `[0, side]²`
    pub fn square(side: i64) -> Self {
        let facets = vec![
            Facet::from_ints([1, 0], 0),
            Facet::from_ints([0, 1], 0),
            Facet::from_ints([-1, 0], -side),
            Facet::from_ints([0, -1], -side),
        ];
        let c = side as f64 / 2.0;
        Polytope::new(facets, [c, c]).expect("square is Delzant")
    }

    /// Axis-aligned square `[lo, hi]²`.
    pub fn square_between(lo: i64, hi: i64) -> Self {
        let facets = vec![
            Facet::from_ints([1, 0], lo),
            Facet::from_ints([0, 1], lo),
            Facet::from_ints([-1, 0], -hi),
            Facet::from_ints([0, -1], -hi),
        ];
        let c = (lo + hi) as f64 / 2.0;
        Polytope::new(facets, [c, c]).expect("square is Delzant")
    }

    /// Standard simplex `ξ₁, ξ₂ ≥ 0, ξ₁ + ξ₂ ≤ 1` with base point at the centroid.
    pub fn standard_simplex() -> Self {
        let facets = vec![
            Facet::from_ints([1, 0], 0),
            Facet::from_ints([0, 1], 0),
            Facet::from_ints([-1, -1], -1),
        ];
        Polytope::new(facets, [1.0 / 3.0, 1.0 / 3.0]).expect("simplex is Delzant")
    }

    pub fn with_base_point(&self, base_point: [f64; 2]) -> Result<Self, PolytopeError> {
        Polytope::new(self.facets.clone(), base_point)
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edges in counterclockwise boundary order.
    pub fn boundary_cycle(&self) -> Vec<Edge> {
        let mut es = self.edges.clone();
        es.sort_by_key(|e| e.start);
        es
    }

    pub fn base_point(&self) -> [f64; 2] {
        self.base_point
    }

    pub fn delta(&self, k: usize, xi: [f64; 2]) -> f64 {
        self.facets[k].delta(xi)
    }

    pub fn deltas(&self, xi: [f64; 2]) -> Vec<f64> {
        self.facets.iter().map(|f| f.delta(xi)).collect()
    }

    pub fn min_delta(&self, xi: [f64; 2]) -> f64 {
        self.facets.iter().map(|f| f.delta(xi)).fold(f64::INFINITY, f64::min)
    }

    pub fn is_interior(&self, xi: [f64; 2]) -> bool {
        xi[0].is_finite() && xi[1].is_finite() && self.min_delta(xi) > 0.0
    }

    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v.point[d]);
                hi[d] = hi[d].max(v.point[d]);
            }
        }
        (lo, hi)
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        let mut a = 0.0;
        for i in 0..n {
            let p = self.vertices[i].point;
            let q = self.vertices[(i + 1) % n].point;
            a += p[0] * q[1] - p[1] * q[0];
        }
        0.5 * a
    }

    /// Euclidean diameter (attained between two vertices).
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.vertices {
            for b in &self.vertices {
                d = d.max(((a.point[0] - b.point[0]).powi(2) + (a.point[1] - b.point[1]).powi(2)).sqrt());
            }
        }
        d
    }

    pub fn edge_of_facet(&self, k: usize) -> Edge {
        self.edges[k]
    }

    /// Primitive integer direction of the edge carried by facet `k`,
    /// oriented counterclockwise.
    pub fn edge_direction(&self, k: usize) -> [i64; 2] {
        let n = self.facets[k].normal;
        [n[1], -n[0]]
    }

    pub fn boundary_measure(&self, k: usize) -> Result<FacetMeasure, PolytopeError> {
        if k >= self.facets.len() {
            return Err(PolytopeError::FacetOutOfRange(k));
        }
        let e = self.edges[k];
        let start = self.vertices[e.start].point;
        let end = self.vertices[e.end].point;
        let n = self.facets[k].normal_f64();
        let euclidean_length = ((end[0] - start[0]).powi(2) + (end[1] - start[1]).powi(2)).sqrt();
        Ok(FacetMeasure {
            facet: k,
            start,
            end,
            euclidean_length,
            density: 1.0 / (n[0] * n[0] + n[1] * n[1]).sqrt(),
        })
    }

    /// Total `dσ`-mass of the boundary.
    pub fn boundary_mass(&self) -> f64 {
        (0..self.facets.len())
            .map(|k| self.boundary_measure(k).map(|m| m.total_mass()).unwrap_or(0.0))
            .sum()
    }

    /// Image under `ξ ↦ Mξ + t` with `M ∈ GL(2, ℤ)` and integer `t`.
    pub fn transform(&self, m: [[i64; 2]; 2], t: [i64; 2]) -> Result<Self, PolytopeError> {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        assert!(det.abs() == 1, "transform must be unimodular");
        // M^{-T} = (1/det) [[m11, -m10], [-m01, m00]]
        let inv_t = [[m[1][1] * det, -m[1][0] * det], [-m[0][1] * det, m[0][0] * det]];
        let facets = self
            .facets
            .iter()
            .map(|f| {
                let n = [
                    inv_t[0][0] * f.normal[0] + inv_t[0][1] * f.normal[1],
                    inv_t[1][0] * f.normal[0] + inv_t[1][1] * f.normal[1],
                ];
                let shift = Rational::from_integer((n[0] * t[0] + n[1] * t[1]) as i128);
                Facet::new(n, f.offset + shift)
            })
            .collect();
        let p = self.base_point;
        let base = [
            m[0][0] as f64 * p[0] + m[0][1] as f64 * p[1] + t[0] as f64,
            m[1][0] as f64 * p[0] + m[1][1] as f64 * p[1] + t[1] as f64,
        ];
        Polytope::new(facets, base)
    }
}

/// Integral affine chart adapted to an edge: the first coordinate is the
/// facet function of the edge and the second runs along the edge, with the
/// origin at a chosen point `q` of the edge.
///
/// Also carries the one-parameter shear `(ξ₁, ξ₂) ↦ (ξ₁, aξ₁ + ξ₂)` and the
/// dual map on gradient coordinates `(x₁, x₂) ↦ (x₁ − a x₂, x₂)`, which keep
/// the pairing `⟨x, ξ⟩` invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeChart {
    pub facet: usize,
    pub origin: [f64; 2],
    first: [f64; 2],
    second: [f64; 2],
}

impl EdgeChart {
    /// Chart for the edge of facet `k`, centered at `t ∈ [0, 1]` along it.
    pub fn new(poly: &Polytope, k: usize, t: f64) -> Result<Self, PolytopeError> {
        let m = poly.boundary_measure(k)?;
        let e = poly.edge_of_facet(k);
        // The neighbouring facet at the start vertex completes a lattice basis.
        let other = poly.vertices()[e.start].facets.0;
        let n = poly.facets()[k].normal_f64();
        let o = poly.facets()[other].normal_f64();
        let origin = m.point_at(t);
        // Orient the second functional to increase along the edge.
        let dir = poly.edge_direction(k);
        let sign = if o[0] * dir[0] as f64 + o[1] * dir[1] as f64 >= 0.0 { 1.0 } else { -1.0 };
        Ok(EdgeChart {
            facet: k,
            origin,
            first: n,
            second: [sign * o[0], sign * o[1]],
        })
    }

    pub fn to_chart(&self, xi: [f64; 2]) -> [f64; 2] {
        let d = [xi[0] - self.origin[0], xi[1] - self.origin[1]];
        [
            self.first[0] * d[0] + self.first[1] * d[1],
            self.second[0] * d[0] + self.second[1] * d[1],
        ]
    }

    pub fn sheared(&self, xi: [f64; 2], a: f64) -> [f64; 2] {
        let c = self.to_chart(xi);
        [c[0], a * c[0] + c[1]]
    }

    /// Gradient coordinates in the chart `[x₁, x₂]` mapped to the sheared chart.
    pub fn sheared_dual(x: [f64; 2], a: f64) -> [f64; 2] {
        [x[0] - a * x[1], x[1]]
    }

    /// Linear part of the chart map as a matrix acting on `ξ − origin`.
    pub fn linear_part(&self) -> [[f64; 2]; 2] {
        [self.first, self.second]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det_oracle(a: [i64; 2], b: [i64; 2]) -> i64 {
        a[0] * b[1] - a[1] * b[0]
    }

    #[test]
    fn unit_square_is_delzant() {
        let facets = vec![
            Facet::from_ints([1, 0], 0),
            Facet::from_ints([0, 1], 0),
            Facet::from_ints([-1, 0], -1),
            Facet::from_ints([0, -1], -1),
        ];
        let r = validate_delzant(&facets).unwrap();
        assert!(r.valid);
        assert_eq!(r.vertices.len(), 4);
        assert!(r.vertices.iter().all(|v| v.determinant.abs() == 1));
    }

    #[test]
    fn standard_simplex_is_delzant() {
        let p = Polytope::standard_simplex();
        assert_eq!(p.vertices().len(), 3);
        assert!((p.area() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn triangle_with_det_two_vertex_is_rejected() {
        let facets = vec![
            Facet::from_ints([1, 0], 0),
            Facet::from_ints([0, 1], 0),
            Facet::from_ints([-2, -1], -2),
        ];
        let r = validate_delzant(&facets).unwrap();
        assert!(!r.valid);
        let bad = r.first_failure().unwrap();
        let pair = (facets[bad.facets.0].normal, facets[bad.facets.1].normal);
        assert!(pair == ([0, 1], [-2, -1]) || pair == ([-2, -1], [0, 1]));
        assert_eq!(bad.determinant.abs(), det_oracle([0, 1], [-2, -1]).abs());
        assert_eq!(bad.determinant.abs(), 2);
        assert_eq!(bad.vertex, [Rational::from_integer(1), Rational::from_integer(0)]);
        assert!(matches!(
            Polytope::new(facets, [0.2, 0.2]),
            Err(PolytopeError::NotDelzant { determinant, .. }) if determinant.abs() == 2
        ));
    }

    #[test]
    fn structural_errors_are_distinct() {
        let strip = vec![Facet::from_ints([1, 0], 0), Facet::from_ints([-1, 0], -1), Facet::from_ints([0, 1], 0)];
        assert_eq!(validate_delzant(&strip), Err(PolytopeError::Unbounded));
        let empty = vec![
            Facet::from_ints([1, 0], 2),
            Facet::from_ints([0, 1], 0),
            Facet::from_ints([-1, -1], -1),
        ];
        assert_eq!(validate_delzant(&empty), Err(PolytopeError::EmptyInterior));
        let non_primitive = vec![
            Facet::from_ints([2, 0], 0),
            Facet::from_ints([0, 1], 0),
            Facet::from_ints([-1, -1], -1),
        ];
        assert_eq!(
            validate_delzant(&non_primitive),
            Err(PolytopeError::NonPrimitiveNormal { facet: 0, normal: [2, 0] })
        );
        assert_eq!(validate_delzant(&[]), Err(PolytopeError::NoFacets));
        let redundant = vec![
            Facet::from_ints([1, 0], 0),
            Facet::from_ints([0, 1], 0),
            Facet::from_ints([-1, -1], -1),
            Facet::from_ints([-1, 1], -5),
        ];
        assert_eq!(validate_delzant(&redundant), Err(PolytopeError::RedundantFacet { facet: 3 }));
    }

    #[test]
    fn rational_offsets_are_exact() {
        let facets = vec![
            Facet::new([1, 0], Rational::new(1, 3)),
            Facet::new([0, 1], Rational::new(1, 3)),
            Facet::new([-1, -1], Rational::new(-5, 3)),
        ];
        let r = validate_delzant(&facets).unwrap();
        assert!(r.valid);
        assert!(r
            .vertices
            .iter()
            .any(|v| v.vertex == [Rational::new(4, 3), Rational::new(1, 3)]));
    }

    #[test]
    fn base_point_must_be_interior() {
        let facets = Polytope::square(1).facets().to_vec();
        assert!(matches!(
            Polytope::new(facets, [1.0, 0.5]),
            Err(PolytopeError::BasePointNotInterior { .. })
        ));
    }

    #[test]
    fn boundary_measures() {
        let sq = Polytope::square(1);
        let m0 = sq.boundary_measure(0).unwrap();
        assert_eq!(m0.density, 1.0);
        assert!((m0.total_mass() - 1.0).abs() < 1e-15);

        let s = Polytope::standard_simplex();
        let hyp = s.boundary_measure(2).unwrap();
        assert!((hyp.euclidean_length - 2f64.sqrt()).abs() < 1e-15);
        assert!((hyp.total_mass() - 1.0).abs() < 1e-15);

        let sq3 = Polytope::square(3);
        assert!((sq3.boundary_measure(0).unwrap().total_mass() - 3.0).abs() < 1e-15);
        assert!(matches!(sq.boundary_measure(7), Err(PolytopeError::FacetOutOfRange(7))));
    }

    #[test]
    fn edges_follow_counterclockwise_cycle() {
        let p = Polytope::standard_simplex();
        for e in p.edges() {
            let a = p.vertices()[e.start].point;
            let b = p.vertices()[e.end].point;
            assert!(p.delta(e.facet, a).abs() < 1e-15);
            assert!(p.delta(e.facet, b).abs() < 1e-15);
            // interior lies to the left of a ccw edge
            let d = p.edge_direction(e.facet);
            let len = [b[0] - a[0], b[1] - a[1]];
            assert!(d[0] as f64 * len[0] + d[1] as f64 * len[1] > 0.0);
        }
        assert!(p.area() > 0.0);
    }

    #[test]
    fn edge_chart_shear_preserves_pairing() {
        let p = Polytope::standard_simplex();
        let chart = EdgeChart::new(&p, 2, 0.5).unwrap();
        let xi = [0.2, 0.3];
        let c = chart.to_chart(xi);
        assert!(c[0] > 0.0, "interior lies on the positive side of the edge coordinate");
        let x = [0.7, -1.3];
        for &a in &[0.0, 0.5, -2.0] {
            let s = chart.sheared(xi, a);
            let sx = EdgeChart::sheared_dual(x, a);
            let lhs = s[0] * sx[0] + s[1] * sx[1];
            let rhs = c[0] * x[0] + c[1] * x[1];
            assert!((lhs - rhs).abs() < 1e-12);
        }
        let l = chart.linear_part();
        let det = l[0][0] * l[1][1] - l[0][1] * l[1][0];
        assert_eq!(det.abs(), 1.0);
    }
}
