//! Uniformly refined fan triangulations of a polygon from its base point,
//! with the hinge constraints characterizing convex piecewise-linear functions.

use std::collections::HashMap;

use serde::Serialize;

use crate::polytope::Polytope;

/// Convexity across one interior edge `(p, q)` shared by the cells with
/// opposite vertices `r` and `s`: `Σ coeff·g ≥ 0`, i.e. `g(s)` lies above
/// the affine extension of `g` from cell `(p, q, r)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Hinge {
    pub nodes: [usize; 4],
    pub coeffs: [f64; 4],
}

impl Hinge {
    pub fn eval(&self, g: &[f64]) -> f64 {
        self.nodes.iter().zip(&self.coeffs).map(|(&n, &c)| c * g[n]).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub facet: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Triangulation {
    /// Subdivisions per fan edge.
    pub size: usize,
    pub nodes: Vec<[f64; 2]>,
    /// Counterclockwise cells.
    pub cells: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
    pub base: usize,
    pub hinges: Vec<Hinge>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Key {
    Base,
    Spoke(usize, usize),
    Inner(usize, usize, usize),
}

impl Triangulation {
    /// Fan triangles `(p_o, v_k, v_{k+1})`, each split into `size²` similar cells.
    pub fn fan(poly: &Polytope, size: usize) -> Self {
        assert!(size >= 1);
        let p = poly.base_point();
        let verts = poly.vertices();
        let m = verts.len();
        let mut ids: HashMap<Key, usize> = HashMap::new();
        let mut nodes = Vec::new();
        let mut cells = Vec::new();
        let mut boundary = Vec::new();
        let n = size;
        for k in 0..m {
            let a = verts[k].point;
            let b = verts[(k + 1) % m].point;
            let facet = verts[k].facets.1;
            let mut id = |i: usize, j: usize| -> usize {
                let key = match (i, j) {
                    (0, 0) => Key::Base,
                    (i, 0) => Key::Spoke(k, i),
                    (0, j) => Key::Spoke((k + 1) % m, j),
                    (i, j) => Key::Inner(k, i, j),
                };
                *ids.entry(key).or_insert_with(|| {
                    let (s, t) = (i as f64 / n as f64, j as f64 / n as f64);
                    nodes.push([
                        p[0] + s * (a[0] - p[0]) + t * (b[0] - p[0]),
                        p[1] + s * (a[1] - p[1]) + t * (b[1] - p[1]),
                    ]);
                    nodes.len() - 1
                })
            };
            for i in 0..n {
                for j in 0..(n - i) {
                    cells.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
                    if i + j + 1 < n {
                        cells.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
                    }
                }
            }
            for i in (1..=n).rev() {
                boundary.push(BoundaryEdge {
                    nodes: [id(i, n - i), id(i - 1, n - i + 1)],
                    facet,
                });
            }
        }
        let base = ids[&Key::Base];
        let hinges = hinges(&nodes, &cells);
        Triangulation {
            size,
            nodes,
            cells,
            boundary,
            base,
            hinges,
        }
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        let [a, b, d] = self.cells[c].map(|i| self.nodes[i]);
        0.5 * ((b[0] - a[0]) * (d[1] - a[1]) - (b[1] - a[1]) * (d[0] - a[0]))
    }

    /// Value at `xi` of the piecewise-linear function with node values `g`.
    pub fn interpolate(&self, g: &[f64], xi: [f64; 2]) -> Option<f64> {
        self.cells.iter().find_map(|c| {
            let l = barycentric(c.map(|i| self.nodes[i]), xi);
            (l.iter().all(|&v| v >= -1e-12)).then(|| l[0] * g[c[0]] + l[1] * g[c[1]] + l[2] * g[c[2]])
        })
    }
}

pub fn barycentric(t: [[f64; 2]; 3], x: [f64; 2]) -> [f64; 3] {
    let [a, b, c] = t;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (x[1] - a[1]) * (c[0] - a[0])) / det;
    let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0])) / det;
    [1.0 - l1 - l2, l1, l2]
}

fn hinges(nodes: &[[f64; 2]], cells: &[[usize; 3]]) -> Vec<Hinge> {
    let mut by_edge: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
    for (ci, c) in cells.iter().enumerate() {
        for e in 0..3 {
            let (p, q, r) = (c[e], c[(e + 1) % 3], c[(e + 2) % 3]);
            by_edge.entry((p.min(q), p.max(q))).or_default().push((ci, r));
        }
    }
    let mut edges: Vec<_> = by_edge.into_iter().filter(|(_, v)| v.len() == 2).collect();
    edges.sort_by_key(|(e, _)| *e);
    edges
        .into_iter()
        .map(|((p, q), v)| {
            let (r, s) = (v[0].1, v[1].1);
            let l = barycentric([nodes[p], nodes[q], nodes[r]], nodes[s]);
            let mut coeffs = [-l[0], -l[1], -l[2], 1.0];
            let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            for c in &mut coeffs {
                *c /= scale;
            }
            Hinge {
                nodes: [p, q, r, s],
                coeffs,
            }
        })
        .collect()
}
