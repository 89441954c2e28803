//! Tensor-product grids clipped to a polytope.

use thiserror::Error;

use super::Polytope;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid spacing must be positive and finite (got h = {h}, h_min = {h_min})")]
    InvalidSpacing { h: f64, h_min: f64 },
    #[error("no grid node of spacing {h} has all facet distances >= {h_min}")]
    Empty { h: f64, h_min: f64 },
    #[error("grid too large: {0} points in the bounding box")]
    TooLarge(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridNode {
    pub i: usize,
    pub j: usize,
    pub xi: [f64; 2],
    pub deltas: Vec<f64>,
    pub nearest_facet: usize,
}

impl GridNode {
    pub fn min_delta(&self) -> f64 {
        self.deltas[self.nearest_facet]
    }
}

/// One step of the plan filling bounding-box points outside the active set.
#[derive(Clone, Debug, PartialEq)]
pub struct FillStep {
    pub target: usize,
    pub sources: Vec<(usize, f64)>,
}

/// Active nodes of a tensor grid over the bounding box of a polytope.
///
/// Points of the full box are addressed by `flat = i * ny + j`; active nodes
/// (those with `min_k δ_k ≥ h_min`) are listed in lexicographic `(i, j)` order.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub h: f64,
    pub h_min: f64,
    pub origin: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    nodes: Vec<GridNode>,
    active_of_flat: Vec<Option<usize>>,
    masked: Vec<bool>,
    fill_plan: Vec<FillStep>,
}

const MAX_POINTS: usize = 1 << 22;

const NEIGHBOURS: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

pub fn build_grid(poly: &Polytope, h: f64, h_min: f64) -> Result<GridSpec, GridError> {
    if !(h > 0.0 && h_min > 0.0) || !h.is_finite() || !h_min.is_finite() {
        return Err(GridError::InvalidSpacing { h, h_min });
    }
    let (lo, hi) = poly.bounding_box();
    let count = |d: usize| ((hi[d] - lo[d]) / h - 1e-9).ceil().max(0.0) as usize + 1;
    let (nx, ny) = (count(0), count(1));
    if nx.saturating_mul(ny) > MAX_POINTS {
        return Err(GridError::TooLarge(nx.saturating_mul(ny)));
    }
    let threshold = h_min * (1.0 - 1e-12);
    let mut nodes = Vec::new();
    let mut active_of_flat = vec![None; nx * ny];
    for i in 0..nx {
        for j in 0..ny {
            let xi = [lo[0] + i as f64 * h, lo[1] + j as f64 * h];
            let deltas = poly.deltas(xi);
            let (nearest_facet, &min) = deltas
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("polytope has facets");
            if min >= threshold {
                active_of_flat[i * ny + j] = Some(nodes.len());
                nodes.push(GridNode {
                    i,
                    j,
                    xi,
                    deltas,
                    nearest_facet,
                });
            }
        }
    }
    if nodes.is_empty() {
        return Err(GridError::Empty { h, h_min });
    }
    let mut grid = GridSpec {
        h,
        h_min,
        origin: lo,
        nx,
        ny,
        nodes,
        active_of_flat,
        masked: Vec::new(),
        fill_plan: Vec::new(),
    };
    grid.masked = grid
        .nodes
        .iter()
        .map(|n| {
            NEIGHBOURS
                .iter()
                .any(|&(di, dj)| grid.active_at(n.i as isize + di, n.j as isize + dj).is_none())
        })
        .collect();
    grid.fill_plan = grid.build_fill_plan();
    Ok(grid)
}

impl GridSpec {
    pub fn nodes(&self) -> &[GridNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn box_len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn flat(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [self.origin[0] + i as f64 * self.h, self.origin[1] + j as f64 * self.h]
    }

    /// Active node index at box position `(i, j)`, if any.
    pub fn active_at(&self, i: isize, j: isize) -> Option<usize> {
        if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
            return None;
        }
        self.active_of_flat[i as usize * self.ny + j as usize]
    }

    pub fn active_of_flat(&self, flat: usize) -> Option<usize> {
        self.active_of_flat[flat]
    }

    /// A node is masked when its 3×3 neighbourhood leaves the active set.
    pub fn is_masked(&self, node: usize) -> bool {
        self.masked[node]
    }

    pub fn unmasked(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(move |&n| !self.masked[n])
    }

    pub fn unmasked_count(&self) -> usize {
        self.masked.iter().filter(|m| !**m).count()
    }

    /// Active node closest to `xi` in the Euclidean sense.
    pub fn nearest_node(&self, xi: [f64; 2]) -> usize {
        self.nodes
            .iter()
            .enumerate()
            .min_by(|a, b| {
                let da = (a.1.xi[0] - xi[0]).powi(2) + (a.1.xi[1] - xi[1]).powi(2);
                let db = (b.1.xi[0] - xi[0]).powi(2) + (b.1.xi[1] - xi[1]).powi(2);
                da.total_cmp(&db)
            })
            .map(|(k, _)| k)
            .expect("grid is nonempty")
    }

    pub fn fill_plan(&self) -> &[FillStep] {
        &self.fill_plan
    }

    /// Spreads values known on active nodes to the whole bounding box.
    ///
    /// Each inactive point receives the mean of the linear extrapolations
    /// `2a − b` along the grid directions where both `a` and `b` are already
    /// known, so affine data is reproduced. Only when no unknown point has
    /// such a pair does a layer fall back to neighbour means.
    pub fn extend_to_box(&self, active_values: &[f64], out: &mut [f64]) {
        assert_eq!(active_values.len(), self.nodes.len());
        assert_eq!(out.len(), self.box_len());
        for (k, n) in self.nodes.iter().enumerate() {
            out[n.i * self.ny + n.j] = active_values[k];
        }
        self.apply_fill(out);
    }

    /// Fills inactive box points in place from the active ones.
    pub fn apply_fill(&self, values: &mut [f64]) {
        for step in &self.fill_plan {
            let mut acc = 0.0;
            for &(src, w) in &step.sources {
                acc += w * values[src];
            }
            values[step.target] = acc;
        }
    }

    fn build_fill_plan(&self) -> Vec<FillStep> {
        let mut known: Vec<bool> = self.active_of_flat.iter().map(|a| a.is_some()).collect();
        let mut plan = Vec::new();
        loop {
            let mut layer = Vec::new();
            let mut fallback = Vec::new();
            for i in 0..self.nx {
                for j in 0..self.ny {
                    let flat = i * self.ny + j;
                    if known[flat] {
                        continue;
                    }
                    let at = |di: isize, dj: isize| -> Option<usize> {
                        let (a, b) = (i as isize + di, j as isize + dj);
                        if a < 0 || b < 0 || a as usize >= self.nx || b as usize >= self.ny {
                            None
                        } else {
                            let f = a as usize * self.ny + b as usize;
                            known[f].then_some(f)
                        }
                    };
                    let mut pairs = Vec::new();
                    let mut near = Vec::new();
                    for &(di, dj) in &NEIGHBOURS {
                        if let Some(a) = at(di, dj) {
                            near.push(a);
                            if let Some(b) = at(2 * di, 2 * dj) {
                                pairs.push((a, b));
                            }
                        }
                    }
                    if !pairs.is_empty() {
                        let w = 1.0 / pairs.len() as f64;
                        let sources = pairs.iter().flat_map(|&(a, b)| [(a, 2.0 * w), (b, -w)]).collect();
                        layer.push(FillStep { target: flat, sources });
                    } else if !near.is_empty() {
                        let w = 1.0 / near.len() as f64;
                        fallback.push(FillStep {
                            target: flat,
                            sources: near.iter().map(|&a| (a, w)).collect(),
                        });
                    }
                }
            }
            if layer.is_empty() {
                if fallback.is_empty() {
                    break;
                }
                layer = fallback;
            }
            for s in &layer {
                known[s.target] = true;
            }
            plan.extend(layer);
        }
        plan
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_quarter_grid() {
        let sq = Polytope::square(1);
        let g = build_grid(&sq, 0.25, 0.1).unwrap();
        assert_eq!(g.len(), 9);
        let expected = [0.25, 0.5, 0.75];
        let mut k = 0;
        for &a in &expected {
            for &b in &expected {
                assert_eq!(g.nodes()[k].xi, [a, b]);
                k += 1;
            }
        }
        assert!(g.nodes().iter().all(|n| n.deltas.iter().all(|&d| d > 0.0)));
        assert_eq!(g.unmasked_count(), 1);
    }

    #[test]
    fn simplex_coarse_grid_is_empty() {
        // enumerate the 0.5-grid directly
        let s = Polytope::standard_simplex();
        for a in [0.0, 0.5, 1.0] {
            for b in [0.0, 0.5, 1.0] {
                assert!(s.min_delta([a, b]) < 0.4);
            }
        }
        assert!(matches!(build_grid(&s, 0.5, 0.4), Err(GridError::Empty { .. })));
    }

    #[test]
    fn h_min_above_inradius_is_empty() {
        let sq = Polytope::square(1);
        assert!(matches!(build_grid(&sq, 0.6, 0.55), Err(GridError::Empty { .. })));
        assert!(matches!(build_grid(&sq, -0.1, 0.2), Err(GridError::InvalidSpacing { .. })));
        assert!(matches!(build_grid(&sq, 0.1, 0.0), Err(GridError::InvalidSpacing { .. })));
    }

    #[test]
    fn nearest_facet_is_cached() {
        let sq = Polytope::square(1);
        let g = build_grid(&sq, 0.125, 0.125).unwrap();
        let n = &g.nodes()[0];
        assert_eq!(n.xi, [0.125, 0.125]);
        assert!((n.min_delta() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn fill_reproduces_affine_data() {
        for poly in [Polytope::square(1), Polytope::standard_simplex()] {
            let g = build_grid(&poly, 1.0 / 16.0, 0.25).unwrap();
            let f = |x: [f64; 2]| 0.3 - 1.7 * x[0] + 2.2 * x[1];
            let active: Vec<f64> = g.nodes().iter().map(|n| f(n.xi)).collect();
            let mut out = vec![f64::NAN; g.box_len()];
            g.extend_to_box(&active, &mut out);
            for i in 0..g.nx {
                for j in 0..g.ny {
                    let v = out[g.flat(i, j)];
                    assert!((v - f(g.point(i, j))).abs() < 1e-12, "({i},{j}) -> {v}");
                }
            }
        }
    }
}
