//! Gauss–Legendre rules and geometrically graded composite quadrature over
//! convex polygons and their boundaries.

use rayon::prelude::*;

use crate::polytope::Polytope;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = 0.5 * (1.0 - z);
        nodes[n - 1 - i] = 0.5 * (1.0 + z);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// Breakpoints of `[0, 1]` refined geometrically (ratio ½) toward the
/// requested ends, `levels` times each.
pub fn graded_breakpoints(levels: usize, toward_zero: bool, toward_one: bool) -> Vec<f64> {
    let mut pts = vec![0.0, 1.0];
    let mut s = 0.5;
    for _ in 0..levels {
        if toward_zero {
            pts.push(s * if toward_one { 0.5 } else { 1.0 });
        }
        if toward_one {
            pts.push(1.0 - s * if toward_zero { 0.5 } else { 1.0 });
        }
        s *= 0.5;
    }
    if toward_zero && toward_one {
        pts.push(0.5);
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// A one-dimensional composite rule; `complements[i] = 1 − nodes[i]`
/// computed without cancellation.
#[derive(Clone, Debug)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub complements: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    pub fn new(breakpoints: &[f64], order: usize) -> Self {
        let (gn, gw) = gauss_legendre(order);
        let cap = breakpoints.len() * order;
        let (mut nodes, mut complements, mut weights) = (Vec::with_capacity(cap), Vec::with_capacity(cap), Vec::with_capacity(cap));
        for w in breakpoints.windows(2) {
            let (a, b) = (w[0], w[1]);
            for (x, wt) in gn.iter().zip(&gw) {
                nodes.push(a + (b - a) * x);
                complements.push((1.0 - b) + (b - a) * (1.0 - x));
                weights.push((b - a) * wt);
            }
        }
        CompositeRule {
            nodes,
            complements,
            weights,
        }
    }
}

/// Quadrature settings for integrals with logarithmic boundary singularities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureOptions {
    pub tol: f64,
    pub levels: usize,
    pub order: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            tol: 1e-8,
            levels: 30,
            order: 8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// `∫_Δ f dμ` over the fan of triangles `(p_o, v_k, v_{k+1})`, each mapped
/// from the unit square by `(r, t) ↦ q + r(p_o − q)` with
/// `q = (1−t)v_k + t v_{k+1}`, graded toward the boundary `r = 0` and the
/// vertices `t ∈ {0, 1}`.
pub fn integrate_polygon<F, E>(poly: &Polytope, f: F, order: usize, levels: usize) -> Result<f64, E>
where
    F: Fn([f64; 2]) -> Result<f64, E> + Sync,
    E: Send,
{
    let r_rule = CompositeRule::new(&graded_breakpoints(levels, true, false), order);
    let t_rule = CompositeRule::new(&graded_breakpoints(levels, true, true), order);
    let p = poly.base_point();
    let verts = poly.vertices();
    let m = verts.len();
    let mut total = 0.0;
    for k in 0..m {
        let a = verts[k].point;
        let b = verts[(k + 1) % m].point;
        let jac = ((a[0] - p[0]) * (b[1] - p[1]) - (a[1] - p[1]) * (b[0] - p[0])).abs();
        // collected in index order so the sum is independent of scheduling
        let rows: Vec<f64> = (0..r_rule.nodes.len())
            .into_par_iter()
            .map(|i| {
                let (r, s) = (r_rule.nodes[i], r_rule.complements[i]);
                let mut acc = 0.0;
                for ((&t, &tc), &wt) in t_rule.nodes.iter().zip(&t_rule.complements).zip(&t_rule.weights) {
                    let q = if t <= 0.5 {
                        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
                    } else {
                        [b[0] + tc * (a[0] - b[0]), b[1] + tc * (a[1] - b[1])]
                    };
                    let x = [q[0] + r * (p[0] - q[0]), q[1] + r * (p[1] - q[1])];
                    acc += wt * f(x)?;
                }
                Ok(r_rule.weights[i] * s * jac * acc)
            })
            .collect::<Result<_, E>>()?;
        total += rows.iter().sum::<f64>();
    }
    Ok(total)
}

/// `∫_{∂Δ} g dσ`, each facet graded toward both endpoints.
pub fn integrate_boundary<F, E>(poly: &Polytope, g: F, order: usize, levels: usize) -> Result<f64, E>
where
    F: Fn([f64; 2]) -> Result<f64, E> + Sync,
{
    let rule = CompositeRule::new(&graded_breakpoints(levels, true, true), order);
    let mut total = 0.0;
    for k in 0..poly.facets().len() {
        let m = poly.boundary_measure(k).expect("facet index in range");
        let mut acc = 0.0;
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            acc += w * g(m.point_at(t))?;
        }
        total += m.total_mass() * acc;
    }
    Ok(total)
}

/// Runs an integral at two orders and reports their difference as the error.
pub fn with_estimate<I, E>(opts: QuadratureOptions, integral: I) -> Result<Estimate, E>
where
    I: Fn(usize, usize) -> Result<f64, E>,
{
    let coarse = integral(opts.order, opts.levels)?;
    let fine = integral(opts.order + 4, opts.levels + 8)?;
    Ok(Estimate {
        value: fine,
        error: (fine - coarse).abs(),
    })
}

/// `∫ f` over a triangle by the collapsed Gauss rule of the given order.
pub fn triangle_rule(order: usize) -> Vec<([f64; 3], f64)> {
    let (n, w) = gauss_legendre(order);
    let mut out = Vec::with_capacity(order * order);
    for (&s, &ws) in n.iter().zip(&w) {
        for (&t, &wt) in n.iter().zip(&w) {
            // barycentric (1−s, s(1−t), st), area element 2·s·|T| dS dT
            out.push(([1.0 - s, s * (1.0 - t), s * t], 2.0 * s * ws * wt));
        }
    }
    out
}
