//! Tensor-product not-a-knot cubic splines on uniform grids.
//!
//! Per axis, the nodal slopes and second derivatives of the interpolating
//! spline are fixed linear maps of the data; they are precomputed as dense
//! matrices. A tensor-product spline restricted to one cell is the bicubic
//! determined by `f, f_x, f_y, f_xy` at its corners, which is how it is
//! evaluated off the nodes.

use nalgebra::DMatrix;

/// Linear maps from nodal values to nodal slopes and second derivatives of
/// the not-a-knot cubic interpolant on `n` points with spacing `h`.
#[derive(Clone, Debug)]
pub struct AxisSpline {
    pub n: usize,
    pub h: f64,
    slope: DMatrix<f64>,
    curvature: DMatrix<f64>,
}

impl AxisSpline {
    pub fn new(n: usize, h: f64) -> Self {
        assert!(n >= 1 && h > 0.0);
        let curvature = curvature_matrix(n, h);
        let mut slope = DMatrix::zeros(n, n);
        if n >= 2 {
            for c in 0..n {
                for i in 0..n {
                    let f = |k: usize| if k == c { 1.0 } else { 0.0 };
                    let m = |k: usize| curvature[(k, c)];
                    slope[(i, c)] = if i + 1 < n {
                        (f(i + 1) - f(i)) / h - h * (2.0 * m(i) + m(i + 1)) / 6.0
                    } else {
                        (f(i) - f(i - 1)) / h + h * (m(i - 1) + 2.0 * m(i)) / 6.0
                    };
                }
            }
        }
        AxisSpline {
            n,
            h,
            slope,
            curvature,
        }
    }

    pub fn slope_matrix(&self) -> &DMatrix<f64> {
        &self.slope
    }

    pub fn curvature_matrix(&self) -> &DMatrix<f64> {
        &self.curvature
    }
}

fn curvature_matrix(n: usize, h: f64) -> DMatrix<f64> {
    if n <= 2 {
        return DMatrix::zeros(n, n);
    }
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    let s = 6.0 / (h * h);
    for i in 1..n - 1 {
        a[(i, i - 1)] = 1.0;
        a[(i, i)] = 4.0;
        a[(i, i + 1)] = 1.0;
        b[(i, i - 1)] = s;
        b[(i, i)] = -2.0 * s;
        b[(i, i + 1)] = s;
    }
    if n == 3 {
        // single parabola: equal second derivatives
        a[(0, 0)] = 1.0;
        a[(0, 1)] = -1.0;
        a[(2, 1)] = -1.0;
        a[(2, 2)] = 1.0;
    } else {
        // third derivative continuous across the second and penultimate nodes
        a[(0, 0)] = 1.0;
        a[(0, 1)] = -2.0;
        a[(0, 2)] = 1.0;
        a[(n - 1, n - 3)] = 1.0;
        a[(n - 1, n - 2)] = -2.0;
        a[(n - 1, n - 1)] = 1.0;
    }
    a.lu().solve(&b).expect("spline system is nonsingular")
}

/// Nodal derivative data of a tensor-product spline, stored row-major over
/// the box: entry `i * ny + j` belongs to the point `(x_i, y_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplineData {
    pub nx: usize,
    pub ny: usize,
    pub origin: [f64; 2],
    pub h: f64,
    pub f: Vec<f64>,
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
    pub fxy: Vec<f64>,
    pub fxx: Vec<f64>,
    pub fyy: Vec<f64>,
}

/// Precomputed per-axis operators for one box.
#[derive(Clone, Debug)]
pub struct TensorSpline {
    pub x: AxisSpline,
    pub y: AxisSpline,
    pub origin: [f64; 2],
}

impl TensorSpline {
    pub fn new(nx: usize, ny: usize, h: f64, origin: [f64; 2]) -> Self {
        TensorSpline {
            x: AxisSpline::new(nx, h),
            y: AxisSpline::new(ny, h),
            origin,
        }
    }

    /// Derivative data for values given over the whole box.
    pub fn fit(&self, values: &[f64]) -> SplineData {
        let (nx, ny) = (self.x.n, self.y.n);
        assert_eq!(values.len(), nx * ny);
        // Column-major view of the row-major data: F[(j, i)] = values[i*ny + j].
        let f = DMatrix::from_column_slice(ny, nx, values);
        let fx = &f * self.x.slope.transpose();
        let fxx = &f * self.x.curvature.transpose();
        let fy = &self.y.slope * &f;
        let fyy = &self.y.curvature * &f;
        let fxy = &self.y.slope * &fx;
        SplineData {
            nx,
            ny,
            origin: self.origin,
            h: self.x.h,
            f: values.to_vec(),
            fx: fx.as_slice().to_vec(),
            fy: fy.as_slice().to_vec(),
            fxy: fxy.as_slice().to_vec(),
            fxx: fxx.as_slice().to_vec(),
            fyy: fyy.as_slice().to_vec(),
        }
    }

    /// Only the nodal Hessian `(f_xx, f_xy, f_yy)`, written into `out`.
    pub fn nodal_hessian(&self, values: &[f64], out: &mut NodalHessian) {
        let (nx, ny) = (self.x.n, self.y.n);
        let f = DMatrix::from_column_slice(ny, nx, values);
        let fxx = &f * self.x.curvature.transpose();
        let fyy = &self.y.curvature * &f;
        let fxy = &self.y.slope * (&f * self.x.slope.transpose());
        out.fxx.copy_from_slice(fxx.as_slice());
        out.fxy.copy_from_slice(fxy.as_slice());
        out.fyy.copy_from_slice(fyy.as_slice());
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodalHessian {
    pub fxx: Vec<f64>,
    pub fxy: Vec<f64>,
    pub fyy: Vec<f64>,
}

impl NodalHessian {
    pub fn zeros(len: usize) -> Self {
        NodalHessian {
            fxx: vec![0.0; len],
            fxy: vec![0.0; len],
            fyy: vec![0.0; len],
        }
    }
}

/// Value, gradient and Hessian `[xx, xy, yy]` of a spline at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplineEval {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [f64; 3],
}

// Cubic Hermite basis on [0, 1] with its first two derivatives.
fn hermite(t: f64) -> [[f64; 4]; 3] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        [2.0 * t3 - 3.0 * t2 + 1.0, t3 - 2.0 * t2 + t, -2.0 * t3 + 3.0 * t2, t3 - t2],
        [6.0 * t2 - 6.0 * t, 3.0 * t2 - 4.0 * t + 1.0, -6.0 * t2 + 6.0 * t, 3.0 * t2 - 2.0 * t],
        [12.0 * t - 6.0, 6.0 * t - 4.0, -12.0 * t + 6.0, 6.0 * t - 2.0],
    ]
}

impl SplineData {
    pub fn zeros(nx: usize, ny: usize, h: f64, origin: [f64; 2]) -> Self {
        let z = vec![0.0; nx * ny];
        SplineData {
            nx,
            ny,
            origin,
            h,
            f: z.clone(),
            fx: z.clone(),
            fy: z.clone(),
            fxy: z.clone(),
            fxx: z.clone(),
            fyy: z,
        }
    }

    fn locate(&self, coord: f64, d: usize, n: usize) -> (usize, f64) {
        if n < 2 {
            return (0, 0.0);
        }
        let s = ((coord - self.origin[d]) / self.h).clamp(0.0, (n - 1) as f64);
        let cell = (s.floor() as usize).min(n - 2);
        (cell, s - cell as f64)
    }

    /// Evaluates the interpolant; points outside the box are clamped to it.
    pub fn eval(&self, xi: [f64; 2]) -> SplineEval {
        let (ci, tx) = self.locate(xi[0], 0, self.nx);
        let (cj, ty) = self.locate(xi[1], 1, self.ny);
        let h = self.h;
        let bx = hermite(tx);
        let by = hermite(ty);
        let mut out = SplineEval {
            value: 0.0,
            grad: [0.0; 2],
            hess: [0.0; 3],
        };
        let corners_i: &[usize] = if self.nx >= 2 { &[0, 1] } else { &[0] };
        let corners_j: &[usize] = if self.ny >= 2 { &[0, 1] } else { &[0] };
        for &a in corners_i {
            for &b in corners_j {
                let k = (ci + a) * self.ny + (cj + b);
                // weights: value basis index 2a, slope basis index 2a+1 (scaled by h)
                let (va, sa) = (2 * a, 2 * a + 1);
                let (vb, sb) = (2 * b, 2 * b + 1);
                let coef = [
                    (va, vb, self.f[k]),
                    (sa, vb, self.fx[k] * h),
                    (va, sb, self.fy[k] * h),
                    (sa, sb, self.fxy[k] * h * h),
                ];
                for &(p, q, c) in &coef {
                    out.value += c * bx[0][p] * by[0][q];
                    out.grad[0] += c * bx[1][p] * by[0][q];
                    out.grad[1] += c * bx[0][p] * by[1][q];
                    out.hess[0] += c * bx[2][p] * by[0][q];
                    out.hess[1] += c * bx[1][p] * by[1][q];
                    out.hess[2] += c * bx[0][p] * by[2][q];
                }
            }
        }
        out.grad[0] /= h;
        out.grad[1] /= h;
        out.hess[0] /= h * h;
        out.hess[1] /= h * h;
        out.hess[2] /= h * h;
        out
    }
}
