//! Second-order forward-mode jets in two variables.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Value, gradient and Hessian `[xx, xy, yy]` of a function at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub g: [f64; 2],
    pub h: [f64; 3],
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        Jet {
            v,
            g: [0.0; 2],
            h: [0.0; 3],
        }
    }

    /// The coordinate function `ξ_d` at the point `xi`.
    pub fn variable(xi: [f64; 2], d: usize) -> Self {
        let mut g = [0.0; 2];
        g[d] = 1.0;
        Jet { v: xi[d], g, h: [0.0; 3] }
    }

    /// `a·ξ₁ + b·ξ₂ − c` at `xi`.
    pub fn affine(xi: [f64; 2], a: f64, b: f64, c: f64) -> Self {
        Jet {
            v: a * xi[0] + b * xi[1] - c,
            g: [a, b],
            h: [0.0; 3],
        }
    }

    /// Applies a scalar function given its value and first two derivatives.
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let g = self.g;
        Jet {
            v: f0,
            g: [f1 * g[0], f1 * g[1]],
            h: [
                f1 * self.h[0] + f2 * g[0] * g[0],
                f1 * self.h[1] + f2 * g[0] * g[1],
                f1 * self.h[2] + f2 * g[1] * g[1],
            ],
        }
    }

    pub fn recip(&self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn ln(&self) -> Self {
        let r = 1.0 / self.v;
        self.chain(self.v.ln(), r, -r * r)
    }

    pub fn scale(&self, s: f64) -> Self {
        Jet {
            v: s * self.v,
            g: [s * self.g[0], s * self.g[1]],
            h: [s * self.h[0], s * self.h[1], s * self.h[2]],
        }
    }

    /// `Σ_ij ∂_i ∂_j` of the function, i.e. `h_xx + 2 h_xy + h_yy` weighting
    /// left to the caller; this returns the Hessian entry `(i, j)`.
    pub fn second(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (0, 0) => self.h[0],
            (1, 1) => self.h[2],
            _ => self.h[1],
        }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            g: [self.g[0] + o.g[0], self.g[1] + o.g[1]],
            h: [self.h[0] + o.h[0], self.h[1] + o.h[1], self.h[2] + o.h[2]],
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let (a, b) = (self, o);
        Jet {
            v: a.v * b.v,
            g: [a.g[0] * b.v + a.v * b.g[0], a.g[1] * b.v + a.v * b.g[1]],
            h: [
                a.h[0] * b.v + 2.0 * a.g[0] * b.g[0] + a.v * b.h[0],
                a.h[1] * b.v + a.g[0] * b.g[1] + a.g[1] * b.g[0] + a.v * b.h[1],
                a.h[2] * b.v + 2.0 * a.g[1] * b.g[1] + a.v * b.h[2],
            ],
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_and_quotients() {
        let p = [0.3, 0.7];
        let x = Jet::variable(p, 0);
        let y = Jet::variable(p, 1);
        // f = x² y / (1 + x)
        let f = x * x * y / (Jet::constant(1.0) + x);
        let (a, b) = (p[0], p[1]);
        let val = a * a * b / (1.0 + a);
        let fx = b * (a * a + 2.0 * a) / (1.0 + a).powi(2);
        let fxx = b * 2.0 / (1.0 + a).powi(3);
        let fxy = (a * a + 2.0 * a) / (1.0 + a).powi(2);
        assert!((f.v - val).abs() < 1e-15);
        assert!((f.g[0] - fx).abs() < 1e-14);
        assert!((f.h[0] - fxx).abs() < 1e-13);
        assert!((f.h[1] - fxy).abs() < 1e-14);
        assert_eq!(f.h[2], 0.0);
    }

    #[test]
    fn logarithm() {
        let p = [0.4, 0.9];
        let f = (Jet::variable(p, 0) * Jet::variable(p, 1)).ln();
        assert!((f.g[0] - 1.0 / p[0]).abs() < 1e-14);
        assert!((f.h[0] + 1.0 / (p[0] * p[0])).abs() < 1e-12);
        assert!(f.h[1].abs() < 1e-14);
    }
}
