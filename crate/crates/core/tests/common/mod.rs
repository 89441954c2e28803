//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;

/// Bivariate polynomial with exponent keys `(a, b)` for `ξ₁^a ξ₂^b`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly(BTreeMap<(u32, u32), f64>);

impl Poly {
    pub fn constant(c: f64) -> Poly {
        let mut m = BTreeMap::new();
        if c != 0.0 {
            m.insert((0, 0), c);
        }
        Poly(m)
    }

    /// `a ξ₁ + b ξ₂ + c`
    pub fn linear(a: f64, b: f64, c: f64) -> Poly {
        let mut p = Poly::constant(c);
        for (key, v) in [((1, 0), a), ((0, 1), b)] {
            if v != 0.0 {
                p.0.insert(key, v);
            }
        }
        p
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut m = self.0.clone();
        for (k, v) in &o.0 {
            *m.entry(*k).or_insert(0.0) += v;
        }
        m.retain(|_, v| *v != 0.0);
        Poly(m)
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly(self.0.iter().map(|(k, v)| (*k, v * s)).filter(|(_, v)| *v != 0.0).collect())
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.scale(-1.0))
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut m = BTreeMap::new();
        for ((a, b), v) in &self.0 {
            for ((c, d), w) in &o.0 {
                *m.entry((a + c, b + d)).or_insert(0.0) += v * w;
            }
        }
        m.retain(|_, v: &mut f64| *v != 0.0);
        Poly(m)
    }

    pub fn deriv(&self, var: usize) -> Poly {
        let mut m = BTreeMap::new();
        for ((a, b), v) in &self.0 {
            let (e, key) = if var == 0 { (*a, (a.wrapping_sub(1), *b)) } else { (*b, (*a, b.wrapping_sub(1))) };
            if e > 0 {
                m.insert(key, v * e as f64);
            }
        }
        Poly(m)
    }

    pub fn eval(&self, xi: [f64; 2]) -> f64 {
        self.0.iter().map(|((a, b), v)| v * xi[0].powi(*a as i32) * xi[1].powi(*b as i32)).sum()
    }

    pub fn product(ps: &[Poly]) -> Poly {
        ps.iter().fold(Poly::constant(1.0), |acc, p| acc.mul(p))
    }
}

/// Quotient of polynomials, differentiated by the quotient rule.
#[derive(Clone, Debug)]
pub struct RationalFn {
    pub num: Poly,
    pub den: Poly,
}

impl RationalFn {
    pub fn deriv(&self, var: usize) -> RationalFn {
        RationalFn {
            num: self.num.deriv(var).mul(&self.den).sub(&self.num.mul(&self.den.deriv(var))),
            den: self.den.mul(&self.den),
        }
    }

    pub fn eval(&self, xi: [f64; 2]) -> f64 {
        self.num.eval(xi) / self.den.eval(xi)
    }
}

/// `S_D(v) = −(1/D) Σ ∂_i∂_j (D v^{ij})` for the Guillemin potential of the
/// facets `(n, c)`, `δ = ⟨n, ξ⟩ − c`, with `D = Π_α 2⟨M_α, ξ⟩`, derived
/// symbolically from `P·Hess v = Σ_k n_k n_kᵀ Π_{l≠k} δ_l` with `P = Π δ_k`.
///
/// Polynomials are expanded around `origin` to keep the monomial
/// coefficients small.
pub struct GuilleminOracle {
    terms: [[RationalFn; 2]; 2],
    dh: Poly,
    origin: [f64; 2],
}

impl GuilleminOracle {
    pub fn new(facets: &[([f64; 2], f64)], roots: &[[f64; 2]], origin: [f64; 2]) -> Self {
        let shift = |n: [f64; 2]| n[0] * origin[0] + n[1] * origin[1];
        let deltas: Vec<Poly> = facets.iter().map(|(n, c)| Poly::linear(n[0], n[1], shift(*n) - c)).collect();
        let p = Poly::product(&deltas);
        let mut ph = [[Poly::default(), Poly::default()], [Poly::default(), Poly::default()]];
        for (k, (n, _)) in facets.iter().enumerate() {
            let others: Vec<Poly> = deltas.iter().enumerate().filter(|(l, _)| *l != k).map(|(_, d)| d.clone()).collect();
            let rest = Poly::product(&others);
            for i in 0..2 {
                for j in 0..2 {
                    ph[i][j] = ph[i][j].add(&rest.scale(n[i] * n[j]));
                }
            }
        }
        let det = ph[0][0].mul(&ph[1][1]).sub(&ph[0][1].mul(&ph[1][0]));
        let adj = [[ph[1][1].clone(), ph[0][1].scale(-1.0)], [ph[1][0].scale(-1.0), ph[0][0].clone()]];
        let dh = Poly::product(&roots.iter().map(|m| Poly::linear(2.0 * m[0], 2.0 * m[1], 2.0 * shift(*m))).collect::<Vec<_>>());
        // D v^{ij} = D adj_ij P / det(P Hess v)
        let terms = [0, 1].map(|i| {
            [0, 1].map(|j| {
                RationalFn {
                    num: adj[i][j].mul(&p).mul(&dh),
                    den: det.clone(),
                }
                .deriv(i)
                .deriv(j)
            })
        });
        GuilleminOracle { terms, dh, origin }
    }

    pub fn eval(&self, xi: [f64; 2]) -> f64 {
        let xi = [xi[0] - self.origin[0], xi[1] - self.origin[1]];
        let s: f64 = self.terms.iter().flatten().map(|t| t.eval(xi)).sum();
        -s / self.dh.eval(xi)
    }
}

pub fn square_facets(lo: f64, hi: f64) -> Vec<([f64; 2], f64)> {
    vec![([1.0, 0.0], lo), ([0.0, 1.0], lo), ([-1.0, 0.0], -hi), ([0.0, -1.0], -hi)]
}

pub fn simplex_facets() -> Vec<([f64; 2], f64)> {
    vec![([1.0, 0.0], 0.0), ([0.0, 1.0], 0.0), ([-1.0, -1.0], -1.0)]
}

/// `[(ξ₁ − a)(b − ξ₁)(ξ₂ − a)(b − ξ₂)]³` on `[a, b]²`, zero elsewhere.
pub fn cubic_bump(a: f64, b: f64) -> impl Fn([f64; 2]) -> f64 + Copy {
    move |x: [f64; 2]| {
        let f = (x[0] - a) * (b - x[0]) * (x[1] - a) * (b - x[1]);
        if x[0] > a && x[0] < b && x[1] > a && x[1] < b {
            f.powi(3)
        } else {
            0.0
        }
    }
}
