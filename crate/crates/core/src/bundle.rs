//! Bundle data: the Duistermaat–Heckman polynomial `D = Π_α D_α` with
//! `D_α(ξ) = 2 Σ_j M_α^j ξ_j`, and the correction `h_G = Σ_i σ_i ∂_i log D`.

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::polytope::{rational_to_f64, Polytope, Rational};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BundleError {
    #[error("root {root} has negative entry {value} in component {component}")]
    NegativeEntry {
        root: usize,
        component: usize,
        value: Rational,
    },
    #[error("root {root} has zero coefficient sum")]
    ZeroRoot { root: usize },
    #[error("sigma must be finite")]
    NonFiniteSigma,
    #[error("D(ξ) = {value} is not positive at ({}, {})", xi[0], xi[1])]
    NonPositive { xi: [f64; 2], value: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DhData {
    roots: Vec<[Rational; 2]>,
    roots_f64: Vec<[f64; 2]>,
    sigma: [f64; 2],
}

impl DhData {
    pub fn new(roots: Vec<[Rational; 2]>, sigma: [f64; 2]) -> Result<Self, BundleError> {
        for (a, m) in roots.iter().enumerate() {
            for (c, v) in m.iter().enumerate() {
                if v.is_negative() {
                    return Err(BundleError::NegativeEntry {
                        root: a,
                        component: c,
                        value: *v,
                    });
                }
            }
            if (m[0] + m[1]).is_zero() {
                return Err(BundleError::ZeroRoot { root: a });
            }
        }
        if !sigma.iter().all(|s| s.is_finite()) {
            return Err(BundleError::NonFiniteSigma);
        }
        let roots_f64 = roots
            .iter()
            .map(|m| [rational_to_f64(&m[0]), rational_to_f64(&m[1])])
            .collect();
        Ok(DhData {
            roots,
            roots_f64,
            sigma,
        })
    }

    /// Pure toric data: `D ≡ 1`, `h_G ≡ 0`.
    pub fn toric() -> Self {
        DhData::new(Vec::new(), [0.0, 0.0]).expect("empty data is valid")
    }

    pub fn from_integer_roots(roots: &[[i64; 2]], sigma: [f64; 2]) -> Result<Self, BundleError> {
        DhData::new(
            roots
                .iter()
                .map(|m| [Rational::from_integer(m[0] as i128), Rational::from_integer(m[1] as i128)])
                .collect(),
            sigma,
        )
    }

    pub fn roots(&self) -> &[[Rational; 2]] {
        &self.roots
    }

    pub fn roots_f64(&self) -> &[[f64; 2]] {
        &self.roots_f64
    }

    pub fn sigma(&self) -> [f64; 2] {
        self.sigma
    }

    pub fn is_toric(&self) -> bool {
        self.roots.is_empty()
    }

    /// `D_α(ξ)` for root `alpha`.
    #[inline]
    pub fn factor(&self, alpha: usize, xi: [f64; 2]) -> f64 {
        let m = self.roots_f64[alpha];
        2.0 * (m[0] * xi[0] + m[1] * xi[1])
    }

    fn factor_exact(&self, alpha: usize, p: &[Rational; 2]) -> Rational {
        let m = &self.roots[alpha];
        (m[0] * p[0] + m[1] * p[1]) * Rational::from_integer(2)
    }

    pub fn dh_value(&self, xi: [f64; 2]) -> f64 {
        (0..self.roots.len()).map(|a| self.factor(a, xi)).product()
    }

    /// `∂_i log D = Σ_α 2 M_α^i / D_α`.
    pub fn grad_log_dh(&self, xi: [f64; 2]) -> Result<[f64; 2], BundleError> {
        let mut g = [0.0; 2];
        for (a, m) in self.roots_f64.iter().enumerate() {
            let d = self.factor(a, xi);
            if !(d > 0.0) {
                return Err(BundleError::NonPositive { xi, value: self.dh_value(xi) });
            }
            g[0] += 2.0 * m[0] / d;
            g[1] += 2.0 * m[1] / d;
        }
        Ok(g)
    }

    pub fn h_g_value(&self, xi: [f64; 2]) -> Result<f64, BundleError> {
        let g = self.grad_log_dh(xi)?;
        Ok(self.sigma[0] * g[0] + self.sigma[1] * g[1])
    }

    /// `Σ_α M_α^i`, for comparing a user-supplied `σ` against the roots.
    pub fn root_weight_sums(&self) -> [Rational; 2] {
        self.roots
            .iter()
            .fold([Rational::zero(), Rational::zero()], |acc, m| [acc[0] + m[0], acc[1] + m[1]])
    }

    /// For every edge (indexed by its facet), whether `log D` varies along it.
    pub fn edge_nonconstant(&self, poly: &Polytope) -> Vec<bool> {
        (0..poly.facets().len())
            .map(|k| {
                let t = poly.edge_direction(k);
                let t = [Rational::from_integer(t[0] as i128), Rational::from_integer(t[1] as i128)];
                self.roots.iter().any(|m| !(t[0] * m[0] + t[1] * m[1]).is_zero())
            })
            .collect()
    }

    pub fn check_admissibility(&self, poly: &Polytope) -> AdmissibilityReport {
        let verts = poly.vertices();
        let zero = Rational::zero();
        let factor_minima: Vec<Rational> = (0..self.roots.len())
            .map(|a| {
                verts
                    .iter()
                    .map(|v| self.factor_exact(a, &v.exact))
                    .min()
                    .expect("polytope has vertices")
            })
            .collect();
        let factors_positive = factor_minima.iter().all(|m| *m > zero);
        let in_positive_quadrant = verts.iter().all(|v| v.exact[0] > zero && v.exact[1] > zero);
        let diameter = poly.diameter();
        let mut cone_value = 0.0f64;
        if factors_positive {
            for v in verts {
                let mut s = Rational::zero();
                for (a, m) in self.roots.iter().enumerate() {
                    s += (m[0] + m[1]) / self.factor_exact(a, &v.exact);
                }
                cone_value = cone_value.max(rational_to_f64(&s) * diameter);
            }
        } else {
            cone_value = f64::INFINITY;
        }
        AdmissibilityReport {
            factor_minima: factor_minima.iter().map(rational_to_f64).collect(),
            factors_positive,
            in_positive_quadrant,
            cone_value,
            cone_bound: CONE_BOUND,
            cone_ok: cone_value < CONE_BOUND,
        }
    }
}

/// `n/4` for surfaces.
pub const CONE_BOUND: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct AdmissibilityReport {
    /// Minimum of each `D_α` over the closed polytope.
    pub factor_minima: Vec<f64>,
    pub factors_positive: bool,
    pub in_positive_quadrant: bool,
    /// `sup Σ_α (Σ_j M_α^j)·diam/D_α` over the closed polytope.
    pub cone_value: f64,
    pub cone_bound: f64,
    pub cone_ok: bool,
}

impl AdmissibilityReport {
    /// With no roots the quadrant condition is vacuous, since `D ≡ 1`.
    pub fn passed(&self) -> bool {
        self.factors_positive && (self.in_positive_quadrant || self.factor_minima.is_empty()) && self.cone_ok
    }
}

impl std::fmt::Display for AdmissibilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (a, m) in self.factor_minima.iter().enumerate() {
            writeln!(f, "root {a}: min D_alpha = {m:?}")?;
        }
        writeln!(f, "D_alpha positive: {}", self.factors_positive)?;
        writeln!(f, "positive quadrant: {}", self.in_positive_quadrant)?;
        writeln!(f, "cone value {:?} vs bound {:?}: {}", self.cone_value, self.cone_bound, self.cone_ok)?;
        write!(f, "admissible: {}", self.passed())
    }
}
