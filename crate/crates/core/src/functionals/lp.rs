//! Linear programs in equality standard form and a dense revised simplex engine.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Sparse column: `(row, value)` pairs.
pub type Column = Vec<(usize, f64)>;

/// `min cᵀx` subject to `A x = b`, `x ≥ 0`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StandardForm {
    pub rows: usize,
    pub columns: Vec<Column>,
    pub cost: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl StandardForm {
    pub fn new(rows: usize, rhs: Vec<f64>) -> Self {
        assert_eq!(rhs.len(), rows);
        StandardForm {
            rows,
            columns: Vec::new(),
            cost: Vec::new(),
            rhs,
        }
    }

    pub fn add_column(&mut self, cost: f64, entries: Column) -> usize {
        debug_assert!(entries.iter().all(|&(r, _)| r < self.rows));
        self.columns.push(entries);
        self.cost.push(cost);
        self.columns.len() - 1
    }

    /// `max_i |(A x − b)_i|`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let mut r: Vec<f64> = self.rhs.iter().map(|b| -b).collect();
        for (col, &xj) in self.columns.iter().zip(x) {
            for &(i, a) in col {
                r[i] += a * xj;
            }
        }
        r.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    /// Row multipliers `π` with `cᵀ − πᵀA ≥ 0` at optimality.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

pub trait LpEngine {
    fn solve(&self, lp: &StandardForm) -> LpSolution;
}

/// Two-phase revised simplex keeping an explicit dense basis inverse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DenseSimplex {
    pub tol: f64,
    pub pivot_tol: f64,
    pub max_iters: usize,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        DenseSimplex {
            tol: 1e-10,
            pivot_tol: 1e-9,
            max_iters: 200_000,
        }
    }
}

/// Column-major `m × m` basis inverse.
struct Inverse {
    m: usize,
    data: Vec<f64>,
}

impl Inverse {
    fn identity(m: usize) -> Self {
        let mut data = vec![0.0; m * m];
        for i in 0..m {
            data[i * m + i] = 1.0;
        }
        Inverse { m, data }
    }

    fn col(&self, k: usize) -> &[f64] {
        &self.data[k * self.m..(k + 1) * self.m]
    }

    /// `B⁻¹ a` for a sparse `a`.
    fn ftran(&self, a: &[(usize, f64)], out: &mut [f64]) {
        out.fill(0.0);
        for &(k, v) in a {
            for (o, b) in out.iter_mut().zip(self.col(k)) {
                *o += v * b;
            }
        }
    }

    /// `πᵀ = c_Bᵀ B⁻¹`.
    fn btran(&self, cb: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.col(k).iter().zip(cb).map(|(b, c)| b * c).sum();
        }
    }

    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let inv = 1.0 / alpha[r];
        for k in 0..m {
            let col = &mut self.data[k * m..(k + 1) * m];
            let pr = col[r] * inv;
            if pr != 0.0 {
                for (c, a) in col.iter_mut().zip(alpha) {
                    *c -= a * pr;
                }
            }
            col[r] = pr;
        }
    }
}

struct Tableau<'a> {
    lp: &'a StandardForm,
    /// Row sign flips making `b ≥ 0`.
    flip: Vec<f64>,
    rhs: Vec<f64>,
    /// Columns `n..n+m` are artificials `e_r`.
    n: usize,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    inv: Inverse,
    x_b: Vec<f64>,
    iterations: usize,
}

impl<'a> Tableau<'a> {
    fn new(lp: &'a StandardForm) -> Self {
        let m = lp.rows;
        let n = lp.columns.len();
        let flip: Vec<f64> = lp.rhs.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
        let rhs: Vec<f64> = lp.rhs.iter().zip(&flip).map(|(b, f)| b * f).collect();
        let mut basis: Vec<usize> = (n..n + m).collect();
        let mut taken = vec![false; m];
        for (j, col) in lp.columns.iter().enumerate() {
            if let [(r, v)] = col.as_slice() {
                if !taken[*r] && (v * flip[*r] - 1.0).abs() == 0.0 {
                    taken[*r] = true;
                    basis[*r] = j;
                }
            }
        }
        let mut is_basic = vec![false; n + m];
        for &j in &basis {
            is_basic[j] = true;
        }
        Tableau {
            lp,
            x_b: rhs.clone(),
            flip,
            rhs,
            n,
            basis,
            is_basic,
            inv: Inverse::identity(m),
            iterations: 0,
        }
    }

    fn column(&self, j: usize) -> Column {
        if j >= self.n {
            vec![(j - self.n, 1.0)]
        } else {
            self.lp.columns[j].iter().map(|&(r, v)| (r, v * self.flip[r])).collect()
        }
    }

    fn refresh_x(&mut self) {
        let m = self.lp.rows;
        let mut x = vec![0.0; m];
        for k in 0..m {
            let b = self.rhs[k];
            if b != 0.0 {
                for (o, c) in x.iter_mut().zip(self.inv.col(k)) {
                    *o += b * c;
                }
            }
        }
        self.x_b = x;
    }

    /// Runs simplex iterations for the given costs; artificials never enter.
    fn run(&mut self, cost: &dyn Fn(usize) -> f64, opts: &DenseSimplex) -> LpStatus {
        let m = self.lp.rows;
        let mut pi = vec![0.0; m];
        let mut alpha = vec![0.0; m];
        let mut cb = vec![0.0; m];
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= opts.max_iters {
                return LpStatus::IterationLimit;
            }
            for (c, &j) in cb.iter_mut().zip(&self.basis) {
                *c = cost(j);
            }
            self.inv.btran(&cb, &mut pi);
            let bland = degenerate_run > 50;
            let mut entering = None;
            let mut best = -opts.tol;
            for j in 0..self.n {
                if self.is_basic[j] {
                    continue;
                }
                let col = &self.lp.columns[j];
                let scale = 1.0 + col.iter().fold(0.0f64, |s, &(_, v)| s.max(v.abs()));
                let d = cost(j) - col.iter().map(|&(r, v)| pi[r] * v * self.flip[r]).sum::<f64>();
                if d < best * scale {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d / scale;
                }
            }
            let Some(q) = entering else {
                return LpStatus::Optimal;
            };
            self.inv.ftran(&self.column(q), &mut alpha);
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                let a = alpha[r];
                if self.basis[r] >= self.n && a.abs() > opts.pivot_tol && self.x_b[r].abs() <= opts.tol {
                    // a zero-level artificial must not move off zero
                    leave = Some((r, 0.0));
                    break;
                }
                if a > opts.pivot_tol {
                    let ratio = self.x_b[r].max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some((l, t)) => {
                            ratio < t - 1e-12
                                || (ratio <= t + 1e-12
                                    && if bland {
                                        self.basis[r] < self.basis[l]
                                    } else {
                                        a > alpha[l]
                                    })
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((r, theta)) = leave else {
                return LpStatus::Unbounded;
            };
            degenerate_run = if theta <= opts.tol { degenerate_run + 1 } else { 0 };
            for (x, a) in self.x_b.iter_mut().zip(&alpha) {
                *x -= theta * a;
            }
            self.x_b[r] = theta;
            self.inv.pivot(r, &alpha);
            self.is_basic[self.basis[r]] = false;
            self.basis[r] = q;
            self.is_basic[q] = true;
            self.iterations += 1;
            if self.iterations.is_multiple_of(64) {
                self.refresh_x();
            }
        }
    }

    fn basis_matrix(&self) -> DMatrix<f64> {
        let m = self.lp.rows;
        let mut b = DMatrix::zeros(m, m);
        for (k, &j) in self.basis.iter().enumerate() {
            for (r, v) in self.column(j) {
                b[(r, k)] = v;
            }
        }
        b
    }
}

impl LpEngine for DenseSimplex {
    fn solve(&self, lp: &StandardForm) -> LpSolution {
        let m = lp.rows;
        let n = lp.columns.len();
        let mut t = Tableau::new(lp);
        let fail = |status, t: &Tableau| LpSolution {
            status,
            x: vec![0.0; n],
            duals: vec![0.0; m],
            objective: f64::NAN,
            iterations: t.iterations,
        };
        if t.basis.iter().any(|&j| j >= n) {
            let status = t.run(&|j| if j >= n { 1.0 } else { 0.0 }, self);
            if status == LpStatus::IterationLimit {
                return fail(status, &t);
            }
            t.refresh_x();
            let infeas: f64 = t.basis.iter().zip(&t.x_b).filter(|(j, _)| **j >= n).map(|(_, x)| x.abs()).sum();
            let scale = 1.0 + t.rhs.iter().fold(0.0f64, |s, v| s.max(v.abs()));
            if infeas > 1e-9 * scale {
                return fail(LpStatus::Infeasible, &t);
            }
        }
        let cost = |j: usize| if j >= n { 0.0 } else { lp.cost[j] };
        let status = t.run(&cost, self);
        if status != LpStatus::Optimal {
            return fail(status, &t);
        }
        // final factorization for accurate primal and dual values
        let basis = t.basis_matrix();
        let x_b = basis
            .clone()
            .lu()
            .solve(&DVector::from_vec(t.rhs.clone()))
            .unwrap_or_else(|| DVector::from_vec(t.x_b.clone()));
        let cb = DVector::from_iterator(m, t.basis.iter().map(|&j| cost(j)));
        let pi = basis.transpose().lu().solve(&cb).unwrap_or_else(|| {
            let mut pi = vec![0.0; m];
            t.inv.btran(cb.as_slice(), &mut pi);
            DVector::from_vec(pi)
        });
        let mut x = vec![0.0; n];
        for (k, &j) in t.basis.iter().enumerate() {
            if j < n {
                x[j] = x_b[k].max(0.0);
            }
        }
        let duals: Vec<f64> = pi.iter().zip(&t.flip).map(|(p, f)| p * f).collect();
        let objective = x.iter().zip(&lp.cost).map(|(x, c)| x * c).sum();
        LpSolution {
            status: LpStatus::Optimal,
            x,
            duals,
            objective,
            iterations: t.iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(lp: &StandardForm) -> LpSolution {
        DenseSimplex::default().solve(lp)
    }

    #[test]
    fn small_textbook_problem() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18
        let mut lp = StandardForm::new(3, vec![4.0, 12.0, 18.0]);
        lp.add_column(-3.0, vec![(0, 1.0), (2, 3.0)]);
        lp.add_column(-5.0, vec![(1, 2.0), (2, 2.0)]);
        for r in 0..3 {
            lp.add_column(0.0, vec![(r, 1.0)]);
        }
        let s = solve(&lp);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 36.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
        // shadow prices of the binding rows
        assert!((s.duals[1] + 1.5).abs() < 1e-12 && (s.duals[2] + 1.0).abs() < 1e-12);
        assert!(lp.residual(&s.x) < 1e-12);
    }

    #[test]
    fn phase_one_with_negative_rhs() {
        // min x + y s.t. x + y ≥ 2 (as −x − y + s = −2), x − y = 0
        let mut lp = StandardForm::new(2, vec![-2.0, 0.0]);
        lp.add_column(1.0, vec![(0, -1.0), (1, 1.0)]);
        lp.add_column(1.0, vec![(0, -1.0), (1, -1.0)]);
        lp.add_column(0.0, vec![(0, 1.0)]);
        let s = solve(&lp);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-12);
        assert!((s.x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = StandardForm::new(1, vec![-1.0]);
        lp.add_column(0.0, vec![(0, 1.0)]);
        assert_eq!(solve(&lp).status, LpStatus::Infeasible);
        let mut lp = StandardForm::new(1, vec![1.0]);
        lp.add_column(-1.0, vec![(0, 1.0)]);
        lp.add_column(0.0, vec![(0, -1.0)]);
        assert_eq!(solve(&lp).status, LpStatus::Unbounded);
    }

    #[test]
    fn matches_brute_force_on_random_problems() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            // min cᵀx s.t. Gx ≤ h, x ≥ 0, bounded by Σx ≤ 10
            let (m, n) = (3, 2);
            let mut lp = StandardForm::new(m + 1, vec![0.0; m + 1]);
            let g: Vec<[f64; 2]> = (0..m).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
            for r in 0..m {
                lp.rhs[r] = rng.gen_range(-0.5..2.0);
            }
            lp.rhs[m] = 10.0;
            let c = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            for j in 0..n {
                let mut col: Column = (0..m).map(|r| (r, g[r][j])).collect();
                col.push((m, 1.0));
                lp.add_column(c[j], col);
            }
            for r in 0..=m {
                lp.add_column(0.0, vec![(r, 1.0)]);
            }
            let s = solve(&lp);
            // enumerate vertices of the 2D feasible region
            let mut lines: Vec<([f64; 2], f64)> = g.iter().zip(&lp.rhs).map(|(a, b)| (*a, *b)).collect();
            lines.push(([1.0, 1.0], 10.0));
            lines.push(([-1.0, 0.0], 0.0));
            lines.push(([0.0, -1.0], 0.0));
            let feasible = |p: [f64; 2]| lines.iter().all(|(a, b)| a[0] * p[0] + a[1] * p[1] <= b + 1e-9);
            let mut best: Option<f64> = None;
            for i in 0..lines.len() {
                for k in i + 1..lines.len() {
                    let (a, b) = lines[i];
                    let (c2, d) = lines[k];
                    let det = a[0] * c2[1] - a[1] * c2[0];
                    if det.abs() < 1e-12 {
                        continue;
                    }
                    let p = [(b * c2[1] - a[1] * d) / det, (a[0] * d - b * c2[0]) / det];
                    if feasible(p) {
                        let v = c[0] * p[0] + c[1] * p[1];
                        best = Some(best.map_or(v, |b: f64| b.min(v)));
                    }
                }
            }
            match best {
                Some(v) => {
                    assert_eq!(s.status, LpStatus::Optimal);
                    assert!((s.objective - v).abs() < 1e-9, "{} vs {v}", s.objective);
                }
                None => assert_eq!(s.status, LpStatus::Infeasible),
            }
        }
    }
}
