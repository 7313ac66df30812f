//! Real-valued cone programs: linear objective, linear equalities,
//! second-order cones, exponential cones, and variable bounds.
//!
//! The container is solver-agnostic; [`ConeProgram::solve`] currently maps the
//! program onto the Clarabel primal-dual interior-point solver. Everything in
//! the rest of the crate binds to this contract, not to the backend.
//!
//! Complex quantities (beamformers, effective gains) are handled through
//! [`ComplexBlock`]: a complex vector of dimension `d` is embedded as `2d`
//! stacked reals, real parts first.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, ExponentialConeT, IPSolver, NonnegativeConeT,
    SecondOrderConeT, SolverStatus, SupportedConeT, ZeroConeT,
};
use nalgebra::DVector;
use num_complex::Complex64;

use crate::{Error, Result};

/// Sparse affine expression `sum_i coeff_i * x_i + constant`.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(idx: usize) -> Self {
        Self {
            terms: vec![(idx, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(idx: usize, coeff: f64) -> Self {
        Self {
            terms: vec![(idx, coeff)],
            constant: 0.0,
        }
    }

    pub fn push(&mut self, idx: usize, coeff: f64) {
        if coeff != 0.0 {
            self.terms.push((idx, coeff));
        }
    }

    pub fn add_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for (_, c) in &mut self.terms {
            *c *= s;
        }
        self.constant *= s;
        self
    }

    pub fn plus(mut self, other: &LinExpr) -> Self {
        self.terms.extend(other.terms.iter().copied());
        self.constant += other.constant;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|&(i, c)| c * x[i])
            .sum::<f64>()
            + self.constant
    }
}

/// `|| rows(x) || <= rhs(x)`. Empty `rows` degenerates to `rhs(x) >= 0`.
#[derive(Debug, Clone)]
pub struct SocConstraint {
    pub rows: Vec<LinExpr>,
    pub rhs: LinExpr,
}

/// `(r, s, t)` in the exponential cone: `s > 0` and `s * exp(r/s) <= t`.
#[derive(Debug, Clone)]
pub struct ExpConstraint {
    pub r: LinExpr,
    pub s: LinExpr,
    pub t: LinExpr,
}

/// Handle to a complex vector embedded as `2*dim` stacked reals.
///
/// Layout: `x[start .. start+dim]` are real parts, `x[start+dim .. start+2dim]`
/// are imaginary parts.
#[derive(Debug, Clone, Copy)]
pub struct ComplexBlock {
    pub start: usize,
    pub dim: usize,
}

impl ComplexBlock {
    pub fn re(&self, i: usize) -> usize {
        debug_assert!(i < self.dim);
        self.start + i
    }

    pub fn im(&self, i: usize) -> usize {
        debug_assert!(i < self.dim);
        self.start + self.dim + i
    }

    /// Affine rows of the complex inner product `sum_i c_i * w_i` where `w`
    /// is this block. For `a^H w` pass `c = conj(a)`; for `b^T w` pass `c = b`.
    pub fn linear_combo(&self, c: &DVector<Complex64>) -> (LinExpr, LinExpr) {
        debug_assert_eq!(c.len(), self.dim);
        let mut re = LinExpr::new();
        let mut im = LinExpr::new();
        for i in 0..self.dim {
            // (cr + j ci)(wr + j wi) = (cr wr - ci wi) + j (ci wr + cr wi)
            re.push(self.re(i), c[i].re);
            re.push(self.im(i), -c[i].im);
            im.push(self.re(i), c[i].im);
            im.push(self.im(i), c[i].re);
        }
        (re, im)
    }

    /// Reads the complex value of this block out of a solution vector.
    pub fn value(&self, x: &[f64]) -> DVector<Complex64> {
        DVector::from_fn(self.dim, |i, _| {
            Complex64::new(x[self.re(i)], x[self.im(i)])
        })
    }
}

/// Termination status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
    NumericalError,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "Optimal",
            SolveStatus::Infeasible => "Infeasible",
            SolveStatus::MaxIterations => "MaxIterations",
            SolveStatus::NumericalError => "NumericalError",
        };
        f.write_str(s)
    }
}

/// Outcome of [`ConeProgram::solve`].
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
}

/// Worst-case constraint violations of a candidate point, per cone family.
#[derive(Debug, Clone, Default)]
pub struct FeasibilityReport {
    pub max_eq: f64,
    pub max_soc: f64,
    pub max_exp: f64,
    pub max_bound: f64,
}

impl FeasibilityReport {
    pub fn max_violation(&self) -> f64 {
        self.max_eq.max(self.max_soc).max(self.max_exp).max(self.max_bound)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max_violation() <= tol
    }
}

/// Minimize `c^T x` subject to equalities, SOC, exponential-cone, and bound
/// constraints.
#[derive(Debug, Clone, Default)]
pub struct ConeProgram {
    n_vars: usize,
    objective: Vec<f64>,
    eqs: Vec<LinExpr>,
    socs: Vec<SocConstraint>,
    exps: Vec<ExpConstraint>,
    lower: Vec<Option<f64>>,
    upper: Vec<Option<f64>>,
}

impl ConeProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Adds `n` unbounded real variables, returning the index of the first.
    pub fn add_vars(&mut self, n: usize) -> usize {
        let start = self.n_vars;
        self.n_vars += n;
        self.objective.resize(self.n_vars, 0.0);
        self.lower.resize(self.n_vars, None);
        self.upper.resize(self.n_vars, None);
        start
    }

    /// Adds a complex vector variable of dimension `dim` as `2*dim` reals.
    pub fn add_complex_block(&mut self, dim: usize) -> ComplexBlock {
        assert!(dim >= 1);
        let start = self.add_vars(2 * dim);
        ComplexBlock { start, dim }
    }

    pub fn set_objective(&mut self, idx: usize, coeff: f64) {
        self.objective[idx] = coeff;
    }

    pub fn add_objective(&mut self, idx: usize, coeff: f64) {
        self.objective[idx] += coeff;
    }

    pub fn set_lower(&mut self, idx: usize, bound: f64) {
        self.lower[idx] = Some(bound);
    }

    pub fn set_upper(&mut self, idx: usize, bound: f64) {
        self.upper[idx] = Some(bound);
    }

    /// Rescales the objective so its largest coefficient has magnitude one,
    /// returning the applied factor (true objective = reported * factor).
    /// Leaves the argmin unchanged; improves interior-point scaling when
    /// penalty coefficients span many orders of magnitude.
    pub fn normalize_objective(&mut self) -> f64 {
        let m = self.objective.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        if m > 0.0 {
            for c in &mut self.objective {
                *c /= m;
            }
            m
        } else {
            1.0
        }
    }

    /// Constrains `expr(x) = 0`.
    pub fn add_eq(&mut self, expr: LinExpr) {
        self.eqs.push(expr);
    }

    /// Constrains `|| rows(x) || <= rhs(x)`.
    pub fn add_soc(&mut self, rows: Vec<LinExpr>, rhs: LinExpr) {
        self.socs.push(SocConstraint { rows, rhs });
    }

    /// Constrains `expr(x) <= 0` (degenerate one-dimensional cone).
    pub fn add_linear_le(&mut self, expr: LinExpr) {
        self.socs.push(SocConstraint {
            rows: Vec::new(),
            rhs: expr.scaled(-1.0),
        });
    }

    /// Constrains `s(x) * exp(r(x)/s(x)) <= t(x)` with `s(x) > 0`.
    pub fn add_exp(&mut self, r: LinExpr, s: LinExpr, t: LinExpr) {
        self.exps.push(ExpConstraint { r, s, t });
    }

    /// Epigraph of a squared Euclidean norm: `|| rows(x) ||^2 <= bound(x)`,
    /// written as the SOC `||(rows, (bound-1)/2)|| <= (bound+1)/2`.
    pub fn add_squared_norm_le(&mut self, mut rows: Vec<LinExpr>, bound: LinExpr) {
        let lo = bound.clone().add_const(-1.0).scaled(0.5);
        let hi = bound.add_const(1.0).scaled(0.5);
        rows.push(lo);
        self.add_soc(rows, hi);
    }

    fn validate(&self) -> Result<()> {
        if self.n_vars == 0 {
            return Err(Error::Build("program has no variables".into()));
        }
        let check = |e: &LinExpr| -> Result<()> {
            for &(i, _) in &e.terms {
                if i >= self.n_vars {
                    return Err(Error::Build(format!(
                        "variable index {i} out of range (n_vars = {})",
                        self.n_vars
                    )));
                }
            }
            Ok(())
        };
        for e in &self.eqs {
            check(e)?;
        }
        for s in &self.socs {
            check(&s.rhs)?;
            for r in &s.rows {
                check(r)?;
            }
        }
        for e in &self.exps {
            check(&e.r)?;
            check(&e.s)?;
            check(&e.t)?;
        }
        Ok(())
    }

    /// Solves the program with an interior-point method. Deterministic for
    /// identical inputs.
    pub fn solve(&self, tol_feas: f64, tol_gap: f64, max_iter: usize) -> Result<SolveResult> {
        self.validate()?;

        // Assemble A x + s = b with s in a product cone. Every row is encoded
        // as s = expr(x): A row = -expr.terms, b = expr.constant.
        let mut tri_r: Vec<usize> = Vec::new();
        let mut tri_c: Vec<usize> = Vec::new();
        let mut tri_v: Vec<f64> = Vec::new();
        let mut b: Vec<f64> = Vec::new();
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        let mut row = 0usize;

        let push_expr = |expr: &LinExpr,
                             row: &mut usize,
                             tri_r: &mut Vec<usize>,
                             tri_c: &mut Vec<usize>,
                             tri_v: &mut Vec<f64>,
                             b: &mut Vec<f64>| {
            for &(i, c) in &expr.terms {
                tri_r.push(*row);
                tri_c.push(i);
                tri_v.push(-c);
            }
            b.push(expr.constant);
            *row += 1;
        };

        if !self.eqs.is_empty() {
            for e in &self.eqs {
                push_expr(e, &mut row, &mut tri_r, &mut tri_c, &mut tri_v, &mut b);
            }
            cones.push(ZeroConeT(self.eqs.len()));
        }

        let mut n_nonneg = 0usize;
        for (i, lo) in self.lower.iter().enumerate() {
            if let Some(l) = lo {
                // x_i - l >= 0
                let e = LinExpr::var(i).add_const(-l);
                push_expr(&e, &mut row, &mut tri_r, &mut tri_c, &mut tri_v, &mut b);
                n_nonneg += 1;
            }
        }
        for (i, hi) in self.upper.iter().enumerate() {
            if let Some(u) = hi {
                // u - x_i >= 0
                let e = LinExpr::term(i, -1.0).add_const(*u);
                push_expr(&e, &mut row, &mut tri_r, &mut tri_c, &mut tri_v, &mut b);
                n_nonneg += 1;
            }
        }
        for s in &self.socs {
            if s.rows.is_empty() {
                push_expr(&s.rhs, &mut row, &mut tri_r, &mut tri_c, &mut tri_v, &mut b);
                n_nonneg += 1;
            }
        }
        if n_nonneg > 0 {
            cones.push(NonnegativeConeT(n_nonneg));
        }

        for s in &self.socs {
            if s.rows.is_empty() {
                continue;
            }
            push_expr(&s.rhs, &mut row, &mut tri_r, &mut tri_c, &mut tri_v, &mut b);
            for r in &s.rows {
                push_expr(r, &mut row, &mut tri_r, &mut tri_c, &mut tri_v, &mut b);
            }
            cones.push(SecondOrderConeT(1 + s.rows.len()));
        }

        for e in &self.exps {
            push_expr(&e.r, &mut row, &mut tri_r, &mut tri_c, &mut tri_v, &mut b);
            push_expr(&e.s, &mut row, &mut tri_r, &mut tri_c, &mut tri_v, &mut b);
            push_expr(&e.t, &mut row, &mut tri_r, &mut tri_c, &mut tri_v, &mut b);
            cones.push(ExponentialConeT());
        }

        let a = CscMatrix::new_from_triplets(row, self.n_vars, tri_r, tri_c, tri_v);
        let p = CscMatrix::<f64>::zeros((self.n_vars, self.n_vars));

        let settings = DefaultSettings {
            verbose: false,
            max_iter: max_iter as u32,
            tol_feas,
            tol_gap_abs: tol_gap,
            tol_gap_rel: tol_gap,
            ..DefaultSettings::default()
        };

        let mut solver = DefaultSolver::new(&p, &self.objective, &a, &b, &cones, settings)
            .map_err(|e| Error::Build(format!("solver setup failed: {e:?}")))?;
        solver.solve();

        let iterations = solver.info.iterations as usize;
        let status = match solver.solution.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible
            | SolverStatus::DualInfeasible
            | SolverStatus::AlmostPrimalInfeasible
            | SolverStatus::AlmostDualInfeasible => SolveStatus::Infeasible,
            SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::MaxIterations,
            _ => SolveStatus::NumericalError,
        };

        Ok(SolveResult {
            status,
            x: solver.solution.x.clone(),
            objective_value: solver.solution.obj_val,
            iterations,
        })
    }

    /// Reports the worst-case violation of each cone family at `x`.
    pub fn check_feasibility(&self, x: &[f64]) -> FeasibilityReport {
        let mut rep = FeasibilityReport::default();
        for e in &self.eqs {
            rep.max_eq = rep.max_eq.max(e.eval(x).abs());
        }
        for s in &self.socs {
            let norm = s
                .rows
                .iter()
                .map(|r| {
                    let v = r.eval(x);
                    v * v
                })
                .sum::<f64>()
                .sqrt();
            rep.max_soc = rep.max_soc.max(norm - s.rhs.eval(x)).max(0.0);
        }
        for e in &self.exps {
            let (r, s, t) = (e.r.eval(x), e.s.eval(x), e.t.eval(x));
            let viol = if s <= 0.0 {
                // Closure of the cone at s = 0 requires r <= 0 and t >= 0.
                (-s).max(r.max(0.0)).max(-t)
            } else {
                (s * (r / s).exp() - t).max(0.0)
            };
            rep.max_exp = rep.max_exp.max(viol);
        }
        for (i, lo) in self.lower.iter().enumerate() {
            if let Some(l) = lo {
                rep.max_bound = rep.max_bound.max(l - x[i]).max(0.0);
            }
        }
        for (i, hi) in self.upper.iter().enumerate() {
            if let Some(u) = hi {
                rep.max_bound = rep.max_bound.max(x[i] - u).max(0.0);
            }
        }
        rep
    }

    /// Plain-text dump for cross-solver debugging: dimensions first, then one
    /// line per constraint row.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let fmt_expr = |e: &LinExpr| -> String {
            let mut s = String::new();
            for &(i, c) in &e.terms {
                let _ = write!(s, "{c:+.12e}*x{i} ");
            }
            let _ = write!(s, "{:+.12e}", e.constant);
            s
        };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "vars {} eqs {} socs {} exps {}",
            self.n_vars,
            self.eqs.len(),
            self.socs.len(),
            self.exps.len()
        );
        let _ = writeln!(
            out,
            "minimize {}",
            fmt_expr(&LinExpr {
                terms: self
                    .objective
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| **c != 0.0)
                    .map(|(i, c)| (i, *c))
                    .collect(),
                constant: 0.0,
            })
        );
        for e in &self.eqs {
            let _ = writeln!(out, "eq 0 = {}", fmt_expr(e));
        }
        for s in &self.socs {
            let _ = writeln!(out, "soc dim {} rhs {}", s.rows.len() + 1, fmt_expr(&s.rhs));
            for r in &s.rows {
                let _ = writeln!(out, "  row {}", fmt_expr(r));
            }
        }
        for e in &self.exps {
            let _ = writeln!(
                out,
                "exp r {} | s {} | t {}",
                fmt_expr(&e.r),
                fmt_expr(&e.s),
                fmt_expr(&e.t)
            );
        }
        for (i, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo.is_some() || hi.is_some() {
                let _ = writeln!(out, "bound x{i} in [{lo:?}, {hi:?}]");
            }
        }
        out
    }
}
