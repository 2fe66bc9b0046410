//! Two-phase primal simplex on a dense tableau.
//!
//! Pricing is Dantzig's rule until a run of degenerate pivots trips the
//! cycling counter, after which Bland's rule takes over for the rest of the
//! phase. The final basis is refactorized from the original data to recover
//! both the primal point and the duals.

use super::matrix::{norm_inf, Matrix};
use super::{verify_kkt, LinearProgram, LpError, LpSolution, LpStatus, Tolerances};
use nalgebra::{DMatrix, DVector};

const DEGENERATE_RUN_LIMIT: usize = 50;

#[derive(Clone, Copy, Debug)]
enum RowKind {
    Eq(usize),
    Ub(usize),
    Bound,
}

#[derive(Clone, Copy, Debug)]
enum VarMap {
    /// `x = offset + sign·x'`
    Shift { col: usize, sign: f64, offset: f64 },
    /// `x = x⁺ − x⁻`
    Split { pos: usize, neg: usize },
}

struct StandardForm {
    /// Structural and slack columns followed by one artificial per row that needs one.
    a: Matrix,
    b: Vec<f64>,
    c: Vec<f64>,
    n_real: usize,
    row_kind: Vec<RowKind>,
    row_flip: Vec<f64>,
    var_map: Vec<VarMap>,
    bound_row: Vec<Option<usize>>,
    initial_basis: Vec<usize>,
}

fn standardize(lp: &LinearProgram) -> Result<StandardForm, LpStatus> {
    let n = lp.num_vars();
    let mut var_map = Vec::with_capacity(n);
    let mut ncols = 0usize;
    for j in 0..n {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        if l > u {
            return Err(LpStatus::Infeasible);
        }
        if l.is_finite() {
            var_map.push(VarMap::Shift { col: ncols, sign: 1.0, offset: l });
            ncols += 1;
        } else if u.is_finite() {
            var_map.push(VarMap::Shift { col: ncols, sign: -1.0, offset: u });
            ncols += 1;
        } else {
            var_map.push(VarMap::Split { pos: ncols, neg: ncols + 1 });
            ncols += 2;
        }
    }
    let n_struct = ncols;
    let n_eq = lp.eq_rhs.len();
    let n_ub = lp.ub_rhs.len();
    let boxed: Vec<usize> = (0..n)
        .filter(|&j| lp.lower[j].is_finite() && lp.upper[j].is_finite())
        .collect();
    let m = n_eq + n_ub + boxed.len();
    let n_real = n_struct + n_ub + boxed.len();

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    let mut row_kind = Vec::with_capacity(m);
    let mut slack_of_row: Vec<Option<usize>> = Vec::with_capacity(m);

    let structural = |coeffs: &[f64], row: &mut Vec<f64>| -> f64 {
        let mut shift = 0.0;
        for (j, &a) in coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match var_map[j] {
                VarMap::Shift { col, sign, offset } => {
                    row[col] += a * sign;
                    shift += a * offset;
                }
                VarMap::Split { pos, neg } => {
                    row[pos] += a;
                    row[neg] -= a;
                }
            }
        }
        shift
    };

    for i in 0..n_eq {
        let mut row = vec![0.0; n_real];
        let shift = structural(lp.eq_matrix.row(i), &mut row);
        rows.push(row);
        b.push(lp.eq_rhs[i] - shift);
        row_kind.push(RowKind::Eq(i));
        slack_of_row.push(None);
    }
    for i in 0..n_ub {
        let mut row = vec![0.0; n_real];
        let shift = structural(lp.ub_matrix.row(i), &mut row);
        let s = n_struct + i;
        row[s] = 1.0;
        rows.push(row);
        b.push(lp.ub_rhs[i] - shift);
        row_kind.push(RowKind::Ub(i));
        slack_of_row.push(Some(s));
    }
    let mut bound_row = vec![None; n];
    for (k, &j) in boxed.iter().enumerate() {
        let mut row = vec![0.0; n_real];
        if let VarMap::Shift { col, .. } = var_map[j] {
            row[col] = 1.0;
        }
        let s = n_struct + n_ub + k;
        row[s] = 1.0;
        bound_row[j] = Some(rows.len());
        rows.push(row);
        b.push(lp.upper[j] - lp.lower[j]);
        row_kind.push(RowKind::Bound);
        slack_of_row.push(Some(s));
    }

    let mut row_flip = vec![1.0; m];
    for r in 0..m {
        if b[r] < 0.0 {
            row_flip[r] = -1.0;
            b[r] = -b[r];
            rows[r].iter_mut().for_each(|v| *v = -*v);
        }
    }

    let mut initial_basis = Vec::with_capacity(m);
    let mut n_art = 0;
    let needs_art: Vec<bool> = (0..m)
        .map(|r| !(slack_of_row[r].is_some() && row_flip[r] > 0.0))
        .collect();
    let total = n_real + needs_art.iter().filter(|v| **v).count();
    let mut a = Matrix::with_cols(total);
    for r in 0..m {
        let mut row = rows[r].clone();
        row.resize(total, 0.0);
        if needs_art[r] {
            let col = n_real + n_art;
            row[col] = 1.0;
            initial_basis.push(col);
            n_art += 1;
        } else {
            initial_basis.push(slack_of_row[r].unwrap());
        }
        a.push_row(&row);
    }

    let mut c = vec![0.0; total];
    for (j, map) in var_map.iter().enumerate() {
        match *map {
            VarMap::Shift { col, sign, .. } => c[col] = lp.objective[j] * sign,
            VarMap::Split { pos, neg } => {
                c[pos] = lp.objective[j];
                c[neg] = -lp.objective[j];
            }
        }
    }

    Ok(StandardForm {
        a,
        b,
        c,
        n_real,
        row_kind,
        row_flip,
        var_map,
        bound_row,
        initial_basis,
    })
}

struct Tableau {
    m: usize,
    width: usize,
    /// `m` constraint rows followed by the reduced-cost row; last column is the rhs.
    t: Vec<f64>,
    basis: Vec<usize>,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn new(sf: &StandardForm) -> Self {
        let m = sf.b.len();
        let ncols = sf.a.ncols();
        let width = ncols + 1;
        let mut t = vec![0.0; (m + 1) * width];
        for r in 0..m {
            t[r * width..r * width + ncols].copy_from_slice(sf.a.row(r));
            t[r * width + ncols] = sf.b[r];
        }
        Self {
            m,
            width,
            t,
            basis: sf.initial_basis.clone(),
        }
    }

    fn at(&self, r: usize, j: usize) -> f64 {
        self.t[r * self.width + j]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.t[r * self.width + self.width - 1]
    }

    fn set_costs(&mut self, cost: &[f64]) {
        let (m, w) = (self.m, self.width);
        let mut d = vec![0.0; w];
        d[..w - 1].copy_from_slice(cost);
        for r in 0..m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for j in 0..w {
                    d[j] -= cb * self.t[r * w + j];
                }
            }
        }
        self.t[m * w..(m + 1) * w].copy_from_slice(&d);
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let p = self.t[pr * w + pc];
        for j in 0..w {
            self.t[pr * w + j] /= p;
        }
        self.t[pr * w + pc] = 1.0;
        let (before, rest) = self.t.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        let eliminate = |row: &mut [f64]| {
            let f = row[pc];
            if f != 0.0 {
                for (v, &pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[pc] = 0.0;
            }
        };
        before.chunks_mut(w).for_each(eliminate);
        after.chunks_mut(w).for_each(eliminate);
        self.basis[pr] = pc;
    }

    fn run(&mut self, allowed: &[bool], dtol: f64, tol: &Tolerances, max_iter: usize) -> Result<PhaseEnd, LpError> {
        let (m, w) = (self.m, self.width);
        let mut bland = false;
        let mut degenerate_run = 0usize;
        for _ in 0..max_iter {
            let d = &self.t[m * w..(m + 1) * w - 1];
            let entering = if bland {
                (0..w - 1).find(|&j| allowed[j] && d[j] < -dtol)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for j in 0..w - 1 {
                    if allowed[j] && d[j] < -dtol && best.is_none_or(|(_, v)| d[j] < v) {
                        best = Some((j, d[j]));
                    }
                }
                best.map(|(j, _)| j)
            };
            let Some(q) = entering else {
                return Ok(PhaseEnd::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                let a = self.at(r, q);
                if a <= tol.pivot_tol {
                    continue;
                }
                let ratio = self.rhs(r).max(0.0) / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((br, bv)) => {
                        let tie = (ratio - bv).abs() <= 1e-12 * (1.0 + bv.abs());
                        if ratio < bv && !tie {
                            Some((r, ratio))
                        } else if tie {
                            let better = if bland {
                                self.basis[r] < self.basis[br]
                            } else {
                                a > self.at(br, q)
                            };
                            if better { Some((r, ratio)) } else { Some((br, bv)) }
                        } else {
                            Some((br, bv))
                        }
                    }
                };
            }
            let Some((pr, ratio)) = leave else {
                return Ok(PhaseEnd::Unbounded);
            };
            if ratio <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run > DEGENERATE_RUN_LIMIT {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
            self.pivot(pr, q);
        }
        Err(LpError::NumericalFailure(format!("simplex iteration limit {max_iter} reached")))
    }
}

/// Solves a [`LinearProgram`], returning primal and dual certificates on optimality.
pub fn solve_lp(lp: &LinearProgram, tol: &Tolerances) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let sf = match standardize(lp) {
        Ok(sf) => sf,
        Err(status) => return Ok(LpSolution::without_solution(status)),
    };
    let m = sf.b.len();
    let total = sf.a.ncols();
    let bmax = norm_inf(&sf.b);
    let cmax = norm_inf(&sf.c);
    let max_iter = 200 * (m + total) + 1000;
    let mut tab = Tableau::new(&sf);

    if total > sf.n_real {
        let mut c1 = vec![0.0; total];
        c1[sf.n_real..].iter_mut().for_each(|v| *v = 1.0);
        tab.set_costs(&c1);
        let allowed = vec![true; total];
        tab.run(&allowed, 1e-11, tol, max_iter)?;
        let infeas: f64 = (0..m)
            .filter(|&r| tab.basis[r] >= sf.n_real)
            .map(|r| tab.rhs(r))
            .sum();
        if infeas > 1e-9 * (1.0 + bmax) {
            return Ok(LpSolution::without_solution(LpStatus::Infeasible));
        }
        for r in 0..m {
            if tab.basis[r] < sf.n_real {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..sf.n_real {
                let a = tab.at(r, j).abs();
                if a > 1e-7 && best.is_none_or(|(_, v)| a > v) {
                    best = Some((j, a));
                }
            }
            if let Some((j, _)) = best {
                tab.pivot(r, j);
            }
        }
    }

    let allowed: Vec<bool> = (0..total).map(|j| j < sf.n_real).collect();
    tab.set_costs(&sf.c);
    let dtol = 1e-10 * (1.0 + cmax);
    match tab.run(&allowed, dtol, tol, max_iter)? {
        PhaseEnd::Unbounded => return Ok(LpSolution::without_solution(LpStatus::Unbounded)),
        PhaseEnd::Optimal => {}
    }

    let (xb, y) = refactor(&sf, &tab.basis)?;
    if xb.iter().any(|&v| v < -1e-7 * (1.0 + bmax)) {
        return Err(LpError::NumericalFailure("refactorized basis is primal infeasible".into()));
    }
    let mut xs = vec![0.0; total];
    for (r, &col) in tab.basis.iter().enumerate() {
        xs[col] = xb[r];
    }
    let reduced = sf.a.tr_mul_vec(&y);
    let d: Vec<f64> = sf.c.iter().zip(&reduced).map(|(c, ay)| c - ay).collect();

    let sol = recover(lp, &sf, &xs, &y, &d);
    super::kkt::record_certificate(verify_kkt(lp, &sol).max());
    Ok(sol)
}

fn refactor(sf: &StandardForm, basis: &[usize]) -> Result<(Vec<f64>, Vec<f64>), LpError> {
    let m = basis.len();
    if m == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let bmat = DMatrix::from_fn(m, m, |r, k| sf.a.get(r, basis[k]));
    let lu = bmat.clone().lu();
    let xb = lu
        .solve(&DVector::from_column_slice(&sf.b))
        .ok_or_else(|| LpError::NumericalFailure("singular basis".into()))?;
    let cb = DVector::from_iterator(m, basis.iter().map(|&k| sf.c[k]));
    let y = bmat
        .transpose()
        .lu()
        .solve(&cb)
        .ok_or_else(|| LpError::NumericalFailure("singular basis transpose".into()))?;
    Ok((xb.iter().copied().collect(), y.iter().copied().collect()))
}

fn recover(lp: &LinearProgram, sf: &StandardForm, xs: &[f64], y: &[f64], d: &[f64]) -> LpSolution {
    let n = lp.num_vars();
    let mut primal = vec![0.0; n];
    let mut lower_duals = vec![0.0; n];
    let mut upper_duals = vec![0.0; n];
    let mut eq_duals = vec![0.0; lp.eq_rhs.len()];
    let mut ub_duals = vec![0.0; lp.ub_rhs.len()];
    let yo: Vec<f64> = y.iter().zip(&sf.row_flip).map(|(v, f)| v * f).collect();
    for (r, kind) in sf.row_kind.iter().enumerate() {
        match *kind {
            RowKind::Eq(i) => eq_duals[i] = yo[r],
            RowKind::Ub(i) => ub_duals[i] = -yo[r],
            RowKind::Bound => {}
        }
    }
    for j in 0..n {
        match sf.var_map[j] {
            VarMap::Shift { col, sign, offset } => {
                primal[j] = offset + sign * xs[col];
                if sign > 0.0 {
                    lower_duals[j] = d[col];
                    if let Some(r) = sf.bound_row[j] {
                        upper_duals[j] = -yo[r];
                    }
                } else {
                    upper_duals[j] = d[col];
                }
            }
            VarMap::Split { pos, neg } => primal[j] = xs[pos] - xs[neg],
        }
    }
    let objective = lp.objective_value(&primal);
    LpSolution {
        status: LpStatus::Optimal,
        primal,
        eq_duals,
        ub_duals,
        lower_duals,
        upper_duals,
        objective,
    }
}
