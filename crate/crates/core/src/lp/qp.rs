//! Primal active-set method for convex quadratic programs.
//!
//! The Hessian only has to be positive semidefinite. Steps are computed in an
//! orthonormal null space of the working set with a pseudo-inverse of the
//! reduced Hessian; a descent direction of zero curvature is followed as a ray
//! until a constraint blocks it.

use super::matrix::{dot, norm_inf, Matrix};
use super::{solve_lp, LinearProgram, LpError, LpStatus, Tolerances};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// `minimize ½xᵀHx + cᵀx + constant` over the constraints of `lp`, where `c` is `lp.objective`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticProgram {
    pub lp: LinearProgram,
    pub hessian: Matrix,
    pub constant: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

impl QuadraticProgram {
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let hx = self.hessian.mul_vec(x);
        0.5 * dot(x, &hx) + dot(&self.lp.objective, x) + self.constant
    }

    pub fn is_psd(&self) -> bool {
        let n = self.hessian.nrows();
        if n != self.hessian.ncols() {
            return false;
        }
        let h = DMatrix::from_row_slice(n, n, self.hessian.data());
        if (&h - h.transpose()).amax() > 1e-12 * (1.0 + h.amax()) {
            return false;
        }
        n == 0 || SymmetricEigen::new(h.clone()).eigenvalues.min() >= -1e-10 * (1.0 + h.amax())
    }
}

struct Row {
    a: Vec<f64>,
    b: f64,
    eq: bool,
}

fn collect_rows(lp: &LinearProgram) -> Vec<Row> {
    let n = lp.num_vars();
    let mut rows = Vec::new();
    for (a, &b) in lp.eq_matrix.rows().zip(&lp.eq_rhs) {
        rows.push(Row { a: a.to_vec(), b, eq: true });
    }
    for (a, &b) in lp.ub_matrix.rows().zip(&lp.ub_rhs) {
        rows.push(Row { a: a.to_vec(), b, eq: false });
    }
    for j in 0..n {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        if l.is_finite() && u.is_finite() && l == u {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            rows.push(Row { a, b: l, eq: true });
            continue;
        }
        if l.is_finite() {
            let mut a = vec![0.0; n];
            a[j] = -1.0;
            rows.push(Row { a, b: -l, eq: false });
        }
        if u.is_finite() {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            rows.push(Row { a, b: u, eq: false });
        }
    }
    rows
}

/// Orthonormal basis of the span of the working rows, built by twice-applied Gram-Schmidt.
fn orthonormal_span(rows: &[Row], working: &[usize]) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(working.len());
    for &i in working {
        if let Some(v) = orthogonalize(&rows[i].a, &q) {
            q.push(v);
        }
    }
    q
}

fn orthogonalize(a: &[f64], basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    let norm0 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm0 == 0.0 {
        return None;
    }
    let mut v = a.to_vec();
    for _ in 0..2 {
        for qk in basis {
            let c = dot(qk, &v);
            v.iter_mut().zip(qk).for_each(|(vi, qi)| *vi -= c * qi);
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= 1e-9 * norm0 {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

fn null_space(n: usize, span: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut all = span.to_vec();
    let mut z = Vec::new();
    for j in 0..n {
        if all.len() == n {
            break;
        }
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        if let Some(v) = orthogonalize(&e, &all) {
            all.push(v.clone());
            z.push(v);
        }
    }
    z
}

enum Step {
    Newton(Vec<f64>),
    Ray(Vec<f64>),
}

fn subspace_step(h: &Matrix, g: &[f64], z: &[Vec<f64>]) -> Step {
    let n = g.len();
    let k = z.len();
    if k == 0 {
        return Step::Newton(vec![0.0; n]);
    }
    let hz: Vec<Vec<f64>> = z.iter().map(|zi| h.mul_vec(zi)).collect();
    let red = DMatrix::from_fn(k, k, |a, b| 0.5 * (dot(&z[a], &hz[b]) + dot(&z[b], &hz[a])));
    let gz = DVector::from_iterator(k, z.iter().map(|zi| dot(zi, g)));
    let eig = SymmetricEigen::new(red);
    let lam_max = eig.eigenvalues.amax();
    let cut = 1e-10 * (1.0 + lam_max);
    let gscale = 1.0 + norm_inf(g);
    let mut pz = DVector::zeros(k);
    for i in 0..k {
        let v = eig.eigenvectors.column(i);
        let proj = v.dot(&gz);
        if eig.eigenvalues[i] > cut {
            pz -= v * (proj / eig.eigenvalues[i]);
        } else if proj.abs() > 1e-10 * gscale {
            // zero curvature with a nonzero slope: follow the ray downhill
            let dir = if proj > 0.0 { -v } else { v.into_owned() };
            let mut d = vec![0.0; n];
            for (c, zi) in dir.iter().zip(z) {
                d.iter_mut().zip(zi).for_each(|(di, zij)| *di += c * zij);
            }
            return Step::Ray(d);
        }
    }
    let mut p = vec![0.0; n];
    for (c, zi) in pz.iter().zip(z) {
        p.iter_mut().zip(zi).for_each(|(pi, zij)| *pi += c * zij);
    }
    Step::Newton(p)
}

/// Multipliers `λ` with `g + A_Wᵀλ = 0`, least-squares over the working rows.
fn multipliers(rows: &[Row], working: &[usize], g: &[f64]) -> Option<Vec<f64>> {
    let k = working.len();
    if k == 0 {
        return Some(Vec::new());
    }
    let gram = DMatrix::from_fn(k, k, |a, b| dot(&rows[working[a]].a, &rows[working[b]].a));
    let rhs = DVector::from_iterator(k, working.iter().map(|&i| -dot(&rows[i].a, g)));
    gram.lu().solve(&rhs).map(|v| v.iter().copied().collect())
}

/// Solves a convex QP exactly (to rounding) with a primal active-set method.
pub fn solve_qp(qp: &QuadraticProgram, tol: &Tolerances) -> Result<QpSolution, LpError> {
    let lp = &qp.lp;
    lp.validate()?;
    let n = lp.num_vars();
    if qp.hessian.nrows() != n || qp.hessian.ncols() != n {
        return Err(LpError::Malformed("hessian dimension mismatch".into()));
    }
    let mut phase1 = lp.clone();
    phase1.objective = vec![0.0; n];
    let start = solve_lp(&phase1, tol)?;
    if start.status != LpStatus::Optimal {
        return Ok(QpSolution {
            status: LpStatus::Infeasible,
            x: Vec::new(),
            objective: f64::INFINITY,
        });
    }
    let mut x = start.primal;
    let rows = collect_rows(lp);

    let mut working: Vec<usize> = Vec::new();
    let mut span: Vec<Vec<f64>> = Vec::new();
    let try_add = |i: usize, working: &mut Vec<usize>, span: &mut Vec<Vec<f64>>| {
        if let Some(v) = orthogonalize(&rows[i].a, span) {
            working.push(i);
            span.push(v);
        }
    };
    for i in 0..rows.len() {
        if rows[i].eq {
            try_add(i, &mut working, &mut span);
        }
    }
    for i in 0..rows.len() {
        let r = &rows[i];
        if !r.eq && (dot(&r.a, &x) - r.b).abs() <= 1e-9 * (1.0 + r.b.abs()) {
            try_add(i, &mut working, &mut span);
        }
    }

    let max_iter = 50 * (n + rows.len()) + 100;
    let mut zero_steps = 0usize;
    for _ in 0..max_iter {
        let mut g = qp.hessian.mul_vec(&x);
        g.iter_mut().zip(&lp.objective).for_each(|(gi, ci)| *gi += ci);
        let z = null_space(n, &span);
        let step = subspace_step(&qp.hessian, &g, &z);
        let (p, is_ray) = match step {
            Step::Newton(p) => (p, false),
            Step::Ray(d) => (d, true),
        };
        let pnorm = norm_inf(&p);
        if !is_ray && pnorm <= 1e-12 * (1.0 + norm_inf(&x)) {
            let lam = multipliers(&rows, &working, &g)
                .ok_or_else(|| LpError::NumericalFailure("singular working set".into()))?;
            let dtol = 1e-9 * (1.0 + norm_inf(&g));
            let negative = working
                .iter()
                .zip(&lam)
                .enumerate()
                .filter(|(_, (&i, &l))| !rows[i].eq && l < -dtol);
            let drop = if zero_steps > 20 {
                negative.min_by_key(|(_, (&i, _))| i).map(|(k, _)| k)
            } else {
                negative
                    .min_by(|a, b| a.1 .1.partial_cmp(b.1 .1).unwrap())
                    .map(|(k, _)| k)
            };
            match drop {
                None => {
                    let objective = qp.objective_value(&x);
                    return Ok(QpSolution {
                        status: LpStatus::Optimal,
                        x,
                        objective,
                    });
                }
                Some(k) => {
                    working.remove(k);
                    span = orthonormal_span(&rows, &working);
                    zero_steps += 1;
                    continue;
                }
            }
        }
        let mut alpha = if is_ray { f64::INFINITY } else { 1.0 };
        let mut blocking = None;
        for (i, r) in rows.iter().enumerate() {
            if r.eq || working.contains(&i) {
                continue;
            }
            let ap = dot(&r.a, &p);
            let anorm = norm_inf(&r.a);
            if ap <= 1e-12 * anorm * pnorm {
                continue;
            }
            let step = ((r.b - dot(&r.a, &x)) / ap).max(0.0);
            if step < alpha {
                alpha = step;
                blocking = Some(i);
            }
        }
        if alpha.is_infinite() {
            return Ok(QpSolution {
                status: LpStatus::Unbounded,
                x: Vec::new(),
                objective: f64::NEG_INFINITY,
            });
        }
        if alpha * pnorm <= 1e-14 * (1.0 + norm_inf(&x)) {
            zero_steps += 1;
        } else {
            zero_steps = 0;
        }
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        if let Some(i) = blocking {
            try_add(i, &mut working, &mut span);
        }
    }
    Err(LpError::NumericalFailure("active-set iteration limit reached".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(n: usize, d: &[(usize, f64)]) -> Matrix {
        let mut h = Matrix::zeros(n, n);
        for &(i, v) in d {
            h.set(i, i, v);
        }
        h
    }

    #[test]
    fn projection_onto_halfspace() {
        // min (x-3)² + (y-3)² s.t. x + y ≤ 2 → (1,1), value 8
        let mut lp = LinearProgram::new(vec![-6.0, -6.0]);
        lp.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
        lp.set_bounds(1, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_ub(&[1.0, 1.0], 2.0);
        let qp = QuadraticProgram {
            lp,
            hessian: diag(2, &[(0, 2.0), (1, 2.0)]),
            constant: 18.0,
        };
        let s = solve_qp(&qp, &Tolerances::default()).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-10 && (s.x[1] - 1.0).abs() < 1e-10);
        assert!((s.objective - 8.0).abs() < 1e-10);
    }

    #[test]
    fn semidefinite_with_linear_tail() {
        // min (x-2)² + y s.t. y ≥ x - 1, y ≥ 0, x free
        // optimum: for x ≤ 1 y = 0, objective (x-2)² minimized at x=1 → 1, or x>1: (x-2)² + x - 1
        // derivative 2(x-2)+1 = 0 → x = 1.5, value 0.25 + 0.5 = 0.75
        let mut lp = LinearProgram::new(vec![-4.0, 1.0]);
        lp.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_ub(&[1.0, -1.0], 1.0);
        let qp = QuadraticProgram {
            lp,
            hessian: diag(2, &[(0, 2.0)]),
            constant: 4.0,
        };
        assert!(qp.is_psd());
        let s = solve_qp(&qp, &Tolerances::default()).unwrap();
        assert!((s.objective - 0.75).abs() < 1e-10, "{s:?}");
        assert!((s.x[0] - 1.5).abs() < 1e-9);
    }

    #[test]
    fn infeasible_region() {
        let mut lp = LinearProgram::new(vec![0.0]);
        lp.add_ub(&[1.0], -1.0);
        let qp = QuadraticProgram {
            lp,
            hessian: diag(1, &[(0, 2.0)]),
            constant: 0.0,
        };
        assert_eq!(solve_qp(&qp, &Tolerances::default()).unwrap().status, LpStatus::Infeasible);
    }
}
