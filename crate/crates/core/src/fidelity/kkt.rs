use crate::lp::{LinearProgram, Matrix, MixedBinaryProgram};

/// `slack = coeffs·v + constant ≥ 0` paired with a sign-constrained dual `v[dual]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplementarityPair {
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
    pub dual: usize,
    /// Largest slack attainable inside the variable bounds, infinite if unknown.
    pub slack_range: f64,
}

impl ComplementarityPair {
    pub fn slack(&self, v: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * v[j]).sum::<f64>() + self.constant
    }
}

/// KKT conditions of `min cᵀx : A_eq x = b_eq + Pθ, A_ub x ≤ b_ub, l ≤ x ≤ u`
/// as linear constraints over `[θ | x | λ | μ | z_lo | z_up]`, with the
/// complementarity products listed separately.
#[derive(Clone, Debug, PartialEq)]
pub struct KktSystem {
    pub lower: LinearProgram,
    pub n_param: usize,
    /// Primal columns with a finite lower (upper) bound, in order.
    pub lower_ix: Vec<usize>,
    pub upper_ix: Vec<usize>,
    /// Stationarity, primal rows, bounds and dual signs; objective is zero.
    pub constraints: LinearProgram,
    pub pairs: Vec<ComplementarityPair>,
}

impl KktSystem {
    pub fn n_primal(&self) -> usize {
        self.lower.num_vars()
    }

    pub fn theta(&self, i: usize) -> usize {
        i
    }

    pub fn x(&self, j: usize) -> usize {
        self.n_param + j
    }

    pub fn lambda(&self, i: usize) -> usize {
        self.n_param + self.n_primal() + i
    }

    pub fn mu(&self, i: usize) -> usize {
        self.lambda(self.lower.eq_rhs.len()) + i
    }

    pub fn z_lo(&self, k: usize) -> usize {
        self.mu(self.lower.ub_rhs.len()) + k
    }

    pub fn z_up(&self, k: usize) -> usize {
        self.z_lo(self.lower_ix.len()) + k
    }

    pub fn num_vars(&self) -> usize {
        self.z_up(self.upper_ix.len())
    }

    /// Linear expression `cᵀx` of the lower-level objective over KKT variables.
    pub fn objective_row(&self) -> Vec<f64> {
        let mut row = vec![0.0; self.num_vars()];
        for (j, c) in self.lower.objective.iter().enumerate() {
            row[self.x(j)] = *c;
        }
        row
    }

    /// The lower level with its parametric right-hand side evaluated at θ.
    pub fn lower_at(&self, param_map: &Matrix, theta: &[f64]) -> LinearProgram {
        let mut lp = self.lower.clone();
        for (b, p) in lp.eq_rhs.iter_mut().zip(param_map.mul_vec(theta)) {
            *b += p;
        }
        lp
    }
}

/// Builds the KKT system of `lower` whose equality right-hand side moves by
/// `param_map · θ`.
pub fn build_kkt(lower: &LinearProgram, param_map: &Matrix) -> KktSystem {
    let n = lower.num_vars();
    let m_eq = lower.eq_rhs.len();
    let m_ub = lower.ub_rhs.len();
    let lower_ix: Vec<usize> = (0..n).filter(|&j| lower.lower[j].is_finite()).collect();
    let upper_ix: Vec<usize> = (0..n).filter(|&j| lower.upper[j].is_finite()).collect();
    let mut sys = KktSystem {
        lower: lower.clone(),
        n_param: param_map.ncols(),
        lower_ix,
        upper_ix,
        constraints: LinearProgram::new(Vec::new()),
        pairs: Vec::new(),
    };
    let nv = sys.num_vars();
    let mut c = LinearProgram::new(vec![0.0; nv]);
    for i in 0..sys.n_param {
        c.set_bounds(sys.theta(i), f64::NEG_INFINITY, f64::INFINITY);
    }
    for j in 0..n {
        c.set_bounds(sys.x(j), lower.lower[j], lower.upper[j]);
    }
    for i in 0..m_eq {
        c.set_bounds(sys.lambda(i), f64::NEG_INFINITY, f64::INFINITY);
    }

    // c − A_eqᵀλ + A_ubᵀμ − z_lo + z_up = 0
    for j in 0..n {
        let mut row = vec![0.0; nv];
        for i in 0..m_eq {
            row[sys.lambda(i)] = -lower.eq_matrix.get(i, j);
        }
        for i in 0..m_ub {
            row[sys.mu(i)] = lower.ub_matrix.get(i, j);
        }
        if let Some(k) = sys.lower_ix.iter().position(|&q| q == j) {
            row[sys.z_lo(k)] = -1.0;
        }
        if let Some(k) = sys.upper_ix.iter().position(|&q| q == j) {
            row[sys.z_up(k)] = 1.0;
        }
        c.add_eq(&row, -lower.objective[j]);
    }
    for i in 0..m_eq {
        let mut row = vec![0.0; nv];
        for j in 0..n {
            row[sys.x(j)] = lower.eq_matrix.get(i, j);
        }
        for k in 0..sys.n_param {
            row[sys.theta(k)] = -param_map.get(i, k);
        }
        c.add_eq(&row, lower.eq_rhs[i]);
    }
    for i in 0..m_ub {
        let mut row = vec![0.0; nv];
        for j in 0..n {
            row[sys.x(j)] = lower.ub_matrix.get(i, j);
        }
        c.add_ub(&row, lower.ub_rhs[i]);
    }

    let mut pairs = Vec::new();
    for i in 0..m_ub {
        let coeffs: Vec<(usize, f64)> = (0..n)
            .filter(|&j| lower.ub_matrix.get(i, j) != 0.0)
            .map(|j| (sys.x(j), -lower.ub_matrix.get(i, j)))
            .collect();
        // b − a·x over the box: range of the slack
        let min_ax: f64 = (0..n)
            .map(|j| {
                let a = lower.ub_matrix.get(i, j);
                if a > 0.0 {
                    a * lower.lower[j]
                } else if a < 0.0 {
                    a * lower.upper[j]
                } else {
                    0.0
                }
            })
            .sum();
        pairs.push(ComplementarityPair {
            coeffs,
            constant: lower.ub_rhs[i],
            dual: sys.mu(i),
            slack_range: lower.ub_rhs[i] - min_ax,
        });
    }
    for (k, &j) in sys.lower_ix.iter().enumerate() {
        pairs.push(ComplementarityPair {
            coeffs: vec![(sys.x(j), 1.0)],
            constant: -lower.lower[j],
            dual: sys.z_lo(k),
            slack_range: lower.upper[j] - lower.lower[j],
        });
    }
    for (k, &j) in sys.upper_ix.iter().enumerate() {
        pairs.push(ComplementarityPair {
            coeffs: vec![(sys.x(j), -1.0)],
            constant: lower.upper[j],
            dual: sys.z_up(k),
            slack_range: lower.upper[j] - lower.lower[j],
        });
    }
    for (k, _) in sys.lower_ix.iter().enumerate() {
        c.set_bounds(sys.z_lo(k), 0.0, f64::INFINITY);
    }
    for (k, _) in sys.upper_ix.iter().enumerate() {
        c.set_bounds(sys.z_up(k), 0.0, f64::INFINITY);
    }
    sys.constraints = c;
    sys.pairs = pairs;
    sys
}

/// Replaces every complementarity pair with `slack ≤ M_p(1 − z)`,
/// `dual ≤ M_d·z` for a new binary `z`, and attaches `‖θ − target‖²`.
pub fn big_m_linearize(kkt: &KktSystem, target: &[f64], m_primal: &[f64], m_dual: &[f64]) -> MixedBinaryProgram {
    let nv = kkt.num_vars();
    let np = kkt.pairs.len();
    let total = nv + np;
    let mut lp = kkt.constraints.clone();
    widen(&mut lp, total);
    for (i, pair) in kkt.pairs.iter().enumerate() {
        let z = nv + i;
        let mut row = vec![0.0; total];
        for &(j, a) in &pair.coeffs {
            row[j] += a;
        }
        row[z] = m_primal[i];
        lp.add_ub(&row, m_primal[i] - pair.constant);
        let mut row = vec![0.0; total];
        row[pair.dual] = 1.0;
        row[z] = -m_dual[i];
        lp.add_ub(&row, 0.0);
        lp.set_bounds(z, 0.0, 1.0);
    }
    let mut h = Matrix::zeros(total, total);
    for (i, t) in target.iter().enumerate() {
        let j = kkt.theta(i);
        h.set(j, j, 2.0);
        lp.objective[j] = -2.0 * t;
    }
    MixedBinaryProgram {
        lp,
        hessian: Some(h),
        constant: target.iter().map(|t| t * t).sum(),
        binaries: (nv..total).collect(),
    }
}

/// Appends zero columns so that `lp` has `n` variables, new ones in `[0, ∞)`.
pub fn widen(lp: &mut LinearProgram, n: usize) {
    let old = lp.num_vars();
    if n <= old {
        return;
    }
    lp.objective.resize(n, 0.0);
    lp.lower.resize(n, 0.0);
    lp.upper.resize(n, f64::INFINITY);
    lp.eq_matrix = lp.eq_matrix.widen(n - old);
    lp.ub_matrix = lp.ub_matrix.widen(n - old);
}
