//! Autoregression rank scores as the solution of the bounded-variable
//! linear program
//!
//! ```text
//!     maximize   yᵀa
//!     subject to Y_nᵀ(a − (1−α)1) = 0,   a ∈ [0, 1]ⁿ
//! ```
//!
//! which is the dual of quantile autoregression. The intercept column of
//! Y_n carries the constraint Σ_t (a_t − (1−α)) = 0.
//!
//! Two solvers share one simplex engine:
//!
//! * a cold solve at fixed α (two-phase primal simplex with Bland's rule),
//!   used for single α values, for the primal quantile fit and as an oracle;
//! * an exact parametric path over α ∈ [0, 1]. The right-hand side moves
//!   linearly in α, so the optimal vertex is piecewise linear in α with
//!   breakpoints at basis changes. Basis changes are dual simplex pivots.
//!
//! Both run on the objective y_t + εᵗ with a symbolic ε (lexicographic
//! perturbation), which makes every basis dual nondegenerate. That rules out
//! cycling in the parametric pivots and resolves ties in y deterministically.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::AutoregressionDesign;
use crate::error::{Error, Result};

/// Bound tolerance on rank-score values.
pub const VALUE_TOL: f64 = 1e-9;
/// Residuals below this (on max-abs normalized data) count as zero.
const RESIDUAL_TOL: f64 = 1e-11;
/// Basic values this close to a bound are snapped onto it.
const SNAP_TOL: f64 = 1e-12;
/// Parametric steps shorter than this do not create a breakpoint.
const MERGE_TOL: f64 = 1e-13;
const SLOPE_TOL: f64 = 1e-13;
const PIVOT_TOL: f64 = 1e-11;

/// Default breakpoint cap: 50·n·(p+1).
pub fn default_breakpoint_cap(n: usize, p: usize) -> usize {
    50 * n * (p + 1)
}

/// â_n(α) at a single α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankScoreVector {
    pub alpha: f64,
    pub values: Vec<f64>,
    /// Rows of Y_n in the optimal basis (sorted).
    pub basis: Vec<usize>,
}

/// The whole process α ↦ â_n(α), piecewise linear between breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct RankScorePath {
    breakpoints: Vec<f64>,
    node_values: DMatrix<f64>,
    bases: Vec<Vec<usize>>,
}

impl RankScorePath {
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// n × (K+1); column k is â_n(α_k).
    pub fn node_values(&self) -> &DMatrix<f64> {
        &self.node_values
    }

    /// Basis used on segment k, i.e. on [α_k, α_{k+1}].
    pub fn bases(&self) -> &[Vec<usize>] {
        &self.bases
    }

    pub fn n(&self) -> usize {
        self.node_values.nrows()
    }

    pub fn n_segments(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// Index of the segment containing α (the left one at a breakpoint).
    pub fn segment_of(&self, alpha: f64) -> usize {
        let k = self.breakpoints.partition_point(|&b| b < alpha);
        k.saturating_sub(1).min(self.n_segments() - 1)
    }

    /// Linear interpolation of the node columns at α.
    pub fn evaluate(&self, alpha: f64) -> RankScoreVector {
        let alpha = alpha.clamp(0.0, 1.0);
        let k = self.segment_of(alpha);
        let (a0, a1) = (self.breakpoints[k], self.breakpoints[k + 1]);
        let w = (alpha - a0) / (a1 - a0);
        let values = (0..self.n())
            .map(|t| {
                let v0 = self.node_values[(t, k)];
                let v1 = self.node_values[(t, k + 1)];
                v0 + w * (v1 - v0)
            })
            .collect();
        RankScoreVector {
            alpha,
            values,
            basis: self.bases[k].clone(),
        }
    }

    /// Slope of â_nt on segment k.
    pub fn slope(&self, t: usize, k: usize) -> f64 {
        let da = self.breakpoints[k + 1] - self.breakpoints[k];
        (self.node_values[(t, k + 1)] - self.node_values[(t, k)]) / da
    }
}

/// Primal companion of the rank-score LP: the autoregression quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileFit {
    pub alpha: f64,
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Σ_t ρ_α(residual_t).
    pub objective: f64,
    /// yᵀâ − (1−α)Σy at the dual solution; equals `objective` at optimum.
    pub dual_objective: f64,
}

/// Worst violations of the LP constraints for a candidate vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    pub bound_violation: f64,
    pub sum_violation: f64,
    pub lag_violation: f64,
}

impl FeasibilityReport {
    /// Checks against the tolerances 10⁻⁹ (bounds), 10⁻⁸·n (sum) and
    /// 10⁻⁸·max column norm of Y_n* (lag constraints).
    pub fn is_feasible(&self, design: &AutoregressionDesign) -> bool {
        let n = design.n() as f64;
        let lag_scale = design
            .lagged()
            .column_iter()
            .map(|c| c.norm())
            .fold(1.0_f64, f64::max);
        self.bound_violation <= VALUE_TOL
            && self.sum_violation <= 1e-8 * n
            && self.lag_violation <= 1e-8 * lag_scale
    }
}

pub fn check_feasibility(design: &AutoregressionDesign, alpha: f64, values: &[f64]) -> FeasibilityReport {
    let bound_violation = values
        .iter()
        .map(|&v| (-v).max(v - 1.0).max(0.0))
        .fold(0.0, f64::max);
    let centered = DVector::from_iterator(values.len(), values.iter().map(|v| v - (1.0 - alpha)));
    let sum_violation = centered.sum().abs();
    let lag_violation = if design.p() == 0 {
        0.0
    } else {
        (design.lagged().transpose() * &centered).amax()
    };
    FeasibilityReport {
        bound_violation,
        sum_violation,
        lag_violation,
    }
}

// ---------------------------------------------------------------------------
// simplex engine
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

/// Columns 0..n are the rows x_t of the normalized design with bounds
/// [0, 1]; columns n..n+m are phase-one artificials ±e_i.
#[derive(Debug, Clone)]
struct Simplex {
    x: DMatrix<f64>,
    y: Vec<f64>,
    colsum: DVector<f64>,
    art_sign: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    minv: DMatrix<f64>,
    phase: Phase,
    pivots: usize,
}

/// A design normalized for the simplex: columns and response divided by
/// their max-abs values.
struct Normalized {
    x: DMatrix<f64>,
    y: Vec<f64>,
    col_scale: Vec<f64>,
    y_scale: f64,
}

fn normalize(design: &AutoregressionDesign) -> Normalized {
    let mut x = design.design().clone();
    let mut col_scale = Vec::with_capacity(x.ncols());
    for mut col in x.column_iter_mut() {
        let s = col.amax();
        let s = if s > 0.0 { s } else { 1.0 };
        col /= s;
        col_scale.push(s);
    }
    let y_scale = design.response().amax();
    let y_scale = if y_scale > 0.0 { y_scale } else { 1.0 };
    let y = design.response().iter().map(|v| v / y_scale).collect();
    Normalized {
        x,
        y,
        col_scale,
        y_scale,
    }
}

impl Simplex {
    fn new(x: DMatrix<f64>, y: Vec<f64>) -> Self {
        let n = x.nrows();
        let m = x.ncols();
        let colsum = x.row_sum().transpose();
        Self {
            x,
            y,
            colsum,
            art_sign: vec![1.0; m],
            state: vec![VarState::Lower; n + m],
            basis: (n..n + m).collect(),
            minv: DMatrix::identity(m, m),
            phase: Phase::One,
            pivots: 0,
        }
    }

    fn n(&self) -> usize {
        self.x.nrows()
    }

    fn m(&self) -> usize {
        self.x.ncols()
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.n()
    }

    fn upper(&self, j: usize) -> f64 {
        if !self.is_artificial(j) {
            1.0
        } else if self.phase == Phase::One {
            f64::INFINITY
        } else {
            0.0
        }
    }

    fn column(&self, j: usize) -> DVector<f64> {
        if j < self.n() {
            self.x.row(j).transpose()
        } else {
            let mut e = DVector::zeros(self.m());
            e[j - self.n()] = self.art_sign[j - self.n()];
            e
        }
    }

    fn cost(&self, j: usize) -> f64 {
        match self.phase {
            Phase::One => {
                if self.is_artificial(j) {
                    -1.0
                } else {
                    0.0
                }
            }
            Phase::Two => {
                if self.is_artificial(j) {
                    0.0
                } else {
                    self.y[j]
                }
            }
        }
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m();
        let mut basis_matrix = DMatrix::zeros(m, m);
        for (i, &j) in self.basis.iter().enumerate() {
            basis_matrix.set_column(i, &self.column(j));
        }
        self.minv = basis_matrix
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular simplex basis".into()))?;
        Ok(())
    }

    /// Σ over nonbasic-at-upper columns of column · upper bound.
    fn upper_sum(&self) -> DVector<f64> {
        let mut acc = DVector::zeros(self.m());
        for j in 0..self.n() {
            if self.state[j] == VarState::Upper {
                acc += self.x.row(j).transpose();
            }
        }
        acc
    }

    /// Basic values as g − αh.
    fn basic_affine(&self) -> (DVector<f64>, DVector<f64>) {
        let h = &self.minv * &self.colsum;
        let g = &self.minv * (&self.colsum - self.upper_sum());
        (g, h)
    }

    fn basic_values(&self, alpha: f64) -> DVector<f64> {
        let (g, h) = self.basic_affine();
        g - h * alpha
    }

    fn duals(&self) -> DVector<f64> {
        let cb = DVector::from_iterator(self.m(), self.basis.iter().map(|&j| self.cost(j)));
        self.minv.transpose() * cb
    }

    fn reduced_cost(&self, j: usize, duals: &DVector<f64>) -> f64 {
        self.cost(j) - self.column(j).dot(duals)
    }

    /// minv · column(j): the representation of column j in the basis.
    fn represent(&self, j: usize) -> DVector<f64> {
        &self.minv * self.column(j)
    }

    /// Coefficients of the symbolic perturbation of the reduced cost of a
    /// nonbasic real column: +1 at j, −(minv·x_j)_i at each basic B_i.
    /// Sorted by index, zero entries dropped.
    fn perturbation(&self, j: usize) -> Vec<(usize, f64)> {
        let rep = self.represent(j);
        let mut out = vec![(j, 1.0)];
        for (i, &b) in self.basis.iter().enumerate() {
            if !self.is_artificial(b) && rep[i].abs() > PIVOT_TOL {
                out.push((b, -rep[i]));
            }
        }
        out.sort_by_key(|e| e.0);
        out
    }

    /// Sign of the perturbed reduced cost of a nonbasic real column.
    fn lex_sign(&self, j: usize, reduced: f64) -> Ordering {
        if reduced.abs() > RESIDUAL_TOL {
            return reduced.total_cmp(&0.0);
        }
        if self.phase == Phase::One {
            return Ordering::Equal;
        }
        self.perturbation(j)[0].1.total_cmp(&0.0)
    }

    fn pivot_in(&mut self, pos: usize, entering: usize, leaving_state: VarState) -> Result<()> {
        let leaving = self.basis[pos];
        self.state[leaving] = leaving_state;
        self.state[entering] = VarState::Basic;
        self.basis[pos] = entering;
        self.pivots += 1;
        self.refactor()
    }

    // ---------------------------------------------------------------
    // cold solve
    // ---------------------------------------------------------------

    /// Two-phase primal simplex at fixed α with Bland's rule.
    fn solve_at(&mut self, alpha: f64, max_pivots: usize) -> Result<()> {
        let n = self.n();
        let m = self.m();
        // start: real columns at the bound nearest (1−α), artificials absorb the rest
        let start = if alpha <= 0.5 { VarState::Upper } else { VarState::Lower };
        for j in 0..n {
            self.state[j] = start;
        }
        let rhs = &self.colsum * (1.0 - alpha) - self.upper_sum();
        for i in 0..m {
            self.art_sign[i] = if rhs[i] < 0.0 { -1.0 } else { 1.0 };
            self.state[n + i] = VarState::Basic;
        }
        self.basis = (n..n + m).collect();
        self.phase = Phase::One;
        self.refactor()?;
        self.primal_loop(alpha, max_pivots)?;

        let infeasibility: f64 = self
            .basis
            .iter()
            .zip(self.basic_values(alpha).iter())
            .filter(|(&j, _)| self.is_artificial(j))
            .map(|(_, v)| v.abs())
            .sum();
        if infeasibility > 1e-8 {
            return Err(Error::Numerical(format!(
                "rank-score LP infeasible at alpha={alpha} (phase-one residual {infeasibility:.3e})"
            )));
        }
        self.phase = Phase::Two;
        self.purge_artificials()?;
        self.primal_loop(alpha, max_pivots)
    }

    fn purge_artificials(&mut self) -> Result<()> {
        for pos in 0..self.m() {
            if !self.is_artificial(self.basis[pos]) {
                continue;
            }
            let row = self.minv.row(pos).into_owned();
            let best = (0..self.n())
                .filter(|&j| self.state[j] != VarState::Basic)
                .map(|j| (j, (row.transpose().dot(&self.x.row(j).transpose())).abs()))
                .max_by(|a, b| a.1.total_cmp(&b.1));
            match best {
                Some((j, v)) if v > PIVOT_TOL => self.pivot_in(pos, j, VarState::Lower)?,
                _ => return Err(Error::SingularDesign("rank-deficient design in simplex".into())),
            }
        }
        Ok(())
    }

    fn primal_loop(&mut self, alpha: f64, max_pivots: usize) -> Result<()> {
        let total = self.state.len();
        let mut iterations = 0usize;
        loop {
            iterations += 1;
            if iterations > max_pivots {
                return Err(Error::IterationLimit {
                    iterations,
                    context: format!("cold solve at alpha={alpha}"),
                });
            }
            let duals = self.duals();
            // Bland: first improving column
            let mut entering = None;
            for j in 0..total {
                let st = self.state[j];
                if st == VarState::Basic || self.upper(j) == 0.0 {
                    continue;
                }
                let d = self.reduced_cost(j, &duals);
                let sign = if self.is_artificial(j) {
                    if d.abs() > RESIDUAL_TOL {
                        d.total_cmp(&0.0)
                    } else {
                        Ordering::Equal
                    }
                } else {
                    self.lex_sign(j, d)
                };
                let improving = match st {
                    VarState::Lower => sign == Ordering::Greater,
                    VarState::Upper => sign == Ordering::Less,
                    VarState::Basic => false,
                };
                if improving {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                return Ok(());
            };

            let direction = if self.state[j] == VarState::Lower { 1.0 } else { -1.0 };
            let rep = self.represent(j);
            let values = self.basic_values(alpha);
            let flip = self.upper(j);
            let mut leave: Option<(usize, f64, VarState)> = None;
            for i in 0..self.m() {
                // basic i moves by −direction·rep[i] per unit step
                let rate = -direction * rep[i];
                let b = self.basis[i];
                let (limit, to) = if rate < -PIVOT_TOL {
                    (values[i].max(0.0) / -rate, VarState::Lower)
                } else if rate > PIVOT_TOL && self.upper(b).is_finite() {
                    ((self.upper(b) - values[i]).max(0.0) / rate, VarState::Upper)
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((li, lstep, _)) => limit < lstep || (limit == lstep && b < self.basis[li]),
                };
                if better {
                    leave = Some((i, limit, to));
                }
            }
            let leave = leave.filter(|&(_, limit, _)| limit <= flip);
            match leave {
                None => {
                    if !flip.is_finite() {
                        return Err(Error::Numerical("unbounded rank-score LP".into()));
                    }
                    // bound flip
                    self.state[j] = if self.state[j] == VarState::Lower {
                        VarState::Upper
                    } else {
                        VarState::Lower
                    };
                    self.pivots += 1;
                }
                Some((pos, _, to)) => {
                    let to = if self.is_artificial(self.basis[pos]) {
                        VarState::Lower
                    } else {
                        to
                    };
                    // entering value is set implicitly by the equations
                    self.pivot_in(pos, j, to)?;
                }
            }
        }
    }

    // ---------------------------------------------------------------
    // parametric path
    // ---------------------------------------------------------------

    /// All n rank-score values at α under the current basis.
    fn all_values(&self, alpha: f64) -> Vec<f64> {
        let n = self.n();
        let mut out: Vec<f64> = (0..n)
            .map(|j| if self.state[j] == VarState::Upper { 1.0 } else { 0.0 })
            .collect();
        let vb = self.basic_values(alpha);
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                out[b] = snap(vb[i]);
            }
        }
        out
    }

    fn sorted_basis(&self) -> Vec<usize> {
        let mut b = self.basis.clone();
        b.sort_unstable();
        b
    }

    /// Dual simplex ratio test for basic position `pos` leaving to `to`.
    fn entering_for(&self, pos: usize, to: VarState) -> Result<usize> {
        let sigma = if to == VarState::Lower { 1.0 } else { -1.0 };
        let row = self.minv.row(pos).transpose();
        let duals = self.duals();
        let mut best: Option<(usize, f64, f64)> = None; // (j, ratio, v_j)
        for j in 0..self.n() {
            let st = self.state[j];
            if st == VarState::Basic {
                continue;
            }
            let v = sigma * self.x.row(j).transpose().dot(&row);
            let eligible = match st {
                VarState::Upper => v > PIVOT_TOL,
                VarState::Lower => v < -PIVOT_TOL,
                VarState::Basic => false,
            };
            if !eligible {
                continue;
            }
            let r = self.reduced_cost(j, &duals);
            let ratio = if r.abs() <= RESIDUAL_TOL { 0.0 } else { (r / v).max(0.0) };
            best = Some(match best {
                None => (j, ratio, v),
                Some((bj, bratio, bv)) => {
                    let tol = 1e-12 * (1.0 + bratio.abs());
                    if ratio < bratio - tol {
                        (j, ratio, v)
                    } else if ratio > bratio + tol {
                        (bj, bratio, bv)
                    } else if self.lex_ratio_cmp(j, v, bj, bv) == Ordering::Less {
                        (j, ratio, v)
                    } else {
                        (bj, bratio, bv)
                    }
                }
            });
        }
        best.map(|b| b.0)
            .ok_or_else(|| Error::Numerical("dual ratio test found no entering row".into()))
    }

    /// Compares the perturbation parts of two ratios, p_j/v_j against p_k/v_k.
    fn lex_ratio_cmp(&self, j: usize, vj: f64, k: usize, vk: f64) -> Ordering {
        let pj = self.perturbation(j);
        let pk = self.perturbation(k);
        let mut idx: Vec<usize> = pj.iter().chain(&pk).map(|e| e.0).collect();
        idx.sort_unstable();
        idx.dedup();
        let get = |p: &[(usize, f64)], i: usize| p.iter().find(|e| e.0 == i).map_or(0.0, |e| e.1);
        for i in idx {
            let d = get(&pj, i) / vj - get(&pk, i) / vk;
            if d.abs() > PIVOT_TOL {
                return d.total_cmp(&0.0);
            }
        }
        j.cmp(&k)
    }

    /// Follows the optimal basis from `alpha` towards 0 (`dir` = −1) or 1
    /// (`dir` = +1). Returns the nodes reached, excluding the start, and the
    /// basis used on each segment leading to them.
    fn trace(&mut self, mut alpha: f64, dir: f64, cap: usize) -> Result<Vec<(f64, Vec<f64>, Vec<usize>)>> {
        let mut nodes = Vec::new();
        let end = if dir > 0.0 { 1.0 } else { 0.0 };
        loop {
            if self.pivots > cap {
                return Err(Error::BreakpointCap { cap });
            }
            let (g, h) = self.basic_affine();
            let values = &g - &h * alpha;
            let room = (end - alpha).abs();
            let mut best: Option<(usize, f64, VarState)> = None;
            for i in 0..self.m() {
                let q = -dir * h[i];
                let (t, to) = if q < -SLOPE_TOL {
                    (values[i].max(0.0) / -q, VarState::Lower)
                } else if q > SLOPE_TOL {
                    ((1.0 - values[i]).max(0.0) / q, VarState::Upper)
                } else {
                    continue;
                };
                let better = match best {
                    None => true,
                    Some((bi, bt, _)) => t < bt - 1e-15 || (t <= bt + 1e-15 && self.basis[i] < self.basis[bi]),
                };
                if better {
                    best = Some((i, t, to));
                }
            }
            match best {
                Some((pos, t, to)) if t < room - MERGE_TOL => {
                    let segment_basis = self.sorted_basis();
                    if t > MERGE_TOL {
                        alpha += dir * t;
                        let mut vals = self.all_values(alpha);
                        vals[self.basis[pos]] = if to == VarState::Lower { 0.0 } else { 1.0 };
                        nodes.push((alpha, vals, segment_basis));
                    }
                    let entering = self.entering_for(pos, to)?;
                    self.pivot_in(pos, entering, to)?;
                }
                _ => {
                    let segment_basis = self.sorted_basis();
                    let fill = if dir > 0.0 { 0.0 } else { 1.0 };
                    nodes.push((end, vec![fill; self.n()], segment_basis));
                    return Ok(nodes);
                }
            }
        }
    }
}

fn snap(v: f64) -> f64 {
    if v.abs() <= SNAP_TOL {
        0.0
    } else if (v - 1.0).abs() <= SNAP_TOL {
        1.0
    } else {
        v
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must lie in [0, 1], got {alpha}")))
    }
}

fn cold_solve(design: &AutoregressionDesign, alpha: f64) -> Result<(Simplex, Normalized)> {
    let norm = normalize(design);
    let mut simplex = Simplex::new(norm.x.clone(), norm.y.clone());
    let cap = default_breakpoint_cap(design.n(), design.p()).max(1000);
    simplex.solve_at(alpha, cap)?;
    Ok((simplex, norm))
}

/// Solves the rank-score LP at a single α by a cold two-phase simplex.
pub fn solve_rank_scores_at(design: &AutoregressionDesign, alpha: f64) -> Result<RankScoreVector> {
    check_alpha(alpha)?;
    let (simplex, _) = cold_solve(design, alpha)?;
    let mut values = simplex.all_values(alpha);
    for v in values.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(RankScoreVector {
        alpha,
        values,
        basis: simplex.sorted_basis(),
    })
}

/// Exact parametric solution path of the rank-score LP over α ∈ [0, 1].
pub fn solve_rank_score_path(design: &AutoregressionDesign) -> Result<RankScorePath> {
    solve_rank_score_path_with_cap(design, default_breakpoint_cap(design.n(), design.p()))
}

pub fn solve_rank_score_path_with_cap(design: &AutoregressionDesign, cap: usize) -> Result<RankScorePath> {
    const SEED_ALPHA: f64 = 0.5;
    let (seed, _) = cold_solve(design, SEED_ALPHA)?;
    let seed_values = seed.all_values(SEED_ALPHA);

    let mut down = seed.clone();
    down.pivots = 0;
    let lower = down.trace(SEED_ALPHA, -1.0, cap)?;
    let mut up = seed;
    up.pivots = down.pivots;
    let upper = up.trace(SEED_ALPHA, 1.0, cap)?;

    // nodes ordered by α, with the basis of each segment
    let mut alphas = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut bases = Vec::new();
    for (a, v, _) in lower.iter().rev() {
        alphas.push(*a);
        columns.push(v.clone());
    }
    // segment leading from lower[k] to lower[k-1] (or the seed) used lower[k]'s basis
    for (_, _, b) in lower.iter().rev() {
        bases.push(b.clone());
    }
    alphas.push(SEED_ALPHA);
    columns.push(seed_values);
    for (a, v, b) in upper {
        alphas.push(a);
        columns.push(v);
        bases.push(b);
    }

    // drop nodes where the basis does not change (the seed, typically)
    let mut keep = vec![true; alphas.len()];
    for k in 1..alphas.len() - 1 {
        if bases[k - 1] == bases[k] {
            keep[k] = false;
        }
    }
    let mut kept_alphas = Vec::new();
    let mut kept_columns = Vec::new();
    let mut kept_bases = Vec::new();
    for k in 0..alphas.len() {
        if keep[k] {
            kept_alphas.push(alphas[k]);
            kept_columns.push(std::mem::take(&mut columns[k]));
            if k + 1 < alphas.len() {
                kept_bases.push(bases[k].clone());
            }
        }
    }

    let n = design.n();
    let node_values = DMatrix::from_fn(n, kept_columns.len(), |t, k| kept_columns[k][t].clamp(0.0, 1.0));
    Ok(RankScorePath {
        breakpoints: kept_alphas,
        node_values,
        bases: kept_bases,
    })
}

/// Autoregression quantile at α ∈ (0, 1): the primal solution read off the
/// optimal basis of the cold solve.
pub fn solve_quantile_fit(design: &AutoregressionDesign, alpha: f64) -> Result<QuantileFit> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let (simplex, norm) = cold_solve(design, alpha)?;
    let duals = simplex.duals();
    let coefficients: Vec<f64> = duals
        .iter()
        .zip(&norm.col_scale)
        .map(|(b, c)| b * norm.y_scale / c)
        .collect();
    let coef = DVector::from_column_slice(&coefficients);
    let residuals: Vec<f64> = (design.response() - design.design() * &coef).iter().copied().collect();
    let objective = residuals
        .iter()
        .map(|&r| if r < 0.0 { r * (alpha - 1.0) } else { r * alpha })
        .sum();
    let a = simplex.all_values(alpha);
    let y = design.response();
    let dual_objective =
        y.iter().zip(&a).map(|(y, a)| y * a).sum::<f64>() - (1.0 - alpha) * y.iter().sum::<f64>();
    Ok(QuantileFit {
        alpha,
        coefficients,
        residuals,
        objective,
        dual_objective,
    })
}
