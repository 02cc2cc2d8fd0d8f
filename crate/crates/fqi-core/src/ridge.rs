//! Ridge regression on streamed design rows and the two fitted-Q-iteration
//! drivers built on it: the discounted fixed-point loop and the
//! finite-horizon backward recursion. Also hosts the exact tabular
//! Bellman-residual norm and the residual-sequence regularity check.
//!
//! The normal-equation system uses the (1/n)-normalized second-moment matrix
//! `sigma_hat = (1/n) X^T X`, so the ridge weight enters as
//! `(sigma_hat + lambda I) w = (1/n) X^T y`. The Gram matrix depends only on
//! the design, so its factorization is computed once and reused across
//! iterations; per-iteration work is pseudo-response construction and one
//! triangular solve.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{Dataset, RegressionDesign, Transition};
use crate::error::{Error, Result};
use crate::features::{maximize_cubic, ProductFeatureSpec, TabularOneHot};
use crate::fmath;
use crate::linalg::{Cholesky, Mat};
use crate::mdp::{apply_optimality_operator, occupancy_norm, PolicySeq, StageQ, TabularMdp};
use crate::mountain_car::McState;

/// Relative size of the diagonal jitter used for one retry when the
/// regularized Gram matrix fails to factor (λ = 0 on rank-deficient data).
const JITTER_REL: f64 = 1e-10;

/// Knobs for the iterative (discounted) fitted-Q loop.
#[derive(Debug, Clone)]
pub struct FqiConfig {
    pub max_iterations: usize,
    /// Consecutive small weight changes required before stopping.
    pub patience: usize,
    /// Threshold on the per-iteration weight change ‖Δw‖₂/√d.
    pub tolerance: f64,
    /// Ridge weight; `None` selects the default schedule 0.01/n.
    pub lambda: Option<f64>,
}

impl Default for FqiConfig {
    fn default() -> Self {
        FqiConfig {
            max_iterations: 500,
            patience: 5,
            tolerance: 5e-3,
            lambda: None,
        }
    }
}

impl FqiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::domain("fqi: max_iterations must be >= 1"));
        }
        if self.patience == 0 {
            return Err(Error::domain("fqi: patience must be >= 1"));
        }
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::domain("fqi: tolerance must be a positive real"));
        }
        if let Some(l) = self.lambda {
            if !l.is_finite() || l < 0.0 {
                return Err(Error::domain("fqi: lambda must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// Ridge weight actually used for a sample of size `n`.
    pub fn effective_lambda(&self, n: usize) -> f64 {
        self.lambda.unwrap_or(0.01 / n as f64)
    }
}

/// Outcome of a fitted-Q run.
#[derive(Debug, Clone)]
pub struct FqiResult {
    pub weights: Vec<f64>,
    /// Completed weight updates.
    pub iterations: usize,
    /// ‖Δw‖₂/√d after each completed update; length equals `iterations`.
    pub history: Vec<f64>,
    /// True when the patience criterion fired before the iteration cap.
    pub converged: bool,
}

/// Accumulate the upper triangle of `X^T X` over design rows `lo..hi`
/// (unnormalized). Blocks can be computed independently and summed in fixed
/// block order for a deterministic parallel reduction.
pub fn gram_upper_partial<D: RegressionDesign + ?Sized>(design: &D, lo: usize, hi: usize) -> Mat {
    let d = design.dim();
    let mut gram = Mat::zeros(d, d);
    let mut row = vec![0.0; d];
    let data = gram.as_mut_slice();
    for i in lo..hi {
        design.write_row(i, &mut row);
        for j in 0..d {
            let xj = row[j];
            if xj != 0.0 {
                let base = j * d;
                for (k, &xk) in row.iter().enumerate().skip(j) {
                    data[base + k] += xj * xk;
                }
            }
        }
    }
    gram
}

/// Accumulate `sum_i y_i phi_i` over rows `lo..hi` (unnormalized), adding
/// into `out`. Same block-parallel contract as [`gram_upper_partial`].
pub fn weighted_row_sum_partial<D: RegressionDesign + ?Sized>(
    design: &D,
    ys: &[f64],
    lo: usize,
    hi: usize,
    out: &mut [f64],
) {
    let d = design.dim();
    debug_assert_eq!(out.len(), d);
    let mut row = vec![0.0; d];
    for i in lo..hi {
        design.write_row(i, &mut row);
        let y = ys[i];
        if y != 0.0 {
            for (o, &x) in out.iter_mut().zip(row.iter()) {
                *o += y * x;
            }
        }
    }
}

/// Factorized ridge system for a fixed design: holds the Cholesky factor of
/// `sigma_hat + lambda I` so repeated solves against fresh targets are cheap.
#[derive(Debug, Clone)]
pub struct DesignSolver {
    chol: Cholesky,
    d: usize,
    n: usize,
    lambda_used: f64,
}

impl DesignSolver {
    pub fn new<D: RegressionDesign + ?Sized>(design: &D, lambda: f64) -> Result<Self> {
        let n = design.len();
        if n == 0 {
            return Err(Error::data("ridge: empty design"));
        }
        let gram = gram_upper_partial(design, 0, n);
        Self::from_gram_upper(gram, n, lambda)
    }

    /// Finish construction from an unnormalized upper-triangle Gram sum
    /// (as produced by [`gram_upper_partial`], possibly reduced over blocks).
    pub fn from_gram_upper(mut gram_sum: Mat, n: usize, lambda: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::data("ridge: empty design"));
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::domain("ridge: lambda must be finite and >= 0"));
        }
        let d = gram_sum.n_rows();
        let inv_n = 1.0 / n as f64;
        for j in 0..d {
            for k in j..d {
                *gram_sum.at_mut(j, k) *= inv_n;
            }
        }
        let sigma_trace = gram_sum.trace();
        if !sigma_trace.is_finite() {
            return Err(Error::data("ridge: non-finite design entries"));
        }
        gram_sum.mirror_upper();

        let factor_with = |reg: f64| -> Result<Cholesky> {
            let mut a = gram_sum.clone();
            for j in 0..d {
                *a.at_mut(j, j) += reg;
            }
            Cholesky::factor(&a)
        };
        let (chol, lambda_used) = match factor_with(lambda) {
            Ok(c) => (c, lambda),
            Err(_) => {
                // One retry with a trace-scaled jitter separates genuine rank
                // deficiency from roundoff-level semidefiniteness.
                let jitter = JITTER_REL * sigma_trace / d as f64;
                let reg = lambda + jitter;
                match factor_with(reg) {
                    Ok(c) if jitter > 0.0 => (c, reg),
                    _ => {
                        return Err(Error::singular(
                            "ridge: Gram matrix not positive definite even after jitter",
                        ))
                    }
                }
            }
        };
        Ok(DesignSolver {
            chol,
            d,
            n,
            lambda_used,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Ridge weight actually applied (differs from the request only when the
    /// jitter retry fired).
    pub fn lambda_used(&self) -> f64 {
        self.lambda_used
    }

    /// Solve `(sigma_hat + lambda I) w = rhs` for a normalized right-hand
    /// side `(1/n) X^T y`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.chol.solve(rhs)
    }

    /// Ridge fit against raw targets: builds the normalized right-hand side
    /// and solves.
    pub fn fit_targets<D: RegressionDesign + ?Sized>(
        &self,
        design: &D,
        ys: &[f64],
    ) -> Result<Vec<f64>> {
        if ys.len() != self.n || design.len() != self.n || design.dim() != self.d {
            return Err(Error::dim("ridge: target/design shape mismatch"));
        }
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(Error::data("ridge: non-finite regression target"));
        }
        let mut rhs = vec![0.0; self.d];
        weighted_row_sum_partial(design, ys, 0, self.n, &mut rhs);
        let inv_n = 1.0 / self.n as f64;
        for r in rhs.iter_mut() {
            *r *= inv_n;
        }
        self.solve(&rhs)
    }
}

/// Dense-matrix design adapter: rows of `x` are the feature vectors.
struct DenseDesign<'a> {
    x: &'a Mat,
}

impl RegressionDesign for DenseDesign<'_> {
    fn dim(&self) -> usize {
        self.x.n_cols()
    }
    fn len(&self) -> usize {
        self.x.n_rows()
    }
    fn reward(&self, _i: usize) -> f64 {
        0.0
    }
    fn write_row(&self, i: usize, out: &mut [f64]) {
        out.copy_from_slice(self.x.row(i));
    }
    fn next_best_value(&self, _i: usize, _w: &[f64]) -> f64 {
        0.0
    }
}

/// Minimize `(1/n) Σ (y_i − <w, x_i>)² + λ‖w‖²` for a dense design matrix.
pub fn ridge_solve(xs: &Mat, ys: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if xs.n_rows() != ys.len() {
        return Err(Error::dim("ridge: row count != target count"));
    }
    if xs.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::data("ridge: non-finite design entries"));
    }
    let design = DenseDesign { x: xs };
    let solver = DesignSolver::new(&design, lambda)?;
    solver.fit_targets(&design, ys)
}

fn weight_change(old: &[f64], new: &[f64]) -> f64 {
    let mut s = 0.0;
    for (a, b) in old.iter().zip(new.iter()) {
        let diff = b - a;
        s += diff * diff;
    }
    fmath::sqrt(s / old.len() as f64)
}

/// Discounted fitted Q-iteration: starting from w = 0, repeatedly regress
/// the pseudo-responses `r_i + γ · max_a <w, phi(s'_i, a)>` onto the design,
/// reusing one Gram factorization throughout. Stops at the iteration cap or
/// after `patience` consecutive updates with ‖Δw‖₂/√d below the tolerance.
pub fn fqi_discounted<D: RegressionDesign + ?Sized>(
    design: &D,
    gamma: f64,
    cfg: &FqiConfig,
) -> Result<FqiResult> {
    cfg.validate()?;
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::domain("fqi: discount must lie in [0, 1)"));
    }
    let n = design.len();
    let d = design.dim();
    if n == 0 || d == 0 {
        return Err(Error::data("fqi: empty design"));
    }
    let solver = DesignSolver::new(design, cfg.effective_lambda(n))?;

    let mut w = vec![0.0; d];
    let mut ys = vec![0.0; n];
    let mut history = Vec::new();
    let mut streak = 0usize;
    let mut converged = false;

    for _ in 0..cfg.max_iterations {
        for (i, y) in ys.iter_mut().enumerate() {
            let future = if gamma == 0.0 {
                0.0
            } else {
                gamma * design.next_best_value(i, &w)
            };
            let target = design.reward(i) + future;
            if !target.is_finite() {
                return Err(Error::data("fqi: non-finite pseudo-response"));
            }
            *y = target;
        }
        let w_new = solver.fit_targets(design, &ys)?;
        let delta = weight_change(&w, &w_new);
        history.push(delta);
        w = w_new;
        if delta < cfg.tolerance {
            streak += 1;
            if streak >= cfg.patience {
                converged = true;
                break;
            }
        } else {
            streak = 0;
        }
    }

    let iterations = history.len();
    Ok(FqiResult {
        weights: w,
        iterations,
        history,
        converged,
    })
}

/// Finite-horizon fitted Q-iteration. `stage_designs[h-1]` carries the data
/// for stage h (h = 1..H−1); `terminal_weights` plays the role of the
/// stage-H fit (for function classes containing the final reward this is the
/// vector representing r_H). Returns one weight vector per stage, index
/// `h-1` for stage h, with the terminal vector copied into the last slot.
/// One ridge regression per stage, no inner loop; `lambdas`, when supplied,
/// gives the per-stage ridge weights (length H−1), otherwise 0.01/n_h.
pub fn fqi_finite_horizon<D: RegressionDesign>(
    stage_designs: &[D],
    terminal_weights: &[f64],
    lambdas: Option<&[f64]>,
) -> Result<Vec<Vec<f64>>> {
    if stage_designs.is_empty() {
        return Err(Error::data("fqi: need at least one stage dataset"));
    }
    let d = stage_designs[0].dim();
    if terminal_weights.len() != d {
        return Err(Error::dim("fqi: terminal weight length != feature dim"));
    }
    if terminal_weights.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("fqi: non-finite terminal weights"));
    }
    if let Some(ls) = lambdas {
        if ls.len() != stage_designs.len() {
            return Err(Error::dim("fqi: lambda schedule length != stage count"));
        }
    }
    let n_stages = stage_designs.len();
    let mut weights = vec![Vec::new(); n_stages + 1];
    weights[n_stages] = terminal_weights.to_vec();

    for h in (0..n_stages).rev() {
        let design = &stage_designs[h];
        if design.dim() != d {
            return Err(Error::dim("fqi: stage designs disagree on feature dim"));
        }
        let n = design.len();
        if n == 0 {
            return Err(Error::data("fqi: empty stage dataset"));
        }
        let lambda = match lambdas {
            Some(ls) => ls[h],
            None => 0.01 / n as f64,
        };
        let next_w = weights[h + 1].clone();
        let mut ys = vec![0.0; n];
        for (i, y) in ys.iter_mut().enumerate() {
            let target = design.reward(i) + design.next_best_value(i, &next_w);
            if !target.is_finite() {
                return Err(Error::data("fqi: non-finite pseudo-response"));
            }
            *y = target;
        }
        let solver = DesignSolver::new(design, lambda)?;
        weights[h] = solver.fit_targets(design, &ys)?;
    }
    Ok(weights)
}

/// One-hot design over tabular transitions: φ(s, a) is the indicator at the
/// flat index s·A + a, so ridge regression reduces to per-pair shrunken
/// averages and fitted-Q runs can be checked against dynamic programming.
#[derive(Debug, Clone)]
pub struct OneHotDesign {
    map: TabularOneHot,
    rows: Vec<Transition<usize, usize>>,
}

impl OneHotDesign {
    pub fn new(map: TabularOneHot, data: &Dataset<usize, usize>) -> Result<Self> {
        data.check_basic()?;
        for t in &data.rows {
            if t.state >= map.n_states || t.next_state >= map.n_states || t.action >= map.n_actions
            {
                return Err(Error::data("one-hot design: index outside the table"));
            }
        }
        Ok(OneHotDesign {
            map,
            rows: data.rows.clone(),
        })
    }

    pub fn map(&self) -> &TabularOneHot {
        &self.map
    }
}

impl RegressionDesign for OneHotDesign {
    fn dim(&self) -> usize {
        self.map.dim()
    }
    fn len(&self) -> usize {
        self.rows.len()
    }
    fn reward(&self, i: usize) -> f64 {
        self.rows[i].reward
    }
    fn write_row(&self, i: usize, out: &mut [f64]) {
        out.fill(0.0);
        let t = &self.rows[i];
        out[self.map.flat(t.state, t.action)] = 1.0;
    }
    fn next_best_value(&self, i: usize, w: &[f64]) -> f64 {
        self.map.max_action(w, self.rows[i].next_state).1
    }
}

/// Product-basis design over mountain-car transitions. Caches the per-sample
/// base vectors (position/velocity features of both states plus force
/// powers), so design rows rebuild with multiplications only and the
/// per-iteration action maximization needs no trigonometry.
#[derive(Debug, Clone)]
pub struct ProductBasisDesign {
    spec: ProductFeatureSpec,
    /// Per row: pos(s) | vel(s) | force powers | pos(s') | vel(s').
    cache: Vec<f64>,
    rewards: Vec<f64>,
    stride: usize,
}

impl ProductBasisDesign {
    pub fn new(spec: ProductFeatureSpec, data: &Dataset<McState, f64>) -> Result<Self> {
        data.check_basic()?;
        let p_len = spec.pos_components;
        let v_len = spec.vel_components;
        let f_len = spec.force_degree + 1;
        let stride = 2 * (p_len + v_len) + f_len;
        let n = data.len();
        let mut cache = vec![0.0; n * stride];
        let mut rewards = Vec::with_capacity(n);
        for (i, t) in data.rows.iter().enumerate() {
            let chunk = &mut cache[i * stride..(i + 1) * stride];
            let (cur_pos, rest) = chunk.split_at_mut(p_len);
            let (cur_vel, rest) = rest.split_at_mut(v_len);
            let (force, rest) = rest.split_at_mut(f_len);
            let (next_pos, next_vel) = rest.split_at_mut(p_len);
            spec.write_position_features(t.state.p, cur_pos)?;
            spec.write_velocity_features(t.state.v, cur_vel)?;
            spec.write_force_features(t.action, force)?;
            spec.write_position_features(t.next_state.p, next_pos)?;
            spec.write_velocity_features(t.next_state.v, next_vel)?;
            rewards.push(t.reward);
        }
        Ok(ProductBasisDesign {
            spec,
            cache,
            rewards,
            stride,
        })
    }

    pub fn spec(&self) -> &ProductFeatureSpec {
        &self.spec
    }

    fn parts(&self, i: usize) -> (&[f64], &[f64], &[f64], &[f64], &[f64]) {
        let p_len = self.spec.pos_components;
        let v_len = self.spec.vel_components;
        let f_len = self.spec.force_degree + 1;
        let chunk = &self.cache[i * self.stride..(i + 1) * self.stride];
        let (cur_pos, rest) = chunk.split_at(p_len);
        let (cur_vel, rest) = rest.split_at(v_len);
        let (force, rest) = rest.split_at(f_len);
        let (next_pos, next_vel) = rest.split_at(p_len);
        (cur_pos, cur_vel, force, next_pos, next_vel)
    }

    /// Greedy force for an arbitrary state under weights `w` (used when the
    /// fitted weights are turned into an executable policy).
    pub fn greedy_force(&self, w: &[f64], p: f64, v: f64) -> Result<f64> {
        Ok(self.spec.max_force(w, p, v)?.0)
    }
}

impl RegressionDesign for ProductBasisDesign {
    fn dim(&self) -> usize {
        self.spec.dim()
    }
    fn len(&self) -> usize {
        self.rewards.len()
    }
    fn reward(&self, i: usize) -> f64 {
        self.rewards[i]
    }
    fn write_row(&self, i: usize, out: &mut [f64]) {
        let (pos, vel, force, _, _) = self.parts(i);
        let scale = self.spec.scale();
        let mut idx = 0;
        for &pi in pos {
            for &vj in vel {
                let pv = scale * pi * vj;
                for &fk in force {
                    out[idx] = pv * fk;
                    idx += 1;
                }
            }
        }
    }
    fn next_best_value(&self, i: usize, w: &[f64]) -> f64 {
        let (_, _, _, pos2, vel2) = self.parts(i);
        match self
            .spec
            .cubic_coefficients_from_base(w, pos2, vel2)
            .and_then(|c| maximize_cubic(&c, self.spec.f_range.0, self.spec.f_range.1))
        {
            Ok((_, value)) => value,
            Err(_) => f64::NAN,
        }
    }
}

/// Exact stage-h Bellman-residual norm on a tabular instance: the occupancy
/// norm (under `pi_star`) of `B*_h f_{h+1} − f_h`. Defined for 1 ≤ h ≤ H−1.
pub fn bellman_residual_norm(
    mdp: &TabularMdp,
    f_hat: &StageQ,
    pi_star: &PolicySeq,
    h: usize,
) -> Result<f64> {
    if !f_hat.dims_match(mdp) {
        return Err(Error::dim("bellman residual: table shape mismatch"));
    }
    if h == 0 || h >= mdp.horizon() {
        return Err(Error::domain(
            "bellman residual: stage must satisfy 1 <= h <= H-1",
        ));
    }
    let backed_up = apply_optimality_operator(mdp, f_hat.stage(h + 1), h)?;
    let current = f_hat.stage(h);
    let residual: Vec<f64> = backed_up
        .iter()
        .zip(current.iter())
        .map(|(b, f)| b - f)
        .collect();
    occupancy_norm(mdp, pi_star, &residual, h)
}

/// Check the residual-regularity property: with ε indexed by stage 1..H and
/// ε_H = 0 required, every ε_h must be at least the average of the later
/// entries, ε_h ≥ (1/(H−h)) Σ_{h'>h} ε_{h'}. Comparison allows a 1e-12
/// relative slack so exact-equality profiles are not rejected by roundoff.
pub fn regular_sequence_check(eps: &[f64]) -> Result<bool> {
    if eps.is_empty() {
        return Err(Error::domain("regularity check: empty sequence"));
    }
    if eps.iter().any(|e| !e.is_finite() || *e < 0.0) {
        return Err(Error::domain(
            "regularity check: entries must be finite and >= 0",
        ));
    }
    let horizon = eps.len();
    if eps[horizon - 1] != 0.0 {
        return Err(Error::domain(
            "regularity check: terminal residual must be exactly 0",
        ));
    }
    let scale = eps.iter().cloned().fold(0.0f64, f64::max);
    let slack = 1e-12 * (1.0 + scale);
    for h in 1..horizon {
        let tail = &eps[h..];
        let avg = tail.iter().sum::<f64>() / tail.len() as f64;
        if eps[h - 1] + slack < avg {
            return Ok(false);
        }
    }
    Ok(true)
}
