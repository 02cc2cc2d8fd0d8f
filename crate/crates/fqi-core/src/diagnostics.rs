//! Computable instantiations of the analysis quantities: covariance
//! matrices, the covariate-shift norm, conditional next-value spread,
//! value-gap bound evaluators, sampled stability coefficients on tabular
//! instances, and the planar disk curvature checks.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::RegressionDesign;
use crate::error::{Error, Result};
use crate::fmath;
use crate::linalg::{dot, sym_eigen, Cholesky, Mat};
use crate::mdp::{
    apply_optimality_operator, occupancy_norm, occupation_weights, greedy_policy, sample_index,
    PolicySeq, StageQ, TabularMdp,
};
use crate::ridge::{gram_upper_partial, regular_sequence_check};
use crate::rng::StreamRng;

/// Where a covariance matrix came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovKind {
    /// Exact second-moment matrix under the optimal occupation measure.
    Population,
    /// Sample second-moment matrix (1/n) Σ φφᵀ from a dataset.
    Empirical,
}

/// Symmetric positive-semidefinite second-moment matrix with provenance.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    kind: CovKind,
    mat: Mat,
}

impl CovarianceMatrix {
    /// Validating constructor for externally assembled matrices: square,
    /// symmetric to 1e-12 (relative to the largest entry), and with smallest
    /// eigenvalue above -1e-10.
    pub fn new(mat: Mat, kind: CovKind) -> Result<Self> {
        if mat.n_rows() != mat.n_cols() {
            return Err(Error::dim("covariance matrix must be square"));
        }
        let scale = mat.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !scale.is_finite() {
            return Err(Error::data("covariance matrix has non-finite entries"));
        }
        if mat.asymmetry() > 1e-12 * (1.0 + scale) {
            return Err(Error::data("covariance matrix is not symmetric"));
        }
        let eig = sym_eigen(&mat)?;
        if eig.values[0] < -1e-10 {
            return Err(Error::data(
                "covariance matrix has a significantly negative eigenvalue",
            ));
        }
        Ok(CovarianceMatrix { kind, mat })
    }

    fn from_trusted(mat: Mat, kind: CovKind) -> Self {
        CovarianceMatrix { kind, mat }
    }

    pub fn kind(&self) -> CovKind {
        self.kind
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.n_rows()
    }
}

/// Sample second-moment matrix (1/n) Σ φφᵀ of a design.
pub fn empirical_covariance<D: RegressionDesign + ?Sized>(design: &D) -> Result<CovarianceMatrix> {
    let n = design.len();
    if n == 0 {
        return Err(Error::data("covariance of an empty design"));
    }
    let mut gram = gram_upper_partial(design, 0, n);
    let d = gram.n_rows();
    let inv_n = 1.0 / n as f64;
    for j in 0..d {
        for k in j..d {
            *gram.at_mut(j, k) *= inv_n;
        }
    }
    gram.mirror_upper();
    if gram.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::data("covariance accumulated non-finite entries"));
    }
    Ok(CovarianceMatrix::from_trusted(gram, CovKind::Empirical))
}

/// Exact stage-h second-moment matrix Σ ξ_h(s,a) φ(s,a)φ(s,a)ᵀ under the
/// supplied policy's occupation measure. `features` holds φ(s,a) in row
/// s·A + a.
pub fn population_covariance(
    mdp: &TabularMdp,
    pi: &PolicySeq,
    h: usize,
    features: &Mat,
) -> Result<CovarianceMatrix> {
    if features.n_rows() != mdp.n_states() * mdp.n_actions() {
        return Err(Error::dim("feature matrix rows != |S|·|A|"));
    }
    let xi = occupation_weights(mdp, pi, h)?;
    let d = features.n_cols();
    let mut out = Mat::zeros(d, d);
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let weight = xi.weight(s, a);
            if weight == 0.0 {
                continue;
            }
            let phi = features.row(s * mdp.n_actions() + a);
            for j in 0..d {
                let wj = weight * phi[j];
                for k in j..d {
                    *out.at_mut(j, k) += wj * phi[k];
                }
            }
        }
    }
    out.mirror_upper();
    Ok(CovarianceMatrix::from_trusted(out, CovKind::Population))
}

/// Covariate-shift norm ‖Σ^{1/2} (Σ̂ + λI)^{-1/2}‖₂, the square root of the
/// largest eigenvalue of (Σ̂+λI)^{-1/2} Σ (Σ̂+λI)^{-1/2}.
pub fn covariate_shift_norm(
    population: &CovarianceMatrix,
    empirical: &CovarianceMatrix,
    lambda: f64,
) -> Result<f64> {
    let d = population.dim();
    if empirical.dim() != d {
        return Err(Error::dim("covariance dimensions differ"));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::domain("shift norm: lambda must be finite and >= 0"));
    }
    let mut b = empirical.mat().clone();
    for j in 0..d {
        *b.at_mut(j, j) += lambda;
    }
    let eig = sym_eigen(&b)?;
    let floor = 1e-14 * (1.0 + eig.values[d - 1].abs());
    if eig.values[0] <= floor {
        return Err(Error::singular(
            "shift norm: regularized empirical covariance is singular",
        ));
    }
    // inv_sqrt = V diag(1/sqrt(v)) Vᵀ, assembled column-wise.
    let mut inv_sqrt = Mat::zeros(d, d);
    for j in 0..d {
        for k in 0..d {
            let mut acc = 0.0;
            for (i, &value) in eig.values.iter().enumerate() {
                acc += eig.vectors.at(j, i) * eig.vectors.at(k, i) / fmath::sqrt(value);
            }
            *inv_sqrt.at_mut(j, k) = acc;
        }
    }
    let mut middle = inv_sqrt.mul(population.mat())?.mul(&inv_sqrt)?;
    // Symmetrize roundoff before the final eigensolve.
    for j in 0..d {
        for k in (j + 1)..d {
            let avg = 0.5 * (middle.at(j, k) + middle.at(k, j));
            *middle.at_mut(j, k) = avg;
            *middle.at_mut(k, j) = avg;
        }
    }
    let top = sym_eigen(&middle)?.values[d - 1];
    Ok(fmath::sqrt(top.max(0.0)))
}

/// Monte-Carlo estimate of the conditional next-value spread: for each
/// listed (s, a), draw `m` next states from the stage-h transition law,
/// take the sample variance of max_b f_{h+1}(·, b), average the variances
/// over the pairs, and return the square root.
pub fn conditional_std_estimate(
    mdp: &TabularMdp,
    f: &StageQ,
    h: usize,
    pairs: &[(usize, usize)],
    m: usize,
    rng: &mut StreamRng,
) -> Result<f64> {
    if !f.dims_match(mdp) {
        return Err(Error::dim("conditional spread: table shape mismatch"));
    }
    if h == 0 || h >= mdp.horizon() {
        return Err(Error::domain("conditional spread: need 1 <= h <= H-1"));
    }
    if pairs.is_empty() || m < 2 {
        return Err(Error::domain(
            "conditional spread: need >= 1 pair and m >= 2 draws",
        ));
    }
    let mut total_var = 0.0;
    let mut draws = vec![0.0f64; m];
    for &(s, a) in pairs {
        if s >= mdp.n_states() || a >= mdp.n_actions() {
            return Err(Error::domain("conditional spread: pair outside the MDP"));
        }
        let row = mdp.transition_row(h, s, a);
        for slot in draws.iter_mut() {
            let next = sample_index(row, rng);
            let mut best = f64::NEG_INFINITY;
            for b in 0..mdp.n_actions() {
                best = best.max(f.at(h + 1, next, b));
            }
            *slot = best;
        }
        let mean = draws.iter().sum::<f64>() / m as f64;
        let ss: f64 = draws.iter().map(|v| (v - mean) * (v - mean)).sum();
        total_var += ss / (m - 1) as f64;
    }
    Ok(fmath::sqrt(total_var / pairs.len() as f64))
}

/// Inputs to the stage-wise value-gap bound evaluator. Stage h lives at
/// index h-1 throughout; `eps` covers stages 1..H with the terminal entry
/// required to be zero, `q_norms` covers 1..H-1, `occupation` holds the
/// pairwise coefficients on its upper triangle (including the diagonal,
/// where the defining operator is the identity), and `bellman_stage` holds
/// the per-stage operator-stability factors for stages 1..H-2 — later
/// factors never enter any product. `contraction` records the norm-pair
/// contraction constant (1 for this occupancy-norm instantiation) and
/// `radii` the neighborhood radii; both are carried for reporting.
#[derive(Debug, Clone)]
pub struct BoundInputs {
    pub horizon: usize,
    pub eps: Vec<f64>,
    pub occupation: Mat,
    pub bellman_stage: Vec<f64>,
    pub q_norms: Vec<f64>,
    pub dim: usize,
    pub radii: Vec<f64>,
    pub contraction: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let horizon = self.horizon;
        if horizon < 2 {
            return Err(Error::domain("bound inputs: horizon must be >= 2"));
        }
        if self.eps.len() != horizon {
            return Err(Error::dim("bound inputs: eps must have one entry per stage"));
        }
        if self.occupation.n_rows() != horizon - 1 || self.occupation.n_cols() != horizon - 1 {
            return Err(Error::dim(
                "bound inputs: occupation coefficients must be (H-1)x(H-1)",
            ));
        }
        if self.bellman_stage.len() != horizon.saturating_sub(2) {
            return Err(Error::dim(
                "bound inputs: need one operator factor per stage 1..H-2",
            ));
        }
        if self.q_norms.len() != horizon - 1 {
            return Err(Error::dim("bound inputs: need one norm per stage 1..H-1"));
        }
        if self.radii.len() != horizon - 1 {
            return Err(Error::dim("bound inputs: need one radius per stage 1..H-1"));
        }
        let nonneg = |xs: &[f64]| xs.iter().all(|v| v.is_finite() && *v >= 0.0);
        if !nonneg(&self.eps)
            || !nonneg(&self.bellman_stage)
            || !nonneg(&self.radii)
            || !nonneg(self.occupation.as_slice())
        {
            return Err(Error::domain(
                "bound inputs: all coefficients must be finite and >= 0",
            ));
        }
        if self.q_norms.iter().any(|q| !q.is_finite() || *q <= 0.0) {
            return Err(Error::domain(
                "bound inputs: a zero optimal-value norm is a modeling defect",
            ));
        }
        if !self.contraction.is_finite() || self.contraction <= 0.0 || self.dim == 0 {
            return Err(Error::domain("bound inputs: bad contraction constant or dim"));
        }
        Ok(())
    }

    /// Product of per-stage operator factors from stage h to h' (both
    /// 1-based, h <= h'); empty product = 1.
    fn operator_product(&self, h: usize, h_prime: usize) -> f64 {
        let mut acc = 1.0;
        for t in h..h_prime {
            acc *= self.bellman_stage[t - 1];
        }
        acc
    }
}

/// Stage-summed value-gap bound:
/// 2 Σ_h (1/‖q*_h‖) {Σ_{h'≥h} κ(h,h') ε_{h'}} {Σ_{h'≥h} κ*(h→h') ε_{h'}}.
/// Requires the residual sequence to pass the regularity check.
pub fn fast_rate_bound(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    if !regular_sequence_check(&b.eps)? {
        return Err(Error::precondition(
            "value-gap bound requires a regular residual sequence",
        ));
    }
    let horizon = b.horizon;
    let mut total = 0.0;
    for h in 1..horizon {
        let mut occ_sum = 0.0;
        let mut op_sum = 0.0;
        for h_prime in h..horizon {
            let eps = b.eps[h_prime - 1];
            occ_sum += b.occupation.at(h - 1, h_prime - 1) * eps;
            op_sum += b.operator_product(h, h_prime) * eps;
        }
        total += occ_sum * op_sum / b.q_norms[h - 1];
    }
    Ok(2.0 * total)
}

/// Output of the linear-class bound evaluator.
#[derive(Debug, Clone, Copy)]
pub struct LinearBoundReport {
    pub bound: f64,
    /// Whether every stage satisfies the smallness precondition
    /// ε_h ≤ ‖q*_{h+1}‖ / (6√d · β_{h+1} · (H−h)² · (1 + ln H)).
    pub precondition_ok: bool,
}

/// Linear-class value-gap bound 6√d Σ_h (β_h/‖q*_h‖)(Σ_{h'≥h} ε_{h'})²,
/// with the smallness precondition evaluated against the supplied norms.
/// `eps`, `betas`, and `q_norms` are all stage-indexed 1..H (length H);
/// the terminal residual must be zero and terminal norms are consulted
/// only by the precondition.
pub fn prop_lin_bound(
    eps: &[f64],
    betas: &[f64],
    q_norms: &[f64],
    dim: usize,
) -> Result<LinearBoundReport> {
    let horizon = eps.len();
    if horizon < 2 {
        return Err(Error::domain("linear bound: horizon must be >= 2"));
    }
    if betas.len() != horizon || q_norms.len() != horizon {
        return Err(Error::dim(
            "linear bound: eps, betas, q_norms must share length H",
        ));
    }
    if dim == 0 {
        return Err(Error::domain("linear bound: dimension must be >= 1"));
    }
    if betas.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::domain("linear bound: betas must be finite and >= 0"));
    }
    if q_norms.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::domain(
            "linear bound: a zero optimal-value norm is a modeling defect",
        ));
    }
    if !regular_sequence_check(eps)? {
        return Err(Error::precondition(
            "linear bound requires a regular residual sequence",
        ));
    }
    let sqrt_d = fmath::sqrt(dim as f64);
    let log_term = 1.0 + fmath::ln(horizon as f64);
    let mut bound = 0.0;
    let mut precondition_ok = true;
    for h in 1..horizon {
        let tail: f64 = eps[h - 1..].iter().sum();
        bound += betas[h - 1] / q_norms[h - 1] * tail * tail;
        let denom = 6.0 * sqrt_d * betas[h] * ((horizon - h) * (horizon - h)) as f64 * log_term;
        // A zero curvature norm at the next stage imposes no constraint.
        if denom > 0.0 && eps[h - 1] > q_norms[h] / denom {
            precondition_ok = false;
        }
    }
    Ok(LinearBoundReport {
        bound: 6.0 * sqrt_d * bound,
        precondition_ok,
    })
}

/// Sampled lower bounds for the stability coefficients of a tabular MDP
/// with a linear function class.
#[derive(Debug, Clone)]
pub struct StabilityEstimates {
    /// Per-stage operator-stability ratios, stages 1..H-2.
    pub bellman_stage: Vec<f64>,
    /// Occupation-stability ratios κ(h,h') on the upper triangle
    /// (1 ≤ h ≤ h' ≤ H−1), entry (h−1, h′−1).
    pub occupation: Mat,
    pub trials: usize,
    pub skipped_bellman: usize,
    pub skipped_occupation: usize,
}

/// Estimate the stability coefficients by sampling random class functions
/// inside the metric neighborhood of q* and maximizing the defining ratios.
/// The inner supremum over difference functions is solved exactly in the
/// linear span; the outer supremum over neighborhood members is sampled, so
/// every reported coefficient is a lower bound for the true supremum.
///
/// `features` holds φ(s,a) in row s·A+a; the weighted feature second-moment
/// matrix at every stage must be positive definite (generic dense features
/// with dim ≤ |S| satisfy this; one-hot features do not). `radii` and
/// `betas` (stage 1..H-1) define the neighborhood through the linear
/// metric: ‖f_h − q*_h‖_h ≤ ρ_h ‖q*_h‖_h / (√d β_h).
pub fn stability_coefficients_sampled(
    mdp: &TabularMdp,
    features: &Mat,
    pi_star: &PolicySeq,
    radii: &[f64],
    betas: &[f64],
    trials: usize,
    rng: &mut StreamRng,
) -> Result<StabilityEstimates> {
    let horizon = mdp.horizon();
    let n_states = mdp.n_states();
    let n_actions = mdp.n_actions();
    let d = features.n_cols();
    if horizon < 2 {
        return Err(Error::domain("stability sampling: horizon must be >= 2"));
    }
    if features.n_rows() != n_states * n_actions {
        return Err(Error::dim("stability sampling: feature rows != |S|·|A|"));
    }
    if radii.len() != horizon - 1 || betas.len() != horizon - 1 {
        return Err(Error::dim(
            "stability sampling: radii/betas must cover stages 1..H-1",
        ));
    }
    if trials == 0 {
        return Err(Error::domain("stability sampling: need >= 1 trial"));
    }

    let q_star = crate::mdp::exact_optimal_q(mdp);
    let sqrt_d = fmath::sqrt(d as f64);

    // Stage norms of q*, neighborhood ball sizes, occupation weights, and
    // the weighted feature second-moment factorizations.
    let mut q_norm = vec![0.0; horizon];
    let mut ball = vec![0.0; horizon];
    let mut state_weight = vec![vec![0.0; n_states]; horizon];
    let mut grams = Vec::with_capacity(horizon);
    for h in 1..=horizon {
        q_norm[h - 1] = occupancy_norm(mdp, pi_star, q_star.stage(h), h)?;
        let xi = occupation_weights(mdp, pi_star, h)?;
        for s in 0..n_states {
            for a in 0..n_actions {
                state_weight[h - 1][s] += xi.weight(s, a);
            }
        }
        if h < horizon {
            ball[h - 1] = if betas[h - 1] > 0.0 {
                radii[h - 1] * q_norm[h - 1] / (sqrt_d * betas[h - 1])
            } else {
                0.0
            };
        }
        // Weighted Gram at this stage: Σ ξ(s,a) φφᵀ, factored for the dual
        // norm solves.
        let mut gram = Mat::zeros(d, d);
        for s in 0..n_states {
            for a in 0..n_actions {
                let weight = xi.weight(s, a);
                if weight == 0.0 {
                    continue;
                }
                let phi = features.row(s * n_actions + a);
                for j in 0..d {
                    let wj = weight * phi[j];
                    for k in j..d {
                        *gram.at_mut(j, k) += wj * phi[k];
                    }
                }
            }
        }
        gram.mirror_upper();
        let chol = Cholesky::factor(&gram).map_err(|_| {
            Error::domain(
                "stability sampling: weighted feature moments are degenerate at some stage \
                 (the class must be positive definite under the optimal occupation measure)",
            )
        })?;
        grams.push(chol);
    }

    let mut bellman_stage = vec![0.0f64; horizon.saturating_sub(2)];
    let mut bellman_seen = vec![false; horizon.saturating_sub(2)];
    let mut occupation = Mat::zeros(horizon - 1, horizon - 1);
    let mut occupation_seen = vec![false; (horizon - 1) * (horizon - 1)];
    let mut skipped_bellman = 0usize;
    let mut skipped_occupation = 0usize;

    let tiny = 1e-13;
    let mut coeffs = vec![0.0f64; d];
    for _ in 0..trials {
        // One neighborhood member: q* plus a class perturbation per stage,
        // scaled to a uniform radius fraction; the terminal stage is exact.
        let mut f = q_star.clone();
        for h in 1..horizon {
            for c in coeffs.iter_mut() {
                *c = rng.normal();
            }
            let fraction = rng.uniform01();
            let mut table = vec![0.0; n_states * n_actions];
            for s in 0..n_states {
                for a in 0..n_actions {
                    table[s * n_actions + a] = dot(features.row(s * n_actions + a), &coeffs);
                }
            }
            let norm = occupancy_norm(mdp, pi_star, &table, h)?;
            let target = ball[h - 1] * fraction;
            let scale = if norm > tiny { target / norm } else { 0.0 };
            let stage = f.stage_mut(h);
            for (slot, val) in stage.iter_mut().zip(table.iter()) {
                *slot += scale * val;
            }
        }
        let pi_hat = greedy_policy(&f);

        // Operator-stability ratios for stages 1..H-2.
        for h in 1..horizon.saturating_sub(1) {
            let den = {
                let diff: Vec<f64> = f
                    .stage(h + 1)
                    .iter()
                    .zip(q_star.stage(h + 1).iter())
                    .map(|(a, b)| a - b)
                    .collect();
                occupancy_norm(mdp, pi_star, &diff, h + 1)?
            };
            if den <= tiny {
                skipped_bellman += 1;
                continue;
            }
            let backed_f = apply_optimality_operator(mdp, f.stage(h + 1), h)?;
            let backed_q = apply_optimality_operator(mdp, q_star.stage(h + 1), h)?;
            let diff: Vec<f64> = backed_f
                .iter()
                .zip(backed_q.iter())
                .map(|(a, b)| a - b)
                .collect();
            let num = occupancy_norm(mdp, pi_star, &diff, h)?;
            let ratio = num / den;
            if ratio > bellman_stage[h - 1] {
                bellman_stage[h - 1] = ratio;
            }
            bellman_seen[h - 1] = true;
        }

        // Occupation-stability ratios for pairs h <= h' <= H-1.
        for h in 1..horizon {
            let den = {
                let diff: Vec<f64> = f
                    .stage(h)
                    .iter()
                    .zip(q_star.stage(h).iter())
                    .map(|(a, b)| a - b)
                    .collect();
                occupancy_norm(mdp, pi_star, &diff, h)? / q_norm[h - 1].max(tiny)
            };
            if den <= tiny {
                skipped_occupation += horizon - 1 - (h - 1);
                continue;
            }
            // Signed state measure of the one-step policy deviation, pushed
            // forward under the optimal policy.
            let mut measure = vec![0.0f64; n_states];
            // Stage h': start with the pair measure delta at stage h itself.
            for h_prime in h..horizon {
                let coeff_vec = if h_prime == h {
                    // Identity operator: functional over stage-h pairs.
                    for c in coeffs.iter_mut() {
                        *c = 0.0;
                    }
                    for s in 0..n_states {
                        let weight = state_weight[h - 1][s];
                        if weight == 0.0 {
                            continue;
                        }
                        let a_star = pi_star.action(h, s);
                        let a_hat = pi_hat.action(h, s);
                        if a_star == a_hat {
                            continue;
                        }
                        let phi_star = features.row(s * n_actions + a_star);
                        let phi_hat = features.row(s * n_actions + a_hat);
                        for j in 0..d {
                            coeffs[j] += weight * (phi_star[j] - phi_hat[j]);
                        }
                    }
                    // Seed the forward measure for later stages.
                    for m in measure.iter_mut() {
                        *m = 0.0;
                    }
                    if h + 1 < horizon {
                        for s in 0..n_states {
                            let weight = state_weight[h - 1][s];
                            if weight == 0.0 {
                                continue;
                            }
                            let a_star = pi_star.action(h, s);
                            let a_hat = pi_hat.action(h, s);
                            if a_star == a_hat {
                                continue;
                            }
                            let row_star = mdp.transition_row(h, s, a_star);
                            let row_hat = mdp.transition_row(h, s, a_hat);
                            for sp in 0..n_states {
                                measure[sp] += weight * (row_star[sp] - row_hat[sp]);
                            }
                        }
                    }
                    coeffs.clone()
                } else {
                    // measure currently holds the signed state distribution
                    // at stage h_prime; contract against the optimal-action
                    // features, then push forward one more step.
                    for c in coeffs.iter_mut() {
                        *c = 0.0;
                    }
                    for s in 0..n_states {
                        let m = measure[s];
                        if m == 0.0 {
                            continue;
                        }
                        let phi = features.row(s * n_actions + pi_star.action(h_prime, s));
                        for j in 0..d {
                            coeffs[j] += m * phi[j];
                        }
                    }
                    if h_prime + 1 < horizon {
                        let mut next = vec![0.0f64; n_states];
                        for s in 0..n_states {
                            let m = measure[s];
                            if m == 0.0 {
                                continue;
                            }
                            let row = mdp.transition_row(h_prime, s, pi_star.action(h_prime, s));
                            for sp in 0..n_states {
                                next[sp] += m * row[sp];
                            }
                        }
                        measure = next;
                    }
                    coeffs.clone()
                };
                // Exact dual norm over the linear span: sqrt(cᵀ G⁻¹ c).
                let solved = grams[h_prime - 1].solve(&coeff_vec)?;
                let num = fmath::sqrt(dot(&coeff_vec, &solved).max(0.0));
                let ratio = num / den;
                if ratio > occupation.at(h - 1, h_prime - 1) {
                    *occupation.at_mut(h - 1, h_prime - 1) = ratio;
                }
                occupation_seen[(h - 1) * (horizon - 1) + (h_prime - 1)] = true;
            }
        }
    }

    let any_bellman = horizon <= 2 || bellman_seen.iter().any(|&b| b);
    let any_occupation = occupation_seen.iter().any(|&b| b);
    if !any_bellman || !any_occupation {
        return Err(Error::estimation(
            "stability sampling: every trial had vanishing perturbations; nothing estimated",
        ));
    }
    Ok(StabilityEstimates {
        bellman_stage,
        occupation,
        trials,
        skipped_bellman,
        skipped_occupation,
    })
}

/// Planar two-weight instance for the disk-geometry curvature checks.
#[derive(Debug, Clone)]
pub struct DiskInstance {
    pub w: [f64; 2],
    pub w_star: [f64; 2],
    /// Action-disk radius, at most 1/2.
    pub rho: f64,
    /// Feature second-moment matrix; `None` selects I/2.
    pub sigma: Option<Mat>,
}

/// One inequality: measured left side, allowed right side.
#[derive(Debug, Clone, Copy)]
pub struct CurvatureCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn check(lhs: f64, rhs: f64) -> CurvatureCheck {
    CurvatureCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12 * (1.0 + rhs.abs()),
    }
}

/// Report of the five disk-geometry inequalities.
#[derive(Debug, Clone)]
pub struct DiskCurvatureReport {
    pub angle: f64,
    /// ‖φ − φ*‖₂ ≤ ρ·∠(w, w*).
    pub feature_gap: CurvatureCheck,
    /// ⟨w, φ − φ*⟩ ≤ ½ ρ ‖w‖ ∠².
    pub aligned_gap: CurvatureCheck,
    /// ∠(w, w*) ≤ arcsin(‖w − w*‖ / ‖w*‖).
    pub angle_bound: CurvatureCheck,
    /// ‖φ − φ*‖_{Σ⁻¹} ≤ β √d · ‖w − w*‖_Σ / ‖w*‖_Σ.
    pub curv_one: CurvatureCheck,
    /// ⟨w, φ − φ*⟩ ≤ β √d ‖w*‖_Σ (‖w − w*‖_Σ / ‖w*‖_Σ)².
    pub curv_two: CurvatureCheck,
}

impl DiskCurvatureReport {
    pub fn all_hold(&self) -> bool {
        self.feature_gap.holds
            && self.aligned_gap.holds
            && self.angle_bound.holds
            && self.curv_one.holds
            && self.curv_two.holds
    }
}

fn sigma_norm(sigma: &Mat, v: [f64; 2]) -> f64 {
    let q = sigma.at(0, 0) * v[0] * v[0]
        + 2.0 * sigma.at(0, 1) * v[0] * v[1]
        + sigma.at(1, 1) * v[1] * v[1];
    fmath::sqrt(q.max(0.0))
}

fn sigma_inv_norm(sigma: &Mat, v: [f64; 2]) -> Result<f64> {
    let det = sigma.at(0, 0) * sigma.at(1, 1) - sigma.at(0, 1) * sigma.at(1, 0);
    if det.abs() < 1e-15 {
        return Err(Error::singular("disk check: singular covariance"));
    }
    let x = (sigma.at(1, 1) * v[0] - sigma.at(0, 1) * v[1]) / det;
    let y = (-sigma.at(1, 0) * v[0] + sigma.at(0, 0) * v[1]) / det;
    Ok(fmath::sqrt((v[0] * x + v[1] * y).max(0.0)))
}

/// Verify the disk-geometry inequalities on one instance. The greedy action
/// feature under weights u is ρ·u/‖u‖ (the state offset cancels in every
/// difference). The curvature parameter is β = 16√2·ρ with d = 2.
pub fn disk_curvature_check(inst: &DiskInstance) -> Result<DiskCurvatureReport> {
    let norm = |v: [f64; 2]| fmath::hypot(v[0], v[1]);
    let w_norm = norm(inst.w);
    let star_norm = norm(inst.w_star);
    if !(inst.rho > 0.0 && inst.rho <= 0.5) {
        return Err(Error::domain("disk check: radius must lie in (0, 1/2]"));
    }
    if star_norm <= 0.0 || w_norm <= 0.0 {
        return Err(Error::domain("disk check: weight vectors must be nonzero"));
    }
    let delta = [inst.w[0] - inst.w_star[0], inst.w[1] - inst.w_star[1]];
    let delta_norm = norm(delta);
    if delta_norm > star_norm * (1.0 + 1e-12) {
        return Err(Error::precondition(
            "disk check: ‖w − w*‖ must not exceed ‖w*‖ (bounded-angle regime)",
        ));
    }
    let sigma = match &inst.sigma {
        Some(m) => {
            if m.n_rows() != 2 || m.n_cols() != 2 {
                return Err(Error::dim("disk check: covariance must be 2x2"));
            }
            if m.asymmetry() > 1e-12 {
                return Err(Error::data("disk check: covariance must be symmetric"));
            }
            let eig = sym_eigen(m)?;
            // The curvature constant is certified under (1/2d) I ⪯ Σ ⪯ (2/d) I.
            if eig.values[0] < 0.25 - 1e-12 || eig.values[1] > 1.0 + 1e-12 {
                return Err(Error::precondition(
                    "disk check: covariance eigenvalues must lie in [1/4, 1]",
                ));
            }
            m.clone()
        }
        None => {
            let mut m = Mat::zeros(2, 2);
            *m.at_mut(0, 0) = 0.5;
            *m.at_mut(1, 1) = 0.5;
            m
        }
    };

    let cross = inst.w[0] * inst.w_star[1] - inst.w[1] * inst.w_star[0];
    let dot_ws = inst.w[0] * inst.w_star[0] + inst.w[1] * inst.w_star[1];
    let angle = fmath::atan2(cross.abs(), dot_ws);

    let phi = [
        inst.rho * inst.w[0] / w_norm,
        inst.rho * inst.w[1] / w_norm,
    ];
    let phi_star = [
        inst.rho * inst.w_star[0] / star_norm,
        inst.rho * inst.w_star[1] / star_norm,
    ];
    let dphi = [phi[0] - phi_star[0], phi[1] - phi_star[1]];

    let feature_gap = check(norm(dphi), inst.rho * angle);
    let aligned = inst.w[0] * dphi[0] + inst.w[1] * dphi[1];
    let aligned_gap = check(aligned.abs(), 0.5 * inst.rho * w_norm * angle * angle);
    let ratio = (delta_norm / star_norm).min(1.0);
    let angle_bound = check(angle, fmath::asin(ratio));

    let beta = 16.0 * fmath::sqrt(2.0) * inst.rho;
    let sqrt_d = fmath::sqrt(2.0);
    let err_ratio = sigma_norm(&sigma, delta) / sigma_norm(&sigma, inst.w_star);
    let curv_one = check(sigma_inv_norm(&sigma, dphi)?, beta * sqrt_d * err_ratio);
    let curv_two = check(
        aligned,
        beta * sqrt_d * sigma_norm(&sigma, inst.w_star) * err_ratio * err_ratio,
    );

    Ok(DiskCurvatureReport {
        angle,
        feature_gap,
        aligned_gap,
        angle_bound,
        curv_one,
        curv_two,
    })
}

/// Draw one instance from the admissible regime: radius in (0, 1/2],
/// reference weight of arbitrary direction and scale in [0.1, 10], and a
/// perturbation strictly inside the bounded-angle ball.
pub fn random_disk_instance(rng: &mut StreamRng) -> DiskInstance {
    let rho = rng.uniform_in(0.01, 0.5);
    let theta = rng.uniform_in(0.0, core::f64::consts::TAU);
    let scale = rng.uniform_in(0.1, 10.0);
    let w_star = [scale * fmath::cos(theta), scale * fmath::sin(theta)];
    loop {
        let dir = rng.uniform_in(0.0, core::f64::consts::TAU);
        let radius = scale * 0.999 * rng.uniform01();
        let w = [
            w_star[0] + radius * fmath::cos(dir),
            w_star[1] + radius * fmath::sin(dir),
        ];
        if fmath::hypot(w[0], w[1]) > 1e-9 {
            return DiskInstance {
                w,
                w_star,
                rho,
                sigma: None,
            };
        }
    }
}
