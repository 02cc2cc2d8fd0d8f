//! Monte-Carlo policy evaluation on a grid of start positions, value gaps
//! against a reference, and log-log rate fitting with confidence intervals.
//!
//! Every (start, trajectory) cell draws from its own RNG stream and the
//! reduction runs in flat cell order, so any execution schedule that
//! preserves the returned ordering reproduces results bitwise.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::features::ProductFeatureSpec;
use crate::fmath;
use crate::mountain_car::{rollout, sample_offline_dataset, McParams, McState};
use crate::ridge::{fqi_discounted, FqiConfig, ProductBasisDesign};
use crate::rng::{stream, Domain, StreamRng};
use crate::stats::{mean_and_stderr, ols_line};

/// Evaluation protocol: start positions, trajectories per start, rollout
/// length, discount, and the master seed feeding the per-cell streams.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub grid: Vec<f64>,
    pub trajectories_per_start: usize,
    pub steps: usize,
    pub gamma: f64,
    pub master_seed: u64,
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::domain("evaluation: empty start-position grid"));
        }
        if self.grid.iter().any(|p| !p.is_finite()) {
            return Err(Error::domain("evaluation: non-finite start position"));
        }
        if self.trajectories_per_start == 0 {
            return Err(Error::domain("evaluation: need >= 1 trajectory per start"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::domain("evaluation: discount must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Total number of (start, trajectory) cells.
    pub fn cells(&self) -> usize {
        self.grid.len() * self.trajectories_per_start
    }
}

/// Start-position grid centered at -0.5 with overall width 0.2:
/// p0 = -0.5 + 0.2·j/count for j = -count/2 .. count/2 - 1. With
/// count = 1000 this is the canonical thousand-point evaluation grid.
pub fn centered_grid(count: usize) -> Vec<f64> {
    let half = (count / 2) as i64;
    (0..count as i64)
        .map(|j| -0.5 + 0.2 * (j - half) as f64 / count as f64)
        .collect()
}

/// Mean discounted return with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trajectories: usize,
}

/// Discounted returns for the flat cell range `lo..hi`, where cell
/// `g * trajectories_per_start + t` is trajectory `t` from grid point `g`.
/// Cell k draws from stream unit k of the evaluation domain, so disjoint
/// ranges can run on different workers and concatenate deterministically.
pub fn mc_returns<F>(
    params: &McParams,
    policy: &F,
    cfg: &EvalConfig,
    lo: usize,
    hi: usize,
) -> Result<Vec<f64>>
where
    F: Fn(McState) -> f64,
{
    cfg.validate()?;
    params.validate()?;
    if lo > hi || hi > cfg.cells() {
        return Err(Error::domain("evaluation: cell range out of bounds"));
    }
    let mut out = Vec::with_capacity(hi - lo);
    for cell in lo..hi {
        let g = cell / cfg.trajectories_per_start;
        let mut rng = stream(cfg.master_seed, Domain::Eval, cell as u64);
        let value = rollout(
            params,
            |s| policy(s),
            cfg.grid[g],
            cfg.steps,
            cfg.gamma,
            &mut rng,
        )?;
        out.push(value);
    }
    Ok(out)
}

/// Full-protocol Monte-Carlo value estimate: all grid×trajectory returns
/// pooled into one sample (single mean, single standard error).
pub fn mc_policy_value<F>(params: &McParams, policy: &F, cfg: &EvalConfig) -> Result<ValueEstimate>
where
    F: Fn(McState) -> f64,
{
    let returns = mc_returns(params, policy, cfg, 0, cfg.cells())?;
    let (mean, stderr) = mean_and_stderr(&returns)?;
    Ok(ValueEstimate {
        mean,
        stderr,
        trajectories: returns.len(),
    })
}

/// Stratified variant: one estimate per start position (same streams as the
/// pooled protocol). Non-default; the pooled estimate is the reported one.
pub fn mc_policy_value_per_start<F>(
    params: &McParams,
    policy: &F,
    cfg: &EvalConfig,
) -> Result<Vec<ValueEstimate>>
where
    F: Fn(McState) -> f64,
{
    let returns = mc_returns(params, policy, cfg, 0, cfg.cells())?;
    let t = cfg.trajectories_per_start;
    returns
        .chunks(t)
        .map(|chunk| {
            let (mean, stderr) = mean_and_stderr(chunk)?;
            Ok(ValueEstimate {
                mean,
                stderr,
                trajectories: chunk.len(),
            })
        })
        .collect()
}

/// Difference of means: reference minus candidate.
pub fn value_gap(reference: &ValueEstimate, candidate: &ValueEstimate) -> f64 {
    reference.mean - candidate.mean
}

/// Fitted log-log decay rate.
#[derive(Debug, Clone, Copy)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub points_used: usize,
    /// Points discarded because their gap was not a positive real.
    pub dropped_nonpositive: usize,
    pub residual_se: f64,
}

/// Ordinary least squares of log(gap) on log(n) over the last `k_last`
/// usable points, with a 95% t-interval on the slope. Points with
/// nonpositive (or non-finite) gaps are excluded and counted; fewer than
/// three usable points is an error.
pub fn fit_loglog_rate(points: &[(f64, f64)], k_last: usize) -> Result<RateFit> {
    if k_last > points.len() {
        return Err(Error::domain(
            "rate fit: k_last exceeds the number of points",
        ));
    }
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, gap)| n.is_finite() && *n > 0.0 && gap.is_finite() && *gap > 0.0)
        .cloned()
        .collect();
    let dropped = points.len() - usable.len();
    let take = k_last.min(usable.len());
    let window = &usable[usable.len() - take..];
    if window.len() < 3 {
        return Err(Error::data(
            "rate fit: fewer than 3 usable points after dropping nonpositive gaps",
        ));
    }
    let xs: Vec<f64> = window.iter().map(|(n, _)| fmath::ln(*n)).collect();
    let ys: Vec<f64> = window.iter().map(|(_, g)| fmath::ln(*g)).collect();
    let fit = ols_line(&xs, &ys)?;
    let (lo, hi) = fit.slope_interval(0.95)?;
    let mut ssr = 0.0;
    for (&x, &y) in xs.iter().zip(ys.iter()) {
        let r = y - fit.intercept - fit.slope * x;
        ssr += r * r;
    }
    let residual_se = fmath::sqrt(ssr / fit.df as f64);
    Ok(RateFit {
        slope: fit.slope,
        intercept: fit.intercept,
        ci_lo: lo,
        ci_hi: hi,
        points_used: window.len(),
        dropped_nonpositive: dropped,
        residual_se,
    })
}

/// Bootstrap alternative for the slope interval: each point carries its
/// per-trial gap replicates; every resample redraws trials within each
/// point (with replacement), averages, refits, and the interval is the
/// percentile band of the resampled slopes. Resamples whose averaged gaps
/// leave fewer than three positive points are skipped; more than half
/// skipped is an estimation failure.
pub fn fit_loglog_rate_bootstrap(
    points: &[(f64, Vec<f64>)],
    k_last: usize,
    resamples: usize,
    seed: u64,
) -> Result<RateFit> {
    if resamples < 10 {
        return Err(Error::domain("bootstrap: need at least 10 resamples"));
    }
    if points.iter().any(|(_, reps)| reps.is_empty()) {
        return Err(Error::data("bootstrap: a point has no trial replicates"));
    }
    let means: Vec<(f64, f64)> = points
        .iter()
        .map(|(n, reps)| (*n, reps.iter().sum::<f64>() / reps.len() as f64))
        .collect();
    let center = fit_loglog_rate(&means, k_last)?;

    let mut rng = stream(seed, Domain::Bootstrap, 0);
    let mut slopes = Vec::with_capacity(resamples);
    let mut skipped = 0usize;
    for _ in 0..resamples {
        let resampled: Vec<(f64, f64)> = points
            .iter()
            .map(|(n, reps)| {
                let mut acc = 0.0;
                for _ in 0..reps.len() {
                    acc += reps[rng.uniform_usize(reps.len())];
                }
                (*n, acc / reps.len() as f64)
            })
            .collect();
        match fit_loglog_rate(&resampled, k_last) {
            Ok(fit) => slopes.push(fit.slope),
            Err(_) => skipped += 1,
        }
    }
    if skipped * 2 >= resamples {
        return Err(Error::estimation(
            "bootstrap: more than half the resamples had too few positive gaps",
        ));
    }
    slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantile = |q: f64| -> f64 {
        let pos = q * (slopes.len() - 1) as f64;
        let i = pos as usize;
        let frac = pos - i as f64;
        if i + 1 < slopes.len() {
            slopes[i] * (1.0 - frac) + slopes[i + 1] * frac
        } else {
            slopes[i]
        }
    };
    Ok(RateFit {
        ci_lo: quantile(0.025),
        ci_hi: quantile(0.975),
        ..center
    })
}

/// Fit a reference policy with one large-sample run and evaluate it at
/// reference fidelity. Returns the weight vector and its value estimate;
/// the dataset comes from the reference domain of `master_seed`, so the
/// whole construction is reproducible from (params, spec, sizes, seed).
pub fn build_reference_policy(
    params: &McParams,
    spec: &ProductFeatureSpec,
    big_n: usize,
    fqi_cfg: &FqiConfig,
    eval_cfg: &EvalConfig,
    master_seed: u64,
) -> Result<(Vec<f64>, ValueEstimate)> {
    let mut rng: StreamRng = stream(master_seed, Domain::Reference, 0);
    let data = sample_offline_dataset(params, big_n, &mut rng)?;
    let design = ProductBasisDesign::new(spec.clone(), &data)?;
    let run = fqi_discounted(&design, params.gamma, fqi_cfg)?;
    let weights = run.weights;
    let spec_owned = spec.clone();
    let w_for_policy = weights.clone();
    let policy = move |s: McState| -> f64 {
        match spec_owned.max_force(&w_for_policy, s.p, s.v) {
            Ok((f, _)) => f,
            Err(_) => 0.0,
        }
    };
    let estimate = mc_policy_value(params, &policy, eval_cfg)?;
    Ok((weights, estimate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn quiet_params() -> McParams {
        McParams {
            sigma_v: 0.0,
            sigma_p: 0.0,
            goal_bonus: 0.0,
            ..McParams::default()
        }
    }

    #[test]
    fn grid_matches_the_canonical_form() {
        let g = centered_grid(1000);
        assert_eq!(g.len(), 1000);
        assert!((g[0] - (-0.6)).abs() < 1e-15);
        assert!((g[500] - (-0.5)).abs() < 1e-15);
        assert!((g[999] - (-0.5 + 0.2 * 499.0 / 1000.0)).abs() < 1e-15);
        let small = centered_grid(4);
        assert_eq!(small.len(), 4);
        assert!((small[2] - (-0.5)).abs() < 1e-15);
    }

    #[test]
    fn constant_reward_env_gives_exact_geometric_value_and_zero_stderr() {
        // Deterministic dynamics, no goal bonus, constant full throttle:
        // every trajectory returns -0.1 * (1 - gamma^T) / (1 - gamma).
        let params = quiet_params();
        let cfg = EvalConfig {
            grid: centered_grid(6),
            trajectories_per_start: 3,
            steps: 50,
            gamma: 0.9,
            master_seed: 7,
        };
        let est = mc_policy_value(&params, &|_s| 1.0, &cfg).unwrap();
        let expect = -0.1 * (1.0 - libm::pow(0.9, 50.0)) / (1.0 - 0.9);
        assert!((est.mean - expect).abs() < 1e-10);
        // Identical per-trajectory returns: only summation roundoff remains.
        assert!(est.stderr.abs() < 1e-12 * expect.abs());
        assert_eq!(est.trajectories, 18);
    }

    #[test]
    fn doubling_trajectories_roughly_halves_the_squared_stderr() {
        let params = McParams::default();
        let policy = |s: McState| if s.v >= 0.0 { 1.0 } else { -1.0 };
        let mut ratios = Vec::new();
        for seed in 0..5u64 {
            let base = EvalConfig {
                grid: centered_grid(12),
                trajectories_per_start: 20,
                steps: 120,
                gamma: 0.97,
                master_seed: 1000 + seed,
            };
            let double = EvalConfig {
                trajectories_per_start: 40,
                ..base.clone()
            };
            let a = mc_policy_value(&params, &policy, &base).unwrap();
            let b = mc_policy_value(&params, &policy, &double).unwrap();
            ratios.push((b.stderr * b.stderr) / (a.stderr * a.stderr));
        }
        let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!(
            (mean_ratio - 0.5).abs() < 0.15,
            "stderr^2 ratio {mean_ratio} is not near 1/2"
        );
    }

    #[test]
    fn force_blind_env_values_all_policies_equally() {
        // With zero force gain and zero force cost the action affects
        // neither dynamics nor reward, so under shared streams two policies
        // produce identical returns.
        let params = McParams {
            force_gain: 0.0,
            force_cost: 0.0,
            ..McParams::default()
        };
        let cfg = EvalConfig {
            grid: centered_grid(8),
            trajectories_per_start: 4,
            steps: 80,
            gamma: 0.97,
            master_seed: 99,
        };
        let a = mc_policy_value(&params, &|_s| 1.0, &cfg).unwrap();
        let b = mc_policy_value(&params, &|_s| -1.0, &cfg).unwrap();
        let joint = fmath::sqrt(a.stderr * a.stderr + b.stderr * b.stderr);
        assert!((a.mean - b.mean).abs() <= 4.0 * joint);
        assert_eq!(a.mean, b.mean);
    }

    #[test]
    fn evaluation_is_deterministic_and_chunkable() {
        let params = McParams::default();
        let policy = |s: McState| if s.p > -0.5 { 1.0 } else { -1.0 };
        let cfg = EvalConfig {
            grid: centered_grid(5),
            trajectories_per_start: 4,
            steps: 60,
            gamma: 0.95,
            master_seed: 31,
        };
        let full = mc_returns(&params, &policy, &cfg, 0, cfg.cells()).unwrap();
        let mut pieces = mc_returns(&params, &policy, &cfg, 0, 7).unwrap();
        pieces.extend(mc_returns(&params, &policy, &cfg, 7, cfg.cells()).unwrap());
        assert_eq!(full, pieces);
        let e1 = mc_policy_value(&params, &policy, &cfg).unwrap();
        let e2 = mc_policy_value(&params, &policy, &cfg).unwrap();
        assert_eq!(e1, e2);
    }

    #[test]
    fn per_start_variant_agrees_with_the_pooled_sample() {
        let params = McParams::default();
        let policy = |_s: McState| 0.0;
        let cfg = EvalConfig {
            grid: centered_grid(4),
            trajectories_per_start: 6,
            steps: 40,
            gamma: 0.9,
            master_seed: 55,
        };
        let pooled = mc_policy_value(&params, &policy, &cfg).unwrap();
        let strata = mc_policy_value_per_start(&params, &policy, &cfg).unwrap();
        assert_eq!(strata.len(), 4);
        let recombined =
            strata.iter().map(|e| e.mean).sum::<f64>() / strata.len() as f64;
        assert!((recombined - pooled.mean).abs() < 1e-12);
    }

    #[test]
    fn value_gap_is_a_plain_difference() {
        let a = ValueEstimate {
            mean: 2.0,
            stderr: 0.1,
            trajectories: 10,
        };
        let b = ValueEstimate {
            mean: 1.5,
            stderr: 0.2,
            trajectories: 10,
        };
        assert_eq!(value_gap(&a, &b), 0.5);
        assert_eq!(value_gap(&a, &a), 0.0);
    }

    #[test]
    fn rate_fit_is_exact_on_noiseless_power_laws() {
        for &exponent in &[-2.0, -1.5, -1.0, -0.5, -0.1, 0.0] {
            let points: Vec<(f64, f64)> = (1..=11)
                .map(|k| {
                    let n = libm::exp(8.0 + 0.5 * k as f64);
                    (n, 3.7 * libm::pow(n, exponent))
                })
                .collect();
            let fit = fit_loglog_rate(&points, 11).unwrap();
            assert!(
                (fit.slope - exponent).abs() < 1e-9,
                "slope {} for exponent {exponent}",
                fit.slope
            );
            assert!(fit.ci_hi - fit.ci_lo < 1e-6);
            assert_eq!(fit.points_used, 11);
            assert_eq!(fit.dropped_nonpositive, 0);
        }
    }

    #[test]
    fn rate_fit_uses_only_the_last_window() {
        // First points follow a different law; the window must ignore them.
        let mut points: Vec<(f64, f64)> = (1..=4).map(|k| (k as f64, 100.0)).collect();
        points.extend((5..=12).map(|k| {
            let n = libm::exp(k as f64);
            (n, 2.0 / n)
        }));
        let fit = fit_loglog_rate(&points, 8).unwrap();
        assert!((fit.slope - (-1.0)).abs() < 1e-9);
    }

    #[test]
    fn rate_fit_drops_nonpositive_gaps_and_errors_when_starved() {
        let points = vec![
            (10.0, 1.0),
            (20.0, -0.5),
            (40.0, 0.25),
            (80.0, 0.125),
            (160.0, f64::NAN),
        ];
        let fit = fit_loglog_rate(&points, 5).unwrap();
        assert_eq!(fit.dropped_nonpositive, 2);
        assert_eq!(fit.points_used, 3);
        let starved = vec![(10.0, 1.0), (20.0, -1.0), (40.0, -1.0)];
        assert!(fit_loglog_rate(&starved, 3).is_err());
        assert!(fit_loglog_rate(&points, 6).is_err());
    }

    #[test]
    fn rate_fit_interval_is_calibrated_on_synthetic_noise() {
        // gap = C n^{-1} exp(eta), eta ~ N(0, 0.05^2): the 95% interval must
        // cover -1 in at least 90% of replications.
        let sizes: Vec<f64> = (0..11).map(|k| libm::exp(9.0 + 0.25 * k as f64)).collect();
        let mut covered = 0;
        let reps = 200;
        for rep in 0..reps {
            let mut rng = stream(4242, Domain::Synthetic, rep as u64);
            let points: Vec<(f64, f64)> = sizes
                .iter()
                .map(|&n| (n, 5.0 / n * libm::exp(0.05 * rng.normal())))
                .collect();
            let fit = fit_loglog_rate(&points, 11).unwrap();
            if fit.ci_lo <= -1.0 && -1.0 <= fit.ci_hi {
                covered += 1;
            }
        }
        assert!(
            covered * 100 >= 90 * reps,
            "interval covered -1 in only {covered}/{reps} replications"
        );
    }

    #[test]
    fn bootstrap_interval_brackets_the_center_fit() {
        let sizes: Vec<f64> = (0..8).map(|k| libm::exp(9.0 + 0.5 * k as f64)).collect();
        let mut rng = stream(777, Domain::Synthetic, 0);
        let points: Vec<(f64, Vec<f64>)> = sizes
            .iter()
            .map(|&n| {
                let reps: Vec<f64> = (0..12)
                    .map(|_| 5.0 / n * libm::exp(0.1 * rng.normal()))
                    .collect();
                (n, reps)
            })
            .collect();
        let fit = fit_loglog_rate_bootstrap(&points, 8, 200, 123).unwrap();
        assert!(fit.ci_lo <= fit.slope && fit.slope <= fit.ci_hi);
        assert!(fit.ci_lo < fit.ci_hi);
        // Bootstrap of a tight synthetic law stays near -1.
        assert!((fit.slope + 1.0).abs() < 0.3);
    }

    #[test]
    fn reference_build_is_seed_deterministic() {
        let params = McParams::default();
        let spec = params.feature_spec(4, 3, 3).unwrap();
        let fqi_cfg = FqiConfig {
            max_iterations: 40,
            ..FqiConfig::default()
        };
        let eval_cfg = EvalConfig {
            grid: centered_grid(5),
            trajectories_per_start: 2,
            steps: 50,
            gamma: params.gamma,
            master_seed: 11,
        };
        let (w1, e1) =
            build_reference_policy(&params, &spec, 300, &fqi_cfg, &eval_cfg, 2024).unwrap();
        let (w2, e2) =
            build_reference_policy(&params, &spec, 300, &fqi_cfg, &eval_cfg, 2024).unwrap();
        assert_eq!(w1, w2);
        assert_eq!(e1, e2);
        let (w3, _) =
            build_reference_policy(&params, &spec, 300, &fqi_cfg, &eval_cfg, 2025).unwrap();
        assert_ne!(w1, w3);
    }
}
