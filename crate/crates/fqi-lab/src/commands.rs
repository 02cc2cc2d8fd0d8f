//! The seven CLI commands. Each one resolves its config sections, does its
//! work through `fqi-core`, writes artifacts through a [`RunWriter`], and
//! prints a short summary.
//!
//! Stream layout (all under the run's master seed): dataset draws use the
//! `Dataset` domain with the flat unit index `size_index * trials + trial`
//! (`generate-data` uses unit 0); the reference fit draws from the
//! `Reference` domain; evaluation streams are seeded per unit by
//! [`mix_seed`] so that no two work units share Monte-Carlo noise; tabular
//! instance generators use the `Synthetic` domain with the instance index;
//! diagnostics sampling uses the `Diagnostics` domain.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use fqi_core::dataset::RegressionDesign;
use fqi_core::diagnostics::{
    conditional_std_estimate, covariate_shift_norm, empirical_covariance, fast_rate_bound,
    population_covariance, prop_lin_bound, stability_coefficients_sampled, BoundInputs,
};
use fqi_core::eval::{fit_loglog_rate, fit_loglog_rate_bootstrap, mc_policy_value, RateFit};
use fqi_core::linalg::{norm2, Mat};
use fqi_core::mdp::{
    apply_optimality_operator, exact_optimal_q, greedy_policy, multistep_transition,
    occupancy_norm, policy_value, random_mdp, random_policy, random_stageq, telescope_rhs,
    uniform_policy_value,
};
use fqi_core::mountain_car::{sample_offline_dataset, McState};
use fqi_core::online::{run_two_phase, two_action_study_env, TwoPhaseConfig};
use fqi_core::ridge::{fqi_discounted, ProductBasisDesign};
use fqi_core::rng::{stream, Domain};

use crate::config::ExperimentConfig;
use crate::runio::{
    parse_csv, parse_f64, parse_usize, weights_to_bin, weights_to_csv, Csv, RunWriter,
};
use crate::{Failure, Result};

/// Resolved invocation: merged config plus the CLI-level knobs.
pub struct Ctx {
    pub cfg: ExperimentConfig,
    /// Raw config file text, recorded in the manifest.
    pub config_text: String,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: usize,
    pub dry_run: bool,
}

impl Ctx {
    /// `begun` should be captured on command entry so the manifest's total
    /// timing spans the whole run.
    fn writer(&self, command: &str, begun: Instant) -> Result<RunWriter> {
        RunWriter::create(
            &self.out,
            command,
            self.seed,
            self.threads,
            &self.config_text,
            begun,
        )
    }
}

/// Derive a decorrelated seed for a tagged sub-task of a run (SplitMix64
/// finalizer). Tag 0 is reserved for the run itself; work units use
/// `unit + 1`.
pub fn mix_seed(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Run `f` on a dedicated pool of `threads` workers, or on the library
/// default pool when `threads` is 0. Results are merged in unit order, so
/// the output is identical for every thread count.
fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        Ok(f())
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Failure::Run(format!("cannot build thread pool: {e}")))?;
        Ok(pool.install(f))
    }
}

fn ms(since: Instant) -> u64 {
    since.elapsed().as_millis() as u64
}

// ---------------------------------------------------------------------------
// generate-data
// ---------------------------------------------------------------------------

pub fn cmd_generate_data(ctx: &Ctx) -> Result<()> {
    let begun = Instant::now();
    let params = ctx.cfg.env.params()?;
    let n = ctx.cfg.dataset.n()?;
    let t0 = Instant::now();
    let mut rng = stream(ctx.seed, Domain::Dataset, 0);
    let data = sample_offline_dataset(&params, n, &mut rng)?;
    let mut csv = Csv::new("p,v,f,r,p_next,v_next");
    for t in &data.rows {
        csv.row(&[
            &t.state.p,
            &t.state.v,
            &t.action,
            &t.reward,
            &t.next_state.p,
            &t.next_state.v,
        ]);
    }
    let mut w = ctx.writer("generate-data", begun)?;
    w.note_timing("sample", ms(t0));
    w.write("mc_dataset.csv", &csv.into_bytes())?;
    w.finish()?;
    println!(
        "generate-data: wrote {n} transitions to {}",
        ctx.out.join("mc_dataset.csv").display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// build-reference
// ---------------------------------------------------------------------------

/// Reference policy value and provenance, written as `reference.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceValue {
    pub mean: f64,
    pub stderr: f64,
    pub trajectories: usize,
    pub big_n: usize,
    pub gamma: f64,
    pub pos_components: usize,
    pub vel_components: usize,
    pub force_degree: usize,
    pub unit_rescale: bool,
    pub weights_file: String,
}

pub fn load_reference(dir: &Path) -> Result<ReferenceValue> {
    let path = dir.join("reference.json");
    let bytes = fs::read(&path).map_err(|_| {
        Failure::Run(format!(
            "no reference value at {}: run the `build-reference` command (cmd_build_reference) \
             against this output directory first",
            path.display()
        ))
    })?;
    serde_json::from_slice(&bytes)
        .map_err(|e| Failure::Run(format!("cannot parse {}: {e}", path.display())))
}

/// Same construction as `fqi_core::eval::build_reference_policy` — dataset
/// from the `Reference` domain, one discounted FQI run, one evaluation —
/// kept inline so the fit history can be persisted alongside the weights.
/// A unit test pins the two paths to identical weights.
pub fn cmd_build_reference(ctx: &Ctx) -> Result<()> {
    let begun = Instant::now();
    let params = ctx.cfg.env.params()?;
    let spec = ctx.cfg.features.spec(&params)?;
    let fqi_cfg = ctx.cfg.fqi.config()?;
    let big_n = ctx.cfg.sweep.reference_n()?;
    let eval_cfg = ctx
        .cfg
        .eval
        .reference_config(params.gamma, ctx.seed)?;

    let t0 = Instant::now();
    let mut rng = stream(ctx.seed, Domain::Reference, 0);
    let data = sample_offline_dataset(&params, big_n, &mut rng)?;
    let design = ProductBasisDesign::new(spec.clone(), &data)?;
    let run = fqi_discounted(&design, params.gamma, &fqi_cfg)?;
    let fit_ms = ms(t0);

    let t1 = Instant::now();
    let weights = run.weights;
    let spec_cl = spec.clone();
    let w_cl = weights.clone();
    let policy = move |s: McState| -> f64 {
        match spec_cl.max_force(&w_cl, s.p, s.v) {
            Ok((f, _)) => f,
            Err(_) => 0.0,
        }
    };
    let estimate = mc_policy_value(&params, &policy, &eval_cfg)?;
    let eval_ms = ms(t1);

    let reference = ReferenceValue {
        mean: estimate.mean,
        stderr: estimate.stderr,
        trajectories: estimate.trajectories,
        big_n,
        gamma: eval_cfg.gamma,
        pos_components: spec.pos_components,
        vel_components: spec.vel_components,
        force_degree: spec.force_degree,
        unit_rescale: spec.unit_rescale,
        weights_file: "reference_weights.bin".into(),
    };
    let mut history = Csv::new("iter,weight_change");
    for (i, change) in run.history.iter().enumerate() {
        history.row(&[&(i + 1), change]);
    }

    let mut w = ctx.writer("build-reference", begun)?;
    w.note_timing("fit", fit_ms);
    w.note_timing("evaluate", eval_ms);
    w.write(
        "reference.json",
        &serde_json::to_vec_pretty(&reference)
            .map_err(|e| Failure::Run(format!("reference serialization failed: {e}")))?,
    )?;
    w.write("reference_weights.bin", &weights_to_bin(&weights))?;
    w.write("reference_weights.csv", &weights_to_csv(&weights))?;
    w.write("reference_history.csv", &history.into_bytes())?;
    w.finish()?;
    println!(
        "build-reference: n = {big_n}, {} iterations (converged: {}), J_ref = {:.6} (stderr {:.2e})",
        run.iterations, run.converged, estimate.mean, estimate.stderr
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

fn fit_report_csv(fit: &RateFit) -> Vec<u8> {
    let mut csv = Csv::new("slope,ci_lo,ci_hi,points_used");
    csv.row(&[&fit.slope, &fit.ci_lo, &fit.ci_hi, &fit.points_used]);
    csv.into_bytes()
}

/// Rate fit over per-size averaged gaps; switches to the trial-resampling
/// bootstrap when the config asks for it.
fn fit_gap_points(
    ctx: &Ctx,
    per_size: &[(f64, Vec<f64>)],
) -> Result<RateFit> {
    let k_last = ctx.cfg.rate_fit.k_last(per_size.len());
    match ctx.cfg.rate_fit.bootstrap_resamples {
        Some(resamples) => {
            Ok(fit_loglog_rate_bootstrap(per_size, k_last, resamples, ctx.seed)?)
        }
        None => {
            let points: Vec<(f64, f64)> = per_size
                .iter()
                .map(|(n, gaps)| (*n, gaps.iter().sum::<f64>() / gaps.len() as f64))
                .collect();
            Ok(fit_loglog_rate(&points, k_last)?)
        }
    }
}

pub fn cmd_sweep(ctx: &Ctx) -> Result<()> {
    let begun = Instant::now();
    let params = ctx.cfg.env.params()?;
    let spec = ctx.cfg.features.spec(&params)?;
    let fqi_cfg = ctx.cfg.fqi.config()?;
    let sizes = ctx.cfg.sweep.sizes()?;
    let trials = ctx.cfg.sweep.trials()?;

    if ctx.dry_run {
        println!(
            "sweep plan: {} sizes x {} trials = {} units, feature dim {}",
            sizes.len(),
            trials,
            sizes.len() * trials,
            spec.dim()
        );
        for n in &sizes {
            for t in 0..trials {
                println!("n={n} trial={t}");
            }
        }
        return Ok(());
    }

    let reference = load_reference(&ctx.out)?;
    // The gap J_ref - J_hat only means something when both sides discount
    // alike; a stale reference built at another gamma must be rebuilt.
    let probe_eval = ctx.cfg.eval.config(params.gamma, ctx.seed)?;
    if reference.gamma != probe_eval.gamma {
        return Err(Failure::Run(format!(
            "reference was evaluated at discount {} but this sweep evaluates at {}; \
             rebuild it with `build-reference` or align [eval] gamma",
            reference.gamma, probe_eval.gamma
        )));
    }

    let units: Vec<(usize, usize)> = sizes
        .iter()
        .enumerate()
        .flat_map(|(i, _)| (0..trials).map(move |t| (i, t)))
        .collect();

    let t0 = Instant::now();
    let results: Vec<(usize, usize, f64, f64)> = with_pool(ctx.threads, || {
        units
            .par_iter()
            .map(|&(size_idx, trial)| {
                let n = sizes[size_idx];
                let unit = (size_idx * trials + trial) as u64;
                let mut rng = stream(ctx.seed, Domain::Dataset, unit);
                let data = sample_offline_dataset(&params, n, &mut rng)?;
                let design = ProductBasisDesign::new(spec.clone(), &data)?;
                let run = fqi_discounted(&design, params.gamma, &fqi_cfg)?;
                let spec_cl = spec.clone();
                let weights = run.weights;
                let policy = move |s: McState| -> f64 {
                    match spec_cl.max_force(&weights, s.p, s.v) {
                        Ok((f, _)) => f,
                        Err(_) => 0.0,
                    }
                };
                let eval_cfg = ctx
                    .cfg
                    .eval
                    .config(params.gamma, mix_seed(ctx.seed, unit + 1))?;
                let est = mc_policy_value(&params, &policy, &eval_cfg)?;
                Ok((n, trial, reference.mean - est.mean, est.stderr))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let sweep_ms = ms(t0);

    let mut csv = Csv::new("n,trial,gap,stderr");
    for (n, trial, gap, stderr) in &results {
        csv.row(&[n, trial, gap, stderr]);
    }

    // Per-size replicate lists in size order; aggregation only ever sums a
    // size's own trials in trial order, so unit execution order is moot.
    let per_size: Vec<(f64, Vec<f64>)> = sizes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let gaps = results[i * trials..(i + 1) * trials]
                .iter()
                .map(|r| r.2)
                .collect();
            (*n as f64, gaps)
        })
        .collect();
    // Persist the (expensive) sweep results before attempting the rate fit:
    // a degenerate fit (e.g. nonpositive mean gaps) still leaves the results
    // on disk for a later `rate-fit` with different settings.
    let mut w = ctx.writer("sweep", begun)?;
    w.note_timing("sweep", sweep_ms);
    w.write("sweep_results.csv", &csv.into_bytes())?;
    match fit_gap_points(ctx, &per_size) {
        Ok(fit) => {
            w.write("rate_fit.csv", &fit_report_csv(&fit))?;
            w.finish()?;
            println!(
                "sweep: {} units; fitted slope {:.4}, 95% CI ({:.4}, {:.4}) over {} points",
                results.len(),
                fit.slope,
                fit.ci_lo,
                fit.ci_hi,
                fit.points_used
            );
            Ok(())
        }
        Err(e) => {
            w.finish()?;
            Err(e)
        }
    }
}

// ---------------------------------------------------------------------------
// rate-fit
// ---------------------------------------------------------------------------

pub fn cmd_rate_fit(ctx: &Ctx) -> Result<()> {
    let begun = Instant::now();
    let input = match &ctx.cfg.rate_fit.input {
        Some(p) => PathBuf::from(p),
        None => ctx.out.join("sweep_results.csv"),
    };
    let text = fs::read_to_string(&input).map_err(|_| {
        Failure::Run(format!(
            "no sweep results at {}: run `sweep` first or point [rate_fit] input at a results file",
            input.display()
        ))
    })?;
    let rows = parse_csv(&text, "n,trial,gap,stderr")?;
    if rows.is_empty() {
        return Err(Failure::Run(format!("{}: no data rows", input.display())));
    }
    let mut per_size: Vec<(f64, Vec<f64>)> = Vec::new();
    for row in &rows {
        let n = parse_usize(&row[0], "n")? as f64;
        let gap = parse_f64(&row[2], "gap")?;
        match per_size.iter_mut().find(|(size, _)| *size == n) {
            Some((_, gaps)) => gaps.push(gap),
            None => per_size.push((n, vec![gap])),
        }
    }
    per_size.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let fit = fit_gap_points(ctx, &per_size)?;

    let mut w = ctx.writer("rate-fit", begun)?;
    w.write("rate_fit.csv", &fit_report_csv(&fit))?;
    w.finish()?;
    println!(
        "rate-fit: slope {:.4}, 95% CI ({:.4}, {:.4}) over {} points ({} sizes in {})",
        fit.slope,
        fit.ci_lo,
        fit.ci_hi,
        fit.points_used,
        per_size.len(),
        input.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// diagnose
// ---------------------------------------------------------------------------

/// Dense feature rows wrapped as a regression design, for feeding sampled
/// state-action draws to the empirical covariance.
struct RowsDesign {
    mat: Mat,
}

impl RegressionDesign for RowsDesign {
    fn dim(&self) -> usize {
        self.mat.n_cols()
    }
    fn len(&self) -> usize {
        self.mat.n_rows()
    }
    fn reward(&self, _i: usize) -> f64 {
        0.0
    }
    fn write_row(&self, i: usize, out: &mut [f64]) {
        out.copy_from_slice(self.mat.row(i));
    }
    fn next_best_value(&self, _i: usize, _w: &[f64]) -> f64 {
        0.0
    }
}

pub fn cmd_diagnose(ctx: &Ctx) -> Result<()> {
    let begun = Instant::now();
    let d = ctx.cfg.diagnose.resolve()?;
    let (ns, na, horizon) = (d.states, d.actions, d.horizon);
    let t0 = Instant::now();

    // Instance: random dense MDP plus dense Gaussian features of dimension
    // |S| (full-rank weighted moments almost surely, unlike one-hot).
    let mut env_rng = stream(ctx.seed, Domain::Synthetic, 0);
    let mdp = random_mdp(&mut env_rng, horizon, ns, na);
    let dim = ns;
    let mut feat = Mat::zeros(ns * na, dim);
    for v in feat.as_mut_slice() {
        *v = env_rng.normal();
    }
    let beta = (0..ns * na)
        .map(|r| norm2(feat.row(r)))
        .fold(0.0f64, f64::max);

    let q_star = exact_optimal_q(&mdp);
    let pi_star = greedy_policy(&q_star);
    let j_star = policy_value(&mdp, &pi_star)?;
    let q_norms: Vec<f64> = (1..=horizon)
        .map(|h| occupancy_norm(&mdp, &pi_star, q_star.stage(h), h))
        .collect::<fqi_core::Result<_>>()?;

    // Stability coefficients sampled in the metric neighborhood.
    let radii = vec![d.radius; horizon - 1];
    let betas = vec![beta; horizon - 1];
    let mut stab_rng = stream(ctx.seed, Domain::Diagnostics, 0);
    let stab = stability_coefficients_sampled(
        &mdp, &feat, &pi_star, &radii, &betas, d.trials, &mut stab_rng,
    )?;

    // Audited table: q* plus a scaled random perturbation, terminal stage
    // kept exact so the audited policy's gap is attributable to residuals.
    let mut pert_rng = stream(ctx.seed, Domain::Diagnostics, 1);
    let noise = random_stageq(&mut pert_rng, &mdp);
    let mut f_hat = q_star.clone();
    for h in 1..horizon {
        for (v, z) in f_hat.stage_mut(h).iter_mut().zip(noise.stage(h)) {
            *v += d.perturbation * z;
        }
    }
    let mut eps = vec![0.0; horizon];
    for h in 1..horizon {
        let backed = apply_optimality_operator(&mdp, f_hat.stage(h + 1), h)?;
        let residual: Vec<f64> = backed
            .iter()
            .zip(f_hat.stage(h))
            .map(|(b, f)| b - f)
            .collect();
        eps[h - 1] = occupancy_norm(&mdp, &pi_star, &residual, h)?;
    }
    // Lift residuals to the nearest regular sequence (each entry at least
    // the mean of its tail) so the bound evaluators accept them.
    let mut tail = 0.0;
    for h in (1..horizon).rev() {
        let need = tail / (horizon - h) as f64;
        if eps[h - 1] < need {
            eps[h - 1] = need;
        }
        tail += eps[h - 1];
    }

    let bound_inputs = BoundInputs {
        horizon,
        eps: eps.clone(),
        occupation: stab.occupation.clone(),
        bellman_stage: stab.bellman_stage.clone(),
        q_norms: q_norms[..horizon - 1].to_vec(),
        dim,
        radii: radii.clone(),
        contraction: 1.0,
    };
    let bound = fast_rate_bound(&bound_inputs)?;
    let betas_full = vec![beta; horizon];
    let linear = prop_lin_bound(&eps, &betas_full, &q_norms, dim)?;

    let pi_hat = greedy_policy(&f_hat);
    let true_gap = j_star - policy_value(&mdp, &pi_hat)?;

    // Covariate shift per stage: optimal-occupancy second moments against
    // an empirical covariance from uniform state-action draws.
    let mut shift_rng = stream(ctx.seed, Domain::Diagnostics, 2);
    let mut shifts = vec![0.0; horizon];
    for h in 1..=horizon {
        let pop = population_covariance(&mdp, &pi_star, h, &feat)?;
        let mut rows = Mat::zeros(d.shift_samples, dim);
        for i in 0..d.shift_samples {
            let s = shift_rng.uniform_usize(ns);
            let a = shift_rng.uniform_usize(na);
            rows.row_mut(i).copy_from_slice(feat.row(s * na + a));
        }
        let emp = empirical_covariance(&RowsDesign { mat: rows })?;
        shifts[h - 1] = covariate_shift_norm(&pop, &emp, d.shift_lambda)?;
    }

    // Conditional next-value spread of q* per stage.
    let mut spread_rng = stream(ctx.seed, Domain::Diagnostics, 3);
    let pairs: Vec<(usize, usize)> = (0..ns)
        .flat_map(|s| (0..na).map(move |a| (s, a)))
        .collect();
    let mut spreads = vec![0.0; horizon - 1];
    for h in 1..horizon {
        spreads[h - 1] =
            conditional_std_estimate(&mdp, &q_star, h, &pairs, d.spread_draws, &mut spread_rng)?;
    }

    // Structured report: one row per quantity, stage columns blank where a
    // quantity is stage-free.
    let mut csv = Csv::new("quantity,h,h_prime,value");
    let blank = String::new();
    for (h, v) in q_norms.iter().enumerate() {
        csv.row(&[&"q_norm", &(h + 1), &blank, v]);
    }
    for (h, v) in eps.iter().enumerate() {
        csv.row(&[&"epsilon", &(h + 1), &blank, v]);
    }
    for h in 1..horizon {
        for hp in h..horizon {
            csv.row(&[&"kappa", &h, &hp, &stab.occupation.at(h - 1, hp - 1)]);
        }
    }
    for (i, v) in stab.bellman_stage.iter().enumerate() {
        csv.row(&[&"kappa_star_stage", &(i + 1), &blank, v]);
    }
    for (h, v) in shifts.iter().enumerate() {
        csv.row(&[&"covariate_shift", &(h + 1), &blank, v]);
    }
    for (h, v) in spreads.iter().enumerate() {
        csv.row(&[&"conditional_spread", &(h + 1), &blank, v]);
    }
    csv.row(&[&"j_star", &blank, &blank, &j_star]);
    csv.row(&[&"true_gap", &blank, &blank, &true_gap]);
    csv.row(&[&"fast_rate_bound", &blank, &blank, &bound]);
    csv.row(&[&"linear_bound", &blank, &blank, &linear.bound]);
    let precondition_flag = if linear.precondition_ok { 1 } else { 0 };
    csv.row(&[&"linear_precondition_ok", &blank, &blank, &precondition_flag]);
    csv.row(&[&"stability_skipped_bellman", &blank, &blank, &stab.skipped_bellman]);
    csv.row(&[&"stability_skipped_occupation", &blank, &blank, &stab.skipped_occupation]);

    let mut summary = String::new();
    summary.push_str(&format!(
        "tabular diagnostics: |S|={ns} |A|={na} H={horizon}, feature dim {dim}, seed {}\n",
        ctx.seed
    ));
    summary.push_str(&format!(
        "  J* = {j_star:.6}; audited policy gap = {true_gap:.6}\n"
    ));
    summary.push_str(&format!(
        "  fast-rate bound = {bound:.6} ({} neighborhood samples, radius {})\n",
        d.trials, d.radius
    ));
    summary.push_str(&format!(
        "  linear-class bound = {:.6} (smallness precondition ok: {})\n",
        linear.bound, linear.precondition_ok
    ));
    summary.push_str("  h: |q*|_h  epsilon_h  shift_h  spread_h\n");
    for h in 1..=horizon {
        summary.push_str(&format!(
            "  {h}: {:.4}  {}  {:.4}  {}\n",
            q_norms[h - 1],
            if h < horizon {
                format!("{:.4}", eps[h - 1])
            } else {
                "0 (terminal)".into()
            },
            shifts[h - 1],
            if h < horizon {
                format!("{:.4}", spreads[h - 1])
            } else {
                "-".into()
            },
        ));
    }
    print!("{summary}");

    let mut w = ctx.writer("diagnose", begun)?;
    w.note_timing("diagnose", ms(t0));
    w.write("diagnostics.csv", &csv.into_bytes())?;
    w.write("diagnostics_summary.txt", summary.as_bytes())?;
    w.finish()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// online
// ---------------------------------------------------------------------------

pub fn cmd_online(ctx: &Ctx) -> Result<()> {
    let begun = Instant::now();
    let (burn_in, total, seeds) = ctx.cfg.online.resolve()?;
    let t0 = Instant::now();
    let mut w = ctx.writer("online", begun)?;
    let mut summary = Csv::new("seed,j_star,j_uniform,total_regret");
    let mut mean_regret = 0.0;
    for i in 0..seeds {
        let mut env_rng = stream(ctx.seed, Domain::Synthetic, i as u64);
        let mdp = two_action_study_env(&mut env_rng);
        let cfg = TwoPhaseConfig::new(burn_in, total, mix_seed(ctx.seed, i as u64));
        let trace = run_two_phase(&mdp, &cfg)?;
        let mut csv = Csv::new("t,block,J_hat,regret_cum");
        for row in &trace.rows {
            csv.row(&[&row.t, &row.block, &row.j_hat, &row.regret_cum]);
        }
        w.write(&format!("online_trace_{i}.csv"), &csv.into_bytes())?;
        let total_regret = trace.total_regret();
        summary.row(&[&i, &trace.j_star, &uniform_policy_value(&mdp), &total_regret]);
        mean_regret += total_regret / seeds as f64;
    }
    w.write("online_summary.csv", &summary.into_bytes())?;
    w.note_timing("online", ms(t0));
    w.finish()?;
    println!(
        "online: {seeds} run(s) of T = {total} episodes (burn-in {burn_in}); \
         mean cumulative regret {mean_regret:.4}"
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// tabular-verify
// ---------------------------------------------------------------------------

pub fn cmd_tabular_verify(ctx: &Ctx) -> Result<()> {
    let begun = Instant::now();
    let (instances, max_s, max_a, max_h) = ctx.cfg.tabular.resolve()?;
    let t0 = Instant::now();
    let mut csv = Csv::new("instance,gap,telescope_rhs,slack,contraction_excess");
    let mut telescope_violations = 0usize;
    let mut contraction_violations = 0usize;
    for i in 0..instances {
        let mut rng = stream(ctx.seed, Domain::Synthetic, i as u64);
        let ns = 2 + rng.uniform_usize(max_s - 1);
        let na = 2 + rng.uniform_usize(max_a - 1);
        let hor = 2 + rng.uniform_usize(max_h - 1);
        let mdp = random_mdp(&mut rng, hor, ns, na);

        // Value-gap bound: random table obeying the terminal contract,
        // greedy policy on one side, a random comparator on the other.
        let mut f_hat = random_stageq(&mut rng, &mdp);
        f_hat
            .stage_mut(hor)
            .copy_from_slice(mdp.reward_table(hor));
        let comparator = random_policy(&mut rng, &mdp);
        let pi_hat = greedy_policy(&f_hat);
        let gap = policy_value(&mdp, &comparator)? - policy_value(&mdp, &pi_hat)?;
        let rhs = telescope_rhs(&mdp, &f_hat, &comparator, &pi_hat)?;
        let slack = rhs - gap;
        if slack < -1e-9 {
            telescope_violations += 1;
        }

        // Norm contraction of the multi-step transition along pi*.
        let q_star = exact_optimal_q(&mdp);
        let pi_star = greedy_policy(&q_star);
        let h = 1 + rng.uniform_usize(hor - 1);
        let hp = h + 1 + rng.uniform_usize(hor - h);
        let f: Vec<f64> = (0..ns * na).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let pushed = multistep_transition(&mdp, &pi_star, h, hp, &f)?;
        let excess = occupancy_norm(&mdp, &pi_star, &pushed, h)?
            - occupancy_norm(&mdp, &pi_star, &f, hp)?;
        if excess > 1e-12 {
            contraction_violations += 1;
        }

        csv.row(&[&i, &gap, &rhs, &slack, &excess]);
    }

    let mut w = ctx.writer("tabular-verify", begun)?;
    w.note_timing("verify", ms(t0));
    w.write("tabular_verify.csv", &csv.into_bytes())?;
    w.finish()?;
    println!(
        "tabular-verify: {instances} instances, {telescope_violations} telescope violation(s), \
         {contraction_violations} contraction violation(s)"
    );
    if telescope_violations + contraction_violations > 0 {
        return Err(Failure::Run(format!(
            "tabular verification failed: {telescope_violations} telescope and \
             {contraction_violations} contraction violation(s); see tabular_verify.csv"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runio::read_manifest;

    fn ctx_with(toml_text: &str, dir: &Path, seed: u64) -> Ctx {
        Ctx {
            cfg: ExperimentConfig::from_toml(toml_text).unwrap(),
            config_text: toml_text.to_owned(),
            seed,
            out: dir.to_path_buf(),
            threads: 0,
            dry_run: false,
        }
    }

    #[test]
    fn mix_seed_spreads_nearby_tags() {
        let a = mix_seed(7, 1);
        let b = mix_seed(7, 2);
        let c = mix_seed(8, 1);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(mix_seed(7, 0), 7);
    }

    #[test]
    fn generate_data_row_count_schema_and_determinism() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let toml_text = "[dataset]\nn = 37\n";
        cmd_generate_data(&ctx_with(toml_text, dir_a.path(), 5)).unwrap();
        cmd_generate_data(&ctx_with(toml_text, dir_b.path(), 5)).unwrap();
        let text = fs::read_to_string(dir_a.path().join("mc_dataset.csv")).unwrap();
        let rows = parse_csv(&text, "p,v,f,r,p_next,v_next").unwrap();
        assert_eq!(rows.len(), 37);
        let ma = read_manifest(dir_a.path()).unwrap();
        let mb = read_manifest(dir_b.path()).unwrap();
        assert_eq!(ma.artifacts, mb.artifacts);

        // A different seed changes the file.
        let dir_c = tempfile::tempdir().unwrap();
        cmd_generate_data(&ctx_with(toml_text, dir_c.path(), 6)).unwrap();
        let mc = read_manifest(dir_c.path()).unwrap();
        assert_ne!(ma.artifacts["mc_dataset.csv"], mc.artifacts["mc_dataset.csv"]);
    }

    #[test]
    fn sweep_without_reference_names_the_fix() {
        let dir = tempfile::tempdir().unwrap();
        let err = cmd_sweep(&ctx_with(
            "[sweep]\nsizes = [50]\ntrials = 1\n",
            dir.path(),
            1,
        ))
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("build-reference"), "unhelpful error: {msg}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn tabular_verify_writes_clean_report() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = ctx_with("[tabular]\ninstances = 12\n", dir.path(), 31);
        cmd_tabular_verify(&ctx).unwrap();
        let text = fs::read_to_string(dir.path().join("tabular_verify.csv")).unwrap();
        let rows = parse_csv(&text, "instance,gap,telescope_rhs,slack,contraction_excess").unwrap();
        assert_eq!(rows.len(), 12);
        for row in &rows {
            let slack = parse_f64(&row[3], "slack").unwrap();
            let excess = parse_f64(&row[4], "excess").unwrap();
            assert!(slack >= -1e-9);
            assert!(excess <= 1e-12);
        }
    }

    #[test]
    fn online_trace_files_and_summary_agree() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = ctx_with("[online]\nburn_in = 4\ntotal = 32\nseeds = 2\n", dir.path(), 77);
        cmd_online(&ctx).unwrap();
        let summary =
            fs::read_to_string(dir.path().join("online_summary.csv")).unwrap();
        let srows = parse_csv(&summary, "seed,j_star,j_uniform,total_regret").unwrap();
        assert_eq!(srows.len(), 2);
        for (i, srow) in srows.iter().enumerate() {
            let text =
                fs::read_to_string(dir.path().join(format!("online_trace_{i}.csv"))).unwrap();
            let rows = parse_csv(&text, "t,block,J_hat,regret_cum").unwrap();
            assert_eq!(rows.len(), 32);
            let last = parse_f64(&rows[31][3], "regret_cum").unwrap();
            let total = parse_f64(&srow[3], "total_regret").unwrap();
            assert_eq!(last.to_bits(), total.to_bits());
        }
    }

    #[test]
    fn diagnose_writes_parseable_report() {
        let dir = tempfile::tempdir().unwrap();
        let toml_text = "[diagnose]\nstates = 4\nactions = 2\nhorizon = 4\ntrials = 8\n\
                         spread_draws = 40\nshift_samples = 200\n";
        cmd_diagnose(&ctx_with(toml_text, dir.path(), 13)).unwrap();
        let text = fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
        let rows = parse_csv(&text, "quantity,h,h_prime,value").unwrap();
        let find = |name: &str| -> f64 {
            let row = rows.iter().find(|r| r[0] == name).unwrap();
            parse_f64(&row[3], name).unwrap()
        };
        assert!(find("fast_rate_bound") >= 0.0);
        assert!(find("linear_bound") >= 0.0);
        assert!(find("j_star").is_finite());
        // The bounds dominate the audited policy's actual gap.
        assert!(find("true_gap") <= find("fast_rate_bound") + 1e-12);
        let kappa_rows = rows.iter().filter(|r| r[0] == "kappa").count();
        assert_eq!(kappa_rows, 3 * (3 + 1) / 2);
        assert!(fs::read_to_string(dir.path().join("diagnostics_summary.txt"))
            .unwrap()
            .contains("fast-rate bound"));
    }
}
