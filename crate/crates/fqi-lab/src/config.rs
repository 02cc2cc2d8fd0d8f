//! Experiment configuration: a sectioned TOML file in which every key is
//! optional and unknown keys are rejected. Each section resolves into the
//! corresponding core type, filling gaps with that type's defaults, so a
//! config file only states what it changes.

use fqi_core::eval::{centered_grid, EvalConfig};
use fqi_core::features::ProductFeatureSpec;
use fqi_core::mountain_car::McParams;
use fqi_core::ridge::FqiConfig;
use serde::Deserialize;

use crate::{Failure, Result};

fn bad(msg: String) -> Failure {
    Failure::Config(msg)
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; the `--seed` flag overrides it.
    pub seed: Option<u64>,
    /// Output directory; the `--out` flag overrides it.
    pub out: Option<String>,
    /// Worker threads (0 = library default); the `--threads` flag overrides it.
    pub threads: Option<usize>,
    #[serde(default)]
    pub env: EnvSection,
    #[serde(default)]
    pub features: FeatureSection,
    #[serde(default)]
    pub fqi: FqiSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub rate_fit: RateFitSection,
    #[serde(default)]
    pub online: OnlineSection,
    #[serde(default)]
    pub tabular: TabularSection,
    #[serde(default)]
    pub diagnose: DiagnoseSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| bad(format!("cannot parse config: {e}")))
    }
}

/// Mountain-car environment overrides; anything unset keeps the standard
/// benchmark value.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    pub p_min: Option<f64>,
    pub p_max: Option<f64>,
    pub v_min: Option<f64>,
    pub v_max: Option<f64>,
    pub f_min: Option<f64>,
    pub f_max: Option<f64>,
    pub force_gain: Option<f64>,
    pub gravity_scale: Option<f64>,
    pub sigma_v: Option<f64>,
    pub sigma_p: Option<f64>,
    pub barrier: Option<f64>,
    pub force_cost: Option<f64>,
    pub goal_position: Option<f64>,
    pub goal_bonus: Option<f64>,
    pub gamma: Option<f64>,
    pub init_p_lo: Option<f64>,
    pub init_p_hi: Option<f64>,
}

impl EnvSection {
    pub fn params(&self) -> Result<McParams> {
        let d = McParams::default();
        let p = McParams {
            p_min: self.p_min.unwrap_or(d.p_min),
            p_max: self.p_max.unwrap_or(d.p_max),
            v_min: self.v_min.unwrap_or(d.v_min),
            v_max: self.v_max.unwrap_or(d.v_max),
            f_min: self.f_min.unwrap_or(d.f_min),
            f_max: self.f_max.unwrap_or(d.f_max),
            force_gain: self.force_gain.unwrap_or(d.force_gain),
            gravity_scale: self.gravity_scale.unwrap_or(d.gravity_scale),
            sigma_v: self.sigma_v.unwrap_or(d.sigma_v),
            sigma_p: self.sigma_p.unwrap_or(d.sigma_p),
            barrier: self.barrier.unwrap_or(d.barrier),
            force_cost: self.force_cost.unwrap_or(d.force_cost),
            goal_position: self.goal_position.unwrap_or(d.goal_position),
            goal_bonus: self.goal_bonus.unwrap_or(d.goal_bonus),
            gamma: self.gamma.unwrap_or(d.gamma),
            init_p_lo: self.init_p_lo.unwrap_or(d.init_p_lo),
            init_p_hi: self.init_p_hi.unwrap_or(d.init_p_hi),
        };
        p.validate().map_err(|e| bad(format!("[env] {e}")))?;
        Ok(p)
    }
}

/// Trigonometric product basis over the state-action box. Defaults give the
/// 20 x 8 x (3+1) = 640-dimensional desk-scale class.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSection {
    pub pos_components: Option<usize>,
    pub vel_components: Option<usize>,
    pub force_degree: Option<usize>,
    pub unit_rescale: Option<bool>,
}

impl FeatureSection {
    pub fn spec(&self, params: &McParams) -> Result<ProductFeatureSpec> {
        let spec = params
            .feature_spec(
                self.pos_components.unwrap_or(20),
                self.vel_components.unwrap_or(8),
                self.force_degree.unwrap_or(3),
            )
            .map_err(|e| bad(format!("[features] {e}")))?;
        Ok(spec.with_unit_rescale(self.unit_rescale.unwrap_or(false)))
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FqiSection {
    pub max_iterations: Option<usize>,
    pub patience: Option<usize>,
    pub tolerance: Option<f64>,
    /// Fixed ridge weight; unset selects the 0.01/n schedule.
    pub lambda: Option<f64>,
}

impl FqiSection {
    pub fn config(&self) -> Result<FqiConfig> {
        let d = FqiConfig::default();
        let c = FqiConfig {
            max_iterations: self.max_iterations.unwrap_or(d.max_iterations),
            patience: self.patience.unwrap_or(d.patience),
            tolerance: self.tolerance.unwrap_or(d.tolerance),
            lambda: self.lambda,
        };
        c.validate().map_err(|e| bad(format!("[fqi] {e}")))?;
        Ok(c)
    }
}

/// Monte-Carlo evaluation fidelity. The start grid is always the centered
/// grid (`-0.5 + 0.2 j / grid_points`); only its resolution is configurable.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub grid_points: Option<usize>,
    pub trajectories_per_start: Option<usize>,
    pub steps: Option<usize>,
    /// Evaluation discount; unset inherits the environment's.
    pub gamma: Option<f64>,
    /// Trajectories per start when evaluating the reference policy; unset
    /// falls back to `trajectories_per_start`.
    pub reference_trajectories_per_start: Option<usize>,
}

impl EvalSection {
    pub fn config(&self, default_gamma: f64, master_seed: u64) -> Result<EvalConfig> {
        let c = EvalConfig {
            grid: centered_grid(self.grid_points.unwrap_or(100)),
            trajectories_per_start: self.trajectories_per_start.unwrap_or(10),
            steps: self.steps.unwrap_or(600),
            gamma: self.gamma.unwrap_or(default_gamma),
            master_seed,
        };
        c.validate().map_err(|e| bad(format!("[eval] {e}")))?;
        Ok(c)
    }

    /// Evaluation fidelity for `build-reference`.
    pub fn reference_config(&self, default_gamma: f64, master_seed: u64) -> Result<EvalConfig> {
        let mut c = self.config(default_gamma, master_seed)?;
        if let Some(t) = self.reference_trajectories_per_start {
            c.trajectories_per_start = t;
            c.validate().map_err(|e| bad(format!("[eval] {e}")))?;
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// Transitions to sample in `generate-data`.
    pub n: Option<usize>,
}

impl DatasetSection {
    pub fn n(&self) -> Result<usize> {
        let n = self.n.unwrap_or(1000);
        if n == 0 {
            return Err(bad("[dataset] n must be >= 1".into()));
        }
        Ok(n)
    }
}

/// Sample-size sweep. Sizes come either from an explicit list or from
/// exponents (`n = floor(e^k)`); defaults reproduce the full-scale study
/// range k = 10.5, 10.75, ..., 13 with 80 trials per size.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub sizes: Option<Vec<usize>>,
    pub log_sizes: Option<Vec<f64>>,
    pub trials: Option<usize>,
    /// Sample size for the reference fit in `build-reference`.
    pub reference_n: Option<usize>,
}

impl SweepSection {
    pub fn sizes(&self) -> Result<Vec<usize>> {
        let sizes: Vec<usize> = match (&self.sizes, &self.log_sizes) {
            (Some(_), Some(_)) => {
                return Err(bad(
                    "[sweep] set either `sizes` or `log_sizes`, not both".into(),
                ))
            }
            (Some(s), None) => s.clone(),
            (None, Some(ks)) => {
                if ks.iter().any(|k| !k.is_finite()) {
                    return Err(bad("[sweep] log_sizes must be finite".into()));
                }
                ks.iter().map(|k| k.exp().floor() as usize).collect()
            }
            (None, None) => (0..11)
                .map(|i| (10.5 + 0.25 * i as f64).exp().floor() as usize)
                .collect(),
        };
        if sizes.is_empty() {
            return Err(bad("[sweep] needs at least one sample size".into()));
        }
        if sizes[0] == 0 {
            return Err(bad("[sweep] sample sizes must be >= 1".into()));
        }
        if !sizes.windows(2).all(|w| w[0] < w[1]) {
            return Err(bad("[sweep] sample sizes must be strictly increasing".into()));
        }
        Ok(sizes)
    }

    pub fn trials(&self) -> Result<usize> {
        let t = self.trials.unwrap_or(80);
        if t == 0 {
            return Err(bad("[sweep] trials must be >= 1".into()));
        }
        Ok(t)
    }

    pub fn reference_n(&self) -> Result<usize> {
        let n = self.reference_n.unwrap_or(400_000);
        if n == 0 {
            return Err(bad("[sweep] reference_n must be >= 1".into()));
        }
        Ok(n)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateFitSection {
    /// Fit only the last k usable points; unset or 0 fits all of them.
    pub k_last: Option<usize>,
    /// Trial-resampling bootstrap for the confidence interval; unset keeps
    /// the plain t-interval.
    pub bootstrap_resamples: Option<usize>,
    /// Results file for `rate-fit`; defaults to `sweep_results.csv` in the
    /// output directory.
    pub input: Option<String>,
}

impl RateFitSection {
    /// Effective cutoff for a fit over `available` points.
    pub fn k_last(&self, available: usize) -> usize {
        match self.k_last {
            Some(k) if k > 0 => k.min(available),
            _ => available,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnlineSection {
    pub burn_in: Option<usize>,
    pub total: Option<usize>,
    /// Independent runs, each with its own environment draw and seed.
    pub seeds: Option<usize>,
}

impl OnlineSection {
    pub fn resolve(&self) -> Result<(usize, usize, usize)> {
        let burn_in = self.burn_in.unwrap_or(8);
        let total = self.total.unwrap_or(512);
        let seeds = self.seeds.unwrap_or(1);
        if burn_in == 0 || total < burn_in {
            return Err(bad("[online] needs 1 <= burn_in <= total".into()));
        }
        if seeds == 0 {
            return Err(bad("[online] seeds must be >= 1".into()));
        }
        Ok((burn_in, total, seeds))
    }
}

/// Instance generator bounds for `tabular-verify`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularSection {
    pub instances: Option<usize>,
    pub max_states: Option<usize>,
    pub max_actions: Option<usize>,
    pub max_horizon: Option<usize>,
}

impl TabularSection {
    pub fn resolve(&self) -> Result<(usize, usize, usize, usize)> {
        let instances = self.instances.unwrap_or(200);
        let max_states = self.max_states.unwrap_or(6);
        let max_actions = self.max_actions.unwrap_or(4);
        let max_horizon = self.max_horizon.unwrap_or(6);
        if instances == 0 {
            return Err(bad("[tabular] instances must be >= 1".into()));
        }
        if max_states < 2 || max_actions < 2 || max_horizon < 2 {
            return Err(bad(
                "[tabular] needs max_states >= 2, max_actions >= 2, max_horizon >= 2".into(),
            ));
        }
        Ok((instances, max_states, max_actions, max_horizon))
    }
}

/// Seeded tabular instance and sampling effort for `diagnose`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseSection {
    pub states: Option<usize>,
    pub actions: Option<usize>,
    pub horizon: Option<usize>,
    /// Neighborhood samples per stability coefficient.
    pub trials: Option<usize>,
    /// Neighborhood radius, one shared value for every stage.
    pub radius: Option<f64>,
    /// Scale of the random perturbation defining the audited Q-table.
    pub perturbation: Option<f64>,
    /// Next-state draws per pair in the conditional-spread estimate.
    pub spread_draws: Option<usize>,
    /// Ridge weight in the covariate-shift norm.
    pub shift_lambda: Option<f64>,
    /// Rows in the empirical covariance behind the shift norm.
    pub shift_samples: Option<usize>,
}

pub struct DiagnoseResolved {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    pub trials: usize,
    pub radius: f64,
    pub perturbation: f64,
    pub spread_draws: usize,
    pub shift_lambda: f64,
    pub shift_samples: usize,
}

impl DiagnoseSection {
    pub fn resolve(&self) -> Result<DiagnoseResolved> {
        let r = DiagnoseResolved {
            states: self.states.unwrap_or(5),
            actions: self.actions.unwrap_or(3),
            horizon: self.horizon.unwrap_or(5),
            trials: self.trials.unwrap_or(40),
            radius: self.radius.unwrap_or(0.5),
            perturbation: self.perturbation.unwrap_or(0.05),
            spread_draws: self.spread_draws.unwrap_or(200),
            shift_lambda: self.shift_lambda.unwrap_or(1e-3),
            shift_samples: self.shift_samples.unwrap_or(2000),
        };
        if r.states < 2 || r.actions < 2 {
            return Err(bad("[diagnose] needs states >= 2 and actions >= 2".into()));
        }
        if r.horizon < 3 {
            return Err(bad("[diagnose] horizon must be >= 3".into()));
        }
        if r.trials == 0 || r.spread_draws < 2 || r.shift_samples < 2 {
            return Err(bad(
                "[diagnose] trials >= 1, spread_draws >= 2, shift_samples >= 2".into(),
            ));
        }
        if !(r.radius > 0.0) || !(r.perturbation > 0.0) || r.shift_lambda < 0.0 {
            return Err(bad(
                "[diagnose] radius and perturbation must be positive, shift_lambda >= 0".into(),
            ));
        }
        Ok(r)
    }
}
