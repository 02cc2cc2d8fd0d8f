//! Stochastic mountain-car environment: barrier-regularized hill profile,
//! truncated noisy dynamics, action-cost/goal-bonus reward, offline dataset
//! sampling, and seeded rollouts.
//!
//! The dynamics map is pure: noise variates are passed in by the caller, so
//! identical arguments give bitwise-identical next states. All randomness
//! lives in the samplers, which draw from an explicit [`StreamRng`].

use alloc::vec::Vec;

use crate::dataset::{Dataset, Transition};
use crate::error::{Error, Result};
use crate::features::ProductFeatureSpec;
use crate::fmath;
use crate::rng::StreamRng;

/// Margin used to keep positions strictly inside the slope's domain when a
/// previous truncation left them exactly on the boundary.
const SLOPE_CLIP: f64 = 1e-9;

/// Environment parameters. Defaults give the standard stochastic variant:
/// position in [-1.2, 0.6], velocity in [-0.07, 0.07], force in [-1, 1],
/// force gain 0.0015, gravity scale 0.0025, velocity noise 0.01, position
/// noise 0.0025, goal at 0.45 with bonus coefficient 100, force cost 1/10,
/// discount 0.97, initial positions uniform on [-0.6, -0.4].
#[derive(Debug, Clone, PartialEq)]
pub struct McParams {
    pub p_min: f64,
    pub p_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub f_min: f64,
    pub f_max: f64,
    /// Coefficient on the applied force in the velocity update.
    pub force_gain: f64,
    /// Coefficient on the slope term in the velocity update.
    pub gravity_scale: f64,
    /// Standard deviation of the velocity noise.
    pub sigma_v: f64,
    /// Standard deviation of the position noise.
    pub sigma_p: f64,
    /// Strength of the boundary barrier in the hill profile.
    pub barrier: f64,
    /// Reward penalty coefficient on squared force.
    pub force_cost: f64,
    pub goal_position: f64,
    pub goal_bonus: f64,
    pub gamma: f64,
    /// Initial positions are drawn uniformly from [init_p_lo, init_p_hi].
    pub init_p_lo: f64,
    pub init_p_hi: f64,
}

impl Default for McParams {
    fn default() -> Self {
        McParams {
            p_min: -1.2,
            p_max: 0.6,
            v_min: -0.07,
            v_max: 0.07,
            f_min: -1.0,
            f_max: 1.0,
            force_gain: 0.0015,
            gravity_scale: 0.0025,
            sigma_v: 0.01,
            sigma_p: 0.0025,
            barrier: 0.025,
            force_cost: 0.1,
            goal_position: 0.45,
            goal_bonus: 100.0,
            gamma: 0.97,
            init_p_lo: -0.6,
            init_p_hi: -0.4,
        }
    }
}

impl McParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_min < self.p_max) || !(self.v_min < self.v_max) || !(self.f_min < self.f_max) {
            return Err(Error::domain("mountain car: each box must have lo < hi"));
        }
        if self.sigma_v < 0.0 || self.sigma_p < 0.0 {
            return Err(Error::domain("mountain car: noise scales must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::domain("mountain car: discount must lie in [0, 1)"));
        }
        if !(self.init_p_lo <= self.init_p_hi)
            || self.init_p_lo < self.p_min
            || self.init_p_hi > self.p_max
        {
            return Err(Error::domain(
                "mountain car: initial-position interval must sit inside the position box",
            ));
        }
        let all = [
            self.p_min,
            self.p_max,
            self.v_min,
            self.v_max,
            self.f_min,
            self.f_max,
            self.force_gain,
            self.gravity_scale,
            self.barrier,
            self.force_cost,
            self.goal_position,
            self.goal_bonus,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("mountain car: parameters must be finite"));
        }
        Ok(())
    }

    /// Feature spec over this environment's state-action box.
    pub fn feature_spec(
        &self,
        pos_components: usize,
        vel_components: usize,
        force_degree: usize,
    ) -> Result<ProductFeatureSpec> {
        ProductFeatureSpec::new(
            pos_components,
            vel_components,
            force_degree,
            (self.p_min, self.p_max),
            (self.v_min, self.v_max),
            (self.f_min, self.f_max),
        )
    }

    fn check_state(&self, s: McState) -> Result<()> {
        if !s.p.is_finite() || !s.v.is_finite() {
            return Err(Error::domain("mountain car: non-finite state"));
        }
        if s.p < self.p_min || s.p > self.p_max || s.v < self.v_min || s.v > self.v_max {
            return Err(Error::domain("mountain car: state outside the box"));
        }
        Ok(())
    }

    fn check_force(&self, f: f64) -> Result<()> {
        if !f.is_finite() || f < self.f_min || f > self.f_max {
            return Err(Error::domain("mountain car: force outside its interval"));
        }
        Ok(())
    }
}

/// Car state: position and velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McState {
    pub p: f64,
    pub v: f64,
}

impl McState {
    pub fn new(p: f64, v: f64) -> Self {
        McState { p, v }
    }
}

/// Hill profile: (1/3) sin(3p) plus a barrier that blows up at the box
/// endpoints. Defined only strictly inside (p_min, p_max).
pub fn mountain_height(params: &McParams, p: f64) -> Result<f64> {
    if !p.is_finite() || p <= params.p_min || p >= params.p_max {
        return Err(Error::domain(
            "mountain height has poles at the endpoints; p must be strictly interior",
        ));
    }
    let wall = (params.p_max - p) * (p - params.p_min);
    Ok(fmath::sin(3.0 * p) / 3.0 + params.barrier / wall)
}

/// Analytic derivative of [`mountain_height`]:
/// cos(3p) − barrier·(p_max + p_min − 2p)/((p_max − p)(p − p_min))².
pub fn mountain_slope(params: &McParams, p: f64) -> Result<f64> {
    if !p.is_finite() || p <= params.p_min || p >= params.p_max {
        return Err(Error::domain(
            "mountain slope has poles at the endpoints; p must be strictly interior",
        ));
    }
    let wall = (params.p_max - p) * (p - params.p_min);
    let numer = params.p_max + params.p_min - 2.0 * p;
    Ok(fmath::cos(3.0 * p) - params.barrier * numer / (wall * wall))
}

fn clamp(x: f64, lo: f64, hi: f64) -> f64 {
    if x < lo {
        lo
    } else if x > hi {
        hi
    } else {
        x
    }
}

/// One dynamics step. `z_v` and `z_p` are standard-normal draws supplied by
/// the caller; the map itself is deterministic. Velocity updates first, then
/// position using the updated velocity; both are truncated to their boxes.
/// The slope is evaluated at the position clipped a hair inside the box, so
/// states sitting exactly on a truncation boundary remain steppable.
pub fn step(params: &McParams, state: McState, f: f64, z_v: f64, z_p: f64) -> Result<McState> {
    params.check_state(state)?;
    params.check_force(f)?;
    if !z_v.is_finite() || !z_p.is_finite() {
        return Err(Error::domain("mountain car: non-finite noise draw"));
    }
    let p_safe = clamp(state.p, params.p_min + SLOPE_CLIP, params.p_max - SLOPE_CLIP);
    let slope = mountain_slope(params, p_safe)?;
    let v_next = clamp(
        state.v + params.force_gain * f - params.gravity_scale * slope + params.sigma_v * z_v,
        params.v_min,
        params.v_max,
    );
    let p_next = clamp(state.p + v_next + params.sigma_p * z_p, params.p_min, params.p_max);
    Ok(McState::new(p_next, v_next))
}

/// Reward: −force_cost·f² + goal_bonus·max(0, p − goal)².
pub fn reward(params: &McParams, state: McState, f: f64) -> f64 {
    let over = if state.p > params.goal_position {
        state.p - params.goal_position
    } else {
        0.0
    };
    -params.force_cost * f * f + params.goal_bonus * over * over
}

/// Draw one initial position, uniform on [init_p_lo, init_p_hi].
pub fn sample_initial_position(params: &McParams, rng: &mut StreamRng) -> f64 {
    rng.uniform_in(params.init_p_lo, params.init_p_hi)
}

/// Sample `n` transitions with (p, v, f) i.i.d. uniform over the
/// state-action cube and next states drawn from the dynamics. Per row the
/// draw order is p, v, f, z_v, z_p, which fixes the byte-for-byte output for
/// a given stream.
pub fn sample_offline_dataset(
    params: &McParams,
    n: usize,
    rng: &mut StreamRng,
) -> Result<Dataset<McState, f64>> {
    params.validate()?;
    if n == 0 {
        return Err(Error::data("offline dataset size must be >= 1"));
    }
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let p = rng.uniform_in(params.p_min, params.p_max);
        let v = rng.uniform_in(params.v_min, params.v_max);
        let f = rng.uniform_in(params.f_min, params.f_max);
        let z_v = rng.normal();
        let z_p = rng.normal();
        let state = McState::new(p, v);
        let r = reward(params, state, f);
        let next = step(params, state, f, z_v, z_p)?;
        rows.push(Transition {
            state,
            action: f,
            reward: r,
            next_state: next,
        });
    }
    Ok(Dataset::new(rows))
}

/// Discounted return of `policy` over `steps` transitions from (p0, 0).
/// The reward at the start state counts with weight 1, the next with gamma,
/// and so on; two fresh normal draws are consumed per step.
pub fn rollout<F>(
    params: &McParams,
    mut policy: F,
    p0: f64,
    steps: usize,
    gamma: f64,
    rng: &mut StreamRng,
) -> Result<f64>
where
    F: FnMut(McState) -> f64,
{
    params.validate()?;
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::domain("rollout discount must lie in [0, 1)"));
    }
    let mut state = McState::new(p0, 0.0);
    params.check_state(state)?;
    let mut total = 0.0;
    let mut weight = 1.0;
    for _ in 0..steps {
        let f = policy(state);
        params.check_force(f)?;
        total += weight * reward(params, state, f);
        let z_v = rng.normal();
        let z_p = rng.normal();
        state = step(params, state, f, z_v, z_p)?;
        weight *= gamma;
    }
    Ok(total)
}
