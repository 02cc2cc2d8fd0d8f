//! Finite-horizon tabular MDPs with exact dynamic programming.
//!
//! Everything in this module is computed by exact forward/backward sweeps —
//! no sampling — so these routines can serve as oracles for the sampled and
//! approximated machinery elsewhere in the crate: Bellman operators, optimal
//! Q tables, occupation measures and occupancy norms, the telescope
//! decomposition bounding one policy's suboptimality against another, and
//! multi-step transition operators along an optimal policy.
//!
//! Stage indices are 1-based in the public API and in the text format
//! (stage `h` runs 1..=H, transitions exist for 1..=H-1); internal storage
//! is 0-based and the conversion happens only at these function boundaries.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;
use crate::rng::StreamRng;

const PROB_TOL: f64 = 1e-12;

/// Finite-horizon MDP: `horizon` stages, rewards at every stage, transitions
/// between consecutive stages, and an initial state distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    /// `[h][s][a][s']` for h = 1..H-1, flattened.
    transitions: Vec<f64>,
    /// `[h][s][a]` for h = 1..H, flattened.
    rewards: Vec<f64>,
    /// Initial distribution over states.
    initial_dist: Vec<f64>,
}

impl TabularMdp {
    /// Validate and construct. Probability rows must sum to 1 within 1e-12
    /// (they are renormalized exactly when inside that tolerance; a larger
    /// deviation is an error) and be entrywise nonnegative; rewards must be
    /// finite.
    pub fn new(
        horizon: usize,
        n_states: usize,
        n_actions: usize,
        mut transitions: Vec<f64>,
        rewards: Vec<f64>,
        mut initial_dist: Vec<f64>,
    ) -> Result<Self> {
        if horizon == 0 || n_states == 0 || n_actions == 0 {
            return Err(Error::dim("horizon, state and action counts must be positive"));
        }
        let trans_len = (horizon - 1) * n_states * n_actions * n_states;
        if transitions.len() != trans_len {
            return Err(Error::dim(format!(
                "transition table length {} != (H-1)*S*A*S = {trans_len}",
                transitions.len()
            )));
        }
        let reward_len = horizon * n_states * n_actions;
        if rewards.len() != reward_len {
            return Err(Error::dim(format!(
                "reward table length {} != H*S*A = {reward_len}",
                rewards.len()
            )));
        }
        if initial_dist.len() != n_states {
            return Err(Error::dim(format!(
                "initial distribution length {} != S = {n_states}",
                initial_dist.len()
            )));
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::data("rewards must be finite"));
        }
        for chunk in transitions.chunks_mut(n_states) {
            normalize_prob_row(chunk, "transition row")?;
        }
        normalize_prob_row(&mut initial_dist, "initial distribution")?;
        Ok(TabularMdp {
            horizon,
            n_states,
            n_actions,
            transitions,
            rewards,
            initial_dist,
        })
    }

    #[inline]
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    /// Reward r_h(s, a); `h` is 1-based.
    #[inline]
    pub fn reward(&self, h: usize, s: usize, a: usize) -> f64 {
        debug_assert!((1..=self.horizon).contains(&h));
        self.rewards[((h - 1) * self.n_states + s) * self.n_actions + a]
    }

    /// Stage-h reward table as a flat `[s][a]` slice; `h` is 1-based.
    pub fn reward_table(&self, h: usize) -> &[f64] {
        assert!((1..=self.horizon).contains(&h), "stage {h} out of 1..={}", self.horizon);
        let len = self.n_states * self.n_actions;
        &self.rewards[(h - 1) * len..h * len]
    }

    /// Transition row P_h(· | s, a); `h` is 1-based and must be < H.
    #[inline]
    pub fn transition_row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        debug_assert!((1..self.horizon).contains(&h));
        let base = (((h - 1) * self.n_states + s) * self.n_actions + a) * self.n_states;
        &self.transitions[base..base + self.n_states]
    }

    fn check_stage_table(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.n_states * self.n_actions {
            return Err(Error::dim(format!(
                "stage table length {} != S*A = {}",
                f.len(),
                self.n_states * self.n_actions
            )));
        }
        Ok(())
    }
}

fn normalize_prob_row(row: &mut [f64], what: &str) -> Result<()> {
    let mut sum = 0.0;
    for &p in row.iter() {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::domain(format!("{what} has invalid probability {p}")));
        }
        sum += p;
    }
    if fmath::abs(sum - 1.0) > PROB_TOL {
        return Err(Error::domain(format!(
            "{what} sums to {sum:.15}, outside 1 +/- {PROB_TOL:.0e}"
        )));
    }
    for p in row.iter_mut() {
        *p /= sum;
    }
    Ok(())
}

/// Per-stage Q table `q[h][s][a]`, h = 1..=H.
#[derive(Debug, Clone, PartialEq)]
pub struct StageQ {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl StageQ {
    pub fn zeros(mdp: &TabularMdp) -> Self {
        StageQ {
            horizon: mdp.horizon,
            n_states: mdp.n_states,
            n_actions: mdp.n_actions,
            values: vec![0.0; mdp.horizon * mdp.n_states * mdp.n_actions],
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Stage table as a flat `[s][a]` slice; `h` is 1-based.
    pub fn stage(&self, h: usize) -> &[f64] {
        assert!((1..=self.horizon).contains(&h), "stage {h} out of 1..={}", self.horizon);
        let len = self.n_states * self.n_actions;
        &self.values[(h - 1) * len..h * len]
    }

    pub fn stage_mut(&mut self, h: usize) -> &mut [f64] {
        assert!((1..=self.horizon).contains(&h), "stage {h} out of 1..={}", self.horizon);
        let len = self.n_states * self.n_actions;
        &mut self.values[(h - 1) * len..h * len]
    }

    #[inline]
    pub fn at(&self, h: usize, s: usize, a: usize) -> f64 {
        self.stage(h)[s * self.n_actions + a]
    }

    pub fn dims_match(&self, mdp: &TabularMdp) -> bool {
        self.horizon == mdp.horizon
            && self.n_states == mdp.n_states
            && self.n_actions == mdp.n_actions
    }
}

/// Deterministic per-stage policy `pi[h][s] -> action`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicySeq {
    horizon: usize,
    n_states: usize,
    actions: Vec<usize>,
}

impl PolicySeq {
    pub fn new(horizon: usize, n_states: usize, n_actions: usize, actions: Vec<usize>) -> Result<Self> {
        if actions.len() != horizon * n_states {
            return Err(Error::dim(format!(
                "policy table length {} != H*S = {}",
                actions.len(),
                horizon * n_states
            )));
        }
        if actions.iter().any(|&a| a >= n_actions) {
            return Err(Error::dim("policy contains an out-of-range action index"));
        }
        Ok(PolicySeq {
            horizon,
            n_states,
            actions,
        })
    }

    /// Action at stage `h` (1-based) in state `s`.
    #[inline]
    pub fn action(&self, h: usize, s: usize) -> usize {
        debug_assert!((1..=self.horizon).contains(&h));
        self.actions[(h - 1) * self.n_states + s]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

/// Stage-h state-action occupation measure under some policy.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationWeights {
    /// Stage (1-based) the weights refer to.
    pub stage: usize,
    n_states: usize,
    n_actions: usize,
    weights: Vec<f64>,
}

impl OccupationWeights {
    #[inline]
    pub fn weight(&self, s: usize, a: usize) -> f64 {
        self.weights[s * self.n_actions + a]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Optimal Q tables by backward induction: q_H = r_H and
/// q_h = B*_h q_{h+1}.
pub fn exact_optimal_q(mdp: &TabularMdp) -> StageQ {
    let mut q = StageQ::zeros(mdp);
    let h_last = mdp.horizon;
    q.stage_mut(h_last).copy_from_slice(mdp.reward_table(h_last));
    for h in (1..h_last).rev() {
        let backed = apply_optimality_operator(mdp, q.stage(h + 1), h)
            .expect("stage ranges are valid by construction");
        q.stage_mut(h).copy_from_slice(&backed);
    }
    q
}

/// Bellman optimality operator at stage `h` (1-based, 1..=H-1):
/// `(B*_h f)(s,a) = r_h(s,a) + sum_{s'} P_h(s'|s,a) max_{a'} f(s',a')`.
pub fn apply_optimality_operator(mdp: &TabularMdp, f_next: &[f64], h: usize) -> Result<Vec<f64>> {
    if !(1..mdp.horizon).contains(&h) {
        return Err(Error::dim(format!(
            "optimality operator stage {h} outside 1..={}",
            mdp.horizon.saturating_sub(1)
        )));
    }
    mdp.check_stage_table(f_next)?;
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let max_next: Vec<f64> = (0..ns)
        .map(|s| {
            f_next[s * na..(s + 1) * na]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let mut out = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            let row = mdp.transition_row(h, s, a);
            let mut exp = 0.0;
            for (p, v) in row.iter().zip(&max_next) {
                exp += p * v;
            }
            out[s * na + a] = mdp.reward(h, s, a) + exp;
        }
    }
    Ok(out)
}

/// Bellman evaluation operator at stage `h` for policy `pi`:
/// like the optimality operator but the next-stage value is
/// `f(s', pi_{h+1}(s'))` instead of a max.
pub fn apply_evaluation_operator(
    mdp: &TabularMdp,
    f_next: &[f64],
    pi: &PolicySeq,
    h: usize,
) -> Result<Vec<f64>> {
    if !(1..mdp.horizon).contains(&h) {
        return Err(Error::dim(format!(
            "evaluation operator stage {h} outside 1..={}",
            mdp.horizon.saturating_sub(1)
        )));
    }
    mdp.check_stage_table(f_next)?;
    check_policy(mdp, pi)?;
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let next_val: Vec<f64> = (0..ns)
        .map(|s| f_next[s * na + pi.action(h + 1, s)])
        .collect();
    let mut out = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            let row = mdp.transition_row(h, s, a);
            let mut exp = 0.0;
            for (p, v) in row.iter().zip(&next_val) {
                exp += p * v;
            }
            out[s * na + a] = mdp.reward(h, s, a) + exp;
        }
    }
    Ok(out)
}

fn check_policy(mdp: &TabularMdp, pi: &PolicySeq) -> Result<()> {
    if pi.horizon != mdp.horizon || pi.n_states != mdp.n_states {
        return Err(Error::dim("policy dimensions do not match the MDP"));
    }
    if pi.actions.iter().any(|&a| a >= mdp.n_actions) {
        return Err(Error::dim("policy action out of range for the MDP"));
    }
    Ok(())
}

/// Exact Q tables of a fixed policy by backward evaluation sweeps.
pub fn policy_q(mdp: &TabularMdp, pi: &PolicySeq) -> Result<StageQ> {
    check_policy(mdp, pi)?;
    let mut q = StageQ::zeros(mdp);
    let h_last = mdp.horizon;
    q.stage_mut(h_last).copy_from_slice(mdp.reward_table(h_last));
    for h in (1..h_last).rev() {
        let backed = apply_evaluation_operator(mdp, q.stage(h + 1), pi, h)?;
        q.stage_mut(h).copy_from_slice(&backed);
    }
    Ok(q)
}

/// Expected total reward of `pi` from the initial distribution:
/// `J(pi) = E_{mu}[q^pi_1(S_1, pi_1(S_1))]`.
pub fn policy_value(mdp: &TabularMdp, pi: &PolicySeq) -> Result<f64> {
    let q = policy_q(mdp, pi)?;
    let first = q.stage(1);
    let na = mdp.n_actions;
    Ok(mdp
        .initial_dist
        .iter()
        .enumerate()
        .map(|(s, mu)| mu * first[s * na + pi.action(1, s)])
        .sum())
}

/// Expected total reward of the uniform-random policy (every action equally
/// likely at every stage). Used as an exploration baseline.
pub fn uniform_policy_value(mdp: &TabularMdp) -> f64 {
    let (ns, na, h_last) = (mdp.n_states, mdp.n_actions, mdp.horizon);
    let inv = 1.0 / na as f64;
    // v[s] at stage h+1, swept backward.
    let mut v = vec![0.0; ns];
    for h in (1..=h_last).rev() {
        let mut v_now = vec![0.0; ns];
        for s in 0..ns {
            let mut acc = 0.0;
            for a in 0..na {
                let mut q_sa = mdp.reward(h, s, a);
                if h < h_last {
                    let row = mdp.transition_row(h, s, a);
                    for (p, vv) in row.iter().zip(&v) {
                        q_sa += p * vv;
                    }
                }
                acc += q_sa;
            }
            v_now[s] = acc * inv;
        }
        v = v_now;
    }
    mdp.initial_dist.iter().zip(&v).map(|(mu, vv)| mu * vv).sum()
}

/// Greedy policy of a Q table; argmax ties break toward the smallest action
/// index, so the result is deterministic.
pub fn greedy_policy(q: &StageQ) -> PolicySeq {
    let (ns, na) = (q.n_states, q.n_actions);
    let mut actions = Vec::with_capacity(q.horizon * ns);
    for h in 1..=q.horizon {
        let table = q.stage(h);
        for s in 0..ns {
            let row = &table[s * na..(s + 1) * na];
            let mut best = 0usize;
            for (a, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = a;
                }
            }
            actions.push(best);
        }
    }
    PolicySeq {
        horizon: q.horizon,
        n_states: ns,
        actions,
    }
}

/// Stage-h state-action occupation measure of `pi` by exact forward
/// propagation from the initial distribution; `h` is 1-based.
pub fn occupation_weights(mdp: &TabularMdp, pi: &PolicySeq, h: usize) -> Result<OccupationWeights> {
    if !(1..=mdp.horizon).contains(&h) {
        return Err(Error::dim(format!("occupation stage {h} outside 1..={}", mdp.horizon)));
    }
    check_policy(mdp, pi)?;
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let mut state_dist = mdp.initial_dist.clone();
    for t in 1..h {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            let mass = state_dist[s];
            if mass == 0.0 {
                continue;
            }
            let row = mdp.transition_row(t, s, pi.action(t, s));
            for (sn, p) in row.iter().enumerate() {
                next[sn] += mass * p;
            }
        }
        state_dist = next;
    }
    let mut weights = vec![0.0; ns * na];
    for s in 0..ns {
        weights[s * na + pi.action(h, s)] = state_dist[s];
    }
    Ok(OccupationWeights {
        stage: h,
        n_states: ns,
        n_actions: na,
        weights,
    })
}

/// Occupancy (semi-)norm of a stage-h table under the occupation measure of
/// `pi_star`: the root of the occupation-weighted mean square.
pub fn occupancy_norm(mdp: &TabularMdp, pi_star: &PolicySeq, f: &[f64], h: usize) -> Result<f64> {
    mdp.check_stage_table(f)?;
    let occ = occupation_weights(mdp, pi_star, h)?;
    let mut acc = 0.0;
    for (w, v) in occ.weights.iter().zip(f) {
        acc += w * v * v;
    }
    Ok(fmath::sqrt(acc))
}

/// Right side of the telescope bound on `J(pi) - J(pi_hat)`:
/// `sum_{h=1}^{H-1} (E_pi - E_pi_hat)[(B*_h f_{h+1} - f_h)(S_h, A_h)]`,
/// all expectations exact.
///
/// Requires `pi_hat` to be the greedy policy of `f_hat` and the final stage
/// of `f_hat` to equal the known final rewards — the two ingredients that
/// make the telescoped cross terms one-sided. Violations are contract
/// errors.
pub fn telescope_rhs(
    mdp: &TabularMdp,
    f_hat: &StageQ,
    comparator: &PolicySeq,
    pi_hat: &PolicySeq,
) -> Result<f64> {
    if !f_hat.dims_match(mdp) {
        return Err(Error::dim("f_hat dimensions do not match the MDP"));
    }
    check_policy(mdp, comparator)?;
    if *pi_hat != greedy_policy(f_hat) {
        return Err(Error::contract(
            "pi_hat is not the greedy policy of f_hat (smallest-index tie rule)",
        ));
    }
    let h_last = mdp.horizon;
    let final_err = f_hat
        .stage(h_last)
        .iter()
        .zip(mdp.reward_table(h_last))
        .fold(0.0f64, |m, (a, b)| m.max(fmath::abs(a - b)));
    if final_err > 1e-12 {
        return Err(Error::contract(format!(
            "f_hat at the final stage must equal the final rewards (max deviation {final_err:.3e})"
        )));
    }
    let mut total = 0.0;
    for h in 1..h_last {
        let backed = apply_optimality_operator(mdp, f_hat.stage(h + 1), h)?;
        let residual: Vec<f64> = backed
            .iter()
            .zip(f_hat.stage(h))
            .map(|(b, f)| b - f)
            .collect();
        let occ_cmp = occupation_weights(mdp, comparator, h)?;
        let occ_hat = occupation_weights(mdp, pi_hat, h)?;
        for ((r, wc), wh) in residual.iter().zip(occ_cmp.weights.iter()).zip(occ_hat.weights.iter()) {
            total += r * (wc - wh);
        }
    }
    Ok(total)
}

/// Multi-step transition operator along `pi_star`: applies
/// `P*_h P*_{h+1} ... P*_{h'-1}` to a stage-h' table `f`, producing a
/// stage-h table, where `(P*_t g)(s,a) = sum_{s'} P_t(s'|s,a) g(s',
/// pi*_{t+1}(s'))`. Requires `1 <= h < h' <= H`.
pub fn multistep_transition(
    mdp: &TabularMdp,
    pi_star: &PolicySeq,
    h: usize,
    h_prime: usize,
    f: &[f64],
) -> Result<Vec<f64>> {
    if !(h >= 1 && h < h_prime && h_prime <= mdp.horizon) {
        return Err(Error::dim(format!(
            "multistep stages need 1 <= h < h' <= H, got h={h}, h'={h_prime}, H={}",
            mdp.horizon
        )));
    }
    mdp.check_stage_table(f)?;
    check_policy(mdp, pi_star)?;
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let mut cur = f.to_vec();
    for t in (h..h_prime).rev() {
        // Value of `cur` along pi_star at stage t+1, then one-step backup.
        let next_val: Vec<f64> = (0..ns)
            .map(|s| cur[s * na + pi_star.action(t + 1, s)])
            .collect();
        let mut out = vec![0.0; ns * na];
        for s in 0..ns {
            for a in 0..na {
                let row = mdp.transition_row(t, s, a);
                let mut exp = 0.0;
                for (p, v) in row.iter().zip(&next_val) {
                    exp += p * v;
                }
                out[s * na + a] = exp;
            }
        }
        cur = out;
    }
    Ok(cur)
}

/// Simulate one episode, drawing initial state and transitions from `rng`
/// and choosing actions via `act(h, s)`. Returns `(s, a, r, s_next)` per
/// stage; at the final stage `s_next` is the terminal state itself (no
/// transition exists).
pub fn sample_trajectory<F: FnMut(usize, usize, &mut StreamRng) -> usize>(
    mdp: &TabularMdp,
    mut act: F,
    rng: &mut StreamRng,
) -> Vec<(usize, usize, f64, usize)> {
    let mut out = Vec::with_capacity(mdp.horizon);
    let mut s = sample_index(&mdp.initial_dist, rng);
    for h in 1..=mdp.horizon {
        let a = act(h, s, rng);
        debug_assert!(a < mdp.n_actions);
        let r = mdp.reward(h, s, a);
        let s_next = if h < mdp.horizon {
            sample_index(mdp.transition_row(h, s, a), rng)
        } else {
            s
        };
        out.push((s, a, r, s_next));
        s = s_next;
    }
    out
}

pub(crate) fn sample_index(probs: &[f64], rng: &mut StreamRng) -> usize {
    let u = rng.uniform01();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

// ---------------------------------------------------------------------------
// Test-problem generators (also used by the CLI's verification command).
// ---------------------------------------------------------------------------

/// Random dense MDP: Dirichlet-like transition rows (squared uniforms,
/// normalized), i.i.d. uniform rewards in [0, 1], uniform-ish random initial
/// distribution.
pub fn random_mdp(rng: &mut StreamRng, horizon: usize, n_states: usize, n_actions: usize) -> TabularMdp {
    let mut transitions = vec![0.0; horizon.saturating_sub(1) * n_states * n_actions * n_states];
    for row in transitions.chunks_mut(n_states) {
        let mut sum = 0.0;
        for p in row.iter_mut() {
            let u = rng.uniform01();
            *p = u * u + 1e-3;
            sum += *p;
        }
        for p in row.iter_mut() {
            *p /= sum;
        }
    }
    let rewards: Vec<f64> = (0..horizon * n_states * n_actions)
        .map(|_| rng.uniform01())
        .collect();
    let mut initial = vec![0.0; n_states];
    let mut sum = 0.0;
    for p in initial.iter_mut() {
        *p = rng.uniform01() + 1e-3;
        sum += *p;
    }
    for p in initial.iter_mut() {
        *p /= sum;
    }
    TabularMdp::new(horizon, n_states, n_actions, transitions, rewards, initial)
        .expect("generated tables are valid by construction")
}

/// Random stage-Q perturbation table with entries uniform in [-1, 1],
/// matching the MDP's shape.
pub fn random_stageq(rng: &mut StreamRng, mdp: &TabularMdp) -> StageQ {
    let mut q = StageQ::zeros(mdp);
    for h in 1..=mdp.horizon() {
        for v in q.stage_mut(h) {
            *v = rng.uniform_in(-1.0, 1.0);
        }
    }
    q
}

/// Random deterministic policy.
pub fn random_policy(rng: &mut StreamRng, mdp: &TabularMdp) -> PolicySeq {
    let actions: Vec<usize> = (0..mdp.horizon() * mdp.n_states())
        .map(|_| rng.uniform_usize(mdp.n_actions()))
        .collect();
    PolicySeq::new(mdp.horizon(), mdp.n_states(), mdp.n_actions(), actions)
        .expect("generated actions are in range")
}

// ---------------------------------------------------------------------------
// Plain-text serialization.
// ---------------------------------------------------------------------------

/// Serialize to the plain-text exchange format:
///
/// ```text
/// H S A
/// mu s prob        (one line per state with nonzero mass)
/// r h s a value    (all entries; h is 1-based)
/// P h s a s' prob  (nonzero entries only)
/// ```
pub fn mdp_to_text(mdp: &TabularMdp) -> String {
    let mut out = String::new();
    out.push_str(&format!("{} {} {}\n", mdp.horizon, mdp.n_states, mdp.n_actions));
    for (s, p) in mdp.initial_dist.iter().enumerate() {
        if *p != 0.0 {
            out.push_str(&format!("mu {s} {p}\n"));
        }
    }
    for h in 1..=mdp.horizon {
        for s in 0..mdp.n_states {
            for a in 0..mdp.n_actions {
                out.push_str(&format!("r {h} {s} {a} {}\n", mdp.reward(h, s, a)));
            }
        }
    }
    for h in 1..mdp.horizon {
        for s in 0..mdp.n_states {
            for a in 0..mdp.n_actions {
                for (sn, p) in mdp.transition_row(h, s, a).iter().enumerate() {
                    if *p != 0.0 {
                        out.push_str(&format!("P {h} {s} {a} {sn} {p}\n"));
                    }
                }
            }
        }
    }
    out
}

/// Parse the plain-text format produced by [`mdp_to_text`]. Missing `r`
/// entries default to 0, missing `P` entries to probability 0 (rows are
/// validated as usual), and a file with no `mu` lines gets the uniform
/// initial distribution. Blank lines and `#` comments are ignored.
pub fn mdp_from_text(text: &str) -> Result<TabularMdp> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::parse("empty MDP text"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| Error::parse(format!("bad header token `{t}`"))))
        .collect::<Result<_>>()?;
    if dims.len() != 3 {
        return Err(Error::parse("header must be `H S A`"));
    }
    let (horizon, ns, na) = (dims[0], dims[1], dims[2]);
    if horizon == 0 || ns == 0 || na == 0 {
        return Err(Error::parse("header dimensions must be positive"));
    }
    let mut transitions = vec![0.0; horizon.saturating_sub(1) * ns * na * ns];
    let mut rewards = vec![0.0; horizon * ns * na];
    let mut initial: Option<Vec<f64>> = None;

    let parse_u = |t: &str| -> Result<usize> {
        t.parse::<usize>()
            .map_err(|_| Error::parse(format!("bad integer `{t}`")))
    };
    let parse_f = |t: &str| -> Result<f64> {
        t.parse::<f64>()
            .map_err(|_| Error::parse(format!("bad number `{t}`")))
    };

    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok[0] {
            "mu" => {
                if tok.len() != 3 {
                    return Err(Error::parse(format!("mu line needs `mu s prob`: `{line}`")));
                }
                let s = parse_u(tok[1])?;
                if s >= ns {
                    return Err(Error::parse(format!("mu state {s} out of range")));
                }
                initial.get_or_insert_with(|| vec![0.0; ns])[s] = parse_f(tok[2])?;
            }
            "r" => {
                if tok.len() != 5 {
                    return Err(Error::parse(format!("r line needs `r h s a value`: `{line}`")));
                }
                let (h, s, a) = (parse_u(tok[1])?, parse_u(tok[2])?, parse_u(tok[3])?);
                if !(1..=horizon).contains(&h) || s >= ns || a >= na {
                    return Err(Error::parse(format!("r index out of range: `{line}`")));
                }
                rewards[((h - 1) * ns + s) * na + a] = parse_f(tok[4])?;
            }
            "P" => {
                if tok.len() != 6 {
                    return Err(Error::parse(format!("P line needs `P h s a s' prob`: `{line}`")));
                }
                let (h, s, a, sn) =
                    (parse_u(tok[1])?, parse_u(tok[2])?, parse_u(tok[3])?, parse_u(tok[4])?);
                if !(1..horizon).contains(&h) || s >= ns || a >= na || sn >= ns {
                    return Err(Error::parse(format!("P index out of range: `{line}`")));
                }
                transitions[(((h - 1) * ns + s) * na + a) * ns + sn] = parse_f(tok[5])?;
            }
            other => {
                return Err(Error::parse(format!("unknown record type `{other}`")));
            }
        }
    }
    let initial = initial.unwrap_or_else(|| vec![1.0 / ns as f64; ns]);
    TabularMdp::new(horizon, ns, na, transitions, rewards, initial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};
    use approx::assert_abs_diff_eq;

    fn tiny_chain() -> TabularMdp {
        // 2 states, 2 actions, H = 3. Action 1 moves 0 -> 1 deterministically
        // and pays extra at state 1.
        let ns = 2;
        let na = 2;
        let h = 3;
        let mut trans = vec![0.0; (h - 1) * ns * na * ns];
        for stage in 0..h - 1 {
            for s in 0..ns {
                // action 0: stay; action 1: move to state 1.
                trans[(((stage * ns) + s) * na) * ns + s] = 1.0;
                trans[(((stage * ns) + s) * na + 1) * ns + 1] = 1.0;
            }
        }
        let mut rewards = vec![0.0; h * ns * na];
        for stage in 0..h {
            rewards[((stage * ns) + 1) * na] = 1.0; // r(s=1, a=0) = 1
            rewards[((stage * ns) + 1) * na + 1] = 1.0;
        }
        TabularMdp::new(h, ns, na, trans, rewards, vec![1.0, 0.0]).unwrap()
    }

    /// Independent policy value: forward enumeration of all state paths.
    fn oracle_policy_value(mdp: &TabularMdp, pi: &PolicySeq) -> f64 {
        fn recurse(mdp: &TabularMdp, pi: &PolicySeq, h: usize, s: usize) -> f64 {
            let a = pi.action(h, s);
            let mut v = mdp.reward(h, s, a);
            if h < mdp.horizon() {
                for (sn, p) in mdp.transition_row(h, s, a).iter().enumerate() {
                    if *p > 0.0 {
                        v += p * recurse(mdp, pi, h + 1, sn);
                    }
                }
            }
            v
        }
        mdp.initial_dist()
            .iter()
            .enumerate()
            .map(|(s, mu)| mu * recurse(mdp, pi, 1, s))
            .sum()
    }

    fn all_policies(mdp: &TabularMdp) -> impl Iterator<Item = PolicySeq> + '_ {
        let slots = mdp.horizon() * mdp.n_states();
        let na = mdp.n_actions();
        let count = na.pow(slots as u32);
        (0..count).map(move |mut code| {
            let mut actions = alloc::vec::Vec::with_capacity(slots);
            for _ in 0..slots {
                actions.push(code % na);
                code /= na;
            }
            PolicySeq::new(mdp.horizon(), mdp.n_states(), na, actions).unwrap()
        })
    }

    #[test]
    fn constant_reward_single_state() {
        let mdp = TabularMdp::new(
            3,
            1,
            1,
            vec![1.0, 1.0],
            vec![1.0, 1.0, 1.0],
            vec![1.0],
        )
        .unwrap();
        let q = exact_optimal_q(&mdp);
        assert_abs_diff_eq!(q.at(1, 0, 0), 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q.at(2, 0, 0), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q.at(3, 0, 0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_rewards_give_zero_q() {
        let mut r = stream(11, Domain::Synthetic, 0);
        let mut mdp = random_mdp(&mut r, 4, 3, 2);
        mdp.rewards.iter_mut().for_each(|v| *v = 0.0);
        let q = exact_optimal_q(&mdp);
        assert!(q.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn optimal_q_beats_every_enumerated_policy() {
        for unit in 0..5u64 {
            let mut r = stream(12, Domain::Synthetic, unit);
            let mdp = random_mdp(&mut r, 3, 3, 2);
            let qstar = exact_optimal_q(&mdp);
            let pi_star = greedy_policy(&qstar);
            let j_star = policy_value(&mdp, &pi_star).unwrap();
            let mut best = f64::NEG_INFINITY;
            for pi in all_policies(&mdp) {
                let j = oracle_policy_value(&mdp, &pi);
                best = best.max(j);
                // Dominance of q* over q^pi, stage by stage.
                let qpi = policy_q(&mdp, &pi).unwrap();
                for h in 1..=mdp.horizon() {
                    for (qs, qp) in qstar.stage(h).iter().zip(qpi.stage(h)) {
                        assert!(qs + 1e-10 >= *qp, "q* must dominate q^pi");
                    }
                }
            }
            assert_abs_diff_eq!(j_star, best, epsilon = 1e-10);
        }
    }

    #[test]
    fn operators_match_direct_summation() {
        let mut r = stream(13, Domain::Synthetic, 3);
        let mdp = random_mdp(&mut r, 4, 4, 3);
        let f: Vec<f64> = (0..16 * 3 / 4)
            .map(|_| r.uniform_in(-2.0, 2.0))
            .collect(); // 4 states * 3 actions
        let pi = random_policy(&mut r, &mdp);
        for h in 1..mdp.horizon() {
            let opt = apply_optimality_operator(&mdp, &f, h).unwrap();
            let eva = apply_evaluation_operator(&mdp, &f, &pi, h).unwrap();
            for s in 0..mdp.n_states() {
                for a in 0..mdp.n_actions() {
                    let mut exp_max = 0.0;
                    let mut exp_pi = 0.0;
                    for sn in 0..mdp.n_states() {
                        let p = mdp.transition_row(h, s, a)[sn];
                        let row = &f[sn * 3..(sn + 1) * 3];
                        exp_max += p * row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        exp_pi += p * row[pi.action(h + 1, sn)];
                    }
                    assert_abs_diff_eq!(
                        opt[s * 3 + a],
                        mdp.reward(h, s, a) + exp_max,
                        epsilon = 1e-12
                    );
                    assert_abs_diff_eq!(
                        eva[s * 3 + a],
                        mdp.reward(h, s, a) + exp_pi,
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn evaluation_at_greedy_equals_optimality() {
        let mut r = stream(14, Domain::Synthetic, 4);
        let mdp = random_mdp(&mut r, 4, 3, 3);
        let q = exact_optimal_q(&mdp);
        let pi = greedy_policy(&q);
        for h in 1..mdp.horizon() {
            let a = apply_optimality_operator(&mdp, q.stage(h + 1), h).unwrap();
            let b = apply_evaluation_operator(&mdp, q.stage(h + 1), &pi, h).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn f_zero_reduces_operators_to_rewards() {
        let mut r = stream(15, Domain::Synthetic, 5);
        let mdp = random_mdp(&mut r, 3, 2, 2);
        let f = vec![0.0; 4];
        let pi = random_policy(&mut r, &mdp);
        for h in 1..mdp.horizon() {
            let opt = apply_optimality_operator(&mdp, &f, h).unwrap();
            let eva = apply_evaluation_operator(&mdp, &f, &pi, h).unwrap();
            assert_eq!(opt, mdp.reward_table(h).to_vec());
            assert_eq!(eva, mdp.reward_table(h).to_vec());
        }
    }

    #[test]
    fn policy_value_on_deterministic_path() {
        let mdp = tiny_chain();
        // Always pick action 1: path 0 -> 1 -> 1, rewards 0 + 1 + 1.
        let pi = PolicySeq::new(3, 2, 2, vec![1, 1, 1, 1, 1, 1]).unwrap();
        assert_abs_diff_eq!(policy_value(&mdp, &pi).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(oracle_policy_value(&mdp, &pi), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn policy_value_matches_path_enumeration_on_random_mdps() {
        for unit in 0..10u64 {
            let mut r = stream(16, Domain::Synthetic, unit);
            let mdp = random_mdp(&mut r, 4, 3, 2);
            let pi = random_policy(&mut r, &mdp);
            assert_abs_diff_eq!(
                policy_value(&mdp, &pi).unwrap(),
                oracle_policy_value(&mdp, &pi),
                epsilon = 1e-11
            );
        }
    }

    #[test]
    fn greedy_tie_breaks_to_smallest_index_and_scale_invariant() {
        let mdp = tiny_chain();
        let mut q = StageQ::zeros(&mdp);
        // Stage 1, state 0: tie between actions -> expect action 0.
        q.stage_mut(1).copy_from_slice(&[2.0, 2.0, 0.0, 1.0]);
        q.stage_mut(2).copy_from_slice(&[0.0, 1.0, 5.0, 5.0]);
        q.stage_mut(3).copy_from_slice(&[1.0, 0.0, 3.0, 4.0]);
        let pi = greedy_policy(&q);
        assert_eq!(pi.action(1, 0), 0, "tie must go to the smaller index");
        assert_eq!(pi.action(1, 1), 1);
        assert_eq!(pi.action(2, 0), 1);
        assert_eq!(pi.action(2, 1), 0, "tie at stage 2 state 1");
        assert_eq!(pi.action(3, 1), 1);
        // Positive affine transform leaves the policy unchanged.
        let mut q2 = q.clone();
        for h in 1..=3 {
            for v in q2.stage_mut(h) {
                *v = 3.5 * *v + 7.0;
            }
        }
        assert_eq!(greedy_policy(&q2), pi);
    }

    #[test]
    fn occupation_weights_match_rollout_frequencies() {
        let mut r = stream(17, Domain::Synthetic, 0);
        let mdp = random_mdp(&mut r, 3, 3, 2);
        let pi = random_policy(&mut r, &mdp);
        let n = 100_000usize;
        let mut counts = vec![vec![0usize; 9 * 2]; mdp.horizon()];
        let mut roll = stream(18, Domain::Synthetic, 1);
        for _ in 0..n {
            let traj = sample_trajectory(&mdp, |h, s, _| pi.action(h, s), &mut roll);
            for (h0, &(s, a, _, _)) in traj.iter().enumerate() {
                counts[h0][s * 2 + a] += 1;
            }
        }
        for h in 1..=mdp.horizon() {
            let occ = occupation_weights(&mdp, &pi, h).unwrap();
            assert_abs_diff_eq!(occ.total(), 1.0, epsilon = 1e-12);
            for s in 0..3 {
                for a in 0..2 {
                    let p = occ.weight(s, a);
                    let freq = counts[h - 1][s * 2 + a] as f64 / n as f64;
                    let se = fmath::sqrt((p * (1.0 - p)).max(1e-12) / n as f64);
                    assert!(
                        fmath::abs(freq - p) <= 4.0 * se + 1e-6,
                        "stage {h} pair ({s},{a}): occ {p} vs freq {freq}"
                    );
                }
            }
        }
    }

    #[test]
    fn occupation_stage1_is_initial_mass_on_policy_action() {
        let mut r = stream(19, Domain::Synthetic, 2);
        let mdp = random_mdp(&mut r, 3, 4, 3);
        let pi = random_policy(&mut r, &mdp);
        let occ = occupation_weights(&mdp, &pi, 1).unwrap();
        for s in 0..4 {
            for a in 0..3 {
                let expect = if a == pi.action(1, s) {
                    mdp.initial_dist()[s]
                } else {
                    0.0
                };
                assert_abs_diff_eq!(occ.weight(s, a), expect, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn occupancy_norm_constants_and_support() {
        let mut r = stream(20, Domain::Synthetic, 3);
        let mdp = random_mdp(&mut r, 3, 3, 2);
        let pi = random_policy(&mut r, &mdp);
        let f_const = vec![-2.5; 6];
        for h in 1..=3 {
            assert_abs_diff_eq!(
                occupancy_norm(&mdp, &pi, &f_const, h).unwrap(),
                2.5,
                epsilon = 1e-12
            );
        }
        // Function supported only on actions the policy never takes at h=1.
        let mut f_off = vec![0.0; 6];
        for s in 0..3 {
            for a in 0..2 {
                if a != pi.action(1, s) {
                    f_off[s * 2 + a] = 100.0;
                }
            }
        }
        assert_abs_diff_eq!(occupancy_norm(&mdp, &pi, &f_off, 1).unwrap(), 0.0, epsilon = 1e-15);
        // Random f matches the direct weighted sum.
        let f: Vec<f64> = (0..6).map(|_| r.uniform_in(-1.0, 1.0)).collect();
        let occ = occupation_weights(&mdp, &pi, 2).unwrap();
        let direct: f64 = (0..6).map(|i| occ.as_slice()[i] * f[i] * f[i]).sum();
        assert_abs_diff_eq!(
            occupancy_norm(&mdp, &pi, &f, 2).unwrap(),
            fmath::sqrt(direct),
            epsilon = 1e-14
        );
    }

    #[test]
    fn telescope_inequality_on_random_instances() {
        let mut worst_slack = f64::INFINITY;
        for unit in 0..100u64 {
            let mut r = stream(21, Domain::Synthetic, unit);
            let h = 2 + r.uniform_usize(5); // H in 2..=6
            let ns = 1 + r.uniform_usize(6);
            let na = 1 + r.uniform_usize(4);
            let mdp = random_mdp(&mut r, h, ns, na);
            let mut f_hat = random_stageq(&mut r, &mdp);
            f_hat
                .stage_mut(h)
                .copy_from_slice(mdp.reward_table(h));
            let comparator = random_policy(&mut r, &mdp);
            let pi_hat = greedy_policy(&f_hat);
            let rhs = telescope_rhs(&mdp, &f_hat, &comparator, &pi_hat).unwrap();
            let gap = policy_value(&mdp, &comparator).unwrap()
                - policy_value(&mdp, &pi_hat).unwrap();
            let slack = rhs - gap;
            worst_slack = worst_slack.min(slack);
            assert!(slack >= -1e-9, "telescope violated: gap {gap}, rhs {rhs}");
        }
        // The bound should also be attained (slack ~ 0) when f_hat = q*.
        let mut r = stream(21, Domain::Synthetic, 999);
        let mdp = random_mdp(&mut r, 4, 3, 2);
        let qstar = exact_optimal_q(&mdp);
        let pi_star = greedy_policy(&qstar);
        let rhs = telescope_rhs(&mdp, &qstar, &pi_star, &pi_star).unwrap();
        assert_abs_diff_eq!(rhs, 0.0, epsilon = 1e-12);
        let _ = worst_slack;
    }

    #[test]
    fn telescope_rejects_non_greedy_policy_and_bad_final_stage() {
        let mut r = stream(22, Domain::Synthetic, 0);
        let mdp = random_mdp(&mut r, 3, 3, 2);
        let mut f_hat = random_stageq(&mut r, &mdp);
        f_hat.stage_mut(3).copy_from_slice(mdp.reward_table(3));
        let pi_hat = greedy_policy(&f_hat);
        let comparator = random_policy(&mut r, &mdp);
        // Flip one action away from greedy.
        let mut actions: Vec<usize> = (0..9).map(|i| pi_hat.action(i / 3 + 1, i % 3)).collect();
        actions[0] = 1 - actions[0];
        let not_greedy = PolicySeq::new(3, 3, 2, actions).unwrap();
        assert!(matches!(
            telescope_rhs(&mdp, &f_hat, &comparator, &not_greedy),
            Err(Error::Contract(_))
        ));
        // Perturb the final stage away from r_H.
        let mut bad = f_hat.clone();
        bad.stage_mut(3)[0] += 0.5;
        let pi_bad = greedy_policy(&bad);
        assert!(matches!(
            telescope_rhs(&mdp, &bad, &comparator, &pi_bad),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn multistep_contraction_and_constants() {
        for unit in 0..20u64 {
            let mut r = stream(23, Domain::Synthetic, unit);
            let h_total = 3 + r.uniform_usize(3);
            let mdp = random_mdp(&mut r, h_total, 4, 2);
            let pi_star = greedy_policy(&exact_optimal_q(&mdp));
            let f: Vec<f64> = (0..8).map(|_| r.uniform_in(-3.0, 3.0)).collect();
            for h in 1..h_total {
                for hp in (h + 1)..=h_total {
                    let g = multistep_transition(&mdp, &pi_star, h, hp, &f).unwrap();
                    let lhs = occupancy_norm(&mdp, &pi_star, &g, h).unwrap();
                    let rhs = occupancy_norm(&mdp, &pi_star, &f, hp).unwrap();
                    assert!(lhs <= rhs + 1e-12, "contraction failed: {lhs} > {rhs}");
                }
            }
            // Constant functions pass through untouched.
            let c = vec![0.7; 8];
            let g = multistep_transition(&mdp, &pi_star, 1, h_total, &c).unwrap();
            for v in g {
                assert_abs_diff_eq!(v, 0.7, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn multistep_one_step_on_deterministic_chain() {
        let mdp = tiny_chain();
        let pi = PolicySeq::new(3, 2, 2, vec![1, 1, 0, 0, 0, 0]).unwrap();
        let f: Vec<f64> = vec![10.0, 20.0, 30.0, 40.0];
        let g = multistep_transition(&mdp, &pi, 1, 2, &f).unwrap();
        // (P*_1 f)(s, a) = f(next(s, a), pi_2(next)).
        // Action 0 keeps the state, action 1 jumps to state 1; pi_2 = action 0.
        assert_abs_diff_eq!(g[0], 10.0, epsilon = 1e-15); // s=0,a=0 -> s'=0
        assert_abs_diff_eq!(g[1], 30.0, epsilon = 1e-15); // s=0,a=1 -> s'=1
        assert_abs_diff_eq!(g[2], 30.0, epsilon = 1e-15); // s=1,a=0 -> s'=1
        assert_abs_diff_eq!(g[3], 30.0, epsilon = 1e-15); // s=1,a=1 -> s'=1
    }

    #[test]
    fn uniform_policy_value_matches_mixture_average() {
        // On a 1-state MDP the uniform value is the mean reward per stage:
        // (1+3)/2 + (5+7)/2 = 8.
        let mdp =
            TabularMdp::new(2, 1, 2, vec![1.0, 1.0], vec![1.0, 3.0, 5.0, 7.0], vec![1.0]).unwrap();
        assert_abs_diff_eq!(uniform_policy_value(&mdp), 8.0, epsilon = 1e-12);
    }

    #[test]
    fn validation_rejects_bad_rows_and_renormalizes_tiny_drift() {
        // Row sum off by 2e-12 -> error; off by 5e-13 -> renormalized.
        let bad = TabularMdp::new(
            2,
            2,
            1,
            vec![0.5, 0.5 + 2e-12, 0.5, 0.5],
            vec![0.0; 4],
            vec![0.5, 0.5],
        );
        assert!(matches!(bad, Err(Error::Domain(_))));
        let ok = TabularMdp::new(
            2,
            2,
            1,
            vec![0.5, 0.5 + 5e-13, 0.5, 0.5],
            vec![0.0; 4],
            vec![0.5, 0.5],
        )
        .unwrap();
        let row = ok.transition_row(1, 0, 0);
        assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        // Negative probability is rejected outright.
        let neg = TabularMdp::new(
            2,
            2,
            1,
            vec![1.1, -0.1, 0.5, 0.5],
            vec![0.0; 4],
            vec![0.5, 0.5],
        );
        assert!(neg.is_err());
    }

    #[test]
    fn text_format_round_trips() {
        for unit in 0..5u64 {
            let mut r = stream(24, Domain::Synthetic, unit);
            let mdp = random_mdp(&mut r, 3, 4, 2);
            let text = mdp_to_text(&mdp);
            let back = mdp_from_text(&text).unwrap();
            assert_eq!(mdp.horizon(), back.horizon());
            assert_eq!(mdp.n_states(), back.n_states());
            assert_eq!(mdp.n_actions(), back.n_actions());
            for (a, b) in mdp.transitions.iter().zip(&back.transitions) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-15);
            }
            for (a, b) in mdp.rewards.iter().zip(&back.rewards) {
                assert_eq!(a, b);
            }
            for (a, b) in mdp.initial_dist.iter().zip(&back.initial_dist) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn text_format_rejects_garbage() {
        assert!(mdp_from_text("").is_err());
        assert!(mdp_from_text("2 2").is_err());
        assert!(mdp_from_text("2 2 1\nq 1 0 0 1").is_err());
        assert!(mdp_from_text("2 2 1\nr 5 0 0 1").is_err());
        // Transition row missing -> sums to 0 -> domain error.
        assert!(mdp_from_text("2 2 1\nr 1 0 0 1").is_err());
    }
}
