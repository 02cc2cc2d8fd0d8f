//! Feature maps for linear Q-functions.
//!
//! The continuous-control basis is a triple outer product of trigonometric
//! position features, trigonometric velocity features, and monomial force
//! features `(1, f, f^2, ..., f^deg)`. Because a linear function of those
//! features is a degree-`deg` polynomial in the force for any fixed
//! `(position, velocity)`, the greedy action over a force interval has a
//! closed form: with the default cubic degree it is found among the interval
//! endpoints and the real roots of a quadratic.
//!
//! A one-hot tabular embedding is also provided so the regression stack can
//! be checked exactly against dynamic programming on finite MDPs.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;

/// Product basis specification. `pos_components` trig components in the
/// position (alternating cos(j p) for j = 0.. and sin(j p) for j = 1..),
/// `vel_components` likewise in the velocity, and monomials of degree 0..=
/// `force_degree` in the force. Total dimension is the product.
///
/// Admissible input boxes are carried here so feature evaluation can reject
/// out-of-range states. `unit_rescale` optionally divides every feature by
/// sqrt(d) to bound the feature norm by 1; it is off by default to match the
/// raw trigonometric construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductFeatureSpec {
    pub pos_components: usize,
    pub vel_components: usize,
    pub force_degree: usize,
    pub p_range: (f64, f64),
    pub v_range: (f64, f64),
    pub f_range: (f64, f64),
    pub unit_rescale: bool,
}

impl ProductFeatureSpec {
    pub fn new(
        pos_components: usize,
        vel_components: usize,
        force_degree: usize,
        p_range: (f64, f64),
        v_range: (f64, f64),
        f_range: (f64, f64),
    ) -> Result<Self> {
        if pos_components == 0 || vel_components == 0 {
            return Err(Error::dim("feature component counts must be positive"));
        }
        for (name, (lo, hi)) in [("position", p_range), ("velocity", v_range), ("force", f_range)]
        {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::domain(format!("invalid {name} range [{lo}, {hi}]")));
            }
        }
        Ok(ProductFeatureSpec {
            pos_components,
            vel_components,
            force_degree,
            p_range,
            v_range,
            f_range,
            unit_rescale: false,
        })
    }

    pub fn with_unit_rescale(mut self, on: bool) -> Self {
        self.unit_rescale = on;
        self
    }

    /// Total feature dimension d.
    pub fn dim(&self) -> usize {
        self.pos_components * self.vel_components * (self.force_degree + 1)
    }

    pub(crate) fn scale(&self) -> f64 {
        if self.unit_rescale {
            1.0 / fmath::sqrt(self.dim() as f64)
        } else {
            1.0
        }
    }

    /// Flat index of the (position i, velocity j, force power k) triple:
    /// position-major, force-minor. Weight and dataset files depend on this
    /// order staying fixed.
    #[inline]
    pub fn flatten_index(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.pos_components && j < self.vel_components && k <= self.force_degree);
        (i * self.vel_components + j) * (self.force_degree + 1) + k
    }

    /// Inverse of [`Self::flatten_index`].
    #[inline]
    pub fn unflatten_index(&self, flat: usize) -> (usize, usize, usize) {
        let fdim = self.force_degree + 1;
        let k = flat % fdim;
        let rest = flat / fdim;
        let j = rest % self.vel_components;
        let i = rest / self.vel_components;
        (i, j, k)
    }

    fn check_range(&self, name: &str, x: f64, (lo, hi): (f64, f64)) -> Result<()> {
        if !x.is_finite() || x < lo || x > hi {
            return Err(Error::domain(format!(
                "{name} {x} outside admissible range [{lo}, {hi}]"
            )));
        }
        Ok(())
    }

    /// Position base features: slot 2j holds cos(j p), slot 2j-1 holds
    /// sin(j p) (0-based slots), i.e. cos(0 p), sin(1 p), cos(1 p),
    /// sin(2 p), ...
    pub fn write_position_features(&self, p: f64, out: &mut [f64]) -> Result<()> {
        self.check_range("position", p, self.p_range)?;
        write_trig(p, out, self.pos_components)
    }

    /// Velocity base features, laid out like the position features.
    pub fn write_velocity_features(&self, v: f64, out: &mut [f64]) -> Result<()> {
        self.check_range("velocity", v, self.v_range)?;
        write_trig(v, out, self.vel_components)
    }

    /// Force base features `(1, f, f^2, ..., f^degree)`.
    pub fn write_force_features(&self, f: f64, out: &mut [f64]) -> Result<()> {
        self.check_range("force", f, self.f_range)?;
        if out.len() != self.force_degree + 1 {
            return Err(Error::dim(format!(
                "force feature buffer length {} != {}",
                out.len(),
                self.force_degree + 1
            )));
        }
        let mut acc = 1.0;
        for slot in out.iter_mut() {
            *slot = acc;
            acc *= f;
        }
        Ok(())
    }

    pub fn position_features(&self, p: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.pos_components];
        self.write_position_features(p, &mut out)?;
        Ok(out)
    }

    pub fn velocity_features(&self, v: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.vel_components];
        self.write_velocity_features(v, &mut out)?;
        Ok(out)
    }

    pub fn force_features(&self, f: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.force_degree + 1];
        self.write_force_features(f, &mut out)?;
        Ok(out)
    }

    /// Full feature vector: the flattened triple outer product
    /// `pos (x) vel (x) force`.
    pub fn write_features(&self, p: f64, v: f64, f: f64, out: &mut [f64]) -> Result<()> {
        if out.len() != self.dim() {
            return Err(Error::dim(format!(
                "feature buffer length {} != d = {}",
                out.len(),
                self.dim()
            )));
        }
        let mut pos = vec![0.0; self.pos_components];
        let mut vel = vec![0.0; self.vel_components];
        let mut frc = vec![0.0; self.force_degree + 1];
        self.write_position_features(p, &mut pos)?;
        self.write_velocity_features(v, &mut vel)?;
        self.write_force_features(f, &mut frc)?;
        let scale = self.scale();
        let mut idx = 0;
        for &pi in &pos {
            for &vj in &vel {
                let pv = scale * pi * vj;
                for &fk in &frc {
                    out[idx] = pv * fk;
                    idx += 1;
                }
            }
        }
        Ok(())
    }

    pub fn features(&self, p: f64, v: f64, f: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.write_features(p, v, f, &mut out)?;
        Ok(out)
    }

    /// Polynomial-in-force coefficients of `<w, phi(p, v, .)>`:
    /// `c_k = sum_{i,j} w[(i,j,k)] pos_i(p) vel_j(v)`, so the inner product
    /// equals `sum_k c_k f^k` for every force `f`. Requires `force_degree
    /// <= 3` (the closed-form maximizer is cubic).
    pub fn cubic_coefficients(&self, w: &[f64], p: f64, v: f64) -> Result<CubicCoefficients> {
        let mut scratch = BaseScratch::for_spec(self);
        self.write_position_features(p, &mut scratch.pos)?;
        self.write_velocity_features(v, &mut scratch.vel)?;
        self.cubic_coefficients_from_base(w, &scratch.pos, &scratch.vel)
    }

    /// Same as [`Self::cubic_coefficients`] but from precomputed base
    /// vectors (the fitted-Q loop caches those per sample).
    pub fn cubic_coefficients_from_base(
        &self,
        w: &[f64],
        pos: &[f64],
        vel: &[f64],
    ) -> Result<CubicCoefficients> {
        if w.len() != self.dim() {
            return Err(Error::dim(format!(
                "weight length {} != d = {}",
                w.len(),
                self.dim()
            )));
        }
        if self.force_degree > 3 {
            return Err(Error::dim(format!(
                "closed-form maximization supports force degree <= 3, got {}",
                self.force_degree
            )));
        }
        debug_assert_eq!(pos.len(), self.pos_components);
        debug_assert_eq!(vel.len(), self.vel_components);
        let fdim = self.force_degree + 1;
        let scale = self.scale();
        let mut c = [0.0f64; 4];
        let mut idx = 0;
        for &pi in pos {
            for &vj in vel {
                let pv = scale * pi * vj;
                for ck in c.iter_mut().take(fdim) {
                    *ck += w[idx] * pv;
                    idx += 1;
                }
            }
        }
        Ok(CubicCoefficients {
            c0: c[0],
            c1: c[1],
            c2: c[2],
            c3: c[3],
        })
    }

    /// Greedy force and its value: maximize `<w, phi(p, v, .)>` over the
    /// admissible force interval in closed form.
    pub fn max_force(&self, w: &[f64], p: f64, v: f64) -> Result<(f64, f64)> {
        let c = self.cubic_coefficients(w, p, v)?;
        maximize_cubic(&c, self.f_range.0, self.f_range.1)
    }
}

/// Scratch buffers for repeated base-feature evaluation.
#[derive(Debug, Clone)]
pub struct BaseScratch {
    pub pos: Vec<f64>,
    pub vel: Vec<f64>,
}

impl BaseScratch {
    pub fn for_spec(spec: &ProductFeatureSpec) -> Self {
        BaseScratch {
            pos: vec![0.0; spec.pos_components],
            vel: vec![0.0; spec.vel_components],
        }
    }
}

fn write_trig(x: f64, out: &mut [f64], expected: usize) -> Result<()> {
    if out.len() != expected {
        return Err(Error::dim(format!(
            "trig feature buffer length {} != {expected}",
            out.len()
        )));
    }
    for (slot, value) in out.iter_mut().enumerate() {
        // Even slots: cos(j x) with j = slot/2 (so slot 0 is the constant 1);
        // odd slots: sin(j x) with j = (slot+1)/2.
        let j = ((slot + 1) / 2) as f64;
        *value = if slot % 2 == 0 {
            fmath::cos(j * x)
        } else {
            fmath::sin(j * x)
        };
    }
    Ok(())
}

/// Coefficients of a cubic `c0 + c1 f + c2 f^2 + c3 f^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicCoefficients {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl CubicCoefficients {
    #[inline]
    pub fn eval(&self, f: f64) -> f64 {
        self.c0 + f * (self.c1 + f * (self.c2 + f * self.c3))
    }

    pub fn is_finite(&self) -> bool {
        self.c0.is_finite() && self.c1.is_finite() && self.c2.is_finite() && self.c3.is_finite()
    }
}

/// Threshold below which the cubic term is treated as absent and the
/// maximization falls back to the quadratic/linear cases, avoiding
/// catastrophic cancellation in the root formula.
const CUBIC_EPS: f64 = 1e-14;

/// Maximize a cubic over `[lo, hi]`.
///
/// Candidates are the endpoints plus the real roots of the derivative
/// `c1 + 2 c2 f + 3 c3 f^2` that fall strictly inside the interval; roots
/// come from the numerically stable quadratic formula. Ties (equal values)
/// resolve to the smallest `f`, so results are deterministic.
pub fn maximize_cubic(c: &CubicCoefficients, lo: f64, hi: f64) -> Result<(f64, f64)> {
    if !c.is_finite() {
        return Err(Error::data("cubic coefficients must be finite"));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::domain(format!("invalid interval [{lo}, {hi}]")));
    }
    let mut candidates = [lo, hi, f64::NAN, f64::NAN];
    let mut count = 2;

    if fmath::abs(c.c3) < CUBIC_EPS {
        if fmath::abs(c.c2) >= CUBIC_EPS {
            // Quadratic: single stationary point.
            let root = -c.c1 / (2.0 * c.c2);
            if root > lo && root < hi {
                candidates[count] = root;
                count += 1;
            }
        }
        // Linear or constant: endpoints suffice.
    } else {
        // Stationary points of the cubic: 3 c3 f^2 + 2 c2 f + c1 = 0.
        let a = 3.0 * c.c3;
        let b = 2.0 * c.c2;
        let cc = c.c1;
        let disc = b * b - 4.0 * a * cc;
        if disc >= 0.0 {
            let sq = fmath::sqrt(disc);
            let q = -0.5 * (b + fmath::signum_nonzero(b) * sq);
            let r1 = q / a;
            for root in [Some(r1), (q != 0.0).then(|| cc / q)].into_iter().flatten() {
                if root > lo && root < hi && root.is_finite() {
                    // Skip duplicates from a (near-)double root.
                    if !(0..count).any(|i| candidates[i] == root) {
                        candidates[count] = root;
                        count += 1;
                    }
                }
            }
        }
    }

    // Evaluate in ascending-f order so equal values resolve to the smaller f.
    let cand = &mut candidates[..count];
    cand.sort_by(|x, y| x.partial_cmp(y).expect("candidates are finite"));
    let mut best_f = cand[0];
    let mut best_v = c.eval(cand[0]);
    for &f in cand.iter().skip(1) {
        let v = c.eval(f);
        if v > best_v {
            best_v = v;
            best_f = f;
        }
    }
    Ok((best_f, best_v))
}

/// One-hot embedding of a finite state-action space: `d = S * A` and
/// `phi(s, a)` is the indicator of the flat index `s * A + a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TabularOneHot {
    pub n_states: usize,
    pub n_actions: usize,
}

impl TabularOneHot {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        TabularOneHot {
            n_states,
            n_actions,
        }
    }

    pub fn dim(&self) -> usize {
        self.n_states * self.n_actions
    }

    #[inline]
    pub fn flat(&self, s: usize, a: usize) -> usize {
        debug_assert!(s < self.n_states && a < self.n_actions);
        s * self.n_actions + a
    }

    /// `<w, phi(s, a)>` is just a table lookup.
    #[inline]
    pub fn value(&self, w: &[f64], s: usize, a: usize) -> f64 {
        w[self.flat(s, a)]
    }

    /// Greedy action and value at `s` (smallest index wins ties).
    pub fn max_action(&self, w: &[f64], s: usize) -> (usize, f64) {
        let row = &w[s * self.n_actions..(s + 1) * self.n_actions];
        let mut best = 0usize;
        for (a, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = a;
            }
        }
        (best, row[best])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn paper_spec() -> ProductFeatureSpec {
        ProductFeatureSpec::new(50, 15, 3, (-1.2, 0.6), (-0.07, 0.07), (-1.0, 1.0)).unwrap()
    }

    #[test]
    fn paper_dimension_is_3000() {
        assert_eq!(paper_spec().dim(), 3000);
    }

    #[test]
    fn trig_slots_match_direct_evaluation() {
        let spec = paper_spec();
        let p = 0.3;
        let feats = spec.position_features(p).unwrap();
        assert_eq!(feats.len(), 50);
        // Slot layout: cos(0p), sin(1p), cos(1p), sin(2p), cos(2p), ...
        for slot in 0..50 {
            let j = ((slot + 1) / 2) as f64;
            let expect = if slot % 2 == 0 {
                fmath::cos(j * p)
            } else {
                fmath::sin(j * p)
            };
            assert_abs_diff_eq!(feats[slot], expect, epsilon = 0.0);
        }
        // Highest frequencies present: cos(24p) and sin(25p).
        assert_abs_diff_eq!(feats[48], fmath::cos(24.0 * p), epsilon = 0.0);
        assert_abs_diff_eq!(feats[49], fmath::sin(25.0 * p), epsilon = 0.0);
        // Velocity: 8 cos (j=0..7) and 7 sin (j=1..7).
        let v = 0.05;
        let vf = spec.velocity_features(v).unwrap();
        assert_abs_diff_eq!(vf[14], fmath::cos(7.0 * v), epsilon = 0.0);
        assert_abs_diff_eq!(vf[13], fmath::sin(7.0 * v), epsilon = 0.0);
    }

    #[test]
    fn zero_inputs_give_unit_cos_zero_sin() {
        let spec = paper_spec();
        let pf = spec.position_features(0.0).unwrap();
        let vf = spec.velocity_features(0.0).unwrap();
        for (slot, &x) in pf.iter().enumerate() {
            assert_eq!(x, if slot % 2 == 0 { 1.0 } else { 0.0 });
        }
        for (slot, &x) in vf.iter().enumerate() {
            assert_eq!(x, if slot % 2 == 0 { 1.0 } else { 0.0 });
        }
        // Constant slot stays 1 everywhere.
        for &p in &[-1.2, -0.61, 0.0, 0.44, 0.6] {
            assert_eq!(spec.position_features(p).unwrap()[0], 1.0);
        }
    }

    #[test]
    fn force_features_are_monomials() {
        let spec = paper_spec();
        assert_eq!(spec.force_features(0.0).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(spec.force_features(1.0).unwrap(), vec![1.0, 1.0, 1.0, 1.0]);
        assert_eq!(
            spec.force_features(-0.5).unwrap(),
            vec![1.0, -0.5, 0.25, -0.125]
        );
    }

    #[test]
    fn domain_errors_outside_boxes() {
        let spec = paper_spec();
        assert!(spec.position_features(0.7).is_err());
        assert!(spec.position_features(-1.3).is_err());
        assert!(spec.velocity_features(0.08).is_err());
        assert!(spec.force_features(1.5).is_err());
        assert!(spec.features(0.0, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn full_features_match_triple_loop() {
        let spec = ProductFeatureSpec::new(6, 5, 3, (-1.2, 0.6), (-0.07, 0.07), (-1.0, 1.0)).unwrap();
        let mut r = stream(31, Domain::Synthetic, 0);
        for _ in 0..20 {
            let p = r.uniform_in(-1.2, 0.6);
            let v = r.uniform_in(-0.07, 0.07);
            let f = r.uniform_in(-1.0, 1.0);
            let phi = spec.features(p, v, f).unwrap();
            let pos = spec.position_features(p).unwrap();
            let vel = spec.velocity_features(v).unwrap();
            let frc = spec.force_features(f).unwrap();
            for i in 0..6 {
                for j in 0..5 {
                    for k in 0..4 {
                        let idx = spec.flatten_index(i, j, k);
                        assert_abs_diff_eq!(phi[idx], pos[i] * vel[j] * frc[k], epsilon = 1e-15);
                    }
                }
            }
        }
        // At (0,0,0) the entry is 1 exactly when all three base entries are 1.
        let phi = spec.features(0.0, 0.0, 0.0).unwrap();
        for (idx, &x) in phi.iter().enumerate() {
            let (i, j, k) = spec.unflatten_index(idx);
            let expect = if i % 2 == 0 && j % 2 == 0 && k == 0 { 1.0 } else { 0.0 };
            assert_eq!(x, expect, "triple ({i},{j},{k})");
        }
    }

    #[test]
    fn feature_norm_bounded_by_sqrt_d() {
        let spec = paper_spec();
        let mut r = stream(32, Domain::Synthetic, 1);
        for _ in 0..10 {
            let phi = spec
                .features(
                    r.uniform_in(-1.2, 0.6),
                    r.uniform_in(-0.07, 0.07),
                    r.uniform_in(-1.0, 1.0),
                )
                .unwrap();
            let norm = crate::linalg::norm2(&phi);
            assert!(norm <= fmath::sqrt(3000.0) + 1e-9);
        }
        // With unit rescaling the norm drops below 1.
        let scaled = paper_spec().with_unit_rescale(true);
        let phi = scaled.features(0.3, 0.01, -0.4).unwrap();
        assert!(crate::linalg::norm2(&phi) <= 1.0 + 1e-12);
    }

    #[test]
    fn cubic_coefficients_reproduce_inner_products() {
        let spec = ProductFeatureSpec::new(8, 5, 3, (-1.2, 0.6), (-0.07, 0.07), (-1.0, 1.0)).unwrap();
        let mut r = stream(33, Domain::Synthetic, 2);
        let w: Vec<f64> = (0..spec.dim()).map(|_| r.uniform_in(-1.0, 1.0)).collect();
        for _ in 0..10 {
            let p = r.uniform_in(-1.2, 0.6);
            let v = r.uniform_in(-0.07, 0.07);
            let c = spec.cubic_coefficients(&w, p, v).unwrap();
            for _ in 0..10 {
                let f = r.uniform_in(-1.0, 1.0);
                let phi = spec.features(p, v, f).unwrap();
                let direct = crate::linalg::dot(&w, &phi);
                assert_abs_diff_eq!(c.eval(f), direct, epsilon = 1e-10);
            }
        }
        // One-hot weight picks out a single product.
        let mut w1 = vec![0.0; spec.dim()];
        let idx = spec.flatten_index(3, 2, 2);
        w1[idx] = 1.0;
        let (p, v) = (0.1, -0.03);
        let c = spec.cubic_coefficients(&w1, p, v).unwrap();
        let pos = spec.position_features(p).unwrap();
        let vel = spec.velocity_features(v).unwrap();
        assert_abs_diff_eq!(c.c2, pos[3] * vel[2], epsilon = 1e-15);
        assert_abs_diff_eq!(c.c0, 0.0, epsilon = 0.0);
        assert_abs_diff_eq!(c.c1, 0.0, epsilon = 0.0);
        assert_abs_diff_eq!(c.c3, 0.0, epsilon = 0.0);
        // Zero weights -> zero coefficients.
        let z = spec.cubic_coefficients(&vec![0.0; spec.dim()], p, v).unwrap();
        assert_eq!((z.c0, z.c1, z.c2, z.c3), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn inner_product_is_cubic_in_force() {
        // Fourth finite difference of a cubic is 0.
        let spec = ProductFeatureSpec::new(10, 7, 3, (-1.2, 0.6), (-0.07, 0.07), (-1.0, 1.0)).unwrap();
        let mut r = stream(34, Domain::Synthetic, 3);
        let w: Vec<f64> = (0..spec.dim()).map(|_| r.uniform_in(-1.0, 1.0)).collect();
        let (p, v) = (-0.55, 0.044);
        let g = |f: f64| crate::linalg::dot(&w, &spec.features(p, v, f).unwrap());
        let d4 = g(-0.2) - 4.0 * g(-0.1) + 6.0 * g(0.0) - 4.0 * g(0.1) + g(0.2);
        assert!(fmath::abs(d4) < 1e-9, "fourth difference {d4}");
    }

    #[test]
    fn maximize_cubic_trivial_cases() {
        let lin = CubicCoefficients { c0: 0.0, c1: 1.0, c2: 0.0, c3: 0.0 };
        assert_eq!(maximize_cubic(&lin, -1.0, 1.0).unwrap(), (1.0, 1.0));
        let conc = CubicCoefficients { c0: 0.0, c1: 0.0, c2: -1.0, c3: 0.0 };
        assert_eq!(maximize_cubic(&conc, -1.0, 1.0).unwrap(), (0.0, 0.0));
        // Constant cubic: tie between endpoints resolves to the smaller f.
        let flat = CubicCoefficients { c0: 2.0, c1: 0.0, c2: 0.0, c3: 0.0 };
        assert_eq!(maximize_cubic(&flat, -0.5, 0.75).unwrap(), (-0.5, 2.0));
        // Non-finite input is rejected.
        let bad = CubicCoefficients { c0: f64::NAN, c1: 0.0, c2: 0.0, c3: 0.0 };
        assert!(maximize_cubic(&bad, -1.0, 1.0).is_err());
        assert!(maximize_cubic(&lin, 1.0, 1.0).is_err());
    }

    #[test]
    fn maximize_cubic_matches_dense_grid() {
        let mut r = stream(35, Domain::Synthetic, 4);
        let grid_n = 100_000usize;
        for _ in 0..50 {
            let c = CubicCoefficients {
                c0: r.uniform_in(-2.0, 2.0),
                c1: r.uniform_in(-2.0, 2.0),
                c2: r.uniform_in(-2.0, 2.0),
                c3: r.uniform_in(-2.0, 2.0),
            };
            let (lo, hi) = (-1.0, 1.0);
            let (f_star, value) = maximize_cubic(&c, lo, hi).unwrap();
            let mut grid_best = f64::NEG_INFINITY;
            let mut grid_arg = lo;
            for g in 0..=grid_n {
                let f = lo + (hi - lo) * g as f64 / grid_n as f64;
                let v = c.eval(f);
                if v > grid_best {
                    grid_best = v;
                    grid_arg = f;
                }
            }
            assert!(
                value >= grid_best - 1e-9,
                "closed form {value} below grid {grid_best}"
            );
            assert!(
                fmath::abs(f_star - grid_arg) <= (hi - lo) / grid_n as f64 + 1e-9,
                "argmax {f_star} vs grid {grid_arg}"
            );
        }
    }

    #[test]
    fn maximize_dominates_random_feasible_points() {
        let mut r = stream(36, Domain::Synthetic, 5);
        for _ in 0..100 {
            let c = CubicCoefficients {
                c0: r.uniform_in(-1.0, 1.0),
                c1: r.uniform_in(-1.0, 1.0),
                c2: r.uniform_in(-1.0, 1.0),
                c3: r.uniform_in(-1.0, 1.0),
            };
            let (_, value) = maximize_cubic(&c, -1.0, 1.0).unwrap();
            for _ in 0..10 {
                let f = r.uniform_in(-1.0, 1.0);
                assert!(value >= c.eval(f) - 1e-12);
            }
        }
    }

    #[test]
    fn one_hot_embedding_basics() {
        let oh = TabularOneHot::new(3, 4);
        assert_eq!(oh.dim(), 12);
        let mut w = vec![0.0; 12];
        w[oh.flat(2, 1)] = 5.0;
        w[oh.flat(2, 3)] = 5.0;
        assert_eq!(oh.value(&w, 2, 1), 5.0);
        assert_eq!(oh.value(&w, 0, 0), 0.0);
        // Tie at state 2 between actions 1 and 3 -> smaller index.
        assert_eq!(oh.max_action(&w, 2), (1, 5.0));
        // Distinct pairs are orthogonal and the full Gram is the identity.
        for s in 0..3 {
            for a in 0..4 {
                let mut phi = vec![0.0; 12];
                phi[oh.flat(s, a)] = 1.0;
                for s2 in 0..3 {
                    for a2 in 0..4 {
                        let mut phi2 = vec![0.0; 12];
                        phi2[oh.flat(s2, a2)] = 1.0;
                        let d = crate::linalg::dot(&phi, &phi2);
                        assert_eq!(d, if (s, a) == (s2, a2) { 1.0 } else { 0.0 });
                    }
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn flatten_round_trips(i in 0usize..50, j in 0usize..15, k in 0usize..4) {
            let spec = paper_spec();
            let flat = spec.flatten_index(i, j, k);
            prop_assert!(flat < spec.dim());
            prop_assert_eq!(spec.unflatten_index(flat), (i, j, k));
        }

        #[test]
        fn maximize_cubic_never_below_endpoints(
            c0 in -3.0f64..3.0, c1 in -3.0f64..3.0,
            c2 in -3.0f64..3.0, c3 in -3.0f64..3.0,
            lo in -2.0f64..0.0, width in 0.1f64..3.0,
        ) {
            let c = CubicCoefficients { c0, c1, c2, c3 };
            let hi = lo + width;
            let (f_star, value) = maximize_cubic(&c, lo, hi).unwrap();
            prop_assert!(f_star >= lo && f_star <= hi);
            prop_assert!(value + 1e-12 >= c.eval(lo));
            prop_assert!(value + 1e-12 >= c.eval(hi));
            prop_assert!((value - c.eval(f_star)).abs() < 1e-12);
        }
    }
}
