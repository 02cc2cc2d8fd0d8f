//! Scalar statistics utilities: log-gamma, the regularized incomplete beta
//! function, Student-t tail quantiles, and simple least-squares lines with
//! t-based confidence intervals. These back the log-log rate fitter.

use alloc::format;

use crate::error::{Error, Result};
use crate::fmath;

/// Natural log of the gamma function (Lanczos approximation, g = 7, 9
/// terms; accurate to ~1e-13 over the positive axis).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    const LN_SQRT_TWO_PI: f64 = 0.91893853320467274178;
    if x < 0.5 {
        // Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x).
        let pi = core::f64::consts::PI;
        return fmath::ln(pi / fmath::sin(pi * x)) - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = 0.99999999999980993;
    for (i, c) in COEFFS.iter().enumerate() {
        acc += c / (z + (i + 1) as f64);
    }
    let t = z + 7.5;
    LN_SQRT_TWO_PI + (z + 0.5) * fmath::ln(t) - t + fmath::ln(acc)
}

/// Continued-fraction core of the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const FPMIN: f64 = 1e-300;
    const EPS: f64 = 3e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if fmath::abs(d) < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=300usize {
        let m_f = m as f64;
        let m2 = 2.0 * m_f;
        let aa = m_f * (b - m_f) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if fmath::abs(d) < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if fmath::abs(c) < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m_f) * (qab + m_f) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if fmath::abs(d) < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if fmath::abs(c) < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if fmath::abs(del - 1.0) < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b) for a, b > 0 and x in
/// [0, 1].
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::domain(format!(
            "incomplete beta needs a, b > 0, got a={a}, b={b}"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("incomplete beta needs x in [0,1], got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b)
        + a * fmath::ln(x)
        + b * fmath::ln(1.0 - x);
    let front = fmath::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_cf(a, b, x) / a)
    } else {
        Ok(1.0 - front * beta_cf(b, a, 1.0 - x) / b)
    }
}

/// CDF of Student's t distribution with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) {
        return Err(Error::domain(format!("t CDF needs df > 0, got {df}")));
    }
    let x = df / (df + t * t);
    let tail = 0.5 * reg_inc_beta(0.5 * df, 0.5, x)?;
    Ok(if t >= 0.0 { 1.0 - tail } else { tail })
}

/// Quantile (inverse CDF) of Student's t distribution; `p` in (0, 1).
///
/// Solved by symmetric bisection on the CDF — the fitter only needs a few
/// evaluations, so robustness wins over speed.
pub fn student_t_quantile(p: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) {
        return Err(Error::domain(format!("t quantile needs df > 0, got {df}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("t quantile needs p in (0,1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Reduce to the upper half by symmetry.
    let (target, negate) = if p < 0.5 { (1.0 - p, true) } else { (p, false) };
    let mut lo = 0.0f64;
    let mut hi = 2.0f64;
    while student_t_cdf(hi, df)? < target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::estimation(format!(
                "t quantile bracketing failed for p={p}, df={df}"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_cdf(mid, df)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * (1.0 + hi) {
            break;
        }
    }
    let q = 0.5 * (lo + hi);
    Ok(if negate { -q } else { q })
}

/// Ordinary least squares fit of `y = intercept + slope * x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleOls {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (0 for a perfect fit).
    pub slope_se: f64,
    /// Residual degrees of freedom (n - 2).
    pub df: usize,
    pub n: usize,
}

/// Fit a straight line by least squares. Needs at least 3 points so the
/// slope has a positive number of residual degrees of freedom.
pub fn ols_line(xs: &[f64], ys: &[f64]) -> Result<SimpleOls> {
    if xs.len() != ys.len() {
        return Err(Error::dim(format!(
            "x/y length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::data(format!("least-squares line needs >= 3 points, got {n}")));
    }
    if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
        return Err(Error::data("least-squares inputs must be finite"));
    }
    let nf = n as f64;
    let mean_x = xs.iter().sum::<f64>() / nf;
    let mean_y = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx <= 0.0 {
        return Err(Error::data("least-squares x values are all identical"));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let mut ssr = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - intercept - slope * x;
        ssr += r * r;
    }
    let df = n - 2;
    let sigma2 = (ssr / df as f64).max(0.0);
    let slope_se = fmath::sqrt(sigma2 / sxx);
    Ok(SimpleOls {
        slope,
        intercept,
        slope_se,
        df,
        n,
    })
}

impl SimpleOls {
    /// Two-sided t confidence interval for the slope at the given level
    /// (e.g. 0.95).
    pub fn slope_interval(&self, level: f64) -> Result<(f64, f64)> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::domain(format!(
                "confidence level must be in (0,1), got {level}"
            )));
        }
        let q = student_t_quantile(0.5 + 0.5 * level, self.df as f64)?;
        Ok((self.slope - q * self.slope_se, self.slope + q * self.slope_se))
    }
}

/// Mean and standard error of a sample, reduced in index order so parallel
/// callers that preserve ordering get bitwise-identical results.
pub fn mean_and_stderr(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::data("mean of an empty sample"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("sample contains non-finite values"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let var = ss / (n - 1.0);
    Ok((mean, fmath::sqrt(var / n)))
}
