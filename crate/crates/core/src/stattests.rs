//! One-sample Kolmogorov-Smirnov, Cramér-von Mises and Anderson-Darling
//! tests against fully specified continuous nulls.
//!
//! All p-values are asymptotic. The limiting CDFs are evaluated from their
//! classical series representations:
//!
//! ```text
//! K(x)   = 1 - 2 Σ_{j≥1} (-1)^{j-1} exp(-2 j² x²)
//! W²(x)  = 1/(π√x) Σ_{j≥0} c_j √(4j+1) exp(-y_j) K_{1/4}(y_j),  y_j = (4j+1)²/(16x)
//! A²(z)  = √(2π)/z Σ_{j≥0} c_j (4j+1) exp(-(4j+1)²π²/(8z))
//!            · ∫_0^∞ exp(z/(8(w²+1)) - (4j+1)²π²w²/(8z)) dw
//! ```
//!
//! with `c_j = Γ(j+½)/(Γ(½) j!)`. The Bessel function and the inner
//! integral are both done by adaptive quadrature.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::quad::adaptive_simpson;

/// Clip applied to `F(x)` before taking logs in the AD statistic.
pub const AD_CLIP: f64 = 1e-15;

const SERIES_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullDistribution {
    StdNormal,
    StdExponential,
    Uniform01,
}

impl NullDistribution {
    pub fn cdf(self, x: f64) -> f64 {
        match self {
            NullDistribution::StdNormal => 0.5 * erfc(-x / SQRT_2),
            NullDistribution::StdExponential => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-x).exp_m1()
                }
            }
            NullDistribution::Uniform01 => x.clamp(0.0, 1.0),
        }
    }

    /// Quantile function; `p` must lie in `(0, 1)`.
    pub fn quantile(self, p: f64) -> f64 {
        match self {
            NullDistribution::StdNormal => {
                // polish the library inverse with Newton steps on the erfc cdf
                let mut x = std_normal().inverse_cdf(p);
                for _ in 0..3 {
                    if !x.is_finite() {
                        break;
                    }
                    let dens = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
                    if dens == 0.0 {
                        break;
                    }
                    x -= (self.cdf(x) - p) / dens;
                }
                x
            }
            NullDistribution::StdExponential => -(-p).ln_1p(),
            NullDistribution::Uniform01 => p,
        }
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal parameters are valid")
}

/// The three empirical-process statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GofTest {
    Ks,
    Cvm,
    Ad,
}

impl GofTest {
    pub const ALL: [GofTest; 3] = [GofTest::Ks, GofTest::Cvm, GofTest::Ad];

    pub fn run(self, sample: &[f64], null: NullDistribution) -> Result<TestOutcome> {
        match self {
            GofTest::Ks => ks_test(sample, null),
            GofTest::Cvm => cvm_test(sample, null),
            GofTest::Ad => ad_test(sample, null),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GofTest::Ks => "ks",
            GofTest::Cvm => "cvm",
            GofTest::Ad => "ad",
        }
    }
}

impl fmt::Display for GofTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GofTest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ks" => Ok(GofTest::Ks),
            "cvm" => Ok(GofTest::Cvm),
            "ad" => Ok(GofTest::Ad),
            other => invalid(format!("unknown test `{other}` (expected ks, cvm or ad)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Sorted null-CDF values of the sample.
fn probability_transform(sample: &[f64], null: NullDistribution) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return invalid("empty sample");
    }
    if let Some(i) = sample.iter().position(|x| !x.is_finite()) {
        return invalid(format!("non-finite sample value at index {i}"));
    }
    let mut u: Vec<f64> = sample.iter().map(|&x| null.cdf(x)).collect();
    u.sort_by(f64::total_cmp);
    Ok(u)
}

pub fn ks_statistic_uniform(u: &[f64]) -> f64 {
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, &f)| {
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

pub fn cvm_statistic_uniform(u: &[f64]) -> f64 {
    let n = u.len() as f64;
    let sum: f64 = u
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let d = f - (2 * i + 1) as f64 / (2.0 * n);
            d * d
        })
        .sum();
    1.0 / (12.0 * n) + sum
}

pub fn ad_statistic_uniform(u: &[f64]) -> f64 {
    let len = u.len();
    let n = len as f64;
    let s: f64 = (0..len)
        .map(|i| {
            let lo = u[i].clamp(AD_CLIP, 1.0 - AD_CLIP);
            let hi = u[len - 1 - i].clamp(AD_CLIP, 1.0 - AD_CLIP);
            (2 * i + 1) as f64 * (lo.ln() + (-hi).ln_1p())
        })
        .sum();
    -n - s / n
}

/// KS test; the statistic is `D = sup |F_n - F|`, the p-value `1 - K(√n D)`.
pub fn ks_test(sample: &[f64], null: NullDistribution) -> Result<TestOutcome> {
    let u = probability_transform(sample, null)?;
    let d = ks_statistic_uniform(&u);
    let n = u.len();
    Ok(TestOutcome {
        statistic: d,
        p_value: kolmogorov_sf((n as f64).sqrt() * d),
        n,
    })
}

pub fn cvm_test(sample: &[f64], null: NullDistribution) -> Result<TestOutcome> {
    let u = probability_transform(sample, null)?;
    let w2 = cvm_statistic_uniform(&u);
    Ok(TestOutcome {
        statistic: w2,
        p_value: (1.0 - cvm_cdf(w2)).clamp(0.0, 1.0),
        n: u.len(),
    })
}

pub fn ad_test(sample: &[f64], null: NullDistribution) -> Result<TestOutcome> {
    let u = probability_transform(sample, null)?;
    let a2 = ad_statistic_uniform(&u);
    Ok(TestOutcome {
        statistic: a2,
        p_value: (1.0 - ad_cdf(a2)).clamp(0.0, 1.0),
        n: u.len(),
    })
}

/// Kolmogorov distribution function.
///
/// Below `x = 1` the alternating series converges slowly, so the
/// theta-function dual `√(2π)/x Σ exp(-(2j-1)²π²/(8x²))` is used there.
pub fn kolmogorov_cdf(x: f64) -> f64 {
    if x <= 0.0 || x.is_nan() {
        return 0.0;
    }
    if x < 1.0 {
        let mut sum = 0.0;
        for j in 1..200 {
            let k = (2 * j - 1) as f64;
            let term = (-k * k * PI * PI / (8.0 * x * x)).exp();
            sum += term;
            if term < SERIES_TOL * sum.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        ((2.0 * PI).sqrt() / x * sum).min(1.0)
    } else {
        1.0 - kolmogorov_alternating(x)
    }
}

/// `1 - K(x)`, accurate in the upper tail.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 || x.is_nan() {
        return 1.0;
    }
    if x < 1.0 {
        (1.0 - kolmogorov_cdf(x)).clamp(0.0, 1.0)
    } else {
        kolmogorov_alternating(x).clamp(0.0, 1.0)
    }
}

fn kolmogorov_alternating(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..200 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * x * x).exp();
        sum += sign * term;
        if term < SERIES_TOL {
            break;
        }
        sign = -sign;
    }
    2.0 * sum
}

/// Quantile of the Kolmogorov distribution by bisection.
pub fn kolmogorov_quantile(p: f64) -> f64 {
    bisect_cdf(kolmogorov_cdf, p, 0.0, 10.0)
}

pub(crate) fn bisect_cdf(cdf: impl Fn(f64) -> f64, p: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `Γ(j+½) / (Γ(½) j!)`, built by the ratio recurrence.
fn half_binomial_coefficients() -> impl Iterator<Item = f64> {
    (0u32..).scan(1.0f64, |c, j| {
        let out = *c;
        *c *= (j as f64 + 0.5) / (j as f64 + 1.0);
        Some(out)
    })
}

/// `exp(y) K_{1/4}(y)` from `∫_0^∞ exp(-y (cosh t - 1)) cosh(t/4) dt`.
fn scaled_bessel_k_quarter(y: f64) -> f64 {
    // Integrand below e^-45 past this point.
    let t_max = (1.0 + 45.0 / y).acosh();
    adaptive_simpson(
        |t| (-y * (t.cosh() - 1.0)).exp() * (0.25 * t).cosh(),
        0.0,
        t_max,
        1e-13,
    )
}

/// Limiting distribution function of the Cramér-von Mises statistic `W²`.
pub fn cvm_cdf(x: f64) -> f64 {
    if x <= 0.0 || x.is_nan() {
        return 0.0;
    }
    if x > 20.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for (j, c) in half_binomial_coefficients().enumerate().take(400) {
        let k = (4 * j + 1) as f64;
        let y = k * k / (16.0 * x);
        let damp = (-2.0 * y).exp();
        if damp == 0.0 {
            break;
        }
        let term = c * k.sqrt() * damp * scaled_bessel_k_quarter(y);
        sum += term;
        if term < SERIES_TOL * sum {
            break;
        }
    }
    (sum / (PI * x.sqrt())).clamp(0.0, 1.0)
}

/// Limiting distribution function of the Anderson-Darling statistic `A²`.
pub fn ad_cdf(z: f64) -> f64 {
    if z <= 0.0 || z.is_nan() {
        return 0.0;
    }
    if z > 60.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for (j, c) in half_binomial_coefficients().enumerate().take(400) {
        let k = (4 * j + 1) as f64;
        let a = k * k * PI * PI / (8.0 * z);
        let peak = z / 8.0 - a;
        if peak < -745.0 {
            if j > 0 {
                break;
            }
            continue;
        }
        // exp(z/(8(1+w²)) - a(1+w²)); the log-integrand is at most `peak`.
        let w_max = ((z / 8.0 + 45.0) / a).sqrt();
        let scale = peak.exp();
        let integral = adaptive_simpson(
            |w| {
                let s = 1.0 + w * w;
                (z / (8.0 * s) - a * s).exp()
            },
            0.0,
            w_max,
            1e-13 * scale.max(1e-300),
        );
        let term = c * k * integral;
        sum += if j % 2 == 0 { term } else { -term };
        if term < SERIES_TOL * sum.abs() && j > 2 {
            break;
        }
    }
    ((2.0 * PI).sqrt() / z * sum).clamp(0.0, 1.0)
}

/// Quantile of the asymptotic `W²` law.
pub fn cvm_quantile(p: f64) -> f64 {
    bisect_cdf(cvm_cdf, p, 0.0, 20.0)
}

/// Quantile of the asymptotic `A²` law.
pub fn ad_quantile(p: f64) -> f64 {
    bisect_cdf(ad_cdf, p, 0.0, 60.0)
}
