//! Compensated empirical process, innovation martingale transform, and the
//! three testing procedures built on them.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimate::FitResult;
use crate::io::fmt_num;
use crate::model::{ModelSpec, Realization};
use crate::stattests::{GofTest, NullDistribution};

/// Default fraction of the unit interval kept by the transform.
pub const DEFAULT_TAU: f64 = 0.9;
/// Smallest admissible grid.
pub const MIN_GRID: usize = 256;

/// Grid size used when none is given: `max(4096, 64 n)`.
pub fn default_grid(n: usize) -> usize {
    4096.max(64 * n)
}

/// A vector-valued function sampled on the equispaced grid `u_j = j/m`,
/// `j = 0..=last`, where `last = m` for a full path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFunction {
    m: usize,
    /// `values[k][j]`: coordinate `k` at grid point `j`.
    values: Vec<Vec<f64>>,
    /// Time scale `T` the path was built from.
    pub scale: f64,
}

impl PathFunction {
    /// Builds a path from per-coordinate columns sampled at `j/m`.
    pub fn new(m: usize, values: Vec<Vec<f64>>, scale: f64) -> Result<Self> {
        if m == 0 || values.is_empty() {
            return invalid("a path needs a nonempty grid and at least one coordinate");
        }
        let len = values[0].len();
        if len == 0 || len > m + 1 || values.iter().any(|c| c.len() != len) {
            return invalid("path columns must share a length between 1 and m+1");
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain("path values must be finite".into()));
        }
        Ok(PathFunction { m, values, scale })
    }

    /// Samples `f(u, k)` on the full grid `0..=m`.
    pub fn from_fn(m: usize, dim: usize, scale: f64, f: impl Fn(f64, usize) -> f64) -> Result<Self> {
        let values = (0..dim)
            .map(|k| (0..=m).map(|j| f(j as f64 / m as f64, k)).collect())
            .collect();
        Self::new(m, values, scale)
    }

    /// Grid resolution `m` (spacing `1/m`).
    pub fn resolution(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Number of grid points stored.
    pub fn len(&self) -> usize {
        self.values[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.len()).map(|j| j as f64 / self.m as f64).collect()
    }

    /// Right end of the stored domain.
    pub fn end(&self) -> f64 {
        (self.len() - 1) as f64 / self.m as f64
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    /// Value of coordinate `k` at `u`, linearly interpolated between grid points.
    pub fn at(&self, u: f64, k: usize) -> Result<f64> {
        let pos = u * self.m as f64;
        let last = self.len() - 1;
        if !(pos >= 0.0) || pos > last as f64 + 1e-9 {
            return Err(Error::Domain(format!(
                "u = {u} outside the path domain [0, {}]",
                self.end()
            )));
        }
        let col = &self.values[k];
        let j = (pos.floor() as usize).min(last);
        if j == last {
            return Ok(col[last]);
        }
        let frac = pos - j as f64;
        Ok(col[j] + frac * (col[j + 1] - col[j]))
    }

    /// Writes `u,value_1,...,value_d` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["u".to_string()];
        header.extend((1..=self.dim()).map(|k| format!("value_{k}")));
        w.write_record(&header)?;
        for j in 0..self.len() {
            let mut row = vec![fmt_num(j as f64 / self.m as f64)];
            row.extend(self.values.iter().map(|c| fmt_num(c[j])));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Scaled increments `z[i][k]` of a path.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSample {
    pub z: Vec<Vec<f64>>,
    pub n: usize,
    pub tau: f64,
}

impl IncrementSample {
    /// All `n·d` entries in row order.
    pub fn pooled(&self) -> Vec<f64> {
        self.z.iter().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Procedure {
    Transform,
    Naive,
    Rtc,
}

impl Procedure {
    pub const ALL: [Procedure; 3] = [Procedure::Transform, Procedure::Naive, Procedure::Rtc];

    pub fn name(self) -> &'static str {
        match self {
            Procedure::Transform => "transform",
            Procedure::Naive => "naive",
            Procedure::Rtc => "rtc",
        }
    }
}

impl fmt::Display for Procedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Procedure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "transform" | "transformation" => Ok(Procedure::Transform),
            "naive" => Ok(Procedure::Naive),
            "rtc" => Ok(Procedure::Rtc),
            _ => invalid(format!("unknown procedure '{s}' (transform, naive, rtc)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub procedure: Procedure,
    pub test: GofTest,
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub notes: String,
}

/// `η̂(u_j) = (N(u_j T) - Λ(u_j T)) / √T` on `m+1` grid points.
///
/// Counts are right-continuous: an event exactly at `u_j T` is included.
pub fn compensated_process(r: &Realization, model: &ModelSpec, m: usize) -> Result<PathFunction> {
    if m < MIN_GRID {
        return invalid(format!("grid size {m} below the minimum {MIN_GRID}"));
    }
    let t = r.horizon();
    if !(t > 0.0) {
        return invalid("the observation window must have positive length");
    }
    let query: Vec<f64> = (0..=m)
        .map(|j| if j == m { t } else { t * j as f64 / m as f64 })
        .collect();
    let comp = model.compensator_at(r, &query)?;
    let times = r.times();
    let scale = t.sqrt();
    let mut values = Vec::with_capacity(m + 1);
    let mut i = 0;
    for (q, c) in query.iter().zip(&comp) {
        while i < times.len() && times[i] <= *q {
            i += 1;
        }
        values.push((i as f64 - c) / scale);
    }
    PathFunction::new(m, vec![values], t)
}

fn check_mu(mu_hat: &[f64], dim: usize) -> Result<()> {
    if mu_hat.len() != dim {
        return invalid(format!("mu_hat has {} entries for {dim} coordinates", mu_hat.len()));
    }
    if let Some(bad) = mu_hat.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return invalid(format!("mu_hat must be positive, got {bad}"));
    }
    Ok(())
}

/// Number of grid points covering `[0, tau]`.
fn cover(m: usize, tau: f64) -> usize {
    ((tau * m as f64) - 1e-9).ceil().max(0.0) as usize
}

fn check_tau(tau: f64, eta: &PathFunction) -> Result<usize> {
    let m = eta.resolution();
    let bound = 1.0 - 2.0 / m as f64;
    if !(tau > 0.0 && tau < 1.0) {
        return invalid(format!("tau = {tau} must lie in (0, 1)"));
    }
    if tau > bound {
        return invalid(format!(
            "tau = {tau} exceeds 1 - 2/m = {bound} for grid size m = {m}"
        ));
    }
    if eta.len() != m + 1 {
        return invalid("the transform needs the path on the full unit interval");
    }
    Ok(cover(m, tau))
}

/// Applies the innovation martingale transform on `[0, tau]`:
/// `Ŵ(u) = (η(u) - ∫_0^u (η(1) - η(v)) / (1 - v) dv) / √μ̂`,
/// the inner integral by the trapezoid rule on the path grid.
pub fn martingale_transform(eta: &PathFunction, mu_hat: &[f64], tau: f64) -> Result<PathFunction> {
    check_mu(mu_hat, eta.dim())?;
    let last = check_tau(tau, eta)?;
    let m = eta.resolution();
    let h = 1.0 / m as f64;
    let values = eta
        .values
        .iter()
        .zip(mu_hat)
        .map(|(col, &mu)| {
            let end = col[m];
            let kernel = |j: usize| (end - col[j]) / (1.0 - j as f64 * h);
            let s = mu.sqrt();
            let mut out = Vec::with_capacity(last + 1);
            let mut integral = 0.0;
            let mut prev = kernel(0);
            out.push(col[0] / s);
            for j in 1..=last {
                let cur = kernel(j);
                integral += 0.5 * h * (prev + cur);
                prev = cur;
                out.push((col[j] - integral) / s);
            }
            out
        })
        .collect();
    PathFunction::new(m, values, eta.scale)
}

/// `η̂ / √μ̂` on `[0, tau]`, the untransformed comparison path.
pub fn standardize(eta: &PathFunction, mu_hat: &[f64], tau: f64) -> Result<PathFunction> {
    check_mu(mu_hat, eta.dim())?;
    let last = check_tau(tau, eta)?;
    let values = eta
        .values
        .iter()
        .zip(mu_hat)
        .map(|(col, &mu)| col[..=last].iter().map(|v| v / mu.sqrt()).collect())
        .collect();
    PathFunction::new(eta.resolution(), values, eta.scale)
}

/// `z[i][k] = √(n/τ) (W(iτ/n) - W((i-1)τ/n))`, `i = 1..=n`.
pub fn increments(w: &PathFunction, n: usize, tau: f64) -> Result<IncrementSample> {
    if n == 0 {
        return invalid("need at least one increment");
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return invalid(format!("tau = {tau} must lie in (0, 1]"));
    }
    if n > w.resolution() / 4 {
        return invalid(format!(
            "n = {n} increments need a grid of at least {} points, have m = {}",
            4 * n,
            w.resolution()
        ));
    }
    if tau > w.end() + 1e-12 {
        return invalid(format!("path covers [0, {}] but tau = {tau}", w.end()));
    }
    let scale = (n as f64 / tau).sqrt();
    let mut z = Vec::with_capacity(n);
    let mut prev: Vec<f64> = (0..w.dim()).map(|k| w.at(0.0, k)).collect::<Result<_>>()?;
    for i in 1..=n {
        let u = (i as f64 * tau / n as f64).min(w.end());
        let cur: Vec<f64> = (0..w.dim()).map(|k| w.at(u, k)).collect::<Result<_>>()?;
        z.push(cur.iter().zip(&prev).map(|(a, b)| scale * (a - b)).collect());
        prev = cur;
    }
    Ok(IncrementSample { z, n, tau })
}

/// `max(ceil(c √count_basis), floor_n)`.
pub fn choose_n(count_basis: f64, c: f64, floor_n: usize) -> Result<usize> {
    if !(count_basis > 0.0 && c > 0.0) {
        return invalid(format!(
            "choose_n needs positive count basis and constant, got {count_basis} and {c}"
        ));
    }
    Ok(((c * count_basis.sqrt()).ceil() as usize).max(floor_n))
}

fn mu_hat_of(r: &Realization) -> Result<Vec<f64>> {
    let t = r.horizon();
    let counts = r.counts_by_coord();
    if counts.contains(&0) {
        return Err(Error::InsufficientData(
            "a coordinate without events has no positive rate estimate".into(),
        ));
    }
    Ok(counts.iter().map(|&c| c as f64 / t).collect())
}

fn base_notes(fit: &FitResult, sample: &[f64]) -> String {
    let mut notes = Vec::new();
    if !fit.converged {
        notes.push("fit did not converge".to_string());
    }
    if fit.at_bound.iter().any(|&b| b) {
        notes.push("estimate on the parameter boundary".to_string());
    }
    if sample.windows(2).all(|w| w[0] == w[1]) {
        notes.push("degenerate sample: all increments equal".to_string());
    }
    notes.join("; ")
}

fn path_test(
    procedure: Procedure,
    r: &Realization,
    fit: &FitResult,
    n: usize,
    tau: f64,
    test: GofTest,
    m: Option<usize>,
) -> Result<TestReport> {
    let m = m.unwrap_or_else(|| default_grid(n));
    let model = fit.model()?;
    let eta = compensated_process(r, &model, m)?;
    let mu = mu_hat_of(r)?;
    let w = match procedure {
        Procedure::Transform => martingale_transform(&eta, &mu, tau)?,
        _ => standardize(&eta, &mu, tau)?,
    };
    let sample = increments(&w, n, tau)?.pooled();
    let outcome = test.run(&sample, NullDistribution::StdNormal)?;
    Ok(TestReport {
        procedure,
        test,
        statistic: outcome.statistic,
        p_value: outcome.p_value,
        n_effective: sample.len(),
        notes: base_notes(fit, &sample),
    })
}

/// Transform-based test: compensated process, martingale transform,
/// increments, and a one-sample test against N(0,1).
pub fn transformation_test(
    r: &Realization,
    fit: &FitResult,
    n: usize,
    tau: f64,
    test: GofTest,
) -> Result<TestReport> {
    path_test(Procedure::Transform, r, fit, n, tau, test, None)
}

/// Same chain with the transform left out.
pub fn naive_test(
    r: &Realization,
    fit: &FitResult,
    n: usize,
    tau: f64,
    test: GofTest,
) -> Result<TestReport> {
    path_test(Procedure::Naive, r, fit, n, tau, test, None)
}

/// Either path-based procedure on an explicit grid size.
pub fn path_test_with_grid(
    procedure: Procedure,
    r: &Realization,
    fit: &FitResult,
    n: usize,
    tau: f64,
    test: GofTest,
    m: usize,
) -> Result<TestReport> {
    if procedure == Procedure::Rtc {
        return invalid("the random-time-change test has no path grid");
    }
    path_test(procedure, r, fit, n, tau, test, Some(m))
}

/// Transformed interarrival times `Λ(tᵢ) - Λ(tᵢ₋₁)`, with `t₀ = 0`.
pub fn rtc_interarrivals(r: &Realization, model: &ModelSpec) -> Result<Vec<f64>> {
    let comp = model.compensator_at(r, r.times())?;
    let mut prev = 0.0;
    Ok(comp
        .into_iter()
        .map(|c| {
            let d = c - prev;
            prev = c;
            d
        })
        .collect())
}

/// Random-time-change test: transformed interarrivals against Exp(1).
pub fn rtc_test(r: &Realization, fit: &FitResult, test: GofTest) -> Result<TestReport> {
    if r.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "the random-time-change test needs at least 2 events, got {}",
            r.len()
        )));
    }
    let model = fit.model()?;
    let sample = rtc_interarrivals(r, &model)?;
    let outcome = test.run(&sample, NullDistribution::StdExponential)?;
    Ok(TestReport {
        procedure: Procedure::Rtc,
        test,
        statistic: outcome.statistic,
        p_value: outcome.p_value,
        n_effective: sample.len(),
        notes: base_notes(fit, &sample),
    })
}

/// Runs `procedure`; `n` and `tau` are ignored for the RTC test.
pub fn run_procedure(
    procedure: Procedure,
    r: &Realization,
    fit: &FitResult,
    n: usize,
    tau: f64,
    test: GofTest,
) -> Result<TestReport> {
    match procedure {
        Procedure::Transform => transformation_test(r, fit, n, tau, test),
        Procedure::Naive => naive_test(r, fit, n, tau, test),
        Procedure::Rtc => rtc_test(r, fit, test),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelKind;
    use crate::quad::adaptive_simpson;
    use crate::simulate::{simulate, SeedSpec};
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn poisson(mu: f64) -> ModelSpec {
        let bounds = [(1e-6, 10.0), (1e-15, 10.0), (1e-6, 10.0)];
        ModelSpec::with_bounds(ModelKind::ExpHawkes, &[mu, 1e-12, 1.0], &bounds).unwrap()
    }

    #[test]
    fn empty_realization_drifts_down() {
        let r = Realization::empty(100.0);
        let eta = compensated_process(&r, &poisson(0.5), 256).unwrap();
        assert_eq!(eta.column(0)[0], 0.0);
        assert!(eta.column(0)[1..].iter().all(|&v| v < 0.0));
    }

    #[test]
    fn poisson_endpoint() {
        let times: Vec<f64> = (0..37).map(|i| i as f64 * 1.3 + 0.1).collect();
        let r = Realization::new(times, 50.0).unwrap();
        let eta = compensated_process(&r, &poisson(1.0), 512).unwrap();
        let expect = (37.0 - 50.0) / 50f64.sqrt();
        assert!((eta.column(0)[512] - expect).abs() < 1e-9);
    }

    #[test]
    fn events_on_grid_points_count() {
        let r = Realization::new(vec![2.5, 5.0], 10.0).unwrap();
        let eta = compensated_process(&r, &poisson(1.0), 256).unwrap();
        // u = 0.25 lands exactly on t = 2.5
        let j = 64;
        let expect = (1.0 - 2.5) / 10f64.sqrt();
        assert!((eta.column(0)[j] - expect).abs() < 1e-9);
    }

    #[test]
    fn zero_path_maps_to_zero() {
        let eta = PathFunction::from_fn(1024, 1, 1.0, |_, _| 0.0).unwrap();
        let w = martingale_transform(&eta, &[1.0], 0.9).unwrap();
        assert!(w.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn drift_annihilation() {
        let m = 4096;
        let base = PathFunction::from_fn(m, 2, 1.0, |u, k| {
            (7.0 * u).sin() + (k as f64 + 1.0) * u * u - 0.3 * (u * 40.0).floor() / 40.0
        })
        .unwrap();
        let drifted = PathFunction::from_fn(m, 2, 1.0, |u, k| {
            base.at(u, k).unwrap() + [2.5, -1.75][k] * u
        })
        .unwrap();
        let mu = [0.7, 1.9];
        let a = martingale_transform(&base, &mu, 0.9).unwrap();
        let b = martingale_transform(&drifted, &mu, 0.9).unwrap();
        for k in 0..2 {
            for (x, y) in a.column(k).iter().zip(b.column(k)) {
                assert!((x - y).abs() <= 1e-6, "{x} vs {y}");
            }
        }
        let pure = PathFunction::from_fn(m, 1, 1.0, |u, _| 3.0 * u).unwrap();
        let w = martingale_transform(&pure, &[1.0], 0.9).unwrap();
        assert!(w.column(0).iter().all(|v| v.abs() <= 1e-6));
    }

    #[test]
    fn linearity_and_separability() {
        let m = 2048;
        let e1 = PathFunction::from_fn(m, 2, 1.0, |u, k| (u * (k + 3) as f64).cos()).unwrap();
        let e2 = PathFunction::from_fn(m, 2, 1.0, |u, k| u.powi(k as i32 + 2) - 0.5).unwrap();
        let (a, b) = (1.7, -0.4);
        let combo = PathFunction::from_fn(m, 2, 1.0, |u, k| {
            a * e1.at(u, k).unwrap() + b * e2.at(u, k).unwrap()
        })
        .unwrap();
        let mu = [1.3, 0.2];
        let t1 = martingale_transform(&e1, &mu, 0.8).unwrap();
        let t2 = martingale_transform(&e2, &mu, 0.8).unwrap();
        let tc = martingale_transform(&combo, &mu, 0.8).unwrap();
        for k in 0..2 {
            for j in 0..tc.len() {
                let lin = a * t1.column(k)[j] + b * t2.column(k)[j];
                assert!((tc.column(k)[j] - lin).abs() < 1e-12);
            }
        }
        // coordinate 0 alone gives the same column
        let solo = PathFunction::new(m, vec![e1.column(0).to_vec()], 1.0).unwrap();
        let ts = martingale_transform(&solo, &mu[..1], 0.8).unwrap();
        assert_eq!(ts.column(0), t1.column(0));
    }

    #[test]
    fn step_input() {
        let m = 4096;
        let eta = PathFunction::from_fn(m, 1, 1.0, |u, _| if u >= 0.5 { 1.0 } else { 0.0 }).unwrap();
        let w = martingale_transform(&eta, &[1.0], 0.9).unwrap();
        let exact = |u: f64| {
            let step = |v: f64| if v >= 0.5 { 0.0 } else { 1.0 / (1.0 - v) };
            let upper = u.min(0.5);
            let integral = adaptive_simpson(step, 0.0, upper, 1e-12);
            (if u >= 0.5 { 1.0 } else { 0.0 }) - integral
        };
        for j in (0..w.len()).step_by(37) {
            let u = j as f64 / m as f64;
            let err = (w.column(0)[j] - exact(u)).abs();
            // smooth part: O(m^-2); the trapezoid panel straddling the jump adds O(1/m)
            let tol = if u < 0.5 { 1e-6 } else { 1.0 / m as f64 };
            assert!(err <= tol, "u={u}: {} vs {}", w.column(0)[j], exact(u));
        }
        assert!((exact(0.25) - 0.75f64.ln()).abs() < 1e-10);
        assert!((exact(0.8) - (1.0 - 2f64.ln())).abs() < 1e-10);
    }

    #[test]
    fn transform_errors() {
        let eta = PathFunction::from_fn(256, 1, 1.0, |u, _| u).unwrap();
        assert!(martingale_transform(&eta, &[0.0], 0.5).is_err());
        assert!(martingale_transform(&eta, &[1.0], 0.0).is_err());
        let err = martingale_transform(&eta, &[1.0], 0.995).unwrap_err();
        assert!(err.to_string().contains("1 - 2/m"), "{err}");
    }

    #[test]
    fn increments_examples() {
        let w = PathFunction::from_fn(4096, 1, 1.0, |u, _| u).unwrap();
        let s = increments(&w, 2, 0.5).unwrap();
        for z in s.pooled() {
            assert!((z - 0.5).abs() < 1e-12);
        }
        let w0 = PathFunction::from_fn(4096, 1, 1.0, |_, _| 0.0).unwrap();
        assert!(increments(&w0, 10, 0.9).unwrap().pooled().iter().all(|&z| z == 0.0));
        assert!(increments(&w, 1025, 0.9).is_err());
        assert!(increments(&w, 0, 0.9).is_err());
    }

    #[test]
    fn brownian_increments() {
        let m = 1 << 15;
        let n = 18;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(77);
        let mut inside = 0;
        for _ in 0..500 {
            let mut path = Vec::with_capacity(m + 1);
            let mut acc = 0.0;
            path.push(0.0);
            let sd = (1.0 / m as f64).sqrt();
            for _ in 0..m {
                let g: f64 = StandardNormal.sample(&mut rng);
                acc += sd * g;
                path.push(acc);
            }
            let w = PathFunction::new(m, vec![path], 1.0).unwrap();
            let z = increments(&w, n, 0.9).unwrap().pooled();
            let mean = z.iter().sum::<f64>() / n as f64;
            if mean.abs() <= 4.0 / (n as f64).sqrt() {
                inside += 1;
            }
        }
        assert!(inside >= 475, "{inside}/500");
    }

    #[test]
    fn choose_n_examples() {
        assert_eq!(choose_n(5000.0, 0.25, 1).unwrap(), 18);
        assert_eq!(choose_n(50000.0, 0.25, 1).unwrap(), 56);
        assert_eq!(choose_n(67.0, 0.25, 6).unwrap(), 6);
        assert!(choose_n(0.0, 0.25, 1).is_err());
    }

    fn fit_of(model: &ModelSpec) -> FitResult {
        FitResult {
            kind: model.kind,
            params: model.params().to_vec(),
            loglik: 0.0,
            converged: true,
            n_restarts_used: 0,
            at_bound: vec![false; model.params().len()],
            bounds: model.bounds().to_vec(),
            mark_cutoff: model.mark_cutoff,
        }
    }

    #[test]
    fn linear_compensated_process_is_degenerate() {
        // events exactly where Λ jumps by 1, checked on the transform level:
        // a compensated process linear in u has an all-zero transform
        let eta = PathFunction::from_fn(4096, 1, 1.0, |u, _| -0.8 * u).unwrap();
        let w = martingale_transform(&eta, &[1.0], 0.9).unwrap();
        let z = increments(&w, 18, 0.9).unwrap().pooled();
        assert!(z.iter().all(|v| v.abs() < 1e-9));
        let zeros = vec![0.0; 18];
        let out = GofTest::Ks.run(&zeros, NullDistribution::StdNormal).unwrap();
        assert!((out.statistic - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rtc_requires_two_events() {
        let m = poisson(1.0);
        let r = Realization::new(vec![1.0], 10.0).unwrap();
        assert!(matches!(
            rtc_test(&r, &fit_of(&m), GofTest::Ks),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn rtc_first_interarrival_from_zero() {
        let m = poisson(2.0);
        let r = Realization::new(vec![1.0, 1.5, 4.0], 10.0).unwrap();
        let d = rtc_interarrivals(&r, &m).unwrap();
        for (a, b) in d.iter().zip([2.0, 1.0, 5.0]) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rtc_p_values_uniform_at_truth() {
        let m = poisson(1.0);
        let fit = fit_of(&m);
        let p: Vec<f64> = (0..200)
            .map(|rep| {
                let r = simulate(&m, 300.0, SeedSpec::new(404, rep)).unwrap();
                rtc_test(&r, &fit, GofTest::Ks).unwrap().p_value
            })
            .collect();
        let out = GofTest::Ks.run(&p, NullDistribution::Uniform01).unwrap();
        assert!(out.p_value > 0.01, "{out:?}");
    }

    #[test]
    fn transform_chain_under_truth() {
        let m = ModelSpec::new(ModelKind::ExpHawkes, &[0.5, 1.0, 2.0]).unwrap();
        let fit = fit_of(&m);
        let r = simulate(&m, 5000.0, SeedSpec::new(8, 1)).unwrap();
        for proc in [Procedure::Transform, Procedure::Naive] {
            let rep = run_procedure(proc, &r, &fit, 18, DEFAULT_TAU, GofTest::Ad).unwrap();
            assert_eq!(rep.n_effective, 18);
            assert!((0.0..=1.0).contains(&rep.p_value));
        }
        let js = serde_json::to_value(
            run_procedure(Procedure::Rtc, &r, &fit, 18, DEFAULT_TAU, GofTest::Ks).unwrap(),
        )
        .unwrap();
        assert_eq!(js["procedure"], "rtc");
        assert_eq!(js["test"], "ks");
    }

    #[test]
    fn csv_export() {
        let p = PathFunction::from_fn(256, 2, 1.0, |u, k| u + k as f64).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("u,value_1,value_2"));
        assert_eq!(lines.next(), Some("0,0,1"));
        assert_eq!(text.lines().count(), 258);
    }
}
