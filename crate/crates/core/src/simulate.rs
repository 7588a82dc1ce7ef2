//! Simulation by Ogata thinning, and the random time change.
//!
//! Each family keeps an intensity bound valid until the next proposal can
//! land: for the self-exciting kernels the intensity only decays between
//! events, so the current value is a bound; the periodic process uses the
//! constant `μ + α`; the self-correcting process uses its value at the end of
//! a lookahead window of length `1/β`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{History, ModelKind, ModelSpec, Realization};

/// Identifies one independent random stream family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub experiment_seed: u64,
    pub replication_index: u64,
}

/// Stream tags: one stream per purpose inside a replication.
pub mod stream {
    pub const EVENTS: u64 = 1;
    pub const SHOTS: u64 = 2;
    pub const MARKS: u64 = 3;
    pub const FIT_STARTS: u64 = 4;
    pub const JITTER: u64 = 5;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl SeedSpec {
    pub fn new(experiment_seed: u64, replication_index: u64) -> Self {
        SeedSpec {
            experiment_seed,
            replication_index,
        }
    }

    /// ChaCha20 keyed by (experiment seed, replication), stream selected by `tag`.
    pub fn rng(&self, tag: u64) -> ChaCha20Rng {
        let mut key = [0u8; 32];
        let mut s = splitmix64(self.experiment_seed) ^ splitmix64(!self.replication_index);
        for chunk in key.chunks_exact_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(tag);
        rng
    }

    /// A fresh, independent seed for the `attempt`-th redraw of this replication.
    pub fn redraw(&self, attempt: u32) -> SeedSpec {
        if attempt == 0 {
            return *self;
        }
        SeedSpec {
            experiment_seed: splitmix64(self.experiment_seed ^ splitmix64(attempt as u64)),
            replication_index: self.replication_index,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimOptions {
    /// Abort once more than this many events have been generated.
    pub max_events: usize,
    /// Simulate even when the stability check fails.
    pub allow_unstable: bool,
    /// Gutenberg-Richter b-value for ETAS magnitudes above the cutoff.
    pub b_value: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            max_events: 10_000_000,
            allow_unstable: false,
            b_value: 1.0,
        }
    }
}

pub fn simulate(model: &ModelSpec, horizon: f64, seed: SeedSpec) -> Result<Realization> {
    simulate_with(model, horizon, seed, &SimOptions::default())
}

pub fn simulate_with(
    model: &ModelSpec,
    horizon: f64,
    seed: SeedSpec,
    opts: &SimOptions,
) -> Result<Realization> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "horizon must be finite and nonnegative, got {horizon}"
        )));
    }
    if !opts.allow_unstable {
        let s = model.stability_check();
        if !s.stable {
            return Err(Error::InvalidInput(format!(
                "{} fails its stability check ({}); pass allow_unstable to simulate anyway",
                model.kind, s.diagnostic
            )));
        }
    }
    if horizon == 0.0 {
        return Ok(Realization::empty(0.0));
    }
    let mut rng = seed.rng(stream::EVENTS);
    let mut sim = Thinning {
        horizon,
        cap: opts.max_events,
        times: Vec::new(),
    };
    let p = model.params();
    let mut marks = None;
    let mut latent = None;
    match model.kind {
        ModelKind::ExpHawkes => sim.exp_hawkes(&mut rng, p[0], p[1], p[2])?,
        ModelKind::Recursive => sim.recursive(&mut rng, p[0], p[1], p[2], p[3])?,
        ModelKind::PowerLawHawkes => {
            let probe = Realization::empty(horizon);
            sim.decreasing_generic(&mut rng, model, &probe, |_| {})?
        }
        ModelKind::EtasTemporal => {
            let mut mark_rng = seed.rng(stream::MARKS);
            let rate = opts.b_value * std::f64::consts::LN_10;
            let cutoff = model.mark_cutoff;
            let mut m: Vec<f64> = Vec::new();
            let probe = Realization::empty(horizon).with_marks(Vec::new())?;
            sim.decreasing_generic(&mut rng, model, &probe, |probe| {
                let mag = cutoff + mark_rng.sample::<f64, _>(Exp1) / rate;
                if let Some(pm) = probe.marks.as_mut() {
                    pm.push(mag);
                }
                m.push(mag);
            })?;
            marks = Some(m);
        }
        ModelKind::ShotNoise => {
            let mut shot_rng = seed.rng(stream::SHOTS);
            let shots = homogeneous_poisson(&mut shot_rng, p[0], horizon, opts.max_events)?;
            sim.shot_noise(&mut rng, &shots, p[1], p[2])?;
            latent = Some(shots);
        }
        ModelKind::PeriodicPoisson => sim.periodic(&mut rng, p)?,
        ModelKind::SelfCorrecting => sim.self_correcting(&mut rng, p[0], p[1], p[2])?,
    }
    let mut r = Realization::new(sim.times, horizon)?;
    if let Some(m) = marks {
        r = r.with_marks(m)?;
    }
    if let Some(l) = latent {
        r = r.with_latent(l);
    }
    Ok(r)
}

/// Homogeneous Poisson event times on `[0, horizon]`.
fn homogeneous_poisson(rng: &mut ChaCha20Rng, rate: f64, horizon: f64, cap: usize) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    if rate <= 0.0 {
        return Ok(out);
    }
    let mut t = 0.0;
    loop {
        t += rng.sample::<f64, _>(Exp1) / rate;
        if t > horizon {
            return Ok(out);
        }
        push_checked(&mut out, t, cap)?;
    }
}

fn push_checked(times: &mut Vec<f64>, t: f64, cap: usize) -> Result<()> {
    if times.len() >= cap {
        return Err(Error::SimulationBlowup(format!(
            "more than {cap} events generated by time {t}"
        )));
    }
    // Proposals can coincide in floating point when the intensity is huge.
    if times.last().is_some_and(|&last| t <= last) {
        return Err(Error::SimulationBlowup(format!(
            "event times stopped increasing at {t}: intensity too large to resolve"
        )));
    }
    times.push(t);
    Ok(())
}

struct Thinning {
    horizon: f64,
    cap: usize,
    times: Vec<f64>,
}

fn bad_bound(bound: f64, t: f64) -> Error {
    Error::SimulationBlowup(format!("intensity bound {bound} at time {t}"))
}

impl Thinning {
    fn accept(&mut self, t: f64) -> Result<()> {
        push_checked(&mut self.times, t, self.cap)
    }

    fn exp_hawkes(&mut self, rng: &mut ChaCha20Rng, mu: f64, alpha: f64, beta: f64) -> Result<()> {
        let mut t = 0.0;
        // excitation Σ α e^{-β(t-tᵢ)} at the current time
        let mut exc = 0.0;
        loop {
            let bound = mu + exc;
            if !(bound > 0.0 && bound.is_finite()) {
                return Err(bad_bound(bound, t));
            }
            let gap = rng.sample::<f64, _>(Exp1) / bound;
            let cand = t + gap;
            if cand > self.horizon {
                return Ok(());
            }
            exc *= (-beta * gap).exp();
            let u: f64 = rng.random();
            if u * bound <= mu + exc {
                self.accept(cand)?;
                exc += alpha;
            }
            t = cand;
        }
    }

    fn recursive(
        &mut self,
        rng: &mut ChaCha20Rng,
        mu: f64,
        kappa: f64,
        beta: f64,
        alpha: f64,
    ) -> Result<()> {
        let mut t = 0.0;
        let mut exc = 0.0;
        loop {
            let bound = mu + exc;
            if !(bound > 0.0 && bound.is_finite()) {
                return Err(bad_bound(bound, t));
            }
            let gap = rng.sample::<f64, _>(Exp1) / bound;
            let cand = t + gap;
            if cand > self.horizon {
                return Ok(());
            }
            exc *= (-beta * gap).exp();
            let lam = mu + exc;
            let u: f64 = rng.random();
            if u * bound <= lam {
                self.accept(cand)?;
                // λ(tᵢ-) is the cached event intensity
                exc += kappa * lam.powf(-alpha) * beta;
            }
            t = cand;
        }
    }

    /// Thinning for kernels that only decay between events, evaluating the
    /// intensity by direct summation over `probe`'s history.
    fn decreasing_generic(
        &mut self,
        rng: &mut ChaCha20Rng,
        model: &ModelSpec,
        probe: &Realization,
        mut on_accept: impl FnMut(&mut Realization),
    ) -> Result<()> {
        let mut probe = probe.clone();
        let mut t = 0.0;
        let lam_at = |probe: &Realization, s: f64| -> Result<f64> {
            let h = History::prefix(probe, probe.times.len());
            model.intensity_scalar(s, &h)
        };
        loop {
            let bound = lam_at(&probe, t)?;
            if !(bound > 0.0 && bound.is_finite()) {
                return Err(bad_bound(bound, t));
            }
            let cand = t + rng.sample::<f64, _>(Exp1) / bound;
            if cand > self.horizon {
                return Ok(());
            }
            let lam = lam_at(&probe, cand)?;
            let u: f64 = rng.random();
            if u * bound <= lam {
                self.accept(cand)?;
                probe.times.push(cand);
                probe.coords.push(0);
                on_accept(&mut probe);
            }
            t = cand;
        }
    }

    fn shot_noise(&mut self, rng: &mut ChaCha20Rng, shots: &[f64], alpha: f64, beta: f64) -> Result<()> {
        let mut t = 0.0;
        let mut exc = 0.0;
        let mut next = 0;
        loop {
            if exc <= 0.0 {
                // no live shot: jump to the next one
                match shots.get(next) {
                    Some(&s) => {
                        t = s;
                        exc = alpha;
                        next += 1;
                        continue;
                    }
                    None => return Ok(()),
                }
            }
            let bound = exc;
            if !bound.is_finite() {
                return Err(bad_bound(bound, t));
            }
            let gap = rng.sample::<f64, _>(Exp1) / bound;
            let cand = t + gap;
            if let Some(&s) = shots.get(next) {
                if s <= cand {
                    exc = exc * (-beta * (s - t)).exp() + alpha;
                    t = s;
                    next += 1;
                    continue;
                }
            }
            if cand > self.horizon {
                return Ok(());
            }
            exc *= (-beta * gap).exp();
            let u: f64 = rng.random();
            if u * bound <= exc {
                self.accept(cand)?;
            }
            t = cand;
        }
    }

    fn periodic(&mut self, rng: &mut ChaCha20Rng, p: &[f64]) -> Result<()> {
        let (mu, a, b, g) = (p[0], p[1], p[2], p[3]);
        let bound = mu + a.abs();
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(bad_bound(bound, 0.0));
        }
        let mut t = 0.0;
        loop {
            t += rng.sample::<f64, _>(Exp1) / bound;
            if t > self.horizon {
                return Ok(());
            }
            let lam = (mu + a * (b * (t - g)).sin()).max(0.0);
            let u: f64 = rng.random();
            if u * bound <= lam {
                self.accept(t)?;
            }
        }
    }

    fn self_correcting(&mut self, rng: &mut ChaCha20Rng, mu: f64, alpha: f64, beta: f64) -> Result<()> {
        let ln_a = alpha.ln();
        let log_lam = |s: f64, n: usize| mu.ln() + beta * s + n as f64 * ln_a;
        let mut t = 0.0;
        loop {
            let n = self.times.len();
            let here = log_lam(t, n).exp();
            if !(here > 0.0 && here.is_finite()) {
                return Err(bad_bound(here, t));
            }
            // λ grows by at most a factor e over the window
            let window = 1.0 / beta;
            let bound = log_lam(t, n).max(log_lam(t + window, n)).exp();
            if !(bound > 0.0 && bound.is_finite()) {
                return Err(bad_bound(bound, t));
            }
            let cand = t + rng.sample::<f64, _>(Exp1) / bound;
            if cand > t + window {
                t += window;
                if t > self.horizon {
                    return Ok(());
                }
                continue;
            }
            if cand > self.horizon {
                return Ok(());
            }
            let u: f64 = rng.random();
            if u * bound <= log_lam(cand, n).exp() {
                self.accept(cand)?;
            }
            t = cand;
        }
    }
}

/// Transformed times `Λ(tᵢ)` of every event.
pub fn time_rescale(realization: &Realization, model: &ModelSpec) -> Result<Vec<f64>> {
    model.compensator_at(realization, realization.times())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stattests::{ks_test, NullDistribution};
    use std::f64::consts::LN_2;

    fn mean_sd(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, v.sqrt())
    }

    #[test]
    fn seeds_are_deterministic_and_distinct() {
        let m = ModelSpec::new(ModelKind::ExpHawkes, &[0.5, 1.0, 2.0]).unwrap();
        let a = simulate(&m, 200.0, SeedSpec::new(7, 3)).unwrap();
        let b = simulate(&m, 200.0, SeedSpec::new(7, 3)).unwrap();
        let c = simulate(&m, 200.0, SeedSpec::new(7, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.times(), c.times());
        let d = simulate(&m, 200.0, SeedSpec::new(7, 3).redraw(1)).unwrap();
        assert_ne!(a.times(), d.times());
    }

    #[test]
    fn zero_horizon_gives_empty() {
        for kind in ModelKind::ALL {
            let p: Vec<f64> = match kind.n_params() {
                3 => vec![0.5, 0.5, 2.0],
                _ => vec![0.5, 0.4, 1.0, 1.0],
            };
            let m = ModelSpec::new(kind, &p).unwrap();
            let r = simulate(&m, 0.0, SeedSpec::new(1, 0)).unwrap();
            assert!(r.is_empty());
        }
    }

    #[test]
    fn unstable_requires_override() {
        let m = ModelSpec::new(ModelKind::ExpHawkes, &[0.5, 3.0, 2.0]).unwrap();
        assert!(simulate(&m, 10.0, SeedSpec::new(1, 0)).is_err());
        let opts = SimOptions {
            allow_unstable: true,
            max_events: 50,
            ..Default::default()
        };
        let e = simulate_with(&m, 1000.0, SeedSpec::new(1, 0), &opts).unwrap_err();
        assert!(matches!(e, Error::SimulationBlowup(_)));
    }

    #[test]
    fn every_family_simulates() {
        let cases: Vec<(ModelKind, Vec<f64>)> = vec![
            (ModelKind::ExpHawkes, vec![0.5, 1.0, 2.0]),
            (ModelKind::PowerLawHawkes, vec![0.5, 0.5, 2.0]),
            (ModelKind::ShotNoise, vec![1.0, 2.0, 2.0]),
            (ModelKind::PeriodicPoisson, vec![1.25, 1.0, 0.2, 0.0]),
            (ModelKind::SelfCorrecting, vec![1.0, 0.5, LN_2]),
            (ModelKind::EtasTemporal, vec![0.2, 0.01, 0.02, 1.2]),
            (ModelKind::Recursive, vec![0.3, 0.5, 1.0, 0.5]),
        ];
        for (kind, p) in cases {
            let m = ModelSpec::new(kind, &p).unwrap();
            let r = simulate(&m, 300.0, SeedSpec::new(11, 0)).unwrap();
            assert!(!r.is_empty(), "{kind}");
            assert_eq!(r.marks().is_some(), kind == ModelKind::EtasTemporal);
            assert_eq!(r.latent().is_some(), kind == ModelKind::ShotNoise);
            if let Some(m) = r.marks() {
                assert!(m.iter().all(|&x| x >= 6.0));
            }
            // rescaled interarrivals should look roughly unit-mean
            let tr = time_rescale(&r, &m).unwrap();
            assert!(tr.windows(2).all(|w| w[1] > w[0]), "{kind}");
        }
    }

    #[test]
    fn periodic_mean_count_matches_compensator() {
        let m = ModelSpec::new(ModelKind::PeriodicPoisson, &[1.25, 1.0, 0.2, 0.0]).unwrap();
        let horizon = 5000.0;
        let counts: Vec<f64> = (0..200)
            .map(|i| simulate(&m, horizon, SeedSpec::new(99, i)).unwrap().len() as f64)
            .collect();
        let expected = 1.25 * horizon + 5.0 * (1.0 - 1000.0f64.cos());
        let (mean, sd) = mean_sd(&counts);
        let se = sd / (counts.len() as f64).sqrt();
        assert!((mean - expected).abs() < 3.0 * se, "mean {mean} expected {expected} se {se}");
    }

    #[test]
    fn exp_hawkes_mean_count_matches_stationary_rate() {
        let m = ModelSpec::new(ModelKind::ExpHawkes, &[0.5, 1.0, 2.0]).unwrap();
        let horizon = 5000.0;
        let counts: Vec<f64> = (0..200)
            .map(|i| simulate(&m, horizon, SeedSpec::new(5, i)).unwrap().len() as f64)
            .collect();
        let (mean, sd) = mean_sd(&counts);
        let se = sd / (counts.len() as f64).sqrt();
        // Starting from an empty history loses about μ·α/β·1/(β-α)... of one
        // kernel's worth of offspring; well below one standard error here.
        assert!((mean - 5000.0).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn periodic_counts_are_poisson_at_small_horizon() {
        // chi-square of the count histogram against Poisson(Λ(10))
        let m = ModelSpec::new(ModelKind::PeriodicPoisson, &[1.25, 1.0, 0.2, 0.0]).unwrap();
        let lam: f64 = 12.5 + 5.0 * (1.0 - 2.0f64.cos());
        let reps = 50_000u64;
        let mut hist = vec![0u64; 60];
        for i in 0..reps {
            let n = simulate(&m, 10.0, SeedSpec::new(2024, i)).unwrap().len();
            hist[n.min(59)] += 1;
        }
        let pmf = |k: usize| {
            let lk = k as f64 * lam.ln() - lam - statrs::function::gamma::ln_gamma(k as f64 + 1.0);
            lk.exp()
        };
        // pool cells so every expected count is at least 5
        let mut cells: Vec<(f64, f64)> = Vec::new();
        let (mut o, mut e) = (0.0, 0.0);
        let mut tail_p = 1.0;
        for (k, &h) in hist.iter().enumerate().take(59) {
            o += h as f64;
            let p = pmf(k);
            e += p * reps as f64;
            tail_p -= p;
            if e >= 5.0 && tail_p * reps as f64 >= 5.0 {
                cells.push((o, e));
                o = 0.0;
                e = 0.0;
            }
        }
        let o_rest: f64 = o + hist[59] as f64;
        cells.push((o_rest, e + tail_p * reps as f64));
        let chi2: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
        let df = (cells.len() - 1) as f64;
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let p = 1.0 - ChiSquared::new(df).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2 {chi2} df {df} p {p}");
    }

    #[test]
    fn time_rescale_examples() {
        // α ≈ 0: homogeneous Poisson with rate μ
        let m = ModelSpec::new(ModelKind::ExpHawkes, &[0.7, 1e-5, 2.0]).unwrap();
        let m0 = m.with_params_unchecked(&[0.7, 0.0, 2.0]);
        let r = Realization::new(vec![0.5, 1.0, 4.0], 5.0).unwrap();
        let tr = time_rescale(&r, &m0).unwrap();
        for (a, b) in tr.iter().zip(r.times()) {
            assert!((a - 0.7 * b).abs() < 1e-15);
        }
        assert!(time_rescale(&Realization::empty(5.0), &m).unwrap().is_empty());
    }

    #[test]
    fn rescaled_interarrivals_are_exponential_under_truth() {
        let m = ModelSpec::new(ModelKind::ExpHawkes, &[0.5, 1.0, 2.0]).unwrap();
        let mut pooled = Vec::new();
        let mut passes = 0;
        for i in 0..100 {
            let r = simulate(&m, 5000.0, SeedSpec::new(31, i)).unwrap();
            let tr = time_rescale(&r, &m).unwrap();
            let mut prev = 0.0;
            let gaps: Vec<f64> = tr
                .iter()
                .map(|&x| {
                    let g = x - prev;
                    prev = x;
                    g
                })
                .collect();
            if ks_test(&gaps, NullDistribution::StdExponential).unwrap().p_value > 0.05 {
                passes += 1;
            }
            if pooled.len() < 20_000 {
                pooled.extend_from_slice(&gaps);
            }
        }
        assert!(passes >= 93, "passes {passes}");
        let (mean, _) = mean_sd(&pooled);
        assert!((mean - 1.0).abs() < 3.0 / (pooled.len() as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn self_correcting_is_regular() {
        let m = ModelSpec::new(ModelKind::SelfCorrecting, &[1.0, 0.5, LN_2]).unwrap();
        let r = simulate(&m, 2000.0, SeedSpec::new(3, 0)).unwrap();
        // N(t) tracks t closely: intensity 2^{t-N}
        assert!((r.len() as f64 - 2000.0).abs() < 10.0, "{}", r.len());
        let tr = time_rescale(&r, &m).unwrap();
        let mut prev = 0.0;
        let gaps: Vec<f64> = tr
            .iter()
            .map(|&x| {
                let g = x - prev;
                prev = x;
                g
            })
            .collect();
        let p = ks_test(&gaps, NullDistribution::StdExponential).unwrap().p_value;
        assert!(p > 1e-4, "p {p}");
    }

    #[test]
    fn shot_noise_latent_matches_rate() {
        let m = ModelSpec::new(ModelKind::ShotNoise, &[0.2, 5.0, 1.0]).unwrap();
        let r = simulate(&m, 5000.0, SeedSpec::new(8, 0)).unwrap();
        let shots = r.latent().unwrap().len() as f64;
        assert!((shots - 1000.0).abs() < 5.0 * 1000f64.sqrt());
        // each shot yields Poisson(α/β) = 5 events on average
        assert!((r.len() as f64 / shots - 5.0).abs() < 0.5);
    }
}
