//! Realizations and the parametric conditional-intensity families.
//!
//! Every family is univariate (`dim = 1`). Histories start empty at time 0.
//!
//! | kind                | parameters          | intensity                                   |
//! |---------------------|---------------------|---------------------------------------------|
//! | `ExpHawkes`         | (μ, α, β)           | μ + Σ α e^{-β(t-tᵢ)}                        |
//! | `PowerLawHawkes`    | (μ, α, β)           | μ + Σ α (1+t-tᵢ)^{-β}                       |
//! | `ShotNoise`         | (μ, α, β)           | Σ α e^{-β(t-sⱼ)} over latent Poisson(μ) shots |
//! | `PeriodicPoisson`   | (μ, α, β, γ)        | μ + α sin(β(t-γ))                           |
//! | `SelfCorrecting`    | (μ, α, β)           | μ e^{βt} α^{N(t-)}                          |
//! | `EtasTemporal`      | (μ, K, c, β)        | μ + Σ e^{β(mᵢ-M)} K/(t-tᵢ+c)                |
//! | `Recursive`         | (μ, κ, β, α)        | μ + Σ κ λ(tᵢ)^{-α} β e^{-β(t-tᵢ)}           |

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    ExpHawkes,
    PowerLawHawkes,
    ShotNoise,
    PeriodicPoisson,
    SelfCorrecting,
    EtasTemporal,
    Recursive,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::ExpHawkes,
        ModelKind::PowerLawHawkes,
        ModelKind::ShotNoise,
        ModelKind::PeriodicPoisson,
        ModelKind::SelfCorrecting,
        ModelKind::EtasTemporal,
        ModelKind::Recursive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::ExpHawkes => "exp-hawkes",
            ModelKind::PowerLawHawkes => "power-law-hawkes",
            ModelKind::ShotNoise => "shot-noise",
            ModelKind::PeriodicPoisson => "periodic-poisson",
            ModelKind::SelfCorrecting => "self-correcting",
            ModelKind::EtasTemporal => "etas-temporal",
            ModelKind::Recursive => "recursive",
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::ExpHawkes
            | ModelKind::PowerLawHawkes
            | ModelKind::ShotNoise
            | ModelKind::SelfCorrecting => &["mu", "alpha", "beta"],
            ModelKind::PeriodicPoisson => &["mu", "alpha", "beta", "gamma"],
            ModelKind::EtasTemporal => &["mu", "k", "c", "beta"],
            ModelKind::Recursive => &["mu", "kappa", "beta", "alpha"],
        }
    }

    pub fn n_params(self) -> usize {
        self.param_names().len()
    }

    /// Default parameter box. Open at zero because every parameter is
    /// positive; the Hawkes families use the `(0, 10)^3` box.
    pub fn default_bounds(self) -> Vec<(f64, f64)> {
        match self {
            ModelKind::ExpHawkes | ModelKind::PowerLawHawkes | ModelKind::ShotNoise => {
                vec![(1e-6, 10.0); 3]
            }
            ModelKind::SelfCorrecting => vec![(1e-6, 10.0), (1e-6, 1.0 - 1e-9), (1e-6, 10.0)],
            ModelKind::PeriodicPoisson => vec![(1e-6, 10.0), (1e-6, 10.0), (1e-6, 10.0), (-10.0, 10.0)],
            ModelKind::EtasTemporal => vec![(1e-8, 10.0), (1e-8, 10.0), (1e-6, 10.0), (1e-6, 10.0)],
            ModelKind::Recursive => vec![(1e-8, 10.0), (1e-6, 100.0), (1e-6, 10.0), (1e-6, 5.0)],
        }
    }

    /// Whether the intensity is driven by unobserved latent events.
    pub fn is_latent_driven(self) -> bool {
        matches!(self, ModelKind::ShotNoise)
    }

    pub fn requires_marks(self) -> bool {
        matches!(self, ModelKind::EtasTemporal)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| {
                let names: Vec<_> = ModelKind::ALL.iter().map(|k| k.name()).collect();
                Error::InvalidInput(format!(
                    "unknown model kind `{s}` (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// Default cutoff magnitude for the ETAS mark function.
pub const DEFAULT_MARK_CUTOFF: f64 = 6.0;

/// A parametric conditional-intensity family with a concrete parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    params: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    pub dim: usize,
    /// Cutoff magnitude `M` (ETAS only).
    pub mark_cutoff: f64,
}

impl ModelSpec {
    /// Builds a model with the kind's default bounds.
    pub fn new(kind: ModelKind, params: &[f64]) -> Result<Self> {
        Self::with_bounds(kind, params, &kind.default_bounds())
    }

    pub fn with_bounds(kind: ModelKind, params: &[f64], bounds: &[(f64, f64)]) -> Result<Self> {
        Self::checked(kind, params, bounds, true)
    }

    /// Accepts parameters on the boundary of the box, as a fit may return.
    pub(crate) fn on_closed_box(kind: ModelKind, params: &[f64], bounds: &[(f64, f64)]) -> Result<Self> {
        Self::checked(kind, params, bounds, false)
    }

    fn checked(kind: ModelKind, params: &[f64], bounds: &[(f64, f64)], strict: bool) -> Result<Self> {
        if params.len() != kind.n_params() {
            return invalid(format!(
                "{kind} takes {} parameters ({}), got {}",
                kind.n_params(),
                kind.param_names().join(", "),
                params.len()
            ));
        }
        if bounds.len() != params.len() {
            return invalid(format!(
                "{kind}: {} bounds for {} parameters",
                bounds.len(),
                params.len()
            ));
        }
        for (i, (&(lo, hi), &p)) in bounds.iter().zip(params).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return invalid(format!("{kind}: bad bound ({lo}, {hi}) for parameter {i}"));
            }
            let inside = if strict { p > lo && p < hi } else { p >= lo && p <= hi };
            if !inside {
                return invalid(format!(
                    "{kind}: parameter {} = {p} outside ({lo}, {hi})",
                    kind.param_names()[i]
                ));
            }
        }
        Ok(ModelSpec {
            kind,
            params: params.to_vec(),
            bounds: bounds.to_vec(),
            dim: 1,
            mark_cutoff: DEFAULT_MARK_CUTOFF,
        })
    }

    pub fn with_mark_cutoff(mut self, cutoff: f64) -> Self {
        self.mark_cutoff = cutoff;
        self
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// Same family and bounds, new parameter vector.
    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        let mut m = Self::with_bounds(self.kind, params, &self.bounds)?;
        m.mark_cutoff = self.mark_cutoff;
        Ok(m)
    }

    /// Like [`with_params`](Self::with_params) but without the bounds check.
    /// The optimizer uses this to probe points on the boundary.
    pub(crate) fn with_params_unchecked(&self, params: &[f64]) -> Self {
        let mut m = self.clone();
        m.params.clear();
        m.params.extend_from_slice(params);
        m
    }

    /// Stationarity / admissibility constraint of the family.
    pub fn stability_check(&self) -> StabilityReport {
        let p = &self.params;
        let (ok, diag) = match self.kind {
            ModelKind::ExpHawkes => (
                p[1] < p[2],
                format!("branching ratio alpha/beta = {:.6}", p[1] / p[2]),
            ),
            ModelKind::PowerLawHawkes => {
                if p[2] <= 1.0 {
                    (false, format!("beta = {} <= 1: kernel mass is infinite", p[2]))
                } else {
                    let mass = p[1] / (p[2] - 1.0);
                    (mass < 1.0, format!("kernel mass alpha/(beta-1) = {mass:.6}"))
                }
            }
            ModelKind::ShotNoise => (true, "shot-noise is always stationary".to_string()),
            ModelKind::SelfCorrecting => (
                p[1] > 0.0 && p[1] < 1.0 && p[2] > 0.0,
                format!("alpha = {} in (0,1), beta = {} > 0", p[1], p[2]),
            ),
            ModelKind::PeriodicPoisson => (
                p[0] >= p[1],
                format!("mu = {} >= alpha = {} keeps the intensity nonnegative", p[0], p[1]),
            ),
            ModelKind::EtasTemporal | ModelKind::Recursive => (
                true,
                "no closed stationarity criterion; not assessed".to_string(),
            ),
        };
        StabilityReport {
            stable: ok,
            diagnostic: diag,
        }
    }

    /// Conditional intensity at `t` given the events in `history`.
    pub fn intensity(&self, t: f64, history: &History<'_>) -> Result<Vec<f64>> {
        Ok(vec![self.intensity_scalar(t, history)?])
    }

    /// Compensator `Λ(t) = ∫_0^t λ(s) ds` given the events before `t`.
    pub fn compensator(&self, t: f64, history: &History<'_>) -> Result<Vec<f64>> {
        Ok(vec![self.compensator_scalar(t, history)?])
    }

    pub(crate) fn intensity_scalar(&self, t: f64, h: &History<'_>) -> Result<f64> {
        h.check_time(t)?;
        let p = &self.params;
        let v = match self.kind {
            ModelKind::ExpHawkes => {
                let (mu, a, b) = (p[0], p[1], p[2]);
                mu + h.times.iter().map(|&ti| a * (-b * (t - ti)).exp()).sum::<f64>()
            }
            ModelKind::PowerLawHawkes => {
                let (mu, a, b) = (p[0], p[1], p[2]);
                mu + h.times.iter().map(|&ti| a * (1.0 + t - ti).powf(-b)).sum::<f64>()
            }
            ModelKind::ShotNoise => {
                let (a, b) = (p[1], p[2]);
                h.latent()?
                    .iter()
                    .map(|&s| a * (-b * (t - s)).exp())
                    .sum::<f64>()
            }
            ModelKind::PeriodicPoisson => p[0] + p[1] * (p[2] * (t - p[3])).sin(),
            ModelKind::SelfCorrecting => {
                let n = h.times.len() as f64;
                p[0] * (p[2] * t + n * p[1].ln()).exp()
            }
            ModelKind::EtasTemporal => {
                let (mu, k, c, b) = (p[0], p[1], p[2], p[3]);
                let marks = h.marks()?;
                mu + h
                    .times
                    .iter()
                    .zip(marks)
                    .map(|(&ti, &m)| (b * (m - self.mark_cutoff)).exp() * k / (t - ti + c))
                    .sum::<f64>()
            }
            ModelKind::Recursive => {
                let (mu, kappa, b, a) = (p[0], p[1], p[2], p[3]);
                let lam = h.event_intensities()?;
                mu + h
                    .times
                    .iter()
                    .zip(lam)
                    .map(|(&ti, &l)| kappa * l.powf(-a) * b * (-b * (t - ti)).exp())
                    .sum::<f64>()
            }
        };
        Ok(v)
    }

    pub(crate) fn compensator_scalar(&self, t: f64, h: &History<'_>) -> Result<f64> {
        h.check_time(t)?;
        let p = &self.params;
        let v = match self.kind {
            ModelKind::ExpHawkes => {
                let (mu, a, b) = (p[0], p[1], p[2]);
                mu * t
                    + h.times
                        .iter()
                        .map(|&ti| a / b * -(-b * (t - ti)).exp_m1())
                        .sum::<f64>()
            }
            ModelKind::PowerLawHawkes => {
                let (mu, a, b) = (p[0], p[1], p[2]);
                mu * t
                    + h.times
                        .iter()
                        .map(|&ti| power_law_integral(a, b, t - ti))
                        .sum::<f64>()
            }
            ModelKind::ShotNoise => {
                let (a, b) = (p[1], p[2]);
                h.latent()?
                    .iter()
                    .map(|&s| a / b * -(-b * (t - s)).exp_m1())
                    .sum::<f64>()
            }
            ModelKind::PeriodicPoisson => periodic_compensator(p, t),
            ModelKind::SelfCorrecting => self_correcting_compensator(p, h.times, t),
            ModelKind::EtasTemporal => {
                let (mu, k, c, b) = (p[0], p[1], p[2], p[3]);
                let marks = h.marks()?;
                mu * t
                    + h.times
                        .iter()
                        .zip(marks)
                        .map(|(&ti, &m)| {
                            (b * (m - self.mark_cutoff)).exp() * k * ((t - ti) / c).ln_1p()
                        })
                        .sum::<f64>()
            }
            ModelKind::Recursive => {
                let (mu, kappa, b, a) = (p[0], p[1], p[2], p[3]);
                let lam = h.event_intensities()?;
                mu * t
                    + h.times
                        .iter()
                        .zip(lam)
                        .map(|(&ti, &l)| kappa * l.powf(-a) * -(-b * (t - ti)).exp_m1())
                        .sum::<f64>()
            }
        };
        Ok(v)
    }

    fn check_realization(&self, r: &Realization) -> Result<()> {
        if r.dim != self.dim {
            return invalid(format!(
                "model dimension {} does not match realization dimension {}",
                self.dim, r.dim
            ));
        }
        if self.kind.requires_marks() && r.marks.is_none() {
            return invalid(format!("{} requires event marks", self.kind));
        }
        if self.kind.is_latent_driven() && r.latent.is_none() {
            return Err(Error::InvalidState(format!(
                "{} intensity needs the latent shot times of the realization",
                self.kind
            )));
        }
        Ok(())
    }

    /// Left-limit intensities `λ(tᵢ-)` at every event, in event order.
    ///
    /// O(n) for the exponential-kernel families and the self-correcting
    /// process; O(n²) for the power-law and ETAS kernels. For `Recursive`
    /// this is the event-intensity cache its intensity is defined through.
    pub fn event_intensities(&self, r: &Realization) -> Result<Vec<f64>> {
        self.check_realization(r)?;
        let p = &self.params;
        let times = &r.times;
        let n = times.len();
        let mut out = Vec::with_capacity(n);
        match self.kind {
            ModelKind::ExpHawkes => {
                let (mu, a, b) = (p[0], p[1], p[2]);
                // decay-weighted count of earlier events
                let mut acc = 0.0;
                let mut last = 0.0;
                for &t in times {
                    acc *= (-b * (t - last)).exp();
                    out.push(mu + a * acc);
                    acc += 1.0;
                    last = t;
                }
            }
            ModelKind::Recursive => {
                let (mu, kappa, b, a) = (p[0], p[1], p[2], p[3]);
                let mut exc = 0.0;
                let mut last = 0.0;
                for &t in times {
                    exc *= (-b * (t - last)).exp();
                    let lam = mu + exc;
                    out.push(lam);
                    exc += kappa * lam.powf(-a) * b;
                    last = t;
                }
            }
            ModelKind::ShotNoise => {
                let (a, b) = (p[1], p[2]);
                let shots = r.latent.as_deref().unwrap_or(&[]);
                let mut exc = 0.0;
                let mut last = 0.0;
                let mut j = 0;
                for &t in times {
                    while j < shots.len() && shots[j] < t {
                        exc = exc * (-b * (shots[j] - last)).exp() + a;
                        last = shots[j];
                        j += 1;
                    }
                    out.push(exc * (-b * (t - last)).exp());
                }
            }
            ModelKind::SelfCorrecting => {
                let ln_a = p[1].ln();
                for (i, &t) in times.iter().enumerate() {
                    out.push(p[0] * (p[2] * t + i as f64 * ln_a).exp());
                }
            }
            ModelKind::PeriodicPoisson => {
                out.extend(times.iter().map(|&t| p[0] + p[1] * (p[2] * (t - p[3])).sin()));
            }
            ModelKind::PowerLawHawkes | ModelKind::EtasTemporal => {
                for (i, &t) in times.iter().enumerate() {
                    let h = History::prefix(r, i);
                    out.push(self.intensity_scalar(t, &h)?);
                }
            }
        }
        Ok(out)
    }

    /// Compensator at each of the ascending query times.
    pub fn compensator_at(&self, r: &Realization, query: &[f64]) -> Result<Vec<f64>> {
        self.check_realization(r)?;
        if query.windows(2).any(|w| w[1] < w[0]) {
            return invalid("compensator query times must be ascending");
        }
        if let Some(&q) = query.iter().find(|&&q| q < 0.0 || q > r.horizon || q.is_nan()) {
            return Err(Error::Domain(format!(
                "time {q} outside the observation window [0, {}]",
                r.horizon
            )));
        }
        let p = &self.params;
        let times = &r.times;
        let mut out = Vec::with_capacity(query.len());
        match self.kind {
            ModelKind::ExpHawkes | ModelKind::Recursive | ModelKind::ShotNoise => {
                // Λ(t) = base(t) + Σ wᵢ (1 - e^{-β(t-tᵢ)}) over drivers before t,
                // swept with a running (Σ wᵢ, Σ wᵢ e^{-β(t-tᵢ)}) pair.
                let (base_rate, b) = match self.kind {
                    ModelKind::ExpHawkes => (p[0], p[2]),
                    ModelKind::Recursive => (p[0], p[2]),
                    _ => (0.0, p[2]),
                };
                let (drivers, weights): (Vec<f64>, Vec<f64>) = match self.kind {
                    ModelKind::ExpHawkes => (times.clone(), vec![p[1] / b; times.len()]),
                    ModelKind::Recursive => {
                        let lam = self.event_intensities(r)?;
                        let w = lam.iter().map(|l| p[1] * l.powf(-p[3])).collect();
                        (times.clone(), w)
                    }
                    _ => {
                        let shots = r.latent.clone().unwrap_or_default();
                        let w = vec![p[1] / b; shots.len()];
                        (shots, w)
                    }
                };
                let mut total = 0.0;
                let mut decayed = 0.0;
                let mut last = 0.0;
                let mut j = 0;
                for &q in query {
                    while j < drivers.len() && drivers[j] < q {
                        decayed = decayed * (-b * (drivers[j] - last)).exp() + weights[j];
                        total += weights[j];
                        last = drivers[j];
                        j += 1;
                    }
                    let d = decayed * (-b * (q - last)).exp();
                    out.push(base_rate * q + (total - d));
                }
            }
            ModelKind::SelfCorrecting => {
                let mut acc = 0.0;
                let mut seg_start = 0.0;
                let mut j = 0;
                for &q in query {
                    while j < times.len() && times[j] < q {
                        acc += self_correcting_segment(p, j, seg_start, times[j]);
                        seg_start = times[j];
                        j += 1;
                    }
                    out.push(acc + self_correcting_segment(p, j, seg_start, q));
                }
            }
            ModelKind::PeriodicPoisson => {
                out.extend(query.iter().map(|&q| periodic_compensator(p, q)));
            }
            ModelKind::PowerLawHawkes | ModelKind::EtasTemporal => {
                let mut j = 0;
                for &q in query {
                    while j < times.len() && times[j] < q {
                        j += 1;
                    }
                    let h = History::prefix(r, j);
                    out.push(self.compensator_scalar(q, &h)?);
                }
            }
        }
        Ok(out)
    }
}

/// `∫_0^u α (1+s)^{-β} ds`, with the logarithmic branch at β = 1.
fn power_law_integral(alpha: f64, beta: f64, u: f64) -> f64 {
    if (beta - 1.0).abs() < 1e-12 {
        alpha * u.ln_1p()
    } else {
        alpha / (beta - 1.0) * -(((1.0 - beta) * u.ln_1p()).exp_m1())
    }
}

fn periodic_compensator(p: &[f64], t: f64) -> f64 {
    let (mu, a, b, g) = (p[0], p[1], p[2], p[3]);
    mu * t + a / b * ((b * g).cos() - (b * (t - g)).cos())
}

/// `∫_{lo}^{hi} μ e^{βs} α^k ds`, evaluated in log space.
fn self_correcting_segment(p: &[f64], k: usize, lo: f64, hi: f64) -> f64 {
    let (mu, a, b) = (p[0], p[1], p[2]);
    let shift = k as f64 * a.ln();
    if b.abs() < 1e-300 {
        return mu * shift.exp() * (hi - lo);
    }
    // μ/β (e^{βhi+shift} - e^{βlo+shift})
    let lo_e = b * lo + shift;
    let hi_e = b * hi + shift;
    mu / b * lo_e.exp() * (hi_e - lo_e).exp_m1()
}

fn self_correcting_compensator(p: &[f64], before: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    let mut start = 0.0;
    for (k, &ti) in before.iter().enumerate() {
        acc += self_correcting_segment(p, k, start, ti);
        start = ti;
    }
    acc + self_correcting_segment(p, before.len(), start, t)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StabilityReport {
    pub stable: bool,
    pub diagnostic: String,
}

/// Event times on `[0, horizon]` with coordinates, optional marks and, for
/// latent-driven processes, the latent driver times kept on the side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub(crate) times: Vec<f64>,
    /// Zero-based coordinate of each event.
    pub(crate) coords: Vec<usize>,
    pub(crate) marks: Option<Vec<f64>>,
    pub(crate) horizon: f64,
    pub(crate) dim: usize,
    /// Latent shot times (shot-noise only). Not part of the observed data.
    pub(crate) latent: Option<Vec<f64>>,
}

impl Realization {
    /// Univariate, unmarked realization.
    pub fn new(times: Vec<f64>, horizon: f64) -> Result<Self> {
        let n = times.len();
        Self::from_parts(times, vec![0; n], None, horizon, 1)
    }

    pub fn from_parts(
        times: Vec<f64>,
        coords: Vec<usize>,
        marks: Option<Vec<f64>>,
        horizon: f64,
        dim: usize,
    ) -> Result<Self> {
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return invalid(format!("horizon must be finite and nonnegative, got {horizon}"));
        }
        if dim == 0 {
            return invalid("dimension must be at least 1");
        }
        if coords.len() != times.len() {
            return invalid("coords and times differ in length");
        }
        if let Some(m) = &marks {
            if m.len() != times.len() {
                return invalid("marks and times differ in length");
            }
            if m.iter().any(|x| !x.is_finite()) {
                return invalid("non-finite mark");
            }
        }
        if let Some(i) = times.iter().position(|&t| !(0.0..=horizon).contains(&t)) {
            return invalid(format!(
                "event {i} at time {} outside [0, {horizon}]",
                times[i]
            ));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return invalid(format!(
                "event times must be strictly increasing (events {i} and {})",
                i + 1
            ));
        }
        if let Some(&c) = coords.iter().find(|&&c| c >= dim) {
            return invalid(format!("coordinate {c} out of range for dimension {dim}"));
        }
        Ok(Realization {
            times,
            coords,
            marks,
            horizon,
            dim,
            latent: None,
        })
    }

    pub fn with_marks(mut self, marks: Vec<f64>) -> Result<Self> {
        if marks.len() != self.times.len() {
            return invalid("marks and times differ in length");
        }
        self.marks = Some(marks);
        Ok(self)
    }

    pub(crate) fn with_latent(mut self, latent: Vec<f64>) -> Self {
        self.latent = Some(latent);
        self
    }

    pub fn empty(horizon: f64) -> Self {
        Realization {
            times: Vec::new(),
            coords: Vec::new(),
            marks: None,
            horizon,
            dim: 1,
            latent: None,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords
    }

    pub fn marks(&self) -> Option<&[f64]> {
        self.marks.as_deref()
    }

    pub fn latent(&self) -> Option<&[f64]> {
        self.latent.as_deref()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Events with `tᵢ < t`.
    pub fn count_before(&self, t: f64) -> usize {
        self.times.partition_point(|&x| x < t)
    }

    /// Events with `tᵢ ≤ t` (right-continuous counting process).
    pub fn count_upto(&self, t: f64) -> usize {
        self.times.partition_point(|&x| x <= t)
    }

    /// Per-coordinate event counts on the whole window.
    pub fn counts_by_coord(&self) -> Vec<usize> {
        let mut c = vec![0; self.dim];
        for &k in &self.coords {
            c[k] += 1;
        }
        c
    }
}

/// The events of a realization strictly before some time.
#[derive(Debug, Clone, Copy)]
pub struct History<'a> {
    times: &'a [f64],
    marks: Option<&'a [f64]>,
    latent: Option<&'a [f64]>,
    event_intensities: Option<&'a [f64]>,
    horizon: f64,
}

impl<'a> History<'a> {
    /// Events of `r` with `tᵢ < t`.
    pub fn before(r: &'a Realization, t: f64) -> Self {
        let n = r.count_before(t);
        let mut h = Self::prefix(r, n);
        if let Some(lat) = r.latent.as_deref() {
            h.latent = Some(&lat[..lat.partition_point(|&s| s < t)]);
        }
        h
    }

    /// The first `n` events of `r`.
    pub(crate) fn prefix(r: &'a Realization, n: usize) -> Self {
        History {
            times: &r.times[..n],
            marks: r.marks.as_deref().map(|m| &m[..n]),
            latent: r.latent.as_deref(),
            event_intensities: None,
            horizon: r.horizon,
        }
    }

    /// Attaches the per-event intensity cache (full length or prefix length).
    pub fn with_event_intensities(mut self, cache: &'a [f64]) -> Self {
        let n = self.times.len().min(cache.len());
        self.event_intensities = Some(&cache[..n]);
        self
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &'a [f64] {
        self.times
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::Domain(format!(
                "time {t} outside the observation window [0, {}]",
                self.horizon
            )));
        }
        Ok(())
    }

    fn marks(&self) -> Result<&'a [f64]> {
        self.marks
            .ok_or_else(|| Error::InvalidInput("ETAS intensity requires event marks".into()))
    }

    fn latent(&self) -> Result<&'a [f64]> {
        self.latent.ok_or_else(|| {
            Error::InvalidState("shot-noise intensity needs the latent shot times".into())
        })
    }

    fn event_intensities(&self) -> Result<&'a [f64]> {
        match self.event_intensities {
            Some(c) if c.len() == self.times.len() => Ok(c),
            _ => Err(Error::InvalidState(
                "recursive intensity queried without the event-intensity cache".into(),
            )),
        }
    }
}
