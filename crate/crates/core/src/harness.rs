//! Declarative Monte Carlo experiments: simulate, fit, test, count rejections.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimate::{fit_mle, FitOptions};
use crate::gof::{choose_n, path_test_with_grid, rtc_test, Procedure, TestReport, DEFAULT_TAU};
use crate::io::fmt_num;
use crate::model::{ModelKind, ModelSpec, DEFAULT_MARK_CUTOFF};
use crate::simulate::{simulate_with, stream, SeedSpec, SimOptions};
use crate::stattests::{kolmogorov_quantile, GofTest, NullDistribution};

pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable overriding the worker pool size.
pub const WORKERS_ENV: &str = "PPGOF_WORKERS";
/// Fraction of failed attempts above which an experiment is abandoned.
pub const MAX_FAILURE_RATE: f64 = 0.05;
const MAX_ATTEMPTS: u32 = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrueModel {
    pub kind: ModelKind,
    pub params: Vec<f64>,
    #[serde(default)]
    pub allow_unstable: bool,
    #[serde(default = "default_cutoff")]
    pub mark_cutoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NullFamily {
    pub kind: ModelKind,
    /// Per-parameter `[lo, hi]`; the family defaults when absent.
    #[serde(default)]
    pub bounds: Option<Vec<(f64, f64)>>,
    #[serde(default = "default_starts")]
    pub n_starts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountBasis {
    /// `n` from the horizon `T`.
    Horizon,
    /// `n` from the observed event count.
    Count,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NRule {
    pub c: f64,
    #[serde(default = "one")]
    pub floor: usize,
    #[serde(default = "default_basis")]
    pub basis: CountBasis,
}

impl Default for NRule {
    fn default() -> Self {
        NRule {
            c: 0.25,
            floor: 1,
            basis: CountBasis::Horizon,
        }
    }
}

impl NRule {
    pub fn n_for(&self, horizon: f64, count: usize) -> Result<usize> {
        let basis = match self.basis {
            CountBasis::Horizon => horizon,
            CountBasis::Count => count as f64,
        };
        choose_n(basis, self.c, self.floor)
    }
}

fn default_cutoff() -> f64 {
    DEFAULT_MARK_CUTOFF
}
fn default_starts() -> usize {
    5
}
fn one() -> usize {
    1
}
fn default_basis() -> CountBasis {
    CountBasis::Horizon
}
fn default_tau() -> f64 {
    DEFAULT_TAU
}
fn default_levels() -> Vec<f64> {
    vec![0.01, 0.05, 0.20]
}

/// One Monte Carlo experiment, read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment_seed: u64,
    pub replications: usize,
    pub horizon: f64,
    pub true_model: TrueModel,
    pub null_family: NullFamily,
    pub procedures: Vec<Procedure>,
    pub tests: Vec<GofTest>,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    #[serde(default)]
    pub n_rule: NRule,
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Grid size `m`; `max(4096, 64 n)` when absent.
    #[serde(default)]
    pub grid: Option<usize>,
    /// Worker pool size; `PPGOF_WORKERS` or the machine default when absent.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if let Some(l) = self.levels.iter().find(|&&l| !(l > 0.0 && l < 1.0)) {
            return bad(format!("level {l} outside (0, 1)"));
        }
        if self.procedures.is_empty() || self.tests.is_empty() {
            return bad("at least one procedure and one test are required".into());
        }
        if self.levels.is_empty() {
            return bad("at least one level is required".into());
        }
        if self.null_family.n_starts == 0 {
            return bad("null_family.n_starts must be at least 1".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        let truth = self.true_model_spec()?;
        let stability = truth.stability_check();
        if !stability.stable && !self.true_model.allow_unstable {
            return bad(format!(
                "true_model fails its stability check ({}); set allow_unstable = true to run it",
                stability.diagnostic
            ));
        }
        if let Some(b) = &self.null_family.bounds {
            if b.len() != self.null_family.kind.n_params() {
                return bad(format!(
                    "null_family.bounds has {} entries, {} needs {}",
                    b.len(),
                    self.null_family.kind,
                    self.null_family.kind.n_params()
                ));
            }
        }
        Ok(())
    }

    pub fn true_model_spec(&self) -> Result<ModelSpec> {
        Ok(ModelSpec::new(self.true_model.kind, &self.true_model.params)?
            .with_mark_cutoff(self.true_model.mark_cutoff))
    }
}

/// Rejection count at one (procedure, test, level).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionRow {
    pub procedure: Procedure,
    pub test: GofTest,
    pub level: f64,
    pub rejections: usize,
    pub total: usize,
}

/// One logged test outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueRecord {
    pub replication: usize,
    /// Redraws needed before this replication succeeded.
    pub attempt: u32,
    pub procedure: Procedure,
    pub test: GofTest,
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionTable {
    pub rows: Vec<RejectionRow>,
    pub log: Vec<PValueRecord>,
    /// Failed attempts that were redrawn.
    pub failures: usize,
}

impl RejectionTable {
    /// Counts `p < level` from a p-value log.
    pub fn from_log(
        log: Vec<PValueRecord>,
        procedures: &[Procedure],
        tests: &[GofTest],
        levels: &[f64],
        failures: usize,
    ) -> Self {
        let mut rows = Vec::new();
        for &procedure in procedures {
            for &test in tests {
                let ps: Vec<f64> = log
                    .iter()
                    .filter(|r| r.procedure == procedure && r.test == test)
                    .map(|r| r.p_value)
                    .collect();
                for &level in levels {
                    rows.push(RejectionRow {
                        procedure,
                        test,
                        level,
                        rejections: ps.iter().filter(|&&p| p < level).count(),
                        total: ps.len(),
                    });
                }
            }
        }
        RejectionTable {
            rows,
            log,
            failures,
        }
    }

    pub fn count(&self, procedure: Procedure, test: GofTest, level: f64) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.procedure == procedure && r.test == test && (r.level - level).abs() < 1e-12)
            .map(|r| r.rejections)
    }

    /// Logged records for one (procedure, test), in replication order.
    pub fn records(&self, procedure: Procedure, test: GofTest) -> Vec<&PValueRecord> {
        self.log
            .iter()
            .filter(|r| r.procedure == procedure && r.test == test)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["procedure", "test", "level", "rejections", "total"])?;
        for r in &self.rows {
            w.write_record([
                r.procedure.name().to_string(),
                r.test.name().to_string(),
                fmt_num(r.level),
                r.rejections.to_string(),
                r.total.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_log_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "replication",
            "attempt",
            "procedure",
            "test",
            "statistic",
            "p_value",
            "n_effective",
        ])?;
        for r in &self.log {
            w.write_record([
                r.replication.to_string(),
                r.attempt.to_string(),
                r.procedure.name().to_string(),
                r.test.name().to_string(),
                fmt_num(r.statistic),
                fmt_num(r.p_value),
                r.n_effective.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_log_csv<R: std::io::Read>(input: R) -> Result<Vec<PValueRecord>> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut out = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let get = |c: usize| rec.get(c).unwrap_or("");
            let parse_err = |what: &str| Error::Parse(format!("row {}: bad {what}", i + 2));
            out.push(PValueRecord {
                replication: get(0).parse().map_err(|_| parse_err("replication"))?,
                attempt: get(1).parse().map_err(|_| parse_err("attempt"))?,
                procedure: get(2).parse()?,
                test: get(3).parse()?,
                statistic: get(4).parse().map_err(|_| parse_err("statistic"))?,
                p_value: get(5).parse().map_err(|_| parse_err("p_value"))?,
                n_effective: get(6).parse().map_err(|_| parse_err("n_effective"))?,
            });
        }
        Ok(out)
    }
}

/// Worker count: config, then `PPGOF_WORKERS`, then the machine default.
pub fn worker_count(configured: Option<usize>) -> Result<usize> {
    if let Some(w) = configured {
        return Ok(w.max(1));
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::Config(format!("{WORKERS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Failures that are retried with a fresh seed rather than aborting.
fn retryable(e: &Error) -> bool {
    e.is_numerical() || matches!(e, Error::InsufficientData(_))
}

struct ReplicationOutcome {
    records: Vec<PValueRecord>,
    failures: usize,
}

fn run_replication(cfg: &ExperimentConfig, truth: &ModelSpec, index: usize) -> Result<ReplicationOutcome> {
    let base = SeedSpec::new(cfg.experiment_seed, index as u64);
    let sim = SimOptions {
        allow_unstable: cfg.true_model.allow_unstable,
        ..SimOptions::default()
    };
    let mut failures = 0;
    for attempt in 0..MAX_ATTEMPTS {
        let seed = base.redraw(attempt);
        match replication_once(cfg, truth, seed, &sim) {
            Ok(reports) => {
                let records = reports
                    .into_iter()
                    .map(|r| PValueRecord {
                        replication: index,
                        attempt,
                        procedure: r.procedure,
                        test: r.test,
                        statistic: r.statistic,
                        p_value: r.p_value,
                        n_effective: r.n_effective,
                    })
                    .collect();
                return Ok(ReplicationOutcome { records, failures });
            }
            Err(e) if retryable(&e) => failures += 1,
            Err(e) => return Err(e),
        }
    }
    Err(Error::FitFailure(format!(
        "replication {index} failed {MAX_ATTEMPTS} times in a row"
    )))
}

fn replication_once(
    cfg: &ExperimentConfig,
    truth: &ModelSpec,
    seed: SeedSpec,
    sim: &SimOptions,
) -> Result<Vec<TestReport>> {
    let r = simulate_with(truth, cfg.horizon, seed, sim)?;
    let fit_opts = FitOptions {
        n_starts: cfg.null_family.n_starts,
        seed: seed.rng(stream::FIT_STARTS).next_u64(),
        mark_cutoff: cfg.true_model.mark_cutoff,
        ..FitOptions::default()
    };
    let fit = fit_mle(cfg.null_family.kind, &r, cfg.null_family.bounds.as_deref(), &fit_opts)?;
    let n = cfg.n_rule.n_for(cfg.horizon, r.len())?;
    let m = cfg.grid.unwrap_or_else(|| crate::gof::default_grid(n));
    let mut out = Vec::new();
    for &procedure in &cfg.procedures {
        for &test in &cfg.tests {
            out.push(match procedure {
                Procedure::Rtc => rtc_test(&r, &fit, test)?,
                p => path_test_with_grid(p, &r, &fit, n, cfg.tau, test, m)?,
            });
        }
    }
    Ok(out)
}

/// Runs every replication on a worker pool and tallies rejections.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RejectionTable> {
    cfg.validate()?;
    let truth = cfg.true_model_spec()?;
    let workers = worker_count(cfg.workers)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    let outcomes: Vec<Result<ReplicationOutcome>> = pool.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|i| run_replication(cfg, &truth, i))
            .collect()
    });
    let mut log = Vec::new();
    let mut failures = 0;
    for o in outcomes {
        let o = o?;
        failures += o.failures;
        log.extend(o.records);
    }
    let rate = failures as f64 / cfg.replications as f64;
    if rate > MAX_FAILURE_RATE {
        return Err(Error::FitFailure(format!(
            "{failures} failed attempts over {} replications exceeds the {:.0}% limit",
            cfg.replications,
            100.0 * MAX_FAILURE_RATE
        )));
    }
    Ok(RejectionTable::from_log(
        log,
        &dedup(&cfg.procedures),
        &dedup(&cfg.tests),
        &cfg.levels,
        failures,
    ))
}

fn dedup<T: Copy + Ord>(v: &[T]) -> Vec<T> {
    let mut seen = BTreeSet::new();
    v.iter().copied().filter(|x| seen.insert(*x)).collect()
}

/// Reference distribution for Q-Q pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QqReference {
    Kolmogorov,
    StdNormal,
    StdExponential,
}

impl std::str::FromStr for QqReference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "kolmogorov" | "ks" => Ok(QqReference::Kolmogorov),
            "std-normal" | "normal" => Ok(QqReference::StdNormal),
            "std-exponential" | "exponential" | "exp" => Ok(QqReference::StdExponential),
            _ => invalid(format!(
                "unknown reference '{s}' (kolmogorov, std-normal, std-exponential)"
            )),
        }
    }
}

impl QqReference {
    pub fn quantile(self, p: f64) -> f64 {
        match self {
            QqReference::Kolmogorov => kolmogorov_quantile(p),
            QqReference::StdNormal => NullDistribution::StdNormal.quantile(p),
            QqReference::StdExponential => NullDistribution::StdExponential.quantile(p),
        }
    }
}

/// Sorted sample against reference quantiles at `(i - 1/2)/n`.
pub fn qq_data(sample: &[f64], reference: QqReference) -> Result<Vec<(f64, f64)>> {
    if sample.is_empty() {
        return invalid("Q-Q data needs a nonempty sample");
    }
    if sample.iter().any(|x| x.is_nan()) {
        return invalid("Q-Q sample contains NaN");
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    Ok(xs
        .into_iter()
        .enumerate()
        .map(|(i, x)| (x, reference.quantile((i as f64 + 0.5) / n)))
        .collect())
}

/// Least-squares line `empirical = intercept + slope * theoretical`.
pub fn qq_line(pairs: &[(f64, f64)]) -> (f64, f64) {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let sxy: f64 = pairs.iter().map(|p| (p.1 - mx) * (p.0 - my)).sum();
    let sxx: f64 = pairs.iter().map(|p| (p.1 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub fn write_qq_csv<W: Write>(pairs: &[(f64, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["empirical", "theoretical"])?;
    for (e, t) in pairs {
        w.write_record([fmt_num(*e), fmt_num(*t)])?;
    }
    w.flush()?;
    Ok(())
}

/// KS statistics on the `√n D` scale used by Kolmogorov Q-Q plots.
pub fn scaled_ks(records: &[&PValueRecord]) -> Vec<f64> {
    records
        .iter()
        .map(|r| (r.n_effective as f64).sqrt() * r.statistic)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
schema_version = 1
experiment_seed = 42
replications = 4
horizon = 300.0
procedures = ["transform", "naive", "rtc"]
tests = ["ks", "ad"]
levels = [0.01, 0.05, 0.2]
tau = 0.9

[true_model]
kind = "exp-hawkes"
params = [0.5, 1.0, 2.0]

[null_family]
kind = "exp-hawkes"
n_starts = 2

[n_rule]
c = 0.25
floor = 1
"#;

    #[test]
    fn parses_and_rejects_unknown_keys() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.replications, 4);
        assert_eq!(cfg.null_family.kind, ModelKind::ExpHawkes);
        let typo = BASE.replace("tau = 0.9", "tua = 0.9");
        assert!(matches!(ExperimentConfig::from_toml(&typo), Err(Error::Config(_))));
        let nested = BASE.replace("n_starts = 2", "n_start = 2");
        assert!(ExperimentConfig::from_toml(&nested).is_err());
        let version = BASE.replace("schema_version = 1", "schema_version = 2");
        assert!(ExperimentConfig::from_toml(&version).is_err());
        let level = BASE.replace("0.2]", "1.2]");
        assert!(ExperimentConfig::from_toml(&level).is_err());
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn counts_match_log_and_workers_do_not_matter() {
        let mut cfg = ExperimentConfig::from_toml(BASE).unwrap();
        cfg.workers = Some(1);
        let a = run_experiment(&cfg).unwrap();
        cfg.workers = Some(3);
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        a.write_csv(&mut csv_a).unwrap();
        b.write_csv(&mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);

        assert_eq!(a.log.len(), 4 * 3 * 2);
        for row in &a.rows {
            let recount = a
                .records(row.procedure, row.test)
                .iter()
                .filter(|r| r.p_value < row.level)
                .count();
            assert_eq!(recount, row.rejections);
            assert_eq!(row.total, 4);
        }

        let mut log = Vec::new();
        a.write_log_csv(&mut log).unwrap();
        let parsed = RejectionTable::read_log_csv(log.as_slice()).unwrap();
        let rebuilt = RejectionTable::from_log(
            parsed,
            &cfg.procedures,
            &cfg.tests,
            &cfg.levels,
            a.failures,
        );
        assert_eq!(rebuilt.rows, a.rows);
    }

    #[test]
    fn single_replication_bookkeeping() {
        let mut cfg = ExperimentConfig::from_toml(BASE).unwrap();
        cfg.replications = 1;
        cfg.procedures = vec![Procedure::Transform];
        cfg.tests = vec![GofTest::Ks];
        let t = run_experiment(&cfg).unwrap();
        assert_eq!(t.log.len(), 1);
        let p = t.log[0].p_value;
        for row in &t.rows {
            assert_eq!(row.rejections, usize::from(p < row.level));
        }
    }

    #[test]
    fn unstable_truth_needs_opt_in() {
        let text = BASE.replace("params = [0.5, 1.0, 2.0]", "params = [0.5, 3.0, 2.0]");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("allow_unstable"), "{err}");
        let text = text.replace("[null_family]", "").replace(
            "params = [0.5, 3.0, 2.0]",
            "params = [0.5, 3.0, 2.0]\nallow_unstable = true\n\n[null_family]",
        );
        ExperimentConfig::from_toml(&text).unwrap();
    }

    #[test]
    fn qq_of_reference_quantiles_is_diagonal() {
        for reference in [
            QqReference::Kolmogorov,
            QqReference::StdNormal,
            QqReference::StdExponential,
        ] {
            let n = 50;
            let sample: Vec<f64> = (0..n)
                .rev()
                .map(|i| reference.quantile((i as f64 + 0.5) / n as f64))
                .collect();
            let pairs = qq_data(&sample, reference).unwrap();
            for (e, t) in &pairs {
                assert!((e - t).abs() < 1e-9);
            }
            let (slope, icept) = qq_line(&pairs);
            assert!((slope - 1.0).abs() < 1e-9 && icept.abs() < 1e-9);
        }
        assert!(qq_data(&[], QqReference::StdNormal).is_err());
    }

    #[test]
    fn worker_env() {
        assert_eq!(worker_count(Some(3)).unwrap(), 3);
        assert!(worker_count(None).unwrap() >= 1);
    }
}
