//! Event catalogs: loading, magnitude filtering, and within-bucket jitter.

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::Realization;
use crate::simulate::{stream, SeedSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resolution {
    Exact,
    Daily,
    Weekly,
}

impl Resolution {
    /// Bucket width in days.
    pub fn width(self) -> f64 {
        match self {
            Resolution::Exact => 0.0,
            Resolution::Daily => 1.0,
            Resolution::Weekly => 7.0,
        }
    }
}

impl std::str::FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Resolution::Exact),
            "daily" => Ok(Resolution::Daily),
            "weekly" => Ok(Resolution::Weekly),
            _ => invalid(format!("unknown resolution '{s}' (exact, daily, weekly)")),
        }
    }
}

/// How a catalog file is laid out.
///
/// Time values are either ISO dates (`YYYY-MM-DD`) or numbers. Numbers count
/// days from `epoch`, or weeks for weekly catalogs. Times are measured in days
/// from `epoch`; the horizon runs to the end of `window_end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogSchema {
    pub time_column: String,
    pub resolution: Resolution,
    #[serde(default)]
    pub mark_column: Option<String>,
    /// Keep events with mark `>= cutoff`.
    #[serde(default)]
    pub mark_cutoff: Option<f64>,
    /// Rows carry this many events each (weekly case counts, say).
    #[serde(default)]
    pub count_column: Option<String>,
    pub epoch: NaiveDate,
    /// Last day of the study window, inclusive.
    pub window_end: NaiveDate,
}

impl CatalogSchema {
    /// Daily earthquake catalog, magnitudes in `magnitude`, cutoff 6.0,
    /// window 1885-01-01 to 1980-12-31.
    pub fn earthquakes() -> Self {
        CatalogSchema {
            time_column: "date".into(),
            resolution: Resolution::Daily,
            mark_column: Some("magnitude".into()),
            mark_cutoff: Some(6.0),
            count_column: None,
            epoch: date(1885, 1, 1),
            window_end: date(1980, 12, 31),
        }
    }

    /// Weekly case reports, one row per week with a `cases` count,
    /// window 1960-01-01 to 2011-12-31.
    pub fn weekly_cases() -> Self {
        CatalogSchema {
            time_column: "week_start".into(),
            resolution: Resolution::Weekly,
            mark_column: None,
            mark_cutoff: None,
            count_column: Some("cases".into()),
            epoch: date(1960, 1, 1),
            window_end: date(2011, 12, 31),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mark_cutoff.is_some() && self.mark_column.is_none() {
            return invalid("a mark cutoff needs a mark column");
        }
        if self.window_end < self.epoch {
            return invalid(format!(
                "window end {} precedes the epoch {}",
                self.window_end, self.epoch
            ));
        }
        Ok(())
    }

    /// Study-window length in days.
    pub fn horizon(&self) -> f64 {
        (self.window_end - self.epoch).num_days() as f64 + 1.0
    }

    fn parse_time(&self, raw: &str) -> Option<f64> {
        if let Ok(v) = raw.parse::<f64>() {
            if !v.is_finite() {
                return None;
            }
            return Some(match self.resolution {
                Resolution::Weekly => 7.0 * v,
                _ => v,
            });
        }
        let d = NaiveDate::parse_from_str(raw, "%Y-%m-%d").ok()?;
        Some((d - self.epoch).num_days() as f64)
    }
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date")
}

/// Events as read: bucket start times in days (sorted, ties allowed).
#[derive(Debug, Clone, PartialEq)]
pub struct RawCatalog {
    pub times: Vec<f64>,
    pub marks: Option<Vec<f64>>,
    pub horizon: f64,
}

impl RawCatalog {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

pub fn load_events(path: &Path, schema: &CatalogSchema) -> Result<RawCatalog> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", path.display())))?;
    read_events(file, schema)
}

/// Parses a catalog CSV, filters by mark cutoff and sorts by time.
pub fn read_events<R: Read>(input: R, schema: &CatalogSchema) -> Result<RawCatalog> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column '{name}'")))
    };
    let time_col = find(&schema.time_column)?;
    let mark_col = schema.mark_column.as_deref().map(find).transpose()?;
    let count_col = schema.count_column.as_deref().map(find).transpose()?;
    let horizon = schema.horizon();

    let mut events: Vec<(f64, f64)> = Vec::new();
    let mut bad = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let Ok(rec) = rec else {
            bad.push(row);
            continue;
        };
        let time = rec.get(time_col).and_then(|s| schema.parse_time(s));
        let mark = match mark_col {
            Some(c) => rec.get(c).and_then(|s| s.parse::<f64>().ok()).filter(|m| m.is_finite()),
            None => Some(f64::NAN),
        };
        let count = match count_col {
            Some(c) => rec.get(c).and_then(|s| s.parse::<usize>().ok()),
            None => Some(1),
        };
        let (Some(t), Some(m), Some(k)) = (time, mark, count) else {
            bad.push(row);
            continue;
        };
        if !(0.0..horizon).contains(&t) {
            bad.push(row);
            continue;
        }
        if schema.mark_cutoff.is_some_and(|cut| m < cut) {
            continue;
        }
        events.extend(std::iter::repeat_n((t, m), k));
    }
    if !bad.is_empty() {
        let shown: Vec<String> = bad.iter().take(20).map(usize::to_string).collect();
        let more = if bad.len() > 20 { ", ..." } else { "" };
        return Err(Error::Parse(format!(
            "{} unparseable or out-of-window rows: {}{more}",
            bad.len(),
            shown.join(", ")
        )));
    }
    if events.is_empty() {
        return Err(Error::InsufficientData("no events left after filtering".into()));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let times = events.iter().map(|e| e.0).collect();
    let marks = mark_col.map(|_| events.iter().map(|e| e.1).collect());
    Ok(RawCatalog {
        times,
        marks,
        horizon,
    })
}

/// Spreads each event uniformly over its time bucket and returns a
/// strictly increasing realization on `[0, horizon]`.
///
/// Exact-resolution catalogs pass through unchanged (and must not contain
/// ties).
pub fn jitter(catalog: &RawCatalog, resolution: Resolution, seed: u64) -> Result<Realization> {
    let width = resolution.width();
    // the last bucket may be cut short by the window end
    let bucket = |t: f64| width.min(catalog.horizon - t);
    let mut events: Vec<(f64, f64, f64)> = if width == 0.0 {
        catalog.times.iter().map(|&t| (t, t, 0.0)).collect()
    } else {
        let mut rng = SeedSpec::new(seed, 0).rng(stream::JITTER);
        catalog
            .times
            .iter()
            .map(|&t| (t, t + bucket(t) * rng.random::<f64>(), 0.0))
            .collect()
    };
    if let Some(marks) = &catalog.marks {
        for (e, &m) in events.iter_mut().zip(marks) {
            e.2 = m;
        }
    }
    if width > 0.0 {
        let mut rng = SeedSpec::new(seed, 1).rng(stream::JITTER);
        loop {
            events.sort_by(|a, b| a.1.total_cmp(&b.1));
            let ties: Vec<usize> = (1..events.len())
                .filter(|&i| events[i].1 <= events[i - 1].1)
                .collect();
            if ties.is_empty() {
                break;
            }
            for i in ties {
                events[i].1 = events[i].0 + bucket(events[i].0) * rng.random::<f64>();
            }
        }
    }
    let times: Vec<f64> = events.iter().map(|e| e.1).collect();
    let n = times.len();
    let marks = catalog.marks.as_ref().map(|_| events.iter().map(|e| e.2).collect());
    Realization::from_parts(times, vec![0; n], marks, catalog.horizon, 1)
}
