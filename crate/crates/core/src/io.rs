//! CSV helpers for event files and numeric output.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Realization;

const SIG_DIGITS: usize = 12;

/// Formats `x` with 12 significant digits, like C's `%.12g`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= SIG_DIGITS as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes events as `time,coord[,mark]` preceded by a `# horizon=T` line.
/// Coordinates are written 1-based.
pub fn write_realization<W: Write>(r: &Realization, mut out: W) -> Result<()> {
    writeln!(out, "# horizon={}", fmt_num(r.horizon()))?;
    let mut w = csv::Writer::from_writer(out);
    let marks = r.marks();
    if marks.is_some() {
        w.write_record(["time", "coord", "mark"])?;
    } else {
        w.write_record(["time", "coord"])?;
    }
    for (i, (&t, &k)) in r.times().iter().zip(r.coords()).enumerate() {
        let mut row = vec![fmt_num(t), (k + 1).to_string()];
        if let Some(m) = marks {
            row.push(fmt_num(m[i]));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_realization_file(r: &Realization, path: &Path) -> Result<()> {
    write_realization(r, std::io::BufWriter::new(File::create(path)?))
}

/// Reads an event file written by [`write_realization`].
///
/// `horizon` overrides the file's `# horizon=` line; one of the two is
/// required. The `coord` column is optional (defaults to 1) and `mark` is
/// optional. Rows must be in time order.
pub fn read_realization<R: Read>(input: R, horizon: Option<f64>) -> Result<Realization> {
    let mut reader = BufReader::new(input);
    let mut text = String::new();
    let mut file_horizon = None;
    let mut line = String::new();
    while reader.read_line(&mut line)? > 0 {
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix('#') {
            if let Some(v) = rest.trim().strip_prefix("horizon=") {
                file_horizon = Some(v.trim().parse::<f64>().map_err(|_| {
                    Error::Parse(format!("bad horizon value '{}'", v.trim()))
                })?);
            }
        } else if !trimmed.is_empty() {
            text.push_str(&line);
        }
        line.clear();
    }
    let horizon = horizon.or(file_horizon).ok_or_else(|| {
        Error::InvalidInput("event file has no '# horizon=' line; pass the horizon explicitly".into())
    })?;

    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let time_col = col("time").ok_or_else(|| Error::Parse("missing 'time' column".into()))?;
    let coord_col = col("coord");
    let mark_col = col("mark");

    let mut times = Vec::new();
    let mut coords = Vec::new();
    let mut marks = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let field = |c: usize, what: &str| -> Result<f64> {
            let raw = rec.get(c).unwrap_or("");
            raw.parse::<f64>()
                .map_err(|_| Error::Parse(format!("row {row}: bad {what} '{raw}'")))
        };
        times.push(field(time_col, "time")?);
        let k = match coord_col {
            Some(c) => {
                let raw = rec.get(c).unwrap_or("");
                let k: usize = raw
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {row}: bad coord '{raw}'")))?;
                if k == 0 {
                    return Err(Error::Parse(format!("row {row}: coordinates are 1-based")));
                }
                k - 1
            }
            None => 0,
        };
        coords.push(k);
        if let Some(c) = mark_col {
            marks.push(field(c, "mark")?);
        }
    }
    let dim = coords.iter().max().map_or(1, |k| k + 1);
    let marks = mark_col.map(|_| marks);
    Realization::from_parts(times, coords, marks, horizon, dim)
}

pub fn read_realization_file(path: &Path, horizon: Option<f64>) -> Result<Realization> {
    read_realization(File::open(path)?, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(0.1), "0.1");
        assert_eq!(fmt_num(5000.0), "5000");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(-2.0 / 3.0 * 1e4), "-6666.66666667");
        assert_eq!(fmt_num(1.5e-7), "1.5e-07");
        assert_eq!(fmt_num(123456789012345.0), "1.23456789012e+14");
        assert_eq!(fmt_num(0.0001), "0.0001");
    }

    #[test]
    fn roundtrip() {
        let r = Realization::new(vec![0.25, 1.0 / 3.0, 7.5], 10.0)
            .unwrap()
            .with_marks(vec![6.1, 6.5, 7.0])
            .unwrap();
        let mut buf = Vec::new();
        write_realization(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# horizon=10\ntime,coord,mark\n0.25,1,6.1\n"));
        let back = read_realization(buf.as_slice(), None).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back.horizon(), 10.0);
        assert_eq!(back.marks().unwrap(), &[6.1, 6.5, 7.0]);
        assert!((back.times()[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn bad_rows_are_reported() {
        let text = "time\n1.0\nabc\n";
        let err = read_realization(text.as_bytes(), Some(5.0)).unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
        assert!(read_realization("time\n1.0\n".as_bytes(), None).is_err());
        assert!(read_realization("time\n2.0\n1.0\n".as_bytes(), Some(5.0)).is_err());
    }
}
