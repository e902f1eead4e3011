//! File formats.
//!
//! Input records are CSV with a header naming `label` and `prediction`
//! columns (other columns are ignored); an empty `label` marks an
//! unlabelled record. Outputs are CSV with every number written to 17
//! significant digits, so they re-parse to the same `f64`.

use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;

use avppi_core::Observation;

use crate::error::{AppError, Result};

/// Formats `x` with 17 significant digits; non-finite values print as
/// `nan`, `inf`, `-inf`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Formats `x` in fixed notation with `digits` significant digits.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x:.*}", digits.saturating_sub(1));
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

fn parse_num(field: &str, line: u64, column: &str) -> Result<f64> {
    let x: f64 = field
        .trim()
        .parse()
        .map_err(|_| AppError::data(format!("line {line}: {column} {field:?} is not a number")))?;
    if !x.is_finite() {
        return Err(AppError::data(format!("line {line}: {column} must be finite, got {field:?}")));
    }
    Ok(x)
}

/// Streams observations out of a `label,prediction` CSV, with the line
/// number of each record.
pub struct RecordReader<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
    label_col: Option<usize>,
    prediction_col: usize,
    /// Physical line of the last record; the header is line 1.
    line: u64,
}

impl RecordReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path)
            .map_err(|e| AppError::data(format!("cannot open {}: {e}", path.display())))?;
        Self::new(BufReader::new(file))
    }
}

impl<R: Read> RecordReader<R> {
    /// A `label` column is optional so prediction-only files can feed an
    /// unlabelled pool.
    pub fn new(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| AppError::data(format!("line 1: unreadable header: {e}")))?
            .clone();
        let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
        let prediction_col = find("prediction")
            .ok_or_else(|| AppError::data("line 1: header has no `prediction` column"))?;
        Ok(Self {
            records: rdr.into_records(),
            label_col: find("label"),
            prediction_col,
            line: 1,
        })
    }
}

impl<R: Read> Iterator for RecordReader<R> {
    type Item = Result<(u64, Observation)>;

    fn next(&mut self) -> Option<Self::Item> {
        // Counted here rather than taken from the parser, which loses a
        // line after a CRLF header. Quoted fields spanning lines are not
        // accounted for.
        self.line += 1;
        let line = self.line;
        let rec = match self.records.next()? {
            Ok(rec) => rec,
            Err(e) => return Some(Err(AppError::data(format!("line {line}: {e}")))),
        };
        let parsed = (|| {
            let prediction = rec
                .get(self.prediction_col)
                .ok_or_else(|| AppError::data(format!("line {line}: missing prediction")))?;
            let prediction = parse_num(prediction, line, "prediction")?;
            let label = match self.label_col.and_then(|c| rec.get(c)) {
                Some(s) if !s.trim().is_empty() => Some(parse_num(s, line, "label")?),
                _ => None,
            };
            Ok((
                line,
                match label {
                    Some(y) => Observation::labelled(y, prediction),
                    None => Observation::unlabelled(prediction),
                },
            ))
        })();
        Some(parsed)
    }
}

/// Reads every record of a file.
pub fn read_all(path: &Path) -> Result<Vec<Observation>> {
    RecordReader::open(path)?
        .map(|r| r.map(|(_, obs)| obs))
        .collect()
}

/// One aggregated point of a simulation curve.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub scenario: String,
    pub method: String,
    pub n: u64,
    pub avg_volume: f64,
    pub cum_miscoverage: f64,
}

pub const METRIC_HEADER: &str = "scenario,method,n,avg_volume,cum_miscoverage";

pub fn write_metrics<W: Write>(w: W, rows: &[MetricRow]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    let io_err = |e: csv::Error| AppError::data(format!("writing metrics: {e}"));
    wtr.write_record(METRIC_HEADER.split(',')).map_err(io_err)?;
    for r in rows {
        wtr.write_record([
            r.scenario.as_str(),
            r.method.as_str(),
            &r.n.to_string(),
            &fmt_num(r.avg_volume),
            &fmt_num(r.cum_miscoverage),
        ])
        .map_err(io_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_metrics<R: Read>(r: R) -> Result<Vec<MetricRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers().map_err(|e| AppError::data(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>().join(",") != METRIC_HEADER {
        return Err(AppError::data(format!("line 1: expected header {METRIC_HEADER}")));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| AppError::data(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 5 {
            return Err(AppError::data(format!("line {line}: expected 5 fields")));
        }
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| AppError::data(format!("line {line}: bad number {:?}", &rec[i])))
        };
        out.push(MetricRow {
            scenario: rec[0].to_string(),
            method: rec[1].to_string(),
            n: rec[2]
                .parse()
                .map_err(|_| AppError::data(format!("line {line}: bad n {:?}", &rec[2])))?,
            avg_volume: num(3)?,
            cum_miscoverage: num(4)?,
        });
    }
    Ok(out)
}

pub const INTERVAL_HEADER: &str = "n,t_total,center,lower,upper,width";

/// Writes one `n,t_total,center,lower,upper,width` row.
pub fn write_interval_row<W: Write>(
    w: &mut W,
    n: u64,
    t_total: u64,
    center: f64,
    lower: f64,
    upper: f64,
) -> io::Result<()> {
    writeln!(
        w,
        "{n},{t_total},{},{},{},{}",
        fmt_num(center),
        fmt_num(lower),
        fmt_num(upper),
        fmt_num(upper - lower)
    )
}

/// Ordered `key=value` record of how an output was produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Writes `key=value` lines, each prefixed with `prefix`.
    pub fn write_to<W: Write>(&self, mut w: W, prefix: &str) -> io::Result<()> {
        for (k, v) in &self.entries {
            writeln!(w, "{prefix}{k}={v}")?;
        }
        Ok(())
    }

    /// Path of the manifest that accompanies `output`.
    pub fn path_for(output: &Path) -> std::path::PathBuf {
        let mut s = output.as_os_str().to_owned();
        s.push(".manifest.txt");
        s.into()
    }
}
