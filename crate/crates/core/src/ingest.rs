//! Event-log and scalar-series ingestion, and period binning.
//!
//! Events are read from delimited text with a header row. Actor identifiers
//! are interned into a registry in first-appearance order, so index
//! assignment depends only on row order.

use std::collections::{HashMap, HashSet};
use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One timestamped, weighted appraisal from `source` to `target`.
///
/// Actors are stored as indices into the owning [`EventLog`] registry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub date: NaiveDate,
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// Ordered set of actor identifiers with dense indices `0..n`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActorRegistry {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl ActorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the index of `name`, registering it if unseen.
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), i);
        i
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Counts gathered while parsing an event stream.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ParseReport {
    pub rows: usize,
    pub retained: usize,
    pub self_loops: usize,
    pub malformed: usize,
    /// First few rejected rows as `line N: reason`.
    pub malformed_sample: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct EventLog {
    pub events: Vec<Event>,
    pub registry: ActorRegistry,
    pub report: ParseReport,
}

impl EventLog {
    pub fn first_date(&self) -> Option<NaiveDate> {
        self.events.iter().map(|e| e.date).min()
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.events.iter().map(|e| e.date).max()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delimiter {
    #[default]
    Auto,
    Comma,
    Tab,
}

impl Delimiter {
    fn resolve(self, header_line: &str) -> u8 {
        match self {
            Delimiter::Comma => b',',
            Delimiter::Tab => b'\t',
            Delimiter::Auto => {
                let tabs = header_line.matches('\t').count();
                let commas = header_line.matches(',').count();
                if tabs > commas {
                    b'\t'
                } else {
                    b','
                }
            }
        }
    }
}

/// Header names of the four event columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub date: String,
    pub source: String,
    pub target: String,
    pub weight: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            date: "date".into(),
            source: "source".into(),
            target: "target".into(),
            weight: "weight".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EventFormat {
    pub columns: ColumnMapping,
    pub delimiter: Delimiter,
    /// strftime-style pattern understood by `chrono`.
    pub date_format: String,
    /// Inclusive bounds on accepted weights; rows outside are malformed.
    pub weight_range: Option<(f64, f64)>,
}

impl Default for EventFormat {
    fn default() -> Self {
        Self {
            columns: ColumnMapping::default(),
            delimiter: Delimiter::Auto,
            date_format: "%Y-%m-%d".into(),
            weight_range: Some((-10.0, 10.0)),
        }
    }
}

const SAMPLE_LIMIT: usize = 5;

fn read_all<R: Read>(mut stream: R) -> Result<String> {
    let mut text = String::new();
    stream
        .read_to_string(&mut text)
        .map_err(|e| Error::Parse {
            line: 0,
            message: format!("input is not valid UTF-8 text: {e}"),
        })?;
    Ok(text)
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::InvalidArgument(format!("missing column {name:?} in header")))
}

fn reader_for(text: &str, delimiter: Delimiter) -> csv::Reader<&[u8]> {
    let header_line = text.lines().next().unwrap_or("");
    csv::ReaderBuilder::new()
        .delimiter(delimiter.resolve(header_line))
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

/// Parses an event stream. Self-loops and unparseable rows are counted in
/// the report rather than failing the parse.
pub fn parse_events<R: Read>(stream: R, format: &EventFormat) -> Result<EventLog> {
    let text = read_all(stream)?;
    if text.trim().is_empty() {
        return Err(Error::NoEvents);
    }
    let mut reader = reader_for(&text, format.delimiter);
    let headers = reader.headers()?.clone();
    let cols = [
        column_index(&headers, &format.columns.date)?,
        column_index(&headers, &format.columns.source)?,
        column_index(&headers, &format.columns.target)?,
        column_index(&headers, &format.columns.weight)?,
    ];

    let mut registry = ActorRegistry::new();
    let mut events = Vec::new();
    let mut report = ParseReport::default();

    for record in reader.records() {
        report.rows += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                reject(&mut report, e.position().map_or(0, |p| p.line() as usize), &e.to_string());
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| record.get(i).unwrap_or("");

        let date = match NaiveDate::parse_from_str(field(cols[0]), &format.date_format) {
            Ok(d) => d,
            Err(_) => {
                reject(&mut report, line, &format!("bad date {:?}", field(cols[0])));
                continue;
            }
        };
        let weight = match field(cols[3]).parse::<f64>() {
            Ok(w) if w.is_finite() => w,
            _ => {
                reject(&mut report, line, &format!("bad weight {:?}", field(cols[3])));
                continue;
            }
        };
        if let Some((lo, hi)) = format.weight_range {
            if weight < lo || weight > hi {
                reject(&mut report, line, &format!("weight {weight} outside [{lo}, {hi}]"));
                continue;
            }
        }
        let (source, target) = (field(cols[1]), field(cols[2]));
        if source.is_empty() || target.is_empty() {
            reject(&mut report, line, "empty actor identifier");
            continue;
        }
        if source == target {
            report.self_loops += 1;
            continue;
        }
        let source = registry.intern(source);
        let target = registry.intern(target);
        events.push(Event {
            date,
            source,
            target,
            weight,
        });
    }

    report.retained = events.len();
    if report.rows > 0 && report.malformed * 2 > report.rows {
        return Err(Error::MalformedInput {
            bad: report.malformed,
            total: report.rows,
            sample: report.malformed_sample.join("; "),
        });
    }
    if events.is_empty() {
        return Err(Error::NoEvents);
    }
    Ok(EventLog {
        events,
        registry,
        report,
    })
}

fn reject(report: &mut ParseReport, line: usize, reason: &str) {
    report.malformed += 1;
    if report.malformed_sample.len() < SAMPLE_LIMIT {
        report.malformed_sample.push(format!("line {line}: {reason}"));
    }
}

/// A labelled sequence of scalars; `None` marks a missing value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalarSeries {
    pub labels: Vec<String>,
    pub values: Vec<Option<f64>>,
}

impl ScalarSeries {
    pub fn new(labels: Vec<String>, values: Vec<Option<f64>>) -> Result<Self> {
        if labels.len() != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} values",
                labels.len(),
                values.len()
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("series contains a non-finite value".into()));
        }
        Ok(Self { labels, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Option<f64>)> {
        self.labels.iter().map(String::as_str).zip(self.values.iter().copied())
    }
}

/// Parses a two-column `label,value` table with a header row. Blank value
/// cells become missing markers.
pub fn parse_series<R: Read>(stream: R, delimiter: Delimiter) -> Result<ScalarSeries> {
    let text = read_all(stream)?;
    if text.trim().is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut reader = reader_for(&text, delimiter);
    let mut seen = HashSet::new();
    let mut series = ScalarSeries::default();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let label = record.get(0).unwrap_or("").to_owned();
        let raw = record.get(1).unwrap_or("");
        let value = if raw.is_empty() {
            None
        } else {
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Some(v),
                _ => {
                    return Err(Error::Parse {
                        line,
                        message: format!("non-numeric value {raw:?} for label {label:?}"),
                    })
                }
            }
        };
        if !seen.insert(label.clone()) {
            return Err(Error::DuplicateLabel { label, line });
        }
        series.labels.push(label);
        series.values.push(value);
    }
    if series.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(series)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeriodCount {
    /// Cover the span from `start_date` to the last event.
    #[default]
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodSpec {
    pub start_date: NaiveDate,
    pub period_length_days: u32,
    pub period_count: PeriodCount,
    /// With `Auto`, keep a trailing partial period instead of dropping it.
    pub keep_tail: bool,
}

impl PeriodSpec {
    /// Auto-covering spec starting at the earliest event of `log`.
    pub fn from_log(log: &EventLog, period_length_days: u32) -> Result<Self> {
        let start_date = log.first_date().ok_or(Error::NoEvents)?;
        Ok(Self {
            start_date,
            period_length_days,
            period_count: PeriodCount::Auto,
            keep_tail: false,
        })
    }
}

/// Half-open date interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Period {
    pub index: usize,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binning {
    pub periods: Vec<Period>,
    /// Event indices per period, in log order.
    pub buckets: Vec<Vec<usize>>,
    pub excluded: usize,
}

pub fn bin_periods(log: &EventLog, spec: &PeriodSpec) -> Result<Binning> {
    if spec.period_length_days == 0 {
        return Err(Error::InvalidArgument("period length must be at least one day".into()));
    }
    let last = log.last_date().ok_or(Error::NoEvents)?;
    let len = i64::from(spec.period_length_days);
    let count = match spec.period_count {
        PeriodCount::Fixed(n) => n,
        PeriodCount::Auto => {
            let span = (last - spec.start_date).num_days() + 1;
            if span <= 0 {
                0
            } else {
                let full = (span / len) as usize;
                full + usize::from(spec.keep_tail && span % len != 0)
            }
        }
    };
    if count == 0 {
        return Err(Error::NoPeriods(format!(
            "start {} with {}-day periods covers no full period before {last}",
            spec.start_date, spec.period_length_days
        )));
    }

    let periods = (0..count)
        .map(|k| Period {
            index: k,
            start: spec.start_date + chrono::Days::new(k as u64 * len as u64),
            end: spec.start_date + chrono::Days::new((k as u64 + 1) * len as u64),
        })
        .collect();
    let mut buckets = vec![Vec::new(); count];
    let mut excluded = 0;
    for (i, ev) in log.events.iter().enumerate() {
        let offset = (ev.date - spec.start_date).num_days();
        if offset < 0 {
            excluded += 1;
            continue;
        }
        match buckets.get_mut((offset / len) as usize) {
            Some(b) => b.push(i),
            None => excluded += 1,
        }
    }
    Ok(Binning {
        periods,
        buckets,
        excluded,
    })
}
