//! Time-series ingestion, validation and elementary transforms.
//!
//! The time coordinate is an observation index (trading day counted from the
//! start of the file); calendar dates, when the input has them, ride along as
//! labels only. Weekends and holidays are never imputed.

use std::fmt;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What the values of a series represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesKind {
    Level,
    LogLevel,
    Return,
}

impl SeriesKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SeriesKind::Level => "level",
            SeriesKind::LogLevel => "log-level",
            SeriesKind::Return => "return",
        }
    }
}

impl fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SeriesKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "level" => Ok(SeriesKind::Level),
            "log-level" => Ok(SeriesKind::LogLevel),
            "return" => Ok(SeriesKind::Return),
            other => Err(Error::Config(format!("unknown series kind `{other}`"))),
        }
    }
}

/// Ordered observations of one instrument.
///
/// Construction enforces: at least two points, strictly increasing times and
/// finite values. The fields are private so a `TimeSeries` in hand always
/// satisfies those invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    label: String,
    times: Vec<f64>,
    dates: Option<Vec<NaiveDate>>,
    values: Vec<f64>,
    kind: SeriesKind,
}

impl TimeSeries {
    pub fn new(
        label: impl Into<String>,
        times: Vec<f64>,
        values: Vec<f64>,
        kind: SeriesKind,
    ) -> Result<Self> {
        Self::build(label.into(), times, None, values, kind)
    }

    /// Series with times `1..=n`.
    pub fn from_values(
        label: impl Into<String>,
        values: Vec<f64>,
        kind: SeriesKind,
    ) -> Result<Self> {
        let times = (1..=values.len()).map(|i| i as f64).collect();
        Self::new(label, times, values, kind)
    }

    pub fn with_dates(mut self, dates: Vec<NaiveDate>) -> Result<Self> {
        if dates.len() != self.values.len() {
            return Err(Error::Config(format!(
                "{} dates for {} observations",
                dates.len(),
                self.values.len()
            )));
        }
        self.dates = Some(dates);
        Ok(self)
    }

    fn build(
        label: String,
        times: Vec<f64>,
        dates: Option<Vec<NaiveDate>>,
        values: Vec<f64>,
        kind: SeriesKind,
    ) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Config(format!(
                "{} times for {} values",
                times.len(),
                values.len()
            )));
        }
        if values.len() < 2 {
            return Err(Error::TooShort {
                len: values.len(),
                min: 2,
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NotIncreasing(i + 1));
        }
        Ok(Self {
            label,
            times,
            dates,
            values,
            kind,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dates(&self) -> Option<&[NaiveDate]> {
        self.dates.as_deref()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first_time(&self) -> f64 {
        self.times[0]
    }

    pub fn last_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn relabel(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Same observations with every time coordinate shifted by `delta`.
    pub fn shift_times(&self, delta: f64) -> Result<Self> {
        let times = self.times.iter().map(|t| t + delta).collect();
        Self::build(
            self.label.clone(),
            times,
            self.dates.clone(),
            self.values.clone(),
            self.kind,
        )
    }

    /// Same times, new values of the given kind.
    pub fn map_values(&self, values: Vec<f64>, kind: SeriesKind) -> Result<Self> {
        Self::build(
            self.label.clone(),
            self.times.clone(),
            self.dates.clone(),
            values,
            kind,
        )
    }

    /// Contiguous sub-series of observations `range` (by position).
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        let dates = self.dates.as_ref().map(|d| d[range.clone()].to_vec());
        Self::build(
            self.label.clone(),
            self.times[range.clone()].to_vec(),
            dates,
            self.values[range].to_vec(),
            self.kind,
        )
    }
}

/// Natural log of a level series.
pub fn to_log(s: &TimeSeries) -> Result<TimeSeries> {
    if s.kind != SeriesKind::Level {
        return Err(Error::WrongKind {
            expected: "level",
            found: s.kind.as_str(),
        });
    }
    if let Some((index, &value)) = s.values.iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::NonPositive { index, value });
    }
    s.map_values(
        s.values.iter().map(|v| v.ln()).collect(),
        SeriesKind::LogLevel,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReturnMode {
    Simple,
    Log,
}

/// One-step returns; the return between `k` and `k+1` is stamped with the
/// time of `k+1`.
pub fn diff_returns(s: &TimeSeries, mode: ReturnMode) -> Result<TimeSeries> {
    if s.len() < 3 {
        return Err(Error::TooShort {
            len: s.len(),
            min: 3,
        });
    }
    let v = &s.values;
    let out = match mode {
        ReturnMode::Simple => {
            if let Some(i) = v[..v.len() - 1].iter().position(|x| *x == 0.0) {
                return Err(Error::ZeroDivision(i));
            }
            v.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect()
        }
        ReturnMode::Log => {
            if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| **x <= 0.0) {
                return Err(Error::NonPositive { index, value });
            }
            v.windows(2).map(|w| (w[1] / w[0]).ln()).collect()
        }
    };
    let dates = s.dates.as_ref().map(|d| d[1..].to_vec());
    TimeSeries::build(
        s.label.clone(),
        s.times[1..].to_vec(),
        dates,
        out,
        SeriesKind::Return,
    )
}

/// Inverse of [`diff_returns`]: rebuilds levels from returns and the level at
/// the time just before the first return.
pub fn cumulate_returns(
    returns: &TimeSeries,
    initial: f64,
    initial_time: f64,
    mode: ReturnMode,
) -> Result<TimeSeries> {
    if returns.kind != SeriesKind::Return {
        return Err(Error::WrongKind {
            expected: "return",
            found: returns.kind.as_str(),
        });
    }
    let mut values = Vec::with_capacity(returns.len() + 1);
    values.push(initial);
    let mut level = initial;
    for r in &returns.values {
        level = match mode {
            ReturnMode::Simple => level * (1.0 + r),
            ReturnMode::Log => level * r.exp(),
        };
        values.push(level);
    }
    let mut times = Vec::with_capacity(values.len());
    times.push(initial_time);
    times.extend_from_slice(&returns.times);
    TimeSeries::build(
        returns.label.clone(),
        times,
        None,
        values,
        SeriesKind::Level,
    )
}

/// Observations with times in `[start, end]`.
pub fn window(s: &TimeSeries, start: f64, end: f64) -> Result<TimeSeries> {
    if start >= end {
        return Err(Error::Config(format!(
            "window start {start} must precede end {end}"
        )));
    }
    let lo = s.times.partition_point(|t| *t < start);
    let hi = s.times.partition_point(|t| *t <= end);
    if hi.saturating_sub(lo) < 2 {
        return Err(Error::TooShort {
            len: hi.saturating_sub(lo),
            min: 2,
        });
    }
    s.slice(lo..hi)
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// A column picked by header name or by zero-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for ColumnRef {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.to_string()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeFormat {
    /// `YYYY-MM-DD`; times become the observation index `1..=n` after sorting.
    Iso,
    /// Raw numeric index used as the time coordinate directly.
    Index,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowPolicy {
    Skip,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvConfig {
    pub delimiter: u8,
    pub has_header: bool,
    pub time_column: ColumnRef,
    pub value_column: ColumnRef,
    /// Optional ISO date column carried as labels when times come from an index.
    pub date_column: Option<ColumnRef>,
    pub time_format: TimeFormat,
    pub policy: RowPolicy,
    pub label: String,
}

impl Default for CsvConfig {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: true,
            time_column: ColumnRef::Index(0),
            value_column: ColumnRef::Index(1),
            date_column: None,
            time_format: TimeFormat::Index,
            policy: RowPolicy::Skip,
            label: "series".to_string(),
        }
    }
}

impl CsvConfig {
    /// Reads the layout written by [`write_csv`].
    pub fn native() -> Self {
        Self {
            time_column: ColumnRef::Name("index".into()),
            value_column: ColumnRef::Name("value".into()),
            date_column: Some(ColumnRef::Name("date".into())),
            ..Self::default()
        }
    }
}

/// Rows that did not make it into the series.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub rows_read: usize,
    pub skipped_invalid: usize,
    pub skipped_duplicates: usize,
}

fn resolve(col: &ColumnRef, headers: Option<&csv::StringRecord>) -> Result<usize> {
    match col {
        ColumnRef::Index(i) => Ok(*i),
        ColumnRef::Name(name) => headers
            .and_then(|h| h.iter().position(|c| c.trim() == name))
            .ok_or_else(|| Error::MissingColumn(name.clone())),
    }
}

fn parse_date(s: &str) -> std::result::Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| format!("bad date `{s}`: {e}"))
}

fn parse_time(s: &str) -> std::result::Result<f64, String> {
    let t: f64 = s.trim().parse().map_err(|_| format!("bad index `{s}`"))?;
    if t.is_finite() {
        Ok(t)
    } else {
        Err(format!("non-finite index `{s}`"))
    }
}

fn parse_value(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("bad value `{s}`"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite value `{s}`"))
    }
}

struct Row {
    time: f64,
    date: Option<NaiveDate>,
    value: f64,
}

/// Parses delimiter-separated text into a level series.
///
/// Lines starting with `#` are comments; a `# kind=<kind>` comment sets the
/// kind of the result (default `level`) and `# label=<name>` its label.
pub fn parse_price_csv(text: &str, cfg: &CsvConfig) -> Result<(TimeSeries, ParseReport)> {
    if text.trim().is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut kind = SeriesKind::Level;
    let mut label = cfg.label.clone();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let body = line.trim_start_matches('#').trim();
        if let Some(k) = body.strip_prefix("kind=") {
            kind = k.parse()?;
        } else if let Some(l) = body.strip_prefix("label=") {
            label = l.to_string();
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(cfg.delimiter)
        .has_headers(cfg.has_header)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = if cfg.has_header {
        Some(reader.headers()?.clone())
    } else {
        None
    };
    let time_idx = resolve(&cfg.time_column, headers.as_ref())?;
    let value_idx = resolve(&cfg.value_column, headers.as_ref())?;
    let date_idx = match &cfg.date_column {
        Some(c) => match resolve(c, headers.as_ref()) {
            Ok(i) => Some(i),
            // the native layout omits `date` when there are none
            Err(_) if headers.is_some() => None,
            Err(e) => return Err(e),
        },
        None => None,
    };
    if let Some(h) = &headers {
        if value_idx >= h.len() {
            return Err(Error::MissingColumn(format!("#{value_idx}")));
        }
    }

    let mut report = ParseReport::default();
    let mut rows = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let line = n + 1 + usize::from(cfg.has_header);
        let record = match record {
            Ok(r) => r,
            Err(e) => match cfg.policy {
                RowPolicy::Skip => {
                    report.skipped_invalid += 1;
                    continue;
                }
                RowPolicy::Fail => {
                    return Err(Error::Parse {
                        line,
                        msg: e.to_string(),
                    })
                }
            },
        };
        report.rows_read += 1;
        let parsed = (|| -> std::result::Result<Row, String> {
            let time_field = record.get(time_idx).ok_or("missing time field")?;
            let value_field = record.get(value_idx).ok_or("missing value field")?;
            let value = parse_value(value_field)?;
            let (time, mut date) = match cfg.time_format {
                TimeFormat::Iso => (0.0, Some(parse_date(time_field)?)),
                TimeFormat::Index => (parse_time(time_field)?, None),
            };
            if let Some(i) = date_idx {
                if let Some(d) = record.get(i).filter(|d| !d.is_empty()) {
                    date = Some(parse_date(d)?);
                }
            }
            Ok(Row { time, date, value })
        })();
        match parsed {
            Ok(row) => rows.push(row),
            Err(msg) => match cfg.policy {
                RowPolicy::Skip => report.skipped_invalid += 1,
                RowPolicy::Fail => return Err(Error::Parse { line, msg }),
            },
        }
    }
    if rows.is_empty() {
        return Err(Error::NoRows);
    }

    match cfg.time_format {
        TimeFormat::Iso => rows.sort_by_key(|r| r.date),
        TimeFormat::Index => rows.sort_by(|a, b| a.time.total_cmp(&b.time)),
    }
    let same = |a: &Row, b: &Row| match cfg.time_format {
        TimeFormat::Iso => a.date == b.date,
        TimeFormat::Index => a.time == b.time,
    };
    let mut deduped: Vec<Row> = Vec::with_capacity(rows.len());
    for row in rows {
        if let Some(prev) = deduped.last() {
            if same(prev, &row) {
                match cfg.policy {
                    RowPolicy::Skip => {
                        report.skipped_duplicates += 1;
                        continue;
                    }
                    RowPolicy::Fail => {
                        let shown = row
                            .date
                            .map(|d| d.to_string())
                            .unwrap_or(row.time.to_string());
                        return Err(Error::DuplicateTime(shown));
                    }
                }
            }
        }
        deduped.push(row);
    }

    let times = match cfg.time_format {
        TimeFormat::Iso => (1..=deduped.len()).map(|i| i as f64).collect(),
        TimeFormat::Index => deduped.iter().map(|r| r.time).collect(),
    };
    let dates: Option<Vec<NaiveDate>> = deduped.iter().map(|r| r.date).collect();
    let values = deduped.iter().map(|r| r.value).collect();
    let series = TimeSeries::build(label, times, dates, values, kind)?;
    Ok((series, report))
}

fn format_time(t: f64) -> String {
    if t.fract() == 0.0 && t.abs() < 1e15 {
        format!("{}", t as i64)
    } else {
        format!("{t:?}")
    }
}

/// Writes the native layout: `# kind=..`, `# label=..`, then
/// `index[,date],value` rows. Values use shortest round-trip formatting.
pub fn write_csv<W: Write>(s: &TimeSeries, mut out: W) -> Result<()> {
    writeln!(out, "# kind={}", s.kind)?;
    writeln!(out, "# label={}", s.label)?;
    match &s.dates {
        Some(dates) => {
            writeln!(out, "index,date,value")?;
            for ((t, d), v) in s.times.iter().zip(dates).zip(&s.values) {
                writeln!(out, "{},{},{:?}", format_time(*t), d, v)?;
            }
        }
        None => {
            writeln!(out, "index,value")?;
            for (t, v) in s.times.iter().zip(&s.values) {
                writeln!(out, "{},{:?}", format_time(*t), v)?;
            }
        }
    }
    Ok(())
}

pub fn to_csv_string(s: &TimeSeries) -> String {
    let mut buf = Vec::new();
    write_csv(s, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn cfg_dv() -> CsvConfig {
        CsvConfig {
            time_column: ColumnRef::Name("d".into()),
            value_column: ColumnRef::Name("v".into()),
            ..CsvConfig::default()
        }
    }

    #[test]
    fn parse_reads_back_values() {
        let (s, rep) = parse_price_csv("d,v\n1,10\n2,11\n3,12", &cfg_dv()).unwrap();
        assert_eq!(s.values(), &[10.0, 11.0, 12.0]);
        assert_eq!(s.times(), &[1.0, 2.0, 3.0]);
        assert_eq!(s.kind(), SeriesKind::Level);
        assert_eq!(rep.rows_read, 3);
    }

    #[test]
    fn parse_sorts_rows() {
        let a = parse_price_csv("d,v\n1,10\n2,11\n3,12", &cfg_dv())
            .unwrap()
            .0;
        let b = parse_price_csv("d,v\n2,11\n1,10\n3,12", &cfg_dv())
            .unwrap()
            .0;
        assert_eq!(a, b);
    }

    #[test]
    fn parse_single_row_is_too_short() {
        let err = parse_price_csv("d,v\n1,10", &cfg_dv()).unwrap_err();
        assert_eq!(err, Error::TooShort { len: 1, min: 2 });
    }

    #[test]
    fn parse_errors() {
        assert_eq!(
            parse_price_csv("", &cfg_dv()).unwrap_err(),
            Error::EmptyInput
        );
        assert_eq!(
            parse_price_csv("d,v\nx,y\n", &cfg_dv()).unwrap_err(),
            Error::NoRows
        );
        let missing = CsvConfig {
            value_column: ColumnRef::Name("close".into()),
            ..cfg_dv()
        };
        assert!(matches!(
            parse_price_csv("d,v\n1,2\n2,3", &missing).unwrap_err(),
            Error::MissingColumn(_)
        ));
        let fail = CsvConfig {
            policy: RowPolicy::Fail,
            ..cfg_dv()
        };
        assert!(matches!(
            parse_price_csv("d,v\n1,2\n1,3\n2,4", &fail).unwrap_err(),
            Error::DuplicateTime(_)
        ));
        assert!(matches!(
            parse_price_csv("d,v\n1,2\n2,nan\n3,4", &fail).unwrap_err(),
            Error::Parse { line: 3, .. }
        ));
    }

    #[test]
    fn parse_skip_policy_counts() {
        let (s, rep) = parse_price_csv("d,v\n1,2\n1,3\n2,null\n3,4\n4,inf", &cfg_dv()).unwrap();
        assert_eq!(s.values(), &[2.0, 4.0]);
        assert_eq!(rep.skipped_duplicates, 1);
        assert_eq!(rep.skipped_invalid, 2);
    }

    #[test]
    fn parse_iso_dates_headerless_semicolon() {
        let cfg = CsvConfig {
            delimiter: b';',
            has_header: false,
            time_format: TimeFormat::Iso,
            ..CsvConfig::default()
        };
        let (s, _) = parse_price_csv("1997-10-27;876.99\n1997-10-24;941.64\n", &cfg).unwrap();
        assert_eq!(s.values(), &[941.64, 876.99]);
        assert_eq!(s.times(), &[1.0, 2.0]);
        assert_eq!(
            s.dates().unwrap()[1],
            NaiveDate::from_ymd_opt(1997, 10, 27).unwrap()
        );
    }

    #[test]
    fn log_transform() {
        let s = TimeSeries::from_values("x", vec![1.0, E, E * E], SeriesKind::Level).unwrap();
        let l = to_log(&s).unwrap();
        for (got, want) in l.values().iter().zip([0.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(l.kind(), SeriesKind::LogLevel);
        let ones = TimeSeries::from_values("x", vec![1.0; 3], SeriesKind::Level).unwrap();
        assert_eq!(to_log(&ones).unwrap().values(), &[0.0; 3]);
        let bad = TimeSeries::from_values("x", vec![1.0, -2.0], SeriesKind::Level).unwrap();
        assert!(matches!(
            to_log(&bad),
            Err(Error::NonPositive { index: 1, .. })
        ));
        assert!(matches!(to_log(&l), Err(Error::WrongKind { .. })));
    }

    #[test]
    fn returns() {
        let s = TimeSeries::from_values("x", vec![100.0, 110.0, 99.0], SeriesKind::Level).unwrap();
        let r = diff_returns(&s, ReturnMode::Simple).unwrap();
        assert!((r.values()[0] - 0.10).abs() < 1e-15);
        assert!((r.values()[1] + 0.10).abs() < 1e-15);
        assert_eq!(r.times(), &[2.0, 3.0]);
        assert_eq!(r.kind(), SeriesKind::Return);

        let c = TimeSeries::from_values("x", vec![5.0; 4], SeriesKind::Level).unwrap();
        assert_eq!(
            diff_returns(&c, ReturnMode::Simple).unwrap().values(),
            &[0.0; 3]
        );

        let e = TimeSeries::from_values("x", vec![1.0, E * E, E], SeriesKind::Level).unwrap();
        let r = diff_returns(&e, ReturnMode::Log).unwrap();
        assert!((r.values()[0] - 2.0).abs() < 1e-15);
        assert!((r.values()[1] + 1.0).abs() < 1e-15);

        let z = TimeSeries::from_values("x", vec![0.0, 1.0, 2.0], SeriesKind::Level).unwrap();
        assert_eq!(
            diff_returns(&z, ReturnMode::Simple).unwrap_err(),
            Error::ZeroDivision(0)
        );
        assert!(matches!(
            diff_returns(&z, ReturnMode::Log),
            Err(Error::NonPositive { .. })
        ));
        let short = TimeSeries::from_values("x", vec![1.0, 2.0], SeriesKind::Level).unwrap();
        assert!(matches!(
            diff_returns(&short, ReturnMode::Log),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn windowing() {
        let s = TimeSeries::from_values("x", (1..=10).map(f64::from).collect(), SeriesKind::Level)
            .unwrap();
        assert_eq!(window(&s, 3.0, 6.0).unwrap().times(), &[3.0, 4.0, 5.0, 6.0]);
        assert_eq!(window(&s, 1.0, 10.0).unwrap(), s);
        assert!(matches!(window(&s, 8.0, 8.5), Err(Error::TooShort { .. })));
        assert!(matches!(window(&s, 6.0, 3.0), Err(Error::Config(_))));
    }

    #[test]
    fn construction_invariants() {
        assert_eq!(
            TimeSeries::new("x", vec![1.0, 1.0], vec![1.0, 2.0], SeriesKind::Level).unwrap_err(),
            Error::NotIncreasing(1)
        );
        assert_eq!(
            TimeSeries::new("x", vec![1.0, 2.0], vec![1.0, f64::NAN], SeriesKind::Level)
                .unwrap_err(),
            Error::NonFinite(1)
        );
    }
}
