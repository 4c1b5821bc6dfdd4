//! CSV ingestion: a `time,value` file with a header, times as ISO-8601
//! dates or plain numbers, converted to days since the first observation.

use chrono::NaiveDate;
use hawkes_pot::RawSeries;

use crate::config::{DataSection, TransformKind};
use crate::errors::{CliError, Result};

/// One parsed observation, keeping the original time label for error
/// messages and date-based splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub label: String,
    /// Days since the first observation.
    pub time: f64,
    pub value: f64,
}

/// Parsed observations plus the calendar origin, when times were dates.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub rows: Vec<Row>,
    pub origin: Option<NaiveDate>,
}

enum RawTime {
    Date(NaiveDate),
    Number(f64),
}

fn parse_time(text: &str) -> Option<RawTime> {
    if let Ok(d) = NaiveDate::parse_from_str(text, "%Y-%m-%d") {
        return Some(RawTime::Date(d));
    }
    text.parse::<f64>().ok().filter(|v| v.is_finite()).map(RawTime::Number)
}

/// Read and parse the CSV named by the data section.
///
/// Rows must be in nondecreasing time order; duplicate timestamps are
/// rejected here unless the daily-aggregate-sum transform will consume them.
pub fn ingest(data: &DataSection) -> Result<Ingested> {
    let mut reader = csv::Reader::from_path(&data.input)
        .map_err(|e| CliError::data(format!("cannot open {}: {e}", data.input)))?;
    let headers = reader.headers()?.clone();
    let time_idx = headers
        .iter()
        .position(|h| h == data.time_column)
        .ok_or_else(|| CliError::data(format!("missing time column {:?}", data.time_column)))?;
    let value_idx = headers
        .iter()
        .position(|h| h == data.value_column)
        .ok_or_else(|| CliError::data(format!("missing value column {:?}", data.value_column)))?;

    let mut origin: Option<NaiveDate> = None;
    let mut first_number: Option<f64> = None;
    let mut rows: Vec<Row> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // 1-based, after the header
        let record = record?;
        let time_text = record
            .get(time_idx)
            .ok_or_else(|| CliError::data(format!("line {line}: missing time field")))?
            .trim();
        let value_text = record
            .get(value_idx)
            .ok_or_else(|| CliError::data(format!("line {line}: missing value field")))?
            .trim();
        let value: f64 = value_text
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| CliError::data(format!("line {line}: unparseable value {value_text:?}")))?;
        let time = match parse_time(time_text)
            .ok_or_else(|| CliError::data(format!("line {line}: unparseable time {time_text:?}")))?
        {
            RawTime::Date(d) => {
                if rows.is_empty() {
                    origin = Some(d);
                } else if origin.is_none() {
                    return Err(CliError::data(format!(
                        "line {line}: date after numeric times"
                    )));
                }
                (d - origin.unwrap()).num_days() as f64
            }
            RawTime::Number(x) => {
                if rows.is_empty() {
                    first_number = Some(x);
                } else if origin.is_some() {
                    return Err(CliError::data(format!(
                        "line {line}: numeric time after dates"
                    )));
                }
                x - first_number.unwrap()
            }
        };
        if let Some(prev) = rows.last() {
            if time < prev.time {
                return Err(CliError::data(format!(
                    "line {line}: time {time_text} goes backwards (after {})",
                    prev.label
                )));
            }
            if time == prev.time && data.transform != TransformKind::DailyAggregateSum {
                return Err(CliError::data(format!(
                    "line {line}: duplicate timestamp {time_text}; use the daily-aggregate-sum transform to combine"
                )));
            }
        }
        rows.push(Row { label: time_text.to_string(), time, value });
    }
    if rows.is_empty() {
        return Err(CliError::data(format!("{}: no data rows", data.input)));
    }
    Ok(Ingested { rows, origin })
}

/// Apply the configured transform, producing the series to threshold.
pub fn transform(ingested: &Ingested, kind: TransformKind) -> Result<RawSeries> {
    match kind {
        TransformKind::Identity => {
            let times: Vec<f64> = ingested.rows.iter().map(|r| r.time).collect();
            let values: Vec<f64> = ingested.rows.iter().map(|r| r.value).collect();
            RawSeries::new(times, values).map_err(|e| CliError::data(e.to_string()))
        }
        TransformKind::NegativeLogReturn => {
            let mut times = Vec::with_capacity(ingested.rows.len().saturating_sub(1));
            let mut values = Vec::with_capacity(times.capacity());
            for pair in ingested.rows.windows(2) {
                let (prev, cur) = (&pair[0], &pair[1]);
                if !(prev.value > 0.0) || !(cur.value > 0.0) {
                    return Err(CliError::data(format!(
                        "negative-log-return requires positive values; got {} at {}",
                        if cur.value > 0.0 { prev.value } else { cur.value },
                        if cur.value > 0.0 { &prev.label } else { &cur.label },
                    )));
                }
                times.push(cur.time);
                values.push(-(cur.value.ln() - prev.value.ln()));
            }
            RawSeries::new(times, values).map_err(|e| CliError::data(e.to_string()))
        }
        TransformKind::DailyAggregateSum => {
            let mut times: Vec<f64> = Vec::new();
            let mut values: Vec<f64> = Vec::new();
            for r in &ingested.rows {
                if times.last() == Some(&r.time) {
                    *values.last_mut().unwrap() += r.value;
                } else {
                    times.push(r.time);
                    values.push(r.value);
                }
            }
            RawSeries::new(times, values).map_err(|e| CliError::data(e.to_string()))
        }
    }
}
