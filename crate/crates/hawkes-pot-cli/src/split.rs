//! Train/test splitting with train-only threshold and scale computation.

use chrono::NaiveDate;
use hawkes_pot::evt::{extract_exceedances, set_scale_factor};
use hawkes_pot::{MarkedEventSeries, RawSeries, ThresholdSpec};

use crate::config::{SplitSection, ThresholdSection};
use crate::errors::{CliError, Result};

/// Resolve the split boundary time from the configured rule. The boundary
/// must lie strictly inside the observation span.
pub fn split_time(
    section: &SplitSection,
    series: &RawSeries,
    origin: Option<NaiveDate>,
) -> Result<f64> {
    if series.is_empty() {
        return Err(CliError::data("cannot split an empty series"));
    }
    let start = *series.timestamps.first().unwrap();
    let end = *series.timestamps.last().unwrap();
    let t = match section.kind.as_str() {
        "fraction" => {
            let f = section
                .fraction
                .ok_or_else(|| CliError::usage("split kind \"fraction\" requires fraction"))?;
            if !(0.0 < f && f < 1.0) {
                return Err(CliError::usage(format!("split fraction must be in (0,1), got {f}")));
            }
            start + f * (end - start)
        }
        "at_time" => section
            .time
            .ok_or_else(|| CliError::usage("split kind \"at_time\" requires time"))?,
        "at_date" => {
            let text = section
                .date
                .as_deref()
                .ok_or_else(|| CliError::usage("split kind \"at_date\" requires date"))?;
            let date = NaiveDate::parse_from_str(text, "%Y-%m-%d")
                .map_err(|e| CliError::usage(format!("bad split date {text:?}: {e}")))?;
            let origin = origin.ok_or_else(|| {
                CliError::usage("split at_date requires date-typed input times")
            })?;
            (date - origin).num_days() as f64
        }
        "trailing_duration" => {
            let d = section.duration_days.ok_or_else(|| {
                CliError::usage("split kind \"trailing_duration\" requires duration_days")
            })?;
            if !(d > 0.0) {
                return Err(CliError::usage("duration_days must be positive"));
            }
            end - d
        }
        other => return Err(CliError::usage(format!("unknown split kind {other:?}"))),
    };
    if !(t > start && t < end) {
        return Err(CliError::usage(format!(
            "split boundary {t} must lie strictly inside the span ({start}, {end})"
        )));
    }
    Ok(t)
}

/// The prepared train/test pair: threshold and scale fitted on train only,
/// test exceedances extracted with the train threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitData {
    pub train: MarkedEventSeries,
    pub test: MarkedEventSeries,
    pub split_at: f64,
    /// Threshold on the (possibly negated) value scale, from train only.
    pub threshold: f64,
}

/// Split the transformed series and extract exceedances.
///
/// The threshold and scale factor are computed on the training portion only;
/// the test portion reuses them. The training window ends at the boundary;
/// the test window runs from the boundary to the last observation, with
/// absolute times.
pub fn split_and_extract(
    series: &RawSeries,
    threshold: &ThresholdSection,
    split: &SplitSection,
    origin: Option<NaiveDate>,
) -> Result<SplitData> {
    let split_at = split_time(split, series, origin)?;
    let mut train_t = Vec::new();
    let mut train_v = Vec::new();
    let mut test_t = Vec::new();
    let mut test_v = Vec::new();
    for (t, v) in series.timestamps.iter().zip(series.values.iter()) {
        if *t <= split_at {
            train_t.push(*t);
            train_v.push(*v);
        } else {
            test_t.push(*t);
            test_v.push(*v);
        }
    }
    if train_t.is_empty() {
        return Err(CliError::data("empty training set after split"));
    }
    let train_raw = RawSeries::new(train_t, train_v).map_err(|e| CliError::data(e.to_string()))?;
    let spec = threshold.spec()?;
    let mut train = extract_exceedances(&train_raw, spec)?;
    if train.is_empty() {
        return Err(CliError::data("no training exceedances above the threshold"));
    }
    train.window_end = split_at;
    train = set_scale_factor(&train, threshold.scale_policy()?)?;

    // test extraction with the train threshold; mirror the lower-tail
    // negation through an absolute threshold on the same orientation
    let negate = matches!(spec, ThresholdSpec::LowerPercentile(_));
    let test_values: Vec<f64> =
        if negate { test_v.iter().map(|v| -v).collect() } else { test_v.clone() };
    let t_end = series.timestamps.last().copied().unwrap();
    let mut times = Vec::new();
    let mut excesses = Vec::new();
    for (t, v) in test_t.iter().zip(test_values.iter()) {
        if *v > train.threshold {
            times.push(*t);
            excesses.push(v - train.threshold);
        }
    }
    let mut test = MarkedEventSeries {
        window_end: t_end.max(split_at + f64::MIN_POSITIVE),
        threshold: train.threshold,
        times,
        excesses,
        scale_factor: train.scale_factor,
    };
    // validate through the constructor when nonempty
    if !test.times.is_empty() {
        let validated =
            MarkedEventSeries::new(test.window_end, test.threshold, test.times, test.excesses)
                .map_err(|e| CliError::data(e.to_string()))?;
        test = MarkedEventSeries { scale_factor: train.scale_factor, ..validated };
    }
    let threshold_value = train.threshold;
    Ok(SplitData { train, test, split_at, threshold: threshold_value })
}
