//! Cumulative counts to clipped daily change exponents.
//!
//! Pipeline per region: daily differences, trailing 7-day mean, then the
//! natural-log ratio of consecutive means clipped to `[-alpha, alpha]`.
//! The three stages consume 1, 6 and 1 leading days, so the first exponent
//! belongs to source index 8.

use std::io::Write;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::ingest::{CaseSeries, RegionKey};
use crate::numfmt::fmt_real;

pub const DEFAULT_ALPHA: f64 = 7.0;
pub const DEFAULT_FLOOR_EPS: f64 = 1e-9;
pub const WINDOW: usize = 7;
/// Leading source days without a defined exponent.
pub const WARM_UP: usize = 1 + (WINDOW - 1) + 1;

/// A real-valued sequence on a daily date axis.
#[derive(Debug, Clone, PartialEq)]
pub struct DatedValues {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl DatedValues {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Daily change exponents for one region.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentSeries {
    pub key: RegionKey,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
    pub defined: Vec<bool>,
    /// Clipping bound in force when the series was produced.
    pub alpha: f64,
}

impl ExponentSeries {
    /// Value on position `i`, or `None` where the mask says undefined.
    pub fn get(&self, i: usize) -> Option<f64> {
        if self.defined[i] {
            Some(self.values[i])
        } else {
            None
        }
    }

    pub fn defined_count(&self) -> usize {
        self.defined.iter().filter(|&&d| d).count()
    }
}

/// `cumulative[t] - cumulative[t-1]`; corrections stay negative.
pub fn daily_diffs(series: &CaseSeries) -> Result<DatedValues> {
    if series.cumulative.len() < 2 {
        return Err(Error::insufficient(
            format!("daily differences of {}", series.key),
            2,
            series.cumulative.len(),
        ));
    }
    let values = series
        .cumulative
        .windows(2)
        .map(|w| (w[1] - w[0]) as f64)
        .collect();
    Ok(DatedValues {
        dates: series.dates[1..].to_vec(),
        values,
    })
}

/// Trailing 7-day mean; output day `t` averages input days `t-6..=t`.
pub fn moving_average_7(diffs: &DatedValues) -> Result<DatedValues> {
    if diffs.len() < WINDOW {
        return Err(Error::insufficient("7-day moving average", WINDOW, diffs.len()));
    }
    let values = diffs
        .values
        .windows(WINDOW)
        .map(|w| w.iter().sum::<f64>() / WINDOW as f64)
        .collect();
    Ok(DatedValues {
        dates: diffs.dates[WINDOW - 1..].to_vec(),
        values,
    })
}

/// `clamp(ln(max(a[t], eps) / max(a[t-1], eps)), -alpha, alpha)` for each
/// consecutive pair of averages.
pub fn change_exponents(avgs: &[f64], alpha: f64, floor_eps: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Parameter(format!("alpha must be positive, got {alpha}")));
    }
    if !(floor_eps > 0.0 && floor_eps.is_finite()) {
        return Err(Error::Parameter(format!("floor_eps must be positive, got {floor_eps}")));
    }
    let floored = |a: f64| if a > floor_eps { a } else { floor_eps };
    Ok(avgs
        .windows(2)
        .map(|w| (floored(w[1]) / floored(w[0])).ln().clamp(-alpha, alpha))
        .collect())
}

/// Intermediate stages of one region's transform, aligned to the source
/// date axis. Used for debug output.
#[derive(Debug, Clone)]
pub struct TransformTrace {
    pub key: RegionKey,
    pub dates: Vec<NaiveDate>,
    pub diff: Vec<Option<f64>>,
    pub avg7: Vec<Option<f64>>,
    pub exponent: Vec<Option<f64>>,
}

/// Runs the full transform with the default floor.
pub fn to_exponent_series(series: &CaseSeries, alpha: f64) -> Result<ExponentSeries> {
    to_exponent_series_with_floor(series, alpha, DEFAULT_FLOOR_EPS)
}

pub fn to_exponent_series_with_floor(
    series: &CaseSeries,
    alpha: f64,
    floor_eps: f64,
) -> Result<ExponentSeries> {
    let trace = trace_with_floor(series, alpha, floor_eps)?;
    let values: Vec<f64> = trace.exponent[WARM_UP..]
        .iter()
        .map(|v| v.expect("defined after warm-up"))
        .collect();
    Ok(ExponentSeries {
        key: trace.key,
        dates: trace.dates[WARM_UP..].to_vec(),
        defined: vec![true; values.len()],
        values,
        alpha,
    })
}

/// Full per-stage trace of the transform.
pub fn trace(series: &CaseSeries, alpha: f64) -> Result<TransformTrace> {
    trace_with_floor(series, alpha, DEFAULT_FLOOR_EPS)
}

fn trace_with_floor(series: &CaseSeries, alpha: f64, floor_eps: f64) -> Result<TransformTrace> {
    let n = series.cumulative.len();
    if n < WARM_UP + 1 {
        return Err(Error::insufficient(
            format!("change exponents of {}", series.key),
            WARM_UP + 1,
            n,
        ));
    }
    let diffs = daily_diffs(series)?;
    let avgs = moving_average_7(&diffs)?;
    let exps = change_exponents(&avgs.values, alpha, floor_eps)?;

    let pad = |offset: usize, vals: &[f64]| -> Vec<Option<f64>> {
        let mut out = vec![None; offset];
        out.extend(vals.iter().copied().map(Some));
        out
    };
    Ok(TransformTrace {
        key: series.key.clone(),
        dates: series.dates.clone(),
        diff: pad(1, &diffs.values),
        avg7: pad(WINDOW, &avgs.values),
        exponent: pad(WARM_UP, &exps),
    })
}

/// Debug layout `region,date,diff,avg7,exponent,defined`, one row per
/// source day.
pub fn write_trace_csv<W: Write>(traces: &[TransformTrace], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["region", "date", "diff", "avg7", "exponent", "defined"])?;
    let cell = |v: Option<f64>| v.map(fmt_real).unwrap_or_default();
    for t in traces {
        let region = t.key.display();
        for i in 0..t.dates.len() {
            w.write_record([
                region.clone(),
                t.dates[i].to_string(),
                cell(t.diff[i]),
                cell(t.avg7[i]),
                cell(t.exponent[i]),
                t.exponent[i].is_some().to_string(),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
