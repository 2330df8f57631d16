//! Daily change exponents: differences, 7-day average, clipped log-ratio.
//!
//!     cargo run --example exponent_transform

use chrono::NaiveDate;
use epinet::ingest::{CaseSeries, RegionKey};
use epinet::transform::{trace, to_exponent_series};

fn main() -> epinet::Result<()> {
    let start = NaiveDate::from_ymd_opt(2020, 3, 1).expect("valid date");

    // doubling every day: every defined exponent is ln 2
    let doubling = CaseSeries::from_start(RegionKey::new("Doubling", None), start, (0..16).map(|t| 1i64 << t).collect())?;
    let e = to_exponent_series(&doubling, 7.0)?;
    println!("doubling: {} exponents, first {:.12} (ln 2 = {:.12})", e.values.len(), e.values[0], std::f64::consts::LN_2);

    // a wave that rises, plateaus and is then corrected downward once
    let mut total = 0i64;
    let mut cumulative = Vec::new();
    for t in 0..40i64 {
        total += match t {
            0..=14 => 10 * (t + 1),
            15..=29 => 150,
            30 => -900,
            _ => 20,
        };
        cumulative.push(total);
    }
    let wave = CaseSeries::from_start(RegionKey::new("Wave", Some("North")), start, cumulative)?;
    let tr = trace(&wave, 5.0)?;
    println!("\n{:<12} {:>8} {:>10} {:>10}", "date", "diff", "avg7", "exponent");
    for i in 0..tr.dates.len() {
        let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!("{:<12} {:>8} {:>10} {:>10}", tr.dates[i], show(tr.diff[i]), show(tr.avg7[i]), show(tr.exponent[i]));
    }
    Ok(())
}
