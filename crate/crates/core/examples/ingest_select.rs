//! Parse a wide case table, restrict the date window and keep regions
//! above a cumulative threshold.
//!
//!     cargo run --example ingest_select [-- cases.csv [min_cumulative]]
//!
//! Without arguments a planted synthetic table is used.

use epinet::ingest::{parse_cases_csv, restrict_date_range, select_regions, write_cases_csv, CaseSeries};
use epinet::synthetic::{planted_cases, PlantedConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let cases: Vec<CaseSeries> = match args.next() {
        Some(path) => parse_cases_csv(std::fs::File::open(path)?)?,
        None => {
            let mut buf = Vec::new();
            write_cases_csv(&planted_cases(&PlantedConfig::default())?.cases, &mut buf)?;
            parse_cases_csv(buf.as_slice())?
        }
    };
    let min: i64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1_000_000);

    let first = cases.iter().map(CaseSeries::first_date).min().ok_or("empty table")?;
    let last = cases.iter().map(CaseSeries::last_date).max().ok_or("empty table")?;
    let window = cases
        .iter()
        .map(|c| restrict_date_range(c, first, last))
        .collect::<epinet::Result<Vec<_>>>()?;
    let selected = select_regions(&window, min, last);

    println!("{} regions, {first} .. {last}", cases.len());
    println!("{} regions with at least {min} cases on {last}:", selected.len());
    for c in &selected {
        println!("  {:<28} {:>12}", c.key.display(), c.value_on(last).unwrap_or(0));
    }
    Ok(())
}
