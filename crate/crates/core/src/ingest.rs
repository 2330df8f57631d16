//! Wide-format cumulative case tables: parsing, region keying, selection
//! and date-range restriction.
//!
//! The accepted layout is one row per region:
//!
//! ```text
//! Province/State,Country/Region,Lat,Long,1/22/20,1/23/20,...
//! ,Albania,41.15,20.17,0,0,...
//! "New South Wales",Australia,-33.87,151.21,0,0,...
//! ```
//!
//! Provinces are never folded into their country.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};

use chrono::NaiveDate;
use log::warn;

use crate::error::{Error, Result};

const PROVINCE_COLUMN: &str = "Province/State";
const COUNTRY_COLUMN: &str = "Country/Region";
const LAT_COLUMN: &str = "Lat";
const LONG_COLUMNS: [&str; 2] = ["Long", "Long_"];
const FIXED_COLUMNS: usize = 4;

/// Default selection threshold on cumulative cases.
pub const DEFAULT_MIN_CUMULATIVE: i64 = 100_000;

/// Default analysis window.
pub fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 22).expect("valid date")
}

pub fn default_end() -> NaiveDate {
    NaiveDate::from_ymd_opt(2022, 5, 29).expect("valid date")
}

/// Identity of one region as it appears in the upstream table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionKey {
    country: String,
    province: Option<String>,
}

impl RegionKey {
    pub fn new(country: impl AsRef<str>, province: Option<&str>) -> Self {
        let province = province
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(str::to_string);
        RegionKey {
            country: country.as_ref().trim().to_string(),
            province,
        }
    }

    pub fn country(&self) -> &str {
        &self.country
    }

    pub fn province(&self) -> Option<&str> {
        self.province.as_deref()
    }

    /// `"Country"` or `"Country: Province"`.
    pub fn display(&self) -> String {
        self.to_string()
    }

    /// Inverse of [`RegionKey::display`]: splits on the first `": "`.
    pub fn from_display(s: &str) -> Self {
        match s.split_once(": ") {
            Some((country, province)) => RegionKey::new(country, Some(province)),
            None => RegionKey::new(s, None),
        }
    }
}

impl fmt::Display for RegionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.province {
            Some(p) => write!(f, "{}: {}", self.country, p),
            None => f.write_str(&self.country),
        }
    }
}

/// Dated cumulative positive-case counts for one region.
///
/// Counts are signed: upstream corrections occasionally make the
/// cumulative series dip, and such rows are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseSeries {
    pub key: RegionKey,
    pub dates: Vec<NaiveDate>,
    pub cumulative: Vec<i64>,
}

impl CaseSeries {
    /// Builds a series after checking the daily-cadence invariants.
    pub fn new(key: RegionKey, dates: Vec<NaiveDate>, cumulative: Vec<i64>) -> Result<Self> {
        if dates.len() != cumulative.len() {
            return Err(Error::Parameter(format!(
                "{key}: {} dates but {} counts",
                dates.len(),
                cumulative.len()
            )));
        }
        if dates.len() < 2 {
            return Err(Error::insufficient(format!("case series {key}"), 2, dates.len()));
        }
        check_daily(&dates).map_err(|(a, b)| {
            Error::Parameter(format!("{key}: dates {a} and {b} are not consecutive days"))
        })?;
        Ok(CaseSeries {
            key,
            dates,
            cumulative,
        })
    }

    /// Convenience constructor for a series starting at `start` with one
    /// value per day.
    pub fn from_start(key: RegionKey, start: NaiveDate, cumulative: Vec<i64>) -> Result<Self> {
        let dates = start.iter_days().take(cumulative.len()).collect();
        CaseSeries::new(key, dates, cumulative)
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn first_date(&self) -> NaiveDate {
        self.dates[0]
    }

    pub fn last_date(&self) -> NaiveDate {
        *self.dates.last().expect("non-empty series")
    }

    /// Cumulative count on `date`, if the series covers it.
    pub fn value_on(&self, date: NaiveDate) -> Option<i64> {
        let offset = (date - self.first_date()).num_days();
        usize::try_from(offset)
            .ok()
            .and_then(|i| self.cumulative.get(i).copied())
    }
}

fn check_daily(dates: &[NaiveDate]) -> std::result::Result<(), (NaiveDate, NaiveDate)> {
    for pair in dates.windows(2) {
        if pair[0].succ_opt() != Some(pair[1]) {
            return Err((pair[0], pair[1]));
        }
    }
    Ok(())
}

/// Parses a header date in either `M/D/YY` or ISO `YYYY-MM-DD` form.
pub fn parse_header_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    if s.contains('/') {
        NaiveDate::parse_from_str(s, "%m/%d/%y").ok()
    } else {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
    }
}

/// Parses the wide cumulative-case layout into one series per row.
pub fn parse_cases_csv<R: Read>(input: R) -> Result<Vec<CaseSeries>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();

    let header = match records.next() {
        Some(h) => h?,
        None => {
            return Err(Error::Format {
                column: "1".into(),
                message: "missing header row".into(),
            })
        }
    };
    let dates = parse_header(&header)?;

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, record) in records.enumerate() {
        let record = record?;
        // 1-based row number counting the header as row 1
        let row = i + 2;
        if record.len() == 1 && record.get(0).is_some_and(|f| f.trim().is_empty()) {
            continue;
        }
        if record.len() != header.len() {
            return Err(Error::Format {
                column: format!("row {row}"),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let key = RegionKey::new(&record[1], Some(&record[0]));
        if key.country.is_empty() {
            return Err(Error::Format {
                column: COUNTRY_COLUMN.into(),
                message: format!("empty country at row {row}"),
            });
        }
        let mut cumulative = Vec::with_capacity(dates.len());
        for (j, cell) in record.iter().enumerate().skip(FIXED_COLUMNS) {
            let value = cell.trim().parse::<i64>().map_err(|_| Error::Parse {
                row,
                column: j + 1,
                value: cell.to_string(),
            })?;
            cumulative.push(value);
        }
        if !seen.insert(key.clone()) {
            return Err(Error::DuplicateKey(key.display()));
        }
        out.push(CaseSeries {
            key,
            dates: dates.clone(),
            cumulative,
        });
    }
    Ok(out)
}

fn parse_header(header: &csv::StringRecord) -> Result<Vec<NaiveDate>> {
    let expect = |idx: usize, names: &[&str]| -> Result<()> {
        let got = header.get(idx).map(str::trim).unwrap_or("");
        if names.contains(&got) {
            Ok(())
        } else {
            Err(Error::Format {
                column: format!("{} ({got:?})", idx + 1),
                message: format!("expected {:?}", names[0]),
            })
        }
    };
    expect(0, &[PROVINCE_COLUMN])?;
    expect(1, &[COUNTRY_COLUMN])?;
    expect(2, &[LAT_COLUMN])?;
    expect(3, &LONG_COLUMNS)?;

    let mut dates = Vec::with_capacity(header.len().saturating_sub(FIXED_COLUMNS));
    for (idx, cell) in header.iter().enumerate().skip(FIXED_COLUMNS) {
        let date = parse_header_date(cell).ok_or_else(|| Error::Format {
            column: format!("{} ({cell:?})", idx + 1),
            message: "not a date in M/D/YY or YYYY-MM-DD form".into(),
        })?;
        dates.push(date);
    }
    if dates.len() < 2 {
        return Err(Error::Format {
            column: format!("{}", header.len() + 1),
            message: format!("need at least 2 date columns, found {}", dates.len()),
        });
    }
    check_daily(&dates).map_err(|(_, b)| Error::Format {
        column: format!("{b}"),
        message: "date columns must advance by exactly one day".into(),
    })?;
    Ok(dates)
}

/// Writes series back in the wide layout with `M/D/YY` headers. Lat/Long
/// are left blank. All series must share one date axis.
pub fn write_cases_csv<W: Write>(series: &[CaseSeries], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dates: &[NaiveDate] = series.first().map(|s| s.dates.as_slice()).unwrap_or(&[]);
    let mut header = vec![
        PROVINCE_COLUMN.to_string(),
        COUNTRY_COLUMN.to_string(),
        LAT_COLUMN.to_string(),
        LONG_COLUMNS[0].to_string(),
    ];
    header.extend(dates.iter().map(|d| d.format("%-m/%-d/%y").to_string()));
    w.write_record(&header)?;
    for s in series {
        if s.dates != dates {
            return Err(Error::Parameter(format!(
                "{}: date axis differs from the first series",
                s.key
            )));
        }
        let mut row = vec![
            s.key.province().unwrap_or("").to_string(),
            s.key.country().to_string(),
            String::new(),
            String::new(),
        ];
        row.extend(s.cumulative.iter().map(i64::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes the normalized long layout `region,date,cumulative`.
pub fn write_long_csv<W: Write>(series: &[CaseSeries], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["region", "date", "cumulative"])?;
    for s in series {
        let region = s.key.display();
        for (date, n) in s.dates.iter().zip(&s.cumulative) {
            w.write_record([region.as_str(), &date.to_string(), &n.to_string()])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Keeps series whose cumulative count on `as_of` is at least
/// `min_cumulative`. If `as_of` lies outside a series, the nearest
/// available date is used instead and a warning is logged.
pub fn select_regions(series: &[CaseSeries], min_cumulative: i64, as_of: NaiveDate) -> Vec<CaseSeries> {
    series
        .iter()
        .filter(|s| {
            let date = clamp_date(s, as_of);
            s.value_on(date).is_some_and(|n| n >= min_cumulative)
        })
        .cloned()
        .collect()
}

fn clamp_date(s: &CaseSeries, as_of: NaiveDate) -> NaiveDate {
    let (first, last) = (s.first_date(), s.last_date());
    if as_of > last {
        warn!("{}: as-of date {as_of} after last available date, using {last}", s.key);
        last
    } else if as_of < first {
        warn!("{}: as-of date {as_of} before first available date, using {first}", s.key);
        first
    } else {
        as_of
    }
}

/// Inclusive sub-series `[start, end]`.
pub fn restrict_date_range(series: &CaseSeries, start: NaiveDate, end: NaiveDate) -> Result<CaseSeries> {
    let (first, last) = (series.first_date(), series.last_date());
    if start > end || start < first || end > last {
        return Err(Error::Range {
            start,
            end,
            first,
            last,
        });
    }
    let lo = (start - first).num_days() as usize;
    let hi = (end - first).num_days() as usize;
    if hi - lo + 1 < 2 {
        return Err(Error::insufficient(format!("case series {}", series.key), 2, 1));
    }
    Ok(CaseSeries {
        key: series.key.clone(),
        dates: series.dates[lo..=hi].to_vec(),
        cumulative: series.cumulative[lo..=hi].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    const HEADER: &str = "Province/State,Country/Region,Lat,Long,1/22/20,1/23/20,1/24/20\n";

    #[test]
    fn parses_plain_row() {
        let text = format!("{HEADER},Albania,41.15,20.17,0,0,1\n");
        let series = parse_cases_csv(text.as_bytes()).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].key.display(), "Albania");
        assert_eq!(series[0].cumulative, vec![0, 0, 1]);
        assert_eq!(series[0].dates, vec![d(2020, 1, 22), d(2020, 1, 23), d(2020, 1, 24)]);
    }

    #[test]
    fn quoted_province_is_kept_separate() {
        let text = format!(
            "{HEADER}\"New South Wales\",Australia,-33.8,151.2,1,2,3\n\"Bonaire, Sint Eustatius and Saba\",Netherlands,12.1,-68.2,0,1,1\nUnknown,China,0,0,4,5,6\n"
        );
        let series = parse_cases_csv(text.as_bytes()).unwrap();
        assert_eq!(series[0].key.display(), "Australia: New South Wales");
        assert_eq!(
            series[1].key.display(),
            "Netherlands: Bonaire, Sint Eustatius and Saba"
        );
        assert_eq!(series[2].key.display(), "China: Unknown");
    }

    #[test]
    fn header_only_yields_nothing() {
        assert!(parse_cases_csv(HEADER.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn iso_headers_accepted() {
        let text = "Province/State,Country/Region,Lat,Long,2021-03-01,2021-03-02\n,X,0,0,5,7\n";
        let series = parse_cases_csv(text.as_bytes()).unwrap();
        assert_eq!(series[0].first_date(), d(2021, 3, 1));
    }

    #[test]
    fn bad_header_names_column() {
        let text = "Province,Country/Region,Lat,Long,1/22/20,1/23/20\n";
        match parse_cases_csv(text.as_bytes()) {
            Err(Error::Format { column, .. }) => assert!(column.starts_with('1'), "{column}"),
            other => panic!("unexpected {other:?}"),
        }
        let text = "Province/State,Country/Region,Lat,Long,1/22/20,notadate\n";
        match parse_cases_csv(text.as_bytes()) {
            Err(Error::Format { column, .. }) => assert!(column.contains("notadate")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_reports_coordinates() {
        let text = format!("{HEADER},A,0,0,1,2,3\n,B,0,0,1,x,3\n");
        match parse_cases_csv(text.as_bytes()) {
            Err(Error::Parse { row, column, value }) => {
                assert_eq!((row, column, value.as_str()), (3, 6, "x"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_keys_rejected() {
        let text = format!("{HEADER},A,0,0,1,2,3\n,A,0,0,1,2,3\n");
        assert!(matches!(
            parse_cases_csv(text.as_bytes()),
            Err(Error::DuplicateKey(k)) if k == "A"
        ));
    }

    #[test]
    fn gap_in_header_dates_rejected() {
        let text = "Province/State,Country/Region,Lat,Long,1/22/20,1/24/20\n";
        assert!(matches!(parse_cases_csv(text.as_bytes()), Err(Error::Format { .. })));
    }

    fn series(name: &str, values: &[i64]) -> CaseSeries {
        CaseSeries::from_start(RegionKey::new(name, None), d(2022, 5, 27), values.to_vec()).unwrap()
    }

    #[test]
    fn selection_boundary() {
        let all = vec![
            series("Low", &[0, 50_000, 99_999]),
            series("Exact", &[0, 1, 100_000]),
            series("High", &[0, 1, 250_000]),
        ];
        let kept = select_regions(&all, 100_000, d(2022, 5, 29));
        let names: Vec<_> = kept.iter().map(|s| s.key.display()).collect();
        assert_eq!(names, ["Exact", "High"]);
        assert_eq!(select_regions(&all, 0, d(2022, 5, 29)).len(), 3);
        // as-of inside the range uses that day's count
        assert!(select_regions(&all, 100_000, d(2022, 5, 28)).is_empty());
    }

    #[test]
    fn selection_clamps_as_of_to_last_date() {
        let all = vec![series("A", &[0, 1, 200_000])];
        assert_eq!(select_regions(&all, 100_000, d(2030, 1, 1)).len(), 1);
    }

    #[test]
    fn restrict_ranges() {
        let s = CaseSeries::from_start(RegionKey::new("A", None), d(2020, 1, 1), (0..10).collect()).unwrap();
        assert_eq!(restrict_date_range(&s, d(2020, 1, 1), d(2020, 1, 10)).unwrap(), s);
        let sub = restrict_date_range(&s, d(2020, 1, 3), d(2020, 1, 5)).unwrap();
        assert_eq!(sub.cumulative, vec![2, 3, 4]);
        assert!(matches!(
            restrict_date_range(&s, d(2020, 1, 5), d(2020, 1, 3)),
            Err(Error::Range { .. })
        ));
        assert!(matches!(
            restrict_date_range(&s, d(2019, 12, 1), d(2020, 1, 3)),
            Err(Error::Range { .. })
        ));
    }

    #[test]
    fn long_layout() {
        let s = series("Australia", &[1, 2, 3]);
        let mut buf = Vec::new();
        write_long_csv(&[s], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "region,date,cumulative\nAustralia,2022-05-27,1\nAustralia,2022-05-28,2\nAustralia,2022-05-29,3\n"
        );
    }

    #[test]
    fn display_round_trips() {
        for key in [RegionKey::new("US", None), RegionKey::new("France", Some("Reunion"))] {
            assert_eq!(RegionKey::from_display(&key.display()), key);
        }
    }
}
