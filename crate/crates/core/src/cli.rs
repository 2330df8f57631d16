//! Run configuration and the stage-wiring commands behind the `epinet`
//! binary.
//!
//! Configuration comes from three layers, later ones winning: built-in
//! defaults, an optional flat `key = value` file, then command-line flags.
//! `EPINET_SEED` supplies the seed when neither the file nor a flag does.
//!
//! Every command renders all of its outputs in memory before touching the
//! output directory, so a failing run leaves no partial files behind.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use log::{info, warn};
use serde::Serialize;

use crate::analysis::{
    align_labels, bspline_smooth, build_trajectory, detect_peaks, median_curve, order_rows,
    run_grid_with_jobs, write_medians_csv, write_membership_csv, write_peaks_csv,
    write_smoothed_csv, write_trajectory_csv, CellError, GridSettings, DEFAULT_SAMPLES_PER_SEGMENT,
};
use crate::community::{louvain, write_partition_csv, SettingsFingerprint, DEFAULT_RESOLUTION};
use crate::error::{Error, Result};
use crate::ingest::{
    default_end, default_start, parse_cases_csv, parse_header_date, restrict_date_range,
    select_regions, write_long_csv, CaseSeries, DEFAULT_MIN_CUMULATIVE,
};
use crate::netbuild::{build_network, write_edge_list_csv, write_graphml, BuildSettings, SimilarityMeasure};
use crate::numfmt::{fmt_real, round_real};
use crate::transform::{to_exponent_series, trace, write_trace_csv, ExponentSeries};

pub const SEED_ENV: &str = "EPINET_SEED";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input_path: Option<PathBuf>,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub min_cumulative: i64,
    pub alpha: f64,
    pub rho: f64,
    pub measure: SimilarityMeasure,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub grid: Option<GridSettings>,
    pub samples_per_segment: usize,
    /// Worker threads for grid cells; 0 lets the pool decide.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input_path: None,
            start: default_start(),
            end: default_end(),
            min_cumulative: DEFAULT_MIN_CUMULATIVE,
            alpha: crate::transform::DEFAULT_ALPHA,
            rho: crate::netbuild::DEFAULT_RHO,
            measure: SimilarityMeasure::Pearson,
            seed: crate::community::DEFAULT_SEED,
            output_dir: PathBuf::from("out"),
            grid: None,
            samples_per_segment: DEFAULT_SAMPLES_PER_SEGMENT,
            jobs: 0,
        }
    }
}

/// Values given explicitly on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub alpha: Option<f64>,
    pub rho: Option<f64>,
    pub measure: Option<SimilarityMeasure>,
    pub min_cases: Option<i64>,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

fn parse_date(key: &str, value: &str) -> Result<NaiveDate> {
    parse_header_date(value).ok_or_else(|| Error::Config(format!("bad date {value:?} for {key}")))
}

fn parse_list<T>(key: &str, value: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(item)
        .collect::<Result<Vec<_>>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("{key} must list at least one value")));
    }
    Ok(items)
}

impl RunConfig {
    /// Applies a flat `key = value` document. Blank lines, `#`/`;`
    /// comments and `[section]` headers are ignored. Returns whether the
    /// document set the seed.
    pub fn apply_config_text(&mut self, text: &str) -> Result<bool> {
        let mut seed_set = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') || line.starts_with('[') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            let value = value.trim().trim_matches('"');
            match key {
                "input" => self.input_path = Some(PathBuf::from(value)),
                "start" => self.start = parse_date(key, value)?,
                "end" => self.end = parse_date(key, value)?,
                "min_cases" | "min_cumulative" => self.min_cumulative = parse_value(key, value)?,
                "alpha" => self.alpha = parse_value(key, value)?,
                "rho" => self.rho = parse_value(key, value)?,
                "measure" => self.measure = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
                "seed" => {
                    self.seed = parse_value(key, value)?;
                    seed_set = true;
                }
                "out" | "output_dir" => self.output_dir = PathBuf::from(value),
                "jobs" => self.jobs = parse_value(key, value)?,
                "samples_per_segment" => self.samples_per_segment = parse_value(key, value)?,
                "grid_rho" => self.grid_mut().rho_values = parse_list(key, value, |v| parse_value(key, v))?,
                "grid_alpha" => self.grid_mut().alpha_values = parse_list(key, value, |v| parse_value(key, v))?,
                "grid_measures" => {
                    self.grid_mut().measures =
                        parse_list(key, value, |v| v.parse().map_err(|e: Error| Error::Config(e.to_string())))?
                }
                other => return Err(Error::Config(format!("line {}: unknown key {other:?}", lineno + 1))),
            }
        }
        Ok(seed_set)
    }

    fn grid_mut(&mut self) -> &mut GridSettings {
        self.grid.get_or_insert_with(GridSettings::default)
    }

    /// Layers defaults, the config file named in `overrides`, the seed
    /// environment fallback and the explicit flags.
    pub fn resolve(overrides: &Overrides, env_seed: Option<&str>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seed_set = false;
        if let Some(path) = &overrides.config {
            let text = fs::read_to_string(path).map_err(|source| Error::Input {
                path: path.clone(),
                source,
            })?;
            seed_set = cfg.apply_config_text(&text)?;
        }
        if !seed_set && overrides.seed.is_none() {
            if let Some(raw) = env_seed {
                cfg.seed = parse_value(SEED_ENV, raw)?;
            }
        }
        if let Some(v) = &overrides.input {
            cfg.input_path = Some(v.clone());
        }
        if let Some(v) = overrides.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = overrides.rho {
            cfg.rho = v;
        }
        if let Some(v) = overrides.measure {
            cfg.measure = v;
        }
        if let Some(v) = overrides.min_cases {
            cfg.min_cumulative = v;
        }
        if let Some(v) = overrides.start {
            cfg.start = v;
        }
        if let Some(v) = overrides.end {
            cfg.end = v;
        }
        if let Some(v) = overrides.seed {
            cfg.seed = v;
        }
        if let Some(v) = overrides.jobs {
            cfg.jobs = v;
        }
        if let Some(v) = &overrides.out {
            cfg.output_dir = v.clone();
        }
        if let Some(grid) = &mut cfg.grid {
            grid.seed = cfg.seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.start > self.end {
            return Err(Error::Config(format!("start {} is after end {}", self.start, self.end)));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.rho >= -1.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho must be in [-1, 1), got {}", self.rho)));
        }
        if self.samples_per_segment == 0 {
            return Err(Error::Config("samples_per_segment must be positive".into()));
        }
        Ok(())
    }

    pub fn settings(&self) -> BuildSettings {
        BuildSettings {
            rho: self.rho,
            alpha: self.alpha,
            measure: self.measure,
        }
    }

    /// Grid used by the `grid` command: the configured one or the default
    /// 18-cell grid, carrying this config's seed.
    pub fn grid_settings(&self) -> GridSettings {
        let mut grid = self.grid.clone().unwrap_or_default();
        grid.seed = self.seed;
        grid
    }

    fn record(&self) -> ConfigRecord {
        ConfigRecord {
            input: self.input_path.as_ref().map(|p| p.display().to_string()),
            start: self.start.to_string(),
            end: self.end.to_string(),
            min_cumulative: self.min_cumulative,
            alpha: round_real(self.alpha),
            rho: round_real(self.rho),
            measure: self.measure,
            seed: self.seed,
            output_dir: self.output_dir.display().to_string(),
            samples_per_segment: self.samples_per_segment,
            grid: self.grid.as_ref().map(|g| GridRecord {
                rho_values: g.rho_values.iter().copied().map(round_real).collect(),
                alpha_values: g.alpha_values.iter().copied().map(round_real).collect(),
                measures: g.measures.clone(),
            }),
        }
    }
}

/// The effective configuration as written into summaries. The worker
/// count is left out since it never changes results.
#[derive(Debug, Serialize)]
struct ConfigRecord {
    input: Option<String>,
    start: String,
    end: String,
    min_cumulative: i64,
    alpha: f64,
    rho: f64,
    measure: SimilarityMeasure,
    seed: u64,
    output_dir: String,
    samples_per_segment: usize,
    grid: Option<GridRecord>,
}

#[derive(Debug, Serialize)]
struct GridRecord {
    rho_values: Vec<f64>,
    alpha_values: Vec<f64>,
    measures: Vec<SimilarityMeasure>,
}

#[derive(Debug, Serialize)]
struct FingerprintRecord {
    rho: f64,
    alpha: f64,
    measure: SimilarityMeasure,
    seed: Option<u64>,
}

impl From<SettingsFingerprint> for FingerprintRecord {
    fn from(f: SettingsFingerprint) -> Self {
        FingerprintRecord {
            rho: round_real(f.rho),
            alpha: round_real(f.alpha),
            measure: f.measure,
            seed: f.seed,
        }
    }
}

/// Files rendered by a command, written together at the end.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, render: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        render(&mut buf)?;
        self.files.push((name.to_string(), buf));
        Ok(())
    }

    fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.add(name, |buf| {
            serde_json::to_writer_pretty(&mut *buf, value)
                .map_err(|e| Error::Parameter(format!("cannot serialize {name}: {e}")))?;
            buf.push(b'\n');
            Ok(())
        })
    }

    fn write(self) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(&self.dir).map_err(|source| Error::Output {
            path: self.dir.clone(),
            source,
        })?;
        let mut written = Vec::new();
        for (name, bytes) in self.files {
            let path = self.dir.join(name);
            fs::write(&path, bytes).map_err(|source| Error::Output {
                path: path.clone(),
                source,
            })?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Reads, restricts and filters the case table named in the config.
pub fn load_selected(cfg: &RunConfig) -> Result<Vec<CaseSeries>> {
    let path = cfg
        .input_path
        .as_ref()
        .ok_or_else(|| Error::Config("no input file given".into()))?;
    let file = fs::File::open(path).map_err(|source| Error::Input {
        path: path.clone(),
        source,
    })?;
    let all = parse_cases_csv(std::io::BufReader::new(file))?;
    let Some(first) = all.first() else {
        return Err(Error::insufficient("input table (regions)", 2, 0));
    };

    let (lo, hi) = (first.first_date(), first.last_date());
    let start = cfg.start.max(lo);
    let end = cfg.end.min(hi);
    if start > end {
        return Err(Error::Range {
            start: cfg.start,
            end: cfg.end,
            first: lo,
            last: hi,
        });
    }
    if (start, end) != (cfg.start, cfg.end) {
        warn!(
            "requested range {}..{} clamped to available data {start}..{end}",
            cfg.start, cfg.end
        );
    }
    let restricted = all
        .iter()
        .map(|s| restrict_date_range(s, start, end))
        .collect::<Result<Vec<_>>>()?;
    let selected = select_regions(&restricted, cfg.min_cumulative, end);
    info!("{} of {} regions selected", selected.len(), all.len());
    Ok(selected)
}

fn exponents(cases: &[CaseSeries], alpha: f64) -> Result<Vec<ExponentSeries>> {
    cases.iter().map(|c| to_exponent_series(c, alpha)).collect()
}

#[derive(Debug, Serialize)]
struct PipelineSummary {
    modularity: f64,
    community_sizes: Vec<usize>,
    node_count: usize,
    edge_count: usize,
    selected_regions: usize,
    dropped_regions: Vec<String>,
    settings_fingerprint: FingerprintRecord,
    config: ConfigRecord,
}

/// ingest, transform, network, Louvain, medians, trajectory.
pub fn cmd_pipeline(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let cases = load_selected(cfg)?;
    let exps = exponents(&cases, cfg.alpha)?;
    let net = build_network(&exps, cfg.rho, cfg.measure)?;
    let partition = louvain(&net, cfg.seed, DEFAULT_RESOLUTION)?;
    if partition.community_count() < 3 {
        return Err(Error::InsufficientStructure(format!(
            "found {} communities; the phase trajectory needs three",
            partition.community_count()
        )));
    }

    let medians = (0..3)
        .map(|c| median_curve(&exps, &partition.member_keys(c)))
        .collect::<Result<Vec<_>>>()?;
    let mut trajectory = build_trajectory([&medians[0], &medians[1], &medians[2]])?;
    if trajectory.points.len() >= 2 {
        trajectory.smoothed = bspline_smooth(&trajectory.points, cfg.samples_per_segment)?;
    } else {
        trajectory.smoothed = trajectory.points.clone();
    }
    let peaks: Vec<_> = medians.iter().map(detect_peaks).collect();

    let summary = PipelineSummary {
        modularity: round_real(partition.modularity),
        community_sizes: partition.sizes(),
        node_count: net.node_count(),
        edge_count: net.edge_count(),
        selected_regions: cases.len(),
        dropped_regions: net.dropped().iter().map(|k| k.display()).collect(),
        settings_fingerprint: partition.fingerprint.into(),
        config: cfg.record(),
    };

    let mut out = Outputs::new(&cfg.output_dir);
    out.add("selected.csv", |b| write_long_csv(&cases, b))?;
    out.add("network.graphml", |b| write_graphml(&net, b).map_err(|source| Error::Output {
        path: "network.graphml".into(),
        source,
    }))?;
    out.add("edges.csv", |b| write_edge_list_csv(&net, b))?;
    out.add("partition.csv", |b| write_partition_csv(&partition, b))?;
    out.add_json("summary.json", &summary)?;
    out.add("medians.csv", |b| write_medians_csv(&[&medians[0], &medians[1], &medians[2]], b))?;
    out.add("trajectory.csv", |b| write_trajectory_csv(&trajectory, b))?;
    out.add("smoothed.csv", |b| write_smoothed_csv(&trajectory.smoothed, b))?;
    out.add("peaks.csv", |b| write_peaks_csv(&peaks, b))?;
    out.write()
}

#[derive(Debug, Serialize)]
struct GridCellError<'a> {
    cell: String,
    #[serde(flatten)]
    error: &'a CellError,
}

#[derive(Debug, Serialize)]
struct GridConfig {
    reference: String,
    cells: Vec<String>,
    config: ConfigRecord,
}

/// Robustness grid: every cell's partition, aligned to the reference cell
/// and row-ordered into `membership_matrix.csv`.
pub fn cmd_grid(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let grid = cfg.grid_settings();
    if grid.is_empty() {
        return Err(Error::Config("grid has no cells".into()));
    }
    let cells_settings = grid.cells();
    let mut reference = cfg.settings();
    if !cells_settings.contains(&reference) {
        warn!(
            "main setting {} is not a grid cell; aligning to {}",
            reference.label(),
            cells_settings[0].label()
        );
        reference = cells_settings[0];
    }

    let cases = load_selected(cfg)?;
    let results = run_grid_with_jobs(&cases, &grid, cfg.jobs)?;

    let mut out = Outputs::new(&cfg.output_dir);
    out.add("grid_cells.csv", |b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["cell", "status", "nodes", "edges", "communities", "modularity"])?;
        for cell in &results {
            let row = match &cell.outcome {
                Ok(run) => [
                    cell.settings.label(),
                    "ok".to_string(),
                    run.node_count.to_string(),
                    run.edge_count.to_string(),
                    run.partition.community_count().to_string(),
                    fmt_real(run.partition.modularity),
                ],
                Err(e) => [
                    cell.settings.label(),
                    e.kind.clone(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ],
            };
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    })?;
    let errors: Vec<GridCellError> = results
        .iter()
        .filter_map(|c| {
            c.outcome.as_ref().err().map(|error| GridCellError {
                cell: c.settings.label(),
                error,
            })
        })
        .collect();
    out.add_json("grid_errors.json", &errors)?;
    out.add_json(
        "grid_config.json",
        &GridConfig {
            reference: reference.label(),
            cells: cells_settings.iter().map(BuildSettings::label).collect(),
            config: cfg.record(),
        },
    )?;

    let aligned = match align_labels(&results, &reference) {
        Ok(m) => m,
        Err(e) => {
            out.write()?;
            return Err(Error::InsufficientStructure(e.to_string()));
        }
    };
    let matrix = order_rows(&aligned);
    out.add("membership_matrix.csv", |b| write_membership_csv(&matrix, b))?;
    out.write()
}

/// Builds and exports the network for the configured setting.
pub fn cmd_network(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let cases = load_selected(cfg)?;
    let exps = exponents(&cases, cfg.alpha)?;
    let net = build_network(&exps, cfg.rho, cfg.measure)?;
    let mut out = Outputs::new(&cfg.output_dir);
    out.add("network.graphml", |b| write_graphml(&net, b).map_err(|source| Error::Output {
        path: "network.graphml".into(),
        source,
    }))?;
    out.add("edges.csv", |b| write_edge_list_csv(&net, b))?;
    out.write()
}

/// Writes the selected cases in long form and the per-stage transform trace.
pub fn cmd_transform(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let cases = load_selected(cfg)?;
    let traces = cases
        .iter()
        .map(|c| trace(c, cfg.alpha))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Outputs::new(&cfg.output_dir);
    out.add("selected.csv", |b| write_long_csv(&cases, b))?;
    out.add("transform.csv", |b| write_trace_csv(&traces, b))?;
    out.write()
}

/// Machine-readable one-line error report.
pub fn error_json(err: &Error) -> String {
    serde_json::json!({
        "error": err.kind(),
        "message": err.to_string(),
        "exit_code": err.exit_code(),
    })
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_main_setting() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.min_cumulative, 100_000);
        assert_eq!(cfg.start.to_string(), "2020-01-22");
        assert_eq!(cfg.end.to_string(), "2022-05-29");
        assert_eq!(cfg.settings(), BuildSettings::default());
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn config_text() {
        let mut cfg = RunConfig::default();
        let seed_set = cfg
            .apply_config_text(
                "# main run\n[run]\nalpha = 5\nrho=0.05\nmeasure = cosine\nstart = 2020-02-01\nend = 3/1/21\ngrid_alpha = 5, 7\n",
            )
            .unwrap();
        assert!(!seed_set);
        assert_eq!(cfg.alpha, 5.0);
        assert_eq!(cfg.rho, 0.05);
        assert_eq!(cfg.measure, SimilarityMeasure::Cosine);
        assert_eq!(cfg.end.to_string(), "2021-03-01");
        let grid = cfg.grid.unwrap();
        assert_eq!(grid.alpha_values, vec![5.0, 7.0]);
        assert_eq!(grid.rho_values, vec![0.0, 0.05, 0.1]);

        let mut cfg = RunConfig::default();
        assert!(matches!(cfg.apply_config_text("colour = red"), Err(Error::Config(_))));
        assert!(matches!(cfg.apply_config_text("alpha"), Err(Error::Config(_))));
        assert!(matches!(cfg.apply_config_text("alpha = big"), Err(Error::Config(_))));
    }

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.ini");
        fs::write(&path, "alpha = 9\nrho = 0.1\n").unwrap();
        let overrides = Overrides {
            config: Some(path.clone()),
            rho: Some(0.05),
            ..Overrides::default()
        };
        let cfg = RunConfig::resolve(&overrides, Some("42")).unwrap();
        assert_eq!((cfg.alpha, cfg.rho, cfg.seed), (9.0, 0.05, 42));

        let with_flag = Overrides { seed: Some(3), ..overrides.clone() };
        assert_eq!(RunConfig::resolve(&with_flag, Some("42")).unwrap().seed, 3);

        fs::write(&path, "seed = 11\n").unwrap();
        assert_eq!(RunConfig::resolve(&overrides, Some("42")).unwrap().seed, 11);

        assert!(matches!(RunConfig::resolve(&Overrides::default(), Some("x")), Err(Error::Config(_))));
        let backwards = Overrides {
            start: Some(default_end()),
            end: Some(default_start()),
            ..Overrides::default()
        };
        assert!(matches!(RunConfig::resolve(&backwards, None), Err(Error::Config(_))));
    }

    #[test]
    fn error_report_is_json() {
        let err = Error::InsufficientStructure("no edges".into());
        let v: serde_json::Value = serde_json::from_str(&error_json(&err)).unwrap();
        assert_eq!(v["error"], "insufficient_structure");
        assert_eq!(v["exit_code"], 3);
    }
}
