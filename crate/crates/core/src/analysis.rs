//! Robustness grid, cross-run label alignment, community median curves,
//! activity peaks, and the smoothed three-community phase trajectory.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::Serialize;

use crate::community::{louvain, Partition, DEFAULT_RESOLUTION, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::ingest::{CaseSeries, RegionKey};
use crate::netbuild::{build_network, BuildSettings, SimilarityMeasure};
use crate::numfmt::fmt_real;
use crate::transform::{to_exponent_series, ExponentSeries};

pub const DEFAULT_SAMPLES_PER_SEGMENT: usize = 10;
pub const SPLINE_DEGREE: usize = 3;

/// A daily curve that may be undefined on some dates.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<Option<f64>>,
}

impl Curve {
    pub fn from_values(start: NaiveDate, values: Vec<Option<f64>>) -> Self {
        Curve {
            dates: start.iter_days().take(values.len()).collect(),
            values,
        }
    }

    pub fn get(&self, date: NaiveDate) -> Option<f64> {
        self.dates
            .binary_search(&date)
            .ok()
            .and_then(|i| self.values[i])
    }
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    })
}

/// Per-date median over the defined exponents of `members`.
pub fn median_curve(exps: &[ExponentSeries], members: &[RegionKey]) -> Result<Curve> {
    if members.is_empty() {
        return Err(Error::Parameter("median curve of an empty member set".into()));
    }
    let by_key: HashMap<&RegionKey, &ExponentSeries> = exps.iter().map(|e| (&e.key, e)).collect();
    let mut columns: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    for key in members {
        let series = by_key
            .get(key)
            .ok_or_else(|| Error::Parameter(format!("no exponent series for member {key}")))?;
        for (i, &date) in series.dates.iter().enumerate() {
            let column = columns.entry(date).or_default();
            if let Some(v) = series.get(i) {
                column.push(v);
            }
        }
    }
    let (dates, values) = columns
        .into_iter()
        .map(|(date, mut vals)| (date, median(&mut vals)))
        .unzip();
    Ok(Curve { dates, values })
}

/// Dates where the curve turns from growth (> 0) to decline (<= 0) on
/// consecutive defined days.
pub fn detect_peaks(curve: &Curve) -> Vec<NaiveDate> {
    (1..curve.values.len())
        .filter(|&t| {
            let consecutive = curve.dates[t - 1].succ_opt() == Some(curve.dates[t]);
            matches!((curve.values[t - 1], curve.values[t]), (Some(a), Some(b)) if a > 0.0 && b <= 0.0)
                && consecutive
        })
        .map(|t| curve.dates[t])
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSettings {
    pub rho_values: Vec<f64>,
    pub alpha_values: Vec<f64>,
    pub measures: Vec<SimilarityMeasure>,
    pub seed: u64,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings {
            rho_values: vec![0.0, 0.05, 0.1],
            alpha_values: vec![5.0, 7.0, 9.0],
            measures: vec![SimilarityMeasure::Pearson, SimilarityMeasure::Cosine],
            seed: DEFAULT_SEED,
        }
    }
}

impl GridSettings {
    /// Cells ordered by rho, then alpha, then measure.
    pub fn cells(&self) -> Vec<BuildSettings> {
        let mut out = Vec::with_capacity(self.len());
        for &rho in &self.rho_values {
            for &alpha in &self.alpha_values {
                for &measure in &self.measures {
                    out.push(BuildSettings { rho, alpha, measure });
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.rho_values.len() * self.alpha_values.len() * self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The main-result cell `(rho 0, alpha 7, pearson)`.
    pub fn reference() -> BuildSettings {
        BuildSettings::default()
    }
}

/// Why one grid cell produced no partition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellError {
    pub kind: String,
    pub message: String,
}

impl From<Error> for CellError {
    fn from(e: Error) -> Self {
        CellError {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRun {
    pub node_count: usize,
    pub edge_count: usize,
    pub partition: Partition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub settings: BuildSettings,
    pub outcome: std::result::Result<CellRun, CellError>,
}

impl GridCell {
    pub fn partition(&self) -> Option<&Partition> {
        self.outcome.as_ref().ok().map(|r| &r.partition)
    }
}

/// Transform, network and Louvain for every grid cell using the current
/// rayon pool.
pub fn run_grid(cases: &[CaseSeries], grid: &GridSettings) -> Vec<GridCell> {
    let mut alphas: Vec<f64> = Vec::new();
    for &a in &grid.alpha_values {
        if !alphas.contains(&a) {
            alphas.push(a);
        }
    }
    let transformed: Vec<(f64, std::result::Result<Vec<ExponentSeries>, CellError>)> = alphas
        .par_iter()
        .map(|&alpha| {
            let exps = cases
                .iter()
                .map(|c| to_exponent_series(c, alpha))
                .collect::<Result<Vec<_>>>()
                .map_err(CellError::from);
            (alpha, exps)
        })
        .collect();

    grid.cells()
        .into_par_iter()
        .map(|settings| {
            let exps = &transformed
                .iter()
                .find(|(a, _)| *a == settings.alpha)
                .expect("alpha transformed")
                .1;
            let outcome = match exps {
                Err(e) => Err(e.clone()),
                Ok(exps) => run_cell(exps, settings, grid.seed).map_err(CellError::from),
            };
            GridCell { settings, outcome }
        })
        .collect()
}

fn run_cell(exps: &[ExponentSeries], settings: BuildSettings, seed: u64) -> Result<CellRun> {
    let net = build_network(exps, settings.rho, settings.measure)?;
    let partition = louvain(&net, seed, DEFAULT_RESOLUTION)?;
    Ok(CellRun {
        node_count: net.node_count(),
        edge_count: net.edge_count(),
        partition,
    })
}

/// [`run_grid`] on a dedicated pool of `jobs` threads (0 means the rayon
/// default). Results do not depend on `jobs`.
pub fn run_grid_with_jobs(cases: &[CaseSeries], grid: &GridSettings, jobs: usize) -> Result<Vec<GridCell>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Parameter(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| run_grid(cases, grid)))
}

/// Regions by settings; each cell is an aligned community label (1-based)
/// or `None` when the region is not in that run's network.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix {
    pub rows: Vec<RegionKey>,
    pub columns: Vec<BuildSettings>,
    pub cells: Vec<Vec<Option<usize>>>,
}

impl MembershipMatrix {
    pub fn row(&self, key: &RegionKey) -> Option<&[Option<usize>]> {
        self.rows
            .iter()
            .position(|k| k == key)
            .map(|i| self.cells[i].as_slice())
    }

    pub fn column_index(&self, settings: &BuildSettings) -> Option<usize> {
        self.columns.iter().position(|c| c == settings)
    }
}

/// Community member sets ordered by descending size (ties: smaller label).
fn communities_by_size(p: &Partition) -> Vec<(usize, HashSet<&RegionKey>)> {
    let mut groups: BTreeMap<usize, HashSet<&RegionKey>> = BTreeMap::new();
    for (key, &l) in p.nodes.iter().zip(&p.labels) {
        groups.entry(l).or_default().insert(key);
    }
    let mut out: Vec<_> = groups.into_iter().collect();
    out.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));
    out
}

fn jaccard(a: &HashSet<&RegionKey>, b: &HashSet<&RegionKey>) -> (usize, f64) {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    (inter, if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

/// Maps each run's communities onto the reference run's numbering.
///
/// Reference communities become 1..=k by descending size. Every other run
/// is matched greedily by Jaccard overlap, each reference label used at
/// most once; unmatched communities get fresh labels from k+1 upward.
pub fn align_labels(results: &[GridCell], reference: &BuildSettings) -> Result<MembershipMatrix> {
    let ref_cell = results
        .iter()
        .find(|c| &c.settings == reference)
        .ok_or_else(|| Error::Alignment(format!("reference cell {} not in results", reference.label())))?;
    let ref_partition = match &ref_cell.outcome {
        Ok(run) => &run.partition,
        Err(e) => {
            return Err(Error::Alignment(format!(
                "reference cell {} failed: {}",
                reference.label(),
                e.message
            )))
        }
    };
    let ref_groups = communities_by_size(ref_partition);
    let k = ref_groups.len();

    let mut rows: Vec<RegionKey> = Vec::new();
    let mut row_index: HashMap<RegionKey, usize> = HashMap::new();
    for p in std::iter::once(ref_partition).chain(results.iter().filter_map(GridCell::partition)) {
        for key in &p.nodes {
            if !row_index.contains_key(key) {
                row_index.insert(key.clone(), rows.len());
                rows.push(key.clone());
            }
        }
    }

    let mut cells = vec![vec![None; results.len()]; rows.len()];
    for (col, cell) in results.iter().enumerate() {
        let Some(p) = cell.partition() else { continue };
        let groups = communities_by_size(p);
        let mut candidates = Vec::new();
        for (gi, (_, members)) in groups.iter().enumerate() {
            for (ri, (_, ref_members)) in ref_groups.iter().enumerate() {
                let (inter, j) = jaccard(members, ref_members);
                if inter > 0 {
                    candidates.push((j, gi, ri));
                }
            }
        }
        // groups are already in size order, so the group index breaks ties by size
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut assigned: Vec<Option<usize>> = vec![None; groups.len()];
        let mut used = vec![false; k];
        for (_, gi, ri) in candidates {
            if assigned[gi].is_none() && !used[ri] {
                assigned[gi] = Some(ri + 1);
                used[ri] = true;
            }
        }
        let mut fresh = k;
        for slot in assigned.iter_mut().filter(|s| s.is_none()) {
            fresh += 1;
            *slot = Some(fresh);
        }
        for (gi, (_, members)) in groups.iter().enumerate() {
            for key in members {
                cells[row_index[*key]][col] = assigned[gi];
            }
        }
    }

    Ok(MembershipMatrix {
        rows,
        columns: results.iter().map(|c| c.settings).collect(),
        cells,
    })
}

fn majority(labels: &[Option<usize>]) -> usize {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for l in labels.iter().flatten() {
        *counts.entry(*l).or_default() += 1;
    }
    // BTreeMap iteration is ascending, so max_by keeps the smallest label on ties
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map_or(usize::MAX, |(l, _)| l)
}

/// Sorts rows by majority label, then the full label tuple (absent cells
/// last), then region name.
pub fn order_rows(matrix: &MembershipMatrix) -> MembershipMatrix {
    let mut order: Vec<usize> = (0..matrix.rows.len()).collect();
    let keyed: Vec<(usize, Vec<usize>, String)> = matrix
        .cells
        .iter()
        .zip(&matrix.rows)
        .map(|(row, key)| {
            let tuple = row.iter().map(|c| c.unwrap_or(usize::MAX)).collect();
            (majority(row), tuple, key.display())
        })
        .collect();
    order.sort_by(|&a, &b| keyed[a].cmp(&keyed[b]));
    MembershipMatrix {
        rows: order.iter().map(|&i| matrix.rows[i].clone()).collect(),
        columns: matrix.columns.clone(),
        cells: order.iter().map(|&i| matrix.cells[i].clone()).collect(),
    }
}

pub fn write_membership_csv<W: Write>(matrix: &MembershipMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["region".to_string()];
    header.extend(matrix.columns.iter().map(BuildSettings::label));
    w.write_record(&header)?;
    for (key, row) in matrix.rows.iter().zip(&matrix.cells) {
        let mut record = vec![key.display()];
        record.extend(row.iter().map(|c| c.map(|l| l.to_string()).unwrap_or_default()));
        w.write_record(&record)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub type Point3 = [f64; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    pub dates: Vec<NaiveDate>,
    pub points: Vec<Point3>,
    pub smoothed: Vec<Point3>,
}

/// Joins three median curves on the dates where all are defined.
pub fn build_trajectory(medians: [&Curve; 3]) -> Result<PhaseTrajectory> {
    let mut dates = Vec::new();
    let mut points = Vec::new();
    for (i, &date) in medians[0].dates.iter().enumerate() {
        let x = medians[0].values[i];
        if let (Some(x), Some(y), Some(z)) = (x, medians[1].get(date), medians[2].get(date)) {
            dates.push(date);
            points.push([x, y, z]);
        }
    }
    if points.is_empty() {
        return Err(Error::insufficient("phase trajectory (common defined dates)", 1, 0));
    }
    Ok(PhaseTrajectory {
        dates,
        points,
        smoothed: Vec::new(),
    })
}

/// Clamped uniform B-spline curve evaluated with de Boor's algorithm.
#[derive(Debug, Clone)]
pub struct BSpline {
    degree: usize,
    knots: Vec<f64>,
    controls: Vec<Point3>,
}

impl BSpline {
    /// Cubic where possible; degree drops to `n - 1` for fewer than four
    /// control points. Parameter domain is `[0, 1]`.
    pub fn clamped(controls: Vec<Point3>) -> Result<Self> {
        let n = controls.len();
        if n < 2 {
            return Err(Error::insufficient("B-spline control points", 2, n));
        }
        let degree = SPLINE_DEGREE.min(n - 1);
        let spans = n - degree;
        let mut knots = vec![0.0; degree + 1];
        knots.extend((1..spans).map(|i| i as f64 / spans as f64));
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Ok(BSpline {
            degree,
            knots,
            controls,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of non-degenerate knot spans.
    pub fn segments(&self) -> usize {
        self.controls.len() - self.degree
    }

    fn span(&self, u: f64) -> usize {
        let n = self.controls.len();
        if u >= 1.0 {
            return n - 1;
        }
        // last index with knots[k] <= u, kept inside [degree, n - 1]
        let k = self.knots.partition_point(|&t| t <= u) - 1;
        k.clamp(self.degree, n - 1)
    }

    pub fn eval(&self, u: f64) -> Point3 {
        let p = self.degree;
        let k = self.span(u);
        let t = &self.knots;
        let mut d: Vec<Point3> = (0..=p).map(|j| self.controls[j + k - p]).collect();
        for r in 1..=p {
            for j in (r..=p).rev() {
                let lo = t[j + k - p];
                let hi = t[j + 1 + k - r];
                let a = if hi > lo { (u - lo) / (hi - lo) } else { 0.0 };
                for c in 0..3 {
                    d[j][c] = (1.0 - a) * d[j - 1][c] + a * d[j][c];
                }
            }
        }
        d[p]
    }
}

/// Samples the clamped B-spline through `points` at
/// `segments * samples_per_segment + 1` uniformly spaced parameters.
/// The first and last samples coincide with the first and last points.
pub fn bspline_smooth(points: &[Point3], samples_per_segment: usize) -> Result<Vec<Point3>> {
    if samples_per_segment == 0 {
        return Err(Error::Parameter("samples_per_segment must be positive".into()));
    }
    let spline = BSpline::clamped(points.to_vec())?;
    let total = spline.segments() * samples_per_segment;
    Ok((0..=total)
        .map(|i| spline.eval(i as f64 / total as f64))
        .collect())
}

/// `date,c1,c2,...` with blank cells where a curve is undefined.
pub fn write_medians_csv<W: Write>(curves: &[&Curve], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["date".to_string()];
    header.extend((1..=curves.len()).map(|i| format!("c{i}")));
    w.write_record(&header)?;
    let dates: std::collections::BTreeSet<NaiveDate> =
        curves.iter().flat_map(|c| c.dates.iter().copied()).collect();
    for date in dates {
        let mut record = vec![date.to_string()];
        record.extend(curves.iter().map(|c| c.get(date).map(fmt_real).unwrap_or_default()));
        w.write_record(&record)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_trajectory_csv<W: Write>(traj: &PhaseTrajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "x", "y", "z"])?;
    for (date, p) in traj.dates.iter().zip(&traj.points) {
        w.write_record([date.to_string(), fmt_real(p[0]), fmt_real(p[1]), fmt_real(p[2])])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `index,t,x,y,z` where `t` is the spline parameter in `[0, 1]`.
pub fn write_smoothed_csv<W: Write>(samples: &[Point3], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "t", "x", "y", "z"])?;
    let last = samples.len().saturating_sub(1).max(1) as f64;
    for (i, p) in samples.iter().enumerate() {
        w.write_record([
            i.to_string(),
            fmt_real(i as f64 / last),
            fmt_real(p[0]),
            fmt_real(p[1]),
            fmt_real(p[2]),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `community,date`, communities numbered from 1.
pub fn write_peaks_csv<W: Write>(peaks: &[Vec<NaiveDate>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["community", "date"])?;
    for (i, dates) in peaks.iter().enumerate() {
        for d in dates {
            w.write_record([(i + 1).to_string(), d.to_string()])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
