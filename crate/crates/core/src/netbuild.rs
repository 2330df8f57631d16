//! Pairwise similarity between exponent series and the thresholded,
//! weighted correlation network built from it.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::RegionKey;
use crate::numfmt::fmt_real;
use crate::transform::ExponentSeries;

pub const DEFAULT_RHO: f64 = 0.0;

/// Fewest jointly defined observations for a similarity to exist.
pub const MIN_OVERLAP: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityMeasure {
    #[default]
    Pearson,
    Cosine,
}

impl SimilarityMeasure {
    pub fn as_str(self) -> &'static str {
        match self {
            SimilarityMeasure::Pearson => "pearson",
            SimilarityMeasure::Cosine => "cosine",
        }
    }

    pub fn eval(self, x: &[f64], y: &[f64]) -> Option<f64> {
        match self {
            SimilarityMeasure::Pearson => pearson(x, y),
            SimilarityMeasure::Cosine => cosine(x, y),
        }
    }
}

impl fmt::Display for SimilarityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SimilarityMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pearson" => Ok(SimilarityMeasure::Pearson),
            "cosine" => Ok(SimilarityMeasure::Cosine),
            other => Err(Error::Parameter(format!(
                "unknown similarity measure {other:?} (expected pearson or cosine)"
            ))),
        }
    }
}

/// Pairs where both entries are defined. Non-finite values (NaN) mark
/// undefined observations.
fn common(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    x.iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(&a, &b)| (a, b))
        .collect()
}

fn is_constant(pairs: &[(f64, f64)], pick: impl Fn(&(f64, f64)) -> f64) -> bool {
    let first = pick(&pairs[0]);
    pairs.iter().all(|p| pick(p) == first)
}

/// Product-moment correlation over pairwise-complete observations.
///
/// `None` when fewer than two common points remain or either side has
/// zero variance on them.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let pairs = common(x, y);
    if pairs.len() < MIN_OVERLAP || is_constant(&pairs, |p| p.0) || is_constant(&pairs, |p| p.1) {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(a, b) in &pairs {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Uncentered cosine similarity over pairwise-complete observations.
pub fn cosine(x: &[f64], y: &[f64]) -> Option<f64> {
    let pairs = common(x, y);
    if pairs.len() < MIN_OVERLAP {
        return None;
    }
    let (mut dot, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for &(a, b) in &pairs {
        dot += a * b;
        xx += a * a;
        yy += b * b;
    }
    if xx == 0.0 || yy == 0.0 {
        return None;
    }
    Some((dot / (xx.sqrt() * yy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildSettings {
    pub rho: f64,
    pub alpha: f64,
    pub measure: SimilarityMeasure,
}

impl BuildSettings {
    /// Column label such as `rho0_a7_pearson`.
    pub fn label(&self) -> String {
        format!("rho{}_a{}_{}", fmt_real(self.rho), fmt_real(self.alpha), self.measure)
    }
}

impl Default for BuildSettings {
    fn default() -> Self {
        BuildSettings {
            rho: DEFAULT_RHO,
            alpha: crate::transform::DEFAULT_ALPHA,
            measure: SimilarityMeasure::Pearson,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Weighted undirected graph over regions. Every node has at least one
/// edge, edges satisfy `a < b`, and every weight lies in `(rho, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationNetwork {
    nodes: Vec<RegionKey>,
    edges: Vec<Edge>,
    settings: BuildSettings,
    dropped: Vec<RegionKey>,
}

impl CorrelationNetwork {
    /// Assembles a network from explicit edges, checking the invariants.
    /// Endpoint order within an edge is normalized.
    pub fn from_edges(
        nodes: Vec<RegionKey>,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
        settings: BuildSettings,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut degree = vec![0usize; nodes.len()];
        for (a, b, weight) in edges {
            let (a, b) = (a.min(b), a.max(b));
            if a == b {
                return Err(Error::Parameter(format!("self-loop on node {a}")));
            }
            if b >= nodes.len() {
                return Err(Error::Parameter(format!("edge endpoint {b} out of range")));
            }
            if !(weight > settings.rho && weight <= 1.0) {
                return Err(Error::Parameter(format!(
                    "edge ({a}, {b}) weight {weight} outside ({}, 1]",
                    settings.rho
                )));
            }
            if !seen.insert((a, b)) {
                return Err(Error::Parameter(format!("duplicate edge ({a}, {b})")));
            }
            degree[a] += 1;
            degree[b] += 1;
            out.push(Edge { a, b, weight });
        }
        if let Some(i) = degree.iter().position(|&d| d == 0) {
            return Err(Error::Parameter(format!("node {} ({}) is isolated", i, nodes[i])));
        }
        out.sort_by_key(|e| (e.a, e.b));
        Ok(CorrelationNetwork {
            nodes,
            edges: out,
            settings,
            dropped: Vec::new(),
        })
    }

    pub fn nodes(&self) -> &[RegionKey] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn settings(&self) -> BuildSettings {
        self.settings
    }

    /// Input regions left out because they had no edge.
    pub fn dropped(&self) -> &[RegionKey] {
        &self.dropped
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Weighted degree per node.
    pub fn strengths(&self) -> Vec<f64> {
        let mut k = vec![0.0; self.nodes.len()];
        for e in &self.edges {
            k[e.a] += e.weight;
            k[e.b] += e.weight;
        }
        k
    }

    /// Adjacency lists `(neighbor, weight)` sorted by neighbor.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.a].push((e.b, e.weight));
            adj[e.b].push((e.a, e.weight));
        }
        for list in &mut adj {
            list.sort_by_key(|&(j, _)| j);
        }
        adj
    }

    /// Same graph with nodes reordered: new node `i` is old node `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut inverse = vec![usize::MAX; self.nodes.len()];
        for (new, &old) in order.iter().enumerate() {
            inverse[old] = new;
        }
        if order.len() != self.nodes.len() || inverse.contains(&usize::MAX) {
            return Err(Error::Parameter("order is not a permutation of the nodes".into()));
        }
        let nodes = order.iter().map(|&i| self.nodes[i].clone()).collect();
        let edges = self
            .edges
            .iter()
            .map(|e| (inverse[e.a], inverse[e.b], e.weight));
        let mut net = CorrelationNetwork::from_edges(nodes, edges, self.settings)?;
        net.dropped = self.dropped.clone();
        Ok(net)
    }
}

/// Places every series on the union date axis; missing or undefined days
/// become NaN.
fn align_on_dates(exps: &[ExponentSeries]) -> Vec<Vec<f64>> {
    let axis: Vec<NaiveDate> = exps
        .iter()
        .flat_map(|e| e.dates.iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let shared = exps.iter().all(|e| e.dates == axis);
    exps.iter()
        .map(|e| {
            if shared {
                (0..e.values.len())
                    .map(|i| e.get(i).unwrap_or(f64::NAN))
                    .collect()
            } else {
                let mut row = vec![f64::NAN; axis.len()];
                for i in 0..e.dates.len() {
                    if let (Ok(pos), Some(v)) = (axis.binary_search(&e.dates[i]), e.get(i)) {
                        row[pos] = v;
                    }
                }
                row
            }
        })
        .collect()
}

/// Builds the correlation network: an edge joins two regions iff their
/// similarity is defined and strictly greater than `rho`. Regions with no
/// edge are dropped; surviving nodes keep input order.
pub fn build_network(exps: &[ExponentSeries], rho: f64, measure: SimilarityMeasure) -> Result<CorrelationNetwork> {
    if exps.len() < 2 {
        return Err(Error::insufficient("network construction (series)", 2, exps.len()));
    }
    if !(rho >= -1.0) {
        return Err(Error::Parameter(format!("rho must be at least -1, got {rho}")));
    }
    let alpha = exps[0].alpha;
    let rows = align_on_dates(exps);
    let n = exps.len();

    let raw: Vec<(usize, usize, f64)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|a| {
            let rows = &rows;
            (a + 1..n).filter_map(move |b| {
                measure
                    .eval(&rows[a], &rows[b])
                    .filter(|&s| s > rho)
                    .map(|s| (a, b, s))
            })
        })
        .collect();

    let mut survivor = vec![false; n];
    for &(a, b, _) in &raw {
        survivor[a] = true;
        survivor[b] = true;
    }
    let mut index = vec![usize::MAX; n];
    let mut nodes = Vec::new();
    let mut dropped = Vec::new();
    for i in 0..n {
        if survivor[i] {
            index[i] = nodes.len();
            nodes.push(exps[i].key.clone());
        } else {
            dropped.push(exps[i].key.clone());
        }
    }
    let settings = BuildSettings { rho, alpha, measure };
    let edges = raw.into_iter().map(|(a, b, w)| (index[a], index[b], w));
    let mut net = CorrelationNetwork::from_edges(nodes, edges, settings)?;
    net.dropped = dropped;
    Ok(net)
}

/// Edge list `source,target,weight` with display names.
pub fn write_edge_list_csv<W: Write>(net: &CorrelationNetwork, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["source", "target", "weight"])?;
    for e in &net.edges {
        w.write_record([
            net.nodes[e.a].display(),
            net.nodes[e.b].display(),
            fmt_real(e.weight),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// GraphML document with a `label` node attribute and a `weight` edge
/// attribute.
pub fn write_graphml<W: Write>(net: &CorrelationNetwork, mut out: W) -> std::io::Result<()> {
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(
        out,
        r#"<graphml xmlns="http://graphml.graphdrawing.org/xmlns" xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance" xsi:schemaLocation="http://graphml.graphdrawing.org/xmlns http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd">"#
    )?;
    writeln!(out, r#"  <key id="label" for="node" attr.name="label" attr.type="string"/>"#)?;
    writeln!(out, r#"  <key id="weight" for="edge" attr.name="weight" attr.type="double"/>"#)?;
    writeln!(out, r#"  <graph id="G" edgedefault="undirected">"#)?;
    for (i, key) in net.nodes.iter().enumerate() {
        writeln!(
            out,
            r#"    <node id="n{i}"><data key="label">{}</data></node>"#,
            xml_escape(&key.display())
        )?;
    }
    for (i, e) in net.edges.iter().enumerate() {
        writeln!(
            out,
            r#"    <edge id="e{i}" source="n{}" target="n{}"><data key="weight">{}</data></edge>"#,
            e.a,
            e.b,
            fmt_real(e.weight)
        )?;
    }
    writeln!(out, "  </graph>")?;
    writeln!(out, "</graphml>")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(name: &str, values: Vec<f64>) -> ExponentSeries {
        let start = NaiveDate::from_ymd_opt(2020, 1, 30).unwrap();
        ExponentSeries {
            key: RegionKey::new(name, None),
            dates: start.iter_days().take(values.len()).collect(),
            defined: vec![true; values.len()],
            values,
            alpha: 7.0,
        }
    }

    #[test]
    fn pearson_cases() {
        let x = [1.0, 2.0, 3.0, 5.0];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        // sxy = 3, sxx = 2, syy = 14/3 -> 3 / sqrt(28/3)
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((r - 3.0 / (28.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((r - 0.981980506).abs() < 1e-9);
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), None);
        assert_eq!(pearson(&[0.1, 0.1, 0.1], &[1.0, 2.0, 3.0]), None);
        assert_eq!(pearson(&[1.0], &[2.0]), None);
    }

    #[test]
    fn pairwise_complete() {
        let x = [1.0, f64::NAN, 3.0, 4.0];
        let y = [2.0, 100.0, 6.0, f64::NAN];
        // only indices 0 and 2 survive
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(pearson(&[1.0, f64::NAN], &[1.0, 2.0]), None);
    }

    #[test]
    fn cosine_cases() {
        assert!((cosine(&[3.0, 4.0], &[3.0, 4.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]), Some(0.0));
        assert!((cosine(&[1.0, 2.0], &[2.0, 1.0]).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]), None);
    }

    #[test]
    fn identical_series_form_a_triangle() {
        let v = vec![0.1, -0.2, 0.4, 0.0, 0.3];
        let exps = vec![series("A", v.clone()), series("B", v.clone()), series("C", v)];
        let net = build_network(&exps, 0.0, SimilarityMeasure::Pearson).unwrap();
        assert_eq!(net.node_count(), 3);
        assert_eq!(net.edge_count(), 3);
        assert!(net.edges().iter().all(|e| (e.weight - 1.0).abs() < 1e-15));
    }

    #[test]
    fn zero_correlation_makes_no_edge() {
        // centered and orthogonal: pearson is exactly 0
        let a = series("A", vec![1.0, -1.0, 1.0, -1.0]);
        let b = series("B", vec![1.0, 1.0, -1.0, -1.0]);
        assert_eq!(pearson(&a.values, &b.values), Some(0.0));
        let c = series("C", vec![1.0, -1.0, 1.0, -1.0]);
        let net = build_network(&[a, b, c], 0.0, SimilarityMeasure::Pearson).unwrap();
        let names: Vec<_> = net.nodes().iter().map(|k| k.display()).collect();
        assert_eq!(names, ["A", "C"]);
        assert_eq!(net.dropped()[0].display(), "B");
    }

    #[test]
    fn too_few_series() {
        let a = series("A", vec![1.0, 2.0]);
        assert!(matches!(
            build_network(&[a], 0.0, SimilarityMeasure::Pearson),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn misaligned_dates_use_common_days() {
        let a = series("A", vec![1.0, 2.0, 3.0, 4.0, 9.0]);
        let mut b = series("B", vec![2.0, 3.0, 4.0, 5.0]);
        b.dates = a.dates[1..].to_vec();
        // common days carry a = [2,3,4,9], b = [2,3,4,5]
        let net = build_network(&[a, b], 0.0, SimilarityMeasure::Pearson).unwrap();
        let expected = pearson(&[2.0, 3.0, 4.0, 9.0], &[2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(net.edges()[0].weight, expected);
    }

    #[test]
    fn exports_are_stable() {
        let exps = vec![
            series("A, the first", vec![0.1, 0.2, 0.3, 0.5]),
            series("B<&>", vec![0.1, 0.25, 0.3, 0.45]),
        ];
        let net = build_network(&exps, 0.0, SimilarityMeasure::Pearson).unwrap();
        let mut csv_out = Vec::new();
        write_edge_list_csv(&net, &mut csv_out).unwrap();
        let csv_text = String::from_utf8(csv_out).unwrap();
        let w = fmt_real(net.edges()[0].weight);
        assert_eq!(csv_text, format!("source,target,weight\n\"A, the first\",B<&>,{w}\n"));

        let mut xml = Vec::new();
        write_graphml(&net, &mut xml).unwrap();
        let xml = String::from_utf8(xml).unwrap();
        assert!(xml.contains(r#"<node id="n1"><data key="label">B&lt;&amp;&gt;</data></node>"#));
        assert!(xml.contains(&format!(r#"<edge id="e0" source="n0" target="n1"><data key="weight">{w}</data></edge>"#)));
    }

    #[test]
    fn settings_label() {
        let s = BuildSettings { rho: 0.05, alpha: 7.0, measure: SimilarityMeasure::Cosine };
        assert_eq!(s.label(), "rho0.05_a7_cosine");
        assert_eq!(BuildSettings::default().label(), "rho0_a7_pearson");
    }

    proptest! {
        #[test]
        fn pearson_symmetric_and_affine_invariant(
            xy in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..50),
            scale in 0.1f64..10.0,
            shift in -5.0f64..5.0,
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
            let r = pearson(&x, &y);
            prop_assert_eq!(r, pearson(&y, &x));
            let moved: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
            match (r, pearson(&moved, &y)) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                (None, None) => {}
                (a, b) => prop_assert!(false, "definedness changed: {:?} vs {:?}", a, b),
            }
        }

        #[test]
        fn edges_monotone_in_rho(rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 12), 3..8)) {
            let exps: Vec<_> = rows.into_iter().enumerate()
                .map(|(i, v)| series(&format!("R{i}"), v)).collect();
            let mut last = usize::MAX;
            for rho in [-0.5, 0.0, 0.05, 0.1, 0.5] {
                let count = build_network(&exps, rho, SimilarityMeasure::Pearson)
                    .map(|n| n.edge_count()).unwrap_or(0);
                prop_assert!(count <= last);
                last = count;
            }
        }
    }
}
