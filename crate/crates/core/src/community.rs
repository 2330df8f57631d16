//! Weighted modularity, the multi-level Louvain maximizer, and an exact
//! enumeration oracle for small graphs.
//!
//! Modularity of an assignment `c` on a graph with weighted adjacency `A`,
//! strengths `k` and total edge weight `m` is
//!
//! ```text
//! Q = 1/(2m) * sum_ij (A_ij - k_i k_j / 2m) [c_i == c_j]
//!   = sum_c ( in_c / m - (tot_c / 2m)^2 )
//! ```
//!
//! where `in_c` is the weight of edges inside `c` and `tot_c` the summed
//! strength of its members.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::RegionKey;
use crate::netbuild::{CorrelationNetwork, SimilarityMeasure};

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_RESOLUTION: f64 = 1.0;
/// Largest network [`brute_force_best`] will enumerate.
pub const BRUTE_FORCE_MAX_NODES: usize = 12;

/// Network build settings plus the optimizer seed that produced a partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SettingsFingerprint {
    pub rho: f64,
    pub alpha: f64,
    pub measure: SimilarityMeasure,
    pub seed: Option<u64>,
}

/// Community assignment over a network's nodes.
///
/// `labels[i]` is the community of node `i`; labels are dense in `0..k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub nodes: Vec<RegionKey>,
    pub labels: Vec<usize>,
    pub modularity: f64,
    pub fingerprint: SettingsFingerprint,
}

impl Partition {
    pub fn community_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m + 1)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.community_count()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Node indices in community `label`.
    pub fn members(&self, label: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == label).collect()
    }

    pub fn member_keys(&self, label: usize) -> Vec<RegionKey> {
        self.members(label).into_iter().map(|i| self.nodes[i].clone()).collect()
    }

    pub fn label_of(&self, key: &RegionKey) -> Option<usize> {
        self.nodes.iter().position(|k| k == key).map(|i| self.labels[i])
    }
}

/// Modularity of `assignment` (one label per node, any label values).
pub fn modularity_of(net: &CorrelationNetwork, assignment: &[usize]) -> Result<f64> {
    if assignment.len() < net.node_count() {
        return Err(Error::Coverage(assignment.len()));
    }
    let m = net.total_weight();
    if !(m > 0.0) {
        return Err(Error::InsufficientStructure("network has no edge weight".into()));
    }
    let mut dense = HashMap::new();
    let labels: Vec<usize> = assignment[..net.node_count()]
        .iter()
        .map(|l| {
            let next = dense.len();
            *dense.entry(*l).or_insert(next)
        })
        .collect();
    let mut inside = vec![0.0; dense.len()];
    let mut total = vec![0.0; dense.len()];
    for e in net.edges() {
        total[labels[e.a]] += e.weight;
        total[labels[e.b]] += e.weight;
        if labels[e.a] == labels[e.b] {
            inside[labels[e.a]] += e.weight;
        }
    }
    let two_m = 2.0 * m;
    Ok(inside
        .iter()
        .zip(&total)
        .map(|(&i, &t)| i / m - (t / two_m) * (t / two_m))
        .sum())
}

/// One aggregation level: super-nodes with inter-node weights and
/// self-loop weights carrying the edges already inside them.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    self_loop: Vec<f64>,
    strength: Vec<f64>,
}

impl Level {
    fn len(&self) -> usize {
        self.adj.len()
    }

    fn from_network(net: &CorrelationNetwork) -> Self {
        Level {
            adj: net.adjacency(),
            self_loop: vec![0.0; net.node_count()],
            strength: net.strengths(),
        }
    }

    /// Contracts each community (dense labels `0..k`) into one node.
    fn aggregate(&self, community: &[usize], k: usize) -> Level {
        let mut self_loop = vec![0.0; k];
        let mut strength = vec![0.0; k];
        let mut maps: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); k];
        for i in 0..self.len() {
            let ci = community[i];
            self_loop[ci] += self.self_loop[i];
            strength[ci] += self.strength[i];
            for &(j, w) in &self.adj[i] {
                let cj = community[j];
                if ci == cj {
                    // each internal edge is seen from both ends
                    if i < j {
                        self_loop[ci] += w;
                    }
                } else {
                    *maps[ci].entry(cj).or_insert(0.0) += w;
                }
            }
        }
        Level {
            adj: maps.into_iter().map(|m| m.into_iter().collect()).collect(),
            self_loop,
            strength,
        }
    }
}

/// Relabels to `0..k` in order of first appearance.
fn renumber(community: &mut [usize]) -> usize {
    let mut map = HashMap::new();
    for c in community.iter_mut() {
        let next = map.len();
        *c = *map.entry(*c).or_insert(next);
    }
    map.len()
}

/// Phase one: repeated sweeps of single-node moves until a sweep moves
/// nothing. Returns the community of each node and whether anything moved.
fn local_moving(level: &Level, order: &[usize], two_m: f64, resolution: f64) -> (Vec<usize>, bool) {
    let n = level.len();
    let mut community: Vec<usize> = (0..n).collect();
    let mut total = level.strength.clone();
    let mut weight_to = vec![0.0; n];
    let mut is_touched = vec![false; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut any_move = false;

    loop {
        let mut moved = false;
        for &i in order {
            let ci = community[i];
            let ki = level.strength[i];
            for &(j, w) in &level.adj[i] {
                let cj = community[j];
                if !is_touched[cj] {
                    is_touched[cj] = true;
                    touched.push(cj);
                }
                weight_to[cj] += w;
            }
            total[ci] -= ki;

            let gain = |c: usize, weight: f64| weight - resolution * total[c] * ki / two_m;
            let stay = gain(ci, weight_to[ci]);
            let eps = 1e-12 * (1.0 + ki);
            let mut best_c = ci;
            let mut best_gain = stay;
            for &c in &touched {
                let g = gain(c, weight_to[c]);
                if g > best_gain + eps || ((g - best_gain).abs() <= eps && best_c != ci && c < best_c) {
                    best_c = c;
                    best_gain = g;
                }
            }
            if best_gain <= stay + eps {
                best_c = ci;
            }

            total[best_c] += ki;
            if best_c != ci {
                community[i] = best_c;
                moved = true;
            }
            for &c in &touched {
                weight_to[c] = 0.0;
                is_touched[c] = false;
            }
            touched.clear();
        }
        if !moved {
            break;
        }
        any_move = true;
    }
    (community, any_move)
}

/// Multi-level passes per call; the best-scoring pass is kept.
pub const LOUVAIN_RESTARTS: usize = 16;

/// Louvain modularity maximization with seeded visiting orders.
///
/// Nodes are first sorted canonically by display name, so the result does
/// not depend on the network's node order. Each level visits its nodes in a
/// shuffled order drawn from a ChaCha8 stream seeded with `seed`. The full
/// multi-level procedure runs [`LOUVAIN_RESTARTS`] times on that one stream
/// and the highest-modularity result wins (earliest pass on ties), which
/// lets symmetric graphs escape orders that lock in a local optimum.
/// Returned labels are ordered by descending community size, ties going to
/// the community holding the smallest node index.
pub fn louvain(net: &CorrelationNetwork, seed: u64, resolution: f64) -> Result<Partition> {
    if net.edge_count() == 0 {
        return Err(Error::InsufficientStructure(
            "network has no edges; nothing to partition".into(),
        ));
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::Parameter(format!("resolution must be positive, got {resolution}")));
    }
    check_positive_weights(net)?;
    let n = net.node_count();
    let mut canonical: Vec<usize> = (0..n).collect();
    let names: Vec<String> = net.nodes().iter().map(RegionKey::display).collect();
    canonical.sort_by(|&a, &b| names[a].cmp(&names[b]).then(a.cmp(&b)));
    let sorted = net.permuted(&canonical)?;

    let two_m = 2.0 * sorted.total_weight();
    let base = Level::from_network(&sorted);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..LOUVAIN_RESTARTS {
        let membership = multilevel(&base, &mut rng, two_m, resolution);
        let q = level_modularity(&base, &membership, two_m, resolution);
        if best.as_ref().is_none_or(|(bq, _)| q > bq + 1e-13) {
            best = Some((q, membership));
        }
    }
    let membership = best.map(|(_, m)| m).unwrap_or_else(|| (0..n).collect());

    let mut labels = vec![0; n];
    for (pos, &original) in canonical.iter().enumerate() {
        labels[original] = membership[pos];
    }
    let labels = order_by_size(&labels);
    finish(net, labels, Some(seed))
}

/// One complete local-moving/aggregation run. Returns the community of each
/// node of `base`.
fn multilevel(base: &Level, rng: &mut ChaCha8Rng, two_m: f64, resolution: f64) -> Vec<usize> {
    let mut membership: Vec<usize> = (0..base.len()).collect();
    let mut owned: Option<Level> = None;
    loop {
        let level = owned.as_ref().unwrap_or(base);
        let mut order: Vec<usize> = (0..level.len()).collect();
        order.shuffle(rng);
        let (mut community, moved) = local_moving(level, &order, two_m, resolution);
        if !moved {
            break;
        }
        let k = renumber(&mut community);
        for m in membership.iter_mut() {
            *m = community[*m];
        }
        if k == level.len() {
            break;
        }
        owned = Some(level.aggregate(&community, k));
    }
    membership
}

/// Resolution-weighted modularity of `community` on the base level.
fn level_modularity(level: &Level, community: &[usize], two_m: f64, resolution: f64) -> f64 {
    let k = community.iter().max().map_or(0, |&c| c + 1);
    let mut inside = vec![0.0; k];
    let mut total = vec![0.0; k];
    for i in 0..level.len() {
        let ci = community[i];
        total[ci] += level.strength[i];
        for &(j, w) in &level.adj[i] {
            if community[j] == ci {
                inside[ci] += w;
            }
        }
    }
    inside
        .iter()
        .zip(&total)
        .map(|(&a, &t)| a / two_m - resolution * (t / two_m) * (t / two_m))
        .sum()
}

fn check_positive_weights(net: &CorrelationNetwork) -> Result<()> {
    match net.edges().iter().find(|e| !(e.weight > 0.0)) {
        Some(e) => Err(Error::Parameter(format!(
            "modularity maximization needs positive weights; edge ({}, {}) has {}",
            e.a, e.b, e.weight
        ))),
        None => Ok(()),
    }
}

/// Dense relabeling by descending size, ties by smallest member index.
pub fn order_by_size(labels: &[usize]) -> Vec<usize> {
    let mut groups: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        let entry = groups.entry(l).or_insert((0, i));
        entry.0 += 1;
    }
    let mut ranked: Vec<(usize, (usize, usize))> = groups.into_iter().collect();
    ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
    let rank: HashMap<usize, usize> = ranked.iter().enumerate().map(|(r, (l, _))| (*l, r)).collect();
    labels.iter().map(|l| rank[l]).collect()
}

fn finish(net: &CorrelationNetwork, labels: Vec<usize>, seed: Option<u64>) -> Result<Partition> {
    let modularity = modularity_of(net, &labels)?;
    let s = net.settings();
    Ok(Partition {
        nodes: net.nodes().to_vec(),
        labels,
        modularity,
        fingerprint: SettingsFingerprint {
            rho: s.rho,
            alpha: s.alpha,
            measure: s.measure,
            seed,
        },
    })
}

/// Exhaustive search over all set partitions of at most
/// [`BRUTE_FORCE_MAX_NODES`] nodes. Among equal optima the
/// lexicographically smallest restricted-growth label vector wins.
pub fn brute_force_best(net: &CorrelationNetwork) -> Result<Partition> {
    let n = net.node_count();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(Error::Size {
            nodes: n,
            max: BRUTE_FORCE_MAX_NODES,
        });
    }
    if net.edge_count() == 0 {
        return Err(Error::InsufficientStructure("network has no edges".into()));
    }
    check_positive_weights(net)?;
    let m = net.total_weight();
    let two_m = 2.0 * m;
    let strengths = net.strengths();
    let edges = net.edges();

    // restricted growth strings in lexicographic order
    let mut rgs = vec![0usize; n];
    let mut best = rgs.clone();
    let mut best_q = f64::NEG_INFINITY;
    let mut inside = vec![0.0; n];
    let mut total = vec![0.0; n];
    loop {
        let k = rgs.iter().max().map_or(0, |&x| x + 1);
        inside[..k].iter_mut().for_each(|v| *v = 0.0);
        total[..k].iter_mut().for_each(|v| *v = 0.0);
        for (i, &c) in rgs.iter().enumerate() {
            total[c] += strengths[i];
        }
        for e in edges {
            if rgs[e.a] == rgs[e.b] {
                inside[rgs[e.a]] += e.weight;
            }
        }
        let q: f64 = (0..k)
            .map(|c| inside[c] / m - (total[c] / two_m) * (total[c] / two_m))
            .sum();
        if q > best_q + 1e-13 {
            best_q = q;
            best.copy_from_slice(&rgs);
        }
        if !next_rgs(&mut rgs) {
            break;
        }
    }
    finish(net, best, None)
}

/// Advances to the next restricted growth string; false after the last.
fn next_rgs(rgs: &mut [usize]) -> bool {
    let n = rgs.len();
    for i in (1..n).rev() {
        let prefix_max = rgs[..i].iter().copied().max().unwrap_or(0);
        if rgs[i] <= prefix_max {
            rgs[i] += 1;
            rgs[i + 1..].iter_mut().for_each(|v| *v = 0);
            return true;
        }
    }
    false
}

/// Result of [`compare_partitions`].
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionComparison {
    /// Fraction of node pairs classified the same way (together/apart) by
    /// both partitions.
    pub agreement: f64,
    /// For each community of the first partition: its best-overlapping
    /// community in the second and their Jaccard index.
    pub best_jaccard: BTreeMap<usize, (usize, f64)>,
    pub common_nodes: usize,
}

/// Compares two partitions over the regions they share.
pub fn compare_partitions(p: &Partition, q: &Partition) -> Result<PartitionComparison> {
    let q_index: HashMap<&RegionKey, usize> =
        q.nodes.iter().zip(&q.labels).map(|(k, &l)| (k, l)).collect();
    let pairs: Vec<(usize, usize)> = p
        .nodes
        .iter()
        .zip(&p.labels)
        .filter_map(|(k, &lp)| q_index.get(k).map(|&lq| (lp, lq)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Comparison("partitions share no nodes".into()));
    }

    let n = pairs.len();
    let mut same = 0usize;
    let mut total = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            let together_p = pairs[i].0 == pairs[j].0;
            let together_q = pairs[i].1 == pairs[j].1;
            same += usize::from(together_p == together_q);
            total += 1;
        }
    }
    let agreement = if total == 0 { 1.0 } else { same as f64 / total as f64 };

    let mut size_p: BTreeMap<usize, usize> = BTreeMap::new();
    let mut size_q: BTreeMap<usize, usize> = BTreeMap::new();
    let mut overlap: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &(lp, lq) in &pairs {
        *size_p.entry(lp).or_default() += 1;
        *size_q.entry(lq).or_default() += 1;
        *overlap.entry((lp, lq)).or_default() += 1;
    }
    let mut best_jaccard = BTreeMap::new();
    for (&lp, &sp) in &size_p {
        let mut best: Option<(usize, f64)> = None;
        for (&lq, &sq) in &size_q {
            let inter = overlap.get(&(lp, lq)).copied().unwrap_or(0);
            let j = inter as f64 / (sp + sq - inter) as f64;
            if best.is_none_or(|(_, bj)| j > bj) {
                best = Some((lq, j));
            }
        }
        best_jaccard.insert(lp, best.expect("q has at least one community"));
    }
    Ok(PartitionComparison {
        agreement,
        best_jaccard,
        common_nodes: n,
    })
}

/// `region,community` with dense labels.
pub fn write_partition_csv<W: Write>(p: &Partition, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["region", "community"])?;
    for (key, label) in p.nodes.iter().zip(&p.labels) {
        w.write_record([key.display(), label.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
