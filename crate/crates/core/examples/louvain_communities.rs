//! Louvain communities checked against exhaustive search on a small graph,
//! then compared with the planted groups of a synthetic table.
//!
//!     cargo run --example louvain_communities

use epinet::community::{brute_force_best, compare_partitions, louvain, Partition, SettingsFingerprint};
use epinet::ingest::RegionKey;
use epinet::netbuild::{build_network, BuildSettings, CorrelationNetwork, SimilarityMeasure};
use epinet::synthetic::{planted_cases, PlantedConfig};
use epinet::transform::to_exponent_series;

fn main() -> epinet::Result<()> {
    // two triangles joined by one bridge
    let nodes: Vec<RegionKey> = "abcdef".chars().map(|c| RegionKey::new(c.to_string(), None)).collect();
    let edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)].map(|(a, b)| (a, b, 1.0));
    let net = CorrelationNetwork::from_edges(nodes, edges, BuildSettings::default())?;
    let found = louvain(&net, 0, 1.0)?;
    let exact = brute_force_best(&net)?;
    println!("bridged triangles: louvain Q = {:.6}, exhaustive Q = {:.6} (5/14 = {:.6})", found.modularity, exact.modularity, 5.0 / 14.0);
    for c in 0..found.community_count() {
        let names: Vec<String> = found.member_keys(c).iter().map(RegionKey::display).collect();
        println!("  community {c}: {}", names.join(" "));
    }

    let fixture = planted_cases(&PlantedConfig::default())?;
    let exps = fixture
        .cases
        .iter()
        .map(|c| to_exponent_series(c, 7.0))
        .collect::<epinet::Result<Vec<_>>>()?;
    let net = build_network(&exps, 0.0, SimilarityMeasure::Pearson)?;
    let truth = Partition {
        nodes: fixture.cases.iter().map(|c| c.key.clone()).collect(),
        labels: fixture.groups.clone(),
        modularity: 0.0,
        fingerprint: SettingsFingerprint { rho: 0.0, alpha: 7.0, measure: SimilarityMeasure::Pearson, seed: None },
    };
    println!("\nplanted 3 x 10 table:");
    for seed in 0..3 {
        let p = louvain(&net, seed, 1.0)?;
        let cmp = compare_partitions(&truth, &p)?;
        println!("  seed {seed}: Q = {:.4}, sizes {:?}, agreement with planted groups {:.3}", p.modularity, p.sizes(), cmp.agreement);
    }
    Ok(())
}
