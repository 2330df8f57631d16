//! Correlation network over exponent series, exported as GraphML and an
//! edge list. Raising the threshold thins the network.
//!
//!     cargo run --example correlation_network

use epinet::netbuild::{build_network, write_edge_list_csv, write_graphml, SimilarityMeasure};
use epinet::synthetic::{planted_cases, PlantedConfig};
use epinet::transform::to_exponent_series;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixture = planted_cases(&PlantedConfig { per_group: 4, ..PlantedConfig::default() })?;
    let exps = fixture
        .cases
        .iter()
        .map(|c| to_exponent_series(c, 7.0))
        .collect::<epinet::Result<Vec<_>>>()?;

    println!("{:>6} {:>8} {:>6} {:>6} {:>8}", "rho", "measure", "nodes", "edges", "dropped");
    for measure in [SimilarityMeasure::Pearson, SimilarityMeasure::Cosine] {
        for rho in [0.0, 0.05, 0.1, 0.5, 0.9] {
            let net = build_network(&exps, rho, measure)?;
            println!(
                "{rho:>6} {measure:>8} {:>6} {:>6} {:>8}",
                net.node_count(),
                net.edge_count(),
                net.dropped().len()
            );
        }
    }

    let net = build_network(&exps, 0.5, SimilarityMeasure::Pearson)?;
    let mut edges = Vec::new();
    write_edge_list_csv(&net, &mut edges)?;
    println!("\nedges.csv (rho 0.5, first lines):");
    for line in String::from_utf8(edges)?.lines().take(6) {
        println!("  {line}");
    }
    let mut graphml = Vec::new();
    write_graphml(&net, &mut graphml)?;
    println!("network.graphml: {} bytes", graphml.len());
    Ok(())
}
