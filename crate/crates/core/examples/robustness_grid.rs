//! Robustness grid over threshold, clipping bound and similarity measure,
//! with labels aligned to the main (rho 0, alpha 7, Pearson) run.
//!
//!     cargo run --release --example robustness_grid

use epinet::analysis::{align_labels, order_rows, run_grid_with_jobs, write_membership_csv, GridSettings};
use epinet::synthetic::{planted_cases, PlantedConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixture = planted_cases(&PlantedConfig { per_group: 5, ..PlantedConfig::default() })?;
    let grid = GridSettings::default();
    let cells = run_grid_with_jobs(&fixture.cases, &grid, 0)?;
    for cell in &cells {
        match &cell.outcome {
            Ok(run) => println!(
                "{:<20} nodes {:>3} edges {:>4} communities {} Q {:.4}",
                cell.settings.label(),
                run.node_count,
                run.edge_count,
                run.partition.community_count(),
                run.partition.modularity
            ),
            Err(e) => println!("{:<20} failed: {}", cell.settings.label(), e.message),
        }
    }

    let matrix = order_rows(&align_labels(&cells, &GridSettings::reference())?);
    let mut csv = Vec::new();
    write_membership_csv(&matrix, &mut csv)?;
    println!("\nmembership_matrix.csv:\n{}", String::from_utf8(csv)?);
    Ok(())
}
