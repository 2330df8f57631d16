//! End-to-end run through the same entry points as the `epinet` binary:
//! writes a synthetic table, then the pipeline and grid outputs.
//!
//!     cargo run --release --example full_pipeline [-- out_dir]

use std::path::PathBuf;

use epinet::cli::{cmd_grid, cmd_pipeline, RunConfig};
use epinet::ingest::write_cases_csv;
use epinet::synthetic::{planted_cases, PlantedConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("epinet-example"));
    std::fs::create_dir_all(&root)?;
    let input = root.join("cases.csv");
    let fixture = planted_cases(&PlantedConfig::default())?;
    write_cases_csv(&fixture.cases, std::fs::File::create(&input)?)?;

    let base = RunConfig {
        input_path: Some(input),
        start: fixture.cases[0].first_date(),
        end: fixture.cases[0].last_date(),
        ..RunConfig::default()
    };
    let pipeline = RunConfig { output_dir: root.join("pipeline"), ..base.clone() };
    let grid = RunConfig { output_dir: root.join("grid"), ..base };
    for path in cmd_pipeline(&pipeline)?.into_iter().chain(cmd_grid(&grid)?) {
        println!("{}", path.display());
    }
    let summary = std::fs::read_to_string(root.join("pipeline").join("summary.json"))?;
    println!("\n{summary}");
    Ok(())
}
