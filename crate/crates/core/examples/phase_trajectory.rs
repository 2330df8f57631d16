//! Community median curves, their peaks, and the B-spline smoothed
//! three-dimensional trajectory they trace.
//!
//!     cargo run --example phase_trajectory

use epinet::analysis::{bspline_smooth, build_trajectory, detect_peaks, median_curve, BSpline};
use epinet::community::louvain;
use epinet::netbuild::{build_network, SimilarityMeasure};
use epinet::synthetic::{planted_cases, PlantedConfig};
use epinet::transform::to_exponent_series;

fn main() -> epinet::Result<()> {
    // the spline alone: endpoints are interpolated, the interior is pulled
    // toward the control polygon
    let controls = vec![[0.0, 0.0, 0.0], [1.0, 2.0, 0.0], [3.0, 2.0, 1.0], [4.0, 0.0, 1.0], [5.0, 1.0, 2.0]];
    let spline = BSpline::clamped(controls.clone())?;
    println!("degree {} with {} segments; knots {:?}", spline.degree(), spline.segments(), spline.knots());
    for u in [0.0, 0.25, 0.5, 0.75, 1.0] {
        println!("  u = {u:.2} -> {:?}", spline.eval(u));
    }

    let fixture = planted_cases(&PlantedConfig { days: 240, ..PlantedConfig::default() })?;
    let exps = fixture
        .cases
        .iter()
        .map(|c| to_exponent_series(c, 7.0))
        .collect::<epinet::Result<Vec<_>>>()?;
    let net = build_network(&exps, 0.0, SimilarityMeasure::Pearson)?;
    let partition = louvain(&net, 0, 1.0)?;
    let medians = (0..3)
        .map(|c| median_curve(&exps, &partition.member_keys(c)))
        .collect::<epinet::Result<Vec<_>>>()?;
    for (c, curve) in medians.iter().enumerate() {
        let peaks: Vec<String> = detect_peaks(curve).iter().map(|d| d.to_string()).collect();
        println!("community {}: peaks {}", c + 1, peaks.join(", "));
    }

    let trajectory = build_trajectory([&medians[0], &medians[1], &medians[2]])?;
    let smoothed = bspline_smooth(&trajectory.points, 10)?;
    println!(
        "\n{} daily points -> {} smoothed samples; start {:?}, end {:?}",
        trajectory.points.len(),
        smoothed.len(),
        smoothed[0],
        smoothed[smoothed.len() - 1]
    );
    Ok(())
}
