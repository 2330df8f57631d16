//! Correlation networks of regional epidemic activity.
//!
//! Cumulative case counts are turned into clipped daily change exponents
//! (the day-to-day log-ratio of 7-day averaged new cases). Regions whose
//! exponent series correlate above a threshold are joined by weighted
//! edges, and the resulting network is partitioned by Louvain modularity
//! maximization. Around that core sit a robustness grid over
//! threshold/clipping/similarity settings, label alignment across runs,
//! community median curves with peak detection, and a B-spline smoothed
//! three-dimensional trajectory of the three largest communities.
//!
//! ```no_run
//! use epinet::prelude::*;
//!
//! let cases = parse_cases_csv(std::fs::File::open("cases.csv")?)?;
//! let cases = select_regions(&cases, 100_000, epinet::ingest::default_end());
//! let exps: Vec<_> = cases
//!     .iter()
//!     .map(|c| to_exponent_series(c, 7.0))
//!     .collect::<Result<_, _>>()?;
//! let net = build_network(&exps, 0.0, SimilarityMeasure::Pearson)?;
//! let partition = louvain(&net, 0, 1.0)?;
//! println!("Q = {:.4}, sizes {:?}", partition.modularity, partition.sizes());
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod analysis;
pub mod cli;
pub mod community;
pub mod error;
pub mod ingest;
pub mod netbuild;
pub mod numfmt;
pub mod synthetic;
pub mod transform;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::analysis::{
        align_labels, bspline_smooth, build_trajectory, detect_peaks, median_curve, order_rows,
        run_grid, Curve, GridSettings, MembershipMatrix, PhaseTrajectory,
    };
    pub use crate::community::{brute_force_best, compare_partitions, louvain, modularity_of, Partition};
    pub use crate::ingest::{parse_cases_csv, restrict_date_range, select_regions, CaseSeries, RegionKey};
    pub use crate::netbuild::{build_network, cosine, pearson, CorrelationNetwork, SimilarityMeasure};
    pub use crate::transform::{to_exponent_series, ExponentSeries};
    pub use crate::Error;
}
