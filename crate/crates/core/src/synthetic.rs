//! Seeded planted-partition case tables.
//!
//! Each group shares a latent daily growth signal (a sinusoid with a
//! group-specific period); each region adds independent Gaussian noise to
//! it. Daily new cases are `base * exp(cumsum(signal + noise))`, rounded
//! into cumulative integer counts. The planted group of every region is
//! returned alongside the cases and serves as ground truth for recovery
//! tests.

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::ingest::{CaseSeries, RegionKey};

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub groups: usize,
    pub per_group: usize,
    /// Length of the cumulative series in days.
    pub days: usize,
    /// Ratio of latent-signal to noise standard deviation.
    pub snr: f64,
    /// Peak amplitude of the latent daily growth rate.
    pub amplitude: f64,
    pub base_daily: f64,
    pub start: NaiveDate,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            groups: 3,
            per_group: 10,
            days: 420,
            snr: 5.0,
            amplitude: 0.05,
            base_daily: 5000.0,
            start: NaiveDate::from_ymd_opt(2020, 1, 22).expect("valid date"),
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedFixture {
    pub cases: Vec<CaseSeries>,
    /// Planted group of `cases[i]`.
    pub groups: Vec<usize>,
}

impl PlantedFixture {
    pub fn keys_of(&self, group: usize) -> Vec<RegionKey> {
        self.cases
            .iter()
            .zip(&self.groups)
            .filter(|(_, &g)| g == group)
            .map(|(c, _)| c.key.clone())
            .collect()
    }
}

/// Group periods in days, spread so the latent signals are close to
/// orthogonal over a year-plus window.
const PERIODS: [f64; 6] = [47.0, 73.0, 113.0, 31.0, 59.0, 97.0];

pub fn planted_cases(cfg: &PlantedConfig) -> Result<PlantedFixture> {
    if cfg.groups == 0 || cfg.groups > PERIODS.len() {
        return Err(Error::Parameter(format!(
            "groups must be in 1..={}, got {}",
            PERIODS.len(),
            cfg.groups
        )));
    }
    if cfg.per_group == 0 || cfg.days < 10 || !(cfg.snr > 0.0) || !(cfg.amplitude > 0.0) {
        return Err(Error::Parameter("degenerate planted configuration".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // a sinusoid of amplitude A has standard deviation A / sqrt(2)
    let noise_sd = cfg.amplitude / std::f64::consts::SQRT_2 / cfg.snr;
    let noise = Normal::new(0.0, noise_sd).map_err(|e| Error::Parameter(e.to_string()))?;

    let latent: Vec<Vec<f64>> = (0..cfg.groups)
        .map(|g| {
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let period = PERIODS[g];
            (0..cfg.days)
                .map(|t| cfg.amplitude * (std::f64::consts::TAU * t as f64 / period + phase).sin())
                .collect()
        })
        .collect();

    let mut slots: Vec<(usize, usize)> = (0..cfg.groups)
        .flat_map(|g| (0..cfg.per_group).map(move |r| (g, r)))
        .collect();
    slots.shuffle(&mut rng);

    let mut cases = Vec::with_capacity(slots.len());
    let mut groups = Vec::with_capacity(slots.len());
    for (g, r) in slots {
        let mut log_level = 0.0;
        let mut total = 0.0f64;
        let mut cumulative = Vec::with_capacity(cfg.days);
        for t in 0..cfg.days {
            log_level += latent[g][t] + noise.sample(&mut rng);
            total += cfg.base_daily * log_level.exp();
            cumulative.push(total.round() as i64);
        }
        let key = RegionKey::new(format!("Group {}", g + 1), Some(&format!("Region {:02}", r + 1)));
        cases.push(CaseSeries::from_start(key, cfg.start, cumulative)?);
        groups.push(g);
    }
    Ok(PlantedFixture { cases, groups })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let cfg = PlantedConfig::default();
        let a = planted_cases(&cfg).unwrap();
        assert_eq!(a.cases.len(), 30);
        assert_eq!(a.keys_of(1).len(), 10);
        assert!(a.cases.iter().all(|c| c.len() == 420));
        let b = planted_cases(&cfg).unwrap();
        assert_eq!(a.cases, b.cases);
        let other = planted_cases(&PlantedConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.cases, other.cases);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = PlantedConfig { groups: 0, ..PlantedConfig::default() };
        assert!(planted_cases(&cfg).is_err());
    }
}
