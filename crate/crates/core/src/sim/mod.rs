//! Seeded multi-agent simulation of the care ecosystem.
//!
//! Patients live on a rectangular plane and occasionally develop true
//! conditions or raise false sensor alarms. A traditional organization
//! answers every alarm with the nearest idle professional. The
//! community-based organization sends a cheap informal verifier first:
//! false alarms die there, real conditions are scored and escalated to a
//! professional or the hospital only when needed, and idle verifiers
//! patrol, sometimes spotting conditions the sensors missed.

pub mod config;
pub mod metrics;
pub mod rng;
pub mod world;

pub use config::{parse_config, ConfigError, ConfigParseError, Mode, ScenarioConfig};
pub use metrics::{mean_sd, MetricsReport};
pub use rng::SimRng;
pub use world::{
    Activity, Actor, Incident, IncidentState, IncidentTruth, Role, SimEvent, World,
};

use std::fmt;

/// Runs one complete scenario; bit-identical for identical configs.
pub fn run(cfg: &ScenarioConfig) -> Result<MetricsReport, ConfigError> {
    let mut world = World::new(cfg.clone())?;
    for _ in 0..cfg.ticks {
        world.step();
    }
    Ok(world.report())
}

#[derive(Debug, Clone, PartialEq)]
pub enum CompareError {
    Config(ConfigError),
    NotEnoughSeeds { got: usize },
}

impl fmt::Display for CompareError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompareError::Config(e) => e.fmt(f),
            CompareError::NotEnoughSeeds { got } => {
                write!(f, "paired comparison needs at least 2 seeds, got {got}")
            }
        }
    }
}

impl std::error::Error for CompareError {}

/// Both modes run under the same seed: a matched pair.
#[derive(Debug, Clone)]
pub struct ComparisonPair {
    pub seed: u64,
    pub traditional: MetricsReport,
    pub soc: MetricsReport,
}

/// Results of a paired mode comparison across seeds.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub pairs: Vec<ComparisonPair>,
}

impl Comparison {
    pub fn reports(&self, mode: Mode) -> impl Iterator<Item = &MetricsReport> {
        self.pairs.iter().map(move |p| match mode {
            Mode::Traditional => &p.traditional,
            Mode::Soc => &p.soc,
        })
    }

    /// Mean and sample standard deviation of a metric within one mode.
    pub fn mean_sd_of(&self, mode: Mode, metric: impl Fn(&MetricsReport) -> f64) -> (f64, f64) {
        let values: Vec<f64> = self.reports(mode).map(metric).collect();
        mean_sd(&values)
    }

    /// Mean and sample standard deviation of the per-seed differences
    /// `metric(soc) - metric(traditional)`.
    pub fn paired_diff(&self, metric: impl Fn(&MetricsReport) -> f64) -> (f64, f64) {
        let diffs: Vec<f64> = self
            .pairs
            .iter()
            .map(|p| metric(&p.soc) - metric(&p.traditional))
            .collect();
        mean_sd(&diffs)
    }
}

/// Runs both modes for every seed (same seed in both, so the comparison is
/// paired). `base.mode` and `base.seed` are overridden per run.
pub fn compare(base: &ScenarioConfig, seeds: &[u64]) -> Result<Comparison, CompareError> {
    if seeds.len() < 2 {
        return Err(CompareError::NotEnoughSeeds { got: seeds.len() });
    }
    let mut pairs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut cfg = base.clone();
        cfg.seed = seed;
        cfg.mode = Mode::Traditional;
        let traditional = run(&cfg).map_err(CompareError::Config)?;
        cfg.mode = Mode::Soc;
        let soc = run(&cfg).map_err(CompareError::Config)?;
        pairs.push(ComparisonPair { seed, traditional, soc });
    }
    Ok(Comparison { pairs })
}
