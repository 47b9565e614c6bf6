use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game_model::{
    duality_gap_parts, solve_nash_exact, BehaviorDistribution, MarkovGame, StateDistribution,
};
use crate::hard_instances::{build_hard_instance, HardInstanceSpec};
use crate::io;
use crate::offline_data::{build_empirical_model, sample_dataset};
use crate::vi_lcb::{vi_lcb_game, PenaltyConfig, DEFAULT_C_B, DEFAULT_DELTA, DEFAULT_NASH_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceSource {
    Hard(HardInstanceSpec),
    Files {
        game: PathBuf,
        rho: PathBuf,
        d_b: PathBuf,
    },
}

/// Penalty constants shared by every cell; `N` comes from the cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    pub c_b: f64,
    pub delta: f64,
}

impl Default for PenaltyParams {
    fn default() -> Self {
        Self {
            c_b: DEFAULT_C_B,
            delta: DEFAULT_DELTA,
        }
    }
}

fn default_planner_tol() -> f64 {
    1e-8
}

fn default_nash_tol() -> f64 {
    DEFAULT_NASH_TOL
}

fn default_output() -> PathBuf {
    PathBuf::from("sweep.csv")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub instance: InstanceSource,
    pub sample_sizes: Vec<usize>,
    pub seeds_per_size: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub penalty: PenaltyParams,
    #[serde(default = "default_planner_tol")]
    pub planner_tol: f64,
    #[serde(default = "default_nash_tol")]
    pub nash_tol: f64,
    #[serde(default = "default_output")]
    pub output_path: PathBuf,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_sizes.is_empty() {
            return Err(Error::InvalidConfig("sample_sizes is empty".into()));
        }
        if self.sample_sizes.windows(2).any(|w| w[0] >= w[1]) || self.sample_sizes[0] == 0 {
            return Err(Error::InvalidConfig(
                "sample_sizes must be positive and strictly increasing".into(),
            ));
        }
        if self.seeds_per_size == 0 {
            return Err(Error::InvalidConfig(
                "seeds_per_size must be at least 1".into(),
            ));
        }
        if !(self.planner_tol > 0.0) {
            return Err(Error::InvalidTolerance(self.planner_tol));
        }
        if !(self.nash_tol > 0.0) {
            return Err(Error::InvalidTolerance(self.nash_tol));
        }
        PenaltyConfig::new(self.penalty.c_b, self.penalty.delta, 1).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    #[serde(rename = "N")]
    pub n: usize,
    pub seed_index: usize,
    pub seed: u64,
    /// `v_star_nu - v_mu_star`
    pub gap: f64,
    pub v_star: f64,
    pub v_mu_star: f64,
    pub v_star_nu: f64,
    #[serde(skip)]
    pub runtime_ms: u64,
}

#[derive(Debug, Clone)]
pub struct ResolvedInstance {
    pub game: MarkovGame,
    pub rho: StateDistribution,
    pub d_b: BehaviorDistribution,
}

impl InstanceSource {
    pub fn resolve(&self) -> Result<ResolvedInstance> {
        match self {
            InstanceSource::Hard(spec) => {
                let inst = build_hard_instance(spec)?;
                Ok(ResolvedInstance {
                    game: inst.game,
                    rho: inst.rho,
                    d_b: inst.d_b,
                })
            }
            InstanceSource::Files { game, rho, d_b } => {
                let game = io::load_game(game)?;
                let rho = io::load_state_distribution(rho)?;
                let d_b = io::load_behavior(d_b, game.dims())?;
                Ok(ResolvedInstance { game, rho, d_b })
            }
        }
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one sweep cell:
/// `splitmix64(splitmix64(splitmix64(master) ^ N) ^ seed_index)`.
pub fn cell_seed(master: u64, n: usize, seed_index: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ n as u64) ^ seed_index as u64)
}

/// Samples, solves and evaluates every `(N, seed)` cell against the true
/// game. Records come back in `(N, seed_index)` order whatever the schedule.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let inst = cfg.instance.resolve()?;
    let nash = solve_nash_exact(&inst.game, cfg.planner_tol)?;
    let v_star = inst.rho.expect(&nash.v_star);

    let cells: Vec<(usize, usize)> = cfg
        .sample_sizes
        .iter()
        .flat_map(|&n| (0..cfg.seeds_per_size).map(move |i| (n, i)))
        .collect();

    let mut records = cells
        .par_iter()
        .map(|&(n, seed_index)| -> Result<SweepRecord> {
            let start = Instant::now();
            let seed = cell_seed(cfg.master_seed, n, seed_index);
            let data = sample_dataset(&inst.game, &inst.d_b, n, seed)?;
            let model = build_empirical_model(&data, &inst.game)?;
            let penalty = PenaltyConfig::new(cfg.penalty.c_b, cfg.penalty.delta, n)?;
            let result = vi_lcb_game(&model, &penalty, cfg.nash_tol)?;
            let parts = duality_gap_parts(
                &inst.game,
                &result.mu_hat,
                &result.nu_hat,
                &inst.rho,
                cfg.planner_tol,
            )?;
            Ok(SweepRecord {
                n,
                seed_index,
                seed,
                gap: parts.gap(),
                v_star,
                v_mu_star: parts.v_mu_star,
                v_star_nu: parts.v_star_nu,
                runtime_ms: start.elapsed().as_millis() as u64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by_key(|r| (r.n, r.seed_index));
    Ok(records)
}

/// Deterministic record CSV (no timing column).
pub fn write_sweep_csv<W: Write>(records: &[SweepRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Wall-clock timings, kept apart from the deterministic record CSV.
pub fn write_timing_csv<W: Write>(records: &[SweepRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["N", "seed_index", "runtime_ms"])?;
    for r in records {
        w.write_record([
            r.n.to_string(),
            r.seed_index.to_string(),
            r.runtime_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
