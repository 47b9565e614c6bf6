//! I.i.d. offline datasets drawn from `(d_b, P)` and the empirical game they
//! induce.
//!
//! Sampling is reproducible across platforms and thread counts: sample `i`
//! draws from its own ChaCha8 stream (`seed`, stream `i`), first one uniform
//! for the `(s,a,b)` triple and then one for the next state. Both use inverse
//! CDF lookups over row-major cumulative sums, resolving ties toward the lower
//! index.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game_model::{BehaviorDistribution, MarkovGame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub b: usize,
    pub s_next: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    transitions: Vec<Transition>,
    seed: u64,
    dims: (usize, usize, usize),
}

/// Sidecar metadata written next to a dataset CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "S")]
    pub num_states: usize,
    #[serde(rename = "A")]
    pub num_max_actions: usize,
    #[serde(rename = "B")]
    pub num_min_actions: usize,
}

impl Dataset {
    pub fn new(
        transitions: Vec<Transition>,
        seed: u64,
        dims: (usize, usize, usize),
    ) -> Result<Self> {
        if transitions.is_empty() {
            return Err(Error::InvalidConfig(
                "dataset must contain at least one transition".into(),
            ));
        }
        let (ns, na, nb) = dims;
        if let Some((i, t)) = transitions
            .iter()
            .enumerate()
            .find(|(_, t)| t.s >= ns || t.a >= na || t.b >= nb || t.s_next >= ns)
        {
            return Err(Error::DimensionMismatch(format!(
                "transition {i} = {t:?} out of bounds for dims {dims:?}"
            )));
        }
        Ok(Self {
            transitions,
            seed,
            dims,
        })
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            seed: self.seed,
            n: self.len(),
            num_states: self.dims.0,
            num_max_actions: self.dims.1,
            num_min_actions: self.dims.2,
        }
    }

    /// Writes the `s,a,b,s_next` CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for t in &self.transitions {
            w.serialize(t)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, meta: DatasetMeta) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let transitions = r
            .deserialize()
            .collect::<std::result::Result<Vec<Transition>, _>>()?;
        if transitions.len() != meta.n {
            return Err(Error::InvalidConfig(format!(
                "sidecar declares N = {} but CSV holds {} rows",
                meta.n,
                transitions.len()
            )));
        }
        Self::new(
            transitions,
            meta.seed,
            (meta.num_states, meta.num_max_actions, meta.num_min_actions),
        )
    }

    /// Writes `path` (CSV) and `path` + `.json` (sidecar).
    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(File::create(path)?)?;
        let mut side = File::create(sidecar_path(path))?;
        serde_json::to_writer_pretty(&mut side, &self.meta())?;
        side.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let meta: DatasetMeta = serde_json::from_reader(File::open(sidecar_path(path))?)?;
        Self::read_csv(File::open(path)?, meta)
    }
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    name.into()
}

/// Smallest index whose cumulative mass exceeds `u`, skipping zero-mass
/// entries; falls back to the last positive entry when rounding leaves `u`
/// above the final cumulative sum.
fn inverse_cdf(cdf: &[f64], u: f64) -> usize {
    let k = cdf.partition_point(|&c| c <= u);
    if k < cdf.len() {
        return k;
    }
    let total = *cdf.last().expect("non-empty cdf");
    cdf.iter()
        .position(|&c| c >= total)
        .unwrap_or(cdf.len() - 1)
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    p.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// Draws `n` transitions: `(s,a,b) ~ d_b`, then `s' ~ P(.|s,a,b)`.
pub fn sample_dataset(
    game: &MarkovGame,
    d_b: &BehaviorDistribution,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidConfig(
            "sample size N must be at least 1".into(),
        ));
    }
    if d_b.dims() != game.dims() {
        return Err(Error::DimensionMismatch(format!(
            "behavior distribution dims {:?} vs game dims {:?}",
            d_b.dims(),
            game.dims()
        )));
    }
    let (_, na, nb) = game.dims();
    let triple_cdf = cumulative(d_b.probs());
    let row_cdfs: Vec<Vec<f64>> = game
        .transitions()
        .chunks(game.num_states())
        .map(cumulative)
        .collect();

    let transitions = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let k = inverse_cdf(&triple_cdf, rng.gen::<f64>());
            let s_next = inverse_cdf(&row_cdfs[k], rng.gen::<f64>());
            Transition {
                s: k / (na * nb),
                a: (k / nb) % na,
                b: k % nb,
                s_next,
            }
        })
        .collect();
    Dataset::new(transitions, seed, game.dims())
}

/// Empirical game built from visit counts.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalModel {
    dims: (usize, usize, usize),
    gamma: f64,
    total: usize,
    /// `N(s,a,b)`
    counts: Vec<u64>,
    /// `[s][a][b][s']`
    p_hat: Vec<f64>,
    r_hat: Vec<f64>,
}

impl EmpiricalModel {
    /// Assembles a model from raw parts; used when reloading a serialized model.
    pub fn from_parts(
        dims: (usize, usize, usize),
        gamma: f64,
        counts: Vec<u64>,
        p_hat: Vec<f64>,
        r_hat: Vec<f64>,
    ) -> Result<Self> {
        let triples = dims.0 * dims.1 * dims.2;
        if counts.len() != triples || r_hat.len() != triples || p_hat.len() != triples * dims.0 {
            return Err(Error::DimensionMismatch(
                "empirical model tensor sizes".into(),
            ));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidDiscount(gamma));
        }
        let total = counts.iter().sum::<u64>() as usize;
        if total == 0 {
            return Err(Error::InvalidConfig(
                "empirical model has no samples".into(),
            ));
        }
        Ok(Self {
            dims,
            gamma,
            total,
            counts,
            p_hat,
            r_hat,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn horizon(&self) -> f64 {
        1.0 / (1.0 - self.gamma)
    }

    /// Total number of samples `N`.
    pub fn total(&self) -> usize {
        self.total
    }

    #[inline]
    pub fn triple_index(&self, s: usize, a: usize, b: usize) -> usize {
        (s * self.dims.1 + a) * self.dims.2 + b
    }

    #[inline]
    pub fn count(&self, s: usize, a: usize, b: usize) -> u64 {
        self.counts[self.triple_index(s, a, b)]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    #[inline]
    pub fn p_row(&self, s: usize, a: usize, b: usize) -> &[f64] {
        let k = self.triple_index(s, a, b) * self.dims.0;
        &self.p_hat[k..k + self.dims.0]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize, b: usize) -> f64 {
        self.r_hat[self.triple_index(s, a, b)]
    }

    pub fn p_hat(&self) -> &[f64] {
        &self.p_hat
    }

    pub fn r_hat(&self) -> &[f64] {
        &self.r_hat
    }

    /// The empirical game `(S, A, B, P_hat, r_hat, gamma)`.
    pub fn to_game(&self) -> Result<MarkovGame> {
        MarkovGame::new(
            self.dims.0,
            self.dims.1,
            self.dims.2,
            self.gamma,
            self.p_hat.clone(),
            self.r_hat.clone(),
        )
    }
}

/// Counts visits, forms empirical frequencies (uniform `1/S` rows where
/// unvisited) and copies the true reward at visited triples only.
pub fn build_empirical_model(dataset: &Dataset, game: &MarkovGame) -> Result<EmpiricalModel> {
    if dataset.dims() != game.dims() {
        return Err(Error::DimensionMismatch(format!(
            "dataset dims {:?} vs game dims {:?}",
            dataset.dims(),
            game.dims()
        )));
    }
    let (ns, na, nb) = game.dims();
    let triples = ns * na * nb;
    let mut counts = vec![0u64; triples];
    let mut next_counts = vec![0u64; triples * ns];
    for t in dataset.transitions() {
        let k = game.triple_index(t.s, t.a, t.b);
        counts[k] += 1;
        next_counts[k * ns + t.s_next] += 1;
    }

    let mut p_hat = vec![0.0; triples * ns];
    let mut r_hat = vec![0.0; triples];
    for s in 0..ns {
        for a in 0..na {
            for b in 0..nb {
                let k = game.triple_index(s, a, b);
                let row = &mut p_hat[k * ns..(k + 1) * ns];
                if counts[k] == 0 {
                    row.fill(1.0 / ns as f64);
                } else {
                    let n = counts[k] as f64;
                    for (p, &c) in row.iter_mut().zip(&next_counts[k * ns..(k + 1) * ns]) {
                        *p = c as f64 / n;
                    }
                    r_hat[k] = game.reward(s, a, b);
                }
            }
        }
    }
    EmpiricalModel::from_parts(game.dims(), game.gamma(), counts, p_hat, r_hat)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_game() -> MarkovGame {
        // S = 2, A = B = 1; state 0 moves to 1 deterministically.
        MarkovGame::new(2, 1, 1, 0.9, vec![0.0, 1.0, 0.5, 0.5], vec![0.3, 0.8]).unwrap()
    }

    #[test]
    fn deterministic_given_seed() {
        let game = two_state_game();
        let d_b = BehaviorDistribution::uniform(game.dims());
        let x = sample_dataset(&game, &d_b, 500, 17).unwrap();
        let y = sample_dataset(&game, &d_b, 500, 17).unwrap();
        assert_eq!(x, y);
        let (mut bx, mut by) = (Vec::new(), Vec::new());
        x.write_csv(&mut bx).unwrap();
        y.write_csv(&mut by).unwrap();
        assert_eq!(bx, by);
        assert!(String::from_utf8(bx).unwrap().starts_with("s,a,b,s_next\n"));
        assert_ne!(x, sample_dataset(&game, &d_b, 500, 18).unwrap());
    }

    #[test]
    fn point_mass_behavior() {
        let game = two_state_game();
        let d_b = BehaviorDistribution::new(game.dims(), vec![1.0, 0.0]).unwrap();
        let data = sample_dataset(&game, &d_b, 200, 3).unwrap();
        assert!(data.transitions().iter().all(|t| *t
            == Transition {
                s: 0,
                a: 0,
                b: 0,
                s_next: 1
            }));
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        let game = two_state_game();
        let d_b = BehaviorDistribution::uniform(game.dims());
        assert!(sample_dataset(&game, &d_b, 0, 1).is_err());
        let wrong = BehaviorDistribution::uniform((2, 2, 1));
        assert!(sample_dataset(&game, &wrong, 10, 1).is_err());
        assert!(Dataset::new(vec![], 0, (1, 1, 1)).is_err());
        assert!(Dataset::new(
            vec![Transition {
                s: 0,
                a: 0,
                b: 0,
                s_next: 2
            }],
            0,
            (2, 1, 1)
        )
        .is_err());
    }

    #[test]
    fn empirical_frequencies_and_uncovered_rows() {
        let game = MarkovGame::new(
            2,
            1,
            2,
            0.9,
            vec![0.5, 0.5, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0],
            vec![0.4, 0.6, 0.1, 0.2],
        )
        .unwrap();
        let t = |s_next| Transition {
            s: 0,
            a: 0,
            b: 0,
            s_next,
        };
        let data = Dataset::new(vec![t(0), t(0), t(1), t(1)], 0, game.dims()).unwrap();
        let model = build_empirical_model(&data, &game).unwrap();
        assert_eq!(model.p_row(0, 0, 0), &[0.5, 0.5]);
        assert_eq!(model.reward(0, 0, 0), 0.4);
        assert_eq!(model.count(0, 0, 0), 4);
        // Unvisited triples: uniform row, zero reward.
        assert_eq!(model.p_row(1, 0, 1), &[0.5, 0.5]);
        assert_eq!(model.reward(1, 0, 1), 0.0);
        assert_eq!(model.total(), 4);
    }

    #[test]
    fn inverse_cdf_skips_zero_mass() {
        let cdf = cumulative(&[0.0, 0.5, 0.0, 0.5]);
        assert_eq!(inverse_cdf(&cdf, 0.0), 1);
        assert_eq!(inverse_cdf(&cdf, 0.4999), 1);
        assert_eq!(inverse_cdf(&cdf, 0.5), 3);
        assert_eq!(inverse_cdf(&cdf, 0.9999999), 3);
        let short = [0.25, 0.5, 0.5];
        assert_eq!(inverse_cdf(&short, 0.75), 1);
    }

    #[test]
    fn csv_round_trip_through_files() {
        let game = two_state_game();
        let d_b = BehaviorDistribution::uniform(game.dims());
        let data = sample_dataset(&game, &d_b, 50, 99).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        data.save(&path).unwrap();
        assert_eq!(Dataset::load(&path).unwrap(), data);
    }
}
