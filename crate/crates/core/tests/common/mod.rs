#![allow(dead_code)]

use mg_lcb::game_model::{
    random_game, BehaviorDistribution, MarkovGame, QTensor, StateDistribution, StationaryPolicy,
};
use mg_lcb::offline_data::{build_empirical_model, sample_dataset, EmpiricalModel};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random game, uniform behavior distribution, and the empirical model of an
/// `n`-sample dataset drawn from it. Small `n` leaves triples unvisited.
pub fn random_model(
    rng: &mut ChaCha8Rng,
    dims: (usize, usize, usize),
    gamma: f64,
    n: usize,
) -> (MarkovGame, EmpiricalModel) {
    let game = random_game(rng, dims.0, dims.1, dims.2, gamma);
    let d_b = BehaviorDistribution::uniform(dims);
    let data = sample_dataset(&game, &d_b, n, rng.gen()).unwrap();
    let model = build_empirical_model(&data, &game).unwrap();
    (game, model)
}

pub fn random_q(rng: &mut ChaCha8Rng, dims: (usize, usize, usize), hi: f64) -> QTensor {
    let n = dims.0 * dims.1 * dims.2;
    QTensor::from_vec(dims, (0..n).map(|_| rng.gen::<f64>() * hi).collect()).unwrap()
}

pub fn random_vector(rng: &mut ChaCha8Rng, len: usize, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen::<f64>() * hi).collect()
}

fn draw(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap()
}

/// Rollout estimate of the discounted occupancy. Each trajectory stops after
/// a geometric number of steps with parameter `1-gamma`, and the triple it
/// stops at is recorded, so every entry is the mean of an indicator.
pub fn rollout_occupancy(
    rng: &mut ChaCha8Rng,
    game: &MarkovGame,
    mu: &StationaryPolicy,
    nu: &StationaryPolicy,
    rho: &StateDistribution,
    trajectories: usize,
) -> Vec<f64> {
    let (_, na, nb) = game.dims();
    let mut hits = vec![0u64; game.num_triples()];
    for _ in 0..trajectories {
        let mut s = draw(rho.probs(), rng.gen());
        loop {
            let a = draw(mu.row(s), rng.gen());
            let b = draw(nu.row(s), rng.gen());
            if rng.gen::<f64>() >= game.gamma() {
                hits[(s * na + a) * nb + b] += 1;
                break;
            }
            s = draw(game.transition_row(s, a, b), rng.gen());
        }
    }
    hits.iter()
        .map(|&h| h as f64 / trajectories as f64)
        .collect()
}
