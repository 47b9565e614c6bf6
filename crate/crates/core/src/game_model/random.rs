use rand::Rng;

use super::types::{MarkovGame, Side, StationaryPolicy};

fn random_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    // Normalized exponentials give a uniform draw from the simplex.
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Game with uniform rewards in `[0,1]` and transition rows drawn uniformly
/// from the simplex.
pub fn random_game<R: Rng + ?Sized>(
    rng: &mut R,
    num_states: usize,
    num_max_actions: usize,
    num_min_actions: usize,
    gamma: f64,
) -> MarkovGame {
    let triples = num_states * num_max_actions * num_min_actions;
    let mut transition = Vec::with_capacity(triples * num_states);
    for _ in 0..triples {
        transition.extend(random_simplex(rng, num_states));
    }
    let reward = (0..triples).map(|_| rng.gen::<f64>()).collect();
    MarkovGame::new(
        num_states,
        num_max_actions,
        num_min_actions,
        gamma,
        transition,
        reward,
    )
    .expect("random game is valid by construction")
}

pub fn random_policy<R: Rng + ?Sized>(
    rng: &mut R,
    side: Side,
    num_states: usize,
    num_actions: usize,
) -> StationaryPolicy {
    let probs = (0..num_states)
        .flat_map(|_| random_simplex(rng, num_actions))
        .collect();
    StationaryPolicy::new(side, num_states, num_actions, probs)
        .expect("random policy is valid by construction")
}
