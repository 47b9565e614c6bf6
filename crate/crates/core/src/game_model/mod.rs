//! Tabular zero-sum Markov games and exact planning on them.

mod planning;
mod random;
mod types;

pub use planning::{
    best_response, concentrability, duality_gap, duality_gap_parts, occupancy_measure,
    policy_evaluate_product, solve_nash_exact, stopping_threshold, DualityGap, InducedMdp,
    NashSolution, DENSE_OCCUPANCY_MAX_STATES,
};
pub use random::{random_game, random_policy};
pub use types::{
    BehaviorDistribution, MarkovGame, OccupancyMeasure, QTensor, Side, StateDistribution,
    StationaryPolicy, ValueVector, STOCHASTIC_TOL,
};
