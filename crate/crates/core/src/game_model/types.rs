use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix_nash::PayoffMatrix;

/// Absolute tolerance for "sums to one" checks.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Finite two-player zero-sum discounted Markov game.
///
/// Tensors are stored flat in row-major order: rewards as `[s][a][b]` and
/// transitions as `[s][a][b][s']`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovGame {
    num_states: usize,
    num_max_actions: usize,
    num_min_actions: usize,
    gamma: f64,
    transition: Vec<f64>,
    reward: Vec<f64>,
}

impl MarkovGame {
    /// Builds a game and validates every invariant.
    pub fn new(
        num_states: usize,
        num_max_actions: usize,
        num_min_actions: usize,
        gamma: f64,
        transition: Vec<f64>,
        reward: Vec<f64>,
    ) -> Result<Self> {
        let game = Self::new_unchecked(
            num_states,
            num_max_actions,
            num_min_actions,
            gamma,
            transition,
            reward,
        )?;
        game.validate()?;
        Ok(game)
    }

    /// Builds a game checking only tensor shapes.
    pub fn new_unchecked(
        num_states: usize,
        num_max_actions: usize,
        num_min_actions: usize,
        gamma: f64,
        transition: Vec<f64>,
        reward: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 || num_max_actions == 0 || num_min_actions == 0 {
            return Err(Error::DimensionMismatch(
                "S, A and B must all be positive".into(),
            ));
        }
        let triples = num_states * num_max_actions * num_min_actions;
        if reward.len() != triples {
            return Err(Error::DimensionMismatch(format!(
                "reward has {} entries, expected {triples}",
                reward.len()
            )));
        }
        if transition.len() != triples * num_states {
            return Err(Error::DimensionMismatch(format!(
                "transition has {} entries, expected {}",
                transition.len(),
                triples * num_states
            )));
        }
        Ok(Self {
            num_states,
            num_max_actions,
            num_min_actions,
            gamma,
            transition,
            reward,
        })
    }

    /// Checks stochasticity of every transition row, the reward range and the
    /// discount, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidDiscount(self.gamma));
        }
        for s in 0..self.num_states {
            for a in 0..self.num_max_actions {
                for b in 0..self.num_min_actions {
                    let row = self.transition_row(s, a, b);
                    if let Some(next) = row.iter().position(|p| !(*p >= 0.0)) {
                        return Err(Error::NegativeProbability {
                            s,
                            a,
                            b,
                            next,
                            value: row[next],
                        });
                    }
                    let sum: f64 = row.iter().sum();
                    if !((sum - 1.0).abs() <= STOCHASTIC_TOL) {
                        return Err(Error::RowNotStochastic { s, a, b, sum });
                    }
                    let r = self.reward(s, a, b);
                    if !(0.0..=1.0).contains(&r) {
                        return Err(Error::RewardOutOfRange { s, a, b, value: r });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_max_actions(&self) -> usize {
        self.num_max_actions
    }

    pub fn num_min_actions(&self) -> usize {
        self.num_min_actions
    }

    pub fn num_triples(&self) -> usize {
        self.num_states * self.num_max_actions * self.num_min_actions
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.num_states, self.num_max_actions, self.num_min_actions)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Effective horizon `1/(1-gamma)`, also the largest attainable value.
    pub fn horizon(&self) -> f64 {
        1.0 / (1.0 - self.gamma)
    }

    #[inline]
    pub fn triple_index(&self, s: usize, a: usize, b: usize) -> usize {
        (s * self.num_max_actions + a) * self.num_min_actions + b
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize, b: usize) -> f64 {
        self.reward[self.triple_index(s, a, b)]
    }

    #[inline]
    pub fn transition_row(&self, s: usize, a: usize, b: usize) -> &[f64] {
        let start = self.triple_index(s, a, b) * self.num_states;
        &self.transition[start..start + self.num_states]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transition
    }

    /// `r + gamma * P_{s,a,b} V` for one triple.
    #[inline]
    pub fn backup(&self, s: usize, a: usize, b: usize, v: &[f64]) -> f64 {
        self.reward(s, a, b) + self.gamma * dot(self.transition_row(s, a, b), v)
    }

    pub(crate) fn check_policy(&self, policy: &StationaryPolicy) -> Result<()> {
        let expected = match policy.side() {
            Side::Max => self.num_max_actions,
            Side::Min => self.num_min_actions,
        };
        if policy.num_states() != self.num_states || policy.num_actions() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{:?}-player policy is {}x{}, game expects {}x{}",
                policy.side(),
                policy.num_states(),
                policy.num_actions(),
                self.num_states,
                expected
            )));
        }
        Ok(())
    }

    pub(crate) fn check_state_distribution(&self, rho: &StateDistribution) -> Result<()> {
        if rho.len() != self.num_states {
            return Err(Error::DimensionMismatch(format!(
                "state distribution has {} entries, game has {} states",
                rho.len(),
                self.num_states
            )));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn check_probability_vector(p: &[f64], what: &str) -> Result<()> {
    if let Some(k) = p.iter().position(|x| !(*x >= 0.0)) {
        return Err(Error::InvalidDistribution(format!(
            "{what} has negative or NaN entry {} at index {k}",
            p[k]
        )));
    }
    let sum: f64 = p.iter().sum();
    if !((sum - 1.0).abs() <= STOCHASTIC_TOL) {
        return Err(Error::InvalidDistribution(format!("{what} sums to {sum}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "max")]
    Max,
    #[serde(rename = "min")]
    Min,
}

impl Side {
    pub fn opponent(self) -> Side {
        match self {
            Side::Max => Side::Min,
            Side::Min => Side::Max,
        }
    }
}

/// Per-state distribution over one player's actions.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryPolicy {
    side: Side,
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl StationaryPolicy {
    pub fn new(side: Side, num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || probs.len() != num_states * num_actions {
            return Err(Error::DimensionMismatch(format!(
                "policy with {} entries cannot be {num_states}x{num_actions}",
                probs.len()
            )));
        }
        for (s, row) in probs.chunks(num_actions).enumerate() {
            check_probability_vector(row, &format!("policy row {s}"))
                .map_err(|e| Error::InvalidPolicy(e.to_string()))?;
        }
        Ok(Self {
            side,
            num_states,
            num_actions,
            probs,
        })
    }

    pub fn from_rows(side: Side, rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("ragged policy".into()));
        }
        Self::new(
            side,
            rows.len(),
            n,
            rows.iter().flatten().copied().collect(),
        )
    }

    pub fn uniform(side: Side, num_states: usize, num_actions: usize) -> Self {
        let u = 1.0 / num_actions as f64;
        Self {
            side,
            num_states,
            num_actions,
            probs: vec![u; num_states * num_actions],
        }
    }

    /// Deterministic policy playing `actions[s]` in state `s`.
    pub fn deterministic(side: Side, num_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(Error::InvalidPolicy(format!(
                    "action {a} out of range in state {s}"
                )));
            }
            probs[s * num_actions + a] = 1.0;
        }
        Self::new(side, actions.len(), num_actions, probs)
    }

    /// Policy defined by per-state rows computed elsewhere; rows are
    /// clamped to be nonnegative and renormalized.
    pub(crate) fn from_solver_rows(side: Side, num_actions: usize, rows: Vec<Vec<f64>>) -> Self {
        let num_states = rows.len();
        let mut probs = Vec::with_capacity(num_states * num_actions);
        for row in rows {
            let total: f64 = row.iter().map(|p| p.max(0.0)).sum();
            probs.extend(row.iter().map(|p| p.max(0.0) / total));
        }
        Self {
            side,
            num_states,
            num_actions,
            probs,
        }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn prob(&self, s: usize, action: usize) -> f64 {
        self.probs[s * self.num_actions + action]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.probs
            .chunks(self.num_actions)
            .map(<[f64]>::to_vec)
            .collect()
    }

    pub fn is_deterministic(&self) -> bool {
        self.probs.iter().all(|&p| p == 0.0 || p == 1.0)
    }
}

/// Distribution over states, e.g. the initial distribution `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDistribution(Vec<f64>);

impl StateDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution(
                "empty state distribution".into(),
            ));
        }
        check_probability_vector(&probs, "state distribution")?;
        Ok(Self(probs))
    }

    pub fn point_mass(num_states: usize, state: usize) -> Self {
        let mut p = vec![0.0; num_states];
        p[state] = 1.0;
        Self(p)
    }

    pub fn uniform(num_states: usize) -> Self {
        Self(vec![1.0 / num_states as f64; num_states])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `rho' v`.
    pub fn expect(&self, v: &[f64]) -> f64 {
        dot(&self.0, v)
    }
}

/// Sampling distribution `d_b` over `(s,a,b)` triples, flat `[s][a][b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorDistribution {
    dims: (usize, usize, usize),
    probs: Vec<f64>,
}

impl BehaviorDistribution {
    pub fn new(dims: (usize, usize, usize), probs: Vec<f64>) -> Result<Self> {
        let (s, a, b) = dims;
        if s * a * b == 0 || probs.len() != s * a * b {
            return Err(Error::DimensionMismatch(format!(
                "behavior distribution has {} entries, expected {}",
                probs.len(),
                s * a * b
            )));
        }
        check_probability_vector(&probs, "behavior distribution")?;
        Ok(Self { dims, probs })
    }

    pub fn uniform(dims: (usize, usize, usize)) -> Self {
        let n = dims.0 * dims.1 * dims.2;
        Self {
            dims,
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, s: usize, a: usize, b: usize) -> f64 {
        self.probs[(s * self.dims.1 + a) * self.dims.2 + b]
    }
}

/// Discounted state and state-action occupancy of a product policy.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMeasure {
    pub dims: (usize, usize, usize),
    /// `d(s,a,b)`, flat `[s][a][b]`.
    pub state_action: Vec<f64>,
    /// `d(s)`.
    pub state: Vec<f64>,
}

impl OccupancyMeasure {
    pub fn get(&self, s: usize, a: usize, b: usize) -> f64 {
        self.state_action[(s * self.dims.1 + a) * self.dims.2 + b]
    }
}

/// Real vector indexed by state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueVector(pub Vec<f64>);

impl ValueVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn max_abs_diff(&self, other: &ValueVector) -> f64 {
        max_abs_diff(&self.0, &other.0)
    }
}

impl Deref for ValueVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ValueVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

pub(crate) fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Tensor of Q-values indexed `[s][a][b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTensor {
    dims: (usize, usize, usize),
    values: Vec<f64>,
}

impl QTensor {
    pub fn filled(dims: (usize, usize, usize), value: f64) -> Self {
        Self {
            dims,
            values: vec![value; dims.0 * dims.1 * dims.2],
        }
    }

    pub fn from_vec(dims: (usize, usize, usize), values: Vec<f64>) -> Result<Self> {
        if values.len() != dims.0 * dims.1 * dims.2 {
            return Err(Error::DimensionMismatch(format!(
                "Q tensor has {} entries, expected {}",
                values.len(),
                dims.0 * dims.1 * dims.2
            )));
        }
        Ok(Self { dims, values })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize, b: usize) -> f64 {
        self.values[(s * self.dims.1 + a) * self.dims.2 + b]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, b: usize, v: f64) {
        self.values[(s * self.dims.1 + a) * self.dims.2 + b] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// The `A x B` matrix game at state `s`.
    pub fn state_matrix(&self, s: usize) -> PayoffMatrix {
        let ab = self.dims.1 * self.dims.2;
        PayoffMatrix::new(
            self.dims.1,
            self.dims.2,
            self.values[s * ab..(s + 1) * ab].to_vec(),
        )
        .expect("Q tensor slices are well-formed")
    }

    pub fn max_abs_diff(&self, other: &QTensor) -> f64 {
        max_abs_diff(&self.values, &other.values)
    }

    /// Nested `[s][a][b]` representation for serialization.
    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        let (s, a, b) = self.dims;
        (0..s)
            .map(|si| {
                (0..a)
                    .map(|ai| (0..b).map(|bi| self.get(si, ai, bi)).collect())
                    .collect()
            })
            .collect()
    }
}
