//! Lower-bound family of hard Markov games `{MG_theta, rho, d_b}`.
//!
//! State 0 pays reward 1 every step. When the min-player plays `b = 0` there,
//! max-action `a` keeps the game in state 0 with probability `theta_a` and
//! otherwise drops it into the absorbing zero-reward state 1. Every other
//! state/action self-loops. Each `theta_a` is one of two nearby levels
//! `p > q`, so a learner must tell the `p`-actions apart from data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game_model::{
    BehaviorDistribution, MarkovGame, Side, StateDistribution, StationaryPolicy,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    #[serde(rename = "p")]
    P,
    #[serde(rename = "q")]
    Q,
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "p" | "P" => Ok(Level::P),
            "q" | "Q" => Ok(Level::Q),
            other => Err(Error::InvalidConfig(format!(
                "theta entry must be p or q, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardInstanceSpec {
    #[serde(rename = "S")]
    pub num_states: usize,
    #[serde(rename = "A")]
    pub num_max_actions: usize,
    #[serde(rename = "B")]
    pub num_min_actions: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub c_clipped: f64,
    /// One level per max-player action.
    pub theta: Vec<Level>,
}

impl HardInstanceSpec {
    /// Spec with the default split: the first `ceil(A/2)` actions get `p`.
    pub fn with_default_theta(
        num_states: usize,
        num_max_actions: usize,
        num_min_actions: usize,
        gamma: f64,
        epsilon: f64,
        c_clipped: f64,
    ) -> Self {
        Self {
            num_states,
            num_max_actions,
            num_min_actions,
            gamma,
            epsilon,
            c_clipped,
            theta: default_theta(num_max_actions),
        }
    }

    fn shift(&self) -> f64 {
        14.0 * (1.0 - self.gamma).powi(2) * self.epsilon / self.gamma
    }

    /// `gamma + 14 (1-gamma)^2 eps / gamma`
    pub fn p(&self) -> f64 {
        self.gamma + self.shift()
    }

    /// `gamma - 14 (1-gamma)^2 eps / gamma`
    pub fn q(&self) -> f64 {
        self.gamma - self.shift()
    }

    pub fn theta_value(&self, a: usize) -> f64 {
        match self.theta[a] {
            Level::P => self.p(),
            Level::Q => self.q(),
        }
    }

    pub fn p_actions(&self) -> Vec<usize> {
        (0..self.num_max_actions)
            .filter(|&a| self.theta[a] == Level::P)
            .collect()
    }

    /// Smallest admissible clipped concentrability `2AB / (S(A+B))`.
    pub fn min_c_clipped(&self) -> f64 {
        let (s, a, b) = (
            self.num_states as f64,
            self.num_max_actions as f64,
            self.num_min_actions as f64,
        );
        2.0 * a * b / (s * (a + b))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_states < 2 || self.num_max_actions < 2 || self.num_min_actions < 2 {
            return fail(format!(
                "need S, A, B >= 2, got S={} A={} B={}",
                self.num_states, self.num_max_actions, self.num_min_actions
            ));
        }
        if !(self.gamma >= 2.0 / 3.0 && self.gamma < 1.0) {
            return fail(format!("gamma must lie in [2/3, 1), got {}", self.gamma));
        }
        let eps_max = 1.0 / (42.0 * (1.0 - self.gamma));
        if !(self.epsilon > 0.0 && self.epsilon <= eps_max * (1.0 + 1e-12)) {
            return fail(format!(
                "epsilon must lie in (0, 1/(42(1-gamma))] = (0, {eps_max}], got {}",
                self.epsilon
            ));
        }
        let c_min = self.min_c_clipped();
        if !(self.c_clipped >= c_min * (1.0 - 1e-12)) {
            return fail(format!(
                "c_clipped must be at least 2AB/(S(A+B)) = {c_min}, got {}",
                self.c_clipped
            ));
        }
        if self.theta.len() != self.num_max_actions {
            return fail(format!(
                "theta has {} entries, expected A = {}",
                self.theta.len(),
                self.num_max_actions
            ));
        }
        if self.p_actions().is_empty() {
            return fail("theta must contain at least one p entry".into());
        }
        let (p, q) = (self.p(), self.q());
        if !(0.5 <= q && q < p && p <= 1.0) {
            return fail(format!("levels violate 1/2 <= q < p <= 1: p={p}, q={q}"));
        }
        Ok(())
    }
}

pub fn default_theta(num_max_actions: usize) -> Vec<Level> {
    let high = num_max_actions.div_ceil(2);
    (0..num_max_actions)
        .map(|a| if a < high { Level::P } else { Level::Q })
        .collect()
}

#[derive(Debug, Clone)]
pub struct HardInstance {
    pub game: MarkovGame,
    pub rho: StateDistribution,
    pub d_b: BehaviorDistribution,
}

/// Builds `MG_theta`, `rho = 1{s=0}` and the behavior distribution that
/// samples every action pair uniformly within states 0 and 1.
pub fn build_hard_instance(spec: &HardInstanceSpec) -> Result<HardInstance> {
    spec.validate()?;
    let (ns, na, nb) = (spec.num_states, spec.num_max_actions, spec.num_min_actions);
    let triples = ns * na * nb;
    let mut transition = vec![0.0; triples * ns];
    let mut reward = vec![0.0; triples];
    for s in 0..ns {
        for a in 0..na {
            for b in 0..nb {
                let k = (s * na + a) * nb + b;
                let row = &mut transition[k * ns..(k + 1) * ns];
                if s == 0 && b == 0 {
                    let theta = spec.theta_value(a);
                    row[0] = theta;
                    row[1] = 1.0 - theta;
                } else {
                    row[s] = 1.0;
                }
                reward[k] = if s == 0 { 1.0 } else { 0.0 };
            }
        }
    }
    let game = MarkovGame::new(ns, na, nb, spec.gamma, transition, reward)?;

    let ab = (na * nb) as f64;
    let at_zero = 1.0 / (spec.c_clipped * (ns * (na + nb)) as f64);
    let at_one = (1.0 - ab * at_zero) / ab;
    let mut probs = vec![0.0; triples];
    for (k, p) in probs.iter_mut().enumerate() {
        *p = match k / (na * nb) {
            0 => at_zero,
            1 => at_one,
            _ => 0.0,
        };
    }
    let d_b = BehaviorDistribution::new((ns, na, nb), probs)?;
    Ok(HardInstance {
        game,
        rho: StateDistribution::point_mass(ns, 0),
        d_b,
    })
}

/// Closed-form `V^{mu,nu}(0)` in terms of the mass `mu_p` the max-player puts
/// on `p`-actions at state 0 and the probability `nu_0` of `b = 0` there.
/// Every other state has value 0.
pub fn hard_instance_value(spec: &HardInstanceSpec, mu_p: f64, nu_0: f64) -> f64 {
    let (g, p, q) = (spec.gamma, spec.p(), spec.q());
    1.0 / (1.0 - g + g * mu_p * nu_0 * (1.0 - p) + g * (1.0 - mu_p) * nu_0 * (1.0 - q))
}

/// `V*(0) = 1/(1 - gamma p)`.
pub fn hard_instance_nash_value(spec: &HardInstanceSpec) -> f64 {
    1.0 / (1.0 - spec.gamma * spec.p())
}

/// `V^{mu,*}(0)` for a max-player putting mass `mu_p` on `p`-actions; the
/// min-player's best response always plays `b = 0`.
pub fn hard_instance_max_side_value(spec: &HardInstanceSpec, mu_p: f64) -> f64 {
    hard_instance_value(spec, mu_p, 1.0)
}

/// The equilibrium: uniform over `p`-actions, and `b = 0`, in every state.
pub fn hard_instance_nash(spec: &HardInstanceSpec) -> Result<(StationaryPolicy, StationaryPolicy)> {
    if spec.theta.len() != spec.num_max_actions {
        return Err(Error::InvalidConfig("theta length differs from A".into()));
    }
    let high = spec.p_actions();
    if high.is_empty() {
        return Err(Error::InvalidConfig("theta has no p entry".into()));
    }
    let (ns, na, nb) = (spec.num_states, spec.num_max_actions, spec.num_min_actions);
    let mut row = vec![0.0; na];
    for &a in &high {
        row[a] = 1.0 / high.len() as f64;
    }
    let mu = StationaryPolicy::new(Side::Max, ns, na, row.repeat(ns))?;
    let nu = StationaryPolicy::deterministic(Side::Min, nb, &vec![0; ns])?;
    Ok((mu, nu))
}
