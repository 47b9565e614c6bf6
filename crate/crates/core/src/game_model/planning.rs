//! Exact planning on a known game: product-policy evaluation, best
//! responses through the induced single-agent MDP, Shapley iteration for the
//! Nash value, occupancy measures and concentrability coefficients.

use nalgebra::{DMatrix, DVector};

use super::types::{
    dot, max_abs_diff, BehaviorDistribution, MarkovGame, OccupancyMeasure, QTensor, Side,
    StateDistribution, StationaryPolicy, ValueVector,
};
use crate::error::{Error, Result};
use crate::matrix_nash::matrix_nash;

/// Largest state count solved by a dense linear system in
/// [`occupancy_measure`]; bigger games use the truncated series.
pub const DENSE_OCCUPANCY_MAX_STATES: usize = 512;

/// Iteration cap shared by all fixed-point loops.
const MAX_SWEEPS: usize = 1_000_000;

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTolerance(tol))
    }
}

/// Successive-iterate threshold guaranteeing an `l_inf` error of `tol` at the
/// fixed point of a `gamma`-contraction.
pub fn stopping_threshold(tol: f64, gamma: f64) -> f64 {
    tol * (1.0 - gamma) / (2.0 * gamma)
}

/// Expected reward and next-state distribution of `(mu, nu)` at every state.
fn product_chain(
    game: &MarkovGame,
    mu: &StationaryPolicy,
    nu: &StationaryPolicy,
) -> (Vec<f64>, Vec<f64>) {
    let (ns, na, nb) = game.dims();
    let mut reward = vec![0.0; ns];
    let mut trans = vec![0.0; ns * ns];
    for s in 0..ns {
        for a in 0..na {
            let pa = mu.prob(s, a);
            if pa == 0.0 {
                continue;
            }
            for b in 0..nb {
                let w = pa * nu.prob(s, b);
                if w == 0.0 {
                    continue;
                }
                reward[s] += w * game.reward(s, a, b);
                for (t, p) in trans[s * ns..(s + 1) * ns]
                    .iter_mut()
                    .zip(game.transition_row(s, a, b))
                {
                    *t += w * p;
                }
            }
        }
    }
    (reward, trans)
}

fn check_pair(game: &MarkovGame, mu: &StationaryPolicy, nu: &StationaryPolicy) -> Result<()> {
    if mu.side() != Side::Max || nu.side() != Side::Min {
        return Err(Error::InvalidPolicy(
            "expected a max-player policy followed by a min-player policy".into(),
        ));
    }
    game.check_policy(mu)?;
    game.check_policy(nu)
}

/// `V^{mu,nu}` by fixed-point iteration of `V = r^{mu,nu} + gamma P^{mu,nu} V`,
/// together with `rho' V`.
pub fn policy_evaluate_product(
    game: &MarkovGame,
    mu: &StationaryPolicy,
    nu: &StationaryPolicy,
    rho: &StateDistribution,
    tol: f64,
) -> Result<(ValueVector, f64)> {
    check_tol(tol)?;
    check_pair(game, mu, nu)?;
    game.check_state_distribution(rho)?;

    let ns = game.num_states();
    let gamma = game.gamma();
    let (reward, trans) = product_chain(game, mu, nu);
    let threshold = stopping_threshold(tol, gamma);
    let mut v = vec![0.0; ns];
    let mut next = vec![0.0; ns];
    for _ in 0..MAX_SWEEPS {
        for s in 0..ns {
            next[s] = reward[s] + gamma * dot(&trans[s * ns..(s + 1) * ns], &v);
        }
        let delta = max_abs_diff(&v, &next);
        std::mem::swap(&mut v, &mut next);
        if delta <= threshold {
            let value = rho.expect(&v);
            return Ok((ValueVector(v), value));
        }
    }
    Err(Error::Numerical(
        "policy evaluation did not converge".into(),
    ))
}

/// Single-agent MDP obtained by freezing one player's policy.
#[derive(Debug, Clone)]
pub struct InducedMdp {
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    /// `[s][action]`
    reward: Vec<f64>,
    /// `[s][action][s']`
    transition: Vec<f64>,
}

impl InducedMdp {
    /// Marginalizes `fixed` out of the game; the free player is its opponent.
    pub fn new(game: &MarkovGame, fixed: &StationaryPolicy) -> Result<Self> {
        game.check_policy(fixed)?;
        let (ns, na, nb) = game.dims();
        let free = match fixed.side() {
            Side::Max => nb,
            Side::Min => na,
        };
        let mut reward = vec![0.0; ns * free];
        let mut transition = vec![0.0; ns * free * ns];
        for s in 0..ns {
            for a in 0..na {
                for b in 0..nb {
                    let (k, w) = match fixed.side() {
                        Side::Max => (b, fixed.prob(s, a)),
                        Side::Min => (a, fixed.prob(s, b)),
                    };
                    if w == 0.0 {
                        continue;
                    }
                    reward[s * free + k] += w * game.reward(s, a, b);
                    let row = &mut transition[(s * free + k) * ns..(s * free + k + 1) * ns];
                    for (t, p) in row.iter_mut().zip(game.transition_row(s, a, b)) {
                        *t += w * p;
                    }
                }
            }
        }
        Ok(Self {
            num_states: ns,
            num_actions: free,
            gamma: game.gamma(),
            reward,
            transition,
        })
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Same dynamics with a different reward table `[s][action]`.
    pub fn with_reward(&self, reward: Vec<f64>) -> Self {
        assert_eq!(reward.len(), self.reward.len());
        Self {
            reward,
            ..self.clone()
        }
    }

    fn q(&self, s: usize, k: usize, v: &[f64]) -> f64 {
        let idx = s * self.num_actions + k;
        let ns = self.num_states;
        self.reward[idx] + self.gamma * dot(&self.transition[idx * ns..(idx + 1) * ns], v)
    }

    /// Optimal values (maximizing or minimizing) to `l_inf` accuracy `tol`,
    /// plus a greedy deterministic policy. Starts from zero.
    pub fn value_iteration(&self, maximize: bool, tol: f64) -> Result<(Vec<f64>, Vec<usize>)> {
        let threshold = stopping_threshold(tol, self.gamma);
        let ns = self.num_states;
        let mut v = vec![0.0; ns];
        let mut next = vec![0.0; ns];
        for _ in 0..MAX_SWEEPS {
            for (s, out) in next.iter_mut().enumerate() {
                let qs = (0..self.num_actions).map(|k| self.q(s, k, &v));
                *out = if maximize {
                    qs.fold(f64::NEG_INFINITY, f64::max)
                } else {
                    qs.fold(f64::INFINITY, f64::min)
                };
            }
            let delta = max_abs_diff(&v, &next);
            std::mem::swap(&mut v, &mut next);
            if delta <= threshold {
                let greedy = (0..ns)
                    .map(|s| self.greedy_action(s, &v, maximize))
                    .collect();
                return Ok((v, greedy));
            }
        }
        Err(Error::Numerical("value iteration did not converge".into()))
    }

    fn greedy_action(&self, s: usize, v: &[f64], maximize: bool) -> usize {
        let mut best = 0;
        let mut best_q = self.q(s, 0, v);
        for k in 1..self.num_actions {
            let q = self.q(s, k, v);
            if (maximize && q > best_q) || (!maximize && q < best_q) {
                best = k;
                best_q = q;
            }
        }
        best
    }
}

/// Best response to `fixed`: for a max-player policy `mu` this returns a
/// deterministic minimizing policy and `V^{mu,*}`; for a min-player policy
/// `nu` it returns a maximizing policy and `V^{*,nu}`.
pub fn best_response(
    game: &MarkovGame,
    fixed: &StationaryPolicy,
    tol: f64,
) -> Result<(StationaryPolicy, ValueVector)> {
    check_tol(tol)?;
    let mdp = InducedMdp::new(game, fixed)?;
    let maximize = fixed.side() == Side::Min;
    let (v, greedy) = mdp.value_iteration(maximize, tol)?;
    let policy =
        StationaryPolicy::deterministic(fixed.side().opponent(), mdp.num_actions(), &greedy)?;
    Ok((policy, ValueVector(v)))
}

/// Both sides of the duality gap of a policy pair at `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityGap {
    /// `V^{mu,*}(rho)`
    pub v_mu_star: f64,
    /// `V^{*,nu}(rho)`
    pub v_star_nu: f64,
}

impl DualityGap {
    pub fn gap(&self) -> f64 {
        self.v_star_nu - self.v_mu_star
    }
}

pub fn duality_gap_parts(
    game: &MarkovGame,
    mu: &StationaryPolicy,
    nu: &StationaryPolicy,
    rho: &StateDistribution,
    tol: f64,
) -> Result<DualityGap> {
    check_pair(game, mu, nu)?;
    game.check_state_distribution(rho)?;
    let (_, v_mu) = best_response(game, mu, tol)?;
    let (_, v_nu) = best_response(game, nu, tol)?;
    Ok(DualityGap {
        v_mu_star: rho.expect(&v_mu),
        v_star_nu: rho.expect(&v_nu),
    })
}

/// `V^{*,nu}(rho) - V^{mu,*}(rho)`.
pub fn duality_gap(
    game: &MarkovGame,
    mu: &StationaryPolicy,
    nu: &StationaryPolicy,
    rho: &StateDistribution,
    tol: f64,
) -> Result<f64> {
    Ok(duality_gap_parts(game, mu, nu, rho, tol)?.gap())
}

#[derive(Debug, Clone)]
pub struct NashSolution {
    pub mu: StationaryPolicy,
    pub nu: StationaryPolicy,
    pub v_star: ValueVector,
    pub q_star: QTensor,
}

/// Shapley value iteration on `Q` with per-state matrix-game values.
///
/// Internally iterates to an accuracy of `tol (1-gamma)/8` on `Q` so that the
/// extracted per-state equilibria also have duality gap below `tol`, while
/// `v_star` is within `tol` of `V*`.
pub fn solve_nash_exact(game: &MarkovGame, tol: f64) -> Result<NashSolution> {
    check_tol(tol)?;
    let (ns, na, nb) = game.dims();
    let gamma = game.gamma();
    let q_tol = tol * (1.0 - gamma) / 8.0;
    let nash_tol = q_tol;
    let threshold = q_tol * (1.0 - gamma) / gamma;

    let mut q = QTensor::filled(game.dims(), 0.0);
    let mut v = vec![0.0; ns];
    for _ in 0..MAX_SWEEPS {
        for (s, vs) in v.iter_mut().enumerate() {
            let cert = matrix_nash(&q.state_matrix(s), nash_tol)?;
            *vs = cert.value;
        }
        let mut next = QTensor::filled(game.dims(), 0.0);
        for s in 0..ns {
            for a in 0..na {
                for b in 0..nb {
                    next.set(s, a, b, game.backup(s, a, b, &v));
                }
            }
        }
        let delta = next.max_abs_diff(&q);
        q = next;
        if delta <= threshold {
            let mut mu_rows = Vec::with_capacity(ns);
            let mut nu_rows = Vec::with_capacity(ns);
            for (s, vs) in v.iter_mut().enumerate() {
                let cert = matrix_nash(&q.state_matrix(s), nash_tol)?;
                *vs = cert.value;
                mu_rows.push(cert.row_strategy);
                nu_rows.push(cert.col_strategy);
            }
            return Ok(NashSolution {
                mu: StationaryPolicy::from_solver_rows(Side::Max, na, mu_rows),
                nu: StationaryPolicy::from_solver_rows(Side::Min, nb, nu_rows),
                v_star: ValueVector(v),
                q_star: q,
            });
        }
    }
    Err(Error::Numerical(
        "Shapley iteration did not converge".into(),
    ))
}

/// Discounted occupancy `d^{mu,nu}(.;rho)` with `d(s,a,b) = d(s) mu(a|s) nu(b|s)`.
///
/// Uses a dense LU solve of `(I - gamma P)' d = (1-gamma) rho` for small
/// games and a truncated series with tail mass `gamma^T / (1-gamma) <= tol`
/// otherwise.
pub fn occupancy_measure(
    game: &MarkovGame,
    mu: &StationaryPolicy,
    nu: &StationaryPolicy,
    rho: &StateDistribution,
    tol: f64,
) -> Result<OccupancyMeasure> {
    check_tol(tol)?;
    check_pair(game, mu, nu)?;
    game.check_state_distribution(rho)?;
    let (ns, na, nb) = game.dims();
    let gamma = game.gamma();
    let (_, trans) = product_chain(game, mu, nu);

    let state = if ns <= DENSE_OCCUPANCY_MAX_STATES {
        let system = DMatrix::from_fn(ns, ns, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id - gamma * trans[j * ns + i]
        });
        let rhs = DVector::from_iterator(ns, rho.probs().iter().map(|p| (1.0 - gamma) * p));
        let solution = system
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular occupancy system".into()))?;
        solution.iter().map(|x| x.max(0.0)).collect::<Vec<_>>()
    } else {
        let mut d = vec![0.0; ns];
        let mut current: Vec<f64> = rho.probs().to_vec();
        let mut weight = 1.0 - gamma;
        let mut tail = 1.0 / (1.0 - gamma);
        while tail > tol {
            let mut next = vec![0.0; ns];
            for (s, &mass) in current.iter().enumerate() {
                d[s] += weight * mass;
                if mass == 0.0 {
                    continue;
                }
                for (n, p) in next.iter_mut().zip(&trans[s * ns..(s + 1) * ns]) {
                    *n += mass * p;
                }
            }
            current = next;
            weight *= gamma;
            tail *= gamma;
        }
        d
    };

    let mut state_action = vec![0.0; ns * na * nb];
    for s in 0..ns {
        for a in 0..na {
            for b in 0..nb {
                state_action[game.triple_index(s, a, b)] = state[s] * mu.prob(s, a) * nu.prob(s, b);
            }
        }
    }
    Ok(OccupancyMeasure {
        dims: (ns, na, nb),
        state_action,
        state,
    })
}

/// Unilateral concentrability `C*` (or its clipped variant) of `d_b` relative
/// to the supplied equilibrium.
///
/// `sup_mu d^{mu,nu*}(s,a,b)` equals `nu*(b|s) (1-gamma) W(rho)` where `W` is
/// the optimal value of the max-player MDP induced by `nu*` with reward
/// `1{(s',a') = (s,a)}`; the min-player side is symmetric. Returns
/// `f64::INFINITY` when a positive numerator meets a zero of `d_b`; `0/0` is 0.
pub fn concentrability(
    game: &MarkovGame,
    rho: &StateDistribution,
    d_b: &BehaviorDistribution,
    mu_star: &StationaryPolicy,
    nu_star: &StationaryPolicy,
    clipped: bool,
    tol: f64,
) -> Result<f64> {
    check_tol(tol)?;
    check_pair(game, mu_star, nu_star)?;
    game.check_state_distribution(rho)?;
    if d_b.dims() != game.dims() {
        return Err(Error::DimensionMismatch(format!(
            "behavior distribution dims {:?} vs game dims {:?}",
            d_b.dims(),
            game.dims()
        )));
    }
    let gap = duality_gap(game, mu_star, nu_star, rho, tol)?;
    if gap > 10.0 * tol {
        return Err(Error::NotNash {
            gap,
            limit: 10.0 * tol,
        });
    }

    let (ns, na, nb) = game.dims();
    let gamma = game.gamma();
    let clip = 1.0 / (ns * (na + nb)) as f64;
    let min_positive = d_b
        .probs()
        .iter()
        .copied()
        .filter(|p| *p > 0.0)
        .fold(1.0, f64::min);
    // Numerator accuracy tol * min d_b keeps each finite ratio within tol.
    let vi_tol = tol * min_positive / (1.0 - gamma);

    let ratio = |numerator: f64, s: usize, a: usize, b: usize| -> f64 {
        let numerator = if clipped {
            numerator.min(clip)
        } else {
            numerator
        };
        let denom = d_b.get(s, a, b);
        if numerator <= 0.0 {
            0.0
        } else if denom == 0.0 {
            f64::INFINITY
        } else {
            numerator / denom
        }
    };

    let mut worst: f64 = 0.0;
    for (fixed, free_actions) in [(nu_star, na), (mu_star, nb)] {
        let mdp = InducedMdp::new(game, fixed)?;
        for s in 0..ns {
            for k in 0..free_actions {
                let mut indicator = vec![0.0; ns * free_actions];
                indicator[s * free_actions + k] = 1.0;
                let (w, _) = mdp.with_reward(indicator).value_iteration(true, vi_tol)?;
                let sup_pair = (1.0 - gamma) * rho.expect(&w);
                let other_actions = if fixed.side() == Side::Min { nb } else { na };
                for j in 0..other_actions {
                    let numerator = fixed.prob(s, j) * sup_pair;
                    let (a, b) = if fixed.side() == Side::Min {
                        (k, j)
                    } else {
                        (j, k)
                    };
                    worst = worst.max(ratio(numerator, s, a, b));
                }
            }
        }
    }
    Ok(worst)
}
