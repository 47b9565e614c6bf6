//! Pessimistic value iteration with Bernstein-style lower/upper confidence
//! penalties for offline zero-sum Markov games.
//!
//! Two decoupled recursions run side by side. The max-player's lower
//! recursion starts from `Q = 0` and subtracts the penalty; the min-player's
//! upper recursion starts from `Q = 1/(1-gamma)` and adds it. After `T`
//! rounds the max-player policy comes from the lower iterate and the
//! min-player policy from the upper one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game_model::{QTensor, Side, StationaryPolicy, ValueVector};
use crate::matrix_nash::{matrix_nash, NashCertificate};
use crate::offline_data::EmpiricalModel;

pub const DEFAULT_C_B: f64 = 4.0;
pub const DEFAULT_DELTA: f64 = 0.1;
pub const DEFAULT_NASH_TOL: f64 = 1e-8;

/// Constants of the penalty `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub c_b: f64,
    pub delta: f64,
    /// Dataset size `N`.
    pub n: usize,
}

impl PenaltyConfig {
    pub fn new(c_b: f64, delta: f64, n: usize) -> Result<Self> {
        let cfg = Self { c_b, delta, n };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_b > 0.0 && self.c_b.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "C_b must be positive, got {}",
                self.c_b
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidConfig("N must be positive".into()));
        }
        Ok(())
    }

    /// `log(N / ((1-gamma) delta))`.
    pub fn log_factor(&self, gamma: f64) -> f64 {
        (self.n as f64 / ((1.0 - gamma) * self.delta)).ln()
    }
}

/// Which pessimistic recursion an operator belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    /// Max-player: penalty subtracted, clipped below at 0.
    Lower,
    /// Min-player: penalty added, clipped above at `1/(1-gamma)`.
    Upper,
}

/// `ceil(log(N/(1-gamma)) / log(1/gamma))`.
pub fn iteration_count(n: usize, gamma: f64) -> usize {
    ((n as f64 / (1.0 - gamma)).ln() / (1.0 / gamma).ln()).ceil() as usize
}

/// `max(0, p.V^2 - (p.V)^2)`.
pub fn empirical_variance(p_row: &[f64], v: &[f64]) -> f64 {
    let (mean, second) = p_row
        .iter()
        .zip(v)
        .fold((0.0, 0.0), |(m, q), (p, x)| (m + p * x, q + p * x * x));
    (second - mean * mean).max(0.0)
}

/// Bernstein penalty `beta(s,a,b;V)`. An unvisited triple makes the inner
/// term infinite, so it evaluates to `1/(1-gamma) + 4/N`.
pub fn penalty_beta(
    model: &EmpiricalModel,
    (s, a, b): (usize, usize, usize),
    v: &[f64],
    cfg: &PenaltyConfig,
) -> f64 {
    let gamma = model.gamma();
    let horizon = model.horizon();
    let count = model.count(s, a, b);
    let floor = 4.0 / cfg.n as f64;
    if count == 0 {
        return horizon + floor;
    }
    let scaled = cfg.c_b * cfg.log_factor(gamma) / count as f64;
    let variance_term = (scaled * empirical_variance(model.p_row(s, a, b), v)).sqrt();
    let count_term = 2.0 * scaled / (1.0 - gamma);
    variance_term.max(count_term).min(horizon) + floor
}

/// Per-state matrix-game values of `Q`, evaluated as `w' Q(s) z` under the
/// certified strategies, together with the certificates.
pub fn value_of_q(q: &QTensor, nash_tol: f64) -> Result<(ValueVector, Vec<NashCertificate>)> {
    let ns = q.dims().0;
    let mut values = Vec::with_capacity(ns);
    let mut certs = Vec::with_capacity(ns);
    for s in 0..ns {
        let m = q.state_matrix(s);
        let cert = matrix_nash(&m, nash_tol)?;
        values.push(m.expected(&cert.row_strategy, &cert.col_strategy));
        certs.push(cert);
    }
    Ok((ValueVector(values), certs))
}

/// Applies one penalized backup given the value vector of the previous
/// iterate. `beta` supplies the penalty per triple.
pub fn penalized_backup<F>(bound: Bound, model: &EmpiricalModel, v: &[f64], beta: F) -> QTensor
where
    F: Fn((usize, usize, usize), &[f64]) -> f64,
{
    let (ns, na, nb) = model.dims();
    let gamma = model.gamma();
    let horizon = model.horizon();
    let mut out = QTensor::filled(model.dims(), 0.0);
    for s in 0..ns {
        for a in 0..na {
            for b in 0..nb {
                let mean: f64 = model.p_row(s, a, b).iter().zip(v).map(|(p, x)| p * x).sum();
                let base = model.reward(s, a, b) + gamma * mean;
                let penalty = beta((s, a, b), v);
                let raw = match bound {
                    Bound::Lower => base - penalty,
                    Bound::Upper => base + penalty,
                };
                out.set(s, a, b, raw.clamp(0.0, horizon));
            }
        }
    }
    out
}

/// Pessimistic Bellman operator for either recursion.
pub fn pessimistic_operator(
    bound: Bound,
    model: &EmpiricalModel,
    q: &QTensor,
    cfg: &PenaltyConfig,
    nash_tol: f64,
) -> Result<QTensor> {
    if q.dims() != model.dims() {
        return Err(Error::DimensionMismatch(format!(
            "Q dims {:?} vs model dims {:?}",
            q.dims(),
            model.dims()
        )));
    }
    let (v, _) = value_of_q(q, nash_tol)?;
    Ok(penalized_backup(bound, model, &v, |t, v| {
        penalty_beta(model, t, v, cfg)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationResidual {
    /// `||Q^-_t - Q^-_{t-1}||_inf`
    pub lower: f64,
    /// `||Q^+_t - Q^+_{t-1}||_inf`
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub q_minus: QTensor,
    pub q_plus: QTensor,
    pub v_minus: ValueVector,
    pub v_plus: ValueVector,
    /// Max-player policy from the lower recursion.
    pub mu_hat: StationaryPolicy,
    /// Min-player policy from the upper recursion.
    pub nu_hat: StationaryPolicy,
    pub iterations: usize,
    pub residuals: Vec<IterationResidual>,
}

fn policies_from(
    certs: Vec<NashCertificate>,
    na: usize,
    nb: usize,
) -> (StationaryPolicy, StationaryPolicy) {
    let (rows, cols): (Vec<_>, Vec<_>) = certs
        .into_iter()
        .map(|c| (c.row_strategy, c.col_strategy))
        .unzip();
    (
        StationaryPolicy::from_solver_rows(Side::Max, na, rows),
        StationaryPolicy::from_solver_rows(Side::Min, nb, cols),
    )
}

/// Runs VI-LCB-Game for `T = ceil(log(N/(1-gamma))/log(1/gamma))` rounds.
pub fn vi_lcb_game(
    model: &EmpiricalModel,
    cfg: &PenaltyConfig,
    nash_tol: f64,
) -> Result<SolveResult> {
    cfg.validate()?;
    if cfg.n != model.total() {
        return Err(Error::InvalidConfig(format!(
            "penalty configured for N = {} but the model holds {} samples",
            cfg.n,
            model.total()
        )));
    }
    let (_, na, nb) = model.dims();
    let iterations = iteration_count(cfg.n, model.gamma());

    let mut q_minus = QTensor::filled(model.dims(), 0.0);
    let mut q_plus = QTensor::filled(model.dims(), model.horizon());
    let mut residuals = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let next_minus = pessimistic_operator(Bound::Lower, model, &q_minus, cfg, nash_tol)?;
        let next_plus = pessimistic_operator(Bound::Upper, model, &q_plus, cfg, nash_tol)?;
        residuals.push(IterationResidual {
            lower: next_minus.max_abs_diff(&q_minus),
            upper: next_plus.max_abs_diff(&q_plus),
        });
        q_minus = next_minus;
        q_plus = next_plus;
    }

    let (v_minus, certs_minus) = value_of_q(&q_minus, nash_tol)?;
    let (v_plus, certs_plus) = value_of_q(&q_plus, nash_tol)?;
    let (mu_hat, _) = policies_from(certs_minus, na, nb);
    let (_, nu_hat) = policies_from(certs_plus, na, nb);
    Ok(SolveResult {
        q_minus,
        q_plus,
        v_minus,
        v_plus,
        mu_hat,
        nu_hat,
        iterations,
        residuals,
    })
}
