//! Certified solver for two-player zero-sum matrix games.
//!
//! The row player maximizes `w' M z`, the column player minimizes it. Every
//! solution comes with an exploitability certificate, so callers never have
//! to trust the solver path that produced it.
//!
//! Solving proceeds in stages: closed forms for single-row/column matrices and
//! pure saddle points, then regret-matching+ self-play with linearly averaged
//! iterates, stopped as soon as the averaged pair certifies the tolerance. If
//! the self-play budget runs out first, the game is solved exactly by pivoting
//! on the classical LP reformulation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-6;

/// Self-play iterations attempted before falling back to the exact pivot solve.
const SELF_PLAY_BUDGET: usize = 8192;
/// Gap checks happen every this many self-play iterations.
const CHECK_EVERY: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl PayoffMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(
                "payoff matrix needs at least one row and one column".into(),
            ));
        }
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if let Some(k) = entries.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: k / cols,
                col: k % cols,
            });
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch("ragged payoff matrix".into()));
        }
        Self::new(n, m, rows.iter().flatten().copied().collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.cols..(row + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries
            .chunks(self.cols)
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// `M z`, the payoff of each pure row against `z`.
    pub fn row_payoffs(&self, z: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(z).map(|(m, p)| m * p).sum())
            .collect()
    }

    /// `w' M`, the payoff of each pure column against `w`.
    pub fn col_payoffs(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &wi) in w.iter().enumerate() {
            if wi == 0.0 {
                continue;
            }
            for (o, m) in out.iter_mut().zip(self.row(i)) {
                *o += wi * m;
            }
        }
        out
    }

    /// `w' M z`.
    pub fn expected(&self, w: &[f64], z: &[f64]) -> f64 {
        w.iter()
            .enumerate()
            .map(|(i, wi)| wi * self.row(i).iter().zip(z).map(|(m, p)| m * p).sum::<f64>())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashCertificate {
    pub row_strategy: Vec<f64>,
    pub col_strategy: Vec<f64>,
    pub value: f64,
    /// `max_a (M z)_a`: what the row player could secure against `z`.
    pub upper_bound: f64,
    /// `min_b (w' M)_b`: what `w` guarantees against every column.
    pub lower_bound: f64,
    pub exploitability_gap: f64,
}

impl NashCertificate {
    fn from_strategies(m: &PayoffMatrix, w: Vec<f64>, z: Vec<f64>) -> Self {
        let upper = max_of(&m.row_payoffs(&z));
        let lower = min_of(&m.col_payoffs(&w));
        Self {
            row_strategy: w,
            col_strategy: z,
            value: 0.5 * (upper + lower),
            upper_bound: upper,
            lower_bound: lower,
            exploitability_gap: upper - lower,
        }
    }
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

fn unit(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

fn check_distribution(p: &[f64], n: usize, what: &str) -> Result<()> {
    if p.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{what} has length {}, expected {n}",
            p.len()
        )));
    }
    let sum: f64 = p.iter().sum();
    if p.iter().any(|x| !(*x >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!(
            "{what} is not a probability vector (sum {sum})"
        )));
    }
    Ok(())
}

/// `max_a (M z)_a - min_b (w' M)_b` for a strategy pair.
pub fn exploitability(m: &PayoffMatrix, w: &[f64], z: &[f64]) -> Result<f64> {
    check_distribution(w, m.rows, "row strategy")?;
    check_distribution(z, m.cols, "column strategy")?;
    Ok(max_of(&m.row_payoffs(z)) - min_of(&m.col_payoffs(w)))
}

/// Solves `max_w min_z w' M z` to exploitability `tol`.
pub fn matrix_nash(m: &PayoffMatrix, tol: f64) -> Result<NashCertificate> {
    if !(tol > 0.0) {
        return Err(Error::InvalidTolerance(tol));
    }
    let (rows, cols) = (m.rows, m.cols);

    if rows == 1 {
        let j = argmin(m.row(0));
        return Ok(NashCertificate::from_strategies(
            m,
            vec![1.0],
            unit(cols, j),
        ));
    }
    if cols == 1 {
        let col: Vec<f64> = (0..rows).map(|i| m.get(i, 0)).collect();
        let i = argmax(&col);
        return Ok(NashCertificate::from_strategies(
            m,
            unit(rows, i),
            vec![1.0],
        ));
    }

    if let Some(cert) = pure_saddle(m, tol) {
        return Ok(cert);
    }
    if let Some(cert) = self_play(m, tol) {
        return Ok(cert);
    }
    let cert = pivot_solve(m)?;
    if cert.exploitability_gap > tol {
        return Err(Error::Numerical(format!(
            "exact matrix solve left exploitability {} above tolerance {tol}",
            cert.exploitability_gap
        )));
    }
    Ok(cert)
}

/// Best pure maximin row against best pure minimax column; accepted when the
/// two security levels already agree within `tol`.
fn pure_saddle(m: &PayoffMatrix, tol: f64) -> Option<NashCertificate> {
    let row_mins: Vec<f64> = (0..m.rows).map(|i| min_of(m.row(i))).collect();
    let col_maxs: Vec<f64> = (0..m.cols)
        .map(|j| {
            (0..m.rows)
                .map(|i| m.get(i, j))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let i = argmax(&row_mins);
    let j = argmin(&col_maxs);
    if col_maxs[j] - row_mins[i] <= tol {
        Some(NashCertificate::from_strategies(
            m,
            unit(m.rows, i),
            unit(m.cols, j),
        ))
    } else {
        None
    }
}

/// Alternating regret-matching+ with linear averaging.
fn self_play(m: &PayoffMatrix, tol: f64) -> Option<NashCertificate> {
    let (rows, cols) = (m.rows, m.cols);
    let mut row_regret = vec![0.0; rows];
    let mut col_regret = vec![0.0; cols];
    let mut w = vec![1.0 / rows as f64; rows];
    let mut z = vec![1.0 / cols as f64; cols];
    let mut w_sum = vec![0.0; rows];
    let mut z_sum = vec![0.0; cols];

    for t in 1..=SELF_PLAY_BUDGET {
        let weight = t as f64;

        let payoffs = m.row_payoffs(&z);
        let value: f64 = payoffs.iter().zip(&w).map(|(u, p)| u * p).sum();
        for (r, u) in row_regret.iter_mut().zip(&payoffs) {
            *r = (*r + u - value).max(0.0);
        }
        normalize_regrets(&row_regret, &mut w);
        for (s, p) in w_sum.iter_mut().zip(&w) {
            *s += weight * p;
        }

        let losses = m.col_payoffs(&w);
        let value: f64 = losses.iter().zip(&z).map(|(u, p)| u * p).sum();
        for (r, u) in col_regret.iter_mut().zip(&losses) {
            *r = (*r + value - u).max(0.0);
        }
        normalize_regrets(&col_regret, &mut z);
        for (s, p) in z_sum.iter_mut().zip(&z) {
            *s += weight * p;
        }

        if t % CHECK_EVERY == 0 {
            let cert = NashCertificate::from_strategies(m, normalized(&w_sum), normalized(&z_sum));
            if cert.exploitability_gap <= tol {
                return Some(cert);
            }
            // The averaged gap decays roughly like 1/t; give up early when
            // that rate cannot reach `tol` within the budget.
            if cert.exploitability_gap * t as f64 > tol * SELF_PLAY_BUDGET as f64 * 4.0 {
                return None;
            }
        }
    }
    None
}

fn normalize_regrets(regret: &[f64], strategy: &mut [f64]) {
    let total: f64 = regret.iter().sum();
    if total > 0.0 {
        for (p, r) in strategy.iter_mut().zip(regret) {
            *p = r / total;
        }
    } else {
        let u = 1.0 / strategy.len() as f64;
        strategy.iter_mut().for_each(|p| *p = u);
    }
}

fn normalized(xs: &[f64]) -> Vec<f64> {
    let total: f64 = xs.iter().sum();
    xs.iter().map(|x| x / total).collect()
}

/// Exact solve through the LP `max 1'y s.t. M' y <= 1, y >= 0` where `M'` is
/// `M` shifted to be strictly positive. The origin is feasible so no phase one
/// is needed; Bland's rule rules out cycling. The row strategy is read off the
/// reduced costs of the slack columns.
fn pivot_solve(m: &PayoffMatrix) -> Result<NashCertificate> {
    let (rows, cols) = (m.rows, m.cols);
    let lo = m.entries.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = m.entries.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = (hi - lo).max(1.0);
    // Shifted and rescaled entries lie in [1, 2].
    let shifted = |i: usize, j: usize| 1.0 + (m.get(i, j) - lo) / scale;

    let width = cols + rows + 1;
    let mut tab = vec![0.0; (rows + 1) * width];
    for i in 0..rows {
        for j in 0..cols {
            tab[i * width + j] = shifted(i, j);
        }
        tab[i * width + cols + i] = 1.0;
        tab[i * width + width - 1] = 1.0;
    }
    // Objective row holds reduced costs c_j - z_j.
    let obj = rows * width;
    for j in 0..cols {
        tab[obj + j] = 1.0;
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();

    let eps = 1e-12;
    let max_pivots = 50 * (rows + cols) + 1000;
    let mut pivots = 0;
    while let Some(enter) = (0..cols + rows).find(|&j| tab[obj + j] > eps) {
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..rows {
            let a = tab[i * width + enter];
            if a > eps {
                let ratio = tab[i * width + width - 1] / a;
                let better = match leave {
                    None => true,
                    Some(l) => {
                        ratio < best_ratio - eps
                            || (ratio <= best_ratio + eps && basis[i] < basis[l])
                    }
                };
                if better {
                    best_ratio = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(leave) = leave else {
            return Err(Error::Numerical("matrix game LP reported unbounded".into()));
        };

        let piv = tab[leave * width + enter];
        for k in 0..width {
            tab[leave * width + k] /= piv;
        }
        for i in 0..=rows {
            if i == leave {
                continue;
            }
            let factor = tab[i * width + enter];
            if factor != 0.0 {
                for k in 0..width {
                    tab[i * width + k] -= factor * tab[leave * width + k];
                }
            }
        }
        basis[leave] = enter;

        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Numerical("matrix game LP did not terminate".into()));
        }
    }

    let mut y = vec![0.0; cols];
    for (i, &var) in basis.iter().enumerate() {
        if var < cols {
            y[var] = tab[i * width + width - 1].max(0.0);
        }
    }
    let x: Vec<f64> = (0..rows).map(|i| (-tab[obj + cols + i]).max(0.0)).collect();
    let (ysum, xsum): (f64, f64) = (y.iter().sum(), x.iter().sum());
    if !(ysum > 0.0 && xsum > 0.0) {
        return Err(Error::Numerical(
            "degenerate matrix game LP solution".into(),
        ));
    }
    Ok(NashCertificate::from_strategies(
        m,
        x.iter().map(|v| v / xsum).collect(),
        y.iter().map(|v| v / ysum).collect(),
    ))
}
