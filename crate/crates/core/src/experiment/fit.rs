use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::sweep::SweepRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    #[default]
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

fn aggregate(values: &mut [f64], how: Aggregate) -> f64 {
    match how {
        Aggregate::Mean => values.iter().sum::<f64>() / values.len() as f64,
        Aggregate::Median => {
            values.sort_by(f64::total_cmp);
            let n = values.len();
            if n % 2 == 1 {
                values[n / 2]
            } else {
                0.5 * (values[n / 2 - 1] + values[n / 2])
            }
        }
    }
}

/// Per-`N` aggregated gaps, in increasing `N`.
pub fn aggregate_gaps(records: &[SweepRecord], how: Aggregate) -> Vec<(usize, f64)> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records {
        groups.entry(r.n).or_default().push(r.gap);
    }
    groups
        .into_iter()
        .map(|(n, mut gaps)| (n, aggregate(&mut gaps, how)))
        .collect()
}

/// Ordinary least squares of `log(aggregate gap)` on `log N`.
pub fn fit_loglog_slope(records: &[SweepRecord], how: Aggregate) -> Result<LogLogFit> {
    let points = aggregate_gaps(records, how);
    if points.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "need at least 3 distinct sample sizes, got {}",
            points.len()
        )));
    }
    if let Some((n, g)) = points.iter().find(|(_, g)| !(*g > 0.0)) {
        return Err(Error::Numerical(format!(
            "non-positive aggregate gap {g} at N = {n}"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, g)| g.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(LogLogFit {
        slope,
        intercept,
        r_squared,
    })
}
