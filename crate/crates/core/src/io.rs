//! JSON file formats.
//!
//! Games use `{"S","A","B","gamma","P":[S][A][B][S],"r":[S][A][B]}`;
//! policies use `{"side":"max"|"min","probs":[S][actions]}`; state and
//! behavior distributions are flat arrays. Floats are written in shortest
//! round-trip form, so reading a file back reproduces every bit.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game_model::{
    BehaviorDistribution, MarkovGame, QTensor, Side, StateDistribution, StationaryPolicy,
};
use crate::offline_data::EmpiricalModel;
use crate::vi_lcb::{IterationResidual, SolveResult};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

fn nest3(flat: &[f64], a: usize, b: usize) -> Vec<Vec<Vec<f64>>> {
    flat.chunks(a * b)
        .map(|s| s.chunks(b).map(<[f64]>::to_vec).collect())
        .collect()
}

fn nest4(flat: &[f64], a: usize, b: usize, n: usize) -> Vec<Vec<Vec<Vec<f64>>>> {
    flat.chunks(a * b * n)
        .map(|s| {
            s.chunks(b * n)
                .map(|sa| sa.chunks(n).map(<[f64]>::to_vec).collect())
                .collect()
        })
        .collect()
}

fn flatten3<T: Clone>(
    nested: &[Vec<Vec<T>>],
    dims: (usize, usize, usize),
    what: &str,
) -> Result<Vec<T>> {
    let ok = nested.len() == dims.0
        && nested
            .iter()
            .all(|s| s.len() == dims.1 && s.iter().all(|a| a.len() == dims.2));
    if !ok {
        return Err(Error::DimensionMismatch(format!(
            "{what} is not shaped {dims:?}"
        )));
    }
    Ok(nested.iter().flatten().flatten().cloned().collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameJson {
    #[serde(rename = "S")]
    pub num_states: usize,
    #[serde(rename = "A")]
    pub num_max_actions: usize,
    #[serde(rename = "B")]
    pub num_min_actions: usize,
    pub gamma: f64,
    #[serde(rename = "P")]
    pub transition: Vec<Vec<Vec<Vec<f64>>>>,
    pub r: Vec<Vec<Vec<f64>>>,
}

impl From<&MarkovGame> for GameJson {
    fn from(game: &MarkovGame) -> Self {
        let (ns, na, nb) = game.dims();
        Self {
            num_states: ns,
            num_max_actions: na,
            num_min_actions: nb,
            gamma: game.gamma(),
            transition: nest4(game.transitions(), na, nb, ns),
            r: nest3(game.rewards(), na, nb),
        }
    }
}

impl GameJson {
    pub fn into_game(self) -> Result<MarkovGame> {
        let dims = (self.num_states, self.num_max_actions, self.num_min_actions);
        let reward = flatten3(&self.r, dims, "r")?;
        let rows = flatten3(&self.transition, dims, "P")?;
        if rows.iter().any(|row| row.len() != self.num_states) {
            return Err(Error::DimensionMismatch("P rows must have length S".into()));
        }
        let transition = rows.into_iter().flatten().collect();
        MarkovGame::new(dims.0, dims.1, dims.2, self.gamma, transition, reward)
    }
}

pub fn load_game(path: &Path) -> Result<MarkovGame> {
    read_json::<GameJson>(path)?.into_game()
}

pub fn save_game(path: &Path, game: &MarkovGame) -> Result<()> {
    write_json(path, &GameJson::from(game))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyJson {
    pub side: Side,
    pub probs: Vec<Vec<f64>>,
}

impl From<&StationaryPolicy> for PolicyJson {
    fn from(p: &StationaryPolicy) -> Self {
        Self {
            side: p.side(),
            probs: p.rows(),
        }
    }
}

impl PolicyJson {
    pub fn into_policy(self) -> Result<StationaryPolicy> {
        StationaryPolicy::from_rows(self.side, &self.probs)
    }
}

pub fn load_policy(path: &Path) -> Result<StationaryPolicy> {
    read_json::<PolicyJson>(path)?.into_policy()
}

pub fn load_state_distribution(path: &Path) -> Result<StateDistribution> {
    StateDistribution::new(read_json(path)?)
}

/// Behavior distributions are stored flat in `[s][a][b]` order; the shape
/// comes from the game they belong to.
pub fn load_behavior(path: &Path, dims: (usize, usize, usize)) -> Result<BehaviorDistribution> {
    BehaviorDistribution::new(dims, read_json(path)?)
}

/// Empirical game in the game schema plus the visit counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalModelJson {
    #[serde(flatten)]
    pub game: GameJson,
    pub counts: Vec<Vec<Vec<u64>>>,
}

impl From<&EmpiricalModel> for EmpiricalModelJson {
    fn from(model: &EmpiricalModel) -> Self {
        let (ns, na, nb) = model.dims();
        Self {
            game: GameJson {
                num_states: ns,
                num_max_actions: na,
                num_min_actions: nb,
                gamma: model.gamma(),
                transition: nest4(model.p_hat(), na, nb, ns),
                r: nest3(model.r_hat(), na, nb),
            },
            counts: model
                .counts()
                .chunks(na * nb)
                .map(|s| s.chunks(nb).map(<[u64]>::to_vec).collect())
                .collect(),
        }
    }
}

impl EmpiricalModelJson {
    pub fn into_model(self) -> Result<EmpiricalModel> {
        let dims = (
            self.game.num_states,
            self.game.num_max_actions,
            self.game.num_min_actions,
        );
        let counts = flatten3(&self.counts, dims, "counts")?;
        let gamma = self.game.gamma;
        let game = self.game.into_game()?;
        EmpiricalModel::from_parts(
            dims,
            gamma,
            counts,
            game.transitions().to_vec(),
            game.rewards().to_vec(),
        )
    }
}

/// Serializes `f64::INFINITY` as the string `"inf"`.
pub mod float_or_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() && *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!(
                "expected number or \"inf\", got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResultJson {
    pub iterations: usize,
    pub mu_hat: PolicyJson,
    pub nu_hat: PolicyJson,
    pub v_minus: Vec<f64>,
    pub v_plus: Vec<f64>,
    pub residuals: Vec<IterationResidual>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q_minus: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q_plus: Option<Vec<Vec<Vec<f64>>>>,
}

impl SolveResultJson {
    pub fn new(result: &SolveResult, include_q: bool) -> Self {
        let q = |t: &QTensor| include_q.then(|| t.to_nested());
        Self {
            iterations: result.iterations,
            mu_hat: (&result.mu_hat).into(),
            nu_hat: (&result.nu_hat).into(),
            v_minus: result.v_minus.0.clone(),
            v_plus: result.v_plus.0.clone(),
            residuals: result.residuals.clone(),
            q_minus: q(&result.q_minus),
            q_plus: q(&result.q_plus),
        }
    }
}
