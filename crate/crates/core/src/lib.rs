//! Offline learning of Nash equilibria in two-player zero-sum Markov games.
//!
//! The crate is organised around the pipeline it supports:
//!
//! * [`game_model`]: tabular games, policies, and exact planning (policy
//!   evaluation, best responses, Nash values, occupancy measures,
//!   concentrability coefficients).
//! * [`matrix_nash`]: certified matrix-game solver used inside every Bellman
//!   backup.
//! * [`offline_data`]: reproducible i.i.d. datasets and the empirical game.
//! * [`vi_lcb`]: pessimistic value iteration with Bernstein penalties.
//! * [`hard_instances`]: the lower-bound instance family with closed forms.
//! * [`experiment`]: sample-size sweeps and log-log slope fits.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod game_model;
pub mod hard_instances;
pub mod io;
pub mod matrix_nash;
pub mod offline_data;
pub mod vi_lcb;

pub use error::{Error, Result};
