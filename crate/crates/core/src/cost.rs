//! System-overhead accounting.
//!
//! Four overheads are tracked per round and cumulatively:
//!
//! | overhead | per round | grows with |
//! |---|---|---|
//! | computation time (CompT) | `C1 · E · max n_k` | slowest participant |
//! | transmission time (TransT) | `C2` | rounds only |
//! | computation load (CompL) | `C3 · E · Σ n_k` | every participant |
//! | transmission load (TransL) | `C4 · M` | every participant |
//!
//! The constants are dimensionless proxies: FLOPs per input for `C1`/`C3` and
//! parameter count for `C2`/`C4`. Under tuning `M` and `E` vary per round, so
//! the totals are always per-round sums rather than closed forms.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelDescriptor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl CostConstants {
    pub fn from_descriptor(d: &ModelDescriptor) -> Self {
        CostConstants {
            c1: d.flops_per_input,
            c2: d.num_params,
            c3: d.flops_per_input,
            c4: d.num_params,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c1", self.c1), ("c2", self.c2), ("c3", self.c3), ("c4", self.c4)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("cost.{name}"), "must be finite and > 0"));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        CostConstants {
            c1: self.c1 * lambda,
            c2: self.c2 * lambda,
            c3: self.c3 * lambda,
            c4: self.c4 * lambda,
        }
    }
}

/// A (CompT, TransT, CompL, TransL) tuple. Used for per-round values,
/// cumulative totals and the tuner's normalized interval overheads alike.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Overheads {
    pub comp_time: f64,
    pub trans_time: f64,
    pub comp_load: f64,
    pub trans_load: f64,
}

impl Overheads {
    pub const fn new(comp_time: f64, trans_time: f64, comp_load: f64, trans_load: f64) -> Self {
        Overheads {
            comp_time,
            trans_time,
            comp_load,
            trans_load,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.comp_time, self.trans_time, self.comp_load, self.trans_load]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Overheads::new(a[0], a[1], a[2], a[3])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Overheads::from_array(self.as_array().map(f))
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

impl Add for Overheads {
    type Output = Overheads;

    fn add(self, rhs: Overheads) -> Overheads {
        Overheads::new(
            self.comp_time + rhs.comp_time,
            self.trans_time + rhs.trans_time,
            self.comp_load + rhs.comp_load,
            self.trans_load + rhs.trans_load,
        )
    }
}

impl AddAssign for Overheads {
    fn add_assign(&mut self, rhs: Overheads) {
        *self = *self + rhs;
    }
}

fn nonempty(nks: &[usize]) -> Result<()> {
    if nks.is_empty() {
        Err(Error::Accounting("no participants selected".into()))
    } else {
        Ok(())
    }
}

pub fn round_comp_time(c1: f64, passes: f64, nks: &[usize]) -> Result<f64> {
    nonempty(nks)?;
    let slowest = *nks.iter().max().expect("nonempty");
    Ok(c1 * passes * slowest as f64)
}

pub fn round_trans_time(c2: f64) -> f64 {
    c2
}

pub fn round_comp_load(c3: f64, passes: f64, nks: &[usize]) -> Result<f64> {
    nonempty(nks)?;
    let total: usize = nks.iter().sum();
    Ok(c3 * passes * total as f64)
}

pub fn round_trans_load(c4: f64, participants: usize) -> f64 {
    c4 * participants as f64
}

/// All four per-round overheads for one round.
pub fn round_overheads(costs: &CostConstants, passes: f64, nks: &[usize]) -> Result<Overheads> {
    Ok(Overheads::new(
        round_comp_time(costs.c1, passes, nks)?,
        round_trans_time(costs.c2),
        round_comp_load(costs.c3, passes, nks)?,
        round_trans_load(costs.c4, nks.len()),
    ))
}

/// Cumulative overheads and the number of rounds accrued so far.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OverheadLedger {
    pub totals: Overheads,
    pub rounds: usize,
}

impl OverheadLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accrue(&mut self, round: &Overheads) -> Result<()> {
        if round.as_array().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Accounting(format!("invalid per-round overheads {round:?}")));
        }
        self.totals += *round;
        self.rounds += 1;
        Ok(())
    }
}
