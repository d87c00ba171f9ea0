//! Online tuning of the participant count `M` and training passes `E`.
//!
//! The tuner watches test accuracy. Whenever accuracy has improved by more
//! than `epsilon` since the last decision, it
//!
//! 1. normalizes the overheads accrued over that interval by the accuracy
//!    gained, giving a per-unit-accuracy cost for the hyper-parameters in use;
//! 2. scores the previous hyper-parameters against the current ones with the
//!    preference-weighted relative change ([`compare`]);
//! 3. refreshes the slope estimates that favour the direction it last moved,
//!    and, if the last move made things worse, multiplies the slopes that
//!    oppose that move by the penalty factor `D`;
//! 4. estimates `∂G/∂M` and `∂G/∂E` from the slopes and the observed relative
//!    changes, and moves `M` and `E` one step in the direction of the sign.
//!
//! How each overhead responds to a larger `M` or `E` is fixed:
//!
//! | overhead | larger `M` | larger `E` |
//! |---|---|---|
//! | CompT | better | worse |
//! | TransT | better | better |
//! | CompL | worse | worse |
//! | TransL | worse | better |

use serde::{Deserialize, Serialize};

use crate::cost::Overheads;
use crate::engine::HyperParams;
use crate::error::{Error, Result};

/// Sign of each overhead's preference for a larger `M` (CompT, TransT, CompL, TransL).
pub const M_SIGNS: [f64; 4] = [1.0, 1.0, -1.0, -1.0];
/// Sign of each overhead's preference for a larger `E`.
pub const E_SIGNS: [f64; 4] = [-1.0, 1.0, -1.0, 1.0];

/// Bounds of the ratio-rule slope refresh.
pub const SLOPE_REFRESH_MIN: f64 = 1e-3;
pub const SLOPE_REFRESH_MAX: f64 = 1e3;
/// Ceiling for repeatedly penalized slopes so they stay finite.
pub const SLOPE_CEILING: f64 = 1e12;

const PREFERENCE_TOLERANCE: f64 = 1e-9;

/// Application weights over (CompT, TransT, CompL, TransL), summing to one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Preference([f64; 4]);

impl Preference {
    pub fn new(comp_time: f64, trans_time: f64, comp_load: f64, trans_load: f64) -> Result<Self> {
        Self::try_from([comp_time, trans_time, comp_load, trans_load])
    }

    pub fn weights(&self) -> [f64; 4] {
        self.0
    }

    /// The fifteen preference vectors of the standard evaluation grid: every
    /// non-empty subset of the four overheads, weighted equally.
    pub fn evaluation_grid() -> Vec<Preference> {
        let mut out = Vec::new();
        for size in 1..=4u32 {
            // descending masks list (1,0,0,0) before (0,1,0,0), and so on
            for mask in (1u32..16).rev().filter(|m| m.count_ones() == size) {
                let mut w = [0.0; 4];
                for (i, slot) in w.iter_mut().enumerate() {
                    if mask & (1 << (3 - i)) != 0 {
                        *slot = 1.0 / size as f64;
                    }
                }
                out.push(Preference(w));
            }
        }
        out
    }

    pub fn label(&self) -> String {
        let w = self.0;
        format!("{:.2}-{:.2}-{:.2}-{:.2}", w[0], w[1], w[2], w[3])
    }
}

impl TryFrom<[f64; 4]> for Preference {
    type Error = Error;

    fn try_from(w: [f64; 4]) -> Result<Self> {
        if w.iter().any(|v| !(v.is_finite() && (0.0..=1.0).contains(v))) {
            return Err(Error::config(
                "tuner.preference",
                format!("weights {w:?} must lie in [0, 1]"),
            ));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > PREFERENCE_TOLERANCE {
            return Err(Error::config(
                "tuner.preference",
                format!("weights {w:?} sum to {sum}, not 1"),
            ));
        }
        Ok(Preference(w))
    }
}

impl From<Preference> for [f64; 4] {
    fn from(p: Preference) -> [f64; 4] {
        p.0
    }
}

impl std::str::FromStr for Preference {
    type Err = Error;

    /// Parses `a,b,c,d`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::config("tuner.preference", format!("`{s}`: {e}")))?;
        let w: [f64; 4] = parts
            .try_into()
            .map_err(|_| Error::config("tuner.preference", format!("`{s}` needs four weights")))?;
        Preference::try_from(w)
    }
}

/// Preference-weighted relative change going from `s1` to `s2`. Negative
/// means `s2` is the better of the two.
pub fn compare(s1: &Overheads, s2: &Overheads, pref: &Preference) -> Result<f64> {
    let a = s1.as_array();
    if a.iter().any(|v| v.is_nan() || *v <= 0.0) {
        return Err(Error::Comparison(format!(
            "reference overheads must be positive, got {s1:?}"
        )));
    }
    let b = s2.as_array();
    Ok((0..4).map(|i| pref.0[i] * (b[i] - a[i]) / a[i]).sum())
}

/// Overall improvement of `tuned` over `baseline` in percent; positive means
/// the tuned run spent less.
pub fn overall_improvement(baseline: &Overheads, tuned: &Overheads, pref: &Preference) -> Result<f64> {
    Ok(-compare(baseline, tuned, pref)? * 100.0)
}

/// `Σ sign_i · w_i · slope_i · |cur_i − prv_i| / cur_i`.
pub fn directional_estimate(
    pref: &Preference,
    slopes: &[f64; 4],
    signs: &[f64; 4],
    cur: &Overheads,
    prv: &Overheads,
) -> Result<f64> {
    let c = cur.as_array();
    let p = prv.as_array();
    if c.iter().any(|v| v.is_nan() || *v <= 0.0) {
        return Err(Error::Tuner(format!("current overheads must be positive, got {cur:?}")));
    }
    Ok((0..4)
        .map(|i| signs[i] * pref.0[i] * slopes[i] * (c[i] - p[i]).abs() / c[i])
        .sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    fn from_delta(delta: f64) -> Self {
        if delta > 0.0 {
            Direction::Up
        } else {
            Direction::Down
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Direction::Up => 1,
            Direction::Down => -1,
        }
    }
}

/// Indices into a slope array (CompT, TransT, CompL, TransL).
const T: usize = 0;
const Q: usize = 1;
const Z: usize = 2;
const V: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TunerConfig {
    pub preference: Preference,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_penalty")]
    pub penalty: f64,
    #[serde(default = "default_e_max")]
    pub e_max: f64,
}

fn default_epsilon() -> f64 {
    0.01
}

fn default_penalty() -> f64 {
    10.0
}

fn default_e_max() -> f64 {
    50.0
}

impl TunerConfig {
    pub fn new(preference: Preference) -> Self {
        TunerConfig {
            preference,
            epsilon: default_epsilon(),
            penalty: default_penalty(),
            e_max: default_e_max(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::config("tuner.epsilon", "must be > 0"));
        }
        if !(self.penalty.is_finite() && self.penalty >= 1.0) {
            return Err(Error::config("tuner.penalty", "must be >= 1"));
        }
        if !(self.e_max.is_finite() && self.e_max >= 1.0) {
            return Err(Error::config("tuner.e_max", "must be >= 1"));
        }
        Ok(())
    }
}

/// One emitted hyper-parameter change, with the quantities behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub from: HyperParams,
    pub to: HyperParams,
    pub accuracy: f64,
    pub accuracy_gain: f64,
    /// Interval overheads divided by the accuracy gain.
    pub normalized: Overheads,
    /// `I(S_prv, S_cur)`; absent on the first decision, which has no
    /// previous interval to compare against.
    pub comparison: Option<f64>,
    pub penalized: bool,
    pub delta_m: f64,
    pub delta_e: f64,
    pub eta: [f64; 4],
    pub zeta: [f64; 4],
}

#[derive(Clone, Debug, PartialEq)]
pub struct TunerState {
    pub config: TunerConfig,
    pub max_participants: usize,
    pub current: HyperParams,
    pub previous: HyperParams,
    /// Accuracy at the last decision (or at start).
    pub last_accuracy: f64,
    /// Normalized overheads of the last two intervals.
    pub prv: Option<Overheads>,
    pub prvprv: Option<Overheads>,
    /// Slopes with respect to `M`.
    pub eta: [f64; 4],
    /// Slopes with respect to `E`.
    pub zeta: [f64; 4],
    /// Directions of the last decision.
    pub last_m: Option<Direction>,
    pub last_e: Option<Direction>,
    /// Overheads accrued since the last decision.
    pub interval: Overheads,
}

fn clamp_slope(v: f64) -> f64 {
    v.clamp(SLOPE_REFRESH_MIN, SLOPE_REFRESH_MAX)
}

/// Ratio rule `|x_cur − x_prv| / |x_prv − x_prvprv|`, clamped. A zero
/// denominator keeps the old slope when nothing moved, else saturates.
fn refreshed(old: f64, cur: f64, prv: f64, prvprv: f64) -> f64 {
    let num = (cur - prv).abs();
    let den = (prv - prvprv).abs();
    if den == 0.0 {
        if num == 0.0 {
            old
        } else {
            SLOPE_REFRESH_MAX
        }
    } else {
        clamp_slope(num / den)
    }
}

impl TunerState {
    pub fn new(
        config: TunerConfig,
        initial: HyperParams,
        max_participants: usize,
        initial_accuracy: f64,
    ) -> Result<Self> {
        config.validate()?;
        initial.validate(max_participants)?;
        Ok(TunerState {
            config,
            max_participants,
            current: initial,
            previous: initial,
            last_accuracy: initial_accuracy,
            prv: None,
            prvprv: None,
            eta: [1.0; 4],
            zeta: [1.0; 4],
            last_m: None,
            last_e: None,
            interval: Overheads::default(),
        })
    }

    /// Baseline for relative changes: the previous interval, or zero before
    /// the first decision (every relative change is then 1).
    fn reference(&self) -> Overheads {
        self.prv.unwrap_or_default()
    }

    pub fn delta_m(&self, cur: &Overheads) -> Result<f64> {
        directional_estimate(&self.config.preference, &self.eta, &M_SIGNS, cur, &self.reference())
    }

    pub fn delta_e(&self, cur: &Overheads) -> Result<f64> {
        directional_estimate(&self.config.preference, &self.zeta, &E_SIGNS, cur, &self.reference())
    }

    /// Refresh the slopes that favour the last moves, then penalize the ones
    /// opposing them when the move was judged bad.
    fn update_slopes(&mut self, cur: &Overheads, bad: bool) {
        let d = self.config.penalty;
        let penalize = |s: &mut f64| *s = (*s * d).min(SLOPE_CEILING);
        if let (Some(prv), Some(prvprv)) = (self.prv, self.prvprv) {
            let (c, p, pp) = (cur.as_array(), prv.as_array(), prvprv.as_array());
            let favoured_m: [usize; 2] = match self.last_m {
                Some(Direction::Up) => [T, Q],
                _ => [Z, V],
            };
            for i in favoured_m {
                self.eta[i] = refreshed(self.eta[i], c[i], p[i], pp[i]);
            }
            let favoured_e: [usize; 2] = match self.last_e {
                Some(Direction::Up) => [Q, V],
                _ => [T, Z],
            };
            for i in favoured_e {
                self.zeta[i] = refreshed(self.zeta[i], c[i], p[i], pp[i]);
            }
        }
        if bad {
            let against_m: [usize; 2] = match self.last_m {
                Some(Direction::Up) => [Z, V],
                _ => [T, Q],
            };
            against_m.iter().for_each(|&i| penalize(&mut self.eta[i]));
            let against_e: [usize; 2] = match self.last_e {
                Some(Direction::Up) => [T, Z],
                _ => [Q, V],
            };
            against_e.iter().for_each(|&i| penalize(&mut self.zeta[i]));
        }
    }

    /// Feed one finished round. Returns the new hyper-parameters when the
    /// accuracy gate opens, `None` otherwise.
    pub fn step(&mut self, accuracy: f64, round: &Overheads) -> Result<Option<Decision>> {
        self.interval += *round;
        let gain = accuracy - self.last_accuracy;
        if gain.is_nan() || gain <= self.config.epsilon {
            return Ok(None);
        }
        let cur = self.interval.map(|v| v / gain);
        if !cur.is_finite() || cur.as_array().iter().any(|v| *v <= 0.0) {
            return Err(Error::Tuner(format!("invalid normalized overheads {cur:?}")));
        }
        let comparison = match self.prv {
            Some(prv) => Some(compare(&prv, &cur, &self.config.preference)?),
            None => None,
        };
        let bad = comparison.is_some_and(|i| i > 0.0);
        if self.prv.is_some() {
            self.update_slopes(&cur, bad);
        }

        let delta_m = self.delta_m(&cur)?;
        let delta_e = self.delta_e(&cur)?;
        let m_dir = Direction::from_delta(delta_m);
        let e_dir = Direction::from_delta(delta_e);
        let m_next = match m_dir {
            Direction::Up => self.current.participants + 1,
            Direction::Down => self.current.participants.saturating_sub(1),
        }
        .clamp(1, self.max_participants);
        let e_next = match e_dir {
            Direction::Up => self.current.passes + 1.0,
            Direction::Down => self.current.passes - 1.0,
        }
        .clamp(1.0, self.config.e_max.max(1.0));
        let next = HyperParams::new(m_next, e_next);

        let decision = Decision {
            from: self.current,
            to: next,
            accuracy,
            accuracy_gain: gain,
            normalized: cur,
            comparison,
            penalized: bad,
            delta_m,
            delta_e,
            eta: self.eta,
            zeta: self.zeta,
        };

        self.prvprv = self.prv;
        self.prv = Some(cur);
        self.last_accuracy = accuracy;
        self.previous = self.current;
        self.current = next;
        self.last_m = Some(m_dir);
        self.last_e = Some(e_dir);
        self.interval = Overheads::default();
        Ok(Some(decision))
    }
}
