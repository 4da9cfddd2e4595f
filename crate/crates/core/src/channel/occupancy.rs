use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Activity process of a primary user on one band.
///
/// For the Markov variant, `r` is the per-step On to Off probability and `p`
/// the Off to On probability, so the long-run fractions are
/// `P_off = r / (r + p)` and `P_on = p / (r + p)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Occupancy {
    AlwaysOn,
    AlwaysOff,
    Markov { r: f64, p: f64 },
}

impl Occupancy {
    pub fn markov(r: f64, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) || !(0.0..=1.0).contains(&p) {
            return Err(domain(format!("transition probabilities must lie in [0, 1]: r={r}, p={p}")));
        }
        Ok(Self::Markov { r, p })
    }

    /// Chain with long-run On fraction `p_on` and `r + p = rate` (reduced if
    /// needed so both probabilities stay at most 1). The endpoints map to the
    /// constant variants.
    pub fn with_on_fraction(p_on: f64, rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_on) {
            return Err(domain(format!("P_on = {p_on} outside [0, 1]")));
        }
        if !(rate > 0.0) {
            return Err(domain(format!("transition rate must be positive, got {rate}")));
        }
        if p_on == 0.0 {
            return Ok(Self::AlwaysOff);
        }
        if p_on == 1.0 {
            return Ok(Self::AlwaysOn);
        }
        let rate = rate.min(1.0 / p_on).min(1.0 / (1.0 - p_on));
        Self::markov((1.0 - p_on) * rate, p_on * rate)
    }

    /// `(P_off, P_on)`.
    pub fn steady_state(&self) -> Result<(f64, f64)> {
        match *self {
            Self::AlwaysOn => Ok((0.0, 1.0)),
            Self::AlwaysOff => Ok((1.0, 0.0)),
            Self::Markov { r, p } => {
                let total = r + p;
                if total <= 0.0 {
                    return Err(domain("Markov chain with r + p = 0 has no unique steady state"));
                }
                Ok((r / total, p / total))
            }
        }
    }

    pub fn on_probability(&self) -> Result<f64> {
        self.steady_state().map(|(_, on)| on)
    }

    /// Whether the state is fixed for all time.
    pub fn is_static(&self) -> bool {
        !matches!(self, Self::Markov { .. })
    }
}

/// A primary user pinned to a zero-based band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimaryUser {
    pub band: usize,
    pub activity: Occupancy,
}

/// Running state of one primary user.
#[derive(Clone, Debug)]
pub struct PuProcess {
    user: PrimaryUser,
    on: bool,
}

impl PuProcess {
    /// Starts in a state drawn from the steady-state distribution; a
    /// degenerate chain starts Off.
    pub fn new<R: Rng + ?Sized>(user: PrimaryUser, rng: &mut R) -> Self {
        let on = match user.activity {
            Occupancy::AlwaysOn => true,
            Occupancy::AlwaysOff => false,
            Occupancy::Markov { .. } => match user.activity.on_probability() {
                Ok(p_on) => rng.random::<f64>() < p_on,
                Err(_) => false,
            },
        };
        Self { user, on }
    }

    pub fn with_state(user: PrimaryUser, on: bool) -> Self {
        Self { user, on }
    }

    pub fn user(&self) -> &PrimaryUser {
        &self.user
    }

    pub fn band(&self) -> usize {
        self.user.band
    }

    pub fn is_on(&self) -> bool {
        self.on
    }

    /// Advances one symbol interval and returns the new state.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        match self.user.activity {
            Occupancy::AlwaysOn => self.on = true,
            Occupancy::AlwaysOff => self.on = false,
            Occupancy::Markov { r, p } => {
                let u: f64 = rng.random();
                if self.on {
                    if u < r {
                        self.on = false;
                    }
                } else if u < p {
                    self.on = true;
                }
            }
        }
        self.on
    }
}
