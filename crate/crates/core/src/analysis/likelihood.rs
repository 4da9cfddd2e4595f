use serde::Serialize;

use super::special::marcum_q1;
use crate::channel::THRESHOLD_FACTOR;
use crate::codebook::MAX_BANDS;
use crate::error::{domain, Result};

/// Per-cell hard-decision probabilities of the envelope detector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CellLikelihoods {
    /// `P(b = 1 | q = 1, no PU)`
    pub p_b1_q1: f64,
    /// `P(b = 1 | q = 0, no PU)`
    pub p_b1_q0: f64,
    /// `P(b = 1 | PU)`, for either `q`.
    pub p_b1_pu: f64,
}

impl CellLikelihoods {
    pub fn p_b0_q1(&self) -> f64 {
        1.0 - self.p_b1_q1
    }

    pub fn p_b0_q0(&self) -> f64 {
        1.0 - self.p_b1_q0
    }

    pub fn p_b0_pu(&self) -> f64 {
        1.0 - self.p_b1_pu
    }

    /// `P(b | q)` without a primary user.
    pub fn clean(&self, q: bool, b: bool) -> f64 {
        let p1 = if q { self.p_b1_q1 } else { self.p_b1_q0 };
        if b {
            p1
        } else {
            1.0 - p1
        }
    }

    /// `P(b)` on a band occupied by a primary user.
    pub fn occupied(&self, b: bool) -> f64 {
        if b {
            self.p_b1_pu
        } else {
            1.0 - self.p_b1_pu
        }
    }

    /// `P(b | q)` on a cell whose band is busy with probability `p_on`.
    pub fn mixed(&self, q: bool, b: bool, p_on: f64) -> f64 {
        p_on * self.occupied(b) + (1.0 - p_on) * self.clean(q, b)
    }

    /// A channel whose decisions equal the transmitted bits.
    pub fn noiseless() -> Self {
        Self { p_b1_q1: 1.0, p_b1_q0: 0.0, p_b1_pu: 1.0 }
    }
}

/// Likelihoods for received symbol energy `es_r`, PU interference energy
/// `i_pu` and `h` bands, with the detector threshold at `0.6 sqrt(es_r)`.
pub fn cell_likelihoods(es_r: f64, i_pu: f64, n0: f64, h: usize) -> Result<CellLikelihoods> {
    if !(n0 > 0.0) {
        return Err(domain(format!("N0 must be positive, got {n0}")));
    }
    if !(es_r >= 0.0) || !(i_pu >= 0.0) {
        return Err(domain(format!("energies must be nonnegative: es_r={es_r}, i_pu={i_pu}")));
    }
    if h == 0 {
        return Err(domain("H must be positive"));
    }
    let hf = h as f64;
    let w = THRESHOLD_FACTOR * (2.0 * es_r / n0).sqrt();
    Ok(CellLikelihoods {
        p_b1_q1: marcum_q1((2.0 * es_r / (hf * n0)).sqrt(), w),
        p_b1_q0: (-THRESHOLD_FACTOR * THRESHOLD_FACTOR * es_r / n0).exp(),
        p_b1_pu: marcum_q1((2.0 * i_pu / (hf * n0)).sqrt(), w),
    })
}

/// Probability that a primary user is active on each cell of a block.
///
/// `PerBand` is constant along each row (band), the condition under which
/// the bound does not depend on the transmitted codeword. `PerCell` gives
/// every cell of the `H x H` block its own probability, repeated at every
/// trellis stage, indexed like the code matrices (`step * H + band`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum PuProfile {
    PerBand(Vec<f64>),
    PerCell { h: usize, probs: Vec<f64> },
}

impl PuProfile {
    /// No primary user anywhere.
    pub fn idle(h: usize) -> Self {
        Self::PerBand(vec![0.0; h])
    }

    /// One primary user on `band`, active with probability `p_on`.
    pub fn single(h: usize, band: usize, p_on: f64) -> Result<Self> {
        let mut probs = vec![0.0; h];
        *probs
            .get_mut(band)
            .ok_or_else(|| domain(format!("band {band} outside 0..{h}")))? = p_on;
        Self::per_band(probs)
    }

    pub fn per_band(probs: Vec<f64>) -> Result<Self> {
        check_probs(&probs)?;
        if probs.is_empty() || probs.len() > MAX_BANDS {
            return Err(domain(format!("{} bands outside 1..={MAX_BANDS}", probs.len())));
        }
        Ok(Self::PerBand(probs))
    }

    pub fn per_cell(h: usize, probs: Vec<f64>) -> Result<Self> {
        check_probs(&probs)?;
        if h == 0 || h > MAX_BANDS || probs.len() != h * h {
            return Err(domain(format!("per-cell profile needs H^2 = {} entries, got {}", h * h, probs.len())));
        }
        Ok(Self::PerCell { h, probs })
    }

    pub fn h(&self) -> usize {
        match self {
            Self::PerBand(p) => p.len(),
            Self::PerCell { h, .. } => *h,
        }
    }

    /// Activity probability of cell `cell` (block-local index).
    pub fn cell(&self, cell: usize) -> f64 {
        match self {
            Self::PerBand(p) => p[cell % p.len()],
            Self::PerCell { probs, .. } => probs[cell],
        }
    }

    pub fn is_row_constant(&self) -> bool {
        match self {
            Self::PerBand(_) => true,
            Self::PerCell { h, probs } => {
                (0..*h).all(|j| (0..*h).all(|k| probs[k * h + j] == probs[j]))
            }
        }
    }
}

fn check_probs(probs: &[f64]) -> Result<()> {
    match probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        Some(p) => Err(domain(format!("activity probability {p} outside [0, 1]"))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rayleigh_false_alarm() {
        let lik = cell_likelihoods(1.0, 0.0, 1.0, 3).unwrap();
        assert_relative_eq!(lik.p_b1_q0, (-0.36f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(lik.p_b1_q0, 0.69768, max_relative = 1e-5);
    }

    #[test]
    fn silent_pu_matches_empty_cell() {
        for snr in [0.1, 1.0, 5.0, 20.0] {
            let lik = cell_likelihoods(snr, 0.0, 1.0, 3).unwrap();
            assert!((lik.p_b1_pu - lik.p_b1_q0).abs() < 1e-14);
        }
    }

    #[test]
    fn complements() {
        let lik = cell_likelihoods(3.2, 7.0, 0.9, 4).unwrap();
        assert_eq!(lik.p_b1_q1 + lik.p_b0_q1(), 1.0);
        assert_eq!(lik.p_b1_q0 + lik.p_b0_q0(), 1.0);
        assert_eq!(lik.p_b1_pu + lik.p_b0_pu(), 1.0);
        for q in [false, true] {
            let total = lik.mixed(q, true, 0.3) + lik.mixed(q, false, 0.3);
            assert!((total - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn detection_improves_with_snr_for_two_bands() {
        // at low SNR the threshold shrinks faster than the tone, so the
        // trend only settles above a few dB
        let mut last = 0.0;
        for db in (6..=40).step_by(2) {
            let es = 10f64.powf(db as f64 / 10.0);
            let lik = cell_likelihoods(es, 0.0, 1.0, 2).unwrap();
            assert!(lik.p_b1_q1 >= last);
            last = lik.p_b1_q1;
        }
        assert!(last > 0.999_999);
    }

    #[test]
    fn detection_decays_when_threshold_outgrows_the_tone() {
        // for H >= 3 the per-cell amplitude sqrt(Es/H) is below 0.6 sqrt(Es)
        let mut last = 1.0;
        for db in (10..=40).step_by(2) {
            let es = 10f64.powf(db as f64 / 10.0);
            let lik = cell_likelihoods(es, 0.0, 1.0, 3).unwrap();
            assert!(lik.p_b1_q1 <= last);
            last = lik.p_b1_q1;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn rejects_bad_noise() {
        assert!(cell_likelihoods(1.0, 0.0, 0.0, 3).is_err());
        assert!(cell_likelihoods(1.0, 0.0, -1.0, 3).is_err());
    }

    #[test]
    fn profiles() {
        let p = PuProfile::single(3, 1, 0.35).unwrap();
        assert_eq!((p.cell(1), p.cell(4), p.cell(7), p.cell(0)), (0.35, 0.35, 0.35, 0.0));
        assert!(p.is_row_constant());
        let cells = PuProfile::per_cell(2, vec![0.1, 0.9, 0.1, 0.2]).unwrap();
        assert!(!cells.is_row_constant());
        assert!(PuProfile::per_cell(2, vec![0.1, 0.9, 0.1, 0.9]).unwrap().is_row_constant());
        assert!(PuProfile::single(3, 3, 0.5).is_err());
        assert!(PuProfile::per_band(vec![1.5]).is_err());
    }
}
