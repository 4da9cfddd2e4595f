use std::f64::consts::TAU;
use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use super::DerivedEnergies;
use crate::codebook::{cell_index, CodeMatrix};
use crate::error::{domain, Result};

/// Envelope threshold as a fraction of `sqrt(Es_r)`.
pub const THRESHOLD_FACTOR: f64 = 0.6;

/// Hard decisions `b_{j,k}` of one received block, packed like
/// [`CodeMatrix`] (column-major). Any cell pattern is allowed.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReceivedMatrix {
    h: usize,
    mask: u64,
}

impl ReceivedMatrix {
    pub fn from_mask(h: usize, mask: u64) -> Self {
        let cells = h * h;
        let mask = if cells >= 64 { mask } else { mask & ((1u64 << cells) - 1) };
        Self { h, mask }
    }

    pub fn zeros(h: usize) -> Self {
        Self { h, mask: 0 }
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn cell(&self, band: usize, step: usize) -> bool {
        self.mask >> cell_index(self.h, band, step) & 1 == 1
    }

    pub fn set(&mut self, band: usize, step: usize, value: bool) {
        let bit = 1u64 << cell_index(self.h, band, step);
        if value {
            self.mask |= bit;
        } else {
            self.mask &= !bit;
        }
    }

    /// Cells that differ from a code matrix.
    pub fn distance(&self, t: &CodeMatrix) -> u32 {
        (self.mask ^ t.mask()).count_ones()
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        (0..self.h)
            .map(|j| (0..self.h).map(|k| self.cell(j, k) as u8).collect())
            .collect()
    }
}

impl From<CodeMatrix> for ReceivedMatrix {
    fn from(t: CodeMatrix) -> Self {
        Self { h: t.h(), mask: t.mask() }
    }
}

impl fmt::Debug for ReceivedMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ReceivedMatrix({:?})", self.rows())
    }
}

/// Non-coherent envelope detector for one `H x H` block.
///
/// A cell's in-phase and quadrature correlator outputs are Gaussian with
/// variance `N0 / 2` around a mean of amplitude `sqrt(I_PU / H)` when the
/// band carries a primary user (the SU term is dropped), `sqrt(Es_r / H)`
/// when the SU transmits on it, and zero otherwise. The decision is 1 when
/// the envelope reaches `0.6 sqrt(Es_r)`.
#[derive(Clone, Copy, Debug)]
pub struct Detector {
    h: usize,
    su_amplitude: f64,
    pu_amplitude: f64,
    noise_std: f64,
    threshold_sq: f64,
}

impl Detector {
    pub fn new(energies: DerivedEnergies, n0: f64, h: usize) -> Result<Self> {
        if !(n0 >= 0.0) {
            return Err(domain(format!("N0 must be nonnegative, got {n0}")));
        }
        if h == 0 {
            return Err(domain("H must be positive"));
        }
        let threshold = THRESHOLD_FACTOR * energies.es_r.sqrt();
        Ok(Self {
            h,
            su_amplitude: (energies.es_r / h as f64).sqrt(),
            pu_amplitude: (energies.i_pu / h as f64).sqrt(),
            noise_std: (n0 / 2.0).sqrt(),
            threshold_sq: threshold * threshold,
        })
    }

    pub fn h(&self) -> usize {
        self.h
    }

    /// Squared envelope of one cell.
    pub fn envelope_sq<R: Rng + ?Sized>(&self, q: bool, pu_active: bool, rng: &mut R) -> f64 {
        let amplitude = if pu_active {
            self.pu_amplitude
        } else if q {
            self.su_amplitude
        } else {
            0.0
        };
        let phase = rng.random::<f64>() * TAU;
        let n_i: f64 = rng.sample(StandardNormal);
        let n_q: f64 = rng.sample(StandardNormal);
        let x_i = amplitude * phase.cos() + self.noise_std * n_i;
        let x_q = amplitude * phase.sin() + self.noise_std * n_q;
        x_i * x_i + x_q * x_q
    }

    pub fn cell<R: Rng + ?Sized>(&self, q: bool, pu_active: bool, rng: &mut R) -> bool {
        self.envelope_sq(q, pu_active, rng) >= self.threshold_sq
    }

    /// Demodulates every cell of a block. Bit `k * H + j` of `pu_mask` marks
    /// a primary user on band `j` during time step `k`.
    pub fn transmit<R: Rng + ?Sized>(&self, t: &CodeMatrix, pu_mask: u64, rng: &mut R) -> ReceivedMatrix {
        debug_assert_eq!(t.h(), self.h);
        let mut mask = 0u64;
        for idx in 0..self.h * self.h {
            let q = t.mask() >> idx & 1 == 1;
            let pu = pu_mask >> idx & 1 == 1;
            if self.cell(q, pu, rng) {
                mask |= 1 << idx;
            }
        }
        ReceivedMatrix { h: self.h, mask }
    }
}

/// Hard decision for a single cell.
pub fn demodulate_cell<R: Rng + ?Sized>(
    q: bool,
    pu_active: bool,
    energies: DerivedEnergies,
    n0: f64,
    h: usize,
    rng: &mut R,
) -> Result<bool> {
    Ok(Detector::new(energies, n0, h)?.cell(q, pu_active, rng))
}

/// Passes a code matrix through the channel; see [`Detector::transmit`].
pub fn transmit_matrix<R: Rng + ?Sized>(
    t: &CodeMatrix,
    pu_mask: u64,
    energies: DerivedEnergies,
    n0: f64,
    rng: &mut R,
) -> Result<ReceivedMatrix> {
    Ok(Detector::new(energies, n0, t.h())?.transmit(t, pu_mask, rng))
}
