use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Free-space received power `P_T * (sqrt(G_l) * lambda / (4 pi d))^2` with
/// `lambda = C / f`.
pub fn received_power(p_t: f64, f: f64, d: f64, g_l: f64) -> Result<f64> {
    received_power_with(SPEED_OF_LIGHT, p_t, f, d, g_l)
}

fn received_power_with(c: f64, p_t: f64, f: f64, d: f64, g_l: f64) -> Result<f64> {
    if !(f > 0.0) {
        return Err(domain(format!("frequency must be positive, got {f}")));
    }
    if !(d > 0.0) {
        return Err(domain(format!("distance must be positive, got {d}")));
    }
    let lambda = c / f;
    let gain = g_l.sqrt() * lambda / (4.0 * std::f64::consts::PI * d);
    Ok(p_t * gain * gain)
}

pub fn snr_db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Radio-layer scalars of the secondary link and the primary transmitter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkParams {
    /// SU transmit power at `f1`, watts.
    pub p_t_su: f64,
    /// PU transmit power, watts.
    pub p_t_pu: f64,
    /// Noise power spectral density; each quadrature has variance `n0 / 2`.
    pub n0: f64,
    /// Lowest band centre, Hz.
    pub f1: f64,
    /// Band spacing, Hz.
    pub band_spacing: f64,
    /// Band count `H`.
    pub h: usize,
    /// Symbol (time step) duration, seconds.
    pub t_s: f64,
    /// SU transmitter to SU receiver, metres.
    pub d_su: f64,
    /// PU transmitter to SU receiver, metres. Also used for the SU to PU
    /// receiver path in the SINR guard.
    pub d_pu: f64,
    /// Antenna gain product.
    pub g_l: f64,
    /// Speed of light, m/s.
    pub c: f64,
    /// Minimum SINR at the PU receiver (linear ratio).
    pub sinr_min: f64,
}

impl Default for LinkParams {
    fn default() -> Self {
        let band_spacing = 6.0e6;
        Self {
            p_t_su: 4.0e-3,
            p_t_pu: 1.0e6,
            n0: 2.5e-14,
            f1: 56.0e6,
            band_spacing,
            h: 3,
            t_s: 1.0 / band_spacing,
            d_su: 10.0,
            d_pu: 10.0,
            g_l: 1.0,
            c: SPEED_OF_LIGHT,
            sinr_min: 10.0,
        }
    }
}

/// Received SU symbol energy and PU interference energy per symbol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedEnergies {
    pub es_r: f64,
    pub i_pu: f64,
}

impl DerivedEnergies {
    pub fn new(es_r: f64, i_pu: f64) -> Result<Self> {
        if !(es_r >= 0.0) || !(i_pu >= 0.0) {
            return Err(domain(format!("energies must be nonnegative: es_r={es_r}, i_pu={i_pu}")));
        }
        Ok(Self { es_r, i_pu })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SinrCheck {
    pub sinr: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("p_t_su", self.p_t_su),
            ("p_t_pu", self.p_t_pu),
            ("n0", self.n0),
            ("f1", self.f1),
            ("t_s", self.t_s),
            ("d_su", self.d_su),
            ("d_pu", self.d_pu),
            ("g_l", self.g_l),
            ("c", self.c),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.band_spacing >= 0.0) {
            return Err(domain("band_spacing must be nonnegative"));
        }
        if self.h < 2 || self.h > crate::codebook::MAX_BANDS {
            return Err(domain(format!("H = {} outside 2..={}", self.h, crate::codebook::MAX_BANDS)));
        }
        if !(self.sinr_min >= 0.0) {
            return Err(domain("sinr_min must be nonnegative"));
        }
        Ok(())
    }

    /// Centre frequency of zero-based band `j`.
    pub fn band_frequency(&self, band: usize) -> f64 {
        self.f1 + band as f64 * self.band_spacing
    }

    pub fn received_power(&self, p_t: f64, f: f64, d: f64) -> Result<f64> {
        received_power_with(self.c, p_t, f, d, self.g_l)
    }

    /// Received SU power common to every band after power adjustment.
    pub fn su_received_power(&self) -> Result<f64> {
        self.received_power(self.p_t_su, self.f1, self.d_su)
    }

    /// PU interference power at the SU receiver when the PU occupies `band`.
    pub fn pu_interference_power(&self, band: usize) -> Result<f64> {
        self.received_power(self.p_t_pu, self.band_frequency(band), self.d_pu)
    }

    /// Energies from the physical powers; the PU is placed on `pu_band`.
    pub fn energies(&self, pu_band: usize) -> Result<DerivedEnergies> {
        DerivedEnergies::new(
            self.su_received_power()? * self.t_s,
            self.pu_interference_power(pu_band)? * self.t_s,
        )
    }

    /// Energies for a target `Es_r / N0` in dB; the PU term stays physical.
    pub fn energies_at_snr(&self, snr_db: f64, pu_band: usize) -> Result<DerivedEnergies> {
        DerivedEnergies::new(
            self.n0 * snr_db_to_linear(snr_db),
            self.pu_interference_power(pu_band)? * self.t_s,
        )
    }

    /// `Es_r / N0` in dB implied by the configured SU power.
    pub fn snr_db(&self) -> Result<f64> {
        Ok(10.0 * (self.su_received_power()? * self.t_s / self.n0).log10())
    }

    /// SU power at `f1` that yields `snr_db` at the receiver.
    pub fn su_power_for_snr(&self, snr_db: f64) -> Result<f64> {
        let unit = self.received_power(1.0, self.f1, self.d_su)?;
        Ok(self.n0 * snr_db_to_linear(snr_db) / (self.t_s * unit))
    }

    pub fn with_snr(&self, snr_db: f64) -> Result<Self> {
        Ok(Self { p_t_su: self.su_power_for_snr(snr_db)?, ..self.clone() })
    }

    /// SU interference at the PU receiver: the strongest per-band emission
    /// after power adjustment, over the `d_pu` path.
    pub fn su_interference_at_pu(&self) -> Result<f64> {
        let powers = per_band_power_adjust(self)?;
        powers
            .iter()
            .enumerate()
            .map(|(j, &p)| self.received_power(p, self.band_frequency(j), self.d_pu))
            .try_fold(0.0f64, |acc, p| p.map(|p| acc.max(p)))
    }
}

/// Per-band SU transmit powers that equalise the received power across bands
/// at the level reached on `f1` with `p_t_su`.
pub fn per_band_power_adjust(params: &LinkParams) -> Result<Vec<f64>> {
    let target = params.su_received_power()?;
    (0..params.h.max(1))
        .map(|j| {
            let unit = params.received_power(1.0, params.band_frequency(j), params.d_su)?;
            Ok(target / unit)
        })
        .collect()
}

/// SINR at the PU receiver, `P_R^PU / (N0 + P_I^SU)`, against `sinr_min`.
/// The PU is taken to operate on `f2`.
pub fn check_pu_sinr(params: &LinkParams, p_i_su: f64) -> Result<SinrCheck> {
    let p_r_pu = params.received_power(params.p_t_pu, params.band_frequency(1), params.d_pu)?;
    let sinr = p_r_pu / (params.n0 + p_i_su);
    Ok(SinrCheck { sinr, threshold: params.sinr_min, passed: sinr >= params.sinr_min })
}
