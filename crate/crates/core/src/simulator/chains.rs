//! Per-packet transmission chains.

use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{EnergyNormalization, ExperimentConfig, PuSpec};
use super::{info_bit_energy, matrix_energy, random_bits};
use crate::channel::{DerivedEnergies, Detector, PrimaryUser, PuProcess};
use crate::convolutional::{ConvCode, Trellis};
use crate::decoder::{viterbi_decode, viterbi_decode_bits};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PacketOutcome {
    pub bit_errors: u64,
    pub payload_bits: u64,
}

/// Running primary users; each covers a set of bands.
struct Activity {
    users: Vec<(PuProcess, u64)>,
}

impl Activity {
    fn start(specs: &[PuSpec], rng: &mut ChaCha8Rng) -> Self {
        let users = specs
            .iter()
            .map(|s| {
                let user = PrimaryUser { band: s.bands[0], activity: s.activity };
                let bands = s.bands.iter().fold(0u64, |m, &b| m | 1 << b);
                (PuProcess::new(user, rng), bands)
            })
            .collect();
        Self { users }
    }

    /// Busy bands for the current time step, then one step forward.
    fn advance(&mut self, rng: &mut ChaCha8Rng) -> u64 {
        let mut busy = 0;
        for (process, bands) in &mut self.users {
            if process.is_on() {
                busy |= *bands;
            }
            process.step(rng);
        }
        busy
    }

    fn any_on(&self) -> bool {
        self.users.iter().any(|(p, _)| p.is_on())
    }
}

/// PU interference energy per symbol interval, taken at the first occupied
/// band (f2 when no user is configured).
fn interference_energy(config: &ExperimentConfig, specs: &[PuSpec]) -> Result<f64> {
    let band = specs.first().map_or(1, |s| s.bands[0]).min(config.h() - 1);
    Ok(config.link.pu_interference_power(band)? * config.link.t_s)
}

fn envelope_sq(amplitude: f64, noise_std: f64, rng: &mut ChaCha8Rng) -> f64 {
    let phase = rng.random::<f64>() * TAU;
    let n_i: f64 = rng.sample(StandardNormal);
    let n_q: f64 = rng.sample(StandardNormal);
    let x = amplitude * phase.cos() + noise_std * n_i;
    let y = amplitude * phase.sin() + noise_std * n_q;
    x * x + y * y
}

fn count_errors(sent: &[u8], decoded: &[u8]) -> u64 {
    sent.iter().zip(decoded).filter(|(a, b)| a != b).count() as u64
}

/// Encode, map, transmit cell by cell, Viterbi-decode.
pub struct HfskChain {
    trellis: Trellis,
    detector: Detector,
    specs: Vec<PuSpec>,
    packet_bits: usize,
    matrix_energy: f64,
}

impl HfskChain {
    pub fn new(config: &ExperimentConfig, x: f64) -> Result<Self> {
        let specs = config.pu_at(x)?;
        let es = matrix_energy(config, config.snr_at(x));
        let energies = DerivedEnergies::new(es, interference_energy(config, &specs)?)?;
        Ok(Self {
            trellis: config.trellis()?,
            detector: Detector::new(energies, config.link.n0, config.h())?,
            specs,
            packet_bits: config.packet_bits,
            matrix_energy: es,
        })
    }

    pub fn energy_per_info_bit(&self) -> f64 {
        self.matrix_energy * self.trellis.stage_count(self.packet_bits) as f64 / self.packet_bits as f64
    }

    pub fn packet(&self, rng: &mut ChaCha8Rng) -> Result<PacketOutcome> {
        let h = self.detector.h();
        let bits = random_bits(rng, self.packet_bits);
        let symbols = self.trellis.code().encode(&bits, true)?;
        let mapping = self.trellis.mapping().expect("mapped trellis");
        let mut activity = Activity::start(&self.specs, rng);
        let received: Vec<_> = symbols
            .iter()
            .map(|&s| {
                let mut pu_mask = 0u64;
                for k in 0..h {
                    let busy = activity.advance(rng);
                    for band in (0..h).filter(|&b| busy >> b & 1 == 1) {
                        pu_mask |= 1 << (k * h + band);
                    }
                }
                self.detector.transmit(&mapping.matrices()[s], pu_mask, rng)
            })
            .collect();
        let decoded = viterbi_decode(&self.trellis, &received, self.packet_bits)?;
        Ok(PacketOutcome { bit_errors: count_errors(&bits, &decoded.bits), payload_bits: self.packet_bits as u64 })
    }
}

/// Uncoded opportunistic M-FSK. The licensed bands are sensed at the start
/// of each slot: if idle the slot carries `L` bits of 4-FSK over all four
/// bands, otherwise `L / 2` bits of BFSK over the two free bands. A slot
/// always lasts `L / 2` symbols and the primary user may switch within it.
pub struct MfskChain {
    specs: Vec<PuSpec>,
    free: [usize; 2],
    packet_bits: usize,
    amp4: f64,
    amp2: f64,
    pu_amplitude: f64,
    noise_std: f64,
}

impl MfskChain {
    pub fn new(config: &ExperimentConfig, x: f64) -> Result<Self> {
        let specs = config.pu_at(x)?;
        let h = config.h();
        let licensed = specs.iter().flat_map(|s| s.bands.iter()).fold(0u64, |m, &b| m | 1 << b);
        let free: Vec<usize> = (0..h).filter(|&b| licensed >> b & 1 == 0).take(2).collect();
        let free: [usize; 2] = free
            .try_into()
            .map_err(|_| Error::Config("the opportunistic baseline needs two free bands".into()))?;
        let snr = config.snr_at(x);
        let (e4, e2) = match config.energy {
            EnergyNormalization::PerInfoBit => {
                let eb = info_bit_energy(config, snr)?;
                (2.0 * eb, eb)
            }
            EnergyNormalization::PerCodedSymbol => {
                let es = matrix_energy(config, snr);
                (es, es)
            }
        };
        Ok(Self {
            pu_amplitude: (interference_energy(config, &specs)? / h as f64).sqrt(),
            specs,
            free,
            packet_bits: config.packet_bits,
            amp4: e4.sqrt(),
            amp2: e2.sqrt(),
            noise_std: (config.link.n0 / 2.0).sqrt(),
        })
    }

    /// `(4-FSK, BFSK)` transmitted energy per information bit.
    pub fn energy_per_info_bit(&self) -> (f64, f64) {
        let symbols = (self.packet_bits / 2) as f64;
        let e4 = self.amp4 * self.amp4 * symbols / self.packet_bits as f64;
        let e2 = self.amp2 * self.amp2 * symbols / (self.packet_bits / 2) as f64;
        (e4, e2)
    }

    fn decide(&self, bands: &[usize], sent: usize, amplitude: f64, busy: u64, rng: &mut ChaCha8Rng) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, &band) in bands.iter().enumerate() {
            let a = if busy >> band & 1 == 1 {
                self.pu_amplitude
            } else if i == sent {
                amplitude
            } else {
                0.0
            };
            let e = envelope_sq(a, self.noise_std, rng);
            if e > best.1 {
                best = (i, e);
            }
        }
        best.0
    }

    pub fn packet(&self, rng: &mut ChaCha8Rng) -> Result<PacketOutcome> {
        let mut activity = Activity::start(&self.specs, rng);
        let symbols = self.packet_bits / 2;
        let mut errors = 0u64;
        if !activity.any_on() {
            let bits = random_bits(rng, self.packet_bits);
            let all = [0, 1, 2, 3];
            for pair in bits.chunks(2) {
                let sent = (pair[0] << 1 | pair[1]) as usize;
                let busy = activity.advance(rng);
                let got = self.decide(&all, sent, self.amp4, busy, rng);
                errors += (sent ^ got).count_ones() as u64;
            }
            Ok(PacketOutcome { bit_errors: errors, payload_bits: self.packet_bits as u64 })
        } else {
            let bits = random_bits(rng, symbols);
            for &b in &bits {
                let busy = activity.advance(rng);
                let got = self.decide(&self.free, b as usize, self.amp2, busy, rng);
                errors += (got != b as usize) as u64;
            }
            Ok(PacketOutcome { bit_errors: errors, payload_bits: symbols as u64 })
        }
    }
}

/// Rate-1/2 (7,5) coded BPSK, coded bits sent in parallel over all bands
/// (bit `k` on band `k mod H` at symbol time `k / H`). A busy band adds the
/// PU amplitude at a uniform phase, projected on the decision axis.
pub struct BpskChain {
    trellis: Trellis,
    specs: Vec<PuSpec>,
    h: usize,
    packet_bits: usize,
    amplitude: f64,
    pu_amplitude: f64,
    noise_std: f64,
}

impl BpskChain {
    pub fn new(config: &ExperimentConfig, x: f64) -> Result<Self> {
        let specs = config.pu_at(x)?;
        let code = ConvCode::rate_half();
        let coded = (code.stage_count(config.packet_bits) * code.outputs()) as f64;
        let snr = config.snr_at(x);
        let energy = match config.energy {
            EnergyNormalization::PerInfoBit => info_bit_energy(config, snr)? * config.packet_bits as f64 / coded,
            EnergyNormalization::PerCodedSymbol => matrix_energy(config, snr),
        };
        let h = config.h();
        Ok(Self {
            trellis: Trellis::binary(code),
            pu_amplitude: (interference_energy(config, &specs)? / h as f64).sqrt(),
            specs,
            h,
            packet_bits: config.packet_bits,
            amplitude: energy.sqrt(),
            noise_std: (config.link.n0 / 2.0).sqrt(),
        })
    }

    pub fn energy_per_info_bit(&self) -> f64 {
        let coded = self.trellis.stage_count(self.packet_bits) * self.trellis.code().outputs();
        self.amplitude * self.amplitude * coded as f64 / self.packet_bits as f64
    }

    pub fn packet(&self, rng: &mut ChaCha8Rng) -> Result<PacketOutcome> {
        let bits = random_bits(rng, self.packet_bits);
        let code = self.trellis.code();
        let n = code.outputs();
        let coded: Vec<u8> = code
            .encode(&bits, true)?
            .iter()
            .flat_map(|&s| (0..n).rev().map(move |j| (s >> j & 1) as u8))
            .collect();
        let mut activity = Activity::start(&self.specs, rng);
        let mut hard = Vec::with_capacity(coded.len());
        for chunk in coded.chunks(self.h) {
            let busy = activity.advance(rng);
            for (band, &c) in chunk.iter().enumerate() {
                let mut y = if c == 0 { self.amplitude } else { -self.amplitude };
                if busy >> band & 1 == 1 {
                    y += self.pu_amplitude * (rng.random::<f64>() * TAU).cos();
                }
                y += self.noise_std * rng.sample::<f64, _>(StandardNormal);
                hard.push((y < 0.0) as u8);
            }
        }
        let decoded = viterbi_decode_bits(&self.trellis, &hard, self.packet_bits)?;
        Ok(PacketOutcome { bit_errors: count_errors(&bits, &decoded.bits), payload_bits: self.packet_bits as u64 })
    }
}
