//! Monte Carlo experiments: the H-FSK chain and two baselines.

mod chains;
mod config;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use chains::{HfskChain, MfskChain, BpskChain, PacketOutcome};
pub use config::{CodeSpec, EnergyNormalization, ExperimentConfig, PuSpec, Scheme, Sweep, SweepAxis};

use crate::analysis::throughput;
use crate::channel::{check_pu_sinr, snr_db_to_linear};
use crate::error::{Error, Result};
use crate::rng::{domain_tag, packet_rng};
use crate::stats::{wilson_interval, z_value};

/// Confidence level of every reported interval.
pub const CONFIDENCE: f64 = 0.99;
/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "PTC_WORKERS";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub scheme: Scheme,
    pub h: usize,
    pub x_value: f64,
    pub ber: f64,
    pub ber_ci_lo: f64,
    pub ber_ci_hi: f64,
    /// Mean delivered bits per second.
    pub throughput: f64,
    pub throughput_ci_lo: f64,
    pub throughput_ci_hi: f64,
    pub packets: u64,
    pub packet_errors: u64,
    pub bit_errors: u64,
    pub bits: u64,
    pub seed: u64,
}

/// Integer tallies of one grid point; summing is order independent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Tally {
    pub packets: u64,
    pub packet_errors: u64,
    pub bit_errors: u64,
    pub bits: u64,
    pub delivered: u64,
    pub delivered_sq: u128,
}

impl Tally {
    fn add(mut self, other: Self) -> Self {
        self.packets += other.packets;
        self.packet_errors += other.packet_errors;
        self.bit_errors += other.bit_errors;
        self.bits += other.bits;
        self.delivered += other.delivered;
        self.delivered_sq += other.delivered_sq;
        self
    }

    fn from_outcome(o: PacketOutcome) -> Self {
        let delivered = if o.bit_errors == 0 { o.payload_bits } else { 0 };
        Self {
            packets: 1,
            packet_errors: (o.bit_errors > 0) as u64,
            bit_errors: o.bit_errors,
            bits: o.payload_bits,
            delivered,
            delivered_sq: delivered as u128 * delivered as u128,
        }
    }

    fn point(&self, scheme: Scheme, h: usize, x_value: f64, rp: f64, seed: u64) -> Result<CurvePoint> {
        let (ber_ci_lo, ber_ci_hi) = wilson_interval(self.bit_errors, self.bits, CONFIDENCE)?;
        let n = self.packets as f64;
        let mean = self.delivered as f64 / n;
        let var = if self.packets > 1 {
            ((self.delivered_sq as f64 - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        let half = z_value(CONFIDENCE)? * (var / n).sqrt();
        Ok(CurvePoint {
            scheme,
            h,
            x_value,
            ber: if self.bits == 0 { 0.0 } else { self.bit_errors as f64 / self.bits as f64 },
            ber_ci_lo,
            ber_ci_hi,
            throughput: rp * mean,
            throughput_ci_lo: rp * (mean - half).max(0.0),
            throughput_ci_hi: rp * (mean + half),
            packets: self.packets,
            packet_errors: self.packet_errors,
            bit_errors: self.bit_errors,
            bits: self.bits,
            seed,
        })
    }
}

/// Worker count: the configured value, else `PTC_WORKERS`, else the number
/// of available cores.
pub fn resolve_workers(configured: usize) -> usize {
    if configured > 0 {
        return configured;
    }
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(resolve_workers(workers))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Refuses operating points that would break the primary receiver's SINR
/// floor, unless overridden.
pub fn sinr_guard(config: &ExperimentConfig, snr_db: f64) -> Result<()> {
    if config.override_sinr_guard {
        return Ok(());
    }
    let link = config.link.with_snr(snr_db)?;
    let check = check_pu_sinr(&link, link.su_interference_at_pu()?)?;
    if check.passed {
        Ok(())
    } else {
        Err(Error::SinrGuard { sinr: check.sinr, threshold: check.threshold })
    }
}

/// Energy of one H-FSK code matrix at `snr_db`.
pub fn matrix_energy(config: &ExperimentConfig, snr_db: f64) -> f64 {
    config.link.n0 * snr_db_to_linear(snr_db)
}

/// H-FSK energy per information bit at `snr_db`, the common budget under
/// [`EnergyNormalization::PerInfoBit`].
pub fn info_bit_energy(config: &ExperimentConfig, snr_db: f64) -> Result<f64> {
    let trellis = config.trellis()?;
    let stages = trellis.stage_count(config.packet_bits) as f64;
    Ok(matrix_energy(config, snr_db) * stages / config.packet_bits as f64)
}

/// Runs `packet` over every grid point of `config`. Packet `k` of point `i`
/// draws from its own stream, so the result does not depend on the worker
/// count.
fn run_grid<F>(config: &ExperimentConfig, scheme: Scheme, h: usize, make: F) -> Result<Vec<CurvePoint>>
where
    F: Fn(f64) -> Result<Box<dyn Fn(&mut ChaCha8Rng) -> Result<PacketOutcome> + Sync + Send>>,
{
    config.validate()?;
    let pool = pool(config.workers)?;
    let domain = domain_tag(scheme.label());
    config
        .sweep
        .values
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            sinr_guard(config, config.snr_at(x))?;
            let packet = make(x)?;
            let tally = pool.install(|| {
                (0..config.packets)
                    .into_par_iter()
                    .map(|k| {
                        let mut rng = packet_rng(config.seed, domain, i as u64, k);
                        packet(&mut rng).map(Tally::from_outcome)
                    })
                    .try_reduce(Tally::default, |a, b| Ok(a.add(b)))
            })?;
            tally.point(scheme, h, x, config.rp, config.seed)
        })
        .collect()
}

/// BER and throughput of the H-FSK chain over the sweep.
pub fn run_hfsk_ber(config: &ExperimentConfig) -> Result<Vec<CurvePoint>> {
    if config.scheme != Scheme::Hfsk {
        return Err(Error::Config(format!("scheme {} is not hfsk", config.scheme.label())));
    }
    run_grid(config, Scheme::Hfsk, config.h(), |x| {
        let chain = HfskChain::new(config, x)?;
        Ok(Box::new(move |rng: &mut ChaCha8Rng| chain.packet(rng)))
    })
}

/// Sensing-based 4-FSK / BFSK baseline.
pub fn run_opportunistic_mfsk(config: &ExperimentConfig) -> Result<Vec<CurvePoint>> {
    if config.scheme != Scheme::OpportunisticMfsk {
        return Err(Error::Config(format!("scheme {} is not opportunistic_mfsk", config.scheme.label())));
    }
    run_grid(config, Scheme::OpportunisticMfsk, config.h(), |x| {
        let chain = MfskChain::new(config, x)?;
        Ok(Box::new(move |rng: &mut ChaCha8Rng| chain.packet(rng)))
    })
}

/// Convolutionally coded BPSK over parallel bands.
pub fn run_coded_bpsk_ofdm(config: &ExperimentConfig) -> Result<Vec<CurvePoint>> {
    if config.scheme != Scheme::CodedBpskOfdm {
        return Err(Error::Config(format!("scheme {} is not coded_bpsk_ofdm", config.scheme.label())));
    }
    run_grid(config, Scheme::CodedBpskOfdm, config.h(), |x| {
        let chain = BpskChain::new(config, x)?;
        Ok(Box::new(move |rng: &mut ChaCha8Rng| chain.packet(rng)))
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThroughputPoint {
    pub point: CurvePoint,
    /// `(1 - PER) * Rp * L` with `PER = 1 - (1 - BER)^L` from the simulated
    /// BER; reported for H-FSK only.
    pub analytic: Option<f64>,
}

/// Throughput curve of the configured scheme: every simulated packet fills
/// one slot of `1 / Rp` seconds.
pub fn run_throughput(config: &ExperimentConfig) -> Result<Vec<ThroughputPoint>> {
    let points = match config.scheme {
        Scheme::Hfsk => run_hfsk_ber(config)?,
        Scheme::OpportunisticMfsk => run_opportunistic_mfsk(config)?,
        Scheme::CodedBpskOfdm => run_coded_bpsk_ofdm(config)?,
    };
    points
        .into_iter()
        .map(|point| {
            let analytic = match config.scheme {
                Scheme::Hfsk => Some(throughput(point.ber, config.packet_bits, config.rp)?),
                _ => None,
            };
            Ok(ThroughputPoint { point, analytic })
        })
        .collect()
}

/// First grid crossing of `b - a` from negative to nonnegative, linearly
/// interpolated.
pub fn crossover(x: &[f64], a: &[f64], b: &[f64]) -> Option<f64> {
    let diff: Vec<f64> = a.iter().zip(b).map(|(a, b)| b - a).collect();
    (1..diff.len()).find_map(|i| {
        let (d0, d1) = (diff[i - 1], diff[i]);
        if d0 < 0.0 && d1 >= 0.0 {
            Some(x[i - 1] + (x[i] - x[i - 1]) * (-d0) / (d1 - d0))
        } else {
            None
        }
    })
}

/// Number of sign changes of `b - a` along the grid.
pub fn sign_changes(a: &[f64], b: &[f64]) -> usize {
    let signs: Vec<bool> = a.iter().zip(b).map(|(a, b)| b - a >= 0.0).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultiPuScenario {
    pub label: String,
    pub h: usize,
    pub pu: Vec<PuSpec>,
}

impl MultiPuScenario {
    /// `count` users on f2, f1, f3 in that order, all with `activity`.
    pub fn standard(h: usize, count: usize, activity: crate::channel::Occupancy, tag: &str) -> Result<Self> {
        const ORDER: [usize; 3] = [1, 0, 2];
        if count == 0 || count > ORDER.len() || ORDER[..count].iter().any(|&b| b >= h) {
            return Err(Error::Config(format!("{count} primary users do not fit H = {h}")));
        }
        Ok(Self {
            label: format!("h{h}_pu{count}_{tag}"),
            h,
            pu: ORDER[..count].iter().map(|&b| PuSpec::on_band(b, activity)).collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultiPuCurve {
    pub scenario: MultiPuScenario,
    pub points: Vec<CurvePoint>,
}

/// H-FSK BER sweeps of `base` for each scenario's band count and users.
pub fn run_multi_pu_ber(base: &ExperimentConfig, scenarios: &[MultiPuScenario]) -> Result<Vec<MultiPuCurve>> {
    scenarios
        .iter()
        .map(|scenario| {
            let mut config = base.clone();
            config.scheme = Scheme::Hfsk;
            config.link.h = scenario.h;
            config.pu = scenario.pu.clone();
            config.code = None;
            config.mapping_file = None;
            Ok(MultiPuCurve { scenario: scenario.clone(), points: run_hfsk_ber(&config)? })
        })
        .collect()
}

/// Writes points with the columns `scheme, H, x_value, ber, ber_ci_lo,
/// ber_ci_hi, throughput, packets, seed`.
pub fn write_csv<W: std::io::Write>(writer: W, points: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["scheme", "H", "x_value", "ber", "ber_ci_lo", "ber_ci_hi", "throughput", "packets", "seed"])?;
    for p in points {
        w.write_record([
            p.scheme.label().to_string(),
            p.h.to_string(),
            p.x_value.to_string(),
            format!("{:e}", p.ber),
            format!("{:e}", p.ber_ci_lo),
            format!("{:e}", p.ber_ci_hi),
            p.throughput.to_string(),
            p.packets.to_string(),
            p.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Uniformly random information bits.
pub(crate) fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random::<bool>() as u8).collect()
}
