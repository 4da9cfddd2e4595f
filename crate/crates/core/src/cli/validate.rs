//! Self-checks behind `ptc validate`.

use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{
    cell_likelihoods, enumerate_paths, event_codeword, marcum_q1, path_pair_probability, proposition1_check,
    CellLikelihoods, PuProfile,
};
use crate::channel::{Occupancy, PrimaryUser, PuProcess, THRESHOLD_FACTOR};
use crate::codebook::PermutationMapping;
use crate::convolutional::{ConvCode, Trellis};
use crate::error::Result;
use crate::oracle::{exhaustive_ber, exhaustive_path_probability, marcum_q1_quadrature, OracleConfig, MAX_ORACLE_BRANCHES};
use crate::simulator::{self, ExperimentConfig, PuSpec, SweepAxis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Quick,
    Full,
}

/// Deliberate defects for checking that the suite notices them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Shifts the detection probability fed to the analytical path.
    Likelihood,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, body: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    match body() {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult { name, passed: false, detail: format!("error: {e}") },
    }
}

/// Likelihoods as the analytical code sees them, possibly corrupted.
fn analysis_likelihoods(es_r: f64, i_pu: f64, n0: f64, h: usize, fault: Option<Fault>) -> Result<CellLikelihoods> {
    let mut lik = cell_likelihoods(es_r, i_pu, n0, h)?;
    if fault == Some(Fault::Likelihood) {
        lik.p_b1_q1 = (lik.p_b1_q1 * 0.97).clamp(0.0, 1.0);
    }
    Ok(lik)
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// Energies of the default link at `snr_db` with the PU on f2.
fn link_point(h: usize, snr_db: f64) -> Result<(f64, f64, f64)> {
    let config = ExperimentConfig::default();
    let e = config.link.energies_at_snr(snr_db, 1.min(h - 1))?;
    Ok((e.es_r, e.i_pu, config.link.n0))
}

fn transfer_function() -> Result<(bool, String)> {
    let spectrum = enumerate_paths(&Trellis::standard(3)?, 3)?;
    let counts = spectrum.counts();
    Ok((counts == [(16, 1), (20, 2), (24, 4), (28, 8)], format!("{counts:?}")))
}

fn anchor_path() -> Result<(bool, String)> {
    let trellis = Trellis::standard(3)?;
    let spectrum = enumerate_paths(&trellis, 0)?;
    let event = &spectrum.entries[0].paths[0];
    let mapping = trellis.mapping().expect("mapped trellis");
    let matrices: Vec<String> = event.symbols.iter().map(|&s| mapping.matrices()[s].to_string()).collect();
    let zero = mapping.matrices()[0];
    let distances: Vec<u32> = event
        .symbols
        .iter()
        .map(|&s| (mapping.matrices()[s].mask() ^ zero.mask()).count_ones())
        .collect();
    let codeword_ok = event_codeword(&trellis, event).is_some_and(|c| c.is_ok_and(|c| c.weight() > 0));
    let ok = event.inputs == [1, 0, 0] && matrices == ["123", "132", "123"] && distances == [6, 4, 6] && codeword_ok;
    Ok((ok, format!("inputs {:?} matrices {matrices:?} distances {distances:?}", event.inputs)))
}

fn marcum_rayleigh(level: Level) -> Result<(bool, String)> {
    let step = if level == Level::Quick { 0.05 } else { 0.001 };
    let worst = grid(0.0, 10.0, step)
        .into_iter()
        .map(|w| (marcum_q1(0.0, w) - (-w * w / 2.0).exp()).abs())
        .fold(0.0, f64::max);
    Ok((worst <= 1e-10, format!("max error {worst:.3e}")))
}

fn marcum_quadrature(level: Level) -> Result<(bool, String)> {
    let step = if level == Level::Quick { 1.0 } else { 0.25 };
    let g = grid(0.0, 8.0, step);
    let mut worst = (0.0, 0.0, 0.0);
    for &v in &g {
        for &w in &g {
            let err = (marcum_q1(v, w) - marcum_q1_quadrature(v, w)).abs();
            if err > worst.0 {
                worst = (err, v, w);
            }
        }
    }
    Ok((worst.0 <= 1e-9, format!("max error {:.3e} at ({}, {})", worst.0, worst.1, worst.2)))
}

/// Detection probabilities rebuilt from the Rice and Rayleigh tails by
/// quadrature, against what the analytical code uses.
fn likelihood_quadrature(fault: Option<Fault>) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for h in [2, 3, 4] {
        for snr in [0.0, 4.0, 7.0, 10.0] {
            let (es, i_pu, n0) = link_point(h, snr)?;
            let lik = analysis_likelihoods(es, i_pu, n0, h, fault)?;
            let sigma = (n0 / 2.0).sqrt();
            let thr = THRESHOLD_FACTOR * es.sqrt() / sigma;
            let rice = marcum_q1_quadrature((es / h as f64).sqrt() / sigma, thr);
            let rayleigh = marcum_q1_quadrature(0.0, thr);
            worst = worst.max((lik.p_b1_q1 - rice).abs()).max((lik.p_b1_q0 - rayleigh).abs());
        }
    }
    Ok((worst <= 1e-9, format!("max error {worst:.3e}")))
}

/// H = 3 error events up to z = 2 that are short enough for the oracle, at
/// 7 dB with a weak always-on PU on f2: product formula against exact
/// summation.
fn oracle_pair_probability(fault: Option<Fault>) -> Result<(bool, String)> {
    let trellis = Trellis::standard(3)?;
    let (es, _, n0) = link_point(3, 7.0)?;
    // the physical PU saturates its cells; a weak one keeps every pattern possible
    let i_pu = 0.8 * es;
    let exact = cell_likelihoods(es, i_pu, n0, 3)?;
    let lik = analysis_likelihoods(es, i_pu, n0, 3, fault)?;
    let users = vec![PrimaryUser { band: 1, activity: Occupancy::AlwaysOn }];
    let config = OracleConfig::new(trellis.clone(), 1, exact).with_users(users);
    let profile = PuProfile::single(3, 1, 1.0)?;
    let mapping = trellis.mapping().expect("mapped trellis");
    let zero = mapping.matrices()[0];
    let mut worst = 0.0f64;
    for event in enumerate_paths(&trellis, 2)?.paths().filter(|e| e.len() <= MAX_ORACLE_BRANCHES) {
        let tx: Vec<u64> = vec![zero.mask(); event.len()];
        let comp: Vec<u64> = event.symbols.iter().map(|&s| mapping.matrices()[s].mask()).collect();
        let oracle = exhaustive_path_probability(&tx, &comp, &config)?;
        let unpack = |masks: &[u64]| -> Vec<u8> {
            masks.iter().flat_map(|&m| (0..9).map(move |i| (m >> i & 1) as u8)).collect()
        };
        let bound = path_pair_probability(&unpack(&tx), &unpack(&comp), &lik, &profile)?;
        if !(oracle > 0.0) {
            return Ok((false, "pattern has zero probability".into()));
        }
        worst = worst.max((oracle - bound).abs() / oracle);
    }
    Ok((worst <= 1e-12, format!("max relative gap {worst:.3e}")))
}

fn proposition1(fault: Option<Fault>) -> Result<(bool, String)> {
    let (es, i_pu, n0) = link_point(3, 4.0)?;
    let lik = analysis_likelihoods(es, i_pu, n0, 3, fault)?;
    let trellis = Trellis::standard(3)?;
    let spectrum = enumerate_paths(&trellis, 3)?;
    let rows = proposition1_check(&trellis, &spectrum, &lik, &PuProfile::single(3, 1, 0.35)?, 100, 11)?;
    // H = 2 with a band-varying, column-varying occupancy breaks row locality
    let two = Trellis::build(ConvCode::pass_through(), PermutationMapping::two_band())?;
    let (es2, i_pu2, n02) = link_point(2, 0.0)?;
    let lik2 = analysis_likelihoods(es2, i_pu2, n02, 2, fault)?;
    let broken = PuProfile::per_cell(2, vec![0.0, 0.9, 0.0, 0.1])?;
    let cols = proposition1_check(&two, &enumerate_paths(&two, 0)?, &lik2, &broken, 100, 12)?;
    Ok((
        rows.spread <= 1e-12 && cols.spread > 1e-6,
        format!("row-constant spread {:.3e}, violated spread {:.3e}", rows.spread, cols.spread),
    ))
}

/// Long-run On fraction of random chains. The standard error accounts for
/// the lag correlation `1 - r - p` of the chain.
pub fn markov_on_fraction(steps: u64, pairs: usize, seed: u64) -> Result<Vec<(f64, f64, f64, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..pairs)
        .map(|_| {
            let r = rng.random_range(0.05..0.95);
            let p = rng.random_range(0.05..0.95);
            let user = PrimaryUser { band: 0, activity: Occupancy::markov(r, p)? };
            let mut pu = PuProcess::new(user, &mut rng);
            let on = (0..steps).filter(|_| pu.step(&mut rng)).count() as f64 / steps as f64;
            let target = p / (r + p);
            let lambda = 1.0 - r - p;
            let sigma = (target * (1.0 - target) / steps as f64 * (1.0 + lambda) / (1.0 - lambda)).sqrt();
            Ok((r, p, on, sigma))
        })
        .collect()
}

fn markov(level: Level) -> Result<(bool, String)> {
    let steps = if level == Level::Quick { 100_000 } else { 1_000_000 };
    let runs = markov_on_fraction(steps, 10, 5)?;
    let worst = runs
        .iter()
        .map(|&(r, p, on, sigma)| (on - p / (r + p)).abs() / sigma)
        .fold(0.0, f64::max);
    Ok((worst <= 3.0, format!("worst deviation {worst:.2} sigma over {} chains", runs.len())))
}

/// Simulated BER of a short block against the exact value.
fn oracle_monte_carlo(h: usize, bits: usize, packets: u64, workers: usize) -> Result<(bool, String)> {
    let snr = 7.0;
    let config = ExperimentConfig {
        link: crate::channel::LinkParams { h, ..Default::default() },
        pu: vec![PuSpec::on_band(1, Occupancy::AlwaysOn)],
        packet_bits: bits,
        packets,
        sweep: simulator::Sweep { axis: SweepAxis::Snr, values: vec![snr], ..Default::default() },
        seed: 99,
        workers,
        ..Default::default()
    };
    let point = simulator::run_hfsk_ber(&config)?.remove(0);
    let (es, i_pu, n0) = link_point(h, snr)?;
    let oracle = OracleConfig::new(config.trellis()?, bits, cell_likelihoods(es, i_pu, n0, h)?)
        .with_users(config.primary_users(snr)?);
    let exact = exhaustive_ber(&oracle)?.ber;
    let (lo, hi) = crate::stats::wilson_interval(point.bit_errors, point.bits, simulator::CONFIDENCE)?;
    Ok((
        (lo..=hi).contains(&exact),
        format!("H={h}: exact {exact:.5e}, simulated {:.5e} in [{lo:.5e}, {hi:.5e}]", point.ber),
    ))
}

/// Runs the suite. `quick` stays well under a minute on one core.
pub fn run_validation(level: Level, fault: Option<Fault>, workers: usize) -> Vec<CheckResult> {
    let mut out = vec![
        check("transfer_function", transfer_function),
        check("anchor_path", anchor_path),
        check("marcum_rayleigh", || marcum_rayleigh(level)),
        check("marcum_quadrature", || marcum_quadrature(level)),
        check("likelihood_quadrature", || likelihood_quadrature(fault)),
        check("oracle_pair_probability", || oracle_pair_probability(fault)),
        check("proposition1", || proposition1(fault)),
        check("markov_on_fraction", || markov(level)),
    ];
    if level == Level::Full {
        out.push(check("oracle_monte_carlo_h2", || oracle_monte_carlo(2, 3, 400_000, workers)));
        out.push(check("oracle_monte_carlo_h3", || oracle_monte_carlo(3, 1, 400_000, workers)));
    }
    out
}
