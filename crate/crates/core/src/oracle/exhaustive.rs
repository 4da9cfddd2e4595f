use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::CellLikelihoods;
use crate::channel::{Occupancy, PrimaryUser, ReceivedMatrix};
use crate::convolutional::Trellis;
use crate::decoder::viterbi_decode;
use crate::error::{Error, Result};

/// Largest block the path-probability oracle accepts.
pub const MAX_ORACLE_BRANCHES: usize = 4;
/// Default limit on `received patterns x codewords`.
pub const DEFAULT_BUDGET: u128 = 1 << 26;

#[derive(Clone, Debug)]
pub struct OracleConfig {
    pub trellis: Trellis,
    /// Information bits per block.
    pub info_bits: usize,
    pub likelihoods: CellLikelihoods,
    /// Primary users on distinct bands. Markov users change state once per
    /// time step and start from their steady state.
    pub users: Vec<PrimaryUser>,
    pub budget: u128,
}

impl OracleConfig {
    pub fn new(trellis: Trellis, info_bits: usize, likelihoods: CellLikelihoods) -> Self {
        Self { trellis, info_bits, likelihoods, users: Vec::new(), budget: DEFAULT_BUDGET }
    }

    pub fn with_users(mut self, users: Vec<PrimaryUser>) -> Self {
        self.users = users;
        self
    }

    pub fn with_budget(mut self, budget: u128) -> Self {
        self.budget = budget;
        self
    }

    fn h(&self) -> Result<usize> {
        self.trellis
            .mapping()
            .map(|m| m.h())
            .ok_or_else(|| Error::Config("oracle needs a permutation mapping".into()))
    }
}

/// Joint on/off chain of all primary users, states packed one bit per user.
#[derive(Clone, Debug)]
struct JointChain {
    /// User index occupying each band.
    band_user: Vec<Option<usize>>,
    initial: Vec<f64>,
    /// `transition[from * n + to]`
    transition: Vec<f64>,
}

impl JointChain {
    fn new(h: usize, users: &[PrimaryUser]) -> Result<Self> {
        if users.len() > 8 {
            return Err(Error::Config(format!("{} primary users, at most 8 supported", users.len())));
        }
        let mut band_user = vec![None; h];
        for (i, u) in users.iter().enumerate() {
            let slot = band_user
                .get_mut(u.band)
                .ok_or_else(|| Error::Config(format!("primary user on band {} outside 0..{h}", u.band)))?;
            if slot.is_some() {
                return Err(Error::Config(format!("two primary users on band {}", u.band)));
            }
            *slot = Some(i);
        }
        let per_user: Vec<([f64; 2], [[f64; 2]; 2])> = users
            .iter()
            .map(|u| match u.activity {
                Occupancy::AlwaysOn => Ok(([0.0, 1.0], [[0.0, 1.0], [0.0, 1.0]])),
                Occupancy::AlwaysOff => Ok(([1.0, 0.0], [[1.0, 0.0], [1.0, 0.0]])),
                Occupancy::Markov { r, p } => {
                    let (off, on) = u.activity.steady_state()?;
                    Ok(([off, on], [[1.0 - p, p], [r, 1.0 - r]]))
                }
            })
            .collect::<Result<_>>()?;
        let n = 1usize << users.len();
        let bit = |s: usize, i: usize| s >> i & 1;
        let initial = (0..n)
            .map(|s| per_user.iter().enumerate().map(|(i, (init, _))| init[bit(s, i)]).product())
            .collect();
        let transition = (0..n * n)
            .map(|idx| {
                let (from, to) = (idx / n, idx % n);
                per_user
                    .iter()
                    .enumerate()
                    .map(|(i, (_, t))| t[bit(from, i)][bit(to, i)])
                    .product()
            })
            .collect();
        Ok(Self { band_user, initial, transition })
    }

    fn states(&self) -> usize {
        self.initial.len()
    }

    fn busy(&self, band: usize, state: usize) -> bool {
        self.band_user[band].is_some_and(|i| state >> i & 1 == 1)
    }
}

/// `P(rx restricted to counted cells | tx)` summed over PU trajectories.
fn sequence_probability(
    h: usize,
    chain: &JointChain,
    lik: &CellLikelihoods,
    tx: &[u64],
    rx: &[u64],
    counted: &[u64],
    alpha: &mut Vec<f64>,
    scratch: &mut Vec<f64>,
) -> f64 {
    let n = chain.states();
    alpha.clear();
    alpha.extend_from_slice(&chain.initial);
    let steps = tx.len() * h;
    for t in 0..steps {
        let (stage, k) = (t / h, t % h);
        for (s, a) in alpha.iter_mut().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for band in 0..h {
                let cell = k * h + band;
                if counted[stage] >> cell & 1 == 0 {
                    continue;
                }
                let q = tx[stage] >> cell & 1 == 1;
                let b = rx[stage] >> cell & 1 == 1;
                *a *= if chain.busy(band, s) { lik.occupied(b) } else { lik.clean(q, b) };
            }
        }
        if t + 1 < steps && n > 1 {
            scratch.clear();
            scratch.resize(n, 0.0);
            for (from, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    for (to, slot) in scratch.iter_mut().enumerate() {
                        *slot += a * chain.transition[from * n + to];
                    }
                }
            }
            std::mem::swap(alpha, scratch);
        }
    }
    alpha.iter().sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub ber: f64,
    /// Cells whose value can change the decoder decision.
    pub informative_cells: usize,
    pub received_patterns: u128,
    pub codewords: usize,
}

/// Exact bit error rate of the Viterbi decoder on a terminated block,
/// averaged over equiprobable information words.
///
/// Cells on which every codeword agrees add the same amount to every path
/// metric and sum to one under any PU state, so only the remaining cells are
/// enumerated.
pub fn exhaustive_ber(config: &OracleConfig) -> Result<OracleReport> {
    let h = config.h()?;
    let code = config.trellis.code();
    let l = config.info_bits;
    if l == 0 || l % code.inputs() != 0 || l > 20 {
        return Err(Error::Domain(format!("oracle block of {l} bits not supported")));
    }
    let mapping = config.trellis.mapping().expect("checked above");
    let words = 1usize << l;
    let codewords: Vec<(Vec<u8>, Vec<u64>)> = (0..words)
        .map(|w| {
            let bits: Vec<u8> = (0..l).map(|i| (w >> (l - 1 - i) & 1) as u8).collect();
            let symbols = code.encode(&bits, true)?;
            let masks = symbols.iter().map(|&s| mapping.matrices()[s].mask()).collect();
            Ok((bits, masks))
        })
        .collect::<Result<_>>()?;
    let stages = codewords[0].1.len();
    let reference = codewords[0].1.clone();
    let counted: Vec<u64> = (0..stages)
        .map(|u| codewords.iter().fold(0u64, |acc, (_, m)| acc | (m[u] ^ reference[u])))
        .collect();
    let positions: Vec<(usize, u32)> = counted
        .iter()
        .enumerate()
        .flat_map(|(u, &mask)| (0..64u32).filter(move |&i| mask >> i & 1 == 1).map(move |i| (u, i)))
        .collect();
    let informative = positions.len();
    if informative >= 100 {
        return Err(Error::Budget { required: u128::MAX, budget: config.budget });
    }
    let patterns = 1u128 << informative;
    let required = patterns * words as u128;
    if required > config.budget {
        return Err(Error::Budget { required, budget: config.budget });
    }
    let chain = JointChain::new(h, &config.users)?;

    let chunk = 1u64 << informative.saturating_sub(6).min(12);
    let total = patterns as u64;
    let chunks = total.div_ceil(chunk);
    let partial: Vec<Result<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let (mut alpha, mut scratch) = (Vec::new(), Vec::new());
            let mut rx = reference.clone();
            let mut received = vec![ReceivedMatrix::zeros(h); stages];
            let mut acc = 0.0;
            for r in c * chunk..((c + 1) * chunk).min(total) {
                rx.copy_from_slice(&reference);
                for (i, &(u, bit)) in positions.iter().enumerate() {
                    if r >> i & 1 == 1 {
                        rx[u] ^= 1 << bit;
                    }
                }
                for (slot, &mask) in received.iter_mut().zip(&rx) {
                    *slot = ReceivedMatrix::from_mask(h, mask);
                }
                let decoded = viterbi_decode(&config.trellis, &received, l)?.bits;
                for (bits, tx) in &codewords {
                    let errors = bits.iter().zip(&decoded).filter(|(a, b)| a != b).count();
                    if errors == 0 {
                        continue;
                    }
                    let p = sequence_probability(h, &chain, &config.likelihoods, tx, &rx, &counted, &mut alpha, &mut scratch);
                    acc += p * errors as f64;
                }
            }
            Ok(acc)
        })
        .collect();
    let mut sum = 0.0;
    for p in partial {
        sum += p?;
    }
    Ok(OracleReport {
        ber: (sum / (words * l) as f64).clamp(0.0, 1.0),
        informative_cells: informative,
        received_patterns: patterns,
        codewords: words,
    })
}

/// Exact probability that the detector outputs `competing` (every cell)
/// when `transmitted` is sent, summed over PU trajectories.
pub fn exhaustive_path_probability(transmitted: &[u64], competing: &[u64], config: &OracleConfig) -> Result<f64> {
    let h = config.h()?;
    if transmitted.len() != competing.len() {
        return Err(Error::LengthMismatch { expected: transmitted.len(), found: competing.len() });
    }
    if transmitted.len() > MAX_ORACLE_BRANCHES {
        return Err(Error::Budget {
            required: transmitted.len() as u128,
            budget: MAX_ORACLE_BRANCHES as u128,
        });
    }
    let chain = JointChain::new(h, &config.users)?;
    let all = if h * h >= 64 { u64::MAX } else { (1u64 << (h * h)) - 1 };
    let counted = vec![all; transmitted.len()];
    let (mut alpha, mut scratch) = (Vec::new(), Vec::new());
    Ok(sequence_probability(
        h,
        &chain,
        &config.likelihoods,
        transmitted,
        competing,
        &counted,
        &mut alpha,
        &mut scratch,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{cell_likelihoods, pair_probability_masks, PairMetric, PuProfile};
    use crate::codebook::PermutationMapping;
    use crate::convolutional::ConvCode;

    fn two_band() -> Trellis {
        Trellis::build(ConvCode::pass_through(), PermutationMapping::two_band()).unwrap()
    }

    fn flip(eps: f64) -> CellLikelihoods {
        CellLikelihoods { p_b1_q1: 1.0 - eps, p_b1_q0: eps, p_b1_pu: 0.5 }
    }

    #[test]
    fn noiseless_channel_has_no_errors() {
        let cfg = OracleConfig::new(Trellis::standard(3).unwrap(), 1, CellLikelihoods::noiseless());
        assert_eq!(exhaustive_ber(&cfg).unwrap().ber, 0.0);
    }

    #[test]
    fn two_band_single_branch_by_hand() {
        // 12 sent, 21 the competitor; all four cells differ. With k cells
        // flipped the received block is k away from 12 and 4 - k from 21:
        // k > 2 is an error, k = 2 a tie resolved towards symbol 0.
        for eps in [0.01, 0.1, 0.3] {
            let cfg = OracleConfig::new(two_band(), 1, flip(eps));
            let report = exhaustive_ber(&cfg).unwrap();
            assert_eq!(report.informative_cells, 4);
            let binom = |k: i32| [1.0, 4.0, 6.0, 4.0, 1.0][k as usize] * eps.powi(k) * (1.0 - eps).powi(4 - k);
            // symbol 0 sent: errors for k = 3, 4; symbol 1 sent: k >= 2
            let want = 0.5 * (binom(3) + binom(4)) + 0.5 * (binom(2) + binom(3) + binom(4));
            assert!((report.ber - want).abs() < 1e-15, "{} vs {want}", report.ber);
        }
    }

    #[test]
    fn always_on_path_probability_matches_the_product() {
        let trellis = Trellis::standard(3).unwrap();
        let m = trellis.mapping().unwrap().matrices().to_vec();
        let lik = cell_likelihoods(5.0, 40.0, 1.0, 3).unwrap();
        let users = vec![PrimaryUser { band: 1, activity: Occupancy::AlwaysOn }];
        let cfg = OracleConfig::new(trellis, 1, lik).with_users(users);
        let tx = [m[0].mask(); 3];
        let comp = [m[3].mask(), m[2].mask(), m[3].mask()];
        let exact = exhaustive_path_probability(&tx, &comp, &cfg).unwrap();
        let profile = PuProfile::single(3, 1, 1.0).unwrap();
        let product = pair_probability_masks(3, &tx, &comp, &lik, &profile, PairMetric::Literal).unwrap();
        assert!((exact - product).abs() <= 1e-12 * product.max(1e-300), "{exact} vs {product}");
    }

    #[test]
    fn markov_occupancy_differs_from_the_mixture() {
        let trellis = Trellis::standard(3).unwrap();
        let m = trellis.mapping().unwrap().matrices().to_vec();
        let lik = cell_likelihoods(5.0, 40.0, 1.0, 3).unwrap();
        let activity = Occupancy::markov(0.05, 0.05).unwrap();
        let cfg = OracleConfig::new(trellis, 1, lik).with_users(vec![PrimaryUser { band: 1, activity }]);
        let tx = [m[0].mask(); 3];
        let comp = [m[3].mask(), m[2].mask(), m[3].mask()];
        let exact = exhaustive_path_probability(&tx, &comp, &cfg).unwrap();
        let profile = PuProfile::single(3, 1, 0.5).unwrap();
        let mixture = pair_probability_masks(3, &tx, &comp, &lik, &profile, PairMetric::Literal).unwrap();
        // slow switching keeps the row's cells correlated
        assert!((exact - mixture).abs() > 1e-3 * mixture, "{exact} vs {mixture}");
        // a chain that forgets its state every step is the mixture
        let memoryless = Occupancy::markov(0.5, 0.5).unwrap();
        let cfg = cfg.with_users(vec![PrimaryUser { band: 1, activity: memoryless }]);
        let exact = exhaustive_path_probability(&tx, &comp, &cfg).unwrap();
        assert!((exact - mixture).abs() <= 1e-12 * mixture);
    }

    #[test]
    fn probabilities_over_all_outcomes_sum_to_one() {
        let trellis = two_band();
        let lik = cell_likelihoods(2.0, 3.0, 1.0, 2).unwrap();
        let activity = Occupancy::markov(0.3, 0.2).unwrap();
        let cfg = OracleConfig::new(trellis, 1, lik).with_users(vec![PrimaryUser { band: 0, activity }]);
        let tx = [0b1001u64, 0b0110];
        let total: f64 = (0..256u64)
            .map(|r| exhaustive_path_probability(&tx, &[r & 15, r >> 4], &cfg).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn band_relabelling_symmetry() {
        // swapping bands 0 and 2 in every code matrix and moving the PU with them
        let lik = cell_likelihoods(4.0, 10.0, 1.0, 3).unwrap();
        let activity = Occupancy::markov(0.2, 0.1).unwrap();
        let base = OracleConfig::new(Trellis::standard(3).unwrap(), 1, lik)
            .with_users(vec![PrimaryUser { band: 0, activity }]);
        let relabel = |p: &[u8]| p.iter().map(|&b| [3, 2, 1][b as usize - 1]).collect::<Vec<u8>>();
        let table = PermutationMapping::three_band().table().iter().map(|p| relabel(p)).collect();
        let trellis = Trellis::build(ConvCode::rate_half(), PermutationMapping::new(table).unwrap()).unwrap();
        let moved = OracleConfig::new(trellis, 1, lik).with_users(vec![PrimaryUser { band: 2, activity }]);
        let a = exhaustive_ber(&base).unwrap().ber;
        let b = exhaustive_ber(&moved).unwrap().ber;
        assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        assert!(a > 0.0 && a < 1.0);
    }

    #[test]
    fn budget_is_enforced() {
        let cfg = OracleConfig::new(Trellis::standard(3).unwrap(), 2, CellLikelihoods::noiseless()).with_budget(1000);
        assert!(matches!(exhaustive_ber(&cfg), Err(Error::Budget { .. })));
        let m = 0b100_010_001u64;
        let five = [m; 5];
        assert!(matches!(exhaustive_path_probability(&five, &five, &cfg), Err(Error::Budget { .. })));
    }

    #[test]
    fn configuration_errors() {
        let lik = CellLikelihoods::noiseless();
        let binary = OracleConfig::new(Trellis::binary(ConvCode::rate_half()), 1, lik);
        assert!(matches!(exhaustive_ber(&binary), Err(Error::Config(_))));
        let clash = OracleConfig::new(two_band(), 1, lik).with_users(vec![
            PrimaryUser { band: 1, activity: Occupancy::AlwaysOn },
            PrimaryUser { band: 1, activity: Occupancy::AlwaysOff },
        ]);
        assert!(matches!(exhaustive_ber(&clash), Err(Error::Config(_))));
    }
}
