//! Truncated union bound on the bit error rate and derived quantities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::likelihood::{CellLikelihoods, PuProfile};
use super::spectrum::{ErrorEvent, PathSpectrum};
use crate::codebook::PermutationMapping;
use crate::convolutional::Trellis;
use crate::error::{domain, Error, Result};

/// How a transmitted/competing pair is scored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMetric {
    /// Probability that the detector output equals the competing pattern
    /// exactly: the product of per-cell likelihoods.
    #[default]
    Literal,
    /// Probability that the detector output is closer to the competing
    /// pattern than to the transmitted one, ties counted as one half.
    Pairwise,
}

fn check_shapes(h: usize, profile: &PuProfile, tx: &[u64], comp: &[u64]) -> Result<()> {
    if tx.len() != comp.len() {
        return Err(Error::LengthMismatch { expected: tx.len(), found: comp.len() });
    }
    if profile.h() != h {
        return Err(domain(format!("activity profile has {} bands, patterns have {h}", profile.h())));
    }
    Ok(())
}

/// Pair score over block masks (one `u64` of `H^2` cells per branch).
pub fn pair_probability_masks(
    h: usize,
    transmitted: &[u64],
    competing: &[u64],
    likelihoods: &CellLikelihoods,
    profile: &PuProfile,
    metric: PairMetric,
) -> Result<f64> {
    check_shapes(h, profile, transmitted, competing)?;
    let cells = h * h;
    let value = match metric {
        PairMetric::Literal => {
            let mut product = 1.0;
            for (&t, &c) in transmitted.iter().zip(competing) {
                for cell in 0..cells {
                    let q = t >> cell & 1 == 1;
                    let b = c >> cell & 1 == 1;
                    product *= likelihoods.mixed(q, b, profile.cell(cell));
                }
                if product == 0.0 {
                    break;
                }
            }
            product
        }
        PairMetric::Pairwise => {
            // margin = cells agreeing with the competitor minus cells
            // agreeing with the transmitted pattern, over differing cells
            let mut dist = vec![1.0f64];
            for (&t, &c) in transmitted.iter().zip(competing) {
                let diff = t ^ c;
                for cell in (0..cells).filter(|&i| diff >> i & 1 == 1) {
                    let q = t >> cell & 1 == 1;
                    let p = likelihoods.mixed(q, !q, profile.cell(cell));
                    let mut next = vec![0.0; dist.len() + 2];
                    for (i, &m) in dist.iter().enumerate() {
                        next[i] += m * (1.0 - p);
                        next[i + 2] += m * p;
                    }
                    dist = next;
                }
            }
            let centre = dist.len() / 2;
            let above: f64 = dist[centre + 1..].iter().sum();
            above + 0.5 * dist[centre]
        }
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Probability of receiving exactly `competing` when `transmitted` is sent,
/// over cell-wise mixtures of the occupied and free likelihoods. Bits are
/// laid out block by block, `H^2` per trellis branch.
pub fn path_pair_probability(
    transmitted: &[u8],
    competing: &[u8],
    likelihoods: &CellLikelihoods,
    profile: &PuProfile,
) -> Result<f64> {
    let h = profile.h();
    let cells = h * h;
    if transmitted.len() != competing.len() {
        return Err(Error::LengthMismatch { expected: transmitted.len(), found: competing.len() });
    }
    if transmitted.len() % cells != 0 {
        return Err(domain(format!("pattern length {} is not a multiple of H^2 = {cells}", transmitted.len())));
    }
    let pack = |bits: &[u8]| -> Vec<u64> {
        bits.chunks(cells)
            .map(|c| c.iter().enumerate().fold(0u64, |m, (i, &b)| m | ((b & 1) as u64) << i))
            .collect()
    };
    pair_probability_masks(h, &pack(transmitted), &pack(competing), likelihoods, profile, PairMetric::Literal)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DContribution {
    pub d: u32,
    pub paths: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BerEstimate {
    pub value: f64,
    pub z_used: usize,
    pub per_d_contributions: Vec<DContribution>,
}

fn reference_of(spectrum: &PathSpectrum) -> Result<(usize, u64)> {
    spectrum
        .reference
        .map(|t| (t.h(), t.mask()))
        .ok_or_else(|| domain("spectrum has no code matrices (binary trellis)"))
}

fn event_score(
    h: usize,
    zero: u64,
    event: &ErrorEvent,
    likelihoods: &CellLikelihoods,
    profile: &PuProfile,
    metric: PairMetric,
) -> Result<f64> {
    let tx = vec![zero; event.matrices.len()];
    pair_probability_masks(h, &tx, &event.matrices, likelihoods, profile, metric)
}

/// Truncated union bound with the all-zero codeword as reference: every
/// stored event contributes its information-bit weight divided by the input
/// width, times its pair score. Clamped to `[0, 1]`.
pub fn approximate_ber_with(
    spectrum: &PathSpectrum,
    likelihoods: &CellLikelihoods,
    profile: &PuProfile,
    metric: PairMetric,
) -> Result<BerEstimate> {
    if spectrum.is_empty() {
        return Err(domain("empty path spectrum"));
    }
    let (h, zero) = reference_of(spectrum)?;
    let m = spectrum.inputs_per_step as f64;
    let per_d_contributions = spectrum
        .entries
        .iter()
        .map(|class| {
            let value = class
                .paths
                .iter()
                .map(|e| Ok(e.input_weight as f64 / m * event_score(h, zero, e, likelihoods, profile, metric)?))
                .sum::<Result<f64>>()?;
            Ok(DContribution { d: class.d, paths: class.paths.len(), value })
        })
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = per_d_contributions.iter().map(|c| c.value).sum();
    Ok(BerEstimate { value: total.clamp(0.0, 1.0), z_used: spectrum.z, per_d_contributions })
}

pub fn approximate_ber(spectrum: &PathSpectrum, likelihoods: &CellLikelihoods, profile: &PuProfile) -> Result<BerEstimate> {
    approximate_ber_with(spectrum, likelihoods, profile, PairMetric::Literal)
}

/// Expected delivered bits per second, `(1 - PER) * rp * l` with
/// `PER = 1 - (1 - pe)^l`.
pub fn throughput(pe: f64, l: usize, rp: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&pe) {
        return Err(domain(format!("Pe = {pe} outside [0, 1]")));
    }
    if l == 0 || !(rp > 0.0) {
        return Err(domain(format!("need L >= 1 and Rp > 0, got L={l}, Rp={rp}")));
    }
    let success = (1.0 - pe).powi(l as i32);
    Ok(success * rp * l as f64)
}

/// Packet error rate implied by a bit error rate.
pub fn packet_error_rate(pe: f64, l: usize) -> f64 {
    1.0 - (1.0 - pe).powi(l as i32)
}

/// Swaps, row by row, the cell a `from` matrix occupies with the one a `to`
/// matrix occupies; applied to `from` itself it yields `to`.
pub fn row_swap(h: usize, from: u64, to: u64, pattern: u64) -> u64 {
    let mut out = pattern;
    for band in 0..h {
        let col = |mask: u64| (0..h).find(|&k| mask >> (k * h + band) & 1 == 1);
        let (Some(a), Some(b)) = (col(from), col(to)) else { continue };
        if a == b {
            continue;
        }
        let (ia, ib) = (a * h + band, b * h + band);
        let (ba, bb) = (pattern >> ia & 1, pattern >> ib & 1);
        out &= !(1 << ia | 1 << ib);
        out |= ba << ib | bb << ia;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Proposition1Report {
    /// Bound for the all-zero codeword.
    pub reference: f64,
    /// Largest absolute deviation over the random codewords, competitors
    /// obtained by the row-wise swap.
    pub spread: f64,
    /// `spread / reference`.
    pub relative_spread: f64,
    /// Same deviation when competitors are the codewords `c + e` instead.
    pub linear_spread: f64,
    pub trials: usize,
}

/// Evaluates the truncated bound of `spectrum` with the all-zero codeword
/// and with `trials` random codewords of the trellis transmitted, and
/// reports how far the results move.
pub fn proposition1_check(
    trellis: &Trellis,
    spectrum: &PathSpectrum,
    likelihoods: &CellLikelihoods,
    profile: &PuProfile,
    trials: usize,
    seed: u64,
) -> Result<Proposition1Report> {
    let mapping: &PermutationMapping = trellis
        .mapping()
        .ok_or_else(|| Error::Config("trellis has no permutation mapping".into()))?;
    let h = mapping.h();
    let matrices = mapping.matrices();
    let zero = matrices[0].mask();
    let m = trellis.code().inputs() as f64;
    let longest = spectrum.paths().map(ErrorEvent::len).max().unwrap_or(0);

    let bound = |codeword: &[usize], swap: bool| -> Result<f64> {
        let mut total = 0.0;
        for event in spectrum.paths() {
            let mut tx = Vec::with_capacity(event.len());
            let mut comp = Vec::with_capacity(event.len());
            for (i, &s) in event.symbols.iter().enumerate() {
                let t = matrices[codeword[i]].mask();
                tx.push(t);
                if swap {
                    comp.push(row_swap(h, zero, t, matrices[s].mask()));
                } else {
                    comp.push(matrices[codeword[i] ^ s].mask());
                }
            }
            total += event.input_weight as f64 / m
                * pair_probability_masks(h, &tx, &comp, likelihoods, profile, PairMetric::Literal)?;
        }
        Ok(total)
    };

    let reference = bound(&vec![0; longest], true)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let warmup = trellis.code().memory() + 1;
    let (mut spread, mut linear_spread) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let bits: Vec<u8> = (0..(warmup + longest) * trellis.code().inputs())
            .map(|_| rng.random::<bool>() as u8)
            .collect();
        let symbols = trellis.code().encode(&bits, false)?;
        let codeword = &symbols[warmup..];
        spread = spread.max((bound(codeword, true)? - reference).abs());
        linear_spread = linear_spread.max((bound(codeword, false)? - reference).abs());
    }
    let relative_spread = if reference > 0.0 { spread / reference } else { 0.0 };
    Ok(Proposition1Report { reference, spread, relative_spread, linear_spread, trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{cell_likelihoods, enumerate_paths};
    use crate::codebook::PermutationMapping;
    use crate::convolutional::ConvCode;

    fn lik_at(db: f64, h: usize) -> CellLikelihoods {
        let es = 10f64.powf(db / 10.0);
        cell_likelihoods(es, 1e3, 1.0, h).unwrap()
    }

    #[test]
    fn identical_patterns_in_a_noiseless_channel() {
        let t = PermutationMapping::three_band().expand_codeword(&[0, 3, 1]).unwrap().bits();
        let lik = CellLikelihoods::noiseless();
        let idle = PuProfile::idle(3);
        assert_eq!(path_pair_probability(&t, &t, &lik, &idle).unwrap(), 1.0);
        let other = PermutationMapping::three_band().expand_codeword(&[0, 3, 2]).unwrap().bits();
        assert_eq!(path_pair_probability(&t, &other, &lik, &idle).unwrap(), 0.0);
    }

    #[test]
    fn literal_product_by_hand() {
        // H = 2, one block: transmitted 12, competitor 21
        let lik = CellLikelihoods { p_b1_q1: 0.7, p_b1_q0: 0.2, p_b1_pu: 0.9 };
        let tx = [1, 0, 0, 1];
        let comp = [0, 1, 1, 0];
        let idle = PuProfile::idle(2);
        let want = 0.3 * 0.2 * 0.2 * 0.3;
        assert!((path_pair_probability(&tx, &comp, &lik, &idle).unwrap() - want).abs() < 1e-15);
        // band index 1 always busy: cells 1 and 3 use P(b | PU)
        let busy = PuProfile::single(2, 1, 1.0).unwrap();
        let want = 0.3 * 0.9 * 0.2 * 0.1;
        assert!((path_pair_probability(&tx, &comp, &lik, &busy).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn pairwise_metric_by_hand() {
        let lik = CellLikelihoods { p_b1_q1: 0.7, p_b1_q0: 0.2, p_b1_pu: 0.9 };
        let idle = PuProfile::idle(2);
        // four differing cells: q=1 cells flip w.p. 0.3, q=0 cells w.p. 0.2
        let v = pair_probability_masks(2, &[0b1001], &[0b0110], &lik, &idle, PairMetric::Pairwise).unwrap();
        let flips = [0.3, 0.2, 0.2, 0.3];
        let mut want = 0.0;
        for outcome in 0..16u32 {
            let p: f64 = (0..4).map(|i| if outcome >> i & 1 == 1 { flips[i] } else { 1.0 - flips[i] }).product();
            let margin = 2 * outcome.count_ones() as i32 - 4;
            want += p * if margin > 0 { 1.0 } else if margin == 0 { 0.5 } else { 0.0 };
        }
        assert!((v - want).abs() < 1e-15);
    }

    #[test]
    fn shape_errors() {
        let lik = CellLikelihoods::noiseless();
        let idle = PuProfile::idle(3);
        assert!(path_pair_probability(&[0; 9], &[0; 18], &lik, &idle).is_err());
        assert!(path_pair_probability(&[0; 8], &[0; 8], &lik, &idle).is_err());
    }

    #[test]
    fn truncation_depth_zero_keeps_one_path() {
        let trellis = Trellis::standard(3).unwrap();
        let spectrum = enumerate_paths(&trellis, 0).unwrap();
        let lik = lik_at(7.0, 3);
        let profile = PuProfile::single(3, 1, 1.0).unwrap();
        let est = approximate_ber(&spectrum, &lik, &profile).unwrap();
        assert_eq!(est.z_used, 0);
        assert_eq!(est.per_d_contributions.len(), 1);
        let event = &spectrum.entries[0].paths[0];
        let zero = trellis.mapping().unwrap().expand_codeword(&[0, 0, 0]).unwrap().bits();
        let comp = trellis.mapping().unwrap().expand_codeword(&event.symbols).unwrap().bits();
        let p2 = path_pair_probability(&zero, &comp, &lik, &profile).unwrap();
        assert!((est.value - p2).abs() <= 1e-15 * p2);
    }

    #[test]
    fn noiseless_bound_vanishes() {
        let spectrum = enumerate_paths(&Trellis::standard(3).unwrap(), 3).unwrap();
        let est = approximate_ber(&spectrum, &CellLikelihoods::noiseless(), &PuProfile::idle(3)).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn estimate_grows_with_depth() {
        let spectrum = enumerate_paths(&Trellis::standard(3).unwrap(), 4).unwrap();
        let profile = PuProfile::single(3, 1, 0.35).unwrap();
        for metric in [PairMetric::Literal, PairMetric::Pairwise] {
            let mut last = 0.0;
            for z in 0..=4 {
                let v = approximate_ber_with(&spectrum.truncated(z), &lik_at(4.0, 3), &profile, metric).unwrap().value;
                assert!(v >= last);
                last = v;
            }
        }
    }

    #[test]
    fn throughput_values() {
        assert_eq!(throughput(0.0, 256, 100.0).unwrap(), 25600.0);
        assert_eq!(throughput(1.0, 256, 100.0).unwrap(), 0.0);
        let t = throughput(1e-3, 256, 100.0).unwrap();
        assert!((t - 25600.0 * 0.999f64.powi(256)).abs() < 1e-9);
        assert!((t - 19810.0).abs() < 10.0, "{t}");
        assert!(throughput(1.5, 256, 100.0).is_err());
        assert!(throughput(0.1, 0, 100.0).is_err());
        assert!((packet_error_rate(1e-3, 256) - (1.0 - t / 25600.0)).abs() < 1e-15);
    }

    #[test]
    fn row_swap_exchanges_matrices() {
        let mapping = PermutationMapping::three_band();
        let m = mapping.matrices();
        for a in m {
            for b in m {
                assert_eq!(row_swap(3, a.mask(), b.mask(), a.mask()), b.mask());
                assert_eq!(row_swap(3, a.mask(), b.mask(), b.mask()), a.mask());
                for pattern in [0u64, 0b101_110_011, 0x1ff] {
                    let once = row_swap(3, a.mask(), b.mask(), pattern);
                    assert_eq!(once.count_ones(), pattern.count_ones());
                    assert_eq!(row_swap(3, a.mask(), b.mask(), once), pattern);
                }
            }
        }
    }

    #[test]
    fn invariance_under_row_constant_activity() {
        let trellis = Trellis::standard(3).unwrap();
        let spectrum = enumerate_paths(&trellis, 3).unwrap();
        let profile = PuProfile::single(3, 1, 1.0).unwrap();
        let report = proposition1_check(&trellis, &spectrum, &lik_at(7.0, 3), &profile, 50, 1).unwrap();
        assert!(report.spread <= 1e-12 * report.reference.max(1e-300) || report.spread == 0.0);
        assert_eq!(proposition1_check(&trellis, &spectrum, &lik_at(7.0, 3), &profile, 0, 1).unwrap().spread, 0.0);
    }

    #[test]
    fn column_varying_activity_breaks_invariance() {
        let trellis = Trellis::build(ConvCode::pass_through(), PermutationMapping::two_band()).unwrap();
        let spectrum = enumerate_paths(&trellis, 0).unwrap();
        // band index 1 busy at step 0 with 0.9, at step 1 with 0.1
        let profile = PuProfile::per_cell(2, vec![0.0, 0.9, 0.0, 0.1]).unwrap();
        let report = proposition1_check(&trellis, &spectrum, &lik_at(0.0, 2), &profile, 20, 2).unwrap();
        assert!(report.spread > 1e-6, "{report:?}");
    }
}
