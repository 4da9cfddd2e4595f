//! Hard-decision Viterbi decoding over a terminated trellis.
//!
//! Survivors are selected by minimum cumulative Hamming distance. When two
//! candidates entering a state tie, the one from the smaller previous-state
//! index is kept (then the smaller input, for parallel branches). Every such
//! tie is counted in [`DecodeResult::tie_count`].

use crate::channel::ReceivedMatrix;
use crate::convolutional::{Branch, Trellis};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeResult {
    pub bits: Vec<u8>,
    pub path_metric: u32,
    pub tie_count: u32,
}

const UNREACHED: u32 = u32::MAX / 2;

/// Decodes a terminated block of `info_bits` bits whose stages are scored by
/// `metric(stage, branch)`.
pub fn viterbi_decode_by<F>(trellis: &Trellis, stages: usize, info_bits: usize, metric: F) -> Result<DecodeResult>
where
    F: Fn(usize, &Branch) -> u32,
{
    let code = trellis.code();
    if info_bits % code.inputs() != 0 {
        return Err(Error::Domain(format!(
            "{info_bits} bits is not a multiple of the input width {}",
            code.inputs()
        )));
    }
    let expected = trellis.stage_count(info_bits);
    if stages != expected {
        return Err(Error::LengthMismatch { expected, found: stages });
    }
    let states = trellis.num_states();
    let mut metrics = vec![UNREACHED; states];
    metrics[0] = 0;
    let mut next = vec![UNREACHED; states];
    // decisions[stage * states + state] = index of the surviving branch
    let mut decisions = vec![u32::MAX; stages * states];
    let mut tie_count = 0u32;

    for stage in 0..stages {
        next.fill(UNREACHED);
        let row = &mut decisions[stage * states..(stage + 1) * states];
        for (idx, branch) in trellis.branches().iter().enumerate() {
            let base = metrics[branch.from];
            if base >= UNREACHED {
                continue;
            }
            let candidate = base + metric(stage, branch);
            let slot = &mut next[branch.next];
            if candidate < *slot {
                *slot = candidate;
                row[branch.next] = idx as u32;
            } else if candidate == *slot {
                tie_count += 1;
            }
        }
        std::mem::swap(&mut metrics, &mut next);
    }

    let path_metric = metrics[0];
    if path_metric >= UNREACHED {
        return Err(Error::Domain("no terminated path reaches state 0".into()));
    }
    let m = code.inputs();
    let mut inputs = vec![0usize; stages];
    let mut state = 0;
    for stage in (0..stages).rev() {
        let branch = &trellis.branches()[decisions[stage * states + state] as usize];
        inputs[stage] = branch.input;
        state = branch.from;
    }
    let bits = inputs[..info_bits / m]
        .iter()
        .flat_map(|&input| (0..m).rev().map(move |b| (input >> b & 1) as u8))
        .collect();
    Ok(DecodeResult { bits, path_metric, tie_count })
}

/// Decodes received code matrices; the branch metric is the number of cells
/// in which the received block differs from the branch's code matrix.
pub fn viterbi_decode(trellis: &Trellis, received: &[ReceivedMatrix], info_bits: usize) -> Result<DecodeResult> {
    let mapping = trellis
        .mapping()
        .ok_or_else(|| Error::Config("trellis has no permutation mapping".into()))?;
    if let Some(r) = received.iter().find(|r| r.h() != mapping.h()) {
        return Err(Error::Domain(format!("received block has H = {}, expected {}", r.h(), mapping.h())));
    }
    let matrices = mapping.matrices();
    // per-stage distance to every symbol's matrix
    let symbol_metrics: Vec<u32> = received
        .iter()
        .flat_map(|r| matrices.iter().map(move |t| r.distance(t)))
        .collect();
    let symbols = matrices.len();
    viterbi_decode_by(trellis, received.len(), info_bits, |stage, branch| {
        symbol_metrics[stage * symbols + branch.symbol]
    })
}

/// Decodes hard bits of a binary trellis (`n` code bits per stage).
pub fn viterbi_decode_bits(trellis: &Trellis, code_bits: &[u8], info_bits: usize) -> Result<DecodeResult> {
    let n = trellis.code().outputs();
    if code_bits.len() % n != 0 {
        return Err(Error::LengthMismatch {
            expected: code_bits.len().div_ceil(n) * n,
            found: code_bits.len(),
        });
    }
    let received: Vec<usize> = code_bits
        .chunks(n)
        .map(|c| c.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize))
        .collect();
    viterbi_decode_by(trellis, received.len(), info_bits, |stage, branch| {
        (received[stage] ^ branch.symbol).count_ones()
    })
}
