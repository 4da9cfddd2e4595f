//! Error events of a trellis, enumerated relative to the all-zero path.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::codebook::{matrix_hamming_distance, CodeMatrix, ExpandedCodeword};
use crate::convolutional::{Branch, Trellis};
use crate::error::Result;

/// Longest error event followed before a branch is abandoned.
const MAX_EVENT_LENGTH: usize = 256;
/// Largest weight cap tried while searching for weight classes.
const MAX_WEIGHT_CAP: u32 = 1 << 12;

/// A path leaving state 0 at stage 0 and returning to it once, at its end.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ErrorEvent {
    /// Input group per branch.
    pub inputs: Vec<usize>,
    /// Output symbol per branch.
    pub symbols: Vec<usize>,
    /// Expanded Hamming distance from the all-zero path.
    pub weight: u32,
    /// Information bits in which the event differs from the all-zero input.
    pub input_weight: u32,
    /// Code matrix masks per branch; empty on a binary trellis.
    pub matrices: Vec<u64>,
}

impl ErrorEvent {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightClass {
    pub d: u32,
    pub paths: Vec<ErrorEvent>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathSpectrum {
    /// Ascending in `d`.
    pub entries: Vec<WeightClass>,
    pub d_free_star: u32,
    /// Weight classes kept above `d_free_star`.
    pub z: usize,
    /// Input bits per trellis step.
    pub inputs_per_step: usize,
    /// Band count and the code matrix of symbol 0, for a mapped trellis.
    pub reference: Option<CodeMatrix>,
}

impl PathSpectrum {
    /// `(d, a_d)` pairs.
    pub fn counts(&self) -> Vec<(u32, usize)> {
        self.entries.iter().map(|c| (c.d, c.paths.len())).collect()
    }

    pub fn paths(&self) -> impl Iterator<Item = &ErrorEvent> {
        self.entries.iter().flat_map(|c| c.paths.iter())
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The spectrum restricted to its first `z + 1` weight classes.
    pub fn truncated(&self, z: usize) -> Self {
        Self {
            entries: self.entries.iter().take(z + 1).cloned().collect(),
            d_free_star: self.d_free_star,
            z: z.min(self.entries.len().saturating_sub(1)),
            inputs_per_step: self.inputs_per_step,
            reference: self.reference,
        }
    }
}

/// Weight of one branch: the distance of its code matrix from the matrix of
/// symbol 0, or the output bit count on a binary trellis.
fn branch_weights(trellis: &Trellis) -> Result<Vec<u32>> {
    match trellis.mapping() {
        Some(mapping) => {
            let zero = mapping.matrices()[0];
            trellis
                .branches()
                .iter()
                .map(|b| matrix_hamming_distance(&mapping.matrices()[b.symbol], &zero))
                .collect()
        }
        None => Ok(trellis.branches().iter().map(|b| b.symbol.count_ones()).collect()),
    }
}

struct Search<'a> {
    trellis: &'a Trellis,
    weights: Vec<u32>,
    cap: u32,
    truncated: bool,
    found: Vec<ErrorEvent>,
    path: Vec<usize>,
}

impl Search<'_> {
    fn extend(&mut self, state: usize, weight: u32) {
        if self.path.len() >= MAX_EVENT_LENGTH {
            self.truncated = true;
            return;
        }
        let per_state = self.trellis.branches_per_state();
        for input in 0..per_state {
            let idx = state * per_state + input;
            let w = weight + self.weights[idx];
            if w > self.cap {
                self.truncated = true;
                continue;
            }
            self.path.push(idx);
            let next = self.trellis.branches()[idx].next;
            if next == 0 {
                self.record(w);
            } else {
                self.extend(next, w);
            }
            self.path.pop();
        }
    }

    fn record(&mut self, weight: u32) {
        let branches: Vec<&Branch> = self.path.iter().map(|&i| &self.trellis.branches()[i]).collect();
        self.found.push(ErrorEvent {
            inputs: branches.iter().map(|b| b.input).collect(),
            symbols: branches.iter().map(|b| b.symbol).collect(),
            weight,
            input_weight: branches.iter().map(|b| b.input.count_ones()).sum(),
            matrices: branches.iter().filter_map(|b| self.trellis.matrix(b)).map(|t| t.mask()).collect(),
        });
    }

    /// Every event with weight at most `cap`; `truncated` reports whether
    /// anything was cut off.
    fn run(&mut self) {
        let per_state = self.trellis.branches_per_state();
        for input in 1..per_state {
            let w = self.weights[input];
            if w > self.cap {
                self.truncated = true;
                continue;
            }
            self.path.push(input);
            let next = self.trellis.branches()[input].next;
            if next == 0 {
                self.record(w);
            } else {
                self.extend(next, w);
            }
            self.path.pop();
        }
    }
}

/// Enumerates the error events in the `z + 1` lowest weight classes, with
/// their full branch labels. Events are ordered by weight, then by length,
/// then lexicographically by input sequence.
pub fn enumerate_paths(trellis: &Trellis, z: usize) -> Result<PathSpectrum> {
    let weights = branch_weights(trellis)?;
    let mut cap = weights.iter().copied().max().unwrap_or(1).max(1) * 4;
    loop {
        let mut search = Search {
            trellis,
            weights: weights.clone(),
            cap,
            truncated: false,
            found: Vec::new(),
            path: Vec::new(),
        };
        search.run();
        let mut classes: BTreeMap<u32, Vec<ErrorEvent>> = BTreeMap::new();
        for event in search.found {
            classes.entry(event.weight).or_default().push(event);
        }
        if classes.len() > z || !search.truncated || cap >= MAX_WEIGHT_CAP {
            let entries: Vec<WeightClass> = classes
                .into_iter()
                .take(z + 1)
                .map(|(d, mut paths)| {
                    paths.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.inputs.cmp(&b.inputs)));
                    WeightClass { d, paths }
                })
                .collect();
            let d_free_star = entries.first().map_or(0, |c| c.d);
            let z = entries.len().saturating_sub(1);
            return Ok(PathSpectrum {
                entries,
                d_free_star,
                z,
                inputs_per_step: trellis.code().inputs(),
                reference: trellis.mapping().map(|m| m.matrices()[0]),
            });
        }
        cap *= 2;
    }
}

/// The expanded codeword of an event.
pub fn event_codeword(trellis: &Trellis, event: &ErrorEvent) -> Option<Result<ExpandedCodeword>> {
    trellis.mapping().map(|m| m.expand_codeword(&event.symbols))
}
