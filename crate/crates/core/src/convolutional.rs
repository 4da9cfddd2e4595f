//! Feedforward convolutional encoder and its trellis.
//!
//! Controller form: the encoder window is the current input group followed by
//! the `memory` most recent past input bits, most recent first. A generator's
//! most significant bit taps the (first) current input, so `7 = 111` taps
//! `(u, s1, s2)` and `5 = 101` taps `(u, s2)`. Output bit `j` is the parity
//! of `generator_j & window`; the first generator gives the most significant
//! bit of the output symbol.

use crate::codebook::{CodeMatrix, PermutationMapping};
use crate::error::{domain, Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvCode {
    inputs: usize,
    outputs: usize,
    memory: usize,
    generators: Vec<u32>,
}

impl ConvCode {
    pub fn new(inputs: usize, memory: usize, generators: Vec<u32>) -> Result<Self> {
        if inputs == 0 || inputs > 8 {
            return Err(domain(format!("input width {inputs} outside 1..=8")));
        }
        if generators.is_empty() || generators.len() > 8 {
            return Err(domain(format!("{} generators, expected 1..=8", generators.len())));
        }
        if memory > 16 {
            return Err(domain(format!("memory {memory} exceeds 16")));
        }
        let width = memory + inputs;
        for &g in &generators {
            if g == 0 || g >> width != 0 {
                return Err(domain(format!(
                    "generator {g:o} (octal) does not fit a window of {width} bits"
                )));
            }
        }
        Ok(Self { inputs, outputs: generators.len(), memory, generators })
    }

    /// Parses generators written in octal, e.g. `["7", "5"]`.
    pub fn from_octal(inputs: usize, memory: usize, generators: &[&str]) -> Result<Self> {
        let gens = generators
            .iter()
            .map(|g| u32::from_str_radix(g.trim(), 8).map_err(|e| domain(format!("generator `{g}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(inputs, memory, gens)
    }

    /// Rate 1/2, two-stage register, generators (7, 5).
    pub fn rate_half() -> Self {
        Self::new(1, 2, vec![0o7, 0o5]).expect("static code")
    }

    /// Memoryless rate-1 pass-through, used with two-symbol mappings.
    pub fn pass_through() -> Self {
        Self::new(1, 0, vec![1]).expect("static code")
    }

    /// The code paired with the standard mapping for `h` bands.
    pub fn standard_for_bands(h: usize) -> Self {
        if h == 2 {
            Self::pass_through()
        } else {
            Self::rate_half()
        }
    }

    /// Input bits per trellis step (`m`).
    pub fn inputs(&self) -> usize {
        self.inputs
    }

    /// Output bits per trellis step (`n`).
    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn generators(&self) -> &[u32] {
        &self.generators
    }

    pub fn generators_octal(&self) -> Vec<String> {
        self.generators.iter().map(|g| format!("{g:o}")).collect()
    }

    pub fn num_states(&self) -> usize {
        1 << self.memory
    }

    /// Zero input groups appended by termination.
    pub fn tail_steps(&self) -> usize {
        self.memory.div_ceil(self.inputs)
    }

    /// Trellis stages for a terminated packet of `info_bits` bits.
    pub fn stage_count(&self, info_bits: usize) -> usize {
        info_bits / self.inputs + self.tail_steps()
    }

    /// One encoder step: `(next_state, output_symbol)`.
    #[inline]
    pub fn step(&self, state: usize, input: usize) -> (usize, usize) {
        let window = (input << self.memory) | state;
        let symbol = self.generators.iter().fold(0usize, |acc, &g| {
            (acc << 1) | ((g as usize & window).count_ones() as usize & 1)
        });
        let next = (window >> self.inputs) & (self.num_states() - 1);
        (next, symbol)
    }

    /// Encodes from the zero state. With `terminate`, zero groups are
    /// appended until the register is back in state 0.
    pub fn encode(&self, bits: &[u8], terminate: bool) -> Result<Vec<usize>> {
        let mut encoder = Encoder::new(self.clone());
        let mut out = encoder.push_bits(bits)?;
        if terminate {
            out.extend(encoder.flush());
        }
        Ok(out)
    }
}

impl Default for ConvCode {
    fn default() -> Self {
        Self::rate_half()
    }
}

/// Stateful encoder, for encoding a stream in pieces.
#[derive(Clone, Debug)]
pub struct Encoder {
    code: ConvCode,
    state: usize,
}

impl Encoder {
    pub fn new(code: ConvCode) -> Self {
        Self { code, state: 0 }
    }

    pub fn with_state(code: ConvCode, state: usize) -> Self {
        Self { code, state }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    /// Pushes one input group (first bit most significant).
    pub fn push(&mut self, input: usize) -> usize {
        let (next, symbol) = self.code.step(self.state, input);
        self.state = next;
        symbol
    }

    pub fn push_bits(&mut self, bits: &[u8]) -> Result<Vec<usize>> {
        let m = self.code.inputs;
        if bits.len() % m != 0 {
            return Err(Error::Domain(format!(
                "{} bits is not a multiple of the input width {m}",
                bits.len()
            )));
        }
        Ok(bits
            .chunks(m)
            .map(|group| {
                let input = group.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
                self.push(input)
            })
            .collect())
    }

    /// Drives the register back to state 0.
    pub fn flush(&mut self) -> Vec<usize> {
        (0..self.code.tail_steps()).map(|_| self.push(0)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Branch {
    pub from: usize,
    pub input: usize,
    pub next: usize,
    pub symbol: usize,
}

/// State graph of a convolutional code, optionally annotated with the code
/// matrix carried by each output symbol.
#[derive(Clone, Debug)]
pub struct Trellis {
    code: ConvCode,
    mapping: Option<PermutationMapping>,
    branches: Vec<Branch>,
}

impl Trellis {
    /// Plain binary trellis (branch labels are output bit groups only).
    pub fn binary(code: ConvCode) -> Self {
        let inputs = 1 << code.inputs;
        let branches = (0..code.num_states())
            .flat_map(|from| (0..inputs).map(move |input| (from, input)))
            .map(|(from, input)| {
                let (next, symbol) = code.step(from, input);
                Branch { from, input, next, symbol }
            })
            .collect();
        Self { code, mapping: None, branches }
    }

    /// Trellis whose output symbols are mapped to permutation code matrices.
    pub fn build(code: ConvCode, mapping: PermutationMapping) -> Result<Self> {
        if mapping.symbol_bits() != code.outputs {
            return Err(Error::Config(format!(
                "code emits {}-bit symbols but the mapping has {} symbols",
                code.outputs,
                mapping.symbols()
            )));
        }
        let mut trellis = Self::binary(code);
        trellis.mapping = Some(mapping);
        Ok(trellis)
    }

    /// Standard code and mapping for `h` bands.
    pub fn standard(h: usize) -> Result<Self> {
        let code = ConvCode::standard_for_bands(h);
        let mapping = PermutationMapping::standard(h, 1 << code.outputs())?;
        Self::build(code, mapping)
    }

    pub fn code(&self) -> &ConvCode {
        &self.code
    }

    pub fn mapping(&self) -> Option<&PermutationMapping> {
        self.mapping.as_ref()
    }

    pub fn num_states(&self) -> usize {
        self.code.num_states()
    }

    pub fn branches_per_state(&self) -> usize {
        1 << self.code.inputs
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn branch(&self, state: usize, input: usize) -> &Branch {
        &self.branches[state * self.branches_per_state() + input]
    }

    pub fn outgoing(&self, state: usize) -> &[Branch] {
        let n = self.branches_per_state();
        &self.branches[state * n..(state + 1) * n]
    }

    /// Code matrix attached to a branch; `None` for a binary trellis.
    pub fn matrix(&self, branch: &Branch) -> Option<CodeMatrix> {
        self.mapping.as_ref().map(|m| m.matrices()[branch.symbol])
    }

    /// Band count of the attached mapping.
    pub fn h(&self) -> Option<usize> {
        self.mapping.as_ref().map(PermutationMapping::h)
    }

    /// Stages of a terminated packet of `info_bits` bits.
    pub fn stage_count(&self, info_bits: usize) -> usize {
        self.code.stage_count(info_bits)
    }
}
