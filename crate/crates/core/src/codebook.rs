//! Symbol-to-permutation-matrix mappings and code matrix algebra.
//!
//! A code matrix is an `H x H` binary permutation matrix: row `j` is the
//! frequency band `f_{j+1}`, column `k` is the time step. Column `k` holds a
//! single one at the row of the band used at that step. Cells are packed
//! column-major into a `u64` (bit `k * H + j`), so serialising a block walks
//! the transmissions in chronological order.

use std::fmt;
use std::path::Path;

use crate::error::{domain, Error, Result};

/// Largest band count supported; `H * H` cells must fit in one `u64`.
pub const MAX_BANDS: usize = 8;

fn check_bands(h: usize) -> Result<()> {
    if !(1..=MAX_BANDS).contains(&h) {
        return Err(domain(format!("band count {h} outside 1..={MAX_BANDS}")));
    }
    Ok(())
}

/// Bit position of cell (band `j`, time step `k`), both zero based.
#[inline]
pub fn cell_index(h: usize, band: usize, step: usize) -> usize {
    step * h + band
}

/// An `H x H` binary permutation matrix.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct CodeMatrix {
    h: usize,
    mask: u64,
}

impl CodeMatrix {
    /// Builds the matrix for a permutation vector of 1-based band indices;
    /// entry `k` is the band transmitted at time step `k`.
    pub fn from_permutation(perm: &[u8]) -> Result<Self> {
        let h = perm.len();
        check_bands(h)?;
        validate_permutation(perm)?;
        let mask = perm.iter().enumerate().fold(0u64, |acc, (k, &band)| {
            acc | 1 << cell_index(h, band as usize - 1, k)
        });
        Ok(Self { h, mask })
    }

    pub fn h(&self) -> usize {
        self.h
    }

    /// Column-major cell bits.
    pub fn mask(&self) -> u64 {
        self.mask
    }

    /// `q_{j,k}` with zero-based band and step.
    pub fn cell(&self, band: usize, step: usize) -> bool {
        self.mask >> cell_index(self.h, band, step) & 1 == 1
    }

    pub fn weight(&self) -> u32 {
        self.mask.count_ones()
    }

    /// The 1-based band used at each time step.
    pub fn permutation(&self) -> Vec<u8> {
        (0..self.h)
            .map(|k| {
                let band = (0..self.h).find(|&j| self.cell(j, k)).unwrap_or(0);
                band as u8 + 1
            })
            .collect()
    }

    /// Rows as 0/1 vectors, row `j` = band `f_{j+1}`.
    pub fn rows(&self) -> Vec<Vec<u8>> {
        (0..self.h)
            .map(|j| (0..self.h).map(|k| self.cell(j, k) as u8).collect())
            .collect()
    }
}

impl fmt::Debug for CodeMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CodeMatrix({self})")
    }
}

impl serde::Serialize for CodeMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl fmt::Display for CodeMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for band in self.permutation() {
            write!(f, "{band}")?;
        }
        Ok(())
    }
}

/// Number of cells in which two code matrices differ.
pub fn matrix_hamming_distance(a: &CodeMatrix, b: &CodeMatrix) -> Result<u32> {
    if a.h != b.h {
        return Err(domain(format!(
            "cannot compare {}x{} with {}x{} matrices",
            a.h, a.h, b.h, b.h
        )));
    }
    Ok((a.mask ^ b.mask).count_ones())
}

fn validate_permutation(perm: &[u8]) -> Result<()> {
    let h = perm.len();
    let mut seen = [false; MAX_BANDS + 1];
    for &band in perm {
        let b = band as usize;
        if b == 0 || b > h {
            return Err(domain(format!("band {band} outside 1..={h}")));
        }
        if seen[b] {
            return Err(domain(format!("band {band} repeated in permutation")));
        }
        seen[b] = true;
    }
    Ok(())
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// Ordered table assigning each of `M = 2^m` symbols a distinct permutation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationMapping {
    h: usize,
    table: Vec<Vec<u8>>,
    matrices: Vec<CodeMatrix>,
}

impl PermutationMapping {
    /// Validates and builds a mapping; entry `i` belongs to symbol `i`.
    pub fn new(table: Vec<Vec<u8>>) -> Result<Self> {
        let m = table.len();
        let h = table.first().map(Vec::len).unwrap_or(0);
        check_bands(h)?;
        if m == 0 || !m.is_power_of_two() {
            return Err(domain(format!("symbol count {m} is not a power of two")));
        }
        if m as u128 > factorial(h) {
            return Err(domain(format!("{m} symbols exceed {h}! permutations")));
        }
        let mut matrices = Vec::with_capacity(m);
        for (i, perm) in table.iter().enumerate() {
            if perm.len() != h {
                return Err(domain(format!(
                    "symbol {i} has {} entries, expected {h}",
                    perm.len()
                )));
            }
            let matrix = CodeMatrix::from_permutation(perm)?;
            if matrices.contains(&matrix) {
                return Err(domain(format!("symbol {i} repeats an earlier permutation")));
            }
            matrices.push(matrix);
        }
        Ok(Self { h, table, matrices })
    }

    /// `M = H = 2`: symbol 0 -> 12, symbol 1 -> 21.
    pub fn two_band() -> Self {
        Self::new(vec![vec![1, 2], vec![2, 1]]).expect("static table")
    }

    /// `M = 4, H = 3`: 00 -> 231, 01 -> 213, 10 -> 132, 11 -> 123.
    pub fn three_band() -> Self {
        Self::new(vec![
            vec![2, 3, 1],
            vec![2, 1, 3],
            vec![1, 3, 2],
            vec![1, 2, 3],
        ])
        .expect("static table")
    }

    /// Picks `symbols` permutations of `1..=h` greedily: start from the
    /// identity, then repeatedly add the permutation with the largest minimum
    /// distance to those already chosen, breaking ties lexicographically.
    pub fn greedy(h: usize, symbols: usize) -> Result<Self> {
        check_bands(h)?;
        if symbols as u128 > factorial(h) {
            return Err(domain(format!("{symbols} symbols exceed {h}! permutations")));
        }
        let candidates = lexicographic_permutations(h);
        let mut chosen: Vec<Vec<u8>> = Vec::with_capacity(symbols);
        let mut min_dist = vec![usize::MAX; candidates.len()];
        for _ in 0..symbols {
            let pick = (0..candidates.len())
                .filter(|&c| min_dist[c] > 0)
                .max_by(|&a, &b| min_dist[a].cmp(&min_dist[b]).then(b.cmp(&a)))
                .ok_or_else(|| domain("ran out of permutations"))?;
            let picked = candidates[pick].clone();
            for (c, cand) in candidates.iter().enumerate() {
                let d = cand.iter().zip(&picked).filter(|(x, y)| x != y).count();
                min_dist[c] = min_dist[c].min(d);
            }
            chosen.push(picked);
        }
        Self::new(chosen)
    }

    /// The mapping used by default for a band count: the fixed tables for
    /// `H = 2, 3` and a greedy table with `symbols` entries otherwise.
    pub fn standard(h: usize, symbols: usize) -> Result<Self> {
        match (h, symbols) {
            (2, 2) => Ok(Self::two_band()),
            (3, 4) => Ok(Self::three_band()),
            _ => Self::greedy(h, symbols),
        }
    }

    /// Parses `SYMBOL_BITS PERM` lines, e.g. `01 213`. Blank lines and `#`
    /// comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, usize, Vec<u8>)> = Vec::new();
        let mut bits_len = None;
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: line_no, message };
            let mut fields = line.split_whitespace();
            let (Some(bits), Some(perm), None) = (fields.next(), fields.next(), fields.next())
            else {
                return Err(parse_err(format!("expected `SYMBOL_BITS PERM`, got `{line}`")));
            };
            if !bits.chars().all(|c| c == '0' || c == '1') {
                return Err(parse_err(format!("symbol `{bits}` is not binary")));
            }
            match bits_len {
                None => bits_len = Some(bits.len()),
                Some(len) if len != bits.len() => {
                    return Err(parse_err(format!("symbol `{bits}` should have {len} bits")))
                }
                _ => {}
            }
            let symbol = usize::from_str_radix(bits, 2)
                .map_err(|e| parse_err(format!("symbol `{bits}`: {e}")))?;
            let perm = perm
                .chars()
                .map(|c| {
                    c.to_digit(10)
                        .map(|d| d as u8)
                        .ok_or_else(|| parse_err(format!("`{c}` is not a band digit")))
                })
                .collect::<Result<Vec<u8>>>()?;
            entries.push((line_no, symbol, perm));
        }
        let bits = bits_len.ok_or_else(|| Error::Parse { line: 0, message: "empty mapping".into() })?;
        let m = 1usize << bits;
        let mut table = vec![None; m];
        for (line, symbol, perm) in entries {
            if table[symbol].is_some() {
                return Err(Error::Parse { line, message: format!("symbol {symbol:0bits$b} defined twice") });
            }
            table[symbol] = Some(perm);
        }
        let table = table
            .into_iter()
            .enumerate()
            .map(|(s, p)| {
                p.ok_or_else(|| Error::Parse { line: 0, message: format!("symbol {s:0bits$b} missing") })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Renders the mapping in the same text format `parse` accepts.
    pub fn to_text(&self) -> String {
        let bits = self.symbol_bits();
        self.matrices
            .iter()
            .enumerate()
            .map(|(s, m)| format!("{s:0bits$b} {m}\n"))
            .collect()
    }

    pub fn h(&self) -> usize {
        self.h
    }

    /// Number of symbols `M`.
    pub fn symbols(&self) -> usize {
        self.table.len()
    }

    /// Bits per symbol, `log2 M`.
    pub fn symbol_bits(&self) -> usize {
        self.table.len().trailing_zeros() as usize
    }

    pub fn table(&self) -> &[Vec<u8>] {
        &self.table
    }

    pub fn matrices(&self) -> &[CodeMatrix] {
        &self.matrices
    }

    pub fn map_symbol(&self, symbol: usize) -> Result<CodeMatrix> {
        self.matrices.get(symbol).copied().ok_or_else(|| {
            domain(format!("symbol {symbol} outside 0..{}", self.matrices.len()))
        })
    }

    /// Concatenates the code matrices of a symbol sequence.
    pub fn expand_codeword(&self, symbols: &[usize]) -> Result<ExpandedCodeword> {
        let blocks = symbols
            .iter()
            .map(|&s| self.map_symbol(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(ExpandedCodeword { h: self.h, blocks })
    }
}

fn lexicographic_permutations(h: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut current: Vec<u8> = (1..=h as u8).collect();
    loop {
        out.push(current.clone());
        // next permutation in lexicographic order
        let Some(i) = (0..h.saturating_sub(1)).rev().find(|&i| current[i] < current[i + 1]) else {
            break;
        };
        let j = (i + 1..h).rev().find(|&j| current[j] > current[i]).expect("pivot exists");
        current.swap(i, j);
        current[i + 1..].reverse();
    }
    out
}

/// The concatenated code matrices of one codeword, one block per trellis
/// branch.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ExpandedCodeword {
    h: usize,
    blocks: Vec<CodeMatrix>,
}

impl ExpandedCodeword {
    pub fn from_blocks(h: usize, blocks: Vec<CodeMatrix>) -> Result<Self> {
        if let Some(b) = blocks.iter().find(|b| b.h != h) {
            return Err(domain(format!("block of size {} in an H={h} codeword", b.h)));
        }
        Ok(Self { h, blocks })
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn blocks(&self) -> &[CodeMatrix] {
        &self.blocks
    }

    pub fn branch_count(&self) -> usize {
        self.blocks.len()
    }

    /// Length in bits: `branch_count * H^2`.
    pub fn len(&self) -> usize {
        self.blocks.len() * self.h * self.h
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn bit(&self, index: usize) -> bool {
        let cells = self.h * self.h;
        self.blocks[index / cells].mask >> (index % cells) & 1 == 1
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..self.len()).map(|i| self.bit(i) as u8).collect()
    }

    pub fn weight(&self) -> u32 {
        self.blocks.iter().map(CodeMatrix::weight).sum()
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        if !self.is_empty() && !other.is_empty() && self.h != other.h {
            return Err(domain("cannot concatenate codewords with different H"));
        }
        let h = if self.is_empty() { other.h } else { self.h };
        let mut blocks = self.blocks.clone();
        blocks.extend_from_slice(&other.blocks);
        Ok(Self { h, blocks })
    }

    /// Hamming distance between two expanded codewords of equal shape.
    pub fn distance(&self, other: &Self) -> Result<u32> {
        if self.h != other.h || self.blocks.len() != other.blocks.len() {
            return Err(Error::LengthMismatch { expected: self.len(), found: other.len() });
        }
        Ok(self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| (a.mask ^ b.mask).count_ones())
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(perm: &[u8]) -> CodeMatrix {
        CodeMatrix::from_permutation(perm).unwrap()
    }

    #[test]
    fn symbol_01_maps_to_213() {
        let t = PermutationMapping::three_band().map_symbol(0b01).unwrap();
        assert_eq!(t.rows(), vec![vec![0, 1, 0], vec![1, 0, 0], vec![0, 0, 1]]);
    }

    #[test]
    fn identity_symbols() {
        let two = PermutationMapping::two_band().map_symbol(0).unwrap();
        assert_eq!(two.rows(), vec![vec![1, 0], vec![0, 1]]);
        let three = PermutationMapping::three_band().map_symbol(0b11).unwrap();
        assert_eq!(three.to_string(), "123");
        assert_eq!(three.rows(), vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
    }

    #[test]
    fn out_of_range_symbol() {
        assert!(matches!(
            PermutationMapping::three_band().map_symbol(4),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn distances_from_the_anchor_path() {
        assert_eq!(matrix_hamming_distance(&m(&[2, 3, 1]), &m(&[1, 2, 3])).unwrap(), 6);
        assert_eq!(matrix_hamming_distance(&m(&[2, 3, 1]), &m(&[1, 3, 2])).unwrap(), 4);
        assert_eq!(matrix_hamming_distance(&m(&[2, 3, 1]), &m(&[2, 3, 1])).unwrap(), 0);
        assert!(matrix_hamming_distance(&m(&[1, 2]), &m(&[1, 2, 3])).is_err());
    }

    #[test]
    fn pairwise_distance_is_twice_the_differing_positions() {
        for mapping in [PermutationMapping::two_band(), PermutationMapping::three_band()] {
            for (a, pa) in mapping.table().iter().enumerate() {
                for (b, pb) in mapping.table().iter().enumerate() {
                    let positions = pa.iter().zip(pb).filter(|(x, y)| x != y).count() as u32;
                    let d = matrix_hamming_distance(
                        &mapping.map_symbol(a).unwrap(),
                        &mapping.map_symbol(b).unwrap(),
                    )
                    .unwrap();
                    assert_eq!(d, 2 * positions);
                    if a != b {
                        assert!(d >= 2);
                    }
                }
            }
        }
    }

    #[test]
    fn expansion_of_the_anchor_symbols() {
        let mapping = PermutationMapping::three_band();
        let cw = mapping.expand_codeword(&[0b11, 0b10, 0b11]).unwrap();
        let perms: Vec<String> = cw.blocks().iter().map(ToString::to_string).collect();
        assert_eq!(perms, ["123", "132", "123"]);
        assert_eq!(cw.weight(), 9);
        assert_eq!(cw.len(), 27);
        // column-major: first column of 123 is band 1 at step 0
        assert_eq!(&cw.bits()[..3], &[1, 0, 0]);
        assert_eq!(&cw.bits()[3..6], &[0, 1, 0]);
    }

    #[test]
    fn empty_expansion() {
        let cw = PermutationMapping::three_band().expand_codeword(&[]).unwrap();
        assert!(cw.is_empty());
        assert_eq!(cw.len(), 0);
    }

    #[test]
    fn greedy_four_band_table() {
        let mapping = PermutationMapping::greedy(4, 4).unwrap();
        let perms: Vec<String> = mapping.matrices().iter().map(ToString::to_string).collect();
        assert_eq!(perms, ["1234", "2143", "3412", "4321"]);
        for a in mapping.matrices() {
            for b in mapping.matrices() {
                if a != b {
                    assert_eq!(matrix_hamming_distance(a, b).unwrap(), 8);
                }
            }
        }
    }

    #[test]
    fn greedy_rejects_too_many_symbols() {
        assert!(PermutationMapping::greedy(3, 8).is_err());
        assert!(PermutationMapping::greedy(3, 6).is_err()); // not a power of two
    }

    #[test]
    fn mapping_validation() {
        assert!(PermutationMapping::new(vec![vec![1, 2], vec![1, 2]]).is_err());
        assert!(PermutationMapping::new(vec![vec![1, 1], vec![2, 1]]).is_err());
        assert!(PermutationMapping::new(vec![vec![1, 2, 3], vec![2, 1]]).is_err());
        assert!(PermutationMapping::new(vec![vec![1, 2, 3]; 3]).is_err());
    }

    #[test]
    fn parse_mapping_file() {
        let text = "# table II\n00 231\n01 213\n10 132\n11 123\n";
        assert_eq!(PermutationMapping::parse(text).unwrap(), PermutationMapping::three_band());
        let round = PermutationMapping::parse(&PermutationMapping::three_band().to_text()).unwrap();
        assert_eq!(round, PermutationMapping::three_band());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = PermutationMapping::parse("00 231\n01 2x3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = PermutationMapping::parse("00 231\n00 213\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = PermutationMapping::parse("0 12\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
        assert!(PermutationMapping::parse("00 231\n01 231\n10 132\n11 123\n").is_err());
    }
}
