//! Bit-packed nucleotide encoding for fast pairwise counting.
//!
//! Each unambiguous base is two bits split across two planes:
//! A = (0,0), G = (0,1), C = (1,0), T = (1,1) as (hi, lo). Purines share
//! hi = 0 and pyrimidines hi = 1, so a transversion flips `hi` and a
//! transition flips only `lo`. A third plane marks sites holding A/C/G/T.

use super::PairComparison;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedSequence {
    valid: Vec<u64>,
    hi: Vec<u64>,
    lo: Vec<u64>,
    len: usize,
}

impl PackedSequence {
    pub fn new(residues: &[u8]) -> Self {
        let words = residues.len().div_ceil(64);
        let mut valid = vec![0u64; words];
        let mut hi = vec![0u64; words];
        let mut lo = vec![0u64; words];
        for (site, &r) in residues.iter().enumerate() {
            let (h, l) = match r {
                b'A' => (0, 0),
                b'G' => (0, 1),
                b'C' => (1, 0),
                b'T' => (1, 1),
                _ => continue,
            };
            let (w, bit) = (site / 64, site % 64);
            valid[w] |= 1 << bit;
            hi[w] |= h << bit;
            lo[w] |= l << bit;
        }
        Self {
            valid,
            hi,
            lo,
            len: residues.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Counts under pairwise deletion. Both sequences must have equal length.
    pub fn compare(&self, other: &PackedSequence) -> PairComparison {
        debug_assert_eq!(self.len, other.len);
        let mut compared = 0u32;
        let mut transitions = 0u32;
        let mut transversions = 0u32;
        for w in 0..self.valid.len() {
            let mask = self.valid[w] & other.valid[w];
            let dh = (self.hi[w] ^ other.hi[w]) & mask;
            let dl = (self.lo[w] ^ other.lo[w]) & mask & !dh;
            compared += mask.count_ones();
            transversions += dh.count_ones();
            transitions += dl.count_ones();
        }
        PairComparison {
            compared_sites: compared as usize,
            mismatches: (transitions + transversions) as usize,
            transitions: transitions as usize,
            transversions: transversions as usize,
        }
    }
}
