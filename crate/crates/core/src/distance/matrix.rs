//! Symmetric distance matrix with per-pair definedness, and its PHYLIP and
//! binary triangle encodings.

use std::fmt::{self, Write as _};

use rayon::prelude::*;

use super::DistanceError;

pub const BINARY_MAGIC: &[u8; 4] = b"PCDM";
pub const BINARY_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistanceKind {
    PDistance,
    K80,
    Patristic,
    /// Matrices that did not come from one of the built-in measures, e.g.
    /// co-clustering frequencies or matrices read from disk.
    Other,
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceKind::PDistance => "p-distance",
            DistanceKind::K80 => "k80",
            DistanceKind::Patristic => "patristic",
            DistanceKind::Other => "other",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairFlag {
    Defined,
    Undefined,
    /// Undefined value replaced by a cap.
    Capped,
}

/// Upper-triangle store of pairwise values. The diagonal is implicit 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    ids: Vec<String>,
    kind: DistanceKind,
    values: Vec<f64>,
    flags: Vec<PairFlag>,
}

#[inline]
fn tri_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl DistanceMatrix {
    /// Builds a matrix by evaluating `f(i, j)` for every `i < j`, in parallel
    /// over rows. `None` marks an undefined pair.
    pub fn from_pair_fn<F>(ids: Vec<String>, kind: DistanceKind, f: F) -> Self
    where
        F: Fn(usize, usize) -> Option<f64> + Sync,
    {
        let n = ids.len();
        let mut values = vec![0.0; n * n.saturating_sub(1) / 2];
        let mut rows: Vec<(usize, &mut [f64])> = Vec::with_capacity(n);
        let mut rest = values.as_mut_slice();
        for i in 0..n.saturating_sub(1) {
            let (row, tail) = rest.split_at_mut(n - i - 1);
            rows.push((i, row));
            rest = tail;
        }
        rows.into_par_iter().for_each(|(i, row)| {
            for (k, slot) in row.iter_mut().enumerate() {
                *slot = f(i, i + 1 + k).unwrap_or(f64::NAN);
            }
        });
        let flags = values
            .iter()
            .map(|v| {
                if v.is_nan() {
                    PairFlag::Undefined
                } else {
                    PairFlag::Defined
                }
            })
            .collect();
        Self {
            ids,
            kind,
            values,
            flags,
        }
    }

    /// Builds from a dense row-major `n × n` matrix. Entries must be
    /// symmetric within `1e-12` and the diagonal zero.
    pub fn from_dense(
        ids: Vec<String>,
        kind: DistanceKind,
        dense: &[f64],
    ) -> Result<Self, DistanceError> {
        let n = ids.len();
        if dense.len() != n * n {
            return Err(DistanceError::Format(format!(
                "expected {} entries, got {}",
                n * n,
                dense.len()
            )));
        }
        for i in 0..n {
            if dense[i * n + i] != 0.0 {
                return Err(DistanceError::Format(format!("non-zero diagonal at row {i}")));
            }
            for j in i + 1..n {
                let (a, b) = (dense[i * n + j], dense[j * n + i]);
                let same = (a.is_nan() && b.is_nan()) || (a - b).abs() <= 1e-12;
                if !same {
                    return Err(DistanceError::Asymmetric(i, j));
                }
            }
        }
        Ok(Self::from_pair_fn(ids, kind, |i, j| {
            let v = dense[i * n + j];
            (!v.is_nan()).then_some(v)
        }))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn kind(&self) -> DistanceKind {
        self.kind
    }

    /// The value at `(i, j)`, `None` when undefined.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.value(i, j);
        (!v.is_nan()).then_some(v)
    }

    /// The raw value, NaN when undefined.
    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.values[tri_index(self.len(), i, j)],
            std::cmp::Ordering::Greater => self.values[tri_index(self.len(), j, i)],
        }
    }

    pub fn flag(&self, i: usize, j: usize) -> PairFlag {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => PairFlag::Defined,
            std::cmp::Ordering::Less => self.flags[tri_index(self.len(), i, j)],
            std::cmp::Ordering::Greater => self.flags[tri_index(self.len(), j, i)],
        }
    }

    /// Row `i` including the zero diagonal entry.
    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.len()).map(|j| self.value(i, j)).collect()
    }

    /// Upper-triangle values in row-major order.
    pub fn upper_triangle(&self) -> &[f64] {
        &self.values
    }

    pub fn count(&self, flag: PairFlag) -> usize {
        self.flags.iter().filter(|&&f| f == flag).count()
    }

    /// Replaces undefined entries with `cap` and flags them as capped.
    /// Returns how many entries were replaced.
    pub fn apply_cap(&mut self, cap: f64) -> usize {
        let mut replaced = 0;
        for (v, flag) in self.values.iter_mut().zip(self.flags.iter_mut()) {
            if *flag == PairFlag::Undefined {
                *v = cap;
                *flag = PairFlag::Capped;
                replaced += 1;
            }
        }
        replaced
    }

    /// Returns the first undefined pair, if any.
    pub fn first_undefined(&self) -> Option<(usize, usize)> {
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .find(|&(i, j)| self.value(i, j).is_nan())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut m = self.clone();
        for v in &mut m.values {
            *v *= factor;
        }
        m
    }

    /// Sub-matrix over the given indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let ids = indices.iter().map(|&i| self.ids[i].clone()).collect();
        let mut m = Self::from_pair_fn(ids, self.kind, |a, b| self.get(indices[a], indices[b]));
        for a in 0..indices.len() {
            for b in a + 1..indices.len() {
                let k = tri_index(indices.len(), a, b);
                m.flags[k] = self.flag(indices[a], indices[b]);
            }
        }
        m
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Square PHYLIP layout; undefined entries are written as `NA`.
    pub fn to_phylip(&self) -> String {
        let n = self.len();
        let mut out = String::with_capacity(n * n * 8);
        let _ = writeln!(out, "{n}");
        for i in 0..n {
            out.push_str(&self.ids[i]);
            for j in 0..n {
                let v = self.value(i, j);
                if v.is_nan() {
                    out.push_str(" NA");
                } else {
                    let _ = write!(out, " {v}");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_phylip(text: &str, kind: DistanceKind) -> Result<Self, DistanceError> {
        let mut tokens = text.split_whitespace();
        let n: usize = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| DistanceError::Format("missing taxon count".into()))?;
        let mut ids = Vec::with_capacity(n);
        let mut dense = Vec::with_capacity(n * n);
        for row in 0..n {
            let id = tokens
                .next()
                .ok_or_else(|| DistanceError::Format(format!("missing row {}", row + 1)))?;
            ids.push(id.to_string());
            for _ in 0..n {
                let t = tokens
                    .next()
                    .ok_or_else(|| DistanceError::Format(format!("short row {}", row + 1)))?;
                let v = if t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan") {
                    f64::NAN
                } else {
                    t.parse()
                        .map_err(|_| DistanceError::Format(format!("bad value {t:?}")))?
                };
                dense.push(v);
            }
        }
        if tokens.next().is_some() {
            return Err(DistanceError::Format("trailing data".into()));
        }
        Self::from_dense(ids, kind, &dense)
    }

    /// Binary triangle: magic, version byte, `n` as u64 LE, then the strict
    /// upper triangle row-major as f64 LE with NaN for undefined pairs.
    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(13 + self.values.len() * 8);
        out.extend_from_slice(BINARY_MAGIC);
        out.push(BINARY_VERSION);
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Reads the binary triangle. The format carries no ids; they come from
    /// `ids` or default to `"0".."n-1"`.
    pub fn from_binary(
        bytes: &[u8],
        ids: Option<Vec<String>>,
        kind: DistanceKind,
    ) -> Result<Self, DistanceError> {
        if bytes.len() < 13 || &bytes[..4] != BINARY_MAGIC {
            return Err(DistanceError::Format("bad magic".into()));
        }
        if bytes[4] != BINARY_VERSION {
            return Err(DistanceError::Format(format!("unsupported version {}", bytes[4])));
        }
        let n = u64::from_le_bytes(bytes[5..13].try_into().expect("8 bytes")) as usize;
        let count = n * n.saturating_sub(1) / 2;
        let body = &bytes[13..];
        if body.len() != count * 8 {
            return Err(DistanceError::Format(format!(
                "expected {} bytes of values, got {}",
                count * 8,
                body.len()
            )));
        }
        let ids = ids.unwrap_or_else(|| (0..n).map(|i| i.to_string()).collect());
        if ids.len() != n {
            return Err(DistanceError::Format(format!(
                "{} ids supplied for {n} rows",
                ids.len()
            )));
        }
        let values: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let flags = values
            .iter()
            .map(|v| {
                if v.is_nan() {
                    PairFlag::Undefined
                } else {
                    PairFlag::Defined
                }
            })
            .collect();
        Ok(Self {
            ids,
            kind,
            values,
            flags,
        })
    }
}
