//! Aligned nucleotide sequences.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlignmentError {
    #[error("alignment has no records")]
    EmptyInput,
    #[error("duplicate sequence id {0}")]
    DuplicateId(String),
    #[error("sequence {id} has length {got}, expected {expected}")]
    RaggedAlignment {
        expected: usize,
        got: usize,
        id: String,
    },
    #[error("illegal character {ch:?} in sequence {id} at site {site}")]
    IllegalCharacter { ch: char, id: String, site: usize },
    #[error("invalid sequence id {0:?}")]
    InvalidId(String),
    #[error("sequence {0} has no residues")]
    EmptySequence(String),
}

/// Normalizes one residue: uppercase, `U` to `T`, `.` to `-`. Returns `None`
/// for characters outside the IUPAC nucleotide alphabet.
pub fn normalize_residue(ch: char) -> Option<u8> {
    let up = ch.to_ascii_uppercase();
    match up {
        'U' => Some(b'T'),
        '.' => Some(b'-'),
        'A' | 'C' | 'G' | 'T' | 'R' | 'Y' | 'S' | 'W' | 'K' | 'M' | 'B' | 'D' | 'H' | 'V' | 'N'
        | '-' => Some(up as u8),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceRecord {
    id: String,
    residues: Vec<u8>,
}

impl SequenceRecord {
    /// Validates and normalizes a record.
    pub fn new(id: impl Into<String>, residues: &str) -> Result<Self, AlignmentError> {
        let id = id.into();
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(AlignmentError::InvalidId(id));
        }
        if residues.is_empty() {
            return Err(AlignmentError::EmptySequence(id));
        }
        let residues = residues
            .chars()
            .enumerate()
            .map(|(site, ch)| {
                normalize_residue(ch).ok_or_else(|| AlignmentError::IllegalCharacter {
                    ch,
                    id: id.clone(),
                    site: site + 1,
                })
            })
            .collect::<Result<Vec<u8>, _>>()?;
        Ok(Self { id, residues })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Normalized residues as ASCII bytes.
    pub fn residues(&self) -> &[u8] {
        &self.residues
    }

    pub fn residues_str(&self) -> &str {
        std::str::from_utf8(&self.residues).expect("residues are ASCII")
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }
}

/// Equal-length records with distinct ids, kept in input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    records: Vec<SequenceRecord>,
    index: HashMap<String, usize>,
}

impl Alignment {
    pub fn new(records: Vec<SequenceRecord>) -> Result<Self, AlignmentError> {
        let first = records.first().ok_or(AlignmentError::EmptyInput)?;
        let expected = first.len();
        let mut index = HashMap::with_capacity(records.len());
        for (i, rec) in records.iter().enumerate() {
            if rec.len() != expected {
                return Err(AlignmentError::RaggedAlignment {
                    expected,
                    got: rec.len(),
                    id: rec.id.clone(),
                });
            }
            if index.insert(rec.id.clone(), i).is_some() {
                return Err(AlignmentError::DuplicateId(rec.id.clone()));
            }
        }
        Ok(Self { records, index })
    }

    pub fn records(&self) -> &[SequenceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of aligned sites.
    pub fn sites(&self) -> usize {
        self.records[0].len()
    }

    pub fn get(&self, id: &str) -> Option<&SequenceRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.id.clone()).collect()
    }
}
