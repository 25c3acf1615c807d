use std::fmt::Write as _;

use crate::alignment::{Alignment, AlignmentError, SequenceRecord};

/// Parses a FASTA alignment. The id is the first whitespace-delimited token
/// of each header; anything after it is ignored.
pub fn parse_fasta(text: &str) -> Result<Alignment, AlignmentError> {
    let mut records = Vec::new();
    let mut current: Option<(String, String)> = None;

    for line in text.lines() {
        let line = line.trim_end_matches('\r');
        if let Some(header) = line.strip_prefix('>') {
            if let Some((id, seq)) = current.take() {
                records.push(SequenceRecord::new(id, &seq)?);
            }
            let id = header.split_whitespace().next().unwrap_or("").to_string();
            current = Some((id, String::new()));
        } else if let Some((_, seq)) = current.as_mut() {
            seq.extend(line.chars().filter(|c| !c.is_whitespace()));
        } else if !line.trim().is_empty() {
            // sequence data before the first header
            let ch = line.trim().chars().next().unwrap_or(' ');
            return Err(AlignmentError::IllegalCharacter {
                ch,
                id: String::new(),
                site: 1,
            });
        }
    }
    if let Some((id, seq)) = current {
        records.push(SequenceRecord::new(id, &seq)?);
    }
    Alignment::new(records)
}

/// Serializes an alignment, one unwrapped sequence line per record.
pub fn write_fasta(alignment: &Alignment) -> String {
    let mut out = String::with_capacity(alignment.len() * (alignment.sites() + 16));
    for rec in alignment.records() {
        let _ = writeln!(out, ">{}", rec.id());
        out.push_str(rec.residues_str());
        out.push('\n');
    }
    out
}
