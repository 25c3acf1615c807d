//! Two-column partition tables.

use thiserror::Error;

use crate::partition::{Partition, PartitionError};

pub const PARTITION_HEADER: &str = "id,label";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PartitionFileError {
    #[error("line {line}: expected two fields")]
    Malformed { line: usize },
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// Writes `id,label` rows sorted by id, preceded by a header line.
pub fn write_partition(p: &Partition) -> String {
    let mut out = String::from(PARTITION_HEADER);
    out.push('\n');
    for (id, label) in p.iter() {
        out.push_str(id);
        out.push(',');
        out.push_str(label);
        out.push('\n');
    }
    out
}

/// Reads a partition table; the header line is optional. Tabs are accepted
/// as the delimiter when a line contains no comma.
pub fn parse_partition(text: &str) -> Result<Partition, PartitionFileError> {
    let mut p = Partition::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let delim = if line.contains(',') { ',' } else { '\t' };
        let mut fields = line.split(delim).map(str::trim);
        let (Some(id), Some(label), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(PartitionFileError::Malformed { line: i + 1 });
        };
        if i == 0 && id.eq_ignore_ascii_case("id") && label.eq_ignore_ascii_case("label") {
            continue;
        }
        if id.is_empty() || label.is_empty() {
            return Err(PartitionFileError::Malformed { line: i + 1 });
        }
        p.insert(id, label)?;
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_rows() {
        let p = Partition::from_labels(&["c", "a", "b"], &[2, 1, 1]).unwrap();
        assert_eq!(write_partition(&p), "id,label\na,1\nb,1\nc,2\n");
    }

    #[test]
    fn empty_partition_is_header_only() {
        assert_eq!(write_partition(&Partition::new()), "id,label\n");
        assert!(parse_partition("id,label\n").unwrap().is_empty());
    }

    #[test]
    fn headerless_and_tabbed_input() {
        let p = parse_partition("a\t1\nb\t1\n").unwrap();
        assert_eq!(p.label("b"), Some("1"));
    }

    #[test]
    fn duplicate_id_rejected() {
        assert!(matches!(
            parse_partition("a,1\na,2\n"),
            Err(PartitionFileError::Partition(PartitionError::DuplicateId(_)))
        ));
    }

    proptest! {
        #[test]
        fn parse_write_identity(labels in proptest::collection::vec(0u16..40, 0..1000)) {
            let ids: Vec<String> = (0..labels.len()).map(|i| format!("s{i}")).collect();
            let p = Partition::from_labels(&ids, &labels).unwrap();
            let text = write_partition(&p);
            let q = parse_partition(&text).unwrap();
            prop_assert_eq!(&p, &q);
            prop_assert_eq!(write_partition(&q), text);
        }
    }
}
