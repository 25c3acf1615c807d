//! Readers and writers for the external text formats.

pub mod fasta;
pub mod metadata;
pub mod newick;
pub mod partition;

pub use fasta::{parse_fasta, write_fasta};
pub use metadata::{parse_metadata, write_metadata, CaseMetadata, MetadataError, Stage};
pub use newick::{
    parse_newick, parse_newick_detailed, write_newick, NewickError, ParsedNewick, SupportScale,
};
pub use partition::{parse_partition, write_partition, PartitionFileError};
