//! Transmission-cluster estimation for pathogen sequence data.
//!
//! Partitions of sampled sequences are estimated from pairwise distances
//! and rooted phylogenies, then compared and summarised.

pub mod alignment;
pub mod community;
pub mod distance;
pub mod evaluation;
pub mod gap;
pub mod growth;
pub mod io;
pub mod mcmc;
pub mod partition;
pub mod phylo;
pub mod simulate;
pub mod threshold;

pub use alignment::{Alignment, AlignmentError, SequenceRecord};
pub use distance::{DistanceError, DistanceKind, DistanceMatrix};
pub use partition::{Partition, PartitionError};
pub use phylo::{PhyloTree, TreeError};
