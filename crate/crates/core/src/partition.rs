//! Cluster-membership assignments keyed by sequence identifier.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PartitionError {
    #[error("id {0} assigned more than once")]
    DuplicateId(String),
    #[error("ids and labels differ in length ({ids} vs {labels})")]
    LengthMismatch { ids: usize, labels: usize },
    #[error("partitions do not cover the same ids")]
    IdSetMismatch,
    #[error("id {0} has no cluster assignment")]
    UnassignedId(String),
}

/// Map from sequence id to an opaque cluster label.
///
/// Labels only carry equality semantics. Ids are kept sorted, which makes
/// iteration and serialization canonical.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Partition {
    assignment: BTreeMap<String, String>,
}

impl Partition {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a partition from parallel id and label slices.
    pub fn from_labels<I, L>(ids: &[I], labels: &[L]) -> Result<Self, PartitionError>
    where
        I: AsRef<str>,
        L: ToString,
    {
        if ids.len() != labels.len() {
            return Err(PartitionError::LengthMismatch {
                ids: ids.len(),
                labels: labels.len(),
            });
        }
        let mut p = Partition::new();
        for (id, label) in ids.iter().zip(labels) {
            p.insert(id.as_ref(), label.to_string())?;
        }
        Ok(p)
    }

    /// Builds a partition from explicit clusters of ids. Clusters are labelled
    /// `1..=k` in the order given.
    pub fn from_clusters<S: AsRef<str>>(clusters: &[Vec<S>]) -> Result<Self, PartitionError> {
        let mut p = Partition::new();
        for (k, members) in clusters.iter().enumerate() {
            for id in members {
                p.insert(id.as_ref(), (k + 1).to_string())?;
            }
        }
        Ok(p)
    }

    pub fn insert(&mut self, id: &str, label: impl Into<String>) -> Result<(), PartitionError> {
        if self.assignment.contains_key(id) {
            return Err(PartitionError::DuplicateId(id.to_string()));
        }
        self.assignment.insert(id.to_string(), label.into());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn label(&self, id: &str) -> Option<&str> {
        self.assignment.get(id).map(String::as_str)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.assignment.contains_key(id)
    }

    /// (id, label) pairs in id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.assignment.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.assignment.keys().map(String::as_str)
    }

    pub fn id_set(&self) -> BTreeSet<&str> {
        self.ids().collect()
    }

    pub fn same_ids(&self, other: &Partition) -> bool {
        self.len() == other.len() && self.ids().zip(other.ids()).all(|(a, b)| a == b)
    }

    /// Clusters as sorted member lists, ordered by their smallest id.
    pub fn clusters(&self) -> Vec<Vec<String>> {
        let mut by_label: HashMap<&str, Vec<String>> = HashMap::new();
        for (id, label) in self.iter() {
            by_label.entry(label).or_default().push(id.to_string());
        }
        let mut clusters: Vec<Vec<String>> = by_label.into_values().collect();
        clusters.sort();
        clusters
    }

    /// Cluster sizes keyed by label.
    pub fn cluster_sizes(&self) -> BTreeMap<&str, usize> {
        let mut sizes = BTreeMap::new();
        for (_, label) in self.iter() {
            *sizes.entry(label).or_insert(0) += 1;
        }
        sizes
    }

    pub fn num_clusters(&self) -> usize {
        self.cluster_sizes().len()
    }

    /// Dense integer labels (0-based, in order of first appearance) for the
    /// given id order.
    pub fn dense_labels<S: AsRef<str>>(&self, order: &[S]) -> Result<Vec<usize>, PartitionError> {
        let mut codes: HashMap<&str, usize> = HashMap::new();
        order
            .iter()
            .map(|id| {
                let label = self
                    .label(id.as_ref())
                    .ok_or_else(|| PartitionError::UnassignedId(id.as_ref().to_string()))?;
                let next = codes.len();
                Ok(*codes.entry(label).or_insert(next))
            })
            .collect()
    }

    /// Relabels clusters `1..=k` by first appearance in id order. Two
    /// partitions with the same groupings canonicalize to equal values.
    pub fn canonical(&self) -> Partition {
        let mut codes: HashMap<&str, usize> = HashMap::new();
        let assignment = self
            .iter()
            .map(|(id, label)| {
                let next = codes.len() + 1;
                let code = *codes.entry(label).or_insert(next);
                (id.to_string(), code.to_string())
            })
            .collect();
        Partition { assignment }
    }

    /// True when every cluster of `self` lies inside a single cluster of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> Result<bool, PartitionError> {
        if !self.same_ids(coarser) {
            return Err(PartitionError::IdSetMismatch);
        }
        let mut image: HashMap<&str, &str> = HashMap::new();
        for (id, label) in self.iter() {
            let target = coarser.label(id).expect("same id set");
            match image.get(label) {
                Some(prev) if *prev != target => return Ok(false),
                _ => {
                    image.insert(label, target);
                }
            }
        }
        Ok(true)
    }
}

impl FromIterator<(String, String)> for Partition {
    /// Later duplicates overwrite earlier ones.
    fn from_iter<T: IntoIterator<Item = (String, String)>>(iter: T) -> Self {
        Partition {
            assignment: iter.into_iter().collect(),
        }
    }
}
