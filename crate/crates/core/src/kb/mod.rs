//! Unsupervised grouping of knowledge-base FAQ titles into topic clusters.
//!
//! Titles are first grouped by a normalized bag-of-words key, then clusters
//! are merged iteratively whenever a pairwise title-body judge accepts most
//! of their cross pairs. The judge is pluggable; [`JaccardJudge`] is the
//! built-in lexical default.

mod cluster;
mod io;
mod merge;
mod normalize;
mod pairs;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cluster::{apply_overrides, initial_clusters, Override};
pub use io::{parse_clusters, parse_kb, parse_overrides, write_clusters, write_pairs};
pub use merge::{
    merge_clusters, merge_clusters_observed, propose_body_merges, ConstantJudge, JaccardJudge, JudgeError, MergeConfig,
    MergeFailure, MergeOutcome, PairJudge, RoundReport,
};
pub use normalize::{body_key, default_stopwords, normalize_title, Stopwords, MIN_BODY_TOKENS};
pub use pairs::{generate_pair_dataset, Label, PairDataset, PairExample};

/// Cluster id reserved for non-knowledge-seeking user turns.
pub const NON_KNOWLEDGE_CLUSTER: usize = 0;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum KbError {
    #[error("malformed knowledge base: {0}")]
    MalformedKb(String),
    #[error("malformed clusters file: {0}")]
    MalformedClusters(String),
    #[error("malformed override file: {0}")]
    MalformedOverrides(String),
    #[error("duplicate knowledge entry {0}")]
    DuplicateEntry(DocRef),
    #[error("entry {0} has an empty title")]
    EmptyTitle(DocRef),
    #[error("clusters do not partition the entries: {0}")]
    NotAPartition(String),
    #[error("unknown document {0}")]
    UnknownDoc(DocRef),
    #[error("cluster {0} is reserved")]
    ReservedCluster(usize),
    #[error("invalid merge setting: {0}")]
    InvalidConfig(String),
    #[error("pair judge failed: {0}")]
    Judge(String),
}

/// (domain, entity id, doc id) of a knowledge entry.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(String, String, String)", into = "(String, String, String)")]
pub struct DocRef {
    pub domain: String,
    pub entity_id: String,
    pub doc_id: String,
}

impl DocRef {
    pub fn new(domain: impl Into<String>, entity_id: impl Into<String>, doc_id: impl Into<String>) -> Self {
        DocRef {
            domain: domain.into(),
            entity_id: entity_id.into(),
            doc_id: doc_id.into(),
        }
    }
}

impl From<(String, String, String)> for DocRef {
    fn from((domain, entity_id, doc_id): (String, String, String)) -> Self {
        DocRef {
            domain,
            entity_id,
            doc_id,
        }
    }
}

impl From<DocRef> for (String, String, String) {
    fn from(r: DocRef) -> Self {
        (r.domain, r.entity_id, r.doc_id)
    }
}

impl std::fmt::Display for DocRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}/{}", self.domain, self.entity_id, self.doc_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeEntry {
    pub doc: DocRef,
    pub title: String,
    pub body: String,
}

impl KnowledgeEntry {
    pub fn new(doc: DocRef, title: impl Into<String>, body: impl Into<String>) -> Self {
        KnowledgeEntry {
            doc,
            title: title.into(),
            body: body.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeCluster {
    pub cluster_id: usize,
    pub key: String,
    pub members: BTreeSet<DocRef>,
}

/// Clusters ordered by id; the first is always the empty reserved
/// non-knowledge cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    clusters: Vec<KnowledgeCluster>,
}

impl Clustering {
    /// Sorts by id and adds the reserved cluster if missing.
    pub fn new(mut clusters: Vec<KnowledgeCluster>) -> Result<Self, KbError> {
        clusters.sort_by_key(|c| c.cluster_id);
        if clusters.first().map(|c| c.cluster_id) != Some(NON_KNOWLEDGE_CLUSTER) {
            clusters.insert(0, Self::reserved());
        } else if !clusters[0].members.is_empty() {
            return Err(KbError::ReservedCluster(NON_KNOWLEDGE_CLUSTER));
        }
        if clusters.windows(2).any(|w| w[0].cluster_id == w[1].cluster_id) {
            return Err(KbError::NotAPartition("duplicate cluster id".into()));
        }
        Ok(Clustering { clusters })
    }

    fn reserved() -> KnowledgeCluster {
        KnowledgeCluster {
            cluster_id: NON_KNOWLEDGE_CLUSTER,
            key: String::new(),
            members: BTreeSet::new(),
        }
    }

    /// Every cluster, reserved one first.
    pub fn all(&self) -> &[KnowledgeCluster] {
        &self.clusters
    }

    /// Clusters other than the reserved one.
    pub fn knowledge_clusters(&self) -> &[KnowledgeCluster] {
        &self.clusters[1..]
    }

    pub fn len(&self) -> usize {
        self.clusters.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cluster_of(&self, doc: &DocRef) -> Option<usize> {
        self.clusters
            .iter()
            .find(|c| c.members.contains(doc))
            .map(|c| c.cluster_id)
    }

    /// Checks the knowledge clusters are non-empty, disjoint, and cover
    /// exactly `entries`.
    pub fn check_partition(&self, entries: &[KnowledgeEntry]) -> Result<(), KbError> {
        let mut seen = BTreeSet::new();
        for c in self.knowledge_clusters() {
            if c.members.is_empty() {
                return Err(KbError::NotAPartition(format!("cluster {} is empty", c.cluster_id)));
            }
            for m in &c.members {
                if !seen.insert(m) {
                    return Err(KbError::NotAPartition(format!("{m} is in two clusters")));
                }
            }
        }
        let expected: BTreeSet<&DocRef> = entries.iter().map(|e| &e.doc).collect();
        if let Some(missing) = expected.difference(&seen).next() {
            return Err(KbError::NotAPartition(format!("{missing} is in no cluster")));
        }
        if let Some(extra) = seen.difference(&expected).next() {
            return Err(KbError::NotAPartition(format!("{extra} is not a known entry")));
        }
        Ok(())
    }

    /// Renumbers knowledge clusters 1..=N, keeping their order.
    pub(crate) fn renumbered(mut self) -> Self {
        for (i, c) in self.clusters.iter_mut().enumerate().skip(1) {
            c.cluster_id = i;
        }
        self
    }
}
