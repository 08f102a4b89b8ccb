use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Clustering, DocRef, KbError, KnowledgeEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairExample {
    pub title: String,
    pub body: String,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PairDataset {
    pub examples: Vec<PairExample>,
    /// Entries that had no title to swap in.
    pub without_negative: Vec<DocRef>,
}

impl PairDataset {
    pub fn count(&self, label: Label) -> usize {
        self.examples.iter().filter(|e| e.label == label).count()
    }
}

/// Builds title-body training pairs for a pair judge.
///
/// Positives are every (title of a, body of b) for a, b in the same cluster,
/// which includes each entry's own pair. Each entry also gets one negative:
/// its body with a title drawn uniformly from the other distinct titles of
/// the same entity. Titles from the entry's own cluster are not eligible, as
/// cross enumeration already labels them positive.
pub fn generate_pair_dataset<R: Rng + ?Sized>(
    entries: &[KnowledgeEntry],
    clustering: &Clustering,
    rng: &mut R,
) -> Result<PairDataset, KbError> {
    super::cluster::check_entries(entries)?;
    clustering.check_partition(entries)?;
    let by_doc: BTreeMap<&DocRef, &KnowledgeEntry> = entries.iter().map(|e| (&e.doc, e)).collect();
    let cluster_of: BTreeMap<&DocRef, usize> = clustering
        .knowledge_clusters()
        .iter()
        .flat_map(|c| c.members.iter().map(move |m| (m, c.cluster_id)))
        .collect();

    let mut out = PairDataset::default();
    for c in clustering.knowledge_clusters() {
        for a in &c.members {
            for b in &c.members {
                out.examples.push(PairExample {
                    title: by_doc[a].title.clone(),
                    body: by_doc[b].body.clone(),
                    label: Label::Positive,
                });
            }
        }
    }

    let mut by_entity: BTreeMap<(&str, &str), Vec<&KnowledgeEntry>> = BTreeMap::new();
    for e in by_doc.values() {
        by_entity.entry((&e.doc.domain, &e.doc.entity_id)).or_default().push(e);
    }
    for e in by_doc.values() {
        let own_cluster = cluster_of[&e.doc];
        let mut candidates: Vec<&str> = by_entity[&(e.doc.domain.as_str(), e.doc.entity_id.as_str())]
            .iter()
            .filter(|o| o.title != e.title && cluster_of[&o.doc] != own_cluster)
            .map(|o| o.title.as_str())
            .collect();
        candidates.sort_unstable();
        candidates.dedup();
        if candidates.is_empty() {
            out.without_negative.push(e.doc.clone());
            continue;
        }
        let title = candidates[rng.gen_range(0..candidates.len())];
        out.examples.push(PairExample {
            title: title.to_owned(),
            body: e.body.clone(),
            label: Label::Negative,
        });
    }
    Ok(out)
}
