use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::normalize::{normalize_title, Stopwords};
use super::{Clustering, DocRef, KbError, KnowledgeCluster, KnowledgeEntry, NON_KNOWLEDGE_CLUSTER};

pub(crate) fn check_entries(entries: &[KnowledgeEntry]) -> Result<(), KbError> {
    let mut seen = BTreeSet::new();
    for e in entries {
        if e.title.trim().is_empty() {
            return Err(KbError::EmptyTitle(e.doc.clone()));
        }
        if !seen.insert(&e.doc) {
            return Err(KbError::DuplicateEntry(e.doc.clone()));
        }
    }
    Ok(())
}

/// Groups entries whose titles normalize to the same key. Entries whose
/// title is all stopwords get a singleton cluster each. Ids run from 1 in
/// key order (ties between empty keys broken by document).
pub fn initial_clusters(entries: &[KnowledgeEntry], stopwords: &Stopwords) -> Result<Clustering, KbError> {
    check_entries(entries)?;
    let mut by_key: BTreeMap<String, BTreeSet<DocRef>> = BTreeMap::new();
    let mut singletons: Vec<DocRef> = Vec::new();
    for e in entries {
        let key = normalize_title(&e.title, stopwords);
        if key.is_empty() {
            singletons.push(e.doc.clone());
        } else {
            by_key.entry(key).or_default().insert(e.doc.clone());
        }
    }
    singletons.sort();
    let clusters = singletons
        .into_iter()
        .map(|d| (String::new(), BTreeSet::from([d])))
        .chain(by_key)
        .enumerate()
        .map(|(i, (key, members))| KnowledgeCluster {
            cluster_id: i + 1,
            key,
            members,
        })
        .collect();
    Clustering::new(clusters)
}

/// A manual correction: move one document into a given cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Override {
    pub doc_ref: DocRef,
    pub forced_cluster_id: usize,
}

/// Moves each overridden document into its forced cluster, creating the
/// cluster if needed, and drops clusters left empty. Ids are kept.
pub fn apply_overrides(clustering: &Clustering, overrides: &[Override]) -> Result<Clustering, KbError> {
    let mut clusters: BTreeMap<usize, KnowledgeCluster> = clustering
        .knowledge_clusters()
        .iter()
        .map(|c| (c.cluster_id, c.clone()))
        .collect();
    for o in overrides {
        if o.forced_cluster_id == NON_KNOWLEDGE_CLUSTER {
            return Err(KbError::ReservedCluster(NON_KNOWLEDGE_CLUSTER));
        }
        let from = clusters
            .values()
            .find(|c| c.members.contains(&o.doc_ref))
            .map(|c| c.cluster_id)
            .ok_or_else(|| KbError::UnknownDoc(o.doc_ref.clone()))?;
        clusters.get_mut(&from).expect("found above").members.remove(&o.doc_ref);
        clusters
            .entry(o.forced_cluster_id)
            .or_insert_with(|| KnowledgeCluster {
                cluster_id: o.forced_cluster_id,
                key: String::new(),
                members: BTreeSet::new(),
            })
            .members
            .insert(o.doc_ref.clone());
    }
    Clustering::new(clusters.into_values().filter(|c| !c.members.is_empty()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::default_stopwords;

    fn entry(doc: &str, title: &str) -> KnowledgeEntry {
        KnowledgeEntry::new(DocRef::new("hotel", "1", doc), title, "")
    }

    #[test]
    fn wifi_variants_co_clustered() {
        let entries = vec![
            entry("1", "Does it have free wifi?"),
            entry("2", "Is the wifi free"),
            entry("3", "Is parking available?"),
        ];
        let c = initial_clusters(&entries, &default_stopwords()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.cluster_of(&entries[0].doc), c.cluster_of(&entries[1].doc));
        assert_ne!(c.cluster_of(&entries[0].doc), c.cluster_of(&entries[2].doc));
        c.check_partition(&entries).unwrap();
        // key order: "available parking" < "free wifi"
        assert_eq!(c.knowledge_clusters()[1].key, "free wifi");
        assert_eq!(c.all()[0].cluster_id, NON_KNOWLEDGE_CLUSTER);
    }

    #[test]
    fn distinct_keys_and_empty_input() {
        let sw = default_stopwords();
        let entries = vec![entry("1", "wifi"), entry("2", "parking"), entry("3", "pets")];
        assert_eq!(initial_clusters(&entries, &sw).unwrap().len(), 3);
        let c = initial_clusters(&[], &sw).unwrap();
        assert_eq!(c.len(), 0);
        assert_eq!(c.all().len(), 1);
    }

    #[test]
    fn all_stopword_titles_are_singletons() {
        let sw = default_stopwords();
        let entries = vec![entry("1", "Is it?"), entry("2", "Can I?"), entry("3", "wifi")];
        let c = initial_clusters(&entries, &sw).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.knowledge_clusters()[0].key, "");
        assert_eq!(c.knowledge_clusters()[0].members.iter().next().unwrap().doc_id, "1");
    }

    #[test]
    fn rejects_duplicates_and_empty_titles() {
        let sw = default_stopwords();
        assert!(matches!(
            initial_clusters(&[entry("1", "a"), entry("1", "b")], &sw),
            Err(KbError::DuplicateEntry(_))
        ));
        assert!(matches!(
            initial_clusters(&[entry("1", " ")], &sw),
            Err(KbError::EmptyTitle(_))
        ));
    }

    #[test]
    fn overrides_move_documents() {
        let sw = default_stopwords();
        let entries = vec![entry("1", "wifi"), entry("2", "parking"), entry("3", "pets")];
        let c = initial_clusters(&entries, &sw).unwrap();
        let target = c.cluster_of(&entries[0].doc).unwrap();
        let moved = apply_overrides(
            &c,
            &[Override {
                doc_ref: entries[1].doc.clone(),
                forced_cluster_id: target,
            }],
        )
        .unwrap();
        assert_eq!(moved.len(), 2);
        assert_eq!(moved.cluster_of(&entries[1].doc), Some(target));
        moved.check_partition(&entries).unwrap();
        let fresh = apply_overrides(
            &c,
            &[Override {
                doc_ref: entries[1].doc.clone(),
                forced_cluster_id: 40,
            }],
        )
        .unwrap();
        assert_eq!(fresh.cluster_of(&entries[1].doc), Some(40));
        assert!(matches!(
            apply_overrides(
                &c,
                &[Override {
                    doc_ref: DocRef::new("x", "y", "z"),
                    forced_cluster_id: 1
                }]
            ),
            Err(KbError::UnknownDoc(_))
        ));
        assert!(matches!(
            apply_overrides(
                &c,
                &[Override {
                    doc_ref: entries[1].doc.clone(),
                    forced_cluster_id: 0
                }]
            ),
            Err(KbError::ReservedCluster(0))
        ));
    }
}
