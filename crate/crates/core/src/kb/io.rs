//! File formats: the knowledge base (domain → entity → docs), clusters,
//! overrides, and the line-delimited pair dataset.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::Deserialize;

use super::cluster::Override;
use super::pairs::PairExample;
use super::{Clustering, DocRef, KbError, KnowledgeCluster, KnowledgeEntry};

#[derive(Deserialize)]
struct EntityRecord {
    // `name` and any other entity fields are ignored
    docs: BTreeMap<String, DocRecord>,
}

#[derive(Deserialize)]
struct DocRecord {
    title: String,
    #[serde(default)]
    body: String,
}

/// Reads `{domain: {entity_id: {name, docs: {doc_id: {title, body}}}}}`.
/// Entries come back sorted by (domain, entity id, doc id).
pub fn parse_kb(text: &str) -> Result<Vec<KnowledgeEntry>, KbError> {
    let kb: BTreeMap<String, BTreeMap<String, EntityRecord>> =
        serde_json::from_str(text).map_err(|e| KbError::MalformedKb(e.to_string()))?;
    let mut out = Vec::new();
    for (domain, entities) in kb {
        for (entity_id, entity) in entities {
            for (doc_id, doc) in entity.docs {
                let doc_ref = DocRef::new(domain.clone(), entity_id.clone(), doc_id);
                if doc.title.trim().is_empty() {
                    return Err(KbError::EmptyTitle(doc_ref));
                }
                out.push(KnowledgeEntry {
                    doc: doc_ref,
                    title: doc.title,
                    body: doc.body,
                });
            }
        }
    }
    Ok(out)
}

pub fn parse_clusters(text: &str) -> Result<Clustering, KbError> {
    let clusters: Vec<KnowledgeCluster> =
        serde_json::from_str(text).map_err(|e| KbError::MalformedClusters(e.to_string()))?;
    Clustering::new(clusters)
}

/// Pretty JSON list of every cluster, reserved one included.
pub fn write_clusters<W: Write>(clustering: &Clustering, mut sink: W) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut sink, clustering.all())?;
    sink.write_all(b"\n")
}

pub fn parse_overrides(text: &str) -> Result<Vec<Override>, KbError> {
    serde_json::from_str(text).map_err(|e| KbError::MalformedOverrides(e.to_string()))
}

pub fn write_pairs<W: Write>(pairs: &[PairExample], mut sink: W) -> io::Result<()> {
    for p in pairs {
        serde_json::to_writer(&mut sink, p)?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{default_stopwords, initial_clusters};

    const KB: &str = r#"{
      "hotel": {
        "1": {"name": "A and B Guest House", "docs": {
          "0": {"title": "Does it have free wifi?", "body": "Yes, free wifi is available."},
          "1": {"title": "Is parking available?", "body": "No parking."}}},
        "2": {"name": "Acorn Guest House", "docs": {
          "0": {"title": "Is the wifi free", "body": "Wifi is free of charge."}}}
      },
      "train": {"*": {"name": null, "docs": {"3": {"title": "Can I bring a bike?", "body": "Yes."}}}}
    }"#;

    #[test]
    fn parses_nested_kb() {
        let es = parse_kb(KB).unwrap();
        assert_eq!(es.len(), 4);
        assert_eq!(es[0].doc, DocRef::new("hotel", "1", "0"));
        assert_eq!(es[3].doc, DocRef::new("train", "*", "3"));
        assert!(matches!(parse_kb("[1,2]"), Err(KbError::MalformedKb(_))));
        assert!(matches!(
            parse_kb(r#"{"d":{"e":{"docs":{"0":{"title":"","body":"x"}}}}}"#),
            Err(KbError::EmptyTitle(_))
        ));
    }

    #[test]
    fn clusters_roundtrip() {
        let es = parse_kb(KB).unwrap();
        let c = initial_clusters(&es, &default_stopwords()).unwrap();
        let mut buf = Vec::new();
        write_clusters(&c, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains(r#""hotel","#));
        assert_eq!(parse_clusters(&text).unwrap(), c);
    }

    #[test]
    fn overrides_format() {
        let o = parse_overrides(r#"[{"doc_ref": ["hotel", "1", "0"], "forced_cluster_id": 3}]"#).unwrap();
        assert_eq!(o[0].doc_ref, DocRef::new("hotel", "1", "0"));
        assert_eq!(o[0].forced_cluster_id, 3);
        assert!(parse_overrides(r#"[{"doc": 1}]"#).is_err());
    }
}
