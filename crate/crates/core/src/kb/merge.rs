//! Iterative merging of knowledge clusters under a pairwise title-body judge.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use thiserror::Error;

use super::normalize::{body_key, token_set, Stopwords};
use super::{Clustering, DocRef, KbError, KnowledgeCluster, KnowledgeEntry};

#[derive(Debug, Clone, Error, PartialEq)]
#[error("{0}")]
pub struct JudgeError(pub String);

/// Scores how well a title matches a body, in `[0, 1]`.
pub trait PairJudge: Sync {
    fn judge(&self, title: &str, body: &str) -> Result<f64, JudgeError>;
}

/// Token Jaccard similarity of the normalized title and body.
#[derive(Debug, Clone)]
pub struct JaccardJudge {
    stopwords: Stopwords,
}

impl JaccardJudge {
    pub fn new(stopwords: Stopwords) -> Self {
        JaccardJudge { stopwords }
    }
}

impl PairJudge for JaccardJudge {
    fn judge(&self, title: &str, body: &str) -> Result<f64, JudgeError> {
        let a = token_set(title, &self.stopwords);
        let b = token_set(body, &self.stopwords);
        let union = a.union(&b).count();
        if union == 0 {
            return Ok(0.0);
        }
        Ok(a.intersection(&b).count() as f64 / union as f64)
    }
}

/// Gives every pair the same score.
#[derive(Debug, Clone, Copy)]
pub struct ConstantJudge(pub f64);

impl PairJudge for ConstantJudge {
    fn judge(&self, _title: &str, _body: &str) -> Result<f64, JudgeError> {
        Ok(self.0)
    }
}

#[derive(Debug, Clone)]
pub struct MergeConfig {
    /// A pair counts as positive when its score is at least this.
    pub positive_threshold: f64,
    /// Two clusters merge when the positive fraction of their cross pairs
    /// exceeds this.
    pub majority_fraction: f64,
    /// Cluster id pairs tried before all others within a round, e.g. from
    /// [`propose_body_merges`]. They still have to pass the majority test.
    pub proposals: BTreeSet<(usize, usize)>,
    pub threads: Option<usize>,
}

impl Default for MergeConfig {
    fn default() -> Self {
        MergeConfig {
            positive_threshold: 0.5,
            majority_fraction: 0.5,
            proposals: BTreeSet::new(),
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundReport {
    pub round: usize,
    pub clusters_before: usize,
    pub merges: Vec<(usize, usize)>,
    pub clusters_after: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeOutcome {
    pub clustering: Clustering,
    pub rounds: Vec<RoundReport>,
}

/// Merging stopped on an error; carries what was done so far.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("cluster merging aborted after {} round(s): {error}", rounds.len())]
pub struct MergeFailure {
    pub rounds: Vec<RoundReport>,
    pub partial: Clustering,
    pub error: KbError,
}

/// Cluster pairs whose members share a meaningful body.
pub fn propose_body_merges(
    clustering: &Clustering,
    entries: &[KnowledgeEntry],
    stopwords: &Stopwords,
) -> BTreeSet<(usize, usize)> {
    let mut by_body: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for e in entries {
        if let (Some(key), Some(cid)) = (body_key(&e.body, stopwords), clustering.cluster_of(&e.doc)) {
            by_body.entry(key).or_default().insert(cid);
        }
    }
    let mut out = BTreeSet::new();
    for ids in by_body.values() {
        let ids: Vec<usize> = ids.iter().copied().collect();
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                out.insert((*a, *b));
            }
        }
    }
    out
}

pub fn merge_clusters(
    clustering: &Clustering,
    entries: &[KnowledgeEntry],
    judge: &dyn PairJudge,
    config: &MergeConfig,
) -> Result<MergeOutcome, Box<MergeFailure>> {
    merge_clusters_observed(clustering, entries, judge, config, |_, _| {})
}

/// Positive and total judgments between two clusters.
#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    positive: u64,
    total: u64,
}

impl Tally {
    fn add(self, other: Tally) -> Tally {
        Tally {
            positive: self.positive + other.positive,
            total: self.total + other.total,
        }
    }

    fn cmp_fraction(&self, other: &Tally) -> Ordering {
        (u128::from(self.positive) * u128::from(other.total))
            .cmp(&(u128::from(other.positive) * u128::from(self.total)))
    }

    fn fraction(&self) -> f64 {
        self.positive as f64 / self.total as f64
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Like [`merge_clusters`], calling `observer` after every round with the
/// clustering at that point.
///
/// Each round compares every pair of knowledge clusters on all cross
/// title-body pairs (titles of one against bodies of the other, both ways),
/// then merges candidate pairs greedily by descending positive fraction,
/// lowest ids first on ties, each cluster at most once per round. A merged
/// cluster keeps the lower id and its key. Rounds repeat until one merges
/// nothing or a single cluster is left; ids are then renumbered 1..=N.
pub fn merge_clusters_observed(
    clustering: &Clustering,
    entries: &[KnowledgeEntry],
    judge: &dyn PairJudge,
    config: &MergeConfig,
    mut observer: impl FnMut(&RoundReport, &Clustering),
) -> Result<MergeOutcome, Box<MergeFailure>> {
    let fail = |rounds: Vec<RoundReport>, partial: Clustering, error: KbError| {
        Box::new(MergeFailure { rounds, partial, error })
    };
    let valid = config.majority_fraction > 0.0
        && config.majority_fraction <= 1.0
        && (0.0..=1.0).contains(&config.positive_threshold);
    if !valid {
        return Err(fail(
            Vec::new(),
            clustering.clone(),
            KbError::InvalidConfig(format!(
                "threshold {} must lie in [0,1] and majority {} in (0,1]",
                config.positive_threshold, config.majority_fraction
            )),
        ));
    }
    if let Err(e) = clustering.check_partition(entries) {
        return Err(fail(Vec::new(), clustering.clone(), e));
    }

    let by_doc: BTreeMap<&DocRef, &KnowledgeEntry> = entries.iter().map(|e| (&e.doc, e)).collect();
    let mut clusters: BTreeMap<usize, KnowledgeCluster> = clustering
        .knowledge_clusters()
        .iter()
        .map(|c| (c.cluster_id, c.clone()))
        .collect();
    let snapshot = |clusters: &BTreeMap<usize, KnowledgeCluster>| {
        Clustering::new(clusters.values().cloned().collect()).expect("ids stay unique")
    };

    // Judgments are computed once; the tally of a union against a third
    // cluster is the sum of the parts' tallies.
    let ids: Vec<usize> = clusters.keys().copied().collect();
    let pairs: Vec<(usize, usize)> = ids
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| ids[i + 1..].iter().map(move |&b| (a, b)))
        .collect();
    let tally_pair = |&(a, b): &(usize, usize)| -> Result<((usize, usize), Tally), KbError> {
        let mut t = Tally::default();
        for (x, y) in [(a, b), (b, a)] {
            for tm in &clusters[&x].members {
                for bm in &clusters[&y].members {
                    let score = judge
                        .judge(&by_doc[tm].title, &by_doc[bm].body)
                        .map_err(|e| KbError::Judge(e.0))?;
                    if !(0.0..=1.0).contains(&score) {
                        return Err(KbError::Judge(format!("score {score} outside [0,1]")));
                    }
                    t.total += 1;
                    t.positive += u64::from(score >= config.positive_threshold);
                }
            }
        }
        Ok(((a, b), t))
    };
    let tallies: Result<BTreeMap<(usize, usize), Tally>, KbError> = if config.threads == Some(1) {
        pairs.iter().map(tally_pair).collect()
    } else {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = config.threads {
            builder = builder.num_threads(n);
        }
        match builder.build() {
            Ok(pool) => pool.install(|| pairs.par_iter().map(tally_pair).collect()),
            Err(e) => Err(KbError::InvalidConfig(e.to_string())),
        }
    };
    let mut tallies = match tallies {
        Ok(t) => t,
        Err(e) => return Err(fail(Vec::new(), clustering.clone(), e)),
    };
    let mut rounds = Vec::new();
    while clusters.len() > 1 {
        let before = clusters.len();
        let mut candidates: Vec<((usize, usize), Tally)> = tallies
            .iter()
            .filter(|(_, t)| t.total > 0 && t.fraction() > config.majority_fraction)
            .map(|(k, t)| (*k, *t))
            .collect();
        candidates.sort_by(|(ka, ta), (kb, tb)| {
            let pa = config.proposals.contains(ka);
            let pb = config.proposals.contains(kb);
            pb.cmp(&pa).then_with(|| tb.cmp_fraction(ta)).then_with(|| ka.cmp(kb))
        });
        let mut touched = BTreeSet::new();
        let mut merges = Vec::new();
        for ((a, b), _) in candidates {
            if touched.contains(&a) || touched.contains(&b) {
                continue;
            }
            touched.insert(a);
            touched.insert(b);
            merges.push((a, b));
        }
        for &(keep, gone) in &merges {
            let absorbed = clusters.remove(&gone).expect("live cluster");
            clusters
                .get_mut(&keep)
                .expect("live cluster")
                .members
                .extend(absorbed.members);
            let others: Vec<usize> = clusters.keys().copied().filter(|&c| c != keep).collect();
            for c in others {
                let gone_t = tallies.remove(&ordered(gone, c)).unwrap_or_default();
                let e = tallies.entry(ordered(keep, c)).or_default();
                *e = e.add(gone_t);
            }
            tallies.remove(&(keep, gone));
            tallies.retain(|&(x, y), _| x != gone && y != gone);
        }
        let report = RoundReport {
            round: rounds.len() + 1,
            clusters_before: before,
            clusters_after: clusters.len(),
            merges,
        };
        observer(&report, &snapshot(&clusters));
        let done = report.merges.is_empty();
        rounds.push(report);
        if done {
            break;
        }
    }
    Ok(MergeOutcome {
        clustering: snapshot(&clusters).renumbered(),
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{default_stopwords, initial_clusters};

    fn entry(doc: &str, title: &str, body: &str) -> KnowledgeEntry {
        KnowledgeEntry::new(DocRef::new("hotel", doc, "1"), title, body)
    }

    fn three() -> Vec<KnowledgeEntry> {
        vec![
            entry("1", "free wifi", "free wifi"),
            entry("2", "wifi free available", "wifi free available"),
            entry("3", "parking", "parking garage"),
        ]
    }

    #[test]
    fn constant_one_merges_in_round_one() {
        let es = vec![entry("1", "wifi", "yes"), entry("2", "parking", "no")];
        let c = initial_clusters(&es, &default_stopwords()).unwrap();
        let out = merge_clusters(&c, &es, &ConstantJudge(1.0), &MergeConfig::default()).unwrap();
        assert_eq!(out.clustering.len(), 1);
        assert_eq!(out.rounds.len(), 1);
        assert_eq!(out.rounds[0].merges, vec![(1, 2)]);
        out.clustering.check_partition(&es).unwrap();
    }

    #[test]
    fn constant_zero_is_a_fixed_point() {
        let es = three();
        let c = initial_clusters(&es, &default_stopwords()).unwrap();
        let out = merge_clusters(&c, &es, &ConstantJudge(0.0), &MergeConfig::default()).unwrap();
        assert_eq!(out.clustering, c);
        assert_eq!(out.rounds.len(), 1);
        assert!(out.rounds[0].merges.is_empty());
    }

    #[test]
    fn jaccard_merges_only_similar_clusters() {
        // Hand evaluation of the cross pairs with threshold 0.5:
        //   A={free,wifi}  B={available,free,wifi}  C={parking} / {garage,parking}
        //   A-B: J(A.t,B.b)=2/3, J(B.t,A.b)=2/3            -> 2/2 positive
        //   A-C: J(A.t,C.b)=0,   J(C.t,A.b)=0              -> 0/2
        //   B-C: 0/2
        let es = three();
        let c = initial_clusters(&es, &default_stopwords()).unwrap();
        assert_eq!(c.len(), 3);
        let out = merge_clusters(
            &c,
            &es,
            &JaccardJudge::new(default_stopwords()),
            &MergeConfig::default(),
        )
        .unwrap();
        assert_eq!(out.clustering.len(), 2);
        let ab = out.clustering.cluster_of(&es[0].doc);
        assert_eq!(ab, out.clustering.cluster_of(&es[1].doc));
        assert_ne!(ab, out.clustering.cluster_of(&es[2].doc));
        assert_eq!(out.rounds.len(), 2);
    }

    #[test]
    fn each_cluster_merges_once_per_round() {
        let es: Vec<KnowledgeEntry> = ["wifi", "parking", "pets", "breakfast"]
            .iter()
            .enumerate()
            .map(|(i, t)| entry(&i.to_string(), t, "x"))
            .collect();
        let c = initial_clusters(&es, &default_stopwords()).unwrap();
        let mut counts = Vec::new();
        let out = merge_clusters_observed(&c, &es, &ConstantJudge(1.0), &MergeConfig::default(), |r, snap| {
            counts.push(r.clusters_after);
            snap.check_partition(&es).unwrap();
        })
        .unwrap();
        assert_eq!(counts, vec![2, 1]);
        assert_eq!(out.rounds[0].merges, vec![(1, 2), (3, 4)]);
        assert_eq!(out.clustering.len(), 1);
    }

    struct Failing;
    impl PairJudge for Failing {
        fn judge(&self, _: &str, _: &str) -> Result<f64, JudgeError> {
            Err(JudgeError("model offline".into()))
        }
    }

    struct OutOfRange;
    impl PairJudge for OutOfRange {
        fn judge(&self, _: &str, _: &str) -> Result<f64, JudgeError> {
            Ok(1.5)
        }
    }

    #[test]
    fn judge_failures_abort_with_partial_state() {
        let es = three();
        let c = initial_clusters(&es, &default_stopwords()).unwrap();
        let err = merge_clusters(&c, &es, &Failing, &MergeConfig::default()).unwrap_err();
        assert_eq!(err.partial, c);
        assert!(err.rounds.is_empty());
        assert_eq!(err.error, KbError::Judge("model offline".into()));
        assert!(merge_clusters(&c, &es, &OutOfRange, &MergeConfig::default()).is_err());
    }

    #[test]
    fn invalid_settings_rejected() {
        let es = three();
        let c = initial_clusters(&es, &default_stopwords()).unwrap();
        for (t, m) in [(0.5, 0.0), (0.5, 1.5), (-0.1, 0.5)] {
            let cfg = MergeConfig {
                positive_threshold: t,
                majority_fraction: m,
                ..Default::default()
            };
            assert!(matches!(
                merge_clusters(&c, &es, &ConstantJudge(1.0), &cfg).unwrap_err().error,
                KbError::InvalidConfig(_)
            ));
        }
    }

    #[test]
    fn proposals_go_first() {
        let es: Vec<KnowledgeEntry> = ["wifi", "parking", "pets"]
            .iter()
            .enumerate()
            .map(|(i, t)| entry(&i.to_string(), t, "x"))
            .collect();
        let c = initial_clusters(&es, &default_stopwords()).unwrap();
        let cfg = MergeConfig {
            proposals: BTreeSet::from([(2, 3)]),
            ..Default::default()
        };
        let out = merge_clusters(&c, &es, &ConstantJudge(1.0), &cfg).unwrap();
        assert_eq!(out.rounds[0].merges, vec![(2, 3)]);
    }

    #[test]
    fn body_proposals() {
        let es = vec![
            entry("1", "wifi", "Free wifi is offered in all rooms"),
            entry("2", "internet", "Free wifi is offered in all rooms."),
            entry("3", "parking", "Yes."),
            entry("4", "garage", "Yes"),
        ];
        let sw = default_stopwords();
        let c = initial_clusters(&es, &sw).unwrap();
        let props = propose_body_merges(&c, &es, &sw);
        let a = c.cluster_of(&es[0].doc).unwrap();
        let b = c.cluster_of(&es[1].doc).unwrap();
        assert_eq!(props, BTreeSet::from([ordered(a, b)]));
    }
}
