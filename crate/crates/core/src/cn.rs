//! Decoder output ingestion: N-best lists, confusion network ("sausage")
//! files, and pivot alignment of N-best lists into confusion networks.
//!
//! N-best format, one hypothesis per line, records of one utterance
//! contiguous:
//!
//! ```text
//! <utt_id> <rank> <score|-> <word> <word> ...
//! ```
//!
//! Sausage format, optionally several networks per file, each introduced by
//! a `name` line:
//!
//! ```text
//! name <utt_id>
//! numaligns <n>
//! align 0 <s> 1
//! align 1 ok 0.9 oh 0.1
//! ```
//!
//! `numaligns`, `posterior` and `info` lines are accepted; only `numaligns`
//! is checked.

use std::collections::HashSet;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::align::{edit_script, EditOp};

/// Epsilon (deletion) alternative in a confusion slot.
pub const EPSILON: &str = "*DELETE*";
pub const SENTENCE_START: &str = "<s>";
pub const SENTENCE_END: &str = "</s>";

const POSTERIOR_SLACK: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("input is empty")]
    Empty,
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
}

fn line_err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Line {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// 1-based, by order of appearance.
    pub rank: usize,
    pub score: Option<f64>,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NBestList {
    pub utterance_id: String,
    pub hypotheses: Vec<Hypothesis>,
}

/// What an alternative in a slot stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Word,
    Epsilon,
    SentenceStart,
    SentenceEnd,
}

impl TokenKind {
    pub fn of(word: &str) -> Self {
        match word {
            EPSILON => TokenKind::Epsilon,
            SENTENCE_START => TokenKind::SentenceStart,
            SENTENCE_END => TokenKind::SentenceEnd,
            _ => TokenKind::Word,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alternative {
    pub word: String,
    pub posterior: Option<f64>,
}

impl Alternative {
    pub fn kind(&self) -> TokenKind {
        TokenKind::of(&self.word)
    }

    /// Epsilon and sentence boundary markers.
    pub fn is_reserved(&self) -> bool {
        self.kind() != TokenKind::Word
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfusionSlot {
    pub alternatives: Vec<Alternative>,
}

impl ConfusionSlot {
    pub fn len(&self) -> usize {
        self.alternatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alternatives.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.alternatives.iter().map(|a| a.word.as_str())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words().any(|w| w == word)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionNetwork {
    pub utterance_id: String,
    pub slots: Vec<ConfusionSlot>,
}

impl ConfusionNetwork {
    /// Serializes in sausage format. Alternatives without a posterior are
    /// written with an even share of the slot's unassigned mass.
    pub fn to_sausage_string(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ConfusionNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.utterance_id.is_empty() {
            writeln!(f, "name {}", self.utterance_id)?;
        }
        writeln!(f, "numaligns {}", self.slots.len())?;
        for (k, slot) in self.slots.iter().enumerate() {
            let assigned: f64 = slot.alternatives.iter().filter_map(|a| a.posterior).sum();
            let unassigned = slot.alternatives.iter().filter(|a| a.posterior.is_none()).count();
            let share = if unassigned > 0 {
                ((1.0 - assigned).max(0.0)) / unassigned as f64
            } else {
                0.0
            };
            let mut line = format!("align {k}");
            for alt in &slot.alternatives {
                let _ = write!(line, " {} {}", alt.word, alt.posterior.unwrap_or(share));
            }
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Parses an N-best file holding one or more utterances.
pub fn parse_nbest(text: &str) -> Result<Vec<NBestList>, ParseError> {
    let mut lists: Vec<NBestList> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut last_rank = 0usize;
    for (lineno, line) in content_lines(text) {
        let mut fields = line.split_whitespace();
        let utt = fields.next().expect("non-blank line has a field");
        let rank_field = fields.next().ok_or_else(|| line_err(lineno, "missing rank"))?;
        let rank: usize = rank_field
            .parse()
            .map_err(|_| line_err(lineno, format!("invalid rank `{rank_field}`")))?;
        let score_field = fields.next().ok_or_else(|| line_err(lineno, "missing score"))?;
        let score = match score_field {
            "-" => None,
            s => {
                let v: f64 = s
                    .parse()
                    .map_err(|_| line_err(lineno, format!("invalid score `{s}`")))?;
                if !v.is_finite() {
                    return Err(line_err(lineno, format!("non-finite score `{s}`")));
                }
                Some(v)
            }
        };
        let tokens: Vec<String> = fields.map(str::to_owned).collect();

        let continuing = lists.last().is_some_and(|l| l.utterance_id == utt);
        if !continuing {
            if !seen.insert(utt.to_owned()) {
                return Err(line_err(lineno, format!("records for `{utt}` are not contiguous")));
            }
            if rank != 1 {
                return Err(line_err(lineno, format!("first rank of `{utt}` is {rank}, expected 1")));
            }
            lists.push(NBestList {
                utterance_id: utt.to_owned(),
                hypotheses: Vec::new(),
            });
        } else if rank <= last_rank {
            return Err(line_err(
                lineno,
                format!("rank {rank} does not increase (previous {last_rank})"),
            ));
        }
        last_rank = rank;
        let list = lists.last_mut().expect("pushed above");
        let order = list.hypotheses.len() + 1;
        list.hypotheses.push(Hypothesis {
            rank: order,
            score,
            tokens,
        });
    }
    if lists.is_empty() {
        return Err(ParseError::Empty);
    }
    Ok(lists)
}

/// Parses a sausage file holding one or more confusion networks.
pub fn parse_confusion_networks(text: &str) -> Result<Vec<ConfusionNetwork>, ParseError> {
    let mut nets: Vec<ConfusionNetwork> = Vec::new();
    let mut declared: Vec<Option<(usize, usize)>> = Vec::new();
    for (lineno, line) in content_lines(text) {
        let mut fields = line.split_whitespace();
        let keyword = fields.next().expect("non-blank line has a field");
        match keyword {
            "name" => {
                let id = fields.next().ok_or_else(|| line_err(lineno, "name without id"))?;
                nets.push(ConfusionNetwork {
                    utterance_id: id.to_owned(),
                    slots: Vec::new(),
                });
                declared.push(None);
            }
            "numaligns" => {
                let n: usize = fields
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| line_err(lineno, "invalid numaligns"))?;
                if nets.is_empty() {
                    nets.push(ConfusionNetwork {
                        utterance_id: String::new(),
                        slots: Vec::new(),
                    });
                    declared.push(None);
                }
                *declared.last_mut().expect("non-empty") = Some((n, lineno));
            }
            "posterior" | "info" => {}
            "align" => {
                if nets.is_empty() {
                    nets.push(ConfusionNetwork {
                        utterance_id: String::new(),
                        slots: Vec::new(),
                    });
                    declared.push(None);
                }
                let net = nets.last_mut().expect("non-empty");
                let k_field = fields.next().ok_or_else(|| line_err(lineno, "align without index"))?;
                let k: usize = k_field
                    .parse()
                    .map_err(|_| line_err(lineno, format!("invalid align index `{k_field}`")))?;
                if k != net.slots.len() {
                    return Err(line_err(
                        lineno,
                        format!("align index {k} out of sequence, expected {}", net.slots.len()),
                    ));
                }
                net.slots.push(parse_align_fields(lineno, fields)?);
            }
            other => return Err(line_err(lineno, format!("unknown record `{other}`"))),
        }
    }
    if nets.is_empty() {
        return Err(ParseError::Empty);
    }
    for (net, decl) in nets.iter().zip(&declared) {
        if let Some((n, lineno)) = decl {
            if *n != net.slots.len() {
                return Err(line_err(
                    *lineno,
                    format!("numaligns {n} but {} align lines follow", net.slots.len()),
                ));
            }
        }
    }
    Ok(nets)
}

/// Parses a sausage file holding exactly one confusion network.
pub fn parse_confusion_network(text: &str) -> Result<ConfusionNetwork, ParseError> {
    let mut nets = parse_confusion_networks(text)?;
    if nets.len() != 1 {
        return Err(line_err(1, format!("expected one network, found {}", nets.len())));
    }
    Ok(nets.pop().expect("len checked"))
}

fn parse_align_fields<'a>(lineno: usize, fields: impl Iterator<Item = &'a str>) -> Result<ConfusionSlot, ParseError> {
    let rest: Vec<&str> = fields.collect();
    if rest.is_empty() {
        return Err(line_err(lineno, "align line without alternatives"));
    }
    if !rest.len().is_multiple_of(2) {
        return Err(line_err(lineno, "word without posterior"));
    }
    let mut slot = ConfusionSlot::default();
    let mut total = 0.0;
    for pair in rest.chunks(2) {
        let (word, p) = (pair[0], pair[1]);
        let posterior: f64 = p
            .parse()
            .map_err(|_| line_err(lineno, format!("invalid posterior `{p}` for `{word}`")))?;
        if !(0.0..=1.0).contains(&posterior) {
            return Err(line_err(lineno, format!("posterior {p} for `{word}` outside [0,1]")));
        }
        if slot.contains(word) {
            return Err(line_err(lineno, format!("duplicate word `{word}`")));
        }
        total += posterior;
        slot.alternatives.push(Alternative {
            word: word.to_owned(),
            posterior: Some(posterior),
        });
    }
    if total > 1.0 + POSTERIOR_SLACK {
        return Err(line_err(lineno, format!("posteriors sum to {total}")));
    }
    Ok(slot)
}

/// Builds a confusion network by aligning every hypothesis to the rank-1
/// hypothesis (the pivot).
///
/// Words substituted for a pivot word share its slot; words a hypothesis
/// inserts between two pivot words open insertion slots in that gap, the
/// m-th inserted word of every hypothesis going to the gap's m-th slot.
/// Hypotheses with nothing at a slot contribute [`EPSILON`]. Posteriors are
/// vote fractions over all hypotheses; scores are not used.
pub fn align_nbest_to_cn(nbest: &NBestList) -> ConfusionNetwork {
    let pivot = nbest.hypotheses.first().map(|h| h.tokens.as_slice()).unwrap_or(&[]);
    let n = pivot.len();
    // Per hypothesis: the word at each pivot position and the insertions
    // falling in each of the n+1 gaps.
    let mut at_pivot: Vec<Vec<Option<&str>>> = Vec::with_capacity(nbest.hypotheses.len());
    let mut in_gap: Vec<Vec<Vec<&str>>> = Vec::with_capacity(nbest.hypotheses.len());
    for hyp in &nbest.hypotheses {
        let mut words = vec![None; n];
        let mut gaps = vec![Vec::new(); n + 1];
        let mut gap = 0;
        for op in edit_script(pivot, &hyp.tokens) {
            match op {
                EditOp::Match { src, tgt } | EditOp::Substitute { src, tgt } => {
                    words[src] = Some(hyp.tokens[tgt].as_str());
                    gap = src + 1;
                }
                EditOp::Delete { src } => gap = src + 1,
                EditOp::Insert { tgt } => gaps[gap].push(hyp.tokens[tgt].as_str()),
            }
        }
        at_pivot.push(words);
        in_gap.push(gaps);
    }

    let votes = nbest.hypotheses.len().max(1) as f64;
    let make_slot = |column: Vec<Option<&str>>| {
        let mut counts: Vec<(&str, usize)> = Vec::new();
        for w in column {
            let w = w.unwrap_or(EPSILON);
            match counts.iter_mut().find(|(x, _)| *x == w) {
                Some((_, c)) => *c += 1,
                None => counts.push((w, 1)),
            }
        }
        ConfusionSlot {
            alternatives: counts
                .into_iter()
                .map(|(w, c)| Alternative {
                    word: w.to_owned(),
                    posterior: Some(c as f64 / votes),
                })
                .collect(),
        }
    };

    let mut slots = Vec::new();
    for g in 0..=n {
        let width = in_gap.iter().map(|gaps| gaps[g].len()).max().unwrap_or(0);
        for m in 0..width {
            slots.push(make_slot(in_gap.iter().map(|gaps| gaps[g].get(m).copied()).collect()));
        }
        if g < n {
            slots.push(make_slot(at_pivot.iter().map(|words| words[g]).collect()));
        }
    }
    ConfusionNetwork {
        utterance_id: nbest.utterance_id.clone(),
        slots,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nbest(hyps: &[&str]) -> NBestList {
        NBestList {
            utterance_id: "u".into(),
            hypotheses: hyps
                .iter()
                .enumerate()
                .map(|(i, h)| Hypothesis {
                    rank: i + 1,
                    score: None,
                    tokens: h.split_whitespace().map(str::to_owned).collect(),
                })
                .collect(),
        }
    }

    fn slot_words(slot: &ConfusionSlot) -> Vec<&str> {
        let mut w: Vec<&str> = slot.words().collect();
        w.sort_unstable();
        w
    }

    #[test]
    fn parses_two_hypotheses() {
        let lists = parse_nbest("u1 1 -3.2 ok do they deliver\nu1 2 -4.0 ok do they delver").unwrap();
        assert_eq!(lists.len(), 1);
        let l = &lists[0];
        assert_eq!(l.utterance_id, "u1");
        assert_eq!(l.hypotheses.len(), 2);
        assert!(l.hypotheses.iter().all(|h| h.tokens.len() == 4));
        assert_eq!(l.hypotheses[1].rank, 2);
        assert_eq!(l.hypotheses[0].score, Some(-3.2));
    }

    #[test]
    fn single_hypothesis_and_missing_score() {
        let lists = parse_nbest("u2 1 0.0 hello").unwrap();
        assert_eq!(lists[0].hypotheses.len(), 1);
        let lists = parse_nbest("u3 1 - hi there\n").unwrap();
        assert_eq!(lists[0].hypotheses[0].score, None);
    }

    #[test]
    fn nbest_errors_name_the_line() {
        let err = parse_nbest("u1 1 -1 a\nu1 3 -2 b\nu1 2 -3 c").unwrap_err();
        assert_eq!(
            err,
            ParseError::Line {
                line: 3,
                message: "rank 2 does not increase (previous 3)".into()
            }
        );
        assert!(matches!(parse_nbest("u1 2 0 a"), Err(ParseError::Line { line: 1, .. })));
        assert!(matches!(parse_nbest("u1 x 0 a"), Err(ParseError::Line { line: 1, .. })));
        assert!(matches!(
            parse_nbest("u1 1 nan a"),
            Err(ParseError::Line { line: 1, .. })
        ));
        assert!(matches!(parse_nbest("u1"), Err(ParseError::Line { line: 1, .. })));
        assert_eq!(parse_nbest("  \n\n"), Err(ParseError::Empty));
        assert!(matches!(
            parse_nbest("a 1 - x\nb 1 - y\na 2 - z"),
            Err(ParseError::Line { line: 3, .. })
        ));
    }

    #[test]
    fn several_utterances() {
        let lists = parse_nbest("a 1 - x\na 2 - y\nb 1 - z\n").unwrap();
        assert_eq!(lists.len(), 2);
        assert_eq!(lists[1].hypotheses[0].tokens, vec!["z"]);
    }

    #[test]
    fn parses_sausage_slot() {
        let cn = parse_confusion_network(
            "name u1\nalign 0 <s> 1.0\nalign 1 ok 1\nalign 2 do 1\nalign 3 they 1\n\
             align 4 delver 0.3 deliver 0.3 delo 0.1 over 0.1 lover 0.1 del 0.05 dolo 0.05\n\
             align 5 </s> 1.0\n",
        )
        .unwrap();
        assert_eq!(cn.utterance_id, "u1");
        assert_eq!(cn.slots.len(), 6);
        assert_eq!(cn.slots[4].len(), 7);
        assert_eq!(cn.slots[0].alternatives[0].kind(), TokenKind::SentenceStart);
        assert!(cn.slots[0].alternatives[0].is_reserved());
        assert_eq!(cn.slots[5].alternatives[0].kind(), TokenKind::SentenceEnd);
    }

    #[test]
    fn sausage_without_header() {
        let cn = parse_confusion_network("align 0 a 0.6 *DELETE* 0.4").unwrap();
        assert_eq!(cn.utterance_id, "");
        assert_eq!(cn.slots[0].alternatives[1].kind(), TokenKind::Epsilon);
    }

    #[test]
    fn sausage_errors() {
        assert!(matches!(
            parse_confusion_network("align 0 a 1.7"),
            Err(ParseError::Line { line: 1, .. })
        ));
        assert!(matches!(
            parse_confusion_network("align 0 a 0.2 a 0.3"),
            Err(ParseError::Line { line: 1, .. })
        ));
        assert!(matches!(
            parse_confusion_network("align 0 a 0.7 b 0.7"),
            Err(ParseError::Line { line: 1, .. })
        ));
        assert!(matches!(
            parse_confusion_network("align 0 a 1\nalign 2 b 1"),
            Err(ParseError::Line { line: 2, .. })
        ));
        assert!(matches!(
            parse_confusion_network("name x\nnumaligns 3\nalign 0 a 1"),
            Err(ParseError::Line { line: 2, .. })
        ));
        assert!(matches!(
            parse_confusion_network("align 0 a"),
            Err(ParseError::Line { .. })
        ));
        assert!(matches!(
            parse_confusion_network("bogus 1"),
            Err(ParseError::Line { .. })
        ));
        assert_eq!(parse_confusion_network(""), Err(ParseError::Empty));
    }

    #[test]
    fn multiple_networks() {
        let nets = parse_confusion_networks("name a\nalign 0 x 1\nname b\nalign 0 y 1\nalign 1 z 1").unwrap();
        assert_eq!(nets.len(), 2);
        assert_eq!(nets[1].slots.len(), 2);
        assert!(parse_confusion_network("name a\nalign 0 x 1\nname b\nalign 0 y 1").is_err());
    }

    #[test]
    fn pivot_alignment_substitution() {
        let cn = align_nbest_to_cn(&nbest(&["ok do they deliver", "ok do they delver"]));
        assert_eq!(cn.slots.len(), 4);
        assert_eq!(slot_words(&cn.slots[3]), vec!["deliver", "delver"]);
        assert!(cn.slots[3].alternatives.iter().all(|a| a.posterior == Some(0.5)));
        assert_eq!(cn.slots[0].len(), 1);
        assert_eq!(cn.slots[0].alternatives[0].posterior, Some(1.0));
    }

    #[test]
    fn pivot_alignment_insertion_opens_slot() {
        let cn = align_nbest_to_cn(&nbest(&["a b", "a x b"]));
        assert_eq!(cn.slots.len(), 3);
        assert_eq!(slot_words(&cn.slots[1]), vec![EPSILON, "x"]);
        assert_eq!(slot_words(&cn.slots[0]), vec!["a"]);
        assert_eq!(slot_words(&cn.slots[2]), vec!["b"]);
    }

    #[test]
    fn pivot_alignment_deletion_adds_epsilon() {
        let cn = align_nbest_to_cn(&nbest(&["a b c", "a c"]));
        assert_eq!(cn.slots.len(), 3);
        assert_eq!(slot_words(&cn.slots[1]), vec![EPSILON, "b"]);
    }

    #[test]
    fn insertions_from_several_hypotheses_share_gap_slots() {
        let cn = align_nbest_to_cn(&nbest(&["a b", "a x b", "a y z b", "a b"]));
        assert_eq!(cn.slots.len(), 4);
        assert_eq!(slot_words(&cn.slots[1]), vec![EPSILON, "x", "y"]);
        assert_eq!(slot_words(&cn.slots[2]), vec![EPSILON, "z"]);
        let eps = cn.slots[2].alternatives.iter().find(|a| a.word == EPSILON).unwrap();
        assert_eq!(eps.posterior, Some(0.75));
    }

    #[test]
    fn single_hypothesis_is_identity() {
        let cn = align_nbest_to_cn(&nbest(&["hello there world"]));
        assert_eq!(cn.slots.len(), 3);
        assert!(cn.slots.iter().all(|s| s.len() == 1));
    }

    #[test]
    fn sausage_roundtrip_text() {
        let cn = align_nbest_to_cn(&nbest(&["a b", "a x b"]));
        let text = cn.to_sausage_string();
        let back = parse_confusion_network(&text).unwrap();
        assert_eq!(back, cn);
        assert_eq!(back.to_sausage_string(), text);
    }
}
