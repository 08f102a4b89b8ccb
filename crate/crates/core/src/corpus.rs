//! Dialogue corpora: line-delimited JSON input, per-turn corruption with
//! deterministic per-record seeds, and line-delimited JSON output.

use std::collections::HashSet;
use std::io::{self, Write};

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::edit_model::RewriteModel;
use crate::simulator::{corrupt_utterance, Correction, SimError, SimRng, DEFAULT_MAX_CORRUPTED_WORDS};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("dialogue `{0}` appears more than once")]
    DuplicateDialogue(String),
    #[error("dialogue `{dialogue}` turn {turn}: text is empty")]
    EmptyTurn { dialogue: String, turn: usize },
    #[error("dialogue `{dialogue}` turn {turn}: {source}")]
    Simulation {
        dialogue: String,
        turn: usize,
        #[source]
        source: SimError,
    },
    #[error("could not build worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Speaker {
    U,
    S,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dialogue {
    pub dialogue_id: String,
    pub turns: Vec<Turn>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionRecord {
    pub dialogue_id: String,
    pub turn_index: usize,
    pub clean_tokens: Vec<String>,
    pub noisy_tokens: Vec<String>,
    pub corrections: Vec<Correction>,
}

impl CorruptionRecord {
    /// Applies the corrections to `clean_tokens`.
    pub fn replay_corrections(&self) -> Vec<String> {
        let mut out = self.clean_tokens.clone();
        for c in &self.corrections {
            if let Some(slot) = out.get_mut(c.token_index) {
                *slot = c.noisy.clone();
            }
        }
        out
    }
}

/// Which turns get corrupted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorruptionPolicy {
    pub user_turns_only: bool,
    /// Keep only the last of the selected turns.
    pub last_user_turn_only: bool,
    pub max_corrupted_words: usize,
}

impl Default for CorruptionPolicy {
    fn default() -> Self {
        CorruptionPolicy {
            user_turns_only: true,
            last_user_turn_only: true,
            max_corrupted_words: DEFAULT_MAX_CORRUPTED_WORDS,
        }
    }
}

impl CorruptionPolicy {
    pub fn select_turns(&self, dialogue: &Dialogue) -> Vec<usize> {
        let mut turns: Vec<usize> = dialogue
            .turns
            .iter()
            .enumerate()
            .filter(|(_, t)| !self.user_turns_only || t.speaker == Speaker::U)
            .map(|(i, _)| i)
            .collect();
        if self.last_user_turn_only && turns.len() > 1 {
            turns.drain(..turns.len() - 1);
        }
        turns
    }
}

/// Parses one dialogue per non-blank line.
pub fn parse_dialogues(text: &str) -> Result<Vec<Dialogue>, CorpusError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CorpusError::Record {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Seeds the random stream of one record from the master seed, the
/// dialogue id and the turn index, so records can be processed in any order.
pub fn record_rng(master_seed: u64, dialogue_id: &str, turn_index: usize) -> SimRng {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update((dialogue_id.len() as u64).to_le_bytes());
    h.update(dialogue_id.as_bytes());
    h.update((turn_index as u64).to_le_bytes());
    let digest = h.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest[..32]);
    SimRng::from_seed(seed)
}

fn validate(dialogues: &[Dialogue]) -> Result<(), CorpusError> {
    let mut seen = HashSet::new();
    for d in dialogues {
        if !seen.insert(d.dialogue_id.as_str()) {
            return Err(CorpusError::DuplicateDialogue(d.dialogue_id.clone()));
        }
        for (i, t) in d.turns.iter().enumerate() {
            if t.text.trim().is_empty() {
                return Err(CorpusError::EmptyTurn {
                    dialogue: d.dialogue_id.clone(),
                    turn: i,
                });
            }
        }
    }
    Ok(())
}

/// Corrupts the selected turns of every dialogue. Output order follows
/// input order; `threads` only changes how fast it gets there.
pub fn corrupt_dataset(
    dialogues: &[Dialogue],
    model: &RewriteModel,
    master_seed: u64,
    policy: &CorruptionPolicy,
    threads: Option<usize>,
) -> Result<Vec<CorruptionRecord>, CorpusError> {
    validate(dialogues)?;
    let jobs: Vec<(&Dialogue, usize)> = dialogues
        .iter()
        .flat_map(|d| policy.select_turns(d).into_iter().map(move |t| (d, t)))
        .collect();
    let run = |&(d, turn): &(&Dialogue, usize)| -> Result<CorruptionRecord, CorpusError> {
        let clean_tokens: Vec<String> = d.turns[turn].text.split_whitespace().map(str::to_owned).collect();
        let mut rng = record_rng(master_seed, &d.dialogue_id, turn);
        let out = corrupt_utterance(&clean_tokens, model, &mut rng, policy.max_corrupted_words).map_err(|source| {
            CorpusError::Simulation {
                dialogue: d.dialogue_id.clone(),
                turn,
                source,
            }
        })?;
        Ok(CorruptionRecord {
            dialogue_id: d.dialogue_id.clone(),
            turn_index: turn,
            clean_tokens,
            noisy_tokens: out.noisy_tokens,
            corrections: out.corrections,
        })
    };
    match threads {
        Some(1) => jobs.iter().map(run).collect(),
        _ => {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(n) = threads {
                builder = builder.num_threads(n);
            }
            let pool = builder.build().map_err(|e| CorpusError::Pool(e.to_string()))?;
            pool.install(|| jobs.par_iter().map(run).collect())
        }
    }
}

/// Writes one JSON object per record.
pub fn write_records<W: Write>(records: &[CorruptionRecord], mut sink: W) -> Result<(), CorpusError> {
    for r in records {
        serde_json::to_writer(&mut sink, r).map_err(io::Error::from)?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edit_model::{estimate_model, WordPair};

    fn model() -> RewriteModel {
        estimate_model(
            &[
                WordPair::new("deliver", "delver"),
                WordPair::new("wifi", "wifr"),
                WordPair::new("food", "foot"),
            ],
            16,
        )
        .unwrap()
    }

    fn dialogue(id: &str, turns: &[(Speaker, &str)]) -> Dialogue {
        Dialogue {
            dialogue_id: id.into(),
            turns: turns
                .iter()
                .map(|(s, t)| Turn {
                    speaker: *s,
                    text: (*t).into(),
                })
                .collect(),
        }
    }

    fn sample() -> Dialogue {
        dialogue(
            "d1",
            &[
                (Speaker::S, "hello how can i help"),
                (Speaker::U, "i need a hotel"),
                (Speaker::S, "there are three"),
                (Speaker::U, "do they deliver food"),
            ],
        )
    }

    #[test]
    fn default_policy_takes_last_user_turn() {
        let recs = corrupt_dataset(&[sample()], &model(), 42, &CorruptionPolicy::default(), Some(1)).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].turn_index, 3);
        assert_eq!(recs[0].clean_tokens.len(), 4);
    }

    #[test]
    fn all_user_turns() {
        let policy = CorruptionPolicy {
            last_user_turn_only: false,
            ..Default::default()
        };
        let recs = corrupt_dataset(&[sample()], &model(), 42, &policy, None).unwrap();
        assert_eq!(recs.iter().map(|r| r.turn_index).collect::<Vec<_>>(), vec![1, 3]);
        let policy = CorruptionPolicy {
            user_turns_only: false,
            last_user_turn_only: false,
            ..Default::default()
        };
        assert_eq!(policy.select_turns(&sample()), vec![0, 1, 2, 3]);
    }

    #[test]
    fn deterministic_across_runs_and_threads() {
        let ds: Vec<Dialogue> = (0..30)
            .map(|i| dialogue(&format!("d{i}"), &[(Speaker::U, "do they deliver food to the room")]))
            .collect();
        let m = model();
        let p = CorruptionPolicy::default();
        let a = corrupt_dataset(&ds, &m, 42, &p, Some(1)).unwrap();
        let b = corrupt_dataset(&ds, &m, 42, &p, Some(4)).unwrap();
        assert_eq!(a, b);
        let mut x = Vec::new();
        let mut y = Vec::new();
        write_records(&a, &mut x).unwrap();
        write_records(&b, &mut y).unwrap();
        assert_eq!(x, y);
        let c = corrupt_dataset(&ds, &m, 43, &p, Some(1)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn duplicate_ids_and_empty_turns_rejected() {
        let m = model();
        let p = CorruptionPolicy::default();
        assert!(matches!(
            corrupt_dataset(&[sample(), sample()], &m, 1, &p, Some(1)),
            Err(CorpusError::DuplicateDialogue(_))
        ));
        let bad = dialogue("x", &[(Speaker::U, "   ")]);
        assert!(matches!(
            corrupt_dataset(&[bad], &m, 1, &p, Some(1)),
            Err(CorpusError::EmptyTurn { .. })
        ));
    }

    #[test]
    fn parse_reports_line() {
        let text = "{\"dialogue_id\":\"a\",\"turns\":[{\"speaker\":\"U\",\"text\":\"hi there\"}]}\n\n{\"dialogue_id\":\"b\",\"turns\":[{\"speaker\":\"X\",\"text\":\"x\"}]}\n";
        match parse_dialogues(text) {
            Err(CorpusError::Record { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let ok = parse_dialogues(text.lines().next().unwrap()).unwrap();
        assert_eq!(ok[0].turns[0].speaker, Speaker::U);
    }

    #[test]
    fn record_fields_named_exactly() {
        let recs = corrupt_dataset(&[sample()], &model(), 42, &CorruptionPolicy::default(), Some(1)).unwrap();
        let v: serde_json::Value = serde_json::to_value(&recs[0]).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        for k in [
            "dialogue_id",
            "turn_index",
            "clean_tokens",
            "noisy_tokens",
            "corrections",
        ] {
            assert!(keys.contains(&k));
        }
        assert_eq!(recs[0].replay_corrections(), recs[0].noisy_tokens);
    }

    #[test]
    fn record_rng_depends_on_every_part() {
        use rand::RngCore;
        let base = record_rng(42, "d1", 3).next_u64();
        assert_eq!(base, record_rng(42, "d1", 3).next_u64());
        assert_ne!(base, record_rng(43, "d1", 3).next_u64());
        assert_ne!(base, record_rng(42, "d2", 3).next_u64());
        assert_ne!(base, record_rng(42, "d1", 1).next_u64());
    }
}
