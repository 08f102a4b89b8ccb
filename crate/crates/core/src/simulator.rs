//! Sampling misrecognized words from a [`RewriteModel`], and corrupting
//! tokenized utterances with corrective labels.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::edit_model::{Glyph, RewriteModel};

/// Random stream used throughout the toolkit. ChaCha output is fixed for a
/// given seed across platforms and crate releases.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub const DEFAULT_MAX_CORRUPTED_WORDS: usize = 2;

/// Attempts per selected token before it is left clean. An attempt fails
/// when the sampled edits cancel out or delete the whole word.
const MAX_ATTEMPTS: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("cannot corrupt an empty word")]
    EmptyWord,
    #[error("`{0}` contains non-letter characters")]
    NotAlphabetic(String),
    #[error("rewrite model is empty")]
    EmptyModel,
    #[error("cannot corrupt an empty utterance")]
    EmptyUtterance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditKind {
    Replacement,
    Insertion,
    /// Replacement by `*`.
    Deletion,
}

/// One edit applied to the evolving word. `position` indexes the word as it
/// was just before this edit; for insertions it is the index the new letter
/// ends up at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edit {
    pub kind: EditKind,
    pub position: usize,
    pub from: Glyph,
    pub to: Glyph,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EditTrace {
    pub edits: Vec<Edit>,
    /// Number of edits drawn before sampling started.
    pub requested: u32,
    /// Set when the word ran out of letters before `requested` edits.
    pub early_stopped: bool,
}

impl EditTrace {
    /// Re-applies the edits to `clean`; `None` if an edit does not fit.
    pub fn replay(&self, clean: &str) -> Option<String> {
        let mut word: Vec<char> = clean.chars().collect();
        for e in &self.edits {
            match e.kind {
                EditKind::Replacement => {
                    let slot = word.get_mut(e.position)?;
                    if Glyph::Letter(*slot) != e.from {
                        return None;
                    }
                    *slot = e.to.letter()?;
                }
                EditKind::Deletion => {
                    if word.get(e.position).map(|c| Glyph::Letter(*c)) != Some(e.from) {
                        return None;
                    }
                    word.remove(e.position);
                }
                EditKind::Insertion => {
                    if e.position > word.len() {
                        return None;
                    }
                    word.insert(e.position, e.to.letter()?);
                }
            }
        }
        Some(word.into_iter().collect())
    }
}

impl std::fmt::Display for EditTrace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .edits
            .iter()
            .map(|e| match e.kind {
                EditKind::Replacement => format!("sub@{}:{}>{}", e.position, e.from, e.to),
                EditKind::Deletion => format!("del@{}:{}", e.position, e.from),
                EditKind::Insertion => format!("ins@{}:{}", e.position, e.to),
            })
            .collect();
        write!(f, "{}", parts.join(" "))?;
        if self.early_stopped {
            f.write_str(" (stopped early)")?;
        }
        Ok(())
    }
}

/// Samples an erroneous version of `word`.
///
/// Draws an edit count uniformly from the model's edit counts, then for each
/// edit a position uniformly over the current word, an edit type
/// (replacement or insertion), and the new letter from the model. Drawing
/// `*` as a replacement deletes the letter; insertions go right after the
/// chosen letter. Sampling stops early if the word becomes empty.
pub fn corrupt_word<R: Rng + ?Sized>(
    word: &str,
    model: &RewriteModel,
    rng: &mut R,
) -> Result<(String, EditTrace), SimError> {
    if word.is_empty() {
        return Err(SimError::EmptyWord);
    }
    if !word.chars().all(char::is_alphabetic) {
        return Err(SimError::NotAlphabetic(word.to_owned()));
    }
    if model.is_empty() {
        return Err(SimError::EmptyModel);
    }
    let k = model.constants();
    let requested = k.edit_counts[rng.gen_range(0..k.edit_counts.len())];
    let mut letters: Vec<char> = word.chars().collect();
    let mut trace = EditTrace {
        edits: Vec::with_capacity(requested as usize),
        requested,
        early_stopped: false,
    };
    for _ in 0..requested {
        if letters.is_empty() {
            trace.early_stopped = true;
            break;
        }
        let i = rng.gen_range(0..letters.len());
        let s = letters[i];
        if rng.gen_bool(k.p_replacement) {
            let choices = model.replacement_choices(s, i);
            match choices.pick(rng.gen_range(0..choices.total())) {
                Glyph::Star => {
                    letters.remove(i);
                    trace.edits.push(Edit {
                        kind: EditKind::Deletion,
                        position: i,
                        from: Glyph::Letter(s),
                        to: Glyph::Star,
                    });
                }
                Glyph::Letter(t) => {
                    letters[i] = t;
                    trace.edits.push(Edit {
                        kind: EditKind::Replacement,
                        position: i,
                        from: Glyph::Letter(s),
                        to: Glyph::Letter(t),
                    });
                }
            }
        } else {
            let choices = model.insertion_choices(s, i);
            let t = choices.pick(rng.gen_range(0..choices.total()));
            letters.insert(i + 1, t);
            trace.edits.push(Edit {
                kind: EditKind::Insertion,
                position: i + 1,
                from: Glyph::Star,
                to: Glyph::Letter(t),
            });
        }
    }
    Ok((letters.into_iter().collect(), trace))
}

/// Tokens the channel model can corrupt: at least two letters, nothing else.
pub fn is_eligible(token: &str) -> bool {
    token.chars().count() >= 2 && token.chars().all(char::is_alphabetic)
}

/// Corrective label for one token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correction {
    pub token_index: usize,
    pub clean: String,
    pub noisy: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceCorruption {
    pub noisy_tokens: Vec<String>,
    /// Sorted by token index.
    pub corrections: Vec<Correction>,
}

/// Corrupts up to `max_corrupted_words` eligible tokens, chosen uniformly
/// without replacement. A chosen token whose samples keep coming back
/// unchanged or empty is left clean, so the corrections list only names
/// tokens that actually differ.
pub fn corrupt_utterance<R: Rng + ?Sized>(
    tokens: &[String],
    model: &RewriteModel,
    rng: &mut R,
    max_corrupted_words: usize,
) -> Result<UtteranceCorruption, SimError> {
    if tokens.is_empty() {
        return Err(SimError::EmptyUtterance);
    }
    if model.is_empty() {
        return Err(SimError::EmptyModel);
    }
    let eligible: Vec<usize> = (0..tokens.len()).filter(|&i| is_eligible(&tokens[i])).collect();
    let amount = max_corrupted_words.min(eligible.len());
    let mut picked: Vec<usize> = index::sample(rng, eligible.len(), amount)
        .into_iter()
        .map(|j| eligible[j])
        .collect();
    picked.sort_unstable();

    let mut noisy_tokens = tokens.to_vec();
    let mut corrections = Vec::with_capacity(picked.len());
    for i in picked {
        let clean = &tokens[i];
        for _ in 0..MAX_ATTEMPTS {
            let (noisy, _) = corrupt_word(clean, model, rng)?;
            if !noisy.is_empty() && noisy != *clean {
                noisy_tokens[i] = noisy.clone();
                corrections.push(Correction {
                    token_index: i,
                    clean: clean.clone(),
                    noisy,
                });
                break;
            }
        }
    }
    Ok(UtteranceCorruption {
        noisy_tokens,
        corrections,
    })
}
