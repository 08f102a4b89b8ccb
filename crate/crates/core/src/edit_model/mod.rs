//! Confusion-pair mining, letter alignment, and the position-dependent
//! letter rewrite model estimated from them.

mod io;
mod model;

use std::fmt;

use thiserror::Error;

use crate::align::{edit_script_rev, EditOp};
use crate::cn::ConfusionNetwork;

pub use io::{load_model, save_model, FORMAT_NAME, FORMAT_VERSION};
pub use model::{estimate_model, Backoff, Choices, Context, RewriteModel, SamplingConstants, DEFAULT_POSITION_CAP};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("cannot align an empty word")]
    EmptyWord,
    #[error("no confusion pairs to estimate from")]
    NoPairs,
    #[error("position cap must be at least 1")]
    ZeroPositionCap,
    #[error("position caps differ ({0} vs {1})")]
    CapMismatch(usize, usize),
    #[error("model has an empty alphabet")]
    EmptyAlphabet,
    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// One side of an alignment column: a letter or the deletion symbol `*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Glyph {
    Letter(char),
    Star,
}

impl Glyph {
    pub fn letter(self) -> Option<char> {
        match self {
            Glyph::Letter(c) => Some(c),
            Glyph::Star => None,
        }
    }
}

impl fmt::Display for Glyph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Glyph::Letter(c) => write!(f, "{c}"),
            Glyph::Star => f.write_str("*"),
        }
    }
}

/// A directed word confusion pair, lowercased and letters only.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WordPair {
    pub source: String,
    pub target: String,
}

impl WordPair {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        WordPair {
            source: source.into(),
            target: target.into(),
        }
    }

    /// Lowercases both words; `None` when either is empty, holds a
    /// non-letter, or the two coincide.
    pub fn canonical(source: &str, target: &str) -> Option<Self> {
        let source = canonical_word(source)?;
        let target = canonical_word(target)?;
        (source != target).then_some(WordPair { source, target })
    }
}

pub(crate) fn canonical_word(word: &str) -> Option<String> {
    if word.is_empty() || !word.chars().all(char::is_alphabetic) {
        return None;
    }
    Some(word.to_lowercase())
}

/// Every directed pair of distinct words sharing a slot. Reserved tokens,
/// and words that are not purely alphabetic, are dropped first, so a slot
/// with n remaining words yields n·(n−1) pairs.
pub fn extract_confusion_pairs(cn: &ConfusionNetwork) -> Vec<WordPair> {
    let mut pairs = Vec::new();
    for slot in &cn.slots {
        let mut words: Vec<String> = Vec::with_capacity(slot.len());
        for alt in slot.alternatives.iter().filter(|a| !a.is_reserved()) {
            if let Some(w) = canonical_word(&alt.word) {
                if !words.contains(&w) {
                    words.push(w);
                }
            }
        }
        for (i, a) in words.iter().enumerate() {
            for (j, b) in words.iter().enumerate() {
                if i != j {
                    pairs.push(WordPair {
                        source: a.clone(),
                        target: b.clone(),
                    });
                }
            }
        }
    }
    pairs
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LetterAlignment {
    /// (source side, target side); never (`*`, `*`).
    pub columns: Vec<(Glyph, Glyph)>,
    pub cost: usize,
}

impl LetterAlignment {
    fn project(&self, side: impl Fn(&(Glyph, Glyph)) -> Glyph) -> String {
        self.columns.iter().filter_map(|c| side(c).letter()).collect()
    }

    pub fn source(&self) -> String {
        self.project(|c| c.0)
    }

    pub fn target(&self) -> String {
        self.project(|c| c.1)
    }
}

impl fmt::Display for LetterAlignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (s, t) in &self.columns {
            write!(f, "({s},{t})")?;
        }
        Ok(())
    }
}

/// Minimal unit-cost letter alignment of `source` against `target`.
///
/// Ties are resolved from the right end, preferring match, substitution,
/// deletion of a source letter, then insertion of a target letter.
fn letter_columns<T: PartialEq>(src: &[T], tgt: &[T], letter: impl Fn(&T) -> char) -> (Vec<(Glyph, Glyph)>, usize) {
    let mut columns = Vec::with_capacity(src.len().max(tgt.len()) + 1);
    let mut cost = 0;
    edit_script_rev(src, tgt, |op| {
        cost += op.cost();
        columns.push(match op {
            EditOp::Match { src: i, tgt: j } | EditOp::Substitute { src: i, tgt: j } => {
                (Glyph::Letter(letter(&src[i])), Glyph::Letter(letter(&tgt[j])))
            }
            EditOp::Delete { src: i } => (Glyph::Letter(letter(&src[i])), Glyph::Star),
            EditOp::Insert { tgt: j } => (Glyph::Star, Glyph::Letter(letter(&tgt[j]))),
        });
    });
    columns.reverse();
    (columns, cost)
}

pub fn align_letters(source: &str, target: &str) -> Result<LetterAlignment, ModelError> {
    if source.is_empty() || target.is_empty() {
        return Err(ModelError::EmptyWord);
    }
    let (columns, cost) = if source.is_ascii() && target.is_ascii() {
        letter_columns(source.as_bytes(), target.as_bytes(), |b| char::from(*b))
    } else {
        let src: Vec<char> = source.chars().collect();
        let tgt: Vec<char> = target.chars().collect();
        letter_columns(&src, &tgt, |c| *c)
    };
    Ok(LetterAlignment { columns, cost })
}
