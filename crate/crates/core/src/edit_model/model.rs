use std::collections::{BTreeMap, BTreeSet};

use super::{align_letters, Glyph, ModelError, WordPair};

pub const DEFAULT_POSITION_CAP: usize = 16;

/// Conditioning context of an insertion: the source letter the new letter
/// follows, or the start of the word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Context {
    Begin,
    Letter(char),
}

/// Sampling constants carried with the model.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingConstants {
    /// Edit counts drawn uniformly per word.
    pub edit_counts: Vec<u32>,
    pub p_replacement: f64,
    pub p_insertion: f64,
}

impl Default for SamplingConstants {
    fn default() -> Self {
        SamplingConstants {
            edit_counts: vec![1, 2, 3],
            p_replacement: 0.9,
            p_insertion: 0.1,
        }
    }
}

/// Which table a sampling distribution came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backoff {
    /// Counts observed for the letter at this position bin.
    Exact,
    /// Counts for the letter pooled over every position bin.
    Pooled,
    /// Uniform over the alphabet.
    Uniform,
}

/// Integer-weighted outcomes of one conditional distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Choices<T> {
    pub items: Vec<(T, u64)>,
    pub level: Backoff,
}

impl<T: Copy> Choices<T> {
    pub fn total(&self) -> u64 {
        self.items.iter().map(|(_, w)| w).sum()
    }

    /// Maps `r` in `0..total()` to an outcome.
    pub fn pick(&self, mut r: u64) -> T {
        for (item, w) in &self.items {
            if r < *w {
                return *item;
            }
            r -= w;
        }
        panic!("draw {r} beyond distribution total");
    }

    pub fn probabilities(&self) -> Vec<(T, f64)> {
        let total = self.total() as f64;
        self.items.iter().map(|(t, w)| (*t, *w as f64 / total)).collect()
    }
}

/// Letter rewrite counts estimated from aligned confusion pairs.
///
/// `replace` is keyed by (source letter, position bin) and counts what the
/// letter was aligned to, `*` meaning it was deleted. Identity columns are
/// counted too; they are kept out of every sampling distribution.
/// `insert` is keyed by the letter preceding an inserted letter.
#[derive(Debug, Clone, PartialEq)]
pub struct RewriteModel {
    pub(crate) position_cap: usize,
    pub(crate) alphabet: BTreeSet<char>,
    pub(crate) replace: BTreeMap<(char, usize), BTreeMap<Glyph, u64>>,
    pub(crate) insert: BTreeMap<(Context, usize), BTreeMap<char, u64>>,
    pub(crate) constants: SamplingConstants,
}

impl RewriteModel {
    pub fn new(position_cap: usize) -> Result<Self, ModelError> {
        if position_cap == 0 {
            return Err(ModelError::ZeroPositionCap);
        }
        Ok(RewriteModel {
            position_cap,
            alphabet: BTreeSet::new(),
            replace: BTreeMap::new(),
            insert: BTreeMap::new(),
            constants: SamplingConstants::default(),
        })
    }

    pub fn position_cap(&self) -> usize {
        self.position_cap
    }

    pub fn alphabet(&self) -> &BTreeSet<char> {
        &self.alphabet
    }

    pub fn constants(&self) -> &SamplingConstants {
        &self.constants
    }

    pub fn is_empty(&self) -> bool {
        self.alphabet.is_empty()
    }

    pub fn replace_counts(&self) -> &BTreeMap<(char, usize), BTreeMap<Glyph, u64>> {
        &self.replace
    }

    pub fn insert_counts(&self) -> &BTreeMap<(Context, usize), BTreeMap<char, u64>> {
        &self.insert
    }

    pub fn bin(&self, position: usize) -> usize {
        position.min(self.position_cap - 1)
    }

    /// Adds `count` observations of `source` at `position` rewritten as `target`.
    pub fn record_replacement(&mut self, source: char, position: usize, target: Glyph, count: u64) {
        let source = lower(source);
        let target = match target {
            Glyph::Letter(c) => Glyph::Letter(lower(c)),
            Glyph::Star => Glyph::Star,
        };
        self.alphabet.insert(source);
        if let Glyph::Letter(c) = target {
            self.alphabet.insert(c);
        }
        let bin = self.bin(position);
        *self
            .replace
            .entry((source, bin))
            .or_default()
            .entry(target)
            .or_insert(0) += count;
    }

    /// Adds `count` observations of `inserted` following `context` at `position`.
    pub fn record_insertion(&mut self, context: Context, position: usize, inserted: char, count: u64) {
        let context = match context {
            Context::Letter(c) => {
                let c = lower(c);
                self.alphabet.insert(c);
                Context::Letter(c)
            }
            Context::Begin => Context::Begin,
        };
        let inserted = lower(inserted);
        self.alphabet.insert(inserted);
        let bin = match context {
            Context::Begin => 0,
            Context::Letter(_) => self.bin(position),
        };
        *self
            .insert
            .entry((context, bin))
            .or_default()
            .entry(inserted)
            .or_insert(0) += count;
    }

    /// Aligns one pair and adds its columns to the tables.
    pub fn observe(&mut self, pair: &WordPair) -> Result<(), ModelError> {
        self.observe_weighted(pair, 1)
    }

    /// Like [`observe`](Self::observe), counting the pair `weight` times.
    /// Lets callers weight pairs, e.g. by quantized posteriors.
    pub fn observe_weighted(&mut self, pair: &WordPair, weight: u64) -> Result<(), ModelError> {
        let alignment = align_letters(&pair.source, &pair.target)?;
        for c in pair.source.chars().chain(pair.target.chars()) {
            self.alphabet.insert(lower(c));
        }
        let mut src_pos = 0usize;
        let mut prev: Option<(char, usize)> = None;
        for (s, t) in alignment.columns {
            match s {
                Glyph::Letter(sc) => {
                    self.record_replacement(sc, src_pos, t, weight);
                    prev = Some((sc, src_pos));
                    src_pos += 1;
                }
                Glyph::Star => {
                    let inserted = t.letter().expect("alignment never pairs * with *");
                    match prev {
                        Some((pc, pi)) => self.record_insertion(Context::Letter(pc), pi, inserted, weight),
                        None => self.record_insertion(Context::Begin, 0, inserted, weight),
                    }
                }
            }
        }
        Ok(())
    }

    /// Adds another model's counts into this one.
    pub fn merge(&mut self, other: &RewriteModel) -> Result<(), ModelError> {
        if other.position_cap != self.position_cap {
            return Err(ModelError::CapMismatch(self.position_cap, other.position_cap));
        }
        self.alphabet.extend(other.alphabet.iter().copied());
        for (key, row) in &other.replace {
            let mine = self.replace.entry(*key).or_default();
            for (t, c) in row {
                *mine.entry(*t).or_insert(0) += c;
            }
        }
        for (key, row) in &other.insert {
            let mine = self.insert.entry(*key).or_default();
            for (t, c) in row {
                *mine.entry(*t).or_insert(0) += c;
            }
        }
        Ok(())
    }

    fn replace_row(&self, source: char, bin: usize) -> Vec<(Glyph, u64)> {
        self.replace
            .get(&(source, bin))
            .map(|row| {
                row.iter()
                    .filter(|(t, c)| **t != Glyph::Letter(source) && **c > 0)
                    .map(|(t, c)| (*t, *c))
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Pr(t | s, i) without backoff: `None` when no non-identity rewrite of
    /// `source` was seen at this position bin.
    pub fn replacement_distribution(&self, source: char, position: usize) -> Option<Vec<(Glyph, f64)>> {
        let items = self.replace_row(lower(source), self.bin(position));
        (!items.is_empty()).then(|| {
            Choices {
                items,
                level: Backoff::Exact,
            }
            .probabilities()
        })
    }

    /// Pr_*(t | s, i) without backoff.
    pub fn insertion_distribution(&self, context: Context, position: usize) -> Option<Vec<(char, f64)>> {
        let (context, bin) = match context {
            Context::Begin => (Context::Begin, 0),
            Context::Letter(c) => (Context::Letter(lower(c)), self.bin(position)),
        };
        let items: Vec<(char, u64)> = self
            .insert
            .get(&(context, bin))
            .map(|row| row.iter().filter(|(_, c)| **c > 0).map(|(t, c)| (*t, *c)).collect())
            .unwrap_or_default();
        (!items.is_empty()).then(|| {
            Choices {
                items,
                level: Backoff::Exact,
            }
            .probabilities()
        })
    }

    /// Replacement outcomes for `source` at `position`, backing off from
    /// the position bin to the position-pooled counts and then to a uniform
    /// choice over the alphabet and `*`. Never contains `source` itself.
    pub fn replacement_choices(&self, source: char, position: usize) -> Choices<Glyph> {
        let s = lower(source);
        let items = self.replace_row(s, self.bin(position));
        if !items.is_empty() {
            return Choices {
                items,
                level: Backoff::Exact,
            };
        }
        let mut pooled: BTreeMap<Glyph, u64> = BTreeMap::new();
        for bin in 0..self.position_cap {
            for (t, c) in self.replace_row(s, bin) {
                *pooled.entry(t).or_insert(0) += c;
            }
        }
        if !pooled.is_empty() {
            return Choices {
                items: pooled.into_iter().collect(),
                level: Backoff::Pooled,
            };
        }
        let items = self
            .alphabet
            .iter()
            .filter(|&&c| c != s)
            .map(|&c| (Glyph::Letter(c), 1))
            .chain(std::iter::once((Glyph::Star, 1)))
            .collect();
        Choices {
            items,
            level: Backoff::Uniform,
        }
    }

    /// Letters that may be inserted after `source` at `position`, with the
    /// same backoff chain as [`replacement_choices`](Self::replacement_choices)
    /// (the uniform level covers letters only).
    pub fn insertion_choices(&self, source: char, position: usize) -> Choices<char> {
        let s = lower(source);
        if let Some(row) = self.insert.get(&(Context::Letter(s), self.bin(position))) {
            let items: Vec<(char, u64)> = row.iter().filter(|(_, c)| **c > 0).map(|(t, c)| (*t, *c)).collect();
            if !items.is_empty() {
                return Choices {
                    items,
                    level: Backoff::Exact,
                };
            }
        }
        let mut pooled: BTreeMap<char, u64> = BTreeMap::new();
        for ((ctx, _), row) in &self.insert {
            if *ctx == Context::Letter(s) {
                for (t, c) in row {
                    if *c > 0 {
                        *pooled.entry(*t).or_insert(0) += c;
                    }
                }
            }
        }
        if !pooled.is_empty() {
            return Choices {
                items: pooled.into_iter().collect(),
                level: Backoff::Pooled,
            };
        }
        Choices {
            items: self.alphabet.iter().map(|&c| (c, 1)).collect(),
            level: Backoff::Uniform,
        }
    }
}

fn lower(c: char) -> char {
    let mut it = c.to_lowercase();
    match (it.next(), it.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

/// Estimates a rewrite model from directed confusion pairs.
pub fn estimate_model(pairs: &[WordPair], position_cap: usize) -> Result<RewriteModel, ModelError> {
    if pairs.is_empty() {
        return Err(ModelError::NoPairs);
    }
    let mut model = RewriteModel::new(position_cap)?;
    for pair in pairs {
        model.observe(pair)?;
    }
    Ok(model)
}
