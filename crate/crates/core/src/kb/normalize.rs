use std::collections::{BTreeSet, HashSet};

pub type Stopwords = HashSet<String>;

/// Bodies with fewer normalized tokens carry too little content to group on.
pub const MIN_BODY_TOKENS: usize = 3;

const ENGLISH_STOPWORDS: &[&str] = &[
    "a",
    "about",
    "above",
    "after",
    "again",
    "against",
    "all",
    "am",
    "an",
    "and",
    "any",
    "are",
    "as",
    "at",
    "be",
    "because",
    "been",
    "before",
    "being",
    "below",
    "between",
    "both",
    "but",
    "by",
    "can",
    "could",
    "did",
    "do",
    "does",
    "doing",
    "down",
    "during",
    "each",
    "few",
    "for",
    "from",
    "further",
    "had",
    "has",
    "have",
    "having",
    "he",
    "her",
    "here",
    "hers",
    "herself",
    "him",
    "himself",
    "his",
    "how",
    "i",
    "if",
    "in",
    "into",
    "is",
    "it",
    "its",
    "itself",
    "just",
    "me",
    "more",
    "most",
    "my",
    "myself",
    "no",
    "nor",
    "not",
    "now",
    "of",
    "off",
    "on",
    "once",
    "only",
    "or",
    "other",
    "our",
    "ours",
    "ourselves",
    "out",
    "over",
    "own",
    "same",
    "she",
    "should",
    "so",
    "some",
    "such",
    "than",
    "that",
    "the",
    "their",
    "theirs",
    "them",
    "themselves",
    "then",
    "there",
    "these",
    "they",
    "this",
    "those",
    "through",
    "to",
    "too",
    "under",
    "until",
    "up",
    "very",
    "was",
    "we",
    "were",
    "what",
    "when",
    "where",
    "which",
    "while",
    "who",
    "whom",
    "why",
    "will",
    "with",
    "would",
    "you",
    "your",
    "yours",
    "yourself",
    "yourselves",
    "hi",
    "hello",
    "please",
    "thanks",
    "tell",
    "know",
    "let",
    "may",
    "might",
    "must",
    "shall",
    "also",
    "whats",
    "theres",
    "im",
    "ive",
    "id",
    "dont",
];

pub fn default_stopwords() -> Stopwords {
    ENGLISH_STOPWORDS.iter().map(|w| (*w).to_owned()).collect()
}

fn strip_plural(token: &str) -> &str {
    if token.chars().count() >= 4 && token.ends_with('s') && !token.ends_with("ss") {
        &token[..token.len() - 1]
    } else {
        token
    }
}

fn key_tokens(text: &str, stopwords: &Stopwords) -> BTreeSet<String> {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    cleaned
        .split_whitespace()
        .filter(|t| !stopwords.contains(*t))
        .map(strip_plural)
        .filter(|t| !stopwords.contains(*t))
        .map(str::to_owned)
        .collect()
}

/// Lowercases, drops punctuation and stopwords, strips plural `s` from
/// tokens of four or more letters, and joins the sorted distinct tokens
/// with single spaces.
///
/// ```
/// use confusim::kb::{default_stopwords, normalize_title};
/// let sw = default_stopwords();
/// assert_eq!(normalize_title("Does it have free wifi?", &sw), "free wifi");
/// assert_eq!(normalize_title("Is the wifi free", &sw), "free wifi");
/// ```
pub fn normalize_title(title: &str, stopwords: &Stopwords) -> String {
    let tokens: Vec<String> = key_tokens(title, stopwords).into_iter().collect();
    tokens.join(" ")
}

/// Normalized key of a body, or `None` when it has fewer than
/// [`MIN_BODY_TOKENS`] tokens.
pub fn body_key(body: &str, stopwords: &Stopwords) -> Option<String> {
    let tokens = key_tokens(body, stopwords);
    (tokens.len() >= MIN_BODY_TOKENS).then(|| tokens.into_iter().collect::<Vec<_>>().join(" "))
}

pub(crate) fn token_set(text: &str, stopwords: &Stopwords) -> BTreeSet<String> {
    key_tokens(text, stopwords)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wifi_titles_share_a_key() {
        let sw = default_stopwords();
        assert_eq!(normalize_title("Does it have free wifi?", &sw), "free wifi");
        assert_eq!(normalize_title("Is the wifi free", &sw), "free wifi");
        assert_eq!(normalize_title("Do you offer free WiFi?", &sw), "free offer wifi");
    }

    #[test]
    fn edge_cases() {
        let sw = default_stopwords();
        assert_eq!(normalize_title("", &sw), "");
        assert_eq!(normalize_title("Is it?", &sw), "");
        assert_eq!(normalize_title("Are pets allowed", &sw), "allowed pet");
        assert_eq!(normalize_title("glass bus", &sw), "bus glass");
        assert_eq!(normalize_title("trails trail", &sw), "trail");
    }

    #[test]
    fn stemmed_stopwords_dropped() {
        let mut sw = default_stopwords();
        sw.insert("car".into());
        assert_eq!(normalize_title("cars", &sw), "");
    }

    #[test]
    fn body_keys_need_content() {
        let sw = default_stopwords();
        assert_eq!(body_key("Yes.", &sw), None);
        assert_eq!(
            body_key("Yes, free wifi is available", &sw).as_deref(),
            Some("available free wifi yes")
        );
    }
}
