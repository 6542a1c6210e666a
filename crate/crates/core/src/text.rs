//! Caption cleaning, caption-level deduplication, and vocabulary building.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// A cleaned caption. `tokens` stays empty until the corpus is built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanDoc {
    pub doc_id: u32,
    pub frame_path: String,
    pub text: String,
    #[serde(default)]
    pub tokens: Vec<u32>,
}

/// A caption removed because its cleaned text repeats `doc_id`'s.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateCaption {
    pub frame_path: String,
    pub doc_id: u32,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TextError {
    #[error("no documents to build a corpus from")]
    NoDocuments,
    #[error(
        "corpus is empty after filtering: {docs} docs, {candidates} candidate tokens, \
         {too_common} above max df, {too_rare} below min df"
    )]
    EmptyCorpus {
        docs: usize,
        candidates: usize,
        too_common: usize,
        too_rare: usize,
    },
    #[error("vocabulary tokens must be unique and sorted (at {0:?})")]
    UnsortedVocabulary(String),
    #[error("vocabulary has {tokens} tokens but {df} document frequencies")]
    VocabularyShape { tokens: usize, df: usize },
}

/// NLTK's English stopword list.
pub const ENGLISH_STOPWORDS: &[&str] = &[
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're", "you've",
    "you'll", "you'd", "your", "yours", "yourself", "yourselves", "he", "him", "his", "himself",
    "she", "she's", "her", "hers", "herself", "it", "it's", "its", "itself", "they", "them",
    "their", "theirs", "themselves", "what", "which", "who", "whom", "this", "that", "that'll",
    "these", "those", "am", "is", "are", "was", "were", "be", "been", "being", "have", "has",
    "had", "having", "do", "does", "did", "doing", "a", "an", "the", "and", "but", "if", "or",
    "because", "as", "until", "while", "of", "at", "by", "for", "with", "about", "against",
    "between", "into", "through", "during", "before", "after", "above", "below", "to", "from",
    "up", "down", "in", "out", "on", "off", "over", "under", "again", "further", "then", "once",
    "here", "there", "when", "where", "why", "how", "all", "any", "both", "each", "few", "more",
    "most", "other", "some", "such", "no", "nor", "not", "only", "own", "same", "so", "than",
    "too", "very", "s", "t", "can", "will", "just", "don", "don't", "should", "should've", "now",
    "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren", "aren't", "couldn", "couldn't", "didn",
    "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn", "hasn't", "haven", "haven't", "isn",
    "isn't", "ma", "mightn", "mightn't", "mustn", "mustn't", "needn", "needn't", "shan", "shan't",
    "shouldn", "shouldn't", "wasn", "wasn't", "weren", "weren't", "won", "won't", "wouldn",
    "wouldn't",
];

/// The sixteen CSS basic color keywords.
pub const COLOR_STOPWORDS: &[&str] = &[
    "black", "silver", "gray", "white", "maroon", "red", "purple", "fuchsia", "green", "lime",
    "olive", "yellow", "navy", "blue", "teal", "aqua",
];

/// Frequent English character trigrams, used by [`english_likelihood`].
const COMMON_TRIGRAMS: &[&str] = &[
    "the", "and", "ing", "ion", "tio", "ent", "ati", "for", "her", "ter", "hat", "tha", "ere",
    "ate", "his", "con", "res", "ver", "all", "ons", "nce", "men", "ith", "ted", "ers", "pro",
    "thi", "wit", "are", "ess", "not", "ive", "was", "ect", "rea", "com", "eve", "per", "int",
    "est", "sta", "cti", "ica", "ist", "ear", "ain", "one", "our", "iti", "rat", "man", "ove",
    "ong", "ran", "ght", "out", "ome", "ble", "ous", "str", "tan", "oun", "ide", "ure", "ard",
    "ill", "ren", "pla", "nts", "ead", "lin", "tur", "ial", "hou", "oth", "ell", "ack", "oor",
    "ows", "eat", "ase", "ach", "min", "nda", "ldi", "uil", "bui", "din", "wom", "oma", "son",
];

/// Lowercase, strip `<...>` tags, map everything outside `[a-z ]` to a space,
/// and collapse whitespace. Returns `None` when fewer than `min_chars`
/// characters remain.
pub fn clean_caption(raw: &str, min_chars: usize) -> Option<String> {
    let lowered = raw.to_lowercase();
    let stripped = strip_tags(&lowered);
    let mut out = String::with_capacity(stripped.len());
    for word in stripped
        .chars()
        .map(|c| if c.is_ascii_lowercase() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
    {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    (out.chars().count() >= min_chars).then_some(out)
}

/// Leftmost-match removal of `<[^>]*>`; an unterminated `<` is kept.
fn strip_tags(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(open) = rest.find('<') {
        match rest[open..].find('>') {
            Some(close) => {
                out.push_str(&rest[..open]);
                out.push(' ');
                rest = &rest[open + close + 1..];
            }
            None => break,
        }
    }
    out.push_str(rest);
    out
}

/// Share of a cleaned text's in-word character trigrams that are common in
/// English. Near 0 for non-English or random letter strings.
pub fn english_likelihood(text: &str) -> f64 {
    let mut total = 0usize;
    let mut hits = 0usize;
    for word in text.split_whitespace() {
        let bytes = word.as_bytes();
        for tri in bytes.windows(3) {
            total += 1;
            if COMMON_TRIGRAMS.iter().any(|c| c.as_bytes() == tri) {
                hits += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// Keep the first document of each distinct cleaned text; map the rest to it.
pub fn dedup_captions(docs: Vec<CleanDoc>) -> (Vec<CleanDoc>, Vec<DuplicateCaption>) {
    let mut first: BTreeMap<String, u32> = BTreeMap::new();
    let mut unique = Vec::with_capacity(docs.len());
    let mut dupes = Vec::new();
    for doc in docs {
        match first.get(&doc.text) {
            Some(&doc_id) => dupes.push(DuplicateCaption {
                frame_path: doc.frame_path,
                doc_id,
            }),
            None => {
                first.insert(doc.text.clone(), doc.doc_id);
                unique.push(doc);
            }
        }
    }
    (unique, dupes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusOptions {
    /// Absolute minimum document frequency.
    pub min_df: usize,
    /// Tokens in more than this share of documents are dropped.
    pub max_df_ratio: f64,
    pub min_token_chars: usize,
    /// Domain stopwords added to the built-in English and color lists.
    pub stopwords: Vec<String>,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        Self {
            min_df: 10,
            max_df_ratio: 0.5,
            min_token_chars: 3,
            stopwords: Vec::new(),
        }
    }
}

impl CorpusOptions {
    pub fn stopword_set(&self) -> BTreeSet<String> {
        ENGLISH_STOPWORDS
            .iter()
            .chain(COLOR_STOPWORDS)
            .map(|s| s.to_string())
            .chain(self.stopwords.iter().map(|s| s.to_lowercase()))
            .collect()
    }
}

/// Token <-> id bijection. Tokens are sorted, so ids are dense and stable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    df: Vec<u32>,
    n_docs: usize,
}

impl Vocabulary {
    pub fn from_parts(tokens: Vec<String>, df: Vec<u32>, n_docs: usize) -> Result<Self, TextError> {
        if tokens.len() != df.len() {
            return Err(TextError::VocabularyShape {
                tokens: tokens.len(),
                df: df.len(),
            });
        }
        if let Some(w) = tokens.windows(2).find(|w| w[0] >= w[1]) {
            return Err(TextError::UnsortedVocabulary(w[1].clone()));
        }
        Ok(Self { tokens, df, n_docs })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.tokens
            .binary_search_by(|t| t.as_str().cmp(token))
            .ok()
            .map(|i| i as u32)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn document_frequencies(&self) -> &[u32] {
        &self.df
    }

    /// Number of documents the frequencies were counted over.
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuiltCorpus {
    pub vocabulary: Vocabulary,
    /// Non-empty documents with token ids filled in.
    pub docs: Vec<CleanDoc>,
    /// Ids of documents left with no tokens after filtering.
    pub dropped: Vec<u32>,
}

/// Whitespace-tokenize, drop short tokens and stopwords, prune by document
/// frequency, and encode every document as vocabulary ids. No stemming.
pub fn build_corpus(docs: Vec<CleanDoc>, opts: &CorpusOptions) -> Result<BuiltCorpus, TextError> {
    if docs.is_empty() {
        return Err(TextError::NoDocuments);
    }
    let stop = opts.stopword_set();
    let candidates: Vec<Vec<&str>> = docs
        .iter()
        .map(|d| {
            d.text
                .split_whitespace()
                .filter(|t| t.chars().count() >= opts.min_token_chars && !stop.contains(*t))
                .collect()
        })
        .collect();

    let mut df: BTreeMap<&str, u32> = BTreeMap::new();
    for toks in &candidates {
        let distinct: BTreeSet<&str> = toks.iter().copied().collect();
        for t in distinct {
            *df.entry(t).or_default() += 1;
        }
    }

    let n_docs = docs.len();
    let max_df = opts.max_df_ratio * n_docs as f64;
    let (mut too_common, mut too_rare) = (0, 0);
    let mut tokens = Vec::new();
    let mut freqs = Vec::new();
    for (&t, &f) in &df {
        if f64::from(f) > max_df {
            too_common += 1;
        } else if (f as usize) < opts.min_df {
            too_rare += 1;
        } else {
            tokens.push(t.to_string());
            freqs.push(f);
        }
    }
    let vocabulary = Vocabulary {
        tokens,
        df: freqs,
        n_docs,
    };

    let encoded: Vec<Vec<u32>> = candidates
        .iter()
        .map(|toks| toks.iter().filter_map(|t| vocabulary.id(t)).collect())
        .collect();
    let candidates = df.len();
    let mut kept = Vec::with_capacity(n_docs);
    let mut dropped = Vec::new();
    for (mut doc, tokens) in docs.into_iter().zip(encoded) {
        doc.tokens = tokens;
        if doc.tokens.is_empty() {
            dropped.push(doc.doc_id);
        } else {
            kept.push(doc);
        }
    }
    if kept.is_empty() {
        return Err(TextError::EmptyCorpus {
            docs: n_docs,
            candidates,
            too_common,
            too_rare,
        });
    }
    Ok(BuiltCorpus {
        vocabulary,
        docs: kept,
        dropped,
    })
}
