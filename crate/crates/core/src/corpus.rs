//! Tokenized style corpora, stopword filtering, balancing and embedding tables.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub character: String,
    pub context_id: Option<String>,
    pub tokens: Vec<String>,
}

impl Utterance {
    pub fn new<I, S>(id: impl Into<String>, character: impl Into<String>, tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            id: id.into(),
            character: character.into(),
            context_id: None,
            tokens: tokens.into_iter().map(Into::into).collect(),
        }
    }

    pub fn with_context(mut self, context_id: impl Into<String>) -> Self {
        self.context_id = Some(context_id.into());
        self
    }
}

/// All utterances attributed to one character or style space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    character: String,
    utterances: Vec<Utterance>,
    token_count: usize,
}

impl Corpus {
    /// Fails on duplicate utterance ids.
    pub fn new(character: impl Into<String>, utterances: Vec<Utterance>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for u in &utterances {
            if !seen.insert(u.id.as_str()) {
                return Err(Error::DuplicateId(u.id.clone()));
            }
        }
        let token_count = utterances.iter().map(|u| u.tokens.len()).sum();
        Ok(Self {
            character: character.into(),
            utterances,
            token_count,
        })
    }

    pub fn character(&self) -> &str {
        &self.character
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.utterances
            .iter()
            .flat_map(|u| u.tokens.iter().map(String::as_str))
    }

    /// Sub-corpus made of the utterances at `indices`, in the order given.
    ///
    /// Panics if an index is out of bounds.
    pub fn select(&self, indices: &[usize]) -> Corpus {
        let utterances: Vec<Utterance> = indices
            .iter()
            .map(|&i| self.utterances[i].clone())
            .collect();
        let token_count = utterances.iter().map(|u| u.tokens.len()).sum();
        Corpus {
            character: self.character.clone(),
            utterances,
            token_count,
        }
    }

    pub fn into_utterances(self) -> Vec<Utterance> {
        self.utterances
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopwordList {
    words: BTreeSet<String>,
}

impl StopwordList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn insert(&mut self, word: impl Into<String>) -> bool {
        self.words.insert(word.into())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for StopwordList {
    fn from_iter<T: IntoIterator<Item = S>>(iter: T) -> Self {
        Self {
            words: iter.into_iter().map(Into::into).collect(),
        }
    }
}

/// Codepoints treated as punctuation when filtering.
///
/// The built-in classes cover ASCII punctuation and the General Punctuation,
/// CJK Symbols and Punctuation and fullwidth punctuation blocks. A loaded list
/// can extend them or replace them entirely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PunctuationSet {
    builtin: bool,
    extra: BTreeSet<char>,
}

impl Default for PunctuationSet {
    fn default() -> Self {
        Self {
            builtin: true,
            extra: BTreeSet::new(),
        }
    }
}

impl PunctuationSet {
    /// Only the listed codepoints count as punctuation.
    pub fn exactly<I: IntoIterator<Item = char>>(chars: I) -> Self {
        Self {
            builtin: false,
            extra: chars.into_iter().collect(),
        }
    }

    pub fn extend<I: IntoIterator<Item = char>>(&mut self, chars: I) {
        self.extra.extend(chars);
    }

    pub fn is_punctuation(&self, c: char) -> bool {
        if self.extra.contains(&c) {
            return true;
        }
        self.builtin
            && (c.is_ascii_punctuation()
                || matches!(c as u32,
                    0x2000..=0x206F
                    | 0x3000..=0x303F
                    | 0xFE30..=0xFE4F
                    | 0xFF01..=0xFF0F
                    | 0xFF1A..=0xFF20
                    | 0xFF3B..=0xFF40
                    | 0xFF5B..=0xFF65))
    }

    /// True for non-empty tokens made only of punctuation codepoints.
    pub fn is_punctuation_token(&self, token: &str) -> bool {
        !token.is_empty() && token.chars().all(|c| self.is_punctuation(c))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterReport {
    pub removed_tokens: usize,
    /// Ids of utterances left with no tokens, which were dropped.
    pub dropped_utterances: Vec<String>,
}

/// Removes stopwords and, when `drop_punctuation` is set, punctuation-only
/// tokens. Utterances emptied by filtering are dropped and listed in the report.
pub fn filter_tokens(
    corpus: &Corpus,
    stopwords: &StopwordList,
    punctuation: &PunctuationSet,
    drop_punctuation: bool,
) -> (Corpus, FilterReport) {
    let mut report = FilterReport::default();
    let mut kept = Vec::with_capacity(corpus.len());
    for u in corpus.utterances() {
        let tokens: Vec<String> = u
            .tokens
            .iter()
            .filter(|t| {
                !stopwords.contains(t) && !(drop_punctuation && punctuation.is_punctuation_token(t))
            })
            .cloned()
            .collect();
        report.removed_tokens += u.tokens.len() - tokens.len();
        if tokens.is_empty() {
            report.dropped_utterances.push(u.id.clone());
            continue;
        }
        kept.push(Utterance {
            tokens,
            ..u.clone()
        });
    }
    let token_count = kept.iter().map(|u| u.tokens.len()).sum();
    let filtered = Corpus {
        character: corpus.character.clone(),
        utterances: kept,
        token_count,
    };
    (filtered, report)
}

/// Down-samples corpora so their token counts follow `ratios`.
///
/// The corpus with the smallest `tokens / ratio` is kept whole and fixes the
/// scale; every other corpus is reduced by drawing utterances uniformly
/// without replacement (seeded per corpus) until its token count is as close
/// as possible to the target. Selected utterances keep their original order.
pub fn balance_corpora(corpora: &[Corpus], ratios: &[f64], seed: u64) -> Result<Vec<Corpus>> {
    if ratios.len() != corpora.len() {
        return Err(Error::RatioCount {
            expected: corpora.len(),
            found: ratios.len(),
        });
    }
    if let Some(&bad) = ratios.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::InvalidRatio(bad));
    }
    if let Some(c) = corpora.iter().find(|c| c.token_count == 0) {
        return Err(Error::CorpusTooSmall(c.character.clone()));
    }
    let scale = corpora
        .iter()
        .zip(ratios)
        .map(|(c, r)| c.token_count as f64 / r)
        .fold(f64::INFINITY, f64::min);

    let mut out = Vec::with_capacity(corpora.len());
    for (i, (corpus, ratio)) in corpora.iter().zip(ratios).enumerate() {
        let target = scale * ratio;
        if corpus.token_count as f64 <= target {
            out.push(corpus.clone());
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        order.shuffle(&mut rng);

        let mut taken = 0usize;
        let mut cumulative = 0usize;
        for &idx in &order {
            let next = cumulative + corpus.utterances[idx].tokens.len();
            if next as f64 >= target {
                // Take the crossing utterance only if that lands closer to the target.
                if next as f64 - target < target - cumulative as f64 {
                    taken += 1;
                }
                break;
            }
            cumulative = next;
            taken += 1;
        }
        if taken == 0 {
            return Err(Error::CorpusTooSmall(corpus.character.clone()));
        }
        let mut chosen = order[..taken].to_vec();
        chosen.sort_unstable();
        out.push(corpus.select(&chosen));
    }
    Ok(out)
}

/// Fixed-dimension string-keyed vectors (token, label or utterance embeddings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    dimension: usize,
    entries: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, key: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let key = key.into();
        if vector.len() != self.dimension {
            return Err(Error::EmbeddingDimension {
                key,
                expected: self.dimension,
                found: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteEmbedding(key));
        }
        self.entries.insert(key, vector);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.entries.get(key).map(Vec::as_slice)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Looks up every key, reporting all missing ones together.
    pub fn lookup_all<'a, S: AsRef<str>>(&'a self, keys: &[S]) -> Result<Vec<&'a [f64]>> {
        let missing: Vec<String> = keys
            .iter()
            .filter(|k| !self.contains(k.as_ref()))
            .map(|k| k.as_ref().to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingKeys(missing));
        }
        Ok(keys
            .iter()
            .map(|k| self.entries[k.as_ref()].as_slice())
            .collect())
    }
}
