//! TF-PMI lexical style scoring.
//!
//! `pmi(w, t) = log2(P(w|t) / P(w))` where `P(w)` comes from the pooled
//! (balanced) corpora, and `score(w, t) = (1 + ln count_t(w)) * pmi(w, t)`.
//! The two logarithm bases differ on purpose and are kept as written.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::{Error, Result};

/// Maximum-likelihood unigram counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnigramDistribution {
    counts: BTreeMap<String, u64>,
    total: u64,
}

impl UnigramDistribution {
    pub fn from_tokens<'a, I: IntoIterator<Item = &'a str>>(tokens: I) -> Self {
        let mut d = Self::default();
        for t in tokens {
            d.add(t, 1);
        }
        d
    }

    pub fn from_corpus(corpus: &Corpus) -> Self {
        Self::from_tokens(corpus.tokens())
    }

    pub fn add(&mut self, token: &str, count: u64) {
        if count == 0 {
            return;
        }
        match self.counts.get_mut(token) {
            Some(c) => *c += count,
            None => {
                self.counts.insert(token.into(), count);
            }
        }
        self.total += count;
    }

    pub fn count(&self, token: &str) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn probability(&self, token: &str) -> Option<f64> {
        let c = *self.counts.get(token)?;
        Some(c as f64 / self.total as f64)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

/// Pooled unigram counts over every corpus (the style corpus included).
pub fn global_distribution(corpora: &[Corpus]) -> Result<UnigramDistribution> {
    let mut d = UnigramDistribution::default();
    for c in corpora {
        for t in c.tokens() {
            d.add(t, 1);
        }
    }
    if d.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    Ok(d)
}

fn probabilities(
    token: &str,
    style: &UnigramDistribution,
    global: &UnigramDistribution,
) -> Result<(f64, f64)> {
    let absent = |which| Error::TokenAbsent {
        token: token.into(),
        which,
    };
    let p_style = style.probability(token).ok_or_else(|| absent("style"))?;
    let p_global = global.probability(token).ok_or_else(|| absent("global"))?;
    Ok((p_style, p_global))
}

/// Pointwise mutual information in bits.
pub fn pmi(token: &str, style: &UnigramDistribution, global: &UnigramDistribution) -> Result<f64> {
    let (ps, pg) = probabilities(token, style, global)?;
    Ok(libm::log2(ps / pg))
}

/// `(1 + ln count) * pmi`.
pub fn tf_pmi_score(
    token: &str,
    style: &UnigramDistribution,
    global: &UnigramDistribution,
) -> Result<f64> {
    let p = pmi(token, style, global)?;
    Ok(tf_weight(style.count(token)) * p)
}

fn tf_weight(count: u64) -> f64 {
    1.0 + libm::log(count as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfPmiEntry {
    pub token: String,
    pub count_in_style: u64,
    pub pmi: f64,
    pub score: f64,
}

/// Top-K style lexicon, sorted by score, then count, then token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfPmiLexicon {
    pub character: String,
    pub capacity: usize,
    pub entries: Vec<TfPmiEntry>,
    /// Set when no candidate survived the probability thresholds.
    pub no_candidates: bool,
}

impl TfPmiLexicon {
    pub fn empty(character: impl Into<String>, capacity: usize) -> Self {
        Self {
            character: character.into(),
            capacity,
            entries: Vec::new(),
            no_candidates: true,
        }
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.token.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LexiconConfig {
    /// Candidates with `P(w)` above this are dropped as overly common.
    pub max_global_prob: f64,
    /// Candidates with `P(w|t)` below this are dropped as noise.
    pub min_style_prob: f64,
    pub capacity: usize,
}

impl Default for LexiconConfig {
    fn default() -> Self {
        Self {
            max_global_prob: 0.10,
            min_style_prob: 0.0001,
            capacity: 25,
        }
    }
}

fn lexicon_order(a: &TfPmiEntry, b: &TfPmiEntry) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(b.count_in_style.cmp(&a.count_in_style))
        .then_with(|| a.token.cmp(&b.token))
}

pub fn build_lexicon(
    style: &Corpus,
    global: &UnigramDistribution,
    config: &LexiconConfig,
) -> Result<TfPmiLexicon> {
    for (name, value) in [
        ("max_global_prob", config.max_global_prob),
        ("min_style_prob", config.min_style_prob),
    ] {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidThreshold { name, value });
        }
    }
    let style_dist = UnigramDistribution::from_corpus(style);
    let mut entries = Vec::new();
    for (token, count) in style_dist.iter() {
        let (ps, pg) = probabilities(token, &style_dist, global)?;
        if pg > config.max_global_prob || ps < config.min_style_prob {
            continue;
        }
        let pmi = libm::log2(ps / pg);
        entries.push(TfPmiEntry {
            token: token.into(),
            count_in_style: count,
            pmi,
            score: tf_weight(count) * pmi,
        });
    }
    let no_candidates = entries.is_empty();
    entries.sort_by(lexicon_order);
    entries.truncate(config.capacity);
    Ok(TfPmiLexicon {
        character: style.character().into(),
        capacity: config.capacity,
        entries,
        no_candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Utterance;
    use alloc::format;
    use alloc::vec;
    use proptest::prelude::*;

    fn corpus(character: &str, lines: &[&[&str]]) -> Corpus {
        let us = lines
            .iter()
            .enumerate()
            .map(|(i, t)| Utterance::new(format!("{character}{i}"), character, t.iter().copied()))
            .collect();
        Corpus::new(character, us).unwrap()
    }

    fn dist(pairs: &[(&str, u64)]) -> UnigramDistribution {
        let mut d = UnigramDistribution::default();
        for (t, c) in pairs {
            d.add(t, *c);
        }
        d
    }

    #[test]
    fn pooled_distribution() {
        let a = corpus("A", &[&["x", "x", "y"]]);
        let b = corpus("B", &[&["y", "y", "z"]]);
        let g = global_distribution(&[a.clone(), b]).unwrap();
        assert_eq!(
            (g.count("x"), g.count("y"), g.count("z"), g.total()),
            (2, 3, 1, 6)
        );

        let solo = global_distribution(std::slice::from_ref(&a)).unwrap();
        assert_eq!(solo, UnigramDistribution::from_corpus(&a));

        let twice = global_distribution(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(twice.count("x"), 4);
        assert_eq!(twice.probability("x"), solo.probability("x"));

        assert_eq!(global_distribution(&[]), Err(Error::EmptyDistribution));
    }

    #[test]
    fn pmi_closed_forms() {
        // P(w|t) = 2/3, P(w) = 1/3
        let s = dist(&[("w", 2), ("o", 1)]);
        let g = dist(&[("w", 1), ("o", 2)]);
        assert_eq!(pmi("w", &s, &g).unwrap(), 1.0);
        assert_eq!(pmi("w", &s, &s).unwrap(), 0.0);
        // P(w|t) = 1/8, P(w) = 1/2
        let s = dist(&[("w", 1), ("o", 7)]);
        let g = dist(&[("w", 1), ("o", 1)]);
        assert_eq!(pmi("w", &s, &g).unwrap(), -2.0);
    }

    #[test]
    fn absent_tokens_error() {
        let s = dist(&[("w", 1)]);
        let g = dist(&[("o", 1)]);
        assert!(matches!(
            pmi("q", &s, &g),
            Err(Error::TokenAbsent { which: "style", .. })
        ));
        assert!(matches!(
            pmi("w", &s, &g),
            Err(Error::TokenAbsent {
                which: "global",
                ..
            })
        ));
    }

    #[test]
    fn tf_pmi_closed_forms() {
        let s = dist(&[("w", 2), ("o", 1)]);
        let g = dist(&[("w", 1), ("o", 2)]);
        let expected = 1.0 + core::f64::consts::LN_2;
        assert!((tf_pmi_score("w", &s, &g).unwrap() - expected).abs() < 1e-12);

        let s1 = dist(&[("w", 1), ("o", 7)]);
        let g1 = dist(&[("w", 1), ("o", 1)]);
        assert_eq!(
            tf_pmi_score("w", &s1, &g1).unwrap(),
            pmi("w", &s1, &g1).unwrap()
        );
        assert_eq!(tf_pmi_score("w", &s, &s).unwrap(), 0.0);
    }

    #[test]
    fn lexicon_without_thresholds_is_pure_top_k() {
        let a = corpus("A", &[&["x", "x", "y"]]);
        let b = corpus("B", &[&["y", "y", "z"]]);
        let g = global_distribution(&[a.clone(), b]).unwrap();
        let cfg = LexiconConfig {
            max_global_prob: 1.0,
            min_style_prob: 0.0,
            capacity: 25,
        };
        let lex = build_lexicon(&a, &g, &cfg).unwrap();
        assert_eq!(lex.tokens().collect::<Vec<_>>(), vec!["x", "y"]);
        assert!((lex.entries[0].score - (1.0 + core::f64::consts::LN_2)).abs() < 1e-12);
        assert!(!lex.no_candidates);
    }

    #[test]
    fn lexicon_all_too_common() {
        let a = corpus("A", &[&["x", "y"]]);
        let b = corpus("B", &[&["x", "y", "z", "z"]]);
        let g = global_distribution(&[a.clone(), b]).unwrap();
        let lex = build_lexicon(&a, &g, &LexiconConfig::default()).unwrap();
        assert!(lex.is_empty());
        assert!(lex.no_candidates);
    }

    #[test]
    fn lexicon_capacity_and_tie_break() {
        // Style-exclusive tokens share the same probability ratio only when
        // counts agree; ties are broken by count then token text.
        let a = corpus("A", &[&["b", "a", "c", "c"]]);
        let b = corpus("B", &[&["q"; 12]]);
        let g = global_distribution(&[a.clone(), b]).unwrap();
        let cfg = LexiconConfig {
            max_global_prob: 1.0,
            min_style_prob: 0.0,
            capacity: 2,
        };
        let lex = build_lexicon(&a, &g, &cfg).unwrap();
        assert_eq!(lex.tokens().collect::<Vec<_>>(), vec!["c", "a"]);
    }

    #[test]
    fn lexicon_rejects_bad_thresholds() {
        let a = corpus("A", &[&["x"]]);
        let g = global_distribution(std::slice::from_ref(&a)).unwrap();
        let cfg = LexiconConfig {
            max_global_prob: 1.5,
            ..Default::default()
        };
        assert!(matches!(
            build_lexicon(&a, &g, &cfg),
            Err(Error::InvalidThreshold { .. })
        ));
    }

    #[test]
    fn exclusive_words_are_separated_by_frequency() {
        // Both tokens occur only in style A, so plain PMI is identical for them.
        let a = corpus(
            "A",
            &[&["rare", "common", "common", "common", "n", "n", "n", "n"]],
        );
        let b = corpus("B", &[&["n"; 8]]);
        let g = global_distribution(&[a.clone(), b]).unwrap();
        let s = UnigramDistribution::from_corpus(&a);
        assert_eq!(pmi("rare", &s, &g).unwrap(), pmi("common", &s, &g).unwrap());
        assert!(tf_pmi_score("common", &s, &g).unwrap() > tf_pmi_score("rare", &s, &g).unwrap());
    }

    fn arb_lines() -> impl Strategy<Value = Vec<Vec<u8>>> {
        prop::collection::vec(prop::collection::vec(0u8..15, 1..10), 1..20)
    }

    fn to_corpus(character: &str, lines: &[Vec<u8>]) -> Corpus {
        let us = lines
            .iter()
            .enumerate()
            .map(|(i, l)| {
                Utterance::new(
                    format!("{character}{i}"),
                    character,
                    l.iter().map(|t| format!("t{t}")),
                )
            })
            .collect();
        Corpus::new(character, us).unwrap()
    }

    proptest! {
        #[test]
        fn pmi_invariant_under_count_doubling(a in arb_lines(), b in arb_lines()) {
            let ca = to_corpus("A", &a);
            let cb = to_corpus("B", &b);
            let g = global_distribution(&[ca.clone(), cb]).unwrap();
            let s = UnigramDistribution::from_corpus(&ca);
            let double = |d: &UnigramDistribution| {
                let mut o = UnigramDistribution::default();
                for (t, c) in d.iter() { o.add(t, 2 * c); }
                o
            };
            let (g2, s2) = (double(&g), double(&s));
            for (t, c) in s.iter() {
                prop_assert_eq!(pmi(t, &s, &g).unwrap(), pmi(t, &s2, &g2).unwrap());
                let ratio_old = tf_pmi_score(t, &s, &g).unwrap();
                let ratio_new = tf_pmi_score(t, &s2, &g2).unwrap();
                let p = pmi(t, &s, &g).unwrap();
                let expected = (1.0 + (2.0 * c as f64).ln()) * p;
                prop_assert!((ratio_new - expected).abs() <= 1e-12 * expected.abs().max(1.0));
                if p == 0.0 { prop_assert_eq!(ratio_old, 0.0); }
            }
        }

        #[test]
        fn lexicon_sorted_and_order_invariant(a in arb_lines(), b in arb_lines()) {
            let ca = to_corpus("A", &a);
            let cb = to_corpus("B", &b);
            let g = global_distribution(&[ca.clone(), cb]).unwrap();
            let cfg = LexiconConfig { max_global_prob: 1.0, min_style_prob: 0.0, capacity: 5 };
            let lex = build_lexicon(&ca, &g, &cfg).unwrap();
            prop_assert!(lex.len() <= 5);
            prop_assert!(lex.entries.windows(2).all(|w| w[0].score >= w[1].score));
            for e in &lex.entries {
                prop_assert_eq!(e.score, (1.0 + libm::log(e.count_in_style as f64)) * e.pmi);
            }
            let mut rev = a.clone();
            rev.reverse();
            let lex_rev = build_lexicon(&to_corpus("A", &rev), &g, &cfg).unwrap();
            prop_assert_eq!(lex, lex_rev);
        }
    }
}
