//! The structured style vector and N-shot stability.
//!
//! A style vector bundles a character's lexicon, syntactic distribution and
//! pragmatic profile. Two vectors are compared component by component: the
//! lexicon and the profile through the centroid of their members' embeddings,
//! the syntactic distributions directly. The composite is a weighted mean over
//! the components that could be compared.

use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EmbeddingTable};
use crate::lexical::{build_lexicon, LexiconConfig, TfPmiLexicon, UnigramDistribution};
use crate::math::{cosine, mean_vector};
use crate::refiner::{profile_from_decisions, LabelSet, StyleProfile};
use crate::syntactic::{map_to_style_vector, RuleMapping, SyntacticVector};
use crate::treebank::ProductionTable;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredStyleVector {
    pub character: String,
    pub lexicon: TfPmiLexicon,
    pub syntactic: SyntacticVector,
    pub pragmatic: StyleProfile,
    /// Every component is empty.
    pub empty_style: bool,
}

pub fn assemble(
    lexicon: TfPmiLexicon,
    syntactic: SyntacticVector,
    pragmatic: StyleProfile,
) -> Result<StructuredStyleVector> {
    if lexicon.character != pragmatic.character {
        return Err(Error::CharacterMismatch(
            lexicon.character,
            pragmatic.character,
        ));
    }
    let empty_style = lexicon.is_empty() && syntactic.empty && pragmatic.top.is_empty();
    Ok(StructuredStyleVector {
        character: lexicon.character.clone(),
        lexicon,
        syntactic,
        pragmatic,
        empty_style,
    })
}

/// Mean of the embeddings of `keys`. Every key must be present.
pub fn centroid_of<S: AsRef<str>>(keys: &[S], embeddings: &EmbeddingTable) -> Result<Vec<f64>> {
    let vectors = embeddings.lookup_all(keys)?;
    mean_vector(vectors.iter().copied(), embeddings.dimension()).ok_or(Error::EmptyCorpus)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeWeights {
    pub lexical: f64,
    pub pragmatic: f64,
    pub syntactic: f64,
}

impl Default for CompositeWeights {
    fn default() -> Self {
        Self {
            lexical: 1.0,
            pragmatic: 1.0,
            syntactic: 1.0,
        }
    }
}

/// Component similarities; `None` marks a component that could not be
/// compared (empty or zero-norm on either side).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityBreakdown {
    pub lexical: Option<f64>,
    pub pragmatic: Option<f64>,
    pub syntactic: Option<f64>,
    pub composite: f64,
}

impl SimilarityBreakdown {
    pub fn from_components(
        lexical: Option<f64>,
        pragmatic: Option<f64>,
        syntactic: Option<f64>,
        weights: &CompositeWeights,
    ) -> Result<Self> {
        let parts = [
            (lexical, weights.lexical),
            (pragmatic, weights.pragmatic),
            (syntactic, weights.syntactic),
        ];
        let (num, den) = parts
            .iter()
            .filter_map(|(s, w)| s.map(|s| (s * w, *w)))
            .fold((0.0, 0.0), |(n, d), (x, w)| (n + x, d + w));
        if den <= 0.0 {
            return Err(Error::NoComparableComponent);
        }
        Ok(Self {
            lexical,
            pragmatic,
            syntactic,
            composite: num / den,
        })
    }
}

fn optional_cosine(a: Option<Vec<f64>>, b: Option<Vec<f64>>) -> Result<Option<f64>> {
    match (a, b) {
        (Some(a), Some(b)) => match cosine(&a, &b) {
            Ok(c) => Ok(Some(c)),
            Err(Error::ZeroNorm) => Ok(None),
            Err(e) => Err(e),
        },
        _ => Ok(None),
    }
}

fn lexicon_centroid(
    lexicon: &TfPmiLexicon,
    embeddings: &EmbeddingTable,
) -> Result<Option<Vec<f64>>> {
    let keys: Vec<&str> = lexicon.tokens().collect();
    if keys.is_empty() {
        return Ok(None);
    }
    centroid_of(&keys, embeddings).map(Some)
}

fn profile_centroid(
    profile: &StyleProfile,
    embeddings: &EmbeddingTable,
) -> Result<Option<Vec<f64>>> {
    let keys: Vec<&str> = profile.top.iter().map(|(l, _)| l.as_str()).collect();
    if keys.is_empty() {
        return Ok(None);
    }
    centroid_of(&keys, embeddings).map(Some)
}

/// Compares `sample` with `reference`. Lexicon tokens are looked up in
/// `token_embeddings`, profile labels in `label_embeddings`.
pub fn composite_similarity(
    sample: &StructuredStyleVector,
    reference: &StructuredStyleVector,
    token_embeddings: &EmbeddingTable,
    label_embeddings: &EmbeddingTable,
    weights: &CompositeWeights,
) -> Result<SimilarityBreakdown> {
    let (sa, sb) = (&sample.syntactic.values, &reference.syntactic.values);
    if sa.len() != sb.len() {
        return Err(Error::DimensionMismatch {
            expected: sb.len(),
            found: sa.len(),
        });
    }
    let lexical = optional_cosine(
        lexicon_centroid(&sample.lexicon, token_embeddings)?,
        lexicon_centroid(&reference.lexicon, token_embeddings)?,
    )?;
    let pragmatic = optional_cosine(
        profile_centroid(&sample.pragmatic, label_embeddings)?,
        profile_centroid(&reference.pragmatic, label_embeddings)?,
    )?;
    let syntactic = optional_cosine(Some(sa.clone()), Some(sb.clone()))?;
    SimilarityBreakdown::from_components(lexical, pragmatic, syntactic, weights)
}

/// Something that can build a style vector from a subset of its utterances.
pub trait StyleExtractor {
    /// Number of utterances available for sampling.
    fn population(&self) -> usize;

    /// Style vector of the utterances at `indices` (ascending, distinct).
    fn extract(&self, indices: &[usize]) -> Result<StructuredStyleVector>;
}

/// Extractor over one character's corpus with per-utterance production
/// tables and pragmatic decisions computed up front.
#[derive(Debug, Clone)]
pub struct CorpusExtractor<'a> {
    pub corpus: &'a Corpus,
    pub global: &'a UnigramDistribution,
    pub lexicon_config: LexiconConfig,
    /// One production table per utterance, aligned with the corpus.
    pub productions: &'a [ProductionTable],
    pub mapping: &'a RuleMapping,
    /// Refiner decisions per utterance, aligned with the corpus.
    pub decisions: &'a [Vec<bool>],
    pub labels: &'a LabelSet,
    pub top_k: usize,
}

impl CorpusExtractor<'_> {
    fn check(&self) -> Result<()> {
        let n = self.corpus.len();
        if self.productions.len() != n {
            return Err(Error::LengthMismatch(n, self.productions.len()));
        }
        if self.decisions.len() != n {
            return Err(Error::LengthMismatch(n, self.decisions.len()));
        }
        Ok(())
    }
}

impl StyleExtractor for CorpusExtractor<'_> {
    fn population(&self) -> usize {
        self.corpus.len()
    }

    fn extract(&self, indices: &[usize]) -> Result<StructuredStyleVector> {
        self.check()?;
        let sample = self.corpus.select(indices);
        let lexicon = build_lexicon(&sample, self.global, &self.lexicon_config)?;
        let mut table = ProductionTable::new();
        for &i in indices {
            table.merge(&self.productions[i]);
        }
        let syntactic = map_to_style_vector(&table, self.mapping);
        let decisions: Vec<Vec<bool>> =
            indices.iter().map(|&i| self.decisions[i].clone()).collect();
        let pragmatic =
            profile_from_decisions(self.corpus.character(), self.labels, &decisions, self.top_k)?;
        assemble(lexicon, syntactic, pragmatic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilityConfig {
    pub seed: u64,
    pub trials: usize,
    pub delta: f64,
    pub weights: CompositeWeights,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 5,
            delta: 0.005,
            weights: CompositeWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityPoint {
    pub n: usize,
    pub breakdown: SimilarityBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCurve {
    pub points: Vec<StabilityPoint>,
    pub convergence_n: Option<usize>,
}

fn mean_present(values: &[Option<f64>]) -> Option<f64> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        None
    } else {
        Some(present.iter().sum::<f64>() / present.len() as f64)
    }
}

/// Similarity to `reference` of style vectors drawn from `N` sampled
/// utterances, averaged over seeded trials, for each `N` in `sizes`.
pub fn nshot_stability<E: StyleExtractor + ?Sized>(
    extractor: &E,
    sizes: &[usize],
    reference: &StructuredStyleVector,
    token_embeddings: &EmbeddingTable,
    label_embeddings: &EmbeddingTable,
    config: &StabilityConfig,
) -> Result<StabilityCurve> {
    if sizes.is_empty()
        || sizes[0] == 0
        || sizes.windows(2).any(|w| w[0] >= w[1])
        || config.trials == 0
    {
        return Err(Error::InvalidSizes);
    }
    let available = extractor.population();
    if let Some(&n) = sizes.iter().find(|&&n| n > available) {
        return Err(Error::SampleTooLarge {
            requested: n,
            available,
        });
    }
    let mut points = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let mut trials = Vec::with_capacity(config.trials);
        for t in 0..config.trials {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(((n as u64) << 32) | t as u64);
            let mut indices = rand::seq::index::sample(&mut rng, available, n).into_vec();
            indices.sort_unstable();
            let sample = extractor.extract(&indices)?;
            trials.push(composite_similarity(
                &sample,
                reference,
                token_embeddings,
                label_embeddings,
                &config.weights,
            )?);
        }
        let pick = |f: fn(&SimilarityBreakdown) -> Option<f64>| {
            mean_present(&trials.iter().map(f).collect::<Vec<_>>())
        };
        let composite = trials.iter().map(|b| b.composite).sum::<f64>() / trials.len() as f64;
        points.push(StabilityPoint {
            n,
            breakdown: SimilarityBreakdown {
                lexical: pick(|b| b.lexical),
                pragmatic: pick(|b| b.pragmatic),
                syntactic: pick(|b| b.syntactic),
                composite,
            },
        });
    }
    let last = points.last().map(|p| p.breakdown.composite).unwrap_or(0.0);
    let convergence_n = points
        .iter()
        .find(|p| libm::fabs(p.breakdown.composite - last) <= config.delta)
        .map(|p| p.n);
    Ok(StabilityCurve {
        points,
        convergence_n,
    })
}
