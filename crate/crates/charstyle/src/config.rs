//! Pipeline configuration, read from TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use charstyle_core::dataset::{PromptMask, PromptTemplate};
use charstyle_core::evaluation::{HKind, DEFAULT_TAU};
use charstyle_core::lexical::LexiconConfig;
use charstyle_core::refiner::RefinerConfig;
use charstyle_core::style_vector::CompositeWeights;
use charstyle_core::syntactic::DEFAULT_PR_FLOOR;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::formats::read_text;

/// Prefix of environment variables that override entries of `[paths]`,
/// e.g. `CHARSTYLE_PATH_CORPUS`.
pub const PATH_ENV_PREFIX: &str = "CHARSTYLE_PATH_";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Characters to process, in order. Empty means every character in the
    /// corpus, sorted.
    pub characters: Vec<String>,
    pub paths: Paths,
    pub corpus: CorpusSection,
    pub lexicon: LexiconSection,
    pub syntax: SyntaxSection,
    pub refiner: RefinerSection,
    pub stability: StabilitySection,
    pub dataset: DatasetSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub out_dir: Option<PathBuf>,
    /// Tokenized utterances of every character.
    pub corpus: Option<PathBuf>,
    /// Bracketed trees, each prefixed by its utterance id.
    pub treebank: Option<PathBuf>,
    /// Baseline trees for rule ranking. Defaults to the other characters' trees.
    pub baseline_treebank: Option<PathBuf>,
    /// Utterance embeddings keyed by utterance id.
    pub embeddings: Option<PathBuf>,
    pub token_embeddings: Option<PathBuf>,
    /// Label embeddings for profile comparison. Defaults to the label
    /// centroids written by `refine`.
    pub label_embeddings: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    /// Characters counted as punctuation. Defaults to the built-in blocks.
    pub punctuation: Option<PathBuf>,
    /// Rule-to-dimension mapping. Defaults to the built-in dictionary.
    pub mapping: Option<PathBuf>,
    pub gold_labels: Option<PathBuf>,
    pub neutral: Option<PathBuf>,
    pub stylized: Option<PathBuf>,
    pub scores: Option<PathBuf>,
}

impl Paths {
    fn slots(&mut self) -> [(&'static str, &mut Option<PathBuf>); 14] {
        [
            ("out_dir", &mut self.out_dir),
            ("corpus", &mut self.corpus),
            ("treebank", &mut self.treebank),
            ("baseline_treebank", &mut self.baseline_treebank),
            ("embeddings", &mut self.embeddings),
            ("token_embeddings", &mut self.token_embeddings),
            ("label_embeddings", &mut self.label_embeddings),
            ("stopwords", &mut self.stopwords),
            ("punctuation", &mut self.punctuation),
            ("mapping", &mut self.mapping),
            ("gold_labels", &mut self.gold_labels),
            ("neutral", &mut self.neutral),
            ("stylized", &mut self.stylized),
            ("scores", &mut self.scores),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub drop_punctuation: bool,
    /// Filter stopwords and punctuation before balancing (otherwise after).
    pub filter_before_balance: bool,
    /// Per-character token ratios. Empty disables balancing.
    pub balance: BTreeMap<String, f64>,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            drop_punctuation: true,
            filter_before_balance: true,
            balance: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconSection {
    pub max_global_prob: f64,
    pub min_style_prob: f64,
    pub capacity: usize,
}

impl Default for LexiconSection {
    fn default() -> Self {
        let d = LexiconConfig::default();
        Self {
            max_global_prob: d.max_global_prob,
            min_style_prob: d.min_style_prob,
            capacity: d.capacity,
        }
    }
}

impl From<LexiconSection> for LexiconConfig {
    fn from(s: LexiconSection) -> Self {
        LexiconConfig {
            max_global_prob: s.max_global_prob,
            min_style_prob: s.min_style_prob,
            capacity: s.capacity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntaxSection {
    /// Rows in the rule ranking file.
    pub top_k: usize,
    pub pr_floor: f64,
    /// Count preterminal-to-word rules too.
    pub include_lexical: bool,
}

impl Default for SyntaxSection {
    fn default() -> Self {
        Self {
            top_k: 20,
            pr_floor: DEFAULT_PR_FLOOR,
            include_lexical: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default)]
pub struct RefinerSection {
    #[serde(flatten)]
    pub model: RefinerConfig,
    /// Training-split examples per label after oversampling (0 disables).
    pub oversample_min: usize,
    /// Labels kept in a character's pragmatic profile.
    pub top_k: usize,
    /// Cosine threshold of the centroid baseline.
    pub baseline_threshold: f64,
}

impl Default for RefinerSection {
    fn default() -> Self {
        Self {
            model: RefinerConfig::default(),
            oversample_min: 23,
            top_k: 5,
            baseline_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsSection {
    pub lexical: f64,
    pub pragmatic: f64,
    pub syntactic: f64,
}

impl Default for WeightsSection {
    fn default() -> Self {
        let w = CompositeWeights::default();
        Self {
            lexical: w.lexical,
            pragmatic: w.pragmatic,
            syntactic: w.syntactic,
        }
    }
}

impl From<WeightsSection> for CompositeWeights {
    fn from(w: WeightsSection) -> Self {
        CompositeWeights {
            lexical: w.lexical,
            pragmatic: w.pragmatic,
            syntactic: w.syntactic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySection {
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub delta: f64,
    pub weights: WeightsSection,
}

impl Default for StabilitySection {
    fn default() -> Self {
        Self {
            sizes: vec![1, 5, 10, 20, 30, 40, 50],
            trials: 5,
            delta: 0.005,
            weights: WeightsSection::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    /// Target pair count per character. Empty disables oversampling.
    pub targets: BTreeMap<String, usize>,
    /// Only pairs carrying one of these labels are duplicated. Empty means all.
    pub label_filter: Vec<String>,
    pub mask: PromptMask,
    pub template: PromptTemplate,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub tau: f64,
    pub taus: Vec<f64>,
    pub h_kind: HKind,
    /// Semantic floor of the high-fidelity regime.
    pub floor: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            taus: vec![0.70, 0.75, 0.80],
            h_kind: HKind::Harmonic,
            floor: 0.75,
        }
    }
}

impl PipelineConfig {
    /// Parses TOML and resolves relative paths against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for (_, slot) in cfg.paths.slots() {
            if let Some(p) = slot.as_mut().filter(|p| p.is_relative()) {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Reads `path`; a missing file is an I/O failure.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path, "config file")?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_toml(&text, base)
    }

    /// Applies `CHARSTYLE_PATH_<NAME>` overrides. Unknown names are errors so
    /// typos do not pass silently.
    pub fn apply_path_overrides<I, K, V>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: Into<PathBuf>,
    {
        for (key, value) in vars {
            let Some(name) = key.as_ref().strip_prefix(PATH_ENV_PREFIX) else {
                continue;
            };
            let name = name.to_ascii_lowercase();
            let mut slots = self.paths.slots();
            let slot = slots
                .iter_mut()
                .find(|(n, _)| *n == name)
                .ok_or_else(|| Error::Config(format!("unknown path override {}", key.as_ref())))?;
            *slot.1 = Some(value.into());
        }
        Ok(())
    }

    /// The configured path named `name`, or a config error.
    pub fn require(&self, name: &'static str, value: &Option<PathBuf>) -> Result<PathBuf> {
        value
            .clone()
            .ok_or_else(|| Error::Config(format!("paths.{name} is not set")))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.paths
            .out_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.eval.tau.is_finite())
            || self.eval.taus.is_empty()
            || self.eval.taus.iter().any(|t| !t.is_finite())
        {
            return bad("eval.tau and eval.taus must be finite and non-empty".into());
        }
        if self.lexicon.capacity == 0 {
            return bad("lexicon.capacity must be positive".into());
        }
        if let Some((c, r)) = self
            .corpus
            .balance
            .iter()
            .find(|(_, r)| !(r.is_finite() && **r > 0.0))
        {
            return bad(format!("corpus.balance.{c} = {r} must be positive"));
        }
        Ok(())
    }
}
