//! Multi-label pragmatic style classifier.
//!
//! A single hidden layer network reads the utterance embedding, the context
//! embedding and one cosine per label against that label's centroid, and
//! emits one sigmoid probability per label. Training minimizes a weighted
//! binary cross-entropy with Adam and early stopping; decisions use per-label
//! thresholds tuned for F1 on held-out data.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::EmbeddingTable;
use crate::math::{cosine, sigmoid, softplus};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LabelCategory {
    SocialStance,
    CognitiveTendency,
    EmotionalTone,
    CoreArchetype,
}

const SOCIAL: [&str; 13] = [
    "kind",
    "modest",
    "clingy",
    "playful",
    "cold",
    "proud",
    "sharp_tongued",
    "subservient",
    "submissive",
    "controlling",
    "strong",
    "defensive",
    "tsukkomi",
];
const COGNITIVE: [&str; 9] = [
    "rational",
    "curious",
    "imaginative",
    "cautious",
    "idealistic",
    "conservative",
    "radical",
    "obsessive",
    "hesitant",
];
const EMOTIONAL: [&str; 12] = [
    "energetic",
    "optimistic",
    "confident",
    "passionate",
    "melancholy",
    "serious",
    "emotional",
    "sensitive",
    "shy",
    "irritable",
    "anxious",
    "lazy",
];
const ARCHETYPE: [&str; 16] = [
    "tsundere",
    "yandere",
    "chuunibyou",
    "cute",
    "naive",
    "airhead",
    "elegant",
    "humorous",
    "loyal",
    "responsible",
    "willful",
    "antisocial",
    "talkative",
    "masochistic",
    "sadistic",
    "evil",
];

/// Number of labels in the standard taxonomy.
pub const STANDARD_LABEL_COUNT: usize = 50;

/// Ordered label names with their categories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    names: Vec<String>,
    categories: Vec<LabelCategory>,
}

impl LabelSet {
    /// The 50-label persona taxonomy in four categories.
    pub fn standard() -> Self {
        let mut names = Vec::with_capacity(STANDARD_LABEL_COUNT);
        let mut categories = Vec::with_capacity(STANDARD_LABEL_COUNT);
        for (cat, group) in [
            (LabelCategory::SocialStance, &SOCIAL[..]),
            (LabelCategory::CognitiveTendency, &COGNITIVE[..]),
            (LabelCategory::EmotionalTone, &EMOTIONAL[..]),
            (LabelCategory::CoreArchetype, &ARCHETYPE[..]),
        ] {
            for name in group {
                names.push(String::from(*name));
                categories.push(cat);
            }
        }
        Self { names, categories }
    }

    /// A custom label set. Names must be unique and non-empty.
    pub fn new(labels: Vec<(String, LabelCategory)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (name, _) in &labels {
            if name.is_empty() || !seen.insert(name.as_str()) {
                return Err(Error::UnknownLabel(name.clone()));
            }
        }
        let (names, categories) = labels.into_iter().unzip();
        Ok(Self { names, categories })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn category(&self, index: usize) -> LabelCategory {
        self.categories[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Multi-hot vector from label names.
    pub fn encode<S: AsRef<str>>(&self, active: &[S]) -> Result<Vec<bool>> {
        let mut v = vec![false; self.len()];
        for name in active {
            let i = self
                .index_of(name.as_ref())
                .ok_or_else(|| Error::UnknownLabel(String::from(name.as_ref())))?;
            v[i] = true;
        }
        Ok(v)
    }
}

impl Default for LabelSet {
    fn default() -> Self {
        Self::standard()
    }
}

/// Mean embedding of the exemplars carrying each label, keyed by label name.
/// Labels without any exemplar get no entry.
pub fn label_centroids<'a, I>(
    labels: &LabelSet,
    dimension: usize,
    exemplars: I,
) -> Result<EmbeddingTable>
where
    I: IntoIterator<Item = (&'a [f64], &'a [bool])>,
{
    let mut sums = vec![vec![0.0; dimension]; labels.len()];
    let mut counts = vec![0usize; labels.len()];
    for (embedding, gold) in exemplars {
        if embedding.len() != dimension {
            return Err(Error::DimensionMismatch {
                expected: dimension,
                found: embedding.len(),
            });
        }
        if gold.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                found: gold.len(),
            });
        }
        for (l, _) in gold.iter().enumerate().filter(|(_, g)| **g) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(embedding) {
                *s += x;
            }
        }
    }
    let mut table = EmbeddingTable::new(dimension);
    for (l, (mut sum, n)) in sums.into_iter().zip(counts).enumerate() {
        if n > 0 {
            sum.iter_mut().for_each(|s| *s /= n as f64);
            table.insert(labels.name(l), sum)?;
        }
    }
    Ok(table)
}

/// Cosine of `utterance` to every label centroid. A missing or zero-norm
/// centroid, or a zero-norm utterance, contributes 0.
pub fn prototype_features(
    utterance: &[f64],
    centroids: &EmbeddingTable,
    labels: &LabelSet,
) -> Result<Vec<f64>> {
    labels
        .names()
        .iter()
        .map(|name| match centroids.get(name) {
            None => Ok(0.0),
            Some(c) => match cosine(utterance, c) {
                Ok(v) => Ok(v),
                Err(Error::ZeroNorm) => Ok(0.0),
                Err(e) => Err(e),
            },
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinerExample {
    pub id: String,
    pub utterance_embedding: Vec<f64>,
    pub context_embedding: Vec<f64>,
    /// No context was available and a zero vector stands in.
    pub context_missing: bool,
    pub prototype_features: Vec<f64>,
    /// Multi-hot gold labels; empty when unlabeled.
    pub gold: Vec<bool>,
}

impl RefinerExample {
    pub fn new(
        id: impl Into<String>,
        utterance: Vec<f64>,
        context: Option<Vec<f64>>,
        centroids: &EmbeddingTable,
        labels: &LabelSet,
        gold: Vec<bool>,
    ) -> Result<Self> {
        if utterance.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let context_missing = context.is_none();
        let context_embedding = context.unwrap_or_else(|| vec![0.0; utterance.len()]);
        if context_embedding.len() != utterance.len() {
            return Err(Error::DimensionMismatch {
                expected: utterance.len(),
                found: context_embedding.len(),
            });
        }
        if context_embedding.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let prototype_features = prototype_features(&utterance, centroids, labels)?;
        Ok(Self {
            id: id.into(),
            utterance_embedding: utterance,
            context_embedding,
            context_missing,
            prototype_features,
            gold,
        })
    }

    pub fn embedding_dim(&self) -> usize {
        self.utterance_embedding.len()
    }

    fn write_input(&self, use_prototypes: bool, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.utterance_embedding);
        out.extend_from_slice(&self.context_embedding);
        if use_prototypes {
            out.extend_from_slice(&self.prototype_features);
        } else {
            out.extend(core::iter::repeat_n(0.0, self.prototype_features.len()));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefinerConfig {
    pub hidden_width: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    /// Zeroing the prototype cosines gives the end-to-end baseline.
    pub use_prototypes: bool,
    /// Inverse-frequency label weights; all ones when off.
    pub weighted_loss: bool,
}

impl Default for RefinerConfig {
    fn default() -> Self {
        Self {
            hidden_width: 256,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 200,
            patience: 10,
            validation_fraction: 0.15,
            seed: 0,
            use_prototypes: true,
            weighted_loss: true,
        }
    }
}

/// Network shape. Parameters are stored flat as `[w1 (H×I), b1 (H), w2 (L×H), b2 (L)]`,
/// row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub input: usize,
    pub hidden: usize,
    pub labels: usize,
}

impl Shape {
    pub fn param_count(&self) -> usize {
        self.hidden * self.input + self.hidden + self.labels * self.hidden + self.labels
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.input;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.labels * self.hidden;
        (b1, w2, b2)
    }
}

/// Scratch buffers for one forward pass.
struct Activations {
    pre: Vec<f64>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
}

impl Activations {
    fn new(shape: Shape) -> Self {
        Self {
            pre: vec![0.0; shape.hidden],
            hidden: vec![0.0; shape.hidden],
            logits: vec![0.0; shape.labels],
        }
    }
}

fn forward(shape: Shape, params: &[f64], x: &[f64], act: &mut Activations) {
    let (ob1, ow2, ob2) = shape.offsets();
    for h in 0..shape.hidden {
        let row = &params[h * shape.input..(h + 1) * shape.input];
        let z = params[ob1 + h] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        act.pre[h] = z;
        act.hidden[h] = if z > 0.0 { z } else { 0.0 };
    }
    for l in 0..shape.labels {
        let row = &params[ow2 + l * shape.hidden..ow2 + (l + 1) * shape.hidden];
        act.logits[l] =
            params[ob2 + l] + row.iter().zip(&act.hidden).map(|(w, v)| w * v).sum::<f64>();
    }
}

/// `w_l (softplus(z) − y z)` summed over labels, i.e. the weighted BCE of
/// `sigmoid(z)` against `y` without forming the probability.
fn example_loss(logits: &[f64], gold: &[bool], weights: &[f64]) -> f64 {
    logits
        .iter()
        .zip(gold)
        .zip(weights)
        .map(|((&z, &y), &w)| w * (softplus(z) - if y { z } else { 0.0 }))
        .sum()
}

/// Mean weighted BCE over all `N × L` entries, from logits.
pub fn weighted_bce(logits: &[Vec<f64>], gold: &[Vec<bool>], weights: &[f64]) -> Result<f64> {
    if logits.len() != gold.len() {
        return Err(Error::LengthMismatch(logits.len(), gold.len()));
    }
    if logits.is_empty() {
        return Err(Error::NoSamples);
    }
    let mut total = 0.0;
    for (z, y) in logits.iter().zip(gold) {
        if z.len() != weights.len() || y.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: weights.len(),
                found: z.len().min(y.len()),
            });
        }
        total += example_loss(z, y, weights);
    }
    Ok(total / (logits.len() * weights.len()) as f64)
}

/// Inverse label frequency (counts floored at 1), rescaled to mean 1.
pub fn label_weights<'a, I>(gold: I, labels: usize) -> Vec<f64>
where
    I: IntoIterator<Item = &'a [bool]>,
{
    let mut counts = vec![0usize; labels];
    for g in gold {
        for (c, &y) in counts.iter_mut().zip(g) {
            *c += y as usize;
        }
    }
    let raw: Vec<f64> = counts.iter().map(|&c| 1.0 / c.max(1) as f64).collect();
    let mean = raw.iter().sum::<f64>() / labels.max(1) as f64;
    raw.into_iter().map(|w| w / mean).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinerModel {
    pub shape: Shape,
    pub embedding_dim: usize,
    pub params: Vec<f64>,
    pub label_weights: Vec<f64>,
    pub use_prototypes: bool,
    /// False when the parameters never saw a gradient step.
    pub trained: bool,
}

impl RefinerModel {
    /// Glorot-uniform weights and zero biases.
    pub fn initialize(
        embedding_dim: usize,
        hidden: usize,
        labels: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let shape = Shape {
            input: 2 * embedding_dim + labels,
            hidden,
            labels,
        };
        let mut params = vec![0.0; shape.param_count()];
        let (ob1, ow2, ob2) = shape.offsets();
        let l1 = libm::sqrt(6.0 / (shape.input + hidden) as f64);
        for w in &mut params[..ob1] {
            *w = rng.random_range(-l1..l1);
        }
        let l2 = libm::sqrt(6.0 / (hidden + labels) as f64);
        for w in &mut params[ow2..ob2] {
            *w = rng.random_range(-l2..l2);
        }
        Self {
            shape,
            embedding_dim,
            params,
            label_weights: vec![1.0; labels],
            use_prototypes: true,
            trained: false,
        }
    }

    /// Rebuilds a model from stored parts, validating sizes and finiteness.
    pub fn from_parts(
        embedding_dim: usize,
        hidden: usize,
        params: Vec<f64>,
        label_weights: Vec<f64>,
        use_prototypes: bool,
        trained: bool,
    ) -> Result<Self> {
        let labels = label_weights.len();
        let shape = Shape {
            input: 2 * embedding_dim + labels,
            hidden,
            labels,
        };
        if params.len() != shape.param_count() {
            return Err(Error::DimensionMismatch {
                expected: shape.param_count(),
                found: params.len(),
            });
        }
        if params.iter().chain(&label_weights).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            shape,
            embedding_dim,
            params,
            label_weights,
            use_prototypes,
            trained,
        })
    }

    pub fn label_count(&self) -> usize {
        self.shape.labels
    }

    fn check(&self, example: &RefinerExample) -> Result<()> {
        let mismatch = |expected, found| Error::DimensionMismatch { expected, found };
        if example.utterance_embedding.len() != self.embedding_dim {
            return Err(mismatch(
                self.embedding_dim,
                example.utterance_embedding.len(),
            ));
        }
        if example.context_embedding.len() != self.embedding_dim {
            return Err(mismatch(
                self.embedding_dim,
                example.context_embedding.len(),
            ));
        }
        if example.prototype_features.len() != self.shape.labels {
            return Err(mismatch(
                self.shape.labels,
                example.prototype_features.len(),
            ));
        }
        Ok(())
    }

    pub fn logits(&self, example: &RefinerExample) -> Result<Vec<f64>> {
        self.check(example)?;
        let mut x = Vec::with_capacity(self.shape.input);
        example.write_input(self.use_prototypes, &mut x);
        let mut act = Activations::new(self.shape);
        forward(self.shape, &self.params, &x, &mut act);
        Ok(act.logits)
    }

    pub fn predict_proba(&self, example: &RefinerExample) -> Result<Vec<f64>> {
        Ok(self.logits(example)?.into_iter().map(sigmoid).collect())
    }

    /// Mean weighted BCE over `examples` and its gradient with respect to `params`.
    pub fn loss_and_gradient(&self, examples: &[&RefinerExample]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.accumulate(examples, &mut grad)?;
        Ok((loss, grad))
    }

    fn accumulate(&self, examples: &[&RefinerExample], grad: &mut [f64]) -> Result<f64> {
        let shape = self.shape;
        let (ob1, ow2, ob2) = shape.offsets();
        let scale = 1.0 / (examples.len() * shape.labels) as f64;
        let mut act = Activations::new(shape);
        let mut x = Vec::with_capacity(shape.input);
        let mut dz = vec![0.0; shape.labels];
        let mut dh = vec![0.0; shape.hidden];
        let mut loss = 0.0;
        grad.iter_mut().for_each(|g| *g = 0.0);
        for ex in examples {
            self.check(ex)?;
            ex.write_input(self.use_prototypes, &mut x);
            forward(shape, &self.params, &x, &mut act);
            loss += example_loss(&act.logits, &ex.gold, &self.label_weights);
            for (l, d) in dz.iter_mut().enumerate() {
                let y = if ex.gold[l] { 1.0 } else { 0.0 };
                *d = self.label_weights[l] * (sigmoid(act.logits[l]) - y) * scale;
            }
            dh.iter_mut().for_each(|d| *d = 0.0);
            for l in 0..shape.labels {
                let row = ow2 + l * shape.hidden;
                grad[ob2 + l] += dz[l];
                for h in 0..shape.hidden {
                    grad[row + h] += dz[l] * act.hidden[h];
                    dh[h] += dz[l] * self.params[row + h];
                }
            }
            for h in 0..shape.hidden {
                if act.pre[h] <= 0.0 {
                    continue;
                }
                grad[ob1 + h] += dh[h];
                let row = h * shape.input;
                for (g, v) in grad[row..row + shape.input].iter_mut().zip(&x) {
                    *g += dh[h] * v;
                }
            }
        }
        Ok(loss * scale)
    }

    fn mean_loss(&self, examples: &[&RefinerExample]) -> Result<f64> {
        let mut act = Activations::new(self.shape);
        let mut x = Vec::with_capacity(self.shape.input);
        let mut loss = 0.0;
        for ex in examples {
            ex.write_input(self.use_prototypes, &mut x);
            forward(self.shape, &self.params, &x, &mut act);
            loss += example_loss(&act.logits, &ex.gold, &self.label_weights);
        }
        Ok(loss / (examples.len() * self.shape.labels) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub train_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
    pub train_losses: Vec<f64>,
    pub validation_losses: Vec<f64>,
    /// Epoch (1-based) whose parameters were kept; 0 when untrained.
    pub best_epoch: usize,
    pub untrained: bool,
    pub missing_context: usize,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(Self::BETA1, self.t as f64);
        let c2 = 1.0 - libm::pow(Self::BETA2, self.t as f64);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -= self.lr * mhat / (libm::sqrt(vhat) + Self::EPS);
        }
    }
}

fn validate_examples(examples: &[RefinerExample]) -> Result<(usize, usize)> {
    let first = examples.first().ok_or(Error::NoSamples)?;
    let dim = first.embedding_dim();
    let labels = first.prototype_features.len();
    for (index, ex) in examples.iter().enumerate() {
        let found = [ex.utterance_embedding.len(), ex.context_embedding.len()];
        if let Some(&bad) = found.iter().find(|&&n| n != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad,
            });
        }
        if ex.prototype_features.len() != labels || ex.gold.len() != labels {
            return Err(Error::DimensionMismatch {
                expected: labels,
                found: if ex.gold.len() != labels {
                    ex.gold.len()
                } else {
                    ex.prototype_features.len()
                },
            });
        }
        if !ex.gold.iter().any(|&g| g) {
            return Err(Error::NoGoldLabel { index });
        }
        let all = ex
            .utterance_embedding
            .iter()
            .chain(&ex.context_embedding)
            .chain(&ex.prototype_features);
        if all.into_iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
    }
    Ok((dim, labels))
}

/// Splits `n` indices by a seeded shuffle; both sides keep ascending order.
pub fn split_indices(
    n: usize,
    validation_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::InvalidThreshold {
            name: "validation_fraction",
            value: validation_fraction,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = libm::round(n as f64 * validation_fraction) as usize;
    let (mut validation, mut train) = (order[..n_val].to_vec(), order[n_val..].to_vec());
    if train.len() < 2 || validation.len() < 2 {
        return Err(Error::SplitTooSmall {
            train: train.len(),
            validation: validation.len(),
        });
    }
    train.sort_unstable();
    validation.sort_unstable();
    Ok((train, validation))
}

/// Trains on a seeded split of `examples` and returns the parameters with the
/// lowest validation loss.
pub fn train_refiner(
    examples: &[RefinerExample],
    config: &RefinerConfig,
) -> Result<(RefinerModel, TrainingReport)> {
    validate_examples(examples)?;
    let (train_idx, val_idx) =
        split_indices(examples.len(), config.validation_fraction, config.seed)?;
    let train: Vec<RefinerExample> = train_idx.iter().map(|&i| examples[i].clone()).collect();
    let validation: Vec<RefinerExample> = val_idx.iter().map(|&i| examples[i].clone()).collect();
    let (model, mut report) = train_with_split(&train, &validation, config)?;
    report.train_indices = train_idx;
    report.validation_indices = val_idx;
    Ok((model, report))
}

/// Trains on `train` with early stopping on `validation`. The report's index
/// fields refer to positions in the two slices.
pub fn train_with_split(
    train: &[RefinerExample],
    validation: &[RefinerExample],
    config: &RefinerConfig,
) -> Result<(RefinerModel, TrainingReport)> {
    if train.len() < 2 || validation.len() < 2 {
        return Err(Error::SplitTooSmall {
            train: train.len(),
            validation: validation.len(),
        });
    }
    let (dim, labels) = validate_examples(train)?;
    let (vdim, vlabels) = validate_examples(validation)?;
    if (vdim, vlabels) != (dim, labels) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: vdim,
        });
    }
    let train: Vec<&RefinerExample> = train.iter().collect();
    let validation: Vec<&RefinerExample> = validation.iter().collect();

    // Initialization and batch order draw from separate streams.
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    init_rng.set_stream(1);
    let mut model = RefinerModel::initialize(dim, config.hidden_width, labels, &mut init_rng);
    model.use_prototypes = config.use_prototypes;
    if config.weighted_loss {
        model.label_weights = label_weights(train.iter().map(|e| e.gold.as_slice()), labels);
    }

    let mut report = TrainingReport {
        train_indices: (0..train.len()).collect(),
        validation_indices: (0..validation.len()).collect(),
        train_losses: Vec::new(),
        validation_losses: Vec::new(),
        best_epoch: 0,
        untrained: config.max_epochs == 0,
        missing_context: train
            .iter()
            .chain(&validation)
            .filter(|e| e.context_missing)
            .count(),
    };
    if config.max_epochs == 0 {
        return Ok((model, report));
    }

    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed);
    order_rng.set_stream(2);
    let mut adam = Adam::new(model.params.len(), config.learning_rate);
    let mut grad = vec![0.0; model.params.len()];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = (f64::INFINITY, model.params.clone());
    let mut wait = 0;
    let batch_size = config.batch_size.max(1);
    let mut batch: Vec<&RefinerExample> = Vec::with_capacity(batch_size);

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut order_rng);
        for chunk in order.chunks(batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i]));
            model.accumulate(&batch, &mut grad)?;
            adam.step(&mut model.params, &grad);
        }
        let train_loss = model.mean_loss(&train)?;
        let validation_loss = model.mean_loss(&validation)?;
        if !train_loss.is_finite() || !validation_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                train_loss,
                validation_loss,
            });
        }
        report.train_losses.push(train_loss);
        report.validation_losses.push(validation_loss);
        if validation_loss < best.0 {
            best = (validation_loss, model.params.clone());
            report.best_epoch = epoch;
            wait = 0;
        } else {
            wait += 1;
            if wait >= config.patience {
                break;
            }
        }
    }
    model.params = best.1;
    model.trained = true;
    Ok((model, report))
}

/// Per-label decision thresholds. Values outside `[0, 1]` are allowed so a
/// threshold can switch a label fully on (≤ 0) or off (> 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdVector(Vec<f64>);

impl ThresholdVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidThreshold {
                name: "label threshold",
                value: bad,
            });
        }
        Ok(Self(values))
    }

    pub fn uniform(value: f64, labels: usize) -> Result<Self> {
        Self::new(vec![value; labels])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `probability_i ≥ threshold_i` element-wise.
    pub fn decide(&self, probabilities: &[f64]) -> Result<Vec<bool>> {
        if probabilities.len() != self.0.len() {
            return Err(Error::DimensionMismatch {
                expected: self.0.len(),
                found: probabilities.len(),
            });
        }
        Ok(probabilities
            .iter()
            .zip(&self.0)
            .map(|(p, t)| p >= t)
            .collect())
    }
}

pub fn predict(
    model: &RefinerModel,
    example: &RefinerExample,
    thresholds: &ThresholdVector,
) -> Result<(Vec<f64>, Vec<bool>)> {
    let p = model.predict_proba(example)?;
    let d = thresholds.decide(&p)?;
    Ok((p, d))
}

/// `{0.01, 0.02, …, 0.99}`.
pub fn default_threshold_grid() -> Vec<f64> {
    (1..100).map(|k| k as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `2TP / (2TP + FP + FN)`, 0 when undefined.
    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn label_confusion<I: Iterator<Item = (bool, bool)>>(pairs: I) -> Confusion {
    let mut c = Confusion::default();
    for (pred, gold) in pairs {
        match (pred, gold) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    c
}

/// Per-label thresholds maximizing F1 on `(probabilities, gold)`; ties go to
/// the smallest candidate.
pub fn optimize_thresholds_from_probabilities(
    probabilities: &[Vec<f64>],
    gold: &[Vec<bool>],
    grid: &[f64],
) -> Result<ThresholdVector> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if probabilities.len() != gold.len() {
        return Err(Error::LengthMismatch(probabilities.len(), gold.len()));
    }
    let labels = probabilities.first().map_or(0, Vec::len);
    let mut out = Vec::with_capacity(labels);
    for l in 0..labels {
        let mut best = (f64::NEG_INFINITY, f64::INFINITY);
        for &t in grid {
            let f1 = label_confusion(
                probabilities
                    .iter()
                    .zip(gold)
                    .map(|(p, g)| (p[l] >= t, g[l])),
            )
            .f1();
            if f1 > best.0 || (f1 == best.0 && t < best.1) {
                best = (f1, t);
            }
        }
        out.push(best.1);
    }
    ThresholdVector::new(out)
}

pub fn optimize_thresholds(
    model: &RefinerModel,
    validation: &[RefinerExample],
    grid: &[f64],
) -> Result<ThresholdVector> {
    let probs = validation
        .iter()
        .map(|e| model.predict_proba(e))
        .collect::<Result<Vec<_>>>()?;
    let gold: Vec<Vec<bool>> = validation.iter().map(|e| e.gold.clone()).collect();
    if probs.is_empty() {
        return ThresholdVector::uniform(
            grid.first().copied().ok_or(Error::EmptyGrid)?,
            model.label_count(),
        );
    }
    optimize_thresholds_from_probabilities(&probs, &gold, grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScores {
    pub confusion: Confusion,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub per_label: Vec<LabelScores>,
    pub macro_f1: f64,
}

/// Per-label scores and their unweighted mean F1 over every label.
pub fn macro_f1(decisions: &[Vec<bool>], gold: &[Vec<bool>]) -> Result<ClassificationReport> {
    if decisions.len() != gold.len() {
        return Err(Error::LengthMismatch(decisions.len(), gold.len()));
    }
    let labels = gold.first().or(decisions.first()).map_or(0, Vec::len);
    for (d, g) in decisions.iter().zip(gold) {
        if d.len() != labels || g.len() != labels {
            return Err(Error::DimensionMismatch {
                expected: labels,
                found: if d.len() != labels { d.len() } else { g.len() },
            });
        }
    }
    let per_label: Vec<LabelScores> = (0..labels)
        .map(|l| {
            let c = label_confusion(decisions.iter().zip(gold).map(|(d, g)| (d[l], g[l])));
            LabelScores {
                confusion: c,
                precision: c.precision(),
                recall: c.recall(),
                f1: c.f1(),
                support: c.tp + c.fn_,
            }
        })
        .collect();
    let macro_f1 = if labels == 0 {
        0.0
    } else {
        per_label.iter().map(|s| s.f1).sum::<f64>() / labels as f64
    };
    Ok(ClassificationReport {
        per_label,
        macro_f1,
    })
}

/// Activates a label when the utterance's cosine to its centroid reaches `threshold`.
pub fn centroid_baseline(
    utterances: &[&[f64]],
    centroids: &EmbeddingTable,
    labels: &LabelSet,
    threshold: f64,
) -> Result<Vec<Vec<bool>>> {
    let cs = centroids.lookup_all(labels.names())?;
    utterances
        .iter()
        .map(|u| cs.iter().map(|c| Ok(cosine(u, c)? >= threshold)).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OversampleOutcome {
    pub examples: Vec<RefinerExample>,
    pub added: usize,
    /// Labels with no example to duplicate.
    pub unfixable: Vec<usize>,
}

/// Raises every label to at least `min_count` examples by appending copies of
/// that label's original examples in round-robin order. Labels are handled in
/// index order and copies count toward every label they carry.
pub fn oversample_rare_labels(examples: &[RefinerExample], min_count: usize) -> OversampleOutcome {
    let labels = examples.iter().map(|e| e.gold.len()).max().unwrap_or(0);
    let mut counts = vec![0usize; labels];
    for e in examples {
        for (c, &g) in counts.iter_mut().zip(&e.gold) {
            *c += g as usize;
        }
    }
    let mut out = examples.to_vec();
    let mut unfixable = Vec::new();
    for l in 0..labels {
        let carriers: Vec<usize> = (0..examples.len())
            .filter(|&i| examples[i].gold.get(l) == Some(&true))
            .collect();
        if carriers.is_empty() {
            unfixable.push(l);
            continue;
        }
        let mut k = 0;
        while counts[l] < min_count {
            let src = &examples[carriers[k % carriers.len()]];
            for (c, &g) in counts.iter_mut().zip(&src.gold) {
                *c += g as usize;
            }
            out.push(src.clone());
            k += 1;
        }
    }
    OversampleOutcome {
        added: out.len() - examples.len(),
        examples: out,
        unfixable,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleProfile {
    pub character: String,
    /// Activation rate for every label, in label order.
    pub rates: Vec<f64>,
    /// Highest nonzero rates, descending (ties in label order).
    pub top: Vec<(String, f64)>,
    /// No label fired on any utterance.
    pub empty: bool,
}

pub fn profile_from_decisions(
    character: &str,
    labels: &LabelSet,
    decisions: &[Vec<bool>],
    top_k: usize,
) -> Result<StyleProfile> {
    if decisions.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut rates = vec![0.0; labels.len()];
    for d in decisions {
        if d.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                found: d.len(),
            });
        }
        for (r, &on) in rates.iter_mut().zip(d) {
            *r += on as usize as f64;
        }
    }
    let n = decisions.len() as f64;
    rates.iter_mut().for_each(|r| *r /= n);
    let mut ranked: Vec<usize> = (0..labels.len()).filter(|&l| rates[l] > 0.0).collect();
    ranked.sort_by(|&a, &b| rates[b].total_cmp(&rates[a]).then(a.cmp(&b)));
    let top = ranked
        .into_iter()
        .take(top_k)
        .map(|l| (String::from(labels.name(l)), rates[l]))
        .collect::<Vec<_>>();
    Ok(StyleProfile {
        character: String::from(character),
        empty: top.is_empty() && rates.iter().all(|r| *r == 0.0),
        rates,
        top,
    })
}

pub fn corpus_profile(
    character: &str,
    model: &RefinerModel,
    labels: &LabelSet,
    examples: &[RefinerExample],
    thresholds: &ThresholdVector,
    top_k: usize,
) -> Result<StyleProfile> {
    let decisions = examples
        .iter()
        .map(|e| Ok(predict(model, e, thresholds)?.1))
        .collect::<Result<Vec<_>>>()?;
    profile_from_decisions(character, labels, &decisions, top_k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn labels(n: usize) -> LabelSet {
        LabelSet::new(
            (0..n)
                .map(|i| (alloc::format!("l{i}"), LabelCategory::CoreArchetype))
                .collect(),
        )
        .unwrap()
    }

    fn example(id: &str, u: Vec<f64>, gold: Vec<bool>) -> RefinerExample {
        let l = gold.len();
        RefinerExample {
            id: id.into(),
            context_embedding: vec![0.0; u.len()],
            utterance_embedding: u,
            context_missing: true,
            prototype_features: vec![0.0; l],
            gold,
        }
    }

    #[test]
    fn standard_taxonomy() {
        let s = LabelSet::standard();
        assert_eq!(s.len(), 50);
        let per_cat = |c| (0..50).filter(|&i| s.category(i) == c).count();
        assert_eq!(per_cat(LabelCategory::SocialStance), 13);
        assert_eq!(per_cat(LabelCategory::CognitiveTendency), 9);
        assert_eq!(per_cat(LabelCategory::EmotionalTone), 12);
        assert_eq!(per_cat(LabelCategory::CoreArchetype), 16);
        let unique: BTreeSet<&String> = s.names().iter().collect();
        assert_eq!(unique.len(), 50);
        assert_eq!(s.index_of("kind"), Some(0));
        assert_eq!(
            s.category(s.index_of("cold").unwrap()),
            LabelCategory::SocialStance
        );
        assert_eq!(
            s.category(s.index_of("antisocial").unwrap()),
            LabelCategory::CoreArchetype
        );
        assert!(s.encode(&["nope"]).is_err());
    }

    #[test]
    fn oversample_five_to_twenty_three() {
        let ex: Vec<_> = (0..5)
            .map(|i| example(&alloc::format!("e{i}"), vec![1.0], vec![true]))
            .collect();
        let out = oversample_rare_labels(&ex, 23);
        assert_eq!(out.examples.len(), 23);
        assert_eq!(out.added, 18);
        // Round-robin: copy k is original k mod 5.
        for (k, e) in out.examples[5..].iter().enumerate() {
            assert_eq!(e.id, alloc::format!("e{}", k % 5));
        }
    }

    #[test]
    fn oversample_noop_and_unfixable() {
        let ex: Vec<_> = (0..30)
            .map(|i| example(&alloc::format!("e{i}"), vec![1.0], vec![true, false]))
            .collect();
        let out = oversample_rare_labels(&ex, 23);
        assert_eq!(out.examples, ex);
        assert_eq!(out.unfixable, vec![1]);
    }

    #[test]
    fn thresholds_extremes_and_elementwise() {
        let p = [0.2, 0.5, 0.9];
        assert_eq!(
            ThresholdVector::uniform(0.0, 3)
                .unwrap()
                .decide(&p)
                .unwrap(),
            vec![true; 3]
        );
        assert_eq!(
            ThresholdVector::uniform(1.0 + 1e-9, 3)
                .unwrap()
                .decide(&p)
                .unwrap(),
            vec![false; 3]
        );
        let t = ThresholdVector::new(vec![0.3, 0.5, 0.95]).unwrap();
        assert_eq!(t.decide(&p).unwrap(), vec![false, true, false]);
        assert!(t.decide(&[0.1]).is_err());
        assert!(ThresholdVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn macro_f1_examples() {
        let gold = vec![vec![true, true], vec![false, true]];
        assert_eq!(macro_f1(&gold, &gold).unwrap().macro_f1, 1.0);
        // A: TP1 FP1 FN0. B: TP1 FP0 FN1.
        let pred = vec![vec![true, true], vec![true, false]];
        let r = macro_f1(&pred, &gold).unwrap();
        assert!((r.per_label[0].f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.per_label[1].f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.macro_f1 - 2.0 / 3.0).abs() < 1e-12);
        let none = macro_f1(&[vec![false]], &[vec![false]]).unwrap();
        assert_eq!(none.macro_f1, 0.0);
    }

    #[test]
    fn threshold_ties_go_low() {
        let probs = vec![vec![0.9], vec![0.1]];
        let gold = vec![vec![true], vec![false]];
        let t = optimize_thresholds_from_probabilities(&probs, &gold, &default_threshold_grid())
            .unwrap();
        assert_eq!(t.values(), &[0.11]);
        let all_pos = optimize_thresholds_from_probabilities(
            &[vec![0.7]],
            &[vec![true]],
            &default_threshold_grid(),
        )
        .unwrap();
        assert_eq!(all_pos.values(), &[0.01]);
        assert_eq!(
            optimize_thresholds_from_probabilities(&probs, &gold, &[]),
            Err(Error::EmptyGrid)
        );
    }

    #[test]
    fn threshold_three_example_brute_force() {
        let probs = vec![vec![0.3], vec![0.6], vec![0.45]];
        let gold = vec![vec![true], vec![false], vec![true]];
        let grid = default_threshold_grid();
        let mut best = (-1.0, 0.0);
        for &t in &grid {
            let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
            for (p, g) in probs.iter().zip(&gold) {
                match (p[0] >= t, g[0]) {
                    (true, true) => tp += 1.0,
                    (true, false) => fp += 1.0,
                    (false, true) => fn_ += 1.0,
                    _ => {}
                }
            }
            let f1 = if tp == 0.0 {
                0.0
            } else {
                2.0 * tp / (2.0 * tp + fp + fn_)
            };
            if f1 > best.0 {
                best = (f1, t);
            }
        }
        let t = optimize_thresholds_from_probabilities(&probs, &gold, &grid).unwrap();
        assert_eq!(t.values(), &[best.1]);
    }

    #[test]
    fn centroid_baseline_cases() {
        let ls = labels(2);
        let mut c = EmbeddingTable::new(2);
        c.insert("l0", vec![1.0, 0.0]).unwrap();
        c.insert("l1", vec![0.0, 1.0]).unwrap();
        let u: &[f64] = &[3.0, 0.0];
        assert_eq!(
            centroid_baseline(&[u], &c, &ls, 1.0).unwrap(),
            vec![vec![true, false]]
        );
        assert!(!centroid_baseline(&[u], &c, &ls, 0.5).unwrap()[0][1]);
        assert_eq!(
            centroid_baseline(&[&[0.0, 0.0][..]], &c, &ls, 0.5),
            Err(Error::ZeroNorm)
        );
        let mut partial = EmbeddingTable::new(2);
        partial.insert("l0", vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            centroid_baseline(&[u], &partial, &ls, 0.5),
            Err(Error::MissingKeys(_))
        ));
    }

    #[test]
    fn profile_cases() {
        let ls = labels(3);
        let d = vec![
            vec![false, true, false],
            vec![false; 3],
            vec![false; 3],
            vec![false; 3],
        ];
        let p = profile_from_decisions("c", &ls, &d, 5).unwrap();
        assert_eq!(p.rates, vec![0.0, 0.25, 0.0]);
        assert_eq!(p.top, vec![("l1".into(), 0.25)]);
        let e = profile_from_decisions("c", &ls, &vec![vec![false; 3]; 4], 5).unwrap();
        assert!(e.empty && e.top.is_empty());
        assert_eq!(
            profile_from_decisions("c", &ls, &[], 5),
            Err(Error::EmptyCorpus)
        );
    }

    #[test]
    fn label_weights_mean_one() {
        let g = [vec![true, true, false], vec![true, false, false]];
        let w = label_weights(g.iter().map(Vec::as_slice), 3);
        assert!((w.iter().sum::<f64>() / 3.0 - 1.0).abs() < 1e-12);
        // counts 2, 1, 0→1
        assert!((w[1] / w[0] - 2.0).abs() < 1e-12);
        assert_eq!(w[1], w[2]);
    }

    #[test]
    fn unit_weights_equal_plain_bce() {
        let logits = vec![vec![0.3, -1.2, 4.0], vec![-0.5, 2.2, 0.0]];
        let gold = vec![vec![true, false, true], vec![false, true, false]];
        let got = weighted_bce(&logits, &gold, &[1.0; 3]).unwrap();
        let mut plain = 0.0;
        for (z, y) in logits.iter().zip(&gold) {
            for (&z, &y) in z.iter().zip(y) {
                let p = 1.0 / (1.0 + (-z).exp());
                plain -= if y { p.ln() } else { (1.0 - p).ln() };
            }
        }
        assert!((got - plain / 6.0).abs() < 1e-12);
    }

    fn random_examples(n: usize, dim: usize, labels: usize, seed: u64) -> Vec<RefinerExample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let mut gold: Vec<bool> = (0..labels).map(|_| rng.random_bool(0.4)).collect();
                gold[i % labels] = true;
                RefinerExample {
                    id: alloc::format!("x{i}"),
                    utterance_embedding: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    context_embedding: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    context_missing: false,
                    prototype_features: (0..labels).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    gold,
                }
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut model = RefinerModel::initialize(3, 5, 4, &mut rng);
        model.label_weights = vec![0.5, 1.0, 1.5, 1.0];
        let ex = random_examples(6, 3, 4, 9);
        let refs: Vec<&RefinerExample> = ex.iter().collect();
        let (_, grad) = model.loss_and_gradient(&refs).unwrap();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for (i, &g) in grad.iter().enumerate() {
            let mut plus = model.clone();
            plus.params[i] += h;
            let mut minus = model.clone();
            minus.params[i] -= h;
            let numeric =
                (plus.mean_loss(&refs).unwrap() - minus.mean_loss(&refs).unwrap()) / (2.0 * h);
            let rel = (numeric - g).abs() / numeric.abs().max(g.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn untrained_when_zero_epochs() {
        let ex = random_examples(20, 3, 2, 1);
        let cfg = RefinerConfig {
            max_epochs: 0,
            hidden_width: 4,
            ..RefinerConfig::default()
        };
        let (m, r) = train_refiner(&ex, &cfg).unwrap();
        assert!(r.untrained && !m.trained);
        assert_eq!(r.best_epoch, 0);
    }

    #[test]
    fn training_rejects_bad_input() {
        let mut ex = random_examples(20, 3, 2, 1);
        ex[4].gold = vec![false, false];
        assert_eq!(
            train_refiner(&ex, &RefinerConfig::default()).unwrap_err(),
            Error::NoGoldLabel { index: 4 }
        );
        let small = random_examples(5, 3, 2, 1);
        assert!(matches!(
            train_refiner(&small, &RefinerConfig::default()),
            Err(Error::SplitTooSmall { .. })
        ));
    }

    fn separable(n: usize, seed: u64) -> Vec<RefinerExample> {
        // Two labels keyed to two orthogonal directions, each active on its own.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let l = i % 2;
                let mut u = vec![0.0; 4];
                u[l] = 1.0;
                for x in &mut u {
                    *x += rng.random_range(-0.1..0.1);
                }
                let gold = vec![l == 0, l == 1];
                example(&alloc::format!("s{i}"), u, gold)
            })
            .collect()
    }

    #[test]
    fn separable_two_label_set_is_learned() {
        let ex = separable(120, 3);
        let cfg = RefinerConfig {
            hidden_width: 8,
            learning_rate: 0.01,
            max_epochs: 200,
            ..RefinerConfig::default()
        };
        let (m, r) = train_refiner(&ex, &cfg).unwrap();
        let val: Vec<RefinerExample> = r
            .validation_indices
            .iter()
            .map(|&i| ex[i].clone())
            .collect();
        let t = ThresholdVector::uniform(0.5, 2).unwrap();
        let d: Vec<Vec<bool>> = val.iter().map(|e| predict(&m, e, &t).unwrap().1).collect();
        let g: Vec<Vec<bool>> = val.iter().map(|e| e.gold.clone()).collect();
        assert!(macro_f1(&d, &g).unwrap().macro_f1 >= 0.95);
    }

    #[test]
    fn seeded_training_is_bit_identical() {
        let ex = random_examples(40, 3, 3, 2);
        let cfg = RefinerConfig {
            hidden_width: 6,
            max_epochs: 5,
            ..RefinerConfig::default()
        };
        let a = train_refiner(&ex, &cfg).unwrap();
        let b = train_refiner(&ex, &cfg).unwrap();
        assert_eq!(a, b);
        let c = train_refiner(&ex, &RefinerConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.0.params, c.0.params);
    }

    #[test]
    fn prototypes_flag_zeroes_features() {
        let ls = labels(2);
        let mut c = EmbeddingTable::new(2);
        c.insert("l0", vec![1.0, 0.0]).unwrap();
        let e = RefinerExample::new("a", vec![1.0, 1.0], None, &c, &ls, vec![true, false]).unwrap();
        assert!(e.context_missing);
        assert!((e.prototype_features[0] - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(e.prototype_features[1], 0.0);
        let mut x = Vec::new();
        e.write_input(false, &mut x);
        assert_eq!(&x[4..], &[0.0, 0.0]);
    }

    #[test]
    fn centroids_average_exemplars() {
        let ls = labels(2);
        let a = [1.0, 0.0];
        let b = [0.0, 2.0];
        let g1 = [true, false];
        let g2 = [true, true];
        let c = label_centroids(&ls, 2, [(&a[..], &g1[..]), (&b[..], &g2[..])]).unwrap();
        assert_eq!(c.get("l0").unwrap(), &[0.5, 1.0]);
        assert_eq!(c.get("l1").unwrap(), &[0.0, 2.0]);
    }

    proptest! {
        #[test]
        fn tuned_thresholds_never_lose_to_half(
            rows in prop::collection::vec((prop::collection::vec(0.0f64..1.0, 3), prop::collection::vec(any::<bool>(), 3)), 1..40)
        ) {
            let (probs, gold): (Vec<Vec<f64>>, Vec<Vec<bool>>) = rows.into_iter().unzip();
            let t = optimize_thresholds_from_probabilities(&probs, &gold, &default_threshold_grid()).unwrap();
            let tuned = macro_f1(&probs.iter().map(|p| t.decide(p).unwrap()).collect::<Vec<_>>(), &gold).unwrap();
            let half = ThresholdVector::uniform(0.5, 3).unwrap();
            let fixed = macro_f1(&probs.iter().map(|p| half.decide(p).unwrap()).collect::<Vec<_>>(), &gold).unwrap();
            for (a, b) in tuned.per_label.iter().zip(&fixed.per_label) {
                prop_assert!(a.f1 >= b.f1);
            }
        }

        #[test]
        fn oversampling_only_grows(
            golds in prop::collection::vec(prop::collection::vec(any::<bool>(), 4), 1..30),
            min in 0usize..10,
        ) {
            let ex: Vec<_> = golds.into_iter().enumerate()
                .map(|(i, g)| example(&alloc::format!("e{i}"), vec![1.0], g)).collect();
            let out = oversample_rare_labels(&ex, min);
            prop_assert!(out.examples.len() >= ex.len());
            prop_assert_eq!(&out.examples[..ex.len()], &ex[..]);
            for l in 0..4 {
                let n = out.examples.iter().filter(|e| e.gold[l]).count();
                prop_assert!(n >= min || out.unfixable.contains(&l));
            }
        }
    }
}
