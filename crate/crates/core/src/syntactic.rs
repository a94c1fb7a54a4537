//! PCFG statistics and the interpretable syntactic style vector.
//!
//! Rule probabilities are normalized per left-hand side. Rules are ranked
//! against a baseline corpus by the two-term log-likelihood ratio
//!
//! ```text
//! LLR = 2 [ k1 ln(k1 / (n1 μ)) + k2 ln(k2 / (n2 μ)) ]
//! ```
//!
//! with `μ` the pooled rate `(k1 + k2) / (n1 + n2)` unless overridden, and
//! `0 ln 0 = 0`. Mapped rule counts are then folded into named dimensions and
//! normalized into a distribution.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::treebank::{Production, ProductionTable};
use crate::{Error, Result};

/// Floor applied to a baseline probability of zero when forming ratios.
pub const DEFAULT_PR_FLOOR: f64 = 1e-8;

/// The rule dictionary shipped with the crate.
pub const DEFAULT_MAPPING_TSV: &str = include_str!("../data/rule_dimensions.tsv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcfgModel {
    probabilities: BTreeMap<Production, f64>,
    lhs_totals: BTreeMap<String, u64>,
}

impl PcfgModel {
    pub fn probability(&self, rule: &Production) -> Option<f64> {
        self.probabilities.get(rule).copied()
    }

    pub fn lhs_total(&self, lhs: &str) -> u64 {
        self.lhs_totals.get(lhs).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Production, f64)> {
        self.probabilities.iter().map(|(p, &v)| (p, v))
    }

    pub fn lhs_totals(&self) -> impl Iterator<Item = (&str, u64)> {
        self.lhs_totals.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

/// `P(A → α) = Count(A → α) / Σ_β Count(A → β)`.
pub fn pcfg_probabilities(table: &ProductionTable) -> Result<PcfgModel> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut lhs_totals: BTreeMap<String, u64> = BTreeMap::new();
    for (p, c) in table.iter() {
        *lhs_totals.entry(p.lhs.clone()).or_insert(0) += c;
    }
    let probabilities = table
        .iter()
        .map(|(p, c)| (p.clone(), c as f64 / lhs_totals[&p.lhs] as f64))
        .collect();
    Ok(PcfgModel {
        probabilities,
        lhs_totals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityRatio {
    pub value: f64,
    /// The baseline probability was zero and replaced by the floor.
    pub floored: bool,
}

pub fn probability_ratio(
    style: &PcfgModel,
    base: &PcfgModel,
    rule: &Production,
    floor: f64,
) -> Result<ProbabilityRatio> {
    let ps = style
        .probability(rule)
        .ok_or_else(|| Error::RuleAbsent(rule.canonical()))?;
    Ok(match base.probability(rule) {
        Some(pb) if pb > 0.0 => ProbabilityRatio {
            value: ps / pb,
            floored: false,
        },
        _ => ProbabilityRatio {
            value: ps / floor,
            floored: true,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LlrInputs {
    pub k1: u64,
    pub n1: u64,
    pub k2: u64,
    pub n2: u64,
    pub mu: f64,
}

impl LlrInputs {
    /// Inputs with the pooled rate `μ = (k1 + k2) / (n1 + n2)`.
    pub fn pooled(k1: u64, n1: u64, k2: u64, n2: u64) -> Self {
        let denom = n1 + n2;
        let mu = if denom == 0 {
            0.0
        } else {
            (k1 + k2) as f64 / denom as f64
        };
        Self { k1, n1, k2, n2, mu }
    }
}

fn xlogx_ratio(k: u64, n: u64, mu: f64) -> f64 {
    if k == 0 {
        0.0
    } else {
        let k = k as f64;
        k * libm::log(k / (n as f64 * mu))
    }
}

pub fn log_likelihood_ratio(inputs: &LlrInputs) -> Result<f64> {
    let LlrInputs { k1, n1, k2, n2, mu } = *inputs;
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidLlr("n1 and n2 must be positive"));
    }
    if k1 > n1 || k2 > n2 {
        return Err(Error::InvalidLlr("counts exceed their totals"));
    }
    // μ = 1 is reachable when one rule is the whole table on both sides.
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::InvalidLlr("mu must lie in (0, 1]"));
    }
    Ok(2.0 * (xlogx_ratio(k1, n1, mu) + xlogx_ratio(k2, n2, mu)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRule {
    pub production: Production,
    pub frequency: u64,
    pub probability: f64,
    pub ratio: ProbabilityRatio,
    pub llr: f64,
}

/// Style rules ranked by LLR against `base`, then by frequency, then by rule text.
pub fn rank_rules(
    style: &ProductionTable,
    base: &ProductionTable,
    top_k: usize,
    floor: f64,
) -> Result<Vec<RankedRule>> {
    let style_model = pcfg_probabilities(style)?;
    let base_model = pcfg_probabilities(base)?;
    let mut ranked = Vec::with_capacity(style.len());
    for (rule, k1) in style.iter() {
        let k2 = base.count(rule);
        let llr = log_likelihood_ratio(&LlrInputs::pooled(k1, style.total(), k2, base.total()))?;
        ranked.push(RankedRule {
            production: rule.clone(),
            frequency: k1,
            probability: style_model.probability(rule).unwrap_or(0.0),
            ratio: probability_ratio(&style_model, &base_model, rule, floor)?,
            llr,
        });
    }
    ranked.sort_by(|a, b| {
        b.llr
            .total_cmp(&a.llr)
            .then(b.frequency.cmp(&a.frequency))
            .then_with(|| a.production.cmp(&b.production))
    });
    ranked.truncate(top_k);
    Ok(ranked)
}

/// Assignment of canonical rule strings to named dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleMapping {
    dimension_names: Vec<String>,
    rule_to_dims: BTreeMap<String, BTreeSet<usize>>,
}

impl RuleMapping {
    pub fn new() -> Self {
        Self {
            dimension_names: Vec::new(),
            rule_to_dims: BTreeMap::new(),
        }
    }

    /// Parses `rule<TAB>dimension` lines. Blank lines and `#` comments are
    /// skipped. Dimensions are numbered in order of first appearance.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut mapping = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Mapping {
                line: i + 1,
                message,
            };
            let (rule, dim) = line
                .split_once('\t')
                .ok_or_else(|| err(format!("expected rule<TAB>dimension, got {line:?}")))?;
            let dim = dim.trim();
            if dim.is_empty() || dim.contains('\t') {
                return Err(err(format!("bad dimension field {dim:?}")));
            }
            let production: Production = rule
                .parse()
                .map_err(|_| err(format!("bad rule {rule:?}")))?;
            mapping.insert(&production, dim);
        }
        Ok(mapping)
    }

    /// The shipped dictionary (14 distinct dimension names).
    pub fn default_dictionary() -> Self {
        Self::from_tsv(DEFAULT_MAPPING_TSV).expect("shipped mapping parses")
    }

    pub fn insert(&mut self, rule: &Production, dimension: &str) {
        let idx = match self.dimension_names.iter().position(|d| d == dimension) {
            Some(i) => i,
            None => {
                self.dimension_names.push(dimension.into());
                self.dimension_names.len() - 1
            }
        };
        self.rule_to_dims
            .entry(rule.canonical())
            .or_default()
            .insert(idx);
    }

    pub fn dimension_names(&self) -> &[String] {
        &self.dimension_names
    }

    pub fn dimension_count(&self) -> usize {
        self.dimension_names.len()
    }

    pub fn dimensions_of(&self, rule: &Production) -> Option<&BTreeSet<usize>> {
        self.rule_to_dims.get(&rule.canonical())
    }

    pub fn rules(&self) -> impl Iterator<Item = (&str, &BTreeSet<usize>)> {
        self.rule_to_dims.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// `(rule, dimension)` pairs in rule order, suitable for writing back out.
    pub fn pairs(&self) -> Vec<(&str, &str)> {
        self.rule_to_dims
            .iter()
            .flat_map(|(r, dims)| {
                dims.iter()
                    .map(move |&d| (r.as_str(), self.dimension_names[d].as_str()))
            })
            .collect()
    }
}

impl Default for RuleMapping {
    fn default() -> Self {
        Self::default_dictionary()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntacticVector {
    pub dimension_names: Vec<String>,
    pub values: Vec<f64>,
    /// No mapped rule was observed; every value is zero.
    pub empty: bool,
}

impl SyntacticVector {
    pub fn zeros(dimension_names: Vec<String>) -> Self {
        let values = alloc::vec![0.0; dimension_names.len()];
        Self {
            dimension_names,
            values,
            empty: true,
        }
    }

    pub fn get(&self, dimension: &str) -> Option<f64> {
        self.dimension_names
            .iter()
            .position(|d| d == dimension)
            .map(|i| self.values[i])
    }

    /// Dimensions by descending value (ties by name), zero entries omitted.
    pub fn ranked(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<(&str, f64)> = self
            .dimension_names
            .iter()
            .map(String::as_str)
            .zip(self.values.iter().copied())
            .filter(|(_, x)| *x > 0.0)
            .collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
        v
    }
}

/// Per-dimension mapped mass, un-normalized. A rule listed under several
/// dimensions adds its count to each.
pub fn dimension_counts(table: &ProductionTable, mapping: &RuleMapping) -> Vec<u64> {
    let mut counts = alloc::vec![0u64; mapping.dimension_count()];
    for (rule, c) in table.iter() {
        if let Some(dims) = mapping.dimensions_of(rule) {
            for &d in dims {
                counts[d] += c;
            }
        }
    }
    counts
}

/// `v_i = Σ_{r∈D_i} Count(r) / Σ_j Σ_{r∈D_j} Count(r)`; unmapped rules are ignored.
pub fn map_to_style_vector(table: &ProductionTable, mapping: &RuleMapping) -> SyntacticVector {
    let counts = dimension_counts(table, mapping);
    let denom: u64 = counts.iter().sum();
    if denom == 0 {
        return SyntacticVector::zeros(mapping.dimension_names().to_vec());
    }
    SyntacticVector {
        dimension_names: mapping.dimension_names().to_vec(),
        values: counts.iter().map(|&c| c as f64 / denom as f64).collect(),
        empty: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub total_rules: u64,
    pub mapped_rules: u64,
    pub coverage_pct: f64,
    pub empty: bool,
}

impl CoverageReport {
    pub fn from_counts(total_rules: u64, mapped_rules: u64) -> Self {
        if total_rules == 0 {
            return Self {
                total_rules,
                mapped_rules,
                coverage_pct: 0.0,
                empty: true,
            };
        }
        Self {
            total_rules,
            mapped_rules,
            coverage_pct: 100.0 * mapped_rules as f64 / total_rules as f64,
            empty: false,
        }
    }
}

/// Share of production occurrences (not types) that the mapping covers.
pub fn coverage(table: &ProductionTable, mapping: &RuleMapping) -> CoverageReport {
    let mapped = table
        .iter()
        .filter(|(r, _)| mapping.dimensions_of(r).is_some())
        .map(|(_, c)| c)
        .sum();
    CoverageReport::from_counts(table.total(), mapped)
}
