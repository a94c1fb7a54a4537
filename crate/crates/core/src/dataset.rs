//! Parallel (neutral, stylized) training pairs.
//!
//! Every record holds exactly one neutral sentence and one stylized target.
//! This module aligns the two sides, oversamples characters up to planned
//! counts, renders the instruction prompt and the reasoning target, and
//! checks a finished dataset for structural defects.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::style_vector::StructuredStyleVector;
use crate::{Error, Result};

/// Longest accepted reasoning trace, in Unicode scalar values.
pub const MAX_TRACE_CHARS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrainingPair {
    pub id: String,
    pub character: String,
    pub neutral: String,
    pub stylized: String,
    pub cot_trace: Option<String>,
    pub pragmatic_labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeutralRecord {
    pub id: String,
    pub character: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StylizedRecord {
    pub id: String,
    /// Id of the neutral sentence this record rewrites.
    pub neutral_id: String,
    pub character: String,
    pub text: String,
    pub cot_trace: Option<String>,
    pub pragmatic_labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairBuild {
    pub pairs: Vec<TrainingPair>,
    pub unaligned_neutrals: Vec<String>,
    /// Stylized records whose neutral id is unknown.
    pub unaligned_stylized: Vec<String>,
}

/// Joins stylized records to neutrals by id. A neutral claimed by two
/// stylized records, or a repeated id on either side, is an error.
pub fn build_pairs(neutrals: &[NeutralRecord], stylized: &[StylizedRecord]) -> Result<PairBuild> {
    let mut by_id: BTreeMap<&str, &NeutralRecord> = BTreeMap::new();
    for n in neutrals {
        if by_id.insert(&n.id, n).is_some() {
            return Err(Error::Alignment(format!(
                "neutral id {:?} appears more than once",
                n.id
            )));
        }
    }
    let mut seen_stylized = BTreeSet::new();
    let mut claimed: BTreeMap<&str, &str> = BTreeMap::new();
    let mut out = PairBuild::default();
    for s in stylized {
        if !seen_stylized.insert(s.id.as_str()) {
            return Err(Error::DuplicateId(s.id.clone()));
        }
        let Some(n) = by_id.get(s.neutral_id.as_str()) else {
            out.unaligned_stylized.push(s.id.clone());
            continue;
        };
        if let Some(prev) = claimed.insert(&n.id, &s.id) {
            return Err(Error::Alignment(format!(
                "neutral {:?} is aligned to both {prev:?} and {:?}",
                n.id, s.id
            )));
        }
        if n.character != s.character {
            return Err(Error::CharacterMismatch(
                n.character.clone(),
                s.character.clone(),
            ));
        }
        out.pairs.push(TrainingPair {
            id: s.id.clone(),
            character: s.character.clone(),
            neutral: n.text.clone(),
            stylized: s.text.clone(),
            cot_trace: s.cot_trace.clone(),
            pragmatic_labels: s.pragmatic_labels.clone(),
        });
    }
    out.unaligned_neutrals = neutrals
        .iter()
        .filter(|n| !claimed.contains_key(n.id.as_str()))
        .map(|n| n.id.clone())
        .collect();
    Ok(out)
}

/// Target pair count per character. Characters without an entry keep their
/// source count.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OversamplePlan {
    pub targets: BTreeMap<String, usize>,
}

impl OversamplePlan {
    pub fn new<I, S>(targets: I) -> Self
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        Self {
            targets: targets.into_iter().map(|(c, n)| (c.into(), n)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacterRate {
    pub source: usize,
    pub target: usize,
    /// `target / source`.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OversampleReport {
    pub pairs: Vec<TrainingPair>,
    pub per_character: BTreeMap<String, CharacterRate>,
    pub total_source: usize,
    pub total_target: usize,
    /// `100 (total_target / total_source − 1)`.
    pub increase_pct: f64,
}

/// Brings each character to its planned count by duplicating pairs.
///
/// Candidates are shuffled once per character with a seeded generator and
/// then taken round-robin. When `label_filter` is given, only pairs carrying
/// one of those pragmatic labels are duplicated. Copies get ids of the form
/// `{id}#dup{k}`. Originals keep their order; copies follow, grouped by
/// character.
pub fn oversample_pairs(
    pairs: &[TrainingPair],
    plan: &OversamplePlan,
    seed: u64,
    label_filter: Option<&BTreeSet<String>>,
) -> Result<OversampleReport> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in pairs.iter().enumerate() {
        groups.entry(&p.character).or_default().push(i);
    }
    for (character, &target) in &plan.targets {
        let source = groups.get(character.as_str()).map_or(0, Vec::len);
        if target < source {
            return Err(Error::TargetBelowSource {
                character: character.clone(),
                target,
                source_count: source,
            });
        }
        if target > 0 && source == 0 {
            return Err(Error::NoEligiblePairs(character.clone()));
        }
    }

    let mut out = pairs.to_vec();
    let mut per_character = BTreeMap::new();
    for (stream, (character, members)) in groups.iter().enumerate() {
        let source = members.len();
        let target = plan.targets.get(*character).copied().unwrap_or(source);
        let mut eligible: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&i| {
                label_filter.is_none_or(|f| pairs[i].pragmatic_labels.iter().any(|l| f.contains(l)))
            })
            .collect();
        let needed = target - source;
        if needed > 0 && eligible.is_empty() {
            return Err(Error::NoEligiblePairs(String::from(*character)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream as u64);
        eligible.shuffle(&mut rng);
        let mut copies: BTreeMap<usize, usize> = BTreeMap::new();
        for k in 0..needed {
            let src = eligible[k % eligible.len()];
            let n = copies.entry(src).or_insert(0);
            *n += 1;
            let mut dup = pairs[src].clone();
            dup.id = format!("{}#dup{}", dup.id, n);
            out.push(dup);
        }
        per_character.insert(
            String::from(*character),
            CharacterRate {
                source,
                target,
                rate: target as f64 / source as f64,
            },
        );
    }
    let total_source = pairs.len();
    let total_target = out.len();
    let increase_pct = if total_source == 0 {
        0.0
    } else {
        100.0 * (total_target as f64 / total_source as f64 - 1.0)
    };
    Ok(OversampleReport {
        pairs: out,
        per_character,
        total_source,
        total_target,
        increase_pct,
    })
}

/// Components to leave out of the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptMask {
    pub lexical: bool,
    pub syntactic: bool,
    pub pragmatic: bool,
}

impl PromptMask {
    pub const NONE: Self = Self {
        lexical: false,
        syntactic: false,
        pragmatic: false,
    };
    pub const ALL: Self = Self {
        lexical: true,
        syntactic: true,
        pragmatic: true,
    };
}

/// Field labels of the instruction prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptTemplate {
    pub character: String,
    pub pragmatic: String,
    pub lexical: String,
    pub syntactic: String,
    pub neutral: String,
    pub separator: String,
    /// Number of syntactic dimensions listed.
    pub syntactic_top: usize,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            character: "Target Character:".into(),
            pragmatic: "Pragmatic Styles:".into(),
            lexical: "Lexical Keywords:".into(),
            syntactic: "Syntactic Profile:".into(),
            neutral: "Neutral Content:".into(),
            separator: ", ".into(),
            syntactic_top: 5,
        }
    }
}

fn field(label: &str, value: &str) -> String {
    if value.is_empty() {
        String::from(label)
    } else {
        format!("{label} {value}")
    }
}

/// One line per field, in the order character, pragmatic, lexical,
/// syntactic, neutral. Masked fields are dropped.
pub fn render_instruction_prompt(
    style: &StructuredStyleVector,
    neutral: &str,
    mask: PromptMask,
    template: &PromptTemplate,
) -> String {
    let sep = template.separator.as_str();
    let mut lines = Vec::with_capacity(5);
    lines.push(field(&template.character, &style.character));
    if !mask.pragmatic {
        let labels: Vec<&str> = style
            .pragmatic
            .top
            .iter()
            .map(|(l, _)| l.as_str())
            .collect();
        lines.push(field(&template.pragmatic, &labels.join(sep)));
    }
    if !mask.lexical {
        let tokens: Vec<&str> = style.lexicon.tokens().collect();
        lines.push(field(&template.lexical, &tokens.join(sep)));
    }
    if !mask.syntactic {
        let dims: Vec<String> = style
            .syntactic
            .ranked()
            .into_iter()
            .take(template.syntactic_top)
            .map(|(d, v)| format!("{d} {v:.3}"))
            .collect();
        lines.push(field(&template.syntactic, &dims.join(sep)));
    }
    lines.push(field(&template.neutral, neutral));
    lines.join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CotTarget {
    pub text: String,
    pub empty_trace: bool,
}

/// `<think>{trace}</think>\n{stylized}`.
pub fn render_cot_target(trace: &str, stylized: &str) -> Result<CotTarget> {
    let n = trace.chars().count();
    if n > MAX_TRACE_CHARS {
        return Err(Error::TraceTooLong(n));
    }
    Ok(CotTarget {
        text: format!("<think>{trace}</think>\n{stylized}"),
        empty_trace: n == 0,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum ViolationKind {
    EmptyField(&'static str),
    DuplicateId,
    /// The same neutral text maps to a different stylized text elsewhere.
    OneToOneBreak,
    CotTooLong(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Violation {
    pub index: usize,
    pub id: String,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ValidationReport {
    pub pairs: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Structural checks. Exact duplicates made by oversampling are not 1:1
/// breaks; a second distinct stylization of one neutral sentence is.
pub fn validate_dataset(pairs: &[TrainingPair]) -> ValidationReport {
    let mut violations = Vec::new();
    let mut ids = BTreeSet::new();
    let mut first_stylized: BTreeMap<(&str, &str), &str> = BTreeMap::new();
    for (index, p) in pairs.iter().enumerate() {
        let mut flag = |kind| {
            violations.push(Violation {
                index,
                id: p.id.clone(),
                kind,
            })
        };
        for (name, value) in [
            ("id", &p.id),
            ("character", &p.character),
            ("neutral", &p.neutral),
            ("stylized", &p.stylized),
        ] {
            if value.trim().is_empty() {
                flag(ViolationKind::EmptyField(name));
            }
        }
        if !ids.insert(p.id.as_str()) {
            flag(ViolationKind::DuplicateId);
        }
        let first = first_stylized
            .entry((&p.character, &p.neutral))
            .or_insert(&p.stylized);
        if *first != p.stylized {
            flag(ViolationKind::OneToOneBreak);
        }
        if let Some(t) = &p.cot_trace {
            let n = t.chars().count();
            if n > MAX_TRACE_CHARS {
                flag(ViolationKind::CotTooLong(n));
            }
        }
    }
    ValidationReport {
        pairs: pairs.len(),
        violations,
    }
}
