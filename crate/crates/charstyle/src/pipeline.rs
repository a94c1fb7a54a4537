//! The seven pipeline commands. Each reads its inputs from the configured
//! paths, writes artifacts under the output directory and returns the paths
//! it wrote.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use charstyle_core::corpus::{
    balance_corpora, filter_tokens, Corpus, EmbeddingTable, FilterReport, PunctuationSet,
    StopwordList, Utterance,
};
use charstyle_core::dataset::{
    build_pairs, oversample_pairs, render_cot_target, render_instruction_prompt, validate_dataset,
    OversamplePlan,
};
use charstyle_core::evaluation::{
    aggregate_report, h_score_with, high_fidelity_filter, pareto_frontier, tau_sensitivity,
    valid_style_score, ParetoPoint, ScoredSample,
};
use charstyle_core::lexical::{
    build_lexicon, global_distribution, LexiconConfig, TfPmiLexicon, UnigramDistribution,
};
use charstyle_core::refiner::{
    centroid_baseline, default_threshold_grid, label_centroids, macro_f1, optimize_thresholds,
    oversample_rare_labels, predict, profile_from_decisions, split_indices, train_with_split,
    ClassificationReport, LabelSet, RefinerExample, RefinerModel, ThresholdVector,
};
use charstyle_core::style_vector::{
    assemble, nshot_stability, CorpusExtractor, StabilityConfig, StructuredStyleVector,
    StyleExtractor,
};
use charstyle_core::syntactic::{
    coverage, map_to_style_vector, rank_rules, RuleMapping, SyntacticVector,
};
use charstyle_core::treebank::{ParseTree, ProductionTable};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::formats::*;

pub const MODEL_FILE: &str = "refiner.bin";
pub const THRESHOLDS_FILE: &str = "thresholds.tsv";
pub const PREDICTIONS_FILE: &str = "predictions.tsv";
pub const LABEL_CENTROIDS_FILE: &str = "label_centroids.tsv";

/// Character names made safe for use in file names.
pub fn file_stem(character: &str) -> String {
    character
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    fn new(cfg: &PipelineConfig) -> Self {
        Self {
            dir: cfg.out_dir(),
            written: Vec::new(),
        }
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        write_text(&path, contents)?;
        self.written.push(path);
        Ok(())
    }
}

fn all_utterances(cfg: &PipelineConfig) -> Result<Vec<Utterance>> {
    read_corpus_file(&cfg.require("corpus", &cfg.paths.corpus)?)
}

fn characters_of(cfg: &PipelineConfig, utterances: &[Utterance]) -> Vec<String> {
    if !cfg.characters.is_empty() {
        return cfg.characters.clone();
    }
    let set: BTreeSet<&str> = utterances.iter().map(|u| u.character.as_str()).collect();
    set.into_iter().map(String::from).collect()
}

/// Records of `character` as a corpus; none at all is an empty-corpus error.
pub fn corpus_for(utterances: &[Utterance], character: &str) -> Result<Corpus> {
    let mine: Vec<Utterance> = utterances
        .iter()
        .filter(|u| u.character == character)
        .cloned()
        .collect();
    if mine.is_empty() {
        return Err(charstyle_core::Error::EmptyCorpus.into());
    }
    Ok(Corpus::new(character, mine)?)
}

/// Filtered and balanced corpora of every configured character, with the
/// pooled distribution.
struct Prepared {
    characters: Vec<String>,
    corpora: Vec<Corpus>,
    filter_reports: Vec<FilterReport>,
    global: UnigramDistribution,
}

impl Prepared {
    fn index(&self, character: &str) -> Result<usize> {
        self.characters
            .iter()
            .position(|c| c == character)
            .ok_or_else(|| Error::Validation(format!("unknown character {character:?}")))
    }
}

fn prepare(cfg: &PipelineConfig, utterances: &[Utterance]) -> Result<Prepared> {
    let characters = characters_of(cfg, utterances);
    let stopwords = match &cfg.paths.stopwords {
        Some(p) => read_stopwords(p)?,
        None => StopwordList::new(),
    };
    let punctuation = match &cfg.paths.punctuation {
        Some(p) => PunctuationSet::exactly(
            read_text(p, "punctuation list")?
                .chars()
                .filter(|c| !c.is_whitespace()),
        ),
        None => PunctuationSet::default(),
    };
    let mut corpora = characters
        .iter()
        .map(|c| corpus_for(utterances, c))
        .collect::<Result<Vec<_>>>()?;
    let filter = |cs: Vec<Corpus>| -> (Vec<Corpus>, Vec<FilterReport>) {
        cs.iter()
            .map(|c| filter_tokens(c, &stopwords, &punctuation, cfg.corpus.drop_punctuation))
            .unzip()
    };
    let balance = |cs: Vec<Corpus>| -> Result<Vec<Corpus>> {
        if cfg.corpus.balance.is_empty() {
            return Ok(cs);
        }
        let ratios =
            characters
                .iter()
                .map(|c| {
                    cfg.corpus.balance.get(c).copied().ok_or_else(|| {
                        Error::Config(format!("corpus.balance has no ratio for {c:?}"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
        Ok(balance_corpora(&cs, &ratios, cfg.seed)?)
    };
    let filter_reports;
    if cfg.corpus.filter_before_balance {
        (corpora, filter_reports) = filter(corpora);
        corpora = balance(corpora)?;
    } else {
        corpora = balance(corpora)?;
        (corpora, filter_reports) = filter(corpora);
    }
    if let Some(c) = corpora.iter().find(|c| c.is_empty()) {
        return Err(Error::Validation(format!(
            "corpus of {:?} is empty after filtering",
            c.character()
        )));
    }
    let global = global_distribution(&corpora)?;
    Ok(Prepared {
        characters,
        corpora,
        filter_reports,
        global,
    })
}

fn selected(prepared: &Prepared, character: Option<&str>) -> Result<Vec<usize>> {
    match character {
        Some(c) => Ok(vec![prepared.index(c)?]),
        None => Ok((0..prepared.characters.len()).collect()),
    }
}

fn lexicon_config(cfg: &PipelineConfig) -> LexiconConfig {
    cfg.lexicon.into()
}

pub fn cmd_lexicon(
    cfg: &PipelineConfig,
    character: Option<&str>,
    top_k: Option<usize>,
) -> Result<Vec<PathBuf>> {
    let utterances = all_utterances(cfg)?;
    let prepared = prepare(cfg, &utterances)?;
    let mut lex_cfg = lexicon_config(cfg);
    if let Some(k) = top_k {
        lex_cfg.capacity = k;
    }
    let mut out = Output::new(cfg);
    let mut report = String::from("character\tutterances\ttokens\tremoved_tokens\tdropped_utterances\tentries\tno_candidates\n");
    for i in selected(&prepared, character)? {
        let corpus = &prepared.corpora[i];
        let lexicon = build_lexicon(corpus, &prepared.global, &lex_cfg)?;
        out.write(
            &format!("lexicon_{}.tsv", file_stem(corpus.character())),
            &format_lexicon(&lexicon),
        )?;
        let f = &prepared.filter_reports[i];
        let _ = writeln!(
            report,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            corpus.character(),
            corpus.len(),
            corpus.token_count(),
            f.removed_tokens,
            f.dropped_utterances.len(),
            lexicon.len(),
            lexicon.no_candidates
        );
    }
    out.write("lexicon_report.tsv", &report)?;
    Ok(out.written)
}

fn load_mapping(cfg: &PipelineConfig) -> Result<RuleMapping> {
    match &cfg.paths.mapping {
        Some(p) => RuleMapping::from_tsv(&read_text(p, "mapping file")?)
            .map_err(|e| Error::format(p, 0, e.to_string())),
        None => Ok(RuleMapping::default_dictionary()),
    }
}

/// Trees keyed by utterance id. Every tree must carry a known id.
fn trees_by_id(
    cfg: &PipelineConfig,
    utterances: &[Utterance],
) -> Result<BTreeMap<String, ParseTree>> {
    let path = cfg.require("treebank", &cfg.paths.treebank)?;
    let known: BTreeSet<&str> = utterances.iter().map(|u| u.id.as_str()).collect();
    let mut out = BTreeMap::new();
    for (i, (id, tree)) in read_treebank(&path)?.into_iter().enumerate() {
        let id = id.ok_or_else(|| Error::format(&path, i + 1, "tree has no utterance id"))?;
        if !known.contains(id.as_str()) {
            return Err(Error::format(
                &path,
                i + 1,
                format!("unknown utterance id {id:?}"),
            ));
        }
        if out.insert(id.clone(), tree).is_some() {
            return Err(Error::format(
                &path,
                i + 1,
                format!("duplicate tree for {id:?}"),
            ));
        }
    }
    Ok(out)
}

fn table_for<'a, I>(
    trees: &BTreeMap<String, ParseTree>,
    ids: I,
    include_lexical: bool,
) -> ProductionTable
where
    I: IntoIterator<Item = &'a str>,
{
    let chosen: Vec<ParseTree> = ids
        .into_iter()
        .filter_map(|id| trees.get(id).cloned())
        .collect();
    ProductionTable::from_trees(&chosen, include_lexical)
}

fn ids_of(corpus: &Corpus) -> impl Iterator<Item = &str> {
    corpus.utterances().iter().map(|u| u.id.as_str())
}

pub fn cmd_syntax(
    cfg: &PipelineConfig,
    character: Option<&str>,
    baseline: Option<&Path>,
) -> Result<Vec<PathBuf>> {
    let utterances = all_utterances(cfg)?;
    let characters = characters_of(cfg, &utterances);
    let trees = trees_by_id(cfg, &utterances)?;
    let mapping = load_mapping(cfg)?;
    let baseline_path = baseline
        .map(Path::to_path_buf)
        .or_else(|| cfg.paths.baseline_treebank.clone());
    let fixed_baseline = match &baseline_path {
        Some(p) => {
            let trees: Vec<ParseTree> = read_treebank(p)?.into_iter().map(|(_, t)| t).collect();
            Some(ProductionTable::from_trees(
                &trees,
                cfg.syntax.include_lexical,
            ))
        }
        None => None,
    };
    let chosen: Vec<&String> = match character {
        Some(c) => vec![characters
            .iter()
            .find(|x| *x == c)
            .ok_or_else(|| Error::Validation(format!("unknown character {c:?}")))?],
        None => characters.iter().collect(),
    };
    let mut out = Output::new(cfg);
    for c in chosen {
        let style = table_for(
            &trees,
            utterances
                .iter()
                .filter(|u| &u.character == c)
                .map(|u| u.id.as_str()),
            cfg.syntax.include_lexical,
        );
        let base = match &fixed_baseline {
            Some(b) => b.clone(),
            None => table_for(
                &trees,
                utterances
                    .iter()
                    .filter(|u| &u.character != c)
                    .map(|u| u.id.as_str()),
                cfg.syntax.include_lexical,
            ),
        };
        let rules = rank_rules(&style, &base, cfg.syntax.top_k, cfg.syntax.pr_floor)?;
        let stem = file_stem(c);
        out.write(&format!("rules_{stem}.tsv"), &format_rules(&rules))?;
        out.write(
            &format!("syntactic_{stem}.tsv"),
            &format_syntactic_vector(&map_to_style_vector(&style, &mapping)),
        )?;
        out.write(
            &format!("coverage_{stem}.tsv"),
            &format_coverage(c, &coverage(&style, &mapping)),
        )?;
    }
    Ok(out.written)
}

fn example_for(
    u: &Utterance,
    embeddings: &EmbeddingTable,
    centroids: &EmbeddingTable,
    labels: &LabelSet,
    gold: Vec<bool>,
) -> Result<RefinerExample> {
    let utt = embeddings
        .get(&u.id)
        .ok_or_else(|| charstyle_core::Error::MissingKeys(vec![u.id.clone()]))?
        .to_vec();
    let ctx = u
        .context_id
        .as_deref()
        .and_then(|c| embeddings.get(c))
        .map(<[f64]>::to_vec);
    Ok(RefinerExample::new(
        u.id.clone(),
        utt,
        ctx,
        centroids,
        labels,
        gold,
    )?)
}

#[derive(Serialize)]
struct RefineSummary {
    examples: usize,
    train: usize,
    validation: usize,
    oversampled: usize,
    unfixable_labels: Vec<String>,
    best_epoch: usize,
    missing_context: usize,
    macro_f1_tuned: f64,
    /// Macro F1 over labels present in the validation split only.
    macro_f1_tuned_supported: f64,
    macro_f1_fixed_half: f64,
    macro_f1_centroid_baseline: Option<f64>,
}

pub fn cmd_refine(cfg: &PipelineConfig, no_train: bool) -> Result<Vec<PathBuf>> {
    let labels = LabelSet::standard();
    let utterances = all_utterances(cfg)?;
    let embeddings = read_embeddings(
        &cfg.require("embeddings", &cfg.paths.embeddings)?,
        "embedding table",
    )?;
    let gold_path = cfg.require("gold_labels", &cfg.paths.gold_labels)?;
    let gold = read_gold_labels(&gold_path)?;

    let labelled: Vec<(&Utterance, Vec<bool>)> = utterances
        .iter()
        .filter_map(|u| gold.get(&u.id).map(|g| (u, g)))
        .map(|(u, g)| Ok((u, labels.encode(g)?)))
        .collect::<Result<_>>()?;
    let mut rcfg = cfg.refiner.model;
    rcfg.seed = cfg.seed;
    if no_train {
        rcfg.max_epochs = 0;
    }
    let (train_idx, val_idx) = split_indices(labelled.len(), rcfg.validation_fraction, rcfg.seed)?;

    let dim = embeddings.dimension();
    let mut exemplars = Vec::with_capacity(train_idx.len());
    for &i in &train_idx {
        let (u, g) = &labelled[i];
        let e = embeddings
            .get(&u.id)
            .ok_or_else(|| charstyle_core::Error::MissingKeys(vec![u.id.clone()]))?;
        exemplars.push((e, g.as_slice()));
    }
    let centroids = label_centroids(&labels, dim, exemplars)?;
    let build = |idx: &[usize]| -> Result<Vec<RefinerExample>> {
        idx.iter()
            .map(|&i| {
                example_for(
                    labelled[i].0,
                    &embeddings,
                    &centroids,
                    &labels,
                    labelled[i].1.clone(),
                )
            })
            .collect()
    };
    let train = build(&train_idx)?;
    let validation = build(&val_idx)?;
    let oversampled = oversample_rare_labels(&train, cfg.refiner.oversample_min);
    let (model, report) = train_with_split(&oversampled.examples, &validation, &rcfg)?;
    if !model.trained {
        return Err(Error::Validation(
            "untrained model requested for prediction".into(),
        ));
    }

    let thresholds = optimize_thresholds(&model, &validation, &default_threshold_grid())?;
    let gold_val: Vec<Vec<bool>> = validation.iter().map(|e| e.gold.clone()).collect();
    let decide = |t: &ThresholdVector| -> Result<Vec<Vec<bool>>> {
        validation
            .iter()
            .map(|e| Ok(predict(&model, e, t)?.1))
            .collect()
    };
    let tuned = macro_f1(&decide(&thresholds)?, &gold_val)?;
    let fixed = macro_f1(
        &decide(&ThresholdVector::uniform(0.5, labels.len())?)?,
        &gold_val,
    )?;
    let val_embeddings: Vec<&[f64]> = validation
        .iter()
        .map(|e| e.utterance_embedding.as_slice())
        .collect();
    let baseline = match centroid_baseline(
        &val_embeddings,
        &centroids,
        &labels,
        cfg.refiner.baseline_threshold,
    ) {
        Ok(d) => Some(macro_f1(&d, &gold_val)?.macro_f1),
        Err(charstyle_core::Error::MissingKeys(_)) => None,
        Err(e) => return Err(e.into()),
    };

    let mut rows = Vec::with_capacity(utterances.len());
    for u in &utterances {
        let ex = example_for(
            u,
            &embeddings,
            &centroids,
            &labels,
            vec![false; labels.len()],
        )?;
        let (_, d) = predict(&model, &ex, &thresholds)?;
        let active = d
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(l, _)| labels.name(l).to_string())
            .collect();
        rows.push((u.id.clone(), u.character.clone(), active));
    }

    let mut out = Output::new(cfg);
    write_model(&mut out, &model)?;
    out.write(THRESHOLDS_FILE, &format_thresholds(&labels, &thresholds))?;
    out.write(
        "classification_report.tsv",
        &format_classification_report(&labels, &tuned, &thresholds),
    )?;
    out.write(LABEL_CENTROIDS_FILE, &format_embeddings(&centroids))?;
    out.write(PREDICTIONS_FILE, &format_predictions(&rows))?;
    let mut log = String::from("epoch,train_loss,validation_loss\n");
    for (e, (t, v)) in report
        .train_losses
        .iter()
        .zip(&report.validation_losses)
        .enumerate()
    {
        let _ = writeln!(log, "{},{t:.6},{v:.6}", e + 1);
    }
    out.write("training_log.csv", &log)?;
    let summary = RefineSummary {
        examples: labelled.len(),
        train: train.len(),
        validation: validation.len(),
        oversampled: oversampled.added,
        unfixable_labels: oversampled
            .unfixable
            .iter()
            .map(|&l| labels.name(l).to_string())
            .collect(),
        best_epoch: report.best_epoch,
        missing_context: report.missing_context,
        macro_f1_tuned: tuned.macro_f1,
        macro_f1_tuned_supported: supported_macro_f1(&tuned),
        macro_f1_fixed_half: fixed.macro_f1,
        macro_f1_centroid_baseline: baseline,
    };
    out.write(
        "refine_summary.json",
        &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"),
    )?;
    Ok(out.written)
}

fn supported_macro_f1(report: &ClassificationReport) -> f64 {
    let f1s: Vec<f64> = report
        .per_label
        .iter()
        .filter(|s| s.support > 0)
        .map(|s| s.f1)
        .collect();
    if f1s.is_empty() {
        0.0
    } else {
        f1s.iter().sum::<f64>() / f1s.len() as f64
    }
}

fn write_model(out: &mut Output, model: &RefinerModel) -> Result<()> {
    let path = out.dir.join(MODEL_FILE);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(&path, encode_model(model)).map_err(|e| Error::io(&path, e))?;
    out.written.push(path);
    Ok(())
}

fn format_embeddings(table: &EmbeddingTable) -> String {
    let mut s = String::new();
    for (k, v) in table.iter() {
        s.push_str(k);
        s.push('\t');
        let vals: Vec<String> = v.iter().map(f64::to_string).collect();
        s.push_str(&vals.join(" "));
        s.push('\n');
    }
    s
}

/// Refiner decisions per utterance id, read from the refine output.
fn load_decisions(cfg: &PipelineConfig, labels: &LabelSet) -> Result<BTreeMap<String, Vec<bool>>> {
    let path = cfg.out_dir().join(PREDICTIONS_FILE);
    let text = read_text(&path, "refiner predictions (run `refine` first)")?;
    parse_predictions(&text, &path)?
        .into_iter()
        .map(|(id, _, active)| Ok((id, labels.encode(&active)?)))
        .collect()
}

/// Everything needed to extract a character's style from a sub-sample.
struct StyleInputs {
    prepared: Prepared,
    lexicon: LexiconConfig,
    mapping: RuleMapping,
    labels: LabelSet,
    /// Per character: production tables and decisions aligned with its corpus.
    productions: Vec<Vec<ProductionTable>>,
    decisions: Vec<Vec<Vec<bool>>>,
}

impl StyleInputs {
    fn load(cfg: &PipelineConfig) -> Result<Self> {
        let utterances = all_utterances(cfg)?;
        let prepared = prepare(cfg, &utterances)?;
        let trees = trees_by_id(cfg, &utterances)?;
        let labels = LabelSet::standard();
        let by_id = load_decisions(cfg, &labels)?;
        let mut productions = Vec::new();
        let mut decisions = Vec::new();
        for corpus in &prepared.corpora {
            productions.push(
                ids_of(corpus)
                    .map(|id| table_for(&trees, [id], cfg.syntax.include_lexical))
                    .collect(),
            );
            decisions.push(
                ids_of(corpus)
                    .map(|id| {
                        by_id.get(id).cloned().ok_or_else(|| {
                            Error::Validation(format!("no refiner prediction for utterance {id:?}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        Ok(Self {
            prepared,
            lexicon: lexicon_config(cfg),
            mapping: load_mapping(cfg)?,
            labels,
            productions,
            decisions,
        })
    }

    fn extractor(&self, i: usize, top_k: usize) -> CorpusExtractor<'_> {
        CorpusExtractor {
            corpus: &self.prepared.corpora[i],
            global: &self.prepared.global,
            lexicon_config: self.lexicon,
            productions: &self.productions[i],
            mapping: &self.mapping,
            decisions: &self.decisions[i],
            labels: &self.labels,
            top_k,
        }
    }

    fn full_style(&self, i: usize, top_k: usize) -> Result<StructuredStyleVector> {
        let corpus = &self.prepared.corpora[i];
        let lexicon: TfPmiLexicon = build_lexicon(corpus, &self.prepared.global, &self.lexicon)?;
        let mut table = ProductionTable::new();
        self.productions[i].iter().for_each(|t| table.merge(t));
        let syntactic: SyntacticVector = map_to_style_vector(&table, &self.mapping);
        let pragmatic =
            profile_from_decisions(corpus.character(), &self.labels, &self.decisions[i], top_k)?;
        Ok(assemble(lexicon, syntactic, pragmatic)?)
    }
}

pub fn cmd_assemble(cfg: &PipelineConfig, character: Option<&str>) -> Result<Vec<PathBuf>> {
    let inputs = StyleInputs::load(cfg)?;
    let mut out = Output::new(cfg);
    for i in selected(&inputs.prepared, character)? {
        let style = inputs.full_style(i, cfg.refiner.top_k)?;
        out.write(
            &format!("style_{}.json", file_stem(&style.character)),
            &style_to_json(&style),
        )?;
    }
    Ok(out.written)
}

pub fn cmd_stability(
    cfg: &PipelineConfig,
    character: Option<&str>,
    sizes: Option<&[usize]>,
) -> Result<Vec<PathBuf>> {
    let inputs = StyleInputs::load(cfg)?;
    let tokens = read_embeddings(
        &cfg.require("token_embeddings", &cfg.paths.token_embeddings)?,
        "token embeddings",
    )?;
    let label_path = cfg
        .paths
        .label_embeddings
        .clone()
        .unwrap_or_else(|| cfg.out_dir().join(LABEL_CENTROIDS_FILE));
    let label_emb = read_embeddings(&label_path, "label embeddings")?;
    let sizes = sizes.unwrap_or(&cfg.stability.sizes);
    let scfg = StabilityConfig {
        seed: cfg.seed,
        trials: cfg.stability.trials,
        delta: cfg.stability.delta,
        weights: cfg.stability.weights.into(),
    };
    let mut out = Output::new(cfg);
    let mut summary = String::from("character\tutterances\tconvergence_n\n");
    for i in selected(&inputs.prepared, character)? {
        let extractor = inputs.extractor(i, cfg.refiner.top_k);
        let all: Vec<usize> = (0..extractor.population()).collect();
        let reference = extractor.extract(&all)?;
        let curve = nshot_stability(&extractor, sizes, &reference, &tokens, &label_emb, &scfg)?;
        let c = inputs.prepared.corpora[i].character();
        out.write(
            &format!("stability_{}.csv", file_stem(c)),
            &format_stability(&curve),
        )?;
        let conv = curve
            .convergence_n
            .map(|n| n.to_string())
            .unwrap_or_else(|| "none".into());
        let _ = writeln!(summary, "{c}\t{}\t{conv}", all.len());
    }
    out.write("stability_summary.tsv", &summary)?;
    Ok(out.written)
}

#[derive(Serialize)]
struct InstructionRecord<'a> {
    id: &'a str,
    character: &'a str,
    instruction: String,
    target: String,
}

pub fn cmd_dataset(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let neutral = read_neutral(&cfg.require("neutral", &cfg.paths.neutral)?)?;
    let stylized = read_stylized(&cfg.require("stylized", &cfg.paths.stylized)?)?;
    let built = build_pairs(&neutral, &stylized)?;
    let filter: Option<BTreeSet<String>> = (!cfg.dataset.label_filter.is_empty())
        .then(|| cfg.dataset.label_filter.iter().cloned().collect());
    let report = oversample_pairs(
        &built.pairs,
        &OversamplePlan::new(cfg.dataset.targets.clone()),
        cfg.seed,
        filter.as_ref(),
    )?;
    let validation = validate_dataset(&report.pairs);

    let mut styles: BTreeMap<&str, StructuredStyleVector> = BTreeMap::new();
    let mut lines = String::new();
    for p in &report.pairs {
        if !styles.contains_key(p.character.as_str()) {
            let path = cfg
                .out_dir()
                .join(format!("style_{}.json", file_stem(&p.character)));
            let text = read_text(&path, "style vector (run `assemble` first)")?;
            styles.insert(&p.character, style_from_json(&text, &path)?);
        }
        let style = &styles[p.character.as_str()];
        let target = match &p.cot_trace {
            Some(t) => render_cot_target(t, &p.stylized)
                .map(|c| c.text)
                .unwrap_or_else(|_| p.stylized.clone()),
            None => p.stylized.clone(),
        };
        let rec = InstructionRecord {
            id: &p.id,
            character: &p.character,
            instruction: render_instruction_prompt(
                style,
                &p.neutral,
                cfg.dataset.mask,
                &cfg.dataset.template,
            ),
            target,
        };
        lines.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        lines.push('\n');
    }

    let mut out = Output::new(cfg);
    out.write("dataset.tsv", &format_dataset(&report.pairs))?;
    out.write("instructions.jsonl", &lines)?;
    out.write("oversample_report.tsv", &format_oversample_report(&report))?;
    out.write("validation.tsv", &format_validation(&validation))?;
    let unaligned = built.unaligned_neutrals.len() + built.unaligned_stylized.len();
    if !validation.is_clean() || unaligned > 0 {
        return Err(Error::Validation(format!(
            "dataset failed validation: {} violations, {unaligned} unaligned records",
            validation.violations.len()
        )));
    }
    Ok(out.written)
}

pub fn cmd_eval(cfg: &PipelineConfig, scores: Option<&Path>) -> Result<Vec<PathBuf>> {
    let path = match scores {
        Some(p) => p.to_path_buf(),
        None => cfg.require("scores", &cfg.paths.scores)?,
    };
    let rows = read_scored_samples(&path)?;
    // Groups in order of first appearance.
    let mut groups: Vec<(String, Vec<ScoredSample>)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|(m, _)| *m == r.model) {
            Some((_, v)) => v.push(r.sample),
            None => groups.push((r.model, vec![r.sample])),
        }
    }
    let (tau, kind) = (cfg.eval.tau, cfg.eval.h_kind);
    let mut reports = Vec::with_capacity(groups.len());
    let mut sens = Vec::with_capacity(groups.len());
    let mut samples_csv = String::from("model,id,semantic,style_raw,h_score,valid_style\n");
    for (model, samples) in &groups {
        reports.push((model.clone(), aggregate_report(samples, tau, kind)?));
        sens.push((model.clone(), tau_sensitivity(samples, &cfg.eval.taus)?));
        for s in samples {
            let h = h_score_with(kind, s.semantic.max(0.0), s.style_raw.max(0.0))?;
            let _ = writeln!(
                samples_csv,
                "{model},{},{:.4},{:.4},{h:.4},{:.4}",
                s.id,
                s.semantic,
                s.style_raw,
                valid_style_score(s, tau)
            );
        }
    }
    let points: Vec<ParetoPoint> = reports
        .iter()
        .map(|(m, r)| ParetoPoint::new(m.clone(), r.mean_semantic, r.mean_style_raw))
        .collect();
    let frontier = pareto_frontier(&points);
    let high = high_fidelity_filter(&points, cfg.eval.floor);

    let mut out = Output::new(cfg);
    out.write("eval_report.csv", &format_metric_reports(&reports))?;
    out.write("tau_sensitivity.csv", &format_tau_sensitivity(&sens))?;
    out.write("frontier.csv", &format_frontier(&points, &frontier))?;
    out.write("high_fidelity.csv", &format_frontier(&high, &frontier))?;
    out.write("samples.csv", &samples_csv)?;
    Ok(out.written)
}
