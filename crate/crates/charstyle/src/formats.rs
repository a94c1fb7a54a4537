//! Line-oriented file formats. Every reader reports the 1-based line of the
//! first malformed record; every writer produces byte-stable output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use charstyle_core::corpus::{EmbeddingTable, StopwordList, Utterance};
use charstyle_core::dataset::{
    NeutralRecord, OversampleReport, StylizedRecord, TrainingPair, ValidationReport, ViolationKind,
};
use charstyle_core::evaluation::{HKind, MetricReport, ParetoPoint, ScoredSample};
use charstyle_core::lexical::TfPmiLexicon;
use charstyle_core::refiner::{ClassificationReport, LabelSet, RefinerModel, ThresholdVector};
use charstyle_core::style_vector::{StabilityCurve, StructuredStyleVector};
use charstyle_core::syntactic::{CoverageReport, RankedRule, SyntacticVector};
use charstyle_core::treebank::{parse_bracketed_tree, ParseTree};

use crate::error::{Error, Result};

pub fn read_text(path: &Path, what: &'static str) -> Result<String> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::NotFound {
            what,
            path: path.to_path_buf(),
        }),
        Err(e) => Err(Error::io(path, e)),
    }
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Non-blank lines with their 1-based numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

/// Backslash-escapes tab, newline, carriage return and backslash.
pub fn escape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_field(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        out.push(match chars.next()? {
            '\\' => '\\',
            't' => '\t',
            'n' => '\n',
            'r' => '\r',
            _ => return None,
        });
    }
    Some(out)
}

fn split_labels(field: &str) -> Vec<String> {
    field
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

// Corpus: id TAB character [TAB context_id] TAB space-separated tokens.

pub fn parse_corpus(text: &str, path: &Path) -> Result<Vec<Utterance>> {
    let mut out = Vec::new();
    for (line, rec) in lines(text) {
        let fields: Vec<&str> = rec.split('\t').collect();
        let (id, character, context, tokens) = match fields.as_slice() {
            [id, c, t] => (*id, *c, None, *t),
            [id, c, ctx, t] => (*id, *c, Some(*ctx).filter(|x| !x.is_empty()), *t),
            _ => {
                return Err(Error::format(
                    path,
                    line,
                    format!("expected 3 or 4 tab-separated fields, got {}", fields.len()),
                ))
            }
        };
        if id.is_empty() || character.is_empty() {
            return Err(Error::format(path, line, "empty id or character"));
        }
        let mut u = Utterance::new(id, character, tokens.split(' ').filter(|t| !t.is_empty()));
        if let Some(ctx) = context {
            u = u.with_context(ctx);
        }
        out.push(u);
    }
    Ok(out)
}

pub fn read_corpus_file(path: &Path) -> Result<Vec<Utterance>> {
    parse_corpus(&read_text(path, "corpus")?, path)
}

pub fn format_corpus(utterances: &[Utterance]) -> String {
    let mut s = String::new();
    for u in utterances {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}",
            u.id,
            u.character,
            u.context_id.as_deref().unwrap_or(""),
            u.tokens.join(" ")
        );
    }
    s
}

// Embeddings: key, then whitespace-separated reals. A tab after the key
// allows keys that contain spaces.

pub fn parse_embeddings(text: &str, path: &Path) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = None;
    for (line, rec) in lines(text) {
        let (key, rest) = match rec.split_once('\t') {
            Some(kv) => kv,
            None => rec
                .split_once(char::is_whitespace)
                .ok_or_else(|| Error::format(path, line, "expected a key followed by numbers"))?,
        };
        let values = rest
            .split_whitespace()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::format(path, line, format!("not a number: {v:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.is_empty() {
            return Err(Error::format(path, line, "no values"));
        }
        let t = table.get_or_insert_with(|| EmbeddingTable::new(values.len()));
        t.insert(key, values)
            .map_err(|e| Error::format(path, line, e.to_string()))?;
    }
    table.ok_or_else(|| Error::format(path, 0, "empty embedding table"))
}

pub fn read_embeddings(path: &Path, what: &'static str) -> Result<EmbeddingTable> {
    parse_embeddings(&read_text(path, what)?, path)
}

pub fn read_stopwords(path: &Path) -> Result<StopwordList> {
    Ok(read_text(path, "stopword list")?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

/// One bracketed tree per line, optionally preceded by `id TAB`.
pub fn parse_treebank(text: &str, path: &Path) -> Result<Vec<(Option<String>, ParseTree)>> {
    let mut out = Vec::new();
    for (line, rec) in text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
    {
        if rec.trim().is_empty() {
            continue;
        }
        let (id, tree) = match rec.split_once('\t') {
            Some((id, t)) => (Some(id.to_string()), t),
            None => (None, rec),
        };
        let tree =
            parse_bracketed_tree(tree).map_err(|e| Error::format(path, line, e.to_string()))?;
        out.push((id, tree));
    }
    Ok(out)
}

pub fn read_treebank(path: &Path) -> Result<Vec<(Option<String>, ParseTree)>> {
    parse_treebank(&read_text(path, "treebank")?, path)
}

/// `id TAB label,label,...`
pub fn read_gold_labels(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    let text = read_text(path, "gold label file")?;
    let mut out = BTreeMap::new();
    for (line, rec) in lines(&text) {
        let (id, labels) = rec.split_once('\t').unwrap_or((rec, ""));
        if out.insert(id.to_string(), split_labels(labels)).is_some() {
            return Err(Error::format(path, line, format!("duplicate id {id:?}")));
        }
    }
    Ok(out)
}

pub fn format_lexicon(lexicon: &TfPmiLexicon) -> String {
    let mut s = String::from("rank\ttoken\tcount\tpmi\tscore\n");
    for (i, e) in lexicon.entries.iter().enumerate() {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{:.6}\t{:.6}",
            i + 1,
            e.token,
            e.count_in_style,
            e.pmi,
            e.score
        );
    }
    s
}

pub fn format_rules(rules: &[RankedRule]) -> String {
    let mut s = String::from("rule\tFreq.\tP\tPR\tLLR\n");
    for r in rules {
        let _ = writeln!(
            s,
            "{}\t{}\t{:.4}\t{:.4}\t{:.4}",
            r.production, r.frequency, r.probability, r.ratio.value, r.llr
        );
    }
    s
}

pub fn format_syntactic_vector(v: &SyntacticVector) -> String {
    let mut s = String::from("dimension\tvalue\n");
    for (d, x) in v.dimension_names.iter().zip(&v.values) {
        let _ = writeln!(s, "{d}\t{x:.6}");
    }
    s
}

pub fn format_coverage(character: &str, c: &CoverageReport) -> String {
    format!(
        "character\ttotal_rules\tmapped_rules\tcoverage_pct\n{character}\t{}\t{}\t{:.2}\n",
        c.total_rules, c.mapped_rules, c.coverage_pct
    )
}

const MODEL_MAGIC: &[u8; 8] = b"CSTYMDL\0";
const MODEL_VERSION: u32 = 1;

/// Header, then label weights and parameters as little-endian f64.
pub fn encode_model(m: &RefinerModel) -> Vec<u8> {
    let mut b = Vec::with_capacity(40 + 8 * (m.params.len() + m.label_weights.len()));
    b.extend_from_slice(MODEL_MAGIC);
    b.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    for n in [m.embedding_dim, m.shape.hidden, m.shape.labels] {
        b.extend_from_slice(&(n as u32).to_le_bytes());
    }
    let flags = u32::from(m.use_prototypes) | (u32::from(m.trained) << 1);
    b.extend_from_slice(&flags.to_le_bytes());
    b.extend_from_slice(&(m.params.len() as u64).to_le_bytes());
    for x in m.label_weights.iter().chain(&m.params) {
        b.extend_from_slice(&x.to_le_bytes());
    }
    b
}

pub fn decode_model(bytes: &[u8], path: &Path) -> Result<RefinerModel> {
    let bad = |m: &str| Error::format(path, 0, m.to_string());
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes
            .get(pos..pos + n)
            .ok_or_else(|| bad("truncated model file"))?;
        pos += n;
        Ok(s)
    };
    if take(8)? != MODEL_MAGIC {
        return Err(bad("not a model file"));
    }
    let mut u32s = [0u32; 5];
    for v in &mut u32s {
        *v = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
    }
    let [version, dim, hidden, labels, flags] = u32s;
    if version != MODEL_VERSION {
        return Err(bad(&format!("unsupported model version {version}")));
    }
    let count = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
    let mut reals = |n: usize| -> Result<Vec<f64>> {
        Ok(take(n.checked_mul(8).ok_or_else(|| bad("size overflow"))?)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    };
    let weights = reals(labels as usize)?;
    let params = reals(count)?;
    Ok(RefinerModel::from_parts(
        dim as usize,
        hidden as usize,
        params,
        weights,
        flags & 1 != 0,
        flags & 2 != 0,
    )?)
}

pub fn format_thresholds(labels: &LabelSet, t: &ThresholdVector) -> String {
    let mut s = String::new();
    for (name, v) in labels.names().iter().zip(t.values()) {
        let _ = writeln!(s, "{name}\t{v}");
    }
    s
}

pub fn parse_thresholds(text: &str, labels: &LabelSet, path: &Path) -> Result<ThresholdVector> {
    let mut values = vec![None; labels.len()];
    for (line, rec) in lines(text) {
        let (name, v) = rec
            .split_once('\t')
            .ok_or_else(|| Error::format(path, line, "expected label<TAB>threshold"))?;
        let i = labels
            .index_of(name)
            .ok_or_else(|| Error::format(path, line, format!("unknown label {name:?}")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::format(path, line, format!("bad threshold {v:?}")))?;
        values[i] = Some(v);
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| Error::format(path, 0, format!("no threshold for {}", labels.name(i))))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ThresholdVector::new(values)?)
}

pub fn format_classification_report(
    labels: &LabelSet,
    r: &ClassificationReport,
    t: &ThresholdVector,
) -> String {
    let mut s = String::from("label\tthreshold\tprecision\trecall\tf1\tsupport\n");
    for (i, sc) in r.per_label.iter().enumerate() {
        let _ = writeln!(
            s,
            "{}\t{:.2}\t{:.4}\t{:.4}\t{:.4}\t{}",
            labels.name(i),
            t.values()[i],
            sc.precision,
            sc.recall,
            sc.f1,
            sc.support
        );
    }
    let _ = writeln!(s, "macro_f1\t\t\t\t{:.4}\t", r.macro_f1);
    s
}

/// `id TAB character TAB label,label,...`
pub fn format_predictions(rows: &[(String, String, Vec<String>)]) -> String {
    let mut s = String::new();
    for (id, c, labels) in rows {
        let _ = writeln!(s, "{id}\t{c}\t{}", labels.join(","));
    }
    s
}

pub fn parse_predictions(text: &str, path: &Path) -> Result<Vec<(String, String, Vec<String>)>> {
    lines(text)
        .map(|(line, rec)| {
            let f: Vec<&str> = rec.split('\t').collect();
            match f.as_slice() {
                [id, c] => Ok((id.to_string(), c.to_string(), Vec::new())),
                [id, c, l] => Ok((id.to_string(), c.to_string(), split_labels(l))),
                _ => Err(Error::format(
                    path,
                    line,
                    "expected id<TAB>character<TAB>labels",
                )),
            }
        })
        .collect()
}

pub fn style_to_json(s: &StructuredStyleVector) -> String {
    let mut out = serde_json::to_string_pretty(s).expect("style vector serializes");
    out.push('\n');
    out
}

pub fn style_from_json(text: &str, path: &Path) -> Result<StructuredStyleVector> {
    serde_json::from_str(text).map_err(|e| Error::format(path, e.line(), e.to_string()))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn format_stability(curve: &StabilityCurve) -> String {
    let mut s = String::from("N,lexical,pragmatic,syntactic,composite\n");
    for p in &curve.points {
        let b = &p.breakdown;
        let _ = writeln!(
            s,
            "{},{},{},{},{:.6}",
            p.n,
            opt(b.lexical),
            opt(b.pragmatic),
            opt(b.syntactic),
            b.composite
        );
    }
    s
}

// Dataset inputs. Text fields use backslash escapes.

fn unescape_at(path: &Path, line: usize, s: &str) -> Result<String> {
    unescape_field(s).ok_or_else(|| Error::format(path, line, format!("bad escape in {s:?}")))
}

/// `id TAB character TAB text`
pub fn read_neutral(path: &Path) -> Result<Vec<NeutralRecord>> {
    let text = read_text(path, "neutral file")?;
    lines(&text)
        .map(|(line, rec)| {
            let f: Vec<&str> = rec.split('\t').collect();
            let [id, character, t] = f.as_slice() else {
                return Err(Error::format(
                    path,
                    line,
                    "expected id<TAB>character<TAB>text",
                ));
            };
            Ok(NeutralRecord {
                id: id.to_string(),
                character: character.to_string(),
                text: unescape_at(path, line, t)?,
            })
        })
        .collect()
}

/// `id TAB neutral_id TAB character TAB text TAB cot TAB labels`
pub fn read_stylized(path: &Path) -> Result<Vec<StylizedRecord>> {
    let text = read_text(path, "stylized file")?;
    lines(&text)
        .map(|(line, rec)| {
            let f: Vec<&str> = rec.split('\t').collect();
            let [id, nid, character, t, cot, labels] = f.as_slice() else {
                return Err(Error::format(path, line, "expected 6 tab-separated fields"));
            };
            Ok(StylizedRecord {
                id: id.to_string(),
                neutral_id: nid.to_string(),
                character: character.to_string(),
                text: unescape_at(path, line, t)?,
                cot_trace: if cot.is_empty() {
                    None
                } else {
                    Some(unescape_at(path, line, cot)?)
                },
                pragmatic_labels: split_labels(labels),
            })
        })
        .collect()
}

const DATASET_HEADER: &str = "id\tcharacter\tneutral\tstylized\tcot\tlabels";

pub fn format_dataset(pairs: &[TrainingPair]) -> String {
    let mut s = String::from(DATASET_HEADER);
    s.push('\n');
    for p in pairs {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}",
            escape_field(&p.id),
            escape_field(&p.character),
            escape_field(&p.neutral),
            escape_field(&p.stylized),
            p.cot_trace.as_deref().map(escape_field).unwrap_or_default(),
            p.pragmatic_labels.join(",")
        );
    }
    s
}

pub fn parse_dataset(text: &str, path: &Path) -> Result<Vec<TrainingPair>> {
    let mut rows = lines(text);
    match rows.next() {
        Some((_, h)) if h == DATASET_HEADER => {}
        _ => return Err(Error::format(path, 1, "missing dataset header")),
    }
    rows.map(|(line, rec)| {
        let f: Vec<&str> = rec.split('\t').collect();
        let [id, c, n, s, cot, labels] = f.as_slice() else {
            return Err(Error::format(path, line, "expected 6 tab-separated fields"));
        };
        Ok(TrainingPair {
            id: unescape_at(path, line, id)?,
            character: unescape_at(path, line, c)?,
            neutral: unescape_at(path, line, n)?,
            stylized: unescape_at(path, line, s)?,
            cot_trace: if cot.is_empty() {
                None
            } else {
                Some(unescape_at(path, line, cot)?)
            },
            pragmatic_labels: split_labels(labels),
        })
    })
    .collect()
}

pub fn format_oversample_report(r: &OversampleReport) -> String {
    let mut s = String::from("character\tsource\ttarget\trate\tincrease_pct\n");
    for (c, x) in &r.per_character {
        let _ = writeln!(
            s,
            "{c}\t{}\t{}\t{:.2}\t{:.2}",
            x.source,
            x.target,
            x.rate,
            100.0 * (x.rate - 1.0)
        );
    }
    let rate = if r.total_source == 0 {
        0.0
    } else {
        r.total_target as f64 / r.total_source as f64
    };
    let _ = writeln!(
        s,
        "Total\t{}\t{}\t{:.2}\t{:.2}",
        r.total_source, r.total_target, rate, r.increase_pct
    );
    s
}

pub fn format_validation(r: &ValidationReport) -> String {
    let mut s = String::from("index\tid\tviolation\n");
    for v in &r.violations {
        let kind = match &v.kind {
            ViolationKind::EmptyField(f) => format!("empty {f}"),
            ViolationKind::DuplicateId => "duplicate id".into(),
            ViolationKind::OneToOneBreak => "1:1 break".into(),
            ViolationKind::CotTooLong(n) => format!("cot too long ({n} > 100)"),
        };
        let _ = writeln!(s, "{}\t{}\t{kind}", v.index, escape_field(&v.id));
    }
    s
}

/// A scored sample with the model that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSample {
    pub model: String,
    pub sample: ScoredSample,
}

/// CSV with a header naming at least `id`, `semantic` and `style_raw`; an
/// optional `model` column groups rows (missing means one group, `all`).
pub fn read_scored_samples(path: &Path) -> Result<Vec<ModelSample>> {
    let text = read_text(path, "score file")?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::format(path, 1, e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(id), Some(sem), Some(sty)) = (col("id"), col("semantic"), col("style_raw")) else {
        return Err(Error::format(
            path,
            1,
            "header must name id, semantic and style_raw",
        ));
    };
    let model = col("model");
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::format(path, line, e.to_string()))?;
        let num = |c: usize| -> Result<f64> {
            let v = row.get(c).unwrap_or("");
            v.parse()
                .map_err(|_| Error::format(path, line, format!("not a number: {v:?}")))
        };
        let sample = ScoredSample::new(row.get(id).unwrap_or(""), num(sem)?, num(sty)?)
            .map_err(|e| Error::format(path, line, e.to_string()))?;
        out.push(ModelSample {
            model: model.and_then(|c| row.get(c)).unwrap_or("all").to_string(),
            sample,
        });
    }
    if out.is_empty() {
        return Err(Error::format(path, 0, "no samples"));
    }
    Ok(out)
}

pub fn format_metric_reports(rows: &[(String, MetricReport)]) -> String {
    let mut s = String::from(
        "model,samples,semantic,style_raw,h_score,valid_style,tau,h_kind,clamped_negative\n",
    );
    for (m, r) in rows {
        let kind = match r.h_kind {
            HKind::Harmonic => "harmonic",
            HKind::Geometric => "geometric",
            HKind::Arithmetic => "arithmetic",
        };
        let _ = writeln!(
            s,
            "{m},{},{:.4},{:.4},{:.4},{:.4},{},{kind},{}",
            r.samples,
            r.mean_semantic,
            r.mean_style_raw,
            r.mean_h_score,
            r.mean_valid_style,
            r.tau,
            r.clamped_negative
        );
    }
    s
}

pub fn format_tau_sensitivity(rows: &[(String, Vec<(f64, f64)>)]) -> String {
    let mut s = String::from("model,tau,valid_style\n");
    for (m, pts) in rows {
        for (t, v) in pts {
            let _ = writeln!(s, "{m},{t:.2},{v:.4}");
        }
    }
    s
}

pub fn format_frontier(points: &[ParetoPoint], frontier: &[ParetoPoint]) -> String {
    let mut s = String::from("label,semantic,style,on_frontier\n");
    for p in points {
        let on = frontier.iter().any(|f| f.label == p.label);
        let _ = writeln!(s, "{},{:.4},{:.4},{}", p.label, p.semantic, p.style, on);
    }
    s
}
