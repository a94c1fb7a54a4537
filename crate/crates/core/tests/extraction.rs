use charstyle_core::corpus::{
    filter_tokens, Corpus, EmbeddingTable, PunctuationSet, StopwordList, Utterance,
};
use charstyle_core::dataset::{render_instruction_prompt, PromptMask, PromptTemplate};
use charstyle_core::lexical::{build_lexicon, global_distribution, LexiconConfig};
use charstyle_core::refiner::{profile_from_decisions, LabelSet};
use charstyle_core::style_vector::{assemble, composite_similarity, CompositeWeights};
use charstyle_core::syntactic::{coverage, map_to_style_vector, rank_rules, RuleMapping};
use charstyle_core::treebank::{parse_bracketed_tree, ParseTree, ProductionTable};

fn corpus(c: &str, rows: &[&str]) -> Corpus {
    let us = rows
        .iter()
        .enumerate()
        .map(|(i, r)| Utterance::new(format!("{c}{i}"), c, r.split(' ')))
        .collect();
    Corpus::new(c, us).unwrap()
}

fn trees(src: &[&str]) -> Vec<ParseTree> {
    src.iter()
        .map(|s| parse_bracketed_tree(s).unwrap())
        .collect()
}

#[test]
fn style_vector_from_raw_inputs() {
    let stop: StopwordList = ["的"].into_iter().collect();
    let punct = PunctuationSet::default();
    let (a, report) = filter_tokens(
        &corpus("muice", &["我 的 喵 ！", "喵 喵 好", "的 ！"]),
        &stop,
        &punct,
        true,
    );
    assert_eq!(report.dropped_utterances, vec!["muice2".to_string()]);
    let (b, _) = filter_tokens(
        &corpus("base", &["我 去 学校", "你 去 好"]),
        &stop,
        &punct,
        true,
    );
    let global = global_distribution(&[a.clone(), b]).unwrap();
    let lexicon = build_lexicon(
        &a,
        &global,
        &LexiconConfig {
            max_global_prob: 1.0,
            ..LexiconConfig::default()
        },
    )
    .unwrap();
    assert_eq!(lexicon.entries[0].token, "喵");

    let style = ProductionTable::from_trees(
        &trees(&[
            "(TOP (CP (IP (VP (VA 好))) (SP 喵)))",
            "(TOP (IP (INTJ (IJ 喵)) (VP (VV 去))))",
        ]),
        false,
    );
    let base = ProductionTable::from_trees(
        &trees(&["(TOP (IP (NP (PN 我)) (VP (VV 去) (NP (NN 学校)))))"]),
        false,
    );
    let ranked = rank_rules(&style, &base, 3, 1e-8).unwrap();
    assert_eq!(ranked.len(), 3);
    assert!(ranked.windows(2).all(|w| w[0].llr >= w[1].llr));
    let mapping = RuleMapping::default_dictionary();
    assert_eq!(coverage(&style, &mapping).coverage_pct, 100.0);
    let syntactic = map_to_style_vector(&style, &mapping);

    let labels = LabelSet::standard();
    let mut d = vec![false; labels.len()];
    d[labels.index_of("cute").unwrap()] = true;
    let profile = profile_from_decisions("muice", &labels, &[d.clone(), d], 5).unwrap();
    let s = assemble(lexicon, syntactic, profile).unwrap();
    assert!(!s.empty_style);

    let mut tok = EmbeddingTable::new(2);
    for (t, v) in [("喵", [1.0, 0.0]), ("我", [0.0, 1.0]), ("好", [1.0, 1.0])] {
        tok.insert(t, v.to_vec()).unwrap();
    }
    let mut lab = EmbeddingTable::new(2);
    for l in labels.names() {
        lab.insert(l.clone(), vec![1.0, 0.5]).unwrap();
    }
    let self_sim = composite_similarity(&s, &s, &tok, &lab, &CompositeWeights::default()).unwrap();
    assert!((self_sim.composite - 1.0).abs() < 1e-12);

    let full = render_instruction_prompt(&s, "你好", PromptMask::NONE, &PromptTemplate::default());
    let masked = render_instruction_prompt(
        &s,
        "你好",
        PromptMask {
            syntactic: true,
            ..PromptMask::NONE
        },
        &PromptTemplate::default(),
    );
    let without: Vec<&str> = full
        .lines()
        .filter(|l| !l.starts_with("Syntactic Profile"))
        .collect();
    assert_eq!(masked, without.join("\n"));
    let bare = render_instruction_prompt(&s, "你好", PromptMask::ALL, &PromptTemplate::default());
    assert_eq!(bare.lines().count(), 2);
}
