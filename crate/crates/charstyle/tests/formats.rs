use std::path::Path;

use charstyle::formats::*;
use charstyle::Error;
use charstyle_core::corpus::Utterance;
use charstyle_core::dataset::TrainingPair;
use charstyle_core::refiner::RefinerModel;
use proptest::prelude::*;

fn token() -> impl Strategy<Value = String> {
    "[a-z喵哼！]{1,4}"
}

fn utterance() -> impl Strategy<Value = Utterance> {
    (
        "[a-z0-9]{1,6}",
        "[a-z]{1,3}",
        proptest::option::of("[a-z0-9]{1,4}"),
        prop::collection::vec(token(), 0..6),
    )
        .prop_map(|(id, c, ctx, toks)| {
            let u = Utterance::new(id, c, toks);
            match ctx {
                Some(x) => u.with_context(x),
                None => u,
            }
        })
}

proptest! {
    #[test]
    fn corpus_round_trips(us in prop::collection::vec(utterance(), 0..10)) {
        let text = format_corpus(&us);
        prop_assert_eq!(parse_corpus(&text, Path::new("c")).unwrap(), us);
    }

    #[test]
    fn fields_round_trip(s in "\\PC*|[\\t\\n\\\\a]{0,8}") {
        let e = escape_field(&s);
        prop_assert!(!e.contains('\t') && !e.contains('\n'));
        prop_assert_eq!(unescape_field(&e).unwrap(), s);
    }

    #[test]
    fn dataset_round_trips(rows in prop::collection::vec(("[a-z#0-9]{1,5}", "[a-z]{1,3}", "\\PC{0,10}", "\\PC{1,10}", proptest::option::of("[^\\t]{0,10}"), prop::collection::vec("[a-z_]{1,6}", 0..3)), 0..6)) {
        let pairs: Vec<TrainingPair> = rows.into_iter().map(|(id, character, neutral, stylized, cot_trace, pragmatic_labels)| TrainingPair {
            id, character, neutral, stylized, cot_trace: cot_trace.filter(|c| !c.is_empty()), pragmatic_labels,
        }).collect();
        prop_assert_eq!(parse_dataset(&format_dataset(&pairs), Path::new("d")).unwrap(), pairs);
    }

    #[test]
    fn model_bytes_round_trip(dim in 1usize..4, hidden in 1usize..4, labels in 1usize..4, scale in -3.0f64..3.0) {
        let n = hidden * (2 * dim + labels) + hidden + labels * hidden + labels;
        let params: Vec<f64> = (0..n).map(|i| scale * i as f64).collect();
        let m = RefinerModel::from_parts(dim, hidden, params, vec![1.0; labels], dim % 2 == 0, true).unwrap();
        prop_assert_eq!(decode_model(&encode_model(&m), Path::new("m")).unwrap(), m);
    }
}

#[test]
fn malformed_lines_name_their_line() {
    let e = parse_corpus("a\tx\tt\n\nb\n", Path::new("c.tsv")).unwrap_err();
    assert!(matches!(e, Error::Format { line: 3, .. }), "{e}");
    assert!(e.to_string().starts_with("c.tsv:3:"));
    let e = parse_treebank("u1\t(IP (VP (VV a)))\nu2\t(IP (VP\n", Path::new("t")).unwrap_err();
    assert!(matches!(e, Error::Format { line: 2, .. }));
    let e = parse_embeddings("a 1 2\nb 1 2 3\n", Path::new("e")).unwrap_err();
    assert!(matches!(e, Error::Format { line: 2, .. }));
    assert_eq!(e.exit_code(), 1);
}

#[test]
fn duplicate_ids_are_rejected_by_corpus() {
    let us = parse_corpus("u1\ta\tx\nu1\ta\ty\n", Path::new("c")).unwrap();
    let e = charstyle::pipeline::corpus_for(&us, "a").unwrap_err();
    assert!(e.to_string().contains("u1"));
    let e = charstyle::pipeline::corpus_for(&us, "b").unwrap_err();
    assert_eq!(e.to_string(), "empty corpus");
}

#[test]
fn scores_need_named_columns() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.csv");
    std::fs::write(&p, "id,semantic,style_raw\na,0.8,0.5\nb,0.7,-0.1\n").unwrap();
    let rows = read_scored_samples(&p).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].model, "all");
    std::fs::write(&p, "id,semantic\na,0.8\n").unwrap();
    assert!(matches!(
        read_scored_samples(&p),
        Err(Error::Format { line: 1, .. })
    ));
    std::fs::write(&p, "id,semantic,style_raw\na,x,0.5\n").unwrap();
    assert!(matches!(
        read_scored_samples(&p),
        Err(Error::Format { line: 2, .. })
    ));
    let missing = read_scored_samples(&dir.path().join("none.csv")).unwrap_err();
    assert_eq!(missing.exit_code(), 2);
}
