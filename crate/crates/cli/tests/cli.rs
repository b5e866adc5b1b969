mod common;

use std::sync::Arc;

use cnr_core::classify::{load_gold, Classifier, FewShotBank};
use cnr_core::gateway::{
    BackendCall, Gateway, GatewayConfig, RecordingBackend, ResponderBackend, TemplateSet,
};
use cnr_core::model::{Category, ProcessedArticle};
use serde_json::Value;

use common::{cnr, fixture_articles, fixtures, stdout, GOLDEN_SCRIPT};

fn path(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ingest_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let files = fixture_articles();
    let mut args = vec!["ingest", "--data-dir", path(dir.path())];
    args.extend(files.iter().map(|p| path(p)));
    let o = cnr(&args);
    assert!(o.status.success());
    assert!(stdout(&o).contains("3 stored, 0 rejected"));

    // a second ingest without --replace refuses duplicates
    let o = cnr(&args);
    assert!(!o.status.success());
    assert!(stdout(&o).contains("0 stored, 3 rejected"));
}

#[test]
fn ingest_reports_each_bad_file() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"format_version":"cnr-corpus/9","article":{}}"#).unwrap();
    let missing = dir.path().join("missing.json");
    let good = &fixture_articles()[0];
    let data = dir.path().join("data");
    let o = cnr(&[
        "--format",
        "structured",
        "ingest",
        "--data-dir",
        path(&data),
        path(&bad),
        path(&missing),
        path(good),
    ]);
    assert!(!o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["stored"].as_array().unwrap().len(), 1);
    let errors = v["errors"].as_array().unwrap();
    assert_eq!(errors.len(), 2);
    assert!(errors[0]["file"].as_str().unwrap().ends_with("bad.json"));
    assert!(errors[1]["file"]
        .as_str()
        .unwrap()
        .ends_with("missing.json"));
}

#[test]
fn process_structured_output_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path());
    let files = fixture_articles();
    let mut args = vec!["ingest", "--data-dir", data];
    args.extend(files.iter().map(|p| path(p)));
    assert!(cnr(&args).status.success());

    let script = fixtures().join(GOLDEN_SCRIPT);
    let o = cnr(&[
        "--format",
        "structured",
        "process",
        "school-phone-ban",
        "--data-dir",
        data,
        "--scripted",
        path(&script),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let processed: Vec<ProcessedArticle> = serde_json::from_value(v["processed"].clone()).unwrap();
    assert_eq!(processed.len(), 1);
    let store = cnr_core::store::Store::open(dir.path()).unwrap();
    assert_eq!(
        store.processed("school-phone-ban").unwrap().unwrap(),
        processed[0]
    );

    // unknown id fails without touching others
    let o = cnr(&[
        "process",
        "nope",
        "--data-dir",
        data,
        "--scripted",
        path(&script),
    ]);
    assert!(!o.status.success());
    assert!(stdout(&o).contains("failed nope"));
}

#[test]
fn process_needs_a_backend() {
    let dir = tempfile::tempdir().unwrap();
    let o = cnr(&["process", "--all", "--data-dir", path(dir.path())]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("--scripted"));
}

#[test]
fn script_miss_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path());
    let files = fixture_articles();
    assert!(cnr(&["ingest", "--data-dir", data, path(&files[0])])
        .status
        .success());
    let empty = dir.path().join("empty.script.json");
    std::fs::write(&empty, r#"{"format_version":"cnr-script/1","entries":[]}"#).unwrap();
    let o = cnr(&[
        "process",
        "--all",
        "--data-dir",
        data,
        "--scripted",
        path(&empty),
    ]);
    assert!(!o.status.success());
}

#[test]
fn agreement_perfect_fixture() {
    let a = fixtures().join("agreement/perfect_a.csv");
    let b = fixtures().join("agreement/perfect_b.csv");
    let o = cnr(&[
        "eval",
        "agreement",
        "--rater-a",
        path(&a),
        "--rater-b",
        path(&b),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("ac1 1.0\n"), "{}", stdout(&o));

    let c = fixtures().join("agreement/rater_b_disagree.csv");
    let o = cnr(&[
        "--format",
        "structured",
        "eval",
        "agreement",
        "--rater-a",
        path(&a),
        "--rater-b",
        path(&c),
    ]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["observed_agreement"], 17.0 / 20.0);
    assert!(v["ac1"].as_f64().unwrap() < 1.0);
}

#[test]
fn ablation_table() {
    let f = fixtures().join("ablation/paired_scores.csv");
    let o = cnr(&["eval", "ablation", "--paired-scores", path(&f)]);
    assert!(o.status.success());
    let text = stdout(&o);
    for metric in ["relevance", "accessibility", "usefulness"] {
        assert!(text.contains(metric), "{text}");
    }

    let o = cnr(&[
        "--format",
        "structured",
        "eval",
        "ablation",
        "--paired-scores",
        path(&f),
        "--alternative",
        "greater",
    ]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["n_pairs"], 20);
    assert_eq!(rows[0]["wilcoxon"]["alternative"], "greater");
}

/// Records a script in which the model reproduces the gold labels, except
/// that it never says yes to Nonsense.
fn planted_script(dir: &std::path::Path) -> std::path::PathBuf {
    let gold = load_gold(fixtures().join("gold/seed_gold.jsonl")).unwrap();
    let lookup = gold.clone();
    let backend = ResponderBackend::new("planted", move |call: BackendCall<'_>| {
        let ex = lookup
            .iter()
            .find(|ex| {
                call.prompt
                    .contains(&format!("Comment:\n{}\n", ex.comment_text))
            })
            .expect("gold comment in prompt");
        Ok(match call.template.strip_prefix("cls_") {
            Some("nonsense") => "No".into(),
            Some(cat) => {
                let c: Category = cat.parse().unwrap();
                if ex.is_positive(c) { "Yes" } else { "No" }.into()
            }
            None => ex.sentiment.as_str().into(),
        })
    });
    let recorder = Arc::new(RecordingBackend::new(backend));
    let gateway = Gateway::new(
        recorder.clone(),
        TemplateSet::builtin(),
        GatewayConfig::default(),
    );
    let classifier = Classifier::new(
        gateway.clone(),
        FewShotBank::builtin(),
        cnr_core::pipeline::pipeline_version(&gateway),
    );
    classifier.predict_gold(&gold).unwrap();
    let path = dir.join("planted.script.json");
    recorder.script().save(&path).unwrap();
    path
}

#[test]
fn eval_classify_with_planted_predictor() {
    let dir = tempfile::tempdir().unwrap();
    let script = planted_script(dir.path());
    let gold = fixtures().join("gold/seed_gold.jsonl");
    let o = cnr(&[
        "--format",
        "structured",
        "eval",
        "classify",
        "--gold",
        path(&gold),
        "--scripted",
        path(&script),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["n_items"], 44);
    assert_eq!(v["sentiment_accuracy"], 1.0);
    let nonsense = &v["per_category"]["nonsense"];
    // three positives all missed: recall 0, F1 0, gate fails
    assert_eq!(nonsense["fn"], 3);
    assert_eq!(nonsense["passes_gate"], false);
    assert_eq!(v["per_category"]["analysis"]["accuracy"], 1.0);
    assert_eq!(v["all_pass"], false);

    let o = cnr(&[
        "eval",
        "classify",
        "--gold",
        path(&gold),
        "--scripted",
        path(&script),
        "--require-gates",
    ]);
    assert!(!o.status.success());
    assert!(stdout(&o).contains("nonsense"));
}

#[test]
fn hints_with_and_without_comments() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path());
    let files = fixture_articles();
    let mut args = vec!["ingest", "--data-dir", data];
    args.extend(files.iter().map(|p| path(p)));
    assert!(cnr(&args).status.success());
    let script = fixtures().join(GOLDEN_SCRIPT);
    let o = cnr(&[
        "eval",
        "hints",
        "--article",
        "gym-locker-policy",
        "--data-dir",
        data,
        "--scripted",
        path(&script),
    ]);
    assert!(!o.status.success(), "unprocessed article must be refused");

    assert!(cnr(&[
        "process",
        "--all",
        "--data-dir",
        data,
        "--scripted",
        path(&script)
    ])
    .status
    .success());
    let o = cnr(&[
        "eval",
        "hints",
        "--article",
        "gym-locker-policy",
        "--data-dir",
        data,
        "--scripted",
        path(&script),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(!v["with_comments"].as_array().unwrap().is_empty());
    assert!(!v["without_comments"].as_array().unwrap().is_empty());
}
