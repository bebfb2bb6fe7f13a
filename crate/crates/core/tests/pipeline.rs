mod common;

use commval::extraction::MockProvider;
use commval::pipeline::{emit_reports, files, read_jsonl, Pipeline, PipelineError, RunConfig, RunManifest, Stage, StageStatus};
use commval::prosocial::{OddsRatioReport, RecallReport};
use commval::scales::ScaleThresholds;
use common::*;
use std::collections::BTreeSet;
use std::sync::Arc;

fn pipeline(fx: &Fixture) -> (Pipeline, Arc<MockProvider>) {
    let config = RunConfig::load(&fx.config_path()).unwrap();
    let mock = Arc::new(MockProvider::from_fn(planted_responder(BTreeSet::new(), BTreeSet::new())));
    let p = Pipeline::new(config).unwrap().with_provider(Box::new(Shared(mock.clone())));
    (p, mock)
}

fn prosocial_fixture() -> Fixture {
    let fx = Fixture::write(
        "scores = \"scores.csv\"\n",
        "\n[prosocial]\nenabled = true\nscorer = \"file\"\n",
    );
    std::fs::write(fx.root().join("scores.csv"), scores_csv()).unwrap();
    let cfg = std::fs::read_to_string(fx.config_path()).unwrap();
    std::fs::write(fx.config_path(), cfg.replace("regression_per_class = 5", "regression_per_class = 20")).unwrap();
    fx
}

fn read_json<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> T {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn full_run_with_prosocial_stages() {
    let fx = prosocial_fixture();
    let (p, _) = pipeline(&fx);
    let manifest = p.run().unwrap();
    assert!(manifest.complete);
    assert_eq!(manifest.stages.len(), Stage::ALL.len());
    assert!(manifest.stages.values().all(|s| s.status == StageStatus::Ok));

    let out = fx.out();
    let odds: OddsRatioReport = read_json(&out.join(files::ODDS_RATIOS));
    // The two tiny communities are sampled but too small to fit.
    assert_eq!(odds.rows.len() + odds.skipped.len(), N_COMMUNITIES + 2);
    assert!(odds.rows.iter().all(|r| r.community.starts_with("comm")));
    assert!(!odds.rows.is_empty());
    // Scores rise with upvotes in the fixture, so most slopes are positive.
    let above = odds.rows.iter().filter(|r| r.odds_ratio > 1.0).count();
    assert!(2 * above > odds.rows.len(), "{above} of {} above one", odds.rows.len());
    assert!(odds.fraction_below_one().is_some_and(|f| f < 0.5));

    let recall: RecallReport = read_json(&out.join(files::RECALL));
    assert_eq!(recall.rows.len(), GROUPS.iter().map(|g| g.value).collect::<BTreeSet<_>>().len());
    let reports = out.join(files::REPORTS);
    for name in ["prevalence.csv", "na_counts.csv", "odds_ratios.csv", "odds_ratio_plot.csv", "recall.csv", "recall_buckets.csv"] {
        assert!(reports.join(name).exists(), "{name}");
    }
    let buckets = std::fs::read_to_string(reports.join("recall_buckets.csv")).unwrap();
    assert_eq!(buckets.lines().count(), 1 + 9);

    let regression: Vec<serde_json::Value> = read_jsonl(&out.join(files::REGRESSION)).unwrap();
    let planted_rows = regression
        .iter()
        .filter(|r| r["comment"]["community"].as_str().unwrap().starts_with("comm"))
        .count();
    assert_eq!(planted_rows, N_COMMUNITIES * 2 * 20);
    let manifest_lines: Vec<serde_json::Value> = read_jsonl(&out.join(files::REGRESSION_MANIFEST)).unwrap();
    assert_eq!(manifest_lines.len(), regression.len());
}

#[test]
fn missing_score_file_fails_the_prosocial_stage_only() {
    let fx = prosocial_fixture();
    std::fs::remove_file(fx.root().join("scores.csv")).unwrap();
    let (p, _) = pipeline(&fx);
    match p.run() {
        Err(PipelineError::StageFailed { stage, .. }) => assert_eq!(stage, Stage::Prosocial),
        other => panic!("expected a prosocial failure, got {other:?}"),
    }
    let out = fx.out();
    for name in [files::EXTRACTIONS, files::CANONICAL_MAP, files::MATRIX, files::PAIR_MANIFEST] {
        assert!(out.join(name).exists(), "{name} kept");
    }
    let manifest = RunManifest::read(&p.manifest_path()).unwrap();
    assert!(!manifest.complete);
    assert!(manifest.stages[&Stage::Scales].is_ok());
    assert!(!manifest.stages[&Stage::Prosocial].is_ok());

    // Reports still come out of what exists.
    let summary = emit_reports(&out, &ScaleThresholds::default()).unwrap();
    assert!(out.join(files::REPORTS).join("prevalence.csv").exists());
    assert!(!summary.skipped.is_empty());
}

#[test]
fn reports_need_some_stage_output() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        emit_reports(dir.path(), &ScaleThresholds::default()),
        Err(PipelineError::MissingStageOutput(_))
    ));
}

#[test]
fn stages_run_in_isolation_from_files() {
    let fx = Fixture::write("", "");
    let (p, mock) = pipeline(&fx);
    assert!(matches!(
        p.run_stage(Stage::Label),
        Err(PipelineError::StageFailed { stage: Stage::Label, .. })
    ));
    for stage in [Stage::Ingest, Stage::Filter, Stage::Label, Stage::SamplePairs] {
        p.run_stage(stage).unwrap();
    }
    assert_eq!(mock.calls(), 0);
    let pairs_before = std::fs::read(fx.out().join(files::PAIR_MANIFEST)).unwrap();
    let rec = p.run_stage(Stage::SamplePairs).unwrap();
    assert_eq!(std::fs::read(fx.out().join(files::PAIR_MANIFEST)).unwrap(), pairs_before);
    assert_eq!(rec.counts["pairs"], (N_COMMUNITIES * PAIRS) as u64);
    let manifest = RunManifest::read(&p.manifest_path()).unwrap();
    assert!(manifest.stages[&Stage::Label].is_ok());
    assert!(!manifest.complete);
}

#[test]
fn same_seed_same_outputs_across_directories() {
    let a = Fixture::write("", "");
    let b = Fixture::write("", "");
    pipeline(&a).0.run().unwrap();
    pipeline(&b).0.run().unwrap();
    // The manifest records absolute paths, which differ between the two directories.
    let sa = snapshot(&a.out(), &["cache", files::MANIFEST]);
    let sb = snapshot(&b.out(), &["cache", files::MANIFEST]);
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    let differing: Vec<&String> = sa.keys().filter(|k| sa[*k] != sb[*k]).collect();
    assert!(differing.is_empty(), "differing outputs: {differing:?}");
}

#[test]
fn different_seed_changes_the_regression_sample() {
    let a = prosocial_fixture();
    let b = prosocial_fixture();
    let cfg = std::fs::read_to_string(b.config_path()).unwrap().replace("seed = 7", "seed = 8");
    std::fs::write(b.config_path(), cfg).unwrap();
    for fx in [&a, &b] {
        let (p, _) = pipeline(fx);
        for stage in [Stage::Ingest, Stage::Filter, Stage::Label, Stage::SampleRegression] {
            p.run_stage(stage).unwrap();
        }
    }
    let ra = std::fs::read(a.out().join(files::REGRESSION)).unwrap();
    let rb = std::fs::read(b.out().join(files::REGRESSION)).unwrap();
    assert_ne!(ra, rb);
}

#[test]
fn annotation_worksheet_from_a_run() {
    let fx = Fixture::write("", "");
    let (p, _) = pipeline(&fx);
    p.run().unwrap();
    let path = p.annotate_sample().unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    // Two comments per community, each with at least one value row.
    assert!(text.lines().count() > 2 * N_COMMUNITIES);
}
