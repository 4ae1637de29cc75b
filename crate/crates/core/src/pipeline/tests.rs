use super::*;
use crate::synth::{simulate_couple_dataset, GeneratorSpec};
use tempfile::TempDir;

fn bundle(n_couples: usize) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    simulate_couple_dataset(&GeneratorSpec::couple_defaults(n_couples), dir.path()).unwrap();
    dir
}

fn quick_config(data: &Path, out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::for_bundle(data, out);
    cfg.parallel_analysis.replications = 100;
    cfg
}

#[test]
fn synthetic_bundle_runs_end_to_end() {
    let data = bundle(150);
    let out = data.path().join("reports");
    let summary = run_pipeline(&quick_config(data.path(), &out)).unwrap();
    assert_eq!(summary.stages, Stage::ALL.to_vec());
    for stage in Stage::ALL {
        assert!(out.join(stage.report_file()).is_file(), "{stage}");
    }
    assert!(!out.join(ERROR_MANIFEST).exists());
    let validate: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join(VALIDATE_REPORT)).unwrap()).unwrap();
    let leisure = &validate["ols"][2]["models"][1]["result"];
    assert_eq!(leisure["se_kind"], "cluster");
    assert_eq!(leisure["clusters"], 150);
}

#[test]
fn missing_taxonomy_fails_before_any_work() {
    let data = bundle(5);
    std::fs::remove_file(data.path().join(crate::synth::TAXONOMY_FILE)).unwrap();
    let out = data.path().join("reports");
    let e = run_pipeline(&quick_config(data.path(), &out)).unwrap_err();
    assert!(matches!(e, PipelineError::ConfigInvalid(ref m) if m.contains("taxonomy")), "{e}");
    assert_eq!(e.exit_code(), 1);
    assert!(!out.exists());
}

#[test]
fn identical_runs_write_identical_reports() {
    let data = bundle(80);
    let a = data.path().join("a");
    let b = data.path().join("b");
    let first = run_pipeline(&quick_config(data.path(), &a)).unwrap();
    run_pipeline(&quick_config(data.path(), &b)).unwrap();
    for file in &first.files {
        let name = file.file_name().unwrap();
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name:?}");
    }
}

#[test]
fn stage_failure_keeps_earlier_reports() {
    // 10 couples give 20 respondents, fewer than the 25 free parameters.
    let data = bundle(10);
    let out = data.path().join("reports");
    let e = run_pipeline(&quick_config(data.path(), &out)).unwrap_err();
    assert!(matches!(e, PipelineError::StageFailed { stage: Stage::Sem, .. }), "{e}");
    assert_eq!(e.exit_code(), 2);
    for stage in [Stage::Ingest, Stage::Derive, Stage::Factor] {
        assert!(out.join(stage.report_file()).is_file());
    }
    assert!(!out.join(SEM_REPORT).exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join(ERROR_MANIFEST)).unwrap()).unwrap();
    assert_eq!(manifest["failed_stage"], "sem");
    assert_eq!(manifest["completed_stages"], serde_json::json!(["ingest", "derive", "factor"]));
}

#[test]
fn malformed_input_fails_in_ingest() {
    let data = bundle(5);
    let diary = data.path().join(crate::synth::DIARY_FILE);
    let text = std::fs::read_to_string(&diary).unwrap();
    std::fs::write(&diary, text.replacen("sleep", "no_such_code", 1)).unwrap();
    let out = data.path().join("reports");
    let e = run_pipeline(&quick_config(data.path(), &out)).unwrap_err();
    assert!(matches!(e, PipelineError::StageFailed { stage: Stage::Ingest, .. }), "{e}");
    assert!(out.join(ERROR_MANIFEST).is_file());
}

#[test]
fn json_and_csv_tables_agree() {
    let data = bundle(150);
    let out = data.path().join("reports");
    run_pipeline(&quick_config(data.path(), &out)).unwrap();
    let sem: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join(SEM_REPORT)).unwrap()).unwrap();
    let mut reader = csv::Reader::from_path(out.join("sem_loadings.csv")).unwrap();
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), SEM_LOADINGS_HEADER.to_vec());
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    let loadings = sem["loadings"].as_array().unwrap();
    assert_eq!(rows.len(), loadings.len());
    for (row, json) in rows.iter().zip(loadings) {
        assert_eq!(&row[0], json["observed_variable"].as_str().unwrap());
        for (col, key) in [(2, "unstandardized"), (3, "standardized"), (4, "se"), (5, "z"), (6, "p")] {
            assert_eq!(row[col], fmt4(json[key].as_f64()), "{key}");
        }
    }
    let mut reader = csv::Reader::from_path(out.join("sem_fit.csv")).unwrap();
    let fit = sem["fit"]["indicators"].as_array().unwrap();
    for (row, json) in reader.records().map(Result::unwrap).zip(fit) {
        for (col, key) in [(1, "fitted"), (2, "predicted"), (3, "residual"), (4, "r2"), (5, "mc"), (6, "mc2")] {
            assert_eq!(row[col], fmt4(json[key].as_f64()), "{key}");
        }
    }
}

#[test]
fn load_resolves_paths_against_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::for_bundle(Path::new("data"), Path::new("out"));
    let path = dir.path().join("config.json");
    std::fs::write(&path, cfg.to_json()).unwrap();
    let loaded = PipelineConfig::load(&path).unwrap();
    assert_eq!(loaded.inputs.survey, dir.path().join("data").join(crate::synth::SURVEY_FILE));
    assert_eq!(loaded.output_dir, dir.path().join("out"));
    assert_eq!(loaded.regressions, cfg.regressions);
}

#[test]
fn minimal_config_takes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    let text = r#"{"schema_version": 1,
        "inputs": {"survey": "s.csv", "diary": "d.csv", "taxonomy": "t.csv"},
        "output_dir": "out"}"#;
    std::fs::write(&path, text).unwrap();
    let cfg = PipelineConfig::load(&path).unwrap();
    assert_eq!(cfg.regressions, RegressionSuite::default());
    assert_eq!(cfg.composite_reverse, vec![crate::sem::LATENT_GENDER_GAP.to_string()]);
}

#[test]
fn config_errors_are_rejected() {
    let data = bundle(3);
    let out = data.path().join("out");
    let base = quick_config(data.path(), &out);
    base.check().unwrap();

    let mut cfg = base.clone();
    cfg.schema_version = 2;
    assert!(cfg.check().is_err());

    let mut cfg = base.clone();
    cfg.regressions.ols[0].models[0].regressors = vec!["shoe_size".into()];
    let e = cfg.check().unwrap_err();
    assert!(e.to_string().contains("shoe_size"), "{e}");

    let mut cfg = base.clone();
    cfg.composite_reverse = vec!["Nope".into()];
    assert!(cfg.check().is_err());

    let mut cfg = base.clone();
    cfg.parallel_analysis.replications = 10;
    assert!(cfg.check().is_err());

    let mut cfg = base;
    cfg.regressions.probit[1].name = cfg.regressions.probit[0].name.clone();
    assert!(cfg.check().unwrap_err().to_string().contains("duplicate"));

    let path = data.path().join("bad.json");
    std::fs::write(&path, r#"{"schema_version": 1, "surprise": true}"#).unwrap();
    assert!(matches!(PipelineConfig::load(&path), Err(PipelineError::ConfigInvalid(_))));
}
