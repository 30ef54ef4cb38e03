use polyprobe::analysis::{candidate_points, plot_sample, QuotaRule, TsneConfig};
use polyprobe::data::{Granularity, TaskKind};
use polyprobe::pipeline::{
    compare_runs, export_plot_data, run_experiment, AnalysisConfig, CorpusSource, Delta, PipelineConfig,
    PlotColor, PlotDataset, ResultsBundle,
};
use polyprobe::training::{ExperimentConfig, Regime};
use polyprobe::Error;

fn small(regime: Regime) -> PipelineConfig {
    let mut c = PipelineConfig::new(ExperimentConfig::new(regime, TaskKind::TokenTag));
    c.corpus = CorpusSource::Synthetic {
        n_languages: 3,
        overlap: 0.9,
        vary_word_order: true,
        concepts: Default::default(),
        task_per_language: 60,
        lid_per_language: 30,
        min_chars: 60,
    };
    c.encoder.d_model = 8;
    c.encoder.d_ff = 16;
    c.encoder.n_heads = 2;
    c.pretrain.steps = 30;
    c.experiment.epochs = 2;
    c.experiment.batch_size = 8;
    c.experiment.encoder_lr = 1e-3;
    c.analysis = AnalysisConfig {
        task_quota: 3,
        lid_quota: 10,
        kmeans_runs: 2,
        projections: true,
        tsne: TsneConfig {
            perplexity: 5.0,
            iterations: 60,
            exaggeration_iterations: 20,
            ..TsneConfig::default()
        },
    };
    c
}

#[test]
fn toml_round_trip_echoes_defaults() {
    let text = r#"
        seed = 4
        [experiment]
        regime = "grad-reversal"
        lambda = 0.1
        task = "token-tag"
    "#;
    let c = PipelineConfig::from_toml(text).unwrap();
    assert_eq!(c.seed, 4);
    assert_eq!(c.experiment.regime, Regime::GradReversal { lambda: 0.1 });
    let echoed = c.to_toml();
    assert!(echoed.contains("task_quota"));
    assert_eq!(PipelineConfig::from_toml(&echoed).unwrap(), c);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let text = "bogus = 1\n[experiment]\nregime = \"finetune\"\ntask = \"token-tag\"\n";
    assert!(PipelineConfig::from_toml(text).is_err());
    let text = "[experiment]\nregime = \"finetune\"\ntask = \"token-tag\"\n[pretrain]\nstep = 3\n";
    assert!(PipelineConfig::from_toml(text).is_err());
}

#[test]
fn missing_input_file_fails_in_config_stage() {
    let mut c = small(Regime::FrozenProbe);
    c.pretrain.checkpoint = Some("/nonexistent/encoder.json".into());
    match run_experiment(&c) {
        Err(Error::Stage { stage, .. }) => assert_eq!(stage, "config"),
        other => panic!("expected a stage error, got {other:?}"),
    }
}

#[test]
fn stage_failure_is_tagged_and_keeps_earlier_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(Regime::Finetune);
    c.output_dir = Some(dir.path().to_path_buf());
    // The pivot language does not exist, so training fails after pre-training.
    c.experiment.pivot = 7;
    match run_experiment(&c) {
        Err(Error::Stage { stage, .. }) => assert_eq!(stage, "train"),
        other => panic!("expected a stage error, got {other:?}"),
    }
    assert!(dir.path().join("pretrained.json").exists());
    assert!(!dir.path().join("bundle.json").exists());
}

#[test]
fn frozen_probe_bundle_fills_initial_column_without_encoder_change() {
    let b = run_experiment(&small(Regime::FrozenProbe)).unwrap();
    assert_eq!(b.column, "initial");
    assert_eq!(b.manifest.initial_encoder, b.manifest.final_encoder);
    assert!(b.manifest.verify());
    for m in b.metrics.values() {
        assert_eq!(m.run, b.manifest.id);
        assert!((0.0..=1.0).contains(&m.value));
    }
    for key in ["task_f1/overall", "task_f1/cross_lingual", "lid_f1/task_test", "lid_f1/lid_test"] {
        assert!(b.metrics.contains_key(key), "{key}");
    }
    assert_eq!(b.clusters.len(), 3);
    assert!(b.clusters.values().all(|c| c.run == b.manifest.id));
}

#[test]
fn finetune_bundle_has_both_lid_rows_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(Regime::Finetune);
    c.output_dir = Some(dir.path().to_path_buf());
    let a = run_experiment(&c).unwrap();
    let bytes = std::fs::read(dir.path().join("bundle.json")).unwrap();
    assert_eq!(a.column, "finetune");
    assert_ne!(a.manifest.initial_encoder, a.manifest.final_encoder);
    assert!(a.metric("lid_f1/task_test").is_some() && a.metric("lid_f1/lid_test").is_some());

    let b = run_experiment(&c).unwrap();
    assert_eq!(bytes, std::fs::read(dir.path().join("bundle.json")).unwrap());
    assert_eq!(a, b);
    assert_eq!(ResultsBundle::load(dir.path().join("bundle.json")).unwrap(), a);
    for name in ["pretrained.json", "checkpoint.json", "manifest.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn compare_self_gives_zero_deltas_and_gaps_for_missing_metrics() {
    let a = run_experiment(&small(Regime::FrozenProbe)).unwrap();
    let table = compare_runs(&[a.clone(), a.clone()]).unwrap();
    for row in &table.rows {
        match &row.deltas[0] {
            Delta::Value { delta, .. } => assert_eq!(*delta, 0.0),
            Delta::Gap => panic!("unexpected gap for {}", row.metric),
        }
    }
    let mut b = a.clone();
    b.metrics.remove("lid_f1/lid_test");
    let table = compare_runs(&[a.clone(), b]).unwrap();
    assert_eq!(table.row("lid_f1/lid_test").unwrap().deltas[0], Delta::Gap);
    assert!(table.to_text().contains("gap"));

    let mut c = a.clone();
    c.language_names.pop();
    assert!(compare_runs(&[a, c]).is_err());
}

#[test]
fn export_writes_one_row_per_sampled_point() {
    let config = small(Regime::FrozenProbe);
    let b = run_experiment(&config).unwrap();
    let data = polyprobe::pipeline::prepare_data(&config).unwrap();
    let test = &data.corpora.task.test;
    let sampled = plot_sample(&candidate_points(test, Granularity::Token), QuotaRule::PerLabelLanguage(3), 99);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("task.csv");
    let rows = export_plot_data(&b, PlotColor::Labels, PlotDataset::Task, &p).unwrap();
    assert_eq!(rows, sampled.len());
    let first = std::fs::read(&p).unwrap();
    assert_eq!(String::from_utf8_lossy(&first).lines().count(), rows + 1);
    export_plot_data(&b, PlotColor::Labels, PlotDataset::Task, &p).unwrap();
    assert_eq!(first, std::fs::read(&p).unwrap());

    let lid = dir.path().join("lid.csv");
    assert_eq!(export_plot_data(&b, PlotColor::Languages, PlotDataset::Lid, &lid).unwrap(), 30);
    assert!(export_plot_data(&b, PlotColor::Labels, PlotDataset::Lid, &lid).is_err());

    let mut empty = b.clone();
    empty.projections.clear();
    assert!(export_plot_data(&empty, PlotColor::Labels, PlotDataset::Task, &p).is_err());
}

#[test]
fn files_source_reproduces_synthetic_run() {
    let dir = tempfile::tempdir().unwrap();
    let synth = small(Regime::FrozenProbe);
    let data = polyprobe::pipeline::prepare_data(&synth).unwrap();
    let [vocab, task, lid] = data.write_files(dir.path(), TaskKind::TokenTag).unwrap();
    let mut files = synth.clone();
    files.corpus = CorpusSource::Files {
        task,
        lid,
        vocabulary: vocab,
        languages: data.language_names.clone(),
        labels: None,
        filter_unknown: true,
        min_chars: 0,
    };
    let loaded = polyprobe::pipeline::prepare_data(&files).unwrap();
    assert_eq!(loaded.vocabulary, data.vocabulary);
    assert_eq!(loaded.corpora.task.parts().map(<[_]>::len), data.corpora.task.parts().map(<[_]>::len));
    assert_eq!(loaded.corpora.lid.parts().map(<[_]>::len), data.corpora.lid.parts().map(<[_]>::len));
}
