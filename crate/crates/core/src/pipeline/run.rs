use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::bundle::{Metric, ResultsBundle, TracedClusterReport, BUNDLE_SCHEMA_VERSION};
use super::config::{AnalysisConfig, CorpusSource, PipelineConfig};
use crate::analysis::{
    candidate_points, clustering_report, plot_sample, tsne, Annotation, ClusterReport, EmbeddingSample,
    Projection2D, QuotaRule,
};
use crate::checkpoint::Checkpoint;
use crate::data::{
    generate_corpus, generate_lid_corpus, load_conllu, load_lid_paragraphs, load_nli_tsv, write_conllu,
    write_lid_tsv, write_nli_tsv, CorpusSplit, FamilyConfig, LabelSet, LabeledExample, LoadOptions,
    SyntheticLanguageSpec, TaskKind, TokenSequence, Vocabulary, NLI_LABELS, UNIVERSAL_TAGS,
};
use crate::encoder::{mlm_pretrain, EncoderModel};
use crate::error::{Error, Result};
use crate::params::Params;
use crate::rng::{self, streams};
use crate::training::{evaluate, train, Corpora, Regime, RunManifest, Target, TrainingRun};

/// Encoder initialization draws from `[INIT, ENCODER_TAG]`, apart from the
/// head streams.
const ENCODER_TAG: u64 = 3;

/// Split corpora with their vocabulary and name tables.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub corpora: Corpora,
    pub vocabulary: Vocabulary,
    pub label_names: Vec<String>,
    pub language_names: Vec<String>,
}

impl PreparedData {
    /// Training sequences of both corpora, the pre-training input.
    pub fn pretraining_sequences(&self) -> Vec<TokenSequence> {
        self.corpora
            .task
            .train
            .iter()
            .chain(&self.corpora.lid.train)
            .map(|e| e.sequence.clone())
            .collect()
    }

    /// Writes the vocabulary, the full task corpus and the full LID corpus in
    /// the external text formats. Returns the three paths.
    pub fn write_files(&self, dir: &Path, task: TaskKind) -> Result<[PathBuf; 3]> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let languages = LabelSet::new(&self.language_names);
        let all = |s: &CorpusSplit| -> Vec<LabeledExample> { s.parts().concat() };
        let vocab = dir.join("vocab.txt");
        self.vocabulary.write(&vocab)?;
        let task_path = match task {
            TaskKind::TokenTag => {
                let p = dir.join("task.conllu");
                let tags = LabelSet::new(&self.label_names);
                write_conllu(&p, &all(&self.corpora.task), &self.vocabulary, &tags, &languages)?;
                p
            }
            TaskKind::PairInference => {
                let p = dir.join("task.tsv");
                write_nli_tsv(&p, &all(&self.corpora.task), &self.vocabulary, &languages)?;
                p
            }
        };
        let lid = dir.join("lid.tsv");
        write_lid_tsv(&lid, &all(&self.corpora.lid), &self.vocabulary, &languages)?;
        Ok([vocab, task_path, lid])
    }
}

/// Builds and splits the task and LID corpora.
pub fn prepare_data(config: &PipelineConfig) -> Result<PreparedData> {
    let task_kind = config.experiment.task;
    let seed = config.seed;
    let (task, lid, vocabulary, labels, languages) = match &config.corpus {
        CorpusSource::Synthetic {
            n_languages,
            overlap,
            vary_word_order,
            concepts,
            task_per_language,
            lid_per_language,
            min_chars,
        } => {
            let specs = SyntheticLanguageSpec::family(&FamilyConfig {
                n_languages: *n_languages,
                concepts: concepts.clone(),
                overlap: *overlap,
                vary_word_order: *vary_word_order,
                seed,
            })?;
            let task = generate_corpus(
                &specs,
                *task_per_language,
                task_kind,
                rng::derive_seed(seed, &[streams::CORPUS, 0]),
            )?;
            let lid = generate_lid_corpus(
                &specs,
                *lid_per_language,
                *min_chars,
                rng::derive_seed(seed, &[streams::CORPUS, 1]),
            )?;
            let labels = match task_kind {
                TaskKind::TokenTag => SyntheticLanguageSpec::tag_set(),
                TaskKind::PairInference => LabelSet::new(NLI_LABELS),
            };
            let vocab = SyntheticLanguageSpec::vocabulary(&specs);
            (task, lid, vocab, labels, SyntheticLanguageSpec::language_set(&specs))
        }
        CorpusSource::Files {
            task,
            lid,
            vocabulary,
            languages,
            labels,
            filter_unknown,
            min_chars,
        } => {
            let vocab = Vocabulary::read(vocabulary)?;
            let languages = LabelSet::new(languages);
            let labels = match (labels, task_kind) {
                (Some(names), _) => LabelSet::new(names),
                (None, TaskKind::TokenTag) => LabelSet::new(UNIVERSAL_TAGS),
                (None, TaskKind::PairInference) => LabelSet::new(NLI_LABELS),
            };
            let opts = LoadOptions {
                max_len: config.encoder.max_len,
                filter_unknown: *filter_unknown,
                min_chars: *min_chars,
            };
            let task = match task_kind {
                TaskKind::TokenTag => load_conllu(task, &vocab, &labels, &languages, &opts)?,
                TaskKind::PairInference => load_nli_tsv(task, &vocab, &languages, &opts)?,
            };
            let lid = load_lid_paragraphs(lid, &vocab, &languages, &opts)?;
            (task, lid, vocab, labels, languages)
        }
    };
    let task = CorpusSplit::new(&task, config.split_fractions, rng::derive_seed(seed, &[streams::SPLIT, 0]))?;
    let lid = CorpusSplit::new(&lid, config.split_fractions, rng::derive_seed(seed, &[streams::SPLIT, 1]))?;
    Ok(PreparedData {
        corpora: Corpora {
            task,
            lid,
            n_task_classes: labels.len(),
            n_languages: languages.len(),
        },
        vocabulary,
        label_names: labels.names().to_vec(),
        language_names: languages.names().to_vec(),
    })
}

/// Loads the configured checkpoint, or initializes and pre-trains an encoder.
pub fn pretrained_encoder(config: &PipelineConfig, data: &PreparedData) -> Result<EncoderModel> {
    if let Some(path) = &config.pretrain.checkpoint {
        let encoder = Checkpoint::load(path)?.encoder;
        if encoder.config.vocab_size != data.vocabulary.len() {
            return Err(Error::invalid(format!(
                "checkpoint vocabulary size {} does not match corpus vocabulary {}",
                encoder.config.vocab_size,
                data.vocabulary.len()
            )));
        }
        return Ok(encoder);
    }
    let mut cfg = config.encoder.clone();
    cfg.vocab_size = data.vocabulary.len();
    let model = EncoderModel::init(cfg, &mut rng::stream(config.seed, &[streams::INIT, ENCODER_TAG]))?;
    Ok(mlm_pretrain(model, &data.pretraining_sequences(), &config.pretrain.mlm())?.model)
}

/// Cluster reports and projections of one encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOutput {
    pub clusters: BTreeMap<String, ClusterReport>,
    pub projections: BTreeMap<String, Projection2D>,
}

/// Samples the task and LID test splits, clusters the encodings against
/// their annotations and projects each sample to two dimensions.
pub fn analyze(
    encoder: &EncoderModel,
    data: &PreparedData,
    task: TaskKind,
    settings: &AnalysisConfig,
    seed: u64,
) -> Result<AnalysisOutput> {
    let granularity = crate::training::ExperimentConfig::new(Regime::FrozenProbe, task).granularity();
    let task_test = &data.corpora.task.test;
    let lid_test = &data.corpora.lid.test;
    let samples = [
        (
            "task",
            task_test,
            QuotaRule::PerLabelLanguage(settings.task_quota),
            &[Annotation::Label, Annotation::Language][..],
        ),
        ("lid", lid_test, QuotaRule::PerLanguage(settings.lid_quota), &[Annotation::Language][..]),
    ];
    let mut clusters = BTreeMap::new();
    let mut projections = BTreeMap::new();
    for (i, (name, examples, rule, annotations)) in samples.into_iter().enumerate() {
        let points = plot_sample(&candidate_points(examples, granularity), rule, rng::derive_seed(seed, &[i as u64]));
        let sample = EmbeddingSample::embed(
            encoder,
            examples,
            &points,
            data.label_names.clone(),
            data.language_names.clone(),
        )?;
        for &a in annotations {
            let key = format!(
                "{name}/{}",
                match a {
                    Annotation::Label => "labels",
                    Annotation::Language => "languages",
                }
            );
            let report = clustering_report(
                sample.vectors.view(),
                &sample.annotation(a)?,
                settings.kmeans_runs,
                rng::derive_seed(seed, &[i as u64, a as u64]),
            )?;
            clusters.insert(key, report);
        }
        if settings.projections {
            let result = tsne(sample.vectors.view(), &settings.tsne)?;
            projections.insert(
                name.to_string(),
                Projection2D::from_embedding(&sample, &result.embedding, settings.tsne.clone())?,
            );
        }
    }
    Ok(AnalysisOutput { clusters, projections })
}

/// Task and LID metrics of a finished run, keyed as in [`ResultsBundle`].
pub fn run_metrics(run: &TrainingRun, data: &PreparedData) -> Result<BTreeMap<String, f64>> {
    let ck = &run.checkpoint;
    let task_head = ck
        .task_head
        .as_ref()
        .ok_or_else(|| Error::invalid("run produced no task head"))?;
    let test = &data.corpora.task.test;
    let k = data.corpora.n_task_classes;
    let pivot = run.config.pivot;
    let mut out = BTreeMap::new();
    out.insert("task_f1/overall".into(), evaluate(&ck.encoder, task_head, test, Target::Task, k)?);
    let others: Vec<LabeledExample> = test.iter().filter(|e| e.language != pivot).cloned().collect();
    if !others.is_empty() {
        out.insert(
            "task_f1/cross_lingual".into(),
            evaluate(&ck.encoder, task_head, &others, Target::Task, k)?,
        );
    }
    for (l, name) in data.language_names.iter().enumerate() {
        let part: Vec<LabeledExample> = test.iter().filter(|e| e.language == l).cloned().collect();
        if !part.is_empty() {
            out.insert(format!("task_f1/{name}"), evaluate(&ck.encoder, task_head, &part, Target::Task, k)?);
        }
    }
    let probe = &run.language_probe;
    out.insert(
        "lid_f1/task_test".into(),
        evaluate(
            &ck.encoder,
            &probe.head,
            test,
            Target::Language(run.config.granularity()),
            data.corpora.n_languages,
        )?,
    );
    out.insert("lid_f1/lid_test".into(), probe.test_f1);
    Ok(out)
}

fn write_output(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(path, e))
}

/// Runs corpus preparation, pre-training (or checkpoint loading), regime
/// training with language-probe retraining, and analysis.
///
/// When `output_dir` is set, each stage's artifacts are written as soon as the
/// stage finishes, so a later failure leaves them for inspection: the
/// pre-trained encoder (`pretrained.json`), the trained checkpoint
/// (`checkpoint.json`), the run manifest (`manifest.json`) and the bundle
/// (`bundle.json`). Errors carry the name of the failing stage.
pub fn run_experiment(config: &PipelineConfig) -> Result<ResultsBundle> {
    config.check_inputs().map_err(|e| e.in_stage("config"))?;
    config.experiment.validate().map_err(|e| e.in_stage("config"))?;
    let out_dir = config.output_dir.as_deref();

    let data = prepare_data(config).map_err(|e| e.in_stage("corpus"))?;

    let encoder = pretrained_encoder(config, &data).map_err(|e| e.in_stage("pretrain"))?;
    if let Some(dir) = out_dir {
        let json = Checkpoint::encoder_only(encoder.clone()).to_json()?;
        write_output(dir, "pretrained.json", &json).map_err(|e| e.in_stage("pretrain"))?;
    }

    let run = train(&encoder, &data.corpora, &config.experiment).map_err(|e| e.in_stage("train"))?;
    let checkpoint_path = out_dir.map(|d| d.join("checkpoint.json").display().to_string());
    if let Some(dir) = out_dir {
        let json = run.checkpoint.to_json()?;
        write_output(dir, "checkpoint.json", &json).map_err(|e| e.in_stage("train"))?;
    }
    let manifest = RunManifest::new(&run, encoder.fingerprint(), checkpoint_path);
    if let Some(dir) = out_dir {
        write_output(dir, "manifest.json", &manifest.to_json()).map_err(|e| e.in_stage("train"))?;
    }

    let metrics = run_metrics(&run, &data).map_err(|e| e.in_stage("probe"))?;

    let analysis = analyze(
        &run.checkpoint.encoder,
        &data,
        config.experiment.task,
        &config.analysis,
        config.seed,
    )
    .map_err(|e| e.in_stage("analysis"))?;

    let trace = |value: f64| Metric {
        value,
        run: manifest.id.clone(),
    };
    let mut metrics: BTreeMap<String, Metric> = metrics.into_iter().map(|(k, v)| (k, trace(v))).collect();
    for (k, r) in &analysis.clusters {
        metrics.insert(format!("v_measure/{k}"), trace(r.mean));
    }
    let clusters = analysis
        .clusters
        .into_iter()
        .map(|(k, report)| {
            (
                k,
                TracedClusterReport {
                    report,
                    run: manifest.id.clone(),
                },
            )
        })
        .collect();
    let column = match config.experiment.regime {
        Regime::FrozenProbe => "initial".to_string(),
        r => r.name().to_string(),
    };
    let bundle = ResultsBundle {
        schema_version: BUNDLE_SCHEMA_VERSION,
        column,
        manifest,
        pipeline: config.clone(),
        label_names: data.label_names,
        language_names: data.language_names,
        metrics,
        clusters,
        projections: analysis.projections,
    };
    if let Some(dir) = out_dir {
        write_output(dir, "bundle.json", &bundle.to_json()).map_err(|e| e.in_stage("export"))?;
    }
    Ok(bundle)
}
