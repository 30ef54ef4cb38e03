//! Command-line front end. Every subcommand reads the same TOML pipeline
//! config; experiment fields can be overridden with flags.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polyprobe::checkpoint::Checkpoint;
use polyprobe::encoder::EncoderModel;
use polyprobe::params::Params;
use polyprobe::pipeline::{
    analyze, compare_runs, export_plot_data, prepare_data, pretrained_encoder, run_experiment, PipelineConfig,
    PlotColor, PlotDataset, ResultsBundle,
};
use polyprobe::training::{random_search, retrain_language_probe, train, ExperimentConfig, RunManifest, SearchGrid};
use polyprobe::{Error, Result};

#[derive(Parser)]
#[command(name = "polyprobe", version, about = "Language-neutrality experiments on a toy multilingual encoder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured corpora as vocab.txt, task.conllu/task.tsv and lid.tsv.
    GenCorpus {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pre-train an encoder with masked-token prediction and save it.
    Pretrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one regime; writes checkpoint.json and manifest.json.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrain a language probe on a saved encoder and report its F1.
    ProbeLid {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Cluster reports and projections of a saved encoder, as JSON.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random search over the hyperparameter grid, ranked by development F1.
    Hpsearch {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        /// TOML file with a custom grid.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full pipeline: corpus, pre-training, training, probing and analysis.
    Run {
        #[command(flatten)]
        common: Common,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one projection of a bundle as CSV.
    Export {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, value_enum)]
        dataset: Dataset,
        #[arg(long, value_enum, default_value = "languages")]
        color: Color,
        #[arg(long)]
        out: PathBuf,
    },
    /// Metric differences of later bundles against the first.
    Compare {
        #[arg(required = true, num_args = 2..)]
        bundles: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Dataset {
    Task,
    Lid,
}

#[derive(Clone, Copy, ValueEnum)]
enum Color {
    Labels,
    Languages,
}

#[derive(Args)]
struct Common {
    /// Pipeline config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Start from this encoder instead of pre-training.
    #[arg(long)]
    encoder: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

/// Flags mirroring the experiment fields of the config.
#[derive(Args, Default)]
struct Overrides {
    /// One of the named presets; replaces the whole experiment section.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    regime: Option<String>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    w: Option<f64>,
    #[arg(long)]
    language_term: Option<String>,
    #[arg(long)]
    init_std: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    head_lr: Option<f64>,
    #[arg(long)]
    encoder_lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    pivot: Option<usize>,
    #[arg(long)]
    output_dropout: Option<f64>,
}

impl Overrides {
    fn apply(&self, base: &ExperimentConfig) -> Result<ExperimentConfig> {
        let base = match &self.preset {
            Some(name) => ExperimentConfig::preset(name)?,
            None => base.clone(),
        };
        let mut table = toml::Table::try_from(&base).map_err(|e| Error::InvalidInput(e.to_string()))?;
        if self.regime.is_some() {
            for k in ["lambda", "w", "language_term"] {
                table.remove(k);
            }
        }
        let mut set = |k: &str, v: Option<toml::Value>| {
            if let Some(v) = v {
                table.insert(k.to_string(), v);
            }
        };
        set("regime", self.regime.clone().map(Into::into));
        set("task", self.task.clone().map(Into::into));
        set("lambda", self.lambda.map(Into::into));
        set("w", self.w.map(Into::into));
        set("language_term", self.language_term.clone().map(Into::into));
        set("init_std", self.init_std.map(Into::into));
        set("batch_size", self.batch_size.map(|v| (v as i64).into()));
        set("head_lr", self.head_lr.map(Into::into));
        set("encoder_lr", self.encoder_lr.map(Into::into));
        set("epochs", self.epochs.map(|v| (v as i64).into()));
        set("seed", self.seed.map(|v| (v as i64).into()));
        set("pivot", self.pivot.map(|v| (v as i64).into()));
        set("output_dropout", self.output_dropout.map(Into::into));
        table
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidInput(format!("experiment flags: {}", e.message())))
    }
}

impl Common {
    fn load(&self) -> Result<PipelineConfig> {
        let mut config = PipelineConfig::load(&self.config).map_err(|e| e.in_stage("config"))?;
        config.experiment = self.overrides.apply(&config.experiment).map_err(|e| e.in_stage("config"))?;
        if let Some(p) = &self.encoder {
            config.pretrain.checkpoint = Some(p.clone());
        }
        config.check_inputs().map_err(|e| e.in_stage("config"))?;
        Ok(config)
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.into(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn load_encoder(path: &Path) -> Result<EncoderModel> {
    Checkpoint::load(path).map(|c| c.encoder).map_err(|e| e.in_stage("checkpoint"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenCorpus { common, out } => {
            let config = common.load()?;
            let data = prepare_data(&config).map_err(|e| e.in_stage("corpus"))?;
            let paths = data
                .write_files(&out, config.experiment.task)
                .map_err(|e| e.in_stage("corpus"))?;
            for p in paths {
                println!("{}", p.display());
            }
        }
        Command::Pretrain { common, out } => {
            let mut config = common.load()?;
            config.pretrain.checkpoint = None;
            let data = prepare_data(&config).map_err(|e| e.in_stage("corpus"))?;
            let encoder = pretrained_encoder(&config, &data).map_err(|e| e.in_stage("pretrain"))?;
            write(&out, &Checkpoint::encoder_only(encoder).to_json()?).map_err(|e| e.in_stage("pretrain"))?;
            println!("{}", out.display());
        }
        Command::Train { common, out } => {
            let config = common.load()?;
            let data = prepare_data(&config).map_err(|e| e.in_stage("corpus"))?;
            let encoder = pretrained_encoder(&config, &data).map_err(|e| e.in_stage("pretrain"))?;
            let run = train(&encoder, &data.corpora, &config.experiment).map_err(|e| e.in_stage("train"))?;
            let ck = out.join("checkpoint.json");
            write(&ck, &run.checkpoint.to_json()?).map_err(|e| e.in_stage("train"))?;
            let manifest = RunManifest::new(&run, encoder.fingerprint(), Some(ck.display().to_string()));
            write(&out.join("manifest.json"), &manifest.to_json()).map_err(|e| e.in_stage("train"))?;
            println!(
                "run {} selected epoch {} val {:.1} lid {:.1}",
                manifest.id,
                run.selected_epoch + 1,
                100.0 * run.val_scores[run.selected_epoch],
                100.0 * run.language_probe.test_f1
            );
        }
        Command::ProbeLid { common, checkpoint } => {
            let config = common.load()?;
            let encoder = load_encoder(&checkpoint)?;
            let data = prepare_data(&config).map_err(|e| e.in_stage("corpus"))?;
            let probe = retrain_language_probe(&encoder, &data.corpora.lid, data.corpora.n_languages, &config.experiment)
                .map_err(|e| e.in_stage("probe"))?;
            println!(
                "lid macro F1 {:.1} (epoch {})",
                100.0 * probe.test_f1,
                probe.selected_epoch + 1
            );
        }
        Command::Analyze { common, checkpoint, out } => {
            let config = common.load()?;
            let encoder = load_encoder(&checkpoint)?;
            let data = prepare_data(&config).map_err(|e| e.in_stage("corpus"))?;
            let analysis = analyze(&encoder, &data, config.experiment.task, &config.analysis, config.seed)
                .map_err(|e| e.in_stage("analysis"))?;
            let json = serde_json::json!({
                "clusters": analysis.clusters,
                "projections": analysis.projections,
            });
            write(&out, &serde_json::to_string_pretty(&json)?).map_err(|e| e.in_stage("analysis"))?;
            for (k, r) in &analysis.clusters {
                println!("{k:<18} V {:.1}", 100.0 * r.mean);
            }
        }
        Command::Hpsearch {
            common,
            samples,
            grid,
            out,
        } => {
            let config = common.load()?;
            let grid = match grid {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::Io { path: p, source: e })?;
                    toml::from_str(&text).map_err(|e| Error::InvalidInput(format!("grid: {e}")))?
                }
                None => SearchGrid::default(),
            };
            let data = prepare_data(&config).map_err(|e| e.in_stage("corpus"))?;
            let encoder = pretrained_encoder(&config, &data).map_err(|e| e.in_stage("pretrain"))?;
            let results = random_search(&encoder, &data.corpora, &config.experiment, &grid, samples, config.seed)
                .map_err(|e| e.in_stage("search"))?;
            for r in &results {
                println!(
                    "sample {:>3} dev {:>5.1}  {}",
                    r.sample,
                    100.0 * r.dev_score,
                    toml::to_string(&r.config).unwrap_or_default().replace('\n', " ")
                );
            }
            if let Some(out) = out {
                write(&out, &serde_json::to_string_pretty(&results)?).map_err(|e| e.in_stage("search"))?;
            }
        }
        Command::Run { common, out } => {
            let mut config = common.load()?;
            if out.is_some() {
                config.output_dir = out;
            }
            let bundle = run_experiment(&config)?;
            print!("{}", bundle.summary());
        }
        Command::Export {
            bundle,
            dataset,
            color,
            out,
        } => {
            let bundle = ResultsBundle::load(&bundle).map_err(|e| e.in_stage("export"))?;
            let dataset = match dataset {
                Dataset::Task => PlotDataset::Task,
                Dataset::Lid => PlotDataset::Lid,
            };
            let color = match color {
                Color::Labels => PlotColor::Labels,
                Color::Languages => PlotColor::Languages,
            };
            let rows = export_plot_data(&bundle, color, dataset, &out).map_err(|e| e.in_stage("export"))?;
            println!("{rows} rows -> {}", out.display());
        }
        Command::Compare { bundles, json } => {
            let bundles = bundles
                .iter()
                .map(ResultsBundle::load)
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.in_stage("compare"))?;
            let table = compare_runs(&bundles).map_err(|e| e.in_stage("compare"))?;
            if json {
                println!("{}", serde_json::to_string_pretty(&table)?);
            } else {
                print!("{}", table.to_text());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
