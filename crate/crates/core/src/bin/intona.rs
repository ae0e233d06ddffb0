//! Command-line entry point for the intonation-pattern dialect
//! identification pipeline.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use intona::contour::write_contours_tsv;
use intona::error::{Error, Result};
use intona::mining::{write_dictionary_json, write_instances_tsv, MiningConfig, SupportSpec};
use intona::nn::checkpoint::{load_checkpoint, save_checkpoint};
use intona::nn::model::{Model, ModelKind, ModelSpec};
use intona::nn::train::{predict_proba, train, TrainConfig};
use intona::pipeline::{
    aggregate_utterance_votes, analyze_utterances, build_datasets, dialect_labels,
    locate_all_instances, mine_dictionaries, read_manifest, run_pipeline, split_train_val,
    PipelineConfig, Split, TestMode, DEFAULT_TRAIN_FRACTION,
};
use intona::pitch::write_track_tsv;
use intona::synth::{generate_corpus, SynthConfig};

#[derive(Parser)]
#[command(
    name = "intona",
    about = "Dialect identification from mined intonation patterns",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CommonArgs {
    /// Dataset manifest: TSV `path<TAB>dialect<TAB>split`, no header.
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Master random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of pitch clusters per utterance.
    #[arg(long, default_value_t = intona::contour::DEFAULT_K)]
    k: usize,
    /// Minimum pattern support: an integer count or a fraction of the DB.
    #[arg(long)]
    min_support: Option<String>,
    /// Minimum pattern length in symbols.
    #[arg(long, default_value_t = intona::mining::DEFAULT_MIN_LEN)]
    min_len: usize,
}

impl CommonArgs {
    fn mining(&self) -> Result<MiningConfig> {
        let min_support = match &self.min_support {
            None => SupportSpec::default(),
            Some(raw) => parse_support(raw)?,
        };
        Ok(MiningConfig {
            min_support,
            min_len: self.min_len,
            k: self.k,
        })
    }
}

fn parse_support(raw: &str) -> Result<SupportSpec> {
    if let Ok(n) = raw.parse::<u32>() {
        return Ok(SupportSpec::Absolute(n));
    }
    match raw.parse::<f64>() {
        Ok(f) if f > 0.0 && f < 1.0 => Ok(SupportSpec::Fraction(f)),
        _ => Err(Error::InvalidConfig(format!(
            "--min-support must be a positive integer or a fraction in (0,1), got '{raw}'"
        ))),
    }
}

#[derive(Args)]
struct ModelArgs {
    /// Classifier architecture.
    #[arg(long, default_value = "resblstm")]
    model: String,
    /// Mini-batch size (32, 40, 80, or 128).
    #[arg(long)]
    batch: Option<usize>,
    /// Maximum training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Early-stopping patience in epochs (2 or 5).
    #[arg(long)]
    patience: Option<usize>,
    /// Test-segment construction: `patterns` or `random-crops`.
    #[arg(long, default_value = "patterns")]
    test_mode: String,
}

impl ModelArgs {
    fn kind(&self) -> Result<ModelKind> {
        self.model.parse()
    }
    fn test_mode(&self) -> Result<TestMode> {
        self.test_mode.parse()
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Extract pitch tracks for every manifest entry.
    Pitch(CommonArgs),
    /// Approximate intonation contours for every manifest entry.
    Contour(CommonArgs),
    /// Mine per-dialect pattern dictionaries from the training split.
    Mine(CommonArgs),
    /// Locate pattern occurrences and cut the audio segments.
    Cut(CommonArgs),
    /// Compute normalized log-mel features for all pattern segments.
    Featurize {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Train a classifier on pattern segments and save a checkpoint.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Evaluate a saved checkpoint on the manifest's test split.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Path to a checkpoint produced by `train` or `run`.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Run the full pipeline and write a JSON report.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Generate the synthetic three-dialect evaluation corpus.
    Synth {
        /// Output directory for audio and manifest.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Utterances per dialect.
        #[arg(long, default_value_t = 120)]
        utterances: usize,
        /// Training-split utterances per dialect.
        #[arg(long, default_value_t = 96)]
        train_count: usize,
    },
}

fn ensure_dir(dir: &PathBuf) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn pipeline_config(common: &CommonArgs, model: &ModelArgs) -> Result<PipelineConfig> {
    Ok(PipelineConfig {
        seed: common.seed,
        k: common.k,
        mining: common.mining()?,
        model_kind: model.kind()?,
        batch_size: model.batch,
        epochs: model.epochs,
        patience: model.patience,
        test_mode: model.test_mode()?,
    })
}

fn cmd_pitch(common: &CommonArgs) -> Result<()> {
    ensure_dir(&common.out)?;
    let entries = read_manifest(&common.manifest)?;
    let utterances = analyze_utterances(&entries, common.k)?;
    for u in &utterances {
        write_track_tsv(&u.track, common.out.join(format!("{}.tsv", u.source_id)))?;
    }
    eprintln!("wrote {} pitch tracks to {}", utterances.len(), common.out.display());
    Ok(())
}

fn cmd_contour(common: &CommonArgs) -> Result<()> {
    ensure_dir(&common.out)?;
    let entries = read_manifest(&common.manifest)?;
    let utterances = analyze_utterances(&entries, common.k)?;
    let contours: Vec<_> = utterances
        .iter()
        .flat_map(|u| u.contours.iter().cloned())
        .collect();
    let path = common.out.join("contours.tsv");
    write_contours_tsv(&contours, &path)?;
    eprintln!("wrote {} contours to {}", contours.len(), path.display());
    Ok(())
}

fn cmd_mine(common: &CommonArgs) -> Result<()> {
    ensure_dir(&common.out)?;
    let entries = read_manifest(&common.manifest)?;
    let utterances = analyze_utterances(&entries, common.k)?;
    let dialects = dialect_labels(&utterances);
    let dictionaries = mine_dictionaries(&utterances, &dialects, &common.mining()?)?;
    for dict in &dictionaries {
        let path = common.out.join(format!("dictionary_{}.json", dict.dialect));
        write_dictionary_json(dict, &path)?;
        eprintln!("{}: {} patterns", dict.dialect, dict.patterns.len());
    }
    Ok(())
}

fn cmd_cut(common: &CommonArgs) -> Result<()> {
    ensure_dir(&common.out)?;
    let entries = read_manifest(&common.manifest)?;
    let utterances = analyze_utterances(&entries, common.k)?;
    let dialects = dialect_labels(&utterances);
    let dictionaries = mine_dictionaries(&utterances, &dialects, &common.mining()?)?;
    let instances = locate_all_instances(&utterances, &dictionaries);
    write_instances_tsv(&instances, common.out.join("instances.tsv"))?;
    let seg_dir = common.out.join("segments");
    ensure_dir(&seg_dir)?;
    for u in &utterances {
        let mine: Vec<_> = instances
            .iter()
            .filter(|i| i.source_id == u.source_id)
            .cloned()
            .collect();
        let cuts = intona::mining::cut_segments(&u.clip, &mine)?;
        for (i, cut) in cuts.iter().enumerate() {
            intona::signal::write_wav(cut, seg_dir.join(format!("{}_{i}.wav", u.source_id)))?;
        }
    }
    eprintln!("cut {} pattern segments", instances.len());
    Ok(())
}

fn prepared(
    common: &CommonArgs,
    model: &ModelArgs,
    norm: Option<&intona::features::NormStats>,
) -> Result<(
    Vec<intona::pipeline::Utterance>,
    Vec<String>,
    intona::pipeline::BuiltDatasets,
)> {
    let entries = read_manifest(&common.manifest)?;
    let utterances = analyze_utterances(&entries, common.k)?;
    let dialects = dialect_labels(&utterances);
    let dictionaries = mine_dictionaries(&utterances, &dialects, &common.mining()?)?;
    let instances = locate_all_instances(&utterances, &dictionaries);
    let built = build_datasets(
        &utterances,
        &instances,
        &dialects,
        model.test_mode()?,
        common.seed,
        None,
        norm,
    )?;
    Ok((utterances, dialects, built))
}

fn cmd_featurize(common: &CommonArgs, model: &ModelArgs) -> Result<()> {
    ensure_dir(&common.out)?;
    let (_, dialects, built) = prepared(common, model, None)?;
    let to_records = |set: &intona::pipeline::LabeledFeatures| {
        set.data
            .features
            .iter()
            .zip(&set.data.labels)
            .map(|(f, &l)| {
                (
                    l as u8,
                    intona::features::MelSpectrogram {
                        values: f.clone(),
                        n_mels: set.data.n_mels,
                        n_frames: set.data.t,
                        sample_rate: intona::signal::CANONICAL_SAMPLE_RATE,
                        label: Some(dialects[l].clone()),
                        padded: false,
                    },
                )
            })
            .collect::<Vec<_>>()
    };
    intona::features::write_archive(&to_records(&built.train), common.out.join("features_train.imel"))?;
    intona::features::write_archive(&to_records(&built.test), common.out.join("features_test.imel"))?;
    eprintln!(
        "featurized {} train / {} test segments",
        built.train.data.len(),
        built.test.data.len()
    );
    Ok(())
}

fn cmd_train(common: &CommonArgs, model_args: &ModelArgs) -> Result<()> {
    ensure_dir(&common.out)?;
    let kind = model_args.kind()?;
    let (_, dialects, built) = prepared(common, model_args, None)?;
    let (train_idx, val_idx) =
        split_train_val(&built.train.data.labels, DEFAULT_TRAIN_FRACTION, common.seed)?;
    let pick = |idx: &[usize]| {
        let mut out = intona::nn::train::Dataset {
            n_mels: built.train.data.n_mels,
            t: built.train.data.t,
            ..Default::default()
        };
        for &i in idx {
            out.push(built.train.data.features[i].clone(), built.train.data.labels[i]);
        }
        out
    };
    let spec = match kind {
        ModelKind::Crnn => ModelSpec::crnn(dialects.len(), common.seed),
        ModelKind::ResBlstm => ModelSpec::res_blstm(dialects.len(), common.seed),
    };
    let mut cfg = TrainConfig::for_kind(kind, common.seed);
    if let Some(b) = model_args.batch {
        cfg.batch_size = b;
    }
    if let Some(e) = model_args.epochs {
        cfg.epochs = e;
    }
    if let Some(p) = model_args.patience {
        cfg.patience = p;
    }
    let mut model = Model::<f32>::new(spec)?;
    let report = train(&mut model, &pick(&train_idx), &pick(&val_idx), &cfg)?;
    save_checkpoint(&common.out.join("model.iadi"), &mut model, Some(&built.norm))?;
    let json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    let path = common.out.join("training.json");
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    eprintln!(
        "best validation accuracy {:.4} (epoch {:?})",
        report.best_val_accuracy, report.best_epoch
    );
    Ok(())
}

fn cmd_eval(common: &CommonArgs, model_args: &ModelArgs, checkpoint: &PathBuf) -> Result<()> {
    ensure_dir(&common.out)?;
    let (mut model, norm) = load_checkpoint(checkpoint)?;
    let (utterances, dialects, built) = prepared(common, model_args, norm.as_ref())?;
    if model.spec.n_classes != dialects.len() {
        return Err(Error::Model(format!(
            "checkpoint has {} classes but the manifest has {} dialects",
            model.spec.n_classes,
            dialects.len()
        )));
    }
    let probs = predict_proba(&mut model, &built.test.data, 32);
    let preds: Vec<usize> = probs
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap()
        })
        .collect();
    let instance_metrics = intona::metrics::evaluate(&built.test.data.labels, &preds, &dialects)?;
    let votes = aggregate_utterance_votes(&built.test.sources, &probs);
    let mut utt_labels = Vec::new();
    let mut utt_preds = Vec::new();
    for u in utterances.iter().filter(|u| u.split == Split::Test) {
        if let Some(&p) = votes.get(&u.source_id) {
            utt_labels.push(dialects.iter().position(|d| d == &u.dialect).unwrap());
            utt_preds.push(p);
        }
    }
    let utterance_metrics = intona::metrics::evaluate(&utt_labels, &utt_preds, &dialects)?;
    let out = serde_json::json!({
        "instance_metrics": instance_metrics,
        "utterance_metrics": utterance_metrics,
    });
    let path = common.out.join("eval.json");
    std::fs::write(&path, serde_json::to_string_pretty(&out).map_err(Error::from)?)
        .map_err(|e| Error::io(&path, e))?;
    eprintln!(
        "instance accuracy {:.4}, utterance accuracy {:.4}",
        instance_metrics.accuracy, utterance_metrics.accuracy
    );
    Ok(())
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::Pitch(common) => cmd_pitch(common),
        Cmd::Contour(common) => cmd_contour(common),
        Cmd::Mine(common) => cmd_mine(common),
        Cmd::Cut(common) => cmd_cut(common),
        Cmd::Featurize { common, model } => cmd_featurize(common, model),
        Cmd::Train { common, model } => cmd_train(common, model),
        Cmd::Eval {
            common,
            model,
            checkpoint,
        } => cmd_eval(common, model, checkpoint),
        Cmd::Run { common, model } => {
            let cfg = pipeline_config(common, model)?;
            let report = run_pipeline(&common.manifest, &common.out, &cfg)?;
            eprintln!(
                "test accuracy: instances {:.4}, utterances {:.4}; pattern duration {:.2}% of corpus",
                report.instance_metrics.accuracy,
                report.utterance_metrics.accuracy,
                100.0 * report.durations.pattern_fraction
            );
            Ok(())
        }
        Cmd::Synth {
            out,
            seed,
            utterances,
            train_count,
        } => {
            let manifest = generate_corpus(
                out,
                &SynthConfig {
                    utterances_per_dialect: *utterances,
                    train_per_dialect: *train_count,
                    seed: *seed,
                },
            )?;
            eprintln!("wrote corpus manifest to {}", manifest.display());
            Ok(())
        }
    }
}

fn main() {
    if let Err(e) = real_main() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
