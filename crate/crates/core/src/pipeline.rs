//! End-to-end orchestration: manifests, stage sequencing, dataset
//! assembly, training, and evaluation reports.
//!
//! Dictionaries are mined from the training split only; test-split
//! utterances are scanned for occurrences of those training dictionaries.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contour::{contours_from_track, Contour, GAP_MAX_S};
use crate::error::{Error, Result};
use crate::features::{
    log_mel, pad_or_crop, write_archive, MelSpectrogram, NormStats, T_FIXED,
};
use crate::metrics::{self, MetricsReport};
use crate::mining::{
    build_dictionary, cut_segments, locate_instances, write_dictionary_json, write_instances_tsv,
    MiningConfig, PatternDictionary, PatternInstance,
};
use crate::nn::checkpoint::save_checkpoint;
use crate::nn::model::{Model, ModelKind, ModelSpec};
use crate::nn::train::{predict_proba, train, Dataset, TrainConfig, TrainReport};
use crate::pitch::{extract_f0, write_track_tsv, PitchConfig};
use crate::signal::{load_wav, resample, write_wav, AudioClip, CANONICAL_SAMPLE_RATE};

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;
/// Random-crop evaluation draws segment durations from this range (seconds).
pub const CROP_DURATION_RANGE: (f64, f64) = (0.25, 1.3);
pub const CROPS_PER_UTTERANCE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Manifest(format!("unknown split tag '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub dialect: String,
    pub split: Split,
}

/// Parse a TSV manifest: `path<TAB>dialect<TAB>split`, no header.
/// Relative paths are resolved against the manifest's directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut entries = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::Manifest(format!(
                "{}:{}: expected 3 tab-separated columns, got {}",
                path.display(),
                lineno + 1,
                cols.len()
            )));
        }
        let audio = PathBuf::from(cols[0]);
        let audio = if audio.is_absolute() {
            audio
        } else {
            base.join(audio)
        };
        entries.push(ManifestEntry {
            path: audio,
            dialect: cols[1].to_string(),
            split: cols[2].parse()?,
        });
    }
    if entries.is_empty() {
        return Err(Error::Manifest(format!(
            "{}: manifest contains no entries",
            path.display()
        )));
    }
    Ok(entries)
}

pub fn write_manifest(entries: &[ManifestEntry], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for e in entries {
        let split = match e.split {
            Split::Train => "train",
            Split::Test => "test",
        };
        writeln!(w, "{}\t{}\t{}", e.path.display(), e.dialect, split)
            .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Label-stratified shuffled split into (train, validation) index sets.
pub fn split_train_val(
    labels: &[usize],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must be in (0, 1), got {fraction} (an empty validation set \
             would make early stopping undefined)"
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (class, mut idx) in by_class {
        if idx.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "class {class} has {} instance(s); at least 2 are needed to split",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let n_train = ((fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..n_train]);
        val.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMode {
    Patterns,
    RandomCrops,
}

impl std::str::FromStr for TestMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "patterns" => Ok(TestMode::Patterns),
            "random-crops" => Ok(TestMode::RandomCrops),
            other => Err(Error::InvalidConfig(format!("unknown test mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub k: usize,
    pub mining: MiningConfig,
    pub model_kind: ModelKind,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub patience: Option<usize>,
    pub test_mode: TestMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            k: crate::contour::DEFAULT_K,
            mining: MiningConfig::default(),
            model_kind: ModelKind::ResBlstm,
            batch_size: None,
            epochs: None,
            patience: None,
            test_mode: TestMode::Patterns,
        }
    }
}

fn stage_err<T>(stage: &str, source_id: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        already @ Error::Stage { .. } => already,
        other => Error::Stage {
            stage: stage.to_string(),
            source_id: source_id.to_string(),
            detail: other.to_string(),
        },
    })
}

/// One fully analyzed utterance.
pub struct Utterance {
    pub source_id: String,
    pub dialect: String,
    pub split: Split,
    pub clip: AudioClip,
    pub track: crate::pitch::PitchTrack,
    pub contours: Vec<Contour>,
}

fn source_id_for(path: &Path, taken: &mut std::collections::HashSet<String>) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "clip".to_string());
    let mut id = stem.clone();
    let mut n = 1;
    while !taken.insert(id.clone()) {
        n += 1;
        id = format!("{stem}_{n}");
    }
    id
}

/// Stages 1-2 for every manifest entry: load and resample audio, extract
/// the pitch track, and approximate the intonation contours.
pub fn analyze_utterances(entries: &[ManifestEntry], k: usize) -> Result<Vec<Utterance>> {
    let mut taken = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(entries.len());
    for entry in entries {
        let source_id = source_id_for(&entry.path, &mut taken);
        let mut clip = stage_err("load", &source_id, load_wav(&entry.path))?;
        clip = stage_err("resample", &source_id, resample(&clip, CANONICAL_SAMPLE_RATE))?;
        clip.source_id = source_id.clone();
        let track = stage_err("pitch", &source_id, extract_f0(&clip, &PitchConfig::default()))?;
        let contours = stage_err(
            "contour",
            &source_id,
            contours_from_track(&track, k, GAP_MAX_S),
        )?;
        out.push(Utterance {
            source_id,
            dialect: entry.dialect.clone(),
            split: entry.split,
            clip,
            track,
            contours,
        });
    }
    Ok(out)
}

/// Sorted unique dialect labels of a corpus.
pub fn dialect_labels(utterances: &[Utterance]) -> Vec<String> {
    let mut labels: Vec<String> = utterances
        .iter()
        .map(|u| u.dialect.clone())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    labels.sort();
    labels
}

/// Mine one closed-pattern dictionary per dialect from training-split
/// contours only.
pub fn mine_dictionaries(
    utterances: &[Utterance],
    dialects: &[String],
    cfg: &MiningConfig,
) -> Result<Vec<PatternDictionary>> {
    let mut out = Vec::with_capacity(dialects.len());
    for dialect in dialects {
        let contours: Vec<Contour> = utterances
            .iter()
            .filter(|u| u.split == Split::Train && &u.dialect == dialect)
            .flat_map(|u| u.contours.iter().cloned())
            .collect();
        let dict = stage_err("mine", dialect, build_dictionary(&contours, dialect, cfg))?;
        out.push(dict);
    }
    Ok(out)
}

/// Locate pattern occurrences of each dialect's dictionary within that
/// dialect's utterances (both splits).
pub fn locate_all_instances(
    utterances: &[Utterance],
    dictionaries: &[PatternDictionary],
) -> Vec<PatternInstance> {
    let mut out = Vec::new();
    for u in utterances {
        if let Some(dict) = dictionaries.iter().find(|d| d.dialect == u.dialect) {
            out.extend(locate_instances(dict, &u.contours));
        }
    }
    out
}

/// A labeled example set plus the source utterance of every example.
#[derive(Default)]
pub struct LabeledFeatures {
    pub data: Dataset,
    pub sources: Vec<String>,
}

fn spec_to_feature(spec: &MelSpectrogram) -> Vec<f32> {
    spec.values.clone()
}

fn featurize_clip(clip: &AudioClip, source_id: &str) -> Result<MelSpectrogram> {
    let spec = stage_err("featurize", source_id, log_mel(clip))?;
    Ok(pad_or_crop(&spec, T_FIXED))
}

pub struct BuiltDatasets {
    pub train: LabeledFeatures,
    pub test: LabeledFeatures,
    pub norm: NormStats,
    /// Total duration of all pattern instances, seconds.
    pub pattern_total_s: f64,
    /// Total corpus duration, seconds.
    pub corpus_total_s: f64,
    pub instance_durations_s: Vec<f64>,
}

/// Cut pattern instances from their utterances, compute fixed-size log-mel
/// features, and normalize with statistics from the training examples only
/// (or with externally supplied statistics, e.g. from a checkpoint).
pub fn build_datasets(
    utterances: &[Utterance],
    instances: &[PatternInstance],
    dialects: &[String],
    test_mode: TestMode,
    seed: u64,
    segments_dir: Option<&Path>,
    norm_override: Option<&NormStats>,
) -> Result<BuiltDatasets> {
    let label_id = |d: &str| -> usize {
        dialects.iter().position(|x| x == d).expect("known dialect")
    };
    let (n_mels, t) = (crate::features::N_MELS, T_FIXED);
    let empty = || LabeledFeatures {
        data: Dataset {
            n_mels,
            t,
            ..Default::default()
        },
        sources: Vec::new(),
    };
    let mut train = empty();
    let mut test = empty();
    let mut train_specs: Vec<MelSpectrogram> = Vec::new();
    let mut pattern_total_s = 0.0;
    let mut instance_durations_s = Vec::new();
    let corpus_total_s: f64 = utterances.iter().map(|u| u.clip.duration_s()).sum();
    let mut crop_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6372_6f70);

    for u in utterances {
        let mine: Vec<&PatternInstance> = instances
            .iter()
            .filter(|i| i.source_id == u.source_id)
            .collect();
        let owned: Vec<PatternInstance> = mine.iter().map(|i| (*i).clone()).collect();
        let cuts = stage_err("cut", &u.source_id, cut_segments(&u.clip, &owned))?;
        for inst in &owned {
            pattern_total_s += inst.duration_s();
            instance_durations_s.push(inst.duration_s());
        }
        if let Some(dir) = segments_dir {
            for (i, cut) in cuts.iter().enumerate() {
                let p = dir.join(format!("{}_{i}.wav", u.source_id));
                stage_err("cut", &u.source_id, write_wav(cut, &p))?;
            }
        }
        match (u.split, test_mode) {
            (Split::Train, _) => {
                for cut in &cuts {
                    let spec = featurize_clip(cut, &u.source_id)?;
                    train_specs.push(spec.clone());
                    train.data.push(spec_to_feature(&spec), label_id(&u.dialect));
                    train.sources.push(u.source_id.clone());
                }
            }
            (Split::Test, TestMode::Patterns) => {
                for cut in &cuts {
                    let spec = featurize_clip(cut, &u.source_id)?;
                    test.data.push(spec_to_feature(&spec), label_id(&u.dialect));
                    test.sources.push(u.source_id.clone());
                }
            }
            (Split::Test, TestMode::RandomCrops) => {
                let sr = u.clip.sample_rate as f64;
                for _ in 0..CROPS_PER_UTTERANCE {
                    let dur = crop_rng.gen_range(CROP_DURATION_RANGE.0..CROP_DURATION_RANGE.1);
                    let len = ((dur * sr) as usize).min(u.clip.samples.len());
                    let max_start = u.clip.samples.len() - len;
                    let start = if max_start == 0 {
                        0
                    } else {
                        crop_rng.gen_range(0..max_start)
                    };
                    let crop = AudioClip {
                        samples: u.clip.samples[start..start + len].to_vec(),
                        sample_rate: u.clip.sample_rate,
                        source_id: u.source_id.clone(),
                        span: Some((start as f64 / sr, (start + len) as f64 / sr)),
                    };
                    let spec = featurize_clip(&crop, &u.source_id)?;
                    test.data.push(spec_to_feature(&spec), label_id(&u.dialect));
                    test.sources.push(u.source_id.clone());
                }
            }
        }
    }
    let norm = match norm_override {
        Some(n) => n.clone(),
        None => NormStats::compute(&train_specs)
            .map_err(|e| Error::Training(format!("normalization: {e}")))?,
    };
    let apply = |set: &mut LabeledFeatures| {
        for feat in &mut set.data.features {
            for m in 0..n_mels {
                for ti in 0..t {
                    let v = &mut feat[m * t + ti];
                    *v = (*v - norm.mean[m]) / norm.std[m];
                }
            }
        }
    };
    apply(&mut train);
    apply(&mut test);
    Ok(BuiltDatasets {
        train,
        test,
        norm,
        pattern_total_s,
        corpus_total_s,
        instance_durations_s,
    })
}

/// Majority vote over an utterance's segment predictions; ties are broken
/// by the candidate with the highest mean softmax probability.
pub fn aggregate_utterance_votes(
    sources: &[String],
    probs: &[Vec<f32>],
) -> BTreeMap<String, usize> {
    let mut grouped: BTreeMap<&str, Vec<&Vec<f32>>> = BTreeMap::new();
    for (src, p) in sources.iter().zip(probs) {
        grouped.entry(src).or_default().push(p);
    }
    let mut out = BTreeMap::new();
    for (src, rows) in grouped {
        let k = rows[0].len();
        let mut votes = vec![0usize; k];
        for row in &rows {
            let pred = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap();
            votes[pred] += 1;
        }
        let top = *votes.iter().max().unwrap();
        let tied: Vec<usize> = (0..k).filter(|&c| votes[c] == top).collect();
        let winner = if tied.len() == 1 {
            tied[0]
        } else {
            let mean = |c: usize| -> f64 {
                rows.iter().map(|r| r[c] as f64).sum::<f64>() / rows.len() as f64
            };
            *tied
                .iter()
                .max_by(|&&a, &&b| mean(a).partial_cmp(&mean(b)).unwrap().then(b.cmp(&a)))
                .unwrap()
        };
        out.insert(src.to_string(), winner);
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DurationStats {
    pub corpus_total_s: f64,
    pub pattern_total_s: f64,
    pub pattern_fraction: f64,
    pub mean_instance_s: f64,
    pub median_instance_s: f64,
    pub n_instances: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProvenanceLog {
    pub master_seed: u64,
    /// Per dialect: number of training-split utterances the dictionary was
    /// mined from. Test-split utterances are never mined.
    pub mined_from_train_utterances: BTreeMap<String, usize>,
    pub test_split_mined: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    pub model: ModelSpec,
    pub train_config: TrainConfig,
    pub dialects: Vec<String>,
    pub provenance: ProvenanceLog,
    pub dictionary_sizes: BTreeMap<String, usize>,
    pub durations: DurationStats,
    pub n_train_examples: usize,
    pub n_val_examples: usize,
    pub n_test_examples: usize,
    pub training: TrainReport,
    pub instance_metrics: MetricsReport,
    pub utterance_metrics: MetricsReport,
    pub n_test_utterances_without_segments: usize,
}

fn subset(set: &LabeledFeatures, idx: &[usize]) -> Dataset {
    let mut out = Dataset {
        n_mels: set.data.n_mels,
        t: set.data.t,
        ..Default::default()
    };
    for &i in idx {
        out.push(set.data.features[i].clone(), set.data.labels[i]);
    }
    out
}

/// Run the full pipeline, persisting every intermediate artifact under
/// `out_dir`, and return the report (also written as `report.json`).
pub fn run_pipeline(
    manifest_path: &Path,
    out_dir: &Path,
    cfg: &PipelineConfig,
) -> Result<RunReport> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let entries = read_manifest(manifest_path)?;
    let utterances = analyze_utterances(&entries, cfg.k)?;
    let dialects = dialect_labels(&utterances);
    if dialects.len() < 2 {
        return Err(Error::Manifest(format!(
            "need at least 2 dialects, manifest has {}",
            dialects.len()
        )));
    }

    // Persist pitch tracks and contours.
    let pitch_dir = out_dir.join("pitch");
    std::fs::create_dir_all(&pitch_dir).map_err(|e| Error::io(&pitch_dir, e))?;
    let all_contours: Vec<Contour> = utterances
        .iter()
        .flat_map(|u| u.contours.iter().cloned())
        .collect();
    crate::contour::write_contours_tsv(&all_contours, out_dir.join("contours.tsv"))?;
    for u in &utterances {
        write_track_tsv(&u.track, pitch_dir.join(format!("{}.tsv", u.source_id)))?;
    }

    let dictionaries = mine_dictionaries(&utterances, &dialects, &cfg.mining)?;
    for dict in &dictionaries {
        write_dictionary_json(dict, out_dir.join(format!("dictionary_{}.json", dict.dialect)))?;
    }
    let instances = locate_all_instances(&utterances, &dictionaries);
    write_instances_tsv(&instances, out_dir.join("instances.tsv"))?;

    let segments_dir = out_dir.join("segments");
    std::fs::create_dir_all(&segments_dir).map_err(|e| Error::io(&segments_dir, e))?;
    let built = build_datasets(
        &utterances,
        &instances,
        &dialects,
        cfg.test_mode,
        cfg.seed,
        Some(&segments_dir),
        None,
    )?;

    // Persist feature archives.
    let to_records = |set: &LabeledFeatures| -> Vec<(u8, MelSpectrogram)> {
        set.data
            .features
            .iter()
            .zip(&set.data.labels)
            .map(|(f, &l)| {
                (
                    l as u8,
                    MelSpectrogram {
                        values: f.clone(),
                        n_mels: set.data.n_mels,
                        n_frames: set.data.t,
                        sample_rate: CANONICAL_SAMPLE_RATE,
                        label: Some(dialects[l].clone()),
                        padded: false,
                    },
                )
            })
            .collect()
    };
    write_archive(&to_records(&built.train), out_dir.join("features_train.imel"))?;
    write_archive(&to_records(&built.test), out_dir.join("features_test.imel"))?;

    // Train/val split, model, training.
    let (train_idx, val_idx) =
        split_train_val(&built.train.data.labels, DEFAULT_TRAIN_FRACTION, cfg.seed)?;
    let train_set = subset(&built.train, &train_idx);
    let val_set = subset(&built.train, &val_idx);
    let model_spec = match cfg.model_kind {
        ModelKind::Crnn => ModelSpec::crnn(dialects.len(), cfg.seed),
        ModelKind::ResBlstm => ModelSpec::res_blstm(dialects.len(), cfg.seed),
    };
    let mut train_config = TrainConfig::for_kind(cfg.model_kind, cfg.seed);
    if let Some(b) = cfg.batch_size {
        train_config.batch_size = b;
    }
    if let Some(e) = cfg.epochs {
        train_config.epochs = e;
    }
    if let Some(p) = cfg.patience {
        train_config.patience = p;
    }
    let mut model = Model::<f32>::new(model_spec.clone())?;
    let training = train(&mut model, &train_set, &val_set, &train_config)?;
    save_checkpoint(&out_dir.join("model.iadi"), &mut model, Some(&built.norm))?;

    // Evaluation.
    if built.test.data.is_empty() {
        return Err(Error::Manifest("manifest has no test-split examples".into()));
    }
    let probs = predict_proba(&mut model, &built.test.data, train_config.batch_size);
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
    let instance_metrics = metrics::evaluate(&built.test.data.labels, &preds, &dialects)?;

    let votes = aggregate_utterance_votes(&built.test.sources, &probs);
    let mut utt_labels = Vec::new();
    let mut utt_preds = Vec::new();
    let mut missing = 0usize;
    for u in utterances.iter().filter(|u| u.split == Split::Test) {
        match votes.get(&u.source_id) {
            Some(&pred) => {
                utt_labels.push(dialects.iter().position(|d| d == &u.dialect).unwrap());
                utt_preds.push(pred);
            }
            None => missing += 1,
        }
    }
    let utterance_metrics = metrics::evaluate(&utt_labels, &utt_preds, &dialects)?;

    let mut sorted_durs = built.instance_durations_s.clone();
    sorted_durs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted_durs.len();
    let durations = DurationStats {
        corpus_total_s: built.corpus_total_s,
        pattern_total_s: built.pattern_total_s,
        pattern_fraction: if built.corpus_total_s > 0.0 {
            built.pattern_total_s / built.corpus_total_s
        } else {
            0.0
        },
        mean_instance_s: if n > 0 { built.pattern_total_s / n as f64 } else { 0.0 },
        median_instance_s: if n > 0 {
            (sorted_durs[(n - 1) / 2] + sorted_durs[n / 2]) / 2.0
        } else {
            0.0
        },
        n_instances: n,
    };
    let report = RunReport {
        config: cfg.clone(),
        model: model_spec,
        train_config,
        dialects: dialects.clone(),
        provenance: ProvenanceLog {
            master_seed: cfg.seed,
            mined_from_train_utterances: dialects
                .iter()
                .map(|d| {
                    (
                        d.clone(),
                        utterances
                            .iter()
                            .filter(|u| u.split == Split::Train && &u.dialect == d)
                            .count(),
                    )
                })
                .collect(),
            test_split_mined: false,
        },
        dictionary_sizes: dictionaries
            .iter()
            .map(|d| (d.dialect.clone(), d.patterns.len()))
            .collect(),
        durations,
        n_train_examples: train_idx.len(),
        n_val_examples: val_idx.len(),
        n_test_examples: built.test.data.len(),
        training,
        instance_metrics,
        utterance_metrics,
        n_test_utterances_without_segments: missing,
    };
    let json = serde_json::to_string_pretty(&report)?;
    let report_path = out_dir.join("report.json");
    std::fs::write(&report_path, json).map_err(|e| Error::io(&report_path, e))?;
    Ok(report)
}
