use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use super::{Cmd, ConfigOverrides, RunConfig};
use crate::dsp::{read_features, write_features, FeatureSet, Featurizer};
use crate::error::{Error, Result};
use crate::eval::{evaluate, render_confusion, summarize, ConfusionMatrix, Report};
use crate::fsutil::{derive_seed, write_atomic};
use crate::ingest::{
    load_manifest, load_recording, read_signal, segment_recording, split_by_subject, synth_recordings, write_manifest,
    write_signal, DatasetManifest, ManifestEntry, Recording, Resampler, Segment, SignalFormat, SplitTag,
    NOMINAL_RATE_HZ,
};
use crate::label::ClassLabel;
use crate::model::{load_model, load_model_expecting, predict_probs, save_model, ModelState};
use crate::train::{train_with, write_history};

const SPLIT_SEED_TAG: u64 = 0x5350_4c54;
const SPLITS: [&str; 3] = ["train", "val", "test"];

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const INDEX_FILE: &str = "index.csv";
pub const MODEL_FILE: &str = "model.smdl";
pub const HISTORY_FILE: &str = "history.csv";
pub const CONFIG_ECHO_FILE: &str = "config.json";
pub const REPORT_FILE: &str = "report.json";

fn feature_path(dir: &Path, split: &str) -> PathBuf {
    dir.join(format!("{split}.sftr"))
}

pub(super) fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Synth {
            out,
            per_class,
            subjects,
            samples,
            config,
        } => synth(&out, per_class, subjects, samples, &RunConfig::resolve(&config)?),
        Cmd::Featurize { manifest, out, config } => featurize(&manifest, &out, &RunConfig::resolve(&config)?),
        Cmd::Train {
            features,
            out,
            checkpoint_dir,
            config,
        } => train(&features, &out, checkpoint_dir, &RunConfig::resolve(&config)?),
        Cmd::Evaluate {
            model,
            features,
            predictions,
            out,
            config,
        } => {
            let cfg = RunConfig::resolve(&config)?;
            match (model, features, predictions) {
                (_, _, Some(p)) => evaluate_predictions(&p, &out, &cfg),
                (Some(m), Some(f), None) => evaluate_model(&m, &f, &out, &cfg),
                _ => Err(Error::InvalidArgument("need --model with --features, or --predictions".into())),
            }
        }
        Cmd::Predict {
            model,
            signal,
            format,
            config,
        } => predict(&model, &signal, format.as_deref(), &config),
    }
}

fn synth(out: &Path, per_class: usize, subjects: usize, samples: usize, cfg: &RunConfig) -> Result<()> {
    if per_class == 0 || subjects == 0 || samples == 0 {
        return Err(Error::InvalidArgument("per-class, subjects and samples must be positive".into()));
    }
    let recordings = synth_recordings(cfg.run.seed, per_class, subjects, NOMINAL_RATE_HZ, samples)?;
    let mut manifest = DatasetManifest::default();
    for rec in &recordings {
        let path = out.join("signals").join(format!("{}.semg", rec.recording_id));
        write_signal(&path, &rec.samples, NOMINAL_RATE_HZ as u32)?;
        manifest.entries.push(ManifestEntry {
            path,
            format: SignalFormat::Semg,
            label: rec.label,
            subject_id: rec.subject_id.clone(),
            split: SplitTag::Auto,
        });
    }
    let manifest_path = out.join(MANIFEST_FILE);
    write_manifest(&manifest_path, &manifest)?;
    println!("wrote {} recordings and {}", recordings.len(), manifest_path.display());
    Ok(())
}

/// Loads, windows and resamples every manifest entry, then assigns segments
/// to splits: explicit tags first, `auto` entries by a subject-disjoint split.
fn segments_by_split(manifest: &DatasetManifest, cfg: &RunConfig) -> Result<[Vec<Segment<f64>>; 3]> {
    let resampler = Resampler::<f64>::new(cfg.ingest.window_len, cfg.ingest.segment_len)?;
    let mut splits: [Vec<Segment<f64>>; 3] = Default::default();
    let mut auto = Vec::new();
    for entry in &manifest.entries {
        let rec = load_recording::<f64>(entry)?;
        let segs = segment_recording(&rec, &resampler)?;
        match entry.split {
            SplitTag::Train => splits[0].extend(segs),
            SplitTag::Val => splits[1].extend(segs),
            SplitTag::Test => splits[2].extend(segs),
            SplitTag::Auto => auto.extend(segs),
        }
    }
    if !auto.is_empty() {
        let assigned = split_by_subject(&auto, cfg.split_ratios(), derive_seed(cfg.run.seed, &[SPLIT_SEED_TAG]))?;
        splits[0].extend(assigned.train);
        splits[1].extend(assigned.val);
        splits[2].extend(assigned.test);
    }
    Ok(splits)
}

fn featurize_segments(featurizer: &Featurizer<f64>, segments: &[Segment<f64>]) -> Result<FeatureSet<f32>> {
    let mut set = FeatureSet::new(featurizer.config().dims());
    for seg in segments {
        let t = featurizer.featurize(&seg.samples)?;
        let values: Vec<f32> = t.values.iter().map(|&v| v as f32).collect();
        set.push_raw(&values, seg.label)?;
    }
    Ok(set)
}

fn shape_line(name: &str, n: usize, dims: [usize; 3]) -> String {
    format!("{name}: ({n}, {}, {}, {})", dims[0], dims[1], dims[2])
}

fn featurize(manifest_path: &Path, out: &Path, cfg: &RunConfig) -> Result<()> {
    let manifest = load_manifest(manifest_path)?;
    if manifest.entries.is_empty() {
        return Err(Error::InvalidArgument(format!("{} lists no recordings", manifest_path.display())));
    }
    let featurizer = Featurizer::<f64>::new(cfg.feature_config()?)?;
    let splits = segments_by_split(&manifest, cfg)?;
    if splits.iter().all(Vec::is_empty) {
        return Err(Error::InvalidArgument(format!(
            "no recording in {} holds a full {}-sample window",
            manifest_path.display(),
            cfg.ingest.window_len
        )));
    }
    let mut index = String::from("split,index,recording,window,subject,label\n");
    let mut total = 0;
    let dims = featurizer.config().dims();
    for (name, segs) in SPLITS.iter().zip(&splits) {
        let set = featurize_segments(&featurizer, segs)?;
        write_features(&feature_path(out, name), &set)?;
        for (i, s) in segs.iter().enumerate() {
            let _ = writeln!(
                index,
                "{name},{i},{},{},{},{}",
                s.source.recording_id, s.source.window_index, s.subject_id, s.label
            );
        }
        total += set.len();
        println!("{}", shape_line(name, set.len(), dims));
    }
    write_atomic(&out.join(INDEX_FILE), |w| w.write_all(index.as_bytes()))?;
    println!("{}", shape_line("total", total, dims));
    Ok(())
}

fn check_finite(name: &str, set: &FeatureSet<f32>) -> Result<()> {
    match set.non_finite_records().first() {
        Some(r) => Err(Error::NonFinite(format!(
            "{name} record {r} ({}) contains NaN or infinite values",
            set.labels[*r]
        ))),
        None => Ok(()),
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json serializes");
    text.push('\n');
    write_atomic(path, |w| w.write_all(text.as_bytes()))
}

fn train(features: &Path, out: &Path, checkpoint_dir: Option<PathBuf>, cfg: &RunConfig) -> Result<()> {
    let train_set: FeatureSet<f32> = read_features(&feature_path(features, "train"))?;
    let val_set: FeatureSet<f32> = read_features(&feature_path(features, "val"))?;
    check_finite("train.sftr", &train_set)?;
    check_finite("val.sftr", &val_set)?;
    let mut model = ModelState::<f32>::init(&cfg.model_config(train_set.dims))?;
    model.fit_standardization(&train_set)?;
    let tcfg = crate::train::TrainConfig {
        checkpoint_dir,
        ..cfg.train_config()
    };
    let (best, history) = train_with(model, &train_set, &val_set, &tcfg, |r| {
        eprintln!(
            "epoch {:>3}  train loss {:.5} acc {:.4}  val loss {:.5} acc {:.4}",
            r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc
        );
    })?;
    save_model(&best, &out.join(MODEL_FILE))?;
    write_history(&out.join(HISTORY_FILE), &history.records)?;
    write_json(&out.join(CONFIG_ECHO_FILE), &cfg.to_json())?;
    println!(
        "best epoch {} of {}: val accuracy {:.4}; model written to {}",
        history.best_epoch,
        history.records.len(),
        history.best_val_acc(),
        out.join(MODEL_FILE).display()
    );
    Ok(())
}

fn finish_report(cm: &ConfusionMatrix, out: &Path, seed: u64, config: serde_json::Value) -> Result<()> {
    let report = Report::new(cm, seed, config)?;
    report.write(&out.join(REPORT_FILE))?;
    render_confusion(cm, &out.join("confusion.csv"), &out.join("confusion.svg"))?;
    print!("{}", summarize(cm)?.table());
    Ok(())
}

fn evaluate_model(model_path: &Path, features: &Path, out: &Path, cfg: &RunConfig) -> Result<()> {
    let test: FeatureSet<f32> = read_features(&feature_path(features, "test"))?;
    if test.is_empty() {
        return Err(Error::InvalidArgument("test split is empty".into()));
    }
    check_finite("test.sftr", &test)?;
    let model: ModelState<f32> = load_model_expecting(model_path, &cfg.model_config(test.dims))?;
    let result = evaluate(&model, &test, cfg.train.batch_size)?;
    let config = serde_json::json!({ "run": cfg.to_json(), "model": model.config });
    finish_report(&result.confusion, out, cfg.run.seed, config)
}

fn evaluate_predictions(path: &Path, out: &Path, cfg: &RunConfig) -> Result<()> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    if header != ["true", "predicted"] {
        return Err(Error::MalformedHeader(format!("{}: header must be `true,predicted`", path.display())));
    }
    let (mut truth, mut predicted) = (Vec::new(), Vec::new());
    for row in reader.records() {
        let row = row.map_err(|e| Error::InvalidArgument(e.to_string()))?;
        truth.push(row[0].parse::<ClassLabel>()?.index());
        predicted.push(row[1].parse::<ClassLabel>()?.index());
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument(format!("{} holds no predictions", path.display())));
    }
    let cm = ConfusionMatrix::from_labels(&truth, &predicted)?;
    finish_report(&cm, out, cfg.run.seed, serde_json::json!({ "run": cfg.to_json() }))
}

fn predict(model_path: &Path, signal: &Path, format: Option<&str>, overrides: &ConfigOverrides) -> Result<()> {
    let cfg = RunConfig::resolve(overrides)?;
    let model: ModelState<f32> = load_model(model_path)?;
    let fcfg = cfg.feature_config()?;
    if fcfg.dims() != model.config.input_shape {
        return Err(Error::ConfigMismatch(format!(
            "features of shape {:?} do not fit a model expecting {:?}",
            fcfg.dims(),
            model.config.input_shape
        )));
    }
    let format = match format {
        Some(f) => f.parse()?,
        None => SignalFormat::from_path(signal),
    };
    let (samples, rate) = read_signal(signal, format)?;
    if samples.len() < cfg.ingest.window_len {
        return Err(Error::InvalidArgument(format!(
            "{} has {} samples, fewer than one {}-sample window",
            signal.display(),
            samples.len(),
            cfg.ingest.window_len
        )));
    }
    let id = signal.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let rec = Recording::new(
        samples.into_iter().map(f64::from).collect(),
        rate.map(f64::from).unwrap_or(NOMINAL_RATE_HZ),
        ClassLabel::Normal,
        "unknown",
        id,
    )?;
    let resampler = Resampler::<f64>::new(cfg.ingest.window_len, cfg.ingest.segment_len)?;
    let segments = segment_recording(&rec, &resampler)?;
    let set = featurize_segments(&Featurizer::new(fcfg)?, &segments)?;
    let probs = predict_probs(&model, &set, cfg.train.batch_size)?;
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for (i, p) in probs.iter().enumerate() {
        let label = ClassLabel::ALL[crate::model::predict(p)];
        writeln!(lock, "{i},{:.6},{:.6},{:.6},{label}", p[0], p[1], p[2]).map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(())
}
