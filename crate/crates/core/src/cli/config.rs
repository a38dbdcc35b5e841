//! Layered run configuration: built-in defaults, then an INI file, then
//! `--section.key` flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Arg, ArgMatches, Args, Command, FromArgMatches};
use serde::Serialize;

use crate::dsp::{DeltaMode, FeatureConfig};
use crate::error::{Error, Result};
use crate::ingest::{SplitRatios, SEGMENT_LEN, WINDOW_LEN};
use crate::model::ModelConfig;
use crate::train::{OptimizerKind, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestSettings {
    pub window_len: usize,
    pub segment_len: usize,
    pub split_train: f64,
    pub split_val: f64,
    pub split_test: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DspSettings {
    pub n_fft: usize,
    pub hop: usize,
    pub delta: String,
    pub delta_width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSettings {
    pub stem_channels: usize,
    pub feature_channels: usize,
    pub attention_hidden: usize,
    pub standardize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSettings {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub class_weighting: bool,
    pub optimizer: OptimizerKind,
    pub momentum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSettings {
    pub seed: u64,
}

/// Effective configuration of one invocation; echoed into reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub ingest: IngestSettings,
    pub dsp: DspSettings,
    pub model: ModelSettings,
    pub train: TrainSettings,
    pub run: RunSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        let split = SplitRatios::default();
        let model = ModelConfig::default();
        let train = TrainConfig::default();
        let dsp = FeatureConfig::default();
        Self {
            ingest: IngestSettings {
                window_len: WINDOW_LEN,
                segment_len: SEGMENT_LEN,
                split_train: split.train,
                split_val: split.val,
                split_test: split.test,
            },
            dsp: DspSettings {
                n_fft: dsp.n_fft,
                hop: dsp.hop,
                delta: dsp.delta.to_string(),
                delta_width: 9,
            },
            model: ModelSettings {
                stem_channels: model.stem_channels,
                feature_channels: model.feature_channels,
                attention_hidden: model.attention_hidden,
                standardize: model.standardize,
            },
            train: TrainSettings {
                lr: train.lr,
                batch_size: train.batch_size,
                max_epochs: train.max_epochs,
                patience: train.patience,
                class_weighting: train.class_weighting,
                optimizer: train.optimizer,
                momentum: train.momentum,
            },
            run: RunSettings { seed: 0 },
        }
    }
}

/// `(section.key, help)` for every configurable value.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("ingest.window_len", "raw samples per window"),
    ("ingest.segment_len", "samples per resampled segment"),
    ("ingest.split_train", "share of subjects assigned to training"),
    ("ingest.split_val", "share of subjects assigned to validation"),
    ("ingest.split_test", "share of subjects assigned to testing"),
    ("dsp.n_fft", "STFT frame length (power of two)"),
    ("dsp.hop", "STFT hop in samples"),
    ("dsp.delta", "delta operator: regression or difference"),
    ("dsp.delta_width", "frames in the regression delta (odd)"),
    ("model.stem_channels", "channels of the stem and attention branch"),
    ("model.feature_channels", "channels of the residual feature branch"),
    ("model.attention_hidden", "hidden width of the attention gate"),
    ("model.standardize", "z-score inputs with training statistics (true/false)"),
    ("train.lr", "learning rate"),
    ("train.batch_size", "mini-batch size (at least 2)"),
    ("train.max_epochs", "upper bound on epochs"),
    ("train.patience", "epochs without validation gain before stopping"),
    ("train.class_weighting", "weight the loss by inverse class frequency (true/false)"),
    ("train.optimizer", "adam or sgd"),
    ("train.momentum", "momentum for sgd"),
    ("run.seed", "global seed for splitting, initialisation and shuffling"),
];

fn parse<V: FromStr>(section: &str, key: &str, value: &str) -> Result<V> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("{section}.{key}: cannot parse {value:?}")))
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::InvalidArgument(format!("{section}.{key}: expected true or false, got {value:?}"))),
    }
}

impl RunConfig {
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let (s, k) = (section, key);
        match (s, k) {
            ("ingest", "window_len") => self.ingest.window_len = parse(s, k, value)?,
            ("ingest", "segment_len") => self.ingest.segment_len = parse(s, k, value)?,
            ("ingest", "split_train") => self.ingest.split_train = parse(s, k, value)?,
            ("ingest", "split_val") => self.ingest.split_val = parse(s, k, value)?,
            ("ingest", "split_test") => self.ingest.split_test = parse(s, k, value)?,
            ("dsp", "n_fft") => self.dsp.n_fft = parse(s, k, value)?,
            ("dsp", "hop") => self.dsp.hop = parse(s, k, value)?,
            ("dsp", "delta") => {
                DeltaMode::from_str(value)?;
                self.dsp.delta = value.trim().to_string();
            }
            ("dsp", "delta_width") => self.dsp.delta_width = parse(s, k, value)?,
            ("model", "stem_channels") => self.model.stem_channels = parse(s, k, value)?,
            ("model", "feature_channels") => self.model.feature_channels = parse(s, k, value)?,
            ("model", "attention_hidden") => self.model.attention_hidden = parse(s, k, value)?,
            ("model", "standardize") => self.model.standardize = parse_bool(s, k, value)?,
            ("train", "lr") => self.train.lr = parse(s, k, value)?,
            ("train", "batch_size") => self.train.batch_size = parse(s, k, value)?,
            ("train", "max_epochs") => self.train.max_epochs = parse(s, k, value)?,
            ("train", "patience") => self.train.patience = parse(s, k, value)?,
            ("train", "class_weighting") => self.train.class_weighting = parse_bool(s, k, value)?,
            ("train", "optimizer") => {
                self.train.optimizer = match value.trim().to_ascii_lowercase().as_str() {
                    "adam" => OptimizerKind::Adam,
                    "sgd" => OptimizerKind::Sgd,
                    other => return Err(Error::InvalidArgument(format!("train.optimizer: unknown {other:?}"))),
                }
            }
            ("train", "momentum") => self.train.momentum = parse(s, k, value)?,
            ("run", "seed") => self.run.seed = parse(s, k, value)?,
            _ => return Err(Error::InvalidArgument(format!("unknown config key {s}.{k}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` of an INI file.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let ini = ini::Ini::load_from_file(path)
            .map_err(|e| Error::InvalidArgument(format!("config {}: {e}", path.display())))?;
        for (section, props) in ini.iter() {
            for (key, value) in props.iter() {
                let section = section.ok_or_else(|| {
                    Error::InvalidArgument(format!("config {}: key {key:?} outside a section", path.display()))
                })?;
                self.set(section, key, value)?;
            }
        }
        Ok(())
    }

    /// Defaults, then the file, then flags, then the `--seed` shorthand.
    pub fn resolve(overrides: &ConfigOverrides) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = &overrides.config_file {
            cfg.apply_file(path)?;
        }
        for (section, key, value) in &overrides.values {
            cfg.set(section, key, value)?;
        }
        if let Some(seed) = overrides.seed {
            cfg.run.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.split_ratios().validate()?;
        if self.ingest.window_len == 0 || self.ingest.segment_len == 0 {
            return Err(Error::InvalidArgument("window and segment lengths must be positive".into()));
        }
        if !self.dsp.n_fft.is_power_of_two() || self.dsp.hop == 0 {
            return Err(Error::InvalidArgument("dsp.n_fft must be a power of two and dsp.hop positive".into()));
        }
        self.delta_mode()?;
        self.train_config().validate()?;
        Ok(())
    }

    pub fn split_ratios(&self) -> SplitRatios {
        SplitRatios {
            train: self.ingest.split_train,
            val: self.ingest.split_val,
            test: self.ingest.split_test,
        }
    }

    pub fn delta_mode(&self) -> Result<DeltaMode> {
        match DeltaMode::from_str(&self.dsp.delta)? {
            DeltaMode::Regression { .. } => {
                let width = self.dsp.delta_width;
                if width < 3 || width % 2 == 0 {
                    return Err(Error::InvalidArgument(format!("dsp.delta_width {width} must be odd and ≥ 3")));
                }
                Ok(DeltaMode::Regression { width })
            }
            d => Ok(d),
        }
    }

    pub fn feature_config(&self) -> Result<FeatureConfig> {
        Ok(FeatureConfig {
            segment_len: self.ingest.segment_len,
            n_fft: self.dsp.n_fft,
            hop: self.dsp.hop,
            delta: self.delta_mode()?,
        })
    }

    pub fn model_config(&self, input_shape: [usize; 3]) -> ModelConfig {
        ModelConfig {
            stem_channels: self.model.stem_channels,
            feature_channels: self.model.feature_channels,
            attention_hidden: self.model.attention_hidden,
            input_shape,
            seed: self.run.seed,
            standardize: self.model.standardize,
            ..ModelConfig::default()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.train.lr,
            batch_size: self.train.batch_size,
            max_epochs: self.train.max_epochs,
            patience: self.train.patience,
            seed: self.run.seed,
            class_weighting: self.train.class_weighting,
            optimizer: self.train.optimizer,
            momentum: self.train.momentum,
            checkpoint_dir: None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Config-file path plus one optional flag per [`CONFIG_KEYS`] entry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub config_file: Option<PathBuf>,
    pub seed: Option<u64>,
    pub values: Vec<(String, String, String)>,
}

fn split_key(flag: &str) -> (&str, &str) {
    flag.split_once('.').expect("config keys are section.key")
}

impl FromArgMatches for ConfigOverrides {
    fn from_arg_matches(m: &ArgMatches) -> std::result::Result<Self, clap::Error> {
        let mut out = Self::default();
        out.update_from_arg_matches(m)?;
        Ok(out)
    }

    fn update_from_arg_matches(&mut self, m: &ArgMatches) -> std::result::Result<(), clap::Error> {
        if let Some(p) = m.get_one::<PathBuf>("config") {
            self.config_file = Some(p.clone());
        }
        if let Some(s) = m.get_one::<u64>("seed") {
            self.seed = Some(*s);
        }
        for (flag, _) in CONFIG_KEYS {
            if let Some(v) = m.get_one::<String>(flag) {
                let (section, key) = split_key(flag);
                self.values.push((section.to_string(), key.to_string(), v.clone()));
            }
        }
        Ok(())
    }
}

impl Args for ConfigOverrides {
    fn augment_args(cmd: Command) -> Command {
        let mut cmd = cmd
            .arg(
                Arg::new("config")
                    .long("config")
                    .value_name("FILE")
                    .value_parser(clap::value_parser!(PathBuf))
                    .help("INI file with [ingest], [dsp], [model], [train] and [run] sections"),
            )
            .arg(
                Arg::new("seed")
                    .long("seed")
                    .value_name("N")
                    .value_parser(clap::value_parser!(u64))
                    .help("shorthand for --run.seed"),
            );
        for (flag, help) in CONFIG_KEYS {
            cmd = cmd.arg(
                Arg::new(*flag)
                    .long(*flag)
                    .value_name("VALUE")
                    .help(*help)
                    .help_heading("Configuration"),
            );
        }
        cmd
    }

    fn augment_args_for_update(cmd: Command) -> Command {
        Self::augment_args(cmd)
    }
}
