//! Confusion matrices, one-vs-rest metrics and evaluation reports.

mod metrics;
mod render;

pub use metrics::{
    class_metrics, fraction, macro_mean, overall_accuracy, percent_2dp, summarize, ClassMetrics, ConfusionMatrix,
    Fraction, MetricSummary, OneVsRest, Percent,
};
pub use render::{confusion_csv, confusion_svg, parse_confusion_csv, render_confusion};

use std::path::Path;

use serde::Serialize;

use crate::dsp::FeatureSet;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::label::N_CLASSES;
use crate::model::{predict, predict_probs, ModelState};
use crate::scalar::{FlushToZero, Scalar};

#[derive(Debug, Clone)]
pub struct Evaluation<T> {
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<usize>,
    pub probs: Vec<[T; N_CLASSES]>,
}

/// Infer-mode predictions for every record of `test` and their confusion matrix.
pub fn evaluate<T: Scalar>(model: &ModelState<T>, test: &FeatureSet<T>, batch: usize) -> Result<Evaluation<T>> {
    if test.is_empty() {
        return Err(Error::InvalidArgument("test set is empty".into()));
    }
    let _ftz = FlushToZero::enable();
    let probs = predict_probs(model, test, batch)?;
    let predictions: Vec<usize> = probs.iter().map(|p| predict(p)).collect();
    let truth: Vec<usize> = test.labels.iter().map(|l| l.index()).collect();
    Ok(Evaluation {
        confusion: ConfusionMatrix::from_labels(&truth, &predictions)?,
        predictions,
        probs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub sensitivity: Percent,
    pub specificity: Percent,
    pub precision: Percent,
    pub f1: Percent,
    pub accuracy: Percent,
}

impl From<&ClassMetrics> for ClassReport {
    fn from(m: &ClassMetrics) -> Self {
        Self {
            sensitivity: Percent(m.sensitivity),
            specificity: Percent(m.specificity),
            precision: Percent(m.precision),
            f1: Percent(m.f1),
            accuracy: Percent(m.accuracy),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerClass<V> {
    pub myopathy: V,
    pub normal: V,
    pub als: V,
}

/// Serialized evaluation report. Percentages carry two decimals; undefined
/// metrics appear as `"n/a"`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub overall_accuracy: Percent,
    pub macro_sensitivity: Percent,
    pub macro_specificity: Percent,
    pub per_class: PerClass<ClassReport>,
    pub confusion: [[u64; N_CLASSES]; N_CLASSES],
    pub counts: PerClass<u64>,
    pub total: u64,
    pub seed: u64,
    pub config: serde_json::Value,
}

impl Report {
    pub fn new(cm: &ConfusionMatrix, seed: u64, config: serde_json::Value) -> Result<Self> {
        let s = summarize(cm)?;
        Ok(Self {
            overall_accuracy: Percent(Some(s.overall_accuracy)),
            macro_sensitivity: Percent(s.macro_sensitivity),
            macro_specificity: Percent(s.macro_specificity),
            per_class: PerClass {
                myopathy: (&s.per_class[0]).into(),
                normal: (&s.per_class[1]).into(),
                als: (&s.per_class[2]).into(),
            },
            confusion: cm.counts,
            counts: PerClass {
                myopathy: cm.row_total(0),
                normal: cm.row_total(1),
                als: cm.row_total(2),
            },
            total: cm.total(),
            seed,
            config,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = self.to_json();
        write_atomic(path, |w| w.write_all(text.as_bytes()))
    }
}
