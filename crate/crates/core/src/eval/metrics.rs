use num_rational::Ratio;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::label::{ClassLabel, N_CLASSES};

/// Exact non-negative fraction.
pub type Fraction = Ratio<u128>;

/// Rows are true classes, columns predicted classes, both in
/// [`ClassLabel::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; N_CLASSES]; N_CLASSES],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OneVsRest {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(counts: [[u64; N_CLASSES]; N_CLASSES]) -> Self {
        Self { counts }
    }

    pub fn from_labels(truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Shape(format!(
                "{} true labels but {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut cm = Self::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= N_CLASSES || p >= N_CLASSES {
                return Err(Error::InvalidLabel(format!("label pair ({t}, {p}) outside 0..{N_CLASSES}")));
            }
            cm.counts[t][p] += 1;
        }
        Ok(cm)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..N_CLASSES).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_total(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn col_total(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    pub fn one_vs_rest(&self, c: usize) -> OneVsRest {
        let tp = self.counts[c][c];
        let fn_ = self.row_total(c) - tp;
        let fp = self.col_total(c) - tp;
        OneVsRest {
            tp,
            fp,
            tn: self.total() - tp - fn_ - fp,
            fn_,
        }
    }

    /// Relabel classes: class `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: [usize; N_CLASSES]) -> Self {
        let mut out = Self::default();
        for i in 0..N_CLASSES {
            for j in 0..N_CLASSES {
                out.counts[perm[i]][perm[j]] = self.counts[i][j];
            }
        }
        out
    }
}

/// `num/den`, or `None` when `den` is zero.
pub fn fraction(num: u64, den: u64) -> Option<Fraction> {
    (den != 0).then(|| Fraction::new(num.into(), den.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassMetrics {
    pub sensitivity: Option<Fraction>,
    pub specificity: Option<Fraction>,
    pub precision: Option<Fraction>,
    /// Harmonic mean of precision and sensitivity; undefined when either is
    /// undefined or both are zero.
    pub f1: Option<Fraction>,
    /// One-vs-rest `(TP + TN) / total`.
    pub accuracy: Option<Fraction>,
}

pub fn class_metrics(cm: &ConfusionMatrix, class: usize) -> Result<ClassMetrics> {
    if class >= N_CLASSES {
        return Err(Error::InvalidLabel(format!("class index {class}")));
    }
    let OneVsRest { tp, fp, tn, fn_ } = cm.one_vs_rest(class);
    let sensitivity = fraction(tp, tp + fn_);
    let precision = fraction(tp, tp + fp);
    let f1 = match (sensitivity, precision) {
        (Some(_), Some(_)) if tp > 0 => fraction(2 * tp, 2 * tp + fp + fn_),
        _ => None,
    };
    Ok(ClassMetrics {
        sensitivity,
        specificity: fraction(tn, tn + fp),
        precision,
        f1,
        accuracy: fraction(tp + tn, cm.total()),
    })
}

pub fn overall_accuracy(cm: &ConfusionMatrix) -> Result<Fraction> {
    fraction(cm.trace(), cm.total()).ok_or_else(|| Error::InvalidArgument("empty confusion matrix".into()))
}

/// Unweighted mean over classes; undefined if any class is.
pub fn macro_mean(values: &[Option<Fraction>]) -> Option<Fraction> {
    let mut sum = Fraction::from_integer(0);
    for v in values {
        sum += (*v)?;
    }
    Some(sum / Fraction::from_integer(values.len() as u128))
}

/// Percentage with two decimals, rounding half up, computed exactly.
pub fn percent_2dp(f: Fraction) -> String {
    let (num, den) = (*f.numer(), *f.denom());
    let hundredths = (20_000 * num + den) / (2 * den);
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

/// A percentage as printed in reports, `"n/a"` when undefined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Percent(pub Option<Fraction>);

impl Percent {
    pub fn text(&self) -> String {
        self.0.map_or_else(|| "n/a".to_string(), percent_2dp)
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Some(f) => s.serialize_f64(percent_2dp(f).parse().expect("decimal text")),
            None => s.serialize_str("n/a"),
        }
    }
}

/// All metrics of one matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricSummary {
    pub per_class: [ClassMetrics; N_CLASSES],
    pub overall_accuracy: Fraction,
    pub macro_sensitivity: Option<Fraction>,
    pub macro_specificity: Option<Fraction>,
}

pub fn summarize(cm: &ConfusionMatrix) -> Result<MetricSummary> {
    let per_class = [
        class_metrics(cm, 0)?,
        class_metrics(cm, 1)?,
        class_metrics(cm, 2)?,
    ];
    Ok(MetricSummary {
        overall_accuracy: overall_accuracy(cm)?,
        macro_sensitivity: macro_mean(&per_class.map(|m| m.sensitivity)),
        macro_specificity: macro_mean(&per_class.map(|m| m.specificity)),
        per_class,
    })
}

impl MetricSummary {
    /// Table-style text: one line per class, then the aggregates.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<10}{:>13}{:>13}{:>11}{:>10}\n",
            "class", "sensitivity", "specificity", "precision", "f1"
        );
        for (label, m) in ClassLabel::ALL.iter().zip(&self.per_class) {
            out.push_str(&format!(
                "{:<10}{:>13}{:>13}{:>11}{:>10}\n",
                label.name(),
                Percent(m.sensitivity).text(),
                Percent(m.specificity).text(),
                Percent(m.precision).text(),
                Percent(m.f1).text()
            ));
        }
        out.push_str(&format!(
            "overall accuracy {}%  macro sensitivity {}%  macro specificity {}%\n",
            percent_2dp(self.overall_accuracy),
            Percent(self.macro_sensitivity).text(),
            Percent(self.macro_specificity).text()
        ));
        out
    }
}
