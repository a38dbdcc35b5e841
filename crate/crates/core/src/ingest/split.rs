use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::Segment;
use crate::label::{ClassLabel, N_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.val, self.test];
        if all.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidArgument(format!("split ratios must be positive: {all:?}")));
        }
        if (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("split ratios must sum to 1: {all:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectSplit<T> {
    pub train: Vec<Segment<T>>,
    pub val: Vec<Segment<T>>,
    pub test: Vec<Segment<T>>,
}

/// Assigns whole subjects to train/val/test, stratified by class.
///
/// Each subject is filed under the label of its first segment. Within every
/// class the subjects are shuffled with `seed` and split by the ratios, with
/// at least one subject per split, so every class appears in every split.
/// Segment order within a split follows the input order.
pub fn split_by_subject<T: Clone>(
    segments: &[Segment<T>],
    ratios: SplitRatios,
    seed: u64,
) -> Result<SubjectSplit<T>> {
    ratios.validate()?;
    let mut subject_class: BTreeMap<&str, ClassLabel> = BTreeMap::new();
    for s in segments {
        subject_class.entry(s.subject_id.as_str()).or_insert(s.label);
    }
    let mut per_class: [Vec<&str>; N_CLASSES] = Default::default();
    for (subject, label) in &subject_class {
        per_class[label.index()].push(subject);
    }
    if let Some(c) = per_class.iter().position(|v| v.len() < 3) {
        return Err(Error::Split(format!(
            "class {} has {} subject(s), need at least 3",
            ClassLabel::ALL[c],
            per_class[c].len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // 0 = train, 1 = val, 2 = test
    let mut assignment: BTreeMap<&str, usize> = BTreeMap::new();
    for subjects in per_class.iter_mut() {
        subjects.shuffle(&mut rng);
        let n = subjects.len();
        let n_val = ((ratios.val * n as f64).round() as usize).max(1);
        let n_test = ((ratios.test * n as f64).round() as usize).max(1);
        let n_train = n.saturating_sub(n_val + n_test).max(1);
        let n_val = n_val.min(n - n_train - 1);
        for (i, s) in subjects.iter().enumerate() {
            let part = if i < n_train {
                0
            } else if i < n_train + n_val {
                1
            } else {
                2
            };
            assignment.insert(s, part);
        }
    }

    let mut out = SubjectSplit {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for s in segments {
        match assignment[s.subject_id.as_str()] {
            0 => out.train.push(s.clone()),
            1 => out.val.push(s.clone()),
            _ => out.test.push(s.clone()),
        }
    }
    Ok(out)
}
