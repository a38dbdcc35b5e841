use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub const N_CLASSES: usize = 3;

/// Diagnostic class of a recording, in the fixed order used by every
/// confusion matrix and probability vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Myopathy = 0,
    Normal = 1,
    Als = 2,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; N_CLASSES] = [ClassLabel::Myopathy, ClassLabel::Normal, ClassLabel::Als];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self, Error> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::InvalidLabel(format!("class index {i}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Myopathy => "myopathy",
            ClassLabel::Normal => "normal",
            ClassLabel::Als => "als",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "myopathy" => Ok(ClassLabel::Myopathy),
            "normal" => Ok(ClassLabel::Normal),
            "als" => Ok(ClassLabel::Als),
            other => Err(Error::InvalidLabel(other.to_string())),
        }
    }
}
