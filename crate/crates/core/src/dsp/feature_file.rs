use std::path::Path;

use crate::dsp::FeatureTensor;
use crate::error::{Error, Result};
use crate::fsutil::{read_file, write_atomic};
use crate::label::ClassLabel;
use crate::scalar::Scalar;

pub const FEATURE_MAGIC: &[u8; 4] = b"SFTR";
pub const FEATURE_VERSION: u32 = 1;
const HEADER_LEN: usize = 24;

/// A labeled batch of feature tensors stored contiguously, record-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet<T> {
    /// `(freq_bins, frames, channels)` of every record.
    pub dims: [usize; 3],
    pub data: Vec<T>,
    pub labels: Vec<ClassLabel>,
}

impl<T: Scalar> FeatureSet<T> {
    pub fn new(dims: [usize; 3]) -> Self {
        Self {
            dims,
            data: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn record_len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn record(&self, i: usize) -> &[T] {
        let n = self.record_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn push(&mut self, t: &FeatureTensor<T>, label: ClassLabel) -> Result<()> {
        if t.shape() != self.dims {
            return Err(Error::Shape(format!("record shape {:?} vs set shape {:?}", t.shape(), self.dims)));
        }
        self.data.extend_from_slice(&t.values);
        self.labels.push(label);
        Ok(())
    }

    pub fn push_raw(&mut self, values: &[T], label: ClassLabel) -> Result<()> {
        if values.len() != self.record_len() {
            return Err(Error::Shape(format!("record of {} values, expected {}", values.len(), self.record_len())));
        }
        self.data.extend_from_slice(values);
        self.labels.push(label);
        Ok(())
    }

    /// Per-class record counts in class order.
    pub fn class_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for l in &self.labels {
            c[l.index()] += 1;
        }
        c
    }

    /// Records containing a NaN or infinity.
    pub fn non_finite_records(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.record(i).iter().any(|v| !v.is_finite()))
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut out = Self::new(self.dims);
        for &i in indices {
            out.data.extend_from_slice(self.record(i));
            out.labels.push(self.labels[i]);
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> FeatureSet<U> {
        FeatureSet {
            dims: self.dims,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
            labels: self.labels.clone(),
        }
    }
}

/// Header (`SFTR`, version, count, three dims) followed, per record, by one
/// label byte and the little-endian f32 payload in `(freq, frame, channel)`
/// order.
pub fn write_features<T: Scalar>(path: &Path, set: &FeatureSet<T>) -> Result<()> {
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("{what} {v} does not fit the feature header")))
    };
    let count = to_u32(set.len(), "record count")?;
    let dims = set.dims.map(|d| d as u32);
    for d in set.dims {
        to_u32(d, "dimension")?;
    }
    let n = set.record_len();
    write_atomic(path, |w| {
        w.write_all(FEATURE_MAGIC)?;
        w.write_all(&FEATURE_VERSION.to_le_bytes())?;
        w.write_all(&count.to_le_bytes())?;
        for d in dims {
            w.write_all(&d.to_le_bytes())?;
        }
        for (i, label) in set.labels.iter().enumerate() {
            w.write_all(&[label.index() as u8])?;
            for v in &set.data[i * n..(i + 1) * n] {
                w.write_all(&(v.as_f64() as f32).to_le_bytes())?;
            }
        }
        Ok(())
    })
}

pub fn read_features<T: Scalar>(path: &Path) -> Result<FeatureSet<T>> {
    let bytes = read_file(path)?;
    let name = path.display();
    if bytes.len() < HEADER_LEN || &bytes[..4] != FEATURE_MAGIC {
        return Err(Error::MalformedHeader(format!("{name}: missing SFTR magic")));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let version = word(4) as u32;
    if version != FEATURE_VERSION {
        return Err(Error::Version {
            what: "feature file",
            found: version,
            expected: FEATURE_VERSION,
        });
    }
    let count = word(8);
    let dims = [word(12), word(16), word(20)];
    let n: usize = dims.iter().product();
    let stride = 1 + 4 * n;
    if bytes.len() - HEADER_LEN != count * stride {
        return Err(Error::MalformedHeader(format!(
            "{name}: {count} records of {n} values need {} payload bytes, found {}",
            count * stride,
            bytes.len() - HEADER_LEN
        )));
    }
    let mut set = FeatureSet::new(dims);
    set.data.reserve(count * n);
    for rec in bytes[HEADER_LEN..].chunks_exact(stride) {
        set.labels.push(ClassLabel::from_index(rec[0] as usize)?);
        set.data.extend(
            rec[1..]
                .chunks_exact(4)
                .map(|c| T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64)),
        );
    }
    Ok(set)
}
