//! Model file layout, all integers little-endian:
//!
//! ```text
//! "SMDL"  version:u32
//! stem feature hidden kh kw f t c n_classes : u32 × 9   seed:u64   flags:u8 (bit 0 = standardize)
//! channels:u32  mean:f32 × channels  std:f32 × channels
//! blob_count:u32  { len:u32  values:f32 × len } × blob_count
//! crc32 of everything above : u32
//! ```
//!
//! Blobs follow `PARAM_NAMES`, then running mean and variance of the stem,
//! first and second feature-block batch norms. Values are stored as `f32`, so
//! only `f32` models round-trip bitwise.

use std::path::Path;

use super::{ModelConfig, ModelState, Standardization};
use crate::error::{Error, Result};
use crate::fsutil::{read_file, write_atomic};
use crate::scalar::Scalar;

pub const MODEL_MAGIC: &[u8; 4] = b"SMDL";
pub const MODEL_VERSION: u32 = 1;

fn put_u32(buf: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("{v} exceeds u32")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_blob<T: Scalar>(buf: &mut Vec<u8>, values: &[T]) -> Result<()> {
    put_u32(buf, values.len())?;
    for &v in values {
        buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    Ok(())
}

pub fn encode_model<T: Scalar>(model: &ModelState<T>) -> Result<Vec<u8>> {
    let cfg = &model.config;
    let mut buf = Vec::new();
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    for v in [
        cfg.stem_channels,
        cfg.feature_channels,
        cfg.attention_hidden,
        cfg.kernel.0,
        cfg.kernel.1,
        cfg.input_shape[0],
        cfg.input_shape[1],
        cfg.input_shape[2],
        cfg.n_classes,
    ] {
        put_u32(&mut buf, v)?;
    }
    buf.extend_from_slice(&cfg.seed.to_le_bytes());
    buf.push(u8::from(cfg.standardize));

    let st = &model.standardization;
    put_u32(&mut buf, st.channels())?;
    for &v in st.mean.iter().chain(&st.std) {
        buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }

    let mut blobs = model.params();
    for bn in model.batchnorms() {
        blobs.push(&bn.running_mean);
        blobs.push(&bn.running_var);
    }
    put_u32(&mut buf, blobs.len())?;
    for b in blobs {
        put_blob(&mut buf, b)?;
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

pub fn save_model<T: Scalar>(model: &ModelState<T>, path: &Path) -> Result<()> {
    let bytes = encode_model(model)?;
    write_atomic(path, |w| w.write_all(&bytes))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::MalformedHeader("model file ends early".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn f32s<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::MalformedHeader("blob too large".into()))?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| T::lit(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64))
            .collect())
    }
}

pub fn decode_model<T: Scalar>(bytes: &[u8]) -> Result<ModelState<T>> {
    if bytes.len() < 12 {
        return Err(Error::Checksum("model file too short to hold a checksum".into()));
    }
    if &bytes[..4] != MODEL_MAGIC {
        return Err(Error::MalformedHeader("not a model file (bad magic)".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let actual = crc32fast::hash(body);
    if stored != actual {
        return Err(Error::Checksum(format!(
            "model file checksum {actual:08x} does not match stored {stored:08x}"
        )));
    }
    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u32()? as u32;
    if version != MODEL_VERSION {
        return Err(Error::Version {
            what: "model file",
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let mut v = [0usize; 9];
    for slot in &mut v {
        *slot = r.u32()?;
    }
    let seed = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
    let flags = r.take(1)?[0];
    let config = ModelConfig {
        stem_channels: v[0],
        feature_channels: v[1],
        attention_hidden: v[2],
        kernel: (v[3], v[4]),
        input_shape: [v[5], v[6], v[7]],
        n_classes: v[8],
        seed,
        standardize: flags & 1 == 1,
    };
    config
        .validate()
        .map_err(|e| Error::MalformedHeader(format!("stored config invalid: {e}")))?;
    let mut model = ModelState::<T>::zeros(&config)?;

    let channels = r.u32()?;
    if channels != config.input_shape[2] {
        return Err(Error::MalformedHeader(format!(
            "standardization covers {channels} channels, input has {}",
            config.input_shape[2]
        )));
    }
    let mean = r.f32s(channels)?;
    let std = r.f32s(channels)?;
    if std.iter().any(|s: &T| !(*s > T::zero())) {
        return Err(Error::MalformedHeader("standardization std must be positive".into()));
    }
    model.standardization = Standardization { mean, std };

    let count = r.u32()?;
    let mut blobs = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u32()?;
        blobs.push(r.f32s::<T>(len)?);
    }
    if r.pos != body.len() {
        return Err(Error::MalformedHeader("trailing bytes after parameter blobs".into()));
    }

    let mut targets = model.params_mut();
    let n_params = targets.len();
    if count != n_params + 6 {
        return Err(Error::MalformedHeader(format!("expected {} blobs, found {count}", n_params + 6)));
    }
    for (i, (dst, src)) in targets.iter_mut().zip(&blobs).enumerate() {
        if dst.len() != src.len() {
            return Err(Error::MalformedHeader(format!(
                "blob {} has {} values, config implies {}",
                super::PARAM_NAMES[i],
                src.len(),
                dst.len()
            )));
        }
        dst.copy_from_slice(src);
    }
    let mut rest = blobs[n_params..].iter();
    for bn in model.batchnorms_mut() {
        for dst in [&mut bn.running_mean, &mut bn.running_var] {
            let src = rest.next().expect("count checked");
            if src.len() != dst.len() {
                return Err(Error::MalformedHeader("running statistics length mismatch".into()));
            }
            dst.copy_from_slice(src);
        }
    }
    if !model.all_finite() {
        return Err(Error::NonFinite("model file holds NaN or infinite parameters".into()));
    }
    Ok(model)
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<ModelState<T>> {
    decode_model(&read_file(path)?)
}

/// Load and require the stored architecture to equal `expected`.
pub fn load_model_expecting<T: Scalar>(path: &Path, expected: &ModelConfig) -> Result<ModelState<T>> {
    let model = load_model(path)?;
    if !model.config.same_architecture(expected) {
        return Err(Error::ConfigMismatch(format!(
            "{} was built for {:?}, expected {:?}",
            path.display(),
            model.config,
            expected
        )));
    }
    Ok(model)
}
