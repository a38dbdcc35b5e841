use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fsutil::{read_file, write_atomic};
use crate::ingest::{ManifestEntry, Recording, NOMINAL_RATE_HZ};
use crate::scalar::Scalar;

pub const SIGNAL_MAGIC: &[u8; 4] = b"SEMG";
pub const SIGNAL_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalFormat {
    /// 16-byte header followed by little-endian f32 samples.
    Semg,
    /// One decimal sample per line, no header.
    Txt,
}

impl SignalFormat {
    pub fn tag(self) -> &'static str {
        match self {
            SignalFormat::Semg => "semg",
            SignalFormat::Txt => "txt",
        }
    }

    /// Guesses the format from a file extension, defaulting to binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("txt") => SignalFormat::Txt,
            _ => SignalFormat::Semg,
        }
    }
}

impl fmt::Display for SignalFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SignalFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "semg" | "bin" => Ok(SignalFormat::Semg),
            "txt" => Ok(SignalFormat::Txt),
            other => Err(Error::Manifest(format!("unknown format tag {other:?}"))),
        }
    }
}

/// Decoded samples plus the sample rate when the file carries one.
pub fn read_signal(path: &Path, format: SignalFormat) -> Result<(Vec<f32>, Option<u32>)> {
    let bytes = read_file(path)?;
    let name = path.display().to_string();
    match format {
        SignalFormat::Semg => decode_semg(&bytes, &name),
        SignalFormat::Txt => {
            let text = String::from_utf8(bytes)
                .map_err(|_| Error::MalformedHeader(format!("{name}: not UTF-8 text")))?;
            let mut samples = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                let v: f32 = line.parse().map_err(|_| {
                    Error::MalformedHeader(format!("{name}:{}: not a number: {line:?}", lineno + 1))
                })?;
                samples.push(v);
            }
            if samples.is_empty() {
                return Err(Error::EmptyRecording(name));
            }
            Ok((samples, None))
        }
    }
}

fn decode_semg(bytes: &[u8], name: &str) -> Result<(Vec<f32>, Option<u32>)> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != SIGNAL_MAGIC {
        return Err(Error::MalformedHeader(format!("{name}: missing SEMG magic")));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != SIGNAL_VERSION {
        return Err(Error::Version {
            what: "signal file",
            found: version,
            expected: SIGNAL_VERSION,
        });
    }
    let count = word(8) as usize;
    let rate = word(12);
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != count * 4 {
        return Err(Error::MalformedHeader(format!(
            "{name}: header declares {count} samples but payload holds {} bytes",
            payload.len()
        )));
    }
    if count == 0 {
        return Err(Error::EmptyRecording(name.to_string()));
    }
    if rate == 0 {
        return Err(Error::MalformedHeader(format!("{name}: zero sample rate")));
    }
    let samples = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((samples, Some(rate)))
}

pub fn write_signal(path: &Path, samples: &[f32], sample_rate_hz: u32) -> Result<()> {
    let count = u32::try_from(samples.len())
        .map_err(|_| Error::InvalidArgument("too many samples for a signal file".into()))?;
    write_atomic(path, |w| {
        w.write_all(SIGNAL_MAGIC)?;
        w.write_all(&SIGNAL_VERSION.to_le_bytes())?;
        w.write_all(&count.to_le_bytes())?;
        w.write_all(&sample_rate_hz.to_le_bytes())?;
        for s in samples {
            w.write_all(&s.to_le_bytes())?;
        }
        Ok(())
    })
}

/// Loads the recording named by a manifest entry. Headerless text files are
/// assumed to be at the nominal acquisition rate.
pub fn load_recording<T: Scalar>(entry: &ManifestEntry) -> Result<Recording<T>> {
    let (samples, rate) = read_signal(&entry.path, entry.format)?;
    let rate = rate.map(f64::from).unwrap_or(NOMINAL_RATE_HZ);
    Recording::new(
        samples.into_iter().map(|v| T::lit(v as f64)).collect(),
        rate,
        entry.label,
        entry.subject_id.clone(),
        entry.recording_id(),
    )
}
