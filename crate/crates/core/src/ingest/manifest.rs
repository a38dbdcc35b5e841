use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::ingest::SignalFormat;
use crate::label::ClassLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitTag {
    Train,
    Val,
    Test,
    /// Assigned later by a subject-disjoint split.
    Auto,
}

impl SplitTag {
    pub fn name(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
            SplitTag::Auto => "auto",
        }
    }
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SplitTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(SplitTag::Train),
            "val" => Ok(SplitTag::Val),
            "test" => Ok(SplitTag::Test),
            "auto" => Ok(SplitTag::Auto),
            other => Err(Error::Manifest(format!("unknown split tag {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub format: SignalFormat,
    pub label: ClassLabel,
    pub subject_id: String,
    pub split: SplitTag,
}

impl ManifestEntry {
    /// Recording identifier: the file stem.
    pub fn recording_id(&self) -> String {
        self.path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.path.display().to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

#[derive(Deserialize)]
struct Row {
    path: String,
    format: String,
    label: String,
    subject: String,
    split: String,
}

/// Parses a manifest CSV (`path,format,label,subject,split`). Relative paths
/// resolve against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?
        .clone();
    let expected = ["path", "format", "label", "subject", "split"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Manifest(format!(
            "{}: header must be `{}`",
            path.display(),
            expected.join(",")
        )));
    }
    let mut entries = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::Manifest(format!("{} row {}: {e}", path.display(), i + 1)))?;
        let file = PathBuf::from(&row.path);
        entries.push(ManifestEntry {
            path: if file.is_absolute() { file } else { base.join(file) },
            format: row.format.parse()?,
            label: row.label.parse()?,
            subject_id: row.subject,
            split: row.split.parse()?,
        });
    }
    let manifest = DatasetManifest { entries };
    manifest.validate()?;
    Ok(manifest)
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(&e.path) {
                return Err(Error::Manifest(format!("duplicate path {}", e.path.display())));
            }
        }
        Ok(())
    }
}

/// Writes a manifest with paths relative to the manifest's directory when
/// possible.
pub fn write_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    manifest.validate()?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut out = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Manifest(e.to_string());
    out.write_record(["path", "format", "label", "subject", "split"]).map_err(csv_err)?;
    for e in &manifest.entries {
        let rel = e.path.strip_prefix(base).unwrap_or(&e.path);
        out.write_record([
            rel.to_string_lossy().as_ref(),
            e.format.tag(),
            e.label.name(),
            e.subject_id.as_str(),
            e.split.name(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = out.into_inner().map_err(|e| Error::Manifest(e.to_string()))?;
    write_atomic(path, |w| w.write_all(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn parses_and_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("manifest.csv");
        fs::write(
            &m,
            "path,format,label,subject,split\nsig/a.semg,semg,myopathy,p1,auto\n/abs/b.txt,txt,ALS,p2,test\n",
        )
        .unwrap();
        let man = load_manifest(&m).unwrap();
        assert_eq!(man.entries.len(), 2);
        assert_eq!(man.entries[0].path, dir.path().join("sig/a.semg"));
        assert_eq!(man.entries[0].recording_id(), "a");
        assert_eq!(man.entries[1].label, ClassLabel::Als);
        assert_eq!(man.entries[1].split, SplitTag::Test);
        assert_eq!(man.entries[1].format, SignalFormat::Txt);
    }

    #[test]
    fn rejects_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("manifest.csv");
        for body in [
            "path,format,label,subject,split\na.semg,semg,healthy,p1,auto\n",
            "path,format,label,subject,split\na.semg,wav,normal,p1,auto\n",
            "path,format,label,subject,split\na.semg,semg,normal,p1,holdout\n",
            "path,format,label,subject,split\na.semg,semg,normal,p1,auto\na.semg,semg,normal,p1,auto\n",
            "file,format,label,subject,split\na.semg,semg,normal,p1,auto\n",
        ] {
            fs::write(&m, body).unwrap();
            assert!(load_manifest(&m).is_err(), "accepted {body:?}");
        }
    }

    #[test]
    fn write_then_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("manifest.csv");
        let man = DatasetManifest {
            entries: vec![ManifestEntry {
                path: dir.path().join("x/r0.semg"),
                format: SignalFormat::Semg,
                label: ClassLabel::Normal,
                subject_id: "n-01".into(),
                split: SplitTag::Auto,
            }],
        };
        write_manifest(&m, &man).unwrap();
        assert!(fs::read_to_string(&m).unwrap().contains("x/r0.semg,semg,normal,n-01,auto"));
        assert_eq!(load_manifest(&m).unwrap(), man);
    }
}
