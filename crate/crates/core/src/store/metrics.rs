use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::store::kv;

/// One evaluation result. Serialized as a single `key=value` line.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub run: String,
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
    /// Sequence accuracy, or bits per character for language modelling.
    /// Absent for training-loss records.
    pub accuracy: Option<f64>,
    /// Wall-clock milliseconds; left out unless requested because it would
    /// break byte-for-byte reproducibility.
    pub wall_ms: Option<u64>,
    pub config_hash: String,
}

impl MetricsRecord {
    pub fn to_line(&self) -> String {
        let mut line = format!(
            "run={} epoch={} split={} loss={:.16e}",
            self.run, self.epoch, self.split, self.loss
        );
        if let Some(a) = self.accuracy {
            line.push_str(&format!(" acc={a:.16e}"));
        }
        if let Some(w) = self.wall_ms {
            line.push_str(&format!(" wall_ms={w}"));
        }
        line.push_str(&format!(" cfg={}", self.config_hash));
        line
    }

    pub fn from_line(line: &str) -> std::result::Result<Self, String> {
        let m = kv::parse_line(line)?;
        let get = |k: &str| m.get(k).ok_or_else(|| format!("record lacks `{k}`"));
        for (k, v) in [("run", get("run")?), ("split", get("split")?)] {
            if v.is_empty() {
                return Err(format!("`{k}` is empty"));
            }
        }
        Ok(MetricsRecord {
            run: get("run")?.clone(),
            epoch: kv::number(get("epoch")?, "epoch")?,
            split: get("split")?.clone(),
            loss: kv::number(get("loss")?, "loss")?,
            accuracy: m.get("acc").map(|v| kv::number(v, "acc")).transpose()?,
            wall_ms: m.get("wall_ms").map(|v| kv::number(v, "wall_ms")).transpose()?,
            config_hash: get("cfg")?.clone(),
        })
    }
}

/// First 16 hex digits of the SHA-256 of a canonical configuration string.
pub fn config_hash(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Appends one record with a single write so the file only ever gains whole
/// lines.
pub fn append_metrics(path: &Path, record: &MetricsRecord) -> Result<()> {
    if record.run.contains(char::is_whitespace) || record.split.contains(char::is_whitespace) {
        return Err(Error::Argument("run and split names must not contain whitespace".into()));
    }
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let line = record.to_line() + "\n";
    file.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads every complete line; an unterminated trailing line is ignored.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    complete
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| MetricsRecord::from_line(l).map_err(|m| Error::parse(path, i + 1, m)))
        .collect()
}
