use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::store::kv;
use crate::tasks::{bits_to_string, parse_bits, AddingSample, CountingSample, TaskKind};

pub const DATASET_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Samples {
    Adding(Vec<AddingSample>),
    Counting(Vec<CountingSample>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub len: usize,
    pub seed: u64,
    pub samples: Samples,
}

impl Dataset {
    pub fn task(&self) -> TaskKind {
        match self.samples {
            Samples::Adding(_) => TaskKind::Adding,
            Samples::Counting(_) => TaskKind::Counting,
        }
    }

    pub fn size(&self) -> usize {
        match &self.samples {
            Samples::Adding(s) => s.len(),
            Samples::Counting(s) => s.len(),
        }
    }
}

pub fn encode_dataset(ds: &Dataset) -> String {
    let mut out = format!(
        "#task={} L={} seed={} version={DATASET_VERSION}\n",
        ds.task(),
        ds.len,
        ds.seed
    );
    match &ds.samples {
        Samples::Adding(v) => {
            for s in v {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}",
                    bits_to_string(&s.a),
                    bits_to_string(&s.b),
                    bits_to_string(&s.s)
                );
            }
        }
        Samples::Counting(v) => {
            for s in v {
                let _ = writeln!(out, "{}\t{}", bits_to_string(&s.bits), s.count);
            }
        }
    }
    out
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    std::fs::write(path, encode_dataset(ds)).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path, task: TaskKind) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_dataset(&text, task, path)
}

/// Parses a dataset, re-verifying every label against its bits.
pub fn decode_dataset(text: &str, task: TaskKind, path: &Path) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .and_then(|(_, l)| l.strip_prefix('#'))
        .ok_or_else(|| Error::parse(path, 1, "missing `#task=...` header"))?;
    let m = kv::parse_line(header).map_err(|e| Error::parse(path, 1, e))?;
    let get = |k: &str| m.get(k).ok_or_else(|| Error::parse(path, 1, format!("header lacks `{k}`")));
    let found: TaskKind = get("task")?.parse()?;
    if found != task {
        return Err(Error::Config(format!(
            "{} holds a {found} dataset, expected {task}",
            path.display()
        )));
    }
    let version: u32 = kv::number(get("version")?, "version").map_err(|e| Error::parse(path, 1, e))?;
    if version != DATASET_VERSION {
        return Err(Error::Version {
            found: version.to_string(),
            supported: DATASET_VERSION.to_string(),
        });
    }
    let len: usize = kv::number(get("L")?, "L").map_err(|e| Error::parse(path, 1, e))?;
    let seed: u64 = kv::number(get("seed")?, "seed").map_err(|e| Error::parse(path, 1, e))?;
    let bits = |s: &str, ln: usize| -> Result<Vec<u8>> {
        let b = parse_bits(s).map_err(|e| Error::parse(path, ln, e.to_string()))?;
        if b.len() != len {
            return Err(Error::parse(path, ln, format!("expected {len} bits, found {}", b.len())));
        }
        Ok(b)
    };
    let body = lines.filter(|(_, l)| !l.trim().is_empty());
    let samples = match task {
        TaskKind::Adding => Samples::Adding(
            body.map(|(i, line)| {
                let ln = i + 1;
                let f: Vec<&str> = line.split('\t').collect();
                if f.len() != 3 {
                    return Err(Error::parse(path, ln, "expected `a<TAB>b<TAB>s`"));
                }
                let s = AddingSample {
                    a: bits(f[0], ln)?,
                    b: bits(f[1], ln)?,
                    s: bits(f[2], ln)?,
                };
                s.verify().map_err(|e| Error::parse(path, ln, e.to_string()))?;
                Ok(s)
            })
            .collect::<Result<_>>()?,
        ),
        TaskKind::Counting => Samples::Counting(
            body.map(|(i, line)| {
                let ln = i + 1;
                let f: Vec<&str> = line.split('\t').collect();
                if f.len() != 2 {
                    return Err(Error::parse(path, ln, "expected `bits<TAB>count`"));
                }
                let s = CountingSample {
                    bits: bits(f[0], ln)?,
                    count: f[1]
                        .parse()
                        .map_err(|_| Error::parse(path, ln, format!("bad count `{}`", f[1])))?,
                };
                s.verify().map_err(|e| Error::parse(path, ln, e.to_string()))?;
                Ok(s)
            })
            .collect::<Result<_>>()?,
        ),
        TaskKind::CharLm => {
            return Err(Error::Config("character corpora are read as raw text".into()));
        }
    };
    Ok(Dataset { len, seed, samples })
}
