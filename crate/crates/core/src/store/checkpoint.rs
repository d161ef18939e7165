use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::cells::CellConfig;
use crate::engine::{LossKind, Model, OptimizerConfig, OptimizerKind, OptimizerState, Params};
use crate::error::{Error, Result};
use crate::numkit::Scalar;
use crate::store::kv;

pub const CHECKPOINT_MAGIC: &str = "#refined-gates-ckpt";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Where training stood when the checkpoint was written.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Progress {
    pub epoch: usize,
    pub seed: u64,
    /// Position of the shuffling generator's stream.
    pub word_pos: u128,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub model: Model<T>,
    pub progress: Option<Progress>,
    pub optimizer: Option<OptimizerState<T>>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn of_model(model: Model<T>) -> Self {
        Checkpoint {
            model,
            progress: None,
            optimizer: None,
        }
    }
}

/// Values are written with 17 significant digits, which round-trips every
/// f64 (and therefore every f32) exactly.
fn push_value(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.16e}");
}

pub fn config_line(cfg: &CellConfig, classes: usize, loss: LossKind) -> String {
    format!(
        "arch={} input={} hidden={} refine={} gates={} unsafe_forget={} project_input={} unit_forget_bias={} classes={} loss={}",
        cfg.arch,
        cfg.input_size,
        cfg.hidden_size,
        cfg.refine_mode,
        cfg.refined_gates,
        cfg.unsafe_allow_forget_refine,
        cfg.project_input,
        cfg.unit_forget_bias,
        classes,
        loss.name()
    )
}

fn parse_config(map: &HashMap<String, String>) -> std::result::Result<(CellConfig, usize, LossKind), String> {
    let get = |k: &str| map.get(k).ok_or_else(|| format!("config lacks `{k}`"));
    let arch = get("arch")?.parse().map_err(|e: Error| e.to_string())?;
    let input = kv::number(get("input")?, "input")?;
    let hidden = kv::number(get("hidden")?, "hidden")?;
    let mut cfg = CellConfig::new(arch, input, hidden);
    cfg.refine_mode = get("refine")?.parse().map_err(|e: Error| e.to_string())?;
    cfg.refined_gates = get("gates")?.parse().map_err(|e: Error| e.to_string())?;
    cfg.unsafe_allow_forget_refine = kv::flag(get("unsafe_forget")?, "unsafe_forget")?;
    cfg.project_input = kv::flag(get("project_input")?, "project_input")?;
    cfg.unit_forget_bias = kv::flag(get("unit_forget_bias")?, "unit_forget_bias")?;
    let classes = kv::number(get("classes")?, "classes")?;
    let loss = get("loss")?.parse().map_err(|e: Error| e.to_string())?;
    Ok((cfg, classes, loss))
}

fn push_params<T: Scalar>(out: &mut String, tag: &str, cfg: &CellConfig, params: &Params<T>) {
    for block in params.blocks(cfg) {
        let _ = writeln!(out, "@{tag} {} {} {}", block.name, block.rows, block.cols);
        for row in block.data.chunks(block.cols.max(1)) {
            for (k, &v) in row.iter().enumerate() {
                if k > 0 {
                    out.push(' ');
                }
                push_value(out, v.to_f64_lossless());
            }
            out.push('\n');
        }
    }
}

pub fn encode_checkpoint<T: Scalar>(ck: &Checkpoint<T>) -> String {
    let m = &ck.model;
    let mut out = format!("{CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION}\n");
    let _ = writeln!(out, "@config {}", config_line(&m.cfg, m.classes, m.loss));
    if let Some(p) = ck.progress {
        let _ = writeln!(out, "@progress epoch={} seed={} word_pos={}", p.epoch, p.seed, p.word_pos);
    }
    push_params(&mut out, "param", &m.cfg, &m.params);
    if let Some(opt) = &ck.optimizer {
        let c = opt.cfg;
        out.push_str("@optimizer");
        let _ = write!(out, " kind={} steps={} lr=", c.kind, opt.steps);
        for (name, v) in [("", c.lr), (" beta1=", c.beta1), (" beta2=", c.beta2), (" rho=", c.rho), (" eps=", c.eps)] {
            out.push_str(name);
            push_value(&mut out, v);
        }
        out.push('\n');
        if let Some(s) = &opt.slot1 {
            push_params(&mut out, "slot1", &m.cfg, s);
        }
        if let Some(s) = &opt.slot2 {
            push_params(&mut out, "slot2", &m.cfg, s);
        }
    }
    out.push_str("@end\n");
    out
}

pub fn save_checkpoint<T: Scalar>(path: &Path, ck: &Checkpoint<T>) -> Result<()> {
    std::fs::write(path, encode_checkpoint(ck)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Checkpoint<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&text, path)
}

/// Loads a checkpoint and insists it was written for `expected`.
pub fn load_checkpoint_for<T: Scalar>(path: &Path, expected: &CellConfig) -> Result<Checkpoint<T>> {
    let ck = load_checkpoint::<T>(path)?;
    if ck.model.cfg != *expected {
        return Err(Error::Config(format!(
            "checkpoint holds `{}` but `{}` was requested",
            ck.model.cfg.label(),
            expected.label()
        )));
    }
    Ok(ck)
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    path: &'a Path,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::parse(self.path, 0, "file ends before `@end` (truncated?)"))
    }

    fn peek(&mut self) -> Option<&'a str> {
        self.inner.peek().map(|(_, l)| *l)
    }
}

fn read_block<T: Scalar>(
    lines: &mut Lines<'_>,
    header_line: usize,
    header: &str,
    tag: &str,
    cfg: &CellConfig,
    params: &mut Params<T>,
    seen: &mut Vec<String>,
) -> Result<()> {
    let path = lines.path;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(Error::parse(path, header_line, format!("malformed `@{tag}` header")));
    }
    let name = fields[1];
    let rows: usize = fields[2]
        .parse()
        .map_err(|_| Error::parse(path, header_line, "bad row count"))?;
    let cols: usize = fields[3]
        .parse()
        .map_err(|_| Error::parse(path, header_line, "bad column count"))?;
    let layout: Vec<(String, usize, usize)> = params
        .blocks(cfg)
        .into_iter()
        .map(|b| (b.name, b.rows, b.cols))
        .collect();
    let idx = layout.iter().position(|(n, _, _)| n == name).ok_or_else(|| Error::Shape {
        name: name.to_string(),
        expected: "a block of the configured model".into(),
        found: format!("unknown block `{name}`"),
    })?;
    let (_, want_r, want_c) = layout[idx];
    if (rows, cols) != (want_r, want_c) {
        return Err(Error::Shape {
            name: name.to_string(),
            expected: format!("{want_r}x{want_c}"),
            found: format!("{rows}x{cols}"),
        });
    }
    let key = format!("{tag}:{name}");
    if seen.contains(&key) {
        return Err(Error::parse(path, header_line, format!("duplicate block `{name}`")));
    }
    seen.push(key);
    let mut values = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let (ln, line) = lines.next()?;
        if line.starts_with('@') {
            return Err(Error::parse(path, ln, format!("block `{name}` is missing rows")));
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(path, ln, format!("`{tok}` is not a number")))?;
            values.push(T::of(v));
        }
        if values.len() - before != cols {
            return Err(Error::parse(
                path,
                ln,
                format!("expected {cols} values, found {}", values.len() - before),
            ));
        }
    }
    params.blocks_mut()[idx].copy_from_slice(&values);
    Ok(())
}

pub fn decode_checkpoint<T: Scalar>(text: &str, path: &Path) -> Result<Checkpoint<T>> {
    let mut lines = Lines {
        inner: text.lines().enumerate().peekable(),
        path,
    };
    let (_, first) = lines.next()?;
    let version = first
        .strip_prefix(CHECKPOINT_MAGIC)
        .and_then(|rest| rest.trim().strip_prefix('v'))
        .ok_or_else(|| Error::parse(path, 1, "not a checkpoint file"))?;
    let version: u32 = version
        .parse()
        .map_err(|_| Error::parse(path, 1, format!("bad version `{version}`")))?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version.to_string(),
            supported: CHECKPOINT_VERSION.to_string(),
        });
    }
    let (ln, cfg_line) = lines.next()?;
    let cfg_text = cfg_line
        .strip_prefix("@config ")
        .ok_or_else(|| Error::parse(path, ln, "expected `@config`"))?;
    let map = kv::parse_line(cfg_text).map_err(|m| Error::parse(path, ln, m))?;
    let (cfg, classes, loss) = parse_config(&map).map_err(|m| Error::parse(path, ln, m))?;
    let mut model = Model::zeros(cfg, classes, loss)?;
    let mut progress = None;
    let mut optimizer: Option<OptimizerState<T>> = None;
    let mut seen = Vec::new();
    loop {
        let (ln, line) = lines.next()?;
        let tag = line.split_whitespace().next().unwrap_or("");
        match tag {
            "@end" => break,
            "@progress" => {
                let m = kv::parse_line(&line["@progress".len()..]).map_err(|e| Error::parse(path, ln, e))?;
                let field = |k: &str| {
                    m.get(k)
                        .ok_or_else(|| Error::parse(path, ln, format!("progress lacks `{k}`")))
                };
                let bad = |k: &str| Error::parse(path, ln, format!("bad `{k}`"));
                progress = Some(Progress {
                    epoch: field("epoch")?.parse().map_err(|_| bad("epoch"))?,
                    seed: field("seed")?.parse().map_err(|_| bad("seed"))?,
                    word_pos: field("word_pos")?.parse().map_err(|_| bad("word_pos"))?,
                });
            }
            "@param" => read_block(&mut lines, ln, line, "param", &cfg, &mut model.params, &mut seen)?,
            "@optimizer" => {
                let m = kv::parse_line(&line["@optimizer".len()..]).map_err(|e| Error::parse(path, ln, e))?;
                let num = |k: &str| -> Result<f64> {
                    m.get(k)
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| Error::parse(path, ln, format!("optimizer lacks a numeric `{k}`")))
                };
                let kind: OptimizerKind = m
                    .get("kind")
                    .ok_or_else(|| Error::parse(path, ln, "optimizer lacks `kind`"))?
                    .parse()?;
                let ocfg = OptimizerConfig {
                    kind,
                    lr: num("lr")?,
                    beta1: num("beta1")?,
                    beta2: num("beta2")?,
                    rho: num("rho")?,
                    eps: num("eps")?,
                };
                let mut st = OptimizerState::new(ocfg, &model.params);
                st.steps = num("steps")? as u64;
                optimizer = Some(st);
            }
            "@slot1" | "@slot2" => {
                let st = optimizer
                    .as_mut()
                    .ok_or_else(|| Error::parse(path, ln, "optimizer slot before `@optimizer`"))?;
                let slot = if tag == "@slot1" { &mut st.slot1 } else { &mut st.slot2 };
                let target = slot
                    .as_mut()
                    .ok_or_else(|| Error::parse(path, ln, "this optimizer keeps no slots"))?;
                read_block(&mut lines, ln, line, &tag[1..], &cfg, target, &mut seen)?;
            }
            _ => return Err(Error::parse(path, ln, format!("unexpected line `{line}`"))),
        }
    }
    if let Some(extra) = lines.peek() {
        if !extra.trim().is_empty() {
            return Err(Error::parse(path, 0, "content after `@end`"));
        }
    }
    let expected = model.params.blocks(&cfg).len();
    let params_seen = seen.iter().filter(|k| k.starts_with("param:")).count();
    if params_seen != expected {
        return Err(Error::Shape {
            name: "model".into(),
            expected: format!("{expected} parameter blocks"),
            found: format!("{params_seen} parameter blocks"),
        });
    }
    Ok(Checkpoint {
        model,
        progress,
        optimizer,
    })
}
