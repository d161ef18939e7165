//! Command-line front end: dataset generation, training, evaluation,
//! gradient checking and probing.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::cells::{Arch, CellConfig, GateSelect, RefineMode};
use crate::engine::{
    evaluate, gradient_check, EvalStats, LossKind, Model, OptimizerConfig, OptimizerKind, Sequence,
    TrainConfig, Trainer,
};
use crate::error::{Error, Result};
use crate::numkit::{Rng, Vector};
use crate::probe;
use crate::store::{self, Checkpoint, Dataset, MetricsRecord, Progress, Samples};
use crate::tasks::{self, CharCorpus, Split, TaskKind};

/// Offset between the seeds of a task's training and test sets.
pub const TEST_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_GRADCHECK: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "gatelab", version, about = "Gated RNNs with refined gates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write training and test sets for a synthetic task.
    Gen(RunArgs),
    /// Train a model, writing metrics and checkpoints to --out.
    Train(RunArgs),
    /// Evaluate a checkpoint on the test set.
    Eval(RunArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(RunArgs),
    /// Record gate traces and statistics for a checkpoint.
    Probe(RunArgs),
}

#[derive(Args, Debug, Default, Clone)]
struct RunArgs {
    /// Plain-text key=value file; flags on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    arch: Option<String>,
    /// none, add or mul.
    #[arg(long)]
    refine: Option<String>,
    /// Comma-separated gate names, e.g. `input,output`.
    #[arg(long)]
    gates: Option<String>,
    #[arg(long)]
    hidden: Option<usize>,
    /// Sequence length (unroll length for charlm).
    #[arg(long)]
    len: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// sgd, adam or adadelta.
    #[arg(long)]
    opt: Option<String>,
    #[arg(long)]
    lr: Option<f64>,
    /// Global gradient-norm clip; 0 disables.
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    batch: Option<usize>,
    /// Directory holding dataset files.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Plain-text corpus for charlm; a synthetic corpus is used otherwise.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    /// Gradient-check tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Saturation threshold for probe statistics.
    #[arg(long)]
    eps: Option<f64>,
    /// Number of test samples whose traces are exported by probe.
    #[arg(long)]
    samples: Option<usize>,
    /// Check every legal configuration.
    #[arg(long)]
    all: bool,
    /// Allow refining the LSTM forget gate (destabilizes the memory cell).
    #[arg(long)]
    unsafe_forget: bool,
    #[arg(long)]
    stop_on_converge: bool,
    /// Record wall-clock time in metrics (breaks byte-identical reruns).
    #[arg(long)]
    wall_time: bool,
    /// Export one trace per hidden unit instead of the per-gate mean.
    #[arg(long)]
    per_unit: bool,
}

/// Fully resolved run settings.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub task: TaskKind,
    pub arch: Arch,
    pub refine: RefineMode,
    pub gates: GateSelect,
    pub hidden: usize,
    pub len: usize,
    pub epochs: usize,
    pub optimizer: OptimizerConfig,
    pub clip: Option<f64>,
    pub seed: u64,
    pub batch: usize,
    pub data: PathBuf,
    pub out: PathBuf,
    pub ckpt: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub train_size: usize,
    pub test_size: usize,
    pub tol: f64,
    pub eps: f64,
    pub samples: usize,
    pub all: bool,
    pub unsafe_forget: bool,
    pub stop_on_converge: bool,
    pub wall_time: bool,
    pub per_unit: bool,
}

impl RunConfig {
    /// Cell configuration for an input of `input_size` features.
    pub fn cell(&self, input_size: usize) -> CellConfig {
        let mut cfg = CellConfig::new(self.arch, input_size, self.hidden);
        cfg.refine_mode = self.refine;
        cfg.refined_gates = self.gates;
        cfg.unsafe_allow_forget_refine = self.unsafe_forget;
        cfg
    }

    /// Stable text used for the metrics configuration hash.
    pub fn canonical(&self) -> String {
        format!(
            "task={} arch={} refine={} gates={} hidden={} len={} epochs={} opt={} lr={:e} clip={:?} seed={} batch={} train_size={} test_size={} unsafe_forget={}",
            self.task,
            self.arch,
            self.refine,
            self.gates,
            self.hidden,
            self.len,
            self.epochs,
            self.optimizer.kind,
            self.optimizer.lr,
            self.clip,
            self.seed,
            self.batch,
            self.train_size,
            self.test_size,
            self.unsafe_forget
        )
    }

    pub fn run_id(&self) -> String {
        format!(
            "{}-L{}-{}-s{}",
            self.task,
            self.len,
            self.cell(self.hidden).label(),
            self.seed
        )
    }
}

fn read_config_file(path: &Path) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut map = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("{}:{}: expected key=value", path.display(), i + 1))
        })?;
        map.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(map)
}

fn resolve(args: &RunArgs) -> Result<RunConfig> {
    let file = match &args.config {
        Some(p) => read_config_file(p)?,
        None => HashMap::new(),
    };
    const KNOWN: &[&str] = &[
        "task", "arch", "refine", "gates", "hidden", "len", "epochs", "opt", "lr", "clip", "seed",
        "batch", "data", "out", "ckpt", "corpus", "train-size", "test-size", "tol", "eps",
        "samples", "all", "unsafe-forget", "stop-on-converge", "wall-time", "per-unit",
    ];
    if let Some(k) = file.keys().find(|k| !KNOWN.contains(&k.as_str())) {
        return Err(Error::Config(format!("unknown config key `{k}`")));
    }
    fn pick<V: std::str::FromStr>(
        flag: Option<V>,
        file: &HashMap<String, String>,
        key: &str,
    ) -> Result<Option<V>> {
        if flag.is_some() {
            return Ok(flag);
        }
        file.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("config key `{key}` has bad value `{v}`")))
            })
            .transpose()
    }
    let switch = |flag: bool, key: &str| -> Result<bool> {
        if flag {
            return Ok(true);
        }
        match file.get(key).map(String::as_str) {
            None | Some("false") => Ok(false),
            Some("true") => Ok(true),
            Some(v) => Err(Error::Config(format!("config key `{key}` must be true or false, got `{v}`"))),
        }
    };

    let task: TaskKind = pick::<String>(args.task.clone(), &file, "task")?
        .as_deref()
        .unwrap_or("adding")
        .parse()?;
    let arch: Arch = pick::<String>(args.arch.clone(), &file, "arch")?
        .as_deref()
        .unwrap_or("lstm")
        .parse()?;
    let refine: RefineMode = pick::<String>(args.refine.clone(), &file, "refine")?
        .as_deref()
        .unwrap_or("none")
        .parse()?;
    let gates: GateSelect = pick::<String>(args.gates.clone(), &file, "gates")?
        .as_deref()
        .unwrap_or("-")
        .parse()?;
    let (def_hidden, def_len) = match task {
        TaskKind::Adding => (4, 10),
        TaskKind::Counting => (2, 20),
        TaskKind::CharLm => (128, 50),
    };
    let kind: OptimizerKind = pick::<String>(args.opt.clone(), &file, "opt")?
        .as_deref()
        .unwrap_or("adadelta")
        .parse()?;
    let mut optimizer = OptimizerConfig::default_for(kind);
    if let Some(lr) = pick(args.lr, &file, "lr")? {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
        }
        optimizer.lr = lr;
    }
    let clip = match pick(args.clip, &file, "clip")?.unwrap_or(5.0) {
        0.0 => None,
        c if c > 0.0 => Some(c),
        c => return Err(Error::Config(format!("clip must be non-negative, got {c}"))),
    };
    let cfg = RunConfig {
        task,
        arch,
        refine,
        gates,
        hidden: pick(args.hidden, &file, "hidden")?.unwrap_or(def_hidden),
        len: pick(args.len, &file, "len")?.unwrap_or(def_len),
        epochs: pick(args.epochs, &file, "epochs")?.unwrap_or(100),
        optimizer,
        clip,
        seed: pick(args.seed, &file, "seed")?.unwrap_or(1),
        batch: pick(args.batch, &file, "batch")?.unwrap_or(16),
        data: pick(args.data.clone(), &file, "data")?.unwrap_or_else(|| "data".into()),
        out: pick(args.out.clone(), &file, "out")?.unwrap_or_else(|| "runs".into()),
        ckpt: pick(args.ckpt.clone(), &file, "ckpt")?,
        corpus: pick(args.corpus.clone(), &file, "corpus")?,
        train_size: pick(args.train_size, &file, "train-size")?.unwrap_or(tasks::DEFAULT_TRAIN_SIZE),
        test_size: pick(args.test_size, &file, "test-size")?.unwrap_or(tasks::DEFAULT_TEST_SIZE),
        tol: pick(args.tol, &file, "tol")?.unwrap_or(1e-5),
        eps: pick(args.eps, &file, "eps")?.unwrap_or(probe::DEFAULT_SATURATION_EPS),
        samples: pick(args.samples, &file, "samples")?.unwrap_or(5),
        all: switch(args.all, "all")?,
        unsafe_forget: switch(args.unsafe_forget, "unsafe-forget")?,
        stop_on_converge: switch(args.stop_on_converge, "stop-on-converge")?,
        wall_time: switch(args.wall_time, "wall-time")?,
        per_unit: switch(args.per_unit, "per-unit")?,
    };
    if cfg.batch == 0 || cfg.len == 0 || cfg.hidden == 0 {
        return Err(Error::Config("batch, len and hidden must be at least 1".into()));
    }
    // Reject illegal refinements before any work starts.
    cfg.cell(cfg.hidden).validate()?;
    Ok(cfg)
}

/// Maps an error onto the documented exit codes.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } | Error::Parse { .. } | Error::Version { .. } => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

/// Entry point used by the binary.
pub fn run() -> i32 {
    let stdout = std::io::stdout();
    run_with(std::env::args_os(), &mut stdout.lock())
}

/// Parses `argv` and executes the command, writing reports to `out`.
pub fn run_with<I, S, W>(argv: I, out: &mut W) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
    W: Write,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (args, cmd): (&RunArgs, fn(&RunConfig, &mut dyn Write) -> Result<i32>) = match &cli.command {
        Command::Gen(a) => (a, cmd_gen),
        Command::Train(a) => (a, cmd_train),
        Command::Eval(a) => (a, cmd_eval),
        Command::Gradcheck(a) => (a, cmd_gradcheck),
        Command::Probe(a) => (a, cmd_probe),
    };
    match resolve(args).and_then(|cfg| cmd(&cfg, out)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn emit(out: &mut dyn Write, line: &str) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn dataset_path(dir: &Path, task: TaskKind, len: usize, split: &str) -> PathBuf {
    dir.join(format!("{task}-L{len}-{split}.txt"))
}

fn synthetic_set(task: TaskKind, len: usize, count: usize, seed: u64) -> Result<Dataset> {
    let samples = match task {
        TaskKind::Adding => Samples::Adding(tasks::gen_adding_set(len, count, seed)?),
        TaskKind::Counting => Samples::Counting(tasks::gen_counting_set(len, count, seed)?),
        TaskKind::CharLm => {
            return Err(Error::Config("charlm reads a text corpus; nothing to generate".into()))
        }
    };
    Ok(Dataset { len, seed, samples })
}

fn cmd_gen(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    create_dir(&cfg.data)?;
    for (split, size, seed) in [
        ("train", cfg.train_size, cfg.seed),
        ("test", cfg.test_size, cfg.seed.wrapping_add(TEST_SEED_OFFSET)),
    ] {
        let ds = synthetic_set(cfg.task, cfg.len, size, seed)?;
        let path = dataset_path(&cfg.data, cfg.task, cfg.len, split);
        store::write_dataset(&path, &ds)?;
        emit(out, &format!("wrote {} samples to {}", ds.size(), path.display()))?;
    }
    Ok(EXIT_OK)
}

fn encode_set(ds: &Dataset) -> Vec<Sequence<f64>> {
    match &ds.samples {
        Samples::Adding(v) => v.iter().map(tasks::encode_adding).collect(),
        Samples::Counting(v) => v.iter().map(tasks::encode_counting).collect(),
    }
}

fn load_split(cfg: &RunConfig, split: &str) -> Result<Dataset> {
    let ds = store::read_dataset(&dataset_path(&cfg.data, cfg.task, cfg.len, split), cfg.task)?;
    if ds.len != cfg.len {
        return Err(Error::Config(format!("dataset has L={}, run asks for {}", ds.len, cfg.len)));
    }
    Ok(ds)
}

fn load_corpus(cfg: &RunConfig) -> Result<CharCorpus> {
    let text = match &cfg.corpus {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => tasks::synthetic_text(600_000, cfg.seed),
    };
    CharCorpus::build(&text, cfg.len, [0.9, 0.05, 0.05])
}

/// Input width, class count and loss layout of a task.
fn task_shape(cfg: &RunConfig, corpus: Option<&CharCorpus>) -> (usize, usize, LossKind) {
    match cfg.task {
        TaskKind::Adding => (2, 2, LossKind::PerStep),
        TaskKind::Counting => (2, cfg.len, LossKind::FinalStep),
        TaskKind::CharLm => {
            let v = corpus.map_or(0, CharCorpus::vocab_size);
            (v, v, LossKind::PerStep)
        }
    }
}

fn cmd_train(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let corpus = match cfg.task {
        TaskKind::CharLm => Some(load_corpus(cfg)?),
        _ => None,
    };
    let (input, classes, loss) = task_shape(cfg, corpus.as_ref());
    let mut init_rng = Rng::new(cfg.seed);
    let model = Model::new(cfg.cell(input), classes, loss, &mut init_rng)?;
    let shuffle = init_rng.fork(1);
    let tc = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch,
        optimizer: cfg.optimizer,
        clip: cfg.clip,
        stop_on_converge: cfg.stop_on_converge,
    };
    let mut trainer = Trainer::new(model, tc, shuffle)?;
    create_dir(&cfg.out)?;
    let metrics = cfg.out.join("metrics.txt");
    if metrics.exists() {
        std::fs::remove_file(&metrics).map_err(|e| Error::io(&metrics, e))?;
    }
    let hash = store::config_hash(&cfg.canonical());
    let run_id = cfg.run_id();
    let start = Instant::now();
    let mut best: Option<(f64, Checkpoint<f64>)> = None;
    let mut history = Vec::new();

    let mut on_epoch = |epoch: usize, train_loss: Option<f64>, test: EvalStats, acc: f64, t: &Trainer<f64>| -> Result<()> {
        let wall_ms = cfg.wall_time.then(|| start.elapsed().as_millis() as u64);
        let record = |split: &str, loss: f64, acc: Option<f64>| MetricsRecord {
            run: run_id.clone(),
            epoch,
            split: split.into(),
            loss,
            accuracy: acc,
            wall_ms,
            config_hash: hash.clone(),
        };
        if let Some(l) = train_loss {
            store::append_metrics(&metrics, &record("train", l, None))?;
        }
        store::append_metrics(&metrics, &record("test", test.loss, Some(acc)))?;
        emit(
            out,
            &format!("epoch={epoch} test_loss={:.6} acc={:.6}", test.loss, acc),
        )?;
        if epoch > 0 && best.as_ref().is_none_or(|(l, _)| test.loss < *l) {
            best = Some((test.loss, checkpoint_of(t)));
        }
        Ok(())
    };

    match cfg.task {
        TaskKind::Adding | TaskKind::Counting => {
            let train = encode_set(&load_split(cfg, "train")?);
            let test = encode_set(&load_split(cfg, "test")?);
            trainer.run(&train, &test, |r, t| {
                if r.epoch > 0 {
                    history.push(r.test.seq_accuracy);
                }
                on_epoch(r.epoch, r.train_loss, r.test, r.test.seq_accuracy, t)
            })?;
        }
        TaskKind::CharLm => {
            let corpus = corpus.as_ref().expect("corpus loaded for charlm");
            let train = corpus.windows::<f64>(Split::Train);
            let valid = corpus.windows::<f64>(Split::Valid);
            let test = corpus.windows::<f64>(Split::Test);
            trainer.run(&train, &valid, |r, t| {
                let bpc = tasks::char_bpc(&t.model, &test)?;
                on_epoch(r.epoch, r.train_loss, r.test, bpc, t)
            })?;
        }
    }

    store::save_checkpoint(&cfg.out.join("final.ckpt"), &checkpoint_of(&trainer))?;
    if let Some((_, ck)) = best {
        store::save_checkpoint(&cfg.out.join("best.ckpt"), &ck)?;
    }
    if trainer.nonfinite_updates > 0 {
        emit(out, &format!("skipped_nonfinite_updates={}", trainer.nonfinite_updates))?;
    }
    if cfg.task == TaskKind::Adding {
        let conv = tasks::convergence_epoch(&history).map_or("inf".to_string(), |e| e.to_string());
        emit(out, &format!("convergence_epoch={conv}"))?;
    }
    Ok(EXIT_OK)
}

fn checkpoint_of(t: &Trainer<f64>) -> Checkpoint<f64> {
    Checkpoint {
        model: t.model.clone(),
        progress: Some(Progress {
            epoch: t.epoch,
            seed: t.rng.seed(),
            word_pos: t.rng.word_pos(),
        }),
        optimizer: Some(t.opt.clone()),
    }
}

fn require_ckpt(cfg: &RunConfig) -> Result<Model<f64>> {
    let path = cfg
        .ckpt
        .as_ref()
        .ok_or_else(|| Error::Config("--ckpt is required".into()))?;
    Ok(store::load_checkpoint::<f64>(path)?.model)
}

fn cmd_eval(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let model = require_ckpt(cfg)?;
    let line = match cfg.task {
        TaskKind::CharLm => {
            let corpus = load_corpus(cfg)?;
            if corpus.vocab_size() != model.cfg.input_size {
                return Err(Error::Config(format!(
                    "checkpoint expects {} symbols, corpus has {}",
                    model.cfg.input_size,
                    corpus.vocab_size()
                )));
            }
            let bpc = tasks::char_bpc(&model, &corpus.windows(Split::Test))?;
            format!("split=test bpc={bpc:.6} uniform_bpc={:.6}", (corpus.vocab_size() as f64).log2())
        }
        _ => {
            let test = encode_set(&load_split(cfg, "test")?);
            let s = evaluate(&model, &test)?;
            format!(
                "split=test loss={:.6} seq_acc={:.6} step_acc={:.6} n={}",
                s.loss, s.seq_accuracy, s.step_accuracy, s.sequences
            )
        }
    };
    emit(out, &line)?;
    Ok(EXIT_OK)
}

/// Configurations covered by `gradcheck`.
pub fn gradcheck_grid(cfg: &RunConfig) -> Vec<CellConfig> {
    let h = cfg.hidden;
    let mut grid: Vec<CellConfig> = if cfg.all {
        Arch::ALL
            .iter()
            .flat_map(|&a| CellConfig::legal_variants(a, h, h))
            .collect()
    } else {
        vec![cfg.cell(h)]
    };
    if cfg.all && cfg.unsafe_forget {
        for mode in [RefineMode::Add, RefineMode::Mul] {
            let mut c = CellConfig::new(Arch::Lstm, h, h).refined(mode, &[crate::cells::Gate::Forget]);
            c.unsafe_allow_forget_refine = true;
            grid.push(c);
        }
    }
    // A learned projection keeps the input path under test as well.
    grid.into_iter().map(|c| c.with_projection(true)).collect()
}

fn cmd_gradcheck(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    if cfg.hidden > 8 || cfg.len > 16 {
        return Err(Error::Config(format!(
            "gradcheck needs hidden <= 8 and len <= 16 (got hidden={}, len={})",
            cfg.hidden, cfg.len
        )));
    }
    let classes = 3;
    let mut failures = 0;
    for cell in gradcheck_grid(cfg) {
        let mut rng = Rng::new(cfg.seed);
        let model = Model::new(cell, classes, LossKind::PerStep, &mut rng)?;
        let batch: Vec<Sequence<f64>> = (0..2)
            .map(|_| Sequence {
                inputs: (0..cfg.len)
                    .map(|_| Vector::from_vec((0..cell.input_size).map(|_| rng.normal()).collect()))
                    .collect(),
                targets: (0..cfg.len).map(|_| rng.below(classes)).collect(),
            })
            .collect();
        let report = gradient_check(&model, &batch, cfg.tol)?;
        if !report.passed {
            failures += 1;
        }
        emit(out, &format!("{:<18} {report}", cell.label()))?;
    }
    emit(out, &format!("failures={failures}"))?;
    Ok(if failures == 0 { EXIT_OK } else { EXIT_GRADCHECK })
}

fn cmd_probe(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let model = require_ckpt(cfg)?;
    create_dir(&cfg.out)?;
    let label = model.cfg.label();
    let inputs: Vec<Vec<Vector<f64>>> = match cfg.task {
        TaskKind::CharLm => {
            let corpus = load_corpus(cfg)?;
            let w = corpus.windows::<f64>(Split::Test);
            let n = crate::engine::SequenceSource::len(&w).min(cfg.samples.max(1) * 20);
            (0..n).map(|i| crate::engine::SequenceSource::get(&w, i).into_owned().inputs).collect()
        }
        _ => encode_set(&load_split(cfg, "test")?)
            .into_iter()
            .map(|s| s.inputs)
            .collect(),
    };
    if inputs.is_empty() {
        return Err(Error::Argument("no probe inputs".into()));
    }
    let task = cfg.task.name();

    let mut traces_txt = Vec::new();
    let mut all_traces = Vec::new();
    for (i, xs) in inputs.iter().enumerate() {
        let tr = probe::record_gate_traces(&model, xs, cfg.per_unit, task, i)?;
        if i < cfg.samples {
            probe::write_traces(&mut traces_txt, &tr).map_err(|e| Error::io("<buffer>", e))?;
        }
        all_traces.push(tr);
    }
    write_file(&cfg.out.join("traces.tsv"), &traces_txt)?;

    let mut stats = String::new();
    for &gate in model.cfg.arch.gates() {
        let pooled: Vec<probe::GateTrace> = all_traces
            .iter()
            .flatten()
            .filter(|t| t.gate == gate)
            .cloned()
            .collect();
        let s = probe::saturation_stats(&pooled, cfg.eps)?;
        let _ = writeln!(stats, "{} gate={gate}", probe::format_stats(&label, &s));
    }
    if cfg.task == TaskKind::Adding {
        let Samples::Adding(samples) = load_split(cfg, "test")?.samples else {
            unreachable!("adding split holds adding samples")
        };
        for &gate in model.cfg.arch.gates() {
            let mut total = 0.0;
            for (traces, sample) in all_traces.iter().zip(&samples) {
                let mean_trace = traces
                    .iter()
                    .filter(|t| t.gate == gate)
                    .map(|t| probe::carry_alignment(t, sample))
                    .collect::<Result<Vec<f64>>>()?;
                total += mean_trace.iter().sum::<f64>() / mean_trace.len() as f64;
            }
            let _ = writeln!(
                stats,
                "label={label} gate={gate} carry_alignment={}",
                total / samples.len() as f64
            );
        }
    }
    if cfg.task == TaskKind::Counting {
        let Samples::Counting(samples) = load_split(cfg, "test")?.samples else {
            unreachable!("counting split holds counting samples")
        };
        let curve = probe::counting_error_curve(&model, &samples)?;
        let mut txt = String::new();
        for (c, e) in &curve {
            let _ = writeln!(txt, "count={c} accumulative_error={e}");
        }
        write_file(&cfg.out.join("count_curve.txt"), txt.as_bytes())?;
        if let Some(m) = probe::mean_error_from(&curve, 10) {
            let _ = writeln!(stats, "label={label} mean_error_count_ge_10={m}");
        }
    }
    if model.cfg.arch == Arch::Lstm {
        let series = probe::state_grad_norm_series(&model, &inputs[0])?;
        let mut txt = String::new();
        for (t, v) in series.iter().enumerate() {
            let _ = writeln!(txt, "{}\t{v:e}", t + 1);
        }
        write_file(&cfg.out.join("gradnorm.tsv"), txt.as_bytes())?;
    }
    write_file(&cfg.out.join("stats.txt"), stats.as_bytes())?;
    out.write_all(stats.as_bytes()).map_err(|e| Error::io("<stdout>", e))?;
    Ok(EXIT_OK)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
