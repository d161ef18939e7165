use std::path::Path;

use gatelab::cells::{Arch, CellConfig, Gate, RefineMode};
use gatelab::engine::{unroll_forward, LossKind, Model, OptimizerConfig, OptimizerState};
use gatelab::numkit::{Rng, Vector};
use gatelab::store::{
    append_metrics, config_hash, decode_checkpoint, encode_checkpoint, load_checkpoint,
    load_checkpoint_for, read_dataset, read_metrics, save_checkpoint, write_dataset, Checkpoint,
    Dataset, MetricsRecord, Progress, Samples,
};
use gatelab::tasks::{convergence_epoch, gen_adding_set, gen_counting_set, TaskKind};
use gatelab::Error;

fn random_model(seed: u64) -> Model<f64> {
    let cfg = CellConfig::new(Arch::Lstm, 2, 4).refined(RefineMode::Add, &[Gate::Output]);
    Model::new(cfg, 2, LossKind::PerStep, &mut Rng::new(seed)).unwrap()
}

fn inputs(rng: &mut Rng, steps: usize) -> Vec<Vector<f64>> {
    (0..steps)
        .map(|_| Vector::from_vec(vec![rng.normal(), rng.normal()]))
        .collect()
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let model = random_model(3);
    let mut opt = OptimizerState::new(OptimizerConfig::adam(1e-3), &model.params);
    opt.steps = 7;
    if let Some(s) = opt.slot1.as_mut() {
        s.head.b[0] = 0.123_456_789_012_345_68;
    }
    let ck = Checkpoint {
        model: model.clone(),
        progress: Some(Progress {
            epoch: 4,
            seed: 99,
            word_pos: 123_456_789_012,
        }),
        optimizer: Some(opt),
    };
    save_checkpoint(&path, &ck).unwrap();
    let back: Checkpoint<f64> = load_checkpoint(&path).unwrap();
    assert_eq!(back, ck);
    let mut rng = Rng::new(5);
    for _ in 0..10 {
        let xs = inputs(&mut rng, 12);
        let a = unroll_forward(&model, &xs).unwrap();
        let b = unroll_forward(&back.model, &xs).unwrap();
        for (u, v) in a.logits.iter().zip(&b.logits) {
            assert!(u.iter().zip(v.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }
}

#[test]
fn f32_checkpoint_round_trip() {
    let cfg = CellConfig::new(Arch::Gru, 3, 3);
    let model: Model<f32> = Model::new(cfg, 5, LossKind::FinalStep, &mut Rng::new(1)).unwrap();
    let text = encode_checkpoint(&Checkpoint::of_model(model.clone()));
    let back: Checkpoint<f32> = decode_checkpoint(&text, Path::new("mem")).unwrap();
    assert_eq!(back.model, model);
}

#[test]
fn truncated_file_is_a_parse_error() {
    let text = encode_checkpoint(&Checkpoint::of_model(random_model(1)));
    let lines: Vec<&str> = text.lines().collect();
    for cut in [lines.len() - 1, lines.len() / 2, 3] {
        let partial = lines[..cut].join("\n");
        let err = decode_checkpoint::<f64>(&partial, Path::new("cut")).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "cut at {cut}: {err}");
    }
    // A row cut mid-way.
    let idx = text.find("@param cand.u").unwrap();
    let row_start = text[idx..].find('\n').unwrap() + idx + 1;
    let broken = format!("{}{}", &text[..row_start + 10], "\n@end\n");
    assert!(matches!(
        decode_checkpoint::<f64>(&broken, Path::new("row")).unwrap_err(),
        Error::Parse { .. }
    ));
}

#[test]
fn version_mismatch_is_distinct() {
    let text = encode_checkpoint(&Checkpoint::of_model(random_model(1))).replacen(" v1", " v2", 1);
    assert!(matches!(
        decode_checkpoint::<f64>(&text, Path::new("v2")).unwrap_err(),
        Error::Version { .. }
    ));
}

#[test]
fn shape_mismatch_is_distinct() {
    let text = encode_checkpoint(&Checkpoint::of_model(random_model(1)));
    let bad = text.replacen("@param head.w 2 4", "@param head.w 4 2", 1);
    assert!(matches!(
        decode_checkpoint::<f64>(&bad, Path::new("shape")).unwrap_err(),
        Error::Shape { .. }
    ));
}

#[test]
fn vanilla_checkpoint_rejects_refined_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.ckpt");
    let vanilla = CellConfig::new(Arch::Lstm, 2, 4);
    let model: Model<f64> = Model::new(vanilla, 2, LossKind::PerStep, &mut Rng::new(1)).unwrap();
    save_checkpoint(&path, &Checkpoint::of_model(model)).unwrap();
    let refined = vanilla.refined(RefineMode::Mul, &[Gate::Input]);
    assert!(matches!(
        load_checkpoint_for::<f64>(&path, &refined).unwrap_err(),
        Error::Config(_)
    ));
    assert!(load_checkpoint_for::<f64>(&path, &vanilla).is_ok());
}

#[test]
fn metrics_append_and_reread() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("metrics.txt");
    let hash = config_hash("task=adding L=10");
    assert_eq!(hash, config_hash("task=adding L=10"));
    assert_ne!(hash, config_hash("task=adding L=20"));
    assert_eq!(hash.len(), 16);
    let accs = [0.25, 0.875, 1.0, 1.0];
    let records: Vec<MetricsRecord> = accs
        .iter()
        .enumerate()
        .map(|(i, &a)| MetricsRecord {
            run: "r1".into(),
            epoch: i + 1,
            split: "test".into(),
            loss: 0.1 / (i as f64 + 3.0),
            accuracy: Some(a),
            wall_ms: (i == 2).then_some(1234),
            config_hash: hash.clone(),
        })
        .collect();
    for r in &records[..2] {
        append_metrics(&path, r).unwrap();
    }
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 2);
    for r in &records[2..] {
        append_metrics(&path, r).unwrap();
    }
    let back = read_metrics(&path).unwrap();
    assert_eq!(back, records);
    let reread: Vec<f64> = back.iter().filter_map(|r| r.accuracy).collect();
    assert_eq!(convergence_epoch(&reread), convergence_epoch(&accs));
    assert_eq!(convergence_epoch(&reread), Some(3));

    // A crash mid-write leaves an unterminated line that readers skip.
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("run=r1 epoch=5 split=te");
    std::fs::write(&path, text).unwrap();
    assert_eq!(read_metrics(&path).unwrap(), records);
}

#[test]
fn datasets_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let adding = Dataset {
        len: 8,
        seed: 4,
        samples: Samples::Adding(gen_adding_set(8, 3, 4).unwrap()),
    };
    write_dataset(&a, &adding).unwrap();
    assert_eq!(read_dataset(&a, TaskKind::Adding).unwrap(), adding);
    assert!(matches!(read_dataset(&a, TaskKind::Counting).unwrap_err(), Error::Config(_)));

    let c = dir.path().join("c.txt");
    let counting = Dataset {
        len: 20,
        seed: 1,
        samples: Samples::Counting(gen_counting_set(20, 50, 1).unwrap()),
    };
    write_dataset(&c, &counting).unwrap();
    assert_eq!(read_dataset(&c, TaskKind::Counting).unwrap(), counting);
}

#[test]
fn ingest_rejects_inconsistent_lines() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.txt");
    let text = "#task=adding L=4 seed=0 version=1\n1000\t1000\t0100\n1000\t1000\t1100\n";
    std::fs::write(&p, text).unwrap();
    match read_dataset(&p, TaskKind::Adding).unwrap_err() {
        Error::Parse { line, .. } => assert_eq!(line, 3),
        other => panic!("unexpected {other}"),
    }
    std::fs::write(&p, "#task=counting L=3 seed=0 version=1\n011\t3\n").unwrap();
    match read_dataset(&p, TaskKind::Counting).unwrap_err() {
        Error::Parse { line, .. } => assert_eq!(line, 2),
        other => panic!("unexpected {other}"),
    }
    std::fs::write(&p, "#task=adding L=4 seed=0 version=1\n100\t1000\t1000\n").unwrap();
    assert!(matches!(read_dataset(&p, TaskKind::Adding).unwrap_err(), Error::Parse { line: 2, .. }));
}
