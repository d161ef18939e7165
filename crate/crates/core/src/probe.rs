//! Gate instrumentation: activation traces, saturation statistics, carry
//! alignment, counting error curves and the memory-cell gradient chain.

use std::fmt::Write as _;
use std::io::Write;

use crate::cells::{Arch, Gate};
use crate::engine::{argmax, unroll_forward, Model};
use crate::error::{Error, Result};
use crate::numkit::{Scalar, Vector};
use crate::tasks::{encode_counting, AddingSample, CountingSample};

/// Per-timestep activity of one gate, for one unit or averaged over units.
#[derive(Clone, Debug, PartialEq)]
pub struct GateTrace {
    pub gate: Gate,
    /// `None` when the series is the mean over all units.
    pub unit: Option<usize>,
    /// Sigmoid outputs before refinement.
    pub sigma: Vec<f64>,
    /// Gate outputs after refinement; equal to `sigma` for vanilla gates.
    pub refined: Vec<f64>,
    /// Cell input seen by the refinement.
    pub input: Vec<f64>,
    pub task: String,
    pub sample_id: usize,
}

impl GateTrace {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }
}

/// Runs `inputs` through `model` and records every gate. With `per_unit`
/// there is one trace per gate per hidden unit, otherwise one mean trace
/// per gate.
pub fn record_gate_traces<T: Scalar>(
    model: &Model<T>,
    inputs: &[Vector<T>],
    per_unit: bool,
    task: &str,
    sample_id: usize,
) -> Result<Vec<GateTrace>> {
    let traj = unroll_forward(model, inputs)?;
    let hidden = model.cfg.hidden_size;
    let mut traces = Vec::new();
    for &gate in model.cfg.arch.gates() {
        let units: Vec<Option<usize>> = if per_unit {
            (0..hidden).map(Some).collect()
        } else {
            vec![None]
        };
        for unit in units {
            let mut tr = GateTrace {
                gate,
                unit,
                sigma: Vec::with_capacity(traj.caches.len()),
                refined: Vec::with_capacity(traj.caches.len()),
                input: Vec::with_capacity(traj.caches.len()),
                task: task.to_string(),
                sample_id,
            };
            for cache in &traj.caches {
                let s = cache.sigma(gate).expect("gate belongs to the architecture");
                let g = cache.gate_output(gate).expect("gate belongs to the architecture");
                let pick = |v: &[T], j: usize| v.get(j).map_or(0.0, |x| x.to_f64_lossless());
                match unit {
                    Some(j) => {
                        tr.sigma.push(s[j].to_f64_lossless());
                        tr.refined.push(g[j].to_f64_lossless());
                        tr.input.push(pick(&cache.x, j));
                    }
                    None => {
                        let mean = |v: &[T]| {
                            v.iter().map(|x| x.to_f64_lossless()).sum::<f64>() / v.len() as f64
                        };
                        tr.sigma.push(mean(s));
                        tr.refined.push(mean(g));
                        tr.input.push(mean(&cache.x[..hidden.min(cache.x.len())]));
                    }
                }
            }
            traces.push(tr);
        }
    }
    Ok(traces)
}

/// Summary of a pooled series of gate values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesStats {
    /// Share of values within ε of 0 or 1.
    pub saturated_fraction: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl SeriesStats {
    fn of(values: impl Iterator<Item = f64> + Clone, eps: f64) -> Self {
        let n = values.clone().count() as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.clone().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let saturated = values
            .clone()
            .filter(|&v| v.abs() < eps || (v - 1.0).abs() < eps)
            .count() as f64;
        SeriesStats {
            saturated_fraction: saturated / n,
            mean,
            std: var.sqrt(),
            min: values.clone().fold(f64::INFINITY, f64::min),
            max: values.fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaturationStats {
    pub eps: f64,
    pub count: usize,
    pub sigma: SeriesStats,
    pub refined: SeriesStats,
}

pub const DEFAULT_SATURATION_EPS: f64 = 0.01;

/// Statistics pooled over every timestep of every trace.
pub fn saturation_stats(traces: &[GateTrace], eps: f64) -> Result<SaturationStats> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Argument(format!("saturation epsilon {eps} outside (0, 0.5)")));
    }
    let count: usize = traces.iter().map(GateTrace::len).sum();
    if count == 0 {
        return Err(Error::Argument("no gate values to summarize".into()));
    }
    let sigma = traces.iter().flat_map(|t| t.sigma.iter().copied());
    let refined = traces.iter().flat_map(|t| t.refined.iter().copied());
    Ok(SaturationStats {
        eps,
        count,
        sigma: SeriesStats::of(sigma, eps),
        refined: SeriesStats::of(refined, eps),
    })
}

/// Pearson correlation; 0 when either side has no variance.
fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Point-biserial correlation between the jump size `|g_t − g_{t−1}|` of the
/// refined trace and whether position `t` produces a carry, over `t ≥ 1`.
pub fn carry_alignment(trace: &GateTrace, sample: &AddingSample) -> Result<f64> {
    if trace.len() != sample.len() {
        return Err(Error::dim("carry_alignment", sample.len(), trace.len()));
    }
    if trace.len() < 2 {
        return Ok(0.0);
    }
    let jumps: Vec<f64> = trace.refined.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let carry: Vec<f64> = sample.carries()[1..]
        .iter()
        .map(|&c| if c { 1.0 } else { 0.0 })
        .collect();
    Ok(correlation(&jumps, &carry))
}

/// `‖∂c_T/∂c_t‖∞` along the memory-cell path: the largest per-unit product of
/// forget-gate outputs over steps `t+1..T`. Entry `t−1` holds step `t`, so the
/// last entry is the empty product 1.
pub fn state_grad_norm_series<T: Scalar>(model: &Model<T>, inputs: &[Vector<T>]) -> Result<Vec<f64>> {
    if model.cfg.arch != Arch::Lstm {
        return Err(Error::Argument(format!(
            "memory-cell gradient chain needs an lstm, got {}",
            model.cfg.arch
        )));
    }
    let traj = unroll_forward(model, inputs)?;
    let steps = traj.caches.len();
    let mut chain = vec![1.0f64; model.cfg.hidden_size];
    let mut series = vec![0.0; steps];
    for t in (0..steps).rev() {
        series[t] = chain.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let f = traj.caches[t].gate_output(Gate::Forget).expect("lstm has a forget gate");
        for (c, fv) in chain.iter_mut().zip(f.iter()) {
            *c *= fv.to_f64_lossless();
        }
    }
    Ok(series)
}

/// For each count `c` present in `samples`, the error rate among samples
/// whose count is at most `c`.
pub fn counting_error_curve<T: Scalar>(
    model: &Model<T>,
    samples: &[CountingSample],
) -> Result<Vec<(usize, f64)>> {
    if samples.is_empty() {
        return Err(Error::Argument("empty counting test set".into()));
    }
    let max = samples.iter().map(|s| s.count).max().unwrap_or(0);
    let mut total = vec![0usize; max + 1];
    let mut wrong = vec![0usize; max + 1];
    for s in samples {
        let seq = encode_counting::<T>(s);
        let traj = unroll_forward(model, &seq.inputs)?;
        let logits = traj.logits.last().expect("final-step logits");
        total[s.count] += 1;
        if argmax(logits) != seq.targets[0] {
            wrong[s.count] += 1;
        }
    }
    let (mut seen, mut missed) = (0usize, 0usize);
    let mut curve = Vec::new();
    for c in 1..=max {
        seen += total[c];
        missed += wrong[c];
        if total[c] > 0 {
            curve.push((c, missed as f64 / seen as f64));
        }
    }
    Ok(curve)
}

/// Mean of the curve over counts `≥ min_count`; `None` if none are present.
pub fn mean_error_from(curve: &[(usize, f64)], min_count: usize) -> Option<f64> {
    let tail: Vec<f64> = curve.iter().filter(|(c, _)| *c >= min_count).map(|p| p.1).collect();
    (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64)
}

/// Tab-separated `t σ g x` rows under a `#gate=<name> unit=<i>` header.
pub fn write_traces<W: Write>(mut out: W, traces: &[GateTrace]) -> std::io::Result<()> {
    for tr in traces {
        let unit = tr.unit.map_or_else(|| "mean".to_string(), |u| u.to_string());
        writeln!(
            out,
            "#gate={} unit={} task={} sample={}",
            tr.gate, unit, tr.task, tr.sample_id
        )?;
        for t in 0..tr.len() {
            writeln!(out, "{}\t{:e}\t{:e}\t{:e}", t, tr.sigma[t], tr.refined[t], tr.input[t])?;
        }
    }
    Ok(())
}

/// Single-line key=value rendering of saturation statistics.
pub fn format_stats(label: &str, s: &SaturationStats) -> String {
    let mut line = format!("label={label} eps={} count={}", s.eps, s.count);
    for (name, v) in [("sigma", &s.sigma), ("refined", &s.refined)] {
        let _ = write!(
            line,
            " {name}_saturated={} {name}_mean={} {name}_std={} {name}_min={} {name}_max={}",
            v.saturated_fraction, v.mean, v.std, v.min, v.max
        );
    }
    line
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::{CellConfig, RefineMode};
    use crate::engine::LossKind;
    use crate::numkit::Rng;
    use crate::tasks::{gen_adding_sample, parse_bits};
    use proptest::prelude::{prop_assert, proptest};

    fn random_inputs(n: usize, dim: usize, rng: &mut Rng) -> Vec<Vector<f64>> {
        (0..n)
            .map(|_| (0..dim).map(|_| rng.normal()).collect::<Vec<_>>().into())
            .collect()
    }

    fn trace(values: &[f64]) -> GateTrace {
        GateTrace {
            gate: Gate::Output,
            unit: Some(0),
            sigma: values.to_vec(),
            refined: values.to_vec(),
            input: vec![0.0; values.len()],
            task: "test".into(),
            sample_id: 0,
        }
    }

    #[test]
    fn zero_model_traces_are_half() {
        let m: Model<f64> = Model::zeros(CellConfig::new(Arch::Lstm, 3, 3), 2, LossKind::PerStep).unwrap();
        let xs = random_inputs(7, 3, &mut Rng::new(1));
        let traces = record_gate_traces(&m, &xs, true, "t", 0).unwrap();
        assert_eq!(traces.len(), 9);
        assert!(traces.iter().all(|t| t.len() == 7 && t.sigma.iter().all(|&s| s == 0.5)));
        let stats = saturation_stats(&traces, DEFAULT_SATURATION_EPS).unwrap();
        assert_eq!(stats.sigma.saturated_fraction, 0.0);
        assert_eq!(stats.sigma.std, 0.0);
        assert_eq!(stats.sigma.mean, 0.5);
    }

    #[test]
    fn refined_traces_follow_definition() {
        let mut rng = Rng::new(4);
        for mode in [RefineMode::Add, RefineMode::Mul] {
            let cfg = CellConfig::new(Arch::Lstm, 4, 4).refined(mode, &[Gate::Input, Gate::Output]);
            let m: Model<f64> = Model::new(cfg, 2, LossKind::PerStep, &mut rng).unwrap();
            let xs = random_inputs(6, 4, &mut rng);
            for tr in record_gate_traces(&m, &xs, true, "t", 0).unwrap() {
                for t in 0..tr.len() {
                    let expect = match (tr.gate, mode) {
                        (Gate::Forget, _) => tr.sigma[t],
                        (_, RefineMode::Add) => tr.sigma[t] + tr.input[t],
                        _ => tr.sigma[t] * tr.input[t],
                    };
                    assert_eq!(tr.refined[t], expect);
                }
            }
        }
    }

    #[test]
    fn saturation_examples() {
        let s = saturation_stats(&[trace(&[0.999, 0.001])], 0.01).unwrap();
        assert_eq!(s.sigma.saturated_fraction, 1.0);
        assert!(saturation_stats(&[], 0.01).is_err());
        assert!(saturation_stats(&[trace(&[0.5])], 0.5).is_err());
        assert!(saturation_stats(&[trace(&[0.5])], 0.0).is_err());
    }

    #[test]
    fn carry_alignment_examples() {
        let a = parse_bits("1101001100").unwrap();
        let b = parse_bits("1001010100").unwrap();
        let x = AddingSample::from_addends(a, b).unwrap();
        assert_eq!(carry_alignment(&trace(&[0.3; 10]), &x).unwrap(), 0.0);
        // Flip the trace exactly where a carry is produced.
        let carries = x.carries();
        let mut v = vec![0.0; 10];
        for t in 1..10 {
            v[t] = if carries[t] { 1.0 - v[t - 1] } else { v[t - 1] };
        }
        assert!((carry_alignment(&trace(&v), &x).unwrap() - 1.0).abs() < 1e-12);
        assert!(carry_alignment(&trace(&v[..5]), &x).is_err());
    }

    #[test]
    fn grad_chain_examples() {
        let mut rng = Rng::new(2);
        let cfg = CellConfig::new(Arch::Lstm, 3, 3);
        let m: Model<f64> = Model::new(cfg, 2, LossKind::PerStep, &mut rng).unwrap();
        assert_eq!(state_grad_norm_series(&m, &random_inputs(1, 3, &mut rng)).unwrap(), vec![1.0]);
        let s = state_grad_norm_series(&m, &random_inputs(30, 3, &mut rng)).unwrap();
        assert_eq!(s.len(), 30);
        assert_eq!(s[29], 1.0);
        assert!(s.windows(2).all(|w| w[0] <= w[1]));
        let gru: Model<f64> =
            Model::zeros(CellConfig::new(Arch::Gru, 3, 3), 2, LossKind::PerStep).unwrap();
        assert!(state_grad_norm_series(&gru, &random_inputs(3, 3, &mut rng)).is_err());
    }

    #[test]
    fn perfect_counting_model_has_zero_curve() {
        // Samples whose label the zero model's argmax (class 0) gets right.
        let samples: Vec<CountingSample> = ["01", "0110", "1"]
            .iter()
            .map(|s| CountingSample::new(parse_bits(s).unwrap()).unwrap())
            .collect();
        let m: Model<f64> =
            Model::zeros(CellConfig::new(Arch::Lstm, 2, 2), 4, LossKind::FinalStep).unwrap();
        let curve = counting_error_curve(&m, &samples).unwrap();
        assert_eq!(curve, vec![(1, 0.0)]);
        assert!(counting_error_curve(&m, &[]).is_err());
        let mixed: Vec<CountingSample> = ["01", "011", "0111"]
            .iter()
            .map(|s| CountingSample::new(parse_bits(s).unwrap()).unwrap())
            .collect();
        let curve = counting_error_curve(&m, &mixed).unwrap();
        assert_eq!(curve, vec![(1, 0.0), (2, 0.5), (3, 2.0 / 3.0)]);
        assert_eq!(mean_error_from(&curve, 2), Some((0.5 + 2.0 / 3.0) / 2.0));
        assert_eq!(mean_error_from(&curve, 9), None);
    }

    #[test]
    fn export_format() {
        let mut buf = Vec::new();
        write_traces(&mut buf, &[trace(&[0.25, 0.5])]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "#gate=output unit=0 task=test sample=0");
        assert_eq!(lines[1].split('\t').count(), 4);
        let s = saturation_stats(&[trace(&[0.25, 0.5])], 0.01).unwrap();
        let line = format_stats("x", &s);
        assert!(!line.contains('\n'));
        assert!(line.contains("sigma_mean=0.375"));
    }

    #[test]
    fn carry_alignment_on_generated_sample_is_bounded() {
        let x = gen_adding_sample(20, &mut Rng::new(3)).unwrap();
        let v: Vec<f64> = (0..20).map(|t| (t as f64 * 0.7).sin()).collect();
        let r = carry_alignment(&trace(&v), &x).unwrap();
        assert!((-1.0..=1.0).contains(&r));
    }

    proptest! {
        #[test]
        fn carry_alignment_ignores_affine_rescaling(
            scale in 0.1f64..10.0, shift in -5.0f64..5.0, seed in 0u64..500
        ) {
            let mut rng = Rng::new(seed);
            let x = gen_adding_sample(16, &mut rng).unwrap();
            let v: Vec<f64> = (0..16).map(|_| rng.uniform()).collect();
            let w: Vec<f64> = v.iter().map(|a| scale * a + shift).collect();
            let r1 = carry_alignment(&trace(&v), &x).unwrap();
            let r2 = carry_alignment(&trace(&w), &x).unwrap();
            prop_assert!((r1 - r2).abs() < 1e-9);
        }

        #[test]
        fn stats_are_well_formed(values in proptest::collection::vec(-2.0f64..2.0, 1..50)) {
            let s = saturation_stats(&[trace(&values)], 0.01).unwrap();
            prop_assert!((0.0..=1.0).contains(&s.sigma.saturated_fraction));
            prop_assert!(s.sigma.std >= 0.0);
            prop_assert!(s.sigma.min <= s.sigma.mean + 1e-12 && s.sigma.mean <= s.sigma.max + 1e-12);
        }
    }
}
