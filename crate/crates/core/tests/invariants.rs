use proptest::prelude::*;

use gatelab::cells::{refine, refine_backward, RefineMode};
use gatelab::engine::SequenceSource;
use gatelab::store::MetricsRecord;
use gatelab::tasks::{
    bits_to_string, encode_adding, encode_counting, parse_bits, AddingSample, CharCorpus,
    CountingSample, Split,
};

fn to_bits(v: u128, len: usize) -> Vec<u8> {
    (0..len).map(|i| ((v >> i) & 1) as u8).collect()
}

fn from_bits(bits: &[u8]) -> u128 {
    bits.iter().rev().fold(0, |acc, &b| (acc << 1) | b as u128)
}

proptest! {
    #[test]
    fn adding_matches_integer_sum(len in 2usize..64, a in any::<u64>(), b in any::<u64>()) {
        let mask = (1u128 << len) - 1;
        let (a, b) = (a as u128 & mask, b as u128 & mask);
        let result = AddingSample::from_addends(to_bits(a, len), to_bits(b, len));
        if a + b > mask {
            prop_assert!(result.is_err());
        } else {
            let s = result.unwrap();
            prop_assert_eq!(from_bits(&s.s), a + b);
            prop_assert!(s.verify().is_ok());
            let carries = s.carries();
            for (t, &c) in carries.iter().enumerate() {
                let low = (1u128 << (t + 1)) - 1;
                prop_assert_eq!(c, ((a & low) + (b & low)) >> (t + 1) == 1);
            }
            let seq = encode_adding::<f64>(&s);
            prop_assert_eq!(seq.inputs.len(), len);
            for t in 0..len {
                prop_assert_eq!(seq.inputs[t][0], s.a[t] as f64);
                prop_assert_eq!(seq.inputs[t][1], s.b[t] as f64);
                prop_assert_eq!(seq.targets[t], s.s[t] as usize);
            }
            prop_assert_eq!(parse_bits(&bits_to_string(&s.s)).unwrap(), s.s.clone());
        }
    }

    #[test]
    fn counting_label_is_trailing_run(bits in proptest::collection::vec(0u8..2, 1..40)) {
        let expected = bits.iter().rev().take_while(|&&b| b == bits[bits.len() - 1]).count();
        let s = CountingSample::new(bits.clone()).unwrap();
        prop_assert_eq!(s.count, expected);
        prop_assert!((1..=bits.len()).contains(&s.count));
        let seq = encode_counting::<f64>(&s);
        prop_assert_eq!(seq.targets.clone(), vec![expected - 1]);
        for (x, &b) in seq.inputs.iter().zip(&bits) {
            prop_assert_eq!(x[b as usize], 1.0);
            prop_assert_eq!(x[1 - b as usize], 0.0);
        }
    }

    #[test]
    fn refine_modes_follow_their_definitions(
        pairs in proptest::collection::vec((0.0f64..1.0, -3.0f64..3.0, -2.0f64..2.0), 1..12)
    ) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let x: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let dg: Vec<f64> = pairs.iter().map(|p| p.2).collect();
        let none = refine(&a, &x, RefineMode::None).unwrap();
        let add = refine(&a, &x, RefineMode::Add).unwrap();
        let mul = refine(&a, &x, RefineMode::Mul).unwrap();
        let (da_add, dx_add) = refine_backward(&dg, &a, &x, RefineMode::Add).unwrap();
        let (da_mul, dx_mul) = refine_backward(&dg, &a, &x, RefineMode::Mul).unwrap();
        let (da_none, dx_none) = refine_backward(&dg, &a, &x, RefineMode::None).unwrap();
        for j in 0..a.len() {
            prop_assert_eq!(none[j].to_bits(), a[j].to_bits());
            prop_assert_eq!(add[j], a[j] + x[j]);
            prop_assert_eq!(mul[j], a[j] * x[j]);
            prop_assert_eq!((da_add[j], dx_add[j]), (dg[j], dg[j]));
            prop_assert_eq!((da_mul[j], dx_mul[j]), (dg[j] * x[j], dg[j] * a[j]));
            prop_assert_eq!((da_none[j], dx_none[j]), (dg[j], 0.0));
        }
    }

    #[test]
    fn metrics_lines_round_trip(
        epoch in 0usize..1000,
        loss in any::<f64>().prop_filter("finite", |v| v.is_finite()),
        acc in proptest::option::of(0.0f64..=1.0),
        wall in proptest::option::of(any::<u32>()),
    ) {
        let r = MetricsRecord {
            run: "run-1".into(),
            epoch,
            split: "test".into(),
            loss,
            accuracy: acc,
            wall_ms: wall.map(u64::from),
            config_hash: "00ff00ff00ff00ff".into(),
        };
        let back = MetricsRecord::from_line(&r.to_line()).unwrap();
        prop_assert_eq!(back.loss.to_bits(), r.loss.to_bits());
        prop_assert_eq!(back, r);
    }

    #[test]
    fn char_windows_predict_the_next_character(text in "[a-e ]{20,200}", unroll in 1usize..12) {
        let corpus = CharCorpus::build(&text, unroll, [0.8, 0.1, 0.1]).unwrap();
        let v = corpus.vocab_size();
        let stream = corpus.stream(Split::Train);
        let windows = corpus.windows::<f64>(Split::Train);
        let mut pos = 0;
        for i in 0..windows.len() {
            let w = windows.get(i);
            prop_assert!(w.inputs.len() <= unroll);
            for (x, &y) in w.inputs.iter().zip(&w.targets) {
                prop_assert_eq!(x.len(), v);
                prop_assert_eq!(x.iter().sum::<f64>(), 1.0);
                prop_assert_eq!(x[stream[pos] as usize], 1.0);
                prop_assert_eq!(y, stream[pos + 1] as usize);
                pos += 1;
            }
        }
        prop_assert_eq!(pos, stream.len().saturating_sub(1));
        prop_assert_eq!(windows.predictions(), pos);
    }
}
