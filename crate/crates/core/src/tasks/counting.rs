use crate::engine::Sequence;
use crate::error::{Error, Result};
use crate::numkit::{Rng, Scalar, Vector};

/// A bit string labelled with the length of its final constant run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountingSample {
    pub bits: Vec<u8>,
    pub count: usize,
}

impl CountingSample {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::Argument("counting sample needs at least one bit".into()));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Argument("bits must be 0 or 1".into()));
        }
        let count = trailing_run(&bits);
        Ok(CountingSample { bits, count })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn verify(&self) -> Result<()> {
        let expect = CountingSample::new(self.bits.clone())?.count;
        if expect != self.count {
            return Err(Error::Argument(format!(
                "trailing run is {expect}, not {}",
                self.count
            )));
        }
        Ok(())
    }
}

fn trailing_run(bits: &[u8]) -> usize {
    let last = bits[bits.len() - 1];
    bits.iter().rev().take_while(|&&b| b == last).count()
}

pub fn gen_counting_sample(len: usize, rng: &mut Rng) -> Result<CountingSample> {
    if len == 0 {
        return Err(Error::Argument("counting length must be at least 1".into()));
    }
    CountingSample::new((0..len).map(|_| rng.bit()).collect())
}

pub fn gen_counting_set(len: usize, count: usize, seed: u64) -> Result<Vec<CountingSample>> {
    let mut rng = Rng::new(seed);
    (0..count).map(|_| gen_counting_sample(len, &mut rng)).collect()
}

/// One-hot bits in; a single `count − 1` class out at the last step.
pub fn encode_counting<T: Scalar>(x: &CountingSample) -> Sequence<T> {
    Sequence {
        inputs: x
            .bits
            .iter()
            .map(|&b| {
                let mut v = Vector::zeros(2);
                v[b as usize] = T::one();
                v
            })
            .collect(),
        targets: vec![x.count - 1],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::adding::parse_bits;

    fn scan(bits: &[u8]) -> usize {
        let mut n = 1;
        let mut i = bits.len() - 1;
        while i > 0 && bits[i - 1] == bits[i] {
            n += 1;
            i -= 1;
        }
        n
    }

    #[test]
    fn worked_example() {
        let x = CountingSample::new(parse_bits("11110010110100100000").unwrap()).unwrap();
        assert_eq!(x.count, 5);
    }

    #[test]
    fn constant_string_counts_everything() {
        assert_eq!(CountingSample::new(vec![1; 7]).unwrap().count, 7);
        assert_eq!(CountingSample::new(vec![0]).unwrap().count, 1);
    }

    #[test]
    fn matches_linear_scan() {
        let mut rng = Rng::new(8);
        for i in 0..10_000 {
            let x = gen_counting_sample(1 + i % 30, &mut rng).unwrap();
            assert_eq!(x.count, scan(&x.bits));
            assert!((1..=x.len()).contains(&x.count));
        }
    }

    #[test]
    fn encoding() {
        let x = CountingSample::new(parse_bits("0100111").unwrap()).unwrap();
        let seq: Sequence<f64> = encode_counting(&x);
        assert_eq!(seq.inputs[0].to_vec(), vec![1.0, 0.0]);
        assert_eq!(seq.inputs[1].to_vec(), vec![0.0, 1.0]);
        assert!(seq.inputs.iter().all(|v| v.iter().sum::<f64>() == 1.0));
        assert_eq!(seq.targets, vec![2]);
        assert_eq!(seq.targets[0] + 1, x.count);
    }

    #[test]
    fn verify_catches_wrong_label() {
        let mut x = CountingSample::new(vec![0, 1, 1]).unwrap();
        x.verify().unwrap();
        x.count = 3;
        assert!(x.verify().is_err());
    }
}
