use std::borrow::Cow;
use std::collections::HashMap;
use std::marker::PhantomData;

use crate::engine::{softmax_xent, unroll_forward, Model, Sequence, SequenceSource};
use crate::error::{Error, Result};
use crate::numkit::{Rng, Scalar, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

/// Character vocabulary plus three contiguous index streams.
#[derive(Clone, Debug, PartialEq)]
pub struct CharCorpus {
    pub vocab: Vec<char>,
    index: HashMap<char, u32>,
    pub train: Vec<u32>,
    pub valid: Vec<u32>,
    pub test: Vec<u32>,
    pub unroll: usize,
}

impl CharCorpus {
    /// Vocabulary is ordered by first appearance. `fractions` are the
    /// train/valid/test shares; the test split takes the rounding remainder.
    pub fn build(text: &str, unroll: usize, fractions: [f64; 3]) -> Result<Self> {
        if text.is_empty() {
            return Err(Error::Argument("corpus text is empty".into()));
        }
        if unroll == 0 {
            return Err(Error::Argument("unroll length must be at least 1".into()));
        }
        if fractions.iter().any(|&f| !(0.0..=1.0).contains(&f))
            || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::Argument(format!(
                "split fractions {fractions:?} must be non-negative and sum to 1"
            )));
        }
        let mut vocab = Vec::new();
        let mut index = HashMap::new();
        let stream: Vec<u32> = text
            .chars()
            .map(|c| {
                *index.entry(c).or_insert_with(|| {
                    vocab.push(c);
                    (vocab.len() - 1) as u32
                })
            })
            .collect();
        let n = stream.len();
        let n_train = (n as f64 * fractions[0]).floor() as usize;
        let n_valid = ((n as f64 * fractions[1]).floor() as usize).min(n - n_train);
        let train = stream[..n_train].to_vec();
        let valid = stream[n_train..n_train + n_valid].to_vec();
        let test = stream[n_train + n_valid..].to_vec();
        Ok(CharCorpus {
            vocab,
            index,
            train,
            valid,
            test,
            unroll,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn index_of(&self, c: char) -> Option<u32> {
        self.index.get(&c).copied()
    }

    pub fn stream(&self, split: Split) -> &[u32] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn windows<T>(&self, split: Split) -> CharWindows<'_, T> {
        CharWindows {
            stream: self.stream(split),
            unroll: self.unroll,
            vocab: self.vocab_size(),
            _scalar: PhantomData,
        }
    }
}

/// Consecutive non-overlapping windows of a stream, one-hot encoded on
/// demand. Each step's target is the next character; the last window may be
/// shorter than the unroll length.
#[derive(Clone, Copy, Debug)]
pub struct CharWindows<'a, T> {
    stream: &'a [u32],
    unroll: usize,
    vocab: usize,
    _scalar: PhantomData<T>,
}

impl<T> CharWindows<'_, T> {
    /// Number of predicted characters across all windows.
    pub fn predictions(&self) -> usize {
        self.stream.len().saturating_sub(1)
    }
}

impl<T: Scalar> SequenceSource<T> for CharWindows<'_, T> {
    fn len(&self) -> usize {
        self.predictions().div_ceil(self.unroll)
    }

    fn get(&self, idx: usize) -> Cow<'_, Sequence<T>> {
        let start = idx * self.unroll;
        let end = (start + self.unroll).min(self.predictions());
        let inputs = self.stream[start..end]
            .iter()
            .map(|&c| {
                let mut v = Vector::zeros(self.vocab);
                v[c as usize] = T::one();
                v
            })
            .collect();
        let targets = self.stream[start + 1..end + 1].iter().map(|&c| c as usize).collect();
        Cow::Owned(Sequence { inputs, targets })
    }
}

pub fn bits_per_char(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

/// Bits per character over every prediction in `windows`, each window
/// starting from a zero state.
pub fn char_bpc<T: Scalar>(model: &Model<T>, windows: &CharWindows<'_, T>) -> Result<f64> {
    if windows.predictions() == 0 {
        return Err(Error::Argument("no characters to score".into()));
    }
    let mut nats = 0.0;
    for i in 0..windows.len() {
        let seq = windows.get(i);
        let traj = unroll_forward(model, &seq.inputs)?;
        for (logits, &y) in traj.logits.iter().zip(&seq.targets) {
            nats += softmax_xent(logits, y)?.0.to_f64_lossless();
        }
    }
    Ok(bits_per_char(nats / windows.predictions() as f64))
}

const DETERMINERS: &[&str] = &["the", "a", "every", "some", "this", "that", "one", "no"];
const ADJECTIVES: &[&str] = &[
    "quiet", "green", "old", "small", "bright", "heavy", "quick", "tired", "warm", "strange",
    "empty", "gentle",
];
const NOUNS: &[&str] = &[
    "river", "farmer", "window", "garden", "teacher", "horse", "village", "letter", "mountain",
    "kitchen", "captain", "bridge", "market", "sister", "forest", "lamp",
];
const VERBS: &[&str] = &[
    "sees", "follows", "carries", "finds", "remembers", "paints", "watches", "builds", "opens",
    "leaves", "answers", "keeps",
];
const PREPOSITIONS: &[&str] = &["near", "under", "behind", "across", "beside", "over"];
const ADVERBS: &[&str] = &["slowly", "again", "today", "often", "quietly"];

/// Deterministic English-like text from a small phrase grammar, at least
/// `min_bytes` long. Used when no corpus file is supplied.
pub fn synthetic_text(min_bytes: usize, seed: u64) -> String {
    let mut rng = Rng::new(seed);
    let mut out = String::with_capacity(min_bytes + 128);
    let mut sentences_in_line = 0;
    while out.len() < min_bytes {
        let mut words: Vec<&str> = Vec::new();
        noun_phrase(&mut rng, &mut words);
        words.push(pick(&mut rng, VERBS));
        noun_phrase(&mut rng, &mut words);
        if rng.below(3) == 0 {
            words.push(pick(&mut rng, PREPOSITIONS));
            noun_phrase(&mut rng, &mut words);
        }
        if rng.below(4) == 0 {
            words.push(pick(&mut rng, ADVERBS));
        }
        let mut sentence = words.join(" ");
        if let Some(first) = sentence.get_mut(0..1) {
            first.make_ascii_uppercase();
        }
        out.push_str(&sentence);
        out.push(if rng.below(6) == 0 { '?' } else { '.' });
        sentences_in_line += 1;
        if sentences_in_line >= 4 + rng.below(4) {
            out.push('\n');
            sentences_in_line = 0;
        } else {
            out.push(' ');
        }
    }
    out
}

fn noun_phrase(rng: &mut Rng, words: &mut Vec<&str>) {
    words.push(pick(rng, DETERMINERS));
    if rng.below(2) == 0 {
        words.push(pick(rng, ADJECTIVES));
    }
    words.push(pick(rng, NOUNS));
}

fn pick<'a>(rng: &mut Rng, list: &[&'a str]) -> &'a str {
    list[rng.below(list.len())]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::{Arch, CellConfig};
    use crate::engine::LossKind;

    #[test]
    fn abab_example() {
        let c = CharCorpus::build("abab", 2, [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(c.vocab, vec!['a', 'b']);
        assert_eq!(c.train, vec![0, 1, 0, 1]);
        let w = c.windows::<f64>(Split::Train);
        assert_eq!(SequenceSource::len(&w), 2);
        let s = w.get(0);
        assert_eq!(s.targets, vec![1, 0]);
        assert_eq!(s.inputs[0].to_vec(), vec![1.0, 0.0]);
        assert_eq!(w.get(1).targets, vec![1]);
    }

    #[test]
    fn vocabulary_counts_distinct_characters() {
        let text = "hello, world";
        let c = CharCorpus::build(text, 3, [0.5, 0.25, 0.25]).unwrap();
        let mut distinct: Vec<char> = text.chars().collect();
        distinct.sort_unstable();
        distinct.dedup();
        assert_eq!(c.vocab_size(), distinct.len());
        assert_eq!(c.train.len() + c.valid.len() + c.test.len(), text.chars().count());
        let joined: Vec<u32> = [c.train.clone(), c.valid.clone(), c.test.clone()].concat();
        let direct: Vec<u32> = text.chars().map(|ch| c.index_of(ch).unwrap()).collect();
        assert_eq!(joined, direct);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(CharCorpus::build("", 5, [1.0, 0.0, 0.0]).is_err());
        assert!(CharCorpus::build("abc", 5, [0.5, 0.1, 0.1]).is_err());
    }

    #[test]
    fn uniform_predictor_scores_log2_vocab() {
        let text = synthetic_text(2_000, 1);
        let c = CharCorpus::build(&text, 20, [0.8, 0.1, 0.1]).unwrap();
        let v = c.vocab_size();
        let model: Model<f64> =
            Model::zeros(CellConfig::new(Arch::Lstm, v, 4), v, LossKind::PerStep).unwrap();
        let bpc = char_bpc(&model, &c.windows(Split::Test)).unwrap();
        assert!((bpc - (v as f64).log2()).abs() < 1e-12);
    }

    #[test]
    fn synthetic_text_is_seeded_and_long_enough() {
        let a = synthetic_text(10_000, 4);
        assert!(a.len() >= 10_000);
        assert_eq!(a, synthetic_text(10_000, 4));
        assert_ne!(a, synthetic_text(10_000, 5));
        assert!(a.is_ascii());
    }
}
