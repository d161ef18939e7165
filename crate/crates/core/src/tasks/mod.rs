//! Synthetic sequence tasks and a character-level corpus pipeline.

mod adding;
mod charlm;
mod counting;

pub use adding::{
    bits_to_string, encode_adding, gen_adding_sample, gen_adding_set, parse_bits, AddingSample,
};
pub use charlm::{bits_per_char, char_bpc, synthetic_text, CharCorpus, CharWindows, Split};
pub use counting::{encode_counting, gen_counting_sample, gen_counting_set, CountingSample};

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Adding,
    Counting,
    CharLm,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Adding => "adding",
            TaskKind::Counting => "counting",
            TaskKind::CharLm => "charlm",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "adding" => Ok(TaskKind::Adding),
            "counting" => Ok(TaskKind::Counting),
            "charlm" | "char-lm" => Ok(TaskKind::CharLm),
            other => Err(Error::Config(format!(
                "unknown task `{other}` (expected adding, counting or charlm)"
            ))),
        }
    }
}

/// Default dataset sizes for the synthetic tasks.
pub const DEFAULT_TRAIN_SIZE: usize = 10_000;
pub const DEFAULT_TEST_SIZE: usize = 5_000;

/// 1-indexed first epoch with perfect sequence accuracy, `None` if never.
pub fn convergence_epoch(accuracy: &[f64]) -> Option<usize> {
    accuracy.iter().position(|&a| a == 1.0).map(|i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convergence_examples() {
        assert_eq!(convergence_epoch(&[0.7, 0.9, 1.0, 1.0]), Some(3));
        assert_eq!(convergence_epoch(&[0.99, 0.999]), None);
        assert_eq!(convergence_epoch(&[0.1, 0.5, 1.0]), Some(3));
        assert_eq!(convergence_epoch(&[]), None);
    }

    #[test]
    fn task_names_round_trip() {
        for t in [TaskKind::Adding, TaskKind::Counting, TaskKind::CharLm] {
            assert_eq!(t.name().parse::<TaskKind>().unwrap(), t);
        }
        assert!("copy".parse::<TaskKind>().is_err());
    }
}
