use crate::engine::Sequence;
use crate::error::{Error, Result};
use crate::numkit::{Rng, Scalar, Vector};

/// Two addends and their sum as equal-length bit strings, least significant
/// bit first. The sum never carries out of the last position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AddingSample {
    pub a: Vec<u8>,
    pub b: Vec<u8>,
    pub s: Vec<u8>,
}

impl AddingSample {
    /// Builds a sample from two addends, rejecting sums that need L+1 bits.
    pub fn from_addends(a: Vec<u8>, b: Vec<u8>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Argument(format!(
                "addends differ in length: {} vs {}",
                a.len(),
                b.len()
            )));
        }
        let (s, carry) = ripple_add(&a, &b)?;
        if carry {
            return Err(Error::Argument("sum overflows the sequence length".into()));
        }
        Ok(AddingSample { a, b, s })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Checks that `s` really is `a + b` without a final carry.
    pub fn verify(&self) -> Result<()> {
        if self.a.len() != self.b.len() || self.a.len() != self.s.len() {
            return Err(Error::Argument("bit strings differ in length".into()));
        }
        let (s, carry) = ripple_add(&self.a, &self.b)?;
        if carry {
            return Err(Error::Argument("sum overflows the sequence length".into()));
        }
        if s != self.s {
            return Err(Error::Argument(format!(
                "{} + {} is {}, not {}",
                bits_to_string(&self.a),
                bits_to_string(&self.b),
                bits_to_string(&s),
                bits_to_string(&self.s)
            )));
        }
        Ok(())
    }

    /// Carry-out produced at each position.
    pub fn carries(&self) -> Vec<bool> {
        let mut carry = 0u8;
        self.a
            .iter()
            .zip(&self.b)
            .map(|(&x, &y)| {
                carry = u8::from(x + y + carry >= 2);
                carry == 1
            })
            .collect()
    }
}

fn ripple_add(a: &[u8], b: &[u8]) -> Result<(Vec<u8>, bool)> {
    let mut carry = 0u8;
    let mut s = Vec::with_capacity(a.len());
    for (&x, &y) in a.iter().zip(b) {
        if x > 1 || y > 1 {
            return Err(Error::Argument("bits must be 0 or 1".into()));
        }
        let t = x + y + carry;
        s.push(t & 1);
        carry = t >> 1;
    }
    Ok((s, carry == 1))
}

/// Draws addends with uniform bits, resampling until the sum fits in `len` bits.
pub fn gen_adding_sample(len: usize, rng: &mut Rng) -> Result<AddingSample> {
    if len < 2 {
        return Err(Error::Argument(format!("adding length must be at least 2, got {len}")));
    }
    loop {
        let a: Vec<u8> = (0..len).map(|_| rng.bit()).collect();
        let b: Vec<u8> = (0..len).map(|_| rng.bit()).collect();
        if let Ok(s) = AddingSample::from_addends(a, b) {
            return Ok(s);
        }
    }
}

pub fn gen_adding_set(len: usize, count: usize, seed: u64) -> Result<Vec<AddingSample>> {
    let mut rng = Rng::new(seed);
    (0..count).map(|_| gen_adding_sample(len, &mut rng)).collect()
}

/// Step `t` sees `[a_t, b_t]` and must emit `s_t`.
pub fn encode_adding<T: Scalar>(x: &AddingSample) -> Sequence<T> {
    Sequence {
        inputs: x
            .a
            .iter()
            .zip(&x.b)
            .map(|(&a, &b)| Vector::from_vec(vec![T::of(a as f64), T::of(b as f64)]))
            .collect(),
        targets: x.s.iter().map(|&s| s as usize).collect(),
    }
}

pub fn bits_to_string(bits: &[u8]) -> String {
    bits.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
}

pub fn parse_bits(s: &str) -> Result<Vec<u8>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::Argument(format!("`{other}` is not a bit"))),
        })
        .collect()
}
