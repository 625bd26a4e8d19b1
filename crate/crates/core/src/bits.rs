//! Bit encoding of bosonic occupation numbers and the visible-layer layout.
//!
//! An occupation `n` is stored as `n_bits` binary digits, little-endian: bit
//! `i` (0-based here) carries weight `2^i`. Spins keep their physical values
//! `±1` while bits stay `0/1`, so a flattened visible vector is heterogeneous.

use std::fmt;

use crate::error::{Error, Result};

/// Largest supported number of bits per bosonic occupation.
pub const MAX_BITS: usize = 32;

/// A fixed-width little-endian bit string.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    word: u32,
    n_bits: u8,
}

impl BitString {
    /// Builds a bit string from explicit 0/1 values, least significant first.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        check_bit_count(bits.len())?;
        let mut word = 0u32;
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => word |= 1 << i,
                other => return Err(Error::InvalidBit(other)),
            }
        }
        Ok(BitString {
            word,
            n_bits: bits.len() as u8,
        })
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits as usize
    }

    /// Value (0 or 1) of bit `i`, with `i = 0` the least significant.
    pub fn bit(&self, i: usize) -> u8 {
        assert!(i < self.n_bits(), "bit index {i} out of range");
        ((self.word >> i) & 1) as u8
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.n_bits()).map(move |i| self.bit(i))
    }

    pub fn to_vec(&self) -> Vec<u8> {
        self.iter().collect()
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString(")?;
        for b in self.iter() {
            write!(f, "{b}")?;
        }
        write!(f, ")")
    }
}

fn check_bit_count(n_bits: usize) -> Result<()> {
    if n_bits == 0 || n_bits > MAX_BITS {
        return Err(Error::InvalidBitCount(n_bits));
    }
    Ok(())
}

/// Largest occupation representable with `n_bits` bits.
pub fn max_occupation(n_bits: usize) -> u64 {
    (1u64 << n_bits) - 1
}

/// Encodes `n` into `n_bits` bits.
pub fn encode_fock(n: u64, n_bits: usize) -> Result<BitString> {
    check_bit_count(n_bits)?;
    if n > max_occupation(n_bits) {
        return Err(Error::Overflow { n, n_bits });
    }
    Ok(BitString {
        word: n as u32,
        n_bits: n_bits as u8,
    })
}

/// Inverse of [`encode_fock`]: `sum_i 2^i * b_i`.
pub fn decode_bits(b: &BitString) -> u64 {
    b.iter()
        .enumerate()
        .map(|(i, bit)| u64::from(bit) << i)
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spin {
    Down,
    Up,
}

impl Spin {
    pub fn value(self) -> i8 {
        match self {
            Spin::Down => -1,
            Spin::Up => 1,
        }
    }

    pub fn from_value(v: i8) -> Result<Self> {
        match v {
            -1 => Ok(Spin::Down),
            1 => Ok(Spin::Up),
            other => Err(Error::InvalidParameter(format!(
                "spin value {other} (expected -1 or 1)"
            ))),
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Spin::Down => Spin::Up,
            Spin::Up => Spin::Down,
        }
    }
}

/// One side (bra or ket) of a density-matrix index: `N` spins plus one
/// bit-encoded bosonic occupation.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinBosonConfig {
    spins: Vec<Spin>,
    boson: BitString,
}

impl SpinBosonConfig {
    pub fn new(spins: Vec<Spin>, boson: BitString) -> Self {
        SpinBosonConfig { spins, boson }
    }

    pub fn with_occupation(spins: Vec<Spin>, n: u64, n_bits: usize) -> Result<Self> {
        Ok(SpinBosonConfig {
            spins,
            boson: encode_fock(n, n_bits)?,
        })
    }

    pub fn spins(&self) -> &[Spin] {
        &self.spins
    }

    pub fn boson_bits(&self) -> &BitString {
        &self.boson
    }

    pub fn n_spins(&self) -> usize {
        self.spins.len()
    }

    pub fn n_bits(&self) -> usize {
        self.boson.n_bits()
    }

    pub fn occupation(&self) -> u64 {
        u64::from(self.boson.word)
    }

    pub fn spin_up_count(&self) -> u64 {
        self.spins.iter().filter(|&&s| s == Spin::Up).count() as u64
    }

    /// Same spins, different occupation. Fails if `n` does not fit.
    pub fn with_new_occupation(&self, n: u64) -> Result<Self> {
        Ok(SpinBosonConfig {
            spins: self.spins.clone(),
            boson: encode_fock(n, self.n_bits())?,
        })
    }

    /// Writes the visible-layer values into `out` (length `N + N_β`).
    pub fn write_visible(&self, out: &mut [f64]) {
        let n = self.spins.len();
        for (o, s) in out[..n].iter_mut().zip(&self.spins) {
            *o = f64::from(s.value());
        }
        for (i, o) in out[n..n + self.boson.n_bits()].iter_mut().enumerate() {
            *o = f64::from(self.boson.bit(i));
        }
    }
}

impl fmt::Debug for SpinBosonConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.spins {
            f.write_str(match s {
                Spin::Up => "↑",
                Spin::Down => "↓",
            })?;
        }
        write!(f, ",{}", self.occupation())
    }
}

/// Visible-layer values: the `N` spins (±1) followed by the `N_β` bits (0/1).
pub fn flatten_visible(cfg: &SpinBosonConfig) -> Vec<f64> {
    let mut out = vec![0.0; cfg.n_spins() + cfg.n_bits()];
    cfg.write_visible(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_examples() {
        assert_eq!(encode_fock(5, 4).unwrap().to_vec(), vec![1, 0, 1, 0]);
        assert_eq!(encode_fock(0, 4).unwrap().to_vec(), vec![0, 0, 0, 0]);
        assert_eq!(encode_fock(15, 4).unwrap().to_vec(), vec![1, 1, 1, 1]);
    }

    #[test]
    fn encode_overflow() {
        assert!(matches!(
            encode_fock(16, 4),
            Err(Error::Overflow { n: 16, n_bits: 4 })
        ));
        assert!(encode_fock(0, 0).is_err());
        assert!(encode_fock(0, MAX_BITS + 1).is_err());
    }

    #[test]
    fn decode_examples() {
        let b = |v: &[u8]| BitString::from_bits(v).unwrap();
        assert_eq!(decode_bits(&b(&[1, 0, 1, 0])), 5);
        assert_eq!(decode_bits(&b(&[0, 0, 0, 1])), 8);
        assert_eq!(decode_bits(&b(&[1, 1, 0, 0, 0])), 3);
    }

    #[test]
    fn rejects_non_binary_values() {
        assert!(matches!(
            BitString::from_bits(&[0, 2]),
            Err(Error::InvalidBit(2))
        ));
    }

    #[test]
    fn roundtrip_exhaustive_up_to_16_bits() {
        for n_bits in 1..=16 {
            for n in 0..=max_occupation(n_bits) {
                assert_eq!(decode_bits(&encode_fock(n, n_bits).unwrap()), n);
            }
        }
    }

    #[test]
    fn flipping_a_bit_adds_its_weight() {
        for n in 0..=255u64 {
            let bits = encode_fock(n, 8).unwrap().to_vec();
            for i in 0..8 {
                if bits[i] == 0 {
                    let mut up = bits.clone();
                    up[i] = 1;
                    let m = decode_bits(&BitString::from_bits(&up).unwrap());
                    assert_eq!(m, n + (1 << i));
                }
            }
        }
    }

    #[test]
    fn flatten_examples() {
        let cfg = |spins: Vec<Spin>, bits: &[u8]| {
            SpinBosonConfig::new(spins, BitString::from_bits(bits).unwrap())
        };
        assert_eq!(
            flatten_visible(&cfg(vec![Spin::Up], &[1, 0])),
            vec![1.0, 1.0, 0.0]
        );
        assert_eq!(
            flatten_visible(&cfg(vec![Spin::Down], &[0, 0])),
            vec![-1.0, 0.0, 0.0]
        );
        assert_eq!(
            flatten_visible(&cfg(vec![Spin::Up, Spin::Down], &[1])),
            vec![1.0, -1.0, 1.0]
        );
    }
}
