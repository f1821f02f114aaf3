use std::fmt;
use std::ops::BitXor;

use crate::error::{param, Result};

/// Bits are packed most-significant-bit first: bit `i` of a string lives in
/// byte `i / 8` at mask `0x80 >> (i % 8)`. This holds for every file format
/// in the crate.
pub const MSB_FIRST: bool = true;

/// A fixed-length bit sequence. Index 0 is the first bit.
///
/// Storage is `u64` words with bit `i` at word `i / 64`, mask
/// `1 << (63 - i % 64)`, so the word layout is the big-endian reading of the
/// MSB-first byte packing. Unused trailing bits of the last word are zero.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    len: usize,
    words: Vec<u64>,
}

#[inline]
fn mask(i: usize) -> u64 {
    1u64 << (63 - (i & 63))
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut out = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                out.words[i >> 6] |= mask(i);
            }
        }
        out
    }

    /// Parses a string of `0`/`1` characters; whitespace and `_` are skipped.
    pub fn parse(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                c if c.is_whitespace() || c == '_' => {}
                c => return param(format!("invalid bit character {c:?}")),
            }
        }
        Ok(Self::from_bits(&bits))
    }

    /// The low `len` bits of `value`, most significant first.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64, "from_u64 supports at most 64 bits");
        let mut out = Self::zeros(len);
        if len > 0 {
            let v = if len == 64 { value } else { value & ((1u64 << len) - 1) };
            out.words[0] = v << (64 - len);
        }
        out
    }

    /// Reads the whole string (at most 64 bits) as a big-endian integer.
    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= 64, "to_u64 supports at most 64 bits");
        if self.len == 0 {
            0
        } else {
            self.words[0] >> (64 - self.len)
        }
    }

    /// Takes the first `len` bits of `bytes` (MSB-first).
    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Self> {
        if len > bytes.len() * 8 {
            return param(format!(
                "need {len} bits but only {} bytes supplied",
                bytes.len()
            ));
        }
        let mut out = Self::zeros(len);
        for (w, chunk) in out.words.iter_mut().zip(bytes.chunks(8)) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            *w = u64::from_be_bytes(buf);
        }
        out.clear_tail();
        Ok(out)
    }

    /// MSB-first packing, zero padded to a whole byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        let nbytes = self.len.div_ceil(8);
        let mut out = Vec::with_capacity(nbytes);
        for w in &self.words {
            out.extend_from_slice(&w.to_be_bytes());
        }
        out.truncate(nbytes);
        out
    }

    fn clear_tail(&mut self) {
        let rem = self.len & 63;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= !0u64 << (64 - rem);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.words[i >> 6] & mask(i) != 0
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        if bit {
            self.words[i >> 6] |= mask(i);
        } else {
            self.words[i >> 6] &= !mask(i);
        }
    }

    pub fn push(&mut self, bit: bool) {
        if self.len & 63 == 0 {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, bit);
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// `x_S`: the bits at the given positions, in the order the positions are
    /// listed. Callers pass ascending index sets.
    pub fn select(&self, positions: &[usize]) -> Result<Self> {
        let mut out = Self::zeros(positions.len());
        for (k, &p) in positions.iter().enumerate() {
            if p >= self.len {
                return param(format!("index {p} outside string of length {}", self.len));
            }
            if self.get(p) {
                out.words[k >> 6] |= mask(k);
            }
        }
        Ok(out)
    }

    /// Bits `[start, start + len)` as a big-endian integer (`len <= 64`).
    #[inline]
    pub fn read_u64(&self, start: usize, len: usize) -> u64 {
        debug_assert!(len <= 64 && start + len <= self.len);
        if len == 0 {
            return 0;
        }
        let w = start >> 6;
        let off = start & 63;
        let hi = self.words[w] << off;
        let joined = if off + len > 64 {
            hi | (self.words[w + 1] >> (64 - off))
        } else {
            hi
        };
        joined >> (64 - len)
    }

    /// Bits `[start, start + len)` zero-extended to `len` bits, reading past
    /// the end as zeros.
    pub fn slice(&self, start: usize, len: usize) -> Self {
        let mut out = Self::zeros(len);
        for k in 0..len {
            let p = start + k;
            if p < self.len && self.get(p) {
                out.words[k >> 6] |= mask(k);
            }
        }
        out
    }

    pub fn concat(&self, other: &BitString) -> Self {
        let mut out = self.clone();
        for b in other.iter() {
            out.push(b);
        }
        out
    }

    pub fn xor(&self, other: &BitString) -> Result<Self> {
        if self.len != other.len {
            return param(format!("length mismatch {} vs {}", self.len, other.len));
        }
        Ok(BitString {
            len: self.len,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a ^ b)
                .collect(),
        })
    }

    pub fn hamming_distance(&self, other: &BitString) -> Result<usize> {
        if self.len != other.len {
            return param(format!("length mismatch {} vs {}", self.len, other.len));
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

impl BitXor for &BitString {
    type Output = BitString;

    fn bitxor(self, rhs: &BitString) -> BitString {
        self.xor(rhs).expect("xor of unequal lengths")
    }
}

/// `⊕_i u_i v_i` over GF(2).
pub fn inner_product_gf2(u: &BitString, v: &BitString) -> Result<bool> {
    if u.len != v.len {
        return param(format!("inner product of lengths {} and {}", u.len, v.len));
    }
    let ones: u32 = u
        .words
        .iter()
        .zip(&v.words)
        .map(|(a, b)| (a & b).count_ones())
        .sum();
    Ok(ones & 1 == 1)
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({}:{})", self.len, self)
    }
}
