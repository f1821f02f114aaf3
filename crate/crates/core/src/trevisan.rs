//! The composition `Ext(x, y) = C(x, y_{S_0}) … C(x, y_{S_{m-1}})`.
//!
//! Output bit `i` (0-based) reads the seed at the positions of design set
//! `S_i`, keeps the first `t` of them in ascending order, and feeds that
//! `t`-bit string to the one-bit code extractor.

use std::io::{ErrorKind, Read, Write};

use rayon::prelude::*;

use crate::bitfield::{read_symbol, BitString, Limbs};
use crate::code_extractor::{CodeSpec, PreparedSource};
use crate::error::{param, Error, Result};
use crate::params::ExtractorParams;
use crate::universal_hash::SeededExtractor;
use crate::weak_design::WeakDesign;

/// Below this much work per call, bits are evaluated sequentially.
const PARALLEL_WORK: usize = 1 << 12;

#[derive(Clone, Debug)]
pub struct TrevisanInstance {
    design: WeakDesign,
    code: CodeSpec,
    advertised: Option<ExtractorParams>,
}

/// Per-bit evaluation points `(a_i, z_i)` cut from one seed.
#[derive(Clone, Debug)]
pub struct PreparedSeed {
    points: Vec<(Limbs, Limbs)>,
}

impl TrevisanInstance {
    pub fn new(design: WeakDesign, code: CodeSpec) -> Result<Self> {
        if design.t() < code.t() {
            return param(format!(
                "design sets have {} elements, the one-bit extractor needs {}",
                design.t(),
                code.t()
            ));
        }
        Ok(TrevisanInstance {
            design,
            code,
            advertised: None,
        })
    }

    pub fn with_params(mut self, params: ExtractorParams) -> Self {
        self.advertised = Some(params);
        self
    }

    pub fn design(&self) -> &WeakDesign {
        &self.design
    }

    pub fn code(&self) -> &CodeSpec {
        &self.code
    }

    pub fn advertised(&self) -> Option<&ExtractorParams> {
        self.advertised.as_ref()
    }

    pub fn n(&self) -> usize {
        self.code.n()
    }

    pub fn d(&self) -> usize {
        self.design.d()
    }

    pub fn m(&self) -> usize {
        self.design.m()
    }

    /// One-bit seed length.
    pub fn t(&self) -> usize {
        self.code.t()
    }

    /// The `t`-bit seed of output bit `i`.
    pub fn bit_seed(&self, y: &BitString, i: usize) -> BitString {
        let set = &self.design.set(i)[..self.code.t()];
        let mut out = BitString::zeros(set.len());
        for (k, &p) in set.iter().enumerate() {
            if y.get(p as usize) {
                out.set(k, true);
            }
        }
        out
    }

    pub fn prepare_seed(&self, y: &BitString) -> Result<PreparedSeed> {
        if y.len() != self.d() {
            return param(format!("seed has {} bits, instance needs d = {}", y.len(), self.d()));
        }
        let s = self.code.s();
        let points = (0..self.m())
            .map(|i| {
                let ys = self.bit_seed(y, i);
                (read_symbol(&ys, 0, s), read_symbol(&ys, s as usize, s))
            })
            .collect();
        Ok(PreparedSeed { points })
    }

    fn bit(&self, src: &PreparedSource, point: &(Limbs, Limbs)) -> bool {
        crate::bitfield::limbs_inner_product(&self.code.eval(src, &point.0), &point.1)
    }

    pub fn extract_prepared(&self, x: &BitString, seed: &PreparedSeed) -> Result<BitString> {
        let src = self.code.prepare(x)?;
        let bits: Vec<bool> = if self.m() * self.code.ell() >= PARALLEL_WORK {
            seed.points.par_iter().map(|p| self.bit(&src, p)).collect()
        } else {
            seed.points.iter().map(|p| self.bit(&src, p)).collect()
        };
        Ok(BitString::from_bits(&bits))
    }

    /// Output bits for a prepared source and seed, sequentially.
    pub fn eval_prepared(&self, src: &PreparedSource, seed: &PreparedSeed) -> BitString {
        let bits: Vec<bool> = seed.points.iter().map(|p| self.bit(src, p)).collect();
        BitString::from_bits(&bits)
    }

    /// Evaluates the output bits one after another, in index order.
    pub fn extract_sequential(&self, x: &BitString, y: &BitString) -> Result<BitString> {
        let seed = self.prepare_seed(y)?;
        let src = self.code.prepare(x)?;
        let bits: Vec<bool> = seed.points.iter().map(|p| self.bit(&src, p)).collect();
        Ok(BitString::from_bits(&bits))
    }
}

pub fn extract(inst: &TrevisanInstance, x: &BitString, y: &BitString) -> Result<BitString> {
    if x.len() != inst.n() {
        return param(format!("source has {} bits, instance needs n = {}", x.len(), inst.n()));
    }
    inst.extract_prepared(x, &inst.prepare_seed(y)?)
}

/// How seeds are supplied to [`extract_stream`].
#[derive(Clone, Debug)]
pub enum StreamSeed {
    /// `d` fresh bits per block, consumed in order.
    Fresh(BitString),
    /// One `d`-bit seed shared by every block.
    Reused(BitString),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StreamReport {
    pub blocks: u64,
    pub seed_reused: bool,
    /// Advertised per-block error, when the instance carries parameters.
    pub block_error: Option<f64>,
    /// `blocks · ε` when the seed is shared across blocks.
    pub joint_error: Option<f64>,
}

struct BitSink<W> {
    inner: W,
    acc: u8,
    filled: u8,
    buf: Vec<u8>,
}

impl<W: Write> BitSink<W> {
    fn new(inner: W) -> Self {
        BitSink {
            inner,
            acc: 0,
            filled: 0,
            buf: Vec::new(),
        }
    }

    fn push(&mut self, bits: &BitString) {
        if self.filled == 0 && bits.len() % 8 == 0 {
            self.buf.extend_from_slice(&bits.to_bytes());
            return;
        }
        for b in bits.iter() {
            self.acc = (self.acc << 1) | b as u8;
            self.filled += 1;
            if self.filled == 8 {
                self.buf.push(self.acc);
                self.acc = 0;
                self.filled = 0;
            }
        }
    }

    fn flush(&mut self) -> Result<()> {
        self.inner.write_all(&self.buf)?;
        self.buf.clear();
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        if self.filled > 0 {
            self.buf.push(self.acc << (8 - self.filled));
            self.filled = 0;
        }
        self.flush()?;
        self.inner.flush()?;
        Ok(())
    }
}

fn read_full(r: &mut impl Read, buf: &mut [u8]) -> Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(k) => got += k,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(got)
}

/// Extracts every `n`-bit block of an MSB-first bitstream and writes the
/// `m`-bit outputs back to back, zero padding the final byte.
///
/// A trailing partial block is an error unless it is shorter than a byte
/// (the padding of the last input byte).
pub fn extract_stream(
    inst: &TrevisanInstance,
    source: impl Read,
    seed: &StreamSeed,
    sink: impl Write,
) -> Result<StreamReport> {
    extract_stream_with(inst, inst.advertised().map(|p| p.epsilon), source, seed, sink)
}

/// [`extract_stream`] for any seeded extractor, with its advertised error.
pub fn extract_stream_with(
    ext: &dyn SeededExtractor,
    block_error: Option<f64>,
    mut source: impl Read,
    seed: &StreamSeed,
    sink: impl Write,
) -> Result<StreamReport> {
    let n = ext.n();
    let d = ext.d();
    let (seed_bits, reused) = match seed {
        StreamSeed::Fresh(s) => (s, false),
        StreamSeed::Reused(s) => (s, true),
    };
    if reused && seed_bits.len() != d {
        return param(format!("reused seed has {} bits, instance needs d = {d}", seed_bits.len()));
    }
    let groups = (8 << 20) / n.max(1);
    let batch_bytes = n * groups.max(1);
    let mut buf = vec![0u8; batch_bytes];
    let mut out = BitSink::new(sink);
    let mut blocks = 0u64;
    loop {
        let got = read_full(&mut source, &mut buf)?;
        if got == 0 {
            break;
        }
        let bits = BitString::from_bytes(&buf[..got], got * 8)?;
        let count = bits.len() / n;
        let leftover = bits.len() - count * n;
        if leftover >= 8 {
            return Err(Error::Parameter(format!(
                "input ends with a partial block of {leftover} bits (n = {n})"
            )));
        }
        let first = blocks as usize;
        let outputs: Vec<BitString> = (0..count)
            .into_par_iter()
            .map(|b| {
                let x = bits.slice(b * n, n);
                if reused {
                    return ext.extract(&x, seed_bits);
                }
                let start = (first + b) * d;
                if start + d > seed_bits.len() {
                    return Err(Error::Parameter(format!(
                        "seed exhausted at block {}: {} bits supplied, {d} needed per block",
                        first + b,
                        seed_bits.len()
                    )));
                }
                ext.extract(&x, &seed_bits.slice(start, d))
            })
            .collect::<Result<_>>()?;
        for o in &outputs {
            out.push(o);
        }
        out.flush()?;
        blocks += count as u64;
        if got < batch_bytes {
            break;
        }
    }
    out.finish()?;
    Ok(StreamReport {
        blocks,
        seed_reused: reused,
        block_error,
        joint_error: if reused {
            block_error.map(|e| e * blocks as f64)
        } else {
            None
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weak_design::block_design;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bits(rng: &mut ChaCha8Rng, len: usize) -> BitString {
        let bits: Vec<bool> = (0..len).map(|_| rng.gen()).collect();
        BitString::from_bits(&bits)
    }

    fn micro() -> TrevisanInstance {
        let code = CodeSpec::with_symbol_bits(8, 2).unwrap();
        let design = WeakDesign::from_sets(4, 8, &[vec![0, 1, 2, 3], vec![2, 3, 4, 5]]).unwrap();
        TrevisanInstance::new(design, code).unwrap()
    }

    // Straight-line GF(4) arithmetic with modulus x^2 + x + 1.
    fn gf4_mul(a: u8, b: u8) -> u8 {
        let mut r = 0;
        for i in 0..2 {
            if b >> i & 1 == 1 {
                r ^= a << i;
            }
        }
        if r & 4 != 0 {
            r ^= 0b111;
        }
        r
    }

    #[test]
    fn micro_instance_matches_straight_line_oracle() {
        let inst = micro();
        let sets = [[0usize, 1, 2, 3], [2, 3, 4, 5]];
        for x in 0..256u64 {
            for y in 0..256u64 {
                let xb = BitString::from_u64(x, 8);
                let yb = BitString::from_u64(y, 8);
                let out = extract(&inst, &xb, &yb).unwrap();
                for (i, set) in sets.iter().enumerate() {
                    let sb = |k: usize| yb.get(set[k]) as u8;
                    let a = sb(0) << 1 | sb(1);
                    let z = sb(2) << 1 | sb(3);
                    let c: Vec<u8> = (0..4).map(|j| ((x >> (6 - 2 * j)) & 3) as u8).collect();
                    let mut v = 0;
                    let mut pow = 1;
                    for cj in c {
                        v ^= gf4_mul(cj, pow);
                        pow = gf4_mul(pow, a);
                    }
                    assert_eq!(out.get(i), (v & z).count_ones() % 2 == 1);
                }
            }
        }
    }

    #[test]
    fn trivial_cases() {
        let inst = micro();
        let out = extract(&inst, &BitString::zeros(8), &BitString::from_u64(0xa7, 8)).unwrap();
        assert!(out.is_zero());
        assert!(extract(&inst, &BitString::zeros(7), &BitString::zeros(8)).is_err());
        assert!(extract(&inst, &BitString::zeros(8), &BitString::zeros(9)).is_err());

        let code = CodeSpec::with_symbol_bits(6, 2).unwrap();
        let design = WeakDesign::from_sets(5, 7, &[vec![1, 2, 4, 5, 6]]).unwrap();
        let one = TrevisanInstance::new(design, code).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x = random_bits(&mut rng, 6);
            let y = random_bits(&mut rng, 7);
            let ys = y.select(&[1, 2, 4, 5]).unwrap();
            let expect = crate::code_extractor::extract_bit(&code, &x, &ys).unwrap();
            assert_eq!(extract(&one, &x, &y).unwrap().get(0), expect);
        }
    }

    #[test]
    fn short_design_is_rejected() {
        let code = CodeSpec::with_symbol_bits(8, 2).unwrap();
        let design = WeakDesign::from_sets(3, 6, &[vec![0, 1, 2]]).unwrap();
        assert!(TrevisanInstance::new(design, code).is_err());
    }

    #[test]
    fn parallel_equals_sequential() {
        let code = CodeSpec::with_symbol_bits(4096, 12).unwrap();
        let design = block_design(24, 200).unwrap();
        let inst = TrevisanInstance::new(design, code).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_bits(&mut rng, 4096);
        let y = random_bits(&mut rng, inst.d());
        assert_eq!(extract(&inst, &x, &y).unwrap(), inst.extract_sequential(&x, &y).unwrap());
    }

    #[test]
    fn universe_permutation_with_seed_is_invisible() {
        // Swapping whole block universes keeps every set's internal order.
        let code = CodeSpec::with_symbol_bits(10, 3).unwrap();
        let design = block_design(6, 7).unwrap();
        let inst = TrevisanInstance::new(design.clone(), code).unwrap();
        let d = design.d();
        let width = (d / 3) as u32;
        let perm: Vec<u32> = (0..d as u32)
            .map(|e| match e / width {
                0 => e + 2 * width,
                2 => e - 2 * width,
                _ => e,
            })
            .collect();
        let moved = design.permuted(&perm).unwrap();
        let inst2 = TrevisanInstance::new(moved, code).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..40 {
            let x = random_bits(&mut rng, 10);
            let y = random_bits(&mut rng, d);
            let mut y2 = BitString::zeros(d);
            for e in 0..d {
                y2.set(perm[e] as usize, y.get(e));
            }
            assert_eq!(extract(&inst, &x, &y).unwrap(), extract(&inst2, &x, &y2).unwrap());
        }
    }

    #[test]
    fn stream_examples() {
        let inst = micro();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut out = Vec::new();
        let r = extract_stream(&inst, &[][..], &StreamSeed::Fresh(BitString::zeros(0)), &mut out).unwrap();
        assert_eq!(r.blocks, 0);
        assert!(out.is_empty());

        let input: Vec<u8> = (0..3).map(|_| rng.gen()).collect();
        let seed = random_bits(&mut rng, 3 * 8);
        let mut out = Vec::new();
        let r = extract_stream(&inst, &input[..], &StreamSeed::Fresh(seed.clone()), &mut out).unwrap();
        assert_eq!(r.blocks, 3);
        let mut expect = BitString::zeros(0);
        for b in 0..3 {
            let x = BitString::from_bytes(&input[b..b + 1], 8).unwrap();
            expect = expect.concat(&extract(&inst, &x, &seed.slice(8 * b, 8)).unwrap());
        }
        assert_eq!(out, expect.to_bytes());

        let shared = random_bits(&mut rng, 8);
        let mut out = Vec::new();
        let r = extract_stream(&inst, &input[..], &StreamSeed::Reused(shared.clone()), &mut out).unwrap();
        assert!(r.seed_reused);
        let mut expect = BitString::zeros(0);
        for b in 0..3 {
            let x = BitString::from_bytes(&input[b..b + 1], 8).unwrap();
            expect = expect.concat(&extract(&inst, &x, &shared).unwrap());
        }
        assert_eq!(out, expect.to_bytes());

        // Seed too short for the third block.
        let mut out = Vec::new();
        assert!(extract_stream(&inst, &input[..], &StreamSeed::Fresh(seed.slice(0, 16)), &mut out).is_err());
    }

    #[test]
    fn stream_rejects_partial_blocks() {
        let code = CodeSpec::with_symbol_bits(12, 3).unwrap();
        let design = block_design(code.t(), 2).unwrap();
        let inst = TrevisanInstance::new(design, code).unwrap();
        let seed = StreamSeed::Reused(BitString::zeros(inst.d()));
        // 3 bytes = 24 bits = 2 blocks of 12.
        assert_eq!(extract_stream(&inst, &[1u8, 2, 3][..], &seed, Vec::new()).unwrap().blocks, 2);
        // 2 bytes = 16 bits: one block plus 4 bits of padding.
        assert_eq!(extract_stream(&inst, &[1u8, 2][..], &seed, Vec::new()).unwrap().blocks, 1);
        // 4 bytes = 32 bits: two blocks plus 8 stray bits.
        assert!(extract_stream(&inst, &[1u8, 2, 3, 4][..], &seed, Vec::new()).is_err());
    }
}
