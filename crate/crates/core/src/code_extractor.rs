//! One-bit extractor from the Reed-Solomon ∘ Hadamard code.
//!
//! A source `x ∈ {0,1}^n` is cut into `ℓ = ⌈n/s⌉` big-endian GF(2^s)
//! symbols `c_0..c_{ℓ-1}` (zero padded at the end). A seed `y ∈ {0,1}^{2s}`
//! is read as `(a, z)`, `a` its first `s` bits, and the output bit is
//! `⟨p_x(a), z⟩` with `p_x(X) = Σ_j c_j X^j`. The codeword of `x` is this
//! bit over all `n̄ = 2^{2s}` seeds, indexed by the seed read as an integer.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;

use crate::bitfield::{limbs_inner_product, read_symbol, BinaryField, BitString, Limbs, MAX_SYMBOL_BITS};
use crate::error::{param, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CodeSpec {
    n: usize,
    s: u32,
    ell: usize,
    delta: f64,
    field: BinaryField,
}

fn pow2(e: u32) -> BigRational {
    BigRational::from_integer(BigInt::one() << e)
}

fn budget_holds(ell: usize, s: u32, delta: f64) -> bool {
    // (ℓ-1)/2^s <= 2δ², compared exactly (an f64 is a dyadic rational).
    let d = BigRational::from_float(delta).expect("finite delta");
    BigRational::from_integer(BigInt::from(ell - 1)) <= d.clone() * d * BigRational::from_integer(2.into()) * pow2(s)
}

impl CodeSpec {
    /// Spec with symbol size `s` and radius parameter `delta`, checked
    /// against `ℓ <= 2^s` and `(ℓ-1)/2^s <= 2δ²`.
    pub fn new(n: usize, s: u32, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return param(format!("delta {delta} outside (0, 1/2)"));
        }
        let spec = Self::with_symbol_bits(n, s)?;
        if !budget_holds(spec.ell, s, delta) {
            return param(format!(
                "(l-1)/q = {}/2^{s} exceeds 2*delta^2 for delta = {delta}",
                spec.ell - 1
            ));
        }
        Ok(CodeSpec { delta, ..spec })
    }

    /// Spec with symbol size `s` and the smallest radius parameter the
    /// distance budget allows, `δ = sqrt((ℓ-1)/(2q))`. That value can reach
    /// `1/2`, in which case the code carries no list-decoding guarantee;
    /// it is `0` for `ℓ = 1`, where every positive `δ` is admissible.
    pub fn with_symbol_bits(n: usize, s: u32) -> Result<Self> {
        if n == 0 {
            return param("source length must be positive");
        }
        if s == 0 || s > MAX_SYMBOL_BITS {
            return Err(Error::Unsupported(format!(
                "symbol size {s} outside 1..={MAX_SYMBOL_BITS}"
            )));
        }
        let ell = n.div_ceil(s as usize);
        if s < 64 && ell as u128 > 1u128 << s {
            return param(format!("l = {ell} symbols exceed the field order 2^{s}"));
        }
        let delta = ((ell - 1) as f64 / 2f64.powi(s as i32 + 1)).sqrt();
        Ok(CodeSpec {
            n,
            s,
            ell,
            delta,
            field: BinaryField::new(s)?,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    /// RS message length in symbols.
    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Seed length of the one-bit extractor, `2s`.
    pub fn t(&self) -> usize {
        2 * self.s as usize
    }

    pub fn q(&self) -> BigUint {
        BigUint::one() << self.s
    }

    /// `log2 n̄ = 2s`.
    pub fn n_bar_log2(&self) -> u32 {
        2 * self.s
    }

    pub fn field(&self) -> BinaryField {
        self.field
    }

    pub fn list_decodable(&self) -> bool {
        self.delta < 0.5
    }

    /// `(1 - (ℓ-1)/q) / 2`, the concatenation bound on relative distance.
    pub fn distance_bound(&self) -> BigRational {
        let q = pow2(self.s);
        let frac = BigRational::from_integer(BigInt::from(self.ell - 1)) / q;
        (BigRational::one() - frac) / BigRational::from_integer(2.into())
    }

    /// The promised list size `1/δ²`.
    pub fn list_bound(&self) -> f64 {
        1.0 / (self.delta * self.delta)
    }

    /// Min-entropy threshold `log(1/δ²) + log(1/2δ)` of the one-bit
    /// extractor, error `2δ`.
    pub fn entropy_threshold(&self) -> f64 {
        -2.0 * self.delta.log2() - (2.0 * self.delta).log2()
    }

    pub fn prepare(&self, x: &BitString) -> Result<PreparedSource> {
        if x.len() != self.n {
            return param(format!("source has {} bits, spec expects {}", x.len(), self.n));
        }
        Ok(PreparedSource {
            symbols: (0..self.ell)
                .map(|j| read_symbol(x, j * self.s as usize, self.s))
                .collect(),
        })
    }

    /// `p_x(a)` by Horner's rule.
    pub fn eval(&self, src: &PreparedSource, a: &Limbs) -> Limbs {
        let mut iter = src.symbols.iter().rev();
        let mut acc = *iter.next().expect("l >= 1");
        if src.symbols.len() >= 4 {
            let table = self.field.mul_table(a);
            for c in iter {
                acc = table.mul(&acc);
                for (x, y) in acc.iter_mut().zip(c) {
                    *x ^= y;
                }
            }
        } else {
            for c in iter {
                acc = self.field.mul_raw(&acc, a);
                for (x, y) in acc.iter_mut().zip(c) {
                    *x ^= y;
                }
            }
        }
        acc
    }

    /// The output bit for seed bits `y[0..2s)`; longer seeds are truncated.
    pub fn bit(&self, src: &PreparedSource, y: &BitString) -> bool {
        let a = read_symbol(y, 0, self.s);
        let z = read_symbol(y, self.s as usize, self.s);
        limbs_inner_product(&self.eval(src, &a), &z)
    }

    /// The full codeword of length `n̄`, `n̄ <= 2^24`.
    pub fn codeword(&self, x: &BitString) -> Result<BitString> {
        if self.s > 12 {
            return Err(Error::SizeGuard(format!("codeword length 2^{}", 2 * self.s)));
        }
        let src = self.prepare(x)?;
        Ok(self.codeword_prepared(&src))
    }

    fn codeword_prepared(&self, src: &PreparedSource) -> BitString {
        let q = 1u64 << self.s;
        let mut out = BitString::zeros((q * q) as usize);
        for a in 0..q {
            let v = self.eval(src, &[a, 0, 0, 0])[0];
            if v == 0 {
                continue;
            }
            for z in 0..q {
                if (v & z).count_ones() & 1 == 1 {
                    out.set((a * q + z) as usize, true);
                }
            }
        }
        out
    }
}

/// A source cut into its field symbols, lowest degree first.
#[derive(Clone, Debug)]
pub struct PreparedSource {
    symbols: Vec<Limbs>,
}

impl PreparedSource {
    pub fn symbols(&self) -> &[Limbs] {
        &self.symbols
    }
}

/// Smallest symbol size `s` with `(⌈n/s⌉ - 1)/2^s <= 2δ²`.
pub fn code_params(n: usize, delta: f64) -> Result<CodeSpec> {
    if n == 0 {
        return param("source length must be positive");
    }
    if !(delta > 0.0 && delta < 0.5) {
        return param(format!("delta {delta} outside (0, 1/2)"));
    }
    for s in 1..=MAX_SYMBOL_BITS {
        let ell = n.div_ceil(s as usize);
        if budget_holds(ell, s, delta) {
            return CodeSpec::new(n, s, delta);
        }
    }
    Err(Error::Unsupported(format!(
        "delta = {delta:e} needs symbols wider than {MAX_SYMBOL_BITS} bits"
    )))
}

/// `C(x)_y`.
pub fn extract_bit(spec: &CodeSpec, x: &BitString, y: &BitString) -> Result<bool> {
    if y.len() != spec.t() {
        return param(format!("seed has {} bits, spec expects {}", y.len(), spec.t()));
    }
    Ok(spec.bit(&spec.prepare(x)?, y))
}

fn check_exhaustive(spec: &CodeSpec, max_n: usize) -> Result<()> {
    if spec.n > max_n || spec.s > 8 {
        return Err(Error::SizeGuard(format!(
            "exhaustive code analysis needs n <= {max_n} and n̄ <= 2^16 (n = {}, s = {})",
            spec.n, spec.s
        )));
    }
    Ok(())
}

/// Minimum relative weight over all nonzero codewords, by enumeration.
pub fn min_distance_exhaustive(spec: &CodeSpec) -> Result<BigRational> {
    check_exhaustive(spec, 14)?;
    let n_bar = 1u64 << (2 * spec.s);
    let min = (1u64..1 << spec.n)
        .into_par_iter()
        .map(|x| {
            let src = spec.prepare(&BitString::from_u64(x, spec.n)).expect("length");
            spec.codeword_prepared(&src).count_ones() as u64
        })
        .min()
        .unwrap_or(n_bar);
    Ok(BigRational::new(min.into(), n_bar.into()))
}

/// Number of codewords within relative distance `radius` of `center`.
pub fn list_size_at(spec: &CodeSpec, center: &BitString, radius: &BigRational) -> Result<usize> {
    check_exhaustive(spec, 14)?;
    let n_bar = 1usize << (2 * spec.s);
    if center.len() != n_bar {
        return param(format!("center has {} bits, n̄ = {n_bar}", center.len()));
    }
    let limit = (radius * BigRational::from_integer(n_bar.into()))
        .floor()
        .to_integer()
        .to_i64()
        .unwrap_or(i64::MAX);
    Ok((0u64..1 << spec.n)
        .into_par_iter()
        .filter(|&x| {
            let src = spec.prepare(&BitString::from_u64(x, spec.n)).expect("length");
            let cw = spec.codeword_prepared(&src);
            (cw.hamming_distance(center).expect("length") as i64) <= limit
        })
        .count())
}
