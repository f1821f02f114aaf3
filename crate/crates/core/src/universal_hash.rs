//! Toeplitz hashing and two-stage composition.
//!
//! `T[i][j] = seed[m_out - 1 + j - i]`: row 0 is `seed[m_out-1 ..]`, column
//! 0 read bottom-up is `seed[0 .. m_out)`.

use crate::bitfield::BitString;
use crate::code_extractor::{extract_bit, CodeSpec};
use crate::error::{param, Result};
use crate::params::log_inv;
use crate::trevisan::{extract, TrevisanInstance};

/// A seeded map `{0,1}^n × {0,1}^d → {0,1}^m`.
pub trait SeededExtractor: Sync {
    fn n(&self) -> usize;
    fn d(&self) -> usize;
    fn m(&self) -> usize;
    fn extract(&self, x: &BitString, y: &BitString) -> Result<BitString>;
}

impl SeededExtractor for TrevisanInstance {
    fn n(&self) -> usize {
        TrevisanInstance::n(self)
    }

    fn d(&self) -> usize {
        TrevisanInstance::d(self)
    }

    fn m(&self) -> usize {
        TrevisanInstance::m(self)
    }

    fn extract(&self, x: &BitString, y: &BitString) -> Result<BitString> {
        extract(self, x, y)
    }
}

impl SeededExtractor for CodeSpec {
    fn n(&self) -> usize {
        CodeSpec::n(self)
    }

    fn d(&self) -> usize {
        self.t()
    }

    fn m(&self) -> usize {
        1
    }

    fn extract(&self, x: &BitString, y: &BitString) -> Result<BitString> {
        Ok(BitString::from_bits(&[extract_bit(self, x, y)?]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ToeplitzSpec {
    n_in: usize,
    m_out: usize,
}

impl ToeplitzSpec {
    pub fn new(n_in: usize, m_out: usize) -> Result<Self> {
        if n_in == 0 {
            return param("Toeplitz input length must be positive");
        }
        if m_out > n_in {
            return param(format!("Toeplitz output {m_out} exceeds input {n_in}"));
        }
        Ok(ToeplitzSpec { n_in, m_out })
    }

    /// Output length `⌊k - 2 log 1/ε⌋`, clamped to `[0, n_in]`.
    pub fn for_threshold(n_in: usize, k: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return param(format!("eps = {eps} outside (0, 1]"));
        }
        let m = (k - 2.0 * log_inv(eps)).floor().max(0.0) as usize;
        Self::new(n_in, m.min(n_in))
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn m_out(&self) -> usize {
        self.m_out
    }

    /// `n_in + m_out - 1`, or 0 for an empty output.
    pub fn seed_len(&self) -> usize {
        if self.m_out == 0 {
            0
        } else {
            self.n_in + self.m_out - 1
        }
    }

    /// The matrix, one row per output bit.
    pub fn matrix(&self, seed: &BitString) -> Result<Vec<BitString>> {
        self.check_seed(seed)?;
        Ok((0..self.m_out)
            .map(|i| seed.slice(self.m_out - 1 - i, self.n_in))
            .collect())
    }

    fn check_seed(&self, seed: &BitString) -> Result<()> {
        if seed.len() != self.seed_len() {
            return param(format!(
                "Toeplitz seed has {} bits, expected {}",
                seed.len(),
                self.seed_len()
            ));
        }
        Ok(())
    }
}

/// `T·x` over GF(2).
pub fn toeplitz_hash(spec: &ToeplitzSpec, x: &BitString, seed: &BitString) -> Result<BitString> {
    if x.len() != spec.n_in {
        return param(format!("Toeplitz input has {} bits, expected {}", x.len(), spec.n_in));
    }
    spec.check_seed(seed)?;
    let n = spec.n_in;
    let mut out = BitString::zeros(spec.m_out);
    for i in 0..spec.m_out {
        let base = spec.m_out - 1 - i;
        let mut acc = 0u64;
        let mut j = 0;
        while j < n {
            let len = (n - j).min(64);
            acc ^= seed.read_u64(base + j, len) & x.read_u64(j, len);
            j += len;
        }
        out.set(i, acc.count_ones() & 1 == 1);
    }
    Ok(out)
}

impl SeededExtractor for ToeplitzSpec {
    fn n(&self) -> usize {
        self.n_in
    }

    fn d(&self) -> usize {
        self.seed_len()
    }

    fn m(&self) -> usize {
        self.m_out
    }

    fn extract(&self, x: &BitString, y: &BitString) -> Result<BitString> {
        toeplitz_hash(self, x, y)
    }
}

/// Threshold and error a stage is advertised at.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Advertised {
    pub k: f64,
    pub eps: f64,
}

/// `(Ext1(x, y1), Ext2(x, y2))` on the seed `y1 ‖ y2`.
pub struct Composed<'a> {
    first: &'a dyn SeededExtractor,
    second: &'a dyn SeededExtractor,
    advertised: Advertised,
}

impl<'a> Composed<'a> {
    /// Fails unless the second stage's threshold is at most `k - m1`.
    pub fn new(
        first: &'a dyn SeededExtractor,
        p1: Advertised,
        second: &'a dyn SeededExtractor,
        p2: Advertised,
    ) -> Result<Self> {
        if first.n() != second.n() {
            return param(format!(
                "stages read {} and {} source bits",
                first.n(),
                second.n()
            ));
        }
        let left = p1.k - first.m() as f64;
        if second.m() > 0 && p2.k > left + 1e-9 {
            return param(format!(
                "second stage needs k = {} but only k - m1 = {left} remains",
                p2.k
            ));
        }
        let eps = if second.m() == 0 { p1.eps } else { p1.eps + p2.eps };
        Ok(Composed {
            first,
            second,
            advertised: Advertised { k: p1.k, eps },
        })
    }

    pub fn advertised(&self) -> Advertised {
        self.advertised
    }
}

impl SeededExtractor for Composed<'_> {
    fn n(&self) -> usize {
        self.first.n()
    }

    fn d(&self) -> usize {
        self.first.d() + self.second.d()
    }

    fn m(&self) -> usize {
        self.first.m() + self.second.m()
    }

    fn extract(&self, x: &BitString, y: &BitString) -> Result<BitString> {
        if y.len() != self.d() {
            return param(format!("seed has {} bits, expected {}", y.len(), self.d()));
        }
        let d1 = self.first.d();
        compose_outputs(
            self.first,
            self.second,
            x,
            &y.slice(0, d1),
            &y.slice(d1, self.second.d()),
        )
    }
}

fn compose_outputs(
    first: &dyn SeededExtractor,
    second: &dyn SeededExtractor,
    x: &BitString,
    y1: &BitString,
    y2: &BitString,
) -> Result<BitString> {
    let a = first.extract(x, y1)?;
    if second.m() == 0 {
        return Ok(a);
    }
    Ok(a.concat(&second.extract(x, y2)?))
}

/// Both stages on independent seeds, with the composite parameters.
pub fn compose(
    first: &dyn SeededExtractor,
    p1: Advertised,
    second: &dyn SeededExtractor,
    p2: Advertised,
    x: &BitString,
    y1: &BitString,
    y2: &BitString,
) -> Result<(BitString, Advertised)> {
    let c = Composed::new(first, p1, second, p2)?;
    Ok((compose_outputs(first, second, x, y1, y2)?, c.advertised()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::{One, Zero};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bits(s: &str) -> BitString {
        BitString::parse(s).unwrap()
    }

    fn naive(spec: &ToeplitzSpec, x: &BitString, seed: &BitString) -> BitString {
        let mut out = BitString::zeros(spec.m_out());
        for i in 0..spec.m_out() {
            let mut b = false;
            for j in 0..spec.n_in() {
                b ^= seed.get(spec.m_out() - 1 + j - i) & x.get(j);
            }
            out.set(i, b);
        }
        out
    }

    fn random_bits(rng: &mut ChaCha8Rng, len: usize) -> BitString {
        BitString::from_bits(&(0..len).map(|_| rng.gen()).collect::<Vec<_>>())
    }

    #[test]
    fn trivial_cases() {
        let s = ToeplitzSpec::new(5, 3).unwrap();
        assert!(toeplitz_hash(&s, &BitString::zeros(5), &bits("1011011")).unwrap().is_zero());
        let id = ToeplitzSpec::new(6, 6).unwrap();
        let mut seed = BitString::zeros(11);
        seed.set(5, true);
        let x = bits("101101");
        assert_eq!(toeplitz_hash(&id, &x, &seed).unwrap(), x);
        assert!(ToeplitzSpec::new(3, 4).is_err());
        assert!(toeplitz_hash(&s, &BitString::zeros(4), &bits("1011011")).is_err());
        assert!(toeplitz_hash(&s, &BitString::zeros(5), &bits("101101")).is_err());
    }

    #[test]
    fn three_by_two() {
        let s = ToeplitzSpec::new(3, 2).unwrap();
        let seed = bits("1011");
        let rows = s.matrix(&seed).unwrap();
        assert_eq!(rows, vec![bits("011"), bits("101")]);
        assert_eq!(toeplitz_hash(&s, &bits("110"), &seed).unwrap(), bits("11"));
        assert_eq!(toeplitz_hash(&s, &bits("110"), &seed).unwrap(), naive(&s, &bits("110"), &seed));
    }

    #[test]
    fn fast_path_matches_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (n, m) in [(1, 1), (64, 1), (65, 64), (130, 70), (300, 17)] {
            let s = ToeplitzSpec::new(n, m).unwrap();
            for _ in 0..5 {
                let x = random_bits(&mut rng, n);
                let y = random_bits(&mut rng, s.seed_len());
                assert_eq!(toeplitz_hash(&s, &x, &y).unwrap(), naive(&s, &x, &y));
            }
        }
    }

    #[test]
    fn two_universal_exhaustive() {
        for (n, m) in [(2, 1), (3, 2), (4, 4), (6, 3), (8, 2), (10, 1)] {
            let s = ToeplitzSpec::new(n, m).unwrap();
            let seeds = 1usize << s.seed_len();
            // Linear, so a pair x, x' collides exactly when T (x ⊕ x') = 0.
            for dx in 1..(1u64 << n) {
                let dx = BitString::from_u64(dx, n);
                let hits = (0..seeds)
                    .filter(|&y| {
                        let y = BitString::from_u64(y as u64, s.seed_len());
                        toeplitz_hash(&s, &dx, &y).unwrap().is_zero()
                    })
                    .count();
                assert!(hits << m <= seeds, "n={n} m={m} dx={dx}");
            }
        }
    }

    #[test]
    fn leftover_hash_micro() {
        // Flat sources with k >= m + 2 log 1/ε on n = 6, m = 1, ε = 1/4.
        let (n, m) = (6usize, 1usize);
        let s = ToeplitzSpec::new(n, m).unwrap();
        let seeds = 1u64 << s.seed_len();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let eps = BigRational::new(1.into(), 4.into());
        for _ in 0..40 {
            let mut support: Vec<u64> = (0..64).collect();
            for i in (1..support.len()).rev() {
                support.swap(i, rng.gen_range(0..=i));
            }
            support.truncate(32);
            let mut total = BigRational::zero();
            for y in 0..seeds {
                let y = BitString::from_u64(y, s.seed_len());
                let mut counts = [0i64; 2];
                for &x in &support {
                    let z = toeplitz_hash(&s, &BitString::from_u64(x, n), &y).unwrap();
                    counts[z.to_u64() as usize] += 1;
                }
                let half = BigRational::new(1.into(), 2.into());
                for c in counts {
                    let p = BigRational::new(c.into(), 32.into());
                    let d = if p > half { &p - &half } else { &half - &p };
                    total += d;
                }
            }
            let err = total / BigRational::from_integer((2 * seeds as i64).into());
            assert!(err <= eps, "{err}");
            assert!(err < BigRational::one());
        }
    }

    #[test]
    fn composition_bookkeeping() {
        let a = ToeplitzSpec::new(8, 2).unwrap();
        let b = ToeplitzSpec::new(8, 1).unwrap();
        let p1 = Advertised { k: 8.0, eps: 0.25 };
        let ok = Advertised { k: 6.0, eps: 0.125 };
        let c = Composed::new(&a, p1, &b, ok).unwrap();
        assert_eq!(c.advertised(), Advertised { k: 8.0, eps: 0.375 });
        assert_eq!(c.d(), 9 + 8);
        let bad = Advertised { k: 6.5, eps: 0.125 };
        assert!(Composed::new(&a, p1, &b, bad).is_err());

        let x = bits("10110010");
        let y1 = bits("110100101");
        let y2 = bits("01101100");
        let (out, adv) = compose(&a, p1, &b, ok, &x, &y1, &y2).unwrap();
        assert_eq!(out, toeplitz_hash(&a, &x, &y1).unwrap().concat(&toeplitz_hash(&b, &x, &y2).unwrap()));
        assert_eq!(adv.eps, 0.375);
        assert_eq!(c.extract(&x, &y1.concat(&y2)).unwrap(), out);

        let empty = ToeplitzSpec::new(8, 0).unwrap();
        let (out, adv) = compose(&a, p1, &empty, bad, &x, &y1, &BitString::zeros(0)).unwrap();
        assert_eq!(out, toeplitz_hash(&a, &x, &y1).unwrap());
        assert_eq!(adv, p1);
    }

    #[test]
    fn threshold_sizing() {
        let s = ToeplitzSpec::for_threshold(100, 50.0, 2f64.powi(-10)).unwrap();
        assert_eq!(s.m_out(), 30);
        assert_eq!(ToeplitzSpec::for_threshold(100, 10.0, 2f64.powi(-10)).unwrap().m_out(), 0);
    }
}
