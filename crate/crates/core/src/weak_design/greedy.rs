//! Derandomized greedy designs (method of conditional expectations) and the
//! `r = 1` block composition.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{completion_numerator, Construction, WeakDesign};
use crate::error::{param, Error, Result};

/// Above this universe size the greedy objective is tracked in floating
/// point; the finished design is still verified exactly.
pub const EXACT_UNIVERSE_LIMIT: usize = 4096;

const MAX_INDICES: usize = 1 << 30;

/// Bounds `[lo, hi]` on `atanh(u)` scaled by `2^prec`, for `0 <= u < 1`.
fn atanh_scaled(u: &BigRational, terms: u32, prec: u32) -> (BigInt, BigInt) {
    let scale = BigInt::one() << prec;
    let u2 = u * u;
    let mut pow = u.clone();
    let mut lo = BigInt::zero();
    let mut hi = BigInt::zero();
    for k in 0..terms {
        let term = &pow / BigInt::from(2 * k + 1);
        let scaled = term * BigRational::from_integer(scale.clone());
        lo += scaled.floor().to_integer();
        hi += scaled.ceil().to_integer();
        pow *= &u2;
    }
    // Tail: Σ_{k>=K} u^{2k+1}/(2k+1) <= u^{2K+1} / ((2K+1)(1-u^2)).
    let tail = &pow / (BigRational::from_integer(BigInt::from(2 * terms + 1)) * (BigRational::one() - u2));
    hi += (tail * BigRational::from_integer(scale)).ceil().to_integer();
    (lo, hi)
}

/// Rational bounds `lo <= ln r <= hi` for rational `r >= 1`, tightening
/// with `terms`.
pub fn ln_interval(r: &BigRational, terms: u32) -> Result<(BigRational, BigRational)> {
    if *r < BigRational::one() {
        return param(format!("ln interval needs r >= 1, got {r}"));
    }
    let prec = 3 * terms + 32;
    let two = BigRational::from_integer(2.into());
    let mut reduced = r.clone();
    let mut j = 0u32;
    while reduced >= two {
        reduced /= &two;
        j += 1;
    }
    let one = BigRational::one();
    let u = (&reduced - &one) / (&reduced + &one);
    let (lo_r, hi_r) = atanh_scaled(&u, terms, prec);
    let (lo_2, hi_2) = atanh_scaled(&BigRational::new(1.into(), 3.into()), terms, prec);
    let den = BigInt::one() << prec;
    let lo = BigRational::new(2 * (lo_r + BigInt::from(j) * lo_2), den.clone());
    let hi = BigRational::new(2 * (hi_r + BigInt::from(j) * hi_2), den);
    Ok((lo, hi))
}

/// `⌈t / ln r⌉`, exact. `ln r` is irrational for rational `r > 1`, so the
/// interval eventually separates.
pub fn ln_ceil_ratio(t: u64, r: &BigRational) -> Result<u64> {
    if *r <= BigRational::one() {
        return param(format!("r must exceed 1, got {r}"));
    }
    let t = BigRational::from_integer(BigInt::from(t));
    let mut terms = 16;
    while terms <= 1 << 14 {
        let (lo, hi) = ln_interval(r, terms)?;
        if lo.is_positive() {
            let a = (&t / &hi).ceil().to_integer();
            let b = (&t / &lo).ceil().to_integer();
            if a == b {
                return a
                    .to_u64()
                    .ok_or_else(|| Error::SizeGuard(format!("t/ln r = {a} exceeds u64")));
            }
        }
        terms *= 2;
    }
    Err(Error::Unsupported(format!("could not resolve ceil(t/ln {r})")))
}

/// `d = t·⌈t/ln r⌉`.
pub fn greedy_universe(t: usize, r_target: &BigRational) -> Result<usize> {
    let c = ln_ceil_ratio(t as u64, r_target)?;
    let d = (t as u64)
        .checked_mul(c)
        .filter(|&d| d <= u32::MAX as u64)
        .ok_or_else(|| Error::SizeGuard(format!("design universe t*{c} exceeds 2^32")))?;
    Ok(d as usize)
}

/// Marginal cost of adding an element of `S_j` to the partial set, indexed
/// by picks made so far `c` and current overlap `o = |partial ∩ S_j|`.
enum WeightTable {
    Small(Vec<Vec<u128>>),
    Big(Vec<Vec<BigUint>>),
    Float(Vec<Vec<f64>>),
}

fn exact_weights(t: usize, d: usize) -> Vec<Vec<BigUint>> {
    (0..t)
        .map(|c| {
            let n1 = (d - c - 1) as u64;
            let t1 = (t - c - 1) as u64;
            (0..=c)
                .map(|o| {
                    let h = (t - o) as u64;
                    let a = completion_numerator(n1, h - 1, t1) << 1;
                    let b = completion_numerator(n1, h, t1);
                    debug_assert!(a >= b);
                    (a - b) << o
                })
                .collect()
        })
        .collect()
}

struct LnFactorial(Vec<f64>);

impl LnFactorial {
    fn new(n: usize) -> Self {
        let mut v = Vec::with_capacity(n + 1);
        let mut acc = 0.0f64;
        v.push(0.0);
        for k in 1..=n {
            acc += (k as f64).ln();
            v.push(acc);
        }
        LnFactorial(v)
    }

    fn ln_binom(&self, n: usize, k: usize) -> f64 {
        self.0[n] - self.0[k] - self.0[n - k]
    }

    /// `E[2^K]`, `K ~ Hypergeometric(n, h, t)`.
    fn mgf2(&self, n: usize, h: usize, t: usize) -> f64 {
        let base = self.ln_binom(n, t);
        let kmin = t.saturating_sub(n - h);
        (kmin..=h.min(t))
            .map(|k| {
                (self.ln_binom(h, k) + self.ln_binom(n - h, t - k) - base + k as f64 * std::f64::consts::LN_2)
                    .exp()
            })
            .sum()
    }
}

fn float_weights(t: usize, d: usize) -> Vec<Vec<f64>> {
    let lf = LnFactorial::new(d);
    (0..t)
        .map(|c| {
            let n1 = d - c - 1;
            let t1 = t - c - 1;
            (0..=c)
                .map(|o| {
                    let h = t - o;
                    let w = 2.0 * lf.mgf2(n1, h - 1, t1) - lf.mgf2(n1, h, t1);
                    w.max(0.0) * ((o as f64 - t as f64) * std::f64::consts::LN_2).exp()
                })
                .collect()
        })
        .collect()
}

impl WeightTable {
    fn new(t: usize, d: usize, m: usize) -> Self {
        if d > EXACT_UNIVERSE_LIMIT {
            return WeightTable::Float(float_weights(t, d));
        }
        let big = exact_weights(t, d);
        let max_bits = big.iter().flatten().map(|w| w.bits()).max().unwrap_or(0);
        let headroom = (usize::BITS - m.leading_zeros()) as u64;
        if max_bits + headroom + 1 <= 127 {
            WeightTable::Small(
                big.iter()
                    .map(|row| row.iter().map(|w| w.to_u128().expect("fits")).collect())
                    .collect(),
            )
        } else {
            WeightTable::Big(big)
        }
    }
}

struct SlowState<'a> {
    indices: &'a [u32],
    t: usize,
    i: usize,
    overlap: &'a [usize],
    in_partial: &'a [bool],
}

impl SlowState<'_> {
    /// Lowest-index minimizer of `Σ_{j: e ∈ S_j} W[o_j]` over `e ∉ partial`.
    fn pick<W>(&self, row: &[W]) -> usize
    where
        W: Clone + PartialOrd + Zero + for<'w> std::ops::AddAssign<&'w W>,
    {
        let d = self.in_partial.len();
        let mut acc: Vec<W> = vec![W::zero(); d];
        for j in 0..self.i {
            let o = self.overlap[j];
            if o >= self.t {
                continue;
            }
            let w = &row[o];
            for &e in &self.indices[j * self.t..(j + 1) * self.t] {
                acc[e as usize] += w;
            }
        }
        let mut best: Option<usize> = None;
        for e in 0..d {
            if self.in_partial[e] {
                continue;
            }
            match best {
                Some(b) if !(acc[e] < acc[b]) => {}
                _ => best = Some(e),
            }
        }
        best.expect("universe larger than t leaves a candidate")
    }
}

/// Greedy sets over `[d]`; any prefix of the output is the output for a
/// smaller `m`.
fn greedy_indices(t: usize, m: usize, d: usize) -> Result<Vec<u32>> {
    if m.checked_mul(t).is_none_or(|n| n > MAX_INDICES) {
        return Err(Error::SizeGuard(format!("design with m*t = {m}*{t} indices")));
    }
    let mut indices: Vec<u32> = Vec::with_capacity(m * t);
    if d == t {
        for _ in 0..m {
            indices.extend(0..t as u32);
        }
        return Ok(indices);
    }
    let mut incidence: Vec<Vec<u32>> = Vec::new();
    let mut next_fresh = 0usize;
    let mut table: Option<WeightTable> = None;
    let mut in_partial = vec![false; d];
    let mut overlap: Vec<usize> = Vec::new();
    for i in 0..m {
        let mut set: Vec<u32> = Vec::with_capacity(t);
        // Elements in no earlier set cost nothing; all others cost strictly
        // more while picks remain below the remaining universe size.
        while set.len() < t && next_fresh < d {
            set.push(next_fresh as u32);
            next_fresh += 1;
        }
        if set.len() < t {
            if incidence.is_empty() {
                incidence = vec![Vec::new(); d];
                for (j, s) in indices.chunks(t).enumerate() {
                    for &e in s {
                        incidence[e as usize].push(j as u32);
                    }
                }
            }
            let table = table.get_or_insert_with(|| WeightTable::new(t, d, m));
            overlap.clear();
            overlap.resize(i, 0);
            for &e in &set {
                in_partial[e as usize] = true;
            }
            while set.len() < t {
                let c = set.len();
                let state = SlowState {
                    indices: &indices,
                    t,
                    i,
                    overlap: &overlap,
                    in_partial: &in_partial,
                };
                let e = match table {
                    WeightTable::Small(w) => state.pick(&w[c]),
                    WeightTable::Big(w) => state.pick(&w[c]),
                    WeightTable::Float(w) => state.pick(&w[c]),
                };
                in_partial[e] = true;
                for &j in &incidence[e] {
                    overlap[j as usize] += 1;
                }
                set.push(e as u32);
            }
            for &e in &set {
                in_partial[e as usize] = false;
            }
            set.sort_unstable();
        }
        if !incidence.is_empty() {
            for &e in &set {
                incidence[e as usize].push(i as u32);
            }
        }
        indices.extend_from_slice(&set);
    }
    Ok(indices)
}

fn check_greedy_bound(design: &WeakDesign, r_target: &BigRational) -> Result<()> {
    // Conditional expectations give Σ_{j<i} 2^{|S_j ∩ S_i|} <= i·r_target.
    for i in 0..design.m() {
        let sum = BigRational::from_integer(super::overlap_sum(design, i).into());
        if sum > r_target * BigRational::from_integer(BigInt::from(i)) {
            return Err(Error::Internal {
                index: i,
                reason: format!("overlap sum {sum} exceeds {i}*{r_target}"),
            });
        }
    }
    Ok(())
}

/// Weak `(t, r_target)`-design with `d = t·⌈t/ln r_target⌉`, built set by
/// set, element by element, minimizing the conditional expectation of
/// `Σ_{j<i} 2^{|S ∩ S_j|}` under uniform completion. Ties go to the lowest
/// index.
pub fn greedy_basic_design(t: usize, m: usize, r_target: &BigRational) -> Result<WeakDesign> {
    if t == 0 || m == 0 {
        return param("greedy design needs t >= 1 and m >= 1");
    }
    let d = greedy_universe(t, r_target)?;
    let indices = greedy_indices(t, m, d)?;
    let design = WeakDesign::from_flat(
        t,
        d,
        m,
        indices,
        Construction::Greedy {
            r_target: r_target.clone(),
        },
    )?;
    check_greedy_bound(&design, r_target)?;
    Ok(design)
}

/// Sizes `⌈m/2⌉, ⌈m/4⌉, …` of the blocks, each half of what remains, summing
/// to `m`.
pub fn block_sizes(m: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut rest = m;
    while rest > 0 {
        let b = rest.div_ceil(2);
        out.push(b);
        rest -= b;
    }
    out
}

/// `t·⌈t/ln 2⌉·⌈log 4m⌉`.
pub fn lemma4_bound(t: usize, m: usize) -> Result<u128> {
    let c = ln_ceil_ratio(t as u64, &BigRational::from_integer(2.into()))? as u128;
    let log4m = 2 + (m as u128).next_power_of_two().trailing_zeros() as u128;
    Ok(t as u128 * c * log4m)
}

/// Weak `(t, 1)`-design: blocks of halving size, each a greedy `r = 2`
/// design over its own disjoint universe.
pub fn block_design(t: usize, m: usize) -> Result<WeakDesign> {
    if t == 0 || m == 0 {
        return param("block design needs t >= 1 and m >= 1");
    }
    let two = BigRational::from_integer(2.into());
    let db = greedy_universe(t, &two)?;
    let sizes = block_sizes(m);
    let d = db
        .checked_mul(sizes.len())
        .filter(|&d| d <= u32::MAX as usize)
        .ok_or_else(|| Error::SizeGuard("block design universe exceeds 2^32".into()))?;
    let base = greedy_indices(t, sizes[0], db)?;
    let mut indices = Vec::with_capacity(m * t);
    let mut earlier = 0usize;
    for (b, &mb) in sizes.iter().enumerate() {
        // Within a block the greedy sums stay below 2(mb - 1); every earlier
        // set contributes exactly 1.
        if earlier + 2 * (mb - 1) > m {
            return Err(Error::Internal {
                index: earlier,
                reason: format!("block {b} of size {mb} overruns the budget m = {m}"),
            });
        }
        let offset = (b * db) as u32;
        indices.extend(base[..mb * t].iter().map(|&e| e + offset));
        earlier += mb;
    }
    let design = WeakDesign::from_flat(t, d, m, indices, Construction::Block { sizes })?;
    if *design.r_certified() > BigRational::one() {
        let cert = super::verify_design(&design, &BigRational::one());
        let index = match cert {
            Err(Error::Verification { index, .. }) => index,
            _ => 0,
        };
        return Err(Error::Internal {
            index,
            reason: "block design exceeds r = 1".into(),
        });
    }
    Ok(design)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::ratio;
    use crate::weak_design::{binomial, intersection_size, verify_design};

    #[test]
    fn ceil_ratio_examples() {
        let two = ratio(2, 1);
        assert_eq!(ln_ceil_ratio(2, &two).unwrap(), 3);
        assert_eq!(ln_ceil_ratio(3, &two).unwrap(), 5);
        assert_eq!(ln_ceil_ratio(4, &two).unwrap(), 6);
        for t in 1..2000u64 {
            let f = t as f64 / 2f64.ln();
            if (f - f.round()).abs() > 1e-6 {
                assert_eq!(ln_ceil_ratio(t, &two).unwrap(), f.ceil() as u64, "t={t}");
            }
        }
        assert_eq!(ln_ceil_ratio(10, &ratio(1000, 1)).unwrap(), 2);
        assert_eq!(ln_ceil_ratio(1 << 20, &two).unwrap(), 1_512_776);
        assert!(ln_ceil_ratio(3, &ratio(1, 1)).is_err());
    }

    #[test]
    fn ln_interval_brackets() {
        for (n, d) in [(2, 1), (3, 1), (1001, 1000), (256, 1), (7, 3)] {
            let (lo, hi) = ln_interval(&ratio(n, d), 24).unwrap();
            let x = (n as f64 / d as f64).ln();
            assert!(lo.to_f64().unwrap() <= x + 1e-15 && x - 1e-15 <= hi.to_f64().unwrap());
            assert!(&hi - &lo < ratio(1, 1 << 40));
        }
    }

    #[test]
    fn greedy_examples() {
        let two = ratio(2, 1);
        let one = greedy_basic_design(5, 1, &two).unwrap();
        assert_eq!(*one.r_certified(), ratio(0, 1));

        let d = greedy_basic_design(2, 3, &two).unwrap();
        assert_eq!(d.d(), 6);
        let cert = verify_design(&d, &two).unwrap();
        assert!(cert.sums.iter().all(|s| *s <= BigUint::from(6u32)));

        let d = greedy_basic_design(3, 8, &two).unwrap();
        assert_eq!(d.d(), 15);
        assert!(*d.r_certified() <= two);
        verify_design(&d, &two).unwrap();
    }

    #[test]
    fn greedy_is_deterministic_and_prefix_stable() {
        let r = ratio(3, 2);
        let a = greedy_basic_design(4, 40, &r).unwrap();
        let b = greedy_basic_design(4, 40, &r).unwrap();
        assert_eq!(a, b);
        let c = greedy_basic_design(4, 17, &r).unwrap();
        assert_eq!(&a.indices()[..17 * 4], c.indices());
    }

    // Brute force: at each step the chosen element minimizes the exact
    // conditional expectation, lowest index on ties.
    #[test]
    fn greedy_matches_conditional_expectation_oracle() {
        let t = 3;
        let r = ratio(2, 1);
        let design = greedy_basic_design(t, 12, &r).unwrap();
        let d = design.d();
        let mut built: Vec<Vec<u32>> = Vec::new();
        for i in 0..design.m() {
            let mut partial: Vec<u32> = Vec::new();
            for _ in 0..t {
                let mut best: Option<(BigRational, u32)> = None;
                for e in 0..d as u32 {
                    if partial.contains(&e) {
                        continue;
                    }
                    let mut cand = partial.clone();
                    cand.push(e);
                    let phi: BigRational = built
                        .iter()
                        .map(|s| crate::weak_design::expected_overlap_weight(&cand, s, d, t).unwrap())
                        .sum();
                    if best.as_ref().is_none_or(|(b, _)| phi < *b) {
                        best = Some((phi, e));
                    }
                }
                partial.push(best.unwrap().1);
            }
            partial.sort_unstable();
            assert_eq!(partial, design.set(i), "set {i}");
            built.push(partial);
        }
    }

    #[test]
    fn float_path_agrees_on_choices_with_small_universe() {
        // The float weights order candidates like the exact ones here.
        let t = 4;
        let d = 24;
        let exact = exact_weights(t, d);
        let float = float_weights(t, d);
        for c in 0..t {
            for o in 0..=c {
                let e = exact[c][o].to_f64().unwrap() / binomial((d - c - 1) as u64, (t - c - 1) as u64).to_f64().unwrap();
                let f = float[c][o] * 2f64.powi(t as i32);
                assert!((e - f).abs() <= 1e-9 * e.max(1.0), "c={c} o={o} {e} {f}");
            }
        }
    }

    #[test]
    fn block_examples() {
        let one = ratio(1, 1);
        let d = block_design(5, 1).unwrap();
        assert_eq!(*d.r_certified(), ratio(0, 1));

        let d = block_design(4, 2).unwrap();
        assert_eq!(d.d(), 48);
        assert!(d.d() as u128 <= lemma4_bound(4, 2).unwrap());
        assert_eq!(lemma4_bound(4, 2).unwrap(), 72);

        let d = block_design(3, 7).unwrap();
        assert_eq!(block_sizes(7), vec![4, 2, 1]);
        verify_design(&d, &one).unwrap();
        assert_eq!(block_sizes(8), vec![4, 2, 1, 1]);
    }

    #[test]
    fn cross_block_overlap_is_zero() {
        let t = 3;
        let design = block_design(t, 20).unwrap();
        let sizes = block_sizes(20);
        let mut block_of = Vec::new();
        for (b, &s) in sizes.iter().enumerate() {
            block_of.extend(std::iter::repeat_n(b, s));
        }
        for i in 0..20 {
            for j in 0..i {
                if block_of[i] != block_of[j] {
                    assert_eq!(intersection_size(design.set(i), design.set(j)), 0);
                }
            }
        }
    }

    #[test]
    fn greedy_grid_certifies() {
        for t in [1, 2, 3, 5, 8] {
            for m in [1, 2, 9, 33, 100] {
                for r in [ratio(2, 1), ratio(3, 2), ratio(5, 1)] {
                    let d = greedy_basic_design(t, m, &r).unwrap();
                    verify_design(&d, &r).unwrap();
                }
            }
        }
    }

    #[test]
    fn large_fresh_designs_are_fast() {
        let d = block_design(260, 256).unwrap();
        assert_eq!(*d.r_certified(), ratio(255, 256));
    }
}
