//! Weak (t, r)-designs: families of `t`-subsets `S_0..S_{m-1}` of `[d]` with
//! `Σ_{j<i} 2^{|S_j ∩ S_i|} <= r·m` for every `i`.
//!
//! Sets are indexed from 0. Constructions are deterministic and every
//! design they return has been re-verified with exact integer arithmetic.

mod format;
mod greedy;

pub use format::{
    design_from_bytes, design_from_text, design_to_bytes, design_to_text, parse_design,
    read_certificate, read_design, write_certificate,
    write_design, DesignCache, DESIGN_MAGIC, DESIGN_VERSION,
};
pub use greedy::{
    block_design, block_sizes, greedy_basic_design, greedy_universe, lemma4_bound, ln_ceil_ratio,
    ln_interval, EXACT_UNIVERSE_LIMIT,
};

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::error::{param, Error, Result};

/// How a design was produced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Construction {
    Greedy { r_target: BigRational },
    Block { sizes: Vec<usize> },
    Imported,
}

impl Construction {
    pub fn tag(&self) -> &'static str {
        match self {
            Construction::Greedy { .. } => "greedy",
            Construction::Block { .. } => "block",
            Construction::Imported => "imported",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeakDesign {
    t: usize,
    d: usize,
    m: usize,
    indices: Vec<u32>,
    r_certified: BigRational,
    construction: Construction,
}

impl WeakDesign {
    /// Builds a design from explicit sets and certifies it.
    pub fn from_sets(t: usize, d: usize, sets: &[Vec<u32>]) -> Result<Self> {
        let mut indices = Vec::with_capacity(sets.len() * t);
        for (i, s) in sets.iter().enumerate() {
            if s.len() != t {
                return Err(Error::Verification {
                    index: i,
                    reason: format!("set has {} elements, expected {t}", s.len()),
                });
            }
            indices.extend_from_slice(s);
        }
        Self::from_flat(t, d, sets.len(), indices, Construction::Imported)
    }

    pub(crate) fn from_flat(
        t: usize,
        d: usize,
        m: usize,
        indices: Vec<u32>,
        construction: Construction,
    ) -> Result<Self> {
        let mut design = WeakDesign {
            t,
            d,
            m,
            indices,
            r_certified: BigRational::zero(),
            construction,
        };
        check_well_formed(&design)?;
        design.r_certified = certify(&design).r_certified;
        Ok(design)
    }

    /// Assembles a design without certifying it, for verification tests.
    pub fn unchecked(t: usize, d: usize, sets: &[Vec<u32>], r_certified: BigRational) -> Self {
        WeakDesign {
            t,
            d,
            m: sets.len(),
            indices: sets.concat(),
            r_certified,
            construction: Construction::Imported,
        }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// The sorted indices of `S_i`.
    pub fn set(&self, i: usize) -> &[u32] {
        &self.indices[i * self.t..(i + 1) * self.t]
    }

    pub fn sets(&self) -> impl Iterator<Item = &[u32]> {
        self.indices.chunks(self.t.max(1)).take(self.m)
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    /// `max_i (1/m) Σ_{j<i} 2^{|S_j ∩ S_i|}`.
    pub fn r_certified(&self) -> &BigRational {
        &self.r_certified
    }

    pub fn construction(&self) -> &Construction {
        &self.construction
    }

    pub(crate) fn with_construction(mut self, c: Construction) -> Self {
        self.construction = c;
        self
    }

    /// Applies a permutation of the universe `[d]` (`perm[old] = new`).
    pub fn permuted(&self, perm: &[u32]) -> Result<Self> {
        if perm.len() != self.d {
            return param("permutation length differs from d");
        }
        let sets: Vec<Vec<u32>> = self
            .sets()
            .map(|s| {
                let mut v: Vec<u32> = s.iter().map(|&e| perm[e as usize]).collect();
                v.sort_unstable();
                v
            })
            .collect();
        Self::from_sets(self.t, self.d, &sets)
    }
}

/// Exact per-index overlap sums of a design.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DesignCertificate {
    pub t: usize,
    pub m: usize,
    pub d: usize,
    pub sums: Vec<BigUint>,
    pub r_certified: BigRational,
    pub construction: Construction,
}

impl DesignCertificate {
    /// First index whose sum exceeds `r·m`, if any.
    pub fn first_violation(&self, r: &BigRational) -> Option<usize> {
        let bound = r * BigRational::from_integer((self.m as u64).into());
        self.sums
            .iter()
            .position(|s| BigRational::from_integer(s.clone().into()) > bound)
    }
}

fn check_well_formed(design: &WeakDesign) -> Result<()> {
    if design.t == 0 || design.m == 0 {
        return param("design needs t >= 1 and m >= 1");
    }
    if design.indices.len() != design.t * design.m {
        return Err(Error::Format(format!(
            "design holds {} indices, expected {}",
            design.indices.len(),
            design.t * design.m
        )));
    }
    for (i, s) in design.sets().enumerate() {
        if s.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Verification {
                index: i,
                reason: "set is not strictly increasing".into(),
            });
        }
        if s.iter().any(|&e| e as usize >= design.d) {
            return Err(Error::Verification {
                index: i,
                reason: format!("index outside [0, {})", design.d),
            });
        }
    }
    Ok(())
}

pub(crate) fn intersection_size(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// `Σ_{j<i} 2^{|S_j ∩ S_i|}`.
pub fn overlap_sum(design: &WeakDesign, i: usize) -> BigUint {
    let mut counts = vec![0u64; design.t + 1];
    let si = design.set(i);
    for j in 0..i {
        counts[intersection_size(design.set(j), si)] += 1;
    }
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(o, &c)| BigUint::from(c) << o)
        .sum()
}

fn certify(design: &WeakDesign) -> DesignCertificate {
    let sums: Vec<BigUint> = (0..design.m)
        .into_par_iter()
        .map(|i| overlap_sum(design, i))
        .collect();
    let max = sums.iter().max().cloned().unwrap_or_default();
    DesignCertificate {
        t: design.t,
        m: design.m,
        d: design.d,
        r_certified: BigRational::new(max.into(), (design.m as u64).into()),
        sums,
        construction: design.construction.clone(),
    }
}

/// Recomputes every overlap sum and checks `Σ_{j<i} 2^{|S_j ∩ S_i|} <= r·m`.
///
/// Fails with [`Error::Verification`] naming the first violating index.
pub fn verify_design(design: &WeakDesign, r: &BigRational) -> Result<DesignCertificate> {
    check_well_formed(design)?;
    let cert = certify(design);
    if let Some(i) = cert.first_violation(r) {
        return Err(Error::Verification {
            index: i,
            reason: format!(
                "overlap sum {} exceeds r*m = {}",
                cert.sums[i],
                r * BigRational::from_integer((design.m as u64).into())
            ),
        });
    }
    Ok(cert)
}

pub(crate) fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `Σ_k C(h,k) C(n-h,t-k) 2^k`, the numerator of `E[2^K]` for
/// `K ~ Hypergeometric(n, h, t)` over the denominator `C(n, t)`.
pub(crate) fn completion_numerator(n: u64, h: u64, t: u64) -> BigUint {
    let mut acc = BigUint::zero();
    for k in 0..=h.min(t) {
        if t - k > n - h {
            continue;
        }
        acc += (binomial(h, k) * binomial(n - h, t - k)) << k;
    }
    acc
}

/// `E[2^{|S ∩ S_j|}]` for `S` a uniform `t`-subset of `[d]` containing
/// `partial`.
pub fn expected_overlap_weight(
    partial: &[u32],
    fixed: &[u32],
    d: usize,
    t: usize,
) -> Result<BigRational> {
    if partial.len() > t || t > d {
        return param("need |partial| <= t <= d");
    }
    let mut p = partial.to_vec();
    p.sort_unstable();
    p.dedup();
    if p.len() != partial.len() {
        return param("partial set repeats an index");
    }
    let mut f = fixed.to_vec();
    f.sort_unstable();
    f.dedup();
    if p.iter().chain(&f).any(|&e| e as usize >= d) {
        return param(format!("index outside [0, {d})"));
    }
    let o = intersection_size(&p, &f) as u64;
    let n = (d - p.len()) as u64;
    let h = f.len() as u64 - o;
    let rest = (t - p.len()) as u64;
    let num = completion_numerator(n, h, rest) << o;
    let (num, den) = (num, binomial(n, rest));
    let g = num.gcd(&den);
    Ok(BigRational::new((num / &g).into(), (den / g).into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::ratio;

    fn subsets(d: u32, t: usize) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        for mask in 0u32..(1 << d) {
            if mask.count_ones() as usize == t {
                out.push((0..d).filter(|i| mask >> i & 1 == 1).collect());
            }
        }
        out
    }

    fn brute_expected(partial: &[u32], fixed: &[u32], d: u32, t: usize) -> BigRational {
        let mut total = BigUint::zero();
        let mut count = 0u64;
        for s in subsets(d, t) {
            if partial.iter().all(|p| s.contains(p)) {
                total += BigUint::one() << intersection_size(&s, fixed);
                count += 1;
            }
        }
        BigRational::new(total.into(), count.into())
    }

    #[test]
    fn expected_weight_examples() {
        assert_eq!(expected_overlap_weight(&[], &[1, 2], 4, 2).unwrap(), ratio(13, 6));
        // Fixed set already exhausted by the partial choice.
        assert_eq!(
            expected_overlap_weight(&[1, 2], &[1, 2], 6, 4).unwrap(),
            ratio(4, 1)
        );
        assert_eq!(
            expected_overlap_weight(&[0, 3, 5], &[3, 5, 7], 8, 3).unwrap(),
            ratio(4, 1)
        );
    }

    #[test]
    fn expected_weight_matches_enumeration() {
        let d = 7;
        for t in 1..=4 {
            for partial in (0..=t).flat_map(|c| subsets(d, c)) {
                for fixed in [vec![0, 1, 2], vec![2, 5], vec![6]] {
                    assert_eq!(
                        expected_overlap_weight(&partial, &fixed, d as usize, t).unwrap(),
                        brute_expected(&partial, &fixed, d, t),
                        "{partial:?} {fixed:?} t={t}"
                    );
                }
            }
        }
    }

    #[test]
    fn verify_examples() {
        let disjoint: Vec<Vec<u32>> = (0..4).map(|i| vec![2 * i, 2 * i + 1]).collect();
        let d = WeakDesign::from_sets(2, 8, &disjoint).unwrap();
        let cert = verify_design(&d, &ratio(1, 1)).unwrap();
        let sums: Vec<u64> = cert.sums.iter().map(|s| s.try_into().unwrap()).collect();
        assert_eq!(sums, vec![0, 1, 2, 3]);
        assert_eq!(cert.r_certified, ratio(3, 4));

        let twins = WeakDesign::from_sets(3, 5, &[vec![0, 1, 2], vec![0, 1, 2]]).unwrap();
        match verify_design(&twins, &ratio(1, 1)) {
            Err(Error::Verification { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
        assert!(verify_design(&twins, &ratio(4, 1)).is_ok());
    }

    #[test]
    fn malformed_sets_are_rejected() {
        assert!(WeakDesign::from_sets(2, 4, &[vec![1, 1]]).is_err());
        assert!(WeakDesign::from_sets(2, 4, &[vec![2, 1]]).is_err());
        assert!(WeakDesign::from_sets(2, 4, &[vec![1, 4]]).is_err());
        assert!(WeakDesign::from_sets(2, 4, &[vec![1]]).is_err());
    }
}
