//! Exact classical min-entropy, smooth min-entropy and variational distance
//! over explicit finite distributions.
//!
//! Masses are exact rationals. Entropies are reported as `f64` bits, but
//! every comparison the verification suites make goes through the exact
//! guessing probabilities.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{param, Error, Result};

pub type Prob = BigRational;

pub fn ratio(num: i64, den: i64) -> Prob {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `log2` of a positive big integer, accurate to f64 precision.
pub fn log2_biguint(v: &BigUint) -> f64 {
    let bits = v.bits();
    if bits <= 64 {
        return (v.to_u64().expect("fits") as f64).log2();
    }
    let shift = bits - 64;
    let top = (v >> shift).to_u64().expect("fits");
    (top as f64).log2() + shift as f64
}

/// `log2` of a positive rational.
pub fn log2_ratio(r: &Prob) -> f64 {
    assert!(r.is_positive(), "log2 of non-positive rational");
    let num = r.numer().magnitude();
    let den = r.denom().magnitude();
    log2_biguint(num) - log2_biguint(den)
}

/// A (possibly sub-normalized) mass function over `0..len`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Distribution {
    mass: Vec<Prob>,
}

impl Distribution {
    pub fn new(mass: Vec<Prob>) -> Result<Self> {
        if mass.iter().any(|p| p.is_negative()) {
            return param("negative probability mass");
        }
        let total: Prob = mass.iter().sum();
        if total > Prob::one() {
            return param(format!("total mass {total} exceeds 1"));
        }
        Ok(Distribution { mass })
    }

    /// Normalizes nonnegative integer weights.
    pub fn from_weights(weights: &[u64]) -> Result<Self> {
        let total: u64 = weights.iter().sum();
        if total == 0 {
            return param("all weights are zero");
        }
        Ok(Distribution {
            mass: weights
                .iter()
                .map(|&w| BigRational::new(BigInt::from(w), BigInt::from(total)))
                .collect(),
        })
    }

    pub fn uniform(len: usize) -> Self {
        let p = ratio(1, len as i64);
        Distribution {
            mass: vec![p; len],
        }
    }

    pub fn point(len: usize, at: usize) -> Self {
        let mut mass = vec![Prob::zero(); len];
        mass[at] = Prob::one();
        Distribution { mass }
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[Prob] {
        &self.mass
    }

    pub fn get(&self, i: usize) -> &Prob {
        &self.mass[i]
    }

    pub fn total(&self) -> Prob {
        self.mass.iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        self.total().is_one()
    }

    pub fn max_mass(&self) -> Prob {
        self.mass.iter().max().cloned().unwrap_or_else(Prob::zero)
    }

    pub fn support_size(&self) -> usize {
        self.mass.iter().filter(|p| !p.is_zero()).count()
    }

    pub fn support(&self) -> impl Iterator<Item = (usize, &Prob)> {
        self.mass.iter().enumerate().filter(|(_, p)| !p.is_zero())
    }
}

/// Mass over pairs `(x, e)`: `x` the guessed variable, `e` classical side
/// information. Stored row-major as `x * e_len + e`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointDistribution {
    x_len: usize,
    e_len: usize,
    mass: Vec<Prob>,
}

impl JointDistribution {
    pub fn new(x_len: usize, e_len: usize, mass: Vec<Prob>) -> Result<Self> {
        if mass.len() != x_len * e_len {
            return param(format!(
                "joint table has {} entries, expected {}x{}",
                mass.len(),
                x_len,
                e_len
            ));
        }
        Distribution::new(mass.clone())?;
        Ok(JointDistribution { x_len, e_len, mass })
    }

    pub fn from_fn(x_len: usize, e_len: usize, f: impl Fn(usize, usize) -> Prob) -> Result<Self> {
        let mut mass = Vec::with_capacity(x_len * e_len);
        for x in 0..x_len {
            for e in 0..e_len {
                mass.push(f(x, e));
            }
        }
        Self::new(x_len, e_len, mass)
    }

    /// `P_X × P_E`.
    pub fn product(px: &Distribution, pe: &Distribution) -> Self {
        let mut mass = Vec::with_capacity(px.len() * pe.len());
        for a in px.mass() {
            for b in pe.mass() {
                mass.push(a * b);
            }
        }
        JointDistribution {
            x_len: px.len(),
            e_len: pe.len(),
            mass,
        }
    }

    /// Side information that is a copy of `X`.
    pub fn copy(px: &Distribution) -> Self {
        let n = px.len();
        let mut mass = vec![Prob::zero(); n * n];
        for (x, p) in px.mass().iter().enumerate() {
            mass[x * n + x] = p.clone();
        }
        JointDistribution {
            x_len: n,
            e_len: n,
            mass,
        }
    }

    /// Trivial (single-symbol) side information.
    pub fn without_side_info(px: &Distribution) -> Self {
        JointDistribution {
            x_len: px.len(),
            e_len: 1,
            mass: px.mass().to_vec(),
        }
    }

    pub fn x_len(&self) -> usize {
        self.x_len
    }

    pub fn e_len(&self) -> usize {
        self.e_len
    }

    pub fn get(&self, x: usize, e: usize) -> &Prob {
        &self.mass[x * self.e_len + e]
    }

    pub fn mass(&self) -> &[Prob] {
        &self.mass
    }

    pub fn marginal_x(&self) -> Distribution {
        Distribution {
            mass: self
                .mass
                .chunks(self.e_len)
                .map(|row| row.iter().sum())
                .collect(),
        }
    }

    pub fn marginal_e(&self) -> Distribution {
        let mut mass = vec![Prob::zero(); self.e_len];
        for row in self.mass.chunks(self.e_len) {
            for (m, p) in mass.iter_mut().zip(row) {
                *m += p;
            }
        }
        Distribution { mass }
    }

    pub fn is_normalized(&self) -> bool {
        self.mass.iter().sum::<Prob>().is_one()
    }

    /// `P_guess(X|E) = Σ_e max_x P(x, e)`.
    pub fn guessing_probability(&self) -> Prob {
        (0..self.e_len)
            .map(|e| {
                (0..self.x_len)
                    .map(|x| self.get(x, e))
                    .max()
                    .cloned()
                    .unwrap_or_else(Prob::zero)
            })
            .sum()
    }

    /// Optimal guessing map `e -> x` (ties to the smallest `x`).
    pub fn optimal_guess(&self) -> Vec<usize> {
        (0..self.e_len)
            .map(|e| {
                let mut best = 0;
                for x in 1..self.x_len {
                    if self.get(x, e) > self.get(best, e) {
                        best = x;
                    }
                }
                best
            })
            .collect()
    }
}

fn require_normalized(total: Prob, what: &str) -> Result<()> {
    if total.is_zero() {
        return Err(Error::Parameter(format!("{what}: empty support")));
    }
    if !total.is_one() {
        return param(format!("{what}: distribution is not normalized (total {total})"));
    }
    Ok(())
}

/// `Hmin(X) = -log2 max_x P(x)`.
pub fn hmin(p: &Distribution) -> Result<f64> {
    require_normalized(p.total(), "hmin")?;
    Ok(-log2_ratio(&p.max_mass()))
}

/// `Hmin(X|E) = -log2 P_guess(X|E)`.
pub fn hmin_cond(j: &JointDistribution) -> Result<f64> {
    require_normalized(j.mass.iter().sum(), "hmin_cond")?;
    Ok(-log2_ratio(&j.guessing_probability()))
}

/// `H0 = log2 |support|`.
pub fn h0(p: &Distribution) -> f64 {
    (p.support_size() as f64).log2()
}

/// Smallest clip level `p*` with `Σ_x max(P(x) - p*, 0) <= eps`.
pub fn smoothing_clip_level(p: &Distribution, eps: &Prob) -> Result<Prob> {
    require_normalized(p.total(), "hmin_smooth")?;
    if eps.is_negative() || *eps >= Prob::one() {
        return param(format!("smoothing parameter {eps} outside [0, 1)"));
    }
    let mut sorted: Vec<Prob> = p.mass().iter().filter(|m| !m.is_zero()).cloned().collect();
    sorted.sort_by(|a, b| b.cmp(a));
    // With the top j masses clipped, excess(q) = S_j - j*q on [p_{j+1}, p_j].
    let mut prefix = Prob::zero();
    for j in 1..=sorted.len() {
        prefix += &sorted[j - 1];
        let q = (&prefix - eps) / Prob::from_integer(BigInt::from(j));
        let next = sorted.get(j).cloned().unwrap_or_else(Prob::zero);
        if q >= next {
            return Ok(q);
        }
    }
    unreachable!("eps < 1 leaves a positive clip level")
}

/// Classical smooth min-entropy over sub-normalized distributions within
/// one-norm `eps` of `p`, obtained by clipping the largest masses.
pub fn hmin_smooth_classical(p: &Distribution, eps: &Prob) -> Result<f64> {
    let q = smoothing_clip_level(p, eps)?;
    Ok(-log2_ratio(&q))
}

/// `½ Σ |P - Q|`.
pub fn variational_distance(p: &Distribution, q: &Distribution) -> Result<Prob> {
    if p.len() != q.len() {
        return param(format!("alphabet sizes differ: {} vs {}", p.len(), q.len()));
    }
    Ok(half_l1(p.mass(), q.mass()))
}

pub(crate) fn half_l1(a: &[Prob], b: &[Prob]) -> Prob {
    let s: Prob = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    s / Prob::from_integer(BigInt::from(2))
}

/// The flat source on `subset ⊆ {0,1}^n` (elements given as integers).
pub fn flat_source(n: u32, subset: &[usize]) -> Result<Distribution> {
    if subset.is_empty() {
        return param("flat source over an empty subset");
    }
    let size = 1usize << n;
    let mut mass = vec![Prob::zero(); size];
    let p = ratio(1, subset.len() as i64);
    for &x in subset {
        if x >= size {
            return param(format!("element {x} outside {{0,1}}^{n}"));
        }
        if !mass[x].is_zero() {
            return param(format!("element {x} repeated"));
        }
        mass[x] = p.clone();
    }
    Ok(Distribution { mass })
}

/// A distribution over triples `(a, b, c)` for the chain-rule checks.
#[derive(Clone, Debug)]
pub struct TripleDistribution {
    dims: [usize; 3],
    mass: Vec<Prob>,
}

/// Axes of a [`TripleDistribution`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    A = 0,
    B = 1,
    C = 2,
}

impl TripleDistribution {
    pub fn new(dims: [usize; 3], mass: Vec<Prob>) -> Result<Self> {
        if mass.len() != dims.iter().product::<usize>() {
            return param("triple table size mismatch");
        }
        let d = Distribution::new(mass)?;
        if !d.is_normalized() {
            return param("triple distribution is not normalized");
        }
        Ok(TripleDistribution { dims, mass: d.mass })
    }

    pub fn from_weights(dims: [usize; 3], weights: &[u64]) -> Result<Self> {
        if weights.len() != dims.iter().product::<usize>() {
            return param("triple table size mismatch");
        }
        Ok(TripleDistribution {
            dims,
            mass: Distribution::from_weights(weights)?.mass,
        })
    }

    fn index(&self, coords: [usize; 3]) -> usize {
        (coords[0] * self.dims[1] + coords[1]) * self.dims[2] + coords[2]
    }

    fn group_index(&self, coords: &[usize; 3], axes: &[Axis]) -> usize {
        axes.iter()
            .fold(0, |acc, &ax| acc * self.dims[ax as usize] + coords[ax as usize])
    }

    fn group_len(&self, axes: &[Axis]) -> usize {
        axes.iter().map(|&ax| self.dims[ax as usize]).product()
    }

    /// The joint of (`guess` axes, `given` axes), marginalizing the rest.
    pub fn joint(&self, guess: &[Axis], given: &[Axis]) -> JointDistribution {
        let xl = self.group_len(guess);
        let el = self.group_len(given);
        let mut mass = vec![Prob::zero(); xl * el];
        for a in 0..self.dims[0] {
            for b in 0..self.dims[1] {
                for c in 0..self.dims[2] {
                    let coords = [a, b, c];
                    let p = &self.mass[self.index(coords)];
                    if p.is_zero() {
                        continue;
                    }
                    let x = self.group_index(&coords, guess);
                    let e = self.group_index(&coords, given);
                    mass[x * el + e] += p;
                }
            }
        }
        JointDistribution {
            x_len: xl,
            e_len: el,
            mass,
        }
    }

    pub fn marginal(&self, axes: &[Axis]) -> Distribution {
        self.joint(axes, &[]).marginal_x()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Prob {
        ratio(n, d)
    }

    #[test]
    fn hmin_examples() {
        assert!((hmin(&Distribution::uniform(256)).unwrap() - 8.0).abs() < 1e-12);
        assert_eq!(hmin(&Distribution::point(4, 2)).unwrap(), 0.0);
        // One symbol at 1/8, the rest spread over the other 255 strings of
        // {0,1}^8: Hmin = log 8 = 3.
        let mut mass = vec![r(7, 8 * 255); 256];
        mass[0] = r(1, 8);
        let p = Distribution::new(mass).unwrap();
        assert!(p.is_normalized());
        assert!((hmin(&p).unwrap() - 3.0).abs() < 1e-12);
        assert!(hmin(&Distribution::new(vec![Prob::zero(); 3]).unwrap()).is_err());
    }

    #[test]
    fn hmin_cond_examples() {
        let px = Distribution::from_weights(&[1, 2, 5]).unwrap();
        let pe = Distribution::uniform(3);
        let indep = JointDistribution::product(&px, &pe);
        assert!((hmin_cond(&indep).unwrap() - hmin(&px).unwrap()).abs() < 1e-12);
        assert_eq!(hmin_cond(&JointDistribution::copy(&px)).unwrap(), 0.0);

        // Columns (1/4, 1/4) and (3/8, 1/8): P_guess = 1/4 + 3/8.
        let j = JointDistribution::new(2, 2, vec![r(1, 4), r(3, 8), r(1, 4), r(1, 8)]).unwrap();
        assert_eq!(j.guessing_probability(), r(5, 8));
        assert!((hmin_cond(&j).unwrap() + (5f64 / 8.0).log2()).abs() < 1e-12);
    }

    #[test]
    fn smooth_examples() {
        let p = Distribution::from_weights(&[3, 1]).unwrap();
        assert_eq!(smoothing_clip_level(&p, &r(1, 4)).unwrap(), r(1, 2));
        assert!((hmin_smooth_classical(&p, &r(1, 4)).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            hmin_smooth_classical(&p, &Prob::zero()).unwrap(),
            hmin(&p).unwrap()
        );
        assert!(hmin_smooth_classical(&p, &Prob::one()).is_err());

        // The spike of mass 1/n on one of 2^n strings, n = 8, smoothed with
        // eps = 1/n: the smoothed entropy is at least n - o(1).
        let mut mass = vec![r(7, 8 * 255); 256];
        mass[0] = r(1, 8);
        let p = Distribution::new(mass).unwrap();
        let h = hmin_smooth_classical(&p, &r(1, 8)).unwrap();
        assert!(h >= 7.9, "{h}");
    }

    #[test]
    fn smooth_is_monotone_in_eps() {
        let p = Distribution::from_weights(&[9, 5, 5, 3, 1, 1, 0, 8]).unwrap();
        let mut last = hmin(&p).unwrap();
        for k in 0..32 {
            let h = hmin_smooth_classical(&p, &r(k, 32)).unwrap();
            assert!(h >= last - 1e-12);
            last = h;
        }
    }

    #[test]
    fn distance_examples() {
        let a = Distribution::from_weights(&[1, 1]).unwrap();
        let b = Distribution::from_weights(&[3, 1]).unwrap();
        assert_eq!(variational_distance(&a, &a).unwrap(), Prob::zero());
        assert_eq!(variational_distance(&a, &b).unwrap(), r(1, 4));
        let c = Distribution::point(2, 0);
        let d = Distribution::point(2, 1);
        assert_eq!(variational_distance(&c, &d).unwrap(), Prob::one());
        assert!(variational_distance(&a, &Distribution::uniform(3)).is_err());
    }

    #[test]
    fn flat_sources() {
        let all: Vec<usize> = (0..16).collect();
        assert!((hmin(&flat_source(4, &all).unwrap()).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(hmin(&flat_source(4, &[5]).unwrap()).unwrap(), 0.0);
        let eight: Vec<usize> = (0..8).map(|i| i * 2).collect();
        assert_eq!(hmin(&flat_source(4, &eight).unwrap()).unwrap(), 3.0);
        assert!(flat_source(4, &[]).is_err());
        assert!(flat_source(2, &[4]).is_err());
    }

    // The optimal-guess strategy achieves exactly 2^-Hmin(X|E), and no
    // deterministic strategy does better (exhaustive over all maps e -> x).
    #[test]
    fn guessing_duality_exhaustive() {
        let j = JointDistribution::new(
            3,
            3,
            vec![r(1, 9), r(1, 18), r(1, 6), r(1, 9), r(1, 9), r(0, 1), r(1, 18), r(2, 9), r(1, 6)],
        )
        .unwrap();
        assert!(j.is_normalized());
        let mut best = Prob::zero();
        for code in 0..27usize {
            let g = [code % 3, (code / 3) % 3, code / 9];
            let success: Prob = (0..3).map(|e| j.get(g[e], e).clone()).sum();
            best = best.max(success);
        }
        assert_eq!(best, j.guessing_probability());
        let g = j.optimal_guess();
        let achieved: Prob = (0..3).map(|e| j.get(g[e], e).clone()).sum();
        assert_eq!(achieved, best);
    }

    #[test]
    fn triple_grouping() {
        let t = TripleDistribution::from_weights([2, 2, 2], &[1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        let ab = t.joint(&[Axis::A], &[Axis::B]);
        assert_eq!(*ab.get(1, 0), r(11, 36));
        assert_eq!(t.marginal(&[Axis::C]).mass(), &[r(16, 36), r(20, 36)]);
    }

    #[test]
    fn log2_of_large_ratios() {
        let big = BigRational::new(BigInt::one(), BigInt::from(2).pow(300));
        assert!((log2_ratio(&big) + 300.0).abs() < 1e-9);
        assert!((log2_ratio(&r(3, 1)) - 3f64.log2()).abs() < 1e-12);
    }
}
