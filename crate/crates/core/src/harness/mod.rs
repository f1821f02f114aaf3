//! Exact, micro-scale evaluation of extractors and of the inequalities
//! their analysis rests on. Side information is always classical.

mod checks;
mod hybrid;
mod vectors;

pub use checks::{
    chain_rules, composition_errors, smoothing_robustness_check, weak_seed_split_check, CompositionReport,
    SmoothingReport, WeakSeedCheck, ChainRuleReport,
};
pub use hybrid::{
    hybrid_gaps, majority_predictor, reduction_witness, HybridReport, MajorityReport, Witness,
};
pub use vectors::{read_test_vectors, write_test_vectors, TestVector, TEST_VECTOR_VERSION};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bitfield::BitString;
use crate::code_extractor::CodeSpec;
use crate::entropy::{Distribution, JointDistribution, Prob};
use crate::error::{param, Error, Result};
use crate::trevisan::TrevisanInstance;
use crate::universal_hash::SeededExtractor;
use crate::weak_design::binomial;

/// Largest `n + d` an [`OutputTable`] is built for.
pub const TABLE_LIMIT: usize = 26;

/// Families with at most this many flat sources are enumerated.
pub const EXHAUSTIVE_LIMIT: u64 = 1_000_000;

/// `Ext(x, y)` for every `x` and `y`, as integers (MSB = first output bit).
#[derive(Clone, Debug)]
pub struct OutputTable {
    n: usize,
    d: usize,
    m: usize,
    out: Vec<u32>,
}

fn guard(n: usize, d: usize, m: usize) -> Result<()> {
    if n + d > TABLE_LIMIT || m > 16 {
        return Err(Error::SizeGuard(format!(
            "exact tables need n + d <= {TABLE_LIMIT} and m <= 16 (n={n}, d={d}, m={m})"
        )));
    }
    Ok(())
}

impl OutputTable {
    pub fn build(ext: &dyn SeededExtractor) -> Result<Self> {
        let (n, d, m) = (ext.n(), ext.d(), ext.m());
        guard(n, d, m)?;
        let rows: Result<Vec<Vec<u32>>> = (0..1u64 << d)
            .into_par_iter()
            .map(|y| {
                let y = BitString::from_u64(y, d);
                (0..1u64 << n)
                    .map(|x| Ok(ext.extract(&BitString::from_u64(x, n), &y)?.to_u64() as u32))
                    .collect()
            })
            .collect();
        Ok(OutputTable {
            n,
            d,
            m,
            out: rows?.concat(),
        })
    }

    pub fn from_trevisan(inst: &TrevisanInstance) -> Result<Self> {
        let (n, d, m) = (inst.n(), inst.d(), inst.m());
        guard(n, d, m)?;
        let srcs: Vec<_> = (0..1u64 << n)
            .map(|x| inst.code().prepare(&BitString::from_u64(x, n)))
            .collect::<Result<_>>()?;
        let rows: Result<Vec<Vec<u32>>> = (0..1u64 << d)
            .into_par_iter()
            .map(|y| {
                let seed = inst.prepare_seed(&BitString::from_u64(y, d))?;
                Ok(srcs
                    .iter()
                    .map(|s| inst.eval_prepared(s, &seed).to_u64() as u32)
                    .collect())
            })
            .collect();
        Ok(OutputTable {
            n,
            d,
            m,
            out: rows?.concat(),
        })
    }

    pub fn from_code(spec: &CodeSpec) -> Result<Self> {
        let (n, d) = (spec.n(), spec.t());
        guard(n, d, 1)?;
        let srcs: Vec<_> = (0..1u64 << n)
            .map(|x| spec.prepare(&BitString::from_u64(x, n)))
            .collect::<Result<_>>()?;
        let rows: Vec<Vec<u32>> = (0..1u64 << d)
            .into_par_iter()
            .map(|y| {
                let y = BitString::from_u64(y, d);
                srcs.iter().map(|s| spec.bit(s, &y) as u32).collect()
            })
            .collect();
        Ok(OutputTable {
            n,
            d,
            m: 1,
            out: rows.concat(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u32 {
        self.out[(y << self.n) | x]
    }

    fn row(&self, y: usize) -> &[u32] {
        &self.out[y << self.n..(y + 1) << self.n]
    }

    /// `Σ_z |c_z 2^m - |S||` for seed `y`, `c_z` the output counts on `S`.
    fn flat_row_sum(&self, y: usize, support: &[usize], counts: &mut [u32]) -> u128 {
        let row = self.row(y);
        let size = support.len() as u128;
        let mut touched = 0u128;
        for &x in support {
            let z = row[x] as usize;
            if counts[z] == 0 {
                touched += 1;
            }
            counts[z] += 1;
        }
        let mut acc = ((1u128 << self.m) - touched) * size;
        for &x in support {
            let z = row[x] as usize;
            if counts[z] != 0 {
                acc += ((counts[z] as u128) << self.m).abs_diff(size);
                counts[z] = 0;
            }
        }
        acc
    }

    /// Per-seed distances `½ Σ_z |P(Ext(X, y) = z) - 2^-m|` for a flat `X`.
    pub fn flat_seed_errors(&self, support: &[usize]) -> Result<Vec<Prob>> {
        self.check_support(support)?;
        let den = BigInt::from(2 * support.len() as u128) << self.m;
        let mut counts = vec![0u32; 1 << self.m];
        Ok((0..1usize << self.d)
            .map(|y| {
                let s = self.flat_row_sum(y, support, &mut counts);
                BigRational::new(BigInt::from(s), den.clone())
            })
            .collect())
    }

    /// Error on a flat source with a uniform seed.
    pub fn flat_error(&self, support: &[usize]) -> Result<Prob> {
        self.check_support(support)?;
        let total: u128 = (0..1usize << self.d)
            .into_par_iter()
            .map_init(
                || vec![0u32; 1 << self.m],
                |counts, y| self.flat_row_sum(y, support, counts),
            )
            .sum();
        let den = (BigInt::from(2 * support.len() as u128) << self.m) << self.d;
        Ok(BigRational::new(BigInt::from(total), den))
    }

    fn check_support(&self, support: &[usize]) -> Result<()> {
        if support.is_empty() || support.iter().any(|&x| x >> self.n != 0) {
            return param("flat source support must be a nonempty subset of {0,1}^n");
        }
        Ok(())
    }

    /// `½‖(Ext(X, Y), Y, E) - (U_m, Y, E)‖` for independent `Y`.
    pub fn error(&self, source: &JointDistribution, seed: &Distribution) -> Result<Prob> {
        if source.x_len() != 1 << self.n || seed.len() != 1 << self.d {
            return param("source or seed alphabet does not match the table");
        }
        let pe = source.marginal_e();
        let outs = 1usize << self.m;
        let unif = BigRational::new(1.into(), BigInt::from(outs));
        let parts: Vec<Prob> = seed
            .support()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(y, py)| {
                let row = self.row(y);
                let mut sum = Prob::zero();
                let mut acc = vec![Prob::zero(); outs];
                for e in 0..source.e_len() {
                    if pe.get(e).is_zero() {
                        continue;
                    }
                    for (x, &z) in row.iter().enumerate() {
                        let p = source.get(x, e);
                        if !p.is_zero() {
                            acc[z as usize] += p;
                        }
                    }
                    let target = pe.get(e) * &unif;
                    for a in acc.iter_mut() {
                        sum += (&*a - &target).abs();
                        a.set_zero();
                    }
                }
                sum * py
            })
            .collect();
        let total: Prob = parts.into_iter().sum();
        Ok(total / BigRational::from_integer(2.into()))
    }

    /// Error on a source without side information, uniform seed.
    pub fn source_error(&self, source: &Distribution) -> Result<Prob> {
        self.error(
            &JointDistribution::without_side_info(source),
            &Distribution::uniform(1 << self.d),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Regime {
    /// Every flat source of the given size.
    Exhaustive,
    /// Random flat sources, then swap-based hill climbing from the worst.
    Sampled { samples: usize, climb_steps: usize },
    /// An explicit list of sources.
    Listed,
}

#[derive(Clone, Debug)]
pub struct FamilyReport {
    pub max_error: Prob,
    /// Support of the worst flat source, when the family is flat.
    pub worst: Vec<usize>,
    pub worst_index: usize,
    pub evaluated: usize,
    pub regime: Regime,
}

/// How [`extractor_error`] ranges over sources.
#[derive(Clone, Debug)]
pub enum SourceFamily {
    /// Flat sources of min-entropy `k`.
    Flat {
        k: u32,
        samples: usize,
        climb_steps: usize,
        rng_seed: u64,
    },
    Listed(Vec<JointDistribution>),
}

/// Worst-case error over a source family.
pub fn extractor_error(
    ext: &dyn SeededExtractor,
    family: &SourceFamily,
    seed: &Distribution,
) -> Result<FamilyReport> {
    let table = OutputTable::build(ext)?;
    match family {
        SourceFamily::Flat {
            k,
            samples,
            climb_steps,
            rng_seed,
        } => {
            let uniform = seed.is_normalized() && seed.support_size() == seed.len()
                && seed.mass().iter().all(|p| p == seed.get(0));
            if uniform {
                worst_flat_source(&table, *k, *samples, *climb_steps, *rng_seed)
            } else {
                let eval = |s: &[usize]| -> Result<Prob> {
                    let errs = table.flat_seed_errors(s)?;
                    Ok(errs.iter().zip(seed.mass()).map(|(e, p)| e * p).sum())
                };
                worst_flat_by(&table, *k, *samples, *climb_steps, *rng_seed, &eval)
            }
        }
        SourceFamily::Listed(sources) => {
            let mut best: Option<(usize, Prob)> = None;
            for (i, s) in sources.iter().enumerate() {
                let e = table.error(s, seed)?;
                if best.as_ref().is_none_or(|(_, b)| e > *b) {
                    best = Some((i, e));
                }
            }
            let (worst_index, max_error) =
                best.ok_or_else(|| Error::Parameter("empty source list".into()))?;
            Ok(FamilyReport {
                max_error,
                worst: Vec::new(),
                worst_index,
                evaluated: sources.len(),
                regime: Regime::Listed,
            })
        }
    }
}

/// Worst flat source of size `2^k` under a uniform seed.
pub fn worst_flat_source(
    table: &OutputTable,
    k: u32,
    samples: usize,
    climb_steps: usize,
    rng_seed: u64,
) -> Result<FamilyReport> {
    worst_flat_by(table, k, samples, climb_steps, rng_seed, &|s| table.flat_error(s))
}

fn worst_flat_by(
    table: &OutputTable,
    k: u32,
    samples: usize,
    climb_steps: usize,
    rng_seed: u64,
    eval: &(dyn Fn(&[usize]) -> Result<Prob> + Sync),
) -> Result<FamilyReport> {
    let n = table.n;
    if k as usize > n {
        return param(format!("k = {k} exceeds n = {n}"));
    }
    let universe = 1usize << n;
    let size = 1usize << k;
    let count = binomial(universe as u64, size as u64);
    if count <= BigUint::from(EXHAUSTIVE_LIMIT) {
        let count = count.to_usize().expect("bounded");
        let mut best = (Prob::zero(), Vec::new(), 0usize);
        let mut comb: Vec<usize> = (0..size).collect();
        let mut idx = 0;
        loop {
            let e = eval(&comb)?;
            if idx == 0 || e > best.0 {
                best = (e, comb.clone(), idx);
            }
            idx += 1;
            if !next_combination(&mut comb, universe) {
                break;
            }
        }
        debug_assert_eq!(idx, count);
        return Ok(FamilyReport {
            max_error: best.0,
            worst: best.1,
            worst_index: best.2,
            evaluated: idx,
            regime: Regime::Exhaustive,
        });
    }
    if samples == 0 {
        return param("family too large to enumerate and no samples requested");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut all: Vec<usize> = (0..universe).collect();
    let mut best = (Prob::zero(), Vec::new(), 0usize);
    for i in 0..samples {
        all.shuffle(&mut rng);
        let mut s = all[..size].to_vec();
        s.sort_unstable();
        let e = eval(&s)?;
        if i == 0 || e > best.0 {
            best = (e, s, i);
        }
    }
    let (mut err, mut cur, idx) = best;
    let mut in_set = vec![false; universe];
    for &x in &cur {
        in_set[x] = true;
    }
    for _ in 0..climb_steps {
        if size == universe {
            break;
        }
        let out_pos = rng.gen_range(0..size);
        let incoming = loop {
            let c = rng.gen_range(0..universe);
            if !in_set[c] {
                break c;
            }
        };
        let mut cand = cur.clone();
        cand[out_pos] = incoming;
        cand.sort_unstable();
        let e = eval(&cand)?;
        if e > err {
            in_set[cur[out_pos]] = false;
            in_set[incoming] = true;
            err = e;
            cur = cand;
        }
    }
    Ok(FamilyReport {
        max_error: err,
        worst: cur,
        worst_index: idx,
        evaluated: samples + climb_steps,
        regime: Regime::Sampled {
            samples,
            climb_steps,
        },
    })
}

/// Advances `comb` to the next `len`-subset of `0..universe` in
/// lexicographic order.
fn next_combination(comb: &mut [usize], universe: usize) -> bool {
    let k = comb.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if comb[i] < universe - k + i {
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Errors along a chain of flat sources from `{0,1}^n` down to a point,
/// each step keeping the worse half of a random split. Entry `j` is
/// `(k, error)` with `k = n - j`.
pub fn halving_chain(table: &OutputTable, rng_seed: u64) -> Result<Vec<(u32, Prob)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut cur: Vec<usize> = (0..1usize << table.n).collect();
    let mut chain = vec![(table.n as u32, table.flat_error(&cur)?)];
    while cur.len() > 1 {
        cur.shuffle(&mut rng);
        let half = cur.len() / 2;
        let mut a = cur[..half].to_vec();
        let mut b = cur[half..].to_vec();
        a.sort_unstable();
        b.sort_unstable();
        let (ea, eb) = (table.flat_error(&a)?, table.flat_error(&b)?);
        let (next, e) = if ea >= eb { (a, ea) } else { (b, eb) };
        cur = next;
        chain.push((chain.last().expect("nonempty").0 - 1, e));
    }
    Ok(chain)
}

/// `min(1, 3m√ε_C)` with `ε_C = 2δ`, the error bound of a Trevisan instance
/// whose code extractor runs at radius parameter `δ`.
pub fn trevisan_error_bound(inst: &TrevisanInstance) -> f64 {
    let eps_c = 2.0 * inst.code().delta();
    (3.0 * inst.m() as f64 * eps_c.sqrt()).min(1.0)
}

/// `k_C + r m + log 1/ε_C` with `k_C = log 1/δ² + log 1/2δ`.
pub fn trevisan_threshold(inst: &TrevisanInstance) -> f64 {
    let delta = inst.code().delta();
    let eps_c = 2.0 * delta;
    let k_c = -2.0 * delta.log2() - eps_c.log2();
    let r = inst.design().r_certified().to_f64().unwrap_or(f64::INFINITY);
    k_c + r * inst.m() as f64 - eps_c.log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{flat_source, ratio};
    use crate::universal_hash::ToeplitzSpec;
    use crate::weak_design::WeakDesign;

    /// Direct sum over `(z, y)` for a flat source, no tables.
    fn oracle(ext: &dyn SeededExtractor, support: &[usize]) -> Prob {
        let (n, d, m) = (ext.n(), ext.d(), ext.m());
        let mut total = Prob::zero();
        for y in 0..1u64 << d {
            let y = BitString::from_u64(y, d);
            let mut p = vec![Prob::zero(); 1 << m];
            for &x in support {
                let z = ext.extract(&BitString::from_u64(x as u64, n), &y).unwrap();
                p[z.to_u64() as usize] += ratio(1, support.len() as i64);
            }
            for q in p {
                total += (q - ratio(1, 1 << m)).abs();
            }
        }
        total / BigRational::from_integer(BigInt::from(2u64 << d))
    }

    fn micro_instance() -> TrevisanInstance {
        let design = WeakDesign::from_sets(4, 6, &[vec![0, 1, 2, 3], vec![2, 3, 4, 5]]).unwrap();
        TrevisanInstance::new(design, CodeSpec::with_symbol_bits(4, 2).unwrap()).unwrap()
    }

    #[test]
    fn tables_agree_with_direct_sums() {
        let inst = micro_instance();
        let t1 = OutputTable::from_trevisan(&inst).unwrap();
        let t2 = OutputTable::build(&inst).unwrap();
        assert_eq!(t1.out, t2.out);
        let code = CodeSpec::with_symbol_bits(6, 3).unwrap();
        assert_eq!(OutputTable::from_code(&code).unwrap().out, OutputTable::build(&code).unwrap().out);
        for s in [vec![0usize, 3, 5, 9], vec![1, 2], (0..16).collect::<Vec<_>>(), vec![7]] {
            assert_eq!(t1.flat_error(&s).unwrap(), oracle(&inst, &s));
            let d = flat_source(4, &s).unwrap();
            assert_eq!(t1.source_error(&d).unwrap(), oracle(&inst, &s));
        }
    }

    #[test]
    fn identity_on_one_uniform_bit() {
        let id = ToeplitzSpec::new(1, 1).unwrap();
        let t = OutputTable::build(&id).unwrap();
        let x = JointDistribution::without_side_info(&Distribution::uniform(2));
        assert!(t.error(&x, &Distribution::point(2, 1)).unwrap().is_zero());
        assert_eq!(t.flat_error(&[0, 1]).unwrap(), ratio(1, 4));
    }

    #[test]
    fn point_source_error() {
        let code = CodeSpec::with_symbol_bits(4, 2).unwrap();
        let t = OutputTable::from_code(&code).unwrap();
        let e = t.flat_error(&[5]).unwrap();
        assert_eq!(e, oracle(&code, &[5]));
        assert!(e > Prob::zero() && e <= ratio(1, 2));
    }

    #[test]
    fn exhaustive_and_sampled_regimes() {
        let inst = micro_instance();
        let t = OutputTable::from_trevisan(&inst).unwrap();
        let r = worst_flat_source(&t, 2, 0, 0, 1).unwrap();
        assert_eq!(r.regime, Regime::Exhaustive);
        assert_eq!(r.evaluated, 1820);
        let s = worst_flat_source(&t, 2, 200, 200, 1).unwrap();
        assert!(s.max_error <= r.max_error);

        let big = OutputTable::build(&ToeplitzSpec::new(8, 2).unwrap()).unwrap();
        let s = worst_flat_source(&big, 4, 50, 100, 2).unwrap();
        assert!(matches!(s.regime, Regime::Sampled { .. }));
        assert_eq!(s.worst.len(), 16);
        assert_eq!(big.flat_error(&s.worst).unwrap(), s.max_error);
    }

    #[test]
    fn chain_is_monotone() {
        let t = OutputTable::from_trevisan(&micro_instance()).unwrap();
        for seed in 0..5 {
            let chain = halving_chain(&t, seed).unwrap();
            assert_eq!(chain.len(), 5);
            for w in chain.windows(2) {
                assert!(w[1].1 >= w[0].1);
            }
        }
    }

    #[test]
    fn listed_family_and_weighted_seed() {
        let inst = micro_instance();
        let srcs = vec![
            JointDistribution::without_side_info(&flat_source(4, &[0, 1, 2, 3]).unwrap()),
            JointDistribution::copy(&Distribution::uniform(16)),
        ];
        let r = extractor_error(&inst, &SourceFamily::Listed(srcs), &Distribution::uniform(64)).unwrap();
        // Full leak of x: output is a function of (x, y), so the error is the
        // deterministic-output value 1 - 2^-m.
        assert_eq!(r.max_error, ratio(3, 4));
        assert_eq!(r.worst_index, 1);

        let mut w = vec![1u64; 64];
        w[0] = 5;
        let seed = Distribution::from_weights(&w).unwrap();
        let fam = SourceFamily::Flat { k: 1, samples: 0, climb_steps: 0, rng_seed: 0 };
        let r = extractor_error(&inst, &fam, &seed).unwrap();
        let t = OutputTable::from_trevisan(&inst).unwrap();
        let direct = t
            .error(&JointDistribution::without_side_info(&flat_source(4, &r.worst).unwrap()), &seed)
            .unwrap();
        assert_eq!(direct, r.max_error);
    }

    #[test]
    fn size_guard() {
        let inst = TrevisanInstance::new(
            crate::weak_design::block_design(4, 2).unwrap(),
            CodeSpec::with_symbol_bits(4, 2).unwrap(),
        )
        .unwrap();
        assert!(matches!(OutputTable::from_trevisan(&inst), Err(Error::SizeGuard(_))));
    }
}
