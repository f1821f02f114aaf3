use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::OutputTable;
use crate::bitfield::BitString;
use crate::entropy::{Distribution, JointDistribution, Prob};
use crate::error::{param, Error, Result};
use crate::trevisan::TrevisanInstance;

/// Distances between consecutive hybrids
/// `σ_i(z, e) = P(Z_[i] = z_[i], E = e) · 2^-(m-i)`.
#[derive(Clone, Debug)]
pub struct HybridReport {
    /// `gaps[i] = ½‖σ_{i+1} - σ_i‖`.
    pub gaps: Vec<Prob>,
    /// `½‖σ_m - σ_0‖`.
    pub total: Prob,
    /// First index of the largest gap.
    pub argmax: usize,
}

impl HybridReport {
    pub fn max_gap(&self) -> &Prob {
        &self.gaps[self.argmax]
    }
}

fn two() -> Prob {
    BigRational::from_integer(2.into())
}

/// Hybrid distances of a joint over `Z ∈ {0,1}^m` (row index, first bit
/// most significant) and a side symbol.
pub fn hybrid_gaps(j: &JointDistribution) -> Result<HybridReport> {
    let len = j.x_len();
    if !len.is_power_of_two() || len < 2 {
        return param("hybrid joint needs 2^m rows with m >= 1");
    }
    let m = len.trailing_zeros() as usize;
    if m > 12 || len.saturating_mul(j.e_len()) > 1 << 22 {
        return Err(Error::SizeGuard(format!(
            "hybrid enumeration over m = {m}, {} side symbols",
            j.e_len()
        )));
    }
    let mut gaps = vec![Prob::zero(); m];
    let mut total = Prob::zero();
    for e in 0..j.e_len() {
        // levels[i][p] = P(Z_[i] = p, E = e).
        let mut levels: Vec<Vec<Prob>> = vec![(0..len).map(|z| j.get(z, e).clone()).collect()];
        for _ in 0..m {
            let prev = levels.last().expect("nonempty");
            let next = prev.chunks(2).map(|c| &c[0] + &c[1]).collect();
            levels.push(next);
        }
        levels.reverse();
        if levels[0][0].is_zero() {
            continue;
        }
        for i in 1..=m {
            for (p, v) in levels[i].iter().enumerate() {
                gaps[i - 1] += (v - &levels[i - 1][p >> 1] / two()).abs();
            }
        }
        let flat = &levels[0][0] / BigRational::from_integer(BigInt::from(len));
        for v in &levels[m] {
            total += (v - &flat).abs();
        }
    }
    for g in gaps.iter_mut() {
        *g /= two();
    }
    total /= two();
    let mut argmax = 0;
    for (i, g) in gaps.iter().enumerate() {
        if *g > gaps[argmax] {
            argmax = i;
        }
    }
    let sum: Prob = gaps.iter().sum();
    if sum < total {
        return Err(Error::Internal {
            index: argmax,
            reason: format!("hybrid gaps sum to {sum} < total {total}"),
        });
    }
    if gaps[argmax].clone() * BigRational::from_integer(BigInt::from(m)) < total {
        return Err(Error::Internal {
            index: argmax,
            reason: format!("largest hybrid gap {} below total/m", gaps[argmax]),
        });
    }
    Ok(HybridReport {
        gaps,
        total,
        argmax,
    })
}

/// A distinguisher for one output bit given the previous bits' advice.
#[derive(Clone, Debug)]
pub struct Witness {
    /// Output position `i`.
    pub index: usize,
    /// Seed bits outside the `t` positions bit `i` reads, in position order.
    pub fixed: BitString,
    /// `½‖(C(X,V), V, G, E) - (U_1, V, G, E)‖` given `W = fixed`.
    pub advantage: Prob,
    /// Distance of `(Ext(X,Y), Y, E)` from `(U_m, Y, E)`.
    pub total: Prob,
    pub hybrid: HybridReport,
    /// Length of the advice `G`: `Σ_{j<i} 2^{|S_j ∩ S_i|}` truth-table bits.
    pub advice_bits: usize,
    /// `H_0(G)`.
    pub advice_support_log2: f64,
    /// `r·m` from the design certificate.
    pub advice_bound: BigRational,
}

/// Fixes the seed outside the positions of the worst hybrid bit and hands
/// the distinguisher the earlier bits as truth tables over the overlaps.
pub fn reduction_witness(
    inst: &TrevisanInstance,
    source: &JointDistribution,
    seed: &Distribution,
) -> Result<Witness> {
    let (n, d, m, t) = (inst.n(), inst.d(), inst.m(), inst.t());
    if n > 8 || m > 3 || t > 4 || d > 16 {
        return Err(Error::SizeGuard(format!(
            "reduction witness needs n <= 8, m <= 3, t <= 4, d <= 16 (n={n}, m={m}, t={t}, d={d})"
        )));
    }
    if source.x_len() != 1 << n || seed.len() != 1 << d {
        return param("source or seed alphabet does not match the instance");
    }
    let table = OutputTable::from_trevisan(inst)?;
    let e_len = source.e_len();

    let mut mass = vec![Prob::zero(); (1 << m) * (1 << d) * e_len];
    let side_len = (1 << d) * e_len;
    for (y, py) in seed.support() {
        for x in 0..1usize << n {
            for e in 0..e_len {
                let p = source.get(x, e);
                if !p.is_zero() {
                    let z = table.get(y, x) as usize;
                    mass[z * side_len + y * e_len + e] += p * py;
                }
            }
        }
    }
    let hybrid = hybrid_gaps(&JointDistribution::new(1 << m, side_len, mass)?)?;
    let i = hybrid.argmax;

    let v_pos: Vec<usize> = inst.design().set(i)[..t].iter().map(|&p| p as usize).collect();
    let w_pos: Vec<usize> = (0..d).filter(|p| !v_pos.contains(p)).collect();
    let overlaps: Vec<Vec<usize>> = (0..i)
        .map(|j| {
            let sj = &inst.design().set(j)[..t];
            (0..t).filter(|&k| sj.contains(&(v_pos[k] as u32))).collect()
        })
        .collect();
    let advice_bits: usize = overlaps.iter().map(|o| 1usize << o.len()).sum();
    let bit = |z: u32, j: usize| (z >> (m - 1 - j)) & 1 == 1;
    let seed_of = |v: usize, w: usize| -> usize {
        let mut y = 0usize;
        for (k, &p) in v_pos.iter().enumerate() {
            if (v >> (t - 1 - k)) & 1 == 1 {
                y |= 1 << (d - 1 - p);
            }
        }
        for (k, &p) in w_pos.iter().enumerate() {
            if (w >> (w_pos.len() - 1 - k)) & 1 == 1 {
                y |= 1 << (d - 1 - p);
            }
        }
        y
    };

    let mut best: Option<(Prob, usize, f64)> = None;
    for w in 0..1usize << w_pos.len() {
        let pw: Prob = (0..1usize << t).map(|v| seed.get(seed_of(v, w)).clone()).sum();
        if pw.is_zero() {
            continue;
        }
        let mut advice_ids: HashMap<Vec<bool>, usize> = HashMap::new();
        let mut g_of = Vec::with_capacity(1 << n);
        for x in 0..1usize << n {
            let mut g = Vec::with_capacity(advice_bits);
            for (j, ov) in overlaps.iter().enumerate() {
                for a in 0..1usize << ov.len() {
                    let mut v = 0usize;
                    for (b, &k) in ov.iter().enumerate() {
                        if (a >> (ov.len() - 1 - b)) & 1 == 1 {
                            v |= 1 << (t - 1 - k);
                        }
                    }
                    g.push(bit(table.get(seed_of(v, w), x), j));
                }
            }
            let next = advice_ids.len();
            g_of.push(*advice_ids.entry(g).or_insert(next));
        }
        let mut cells: HashMap<(usize, usize, usize), [Prob; 2]> = HashMap::new();
        let mut used_g = vec![false; advice_ids.len()];
        for v in 0..1usize << t {
            let y = seed_of(v, w);
            let pv = seed.get(y) / &pw;
            if pv.is_zero() {
                continue;
            }
            for x in 0..1usize << n {
                for e in 0..e_len {
                    let p = source.get(x, e);
                    if p.is_zero() {
                        continue;
                    }
                    used_g[g_of[x]] = true;
                    let b = bit(table.get(y, x), i) as usize;
                    let cell = cells
                        .entry((v, g_of[x], e))
                        .or_insert_with(|| [Prob::zero(), Prob::zero()]);
                    cell[b] += p * &pv;
                }
            }
        }
        let adv: Prob = cells.values().map(|[a, b]| (a - b).abs()).sum::<Prob>() / two();
        let support = used_g.iter().filter(|&&u| u).count();
        let h0 = (support.max(1) as f64).log2();
        if best.as_ref().is_none_or(|(b, _, _)| adv > *b) {
            best = Some((adv, w, h0));
        }
    }
    let (advantage, w, h0) = best.ok_or_else(|| Error::Parameter("seed distribution is empty".into()))?;
    let fixed = BitString::from_u64(w as u64, w_pos.len());
    let advice_bound = inst.design().r_certified() * BigRational::from_integer(BigInt::from(m));

    if advantage < hybrid.gaps[i] {
        return Err(Error::Internal {
            index: i,
            reason: format!("witness advantage {advantage} below hybrid gap {}", hybrid.gaps[i]),
        });
    }
    if BigRational::from_integer(BigInt::from(advice_bits)) > advice_bound {
        return Err(Error::Internal {
            index: i,
            reason: format!("advice of {advice_bits} bits exceeds r*m = {advice_bound}"),
        });
    }
    Ok(Witness {
        index: i,
        fixed,
        advantage,
        total: hybrid.total.clone(),
        hybrid,
        advice_bits,
        advice_support_log2: h0,
        advice_bound,
    })
}

#[derive(Clone, Debug)]
pub struct MajorityReport {
    /// `α_y = argmax_b P(X_y = b)`, ties to 0.
    pub alpha: BitString,
    /// `½‖X_Y∘Y - U_1∘Y‖` for uniform `Y`.
    pub advantage: Prob,
    /// `Pr[d(X, α) <= ½ - δ/2]`, `d` the relative Hamming distance.
    pub success: Prob,
    /// `0 < δ <= advantage`.
    pub premise: bool,
}

/// Majority decoding of a distribution over `{0,1}^n̄` (index = string,
/// first position most significant). When `0 < δ <= advantage`, checks
/// `success > δ`.
pub fn majority_predictor(p: &Distribution, n_bar: usize, delta: &Prob) -> Result<MajorityReport> {
    if n_bar == 0 || n_bar > 16 {
        return Err(Error::SizeGuard(format!("majority predictor over n = {n_bar} positions")));
    }
    if p.len() != 1 << n_bar {
        return param("distribution length must be 2^n");
    }
    if !p.is_normalized() {
        return param("distribution must be normalized");
    }
    let mut ones = vec![Prob::zero(); n_bar];
    for (x, px) in p.support() {
        for (y, o) in ones.iter_mut().enumerate() {
            if (x >> (n_bar - 1 - y)) & 1 == 1 {
                *o += px;
            }
        }
    }
    let half = Prob::one() / two();
    let alpha = BitString::from_bits(&ones.iter().map(|o| *o > half).collect::<Vec<_>>());
    let nb = BigRational::from_integer(BigInt::from(n_bar));
    let advantage = ones.iter().map(|o| (o - &half).abs()).sum::<Prob>() / &nb;
    let a = alpha.to_u64() as usize;
    // d(x, α) <= ½ - δ/2  ⇔  2·dist <= n̄(1 - δ).
    let limit = &nb * (Prob::one() - delta);
    let success: Prob = p
        .support()
        .filter(|(x, _)| BigRational::from_integer(BigInt::from(2 * (x ^ a).count_ones())) <= limit)
        .map(|(_, px)| px.clone())
        .sum();
    let premise = delta.is_positive() && *delta <= advantage;
    if premise && success <= *delta {
        return Err(Error::Internal {
            index: 0,
            reason: format!("majority success {success} not above delta {delta}"),
        });
    }
    Ok(MajorityReport {
        alpha,
        advantage,
        success,
        premise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code_extractor::CodeSpec;
    use crate::entropy::ratio;
    use crate::weak_design::WeakDesign;

    #[test]
    fn hybrid_examples() {
        let r = hybrid_gaps(&JointDistribution::product(
            &Distribution::uniform(4),
            &Distribution::from_weights(&[1, 3]).unwrap(),
        ))
        .unwrap();
        assert!(r.total.is_zero() && r.gaps.iter().all(|g| g.is_zero()));

        let r = hybrid_gaps(&JointDistribution::copy(&Distribution::uniform(4))).unwrap();
        assert_eq!(r.total, ratio(3, 4));
        assert!(*r.max_gap() >= ratio(3, 8));
        assert_eq!(r.gaps, vec![ratio(1, 2), ratio(1, 2)]);

        let j = JointDistribution::from_fn(2, 3, |z, e| ratio((z + 2 * e + 1) as i64, 21)).unwrap();
        let r = hybrid_gaps(&j).unwrap();
        assert_eq!(r.gaps, vec![r.total.clone()]);
    }

    fn micro() -> TrevisanInstance {
        let design = WeakDesign::from_sets(4, 6, &[vec![0, 1, 2, 3], vec![2, 3, 4, 5]]).unwrap();
        TrevisanInstance::new(design, CodeSpec::with_symbol_bits(4, 2).unwrap()).unwrap()
    }

    #[test]
    fn witness_full_leak() {
        let inst = micro();
        let w = reduction_witness(
            &inst,
            &JointDistribution::copy(&Distribution::uniform(16)),
            &Distribution::uniform(64),
        )
        .unwrap();
        assert_eq!(w.total, ratio(3, 4));
        assert!(w.advantage.clone() * ratio(2, 1) >= w.total);
        assert!(w.advantage >= *w.hybrid.max_gap());
        let expect_bits = if w.index == 1 { 4 } else { 0 };
        assert_eq!(w.advice_bits, expect_bits);
        assert_eq!(w.fixed.len(), 2);
    }

    #[test]
    fn witness_uniform_output() {
        let design = WeakDesign::from_sets(4, 4, &[vec![0, 1, 2, 3]]).unwrap();
        let inst = TrevisanInstance::new(design, CodeSpec::with_symbol_bits(4, 2).unwrap()).unwrap();
        let table = OutputTable::from_trevisan(&inst).unwrap();
        let balanced: Vec<u64> = (0..16)
            .map(|y| (0..16).filter(|&x| table.get(y, x) == 1).count() as u64)
            .map(|ones| (ones == 8) as u64)
            .collect();
        assert!(balanced.iter().any(|&b| b == 1));
        let seed = Distribution::from_weights(&balanced).unwrap();
        let w = reduction_witness(
            &inst,
            &JointDistribution::without_side_info(&Distribution::uniform(16)),
            &seed,
        )
        .unwrap();
        assert!(w.total.is_zero());
        assert!(w.advantage.is_zero());
        assert_eq!(w.advice_bits, 0);
    }

    #[test]
    fn majority_examples() {
        let r = majority_predictor(&Distribution::point(16, 0b1011), 4, &ratio(1, 2)).unwrap();
        assert_eq!(r.alpha.to_u64(), 0b1011);
        assert_eq!(r.success, ratio(1, 1));
        assert_eq!(r.advantage, ratio(1, 2));

        let r = majority_predictor(&Distribution::uniform(16), 4, &ratio(1, 10)).unwrap();
        assert!(r.advantage.is_zero() && !r.premise);
        assert!(r.alpha.is_zero());

        // Independent bits, each 1 with probability 0.65.
        let w: Vec<u64> = (0..16u32)
            .map(|x| {
                let k = x.count_ones();
                13u64.pow(k) * 7u64.pow(4 - k)
            })
            .collect();
        let p = Distribution::from_weights(&w).unwrap();
        let r = majority_predictor(&p, 4, &ratio(15, 100)).unwrap();
        assert_eq!(r.advantage, ratio(15, 100));
        assert!(r.premise);
        assert!(r.success > ratio(15, 100));
        assert_eq!(r.alpha.to_u64(), 0b1111);
    }
}
