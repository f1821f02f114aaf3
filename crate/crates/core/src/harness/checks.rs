use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use super::OutputTable;
use crate::entropy::{
    variational_distance, Axis, Distribution, JointDistribution, Prob, TripleDistribution,
};
use crate::error::{param, Error, Result};

#[derive(Clone, Debug)]
pub struct SmoothingReport {
    pub error: Prob,
    pub error_nearby: Prob,
    /// `½‖P - P̃‖`.
    pub distance: Prob,
    /// `error(P̃) + 2·distance`.
    pub bound: Prob,
}

/// Exact errors on `P` and on a nearby `P̃`; fails unless
/// `error(P) <= error(P̃) + 2·½‖P - P̃‖`.
pub fn smoothing_robustness_check(
    table: &OutputTable,
    p: &JointDistribution,
    p_nearby: &JointDistribution,
    seed: &Distribution,
) -> Result<SmoothingReport> {
    if p.x_len() != p_nearby.x_len() || p.e_len() != p_nearby.e_len() {
        return param("sources live on different alphabets");
    }
    let error = table.error(p, seed)?;
    let error_nearby = table.error(p_nearby, seed)?;
    let distance = variational_distance(
        &Distribution::new(p.mass().to_vec())?,
        &Distribution::new(p_nearby.mass().to_vec())?,
    )?;
    let bound = &error_nearby + &distance * BigRational::from_integer(2.into());
    if error > bound {
        return Err(Error::Internal {
            index: 0,
            reason: format!("error {error} exceeds {bound}"),
        });
    }
    Ok(SmoothingReport {
        error,
        error_nearby,
        distance,
        bound,
    })
}

impl OutputTable {
    /// `½ Σ_z |P(Ext(X, y) = z) - 2^-m|` for every seed `y`.
    pub fn seed_errors(&self, source: &Distribution) -> Result<Vec<Prob>> {
        if source.len() != 1 << self.n {
            return param("source alphabet does not match the table");
        }
        let outs = 1usize << self.m;
        let unif = BigRational::new(1.into(), BigInt::from(outs));
        let half = BigRational::new(1.into(), 2.into());
        Ok((0..1usize << self.d)
            .into_par_iter()
            .map(|y| {
                let mut acc = vec![Prob::zero(); outs];
                for (x, px) in source.support() {
                    acc[self.get(y, x) as usize] += px;
                }
                acc.iter().map(|a| (a - &unif).abs()).sum::<Prob>() * &half
            })
            .collect())
    }
}

/// Largest `Σ_y P(y) e_y` over seed distributions with `max P(y) <= 2^-s`.
fn top_fill(errors: &[Prob], s: u32) -> Prob {
    let mut sorted: Vec<&Prob> = errors.iter().collect();
    sorted.sort_by(|a, b| b.cmp(a));
    let cap = BigRational::new(1.into(), BigInt::one() << s);
    let mut left = Prob::one();
    let mut acc = Prob::zero();
    for e in sorted {
        if !left.is_positive() {
            break;
        }
        let w = if cap < left { cap.clone() } else { left.clone() };
        acc += e * &w;
        left -= w;
    }
    acc
}

#[derive(Clone, Debug)]
pub enum WeakSeedCheck {
    Checked {
        /// `½‖(Ext(X,Y), Y, Z) - (U_m, Y, Z)‖`.
        error: Prob,
        /// `2ε`.
        bound: Prob,
        /// Worst error over seeds of min-entropy `s`, per source, maximized
        /// over `z`.
        weak_seed_error: Prob,
    },
    /// `ε >= 1`: nothing to check.
    Vacuous { error: Prob },
    Skipped(String),
}

/// Seed `Y` and classical `Z` given as a joint (rows `y`, columns `z`);
/// `sources[z]` is the law of `X` given `Z = z`, independent of `Y`.
/// When `H_min(Y|Z) >= s + log 1/ε` and the extractor errs by at most `ε`
/// on every seed of min-entropy `s`, checks that the error is at most `2ε`.
pub fn weak_seed_split_check(
    table: &OutputTable,
    seed_side: &JointDistribution,
    sources: &[Distribution],
    s: u32,
    eps: &Prob,
) -> Result<WeakSeedCheck> {
    if seed_side.x_len() != 1 << table.d || sources.len() != seed_side.e_len() {
        return param("seed joint or per-z sources do not match the table");
    }
    if !seed_side.is_normalized() {
        return param("seed joint must be normalized");
    }
    let per_z: Vec<Vec<Prob>> = sources
        .iter()
        .map(|src| table.seed_errors(src))
        .collect::<Result<_>>()?;
    let mut error = Prob::zero();
    for (z, errs) in per_z.iter().enumerate() {
        for (y, e) in errs.iter().enumerate() {
            let p = seed_side.get(y, z);
            if !p.is_zero() {
                error += p * e;
            }
        }
    }
    if *eps >= Prob::one() {
        return Ok(WeakSeedCheck::Vacuous { error });
    }
    let cap = eps / BigRational::from_integer(BigInt::one() << s);
    let pg = seed_side.guessing_probability();
    if pg > cap {
        return Ok(WeakSeedCheck::Skipped(format!(
            "H_min(Y|Z) = {:.4} is below s + log 1/eps",
            -crate::entropy::log2_ratio(&pg)
        )));
    }
    let pz = seed_side.marginal_e();
    let weak_seed_error = per_z
        .iter()
        .enumerate()
        .filter(|(z, _)| !pz.get(*z).is_zero())
        .map(|(_, errs)| top_fill(errs, s))
        .max()
        .unwrap_or_else(Prob::zero);
    if weak_seed_error > *eps {
        return Ok(WeakSeedCheck::Skipped(format!(
            "extractor error at seed min-entropy {s} is {weak_seed_error}, above eps"
        )));
    }
    let bound = eps * BigRational::from_integer(2.into());
    if error > bound {
        return Err(Error::Internal {
            index: 0,
            reason: format!("weak-seed error {error} exceeds 2 eps = {bound}"),
        });
    }
    Ok(WeakSeedCheck::Checked {
        error,
        bound,
        weak_seed_error,
    })
}

#[derive(Clone, Debug)]
pub struct CompositionReport {
    /// Distance of `(Z1, Z2, Y1, Y2)` from uniform output.
    pub total: Prob,
    /// Distance of `(Z1, Y1)` from `(U, Y1)`.
    pub first: Prob,
    /// Distance of `(Z2, Y2, Z1, Y1)` from `(U, Y2, Z1, Y1)`.
    pub second: Prob,
}

/// Exact errors of two stages on independent uniform seeds for a flat
/// source; fails unless `total <= first + second`.
pub fn composition_errors(
    first: &OutputTable,
    second: &OutputTable,
    support: &[usize],
) -> Result<CompositionReport> {
    if first.n != second.n {
        return param("stages read different source lengths");
    }
    if first.d + second.d > 20 || first.m + second.m > 16 {
        return Err(Error::SizeGuard("composed seed or output too long".into()));
    }
    first.check_support(support)?;
    let (m1, m2) = (first.m, second.m);
    let size = support.len() as u128;
    let (tot, sec): (u128, u128) = (0..1usize << first.d)
        .into_par_iter()
        .map(|y1| {
            let mut joint = vec![0u32; 1 << (m1 + m2)];
            let mut marg = vec![0u32; 1 << m1];
            let (mut tot, mut sec) = (0u128, 0u128);
            for y2 in 0..1usize << second.d {
                for &x in support {
                    let z1 = first.get(y1, x) as usize;
                    let z2 = second.get(y2, x) as usize;
                    joint[(z1 << m2) | z2] += 1;
                    if y2 == 0 {
                        marg[z1] += 1;
                    }
                }
                for (z, &c) in joint.iter().enumerate() {
                    tot += ((c as u128) << (m1 + m2)).abs_diff(size);
                    sec += ((c as u128) << m2).abs_diff(marg[z >> m2] as u128);
                }
                joint.iter_mut().for_each(|c| *c = 0);
            }
            (tot, sec)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let seeds = first.d + second.d;
    let total = BigRational::new(BigInt::from(tot), (BigInt::from(2 * size) << (m1 + m2)) << seeds);
    let second_err = BigRational::new(BigInt::from(sec), (BigInt::from(2 * size) << m2) << seeds);
    let first_err = first.flat_error(support)?;
    if total > &first_err + &second_err {
        return Err(Error::Internal {
            index: 0,
            reason: format!("composed error {total} exceeds {first_err} + {second_err}"),
        });
    }
    Ok(CompositionReport {
        total,
        first: first_err,
        second: second_err,
    })
}

/// Guessing probabilities behind the three chain rules for a triple
/// `(A, B, C)`, all exact. `H_min(X|Y) = -log p_guess(X|Y)`.
#[derive(Clone, Debug)]
pub struct ChainRuleReport {
    /// `p_guess(A|BC)`.
    pub a_given_bc: Prob,
    /// `p_guess(A|B)`.
    pub a_given_b: Prob,
    /// `p_guess(AC|B)`.
    pub ac_given_b: Prob,
    /// `|supp C|`, so `H_0(C) = log` of it.
    pub c_support: usize,
}

impl ChainRuleReport {
    /// `H_min(A|BC) >= H_min(A|B) - H_0(C)`.
    pub fn side_info_holds(&self) -> bool {
        self.a_given_bc <= &self.a_given_b * BigRational::from_integer(BigInt::from(self.c_support))
    }

    /// `H_min(A|BC) >= H_min(AC|B) - H_0(C)`.
    pub fn move_holds(&self) -> bool {
        self.a_given_bc <= &self.ac_given_b * BigRational::from_integer(BigInt::from(self.c_support))
    }

    /// `H_min(AC|B) >= H_min(A|B)`.
    pub fn extend_holds(&self) -> bool {
        self.ac_given_b <= self.a_given_b
    }

    pub fn all_hold(&self) -> bool {
        self.side_info_holds() && self.move_holds() && self.extend_holds()
    }
}

pub fn chain_rules(t: &TripleDistribution) -> ChainRuleReport {
    ChainRuleReport {
        a_given_bc: t.joint(&[Axis::A], &[Axis::B, Axis::C]).guessing_probability(),
        a_given_b: t.joint(&[Axis::A], &[Axis::B]).guessing_probability(),
        ac_given_b: t.joint(&[Axis::A, Axis::C], &[Axis::B]).guessing_probability(),
        c_support: t.marginal(&[Axis::C]).support_size(),
    }
}
