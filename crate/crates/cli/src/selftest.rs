use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trevisan_core::code_extractor::{min_distance_exhaustive, CodeSpec};
use trevisan_core::entropy::{
    Distribution, JointDistribution, Prob, TripleDistribution,
};
use trevisan_core::harness::{
    chain_rules, composition_errors, halving_chain, hybrid_gaps, majority_predictor,
    reduction_witness, smoothing_robustness_check, trevisan_error_bound, worst_flat_source,
    write_test_vectors, OutputTable, TestVector, TABLE_LIMIT,
};
use trevisan_core::params::{preset_params, weak_seed_params, Preset, WeakSeedOptions};
use trevisan_core::universal_hash::{toeplitz_hash, ToeplitzSpec};
use trevisan_core::weak_design::{
    block_design, greedy_basic_design, verify_design, WeakDesign,
};
use trevisan_core::{BitString, Error, Result, TrevisanInstance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Level {
    Quick,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Fault {
    DesignOverlap,
}

#[derive(Args, Debug)]
pub struct SelftestArgs {
    #[arg(value_enum, default_value = "quick")]
    pub level: Level,
    /// Base seed of the random instances.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Where the full level writes its test vectors.
    #[arg(long, default_value = "selftest-vectors.trvec")]
    pub vectors: PathBuf,
    #[arg(long, value_enum, hide = true)]
    pub inject_fault: Option<Fault>,
}

struct Ctx {
    rng: ChaCha8Rng,
    full: bool,
    fault: Option<Fault>,
}

type Suite = fn(&mut Ctx) -> Result<Vec<TestVector>>;

const SUITES: &[(&str, Suite)] = &[
    ("designs", designs),
    ("code-distance", code_distance),
    ("one-bit", one_bit),
    ("trevisan-micro", trevisan_micro),
    ("hybrid", hybrid),
    ("reduction", reduction),
    ("majority", majority),
    ("composition", composition),
    ("smoothing", smoothing),
    ("chain-rules", chain),
    ("toeplitz", toeplitz),
    ("params", params),
];

fn fail(reason: String) -> Error {
    Error::Verification { index: 0, reason }
}

fn vector(label: &str, fields: &[(&str, String)], distances: Vec<(&str, Prob)>) -> TestVector {
    TestVector {
        label: label.into(),
        fields: fields.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        distances: distances.into_iter().map(|(k, p)| (k.to_string(), p)).collect(),
    }
}

fn random_weights(rng: &mut ChaCha8Rng, len: usize, max: u64) -> Vec<u64> {
    loop {
        let w: Vec<u64> = (0..len).map(|_| rng.gen_range(0..=max)).collect();
        if w.iter().any(|&v| v > 0) {
            return w;
        }
    }
}

fn random_subset(rng: &mut ChaCha8Rng, universe: usize, size: usize) -> Vec<usize> {
    let mut s = rand::seq::index::sample(rng, universe, size).into_vec();
    s.sort_unstable();
    s
}

fn designs(ctx: &mut Ctx) -> Result<Vec<TestVector>> {
    let (ts, ms): (&[usize], &[usize]) = if ctx.full {
        (&[2, 3, 4, 8, 16], &[1, 2, 8, 64, 512])
    } else {
        (&[2, 3, 4, 8], &[1, 2, 8, 64])
    };
    let one = BigRational::one();
    let target = BigRational::new(3.into(), 2.into());
    let mut out = Vec::new();
    for &t in ts {
        for &m in ms {
            let b = block_design(t, m)?;
            verify_design(&b, &one)?;
            let g = greedy_basic_design(t, m, &target)?;
            verify_design(&g, &target)?;
            out.push(vector(
                "design",
                &[
                    ("t", t.to_string()),
                    ("m", m.to_string()),
                    ("block_d", b.d().to_string()),
                    ("greedy_d", g.d().to_string()),
                ],
                vec![("block_r", b.r_certified().clone()), ("greedy_r", g.r_certified().clone())],
            ));
        }
    }
    Ok(out)
}

fn code_distance(ctx: &mut Ctx) -> Result<Vec<TestVector>> {
    let max_n = if ctx.full { 12 } else { 8 };
    let mut out = Vec::new();
    for n in 1..=max_n {
        for s in 1..=8u32 {
            let Ok(spec) = CodeSpec::with_symbol_bits(n, s) else { continue };
            let dist = min_distance_exhaustive(&spec)?;
            if dist < spec.distance_bound() {
                return Err(fail(format!("n={n} s={s}: distance {dist} below {}", spec.distance_bound())));
            }
            if spec.ell() == 1 && dist != BigRational::new(1.into(), 2.into()) {
                return Err(fail(format!("n={n} s={s}: Hadamard distance {dist}")));
            }
            out.push(vector(
                "code",
                &[("n", n.to_string()), ("s", s.to_string())],
                vec![("distance", dist)],
            ));
        }
    }
    Ok(out)
}

/// Checks `error <= 2δ` as `error² <= 4δ² = 2(ℓ-1)/q`.
fn within_two_delta(err: &Prob, spec: &CodeSpec) -> bool {
    let four_delta_sq = BigRational::new(BigInt::from(2 * (spec.ell() as u64 - 1)), BigInt::one() << spec.s());
    err * err <= four_delta_sq
}

fn one_bit(ctx: &mut Ctx) -> Result<Vec<TestVector>> {
    let ns: &[usize] = if ctx.full { &[6, 8, 10] } else { &[6, 8] };
    let samples = if ctx.full { 200 } else { 40 };
    let mut out = Vec::new();
    for &n in ns {
        for s in 1..=8u32 {
            let Ok(spec) = CodeSpec::with_symbol_bits(n, s) else { continue };
            if !spec.list_decodable() || spec.ell() < 2 || n + spec.t() > TABLE_LIMIT - 6 {
                continue;
            }
            let table = OutputTable::from_code(&spec)?;
            let k_min = spec.entropy_threshold().ceil() as usize;
            for k in k_min..=n {
                let rep = worst_flat_source(&table, k as u32, samples, 4 * samples, ctx.rng.gen())?;
                if !within_two_delta(&rep.max_error, &spec) {
                    return Err(fail(format!(
                        "n={n} s={s} k={k}: error {} above 2 delta = {}",
                        rep.max_error,
                        2.0 * spec.delta()
                    )));
                }
                out.push(vector(
                    "one_bit",
                    &[("n", n.to_string()), ("s", s.to_string()), ("k", k.to_string())],
                    vec![("error", rep.max_error)],
                ));
            }
        }
    }
    Ok(out)
}

/// `m <= 3` sets of size `t` (even) in `[3t/2]`, pairwise overlap `t/2`.
pub fn micro_design(t: usize, m: usize) -> Result<WeakDesign> {
    let h = t / 2;
    let sets: Vec<Vec<u32>> = [(0..t).collect::<Vec<_>>(), (h..h + t).collect(), (0..h).chain(t..t + h).collect()]
        .into_iter()
        .take(m)
        .map(|s| s.into_iter().map(|e| e as u32).collect())
        .collect();
    WeakDesign::from_sets(t, 3 * h, &sets)
}

fn micro_instance(n: usize, m: usize) -> Result<TrevisanInstance> {
    let s = if n <= 8 { 2 } else { 3 };
    let code = CodeSpec::with_symbol_bits(n, s)?;
    TrevisanInstance::new(micro_design(code.t(), m)?, code)
}

fn trevisan_micro(ctx: &mut Ctx) -> Result<Vec<TestVector>> {
    let ns: &[usize] = if ctx.full { &[4, 6, 8, 10] } else { &[4, 6, 8] };
    let mut out = Vec::new();
    for &n in ns {
        for m in [2, 3] {
            let inst = micro_instance(n, m)?;
            if n + inst.d() > TABLE_LIMIT - 4 {
                continue;
            }
            let table = OutputTable::from_trevisan(&inst)?;
            let chain = halving_chain(&table, ctx.rng.gen())?;
            if let Some(w) = chain.windows(2).find(|w| w[1].1 < w[0].1) {
                return Err(fail(format!("n={n} m={m}: error drops from k={} to k={}", w[0].0, w[1].0)));
            }
            let bound = trevisan_error_bound(&inst);
            out.push(vector(
                "trevisan",
                &[
                    ("n", n.to_string()),
                    ("m", m.to_string()),
                    ("d", inst.d().to_string()),
                    ("bound_vacuous", (bound >= 1.0).to_string()),
                ],
                chain.into_iter().map(|(_, e)| ("chain", e)).collect(),
            ));
        }
    }
    Ok(out)
}

fn hybrid(ctx: &mut Ctx) -> Result<Vec<TestVector>> {
    let (count, max_m) = if ctx.full { (1000, 8) } else { (200, 5) };
    let mut worst = Prob::zero();
    for _ in 0..count {
        let m = ctx.rng.gen_range(1..=max_m);
        let e = ctx.rng.gen_range(1..=3);
        let w = random_weights(&mut ctx.rng, (1 << m) * e, 6);
        let j = JointDistribution::new(1 << m, e, Distribution::from_weights(&w)?.mass().to_vec())?;
        let r = hybrid_gaps(&j)?;
        let scaled = r.max_gap() * BigRational::from_integer(m.into());
        if scaled < r.total {
            return Err(fail(format!("max gap {} below total {} / {m}", r.max_gap(), r.total)));
        }
        worst = worst.max(r.total);
    }
    Ok(vec![vector("hybrid", &[("count", count.to_string())], vec![("max_total", worst)])])
}

fn reduction(ctx: &mut Ctx) -> Result<Vec<TestVector>> {
    let inst = match ctx.fault {
        Some(Fault::DesignOverlap) => {
            let design = WeakDesign::unchecked(
                4,
                6,
                &[vec![0, 1, 2, 3], vec![1, 2, 3, 4]],
                BigRational::one(),
            );
            TrevisanInstance::new(design, CodeSpec::with_symbol_bits(4, 2)?)?
        }
        None => {
            let design = WeakDesign::from_sets(4, 6, &[vec![0, 1, 2, 3], vec![2, 3, 4, 5]])?;
            TrevisanInstance::new(design, CodeSpec::with_symbol_bits(4, 2)?)?
        }
    };
    let cert = verify_design(inst.design(), inst.design().r_certified())?;
    let m = inst.m();
    let rm = &cert.r_certified * BigRational::from_integer(m.into());
    let seed = Distribution::uniform(1 << inst.d());
    let rounds = if ctx.full { 60 } else { 15 };
    let mut out = Vec::new();
    for round in 0..rounds {
        let source = if round == 0 {
            JointDistribution::copy(&Distribution::uniform(16))
        } else {
            let e = ctx.rng.gen_range(1..=4);
            let w = random_weights(&mut ctx.rng, 16 * e, 3);
            JointDistribution::new(16, e, Distribution::from_weights(&w)?.mass().to_vec())?
        };
        let w = reduction_witness(&inst, &source, &seed)?;
        let eps = &w.total * BigRational::new(9.into(), 10.into());
        if w.total.is_zero() {
            continue;
        }
        if w.advantage.clone() * BigRational::from_integer(m.into()) <= eps {
            return Err(fail(format!("advantage {} not above eps/m for eps = {eps}", w.advantage)));
        }
        if BigRational::from_integer(w.advice_bits.into()) > rm || w.advice_support_log2 > w.advice_bits as f64 {
            return Err(fail(format!("advice of {} bits exceeds r*m = {rm}", w.advice_bits)));
        }
        out.push(vector(
            "reduction",
            &[("index", w.index.to_string()), ("advice_bits", w.advice_bits.to_string())],
            vec![("total", w.total.clone()), ("advantage", w.advantage.clone())],
        ));
    }
    Ok(out)
}

fn majority(ctx: &mut Ctx) -> Result<Vec<TestVector>> {
    let count = if ctx.full { 500 } else { 100 };
    let mut checked = 0;
    let mut tries = 0;
    while checked < count {
        tries += 1;
        let n_bar = ctx.rng.gen_range(2..=6);
        let mut w = random_weights(&mut ctx.rng, 1 << n_bar, 4);
        // Tilt toward one string so the advantage is usually positive.
        let hot = ctx.rng.gen_range(0..w.len());
        w[hot] += ctx.rng.gen_range(0..=4 * w.len() as u64);
        let p = Distribution::from_weights(&w)?;
        let probe = majority_predictor(&p, n_bar, &BigRational::new(1.into(), 1_000_000.into()))?;
        if probe.advantage.is_zero() {
            continue;
        }
        let r = majority_predictor(&p, n_bar, &probe.advantage)?;
        if r.success <= probe.advantage {
            return Err(fail(format!("success {} not above delta {}", r.success, probe.advantage)));
        }
        checked += 1;
    }
    Ok(vec![vector(
        "majority",
        &[("checked", checked.to_string()), ("drawn", tries.to_string())],
        Vec::new(),
    )])
}

/// `ε1`, `ε2` are the worst stage errors over the family, the second one
/// measured with the first stage's output and seed as side information.
fn composition(ctx: &mut Ctx) -> Result<Vec<TestVector>> {
    let inst = micro_instance(4, 2)?;
    let first = OutputTable::from_trevisan(&inst)?;
    let second = OutputTable::build(&ToeplitzSpec::new(4, 2)?)?;
    let mut out = Vec::new();
    for k in 1..=4usize {
        let supports: Vec<Vec<usize>> = if ctx.full || k <= 2 {
            all_subsets(16, 1 << k)
        } else {
            (0..50).map(|_| random_subset(&mut ctx.rng, 16, 1 << k)).collect()
        };
        let reports = supports
            .iter()
            .map(|s| composition_errors(&first, &second, s))
            .collect::<Result<Vec<_>>>()?;
        let eps1 = reports.iter().map(|r| r.first.clone()).max().unwrap_or_else(Prob::zero);
        let eps2 = reports.iter().map(|r| r.second.clone()).max().unwrap_or_else(Prob::zero);
        let bound = &eps1 + &eps2;
        if let Some(r) = reports.iter().find(|r| r.total > bound) {
            return Err(fail(format!("k={k}: composed error {} above eps1 + eps2 = {bound}", r.total)));
        }
        out.push(vector(
            "composition",
            &[("k", k.to_string()), ("sources", supports.len().to_string())],
            vec![("eps1", eps1), ("eps2", eps2)],
        ));
    }
    Ok(out)
}

fn all_subsets(universe: usize, size: usize) -> Vec<Vec<usize>> {
    (0u32..1 << universe)
        .filter(|m| m.count_ones() as usize == size)
        .map(|m| (0..universe).filter(|i| m >> i & 1 == 1).collect())
        .collect()
}

fn smoothing(ctx: &mut Ctx) -> Result<Vec<TestVector>> {
    let count = if ctx.full { 500 } else { 100 };
    let table = OutputTable::build(&ToeplitzSpec::new(4, 2)?)?;
    let seed = Distribution::uniform(1 << table.d());
    let mut worst = Prob::zero();
    for _ in 0..count {
        let e = ctx.rng.gen_range(1..=2);
        let w = random_weights(&mut ctx.rng, 16 * e, 8);
        let p = JointDistribution::new(16, e, Distribution::from_weights(&w)?.mass().to_vec())?;
        let mut w2 = w.clone();
        for _ in 0..ctx.rng.gen_range(1..=4) {
            let i = ctx.rng.gen_range(0..w2.len());
            w2[i] += ctx.rng.gen_range(0..=3);
        }
        let q = JointDistribution::new(16, e, Distribution::from_weights(&w2)?.mass().to_vec())?;
        let a = smoothing_robustness_check(&table, &p, &q, &seed)?;
        let b = smoothing_robustness_check(&table, &q, &p, &seed)?;
        worst = worst.max(a.distance.clone().max(b.distance));
    }
    Ok(vec![vector("smoothing", &[("count", count.to_string())], vec![("max_distance", worst)])])
}

fn chain(ctx: &mut Ctx) -> Result<Vec<TestVector>> {
    let count = if ctx.full { 1000 } else { 200 };
    for i in 0..count {
        let dims = [
            ctx.rng.gen_range(1..=4),
            ctx.rng.gen_range(1..=4),
            ctx.rng.gen_range(1..=4),
        ];
        let w = random_weights(&mut ctx.rng, dims.iter().product(), 5);
        let t = TripleDistribution::from_weights(dims, &w)?;
        let r = chain_rules(&t);
        if !r.all_hold() {
            return Err(fail(format!("triple {i} with dims {dims:?}: {r:?}")));
        }
    }
    Ok(vec![vector("chain", &[("count", count.to_string())], Vec::new())])
}

/// For every nonzero difference `x ⊕ x'` the seeds mapping it to zero form
/// a subspace; its size `2^(d - rank)` is counted exactly from the images
/// of the unit seeds, which is the exhaustive count over all seeds.
fn toeplitz(ctx: &mut Ctx) -> Result<Vec<TestVector>> {
    let limit = if ctx.full { 16 } else { 12 };
    let mut out = Vec::new();
    for n in 1..=limit {
        for m in 1..=(limit + 1 - n).min(n) {
            let spec = ToeplitzSpec::new(n, m)?;
            let d = spec.seed_len();
            let units: Vec<BitString> = (0..d).map(|i| BitString::from_u64(1 << (d - 1 - i), d)).collect();
            let mut min_rank = m;
            for dx in 1..1u64 << n {
                let x = BitString::from_u64(dx, n);
                let images = units
                    .iter()
                    .map(|u| Ok(toeplitz_hash(&spec, &x, u)?.to_u64()))
                    .collect::<Result<Vec<_>>>()?;
                min_rank = min_rank.min(gf2_rank(images));
            }
            let frac = BigRational::new(BigInt::one(), BigInt::one() << min_rank);
            if min_rank < m {
                return Err(fail(format!("({n}, {m}): collision fraction {frac}")));
            }
            out.push(vector(
                "toeplitz",
                &[("n_in", n.to_string()), ("m_out", m.to_string())],
                vec![("collision", frac)],
            ));
        }
    }
    Ok(out)
}

fn gf2_rank(mut rows: Vec<u64>) -> usize {
    let mut rank = 0;
    for bit in (0..64).rev() {
        let Some(p) = rows[rank..].iter().position(|r| r >> bit & 1 == 1) else { continue };
        rows.swap(rank, rank + p);
        let pivot = rows[rank];
        for r in rows.iter_mut().skip(rank + 1) {
            if *r >> bit & 1 == 1 {
                *r ^= pivot;
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

fn params(_ctx: &mut Ctx) -> Result<Vec<TestVector>> {
    let p = preset_params(Preset::Cor1, 1 << 16, 2f64.powi(-20), 256, 0.75, WeakSeedOptions::default())?;
    if !(p.d > 0 && p.k > p.m as f64 && p.k < p.n as f64 && p.feasible()) {
        return Err(fail(format!("cor1 at n=2^16: d={} k={}", p.d, p.k)));
    }
    match preset_params(Preset::Cor3, 1 << 16, 2f64.powi(-20), 256, 0.75, WeakSeedOptions::default()) {
        Err(Error::NotImplemented(_)) => {}
        other => return Err(fail(format!("cor3 returned {other:?}"))),
    }
    let w = weak_seed_params(1024, 2f64.powi(-8), 2, 0.6, WeakSeedOptions { gamma: 0.5, t: Some(8) })?;
    let tp = w.weak_seed.as_ref().map(|f| f.t_prime);
    if tp != Some(640) || w.d != 640 * 185 {
        return Err(fail(format!("weak-seed example: t' = {tp:?}, d = {}", w.d)));
    }
    Ok(vec![vector(
        "params",
        &[("cor1_d", p.d.to_string()), ("cor1_k", format!("{:.6}", p.k))],
        Vec::new(),
    )])
}

pub fn run(args: &SelftestArgs) -> Result<()> {
    let full = args.level == Level::Full;
    let mut vectors = Vec::new();
    for (i, (name, suite)) in SUITES.iter().enumerate() {
        let start = Instant::now();
        let mut ctx = Ctx {
            rng: ChaCha8Rng::seed_from_u64(args.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ i as u64),
            full,
            fault: args.inject_fault,
        };
        match suite(&mut ctx) {
            Ok(v) => {
                println!("ok   {name:<15} {:>4} records  {:.2}s", v.len(), start.elapsed().as_secs_f64());
                vectors.extend(v);
            }
            Err(e) => {
                println!("FAIL {name}: {e}");
                println!("reproduce with: trevisan selftest {} --seed {}", level_name(args.level), args.seed);
                return Err(Error::Verification {
                    index: i,
                    reason: format!("suite {name} failed"),
                });
            }
        }
    }
    if full {
        write_test_vectors(&vectors, BufWriter::new(File::create(&args.vectors)?))?;
        println!("wrote {} test vectors to {}", vectors.len(), args.vectors.display());
    }
    Ok(())
}

fn level_name(l: Level) -> &'static str {
    match l {
        Level::Quick => "quick",
        Level::Full => "full",
    }
}
