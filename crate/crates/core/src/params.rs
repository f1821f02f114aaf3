//! Parameter arithmetic for the extractor presets.
//!
//! All logarithms are base 2. Every additive constant the asymptotic
//! statements leave open is pinned in [`CONSTANTS`].

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use serde::Serialize;

use crate::code_extractor::code_params;
use crate::error::{param, Error, Result};
use crate::trevisan::TrevisanInstance;
use crate::weak_design::{
    block_design, block_sizes, greedy_basic_design, greedy_universe, ln_ceil_ratio, DesignCache,
    WeakDesign,
};

/// A named constant with the arithmetic that fixes it.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Constant {
    pub name: &'static str,
    pub value: f64,
    pub derivation: &'static str,
}

/// `8·log 3`: with `ε_C = (ε/3m)²` and `r = 1` the threshold is
/// `k = m + 4·log(1/ε_C) = m + 8 log m + 8 log(1/ε) + 8 log 3`.
pub const BLOCK_PRESET_CONSTANT: f64 = 12.679_700_005_769_249;

pub const CONSTANTS: &[Constant] = &[
    Constant {
        name: "block_preset_constant",
        value: BLOCK_PRESET_CONSTANT,
        derivation: "k - m - 8 log m - 8 log 1/eps = 4 log(1/eps_C) - 8 log(m/eps) = 8 log 3",
    },
    Constant {
        name: "rt_bound_constant",
        value: 0.0,
        derivation: "m_max = k - 2 log 1/eps, additive constant fixed to 0",
    },
    Constant {
        name: "one_bit_threshold_offset",
        value: 0.0,
        derivation: "k_C = 3 log 1/eps_C for the uniform-seed code extractor",
    },
    Constant {
        name: "weak_seed_threshold_offset",
        value: 3.0,
        derivation: "k_C = 3 log 1/eps_C + 3 after the weak-seed transformation",
    },
    Constant {
        name: "weak_seed_length_factor",
        value: 8.0,
        derivation: "t' = ceil(8 t / beta_raz)",
    },
    Constant {
        name: "toeplitz_loss_factor",
        value: 2.0,
        derivation: "second stage loses 2 log 1/eps_2 bits (leftover hash lemma)",
    },
    Constant {
        name: "almost_universal_loss_factor",
        value: 4.0,
        derivation: "loss 4 log 1/eps of the almost two-universal stage, printed for comparison",
    },
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Block design, `r = 1`.
    Cor1,
    /// Block-design stage followed by Toeplitz hashing.
    Cor2,
    /// Local extractor; not available.
    Cor3,
    /// Weak random seed.
    Cor4,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cor1" => Ok(Preset::Cor1),
            "cor2" => Ok(Preset::Cor2),
            "cor3" => Ok(Preset::Cor3),
            "cor4" => Ok(Preset::Cor4),
            _ => param(format!("unknown preset {s:?} (cor1, cor2, cor3, cor4)")),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Cor1 => "cor1",
            Preset::Cor2 => "cor2",
            Preset::Cor3 => "cor3",
            Preset::Cor4 => "cor4",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DesignKind {
    /// Weak `(t, 1)`-design from halving blocks.
    Block,
    /// Greedy weak `(t, r)`-design.
    Greedy { r: BigRational },
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakSeedFields {
    /// Seed min-entropy rate `β` of the one-bit extractor, in `(1/2, 1)`.
    pub beta: f64,
    /// `β - 1/2`, the margin the seed transformation is stated in.
    pub beta_raz: f64,
    pub gamma: f64,
    /// Seed length of the transformed one-bit extractor.
    pub t_prime: usize,
    /// Its seed min-entropy requirement `β·t'`.
    pub one_bit_seed_entropy: f64,
    /// Required seed min-entropy `d - (t' - s_C - log 1/(3√ε_C))`.
    pub seed_min_entropy: f64,
    /// `d / t'`.
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stage2Fields {
    pub m1: usize,
    pub m2: usize,
    pub eps1: f64,
    pub eps2: f64,
    /// Threshold of the first stage alone.
    pub k1: f64,
    pub d1: usize,
    /// Toeplitz seed length `n + m2 - 1`.
    pub d2: usize,
    /// `2 log 1/ε2`.
    pub stage2_loss: f64,
    /// `4 log 1/ε`, the loss of the almost two-universal second stage.
    pub reference_loss: f64,
    /// `2·max(ε1, ε2)`, the composite error when both stages run at the
    /// larger error.
    pub uniform_stage_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractorParams {
    pub preset: Option<Preset>,
    pub n: usize,
    /// Min-entropy threshold.
    pub k: f64,
    pub epsilon: f64,
    pub m: usize,
    pub d: usize,
    /// Seed length of the one-bit extractor.
    pub t: usize,
    pub r: f64,
    pub delta: f64,
    pub symbol_bits: u32,
    /// `ε_C`, error of the one-bit extractor.
    pub one_bit_error: f64,
    /// `k_C`, threshold of the one-bit extractor.
    pub one_bit_threshold: f64,
    pub design: DesignKind,
    pub design_blocks: usize,
    pub weak_seed: Option<WeakSeedFields>,
    pub stage2: Option<Stage2Fields>,
}

impl ExtractorParams {
    /// `Δ = k - m`.
    pub fn loss(&self) -> f64 {
        self.k - self.m as f64
    }

    /// `Δ - 2 log 1/ε`, the distance from the optimal loss.
    pub fn optimality_gap(&self) -> f64 {
        self.loss() - 2.0 * log_inv(self.epsilon)
    }

    /// Whether a source of `n` bits can carry `k` bits of min-entropy and,
    /// for weak seeds, whether the seed requirement fits in `d` bits.
    pub fn feasible(&self) -> bool {
        self.k <= self.n as f64
            && self
                .weak_seed
                .as_ref()
                .is_none_or(|w| w.seed_min_entropy <= self.d as f64)
    }

    /// The loss printed in the asymptotic statement, with its constant.
    pub fn reference_loss(&self) -> Option<f64> {
        let m = self.m as f64;
        let le = log_inv(self.epsilon);
        match self.preset {
            Some(Preset::Cor1) => Some(8.0 * m.log2() + 8.0 * le + BLOCK_PRESET_CONSTANT),
            Some(Preset::Cor2) => Some(4.0 * le),
            Some(Preset::Cor4) => Some(self.r * m + 8.0 * m.log2() + 8.0 * le),
            _ => None,
        }
    }

    pub fn report(&self) -> Report {
        let mut r = Report::new();
        let preset = self.preset.map(|p| p.to_string()).unwrap_or_else(|| "custom".into());
        r.text("preset", &preset, "");
        r.int("n", self.n as u64, "source length");
        r.float("k", self.k, "k_C + r*m + log 1/eps_C");
        r.float("eps", self.epsilon, "advertised error");
        r.float("log2_inv_eps", log_inv(self.epsilon), "");
        r.int("m", self.m as u64, "output length");
        r.int("d", self.d as u64, "seed length");
        r.int("t", self.t as u64, "one-bit seed length 2s");
        r.int("symbol_bits", self.symbol_bits as u64, "s, minimal with (ceil(n/s)-1)/2^s <= 2 delta^2");
        r.float("r", self.r, "design overlap parameter");
        r.float("delta", self.delta, "code radius parameter");
        r.float("eps_c", self.one_bit_error, "one-bit error");
        r.float("k_c", self.one_bit_threshold, "one-bit threshold");
        match &self.design {
            DesignKind::Block => {
                r.text("design", "block", "weak (t,1)-design from halving blocks");
                r.int("design_blocks", self.design_blocks as u64, "");
            }
            DesignKind::Greedy { r: target } => {
                r.text("design", &format!("greedy r={target}"), "d = t ceil(t / ln r)");
            }
        }
        r.float("loss", self.loss(), "k - m");
        r.float("optimality_gap", self.optimality_gap(), "loss - 2 log 1/eps");
        if let Some(ref_loss) = self.reference_loss() {
            r.float("reference_loss", ref_loss, "loss of the asymptotic statement, constants pinned");
        }
        r.boolean("feasible", self.feasible(), "k <= n, seed requirement <= d");
        if let Some(w) = &self.weak_seed {
            r.float("beta", w.beta, "one-bit seed min-entropy rate");
            r.float("beta_raz", w.beta_raz, "beta - 1/2");
            r.float("gamma", w.gamma, "r = n^gamma");
            r.int("t_prime", w.t_prime as u64, "ceil(8 t / beta_raz)");
            r.float("one_bit_seed_entropy", w.one_bit_seed_entropy, "beta * t'");
            r.float(
                "seed_min_entropy",
                w.seed_min_entropy,
                "d - (t' - s_C - log 1/(3 sqrt eps_C))",
            );
            r.float("c", w.c, "d / t'");
            r.float("seed_entropy_rate", w.seed_min_entropy / self.d as f64, "s / d");
        }
        if let Some(s) = &self.stage2 {
            r.int("m1", s.m1 as u64, "first stage output");
            r.int("m2", s.m2 as u64, "Toeplitz stage output");
            r.float("eps1", s.eps1, "");
            r.float("eps2", s.eps2, "");
            r.float("k1", s.k1, "first stage threshold");
            r.int("d1", s.d1 as u64, "first stage seed");
            r.int("d2", s.d2 as u64, "n + m2 - 1");
            r.float("stage2_loss", s.stage2_loss, "2 log 1/eps2");
            r.float("reference_stage2_loss", s.reference_loss, "4 log 1/eps");
            r.float("composite_error", s.eps1 + s.eps2, "eps1 + eps2");
            r.float("uniform_stage_error", s.uniform_stage_error, "2 max(eps1, eps2)");
        }
        r
    }
}

/// A flat list of report fields, in a fixed order.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub fields: Vec<ReportField>,
    pub constants: Vec<Constant>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportField {
    pub key: String,
    pub value: ReportValue,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub formula: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ReportValue {
    Int(u64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl fmt::Display for ReportValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReportValue::Int(v) => write!(f, "{v}"),
            ReportValue::Float(v) => write!(f, "{v}"),
            ReportValue::Bool(v) => write!(f, "{v}"),
            ReportValue::Text(v) => f.write_str(v),
        }
    }
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

impl Report {
    pub fn new() -> Self {
        Report {
            schema_version: REPORT_SCHEMA_VERSION,
            fields: Vec::new(),
            constants: CONSTANTS.to_vec(),
        }
    }

    fn push(&mut self, key: &str, value: ReportValue, formula: &str) {
        self.fields.push(ReportField {
            key: key.into(),
            value,
            formula: formula.into(),
        });
    }

    pub fn int(&mut self, key: &str, v: u64, formula: &str) {
        self.push(key, ReportValue::Int(v), formula);
    }

    pub fn float(&mut self, key: &str, v: f64, formula: &str) {
        self.push(key, ReportValue::Float(v), formula);
    }

    pub fn boolean(&mut self, key: &str, v: bool, formula: &str) {
        self.push(key, ReportValue::Bool(v), formula);
    }

    pub fn text(&mut self, key: &str, v: &str, formula: &str) {
        self.push(key, ReportValue::Text(v.into()), formula);
    }

    pub fn get(&self, key: &str) -> Option<&ReportValue> {
        self.fields.iter().find(|f| f.key == key).map(|f| &f.value)
    }

    /// `key = value` lines, formulas as trailing comments, then constants.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let width = self.fields.iter().map(|f| f.key.len()).max().unwrap_or(0);
        for f in &self.fields {
            let line = format!("{:width$} = {}", f.key, f.value);
            if f.formula.is_empty() {
                out.push_str(&line);
            } else {
                out.push_str(&format!("{line:<44} # {}", f.formula));
            }
            out.push('\n');
        }
        out.push_str("\nconstants:\n");
        for c in &self.constants {
            out.push_str(&format!("  {} = {}    # {}\n", c.name, c.value, c.derivation));
        }
        out
    }
}

impl Default for Report {
    fn default() -> Self {
        Self::new()
    }
}

pub(crate) fn log_inv(eps: f64) -> f64 {
    -eps.log2()
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return param(format!("eps = {eps} outside (0, 1)"));
    }
    Ok(())
}

/// Uniform-seed parameters: `ε_C = (ε/3m)²`, `δ = ε_C/2`,
/// `k_C = 3 log 1/ε_C`, `k = k_C + r·m + log 1/ε_C`.
pub fn trevisan_params(n: usize, eps: f64, m: usize, design: DesignKind) -> Result<ExtractorParams> {
    check_eps(eps)?;
    if m == 0 {
        return param("output length m must be positive");
    }
    let eps_c = (eps / (3.0 * m as f64)).powi(2);
    let delta = eps_c / 2.0;
    let code = code_params(n, delta)?;
    let t = code.t();
    let (d, r, blocks) = match &design {
        DesignKind::Block => {
            let blocks = block_sizes(m).len();
            let db = greedy_universe(t, &BigRational::from_integer(2.into()))?;
            (db * blocks, 1.0, blocks)
        }
        DesignKind::Greedy { r } => {
            let rf = ratio_to_f64(r);
            (greedy_universe(t, r)?, rf, 1)
        }
    };
    let k_c = 3.0 * log_inv(eps_c);
    Ok(ExtractorParams {
        preset: None,
        n,
        k: k_c + r * m as f64 + log_inv(eps_c),
        epsilon: eps,
        m,
        d,
        t,
        r,
        delta,
        symbol_bits: code.s(),
        one_bit_error: eps_c,
        one_bit_threshold: k_c,
        design,
        design_blocks: blocks,
        weak_seed: None,
        stage2: None,
    })
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::INFINITY)
}

/// Block-design preset.
pub fn cor1_params(n: usize, eps: f64, m: usize) -> Result<ExtractorParams> {
    let mut p = trevisan_params(n, eps, m, DesignKind::Block)?;
    p.preset = Some(Preset::Cor1);
    Ok(p)
}

/// Block-design stage of `m1` bits followed by Toeplitz hashing of
/// `m2 = m - m1` bits, each stage at error `ε/2`. `m1` is the largest value
/// whose stage threshold `m1 + Δ1(m1)` stays within `m + 2 log 1/ε2`, so
/// the composite threshold is `k = m + 2 log(2/ε)`.
pub fn cor2_params(n: usize, eps: f64, m: usize) -> Result<ExtractorParams> {
    check_eps(eps)?;
    if m == 0 {
        return param("output length m must be positive");
    }
    let (eps1, eps2) = (eps / 2.0, eps / 2.0);
    let loss2 = 2.0 * log_inv(eps2);
    let k = m as f64 + loss2;
    let fits = |m1: usize| -> Result<Option<ExtractorParams>> {
        let p = trevisan_params(n, eps1, m1, DesignKind::Block)?;
        Ok((p.k <= k).then_some(p))
    };
    let Some(mut best) = fits(1)? else {
        return Err(Error::Unsupported(format!(
            "m = {m} leaves no room for a first stage at eps = {eps}"
        )));
    };
    let (mut lo, mut hi) = (1usize, m);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        match fits(mid)? {
            Some(p) => {
                best = p;
                lo = mid;
            }
            None => hi = mid - 1,
        }
    }
    let m1 = lo;
    if best.m != m1 {
        best = fits(m1)?.expect("checked");
    }
    let m2 = m - m1;
    if m2 > n {
        return param(format!("Toeplitz stage would output {m2} > n = {n} bits"));
    }
    let d2 = if m2 == 0 { 0 } else { n + m2 - 1 };
    Ok(ExtractorParams {
        preset: Some(Preset::Cor2),
        k,
        epsilon: eps1 + eps2,
        m,
        d: best.d + d2,
        stage2: Some(Stage2Fields {
            m1,
            m2,
            eps1,
            eps2,
            k1: best.k,
            d1: best.d,
            d2,
            stage2_loss: loss2,
            reference_loss: 4.0 * log_inv(eps),
            uniform_stage_error: 2.0 * eps1.max(eps2),
        }),
        ..best
    })
}

/// Options for [`weak_seed_params`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakSeedOptions {
    /// Design parameter `r = n^γ`.
    pub gamma: f64,
    /// Overrides the one-bit seed length computed from the code.
    pub t: Option<usize>,
}

impl Default for WeakSeedOptions {
    fn default() -> Self {
        WeakSeedOptions { gamma: 0.5, t: None }
    }
}

/// Weak-seed parameters: `ε_C = (ε/6m)²`, `δ = ε_C/4`,
/// `k_C = 3 log 1/ε_C + 3`, `t' = ⌈8t/(β - 1/2)⌉`, greedy design over
/// `t'` with `r = n^γ`, seed min-entropy `d - (t' - β t' - log 1/(3√ε_C))`.
pub fn weak_seed_params(
    n: usize,
    eps: f64,
    m: usize,
    beta: f64,
    opts: WeakSeedOptions,
) -> Result<ExtractorParams> {
    check_eps(eps)?;
    if !(beta > 0.5 && beta < 1.0) {
        return param(format!("beta = {beta} outside (1/2, 1)"));
    }
    if m == 0 {
        return param("output length m must be positive");
    }
    if !(opts.gamma > 0.0) || n < 2 {
        return param("need gamma > 0 and n >= 2 so that r = n^gamma > 1");
    }
    let eps_c = (eps / (6.0 * m as f64)).powi(2);
    let delta = eps_c / 4.0;
    let (t, s_bits) = match opts.t {
        Some(t) if t > 0 => (t, (t / 2) as u32),
        Some(_) => return param("t must be positive"),
        None => {
            let code = code_params(n, delta)?;
            (code.t(), code.s())
        }
    };
    let beta_raz = beta - 0.5;
    let t_prime = (8.0 * t as f64 / beta_raz - 1e-9).ceil() as usize;
    let r = (n as f64).powf(opts.gamma);
    let r_exact = BigRational::from_float(r)
        .filter(|r| *r > BigRational::from_integer(1.into()))
        .ok_or_else(|| Error::Parameter(format!("r = n^gamma = {r} must exceed 1")))?;
    let per = ln_ceil_ratio(t_prime as u64, &r_exact)?;
    let d = (t_prime as u64)
        .checked_mul(per)
        .filter(|&d| d <= u32::MAX as u64)
        .ok_or_else(|| Error::SizeGuard(format!("seed length {t_prime}*{per} exceeds 2^32")))?
        as usize;
    let k_c = 3.0 * log_inv(eps_c) + 3.0;
    let s_c = beta * t_prime as f64;
    let slack = log_inv(3.0 * eps_c.sqrt());
    let seed_min_entropy = d as f64 - (t_prime as f64 - s_c - slack);
    Ok(ExtractorParams {
        preset: Some(Preset::Cor4),
        n,
        k: k_c + r * m as f64 + log_inv(eps_c),
        epsilon: eps,
        m,
        d,
        t,
        r,
        delta,
        symbol_bits: s_bits,
        one_bit_error: eps_c,
        one_bit_threshold: k_c,
        design: DesignKind::Greedy { r: r_exact },
        design_blocks: 1,
        weak_seed: Some(WeakSeedFields {
            beta,
            beta_raz,
            gamma: opts.gamma,
            t_prime,
            one_bit_seed_entropy: s_c,
            seed_min_entropy,
            c: d as f64 / t_prime as f64,
        }),
        stage2: None,
    })
}

/// Any preset by tag. The local-extractor preset is not available.
pub fn preset_params(
    preset: Preset,
    n: usize,
    eps: f64,
    m: usize,
    beta: f64,
    opts: WeakSeedOptions,
) -> Result<ExtractorParams> {
    match preset {
        Preset::Cor1 => cor1_params(n, eps, m),
        Preset::Cor2 => cor2_params(n, eps, m),
        Preset::Cor3 => Err(Error::NotImplemented(
            "the local-extractor preset needs a local list-decodable code and a local one-bit \
             extractor, neither of which this toolkit provides"
                .into(),
        )),
        Preset::Cor4 => weak_seed_params(n, eps, m, beta, opts),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RtBound {
    pub m_max: f64,
    pub feasible: bool,
}

/// `m_max = k - 2 log 1/ε`, clamped at 0.
pub fn rt_upper_bound(k: f64, eps: f64) -> Result<RtBound> {
    if k < 0.0 || !(eps > 0.0 && eps <= 1.0) {
        return param("need k >= 0 and 0 < eps <= 1");
    }
    let m = k - 2.0 * log_inv(eps);
    Ok(RtBound {
        m_max: m.max(0.0),
        feasible: m >= 0.0,
    })
}

/// `ε + 2ε'`.
pub fn smooth_budget(eps: f64, eps_prime: f64) -> Result<f64> {
    if eps < 0.0 || eps_prime < 0.0 {
        return param("errors must be nonnegative");
    }
    Ok(eps + 2.0 * eps_prime)
}

/// Builds the design and code for uniform-seed parameters.
pub fn build_instance(p: &ExtractorParams, cache: Option<&DesignCache>) -> Result<TrevisanInstance> {
    if p.weak_seed.is_some() {
        return Err(Error::NotImplemented(
            "extraction with a weak seed needs the seed-transformed one-bit extractor, which is \
             outside this toolkit; only its parameters are computed"
                .into(),
        ));
    }
    let m = p.stage2.as_ref().map_or(p.m, |s| s.m1);
    let code = crate::code_extractor::CodeSpec::new(p.n, p.symbol_bits, p.delta)?;
    let design: WeakDesign = match (&p.design, cache) {
        (DesignKind::Block, Some(c)) => c.block(code.t(), m)?,
        (DesignKind::Block, None) => block_design(code.t(), m)?,
        (DesignKind::Greedy { r }, Some(c)) => c.greedy(code.t(), m, r)?,
        (DesignKind::Greedy { r }, None) => greedy_basic_design(code.t(), m, r)?,
    };
    Ok(TrevisanInstance::new(design, code)?.with_params(p.clone()))
}
