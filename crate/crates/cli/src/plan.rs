use std::str::FromStr;

use clap::Args;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde_json::json;
use trevisan_core::params::{
    preset_params, trevisan_params, DesignKind, ExtractorParams, Preset, WeakSeedOptions,
};
use trevisan_core::{Error, Result};

use crate::ReportFormat;

#[derive(Args, Clone, Debug)]
pub struct PlanArgs {
    /// cor1, cor2, cor3 or cor4.
    #[arg(long, default_value = "cor1")]
    pub preset: String,
    /// Source block length in bits.
    #[arg(long)]
    pub n: usize,
    /// Output bits per block.
    #[arg(long)]
    pub m: usize,
    /// Target error: a decimal, `1e-6`, or `2^-20`.
    #[arg(long, value_parser = parse_eps)]
    pub eps: f64,
    /// Greedy design with this overlap target (`3/2`, `2`, `1.5`) instead of the preset's design.
    #[arg(long, value_parser = parse_ratio)]
    pub r: Option<BigRational>,
    /// Seed min-entropy rate for cor4.
    #[arg(long, default_value_t = 0.75)]
    pub beta: f64,
    /// Design parameter r = n^gamma for cor4.
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    /// One-bit seed length override for cor4.
    #[arg(long)]
    pub t: Option<usize>,
}

pub fn parse_eps(s: &str) -> std::result::Result<f64, String> {
    let v = if let Some(e) = s.strip_prefix("2^") {
        let e: f64 = e.parse().map_err(|_| format!("bad exponent in {s:?}"))?;
        2f64.powf(e)
    } else {
        s.parse().map_err(|_| format!("bad number {s:?}"))?
    };
    if !(v > 0.0 && v < 1.0) {
        return Err(format!("eps = {v} outside (0, 1)"));
    }
    Ok(v)
}

pub fn parse_ratio(s: &str) -> std::result::Result<BigRational, String> {
    if let Ok(r) = BigRational::from_str(s) {
        return Ok(r);
    }
    let f: f64 = s.parse().map_err(|_| format!("bad ratio {s:?}"))?;
    BigRational::from_float(f).ok_or_else(|| format!("bad ratio {s:?}"))
}

impl PlanArgs {
    pub fn resolve(&self) -> Result<ExtractorParams> {
        let preset: Preset = self.preset.parse()?;
        if let Some(r) = &self.r {
            if preset != Preset::Cor1 {
                return Err(Error::Parameter("--r applies to the uniform-seed preset cor1 only".into()));
            }
            if r.to_f64().is_none_or(|v| v <= 1.0) {
                return Err(Error::Parameter("--r must exceed 1".into()));
            }
            return trevisan_params(self.n, self.eps, self.m, DesignKind::Greedy { r: r.clone() });
        }
        let opts = WeakSeedOptions {
            gamma: self.gamma,
            t: self.t,
        };
        preset_params(preset, self.n, self.eps, self.m, self.beta, opts)
    }
}

#[derive(Args, Debug)]
pub struct ParamsArgs {
    #[command(flatten)]
    pub plan: PlanArgs,
    /// Min-entropy the source is claimed to have.
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long, value_enum, default_value = "text")]
    pub report: ReportFormat,
}

pub fn run(args: &ParamsArgs) -> Result<()> {
    let p = args.plan.resolve()?;
    let mut report = p.report();
    if let Some(k) = args.k {
        report.float("k_supplied", k, "");
        report.boolean("k_sufficient", k >= p.k, "k_supplied >= k");
    }
    match args.report {
        ReportFormat::Text => print!("{}", report.to_text()),
        ReportFormat::Machine => {
            let doc = json!({
                "schema_version": report.schema_version,
                "command": "params",
                "report": report,
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
        }
    }
    Ok(())
}
