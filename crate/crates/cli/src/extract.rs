use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use clap::Args;
use num_rational::BigRational;
use rand::rngs::OsRng;
use rand::RngCore;
use serde_json::json;
use trevisan_core::params::{build_instance, DesignKind, ExtractorParams};
use trevisan_core::trevisan::{extract_stream_with, StreamReport, StreamSeed};
use trevisan_core::universal_hash::{Advertised, Composed, SeededExtractor, ToeplitzSpec};
use trevisan_core::weak_design::{verify_design, DesignCache};
use trevisan_core::{BitString, Error, Result};

use crate::plan::PlanArgs;
use crate::ReportFormat;

#[derive(Args, Debug)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub plan: PlanArgs,
    /// Min-entropy the source is claimed to have per block.
    #[arg(long)]
    pub k: Option<f64>,
    /// Seed bits, MSB first. Without it a seed is drawn from the system and
    /// written to `<out>.seed`.
    #[arg(long)]
    pub seed_file: Option<PathBuf>,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for cached designs.
    #[arg(long)]
    pub design_cache: Option<PathBuf>,
    /// Use one seed for every block instead of fresh seed bits per block.
    #[arg(long)]
    pub reuse_seed: bool,
    /// Recompute the design's overlap sums before extracting.
    #[arg(long)]
    pub exact_verify: bool,
    /// Proceed when the claimed k is below the threshold.
    #[arg(long)]
    pub force: bool,
    #[arg(long, value_enum, default_value = "text")]
    pub report: ReportFormat,
}

fn design_target(p: &ExtractorParams) -> BigRational {
    match &p.design {
        DesignKind::Block => BigRational::from_integer(1.into()),
        DesignKind::Greedy { r } => r.clone(),
    }
}

fn load_seed(args: &ExtractArgs, d: usize, n: usize) -> Result<(BitString, String)> {
    if let Some(path) = &args.seed_file {
        let bytes = fs::read(path)?;
        let bits = BitString::from_bytes(&bytes, bytes.len() * 8)?;
        if args.reuse_seed {
            if bits.len() < d || bits.len() >= d + 8 {
                return Err(Error::Parameter(format!(
                    "seed file holds {} bits, a reused seed needs exactly {d} (padded to {} bytes)",
                    bits.len(),
                    d.div_ceil(8)
                )));
            }
            return Ok((bits.slice(0, d), path.display().to_string()));
        }
        return Ok((bits, path.display().to_string()));
    }
    let need = if args.reuse_seed {
        d
    } else {
        let input_bits = fs::metadata(&args.input)?.len() as usize * 8;
        (input_bits / n) * d
    };
    let mut bytes = vec![0u8; need.div_ceil(8)];
    OsRng.fill_bytes(&mut bytes);
    let seed_path = seed_path_for(&args.out);
    fs::write(&seed_path, &bytes)?;
    let bits = BitString::from_bytes(&bytes, bytes.len() * 8)?;
    let bits = if args.reuse_seed { bits.slice(0, d) } else { bits };
    Ok((bits, seed_path.display().to_string()))
}

pub fn seed_path_for(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".seed");
    PathBuf::from(s)
}

pub fn run(args: &ExtractArgs) -> Result<()> {
    let p = args.plan.resolve()?;
    if let Some(k) = args.k {
        if k < p.k {
            eprintln!(
                "warning: claimed min-entropy {k} is below the threshold k = {:.3} for eps = {}",
                p.k, p.epsilon
            );
            if !args.force {
                return Err(Error::Parameter("source min-entropy below threshold (use --force)".into()));
            }
        }
    }
    let cache = args.design_cache.as_ref().map(DesignCache::new);
    let inst = build_instance(&p, cache.as_ref())?;
    if args.exact_verify {
        verify_design(inst.design(), &design_target(&p))?;
    }
    let toeplitz;
    let composed;
    let ext: &dyn SeededExtractor = match &p.stage2 {
        Some(s2) => {
            toeplitz = ToeplitzSpec::new(p.n, s2.m2)?;
            composed = Composed::new(
                &inst,
                Advertised { k: s2.k1.max(p.k), eps: s2.eps1 },
                &toeplitz,
                Advertised { k: s2.m2 as f64 + s2.stage2_loss, eps: s2.eps2 },
            )?;
            &composed
        }
        None => &inst,
    };
    let (seed_bits, seed_source) = load_seed(args, ext.d(), p.n)?;
    let seed = if args.reuse_seed {
        StreamSeed::Reused(seed_bits)
    } else {
        StreamSeed::Fresh(seed_bits)
    };
    let input = BufReader::new(File::open(&args.input)?);
    let output = BufWriter::new(File::create(&args.out)?);
    let stream = extract_stream_with(ext, Some(p.epsilon), input, &seed, output)?;
    print_report(args, &p, &stream, &seed_source);
    Ok(())
}

fn print_report(args: &ExtractArgs, p: &ExtractorParams, s: &StreamReport, seed_source: &str) {
    let mut report = p.report();
    if let Some(k) = args.k {
        report.float("k_supplied", k, "");
    }
    report.int("blocks", s.blocks, "");
    report.boolean("seed_reused", s.seed_reused, "");
    report.text("seed_source", seed_source, "");
    if let Some(e) = s.joint_error {
        report.float("joint_error", e, "blocks * eps, shared seed");
    }
    match args.report {
        ReportFormat::Text => print!("{}", report.to_text()),
        ReportFormat::Machine => {
            let doc = json!({
                "schema_version": report.schema_version,
                "command": "extract",
                "report": report,
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
        }
    }
}
