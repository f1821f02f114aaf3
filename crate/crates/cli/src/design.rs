use std::fs::{self, File};
use std::path::{Path, PathBuf};

use clap::{Subcommand, ValueEnum};
use num_rational::BigRational;
use trevisan_core::weak_design::{
    block_design, design_from_bytes, design_from_text, design_to_bytes, design_to_text,
    greedy_basic_design, parse_design, read_certificate, verify_design, write_certificate,
};
use trevisan_core::{Error, Result};

use crate::plan::parse_ratio;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Block,
    Greedy,
}

#[derive(Subcommand, Debug)]
pub enum DesignCmd {
    /// Build a design and write it with its overlap certificate (`<out>.cert`).
    Generate {
        #[arg(long)]
        t: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, value_enum, default_value = "block")]
        method: Method,
        /// Overlap target for the greedy method.
        #[arg(long, value_parser = parse_ratio)]
        r: Option<BigRational>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute every overlap sum and compare with the certificate.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        /// Defaults to `<in>.cert`.
        #[arg(long)]
        cert: Option<PathBuf>,
    },
    /// Binary design to text.
    Export {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Text design to binary.
    Import {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn cert_path_for(p: &Path) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(".cert");
    PathBuf::from(s)
}

pub fn run(cmd: &DesignCmd) -> Result<()> {
    match cmd {
        DesignCmd::Generate { t, m, method, r, out } => {
            let design = match method {
                Method::Block => {
                    if r.is_some() {
                        return Err(Error::Parameter("--r applies to --method greedy only".into()));
                    }
                    block_design(*t, *m)?
                }
                Method::Greedy => {
                    let r = r
                        .clone()
                        .ok_or_else(|| Error::Parameter("--method greedy needs --r".into()))?;
                    greedy_basic_design(*t, *m, &r)?
                }
            };
            let cert = verify_design(&design, design.r_certified())?;
            fs::write(out, design_to_bytes(&design)?)?;
            write_certificate(&cert, File::create(cert_path_for(out))?)?;
            println!(
                "t {} m {} d {} r_certified {}",
                design.t(),
                design.m(),
                design.d(),
                design.r_certified()
            );
            Ok(())
        }
        DesignCmd::Verify { input, cert } => {
            let (design, stored) = parse_design(&fs::read(input)?)?;
            let cert_file = cert.clone().unwrap_or_else(|| cert_path_for(input));
            let claimed = read_certificate(File::open(&cert_file)?)?;
            if (claimed.t, claimed.m, claimed.d) != (design.t(), design.m(), design.d()) {
                return Err(Error::Verification {
                    index: 0,
                    reason: format!(
                        "certificate describes (t, m, d) = ({}, {}, {}), design has ({}, {}, {})",
                        claimed.t,
                        claimed.m,
                        claimed.d,
                        design.t(),
                        design.m(),
                        design.d()
                    ),
                });
            }
            let actual = verify_design(&design, &claimed.r_certified)?;
            if let Some(i) = (0..actual.sums.len()).find(|&i| actual.sums[i] != claimed.sums[i]) {
                return Err(Error::Verification {
                    index: i,
                    reason: format!(
                        "overlap sum is {}, certificate records {}",
                        actual.sums[i], claimed.sums[i]
                    ),
                });
            }
            if actual.r_certified != stored {
                return Err(Error::Verification {
                    index: 0,
                    reason: format!(
                        "design header claims r = {stored}, overlap sums give {}",
                        actual.r_certified
                    ),
                });
            }
            println!(
                "ok: {} sets verified, r_certified {}",
                design.m(),
                actual.r_certified
            );
            Ok(())
        }
        DesignCmd::Export { input, out } => {
            let design = design_from_bytes(&fs::read(input)?)?;
            fs::write(out, design_to_text(&design))?;
            Ok(())
        }
        DesignCmd::Import { input, out } => {
            let design = design_from_text(&fs::read_to_string(input)?)?;
            fs::write(out, design_to_bytes(&design)?)?;
            Ok(())
        }
    }
}
