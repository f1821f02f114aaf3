//! Binary design files, text certificates and the on-disk design cache.
//!
//! Design file layout, all integers little-endian:
//!
//! ```text
//! "WDSN" | version u32 | t u32 | m u32 | d u32
//! | num_len u32 | num bytes | den_len u32 | den bytes     (r_certified)
//! | m·t u32 indices, each set sorted ascending
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::Signed;

use super::{block_design, greedy_basic_design, Construction, DesignCertificate, WeakDesign};
use crate::error::{Error, Result};

pub const DESIGN_MAGIC: &[u8; 4] = b"WDSN";
pub const DESIGN_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_big(out: &mut Vec<u8>, v: &BigInt) -> Result<()> {
    let bytes = v.magnitude().to_bytes_le();
    put_u32(out, bytes.len())?;
    out.extend_from_slice(&bytes);
    Ok(())
}

pub fn design_to_bytes(design: &WeakDesign) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(32 + 4 * design.indices().len());
    out.extend_from_slice(DESIGN_MAGIC);
    out.extend_from_slice(&DESIGN_VERSION.to_le_bytes());
    put_u32(&mut out, design.t())?;
    put_u32(&mut out, design.m())?;
    put_u32(&mut out, design.d())?;
    put_big(&mut out, design.r_certified().numer())?;
    put_big(&mut out, design.r_certified().denom())?;
    for &e in design.indices() {
        out.extend_from_slice(&e.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("design file truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn big(&mut self) -> Result<BigInt> {
        let n = self.u32()? as usize;
        Ok(BigUint::from_bytes_le(self.take(n)?).into())
    }
}

/// Parses a design file. The stored `r_certified` must match the value
/// recomputed from the sets.
pub fn design_from_bytes(buf: &[u8]) -> Result<WeakDesign> {
    let (design, stored) = parse_design(buf)?;
    if *design.r_certified() != stored {
        return Err(Error::Verification {
            index: 0,
            reason: format!(
                "stored r_certified {stored} differs from recomputed {}",
                design.r_certified()
            ),
        });
    }
    Ok(design)
}

/// Parses a design file without comparing the stored `r_certified`, which
/// is returned alongside.
pub fn parse_design(buf: &[u8]) -> Result<(WeakDesign, BigRational)> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(4)? != DESIGN_MAGIC {
        return Err(Error::Format("bad design magic".into()));
    }
    let version = c.u32()?;
    if version != DESIGN_VERSION {
        return Err(Error::Format(format!("unsupported design version {version}")));
    }
    let t = c.u32()? as usize;
    let m = c.u32()? as usize;
    let d = c.u32()? as usize;
    let num = c.big()?;
    let den = c.big()?;
    if !den.is_positive() {
        return Err(Error::Format("zero denominator".into()));
    }
    let count = t
        .checked_mul(m)
        .filter(|&n| n.checked_mul(4) == Some(buf.len() - c.pos))
        .ok_or_else(|| Error::Format("index table length mismatch".into()))?;
    let mut indices = Vec::with_capacity(count);
    for _ in 0..count {
        indices.push(c.u32()?);
    }
    let stored = BigRational::new(num, den);
    let design = WeakDesign::from_flat(t, d, m, indices, Construction::Imported)?;
    Ok((design, stored))
}

/// Plain-text form: header, `t`, `m`, `d`, `r_certified`, then one
/// `set <i> <elements>` line per set.
pub fn design_to_text(design: &WeakDesign) -> String {
    let mut out = format!(
        "WDTXT {DESIGN_VERSION}\nt {}\nm {}\nd {}\nr_certified {}\n",
        design.t(),
        design.m(),
        design.d(),
        design.r_certified()
    );
    for (i, s) in design.sets().enumerate() {
        let elems: Vec<String> = s.iter().map(|e| e.to_string()).collect();
        out.push_str(&format!("set {i} {}\n", elems.join(" ")));
    }
    out
}

pub fn design_from_text(text: &str) -> Result<WeakDesign> {
    let mut lines = text.lines().enumerate();
    let mut next = |key: &str| -> Result<(usize, String)> {
        let (n, l) = lines.next().ok_or_else(|| Error::Format("design text truncated".into()))?;
        let rest = l
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| Error::Format(format!("design text line {}: expected `{key}`", n + 1)))?;
        Ok((n, rest.to_string()))
    };
    let bad = |n: usize| Error::Format(format!("design text line {}: malformed", n + 1));
    let (n, v) = next("WDTXT")?;
    if v != DESIGN_VERSION.to_string() {
        return Err(bad(n));
    }
    let mut int = |key: &str| -> Result<usize> {
        let (n, v) = next(key)?;
        v.parse().map_err(|_| bad(n))
    };
    let t = int("t")?;
    let m = int("m")?;
    let d = int("d")?;
    let (n, r) = next("r_certified")?;
    let stored: BigRational = r.parse().map_err(|_| bad(n))?;
    let mut indices = Vec::with_capacity(t * m);
    for i in 0..m {
        let (n, v) = next("set")?;
        let mut parts = v.split(' ');
        if parts.next().and_then(|p| p.parse::<usize>().ok()) != Some(i) {
            return Err(bad(n));
        }
        let set: Vec<u32> = parts.map(|p| p.parse().map_err(|_| bad(n))).collect::<Result<_>>()?;
        if set.len() != t {
            return Err(bad(n));
        }
        indices.extend(set);
    }
    let design = WeakDesign::from_flat(t, d, m, indices, Construction::Imported)?;
    if *design.r_certified() != stored {
        return Err(Error::Verification {
            index: 0,
            reason: format!("stored r_certified {stored} differs from recomputed {}", design.r_certified()),
        });
    }
    Ok(design)
}

pub fn write_design(design: &WeakDesign, mut w: impl Write) -> Result<()> {
    w.write_all(&design_to_bytes(design)?)?;
    Ok(())
}

pub fn read_design(mut r: impl Read) -> Result<WeakDesign> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    design_from_bytes(&buf)
}

/// Text certificate: a header, `r_certified`, then one `sum <i> <value>`
/// line per set.
pub fn write_certificate(cert: &DesignCertificate, mut w: impl Write) -> Result<()> {
    writeln!(w, "WDCERT {DESIGN_VERSION}")?;
    writeln!(w, "t {}", cert.t)?;
    writeln!(w, "m {}", cert.m)?;
    writeln!(w, "d {}", cert.d)?;
    match &cert.construction {
        Construction::Greedy { r_target } => writeln!(w, "method greedy {r_target}")?,
        Construction::Block { sizes } => {
            let s: Vec<String> = sizes.iter().map(|b| b.to_string()).collect();
            writeln!(w, "method block {}", s.join(","))?
        }
        Construction::Imported => writeln!(w, "method imported")?,
    }
    writeln!(w, "r_certified {}", cert.r_certified)?;
    for (i, s) in cert.sums.iter().enumerate() {
        writeln!(w, "sum {i} {s}")?;
    }
    Ok(())
}

fn bad(line: usize, what: &str) -> Error {
    Error::Format(format!("certificate line {}: {what}", line + 1))
}

pub fn read_certificate(mut r: impl Read) -> Result<DesignCertificate> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut lines = text.lines().enumerate();
    let mut next = |key: &str| -> Result<(usize, String)> {
        let (n, l) = lines.next().ok_or_else(|| Error::Format("certificate truncated".into()))?;
        let rest = l
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| bad(n, &format!("expected `{key}`")))?;
        Ok((n, rest.to_string()))
    };
    let (n, v) = next("WDCERT")?;
    if v != DESIGN_VERSION.to_string() {
        return Err(bad(n, "unsupported version"));
    }
    let num = |(n, v): (usize, String)| v.parse::<usize>().map_err(|_| bad(n, "bad integer"));
    let t = num(next("t")?)?;
    let m = num(next("m")?)?;
    let d = num(next("d")?)?;
    let (n, method) = next("method")?;
    let construction = if let Some(r) = method.strip_prefix("greedy ") {
        Construction::Greedy {
            r_target: r.parse().map_err(|_| bad(n, "bad r_target"))?,
        }
    } else if let Some(s) = method.strip_prefix("block ") {
        Construction::Block {
            sizes: s
                .split(',')
                .map(|b| b.parse().map_err(|_| bad(n, "bad block size")))
                .collect::<Result<_>>()?,
        }
    } else if method == "imported" {
        Construction::Imported
    } else {
        return Err(bad(n, "unknown method"));
    };
    let (n, r) = next("r_certified")?;
    let r_certified: BigRational = r.parse().map_err(|_| bad(n, "bad rational"))?;
    let mut sums = Vec::with_capacity(m);
    for i in 0..m {
        let (n, v) = next("sum")?;
        let (idx, val) = v.split_once(' ').ok_or_else(|| bad(n, "bad sum line"))?;
        if idx.parse::<usize>().ok() != Some(i) {
            return Err(bad(n, "sum lines out of order"));
        }
        sums.push(val.parse::<BigUint>().map_err(|_| bad(n, "bad sum"))?);
    }
    Ok(DesignCertificate {
        t,
        m,
        d,
        sums,
        r_certified,
        construction,
    })
}

/// Designs stored under a directory, keyed by `(t, m, r_target, version,
/// construction)`.
#[derive(Clone, Debug)]
pub struct DesignCache {
    dir: PathBuf,
}

impl DesignCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        DesignCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, t: usize, m: usize, r_target: &BigRational, method: &str) -> PathBuf {
        self.dir.join(format!(
            "design-t{t}-m{m}-r{}_{}-v{DESIGN_VERSION}-{method}.wd",
            r_target.numer(),
            r_target.denom()
        ))
    }

    fn load_or(&self, path: PathBuf, build: impl FnOnce() -> Result<WeakDesign>) -> Result<WeakDesign> {
        if let Ok(bytes) = fs::read(&path) {
            if let Ok(d) = design_from_bytes(&bytes) {
                return Ok(d);
            }
        }
        let design = build()?;
        fs::create_dir_all(&self.dir)?;
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, design_to_bytes(&design)?)?;
        fs::rename(&tmp, &path)?;
        Ok(design)
    }

    pub fn block(&self, t: usize, m: usize) -> Result<WeakDesign> {
        let one = BigRational::from_integer(1.into());
        let path = self.path_for(t, m, &one, "block");
        let sizes = super::block_sizes(m);
        Ok(self
            .load_or(path, || block_design(t, m))?
            .with_construction(Construction::Block { sizes }))
    }

    pub fn greedy(&self, t: usize, m: usize, r_target: &BigRational) -> Result<WeakDesign> {
        let path = self.path_for(t, m, r_target, "greedy");
        Ok(self
            .load_or(path, || greedy_basic_design(t, m, r_target))?
            .with_construction(Construction::Greedy {
                r_target: r_target.clone(),
            }))
    }
}
