//! Versioned text records of micro instances and their exact distances.
//!
//! ```text
//! TRVEC 1
//! record toeplitz-4-2
//! field n 4
//! dist total 3/16
//! end
//! ```

use std::io::{BufRead, BufReader, Read, Write};

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::entropy::Prob;
use crate::error::{Error, Result};

pub const TEST_VECTOR_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TestVector {
    pub label: String,
    pub fields: Vec<(String, String)>,
    pub distances: Vec<(String, Prob)>,
}

fn check_token(s: &str) -> Result<()> {
    if s.is_empty() || s.contains(char::is_whitespace) {
        return Err(Error::Format(format!("token {s:?} is empty or contains whitespace")));
    }
    Ok(())
}

pub fn write_test_vectors(vectors: &[TestVector], mut w: impl Write) -> Result<()> {
    writeln!(w, "TRVEC {TEST_VECTOR_VERSION}")?;
    for v in vectors {
        check_token(&v.label)?;
        writeln!(w, "record {}", v.label)?;
        for (k, val) in &v.fields {
            check_token(k)?;
            check_token(val)?;
            writeln!(w, "field {k} {val}")?;
        }
        for (k, p) in &v.distances {
            check_token(k)?;
            writeln!(w, "dist {k} {}/{}", p.numer(), p.denom())?;
        }
        writeln!(w, "end")?;
    }
    Ok(())
}

pub fn read_test_vectors(r: impl Read) -> Result<Vec<TestVector>> {
    let mut lines = BufReader::new(r).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != format!("TRVEC {TEST_VECTOR_VERSION}") {
        return Err(Error::Format(format!("unexpected header {header:?}")));
    }
    let bad = |no: usize, line: &str| Error::Format(format!("line {}: {line:?}", no + 2));
    let mut out = Vec::new();
    let mut cur: Option<TestVector> = None;
    for (no, line) in lines.enumerate() {
        let line = line?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        match (parts.as_slice(), cur.as_mut()) {
            ([], _) => {}
            (["record", label], None) => {
                cur = Some(TestVector {
                    label: label.to_string(),
                    fields: Vec::new(),
                    distances: Vec::new(),
                })
            }
            (["field", k, v], Some(c)) => c.fields.push((k.to_string(), v.to_string())),
            (["dist", k, v], Some(c)) => {
                let (num, den) = v.split_once('/').ok_or_else(|| bad(no, &line))?;
                let num: BigInt = num.parse().map_err(|_| bad(no, &line))?;
                let den: BigInt = den.parse().map_err(|_| bad(no, &line))?;
                if den == BigInt::from(0) {
                    return Err(bad(no, &line));
                }
                c.distances.push((k.to_string(), BigRational::new(num, den)));
            }
            (["end"], Some(_)) => out.push(cur.take().expect("open record")),
            _ => return Err(bad(no, &line)),
        }
    }
    if cur.is_some() {
        return Err(Error::Format("unterminated record".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::ratio;

    #[test]
    fn round_trip() {
        let v = vec![
            TestVector {
                label: "toeplitz-4-2".into(),
                fields: vec![("n".into(), "4".into()), ("support".into(), "0,5,10,15".into())],
                distances: vec![("total".into(), ratio(3, 16)), ("first".into(), ratio(0, 1))],
            },
            TestVector {
                label: "empty".into(),
                fields: vec![],
                distances: vec![],
            },
        ];
        let mut buf = Vec::new();
        write_test_vectors(&v, &mut buf).unwrap();
        assert!(buf.starts_with(b"TRVEC 1\nrecord toeplitz-4-2\n"));
        assert_eq!(read_test_vectors(&buf[..]).unwrap(), v);
    }

    #[test]
    fn rejects_malformed() {
        assert!(read_test_vectors(&b"TRVEC 2\n"[..]).is_err());
        assert!(read_test_vectors(&b"TRVEC 1\nrecord a\ndist x 1/0\nend\n"[..]).is_err());
        assert!(read_test_vectors(&b"TRVEC 1\nrecord a\n"[..]).is_err());
        assert!(read_test_vectors(&b"TRVEC 1\nfield a b\n"[..]).is_err());
        let bad = TestVector {
            label: "has space".into(),
            fields: vec![],
            distances: vec![],
        };
        assert!(write_test_vectors(&[bad], Vec::new()).is_err());
    }
}
