//! Dense polynomials over GF(2), used to find and certify the irreducible
//! moduli of the binary extension fields.

/// Bit `i` (limb `i / 64`, bit `i % 64`) is the coefficient of `x^i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gf2x {
    limbs: Vec<u64>,
}

impl Gf2x {
    pub fn zero() -> Self {
        Gf2x { limbs: Vec::new() }
    }

    pub fn one() -> Self {
        Gf2x { limbs: vec![1] }
    }

    pub fn monomial(deg: usize) -> Self {
        let mut limbs = vec![0; deg / 64 + 1];
        limbs[deg / 64] = 1 << (deg % 64);
        Gf2x { limbs }
    }

    pub fn from_limbs(limbs: &[u64]) -> Self {
        let mut p = Gf2x {
            limbs: limbs.to_vec(),
        };
        p.trim();
        p
    }

    pub fn limbs(&self) -> &[u64] {
        &self.limbs
    }

    fn trim(&mut self) {
        while self.limbs.last() == Some(&0) {
            self.limbs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.limbs.is_empty()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        let top = *self.limbs.last()?;
        Some((self.limbs.len() - 1) * 64 + 63 - top.leading_zeros() as usize)
    }

    pub fn coeff(&self, i: usize) -> bool {
        self.limbs
            .get(i / 64)
            .is_some_and(|l| (l >> (i % 64)) & 1 == 1)
    }

    pub fn add(&self, other: &Gf2x) -> Gf2x {
        let n = self.limbs.len().max(other.limbs.len());
        let mut limbs = vec![0; n];
        for (i, l) in limbs.iter_mut().enumerate() {
            *l = self.limbs.get(i).copied().unwrap_or(0) ^ other.limbs.get(i).copied().unwrap_or(0);
        }
        Gf2x::from_limbs(&limbs)
    }

    fn xor_shifted(&mut self, other: &Gf2x, shift: usize) {
        let ls = shift / 64;
        let bs = shift % 64;
        let need = other.limbs.len() + ls + 1;
        if self.limbs.len() < need {
            self.limbs.resize(need, 0);
        }
        for (i, &l) in other.limbs.iter().enumerate() {
            self.limbs[i + ls] ^= l << bs;
            if bs != 0 {
                self.limbs[i + ls + 1] ^= l >> (64 - bs);
            }
        }
        self.trim();
    }

    pub fn mul(&self, other: &Gf2x) -> Gf2x {
        let mut out = Gf2x::zero();
        if let Some(deg) = other.degree() {
            for i in 0..=deg {
                if other.coeff(i) {
                    out.xor_shifted(self, i);
                }
            }
        }
        out
    }

    pub fn rem(&self, modulus: &Gf2x) -> Gf2x {
        let md = modulus.degree().expect("division by zero polynomial");
        let mut r = self.clone();
        while let Some(rd) = r.degree() {
            if rd < md {
                break;
            }
            r.xor_shifted(modulus, rd - md);
        }
        r
    }

    pub fn gcd(&self, other: &Gf2x) -> Gf2x {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        a
    }

    pub fn mul_mod(&self, other: &Gf2x, modulus: &Gf2x) -> Gf2x {
        self.mul(other).rem(modulus)
    }
}

/// Ben-Or's test: a degree-`s` polynomial `f` is irreducible over GF(2) iff
/// `gcd(x^(2^i) - x mod f, f) = 1` for every `1 <= i <= s/2`.
pub fn is_irreducible(f: &Gf2x) -> bool {
    let Some(s) = f.degree() else {
        return false;
    };
    if s == 0 {
        return false;
    }
    if s == 1 {
        return true;
    }
    if !f.coeff(0) {
        return false;
    }
    let x = Gf2x::monomial(1);
    let mut power = x.clone();
    for _ in 1..=s / 2 {
        power = power.mul_mod(&power, f);
        let g = f.gcd(&power.add(&x));
        if g.degree() != Some(0) {
            return false;
        }
    }
    true
}

/// The lexicographically least irreducible polynomial of degree `s`: the one
/// whose coefficient vector, read from `x^s` down to `x^0` as a binary number,
/// is smallest. Returned without its leading `x^s` term.
pub fn least_irreducible_low(s: usize) -> Gf2x {
    assert!(s >= 1);
    if s == 1 {
        // x is the least irreducible of degree 1.
        return Gf2x::zero();
    }
    let lead = Gf2x::monomial(s);
    // Candidates with a zero constant term are divisible by x.
    let mut low: u64 = 1;
    loop {
        let low_poly = Gf2x::from_limbs(&[low]);
        if is_irreducible(&lead.add(&low_poly)) {
            return low_poly;
        }
        low += 2;
    }
}
