use std::collections::HashMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

use super::gf2x::{least_irreducible_low, Gf2x};
use super::prime::is_prime;
use crate::error::{param, Error, Result};

/// Largest supported extension degree for GF(2^s).
pub const MAX_SYMBOL_BITS: u32 = 256;

pub(crate) const LIMBS: usize = 4;

/// Little-endian limbs; bit `b` is the coefficient of `x^b` for binary
/// fields, or the integer value for prime fields.
pub type Limbs = [u64; LIMBS];

/// Low part (the modulus minus `x^s`) of the lexicographically least
/// irreducible polynomial of degree `s`, for `s = 1..=32`. Larger degrees are
/// searched on demand with the same rule.
pub const LEAST_IRREDUCIBLE_LOW: [u64; 32] = [
    0x0, 0x3, 0x3, 0x3, 0x5, 0x3, 0x3, 0x1b, 0x3, 0x9, 0x5, 0x9, 0x1b, 0x21, 0x3, 0x2b, 0x9, 0x9,
    0x27, 0x9, 0x5, 0x3, 0x21, 0x1b, 0x9, 0x1b, 0x27, 0x3, 0x5, 0x3, 0x9, 0x8d,
];

fn modulus_low(s: u32) -> Limbs {
    if (1..=32).contains(&s) {
        return [LEAST_IRREDUCIBLE_LOW[s as usize - 1], 0, 0, 0];
    }
    static CACHE: OnceLock<Mutex<HashMap<u32, Limbs>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("modulus cache poisoned");
    *guard.entry(s).or_insert_with(|| {
        let low = least_irreducible_low(s as usize);
        let mut out = [0u64; LIMBS];
        for (o, l) in out.iter_mut().zip(low.limbs()) {
            *o = *l;
        }
        out
    })
}

/// GF(2^s) with the fixed least irreducible modulus.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct BinaryField {
    degree: u32,
    low: Limbs,
}

/// GF(p) for a prime `p < 2^32`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PrimeField {
    p: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Field {
    Prime(PrimeField),
    Binary(BinaryField),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    field: Field,
    value: Limbs,
}

#[inline]
fn xor_into(a: &mut Limbs, b: &Limbs) {
    for i in 0..LIMBS {
        a[i] ^= b[i];
    }
}

#[inline]
fn bit(v: &Limbs, i: u32) -> bool {
    (v[(i / 64) as usize] >> (i % 64)) & 1 == 1
}

impl BinaryField {
    pub fn new(degree: u32) -> Result<Self> {
        if degree == 0 || degree > MAX_SYMBOL_BITS {
            return Err(Error::Unsupported(format!(
                "binary field degree {degree} outside 1..={MAX_SYMBOL_BITS}"
            )));
        }
        Ok(BinaryField {
            degree,
            low: modulus_low(degree),
        })
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// The modulus including its leading `x^s` term.
    pub fn modulus(&self) -> Gf2x {
        Gf2x::from_limbs(&self.low).add(&Gf2x::monomial(self.degree as usize))
    }

    pub fn contains(&self, v: &Limbs) -> bool {
        let s = self.degree as usize;
        (0..LIMBS).all(|i| {
            let lo = i * 64;
            if lo >= s {
                v[i] == 0
            } else if s - lo >= 64 {
                true
            } else {
                v[i] >> (s - lo) == 0
            }
        })
    }

    /// Multiplies by `x` in place.
    #[inline]
    pub(crate) fn mul_x(&self, v: &mut Limbs) {
        let top = bit(v, self.degree - 1);
        let mut carry = 0u64;
        for limb in v.iter_mut() {
            let next = *limb >> 63;
            *limb = (*limb << 1) | carry;
            carry = next;
        }
        // Clear x^s; at the maximum degree it was already shifted out.
        let s = self.degree;
        if s < MAX_SYMBOL_BITS {
            v[(s / 64) as usize] &= !(1u64 << (s % 64));
        }
        if top {
            xor_into(v, &self.low);
        }
    }

    /// Bit-serial multiplication.
    pub(crate) fn mul_raw(&self, a: &Limbs, b: &Limbs) -> Limbs {
        let mut acc = [0u64; LIMBS];
        for i in (0..self.degree).rev() {
            self.mul_x(&mut acc);
            if bit(b, i) {
                xor_into(&mut acc, a);
            }
        }
        acc
    }

    pub(crate) fn pow_raw(&self, a: &Limbs, mut e: Vec<u64>) -> Limbs {
        // e is little-endian limbs of the exponent.
        let mut result = [0u64; LIMBS];
        result[0] = 1;
        let mut base = *a;
        while e.iter().any(|&l| l != 0) {
            if e[0] & 1 == 1 {
                result = self.mul_raw(&result, &base);
            }
            base = self.mul_raw(&base, &base);
            let mut carry = 0;
            for l in e.iter_mut().rev() {
                let next = *l & 1;
                *l = (*l >> 1) | (carry << 63);
                carry = next;
            }
        }
        result
    }

    /// Precomputes multiplication by a fixed element.
    pub fn mul_table(&self, a: &Limbs) -> MulTable {
        MulTable::new(self, a)
    }
}

impl fmt::Debug for BinaryField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF(2^{})", self.degree)
    }
}

/// Multiplication by a fixed field element using 4-bit windows: the product
/// `c * a` is the XOR of `table[w][nibble_w(c)]` over all windows `w`.
#[derive(Clone)]
pub struct MulTable {
    windows: Vec<[Limbs; 16]>,
}

impl MulTable {
    fn new(field: &BinaryField, a: &Limbs) -> Self {
        let nwin = field.degree.div_ceil(4) as usize;
        let mut windows = Vec::with_capacity(nwin);
        let mut base = *a;
        for _ in 0..nwin {
            let mut entry = [[0u64; LIMBS]; 16];
            let mut b = base;
            for k in 0..4 {
                let bitval = 1usize << k;
                entry[bitval] = b;
                field.mul_x(&mut b);
            }
            for idx in 1..16usize {
                if idx.count_ones() > 1 {
                    let low = idx & idx.wrapping_neg();
                    let mut v = entry[low];
                    xor_into(&mut v, &entry[idx ^ low]);
                    entry[idx] = v;
                }
            }
            windows.push(entry);
            base = b;
        }
        MulTable { windows }
    }

    #[inline]
    pub fn mul(&self, c: &Limbs) -> Limbs {
        let mut acc = [0u64; LIMBS];
        for (w, entry) in self.windows.iter().enumerate() {
            let shift = w * 4;
            let nib = ((c[shift / 64] >> (shift % 64)) & 0xf) as usize;
            if nib != 0 {
                xor_into(&mut acc, &entry[nib]);
            }
        }
        acc
    }
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self> {
        if p >= 1 << 32 || !is_prime(p) {
            return param(format!("{p} is not a prime below 2^32"));
        }
        Ok(PrimeField { p })
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }
}

impl Field {
    pub fn prime(p: u64) -> Result<Field> {
        Ok(Field::Prime(PrimeField::new(p)?))
    }

    pub fn binary(s: u32) -> Result<Field> {
        Ok(Field::Binary(BinaryField::new(s)?))
    }

    /// Number of elements, if it fits in a `u64`.
    pub fn order(&self) -> Option<u64> {
        match self {
            Field::Prime(f) => Some(f.p),
            Field::Binary(f) if f.degree < 64 => Some(1u64 << f.degree),
            Field::Binary(_) => None,
        }
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement {
            field: *self,
            value: [0; LIMBS],
        }
    }

    pub fn one(&self) -> FieldElement {
        let mut value = [0; LIMBS];
        value[0] = 1;
        FieldElement {
            field: *self,
            value,
        }
    }

    pub fn element(&self, value: u64) -> Result<FieldElement> {
        let mut limbs = [0; LIMBS];
        limbs[0] = value;
        self.element_from_limbs(limbs)
    }

    pub fn element_from_limbs(&self, value: Limbs) -> Result<FieldElement> {
        let ok = match self {
            Field::Prime(f) => value[1..].iter().all(|&l| l == 0) && value[0] < f.p,
            Field::Binary(f) => f.contains(&value),
        };
        if !ok {
            return param(format!("value {value:?} outside {self:?}"));
        }
        Ok(FieldElement {
            field: *self,
            value,
        })
    }

    /// All elements in ascending order of their representative.
    pub fn elements(&self) -> impl Iterator<Item = FieldElement> + '_ {
        let order = self.order().expect("field too large to enumerate");
        (0..order).map(move |v| self.element(v).expect("in range"))
    }
}

impl FieldElement {
    pub fn field(&self) -> Field {
        self.field
    }

    pub fn limbs(&self) -> &Limbs {
        &self.value
    }

    /// The representative as a `u64`; panics for wider binary elements.
    pub fn value(&self) -> u64 {
        assert!(self.value[1..].iter().all(|&l| l == 0), "element wider than 64 bits");
        self.value[0]
    }

    pub fn is_zero(&self) -> bool {
        self.value.iter().all(|&l| l == 0)
    }

    fn check(&self, other: &FieldElement) -> Result<()> {
        if self.field != other.field {
            return param(format!(
                "field mismatch: {:?} vs {:?}",
                self.field, other.field
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &FieldElement) -> Result<FieldElement> {
        self.check(other)?;
        let mut value = self.value;
        match self.field {
            Field::Prime(f) => value[0] = (self.value[0] + other.value[0]) % f.p,
            Field::Binary(_) => xor_into(&mut value, &other.value),
        }
        Ok(FieldElement {
            field: self.field,
            value,
        })
    }

    pub fn neg(&self) -> FieldElement {
        match self.field {
            Field::Prime(f) => {
                let mut value = self.value;
                value[0] = (f.p - self.value[0]) % f.p;
                FieldElement {
                    field: self.field,
                    value,
                }
            }
            Field::Binary(_) => *self,
        }
    }

    pub fn sub(&self, other: &FieldElement) -> Result<FieldElement> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &FieldElement) -> Result<FieldElement> {
        self.check(other)?;
        let value = match self.field {
            Field::Prime(f) => {
                let mut v = [0; LIMBS];
                v[0] = ((self.value[0] as u128 * other.value[0] as u128) % f.p as u128) as u64;
                v
            }
            Field::Binary(f) => f.mul_raw(&self.value, &other.value),
        };
        Ok(FieldElement {
            field: self.field,
            value,
        })
    }

    /// Multiplicative inverse via `a^(order - 2)`.
    pub fn inv(&self) -> Result<FieldElement> {
        if self.is_zero() {
            return param("inverse of zero");
        }
        let value = match self.field {
            Field::Prime(f) => {
                let mut v = [0; LIMBS];
                v[0] = pow_mod(self.value[0], f.p - 2, f.p);
                v
            }
            Field::Binary(f) => {
                // 2^s - 2 as little-endian limbs.
                let s = f.degree as usize;
                let mut e = vec![u64::MAX; s.div_ceil(64)];
                if s % 64 != 0 {
                    *e.last_mut().unwrap() = (1u64 << (s % 64)) - 1;
                }
                e[0] &= !1;
                f.pow_raw(&self.value, e)
            }
        };
        Ok(FieldElement {
            field: self.field,
            value,
        })
    }
}

pub(crate) fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1u128 % m as u128;
    let mut base = b as u128 % m as u128;
    while e > 0 {
        if e & 1 == 1 {
            r = r * base % m as u128;
        }
        base = base * base % m as u128;
        e >>= 1;
    }
    b = r as u64;
    b
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.field {
            Field::Prime(pf) => write!(f, "{} mod {}", self.value[0], pf.p),
            Field::Binary(bf) => {
                write!(f, "0b")?;
                for i in (0..bf.degree).rev() {
                    write!(f, "{}", bit(&self.value, i) as u8)?;
                }
                write!(f, " in GF(2^{})", bf.degree)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitfield::gf2x::is_irreducible;

    fn small_fields() -> Vec<Field> {
        let mut v: Vec<Field> = [2u64, 3, 5, 7, 11, 13]
            .iter()
            .map(|&p| Field::prime(p).unwrap())
            .collect();
        v.extend((1..=4).map(|s| Field::binary(s).unwrap()));
        v
    }

    #[test]
    fn moduli_table_is_least_irreducible() {
        for s in 1..=32u32 {
            let f = BinaryField::new(s).unwrap();
            assert!(is_irreducible(&f.modulus()), "degree {s}");
            // Every smaller odd candidate must be reducible.
            let low = LEAST_IRREDUCIBLE_LOW[s as usize - 1];
            let lead = Gf2x::monomial(s as usize);
            let mut c = 1;
            while c < low {
                assert!(!is_irreducible(&lead.add(&Gf2x::from_limbs(&[c]))), "s={s} c={c:#x}");
                c += 2;
            }
        }
    }

    #[test]
    fn large_degree_moduli_are_irreducible() {
        for s in [33u32, 64, 65, 127, 128, 130, 200, 256] {
            let f = BinaryField::new(s).unwrap();
            assert!(is_irreducible(&f.modulus()), "degree {s}");
        }
        assert!(BinaryField::new(257).is_err());
        assert!(BinaryField::new(0).is_err());
    }

    // Exhaustive axioms for every field of order <= 16 (triples) and pairwise
    // axioms up to order 256.
    #[test]
    fn field_axioms_small_exhaustive() {
        for f in small_fields() {
            let els: Vec<_> = f.elements().collect();
            let zero = f.zero();
            let one = f.one();
            for a in &els {
                assert_eq!(a.add(&zero).unwrap(), *a);
                assert_eq!(a.mul(&one).unwrap(), *a);
                assert!(a.add(&a.neg()).unwrap().is_zero());
                if !a.is_zero() {
                    assert_eq!(a.mul(&a.inv().unwrap()).unwrap(), one, "{a:?}");
                }
                for b in &els {
                    assert_eq!(a.add(b).unwrap(), b.add(a).unwrap());
                    assert_eq!(a.mul(b).unwrap(), b.mul(a).unwrap());
                    for c in &els {
                        let ab_c = a.mul(b).unwrap().mul(c).unwrap();
                        assert_eq!(ab_c, a.mul(&b.mul(c).unwrap()).unwrap());
                        let lhs = a.mul(&b.add(c).unwrap()).unwrap();
                        let rhs = a.mul(b).unwrap().add(&a.mul(c).unwrap()).unwrap();
                        assert_eq!(lhs, rhs);
                        assert_eq!(
                            a.add(b).unwrap().add(c).unwrap(),
                            a.add(&b.add(c).unwrap()).unwrap()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn field_axioms_order_256() {
        for f in [Field::binary(8).unwrap(), Field::binary(7).unwrap(), Field::prime(251).unwrap()] {
            let els: Vec<_> = f.elements().collect();
            for a in &els {
                if !a.is_zero() {
                    assert_eq!(a.mul(&a.inv().unwrap()).unwrap(), f.one());
                }
                for b in &els {
                    assert_eq!(a.mul(b).unwrap(), b.mul(a).unwrap());
                    // Sampled third operand keeps this pairwise-cost.
                    let c = &els[(a.value() as usize * 31 + b.value() as usize * 7) % els.len()];
                    let lhs = a.mul(&b.add(c).unwrap()).unwrap();
                    let rhs = a.mul(b).unwrap().add(&a.mul(c).unwrap()).unwrap();
                    assert_eq!(lhs, rhs);
                    assert_eq!(
                        a.mul(b).unwrap().mul(c).unwrap(),
                        a.mul(&b.mul(c).unwrap()).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn gf4_multiplication_table() {
        // Brute-force table for x^2 + x + 1: alpha = 10, alpha^2 = alpha + 1 = 11.
        let f = Field::binary(2).unwrap();
        let e = |v| f.element(v).unwrap();
        let table = [[0, 0, 0, 0], [0, 1, 2, 3], [0, 2, 3, 1], [0, 3, 1, 2]];
        for a in 0..4u64 {
            for b in 0..4u64 {
                assert_eq!(e(a).mul(&e(b)).unwrap().value(), table[a as usize][b as usize]);
            }
        }
    }

    #[test]
    fn mul_table_matches_bit_serial() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for s in [1u32, 3, 8, 13, 63, 64, 65, 130, 256] {
            let f = BinaryField::new(s).unwrap();
            let rand_el = |rng: &mut rand_chacha::ChaCha8Rng| {
                let mut v = [0u64; LIMBS];
                for i in 0..s {
                    if rng.gen::<bool>() {
                        v[(i / 64) as usize] |= 1 << (i % 64);
                    }
                }
                v
            };
            for _ in 0..50 {
                let a = rand_el(&mut rng);
                let c = rand_el(&mut rng);
                let table = f.mul_table(&a);
                assert_eq!(table.mul(&c), f.mul_raw(&c, &a), "s={s}");
                assert!(f.contains(&table.mul(&c)));
            }
        }
    }

    #[test]
    fn mismatched_fields_are_rejected() {
        let a = Field::prime(5).unwrap().one();
        let b = Field::binary(2).unwrap().one();
        assert!(a.add(&b).is_err());
        assert!(a.mul(&b).is_err());
        assert!(Field::prime(5).unwrap().element(5).is_err());
        assert!(Field::binary(2).unwrap().element(4).is_err());
        assert!(Field::prime(6).is_err());
    }
}
