//! Bit strings and the finite-field arithmetic underneath the codes and
//! designs: prime fields GF(p) and binary extension fields GF(2^s).
//!
//! Conventions shared by every module and file format:
//!
//! * bytes pack bits most-significant first ([`MSB_FIRST`]);
//! * an `s`-bit chunk of a bit string is read as a GF(2^s) element
//!   big-endian, so the chunk's first bit is the coefficient of `x^(s-1)`;
//! * GF(2^s) uses the lexicographically least irreducible modulus of degree
//!   `s` ([`LEAST_IRREDUCIBLE_LOW`] for `s <= 32`).

mod bits;
mod field;
pub mod gf2x;
mod poly;
mod prime;

pub use bits::{inner_product_gf2, BitString, MSB_FIRST};
pub use field::{
    BinaryField, Field, FieldElement, Limbs, MulTable, PrimeField, LEAST_IRREDUCIBLE_LOW,
    MAX_SYMBOL_BITS,
};
pub(crate) use field::LIMBS;
pub use poly::{poly_eval, Polynomial};
pub use prime::{is_prime, next_prime_geq};

/// Reads bits `[start, start + s)` of `x` as a GF(2^s) element, big-endian,
/// treating positions past the end of `x` as zero.
pub fn read_symbol(x: &BitString, start: usize, s: u32) -> Limbs {
    let mut out = [0u64; LIMBS];
    let s = s as usize;
    let avail = x.len().saturating_sub(start).min(s);
    // Chunk bit k (0 = first) is the coefficient of x^(s-1-k).
    let mut k = 0;
    while k < avail {
        let take = (avail - k).min(64);
        let v = x.read_u64(start + k, take);
        // These `take` bits occupy coefficient positions s-1-k ..= s-k-take.
        let low_pos = s - k - take;
        place_bits(&mut out, v, low_pos, take);
        k += take;
    }
    out
}

fn place_bits(out: &mut Limbs, v: u64, pos: usize, len: usize) {
    let limb = pos / 64;
    let off = pos % 64;
    out[limb] |= v << off;
    if off != 0 && off + len > 64 {
        out[limb + 1] |= v >> (64 - off);
    }
}

/// Parity of `⟨a, b⟩` over the low `s` coefficient bits.
#[inline]
pub fn limbs_inner_product(a: &Limbs, b: &Limbs) -> bool {
    let mut acc = 0u64;
    for i in 0..LIMBS {
        acc ^= a[i] & b[i];
    }
    acc.count_ones() & 1 == 1
}
