use crate::error::{param, Result};

use super::field::pow_mod;

/// Deterministic Miller-Rabin for every `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d % 2 == 0 {
        d /= 2;
        r += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = ((x as u128 * x as u128) % n as u128) as u64;
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Least prime `>= x`.
pub fn next_prime_geq(x: u64) -> Result<u64> {
    if x < 2 {
        return param(format!("next_prime_geq needs x >= 2, got {x}"));
    }
    let mut c = x;
    loop {
        if is_prime(c) {
            return Ok(c);
        }
        c = match c.checked_add(1) {
            Some(c) => c,
            None => return param("no prime above x within u64"),
        };
    }
}
