use num_bigint::BigUint;
use num_rational::Ratio;

use crate::error::{Error, Result};

/// `sum_{j <= cutoff} C(len, j) / 2^len`, exactly.
pub fn binomial_tail_le(len: u32, cutoff: u32) -> Result<Ratio<u128>> {
    if len > 64 {
        return Err(Error::invalid("len", format!("{len} exceeds 64")));
    }
    if cutoff > len {
        return Err(Error::invalid(
            "cutoff",
            format!("{cutoff} exceeds len {len}"),
        ));
    }
    Ok(Ratio::new(binomial_prefix_sum(len, cutoff), 1u128 << len))
}

fn binomial_prefix_sum(len: u32, cutoff: u32) -> u128 {
    let mut c: u128 = 1;
    let mut total: u128 = 1;
    for j in 1..=cutoff as u128 {
        c = c * (len as u128 - j + 1) / j;
        total += c;
    }
    total
}

/// Exact check of `sum_{j <= floor(len/4)} C(len, j) 2^-len <= e^{-len/8}`.
///
/// Raising both sides to the 8th power gives `S^8 e^len <= 2^(8 len)` for the
/// integer numerator `S`; replacing `e` with the rational upper bound
/// 2.7182818285 makes a `true` answer a proof of the inequality.
pub fn azuma_tail_holds(len: u32) -> Result<bool> {
    if len == 0 || len > 64 {
        return Err(Error::invalid("len", format!("{len} outside 1..=64")));
    }
    let numerator = BigUint::from(binomial_prefix_sum(len, len / 4));
    let e_upper_num = BigUint::from(27_182_818_285u64);
    let e_upper_den = BigUint::from(10_000_000_000u64);
    let lhs = numerator.pow(8) * e_upper_num.pow(len);
    let rhs = (BigUint::from(1u8) << (8 * len as usize)) * e_upper_den.pow(len);
    Ok(lhs <= rhs)
}
