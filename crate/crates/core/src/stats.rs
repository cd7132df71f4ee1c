//! Proportion tests used by the equivalence criterion.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::grammar::{ratio, Count};

/// Hoeffding half-width `sqrt(-ln(alpha/2) / (2 * C1*C2/(C1+C2)))`.
pub fn hoeffding_bound(total1: f64, total2: f64, alpha: f64) -> f64 {
    let harmonic = total1 * total2 / (total1 + total2);
    libm::sqrt(-libm::log(alpha / 2.0) / (2.0 * harmonic))
}

/// True when `c1/C1` and `c2/C2` differ at level `alpha` under the Hoeffding bound.
pub fn hoeffding_differ(c1: f64, total1: f64, c2: f64, total2: f64, alpha: f64) -> Result<bool> {
    check_proportion(c1, total1)?;
    check_proportion(c2, total2)?;
    check_alpha(alpha)?;
    let gap = libm::fabs(c1 / total1 - c2 / total2);
    Ok(gap >= hoeffding_bound(total1, total2, alpha))
}

/// Same test on exact counts; the proportion difference is computed exactly.
pub fn hoeffding_differ_exact(
    c1: &Count,
    total1: &Count,
    c2: &Count,
    total2: &Count,
    alpha: f64,
) -> Result<bool> {
    check_alpha(alpha)?;
    if total1.is_zero() || total2.is_zero() {
        return Err(Error::InvalidParameter("zero denominator".into()));
    }
    let diff = c1 / total1 - c2 / total2;
    if diff.is_zero() {
        return Ok(false);
    }
    let gap = libm::fabs(to_f64(&diff));
    Ok(gap >= hoeffding_bound(to_f64(total1), to_f64(total2), alpha))
}

/// `D = C1*C2/(C1+C2) * (c1/C1 - c2/C2)^2`.
pub fn dissimilarity(c1: f64, total1: f64, c2: f64, total2: f64) -> f64 {
    let d = c1 / total1 - c2 / total2;
    total1 * total2 / (total1 + total2) * d * d
}

/// Exact form of [`dissimilarity`].
pub fn dissimilarity_exact(c1: &Count, total1: &Count, c2: &Count, total2: &Count) -> Count {
    let d = c1 / total1 - c2 / total2;
    if d.is_zero() {
        return d;
    }
    (total1 * total2) / (total1 + total2) * &d * &d
}

/// Level at which the Hoeffding test flips: pairs differ exactly when
/// `D >= -ln(alpha/2) / 2`.
pub fn dissimilarity_threshold(alpha: f64) -> f64 {
    -libm::log(alpha / 2.0) / 2.0
}

pub fn to_f64(c: &Count) -> f64 {
    c.to_f64().unwrap_or(f64::NAN)
}

/// Rounds half up to a non-negative integer.
pub fn round_half_up(c: &Count) -> Result<u64> {
    let r = (c + ratio(1, 2)).floor().to_integer();
    r.to_u64().ok_or_else(|| {
        Error::InvalidParameter(alloc::format!("count {c} does not round to a cell"))
    })
}

fn check_proportion(c: f64, total: f64) -> Result<()> {
    if !(total > 0.0) || !(c >= 0.0) || c > total {
        return Err(Error::InvalidParameter(alloc::format!(
            "invalid proportion {c}/{total}"
        )));
    }
    Ok(())
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "alpha {alpha} outside (0,1)"
        )));
    }
    Ok(())
}

/// Largest table total handled with exact integer weights.
const EXACT_LIMIT: u64 = 120;

fn binomial_u128(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn ln_binomial(n: u64, k: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

/// Two-sided p-value of Fisher's exact test on `[[a, b], [c, d]]`: the total
/// probability of tables with the same margins that are no more likely than
/// the observed one.
pub fn fisher_p_value(a: u64, b: u64, c: u64, d: u64) -> f64 {
    match fisher_exact_weights(a, b, c, d) {
        Some((num, den)) => num as f64 / den as f64,
        None => fisher_p_value_float(a, b, c, d),
    }
}

/// Numerator and denominator of the p-value as integers, when they fit.
fn fisher_exact_weights(a: u64, b: u64, c: u64, d: u64) -> Option<(u128, u128)> {
    let n = a + b + c + d;
    if n > EXACT_LIMIT {
        return None;
    }
    let (row1, row2, col1) = (a + b, c + d, a + c);
    let lo = col1.saturating_sub(row2);
    let hi = col1.min(row1);
    let weight = |x: u64| binomial_u128(row1, x) * binomial_u128(row2, col1 - x);
    let observed = weight(a);
    let num = (lo..=hi).map(weight).filter(|&w| w <= observed).sum();
    Some((num, binomial_u128(n, col1)))
}

fn fisher_p_value_float(a: u64, b: u64, c: u64, d: u64) -> f64 {
    let n = a + b + c + d;
    let (row1, row2, col1) = (a + b, c + d, a + c);
    let lo = col1.saturating_sub(row2);
    let hi = col1.min(row1);
    let ln_den = ln_binomial(n, col1);
    let ln_weight = |x: u64| ln_binomial(row1, x) + ln_binomial(row2, col1 - x) - ln_den;
    let observed = ln_weight(a);
    let slack = 1e-7;
    let p: f64 = (lo..=hi)
        .map(ln_weight)
        .filter(|&w| w <= observed + slack)
        .map(libm::exp)
        .sum();
    p.min(1.0)
}

/// True when the two-sided Fisher p-value of
/// `[[c1, total1 - c1], [c2, total2 - c2]]` is below `alpha`.
pub fn fisher_differ(c1: u64, total1: u64, c2: u64, total2: u64, alpha: f64) -> Result<bool> {
    check_alpha(alpha)?;
    if c1 > total1 || c2 > total2 {
        return Err(Error::InvalidParameter(
            "negative cell in Fisher table".into(),
        ));
    }
    let (a, b, c, d) = (c1, total1 - c1, c2, total2 - c2);
    match fisher_exact_weights(a, b, c, d) {
        Some((num, den)) => {
            let p = num as f64 / den as f64;
            if libm::fabs(p - alpha) > 1e-12 * alpha {
                return Ok(p < alpha);
            }
            // num/den < alpha, compared exactly
            let alpha = BigRational::from_float(alpha).expect("finite alpha");
            let p = BigRational::new(
                BigInt::from(BigUint::from(num)),
                BigInt::from(BigUint::from(den)),
            );
            Ok(p < alpha)
        }
        None => Ok(fisher_p_value_float(a, b, c, d) < alpha),
    }
}
