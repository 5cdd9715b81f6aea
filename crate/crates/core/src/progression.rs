//! Arithmetic progressions in `[m]`: enumeration, the closed-form count via
//! the residue-class decomposition `m = a(k-1) + b`, the rational lower bound
//! `m(m - 3(k-1)) / (2(k-1))`, and per-pair incidence counts.

use num::rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};

/// Largest `m` accepted by [`enumerate_aps`]; beyond this the formula path
/// must be used.
pub const ENUMERATION_GUARD: u64 = 1_000_000;

/// Largest `m` accepted by [`count_aps_formula`], so the count stays inside
/// 64 bits.
pub const FORMULA_GUARD: u64 = 1 << 31;

/// Exact rational over `i128`, used wherever a bound must be compared
/// strictly without floating point.
pub type Rational = Ratio<i128>;

/// An arithmetic progression `first, first+diff, ..., first+(length-1)*diff`
/// inside some `[m]`, with positive common difference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ArithmeticProgression {
    pub first: u64,
    pub diff: u64,
    pub length: u32,
}

impl ArithmeticProgression {
    pub fn new(first: u64, diff: u64, length: u32) -> Result<Self> {
        if first < 1 {
            return Err(Error::Invalid("AP first term must be >= 1".into()));
        }
        if diff < 1 {
            return Err(Error::Invalid("AP common difference must be >= 1".into()));
        }
        if length < 3 {
            return Err(Error::Invalid(format!("AP length must be >= 3, got {length}")));
        }
        let ap = ArithmeticProgression { first, diff, length };
        // last term must be representable; supported domain is m <= 2^40
        if ap.checked_last().is_none() {
            return Err(Error::Invalid("AP last term overflows 64 bits".into()));
        }
        Ok(ap)
    }

    fn checked_last(&self) -> Option<u64> {
        self.diff
            .checked_mul(u64::from(self.length) - 1)
            .and_then(|span| self.first.checked_add(span))
    }

    pub fn last(&self) -> u64 {
        self.checked_last().expect("validated at construction")
    }

    /// Terms in increasing order.
    pub fn terms(&self) -> impl Iterator<Item = u64> + '_ {
        (0..u64::from(self.length)).map(move |i| self.first + i * self.diff)
    }

    pub fn contains(&self, x: u64) -> bool {
        if x < self.first {
            return false;
        }
        let off = x - self.first;
        off % self.diff == 0 && off / self.diff < u64::from(self.length)
    }
}

/// The decomposition `m = a(k-1) + b`, `0 <= b < k-1`, together with the
/// closed-form AP count it induces:
/// `count = b*C(a+1,2) + (k-1-b)*C(a,2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ApCountDecomposition {
    pub m: u64,
    pub k: u32,
    pub a: u64,
    pub b: u64,
    pub count: u64,
}

impl ApCountDecomposition {
    pub fn new(m: u64, k: u32) -> Result<Self> {
        check_k(k)?;
        if m < 1 {
            return Err(Error::Invalid("m must be >= 1".into()));
        }
        if m > FORMULA_GUARD {
            return Err(Error::Guard(format!("m = {m} exceeds formula guard {FORMULA_GUARD}")));
        }
        let step = u64::from(k) - 1;
        let a = m / step;
        let b = m % step;
        let count = u128::from(b) * binom2_u128(a + 1) + u128::from(step - b) * binom2_u128(a);
        let count = u64::try_from(count)
            .map_err(|_| Error::Guard(format!("AP count for m = {m}, k = {k} overflows u64")))?;
        Ok(ApCountDecomposition { m, k, a, b, count })
    }
}

fn check_k(k: u32) -> Result<()> {
    if k < 3 {
        return Err(Error::Invalid(format!("k must be >= 3, got {k}")));
    }
    Ok(())
}

pub(crate) fn binom2_u128(x: u64) -> u128 {
    u128::from(x) * u128::from(x.saturating_sub(1)) / 2
}

/// `C(x, 2)` as a u64; callers keep `x` small enough not to overflow.
pub fn binom2(x: u64) -> u64 {
    x * x.saturating_sub(1) / 2
}

/// All APs of length `k` inside `[m]`, sorted by `(diff, first)`.
///
/// Guarded at `m <= 10^6`; this is the brute-force counterpart of
/// [`count_aps_formula`].
pub fn enumerate_aps(m: u64, k: u32) -> Result<Vec<ArithmeticProgression>> {
    check_k(k)?;
    if m < 1 {
        return Err(Error::Invalid("m must be >= 1".into()));
    }
    if m > ENUMERATION_GUARD {
        return Err(Error::Guard(format!(
            "m = {m} exceeds enumeration guard {ENUMERATION_GUARD}; use count_aps_formula"
        )));
    }
    let span = u64::from(k) - 1;
    let mut out = Vec::new();
    let mut d = 1;
    while span * d < m {
        let max_first = m - span * d;
        for x in 1..=max_first {
            out.push(ArithmeticProgression { first: x, diff: d, length: k });
        }
        d += 1;
    }
    Ok(out)
}

/// Number of APs of length `k` in `[m]` via the closed form on the
/// decomposition `m = a(k-1) + b`. Returns 0 whenever `m < k`.
pub fn count_aps_formula(m: u64, k: u32) -> Result<u64> {
    Ok(ApCountDecomposition::new(m, k)?.count)
}

/// The lower bound `m(m - 3(k-1)) / (2(k-1))` as an exact rational. The
/// closed-form count always exceeds it strictly; the value may be negative
/// for small `m`.
pub fn ap_count_lower_bound(m: u64, k: u32) -> Rational {
    assert!(k >= 3, "k must be >= 3");
    assert!(m >= 1, "m must be >= 1");
    let m = i128::from(m);
    let step = i128::from(k) - 1;
    Ratio::new(m * (m - 3 * step), 2 * step)
}

/// Number of APs of length `k` in `[m]` containing both `x` and `y`
/// (`x < y`) as terms, computed by running over the divisors `c` of
/// `D = y - x` with `c <= k-1` and counting placements arithmetically.
pub fn count_aps_through_pair(x: u64, y: u64, k: u32, m: u64) -> Result<u64> {
    check_pair(x, y, m)?;
    check_k(k)?;
    let diff = y - x;
    let span = u64::from(k) - 1;
    let mut count = 0u64;
    for c in 1..=span.min(diff) {
        if diff % c != 0 {
            continue;
        }
        let d = diff / c;
        // x sits at index i, y at index i+c; valid i form a contiguous range
        let hi = (span - c).min((x - 1) / d);
        let lo = span.saturating_sub((m - x) / d);
        if lo <= hi {
            count += hi - lo + 1;
        }
    }
    Ok(count)
}

/// The APs counted by [`count_aps_through_pair`], materialized. Kept as an
/// explicit enumeration so the two routes can cross-check each other.
pub fn aps_through_pair(x: u64, y: u64, k: u32, m: u64) -> Result<Vec<ArithmeticProgression>> {
    check_pair(x, y, m)?;
    check_k(k)?;
    let diff = y - x;
    let span = u64::from(k) - 1;
    let mut out = Vec::new();
    for c in 1..=span.min(diff) {
        if diff % c != 0 {
            continue;
        }
        let d = diff / c;
        for i in 0..=(span - c) {
            if i * d >= x {
                continue;
            }
            let first = x - i * d;
            let ap = ArithmeticProgression { first, diff: d, length: k };
            if ap.last() <= m {
                out.push(ap);
            }
        }
    }
    Ok(out)
}

fn check_pair(x: u64, y: u64, m: u64) -> Result<()> {
    if x < 1 || x >= y {
        return Err(Error::Invalid(format!("pair must satisfy 1 <= x < y, got x = {x}, y = {y}")));
    }
    if y > m {
        return Err(Error::Invalid(format!("pair must lie in [m]: y = {y} > m = {m}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ap(first: u64, diff: u64, length: u32) -> ArithmeticProgression {
        ArithmeticProgression { first, diff, length }
    }

    #[test]
    fn enumerate_small_cases() {
        assert_eq!(enumerate_aps(4, 3).unwrap(), vec![ap(1, 1, 3), ap(2, 1, 3)]);
        assert_eq!(enumerate_aps(3, 3).unwrap(), vec![ap(1, 1, 3)]);
        assert!(enumerate_aps(2, 3).unwrap().is_empty());
    }

    #[test]
    fn enumerate_is_sorted_by_diff_then_first() {
        let aps = enumerate_aps(60, 4).unwrap();
        let mut sorted = aps.clone();
        sorted.sort_by_key(|p| (p.diff, p.first));
        assert_eq!(aps, sorted);
    }

    #[test]
    fn formula_matches_examples() {
        assert_eq!(count_aps_formula(10, 3).unwrap(), 20);
        assert_eq!(count_aps_formula(4, 3).unwrap(), 2);
        for k in 3..=12 {
            assert_eq!(count_aps_formula(u64::from(k), k).unwrap(), 1);
        }
    }

    #[test]
    fn formula_agrees_with_enumeration_on_grid() {
        for k in 3..=8 {
            for m in 1..=200 {
                let expected = enumerate_aps(m, k).unwrap().len() as u64;
                assert_eq!(count_aps_formula(m, k).unwrap(), expected, "m={m} k={k}");
            }
        }
    }

    #[test]
    fn formula_monotone_in_m() {
        for k in 3..=8 {
            let mut prev = 0;
            for m in 1..=300 {
                let c = count_aps_formula(m, k).unwrap();
                assert!(c >= prev, "m={m} k={k}");
                prev = c;
            }
        }
    }

    #[test]
    fn lower_bound_examples() {
        assert_eq!(ap_count_lower_bound(10, 3), Rational::from_integer(10));
        assert_eq!(ap_count_lower_bound(6, 3), Rational::from_integer(0));
        assert_eq!(ap_count_lower_bound(1, 3), Rational::new(-5, 4));
    }

    #[test]
    fn count_exceeds_lower_bound_strictly() {
        for k in 3..=8 {
            for m in 1..=300 {
                let count = Rational::from_integer(count_aps_formula(m, k).unwrap() as i128);
                let bound = ap_count_lower_bound(m, k);
                assert!(count > bound, "m={m} k={k}: {count} <= {bound}");
            }
        }
    }

    #[test]
    fn pair_count_examples() {
        assert_eq!(count_aps_through_pair(1, 2, 3, 4).unwrap(), 1);
        assert_eq!(count_aps_through_pair(1, 4, 3, 9).unwrap(), 1);
        assert_eq!(count_aps_through_pair(1, 100, 3, 100).unwrap(), 0);
    }

    #[test]
    fn pair_count_rejects_bad_pairs() {
        assert!(count_aps_through_pair(2, 2, 3, 4).is_err());
        assert!(count_aps_through_pair(3, 2, 3, 4).is_err());
        assert!(count_aps_through_pair(0, 2, 3, 4).is_err());
        assert!(count_aps_through_pair(1, 5, 3, 4).is_err());
    }

    #[test]
    fn pair_count_matches_enumeration_filter() {
        for k in 3..=6 {
            for m in [10u64, 25, 40] {
                let aps = enumerate_aps(m, k).unwrap();
                for x in 1..m {
                    for y in (x + 1)..=m {
                        let direct = aps
                            .iter()
                            .filter(|p| p.contains(x) && p.contains(y))
                            .count() as u64;
                        let counted = count_aps_through_pair(x, y, k, m).unwrap();
                        let listed = aps_through_pair(x, y, k, m).unwrap();
                        assert_eq!(counted, direct, "x={x} y={y} k={k} m={m}");
                        assert_eq!(listed.len() as u64, direct, "x={x} y={y} k={k} m={m}");
                        for p in &listed {
                            assert!(p.contains(x) && p.contains(y) && p.last() <= m);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn decomposition_invariants() {
        for k in 3..=9 {
            for m in 1..=500 {
                let d = ApCountDecomposition::new(m, k).unwrap();
                assert_eq!(d.a * (u64::from(k) - 1) + d.b, m);
                assert!(d.b < u64::from(k) - 1);
            }
        }
    }

    #[test]
    fn guards_fire() {
        assert!(matches!(enumerate_aps(ENUMERATION_GUARD + 1, 3), Err(Error::Guard(_))));
        assert!(matches!(count_aps_formula(FORMULA_GUARD + 1, 3), Err(Error::Guard(_))));
        assert!(matches!(enumerate_aps(10, 2), Err(Error::Invalid(_))));
    }

    #[test]
    fn ap_terms_and_contains() {
        let p = ArithmeticProgression::new(3, 4, 4).unwrap();
        assert_eq!(p.terms().collect::<Vec<_>>(), vec![3, 7, 11, 15]);
        assert_eq!(p.last(), 15);
        assert!(p.contains(11));
        assert!(!p.contains(12));
        assert!(!p.contains(19));
        assert!(!p.contains(1));
    }
}
