//! Divisor counting and enumeration, the smallest-prime-factor style divisor
//! sieve, and finite-scale Wigert ratios `ln(tau) * ln(ln n) / ln(n)`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest `n` accepted by the trial-division operations (`sqrt(n) <= 10^6`).
pub const TAU_GUARD: u64 = 1_000_000_000_000;

/// Largest table size accepted by [`TauTable::build`].
pub const SIEVE_GUARD: u64 = 10_000_000;

/// Below this the Wigert ratio degenerates (`ln ln n <= 1`) and is reported
/// as absent.
pub const WIGERT_MIN: u64 = 16;

/// Number of positive divisors of `n`, by trial division up to `sqrt(n)`.
pub fn tau(n: u64) -> Result<u64> {
    check_trial_guard(n)?;
    let mut count = 0;
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            count += if d * d == n { 1 } else { 2 };
        }
        d += 1;
    }
    Ok(count)
}

/// All divisors of `n`, ascending.
pub fn divisors(n: u64) -> Result<Vec<u64>> {
    divisors_up_to(n, n)
}

/// Divisors of `n` that are `<= limit`, ascending.
pub fn divisors_up_to(n: u64, limit: u64) -> Result<Vec<u64>> {
    check_trial_guard(n)?;
    if limit < 1 {
        return Err(Error::Invalid("limit must be >= 1".into()));
    }
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            if d <= limit {
                small.push(d);
            }
            let q = n / d;
            if q != d && q <= limit {
                large.push(q);
            }
        }
        d += 1;
    }
    large.reverse();
    small.extend(large);
    Ok(small)
}

fn check_trial_guard(n: u64) -> Result<()> {
    if n < 1 {
        return Err(Error::Invalid("n must be >= 1".into()));
    }
    if n > TAU_GUARD {
        return Err(Error::Guard(format!("n = {n} exceeds trial-division guard {TAU_GUARD}")));
    }
    Ok(())
}

/// `ln(tau) * ln(ln n) / ln(n)`, the finite-scale exponent tracker for the
/// divisor bound; absent below [`WIGERT_MIN`].
pub fn wigert_ratio(n: u64, tau: u64) -> Option<f64> {
    if n < WIGERT_MIN {
        return None;
    }
    let ln_n = (n as f64).ln();
    Some((tau as f64).ln() * ln_n.ln() / ln_n)
}

/// Divisor profile of a single integer.
#[derive(Clone, Debug, Serialize)]
pub struct DivisorProfile {
    pub n: u64,
    pub tau: u64,
    pub divisors: Vec<u64>,
    pub wigert_ratio: Option<f64>,
}

impl DivisorProfile {
    pub fn new(n: u64) -> Result<Self> {
        let divisors = divisors(n)?;
        let tau = divisors.len() as u64;
        Ok(DivisorProfile { n, tau, divisors, wigert_ratio: wigert_ratio(n, tau) })
    }
}

/// Divisor-count table for `1..=limit`, built by a linear
/// (smallest-prime-factor driven) sieve. Construction is single-threaded;
/// the finished table is immutable and cheap to share.
pub struct TauTable {
    tau: Vec<u32>,
}

impl TauTable {
    pub fn build(limit: u64) -> Result<TauTable> {
        if limit < 1 {
            return Err(Error::Invalid("sieve limit must be >= 1".into()));
        }
        if limit > SIEVE_GUARD {
            return Err(Error::Guard(format!("sieve limit {limit} exceeds guard {SIEVE_GUARD}")));
        }
        let n = limit as usize;
        let mut tau = vec![0u32; n + 1];
        // exponent of the smallest prime factor, maintained alongside tau
        let mut spf_exp = vec![0u8; n + 1];
        let mut primes: Vec<usize> = Vec::new();
        tau[1] = 1;
        for i in 2..=n {
            if tau[i] == 0 {
                primes.push(i);
                tau[i] = 2;
                spf_exp[i] = 1;
            }
            for &p in &primes {
                let ip = match i.checked_mul(p) {
                    Some(ip) if ip <= n => ip,
                    _ => break,
                };
                if i % p == 0 {
                    let e = u32::from(spf_exp[i]);
                    spf_exp[ip] = spf_exp[i] + 1;
                    tau[ip] = tau[i] / (e + 1) * (e + 2);
                    break;
                }
                spf_exp[ip] = 1;
                tau[ip] = tau[i] * 2;
            }
        }
        Ok(TauTable { tau })
    }

    pub fn limit(&self) -> u64 {
        (self.tau.len() - 1) as u64
    }

    /// `tau(n)` from the table; `n` must be within the built range.
    pub fn tau(&self, n: u64) -> u64 {
        u64::from(self.tau[n as usize])
    }

    /// Smallest maximizer of `tau` on `1..=limit`, with its divisor count.
    pub fn argmax(&self) -> (u64, u64) {
        let mut best_n = 1u64;
        let mut best = 1u64;
        for n in 1..=self.limit() {
            let t = self.tau(n);
            if t > best {
                best = t;
                best_n = n;
            }
        }
        (best_n, best)
    }

    /// Maximum Wigert ratio over `lo..=hi` (clamped to the table and to
    /// [`WIGERT_MIN`]), returning the smallest attaining `n`. `None` when the
    /// clamped range is empty.
    pub fn max_wigert_ratio(&self, lo: u64, hi: u64) -> Option<(u64, f64)> {
        let lo = lo.max(WIGERT_MIN);
        let hi = hi.min(self.limit());
        if lo > hi {
            return None;
        }
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (lo..=hi)
                .into_par_iter()
                .map(|n| (n, wigert_ratio(n, self.tau(n)).expect("n >= WIGERT_MIN")))
                .reduce_with(better_ratio)
        }
        #[cfg(not(feature = "parallel"))]
        {
            (lo..=hi)
                .map(|n| (n, wigert_ratio(n, self.tau(n)).expect("n >= WIGERT_MIN")))
                .reduce(better_ratio)
        }
    }

    /// Sequential variant of [`TauTable::max_wigert_ratio`], kept callable
    /// with the parallel feature enabled so the two paths can be compared.
    pub fn max_wigert_ratio_seq(&self, lo: u64, hi: u64) -> Option<(u64, f64)> {
        let lo = lo.max(WIGERT_MIN);
        let hi = hi.min(self.limit());
        if lo > hi {
            return None;
        }
        (lo..=hi)
            .map(|n| (n, wigert_ratio(n, self.tau(n)).expect("n >= WIGERT_MIN")))
            .reduce(better_ratio)
    }
}

fn better_ratio(a: (u64, f64), b: (u64, f64)) -> (u64, f64) {
    // strictly larger ratio wins; ties go to the smaller n
    if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
        b
    } else {
        a
    }
}

/// Smallest maximizer of `tau` on `1..=limit` together with its divisor
/// count and Wigert ratio (absent when the maximizer is below 16).
pub fn max_tau_up_to(limit: u64) -> Result<(u64, u64, Option<f64>)> {
    let table = TauTable::build(limit)?;
    let (n, t) = table.argmax();
    Ok((n, t, wigert_ratio(n, t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tau_examples() {
        assert_eq!(tau(1).unwrap(), 1);
        assert_eq!(tau(12).unwrap(), 6);
        assert_eq!(tau(97).unwrap(), 2);
    }

    #[test]
    fn divisor_examples() {
        assert_eq!(divisors_up_to(12, 3).unwrap(), vec![1, 2, 3]);
        assert_eq!(divisors_up_to(7, 100).unwrap(), vec![1, 7]);
        for n in [1u64, 2, 17, 360] {
            assert_eq!(divisors_up_to(n, 1).unwrap(), vec![1]);
        }
        assert_eq!(divisors(12).unwrap(), vec![1, 2, 3, 4, 6, 12]);
    }

    #[test]
    fn divisors_len_is_tau() {
        for n in 1..=2000 {
            assert_eq!(divisors(n).unwrap().len() as u64, tau(n).unwrap(), "n={n}");
        }
    }

    #[test]
    fn sieve_agrees_with_trial_division() {
        let table = TauTable::build(10_000).unwrap();
        for n in 1..=10_000 {
            assert_eq!(table.tau(n), tau(n).unwrap(), "n={n}");
        }
    }

    #[test]
    fn max_tau_examples() {
        assert_eq!(max_tau_up_to(10).unwrap(), (6, 4, None));
        assert_eq!(max_tau_up_to(12).unwrap(), (12, 6, None));
        assert_eq!(max_tau_up_to(1).unwrap(), (1, 1, None));
    }

    #[test]
    fn wigert_ratio_absent_below_16() {
        assert!(wigert_ratio(15, 4).is_none());
        assert!(wigert_ratio(16, 5).is_some());
    }

    #[test]
    fn max_wigert_ratio_small_range() {
        let table = TauTable::build(1000).unwrap();
        let (n, r) = table.max_wigert_ratio(16, 1000).unwrap();
        let seq = table.max_wigert_ratio_seq(16, 1000).unwrap();
        assert_eq!((n, r), seq);
        // brute scan
        let mut best = (0u64, f64::MIN);
        for m in 16..=1000u64 {
            let q = wigert_ratio(m, table.tau(m)).unwrap();
            if q > best.1 {
                best = (m, q);
            }
        }
        assert_eq!(n, best.0);
        assert!((r - best.1).abs() < 1e-15);
    }

    #[test]
    fn guards_fire() {
        assert!(matches!(tau(TAU_GUARD + 1), Err(Error::Guard(_))));
        assert!(matches!(TauTable::build(SIEVE_GUARD + 1), Err(Error::Guard(_))));
        assert!(tau(0).is_err());
    }

    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }

    proptest! {
        #[test]
        fn tau_multiplicative_on_coprime_pairs(a in 1u64..40_000, b in 1u64..25_000) {
            prop_assume!(gcd(a, b) == 1);
            prop_assert_eq!(tau(a * b).unwrap(), tau(a).unwrap() * tau(b).unwrap());
        }
    }
}
