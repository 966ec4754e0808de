//! Prime generation and factorization support.
//!
//! A [`PrimeTable`] is built once with a sieve of Eratosthenes that records
//! the smallest prime factor of every integer up to its limit, then shared
//! read-only by all product evaluations and factorizations.

use crate::error::{Error, Result};

/// Hard ceiling on the sieve limit. The smallest-prime-factor array costs
/// 4 bytes per integer, so this caps table memory at ~400 MB.
pub const MAX_TABLE_LIMIT: u64 = 100_000_000;

/// Primes and smallest-prime-factor data up to a fixed limit.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u64>,
    /// spf[n] = smallest prime factor of n, for 2 <= n <= limit.
    /// Entries 0 and 1 are unused.
    spf: Vec<u32>,
}

impl PrimeTable {
    /// Sieve all primes up to `limit` (inclusive), recording smallest prime factors.
    pub fn build(limit: u64) -> Result<Self> {
        if limit < 2 {
            return Err(Error::InvalidArgument(format!(
                "prime table limit must be >= 2, got {limit}"
            )));
        }
        if limit > MAX_TABLE_LIMIT {
            return Err(Error::ResourceLimit {
                what: "prime table limit",
                requested: limit as u128,
                budget: MAX_TABLE_LIMIT as u128,
            });
        }

        let n = limit as usize;
        let mut spf = vec![0u32; n + 1];
        let mut primes = Vec::new();
        // Linear sieve: each composite is struck exactly once, by its
        // smallest prime factor.
        for i in 2..=n {
            if spf[i] == 0 {
                spf[i] = i as u32;
                primes.push(i as u64);
            }
            let si = spf[i] as usize;
            for &p in &primes {
                let p = p as usize;
                if p > si || p * i > n {
                    break;
                }
                spf[p * i] = p as u32;
            }
        }

        Ok(PrimeTable { limit, primes, spf })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// All primes <= limit, ascending.
    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    /// Primes p with p <= bound, ascending. `bound` may exceed the table
    /// limit; the slice simply ends at the table's last prime.
    pub fn primes_up_to(&self, bound: u64) -> &[u64] {
        let end = self.primes.partition_point(|&p| p <= bound);
        &self.primes[..end]
    }

    /// Number of primes <= bound.
    pub fn count_up_to(&self, bound: u64) -> usize {
        self.primes_up_to(bound).len()
    }

    /// Primality test for n <= limit via the spf array.
    pub fn is_prime(&self, n: u64) -> Option<bool> {
        if n > self.limit {
            return None;
        }
        Some(n >= 2 && self.spf[n as usize] as u64 == n)
    }

    /// Smallest prime factor of n, for 2 <= n <= limit.
    #[inline]
    pub fn smallest_prime_factor(&self, n: u64) -> Option<u64> {
        if n < 2 || n > self.limit {
            return None;
        }
        Some(self.spf[n as usize] as u64)
    }

    /// Factor `n` into ascending (prime, exponent) pairs.
    ///
    /// Uses spf lookups for n <= limit and trial division by table primes
    /// otherwise. Any cofactor surviving trial division is prime as long as
    /// n <= limit^2; a larger survivor cannot be certified and is an error.
    pub fn factor(&self, n: u64) -> Result<Vec<(u64, u32)>> {
        if n == 0 {
            return Err(Error::InvalidArgument("cannot factor 0".to_string()));
        }
        let mut out: Vec<(u64, u32)> = Vec::new();
        let mut m = n;

        if m <= self.limit {
            while m > 1 {
                let p = self.spf[m as usize] as u64;
                let mut e = 0u32;
                while m.is_multiple_of(p) {
                    m /= p;
                    e += 1;
                }
                out.push((p, e));
            }
            return Ok(out);
        }

        for &p in &self.primes {
            if p.saturating_mul(p) > m {
                break;
            }
            if m.is_multiple_of(p) {
                let mut e = 0u32;
                while m.is_multiple_of(p) {
                    m /= p;
                    e += 1;
                }
                out.push((p, e));
                if m <= self.limit {
                    // Remaining part is in spf range; finish there.
                    let mut rest = self.factor(m)?;
                    out.append(&mut rest);
                    return Ok(out);
                }
            }
        }

        if m > 1 {
            // m has no prime factor <= limit, so a composite m would
            // exceed limit^2.
            if m > self.limit.saturating_mul(self.limit) {
                return Err(Error::IncompleteFactorization { n, cofactor: m });
            }
            out.push((m, 1));
        }
        Ok(out)
    }
}

/// Merge several factorizations into one ascending (prime, exponent) list.
pub fn merge_factorizations(parts: &[Vec<(u64, u32)>]) -> Vec<(u64, u32)> {
    let mut merged: std::collections::BTreeMap<u64, u32> = std::collections::BTreeMap::new();
    for part in parts {
        for &(p, e) in part {
            *merged.entry(p).or_insert(0) += e;
        }
    }
    merged.into_iter().collect()
}

/// Trial-division primality check for small arguments; used where no
/// table is available.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n.is_multiple_of(2) {
        return false;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}
