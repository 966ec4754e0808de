//! Offset tuples: representation, residue counting, admissibility, generation.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::primes::{is_prime_u64, PrimeTable};

/// A set of k distinct offsets, held sorted and translated so the smallest
/// offset is 0. Translation changes no residue count mod any prime, so the
/// canonical form is harmless and makes equal sets compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HTuple {
    offsets: Vec<u64>,
}

impl HTuple {
    /// Build a tuple from arbitrary distinct integers. Sorts and normalizes
    /// the minimum to 0.
    pub fn new(raw: impl Into<Vec<i64>>) -> Result<Self> {
        let mut v: Vec<i64> = raw.into();
        if v.is_empty() {
            return Err(Error::InvalidArgument(
                "tuple must contain at least one offset".to_string(),
            ));
        }
        v.sort_unstable();
        for w in v.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidArgument(format!(
                    "tuple offsets must be distinct, {} repeats",
                    w[0]
                )));
            }
        }
        let min = v[0];
        let offsets = v
            .iter()
            .map(|&x| {
                x.checked_sub(min)
                    .map(|d| d as u64)
                    .ok_or_else(|| Error::InvalidArgument("tuple diameter overflows".to_string()))
            })
            .collect::<Result<Vec<u64>>>()?;
        Ok(HTuple { offsets })
    }

    /// Offsets, strictly ascending, minimum 0.
    pub fn offsets(&self) -> &[u64] {
        &self.offsets
    }

    pub fn k(&self) -> usize {
        self.offsets.len()
    }

    /// Largest offset minus smallest (= largest, by normalization).
    pub fn diameter(&self) -> u64 {
        *self.offsets.last().unwrap()
    }

    pub fn contains(&self, h: u64) -> bool {
        self.offsets.binary_search(&h).is_ok()
    }

    /// The tuple with `h` adjoined. `h` must not already be a member.
    pub fn with_offset(&self, h: u64) -> Result<HTuple> {
        if self.contains(h) {
            return Err(Error::InvalidArgument(format!(
                "offset {h} is already in the tuple"
            )));
        }
        let mut v: Vec<i64> = self.offsets.iter().map(|&x| x as i64).collect();
        v.push(h as i64);
        HTuple::new(v)
    }

    /// Number of distinct residue classes mod p occupied by the offsets.
    /// `p` need not be prime here; callers validate where required.
    pub(crate) fn residue_count(&self, p: u64) -> u64 {
        if p > self.diameter() {
            // Distinct integers within a window narrower than p cannot collide.
            return self.k() as u64;
        }
        let mut seen = vec![false; p as usize];
        let mut count = 0u64;
        for &h in &self.offsets {
            let r = (h % p) as usize;
            if !seen[r] {
                seen[r] = true;
                count += 1;
            }
        }
        count
    }

    /// nu_p: the number of residue classes occupied mod the prime p.
    pub fn nu_p(&self, p: u64, table: Option<&PrimeTable>) -> Result<u64> {
        let prime = match table.and_then(|t| t.is_prime(p)) {
            Some(b) => b,
            None => is_prime_u64(p),
        };
        if !prime {
            return Err(Error::InvalidArgument(format!("{p} is not prime")));
        }
        Ok(self.residue_count(p))
    }

    /// True iff nu_p < p for every prime p. Only p <= k can be occupied
    /// fully, so the check stops there.
    pub fn is_admissible(&self) -> bool {
        let k = self.k() as u64;
        (2..=k)
            .filter(|&p| is_prime_u64(p))
            .all(|p| self.residue_count(p) < p)
    }
}

impl fmt::Display for HTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, h) in self.offsets.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{h}")?;
        }
        Ok(())
    }
}

impl FromStr for HTuple {
    type Err = Error;

    /// Parse the "0,2,6" text format: comma-separated ascending integers.
    fn from_str(s: &str) -> Result<Self> {
        let mut raw = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            let n: i64 = part
                .parse()
                .map_err(|_| Error::Parse(format!("bad tuple component {part:?}")))?;
            raw.push(n);
        }
        for w in raw.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Parse(format!(
                    "tuple offsets must be strictly ascending, got {} before {}",
                    w[0], w[1]
                )));
            }
        }
        HTuple::new(raw)
    }
}

/// Strategy for [`generate_admissible`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenerateStrategy {
    /// Scan candidates 0,1,2,... keeping an offset iff the partial tuple can
    /// still extend to an admissible k-tuple.
    GreedySieve,
    /// The first k primes exceeding k, shifted so the minimum offset is 0.
    PrimesShift,
}

impl FromStr for GenerateStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy-sieve" => Ok(GenerateStrategy::GreedySieve),
            "primes-shift" => Ok(GenerateStrategy::PrimesShift),
            other => Err(Error::Parse(format!(
                "unknown strategy {other:?} (expected greedy-sieve or primes-shift)"
            ))),
        }
    }
}

/// Produce an admissible k-tuple.
pub fn generate_admissible(k: usize, strategy: GenerateStrategy) -> Result<HTuple> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "tuple size must be at least 1".to_string(),
        ));
    }
    let tuple = match strategy {
        GenerateStrategy::GreedySieve => greedy_sieve(k),
        GenerateStrategy::PrimesShift => primes_shift(k),
    };
    debug_assert!(tuple.is_admissible());
    Ok(tuple)
}

fn greedy_sieve(k: usize) -> HTuple {
    let small_primes: Vec<u64> = (2..=k as u64).filter(|&p| is_prime_u64(p)).collect();
    // occupied[i] = set of residues mod small_primes[i] hit so far.
    let mut occupied: Vec<Vec<bool>> = small_primes
        .iter()
        .map(|&p| vec![false; p as usize])
        .collect();
    let mut counts: Vec<u64> = vec![0; small_primes.len()];
    let mut offsets: Vec<i64> = Vec::with_capacity(k);

    let mut c: u64 = 0;
    while offsets.len() < k {
        // Accept c iff no prime p <= k becomes fully occupied.
        let ok = small_primes.iter().enumerate().all(|(i, &p)| {
            let r = (c % p) as usize;
            occupied[i][r] || counts[i] + 1 < p
        });
        if ok {
            for (i, &p) in small_primes.iter().enumerate() {
                let r = (c % p) as usize;
                if !occupied[i][r] {
                    occupied[i][r] = true;
                    counts[i] += 1;
                }
            }
            offsets.push(c as i64);
        }
        c += 1;
    }
    HTuple::new(offsets).expect("greedy candidates are distinct")
}

fn primes_shift(k: usize) -> HTuple {
    let mut offsets: Vec<i64> = Vec::with_capacity(k);
    let mut n = k as u64 + 1;
    while offsets.len() < k {
        if is_prime_u64(n) {
            offsets.push(n as i64);
        }
        n += 1;
    }
    HTuple::new(offsets).expect("primes are distinct")
}
