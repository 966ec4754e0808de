//! Averages of the ratio S(H + {h}) / S(H) and of the series itself.
//!
//! Three averages live here:
//!
//! - [`s_average`]: the neighbor average S_H(H) = (1/H) sum_{h=1..H} of the
//!   ratio, with set semantics for members (h already in the tuple
//!   contributes exactly 1).
//! - [`period_average_exact`] / [`period_average_product_form`]: the small-
//!   prime part of the ratio, averaged over one full period P = prod_{p<=y} p
//!   in exact rational arithmetic. Both routes must give exactly 1; they are
//!   kept deliberately independent (brute-force sum vs per-prime product).
//! - [`gallagher_mean`]: the normalized mean of the series over all
//!   k-subsets of [1, H], exhaustively or by seeded uniform sampling.

use num::rational::BigRational;
use num::{BigInt, One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kahan::{KahanSum, REDUCE_CHUNK};
use crate::primes::PrimeTable;
use crate::singular::SeriesValue;
use crate::tuples::HTuple;

/// Ceiling on the primorial P for the brute-force period average.
pub const MAX_EXACT_PERIOD: u64 = 30_030;

/// Ceiling on the number of subsets the exhaustive Gallagher mean will walk.
pub const MAX_EXHAUSTIVE_SUBSETS: u64 = 10_000_000;

/// One neighbor average over h in [1, horizon].
#[derive(Debug, Clone, PartialEq)]
pub struct AverageReport {
    pub tuple: HTuple,
    pub horizon: u64,
    /// The average with its accumulated interval; every nonzero term shares
    /// one truncation, so the term bounds average to the same bound.
    pub value: SeriesValue,
    /// Terms h whose ratio vanishes exactly.
    pub num_zero_terms: u64,
    /// Terms with h already in the tuple (ratio 1 by set semantics).
    pub num_member_terms: u64,
}

/// Minimum truncation for averaging a tuple up to `horizon`: the extended
/// tuple must stay inside the exact region for every h in range.
pub fn min_average_truncation(tuple: &HTuple, horizon: u64) -> u64 {
    let k1 = tuple.k() as u64 + 1;
    (4 * k1 * k1).max(tuple.diameter().max(horizon) + 1)
}

/// Precomputed per-tuple ratio evaluator.
///
/// The ratio at h differs from a fixed baseline product only at primes
/// dividing some difference h - h_i, so after one pass over all p <= T each
/// h costs a handful of smallest-prime-factor lookups. Algebraically this is
/// the same factor-by-factor product as [`crate::decomposition::ratio_direct`],
/// just grouped; the two are cross-checked in tests.
struct RatioAverager<'a> {
    base: &'a HTuple,
    table: &'a PrimeTable,
    /// Sum over non-critical p <= T of the log "new residue" factor.
    log_baseline: f64,
    /// Primes with nu_p = p - 1: the "new residue" factor vanishes there, so
    /// the ratio is zero unless every one of them divides the difference
    /// product. All such primes are <= k + 1.
    criticals: Vec<u64>,
    /// For primes up to the correction bound, aligned with the table's prime
    /// list: log correction applied when p divides the difference product.
    /// Critical primes store log f_eq (they are absent from the baseline);
    /// the rest store log f_eq - log f_plus.
    corr_primes: &'a [u64],
    corr: Vec<f64>,
    corr_is_critical: Vec<bool>,
}

impl<'a> RatioAverager<'a> {
    fn new(base: &'a HTuple, horizon: u64, t: u64, table: &'a PrimeTable) -> Result<Self> {
        if !base.is_admissible() {
            return Err(Error::UndefinedAverage(format!(
                "tuple {base} is non-admissible, its series vanishes"
            )));
        }
        let required = min_average_truncation(base, horizon);
        if t < required {
            return Err(Error::InvalidArgument(format!(
                "truncation {t} below the required minimum {required} for horizon {horizon}"
            )));
        }
        if t > table.limit() {
            return Err(Error::TableTooSmall {
                required: t,
                limit: table.limit(),
            });
        }

        let k = base.k() as u64;
        // Any prime dividing some |h - h_i| with h <= horizon is at most
        // max(horizon, diameter); criticals are at most k + 1.
        let corr_bound = base.diameter().max(horizon).max(k + 1);
        let corr_primes = table.primes_up_to(corr_bound);

        let primes = table.primes_up_to(t);
        let mut log_baseline = KahanSum::new();
        let mut criticals = Vec::new();
        let mut corr = vec![0.0f64; corr_primes.len()];
        let mut corr_is_critical = vec![false; corr_primes.len()];

        for (i, &p) in primes.iter().enumerate() {
            let pf = p as f64;
            let nu = base.residue_count(p);
            let log_f_eq = -(-1.0 / pf).ln_1p();
            if nu + 1 == p {
                criticals.push(p);
                corr[i] = log_f_eq;
                corr_is_critical[i] = true;
                continue;
            }
            let log_f_plus = (-((nu + 1) as f64) / pf).ln_1p()
                - (-(nu as f64) / pf).ln_1p()
                - (-1.0 / pf).ln_1p();
            log_baseline.add(log_f_plus);
            if i < corr_primes.len() {
                corr[i] = log_f_eq - log_f_plus;
            }
        }

        Ok(RatioAverager {
            base,
            table,
            log_baseline: log_baseline.value(),
            criticals,
            corr_primes,
            corr,
            corr_is_critical,
        })
    }

    /// Distinct primes dividing prod |h - h_i|, ascending.
    fn delta_primes(&self, h: u64, out: &mut Vec<u64>) {
        out.clear();
        for &hi in self.base.offsets() {
            let mut d = h.abs_diff(hi);
            while d > 1 {
                let p = self
                    .table
                    .smallest_prime_factor(d)
                    .expect("differences stay below the table limit");
                out.push(p);
                while d % p == 0 {
                    d /= p;
                }
            }
        }
        out.sort_unstable();
        out.dedup();
    }

    /// The ratio at h (h not a member). Exact zero when some critical prime
    /// misses the difference product.
    fn ratio(&self, h: u64, scratch: &mut Vec<u64>) -> f64 {
        self.delta_primes(h, scratch);
        let mut log_sum = self.log_baseline;
        let mut critical_hits = 0usize;
        for &p in scratch.iter() {
            let i = self.corr_primes.partition_point(|&q| q < p);
            debug_assert!(self.corr_primes[i] == p);
            log_sum += self.corr[i];
            if self.corr_is_critical[i] {
                critical_hits += 1;
            }
        }
        if critical_hits < self.criticals.len() {
            return 0.0;
        }
        log_sum.exp()
    }
}

/// The neighbor average S_H(horizon) at a fixed truncation.
///
/// Members of the tuple contribute ratio 1; the sum is reduced over fixed
/// chunks so results do not depend on the thread count.
pub fn s_average(
    tuple: &HTuple,
    horizon: u64,
    t: u64,
    table: &PrimeTable,
) -> Result<AverageReport> {
    if horizon == 0 {
        return Err(Error::InvalidArgument(
            "horizon must be positive".to_string(),
        ));
    }
    let averager = RatioAverager::new(tuple, horizon, t, table)?;
    let k1 = tuple.k() as u64 + 1;

    let n = horizon as usize;
    let num_chunks = n.div_ceil(REDUCE_CHUNK);
    let partials: Vec<(f64, u64, u64)> = (0..num_chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * REDUCE_CHUNK + 1;
            let end = ((c + 1) * REDUCE_CHUNK).min(n);
            let mut acc = KahanSum::new();
            let mut zeros = 0u64;
            let mut members = 0u64;
            let mut scratch = Vec::with_capacity(32);
            for h in start..=end {
                let h = h as u64;
                if tuple.contains(h) {
                    members += 1;
                    acc.add(1.0);
                    continue;
                }
                let r = averager.ratio(h, &mut scratch);
                if r == 0.0 {
                    zeros += 1;
                } else {
                    acc.add(r);
                }
            }
            (acc.value(), zeros, members)
        })
        .collect();

    let mut total = KahanSum::new();
    let mut num_zero_terms = 0u64;
    let mut num_member_terms = 0u64;
    for (s, z, m) in partials {
        total.add(s);
        num_zero_terms += z;
        num_member_terms += m;
    }

    let mean = total.value() / horizon as f64;
    let bound = if mean == 0.0 {
        0.0
    } else {
        4.0 * (k1 * k1) as f64 / t as f64
    };
    Ok(AverageReport {
        tuple: tuple.clone(),
        horizon,
        value: SeriesValue::new(mean, bound, t),
        num_zero_terms,
        num_member_terms,
    })
}

/// One report per horizon; horizons must be strictly ascending.
pub fn scan_convergence(
    tuple: &HTuple,
    horizons: &[u64],
    t: u64,
    table: &PrimeTable,
) -> Result<Vec<AverageReport>> {
    if horizons.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one horizon is required".to_string(),
        ));
    }
    for w in horizons.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::InvalidArgument(format!(
                "horizons must be strictly ascending, got {} before {}",
                w[0], w[1]
            )));
        }
    }
    horizons
        .iter()
        .map(|&h| s_average(tuple, h, t, table))
        .collect()
}

fn rational(n: u64, d: u64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Primes p <= y with their residue occupancy checked; shared by both
/// period-average routes.
fn period_primes(tuple: &HTuple, y: f64, table: &PrimeTable) -> Result<Vec<(u64, u64)>> {
    if !(y.is_finite() && y >= 0.0) {
        return Err(Error::InvalidArgument(format!("cutoff y = {y} invalid")));
    }
    let bound = y.floor() as u64;
    if bound > table.limit() {
        return Err(Error::TableTooSmall {
            required: bound,
            limit: table.limit(),
        });
    }
    let mut out = Vec::new();
    for &p in table.primes_up_to(bound) {
        let nu = tuple.residue_count(p);
        if nu == p {
            return Err(Error::UndefinedRatio(format!(
                "prime {p} <= y fully occupies the tuple's residues; the denominator factor vanishes"
            )));
        }
        out.push((p, nu));
    }
    Ok(out)
}

/// Brute-force period average: (1/P) * sum_{h=1..P} of the small-prime
/// factor product, in exact rational arithmetic. Always exactly 1.
pub fn period_average_exact(tuple: &HTuple, y: f64, table: &PrimeTable) -> Result<BigRational> {
    let primes = period_primes(tuple, y, table)?;
    let mut period = 1u64;
    for &(p, _) in &primes {
        period = period
            .checked_mul(p)
            .filter(|&v| v <= MAX_EXACT_PERIOD)
            .ok_or(Error::ResourceLimit {
                what: "period average primorial",
                requested: primes
                    .iter()
                    .fold(1u128, |acc, &(p, _)| acc.saturating_mul(p as u128)),
                budget: MAX_EXACT_PERIOD as u128,
            })?;
    }

    // Per-prime data: occupied residues and the two possible factor values.
    struct PrimeData {
        p: u64,
        occupied: Vec<bool>,
        f_eq: BigRational,
        f_plus: BigRational,
    }
    let data: Vec<PrimeData> = primes
        .iter()
        .map(|&(p, nu)| {
            let mut occupied = vec![false; p as usize];
            for &h in tuple.offsets() {
                occupied[(h % p) as usize] = true;
            }
            // f_eq = 1 / (1 - 1/p); f_plus = (1 - (nu+1)/p) / ((1 - nu/p)(1 - 1/p))
            let one = BigRational::one();
            let f_eq = (&one - rational(1, p)).recip();
            let f_plus =
                (&one - rational(nu + 1, p)) / ((&one - rational(nu, p)) * (&one - rational(1, p)));
            PrimeData {
                p,
                occupied,
                f_eq,
                f_plus,
            }
        })
        .collect();

    let mut sum = BigRational::zero();
    for h in 1..=period {
        let mut term = BigRational::one();
        for d in &data {
            let r = (h % d.p) as usize;
            term *= if d.occupied[r] { &d.f_eq } else { &d.f_plus };
        }
        sum += term;
    }
    Ok(sum / BigRational::from(BigInt::from(period)))
}

/// Product-form period average: per prime p <= y,
///
/// ```text
/// { (nu/p)(1 - nu/p) + (1 - nu/p)(1 - (nu+1)/p) } / { (1 - nu/p)(1 - 1/p) }
/// ```
///
/// multiplied out in exact rational arithmetic. Algebraically 1; the brute
/// force route above confirms it without using this simplification.
pub fn period_average_product_form(
    tuple: &HTuple,
    y: f64,
    table: &PrimeTable,
) -> Result<BigRational> {
    let primes = period_primes(tuple, y, table)?;
    let one = BigRational::one();
    let mut product = BigRational::one();
    for (p, nu) in primes {
        let nu_frac = rational(nu, p);
        let numerator =
            &nu_frac * (&one - &nu_frac) + (&one - &nu_frac) * (&one - rational(nu + 1, p));
        let denominator = (&one - &nu_frac) * (&one - rational(1, p));
        product *= numerator / denominator;
    }
    Ok(product)
}

/// How the Gallagher mean was computed.
#[derive(Debug, Clone, PartialEq)]
pub enum GallagherMode {
    Exhaustive {
        num_subsets: u64,
    },
    MonteCarlo {
        samples: u64,
        seed: u64,
        /// Sample standard error of the normalized estimator.
        std_error: f64,
    },
}

/// Normalized mean of the series over k-subsets of [1, horizon].
#[derive(Debug, Clone, PartialEq)]
pub struct GallagherReport {
    pub k: usize,
    pub horizon: u64,
    pub truncation: u64,
    /// k! * (sum of the series over k-subsets) / horizon^k; tends to 1.
    pub normalized: f64,
    /// The raw set-sum (estimated from the sample mean in Monte Carlo mode).
    pub raw_sum: f64,
    pub mode: GallagherMode,
}

fn binomial_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

fn factorial_f64(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Per-call engine: the series of a subset splits into a head over primes up
/// to its diameter (true residue counts) and a tail where every residue
/// count equals k. Tail prefix sums are shared across subsets.
struct SubsetSeries<'a> {
    table: &'a PrimeTable,
    k: u64,
    /// tail_prefix[i] = sum over the first i primes of the log tail factor.
    tail_prefix: Vec<f64>,
    num_primes: usize,
}

impl<'a> SubsetSeries<'a> {
    fn new(k: u64, t: u64, table: &'a PrimeTable) -> Self {
        let primes = table.primes_up_to(t);
        let mut tail_prefix = Vec::with_capacity(primes.len() + 1);
        let mut acc = KahanSum::new();
        tail_prefix.push(0.0);
        for &p in primes {
            // Primes p <= k can never lie beyond an admissible tuple's
            // diameter, so they are always part of the head; their slot in
            // the prefix cancels out of every difference taken.
            if p > k {
                let pf = p as f64;
                acc.add((-(k as f64) / pf).ln_1p() - k as f64 * (-1.0 / pf).ln_1p());
            }
            tail_prefix.push(acc.value());
        }
        SubsetSeries {
            table,
            k,
            tail_prefix,
            num_primes: primes.len(),
        }
    }

    /// Truncated series of one subset (offsets ascending). Zero when the
    /// subset is non-admissible.
    fn eval(&self, offsets: &[u64]) -> f64 {
        let tuple = HTuple::new(offsets.iter().map(|&x| x as i64).collect::<Vec<_>>())
            .expect("subset offsets are distinct");
        if !tuple.is_admissible() {
            return 0.0;
        }
        let diameter = tuple.diameter();
        let mut head = KahanSum::new();
        let head_count = self.table.count_up_to(diameter);
        for &p in self.table.primes_up_to(diameter) {
            let pf = p as f64;
            let nu = tuple.residue_count(p);
            head.add((-(nu as f64) / pf).ln_1p() - self.k as f64 * (-1.0 / pf).ln_1p());
        }
        let tail = self.tail_prefix[self.num_primes] - self.tail_prefix[head_count];
        (head.value() + tail).exp()
    }
}

fn check_gallagher_args(k: usize, horizon: u64, t: u64, table: &PrimeTable) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".to_string()));
    }
    if horizon < k as u64 {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} too small for {k}-subsets"
        )));
    }
    let k64 = k as u64;
    let required = (4 * k64 * k64).max(horizon);
    if t < required {
        return Err(Error::InvalidArgument(format!(
            "truncation {t} below the required minimum {required}"
        )));
    }
    if t > table.limit() {
        return Err(Error::TableTooSmall {
            required: t,
            limit: table.limit(),
        });
    }
    Ok(())
}

/// Exhaustive Gallagher mean: walk every k-subset of [1, horizon].
///
/// Errors with a resource-limit pointing at [`gallagher_mean_monte_carlo`]
/// when the subset count exceeds [`MAX_EXHAUSTIVE_SUBSETS`].
pub fn gallagher_mean(
    k: usize,
    horizon: u64,
    t: u64,
    table: &PrimeTable,
) -> Result<GallagherReport> {
    check_gallagher_args(k, horizon, t, table)?;
    let num_subsets = binomial_u128(horizon, k as u64);
    if num_subsets > MAX_EXHAUSTIVE_SUBSETS as u128 {
        return Err(Error::ResourceLimit {
            what: "exhaustive subset count (use Monte Carlo mode instead)",
            requested: num_subsets,
            budget: MAX_EXHAUSTIVE_SUBSETS as u128,
        });
    }

    let engine = SubsetSeries::new(k as u64, t, table);
    let mut sum = KahanSum::new();
    let mut offsets: Vec<u64> = (1..=k as u64).collect();
    loop {
        sum.add(engine.eval(&offsets));
        // Advance the combination in lexicographic order.
        let mut i = k;
        loop {
            if i == 0 {
                let raw_sum = sum.value();
                let normalized = factorial_f64(k) * raw_sum / (horizon as f64).powi(k as i32);
                return Ok(GallagherReport {
                    k,
                    horizon,
                    truncation: t,
                    normalized,
                    raw_sum,
                    mode: GallagherMode::Exhaustive {
                        num_subsets: num_subsets as u64,
                    },
                });
            }
            i -= 1;
            if offsets[i] < horizon - (k - 1 - i) as u64 {
                offsets[i] += 1;
                for j in i + 1..k {
                    offsets[j] = offsets[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Monte Carlo Gallagher mean over uniformly sampled k-subsets.
///
/// Sampling uses Floyd's algorithm with a fixed seed, so runs are
/// reproducible.
pub fn gallagher_mean_monte_carlo(
    k: usize,
    horizon: u64,
    t: u64,
    samples: u64,
    seed: u64,
    table: &PrimeTable,
) -> Result<GallagherReport> {
    check_gallagher_args(k, horizon, t, table)?;
    if samples == 0 {
        return Err(Error::InvalidArgument(
            "sample count must be positive".to_string(),
        ));
    }

    let engine = SubsetSeries::new(k as u64, t, table);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mean = KahanSum::new();
    let mut sq = KahanSum::new();
    let mut subset = std::collections::BTreeSet::new();
    let mut offsets = Vec::with_capacity(k);
    for _ in 0..samples {
        subset.clear();
        // Floyd's uniform k-subset of [1, horizon].
        for j in (horizon - k as u64 + 1)..=horizon {
            let pick = rng.gen_range(1..=j);
            if !subset.insert(pick) {
                subset.insert(j);
            }
        }
        offsets.clear();
        offsets.extend(subset.iter().copied());
        let v = engine.eval(&offsets);
        mean.add(v);
        sq.add(v * v);
    }

    let n = samples as f64;
    let sample_mean = mean.value() / n;
    let variance = if samples > 1 {
        ((sq.value() - n * sample_mean * sample_mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    let population = binomial_u128(horizon, k as u64) as f64;
    let scale = factorial_f64(k) * population / (horizon as f64).powi(k as i32);
    Ok(GallagherReport {
        k,
        horizon,
        truncation: t,
        normalized: scale * sample_mean,
        raw_sum: population * sample_mean,
        mode: GallagherMode::MonteCarlo {
            samples,
            seed,
            std_error: scale * (variance / n).sqrt(),
        },
    })
}
