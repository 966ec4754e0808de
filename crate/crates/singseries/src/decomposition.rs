//! Three-way decomposition of the ratio S(H + {h}) / S(H).
//!
//! For a cutoff y depending on the averaging horizon, the per-prime ratio
//! factors split into
//!
//! - pi1: primes p <= y (exact finite product),
//! - pi2: primes p > y dividing the difference product Delta = prod |h - h_i|
//!   (where the new offset repeats an occupied residue, so each factor
//!   reduces to (1 - 1/p)^-1),
//! - pi3: the remaining primes, evaluated up to the truncation with the same
//!   tail-interval discipline as the plain series evaluator.
//!
//! The same tail argument as in [`crate::singular`] applies with k replaced
//! by k+1, giving the bound 4(k+1)^2/T for pi3 and for the direct
//! factor-by-factor ratio.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kahan::{par_kahan_sum, KahanSum};
use crate::primes::{merge_factorizations, PrimeTable};
use crate::singular::SeriesValue;
use crate::tuples::HTuple;

/// Which logarithm defines the cutoff y from the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Natural,
    Base10,
}

impl LogBase {
    fn log(&self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Base10 => x.log10(),
        }
    }
}

impl FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "natural" => Ok(LogBase::Natural),
            "base10" => Ok(LogBase::Base10),
            other => Err(Error::Parse(format!(
                "unknown log base {other:?} (expected natural or base10)"
            ))),
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogBase::Natural => write!(f, "natural"),
            LogBase::Base10 => write!(f, "base10"),
        }
    }
}

/// The cutoff rule y = (num/den) * log(H). Defaults to (5/6) ln H.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct YParams {
    pub coeff_num: u64,
    pub coeff_den: u64,
    pub log_base: LogBase,
}

impl Default for YParams {
    fn default() -> Self {
        YParams {
            coeff_num: 5,
            coeff_den: 6,
            log_base: LogBase::Natural,
        }
    }
}

impl YParams {
    pub fn validate(&self) -> Result<()> {
        if self.coeff_num == 0 || self.coeff_den == 0 {
            return Err(Error::InvalidArgument(
                "y coefficient must be a positive rational".to_string(),
            ));
        }
        Ok(())
    }

    /// The cutoff for a given horizon.
    pub fn y(&self, horizon: u64) -> f64 {
        self.coeff_num as f64 * self.log_base.log(horizon as f64) / self.coeff_den as f64
    }
}

/// Everything the decomposition needs about one (base, h, horizon) triple.
#[derive(Debug, Clone)]
pub struct DecompositionContext {
    base: HTuple,
    h: u64,
    horizon: u64,
    y: f64,
    /// Merged prime factorization of Delta = prod_i |h - h_i|. The sign of a
    /// difference never matters for prime support.
    delta_factors: Vec<(u64, u32)>,
}

impl DecompositionContext {
    pub fn base(&self) -> &HTuple {
        &self.base
    }

    pub fn h(&self) -> u64 {
        self.h
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn delta_factors(&self) -> &[(u64, u32)] {
        &self.delta_factors
    }

    pub fn divides_delta(&self, p: u64) -> bool {
        self.delta_factors
            .binary_search_by_key(&p, |&(q, _)| q)
            .is_ok()
    }
}

/// Build the decomposition context with the default cutoff rule.
pub fn make_context(
    base: &HTuple,
    h: u64,
    horizon: u64,
    table: &PrimeTable,
) -> Result<DecompositionContext> {
    make_context_with(base, h, horizon, YParams::default(), table)
}

/// Build the decomposition context with an explicit cutoff rule.
pub fn make_context_with(
    base: &HTuple,
    h: u64,
    horizon: u64,
    y_params: YParams,
    table: &PrimeTable,
) -> Result<DecompositionContext> {
    y_params.validate()?;
    if base.contains(h) {
        return Err(Error::InvalidArgument(format!(
            "h = {h} is already an offset of the tuple"
        )));
    }
    if horizon < 3 {
        return Err(Error::InvalidArgument(format!(
            "horizon must be at least 3, got {horizon}"
        )));
    }
    let parts: Vec<Vec<(u64, u32)>> = base
        .offsets()
        .iter()
        .map(|&hi| table.factor(h.abs_diff(hi)))
        .collect::<Result<_>>()?;
    let delta_factors = merge_factorizations(&parts);
    Ok(DecompositionContext {
        base: base.clone(),
        h,
        horizon,
        y: y_params.y(horizon),
        delta_factors,
    })
}

/// The three partial products plus per-class prime counts.
#[derive(Debug, Clone)]
pub struct DecompositionResult {
    pub pi1: SeriesValue,
    pub pi2: SeriesValue,
    pub pi3: SeriesValue,
    pub y_used: f64,
    pub num_pi1_primes: usize,
    pub num_pi2_primes: usize,
    pub num_pi3_primes: usize,
}

impl DecompositionResult {
    /// pi1 * pi2 * pi3, the estimate of the full ratio with combined bound.
    pub fn product(&self) -> SeriesValue {
        self.pi1.product(&self.pi2).product(&self.pi3)
    }

    /// Measured |pi2 * pi3 - 1|, the quantity that shrinks as the horizon
    /// (and with it the cutoff) grows.
    pub fn pi2_pi3_deviation(&self) -> f64 {
        (self.pi2.estimate() * self.pi3.estimate() - 1.0).abs()
    }
}

fn required_ratio_truncation(extended: &HTuple) -> u64 {
    let k1 = extended.k() as u64; // k + 1
    (4 * k1 * k1).max(extended.diameter() + 1)
}

fn check_ratio_preconditions(
    base: &HTuple,
    extended: &HTuple,
    t: u64,
    table: &PrimeTable,
) -> Result<()> {
    if !base.is_admissible() {
        return Err(Error::UndefinedRatio(format!(
            "base tuple {base} is non-admissible, its series vanishes"
        )));
    }
    let required = required_ratio_truncation(extended);
    if t < required {
        return Err(Error::InvalidArgument(format!(
            "truncation {t} below the required minimum {required} for the extended tuple"
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

/// Log of the per-prime ratio factor (1 - nu'/p) / ((1 - nu/p)(1 - 1/p)).
/// Caller guarantees nu < p and nu' < p.
#[inline]
fn log_ratio_factor(p: u64, nu: u64, nu_new: u64) -> f64 {
    let pf = p as f64;
    (-(nu_new as f64) / pf).ln_1p() - (-(nu as f64) / pf).ln_1p() - (-1.0 / pf).ln_1p()
}

/// Split the truncated ratio product into pi1, pi2, pi3.
pub fn decompose(
    ctx: &DecompositionContext,
    table: &PrimeTable,
    t: u64,
) -> Result<DecompositionResult> {
    let base = ctx.base();
    let extended = base.with_offset(ctx.h)?;
    check_ratio_preconditions(base, &extended, t, table)?;
    if (t as f64) < ctx.y {
        return Err(Error::InvalidArgument(format!(
            "truncation {t} below the cutoff y = {:.3}; pi1 would be incomplete",
            ctx.y
        )));
    }

    let k1 = extended.k() as u64;
    let mut s1 = KahanSum::new();
    let mut s2 = KahanSum::new();
    let mut s3 = KahanSum::new();
    let mut zero1 = false;
    let mut zero3 = false;
    let (mut n1, mut n2, mut n3) = (0usize, 0usize, 0usize);

    for &p in table.primes_up_to(t) {
        let nu = base.residue_count(p);
        let nu_new = extended.residue_count(p);
        let divides = ctx.divides_delta(p);
        // The new offset repeats a residue mod p exactly when p divides
        // one of the differences.
        debug_assert_eq!(divides, nu_new == nu, "nu'/nu relation violated at p = {p}");

        if (p as f64) <= ctx.y {
            n1 += 1;
            if nu_new == p {
                zero1 = true;
            } else if !zero1 {
                s1.add(log_ratio_factor(p, nu, nu_new));
            }
        } else if divides {
            n2 += 1;
            // nu' = nu, so the factor collapses to (1 - 1/p)^-1.
            s2.add(-(-1.0 / p as f64).ln_1p());
        } else {
            n3 += 1;
            if nu_new == p {
                zero3 = true;
            } else if !zero3 {
                s3.add(log_ratio_factor(p, nu, nu_new));
            }
        }
    }

    let pi1 = if zero1 {
        SeriesValue::exact_zero(t)
    } else {
        SeriesValue::new(s1.value().exp(), 0.0, t)
    };
    let pi2 = SeriesValue::new(s2.value().exp(), 0.0, t);
    let pi3 = if zero3 {
        SeriesValue::exact_zero(t)
    } else {
        SeriesValue::new(s3.value().exp(), 4.0 * (k1 * k1) as f64 / t as f64, t)
    };

    Ok(DecompositionResult {
        pi1,
        pi2,
        pi3,
        y_used: ctx.y,
        num_pi1_primes: n1,
        num_pi2_primes: n2,
        num_pi3_primes: n3,
    })
}

/// The ratio S(base + {h}) / S(base) as one factor-by-factor product over
/// p <= t, never as a quotient of two separately evaluated series.
pub fn ratio_direct(base: &HTuple, h: u64, t: u64, table: &PrimeTable) -> Result<SeriesValue> {
    let extended = base.with_offset(h)?;
    check_ratio_preconditions(base, &extended, t, table)?;

    if !extended.is_admissible() {
        // Some prime fully occupies the extended residues; the numerator
        // series vanishes identically.
        return Ok(SeriesValue::exact_zero(t));
    }

    let k1 = extended.k() as u64;
    let primes = table.primes_up_to(t);
    let log_sum = par_kahan_sum(primes.len(), |i| {
        let p = primes[i];
        log_ratio_factor(p, base.residue_count(p), extended.residue_count(p))
    });
    Ok(SeriesValue::new(
        log_sum.exp(),
        4.0 * (k1 * k1) as f64 / t as f64,
        t,
    ))
}
