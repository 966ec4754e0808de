//! The singular series of an offset tuple, evaluated as a truncated Euler
//! product with a rigorous multiplicative tail interval, plus an exact
//! rational mode for small truncations.
//!
//! For a k-tuple with residue counts nu_p, the series is
//!
//! ```text
//! S = prod_p (1 - nu_p/p) * (1 - 1/p)^(-k)
//! ```
//!
//! Truncating at a prime bound T >= max(4k^2, diameter+1) leaves a tail in
//! which every nu_p equals k, and the log of each tail factor is
//! sum_{j>=2} (k - k^j)/(j p^j), bounded in absolute value by (2/3) k^2/p^2.
//! Summing 1/p^2 over p > T against the integral gives a total tail log
//! bound of 2k^2/T, which is what [`SeriesValue::log_tail_bound`] carries.

use num::rational::BigRational;
use num::{BigInt, One, Zero};

use crate::error::{Error, Result};
use crate::kahan::par_kahan_sum;
use crate::primes::PrimeTable;
use crate::tuples::HTuple;

/// Largest truncation accepted by the exact rational evaluator. Beyond this
/// the rationals stop being cheap to carry around.
pub const EXACT_TRUNCATION_BUDGET: u64 = 10_000;

/// An estimate of a positive real product with a rigorous multiplicative
/// error bound: the true value lies in [estimate * e^-eps, estimate * e^eps]
/// where eps is `log_tail_bound`. A vanishing product is detected exactly
/// and carries a zero bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    estimate: f64,
    log_tail_bound: f64,
    truncation: u64,
}

impl SeriesValue {
    pub(crate) fn new(estimate: f64, log_tail_bound: f64, truncation: u64) -> Self {
        debug_assert!(estimate >= 0.0);
        debug_assert!(log_tail_bound >= 0.0);
        debug_assert!(truncation >= 2);
        debug_assert!(estimate != 0.0 || log_tail_bound == 0.0);
        SeriesValue {
            estimate,
            log_tail_bound,
            truncation,
        }
    }

    /// An exactly-zero value (some factor vanished; no tail uncertainty).
    pub(crate) fn exact_zero(truncation: u64) -> Self {
        SeriesValue::new(0.0, 0.0, truncation)
    }

    pub fn estimate(&self) -> f64 {
        self.estimate
    }

    pub fn log_tail_bound(&self) -> f64 {
        self.log_tail_bound
    }

    /// The prime bound up to which factors were evaluated exactly.
    pub fn truncation(&self) -> u64 {
        self.truncation
    }

    pub fn is_zero(&self) -> bool {
        self.estimate == 0.0
    }

    /// Lower end of the rigorous interval.
    pub fn lower(&self) -> f64 {
        self.estimate * (-self.log_tail_bound).exp()
    }

    /// Upper end of the rigorous interval.
    pub fn upper(&self) -> f64 {
        self.estimate * self.log_tail_bound.exp()
    }

    pub fn width(&self) -> f64 {
        self.upper() - self.lower()
    }

    pub fn halfwidth(&self) -> f64 {
        self.width() / 2.0
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower() <= x && x <= self.upper()
    }

    pub fn overlaps(&self, other: &SeriesValue) -> bool {
        self.lower() <= other.upper() && other.lower() <= self.upper()
    }

    /// Interval product: estimates multiply, log bounds add.
    pub fn product(&self, other: &SeriesValue) -> SeriesValue {
        let truncation = self.truncation.min(other.truncation);
        if self.is_zero() || other.is_zero() {
            return SeriesValue::exact_zero(truncation);
        }
        SeriesValue::new(
            self.estimate * other.estimate,
            self.log_tail_bound + other.log_tail_bound,
            truncation,
        )
    }
}

/// Minimum admissible truncation for the floating evaluator.
pub fn min_truncation(tuple: &HTuple) -> u64 {
    let k = tuple.k() as u64;
    (4 * k * k).max(tuple.diameter() + 1)
}

fn check_truncation(tuple: &HTuple, t: u64, table: &PrimeTable) -> Result<()> {
    let required = min_truncation(tuple);
    if t < required {
        return Err(Error::InvalidArgument(format!(
            "truncation {t} below the required minimum {required} (max of 4k^2 and diameter+1)"
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

/// True iff some prime fully occupies the tuple's residues, which forces the
/// series to vanish. Only p <= k can be full.
fn vanishes(tuple: &HTuple) -> bool {
    !tuple.is_admissible()
}

/// Log of the Euler factor at p: ln(1 - nu/p) - k ln(1 - 1/p).
/// Caller guarantees nu < p.
#[inline]
fn log_factor(p: u64, nu: u64, k: u64) -> f64 {
    let pf = p as f64;
    (-(nu as f64) / pf).ln_1p() - (k as f64) * (-1.0 / pf).ln_1p()
}

/// Partial product over p <= t in log space, no precondition checks.
/// Exposed to tests so the float-vs-rational comparison can cover small t.
pub(crate) fn partial_product_f64(tuple: &HTuple, t: u64, table: &PrimeTable) -> f64 {
    let k = tuple.k() as u64;
    let primes = table.primes_up_to(t);
    let log_sum = par_kahan_sum(primes.len(), |i| {
        let p = primes[i];
        log_factor(p, tuple.residue_count(p), k)
    });
    log_sum.exp()
}

/// Evaluate the singular series truncated at prime bound `t`.
///
/// Returns the truncated product together with the tail bound 2k^2/t. A
/// non-admissible tuple yields exactly zero.
pub fn singular_series(tuple: &HTuple, t: u64, table: &PrimeTable) -> Result<SeriesValue> {
    check_truncation(tuple, t, table)?;
    if vanishes(tuple) {
        return Ok(SeriesValue::exact_zero(t));
    }
    let k = tuple.k() as f64;
    let estimate = partial_product_f64(tuple, t, table);
    let bound = 2.0 * k * k / t as f64;
    Ok(SeriesValue::new(estimate, bound, t))
}

/// Exact rational value of the partial product over p <= t:
///
/// ```text
/// prod_{p <= t} (p - nu_p) * p^(k-1) / (p - 1)^k
/// ```
///
/// Serves as the oracle for the floating evaluator at matching truncation.
pub fn singular_series_exact_partial(
    tuple: &HTuple,
    t: u64,
    table: &PrimeTable,
) -> Result<BigRational> {
    if t > EXACT_TRUNCATION_BUDGET {
        return Err(Error::ResourceLimit {
            what: "exact-mode truncation",
            requested: t as u128,
            budget: EXACT_TRUNCATION_BUDGET as u128,
        });
    }
    if t > table.limit() {
        return Err(Error::TableTooSmall {
            required: t,
            limit: table.limit(),
        });
    }
    let k = tuple.k() as u64;
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for &p in table.primes_up_to(t) {
        let nu = tuple.residue_count(p);
        if nu == p {
            return Ok(BigRational::zero());
        }
        // (1 - nu/p)(1 - 1/p)^-k = (p - nu) p^(k-1) / (p - 1)^k
        num *= BigInt::from(p - nu) * BigInt::from(p).pow(k as u32 - 1);
        den *= BigInt::from(p - 1).pow(k as u32);
    }
    Ok(BigRational::new(num, den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::ToPrimitive;

    fn table() -> PrimeTable {
        PrimeTable::build(100_000).unwrap()
    }

    fn tup(s: &str) -> HTuple {
        s.parse().unwrap()
    }

    #[test]
    fn singleton_is_exactly_one() {
        let t = table();
        let v = singular_series(&tup("0"), 100, &t).unwrap();
        // Every factor is (1 - 1/p)(1 - 1/p)^-1; the log terms cancel exactly.
        assert_eq!(v.estimate(), 1.0);
        assert!(v.contains(1.0));
    }

    #[test]
    fn non_admissible_vanishes_exactly() {
        let t = table();
        let v = singular_series(&tup("0,1"), 100, &t).unwrap();
        assert_eq!(v.estimate(), 0.0);
        assert_eq!(v.log_tail_bound(), 0.0);

        let w = singular_series(&tup("0,2,4"), 100, &t).unwrap();
        assert!(w.is_zero());
    }

    #[test]
    fn zero_iff_non_admissible() {
        let t = table();
        for s in ["0", "0,2", "0,2,6", "0,4,6,10", "0,1", "0,2,4", "0,3,6"] {
            let x = tup(s);
            let required = min_truncation(&x);
            let v = singular_series(&x, required.max(200), &t).unwrap();
            assert_eq!(v.is_zero(), !x.is_admissible(), "tuple {s}");
        }
    }

    #[test]
    fn truncation_preconditions() {
        let t = table();
        // k = 2 needs T >= 16; diameter 2 needs T >= 3.
        assert!(singular_series(&tup("0,2"), 15, &t).is_err());
        assert!(singular_series(&tup("0,2"), 16, &t).is_ok());
        // diameter dominates for wide tuples
        let wide = tup("0,100");
        assert!(singular_series(&wide, 50, &t).is_err());
        assert!(singular_series(&wide, 101, &t).is_ok());
        // table too small
        assert!(matches!(
            singular_series(&tup("0,2"), 200_000, &t),
            Err(Error::TableTooSmall { .. })
        ));
    }

    #[test]
    fn exact_partial_hand_values() {
        let t = table();
        // (1-1/2)(1-1/2)^-2 * (1-2/3)(1-1/3)^-2 = 2 * 3/4 = 3/2
        let v = singular_series_exact_partial(&tup("0,2"), 3, &t).unwrap();
        assert_eq!(v, BigRational::new(BigInt::from(3), BigInt::from(2)));

        let one = singular_series_exact_partial(&tup("0"), 50, &t).unwrap();
        assert_eq!(one, BigRational::one());

        let zero = singular_series_exact_partial(&tup("0,1"), 2, &t).unwrap();
        assert_eq!(zero, BigRational::zero());
    }

    #[test]
    fn exact_partial_budget() {
        let t = table();
        assert!(matches!(
            singular_series_exact_partial(&tup("0,2"), EXACT_TRUNCATION_BUDGET + 1, &t),
            Err(Error::ResourceLimit { .. })
        ));
    }

    /// Units in the last place between two finite f64 values.
    fn ulp_distance(a: f64, b: f64) -> u64 {
        let ai = a.to_bits() as i64;
        let bi = b.to_bits() as i64;
        (ai - bi).unsigned_abs()
    }

    #[test]
    fn float_matches_exact_rational_within_10_ulp() {
        let t = table();
        let tuples = [
            tup("0"),
            tup("0,2"),
            tup("0,2,6"),
            tup("0,4,6,10"),
            tup("0,4,6,10,12"),
            tup("0,4,6,10,12,16"),
        ];
        for x in &tuples {
            for bound in [2u64, 3, 5, 10, 25, 50, 97, 100] {
                let exact = singular_series_exact_partial(x, bound, &t).unwrap();
                let exact_f = exact.to_f64().unwrap();
                let float = partial_product_f64(x, bound, &t);
                assert!(
                    ulp_distance(float, exact_f) <= 10,
                    "tuple {x} T={bound}: float {float:e} vs exact {exact_f:e} ({} ulp)",
                    ulp_distance(float, exact_f)
                );
            }
        }
    }

    #[test]
    fn tail_bound_dominates_brute_force_tail() {
        // Re-derivation check for the 2k^2/T bound: the measured log of the
        // tail product between T and a much larger T' must stay below it.
        let t = table();
        let cases = [
            (tup("0,2"), 16u64),
            (tup("0,2"), 100),
            (tup("0,2,6"), 36),
            (tup("0,4,6,10"), 64),
            (tup("0,4,6,10,12"), 100),
            (tup("0,4,6,10,12,16"), 144),
        ];
        for (x, start) in &cases {
            let k = x.k() as f64;
            let t_far = 100_000u64;
            let mut log_tail = 0.0f64;
            let mut abs_log_tail = 0.0f64;
            for &p in t.primes_up_to(t_far) {
                if p <= *start {
                    continue;
                }
                let nu = x.nu_p(p, Some(&t)).unwrap();
                let lf = ((p - nu) as f64 / p as f64).ln() - k * ((p - 1) as f64 / p as f64).ln();
                log_tail += lf;
                abs_log_tail += lf.abs();
            }
            let bound = 2.0 * k * k / *start as f64;
            assert!(
                abs_log_tail <= bound,
                "tuple {x} T={start}: sum |log factor| = {abs_log_tail:e} exceeds bound {bound:e}"
            );
            assert!(log_tail.abs() <= bound);
        }
    }

    #[test]
    fn interval_nesting_under_higher_truncation() {
        let t = table();
        for s in ["0,2", "0,2,6", "0,4,6,10"] {
            let x = tup(s);
            let grid = [200u64, 1_000, 10_000, 100_000];
            let mut prev: Option<SeriesValue> = None;
            for &bound in &grid {
                let v = singular_series(&x, bound, &t).unwrap();
                if let Some(outer) = prev {
                    assert!(
                        outer.lower() <= v.lower() && v.upper() <= outer.upper(),
                        "tuple {s}: [{:e},{:e}] at T={} not inside [{:e},{:e}]",
                        v.lower(),
                        v.upper(),
                        bound,
                        outer.lower(),
                        outer.upper()
                    );
                }
                prev = Some(v);
            }
        }
    }

    #[test]
    fn translation_invariance_bit_for_bit() {
        let t = table();
        let a: HTuple = "0,2,6".parse().unwrap();
        let b = HTuple::new(vec![17, 19, 23]).unwrap();
        let va = singular_series(&a, 1_000, &t).unwrap();
        let vb = singular_series(&b, 1_000, &t).unwrap();
        assert_eq!(va.estimate().to_bits(), vb.estimate().to_bits());
    }

    #[test]
    fn twin_constant_at_moderate_truncation() {
        // 2*C2 = 1.32032363169... ; at T = 10^5 the estimate should already
        // sit within ~1e-4 of it, and the interval must contain it.
        let t = table();
        let twin = 1.3203236316937392f64;
        let v = singular_series(&tup("0,2"), 100_000, &t).unwrap();
        assert!((v.estimate() - twin).abs() < 1e-4);
        assert!(v.contains(twin));
    }

    #[test]
    fn series_value_product_combines_intervals() {
        let a = SeriesValue::new(2.0, 0.1, 100);
        let b = SeriesValue::new(3.0, 0.2, 50);
        let c = a.product(&b);
        assert_eq!(c.estimate(), 6.0);
        assert!((c.log_tail_bound() - 0.3).abs() < 1e-15);
        assert_eq!(c.truncation(), 50);
        let z = a.product(&SeriesValue::exact_zero(100));
        assert!(z.is_zero());
        assert_eq!(z.log_tail_bound(), 0.0);
    }
}
