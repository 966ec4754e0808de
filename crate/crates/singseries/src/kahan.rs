//! Compensated summation and deterministic chunked parallel reduction.

use rayon::prelude::*;

/// Kahan compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let y = value - self.compensation;
        let t = self.sum + y;
        self.compensation = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Fixed chunk size for parallel reductions. Constant so that results do not
/// depend on the thread count: chunk partial sums are always combined in
/// chunk-index order.
pub(crate) const REDUCE_CHUNK: usize = 1 << 14;

/// Sum f(0) + ... + f(n-1) with per-chunk Kahan accumulation, chunks reduced
/// in index order. Byte-identical run to run for any thread pool size.
pub(crate) fn par_kahan_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let num_chunks = n.div_ceil(REDUCE_CHUNK);
    let partials: Vec<f64> = (0..num_chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * REDUCE_CHUNK;
            let end = (start + REDUCE_CHUNK).min(n);
            let mut acc = KahanSum::new();
            for i in start..end {
                acc.add(f(i));
            }
            acc.value()
        })
        .collect();
    let mut total = KahanSum::new();
    for v in partials {
        total.add(v);
    }
    total.value()
}
