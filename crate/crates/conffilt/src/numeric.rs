//! Small numeric helpers: base-2 log-domain reductions and compensated
//! summation.
//!
//! All probability bookkeeping in this crate is done in log base 2 so that
//! entropies, description lengths, and set-size exponents share one unit
//! (bits). Zero probability is represented by `f64::NEG_INFINITY`.

/// log2(Σ 2^x) over a slice, stable against underflow.
///
/// Returns `NEG_INFINITY` for an empty slice or a slice of `-inf` terms.
pub fn log2_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = terms.iter().map(|&x| (x - max).exp2()).sum();
    max + sum.log2()
}

/// log2(2^a + 2^b), stable against underflow.
pub fn log2_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp2().log2_1p()
}

/// Extension trait providing `log2(1 + x)` via the natural-log `ln_1p`.
trait Log21p {
    fn log2_1p(self) -> f64;
}

impl Log21p for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}

/// Kahan–Babuška compensated accumulator for long linear-domain sums.
///
/// Posterior masses accumulated over up to 2^20 core sequences must stay
/// accurate to ~1e-15 so that the exact-coverage identity holds to 1e-12;
/// naive summation drifts beyond that on adversarial orderings.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Running mean and (unbiased) sample variance via Welford's method.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningMoments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; `None` with fewer than two observations.
    pub fn variance(&self) -> Option<f64> {
        (self.n >= 2).then(|| self.m2 / (self.n - 1) as f64)
    }

    /// Standard error of the mean; `None` with fewer than two observations.
    pub fn std_error(&self) -> Option<f64> {
        self.variance().map(|v| (v / self.n as f64).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log2_sum_exp_matches_direct_sum() {
        // 2^-1 + 2^-2 + 2^-3 = 0.875
        let got = log2_sum_exp(&[-1.0, -2.0, -3.0]);
        assert!((got - 0.875f64.log2()).abs() < 1e-15);
    }

    #[test]
    fn log2_sum_exp_handles_empty_and_impossible() {
        assert_eq!(log2_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(
            log2_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn log2_sum_exp_survives_extreme_spread() {
        // The small term is far below the representable gap; the result
        // must equal the max without producing NaN.
        let got = log2_sum_exp(&[-2000.0, -3.0]);
        assert_eq!(got, -3.0);
    }

    #[test]
    fn log2_add_exp_agrees_with_slice_version() {
        let a = -1.25;
        let b = -7.5;
        assert!((log2_add_exp(a, b) - log2_sum_exp(&[a, b])).abs() < 1e-15);
        assert_eq!(log2_add_exp(f64::NEG_INFINITY, b), b);
    }

    #[test]
    fn kahan_beats_naive_on_small_terms() {
        // 1 followed by 2^20 copies of 2^-60: naive summation loses them
        // entirely; Kahan keeps the total exact to the last ulp here.
        let mut k = KahanSum::new();
        k.add(1.0);
        let tiny = (-60f64).exp2();
        for _ in 0..(1 << 20) {
            k.add(tiny);
        }
        let expected = 1.0 + (1 << 20) as f64 * tiny;
        assert!((k.value() - expected).abs() < 1e-18);
    }

    #[test]
    fn running_moments_match_closed_form() {
        let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        let mut m = RunningMoments::new();
        for &x in &xs {
            m.push(x);
        }
        assert_eq!(m.count(), 8);
        assert!((m.mean() - 5.0).abs() < 1e-15);
        // Unbiased variance of the classic example set is 32/7.
        assert!((m.variance().unwrap() - 32.0 / 7.0).abs() < 1e-15);
    }
}
