//! Exact (Clopper–Pearson) binomial confidence intervals.

use serde::{Deserialize, Serialize};

use super::StatsError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub low: f64,
    pub high: f64,
    pub mean: f64,
    pub level: f64,
    pub x: u64,
    pub n: u64,
}

pub fn clopper_pearson(x: u64, n: u64, level: f64) -> Result<ConfidenceInterval, StatsError> {
    if n == 0 || x > n {
        return Err(StatsError::Domain(format!("need 0 <= x <= n and n >= 1, got x={x}, n={n}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::Domain(format!("confidence level {level} outside (0, 1)")));
    }
    let tail = (1.0 - level) / 2.0;
    let binom = Binomial::new(n, x.min(n - x) + 1);
    // P(X >= x) = tail
    let low = if x == 0 { 0.0 } else { bisect(|p| 1.0 - binom.cdf(x - 1, p), tail) };
    // P(X <= x) = tail
    let high = if x == n { 1.0 } else { bisect(|p| 1.0 - binom.cdf(x, p), 1.0 - tail).max(low) };
    Ok(ConfidenceInterval { low, high, mean: x as f64 / n as f64, level, x, n })
}

/// Root of `g(p) = target` on (0, 1) for increasing `g`.
fn bisect(g: impl Fn(f64) -> f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Binomial(n, p) CDF evaluated in log space, summing over the shorter tail.
struct Binomial {
    n: u64,
    /// ln C(n, k) for k < len
    ln_choose: Vec<f64>,
}

impl Binomial {
    fn new(n: u64, upto: u64) -> Self {
        let len = upto.min(n) as usize + 1;
        let mut ln_choose = Vec::with_capacity(len);
        let mut acc = 0.0;
        ln_choose.push(acc);
        for k in 1..len as u64 {
            acc += ((n - k + 1) as f64).ln() - (k as f64).ln();
            ln_choose.push(acc);
        }
        Binomial { n, ln_choose }
    }

    /// P(X <= k) for X ~ Binomial(n, p).
    fn cdf(&self, k: u64, p: f64) -> f64 {
        if k >= self.n {
            return 1.0;
        }
        if k < self.n - k {
            self.lower_sum(k, p)
        } else {
            // P(X <= k) = 1 - P(n - X <= n - k - 1), and n - X ~ Binomial(n, 1 - p)
            1.0 - self.lower_sum(self.n - k - 1, 1.0 - p)
        }
    }

    /// Sum of pmf(0..=k) by log-sum-exp.
    fn lower_sum(&self, k: u64, p: f64) -> f64 {
        if p <= 0.0 {
            return 1.0;
        }
        if p >= 1.0 {
            return 0.0;
        }
        let (lp, lq) = (p.ln(), (-p).ln_1p());
        let n = self.n as f64;
        let terms: Vec<f64> =
            (0..=k).map(|i| self.ln_choose[i as usize] + i as f64 * lp + (n - i as f64) * lq).collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return 0.0;
        }
        (max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()).exp().min(1.0)
    }
}
