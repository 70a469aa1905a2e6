//! Log-domain numeric kernels.
//!
//! All probability mass in this crate lives in the log domain with
//! `f64::NEG_INFINITY` standing for zero probability. The conventions are
//! `-inf + finite = -inf`, `exp(-inf) = 0`, and `0 * ln 0 = 0`.

/// Log-sum-exp of two values.
#[inline]
pub fn logsumexp2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// Log-sum-exp over a slice with max-shift for stability.
///
/// Empty slices and all `-inf` slices return `-inf`.
pub fn logsumexp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| (v - m).exp()).sum();
    m + sum.ln()
}

/// Streaming log-sum-exp accumulator with a fixed left-to-right reduction
/// order. Used where the term count is too large to collect.
#[derive(Debug, Clone, Copy)]
pub struct StreamingLse {
    max: f64,
    sum: f64,
}

impl StreamingLse {
    pub fn new() -> Self {
        StreamingLse {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    pub fn push(&mut self, v: f64) {
        if v == f64::NEG_INFINITY {
            return;
        }
        if v <= self.max {
            self.sum += (v - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - v).exp() + 1.0;
            self.max = v;
        }
    }

    /// Merge another accumulator (chunked parallel reductions).
    pub fn merge(&mut self, other: StreamingLse) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max <= self.max {
            self.sum += other.sum * (other.max - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - other.max).exp() + other.sum;
            self.max = other.max;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

impl Default for StreamingLse {
    fn default() -> Self {
        Self::new()
    }
}

/// Subtract the max entry so the largest log value becomes 0.
/// All `-inf` vectors are left untouched.
pub fn max_normalize(values: &mut [f64]) {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m == 0.0 {
        return;
    }
    for v in values.iter_mut() {
        if *v != f64::NEG_INFINITY {
            *v -= m;
        }
    }
}

/// Convert a log table to a normalized probability table.
pub fn to_probabilities(log_values: &[f64]) -> Vec<f64> {
    let z = logsumexp(log_values);
    if z == f64::NEG_INFINITY {
        // no mass anywhere; fall back to uniform to keep downstream code total
        let n = log_values.len().max(1);
        return vec![1.0 / n as f64; log_values.len()];
    }
    log_values.iter().map(|&v| (v - z).exp()).collect()
}

/// Shannon entropy of a probability table, with `0 ln 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// `sum_x p(x) * theta(x)` with the convention `0 * (-inf) = 0`.
pub fn dot_logpot(theta: &[f64], p: &[f64]) -> f64 {
    debug_assert_eq!(theta.len(), p.len());
    let mut acc = 0.0;
    for (&t, &q) in theta.iter().zip(p) {
        if q > 0.0 {
            acc += if t == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            } else {
                t * q
            };
        }
    }
    acc
}

/// KL divergence `sum p ln(p/q)`; `+inf` on support violation.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            acc += a * (a / b).ln();
        }
    }
    acc
}
