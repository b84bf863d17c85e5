//! Compensated summation and batch-means error estimation for MCMC series.

/// Kahan compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Kahan { sum: 0.0, c: 0.0 }
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn sum(&self) -> f64 {
        self.sum
    }
}

/// Fixed-batch accumulator for one scalar series of known length.
///
/// The series is split into `n_batches` contiguous batches; the standard
/// error of the mean is the standard deviation of the batch means divided by
/// sqrt(number of batches).
#[derive(Clone, Debug)]
pub struct BatchAccumulator {
    planned: usize,
    n_batches: usize,
    count: usize,
    batch_sums: Vec<Kahan>,
    batch_counts: Vec<usize>,
    total: Kahan,
    total_sq: Kahan,
}

impl BatchAccumulator {
    pub fn new(planned: usize, n_batches: usize) -> Self {
        let n_batches = n_batches.max(1).min(planned.max(1));
        BatchAccumulator {
            planned: planned.max(1),
            n_batches,
            count: 0,
            batch_sums: vec![Kahan::new(); n_batches],
            batch_counts: vec![0; n_batches],
            total: Kahan::new(),
            total_sq: Kahan::new(),
        }
    }

    pub fn push(&mut self, x: f64) {
        let b = (self.count * self.n_batches / self.planned).min(self.n_batches - 1);
        self.batch_sums[b].add(x);
        self.batch_counts[b] += 1;
        self.total.add(x);
        self.total_sq.add(x * x);
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

/// Mean, batch-means standard error and effective sample size pooled over
/// one or more chains.
#[derive(Clone, Copy, Debug)]
pub struct PooledStats {
    pub mean: f64,
    pub std_err: f64,
    pub n_effective: f64,
    pub n_samples: usize,
}

pub fn pool(accs: &[BatchAccumulator]) -> PooledStats {
    let n: usize = accs.iter().map(|a| a.count).sum();
    let mut total = Kahan::new();
    let mut total_sq = Kahan::new();
    for a in accs {
        total.add(a.total.sum());
        total_sq.add(a.total_sq.sum());
    }
    let mean = total.sum() / n as f64;

    let mut means = Vec::new();
    for a in accs {
        for (s, &c) in a.batch_sums.iter().zip(a.batch_counts.iter()) {
            if c > 0 {
                means.push(s.sum() / c as f64);
            }
        }
    }
    let b = means.len();
    if b < 2 || n < 2 {
        return PooledStats {
            mean,
            std_err: 0.0,
            n_effective: n as f64,
            n_samples: n,
        };
    }
    let bm = means.iter().sum::<f64>() / b as f64;
    let var_b = means.iter().map(|m| (m - bm) * (m - bm)).sum::<f64>() / (b - 1) as f64;
    let std_err = (var_b / b as f64).sqrt();

    let var_series = (total_sq.sum() - n as f64 * mean * mean) / (n - 1) as f64;
    let n_effective = if std_err > 0.0 && var_series > 0.0 {
        var_series / (std_err * std_err)
    } else {
        n as f64
    };
    PooledStats {
        mean,
        std_err,
        n_effective,
        n_samples: n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn kahan_beats_naive_on_cancellation() {
        let mut k = Kahan::new();
        for _ in 0..1_000_000 {
            k.add(0.1);
        }
        assert!((k.sum() - 100_000.0).abs() < 1e-9);
    }

    #[test]
    fn iid_batch_means_recover_sigma_over_sqrt_n() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 40_000;
        let mut acc = BatchAccumulator::new(n, 20);
        for _ in 0..n {
            acc.push(rng.random::<f64>());
        }
        let s = pool(std::slice::from_ref(&acc));
        // Uniform(0,1): sigma/sqrt(n) = 0.2887/200 ~ 1.44e-3.
        assert!((s.mean - 0.5).abs() < 5.0 * 1.44e-3);
        assert!(s.std_err > 0.5e-3 && s.std_err < 3e-3, "std_err={}", s.std_err);
        // iid series: effective size should be near the sample count.
        assert!(s.n_effective > 0.25 * n as f64, "n_eff={}", s.n_effective);
    }

    #[test]
    fn constant_series_has_zero_error() {
        let mut acc = BatchAccumulator::new(100, 20);
        for _ in 0..100 {
            acc.push(2.5);
        }
        let s = pool(std::slice::from_ref(&acc));
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.std_err, 0.0);
    }
}
