//! Streaming means and standard errors over replicate records.

use serde::Serialize;

/// Ensemble mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { mean: value, se: 0.0 }
    }
}

/// Per-coordinate Welford accumulators over equal-length records. Merging
/// uses the pairwise update, so the result depends only on the order in which
/// records and partial accumulators are combined.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct FlatMoments {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl FlatMoments {
    pub(crate) fn new(len: usize) -> Self {
        Self { n: 0, mean: vec![0.0; len], m2: vec![0.0; len] }
    }

    pub(crate) fn count(&self) -> usize {
        self.n
    }

    pub(crate) fn push(&mut self, record: &[f64]) {
        debug_assert_eq!(record.len(), self.mean.len());
        self.n += 1;
        let inv = 1.0 / self.n as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(record) {
            let d = x - *m;
            *m += d * inv;
            *s += d * (x - *m);
        }
    }

    pub(crate) fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * nb / n;
            self.m2[i] += other.m2[i] + d * d * na * nb / n;
        }
        self.n += other.n;
    }

    pub(crate) fn estimate(&self, i: usize) -> Estimate {
        let n = self.n as f64;
        let se = if self.n < 2 { f64::NAN } else { (self.m2[i].max(0.0) / (n - 1.0) / n).sqrt() };
        Estimate { mean: self.mean[i], se }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn matches_two_pass_formulas() {
        let data: Vec<[f64; 2]> = (0..37).map(|i| [(i as f64 * 0.7).sin(), 1e6 + i as f64]).collect();
        let mut m = FlatMoments::new(2);
        for d in &data {
            m.push(d);
        }
        for c in 0..2 {
            let xs: Vec<f64> = data.iter().map(|d| d[c]).collect();
            let mean = xs.iter().sum::<f64>() / 37.0;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 36.0;
            let e = m.estimate(c);
            assert_relative_eq!(e.mean, mean, max_relative = 1e-12);
            assert_relative_eq!(e.se, (var / 37.0).sqrt(), max_relative = 1e-9);
        }
    }

    #[test]
    fn merge_equals_sequential() {
        let mut a = FlatMoments::new(1);
        let mut b = FlatMoments::new(1);
        let mut all = FlatMoments::new(1);
        for i in 0..20 {
            let x = [(i * i) as f64 * 0.01];
            if i < 8 {
                a.push(&x);
            } else {
                b.push(&x);
            }
            all.push(&x);
        }
        a.merge(&b);
        assert_eq!(a.count(), 20);
        assert_relative_eq!(a.estimate(0).mean, all.estimate(0).mean, max_relative = 1e-14);
        assert_relative_eq!(a.estimate(0).se, all.estimate(0).se, max_relative = 1e-12);
    }

    #[test]
    fn constant_records_have_zero_error() {
        let mut m = FlatMoments::new(1);
        for _ in 0..10 {
            m.push(&[0.3]);
        }
        assert_eq!(m.estimate(0), Estimate { mean: 0.3, se: 0.0 });
    }
}
