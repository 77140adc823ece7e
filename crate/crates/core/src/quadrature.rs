//! Gauss–Hermite rules and trapezoid sums.

use std::f64::consts::PI;

/// Nodes and weights for `∫ e^{−x²} h(x) dx ≈ Σ w_i h(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Roots of the physicists' Hermite polynomial `H_n`, bracketed by Sturm
    /// counts on the Jacobi matrix and polished by Newton iteration on the
    /// orthonormal recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        // Squared off-diagonal entries of the symmetric Jacobi matrix.
        let b2: Vec<f64> = (1..n).map(|j| j as f64 / 2.0).collect();
        let count_below = |x: f64| -> usize {
            let mut q = -x;
            let mut count = usize::from(q < 0.0);
            for b in &b2 {
                let d = if q == 0.0 { f64::MIN_POSITIVE } else { q };
                q = -x - b / d;
                count += usize::from(q < 0.0);
            }
            count
        };
        let upper = (2.0 * nf + 1.0).sqrt() + 1.0;
        for i in 0..n.div_ceil(2) {
            let target = n - 1 - i;
            let (mut lo, mut hi) = (0.0, upper);
            for _ in 0..64 {
                let mid = 0.5 * (lo + hi);
                if count_below(mid) > target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let mut z = 0.5 * (lo + hi);
            let mut pp;
            let mut log_scale;
            let mut iter = 0;
            loop {
                let (p1, p2, scale) = orthonormal_hermite(n, z);
                pp = (2.0 * nf).sqrt() * p2;
                log_scale = scale;
                let step = p1 / pp;
                z -= step;
                iter += 1;
                if step.abs() <= 1e-15 * z.abs().max(1.0) || iter == 8 {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 * (-2.0 * log_scale).exp() / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[h(U)]` for `U ~ Normal(0, 1)`.
    pub fn expect_standard_normal(&self, mut h: impl FnMut(f64) -> f64) -> f64 {
        let s2 = std::f64::consts::SQRT_2;
        let sum: f64 = self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * h(s2 * x)).sum();
        sum / PI.sqrt()
    }
}

/// Orthonormal Hermite polynomials `p_n(z)`, `p_{n−1}(z)`, rescaled to avoid
/// overflow; the third value is the natural log of the scale removed.
fn orthonormal_hermite(n: usize, z: f64) -> (f64, f64, f64) {
    let mut p1 = PI.powf(-0.25);
    let mut p2 = 0.0;
    let mut log_scale = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
        if p1.abs() > 1e150 {
            p1 *= 1e-150;
            p2 *= 1e-150;
            log_scale += 150.0 * std::f64::consts::LN_10;
        }
    }
    (p1, p2, log_scale)
}

/// Trapezoid rule on a uniform grid of spacing `h`.
pub fn trapezoid_uniform(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * values[0] + values[1..n - 1].iter().sum::<f64>() + 0.5 * values[n - 1]),
    }
}

/// Trapezoid rule on arbitrary ascending abscissae.
pub fn trapezoid(xs: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), values.len());
    xs.windows(2).zip(values.windows(2)).map(|(x, v)| 0.5 * (x[1] - x[0]) * (v[0] + v[1])).sum()
}

/// Running trapezoid integrals `∫_0^{t_k}` on a uniform grid; entry 0 is 0.
pub fn cumulative_trapezoid_uniform(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    if !values.is_empty() {
        out.push(0.0);
    }
    for w in values.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out
}
