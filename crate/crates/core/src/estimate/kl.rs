//! Expected one-step log-likelihood-ratio increments.
//!
//! Given the past, the increment `Δy_j` has density `N(m_x, s²)` under the
//! true input and the predictive mixture `Σ_c w_c N(m_c, s²)` under the
//! output law alone. The expected log-RN increment over the fresh noise is the
//! Kullback–Leibler divergence between the two.

use std::sync::OnceLock;

use crate::quadrature::GaussHermite;

const KL_NODES: usize = 32;

fn rule() -> &'static GaussHermite {
    static RULE: OnceLock<GaussHermite> = OnceLock::new();
    RULE.get_or_init(|| GaussHermite::new(KL_NODES))
}

/// `KL(N(m_x, s²) ‖ Σ_c w_c N(m_c, s²))`. Zero weights are skipped.
pub(crate) fn kl_to_mixture(true_mean: f64, means: &[f64], weights: &[f64], s2: f64) -> f64 {
    let s = s2.sqrt();
    // With z = m_x + s·u: log N(z; m_x) − log N(z; m_c) = −(d² + 2 d s u) / (2 s²), d = m_x − m_c.
    let mut buf = [0.0f64; 8];
    let mut heap;
    let terms: &mut [f64] = if means.len() <= buf.len() {
        &mut buf[..means.len()]
    } else {
        heap = vec![0.0; means.len()];
        &mut heap
    };
    let kl = -rule().expect_standard_normal(|u| {
        let mut mx = f64::NEG_INFINITY;
        for (c, t) in terms.iter_mut().enumerate() {
            *t = if weights[c] > 0.0 {
                let d = true_mean - means[c];
                weights[c].ln() - (d * d + 2.0 * d * s * u) / (2.0 * s2)
            } else {
                f64::NEG_INFINITY
            };
            mx = mx.max(*t);
        }
        mx + terms.iter().map(|t| (t - mx).exp()).sum::<f64>().ln()
    });
    kl.max(0.0)
}

/// `KL(N(m1, v1) ‖ N(m2, v2))`.
pub(crate) fn kl_gaussian(m1: f64, v1: f64, m2: f64, v2: f64) -> f64 {
    0.5 * ((v2 / v1).ln() + (v1 + (m1 - m2).powi(2)) / v2 - 1.0)
}
