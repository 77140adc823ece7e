//! Drift/diffusion path functionals of the input-output system
//! `dY = √r·F(t, X, Y) dt + G(t, Y) dW`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// `F(k, x, y)`: may read `x[..=k]` and `y[..=k]` only.
pub type DriftFn = dyn Fn(usize, &[f64], &[f64]) -> f64 + Send + Sync;
/// `G(k, y)`: may read `y[..=k]` only.
pub type DiffusionFn = dyn Fn(usize, &[f64]) -> f64 + Send + Sync;

/// A pair of non-anticipative functionals `(F, G)` with the non-degeneracy
/// bound `G² ≥ K > 0`.
///
/// Functionals receive whole-path slices; during simulation entries after `k`
/// are not yet computed and hold zeros. Reading them is a contract violation
/// that [`crate::simulate::probe_non_anticipativity`] detects.
#[derive(Clone)]
pub struct FunctionalSystem {
    name: String,
    drift: Arc<DriftFn>,
    diffusion: Arc<DiffusionFn>,
    nondegeneracy_k: f64,
    additive_awgn: bool,
}

impl fmt::Debug for FunctionalSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionalSystem")
            .field("name", &self.name)
            .field("nondegeneracy_k", &self.nondegeneracy_k)
            .field("additive_awgn", &self.additive_awgn)
            .finish_non_exhaustive()
    }
}

impl FunctionalSystem {
    pub fn new<F, G>(name: impl Into<String>, nondegeneracy_k: f64, drift: F, diffusion: G) -> Result<Self>
    where
        F: Fn(usize, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(usize, &[f64]) -> f64 + Send + Sync + 'static,
    {
        if !(nondegeneracy_k.is_finite() && nondegeneracy_k > 0.0) {
            return Err(Error::InvalidModel(format!(
                "non-degeneracy bound must be positive, got {nondegeneracy_k}"
            )));
        }
        Ok(Self {
            name: name.into(),
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            nondegeneracy_k,
            additive_awgn: false,
        })
    }

    /// The white Gaussian noise channel `dY = √r·X dt + dW`.
    pub fn awgn() -> Self {
        Self {
            name: "awgn".into(),
            drift: Arc::new(|k, x: &[f64], _y: &[f64]| x[k]),
            diffusion: Arc::new(|_, _: &[f64]| 1.0),
            nondegeneracy_k: 1.0,
            additive_awgn: true,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nondegeneracy_k(&self) -> f64 {
        self.nondegeneracy_k
    }

    /// True for the pure additive channel (`F = x(t_k)`, `G ≡ 1`), where the
    /// output at `t_k` is a sufficient statistic for a constant input.
    pub fn is_additive_awgn(&self) -> bool {
        self.additive_awgn
    }

    #[inline]
    pub fn drift(&self, k: usize, x: &[f64], y: &[f64]) -> f64 {
        (self.drift)(k, x, y)
    }

    /// Raw diffusion value, without the non-degeneracy guard.
    #[inline]
    pub fn diffusion_raw(&self, k: usize, y: &[f64]) -> f64 {
        (self.diffusion)(k, y)
    }

    #[inline]
    pub fn diffusion(&self, k: usize, y: &[f64]) -> Result<f64> {
        let g = (self.diffusion)(k, y);
        let g2 = g * g;
        // NaN compares as neither, so it is rejected too.
        if g2.partial_cmp(&self.nondegeneracy_k).is_none_or(|o| o.is_lt()) {
            return Err(Error::NonDegeneracyViolation { step: k, g_squared: g2, bound: self.nondegeneracy_k });
        }
        Ok(g)
    }

    /// `φ = F / G`, unguarded.
    #[inline]
    pub fn phi_raw(&self, k: usize, x: &[f64], y: &[f64]) -> f64 {
        self.drift(k, x, y) / self.diffusion_raw(k, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn awgn_has_unit_diffusion() {
        let s = FunctionalSystem::awgn();
        assert_eq!(s.nondegeneracy_k(), 1.0);
        assert!(s.is_additive_awgn());
        let y = [0.0, 3.0, -2.0];
        assert_eq!(s.diffusion(2, &y).unwrap(), 1.0);
        assert_eq!(s.drift(1, &[0.5, -0.5, 2.0], &y), -0.5);
    }

    #[test]
    fn guard_fires_below_bound() {
        let s = FunctionalSystem::new("weak", 0.25, |_, _, _| 0.0, |k, _| if k == 3 { 0.4 } else { 0.5 }).unwrap();
        let y = [0.0; 5];
        assert!(s.diffusion(2, &y).is_ok());
        assert_eq!(
            s.diffusion(3, &y),
            Err(Error::NonDegeneracyViolation { step: 3, g_squared: 0.4 * 0.4, bound: 0.25 })
        );
        let nan = FunctionalSystem::new("nan", 1.0, |_, _, _| 0.0, |_, _| f64::NAN).unwrap();
        assert!(nan.diffusion(0, &y).is_err());
    }

    #[test]
    fn rejects_non_positive_bound() {
        assert!(FunctionalSystem::new("bad", 0.0, |_, _, _| 0.0, |_, _| 1.0).is_err());
    }
}
