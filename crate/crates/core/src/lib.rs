//! Simulation and estimation of mutual-information / MMSE relations for
//! input-output systems `dY = √r·F(t, X, Y)dt + G(t, Y)dW`.
//!
//! The crate discretizes the system with Euler–Maruyama, computes exact
//! conditional expectations on the discretized model, estimates MMSE surfaces
//! and mutual information by outer Monte Carlo, and checks the identities
//! linking them. Closed-form and quadrature oracles live in [`oracle`]; the
//! SNR-class probes and the Z-transform in [`classify`].

pub mod classify;
pub mod error;
pub mod estimate;
pub mod grid;
pub mod inputs;
pub mod mmse;
pub mod noise;
pub mod oracle;
mod probe;
pub mod quadrature;
pub mod simulate;
pub mod system;

pub use classify::{classify_system, z_transform, SnrClass, SnrClassReport, ZPath};
pub use error::{Error, Result};
pub use grid::{Path, TimeGrid};
pub use mmse::{run_ensemble, Ensemble, EnsembleSpec, Estimate, Family, IdentityResidualReport, InfoCurve, MmseSurface, Tolerances};
pub use inputs::{catalog, catalog_entry, CatalogOverrides, InputModel, SystemCatalogEntry};
pub use noise::NoiseBundle;
pub use system::FunctionalSystem;
