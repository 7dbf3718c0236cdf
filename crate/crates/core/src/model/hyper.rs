use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Priors of the inter-GM. `K = alpha.len()`, `L = pi.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Dirichlet concentration of each `theta` row.
    pub alpha: Vec<f64>,
    /// Normal-Wishart mean scale.
    pub beta: f64,
    /// Normal-Wishart prior mean.
    pub m: [f64; 3],
    /// Inverse of the Wishart scale matrix.
    pub w_inv: [[f64; 3]; 3],
    /// Wishart degrees of freedom.
    pub nu: f64,
    /// Prior over signs.
    pub pi: Vec<f64>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self::analysis_defaults()
    }
}

impl Hyperparams {
    /// The analysis configuration: five categories and five signs, with
    /// `nu = 5` (dimension + 2).
    pub fn analysis_defaults() -> Self {
        Self {
            alpha: vec![0.1; 5],
            beta: 1.0,
            m: [50.0, 0.0, 0.0],
            w_inv: [[200.0, 0.0, 0.0], [0.0, 200.0, 0.0], [0.0, 0.0, 200.0]],
            nu: 5.0,
            pi: vec![0.2; 5],
        }
    }

    pub fn categories(&self) -> usize {
        self.alpha.len()
    }

    pub fn signs(&self) -> usize {
        self.pi.len()
    }

    pub fn mean_vector(&self) -> Vector3<f64> {
        Vector3::from(self.m)
    }

    pub fn w_inv_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.w_inv[i][j])
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_empty() || self.alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(invalid("alpha must be non-empty with every entry > 0"));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(invalid("beta must be > 0"));
        }
        if self.m.iter().any(|v| !v.is_finite()) {
            return Err(invalid("prior mean m must be finite"));
        }
        if !(self.nu.is_finite() && self.nu > (super::DIM - 1) as f64) {
            return Err(invalid(format!("nu must exceed {}", super::DIM - 1)));
        }
        let w_inv = self.w_inv_matrix();
        if (w_inv - w_inv.transpose()).amax() > 1e-9 * w_inv.amax().max(1.0) {
            return Err(invalid("w_inv must be symmetric"));
        }
        if w_inv.cholesky().is_none() {
            return Err(invalid("w_inv must be positive-definite"));
        }
        // zero entries are allowed so degenerate (one-hot) sign priors can be expressed
        if self.pi.is_empty() || self.pi.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid("pi must be non-empty with every entry >= 0"));
        }
        let total: f64 = self.pi.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("pi must sum to 1 (got {total})")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let h = Hyperparams::analysis_defaults();
        h.validate().unwrap();
        assert_eq!(h.categories(), 5);
        assert_eq!(h.signs(), 5);
        assert_eq!(h.alpha, vec![0.1; 5]);
        assert_eq!(h.m, [50.0, 0.0, 0.0]);
        assert_eq!(h.w_inv[1][1], 200.0);
    }

    #[test]
    fn rejects_bad_values() {
        let mut h = Hyperparams::default();
        h.nu = 2.0;
        assert!(h.validate().is_err());
        let mut h = Hyperparams::default();
        h.pi = vec![0.5, 0.6];
        assert!(h.validate().is_err());
        let mut h = Hyperparams::default();
        h.alpha[2] = 0.0;
        assert!(h.validate().is_err());
        let mut h = Hyperparams::default();
        h.w_inv[0][1] = 5.0;
        assert!(h.validate().is_err());
    }
}
