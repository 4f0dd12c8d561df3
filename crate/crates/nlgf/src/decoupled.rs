//! The equivalent scalar channel of the high-dimensional problem.
//!
//! Per symbol, the pair (true label, Bayesian estimate) converges in
//! distribution to `(S, tanh(Y / rho_hat^2))` with `Y = S + rho Z`, where
//! the effective noise levels come from the local field of the RS solution:
//! `rho = sqrt(L) / E`, `rho_hat = 1 / sqrt(E)`.

use crate::error::{Error, Result};
use crate::quad::QuadratureRule;

/// Effective and postulated noise levels of the scalar channel.
#[derive(Debug, Clone, Copy)]
pub struct DecoupledParams {
    rho: f64,
    rho_hat: f64,
}

impl DecoupledParams {
    pub fn new(rho: f64, rho_hat: f64) -> Result<Self> {
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::Negative {
                name: "rho",
                value: rho,
            });
        }
        crate::error::ensure_positive("rho_hat", rho_hat)?;
        Ok(Self { rho, rho_hat })
    }

    /// Map the local-field variance and mean of an RS solution to the
    /// scalar channel.  A vanishing mean leaves the channel degenerate.
    pub fn from_rs(l: f64, e: f64) -> Result<Self> {
        crate::error::ensure_nonnegative("local field variance", l)?;
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::NonPositive {
                name: "local field mean",
                value: e,
            });
        }
        Self::new(l.sqrt() / e, 1.0 / e.sqrt())
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn rho_hat(&self) -> f64 {
        self.rho_hat
    }

    /// Scalar Bayesian estimate of a +-1 label from observation `y`:
    /// `tanh(y / rho_hat^2)`.
    pub fn estimate(&self, y: f64) -> f64 {
        (y / (self.rho_hat * self.rho_hat)).tanh()
    }

    /// Joint moment `E[S^kappa Shat^tau]`.  Odd total order vanishes by
    /// the joint sign symmetry of (S, Shat); even total order reduces to
    /// `E_Z[tanh^tau((1 + rho Z) / rho_hat^2)]`.
    pub fn joint_moment(&self, kappa: u32, tau: u32, rule: &QuadratureRule) -> f64 {
        if (kappa + tau) % 2 == 1 {
            return 0.0;
        }
        if tau == 0 {
            return 1.0;
        }
        let h2 = self.rho_hat * self.rho_hat;
        rule.expect(|z| ((1.0 + self.rho * z) / h2).tanh().powi(tau as i32))
            .expect("tanh powers are finite")
    }

    /// `(m, q) = (E[S Shat], E[Shat^2])`.
    pub fn overlap_and_power(&self, rule: &QuadratureRule) -> (f64, f64) {
        (self.joint_moment(1, 1, rule), self.joint_moment(0, 2, rule))
    }

    /// Expected distortion `E[D(S, Shat)]` for a pairwise distortion
    /// function on {-1, +1} x (-1, 1).
    pub fn distortion<D>(&self, d: D, rule: &QuadratureRule) -> Result<f64>
    where
        D: Fn(f64, f64) -> f64,
    {
        let h2 = self.rho_hat * self.rho_hat;
        let plus = rule.expect(|z| d(1.0, ((1.0 + self.rho * z) / h2).tanh()))?;
        let minus = rule.expect(|z| d(-1.0, ((-1.0 + self.rho * z) / h2).tanh()))?;
        Ok(0.5 * (plus + minus))
    }
}
