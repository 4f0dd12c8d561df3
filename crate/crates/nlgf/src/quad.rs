//! Gauss-Hermite quadrature in the probabilist's normalization.
//!
//! A rule of order `n` integrates exactly against the standard normal
//! density for polynomials up to degree `2n - 1`.  Nodes and weights come
//! from the Golub-Welsch algorithm: the eigenvalues of the symmetric
//! tridiagonal Jacobi matrix of the (probabilists') Hermite recurrence are
//! the nodes, and the squared first eigenvector components are the weights.
//! Since the zeroth moment of N(0,1) is one, the weights sum to one.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Quadrature order used when callers do not ask for a specific one.
///
/// Sufficient for the tanh / log-cosh integrands arising at noise variances
/// down to 0.01 and loads up to 10; exposed as a knob for anything beyond.
pub const DEFAULT_ORDER: usize = 199;

/// A fixed Gauss-Hermite rule: `expect(f)` approximates E[f(Z)], Z ~ N(0,1).
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Build a rule of the given order.  The order must be odd (so a node
    /// sits exactly at zero) and at least 3.
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        if order < 3 || order % 2 == 0 {
            return Err(Error::BadQuadratureOrder(order));
        }
        let (mut nodes, mut weights) = golub_welsch(order);

        // Sort ascending, then enforce exact symmetry: pair each node with
        // its mirror image and average.  The middle node of an odd rule is
        // pinned to zero.
        let mut idx: Vec<usize> = (0..order).collect();
        idx.sort_by(|&a, &b| nodes[a].total_cmp(&nodes[b]));
        let sorted_nodes: Vec<f64> = idx.iter().map(|&i| nodes[i]).collect();
        let sorted_weights: Vec<f64> = idx.iter().map(|&i| weights[i]).collect();
        nodes = sorted_nodes;
        weights = sorted_weights;
        for i in 0..order / 2 {
            let j = order - 1 - i;
            let x = 0.5 * (nodes[j] - nodes[i]);
            nodes[i] = -x;
            nodes[j] = x;
            let w = 0.5 * (weights[i] + weights[j]);
            weights[i] = w;
            weights[j] = w;
        }
        nodes[order / 2] = 0.0;
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }

        Ok(Self {
            order,
            nodes,
            weights,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// E[f(Z)] for Z ~ N(0,1).  Rejects integrands that evaluate to a
    /// non-finite value at any node.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut f: F) -> Result<f64> {
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "quadrature integrand",
                });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// E[tanh(sqrt(l) Z + e)] for l >= 0.
    pub fn expect_tanh(&self, l: f64, e: f64) -> Result<f64> {
        ensure_variance(l)?;
        Ok(self.tanh_moment(l, e))
    }

    /// E[tanh^2(sqrt(l) Z + e)] for l >= 0.
    pub fn expect_tanh_sq(&self, l: f64, e: f64) -> Result<f64> {
        ensure_variance(l)?;
        Ok(self.tanh_sq_moment(l, e))
    }

    /// E[log cosh(sqrt(l) Z + e)] for l >= 0, computed overflow-safely.
    pub fn expect_log_cosh(&self, l: f64, e: f64) -> Result<f64> {
        ensure_variance(l)?;
        Ok(self.log_cosh_moment(l, e))
    }

    // Infallible inner kernels for the hot fixed-point loops; the argument
    // variance is guaranteed nonnegative by the callers' parameter checks.
    pub(crate) fn tanh_moment(&self, l: f64, e: f64) -> f64 {
        debug_assert!(l >= 0.0);
        let s = l.sqrt();
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * (s * x + e).tanh();
        }
        acc
    }

    pub(crate) fn tanh_sq_moment(&self, l: f64, e: f64) -> f64 {
        debug_assert!(l >= 0.0);
        let s = l.sqrt();
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let t = (s * x + e).tanh();
            acc += w * t * t;
        }
        acc
    }

    pub(crate) fn log_cosh_moment(&self, l: f64, e: f64) -> f64 {
        debug_assert!(l >= 0.0);
        let s = l.sqrt();
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * log_cosh(s * x + e);
        }
        acc
    }
}

fn ensure_variance(l: f64) -> Result<()> {
    if l >= 0.0 && l.is_finite() {
        Ok(())
    } else {
        Err(Error::Negative {
            name: "gaussian argument variance",
            value: l,
        })
    }
}

/// log cosh(x) = |x| - log 2 + log1p(exp(-2|x|)); the naive form overflows
/// for |x| beyond ~700.
pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a - std::f64::consts::LN_2 + (-2.0 * a).exp().ln_1p()
}

/// Shared rule at [`DEFAULT_ORDER`], built on first use.
pub fn default_rule() -> &'static QuadratureRule {
    static RULE: OnceLock<QuadratureRule> = OnceLock::new();
    RULE.get_or_init(|| {
        QuadratureRule::gauss_hermite(DEFAULT_ORDER).expect("default order is odd and >= 3")
    })
}

/// Golub-Welsch on the probabilists' Hermite Jacobi matrix (zero diagonal,
/// off-diagonals sqrt(k)).  Returns unsorted (nodes, weights).
///
/// Implicit-shift QL on a symmetric tridiagonal matrix, accumulating only
/// the first row of the eigenvector product, which is all the weights need.
fn golub_welsch(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut d = vec![0.0_f64; n];
    let mut e: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).collect();
    e.push(0.0);
    let mut z = vec![0.0_f64; n];
    z[0] = 1.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            // Find the first negligible subdiagonal element at or after l.
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 64, "tridiagonal QL failed to converge");

            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let weights = z.iter().map(|&zi| zi * zi).collect();
    (d, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_even_and_tiny_orders() {
        assert!(QuadratureRule::gauss_hermite(2).is_err());
        assert!(QuadratureRule::gauss_hermite(10).is_err());
        assert!(QuadratureRule::gauss_hermite(1).is_err());
        assert!(QuadratureRule::gauss_hermite(3).is_ok());
    }

    #[test]
    fn order_three_reproduces_low_moments() {
        let rule = QuadratureRule::gauss_hermite(3).unwrap();
        let expected = [1.0, 0.0, 1.0, 0.0, 3.0];
        for (p, want) in expected.iter().enumerate() {
            let got = rule.expect(|z| z.powi(p as i32)).unwrap();
            assert_abs_diff_eq!(got, *want, epsilon = 1e-12);
        }
    }

    #[test]
    fn large_order_invariants() {
        let rule = QuadratureRule::gauss_hermite(199).unwrap();
        let wsum: f64 = rule.weights().iter().sum();
        assert_abs_diff_eq!(wsum, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rule.expect(|z| z * z).unwrap(), 1.0, epsilon = 1e-10);
        // Node set is symmetric about zero.
        let n = rule.order();
        for i in 0..n {
            let mirror = rule.nodes()[n - 1 - i];
            assert_abs_diff_eq!(rule.nodes()[i], -mirror, epsilon = 1e-12);
        }
        assert_eq!(rule.nodes()[n / 2], 0.0);
    }

    #[test]
    fn sixth_moment_at_order_99() {
        let rule = QuadratureRule::gauss_hermite(99).unwrap();
        assert_abs_diff_eq!(rule.expect(|z| z.powi(6)).unwrap(), 15.0, epsilon = 1e-9);
    }

    #[test]
    fn odd_integrand_vanishes() {
        let rule = default_rule();
        assert_abs_diff_eq!(rule.expect(|z| z).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        let rule = QuadratureRule::gauss_hermite(5).unwrap();
        assert!(rule.expect(|z| 1.0 / z).is_err());
    }

    #[test]
    fn tanh_family_degenerate_and_saturated() {
        let rule = default_rule();
        assert_eq!(rule.expect_tanh(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(rule.expect_tanh_sq(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(rule.expect_log_cosh(0.0, 0.0).unwrap(), 0.0);

        let e = 1e6;
        let t = rule.expect_tanh(1.0, e).unwrap();
        assert!((1.0 - t).abs() < 1e-12);
        let lc = rule.expect_log_cosh(1.0, e).unwrap();
        assert_abs_diff_eq!(lc, e - std::f64::consts::LN_2, epsilon = 1e-6);
    }

    #[test]
    fn negative_variance_rejected() {
        let rule = default_rule();
        assert!(rule.expect_tanh(-0.5, 0.0).is_err());
        assert!(rule.expect_tanh_sq(-0.5, 0.0).is_err());
        assert!(rule.expect_log_cosh(-0.5, 0.0).is_err());
    }

    #[test]
    fn sign_symmetries_in_the_mean() {
        let rule = default_rule();
        for &l in &[0.0, 0.7, 2.5] {
            assert_abs_diff_eq!(rule.expect_tanh(l, 0.0).unwrap(), 0.0, epsilon = 1e-14);
            for &e in &[0.3, 1.9] {
                let plus = rule.expect_tanh(l, e).unwrap();
                let minus = rule.expect_tanh(l, -e).unwrap();
                assert_abs_diff_eq!(plus, -minus, epsilon = 1e-14);
                assert_abs_diff_eq!(
                    rule.expect_tanh_sq(l, e).unwrap(),
                    rule.expect_tanh_sq(l, -e).unwrap(),
                    epsilon = 1e-14
                );
                assert_abs_diff_eq!(
                    rule.expect_log_cosh(l, e).unwrap(),
                    rule.expect_log_cosh(l, -e).unwrap(),
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn tanh_sq_monotone_in_mean_magnitude() {
        let rule = default_rule();
        for &l in &[0.1, 1.0, 4.0] {
            let mut prev = -1.0;
            for i in 0..40 {
                let e = 0.25 * i as f64;
                let v = rule.expect_tanh_sq(l, e).unwrap();
                assert!(v + 1e-12 >= prev, "not monotone at l={l}, e={e}");
                prev = v;
            }
        }
    }

    // For Z~ N(eta, r^2) with eta = r^2/r0^2 realized as sqrt(l) = r,
    // e = eta: E[Z tanh Z] = (1/r0^2) E[1 + tanh Z - tanh^2 Z].
    #[test]
    fn integration_by_parts_identity() {
        let rule = default_rule();
        for &r0 in &[0.5_f64, 1.0, 2.0] {
            let r2 = 1.0 / (r0 * r0); // variance of the tilted Gaussian
            let eta = r2;
            let s = r2.sqrt();
            let lhs = rule.expect(|z| (s * z + eta) * (s * z + eta).tanh()).unwrap();
            let rhs = rule
                .expect(|z| {
                    let t = (s * z + eta).tanh();
                    1.0 + t - t * t
                })
                .unwrap()
                * r2;
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-8);
        }
    }
}
