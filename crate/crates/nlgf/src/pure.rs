//! Matched inference for pure order-`lambda` covariances `phi(x) = x^lambda`.
//!
//! Everything reduces to a scalar landscape over the overlap `m`:
//!
//! ```text
//! xi_m  = (1 - m^lambda) / sigma^2
//! rho_m = sqrt( R sigma^2 (1 + xi_m) / (lambda m^(lambda-1)) )
//! L_m   = log(1 + xi_m) / 2 + (1 + m) R / (2 rho_m^2)
//!         - R E_Z[log cosh((1 + rho_m Z) / rho_m^2)]
//! ```
//!
//! The information rate is the minimum of `L_m`; the minimizer is the
//! overlap.  Extreme points solve `m = E_Z tanh((1 + rho_m Z) / rho_m^2)`,
//! which doubles as the state-evolution map: iterating it from an
//! uninformed start yields the overlap reachable by message passing, and
//! the iteration count diverges at second-order transitions.

use crate::error::{ensure_positive, Error, Result};
use crate::par;
use crate::quad::{default_rule, log_cosh};

/// Pure order-`lambda` matched model.
#[derive(Debug, Clone, Copy)]
pub struct PureModel {
    lambda: u32,
    sigma: f64,
    load: f64,
}

/// Result of iterating the scalar map from one starting point.
#[derive(Debug, Clone, Copy)]
pub struct Convergence {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Stability of a fixed point under plain substitution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
}

/// Sampled landscape with detected structure.
#[derive(Debug, Clone)]
pub struct PureLandscape {
    /// `(m, L_m)` samples, ascending in `m`, refined near minima.
    pub grid: Vec<(f64, f64)>,
    /// Deduplicated fixed points with stability tags.
    pub fixed_points: Vec<(f64, Stability)>,
    /// Global minimizer of the landscape.
    pub m_star: f64,
    /// Overlap reached from an uninformed initialization.
    pub m_amp: f64,
}

/// Reference stopping rule of the convergence-time probe.
pub const PROBE_TOL: f64 = 1e-10;
pub const PROBE_CAP: usize = 10_000;

impl PureModel {
    pub fn new(lambda: u32, sigma: f64, load: f64) -> Result<Self> {
        if lambda < 1 {
            return Err(Error::OutOfRange {
                name: "lambda",
                value: lambda as f64,
                lo: 1.0,
                hi: f64::INFINITY,
            });
        }
        ensure_positive("sigma", sigma)?;
        ensure_positive("load", load)?;
        Ok(Self {
            lambda,
            sigma,
            load,
        })
    }

    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn load(&self) -> f64 {
        self.load
    }

    /// `xi_m = (1 - m^lambda) / sigma^2`.
    pub fn xi(&self, m: f64) -> Result<f64> {
        self.check_m(m)?;
        Ok(self.xi_at(m))
    }

    /// Effective noise level `rho_m`; for `lambda >= 2` the value at `m = 0`
    /// is reported as positive infinity.
    pub fn rho(&self, m: f64) -> Result<f64> {
        self.check_m(m)?;
        Ok(self.rho_sq_at(m).sqrt())
    }

    /// The modified free energy `L_m`.  For `lambda >= 2` the `m = 0` value
    /// is the analytic limit, the Gaussian channel capacity; a naive
    /// evaluation would divide by zero.
    pub fn modified_free_energy(&self, m: f64) -> Result<f64> {
        self.check_m(m)?;
        Ok(self.landscape_at(m))
    }

    /// One application of the fixed-point map
    /// `m -> E_Z tanh((1 + rho_m Z) / rho_m^2)`.
    pub fn fixed_point_map(&self, m: f64) -> Result<f64> {
        self.check_m(m)?;
        Ok(self.map_at(m))
    }

    /// Plain (undamped) substitution, stopping when successive iterates
    /// differ by less than `tol`.  Exhausting the cap is reported through
    /// the flag; the final iterate is still returned.
    pub fn converge(&self, m0: f64, tol: f64, cap: usize) -> Result<Convergence> {
        self.check_m(m0)?;
        ensure_positive("tol", tol)?;
        let mut m = m0;
        for iter in 1..=cap {
            let next = self.map_at(m);
            let delta = (next - m).abs();
            m = next;
            if delta < tol {
                return Ok(Convergence {
                    value: m,
                    iterations: iter,
                    converged: true,
                });
            }
        }
        Ok(Convergence {
            value: m,
            iterations: cap,
            converged: false,
        })
    }

    /// The overlap: argmin of the landscape over the converged fixed points
    /// and the boundary {0, 1}.  Ties prefer the informative phase.
    pub fn overlap(&self) -> f64 {
        let mut candidates = vec![0.0, 1.0];
        for run in self.seed_runs() {
            if run.converged {
                candidates.push(run.value);
            }
        }
        self.argmin(&candidates)
    }

    /// Overlap reached from an uninformed initialization: an infinitesimal
    /// informative perturbation for `lambda >= 2` (where `m = 0` is itself
    /// a fixed point), the origin for the linear field.
    pub fn amp_overlap(&self) -> f64 {
        let m0 = if self.lambda >= 2 { 1e-6 } else { 0.0 };
        self.converge(m0, PROBE_TOL, PROBE_CAP)
            .expect("valid start and tolerance")
            .value
    }

    /// Sample the landscape at the given spacing (0.001 default elsewhere),
    /// refine around interior minima, and report detected structure.
    pub fn landscape(&self, spacing: f64) -> Result<PureLandscape> {
        ensure_positive("spacing", spacing)?;
        let count = (1.0 / spacing).round() as usize;
        let mut grid: Vec<(f64, f64)> = par::map_range_auto(count + 1, |i| {
            let m = (i as f64 * spacing).min(1.0);
            (m, self.landscape_at(m))
        });

        // Refine around interior local minima of the coarse grid.
        let mut extra = Vec::new();
        for i in 1..grid.len() - 1 {
            if grid[i].1 <= grid[i - 1].1 && grid[i].1 <= grid[i + 1].1 {
                let lo = grid[i - 1].0;
                let hi = grid[i + 1].0;
                let refined = crate::rs::golden_min(lo, hi, |m| self.landscape_at(m));
                for j in 0..=20 {
                    let m = lo + (hi - lo) * j as f64 / 20.0;
                    extra.push((m, self.landscape_at(m)));
                }
                extra.push((refined, self.landscape_at(refined)));
            }
        }
        grid.extend(extra);
        grid.sort_by(|a, b| a.0.total_cmp(&b.0));
        grid.dedup_by(|a, b| a.0 == b.0);

        let mut fixed_points: Vec<(f64, Stability)> = Vec::new();
        for run in self.seed_runs() {
            if !run.converged {
                continue;
            }
            if fixed_points
                .iter()
                .any(|&(m, _)| (m - run.value).abs() < 1e-7)
            {
                continue;
            }
            fixed_points.push((run.value, self.stability(run.value)));
        }
        fixed_points.sort_by(|a, b| a.0.total_cmp(&b.0));

        Ok(PureLandscape {
            grid,
            fixed_points,
            m_star: self.overlap(),
            m_amp: self.amp_overlap(),
        })
    }

    /// Jensen sandwich on the landscape: the value lies between the two
    /// returned branches for every `m` in (0, 1].
    pub fn rate_bounds(&self, m: f64) -> Result<(f64, f64)> {
        if !(m > 0.0 && m <= 1.0) {
            return Err(Error::OutOfRange {
                name: "m",
                value: m,
                lo: f64::MIN_POSITIVE,
                hi: 1.0,
            });
        }
        let inv = 1.0 / self.rho_sq_at(m);
        let base = 0.5 * (1.0 + self.xi_at(m)).ln() - self.load * log_cosh(inv);
        let lower = base + 0.5 * m * self.load * inv;
        let upper = base + 0.5 * (1.0 + m) * self.load * inv;
        Ok((lower, upper))
    }

    fn check_m(&self, m: f64) -> Result<()> {
        crate::error::ensure_unit_interval("m", m)
    }

    fn xi_at(&self, m: f64) -> f64 {
        (1.0 - m.powi(self.lambda as i32)) / (self.sigma * self.sigma)
    }

    // rho_m^2; +inf when m = 0 and lambda >= 2 (or when m^(lambda-1)
    // underflows to zero).
    fn rho_sq_at(&self, m: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        let denom = self.lambda as f64 * m.powi(self.lambda as i32 - 1);
        self.load * s2 * (1.0 + self.xi_at(m)) / denom
    }

    fn landscape_at(&self, m: f64) -> f64 {
        let entropic = 0.5 * (1.0 + self.xi_at(m)).ln();
        let rho_sq = self.rho_sq_at(m);
        if !rho_sq.is_finite() {
            // Analytic m -> 0 limit for strictly nonlinear orders: the
            // coupling term vanishes and only the entropic part survives.
            return entropic;
        }
        let inv = 1.0 / rho_sq;
        entropic + 0.5 * (1.0 + m) * self.load * inv
            - self.load * default_rule().log_cosh_moment(inv, inv)
    }

    fn map_at(&self, m: f64) -> f64 {
        let rho_sq = self.rho_sq_at(m);
        if !rho_sq.is_finite() {
            return 0.0;
        }
        let inv = 1.0 / rho_sq;
        default_rule().tanh_moment(inv, inv).clamp(0.0, 1.0)
    }

    fn seed_runs(&self) -> Vec<Convergence> {
        let mut seeds = vec![
            0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99,
            1.0 - 1e-6,
        ];
        seeds.insert(0, if self.lambda >= 2 { 1e-6 } else { 0.0 });
        if self.lambda >= 2 {
            seeds.insert(0, 0.0);
        }
        par::map_slice_auto(&seeds, |&m0| {
            self.converge(m0, PROBE_TOL, PROBE_CAP)
                .expect("valid start and tolerance")
        })
    }

    fn argmin(&self, candidates: &[f64]) -> f64 {
        let scored: Vec<(f64, f64)> = candidates
            .iter()
            .map(|&m| (m, self.landscape_at(m)))
            .collect();
        let best = scored
            .iter()
            .map(|&(_, v)| v)
            .fold(f64::INFINITY, f64::min);
        scored
            .iter()
            .filter(|&&(_, v)| v - best < 1e-10)
            .map(|&(m, _)| m)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn stability(&self, m: f64) -> Stability {
        let h = 1e-6;
        let lo = (m - h).max(0.0);
        let hi = (m + h).min(1.0);
        let slope = (self.map_at(hi) - self.map_at(lo)) / (hi - lo);
        if slope.abs() < 1.0 {
            Stability::Stable
        } else {
            Stability::Unstable
        }
    }
}

/// Gaussian channel capacity `C = log(1 + 1/sigma^2) / 2` in nats.
pub fn shannon_capacity(sigma: f64) -> f64 {
    0.5 * (1.0 + 1.0 / (sigma * sigma)).ln()
}

/// Capacity expressed in bits: the critical load of strictly nonlinear
/// fields.
pub fn r_star(sigma: f64) -> f64 {
    shannon_capacity(sigma) / std::f64::consts::LN_2
}

/// Threshold load of the pure quadratic field: `2 / (sigma^2 + 1)`.
pub fn r_th_quadratic(sigma: f64) -> f64 {
    2.0 / (sigma * sigma + 1.0)
}

/// Noise variance at which the quadratic threshold meets the capacity load;
/// below it the quadratic field is all-or-nothing.
pub fn critical_sigma_sq_quadratic() -> f64 {
    // R_th - R* is increasing in the variance; bisect the sign change.
    let gap = |s2: f64| r_th_quadratic(s2.sqrt()) - r_star(s2.sqrt());
    let mut lo = 1e-3;
    let mut hi = 1.0;
    debug_assert!(gap(lo) < 0.0 && gap(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// For each load, the worst-case number of plain iterations to converge
/// over a uniform grid of starting points in (0, 1).  Exhausted caps count
/// as the cap, marking non-convergence.
pub fn convergence_probe(
    lambda: u32,
    sigma: f64,
    loads: &[f64],
    starts: usize,
    tol: f64,
    cap: usize,
) -> Result<Vec<(f64, usize)>> {
    if loads.is_empty() || starts == 0 {
        return Err(Error::Infeasible("empty probe grid".into()));
    }
    let results = par::map_slice_auto(loads, |&load| {
        let model = PureModel::new(lambda, sigma, load)?;
        let mut worst = 0;
        for j in 1..=starts {
            let m0 = j as f64 / (starts + 1) as f64;
            let run = model.converge(m0, tol, cap)?;
            worst = worst.max(run.iterations);
        }
        Ok::<(f64, usize), Error>((load, worst))
    });
    results.into_iter().collect()
}
