//! Replica-symmetric solution for the general polynomial covariance.
//!
//! The free-energy surface over the order parameters `(q, m)` in the unit
//! square is
//!
//! ```text
//! F(q, m) = -R E_Z[log cosh(sqrt(L) Z + E)] + Pi(q, m) - R log 2
//! ```
//!
//! with the local-field variance `L` and mean `E` built from
//!
//! ```text
//! g(q)    = 1 + beta [phi(1) - phi(q)]
//! f(q, m) = beta [sigma^2 + phi(1) + phi(q) - 2 phi(m)]
//! L(q, m) = (beta / R) phi'(q) f / g^2
//! E(q, m) = (beta / R) phi'(m) / g
//! Pi(q,m) = R [m E + (1 - q) L / 2] + [f / g + log g] / 2
//! ```
//!
//! The reported solution minimizes `F` over the union of the fixed points of
//! `q = E_Z tanh^2(sqrt(L) Z + E)`, `m = E_Z tanh(sqrt(L) Z + E)` and the
//! boundary of the unit square.  The normalized cross entropy then follows
//! as `log(2 pi sigma_hat^2) / 2 + R log 2 + F(q*, m*)`.

use crate::error::{ensure_positive, ensure_unit_interval, Error, Result};
use crate::field::CovarianceFn;
use crate::par;
use crate::quad::{default_rule, QuadratureRule};

/// Inverse temperature, load, true and postulated noise levels, and the
/// covariance of the generative model.
#[derive(Debug, Clone)]
pub struct RsParams {
    beta: f64,
    load: f64,
    sigma: f64,
    sigma_hat: f64,
    cov: CovarianceFn,
}

impl RsParams {
    /// Inference at inverse temperature `1 / sigma_hat^2`.
    pub fn new(load: f64, sigma: f64, sigma_hat: f64, cov: CovarianceFn) -> Result<Self> {
        ensure_positive("load", load)?;
        ensure_positive("sigma", sigma)?;
        ensure_positive("sigma_hat", sigma_hat)?;
        Ok(Self {
            beta: 1.0 / (sigma_hat * sigma_hat),
            load,
            sigma,
            sigma_hat,
            cov,
        })
    }

    /// Matched inference: postulated noise equals the true noise.
    pub fn matched(load: f64, sigma: f64, cov: CovarianceFn) -> Result<Self> {
        Self::new(load, sigma, sigma, cov)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn load(&self) -> f64 {
        self.load
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sigma_hat(&self) -> f64 {
        self.sigma_hat
    }

    pub fn covariance(&self) -> &CovarianceFn {
        &self.cov
    }

    /// `g(q) = 1 + beta [phi(1) - phi(q)]`; positive for q in [0, 1].
    pub fn covariance_gap(&self, q: f64) -> Result<f64> {
        ensure_unit_interval("q", q)?;
        Ok(self.gap_at(q))
    }

    /// `f(q, m) = beta [sigma^2 + phi(1) + phi(q) - 2 phi(m)]`; nonnegative
    /// for q, m in [0, 1].
    pub fn residual_energy(&self, q: f64, m: f64) -> Result<f64> {
        ensure_unit_interval("q", q)?;
        ensure_unit_interval("m", m)?;
        Ok(self.energy_at(q, m))
    }

    /// Variance `L` and mean `E` of the decoupled local field.
    pub fn local_field(&self, q: f64, m: f64) -> Result<(f64, f64)> {
        ensure_unit_interval("q", q)?;
        ensure_unit_interval("m", m)?;
        Ok(self.field_at(q, m))
    }

    /// The entropic part `Pi(q, m)`.
    pub fn entropic_term(&self, q: f64, m: f64) -> Result<f64> {
        ensure_unit_interval("q", q)?;
        ensure_unit_interval("m", m)?;
        Ok(self.entropic_at(q, m))
    }

    /// The surface `F(q, m)` whose minimum over fixed points and boundary
    /// is beta times the free energy.
    pub fn free_energy_surface(&self, q: f64, m: f64) -> Result<f64> {
        ensure_unit_interval("q", q)?;
        ensure_unit_interval("m", m)?;
        Ok(self.surface_at(default_rule(), q, m))
    }

    fn gap_at(&self, q: f64) -> f64 {
        1.0 + self.beta * (self.cov.phi_at(1.0) - self.cov.phi_at(q))
    }

    fn energy_at(&self, q: f64, m: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        let f = self.beta * (s2 + self.cov.phi_at(1.0) + self.cov.phi_at(q)
            - 2.0 * self.cov.phi_at(m));
        // Nonnegative in exact arithmetic because phi is nondecreasing with
        // phi(1) maximal; clamp rounding residue.
        f.max(0.0)
    }

    fn field_at(&self, q: f64, m: f64) -> (f64, f64) {
        let g = self.gap_at(q);
        let f = self.energy_at(q, m);
        let l = self.beta / self.load * self.cov.phi_prime_at(q) * f / (g * g);
        let e = self.beta / self.load * self.cov.phi_prime_at(m) / g;
        (l.max(0.0), e)
    }

    fn entropic_at(&self, q: f64, m: f64) -> f64 {
        let g = self.gap_at(q);
        let f = self.energy_at(q, m);
        let (l, e) = self.field_at(q, m);
        self.load * (m * e + 0.5 * (1.0 - q) * l) + 0.5 * (f / g + g.ln())
    }

    fn surface_at(&self, rule: &QuadratureRule, q: f64, m: f64) -> f64 {
        let (l, e) = self.field_at(q, m);
        -self.load * rule.log_cosh_moment(l, e) + self.entropic_at(q, m)
            - self.load * std::f64::consts::LN_2
    }
}

/// A point in the order-parameter square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsOrderParams {
    pub q: f64,
    pub m: f64,
}

impl RsOrderParams {
    pub fn new(q: f64, m: f64) -> Result<Self> {
        ensure_unit_interval("q", q)?;
        ensure_unit_interval("m", m)?;
        Ok(Self { q, m })
    }

    fn clamped(q: f64, m: f64) -> Self {
        Self {
            q: q.clamp(0.0, 1.0),
            m: m.clamp(0.0, 1.0),
        }
    }
}

/// Outcome of one damped fixed-point run.
#[derive(Debug, Clone, Copy)]
pub struct FixedPointRun {
    pub point: RsOrderParams,
    pub iterations: usize,
    pub converged: bool,
}

/// The selected minimizer together with the surveyed fixed points.
#[derive(Debug, Clone)]
pub struct RsSolution {
    /// Global minimizer of the surface over fixed points and boundary.
    pub star: RsOrderParams,
    /// Free energy `F(beta) = surface / beta`.
    pub free_energy: f64,
    /// Surface value `F_beta(q*, m*)`.
    pub surface_value: f64,
    /// Every fixed-point run, in seed order.
    pub fixed_points: Vec<FixedPointRun>,
    /// Normalized cross entropy at the solution.
    pub cross_entropy: f64,
}

/// Iteration knobs shared by the solvers.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        // Pure substitution oscillates near second-order transitions, so
        // damp by half; the tolerance matches the reference stopping rule.
        Self {
            damping: 0.5,
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::OutOfRange {
                name: "damping",
                value: self.damping,
                lo: f64::MIN_POSITIVE,
                hi: 1.0,
            });
        }
        ensure_positive("tol", self.tol)
    }
}

/// Damped successive substitution of the two fixed-point equations.
/// Non-convergence is reported through the flag, never as an error.
pub fn fixed_point_iterate(
    params: &RsParams,
    init: RsOrderParams,
    opts: SolverOptions,
) -> Result<FixedPointRun> {
    opts.validate()?;
    let rule = default_rule();
    let mut q = init.q;
    let mut m = init.m;
    for iter in 1..=opts.max_iter {
        let (l, e) = params.field_at(q, m);
        let q_new = rule.tanh_sq_moment(l, e).clamp(0.0, 1.0);
        let m_new = rule.tanh_moment(l, e).clamp(0.0, 1.0);
        let q_next = opts.damping * q_new + (1.0 - opts.damping) * q;
        let m_next = opts.damping * m_new + (1.0 - opts.damping) * m;
        let delta = (q_next - q).abs().max((m_next - m).abs());
        q = q_next;
        m = m_next;
        if delta < opts.tol {
            return Ok(FixedPointRun {
                point: RsOrderParams::clamped(q, m),
                iterations: iter,
                converged: true,
            });
        }
    }
    Ok(FixedPointRun {
        point: RsOrderParams::clamped(q, m),
        iterations: opts.max_iter,
        converged: false,
    })
}

/// Default multistart grid: 11 x 11 uniform over the square plus near-corner
/// seeds.  The surface can hold up to three basins, so one seed is not
/// enough.
pub fn default_init_grid() -> Vec<RsOrderParams> {
    let eps = 1e-6;
    let mut grid = Vec::with_capacity(123);
    for i in 0..=10 {
        for j in 0..=10 {
            grid.push(RsOrderParams {
                q: i as f64 / 10.0,
                m: j as f64 / 10.0,
            });
        }
    }
    grid.push(RsOrderParams { q: eps, m: eps });
    grid.push(RsOrderParams {
        q: 1.0 - eps,
        m: 1.0 - eps,
    });
    grid
}

/// Minimize the surface over fixed points reached from every seed plus the
/// boundary of the unit square.
pub fn solve_rs(params: &RsParams, init_grid: &[RsOrderParams]) -> Result<RsSolution> {
    solve_rs_with(params, init_grid, SolverOptions::default())
}

pub fn solve_rs_with(
    params: &RsParams,
    init_grid: &[RsOrderParams],
    opts: SolverOptions,
) -> Result<RsSolution> {
    if init_grid.is_empty() {
        return Err(Error::Infeasible("empty initialization grid".into()));
    }
    opts.validate()?;
    let rule = default_rule();

    let runs: Vec<FixedPointRun> = par::map_slice_auto(init_grid, |&seed| {
        fixed_point_iterate(params, seed, opts).expect("options validated")
    });

    let mut candidates: Vec<RsOrderParams> = runs
        .iter()
        .filter(|r| r.converged)
        .map(|r| r.point)
        .collect();
    candidates.extend([
        RsOrderParams { q: 0.0, m: 0.0 },
        RsOrderParams { q: 1.0, m: 1.0 },
        RsOrderParams { q: 0.0, m: 1.0 },
        RsOrderParams { q: 1.0, m: 0.0 },
    ]);
    candidates.extend(boundary_minima(params, rule));

    let scored: Vec<(RsOrderParams, f64)> = candidates
        .into_iter()
        .map(|p| {
            let v = params.surface_at(rule, p.q, p.m);
            (p, v)
        })
        .collect();
    let best_value = scored
        .iter()
        .map(|&(_, v)| v)
        .fold(f64::INFINITY, f64::min);
    // Ties within 1e-10 go to the larger overlap: at a coexistence point the
    // informative phase is reported.
    let star = scored
        .iter()
        .filter(|&&(_, v)| v - best_value < 1e-10)
        .map(|&(p, _)| p)
        .fold(RsOrderParams { q: 0.0, m: -1.0 }, |acc, p| {
            if (p.m, p.q) > (acc.m, acc.q) {
                p
            } else {
                acc
            }
        });

    let surface_value = params.surface_at(rule, star.q, star.m);
    let sigma_hat_sq = params.sigma_hat * params.sigma_hat;
    let cross_entropy = 0.5 * (2.0 * std::f64::consts::PI * sigma_hat_sq).ln()
        + params.load * std::f64::consts::LN_2
        + surface_value;

    Ok(RsSolution {
        star,
        free_energy: surface_value / params.beta,
        surface_value,
        fixed_points: runs,
        cross_entropy,
    })
}

/// Scan the four edges of the unit square for local minima of the surface
/// and refine each by golden-section search.
fn boundary_minima(params: &RsParams, rule: &QuadratureRule) -> Vec<RsOrderParams> {
    const SCAN: usize = 1001;
    let mut found = Vec::new();
    let edges: [(bool, f64); 4] = [
        (true, 0.0),  // m = 0, q free
        (true, 1.0),  // m = 1, q free
        (false, 0.0), // q = 0, m free
        (false, 1.0), // q = 1, m free
    ];
    for (q_free, fixed) in edges {
        let eval = |x: f64| {
            if q_free {
                params.surface_at(rule, x, fixed)
            } else {
                params.surface_at(rule, fixed, x)
            }
        };
        let values: Vec<f64> = par::map_range_auto(SCAN, |i| eval(i as f64 / (SCAN - 1) as f64));
        for i in 1..SCAN - 1 {
            if values[i] <= values[i - 1] && values[i] <= values[i + 1] {
                let lo = (i - 1) as f64 / (SCAN - 1) as f64;
                let hi = (i + 1) as f64 / (SCAN - 1) as f64;
                let x = golden_min(lo, hi, eval);
                found.push(if q_free {
                    RsOrderParams { q: x, m: fixed }
                } else {
                    RsOrderParams { q: fixed, m: x }
                });
            }
        }
    }
    found
}

/// Golden-section minimization on [lo, hi].
pub(crate) fn golden_min<F: Fn(f64) -> f64>(lo: f64, hi: f64, f: F) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..90 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Normalized cross entropy at the RS solution for possibly mismatched
/// noise levels.
pub fn cross_entropy(params: &RsParams) -> Result<f64> {
    Ok(solve_rs(params, &default_init_grid())?.cross_entropy)
}

/// Matched-case output differential entropy per dimension, via the scalar
/// fixed point `m = E_Z tanh(sqrt(E(m)) Z + E(m))` minimized over solutions
/// and the boundary {0, 1}.
pub fn matched_entropy(sigma: f64, load: f64, cov: &CovarianceFn) -> Result<f64> {
    ensure_positive("sigma", sigma)?;
    ensure_positive("load", load)?;
    let m = matched_overlap(sigma, load, cov)?;
    Ok(matched_surface(sigma, load, cov, m))
}

/// Matched-case information rate per dimension in nats.
pub fn info_rate(sigma: f64, load: f64, cov: &CovarianceFn) -> Result<f64> {
    let h = matched_entropy(sigma, load, cov)?;
    Ok(h - 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * sigma * sigma).ln())
}

/// The minimizing overlap of the matched scalar problem.
pub fn matched_overlap(sigma: f64, load: f64, cov: &CovarianceFn) -> Result<f64> {
    ensure_positive("sigma", sigma)?;
    ensure_positive("load", load)?;
    let rule = default_rule();
    let opts = SolverOptions::default();
    let seeds = [1e-6, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0 - 1e-6];
    let mut candidates = vec![0.0, 1.0];
    for &m0 in &seeds {
        let mut m = m0;
        let mut converged = false;
        for _ in 0..opts.max_iter {
            let e = matched_field_mean(sigma, load, cov, m);
            let m_new = rule.tanh_moment(e, e).clamp(0.0, 1.0);
            let m_next = opts.damping * m_new + (1.0 - opts.damping) * m;
            let delta = (m_next - m).abs();
            m = m_next;
            if delta < opts.tol {
                converged = true;
                break;
            }
        }
        if converged {
            candidates.push(m);
        }
    }
    let best = candidates
        .iter()
        .map(|&m| (m, matched_surface(sigma, load, cov, m)))
        .fold((f64::NAN, f64::INFINITY), |acc, (m, v)| {
            if v < acc.1 - 1e-10 || (v - acc.1 < 1e-10 && m > acc.0) {
                (m, v)
            } else {
                acc
            }
        });
    Ok(best.0)
}

// E(m) = phi'(m) / (R sigma^2 g(m)) with g(m) = 1 + (phi(1) - phi(m)) / sigma^2.
fn matched_field_mean(sigma: f64, load: f64, cov: &CovarianceFn, m: f64) -> f64 {
    let s2 = sigma * sigma;
    let g = 1.0 + (cov.phi_at(1.0) - cov.phi_at(m)) / s2;
    (cov.phi_prime_at(m) / (load * s2 * g)).max(0.0)
}

// H_sigma(m): the matched entropy surface.
fn matched_surface(sigma: f64, load: f64, cov: &CovarianceFn, m: f64) -> f64 {
    let rule = default_rule();
    let s2 = sigma * sigma;
    let g = 1.0 + (cov.phi_at(1.0) - cov.phi_at(m)) / s2;
    let e = matched_field_mean(sigma, load, cov, m);
    let pi = 0.5
        * (load * (1.0 + m) * e
            + (2.0 * std::f64::consts::PI * std::f64::consts::E * s2).ln()
            + g.ln());
    -load * rule.log_cosh_moment(e, e) + pi
}
