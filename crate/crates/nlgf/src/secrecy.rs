//! Secure-learning analytics: the Gaussian wiretap limit, the binned
//! prefix construction that achieves it over strictly nonlinear fields,
//! and the quadratic-codebook route built on the full-RSB overlap of the
//! half-quadratic field.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{ensure_positive, Error, Result};
use crate::field::{stream_rng, LabelVector};
use crate::pure::shannon_capacity;

const STREAM_PERMUTATION: u64 = 0x7065726d; // "perm"

/// Secrecy capacity of the Gaussian wiretap channel in nats:
/// `[log(1 + P/s2_legit) - log(1 + P/s2_eaves)]+ / 2`.
pub fn wyner_secrecy_capacity(power: f64, s2_legit: f64, s2_eaves: f64) -> Result<f64> {
    ensure_positive("power", power)?;
    ensure_positive("legitimate noise variance", s2_legit)?;
    ensure_positive("eavesdropper noise variance", s2_eaves)?;
    let c = 0.5 * ((1.0 + power / s2_legit).ln() - (1.0 + power / s2_eaves).ln());
    Ok(c.max(0.0))
}

/// Maximum effective load (bits per dimension) for secure and reliable
/// inference over a strictly nonlinear unit-variance field:
/// `(C(sigma1) - C(sigma2)) / log 2`.
pub fn secure_load_bound(sigma1: f64, sigma2: f64) -> Result<f64> {
    ensure_positive("sigma1", sigma1)?;
    ensure_positive("sigma2", sigma2)?;
    Ok((shannon_capacity(sigma1) - shannon_capacity(sigma2)) / std::f64::consts::LN_2)
}

/// Parameters of the binned prefix construction: `k2` random prefix labels
/// are interleaved with the `k` data labels by a permutation that places
/// exactly one prefix symbol in each of the `k2` bins of size `bin_size`.
#[derive(Debug, Clone)]
pub struct SecureCodeConfig {
    pub n: usize,
    pub k: usize,
    pub k2: usize,
    pub bin_size: usize,
    /// `permutation[dest] = src` over the concatenated `[r, s]` vector;
    /// prefix symbols are sources `0..k2`.
    pub permutation: Vec<usize>,
    pub seed: u64,
}

impl SecureCodeConfig {
    /// System load including the prefix: `(k + k2) / n`.
    pub fn system_load(&self) -> f64 {
        (self.k + self.k2) as f64 / self.n as f64
    }

    /// Effective load of the data portion: `k / n`.
    pub fn effective_load(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    /// Ceiling overhead of the prefix: `k2/n - C(sigma2)/log 2`, an O(1/n)
    /// term that vanishes in the large-system limit.
    pub fn epsilon_n(&self, sigma2: f64) -> f64 {
        self.k2 as f64 / self.n as f64 - shannon_capacity(sigma2) / std::f64::consts::LN_2
    }

    /// Destination positions covered by bin `index`.
    pub fn bin_range(&self, index: usize) -> std::ops::Range<usize> {
        let total = self.k + self.k2;
        let start = index * self.bin_size;
        start..((index + 1) * self.bin_size).min(total)
    }
}

/// Build the construction for an eavesdropper at noise level `sigma2`
/// (standard deviation): `k2 = ceil(n C(sigma2) / log 2)` prefix labels and
/// bins of size `ceil(1 + k/k2)`.
pub fn build_secure_config(n: usize, k: usize, sigma2: f64, seed: u64) -> Result<SecureCodeConfig> {
    if n == 0 || k == 0 {
        return Err(Error::Infeasible("n and k must be at least 1".into()));
    }
    ensure_positive("sigma2", sigma2)?;
    let k2 = (n as f64 * shannon_capacity(sigma2) / std::f64::consts::LN_2).ceil() as usize;
    if k2 == 0 {
        return Err(Error::Infeasible(
            "eavesdropper capacity rounds to an empty prefix".into(),
        ));
    }
    let bin_size = (1.0 + k as f64 / k2 as f64).ceil() as usize;
    let total = k + k2;
    // Every one of the k2 bins must reach into the vector.
    if (k2 - 1) * bin_size >= total {
        return Err(Error::Infeasible(format!(
            "bin layout infeasible: {k2} bins of size {bin_size} over {total} positions"
        )));
    }

    let mut rng = stream_rng(seed, STREAM_PERMUTATION, 0);
    // One prefix symbol per bin: shuffle the prefix indices across bins,
    // drop each into a uniform slot of its bin, fill the rest with the
    // data indices in shuffled order.
    let mut prefix_sources: Vec<usize> = (0..k2).collect();
    prefix_sources.shuffle(&mut rng);
    let mut data_sources: Vec<usize> = (k2..total).collect();
    data_sources.shuffle(&mut rng);

    let mut permutation = vec![usize::MAX; total];
    for bin in 0..k2 {
        let start = bin * bin_size;
        let end = ((bin + 1) * bin_size).min(total);
        let slot = rng.random_range(start..end);
        permutation[slot] = prefix_sources[bin];
    }
    let mut data_iter = data_sources.into_iter();
    for slot in permutation.iter_mut() {
        if *slot == usize::MAX {
            *slot = data_iter.next().expect("counts match by construction");
        }
    }

    Ok(SecureCodeConfig {
        n,
        k,
        k2,
        bin_size,
        permutation,
        seed,
    })
}

/// Interleave prefix and data labels through the configured permutation.
pub fn encode_labels(
    cfg: &SecureCodeConfig,
    prefix: &LabelVector,
    data: &LabelVector,
) -> Result<LabelVector> {
    if prefix.len() != cfg.k2 {
        return Err(Error::DimensionMismatch {
            expected: cfg.k2,
            got: prefix.len(),
        });
    }
    if data.len() != cfg.k {
        return Err(Error::DimensionMismatch {
            expected: cfg.k,
            got: data.len(),
        });
    }
    let mut src = Vec::with_capacity(cfg.k + cfg.k2);
    src.extend_from_slice(prefix.entries());
    src.extend_from_slice(data.entries());
    LabelVector::new(cfg.permutation.iter().map(|&i| src[i]).collect())
}

/// `(gamma_star, gamma_th)` of the half-quadratic full-RSB overlap:
/// `mu / (mu - 1)^2` and `2 mu / (2 - mu)`.  For `mu = 1` the upper
/// threshold is infinite.
pub fn fyodorov_thresholds(mu: f64) -> Result<(f64, f64)> {
    check_mu(mu)?;
    let gamma_th = 2.0 * mu / (2.0 - mu);
    let gamma_star = if mu == 1.0 {
        f64::INFINITY
    } else {
        mu / ((mu - 1.0) * (mu - 1.0))
    };
    Ok((gamma_star, gamma_th))
}

/// Overlap of least-squares recovery over the half-quadratic field at
/// signal-to-noise ratio `gamma` and aspect `mu = D/N`:
///
/// ```text
/// m* = sqrt(1 - mu / ((1 - mu) gamma))      for gamma >  gamma_star
/// m* = sqrt(mu (1 - x)^3)                   for gamma in (gamma_th, gamma_star]
/// m* = 0                                    for gamma <= gamma_th
/// ```
///
/// where `x` is the root in [0, 1] of
/// `mu x^3 + 3(1/2 - mu) x^2 + 3(mu - 1) x + 1/gamma - 1/gamma_star`.
/// The cubic is strictly decreasing on [0, 1] in the middle regime, so the
/// admissible root is unique and automatically the branch continuous with
/// the upper one.
pub fn fyodorov_overlap(gamma: f64, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    ensure_positive("gamma", gamma)?;
    let (gamma_star, gamma_th) = fyodorov_thresholds(mu)?;
    if gamma <= gamma_th {
        return Ok(0.0);
    }
    if gamma > gamma_star {
        return Ok((1.0 - mu / ((1.0 - mu) * gamma)).sqrt());
    }
    let x = middle_branch_root(gamma, mu, gamma_star)?;
    Ok((mu * (1.0 - x).powi(3)).sqrt())
}

fn middle_branch_root(gamma: f64, mu: f64, gamma_star: f64) -> Result<f64> {
    let shift = 1.0 / gamma - if gamma_star.is_finite() { 1.0 / gamma_star } else { 0.0 };
    let p = |x: f64| mu * x * x * x + 3.0 * (0.5 - mu) * x * x + 3.0 * (mu - 1.0) * x + shift;
    let (p0, p1) = (p(0.0), p(1.0));
    if p0 < 0.0 || p1 > 0.0 {
        return Err(Error::Infeasible(format!(
            "no admissible cubic root in [0, 1] at gamma = {gamma}, mu = {mu}"
        )));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu <= 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "mu",
            value: mu,
            lo: f64::MIN_POSITIVE,
            hi: 1.0,
        })
    }
}

/// Sphere-packing rate bound at overlap `m1` and aspect `mu`, in bits:
///
/// ```text
/// R = mu [ (1+q)/(2q) log2 (1+q)/(2q) - (1-q)/(2q) log2 (1-q)/(2q) ]
/// ```
///
/// with `q = sqrt(1 - p^2)`, `p = 2 m1 - 1`.  Requires `m1 in (1/2, 1)`.
pub fn kl_rate_bound(m1: f64, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    if !(m1 > 0.5 && m1 < 1.0) {
        return Err(Error::OutOfRange {
            name: "m1",
            value: m1,
            lo: 0.5,
            hi: 1.0,
        });
    }
    let p = 2.0 * m1 - 1.0;
    let q = (1.0 - p * p).sqrt();
    let a = (1.0 + q) / (2.0 * q);
    let b = (1.0 - q) / (2.0 * q);
    Ok(mu * (a * a.log2() - b * b.log2()))
}

/// Outcome of the quadratic-codebook secure-rate optimization.
#[derive(Debug, Clone, Copy)]
pub struct SecureRatePoint {
    /// Achievable secure load in bits per observation dimension.
    pub r_max: f64,
    /// Optimal codeword-space aspect `D/N`.
    pub mu_opt: f64,
    /// Artificial noise variance blinding the eavesdropper at `mu_opt`.
    pub theta_sq: f64,
}

// Minimal artificial noise that pushes the eavesdropper below its overlap
// threshold; zero when the eavesdropper is already blind.
fn blinding_noise(mu: f64, p_s: f64, sigma2_sq: f64) -> f64 {
    let gamma_th = 2.0 * mu / (2.0 - mu);
    (p_s / gamma_th - sigma2_sq).max(0.0)
}

fn secure_rate_at(mu: f64, sigma1_sq: f64, sigma2_sq: f64, p_s: f64) -> Option<(f64, f64)> {
    let theta_sq = blinding_noise(mu, p_s, sigma2_sq);
    let gamma = p_s / (sigma1_sq + theta_sq);
    let m1 = fyodorov_overlap(gamma, mu).ok()?;
    if m1 <= 0.5 || m1 >= 1.0 {
        return None;
    }
    kl_rate_bound(m1, mu).ok().map(|r| (r, theta_sq))
}

/// Maximize the achievable secure load of the quadratic-codebook scheme
/// over the aspect `mu` in (0, 1], blinding the eavesdropper with the
/// minimal artificial noise at every candidate.  Fails when no aspect
/// leaves the legitimate terminal above the half-overlap mark, e.g. when
/// the eavesdropper's channel is as good as the legitimate one.
pub fn fyodorov_secure_rate(sigma1_sq: f64, sigma2_sq: f64, p_s: f64) -> Result<SecureRatePoint> {
    ensure_positive("sigma1_sq", sigma1_sq)?;
    ensure_positive("sigma2_sq", sigma2_sq)?;
    ensure_positive("p_s", p_s)?;

    const GRID: usize = 200;
    let mut candidates: Vec<f64> = (1..=GRID).map(|i| i as f64 / GRID as f64).collect();
    // The blinding noise hits zero at this aspect; the objective has a
    // kink there, so probe it exactly.
    let rho = p_s / sigma2_sq;
    let kink = 2.0 * rho / (2.0 + rho);
    if kink > 0.0 && kink <= 1.0 {
        candidates.push(kink);
    }

    let mut best: Option<(f64, f64, f64)> = None; // (rate, mu, theta_sq)
    for &mu in &candidates {
        if let Some((rate, theta_sq)) = secure_rate_at(mu, sigma1_sq, sigma2_sq, p_s) {
            if best.map(|(r, _, _)| rate > r).unwrap_or(true) {
                best = Some((rate, mu, theta_sq));
            }
        }
    }
    let Some((_, mu_grid, _)) = best else {
        return Err(Error::Infeasible(
            "no aspect ratio blinds the eavesdropper while keeping the legitimate overlap above 1/2".into(),
        ));
    };

    // Golden refinement in the bracket around the best grid point.
    let spacing = 1.0 / GRID as f64;
    let lo = (mu_grid - spacing).max(1e-9);
    let hi = (mu_grid + spacing).min(1.0);
    let refined = crate::rs::golden_min(lo, hi, |mu| {
        secure_rate_at(mu, sigma1_sq, sigma2_sq, p_s)
            .map(|(r, _)| -r)
            .unwrap_or(f64::INFINITY)
    });

    let mut finalists = candidates;
    finalists.push(refined);
    let mut winner: Option<SecureRatePoint> = None;
    for &mu in &finalists {
        if let Some((rate, theta_sq)) = secure_rate_at(mu, sigma1_sq, sigma2_sq, p_s) {
            if winner.map(|w| rate > w.r_max).unwrap_or(true) {
                winner = Some(SecureRatePoint {
                    r_max: rate,
                    mu_opt: mu,
                    theta_sq,
                });
            }
        }
    }
    winner.ok_or_else(|| Error::Infeasible("secure rate optimization found no candidate".into()))
}

/// Wyner's limit in bits for the quadratic-codebook transmit spectrum
/// `P_T = P_S^2 / 2 + theta^2`:
///
/// ```text
/// C_W = [ log2(1 + P_S^2/(2 s1^2) + theta^2/s1^2)
///       - log2(1 + P_S^2/(2 s2^2) + theta^2/s2^2) ] / 2
/// ```
pub fn wyner_limit_quadratic_codebook(
    sigma1_sq: f64,
    sigma2_sq: f64,
    p_s: f64,
    theta_sq: f64,
) -> Result<f64> {
    ensure_positive("sigma1_sq", sigma1_sq)?;
    ensure_positive("sigma2_sq", sigma2_sq)?;
    ensure_positive("p_s", p_s)?;
    if !(theta_sq >= 0.0 && theta_sq.is_finite()) {
        return Err(Error::Negative {
            name: "theta_sq",
            value: theta_sq,
        });
    }
    let signal = p_s * p_s / 2.0;
    let legit = (1.0 + signal / sigma1_sq + theta_sq / sigma1_sq).log2();
    let eaves = (1.0 + signal / sigma2_sq + theta_sq / sigma2_sq).log2();
    Ok(0.5 * (legit - eaves))
}
