//! Exact finite-size Bayesian inference by exhaustive posterior enumeration.
//!
//! Ground truth for the asymptotic predictions at desk scale: the posterior
//! over {-1, +1}^K under the postulated model is summed exactly, streaming
//! configurations in Gray-code order so a single flipped spin updates each
//! field component through a rank-reduced contraction instead of a full
//! re-evaluation.  Weights are accumulated with a running-maximum
//! log-sum-exp, never materializing all 2^K energies.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_nonnegative, ensure_positive, Error, Result};
use crate::field::{
    contract_axis_fixed, evaluate, sample_field, stream_rng, CovarianceFn, LabelVector,
    TensorField, STREAM_LABELS, STREAM_NOISE,
};
use crate::par;

/// Exhaustive enumeration guard.
pub const MAX_ENUM_K: usize = 24;

// Refresh the incrementally-maintained field values at this cadence to stop
// rounding drift over long Gray walks.
const REFRESH_PERIOD: u64 = 1 << 12;

/// One sampled inference problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub s_true: LabelVector,
    pub fields: Vec<TensorField>,
    pub y: Vec<f64>,
    pub sigma: f64,
    pub sigma_hat: f64,
    pub seed: u64,
}

/// Exact posterior statistics under the postulated model.
#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    /// Posterior mean of each label, in [-1, 1].
    pub posterior_mean: Vec<f64>,
    /// log sum over configurations of exp(-||y - V(u)||^2 / (2 sigma_hat^2)).
    pub log_partition: f64,
    /// Normalized inner product between the true labels and the mean.
    pub overlap: f64,
    /// -(log_partition - K log 2 - (N/2) log(2 pi sigma_hat^2)) / N.
    pub cross_entropy_term: f64,
    /// Per-symbol probabilities of +1.
    pub marginals: Vec<f64>,
}

/// Draw labels, field and noise for one instance.  Labels, coefficients and
/// noise come from separate named substreams of `seed`, so the instance is
/// reproducible componentwise.
pub fn generate_instance(
    k: usize,
    n: usize,
    cov: &CovarianceFn,
    sigma: f64,
    sigma_hat: f64,
    seed: u64,
) -> Result<Instance> {
    if k == 0 || k > MAX_ENUM_K {
        return Err(Error::EnumerationCap {
            k,
            cap: MAX_ENUM_K,
        });
    }
    ensure_nonnegative("sigma", sigma)?;
    ensure_positive("sigma_hat", sigma_hat)?;
    let fields = sample_field(k, n, cov, seed)?;
    let mut label_rng = stream_rng(seed, STREAM_LABELS, 0);
    let s_true = LabelVector::uniform(k, &mut label_rng);
    let mut y = evaluate(&fields, &s_true)?;
    let mut noise_rng = stream_rng(seed, STREAM_NOISE, 0);
    for v in &mut y {
        let g: f64 = noise_rng.sample(StandardNormal);
        *v += sigma * g;
    }
    Ok(Instance {
        s_true,
        fields,
        y,
        sigma,
        sigma_hat,
        seed,
    })
}

/// Exact posterior mean and log partition function for arbitrary
/// observations of a sampled field, at inverse temperature
/// `1 / sigma_hat^2`.
pub fn posterior_from_observations(
    fields: &[TensorField],
    y: &[f64],
    sigma_hat: f64,
) -> Result<(Vec<f64>, f64)> {
    ensure_positive("sigma_hat", sigma_hat)?;
    let Some(first) = fields.first() else {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    };
    let k = first.input_dim();
    let n = first.output_dim();
    if k > MAX_ENUM_K {
        return Err(Error::EnumerationCap {
            k,
            cap: MAX_ENUM_K,
        });
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }

    let beta = 1.0 / (sigma_hat * sigma_hat);
    let mut u: Vec<f64> = vec![1.0; k];
    let mut u_prev: Vec<f64> = u.clone();
    let start = LabelVector::new(vec![1; k]).expect("all-ones labels");
    let mut values = evaluate(fields, &start)?;

    let mut log_max = f64::NEG_INFINITY;
    let mut z_scaled = 0.0_f64;
    let mut numer = vec![0.0_f64; k];

    let total: u64 = 1 << k;
    for c in 0..total {
        if c > 0 {
            let flip = c.trailing_zeros() as usize;
            u_prev[flip] = u[flip];
            u[flip] = -u[flip];
            let delta = u[flip] - u_prev[flip];
            if c % REFRESH_PERIOD == 0 {
                let labels: Vec<i8> = u.iter().map(|&x| x as i8).collect();
                values = evaluate(fields, &LabelVector::new(labels)?)?;
            } else {
                for f in fields {
                    let ord = f.order();
                    for (comp, v) in values.iter_mut().enumerate() {
                        let mut step = 0.0;
                        for axis in 0..ord {
                            step += contract_axis_fixed(
                                f.block(comp),
                                k,
                                ord,
                                axis,
                                flip,
                                &u,
                                &u_prev,
                            );
                        }
                        *v += delta * step;
                    }
                }
            }
            u_prev[flip] = u[flip];
        }

        let mut energy = 0.0;
        for (v, obs) in values.iter().zip(y) {
            let d = obs - v;
            energy += d * d;
        }
        let log_w = -0.5 * beta * energy;

        if log_w > log_max {
            let rescale = if log_max.is_finite() {
                (log_max - log_w).exp()
            } else {
                0.0
            };
            z_scaled = z_scaled * rescale + 1.0;
            for (acc, &ui) in numer.iter_mut().zip(&u) {
                *acc = *acc * rescale + ui;
            }
            log_max = log_w;
        } else {
            let w = (log_w - log_max).exp();
            z_scaled += w;
            for (acc, &ui) in numer.iter_mut().zip(&u) {
                *acc += w * ui;
            }
        }
    }

    let log_partition = log_max + z_scaled.ln();
    let mean: Vec<f64> = numer
        .iter()
        .map(|&s| (s / z_scaled).clamp(-1.0, 1.0))
        .collect();
    Ok((mean, log_partition))
}

/// Posterior summary of one instance.
pub fn posterior_mean(inst: &Instance) -> Result<PosteriorSummary> {
    let (mean, log_partition) = posterior_from_observations(&inst.fields, &inst.y, inst.sigma_hat)?;
    let k = inst.s_true.len();
    let n = inst.y.len();
    let overlap = inst
        .s_true
        .entries()
        .iter()
        .zip(&mean)
        .map(|(&s, &m)| s as f64 * m)
        .sum::<f64>()
        / k as f64;
    let sigma_hat_sq = inst.sigma_hat * inst.sigma_hat;
    let cross_entropy_term = -(log_partition
        - k as f64 * std::f64::consts::LN_2
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI * sigma_hat_sq).ln())
        / n as f64;
    let marginals = mean.iter().map(|&m| 0.5 * (1.0 + m)).collect();
    Ok(PosteriorSummary {
        posterior_mean: mean,
        log_partition,
        overlap,
        cross_entropy_term,
        marginals,
    })
}

/// Mean and standard error of a sample.
fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Run independent instances; trial `t` draws from the substream
/// `(seed, t)`, so the outcome does not depend on scheduling.
pub fn run_trials(
    trials: usize,
    k: usize,
    n: usize,
    cov: &CovarianceFn,
    sigma: f64,
    sigma_hat: f64,
    seed: u64,
) -> Result<Vec<(Instance, PosteriorSummary)>> {
    if trials == 0 {
        return Err(Error::Infeasible("at least one trial required".into()));
    }
    let outcomes = par::map_range_auto(trials, |t| {
        let inst_seed = crate::field::trial_seed(seed, t as u64);
        let inst = generate_instance(k, n, cov, sigma, sigma_hat, inst_seed)?;
        let summary = posterior_mean(&inst)?;
        Ok::<(Instance, PosteriorSummary), Error>((inst, summary))
    });
    outcomes.into_iter().collect()
}

/// Monte Carlo estimate of the normalized cross entropy, with its standard
/// error over trials.
pub fn empirical_cross_entropy(
    trials: usize,
    k: usize,
    n: usize,
    cov: &CovarianceFn,
    sigma: f64,
    sigma_hat: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    let runs = run_trials(trials, k, n, cov, sigma, sigma_hat, seed)?;
    let values: Vec<f64> = runs.iter().map(|(_, s)| s.cross_entropy_term).collect();
    Ok(mean_stderr(&values))
}

/// Monte Carlo estimate of the per-symbol joint moment
/// `E[s_k^kappa shat_k^tau]`, averaged over symbols within each trial and
/// reported with the standard error across trials.
pub fn empirical_joint_moment(
    kappa: u32,
    tau: u32,
    trials: usize,
    k: usize,
    n: usize,
    cov: &CovarianceFn,
    sigma: f64,
    sigma_hat: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    let runs = run_trials(trials, k, n, cov, sigma, sigma_hat, seed)?;
    let values: Vec<f64> = runs
        .iter()
        .map(|(inst, summary)| {
            inst.s_true
                .entries()
                .iter()
                .zip(&summary.posterior_mean)
                .map(|(&s, &e)| (s as f64).powi(kappa as i32) * e.powi(tau as i32))
                .sum::<f64>()
                / inst.s_true.len() as f64
        })
        .collect();
    Ok(mean_stderr(&values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const SIGMA_SQ: f64 = 0.1;

    #[test]
    fn guard_and_determinism() {
        let cov = CovarianceFn::pure(1);
        assert!(generate_instance(25, 4, &cov, 0.1, 0.1, 0).is_err());
        assert!(generate_instance(0, 4, &cov, 0.1, 0.1, 0).is_err());
        let a = generate_instance(6, 4, &cov, 0.3, 0.3, 42).unwrap();
        let b = generate_instance(6, 4, &cov, 0.3, 0.3, 42).unwrap();
        assert_eq!(a.s_true, b.s_true);
        assert_eq!(a.y, b.y);
    }

    #[test]
    fn noiseless_observations_equal_the_transform() {
        let cov = CovarianceFn::pure(2);
        let inst = generate_instance(5, 8, &cov, 0.0, 0.3, 9).unwrap();
        let clean = evaluate(&inst.fields, &inst.s_true).unwrap();
        assert_eq!(inst.y, clean);
    }

    #[test]
    fn residual_power_concentrates() {
        // ||y - V(s)||^2 / N estimates sigma^2.
        let cov = CovarianceFn::pure(2);
        let sigma_sq: f64 = 0.1;
        let n = 400;
        let inst = generate_instance(10, n, &cov, sigma_sq.sqrt(), sigma_sq.sqrt(), 5).unwrap();
        let clean = evaluate(&inst.fields, &inst.s_true).unwrap();
        let resid: f64 = inst
            .y
            .iter()
            .zip(&clean)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n as f64;
        let spread = 3.0 * sigma_sq * (2.0 / n as f64).sqrt();
        assert!(
            (resid - sigma_sq).abs() < spread,
            "residual power {resid} vs {sigma_sq} +- {spread}"
        );
    }

    #[test]
    fn two_state_posterior_matches_hand_formula() {
        // K = 1: mean = tanh((e_minus - e_plus) / (2 sigma_hat^2)).
        let cov = CovarianceFn::pure(1);
        let inst = generate_instance(1, 3, &cov, 0.5, 0.4, 17).unwrap();
        let summary = posterior_mean(&inst).unwrap();
        let plus = LabelVector::new(vec![1]).unwrap();
        let minus = LabelVector::new(vec![-1]).unwrap();
        let vp = evaluate(&inst.fields, &plus).unwrap();
        let vm = evaluate(&inst.fields, &minus).unwrap();
        let ep: f64 = inst.y.iter().zip(&vp).map(|(a, b)| (a - b) * (a - b)).sum();
        let em: f64 = inst.y.iter().zip(&vm).map(|(a, b)| (a - b) * (a - b)).sum();
        let expected = ((em - ep) / (4.0 * 0.4 * 0.4)).tanh();
        assert_abs_diff_eq!(summary.posterior_mean[0], expected, epsilon = 1e-10);
    }

    #[test]
    fn gray_walk_agrees_with_direct_enumeration() {
        // Independent oracle: accumulate the posterior by evaluating every
        // configuration from scratch, no incremental updates.
        let cov = CovarianceFn::new(vec![0.4, 0.6]).unwrap();
        let inst = generate_instance(7, 5, &cov, 0.4, 0.3, 23).unwrap();
        let (mean, log_z) =
            posterior_from_observations(&inst.fields, &inst.y, inst.sigma_hat).unwrap();

        let k = 7;
        let beta = 1.0 / (0.3_f64 * 0.3);
        let mut weights = Vec::new();
        let mut configs = Vec::new();
        for c in 0u64..(1 << k) {
            let labels: Vec<i8> = (0..k)
                .map(|b| if (c >> b) & 1 == 0 { 1 } else { -1 })
                .collect();
            let lv = LabelVector::new(labels).unwrap();
            let v = evaluate(&inst.fields, &lv).unwrap();
            let energy: f64 = inst
                .y
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            weights.push(-0.5 * beta * energy);
            configs.push(lv);
        }
        let m = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = weights.iter().map(|&w| (w - m).exp()).sum();
        let log_z_direct = m + z.ln();
        assert_abs_diff_eq!(log_z, log_z_direct, epsilon = 1e-9);
        for j in 0..k {
            let direct: f64 = weights
                .iter()
                .zip(&configs)
                .map(|(&w, cfg)| (w - m).exp() * cfg.entries()[j] as f64)
                .sum::<f64>()
                / z;
            assert_abs_diff_eq!(mean[j], direct, epsilon = 1e-9);
        }
    }

    #[test]
    fn noiseless_linear_recovery() {
        // Invertible regime: sigma ~ 0, N >> K recovers the labels.
        let cov = CovarianceFn::pure(1);
        let mut hits = 0;
        for seed in 0..5 {
            let inst = generate_instance(8, 16, &cov, 1e-3, 1e-3, seed).unwrap();
            let summary = posterior_mean(&inst).unwrap();
            if summary.overlap > 0.999 {
                hits += 1;
            }
        }
        assert!(hits >= 4, "recovered {hits}/5");
    }

    #[test]
    fn marginals_normalize_exactly() {
        let cov = CovarianceFn::pure(2);
        let inst = generate_instance(6, 6, &cov, 0.4, 0.4, 3).unwrap();
        let summary = posterior_mean(&inst).unwrap();
        for (&p, &m) in summary.marginals.iter().zip(&summary.posterior_mean) {
            assert!((0.0..=1.0).contains(&p));
            let pair_sum = p + (1.0 - p);
            assert_eq!(pair_sum, 1.0);
            assert!((-1.0..=1.0).contains(&m));
        }
        assert!(summary.log_partition.is_finite());
    }

    #[test]
    fn linear_sign_flip_negates_the_posterior_mean() {
        // Negating (s_true, y) under an odd field negates the mean exactly.
        let cov = CovarianceFn::pure(1);
        let inst = generate_instance(6, 9, &cov, 0.3, 0.3, 31).unwrap();
        let (mean, _) =
            posterior_from_observations(&inst.fields, &inst.y, inst.sigma_hat).unwrap();
        let y_neg: Vec<f64> = inst.y.iter().map(|v| -v).collect();
        let (mean_neg, _) =
            posterior_from_observations(&inst.fields, &y_neg, inst.sigma_hat).unwrap();
        for (a, b) in mean.iter().zip(&mean_neg) {
            assert_abs_diff_eq!(*a, -*b, epsilon = 1e-12);
        }
    }

    #[test]
    fn high_noise_cross_entropy_is_noise_entropy() {
        // sigma^2 = 100: the output is essentially pure noise.
        let sigma_sq: f64 = 100.0;
        let cov = CovarianceFn::pure(1);
        let (est, se) = empirical_cross_entropy(
            60,
            8,
            16,
            &cov,
            sigma_sq.sqrt(),
            sigma_sq.sqrt(),
            11,
        )
        .unwrap();
        let noise_entropy =
            0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * sigma_sq).ln();
        assert!(
            (est - noise_entropy).abs() < 3.0 * se + 0.05,
            "est {est} vs {noise_entropy} (se {se})"
        );
    }

    #[test]
    fn overlap_degrades_with_noise() {
        let cov = CovarianceFn::pure(1);
        let mut previous = f64::INFINITY;
        for &s2 in &[0.05_f64, 0.4, 2.0] {
            let runs = run_trials(40, 8, 12, &cov, s2.sqrt(), s2.sqrt(), 77).unwrap();
            let mean_overlap =
                runs.iter().map(|(_, s)| s.overlap).sum::<f64>() / runs.len() as f64;
            // Error-bar slack: overlapping bars are tolerated.
            assert!(
                mean_overlap < previous + 0.1,
                "overlap rose from {previous} to {mean_overlap} at sigma^2 = {s2}"
            );
            previous = mean_overlap;
        }
    }

    #[test]
    fn matched_orthogonality_in_finite_size() {
        let cov = CovarianceFn::pure(1);
        let runs = run_trials(
            120,
            8,
            14,
            &cov,
            SIGMA_SQ.sqrt(),
            SIGMA_SQ.sqrt(),
            1234,
        )
        .unwrap();
        let residuals: Vec<f64> = runs
            .iter()
            .map(|(inst, s)| {
                inst.s_true
                    .entries()
                    .iter()
                    .zip(&s.posterior_mean)
                    .map(|(&t, &e)| (t as f64 - e) * e)
                    .sum::<f64>()
                    / inst.s_true.len() as f64
            })
            .collect();
        let (mean, se) = mean_stderr(&residuals);
        assert!(mean.abs() < 3.0 * se, "orthogonality {mean} +- {se}");
    }

    #[test]
    fn gibbs_direction_under_mismatch() {
        let cov = CovarianceFn::pure(1);
        let sigma = SIGMA_SQ.sqrt();
        let (matched, se_m) =
            empirical_cross_entropy(80, 8, 16, &cov, sigma, sigma, 2024).unwrap();
        let (mismatched, se_x) =
            empirical_cross_entropy(80, 8, 16, &cov, sigma, 2.0 * sigma, 2024).unwrap();
        assert!(
            mismatched >= matched - 3.0 * (se_m + se_x),
            "mismatched {mismatched} < matched {matched}"
        );
    }

    #[test]
    fn parity_moment_vanishes() {
        let cov = CovarianceFn::pure(1);
        let (est, se) = empirical_joint_moment(
            1,
            2,
            80,
            8,
            12,
            &cov,
            SIGMA_SQ.sqrt(),
            SIGMA_SQ.sqrt(),
            55,
        )
        .unwrap();
        assert!(est.abs() < 3.0 * se + 1e-12, "moment {est} +- {se}");
    }
}
