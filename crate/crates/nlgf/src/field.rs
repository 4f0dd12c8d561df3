//! Polynomial covariance functions and concrete finite-size Gaussian tensor
//! fields.
//!
//! A covariance `phi(u) = sum_l c_l u^l` with `c_l >= 0` describes a Gaussian
//! random map whose outputs at two inputs correlate through the normalized
//! inner product of the inputs.  A finite-size realization is a sum of
//! independent pure-order tensor fields: order `l` contributes, per output
//! component, a full contraction of an iid Gaussian `K^l` tensor with the
//! input repeated `l` times.  Entry variance `c_l / K^l` makes every output
//! component unit variance when `phi(1) = 1`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Guard against accidentally requesting astronomically large fields.
pub const COEFFICIENT_BUDGET: u128 = 200_000_000;

/// Polynomial covariance `phi(u) = sum_{l>=1} c_l u^l`, all `c_l >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceFn {
    /// `coeffs[l - 1]` multiplies `u^l`.
    coeffs: Vec<f64>,
}

impl CovarianceFn {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        for (i, &c) in coeffs.iter().enumerate() {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::NegativeCoefficient {
                    index: i + 1,
                    value: c,
                });
            }
        }
        let mut coeffs = coeffs;
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.iter().all(|&c| c == 0.0) {
            return Err(Error::EmptyCovariance);
        }
        Ok(Self { coeffs })
    }

    /// Pure order-`lambda` field: `phi(u) = u^lambda`.
    pub fn pure(lambda: u32) -> Self {
        let mut coeffs = vec![0.0; lambda as usize];
        coeffs[lambda as usize - 1] = 1.0;
        Self { coeffs }
    }

    /// The quadratic covariance `phi(u) = u^2 / 2` of the nonlinear
    /// encryption setting.
    pub fn half_quadratic() -> Self {
        Self {
            coeffs: vec![0.0, 0.5],
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Highest order with a nonzero coefficient.
    pub fn max_order(&self) -> usize {
        self.coeffs.len()
    }

    /// Polynomial value at `u`, defined on [-1, 1].
    pub fn phi(&self, u: f64) -> Result<f64> {
        self.check_domain(u)?;
        Ok(self.phi_at(u))
    }

    /// Derivative at `u`, defined on [-1, 1].
    pub fn phi_prime(&self, u: f64) -> Result<f64> {
        self.check_domain(u)?;
        Ok(self.phi_prime_at(u))
    }

    /// True when the covariance has no linear term (`c_1 = 0`).
    pub fn is_strictly_nonlinear(&self) -> bool {
        self.coeffs.first().copied().unwrap_or(0.0) == 0.0
    }

    fn check_domain(&self, u: f64) -> Result<()> {
        if (-1.0..=1.0).contains(&u) {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                name: "covariance argument",
                value: u,
                lo: -1.0,
                hi: 1.0,
            })
        }
    }

    // Horner evaluation of sum c_l u^l = u * (c_1 + u * (c_2 + ...)).
    pub(crate) fn phi_at(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * u + c;
        }
        acc * u
    }

    pub(crate) fn phi_prime_at(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (l, &c) in self.coeffs.iter().enumerate().rev() {
            acc = acc * u + (l + 1) as f64 * c;
        }
        acc
    }
}

/// Length-K vector of binary labels, entries in {-1, +1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector(Vec<i8>);

impl LabelVector {
    pub fn new(entries: Vec<i8>) -> Result<Self> {
        if entries.iter().all(|&s| s == 1 || s == -1) {
            Ok(Self(entries))
        } else {
            Err(Error::BadLabel)
        }
    }

    /// Uniform iid labels.
    pub fn uniform<R: Rng>(k: usize, rng: &mut R) -> Self {
        Self((0..k).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[i8] {
        &self.0
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&s| s as f64).collect()
    }
}

/// One pure-order block of a sampled field: `n` iid Gaussian tensors of
/// shape `K^order`, entry variance `scale^2 / K^order`.
#[derive(Debug, Clone)]
pub struct TensorField {
    order: u32,
    k: usize,
    n: usize,
    /// sqrt(c_order); the amplitude already baked into the coefficients.
    scale: f64,
    /// `n` contiguous blocks of `k^order` entries each.
    coeffs: Vec<f64>,
}

impl TensorField {
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn input_dim(&self) -> usize {
        self.k
    }

    pub fn output_dim(&self) -> usize {
        self.n
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub(crate) fn block(&self, n: usize) -> &[f64] {
        let len = self.k.pow(self.order);
        &self.coeffs[n * len..(n + 1) * len]
    }
}

// Distinct stream tags so label, noise and coefficient draws never collide.
const STREAM_FIELD: u64 = 0x6669656c64; // "field"
pub(crate) const STREAM_LABELS: u64 = 0x6c6162656c; // "label"
pub(crate) const STREAM_NOISE: u64 = 0x6e6f697365; // "noise"

/// Seedable counter-style generator for a named substream.  Every (seed,
/// tag, index) triple yields an independent, reproducible stream, so
/// parallel generation does not depend on scheduling.
pub(crate) fn stream_rng(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(mix(tag, index));
    rng
}

/// Seed for the substream of one Monte Carlo trial.
pub(crate) fn trial_seed(seed: u64, trial: u64) -> u64 {
    mix(seed ^ 0x7472_6961_6c, trial) // "trial"
}

// SplitMix64-style avalanche of (tag, index) into a stream id.
fn mix(tag: u64, index: u64) -> u64 {
    let mut x = tag ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Sample one pure-order block per nonzero covariance coefficient.
///
/// Component `n` of order `l` draws its `K^l` entries from the stream
/// `(seed, l, n)`, iid `N(0, c_l / K^l)`.
pub fn sample_field(k: usize, n: usize, cov: &CovarianceFn, seed: u64) -> Result<Vec<TensorField>> {
    if k == 0 || n == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    let mut total: u128 = 0;
    for (idx, &c) in cov.coefficients().iter().enumerate() {
        if c > 0.0 {
            total += (n as u128) * (k as u128).pow(idx as u32 + 1);
        }
    }
    if total > COEFFICIENT_BUDGET {
        return Err(Error::FieldBudget {
            requested: total,
            budget: COEFFICIENT_BUDGET,
        });
    }

    let mut fields = Vec::new();
    for (idx, &c) in cov.coefficients().iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let order = idx as u32 + 1;
        let block_len = k.pow(order);
        let sd = (c / block_len as f64).sqrt();
        let blocks = crate::par::map_range_auto(n, |comp| {
            let mut rng = stream_rng(seed, STREAM_FIELD ^ u64::from(order), comp as u64);
            let mut block = Vec::with_capacity(block_len);
            for _ in 0..block_len {
                let g: f64 = rng.sample(StandardNormal);
                block.push(sd * g);
            }
            block
        });
        let mut coeffs = Vec::with_capacity(n * block_len);
        for b in blocks {
            coeffs.extend_from_slice(&b);
        }
        fields.push(TensorField {
            order,
            k,
            n,
            scale: c.sqrt(),
            coeffs,
        });
    }
    Ok(fields)
}

/// Evaluate the field at a label vector: per output component, the sum over
/// orders of the full tensor contraction with `s` repeated `order` times.
pub fn evaluate(fields: &[TensorField], s: &LabelVector) -> Result<Vec<f64>> {
    let Some(first) = fields.first() else {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    };
    let n = first.output_dim();
    for f in fields {
        if f.input_dim() != s.len() {
            return Err(Error::DimensionMismatch {
                expected: f.input_dim(),
                got: s.len(),
            });
        }
        if f.output_dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: f.output_dim(),
            });
        }
    }
    let sv = s.as_f64();
    let mut out = vec![0.0; n];
    for f in fields {
        for (comp, acc) in out.iter_mut().enumerate() {
            *acc += contract_full(f.block(comp), f.input_dim(), f.order(), &sv);
        }
    }
    Ok(out)
}

/// Full contraction of an order-`ord` tensor with the same vector on every
/// axis, folding one axis at a time.
pub(crate) fn contract_full(block: &[f64], k: usize, ord: u32, s: &[f64]) -> f64 {
    debug_assert_eq!(block.len(), k.pow(ord));
    if ord == 1 {
        return dot(block, s);
    }
    // Contract the last axis, then recurse on the reduced tensor.
    let reduced_len = k.pow(ord - 1);
    let mut reduced = vec![0.0; reduced_len];
    for (i, r) in reduced.iter_mut().enumerate() {
        *r = dot(&block[i * k..(i + 1) * k], s);
    }
    let mut ord = ord - 1;
    while ord > 1 {
        let next_len = k.pow(ord - 1);
        for i in 0..next_len {
            reduced[i] = dot(&reduced[i * k..(i + 1) * k], s);
        }
        reduced.truncate(next_len);
        ord -= 1;
    }
    dot(&reduced[..k], s)
}

/// Contraction with axis `axis` (0-based) pinned to index `fixed`; axes
/// before `axis` contract against `s_pre`, axes after against `s_post`.
/// Used by the Gray-code incremental evaluator: a single flipped spin
/// changes the full contraction by the telescoping sum of these terms.
pub(crate) fn contract_axis_fixed(
    block: &[f64],
    k: usize,
    ord: u32,
    axis: u32,
    fixed: usize,
    s_pre: &[f64],
    s_post: &[f64],
) -> f64 {
    debug_assert!(axis < ord);
    // Walk all multi-indices with the pinned axis via an odometer over the
    // free axes; strides follow row-major layout (last axis fastest).
    let free = (ord - 1) as usize;
    if free == 0 {
        return block[fixed];
    }
    let mut strides = vec![0usize; ord as usize];
    let mut acc_stride = 1usize;
    for a in (0..ord as usize).rev() {
        strides[a] = acc_stride;
        acc_stride *= k;
    }
    let base = strides[axis as usize] * fixed;
    let free_axes: Vec<usize> = (0..ord as usize).filter(|&a| a != axis as usize).collect();

    let mut idx = vec![0usize; free];
    let mut offset = base;
    let mut total = 0.0;
    loop {
        let mut weight = 1.0;
        for (slot, &a) in free_axes.iter().enumerate() {
            let s = if a < axis as usize { s_pre } else { s_post };
            weight *= s[idx[slot]];
        }
        total += weight * block[offset];

        // Advance the odometer (last free axis fastest).
        let mut slot = free;
        loop {
            if slot == 0 {
                return total;
            }
            slot -= 1;
            idx[slot] += 1;
            offset += strides[free_axes[slot]];
            if idx[slot] < k {
                break;
            }
            offset -= strides[free_axes[slot]] * k;
            idx[slot] = 0;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Serialize, Deserialize)]
struct DumpHeader {
    k: usize,
    n: usize,
    seed: u64,
    orders: Vec<u32>,
    scales: Vec<f64>,
}

/// Dump sampled fields: a one-line JSON header followed by one CSV row
/// `order,component,flat_index,value` per coefficient.
pub fn save_fields<P: AsRef<Path>>(path: P, fields: &[TensorField], seed: u64) -> Result<()> {
    let Some(first) = fields.first() else {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    };
    let header = DumpHeader {
        k: first.input_dim(),
        n: first.output_dim(),
        seed,
        orders: fields.iter().map(|f| f.order()).collect(),
        scales: fields.iter().map(|f| f.scale()).collect(),
    };
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(
        out,
        "{}",
        serde_json::to_string(&header).expect("header serializes")
    )?;
    for f in fields {
        let block_len = f.input_dim().pow(f.order());
        for comp in 0..f.output_dim() {
            for (i, v) in f.block(comp).iter().enumerate() {
                writeln!(out, "{},{},{},{v}", f.order(), comp, i)?;
            }
        }
        debug_assert_eq!(f.coefficients().len(), block_len * f.output_dim());
    }
    Ok(())
}

/// Load a field dump written by [`save_fields`].
pub fn load_fields<P: AsRef<Path>>(path: P) -> Result<(Vec<TensorField>, u64)> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Parse("empty file".into()))??;
    let header: DumpHeader =
        serde_json::from_str(&header_line).map_err(|e| Error::Parse(e.to_string()))?;

    let mut fields: Vec<TensorField> = header
        .orders
        .iter()
        .zip(&header.scales)
        .map(|(&order, &scale)| TensorField {
            order,
            k: header.k,
            n: header.n,
            scale,
            coeffs: vec![0.0; header.n * header.k.pow(order)],
        })
        .collect();

    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(4, ',');
        let mut next = || {
            parts
                .next()
                .ok_or_else(|| Error::Parse(format!("short row: {line}")))
        };
        let order: u32 = next()?
            .parse()
            .map_err(|_| Error::Parse(format!("bad order in: {line}")))?;
        let comp: usize = next()?
            .parse()
            .map_err(|_| Error::Parse(format!("bad component in: {line}")))?;
        let idx: usize = next()?
            .parse()
            .map_err(|_| Error::Parse(format!("bad index in: {line}")))?;
        let value: f64 = next()?
            .parse()
            .map_err(|_| Error::Parse(format!("bad value in: {line}")))?;
        let field = fields
            .iter_mut()
            .find(|f| f.order == order)
            .ok_or_else(|| Error::Parse(format!("unknown order {order}")))?;
        let block_len = field.k.pow(order);
        if comp >= field.n || idx >= block_len {
            return Err(Error::Parse(format!("index out of range in: {line}")));
        }
        field.coeffs[comp * block_len + idx] = value;
    }
    Ok((fields, header.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn covariance_validation() {
        assert!(CovarianceFn::new(vec![]).is_err());
        assert!(CovarianceFn::new(vec![0.0, 0.0]).is_err());
        assert!(CovarianceFn::new(vec![0.5, -0.1]).is_err());
        let c = CovarianceFn::new(vec![0.3, 0.0, 0.7]).unwrap();
        assert_eq!(c.max_order(), 3);
        assert!(!c.is_strictly_nonlinear());
        assert!(CovarianceFn::pure(2).is_strictly_nonlinear());
        assert!(!CovarianceFn::pure(1).is_strictly_nonlinear());
    }

    #[test]
    fn phi_values() {
        let pure2 = CovarianceFn::pure(2);
        assert_abs_diff_eq!(pure2.phi(1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(pure2.phi(0.5).unwrap(), 0.25);
        assert_abs_diff_eq!(pure2.phi_prime(0.5).unwrap(), 1.0);
        let fyo = CovarianceFn::half_quadratic();
        assert_abs_diff_eq!(fyo.phi(1.0).unwrap(), 0.5);
        assert_abs_diff_eq!(fyo.phi(0.3).unwrap(), 0.045);
        assert!(pure2.phi(1.5).is_err());
        assert!(pure2.phi_prime(-1.5).is_err());
    }

    #[test]
    fn phi_nondecreasing_on_unit_interval() {
        let c = CovarianceFn::new(vec![0.2, 0.0, 0.8]).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=100 {
            let u = i as f64 / 100.0;
            let v = c.phi(u).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn label_vector_validation() {
        assert!(LabelVector::new(vec![1, -1, 1]).is_ok());
        assert!(LabelVector::new(vec![1, 0]).is_err());
        let mut rng = stream_rng(1, STREAM_LABELS, 0);
        let s = LabelVector::uniform(50, &mut rng);
        assert_eq!(s.len(), 50);
        assert!(s.entries().iter().all(|&x| x == 1 || x == -1));
    }

    #[test]
    fn sampling_is_deterministic() {
        let cov = CovarianceFn::pure(2);
        let a = sample_field(6, 4, &cov, 99).unwrap();
        let b = sample_field(6, 4, &cov, 99).unwrap();
        assert_eq!(a[0].coefficients(), b[0].coefficients());
        let c = sample_field(6, 4, &cov, 100).unwrap();
        assert_ne!(a[0].coefficients(), c[0].coefficients());
    }

    #[test]
    fn single_coefficient_unit_variance() {
        // K = 1, N = 1, lambda = 1: one coefficient with variance 1; check
        // the spread over many seeds.
        let cov = CovarianceFn::pure(1);
        let draws: Vec<f64> = (0..2000)
            .map(|seed| sample_field(1, 1, &cov, seed).unwrap()[0].coefficients()[0])
            .collect();
        let var = draws.iter().map(|x| x * x).sum::<f64>() / draws.len() as f64;
        assert!((var - 1.0).abs() < 0.15, "var = {var}");
    }

    #[test]
    fn coefficient_variance_matches_order_scaling() {
        // K=10, N=5, pure order 2: 500 coefficients, variance 1/100.
        let cov = CovarianceFn::pure(2);
        let fields = sample_field(10, 5, &cov, 7).unwrap();
        assert_eq!(fields.len(), 1);
        let coeffs = fields[0].coefficients();
        assert_eq!(coeffs.len(), 500);
        let var = coeffs.iter().map(|x| x * x).sum::<f64>() / coeffs.len() as f64;
        assert!(var > 0.5 / 100.0 && var < 1.5 / 100.0, "var = {var}");
    }

    #[test]
    fn budget_guard() {
        let cov = CovarianceFn::pure(4);
        assert!(matches!(
            sample_field(400, 100, &cov, 0),
            Err(Error::FieldBudget { .. })
        ));
    }

    #[test]
    fn evaluate_linear_row() {
        let field = TensorField {
            order: 1,
            k: 4,
            n: 1,
            scale: 1.0,
            coeffs: vec![1.0, 0.0, 0.0, 0.0],
        };
        let s = LabelVector::new(vec![1, -1, -1, 1]).unwrap();
        let out = evaluate(&[field], &s).unwrap();
        assert_eq!(out, vec![1.0]);
    }

    #[test]
    fn evaluate_rank_one_quadratic() {
        // All entries equal j: contraction is j * (sum s)^2.
        let k = 5;
        let j = 0.3;
        let field = TensorField {
            order: 2,
            k,
            n: 1,
            scale: 1.0,
            coeffs: vec![j; k * k],
        };
        let s = LabelVector::new(vec![1, 1, -1, 1, -1]).unwrap();
        let sum: f64 = s.as_f64().iter().sum();
        let out = evaluate(&[field], &s).unwrap();
        assert_abs_diff_eq!(out[0], j * sum * sum, epsilon = 1e-12);
    }

    #[test]
    fn evaluate_dimension_mismatch() {
        let cov = CovarianceFn::pure(1);
        let fields = sample_field(4, 2, &cov, 0).unwrap();
        let s = LabelVector::new(vec![1, -1]).unwrap();
        assert!(evaluate(&fields, &s).is_err());
    }

    #[test]
    fn axis_fixed_contraction_consistency() {
        // Telescoping identity: T(u') - T(u) = sum_p delta * S_p.
        let cov = CovarianceFn::pure(3);
        let fields = sample_field(4, 1, &cov, 3).unwrap();
        let f = &fields[0];
        let u_old = LabelVector::new(vec![1, -1, 1, 1]).unwrap();
        let mut flipped = u_old.entries().to_vec();
        let flip = 2;
        flipped[flip] = -flipped[flip];
        let u_new = LabelVector::new(flipped).unwrap();

        let v_old = evaluate(std::slice::from_ref(f), &u_old).unwrap()[0];
        let v_new = evaluate(std::slice::from_ref(f), &u_new).unwrap()[0];

        let pre = u_new.as_f64();
        let post = u_old.as_f64();
        let delta = pre[flip] - post[flip];
        let mut step = 0.0;
        for axis in 0..3 {
            step += delta
                * contract_axis_fixed(f.block(0), 4, 3, axis, flip, &pre, &post);
        }
        assert_abs_diff_eq!(v_new - v_old, step, epsilon = 1e-12);
    }

    #[test]
    fn dump_roundtrip() {
        let cov = CovarianceFn::new(vec![0.25, 0.75]).unwrap();
        let fields = sample_field(5, 3, &cov, 11).unwrap();
        let dir = std::env::temp_dir().join(format!("nlgf-field-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("dump.csv");
        save_fields(&path, &fields, 11).unwrap();
        let (loaded, seed) = load_fields(&path).unwrap();
        assert_eq!(seed, 11);
        assert_eq!(loaded.len(), fields.len());
        for (a, b) in fields.iter().zip(&loaded) {
            assert_eq!(a.order(), b.order());
            assert_eq!(a.coefficients(), b.coefficients());
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
