//! Diagonal-covariance GMM universal background model: EM training,
//! frame likelihoods and per-segment Baum-Welch sufficient statistics.
//!
//! Training parallelizes over fixed-size segment chunks whose partial
//! accumulators are merged in segment order, so results are bit-identical
//! for any worker count.

use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Segments per parallel accumulation chunk (fixed so that summation
/// order does not depend on the worker count).
const CHUNK_SEGMENTS: usize = 16;

/// A component is considered starved below this share of total frames.
const EMPTY_OCCUPANCY: f64 = 1e-8;

/// Absolute lower bound on the variance floor; keeps 1/variance finite
/// even on constant data.
const MIN_ABS_VARIANCE_FLOOR: f64 = 1e-20;

#[derive(Clone, Debug)]
pub struct DiagGmm {
    k: usize,
    d: usize,
    weights: Vec<f64>,
    means: Vec<f64>,     // K x D row-major
    variances: Vec<f64>, // K x D row-major
    variance_floor: Vec<f64>,
    // Derived: log w_k - D/2 ln(2pi) - 1/2 sum_d ln var_kd, and 1/var.
    gconst: Vec<f64>,
    inv_var: Vec<f64>,
}

impl DiagGmm {
    pub fn new(
        weights: Vec<f64>,
        means: Vec<f64>,
        variances: Vec<f64>,
        variance_floor: Vec<f64>,
    ) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() % k != 0 {
            return Err(Error::Config("inconsistent GMM shapes".to_string()));
        }
        let d = means.len() / k;
        if variances.len() != k * d || variance_floor.len() != d {
            return Err(Error::Config("inconsistent GMM shapes".to_string()));
        }
        let wsum: f64 = weights.iter().sum();
        if (wsum - 1.0).abs() > 1e-8 || weights.iter().any(|&w| w < 0.0) {
            return Err(Error::Numeric(format!(
                "GMM weights must form a simplex (sum {wsum})"
            )));
        }
        for c in 0..k {
            for dd in 0..d {
                if variances[c * d + dd] < variance_floor[dd] * (1.0 - 1e-12) {
                    return Err(Error::Numeric(format!(
                        "variance below floor at component {c}, dim {dd}"
                    )));
                }
            }
        }
        let mut model = DiagGmm {
            k,
            d,
            weights,
            means,
            variances,
            variance_floor,
            gconst: Vec::new(),
            inv_var: Vec::new(),
        };
        model.refresh_derived();
        Ok(model)
    }

    fn refresh_derived(&mut self) {
        let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        self.inv_var = self.variances.iter().map(|&v| 1.0 / v).collect();
        self.gconst = (0..self.k)
            .map(|c| {
                let logdet: f64 = self.variance(c).iter().map(|&v| v.ln()).sum();
                self.weights[c].ln() - self.d as f64 * half_log_2pi - 0.5 * logdet
            })
            .collect();
    }

    pub fn n_components(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self, c: usize) -> &[f64] {
        &self.means[c * self.d..(c + 1) * self.d]
    }

    pub fn variance(&self, c: usize) -> &[f64] {
        &self.variances[c * self.d..(c + 1) * self.d]
    }

    pub fn variance_floor(&self) -> &[f64] {
        &self.variance_floor
    }

    /// Per-component log(w_k N(frame; m_k, diag var_k)) into `out`.
    fn log_weighted_gaussians(&self, frame: &[f64], out: &mut [f64]) {
        debug_assert_eq!(frame.len(), self.d);
        debug_assert_eq!(out.len(), self.k);
        for c in 0..self.k {
            let mean = &self.means[c * self.d..(c + 1) * self.d];
            let ivar = &self.inv_var[c * self.d..(c + 1) * self.d];
            let mut acc = 0.0;
            for i in 0..self.d {
                let diff = frame[i] - mean[i];
                acc += diff * diff * ivar[i];
            }
            out[c] = self.gconst[c] - 0.5 * acc;
        }
    }

    /// log sum_k w_k N(frame; m_k, diag var_k), via log-sum-exp.
    pub fn log_likelihood(&self, frame: &[f64]) -> Result<f64> {
        if frame.len() != self.d {
            return Err(Error::DimensionMismatch {
                what: "GMM frame",
                expected: self.d,
                got: frame.len(),
            });
        }
        let mut lg = vec![0.0f64; self.k];
        self.log_weighted_gaussians(frame, &mut lg);
        Ok(log_sum_exp(&lg))
    }

    pub(crate) fn to_file(&self) -> DiagGmmFile {
        DiagGmmFile {
            format: FORMAT_GMM.to_string(),
            version: 1,
            k: self.k,
            d: self.d,
            variance_floor: self.variance_floor.clone(),
            weights: self.weights.clone(),
            means: self.means.clone(),
            variances: self.variances.clone(),
        }
    }

    pub(crate) fn from_file(file: DiagGmmFile) -> std::result::Result<Self, String> {
        if file.format != FORMAT_GMM || file.version != 1 {
            return Err(format!(
                "unsupported model envelope {}/{}",
                file.format, file.version
            ));
        }
        if file.weights.len() != file.k
            || file.means.len() != file.k * file.d
            || file.variances.len() != file.k * file.d
            || file.variance_floor.len() != file.d
        {
            return Err("array lengths do not match declared k/d".to_string());
        }
        DiagGmm::new(file.weights, file.means, file.variances, file.variance_floor)
            .map_err(|e| e.to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec(&self.to_file())?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let file: DiagGmmFile = serde_json::from_slice(&bytes)?;
        DiagGmm::from_file(file).map_err(|msg| Error::Model {
            path: path.to_path_buf(),
            msg,
        })
    }
}

const FORMAT_GMM: &str = "diag-gmm";

#[derive(Serialize, Deserialize)]
pub(crate) struct DiagGmmFile {
    format: String,
    version: u32,
    k: usize,
    d: usize,
    variance_floor: Vec<f64>,
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Zeroth- and centered first-order Baum-Welch statistics of one or more
/// segments against a fixed UBM.
#[derive(Clone, Debug)]
pub struct SufficientStats {
    pub n: Vec<f64>, // K
    /// Centered first-order sums F_c - N_c m_c, K x D row-major.
    pub f: Vec<f64>,
    pub total_frames: f64,
    k: usize,
    d: usize,
}

impl SufficientStats {
    pub fn zeros(k: usize, d: usize) -> Self {
        SufficientStats {
            n: vec![0.0; k],
            f: vec![0.0; k * d],
            total_frames: 0.0,
            k,
            d,
        }
    }

    pub fn n_components(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn f_row(&self, c: usize) -> &[f64] {
        &self.f[c * self.d..(c + 1) * self.d]
    }

    /// Adds another segment's statistics; stats are associative under merge.
    pub fn merge(&mut self, other: &SufficientStats) -> Result<()> {
        if other.k != self.k || other.d != self.d {
            return Err(Error::DimensionMismatch {
                what: "sufficient statistics",
                expected: self.k * self.d,
                got: other.k * other.d,
            });
        }
        for (a, b) in self.n.iter_mut().zip(&other.n) {
            *a += b;
        }
        for (a, b) in self.f.iter_mut().zip(&other.f) {
            *a += b;
        }
        self.total_frames += other.total_frames;
        Ok(())
    }
}

/// Accumulates per-segment Baum-Welch statistics under `model`.
///
/// First-order sums are stored centered by the model means, so the i-vector
/// estimation equations need no further mean subtraction.
pub fn accumulate_stats(model: &DiagGmm, features: &FeatureMatrix) -> Result<SufficientStats> {
    if features.cols() != model.dim() {
        return Err(Error::DimensionMismatch {
            what: "feature dimension",
            expected: model.dim(),
            got: features.cols(),
        });
    }
    let (k, d) = (model.n_components(), model.dim());
    let mut stats = SufficientStats::zeros(k, d);
    let mut lg = vec![0.0f64; k];
    for frame in features.iter_rows() {
        model.log_weighted_gaussians(frame, &mut lg);
        let norm = log_sum_exp(&lg);
        for c in 0..k {
            let gamma = (lg[c] - norm).exp();
            stats.n[c] += gamma;
            let mean = model.mean(c);
            let row = &mut stats.f[c * d..(c + 1) * d];
            for i in 0..d {
                row[i] += gamma * (frame[i] - mean[i]);
            }
        }
    }
    stats.total_frames += features.rows() as f64;
    Ok(stats)
}

#[derive(Clone, Debug)]
pub struct EmConfig {
    pub n_components: usize,
    pub n_iterations: usize,
    /// Variance floor as a fraction of the global per-dimension variance.
    pub variance_floor_scale: f64,
    /// Frame subsample cap for the k-means++ style seeding.
    pub kmeans_sample_cap: usize,
    pub rng_seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            n_components: 64,
            n_iterations: 10,
            variance_floor_scale: 1e-4,
            kmeans_sample_cap: 100_000,
            rng_seed: 42,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_components < 1 || self.n_iterations < 1 {
            return Err(Error::Config(
                "n_components and n_iterations must be >= 1".to_string(),
            ));
        }
        if !(self.variance_floor_scale > 0.0) || self.kmeans_sample_cap < 1 {
            return Err(Error::Config(
                "variance_floor_scale must be > 0 and kmeans_sample_cap >= 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// EM training result: the model plus the total data log-likelihood
/// recorded at the start of every iteration.
pub struct UbmTraining {
    pub model: DiagGmm,
    pub log_likelihoods: Vec<f64>,
}

struct EmAccumulator {
    loglik: f64,
    n: Vec<f64>,
    fx: Vec<f64>,  // K x D, sum gamma * x
    fx2: Vec<f64>, // K x D, sum gamma * x^2
}

impl EmAccumulator {
    fn zeros(k: usize, d: usize) -> Self {
        EmAccumulator {
            loglik: 0.0,
            n: vec![0.0; k],
            fx: vec![0.0; k * d],
            fx2: vec![0.0; k * d],
        }
    }

    fn add_segment(&mut self, model: &DiagGmm, features: &FeatureMatrix, lg: &mut [f64]) {
        let (k, d) = (model.n_components(), model.dim());
        for frame in features.iter_rows() {
            model.log_weighted_gaussians(frame, lg);
            let norm = log_sum_exp(lg);
            self.loglik += norm;
            for c in 0..k {
                let gamma = (lg[c] - norm).exp();
                self.n[c] += gamma;
                let fx = &mut self.fx[c * d..(c + 1) * d];
                let fx2 = &mut self.fx2[c * d..(c + 1) * d];
                for i in 0..d {
                    fx[i] += gamma * frame[i];
                    fx2[i] += gamma * frame[i] * frame[i];
                }
            }
        }
    }

    fn merge(&mut self, other: &EmAccumulator) {
        self.loglik += other.loglik;
        for (a, b) in self.n.iter_mut().zip(&other.n) {
            *a += b;
        }
        for (a, b) in self.fx.iter_mut().zip(&other.fx) {
            *a += b;
        }
        for (a, b) in self.fx2.iter_mut().zip(&other.fx2) {
            *a += b;
        }
    }
}

/// Trains the UBM with EM from a k-means++ style seeding.
pub fn train_ubm(features: &[FeatureMatrix], config: &EmConfig) -> Result<UbmTraining> {
    config.validate()?;
    let d = features
        .first()
        .map(FeatureMatrix::cols)
        .ok_or_else(|| Error::InsufficientData("no feature segments".to_string()))?;
    if features.iter().any(|f| f.cols() != d) {
        return Err(Error::Config("segments have mixed feature dimensions".to_string()));
    }
    let total_frames: usize = features.iter().map(FeatureMatrix::rows).sum();
    let k = config.n_components;
    if total_frames < k {
        return Err(Error::InsufficientData(format!(
            "{total_frames} frames cannot support {k} components"
        )));
    }

    // Global per-dimension moments: variance floor and initial spread.
    let mut global_mean = vec![0.0f64; d];
    let mut global_sq = vec![0.0f64; d];
    for seg in features {
        for frame in seg.iter_rows() {
            for i in 0..d {
                global_mean[i] += frame[i];
                global_sq[i] += frame[i] * frame[i];
            }
        }
    }
    for i in 0..d {
        global_mean[i] /= total_frames as f64;
        global_sq[i] = (global_sq[i] / total_frames as f64 - global_mean[i] * global_mean[i])
            .max(MIN_ABS_VARIANCE_FLOOR);
    }
    let floor: Vec<f64> = global_sq
        .iter()
        .map(|&v| (v * config.variance_floor_scale).max(MIN_ABS_VARIANCE_FLOOR))
        .collect();
    let init_var: Vec<f64> = global_sq
        .iter()
        .zip(&floor)
        .map(|(&v, &fl)| v.max(fl))
        .collect();

    let means = seed_means(features, total_frames, d, config);
    let mut variances = Vec::with_capacity(k * d);
    for _ in 0..k {
        variances.extend_from_slice(&init_var);
    }
    let mut model = DiagGmm::new(vec![1.0 / k as f64; k], means, variances, floor.clone())?;

    let mut log_likelihoods = Vec::with_capacity(config.n_iterations);
    for iteration in 0..config.n_iterations {
        // E-step over fixed segment chunks, merged in order.
        let chunk_accs: Vec<EmAccumulator> = features
            .par_chunks(CHUNK_SEGMENTS)
            .map(|chunk| {
                let mut acc = EmAccumulator::zeros(k, d);
                let mut lg = vec![0.0f64; k];
                for seg in chunk {
                    acc.add_segment(&model, seg, &mut lg);
                }
                acc
            })
            .collect();
        let mut acc = EmAccumulator::zeros(k, d);
        for chunk in &chunk_accs {
            acc.merge(chunk);
        }
        log_likelihoods.push(acc.loglik);

        // M-step.
        let mut weights = vec![0.0f64; k];
        let mut means = vec![0.0f64; k * d];
        let mut variances = vec![0.0f64; k * d];
        let mut starved = Vec::new();
        for c in 0..k {
            if acc.n[c] < EMPTY_OCCUPANCY * total_frames as f64 {
                starved.push(c);
                continue;
            }
            weights[c] = acc.n[c] / total_frames as f64;
            for i in 0..d {
                let m = acc.fx[c * d + i] / acc.n[c];
                means[c * d + i] = m;
                variances[c * d + i] =
                    (acc.fx2[c * d + i] / acc.n[c] - m * m).max(floor[i]);
            }
        }
        for &c in &starved {
            // Split the heaviest component with a deterministic offset.
            let donor = (0..k)
                .max_by(|&a, &b| acc.n[a].partial_cmp(&acc.n[b]).unwrap())
                .unwrap();
            log::warn!(
                "EM iteration {iteration}: component {c} starved (n={:.3e}), reseeding from component {donor}",
                acc.n[c]
            );
            for i in 0..d {
                let sigma = variances[donor * d + i].sqrt();
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                means[c * d + i] = means[donor * d + i] + 0.5 * sign * sigma;
                variances[c * d + i] = variances[donor * d + i];
            }
            weights[c] = weights[donor] / 2.0;
            weights[donor] /= 2.0;
        }
        let wsum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= wsum;
        }
        model = DiagGmm::new(weights, means, variances, floor.clone())?;
    }

    Ok(UbmTraining {
        model,
        log_likelihoods,
    })
}

/// k-means++ style seeding over a strided frame subsample.
fn seed_means(
    features: &[FeatureMatrix],
    total_frames: usize,
    d: usize,
    config: &EmConfig,
) -> Vec<f64> {
    let stride = total_frames.div_ceil(config.kmeans_sample_cap).max(1);
    let mut sample: Vec<&[f64]> = Vec::with_capacity(total_frames / stride + 1);
    let mut counter = 0usize;
    for seg in features {
        for frame in seg.iter_rows() {
            if counter % stride == 0 {
                sample.push(frame);
            }
            counter += 1;
        }
    }

    let k = config.n_components;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut means = Vec::with_capacity(k * d);
    let first = rng.random_range(0..sample.len());
    means.extend_from_slice(sample[first]);

    let sq_dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    };
    let mut d2: Vec<f64> = sample.par_iter().map(|f| sq_dist(f, sample[first])).collect();

    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let chosen = if total > 0.0 {
            let mut u = rng.random_range(0.0..total);
            let mut idx = sample.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            idx
        } else {
            rng.random_range(0..sample.len())
        };
        let center = sample[chosen];
        means.extend_from_slice(center);
        d2.par_iter_mut().zip(sample.par_iter()).for_each(|(dist, f)| {
            let nd = sq_dist(f, center);
            if nd < *dist {
                *dist = nd;
            }
        });
    }
    means
}
