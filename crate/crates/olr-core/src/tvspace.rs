//! Total-variability subspace: EM training of the T matrix over
//! Baum-Welch statistics, and i-vector extraction as the posterior mean
//! of the latent factor.
//!
//! For a segment with occupancies n and centered first-order stats f,
//! the latent posterior has precision L = I + sum_c n_c T_c' S_c^-1 T_c
//! and mean w = L^-1 T' S^-1 f, with S the UBM covariances.

use std::io::Write;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ubm::{DiagGmm, SufficientStats};

/// Segments per parallel chunk; fixed so accumulation order is stable.
const CHUNK_SEGMENTS: usize = 16;

/// Fixed-length segment embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct IVector {
    pub segment_id: String,
    pub w: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TVModel {
    /// (K*D) x R row-major; row c*D + d holds T_c[d, :].
    t: Vec<f64>,
    r: usize,
    ubm: DiagGmm,
}

impl TVModel {
    pub fn ivector_dim(&self) -> usize {
        self.r
    }

    pub fn ubm(&self) -> &DiagGmm {
        &self.ubm
    }

    fn t_row(&self, row: usize) -> &[f64] {
        &self.t[row * self.r..(row + 1) * self.r]
    }

    fn check_stats(&self, stats: &SufficientStats) -> Result<()> {
        if stats.n_components() != self.ubm.n_components() || stats.dim() != self.ubm.dim() {
            return Err(Error::DimensionMismatch {
                what: "sufficient statistics vs TV model",
                expected: self.ubm.n_components() * self.ubm.dim(),
                got: stats.n_components() * stats.dim(),
            });
        }
        Ok(())
    }

    /// Posterior precision L and information vector b = T' S^-1 f.
    fn posterior_system(&self, stats: &SufficientStats) -> (DMatrix<f64>, DVector<f64>) {
        let (k, d, r) = (self.ubm.n_components(), self.ubm.dim(), self.r);
        let mut l = DMatrix::<f64>::identity(r, r);
        let mut b = DVector::<f64>::zeros(r);
        for c in 0..k {
            let n_c = stats.n[c];
            let f_c = stats.f_row(c);
            let var = self.ubm.variance(c);
            for dd in 0..d {
                let row = self.t_row(c * d + dd);
                let iv = 1.0 / var[dd];
                let bw = f_c[dd] * iv;
                for i in 0..r {
                    b[i] += bw * row[i];
                }
                let nw = n_c * iv;
                if nw != 0.0 {
                    for i in 0..r {
                        let s = nw * row[i];
                        for j in i..r {
                            l[(i, j)] += s * row[j];
                        }
                    }
                }
            }
        }
        // Mirror the accumulated upper triangle.
        for i in 0..r {
            for j in 0..i {
                l[(i, j)] = l[(j, i)];
            }
        }
        (l, b)
    }

    /// Posterior mean and covariance of the latent factor.
    pub fn posterior(&self, stats: &SufficientStats) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.check_stats(stats)?;
        let (l, b) = self.posterior_system(stats);
        let chol = Cholesky::new(l)
            .ok_or_else(|| Error::Numeric("posterior precision not positive definite".to_string()))?;
        let mean = chol.solve(&b);
        let cov = chol.inverse();
        Ok((mean, cov))
    }

    /// Extracts the i-vector (posterior mean) for one segment.
    pub fn extract(&self, stats: &SufficientStats) -> Result<Vec<f64>> {
        self.check_stats(stats)?;
        let (l, b) = self.posterior_system(stats);
        let chol = Cholesky::new(l)
            .ok_or_else(|| Error::Numeric("posterior precision not positive definite".to_string()))?;
        Ok(chol.solve(&b).data.into())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = TVModelFile {
            format: FORMAT_TV.to_string(),
            version: 1,
            k: self.ubm.n_components(),
            d: self.ubm.dim(),
            r: self.r,
            t: self.t.clone(),
            ubm: self.ubm.to_file(),
        };
        let json = serde_json::to_vec(&file)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let file: TVModelFile = serde_json::from_slice(&bytes)?;
        let model_err = |msg: String| Error::Model {
            path: path.to_path_buf(),
            msg,
        };
        if file.format != FORMAT_TV || file.version != 1 {
            return Err(model_err(format!(
                "unsupported model envelope {}/{}",
                file.format, file.version
            )));
        }
        let ubm = DiagGmm::from_file(file.ubm).map_err(model_err)?;
        if file.k != ubm.n_components()
            || file.d != ubm.dim()
            || file.t.len() != file.k * file.d * file.r
        {
            return Err(model_err("T matrix shape does not match UBM".to_string()));
        }
        Ok(TVModel {
            t: file.t,
            r: file.r,
            ubm,
        })
    }
}

const FORMAT_TV: &str = "tv-model";

#[derive(Serialize, Deserialize)]
struct TVModelFile {
    format: String,
    version: u32,
    k: usize,
    d: usize,
    r: usize,
    t: Vec<f64>,
    ubm: crate::ubm::DiagGmmFile,
}

/// Training result: the model and the per-iteration EM objective
/// (marginal log-likelihood of the latent factors, up to constants).
pub struct TvTraining {
    pub model: TVModel,
    pub objective: Vec<f64>,
}

struct TvAccumulator {
    /// Per component: sum_s n_c(s) (Cov_s + w_s w_s').
    a: Vec<DMatrix<f64>>,
    /// Per component: sum_s f_c(s) w_s'.
    c: Vec<DMatrix<f64>>,
    objective: f64,
}

impl TvAccumulator {
    fn zeros(k: usize, d: usize, r: usize) -> Self {
        TvAccumulator {
            a: (0..k).map(|_| DMatrix::zeros(r, r)).collect(),
            c: (0..k).map(|_| DMatrix::zeros(d, r)).collect(),
            objective: 0.0,
        }
    }

    fn merge(&mut self, other: &TvAccumulator) {
        for (a, b) in self.a.iter_mut().zip(&other.a) {
            *a += b;
        }
        for (a, b) in self.c.iter_mut().zip(&other.c) {
            *a += b;
        }
        self.objective += other.objective;
    }
}

/// Trains the total-variability matrix with EM.
pub fn train_tv(
    stats: &[SufficientStats],
    ubm: &DiagGmm,
    r: usize,
    n_iterations: usize,
    rng_seed: u64,
) -> Result<TvTraining> {
    let (k, d) = (ubm.n_components(), ubm.dim());
    if r < 1 || r > k * d {
        return Err(Error::Config(format!(
            "i-vector dimension must be in 1..={}, got {r}",
            k * d
        )));
    }
    if n_iterations < 1 {
        return Err(Error::Config("n_iterations must be >= 1".to_string()));
    }
    if stats.is_empty() {
        return Err(Error::InsufficientData("no training statistics".to_string()));
    }
    for s in stats {
        if s.n_components() != k || s.dim() != d {
            return Err(Error::DimensionMismatch {
                what: "sufficient statistics vs UBM",
                expected: k * d,
                got: s.n_components() * s.dim(),
            });
        }
    }

    // Small random init keeps the initial posterior precision near I.
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let scale = 0.1 / (r as f64).sqrt();
    let t: Vec<f64> = (0..k * d * r)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut model = TVModel {
        t,
        r,
        ubm: ubm.clone(),
    };

    let mut objective = Vec::with_capacity(n_iterations);
    for _ in 0..n_iterations {
        let chunk_accs: Vec<Result<TvAccumulator>> = stats
            .par_chunks(CHUNK_SEGMENTS)
            .map(|chunk| {
                let mut acc = TvAccumulator::zeros(k, d, r);
                for seg in chunk {
                    let (l, b) = model.posterior_system(seg);
                    let chol = Cholesky::new(l).ok_or_else(|| {
                        Error::Numeric("posterior precision not positive definite".to_string())
                    })?;
                    let w = chol.solve(&b);
                    let cov = chol.inverse();
                    // log det L from the Cholesky diagonal.
                    let log_det: f64 =
                        chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
                    acc.objective += -0.5 * log_det + 0.5 * b.dot(&w);

                    let second_moment = &cov + &w * w.transpose();
                    for c in 0..k {
                        if seg.n[c] != 0.0 {
                            acc.a[c] += seg.n[c] * &second_moment;
                        }
                        let f_c = DVector::from_column_slice(seg.f_row(c));
                        acc.c[c] += f_c * w.transpose();
                    }
                }
                Ok(acc)
            })
            .collect();

        let mut acc = TvAccumulator::zeros(k, d, r);
        for chunk in chunk_accs {
            acc.merge(&chunk?);
        }
        objective.push(acc.objective);

        // Per-component solve T_c = C_c A_c^-1.
        let new_blocks: Vec<Option<DMatrix<f64>>> = (0..k)
            .into_par_iter()
            .map(|c| {
                let a = &acc.a[c];
                let chol = Cholesky::new(a.clone()).or_else(|| {
                    let trace = a.trace();
                    if trace <= 0.0 {
                        return None;
                    }
                    log::warn!("TV M-step: singular system for component {c}, adding ridge");
                    let ridge = DMatrix::<f64>::identity(r, r) * (1e-8 * trace);
                    Cholesky::new(a + ridge)
                })?;
                // X = A^-1 C', so T_c = X'.
                Some(chol.solve(&acc.c[c].transpose()).transpose())
            })
            .collect();

        for (c, block) in new_blocks.into_iter().enumerate() {
            match block {
                Some(t_c) => {
                    for dd in 0..d {
                        let row = &mut model.t[(c * d + dd) * r..(c * d + dd + 1) * r];
                        for i in 0..r {
                            row[i] = t_c[(dd, i)];
                        }
                    }
                }
                None => {
                    log::warn!("TV M-step: component {c} unoccupied, keeping previous block");
                }
            }
        }
    }

    Ok(TvTraining { model, objective })
}

/// Writes i-vectors as text: `segment_id v1 .. vR` per line.
pub fn write_ivectors(path: &Path, ivectors: &[IVector]) -> Result<()> {
    let mut out = Vec::new();
    for iv in ivectors {
        write!(out, "{}", iv.segment_id).unwrap();
        for v in &iv.w {
            write!(out, " {v}").unwrap();
        }
        writeln!(out).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_ivectors(path: &Path) -> Result<Vec<IVector>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let segment_id = fields.next().unwrap().to_string();
        let w = fields
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Model {
                    path: path.to_path_buf(),
                    msg: format!("line {}: bad number {f:?}", lineno + 1),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if w.is_empty() {
            return Err(Error::Model {
                path: path.to_path_buf(),
                msg: format!("line {}: no values", lineno + 1),
            });
        }
        out.push(IVector { segment_id, w });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Hand-built tiny setup: K=4, D=3.
    fn tiny_ubm() -> DiagGmm {
        let means = vec![
            0.0, 0.0, 0.0, //
            10.0, 0.0, 0.0, //
            0.0, 10.0, 0.0, //
            0.0, 0.0, 10.0,
        ];
        let vars = vec![1.0, 0.5, 2.0, 1.5, 1.0, 0.5, 0.5, 2.0, 1.0, 1.0, 1.0, 1.0];
        DiagGmm::new(vec![0.25; 4], means, vars, vec![1e-10; 3]).unwrap()
    }

    fn random_stats(rng: &mut ChaCha8Rng, k: usize, d: usize, frames: f64) -> SufficientStats {
        let mut s = SufficientStats::zeros(k, d);
        let mut rest = frames;
        for c in 0..k {
            let n = if c + 1 == k { rest } else { rng.random_range(0.0..rest) };
            rest -= n;
            s.n[c] = n;
            for i in 0..d {
                s.f[c * d + i] = rng.random_range(-3.0..3.0) * n.max(0.1);
            }
        }
        s.total_frames = frames;
        s
    }

    fn fit_tiny_model(seed: u64) -> TVModel {
        let ubm = tiny_ubm();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stats: Vec<SufficientStats> =
            (0..40).map(|_| random_stats(&mut rng, 4, 3, 100.0)).collect();
        train_tv(&stats, &ubm, 2, 5, seed).unwrap().model
    }

    #[test]
    fn zero_stats_give_prior_posterior() {
        let model = fit_tiny_model(1);
        let stats = SufficientStats::zeros(4, 3);
        let (mean, cov) = model.posterior(&stats).unwrap();
        assert!(mean.iter().all(|&v| v == 0.0));
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((cov[(i, j)] - expected).abs() < 1e-12);
            }
        }
        assert_eq!(model.extract(&stats).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn doubling_stats_shrinks_relative_norm() {
        let model = fit_tiny_model(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let stats = random_stats(&mut rng, 4, 3, 80.0);
            let mut doubled = stats.clone();
            doubled.merge(&stats).unwrap();
            let w1 = model.extract(&stats).unwrap();
            let w2 = model.extract(&doubled).unwrap();
            let n1: f64 = w1.iter().map(|v| v * v).sum::<f64>().sqrt();
            let n2: f64 = w2.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n1 > 1e-12 {
                assert!(n2 < 2.0 * n1, "posterior did not shrink: {n2} vs 2*{n1}");
            }
        }
    }

    #[test]
    fn extraction_is_linear_in_f_for_fixed_n() {
        let model = fit_tiny_model(4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = random_stats(&mut rng, 4, 3, 60.0);
        let mut s1 = base.clone();
        let mut s2 = base.clone();
        for v in &mut s1.f {
            *v = rng.random_range(-2.0..2.0);
        }
        for v in &mut s2.f {
            *v = rng.random_range(-2.0..2.0);
        }
        let mut sum = s1.clone();
        for (a, b) in sum.f.iter_mut().zip(&s2.f) {
            *a += b;
        }
        let w1 = model.extract(&s1).unwrap();
        let w2 = model.extract(&s2).unwrap();
        let ws = model.extract(&sum).unwrap();
        for i in 0..2 {
            assert!((ws[i] - (w1[i] + w2[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn matches_dense_bruteforce_oracle() {
        // Dense construction of L and a Cramer solve, independent of the
        // blocked implementation.
        let model = fit_tiny_model(6);
        let (k, d, r) = (4usize, 3usize, 2usize);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let stats = random_stats(&mut rng, k, d, 50.0);
            let mut l = [[0.0f64; 2]; 2];
            let mut b = [0.0f64; 2];
            for i in 0..r {
                l[i][i] = 1.0;
            }
            for c in 0..k {
                let var = model.ubm.variance(c);
                for dd in 0..d {
                    let row = model.t_row(c * d + dd);
                    for i in 0..r {
                        b[i] += row[i] * stats.f[c * d + dd] / var[dd];
                        for j in 0..r {
                            l[i][j] += stats.n[c] * row[i] * row[j] / var[dd];
                        }
                    }
                }
            }
            let det = l[0][0] * l[1][1] - l[0][1] * l[1][0];
            let expected = [
                (b[0] * l[1][1] - b[1] * l[0][1]) / det,
                (l[0][0] * b[1] - l[1][0] * b[0]) / det,
            ];
            let got = model.extract(&stats).unwrap();
            for i in 0..r {
                assert!(
                    (got[i] - expected[i]).abs() < 1e-10,
                    "w[{i}]: {} vs {}",
                    got[i],
                    expected[i]
                );
            }
        }
    }

    #[test]
    fn posterior_precision_dominates_identity() {
        let model = fit_tiny_model(8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let stats = random_stats(&mut rng, 4, 3, 30.0);
            let (l, _) = model.posterior_system(&stats);
            let eig = nalgebra::SymmetricEigen::new(l);
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min >= 1.0 - 1e-8, "smallest eigenvalue {min}");
        }
    }

    #[test]
    fn objective_is_monotone() {
        let ubm = tiny_ubm();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let stats: Vec<SufficientStats> =
            (0..60).map(|_| random_stats(&mut rng, 4, 3, 120.0)).collect();
        let objective = train_tv(&stats, &ubm, 3, 12, 10).unwrap().objective;
        assert_eq!(objective.len(), 12);
        for w in objective.windows(2) {
            let tol = 1e-5 * w[0].abs().max(1.0);
            assert!(w[1] >= w[0] - tol, "objective decreased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn training_is_seed_deterministic() {
        let ubm = tiny_ubm();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let stats: Vec<SufficientStats> =
            (0..33).map(|_| random_stats(&mut rng, 4, 3, 70.0)).collect();
        let a = train_tv(&stats, &ubm, 2, 4, 123).unwrap().model;
        let b = train_tv(&stats, &ubm, 2, 4, 123).unwrap().model;
        assert_eq!(a.t, b.t);
        let c = train_tv(&stats, &ubm, 2, 4, 124).unwrap().model;
        assert_ne!(a.t, c.t);
    }

    #[test]
    fn recovers_generating_subspace() {
        // Segments drawn from a known (UBM, T0) generative model; the
        // trained subspace must align with span(T0).
        let ubm = tiny_ubm();
        let (k, d, r) = (4usize, 3usize, 2usize);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let t0: Vec<f64> = (0..k * d * r)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();

        let n_segments = 500;
        let frames_per_seg = 200;
        let mut all_stats = Vec::with_capacity(n_segments);
        for _ in 0..n_segments {
            let w: [f64; 2] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            let mut rows = Vec::with_capacity(frames_per_seg);
            for _ in 0..frames_per_seg {
                let c = rng.random_range(0..k);
                let mean = ubm.mean(c);
                let var = ubm.variance(c);
                let mut x = vec![0.0f64; d];
                for dd in 0..d {
                    let shift: f64 =
                        t0[(c * d + dd) * r] * w[0] + t0[(c * d + dd) * r + 1] * w[1];
                    let e: f64 = rng.sample(StandardNormal);
                    x[dd] = mean[dd] + shift + var[dd].sqrt() * e;
                }
                rows.push(x);
            }
            let feats = crate::features::FeatureMatrix::from_rows(&rows);
            all_stats.push(crate::ubm::accumulate_stats(&ubm, &feats).unwrap());
        }

        let model = train_tv(&all_stats, &ubm, r, 10, 99).unwrap().model;

        // Largest principal angle between span(T) and span(T0) via
        // Gram-Schmidt bases and the smallest singular value of Q1'Q2.
        let orthonormal = |m: &[f64]| -> Vec<Vec<f64>> {
            let rows = m.len() / r;
            let mut cols: Vec<Vec<f64>> = (0..r)
                .map(|j| (0..rows).map(|i| m[i * r + j]).collect())
                .collect();
            for j in 0..r {
                for prev in 0..j {
                    let dot: f64 = cols[j].iter().zip(&cols[prev]).map(|(a, b)| a * b).sum();
                    let prev_col = cols[prev].clone();
                    for (v, p) in cols[j].iter_mut().zip(&prev_col) {
                        *v -= dot * p;
                    }
                }
                let norm: f64 = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
                for v in &mut cols[j] {
                    *v /= norm;
                }
            }
            cols
        };
        let q1 = orthonormal(&model.t);
        let q2 = orthonormal(&t0);
        let mut m = [[0.0f64; 2]; 2];
        for i in 0..r {
            for j in 0..r {
                m[i][j] = q1[i].iter().zip(&q2[j]).map(|(a, b)| a * b).sum();
            }
        }
        // Singular values of the 2x2 M from eigenvalues of M'M.
        let a = m[0][0] * m[0][0] + m[1][0] * m[1][0];
        let b = m[0][0] * m[0][1] + m[1][0] * m[1][1];
        let c = m[0][1] * m[0][1] + m[1][1] * m[1][1];
        let disc = ((a - c) * (a - c) / 4.0 + b * b).sqrt();
        let min_sv = ((a + c) / 2.0 - disc).max(0.0).sqrt();
        let angle_deg = min_sv.clamp(-1.0, 1.0).acos().to_degrees();
        assert!(angle_deg < 5.0, "principal angle {angle_deg} degrees");
    }

    #[test]
    fn unoccupied_component_keeps_its_block() {
        let ubm = tiny_ubm();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let stats: Vec<SufficientStats> = (0..20)
            .map(|_| {
                let mut s = random_stats(&mut rng, 4, 3, 90.0);
                // Component 3 never sees any data.
                s.n[3] = 0.0;
                for v in &mut s.f[9..12] {
                    *v = 0.0;
                }
                s
            })
            .collect();
        let trained = train_tv(&stats, &ubm, 2, 4, 16).unwrap();
        assert!(trained.model.t.iter().all(|v| v.is_finite()));
        for w in trained.objective.windows(2) {
            assert!(w[1] >= w[0] - 1e-5 * w[0].abs().max(1.0));
        }
    }

    #[test]
    fn rejects_bad_dimensions() {
        let ubm = tiny_ubm();
        let stats = vec![SufficientStats::zeros(4, 3)];
        assert!(train_tv(&stats, &ubm, 0, 3, 1).is_err());
        assert!(train_tv(&stats, &ubm, 13, 3, 1).is_err());
        let wrong = vec![SufficientStats::zeros(3, 3)];
        assert!(train_tv(&wrong, &ubm, 2, 3, 1).is_err());
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let model = fit_tiny_model(13);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tv.json");
        model.save(&path).unwrap();
        let loaded = TVModel::load(&path).unwrap();
        assert_eq!(model.t, loaded.t);
        assert_eq!(model.r, loaded.r);
        assert_eq!(model.ubm.weights(), loaded.ubm.weights());
    }

    #[test]
    fn ivector_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ivectors.txt");
        let ivs = vec![
            IVector {
                segment_id: "seg_a".to_string(),
                w: vec![0.25, -1.5, 3.0e-7],
            },
            IVector {
                segment_id: "seg_b".to_string(),
                w: vec![1.0, 2.0, -0.125],
            },
        ];
        write_ivectors(&path, &ivs).unwrap();
        let back = read_ivectors(&path).unwrap();
        assert_eq!(back, ivs);
    }
}
