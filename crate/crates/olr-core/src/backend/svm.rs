//! One-vs-rest soft-margin SVMs trained by sequential minimal
//! optimization with maximal-violating-pair working-set selection.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{length_normalize, ScoreVector};
use crate::corpus::LanguageCode;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelSpec {
    Linear,
    Poly { degree: u32, gamma: f64, coef0: f64 },
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(a, b),
            KernelSpec::Poly { degree, gamma, coef0 } => {
                (gamma * dot(a, b) + coef0).powi(degree as i32)
            }
            KernelSpec::Rbf { gamma } => {
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * sq).exp()
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Linear => "linear",
            KernelSpec::Poly { .. } => "poly",
            KernelSpec::Rbf { .. } => "rbf",
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Kernel choice before data-dependent defaults are resolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    Linear,
    Poly,
    Rbf,
}

#[derive(Clone, Debug)]
pub struct SvmTrainConfig {
    pub kernel: KernelKind,
    pub c: f64,
    /// Kernel scale; None picks 1/dim for poly and 1/(dim * variance) for rbf.
    pub gamma: Option<f64>,
    pub coef0: f64,
    pub poly_degree: u32,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub length_normalize: bool,
}

impl Default for SvmTrainConfig {
    fn default() -> Self {
        SvmTrainConfig {
            kernel: KernelKind::Linear,
            c: 1.0,
            gamma: None,
            coef0: 1.0,
            poly_degree: 3,
            tolerance: 1e-3,
            max_iterations: 100_000,
            length_normalize: true,
        }
    }
}

/// One binary machine of the one-vs-rest set.
#[derive(Clone, Debug)]
pub struct BinarySvm {
    /// Support vectors in the (possibly normalized) kernel input space.
    pub support_vectors: Vec<Vec<f64>>,
    /// alpha_i * y_i per support vector, each within [-C, C].
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
}

impl BinarySvm {
    pub fn decision_value(&self, kernel: &KernelSpec, v: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, coef)| coef * kernel.eval(sv, v))
            .sum::<f64>()
            + self.bias
    }
}

#[derive(Clone, Debug)]
pub struct SvmModel {
    languages: Vec<LanguageCode>,
    kernel: KernelSpec,
    c: f64,
    length_normalize: bool,
    machines: Vec<BinarySvm>,
}

impl SvmModel {
    pub fn languages(&self) -> &[LanguageCode] {
        &self.languages
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn machines(&self) -> &[BinarySvm] {
        &self.machines
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let (name, degree, gamma, coef0) = match self.kernel {
            KernelSpec::Linear => ("linear", None, None, None),
            KernelSpec::Poly { degree, gamma, coef0 } => {
                ("poly", Some(degree), Some(gamma), Some(coef0))
            }
            KernelSpec::Rbf { gamma } => ("rbf", None, Some(gamma), None),
        };
        let file = SvmFile {
            format: "svm-ovr".to_string(),
            version: 1,
            kernel: name.to_string(),
            degree,
            gamma,
            coef0,
            c: self.c,
            length_normalize: self.length_normalize,
            languages: self.languages.iter().map(|l| l.to_string()).collect(),
            machines: self
                .machines
                .iter()
                .map(|m| SvmMachineFile {
                    bias: m.bias,
                    dual_coefs: m.dual_coefs.clone(),
                    dim: m.support_vectors.first().map_or(0, Vec::len),
                    support_vectors: m.support_vectors.iter().flatten().copied().collect(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&file)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let file: SvmFile = serde_json::from_slice(&bytes)?;
        let model_err = |msg: String| Error::Model {
            path: path.to_path_buf(),
            msg,
        };
        if file.format != "svm-ovr" || file.version != 1 {
            return Err(model_err("unsupported model envelope".to_string()));
        }
        let kernel = match file.kernel.as_str() {
            "linear" => KernelSpec::Linear,
            "poly" => KernelSpec::Poly {
                degree: file.degree.ok_or_else(|| model_err("poly kernel without degree".into()))?,
                gamma: file.gamma.ok_or_else(|| model_err("poly kernel without gamma".into()))?,
                coef0: file.coef0.ok_or_else(|| model_err("poly kernel without coef0".into()))?,
            },
            "rbf" => KernelSpec::Rbf {
                gamma: file.gamma.ok_or_else(|| model_err("rbf kernel without gamma".into()))?,
            },
            other => return Err(model_err(format!("unknown kernel {other:?}"))),
        };
        let languages = file
            .languages
            .iter()
            .map(|s| s.parse::<LanguageCode>())
            .collect::<Result<Vec<_>>>()
            .map_err(|e| model_err(e.to_string()))?;
        let machines = file
            .machines
            .into_iter()
            .map(|m| {
                if m.support_vectors.len() != m.dim * m.dual_coefs.len() {
                    return Err(model_err("support vector array length mismatch".to_string()));
                }
                Ok(BinarySvm {
                    support_vectors: m
                        .support_vectors
                        .chunks_exact(m.dim)
                        .map(<[f64]>::to_vec)
                        .collect(),
                    dual_coefs: m.dual_coefs,
                    bias: m.bias,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if machines.len() != languages.len() {
            return Err(model_err("one machine per language required".to_string()));
        }
        Ok(SvmModel {
            languages,
            kernel,
            c: file.c,
            length_normalize: file.length_normalize,
            machines,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct SvmFile {
    format: String,
    version: u32,
    kernel: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    degree: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coef0: Option<f64>,
    c: f64,
    length_normalize: bool,
    languages: Vec<String>,
    machines: Vec<SvmMachineFile>,
}

#[derive(Serialize, Deserialize)]
struct SvmMachineFile {
    bias: f64,
    dim: usize,
    dual_coefs: Vec<f64>,
    support_vectors: Vec<f64>,
}

/// Trains one soft-margin SVM per language against the rest.
pub fn train_svm_ovr(
    vectors: &[Vec<f64>],
    labels: &[LanguageCode],
    config: &SvmTrainConfig,
) -> Result<SvmModel> {
    if vectors.len() != labels.len() || vectors.is_empty() {
        return Err(Error::Config(
            "need one label per vector and at least one vector".to_string(),
        ));
    }
    if !(config.c > 0.0) || !(config.tolerance > 0.0) {
        return Err(Error::Config("C and tolerance must be positive".to_string()));
    }
    let dim = vectors[0].len();
    let languages: Vec<LanguageCode> = LanguageCode::ALL
        .iter()
        .copied()
        .filter(|l| labels.contains(l))
        .collect();
    if languages.len() < 2 {
        return Err(Error::InsufficientData(
            "one-vs-rest training needs at least 2 classes".to_string(),
        ));
    }

    let mut inputs: Vec<Vec<f64>> = vectors.to_vec();
    if config.length_normalize {
        for v in &mut inputs {
            length_normalize(v);
        }
    }

    let kernel = resolve_kernel(config, &inputs, dim);

    // Shared kernel matrix; the per-language problems differ only in labels.
    let n = inputs.len();
    let kmat: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let row: Vec<f64> = (0..n).map(|j| kernel.eval(&inputs[i], &inputs[j])).collect();
            row
        })
        .collect();

    let machines = languages
        .par_iter()
        .map(|&lang| {
            let y: Vec<f64> = labels
                .iter()
                .map(|&l| if l == lang { 1.0 } else { -1.0 })
                .collect();
            let solution = smo_solve(&kmat, n, &y, config.c, config.tolerance, config.max_iterations)
                .map_err(|e| match e {
                    Error::Numeric(msg) => Error::Numeric(format!("SVM for {lang}: {msg}")),
                    other => other,
                })?;
            let mut support_vectors = Vec::new();
            let mut dual_coefs = Vec::new();
            for i in 0..n {
                if solution.alpha[i] > 0.0 {
                    support_vectors.push(inputs[i].clone());
                    dual_coefs.push(solution.alpha[i] * y[i]);
                }
            }
            Ok(BinarySvm {
                support_vectors,
                dual_coefs,
                bias: solution.bias,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SvmModel {
        languages,
        kernel,
        c: config.c,
        length_normalize: config.length_normalize,
        machines,
    })
}

fn resolve_kernel(config: &SvmTrainConfig, inputs: &[Vec<f64>], dim: usize) -> KernelSpec {
    match config.kernel {
        KernelKind::Linear => KernelSpec::Linear,
        KernelKind::Poly => KernelSpec::Poly {
            degree: config.poly_degree,
            gamma: config.gamma.unwrap_or(1.0 / dim as f64),
            coef0: config.coef0,
        },
        KernelKind::Rbf => {
            let gamma = config.gamma.unwrap_or_else(|| {
                // 1 / (dim * mean per-dimension variance) of the kernel inputs.
                let n = inputs.len() as f64;
                let mut mean = vec![0.0f64; dim];
                for v in inputs {
                    for (m, x) in mean.iter_mut().zip(v) {
                        *m += x;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n);
                let mut var = 0.0f64;
                for v in inputs {
                    for (x, m) in v.iter().zip(&mean) {
                        var += (x - m) * (x - m);
                    }
                }
                var /= n * dim as f64;
                if var > 0.0 {
                    1.0 / (dim as f64 * var)
                } else {
                    1.0
                }
            });
            KernelSpec::Rbf { gamma }
        }
    }
}

/// Per-language scores: raw one-vs-rest decision values.
pub fn svm_scores(model: &SvmModel, v: &[f64]) -> Result<ScoreVector> {
    let dim = model.machines[0]
        .support_vectors
        .first()
        .map_or(0, Vec::len);
    if v.len() != dim {
        return Err(Error::DimensionMismatch {
            what: "SVM scoring",
            expected: dim,
            got: v.len(),
        });
    }
    let mut input = v.to_vec();
    if model.length_normalize {
        length_normalize(&mut input);
    }
    let scores = model
        .machines
        .iter()
        .map(|m| m.decision_value(&model.kernel, &input))
        .collect();
    ScoreVector::new(scores)
}

struct SmoSolution {
    alpha: Vec<f64>,
    bias: f64,
}

const SMO_TAU: f64 = 1e-12;

/// LIBSVM-style SMO over the dual problem
/// min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0, with Q_ij = y_i y_j K_ij.
/// Working pairs are chosen by maximal KKT violation.
fn smo_solve(
    kmat: &[f64],
    n: usize,
    y: &[f64],
    c: f64,
    tolerance: f64,
    max_iterations: usize,
) -> Result<SmoSolution> {
    let mut alpha = vec![0.0f64; n];
    let mut grad = vec![-1.0f64; n];
    let q = |i: usize, j: usize| y[i] * y[j] * kmat[i * n + j];

    let mut residual = f64::INFINITY;
    let mut converged = false;
    for _ in 0..max_iterations {
        // i maximizes -y g over I_up, j minimizes it over I_low.
        let mut i_best: Option<(usize, f64)> = None;
        let mut j_best: Option<(usize, f64)> = None;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if in_up && i_best.map_or(true, |(_, best)| v > best) {
                i_best = Some((t, v));
            }
            if in_low && j_best.map_or(true, |(_, best)| v < best) {
                j_best = Some((t, v));
            }
        }
        let ((i, m_up), (j, m_low)) = match (i_best, j_best) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                converged = true;
                residual = 0.0;
                break;
            }
        };
        residual = m_up - m_low;
        if residual <= tolerance {
            converged = true;
            break;
        }

        let (old_i, old_j) = (alpha[i], alpha[j]);
        // Both branches share the feature-space curvature
        // K_ii + K_jj - 2 K_ij (in Q terms the signs differ with y).
        if y[i] != y[j] {
            let mut quad = kmat[i * n + i] + kmat[j * n + j] - 2.0 * kmat[i * n + j];
            if quad <= 0.0 {
                quad = SMO_TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else {
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            }
        } else {
            let mut quad = kmat[i * n + i] + kmat[j * n + j] - 2.0 * kmat[i * n + j];
            if quad <= 0.0 {
                quad = SMO_TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }

        let (delta_i, delta_j) = (alpha[i] - old_i, alpha[j] - old_j);
        if delta_i != 0.0 || delta_j != 0.0 {
            for t in 0..n {
                grad[t] += q(i, t) * delta_i + q(j, t) * delta_j;
            }
        }
    }
    if !converged {
        return Err(Error::Numeric(format!(
            "SMO did not converge within iteration budget (KKT residual {residual:.3e})"
        )));
    }

    // Bias from free support vectors, else the violation midpoint.
    let mut free_sum = 0.0f64;
    let mut free_count = 0usize;
    for t in 0..n {
        if alpha[t] > SMO_TAU && alpha[t] < c - SMO_TAU {
            free_sum += -y[t] * grad[t];
            free_count += 1;
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        let mut m_up = f64::NEG_INFINITY;
        let mut m_low = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0) {
                m_up = m_up.max(v);
            }
            if (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c) {
                m_low = m_low.min(v);
            }
        }
        (m_up + m_low) / 2.0
    };

    Ok(SmoSolution { alpha, bias })
}
