//! Language-discriminative back-ends: LDA projection, cosine scoring
//! against per-language mean vectors, one-vs-rest kernel SVMs, and the
//! softmax log-odds calibration that makes threshold-zero decisions
//! meaningful for either scorer.

mod lda;
mod svm;

pub use lda::{fit_lda, LdaTransform};
pub use svm::{svm_scores, train_svm_ovr, BinarySvm, KernelKind, KernelSpec, SvmModel, SvmTrainConfig};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::LanguageCode;
use crate::error::{Error, Result};
use crate::ubm::log_sum_exp;

/// Per-language scores in a fixed language order. Entries are finite or
/// negative infinity (the lost-trial sentinel).
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::Config("empty score vector".to_string()));
        }
        if scores.iter().any(|s| s.is_nan() || *s == f64::INFINITY) {
            return Err(Error::Numeric(
                "score vectors must be finite or -inf".to_string(),
            ));
        }
        Ok(ScoreVector(scores))
    }

    pub fn lost(n: usize) -> Self {
        ScoreVector(vec![f64::NEG_INFINITY; n])
    }

    pub fn scores(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when every entry is the lost-trial sentinel.
    pub fn is_lost(&self) -> bool {
        self.0.iter().all(|&s| s == f64::NEG_INFINITY)
    }

    /// Index of the highest score; ties break to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &s) in self.0.iter().enumerate().skip(1) {
            if s > self.0[best] {
                best = i;
            }
        }
        best
    }
}

/// Unit-norm mean vector per language, the cosine-scoring model.
#[derive(Clone, Debug)]
pub struct LanguageMeans {
    languages: Vec<LanguageCode>,
    means: Vec<Vec<f64>>,
}

impl LanguageMeans {
    pub fn languages(&self) -> &[LanguageCode] {
        &self.languages
    }

    pub fn mean(&self, i: usize) -> &[f64] {
        &self.means[i]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = LanguageMeansFile {
            format: "language-means".to_string(),
            version: 1,
            dim: self.means.first().map_or(0, Vec::len),
            languages: self.languages.iter().map(|l| l.to_string()).collect(),
            means: self.means.iter().flatten().copied().collect(),
        };
        let json = serde_json::to_vec(&file)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let file: LanguageMeansFile = serde_json::from_slice(&bytes)?;
        let model_err = |msg: String| Error::Model {
            path: path.to_path_buf(),
            msg,
        };
        if file.format != "language-means" || file.version != 1 {
            return Err(model_err("unsupported model envelope".to_string()));
        }
        if file.means.len() != file.dim * file.languages.len() {
            return Err(model_err("mean array length mismatch".to_string()));
        }
        let languages = file
            .languages
            .iter()
            .map(|s| s.parse::<LanguageCode>())
            .collect::<Result<Vec<_>>>()
            .map_err(|e| model_err(e.to_string()))?;
        let means = file.means.chunks_exact(file.dim).map(<[f64]>::to_vec).collect();
        Ok(LanguageMeans { languages, means })
    }
}

#[derive(Serialize, Deserialize)]
struct LanguageMeansFile {
    format: String,
    version: u32,
    dim: usize,
    languages: Vec<String>,
    means: Vec<f64>,
}

/// Arithmetic mean per language, length-normalized.
pub fn compute_language_means(
    vectors: &[Vec<f64>],
    labels: &[LanguageCode],
) -> Result<LanguageMeans> {
    if vectors.len() != labels.len() || vectors.is_empty() {
        return Err(Error::Config(
            "need one label per vector and at least one vector".to_string(),
        ));
    }
    let dim = vectors[0].len();
    let languages: Vec<LanguageCode> = LanguageCode::ALL
        .iter()
        .copied()
        .filter(|l| labels.contains(l))
        .collect();
    let mut means = Vec::with_capacity(languages.len());
    for &lang in &languages {
        let mut mean = vec![0.0f64; dim];
        let mut count = 0usize;
        for (v, &l) in vectors.iter().zip(labels) {
            if l == lang {
                for (m, x) in mean.iter_mut().zip(v) {
                    *m += x;
                }
                count += 1;
            }
        }
        for m in &mut mean {
            *m /= count as f64;
        }
        let norm: f64 = mean.iter().map(|m| m * m).sum::<f64>().sqrt();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::Numeric(format!(
                "mean vector for {lang} has zero norm, cannot length-normalize"
            )));
        }
        for m in &mut mean {
            *m /= norm;
        }
        means.push(mean);
    }
    Ok(LanguageMeans { languages, means })
}

/// Cosine of the test vector against each language mean.
pub fn cosine_scores(means: &LanguageMeans, v: &[f64]) -> Result<ScoreVector> {
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= 0.0 || !norm.is_finite() {
        return Err(Error::Numeric(
            "cannot cosine-score a zero or non-finite vector".to_string(),
        ));
    }
    let scores = means
        .means
        .iter()
        .map(|m| {
            if m.len() != v.len() {
                return Err(Error::DimensionMismatch {
                    what: "cosine scoring",
                    expected: m.len(),
                    got: v.len(),
                });
            }
            Ok(m.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / norm)
        })
        .collect::<Result<Vec<f64>>>()?;
    ScoreVector::new(scores)
}

/// Maps raw scores to per-language log-odds: softmax posteriors under a
/// flat prior, then ln(p / (1 - p)). Order-preserving, so identification
/// results are unchanged; the zero threshold becomes the posterior-0.5
/// decision point.
pub fn calibrate_scores(raw: &ScoreVector) -> ScoreVector {
    let z = raw.scores();
    let total = log_sum_exp(z);
    let calibrated = (0..z.len())
        .map(|i| {
            if z[i] == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            // ln p_i - ln(1 - p_i) = z_i - logsumexp of the others.
            let rest: Vec<f64> = z
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &v)| v)
                .collect();
            let denom = if rest.is_empty() { f64::NEG_INFINITY } else { log_sum_exp(&rest) };
            if denom == f64::NEG_INFINITY {
                // Every other language is lost; saturate instead of +inf.
                f64::MAX
            } else {
                z[i] - denom
            }
        })
        .collect();
    let _ = total;
    ScoreVector(calibrated)
}

/// Divides a vector by its Euclidean norm; zero vectors pass unchanged.
pub fn length_normalize(v: &mut [f64]) {
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        for x in v {
            *x /= norm;
        }
    }
}
