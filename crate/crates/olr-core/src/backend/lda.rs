//! Multiclass Fisher LDA with within-class whitening.
//!
//! The projection solves the generalized eigenproblem (S_b, S_w) through
//! a Cholesky reduction of the ridge-regularized within-class scatter;
//! the resulting columns satisfy v' S_w v = I, so projected within-class
//! scatter is the identity by construction.

use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::corpus::LanguageCode;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LdaTransform {
    /// R x P, columns are projection directions.
    projection: DMatrix<f64>,
    input_mean: Vec<f64>,
}

impl LdaTransform {
    pub fn input_dim(&self) -> usize {
        self.projection.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.projection.ncols()
    }

    /// (v - input_mean) projected onto the discriminant directions.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "LDA projection",
                expected: self.input_dim(),
                got: v.len(),
            });
        }
        let centered = DVector::from_iterator(
            v.len(),
            v.iter().zip(&self.input_mean).map(|(a, b)| a - b),
        );
        Ok((self.projection.transpose() * centered).data.into())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = LdaFile {
            format: "lda".to_string(),
            version: 1,
            r: self.input_dim(),
            p: self.output_dim(),
            input_mean: self.input_mean.clone(),
            // Row-major flattening.
            projection: (0..self.input_dim())
                .flat_map(|i| (0..self.output_dim()).map(move |j| (i, j)))
                .map(|(i, j)| self.projection[(i, j)])
                .collect(),
        };
        let json = serde_json::to_vec(&file)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let file: LdaFile = serde_json::from_slice(&bytes)?;
        let model_err = |msg: &str| Error::Model {
            path: path.to_path_buf(),
            msg: msg.to_string(),
        };
        if file.format != "lda" || file.version != 1 {
            return Err(model_err("unsupported model envelope"));
        }
        if file.projection.len() != file.r * file.p || file.input_mean.len() != file.r {
            return Err(model_err("array lengths do not match declared r/p"));
        }
        let projection =
            DMatrix::from_row_iterator(file.r, file.p, file.projection.iter().copied());
        Ok(LdaTransform {
            projection,
            input_mean: file.input_mean,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct LdaFile {
    format: String,
    version: u32,
    r: usize,
    p: usize,
    input_mean: Vec<f64>,
    projection: Vec<f64>,
}

/// Fits the multiclass Fisher discriminant, keeping the top `p`
/// directions.
pub fn fit_lda(
    vectors: &[Vec<f64>],
    labels: &[LanguageCode],
    p: usize,
) -> Result<LdaTransform> {
    if vectors.len() != labels.len() || vectors.is_empty() {
        return Err(Error::Config(
            "need one label per vector and at least one vector".to_string(),
        ));
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::Config("vectors have mixed dimensions".to_string()));
    }

    let classes: Vec<LanguageCode> = LanguageCode::ALL
        .iter()
        .copied()
        .filter(|l| labels.contains(l))
        .collect();
    if classes.len() < 2 {
        return Err(Error::InsufficientData(
            "LDA needs at least 2 classes".to_string(),
        ));
    }
    if p < 1 || p > classes.len() - 1 {
        return Err(Error::Config(format!(
            "projection dim must be in 1..={}, got {p}",
            classes.len() - 1
        )));
    }
    for &class in &classes {
        let count = labels.iter().filter(|&&l| l == class).count();
        if count < 2 {
            return Err(Error::InsufficientData(format!(
                "class {class} has {count} vector(s), need at least 2"
            )));
        }
    }

    let n = vectors.len();
    let mut global_mean = vec![0.0f64; dim];
    for v in vectors {
        for (m, x) in global_mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut global_mean {
        *m /= n as f64;
    }

    let mut s_w = DMatrix::<f64>::zeros(dim, dim);
    let mut s_b = DMatrix::<f64>::zeros(dim, dim);
    for &class in &classes {
        let members: Vec<&Vec<f64>> = vectors
            .iter()
            .zip(labels)
            .filter(|&(_, &l)| l == class)
            .map(|(v, _)| v)
            .collect();
        let mut class_mean = vec![0.0f64; dim];
        for v in &members {
            for (m, x) in class_mean.iter_mut().zip(v.iter()) {
                *m += x;
            }
        }
        for m in &mut class_mean {
            *m /= members.len() as f64;
        }
        for v in &members {
            let diff = DVector::from_iterator(
                dim,
                v.iter().zip(&class_mean).map(|(a, b)| a - b),
            );
            s_w += &diff * diff.transpose();
        }
        let between = DVector::from_iterator(
            dim,
            class_mean.iter().zip(&global_mean).map(|(a, b)| a - b),
        );
        s_b += members.len() as f64 * &between * between.transpose();
    }

    let ridge = 1e-6 * s_w.trace() / dim as f64;
    for i in 0..dim {
        s_w[(i, i)] += ridge;
    }

    let chol = Cholesky::new(s_w).ok_or_else(|| {
        Error::Numeric("within-class scatter is not positive definite".to_string())
    })?;
    let l = chol.l();
    // M = L^-1 S_b L^-T, symmetrized against rounding.
    let a = l.solve_lower_triangular(&s_b).unwrap();
    let m = l.solve_lower_triangular(&a.transpose()).unwrap();
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let mut projection = DMatrix::<f64>::zeros(dim, p);
    for (col, &idx) in order.iter().take(p).enumerate() {
        let u = eig.eigenvectors.column(idx).into_owned();
        // v = L^-T u gives v' S_w v = 1.
        let v = l
            .transpose()
            .solve_upper_triangular(&u)
            .ok_or_else(|| Error::Numeric("triangular solve failed".to_string()))?;
        // Deterministic sign: largest-magnitude entry positive.
        let lead = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let sign = if v[lead] < 0.0 { -1.0 } else { 1.0 };
        projection.set_column(col, &(v * sign));
    }

    Ok(LdaTransform {
        projection,
        input_mean: global_mean,
    })
}
