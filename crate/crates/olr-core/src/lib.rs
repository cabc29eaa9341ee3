//! Spoken language recognition toolkit: an end-to-end acoustic pipeline
//! (MFCC features, GMM-UBM, i-vectors, LDA, cosine and SVM scoring) with
//! the full challenge evaluation protocol (score files, Cavg, EER,
//! minDCF, DET, IDR) and a synthetic multilingual corpus generator for
//! desk-scale runs.

pub mod backend;
pub mod challenge;
pub mod corpus;
pub mod error;
pub mod features;
pub mod metrics;
pub mod tvspace;
pub mod ubm;

pub use error::{Error, Result};
