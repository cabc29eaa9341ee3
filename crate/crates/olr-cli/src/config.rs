//! Declarative run configuration: a single TOML document validated in
//! full before any stage starts. Environment variables with the `OLR_`
//! prefix override file values; command-line flags override both.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use olr_core::backend::{KernelKind, SvmTrainConfig};
use olr_core::corpus::SynthSpec;
use olr_core::features::{Cmvn, FeatureConfig};
use olr_core::metrics::MetricConfig;
use olr_core::ubm::EmConfig;
use olr_core::{Error, Result};

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 keeps the library default (all cores).
    pub workers: usize,
    pub paths: PathsConfig,
    pub synth: SynthConfig,
    pub features: FeaturesConfig,
    pub ubm: UbmConfig,
    pub tv: TvConfig,
    pub backend: BackendConfig,
    pub metrics: MetricsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            workers: 0,
            paths: PathsConfig::default(),
            synth: SynthConfig::default(),
            features: FeaturesConfig::default(),
            ubm: UbmConfig::default(),
            tv: TvConfig::default(),
            backend: BackendConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub corpus_dir: PathBuf,
    pub work_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            corpus_dir: PathBuf::from("corpus"),
            work_dir: PathBuf::from("work"),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_languages: usize,
    pub train_speakers: usize,
    pub test_speakers: usize,
    pub utts_per_speaker: usize,
    pub utt_seconds: f64,
    pub language_separation: f64,
    pub noisy_fraction: f64,
    pub noisy_snr_db: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let spec = SynthSpec::default();
        SynthConfig {
            n_languages: spec.n_languages,
            train_speakers: spec.speakers_per_language_train,
            test_speakers: spec.speakers_per_language_test,
            utts_per_speaker: spec.utts_per_speaker,
            utt_seconds: spec.utt_seconds,
            language_separation: spec.language_separation,
            noisy_fraction: spec.noisy_fraction,
            noisy_snr_db: spec.noisy_snr_db,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    pub frame_length_ms: f64,
    pub frame_shift_ms: f64,
    pub pre_emphasis: f64,
    pub n_mel_filters: usize,
    pub n_cepstra: usize,
    pub include_log_energy: bool,
    pub delta_window: usize,
    pub energy_floor: f64,
    /// "per-utterance-mean" or "off".
    pub cmvn: String,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        let config = FeatureConfig::default();
        FeaturesConfig {
            frame_length_ms: config.frame_length_ms,
            frame_shift_ms: config.frame_shift_ms,
            pre_emphasis: config.pre_emphasis,
            n_mel_filters: config.n_mel_filters,
            n_cepstra: config.n_cepstra,
            include_log_energy: config.include_log_energy,
            delta_window: config.delta_window,
            energy_floor: config.energy_floor,
            cmvn: "per-utterance-mean".to_string(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct UbmConfig {
    pub n_components: usize,
    pub n_iterations: usize,
    pub variance_floor_scale: f64,
    pub kmeans_sample_cap: usize,
}

impl Default for UbmConfig {
    fn default() -> Self {
        let config = EmConfig::default();
        UbmConfig {
            n_components: config.n_components,
            n_iterations: config.n_iterations,
            variance_floor_scale: config.variance_floor_scale,
            kmeans_sample_cap: config.kmeans_sample_cap,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct TvConfig {
    pub dim: usize,
    pub n_iterations: usize,
}

impl Default for TvConfig {
    fn default() -> Self {
        TvConfig {
            dim: 20,
            n_iterations: 10,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    /// "cosine" or "svm".
    pub scoring: String,
    /// "raw" or "lda".
    pub projection: String,
    pub lda_dim: usize,
    /// "linear", "poly" or "rbf".
    pub svm_kernel: String,
    pub svm_c: f64,
    pub svm_gamma: Option<f64>,
    pub svm_coef0: f64,
    pub length_normalize: bool,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            scoring: "cosine".to_string(),
            projection: "lda".to_string(),
            lda_dim: 6,
            svm_kernel: "linear".to_string(),
            svm_c: 1.0,
            svm_gamma: None,
            svm_coef0: 1.0,
            length_normalize: true,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub p_target: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig { p_target: 0.5 }
    }
}

impl RunConfig {
    /// Loads from TOML, then applies `OLR_*` environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        config.apply_env()?;
        config.validate()?;
        Ok(config)
    }

    fn apply_env(&mut self) -> Result<()> {
        let parse_u64 = |key: &str| -> Result<Option<u64>> {
            match std::env::var(key) {
                Ok(v) => v
                    .parse::<u64>()
                    .map(Some)
                    .map_err(|_| Error::Config(format!("{key}={v:?} is not an integer"))),
                Err(_) => Ok(None),
            }
        };
        if let Some(seed) = parse_u64("OLR_SEED")? {
            self.seed = seed;
        }
        if let Some(workers) = parse_u64("OLR_WORKERS")? {
            self.workers = workers as usize;
        }
        if let Ok(dir) = std::env::var("OLR_WORK_DIR") {
            self.paths.work_dir = PathBuf::from(dir);
        }
        if let Ok(dir) = std::env::var("OLR_CORPUS_DIR") {
            self.paths.corpus_dir = PathBuf::from(dir);
        }
        Ok(())
    }

    /// Full validation before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.synth_spec().validate()?;
        self.feature_config()?.validate()?;
        self.em_config().validate()?;
        self.metric_config().validate()?;
        if self.tv.dim < 1 || self.tv.n_iterations < 1 {
            return Err(Error::Config("tv.dim and tv.n_iterations must be >= 1".to_string()));
        }
        if self.backend.lda_dim < 1 {
            return Err(Error::Config("backend.lda_dim must be >= 1".to_string()));
        }
        match self.backend.scoring.as_str() {
            "cosine" | "svm" => {}
            other => {
                return Err(Error::Config(format!(
                    "backend.scoring must be cosine or svm, got {other:?}"
                )))
            }
        }
        match self.backend.projection.as_str() {
            "raw" | "lda" => {}
            other => {
                return Err(Error::Config(format!(
                    "backend.projection must be raw or lda, got {other:?}"
                )))
            }
        }
        self.svm_kernel()?;
        if !(self.backend.svm_c > 0.0) {
            return Err(Error::Config("backend.svm_c must be > 0".to_string()));
        }
        match self.features.cmvn.as_str() {
            "per-utterance-mean" | "off" => Ok(()),
            other => Err(Error::Config(format!(
                "features.cmvn must be per-utterance-mean or off, got {other:?}"
            ))),
        }
    }

    pub fn synth_spec(&self) -> SynthSpec {
        SynthSpec {
            n_languages: self.synth.n_languages,
            speakers_per_language_train: self.synth.train_speakers,
            speakers_per_language_test: self.synth.test_speakers,
            utts_per_speaker: self.synth.utts_per_speaker,
            utt_seconds: self.synth.utt_seconds,
            language_separation: self.synth.language_separation,
            noisy_fraction: self.synth.noisy_fraction,
            noisy_snr_db: self.synth.noisy_snr_db,
            rng_seed: self.seed,
        }
    }

    pub fn feature_config(&self) -> Result<FeatureConfig> {
        let cmvn = match self.features.cmvn.as_str() {
            "per-utterance-mean" => Cmvn::PerUtteranceMean,
            "off" => Cmvn::Off,
            other => {
                return Err(Error::Config(format!(
                    "features.cmvn must be per-utterance-mean or off, got {other:?}"
                )))
            }
        };
        Ok(FeatureConfig {
            frame_length_ms: self.features.frame_length_ms,
            frame_shift_ms: self.features.frame_shift_ms,
            pre_emphasis: self.features.pre_emphasis,
            n_mel_filters: self.features.n_mel_filters,
            n_cepstra: self.features.n_cepstra,
            include_log_energy: self.features.include_log_energy,
            delta_window: self.features.delta_window,
            energy_floor: self.features.energy_floor,
            cmvn,
        })
    }

    pub fn em_config(&self) -> EmConfig {
        EmConfig {
            n_components: self.ubm.n_components,
            n_iterations: self.ubm.n_iterations,
            variance_floor_scale: self.ubm.variance_floor_scale,
            kmeans_sample_cap: self.ubm.kmeans_sample_cap,
            rng_seed: self.seed.wrapping_add(1),
        }
    }

    pub fn tv_seed(&self) -> u64 {
        self.seed.wrapping_add(2)
    }

    pub fn svm_kernel(&self) -> Result<KernelKind> {
        match self.backend.svm_kernel.as_str() {
            "linear" => Ok(KernelKind::Linear),
            "poly" => Ok(KernelKind::Poly),
            "rbf" => Ok(KernelKind::Rbf),
            other => Err(Error::Config(format!(
                "backend.svm_kernel must be linear, poly or rbf, got {other:?}"
            ))),
        }
    }

    pub fn svm_train_config(&self, kernel: KernelKind) -> SvmTrainConfig {
        SvmTrainConfig {
            kernel,
            c: self.backend.svm_c,
            gamma: self.backend.svm_gamma,
            coef0: self.backend.svm_coef0,
            length_normalize: self.backend.length_normalize,
            ..SvmTrainConfig::default()
        }
    }

    pub fn metric_config(&self) -> MetricConfig {
        MetricConfig {
            p_target: self.metrics.p_target,
            decision_threshold: 0.0,
        }
    }
}
