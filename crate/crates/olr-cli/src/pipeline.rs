//! Pipeline stages behind the CLI subcommands. Every stage is a pure
//! function of its inputs plus the run seed, writes its artifacts under
//! the work directory, and records what it produced in `artifacts.txt`.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use olr_core::backend::{
    calibrate_scores, compute_language_means, cosine_scores, fit_lda, svm_scores, train_svm_ovr,
    KernelKind, LanguageMeans, LdaTransform, ScoreVector, SvmModel,
};
use olr_core::challenge::{evaluate_submission, write_score_file};
use olr_core::corpus::{read_wav, synth_corpus, CorpusManifest, LanguageCode, SegmentRecord, Split};
use olr_core::features::{
    append_deltas, quantize_to_dump_precision, read_feature_dump, write_feature_dump,
    FeatureMatrix, MfccExtractor,
};
use olr_core::metrics::{write_det_points, MetricReport};
use olr_core::tvspace::{train_tv, write_ivectors, IVector, TVModel};
use olr_core::ubm::{accumulate_stats, train_ubm, SufficientStats};
use olr_core::{Error, Result};

use crate::config::RunConfig;

/// One scoring system of the baseline comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scorer {
    Cosine,
    Svm(KernelKind),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    Raw,
    Lda,
}

#[derive(Clone, Debug)]
pub struct SystemSpec {
    pub id: &'static str,
    pub label: &'static str,
    pub projection: Projection,
    pub scorer: Scorer,
}

/// The baseline comparison grid, in report order.
pub const BASELINE_SYSTEMS: [SystemSpec; 8] = [
    SystemSpec { id: "ivector", label: "i-vector", projection: Projection::Raw, scorer: Scorer::Cosine },
    SystemSpec { id: "lvector", label: "L-vector", projection: Projection::Lda, scorer: Scorer::Cosine },
    SystemSpec { id: "ivector_svm_linear", label: "i-vector-SVM (Linear)", projection: Projection::Raw, scorer: Scorer::Svm(KernelKind::Linear) },
    SystemSpec { id: "ivector_svm_poly", label: "i-vector-SVM (Poly)", projection: Projection::Raw, scorer: Scorer::Svm(KernelKind::Poly) },
    SystemSpec { id: "ivector_svm_rbf", label: "i-vector-SVM (RBF)", projection: Projection::Raw, scorer: Scorer::Svm(KernelKind::Rbf) },
    SystemSpec { id: "lvector_svm_linear", label: "L-vector-SVM (Linear)", projection: Projection::Lda, scorer: Scorer::Svm(KernelKind::Linear) },
    SystemSpec { id: "lvector_svm_poly", label: "L-vector-SVM (Poly)", projection: Projection::Lda, scorer: Scorer::Svm(KernelKind::Poly) },
    SystemSpec { id: "lvector_svm_rbf", label: "L-vector-SVM (RBF)", projection: Projection::Lda, scorer: Scorer::Svm(KernelKind::Rbf) },
];

/// The system selected by the run configuration.
pub fn configured_system(config: &RunConfig) -> Result<SystemSpec> {
    let projection = match config.backend.projection.as_str() {
        "raw" => Projection::Raw,
        _ => Projection::Lda,
    };
    let scorer = match config.backend.scoring.as_str() {
        "cosine" => Scorer::Cosine,
        _ => Scorer::Svm(config.svm_kernel()?),
    };
    BASELINE_SYSTEMS
        .iter()
        .find(|s| s.projection == projection && s.scorer == scorer)
        .cloned()
        .ok_or_else(|| Error::Config("unsupported backend combination".to_string()))
}

pub fn run_synth(config: &RunConfig) -> Result<CorpusManifest> {
    let spec = config.synth_spec();
    log::info!(
        "synthesizing corpus under {} ({} languages, {}+{} speakers, {} utts)",
        config.paths.corpus_dir.display(),
        spec.n_languages,
        spec.speakers_per_language_train,
        spec.speakers_per_language_test,
        spec.utts_per_speaker
    );
    synth_corpus(&spec, &config.paths.corpus_dir)
}

fn manifest_path(config: &RunConfig) -> PathBuf {
    config.paths.corpus_dir.join("manifest.txt")
}

pub fn load_manifest(config: &RunConfig) -> Result<CorpusManifest> {
    CorpusManifest::load(&manifest_path(config))
}

/// Features for the given records, through the on-disk cache. Values are
/// always quantized to the dump precision, so cached and fresh runs see
/// bit-identical features.
fn compute_features(
    config: &RunConfig,
    records: &[&SegmentRecord],
) -> Result<Vec<FeatureMatrix>> {
    let extractor = MfccExtractor::new(config.feature_config()?)?;
    let cache_dir = config.paths.work_dir.join("features");
    std::fs::create_dir_all(&cache_dir).map_err(|e| Error::io(&cache_dir, e))?;
    records
        .par_iter()
        .map(|rec| {
            let cache = cache_dir.join(format!("{}.feat", rec.segment_id));
            if cache.is_file() {
                return read_feature_dump(&cache);
            }
            let wave = read_wav(&config.paths.corpus_dir.join(&rec.audio_path))?;
            let base = extractor.extract(&wave)?;
            let mut full = append_deltas(&base, extractor.config().delta_window);
            quantize_to_dump_precision(&mut full);
            write_feature_dump(&cache, &full)?;
            Ok(full)
        })
        .collect()
}

/// Everything `train` produces, reloadable for scoring.
pub struct TrainedModels {
    pub tv: TVModel,
    pub lda: LdaTransform,
    pub means_raw: LanguageMeans,
    pub means_lda: LanguageMeans,
    /// SVMs per (projection, kernel), in BASELINE_SYSTEMS order.
    pub svms: Vec<(Projection, KernelKind, SvmModel)>,
}

fn svm_file_name(projection: Projection, kernel: KernelKind) -> String {
    let proj = match projection {
        Projection::Raw => "raw",
        Projection::Lda => "lda",
    };
    let kern = match kernel {
        KernelKind::Linear => "linear",
        KernelKind::Poly => "poly",
        KernelKind::Rbf => "rbf",
    };
    format!("svm_{proj}_{kern}.json")
}

pub fn run_train(config: &RunConfig) -> Result<()> {
    let manifest = load_manifest(config)?;
    let work = &config.paths.work_dir;
    std::fs::create_dir_all(work).map_err(|e| Error::io(work, e))?;
    let mut artifacts: Vec<String> = Vec::new();

    let train_records: Vec<&SegmentRecord> = manifest.split_records(Split::Train).collect();
    if train_records.is_empty() {
        return Err(Error::InsufficientData("manifest has no training segments".to_string()));
    }
    let labels: Vec<LanguageCode> = train_records.iter().map(|r| r.language).collect();

    log::info!("extracting features for {} training segments", train_records.len());
    let features = compute_features(config, &train_records)?;
    artifacts.push("features/".to_string());

    log::info!("training UBM ({} components)", config.ubm.n_components);
    let ubm_result = train_ubm(&features, &config.em_config())?;
    let ubm = ubm_result.model;
    ubm.save(&work.join("ubm.json"))?;
    artifacts.push("ubm.json".to_string());
    let loglik_text: String = ubm_result
        .log_likelihoods
        .iter()
        .map(|ll| format!("{ll}\n"))
        .collect();
    std::fs::write(work.join("ubm_loglik.txt"), loglik_text)
        .map_err(|e| Error::io(work.join("ubm_loglik.txt"), e))?;
    artifacts.push("ubm_loglik.txt".to_string());

    log::info!("accumulating Baum-Welch statistics");
    let stats: Vec<SufficientStats> = features
        .par_iter()
        .map(|f| accumulate_stats(&ubm, f))
        .collect::<Result<Vec<_>>>()?;

    log::info!("training total-variability matrix (dim {})", config.tv.dim);
    let tv_result = train_tv(&stats, &ubm, config.tv.dim, config.tv.n_iterations, config.tv_seed())?;
    let tv = tv_result.model;
    tv.save(&work.join("tv.json"))?;
    artifacts.push("tv.json".to_string());
    let objective_text: String = tv_result.objective.iter().map(|o| format!("{o}\n")).collect();
    std::fs::write(work.join("tv_objective.txt"), objective_text)
        .map_err(|e| Error::io(work.join("tv_objective.txt"), e))?;
    artifacts.push("tv_objective.txt".to_string());

    log::info!("extracting {} training i-vectors", stats.len());
    let raw_vectors: Vec<Vec<f64>> =
        stats.par_iter().map(|s| tv.extract(s)).collect::<Result<Vec<_>>>()?;
    let ivector_rows: Vec<IVector> = train_records
        .iter()
        .zip(&raw_vectors)
        .map(|(rec, w)| IVector {
            segment_id: rec.segment_id.clone(),
            w: w.clone(),
        })
        .collect();
    write_ivectors(&work.join("ivectors_train.txt"), &ivector_rows)?;
    artifacts.push("ivectors_train.txt".to_string());

    log::info!("fitting LDA (output dim {})", config.backend.lda_dim);
    let lda = fit_lda(&raw_vectors, &labels, config.backend.lda_dim)?;
    lda.save(&work.join("lda.json"))?;
    artifacts.push("lda.json".to_string());

    let lda_vectors: Vec<Vec<f64>> = raw_vectors
        .iter()
        .map(|v| lda.project(v))
        .collect::<Result<Vec<_>>>()?;

    let means_raw = compute_language_means(&raw_vectors, &labels)?;
    means_raw.save(&work.join("means_raw.json"))?;
    artifacts.push("means_raw.json".to_string());
    let means_lda = compute_language_means(&lda_vectors, &labels)?;
    means_lda.save(&work.join("means_lda.json"))?;
    artifacts.push("means_lda.json".to_string());

    for projection in [Projection::Raw, Projection::Lda] {
        let data = match projection {
            Projection::Raw => &raw_vectors,
            Projection::Lda => &lda_vectors,
        };
        for kernel in [KernelKind::Linear, KernelKind::Poly, KernelKind::Rbf] {
            let file = svm_file_name(projection, kernel);
            log::info!("training {file}");
            let model = train_svm_ovr(data, &labels, &config.svm_train_config(kernel))?;
            model.save(&work.join(&file))?;
            artifacts.push(file);
        }
    }

    let listing: String = artifacts.iter().map(|a| format!("{a}\n")).collect();
    std::fs::write(work.join("artifacts.txt"), listing)
        .map_err(|e| Error::io(work.join("artifacts.txt"), e))?;
    Ok(())
}

pub fn load_models(config: &RunConfig) -> Result<TrainedModels> {
    let work = &config.paths.work_dir;
    let tv = TVModel::load(&work.join("tv.json"))?;
    let lda = LdaTransform::load(&work.join("lda.json"))?;
    let means_raw = LanguageMeans::load(&work.join("means_raw.json"))?;
    let means_lda = LanguageMeans::load(&work.join("means_lda.json"))?;
    let mut svms = Vec::new();
    for projection in [Projection::Raw, Projection::Lda] {
        for kernel in [KernelKind::Linear, KernelKind::Poly, KernelKind::Rbf] {
            let model = SvmModel::load(&work.join(svm_file_name(projection, kernel)))?;
            svms.push((projection, kernel, model));
        }
    }
    Ok(TrainedModels {
        tv,
        lda,
        means_raw,
        means_lda,
        svms,
    })
}

impl TrainedModels {
    fn svm(&self, projection: Projection, kernel: KernelKind) -> Result<&SvmModel> {
        self.svms
            .iter()
            .find(|(p, k, _)| *p == projection && *k == kernel)
            .map(|(_, _, m)| m)
            .ok_or_else(|| Error::Config("SVM model not trained".to_string()))
    }

    /// Calibrated score vector of one segment for one system.
    fn score_segment(&self, system: &SystemSpec, raw_ivector: &[f64]) -> Result<ScoreVector> {
        let projected;
        let vector: &[f64] = match system.projection {
            Projection::Raw => raw_ivector,
            Projection::Lda => {
                projected = self.lda.project(raw_ivector)?;
                &projected
            }
        };
        let raw = match system.scorer {
            Scorer::Cosine => {
                let means = match system.projection {
                    Projection::Raw => &self.means_raw,
                    Projection::Lda => &self.means_lda,
                };
                cosine_scores(means, vector)?
            }
            Scorer::Svm(kernel) => svm_scores(self.svm(system.projection, kernel)?, vector)?,
        };
        Ok(calibrate_scores(&raw))
    }

    fn scoring_languages(&self, system: &SystemSpec) -> Result<&[LanguageCode]> {
        Ok(match system.scorer {
            Scorer::Cosine => match system.projection {
                Projection::Raw => self.means_raw.languages(),
                Projection::Lda => self.means_lda.languages(),
            },
            Scorer::Svm(kernel) => self.svm(system.projection, kernel)?.languages(),
        })
    }
}

/// Test-split i-vectors, in manifest order.
fn test_ivectors(
    config: &RunConfig,
    manifest: &CorpusManifest,
    models: &TrainedModels,
) -> Result<Vec<IVector>> {
    let test_records: Vec<&SegmentRecord> = manifest.split_records(Split::Test).collect();
    if test_records.is_empty() {
        return Err(Error::InsufficientData("manifest has no test segments".to_string()));
    }
    let features = compute_features(config, &test_records)?;
    let vectors: Vec<Vec<f64>> = features
        .par_iter()
        .map(|f| {
            let stats = accumulate_stats(models.tv.ubm(), f)?;
            models.tv.extract(&stats)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(test_records
        .iter()
        .zip(vectors)
        .map(|(rec, w)| IVector {
            segment_id: rec.segment_id.clone(),
            w,
        })
        .collect())
}

/// Scores one system over the test split and writes the score file.
fn score_system(
    manifest: &CorpusManifest,
    models: &TrainedModels,
    ivectors: &[IVector],
    system: &SystemSpec,
    out_path: &Path,
) -> Result<()> {
    let languages = models.scoring_languages(system)?;
    if languages != manifest.languages() {
        return Err(Error::Config(format!(
            "trained languages {languages:?} do not cover the manifest languages"
        )));
    }
    let test_records: Vec<&SegmentRecord> = manifest.split_records(Split::Test).collect();
    let trials = test_records
        .iter()
        .zip(ivectors)
        .map(|(rec, iv)| {
            debug_assert_eq!(rec.segment_id, iv.segment_id);
            Ok(olr_core::metrics::Trial {
                segment_id: rec.segment_id.clone(),
                truth: rec.language,
                scores: models.score_segment(system, &iv.w)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let table = olr_core::metrics::TrialScores::new(manifest.languages().to_vec(), trials)?;
    write_score_file(&table, out_path)
}

/// Scores the configured system; returns the score-file path.
pub fn run_score(config: &RunConfig) -> Result<PathBuf> {
    let manifest = load_manifest(config)?;
    let models = load_models(config)?;
    let system = configured_system(config)?;
    let ivectors = test_ivectors(config, &manifest, &models)?;
    write_ivectors(&config.paths.work_dir.join("ivectors_test.txt"), &ivectors)?;
    let out = config.paths.work_dir.join("scores.txt");
    log::info!("scoring system {} -> {}", system.label, out.display());
    score_system(&manifest, &models, &ivectors, &system, &out)?;
    Ok(out)
}

/// Evaluates a score file (default: the one `score` writes) and emits
/// report.txt / report.kv / det.txt under the work dir.
pub fn run_evaluate(config: &RunConfig, scores: Option<&Path>) -> Result<MetricReport> {
    let manifest = load_manifest(config)?;
    let default_path = config.paths.work_dir.join("scores.txt");
    let score_path = scores.unwrap_or(&default_path);
    let report = evaluate_submission(score_path, &manifest, &config.metric_config())?;

    let work = &config.paths.work_dir;
    std::fs::create_dir_all(work).map_err(|e| Error::io(work, e))?;
    let system = configured_system(config)?;
    let mut human = String::new();
    human.push_str(&MetricReport::table_header());
    human.push('\n');
    human.push_str(&report.table_row(system.label));
    human.push('\n');
    std::fs::write(work.join("report.txt"), &human)
        .map_err(|e| Error::io(work.join("report.txt"), e))?;
    std::fs::write(work.join("report.kv"), report.key_values())
        .map_err(|e| Error::io(work.join("report.kv"), e))?;
    write_det_points(&work.join("det.txt"), &report.det)?;
    Ok(report)
}

/// Full pipeline: synth (when the corpus is missing), train, then score
/// and evaluate every baseline system. Returns the comparison table.
pub fn run_baseline(config: &RunConfig) -> Result<String> {
    if !manifest_path(config).is_file() {
        run_synth(config)?;
    }
    run_train(config)?;

    let manifest = load_manifest(config)?;
    let models = load_models(config)?;
    let ivectors = test_ivectors(config, &manifest, &models)?;
    write_ivectors(&config.paths.work_dir.join("ivectors_test.txt"), &ivectors)?;

    let work = &config.paths.work_dir;
    let mut table = String::new();
    table.push_str(&MetricReport::table_header());
    table.push('\n');
    for system in &BASELINE_SYSTEMS {
        let score_path = work.join(format!("scores_{}.txt", system.id));
        score_system(&manifest, &models, &ivectors, system, &score_path)?;
        let report = evaluate_submission(&score_path, &manifest, &config.metric_config())?;
        write_det_points(&work.join(format!("det_{}.txt", system.id)), &report.det)?;
        std::fs::write(
            work.join(format!("report_{}.kv", system.id)),
            report.key_values(),
        )
        .map_err(|e| Error::io(work.join(format!("report_{}.kv", system.id)), e))?;
        table.push_str(&report.table_row(system.label));
        table.push('\n');
    }
    std::fs::write(work.join("baseline_report.txt"), &table)
        .map_err(|e| Error::io(work.join("baseline_report.txt"), e))?;
    Ok(table)
}
