//! Submission format and evaluation harness: the score-file contract,
//! lost-trial semantics, and the composed metric evaluation.
//!
//! A submission is a text file with one line per scored test segment:
//! the segment id followed by one score per language in canonical column
//! order. Test segments absent from the file are lost trials and score
//! negative infinity everywhere. Scoring backends see one segment at a
//! time; nothing in this interface exposes cross-segment statistics or
//! speaker identities.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::Path;

use crate::backend::ScoreVector;
use crate::corpus::{CorpusManifest, Split};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricConfig, MetricReport, Trial, TrialScores};

/// Writes the score file: a `#languages:` header comment asserting the
/// column order, then one line per trial with six-decimal scores.
pub fn write_score_file(trials: &TrialScores, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    write!(out, "#languages:").unwrap();
    for lang in trials.languages() {
        write!(out, " {lang}").unwrap();
    }
    writeln!(out).unwrap();
    for trial in trials.trials() {
        write!(out, "{}", trial.segment_id).unwrap();
        for &score in trial.scores.scores() {
            write!(out, " {score:.6}").unwrap();
        }
        writeln!(out).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Parses a submission against the manifest's test split.
///
/// Segments present in the manifest but absent from the file become
/// all -inf lost trials; unknown ids, duplicate lines, malformed numbers
/// and wrong column counts are errors with line numbers.
pub fn parse_score_file(path: &Path, manifest: &CorpusManifest) -> Result<TrialScores> {
    let languages = manifest.languages().to_vec();
    let n_lang = languages.len();
    let test_records: Vec<_> = manifest.split_records(Split::Test).collect();
    if test_records.is_empty() {
        return Err(Error::InsufficientData(
            "manifest has no test segments".to_string(),
        ));
    }
    let mut expected: HashMap<&str, usize> = HashMap::new();
    for (i, rec) in test_records.iter().enumerate() {
        expected.insert(rec.segment_id.as_str(), i);
    }

    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err_at = |line: usize, msg: String| Error::ScoreFile {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut parsed: Vec<Option<ScoreVector>> = vec![None; test_records.len()];
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("#languages:") {
            let declared: Vec<&str> = rest.split_whitespace().collect();
            let ours: Vec<&str> = languages.iter().map(|l| l.as_str()).collect();
            if declared != ours {
                return Err(err_at(
                    lineno,
                    format!("language header {declared:?} does not match manifest {ours:?}"),
                ));
            }
            continue;
        }
        if trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 1 + n_lang {
            return Err(err_at(
                lineno,
                format!("expected segment id plus {n_lang} scores, got {} fields", fields.len()),
            ));
        }
        let idx = *expected.get(fields[0]).ok_or_else(|| {
            err_at(lineno, format!("unknown test segment {:?}", fields[0]))
        })?;
        if parsed[idx].is_some() {
            return Err(err_at(
                lineno,
                format!("duplicate line for segment {:?}", fields[0]),
            ));
        }
        let scores = fields[1..]
            .iter()
            .map(|f| {
                let v: f64 = f
                    .parse()
                    .map_err(|_| err_at(lineno, format!("malformed score {f:?}")))?;
                if v.is_nan() || v == f64::INFINITY {
                    return Err(err_at(
                        lineno,
                        format!("score {f:?} must be finite or -inf"),
                    ));
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>>>()?;
        parsed[idx] = Some(ScoreVector::new(scores)?);
    }

    let trials = test_records
        .iter()
        .zip(parsed)
        .map(|(rec, scores)| Trial {
            segment_id: rec.segment_id.clone(),
            truth: rec.language,
            scores: scores.unwrap_or_else(|| ScoreVector::lost(n_lang)),
        })
        .collect();
    TrialScores::new(languages, trials)
}

/// Parses a submission and computes the full metric report.
pub fn evaluate_submission(
    score_path: &Path,
    manifest: &CorpusManifest,
    cfg: &MetricConfig,
) -> Result<MetricReport> {
    let trials = parse_score_file(score_path, manifest)?;
    evaluate(&trials, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LanguageCode, SegmentRecord, Session};
    use std::path::PathBuf;

    const L: [LanguageCode; 7] = LanguageCode::ALL;

    /// Test-split manifest over all 7 languages, `per_lang` segments each,
    /// ids `seg_<n>` numbered across languages in order.
    fn manifest(per_lang: usize) -> CorpusManifest {
        let mut records = Vec::new();
        // One train speaker per language keeps the manifest well-formed.
        for (li, &lang) in L.iter().enumerate() {
            records.push(SegmentRecord {
                segment_id: format!("train_{li}"),
                audio_path: PathBuf::from(format!("wav/train_{li}.wav")),
                language: lang,
                speaker_id: format!("spk_train_{li}"),
                split: Split::Train,
                session: Session::Quiet,
            });
        }
        let mut n = 0;
        for &lang in &L {
            for _ in 0..per_lang {
                n += 1;
                records.push(SegmentRecord {
                    segment_id: format!("seg_{n}"),
                    audio_path: PathBuf::from(format!("wav/seg_{n}.wav")),
                    language: lang,
                    speaker_id: format!("spk_test_{lang}"),
                    split: Split::Test,
                    session: Session::Quiet,
                });
            }
        }
        CorpusManifest::new(records).unwrap()
    }

    fn write_lines(dir: &tempfile::TempDir, lines: &[&str]) -> PathBuf {
        let path = dir.path().join("scores.txt");
        std::fs::write(&path, lines.join("\n") + "\n").unwrap();
        path
    }

    #[test]
    fn example_block_parses_to_documented_values() {
        let manifest = manifest(1);
        let dir = tempfile::tempdir().unwrap();
        let path = write_lines(
            &dir,
            &[
                "seg_1 0.5 -0.2 -0.3 0.1 -9.2 -0.1 -5.1",
                "seg_2 -0.1 -0.3 0.5 0.3 -0.5 -0.9 -3.2",
            ],
        );
        let trials = parse_score_file(&path, &manifest).unwrap();
        assert_eq!(trials.len(), 7);
        let seg1 = &trials.trials()[0];
        assert_eq!(seg1.segment_id, "seg_1");
        assert_eq!(
            seg1.scores.scores(),
            &[0.5, -0.2, -0.3, 0.1, -9.2, -0.1, -5.1]
        );
        let seg2 = &trials.trials()[1];
        assert_eq!(
            seg2.scores.scores(),
            &[-0.1, -0.3, 0.5, 0.3, -0.5, -0.9, -3.2]
        );
        // Unscored segments are lost.
        for trial in &trials.trials()[2..] {
            assert!(trial.scores.is_lost(), "{} should be lost", trial.segment_id);
        }
    }

    #[test]
    fn write_emits_fixed_decimal_lines() {
        let manifest = manifest(1);
        let dir = tempfile::tempdir().unwrap();
        let path = write_lines(&dir, &["seg_1 0.5 -0.2 -0.3 0.1 -9.2 -0.1 -5.1"]);
        let trials = parse_score_file(&path, &manifest).unwrap();
        let out = dir.path().join("rewritten.txt");
        write_score_file(&trials, &out).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        let first_data = text.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(
            first_data,
            "seg_1 0.500000 -0.200000 -0.300000 0.100000 -9.200000 -0.100000 -5.100000"
        );
        assert!(text.contains("#languages: ct-cn zh-cn id-id ja-jp ru-ru ko-kr vi-vn"));
        // Lost segments round-trip through the -inf literal.
        assert!(text.contains("seg_2 -inf -inf -inf -inf -inf -inf -inf"));
    }

    #[test]
    fn round_trip_preserves_scores_to_file_precision() {
        let manifest = manifest(2);
        let dir = tempfile::tempdir().unwrap();
        let path = write_lines(
            &dir,
            &[
                "seg_1 0.1234564 -0.0000011 3.5 -2.25 0.0 1.0 -1.0",
                "seg_5 -inf 0.25 0.125 -0.5 0.75 -0.125 2.5",
            ],
        );
        let original = parse_score_file(&path, &manifest).unwrap();
        let rewritten = dir.path().join("out.txt");
        write_score_file(&original, &rewritten).unwrap();
        let back = parse_score_file(&rewritten, &manifest).unwrap();
        for (a, b) in original.trials().iter().zip(back.trials()) {
            assert_eq!(a.segment_id, b.segment_id);
            for (x, y) in a.scores.scores().iter().zip(b.scores.scores()) {
                if *x == f64::NEG_INFINITY {
                    assert_eq!(*y, f64::NEG_INFINITY);
                } else {
                    assert!((x - y).abs() <= 5e-7, "{x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn empty_trials_write_no_data_lines() {
        let manifest = manifest(1);
        let dir = tempfile::tempdir().unwrap();
        let path = write_lines(&dir, &["seg_1 1.0 0.0 0.0 0.0 0.0 0.0 0.0"]);
        let trials = parse_score_file(&path, &manifest).unwrap();
        let empty = TrialScores::new(trials.languages().to_vec(), vec![]).unwrap();
        let out = dir.path().join("empty.txt");
        write_score_file(&empty, &out).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.lines().all(|l| l.starts_with('#')));
    }

    #[test]
    fn wrong_column_count_reports_line() {
        let manifest = manifest(1);
        let dir = tempfile::tempdir().unwrap();
        let path = write_lines(
            &dir,
            &[
                "seg_1 0.5 -0.2 -0.3 0.1 -9.2 -0.1 -5.1",
                "seg_2 0.1 0.2 0.3 0.4 0.5 0.6",
            ],
        );
        let err = parse_score_file(&path, &manifest).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":2:"), "{msg}");
        assert!(msg.contains("7 scores"), "{msg}");
    }

    #[test]
    fn unknown_segment_rejected() {
        let manifest = manifest(1);
        let dir = tempfile::tempdir().unwrap();
        let path = write_lines(&dir, &["nosuch 0.1 0.2 0.3 0.4 0.5 0.6 0.7"]);
        let err = parse_score_file(&path, &manifest).unwrap_err();
        assert!(err.to_string().contains("unknown test segment"), "{err}");
    }

    #[test]
    fn duplicate_segment_line_rejected() {
        let manifest = manifest(1);
        let dir = tempfile::tempdir().unwrap();
        let line = "seg_1 0.1 0.2 0.3 0.4 0.5 0.6 0.7";
        let path = write_lines(&dir, &[line, line]);
        let err = parse_score_file(&path, &manifest).unwrap_err();
        assert!(err.to_string().contains("duplicate line"), "{err}");
    }

    #[test]
    fn malformed_number_reports_line() {
        let manifest = manifest(1);
        let dir = tempfile::tempdir().unwrap();
        let path = write_lines(&dir, &["seg_1 0.1 0.2 oops 0.4 0.5 0.6 0.7"]);
        let err = parse_score_file(&path, &manifest).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("malformed score"), "{msg}");
        assert!(msg.contains("\"oops\""), "{msg}");
    }

    #[test]
    fn mismatched_language_header_rejected() {
        let manifest = manifest(1);
        let dir = tempfile::tempdir().unwrap();
        let path = write_lines(
            &dir,
            &["#languages: zh-cn ct-cn id-id ja-jp ru-ru ko-kr vi-vn"],
        );
        let err = parse_score_file(&path, &manifest).unwrap_err();
        assert!(err.to_string().contains("language header"), "{err}");
    }

    fn oracle_submission(manifest: &CorpusManifest, dir: &tempfile::TempDir) -> PathBuf {
        let path = dir.path().join("oracle.txt");
        let mut lines = Vec::new();
        for rec in manifest.split_records(Split::Test) {
            let scores: Vec<String> = manifest
                .languages()
                .iter()
                .map(|&l| if l == rec.language { "1.0".to_string() } else { "-1.0".to_string() })
                .collect();
            lines.push(format!("{} {}", rec.segment_id, scores.join(" ")));
        }
        std::fs::write(&path, lines.join("\n") + "\n").unwrap();
        path
    }

    #[test]
    fn oracle_submission_is_perfect() {
        let manifest = manifest(3);
        let dir = tempfile::tempdir().unwrap();
        let path = oracle_submission(&manifest, &dir);
        let report = evaluate_submission(&path, &manifest, &MetricConfig::default()).unwrap();
        assert_eq!(report.cavg, 0.0);
        assert_eq!(report.eer, 0.0);
        assert_eq!(report.idr, 1.0);
        assert_eq!(report.lost_trials, 0);
    }

    #[test]
    fn empty_submission_costs_exactly_half() {
        let manifest = manifest(3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.txt");
        std::fs::write(&path, "").unwrap();
        let report = evaluate_submission(&path, &manifest, &MetricConfig::default()).unwrap();
        assert_eq!(report.cavg, 0.5);
        assert_eq!(report.lost_trials, 21);
        for &m in &report.p_miss {
            assert_eq!(m, 1.0);
        }
    }

    #[test]
    fn random_submission_scores_near_chance() {
        let manifest = manifest(100); // 700 test segments
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("random.txt");
        let mut state = 42u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state as f64 / u64::MAX as f64 * 2.0 - 1.0
        };
        let mut lines = Vec::new();
        for rec in manifest.split_records(Split::Test) {
            let scores: Vec<String> = (0..7).map(|_| format!("{:.6}", next())).collect();
            lines.push(format!("{} {}", rec.segment_id, scores.join(" ")));
        }
        std::fs::write(&path, lines.join("\n") + "\n").unwrap();
        let report = evaluate_submission(&path, &manifest, &MetricConfig::default()).unwrap();
        assert!(
            (0.45..=0.55).contains(&report.cavg),
            "chance-level Cavg {}", report.cavg
        );
    }

    #[test]
    fn losing_a_segment_only_hurts() {
        let manifest = manifest(3);
        let dir = tempfile::tempdir().unwrap();
        let full_path = oracle_submission(&manifest, &dir);
        let full = evaluate_submission(&full_path, &manifest, &MetricConfig::default()).unwrap();

        // Drop the first line.
        let text = std::fs::read_to_string(&full_path).unwrap();
        let reduced: Vec<&str> = text.lines().skip(1).collect();
        let reduced_path = dir.path().join("reduced.txt");
        std::fs::write(&reduced_path, reduced.join("\n") + "\n").unwrap();
        let less = evaluate_submission(&reduced_path, &manifest, &MetricConfig::default()).unwrap();

        assert_eq!(less.lost_trials, 1);
        for (a, b) in full.p_miss.iter().zip(&less.p_miss) {
            assert!(b >= a, "miss rate decreased after losing a trial");
        }
        for (ra, rb) in full.p_fa.iter().zip(&less.p_fa) {
            for (a, b) in ra.iter().zip(rb) {
                assert!(b <= a, "false-alarm rate increased after losing a trial");
            }
        }
    }

    #[test]
    fn evaluation_is_pure() {
        let manifest = manifest(2);
        let dir = tempfile::tempdir().unwrap();
        let path = oracle_submission(&manifest, &dir);
        let a = evaluate_submission(&path, &manifest, &MetricConfig::default()).unwrap();
        let b = evaluate_submission(&path, &manifest, &MetricConfig::default()).unwrap();
        assert_eq!(a.key_values(), b.key_values());
        assert_eq!(a.det.points, b.det.points);
    }
}
