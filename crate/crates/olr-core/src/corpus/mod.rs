//! Dataset manifests, WAV audio and the synthetic multilingual corpus
//! generator.
//!
//! A corpus is a plain-text manifest (one segment per line) plus 16 kHz
//! mono PCM WAV files. The synthetic generator produces a desk-scale
//! corpus with the same structure so the full pipeline can run without
//! any real speech data.

mod synth;
mod wav;

pub use synth::{synth_corpus, SynthSpec};
pub use wav::{read_wav, write_wav, Waveform, PIPELINE_SAMPLE_RATE};

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// The seven target language codes, in canonical score-column order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LanguageCode {
    CtCn,
    ZhCn,
    IdId,
    JaJp,
    RuRu,
    KoKr,
    ViVn,
}

impl LanguageCode {
    pub const ALL: [LanguageCode; 7] = [
        LanguageCode::CtCn,
        LanguageCode::ZhCn,
        LanguageCode::IdId,
        LanguageCode::JaJp,
        LanguageCode::RuRu,
        LanguageCode::KoKr,
        LanguageCode::ViVn,
    ];

    /// Position in the canonical order (0..=6).
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).unwrap()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LanguageCode::CtCn => "ct-cn",
            LanguageCode::ZhCn => "zh-cn",
            LanguageCode::IdId => "id-id",
            LanguageCode::JaJp => "ja-jp",
            LanguageCode::RuRu => "ru-ru",
            LanguageCode::KoKr => "ko-kr",
            LanguageCode::ViVn => "vi-vn",
        }
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LanguageCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownLanguage(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (expected train/test)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Session {
    Quiet,
    Noisy,
}

impl Session {
    pub fn as_str(self) -> &'static str {
        match self {
            Session::Quiet => "quiet",
            Session::Noisy => "noisy",
        }
    }
}

impl FromStr for Session {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "quiet" => Ok(Session::Quiet),
            "noisy" => Ok(Session::Noisy),
            other => Err(format!("unknown session {other:?} (expected quiet/noisy)")),
        }
    }
}

/// One utterance of the corpus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentRecord {
    pub segment_id: String,
    pub audio_path: PathBuf,
    pub language: LanguageCode,
    pub speaker_id: String,
    pub split: Split,
    pub session: Session,
}

/// A validated set of segment records.
///
/// Invariants enforced at construction: segment ids are unique, every
/// speaker appears in exactly one split, and `languages` covers every
/// record (kept in canonical order).
#[derive(Clone, Debug)]
pub struct CorpusManifest {
    records: Vec<SegmentRecord>,
    languages: Vec<LanguageCode>,
}

impl CorpusManifest {
    pub fn new(records: Vec<SegmentRecord>) -> Result<Self> {
        let languages = LanguageCode::ALL
            .iter()
            .copied()
            .filter(|l| records.iter().any(|r| r.language == *l))
            .collect();
        let manifest = CorpusManifest { records, languages };
        manifest.validate()?;
        Ok(manifest)
    }

    fn validate(&self) -> Result<()> {
        let mut seen_ids: HashMap<&str, usize> = HashMap::new();
        let mut speaker_split: HashMap<&str, Split> = HashMap::new();
        for (i, rec) in self.records.iter().enumerate() {
            if rec.segment_id.contains(char::is_whitespace) {
                return Err(Error::Config(format!(
                    "segment id {:?} contains whitespace",
                    rec.segment_id
                )));
            }
            // Ids become cache file names downstream.
            if rec.segment_id.contains(['/', '\\']) {
                return Err(Error::Config(format!(
                    "segment id {:?} contains a path separator",
                    rec.segment_id
                )));
            }
            if let Some(prev) = seen_ids.insert(&rec.segment_id, i) {
                return Err(Error::Config(format!(
                    "duplicate segment id {:?} (records {} and {})",
                    rec.segment_id, prev, i
                )));
            }
            match speaker_split.insert(&rec.speaker_id, rec.split) {
                Some(split) if split != rec.split => {
                    return Err(Error::Config(format!(
                        "speaker {:?} appears in both train and test splits",
                        rec.speaker_id
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn records(&self) -> &[SegmentRecord] {
        &self.records
    }

    /// Languages present, in canonical order.
    pub fn languages(&self) -> &[LanguageCode] {
        &self.languages
    }

    pub fn split_records(&self, split: Split) -> impl Iterator<Item = &SegmentRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    /// True when all seven canonical languages are present.
    pub fn is_full_challenge(&self) -> bool {
        self.languages.len() == LanguageCode::ALL.len()
    }

    /// Reads a whitespace-separated manifest file. `#` lines are comments.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(Error::Manifest {
                    path: path.to_path_buf(),
                    line: lineno,
                    msg: format!("expected 6 fields, got {}", fields.len()),
                });
            }
            let err_at = |msg: String| Error::Manifest {
                path: path.to_path_buf(),
                line: lineno,
                msg,
            };
            records.push(SegmentRecord {
                segment_id: fields[0].to_string(),
                audio_path: PathBuf::from(fields[1]),
                language: fields[2].parse().map_err(|e: Error| err_at(e.to_string()))?,
                speaker_id: fields[3].to_string(),
                split: fields[4].parse().map_err(err_at)?,
                session: fields[5].parse().map_err(err_at)?,
            });
        }
        // Re-check invariants with file positions attached.
        Self::new(records).map_err(|e| match e {
            Error::Config(msg) => Error::Manifest {
                path: path.to_path_buf(),
                line: 0,
                msg,
            },
            other => other,
        })
    }

    /// Writes the manifest with single-space separators.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "# segment_id audio_path language speaker split session").unwrap();
        for rec in &self.records {
            let audio = rec.audio_path.to_string_lossy();
            if audio.contains(char::is_whitespace) {
                return Err(Error::Config(format!(
                    "audio path {audio:?} contains whitespace, not representable in manifest"
                )));
            }
            writeln!(
                out,
                "{} {} {} {} {} {}",
                rec.segment_id,
                audio,
                rec.language,
                rec.speaker_id,
                rec.split.as_str(),
                rec.session.as_str()
            )
            .unwrap();
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, lang: LanguageCode, spk: &str, split: Split) -> SegmentRecord {
        SegmentRecord {
            segment_id: id.to_string(),
            audio_path: PathBuf::from(format!("wav/{id}.wav")),
            language: lang,
            speaker_id: spk.to_string(),
            split,
            session: Session::Quiet,
        }
    }

    #[test]
    fn canonical_order_is_fixed() {
        let codes: Vec<&str> = LanguageCode::ALL.iter().map(|c| c.as_str()).collect();
        assert_eq!(
            codes,
            ["ct-cn", "zh-cn", "id-id", "ja-jp", "ru-ru", "ko-kr", "vi-vn"]
        );
        for (i, code) in LanguageCode::ALL.iter().enumerate() {
            assert_eq!(code.index(), i);
        }
    }

    #[test]
    fn parse_rejects_unknown_code() {
        assert!("xx-yy".parse::<LanguageCode>().is_err());
        assert!("zh-cn".parse::<LanguageCode>().is_ok());
    }

    #[test]
    fn manifest_line_maps_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.txt");
        std::fs::write(&path, "seg001 wav/seg001.wav zh-cn spk03 train quiet\n").unwrap();
        let manifest = CorpusManifest::load(&path).unwrap();
        assert_eq!(manifest.records().len(), 1);
        let rec = &manifest.records()[0];
        assert_eq!(rec.segment_id, "seg001");
        assert_eq!(rec.language, LanguageCode::ZhCn);
        assert_eq!(rec.language.index(), 1);
        assert_eq!(rec.speaker_id, "spk03");
        assert_eq!(rec.split, Split::Train);
        assert_eq!(rec.session, Session::Quiet);
    }

    #[test]
    fn duplicate_segment_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.txt");
        std::fs::write(
            &path,
            "seg001 a.wav zh-cn s1 train quiet\nseg001 b.wav zh-cn s2 train quiet\n",
        )
        .unwrap();
        let err = CorpusManifest::load(&path).unwrap_err();
        assert!(err.to_string().contains("duplicate segment id"), "{err}");
    }

    #[test]
    fn unknown_language_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.txt");
        std::fs::write(
            &path,
            "seg001 a.wav zh-cn s1 train quiet\nseg002 b.wav xx-yy s2 train quiet\n",
        )
        .unwrap();
        let err = CorpusManifest::load(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":2:"), "{msg}");
        assert!(msg.contains("xx-yy"), "{msg}");
    }

    #[test]
    fn speaker_in_both_splits_rejected() {
        let recs = vec![
            record("a", LanguageCode::CtCn, "spk1", Split::Train),
            record("b", LanguageCode::CtCn, "spk1", Split::Test),
        ];
        let err = CorpusManifest::new(recs).unwrap_err();
        assert!(err.to_string().contains("both train and test"), "{err}");
    }

    #[test]
    fn wrong_field_count_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.txt");
        std::fs::write(&path, "seg001 a.wav zh-cn s1 train\n").unwrap();
        let err = CorpusManifest::load(&path).unwrap_err();
        assert!(err.to_string().contains("expected 6 fields"), "{err}");
    }

    #[test]
    fn write_load_round_trip() {
        let recs = vec![
            record("a", LanguageCode::CtCn, "spk1", Split::Train),
            record("b", LanguageCode::ViVn, "spk2", Split::Test),
        ];
        let manifest = CorpusManifest::new(recs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.txt");
        manifest.write(&path).unwrap();
        let loaded = CorpusManifest::load(&path).unwrap();
        assert_eq!(loaded.records(), manifest.records());
        assert_eq!(loaded.languages(), manifest.languages());
    }

    #[test]
    fn languages_follow_canonical_order() {
        let recs = vec![
            record("a", LanguageCode::ViVn, "s1", Split::Train),
            record("b", LanguageCode::CtCn, "s2", Split::Train),
            record("c", LanguageCode::KoKr, "s3", Split::Train),
        ];
        let manifest = CorpusManifest::new(recs).unwrap();
        assert_eq!(
            manifest.languages(),
            [LanguageCode::CtCn, LanguageCode::KoKr, LanguageCode::ViVn]
        );
        assert!(!manifest.is_full_challenge());
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.txt");
        std::fs::write(
            &path,
            "# header\n\nseg001 a.wav zh-cn s1 train quiet\n# trailing\n",
        )
        .unwrap();
        let manifest = CorpusManifest::load(&path).unwrap();
        assert_eq!(manifest.records().len(), 1);
    }
}
