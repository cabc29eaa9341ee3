//! Synthetic multilingual corpus generator.
//!
//! Each language is a bank of resonant filters ("formants") at distinct
//! center frequencies; speakers perturb the bank with a small fixed
//! offset, and utterances are white-noise excitation run through the
//! bank. The audio is meaningless as speech but gives every pipeline
//! stage realistically structured input with controllable class
//! separation.
//!
//! Generation is deterministic: every speaker and every utterance gets
//! its own counter-derived RNG stream, so output bytes do not depend on
//! scheduling or worker count.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::wav::{write_wav, Waveform, PIPELINE_SAMPLE_RATE};
use super::{CorpusManifest, LanguageCode, SegmentRecord, Session, Split};
use crate::error::{Error, Result};

/// Parameters of a generated corpus.
#[derive(Clone, Debug)]
pub struct SynthSpec {
    pub n_languages: usize,
    pub speakers_per_language_train: usize,
    pub speakers_per_language_test: usize,
    pub utts_per_speaker: usize,
    pub utt_seconds: f64,
    /// Scales the spectral distance between languages. 1.0 gives well
    /// separated classes; smaller values make the task harder.
    pub language_separation: f64,
    /// Fraction of each speaker's utterances recorded in the noisy session.
    pub noisy_fraction: f64,
    /// SNR of the additive white noise in noisy-session utterances.
    pub noisy_snr_db: f64,
    pub rng_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_languages: 7,
            speakers_per_language_train: 8,
            speakers_per_language_test: 3,
            utts_per_speaker: 10,
            utt_seconds: 2.0,
            language_separation: 1.0,
            noisy_fraction: 0.3,
            noisy_snr_db: 10.0,
            rng_seed: 42,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_languages < 1 || self.n_languages > LanguageCode::ALL.len() {
            return Err(Error::Config(format!(
                "n_languages must be 1..={}, got {}",
                LanguageCode::ALL.len(),
                self.n_languages
            )));
        }
        if self.speakers_per_language_train < 1 || self.speakers_per_language_test < 1 {
            return Err(Error::Config(
                "speakers per language must be >= 1 in both splits".to_string(),
            ));
        }
        if self.utts_per_speaker < 1 {
            return Err(Error::Config("utts_per_speaker must be >= 1".to_string()));
        }
        if !(self.utt_seconds > 0.0) {
            return Err(Error::Config(format!(
                "utt_seconds must be > 0, got {}",
                self.utt_seconds
            )));
        }
        if !(self.language_separation > 0.0) {
            return Err(Error::Config(format!(
                "language_separation must be > 0, got {}",
                self.language_separation
            )));
        }
        if !(0.0..=1.0).contains(&self.noisy_fraction) {
            return Err(Error::Config(format!(
                "noisy_fraction must be in [0,1], got {}",
                self.noisy_fraction
            )));
        }
        if !self.noisy_snr_db.is_finite() {
            return Err(Error::Config("noisy_snr_db must be finite".to_string()));
        }
        Ok(())
    }

    fn n_samples(&self) -> usize {
        (self.utt_seconds * PIPELINE_SAMPLE_RATE as f64).round() as usize
    }

    fn noisy_utts(&self) -> usize {
        (self.utts_per_speaker as f64 * self.noisy_fraction).round() as usize
    }
}

/// (center Hz, bandwidth Hz) of the language-neutral formant grid.
const BASE_FORMANTS: [(f64, f64); 3] = [(500.0, 80.0), (1500.0, 120.0), (2500.0, 160.0)];
/// Per-step relative formant shift between adjacent languages at separation 1.
const LANGUAGE_STEP: f64 = 0.08;
/// Relative formant jitter applied per speaker.
const SPEAKER_JITTER: f64 = 0.015;
/// Output RMS before 16-bit quantization.
const TARGET_RMS: f64 = 3000.0;

// RNG stream tags; each (tag, lang, speaker, utt) tuple is its own stream.
const STREAM_SPEAKER: u8 = 1;
const STREAM_UTTERANCE: u8 = 2;

fn stream_rng(seed: u64, tag: u8, lang: u32, speaker: u32, utt: u32) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8] = tag;
    key[9..13].copy_from_slice(&lang.to_le_bytes());
    key[13..17].copy_from_slice(&speaker.to_le_bytes());
    key[17..21].copy_from_slice(&utt.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Formant bank of one speaker: language scaling plus speaker jitter.
fn speaker_formants(spec: &SynthSpec, lang_idx: usize, speaker_idx: usize) -> [(f64, f64); 3] {
    let lang_scale = 1.0 + LANGUAGE_STEP * spec.language_separation * lang_idx as f64;
    let mut rng = stream_rng(spec.rng_seed, STREAM_SPEAKER, lang_idx as u32, speaker_idx as u32, 0);
    let mut bank = [(0.0, 0.0); 3];
    for (slot, &(center, bandwidth)) in bank.iter_mut().zip(BASE_FORMANTS.iter()) {
        let jitter = 1.0 + SPEAKER_JITTER * rng.random_range(-1.0..=1.0);
        let f = (center * lang_scale * jitter).clamp(60.0, 7400.0);
        *slot = (f, bandwidth);
    }
    bank
}

/// Two-pole resonator applied to `input`, output added into `acc`.
fn resonate(input: &[f64], acc: &mut [f64], center_hz: f64, bandwidth_hz: f64) {
    let fs = PIPELINE_SAMPLE_RATE as f64;
    let r = (-std::f64::consts::PI * bandwidth_hz / fs).exp();
    let theta = 2.0 * std::f64::consts::PI * center_hz / fs;
    let b1 = 2.0 * r * theta.cos();
    let b2 = -r * r;
    let gain = (1.0 - r * r) * theta.sin();
    let (mut y1, mut y2) = (0.0f64, 0.0f64);
    for (x, a) in input.iter().zip(acc.iter_mut()) {
        let y = gain * x + b1 * y1 + b2 * y2;
        *a += y;
        y2 = y1;
        y1 = y;
    }
}

fn render_utterance(
    spec: &SynthSpec,
    lang_idx: usize,
    speaker_idx: usize,
    utt_idx: usize,
    session: Session,
) -> Vec<i16> {
    let n = spec.n_samples();
    let mut rng = stream_rng(
        spec.rng_seed,
        STREAM_UTTERANCE,
        lang_idx as u32,
        speaker_idx as u32,
        utt_idx as u32,
    );
    let excitation: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut signal = vec![0.0f64; n];
    for (center, bandwidth) in speaker_formants(spec, lang_idx, speaker_idx) {
        resonate(&excitation, &mut signal, center, bandwidth);
    }

    let rms = (signal.iter().map(|s| s * s).sum::<f64>() / n as f64).sqrt();
    let scale = if rms > 0.0 { TARGET_RMS / rms } else { 0.0 };
    for s in &mut signal {
        *s *= scale;
    }

    if session == Session::Noisy {
        let noise_rms = TARGET_RMS * 10f64.powf(-spec.noisy_snr_db / 20.0);
        for s in &mut signal {
            let e: f64 = rng.sample(StandardNormal);
            *s += noise_rms * e;
        }
    }

    signal
        .iter()
        .map(|&s| s.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16)
        .collect()
}

struct UttTask {
    record: SegmentRecord,
    lang_idx: usize,
    speaker_idx: usize,
    utt_idx: usize,
}

/// Generates the corpus under `out_dir`: WAV files in `out_dir/wav/` and
/// the manifest at `out_dir/manifest.txt`. Returns the manifest.
pub fn synth_corpus(spec: &SynthSpec, out_dir: &Path) -> Result<CorpusManifest> {
    spec.validate()?;
    let wav_dir = out_dir.join("wav");
    std::fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;

    let mut tasks = Vec::new();
    for (lang_idx, &language) in LanguageCode::ALL[..spec.n_languages].iter().enumerate() {
        let n_train = spec.speakers_per_language_train;
        let n_total = n_train + spec.speakers_per_language_test;
        for speaker_idx in 0..n_total {
            let split = if speaker_idx < n_train { Split::Train } else { Split::Test };
            let speaker_id = match split {
                Split::Train => format!("{language}_t{speaker_idx:02}"),
                Split::Test => format!("{language}_e{:02}", speaker_idx - n_train),
            };
            for utt_idx in 0..spec.utts_per_speaker {
                let session = if utt_idx < spec.noisy_utts() { Session::Noisy } else { Session::Quiet };
                let segment_id = format!("{speaker_id}_u{utt_idx:03}");
                tasks.push(UttTask {
                    record: SegmentRecord {
                        audio_path: PathBuf::from(format!("wav/{segment_id}.wav")),
                        segment_id,
                        language,
                        speaker_id: speaker_id.clone(),
                        split,
                        session,
                    },
                    lang_idx,
                    speaker_idx,
                    utt_idx,
                });
            }
        }
    }

    tasks.par_iter().try_for_each(|task| -> Result<()> {
        let samples = render_utterance(spec, task.lang_idx, task.speaker_idx, task.utt_idx, task.record.session);
        let wave = Waveform::new(samples, PIPELINE_SAMPLE_RATE)?;
        write_wav(&out_dir.join(&task.record.audio_path), &wave)
    })?;

    let manifest = CorpusManifest::new(tasks.into_iter().map(|t| t.record).collect())?;
    manifest.write(&out_dir.join("manifest.txt"))?;
    Ok(manifest)
}
