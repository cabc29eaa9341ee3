//! Validates that the synthetic generator produces genuinely separable
//! language classes before any pipeline stage is involved: a brute-force
//! nearest-spectral-template classifier must identify the test split
//! almost perfectly at the default separation.

use olr_core::corpus::{read_wav, synth_corpus, LanguageCode, Split, SynthSpec};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

const FFT_SIZE: usize = 512;
const HOP: usize = 256;

/// Mean log power spectrum over the utterance.
fn log_spectrum(samples: &[i16]) -> Vec<f64> {
    let fft = FftPlanner::new().plan_fft_forward(FFT_SIZE);
    let n_bins = FFT_SIZE / 2 + 1;
    let mut acc = vec![0.0f64; n_bins];
    let mut frames = 0usize;
    let mut buf = vec![Complex::new(0.0, 0.0); FFT_SIZE];
    let mut start = 0;
    while start + FFT_SIZE <= samples.len() {
        for (slot, &s) in buf.iter_mut().zip(&samples[start..start + FFT_SIZE]) {
            *slot = Complex::new(s as f64, 0.0);
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(buf.iter()) {
            *a += c.norm_sqr();
        }
        frames += 1;
        start += HOP;
    }
    acc.iter().map(|&p| (p / frames as f64 + 1.0).ln()).collect()
}

#[test]
fn template_classifier_separates_default_synthetic_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec::default(); // 7 languages, 8+3 speakers, 10 utts, 2 s, seed 42
    let manifest = synth_corpus(&spec, dir.path()).unwrap();

    // Desk-scale profile: 7 languages x 11 speakers x 10 utterances.
    assert_eq!(manifest.records().len(), 770);
    assert!(manifest.is_full_challenge());

    let spectrum_of = |rec: &olr_core::corpus::SegmentRecord| {
        let wave = read_wav(&dir.path().join(&rec.audio_path)).unwrap();
        log_spectrum(&wave.samples)
    };

    // Language templates from the training split.
    let n_bins = FFT_SIZE / 2 + 1;
    let mut templates = vec![vec![0.0f64; n_bins]; 7];
    let mut counts = vec![0usize; 7];
    for rec in manifest.split_records(Split::Train) {
        let spec = spectrum_of(rec);
        let li = rec.language.index();
        for (t, s) in templates[li].iter_mut().zip(&spec) {
            *t += s;
        }
        counts[li] += 1;
    }
    for (template, &count) in templates.iter_mut().zip(&counts) {
        assert!(count > 0);
        for t in template.iter_mut() {
            *t /= count as f64;
        }
    }

    // Nearest template on the test split.
    let mut correct = 0usize;
    let mut total = 0usize;
    for rec in manifest.split_records(Split::Test) {
        let spec = spectrum_of(rec);
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for (li, template) in templates.iter().enumerate() {
            let dist: f64 = template
                .iter()
                .zip(&spec)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if dist < best_dist {
                best_dist = dist;
                best = li;
            }
        }
        if LanguageCode::ALL[best] == rec.language {
            correct += 1;
        }
        total += 1;
    }
    let idr = correct as f64 / total as f64;
    assert_eq!(total, 7 * 3 * 10);
    assert!(idr > 0.95, "template classifier IDR {idr} at default separation");
}
