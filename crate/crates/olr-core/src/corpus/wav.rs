//! 16 kHz mono 16-bit PCM WAV reading and writing.

use std::path::Path;

use crate::error::{Error, Result};

pub const PIPELINE_SAMPLE_RATE: u32 = 16_000;

/// Mono 16-bit PCM audio.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Waveform {
    pub samples: Vec<i16>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<i16>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InsufficientData("empty waveform".to_string()));
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Reads a RIFF/WAVE file, enforcing PCM, mono, 16-bit, 16 kHz.
pub fn read_wav(path: &Path) -> Result<Waveform> {
    let reader = hound::WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::AudioFormat {
            path: path.to_path_buf(),
            property: "sample format",
            msg: "expected integer PCM, got float".to_string(),
        });
    }
    if spec.bits_per_sample != 16 {
        return Err(Error::AudioFormat {
            path: path.to_path_buf(),
            property: "bit depth",
            msg: format!("expected 16 bits per sample, got {}", spec.bits_per_sample),
        });
    }
    if spec.channels != 1 {
        return Err(Error::AudioFormat {
            path: path.to_path_buf(),
            property: "channel count",
            msg: format!("expected mono, got {} channels", spec.channels),
        });
    }
    if spec.sample_rate != PIPELINE_SAMPLE_RATE {
        return Err(Error::AudioFormat {
            path: path.to_path_buf(),
            property: "sample rate",
            msg: format!(
                "expected {PIPELINE_SAMPLE_RATE} Hz, got {} Hz",
                spec.sample_rate
            ),
        });
    }
    let samples = reader
        .into_samples::<i16>()
        .collect::<std::result::Result<Vec<i16>, _>>()
        .map_err(|e| map_hound(path, e))?;
    Waveform::new(samples, PIPELINE_SAMPLE_RATE)
}

/// Writes a canonical 44-byte-header PCM WAV file.
pub fn write_wav(path: &Path, waveform: &Waveform) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: waveform.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    for &s in &waveform.samples {
        writer.write_sample(s).map_err(|e| map_hound(path, e))?;
    }
    writer.finalize().map_err(|e| map_hound(path, e))
}

fn map_hound(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) => Error::io(path, e),
        other => Error::AudioParse {
            path: path.to_path_buf(),
            msg: other.to_string(),
        },
    }
}
