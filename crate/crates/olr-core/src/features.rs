//! Acoustic front-end: MFCC extraction with log energy, delta features,
//! per-utterance mean normalization, and the binary feature-dump format
//! used to cache features between pipeline stages.

use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::corpus::{Waveform, PIPELINE_SAMPLE_RATE};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmvn {
    Off,
    /// Subtract the per-dimension mean over the utterance's frames.
    PerUtteranceMean,
}

#[derive(Clone, Debug)]
pub struct FeatureConfig {
    pub frame_length_ms: f64,
    pub frame_shift_ms: f64,
    pub pre_emphasis: f64,
    pub n_mel_filters: usize,
    /// Cepstral coefficients c1..=c_n (c0 excluded).
    pub n_cepstra: usize,
    pub include_log_energy: bool,
    pub delta_window: usize,
    pub energy_floor: f64,
    pub cmvn: Cmvn,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            frame_length_ms: 25.0,
            frame_shift_ms: 10.0,
            pre_emphasis: 0.97,
            n_mel_filters: 23,
            n_cepstra: 19,
            include_log_energy: true,
            delta_window: 2,
            energy_floor: 1e-10,
            cmvn: Cmvn::PerUtteranceMean,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_cepstra >= self.n_mel_filters {
            return Err(Error::Config(format!(
                "n_cepstra ({}) must be < n_mel_filters ({})",
                self.n_cepstra, self.n_mel_filters
            )));
        }
        if self.frame_shift_ms > self.frame_length_ms {
            return Err(Error::Config(format!(
                "frame shift ({} ms) must be <= frame length ({} ms)",
                self.frame_shift_ms, self.frame_length_ms
            )));
        }
        if !(self.energy_floor > 0.0) {
            return Err(Error::Config("energy_floor must be > 0".to_string()));
        }
        if !(self.frame_length_ms > 0.0) || self.n_cepstra == 0 || self.delta_window == 0 {
            return Err(Error::Config("frame length, n_cepstra and delta_window must be positive".to_string()));
        }
        Ok(())
    }

    /// Static feature dimension: n_cepstra plus the energy term.
    pub fn base_dim(&self) -> usize {
        self.n_cepstra + usize::from(self.include_log_energy)
    }
}

/// T x D matrix of frame features, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        FeatureMatrix { data, rows, cols }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols);
            data.extend_from_slice(r);
        }
        FeatureMatrix::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.cols..(t + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Precomputed tables for one feature configuration.
pub struct MfccExtractor {
    config: FeatureConfig,
    frame_len: usize,
    frame_shift: usize,
    fft_size: usize,
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    /// Per mel filter: (first bin, triangle weights).
    filters: Vec<(usize, Vec<f64>)>,
    /// DCT-II basis, row k-1 (k = 1..=n_cepstra) over n_mel_filters points.
    dct: Vec<Vec<f64>>,
}

fn hz_to_mel(hz: f64) -> f64 {
    1127.0 * (1.0 + hz / 700.0).ln()
}

const MEL_LOW_HZ: f64 = 20.0;
const MEL_HIGH_HZ: f64 = 8000.0;

impl MfccExtractor {
    pub fn new(config: FeatureConfig) -> Result<Self> {
        config.validate()?;
        let fs = PIPELINE_SAMPLE_RATE as f64;
        let frame_len = (config.frame_length_ms / 1000.0 * fs).round() as usize;
        let frame_shift = (config.frame_shift_ms / 1000.0 * fs).round() as usize;
        let fft_size = frame_len.next_power_of_two();
        let fft = FftPlanner::new().plan_fft_forward(fft_size);

        let window: Vec<f64> = (0..frame_len)
            .map(|n| {
                0.54 - 0.46
                    * (2.0 * std::f64::consts::PI * n as f64 / (frame_len as f64 - 1.0)).cos()
            })
            .collect();

        // Triangles with mel-equidistant edges, weights evaluated in the
        // mel domain at each FFT bin center.
        let n_bins = fft_size / 2 + 1;
        let mel_lo = hz_to_mel(MEL_LOW_HZ);
        let mel_hi = hz_to_mel(MEL_HIGH_HZ);
        let mel_step = (mel_hi - mel_lo) / (config.n_mel_filters + 1) as f64;
        let bin_mels: Vec<f64> = (0..n_bins)
            .map(|k| hz_to_mel(k as f64 * fs / fft_size as f64))
            .collect();
        let mut filters = Vec::with_capacity(config.n_mel_filters);
        for j in 0..config.n_mel_filters {
            let left = mel_lo + j as f64 * mel_step;
            let center = left + mel_step;
            let right = center + mel_step;
            let mut first_bin = None;
            let mut weights = Vec::new();
            for (k, &mel) in bin_mels.iter().enumerate() {
                let w = if mel > left && mel < right {
                    if mel <= center {
                        (mel - left) / mel_step
                    } else {
                        (right - mel) / mel_step
                    }
                } else {
                    0.0
                };
                if w > 0.0 {
                    if first_bin.is_none() {
                        first_bin = Some(k);
                    }
                    weights.push(w);
                } else if first_bin.is_some() {
                    break;
                }
            }
            let first = first_bin.ok_or_else(|| {
                Error::Config(format!("mel filter {j} covers no FFT bin; too many filters"))
            })?;
            filters.push((first, weights));
        }

        // Orthonormal-style DCT-II rows for k >= 1.
        let m = config.n_mel_filters as f64;
        let dct_scale = (2.0 / m).sqrt();
        let dct = (1..=config.n_cepstra)
            .map(|k| {
                (0..config.n_mel_filters)
                    .map(|j| {
                        dct_scale
                            * (std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / m).cos()
                    })
                    .collect()
            })
            .collect();

        Ok(MfccExtractor {
            config,
            frame_len,
            frame_shift,
            fft_size,
            fft,
            window,
            filters,
            dct,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    /// Number of frames a waveform of `n` samples yields.
    pub fn frame_count(&self, n: usize) -> usize {
        if n < self.frame_len {
            0
        } else {
            (n - self.frame_len) / self.frame_shift + 1
        }
    }

    /// Static MFCC features: per frame c1..=c_n plus log energy.
    pub fn extract(&self, waveform: &Waveform) -> Result<FeatureMatrix> {
        if waveform.sample_rate != PIPELINE_SAMPLE_RATE {
            return Err(Error::Config(format!(
                "feature extraction requires {PIPELINE_SAMPLE_RATE} Hz input, got {} Hz",
                waveform.sample_rate
            )));
        }
        let n_frames = self.frame_count(waveform.samples.len());
        if n_frames == 0 {
            return Err(Error::InsufficientData(format!(
                "waveform of {} samples yields no {}-sample frame",
                waveform.samples.len(),
                self.frame_len
            )));
        }

        let mut emphasized: Vec<f64> = Vec::with_capacity(waveform.samples.len());
        emphasized.push(waveform.samples[0] as f64);
        for i in 1..waveform.samples.len() {
            emphasized.push(
                waveform.samples[i] as f64
                    - self.config.pre_emphasis * waveform.samples[i - 1] as f64,
            );
        }

        let dim = self.config.base_dim();
        let mut data = Vec::with_capacity(n_frames * dim);
        let mut spectrum = vec![Complex::new(0.0, 0.0); self.fft_size];
        let mut power = vec![0.0f64; self.fft_size / 2 + 1];
        let mut log_mel = vec![0.0f64; self.config.n_mel_filters];

        for t in 0..n_frames {
            let frame = &emphasized[t * self.frame_shift..t * self.frame_shift + self.frame_len];
            let energy: f64 = frame.iter().map(|s| s * s).sum();
            let log_energy = energy.max(self.config.energy_floor).ln();

            for (slot, (s, w)) in spectrum.iter_mut().zip(frame.iter().zip(&self.window)) {
                *slot = Complex::new(s * w, 0.0);
            }
            for slot in spectrum.iter_mut().skip(self.frame_len) {
                *slot = Complex::new(0.0, 0.0);
            }
            self.fft.process(&mut spectrum);
            for (p, c) in power.iter_mut().zip(spectrum.iter()) {
                *p = c.norm_sqr();
            }

            for (lm, (first, weights)) in log_mel.iter_mut().zip(&self.filters) {
                let e: f64 = weights
                    .iter()
                    .zip(&power[*first..first + weights.len()])
                    .map(|(w, p)| w * p)
                    .sum();
                *lm = e.max(self.config.energy_floor).ln();
            }

            for basis in &self.dct {
                data.push(basis.iter().zip(&log_mel).map(|(b, m)| b * m).sum());
            }
            if self.config.include_log_energy {
                data.push(log_energy);
            }
        }

        let mut feats = FeatureMatrix::new(n_frames, dim, data);
        if self.config.cmvn == Cmvn::PerUtteranceMean {
            subtract_column_means(&mut feats);
        }
        Ok(feats)
    }
}

fn subtract_column_means(m: &mut FeatureMatrix) {
    let (rows, cols) = (m.rows, m.cols);
    let mut means = vec![0.0f64; cols];
    for row in m.iter_rows() {
        for (mean, v) in means.iter_mut().zip(row) {
            *mean += v;
        }
    }
    for mean in &mut means {
        *mean /= rows as f64;
    }
    for row in m.data.chunks_exact_mut(cols) {
        for (v, mean) in row.iter_mut().zip(&means) {
            *v -= mean;
        }
    }
}

/// Convenience wrapper over [`MfccExtractor`].
pub fn compute_mfcc(waveform: &Waveform, config: &FeatureConfig) -> Result<FeatureMatrix> {
    MfccExtractor::new(config.clone())?.extract(waveform)
}

/// Appends regression deltas and delta-deltas; columns are ordered
/// [static, delta, delta-delta]. Edge frames replicate the boundary frame.
pub fn append_deltas(base: &FeatureMatrix, window: usize) -> FeatureMatrix {
    let (t_max, d) = (base.rows(), base.cols());
    let denom: f64 = 2.0 * (1..=window).map(|n| (n * n) as f64).sum::<f64>();

    let delta_of = |src: &FeatureMatrix, t: usize| -> Vec<f64> {
        let mut out = vec![0.0f64; d];
        for n in 1..=window {
            let fwd = src.row((t + n).min(t_max - 1));
            let back = src.row(t.saturating_sub(n));
            for ((o, f), b) in out.iter_mut().zip(fwd).zip(back) {
                *o += n as f64 * (f - b);
            }
        }
        for o in &mut out {
            *o /= denom;
        }
        out
    };

    let deltas: Vec<Vec<f64>> = (0..t_max).map(|t| delta_of(base, t)).collect();
    let delta_mat = FeatureMatrix::from_rows(&deltas);
    let ddeltas: Vec<Vec<f64>> = (0..t_max).map(|t| delta_of(&delta_mat, t)).collect();

    let mut data = Vec::with_capacity(t_max * d * 3);
    for t in 0..t_max {
        data.extend_from_slice(base.row(t));
        data.extend_from_slice(&deltas[t]);
        data.extend_from_slice(&ddeltas[t]);
    }
    FeatureMatrix::new(t_max, d * 3, data)
}

/// Writes the binary dump: T and D as little-endian u32, then row-major
/// f32 values.
pub fn write_feature_dump(path: &Path, m: &FeatureMatrix) -> Result<()> {
    let mut buf = Vec::with_capacity(8 + 4 * m.data.len());
    buf.extend_from_slice(&(m.rows as u32).to_le_bytes());
    buf.extend_from_slice(&(m.cols as u32).to_le_bytes());
    for &v in &m.data {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_feature_dump(path: &Path) -> Result<FeatureMatrix> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = [0u8; 8];
    file.read_exact(&mut header).map_err(|e| Error::io(path, e))?;
    let rows = u32::from_le_bytes(header[..4].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(header[4..].try_into().unwrap()) as usize;
    let mut body = Vec::new();
    file.read_to_end(&mut body).map_err(|e| Error::io(path, e))?;
    if body.len() != rows * cols * 4 {
        return Err(Error::Model {
            path: path.to_path_buf(),
            msg: format!(
                "feature dump body is {} bytes, expected {} for {}x{}",
                body.len(),
                rows * cols * 4,
                rows,
                cols
            ),
        });
    }
    let data = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    Ok(FeatureMatrix::new(rows, cols, data))
}

/// Quantizes every value through the dump's f32 precision so in-memory
/// features match what a cache round-trip would produce.
pub fn quantize_to_dump_precision(m: &mut FeatureMatrix) {
    for v in &mut m.data {
        *v = *v as f32 as f64;
    }
}
