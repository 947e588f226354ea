//! Score synthesis and the two audio feature families compared by SEBA:
//! STFT chroma (harmonic) and decaying onset features (percussive).

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::budget::{Budget, BudgetExceeded};
use crate::dtw::{CostMatrix, DistanceFunction, SummedMetric};
use crate::model::Note;

pub const DEFAULT_SAMPLE_RATE: u32 = 22050;

pub const CHROMA_DIM: usize = 12;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("frame period {0} s is shorter than one sample")]
    FramePeriodTooSmall(f64),
    #[error("audio buffer is empty")]
    EmptyAudio,
    #[error("malformed WAV file: {0}")]
    MalformedWav(String),
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Budget(#[from] BudgetExceeded),
}

/// Mono PCM audio in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        AudioBuffer {
            samples,
            sample_rate,
        }
    }

    pub fn silence(seconds: f64, sample_rate: u32) -> Self {
        let len = (seconds * f64::from(sample_rate)).round() as usize;
        AudioBuffer::new(vec![0.0; len], sample_rate)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

/// Additive synthesis parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub harmonics: usize,
    /// Exponential decay time constant, seconds.
    pub decay: f64,
    pub attack: f64,
    pub release: f64,
    pub peak: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            harmonics: 8,
            decay: 0.5,
            attack: 0.01,
            release: 0.01,
            peak: 0.9,
        }
    }
}

pub fn pitch_frequency(pitch: u8) -> f64 {
    440.0 * 2f64.powf((f64::from(pitch) - 69.0) / 12.0)
}

/// Renders `notes` with the default [`SynthConfig`].
pub fn synthesize(notes: &[Note], sample_rate: u32) -> AudioBuffer {
    synthesize_with(notes, sample_rate, &SynthConfig::default())
}

/// Each note sums harmonics `h = 1..=H` of its equal-tempered frequency with
/// amplitude `1/h`, under a linear attack, exponential decay and a linear
/// release after the offset. The mix is scaled to `cfg.peak`.
pub fn synthesize_with(notes: &[Note], sample_rate: u32, cfg: &SynthConfig) -> AudioBuffer {
    let sr = f64::from(sample_rate);
    let Some(last) = notes.iter().map(|n| n.offset).reduce(f64::max) else {
        return AudioBuffer::new(Vec::new(), sample_rate);
    };
    let len = ((last + cfg.release) * sr).ceil() as usize;
    let mut out = vec![0.0f64; len];
    let release_len = (cfg.release * sr).round().max(1.0) as usize;
    for note in notes {
        let start = (note.onset * sr).round() as usize;
        let stop = ((note.offset * sr).round() as usize).max(start + 1);
        let end = (stop + release_len).min(len);
        let f0 = pitch_frequency(note.pitch);
        let partials: Vec<(f64, f64)> = (1..=cfg.harmonics)
            .map(|h| (2.0 * PI * f0 * h as f64 / sr, 1.0 / h as f64))
            .filter(|&(w, _)| w < PI)
            .collect();
        for (k, slot) in out[start.min(len)..end].iter_mut().enumerate() {
            let t = k as f64 / sr;
            let mut env = (-t / cfg.decay).exp();
            if cfg.attack > 0.0 && t < cfg.attack {
                env *= t / cfg.attack;
            }
            let s = start + k;
            if s >= stop {
                env *= 1.0 - (s - stop) as f64 / release_len as f64;
            }
            let value: f64 = partials
                .iter()
                .map(|&(w, amp)| amp * (w * k as f64).sin())
                .sum();
            *slot += env * value;
        }
    }
    let peak = out.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 0.0 {
        let gain = cfg.peak / peak;
        out.iter_mut().for_each(|x| *x *= gain);
    }
    AudioBuffer::new(out, sample_rate)
}

/// Feature extraction parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub window: usize,
    pub min_freq: f64,
    pub max_freq: f64,
    /// Frames over which each onset impulse is spread.
    pub smear: usize,
    /// Width of the local-max normalization window, seconds.
    pub norm_window: f64,
    pub norm_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            window: 4096,
            min_freq: 55.0,
            max_freq: 5000.0,
            smear: 10,
            norm_window: 1.0,
            norm_floor: 1e-4,
        }
    }
}

/// Per-frame pitch-class vectors. Produced either as raw energies
/// ([`chroma_energy`]) or L2-normalized ([`chroma_features`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ChromaSequence {
    pub frames: Vec<[f64; CHROMA_DIM]>,
    pub frame_period: f64,
}

impl ChromaSequence {
    /// L2-normalizes each frame; all-zero frames stay zero.
    pub fn normalized(&self) -> ChromaSequence {
        let frames = self
            .frames
            .iter()
            .map(|f| {
                let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    f.map(|x| x / norm)
                } else {
                    *f
                }
            })
            .collect();
        ChromaSequence {
            frames,
            frame_period: self.frame_period,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnsetFeatureSequence {
    pub frames: Vec<[f64; CHROMA_DIM]>,
    pub frame_period: f64,
}

pub(crate) fn hop_size(frame_period: f64, sample_rate: u32) -> Result<usize, AudioError> {
    let hop = (frame_period * f64::from(sample_rate)).round();
    if !(hop >= 1.0) {
        return Err(AudioError::FramePeriodTooSmall(frame_period));
    }
    Ok(hop as usize)
}

struct Stft {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    bin_class: Vec<Option<usize>>,
}

impl Stft {
    fn new(cfg: &FeatureConfig, sample_rate: u32) -> Self {
        let n = cfg.window;
        let fft = FftPlanner::new().plan_fft_forward(n);
        let window = (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
            .collect();
        let bin_class = (0..=n / 2)
            .map(|b| {
                let f = b as f64 * f64::from(sample_rate) / n as f64;
                (f >= cfg.min_freq && f <= cfg.max_freq).then(|| {
                    let midi = (69.0 + 12.0 * (f / 440.0).log2()).round() as i64;
                    midi.rem_euclid(12) as usize
                })
            })
            .collect();
        Stft {
            fft,
            window,
            bin_class,
        }
    }
}

/// Raw pitch-class magnitudes of a Hann-windowed STFT. Frame `k` is centred
/// on sample `k * hop`, with zero padding at both ends.
pub fn chroma_energy(
    audio: &AudioBuffer,
    frame_period: f64,
    cfg: &FeatureConfig,
) -> Result<ChromaSequence, AudioError> {
    if audio.is_empty() {
        return Err(AudioError::EmptyAudio);
    }
    let hop = hop_size(frame_period, audio.sample_rate)?;
    let stft = Stft::new(cfg, audio.sample_rate);
    let n = cfg.window;
    let half = n / 2;
    let n_frames = audio.len() / hop + 1;
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut frames = Vec::with_capacity(n_frames);
    for k in 0..n_frames {
        let centre = k * hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            let s = (centre + i).checked_sub(half);
            let x = s.and_then(|s| audio.samples.get(s)).copied().unwrap_or(0.0);
            *slot = Complex::new(x * stft.window[i], 0.0);
        }
        let mut frame = [0.0; CHROMA_DIM];
        if buf.iter().any(|c| c.re != 0.0) {
            stft.fft.process(&mut buf);
            for (b, class) in stft.bin_class.iter().enumerate() {
                if let Some(c) = class {
                    frame[*c] += buf[b].norm();
                }
            }
        }
        frames.push(frame);
    }
    Ok(ChromaSequence {
        frames,
        frame_period: hop as f64 / f64::from(audio.sample_rate),
    })
}

/// L2-normalized chroma.
pub fn chroma_features(
    audio: &AudioBuffer,
    frame_period: f64,
    cfg: &FeatureConfig,
) -> Result<ChromaSequence, AudioError> {
    Ok(chroma_energy(audio, frame_period, cfg)?.normalized())
}

/// Decaying onset features from raw chroma energies: the half-wave rectified
/// first difference per class, spread over `smear` frames with linearly
/// decreasing weights, then divided by the local maximum over a
/// `norm_window`-wide neighbourhood (never by less than `norm_floor`).
pub fn onset_features(energy: &ChromaSequence, cfg: &FeatureConfig) -> OnsetFeatureSequence {
    let frames = &energy.frames;
    let n = frames.len();
    let d = cfg.smear.max(1);
    let mut rect = vec![[0.0; CHROMA_DIM]; n];
    for t in 1..n {
        for c in 0..CHROMA_DIM {
            rect[t][c] = (frames[t][c] - frames[t - 1][c]).max(0.0);
        }
    }
    let mut smeared = vec![[0.0; CHROMA_DIM]; n];
    for (t, impulse) in rect.iter().enumerate() {
        if impulse.iter().all(|&x| x == 0.0) {
            continue;
        }
        for k in 0..d.min(n - t) {
            let w = (d - k) as f64 / d as f64;
            for c in 0..CHROMA_DIM {
                smeared[t + k][c] += w * impulse[c];
            }
        }
    }
    let frame_max: Vec<f64> = smeared
        .iter()
        .map(|f| f.iter().copied().fold(0.0, f64::max))
        .collect();
    let half = (cfg.norm_window / (2.0 * energy.frame_period)).round() as usize;
    let out = (0..n)
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half + 1).min(n);
            let local = frame_max[lo..hi].iter().copied().fold(0.0, f64::max);
            let scale = local.max(cfg.norm_floor);
            smeared[t].map(|x| x / scale)
        })
        .collect();
    OnsetFeatureSequence {
        frames: out,
        frame_period: energy.frame_period,
    }
}

/// Concatenated 24-dimensional SEBA frames: normalized chroma followed by
/// onset features.
#[derive(Debug, Clone)]
pub struct SebaFeatures {
    pub frames: Vec<Vec<f64>>,
    pub frame_period: f64,
}

impl SebaFeatures {
    /// Cosine distance on the chroma half plus euclidean distance on the
    /// onset half, equally weighted.
    pub fn metric() -> SummedMetric {
        SummedMetric {
            parts: vec![
                (0..CHROMA_DIM, DistanceFunction::Cosine),
                (CHROMA_DIM..2 * CHROMA_DIM, DistanceFunction::Euclidean),
            ],
        }
    }
}

pub fn seba_features(
    audio: &AudioBuffer,
    frame_period: f64,
    cfg: &FeatureConfig,
) -> Result<SebaFeatures, AudioError> {
    let energy = chroma_energy(audio, frame_period, cfg)?;
    let onsets = onset_features(&energy, cfg);
    let chroma = energy.normalized();
    let frames = chroma
        .frames
        .iter()
        .zip(&onsets.frames)
        .map(|(c, o)| c.iter().chain(o.iter()).copied().collect())
        .collect();
    Ok(SebaFeatures {
        frames,
        frame_period: chroma.frame_period,
    })
}

/// Chroma cosine-distance matrix plus onset-feature euclidean-distance
/// matrix, score frames as rows.
pub fn seba_cost_matrix(
    score_audio: &AudioBuffer,
    perf_audio: &AudioBuffer,
    frame_period: f64,
    cfg: &FeatureConfig,
) -> Result<CostMatrix, AudioError> {
    seba_cost_matrix_with_budget(score_audio, perf_audio, frame_period, cfg, &Budget::unlimited())
}

pub fn seba_cost_matrix_with_budget(
    score_audio: &AudioBuffer,
    perf_audio: &AudioBuffer,
    frame_period: f64,
    cfg: &FeatureConfig,
    budget: &Budget,
) -> Result<CostMatrix, AudioError> {
    let a = seba_features(score_audio, frame_period, cfg)?;
    let b = seba_features(perf_audio, frame_period, cfg)?;
    Ok(matrix_from_features(&a, &b, budget)?)
}

pub(crate) fn matrix_from_features(
    a: &SebaFeatures,
    b: &SebaFeatures,
    budget: &Budget,
) -> Result<CostMatrix, BudgetExceeded> {
    use crate::dtw::Metric;
    let (n, m) = (a.frames.len(), b.frames.len());
    budget.reserve((n * m * std::mem::size_of::<f64>()) as u64)?;
    let metric = SebaFeatures::metric();
    let mut data = Vec::with_capacity(n * m);
    for fa in &a.frames {
        budget.check_time()?;
        data.extend(b.frames.iter().map(|fb| metric.distance(fa, fb)));
    }
    Ok(CostMatrix::new(n, m, data))
}

/// Reads 16-bit integer or 32-bit float PCM, averages channels to mono and
/// resamples linearly to `target_rate`.
pub fn read_wav(path: impl AsRef<Path>, target_rate: u32) -> Result<AudioBuffer, AudioError> {
    let reader = hound::WavReader::open(path).map_err(wav_error)?;
    let spec = reader.spec();
    let channels = usize::from(spec.channels.max(1));
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(wav_error)?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(wav_error)?,
        (fmt, bits) => {
            return Err(AudioError::UnsupportedEncoding(format!("{fmt:?} {bits}-bit")))
        }
    };
    let mono: Vec<f64> = interleaved
        .chunks(channels)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    Ok(resample_linear(
        &AudioBuffer::new(mono, spec.sample_rate),
        target_rate,
    ))
}

fn wav_error(e: hound::Error) -> AudioError {
    match e {
        hound::Error::IoError(io)
            if matches!(
                io.kind(),
                std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied
            ) =>
        {
            AudioError::Io(io)
        }
        hound::Error::Unsupported => AudioError::UnsupportedEncoding("unsupported WAV format".into()),
        other => AudioError::MalformedWav(other.to_string()),
    }
}

pub fn resample_linear(audio: &AudioBuffer, target_rate: u32) -> AudioBuffer {
    if audio.sample_rate == target_rate || audio.is_empty() {
        return AudioBuffer::new(audio.samples.clone(), target_rate);
    }
    let ratio = f64::from(audio.sample_rate) / f64::from(target_rate);
    let out_len = (audio.len() as f64 / ratio).round() as usize;
    let last = audio.len() - 1;
    let samples = (0..out_len)
        .map(|k| {
            let pos = k as f64 * ratio;
            let i = (pos.floor() as usize).min(last);
            let frac = pos - i as f64;
            let next = audio.samples[(i + 1).min(last)];
            audio.samples[i] * (1.0 - frac) + next * frac
        })
        .collect();
    AudioBuffer::new(samples, target_rate)
}

/// Writes 16-bit mono PCM.
pub fn write_wav(audio: &AudioBuffer, path: impl AsRef<Path>) -> Result<(), AudioError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(wav_error)?;
    for &x in &audio.samples {
        let v = (x.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        w.write_sample(v).map_err(wav_error)?;
    }
    w.finalize().map_err(wav_error)
}
