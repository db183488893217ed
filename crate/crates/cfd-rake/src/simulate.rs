//! Ground-truth material: harmonic voices with known pitch contours and an
//! SSB channel applying a known carrier frequency difference.

use std::f64::consts::PI;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::AudioSegment;

/// Margin kept below Nyquist after the shift.
pub const NYQUIST_GUARD_HZ: f64 = 50.0;

/// A synthetic voiced signal: piecewise-linear pitch contour, harmonics
/// decaying as `h^(-rolloff)`, silence outside the voiced intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiceSpec {
    /// (time s, pitch Hz) breakpoints, times ascending. The contour holds
    /// the edge values outside the breakpoint span.
    pub pitch_breakpoints: Vec<(f64, f64)>,
    pub harmonic_rolloff: f64,
    pub num_harmonics: usize,
    pub duration_s: f64,
    /// Voiced (on) intervals; empty means fully voiced.
    pub voiced_intervals: Vec<(f64, f64)>,
}

impl VoiceSpec {
    /// Fully voiced constant-pitch voice.
    pub fn constant(pitch_hz: f64, duration_s: f64, num_harmonics: usize) -> VoiceSpec {
        VoiceSpec {
            pitch_breakpoints: vec![(0.0, pitch_hz)],
            harmonic_rolloff: 0.5,
            num_harmonics,
            duration_s,
            voiced_intervals: Vec::new(),
        }
    }

    /// Pitch at time `t_s` (linear between breakpoints, clamped outside).
    pub fn pitch_at(&self, t_s: f64) -> f64 {
        let bp = &self.pitch_breakpoints;
        if t_s <= bp[0].0 {
            return bp[0].1;
        }
        for pair in bp.windows(2) {
            let ((t0, f0), (t1, f1)) = (pair[0], pair[1]);
            if t_s <= t1 {
                if t1 == t0 {
                    return f1;
                }
                return f0 + (f1 - f0) * (t_s - t0) / (t1 - t0);
            }
        }
        bp[bp.len() - 1].1
    }

    pub fn voiced_at(&self, t_s: f64) -> bool {
        self.voiced_intervals.is_empty()
            || self.voiced_intervals.iter().any(|&(a, b)| t_s >= a && t_s < b)
    }

    /// Ground-truth pitch per analysis frame (NaN where the frame center is
    /// unvoiced), for scoring estimated traces.
    pub fn true_pitch_trace(
        &self,
        num_frames: usize,
        frame_shift_s: f64,
        frame_len_s: f64,
    ) -> Vec<f64> {
        (0..num_frames)
            .map(|t| {
                let center = t as f64 * frame_shift_s + frame_len_s / 2.0;
                if self.voiced_at(center) {
                    self.pitch_at(center)
                } else {
                    f64::NAN
                }
            })
            .collect()
    }

    // Negated comparisons also reject NaN from deserialized specs.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) {
            return Err(Error::VoiceSpec("duration must be positive".into()));
        }
        if self.pitch_breakpoints.is_empty() {
            return Err(Error::VoiceSpec("at least one pitch breakpoint required".into()));
        }
        let mut prev = f64::NEG_INFINITY;
        for &(t, f) in &self.pitch_breakpoints {
            if t < prev {
                return Err(Error::VoiceSpec("breakpoint times must be ascending".into()));
            }
            prev = t;
            if !(50.0..=400.0).contains(&f) {
                return Err(Error::VoiceSpec(format!(
                    "pitch {f} Hz outside the 50-400 Hz contour range"
                )));
            }
        }
        if self.num_harmonics == 0 {
            return Err(Error::VoiceSpec("num_harmonics must be at least 1".into()));
        }
        for &(a, b) in &self.voiced_intervals {
            if !(a < b) {
                return Err(Error::VoiceSpec(format!("voiced interval ({a}, {b}) is empty")));
            }
        }
        Ok(())
    }
}

/// SSB demodulation channel: band limit, spectral shift by the carrier
/// frequency difference, additive white Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub cfd_hz: f64,
    pub bandwidth_hz: f64,
    /// `None` disables the noise stage.
    pub snr_db: Option<f64>,
    pub sample_rate: u32,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        ChannelSpec { cfd_hz: 0.0, bandwidth_hz: 2700.0, snr_db: None, sample_rate: 8000 }
    }
}

impl ChannelSpec {
    // Negated comparisons also reject NaN from deserialized specs.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let nyquist = f64::from(self.sample_rate) / 2.0;
        if self.cfd_hz < 0.0 {
            return Err(Error::ChannelSpec("cfd_hz must be non-negative".into()));
        }
        if !(self.bandwidth_hz > 0.0) || self.bandwidth_hz > nyquist {
            return Err(Error::ChannelSpec(format!(
                "bandwidth {} Hz invalid for {} Hz sampling",
                self.bandwidth_hz, self.sample_rate
            )));
        }
        if self.cfd_hz + self.bandwidth_hz > nyquist - NYQUIST_GUARD_HZ {
            return Err(Error::ChannelSpec(format!(
                "cfd {} Hz too large for band: {} + {} Hz exceeds the {} Hz Nyquist guard",
                self.cfd_hz,
                self.cfd_hz,
                self.bandwidth_hz,
                nyquist - NYQUIST_GUARD_HZ
            )));
        }
        Ok(())
    }
}

/// Phase-continuous harmonic synthesis of `spec`, peak-normalized to 0.9.
pub fn synth_voice(spec: &VoiceSpec, sample_rate: u32) -> Result<AudioSegment> {
    spec.validate()?;
    let fs = f64::from(sample_rate);
    let max_pitch =
        spec.pitch_breakpoints.iter().map(|&(_, f)| f).fold(f64::NEG_INFINITY, f64::max);
    if max_pitch * spec.num_harmonics as f64 >= fs / 2.0 {
        return Err(Error::VoiceSpec(format!(
            "contour up to {max_pitch} Hz with {} harmonics exceeds the {} Hz Nyquist limit",
            spec.num_harmonics,
            fs / 2.0
        )));
    }

    let len = (spec.duration_s * fs).round() as usize;
    let amps: Vec<f64> =
        (1..=spec.num_harmonics).map(|h| (h as f64).powf(-spec.harmonic_rolloff)).collect();

    let mut samples = Vec::with_capacity(len);
    let mut phase = 0.0f64;
    for n in 0..len {
        let t = n as f64 / fs;
        phase += 2.0 * PI * spec.pitch_at(t) / fs;
        if spec.voiced_at(t) {
            let s: f64 =
                amps.iter().enumerate().map(|(i, a)| a * ((i + 1) as f64 * phase).cos()).sum();
            samples.push(s);
        } else {
            samples.push(0.0);
        }
    }

    let peak = samples.iter().fold(0.0f64, |m, &s| m.max(s.abs()));
    if peak > 0.0 {
        let scale = 0.9 / peak;
        for s in &mut samples {
            *s *= scale;
        }
    }
    Ok(AudioSegment::new(samples, sample_rate))
}

fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..=60 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc lowpass, 80 dB stopband, 100 Hz transition.
fn design_lowpass(cutoff_hz: f64, fs: f64) -> Vec<f64> {
    const ATTEN_DB: f64 = 80.0;
    const TRANSITION_HZ: f64 = 100.0;
    let beta = 0.1102 * (ATTEN_DB - 8.7);
    let delta_w = 2.0 * PI * TRANSITION_HZ / fs;
    let mut taps = ((ATTEN_DB - 7.95) / (2.285 * delta_w)).ceil() as usize + 1;
    if taps.is_multiple_of(2) {
        taps += 1;
    }
    let mid = (taps - 1) as f64 / 2.0;
    let fc = cutoff_hz / fs;
    let i0b = bessel_i0(beta);
    (0..taps)
        .map(|n| {
            let m = n as f64 - mid;
            let sinc = if m == 0.0 { 2.0 * fc } else { (2.0 * PI * fc * m).sin() / (PI * m) };
            let r = m / mid;
            sinc * bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0b
        })
        .collect()
}

fn next_fast_len(mut n: usize) -> usize {
    n = n.max(1);
    loop {
        let mut m = n;
        for f in [2, 3, 5] {
            while m.is_multiple_of(f) {
                m /= f;
            }
        }
        if m == 1 {
            return n;
        }
        n += 1;
    }
}

/// FFT convolution with the linear-phase group delay removed; output has
/// the input's length.
fn convolve_same(x: &[f64], taps: &[f64]) -> Vec<f64> {
    let n = next_fast_len(x.len() + taps.len() - 1);
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut a: Vec<Complex64> =
        x.iter().map(|&v| Complex64::new(v, 0.0)).chain(std::iter::repeat(Complex64::default())).take(n).collect();
    let mut b: Vec<Complex64> =
        taps.iter().map(|&v| Complex64::new(v, 0.0)).chain(std::iter::repeat(Complex64::default())).take(n).collect();
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (av, bv) in a.iter_mut().zip(&b) {
        *av *= bv;
    }
    inv.process(&mut a);

    let delay = (taps.len() - 1) / 2;
    let scale = 1.0 / n as f64;
    (0..x.len()).map(|i| a[i + delay].re * scale).collect()
}

/// Lowpass the segment to `[0, cutoff_hz]`.
pub fn band_limit(seg: &AudioSegment, cutoff_hz: f64) -> AudioSegment {
    let taps = design_lowpass(cutoff_hz, f64::from(seg.sample_rate));
    AudioSegment::new(convolve_same(&seg.samples, &taps), seg.sample_rate)
}

/// Shifts the spectrum up by `cfd_hz` through analytic-signal modulation:
/// `Re(analytic(x) * exp(j 2 pi cfd t))`. Spectral content that would land
/// past the Nyquist guard is cleared before the shift.
fn shift_up(samples: &[f64], cfd_hz: f64, fs: f64) -> Vec<f64> {
    let n = samples.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut buf);

    let keep_hz = fs / 2.0 - cfd_hz;
    let half = n / 2;
    for (k, v) in buf.iter_mut().enumerate() {
        let keep = k * 2 < n || (n.is_multiple_of(2) && k == half);
        if !keep {
            *v = Complex64::default();
            continue;
        }
        if k > 0 && !(n.is_multiple_of(2) && k == half) {
            *v *= 2.0;
        }
        if k as f64 * fs / n as f64 > keep_hz {
            *v = Complex64::default();
        }
    }
    inv.process(&mut buf);

    let scale = 1.0 / n as f64;
    let w = 2.0 * PI * cfd_hz / fs;
    buf.iter()
        .enumerate()
        .map(|(i, z)| {
            let (sin, cos) = (w * i as f64).sin_cos();
            (z.re * cos - z.im * sin) * scale
        })
        .collect()
}

/// Passes `seg` through the channel: band limiting, analytic-signal shift
/// by `cfd_hz`, then white Gaussian noise at `snr_db` from the given seed.
pub fn apply_channel(seg: &AudioSegment, ch: &ChannelSpec, seed: u64) -> Result<AudioSegment> {
    ch.validate()?;
    if seg.sample_rate != ch.sample_rate {
        return Err(Error::ChannelSpec(format!(
            "segment rate {} Hz does not match channel rate {} Hz",
            seg.sample_rate, ch.sample_rate
        )));
    }
    if seg.samples.is_empty() {
        return Err(Error::Empty("channel input has no samples".into()));
    }
    let fs = f64::from(ch.sample_rate);

    let mut samples = convolve_same(&seg.samples, &design_lowpass(ch.bandwidth_hz, fs));
    if ch.cfd_hz > 0.0 {
        samples = shift_up(&samples, ch.cfd_hz, fs);
    }
    if let Some(snr_db) = ch.snr_db {
        let power = samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64;
        let sigma = (power * 10f64.powf(-snr_db / 10.0)).sqrt();
        if sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, sigma).expect("sigma is finite");
            for s in &mut samples {
                *s += normal.sample(&mut rng);
            }
        }
    }
    Ok(AudioSegment::new(samples, ch.sample_rate))
}

/// One line of the corpus manifest (JSON lines).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub path: String,
    pub cfd_hz: f64,
    pub snr_db: Option<f64>,
    pub pitch_breakpoints: Vec<(f64, f64)>,
    pub duration_s: f64,
}

pub fn write_manifest(records: &[ManifestRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for rec in records {
        let line = serde_json::to_string(rec)
            .map_err(|e| Error::Parse { path: path.into(), detail: e.to_string() })?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.into(),
            detail: format!("line {}: {e}", i + 1),
        })?;
        records.push(rec);
    }
    Ok(records)
}
