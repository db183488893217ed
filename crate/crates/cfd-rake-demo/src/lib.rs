//! Browser demo: interactive carrier-frequency-difference estimation on
//! synthetic SSB voices.
//!
//! The exports take and return JSON strings so the page's JavaScript owns
//! all rendering; the wasm side stays pure compute. Build with
//! `cargo build --target wasm32-unknown-unknown -p cfd-rake-demo --release`
//! and run `wasm-bindgen --target web` on the artifact (see `www/`).

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use cfd_rake::comb::{build_comb, build_weight_table};
use cfd_rake::config::RakeConfig;
use cfd_rake::estimator::{estimate_cfd, smooth_pitch_trace};
use cfd_rake::rake::gamma_pc;
use cfd_rake::simulate::{apply_channel, synth_voice, ChannelSpec, VoiceSpec};
use cfd_rake::spectral::stft_log_psd;

fn default_duration() -> f64 {
    6.0
}
fn default_fft() -> usize {
    4096
}
fn default_pitch_base() -> f64 {
    150.0
}
fn default_vibrato_depth() -> f64 {
    30.0
}
fn default_vibrato_rate() -> f64 {
    0.25
}
fn default_harmonics() -> usize {
    5
}

#[derive(Deserialize)]
struct EstimationParams {
    cfd_hz: f64,
    /// Omit or null for a noiseless channel.
    snr_db: Option<f64>,
    #[serde(default = "default_duration")]
    duration_s: f64,
    #[serde(default = "default_fft")]
    fft_size: usize,
    #[serde(default = "default_pitch_base")]
    pitch_base_hz: f64,
    #[serde(default = "default_vibrato_depth")]
    vibrato_depth_hz: f64,
    #[serde(default = "default_vibrato_rate")]
    vibrato_rate_hz: f64,
    #[serde(default = "default_harmonics")]
    num_harmonics: usize,
    #[serde(default)]
    seed: u64,
}

#[derive(Serialize)]
struct SpectrogramImage {
    width: usize,
    height: usize,
    /// Row-major grayscale, row 0 = first frame, column 0 = 0 Hz.
    values: Vec<u8>,
    time_span_s: f64,
    freq_span_hz: f64,
}

#[derive(Serialize)]
struct EstimationOutput {
    true_cfd_hz: f64,
    estimated_cfd_hz: f64,
    error_hz: f64,
    is_speech: bool,
    pitch_variance_hz2: f64,
    secondary_peaks: Vec<(f64, f64)>,
    gamma_hz: Vec<f64>,
    gamma_energy: Vec<f64>,
    pitch_time_s: Vec<f64>,
    pitch_raw_hz: Vec<f64>,
    pitch_smoothed_hz: Vec<f64>,
    spectrogram: SpectrogramImage,
}

fn estimation_json(params: &str) -> Result<String, String> {
    let p: EstimationParams = serde_json::from_str(params).map_err(|e| e.to_string())?;
    if !(1.0..=60.0).contains(&p.duration_s) {
        return Err("duration_s must be within 1-60 s".into());
    }

    let cfg = RakeConfig::with_fft_size(p.fft_size);
    let steps = (p.duration_s / 0.25).ceil() as usize;
    let depth = p.vibrato_depth_hz.min(p.pitch_base_hz - 55.0).max(0.0);
    let breakpoints: Vec<(f64, f64)> = (0..=steps)
        .map(|i| {
            let t = (i as f64 * 0.25).min(p.duration_s);
            let f = p.pitch_base_hz + depth * (std::f64::consts::TAU * p.vibrato_rate_hz * t).sin();
            (t, f.clamp(50.0, 400.0))
        })
        .collect();
    let voice = VoiceSpec {
        pitch_breakpoints: breakpoints,
        harmonic_rolloff: 0.5,
        num_harmonics: p.num_harmonics.clamp(1, 8),
        duration_s: p.duration_s,
        voiced_intervals: Vec::new(),
    };
    let clean = synth_voice(&voice, 8000).map_err(|e| e.to_string())?;
    let channel = ChannelSpec { cfd_hz: p.cfd_hz, snr_db: p.snr_db, ..ChannelSpec::default() };
    let received = apply_channel(&clean, &channel, p.seed).map_err(|e| e.to_string())?;

    let spec = stft_log_psd(&received, &cfg).map_err(|e| e.to_string())?;
    let slice = gamma_pc(&spec, &cfg).map_err(|e| e.to_string())?;
    let est = estimate_cfd(&slice, &cfg).map_err(|e| e.to_string())?;

    let acc = cfd_rake::estimator::accumulate(&slice);
    let gamma_hz: Vec<f64> =
        (0..acc.gamma_hat.len()).map(|d| (acc.shift_bin_lo + d) as f64 * acc.bin_hz).collect();

    let energy = vec![1.0; est.pitch_trace_hz.len()];
    let smoothed = smooth_pitch_trace(&est.pitch_trace_hz, &energy);
    let pitch_time_s: Vec<f64> =
        (0..est.pitch_trace_hz.len()).map(|t| t as f64 * cfg.frame_shift_s).collect();

    // Downsampled 8-bit spectrogram, 50 dB range below the maximum.
    let max_w = 480usize;
    let max_h = 320usize;
    let width = spec.num_frames.min(max_w);
    let height = spec.num_bins.min(max_h);
    let hi = spec.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = hi - 50.0 / 10.0 * std::f64::consts::LN_10;
    let mut values = Vec::with_capacity(width * height);
    for row in 0..width {
        let t = row * spec.num_frames / width;
        for col in 0..height {
            let f = col * spec.num_bins / height;
            let v = (spec.value(t, f) - lo) / (hi - lo);
            values.push((v.clamp(0.0, 1.0) * 255.0) as u8);
        }
    }

    let out = EstimationOutput {
        true_cfd_hz: p.cfd_hz,
        estimated_cfd_hz: est.f_d_hz,
        error_hz: est.f_d_hz - p.cfd_hz,
        is_speech: est.is_speech,
        pitch_variance_hz2: est.pitch_variance_hz2,
        secondary_peaks: est.secondary_peaks,
        gamma_hz,
        gamma_energy: acc.gamma_hat,
        pitch_time_s,
        pitch_raw_hz: est.pitch_trace_hz,
        pitch_smoothed_hz: smoothed,
        spectrogram: SpectrogramImage {
            width,
            height,
            values,
            time_span_s: received.duration_s(),
            freq_span_hz: spec.num_bins as f64 * spec.bin_hz,
        },
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Deserialize)]
struct CombParams {
    pitch_hz: f64,
    #[serde(default = "default_fft")]
    fft_size: usize,
    tau_max: usize,
    halfwidth: usize,
}

#[derive(Serialize)]
struct CombOutput {
    pitch_bin: usize,
    bin_hz: f64,
    /// (frequency Hz, weight) per tap, relative to a 0 Hz shift.
    taps: Vec<(f64, f64)>,
    /// Peak weight per tooth index.
    peaks: Vec<f64>,
}

fn comb_json(params: &str) -> Result<String, String> {
    let p: CombParams = serde_json::from_str(params).map_err(|e| e.to_string())?;
    let cfg = RakeConfig {
        fft_size: p.fft_size,
        tau_max: p.tau_max,
        comb_halfwidth: p.halfwidth,
        ..RakeConfig::default()
    };
    cfg.validate().map_err(|e| e.to_string())?;
    if !(50.0..=400.0).contains(&p.pitch_hz) {
        return Err("pitch_hz must be within 50-400 Hz".into());
    }
    let table = build_weight_table(&cfg).map_err(|e| e.to_string())?;
    let bin_hz = cfg.bin_hz();
    let pitch_bin = (p.pitch_hz / bin_hz).round() as usize;
    let comb = build_comb(pitch_bin, &table, cfg.num_bins());
    let out = CombOutput {
        pitch_bin,
        bin_hz,
        taps: comb.taps.iter().map(|&(off, w)| (off as f64 * bin_hz, w)).collect(),
        peaks: (1..=cfg.tau_max).map(|h| table.peak(h)).collect(),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

fn wrap(result: Result<String, String>) -> String {
    match result {
        Ok(json) => json,
        Err(message) => {
            serde_json::json!({ "error": message }).to_string()
        }
    }
}

/// Synthesizes a shifted voice, runs the estimator, and returns curves and
/// a spectrogram thumbnail as JSON. On failure returns `{"error": "..."}`.
#[wasm_bindgen]
pub fn run_estimation_demo(params_json: &str) -> String {
    wrap(estimation_json(params_json))
}

/// Returns the harmonic comb taps and tooth weights for one pitch as JSON.
#[wasm_bindgen]
pub fn comb_preview(params_json: &str) -> String {
    wrap(comb_json(params_json))
}
