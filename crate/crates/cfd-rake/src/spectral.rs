//! Floored log power spectrogram of a mono audio segment.

use realfft::RealFftPlanner;

use crate::config::{RakeConfig, WindowKind, ESTIMATION_SAMPLE_RATE};
use crate::error::{Error, Result};

/// Mono audio with its sample rate. Samples are nominally in [-1, 1];
/// file ingest scales 16-bit PCM accordingly.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSegment {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioSegment {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        AudioSegment { samples, sample_rate }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

/// T x F matrix of floored log power values, row-major by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LogSpectrogram {
    values: Vec<f64>,
    pub num_frames: usize,
    pub num_bins: usize,
    pub frame_shift_s: f64,
    pub bin_hz: f64,
    pub fft_size: usize,
    /// log(epsilon_floor); also the fill value for out-of-range bins.
    pub log_floor: f64,
}

impl LogSpectrogram {
    pub fn from_rows(
        values: Vec<f64>,
        num_bins: usize,
        frame_shift_s: f64,
        bin_hz: f64,
        fft_size: usize,
        log_floor: f64,
    ) -> Self {
        assert_eq!(values.len() % num_bins, 0);
        let num_frames = values.len() / num_bins;
        LogSpectrogram { values, num_frames, num_bins, frame_shift_s, bin_hz, fft_size, log_floor }
    }

    #[inline]
    pub fn value(&self, frame: usize, bin: usize) -> f64 {
        self.values[frame * self.num_bins + bin]
    }

    #[inline]
    pub fn frame(&self, frame: usize) -> &[f64] {
        &self.values[frame * self.num_bins..(frame + 1) * self.num_bins]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Edge policy used by the rake: bins outside [0, F-1] read the floor.
    #[inline]
    pub fn value_or_floor(&self, frame: usize, bin: isize) -> f64 {
        if bin < 0 || bin as usize >= self.num_bins {
            self.log_floor
        } else {
            self.value(frame, bin as usize)
        }
    }
}

fn window_coefficients(kind: WindowKind, len: usize) -> Vec<f64> {
    match kind {
        WindowKind::Rectangular => vec![1.0; len],
        WindowKind::Hann => (0..len)
            .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos()))
            .collect(),
    }
}

/// Short-time log power spectrum of `seg`, one-sided, floored at
/// `cfg.epsilon_floor`.
///
/// Frames are `cfg.fft_size` samples long, advanced by the frame shift;
/// only fully covered frames are produced.
pub fn stft_log_psd(seg: &AudioSegment, cfg: &RakeConfig) -> Result<LogSpectrogram> {
    cfg.validate()?;
    if seg.sample_rate != ESTIMATION_SAMPLE_RATE {
        return Err(Error::SampleRate { got: seg.sample_rate });
    }
    let fft_size = cfg.fft_size;
    if seg.samples.len() < fft_size {
        return Err(Error::SegmentTooShort { samples: seg.samples.len(), fft_size });
    }
    let hop = cfg.hop();
    let num_frames = (seg.samples.len() - fft_size) / hop + 1;
    let num_bins = cfg.num_bins();
    let window = window_coefficients(cfg.window, fft_size);
    let log_floor = cfg.log_floor();

    let fft = RealFftPlanner::<f64>::new().plan_fft_forward(fft_size);
    let mut time = fft.make_input_vec();
    let mut freq = fft.make_output_vec();
    let mut scratch = fft.make_scratch_vec();
    debug_assert_eq!(freq.len(), num_bins);

    let mut values = Vec::with_capacity(num_frames * num_bins);
    for t in 0..num_frames {
        let start = t * hop;
        for (b, (&x, &w)) in time
            .iter_mut()
            .zip(seg.samples[start..start + fft_size].iter().zip(window.iter()))
        {
            *b = x * w;
        }
        fft.process_with_scratch(&mut time, &mut freq, &mut scratch)
            .expect("buffer lengths match the plan");
        values.extend(freq.iter().map(|c| c.norm_sqr().max(cfg.epsilon_floor).ln()));
    }

    Ok(LogSpectrogram {
        values,
        num_frames,
        num_bins,
        frame_shift_s: cfg.frame_shift_s,
        bin_hz: cfg.bin_hz(),
        fft_size,
        log_floor,
    })
}
