//! Free parameters of the rake search and their derived bin geometry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample rate accepted by the estimation path.
pub const ESTIMATION_SAMPLE_RATE: u32 = 8000;

/// FFT sizes the analysis supports.
pub const SUPPORTED_FFT_SIZES: [usize; 3] = [2048, 4096, 8192];

/// Analysis window applied before the FFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WindowKind {
    #[default]
    Hann,
    /// Test override: exact on-bin sinusoid behavior.
    Rectangular,
}

/// All free parameters of the estimator.
///
/// Defaults: 20 ms frame shift, 50–400 Hz pitch search, 0–3500 Hz shift
/// search, five harmonics with a ±2 bin triangular tolerance, FFT 4096.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RakeConfig {
    pub fft_size: usize,
    pub frame_shift_s: f64,
    pub pitch_min_hz: f64,
    pub pitch_max_hz: f64,
    pub shift_min_hz: f64,
    pub shift_max_hz: f64,
    /// Number of comb teeth (fundamental plus harmonics), `>= 2`.
    pub tau_max: usize,
    /// Half-width `W` of the triangular tolerance around each tooth, in bins.
    pub comb_halfwidth: usize,
    /// Pitch-trace variance below this marks the signal as non-speech.
    pub variance_threshold_hz2: f64,
    /// Power floor applied before the log; keeps silence finite.
    pub epsilon_floor: f64,
    pub window: WindowKind,
}

impl Default for RakeConfig {
    fn default() -> Self {
        RakeConfig {
            fft_size: 4096,
            frame_shift_s: 0.02,
            pitch_min_hz: 50.0,
            pitch_max_hz: 400.0,
            shift_min_hz: 0.0,
            shift_max_hz: 3500.0,
            tau_max: 5,
            comb_halfwidth: 2,
            variance_threshold_hz2: 25.0,
            epsilon_floor: 1e-12,
            window: WindowKind::Hann,
        }
    }
}

/// Integer bin ranges derived from a config at the estimation sample rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinRanges {
    pub pitch_lo: usize,
    pub pitch_hi: usize,
    pub shift_lo: usize,
    pub shift_hi: usize,
}

impl BinRanges {
    pub fn num_pitch(&self) -> usize {
        self.pitch_hi - self.pitch_lo + 1
    }

    pub fn num_shift(&self) -> usize {
        self.shift_hi - self.shift_lo + 1
    }
}

// Guards against ties like 3500 / 1.953125 == 1792.0 flipping on rounding.
const BIN_SNAP: f64 = 1e-9;

impl RakeConfig {
    pub fn with_fft_size(fft_size: usize) -> Self {
        RakeConfig { fft_size, ..Self::default() }
    }

    /// Frequency resolution of one bin, Hz.
    pub fn bin_hz(&self) -> f64 {
        f64::from(ESTIMATION_SAMPLE_RATE) / self.fft_size as f64
    }

    /// Frame hop in samples.
    pub fn hop(&self) -> usize {
        (self.frame_shift_s * f64::from(ESTIMATION_SAMPLE_RATE)).round() as usize
    }

    /// One-sided spectrum width for this FFT size.
    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn log_floor(&self) -> f64 {
        self.epsilon_floor.ln()
    }

    /// Pitch and shift hypothesis ranges in integer bins, rounded inward so
    /// every hypothesis stays inside the configured Hz ranges.
    pub fn bin_ranges(&self) -> Result<BinRanges> {
        let bin = self.bin_hz();
        let pitch_lo = ((self.pitch_min_hz / bin) - BIN_SNAP).ceil().max(1.0) as usize;
        let pitch_hi = ((self.pitch_max_hz / bin) + BIN_SNAP).floor() as usize;
        let shift_lo = ((self.shift_min_hz / bin) - BIN_SNAP).ceil().max(0.0) as usize;
        let shift_hi = ((self.shift_max_hz / bin) + BIN_SNAP).floor() as usize;
        if pitch_lo > pitch_hi {
            return Err(Error::Config(format!(
                "empty pitch bin range for {}-{} Hz at {} Hz/bin",
                self.pitch_min_hz, self.pitch_max_hz, bin
            )));
        }
        if shift_lo > shift_hi {
            return Err(Error::Config(format!(
                "empty shift bin range for {}-{} Hz at {} Hz/bin",
                self.shift_min_hz, self.shift_max_hz, bin
            )));
        }
        Ok(BinRanges { pitch_lo, pitch_hi, shift_lo, shift_hi })
    }

    // Negated comparisons also reject NaN from config files.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !SUPPORTED_FFT_SIZES.contains(&self.fft_size) {
            return Err(Error::Config(format!(
                "fft_size {} unsupported, expected one of {:?}",
                self.fft_size, SUPPORTED_FFT_SIZES
            )));
        }
        if !(self.frame_shift_s > 0.0) {
            return Err(Error::Config("frame_shift_s must be positive".into()));
        }
        if !(self.pitch_min_hz < self.pitch_max_hz) {
            return Err(Error::Config(format!(
                "pitch range [{}, {}] Hz is empty",
                self.pitch_min_hz, self.pitch_max_hz
            )));
        }
        if self.pitch_min_hz <= 0.0 {
            return Err(Error::Config("pitch_min_hz must be positive".into()));
        }
        if self.shift_min_hz < 0.0 {
            return Err(Error::Config("shift_min_hz must be non-negative".into()));
        }
        if self.shift_max_hz < self.shift_min_hz {
            return Err(Error::Config("shift_max_hz below shift_min_hz".into()));
        }
        if self.shift_max_hz > 3500.0 {
            return Err(Error::Config(
                "shift_max_hz above 3500 Hz leaves no speech bandwidth at 8 kHz".into(),
            ));
        }
        if self.tau_max < 2 {
            return Err(Error::Config(
                "tau_max must be at least 2 (the pitch half-weight rule needs a first harmonic)"
                    .into(),
            ));
        }
        if !(self.epsilon_floor > 0.0) {
            return Err(Error::Config("epsilon_floor must be positive".into()));
        }
        self.bin_ranges().map(|_| ())
    }
}
