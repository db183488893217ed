//! Carrier frequency difference (CFD) estimation for demodulated SSB
//! speech.
//!
//! A mistuned SSB receiver shifts the whole baseband speech spectrum by the
//! carrier frequency difference. This crate locates that shift with an open
//! range search: triangular harmonic combs over every (pitch, shift)
//! hypothesis are correlated with the floored log power spectrogram, the
//! best pitch is kept per frame and shift, the energies are accumulated
//! over time, and the spline-refined maximum yields a sub-bin shift
//! estimate. The pitch-trace variance at the winning shift separates speech
//! from steady digital carriers.
//!
//! ```
//! use cfd_rake::prelude::*;
//!
//! // 12 s of a vibrato voice, shifted up 300 Hz by the channel.
//! let voice = VoiceSpec {
//!     pitch_breakpoints: vec![(0.0, 120.0), (6.0, 180.0), (12.0, 130.0)],
//!     harmonic_rolloff: 0.5,
//!     num_harmonics: 5,
//!     duration_s: 12.0,
//!     voiced_intervals: vec![],
//! };
//! let clean = synth_voice(&voice, 8000).unwrap();
//! let channel = ChannelSpec { cfd_hz: 300.0, snr_db: Some(20.0), ..ChannelSpec::default() };
//! let received = apply_channel(&clean, &channel, 7).unwrap();
//!
//! let cfg = RakeConfig::default();
//! let estimate = estimate_segment(&received, &cfg, Engine::PcSingle).unwrap();
//! assert!((estimate.f_d_hz - 300.0).abs() < 5.0);
//! assert!(estimate.is_speech);
//! ```

pub mod audio_io;
pub mod comb;
pub mod config;
pub mod error;
pub mod estimator;
pub mod eval;
pub mod rake;
pub mod simulate;
pub mod spectral;
pub mod spline;

pub use config::{RakeConfig, WindowKind, ESTIMATION_SAMPLE_RATE};
pub use error::{Error, Result};

use estimator::CfdEstimate;
use rake::Engine;
use spectral::AudioSegment;

/// Runs the whole pipeline on one segment: spectrogram, energy slice with
/// the chosen engine, accumulation and refinement.
pub fn estimate_segment(
    seg: &AudioSegment,
    cfg: &RakeConfig,
    engine: Engine,
) -> Result<CfdEstimate> {
    let spec = spectral::stft_log_psd(seg, cfg)?;
    let slice = engine.compute(&spec, cfg)?;
    estimator::estimate_cfd(&slice, cfg)
}

pub mod prelude {
    pub use crate::audio_io::{read_wav, write_results, write_wav, ResultFormat, ResultRecord};
    pub use crate::comb::{build_comb, build_weight_table};
    pub use crate::config::{RakeConfig, WindowKind};
    pub use crate::estimate_segment;
    pub use crate::estimator::{
        accumulate, estimate_cfd, find_peaks, refine_peak, smooth_pitch_trace, CfdEstimate,
    };
    pub use crate::eval::{benchmark_rtf, classify_errors, pitch_error_cdf};
    pub use crate::rake::{gamma_direct, gamma_pc, reduce_max, Engine};
    pub use crate::simulate::{
        apply_channel, synth_voice, ChannelSpec, ManifestRecord, VoiceSpec,
    };
    pub use crate::spectral::{stft_log_psd, AudioSegment, LogSpectrogram};
}
