use std::path::PathBuf;

/// Errors produced by the estimation pipeline and its I/O plumbing.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sample rate {got} Hz unsupported, estimation requires 8000 Hz (resample upstream)")]
    SampleRate { got: u32 },

    #[error("segment of {samples} samples is shorter than one analysis frame ({fft_size} samples)")]
    SegmentTooShort { samples: usize, fft_size: usize },

    #[error(
        "direct energy tensor needs {need} elements (budget {budget}); \
         use the streaming engine (gamma_direct_slice or gamma_pc) instead"
    )]
    TensorTooLarge { need: usize, budget: usize },

    #[error("spectrogram fft_size {spec} does not match config fft_size {cfg}")]
    FftSizeMismatch { spec: usize, cfg: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid voice spec: {0}")]
    VoiceSpec(String),

    #[error("invalid channel spec: {0}")]
    ChannelSpec(String),

    #[error("{path}: unsupported WAV: {detail}")]
    WavFormat { path: PathBuf, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record in {path}: {detail}")]
    Parse { path: PathBuf, detail: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
