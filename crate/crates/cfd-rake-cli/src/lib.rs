//! Subcommand implementations behind the `cfd-rake` binary.

use std::path::{Path, PathBuf};

use cfd_rake::audio_io::{read_results, read_wav, ResultFormat, ResultRecord};
use cfd_rake::config::{RakeConfig, WindowKind, SUPPORTED_FFT_SIZES};
use cfd_rake::error::{Error, Result};
use cfd_rake::estimator::{estimate_cfd, smooth_pitch_trace};
use cfd_rake::eval::{benchmark_rtf, classify_errors, RtfReport};
use cfd_rake::rake::Engine;
use cfd_rake::simulate::{
    apply_channel, synth_voice, write_manifest, ChannelSpec, ManifestRecord, VoiceSpec,
};
use cfd_rake::spectral::stft_log_psd;
use cfd_rake::{estimate_segment, ESTIMATION_SAMPLE_RATE};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Loads a flat `key = value` config file over the defaults. Unknown keys
/// are rejected so typos cannot silently fall back to defaults.
pub fn load_config(path: &Path) -> Result<RakeConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = RakeConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.into(),
            detail: format!("line {}: expected key=value, got '{raw}'", lineno + 1),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| Error::Parse {
            path: path.into(),
            detail: format!("line {}: {what} '{value}' for key '{key}'", lineno + 1),
        };
        match key {
            "fft_size" => cfg.fft_size = value.parse().map_err(|_| bad("invalid integer"))?,
            "frame_shift_s" => {
                cfg.frame_shift_s = value.parse().map_err(|_| bad("invalid number"))?
            }
            "pitch_min_hz" => cfg.pitch_min_hz = value.parse().map_err(|_| bad("invalid number"))?,
            "pitch_max_hz" => cfg.pitch_max_hz = value.parse().map_err(|_| bad("invalid number"))?,
            "shift_min_hz" => cfg.shift_min_hz = value.parse().map_err(|_| bad("invalid number"))?,
            "shift_max_hz" => cfg.shift_max_hz = value.parse().map_err(|_| bad("invalid number"))?,
            "tau_max" => cfg.tau_max = value.parse().map_err(|_| bad("invalid integer"))?,
            "comb_halfwidth" => {
                cfg.comb_halfwidth = value.parse().map_err(|_| bad("invalid integer"))?
            }
            "variance_threshold_hz2" => {
                cfg.variance_threshold_hz2 = value.parse().map_err(|_| bad("invalid number"))?
            }
            "epsilon_floor" => {
                cfg.epsilon_floor = value.parse().map_err(|_| bad("invalid number"))?
            }
            "window" => {
                cfg.window = match value.to_ascii_lowercase().as_str() {
                    "hann" => WindowKind::Hann,
                    "rectangular" => WindowKind::Rectangular,
                    _ => return Err(bad("unknown window")),
                }
            }
            _ => {
                return Err(Error::Parse {
                    path: path.into(),
                    detail: format!("line {}: unknown config key '{key}'", lineno + 1),
                })
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_engine(name: &str, threads: usize) -> Result<Engine> {
    match name {
        "direct" => Ok(Engine::Direct),
        "pc" => Ok(if threads > 1 { Engine::PcMulti } else { Engine::PcSingle }),
        _ => Err(Error::Config(format!("unknown engine '{name}', expected direct|pc"))),
    }
}

/// Outcome of a batch run: the records plus per-file failures.
pub struct BatchOutcome {
    pub records: Vec<ResultRecord>,
    pub failures: Vec<(PathBuf, String)>,
}

/// Estimates every input file; failures are reported per file and the rest
/// of the batch continues. Output order follows input order.
pub fn run_estimate(
    inputs: &[PathBuf],
    cfg: &RakeConfig,
    engine: Engine,
    parallel_files: bool,
) -> BatchOutcome {
    let process = |path: &PathBuf| -> std::result::Result<ResultRecord, (PathBuf, String)> {
        let seg = read_wav(path).map_err(|e| (path.clone(), e.to_string()))?;
        let est =
            estimate_segment(&seg, cfg, engine).map_err(|e| (path.clone(), e.to_string()))?;
        Ok(ResultRecord {
            input: path.display().to_string(),
            start_s: 0.0,
            end_s: seg.duration_s(),
            f_d_hz: est.f_d_hz,
            score: est.peak_score,
            is_speech: est.is_speech,
            pitch_var_hz2: est.pitch_variance_hz2,
            secondary: est.secondary_peaks,
        })
    };

    let results: Vec<_> = if parallel_files {
        inputs.par_iter().map(process).collect()
    } else {
        inputs.iter().map(process).collect()
    };

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(fail) => failures.push(fail),
        }
    }
    BatchOutcome { records, failures }
}

/// Per-frame pitch trace of one file at its winning shift bin.
/// Returns (time_s, raw_hz, smoothed_hz) rows.
pub fn run_pitch(
    input: &Path,
    cfg: &RakeConfig,
    engine: Engine,
) -> Result<Vec<(f64, f64, f64)>> {
    let seg = read_wav(input)?;
    let spec = stft_log_psd(&seg, cfg)?;
    let slice = engine.compute(&spec, cfg)?;
    let est = estimate_cfd(&slice, cfg)?;
    let energy = vec![1.0; est.pitch_trace_hz.len()];
    let smoothed = smooth_pitch_trace(&est.pitch_trace_hz, &energy);
    Ok(est
        .pitch_trace_hz
        .iter()
        .zip(&smoothed)
        .enumerate()
        .map(|(t, (&raw, &smooth))| (t as f64 * cfg.frame_shift_s, raw, smooth))
        .collect())
}

/// Corpus generation parameters.
pub struct SimulateOpts {
    pub out_dir: PathBuf,
    pub count_per_shift: usize,
    pub cfds_hz: Vec<f64>,
    pub snr_db: Option<f64>,
    pub duration_s: f64,
    pub seed: u64,
}

/// A randomized slow-vibrato voice; deterministic in the rng stream.
pub fn random_voice(rng: &mut impl Rng, duration_s: f64) -> VoiceSpec {
    let base = rng.random_range(120.0..200.0);
    let depth = rng.random_range(25.0..45.0);
    let rate = rng.random_range(0.08..0.2);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let steps = (duration_s / 0.5).ceil() as usize;
    let pitch_breakpoints: Vec<(f64, f64)> = (0..=steps)
        .map(|i| {
            let t = (i as f64 * 0.5).min(duration_s);
            (t, base + depth * (std::f64::consts::TAU * rate * t + phase).sin())
        })
        .collect();
    // One unvoiced gap mid-utterance.
    let gap_at = rng.random_range(0.3..0.6) * duration_s;
    let gap_len = rng.random_range(0.2..0.4);
    VoiceSpec {
        pitch_breakpoints,
        harmonic_rolloff: 0.5,
        num_harmonics: 5,
        duration_s,
        voiced_intervals: vec![(0.0, gap_at), (gap_at + gap_len, duration_s)],
    }
}

/// Generates `count_per_shift` voices per shift value, writes WAVs and the
/// JSON-lines manifest, returns the records.
pub fn run_simulate(opts: &SimulateOpts) -> Result<Vec<ManifestRecord>> {
    std::fs::create_dir_all(&opts.out_dir).map_err(|e| Error::io(&opts.out_dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut records = Vec::new();
    for &cfd in &opts.cfds_hz {
        for idx in 0..opts.count_per_shift {
            let voice = random_voice(&mut rng, opts.duration_s);
            let clean = synth_voice(&voice, ESTIMATION_SAMPLE_RATE)?;
            let ch = ChannelSpec { cfd_hz: cfd, snr_db: opts.snr_db, ..ChannelSpec::default() };
            let noise_seed = rng.random();
            let received = apply_channel(&clean, &ch, noise_seed)?;
            let name = format!("sim_cfd{:04}_{:02}.wav", cfd.round() as i64, idx);
            let path = opts.out_dir.join(&name);
            cfd_rake::audio_io::write_wav(&received, &path)?;
            records.push(ManifestRecord {
                path: name,
                cfd_hz: cfd,
                snr_db: opts.snr_db,
                pitch_breakpoints: voice.pitch_breakpoints.clone(),
                duration_s: opts.duration_s,
            });
        }
    }
    write_manifest(&records, &opts.out_dir.join("manifest.jsonl"))?;
    Ok(records)
}

/// Runs the RTF benchmark grid. `audio` defaults to a synthetic voice of
/// `seconds` length when no file is given.
pub fn run_bench(
    audio: Option<&Path>,
    seconds: f64,
    fft_sizes: &[usize],
    engines: &[Engine],
) -> Result<Vec<RtfReport>> {
    let seg = match audio {
        Some(path) => read_wav(path)?,
        None => {
            let voice = VoiceSpec {
                pitch_breakpoints: vec![
                    (0.0, 130.0),
                    (seconds / 2.0, 190.0),
                    (seconds, 140.0),
                ],
                harmonic_rolloff: 0.5,
                num_harmonics: 5,
                duration_s: seconds,
                voiced_intervals: vec![],
            };
            let clean = synth_voice(&voice, ESTIMATION_SAMPLE_RATE)?;
            apply_channel(
                &clean,
                &ChannelSpec { cfd_hz: 300.0, snr_db: Some(10.0), ..ChannelSpec::default() },
                1,
            )?
        }
    };
    if seg.duration_s() < 10.0 {
        return Err(Error::Empty(format!(
            "benchmark needs at least 10 s of audio, got {:.2} s",
            seg.duration_s()
        )));
    }
    let mut reports = Vec::new();
    for &fft in fft_sizes {
        if !SUPPORTED_FFT_SIZES.contains(&fft) {
            return Err(Error::Config(format!("fft size {fft} unsupported")));
        }
        for &engine in engines {
            reports.push(benchmark_rtf(engine, fft, &seg)?);
        }
    }
    Ok(reports)
}

pub fn rtf_table(reports: &[RtfReport]) -> String {
    let mut s = String::from("engine,fft,audio_s,wall_s,rtf\n");
    for r in reports {
        s.push_str(&format!(
            "{},{},{:.3},{:.3},{:.4}\n",
            r.engine.name(),
            r.fft_size,
            r.audio_s,
            r.wall_s,
            r.rtf
        ));
    }
    s
}

/// Scores per-frame pitch traces (CSV files from the `pitch` subcommand,
/// matched to manifest entries by file stem) against the true contours;
/// returns the CDF as CSV.
pub fn run_pitch_cdf(
    pitch_dir: &Path,
    manifest_path: &Path,
    cfg: &RakeConfig,
) -> Result<String> {
    let manifest = cfd_rake::simulate::read_manifest(manifest_path)?;
    let frame_len_s = cfg.fft_size as f64 / f64::from(ESTIMATION_SAMPLE_RATE);
    let mut est_traces = Vec::new();
    let mut true_traces = Vec::new();
    for rec in &manifest {
        let stem = Path::new(&rec.path)
            .file_stem()
            .ok_or_else(|| Error::Parse {
                path: manifest_path.into(),
                detail: format!("manifest path '{}' has no file stem", rec.path),
            })?
            .to_string_lossy()
            .into_owned();
        let trace_path = pitch_dir.join(format!("{stem}.csv"));
        if !trace_path.exists() {
            continue;
        }
        let text = std::fs::read_to_string(&trace_path).map_err(|e| Error::io(&trace_path, e))?;
        let mut est = Vec::new();
        for line in text.lines().skip(1) {
            let mut cols = line.split(',');
            let (_t, hz) = (cols.next(), cols.next());
            let hz = hz.ok_or_else(|| Error::Parse {
                path: trace_path.clone(),
                detail: "expected time_s,pitch_hz columns".into(),
            })?;
            est.push(hz.parse().map_err(|e| Error::Parse {
                path: trace_path.clone(),
                detail: format!("pitch '{hz}': {e}"),
            })?);
        }
        let voice = VoiceSpec {
            pitch_breakpoints: rec.pitch_breakpoints.clone(),
            harmonic_rolloff: 0.5,
            num_harmonics: 5,
            duration_s: rec.duration_s,
            voiced_intervals: Vec::new(),
        };
        let truth = voice.true_pitch_trace(est.len(), cfg.frame_shift_s, frame_len_s);
        est_traces.push(est);
        true_traces.push(truth);
    }
    if est_traces.is_empty() {
        return Err(Error::Empty(format!(
            "no trace files under {} matched the manifest",
            pitch_dir.display()
        )));
    }
    let plain = cfd_rake::eval::pitch_error_cdf(&est_traces, &true_traces, false)?;
    let oracle = cfd_rake::eval::pitch_error_cdf(&est_traces, &true_traces, true)?;
    Ok(cfd_rake::eval::cdf_to_csv(&plain, Some(&oracle)))
}

/// Scores a results file against a manifest; returns (histogram csv,
/// gnuplot dat, matched count).
pub fn run_eval(
    results_path: &Path,
    format: ResultFormat,
    manifest_path: &Path,
) -> Result<(String, String, usize)> {
    let records = read_results(results_path, format)?;
    let manifest = cfd_rake::simulate::read_manifest(manifest_path)?;

    let mut estimates = Vec::new();
    let mut truths = Vec::new();
    let mut lengths = Vec::new();
    for rec in &records {
        let name = Path::new(&rec.input).file_name();
        let truth = manifest.iter().find(|m| {
            Path::new(&m.path).file_name() == name || m.path == rec.input
        });
        match truth {
            Some(m) => {
                estimates.push(rec.f_d_hz);
                truths.push(m.cfd_hz);
                lengths.push(m.duration_s);
            }
            None => {
                return Err(Error::Parse {
                    path: results_path.into(),
                    detail: format!("input '{}' not found in manifest", rec.input),
                })
            }
        }
    }
    if estimates.is_empty() {
        return Err(Error::Empty("no records matched the manifest".into()));
    }
    let hist = classify_errors(&estimates, &truths, &lengths)?;
    Ok((hist.to_csv(), hist.to_gnuplot(), estimates.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rake.conf");
        std::fs::write(
            &path,
            "# comment\nfft_size = 2048\npitch_max_hz=350\nwindow = rectangular\n\ntau_max=4\n",
        )
        .unwrap();
        let cfg = load_config(&path).unwrap();
        assert_eq!(cfg.fft_size, 2048);
        assert_eq!(cfg.pitch_max_hz, 350.0);
        assert_eq!(cfg.window, WindowKind::Rectangular);
        assert_eq!(cfg.tau_max, 4);
        // untouched fields keep defaults
        assert_eq!(cfg.pitch_min_hz, 50.0);
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.conf");
        std::fs::write(&path, "fft_siz = 2048\n").unwrap();
        assert!(load_config(&path).is_err());
        std::fs::write(&path, "fft_size = big\n").unwrap();
        assert!(load_config(&path).is_err());
        std::fs::write(&path, "fft_size = 1000\n").unwrap();
        assert!(load_config(&path).is_err(), "validation runs after parsing");
    }

    #[test]
    fn engine_parsing_honors_threads() {
        assert_eq!(parse_engine("direct", 4).unwrap(), Engine::Direct);
        assert_eq!(parse_engine("pc", 1).unwrap(), Engine::PcSingle);
        assert_eq!(parse_engine("pc", 2).unwrap(), Engine::PcMulti);
        assert!(parse_engine("warp", 1).is_err());
    }

    #[test]
    fn random_voice_is_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let v = random_voice(&mut rng, 12.0);
            assert!(v.pitch_breakpoints.iter().all(|&(_, f)| (50.0..=400.0).contains(&f)));
            assert_eq!(v.duration_s, 12.0);
        }
    }
}
