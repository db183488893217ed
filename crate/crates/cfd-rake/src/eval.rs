//! Scoring against ground truth: error-class histograms, per-frame pitch
//! error CDF, and the real-time-factor benchmark.

use std::fmt::Write as _;
use std::time::Instant;

use crate::config::RakeConfig;
use crate::error::{Error, Result};
use crate::estimator::estimate_cfd;
use crate::rake::Engine;
use crate::spectral::{stft_log_psd, AudioSegment};

pub const ERROR_CLASS_LABELS: [&str; 5] = ["<5 Hz", "5-10 Hz", "10-50 Hz", "50-100 Hz", ">100 Hz"];
pub const LENGTH_BUCKET_LABELS: [&str; 5] = ["<0.5 s", "0.5-1 s", "1-2 s", "2-10 s", ">10 s"];

const ERROR_CLASS_EDGES_HZ: [f64; 4] = [5.0, 10.0, 50.0, 100.0];
const LENGTH_BUCKET_EDGES_S: [f64; 4] = [0.5, 1.0, 2.0, 10.0];

fn bin_index(x: f64, edges: &[f64; 4]) -> usize {
    // Left-closed classes: [0, e0), [e0, e1), ..., [e3, inf).
    edges.iter().position(|&e| x < e).unwrap_or(edges.len())
}

pub fn error_class(err_hz: f64) -> usize {
    bin_index(err_hz.abs(), &ERROR_CLASS_EDGES_HZ)
}

pub fn length_bucket(len_s: f64) -> usize {
    bin_index(len_s, &LENGTH_BUCKET_EDGES_S)
}

/// Estimation errors binned by magnitude class, stratified by speech
/// segment length.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ErrorClassHistogram {
    /// `counts[length bucket][error class]`.
    pub counts: [[u64; 5]; 5],
}

impl ErrorClassHistogram {
    pub fn add(&mut self, length_s: f64, err_hz: f64) {
        self.counts[length_bucket(length_s)][error_class(err_hz)] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn bucket_total(&self, bucket: usize) -> u64 {
        self.counts[bucket].iter().sum()
    }

    /// Class percentages per bucket; empty buckets report zeros.
    pub fn percentages(&self) -> [[f64; 5]; 5] {
        let mut out = [[0.0; 5]; 5];
        for (b, row) in self.counts.iter().enumerate() {
            let total = self.bucket_total(b);
            if total > 0 {
                for (c, &n) in row.iter().enumerate() {
                    out[b][c] = 100.0 * n as f64 / total as f64;
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("length_bucket,total");
        for label in ERROR_CLASS_LABELS {
            let _ = write!(s, ",count {label},pct {label}");
        }
        s.push('\n');
        let pct = self.percentages();
        for b in 0..5 {
            let _ = write!(s, "{},{}", LENGTH_BUCKET_LABELS[b], self.bucket_total(b));
            for (count, p) in self.counts[b].iter().zip(&pct[b]) {
                let _ = write!(s, ",{count},{p:.3}");
            }
            s.push('\n');
        }
        s
    }

    /// Stacked-bar friendly: one row per bucket, percentage per class.
    pub fn to_gnuplot(&self) -> String {
        let mut s = String::from("# bucket");
        for label in ERROR_CLASS_LABELS {
            let _ = write!(s, "\t\"{label}\"");
        }
        s.push('\n');
        let pct = self.percentages();
        for b in 0..5 {
            let _ = write!(s, "\"{}\"", LENGTH_BUCKET_LABELS[b]);
            for p in &pct[b] {
                let _ = write!(s, "\t{p:.3}");
            }
            s.push('\n');
        }
        s
    }
}

/// Bins `|estimate - truth|` per segment, stratified by segment length.
pub fn classify_errors(
    estimates: &[f64],
    truths: &[f64],
    lengths_s: &[f64],
) -> Result<ErrorClassHistogram> {
    if estimates.len() != truths.len() || estimates.len() != lengths_s.len() {
        return Err(Error::Empty(format!(
            "mismatched lists: {} estimates, {} truths, {} lengths",
            estimates.len(),
            truths.len(),
            lengths_s.len()
        )));
    }
    let mut hist = ErrorClassHistogram::default();
    for ((&est, &truth), &len) in estimates.iter().zip(truths).zip(lengths_s) {
        hist.add(len, est - truth);
    }
    Ok(hist)
}

/// Per-frame absolute pitch errors over voiced frames (those where the true
/// trace is a finite value), sorted ascending — the support of the
/// empirical CDF. With `oracle_octave` each frame scores the best of
/// {0.5, 1, 2} times the estimate.
pub fn pitch_error_cdf(
    est_traces: &[Vec<f64>],
    true_traces: &[Vec<f64>],
    oracle_octave: bool,
) -> Result<Vec<f64>> {
    if est_traces.len() != true_traces.len() {
        return Err(Error::Empty(format!(
            "mismatched trace lists: {} estimated, {} true",
            est_traces.len(),
            true_traces.len()
        )));
    }
    let mut errors = Vec::new();
    for (est, truth) in est_traces.iter().zip(true_traces) {
        if est.len() != truth.len() {
            return Err(Error::Empty(format!(
                "trace length mismatch: {} vs {}",
                est.len(),
                truth.len()
            )));
        }
        for (&e, &t) in est.iter().zip(truth) {
            if !t.is_finite() {
                continue;
            }
            let err = if oracle_octave {
                [0.5, 1.0, 2.0].iter().map(|f| (e * f - t).abs()).fold(f64::INFINITY, f64::min)
            } else {
                (e - t).abs()
            };
            errors.push(err);
        }
    }
    if errors.is_empty() {
        return Err(Error::Empty("no voiced frames to score".into()));
    }
    errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(errors)
}

/// Fraction of errors at or below `threshold`.
pub fn cdf_at(sorted_errors: &[f64], threshold: f64) -> f64 {
    let n = sorted_errors.partition_point(|&e| e <= threshold);
    n as f64 / sorted_errors.len() as f64
}

/// Empirical CDF as CSV: one row per frame with the plain error and, when
/// given, the octave-oracle error at the same cumulative fraction.
pub fn cdf_to_csv(plain_sorted: &[f64], oracle_sorted: Option<&[f64]>) -> String {
    let mut s = String::from(match oracle_sorted {
        Some(_) => "fraction,error_hz,error_hz_octave_oracle\n",
        None => "fraction,error_hz\n",
    });
    let n = plain_sorted.len();
    for (i, &e) in plain_sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / n as f64;
        match oracle_sorted {
            Some(oracle) => {
                let _ = writeln!(s, "{frac},{e},{}", oracle[i.min(oracle.len() - 1)]);
            }
            None => {
                let _ = writeln!(s, "{frac},{e}");
            }
        }
    }
    s
}

/// One real-time-factor measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct RtfReport {
    pub engine: Engine,
    pub fft_size: usize,
    pub audio_s: f64,
    pub wall_s: f64,
    pub rtf: f64,
}

/// Times the full pipeline (spectrogram, energy slice, estimate) on
/// `audio` and reports wall time over audio duration. Benchmarks should
/// run exclusively; concurrent load inflates the figure.
pub fn benchmark_rtf(engine: Engine, fft_size: usize, audio: &AudioSegment) -> Result<RtfReport> {
    let cfg = RakeConfig::with_fft_size(fft_size);
    let start = Instant::now();
    let spec = stft_log_psd(audio, &cfg)?;
    let slice = engine.compute(&spec, &cfg)?;
    let _ = estimate_cfd(&slice, &cfg)?;
    let wall_s = start.elapsed().as_secs_f64();
    let audio_s = audio.duration_s();
    Ok(RtfReport { engine, fft_size, audio_s, wall_s, rtf: wall_s / audio_s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    #[test]
    fn class_edges_are_left_closed() {
        assert_eq!(error_class(0.0), 0);
        assert_eq!(error_class(4.9), 0);
        assert_eq!(error_class(5.0), 1);
        assert_eq!(error_class(10.0), 2);
        assert_eq!(error_class(49.999), 2);
        assert_eq!(error_class(50.0), 3);
        assert_eq!(error_class(100.0), 4);
        assert_eq!(error_class(-7.0), 1);
    }

    #[test]
    fn known_errors_land_one_per_class() {
        let est = [1.0, 7.0, 20.0, 70.0, 200.0];
        let truth = [0.0; 5];
        let len = [12.0; 5];
        let hist = classify_errors(&est, &truth, &len).unwrap();
        assert_eq!(hist.counts[4], [1, 1, 1, 1, 1]);
        assert_eq!(hist.total(), 5);
    }

    #[test]
    fn buckets_stratify_by_length() {
        let est = [1.0; 5];
        let truth = [0.0; 5];
        let len = [0.3, 0.7, 1.5, 5.0, 12.0];
        let hist = classify_errors(&est, &truth, &len).unwrap();
        for b in 0..5 {
            assert_eq!(hist.bucket_total(b), 1, "bucket {b}");
            assert_eq!(hist.counts[b][0], 1);
        }
    }

    #[test]
    fn percentages_sum_to_100_per_nonempty_bucket() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let est: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..150.0)).collect();
        let truth = vec![0.0; 200];
        let len: Vec<f64> = (0..200).map(|_| rng.random_range(0.1..15.0)).collect();
        let hist = classify_errors(&est, &truth, &len).unwrap();
        assert_eq!(hist.total(), 200);
        for (b, row) in hist.percentages().iter().enumerate() {
            if hist.bucket_total(b) > 0 {
                assert!((row.iter().sum::<f64>() - 100.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mismatched_lists_are_rejected() {
        assert!(classify_errors(&[1.0], &[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn exact_estimates_give_zero_cdf_step() {
        let t = vec![vec![100.0, 150.0, f64::NAN, 200.0]];
        let e = vec![vec![100.0, 150.0, 120.0, 200.0]];
        let errs = pitch_error_cdf(&e, &t, false).unwrap();
        assert_eq!(errs.len(), 3); // NaN frame skipped
        assert!(errs.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn octave_oracle_forgives_doubling() {
        let t = vec![vec![100.0, 120.0, 140.0]];
        let e = vec![t[0].iter().map(|x| 2.0 * x).collect::<Vec<_>>()];
        let with = pitch_error_cdf(&e, &t, true).unwrap();
        assert!(with.iter().all(|&x| x == 0.0));
        let without = pitch_error_cdf(&e, &t, false).unwrap();
        assert_eq!(without, vec![100.0, 120.0, 140.0]);
    }

    #[test]
    fn uniform_perturbation_median_is_half_eps() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let eps = 8.0;
        let t: Vec<f64> = (0..4000).map(|_| rng.random_range(100.0..300.0)).collect();
        let e: Vec<f64> = t.iter().map(|x| x + rng.random_range(-eps..eps)).collect();
        let errs = pitch_error_cdf(&[e], &[t], false).unwrap();
        let median = errs[errs.len() / 2];
        assert!((median - eps / 2.0).abs() < 0.5, "median {median}");
        // sorted, i.e. a valid CDF support
        assert!(errs.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(cdf_at(&errs, eps), 1.0);
    }

    #[test]
    fn no_voiced_frames_is_an_error() {
        let t = vec![vec![f64::NAN; 4]];
        let e = vec![vec![100.0; 4]];
        assert!(pitch_error_cdf(&e, &t, false).is_err());
    }

    #[test]
    fn silence_benchmark_has_finite_positive_rtf() {
        let audio = AudioSegment::new(vec![0.0; 80000], 8000);
        let report = benchmark_rtf(Engine::PcSingle, 2048, &audio).unwrap();
        assert!(report.rtf.is_finite());
        assert!(report.rtf > 0.0);
        assert!((report.audio_s - 10.0).abs() < 1e-9);
    }

    // RTF invariance to content is timing-sensitive and lives in the
    // serialized acceptance suite.

    #[test]
    fn cdf_csv_has_one_row_per_frame() {
        let plain = vec![0.0, 1.0, 2.0, 8.0];
        let oracle = vec![0.0, 0.5, 1.0, 1.5];
        let csv = cdf_to_csv(&plain, Some(&oracle));
        assert!(csv.starts_with("fraction,error_hz,error_hz_octave_oracle"));
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.lines().last().unwrap().starts_with("1,8,1.5"));
        let plain_only = cdf_to_csv(&plain, None);
        assert!(plain_only.starts_with("fraction,error_hz\n"));
        assert_eq!(plain_only.lines().count(), 5);
    }

    #[test]
    fn csv_and_gnuplot_have_expected_shape() {
        let hist = classify_errors(&[1.0, 7.0], &[0.0, 0.0], &[0.3, 12.0]).unwrap();
        let csv = hist.to_csv();
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.starts_with("length_bucket,total"));
        let dat = hist.to_gnuplot();
        assert_eq!(dat.lines().count(), 6);
        assert!(dat.starts_with("# bucket"));
    }
}
