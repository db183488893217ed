//! Time accumulation, sub-bin peak refinement, crosstalker peaks, and the
//! pitch-variance speech test.

use crate::config::RakeConfig;
use crate::error::{Error, Result};
use crate::rake::GammaSlice;
use crate::spline::NaturalCubicSpline;

/// Dense refinement grid never coarser than this.
const REFINE_STEP_HZ: f64 = 0.1;
/// Bins searched on either side of the best integer bin.
const REFINE_SPAN_BINS: usize = 2;
/// Secondary peaks reported by `estimate_cfd`.
const SECONDARY_MAX_PEAKS: usize = 5;
const SECONDARY_MIN_SEPARATION_HZ: f64 = 50.0;

/// Accumulated log-energy per shift hypothesis (column sums over time),
/// with the per-frame winning pitch bins carried through.
#[derive(Debug, Clone, PartialEq)]
pub struct AccumulatedEnergy {
    pub gamma_hat: Vec<f64>,
    pub shift_bin_lo: usize,
    pub bin_hz: f64,
    pub num_frames: usize,
    /// `T x D`, same layout as the slice it came from.
    pub winning_pitch: Vec<u32>,
}

impl AccumulatedEnergy {
    pub fn num_shift_bins(&self) -> usize {
        self.gamma_hat.len()
    }

    fn shift_hz(&self, idx: usize) -> f64 {
        (self.shift_bin_lo + idx) as f64 * self.bin_hz
    }
}

/// Sub-bin refined maximum of the accumulated energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinedPeak {
    pub shift_hz: f64,
    pub score: f64,
    /// Set when the curve carried no information (all values equal); the
    /// reported position is then the lowest-frequency maximizer.
    pub flat: bool,
}

/// Final estimate for one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct CfdEstimate {
    /// Refined carrier frequency difference, Hz.
    pub f_d_hz: f64,
    pub peak_score: f64,
    /// Winning pitch per frame at the peak shift bin, Hz.
    pub pitch_trace_hz: Vec<f64>,
    pub pitch_variance_hz2: f64,
    pub is_speech: bool,
    /// Further local maxima (crosstalker candidates), best first.
    pub secondary_peaks: Vec<(f64, f64)>,
}

/// Sums `gamma_prime` over time (exact column sums).
pub fn accumulate(slice: &GammaSlice) -> AccumulatedEnergy {
    let d_n = slice.num_shift_bins;
    let mut gamma_hat = vec![0.0f64; d_n];
    for t in 0..slice.num_frames {
        for (acc, &v) in gamma_hat.iter_mut().zip(slice.row(t)) {
            *acc += v;
        }
    }
    AccumulatedEnergy {
        gamma_hat,
        shift_bin_lo: slice.shift_bin_lo,
        bin_hz: slice.bin_hz,
        num_frames: slice.num_frames,
        winning_pitch: slice.winning_pitch.clone(),
    }
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Dense spline search around knot `center`; returns (x, value) of the
/// grid argmax, ties toward lower frequency.
fn refine_around(
    spline: &NaturalCubicSpline,
    acc: &AccumulatedEnergy,
    center: usize,
) -> (f64, f64) {
    let d_n = acc.num_shift_bins();
    let lo = center.saturating_sub(REFINE_SPAN_BINS);
    let hi = (center + REFINE_SPAN_BINS).min(d_n - 1);
    let steps_per_bin = (acc.bin_hz / REFINE_STEP_HZ).ceil() as usize;
    let step = acc.bin_hz / steps_per_bin as f64;
    let x_lo = acc.shift_hz(lo);
    let total_steps = (hi - lo) * steps_per_bin;

    let mut best_x = x_lo;
    let mut best_v = spline.eval(x_lo);
    for k in 1..=total_steps {
        let x = x_lo + k as f64 * step;
        let v = spline.eval(x);
        if v > best_v {
            best_v = v;
            best_x = x;
        }
    }
    (best_x, best_v)
}

fn fit_spline(acc: &AccumulatedEnergy) -> NaturalCubicSpline {
    NaturalCubicSpline::fit(acc.shift_hz(0), acc.bin_hz, &acc.gamma_hat)
}

fn is_flat(values: &[f64]) -> bool {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(1.0)
}

/// Continuous argmax of the accumulated energy: natural cubic spline over
/// the shift grid, dense evaluation around the best integer bin.
pub fn refine_peak(acc: &AccumulatedEnergy) -> Result<RefinedPeak> {
    let d_n = acc.num_shift_bins();
    if d_n < 5 {
        return Err(Error::Empty(format!(
            "peak refinement needs at least 5 shift bins, got {d_n}"
        )));
    }
    if is_flat(&acc.gamma_hat) {
        return Ok(RefinedPeak { shift_hz: acc.shift_hz(0), score: acc.gamma_hat[0], flat: true });
    }
    let best = argmax_lowest(&acc.gamma_hat);
    let spline = fit_spline(acc);
    let (shift_hz, score) = refine_around(&spline, acc, best);
    Ok(RefinedPeak { shift_hz, score, flat: false })
}

/// Local maxima of the spline-refined accumulated energy, best first,
/// greedily suppressing neighbors closer than `min_separation_hz`.
pub fn find_peaks(
    acc: &AccumulatedEnergy,
    max_peaks: usize,
    min_separation_hz: f64,
) -> Result<Vec<(f64, f64)>> {
    if max_peaks == 0 {
        return Err(Error::Empty("find_peaks needs max_peaks >= 1".into()));
    }
    let g = &acc.gamma_hat;
    let d_n = g.len();
    if d_n < 5 {
        return Err(Error::Empty(format!(
            "peak search needs at least 5 shift bins, got {d_n}"
        )));
    }

    // Integer-bin candidates: boundary maxima and first indices of interior
    // plateaus that dominate both sides.
    let mut candidates = Vec::new();
    for i in 0..d_n {
        let rises = i == 0 || g[i] > g[i - 1];
        let mut j = i;
        while j + 1 < d_n && g[j + 1] == g[i] {
            j += 1;
        }
        let falls = j == d_n - 1 || g[j + 1] < g[i];
        if rises && falls {
            candidates.push(i);
        }
    }

    let spline = fit_spline(acc);
    let mut refined: Vec<(f64, f64)> =
        candidates.iter().map(|&c| refine_around(&spline, acc, c)).collect();
    refined.sort_by(|a, b| {
        b.1.partial_cmp(&a.1).unwrap().then(a.0.partial_cmp(&b.0).unwrap())
    });

    let mut picked: Vec<(f64, f64)> = Vec::new();
    for (x, v) in refined {
        if picked.len() == max_peaks {
            break;
        }
        if picked.iter().all(|&(px, _)| (px - x).abs() >= min_separation_hz) {
            picked.push((x, v));
        }
    }
    Ok(picked)
}

fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Full estimate from a reduced energy slice: accumulate, refine the global
/// peak, read the pitch trace at the winning integer bin, apply the
/// variance speech test, and report secondary maxima.
pub fn estimate_cfd(slice: &GammaSlice, cfg: &RakeConfig) -> Result<CfdEstimate> {
    if slice.num_frames == 0 || slice.num_shift_bins == 0 {
        return Err(Error::Empty("gamma slice has no frames or shift bins".into()));
    }
    let acc = accumulate(slice);
    let peak = refine_peak(&acc)?;
    let best_col = argmax_lowest(&acc.gamma_hat);

    let pitch_trace_hz: Vec<f64> = (0..slice.num_frames)
        .map(|t| f64::from(slice.pitch_row(t)[best_col]) * slice.bin_hz)
        .collect();
    let pitch_variance_hz2 = sample_variance(&pitch_trace_hz);
    let is_speech = pitch_variance_hz2 >= cfg.variance_threshold_hz2;

    let peaks = find_peaks(&acc, SECONDARY_MAX_PEAKS, SECONDARY_MIN_SEPARATION_HZ)?;
    let secondary_peaks = peaks.into_iter().skip(1).collect();

    Ok(CfdEstimate {
        f_d_hz: peak.shift_hz,
        peak_score: peak.score,
        pitch_trace_hz,
        pitch_variance_hz2,
        is_speech,
        secondary_peaks,
    })
}

/// Constant-velocity Kalman smoother (forward filter plus RTS backward
/// pass) over a pitch trajectory. `voiced_energy` scales per-frame
/// measurement confidence; pass uniform values for an unweighted smooth.
pub fn smooth_pitch_trace(trace: &[f64], voiced_energy: &[f64]) -> Vec<f64> {
    assert_eq!(trace.len(), voiced_energy.len());
    let t_n = trace.len();
    if t_n <= 1 {
        return trace.to_vec();
    }

    // Process/measurement noise ratio 0.01 smooths hard while a constant
    // velocity still tracks ramps without lag.
    const Q: f64 = 0.01;
    const R: f64 = 1.0;
    let mean_e = voiced_energy.iter().sum::<f64>() / t_n as f64;
    let r_t: Vec<f64> = voiced_energy
        .iter()
        .map(|&e| if mean_e > 0.0 { R / (e / mean_e).clamp(1e-3, 1e3) } else { R })
        .collect();
    // Piecewise-constant acceleration process noise, unit frame step.
    let q = [[0.25 * Q, 0.5 * Q], [0.5 * Q, Q]];

    // State [position, velocity]; P packed as [p00, p01, p11].
    let mut x = [trace[0], 0.0];
    let mut p = [1e6, 0.0, 1e6];
    let mut pred_x = vec![[0.0; 2]; t_n];
    let mut pred_p = vec![[0.0; 3]; t_n];
    let mut filt_x = vec![[0.0; 2]; t_n];
    let mut filt_p = vec![[0.0; 3]; t_n];

    for t in 0..t_n {
        let (xp, pp) = if t == 0 {
            (x, p)
        } else {
            let xp = [x[0] + x[1], x[1]];
            let pp = [
                p[0] + 2.0 * p[1] + p[2] + q[0][0],
                p[1] + p[2] + q[0][1],
                p[2] + q[1][1],
            ];
            (xp, pp)
        };
        pred_x[t] = xp;
        pred_p[t] = pp;

        let s = pp[0] + r_t[t];
        let k = [pp[0] / s, pp[1] / s];
        let resid = trace[t] - xp[0];
        x = [xp[0] + k[0] * resid, xp[1] + k[1] * resid];
        p = [
            (1.0 - k[0]) * pp[0],
            (1.0 - k[0]) * pp[1],
            pp[2] - k[1] * pp[1],
        ];
        filt_x[t] = x;
        filt_p[t] = p;
    }

    // RTS backward pass.
    let mut smooth = vec![0.0; t_n];
    let mut xs = filt_x[t_n - 1];
    smooth[t_n - 1] = xs[0];
    for t in (0..t_n - 1).rev() {
        let pf = filt_p[t];
        let pp = pred_p[t + 1];
        // C = P_f F' inv(P_pred); F' columns give [p00+p01, p01; p01+p11, p11].
        let a = [pf[0] + pf[1], pf[1]];
        let b = [pf[1] + pf[2], pf[2]];
        let det = pp[0] * pp[2] - pp[1] * pp[1];
        let inv = [pp[2] / det, -pp[1] / det, pp[0] / det];
        let c = [
            [a[0] * inv[0] + a[1] * inv[1], a[0] * inv[1] + a[1] * inv[2]],
            [b[0] * inv[0] + b[1] * inv[1], b[0] * inv[1] + b[1] * inv[2]],
        ];
        let dx = [xs[0] - pred_x[t + 1][0], xs[1] - pred_x[t + 1][1]];
        xs = [
            filt_x[t][0] + c[0][0] * dx[0] + c[0][1] * dx[1],
            filt_x[t][1] + c[1][0] * dx[0] + c[1][1] * dx[1],
        ];
        smooth[t] = xs[0];
    }
    smooth
}
