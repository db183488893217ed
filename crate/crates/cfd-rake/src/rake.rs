//! Comb-filter energy over all pitch and shift hypotheses.
//!
//! Two engines produce the same numbers: `gamma_direct` sums the weighted
//! log-PSD taps literally (the permanent reference and benchmark baseline),
//! while `gamma_pc` realizes the same correlation of each frame with every
//! pitch comb through transform-domain multiplication along the frequency
//! axis, folding the pitch maximum on the fly.

use std::sync::Arc;

use rayon::prelude::*;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;

use crate::comb::{build_comb, build_weight_table, WeightTable};
use crate::config::RakeConfig;
use crate::error::{Error, Result};
use crate::spectral::LogSpectrogram;

/// Upper bound on materialized `T x P x D` tensor elements (~1 GiB of f64).
pub const DIRECT_TENSOR_BUDGET: usize = 1 << 27;

/// Dense `T x P x D` comb energy, pitch-major within a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaTensor {
    values: Vec<f64>,
    pub num_frames: usize,
    pub pitch_bin_lo: usize,
    pub num_pitch_bins: usize,
    pub shift_bin_lo: usize,
    pub num_shift_bins: usize,
    pub bin_hz: f64,
}

impl GammaTensor {
    #[inline]
    pub fn value(&self, frame: usize, pitch_idx: usize, shift_idx: usize) -> f64 {
        self.values
            [(frame * self.num_pitch_bins + pitch_idx) * self.num_shift_bins + shift_idx]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Per-frame maximum over pitch hypotheses and the attaining pitch bin.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSlice {
    /// `T x D`, row-major.
    pub gamma_prime: Vec<f64>,
    /// `T x D` absolute pitch bin indices.
    pub winning_pitch: Vec<u32>,
    pub num_frames: usize,
    pub shift_bin_lo: usize,
    pub num_shift_bins: usize,
    pub bin_hz: f64,
}

impl GammaSlice {
    #[inline]
    pub fn row(&self, frame: usize) -> &[f64] {
        &self.gamma_prime[frame * self.num_shift_bins..(frame + 1) * self.num_shift_bins]
    }

    #[inline]
    pub fn pitch_row(&self, frame: usize) -> &[u32] {
        &self.winning_pitch[frame * self.num_shift_bins..(frame + 1) * self.num_shift_bins]
    }
}

fn check_consistency(spec: &LogSpectrogram, cfg: &RakeConfig) -> Result<()> {
    cfg.validate()?;
    if spec.fft_size != cfg.fft_size {
        return Err(Error::FftSizeMismatch { spec: spec.fft_size, cfg: cfg.fft_size });
    }
    Ok(())
}

/// One comb energy value: the literal weighted tap sum for frame `t`,
/// pitch bin `p`, shift bin `d`.
#[inline]
fn gamma_entry(
    spec: &LogSpectrogram,
    table: &WeightTable,
    t: usize,
    p: usize,
    d: usize,
) -> f64 {
    let w = table.halfwidth() as isize;
    let mut acc = 0.0;
    for h in 1..=table.tau_max() {
        let center = (d + h * p) as isize;
        for nu in -w..=w {
            acc += table.weight(h, nu) * spec.value_or_floor(t, center + nu);
        }
    }
    acc
}

/// Materializes the full energy tensor by direct summation.
///
/// Fails with [`Error::TensorTooLarge`] beyond [`DIRECT_TENSOR_BUDGET`]
/// elements; long recordings should use [`gamma_direct_slice`] or
/// [`gamma_pc`], which never materialize the pitch axis.
pub fn gamma_direct(spec: &LogSpectrogram, cfg: &RakeConfig) -> Result<GammaTensor> {
    check_consistency(spec, cfg)?;
    let ranges = cfg.bin_ranges()?;
    let table = build_weight_table(cfg)?;
    let (num_pitch, num_shift) = (ranges.num_pitch(), ranges.num_shift());
    let need = spec.num_frames * num_pitch * num_shift;
    if need > DIRECT_TENSOR_BUDGET {
        return Err(Error::TensorTooLarge { need, budget: DIRECT_TENSOR_BUDGET });
    }

    let mut values = Vec::with_capacity(need);
    for t in 0..spec.num_frames {
        for p in ranges.pitch_lo..=ranges.pitch_hi {
            for d in ranges.shift_lo..=ranges.shift_hi {
                values.push(gamma_entry(spec, &table, t, p, d));
            }
        }
    }
    Ok(GammaTensor {
        values,
        num_frames: spec.num_frames,
        pitch_bin_lo: ranges.pitch_lo,
        num_pitch_bins: num_pitch,
        shift_bin_lo: ranges.shift_lo,
        num_shift_bins: num_shift,
        bin_hz: spec.bin_hz,
    })
}

/// Collapses the pitch axis: per (frame, shift) the maximum energy and the
/// pitch bin attaining it. Ties go to the lowest pitch bin.
pub fn reduce_max(tensor: &GammaTensor) -> GammaSlice {
    let (t_n, p_n, d_n) = (tensor.num_frames, tensor.num_pitch_bins, tensor.num_shift_bins);
    let mut gamma_prime = vec![f64::NEG_INFINITY; t_n * d_n];
    let mut winning_pitch = vec![0u32; t_n * d_n];
    for t in 0..t_n {
        let out_base = t * d_n;
        for pi in 0..p_n {
            let p = (tensor.pitch_bin_lo + pi) as u32;
            let row_base = (t * p_n + pi) * d_n;
            for d in 0..d_n {
                let v = tensor.values[row_base + d];
                if v > gamma_prime[out_base + d] {
                    gamma_prime[out_base + d] = v;
                    winning_pitch[out_base + d] = p;
                }
            }
        }
    }
    GammaSlice {
        gamma_prime,
        winning_pitch,
        num_frames: t_n,
        shift_bin_lo: tensor.shift_bin_lo,
        num_shift_bins: d_n,
        bin_hz: tensor.bin_hz,
    }
}

/// Streaming composition of `gamma_direct` and `reduce_max` for inputs
/// beyond the tensor budget: one frame's pitch-by-shift plane of the
/// tensor is materialized at a time and reduced before the next frame.
/// Output is bit-identical to `reduce_max(gamma_direct(..))`.
pub fn gamma_direct_slice(spec: &LogSpectrogram, cfg: &RakeConfig) -> Result<GammaSlice> {
    check_consistency(spec, cfg)?;
    let ranges = cfg.bin_ranges()?;
    let table = build_weight_table(cfg)?;
    let d_n = ranges.num_shift();
    let p_n = ranges.num_pitch();
    let mut gamma_prime = vec![f64::NEG_INFINITY; spec.num_frames * d_n];
    let mut winning_pitch = vec![0u32; spec.num_frames * d_n];
    let mut plane = vec![0.0f64; p_n * d_n];
    for t in 0..spec.num_frames {
        for (pi, p) in (ranges.pitch_lo..=ranges.pitch_hi).enumerate() {
            for (di, d) in (ranges.shift_lo..=ranges.shift_hi).enumerate() {
                plane[pi * d_n + di] = gamma_entry(spec, &table, t, p, d);
            }
        }
        let row = &mut gamma_prime[t * d_n..(t + 1) * d_n];
        let row_p = &mut winning_pitch[t * d_n..(t + 1) * d_n];
        for pi in 0..p_n {
            let p = (ranges.pitch_lo + pi) as u32;
            for (di, &v) in plane[pi * d_n..(pi + 1) * d_n].iter().enumerate() {
                if v > row[di] {
                    row[di] = v;
                    row_p[di] = p;
                }
            }
        }
    }
    Ok(GammaSlice {
        gamma_prime,
        winning_pitch,
        num_frames: spec.num_frames,
        shift_bin_lo: ranges.shift_lo,
        num_shift_bins: d_n,
        bin_hz: spec.bin_hz,
    })
}

/// Transform lengths with dominant power-of-two factors; measured fast on
/// rustfft's mixed-radix paths.
const FAST_LEN_LADDER: [usize; 20] = [
    512, 640, 768, 896, 1024, 1152, 1280, 1536, 1792, 2048, 2304, 2560, 2880, 3072, 3584, 4096,
    4608, 5120, 5760, 6144,
];

/// Smallest ladder length not below `n`, falling back to the next power of
/// two beyond the ladder.
fn next_fast_len(n: usize) -> usize {
    for &len in &FAST_LEN_LADDER {
        if len >= n {
            return len;
        }
    }
    n.next_power_of_two()
}

/// Pitches sharing one transform length, with their precomputed
/// conjugated filter half-spectra.
struct PitchGroup {
    /// Index of the first pitch of the group (relative to `pitch_lo`).
    first: usize,
    fft_len: usize,
    fwd: Arc<dyn RealToComplex<f64>>,
    inv: Arc<dyn ComplexToReal<f64>>,
    filter_spectra: Vec<Vec<Complex64>>,
}

/// Geometry and per-group transforms shared by every frame of one
/// `gamma_pc` run.
struct PcPlan {
    pitch_lo: usize,
    shift_lo: usize,
    num_shift: usize,
    /// Lowest absolute bin index any tap can read (`shift_lo + pitch_lo - W`).
    ext_lo: isize,
    /// Extended signal length covering every readable bin.
    ext_len: usize,
    groups: Vec<PitchGroup>,
    max_fft_len: usize,
}

impl PcPlan {
    fn new(spec: &LogSpectrogram, cfg: &RakeConfig) -> Result<PcPlan> {
        let ranges = cfg.bin_ranges()?;
        let table = build_weight_table(cfg)?;
        let w = cfg.comb_halfwidth as isize;
        let ext_lo = (ranges.shift_lo + ranges.pitch_lo) as isize - w;
        let ext_hi = (ranges.shift_hi + cfg.tau_max * ranges.pitch_hi) as isize + w;
        let ext_len = (ext_hi - ext_lo + 1) as usize;
        let num_shift = ranges.num_shift();

        // Each group's signal slice is anchored at its first pitch, so a
        // pitch at index pi reads correlation lags [pi - anchor, ..). The
        // lag span plus the filter span bounds the transform length that
        // keeps the circular correlation linear over every used lag.
        let comb_span =
            |p: usize| -> usize { ((cfg.tau_max - 1) * p + 2 * w as usize + 1).max(1) };

        let mut planner = RealFftPlanner::<f64>::new();
        let mut groups: Vec<PitchGroup> = Vec::new();
        let mut max_fft_len = 0;
        for (pi, p) in (ranges.pitch_lo..=ranges.pitch_hi).enumerate() {
            let fits = groups.last().is_some_and(|g: &PitchGroup| {
                (pi - g.first) + num_shift + comb_span(p) - 1 <= g.fft_len
            });
            if !fits {
                let fft_len = next_fast_len(num_shift + comb_span(p) - 1);
                groups.push(PitchGroup {
                    first: pi,
                    fft_len,
                    fwd: planner.plan_fft_forward(fft_len),
                    inv: planner.plan_fft_inverse(fft_len),
                    filter_spectra: Vec::new(),
                });
                max_fft_len = max_fft_len.max(fft_len);
            }
            let group = groups.last_mut().expect("group just ensured");

            let comb = build_comb(p, &table, spec.num_bins);
            let origin = comb.min_offset();
            let mut time = group.fwd.make_input_vec();
            for &(off, weight) in &comb.taps {
                time[(off - origin) as usize] = weight;
            }
            let mut freq = group.fwd.make_output_vec();
            let mut scratch = group.fwd.make_scratch_vec();
            group
                .fwd
                .process_with_scratch(&mut time, &mut freq, &mut scratch)
                .expect("buffer lengths match the plan");
            // Inverse-transform scaling baked in here keeps the hot loops
            // multiply-free.
            let inv_n = 1.0 / fft_len as f64;
            group.filter_spectra.push(freq.iter().map(|c| c.conj() * inv_n).collect());
        }

        Ok(PcPlan {
            pitch_lo: ranges.pitch_lo,
            shift_lo: ranges.shift_lo,
            num_shift,
            ext_lo,
            ext_len,
            groups,
            max_fft_len,
        })
    }
}

/// Frames handled per pass so each filter spectrum is read once per tile
/// instead of once per frame. Every frame's arithmetic stays independent.
const FRAME_TILE: usize = 8;

struct TileBuffers {
    time: Vec<f64>,
    /// One forward half-spectrum per frame of the tile.
    freq: Vec<Vec<Complex64>>,
    work: Vec<Complex64>,
    lags: Vec<f64>,
    scratch: Vec<Complex64>,
}

impl TileBuffers {
    fn new(plan: &PcPlan) -> TileBuffers {
        let n = plan.max_fft_len;
        let scratch_len = plan
            .groups
            .iter()
            .map(|g| g.fwd.get_scratch_len().max(g.inv.get_scratch_len()))
            .max()
            .unwrap_or(1);
        TileBuffers {
            time: vec![0.0; n],
            freq: vec![vec![Complex64::default(); n / 2 + 1]; FRAME_TILE],
            work: vec![Complex64::default(); n / 2 + 1],
            lags: vec![0.0; n],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }
}

/// Correlates a tile of frames with every pitch comb in the transform
/// domain and folds the pitch maximum into each frame's output row.
fn process_tile(
    spec: &LogSpectrogram,
    plan: &PcPlan,
    bufs: &mut TileBuffers,
    first_frame: usize,
    gamma_out: &mut [f64],
    pitch_out: &mut [u32],
) {
    gamma_out.fill(f64::NEG_INFINITY);
    let d_n = plan.num_shift;
    let frames = gamma_out.len() / d_n;
    for group in &plan.groups {
        let n = group.fft_len;
        let half = n / 2 + 1;
        // The group's signal slice starts at its anchor pitch.
        let fill = (plan.ext_len - group.first).min(n);
        for f in 0..frames {
            for (a, slot) in bufs.time[..fill].iter_mut().enumerate() {
                *slot = spec
                    .value_or_floor(first_frame + f, plan.ext_lo + (group.first + a) as isize);
            }
            bufs.time[fill..n].fill(0.0);
            group
                .fwd
                .process_with_scratch(
                    &mut bufs.time[..n],
                    &mut bufs.freq[f][..half],
                    &mut bufs.scratch,
                )
                .expect("buffer lengths match the plan");
        }

        for (k, filter) in group.filter_spectra.iter().enumerate() {
            let pi = group.first + k;
            // Comb for pitch bin p starts W bins below its first tooth, so
            // its shift lags sit k positions into this group's correlation.
            let p = (plan.pitch_lo + pi) as u32;
            for f in 0..frames {
                for ((wk, &sg), &fl) in
                    bufs.work[..half].iter_mut().zip(&bufs.freq[f][..half]).zip(filter)
                {
                    *wk = sg * fl;
                }
                group
                    .inv
                    .process_with_scratch(
                        &mut bufs.work[..half],
                        &mut bufs.lags[..n],
                        &mut bufs.scratch,
                    )
                    .expect("buffer lengths match the plan");

                let row = &mut gamma_out[f * d_n..(f + 1) * d_n];
                let row_p = &mut pitch_out[f * d_n..(f + 1) * d_n];
                for (di, &v) in bufs.lags[k..k + d_n].iter().enumerate() {
                    if v > row[di] {
                        row[di] = v;
                        row_p[di] = p;
                    }
                }
            }
        }
    }
}

fn gamma_pc_impl(
    spec: &LogSpectrogram,
    cfg: &RakeConfig,
    parallel: bool,
) -> Result<GammaSlice> {
    check_consistency(spec, cfg)?;
    let plan = PcPlan::new(spec, cfg)?;
    let d_n = plan.num_shift;
    let t_n = spec.num_frames;
    let mut gamma_prime = vec![0.0f64; t_n * d_n];
    let mut winning_pitch = vec![0u32; t_n * d_n];

    let tile_span = FRAME_TILE * d_n;
    if parallel {
        gamma_prime
            .par_chunks_mut(tile_span)
            .zip(winning_pitch.par_chunks_mut(tile_span))
            .enumerate()
            .for_each_init(
                || TileBuffers::new(&plan),
                |bufs, (tile, (g, w))| {
                    process_tile(spec, &plan, bufs, tile * FRAME_TILE, g, w);
                },
            );
    } else {
        let mut bufs = TileBuffers::new(&plan);
        for (tile, (g, w)) in gamma_prime
            .chunks_mut(tile_span)
            .zip(winning_pitch.chunks_mut(tile_span))
            .enumerate()
        {
            process_tile(spec, &plan, &mut bufs, tile * FRAME_TILE, g, w);
        }
    }

    Ok(GammaSlice {
        gamma_prime,
        winning_pitch,
        num_frames: t_n,
        shift_bin_lo: plan.shift_lo,
        num_shift_bins: d_n,
        bin_hz: spec.bin_hz,
    })
}

/// Fast engine: per-frame correlation with every pitch comb through
/// transform-domain multiplication, reduced over pitch on the fly.
/// Matches `reduce_max(gamma_direct(..))` within 1e-6 per entry.
pub fn gamma_pc(spec: &LogSpectrogram, cfg: &RakeConfig) -> Result<GammaSlice> {
    gamma_pc_impl(spec, cfg, false)
}

/// `gamma_pc` with frames distributed across the rayon pool. Results are
/// independent of the schedule.
pub fn gamma_pc_par(spec: &LogSpectrogram, cfg: &RakeConfig) -> Result<GammaSlice> {
    gamma_pc_impl(spec, cfg, true)
}

/// Which engine computes the reduced energy slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    /// Literal tap summation, single core.
    Direct,
    /// Transform-domain correlation, single core.
    PcSingle,
    /// Transform-domain correlation across the rayon pool.
    PcMulti,
}

impl Engine {
    pub fn compute(self, spec: &LogSpectrogram, cfg: &RakeConfig) -> Result<GammaSlice> {
        match self {
            Engine::Direct => gamma_direct_slice(spec, cfg),
            Engine::PcSingle => gamma_pc(spec, cfg),
            Engine::PcMulti => gamma_pc_par(spec, cfg),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Engine::Direct => "direct",
            Engine::PcSingle => "pc-single",
            Engine::PcMulti => "pc-multi",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::LogSpectrogram;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn spec_from(rows: Vec<f64>, num_bins: usize, cfg: &RakeConfig) -> LogSpectrogram {
        LogSpectrogram::from_rows(
            rows,
            num_bins,
            cfg.frame_shift_s,
            cfg.bin_hz(),
            cfg.fft_size,
            cfg.log_floor(),
        )
    }

    fn small_cfg() -> RakeConfig {
        RakeConfig {
            fft_size: 2048,
            pitch_min_hz: 50.0,
            pitch_max_hz: 200.0,
            shift_min_hz: 0.0,
            shift_max_hz: 300.0,
            tau_max: 3,
            comb_halfwidth: 1,
            ..RakeConfig::default()
        }
    }

    fn random_spec(cfg: &RakeConfig, frames: usize, seed: u64) -> LogSpectrogram {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = cfg.num_bins();
        let rows = (0..frames * f).map(|_| rng.random_range(-30.0..5.0)).collect();
        spec_from(rows, f, cfg)
    }

    #[test]
    fn constant_input_gives_total_weight_times_constant() {
        // Ranges chosen so every comb tap stays inside the band.
        let cfg = small_cfg();
        let c = -3.25;
        let spec = spec_from(vec![c; 2 * cfg.num_bins()], cfg.num_bins(), &cfg);
        let tensor = gamma_direct(&spec, &cfg).unwrap();
        let table = build_weight_table(&cfg).unwrap();
        let expect = c * table.total();
        for &v in tensor.values() {
            assert!((v - expect).abs() < 1e-9, "{v} vs {expect}");
        }
    }

    #[test]
    fn single_frame_impulse_hand_enumerated() {
        let mut cfg = RakeConfig::with_fft_size(2048);
        let bin = cfg.bin_hz();
        cfg.pitch_min_hz = 10.0 * bin;
        cfg.pitch_max_hz = 10.0 * bin + 0.1;
        cfg.shift_min_hz = 0.0;
        cfg.shift_max_hz = 0.0;
        cfg.tau_max = 3;
        cfg.comb_halfwidth = 0;
        let floor = cfg.log_floor();
        let mut row = vec![floor; cfg.num_bins()];
        row[30] = 0.0;
        let spec = spec_from(row, cfg.num_bins(), &cfg);
        let tensor = gamma_direct(&spec, &cfg).unwrap();
        assert_eq!(tensor.num_pitch_bins, 1);
        assert_eq!(tensor.num_shift_bins, 1);
        let expect = (0.5 + 1.0) * floor + (2.0 / 3.0) * 0.0;
        assert!((tensor.value(0, 0, 0) - expect).abs() < 1e-12);
    }

    // Independent brute-force oracle: recomputes weights from the design
    // rules, never touching WeightTable or the engines.
    fn oracle_gamma(
        spec: &LogSpectrogram,
        cfg: &RakeConfig,
        t: usize,
        p: usize,
        d: usize,
    ) -> f64 {
        let w = cfg.comb_halfwidth as isize;
        let mut acc = 0.0;
        for h in 1..=cfg.tau_max {
            let peak = if h == 1 { 0.5 } else { 2.0 / h as f64 };
            for nu in -w..=w {
                let tri = 1.0 - nu.unsigned_abs() as f64 / (w + 1) as f64;
                let idx = d as isize + (h * p) as isize + nu;
                let val = if idx < 0 || idx as usize >= spec.num_bins {
                    spec.log_floor
                } else {
                    spec.value(t, idx as usize)
                };
                acc += peak * tri * val;
            }
        }
        acc
    }

    #[test]
    fn direct_matches_brute_force_oracle() {
        let mut cfg = small_cfg();
        cfg.tau_max = 2;
        cfg.comb_halfwidth = 1;
        let spec = random_spec(&cfg, 4, 11);
        let tensor = gamma_direct(&spec, &cfg).unwrap();
        let r = cfg.bin_ranges().unwrap();
        for t in 0..4 {
            for (pi, p) in (r.pitch_lo..=r.pitch_hi).enumerate() {
                for (di, d) in (r.shift_lo..=r.shift_hi).enumerate() {
                    let expect = oracle_gamma(&spec, &cfg, t, p, d);
                    assert!(
                        (tensor.value(t, pi, di) - expect).abs() < 1e-9,
                        "t={t} p={p} d={d}"
                    );
                }
            }
        }
    }

    #[test]
    fn reduce_max_matches_exhaustive_scan_and_tie_break() {
        let cfg = small_cfg();
        let spec = random_spec(&cfg, 3, 5);
        let tensor = gamma_direct(&spec, &cfg).unwrap();
        let slice = reduce_max(&tensor);
        for t in 0..tensor.num_frames {
            for d in 0..tensor.num_shift_bins {
                let mut best = f64::NEG_INFINITY;
                let mut best_p = 0;
                for pi in 0..tensor.num_pitch_bins {
                    let v = tensor.value(t, pi, d);
                    if v > best {
                        best = v;
                        best_p = tensor.pitch_bin_lo + pi;
                    }
                }
                assert_eq!(slice.row(t)[d], best);
                assert_eq!(slice.pitch_row(t)[d] as usize, best_p);
            }
        }

        // Forced tie at two pitch bins: the lower one wins.
        let mut tensor = tensor;
        let d_n = tensor.num_shift_bins;
        let hi = tensor.values.iter().cloned().fold(f64::MIN, f64::max) + 1.0;
        tensor.values[2 * d_n] = hi; // t=0, pitch idx 2, d=0
        tensor.values[7 * d_n] = hi; // t=0, pitch idx 7, d=0
        let slice = reduce_max(&tensor);
        assert_eq!(slice.pitch_row(0)[0] as usize, tensor.pitch_bin_lo + 2);
    }

    #[test]
    fn single_pitch_plane_is_identity() {
        let mut cfg = small_cfg();
        let bin = cfg.bin_hz();
        cfg.pitch_min_hz = 20.0 * bin;
        cfg.pitch_max_hz = 20.0 * bin + 0.1;
        let spec = random_spec(&cfg, 2, 9);
        let tensor = gamma_direct(&spec, &cfg).unwrap();
        assert_eq!(tensor.num_pitch_bins, 1);
        let slice = reduce_max(&tensor);
        assert_eq!(slice.gamma_prime, tensor.values);
        assert!(slice.winning_pitch.iter().all(|&p| p == 20));
    }

    #[test]
    fn streaming_direct_is_bit_identical_to_tensor_reduce() {
        let cfg = small_cfg();
        let spec = random_spec(&cfg, 5, 21);
        let a = reduce_max(&gamma_direct(&spec, &cfg).unwrap());
        let b = gamma_direct_slice(&spec, &cfg).unwrap();
        assert_eq!(a, b);
    }

    fn assert_engines_agree(spec: &LogSpectrogram, cfg: &RakeConfig) {
        let direct = reduce_max(&gamma_direct(spec, cfg).unwrap());
        let pc = gamma_pc(spec, cfg).unwrap();
        assert_eq!(direct.num_shift_bins, pc.num_shift_bins);
        assert_eq!(direct.shift_bin_lo, pc.shift_bin_lo);
        let table = build_weight_table(cfg).unwrap();
        for t in 0..spec.num_frames {
            for d in 0..direct.num_shift_bins {
                let i = t * direct.num_shift_bins + d;
                let dv = direct.gamma_prime[i];
                let pv = pc.gamma_prime[i];
                assert!((dv - pv).abs() < 1e-6, "t={t} d={d}: direct {dv} pc {pv}");
                // The claimed winner must attain the maximum (up to fft noise).
                let claimed = gamma_entry(
                    spec,
                    &table,
                    t,
                    pc.winning_pitch[i] as usize,
                    pc.shift_bin_lo + d,
                );
                assert!((claimed - dv).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn engines_agree_on_random_input() {
        let cfg = small_cfg();
        let spec = random_spec(&cfg, 5, 33);
        assert_engines_agree(&spec, &cfg);
    }

    #[test]
    fn engines_agree_with_default_ranges() {
        let cfg = RakeConfig::with_fft_size(2048);
        let spec = random_spec(&cfg, 3, 77);
        assert_engines_agree(&spec, &cfg);
    }

    #[test]
    fn parallel_pc_is_bit_identical() {
        let cfg = small_cfg();
        let spec = random_spec(&cfg, 7, 13);
        let a = gamma_pc(&spec, &cfg).unwrap();
        let b = gamma_pc_par(&spec, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_input_is_shift_invariant_in_the_interior() {
        let cfg = small_cfg();
        let c = 1.5;
        let spec = spec_from(vec![c; cfg.num_bins()], cfg.num_bins(), &cfg);
        let pc = gamma_pc(&spec, &cfg).unwrap();
        // All combs fit the band for every d in this geometry.
        let first = pc.gamma_prime[0];
        for &v in &pc.gamma_prime {
            assert!((v - first).abs() < 1e-9);
        }
    }

    #[test]
    fn synthetic_comb_is_found_at_its_shift_and_pitch() {
        let cfg = RakeConfig::with_fft_size(2048);
        let (p0, d0) = (40usize, 100usize);
        let floor = cfg.log_floor();
        let mut row = vec![floor; cfg.num_bins()];
        for h in 1..=cfg.tau_max {
            row[d0 + h * p0] = 0.0;
        }
        let spec = spec_from(row, cfg.num_bins(), &cfg);
        let pc = gamma_pc(&spec, &cfg).unwrap();
        let d_rel = pc
            .row(0)
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(pc.shift_bin_lo + d_rel, d0);
        assert_eq!(pc.pitch_row(0)[d_rel] as usize, p0);
    }

    #[test]
    fn frame_order_permutes_rows() {
        let cfg = small_cfg();
        let spec = random_spec(&cfg, 4, 55);
        let pc = gamma_pc(&spec, &cfg).unwrap();

        let f = cfg.num_bins();
        let perm = [2usize, 0, 3, 1];
        let mut rows = vec![0.0; 4 * f];
        for (dst, &src) in perm.iter().enumerate() {
            rows[dst * f..(dst + 1) * f].copy_from_slice(spec.frame(src));
        }
        let permuted = spec_from(rows, f, &cfg);
        let pc_perm = gamma_pc(&permuted, &cfg).unwrap();
        for (dst, &src) in perm.iter().enumerate() {
            assert_eq!(pc_perm.row(dst), pc.row(src));
        }
    }

    #[test]
    fn raising_one_value_never_lowers_energy() {
        let mut cfg = small_cfg();
        cfg.shift_max_hz = 100.0;
        cfg.pitch_max_hz = 100.0;
        let spec = random_spec(&cfg, 1, 3);
        let base = gamma_direct(&spec, &cfg).unwrap();

        let f = cfg.num_bins();
        let mut rows = spec.values().to_vec();
        rows[57] += 2.0;
        let bumped = spec_from(rows, f, &cfg);
        let after = gamma_direct(&bumped, &cfg).unwrap();
        for (a, b) in base.values().iter().zip(after.values()) {
            assert!(b >= a);
        }
    }

    #[test]
    fn shift_covariance_in_the_interior() {
        let cfg = small_cfg();
        let spec = random_spec(&cfg, 2, 99);
        let pc = gamma_pc(&spec, &cfg).unwrap();

        let k = 7usize;
        let f = cfg.num_bins();
        let floor = cfg.log_floor();
        let mut rows = vec![floor; 2 * f];
        for t in 0..2 {
            for bin in k..f {
                rows[t * f + bin] = spec.value(t, bin - k);
            }
        }
        let shifted = spec_from(rows, f, &cfg);
        let pc_shifted = gamma_pc(&shifted, &cfg).unwrap();

        let r = cfg.bin_ranges().unwrap();
        let max_off = cfg.tau_max * r.pitch_hi + cfg.comb_halfwidth;
        for t in 0..2 {
            for d in r.shift_lo..=r.shift_hi {
                let d_shift = d + k;
                // Interior: no tap of either evaluation crosses a band edge.
                if d_shift > r.shift_hi || d_shift + max_off >= f {
                    continue;
                }
                let a = pc.row(t)[d - r.shift_lo];
                let b = pc_shifted.row(t)[d_shift - r.shift_lo];
                assert!((a - b).abs() < 1e-6, "t={t} d={d}");
            }
        }
    }

    #[test]
    fn oversized_tensor_is_rejected_with_guidance() {
        let cfg = RakeConfig::default();
        let f = cfg.num_bins();
        let frames = 450; // 450 * 179 * 1793 > 2^27
        let spec = spec_from(vec![0.0; frames * f], f, &cfg);
        match gamma_direct(&spec, &cfg) {
            Err(Error::TensorTooLarge { need, budget }) => {
                assert!(need > budget);
            }
            other => panic!("expected TensorTooLarge, got {other:?}"),
        }
    }

    #[test]
    fn fast_lengths_cover_any_request() {
        assert_eq!(next_fast_len(1), 512);
        assert_eq!(next_fast_len(2791), 2880);
        assert_eq!(next_fast_len(4096), 4096);
        // beyond the ladder: next power of two
        assert_eq!(next_fast_len(7000), 8192);
        for n in [1usize, 900, 2049, 6145, 10000] {
            assert!(next_fast_len(n) >= n);
        }
    }
}
