//! Triangular harmonic comb filters and their weight table.
//!
//! Tooth `h = 1` sits at the pitch itself and carries half the weight of
//! the first harmonic (`h = 2`); higher teeth decay as `2/h`. Around each
//! tooth a triangle of half-width `W` bins tolerates pitch quantization.

use crate::config::RakeConfig;
use crate::error::{Error, Result};

/// Weights `w(h, nu)` for tooth index `h in [1, tau_max]` and deviation
/// `nu in [-W, W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    tau_max: usize,
    halfwidth: usize,
    /// Row h-1 holds the (2W+1) triangle weights of tooth h.
    weights: Vec<f64>,
}

impl WeightTable {
    pub fn tau_max(&self) -> usize {
        self.tau_max
    }

    pub fn halfwidth(&self) -> usize {
        self.halfwidth
    }

    /// Peak weight of tooth `h`: 0.5 for the pitch, `2/h` for harmonics.
    pub fn peak(&self, h: usize) -> f64 {
        debug_assert!((1..=self.tau_max).contains(&h));
        if h == 1 {
            0.5
        } else {
            2.0 / h as f64
        }
    }

    /// Weight of tooth `h` at deviation `nu`.
    #[inline]
    pub fn weight(&self, h: usize, nu: isize) -> f64 {
        debug_assert!((1..=self.tau_max).contains(&h));
        debug_assert!(nu.unsigned_abs() <= self.halfwidth);
        self.weights[(h - 1) * (2 * self.halfwidth + 1) + (nu + self.halfwidth as isize) as usize]
    }

    /// Sum of all weights over every (h, nu) pair.
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Builds the weight table for `cfg.tau_max` teeth of half-width
/// `cfg.comb_halfwidth`.
pub fn build_weight_table(cfg: &RakeConfig) -> Result<WeightTable> {
    let tau_max = cfg.tau_max;
    let w = cfg.comb_halfwidth;
    if tau_max < 2 {
        return Err(Error::Config(
            "tau_max must be at least 2 (the pitch half-weight rule needs a first harmonic)"
                .into(),
        ));
    }
    let width = 2 * w + 1;
    let mut weights = Vec::with_capacity(tau_max * width);
    for h in 1..=tau_max {
        let peak = if h == 1 { 0.5 } else { 2.0 / h as f64 };
        for nu in -(w as isize)..=(w as isize) {
            let tri = 1.0 - nu.unsigned_abs() as f64 / (w + 1) as f64;
            weights.push(peak * tri);
        }
    }
    Ok(WeightTable { tau_max, halfwidth: w, weights })
}

/// Sparse frequency-axis taps of one pitch hypothesis.
///
/// Offsets are relative to the shift hypothesis bin; colliding offsets
/// (low pitch bins) have their weights summed. Taps are kept even when
/// they would land outside the analyzed band; the correlation applies
/// the floor-fill edge policy.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicComb {
    pub pitch_bin: usize,
    /// (bin offset, weight), sorted ascending by offset.
    pub taps: Vec<(isize, f64)>,
}

impl HarmonicComb {
    pub fn min_offset(&self) -> isize {
        self.taps.first().map_or(0, |t| t.0)
    }

    pub fn max_offset(&self) -> isize {
        self.taps.last().map_or(0, |t| t.0)
    }
}

/// Materializes the comb for `pitch_bin` from the weight table.
///
/// `_num_bins` documents the width of the band the comb will be slid
/// across; taps beyond it are retained on purpose.
pub fn build_comb(pitch_bin: usize, table: &WeightTable, _num_bins: usize) -> HarmonicComb {
    let w = table.halfwidth() as isize;
    let mut taps: Vec<(isize, f64)> = Vec::with_capacity(table.tau_max() * (2 * w as usize + 1));
    for h in 1..=table.tau_max() {
        for nu in -w..=w {
            taps.push(((h * pitch_bin) as isize + nu, table.weight(h, nu)));
        }
    }
    taps.sort_by_key(|&(off, _)| off);
    let mut merged: Vec<(isize, f64)> = Vec::with_capacity(taps.len());
    for (off, wt) in taps {
        match merged.last_mut() {
            Some((last, acc)) if *last == off => *acc += wt,
            _ => merged.push((off, wt)),
        }
    }
    HarmonicComb { pitch_bin, taps: merged }
}
