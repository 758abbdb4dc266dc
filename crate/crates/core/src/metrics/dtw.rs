//! Dynamic time warping restricted to a Sakoe-Chiba band.
//!
//! Local cost is the squared difference, steps are the symmetric
//! `{diagonal, right, down}` pattern and the reported distance is
//! `sqrt(total_cost / path_length)`, i.e. a per-matched-cell RMS. Among
//! paths of equal minimal cost the longest one is selected.
//!
//! For series of lengths `n` and `m` the band keeps cell `(i, j)` iff
//! `|i (m - 1) - j (n - 1)| <= w * max(n - 1, m - 1)`, with half-width
//! `w = max(1, ceil(band_frac * max(n, m)))`. The condition is symmetric
//! under swapping the inputs and always contains a complete path.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// DTW distance and the matched cells of the optimal path.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpPath {
    pub distance: f64,
    pub total_cost: f64,
    /// Matched `(i, j)` cells from `(0, 0)` to `(n - 1, m - 1)`.
    pub cells: Vec<(usize, usize)>,
}

/// Band half-width in samples.
pub fn band_half_width(n: usize, m: usize, band_frac: f64) -> usize {
    let w = libm::ceil(band_frac * n.max(m) as f64);
    (w as usize).max(1)
}

/// Column range `[lo, hi]` of the band in each row.
struct Band {
    lo: Vec<usize>,
    hi: Vec<usize>,
}

impl Band {
    fn new(n: usize, m: usize, band_frac: f64) -> Self {
        let w = band_half_width(n, m, band_frac) as i128;
        let (n1, m1) = ((n - 1) as i128, (m - 1) as i128);
        let reach = w * n1.max(m1);
        let mut lo = Vec::with_capacity(n);
        let mut hi = Vec::with_capacity(n);
        for i in 0..n as i128 {
            let centre = i * m1;
            let l = ceil_div(centre - reach, n1).max(0);
            let h = (centre + reach).div_euclid(n1).min(m1);
            lo.push(l as usize);
            hi.push(h as usize);
        }
        Band { lo, hi }
    }

    fn width(&self, i: usize) -> usize {
        self.hi[i] + 1 - self.lo[i]
    }
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -((-a).div_euclid(b))
}

fn check_inputs(x: &[f64], y: &[f64], band_frac: f64) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::SeriesTooShort(x.len()));
    }
    if y.len() < 2 {
        return Err(Error::SeriesTooShort(y.len()));
    }
    if !(band_frac > 0.0 && band_frac <= 1.0) {
        return Err(Error::InvalidConfig(alloc::format!("dtw band fraction {band_frac} outside (0, 1]")));
    }
    Ok(())
}

#[derive(Clone, Copy)]
struct Cell {
    cost: f64,
    len: u32,
}

const UNREACHABLE: Cell = Cell { cost: f64::INFINITY, len: 0 };

/// Lexicographic order: lower cost first, then longer path.
#[inline]
fn better(a: Cell, b: Cell) -> bool {
    a.cost < b.cost || (a.cost == b.cost && a.len > b.len)
}

/// Banded DTW distance.
pub fn dtw(x: &[f64], y: &[f64], band_frac: f64) -> Result<f64> {
    check_inputs(x, y, band_frac)?;
    let (n, m) = (x.len(), y.len());
    let band = Band::new(n, m, band_frac);
    // Column j lives at index j + 1; index 0 and every cell outside the
    // previous row's band hold UNREACHABLE, so the recurrence needs no bounds tests.
    let mut prev = vec![UNREACHABLE; m + 1];
    let mut curr = vec![UNREACHABLE; m + 1];
    for i in 0..n {
        let (lo, hi) = (band.lo[i], band.hi[i]);
        let xi = x[i];
        let mut left = UNREACHABLE;
        for j in lo..=hi {
            let d = xi - y[j];
            let mut best = if i == 0 && j == 0 { Cell { cost: 0.0, len: 0 } } else { prev[j] };
            if better(left, best) {
                best = left;
            }
            let up = prev[j + 1];
            if better(up, best) {
                best = up;
            }
            left = Cell { cost: best.cost + d * d, len: best.len + 1 };
            curr[j + 1] = left;
        }
        // Clear stale cells the next row can reach: one left of the band and
        // everything right of it up to the next row's edge.
        curr[lo] = UNREACHABLE;
        let next_hi = if i + 1 < n { band.hi[i + 1] } else { hi };
        for c in &mut curr[hi + 2..=next_hi + 1] {
            *c = UNREACHABLE;
        }
        core::mem::swap(&mut prev, &mut curr);
    }
    let end = prev[m];
    if !end.cost.is_finite() {
        return Err(Error::BandTooNarrow);
    }
    Ok(libm::sqrt(end.cost / end.len as f64))
}

const FROM_DIAG: u8 = 0;
const FROM_LEFT: u8 = 1;
const FROM_UP: u8 = 2;

/// Banded DTW returning the optimal warping path. Memory is one byte per band cell.
pub fn dtw_path(x: &[f64], y: &[f64], band_frac: f64) -> Result<WarpPath> {
    check_inputs(x, y, band_frac)?;
    let (n, m) = (x.len(), y.len());
    let band = Band::new(n, m, band_frac);
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0usize);
    for i in 0..n {
        let last = offsets[i];
        offsets.push(last + band.width(i));
    }
    let mut steps = vec![0u8; offsets[n]];
    let mut prev = vec![UNREACHABLE; m];
    let mut curr = vec![UNREACHABLE; m];
    let (mut prev_lo, mut prev_hi) = (0usize, 0usize);
    for i in 0..n {
        let (lo, hi) = (band.lo[i], band.hi[i]);
        for j in lo..=hi {
            let d = x[i] - y[j];
            let mut best = UNREACHABLE;
            let mut step = FROM_DIAG;
            if i == 0 && j == 0 {
                best = Cell { cost: 0.0, len: 0 };
            } else {
                if i > 0 && j > 0 && j - 1 >= prev_lo && j - 1 <= prev_hi {
                    best = prev[j - 1];
                }
                if j > lo && better(curr[j - 1], best) {
                    best = curr[j - 1];
                    step = FROM_LEFT;
                }
                if i > 0 && j >= prev_lo && j <= prev_hi && better(prev[j], best) {
                    best = prev[j];
                    step = FROM_UP;
                }
            }
            steps[offsets[i] + j - lo] = step;
            curr[j] = Cell { cost: best.cost + d * d, len: best.len + 1 };
        }
        core::mem::swap(&mut prev, &mut curr);
        prev_lo = lo;
        prev_hi = hi;
    }
    let end = prev[m - 1];
    if !end.cost.is_finite() {
        return Err(Error::BandTooNarrow);
    }
    let mut cells = Vec::with_capacity(end.len as usize);
    let (mut i, mut j) = (n - 1, m - 1);
    loop {
        cells.push((i, j));
        if i == 0 && j == 0 {
            break;
        }
        match steps[offsets[i] + j - band.lo[i]] {
            FROM_LEFT => j -= 1,
            FROM_UP => i -= 1,
            _ => {
                i -= 1;
                j -= 1;
            }
        }
    }
    cells.reverse();
    Ok(WarpPath { distance: libm::sqrt(end.cost / end.len as f64), total_cost: end.cost, cells })
}
