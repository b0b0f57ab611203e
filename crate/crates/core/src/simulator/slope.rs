use crate::error::{Error, Result};
use crate::stats::least_squares;

use super::GenerationRecord;

/// Least-squares slope of `log Z_n([y(n), ∞))` against `n` over
/// `window = (n_lo, n_hi)` for the threshold at `level_index`.
pub fn biggins_slope(records: &[GenerationRecord], level_index: usize, window: (usize, usize)) -> Result<f64> {
    let (lo, hi) = window;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in records.iter().filter(|r| r.n >= lo && r.n <= hi) {
        let c = r.level_counts[level_index];
        if c <= 0.0 {
            return Err(Error::EmptyLevelSet { n: r.n });
        }
        xs.push(r.n as f64);
        ys.push(c.ln());
    }
    if xs.len() < 2 {
        return Err(Error::InvalidSpec(format!("window {window:?} holds fewer than two generations")));
    }
    Ok(least_squares(&xs, &ys).0)
}
