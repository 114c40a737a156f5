//! Comparison metrics between simulated and predicted trajectories.

use crate::error::{Error, Result};

/// Summaries cap dB values here; `rse = 0` maps to `+∞`.
pub const DB_CAP: f64 = 300.0;

/// `Δ̂` values at or below this are treated as rounding noise.
pub const PRECISION_FLOOR: f64 = 1e-26;

/// Squared relative error `((C − Ĉ)/C)²` on a square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RseMatrix {
    size: usize,
    /// Row-major; `NaN` where the theory entry is zero.
    values: Vec<f64>,
}

impl RseMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    /// `None` for a flagged entry (zero theory value).
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.values[i * self.size + j];
        (!v.is_nan()).then_some(v)
    }

    pub fn db(&self, i: usize, j: usize) -> Option<f64> {
        self.get(i, j).map(to_db)
    }

    /// Entries with a zero theory value.
    pub fn flagged(&self) -> Vec<(usize, usize)> {
        (0..self.size * self.size)
            .filter(|&k| self.values[k].is_nan())
            .map(|k| (k / self.size, k % self.size))
            .collect()
    }

    /// Largest entry over the leading `w × w` block, ignoring flagged ones.
    pub fn max_in_window(&self, w: usize) -> f64 {
        let w = w.min(self.size);
        let mut worst = 0.0f64;
        for i in 0..w {
            for j in 0..w {
                if let Some(v) = self.get(i, j) {
                    worst = worst.max(v);
                }
            }
        }
        worst
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn from_values(size: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != size * size {
            return Err(Error::InvalidDimensions(format!(
                "{} values for a {size} x {size} matrix",
                values.len()
            )));
        }
        Ok(Self { size, values })
    }
}

/// Elementwise `((theory − empirical)/theory)²` of two row-major
/// `size × size` matrices.
pub fn rse(empirical: &[f64], theory: &[f64], size: usize) -> Result<RseMatrix> {
    if empirical.len() != size * size || theory.len() != size * size {
        return Err(Error::InvalidDimensions(format!(
            "rse of {} and {} entries, expected {}",
            empirical.len(),
            theory.len(),
            size * size
        )));
    }
    let values = empirical
        .iter()
        .zip(theory)
        .map(|(&e, &c)| if c == 0.0 { f64::NAN } else { ((c - e) / c).powi(2) })
        .collect();
    Ok(RseMatrix { size, values })
}

/// `−10 log₁₀ x`; `+∞` for zero.
pub fn to_db(x: f64) -> f64 {
    if x == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * x.log10()
    }
}

/// CSV rendering of a dB value: `inf` for an exact match.
pub fn db_label(db: f64) -> String {
    if db.is_infinite() && db > 0.0 {
        "inf".to_string()
    } else {
        format!("{db}")
    }
}

pub fn capped_db(db: f64) -> f64 {
    db.min(DB_CAP)
}

/// Least-squares line through `(t, ln Δ̂(t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// First and last `t` actually used.
    pub start: usize,
    pub end: usize,
    /// The requested window ran into the precision floor and was cut.
    pub truncated: bool,
}

/// Fits `ln deltas[t]` against `t` for `t` in `start..=end`, stopping before
/// the first value at or below [`PRECISION_FLOOR`].
pub fn rate_fit(deltas: &[f64], start: usize, end: usize) -> Result<RateFit> {
    let end = end.min(deltas.len().saturating_sub(1));
    if start >= end {
        return Err(Error::InvalidParameter(format!("empty fit window {start}..={end}")));
    }
    let mut last = start;
    let mut truncated = false;
    for t in start..=end {
        let d = deltas[t];
        if !(d > PRECISION_FLOOR) || !d.is_finite() {
            truncated = true;
            break;
        }
        last = t;
    }
    if last < start + 1 {
        return Err(Error::InvalidParameter(format!(
            "fewer than two points above the precision floor from t = {start}"
        )));
    }
    let pts: Vec<(f64, f64)> = (start..=last).map(|t| (t as f64, deltas[t].ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        start,
        end: last,
        truncated,
    })
}

/// Median and interquartile range, linear interpolation between order
/// statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spread {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Spread {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

pub fn spread(values: &[f64]) -> Spread {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return Spread {
            median: f64::NAN,
            q1: f64::NAN,
            q3: f64::NAN,
        };
    }
    v.sort_by(f64::total_cmp);
    let at = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    };
    Spread {
        median: at(0.5),
        q1: at(0.25),
        q3: at(0.75),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rse_of_exact_match_is_zero_with_infinite_db() {
        let c = [1.0, 2.0, 3.0, 4.0];
        let r = rse(&c, &c, 2).unwrap();
        assert_eq!(r.get(1, 1), Some(0.0));
        assert_eq!(db_label(r.db(0, 1).unwrap()), "inf");
        assert_eq!(capped_db(r.db(0, 1).unwrap()), DB_CAP);
    }

    #[test]
    fn ten_percent_off_is_twenty_db() {
        let c = [1.0, -2.0, 3.0, 0.5];
        let e: Vec<f64> = c.iter().map(|x| 1.1 * x).collect();
        let r = rse(&e, &c, 2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((r.get(i, j).unwrap() - 0.01).abs() < 1e-14);
                assert!((r.db(i, j).unwrap() - 20.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_theory_entry_is_flagged() {
        let r = rse(&[1.0, 1.0, 1.0, 1.0], &[1.0, 0.0, 1.0, 1.0], 2).unwrap();
        assert_eq!(r.get(0, 1), None);
        assert_eq!(r.flagged(), vec![(0, 1)]);
        assert_eq!(r.max_in_window(2), 0.0);
    }

    #[test]
    fn rate_fit_stops_at_floor() {
        let d: Vec<f64> = (0..60).map(|t| 3.0 * 0.1f64.powi(t)).collect();
        let fit = rate_fit(&d, 2, 59).unwrap();
        assert!(fit.truncated);
        assert!(d[fit.end] > PRECISION_FLOOR && d[fit.end + 1] <= PRECISION_FLOOR);
        assert!((fit.slope - 0.1f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn spread_of_five() {
        let s = spread(&[5.0, 1.0, 4.0, 2.0, 3.0]);
        assert_eq!((s.median, s.q1, s.q3), (3.0, 2.0, 4.0));
    }

    proptest! {
        #[test]
        fn geometric_input_gives_exact_slope(c in 1e-3f64..1e3, r in 0.05f64..0.95, len in 3usize..20) {
            let d: Vec<f64> = (0..len).map(|t| c * r.powi(t as i32)).collect();
            let fit = rate_fit(&d, 0, len - 1).unwrap();
            prop_assert!((fit.slope - r.ln()).abs() < 1e-10);
            prop_assert!((fit.r_squared - 1.0).abs() < 1e-10);
            prop_assert!(!fit.truncated);
        }

        #[test]
        fn rse_is_nonnegative(e in proptest::collection::vec(-1e3f64..1e3, 9), c in proptest::collection::vec(0.1f64..1e3, 9)) {
            let r = rse(&e, &c, 3).unwrap();
            prop_assert!(r.values().iter().all(|&v| v >= 0.0));
        }
    }
}
