use serde::{Deserialize, Serialize};

/// Two-sided 99% normal quantile.
pub const Z_TWO_SIDED_99: f64 = 2.575_829_303_548_901;
/// One-sided 99% normal quantile.
pub const Z_ONE_SIDED_99: f64 = 2.326_347_874_040_841;

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn half_width(k: u64, n: u64) -> f64 {
    let (lo, hi) = wilson_interval(k, n, Z_TWO_SIDED_99);
    0.5 * (hi - lo)
}

/// Simulated and analytic error rates at one transmit power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SerPoint {
    #[serde(with = "super::extended")]
    pub p_t_dbm: f64,
    #[serde(with = "super::extended")]
    pub ser_active: f64,
    #[serde(with = "super::extended")]
    pub ser_backscatter: f64,
    #[serde(with = "super::extended")]
    pub ser_overall: f64,
    /// Union bounds clamped to 1; NaN where no bound applies.
    #[serde(with = "super::extended")]
    pub bound_active: f64,
    #[serde(with = "super::extended")]
    pub bound_backscatter: f64,
    #[serde(with = "super::extended")]
    pub bound_overall: f64,
    pub trials: u64,
    /// Half-widths of the two-sided 99% Wilson intervals.
    #[serde(with = "super::extended")]
    pub wilson_active: f64,
    #[serde(with = "super::extended")]
    pub wilson_backscatter: f64,
    #[serde(with = "super::extended")]
    pub wilson_overall: f64,
}

impl SerPoint {
    pub fn from_counts(p_t_dbm: f64, errors: [u64; 3], trials: u64, bounds: [f64; 3]) -> Self {
        let rate = |k: u64| k as f64 / trials as f64;
        Self {
            p_t_dbm,
            ser_active: rate(errors[0]),
            ser_backscatter: rate(errors[1]),
            ser_overall: rate(errors[2]),
            bound_active: bounds[0],
            bound_backscatter: bounds[1],
            bound_overall: bounds[2],
            trials,
            wilson_active: half_width(errors[0], trials),
            wilson_backscatter: half_width(errors[1], trials),
            wilson_overall: half_width(errors[2], trials),
        }
    }

    /// Rebuilds a point from the CSV columns; half-widths are recomputed.
    pub fn from_columns(p_t_dbm: f64, sers: [f64; 3], bounds: [f64; 3], trials: u64) -> Self {
        let count = |r: f64| (r * trials as f64).round() as u64;
        Self {
            p_t_dbm,
            ser_active: sers[0],
            ser_backscatter: sers[1],
            ser_overall: sers[2],
            bound_active: bounds[0],
            bound_backscatter: bounds[1],
            bound_overall: bounds[2],
            trials,
            wilson_active: half_width(count(sers[0]), trials),
            wilson_backscatter: half_width(count(sers[1]), trials),
            wilson_overall: half_width(count(sers[2]), trials),
        }
    }

    /// `[active, backscatter, overall]`.
    pub fn sers(&self) -> [f64; 3] {
        [self.ser_active, self.ser_backscatter, self.ser_overall]
    }

    pub fn bounds(&self) -> [f64; 3] {
        [self.bound_active, self.bound_backscatter, self.bound_overall]
    }

    /// Error counts implied by the rates.
    pub fn counts(&self) -> [u64; 3] {
        self.sers().map(|r| (r * self.trials as f64).round() as u64)
    }
}
