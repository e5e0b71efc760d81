//! Energy bookkeeping and error-rate statistics.

use crate::error::{invalid, Result};
use crate::imcodec::ImConfig;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Below this many errors the Wilson interval replaces the normal one.
pub const WILSON_BELOW: u64 = 10;

/// Energy per information bit of one device block: `Q sigma_s^2 / (index bits + Q log2 M)`.
pub fn bit_energy(im: &ImConfig) -> f64 {
    im.q() as f64 * im.symbol_energy() / im.n_bits_total() as f64
}

/// `N0 = E_b / 10^{snr_db / 10}`.
pub fn snr_to_noise(im: &ImConfig, snr_db: f64) -> Result<f64> {
    if !snr_db.is_finite() {
        return Err(invalid(format!("SNR must be finite, got {snr_db}")));
    }
    Ok(bit_energy(im) / 10f64.powf(snr_db / 10.0))
}

/// A binomial error-rate estimate with a 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub errors: u64,
    pub trials: u64,
    pub rate: f64,
    pub low: f64,
    pub high: f64,
    /// `(high - low) / 2`.
    pub half_width: f64,
}

impl RateEstimate {
    /// Normal-approximation interval, or Wilson when `errors < 10`.
    pub fn new(errors: u64, trials: u64) -> Self {
        if trials == 0 {
            return Self { errors, trials, rate: 0.0, low: 0.0, high: 1.0, half_width: 0.5 };
        }
        let n = trials as f64;
        let p = errors as f64 / n;
        let (low, high) = if errors < WILSON_BELOW {
            wilson(errors, trials)
        } else {
            let hw = Z95 * (p * (1.0 - p) / n).sqrt();
            ((p - hw).max(0.0), (p + hw).min(1.0))
        };
        Self { errors, trials, rate: p, low, high, half_width: (high - low) / 2.0 }
    }

    /// Whether the two 95% intervals are disjoint.
    pub fn separated_from(&self, other: &RateEstimate) -> bool {
        self.high < other.low || other.high < self.low
    }
}

/// Wilson score interval at 95%.
pub fn wilson(errors: u64, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let spread = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let low = if errors == 0 { 0.0 } else { (center - spread).max(0.0) };
    let high = if errors == trials { 1.0 } else { (center + spread).min(1.0) };
    (low, high)
}

/// Running mean and standard error of per-sample `|n|^2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PowerMoments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl PowerMoments {
    pub fn push(&mut self, power: f64) {
        self.count += 1;
        self.sum += power;
        self.sum_sq += power * power;
    }

    pub fn merge(&mut self, other: &PowerMoments) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            return f64::INFINITY;
        }
        let n = self.count as f64;
        let var = (self.sum_sq - self.sum * self.sum / n) / (n - 1.0);
        (var.max(0.0) / n).sqrt()
    }
}
