//! Closed-form results: Hebb pixel error, T-CAM confusion probability and
//! the memristor-count capacity bookkeeping.

use std::f64::consts::PI;

use crate::special::{erf, erfc};

/// A formula evaluation with its named inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticPoint {
    pub formula: &'static str,
    pub inputs: Vec<(&'static str, f64)>,
    pub value: f64,
}

impl AnalyticPoint {
    /// `name=value` pairs joined by `;`.
    pub fn parameters(&self) -> String {
        self.inputs
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Per-pixel error of Hebb recording, `erfc(sqrt(M / 2Q)) / 2`.
pub fn hebb_pixel_error(connectivity: f64, frames: f64) -> f64 {
    0.5 * erfc((connectivity / (2.0 * frames)).sqrt())
}

/// Small-error limit `sqrt(Q / 2 pi M) exp(-M / 2Q)`; meaningful for
/// `1 << Q << M`.
pub fn hebb_pixel_error_asymptotic(connectivity: f64, frames: f64) -> f64 {
    (frames / (2.0 * PI * connectivity)).sqrt() * (-connectivity / (2.0 * frames)).exp()
}

/// Gaussian approximation of the chance that one random stored row lies
/// closer than `f N` to the probe:
/// `(erf((2f - 1) sqrt(N/2)) - erf(-sqrt(N/2))) / 2`.
pub fn tcam_confusion_prob(pixels: f64, fraction: f64) -> f64 {
    let a = (2.0 * fraction - 1.0) * (pixels / 2.0).sqrt();
    let b = -(pixels / 2.0).sqrt();
    // erf(a) - erf(b) without cancellation when both arguments sit in the
    // same tail.
    let diff = if a <= 0.0 {
        erfc(-a) - erfc(-b)
    } else {
        erf(a) - erf(b)
    };
    (0.5 * diff).clamp(0.0, 1.0)
}

/// Per-retrieval error against `Q - 1` independent distractor rows.
pub fn tcam_retrieval_error(pixels: f64, frames: usize, fraction: f64) -> f64 {
    let p = tcam_confusion_prob(pixels, fraction);
    1.0 - (1.0 - p).powi(frames.saturating_sub(1) as i32)
}

/// Exact `P(X < f N)` for `X ~ Binomial(N, 1/2)`: the distance from a random
/// row to the probe is strictly below the true row's distance.
pub fn tcam_binomial_tail(pixels: usize, fraction: f64) -> f64 {
    let limit = fraction * pixels as f64;
    let n = pixels as f64;
    let mut log_choose = 0.0f64;
    let mut total = 0.0;
    let ln2n = n * std::f64::consts::LN_2;
    for k in 0..=pixels {
        if (k as f64) >= limit {
            break;
        }
        if k > 0 {
            log_choose += ((pixels - k + 1) as f64).ln() - (k as f64).ln();
        }
        total += (log_choose - ln2n).exp();
    }
    total.min(1.0)
}

/// Frames a T-CAM with `n` memristors can hold, `n / 2N`.
pub fn tcam_capacity(memristors: f64, pixels: f64) -> f64 {
    memristors / (2.0 * pixels)
}

/// CrossNet frame capacity with `n` memristors, `n / N` (from `Q_max ~ 2M`
/// and `n = 2MN`).
pub fn crossnet_capacity(memristors: f64, pixels: f64) -> f64 {
    memristors / pixels
}

/// Worst-case T-CAM failure condition: true when a simultaneous conductance
/// fluctuation can make a perfect-fit row lose, `G_OFF,max > G_ON,max / 2`.
pub fn condition_check(g_off_max: f64, g_on_max: f64) -> bool {
    g_off_max > 0.5 * g_on_max
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hebb_reference_points() {
        let p = hebb_pixel_error(1.0, 0.18);
        assert!((p - 0.01).abs() < 0.001, "{p}");
        assert!((hebb_pixel_error(440.0, 1e9) - 0.5).abs() < 1e-3);
        let p = hebb_pixel_error(440.0, 44.0);
        assert!((p - 7.8270112900127e-4).abs() < 1e-15, "{p}");
    }

    #[test]
    fn asymptotic_point() {
        // M / 2Q = 25
        let v = hebb_pixel_error_asymptotic(50.0, 1.0);
        let expected = (1.0 / (100.0 * PI)).sqrt() * (-25.0f64).exp();
        assert!((v - expected).abs() / expected < 1e-14);
        assert!((v - 7.8e-13).abs() < 0.05e-13, "{v}");
    }

    #[test]
    fn asymptotic_ratio_tends_to_one() {
        let mut last = f64::INFINITY;
        for mq in [10.0, 40.0, 160.0, 640.0] {
            let gap =
                (hebb_pixel_error_asymptotic(mq, 1.0) / hebb_pixel_error(mq, 1.0) - 1.0).abs();
            assert!(gap < last);
            last = gap;
        }
        assert!(last < 2e-3);
    }

    #[test]
    fn tcam_limits() {
        assert!(tcam_confusion_prob(1e4, 0.0) < 1e-300);
        assert!((tcam_confusion_prob(1e4, 0.5) - 0.5).abs() < 1e-12);
        for f in [0.1, 0.3, 0.45, 0.49] {
            let s = tcam_confusion_prob(1e4, f) + tcam_confusion_prob(1e4, 1.0 - f);
            assert!((s - 1.0).abs() < 1e-6);
        }
        let mut last = 0.0;
        for i in 0..=100 {
            let p = tcam_confusion_prob(256.0, i as f64 / 100.0);
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn binomial_tail_small_cases() {
        // N = 4: P(X < 2) = (1 + 4) / 16
        assert!((tcam_binomial_tail(4, 0.5) - 5.0 / 16.0).abs() < 1e-15);
        assert_eq!(tcam_binomial_tail(4, 0.0), 0.0);
        assert!((tcam_binomial_tail(10, 1.1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn capacity_bookkeeping() {
        assert_eq!(tcam_capacity(8.0, 2.0), 2.0);
        let (n, q) = (100.0, 7.0);
        assert_eq!(tcam_capacity(2.0 * n * q, n), q);
        assert_eq!(crossnet_capacity(50.0, 50.0), 1.0);
        let m = 440.0;
        assert_eq!(crossnet_capacity(2.0 * m * 10_201.0, 10_201.0), 2.0 * m);
        for (n, pix) in [(1e6, 1e3), (8.0, 2.0), (3.0, 7.0)] {
            assert_eq!(crossnet_capacity(n, pix) / tcam_capacity(n, pix), 2.0);
        }
    }

    #[test]
    fn worst_case_condition_is_strict() {
        assert!(condition_check(0.6, 1.0));
        assert!(!condition_check(0.4, 1.0));
        assert!(!condition_check(0.5, 1.0));
    }
}
