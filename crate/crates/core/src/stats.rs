/// Binomial proportion estimate from `events` hits in `trials` draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Estimate {
    pub events: u64,
    pub trials: u64,
}

impl Estimate {
    pub fn new(events: u64, trials: u64) -> Self {
        debug_assert!(events <= trials);
        Estimate { events, trials }
    }

    pub fn p(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        self.events as f64 / self.trials as f64
    }

    /// `sqrt(p (1 - p) / trials)`
    pub fn stderr(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let p = self.p();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// `|a - b| <= k * sqrt(se_a^2 + se_b^2)`
pub fn within_combined(a: f64, se_a: f64, b: f64, se_b: f64, k: f64) -> bool {
    (a - b).abs() <= k * (se_a * se_a + se_b * se_b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_formula() {
        let e = Estimate::new(25, 100);
        assert_eq!(e.p(), 0.25);
        assert!((e.stderr() - (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-16);
        assert_eq!(Estimate::new(0, 10).stderr(), 0.0);
    }
}
