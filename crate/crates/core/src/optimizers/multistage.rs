use crate::error::{invalid, Result};

/// Stepsize-halving restarts: stage `s ≥ 1` runs at `η/2^{s−1}` for
/// `R_s = 2^s·ln 4/(μηK)` rounds, with `K = 1` for global-update methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultistageSchedule {
    pub base_eta: f64,
    pub mu: f64,
    pub k: usize,
}

/// Rounds a real stage length: values within `1e−9` of an integer snap to it,
/// others round up.
fn whole_rounds(x: f64) -> usize {
    let nearest = x.round();
    let r = if (x - nearest).abs() <= 1e-9 { nearest } else { x.ceil() };
    r.max(1.0) as usize
}

impl MultistageSchedule {
    pub fn new(base_eta: f64, mu: f64, k: usize) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(invalid("multistage schedules need mu > 0"));
        }
        if !(base_eta > 0.0 && base_eta.is_finite()) || k == 0 {
            return Err(invalid("multistage schedules need eta > 0 and K >= 1"));
        }
        Ok(MultistageSchedule { base_eta, mu, k })
    }

    pub fn eta(&self, stage: usize) -> f64 {
        self.base_eta / 2f64.powi(stage as i32 - 1)
    }

    pub fn stage_length(&self, stage: usize) -> usize {
        let x = 2f64.powi(stage as i32) * 4f64.ln() / (self.mu * self.base_eta * self.k as f64);
        whole_rounds(x)
    }

    /// Stage lengths filling exactly `total` rounds, the last one cut short.
    /// The flag is set when even the first stage does not fit.
    pub fn fit(&self, total: usize) -> (Vec<usize>, bool) {
        let mut out = Vec::new();
        let mut left = total;
        let mut s = 1;
        while left > 0 {
            let len = self.stage_length(s).min(left);
            out.push(len);
            left -= len;
            s += 1;
        }
        let truncated = total > 0 && total < self.stage_length(1);
        (out, truncated)
    }
}

/// Convenience wrapper around [`MultistageSchedule::fit`].
pub fn stage_lengths(base_eta: f64, mu: f64, k: usize, total: usize) -> Result<(Vec<usize>, bool)> {
    Ok(MultistageSchedule::new(base_eta, mu, k)?.fit(total))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths_double_at_the_exact_product() {
        // μηK = ln 4 makes R_s = 2^s.
        let sched = MultistageSchedule::new(4f64.ln() / 5.0, 1.0, 5).unwrap();
        for s in 1..=10 {
            assert_eq!(sched.stage_length(s), 1 << s);
        }
        let (lengths, truncated) = sched.fit(2 + 4 + 8 + 3);
        assert_eq!(lengths, vec![2, 4, 8, 3]);
        assert!(!truncated);
    }

    #[test]
    fn stepsize_halves_per_boundary() {
        let sched = MultistageSchedule::new(0.4, 0.5, 1).unwrap();
        assert_eq!(sched.eta(1), 0.4);
        assert_eq!(sched.eta(4), 0.4 / 8.0);
    }

    #[test]
    fn short_budget_is_a_single_truncated_stage() {
        let sched = MultistageSchedule::new(0.01, 0.1, 1).unwrap();
        let (lengths, truncated) = sched.fit(5);
        assert_eq!(lengths, vec![5]);
        assert!(truncated);
    }

    #[test]
    fn fractional_lengths_round_up() {
        assert_eq!(whole_rounds(2.0000000001), 2);
        assert_eq!(whole_rounds(2.01), 3);
        assert_eq!(whole_rounds(0.2), 1);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(MultistageSchedule::new(0.1, 0.0, 1).is_err());
        assert!(MultistageSchedule::new(0.0, 1.0, 1).is_err());
    }
}
