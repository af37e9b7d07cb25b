//! Precision/recall arithmetic shared by the pattern tuner and the classifier
//! evaluation.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Weighted harmonic mean of precision and recall.
///
/// `F_β = (1 + β²)·P·R / (β²·P + R)`, and 0 when both inputs are 0.
pub fn fbeta(precision: f64, recall: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    for (name, v) in [("precision", precision), ("recall", recall)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")));
        }
    }
    if precision == 0.0 && recall == 0.0 {
        return Ok(0.0);
    }
    let b2 = beta * beta;
    Ok((1.0 + b2) * precision * recall / (b2 * precision + recall))
}

/// `num / den`, or 0 when `den` is 0.
pub(crate) fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Confusion counts for one binary decision problem.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f(&self, beta: f64) -> f64 {
        fbeta(self.precision(), self.recall(), beta).expect("beta is a positive constant")
    }

    /// Tallies one binary decision.
    pub fn record(&mut self, predicted: bool, gold: bool) {
        match (predicted, gold) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => {}
        }
    }

    pub fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_points() {
        assert_eq!(fbeta(1.0, 1.0, 0.5).unwrap(), 1.0);
        assert_eq!(fbeta(0.0, 0.0, 2.0).unwrap(), 0.0);
        let f1 = fbeta(0.93, 0.84, 1.0).unwrap();
        assert!((f1 - 2.0 * 0.93 * 0.84 / (0.93 + 0.84)).abs() < 1e-15);
        assert!((f1 - 0.882_711_864_406_779_7).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_beta() {
        assert!(fbeta(0.5, 0.5, 0.0).is_err());
        assert!(fbeta(0.5, 0.5, -1.0).is_err());
        assert!(fbeta(0.5, 0.5, f64::NAN).is_err());
        assert!(fbeta(1.5, 0.5, 1.0).is_err());
    }

    #[test]
    fn zero_denominators() {
        let c = Counts::default();
        assert_eq!((c.precision(), c.recall(), c.f(1.0)), (0.0, 0.0, 0.0));
    }

    proptest! {
        #[test]
        fn f1_is_harmonic_mean(p in 0.001f64..=1.0, r in 0.001f64..=1.0) {
            let f = fbeta(p, r, 1.0).unwrap();
            let h = 2.0 / (1.0 / p + 1.0 / r);
            prop_assert!((f - h).abs() < 1e-12);
        }

        #[test]
        fn strictly_increasing(p in 0.01f64..0.99, r in 0.01f64..0.99, beta in 0.1f64..4.0, dp in 0.001f64..0.01) {
            let base = fbeta(p, r, beta).unwrap();
            prop_assert!(fbeta(p + dp, r, beta).unwrap() > base);
            prop_assert!(fbeta(p, r + dp, beta).unwrap() > base);
        }
    }
}
