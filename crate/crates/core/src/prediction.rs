//! Per-vertex prediction values.

use crate::error::{Error, Result};

/// A vector of real-valued predictions, one per graph vertex.
///
/// Construction validates that every entry is finite and caches the range,
/// which downstream code uses for representative-value bounds and for the
/// big-M constant of the exported quadratic program.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionVector {
    values: Vec<f64>,
    min: f64,
    max: f64,
}

impl PredictionVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidData("prediction vector is empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "prediction at index {i} is not finite ({})",
                values[i]
            )));
        }
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { values, min, max })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    /// Sum of all entries, compensated (Kahan) so that aggregate/restore
    /// round trips preserve totals at fine tolerances.
    pub fn sum(&self) -> f64 {
        kahan_sum(self.values.iter().cloned())
    }
}

impl std::ops::Index<usize> for PredictionVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Compensated summation.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Euclidean norm of the difference of two equal-length slices.
pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    kahan_sum(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y))).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(PredictionVector::new(vec![0.0, f64::NAN]).is_err());
        assert!(PredictionVector::new(vec![f64::INFINITY]).is_err());
        assert!(PredictionVector::new(vec![]).is_err());
    }

    #[test]
    fn caches_range() {
        let p = PredictionVector::new(vec![3.0, -1.0, 2.0]).unwrap();
        assert_eq!(p.min(), -1.0);
        assert_eq!(p.max(), 3.0);
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn kahan_beats_naive_on_adversarial_input() {
        // 1 followed by many tiny values that a naive sum drops entirely.
        let values: Vec<f64> = std::iter::once(1.0)
            .chain(std::iter::repeat(1e-16).take(10_000))
            .collect();
        let naive: f64 = values.iter().sum();
        let compensated = kahan_sum(values.iter().cloned());
        assert!((compensated - (1.0 + 1e-12)).abs() < 1e-15);
        // The naive sum loses every tiny addend at this magnitude.
        assert_eq!(naive, 1.0);
    }
}
