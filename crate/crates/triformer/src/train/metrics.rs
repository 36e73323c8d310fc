//! Confusion matrix and the OA / AA / Kappa metric suite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `C x C` prediction counts; rows are true classes, columns predicted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix { classes, counts: vec![0; classes * classes] }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Records one evaluated sample (0-based class indices).
    pub fn record(&mut self, true_class: usize, predicted: usize) {
        assert!(true_class < self.classes && predicted < self.classes, "class out of range");
        self.counts[true_class * self.classes + predicted] += 1;
    }

    pub fn count(&self, true_class: usize, predicted: usize) -> u64 {
        self.counts[true_class * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.classes, other.classes, "class count mismatch");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// Builds the matrix from parallel truth/prediction lists.
    pub fn from_pairs(classes: usize, pairs: &[(usize, usize)]) -> Self {
        let mut cm = ConfusionMatrix::new(classes);
        for &(t, p) in pairs {
            cm.record(t, p);
        }
        cm
    }

    fn checked(&self) -> Result<f64> {
        let total = self.total();
        if self.classes == 0 || total == 0 {
            return Err(Error::data("empty confusion matrix"));
        }
        Ok(total as f64)
    }

    fn row_sum(&self, r: usize) -> u64 {
        self.counts[r * self.classes..(r + 1) * self.classes].iter().sum()
    }

    fn col_sum(&self, c: usize) -> u64 {
        (0..self.classes).map(|r| self.count(r, c)).sum()
    }

    fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.count(i, i)).sum()
    }
}

/// Overall accuracy: trace / total.
pub fn oa(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.checked()?;
    Ok(cm.trace() as f64 / total)
}

/// Average accuracy: mean per-class recall over classes that actually
/// occur; absent classes are excluded rather than polluting the mean.
pub fn aa(cm: &ConfusionMatrix) -> Result<f64> {
    cm.checked()?;
    let mut sum = 0.0;
    let mut present = 0usize;
    for r in 0..cm.classes() {
        let row = cm.row_sum(r);
        if row > 0 {
            sum += cm.count(r, r) as f64 / row as f64;
            present += 1;
        }
    }
    Ok(sum / present as f64)
}

/// Cohen's kappa: (p_o − p_e) / (1 − p_e). When chance agreement is total
/// (p_e == 1, which forces p_o == 1), the score is 1 by continuity.
pub fn kappa(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.checked()?;
    let p_o = cm.trace() as f64 / total;
    let p_e = (0..cm.classes())
        .map(|c| cm.row_sum(c) as f64 * cm.col_sum(c) as f64)
        .sum::<f64>()
        / (total * total);
    if p_e >= 1.0 {
        return Ok(1.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}
