//! Evaluation metrics for LTS predictions.
//!
//! * `acc`: exact-label accuracy.
//! * `hla`: accuracy of the low/high-stress coarsening.
//! * `afr`: mean of the false-high rate (low-stress segments predicted high)
//!   and the false-low rate (high-stress segments predicted low).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lts::{LtsLabel, StressClass};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("truth has {truth} labels but predictions have {pred}")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("no samples to evaluate")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub acc: f64,
    pub hla: f64,
    /// `None` when either stress class is absent from the truth.
    pub afr: Option<f64>,
    pub false_high_rate: Option<f64>,
    pub false_low_rate: Option<f64>,
    /// `confusion[truth][pred]`, zero-based LTS indices.
    pub confusion: [[u64; 4]; 4],
    pub n_low: usize,
    pub n_high: usize,
}

pub fn evaluate(truth: &[LtsLabel], pred: &[LtsLabel]) -> Result<EvalReport, MetricsError> {
    if truth.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = truth.len();
    let mut confusion = [[0u64; 4]; 4];
    let (mut exact, mut coarse) = (0usize, 0usize);
    let (mut n_low, mut n_high) = (0usize, 0usize);
    let (mut false_high, mut false_low) = (0usize, 0usize);
    for (&y, &y_hat) in truth.iter().zip(pred) {
        confusion[y.index()][y_hat.index()] += 1;
        exact += usize::from(y == y_hat);
        let (h, h_hat) = (y.stress_class(), y_hat.stress_class());
        coarse += usize::from(h == h_hat);
        match h {
            StressClass::Low => {
                n_low += 1;
                false_high += usize::from(h_hat == StressClass::High);
            }
            StressClass::High => {
                n_high += 1;
                false_low += usize::from(h_hat == StressClass::Low);
            }
        }
    }
    let false_high_rate = (n_low > 0).then(|| false_high as f64 / n_low as f64);
    let false_low_rate = (n_high > 0).then(|| false_low as f64 / n_high as f64);
    let afr = match (false_high_rate, false_low_rate) {
        (Some(a), Some(b)) => Some(0.5 * (a + b)),
        _ => {
            log::warn!("AFR undefined: truth has {n_low} low-stress and {n_high} high-stress segments");
            None
        }
    };
    Ok(EvalReport {
        n,
        acc: exact as f64 / n as f64,
        hla: coarse as f64 / n as f64,
        afr,
        false_high_rate,
        false_low_rate,
        confusion,
        n_low,
        n_high,
    })
}

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{:.2}", 100.0 * x)).unwrap_or_else(|| "n/a".into())
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<6} {:>8}", "metric", "%")?;
        writeln!(f, "{:<6} {:>8}", "Acc", pct(Some(self.acc)))?;
        writeln!(f, "{:<6} {:>8}", "HLA", pct(Some(self.hla)))?;
        writeln!(f, "{:<6} {:>8}", "AFR", pct(self.afr))?;
        writeln!(f, "n = {} (low {}, high {})", self.n, self.n_low, self.n_high)?;
        writeln!(f, "confusion (rows truth LTS1-4, cols predicted):")?;
        for row in &self.confusion {
            writeln!(f, "  {:>7} {:>7} {:>7} {:>7}", row[0], row[1], row[2], row[3])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(v: &[u8]) -> Vec<LtsLabel> {
        v.iter().map(|&x| LtsLabel::new(x as i64).unwrap()).collect()
    }

    #[test]
    fn perfect() {
        let y = labels(&[1, 2, 3, 4, 1]);
        let r = evaluate(&y, &y).unwrap();
        assert_eq!((r.acc, r.hla, r.afr), (1.0, 1.0, Some(0.0)));
        assert_eq!(r.confusion.iter().flatten().sum::<u64>(), 5);
    }

    #[test]
    fn hand_computed() {
        let r = evaluate(&labels(&[1, 1, 3, 3]), &labels(&[2, 2, 1, 1])).unwrap();
        assert_eq!((r.acc, r.hla, r.afr), (0.0, 0.5, Some(0.5)));
        let r = evaluate(&labels(&[1, 2, 3, 4]), &labels(&[1, 1, 1, 1])).unwrap();
        assert_eq!((r.acc, r.hla, r.afr), (0.25, 0.5, Some(0.5)));
        assert_eq!((r.n_low, r.n_high), (2, 2));
    }

    #[test]
    fn undefined_afr() {
        let r = evaluate(&labels(&[1, 2]), &labels(&[3, 2])).unwrap();
        assert_eq!(r.afr, None);
        assert_eq!(r.false_high_rate, Some(0.5));
        assert!(r.to_string().contains("n/a"));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            evaluate(&labels(&[1]), &labels(&[1, 2])),
            Err(MetricsError::LengthMismatch { .. })
        ));
        assert_eq!(evaluate(&[], &[]), Err(MetricsError::Empty));
    }

    fn label_vec(n: usize) -> impl Strategy<Value = Vec<(u8, u8)>> {
        prop::collection::vec((1u8..=4, 1u8..=4), 1..n)
    }

    proptest! {
        #[test]
        fn hla_dominates_acc(pairs in label_vec(60)) {
            let (t, p): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
            let r = evaluate(&labels(&t), &labels(&p)).unwrap();
            prop_assert!(r.hla >= r.acc);
            prop_assert_eq!(r.n_low + r.n_high, r.n);
        }

        #[test]
        fn permutation_invariant(pairs in label_vec(40), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let (t, p): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
            let (ts, ps): (Vec<u8>, Vec<u8>) = shuffled.into_iter().unzip();
            prop_assert_eq!(evaluate(&labels(&t), &labels(&p)).unwrap(), evaluate(&labels(&ts), &labels(&ps)).unwrap());
        }

        #[test]
        fn afr_zero_iff_no_cross_stress_errors(pairs in label_vec(40)) {
            let (t, p): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
            let r = evaluate(&labels(&t), &labels(&p)).unwrap();
            if let Some(afr) = r.afr {
                let cross = t.iter().zip(&p).any(|(a, b)| (*a <= 2) != (*b <= 2));
                prop_assert_eq!(afr == 0.0, !cross);
            }
        }
    }
}
