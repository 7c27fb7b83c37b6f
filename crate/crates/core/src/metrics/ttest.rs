use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{QppError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
}

/// Paired two-tailed Student t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(QppError::Input(format!(
            "paired t-test needs equal lengths >= 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    if sd == 0.0 {
        if mean == 0.0 {
            return Ok(TTest { t: 0.0, p: 1.0 });
        }
        return Err(QppError::DegenerateVariance(
            "paired t-test: constant nonzero differences".into(),
        ));
    }
    let t = mean / (sd / n.sqrt());
    let df = n - 1.0;
    // P(|T| > |t|) = I_{df/(df+t^2)}(df/2, 1/2)
    let p = beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0);
    Ok(TTest { t, p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_differences() {
        let a = [0.3, 0.4, 0.5];
        assert_eq!(paired_t_test(&a, &a).unwrap(), TTest { t: 0.0, p: 1.0 });
    }

    #[test]
    fn reference_values() {
        let r = paired_t_test(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
        assert!((r.t - 12f64.sqrt()).abs() < 1e-12);
        // scipy.stats.ttest_1samp([1,2,3], 0).pvalue
        assert!((r.p - 0.07417990022744853).abs() < 1e-9);
        // scipy.stats.ttest_rel on the same vectors
        let r = paired_t_test(&[0.61, 0.45, 0.52, 0.70, 0.48], &[0.55, 0.47, 0.40, 0.62, 0.41])
            .unwrap();
        assert!((r.t - 2.708482575649218).abs() < 1e-9);
        assert!((r.p - 0.05362138453522781).abs() < 1e-9);
    }

    #[test]
    fn constant_nonzero_differences() {
        assert!(matches!(
            paired_t_test(&[5.0, 5.0], &[0.0, 0.0]),
            Err(QppError::DegenerateVariance(_))
        ));
    }

    proptest! {
        #[test]
        fn antisymmetric(a in prop::collection::vec(-1.0f64..1.0, 2..30), shift in prop::collection::vec(-1.0f64..1.0, 30)) {
            let b: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
            let (Ok(ab), Ok(ba)) = (paired_t_test(&a, &b), paired_t_test(&b, &a)) else { return Ok(()) };
            prop_assert!((ab.t + ba.t).abs() < 1e-12 * (1.0 + ab.t.abs()));
            prop_assert!((ab.p - ba.p).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab.p));
        }
    }
}
