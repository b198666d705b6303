use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::pearson;
use crate::panel::DesignMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPair {
    pub first: String,
    pub second: String,
    pub r: f64,
}

/// Rule-of-thumb multicollinearity check: collinearity is judged absent
/// when the model R-squared exceeds every pairwise regressor correlation
/// in absolute value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticollinearityScreen {
    pub pairs: Vec<CorrelationPair>,
    pub max_abs_correlation: f64,
    pub model_r_squared: f64,
    pub present: bool,
    pub warnings: Vec<String>,
}

impl MulticollinearityScreen {
    pub fn verdict(&self) -> &'static str {
        if self.present {
            "present"
        } else {
            "absent"
        }
    }
}

/// Screens the non-intercept columns of `dm` against `r_squared`.
/// Constant columns have no defined correlation and are skipped.
pub fn multicollinearity_screen(dm: &DesignMatrix, r_squared: f64) -> Result<MulticollinearityScreen> {
    let names = dm.column_names();
    let cols: Vec<usize> = (0..dm.k())
        .filter(|&j| !(dm.has_intercept() && j == 0))
        .collect();
    let mut pairs = Vec::new();
    let mut warnings = Vec::new();
    for (a, &i) in cols.iter().enumerate() {
        for &j in &cols[a + 1..] {
            let xi: Vec<f64> = dm.x().column(i).iter().copied().collect();
            let xj: Vec<f64> = dm.x().column(j).iter().copied().collect();
            match pearson(&xi, &xj) {
                Ok(r) => pairs.push(CorrelationPair {
                    first: names[i].clone(),
                    second: names[j].clone(),
                    r,
                }),
                Err(Error::ZeroVariance(_)) => {
                    warnings.push(format!("{} / {}: constant column skipped", names[i], names[j]))
                }
                Err(e) => return Err(e),
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::NotEstimable(
            "multicollinearity screen needs two non-constant regressors".into(),
        ));
    }
    let max_abs = pairs.iter().fold(0.0_f64, |m, p| m.max(p.r.abs()));
    Ok(MulticollinearityScreen {
        pairs,
        max_abs_correlation: max_abs,
        model_r_squared: r_squared,
        present: !(r_squared > max_abs),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::testutil::design;

    #[test]
    fn absent_when_fit_beats_correlations() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [2.0, 1.0, 4.0, 3.0, 6.0, 5.0];
        let dm = design(&[0.0; 6], &[&[1.0; 6], &a, &b], &["C", "a", "b"], 1);
        // r(a, b) = 29/35
        let s = multicollinearity_screen(&dm, 0.9).unwrap();
        assert_eq!(s.pairs.len(), 1);
        assert!((s.max_abs_correlation - 29.0 / 35.0).abs() < 1e-14);
        assert!(!s.present);
        assert_eq!(s.verdict(), "absent");
        assert!(multicollinearity_screen(&dm, 0.5).unwrap().present);
        // equality counts as present
        assert!(multicollinearity_screen(&dm, 29.0 / 35.0).unwrap().present);
    }

    #[test]
    fn constant_columns_are_skipped() {
        let a = [1.0, 2.0, 3.0, 5.0];
        let b = [1.0, 0.0, 1.0, 1.0];
        let dm = design(&[0.0; 4], &[&a, &b, &[1.0; 4]], &["a", "b", "k"], 1);
        let s = multicollinearity_screen(&dm, 0.1).unwrap();
        assert_eq!(s.pairs.len(), 1);
        assert_eq!(s.warnings.len(), 2);
    }
}
