use super::{fit_stats, gaussian_log_likelihood, inference, least_squares, EstimationResult, Method};
use crate::error::Result;
use crate::panel::{CovarianceKind, DesignMatrix};

/// Pooled ordinary least squares with conventional `s^2 (X'X)^-1` covariance.
pub fn ols(dm: &DesignMatrix) -> Result<EstimationResult> {
    let (n, k) = (dm.n(), dm.k());
    let fit = least_squares(dm.x(), dm.y(), dm.column_names())?;
    let df = n - k;
    let stats = fit_stats(dm.y(), &fit.resid, df, f_df1(dm));
    let s2 = stats.ssr / df as f64;
    let covariance = fit.xtx_inv.scaled(s2);
    let coefficients: Vec<f64> = fit.b.iter().copied().collect();
    let (std_errors, t_stats, p_values) = inference(&coefficients, &covariance, df);
    let resid: Vec<f64> = fit.resid.iter().copied().collect();
    Ok(EstimationResult {
        method: Method::PooledOls,
        covariance_kind: CovarianceKind::Ordinary,
        dependent: dm.dependent().to_string(),
        names: dm.column_names().to_vec(),
        coefficients,
        covariance,
        std_errors,
        t_stats,
        p_values,
        obs_index: dm.obs_index().to_vec(),
        residuals_weighted: resid.clone(),
        residuals_unweighted: resid,
        log_likelihood: gaussian_log_likelihood(n, stats.ssr),
        weighted_stats: stats.clone(),
        unweighted_stats: stats,
        n_obs: n,
        k_params: k,
        df_resid: df,
        n_entities: dm.n_entities(),
        variance_components: None,
        period_covariance: None,
        warnings: Vec::new(),
    })
}

/// Numerator degrees of freedom of the overall F test: slopes beyond the
/// intercept, or none when the model has no intercept.
pub(crate) fn f_df1(dm: &DesignMatrix) -> Option<usize> {
    dm.has_intercept().then(|| dm.k() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::testutil::design;

    #[test]
    fn exact_linear_fit() {
        let x: Vec<f64> = (0..8).map(|i| i as f64 * 0.7 - 1.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 3.0 * v).collect();
        let ones = vec![1.0; 8];
        let r = ols(&design(&y, &[&ones, &x], &["C", "x"], 1)).unwrap();
        assert!((r.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((r.coefficients[1] + 3.0).abs() < 1e-12);
        assert!(r.residuals_unweighted.iter().all(|e| e.abs() <= 1e-12));
        assert!(r.weighted_stats.ssr <= 1e-20);
        assert!((r.weighted_stats.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn intercept_only_by_hand() {
        // y = (1,2,2): b = 5/3, residuals (-2/3, 1/3, 1/3), SSR = 2/3
        let r = ols(&design(&[1.0, 2.0, 2.0], &[&[1.0, 1.0, 1.0]], &["C"], 1)).unwrap();
        assert!((r.coefficients[0] - 5.0 / 3.0).abs() < 1e-14);
        assert!((r.weighted_stats.ssr - 2.0 / 3.0).abs() < 1e-14);
        // s^2 = (2/3)/2, var(b) = s^2/3
        assert!((r.std_errors[0] - (1.0f64 / 9.0).sqrt()).abs() < 1e-14);
        assert_eq!(r.weighted_stats.f_statistic, None);
    }

    #[test]
    fn duplicate_column_is_named() {
        let x = [1.0, 4.0, 2.0, 8.0, 5.0];
        let err = ols(&design(&[1.0, 2.0, 3.0, 4.0, 6.0], &[&[1.0; 5], &x, &x], &["C", "a", "b"], 1))
            .unwrap_err();
        assert!(matches!(err, crate::Error::RankDeficient { ref column } if column == "b"), "{err}");
    }

    #[test]
    fn residuals_orthogonal_and_scale_invariant() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 40;
        let mut draw = || -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };
        let (x1, x2, u) = (draw(), draw(), draw());
        let ones = vec![1.0; n];
        let y: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * x1[i] - 2.0 * x2[i] + u[i]).collect();
        let base = ols(&design(&y, &[&ones, &x1, &x2], &["C", "a", "b"], 4)).unwrap();
        for col in [&ones, &x1, &x2] {
            let dot: f64 = col.iter().zip(&base.residuals_unweighted).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-10);
        }
        let c = 250.0;
        let x1s: Vec<f64> = x1.iter().map(|v| v * c).collect();
        let scaled = ols(&design(&y, &[&ones, &x1s, &x2], &["C", "a", "b"], 4)).unwrap();
        assert!((scaled.coefficients[1] * c - base.coefficients[1]).abs() < 1e-10);
        assert!((scaled.std_errors[1] * c - base.std_errors[1]).abs() < 1e-10);
        assert!((scaled.t_stats[1] - base.t_stats[1]).abs() < 1e-8);
    }
}
