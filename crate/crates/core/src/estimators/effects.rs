use nalgebra::{DMatrix, DVector};

use super::{
    fit_stats, gaussian_log_likelihood, inference, least_squares, ols::f_df1, EstimationResult,
    Method, VarianceComponents,
};
use crate::error::{Error, Result};
use crate::panel::{CovarianceKind, DesignMatrix, INTERCEPT};

/// Relative norm below which a demeaned column counts as having no
/// variation inside entities.
const WITHIN_TOLERANCE: f64 = 1e-10;

/// Cross-section fixed effects by the within transformation. Reports the
/// slope coefficients only; the intercept column, if any, is absorbed.
pub fn fixed_effects(dm: &DesignMatrix) -> Result<EstimationResult> {
    let names = dm.column_names();
    let slopes: Vec<usize> = (0..dm.k()).filter(|&j| names[j] != INTERCEPT).collect();
    if slopes.is_empty() {
        return Err(Error::InvalidInput(
            "fixed effects need at least one regressor besides the intercept".into(),
        ));
    }
    let n = dm.n();
    let n_ent = dm.n_entities();
    let k = slopes.len();
    if n <= n_ent + k {
        return Err(Error::TooFewObservations { n, k: n_ent + k });
    }
    let df = n - n_ent - k;

    let mut yd = dm.y().clone();
    let mut xd = dm.x().select_columns(&slopes);
    for block in dm.entity_blocks() {
        let r = block.rows.clone();
        let len = r.len() as f64;
        let ym = dm.y().rows(r.start, r.len()).sum() / len;
        yd.rows_mut(r.start, r.len()).add_scalar_mut(-ym);
        for mut col in xd.column_iter_mut() {
            let mut part = col.rows_mut(r.start, r.len());
            let m = part.sum() / len;
            part.add_scalar_mut(-m);
        }
    }
    let slope_names: Vec<String> = slopes.iter().map(|&j| names[j].clone()).collect();
    for (c, &j) in slopes.iter().enumerate() {
        let raw = dm.x().column(j).norm();
        if xd.column(c).norm() <= WITHIN_TOLERANCE * raw || raw == 0.0 {
            return Err(Error::NoWithinVariation(names[j].clone()));
        }
    }

    let fit = least_squares(&xd, &yd, &slope_names)?;
    let stats = fit_stats(&yd, &fit.resid, df, Some(k));
    let covariance = fit.xtx_inv.scaled(stats.ssr / df as f64);
    let coefficients: Vec<f64> = fit.b.iter().copied().collect();
    let (std_errors, t_stats, p_values) = inference(&coefficients, &covariance, df);
    let resid: Vec<f64> = fit.resid.iter().copied().collect();
    let mut warnings = Vec::new();
    if n_ent == 1 {
        warnings.push("single cross-section: fixed effects reduce to a demeaned regression".into());
    }
    Ok(EstimationResult {
        method: Method::FixedEffects,
        covariance_kind: CovarianceKind::Ordinary,
        dependent: dm.dependent().to_string(),
        names: slope_names,
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
        n_entities: n_ent,
        variance_components: None,
        period_covariance: None,
        warnings,
    })
}

/// Cross-section random effects with Swamy-Arora variance components:
/// the idiosyncratic variance from the within regression and the
/// entity variance from the regression on entity means.
pub fn random_effects(dm: &DesignMatrix) -> Result<EstimationResult> {
    let n_ent = dm.n_entities();
    let k = dm.k();
    if n_ent <= k {
        return Err(Error::NotEstimable(format!(
            "random effects need more cross-sections than parameters ({n_ent} <= {k})"
        )));
    }
    let within = fixed_effects(dm)?;
    let sigma2_e = within.weighted_stats.ssr / within.df_resid as f64;

    let means_x = DMatrix::from_fn(n_ent, k, |i, j| {
        let r = &dm.entity_blocks()[i].rows;
        dm.x().column(j).rows(r.start, r.len()).mean()
    });
    let means_y = DVector::from_fn(n_ent, |i, _| {
        let r = &dm.entity_blocks()[i].rows;
        dm.y().rows(r.start, r.len()).mean()
    });
    let between = least_squares(&means_x, &means_y, dm.column_names())?;
    let ssr_b = between.resid.norm_squared();
    let mean_inv_t = dm
        .entity_blocks()
        .iter()
        .map(|b| 1.0 / b.rows.len() as f64)
        .sum::<f64>()
        / n_ent as f64;
    let raw = ssr_b / (n_ent - k) as f64 - sigma2_e * mean_inv_t;
    let mut result = random_effects_with_components(dm, sigma2_e, raw.max(0.0))?;
    if raw < 0.0 {
        result
            .warnings
            .push("negative cross-section variance estimate set to zero".into());
    }
    Ok(result)
}

/// Random-effects GLS by quasi-demeaning with given variance components.
pub fn random_effects_with_components(
    dm: &DesignMatrix,
    sigma2_e: f64,
    sigma2_u: f64,
) -> Result<EstimationResult> {
    if !(sigma2_e > 0.0) || !(sigma2_u >= 0.0) || !sigma2_u.is_finite() {
        return Err(Error::InvalidInput(format!(
            "invalid variance components (sigma2_e = {sigma2_e}, sigma2_u = {sigma2_u})"
        )));
    }
    let (n, k) = (dm.n(), dm.k());
    let theta: Vec<f64> = dm
        .entity_blocks()
        .iter()
        .map(|b| {
            let t = b.rows.len() as f64;
            1.0 - (sigma2_e / (t * sigma2_u + sigma2_e)).sqrt()
        })
        .collect();
    let mut ys = dm.y().clone();
    let mut xs = dm.x().clone();
    for (block, &th) in dm.entity_blocks().iter().zip(&theta) {
        let r = block.rows.clone();
        let ym = dm.y().rows(r.start, r.len()).mean();
        ys.rows_mut(r.start, r.len()).add_scalar_mut(-th * ym);
        for mut col in xs.column_iter_mut() {
            let mut part = col.rows_mut(r.start, r.len());
            let m = part.mean();
            part.add_scalar_mut(-th * m);
        }
    }
    let fit = least_squares(&xs, &ys, dm.column_names())?;
    let df = n - k;
    let weighted = fit_stats(&ys, &fit.resid, df, f_df1(dm));
    let covariance = fit.xtx_inv.scaled(weighted.ssr / df as f64);
    let unweighted_resid = dm.y() - dm.x() * &fit.b;
    let unweighted = fit_stats(dm.y(), &unweighted_resid, df, f_df1(dm));
    let coefficients: Vec<f64> = fit.b.iter().copied().collect();
    let (std_errors, t_stats, p_values) = inference(&coefficients, &covariance, df);
    Ok(EstimationResult {
        method: Method::RandomEffects,
        covariance_kind: CovarianceKind::Ordinary,
        dependent: dm.dependent().to_string(),
        names: dm.column_names().to_vec(),
        coefficients,
        covariance,
        std_errors,
        t_stats,
        p_values,
        obs_index: dm.obs_index().to_vec(),
        residuals_weighted: fit.resid.iter().copied().collect(),
        residuals_unweighted: unweighted_resid.iter().copied().collect(),
        log_likelihood: gaussian_log_likelihood(n, weighted.ssr),
        weighted_stats: weighted,
        unweighted_stats: unweighted,
        n_obs: n,
        k_params: k,
        df_resid: df,
        n_entities: dm.n_entities(),
        variance_components: Some(VarianceComponents { sigma2_e, sigma2_u, theta }),
        period_covariance: None,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{ols, testutil::design};
    use crate::panel::ObsId;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    }

    /// Unbalanced panel: entity i observed for `lens[i]` consecutive years,
    /// y = 1 + 0.8 x1 - 0.5 x2 + u_i + e.
    fn unbalanced(seed: u64, lens: &[usize], sigma_u: f64) -> DesignMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = lens.iter().sum();
        let x1 = normals(&mut rng, n);
        let x2 = normals(&mut rng, n);
        let e = normals(&mut rng, n);
        let u = normals(&mut rng, lens.len());
        let mut obs = Vec::new();
        let mut y = Vec::new();
        for (i, &len) in lens.iter().enumerate() {
            for t in 0..len {
                let r = obs.len();
                obs.push(ObsId { entity: format!("E{i}"), year: 2000 + t as i32 + (i % 2) as i32 });
                y.push(1.0 + 0.8 * x1[r] - 0.5 * x2[r] + sigma_u * u[i] + e[r]);
            }
        }
        let x = DMatrix::from_fn(n, 3, |r, j| match j {
            0 => 1.0,
            1 => x1[r],
            _ => x2[r],
        });
        DesignMatrix::from_parts(
            "y",
            DVector::from_vec(y),
            x,
            obs,
            vec!["C".into(), "x1".into(), "x2".into()],
            true,
        )
        .unwrap()
    }

    #[test]
    fn within_matches_dummy_variable_regression() {
        let dm = unbalanced(3, &[5, 7, 4, 6, 8], 1.5);
        let fe = fixed_effects(&dm).unwrap();
        // explicit entity dummies plus slopes, solved by QR
        let n = dm.n();
        let blocks = dm.entity_blocks();
        let lsdv = DMatrix::from_fn(n, blocks.len() + 2, |r, j| {
            if j < blocks.len() {
                f64::from(u8::from(blocks[j].rows.contains(&r)))
            } else {
                dm.x()[(r, j - blocks.len() + 1)]
            }
        });
        let qr = lsdv.clone().qr();
        let b = qr.r().solve_upper_triangular(&(qr.q().transpose() * dm.y())).unwrap();
        let resid = dm.y() - &lsdv * &b;
        for s in 0..2 {
            assert!((fe.coefficients[s] - b[blocks.len() + s]).abs() < 1e-10);
        }
        assert!((fe.weighted_stats.ssr - resid.norm_squared()).abs() < 1e-10);
        assert_eq!(fe.df_resid, n - 5 - 2);
        assert_eq!(fe.names, vec!["x1", "x2"]);
    }

    #[test]
    fn constant_within_entity_is_rejected() {
        let dm = unbalanced(4, &[4, 4, 4], 1.0);
        let mut x = dm.x().clone();
        for (i, b) in dm.entity_blocks().iter().enumerate() {
            for r in b.rows.clone() {
                x[(r, 2)] = i as f64 * 2.0 + 1.0;
            }
        }
        let dm = dm.with_data(dm.y().clone(), x);
        assert!(matches!(fixed_effects(&dm), Err(Error::NoWithinVariation(ref c)) if c == "x2"));
    }

    #[test]
    fn single_entity_warns() {
        let x: Vec<f64> = (0..6).map(|i| (i * i) as f64).collect();
        let y = [1.0, 2.0, 4.0, 3.0, 7.0, 9.0];
        let fe = fixed_effects(&design(&y, &[&[1.0; 6], &x], &["C", "x"], 1)).unwrap();
        assert_eq!(fe.warnings.len(), 1);
        let pooled = ols(&design(&y, &[&[1.0; 6], &x], &["C", "x"], 1)).unwrap();
        assert!((fe.coefficients[0] - pooled.coefficients[1]).abs() < 1e-12);
    }

    #[test]
    fn zero_entity_variance_is_pooled_ols() {
        let dm = unbalanced(5, &[5, 3, 6, 4], 0.0);
        let re = random_effects_with_components(&dm, 1.3, 0.0).unwrap();
        let pooled = ols(&dm).unwrap();
        for j in 0..3 {
            assert!((re.coefficients[j] - pooled.coefficients[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn vanishing_noise_approaches_within() {
        let dm = unbalanced(6, &[6, 6, 6, 6, 6], 3.0);
        let re = random_effects_with_components(&dm, 1e-6, 10.0).unwrap();
        let fe = fixed_effects(&dm).unwrap();
        let theta = &re.variance_components.as_ref().unwrap().theta;
        assert!(theta.iter().all(|&t| t >= 0.999));
        for s in 0..2 {
            assert!((re.coefficients[s + 1] - fe.coefficients[s]).abs() < 1e-3);
        }
    }

    #[test]
    fn quasi_demeaning_equals_explicit_gls() {
        let dm = unbalanced(7, &[4, 7, 5, 6, 3, 8], 1.2);
        let (s2e, s2u) = (0.9, 1.7);
        let re = random_effects_with_components(&dm, s2e, s2u).unwrap();
        let k = dm.k();
        let mut a = DMatrix::<f64>::zeros(k, k);
        let mut c = DVector::<f64>::zeros(k);
        for b in dm.entity_blocks() {
            let t = b.rows.len();
            let omega = DMatrix::from_fn(t, t, |i, j| s2u + if i == j { s2e } else { 0.0 });
            let inv = omega.try_inverse().unwrap();
            let xi = dm.x().rows(b.rows.start, t);
            let yi = dm.y().rows(b.rows.start, t);
            a += xi.transpose() * &inv * xi;
            c += xi.transpose() * &inv * yi;
        }
        let b = a.lu().solve(&c).unwrap();
        for j in 0..k {
            assert!((re.coefficients[j] - b[j]).abs() < 1e-8, "{j}");
        }
    }

    #[test]
    fn swamy_arora_components_are_sensible() {
        let dm = unbalanced(8, &[10; 40], 2.0);
        let re = random_effects(&dm).unwrap();
        let vc = re.variance_components.unwrap();
        assert!((vc.sigma2_e - 1.0).abs() < 0.2, "{}", vc.sigma2_e);
        assert!(vc.sigma2_u > 1.5 && vc.sigma2_u < 7.0, "{}", vc.sigma2_u);
    }

    #[test]
    fn too_few_entities_not_estimable() {
        let dm = unbalanced(9, &[5, 5, 5], 1.0);
        assert!(matches!(random_effects(&dm), Err(Error::NotEstimable(_))));
    }
}
