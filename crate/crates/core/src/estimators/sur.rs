use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{
    fit_stats, gaussian_log_likelihood, inference, least_squares, ols, ols::f_df1,
    EstimationResult, Method,
};
use crate::error::{Error, Result};
use crate::numerics::{inverse_sqrt, spd_inverse, SymMatrix};
use crate::panel::{CovarianceKind, DesignMatrix, ModelSpec, ObsId, Weighting};

/// Denominator used when averaging residual cross-products into the
/// period covariance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OmegaDivisor {
    /// Number of entities in the sample, with unobserved residuals counted
    /// as zero. Always positive semi-definite.
    #[default]
    EntityCount,
    /// Number of entities observed in both periods of each pair.
    PairCount,
}

/// T x T contemporaneous covariance across periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodCovariance {
    pub omega: SymMatrix,
    pub periods: Vec<i32>,
    /// Entities observed in both periods of each pair; empty when the
    /// matrix was supplied rather than estimated.
    pub pair_counts: Vec<Vec<usize>>,
    pub divisor: OmegaDivisor,
}

impl PeriodCovariance {
    /// Wraps a given covariance over `periods`.
    pub fn fixed(omega: SymMatrix, periods: Vec<i32>) -> Result<Self> {
        if omega.order() != periods.len() {
            return Err(Error::InvalidInput(format!(
                "period covariance has order {} but {} periods",
                omega.order(),
                periods.len()
            )));
        }
        Ok(Self {
            omega,
            periods,
            pair_counts: Vec::new(),
            divisor: OmegaDivisor::default(),
        })
    }

    pub fn position(&self, year: i32) -> Option<usize> {
        self.periods.binary_search(&year).ok()
    }
}

pub fn estimate_period_omega(residuals: &[f64], obs: &[ObsId]) -> Result<PeriodCovariance> {
    estimate_period_omega_with(residuals, obs, OmegaDivisor::default())
}

/// Period covariance from residuals indexed by (entity, year):
/// `omega[s][t] = sum_i e_is e_it / d_st`.
pub fn estimate_period_omega_with(
    residuals: &[f64],
    obs: &[ObsId],
    divisor: OmegaDivisor,
) -> Result<PeriodCovariance> {
    if residuals.len() != obs.len() {
        return Err(Error::InvalidInput(format!(
            "{} residuals for {} observations",
            residuals.len(),
            obs.len()
        )));
    }
    if obs.is_empty() {
        return Err(Error::EmptySample("no residuals".into()));
    }
    let periods: Vec<i32> = obs
        .iter()
        .map(|o| o.year)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let t = periods.len();
    let mut rows: BTreeMap<&str, Vec<Option<f64>>> = BTreeMap::new();
    for (o, &e) in obs.iter().zip(residuals) {
        let p = periods.binary_search(&o.year).expect("year collected above");
        let row = rows.entry(o.entity.as_str()).or_insert_with(|| vec![None; t]);
        if row[p].replace(e).is_some() {
            return Err(Error::InvalidInput(format!(
                "duplicate residual for ({}, {})",
                o.entity, o.year
            )));
        }
    }
    let n_ent = rows.len();
    let mut sums = DMatrix::<f64>::zeros(t, t);
    let mut counts = vec![vec![0usize; t]; t];
    for row in rows.values() {
        for s in 0..t {
            let Some(es) = row[s] else { continue };
            for u in 0..t {
                if let Some(eu) = row[u] {
                    sums[(s, u)] += es * eu;
                    counts[s][u] += 1;
                }
            }
        }
    }
    for s in 0..t {
        for u in s..t {
            if counts[s][u] == 0 {
                return Err(Error::EmptyPeriodPair(periods[s], periods[u]));
            }
        }
    }
    let omega = DMatrix::from_fn(t, t, |s, u| match divisor {
        OmegaDivisor::EntityCount => sums[(s, u)] / n_ent as f64,
        OmegaDivisor::PairCount => sums[(s, u)] / counts[s][u] as f64,
    });
    Ok(PeriodCovariance {
        omega: SymMatrix::new(omega)?,
        periods,
        pair_counts: counts,
        divisor,
    })
}

/// Applies the period weighting `s` to every entity block, using the rows
/// and columns of `s` for the years that entity is observed.
pub fn weight_design(dm: &DesignMatrix, s: &SymMatrix, periods: &[i32]) -> Result<DesignMatrix> {
    if s.order() != periods.len() {
        return Err(Error::InvalidInput(format!(
            "weighting matrix has order {} but {} periods",
            s.order(),
            periods.len()
        )));
    }
    let mut y = dm.y().clone();
    let mut x = dm.x().clone();
    for block in dm.entity_blocks() {
        let r = block.rows.clone();
        let idx = dm.obs_index()[r.clone()]
            .iter()
            .map(|o| {
                periods.binary_search(&o.year).map_err(|_| {
                    Error::InvalidInput(format!("year {} outside the weighting periods", o.year))
                })
            })
            .collect::<Result<Vec<usize>>>()?;
        let sub = s.submatrix(&idx);
        let yb = &sub * dm.y().rows(r.start, r.len());
        let xb = &sub * dm.x().rows(r.start, r.len());
        y.rows_mut(r.start, r.len()).copy_from(&yb);
        x.rows_mut(r.start, r.len()).copy_from(&xb);
    }
    Ok(dm.with_data(y, x))
}

pub fn egls_period_sur(dm: &DesignMatrix) -> Result<EstimationResult> {
    egls_period_sur_with(dm, OmegaDivisor::default())
}

/// One-step period-SUR EGLS: OLS residuals give the period covariance,
/// whose inverse square root weights the data for a final OLS pass.
pub fn egls_period_sur_with(dm: &DesignMatrix, divisor: OmegaDivisor) -> Result<EstimationResult> {
    let first = ols(dm).map_err(|e| Error::stage("first-stage OLS", e))?;
    let omega = estimate_period_omega_with(&first.residuals_unweighted, dm.obs_index(), divisor)
        .map_err(|e| Error::stage("period covariance", e))?;
    egls_with_omega(dm, &omega)
}

/// Period-weighted least squares with a given period covariance.
pub fn egls_with_omega(dm: &DesignMatrix, omega: &PeriodCovariance) -> Result<EstimationResult> {
    let s = inverse_sqrt(&omega.omega).map_err(|e| Error::stage("weighting", e))?;
    let w = weight_design(dm, &s, &omega.periods)?;
    let fit = least_squares(w.x(), w.y(), dm.column_names())?;
    let (n, k) = (dm.n(), dm.k());
    let df = n - k;
    let weighted = fit_stats(w.y(), &fit.resid, df, f_df1(dm));
    let covariance = fit.xtx_inv.scaled(weighted.ssr / df as f64);
    let unweighted_resid = dm.y() - dm.x() * &fit.b;
    let unweighted = fit_stats(dm.y(), &unweighted_resid, df, f_df1(dm));
    let coefficients: Vec<f64> = fit.b.iter().copied().collect();
    let (std_errors, t_stats, p_values) = inference(&coefficients, &covariance, df);
    Ok(EstimationResult {
        method: Method::PeriodSurEgls,
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
        variance_components: None,
        period_covariance: Some(omega.clone()),
        warnings: Vec::new(),
    })
}

/// Small-sample factor `n / (n - k)` applied to the PCSE sandwich.
pub fn df_correction(n: usize, k: usize) -> f64 {
    n as f64 / (n - k) as f64
}

/// Panel-corrected covariance of `coefficients` estimated on `dm` weighted
/// by `omega`: the period covariance is re-estimated from the weighted
/// residuals and plugged into the sandwich.
pub fn pcse_covariance(
    dm: &DesignMatrix,
    omega: &PeriodCovariance,
    coefficients: &[f64],
) -> Result<SymMatrix> {
    if coefficients.len() != dm.k() {
        return Err(Error::InvalidInput(format!(
            "{} coefficients for {} columns",
            coefficients.len(),
            dm.k()
        )));
    }
    let s = inverse_sqrt(&omega.omega).map_err(|e| Error::stage("weighting", e))?;
    let w = weight_design(dm, &s, &omega.periods)?;
    let b = DVector::from_column_slice(coefficients);
    let resid = w.y() - w.x() * b;
    let reestimated = estimate_period_omega_with(resid.as_slice(), w.obs_index(), omega.divisor)?;
    pcse_sandwich(&w, &reestimated)
}

/// `A^-1 (sum_i X_i' omega_i X_i) A^-1 * n/(n-k)` with `A = X'X`, where
/// `omega_i` is the block of `omega` for the years entity i is observed.
pub fn pcse_sandwich(w: &DesignMatrix, omega: &PeriodCovariance) -> Result<SymMatrix> {
    let x = w.x();
    let k = w.k();
    let a_inv = spd_inverse(&SymMatrix::new(x.transpose() * x)?)?;
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for block in w.entity_blocks() {
        let r = block.rows.clone();
        let idx = w.obs_index()[r.clone()]
            .iter()
            .map(|o| {
                omega.position(o.year).ok_or_else(|| {
                    Error::InvalidInput(format!("year {} outside the covariance periods", o.year))
                })
            })
            .collect::<Result<Vec<usize>>>()?;
        let xi = x.rows(r.start, r.len());
        meat += xi.transpose() * omega.omega.submatrix(&idx) * xi;
    }
    let a = a_inv.as_matrix();
    SymMatrix::new(a * meat * a * df_correction(w.n(), k))
}

/// Estimates `spec` on the assembled sample `dm`.
pub fn estimate(
    dm: &DesignMatrix,
    spec: &ModelSpec,
    divisor: OmegaDivisor,
) -> Result<EstimationResult> {
    let base = match spec.weighting {
        Weighting::None => ols(dm)?,
        Weighting::PeriodSur => egls_period_sur_with(dm, divisor)?,
    };
    match spec.covariance {
        CovarianceKind::Ordinary => Ok(base),
        CovarianceKind::PcsePeriodSur => {
            let omega = match &base.period_covariance {
                Some(o) => o.clone(),
                None => {
                    let periods = dm.periods();
                    PeriodCovariance {
                        divisor,
                        ..PeriodCovariance::fixed(SymMatrix::identity(periods.len()), periods)?
                    }
                }
            };
            let v = pcse_covariance(dm, &omega, &base.coefficients)
                .map_err(|e| Error::stage("panel-corrected covariance", e))?;
            Ok(base.with_covariance(v, CovarianceKind::PcsePeriodSur))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::testutil::design;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn ids(entities: usize, t: usize) -> Vec<ObsId> {
        (0..entities * t)
            .map(|i| ObsId { entity: format!("E{}", i / t), year: 2000 + (i % t) as i32 })
            .collect()
    }

    /// Balanced panel with period-correlated errors.
    fn correlated(seed: u64, entities: usize, t: usize) -> DesignMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = || -> f64 { StandardNormal.sample(&mut rng) };
        let n = entities * t;
        let shocks: Vec<f64> = (0..t).map(|_| z()).collect();
        let x1: Vec<f64> = (0..n).map(|_| z()).collect();
        let x2: Vec<f64> = (0..n).map(|i| 0.3 * (i % t) as f64 + z()).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 2.0 + 1.5 * x1[i] - x2[i] + 0.8 * shocks[i % t] + z())
            .collect();
        design(&y, &[&vec![1.0; n], &x1, &x2], &["C", "x1", "x2"], entities)
    }

    #[test]
    fn omega_single_entity_is_outer_product() {
        let e = [1.0, -2.0, 0.5];
        let pc = estimate_period_omega(&e, &ids(1, 3)).unwrap();
        for s in 0..3 {
            for t in 0..3 {
                assert_eq!(pc.omega.get(s, t), e[s] * e[t]);
            }
        }
    }

    #[test]
    fn omega_small_cases() {
        let pc = estimate_period_omega(&[1.0, 0.0, 0.0, 1.0], &ids(2, 2)).unwrap();
        assert_eq!(pc.omega.as_matrix(), &DMatrix::from_diagonal_element(2, 2, 0.5));
        assert_eq!(pc.pair_counts, vec![vec![2, 2], vec![2, 2]]);
        let pc = estimate_period_omega(&[1.0, 1.0, 1.0, -1.0], &ids(2, 2)).unwrap();
        assert_eq!(pc.omega.as_matrix(), &DMatrix::identity(2, 2));
    }

    #[test]
    fn omega_divisors_differ_only_when_unbalanced() {
        let obs = vec![
            ObsId { entity: "A".into(), year: 1 },
            ObsId { entity: "A".into(), year: 2 },
            ObsId { entity: "B".into(), year: 2 },
            ObsId { entity: "C".into(), year: 1 },
            ObsId { entity: "C".into(), year: 2 },
        ];
        let e = [1.0, 2.0, 3.0, -1.0, 4.0];
        let by_n = estimate_period_omega_with(&e, &obs, OmegaDivisor::EntityCount).unwrap();
        let by_c = estimate_period_omega_with(&e, &obs, OmegaDivisor::PairCount).unwrap();
        // period 1: A=1, C=-1; period 2: A=2, B=3, C=4
        assert_eq!(by_n.omega.get(0, 0), 2.0 / 3.0);
        assert_eq!(by_c.omega.get(0, 0), 1.0);
        assert_eq!(by_n.omega.get(0, 1), (2.0 - 4.0) / 3.0);
        assert_eq!(by_c.omega.get(0, 1), (2.0 - 4.0) / 2.0);
        assert_eq!(by_c.omega.get(1, 1), 29.0 / 3.0);
        assert_eq!(by_c.pair_counts[0][1], 2);
    }

    #[test]
    fn omega_rejects_disjoint_periods() {
        let obs = vec![
            ObsId { entity: "A".into(), year: 1 },
            ObsId { entity: "B".into(), year: 2 },
        ];
        assert!(matches!(
            estimate_period_omega(&[1.0, 2.0], &obs),
            Err(Error::EmptyPeriodPair(1, 2))
        ));
    }

    #[test]
    fn spherical_weighting_reproduces_ols() {
        let dm = correlated(1, 6, 5);
        let base = ols(&dm).unwrap();
        for c in [1.0, 3.7] {
            let pc = PeriodCovariance::fixed(SymMatrix::identity(5).scaled(c), dm.periods()).unwrap();
            let g = egls_with_omega(&dm, &pc).unwrap();
            for j in 0..3 {
                assert!((g.coefficients[j] - base.coefficients[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn egls_matches_brute_force_gls() {
        let (n_ent, t) = (4, 3);
        let dm = correlated(2, n_ent, t);
        let g = egls_period_sur(&dm).unwrap();
        let e = ols(&dm).unwrap().residuals_unweighted;
        let mut omega = DMatrix::<f64>::zeros(t, t);
        for i in 0..n_ent {
            for s in 0..t {
                for u in 0..t {
                    omega[(s, u)] += e[i * t + s] * e[i * t + u] / n_ent as f64;
                }
            }
        }
        let inv = omega.try_inverse().unwrap();
        let n = n_ent * t;
        let w = DMatrix::from_fn(n, n, |r, c| if r / t == c / t { inv[(r % t, c % t)] } else { 0.0 });
        let x = dm.x();
        let b = (x.transpose() * &w * x).lu().solve(&(x.transpose() * &w * dm.y())).unwrap();
        for j in 0..3 {
            assert!((g.coefficients[j] - b[j]).abs() < 1e-10, "{} vs {}", g.coefficients[j], b[j]);
        }
    }

    #[test]
    fn more_periods_than_entities_is_rejected() {
        let dm = correlated(3, 3, 4);
        let err = egls_period_sur(&dm).unwrap_err();
        match err {
            Error::Stage { stage: "weighting", source } => {
                assert!(matches!(*source, Error::NearSingular { .. }))
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn pcse_spherical_collapse() {
        let dm = correlated(4, 5, 4);
        let pc = PeriodCovariance::fixed(SymMatrix::identity(4).scaled(2.5), dm.periods()).unwrap();
        let v = pcse_sandwich(&dm, &pc).unwrap();
        let x = dm.x();
        let expected = (x.transpose() * x).try_inverse().unwrap() * 2.5 * (20.0 / 17.0);
        for (a, b) in v.as_matrix().iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12 * b.abs().max(1e-3));
        }
    }

    #[test]
    fn pcse_matches_dense_sandwich() {
        let (n_ent, t) = (8, 4);
        let dm = correlated(5, n_ent, t);
        let g = egls_period_sur(&dm).unwrap();
        let omega = g.period_covariance.clone().unwrap();
        let v = pcse_covariance(&dm, &omega, &g.coefficients).unwrap();

        let s = inverse_sqrt(&omega.omega).unwrap();
        let n = n_ent * t;
        let sfull = DMatrix::from_fn(n, n, |r, c| if r / t == c / t { s.get(r % t, c % t) } else { 0.0 });
        let xs = &sfull * dm.x();
        let es = &sfull * dm.y() - &xs * DVector::from_vec(g.coefficients.clone());
        let mut o2 = DMatrix::<f64>::zeros(t, t);
        for i in 0..n_ent {
            for a in 0..t {
                for b in 0..t {
                    o2[(a, b)] += es[i * t + a] * es[i * t + b] / n_ent as f64;
                }
            }
        }
        let big = DMatrix::from_fn(n, n, |r, c| if r / t == c / t { o2[(r % t, c % t)] } else { 0.0 });
        let ainv = (xs.transpose() * &xs).try_inverse().unwrap();
        let dense = &ainv * xs.transpose() * big * &xs * &ainv * (n as f64 / (n - 3) as f64);
        for (a, b) in v.as_matrix().iter().zip(dense.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-6), "{a} vs {b}");
        }
        let pcse = g.with_covariance(v, CovarianceKind::PcsePeriodSur);
        assert!(pcse.std_errors.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn estimate_dispatches_on_spec() {
        let dm = correlated(6, 10, 4);
        let spec = |weighting, covariance| ModelSpec {
            dependent: "y".into(),
            regressors: vec![],
            include_intercept: true,
            sample: (2000, 2003),
            weighting,
            covariance,
        };
        let plain = estimate(&dm, &spec(Weighting::None, CovarianceKind::Ordinary), OmegaDivisor::EntityCount).unwrap();
        assert_eq!(plain.method, Method::PooledOls);
        let full = estimate(&dm, &spec(Weighting::PeriodSur, CovarianceKind::PcsePeriodSur), OmegaDivisor::EntityCount).unwrap();
        assert_eq!(full.method, Method::PeriodSurEgls);
        assert_eq!(full.covariance_kind, CovarianceKind::PcsePeriodSur);
        let ols_pcse = estimate(&dm, &spec(Weighting::None, CovarianceKind::PcsePeriodSur), OmegaDivisor::EntityCount).unwrap();
        assert_eq!(ols_pcse.coefficients, plain.coefficients);
        assert_ne!(ols_pcse.std_errors, plain.std_errors);
    }
}
