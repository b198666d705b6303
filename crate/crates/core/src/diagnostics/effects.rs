use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Df, TestLabels, TestResult};
use crate::error::{Error, Result};
use crate::estimators::{fixed_effects, ols, random_effects, EstimationResult};
use crate::numerics::{chi2_sf, cholesky, f_sf, pseudo_inverse, spd_solve, SymMatrix};
use crate::panel::{DesignMatrix, INTERCEPT};

const REDUNDANT_F: TestLabels = TestLabels {
    name: "redundant_fe_f",
    title: "Redundant fixed effects (F)",
    null: "Fixed effects are redundant",
    if_retained: "Fixed effects model is redundant",
    if_rejected: "Fixed effects model is indicated",
};

const REDUNDANT_LR: TestLabels = TestLabels {
    name: "redundant_fe_lr",
    title: "Redundant fixed effects (LR)",
    ..REDUNDANT_F
};

const HAUSMAN: TestLabels = TestLabels {
    name: "hausman",
    title: "Correlated random effects (Hausman)",
    null: "Random effects are consistent",
    if_retained: "Random effects model is indicated",
    if_rejected: "Fixed effects model is indicated",
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundantFixedEffects {
    pub f_test: TestResult,
    pub lr_test: TestResult,
}

/// Joint significance of the cross-section effects, comparing pooled OLS
/// with the within regression on the same sample by an F test and a
/// likelihood ratio.
pub fn redundant_fixed_effects(
    pooled: &EstimationResult,
    fe: &EstimationResult,
) -> Result<RedundantFixedEffects> {
    if pooled.n_obs != fe.n_obs {
        return Err(Error::InvalidInput(format!(
            "pooled and fixed-effects samples differ ({} vs {} observations)",
            pooled.n_obs, fe.n_obs
        )));
    }
    let n_ent = fe.n_entities;
    if n_ent < 2 {
        return Err(Error::NotEstimable(
            "redundant fixed effects need at least two cross-sections".into(),
        ));
    }
    let ssr_p = pooled.unweighted_stats.ssr;
    let ssr_fe = fe.unweighted_stats.ssr;
    if ssr_fe > ssr_p {
        return Err(Error::NotEstimable(format!(
            "fixed-effects SSR {ssr_fe} exceeds pooled SSR {ssr_p}"
        )));
    }
    let n = fe.n_obs;
    let (df1, df2) = (n_ent - 1, fe.df_resid);
    let f = ((ssr_p - ssr_fe) / df1 as f64) / (ssr_fe / df2 as f64);
    let lr = n as f64 * (ssr_p / ssr_fe).ln();
    Ok(RedundantFixedEffects {
        f_test: REDUNDANT_F.result(f, Df::Pair(df1, df2), f_sf(f, df1 as f64, df2 as f64), n),
        lr_test: REDUNDANT_LR.result(lr, Df::Single(df1), chi2_sf(lr, df1 as f64), n),
    })
}

/// Pooled OLS and fixed effects on `dm`, then [`redundant_fixed_effects`].
pub fn redundant_fixed_effects_on(dm: &DesignMatrix) -> Result<RedundantFixedEffects> {
    redundant_fixed_effects(&ols(dm)?, &fixed_effects(dm)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HausmanStatistic {
    pub statistic: f64,
    /// True when the covariance difference was not positive definite and
    /// the Moore-Penrose inverse was used.
    pub pseudo_inverse: bool,
}

/// `q' D^-1 q`, falling back to the pseudo-inverse of `D` when it is not
/// positive definite.
pub fn hausman_statistic(q: &[f64], d: &SymMatrix) -> Result<HausmanStatistic> {
    if q.len() != d.order() {
        return Err(Error::InvalidInput(format!(
            "contrast has {} entries but covariance has order {}",
            q.len(),
            d.order()
        )));
    }
    let qv = DVector::from_column_slice(q);
    if cholesky(d).is_ok() {
        let sol = spd_solve(d, &DMatrix::from_column_slice(q.len(), 1, q))?;
        return Ok(HausmanStatistic {
            statistic: qv.dot(&sol.column(0)),
            pseudo_inverse: false,
        });
    }
    let (pinv, _) = pseudo_inverse(d);
    Ok(HausmanStatistic {
        statistic: qv.dot(&(pinv.as_matrix() * &qv)),
        pseudo_inverse: true,
    })
}

/// Hausman test comparing fixed and random effects on `dm`.
pub fn hausman(dm: &DesignMatrix) -> Result<TestResult> {
    let fe = fixed_effects(dm)?;
    let re = random_effects(dm)?;
    hausman_from(&fe, &re)
}

/// Hausman test from fitted fixed- and random-effects models, over the
/// slopes both models share (matched by name).
pub fn hausman_from(fe: &EstimationResult, re: &EstimationResult) -> Result<TestResult> {
    let common: Vec<(usize, usize)> = fe
        .names
        .iter()
        .enumerate()
        .filter(|(_, n)| n.as_str() != INTERCEPT)
        .filter_map(|(i, n)| re.index_of(n).map(|j| (i, j)))
        .collect();
    if common.is_empty() {
        return Err(Error::NotEstimable(
            "fixed and random effects share no slope coefficients".into(),
        ));
    }
    let k = common.len();
    let q: Vec<f64> = common
        .iter()
        .map(|&(i, j)| fe.coefficients[i] - re.coefficients[j])
        .collect();
    let d = DMatrix::from_fn(k, k, |a, b| {
        let (fa, ra) = common[a];
        let (fb, rb) = common[b];
        fe.covariance.get(fa, fb) - re.covariance.get(ra, rb)
    });
    let h = hausman_statistic(&q, &SymMatrix::new(d)?)?;
    let mut result = HAUSMAN.result(h.statistic, Df::Single(k), chi2_sf(h.statistic.max(0.0), k as f64), fe.n_obs);
    result.warnings.extend(re.warnings.iter().map(|w| format!("hausman: {w}")));
    if h.pseudo_inverse {
        result
            .warnings
            .push("hausman: covariance difference not positive definite; pseudo-inverse used".into());
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::ObsId;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn diagonal_contrast() {
        let d = SymMatrix::from_diagonal(&[0.5, 0.5]).unwrap();
        let h = hausman_statistic(&[1.0, 0.0], &d).unwrap();
        assert!((h.statistic - 2.0).abs() < 1e-14);
        assert!(!h.pseudo_inverse);
        assert!((chi2_sf(h.statistic, 2.0) - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn identical_estimates_give_zero() {
        let dm = panel(4, 6, 5, 0.0);
        let fe = fixed_effects(&dm).unwrap();
        let h = hausman_from(&fe, &fe).unwrap();
        assert_eq!(h.statistic, 0.0);
        assert_eq!(h.p_value, Some(1.0));
        let red = redundant_fixed_effects(&fe, &fe).unwrap();
        assert_eq!((red.f_test.statistic, red.lr_test.statistic), (0.0, 0.0));
        assert_eq!(red.lr_test.p_value, Some(1.0));
        let pooled = ols(&dm).unwrap();
        assert!(redundant_fixed_effects(&fe, &pooled).is_err());
    }

    #[test]
    fn singular_difference_uses_pseudo_inverse() {
        // D = diag(2, 0): only the first direction counts
        let d = SymMatrix::from_diagonal(&[2.0, 0.0]).unwrap();
        let h = hausman_statistic(&[4.0, 3.0], &d).unwrap();
        assert!(h.pseudo_inverse);
        assert!((h.statistic - 8.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn invariant_to_coefficient_order(
            q in prop::collection::vec(-5.0f64..5.0, 3),
            a in prop::collection::vec(-2.0f64..2.0, 9),
        ) {
            let m = DMatrix::from_row_slice(3, 3, &a);
            let d = SymMatrix::new(&m * m.transpose() + DMatrix::identity(3, 3) * 0.5).unwrap();
            let base = hausman_statistic(&q, &d).unwrap().statistic;
            let perm = [2usize, 0, 1];
            let qp: Vec<f64> = perm.iter().map(|&i| q[i]).collect();
            let dp = SymMatrix::new(DMatrix::from_fn(3, 3, |i, j| d.get(perm[i], perm[j]))).unwrap();
            let h = hausman_statistic(&qp, &dp).unwrap().statistic;
            prop_assert!((h - base).abs() <= 1e-9 * base.abs().max(1.0));
        }
    }

    fn panel(seed: u64, n_ent: usize, t: usize, effect_corr: f64) -> DesignMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = || -> f64 { StandardNormal.sample(&mut rng) };
        let u: Vec<f64> = (0..n_ent).map(|_| z()).collect();
        let n = n_ent * t;
        let x: Vec<f64> = (0..n).map(|r| z() + effect_corr * u[r / t]).collect();
        let y: Vec<f64> = (0..n).map(|r| 1.0 + 2.0 * x[r] + 1.5 * u[r / t] + z()).collect();
        let obs = (0..n)
            .map(|r| ObsId { entity: format!("E{}", r / t), year: (r % t) as i32 })
            .collect();
        DesignMatrix::from_parts(
            "y",
            DVector::from_vec(y),
            DMatrix::from_fn(n, 2, |r, j| if j == 0 { 1.0 } else { x[r] }),
            obs,
            vec!["C".into(), "x".into()],
            true,
        )
        .unwrap()
    }

    #[test]
    fn effects_tests_detect_planted_structure() {
        let dm = panel(1, 30, 8, 1.5);
        let red = redundant_fixed_effects_on(&dm).unwrap();
        assert!(!red.f_test.retained && !red.lr_test.retained);
        assert_eq!(red.f_test.df, Df::Pair(29, 240 - 30 - 1));
        let h = hausman(&dm).unwrap();
        assert!(h.p_value.unwrap() < 0.01, "{h:?}");
        assert_eq!(h.verdict, "Fixed effects model is indicated");
        let dm = panel(2, 30, 8, 0.0);
        assert!(hausman(&dm).unwrap().statistic < 20.0);
    }

    #[test]
    fn lr_and_f_agree_on_ssr_ratio() {
        let dm = panel(3, 10, 6, 0.5);
        let red = redundant_fixed_effects_on(&dm).unwrap();
        let ssr_p = ols(&dm).unwrap().weighted_stats.ssr;
        let ssr_fe = fixed_effects(&dm).unwrap().weighted_stats.ssr;
        assert!((red.lr_test.statistic - 60.0 * (ssr_p / ssr_fe).ln()).abs() < 1e-9);
        let df2 = (60 - 10 - 1) as f64;
        assert!((red.f_test.statistic - (ssr_p / ssr_fe - 1.0) * df2 / 9.0).abs() < 1e-9);
    }
}
