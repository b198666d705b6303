//! Pooled OLS, fixed and random effects, and the one-step period-SUR EGLS
//! estimator with panel-corrected standard errors.

mod effects;
mod ols;
mod sur;

pub use effects::{fixed_effects, random_effects, random_effects_with_components};
pub use ols::ols;
pub use sur::{
    df_correction, egls_period_sur, egls_period_sur_with, egls_with_omega, estimate,
    estimate_period_omega, estimate_period_omega_with, pcse_covariance, pcse_sandwich,
    weight_design, OmegaDivisor, PeriodCovariance,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{collinear_column, f_sf, spd_inverse, spd_solve, t_two_sided, SymMatrix};
use crate::panel::{CovarianceKind, ObsId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PooledOls,
    FixedEffects,
    RandomEffects,
    PeriodSurEgls,
}

impl Method {
    pub fn description(self) -> &'static str {
        match self {
            Method::PooledOls => "Panel Least Squares",
            Method::FixedEffects => "Panel Least Squares (cross-section fixed effects)",
            Method::RandomEffects => "Panel EGLS (Cross-section random effects)",
            Method::PeriodSurEgls => "Panel EGLS (Period SUR)",
        }
    }
}

/// Goodness-of-fit block. `f_statistic`/`prob_f` are absent for models
/// without an intercept or with a perfect fit; `durbin_watson` is absent
/// when every residual is exactly zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub se_regression: f64,
    pub ssr: f64,
    pub f_statistic: Option<f64>,
    pub prob_f: Option<f64>,
    pub durbin_watson: Option<f64>,
    pub mean_dep: f64,
    pub sd_dep: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    pub sigma2_e: f64,
    pub sigma2_u: f64,
    /// Quasi-demeaning weight per entity, in entity-block order.
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub method: Method,
    pub covariance_kind: CovarianceKind,
    pub dependent: String,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub covariance: SymMatrix,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub obs_index: Vec<ObsId>,
    pub residuals_weighted: Vec<f64>,
    pub residuals_unweighted: Vec<f64>,
    pub weighted_stats: FitStats,
    pub unweighted_stats: FitStats,
    pub n_obs: usize,
    pub k_params: usize,
    pub df_resid: usize,
    pub n_entities: usize,
    pub log_likelihood: f64,
    pub variance_components: Option<VarianceComponents>,
    pub period_covariance: Option<PeriodCovariance>,
    pub warnings: Vec<String>,
}

impl EstimationResult {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.coefficients[i])
    }

    /// Replaces the coefficient covariance and recomputes standard errors,
    /// t-statistics and p-values.
    pub fn with_covariance(mut self, covariance: SymMatrix, kind: CovarianceKind) -> Self {
        let (se, t, p) = inference(&self.coefficients, &covariance, self.df_resid);
        self.covariance = covariance;
        self.covariance_kind = kind;
        self.std_errors = se;
        self.t_stats = t;
        self.p_values = p;
        self
    }
}

/// Durbin-Watson ratio over residuals in their given (stacked) order.
pub fn durbin_watson(residuals: &[f64]) -> Result<f64> {
    if residuals.len() < 2 {
        return Err(Error::InvalidInput(
            "Durbin-Watson needs at least two residuals".into(),
        ));
    }
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    if ssr == 0.0 {
        return Err(Error::ZeroVariance("all residuals are zero".into()));
    }
    let num: f64 = residuals.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok(num / ssr)
}

/// Centered R-squared; zero when `y` has no variation.
fn total_sum_of_squares(y: &DVector<f64>) -> f64 {
    let mean = y.mean();
    y.iter().map(|v| (v - mean).powi(2)).sum()
}

pub(crate) fn r_squared(y: &DVector<f64>, ssr: f64) -> f64 {
    let tss = total_sum_of_squares(y);
    if tss == 0.0 {
        0.0
    } else {
        1.0 - ssr / tss
    }
}

/// Fit statistics for a regression of `y` with residuals `e`.
/// `f_df1` is the numerator degrees of freedom of the overall F test.
pub(crate) fn fit_stats(
    y: &DVector<f64>,
    e: &DVector<f64>,
    df_resid: usize,
    f_df1: Option<usize>,
) -> FitStats {
    let n = y.len();
    let ssr = e.norm_squared();
    let r2 = r_squared(y, ssr);
    let df = df_resid as f64;
    let adj = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / df;
    let (f_statistic, prob_f) = match f_df1 {
        Some(d1) if d1 > 0 => {
            // from the sums of squares directly: 1 - R^2 cancels badly near a perfect fit
            let tss = total_sum_of_squares(y);
            let f = ((tss - ssr) / d1 as f64) / (ssr / df);
            if f.is_finite() {
                (Some(f), Some(f_sf(f, d1 as f64, df)))
            } else {
                (None, None)
            }
        }
        _ => (None, None),
    };
    let mean = y.mean();
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    FitStats {
        r_squared: r2,
        adj_r_squared: adj,
        se_regression: (ssr / df).sqrt(),
        ssr,
        f_statistic,
        prob_f,
        durbin_watson: durbin_watson(e.as_slice()).ok(),
        mean_dep: mean,
        sd_dep: sd,
    }
}

pub(crate) fn inference(
    coefficients: &[f64],
    covariance: &SymMatrix,
    df_resid: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let se: Vec<f64> = covariance.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect();
    let t: Vec<f64> = coefficients.iter().zip(&se).map(|(b, s)| b / s).collect();
    let p = t.iter().map(|&t| t_two_sided(t, df_resid as f64)).collect();
    (se, t, p)
}

pub(crate) fn gaussian_log_likelihood(n: usize, ssr: f64) -> f64 {
    let n = n as f64;
    -0.5 * n * (1.0 + (2.0 * std::f64::consts::PI).ln() + (ssr / n).ln())
}

/// Least-squares core shared by every estimator: rank check, normal
/// equations via Cholesky, residuals and `(X'X)^-1`.
pub(crate) struct LsFit {
    pub b: DVector<f64>,
    pub resid: DVector<f64>,
    pub xtx_inv: SymMatrix,
}

pub(crate) fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<LsFit> {
    if let Some(j) = collinear_column(x) {
        return Err(Error::RankDeficient {
            column: names.get(j).cloned().unwrap_or_else(|| format!("#{j}")),
        });
    }
    let xtx = SymMatrix::new(x.transpose() * x)?;
    let xty = x.transpose() * y;
    let b = spd_solve(&xtx, &DMatrix::from_column_slice(xty.len(), 1, xty.as_slice()))?;
    let b = DVector::from_column_slice(b.as_slice());
    let resid = y - x * &b;
    let xtx_inv = spd_inverse(&xtx)?;
    Ok(LsFit { b, resid, xtx_inv })
}

#[cfg(test)]
pub(crate) mod testutil {
    use nalgebra::{DMatrix, DVector};

    use crate::panel::{DesignMatrix, ObsId};

    /// Balanced design with `entities` equal blocks, years from 2000.
    /// The model has an intercept when the first name is "C".
    pub(crate) fn design(y: &[f64], cols: &[&[f64]], names: &[&str], entities: usize) -> DesignMatrix {
        let n = y.len();
        let t = n / entities;
        let x = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
        let obs = (0..n)
            .map(|i| ObsId { entity: format!("E{}", i / t), year: 2000 + (i % t) as i32 })
            .collect();
        DesignMatrix::from_parts(
            "y",
            DVector::from_column_slice(y),
            x,
            obs,
            names.iter().map(|s| s.to_string()).collect(),
            names.first() == Some(&"C"),
        )
        .unwrap()
    }
}
