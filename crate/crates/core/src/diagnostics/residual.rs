use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::{Df, TestLabels, TestResult};
use crate::error::{Error, Result};
use crate::estimators::{least_squares, r_squared};
use crate::numerics::chi2_sf;
use crate::panel::DesignMatrix;

const JARQUE_BERA: TestLabels = TestLabels {
    name: "jarque_bera",
    title: "Normality (Jarque-Bera)",
    null: "Residuals are normally distributed",
    if_retained: "Residuals are normally distributed",
    if_rejected: "Residuals are not normally distributed",
};

const BREUSCH_PAGAN_GODFREY: TestLabels = TestLabels {
    name: "breusch_pagan_godfrey",
    title: "Heteroskedasticity (Breusch-Pagan-Godfrey)",
    null: "Homoskedasticity",
    if_retained: "Model is homoskedastic",
    if_rejected: "Model is heteroskedastic",
};

const BREUSCH_GODFREY: TestLabels = TestLabels {
    name: "breusch_godfrey",
    title: "Serial correlation (Breusch-Godfrey)",
    null: "No serial correlation",
    if_retained: "No serial correlation",
    if_rejected: "Serial correlation",
};

/// Jarque-Bera normality test from the sample skewness and kurtosis
/// (moments about the mean, divided by n).
pub fn jarque_bera(residuals: &[f64]) -> Result<TestResult> {
    let n = residuals.len();
    if n < 4 {
        return Err(Error::TooFewObservations { n, k: 4 });
    }
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let moment = |p: i32| residuals.iter().map(|e| (e - mean).powi(p)).sum::<f64>() / n as f64;
    let m2 = moment(2);
    if m2 == 0.0 {
        return Err(Error::ZeroVariance("residuals are constant".into()));
    }
    let skew = moment(3) / m2.powf(1.5);
    let kurt = moment(4) / (m2 * m2);
    let jb = n as f64 / 6.0 * (skew * skew + (kurt - 3.0).powi(2) / 4.0);
    Ok(JARQUE_BERA.result(jb, Df::Single(2), chi2_sf(jb, 2.0), n))
}

/// Design columns with an intercept guaranteed in front.
fn with_intercept(dm: &DesignMatrix) -> (DMatrix<f64>, Vec<String>) {
    if dm.has_intercept() {
        return (dm.x().clone(), dm.column_names().to_vec());
    }
    let x = dm.x().clone().insert_column(0, 1.0);
    let mut names = vec![crate::panel::INTERCEPT.to_string()];
    names.extend_from_slice(dm.column_names());
    (x, names)
}

/// Breusch-Pagan-Godfrey heteroskedasticity test: `n R^2` from regressing
/// squared residuals on the model's regressors.
pub fn breusch_pagan_godfrey(dm: &DesignMatrix, residuals: &[f64]) -> Result<TestResult> {
    check_len(dm, residuals)?;
    let (x, names) = with_intercept(dm);
    let k = x.ncols();
    if k < 2 {
        return Err(Error::NotEstimable(
            "heteroskedasticity test needs at least one regressor".into(),
        ));
    }
    let e2 = DVector::from_iterator(residuals.len(), residuals.iter().map(|e| e * e));
    let fit = least_squares(&x, &e2, &names)?;
    let r2 = r_squared(&e2, fit.resid.norm_squared());
    let n = residuals.len();
    let lm = n as f64 * r2;
    Ok(BREUSCH_PAGAN_GODFREY.result(lm, Df::Single(k - 1), chi2_sf(lm, (k - 1) as f64), n))
}

/// Breusch-Godfrey serial correlation test of order `lags`. Lags are taken
/// by year within each entity; rows lacking any lagged residual are
/// dropped from the auxiliary regression. The residuals are first
/// re-projected off the regressors on the remaining rows, so `LM` is
/// `n_aux` times the share of that remainder explained by the lags.
pub fn breusch_godfrey(dm: &DesignMatrix, residuals: &[f64], lags: usize) -> Result<TestResult> {
    check_len(dm, residuals)?;
    if lags == 0 {
        return Err(Error::InvalidInput("serial correlation test needs at least one lag".into()));
    }
    let lookup: HashMap<(&str, i32), f64> = dm
        .obs_index()
        .iter()
        .zip(residuals)
        .map(|(o, &e)| ((o.entity.as_str(), o.year), e))
        .collect();
    let (x, mut names) = with_intercept(dm);
    names.extend((1..=lags).map(|j| format!("resid(-{j})")));
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut target = Vec::new();
    for (i, o) in dm.obs_index().iter().enumerate() {
        let lagged: Option<Vec<f64>> = (1..=lags)
            .map(|j| lookup.get(&(o.entity.as_str(), o.year - j as i32)).copied())
            .collect();
        if let Some(lagged) = lagged {
            let mut row: Vec<f64> = x.row(i).iter().copied().collect();
            row.extend(lagged);
            rows.push(row);
            target.push(residuals[i]);
        }
    }
    let n_aux = rows.len();
    let k = x.ncols() + lags;
    if n_aux <= k {
        return Err(Error::TooFewObservations { n: n_aux, k });
    }
    let z = DMatrix::from_fn(n_aux, k, |r, c| rows[r][c]);
    let t = DVector::from_vec(target);
    let restricted = least_squares(&z.columns(0, x.ncols()).into_owned(), &t, &names[..x.ncols()])?;
    let ssr_restricted = restricted.resid.norm_squared();
    if ssr_restricted == 0.0 {
        return Err(Error::ZeroVariance("residuals on the auxiliary rows are fitted exactly".into()));
    }
    let fit = least_squares(&z, &t, &names)?;
    let lm = n_aux as f64 * (1.0 - fit.resid.norm_squared() / ssr_restricted);
    Ok(BREUSCH_GODFREY.result(lm, Df::Single(lags), chi2_sf(lm, lags as f64), n_aux))
}

fn check_len(dm: &DesignMatrix, residuals: &[f64]) -> Result<()> {
    if residuals.len() != dm.n() {
        return Err(Error::InvalidInput(format!(
            "{} residuals for {} observations",
            residuals.len(),
            dm.n()
        )));
    }
    Ok(())
}
