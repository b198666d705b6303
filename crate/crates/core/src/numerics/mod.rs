//! Dense symmetric linear algebra and distribution tails.

mod dist;
mod linalg;
mod special;

pub use dist::{chi2_sf, f_sf, normal_cdf, normal_sf, t_sf, t_two_sided};
pub use linalg::{
    cholesky, collinear_column, inverse_sqrt, max_abs, pseudo_inverse, spd_inverse, spd_solve,
    SymMatrix, EIGEN_FLOOR, RANK_TOLERANCE,
};
pub use special::{beta_reg, erfc, gamma_p, gamma_q, ln_gamma};

use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "pearson: lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput("pearson: need at least two points".into()));
    }
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance("pearson: constant series".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
