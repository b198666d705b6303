use super::special::{beta_reg, erfc, gamma_q};

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    assert!(df > 0.0, "chi-square degrees of freedom must be positive");
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(0.5 * df, 0.5 * x).clamp(0.0, 1.0)
}

/// Upper tail of the F distribution with (`df1`, `df2`) degrees of freedom.
pub fn f_sf(x: f64, df1: f64, df2: f64) -> f64 {
    assert!(df1 > 0.0 && df2 > 0.0, "F degrees of freedom must be positive");
    if x <= 0.0 {
        return 1.0;
    }
    beta_reg(0.5 * df2, 0.5 * df1, df2 / (df2 + df1 * x)).clamp(0.0, 1.0)
}

/// Upper tail of Student's t with `df` degrees of freedom.
pub fn t_sf(x: f64, df: f64) -> f64 {
    assert!(df > 0.0, "t degrees of freedom must be positive");
    if x == 0.0 {
        return 0.5;
    }
    let tail = 0.5 * beta_reg(0.5 * df, 0.5, df / (df + x * x));
    if x > 0.0 {
        tail.clamp(0.0, 0.5)
    } else {
        (1.0 - tail).clamp(0.5, 1.0)
    }
}

/// Two-sided p-value of a t statistic.
pub fn t_two_sided(t: f64, df: f64) -> f64 {
    (2.0 * t_sf(t.abs(), df)).min(1.0)
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}
