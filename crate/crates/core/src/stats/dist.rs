use statrs::function::beta::beta_reg;
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};

/// Upper tail `P(T > t)` of Student's t with `df` degrees of freedom.
pub fn student_t_sf(t: f64, df: f64) -> Result<f64> {
    if !(df >= 1.0) {
        return Err(Error::invalid(format!("degrees of freedom must be >= 1, got {df}")));
    }
    if t.is_nan() {
        return Err(Error::invalid("t statistic is NaN"));
    }
    if t.is_infinite() {
        return Ok(if t > 0.0 { 0.0 } else { 1.0 });
    }
    let tail = 0.5 * beta_reg(df / 2.0, 0.5, df / (df + t * t));
    Ok(if t >= 0.0 { tail } else { 1.0 - tail })
}

/// Upper tail `P(X > x)` of the chi-square distribution, `Q(df/2, x/2)`.
pub fn chi_square_sf(x: f64, df: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::invalid(format!("chi-square value must be non-negative, got {x}")));
    }
    if !(df >= 1.0) {
        return Err(Error::invalid(format!("degrees of freedom must be >= 1, got {df}")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(gamma_ur(df / 2.0, x / 2.0))
}
