use super::{dist::student_t_sf, mean, StatResult, TestKind};
use crate::error::{Error, Result};

/// Pearson correlation with a two-sided p-value from the t mapping
/// `t = r·√(n−2) / √(1−r²)` on `n − 2` degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<StatResult> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "correlation inputs differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("correlation needs n >= 3, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in correlation input"));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::InsufficientData("correlation input has zero variance".into()));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if 1.0 - r.abs() < 1e-15 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        2.0 * student_t_sf(t.abs(), df.max(1.0))?
    };
    Ok(StatResult::new(TestKind::Pearson, r, p, n))
}
