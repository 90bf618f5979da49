use super::{dist::chi_square_sf, StatResult, TestKind};
use crate::error::{Error, Result};

/// Ranks starting at 1, ties receiving the mean of the ranks they span.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Kruskal–Wallis H with tie correction, p from chi-square on `k − 1` df.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<StatResult> {
    if groups.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "Kruskal-Wallis needs at least 2 groups, got {}",
            groups.len()
        )));
    }
    if let Some(i) = groups.iter().position(|g| g.is_empty()) {
        return Err(Error::InsufficientData(format!("group {i} is empty")));
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    if pooled.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in Kruskal-Wallis input"));
    }
    let n = pooled.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("Kruskal-Wallis needs n >= 3, got {n}")));
    }
    let nf = n as f64;
    let ranks = midranks(&pooled);

    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    let correction = 1.0 - ties / (nf * nf * nf - nf);
    if correction <= 0.0 {
        let mut r = StatResult::new(TestKind::KruskalWallis, 0.0, 1.0, n);
        r.note = Some("all values identical".into());
        return Ok(r);
    }

    let mut sum = 0.0;
    let mut offset = 0;
    for g in groups {
        let rs: f64 = ranks[offset..offset + g.len()].iter().sum();
        sum += rs * rs / g.len() as f64;
        offset += g.len();
    }
    let h = ((12.0 / (nf * (nf + 1.0)) * sum - 3.0 * (nf + 1.0)) / correction).max(0.0);
    let p = chi_square_sf(h, (groups.len() - 1) as f64)?;
    Ok(StatResult::new(TestKind::KruskalWallis, h, p, n))
}
