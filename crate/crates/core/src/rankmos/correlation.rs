//! Correlation criteria for comparing predicted and reference quality scores.

use crate::error::{Error, Result};

/// 1-based ascending ranks; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Result<Vec<f64>> {
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("NaN cannot be ranked".into()));
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        // positions start+1 ..= end share (start + 1 + end) / 2
        let r = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    Ok(ranks)
}

fn check_pair(name: &str, x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::shape("correlation", format!("{name}: lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::invalid(format!("{name} needs at least two samples")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{name} input")));
    }
    Ok(())
}

fn check_not_constant(name: &str, x: &[f64], y: &[f64]) -> Result<()> {
    let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
    if constant(x) || constant(y) {
        return Err(Error::invalid(format!("{name} is undefined for a constant input")));
    }
    Ok(())
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Pearson linear correlation on raw values (no logistic fitting).
pub fn plcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair("PLCC", x, y)?;
    check_not_constant("PLCC", x, y)?;
    Ok(pearson(x, y))
}

/// Spearman rank-order correlation: Pearson on average ranks.
pub fn srocc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair("SROCC", x, y)?;
    check_not_constant("SROCC", x, y)?;
    Ok(pearson(&average_ranks(x)?, &average_ranks(y)?))
}

/// Kendall's tau-b over all pairs.
pub fn krocc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair("KROCC", x, y)?;
    check_not_constant("KROCC", x, y)?;
    let n = x.len();
    let (mut concordant, mut discordant, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                tie_x += 1;
            }
            if dy == 0.0 {
                tie_y += 1;
            }
            if dx != 0.0 && dy != 0.0 {
                if (dx > 0.0) == (dy > 0.0) {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom = (((n0 - tie_x) as f64) * ((n0 - tie_y) as f64)).sqrt();
    Ok((concordant - discordant) as f64 / denom)
}

pub fn rmse(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair("RMSE", x, y)?;
    let s: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((s / x.len() as f64).sqrt())
}

/// All four criteria at once.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CorrelationReport {
    pub srocc: f64,
    pub plcc: f64,
    pub krocc: f64,
    pub rmse: f64,
    pub n: usize,
}

impl CorrelationReport {
    pub fn compute(pred: &[f64], labels: &[f64]) -> Result<Self> {
        Ok(Self {
            srocc: srocc(pred, labels)?,
            plcc: plcc(pred, labels)?,
            krocc: krocc(pred, labels)?,
            rmse: rmse(pred, labels)?,
            n: pred.len(),
        })
    }
}
