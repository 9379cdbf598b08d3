//! Log-log rate fitting of Monte-Carlo excess-risk ladders.

use crate::error::{Error, Result};

use super::runner::TrialRecord;

/// Weighted least-squares fit of `log(mean excess)` against `log n`.
#[derive(Clone, Debug)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    pub r2: f64,
    /// `(n, mean, standard error of the mean)` per ladder rung.
    pub points: Vec<(usize, f64, f64)>,
}

/// Group records by `n`, average the excess, and fit a power law.
///
/// The fit runs on `(log n, log mean)` with weights `1/se_log^2` where
/// `se_log = se_mean / mean`; degenerate standard errors fall back to an
/// unweighted fit.
pub fn fit_rate(records: &[TrialRecord], metric: impl Fn(&TrialRecord) -> f64) -> Result<RateFit> {
    let mut by_n: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for r in records {
        by_n.entry(r.n).or_default().push(metric(r));
    }
    if by_n.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "rate fit needs >= 3 distinct sample sizes, got {}",
            by_n.len()
        )));
    }
    let mut points = Vec::with_capacity(by_n.len());
    for (n, vals) in &by_n {
        let count = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / count;
        if !(mean > 0.0) {
            return Err(Error::Numeric(format!(
                "nonpositive mean excess {mean} at n = {n}"
            )));
        }
        let se = if vals.len() > 1 {
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
            (var / count).sqrt()
        } else {
            0.0
        };
        points.push((*n, mean, se));
    }

    let xs: Vec<f64> = points.iter().map(|(n, _, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, m, _)| m.ln()).collect();
    let se_logs: Vec<f64> = points.iter().map(|(_, m, se)| se / m).collect();
    let weighted = se_logs.iter().all(|s| *s > 0.0 && s.is_finite());
    let ws: Vec<f64> = if weighted {
        se_logs.iter().map(|s| 1.0 / (s * s)).collect()
    } else {
        vec![1.0; xs.len()]
    };

    let wsum: f64 = ws.iter().sum();
    let xbar = xs.iter().zip(&ws).map(|(x, w)| x * w).sum::<f64>() / wsum;
    let ybar = ys.iter().zip(&ws).map(|(y, w)| y * w).sum::<f64>() / wsum;
    let sxx: f64 = xs.iter().zip(&ws).map(|(x, w)| w * (x - xbar).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Numeric("degenerate design in rate fit".into()));
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .zip(&ws)
        .map(|((x, y), w)| w * (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;

    let resid: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();
    let dof = (xs.len() as f64 - 2.0).max(1.0);
    let stderr = if weighted {
        // Scale the nominal variance by the reduced chi-square.
        let chi2: f64 = resid.iter().zip(&ws).map(|(r, w)| w * r * r).sum();
        ((chi2 / dof).max(1.0) / sxx).sqrt()
    } else {
        let s2: f64 = resid.iter().map(|r| r * r).sum::<f64>() / dof;
        (s2 / sxx).sqrt()
    };
    let ss_tot: f64 = ys
        .iter()
        .zip(&ws)
        .map(|(y, w)| w * (y - ybar).powi(2))
        .sum();
    let ss_res: f64 = resid.iter().zip(&ws).map(|(r, w)| w * r * r).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(RateFit {
        slope,
        intercept,
        stderr,
        r2,
        points,
    })
}
