//! Log-log rate fits of a sweep column against `n`.

use std::collections::BTreeMap;
use std::io::Read;

use densiwae::stats::loglog_fit;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    /// Smallest and largest `n` entering the fit.
    pub n_range: (usize, usize),
    /// `(n, mean loss)` pairs that were fitted.
    pub means: Vec<(usize, f64)>,
    /// Rows dropped for a nonpositive or non-finite loss.
    pub excluded: usize,
}

/// OLS of `ln(mean loss)` on `ln n` over rows with `n` inside `n_range`.
pub fn fit_rate<R: Read>(csv: R, loss_column: &str, n_range: Option<(usize, usize)>) -> CliResult<RateFit> {
    let mut rdr = csv::Reader::from_reader(csv);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::config(format!("csv lacks column `{}`", name)))
    };
    let (ni, li) = (find("n")?, find(loss_column)?);
    let (lo, hi) = n_range.unwrap_or((0, usize::MAX));
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut excluded = 0;
    for row in rdr.records() {
        let row = row?;
        let n: usize = row[ni].trim().parse().map_err(|_| CliError::config(format!("bad n `{}`", &row[ni])))?;
        if n < lo || n > hi {
            continue;
        }
        let v: f64 = row[li].trim().parse().map_err(|_| CliError::config(format!("bad loss `{}`", &row[li])))?;
        if v > 0.0 && v.is_finite() {
            groups.entry(n).or_default().push(v);
        } else {
            excluded += 1;
        }
    }
    if groups.len() < 3 {
        return Err(CliError::config(format!(
            "rate fit needs >= 3 distinct n with positive losses, got {}",
            groups.len()
        )));
    }
    let means: Vec<(usize, f64)> = groups.iter().map(|(&n, v)| (n, v.iter().sum::<f64>() / v.len() as f64)).collect();
    let x: Vec<f64> = means.iter().map(|m| m.0 as f64).collect();
    let y: Vec<f64> = means.iter().map(|m| m.1).collect();
    let fit = loglog_fit(&x, &y)?;
    Ok(RateFit {
        slope: fit.slope,
        intercept: fit.intercept,
        slope_se: fit.slope_se,
        n_range: (means[0].0, means[means.len() - 1].0),
        means,
        excluded,
    })
}
