//! Small estimators shared by the scenario drivers.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Result, SimError};
use crate::fields::Grid;

/// Fraction `k/n` with its binomial standard error.
pub fn binomial_fraction(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = k as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

/// Mean and standard error of the mean.
pub fn mean_with_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return (xs.first().copied().unwrap_or(f64::NAN), f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson test of 1D samples against a density sampled on `grid`.
/// Cells are grouped left to right into bins of at least `min_expected`
/// expected counts; the remainder is merged into the last bin.
pub fn chi_square_against_density(samples: &[f64], grid: &Grid, rho: &[f64], min_expected: f64) -> Result<ChiSquare> {
    if grid.dims() != 1 || rho.len() != grid.len() {
        return Err(SimError::InvalidArgument("chi-square test needs a 1D density on its grid".into()));
    }
    let n = samples.len() as f64;
    let ax = grid.axis(0);
    let total: f64 = rho.iter().sum();
    // bin edges at cell boundaries
    let mut edges = vec![ax.first() - 0.5 * ax.spacing];
    let mut expected = Vec::new();
    let mut acc = 0.0;
    for (i, r) in rho.iter().enumerate() {
        acc += r / total * n;
        if acc >= min_expected {
            expected.push(acc);
            edges.push(ax.coord(i) + 0.5 * ax.spacing);
            acc = 0.0;
        }
    }
    if let Some(last) = expected.last_mut() {
        *last += acc;
        *edges.last_mut().unwrap() = ax.last() + 0.5 * ax.spacing;
    }
    if expected.len() < 2 {
        return Err(SimError::InvalidArgument("too few samples for a chi-square test".into()));
    }
    let mut observed = vec![0.0; expected.len()];
    for s in samples {
        let k = edges.partition_point(|e| e <= s);
        if k >= 1 && k <= expected.len() {
            observed[k - 1] += 1.0;
        } else if k == 0 {
            observed[0] += 1.0;
        } else {
            observed[expected.len() - 1] += 1.0;
        }
    }
    let statistic: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = expected.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| SimError::InvalidArgument(e.to_string()))?;
    Ok(ChiSquare { statistic, dof, p_value: 1.0 - dist.cdf(statistic) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Axis;
    use crate::rng::stream;
    use crate::trajectories::sample_initial_positions;

    #[test]
    fn binomial_error() {
        let (p, s) = binomial_fraction(7500, 10_000);
        assert_eq!(p, 0.75);
        assert!((s - (0.75f64 * 0.25 / 1e4).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn samples_from_the_density_pass_and_shifted_ones_fail() {
        let grid = Grid::line(Axis::centered(512, 0.02).unwrap());
        let rho: Vec<f64> = grid.axis(0).coords().iter().map(|x| (-x * x).exp()).collect();
        let xs: Vec<f64> = sample_initial_positions(&grid, &rho, 10_000, &mut stream(1, "chi"))
            .unwrap()
            .into_iter()
            .map(|v| v[0])
            .collect();
        let ok = chi_square_against_density(&xs, &grid, &rho, 5.0).unwrap();
        assert!(ok.p_value > 0.001, "{ok:?}");
        let shifted: Vec<f64> = xs.iter().map(|x| x + 0.1).collect();
        let bad = chi_square_against_density(&shifted, &grid, &rho, 5.0).unwrap();
        assert!(bad.p_value < 1e-6, "{bad:?}");
    }
}
