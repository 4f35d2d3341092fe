//! Monte Carlo propagation of distributions.
//!
//! Inputs are coupled through a gaussian copula: correlated standard normals
//! are pushed through each marginal's inverse CDF. Draw `i` uses its own
//! keyed stream, so the result does not depend on evaluation order.

use libm::erfc;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::summation::{mean, pairwise_sum_by};
use super::{Measurement, UncertaintyError};
use crate::rng::keyed_rng;
use crate::units::{QuantityKind, Unit};

pub const MIN_DRAWS: usize = 10_000;

/// Coverage probability of the reported interval.
pub const COVERAGE_PROBABILITY: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Gaussian {
        mean: f64,
        sigma: f64,
    },
    Uniform {
        lower: f64,
        upper: f64,
    },
    /// Symmetric triangular distribution on `[lower, upper]`.
    Triangular {
        lower: f64,
        upper: f64,
    },
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<(), UncertaintyError> {
        let ok = match *self {
            DistributionSpec::Gaussian { mean, sigma } => sigma > 0.0 && sigma.is_finite() && mean.is_finite(),
            DistributionSpec::Uniform { lower, upper } | DistributionSpec::Triangular { lower, upper } => {
                lower < upper && lower.is_finite() && upper.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(UncertaintyError::InvalidDistribution(*self))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DistributionSpec::Gaussian { mean, .. } => mean,
            DistributionSpec::Uniform { lower, upper } | DistributionSpec::Triangular { lower, upper } => {
                0.5 * (lower + upper)
            }
        }
    }

    pub fn std_dev(&self) -> f64 {
        match *self {
            DistributionSpec::Gaussian { sigma, .. } => sigma,
            DistributionSpec::Uniform { lower, upper } => (upper - lower) / 12f64.sqrt(),
            DistributionSpec::Triangular { lower, upper } => (upper - lower) / 24f64.sqrt(),
        }
    }

    /// Maps a standard normal variate through this marginal.
    fn from_normal(&self, z: f64) -> f64 {
        match *self {
            DistributionSpec::Gaussian { mean, sigma } => mean + sigma * z,
            DistributionSpec::Uniform { lower, upper } => lower + (upper - lower) * std_normal_cdf(z),
            DistributionSpec::Triangular { lower, upper } => {
                let p = std_normal_cdf(z);
                let w = upper - lower;
                if p < 0.5 {
                    lower + w * (p / 2.0).sqrt()
                } else {
                    upper - w * ((1.0 - p) / 2.0).sqrt()
                }
            }
        }
    }
}

/// Φ(z).
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Factor `L` with `L Lᵀ = corr` for a PSD correlation matrix.
fn correlation_factor(corr: &DMatrix<f64>) -> Result<DMatrix<f64>, UncertaintyError> {
    let n = corr.nrows();
    if corr.ncols() != n {
        return Err(UncertaintyError::NonPsdCorrelation("matrix is not square".into()));
    }
    for i in 0..n {
        if (corr[(i, i)] - 1.0).abs() > 1e-12 {
            return Err(UncertaintyError::NonPsdCorrelation(format!("diagonal entry {i} is not 1")));
        }
        for j in 0..n {
            if (corr[(i, j)] - corr[(j, i)]).abs() > 1e-12 || corr[(i, j)].abs() > 1.0 + 1e-12 {
                return Err(UncertaintyError::NonPsdCorrelation(format!("entry ({i}, {j}) invalid")));
            }
        }
    }
    let eig = SymmetricEigen::new(corr.clone());
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -1e-12 * n as f64 {
        return Err(UncertaintyError::NonPsdCorrelation(format!("smallest eigenvalue {min:e}")));
    }
    let roots = DVector::from_iterator(n, eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    /// Sample mean and sample standard deviation (reported as `u_random`).
    pub estimate: Measurement,
    /// Shortest interval holding [`COVERAGE_PROBABILITY`] of the draws.
    pub coverage: (f64, f64),
    pub n_draws: usize,
}

impl MonteCarloResult {
    /// Monte Carlo standard error of the mean estimate.
    pub fn standard_error_of_value(&self) -> f64 {
        self.estimate.u_c() / (self.n_draws as f64).sqrt()
    }

    /// Monte Carlo standard error of the standard-deviation estimate (gaussian approximation).
    pub fn standard_error_of_uncertainty(&self) -> f64 {
        self.estimate.u_c() / (2.0 * self.n_draws as f64).sqrt()
    }
}

/// Propagates `inputs` through `model` by sampling.
///
/// `correlation` is `None` for independent inputs.
pub fn monte_carlo_propagate<F>(
    model: F,
    inputs: &[DistributionSpec],
    correlation: Option<&DMatrix<f64>>,
    n_draws: usize,
    seed: u64,
    output_unit: &Unit,
) -> Result<MonteCarloResult, UncertaintyError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if n_draws < MIN_DRAWS {
        return Err(UncertaintyError::TooFewDraws { requested: n_draws, minimum: MIN_DRAWS });
    }
    for d in inputs {
        d.validate()?;
    }
    let n = inputs.len();
    let factor = match correlation {
        Some(c) if c.nrows() != n => {
            return Err(UncertaintyError::LengthMismatch { expected: n, found: c.nrows() });
        }
        Some(c) => Some(correlation_factor(c)?),
        None => None,
    };

    let draws: Vec<f64> = (0..n_draws)
        .into_par_iter()
        .map_init(
            || (vec![0.0; n], vec![0.0; n]),
            |(z, x), i| {
                let mut rng = keyed_rng(seed, i as u64);
                for zj in z.iter_mut() {
                    *zj = StandardNormal.sample(&mut rng);
                }
                match &factor {
                    Some(l) => {
                        for (r, (xr, spec)) in x.iter_mut().zip(inputs).enumerate() {
                            let mut acc = 0.0;
                            for (c, zc) in z.iter().enumerate() {
                                acc += l[(r, c)] * zc;
                            }
                            *xr = spec.from_normal(acc);
                        }
                    }
                    None => {
                        for ((xr, spec), zr) in x.iter_mut().zip(inputs).zip(z.iter()) {
                            *xr = spec.from_normal(*zr);
                        }
                    }
                }
                model(x)
            },
        )
        .collect();

    if let Some(draw) = draws.iter().position(|y| !y.is_finite()) {
        return Err(UncertaintyError::ModelEvaluationFailure { draw });
    }

    let m = mean(&draws);
    let var = pairwise_sum_by(&draws, |y| (y - m) * (y - m)) / (n_draws - 1) as f64;
    let coverage = shortest_interval(draws, COVERAGE_PROBABILITY);
    let estimate =
        Measurement::new(m, var.sqrt(), 0.0, output_unit.clone(), QuantityKind::for_dimension(output_unit.dims()))?;
    Ok(MonteCarloResult { estimate, coverage, n_draws })
}

/// Shortest interval containing `ceil(p·n)` of the sorted draws.
pub fn shortest_interval(mut draws: Vec<f64>, p: f64) -> (f64, f64) {
    draws.par_sort_unstable_by(f64::total_cmp);
    let n = draws.len();
    let q = ((p * n as f64).ceil() as usize).clamp(1, n);
    let mut best = (draws[0], draws[q - 1]);
    for i in 1..=(n - q) {
        let (lo, hi) = (draws[i], draws[i + q - 1]);
        if hi - lo < best.1 - best.0 {
            best = (lo, hi);
        }
    }
    best
}
