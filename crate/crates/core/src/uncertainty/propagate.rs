//! First-order (linear) propagation of uncertainty.

use nalgebra::DMatrix;

use super::summation::pairwise_sum;
use super::{Measurement, UncertaintyError};
use crate::units::{QuantityKind, Unit};

/// Slack below zero tolerated on a quadratic form before it counts as non-PSD,
/// relative to the magnitude of its terms.
pub const PSD_TOLERANCE: f64 = 1e-12;

/// Input estimates with their joint covariance.
///
/// `systematic[i]` marks inputs whose contribution is reported in the output's
/// systematic component.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertainVector {
    values: Vec<f64>,
    covariance: DMatrix<f64>,
    units: Vec<Unit>,
    systematic: Vec<bool>,
}

impl UncertainVector {
    pub fn new(values: Vec<f64>, covariance: DMatrix<f64>, units: Vec<Unit>) -> Result<Self, UncertaintyError> {
        let n = values.len();
        if covariance.nrows() != n || covariance.ncols() != n || units.len() != n {
            return Err(UncertaintyError::LengthMismatch {
                expected: n,
                found: if units.len() != n { units.len() } else { covariance.nrows() },
            });
        }
        for i in 0..n {
            if !(covariance[(i, i)] >= 0.0) {
                return Err(UncertaintyError::NegativeUncertainty(covariance[(i, i)]));
            }
            for j in (i + 1)..n {
                let (a, b) = (covariance[(i, j)], covariance[(j, i)]);
                let scale = a.abs().max(b.abs());
                if (a - b).abs() > 1e-12 * scale {
                    return Err(UncertaintyError::NonSymmetric { row: i, col: j });
                }
            }
        }
        Ok(UncertainVector { values, covariance, units, systematic: vec![false; n] })
    }

    /// Uncorrelated inputs with standard uncertainties `u`.
    pub fn independent(values: Vec<f64>, u: &[f64], units: Vec<Unit>) -> Result<Self, UncertaintyError> {
        if u.len() != values.len() {
            return Err(UncertaintyError::LengthMismatch { expected: values.len(), found: u.len() });
        }
        let cov = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(u.len(), u.iter().map(|x| x * x)));
        Self::new(values, cov, units)
    }

    /// Inputs with standard uncertainties `u` and correlation matrix `corr`.
    pub fn correlated(
        values: Vec<f64>,
        u: &[f64],
        corr: &DMatrix<f64>,
        units: Vec<Unit>,
    ) -> Result<Self, UncertaintyError> {
        let n = values.len();
        if u.len() != n || corr.nrows() != n || corr.ncols() != n {
            return Err(UncertaintyError::LengthMismatch { expected: n, found: u.len() });
        }
        let cov = DMatrix::from_fn(n, n, |i, j| corr[(i, j)] * u[i] * u[j]);
        Self::new(values, cov, units)
    }

    /// Marks which inputs are systematic.
    pub fn with_systematic(mut self, flags: Vec<bool>) -> Result<Self, UncertaintyError> {
        if flags.len() != self.values.len() {
            return Err(UncertaintyError::LengthMismatch { expected: self.values.len(), found: flags.len() });
        }
        self.systematic = flags;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn systematic(&self) -> &[bool] {
        &self.systematic
    }

    pub fn std_uncertainty(&self, i: usize) -> f64 {
        self.covariance[(i, i)].sqrt()
    }

    /// Correlation coefficient; 0 when either variance is 0.
    pub fn correlation(&self, i: usize, j: usize) -> f64 {
        let d = self.std_uncertainty(i) * self.std_uncertainty(j);
        if d == 0.0 {
            0.0
        } else {
            self.covariance[(i, j)] / d
        }
    }
}

/// Sensitivity coefficient `∂y/∂xᵢ` with its unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensitivity {
    pub value: f64,
    pub unit: Unit,
}

impl Sensitivity {
    pub fn new(value: f64, unit: Unit) -> Self {
        Sensitivity { value, unit }
    }
}

impl From<f64> for Sensitivity {
    fn from(value: f64) -> Self {
        Sensitivity { value, unit: Unit::dimensionless() }
    }
}

/// `c · Cov · cᵀ` restricted to indices where `mask` holds, with the sum of
/// absolute terms for tolerance scaling.
fn quadratic_form(c: &[f64], cov: &DMatrix<f64>, mask: impl Fn(usize) -> bool) -> (f64, f64) {
    let n = c.len();
    let mut terms = Vec::with_capacity(n * n);
    for i in (0..n).filter(|&i| mask(i)) {
        for j in (0..n).filter(|&j| mask(j)) {
            terms.push(c[i] * c[j] * cov[(i, j)]);
        }
    }
    let magnitude = pairwise_sum(&terms.iter().map(|t| t.abs()).collect::<Vec<_>>());
    (pairwise_sum(&terms), magnitude)
}

/// Linear combination `y = Σ cᵢ xᵢ` with `u²(y) = c · Cov · cᵀ`.
///
/// The systematic output component is the quadratic form over inputs flagged
/// systematic; the remainder is reported as random.
pub fn combine_linear(
    sensitivities: &[Sensitivity],
    inputs: &UncertainVector,
    output_unit: &Unit,
) -> Result<Measurement, UncertaintyError> {
    if sensitivities.len() != inputs.len() {
        return Err(UncertaintyError::LengthMismatch { expected: inputs.len(), found: sensitivities.len() });
    }
    for (i, (s, u)) in sensitivities.iter().zip(inputs.units()).enumerate() {
        let product = s.unit.dims().mul(u.dims());
        if product != output_unit.dims() {
            return Err(UncertaintyError::DimensionMismatch {
                index: i,
                expected: output_unit.dims().to_string(),
                found: product.to_string(),
            });
        }
    }
    // Convert each term into the output unit.
    let c: Vec<f64> = sensitivities
        .iter()
        .zip(inputs.units())
        .map(|(s, u)| s.value * s.unit.mul(u).conversion_factor(output_unit).unwrap_or(1.0))
        .collect();
    let value = pairwise_sum(&c.iter().zip(inputs.values()).map(|(ci, xi)| ci * xi).collect::<Vec<_>>());

    let (total, magnitude) = quadratic_form(&c, inputs.covariance(), |_| true);
    let slack = PSD_TOLERANCE * magnitude.max(1.0);
    if total < -slack || total.is_nan() {
        return Err(UncertaintyError::NonPsdCovariance { quadratic_form: total });
    }
    let total = total.max(0.0);
    let flags = inputs.systematic();
    let (sys, _) = quadratic_form(&c, inputs.covariance(), |i| flags[i]);
    let sys = sys.max(0.0);
    let (u_systematic, u_random) = if sys <= total { (sys.sqrt(), (total - sys).sqrt()) } else { (total.sqrt(), 0.0) };

    Measurement::new(
        value,
        u_random,
        u_systematic,
        output_unit.clone(),
        QuantityKind::for_dimension(output_unit.dims()),
    )
}
