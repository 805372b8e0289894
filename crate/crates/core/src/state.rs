use crate::error::{Error, Result};
use crate::numkit::{self, herm_eig, real, ComplexMatrix, ComplexVector};

/// Tolerance on `|tr ρ - 1|`.
pub const TRACE_TOL: f64 = 1e-10;

/// A density operator: Hermitian, positive semidefinite, unit trace.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
}

impl DensityOperator {
    /// Validates and stores the Hermitian part of `matrix`.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let d = matrix.nrows();
        if d == 0 || matrix.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "density must be square and nonempty, got {}x{}",
                d,
                matrix.ncols()
            )));
        }
        let eig = herm_eig(&matrix)?;
        let floor = -(d as f64) * 1e-12;
        let low = *eig.eigenvalues.last().unwrap();
        if low < floor {
            return Err(Error::NotPositive {
                eigenvalue: low,
                threshold: floor,
            });
        }
        let trace = matrix.trace().re;
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::NotNormalized { trace });
        }
        Ok(Self {
            matrix: numkit::hermitian_part(&matrix),
        })
    }

    /// Skips validation; the caller guarantees a valid state up to roundoff.
    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        Self {
            matrix: numkit::hermitian_part(&matrix),
        }
    }

    pub fn pure(psi: &ComplexVector) -> Result<Self> {
        let n = psi.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::OutOfRange("state vector must be nonzero".into()));
        }
        let v = psi / real(n);
        Ok(Self::from_trusted(&v * v.adjoint()))
    }

    pub fn basis(d: usize, i: usize) -> Self {
        let mut m = ComplexMatrix::zeros(d, d);
        m[(i, i)] = real(1.0);
        Self { matrix: m }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            matrix: numkit::identity(d) / real(d as f64),
        }
    }

    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        Self::new(numkit::diag(probs))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Entrywise transpose `ρ̃`, equal to the complex conjugate for Hermitian `ρ`.
    pub fn transpose(&self) -> Self {
        Self {
            matrix: self.matrix.transpose(),
        }
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        herm_eig(&self.matrix)
            .map(|e| e.eigenvalues)
            .unwrap_or_default()
    }

    /// `(1 - t) self + t other`.
    pub fn mix(&self, other: &Self, t: f64) -> Self {
        Self::from_trusted(&self.matrix * real(1.0 - t) + &other.matrix * real(t))
    }

    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Self {
        Self::from_trusted(u * &self.matrix * u.adjoint())
    }
}
