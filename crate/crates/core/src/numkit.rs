//! Dense complex linear algebra and seeded random sampling.
//!
//! Everything downstream is built from one primitive, the Hermitian
//! eigendecomposition [`herm_eig`]. Square roots, moduli, singular values and
//! polar factors are all derived from it.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::state::DensityOperator;

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Relative scale of the numerical-rank rule: an eigenvalue `λ` of a PSD
/// matrix of size `d` counts as zero when `λ <= d * λ_max * ZERO_CUTOFF`.
pub const ZERO_CUTOFF: f64 = 1e-12;

/// Relative tolerance for the Hermiticity gate in [`herm_eig`].
pub const HERMITIAN_TOL: f64 = 1e-10;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d, d)
}

pub fn diag(values: &[f64]) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(values.len(), values.len());
    for (i, v) in values.iter().enumerate() {
        m[(i, i)] = real(*v);
    }
    m
}

/// Entrywise transpose (no conjugation).
pub fn transpose(a: &ComplexMatrix) -> ComplexMatrix {
    a.transpose()
}

pub fn is_finite(a: &ComplexMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn hermitian_part(a: &ComplexMatrix) -> ComplexMatrix {
    (a + a.adjoint()) * real(0.5)
}

pub fn trace(a: &ComplexMatrix) -> Complex64 {
    a.trace()
}

/// Operator-norm distance of two equally sized matrices.
pub fn op_dist(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    op_norm(&(a - b))
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Which tensor factor of a bipartite operator is traced out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor {
    First,
    Second,
}

/// Partial trace of an operator on `C^d1 ⊗ C^d2`, flattened lexicographically
/// as `(a, b) -> a * d2 + b`.
pub fn partial_trace(
    m: &ComplexMatrix,
    dims: (usize, usize),
    traced: Factor,
) -> Result<ComplexMatrix> {
    let (d1, d2) = dims;
    let total = d1 * d2;
    if m.nrows() != total || m.ncols() != total {
        return Err(Error::DimensionMismatch(format!(
            "partial trace over ({d1}, {d2}) needs a {total}x{total} matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let out = match traced {
        Factor::Second => ComplexMatrix::from_fn(d1, d1, |a, c| {
            (0..d2).map(|b| m[(a * d2 + b, c * d2 + b)]).sum()
        }),
        Factor::First => ComplexMatrix::from_fn(d2, d2, |b, e| {
            (0..d1).map(|a| m[(a * d2 + b, a * d2 + e)]).sum()
        }),
    };
    Ok(out)
}

/// Spectral decomposition `H = Q diag(λ) Q†` of a Hermitian matrix.
///
/// Eigenvalues are sorted in descending order. Each eigenvector is rotated so
/// that its first entry of largest modulus is real and positive, which makes
/// the output a deterministic function of the input.
#[derive(Clone, Debug)]
pub struct HermEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermEig {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn max_abs(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0_f64, |acc, l| acc.max(l.abs()))
    }

    /// Threshold below which eigenvalues are numerically zero.
    pub fn zero_threshold(&self) -> f64 {
        let top = self.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
        self.dim() as f64 * top * ZERO_CUTOFF
    }

    /// Number of eigenvalues above the zero threshold.
    pub fn rank(&self) -> usize {
        let cut = self.zero_threshold();
        self.eigenvalues.iter().filter(|&&l| l > cut).count()
    }

    /// `Q diag(f(λ)) Q†`.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> ComplexMatrix {
        let d = self.dim();
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            let s = real(f(l));
            for i in 0..d {
                scaled[(i, j)] *= s;
            }
        }
        scaled * q.adjoint()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map(|l| l)
    }

    pub fn eigenvector(&self, j: usize) -> ComplexVector {
        self.eigenvectors.column(j).into_owned()
    }
}

pub fn herm_eig(h: &ComplexMatrix) -> Result<HermEig> {
    let d = h.nrows();
    if h.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            d,
            h.ncols()
        )));
    }
    if !is_finite(h) {
        return Err(Error::NonFinite);
    }
    if d == 0 {
        return Ok(HermEig {
            eigenvalues: Vec::new(),
            eigenvectors: ComplexMatrix::zeros(0, 0),
        });
    }

    let adj = h.adjoint();
    let sym = (h + &adj) * real(0.5);
    let anti = (h - &adj) * real(0.5);
    let eig = sym.symmetric_eigen();

    let scale = eig.eigenvalues.iter().fold(0.0_f64, |acc, l| acc.max(l.abs()));
    let tolerance = HERMITIAN_TOL * scale;
    let anti_frob = anti.norm();
    if anti_frob > tolerance {
        // Frobenius bounds the operator norm from above; settle it exactly.
        let defect = if scale > 0.0 {
            let ih = &anti * c64(0.0, 1.0);
            let ih = (&ih + ih.adjoint()) * real(0.5);
            ih.symmetric_eigen()
                .eigenvalues
                .iter()
                .fold(0.0_f64, |acc, l| acc.max(l.abs()))
        } else {
            anti_frob
        };
        if defect > tolerance {
            return Err(Error::NotHermitian { defect, tolerance });
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let eigenvalues: Vec<f64> = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let mut eigenvectors = ComplexMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let norm = col.norm();
        let mut pivot = Complex64::new(0.0, 0.0);
        let mut best = -1.0;
        for z in col.iter() {
            // first entry of (essentially) largest modulus wins ties
            if z.norm() > best * (1.0 + 1e-12) {
                best = z.norm();
                pivot = *z;
            }
        }
        let phase = if pivot.norm() > 0.0 {
            pivot.conj() / pivot.norm()
        } else {
            real(1.0)
        };
        for i in 0..d {
            eigenvectors[(i, dst)] = col[i] * phase / norm;
        }
    }

    Ok(HermEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Principal square root of a positive semidefinite matrix.
///
/// Eigenvalues in `[-d·‖p‖·1e-12, d·λ_max·1e-12]` are clipped to zero; anything
/// more negative is rejected.
pub fn psd_sqrt(p: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = herm_eig(p)?;
    psd_sqrt_from_eig(&eig)
}

pub fn psd_sqrt_from_eig(eig: &HermEig) -> Result<ComplexMatrix> {
    check_psd(eig)?;
    let cut = eig.zero_threshold();
    Ok(eig.map(|l| if l > cut { l.sqrt() } else { 0.0 }))
}

/// Rejects spectra with eigenvalues below `-d·‖p‖·1e-12`.
pub fn check_psd(eig: &HermEig) -> Result<()> {
    let threshold = -(eig.dim() as f64) * eig.max_abs() * ZERO_CUTOFF;
    match eig.eigenvalues.last() {
        Some(&low) if low < threshold => Err(Error::NotPositive {
            eigenvalue: low,
            threshold,
        }),
        _ => Ok(()),
    }
}

/// Singular value decomposition assembled from the eigendecomposition of
/// `A†A`. Singular values are recomputed as `‖A v_i‖`, which keeps tiny
/// singular values accurate to roundoff instead of to its square root.
#[derive(Clone, Debug)]
pub struct RightSvd {
    /// Non-negative, in the eigenvalue order of `A†A` (descending up to roundoff).
    pub singular_values: Vec<f64>,
    /// Orthonormal right singular vectors as columns.
    pub right: ComplexMatrix,
    /// Number of singular values above the numerical-rank cutoff.
    pub rank: usize,
}

pub fn right_svd(a: &ComplexMatrix) -> Result<RightSvd> {
    let gram = a.adjoint() * a;
    let eig = herm_eig(&gram)?;
    let rank = eig.rank();
    let av = a * &eig.eigenvectors;
    let singular_values = (0..av.ncols()).map(|j| av.column(j).norm()).collect();
    Ok(RightSvd {
        singular_values,
        right: eig.eigenvectors,
        rank,
    })
}

/// The modulus `|A| = √(A†A)`, of size `cols × cols`.
pub fn mat_abs(a: &ComplexMatrix) -> ComplexMatrix {
    if is_hermitian(a, 1e-14) {
        let eig = herm_eig(a).expect("checked Hermitian");
        return eig.map(f64::abs);
    }
    let svd = right_svd(a).expect("Gram matrices are Hermitian");
    let v = &svd.right;
    let mut scaled = v.clone();
    for (j, s) in svd.singular_values.iter().enumerate() {
        for i in 0..v.nrows() {
            scaled[(i, j)] *= real(*s);
        }
    }
    scaled * v.adjoint()
}

/// Sum of singular values. Hermitian inputs use `Σ|λ_i|`.
pub fn trace_norm(a: &ComplexMatrix) -> f64 {
    if is_hermitian(a, 1e-14) {
        let eig = herm_eig(a).expect("checked Hermitian");
        return eig.eigenvalues.iter().map(|l| l.abs()).sum();
    }
    singular_values(a).iter().sum()
}

pub fn singular_values(a: &ComplexMatrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    right_svd(a)
        .expect("Gram matrices are Hermitian")
        .singular_values
}

/// Largest singular value.
pub fn op_norm(a: &ComplexMatrix) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    if is_hermitian(a, 1e-14) {
        return herm_eig(a).expect("checked Hermitian").max_abs();
    }
    singular_values(a).into_iter().fold(0.0, f64::max)
}

/// `true` when `‖A - A†‖_F <= rel · ‖A‖_F`.
pub fn is_hermitian(a: &ComplexMatrix, rel: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    let defect = (a - a.adjoint()).norm();
    defect <= rel * a.norm()
}

/// Polar factors of a square matrix `A = W |A|`.
#[derive(Clone, Debug)]
pub struct Polar {
    /// Partial isometry supported on the numerical range of `A†`; zero on the
    /// numerical kernel.
    pub partial: ComplexMatrix,
    /// Unitary completion of `partial`, mapping the kernel of `A` onto the
    /// orthogonal complement of its range.
    pub unitary: ComplexMatrix,
    pub singular_values: Vec<f64>,
}

impl Polar {
    pub fn trace_norm(&self) -> f64 {
        self.singular_values.iter().sum()
    }
}

pub fn polar(a: &ComplexMatrix) -> Result<Polar> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "polar decomposition needs a square matrix, got {}x{}",
            d,
            a.ncols()
        )));
    }
    let svd = right_svd(a)?;
    let r = svd.rank;
    let mut partial = ComplexMatrix::zeros(d, d);
    for j in 0..r {
        let v = svd.right.column(j);
        let u = (a * v) / real(svd.singular_values[j]);
        partial += &u * v.adjoint();
    }
    let mut unitary = partial.clone();
    if r < d {
        let left = herm_eig(&(a * a.adjoint()))?;
        for k in 0..(d - r) {
            let u = left.eigenvectors.column(r + k);
            let v = svd.right.column(r + k);
            unitary += u * v.adjoint();
        }
    }
    Ok(Polar {
        partial,
        unitary,
        singular_values: svd.singular_values,
    })
}

fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    // column-major fill order, fixed for reproducibility
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(re * scale, im * scale)
    })
}

/// Haar-distributed unitary via QR of a complex Gaussian matrix, with the
/// diagonal phases of `R` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    assert!(d >= 1, "dimension must be positive");
    let g = ginibre(d, d, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            real(1.0)
        };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random density of the requested rank: `G†G / tr(G†G)` with `G` a
/// `rank × d` complex Gaussian matrix.
pub fn random_density<R: Rng + ?Sized>(
    d: usize,
    rank: usize,
    rng: &mut R,
) -> Result<DensityOperator> {
    if d == 0 || rank == 0 || rank > d {
        return Err(Error::OutOfRange(format!(
            "rank {rank} must lie in 1..={d}"
        )));
    }
    let g = ginibre(rank, d, rng);
    let p = g.adjoint() * g;
    let tr = p.trace().re;
    DensityOperator::new(p / real(tr))
}

/// Random unit vector, uniform on the sphere of `C^d`.
pub fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexVector {
    let g = ginibre(d, 1, rng);
    let n = g.norm();
    ComplexVector::from_iterator(d, g.iter().map(|z| z / n))
}

/// Random PSD matrix `G†G` (not normalized).
pub fn random_psd<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(d, d, rng);
    g.adjoint() * g
}

pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    hermitian_part(&ginibre(d, d, rng))
}

pub fn random_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ginibre(rows, cols, rng)
}
