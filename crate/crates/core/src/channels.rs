//! Channel representations: Schrödinger-picture Kraus lists and channel
//! densities (Choi-type kernels), conversions between them, and their actions.
//!
//! Conventions. A channel `T: M_m -> M_n` is stored as Kraus operators `K_j`
//! (each `n × m`) with `T(ρ) = Σ K_j ρ K_j†`. The dual (Heisenberg) map under
//! the bilinear pairing `⟨A, ρ⟩ = tr(Aᵀρ)` is `Φ(B) = Σ F_j† B F_j` with
//! `F_j = conj(K_j)`. The channel density lives on `C^m ⊗ C^n` (input factor
//! first) with entries `⟨x,i|Φ_μ|y,k⟩ = ⟨x|Φ(|i⟩⟨k|)|y⟩`; its partial trace
//! over the output factor is `Φ(I) = I_m`, and `T(ρ) = tr_in[(ρ̃ ⊗ I) Φ_μ]`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numkit::{
    self, check_psd, herm_eig, op_dist, partial_trace, psd_sqrt, real, ComplexMatrix,
    ComplexVector, Factor,
};
use crate::state::DensityOperator;

/// Trace-preservation tolerance on `‖Σ K†K - I‖_op`.
pub const TP_TOL: f64 = 1e-9;

/// Tolerance on `‖tr_out Φ_μ - I‖_op`.
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    dim_in: usize,
    dim_out: usize,
    kraus: Vec<ComplexMatrix>,
}

impl KrausChannel {
    /// Builds a channel from Schrödinger Kraus operators. All operators must
    /// share one `n × m` shape; trace preservation is checked separately by
    /// [`validate_channel`].
    pub fn new(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let first = kraus.first().ok_or(Error::EmptyKraus)?;
        let (dim_out, dim_in) = first.shape();
        if dim_in == 0 || dim_out == 0 {
            return Err(Error::DimensionMismatch("empty Kraus operator".into()));
        }
        for (j, k) in kraus.iter().enumerate() {
            if k.shape() != (dim_out, dim_in) {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus operator {j} is {}x{}, expected {dim_out}x{dim_in}",
                    k.nrows(),
                    k.ncols()
                )));
            }
            if !numkit::is_finite(k) {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self {
            dim_in,
            dim_out,
            kraus,
        })
    }

    /// Like [`KrausChannel::new`] but rejects channels failing the TP gate.
    pub fn new_validated(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let ch = Self::new(kraus)?;
        ch.ensure_valid()?;
        Ok(ch)
    }

    /// Builds a channel from Heisenberg operators `F_j` (`Φ(B) = Σ F_j† B F_j`).
    pub fn from_heisenberg(ops: Vec<ComplexMatrix>) -> Result<Self> {
        Self::new(ops.iter().map(|f| f.map(|z| z.conj())).collect())
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    /// Heisenberg-picture operators `F_j = conj(K_j)`.
    pub fn heisenberg_ops(&self) -> Vec<ComplexMatrix> {
        self.kraus.iter().map(|k| k.map(|z| z.conj())).collect()
    }

    pub fn is_pure(&self) -> bool {
        self.kraus.len() == 1
    }

    pub fn tp_defect(&self) -> f64 {
        let sum = self
            .kraus
            .iter()
            .fold(ComplexMatrix::zeros(self.dim_in, self.dim_in), |acc, k| {
                acc + k.adjoint() * k
            });
        op_dist(&sum, &numkit::identity(self.dim_in))
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let defect = self.tp_defect();
        if defect > TP_TOL {
            return Err(Error::InvalidChannel(format!(
                "trace-preservation defect {defect:.3e} exceeds {TP_TOL:.0e}"
            )));
        }
        Ok(())
    }

    /// Schrödinger action on an arbitrary `m × m` matrix.
    pub fn apply_matrix(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.shape() != (self.dim_in, self.dim_in) {
            return Err(Error::DimensionMismatch(format!(
                "channel input is {0}x{0}, got {1}x{2}",
                self.dim_in,
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(self
            .kraus
            .iter()
            .fold(ComplexMatrix::zeros(self.dim_out, self.dim_out), |acc, k| {
                acc + k * x * k.adjoint()
            }))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub dim_in: usize,
    pub dim_out: usize,
    pub kraus_count: usize,
    /// Rank of the channel density (minimal number of Kraus operators).
    pub kraus_rank: usize,
    pub tp_defect: f64,
    pub pass: bool,
}

pub fn validate_channel(ch: &KrausChannel) -> Result<ValidationReport> {
    if ch.kraus.is_empty() {
        return Err(Error::EmptyKraus);
    }
    let tp_defect = ch.tp_defect();
    let kraus_rank = herm_eig(&kernel_from_kraus(ch))?.rank();
    Ok(ValidationReport {
        dim_in: ch.dim_in,
        dim_out: ch.dim_out,
        kraus_count: ch.kraus.len(),
        kraus_rank,
        tp_defect,
        pass: tp_defect <= TP_TOL,
    })
}

/// A channel density `Φ_μ` on `C^m ⊗ C^n`, input factor first.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelDensity {
    dim_in: usize,
    dim_out: usize,
    kernel: ComplexMatrix,
}

impl ChannelDensity {
    /// Checks positivity (up to the numerical-rank cutoff) and the unit partial
    /// trace over the output factor.
    pub fn new(dim_in: usize, dim_out: usize, kernel: ComplexMatrix) -> Result<Self> {
        let size = dim_in * dim_out;
        if size == 0 || kernel.shape() != (size, size) {
            return Err(Error::DimensionMismatch(format!(
                "kernel for ({dim_in}, {dim_out}) must be {size}x{size}, got {}x{}",
                kernel.nrows(),
                kernel.ncols()
            )));
        }
        let eig = herm_eig(&kernel)?;
        check_psd(&eig)?;
        let cd = Self {
            dim_in,
            dim_out,
            kernel: numkit::hermitian_part(&kernel),
        };
        let defect = cd.normalization_defect();
        if defect > NORMALIZATION_TOL {
            return Err(Error::InvalidChannel(format!(
                "partial trace over the output differs from identity by {defect:.3e}"
            )));
        }
        Ok(cd)
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn kernel(&self) -> &ComplexMatrix {
        &self.kernel
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.dim_in, self.dim_out)
    }

    /// `‖tr_out Φ_μ - I_m‖_op`.
    pub fn normalization_defect(&self) -> f64 {
        let pt = partial_trace(&self.kernel, self.dims(), Factor::Second)
            .expect("kernel shape checked on construction");
        op_dist(&pt, &numkit::identity(self.dim_in))
    }

    pub fn rank(&self) -> usize {
        herm_eig(&self.kernel).map(|e| e.rank()).unwrap_or(0)
    }

    pub fn sqrt(&self) -> Result<ComplexMatrix> {
        psd_sqrt(&self.kernel)
    }
}

/// Column vector `w_j[(x, i)] = ⟨i|K_j|x⟩`.
pub(crate) fn vec_kraus(k: &ComplexMatrix) -> ComplexVector {
    let (n, m) = k.shape();
    ComplexVector::from_fn(m * n, |r, _| k[(r % n, r / n)])
}

/// Inverse of [`vec_kraus`].
pub(crate) fn unvec_kraus(v: &ComplexVector, dim_in: usize, dim_out: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim_out, dim_in, |i, x| v[x * dim_out + i])
}

/// `Σ_j |w_j)(w_j|` without the trace-preservation gate; for diagnostics of
/// maps that are not channels.
pub fn kernel_from_kraus(ch: &KrausChannel) -> ComplexMatrix {
    let size = ch.dim_in * ch.dim_out;
    ch.kraus.iter().fold(ComplexMatrix::zeros(size, size), |acc, k| {
        let w = vec_kraus(k);
        acc + &w * w.adjoint()
    })
}

/// `Φ_μ = Σ_j |w_j)(w_j|`.
pub fn density_from_kraus(ch: &KrausChannel) -> Result<ChannelDensity> {
    ch.ensure_valid()?;
    ChannelDensity::new(ch.dim_in, ch.dim_out, kernel_from_kraus(ch))
}

/// Orthogonal Kraus operators from the spectral decomposition of the kernel.
pub fn kraus_from_density(cd: &ChannelDensity) -> Result<KrausChannel> {
    let eig = herm_eig(&cd.kernel)?;
    check_psd(&eig)?;
    let cut = eig.zero_threshold();
    let kraus: Vec<ComplexMatrix> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .take_while(|(_, &l)| l > cut)
        .map(|(j, &l)| unvec_kraus(&eig.eigenvector(j), cd.dim_in, cd.dim_out) * real(l.sqrt()))
        .collect();
    KrausChannel::new_validated(kraus)
}

fn check_input(dim_in: usize, rho: &DensityOperator) -> Result<()> {
    if rho.dim() != dim_in {
        return Err(Error::DimensionMismatch(format!(
            "channel input dimension {dim_in}, state dimension {}",
            rho.dim()
        )));
    }
    Ok(())
}

/// `T(ρ) = Σ K_j ρ K_j†`.
pub fn apply_schrodinger(ch: &KrausChannel, rho: &DensityOperator) -> Result<DensityOperator> {
    check_input(ch.dim_in, rho)?;
    DensityOperator::new(ch.apply_matrix(rho.matrix())?)
}

/// `tr_in[(ρ̃ ⊗ I) Φ_μ]` on an arbitrary input matrix.
pub fn contract_density(cd: &ChannelDensity, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (m, n) = cd.dims();
    if x.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!(
            "density input is {m}x{m}, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    let k = &cd.kernel;
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        let mut acc = real(0.0);
        for a in 0..m {
            for b in 0..m {
                // (x̃)[a, b] = x[b, a]
                acc += x[(b, a)] * k[(b * n + i, a * n + j)];
            }
        }
        acc
    }))
}

pub fn apply_via_density(cd: &ChannelDensity, rho: &DensityOperator) -> Result<DensityOperator> {
    check_input(cd.dim_in, rho)?;
    DensityOperator::new(contract_density(cd, rho.matrix())?)
}

/// Heisenberg action `Φ(B) = Σ F_j† B F_j`, `F_j = conj(K_j)`.
pub fn apply_heisenberg(ch: &KrausChannel, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if b.shape() != (ch.dim_out, ch.dim_out) {
        return Err(Error::DimensionMismatch(format!(
            "observable must be {0}x{0}, got {1}x{2}",
            ch.dim_out,
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(ch
        .heisenberg_ops()
        .iter()
        .fold(ComplexMatrix::zeros(ch.dim_in, ch.dim_in), |acc, f| {
            acc + f.adjoint() * b * f
        }))
}

/// `u[(x, y)] = (ρ^{1/2})[x, y]`, a unit vector on `C^m ⊗ C^m`.
pub fn standard_coupling_vector(rho: &DensityOperator) -> ComplexVector {
    let s = psd_sqrt(rho.matrix()).expect("densities are PSD");
    let m = rho.dim();
    ComplexVector::from_fn(m * m, |r, _| s[(r / m, r % m)])
}

/// The standard entangled state `ω(ρ) = |υ)(υ|`, `υ = ρ^{1/2}`. Its first
/// marginal is `ρ` and its second is `ρ̃`.
pub fn standard_entangled_state(rho: &DensityOperator) -> DensityOperator {
    let u = standard_coupling_vector(rho);
    DensityOperator::from_trusted(&u * u.adjoint())
}

/// `(id ⊗ T)(ω(ρ̃))`: the channel applied to the second factor of the standard
/// coupling whose second marginal is `ρ`. The result acts on `C^m ⊗ C^n`.
pub fn entangled_output(ch: &KrausChannel, rho: &DensityOperator) -> Result<ComplexMatrix> {
    check_input(ch.dim_in, rho)?;
    let m = ch.dim_in;
    let n = ch.dim_out;
    let u = standard_coupling_vector(&rho.transpose());
    let mut out = ComplexMatrix::zeros(m * n, m * n);
    for k in &ch.kraus {
        // ((I ⊗ K) u)[(x, i)] = Σ_y K[i, y] u[(x, y)]
        let v = ComplexVector::from_fn(m * n, |r, _| {
            let (x, i) = (r / n, r % n);
            (0..m).map(|y| k[(i, y)] * u[x * m + y]).sum()
        });
        out += &v * v.adjoint();
    }
    Ok(out)
}

/// Standard channels used as a test corpus.
pub mod zoo {
    use super::*;
    use crate::numkit::{haar_unitary, identity as eye};

    fn check_prob(name: &str, p: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange(format!("{name} = {p} must lie in [0, 1]")));
        }
        Ok(())
    }

    pub fn identity(d: usize) -> KrausChannel {
        KrausChannel::new(vec![eye(d)]).expect("identity is a channel")
    }

    pub fn unitary(u: &ComplexMatrix) -> Result<KrausChannel> {
        let d = u.nrows();
        if u.ncols() != d || op_dist(&(u.adjoint() * u), &eye(d)) > TP_TOL {
            return Err(Error::OutOfRange("operator is not unitary".into()));
        }
        KrausChannel::new(vec![u.clone()])
    }

    /// `T(ρ) = (1 - p) ρ + p tr(ρ) I/d`.
    pub fn depolarizing(d: usize, p: f64) -> Result<KrausChannel> {
        check_prob("p", p)?;
        let mut ops = Vec::new();
        if p < 1.0 {
            ops.push(eye(d) * real((1.0 - p).sqrt()));
        }
        if p > 0.0 {
            let w = real((p / d as f64).sqrt());
            for i in 0..d {
                for k in 0..d {
                    let mut e = ComplexMatrix::zeros(d, d);
                    e[(i, k)] = w;
                    ops.push(e);
                }
            }
        }
        KrausChannel::new(ops)
    }

    /// Qubit dephasing: off-diagonal entries scale by `1 - p`.
    pub fn dephasing(p: f64) -> Result<KrausChannel> {
        check_prob("p", p)?;
        let mut ops = vec![eye(2) * real((1.0 - p / 2.0).sqrt())];
        if p > 0.0 {
            ops.push(numkit::diag(&[1.0, -1.0]) * real((p / 2.0).sqrt()));
        }
        KrausChannel::new(ops)
    }

    pub fn amplitude_damping(gamma: f64) -> Result<KrausChannel> {
        check_prob("gamma", gamma)?;
        let k0 = numkit::diag(&[1.0, (1.0 - gamma).sqrt()]);
        let mut ops = vec![k0];
        if gamma > 0.0 {
            let mut k1 = ComplexMatrix::zeros(2, 2);
            k1[(0, 1)] = real(gamma.sqrt());
            ops.push(k1);
        }
        KrausChannel::new(ops)
    }

    /// `T(ρ) = tr(ρ) σ` on inputs of the same dimension as `σ`.
    pub fn replacement(sigma: &DensityOperator) -> Result<KrausChannel> {
        let d = sigma.dim();
        let eig = herm_eig(sigma.matrix())?;
        let cut = eig.zero_threshold();
        let mut ops = Vec::new();
        for (a, &l) in eig.eigenvalues.iter().enumerate() {
            if l <= cut {
                continue;
            }
            let e = eig.eigenvector(a) * real(l.sqrt());
            for x in 0..d {
                let mut k = ComplexMatrix::zeros(d, d);
                k.set_column(x, &e);
                ops.push(k);
            }
        }
        KrausChannel::new(ops)
    }

    /// Random channel from a Haar isometry `C^m -> C^n ⊗ C^k` (Stinespring).
    pub fn random_channel<R: Rng + ?Sized>(
        dim_in: usize,
        dim_out: usize,
        kraus_count: usize,
        rng: &mut R,
    ) -> Result<KrausChannel> {
        if dim_in == 0 || dim_out == 0 || kraus_count == 0 || dim_out * kraus_count < dim_in {
            return Err(Error::OutOfRange(format!(
                "need dim_out * kraus_count >= dim_in > 0, got {dim_out} * {kraus_count} vs {dim_in}"
            )));
        }
        let big = dim_out * kraus_count;
        let u = haar_unitary(big, rng);
        let ops = (0..kraus_count)
            .map(|j| ComplexMatrix::from_fn(dim_out, dim_in, |i, x| u[(i * kraus_count + j, x)]))
            .collect();
        KrausChannel::new(ops)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{diag, identity, random_density, random_matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(5)
    }

    fn pauli_z() -> ComplexMatrix {
        diag(&[1.0, -1.0])
    }

    /// Kernel built entry by entry from the Heisenberg map:
    /// `⟨x,i|Φ_μ|y,k⟩ = ⟨x|Φ(|i⟩⟨k|)|y⟩`.
    fn kernel_via_heisenberg(ch: &KrausChannel) -> ComplexMatrix {
        let (m, n) = (ch.dim_in(), ch.dim_out());
        let mut out = ComplexMatrix::zeros(m * n, m * n);
        for i in 0..n {
            for k in 0..n {
                let mut unit = ComplexMatrix::zeros(n, n);
                unit[(i, k)] = real(1.0);
                let block = apply_heisenberg(ch, &unit).unwrap();
                for x in 0..m {
                    for y in 0..m {
                        out[(x * n + i, y * n + k)] = block[(x, y)];
                    }
                }
            }
        }
        out
    }

    fn zoo_corpus() -> Vec<KrausChannel> {
        let mut rng = rng();
        let sigma = random_density(3, 2, &mut rng).unwrap();
        vec![
            zoo::identity(2),
            zoo::identity(3),
            zoo::unitary(&pauli_z()).unwrap(),
            zoo::depolarizing(2, 0.3).unwrap(),
            zoo::depolarizing(3, 1.0).unwrap(),
            zoo::dephasing(0.4).unwrap(),
            zoo::amplitude_damping(0.7).unwrap(),
            zoo::replacement(&sigma).unwrap(),
            zoo::random_channel(2, 3, 2, &mut rng).unwrap(),
            zoo::random_channel(3, 2, 3, &mut rng).unwrap(),
        ]
    }

    fn matrix_units(m: usize) -> Vec<ComplexMatrix> {
        let mut out = Vec::new();
        for a in 0..m {
            for b in 0..m {
                let mut e = ComplexMatrix::zeros(m, m);
                e[(a, b)] = real(1.0);
                out.push(e);
            }
        }
        out
    }

    #[test]
    fn validation_reports() {
        let r = validate_channel(&zoo::identity(2)).unwrap();
        assert_eq!(r.tp_defect, 0.0);
        assert!(r.pass);
        assert_eq!(r.kraus_rank, 1);

        let half = KrausChannel::new(vec![identity(2) * real(0.5)]).unwrap();
        let r = validate_channel(&half).unwrap();
        assert!((r.tp_defect - 0.75).abs() < 1e-15);
        assert!(!r.pass);

        let mut rng = rng();
        let ch = zoo::random_channel(3, 2, 4, &mut rng).unwrap();
        assert!(validate_channel(&ch).unwrap().tp_defect <= 1e-12);

        assert!(matches!(KrausChannel::new(vec![]), Err(Error::EmptyKraus)));
        assert!(KrausChannel::new(vec![identity(2), identity(3)]).is_err());
    }

    #[test]
    fn identity_density() {
        let cd = density_from_kraus(&zoo::identity(2)).unwrap();
        let v = ComplexVector::from_vec(vec![real(1.0), real(0.0), real(0.0), real(1.0)]);
        assert!((cd.kernel() - &v * v.adjoint()).norm() < 1e-15);
        assert_eq!(cd.rank(), 1);
        assert!((cd.kernel().trace().re - 2.0).abs() < 1e-15);
        assert!(cd.normalization_defect() < 1e-15);
    }

    #[test]
    fn depolarizing_density_is_half_identity() {
        let cd = density_from_kraus(&zoo::depolarizing(2, 1.0).unwrap()).unwrap();
        assert!((cd.kernel() - identity(4) * real(0.5)).norm() < 1e-15);
    }

    #[test]
    fn unitary_density_rank_one() {
        let mut rng = rng();
        let u = numkit::haar_unitary(2, &mut rng);
        let cd = density_from_kraus(&zoo::unitary(&u).unwrap()).unwrap();
        let w = vec_kraus(&u);
        assert!((cd.kernel() - &w * w.adjoint()).norm() < 1e-14);
        assert_eq!(cd.rank(), 1);
        assert!((cd.kernel().trace().re - 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_kernel_constructions_agree() {
        for ch in zoo_corpus() {
            let cd = density_from_kraus(&ch).unwrap();
            assert!((cd.kernel() - kernel_via_heisenberg(&ch)).norm() < 1e-12);
            assert!(cd.normalization_defect() <= 1e-9);
        }
    }

    #[test]
    fn kraus_extraction() {
        let cd = ChannelDensity::new(2, 2, identity(4) * real(0.5)).unwrap();
        let ch = kraus_from_density(&cd).unwrap();
        assert_eq!(ch.kraus().len(), 4);
        for (i, a) in ch.kraus().iter().enumerate() {
            assert!(((a.adjoint() * a).trace().re - 0.5).abs() < 1e-12);
            for b in &ch.kraus()[i + 1..] {
                assert!((a.adjoint() * b).trace().norm() < 1e-9);
            }
        }

        let v = ComplexVector::from_vec(vec![real(1.0), real(0.0), real(0.0), real(1.0)]);
        let cd = ChannelDensity::new(2, 2, &v * v.adjoint()).unwrap();
        let ch = kraus_from_density(&cd).unwrap();
        assert_eq!(ch.kraus().len(), 1);
        assert!((&ch.kraus()[0] - identity(2)).norm() < 1e-14);
    }

    #[test]
    fn round_trip_preserves_action_on_matrix_units() {
        for ch in zoo_corpus() {
            let back = kraus_from_density(&density_from_kraus(&ch).unwrap()).unwrap();
            for e in matrix_units(ch.dim_in()) {
                let a = ch.apply_matrix(&e).unwrap();
                let b = back.apply_matrix(&e).unwrap();
                assert!(op_dist(&a, &b) <= 1e-10);
            }
        }
    }

    #[test]
    fn density_gates() {
        assert!(ChannelDensity::new(2, 2, identity(4)).is_err());
        assert!(ChannelDensity::new(2, 2, identity(3)).is_err());
        let bad = diag(&[1.0, 0.5, 0.5, -0.5]);
        assert!(matches!(
            ChannelDensity::new(2, 2, bad),
            Err(Error::NotPositive { .. })
        ));
    }

    #[test]
    fn schrodinger_actions() {
        let mut rng = rng();
        let rho = random_density(2, 2, &mut rng).unwrap();
        let out = apply_schrodinger(&zoo::identity(2), &rho).unwrap();
        assert!((out.matrix() - rho.matrix()).norm() < 1e-15);

        let out = apply_schrodinger(&zoo::depolarizing(2, 1.0).unwrap(), &rho).unwrap();
        assert!((out.matrix() - identity(2) * real(0.5)).norm() < 1e-14);

        let out = apply_schrodinger(&zoo::amplitude_damping(1.0).unwrap(), &rho).unwrap();
        assert!((out.matrix() - diag(&[1.0, 0.0])).norm() < 1e-14);

        let rho3 = random_density(3, 3, &mut rng).unwrap();
        assert!(apply_schrodinger(&zoo::identity(2), &rho3).is_err());
    }

    #[test]
    fn density_action_matches_kraus_action() {
        let rho = DensityOperator::diagonal(&[0.3, 0.7]).unwrap();
        let cd = density_from_kraus(&zoo::identity(2)).unwrap();
        let out = apply_via_density(&cd, &rho).unwrap();
        assert!((out.matrix() - rho.matrix()).norm() < 1e-15);

        let cd = ChannelDensity::new(2, 2, identity(4) * real(0.5)).unwrap();
        let out = apply_via_density(&cd, &rho).unwrap();
        assert!((out.matrix() - identity(2) * real(0.5)).norm() < 1e-15);

        let mut rng = rng();
        for ch in zoo_corpus() {
            let cd = density_from_kraus(&ch).unwrap();
            for _ in 0..5 {
                let rho = random_density(ch.dim_in(), ch.dim_in(), &mut rng).unwrap();
                let a = apply_schrodinger(&ch, &rho).unwrap();
                let b = apply_via_density(&cd, &rho).unwrap();
                assert!(op_dist(a.matrix(), b.matrix()) <= 1e-10);
            }
        }
    }

    #[test]
    fn heisenberg_actions() {
        let mut rng = rng();
        let b = random_matrix(2, 2, &mut rng);
        let out = apply_heisenberg(&zoo::identity(2), &b).unwrap();
        assert!((out - &b).norm() < 1e-15);

        let out = apply_heisenberg(&zoo::depolarizing(2, 1.0).unwrap(), &b).unwrap();
        assert!((out - identity(2) * (b.trace() / real(2.0))).norm() < 1e-14);

        for ch in zoo_corpus() {
            let unital = apply_heisenberg(&ch, &identity(ch.dim_out())).unwrap();
            assert!(op_dist(&unital, &identity(ch.dim_in())) <= 1e-9);

            let b = random_matrix(ch.dim_out(), ch.dim_out(), &mut rng);
            let rho = random_density(ch.dim_in(), ch.dim_in(), &mut rng).unwrap();
            let lhs = (apply_heisenberg(&ch, &b).unwrap().transpose() * rho.matrix()).trace();
            let rhs = (b.transpose() * apply_schrodinger(&ch, &rho).unwrap().matrix()).trace();
            assert!((lhs - rhs).norm() <= 1e-10);
        }
    }

    #[test]
    fn standard_coupling_marginals() {
        let rho = DensityOperator::basis(2, 0);
        let omega = standard_entangled_state(&rho);
        assert!((omega.matrix() - diag(&[1.0, 0.0, 0.0, 0.0])).norm() < 1e-15);

        let omega = standard_entangled_state(&DensityOperator::maximally_mixed(2));
        let schmidt = numkit::herm_eig(
            &partial_trace(omega.matrix(), (2, 2), Factor::Second).unwrap(),
        )
        .unwrap();
        assert!((schmidt.eigenvalues[0] - 0.5).abs() < 1e-14);
        assert!((schmidt.eigenvalues[1] - 0.5).abs() < 1e-14);
        assert!((omega.purity() - 1.0).abs() < 1e-14);

        let mut rng = rng();
        for d in 2..4 {
            let rho = random_density(d, d, &mut rng).unwrap();
            let omega = standard_entangled_state(&rho);
            let first = partial_trace(omega.matrix(), (d, d), Factor::Second).unwrap();
            let second = partial_trace(omega.matrix(), (d, d), Factor::First).unwrap();
            assert!(op_dist(&first, rho.matrix()) <= 1e-10);
            assert!(op_dist(&second, &rho.matrix().transpose()) <= 1e-10);
        }
    }

    #[test]
    fn entangled_output_marginal_is_channel_output() {
        let mut rng = rng();
        for ch in zoo_corpus() {
            let rho = random_density(ch.dim_in(), ch.dim_in(), &mut rng).unwrap();
            let out = entangled_output(&ch, &rho).unwrap();
            let marginal = partial_trace(&out, (ch.dim_in(), ch.dim_out()), Factor::First).unwrap();
            let direct = apply_schrodinger(&ch, &rho).unwrap();
            assert!(op_dist(&marginal, direct.matrix()) <= 1e-10);
        }
    }

    #[test]
    fn pure_channel_convention_identity() {
        // tr(ρ̃ F† V) from Kraus data equals (V|(ρ̃ ⊗ I)|F) from kernel vectors
        let mut rng = rng();
        for (m, n) in [(2, 2), (2, 3), (3, 3)] {
            let f_ch = zoo::random_channel(m, n, 1, &mut rng).unwrap();
            let v_ch = zoo::random_channel(m, n, 1, &mut rng).unwrap();
            let rho = random_density(m, m, &mut rng).unwrap();
            let f = &f_ch.heisenberg_ops()[0];
            let v = &v_ch.heisenberg_ops()[0];
            let rt = rho.matrix().transpose();
            let direct = (&rt * f.adjoint() * v).trace();

            let wf = vec_kraus(&f_ch.kraus()[0]);
            let wv = vec_kraus(&v_ch.kraus()[0]);
            let sandwich = numkit::kron(&rt, &identity(n));
            let kernel_form = (wv.adjoint() * sandwich * wf)[(0, 0)];
            assert!((direct - kernel_form).norm() <= 1e-10);
        }
    }

    #[test]
    fn zoo_parameters() {
        assert!(zoo::depolarizing(2, 1.5).is_err());
        assert!(zoo::amplitude_damping(-0.1).is_err());
        assert!(zoo::dephasing(2.0).is_err());
        assert!(zoo::unitary(&diag(&[1.0, 0.5])).is_err());
        let mut rng = rng();
        assert!(zoo::random_channel(4, 1, 3, &mut rng).is_err());

        let dep0 = zoo::depolarizing(2, 0.0).unwrap();
        let rho = random_density(2, 2, &mut rng).unwrap();
        let out = apply_schrodinger(&dep0, &rho).unwrap();
        assert!(op_dist(out.matrix(), rho.matrix()) < 1e-15);

        let sigma = random_density(3, 2, &mut rng).unwrap();
        let rep = zoo::replacement(&sigma).unwrap();
        for _ in 0..3 {
            let rho = random_density(3, 3, &mut rng).unwrap();
            let out = apply_schrodinger(&rep, &rho).unwrap();
            assert!(op_dist(out.matrix(), sigma.matrix()) < 1e-12);
        }

        for ch in zoo_corpus() {
            assert!(validate_channel(&ch).unwrap().pass);
        }
    }
}
