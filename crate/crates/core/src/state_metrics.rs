//! Trace distance, Uhlmann fidelity and Bures distance between states.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numkit::{haar_unitary, polar, psd_sqrt, trace_norm, ComplexMatrix};
use crate::state::DensityOperator;

/// Slack for the equivalence inequalities between the state metrics.
pub const EQUIVALENCE_SLACK: f64 = 1e-9;

fn same_dim(rho: &DensityOperator, sigma: &DensityOperator) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!(
            "states of dimension {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    Ok(())
}

/// `Tr|ρ - σ|`, in `[0, 2]`.
pub fn trace_distance(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    same_dim(rho, sigma)?;
    Ok(trace_norm(&(rho.matrix() - sigma.matrix())))
}

/// `Tr √(ρ^{1/2} σ ρ^{1/2})`, clamped to `[0, 1]` against roundoff.
pub fn fidelity(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    same_dim(rho, sigma)?;
    Ok(matrix_fidelity(rho.matrix(), sigma.matrix())?.clamp(0.0, 1.0))
}

/// `Tr √(R^{1/2} S R^{1/2})` for PSD `R`, `S`, evaluated as the trace norm of
/// `S^{1/2} R^{1/2}` (whose Gram matrix is the sandwich). Taking singular values
/// as `‖S^{1/2} R^{1/2} v_i‖` avoids square roots of roundoff-level eigenvalues.
pub fn matrix_fidelity(r: &ComplexMatrix, s: &ComplexMatrix) -> Result<f64> {
    let rr = psd_sqrt(r)?;
    let ss = psd_sqrt(s)?;
    Ok(trace_norm(&(ss * rr)))
}

/// `√(2(1 - f))`, in `[0, √2]`.
pub fn bures_distance(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    Ok(bures_from_fidelity(fidelity(rho, sigma)?))
}

pub fn bures_from_fidelity(f: f64) -> f64 {
    (2.0 * (1.0 - f)).max(0.0).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateEquivalenceReport {
    pub trace_distance: f64,
    pub fidelity: f64,
    pub bures: f64,
    /// `2√(1 - f²)`
    pub fuchs_van_de_graaf: f64,
    /// `d² <= D`
    pub lower_holds: bool,
    /// `D <= 2d`
    pub upper_holds: bool,
    /// `D <= 2√(1 - f²)`
    pub fidelity_bound_holds: bool,
}

impl StateEquivalenceReport {
    pub fn all_hold(&self) -> bool {
        self.lower_holds && self.upper_holds && self.fidelity_bound_holds
    }
}

pub fn check_state_equivalence(
    rho: &DensityOperator,
    sigma: &DensityOperator,
) -> Result<StateEquivalenceReport> {
    let td = trace_distance(rho, sigma)?;
    let f = fidelity(rho, sigma)?;
    let d = bures_from_fidelity(f);
    let fvdg = 2.0 * (1.0 - f * f).max(0.0).sqrt();
    Ok(StateEquivalenceReport {
        trace_distance: td,
        fidelity: f,
        bures: d,
        fuchs_van_de_graaf: fvdg,
        lower_holds: d * d <= td + EQUIVALENCE_SLACK,
        upper_holds: td <= 2.0 * d + EQUIVALENCE_SLACK,
        fidelity_bound_holds: td <= fvdg + EQUIVALENCE_SLACK,
    })
}

/// Squared purification distances `‖Uρ^{1/2} - Vσ^{1/2}‖²_F`.
#[derive(Clone, Debug, PartialEq)]
pub struct PurificationOracle {
    /// Minimum over `trials` Haar pairs `(U, V)`.
    pub sampled_min: f64,
    /// Value at the polar-factor construction.
    pub constructed: f64,
    /// `2(1 - f)`
    pub closed_form: f64,
}

impl PurificationOracle {
    pub fn best(&self) -> f64 {
        self.sampled_min.min(self.constructed)
    }
}

/// Brute-force check of the purification characterization of the Bures
/// distance: sample purifications `χ = Uρ^{1/2}`, `ψ = Vσ^{1/2}` and record the
/// smallest `Tr (χ - ψ)†(χ - ψ)`. The construction `χ = ρ^{1/2}`,
/// `ψ = W†σ^{1/2}` with `σ^{1/2}ρ^{1/2} = W|σ^{1/2}ρ^{1/2}|` is evaluated too.
pub fn uhlmann_purification_oracle<R: Rng + ?Sized>(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    trials: usize,
    rng: &mut R,
) -> Result<PurificationOracle> {
    same_dim(rho, sigma)?;
    let d = rho.dim();
    let rr = psd_sqrt(rho.matrix())?;
    let ss = psd_sqrt(sigma.matrix())?;
    let dist2 = |chi: &ComplexMatrix, psi: &ComplexMatrix| {
        let diff = chi - psi;
        (diff.adjoint() * diff).trace().re
    };

    let mut sampled_min = f64::INFINITY;
    for _ in 0..trials {
        let u = haar_unitary(d, rng);
        let v = haar_unitary(d, rng);
        sampled_min = sampled_min.min(dist2(&(&u * &rr), &(&v * &ss)));
    }

    let w = polar(&(&ss * &rr))?.unitary;
    let constructed = dist2(&rr, &(w.adjoint() * &ss));
    let closed_form = 2.0 * (1.0 - fidelity(rho, sigma)?);
    Ok(PurificationOracle {
        sampled_min,
        constructed,
        closed_form,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{haar_unitary, random_density};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag_state(p: &[f64]) -> DensityOperator {
        DensityOperator::diagonal(p).unwrap()
    }

    #[test]
    fn trace_distance_cases() {
        let a = diag_state(&[0.5, 0.5]);
        let b = diag_state(&[0.25, 0.75]);
        assert_eq!(trace_distance(&a, &a).unwrap(), 0.0);
        let zero = DensityOperator::basis(2, 0);
        let one = DensityOperator::basis(2, 1);
        assert!((trace_distance(&zero, &one).unwrap() - 2.0).abs() < 1e-15);
        // classical l1: |0.5-0.25| + |0.5-0.75|
        assert!((trace_distance(&a, &b).unwrap() - 0.5).abs() < 1e-15);
        assert!(trace_distance(&a, &DensityOperator::maximally_mixed(3)).is_err());
    }

    #[test]
    fn fidelity_cases() {
        let a = diag_state(&[0.5, 0.5]);
        let b = diag_state(&[0.25, 0.75]);
        assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let zero = DensityOperator::basis(2, 0);
        let one = DensityOperator::basis(2, 1);
        assert!(fidelity(&zero, &one).unwrap().abs() < 1e-12);
        let expected = (0.125f64).sqrt() + (0.375f64).sqrt();
        assert!((fidelity(&a, &b).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.965926).abs() < 1e-6);
    }

    #[test]
    fn bures_cases() {
        let a = diag_state(&[0.5, 0.5]);
        let b = diag_state(&[0.25, 0.75]);
        assert!(bures_distance(&a, &a).unwrap() < 1e-6);
        let zero = DensityOperator::basis(2, 0);
        let one = DensityOperator::basis(2, 1);
        assert!((bures_distance(&zero, &one).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        let f = (0.125f64).sqrt() + (0.375f64).sqrt();
        let expected = (2.0 * (1.0 - f)).sqrt();
        assert!((bures_distance(&a, &b).unwrap() - expected).abs() < 1e-10);
        assert!((expected - 0.26105).abs() < 1e-5);
    }

    #[test]
    fn equivalence_edge_cases() {
        let a = diag_state(&[0.3, 0.7]);
        let r = check_state_equivalence(&a, &a).unwrap();
        assert!(r.all_hold());
        assert!(r.trace_distance < 1e-15 && r.bures < 1e-6);

        let zero = DensityOperator::basis(2, 0);
        let one = DensityOperator::basis(2, 1);
        let r = check_state_equivalence(&zero, &one).unwrap();
        assert!(r.all_hold());
        assert!((r.bures * r.bures - 2.0).abs() < 1e-12);
        assert!((r.trace_distance - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_is_symmetric_and_unitarily_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in 2..5 {
            let rho = random_density(d, d, &mut rng).unwrap();
            let sigma = random_density(d, 1 + d / 2, &mut rng).unwrap();
            let f1 = fidelity(&rho, &sigma).unwrap();
            let f2 = fidelity(&sigma, &rho).unwrap();
            assert!((f1 - f2).abs() <= 1e-10);

            let u = haar_unitary(d, &mut rng);
            let (ru, su) = (rho.conjugate_by(&u), sigma.conjugate_by(&u));
            assert!((fidelity(&ru, &su).unwrap() - f1).abs() <= 1e-10);
            assert!(
                (trace_distance(&ru, &su).unwrap() - trace_distance(&rho, &sigma).unwrap()).abs()
                    <= 1e-10
            );
        }
    }

    #[test]
    fn purification_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rho = random_density(3, 3, &mut rng).unwrap();
        let same = uhlmann_purification_oracle(&rho, &rho, 10, &mut rng).unwrap();
        assert!(same.constructed.abs() < 1e-12);

        // commuting pair: classical squared Hellinger Σ(√p - √q)²
        let p: [f64; 3] = [0.2, 0.3, 0.5];
        let q: [f64; 3] = [0.6, 0.1, 0.3];
        let hell: f64 = p.iter().zip(&q).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum();
        let o = uhlmann_purification_oracle(&diag_state(&p), &diag_state(&q), 50, &mut rng)
            .unwrap();
        assert!((o.constructed - hell).abs() < 1e-12);
        assert!((o.closed_form - hell).abs() < 1e-12);

        let sigma = random_density(3, 2, &mut rng).unwrap();
        let o = uhlmann_purification_oracle(&rho, &sigma, 300, &mut rng).unwrap();
        assert!(o.sampled_min >= o.closed_form - 1e-9);
        assert!((o.constructed - o.closed_form).abs() <= 1e-9);
    }
}
