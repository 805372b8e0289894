//! Property tests for the invariants that must hold on every random input.

use proptest::prelude::*;
use qchan::channel_metrics::{coupling_cb, coupling_fidelity, pure_conditional_fidelity};
use qchan::channels::{
    apply_heisenberg, apply_schrodinger, apply_via_density, density_from_kraus, kraus_from_density, zoo,
};
use qchan::numkit::{
    self, c64, haar_unitary, herm_eig, identity, kron, partial_trace, psd_sqrt, random_density,
    random_matrix, random_psd, trace_norm, ComplexMatrix, Factor,
};
use qchan::state_metrics::{check_state_equivalence, fidelity, trace_distance};
use qchan::verify::{random_kraus_channel, random_state, SUITE_DIMS};
use qchan::{ChannelPair, DensityOperator, KrausChannel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn channel_pair(seed: u64, dims: usize) -> (KrausChannel, KrausChannel, DensityOperator) {
    let (m, n) = SUITE_DIMS[dims % SUITE_DIMS.len()];
    let mut g = rng(seed);
    let phi = random_kraus_channel(m, n, &mut g).unwrap();
    let psi = random_kraus_channel(m, n, &mut g).unwrap();
    let rho = random_state(m, &mut g).unwrap();
    (phi, psi, rho)
}

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 48,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn psd_sqrt_is_psd_and_commutes(seed: u64, d in 1usize..6) {
        let p = random_psd(d, &mut rng(seed));
        let s = psd_sqrt(&p).unwrap();
        let eig = herm_eig(&s).unwrap();
        prop_assert!(*eig.eigenvalues.last().unwrap() >= -1e-12 * numkit::op_norm(&s));
        let comm = &s * &p - &p * &s;
        prop_assert!(numkit::op_norm(&comm) <= 1e-9 * numkit::op_norm(&p));
        prop_assert!(numkit::op_dist(&(&s * &s), &p) <= 1e-9 * numkit::op_norm(&p));
    }

    #[test]
    fn trace_norm_is_a_norm(seed: u64, d in 1usize..5, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let mut g = rng(seed);
        let a = random_matrix(d, d + 1, &mut g);
        let b = random_matrix(d, d + 1, &mut g);
        let c = random_matrix(d, d + 1, &mut g);
        let (na, nb, nc) = (trace_norm(&a), trace_norm(&b), trace_norm(&c));
        prop_assert!(na >= 0.0);
        let z = c64(re, im);
        prop_assert!((trace_norm(&(&a * z)) - z.norm() * na).abs() <= 1e-9 * (1.0 + z.norm() * na));
        prop_assert!(trace_norm(&(&a + &b)) <= na + nb + 1e-9);
        prop_assert!(trace_norm(&(&a + &b + &c)) <= na + nb + nc + 1e-9);
    }

    #[test]
    fn partial_trace_preserves_trace_and_is_linear(seed: u64, d1 in 1usize..4, d2 in 1usize..4) {
        let mut g = rng(seed);
        let x = random_matrix(d1 * d2, d1 * d2, &mut g);
        let y = random_matrix(d1 * d2, d1 * d2, &mut g);
        let t: f64 = g.random_range(-2.0..2.0);
        for f in [Factor::First, Factor::Second] {
            let px = partial_trace(&x, (d1, d2), f).unwrap();
            prop_assert!((px.trace() - x.trace()).norm() <= 1e-10 * (1.0 + x.norm()));
            let lhs = partial_trace(&(&x + &y * c64(t, 0.0)), (d1, d2), f).unwrap();
            let rhs = px + partial_trace(&y, (d1, d2), f).unwrap() * c64(t, 0.0);
            prop_assert!(numkit::op_dist(&lhs, &rhs) <= 1e-10 * (1.0 + x.norm() + y.norm()));
        }
        // cyclicity under the full trace only
        let a = kron(&random_matrix(d1, d1, &mut g), &identity(d2));
        let l = partial_trace(&(&x * &a), (d1, d2), Factor::Second).unwrap().trace();
        let r = partial_trace(&(&a * &x), (d1, d2), Factor::Second).unwrap().trace();
        prop_assert!((l - r).norm() <= 1e-9 * (1.0 + x.norm() * a.norm()));
    }

    #[test]
    fn herm_eig_is_deterministic(seed: u64, d in 1usize..6) {
        let h = numkit::random_hermitian(d, &mut rng(seed));
        let a = herm_eig(&h).unwrap();
        let b = herm_eig(&h.clone()).unwrap();
        prop_assert_eq!(&a.eigenvalues, &b.eigenvalues);
        prop_assert_eq!(&a.eigenvectors, &b.eigenvectors);
        prop_assert!(a.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(numkit::op_dist(&a.reconstruct(), &h) <= 1e-10 * (1.0 + numkit::op_norm(&h)));
    }

    #[test]
    fn state_metrics_are_unitarily_invariant(seed: u64, d in 2usize..5) {
        let mut g = rng(seed);
        let rho = random_state(d, &mut g).unwrap();
        let sigma = random_state(d, &mut g).unwrap();
        let u = haar_unitary(d, &mut g);
        let (ru, su) = (rho.conjugate_by(&u), sigma.conjugate_by(&u));
        prop_assert!((trace_distance(&rho, &sigma).unwrap() - trace_distance(&ru, &su).unwrap()).abs() <= 1e-10);
        prop_assert!((fidelity(&rho, &sigma).unwrap() - fidelity(&ru, &su).unwrap()).abs() <= 1e-10);
        prop_assert!((fidelity(&rho, &sigma).unwrap() - fidelity(&sigma, &rho).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn state_equivalence_chain(seed: u64, d in 2usize..5) {
        let mut g = rng(seed);
        let rho = random_state(d, &mut g).unwrap();
        let sigma = random_state(d, &mut g).unwrap();
        let r = check_state_equivalence(&rho, &sigma).unwrap();
        prop_assert!(r.all_hold(), "{:?}", r);
    }

    #[test]
    fn commuting_states_reduce_to_classical(seed: u64, d in 2usize..6) {
        let mut g = rng(seed);
        let mut draw = || {
            let w: Vec<f64> = (0..d).map(|_| g.random_range(0.0..1.0f64)).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect::<Vec<_>>()
        };
        let (p, q) = (draw(), draw());
        let u = haar_unitary(d, &mut rng(seed ^ 1));
        let rho = DensityOperator::diagonal(&p).unwrap().conjugate_by(&u);
        let sigma = DensityOperator::diagonal(&q).unwrap().conjugate_by(&u);
        let l1: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum();
        let aff: f64 = p.iter().zip(&q).map(|(a, b)| (a * b).sqrt()).sum();
        prop_assert!((trace_distance(&rho, &sigma).unwrap() - l1).abs() <= 1e-10);
        prop_assert!((fidelity(&rho, &sigma).unwrap() - aff).abs() <= 1e-10);
    }

    #[test]
    fn fidelity_matches_similarity_form(seed: u64, d in 2usize..5) {
        // full-rank pairs: ρσ is similar to ρ^{1/2}σρ^{1/2}, so its eigenvalues
        // are real and nonnegative and tr√(ρσ) is their root sum
        let mut g = rng(seed);
        let rho = random_density(d, d, &mut g).unwrap();
        let sigma = random_density(d, d, &mut g).unwrap();
        let prod = rho.matrix() * sigma.matrix();
        // real embedding [[A, -B], [B, A]] carries every eigenvalue twice
        let real = nalgebra::DMatrix::from_fn(2 * d, 2 * d, |i, j| {
            let z = prod[(i % d, j % d)];
            match (i < d, j < d) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        });
        let roots: f64 = real.complex_eigenvalues().iter().map(|z| z.sqrt().re).sum::<f64>() / 2.0;
        prop_assert!((roots - fidelity(&rho, &sigma).unwrap()).abs() <= 1e-8);
    }

    #[test]
    fn channel_round_trip_on_matrix_units(seed: u64, dims: usize) {
        let (phi, _, _) = channel_pair(seed, dims);
        let back = kraus_from_density(&density_from_kraus(&phi).unwrap()).unwrap();
        let m = phi.dim_in();
        for i in 0..m {
            for k in 0..m {
                let mut e = ComplexMatrix::zeros(m, m);
                e[(i, k)] = c64(1.0, 0.0);
                let a = phi.apply_matrix(&e).unwrap();
                let b = back.apply_matrix(&e).unwrap();
                prop_assert!(numkit::op_dist(&a, &b) <= 1e-10);
            }
        }
        let ks = back.kraus();
        for i in 0..ks.len() {
            for j in 0..i {
                prop_assert!((ks[i].adjoint() * &ks[j]).trace().norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn channel_density_normalization_and_unitality(seed: u64, dims: usize) {
        let (phi, _, rho) = channel_pair(seed, dims);
        let cd = density_from_kraus(&phi).unwrap();
        prop_assert!(cd.normalization_defect() <= 1e-9);
        let unit = apply_heisenberg(&phi, &identity(phi.dim_out())).unwrap();
        prop_assert!(numkit::op_dist(&unit, &identity(phi.dim_in())) <= 1e-9);
        let a = apply_schrodinger(&phi, &rho).unwrap();
        let b = apply_via_density(&cd, &rho).unwrap();
        prop_assert!(numkit::op_dist(a.matrix(), b.matrix()) <= 1e-10);
    }

    #[test]
    fn per_state_chains(seed: u64, dims: usize) {
        let (phi, psi, rho) = channel_pair(seed, dims);
        let c = ChannelPair::new(&phi, &psi).unwrap().conditional(&rho).unwrap();
        prop_assert!(c.d_c_rho * c.d_c_rho <= c.d_cb_rho + 1e-8);
        prop_assert!(c.d_cb_rho <= 2.0 * c.d_c_rho + 1e-8);
        prop_assert!(c.d_b_rho <= c.d_cb_rho + 1e-8);
        prop_assert!((0.0..=1.0).contains(&c.f_c_rho));
    }

    #[test]
    fn fidelity_is_convex_in_the_state(seed: u64, dims: usize, lambda in 0.0f64..=1.0) {
        let (phi, psi, r1) = channel_pair(seed, dims);
        let r2 = random_state(phi.dim_in(), &mut rng(seed.wrapping_add(1))).unwrap();
        let pair = ChannelPair::new(&phi, &psi).unwrap();
        let mixed = r1.mix(&r2, 1.0 - lambda);
        let lhs = pair.fidelity_at(&mixed).unwrap();
        let rhs = lambda * pair.fidelity_at(&r1).unwrap() + (1.0 - lambda) * pair.fidelity_at(&r2).unwrap();
        prop_assert!(lhs <= rhs + 1e-9, "{} > {}", lhs, rhs);
    }

    #[test]
    fn coupling_equivalence(seed: u64, dims: usize) {
        let (phi, psi, rho) = channel_pair(seed, dims);
        let pair = ChannelPair::new(&phi, &psi).unwrap();
        prop_assert!((pair.cb_at(&rho).unwrap() - coupling_cb(&phi, &psi, &rho).unwrap()).abs() <= 1e-9);
        prop_assert!((pair.fidelity_at(&rho).unwrap() - coupling_fidelity(&phi, &psi, &rho).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn conditional_metrics_are_symmetric(seed: u64, dims: usize) {
        let (phi, psi, rho) = channel_pair(seed, dims);
        let a = ChannelPair::new(&phi, &psi).unwrap().conditional(&rho).unwrap();
        let b = ChannelPair::new(&psi, &phi).unwrap().conditional(&rho).unwrap();
        prop_assert!((a.d_cb_rho - b.d_cb_rho).abs() <= 1e-9);
        prop_assert!((a.f_c_rho - b.f_c_rho).abs() <= 1e-9);
        prop_assert!((a.d_b_rho - b.d_b_rho).abs() <= 1e-9);
        prop_assert!((a.f_out_rho - b.f_out_rho).abs() <= 1e-9);
        let (ca, cb) = (
            ChannelPair::new(&phi, &psi).unwrap().c_distance(),
            ChannelPair::new(&psi, &phi).unwrap().c_distance(),
        );
        prop_assert!((ca - cb).abs() <= 1e-9);
    }

    #[test]
    fn pure_fast_path_agrees(seed: u64, m in 1usize..4, extra in 0usize..2) {
        let n = m + extra;
        let mut g = rng(seed);
        let phi = random_kraus_channel(m, n, &mut g).unwrap();
        let v = zoo::random_channel(m, n, 1, &mut g).unwrap();
        let rho = random_state(m, &mut g).unwrap();
        let general = ChannelPair::new(&phi, &v).unwrap().fidelity_at(&rho).unwrap();
        let fast = pure_conditional_fidelity(&phi.heisenberg_ops(), &v.heisenberg_ops()[0], &rho).unwrap();
        prop_assert!((general - fast).abs() <= 1e-8);
    }
}
