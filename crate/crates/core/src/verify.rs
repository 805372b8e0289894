//! Executable checks of the variational lemma, the per-state minimax identity
//! and the inequality chains between the channel metrics.
//!
//! Randomized suites draw one base seed from the caller's generator and give
//! trial `i` the generator `task_rng(base, i)`, so results do not depend on
//! how trials are scheduled.

use std::collections::BTreeMap;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::Serialize;

use crate::channel_metrics::{pure_conditional_fidelity, ChannelPair};
use crate::channels::{
    apply_schrodinger, apply_via_density, density_from_kraus, kraus_from_density, zoo, KrausChannel,
};
use crate::error::{Error, Result};
use crate::numkit::{
    haar_unitary, op_dist, polar, psd_sqrt, random_density, random_psd, real, ComplexMatrix,
};
use crate::optimize::{task_rng, OptimizerConfig};
use crate::state::DensityOperator;
use crate::state_metrics::matrix_fidelity;

/// Slack for identities between closed forms.
pub const EXACT_SLACK: f64 = 1e-9;
/// Slack for inequalities between exactly evaluated quantities.
pub const CHAIN_SLACK: f64 = 1e-8;
/// Slack where an optimized value meets a closed form.
pub const OPTIMIZER_SLACK: f64 = 5e-3;
/// Tolerance for the two fidelity formulas and the pure-channel fast path.
pub const FIDELITY_FORM_TOL: f64 = 1e-8;
/// Tolerance for equalities of channel actions.
pub const ACTION_TOL: f64 = 1e-10;
/// Tolerance for the unitary invariance of the lemma value.
pub const INVARIANCE_TOL: f64 = 1e-10;

/// A violated relation `lhs <= rhs + slack` (or `|lhs - rhs| <= slack`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    /// Trial index; the trial's generator is `task_rng(base_seed, instance)`.
    pub instance: u64,
    pub quantities: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub trials: usize,
    pub base_seed: Option<u64>,
    pub failures: Vec<Failure>,
    /// Summary statistics such as largest observed margins.
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub pass: bool,
}

impl SuiteReport {
    fn new(suite: &str, trials: usize, base_seed: Option<u64>) -> Self {
        let mut notes = Vec::new();
        if trials == 0 {
            notes.push("0 trials: vacuous pass".to_string());
        }
        Self {
            suite: suite.to_string(),
            trials,
            base_seed,
            failures: Vec::new(),
            metrics: BTreeMap::new(),
            notes,
            pass: true,
        }
    }

    fn finish(mut self) -> Self {
        self.pass = self.failures.is_empty();
        self
    }

    fn metric_max(&mut self, name: &str, value: f64) {
        let entry = self.metrics.entry(name.to_string()).or_insert(f64::NEG_INFINITY);
        *entry = entry.max(value);
    }

    fn absorb(&mut self, other: SuiteReport) {
        self.failures.extend(other.failures);
        for (k, v) in other.metrics {
            self.metric_max(&k, v);
        }
    }
}

/// Records a failure of `lhs <= rhs + slack`. NaN on either side is a failure.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn check_le(out: &mut Vec<Failure>, instance: u64, what: &str, lhs: f64, rhs: f64, slack: f64) {
    if !(lhs <= rhs + slack) {
        out.push(Failure {
            instance,
            quantities: what.to_string(),
            lhs,
            rhs,
            slack,
        });
    }
}

/// Records a failure of `|lhs - rhs| <= slack`. NaN on either side is a failure.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn check_eq(out: &mut Vec<Failure>, instance: u64, what: &str, lhs: f64, rhs: f64, slack: f64) {
    if !((lhs - rhs).abs() <= slack) {
        out.push(Failure {
            instance,
            quantities: what.to_string(),
            lhs,
            rhs,
            slack,
        });
    }
}

/// `2 Re tr(X† Y)`.
fn pairing(x: &ComplexMatrix, y: &ComplexMatrix) -> f64 {
    2.0 * (x.adjoint() * y).trace().re
}

/// Checks `sup {tr(X†Y + Y†X) : X†X = R, Y†Y = S} = 2 tr √(R^{1/2} S R^{1/2})`.
///
/// Records the closed form `c`, draws `trials` Haar pairs `(U, V)` with
/// `X = U R^{1/2}`, `Y = V S^{1/2}` and requires every sample to stay below
/// `c`, evaluates the polar construction `X₀ = R^{1/2}`, `Y₀ = W† S^{1/2}`
/// (`S^{1/2} R^{1/2} = W |S^{1/2} R^{1/2}|`) which must attain `c`, and
/// recomputes `c` from `(U X₀)†(U X₀)` for one more Haar `U`.
pub fn lemma_check<G: Rng + ?Sized>(
    r: &ComplexMatrix,
    s: &ComplexMatrix,
    trials: usize,
    rng: &mut G,
) -> Result<SuiteReport> {
    let d = r.nrows();
    if r.shape() != (d, d) || s.shape() != (d, d) {
        return Err(Error::DimensionMismatch(format!(
            "lemma needs square matrices of one size, got {:?} and {:?}",
            r.shape(),
            s.shape()
        )));
    }
    let rr = psd_sqrt(r)?;
    let ss = psd_sqrt(s)?;
    let c = 2.0 * matrix_fidelity(r, s)?;
    let mut report = SuiteReport::new("lemma", trials, None);
    let mut failures = Vec::new();

    let mut sampled_max = f64::NEG_INFINITY;
    for t in 0..trials {
        let u = haar_unitary(d, rng);
        let v = haar_unitary(d, rng);
        let value = pairing(&(&u * &rr), &(&v * &ss));
        sampled_max = sampled_max.max(value);
        check_le(&mut failures, t as u64, "sampled pairing <= c", value, c, EXACT_SLACK);
    }

    let w = polar(&(&ss * &rr))?.unitary;
    let x0 = rr.clone();
    let y0 = w.adjoint() * &ss;
    let constructed = pairing(&x0, &y0);
    check_eq(&mut failures, 0, "constructed pairing = c", constructed, c, EXACT_SLACK);
    check_le(
        &mut failures,
        0,
        "constructed Y0'Y0 = S",
        op_dist(&(y0.adjoint() * &y0), s),
        0.0,
        EXACT_SLACK,
    );

    let u = haar_unitary(d, rng);
    let moved = &u * &x0;
    let c_moved = 2.0 * matrix_fidelity(&(moved.adjoint() * &moved), s)?;
    check_eq(&mut failures, 0, "c invariant under X -> UX", c_moved, c, INVARIANCE_TOL);

    report.failures = failures;
    report.metrics.insert("closed_form".into(), c);
    report.metrics.insert("constructed".into(), constructed);
    if trials > 0 {
        report.metrics.insert("sampled_max".into(), sampled_max);
    }
    Ok(report.finish())
}

const ZERO_SAMPLES_NOTE: &str =
    "0 trials: vacuous pass of the sampled bound; only the constructed optimizer was checked";

/// [`lemma_check`] over `pairs` random trace-normalized PSD pairs per dimension.
pub fn lemma_suite<G: RngCore + ?Sized>(
    dims: &[usize],
    pairs: usize,
    samples: usize,
    rng: &mut G,
) -> Result<SuiteReport> {
    let base = rng.next_u64();
    let jobs: Vec<(usize, usize)> = dims
        .iter()
        .flat_map(|&d| (0..pairs).map(move |p| (d, p)))
        .collect();
    let reports: Vec<SuiteReport> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &(d, _))| {
            let mut trng = task_rng(base, i as u64);
            let r = normalized_psd(d, &mut trng);
            let s = normalized_psd(d, &mut trng);
            let mut rep = lemma_check(&r, &s, samples, &mut trng)?;
            for f in &mut rep.failures {
                f.instance = i as u64;
            }
            if samples > 0 {
                let ratio = rep.metrics["sampled_max"] / rep.metrics["closed_form"];
                rep.metrics.insert("worst_sampled_ratio_deficit".into(), 1.0 - ratio);
            }
            Ok(rep)
        })
        .collect::<Result<_>>()?;
    let mut report = SuiteReport::new("lemma", jobs.len(), Some(base));
    if samples == 0 {
        report.notes.push(ZERO_SAMPLES_NOTE.to_string());
    }
    for rep in reports {
        let constructed_err = (rep.metrics["constructed"] - rep.metrics["closed_form"]).abs();
        report.metric_max("max_constructed_error", constructed_err);
        if let (Some(sm), Some(c)) = (rep.metrics.get("sampled_max"), rep.metrics.get("closed_form")) {
            report.metric_max("max_sampled_excess", sm - c);
        }
        if let Some(def) = rep.metrics.get("worst_sampled_ratio_deficit") {
            report.metric_max("worst_sampled_ratio_deficit", *def);
        }
        report.failures.extend(rep.failures);
    }
    report.metrics.insert("samples_per_pair".into(), samples as f64);
    Ok(report.finish())
}

fn normalized_psd<G: Rng + ?Sized>(d: usize, rng: &mut G) -> ComplexMatrix {
    let p = random_psd(d, rng);
    let tr = p.trace().re;
    p / real(tr)
}

/// Per-state minimax identity: for `ρ` fixed, every decomposition
/// `Γ = U Φ_μ^{1/2}`, `Υ = V Ψ_μ^{1/2}` gives
/// `Re tr((ρ̃ ⊗ I) Γ†Υ) <= f_c^ρ`, with equality at `U = I`, `V = P†` where
/// `Ψ_μ^{1/2}(ρ̃ ⊗ I)Φ_μ^{1/2} = P |·|`. The lemma is also run on the two
/// sandwiched densities, whose closed form must equal `2 f_c^ρ`.
pub fn minimax_check<G: Rng + ?Sized>(
    phi: &KrausChannel,
    psi: &KrausChannel,
    rho: &DensityOperator,
    trials: usize,
    rng: &mut G,
) -> Result<SuiteReport> {
    let pair = ChannelPair::new(phi, psi)?;
    let f = pair.fidelity_at(rho)?;
    let r = crate::channel_metrics::sandwiched_density(pair.phi_density(), rho)?;
    let s = crate::channel_metrics::sandwiched_density(pair.psi_density(), rho)?;
    let lemma = lemma_check(&r, &s, trials, rng)?;

    let mut report = SuiteReport::new("minimax", trials, None);
    let mut failures = lemma.failures.clone();
    check_eq(
        &mut failures,
        0,
        "lemma closed form = 2 f_c^rho",
        lemma.metrics["closed_form"],
        2.0 * f,
        FIDELITY_FORM_TOL,
    );

    let a = pair.phi_density().sqrt()?;
    let b = pair.psi_density().sqrt()?;
    let lift = crate::numkit::kron(&rho.matrix().transpose(), &crate::numkit::identity(pair.dim_out()));
    let value = |q: &ComplexMatrix| (&lift * &a * q * &b).trace().re;
    let dim = a.nrows();
    let mut sampled_max = f64::NEG_INFINITY;
    for t in 0..trials {
        let u = haar_unitary(dim, rng);
        let v = haar_unitary(dim, rng);
        let sample = value(&(u.adjoint() * v));
        sampled_max = sampled_max.max(sample);
        check_le(&mut failures, t as u64, "decomposition value <= f_c^rho", sample, f, EXACT_SLACK);
    }
    let p = polar(&(&b * &lift * &a))?.unitary;
    let constructed = value(&p.adjoint());
    check_eq(&mut failures, 0, "constructed decomposition = f_c^rho", constructed, f, EXACT_SLACK);

    report.failures = failures;
    report.metrics.insert("f_c_rho".into(), f);
    report.metrics.insert("constructed".into(), constructed);
    if trials > 0 {
        report.metrics.insert("sampled_max".into(), sampled_max);
    }
    Ok(report.finish())
}

/// [`minimax_check`] on `pairs` random channel pairs and states per dimension pair.
pub fn minimax_suite<G: RngCore + ?Sized>(
    dims: &[(usize, usize)],
    pairs: usize,
    samples: usize,
    rng: &mut G,
) -> Result<SuiteReport> {
    check_dims(dims)?;
    let base = rng.next_u64();
    let jobs: Vec<(usize, usize)> = dims
        .iter()
        .flat_map(|&mn| std::iter::repeat_n(mn, pairs))
        .collect();
    let reports: Vec<SuiteReport> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &(m, n))| {
            let mut trng = task_rng(base, i as u64);
            let phi = random_kraus_channel(m, n, &mut trng)?;
            let psi = random_kraus_channel(m, n, &mut trng)?;
            let rho = random_state(m, &mut trng)?;
            let mut rep = minimax_check(&phi, &psi, &rho, samples, &mut trng)?;
            for f in &mut rep.failures {
                f.instance = i as u64;
            }
            Ok(rep)
        })
        .collect::<Result<_>>()?;
    let mut report = SuiteReport::new("minimax", jobs.len(), Some(base));
    if samples == 0 {
        report.notes.push(ZERO_SAMPLES_NOTE.to_string());
    }
    for rep in reports {
        report.metric_max(
            "max_constructed_error",
            (rep.metrics["constructed"] - rep.metrics["f_c_rho"]).abs(),
        );
        if let Some(sm) = rep.metrics.get("sampled_max") {
            report.metric_max("max_sampled_excess", sm - rep.metrics["f_c_rho"]);
        }
        report.failures.extend(rep.failures);
    }
    Ok(report.finish())
}

/// Dimension pairs accepted by the randomized channel suites.
pub const SUITE_DIMS: [(usize, usize); 4] = [(2, 2), (2, 3), (3, 2), (3, 3)];

fn check_dims(dims: &[(usize, usize)]) -> Result<()> {
    for d in dims {
        if !SUITE_DIMS.contains(d) {
            return Err(Error::OutOfRange(format!(
                "dimension pair {d:?} not in {SUITE_DIMS:?}"
            )));
        }
    }
    Ok(())
}

/// Random channel `C^m -> C^n` with between the minimal and 3 Kraus operators.
pub fn random_kraus_channel<G: Rng + ?Sized>(m: usize, n: usize, rng: &mut G) -> Result<KrausChannel> {
    let k_min = m.div_ceil(n);
    let k = rng.random_range(k_min..=k_min.max(3));
    zoo::random_channel(m, n, k, rng)
}

/// Random state of uniformly chosen rank.
pub fn random_state<G: Rng + ?Sized>(m: usize, rng: &mut G) -> Result<DensityOperator> {
    let rank = rng.random_range(1..=m);
    random_density(m, rank, rng)
}

/// Per-state and full-metric inequality chains on random channel pairs.
///
/// Per state: `d_c^ρ² <= D_cb^ρ <= 2 d_c^ρ` and `d_b^ρ <= D_cb^ρ`. Per pair:
/// `D_b <= D_cb <= D_c`, `d_c² <= D_cb <= 2 d_c` and `d_h² <= D_b <= 2 d_h`.
pub fn inequality_suite<G: RngCore + ?Sized>(
    dims: &[(usize, usize)],
    trials: usize,
    rng: &mut G,
    cfg: &OptimizerConfig,
) -> Result<SuiteReport> {
    check_dims(dims)?;
    cfg.validate()?;
    let base = rng.next_u64();
    let jobs: Vec<(usize, usize)> = dims
        .iter()
        .flat_map(|&mn| std::iter::repeat_n(mn, trials))
        .collect();
    let outcomes: Vec<(Vec<Failure>, bool)> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &(m, n))| {
            let mut trng = task_rng(base, i as u64);
            let phi = random_kraus_channel(m, n, &mut trng)?;
            let psi = random_kraus_channel(m, n, &mut trng)?;
            let rho = random_state(m, &mut trng)?;
            let trial_cfg = OptimizerConfig {
                seed: trng.next_u64(),
                ..cfg.clone()
            };
            inequality_checks(i as u64, &phi, &psi, &rho, &trial_cfg)
        })
        .collect::<Result<_>>()?;
    let mut report = SuiteReport::new("inequalities", jobs.len(), Some(base));
    let mut unconverged = 0;
    for (failures, converged) in outcomes {
        report.failures.extend(failures);
        if !converged {
            unconverged += 1;
        }
    }
    report
        .metrics
        .insert("unconverged_pairs".into(), unconverged as f64);
    if unconverged > 0 {
        report.notes.push(format!(
            "{unconverged} pairs had an optimizer stop before convergence; their values are one-sided bounds"
        ));
    }
    Ok(report.finish())
}

/// All chains for one instance; returns the failures and whether every
/// optimizer converged.
pub fn inequality_checks(
    instance: u64,
    phi: &KrausChannel,
    psi: &KrausChannel,
    rho: &DensityOperator,
    cfg: &OptimizerConfig,
) -> Result<(Vec<Failure>, bool)> {
    let pair = ChannelPair::new(phi, psi)?;
    let c = pair.conditional(rho)?;
    let mut out = Vec::new();
    check_le(&mut out, instance, "d_c^rho^2 <= D_cb^rho", c.d_c_rho * c.d_c_rho, c.d_cb_rho, CHAIN_SLACK);
    check_le(&mut out, instance, "D_cb^rho <= 2 d_c^rho", c.d_cb_rho, 2.0 * c.d_c_rho, CHAIN_SLACK);
    check_le(&mut out, instance, "d_b^rho <= D_cb^rho", c.d_b_rho, c.d_cb_rho, CHAIN_SLACK);

    let full = pair.full_metrics(cfg)?;
    check_le(&mut out, instance, "D_b <= D_cb", full.d_b, full.d_cb, CHAIN_SLACK);
    check_le(&mut out, instance, "D_cb <= D_c", full.d_cb, full.d_c, OPTIMIZER_SLACK);
    check_le(&mut out, instance, "d_c^2 <= D_cb", full.ch * full.ch, full.d_cb, CHAIN_SLACK);
    check_le(&mut out, instance, "D_cb <= 2 d_c", full.d_cb, 2.0 * full.ch, CHAIN_SLACK);
    check_le(&mut out, instance, "d_h^2 <= D_b", full.d_h * full.d_h, full.d_b, CHAIN_SLACK);
    check_le(&mut out, instance, "D_b <= 2 d_h", full.d_b, 2.0 * full.d_h, CHAIN_SLACK);
    Ok((out, full.convergence.all_converged()))
}

/// Equalities between representations on random channels with `m, n <= 3`:
/// the two fidelity formulas, the Kraus and density actions, the pure-channel
/// fast path and the Kraus → density → Kraus round trip.
pub fn representation_suite<G: RngCore + ?Sized>(trials: usize, rng: &mut G) -> Result<SuiteReport> {
    let base = rng.next_u64();
    let outcomes: Vec<Vec<Failure>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut trng = task_rng(base, i as u64);
            let m = trng.random_range(1..=3usize);
            let n = trng.random_range(1..=3usize);
            let phi = random_kraus_channel(m, n, &mut trng)?;
            let psi = random_kraus_channel(m, n, &mut trng)?;
            let rho = random_state(m, &mut trng)?;
            let isometry = if n >= m {
                Some(zoo::random_channel(m, n, 1, &mut trng)?)
            } else {
                None
            };
            representation_checks(i as u64, &phi, &psi, isometry.as_ref(), &rho)
        })
        .collect::<Result<_>>()?;
    let mut report = SuiteReport::new("representations", trials, Some(base));
    report.failures = outcomes.into_iter().flatten().collect();
    Ok(report.finish())
}

/// The representation equalities for one instance. `pure` must be a
/// single-Kraus channel with the dimensions of `phi`.
pub fn representation_checks(
    instance: u64,
    phi: &KrausChannel,
    psi: &KrausChannel,
    pure: Option<&KrausChannel>,
    rho: &DensityOperator,
) -> Result<Vec<Failure>> {
    let mut out = Vec::new();
    let pair = ChannelPair::new(phi, psi)?;
    check_eq(
        &mut out,
        instance,
        "f_c^rho sandwich form = product form",
        pair.fidelity_sandwich_at(rho)?,
        pair.fidelity_at(rho)?,
        FIDELITY_FORM_TOL,
    );

    for ch in [phi, psi] {
        let cd = density_from_kraus(ch)?;
        let direct = apply_schrodinger(ch, rho)?;
        let via = apply_via_density(&cd, rho)?;
        check_le(
            &mut out,
            instance,
            "|T(rho) Kraus - density action|",
            op_dist(direct.matrix(), via.matrix()),
            0.0,
            ACTION_TOL,
        );
        let back = kraus_from_density(&cd)?;
        let round = apply_schrodinger(&back, rho)?;
        check_le(
            &mut out,
            instance,
            "|T(rho) after Kraus round trip|",
            op_dist(direct.matrix(), round.matrix()),
            0.0,
            ACTION_TOL,
        );
    }

    if let Some(v) = pure {
        if !v.is_pure() {
            return Err(Error::InvalidChannel("fast path needs a single Kraus operator".into()));
        }
        let general = ChannelPair::new(phi, v)?.fidelity_at(rho)?;
        let fast = pure_conditional_fidelity(&phi.heisenberg_ops(), &v.heisenberg_ops()[0], rho)?;
        check_eq(&mut out, instance, "pure fast path = general f_c^rho", fast, general, FIDELITY_FORM_TOL);
    }
    Ok(out)
}

/// Same as [`representation_checks`] for a list of fixed channels against
/// each other, used for the zoo corpus.
pub fn representation_corpus(channels: &[KrausChannel], states: &[DensityOperator]) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("representations", 0, None);
    let mut instance = 0u64;
    for phi in channels {
        for psi in channels {
            if (phi.dim_in(), phi.dim_out()) != (psi.dim_in(), psi.dim_out()) {
                continue;
            }
            for rho in states.iter().filter(|r| r.dim() == phi.dim_in()) {
                let pure = Some(psi).filter(|c| c.is_pure() && c.dim_out() >= c.dim_in());
                let failures = representation_checks(instance, phi, psi, pure, rho)?;
                report.absorb(SuiteReport {
                    failures,
                    ..SuiteReport::new("", 0, None)
                });
                instance += 1;
            }
        }
    }
    report.trials = instance as usize;
    report.notes.clear();
    Ok(report.finish())
}
