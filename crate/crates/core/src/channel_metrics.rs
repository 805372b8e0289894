//! Distances and fidelities between two channels.
//!
//! Every conditional quantity is a function of an input state `ρ` and of the
//! sandwiched densities `Φ_μ(ρ) = (ρ̃^{1/2} ⊗ I) Φ_μ (ρ̃^{1/2} ⊗ I)`, which are
//! the outputs of the two channels on the standard entangled input with
//! marginal `ρ`. The full metrics extremize the conditional ones over `ρ`.

use crate::channels::{density_from_kraus, ChannelDensity, KrausChannel};
use crate::error::{Error, Result};
use crate::numkit::{
    self, herm_eig, kron, mat_abs, partial_trace, polar, psd_sqrt, trace_norm,
    ComplexMatrix, Factor,
};
use crate::optimize::{self, OptResult, OptimizerConfig};
use crate::state::DensityOperator;
use crate::state_metrics::{self, bures_from_fidelity, matrix_fidelity};

/// Required agreement between the two fidelity formulas.
pub const FORM_AGREEMENT_TOL: f64 = 1e-8;

/// `(ρ̃^{1/2} ⊗ I_n) X (ρ̃^{1/2} ⊗ I_n)`.
pub fn sandwiched_density(cd: &ChannelDensity, rho: &DensityOperator) -> Result<ComplexMatrix> {
    check_rho(cd.dim_in(), rho)?;
    Ok(sandwich(cd.kernel(), rho, cd.dim_out()))
}

fn sandwich(x: &ComplexMatrix, rho: &DensityOperator, dim_out: usize) -> ComplexMatrix {
    let root = psd_sqrt(rho.matrix()).expect("densities are PSD").transpose();
    let lift = kron(&root, &numkit::identity(dim_out));
    &lift * x * &lift
}

fn check_rho(dim_in: usize, rho: &DensityOperator) -> Result<()> {
    if rho.dim() != dim_in {
        return Err(Error::DimensionMismatch(format!(
            "channel input dimension {dim_in}, state dimension {}",
            rho.dim()
        )));
    }
    Ok(())
}

/// Conditional metrics at one input state.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalMetrics {
    pub rho: DensityOperator,
    pub d_cb_rho: f64,
    pub f_c_rho: f64,
    /// CH semidistance `√(2(1 - f_c^ρ))`.
    pub d_c_rho: f64,
    /// Fidelity of the two output states.
    pub f_out_rho: f64,
    /// Trace distance of the two output states.
    pub d_b_rho: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutputMetrics {
    pub d_b_rho: f64,
    pub f_out_rho: f64,
}

/// Two channels with shared dimensions and their precomputed densities.
///
/// The square roots of both densities do not depend on the input state, so
/// they are computed once and reused for every evaluation.
#[derive(Clone, Debug)]
pub struct ChannelPair {
    phi: KrausChannel,
    psi: KrausChannel,
    phi_density: ChannelDensity,
    psi_density: ChannelDensity,
    phi_root: ComplexMatrix,
    psi_root: ComplexMatrix,
    delta: ComplexMatrix,
}

/// Value of `f_c^ρ` together with a subgradient in `ρ`.
#[derive(Clone, Debug)]
pub struct FidelitySubgradient {
    pub value: f64,
    /// Hermitian `G` with `f_c^σ >= tr(G σ)` for every state `σ`, with equality at `ρ`.
    pub gradient: ComplexMatrix,
    /// Operator norm of the polar factor used; `λ_min(G) / max(1, w_norm)` is a
    /// valid lower bound on `inf_σ f_c^σ` even when roundoff makes it exceed 1.
    pub w_norm: f64,
}

#[derive(Clone, Debug)]
pub struct SmoothedFidelity {
    pub value: f64,
    pub smoothed: f64,
    pub gradient: ComplexMatrix,
    pub w_norm: f64,
}

impl ChannelPair {
    pub fn new(phi: &KrausChannel, psi: &KrausChannel) -> Result<Self> {
        if (phi.dim_in(), phi.dim_out()) != (psi.dim_in(), psi.dim_out()) {
            return Err(Error::DimensionMismatch(format!(
                "channels map {}->{} and {}->{}",
                phi.dim_in(),
                phi.dim_out(),
                psi.dim_in(),
                psi.dim_out()
            )));
        }
        let phi_density = density_from_kraus(phi)?;
        let psi_density = density_from_kraus(psi)?;
        let phi_root = phi_density.sqrt()?;
        let psi_root = psi_density.sqrt()?;
        let delta = phi_density.kernel() - psi_density.kernel();
        Ok(Self {
            phi: phi.clone(),
            psi: psi.clone(),
            phi_density,
            psi_density,
            phi_root,
            psi_root,
            delta,
        })
    }

    pub fn dim_in(&self) -> usize {
        self.phi.dim_in()
    }

    pub fn dim_out(&self) -> usize {
        self.phi.dim_out()
    }

    pub fn phi(&self) -> &KrausChannel {
        &self.phi
    }

    pub fn psi(&self) -> &KrausChannel {
        &self.psi
    }

    pub fn phi_density(&self) -> &ChannelDensity {
        &self.phi_density
    }

    pub fn psi_density(&self) -> &ChannelDensity {
        &self.psi_density
    }

    /// `‖Φ_μ(ρ) - Ψ_μ(ρ)‖₁`.
    pub fn cb_at(&self, rho: &DensityOperator) -> Result<f64> {
        check_rho(self.dim_in(), rho)?;
        Ok(trace_norm(&sandwich(&self.delta, rho, self.dim_out())))
    }

    /// `‖Φ_μ^{1/2} (ρ̃ ⊗ I) Ψ_μ^{1/2}‖₁`.
    pub fn fidelity_at(&self, rho: &DensityOperator) -> Result<f64> {
        check_rho(self.dim_in(), rho)?;
        Ok(trace_norm(&self.fidelity_operator(rho)))
    }

    /// Fidelity of the two sandwiched densities, `Tr √(R^{1/2} S R^{1/2})`.
    pub fn fidelity_sandwich_at(&self, rho: &DensityOperator) -> Result<f64> {
        check_rho(self.dim_in(), rho)?;
        let r = sandwich(self.phi_density.kernel(), rho, self.dim_out());
        let s = sandwich(self.psi_density.kernel(), rho, self.dim_out());
        matrix_fidelity(&r, &s)
    }

    fn fidelity_operator(&self, rho: &DensityOperator) -> ComplexMatrix {
        let lift = kron(&rho.matrix().transpose(), &numkit::identity(self.dim_out()));
        &self.phi_root * lift * &self.psi_root
    }

    /// Value and subgradient of `ρ ↦ f_c^ρ` from the polar factor `W` of
    /// `M(ρ) = Φ_μ^{1/2} (ρ̃ ⊗ I) Ψ_μ^{1/2}`: with `P = tr_out(Ψ_μ^{1/2} W† Φ_μ^{1/2})`,
    /// `G` is the Hermitian part of `Pᵀ`. The partial isometry is used, so the
    /// subgradient vanishes where `M(ρ) = 0`.
    pub fn fidelity_subgradient(&self, rho: &DensityOperator) -> Result<FidelitySubgradient> {
        check_rho(self.dim_in(), rho)?;
        let m = self.fidelity_operator(rho);
        let p = polar(&m)?;
        Ok(FidelitySubgradient {
            value: p.trace_norm(),
            gradient: self.dual_gradient(&p.partial)?,
            w_norm: numkit::op_norm(&p.partial),
        })
    }

    /// `M(ρ) = Φ_μ^{1/2} (ρ̃ ⊗ I) Ψ_μ^{1/2}`.
    pub fn fidelity_matrix(&self, rho: &DensityOperator) -> Result<ComplexMatrix> {
        check_rho(self.dim_in(), rho)?;
        Ok(self.fidelity_operator(rho))
    }

    /// Smoothed objective `Σ_i (√(σ_i² + μ²) - μ)` over the singular values of
    /// `M(ρ)`, with its gradient `G(W_μ)` for the contraction
    /// `W_μ = M (M†M + μ²)^{-1/2}`. `value` is the exact `f_c^ρ`.
    pub fn smoothed_fidelity(&self, rho: &DensityOperator, mu: f64) -> Result<SmoothedFidelity> {
        let m = self.fidelity_matrix(rho)?;
        let svd = m.svd(true, true);
        let u = svd.u.expect("requested");
        let vt = svd.v_t.expect("requested");
        let mut w = ComplexMatrix::zeros(u.nrows(), vt.ncols());
        let (mut value, mut smoothed, mut w_norm) = (0.0, 0.0, 0.0_f64);
        for (i, &s) in svd.singular_values.iter().enumerate() {
            let r = s.hypot(mu);
            value += s;
            smoothed += r - mu;
            let weight = if r > 0.0 { s / r } else { 0.0 };
            w_norm = w_norm.max(weight);
            w += u.column(i) * vt.row(i) * numkit::real(weight);
        }
        Ok(SmoothedFidelity {
            value,
            smoothed,
            gradient: self.dual_gradient(&w)?,
            w_norm,
        })
    }

    /// The Hermitian `G(W)` with `tr(G(W) σ) = Re tr(W† M(σ))` for every `σ`.
    /// For a contraction `W`, `λ_min(G(W))` is a lower bound on `inf_σ f_c^σ`.
    pub fn dual_gradient(&self, w: &ComplexMatrix) -> Result<ComplexMatrix> {
        let c = &self.psi_root * w.adjoint() * &self.phi_root;
        let reduced = partial_trace(&c, (self.dim_in(), self.dim_out()), Factor::Second)?;
        Ok(numkit::hermitian_part(&reduced.transpose()))
    }

    pub fn ch_at(&self, rho: &DensityOperator) -> Result<f64> {
        Ok(bures_from_fidelity(self.fidelity_at(rho)?))
    }

    pub fn output_at(&self, rho: &DensityOperator) -> Result<OutputMetrics> {
        check_rho(self.dim_in(), rho)?;
        let a = DensityOperator::from_trusted(self.phi.apply_matrix(rho.matrix())?);
        let b = DensityOperator::from_trusted(self.psi.apply_matrix(rho.matrix())?);
        Ok(OutputMetrics {
            d_b_rho: state_metrics::trace_distance(&a, &b)?,
            f_out_rho: state_metrics::fidelity(&a, &b)?,
        })
    }

    /// Output Bures distance `√(2(1 - f_out^ρ))`.
    pub fn h_at(&self, rho: &DensityOperator) -> Result<f64> {
        Ok(bures_from_fidelity(self.output_at(rho)?.f_out_rho))
    }

    pub fn conditional(&self, rho: &DensityOperator) -> Result<ConditionalMetrics> {
        let d_cb_rho = self.cb_at(rho)?;
        let f_c_rho = self.fidelity_at(rho)?;
        let out = self.output_at(rho)?;
        Ok(ConditionalMetrics {
            rho: rho.clone(),
            d_cb_rho,
            f_c_rho,
            d_c_rho: bures_from_fidelity(f_c_rho),
            f_out_rho: out.f_out_rho,
            d_b_rho: out.d_b_rho,
        })
    }

    /// `tr_out |Φ_μ - Ψ_μ|`, whose top eigenvalue is the C-distance.
    pub fn c_functional(&self) -> ComplexMatrix {
        partial_trace(
            &mat_abs(&self.delta),
            (self.dim_in(), self.dim_out()),
            Factor::Second,
        )
        .expect("kernel shape fixed by construction")
    }

    /// `sup_ρ tr(ρ̃ · tr_out|Δ_μ|)`, attained at the top eigenvector.
    pub fn c_distance(&self) -> f64 {
        let eig = herm_eig(&self.c_functional()).expect("partial trace of PSD is Hermitian");
        eig.eigenvalues[0].max(0.0)
    }

    /// Full metrics: each supremum/infimum over input states is optimized
    /// independently, then every objective is re-evaluated at every witness so
    /// the reported values are the best bounds found by any of the searches.
    pub fn full_metrics(&self, cfg: &OptimizerConfig) -> Result<ChannelMetricsReport> {
        cfg.validate()?;
        let m = self.dim_in();
        let cb = |r: &DensityOperator| self.cb_at(r);
        let b = |r: &DensityOperator| self.output_at(r).map(|o| o.d_b_rho);
        let h = |r: &DensityOperator| self.h_at(r);

        let ((cb_run, b_run), (h_run, fc_run)) = rayon::join(
            || {
                rayon::join(
                    || optimize::maximize_over_states(cb, m, cfg),
                    || optimize::maximize_over_states(b, m, cfg),
                )
            },
            || {
                rayon::join(
                    || optimize::maximize_over_states(h, m, cfg),
                    || optimize::frank_wolfe(self, cfg),
                )
            },
        );
        let (mut cb_run, mut b_run, mut h_run, mut fc_run) = (cb_run?, b_run?, h_run?, fc_run?);

        let witnesses = [
            cb_run.witness.clone(),
            b_run.witness.clone(),
            h_run.witness.clone(),
            fc_run.witness.clone(),
        ];
        for w in &witnesses {
            absorb(&mut cb_run, w, cb(w)?, true);
            absorb(&mut b_run, w, b(w)?, true);
            absorb(&mut h_run, w, h(w)?, true);
            absorb(&mut fc_run, w, self.fidelity_at(w)?, false);
        }

        let f_c = fc_run.value;
        Ok(ChannelMetricsReport {
            d_b: b_run.value,
            d_cb: cb_run.value,
            d_c: self.c_distance(),
            ch: bures_from_fidelity(f_c),
            f_c,
            d_h: h_run.value,
            witnesses: Witnesses {
                b: b_run.witness.clone(),
                cb: cb_run.witness.clone(),
                fc: fc_run.witness.clone(),
                h: h_run.witness.clone(),
            },
            convergence: ConvergenceSummary {
                b: RunSummary::from(&b_run),
                cb: RunSummary::from(&cb_run),
                fc: RunSummary::from(&fc_run),
                h: RunSummary::from(&h_run),
            },
        })
    }
}

fn absorb(run: &mut OptResult, witness: &DensityOperator, value: f64, maximize: bool) {
    let better = if maximize {
        value > run.value
    } else {
        value < run.value
    };
    if better {
        run.value = value;
        run.witness = witness.clone();
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Witnesses {
    pub b: DensityOperator,
    pub cb: DensityOperator,
    pub fc: DensityOperator,
    pub h: DensityOperator,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSummary {
    pub iterations: usize,
    pub converged: bool,
    pub gap: Option<f64>,
}

impl From<&OptResult> for RunSummary {
    fn from(r: &OptResult) -> Self {
        Self {
            iterations: r.iterations,
            converged: r.converged,
            gap: r.gap,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceSummary {
    pub b: RunSummary,
    pub cb: RunSummary,
    pub fc: RunSummary,
    pub h: RunSummary,
}

impl ConvergenceSummary {
    pub fn all_converged(&self) -> bool {
        self.b.converged && self.cb.converged && self.fc.converged && self.h.converged
    }
}

/// Full channel metrics. `d_b`, `d_cb` and `d_h` are lower bounds on their
/// suprema and `f_c` an upper bound on its infimum; `d_c` is closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMetricsReport {
    /// B-distance `sup_ρ ‖T_Φ(ρ) - T_Ψ(ρ)‖₁`.
    pub d_b: f64,
    /// CB distance `sup_ρ D_cb^ρ`.
    pub d_cb: f64,
    /// C-distance.
    pub d_c: f64,
    /// CH distance `√(2(1 - f_c))`.
    pub ch: f64,
    /// Complete relative fidelity `inf_ρ f_c^ρ`.
    pub f_c: f64,
    /// H-distance `sup_ρ √(2(1 - f_out^ρ))`.
    pub d_h: f64,
    pub witnesses: Witnesses,
    pub convergence: ConvergenceSummary,
}

/// A violated inequality `lhs <= rhs + slack`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainViolation {
    pub relation: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

impl ChannelMetricsReport {
    /// Checks `D_b <= D_cb <= D_c`, `d_c² <= D_cb <= 2 d_c` and
    /// `d_h² <= D_b <= 2 d_h`.
    pub fn chain_violations(&self, slack: f64) -> Vec<ChainViolation> {
        let checks = [
            ("D_b <= D_cb", self.d_b, self.d_cb),
            ("D_cb <= D_c", self.d_cb, self.d_c),
            ("d_c^2 <= D_cb", self.ch * self.ch, self.d_cb),
            ("D_cb <= 2 d_c", self.d_cb, 2.0 * self.ch),
            ("d_h^2 <= D_b", self.d_h * self.d_h, self.d_b),
            ("D_b <= 2 d_h", self.d_b, 2.0 * self.d_h),
        ];
        checks
            .into_iter()
            .filter(|(_, lhs, rhs)| lhs > &(rhs + slack))
            .map(|(relation, lhs, rhs)| ChainViolation { relation, lhs, rhs })
            .collect()
    }
}

pub fn conditional_cb(phi: &KrausChannel, psi: &KrausChannel, rho: &DensityOperator) -> Result<f64> {
    ChannelPair::new(phi, psi)?.cb_at(rho)
}

/// `f_c^ρ`, evaluated both as the fidelity of the sandwiched densities and as
/// `‖Φ_μ^{1/2}(ρ̃ ⊗ I)Ψ_μ^{1/2}‖₁`; the two must agree within
/// [`FORM_AGREEMENT_TOL`].
pub fn conditional_fidelity(
    phi: &KrausChannel,
    psi: &KrausChannel,
    rho: &DensityOperator,
) -> Result<f64> {
    let pair = ChannelPair::new(phi, psi)?;
    let direct = pair.fidelity_at(rho)?;
    let sandwich = pair.fidelity_sandwich_at(rho)?;
    if (direct - sandwich).abs() > FORM_AGREEMENT_TOL {
        return Err(Error::Inconsistent {
            what: "fidelity forms",
            lhs: direct,
            rhs: sandwich,
        });
    }
    Ok(direct)
}

pub fn conditional_ch(phi: &KrausChannel, psi: &KrausChannel, rho: &DensityOperator) -> Result<f64> {
    Ok(bures_from_fidelity(conditional_fidelity(phi, psi, rho)?))
}

pub fn output_metrics(
    phi: &KrausChannel,
    psi: &KrausChannel,
    rho: &DensityOperator,
) -> Result<OutputMetrics> {
    ChannelPair::new(phi, psi)?.output_at(rho)
}

pub fn c_distance(phi: &KrausChannel, psi: &KrausChannel) -> Result<f64> {
    Ok(ChannelPair::new(phi, psi)?.c_distance())
}

pub fn full_metrics(
    phi: &KrausChannel,
    psi: &KrausChannel,
    cfg: &OptimizerConfig,
) -> Result<ChannelMetricsReport> {
    ChannelPair::new(phi, psi)?.full_metrics(cfg)
}

/// Fast path when `Ψ` is pure: `(Σ_j |tr(ρ̃ F_j† V)|²)^{1/2}` with `F_j` the
/// Heisenberg operators of `Φ` and `V` that of `Ψ`.
pub fn pure_conditional_fidelity(
    phi_heisenberg: &[ComplexMatrix],
    v: &ComplexMatrix,
    rho: &DensityOperator,
) -> Result<f64> {
    let (n, m) = v.shape();
    check_rho(m, rho)?;
    let defect = numkit::op_dist(&(v.adjoint() * v), &numkit::identity(m));
    if defect > 1e-9 {
        return Err(Error::NotIsometric(defect));
    }
    let rt = rho.matrix().transpose();
    let mut total = 0.0;
    for f in phi_heisenberg {
        if f.shape() != (n, m) {
            return Err(Error::DimensionMismatch(format!(
                "Heisenberg operator is {}x{}, expected {n}x{m}",
                f.nrows(),
                f.ncols()
            )));
        }
        total += (&rt * f.adjoint() * v).trace().norm_sqr();
    }
    Ok(total.sqrt())
}

/// Conditional fidelity on the standard coupling, computed through the Kraus
/// action on the purification vector rather than through the densities.
pub fn coupling_fidelity(
    phi: &KrausChannel,
    psi: &KrausChannel,
    rho: &DensityOperator,
) -> Result<f64> {
    let a = crate::channels::entangled_output(phi, rho)?;
    let b = crate::channels::entangled_output(psi, rho)?;
    matrix_fidelity(&a, &b)
}

/// Conditional CB distance on the standard coupling via the Kraus action.
pub fn coupling_cb(phi: &KrausChannel, psi: &KrausChannel, rho: &DensityOperator) -> Result<f64> {
    let a = crate::channels::entangled_output(phi, rho)?;
    let b = crate::channels::entangled_output(psi, rho)?;
    Ok(trace_norm(&(a - b)))
}

/// Convenience: `optimize::minimize_fc` on a prebuilt pair.
pub fn minimize_fc(pair: &ChannelPair, cfg: &OptimizerConfig) -> Result<OptResult> {
    optimize::frank_wolfe(pair, cfg)
}
