//! Extremization of functions of an input state.
//!
//! `f_c^ρ` is convex in `ρ` and is minimized by Frank–Wolfe with a duality-gap
//! certificate. The suprema (CB, B and H distances) are not concave and use a
//! multistart ascent; their values are lower bounds. The grid oracles are
//! brute-force scans used to validate both at `m = 2, 3`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel_metrics::{ChannelPair, FidelitySubgradient};
use crate::channels::KrausChannel;
use crate::error::{Error, Result};
use crate::numkit::{self, c64, herm_eig, random_density, random_unit_vector, real, ComplexMatrix, ComplexVector};
use crate::state::DensityOperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepRule {
    /// `γ_k = 2/(k+2)`.
    Classic,
    /// Exact minimization of the objective on the Frank–Wolfe segment.
    LineSearch,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub n_starts: usize,
    pub seed: u64,
    /// Points per angular axis of the `m = 2` grid oracle.
    pub grid_resolution: usize,
    pub step: StepRule,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 500,
            n_starts: 16,
            seed: 0,
            grid_resolution: 60,
            step: StepRule::Classic,
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::OutOfRange(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::OutOfRange("max_iter must be at least 1".into()));
        }
        if self.n_starts == 0 {
            return Err(Error::OutOfRange("n_starts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptResult {
    pub value: f64,
    pub witness: DensityOperator,
    pub iterations: usize,
    pub converged: bool,
    /// Frank–Wolfe duality gap: best value minus the best certified lower bound.
    pub gap: Option<f64>,
    /// Best value after each iteration (Frank–Wolfe only).
    pub history: Vec<f64>,
}

/// Generator for task `index` under `seed`; independent of scheduling.
pub fn task_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn minimize_fc(phi: &KrausChannel, psi: &KrausChannel, cfg: &OptimizerConfig) -> Result<OptResult> {
    frank_wolfe(&ChannelPair::new(phi, psi)?, cfg)
}

/// Share of `max_iter` spent in the Frank–Wolfe phase of [`frank_wolfe`].
const FW_SHARE: usize = 5;

/// Best iterate and best certified lower bound seen so far.
struct Certificate<'a> {
    pair: &'a ChannelPair,
    best_value: f64,
    best: DensityOperator,
    lower: f64,
    history: Vec<f64>,
}

/// Candidates within this much of the incumbent are re-evaluated with the
/// canonical evaluator before comparison.
const RECHECK_MARGIN: f64 = 1e-9;

impl Certificate<'_> {
    fn observe(&mut self, rho: &DensityOperator, sub: &FidelitySubgradient, lambda_min: f64) -> Result<()> {
        self.offer(rho, sub.value, lambda_min / sub.w_norm.max(1.0))
    }

    /// The stored best value is always `pair.fidelity_at(best)`, so the
    /// witness reproduces it exactly.
    fn offer(&mut self, rho: &DensityOperator, estimate: f64, bound: f64) -> Result<()> {
        self.lower = self.lower.max(bound);
        if estimate < self.best_value + RECHECK_MARGIN {
            let value = self.pair.fidelity_at(rho)?;
            if value < self.best_value {
                self.best_value = value;
                self.best = rho.clone();
            }
        }
        Ok(())
    }

    fn gap(&self) -> f64 {
        self.best_value - self.lower
    }
}

/// Minimizes `ρ ↦ f_c^ρ` starting from `I/m`.
///
/// Every subgradient `G` yields the global bound `f_c^σ >= λ_min(G)` (after
/// rescaling the polar factor to a contraction), and `f_c >= 0`, so the
/// reported gap `min g(ρ_k) - max bound_k` bounds the distance of the returned
/// value from the true infimum. The first `max_iter / 5` iterations are
/// Frank–Wolfe steps. The rest polish the best iterate by L-BFGS over the
/// factorization `ρ = GG†/tr(GG†)`, which converges much faster than
/// Frank–Wolfe once the minimizer lies inside a face of the state space.
pub fn frank_wolfe(pair: &ChannelPair, cfg: &OptimizerConfig) -> Result<OptResult> {
    cfg.validate()?;
    let m = pair.dim_in();
    let mut rho = DensityOperator::maximally_mixed(m);
    let mut cert = Certificate {
        pair,
        best_value: f64::INFINITY,
        best: rho.clone(),
        lower: 0.0,
        history: Vec::with_capacity(cfg.max_iter),
    };
    let fw_budget = (cfg.max_iter / FW_SHARE).max(1);
    let mut iterations = 0;

    for k in 0..fw_budget {
        iterations += 1;
        let sub = pair.fidelity_subgradient(&rho)?;
        let eig = herm_eig(&sub.gradient)?;
        cert.observe(&rho, &sub, *eig.eigenvalues.last().expect("nonempty spectrum"))?;
        cert.history.push(cert.best_value);
        if cert.gap() <= cfg.tol {
            break;
        }
        let vertex = DensityOperator::pure(&eig.eigenvector(m - 1))?;
        let gamma = match cfg.step {
            StepRule::Classic => 2.0 / (k as f64 + 2.0),
            StepRule::LineSearch => segment_argmin(|t| pair.fidelity_at(&rho.mix(&vertex, t)))?,
        };
        rho = rho.mix(&vertex, gamma);
    }

    if cert.gap() > cfg.tol && iterations < cfg.max_iter {
        iterations += polish(pair, &mut cert, cfg.max_iter - iterations, cfg.tol)?;
    }
    if cert.gap() > cfg.tol {
        let bound = dual_refine(pair, &cert.best, cert.best_value)?;
        cert.lower = cert.lower.max(bound);
    }

    let gap = cert.gap();
    Ok(OptResult {
        value: cert.best_value,
        witness: cert.best,
        iterations,
        converged: gap <= cfg.tol,
        gap: Some(gap),
        history: cert.history,
    })
}

/// Relative thresholds separating the near-kernel singular directions of `M(ρ)`.
const KERNEL_SPLITS: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

const DUAL_SWEEPS: usize = 200;

/// Lower bound on `inf_σ f_c^σ` from a contraction built at the near-optimal `ρ`.
///
/// Where `f_c^ρ` has a kink, some singular values of `M(ρ)` vanish at the
/// minimizer and the polar factor is not the certifying subgradient. With
/// `M = U Σ V†` split into large (`L`) and near-kernel (`S`) directions, the
/// contraction `W = U_L V_L† + U_S Z V_S†` is sought with `G(W) = target · I`
/// by alternating projections between that affine constraint on `Z` and the
/// unit ball of the operator norm. The bound `λ_min(G(W)) / max(1, ‖W‖)` is
/// valid whatever `Z` the iteration ends with.
fn dual_refine(pair: &ChannelPair, rho: &DensityOperator, target: f64) -> Result<f64> {
    let m = pair.dim_in();
    let mmat = pair.fidelity_matrix(rho)?;
    let svd = mmat.svd(true, true);
    let u = svd.u.expect("requested");
    let v = svd.v_t.expect("requested").adjoint();
    let sigma = svd.singular_values;
    let top = sigma.iter().cloned().fold(0.0, f64::max);
    let herm_vec = |h: &ComplexMatrix| -> Vec<f64> { h.iter().flat_map(|z| [z.re, z.im]).collect() };
    let mut best = 0.0_f64;
    for split in KERNEL_SPLITS {
        let large: Vec<usize> = (0..sigma.len()).filter(|&i| sigma[i] > split * top).collect();
        let small: Vec<usize> = (0..sigma.len()).filter(|&i| sigma[i] <= split * top).collect();
        if small.is_empty() {
            continue;
        }
        let mut w_large = ComplexMatrix::zeros(u.nrows(), u.nrows());
        for &i in &large {
            w_large += u.column(i) * v.column(i).adjoint();
        }
        let us = ComplexMatrix::from_fn(u.nrows(), small.len(), |r, c| u[(r, small[c])]);
        let vs = ComplexMatrix::from_fn(v.nrows(), small.len(), |r, c| v[(r, small[c])]);
        let k = small.len();
        let g_large = pair.dual_gradient(&w_large)?;
        let rhs = herm_vec(&(numkit::identity(m) * real(target) - &g_large));

        let mut columns = Vec::with_capacity(2 * k * k);
        for a in 0..k {
            for b in 0..k {
                for unit in [real(1.0), c64(0.0, 1.0)] {
                    let e = us.column(a) * vs.column(b).adjoint() * unit;
                    columns.push(herm_vec(&pair.dual_gradient(&e)?));
                }
            }
        }
        let rows = rhs.len();
        let lmap = nalgebra::DMatrix::<f64>::from_fn(rows, columns.len(), |r, c| columns[c][r]);
        let pinv = lmap
            .clone()
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::Unsupported(e.to_string()))?;
        let target_vec = nalgebra::DVector::from_vec(rhs);
        let to_matrix = |z: &nalgebra::DVector<f64>| {
            ComplexMatrix::from_fn(k, k, |a, b| c64(z[2 * (a * k + b)], z[2 * (a * k + b) + 1]))
        };
        let to_vector = |zm: &ComplexMatrix| {
            nalgebra::DVector::from_fn(2 * k * k, |i, _| {
                let (a, b) = ((i / 2) / k, (i / 2) % k);
                if i % 2 == 0 { zm[(a, b)].re } else { zm[(a, b)].im }
            })
        };
        let mut z = &pinv * &target_vec;
        let mut clipped = clip_contraction(&to_matrix(&z));
        for _ in 0..DUAL_SWEEPS {
            let zc = to_vector(&clipped);
            let residual = &target_vec - &lmap * &zc;
            if residual.norm() < 1e-14 {
                break;
            }
            z = zc + &pinv * residual;
            clipped = clip_contraction(&to_matrix(&z));
        }
        let w = w_large + &us * clipped * vs.adjoint();
        let g = pair.dual_gradient(&w)?;
        let lambda_min = *herm_eig(&g)?.eigenvalues.last().expect("nonempty spectrum");
        best = best.max(lambda_min / numkit::op_norm(&w).max(1.0));
    }
    Ok(best)
}

/// Nearest matrix in the unit ball of the operator norm.
fn clip_contraction(z: &ComplexMatrix) -> ComplexMatrix {
    let svd = z.clone().svd(true, true);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let mut scaled = u.clone();
    for (j, s) in svd.singular_values.iter().enumerate() {
        let f = real(s.min(1.0));
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= f;
        }
    }
    scaled * vt
}

/// Weight of `I/m` mixed into the polish start so that its factor has full rank.
const POLISH_MIX: f64 = 1e-3;

const LBFGS_MEMORY: usize = 8;

/// Smoothing levels of the polish, ending with the exact objective.
const SMOOTHING: [f64; 4] = [1e-3, 1e-5, 1e-7, 0.0];

/// Polishes the best iterate by L-BFGS on `x = vec(G)`, `ρ = GG†/t`,
/// `t = tr(GG†)`, over a continuation of smoothed objectives
/// `tr √(M†M + μ²)`. The gradient with respect to `G` is
/// `2(∇ - tr(∇ρ) I) G / t`. Each smoothed gradient comes from a contraction,
/// so every evaluation also yields a lower bound. Returns the iterations used.
fn polish(pair: &ChannelPair, cert: &mut Certificate, budget: usize, tol: f64) -> Result<usize> {
    let m = pair.dim_in();
    let start = cert.best.mix(&DensityOperator::maximally_mixed(m), POLISH_MIX);
    let mut x = factor_params(&numkit::psd_sqrt(start.matrix())?);
    let mut used = 0;
    for (stage, &mu) in SMOOTHING.iter().enumerate() {
        let share = (budget - used) / (SMOOTHING.len() - stage);
        if share == 0 || cert.gap() <= tol {
            continue;
        }
        let eval = |x: &[f64], cert: &mut Certificate| -> Result<(f64, Vec<f64>)> {
            let g = ComplexMatrix::from_iterator(m, m, x.chunks(2).map(|p| c64(p[0], p[1])));
            let t = (&g * g.adjoint()).trace().re;
            let rho = mixed_from_params(x, m)?;
            let (objective, gradient) = if mu > 0.0 {
                let sm = pair.smoothed_fidelity(&rho, mu)?;
                let lambda_min = *herm_eig(&sm.gradient)?.eigenvalues.last().expect("nonempty");
                cert.offer(&rho, sm.value, lambda_min / sm.w_norm.max(1.0))?;
                (sm.smoothed, sm.gradient)
            } else {
                let sub = pair.fidelity_subgradient(&rho)?;
                let lambda_min = *herm_eig(&sub.gradient)?.eigenvalues.last().expect("nonempty");
                cert.offer(&rho, sub.value, lambda_min / sub.w_norm.max(1.0))?;
                (sub.value, sub.gradient)
            };
            let along = (&gradient * rho.matrix()).trace().re;
            let shifted = gradient - numkit::identity(m) * real(along);
            Ok((objective, factor_params(&((shifted * &g) * real(2.0 / t)))))
        };
        let (xn, n) = lbfgs(&mut x, eval, cert, share, tol)?;
        x = xn;
        used += n;
    }
    Ok(used)
}

/// Minimizes with L-BFGS and Armijo backtracking until the certificate closes,
/// the line search fails or `budget` iterations are spent.
fn lbfgs<E>(x0: &mut [f64], mut eval: E, cert: &mut Certificate, budget: usize, tol: f64) -> Result<(Vec<f64>, usize)>
where
    E: FnMut(&[f64], &mut Certificate) -> Result<(f64, Vec<f64>)>,
{
    let mut x = x0.to_vec();
    let (mut fx, mut gx) = eval(&x, cert)?;
    let mut memory: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    let mut used = 0;
    while used < budget {
        used += 1;
        cert.history.push(cert.best_value);
        if cert.gap() <= tol {
            break;
        }
        let mut d = lbfgs_direction(&gx, &memory);
        let mut slope = dot(&gx, &d);
        if slope >= 0.0 {
            memory.clear();
            d = gx.iter().map(|v| -v).collect();
            slope = dot(&gx, &d);
        }
        if slope.abs() < 1e-300 {
            break;
        }
        let mut step = if memory.is_empty() {
            1e-2 / norm(&d).max(1e-12)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let (ft, gt) = eval(&trial, cert)?;
            if ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&gx).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if memory.len() == LBFGS_MEMORY {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        fx = fnew;
        gx = gnew;
    }
    Ok((x, used))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Two-loop recursion: `-H g` for the inverse-Hessian estimate `H`.
fn lbfgs_direction(g: &[f64], memory: &std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let scale = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= scale;
        }
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

/// Golden-section minimizer of a convex function on `[0, 1]`.
fn segment_argmin<F: Fn(f64) -> Result<f64>>(f: F) -> Result<f64> {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, 1.0);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while b - a > 1e-10 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = f(x2)?;
        }
    }
    let mid = 0.5 * (a + b);
    // endpoints are not sampled by the interior bracket
    let mut best = (f(mid)?, mid);
    for t in [0.0, 1.0] {
        let v = f(t)?;
        if v < best.0 {
            best = (v, t);
        }
    }
    Ok(best.1)
}

/// Outcome of one local ascent.
#[derive(Clone, Debug)]
struct Ascent {
    value: f64,
    witness: DensityOperator,
    iterations: usize,
    converged: bool,
}

/// Finite-difference step for the ascent gradients.
const FD_STEP: f64 = 1e-6;

/// Gradient ascent over real parameters `x` of a state map `x ↦ ρ(x)`, with
/// central finite differences and a backtracking step. Stops when the step
/// collapses, the gradient vanishes or the gain per step is at roundoff level.
fn ascend<P, F>(x0: Vec<f64>, to_state: P, objective: &F, max_iter: usize) -> Result<Ascent>
where
    P: Fn(&[f64]) -> Result<DensityOperator>,
    F: Fn(&DensityOperator) -> Result<f64>,
{
    let eval = |x: &[f64]| -> Result<f64> { objective(&to_state(x)?) };
    let mut x = x0;
    let mut fx = eval(&x)?;
    let mut alpha = 0.1;
    let mut converged = false;
    let mut iterations = 0;
    let mut probe = x.clone();
    for it in 0..max_iter {
        iterations = it + 1;
        let mut grad = vec![0.0; x.len()];
        for i in 0..x.len() {
            probe.copy_from_slice(&x);
            probe[i] = x[i] + FD_STEP;
            let up = eval(&probe)?;
            probe[i] = x[i] - FD_STEP;
            let down = eval(&probe)?;
            grad[i] = (up - down) / (2.0 * FD_STEP);
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < 1e-10 {
            converged = true;
            break;
        }
        let mut accepted = None;
        while alpha * gnorm > 1e-14 {
            for i in 0..x.len() {
                probe[i] = x[i] + alpha * grad[i];
            }
            let fp = eval(&probe)?;
            if fp > fx + 1e-4 * alpha * gnorm * gnorm {
                accepted = Some(fp);
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some(fp) => {
                let gain = fp - fx;
                x.copy_from_slice(&probe);
                fx = fp;
                alpha *= 2.0;
                if gain <= 1e-13 * fx.abs().max(1.0) {
                    converged = true;
                    break;
                }
            }
            None => {
                converged = true;
                break;
            }
        }
    }
    Ok(Ascent {
        value: fx,
        witness: to_state(&x)?,
        iterations,
        converged,
    })
}

fn vector_params(v: &ComplexVector) -> Vec<f64> {
    v.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn pure_from_params(x: &[f64]) -> Result<DensityOperator> {
    let v = ComplexVector::from_iterator(x.len() / 2, x.chunks(2).map(|p| c64(p[0], p[1])));
    DensityOperator::pure(&v)
}

fn factor_params(g: &ComplexMatrix) -> Vec<f64> {
    g.iter().flat_map(|z| [z.re, z.im]).collect()
}

/// `ρ = G G† / tr(G G†)`.
fn mixed_from_params(x: &[f64], m: usize) -> Result<DensityOperator> {
    let g = ComplexMatrix::from_iterator(m, m, x.chunks(2).map(|p| c64(p[0], p[1])));
    let p = &g * g.adjoint();
    let tr = p.trace().re;
    if !(tr > 0.0 && tr.is_finite()) {
        return Err(Error::OutOfRange("degenerate state factor".into()));
    }
    Ok(DensityOperator::from_trusted(p / real(tr)))
}

/// Best point on the segment `[a, b]`: a uniform scan followed by a
/// golden-section refinement around the best scan point.
fn segment_max<F>(a: &DensityOperator, b: &DensityOperator, objective: &F) -> Result<(f64, DensityOperator)>
where
    F: Fn(&DensityOperator) -> Result<f64>,
{
    const SCAN: usize = 20;
    let at = |t: f64| objective(&a.mix(b, t));
    let mut best_t = 0.0;
    let mut best_v = at(0.0)?;
    for i in 1..=SCAN {
        let t = i as f64 / SCAN as f64;
        let v = at(t)?;
        if v > best_v {
            best_v = v;
            best_t = t;
        }
    }
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let step = 1.0 / SCAN as f64;
    let (mut lo, mut hi) = ((best_t - step).max(0.0), (best_t + step).min(1.0));
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (at(x1)?, at(x2)?);
    while hi - lo > 1e-9 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = at(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = at(x2)?;
        }
    }
    for (t, v) in [(x1, f1), (x2, f2)] {
        if v > best_v {
            best_v = v;
            best_t = t;
        }
    }
    Ok((best_v, a.mix(b, best_t)))
}

/// Multistart maximization of `objective` over `m`-dimensional states.
///
/// Pure-state ascents start from the basis states and `cfg.n_starts` Haar
/// random vectors. The best pure point is then refined by line searches toward
/// `I/m` and toward the other local maxima, followed by an ascent over mixed
/// states `GG†/tr(GG†)` from the refined point and from `I/m`. The returned
/// value is the largest value evaluated, a lower bound on the supremum.
pub fn maximize_over_states<F>(objective: F, m: usize, cfg: &OptimizerConfig) -> Result<OptResult>
where
    F: Fn(&DensityOperator) -> Result<f64> + Sync,
{
    cfg.validate()?;
    if m == 0 {
        return Err(Error::OutOfRange("dimension must be positive".into()));
    }
    let starts: Vec<ComplexVector> = (0..m)
        .map(|i| {
            let mut v = ComplexVector::zeros(m);
            v[i] = real(1.0);
            v
        })
        .chain((0..cfg.n_starts).map(|s| random_unit_vector(m, &mut task_rng(cfg.seed, s as u64))))
        .collect();

    let runs: Vec<Ascent> = starts
        .par_iter()
        .map(|v| ascend(vector_params(v), pure_from_params, &objective, cfg.max_iter))
        .collect::<Result<_>>()?;

    let mut winner = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.value > runs[winner].value {
            winner = i;
        }
    }
    let mut best = runs[winner].clone();

    let mixed = DensityOperator::maximally_mixed(m);
    let mut targets = vec![mixed.clone()];
    targets.extend(
        runs.iter()
            .enumerate()
            .filter(|(i, _)| *i != winner)
            .map(|(_, r)| r.witness.clone()),
    );
    let anchor = best.witness.clone();
    for target in &targets {
        let (v, w) = segment_max(&anchor, target, &objective)?;
        if v > best.value {
            best.value = v;
            best.witness = w;
        }
    }

    let refined = best.witness.clone();
    let mixed_starts = [refined, mixed];
    let mixed_runs: Vec<Ascent> = mixed_starts
        .par_iter()
        .map(|rho| {
            let g = numkit::psd_sqrt(rho.matrix())?;
            ascend(factor_params(&g), |x| mixed_from_params(x, m), &objective, cfg.max_iter)
        })
        .collect::<Result<_>>()?;
    for r in mixed_runs {
        if r.value > best.value {
            best = Ascent {
                iterations: best.iterations + r.iterations,
                ..r
            };
        }
    }

    Ok(OptResult {
        value: best.value,
        witness: best.witness,
        iterations: best.iterations,
        converged: best.converged,
        gap: None,
        history: Vec::new(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Min,
    Max,
}

impl Mode {
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Mode::Min => a < b,
            Mode::Max => a > b,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridResult {
    pub value: f64,
    pub witness: DensityOperator,
    /// Largest change of the objective between the extremal grid point and its
    /// grid neighbours; the oracle value is trustworthy to about this much.
    pub resolution: f64,
    pub evaluations: usize,
}

/// Radii of the `m = 2` Bloch grid.
pub const BLOCH_RADII: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Random mixed samples of the `m = 3` oracle.
pub const QUTRIT_SAMPLES: usize = 10_000;

/// Seed of the `m = 3` oracle samples.
const QUTRIT_SEED: u64 = 0x5EED_0003;

/// Nearest samples used for the `m = 3` resolution estimate.
const QUTRIT_NEIGHBOURS: usize = 10;

pub fn bloch_state(r: f64, theta: f64, phi: f64) -> DensityOperator {
    let (x, y, z) = (
        r * theta.sin() * phi.cos(),
        r * theta.sin() * phi.sin(),
        r * theta.cos(),
    );
    DensityOperator::from_trusted(ComplexMatrix::from_row_slice(
        2,
        2,
        &[
            real(0.5 * (1.0 + z)),
            c64(0.5 * x, -0.5 * y),
            c64(0.5 * x, 0.5 * y),
            real(0.5 * (1.0 - z)),
        ],
    ))
}

/// Brute-force extremum of `objective` over a fixed grid of states.
///
/// `m = 2`: Bloch vectors with polar angle `πi/res` (`i = 0..=res`), azimuth
/// `2πj/res` (`j < res`) and radius in [`BLOCH_RADII`]. `m = 3`: seeded random
/// states of every rank plus basis states and the two-level superpositions
/// `(|i⟩ + e^{iφ}|j⟩)/√2` with `φ` on a grid of `res` phases.
pub fn grid_oracle<F>(objective: F, m: usize, mode: Mode, resolution: usize) -> Result<GridResult>
where
    F: Fn(&DensityOperator) -> Result<f64> + Sync,
{
    if resolution < 2 {
        return Err(Error::OutOfRange("grid resolution must be at least 2".into()));
    }
    match m {
        2 => bloch_grid(&objective, mode, resolution),
        3 => qutrit_grid(&objective, mode, resolution),
        _ => Err(Error::Unsupported(format!("grid oracle for dimension {m}"))),
    }
}

fn bloch_grid<F>(objective: &F, mode: Mode, res: usize) -> Result<GridResult>
where
    F: Fn(&DensityOperator) -> Result<f64> + Sync,
{
    let nt = res + 1;
    let np = res;
    let shell = nt * np;
    // index 0 is the centre; shell s (radius BLOCH_RADII[s + 1]) follows
    let total = 1 + (BLOCH_RADII.len() - 1) * shell;
    let coords = |idx: usize| -> (usize, usize, usize) {
        let k = idx - 1;
        (k / shell, (k % shell) / np, k % np)
    };
    let state = |idx: usize| -> DensityOperator {
        if idx == 0 {
            return DensityOperator::maximally_mixed(2);
        }
        let (s, i, j) = coords(idx);
        let theta = std::f64::consts::PI * i as f64 / res as f64;
        let phi = 2.0 * std::f64::consts::PI * j as f64 / res as f64;
        bloch_state(BLOCH_RADII[s + 1], theta, phi)
    };
    let values: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|idx| objective(&state(idx)))
        .collect::<Result<_>>()?;
    let arg = extremum(&values, mode);

    let index = |s: usize, i: usize, j: usize| 1 + s * shell + i * np + j;
    let neighbours: Vec<usize> = if arg == 0 {
        (0..shell).map(|k| 1 + k).collect()
    } else {
        let (s, i, j) = coords(arg);
        let mut out = Vec::new();
        if s == 0 {
            out.push(0);
        }
        for ds in [-1i64, 0, 1] {
            let s2 = s as i64 + ds;
            if s2 < 0 || s2 as usize >= BLOCH_RADII.len() - 1 {
                continue;
            }
            for di in [-1i64, 0, 1] {
                let i2 = i as i64 + di;
                if i2 < 0 || i2 as usize >= nt {
                    continue;
                }
                for dj in [-1i64, 0, 1] {
                    let j2 = (j as i64 + dj).rem_euclid(np as i64) as usize;
                    out.push(index(s2 as usize, i2 as usize, j2));
                }
            }
        }
        out
    };
    let resolution = neighbours
        .iter()
        .map(|&k| (values[k] - values[arg]).abs())
        .fold(0.0, f64::max);
    Ok(GridResult {
        value: values[arg],
        witness: state(arg),
        resolution,
        evaluations: total,
    })
}

fn qutrit_grid<F>(objective: &F, mode: Mode, res: usize) -> Result<GridResult>
where
    F: Fn(&DensityOperator) -> Result<f64> + Sync,
{
    let m = 3;
    let mut states: Vec<DensityOperator> = (0..m).map(|i| DensityOperator::basis(m, i)).collect();
    for i in 0..m {
        for j in (i + 1)..m {
            for k in 0..res {
                let phase = 2.0 * std::f64::consts::PI * k as f64 / res as f64;
                let mut v = ComplexVector::zeros(m);
                v[i] = real(1.0);
                v[j] = c64(phase.cos(), phase.sin());
                states.push(DensityOperator::pure(&v)?);
            }
        }
    }
    let sampled: Vec<DensityOperator> = (0..QUTRIT_SAMPLES)
        .into_par_iter()
        .map(|s| {
            let mut rng = task_rng(QUTRIT_SEED, s as u64);
            random_density(m, 1 + s % m, &mut rng)
        })
        .collect::<Result<_>>()?;
    states.extend(sampled);

    let values: Vec<f64> = states
        .par_iter()
        .map(objective)
        .collect::<Result<_>>()?;
    let arg = extremum(&values, mode);

    let centre = states[arg].matrix();
    let mut by_distance: Vec<(f64, usize)> = states
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != arg)
        .map(|(k, s)| ((s.matrix() - centre).norm(), k))
        .collect();
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let resolution = by_distance
        .iter()
        .take(QUTRIT_NEIGHBOURS)
        .map(|&(_, k)| (values[k] - values[arg]).abs())
        .fold(0.0, f64::max);
    Ok(GridResult {
        value: values[arg],
        witness: states[arg].clone(),
        resolution,
        evaluations: states.len(),
    })
}

fn extremum(values: &[f64], mode: Mode) -> usize {
    let mut arg = 0;
    for (k, &v) in values.iter().enumerate() {
        if mode.better(v, values[arg]) {
            arg = k;
        }
    }
    arg
}

#[derive(Clone, Debug, PartialEq)]
pub struct WitnessDiagnostics {
    /// `|value - objective(witness)|`.
    pub discrepancy: f64,
    /// Witness eigenvalues, descending.
    pub spectrum: Vec<f64>,
    pub purity: f64,
}

pub fn witness_report<F>(result: &OptResult, objective: F) -> Result<WitnessDiagnostics>
where
    F: Fn(&DensityOperator) -> Result<f64>,
{
    let again = objective(&result.witness)?;
    Ok(WitnessDiagnostics {
        discrepancy: (result.value - again).abs(),
        spectrum: result.witness.eigenvalues(),
        purity: result.witness.purity(),
    })
}
