//! Lanczos iteration with a skewed randomized start for the leftmost
//! eigenpair of the homogenized matrix.
//!
//! The start vector is a Gaussian draw whose last coordinate is amplified by
//! a large weight `psi`, which keeps the Ritz value below `-delta` and the
//! last residual entry small. Every step fully reorthogonalizes (twice)
//! against the stored basis. When the Krylov space becomes invariant before
//! it spans `R^{n+1}` the iteration continues from a fresh random vector
//! orthogonal to the basis, so eigenvectors invisible from the start vector
//! are still found.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::homogeneous::{canonicalize_sign, HomogeneousSystem, SolveMode, SubproblemSolution};
use crate::linalg::{gaussian_vector, SymmetricOperator};
use crate::tridiag;

/// Default Ritz residual tolerance.
pub const DEFAULT_RITZ_TOL: f64 = 1e-6;

/// Skewed random start vector in `R^{n+1}`.
#[derive(Debug, Clone)]
pub struct SkewedStart {
    pub q1: DVector<f64>,
    pub psi: f64,
    /// `|last entry of q1|`.
    pub alpha: f64,
    /// Raw Gaussian draws before weighting.
    pub draws: DVector<f64>,
}

impl SkewedStart {
    pub fn last_entry(&self) -> f64 {
        self.q1[self.q1.len() - 1]
    }

    /// `1 - alpha^2` evaluated from the draws, without cancellation when
    /// `alpha` rounds to one.
    pub fn alpha_complement(&self) -> f64 {
        let n = self.draws.len() - 1;
        let head = self.draws.rows(0, n).norm_squared();
        let tail = (self.psi * self.draws[n]).powi(2);
        head / (head + tail)
    }

    /// `u`: the normalized first `n` entries of `q1`.
    pub fn leading_direction(&self) -> DVector<f64> {
        let n = self.q1.len() - 1;
        let u = self.q1.rows(0, n).into_owned();
        let nu = u.norm();
        if nu > 0.0 {
            u / nu
        } else {
            u
        }
    }

    /// Flips the sign of the last entry so that `q1[n] * g^T u <= 0`.
    pub fn orient(&mut self, g: &DVector<f64>) {
        let n = self.q1.len() - 1;
        let gu = g.dot(&self.leading_direction());
        if self.q1[n] * gu > 0.0 {
            self.q1[n] = -self.q1[n];
        }
    }

    /// Smallest `alpha` for which `gamma >= delta` is guaranteed once the
    /// orientation condition holds.
    pub fn safeguard_threshold(&self, g: &DVector<f64>, hessian_bound: f64, delta: f64) -> f64 {
        let gu = g.dot(&self.leading_direction());
        let a = hessian_bound + delta;
        let den = (a * a + 4.0 * gu * gu).sqrt();
        if den > 0.0 {
            a / den
        } else {
            1.0
        }
    }
}

/// `psi = 10 sqrt(n) / (p eps^2)`.
pub fn default_psi(n: usize, p: f64, epsilon: f64) -> f64 {
    10.0 * (n.max(1) as f64).sqrt() / (p * epsilon * epsilon)
}

/// `p^3 eps^4 / n`, a lower-bound proxy for the overlap of the start vector
/// with the leftmost eigenvector.
pub fn default_overlap(n: usize, p: f64, epsilon: f64) -> f64 {
    p.powi(3) * epsilon.powi(4) / n.max(1) as f64
}

/// Draws `n + 1` standard normals, scales the last by `psi` and normalizes.
pub fn skewed_initial_vector<R: Rng + ?Sized>(n: usize, psi: f64, rng: &mut R) -> Result<SkewedStart> {
    if !(psi > 0.0 && psi.is_finite()) {
        return Err(Error::Config(format!("psi must be positive and finite, got {psi}")));
    }
    loop {
        let draws = gaussian_vector(n + 1, rng);
        let mut q = draws.clone();
        q[n] *= psi;
        let norm = q.norm();
        if norm > 0.0 && norm.is_finite() {
            q /= norm;
            let alpha = q[n].abs();
            return Ok(SkewedStart {
                q1: q,
                psi,
                alpha,
                draws,
            });
        }
    }
}

pub fn default_norm_iters(dim: usize) -> usize {
    2 * ((dim as f64).log2().ceil().max(0.0) as usize) + 10
}

/// Power iteration on `F^2` from a random start. Returns `2 rho` where `rho`
/// is the largest observed `||F x||` over unit `x`, so that
/// `||F|| in [F_hat / 2, F_hat]` once `rho >= ||F|| / 2`.
pub fn estimate_operator_norm<R: Rng + ?Sized>(op: &dyn SymmetricOperator, iters: usize, rng: &mut R) -> Result<f64> {
    let dim = op.dim();
    let mut x = gaussian_vector(dim, rng);
    let nx = x.norm();
    if nx == 0.0 {
        return Ok(0.0);
    }
    x /= nx;
    let mut rho: f64 = 0.0;
    for _ in 0..iters.max(1) {
        let fx = op.apply(&x)?;
        rho = rho.max(fx.norm());
        let ffx = op.apply(&fx)?;
        let n2 = ffx.norm();
        if !(n2 > 0.0 && n2.is_finite()) {
            break;
        }
        x = ffx / n2;
    }
    Ok(2.0 * rho)
}

/// Iteration budget: the smaller of the gap-free and (when a gap is given)
/// gap-dependent Lanczos bounds, clamped to `[j_min, dim_cap]`.
pub fn iteration_budget(
    norm_est: f64,
    e_k: f64,
    overlap: f64,
    gap: Option<f64>,
    j_min: usize,
    dim_cap: usize,
) -> Result<usize> {
    if !(norm_est > 0.0) || !(e_k > 0.0) || !(overlap > 0.0) {
        return Err(Error::Config(format!(
            "budget inputs must be positive (norm {norm_est}, e_k {e_k}, overlap {overlap})"
        )));
    }
    if let Some(sg) = gap {
        if !(sg > 0.0) {
            return Err(Error::Config(format!("eigengap must be positive, got {sg}")));
        }
    }
    let clamp = |j: usize| j.max(j_min).min(dim_cap).max(1);
    if e_k >= 2.0 * norm_est {
        return Ok(clamp(1));
    }
    let e = std::f64::consts::E;
    let ratio = norm_est / e_k;
    let free = 1.0 + (2.0 * ratio.sqrt() * (16.0 * ratio / overlap).max(e).ln()).ceil();
    let mut best = free;
    if let Some(sg) = gap {
        let dep = 1.0 + ((2.0 * norm_est / sg).sqrt() * (8.0 * ratio / overlap).max(e).ln()).ceil();
        best = best.min(dep);
    }
    let j = if best.is_finite() && best < usize::MAX as f64 {
        best as usize
    } else {
        usize::MAX
    };
    Ok(clamp(j))
}

#[derive(Debug, Clone, Serialize)]
pub struct InexactBudget {
    pub e_k: f64,
    pub j_min: usize,
    pub j_max: usize,
    pub norm_est: f64,
    pub gap: Option<f64>,
}

/// Orthonormal Lanczos basis, tridiagonal coefficients and the current
/// residual vector.
#[derive(Debug, Clone)]
pub struct KrylovState {
    basis: Vec<DVector<f64>>,
    diag: Vec<f64>,
    off: Vec<f64>,
    xi: DVector<f64>,
    /// Residuals dropped at invariant-subspace restarts, with the column
    /// index they belong to.
    dropped: Vec<(usize, DVector<f64>)>,
}

impl KrylovState {
    pub fn j(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.basis)
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    pub fn xi(&self) -> &DVector<f64> {
        &self.xi
    }

    pub fn tridiagonal(&self) -> DMatrix<f64> {
        let j = self.j();
        let mut t = DMatrix::zeros(j, j);
        for i in 0..j {
            t[(i, i)] = self.diag[i];
            if i + 1 < j {
                t[(i, i + 1)] = self.off[i];
                t[(i + 1, i)] = self.off[i];
            }
        }
        t
    }

    /// `max |Q^T Q - I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let q = self.basis();
        let g = q.transpose() * &q - DMatrix::identity(self.j(), self.j());
        g.amax()
    }

    /// `max |Q^T xi|`.
    pub fn residual_orthogonality(&self) -> f64 {
        if self.j() == 0 {
            return 0.0;
        }
        (self.basis().transpose() * &self.xi).amax()
    }

    /// `||F Q - Q T - xi e_j^T - (dropped residuals)||_max`, relative to
    /// `max(1, ||F Q||_max)`.
    pub fn recurrence_error(&self, op: &dyn SymmetricOperator) -> Result<f64> {
        let q = self.basis();
        let j = self.j();
        let mut fq = DMatrix::zeros(q.nrows(), j);
        for (i, col) in self.basis.iter().enumerate() {
            fq.set_column(i, &op.apply(col)?);
        }
        let mut e = &fq - &q * self.tridiagonal();
        if j > 0 {
            let mut c = e.column_mut(j - 1);
            c -= &self.xi;
        }
        for (idx, r) in &self.dropped {
            let mut c = e.column_mut(*idx);
            c -= r;
        }
        Ok(e.amax() / fq.amax().max(1.0))
    }
}

/// Result of a Lanczos run with its diagnostics.
#[derive(Debug, Clone)]
pub struct LanczosOutput {
    pub solution: SubproblemSolution,
    pub state: KrylovState,
    /// Leftmost Ritz value of `T_j` after every step.
    pub ritz_history: Vec<f64>,
    /// `q_j^T e_{n+1}` for every basis vector.
    pub last_entries: Vec<f64>,
    pub restarts: usize,
    /// Residual tolerance met (or the space was exhausted).
    pub converged: bool,
}

fn orthogonalize(w: &mut DVector<f64>, basis: &[DVector<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = q.dot(w);
            w.axpy(-c, q, 1.0);
        }
    }
}

/// Stopping and restart controls for [`lanczos_leftmost`].
#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub max_iter: usize,
    pub j_min: usize,
    pub ritz_tol: f64,
    /// Continue from a random orthogonal vector when the Krylov space
    /// becomes invariant instead of stopping there.
    pub restart_on_invariant: bool,
}

impl LanczosOptions {
    pub fn new(max_iter: usize, ritz_tol: f64) -> Self {
        LanczosOptions {
            max_iter,
            j_min: 0,
            ritz_tol,
            restart_on_invariant: false,
        }
    }
}

/// Lanczos for the leftmost eigenpair of a symmetric operator.
///
/// Stops when the Ritz residual `||F y - lambda y||` is at most `ritz_tol`
/// (after at least `j_min` steps), when the basis spans the whole space, or
/// after `max_iter` steps (flagged `budget_exhausted`). The returned
/// solution splits `y` as `[v; t]` and reports `dual = -lambda` and the
/// residual `F y + dual y`.
pub fn lanczos_leftmost<R: Rng + ?Sized>(
    op: &dyn SymmetricOperator,
    q1: &DVector<f64>,
    opts: &LanczosOptions,
    rng: &mut R,
) -> Result<LanczosOutput> {
    let LanczosOptions {
        max_iter,
        j_min,
        ritz_tol,
        restart_on_invariant,
    } = *opts;
    let dim = op.dim();
    if q1.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: q1.len(),
        });
    }
    if !(ritz_tol > 0.0) {
        return Err(Error::Config(format!("ritz_tol must be positive, got {ritz_tol}")));
    }
    let nq = q1.norm();
    if !(nq > 0.0 && nq.is_finite()) {
        return Err(Error::Config("start vector must be nonzero and finite".into()));
    }
    let max_iter = max_iter.clamp(1, dim);

    let mut basis: Vec<DVector<f64>> = vec![q1 / nq];
    let mut diag: Vec<f64> = Vec::new();
    let mut off: Vec<f64> = Vec::new();
    let mut dropped: Vec<(usize, DVector<f64>)> = Vec::new();
    let mut block_start = 0usize;
    let mut ritz_history = Vec::new();
    let mut restarts = 0usize;
    let mut scale: f64 = 0.0;

    loop {
        let j = basis.len();
        let qj = &basis[j - 1];
        let mut w = op.apply(qj)?;
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("operator produced non-finite values".into()));
        }
        scale = scale.max(w.norm());
        let a = qj.dot(&w);
        w.axpy(-a, qj, 1.0);
        if j >= 2 && off.len() == j - 1 {
            w.axpy(-off[j - 2], &basis[j - 2], 1.0);
        }
        orthogonalize(&mut w, &basis);
        diag.push(a);
        let beta = w.norm();

        let (lambda, s) = tridiag::leftmost_eigenpair(&diag, &off);
        ritz_history.push(lambda);

        let complete = j == dim;
        let invariant = beta <= ritz_tol || beta <= 1e-14 * scale.max(f64::MIN_POSITIVE);
        let res_bound = s[j - 1].abs() * beta + dropped.iter().map(|(i, r)| s[*i].abs() * r.norm()).sum::<f64>();
        let current_mass: f64 = s.rows(block_start, j - block_start).norm_squared();
        let trust_block = restarts == 0 || current_mass >= 0.5;
        let converged = res_bound <= ritz_tol && trust_block && j >= j_min && !(invariant && restart_on_invariant);

        if complete || converged || j >= max_iter {
            let exhausted = !(complete || converged);
            let state = KrylovState {
                basis,
                diag,
                off,
                xi: w,
                dropped,
            };
            return Ok(finish(state, lambda, s, ritz_history, restarts, !exhausted, exhausted));
        }

        if invariant && (restart_on_invariant || beta == 0.0) {
            dropped.push((j - 1, w));
            let mut fresh = None;
            for _ in 0..8 {
                let mut r = gaussian_vector(dim, rng);
                orthogonalize(&mut r, &basis);
                let nr = r.norm();
                if nr > 1e-8 {
                    fresh = Some(r / nr);
                    break;
                }
            }
            let Some(q) = fresh else {
                return Err(Error::Numerical("could not extend the Krylov basis".into()));
            };
            off.push(0.0);
            basis.push(q);
            block_start = j;
            restarts += 1;
        } else {
            off.push(beta);
            basis.push(w / beta);
        }
    }
}

fn finish(
    state: KrylovState,
    lambda: f64,
    s: DVector<f64>,
    ritz_history: Vec<f64>,
    restarts: usize,
    converged: bool,
    budget_exhausted: bool,
) -> LanczosOutput {
    let j = state.j();
    let dim = state.basis[0].len();
    let mut y = DVector::zeros(dim);
    for (i, q) in state.basis.iter().enumerate() {
        y.axpy(s[i], q, 1.0);
    }
    let mut residual = &state.xi * s[j - 1];
    for (i, r) in &state.dropped {
        residual.axpy(s[*i], r, 1.0);
    }
    let ny = y.norm();
    y /= ny;
    residual /= ny;
    let raw = y.clone();
    canonicalize_sign(&mut y);
    if raw.dot(&y) < 0.0 {
        residual.neg_mut();
    }
    let n = dim - 1;
    let last_entries = state.basis.iter().map(|q| q[n]).collect();
    let solution = SubproblemSolution {
        v: y.rows(0, n).into_owned(),
        t: y[n],
        dual: -lambda,
        residual,
        mode: SolveMode::Inexact,
        eigengap: None,
        lanczos_iterations: j,
        budget_exhausted,
    };
    LanczosOutput {
        solution,
        state,
        ritz_history,
        last_entries,
        restarts,
        converged,
    }
}

/// Parameters of one inexact subproblem solve.
#[derive(Debug, Clone)]
pub struct InexactParams {
    /// Target Ritz error.
    pub e_k: f64,
    pub j_min: usize,
    /// Failure probability used for the skewing weight and the overlap proxy.
    pub p: f64,
    /// Outer tolerance, used for the skewing weight.
    pub epsilon: f64,
    pub psi: Option<f64>,
    pub overlap: Option<f64>,
    /// Defaults to `min(1e-6, e_k)`.
    pub ritz_tol: Option<f64>,
    /// Known bound on `||H||`, used to cap the operator norm estimate.
    pub hessian_bound: Option<f64>,
    pub norm_iters: Option<usize>,
    pub gap: Option<f64>,
}

impl InexactParams {
    pub fn new(e_k: f64, epsilon: f64) -> Self {
        InexactParams {
            e_k,
            j_min: 0,
            p: 1e-3,
            epsilon,
            psi: None,
            overlap: None,
            ritz_tol: None,
            hessian_bound: None,
            norm_iters: None,
            gap: None,
        }
    }

    pub fn effective_ritz_tol(&self) -> f64 {
        self.ritz_tol.unwrap_or(DEFAULT_RITZ_TOL.min(self.e_k))
    }
}

/// Inexact subproblem solution together with the start vector, budget and
/// Lanczos diagnostics.
#[derive(Debug, Clone)]
pub struct InexactOutcome {
    pub solution: SubproblemSolution,
    pub start: SkewedStart,
    pub budget: InexactBudget,
    pub lanczos: LanczosOutput,
}

/// Skewed start, operator-norm estimate, iteration budget and Lanczos run.
pub fn solve_inexact<R: Rng + ?Sized>(
    system: &HomogeneousSystem,
    params: &InexactParams,
    rng: &mut R,
) -> Result<InexactOutcome> {
    let n = system.n();
    if !(params.e_k > 0.0) {
        return Err(Error::Config(format!("e_k must be positive, got {}", params.e_k)));
    }
    if !(params.p > 0.0 && params.p < 1.0) {
        return Err(Error::Config(format!("p must lie in (0, 1), got {}", params.p)));
    }
    if !(params.epsilon > 0.0) {
        return Err(Error::Config(format!(
            "epsilon must be positive, got {}",
            params.epsilon
        )));
    }
    let psi = params.psi.unwrap_or_else(|| default_psi(n, params.p, params.epsilon));
    let mut start = skewed_initial_vector(n, psi, rng)?;
    start.orient(system.gradient());

    let iters = params.norm_iters.unwrap_or_else(|| default_norm_iters(n + 1));
    let mut norm_est = estimate_operator_norm(system, iters, rng)?;
    if let Some(uh) = params.hessian_bound {
        let bound = uh.max(system.delta()) + system.gradient().norm();
        norm_est = norm_est.min(bound.max(norm_est / 2.0));
    }
    let norm_est = norm_est.max(f64::MIN_POSITIVE);
    let overlap = params
        .overlap
        .unwrap_or_else(|| default_overlap(n, params.p, params.epsilon))
        .max(f64::MIN_POSITIVE);
    let j_max = iteration_budget(norm_est, params.e_k, overlap, params.gap, params.j_min, n + 2)?;
    let budget = InexactBudget {
        e_k: params.e_k,
        j_min: params.j_min,
        j_max,
        norm_est,
        gap: params.gap,
    };
    let opts = LanczosOptions {
        max_iter: j_max,
        j_min: params.j_min,
        ritz_tol: params.effective_ritz_tol(),
        restart_on_invariant: true,
    };
    let lanczos = lanczos_leftmost(system, &start.q1, &opts, rng)?;
    Ok(InexactOutcome {
        solution: lanczos.solution.clone(),
        start,
        budget,
        lanczos,
    })
}

/// Lanczos estimate of `lambda_min` of a symmetric operator from a random
/// start, run to the residual tolerance `tol` or the full dimension.
pub fn leftmost_eigenvalue<R: Rng + ?Sized>(op: &dyn SymmetricOperator, tol: f64, rng: &mut R) -> Result<f64> {
    let dim = op.dim();
    let q1 = gaussian_vector(dim, rng);
    let opts = LanczosOptions {
        restart_on_invariant: true,
        ..LanczosOptions::new(dim, tol)
    };
    let out = lanczos_leftmost(op, &q1, &opts, rng)?;
    Ok(-out.solution.dual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homogeneous::{homogenize, solve_exact, HessianOp};
    use nalgebra::dvector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        (&a + a.transpose()) * 0.5
    }

    #[test]
    fn exact_eigenvector_start_converges_in_one_step() {
        let f = DMatrix::from_diagonal(&dvector![3.0, -2.0, 1.0, 5.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = lanczos_leftmost(
            &f,
            &dvector![0.0, 1.0, 0.0, 0.0],
            &LanczosOptions::new(4, 1e-10),
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.solution.lanczos_iterations, 1);
        assert!((out.solution.dual - 2.0).abs() < 1e-14);
        assert!(out.solution.residual_norm() < 1e-14);
    }

    #[test]
    fn random_matrix_matches_oracle_and_invariants_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let f = random_sym(30, &mut rng);
            let lam = crate::linalg::min_eigenvalue(&f).unwrap();
            let q1 = gaussian_vector(30, &mut rng);
            let out = lanczos_leftmost(&f, &q1, &LanczosOptions::new(30, 1e-8), &mut rng).unwrap();
            assert!((-out.solution.dual - lam).abs() <= 1e-8);
            assert!(-out.solution.dual >= lam - 1e-12);
            let st = &out.state;
            assert!(st.orthogonality_error() <= 1e-10);
            assert!(st.residual_orthogonality() <= 1e-10);
            assert!(st.recurrence_error(&f).unwrap() <= 1e-8);
            let y = out.solution.stacked();
            let direct = &f * &y + &y * out.solution.dual;
            assert!((direct - &out.solution.residual).norm() <= 1e-10);
            for w in out.ritz_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }

    #[test]
    fn invariant_start_restarts_and_finds_negative_curvature() {
        let h = DMatrix::from_diagonal(&dvector![1.0, -1.0]);
        let sys = homogenize(HessianOp::Dense(h), DVector::zeros(2), 1e-3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = solve_inexact(&sys, &InexactParams::new(1e-3, 1e-6), &mut rng).unwrap();
        assert!((out.solution.dual - 1.0).abs() < 1e-10);
        assert!(out.solution.t.abs() < 1e-8);
        assert!(out.lanczos.restarts >= 1);
    }

    #[test]
    fn skewed_start_matches_oracle_on_small_instance() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -1.0]);
        let sys = homogenize(HessianOp::Dense(h), dvector![1.0, 0.0], 0.1).unwrap();
        let exact = solve_exact(&sys).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = solve_inexact(&sys, &InexactParams::new(1e-6, 1e-6), &mut rng).unwrap();
        assert!((out.solution.dual - exact.dual).abs() <= 1e-6);
        assert!(out.solution.dual <= exact.dual + 1e-12);
    }

    #[test]
    fn large_psi_pins_last_entry() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = skewed_initial_vector(5, 1e12, &mut rng).unwrap();
        assert!((s.alpha - 1.0).abs() < 1e-12);
        assert!((s.q1.norm() - 1.0).abs() < 1e-14);
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(
            skewed_initial_vector(4, 3.0, &mut r1).unwrap().q1,
            skewed_initial_vector(4, 3.0, &mut r2).unwrap().q1
        );
        assert!(skewed_initial_vector(4, 0.0, &mut r1).is_err());
    }

    #[test]
    fn orient_enforces_sign_condition() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = dvector![1.0, -2.0, 0.5];
        for _ in 0..20 {
            let mut s = skewed_initial_vector(3, 2.0, &mut rng).unwrap();
            s.orient(&g);
            assert!(s.last_entry() * g.dot(&s.leading_direction()) <= 0.0);
        }
    }

    #[test]
    fn norm_estimate_brackets() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = DMatrix::from_diagonal(&DVector::from_fn(8, |i, _| if i == 7 { 10.0 } else { 1.0 }));
        for _ in 0..100 {
            let e = estimate_operator_norm(&f, default_norm_iters(8), &mut rng).unwrap();
            assert!((10.0..=20.0 + 1e-12).contains(&e));
        }
        let c = DMatrix::identity(4, 4) * -3.0;
        let e = estimate_operator_norm(&c, 5, &mut rng).unwrap();
        assert!((3.0..=6.0 + 1e-12).contains(&e));
    }

    #[test]
    fn budget_formula() {
        assert_eq!(iteration_budget(1.0, 4.0, 1.0, None, 0, 100).unwrap(), 1);
        let expect = 1.0 + (2.0 * (1e4f64).sqrt() * (16.0 * 1e4 / 1e-4f64).ln()).ceil();
        assert_eq!(
            iteration_budget(10.0, 1e-3, 1e-4, None, 0, 1 << 30).unwrap(),
            expect as usize
        );
        assert_eq!(iteration_budget(10.0, 1e-3, 1e-4, None, 0, 7).unwrap(), 7);
        assert_eq!(iteration_budget(1.0, 4.0, 1.0, None, 5, 100).unwrap(), 5);
        assert!(iteration_budget(0.0, 1.0, 1.0, None, 0, 3).is_err());
    }
}
