//! The homogenized gradient-Hessian matrix `F = [[H, g], [g^T, -delta]]`,
//! its dense leftmost-eigenpair solve, optimality verification and the map
//! from an eigenvector `[v; t]` to a descent direction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sign_pos, sorted_eigen, SymmetricOperator};

/// Largest `n` for which the dense eigensolver may be used.
pub const DEFAULT_DENSE_THRESHOLD: usize = 2000;

/// The Hessian block of `F`, stored densely or applied matrix-free.
pub enum HessianOp<'a> {
    Dense(DMatrix<f64>),
    MatrixFree(&'a dyn SymmetricOperator),
}

impl HessianOp<'_> {
    pub fn dim(&self) -> usize {
        match self {
            HessianOp::Dense(m) => m.nrows(),
            HessianOp::MatrixFree(op) => op.dim(),
        }
    }
}

impl SymmetricOperator for HessianOp<'_> {
    fn dim(&self) -> usize {
        HessianOp::dim(self)
    }
    fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            HessianOp::Dense(m) => Ok(m * x),
            HessianOp::MatrixFree(op) => op.apply(x),
        }
    }
    fn to_dense(&self) -> Result<DMatrix<f64>> {
        match self {
            HessianOp::Dense(m) => Ok(m.clone()),
            HessianOp::MatrixFree(op) => op.to_dense(),
        }
    }
}

/// `F = [[H, g], [g^T, -delta]]` of dimension `n + 1`.
pub struct HomogeneousSystem<'a> {
    hessian: HessianOp<'a>,
    gradient: DVector<f64>,
    delta: f64,
}

/// Builds the homogenized operator. No copy of `H` is made in matrix-free
/// mode.
pub fn homogenize<'a>(hessian: HessianOp<'a>, gradient: DVector<f64>, delta: f64) -> Result<HomogeneousSystem<'a>> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::Config(format!("delta must be finite and >= 0, got {delta}")));
    }
    if gradient.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("gradient has non-finite entries".into()));
    }
    if hessian.dim() != gradient.len() {
        return Err(Error::Dimension {
            expected: hessian.dim(),
            got: gradient.len(),
        });
    }
    Ok(HomogeneousSystem {
        hessian,
        gradient,
        delta,
    })
}

impl<'a> HomogeneousSystem<'a> {
    pub fn n(&self) -> usize {
        self.gradient.len()
    }

    pub fn gradient(&self) -> &DVector<f64> {
        &self.gradient
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn hessian(&self) -> &HessianOp<'a> {
        &self.hessian
    }

    /// Same `H` and `g` with a different corner entry.
    pub fn with_delta(&self, delta: f64) -> Result<HomogeneousSystem<'a>> {
        let hessian = match &self.hessian {
            HessianOp::Dense(m) => HessianOp::Dense(m.clone()),
            HessianOp::MatrixFree(op) => HessianOp::MatrixFree(*op),
        };
        homogenize(hessian, self.gradient.clone(), delta)
    }
}

impl SymmetricOperator for HomogeneousSystem<'_> {
    fn dim(&self) -> usize {
        self.n() + 1
    }

    fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.n();
        if x.len() != n + 1 {
            return Err(Error::Dimension {
                expected: n + 1,
                got: x.len(),
            });
        }
        let v = x.rows(0, n).into_owned();
        let t = x[n];
        let hv = self.hessian.apply(&v)?;
        let mut out = DVector::zeros(n + 1);
        out.rows_mut(0, n).copy_from(&(hv + &self.gradient * t));
        out[n] = self.gradient.dot(&v) - t * self.delta;
        Ok(out)
    }

    fn to_dense(&self) -> Result<DMatrix<f64>> {
        let n = self.n();
        let h = self.hessian.to_dense()?;
        let mut f = DMatrix::zeros(n + 1, n + 1);
        f.view_mut((0, 0), (n, n)).copy_from(&h);
        for i in 0..n {
            f[(i, n)] = self.gradient[i];
            f[(n, i)] = self.gradient[i];
        }
        f[(n, n)] = -self.delta;
        Ok(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    Exact,
    Inexact,
}

/// Leftmost (Ritz) eigenpair of `F` in homogeneous coordinates.
#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub v: DVector<f64>,
    pub t: f64,
    /// `theta = -lambda_min(F)` for exact solves, `gamma = -ritz value` otherwise.
    pub dual: f64,
    /// `F [v; t] + dual [v; t] = [r; sigma]`; zero for exact solves.
    pub residual: DVector<f64>,
    pub mode: SolveMode,
    /// `lambda_2(F) - lambda_min(F)` when known.
    pub eigengap: Option<f64>,
    pub lanczos_iterations: usize,
    pub budget_exhausted: bool,
}

impl SubproblemSolution {
    pub fn n(&self) -> usize {
        self.v.len()
    }

    pub fn stacked(&self) -> DVector<f64> {
        let n = self.n();
        let mut y = DVector::zeros(n + 1);
        y.rows_mut(0, n).copy_from(&self.v);
        y[n] = self.t;
        y
    }

    pub fn r(&self) -> DVector<f64> {
        self.residual.rows(0, self.n()).into_owned()
    }

    pub fn sigma(&self) -> f64 {
        self.residual[self.n()]
    }

    pub fn residual_norm(&self) -> f64 {
        self.residual.norm()
    }
}

const SIGN_TOL: f64 = 1e-14;

/// Fixes the eigenvector sign: `t > 0` when `t` is nonzero, otherwise the
/// first nonzero entry of `v` is positive.
pub fn canonicalize_sign(y: &mut DVector<f64>) {
    let n = y.len() - 1;
    let flip = if y[n].abs() > SIGN_TOL {
        y[n] < 0.0
    } else {
        let scale = y.amax().max(f64::MIN_POSITIVE);
        y.iter()
            .take(n)
            .find(|c| c.abs() > SIGN_TOL * scale)
            .is_some_and(|c| *c < 0.0)
    };
    if flip {
        y.neg_mut();
    }
}

/// Exact leftmost eigenpair of `F` with the default dense threshold.
pub fn solve_exact(system: &HomogeneousSystem) -> Result<SubproblemSolution> {
    solve_exact_with_threshold(system, DEFAULT_DENSE_THRESHOLD)
}

pub fn solve_exact_with_threshold(system: &HomogeneousSystem, dense_threshold: usize) -> Result<SubproblemSolution> {
    let n = system.n();
    if n > dense_threshold {
        return Err(Error::Config(format!(
            "n = {n} exceeds the dense threshold {dense_threshold}; use the Lanczos path"
        )));
    }
    let f = system.to_dense()?;
    let (vals, vecs) = sorted_eigen(&f)?;
    let mut y = vecs.column(0).into_owned();
    y /= y.norm();
    canonicalize_sign(&mut y);
    let eigengap = (n >= 1).then(|| vals[1] - vals[0]);
    Ok(SubproblemSolution {
        v: y.rows(0, n).into_owned(),
        t: y[n],
        dual: -vals[0],
        residual: DVector::zeros(n + 1),
        mode: SolveMode::Exact,
        eigengap,
        lanczos_iterations: 0,
        budget_exhausted: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalityReport {
    /// `||(F + dual I) [v; t]||`.
    pub first_order_residual: f64,
    /// `| ||[v; t]|| - 1 |`.
    pub norm_error: f64,
    /// `lambda_min(F + dual I)` from the dense oracle.
    pub shifted_min_eigenvalue: f64,
    pub first_order_ok: bool,
    pub norm_ok: bool,
    pub second_order_ok: bool,
}

impl OptimalityReport {
    pub fn passed(&self) -> bool {
        self.first_order_ok && self.norm_ok && self.second_order_ok
    }
}

/// Checks the first-order, norm and second-order optimality conditions of a
/// candidate solution against the dense oracle.
pub fn verify_optimality(system: &HomogeneousSystem, sol: &SubproblemSolution, tol: f64) -> Result<OptimalityReport> {
    let y = sol.stacked();
    let fy = system.apply(&y)?;
    let first = (fy + &y * sol.dual).norm();
    let norm_error = (y.norm() - 1.0).abs();
    let lam_min = sorted_eigen(&system.to_dense()?)?.0[0];
    let shifted = lam_min + sol.dual;
    Ok(OptimalityReport {
        first_order_residual: first,
        norm_error,
        shifted_min_eigenvalue: shifted,
        first_order_ok: first <= tol,
        norm_ok: norm_error <= tol,
        second_order_ok: shifted >= -tol,
    })
}

/// `xi^T H xi / ||xi||^2`.
pub fn rayleigh_quotient(hessian: &dyn SymmetricOperator, xi: &DVector<f64>) -> Result<f64> {
    let nn = xi.norm_squared();
    if nn == 0.0 || !nn.is_finite() {
        return Err(Error::Domain("Rayleigh quotient of a zero vector".into()));
    }
    Ok(xi.dot(&hessian.apply(xi)?) / nn)
}

/// Classification of `|t|` against `1 / sqrt(1 + radius^2)` and `nu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepCase {
    /// `||v / t|| < radius`: full step, then certification.
    SmallValue,
    /// `nu <= |t| <= 1 / sqrt(1 + radius^2)`: direction `v / t`.
    LargeA,
    /// `|t| < nu`: direction `sign(-g^T v) v`.
    LargeB,
}

/// Direction and case from a subproblem solution. `t = 0` always lands in
/// [`StepCase::LargeB`].
pub fn direction_from_solution(
    sol: &SubproblemSolution,
    g: &DVector<f64>,
    nu: f64,
    radius: f64,
) -> Result<(DVector<f64>, StepCase)> {
    if !(nu > 0.0 && nu < 0.5) {
        return Err(Error::Config(format!("nu must lie in (0, 1/2), got {nu}")));
    }
    if !(radius > 0.0) {
        return Err(Error::Config(format!("radius must be positive, got {radius}")));
    }
    let at = sol.t.abs();
    let small_threshold = 1.0 / (1.0 + radius * radius).sqrt();
    if at > small_threshold {
        Ok((&sol.v / sol.t, StepCase::SmallValue))
    } else if at >= nu {
        Ok((&sol.v / sol.t, StepCase::LargeA))
    } else {
        let s = sign_pos(-g.dot(&sol.v));
        Ok((&sol.v * s, StepCase::LargeB))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use nalgebra::dvector;

    fn dense(h: DMatrix<f64>, g: DVector<f64>, delta: f64) -> HomogeneousSystem<'static> {
        homogenize(HessianOp::Dense(h), g, delta).unwrap()
    }

    #[test]
    fn homogenize_block_structure() {
        let f = dense(DMatrix::identity(2, 2), DVector::zeros(2), 0.0);
        assert_eq!(f.to_dense().unwrap(), DMatrix::from_diagonal(&dvector![1.0, 1.0, 0.0]));

        let f = dense(dmatrix![2.0, 0.0; 0.0, -1.0], dvector![1.0, 0.0], 0.1);
        let expect = dmatrix![2.0, 0.0, 1.0; 0.0, -1.0, 0.0; 1.0, 0.0, -0.1];
        assert_eq!(f.to_dense().unwrap(), expect);
    }

    #[test]
    fn negative_delta_rejected() {
        let r = homogenize(HessianOp::Dense(DMatrix::identity(2, 2)), DVector::zeros(2), -1e-3);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn trivial_case_positive_curvature() {
        let f = dense(DMatrix::from_diagonal(&dvector![1.0, 2.0]), DVector::zeros(2), 0.5);
        let s = solve_exact(&f).unwrap();
        assert!((s.dual - 0.5).abs() < 1e-12);
        assert!((s.t - 1.0).abs() < 1e-12);
        assert!(s.v.norm() < 1e-12);
    }

    #[test]
    fn trivial_case_negative_curvature() {
        let f = dense(DMatrix::from_diagonal(&dvector![-1.0, 2.0]), DVector::zeros(2), 0.5);
        let s = solve_exact(&f).unwrap();
        assert!((s.dual - 1.0).abs() < 1e-12);
        assert!(s.t.abs() < 1e-12);
        assert!((s.v - dvector![1.0, 0.0]).norm() < 1e-12);
    }

    #[test]
    fn exact_solution_passes_and_noisy_fails() {
        let f = dense(dmatrix![2.0, 0.0; 0.0, -1.0], dvector![1.0, 0.0], 0.1);
        let s = solve_exact(&f).unwrap();
        assert!(verify_optimality(&f, &s, 1e-8).unwrap().passed());

        let mut y = s.stacked() + dvector![1e-3, -2e-3, 1.5e-3];
        y /= y.norm();
        let noisy = SubproblemSolution {
            v: y.rows(0, 2).into_owned(),
            t: y[2],
            ..s.clone()
        };
        let rep = verify_optimality(&f, &noisy, 1e-6).unwrap();
        assert!(!rep.first_order_ok);
        assert!(rep.norm_ok);
    }

    #[test]
    fn rayleigh_examples() {
        let h = DMatrix::from_diagonal(&dvector![1.0, -2.0]);
        assert_eq!(rayleigh_quotient(&h, &dvector![0.0, 1.0]).unwrap(), -2.0);
        let h2 = dmatrix![2.0, 1.0; 1.0, 2.0];
        assert!((rayleigh_quotient(&h2, &dvector![1.0, 1.0]).unwrap() - 3.0).abs() < 1e-15);
        let xi = dvector![0.3, -1.7];
        let a = rayleigh_quotient(&h2, &xi).unwrap();
        let b = rayleigh_quotient(&h2, &(&xi * -4.5)).unwrap();
        assert!((a - b).abs() < 1e-14);
        assert!(matches!(
            rayleigh_quotient(&h2, &DVector::zeros(2)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn zero_t_routes_to_large_b() {
        let sol = SubproblemSolution {
            v: dvector![1.0, 0.0],
            t: 0.0,
            dual: 1.0,
            residual: DVector::zeros(3),
            mode: SolveMode::Exact,
            eigengap: None,
            lanczos_iterations: 0,
            budget_exhausted: false,
        };
        let (d, case) = direction_from_solution(&sol, &dvector![1.0, 0.0], 0.25, 0.1).unwrap();
        assert_eq!(case, StepCase::LargeB);
        assert_eq!(d, dvector![-1.0, 0.0]);

        // g^T v = 0 takes sign(0) = +1
        let (d, _) = direction_from_solution(&sol, &dvector![0.0, 1.0], 0.25, 0.1).unwrap();
        assert_eq!(d, dvector![1.0, 0.0]);
    }

    #[test]
    fn direction_rejects_bad_parameters() {
        let sol = solve_exact(&dense(DMatrix::identity(1, 1), dvector![1.0], 0.0)).unwrap();
        let g = dvector![1.0];
        assert!(direction_from_solution(&sol, &g, 0.5, 0.1).is_err());
        assert!(direction_from_solution(&sol, &g, 0.0, 0.1).is_err());
        assert!(direction_from_solution(&sol, &g, 0.1, 0.0).is_err());
    }
}
