//! Analytic test problems with exact derivatives.
//!
//! Where a family advertises a Hessian Lipschitz constant, it is valid on a
//! box that contains the sublevel set of every start in the family's
//! documented start region, widened by a margin of 0.5 so that trial steps
//! stay inside it.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{KnownConstants, KnownOptimum, Objective};
use crate::error::{Error, Result};
use crate::linalg::gaussian_vector;

pub const SUITE_NAMES: &[&str] = &[
    "quadratic",
    "rosenbrock",
    "chained-rosenbrock",
    "powell",
    "saddle",
    "quartic",
    "convex-quartic",
];

const BOX_MARGIN: f64 = 0.5;

/// Builds a suite problem by family name and dimension.
pub fn make_problem(name: &str, n: usize) -> Result<Box<dyn Objective>> {
    if n == 0 {
        return Err(Error::Config(format!("{name}: dimension must be positive")));
    }
    let p: Box<dyn Objective> = match name {
        "quadratic" => {
            let spectrum: Vec<f64> = (1..=n).map(|i| i as f64).collect();
            Box::new(Quadratic::with_spectrum(
                &spectrum,
                Some(7),
                DVector::from_element(n, 1.0),
            )?)
        }
        "rosenbrock" => {
            if n < 2 || !n.is_multiple_of(2) {
                return Err(Error::Config("rosenbrock needs an even n >= 2".into()));
            }
            Box::new(Rosenbrock::extended(n))
        }
        "chained-rosenbrock" => {
            if n < 2 {
                return Err(Error::Config("chained-rosenbrock needs n >= 2".into()));
            }
            Box::new(Rosenbrock::chained(n))
        }
        "powell" => {
            if !n.is_multiple_of(4) {
                return Err(Error::Config("powell needs n divisible by 4".into()));
            }
            Box::new(PowellSingular::new(n))
        }
        "saddle" => Box::new(Saddle::new(n)),
        "quartic" => Box::new(NonconvexQuartic::new(n)),
        "convex-quartic" => Box::new(ConvexQuartic::new(n)),
        other => return Err(Error::Config(format!("unknown problem `{other}`"))),
    };
    Ok(p)
}

/// Parses `name[:n]`; without `:n` the family's default size is used.
pub fn parse_problem_id(id: &str) -> Result<(String, usize)> {
    let (name, n) = match id.split_once(':') {
        Some((name, n)) => {
            let n = n
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad dimension in problem id `{id}`")))?;
            (name.trim(), n)
        }
        None => {
            let name = id.trim();
            let n = match name {
                "quadratic" => 10,
                "rosenbrock" | "chained-rosenbrock" => 2,
                "powell" => 4,
                "saddle" => 2,
                "quartic" | "convex-quartic" => 4,
                other => return Err(Error::Config(format!("unknown problem `{other}`"))),
            };
            (name, n)
        }
    };
    Ok((name.to_string(), n))
}

/// `f(x) = 1/2 x^T A x - b^T x` with symmetric positive definite `A`.
pub struct Quadratic {
    name: String,
    a: DMatrix<f64>,
    b: DVector<f64>,
    x_star: DVector<f64>,
    spectrum: (f64, f64),
}

impl Quadratic {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: b.len(),
            });
        }
        let a = (&a + a.transpose()) * 0.5;
        let vals = crate::linalg::sorted_eigen(&a)?.0;
        if vals[0] <= 0.0 {
            return Err(Error::Config("quadratic needs a positive definite matrix".into()));
        }
        let x_star = a
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("cholesky failed".into()))?
            .solve(&b);
        Ok(Self {
            name: format!("quadratic:{n}"),
            a,
            b,
            x_star,
            spectrum: (vals[0], vals[n - 1]),
        })
    }

    /// `A = Q diag(spectrum) Q^T` with a seeded random rotation, or diagonal
    /// when `rotation_seed` is `None`.
    pub fn with_spectrum(spectrum: &[f64], rotation_seed: Option<u64>, b: DVector<f64>) -> Result<Self> {
        let n = spectrum.len();
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(spectrum));
        let a = match rotation_seed {
            Some(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let g = DMatrix::from_columns(&(0..n).map(|_| gaussian_vector(n, &mut rng)).collect::<Vec<_>>());
                let q = g.qr().q();
                &q * d * q.transpose()
            }
            None => d,
        };
        Self::new(a, b)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn minimizer(&self) -> &DVector<f64> {
        &self.x_star
    }
}

impl Objective for Quadratic {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.b.len()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.a * x)) - self.b.dot(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x - &self.b
    }
    fn has_hessian(&self) -> bool {
        true
    }
    fn has_hvp(&self) -> bool {
        true
    }
    fn hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.a.clone())
    }
    fn hvp(&self, _x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        Some(&self.a * v)
    }
    fn constants(&self) -> KnownConstants {
        let f_star = -0.5 * self.b.dot(&self.x_star);
        KnownConstants {
            hessian_lipschitz: Some(0.0),
            hessian_bound: Some(self.spectrum.1),
            gradient_bound: None,
            f_lower: Some(f_star),
            strong_convexity: Some(self.spectrum.0),
        }
    }
    fn optimum(&self) -> Option<KnownOptimum> {
        Some(KnownOptimum {
            x: self.x_star.clone(),
            f: -0.5 * self.b.dot(&self.x_star),
        })
    }
}

/// Rosenbrock terms `100 (x_j - x_i^2)^2 + (1 - x_i)^2`.
///
/// The extended form sums over the disjoint pairs `(x_{2k}, x_{2k+1})`; the
/// chained form sums over every consecutive pair `(x_i, x_{i+1})`. Both have
/// the unique global minimizer `x = 1`, and the standard start alternates
/// `-1.2, 1, -1.2, ...`. For `n = 2` the two forms coincide.
pub struct Rosenbrock {
    name: String,
    n: usize,
    chained: bool,
}

impl Rosenbrock {
    pub fn extended(n: usize) -> Self {
        Self {
            name: format!("rosenbrock:{n}"),
            n,
            chained: false,
        }
    }

    pub fn chained(n: usize) -> Self {
        Self {
            name: format!("chained-rosenbrock:{n}"),
            n,
            chained: true,
        }
    }

    fn pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        let (step, count) = if self.chained { (1, self.n - 1) } else { (2, self.n / 2) };
        (0..count).map(move |k| (k * step, k * step + 1))
    }
}

impl Objective for Rosenbrock {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.pairs()
            .map(|(i, j)| {
                let a = x[j] - x[i] * x[i];
                let b = 1.0 - x[i];
                100.0 * a * a + b * b
            })
            .sum()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.n);
        for (i, j) in self.pairs() {
            let a = x[j] - x[i] * x[i];
            g[i] += -400.0 * x[i] * a - 2.0 * (1.0 - x[i]);
            g[j] += 200.0 * a;
        }
        g
    }
    fn has_hessian(&self) -> bool {
        true
    }
    fn has_hvp(&self) -> bool {
        true
    }
    fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let mut h = DMatrix::zeros(self.n, self.n);
        for (i, j) in self.pairs() {
            h[(i, i)] += 1200.0 * x[i] * x[i] - 400.0 * x[j] + 2.0;
            h[(i, j)] += -400.0 * x[i];
            h[(j, i)] += -400.0 * x[i];
            h[(j, j)] += 200.0;
        }
        Some(h)
    }
    fn hvp(&self, x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        let mut out = DVector::zeros(self.n);
        for (i, j) in self.pairs() {
            let dii = 1200.0 * x[i] * x[i] - 400.0 * x[j] + 2.0;
            let off = -400.0 * x[i];
            out[i] += dii * v[i] + off * v[j];
            out[j] += off * v[i] + 200.0 * v[j];
        }
        Some(out)
    }
    fn constants(&self) -> KnownConstants {
        KnownConstants {
            f_lower: Some(0.0),
            ..Default::default()
        }
    }
    fn optimum(&self) -> Option<KnownOptimum> {
        Some(KnownOptimum {
            x: DVector::from_element(self.n, 1.0),
            f: 0.0,
        })
    }
    fn standard_start(&self) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| if i % 2 == 0 { -1.2 } else { 1.0 })
    }
}

/// Extended Powell singular function; the Hessian is singular at the
/// minimizer `x = 0`.
pub struct PowellSingular {
    name: String,
    n: usize,
}

impl PowellSingular {
    pub fn new(n: usize) -> Self {
        Self {
            name: format!("powell:{n}"),
            n,
        }
    }
}

impl Objective for PowellSingular {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        (0..self.n / 4)
            .map(|k| {
                let i = 4 * k;
                let a = x[i] + 10.0 * x[i + 1];
                let b = x[i + 2] - x[i + 3];
                let c = x[i + 1] - 2.0 * x[i + 2];
                let d = x[i] - x[i + 3];
                a * a + 5.0 * b * b + c.powi(4) + 10.0 * d.powi(4)
            })
            .sum()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.n);
        for k in 0..self.n / 4 {
            let i = 4 * k;
            let a = x[i] + 10.0 * x[i + 1];
            let b = x[i + 2] - x[i + 3];
            let c = x[i + 1] - 2.0 * x[i + 2];
            let d = x[i] - x[i + 3];
            g[i] = 2.0 * a + 40.0 * d.powi(3);
            g[i + 1] = 20.0 * a + 4.0 * c.powi(3);
            g[i + 2] = 10.0 * b - 8.0 * c.powi(3);
            g[i + 3] = -10.0 * b - 40.0 * d.powi(3);
        }
        g
    }
    fn has_hessian(&self) -> bool {
        true
    }
    fn has_hvp(&self) -> bool {
        true
    }
    fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let mut h = DMatrix::zeros(self.n, self.n);
        for k in 0..self.n / 4 {
            let i = 4 * k;
            let c = x[i + 1] - 2.0 * x[i + 2];
            let d = x[i] - x[i + 3];
            let terms: [(f64, [f64; 4]); 4] = [
                (2.0, [1.0, 10.0, 0.0, 0.0]),
                (10.0, [0.0, 0.0, 1.0, -1.0]),
                (12.0 * c * c, [0.0, 1.0, -2.0, 0.0]),
                (120.0 * d * d, [1.0, 0.0, 0.0, -1.0]),
            ];
            for (w, u) in terms {
                for r in 0..4 {
                    for s in 0..4 {
                        h[(i + r, i + s)] += w * u[r] * u[s];
                    }
                }
            }
        }
        Some(h)
    }
    fn hvp(&self, x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        let mut out = DVector::zeros(self.n);
        for k in 0..self.n / 4 {
            let i = 4 * k;
            let c = x[i + 1] - 2.0 * x[i + 2];
            let d = x[i] - x[i + 3];
            let terms: [(f64, [f64; 4]); 4] = [
                (2.0, [1.0, 10.0, 0.0, 0.0]),
                (10.0, [0.0, 0.0, 1.0, -1.0]),
                (12.0 * c * c, [0.0, 1.0, -2.0, 0.0]),
                (120.0 * d * d, [1.0, 0.0, 0.0, -1.0]),
            ];
            for (w, u) in terms {
                let uv: f64 = (0..4).map(|r| u[r] * v[i + r]).sum();
                for r in 0..4 {
                    out[i + r] += w * uv * u[r];
                }
            }
        }
        Some(out)
    }
    fn constants(&self) -> KnownConstants {
        KnownConstants {
            f_lower: Some(0.0),
            ..Default::default()
        }
    }
    fn optimum(&self) -> Option<KnownOptimum> {
        Some(KnownOptimum {
            x: DVector::zeros(self.n),
            f: 0.0,
        })
    }
    fn standard_start(&self) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| [3.0, -1.0, 0.0, 1.0][i % 4])
    }
}

/// Strict saddle at the origin with bounded-below curvature:
/// `f(x) = 1/2 sum_{i<n} x_i^2 - 1/2 x_n^2 + 1/4 x_n^4`.
///
/// At `x = 0` the gradient vanishes and `lambda_min(H) = -1`; the minimizers
/// are `(0, ..., 0, +-1)` with `f = -1/4`. The standard start is the saddle.
pub struct Saddle {
    name: String,
    n: usize,
}

impl Saddle {
    pub fn new(n: usize) -> Self {
        Self {
            name: format!("saddle:{n}"),
            n,
        }
    }

    /// Bound on `|x_n|` over `{f <= 0}` plus the box margin.
    fn box_radius() -> f64 {
        2.0_f64.sqrt() + BOX_MARGIN
    }
}

impl Objective for Saddle {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        let last = self.n - 1;
        let s = x[last];
        0.5 * (0..last).map(|i| x[i] * x[i]).sum::<f64>() - 0.5 * s * s + 0.25 * s.powi(4)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let last = self.n - 1;
        let mut g = x.clone();
        g[last] = -x[last] + x[last].powi(3);
        g
    }
    fn has_hessian(&self) -> bool {
        true
    }
    fn has_hvp(&self) -> bool {
        true
    }
    fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let last = self.n - 1;
        let mut h = DMatrix::identity(self.n, self.n);
        h[(last, last)] = -1.0 + 3.0 * x[last] * x[last];
        Some(h)
    }
    fn hvp(&self, x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        let last = self.n - 1;
        let mut out = v.clone();
        out[last] *= -1.0 + 3.0 * x[last] * x[last];
        Some(out)
    }
    fn constants(&self) -> KnownConstants {
        let r = Self::box_radius();
        KnownConstants {
            hessian_lipschitz: Some(6.0 * r),
            hessian_bound: Some((3.0 * r * r - 1.0).max(1.0)),
            gradient_bound: None,
            f_lower: Some(-0.25),
            strong_convexity: Some(1.0),
        }
    }
    fn optimum(&self) -> Option<KnownOptimum> {
        let mut x = DVector::zeros(self.n);
        x[self.n - 1] = 1.0;
        Some(KnownOptimum { x, f: -0.25 })
    }
}

/// Separable double well `f(x) = sum_i (x_i^4 / 4 - x_i^2 / 2)`.
///
/// Saddle at the origin, strict local minimizers at every sign pattern
/// `(+-1, ..., +-1)`. Constants hold for starts in `[-1.5, 1.5]^n`.
pub struct NonconvexQuartic {
    name: String,
    n: usize,
    radius: f64,
}

pub const QUARTIC_START_BOX: f64 = 1.5;

impl NonconvexQuartic {
    pub fn new(n: usize) -> Self {
        let phi = |s: f64| s.powi(4) / 4.0 - s * s / 2.0;
        // phi(x_i) <= f(x_0) - sum_{j != i} phi(x_j) <= n max(phi(0), phi(1.5)) + (n - 1) / 4
        let cap = n as f64 * phi(QUARTIC_START_BOX).max(0.0) + (n as f64 - 1.0) / 4.0;
        let r0 = (1.0 + (1.0 + 4.0 * cap).sqrt()).sqrt();
        Self {
            name: format!("quartic:{n}"),
            n,
            radius: r0.max(QUARTIC_START_BOX) + BOX_MARGIN,
        }
    }

    /// Half-width of the box on which the advertised constants hold.
    pub fn box_radius(&self) -> f64 {
        self.radius
    }
}

impl Objective for NonconvexQuartic {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        x.iter().map(|&s| s.powi(4) / 4.0 - s * s / 2.0).sum()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x.map(|s| s.powi(3) - s)
    }
    fn has_hessian(&self) -> bool {
        true
    }
    fn has_hvp(&self) -> bool {
        true
    }
    fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_diagonal(&x.map(|s| 3.0 * s * s - 1.0)))
    }
    fn hvp(&self, x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        Some(x.zip_map(v, |s, w| (3.0 * s * s - 1.0) * w))
    }
    fn constants(&self) -> KnownConstants {
        let r = self.radius;
        KnownConstants {
            hessian_lipschitz: Some(6.0 * r),
            hessian_bound: Some((3.0 * r * r - 1.0).max(1.0)),
            gradient_bound: Some((self.n as f64).sqrt() * (r.powi(3) - r).max(2.0 / (27.0f64).sqrt())),
            f_lower: Some(-(self.n as f64) / 4.0),
            strong_convexity: Some(2.0),
        }
    }
    fn optimum(&self) -> Option<KnownOptimum> {
        Some(KnownOptimum {
            x: DVector::from_element(self.n, 1.0),
            f: -(self.n as f64) / 4.0,
        })
    }
    fn standard_start(&self) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| 0.1 * ((i + 1) as f64).cos())
    }
}

/// Strongly convex `f(x) = sum_i (x_i^2 + x_i^4)` with minimizer `0`.
/// Constants hold for starts in `[-1, 1]^n`.
pub struct ConvexQuartic {
    name: String,
    n: usize,
    radius: f64,
}

impl ConvexQuartic {
    pub fn new(n: usize) -> Self {
        // x_i^2 + x_i^4 <= f(x_0) <= 2n
        let cap = 2.0 * n as f64;
        let r0 = ((-1.0 + (1.0 + 4.0 * cap).sqrt()) / 2.0).sqrt();
        Self {
            name: format!("convex-quartic:{n}"),
            n,
            radius: r0.max(1.0) + BOX_MARGIN,
        }
    }
}

impl Objective for ConvexQuartic {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        x.iter().map(|&s| s * s + s.powi(4)).sum()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x.map(|s| 2.0 * s + 4.0 * s.powi(3))
    }
    fn has_hessian(&self) -> bool {
        true
    }
    fn has_hvp(&self) -> bool {
        true
    }
    fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_diagonal(&x.map(|s| 2.0 + 12.0 * s * s)))
    }
    fn hvp(&self, x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        Some(x.zip_map(v, |s, w| (2.0 + 12.0 * s * s) * w))
    }
    fn constants(&self) -> KnownConstants {
        let r = self.radius;
        KnownConstants {
            hessian_lipschitz: Some(24.0 * r),
            hessian_bound: Some(2.0 + 12.0 * r * r),
            gradient_bound: None,
            f_lower: Some(0.0),
            strong_convexity: Some(2.0),
        }
    }
    fn optimum(&self) -> Option<KnownOptimum> {
        Some(KnownOptimum {
            x: DVector::zeros(self.n),
            f: 0.0,
        })
    }
    fn standard_start(&self) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| 0.5 * (1.0 + i as f64).sin())
    }
}
