use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homogeneous::DEFAULT_DENSE_THRESHOLD;
use crate::problem::KnownConstants;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Stepsize {
    /// `eta = radius / ||d||`, so every large-value step has length `radius`.
    FixedRadius,
    /// Accept the first `eta = beta^j` with
    /// `f(x) - f(x + eta d) >= gamma eta^3 ||d||^3 / 6`.
    Backtracking { beta: f64, gamma: f64 },
}

impl Stepsize {
    pub fn backtracking() -> Self {
        Stepsize::Backtracking { beta: 0.5, gamma: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InexactOptions {
    /// Target Ritz error; defaults to `sqrt(eps)`.
    pub e_k: Option<f64>,
    pub p: f64,
    /// Skewing weight override.
    pub psi: Option<f64>,
    pub j_min: usize,
}

impl Default for InexactOptions {
    fn default() -> Self {
        InexactOptions {
            e_k: None,
            p: 1e-3,
            psi: None,
            j_min: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    /// Dense eigensolve of the homogenized matrix; needs an explicit Hessian.
    Exact,
    /// Skewed-start Lanczos on Hessian-vector products.
    Inexact(InexactOptions),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalPhase {
    Stop,
    /// Keep iterating with `delta = 0` and unit steps after certification.
    ContinueWithDeltaZero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub epsilon: f64,
    /// Defaults to `sqrt(eps)`.
    pub delta: Option<f64>,
    /// Defaults to `2 sqrt(eps) / M` (exact) or `sqrt(eps) / M` (inexact)
    /// when the Hessian Lipschitz constant `M` is known, else `sqrt(eps)`.
    pub radius: Option<f64>,
    /// Defaults to 0.01 (exact) or 0.3 (inexact).
    pub nu: Option<f64>,
    pub stepsize: Stepsize,
    pub mode: Mode,
    pub local_phase: LocalPhase,
    pub max_outer_iters: usize,
    pub max_local_iters: usize,
    /// Gradient tolerance ending the local phase.
    pub local_gtol: f64,
    pub dense_threshold: usize,
    /// Stop with [`super::Status::GradientConverged`] once `||g|| <= gtol`.
    pub gtol: Option<f64>,
    /// Overrides for the problem's constants.
    pub constants: KnownConstants,
    /// Line-search trial cap when `M` is unknown.
    pub max_ls_trials: usize,
    pub stagnation_window: usize,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(epsilon: f64) -> Self {
        SolverConfig {
            epsilon,
            delta: None,
            radius: None,
            nu: None,
            stepsize: Stepsize::backtracking(),
            mode: Mode::Exact,
            local_phase: LocalPhase::Stop,
            max_outer_iters: 20_000,
            max_local_iters: 50,
            local_gtol: 1e-12,
            dense_threshold: DEFAULT_DENSE_THRESHOLD,
            gtol: None,
            constants: KnownConstants::default(),
            max_ls_trials: 60,
            stagnation_window: 10,
            seed: 0,
        }
    }

    pub fn inexact(epsilon: f64) -> Self {
        SolverConfig {
            mode: Mode::Inexact(InexactOptions::default()),
            ..SolverConfig::new(epsilon)
        }
    }

    pub fn with_stepsize(mut self, s: Stepsize) -> Self {
        self.stepsize = s;
        self
    }

    pub fn with_local_phase(mut self, l: LocalPhase) -> Self {
        self.local_phase = l;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn is_inexact(&self) -> bool {
        matches!(self.mode, Mode::Inexact(_))
    }

    /// Merges config overrides over the problem's constants and fills in
    /// every default.
    pub fn resolve(&self, problem_constants: &KnownConstants) -> Result<ResolvedConfig> {
        let eps = self.epsilon;
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {eps}")));
        }
        let c = KnownConstants {
            hessian_lipschitz: self.constants.hessian_lipschitz.or(problem_constants.hessian_lipschitz),
            hessian_bound: self.constants.hessian_bound.or(problem_constants.hessian_bound),
            gradient_bound: self.constants.gradient_bound.or(problem_constants.gradient_bound),
            f_lower: self.constants.f_lower.or(problem_constants.f_lower),
            strong_convexity: self.constants.strong_convexity.or(problem_constants.strong_convexity),
        };
        let m = c.hessian_lipschitz.filter(|m| *m > 0.0 && m.is_finite());
        let se = eps.sqrt();
        let delta = self.delta.unwrap_or(se);
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!("delta must be finite and >= 0, got {delta}")));
        }
        let radius = match (self.radius, m) {
            (Some(r), _) => r,
            (None, Some(m)) if self.is_inexact() => se / m,
            (None, Some(m)) => 2.0 * se / m,
            (None, None) => se,
        };
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("radius must be positive, got {radius}")));
        }
        let nu = self.nu.unwrap_or(if self.is_inexact() { 0.3 } else { 0.01 });
        if !(nu > 0.0 && nu < 0.5) {
            return Err(Error::Config(format!("nu must lie in (0, 1/2), got {nu}")));
        }
        if self.is_inexact() && !(nu > 0.25) {
            return Err(Error::Config(format!("inexact mode needs nu in (1/4, 1/2), got {nu}")));
        }
        if let Stepsize::Backtracking { beta, gamma } = self.stepsize {
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::Config(format!("beta must lie in (0, 1), got {beta}")));
            }
            if !(gamma > 0.0) {
                return Err(Error::Config(format!(
                    "line-search gamma must be positive, got {gamma}"
                )));
            }
        }
        let inexact = match self.mode {
            Mode::Exact => None,
            Mode::Inexact(o) => {
                let e_k = o.e_k.unwrap_or(se);
                if !(e_k > 0.0) {
                    return Err(Error::Config(format!("e_k must be positive, got {e_k}")));
                }
                if !(o.p > 0.0 && o.p < 1.0) {
                    return Err(Error::Config(format!("p must lie in (0, 1), got {}", o.p)));
                }
                if let Some(psi) = o.psi {
                    if !(psi > 0.0) {
                        return Err(Error::Config(format!("psi must be positive, got {psi}")));
                    }
                }
                Some(InexactOptions { e_k: Some(e_k), ..o })
            }
        };
        if self.max_outer_iters == 0 {
            return Err(Error::Config("max_outer_iters must be positive".into()));
        }
        if let Some(g) = self.gtol {
            if !(g > 0.0) {
                return Err(Error::Config(format!("gtol must be positive, got {g}")));
            }
        }
        Ok(ResolvedConfig {
            epsilon: eps,
            delta,
            radius,
            nu,
            lipschitz: m,
            hessian_bound: c.hessian_bound.filter(|u| *u >= 0.0 && u.is_finite()),
            constants: c,
            inexact,
        })
    }
}

/// A [`SolverConfig`] with defaults filled in against a problem's constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub radius: f64,
    pub nu: f64,
    /// Known Hessian Lipschitz constant.
    pub lipschitz: Option<f64>,
    /// Known Hessian norm bound.
    pub hessian_bound: Option<f64>,
    pub constants: KnownConstants,
    pub inexact: Option<InexactOptions>,
}

impl ResolvedConfig {
    /// `M`, or `2 sqrt(eps) / radius` when unknown (so that the radius rule
    /// `radius = 2 sqrt(eps) / M` holds).
    pub fn effective_lipschitz(&self) -> f64 {
        self.lipschitz.unwrap_or(2.0 * self.epsilon.sqrt() / self.radius)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_known_constants() {
        let known = KnownConstants {
            hessian_lipschitz: Some(4.0),
            ..Default::default()
        };
        let r = SolverConfig::new(1e-4).resolve(&known).unwrap();
        assert!((r.delta - 1e-2).abs() < 1e-15);
        assert!((r.radius - 2e-2 / 4.0).abs() < 1e-15);
        assert_eq!(r.nu, 0.01);

        let r = SolverConfig::inexact(1e-4).resolve(&known).unwrap();
        assert!((r.radius - 1e-2 / 4.0).abs() < 1e-15);
        assert_eq!(r.nu, 0.3);

        let r = SolverConfig::new(1e-4).resolve(&KnownConstants::default()).unwrap();
        assert!((r.radius - 1e-2).abs() < 1e-15);
        assert!((r.effective_lipschitz() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_settings_rejected() {
        let k = KnownConstants::default();
        let mut c = SolverConfig::new(1e-4);
        c.nu = Some(0.6);
        assert!(c.resolve(&k).is_err());
        let mut c = SolverConfig::inexact(1e-4);
        c.nu = Some(0.2);
        assert!(c.resolve(&k).is_err());
        let c = SolverConfig::new(1e-4).with_stepsize(Stepsize::Backtracking { beta: 1.0, gamma: 1.0 });
        assert!(c.resolve(&k).is_err());
        let mut c = SolverConfig::new(1e-4);
        c.delta = Some(-1e-3);
        assert!(c.resolve(&k).is_err());
        assert!(SolverConfig::new(0.0).resolve(&k).is_err());
    }
}
