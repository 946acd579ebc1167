//! The perturbed copula density theta_{epsilon,gamma}: evaluation with
//! the single live region term, the gamma admissibility bound, the
//! bivariate eight-branch form, marginal integration and rejection
//! sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::copula::epsilon::EpsilonAssignment;
use crate::copula::region::{all_alphas, classify_region, tau, Perm};
use crate::error::{Error, Result};
use crate::verify::{quad_1d, rejection_sample};

/// Nonnegative generator on the reference region Delta(0, id).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum GammaDescriptor {
    Const { value: f64 },
    /// Piecewise-constant values on a per_axis^d tensor grid over the
    /// bounding box (0, 1/2)^d of the reference region; entries outside
    /// the region are ignored.
    Grid { per_axis: usize, values: Vec<f64> },
}

impl GammaDescriptor {
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            GammaDescriptor::Const { value } => {
                if *value < 0.0 {
                    return Err(Error::InvalidSpec("gamma must be nonnegative".into()));
                }
            }
            GammaDescriptor::Grid { per_axis, values } => {
                if *per_axis == 0 || values.len() != per_axis.pow(d as u32) {
                    return Err(Error::InvalidSpec(format!(
                        "gamma grid needs {}^{} values",
                        per_axis, d
                    )));
                }
                if values.iter().any(|&v| v < 0.0) {
                    return Err(Error::InvalidSpec("gamma must be nonnegative".into()));
                }
            }
        }
        Ok(())
    }

    /// Value at a point of the reference region (coordinates in (0, 1/2)).
    pub fn eval(&self, q: &[f64]) -> f64 {
        match self {
            GammaDescriptor::Const { value } => *value,
            GammaDescriptor::Grid { per_axis, values } => {
                let n = *per_axis;
                let mut flat = 0usize;
                for &qi in q {
                    let cell = ((qi * 2.0 * n as f64) as usize).min(n - 1);
                    flat = flat * n + cell;
                }
                values[flat]
            }
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            GammaDescriptor::Const { value } => *value,
            GammaDescriptor::Grid { values, .. } => {
                values.iter().fold(0.0f64, |m, &v| m.max(v))
            }
        }
    }
}

/// Base copula density on the hypercube.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", untagged)]
pub enum BaseCopula {
    Named(BaseName),
    /// Piecewise-constant density on a per_axis^d grid over [0, 1]^d;
    /// cell values must average to 1.
    Grid { per_axis: usize, values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseName {
    Independence,
}

impl BaseCopula {
    pub fn independence() -> Self {
        BaseCopula::Named(BaseName::Independence)
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            BaseCopula::Named(_) => Ok(()),
            BaseCopula::Grid { per_axis, values } => {
                if *per_axis == 0 || values.len() != per_axis.pow(d as u32) {
                    return Err(Error::InvalidSpec(format!(
                        "base grid needs {}^{} values",
                        per_axis, d
                    )));
                }
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                if (mean - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidSpec(format!(
                        "base grid density integrates to {mean}, expected 1"
                    )));
                }
                if values.iter().any(|&v| v < 0.0) {
                    return Err(Error::InvalidSpec("base density must be nonnegative".into()));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        match self {
            BaseCopula::Named(BaseName::Independence) => 1.0,
            BaseCopula::Grid { per_axis, values } => {
                let n = *per_axis;
                let mut flat = 0usize;
                for &ui in u {
                    let cell = ((ui * n as f64) as usize).min(n - 1);
                    flat = flat * n + cell;
                }
                values[flat]
            }
        }
    }

    pub fn inf(&self) -> f64 {
        match self {
            BaseCopula::Named(BaseName::Independence) => 1.0,
            BaseCopula::Grid { values, .. } => {
                values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
            }
        }
    }
}

/// Full perturbed-copula specification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CopulaSpec {
    pub d: usize,
    pub epsilon: EpsilonAssignment,
    pub gamma: GammaDescriptor,
    #[serde(default = "BaseCopula::independence")]
    pub base: BaseCopula,
}

impl CopulaSpec {
    pub fn signed_uniform(d: usize, gamma: f64) -> Result<Self> {
        let spec = CopulaSpec {
            d,
            epsilon: EpsilonAssignment::Signed,
            gamma: GammaDescriptor::Const { value: gamma },
            base: BaseCopula::independence(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidSpec("copula dimension must be >= 2".into()));
        }
        self.epsilon.validate(self.d)?;
        self.gamma.validate(self.d)?;
        self.base.validate(self.d)?;
        Ok(())
    }

    /// theta(u) = c(u) - epsilon(alpha, beta) gamma(sigma_beta(tau_alpha(u)))
    /// with (alpha, beta) the region of u; boundary points return c(u).
    pub fn theta_eval(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.d {
            return Err(Error::InvalidSpec("point dimension mismatch".into()));
        }
        let c = self.base.eval(u);
        let Some(key) = classify_region(u) else {
            return Ok(c);
        };
        let q = key.beta.apply(&tau(&key.alpha, u));
        let eps = self.epsilon.eval(&key.alpha, &key.beta);
        let g = self.gamma.eval(&q);
        let v = c - eps * g;
        if v < -1e-12 {
            return Err(Error::EnvelopeViolation { ratio: g, envelope: c / eps });
        }
        Ok(v)
    }

    /// Admissibility bound for the generator at a reference-region point:
    /// min over keys with positive epsilon of
    /// c(tau_alpha(sigma_{beta^-1}(q))) / epsilon(alpha, beta);
    /// +infinity when no epsilon is positive.
    pub fn gamma_bound(&self, q: &[f64]) -> Result<f64> {
        if q.len() != self.d || q.iter().any(|&v| !(0.0..0.5).contains(&v)) {
            return Err(Error::OutsideDomain("gamma_bound needs a reference-region point".into()));
        }
        let mut bound = f64::INFINITY;
        for alpha in all_alphas(self.d) {
            for beta in Perm::all(self.d) {
                let e = self.epsilon.eval(&alpha, &beta);
                if e > 0.0 {
                    let u = tau(&alpha, &beta.inverse().apply(q));
                    bound = bound.min(self.base.eval(&u) / e);
                }
            }
        }
        Ok(bound)
    }

    /// Integral of theta over coordinate `k` with the other coordinates
    /// fixed at `rest` (length d-1). Integration splits at the region
    /// breakpoints so each piece is smooth.
    pub fn marginal_integrate(&self, k: usize, rest: &[f64]) -> Result<f64> {
        if k >= self.d || rest.len() != self.d - 1 {
            return Err(Error::InvalidSpec("bad marginal_integrate arguments".into()));
        }
        let mut cuts = vec![0.0, 0.5, 1.0];
        for &v in rest {
            cuts.push(v);
            cuts.push(1.0 - v);
        }
        cuts.retain(|&v| (0.0..=1.0).contains(&v));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            if w[1] - w[0] < 1e-15 {
                continue;
            }
            let piece = quad_1d(
                |r| {
                    let u = crate::copula::region::omega(rest, k, r);
                    self.theta_eval(&u).unwrap_or(f64::NAN)
                },
                w[0],
                w[1],
                1e-10,
            )?;
            total += piece;
        }
        Ok(total)
    }

    /// Exact rejection sampling against the base copula (only the
    /// independence base has a built-in proposal sampler). Envelope:
    /// 1 + sup|epsilon| sup(gamma) / inf(c). Deterministic per seed.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        if !matches!(self.base, BaseCopula::Named(BaseName::Independence)) {
            return Err(Error::InvalidSpec(
                "sampling is implemented for the independence base".into(),
            ));
        }
        let envelope = 1.0 + self.epsilon.sup_abs(self.d) * self.gamma.sup() / self.base.inf();
        let d = self.d;
        let (samples, _rate) = rejection_sample(
            |u: &Vec<f64>| self.theta_eval(u).unwrap_or(0.0),
            |rng| {
                let u: Vec<f64> = (0..d).map(|_| rng.random()).collect();
                (u, 1.0)
            },
            envelope,
            n,
            seed,
        )?;
        Ok(samples)
    }
}

/// The literal eight-branch bivariate form. Branch conditions follow
/// the octant geometry; interior points satisfy exactly one branch and
/// boundary points return c(u).
pub fn octal_theta(c: &BaseCopula, gamma: &GammaDescriptor, u1: f64, u2: f64) -> f64 {
    let cu = c.eval(&[u1, u2]);
    let g = |a: f64, b: f64| gamma.eval(&[a, b]);
    if u1 < u2 && u2 < 0.5 {
        cu - g(u1, u2)
    } else if 0.5 < u2 && u2 < 1.0 - u1 {
        cu + g(u1, 1.0 - u2)
    } else if 1.0 - u2 < u1 && u1 < 0.5 {
        cu - g(1.0 - u2, u1)
    } else if 0.5 < u1 && u1 < u2 {
        cu + g(1.0 - u2, 1.0 - u1)
    } else if 0.5 < u2 && u2 < u1 {
        cu - g(1.0 - u1, 1.0 - u2)
    } else if 1.0 - u1 < u2 && u2 < 0.5 {
        cu + g(1.0 - u1, u2)
    } else if 0.5 < u1 && u1 < 1.0 - u2 {
        cu - g(u2, 1.0 - u1)
    } else if u2 < u1 && u1 < 0.5 {
        cu + g(u2, u1)
    } else {
        cu
    }
}
