//! The Meixner classes of probability laws and their monic orthogonal
//! polynomials.
//!
//! Each law is identified by a class (a type tag plus shape parameters
//! `a`, `b`) and a parameter pair `r = (m, s2)` of mean and variance.
//! All polynomials are monic and evaluated by the three-term upward
//! recurrence
//!
//! ```text
//! P_{n+1}(x) = (x - B_n) P_n(x) - C_n P_{n-1}(x),
//! B_n = m - n (a + b),   C_n = n (s2 + (n - 1) a b),
//! ```
//!
//! whose coefficients are derived from the exponential generating
//! function of the class and cross-validated against it in the tests.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Degree cap: squared norms grow factorially and overflow f64 well
/// before n = 100; we cap conservatively.
pub const N_MAX: usize = 32;

/// Tolerance for the integrality constraint of the binomial type.
pub const INTEGRALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeixnerType {
    /// a = b = 0: normal law, Hermite polynomials.
    NormalI,
    /// a = b != 0: shifted gamma law, Laguerre polynomials.
    GammaII,
    /// b = 0, a != 0: shifted/scaled Poisson law, Charlier polynomials.
    PoissonIII,
    /// a != b, ab > 0: shifted negative-binomial law, Meixner polynomials.
    NegBinomIV,
    /// a != b, ab < 0, s2/|ab| integer: shifted binomial law, Krawtchouk polynomials.
    BinomIV,
}

/// One law within a Meixner class: type tag, shape parameters and the
/// parameter pair r = (m, s2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeixnerSpec {
    #[serde(rename = "type")]
    pub type_tag: MeixnerType,
    pub a: f64,
    pub b: f64,
    pub m: f64,
    pub s2: f64,
}

impl MeixnerSpec {
    pub fn normal(m: f64, s2: f64) -> Self {
        MeixnerSpec { type_tag: MeixnerType::NormalI, a: 0.0, b: 0.0, m, s2 }
    }

    pub fn gamma(a: f64, m: f64, s2: f64) -> Self {
        MeixnerSpec { type_tag: MeixnerType::GammaII, a, b: a, m, s2 }
    }

    pub fn poisson(a: f64, m: f64, s2: f64) -> Self {
        MeixnerSpec { type_tag: MeixnerType::PoissonIII, a, b: 0.0, m, s2 }
    }

    pub fn neg_binom(a: f64, b: f64, m: f64, s2: f64) -> Self {
        MeixnerSpec { type_tag: MeixnerType::NegBinomIV, a, b, m, s2 }
    }

    pub fn binom(a: f64, b: f64, m: f64, s2: f64) -> Self {
        MeixnerSpec { type_tag: MeixnerType::BinomIV, a, b, m, s2 }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.s2.is_finite() || self.s2 <= 0.0 {
            return Err(Error::InvalidSpec(format!("s2 must be positive, got {}", self.s2)));
        }
        if !self.m.is_finite() || !self.a.is_finite() || !self.b.is_finite() {
            return Err(Error::InvalidSpec("non-finite parameter".into()));
        }
        match self.type_tag {
            MeixnerType::NormalI => {
                if self.a != 0.0 || self.b != 0.0 {
                    return Err(Error::InvalidSpec("NormalI requires a = b = 0".into()));
                }
            }
            MeixnerType::GammaII => {
                if self.a == 0.0 || self.a != self.b {
                    return Err(Error::InvalidSpec("GammaII requires a = b != 0".into()));
                }
            }
            MeixnerType::PoissonIII => {
                if self.a == 0.0 || self.b != 0.0 {
                    return Err(Error::InvalidSpec("PoissonIII requires b = 0, a != 0".into()));
                }
            }
            MeixnerType::NegBinomIV => {
                if self.a == self.b || self.a * self.b <= 0.0 {
                    return Err(Error::InvalidSpec("NegBinomIV requires a != b, ab > 0".into()));
                }
            }
            MeixnerType::BinomIV => {
                if self.a * self.b >= 0.0 {
                    return Err(Error::InvalidSpec("BinomIV requires ab < 0".into()));
                }
                let trials = self.trial_count();
                if (trials - trials.round()).abs() > INTEGRALITY_TOL || trials.round() < 1.0 {
                    return Err(Error::InvalidSpec(format!(
                        "BinomIV requires s2/|ab| to be a positive integer, got {trials}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of Bernoulli trials for the binomial type, s2 / |ab|.
    pub fn trial_count(&self) -> f64 {
        self.s2 / (self.a * self.b).abs()
    }

    /// True when both specs live in the same Meixner class (same type
    /// tag and shape parameters); only then do the additivity
    /// identities apply.
    pub fn same_class(&self, other: &Self) -> bool {
        self.type_tag == other.type_tag && self.a == other.a && self.b == other.b
    }

    /// Law of the sum of two independent variables of the same class:
    /// componentwise addition of the parameter pairs.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        if !self.same_class(other) {
            return Err(Error::ClassMismatch);
        }
        let out = MeixnerSpec { m: self.m + other.m, s2: self.s2 + other.s2, ..*self };
        out.validate()?;
        Ok(out)
    }

    /// Split r into n identically distributed parts, (m/n, s2/n).
    /// Rejected for the binomial type when integrality of the trial
    /// count is lost (the type is not infinitely divisible).
    pub fn split(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSpec("cannot split into 0 parts".into()));
        }
        let part = MeixnerSpec { m: self.m / n as f64, s2: self.s2 / n as f64, ..*self };
        part.validate()?;
        Ok(part)
    }

    /// Left/right endpoint offset m + s2/a shared by the shifted types.
    pub fn shift(&self) -> f64 {
        self.m + self.s2 / self.a
    }

    /// Monic orthogonal polynomial P_n(x; r) by upward recurrence.
    pub fn poly_eval(&self, n: usize, x: f64) -> Result<f64> {
        self.validate()?;
        if n > N_MAX {
            return Err(Error::DegreeCap(n, N_MAX));
        }
        let (mut prev, mut cur) = (1.0_f64, x - self.m);
        if n == 0 {
            return Ok(1.0);
        }
        for k in 1..n {
            let kf = k as f64;
            let b_k = self.m - kf * (self.a + self.b);
            let c_k = kf * (self.s2 + (kf - 1.0) * self.a * self.b);
            let next = (x - b_k) * cur - c_k * prev;
            prev = cur;
            cur = next;
        }
        Ok(cur)
    }

    /// Squared norm h_n = E[P_n(X)^2], by the per-type closed form.
    /// For the binomial type this is 0 once n exceeds the trial count
    /// (the Krawtchouk system terminates).
    pub fn poly_norm(&self, n: usize) -> Result<f64> {
        self.validate()?;
        if n > N_MAX {
            return Err(Error::DegreeCap(n, N_MAX));
        }
        let nf_fact = (1..=n).map(|k| k as f64).product::<f64>();
        Ok(match self.type_tag {
            MeixnerType::NormalI | MeixnerType::PoissonIII => self.s2.powi(n as i32) * nf_fact,
            MeixnerType::GammaII => {
                let shape = self.s2 / (self.a * self.a);
                let poch: f64 = (1..=n).map(|i| shape + i as f64 - 1.0).product();
                self.a.powi(2 * n as i32) * nf_fact * poch
            }
            MeixnerType::NegBinomIV | MeixnerType::BinomIV => {
                let ab = self.a * self.b;
                let ratio = self.s2 / ab;
                if self.type_tag == MeixnerType::BinomIV && n as f64 > self.trial_count().round() {
                    return Ok(0.0);
                }
                let poch: f64 = (1..=n).map(|i| ratio + i as f64 - 1.0).product();
                ab.powi(n as i32) * nf_fact * poch
            }
        })
    }

    /// Exponential generating function G(z, x; r) = sum_n P_n(x) z^n / n!.
    pub fn generating_fn(&self, z: f64, x: f64) -> Result<f64> {
        self.validate()?;
        let az = self.a * z;
        let bz = self.b * z;
        if az.abs() >= 1.0 || bz.abs() >= 1.0 {
            return Err(Error::OutsideDomain(format!(
                "z = {z} outside the convergence domain (|az|, |bz| < 1)"
            )));
        }
        Ok(match self.type_tag {
            MeixnerType::NormalI => ((x - self.m) * z - 0.5 * self.s2 * z * z).exp(),
            MeixnerType::GammaII => {
                let shape = self.s2 / (self.a * self.a);
                (1.0 - az).powf(-shape) * ((x - self.shift()) * z / (1.0 - az)).exp()
            }
            MeixnerType::PoissonIII => {
                let expo = (self.m - x) / self.a + self.s2 / (self.a * self.a);
                (self.s2 / self.a * z).exp() * (1.0 - az).powf(expo)
            }
            MeixnerType::NegBinomIV | MeixnerType::BinomIV => {
                let ab = self.a * self.b;
                let expo = (self.m - x) / (self.b - self.a) + self.s2 / (self.a * (self.b - self.a));
                (1.0 - bz).powf(-self.s2 / ab) * ((1.0 - bz) / (1.0 - az)).powf(expo)
            }
        })
    }

    /// Moment generating function M(t; r).
    pub fn mgf(&self, t: f64) -> Result<f64> {
        self.validate()?;
        Ok(match self.type_tag {
            MeixnerType::NormalI => (self.m * t + 0.5 * self.s2 * t * t).exp(),
            MeixnerType::GammaII => {
                // Exponent -s2/a^2, fixed so that M'(0) = m and
                // M''(0) - M'(0)^2 = s2 (checked in the tests).
                if 1.0 + self.a * t <= 0.0 {
                    return Err(Error::OutsideDomain(format!("t = {t} outside MGF domain")));
                }
                let shape = self.s2 / (self.a * self.a);
                (self.shift() * t).exp() * (1.0 + self.a * t).powf(-shape)
            }
            MeixnerType::PoissonIII => {
                let lambda = self.s2 / (self.a * self.a);
                (self.shift() * t + lambda * ((-self.a * t).exp() - 1.0)).exp()
            }
            MeixnerType::NegBinomIV | MeixnerType::BinomIV => {
                let base = (self.a - self.b) / (self.a - self.b * ((self.b - self.a) * t).exp());
                if base <= 0.0 {
                    return Err(Error::OutsideDomain(format!("t = {t} outside MGF domain")));
                }
                (self.shift() * t).exp() * base.powf(self.s2 / (self.a * self.b))
            }
        })
    }

    /// Density (continuous types) or pmf at a lattice point (discrete
    /// types). Points outside the support or off the lattice return 0.
    pub fn density(&self, x: f64) -> Result<f64> {
        self.validate()?;
        Ok(match self.type_tag {
            MeixnerType::NormalI => {
                let z = (x - self.m) / self.s2.sqrt();
                (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI * self.s2).sqrt()
            }
            MeixnerType::GammaII => {
                // X = shift + sign * Gamma(shape, scale |a|); support is
                // x > shift for a < 0, x < shift for a > 0.
                let shape = self.s2 / (self.a * self.a);
                let scale = self.a.abs();
                let g = if self.a < 0.0 { x - self.shift() } else { self.shift() - x };
                if g <= 0.0 {
                    0.0
                } else {
                    ((shape - 1.0) * g.ln() - g / scale - ln_gamma(shape) - shape * scale.ln())
                        .exp()
                }
            }
            MeixnerType::PoissonIII => {
                // Lattice { shift - a k : k in N }.
                let lambda = self.s2 / (self.a * self.a);
                match self.lattice_index(x) {
                    None => 0.0,
                    Some(k) => {
                        let kf = k as f64;
                        (kf * lambda.ln() - lambda - ln_gamma(kf + 1.0)).exp()
                    }
                }
            }
            MeixnerType::NegBinomIV => {
                // Normalize so that q = b/a lies in (0, 1); the law is
                // symmetric in (a, b) once the shift is re-expressed.
                let (a, b, shift) = self.negbinom_canonical();
                let p = self.s2 / (a * b);
                let q = b / a;
                match lattice_index_for(x, shift, b - a) {
                    None => 0.0,
                    Some(k) => {
                        let kf = k as f64;
                        (ln_gamma(p + kf) - ln_gamma(p) - ln_gamma(kf + 1.0)
                            + p * (1.0 - q).ln()
                            + kf * q.ln())
                        .exp()
                    }
                }
            }
            MeixnerType::BinomIV => {
                let trials = self.trial_count().round();
                let q = self.b / self.a;
                let pi = -q / (1.0 - q);
                match self.lattice_index(x) {
                    None => 0.0,
                    Some(k) if (k as f64) <= trials => {
                        let kf = k as f64;
                        (ln_gamma(trials + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(trials - kf + 1.0)
                            + kf * pi.ln()
                            + (trials - kf) * (1.0 - pi).ln())
                        .exp()
                    }
                    Some(_) => 0.0,
                }
            }
        })
    }

    fn negbinom_canonical(&self) -> (f64, f64, f64) {
        if (self.b / self.a).abs() < 1.0 {
            (self.a, self.b, self.shift())
        } else {
            (self.b, self.a, self.m + self.s2 / self.b)
        }
    }

    /// Lattice step and origin for the discrete types: support is
    /// { origin + step * k : k in N }.
    pub fn lattice(&self) -> Option<(f64, f64)> {
        match self.type_tag {
            MeixnerType::PoissonIII => Some((self.shift(), -self.a)),
            MeixnerType::NegBinomIV => {
                let (a, b, shift) = self.negbinom_canonical();
                Some((shift, b - a))
            }
            MeixnerType::BinomIV => Some((self.shift(), self.b - self.a)),
            _ => None,
        }
    }

    fn lattice_index(&self, x: f64) -> Option<usize> {
        let (origin, step) = self.lattice()?;
        lattice_index_for(x, origin, step)
    }

    /// Support points and pmf values for a discrete spec, up to `kmax`
    /// lattice steps (the binomial type truncates at the trial count).
    pub fn support_lattice(&self, kmax: usize) -> Result<Vec<(f64, f64)>> {
        self.validate()?;
        let (origin, step) = self
            .lattice()
            .ok_or_else(|| Error::InvalidSpec("continuous type has no lattice".into()))?;
        let kmax = if self.type_tag == MeixnerType::BinomIV {
            self.trial_count().round() as usize
        } else {
            kmax
        };
        (0..=kmax)
            .map(|k| {
                let x = origin + step * k as f64;
                Ok((x, self.density(x)?))
            })
            .collect()
    }
}

fn lattice_index_for(x: f64, origin: f64, step: f64) -> Option<usize> {
    let k = (x - origin) / step;
    let rounded = k.round();
    let scale = 1.0 + k.abs();
    if rounded >= -0.5 && (k - rounded).abs() <= 1e-9 * scale {
        Some(rounded as usize)
    } else {
        None
    }
}

/// Residual of the Runge additivity identity
/// P_n(x1 + x2; r1 + r2) - sum_k C(n,k) P_k(x1; r1) P_{n-k}(x2; r2).
pub fn runge_residual(
    r1: &MeixnerSpec,
    r2: &MeixnerSpec,
    n: usize,
    x1: f64,
    x2: f64,
) -> Result<f64> {
    let sum_spec = r1.convolve(r2)?;
    let lhs = sum_spec.poly_eval(n, x1 + x2)?;
    let mut rhs = 0.0;
    for k in 0..=n {
        rhs += binomial(n, k) * r1.poly_eval(k, x1)? * r2.poly_eval(n - k, x2)?;
    }
    Ok(lhs - rhs)
}

/// Residual of the multidimensional additivity identity
/// P_m(<x>; <r>) - sum_{<n> = m} multinomial(m; n) prod_i P_{n_i}(x_i; r_i).
pub fn runge_residual_multi(specs: &[MeixnerSpec], m: usize, x: &[f64]) -> Result<f64> {
    if specs.is_empty() || specs.len() != x.len() {
        return Err(Error::InvalidSpec("specs and x must have equal nonzero length".into()));
    }
    let mut total = specs[0];
    for s in &specs[1..] {
        total = total.convolve(s)?;
    }
    let lhs = total.poly_eval(m, x.iter().sum())?;
    let mut rhs = 0.0;
    for n in compositions(m, specs.len()) {
        let mut term = multinomial(m, &n);
        for (i, &ni) in n.iter().enumerate() {
            term *= specs[i].poly_eval(ni, x[i])?;
        }
        rhs += term;
    }
    Ok(lhs - rhs)
}

/// E[e^{tX} P_n(X; s2)] = e^{s2 t^2 / 2} s2^n t^n for a centered
/// normal law (the Hermite transform).
pub fn hermite_transform(n: usize, s2: f64, t: f64) -> f64 {
    (0.5 * s2 * t * t).exp() * s2.powi(n as i32) * t.powi(n as i32)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Multinomial coefficient m! / (n_1! ... n_d!) with <n> = m.
pub fn multinomial(m: usize, n: &[usize]) -> f64 {
    debug_assert_eq!(m, n.iter().sum::<usize>());
    let mut acc = 1.0;
    let mut seen = 0;
    for &ni in n {
        for j in 1..=ni {
            acc = acc * (seen + j) as f64 / j as f64;
        }
        seen += ni;
    }
    acc
}

/// All vectors of d nonnegative integers summing to m.
pub fn compositions(m: usize, d: usize) -> Vec<Vec<usize>> {
    fn rec(m: usize, d: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if d == 1 {
            prefix.push(m);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=m {
            prefix.push(k);
            rec(m - k, d - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, d, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn std_normal() -> MeixnerSpec {
        MeixnerSpec::normal(0.0, 1.0)
    }

    #[test]
    fn hermite_p3_example() {
        // P3(x; s2) = x^3 - 3 s2 x at x = 2, s2 = 1.
        let p = std_normal().poly_eval(3, 2.0).unwrap();
        assert_relative_eq!(p, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn p0_is_one_everywhere() {
        for spec in [
            std_normal(),
            MeixnerSpec::gamma(-1.0, 2.0, 2.0),
            MeixnerSpec::poisson(-1.0, 3.0, 3.0),
            MeixnerSpec::binom(-0.5, 0.5, 2.0, 1.0),
        ] {
            assert_eq!(spec.poly_eval(0, 17.3).unwrap(), 1.0);
            assert_eq!(spec.poly_norm(0).unwrap(), 1.0);
        }
    }

    #[test]
    fn gamma_p2_matches_series_coefficient() {
        // Oracle: extract the z^2 coefficient of the generating function
        // by high-order finite differencing in z.
        let spec = MeixnerSpec::gamma(-1.0, 1.0, 2.0);
        let x = 1.5;
        let h = 1e-2;
        // Central 5-point second derivative at z = 0 of G(z, x).
        let g = |z: f64| spec.generating_fn(z, x).unwrap();
        let d2 = (-g(2.0 * h) + 16.0 * g(h) - 30.0 * g(0.0) + 16.0 * g(-h) - g(-2.0 * h))
            / (12.0 * h * h);
        let p2 = spec.poly_eval(2, x).unwrap();
        assert_relative_eq!(p2, d2, max_relative = 1e-6);
    }

    #[test]
    fn norm_closed_forms() {
        // Type I: h_4 = s^8 * 4! = 24 for s2 = 1.
        assert_relative_eq!(std_normal().poly_norm(4).unwrap(), 24.0, epsilon = 1e-12);
        // Type II with a = -1, s2 = 2: h_2 = 1 * 2! * (2 * 3) = 12.
        let g = MeixnerSpec::gamma(-1.0, 0.0, 2.0);
        assert_relative_eq!(g.poly_norm(2).unwrap(), 12.0, epsilon = 1e-12);
    }

    #[test]
    fn norm_equals_product_of_recurrence_coefficients() {
        // h_n = prod_{k=1}^n C_k cross-validates the closed forms.
        for spec in [
            MeixnerSpec::normal(1.0, 2.5),
            MeixnerSpec::gamma(-0.7, 1.0, 1.3),
            MeixnerSpec::poisson(0.5, 0.0, 2.0),
            MeixnerSpec::neg_binom(2.0, 1.0, 0.0, 4.0),
            MeixnerSpec::binom(-1.0, 1.0, 0.0, 5.0),
        ] {
            for n in 0..=8 {
                let prod: f64 = (1..=n)
                    .map(|k| {
                        let kf = k as f64;
                        kf * (spec.s2 + (kf - 1.0) * spec.a * spec.b)
                    })
                    .product();
                assert_relative_eq!(spec.poly_norm(n).unwrap(), prod, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn krawtchouk_norm_terminates() {
        let spec = MeixnerSpec::binom(-1.0, 1.0, 0.0, 3.0);
        assert!(spec.poly_norm(3).unwrap() > 0.0);
        assert_eq!(spec.poly_norm(4).unwrap(), 0.0);
    }

    #[test]
    fn generating_fn_normal_closed_form() {
        let g = std_normal().generating_fn(0.5, 1.0).unwrap();
        assert_relative_eq!(g, (0.375_f64).exp(), epsilon = 1e-12);
        // z = 0 gives P_0 = 1 for any type.
        for spec in [
            std_normal(),
            MeixnerSpec::gamma(-2.0, 1.0, 3.0),
            MeixnerSpec::poisson(1.0, 0.0, 1.0),
            MeixnerSpec::neg_binom(-2.0, -1.0, 0.0, 2.0),
        ] {
            assert_eq!(spec.generating_fn(0.0, 0.37).unwrap(), 1.0);
        }
    }

    #[test]
    fn generating_fn_matches_partial_sums() {
        // sum_{n <= 12} P_n(x) z^n / n! agrees with G to 1e-8.
        let (z, x): (f64, f64) = (0.2, 0.7);
        for spec in [
            std_normal(),
            MeixnerSpec::gamma(-1.0, 0.5, 1.5),
            MeixnerSpec::poisson(-0.8, 0.0, 1.0),
            MeixnerSpec::neg_binom(1.5, 0.5, 0.0, 2.0),
            MeixnerSpec::binom(-0.6, 0.4, 0.0, 0.96),
        ] {
            let mut sum = 0.0;
            let mut fact = 1.0;
            for n in 0..=12 {
                if n > 0 {
                    fact *= n as f64;
                }
                sum += spec.poly_eval(n, x).unwrap() * z.powi(n as i32) / fact;
            }
            let g = spec.generating_fn(z, x).unwrap();
            assert_relative_eq!(sum, g, epsilon = 1e-8);
        }
    }

    #[test]
    fn mgf_normal() {
        let spec = MeixnerSpec::normal(0.0, 2.0);
        assert_relative_eq!(spec.mgf(1.0).unwrap(), 1.0_f64.exp(), epsilon = 1e-12);
    }

    #[test]
    fn mgf_moments_fix_gamma_exponent() {
        // M'(0) = m and M''(0) - M'(0)^2 = s2 certify the printed
        // exponent ambiguity (-s2/a^2 is correct).
        let h = 1e-4;
        for spec in [
            MeixnerSpec::gamma(-0.5, 1.0, 2.0),
            MeixnerSpec::gamma(0.8, -1.0, 1.5),
            MeixnerSpec::poisson(0.5, 2.0, 1.0),
            MeixnerSpec::neg_binom(-2.0, -0.5, 1.0, 2.0),
            MeixnerSpec::binom(-1.0, 0.5, 0.0, 1.0),
        ] {
            let f = |t: f64| spec.mgf(t).unwrap();
            let m1 = (f(h) - f(-h)) / (2.0 * h);
            let m2 = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
            assert_relative_eq!(m1, spec.m, max_relative = 1e-6, epsilon = 1e-6);
            assert_relative_eq!(m2 - m1 * m1, spec.s2, max_relative = 1e-4, epsilon = 1e-4);
        }
    }

    #[test]
    fn mgf_domain_errors() {
        let spec = MeixnerSpec::gamma(-0.5, 0.0, 1.0);
        assert!(spec.mgf(2.0).is_err()); // 1 + at = 0
        assert!(spec.mgf(1.9).is_ok());
    }

    #[test]
    fn mgf_additivity() {
        let r1 = MeixnerSpec::gamma(-1.0, 1.0, 2.0);
        let r2 = MeixnerSpec::gamma(-1.0, -1.0, 3.0);
        let sum = r1.convolve(&r2).unwrap();
        assert_eq!((sum.m, sum.s2), (0.0, 5.0));
        for t in [-0.3, 0.1, 0.3, 0.7] {
            assert_relative_eq!(
                sum.mgf(t).unwrap(),
                r1.mgf(t).unwrap() * r2.mgf(t).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn convolve_rejects_class_mismatch() {
        let r1 = std_normal();
        let r2 = MeixnerSpec::gamma(-1.0, 0.0, 1.0);
        assert!(matches!(r1.convolve(&r2), Err(Error::ClassMismatch)));
    }

    #[test]
    fn binom_split_integrality() {
        let spec = MeixnerSpec::binom(-1.0, 1.0, 0.0, 4.0);
        assert!(spec.split(2).is_ok());
        assert!(spec.split(3).is_err());
    }

    #[test]
    fn normal_density_at_zero() {
        let d = std_normal().density(0.0).unwrap();
        assert_relative_eq!(d, 1.0 / (2.0 * std::f64::consts::PI).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn gamma_density_support() {
        // a = -1, s2 = 1, m = 1: support is x > m + s2/a = 0.
        let spec = MeixnerSpec::gamma(-1.0, 1.0, 1.0);
        assert_eq!(spec.density(0.0).unwrap(), 0.0);
        assert_eq!(spec.density(-1.0).unwrap(), 0.0);
        assert!(spec.density(0.5).unwrap() > 0.0);
    }

    #[test]
    fn discrete_pmf_sums_and_moments() {
        for spec in [
            MeixnerSpec::poisson(-1.0, 0.0, 2.0),
            MeixnerSpec::poisson(0.7, 1.0, 1.5),
            MeixnerSpec::neg_binom(2.0, 1.0, 0.0, 3.0),
            MeixnerSpec::neg_binom(-1.0, -3.0, 1.0, 2.0),
            MeixnerSpec::binom(-1.0, 1.0, 0.0, 6.0),
            MeixnerSpec::binom(0.5, -1.5, 2.0, 3.0),
        ] {
            let pts = spec.support_lattice(400).unwrap();
            let total: f64 = pts.iter().map(|&(_, p)| p).sum();
            let mean: f64 = pts.iter().map(|&(x, p)| x * p).sum();
            let var: f64 = pts.iter().map(|&(x, p)| (x - mean) * (x - mean) * p).sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-9);
            assert_relative_eq!(mean, spec.m, epsilon = 1e-7, max_relative = 1e-7);
            assert_relative_eq!(var, spec.s2, epsilon = 1e-6, max_relative = 1e-6);
        }
    }

    #[test]
    fn runge_identity_degree_one_exact() {
        let r = std_normal();
        let res = runge_residual(&r, &r, 1, 0.4, -2.2).unwrap();
        assert_eq!(res, 0.0);
    }

    #[test]
    fn runge_identity_small_residuals() {
        let cases = [
            (MeixnerSpec::normal(0.0, 1.0), MeixnerSpec::normal(0.0, 2.0)),
            (MeixnerSpec::gamma(-1.0, 2.0, 1.0), MeixnerSpec::gamma(-1.0, 2.0, 1.0)),
            (MeixnerSpec::poisson(-1.0, 0.0, 1.0), MeixnerSpec::poisson(-1.0, 1.0, 2.0)),
            (MeixnerSpec::neg_binom(2.0, 1.0, 0.0, 3.0), MeixnerSpec::neg_binom(2.0, 1.0, 1.0, 2.0)),
        ];
        for (r1, r2) in cases {
            let conv = r1.convolve(&r2).unwrap();
            for n in 0..=8 {
                let res = runge_residual(&r1, &r2, n, 0.3, -1.1).unwrap();
                let scale = 1.0 + conv.poly_eval(n, 0.3 - 1.1).unwrap().abs();
                assert!(res.abs() < 1e-9 * scale, "residual {res} at n = {n}");
            }
        }
    }

    #[test]
    fn runge_identity_multidimensional() {
        let specs = [
            MeixnerSpec::normal(0.0, 1.0),
            MeixnerSpec::normal(1.0, 0.5),
            MeixnerSpec::normal(-1.0, 2.0),
        ];
        for m in 0..=5 {
            let res = runge_residual_multi(&specs, m, &[0.3, -0.7, 1.4]).unwrap();
            assert!(res.abs() < 1e-9, "residual {res} at m = {m}");
        }
    }

    #[test]
    fn hermite_transform_values() {
        assert_relative_eq!(hermite_transform(0, 1.0, 0.7), (0.245_f64).exp(), epsilon = 1e-14);
        assert_relative_eq!(
            hermite_transform(2, 0.5, 1.0),
            (0.25_f64).exp() * 0.25,
            epsilon = 1e-14
        );
    }

    #[test]
    fn degree_cap_enforced() {
        assert!(std_normal().poly_eval(N_MAX + 1, 0.0).is_err());
        assert!(std_normal().poly_norm(N_MAX + 1).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = MeixnerSpec::gamma(-1.0, 0.5, 2.0);
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"type\":\"GammaII\""));
        let back: MeixnerSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
    }
}
