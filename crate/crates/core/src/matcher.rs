//! Recombination of a copula density with marginal laws into a joint
//! density, plus symmetric-statistic sampling utilities.

use std::str::FromStr;
use std::sync::Arc;

use crate::copula::theta::CopulaSpec;
use crate::error::{Error, Result};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A one-dimensional marginal law given by evaluators. The inverse cdf
/// is optional; quantile falls back to bisection at 1e-12.
#[derive(Clone)]
pub struct MarginalDescriptor {
    cdf: RealFn,
    pdf: RealFn,
    inv_cdf: Option<RealFn>,
    pub support: (f64, f64),
    pub symmetric_about: Option<f64>,
}

impl std::fmt::Debug for MarginalDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MarginalDescriptor")
            .field("support", &self.support)
            .field("symmetric_about", &self.symmetric_about)
            .field("has_inverse", &self.inv_cdf.is_some())
            .finish()
    }
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Complementary error function, Cody's rational approximations
/// (relative error a few ulps across the range).
fn erfc(x: f64) -> f64 {
    const A: [f64; 5] = [
        3.16112374387056560e0,
        1.13864154151050156e2,
        3.77485237685302021e2,
        3.20937758913846947e3,
        1.85777706184603153e-1,
    ];
    const B: [f64; 4] = [
        2.36012909523441209e1,
        2.44024637934444173e2,
        1.28261652607737228e3,
        2.84423683343917062e3,
    ];
    const C: [f64; 9] = [
        5.64188496988670089e-1,
        8.88314979438837594e0,
        6.61191906371416295e1,
        2.98635138197400131e2,
        8.81952221241769090e2,
        1.71204761263407058e3,
        2.05107837782607147e3,
        1.23033935479799725e3,
        2.15311535474403846e-8,
    ];
    const D: [f64; 8] = [
        1.57449261107098347e1,
        1.17693950891312499e2,
        5.37181101862009858e2,
        1.62138957456669019e3,
        3.29079923573345963e3,
        4.36261909014324716e3,
        3.43936767414372164e3,
        1.23033935480374942e3,
    ];
    const P: [f64; 6] = [
        3.05326634961232344e-1,
        3.60344899949804439e-1,
        1.25781726111229246e-1,
        1.60837851487422766e-2,
        6.58749161529837803e-4,
        1.63153871373020978e-2,
    ];
    const Q: [f64; 5] = [
        2.56852019228982242e0,
        1.87295284992346047e0,
        5.27905102951428412e-1,
        6.05183413124413191e-2,
        2.33520497626869185e-3,
    ];
    let ax = x.abs();
    let result = if ax <= 0.46875 {
        let y = ax * ax;
        let mut xnum = A[4] * y;
        let mut xden = y;
        for i in 0..3 {
            xnum = (xnum + A[i]) * y;
            xden = (xden + B[i]) * y;
        }
        return 1.0 - x * (xnum + A[3]) / (xden + B[3]);
    } else if ax <= 4.0 {
        let mut xnum = C[8] * ax;
        let mut xden = ax;
        for i in 0..7 {
            xnum = (xnum + C[i]) * ax;
            xden = (xden + D[i]) * ax;
        }
        let r = (xnum + C[7]) / (xden + D[7]);
        // Split exp(-x^2) to limit cancellation in the argument.
        let ysq = (ax * 16.0).trunc() / 16.0;
        let del = (ax - ysq) * (ax + ysq);
        (-ysq * ysq).exp() * (-del).exp() * r
    } else if ax < 26.6 {
        let y = 1.0 / (ax * ax);
        let mut xnum = P[5] * y;
        let mut xden = y;
        for i in 0..4 {
            xnum = (xnum + P[i]) * y;
            xden = (xden + Q[i]) * y;
        }
        const FRAC_1_SQRT_PI: f64 = 5.641895835477562869e-1;
        let mut r = y * (xnum + P[4]) / (xden + Q[4]);
        r = (FRAC_1_SQRT_PI - r) / ax;
        let ysq = (ax * 16.0).trunc() / 16.0;
        let del = (ax - ysq) * (ax + ysq);
        (-ysq * ysq).exp() * (-del).exp() * r
    } else {
        0.0
    };
    if x < 0.0 {
        2.0 - result
    } else {
        result
    }
}

/// Inverse standard normal cdf: rational approximation refined by one
/// Newton step, absolute error below 1e-13 well inside (0, 1).
pub fn norm_inv_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    // Reduce to the lower half so the Newton correction always
    // evaluates the cdf in the accurate erfc regime.
    if p > 0.5 {
        return -norm_inv_cdf(1.0 - p);
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    x - (std_normal_cdf(x) - p) / crate::verify::std_normal_pdf(x)
}

impl MarginalDescriptor {
    pub fn from_fns(
        cdf: RealFn,
        pdf: RealFn,
        inv_cdf: Option<RealFn>,
        support: (f64, f64),
        symmetric_about: Option<f64>,
    ) -> Self {
        MarginalDescriptor { cdf, pdf, inv_cdf, support, symmetric_about }
    }

    pub fn normal(mean: f64, var: f64) -> Result<Self> {
        if var <= 0.0 {
            return Err(Error::InvalidSpec("normal variance must be positive".into()));
        }
        let sd = var.sqrt();
        Ok(MarginalDescriptor {
            cdf: Arc::new(move |x| std_normal_cdf((x - mean) / sd)),
            pdf: Arc::new(move |x| crate::verify::normal_pdf(x, mean, var)),
            inv_cdf: Some(Arc::new(move |p| mean + sd * norm_inv_cdf(p))),
            support: (f64::NEG_INFINITY, f64::INFINITY),
            symmetric_about: Some(mean),
        })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        (self.cdf)(x)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        (self.pdf)(x)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::OutsideDomain(format!("quantile level {p} outside (0, 1)")));
        }
        if let Some(inv) = &self.inv_cdf {
            return Ok(inv(p));
        }
        let anchor = self.symmetric_about.unwrap_or(0.0);
        let mut lo = self.support.0;
        if !lo.is_finite() {
            lo = anchor - 1.0;
            let mut step = 1.0;
            while self.cdf(lo) > p {
                step *= 2.0;
                lo -= step;
                if step > 1e12 {
                    return Err(Error::OutsideDomain(format!("no lower bracket for level {p}")));
                }
            }
        }
        let mut hi = self.support.1;
        if !hi.is_finite() {
            hi = anchor + 1.0;
            let mut step = 1.0;
            while self.cdf(hi) < p {
                step *= 2.0;
                hi += step;
                if step > 1e12 {
                    return Err(Error::OutsideDomain(format!("no upper bracket for level {p}")));
                }
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo < 1e-12 * (1.0 + mid.abs()) {
                break;
            }
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// phi(x) = theta(Phi(x_1), .., Phi(x_d)) prod phi(x_k). The matching
/// guarantee only applies when the marginals are identical.
pub fn recombine<T: Fn(&[f64]) -> f64>(
    theta: T,
    marginals: &[MarginalDescriptor],
    x: &[f64],
) -> Result<f64> {
    if marginals.len() != x.len() || marginals.is_empty() {
        return Err(Error::InvalidSpec("recombine dimension mismatch".into()));
    }
    let mut prod = 1.0;
    let mut u = Vec::with_capacity(x.len());
    for (m, &xi) in marginals.iter().zip(x) {
        let p = m.pdf(xi);
        if p == 0.0 {
            return Ok(0.0);
        }
        prod *= p;
        u.push(m.cdf(xi));
    }
    Ok(theta(&u) * prod)
}

/// Whether all descriptors agree on a quantile probe grid (the
/// condition for the marginal/sum matching guarantee to hold).
pub fn identical_marginals(marginals: &[MarginalDescriptor]) -> bool {
    let Some((first, rest)) = marginals.split_first() else {
        return true;
    };
    let probes: Vec<f64> = (1..40).map(|i| i as f64 / 40.0).collect();
    for m in rest {
        for &p in &probes {
            let x = match first.quantile(p) {
                Ok(x) => x,
                Err(_) => return false,
            };
            if (m.cdf(x) - p).abs() > 1e-9 {
                return false;
            }
        }
    }
    true
}

/// A copula spec paired with marginal laws; supports density evaluation
/// and exact sampling via the copula sampler plus quantile transforms.
#[derive(Debug, Clone)]
pub struct MatchedJoint {
    pub copula: CopulaSpec,
    pub marginals: Vec<MarginalDescriptor>,
}

impl MatchedJoint {
    pub fn new(copula: CopulaSpec, marginals: Vec<MarginalDescriptor>) -> Result<Self> {
        copula.validate()?;
        if marginals.len() != copula.d {
            return Err(Error::InvalidSpec("marginal count must match copula dimension".into()));
        }
        Ok(MatchedJoint { copula, marginals })
    }

    /// True when the marginal/sum matching guarantee applies.
    pub fn guaranteed(&self) -> bool {
        identical_marginals(&self.marginals)
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        recombine(|u| self.copula.theta_eval(u).unwrap_or(f64::NAN), &self.marginals, x)
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let us = self.copula.sample(n, seed)?;
        us.into_iter()
            .map(|u| {
                u.iter()
                    .zip(&self.marginals)
                    .map(|(&ui, m)| m.quantile(ui))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetricStat {
    Sum,
    Max,
    Min,
    SumSquares,
    Product,
}

impl SymmetricStat {
    pub fn apply(&self, x: &[f64]) -> f64 {
        match self {
            SymmetricStat::Sum => x.iter().sum(),
            SymmetricStat::Max => x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            SymmetricStat::Min => x.iter().copied().fold(f64::INFINITY, f64::min),
            SymmetricStat::SumSquares => x.iter().map(|v| v * v).sum(),
            SymmetricStat::Product => x.iter().product(),
        }
    }

    pub const ALL: [SymmetricStat; 5] = [
        SymmetricStat::Sum,
        SymmetricStat::Max,
        SymmetricStat::Min,
        SymmetricStat::SumSquares,
        SymmetricStat::Product,
    ];
}

impl FromStr for SymmetricStat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(SymmetricStat::Sum),
            "max" => Ok(SymmetricStat::Max),
            "min" => Ok(SymmetricStat::Min),
            "sum-of-squares" => Ok(SymmetricStat::SumSquares),
            "product" => Ok(SymmetricStat::Product),
            other => Err(Error::InvalidSpec(format!("unknown symmetric statistic '{other}'"))),
        }
    }
}

/// Draws n joint samples and applies the symmetric statistic.
pub fn push_symmetric_stat<S>(sampler: S, g: SymmetricStat, n: usize, seed: u64) -> Result<Vec<f64>>
where
    S: Fn(usize, u64) -> Result<Vec<Vec<f64>>>,
{
    let joint = sampler(n, seed)?;
    Ok(joint.iter().map(|x| g.apply(x)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::region::{all_alphas, tau, Perm};
    use crate::density::{preset, Preset};
    use crate::verify::{ks_two_sample, normal_pdf, quad_1d, std_normal_pdf};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn norm_inv_accuracy() {
        for i in 1..200 {
            let p = i as f64 / 200.0;
            let x = norm_inv_cdf(p);
            // Round trip through the cdf (itself good to ~1e-12).
            assert!((std_normal_cdf(x) - p).abs() < 2e-12, "p = {p}");
        }
        assert!((norm_inv_cdf(0.5)).abs() < 1e-15);
        // High-precision reference quantiles.
        for (p, x) in [
            (0.975, 1.9599639845400545),
            (0.025, -1.9599639845400545),
            (0.01, -2.3263478740408408),
            (0.9, 1.2815515655446004),
            (1e-6, -4.753424308822899),
        ] {
            assert!((norm_inv_cdf(p) - x).abs() < 1e-13, "p = {p}: {}", norm_inv_cdf(p));
        }
    }

    #[test]
    fn normal_descriptor_invariants() {
        let m = MarginalDescriptor::normal(2.0, 4.0).unwrap();
        for &p in &[0.001, 0.1, 0.5, 0.9, 0.999] {
            let x = m.quantile(p).unwrap();
            assert!((m.cdf(x) - p).abs() < 1e-10);
        }
        // pdf is the cdf derivative.
        for &x in &[-1.0, 0.5, 2.0, 4.5] {
            let h = 1e-5;
            let fd = (m.cdf(x + h) - m.cdf(x - h)) / (2.0 * h);
            assert!((fd - m.pdf(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn bisection_fallback_matches_analytic() {
        let mean = 2.0;
        let sd = 2.0;
        let numeric = MarginalDescriptor::from_fns(
            Arc::new(move |x| std_normal_cdf((x - mean) / sd)),
            Arc::new(move |x| normal_pdf(x, mean, sd * sd)),
            None,
            (f64::NEG_INFINITY, f64::INFINITY),
            Some(mean),
        );
        let analytic = MarginalDescriptor::normal(mean, sd * sd).unwrap();
        for &p in &[0.01, 0.3, 0.5, 0.7, 0.99] {
            let a = numeric.quantile(p).unwrap();
            let b = analytic.quantile(p).unwrap();
            assert!((a - b).abs() < 1e-10, "p = {p}: {a} vs {b}");
        }
        assert!(numeric.quantile(0.0).is_err());
    }

    #[test]
    fn recombine_independence_is_product() {
        let ms = vec![
            MarginalDescriptor::normal(0.0, 1.0).unwrap(),
            MarginalDescriptor::normal(0.0, 1.0).unwrap(),
        ];
        let v = recombine(|_| 1.0, &ms, &[0.3, -1.2]).unwrap();
        let expect = std_normal_pdf(0.3) * std_normal_pdf(-1.2);
        assert!((v - expect).abs() < 1e-15);
    }

    #[test]
    fn example8_marginals_by_quadrature() {
        // d = 2 signed epsilon with standard normal marginals: the
        // x1-marginal of the recombined density is standard normal.
        let spec = CopulaSpec::signed_uniform(2, 0.5).unwrap();
        let ms = vec![
            MarginalDescriptor::normal(0.0, 1.0).unwrap(),
            MarginalDescriptor::normal(0.0, 1.0).unwrap(),
        ];
        for &x2 in &[-1.5, -0.3, 0.0001, 0.8, 2.1] {
            let m = quad_1d(
                |x1| {
                    recombine(
                        |u| spec.theta_eval(u).unwrap_or(f64::NAN),
                        &ms,
                        &[x1, x2],
                    )
                    .unwrap()
                },
                -10.0,
                10.0,
                1e-9,
            )
            .unwrap();
            assert!((m - std_normal_pdf(x2)).abs() < 1e-6, "x2 = {x2}: {m}");
        }
    }

    #[test]
    fn stoyanov_copula_is_octal() {
        // Extract the copula density of the quartic perturbed-normal
        // preset and check the octal structure: across the orbit of a
        // reference point the deviation from 1 has equal magnitude and
        // the sign alternates with (-1)^|alpha| sgn(beta). With a
        // positive kappa the reference region carries the + sign (the
        // mirrored orientation of the eight-branch display).
        let spec = preset(Preset::Stoyanov, 0.5).unwrap();
        let kappa = 0.9 * spec.kappa_max().unwrap();
        let spec = spec.with_kappa(kappa);
        let marg = MarginalDescriptor::normal(0.0, 1.0).unwrap();
        let copula_density = |u: &[f64]| -> f64 {
            let x: Vec<f64> = u.iter().map(|&ui| marg.quantile(ui).unwrap()).collect();
            spec.density_eval(&x).unwrap() / (marg.pdf(x[0]) * marg.pdf(x[1]))
        };
        let q = [0.15, 0.35];
        let reference = copula_density(&q) - 1.0;
        assert!(reference > 1e-6, "reference deviation {reference}");
        for alpha in all_alphas(2) {
            for beta in Perm::all(2) {
                let eps = crate::copula::epsilon::EpsilonAssignment::Signed.eval(&alpha, &beta);
                let u = tau(&alpha, &beta.inverse().apply(&q));
                let dev = copula_density(&u) - 1.0;
                assert!(
                    (dev - eps * reference).abs() < 1e-9,
                    "octal structure broken at alpha {alpha:?}, beta {beta:?}: {dev}"
                );
            }
        }
    }

    #[test]
    fn symmetric_stat_behaviour() {
        let x = [1.0, -2.0, 3.0];
        assert_eq!(SymmetricStat::Sum.apply(&x), 2.0);
        assert_eq!(SymmetricStat::Max.apply(&x), 3.0);
        assert_eq!(SymmetricStat::Min.apply(&x), -2.0);
        assert_eq!(SymmetricStat::SumSquares.apply(&x), 14.0);
        assert_eq!(SymmetricStat::Product.apply(&x), -6.0);
        // Permutation invariance is bit-exact for sum-free stats and
        // holds for sums of the same addends in any pairing here.
        let perm = [3.0, 1.0, -2.0];
        assert_eq!(SymmetricStat::Max.apply(&x), SymmetricStat::Max.apply(&perm));
        assert_eq!(SymmetricStat::Min.apply(&x), SymmetricStat::Min.apply(&perm));
        assert!("sum".parse::<SymmetricStat>().is_ok());
        assert!("sum-of-squares".parse::<SymmetricStat>().is_ok());
        assert!("median".parse::<SymmetricStat>().is_err());
    }

    #[test]
    fn push_stat_moments() {
        let sampler = |n: usize, seed: u64| -> crate::error::Result<Vec<Vec<f64>>> {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            Ok((0..n)
                .map(|_| {
                    (0..2)
                        .map(|_| {
                            let (a, b): (f64, f64) = (rng.random(), rng.random());
                            (-2.0 * a.max(1e-300).ln()).sqrt()
                                * (2.0 * std::f64::consts::PI * b).cos()
                        })
                        .collect()
                })
                .collect())
        };
        let n = 100_000;
        let sums = push_symmetric_stat(sampler, SymmetricStat::Sum, n, 77).unwrap();
        let mean = sums.iter().sum::<f64>() / n as f64;
        let var = sums.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se_mean = (2.0 / n as f64).sqrt();
        assert!(mean.abs() < 4.0 * se_mean, "mean {mean}");
        let se_var = 2.0 * (2.0 / n as f64).sqrt();
        assert!((var - 2.0).abs() < 4.0 * se_var, "var {var}");
        // Determinism per seed.
        let again = push_symmetric_stat(sampler, SymmetricStat::Sum, 100, 77).unwrap();
        assert_eq!(&sums[..100], &again[..]);
    }

    #[test]
    fn matched_joint_sum_matches() {
        // Signed epsilon with standard normal marginals: the sum of the
        // matched pair is distributed like the independent sum N(0, 2).
        let joint = MatchedJoint::new(
            CopulaSpec::signed_uniform(2, 0.5).unwrap(),
            vec![
                MarginalDescriptor::normal(0.0, 1.0).unwrap(),
                MarginalDescriptor::normal(0.0, 1.0).unwrap(),
            ],
        )
        .unwrap();
        assert!(joint.guaranteed());
        let n = 40_000;
        let sums = push_symmetric_stat(|n, s| joint.sample(n, s), SymmetricStat::Sum, n, 31).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let reference: Vec<f64> = (0..n)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.random(), rng.random());
                std::f64::consts::SQRT_2
                    * (-2.0 * a.max(1e-300).ln()).sqrt()
                    * (2.0 * std::f64::consts::PI * b).cos()
            })
            .collect();
        let ks = ks_two_sample(&sums, &reference).unwrap();
        assert!(ks.statistic < ks.crit_1pct, "ks {} crit {}", ks.statistic, ks.crit_1pct);
    }

    #[test]
    fn non_identical_marginals_flagged() {
        let joint = MatchedJoint::new(
            CopulaSpec::signed_uniform(2, 0.5).unwrap(),
            vec![
                MarginalDescriptor::normal(0.0, 1.0).unwrap(),
                MarginalDescriptor::normal(0.0, 4.0).unwrap(),
            ],
        )
        .unwrap();
        assert!(!joint.guaranteed());
    }
}
