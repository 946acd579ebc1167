//! Numerical certification layer: adaptive quadrature, density
//! convolution, two-sample Kolmogorov-Smirnov, chi-square uniformity,
//! rejection sampling, and moment-generating-function comparison.
//! Results are collected into a serializable [`VerificationReport`].

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gauss-Kronrod 15-point nodes on [0, 1] side (symmetric), abscissae.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];

/// Kronrod weights paired with XGK.
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// Gauss 7-point weights for the odd-indexed XGK nodes.
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let (fl, fr) = (f(c - h * x), f(c + h * x));
        let pair = if x == 0.0 { fl } else { fl + fr };
        kronrod += wk * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        } else if x == 0.0 {
            gauss += WG[3] * pair;
        }
    }
    // The center node belongs to both rules; the loop handles x = 0 once.
    let value = kronrod * h;
    let err = ((kronrod - gauss) * h).abs();
    (value, err)
}

const MAX_INTERVALS: usize = 4096;

/// Adaptive 1-D quadrature of `f` over [lo, hi] to absolute tolerance `tol`.
pub fn quad_1d<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(tol >= 1e-12) {
        return Err(Error::InvalidSpec(format!("quadrature tol must be >= 1e-12, got {tol}")));
    }
    if !(lo < hi) {
        return Err(Error::InvalidSpec("empty or inverted interval".into()));
    }
    // Max-heap of (error, lo, hi, value) by error.
    let mut segs: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = gk15(&f, lo, hi);
    segs.push((e, lo, hi, v));
    loop {
        let total_err: f64 = segs.iter().map(|s| s.0).sum();
        if total_err <= tol {
            return Ok(segs.iter().map(|s| s.3).sum());
        }
        if segs.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureBudget);
        }
        let worst = segs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .map(|(i, _)| i)
            .unwrap();
        let (_, a, b, _) = segs.swap_remove(worst);
        let mid = 0.5 * (a + b);
        let (v1, e1) = gk15(&f, a, mid);
        let (v2, e2) = gk15(&f, mid, b);
        segs.push((e1, a, mid, v1));
        segs.push((e2, mid, b, v2));
    }
}

/// Iterated adaptive quadrature of `f` over the box [lo, hi] x [lo2, hi2].
/// The inner integral is solved to a tenth of the requested tolerance.
pub fn quad_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    x_range: (f64, f64),
    y_range: (f64, f64),
    tol: f64,
) -> Result<f64> {
    let inner_tol = (tol / 10.0).max(1e-12);
    let width = x_range.1 - x_range.0;
    quad_1d(
        |x| {
            quad_1d(|y| f(x, y), y_range.0, y_range.1, inner_tol).unwrap_or(f64::NAN) / width
        },
        x_range.0,
        x_range.1,
        tol / width.abs().max(1.0),
    )
    .map(|v| v * width)
}

/// Truncation interval for an unbounded integrand: start at
/// mean +/- 12 standard deviations and double the half-width until the
/// boundary values fall below 1e-14 of the peak value at the mean.
pub fn truncation_interval<F: Fn(f64) -> f64>(f: F, mean: f64, sd: f64) -> (f64, f64) {
    let peak = f(mean).abs().max(f64::MIN_POSITIVE);
    let mut half = 12.0 * sd.max(1e-6);
    for _ in 0..8 {
        if f(mean - half).abs() < 1e-14 * peak && f(mean + half).abs() < 1e-14 * peak {
            break;
        }
        half *= 2.0;
    }
    (mean - half, mean + half)
}

/// Fixed-order Gauss-Legendre nodes and weights on [lo, hi], computed by
/// Newton iteration on Legendre polynomials.
pub fn gauss_legendre(order: usize, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let n = order;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Initial guess (Chebyshev-like).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        out.push((c + h * x, h * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Density of the sum of a bivariate density: s -> integral of
/// f(x, s - x) dx, evaluated on `grid`. The inner integration runs over
/// `x_range`; the result must integrate to 1 within 1e-4 on the grid or
/// the grid is rejected as too coarse.
pub fn sum_density_conv<F: Fn(f64, f64) -> f64>(
    f: F,
    x_range: (f64, f64),
    grid: &[f64],
) -> Result<Vec<f64>> {
    if grid.len() < 3 {
        return Err(Error::GridTooCoarse("need at least 3 grid points".into()));
    }
    let mut out = Vec::with_capacity(grid.len());
    for &s in grid {
        let v = quad_1d(|x| f(x, s - x), x_range.0, x_range.1, 1e-9)?;
        out.push(v);
    }
    // Trapezoid self-check for mass conservation.
    let mut mass = 0.0;
    for w in grid.windows(2).zip(out.windows(2)) {
        let (xs, ys) = w;
        mass += 0.5 * (ys[0] + ys[1]) * (xs[1] - xs[0]);
    }
    if (mass - 1.0).abs() > 1e-4 {
        return Err(Error::GridTooCoarse(format!(
            "convolved density integrates to {mass:.6}, expected 1 within 1e-4"
        )));
    }
    Ok(out)
}

/// Two-sample Kolmogorov-Smirnov result with asymptotic critical values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub crit_5pct: f64,
    pub crit_1pct: f64,
}

/// Sup-distance between the empirical CDFs of two samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidSpec("KS requires nonempty samples".into()));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let (n, m) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let scale = ((n + m) / (n * m)).sqrt();
    Ok(KsResult {
        statistic: d,
        crit_5pct: 1.358 * scale,
        crit_1pct: 1.628 * scale,
    })
}

/// Chi-square uniformity test of `samples` over [0, 1] with `bins` equal
/// bins; returns (statistic, p-value).
pub fn chi_square_uniform(samples: &[f64], bins: usize) -> Result<(f64, f64)> {
    if bins < 2 || samples.len() < 5 * bins {
        return Err(Error::InvalidSpec(
            "chi-square needs >= 2 bins and >= 5 samples per bin".into(),
        ));
    }
    let mut counts = vec![0usize; bins];
    for &u in samples {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::OutsideDomain(format!("sample {u} outside [0,1]")));
        }
        let k = ((u * bins as f64) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let expected = samples.len() as f64 / bins as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let diff = c as f64 - expected;
            diff * diff / expected
        })
        .sum();
    // Upper tail of chi-square with bins-1 degrees of freedom.
    let dof = (bins - 1) as f64;
    let p = statrs::function::gamma::gamma_ur(dof / 2.0, stat / 2.0);
    Ok((stat, p))
}

/// Exact sampling by rejection: draws from `proposal` (which must return
/// a point and its proposal density) are accepted with probability
/// density / (M * proposal). The envelope is spot-checked on the first
/// 10^4 proposals; a violation aborts, as does an acceptance rate below
/// 1% after a warm-up of 10^4 trials.
pub fn rejection_sample<T, D, P>(
    density: D,
    proposal: P,
    envelope: f64,
    n: usize,
    seed: u64,
) -> Result<(Vec<T>, f64)>
where
    D: Fn(&T) -> f64,
    P: Fn(&mut ChaCha12Rng) -> (T, f64),
{
    if !(envelope > 0.0) {
        return Err(Error::InvalidSpec("envelope must be positive".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut trials = 0u64;
    while out.len() < n {
        let (x, q) = proposal(&mut rng);
        trials += 1;
        let p = density(&x);
        let ratio = if q > 0.0 { p / q } else { f64::INFINITY };
        if trials <= 10_000 && ratio > envelope * (1.0 + 1e-9) {
            return Err(Error::EnvelopeViolation { ratio, envelope });
        }
        let u: f64 = rng.random();
        if u * envelope * q < p {
            out.push(x);
        }
        if trials == 10_000 && (out.len() as f64) < 0.01 * trials as f64 {
            return Err(Error::LowAcceptance(out.len() as f64 / trials as f64));
        }
    }
    Ok((out, n as f64 / trials as f64))
}

/// Max relative error between a quadrature MGF of a bivariate density
/// and a closed form over a grid of t points. Integration uses a fixed
/// tensorized Gauss-Legendre rule over `box_range` on each axis.
pub fn mgf_compare<F, G>(
    density: F,
    closed_form: G,
    t_grid: &[(f64, f64)],
    box_range: (f64, f64),
    gl_order: usize,
) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
    G: Fn(f64, f64) -> f64,
{
    let nodes = gauss_legendre(gl_order, box_range.0, box_range.1);
    let mut worst: f64 = 0.0;
    for &(t1, t2) in t_grid {
        let mut mgf = 0.0;
        for &(x, wx) in &nodes {
            let et1 = (t1 * x).exp();
            let mut inner = 0.0;
            for &(y, wy) in &nodes {
                inner += wy * (t2 * y).exp() * density(x, y);
            }
            mgf += wx * et1 * inner;
        }
        let reference = closed_form(t1, t2);
        if !reference.is_finite() || reference == 0.0 {
            return Err(Error::OutsideDomain(format!(
                "closed-form MGF not finite and nonzero at t = ({t1}, {t2})"
            )));
        }
        worst = worst.max(((mgf - reference) / reference).abs());
    }
    Ok(worst)
}

/// Kind of claim a verification records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClaimKind {
    Marginal,
    Sum,
    Subsum,
    SymmetricStat,
    Normalization,
    Mgf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Claim {
    pub name: String,
    pub kind: ClaimKind,
    pub metric: f64,
    pub threshold: f64,
    pub pass: bool,
    /// Sample size or grid resolution, whichever applies.
    pub resolution: u64,
    pub seed: Option<u64>,
}

/// Append-only collection of verification claims.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct VerificationReport {
    pub claims: Vec<Claim>,
}

impl VerificationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(
        &mut self,
        name: &str,
        kind: ClaimKind,
        metric: f64,
        threshold: f64,
        resolution: u64,
        seed: Option<u64>,
    ) -> bool {
        let pass = metric.abs() <= threshold;
        self.claims.push(Claim {
            name: name.to_string(),
            kind,
            metric,
            threshold,
            pass,
            resolution,
            seed,
        });
        pass
    }

    pub fn all_pass(&self) -> bool {
        self.claims.iter().all(|c| c.pass)
    }

    /// Flatten claims to CSV rows with a header; floats carry 17
    /// significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,kind,metric,threshold,pass,resolution,seed\n");
        for c in &self.claims {
            let kind = serde_json::to_string(&c.kind).unwrap();
            let kind = kind.trim_matches('"');
            let seed = c.seed.map(|v| v.to_string()).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{:.16e},{:.16e},{},{},{}\n",
                c.name, kind, c.metric, c.threshold, c.pass, c.resolution, seed
            ));
        }
        s
    }
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Normal density with the given mean and variance.
pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let z = x - mean;
    (-0.5 * z * z / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quad_constant() {
        assert_eq!(quad_1d(|_| 1.0, 0.0, 1.0, 1e-10).unwrap(), 1.0);
    }

    #[test]
    fn quad_normal_mass() {
        let (lo, hi) = truncation_interval(std_normal_pdf, 0.0, 1.0);
        let v = quad_1d(std_normal_pdf, lo, hi, 1e-11).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn quad_oscillatory() {
        // int_0^pi sin = 2.
        let v = quad_1d(f64::sin, 0.0, std::f64::consts::PI, 1e-10).unwrap();
        assert_relative_eq!(v, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn quad_rejects_bad_tol() {
        assert!(quad_1d(|_| 1.0, 0.0, 1.0, 1e-13).is_err());
        assert!(quad_1d(|_| 1.0, 1.0, 0.0, 1e-8).is_err());
    }

    #[test]
    fn quad_2d_product_mass() {
        let v = quad_2d(
            |x, y| std_normal_pdf(x) * std_normal_pdf(y),
            (-12.0, 12.0),
            (-12.0, 12.0),
            1e-8,
        )
        .unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-7);
    }

    #[test]
    fn gauss_legendre_exactness() {
        // Order-n rule integrates polynomials up to degree 2n-1 exactly.
        let nodes = gauss_legendre(8, -1.0, 3.0);
        let num: f64 = nodes.iter().map(|&(x, w)| w * x.powi(15)).sum();
        let exact = (3.0f64.powi(16) - (-1.0f64).powi(16)) / 16.0;
        assert_relative_eq!(num, exact, max_relative = 1e-12);
        let mass: f64 = nodes.iter().map(|&(_, w)| w).sum();
        assert_relative_eq!(mass, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn convolution_of_normals() {
        let grid: Vec<f64> = (0..241).map(|i| -12.0 + 0.1 * i as f64).collect();
        let out = sum_density_conv(
            |x, y| std_normal_pdf(x) * std_normal_pdf(y),
            (-14.0, 14.0),
            &grid,
        )
        .unwrap();
        for (s, v) in grid.iter().zip(&out) {
            assert!((v - normal_pdf(*s, 0.0, 2.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn convolution_rejects_coarse_grid() {
        // Grid covering only part of the support loses mass.
        let grid: Vec<f64> = (0..11).map(|i| -1.0 + 0.2 * i as f64).collect();
        let err = sum_density_conv(
            |x, y| std_normal_pdf(x) * std_normal_pdf(y),
            (-14.0, 14.0),
            &grid,
        );
        assert!(matches!(err, Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn ks_identical_samples() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
    }

    #[test]
    fn ks_calibration_null_and_alternative() {
        use rand::Rng;
        let mut below = 0;
        for seed in 0..20u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let a: Vec<f64> = (0..20_000).map(|_| normal_draw(&mut rng)).collect();
            let b: Vec<f64> = (0..20_000).map(|_| normal_draw(&mut rng)).collect();
            let r = ks_two_sample(&a, &b).unwrap();
            if r.statistic < r.crit_5pct {
                below += 1;
            }
        }
        assert!(below >= 18, "null KS below 5% crit in only {below}/20 repeats");

        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let a: Vec<f64> = (0..100_000).map(|_| normal_draw(&mut rng)).collect();
        let b: Vec<f64> = (0..100_000).map(|_| normal_draw(&mut rng) + 0.5).collect();
        let r = ks_two_sample(&a, &b).unwrap();
        assert!(r.statistic > r.crit_1pct);
        let _ = rng.random::<f64>();
    }

    fn normal_draw(rng: &mut ChaCha12Rng) -> f64 {
        // Box-Muller from two uniforms.
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        (-2.0 * u1.max(1e-300).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    #[test]
    fn chi_square_uniform_accepts_uniform() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let samples: Vec<f64> = (0..50_000).map(|_| rng.random()).collect();
        let (_, p) = chi_square_uniform(&samples, 50).unwrap();
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn chi_square_uniform_rejects_skewed() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let samples: Vec<f64> = (0..50_000).map(|_| rng.random::<f64>().powi(2)).collect();
        let (_, p) = chi_square_uniform(&samples, 50).unwrap();
        assert!(p < 1e-6);
    }

    #[test]
    fn rejection_identity_accepts_everything() {
        let (samples, rate) = rejection_sample(
            |x: &f64| std_normal_pdf(*x),
            |rng| {
                let x = normal_draw(rng);
                (x, std_normal_pdf(x))
            },
            1.0,
            1000,
            42,
        )
        .unwrap();
        assert_eq!(samples.len(), 1000);
        assert_eq!(rate, 1.0);
    }

    #[test]
    fn rejection_detects_envelope_violation() {
        let err = rejection_sample(
            |x: &f64| normal_pdf(*x, 0.0, 4.0),
            |rng| {
                let x = normal_draw(rng);
                (x, std_normal_pdf(x))
            },
            1.0,
            1000,
            42,
        );
        assert!(matches!(err, Err(Error::EnvelopeViolation { .. })));
    }

    #[test]
    fn rejection_aborts_on_low_acceptance() {
        let err = rejection_sample(
            |x: &f64| std_normal_pdf(*x),
            |rng| {
                let x = normal_draw(rng);
                (x, std_normal_pdf(x))
            },
            1000.0,
            1000,
            42,
        );
        assert!(matches!(err, Err(Error::LowAcceptance(_))));
    }

    #[test]
    fn rejection_is_deterministic() {
        let draw = || {
            rejection_sample(
                |x: &f64| std_normal_pdf(*x),
                |rng| (rng.random::<f64>() * 8.0 - 4.0, 1.0 / 8.0),
                8.0 * 0.4,
                500,
                11,
            )
            .unwrap()
        };
        let (a, _) = draw();
        let (b, _) = draw();
        assert_eq!(a, b);
    }

    #[test]
    fn mgf_pure_gaussian() {
        let grid: Vec<(f64, f64)> = (0..9)
            .flat_map(|i| (0..9).map(move |j| (-1.5 + 0.375 * i as f64, -1.5 + 0.375 * j as f64)))
            .collect();
        let err = mgf_compare(
            |x, y| std_normal_pdf(x) * std_normal_pdf(y),
            |t1, t2| (0.5 * (t1 * t1 + t2 * t2)).exp(),
            &grid,
            (-14.0, 14.0),
            80,
        )
        .unwrap();
        assert!(err < 1e-8, "err = {err}");
    }

    #[test]
    fn report_round_trip_and_csv() {
        let mut r = VerificationReport::new();
        assert!(r.record("mass", ClaimKind::Normalization, 2e-8, 1e-6, 401, None));
        assert!(!r.record("sum-ks", ClaimKind::Sum, 0.02, 0.01, 100_000, Some(42)));
        assert!(!r.all_pass());
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"kind\":\"normalization\""));
        let back: VerificationReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.claims.len(), 2);
        let csv = r.to_csv();
        assert!(csv.starts_with("name,kind,metric,threshold,pass,resolution,seed\n"));
        assert!(csv.contains("sum-ks,sum,"));
        assert!(csv.contains("42"));
    }
}
