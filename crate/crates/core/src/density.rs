//! Perturbed product densities built from finite orthogonal-polynomial
//! expansions: tilt selection, the nonnegativity constant kappa, density
//! evaluation, closed-form moment generating functions, and the worked
//! presets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::CoefficientTable;
use crate::meixner::{MeixnerSpec, MeixnerType, N_MAX};

/// Perturbed density spec: product of `base` densities plus
/// `kappa` times a tilted polynomial perturbation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionDensitySpec {
    pub base: Vec<MeixnerSpec>,
    pub tilt: Vec<MeixnerSpec>,
    #[serde(rename = "H")]
    pub table: CoefficientTable,
    #[serde(rename = "N")]
    pub n_max: usize,
    pub kappa: f64,
}

impl ExpansionDensitySpec {
    pub fn d(&self) -> usize {
        self.base.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.base.len();
        if d < 2 || self.tilt.len() != d || self.table.d() != d {
            return Err(Error::InvalidSpec(
                "base, tilt and table dimensions must agree and be >= 2".into(),
            ));
        }
        if self.n_max > N_MAX {
            return Err(Error::DegreeCap(self.n_max, N_MAX));
        }
        if self.table.max_total_degree() > self.n_max {
            return Err(Error::InvalidSpec(format!(
                "table holds degree {} above N = {}",
                self.table.max_total_degree(),
                self.n_max
            )));
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::InvalidSpec("kappa must be >= 0".into()));
        }
        for (b, t) in self.base.iter().zip(&self.tilt) {
            b.validate()?;
            t.validate()?;
            check_domination(b, t)?;
        }
        Ok(())
    }

    /// Tilted polynomial perturbation (kappa not included):
    /// prod_i tilt_density(x_i) * sum_n H_n prod_i P_{n_i}(x_i; tilt_i).
    pub fn perturbation(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.d() {
            return Err(Error::InvalidSpec("point dimension mismatch".into()));
        }
        let mut weight = 1.0;
        for (t, &xi) in self.tilt.iter().zip(x) {
            weight *= t.density(xi)?;
        }
        if weight == 0.0 {
            return Ok(0.0);
        }
        let mut sum = 0.0;
        for (n, h) in self.table.entries() {
            let mut term = h;
            for (i, &ni) in n.iter().enumerate() {
                if ni > 0 {
                    term *= self.tilt[i].poly_eval(ni, x[i])?;
                }
            }
            sum += term;
        }
        Ok(weight * sum)
    }

    /// Product of the base densities at `x`.
    pub fn base_density(&self, x: &[f64]) -> Result<f64> {
        let mut p = 1.0;
        for (b, &xi) in self.base.iter().zip(x) {
            p *= b.density(xi)?;
        }
        Ok(p)
    }

    /// Full density: product of bases + kappa * perturbation.
    pub fn density_eval(&self, x: &[f64]) -> Result<f64> {
        let v = self.base_density(x)? + self.kappa * self.perturbation(x)?;
        debug_assert!(v >= -1e-12, "density {v} below -1e-12 at {x:?}; kappa too large");
        Ok(v)
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    /// Largest kappa keeping the density nonnegative:
    /// 1 / sup_x (-perturbation(x) / base(x))^+, found by grid search on
    /// a compact box (base means +/- 10 base standard deviations, grown
    /// until the boundary ratio is negligible) plus local refinement.
    /// Returns +infinity when the perturbation is nonnegative everywhere.
    pub fn kappa_max(&self) -> Result<f64> {
        self.validate()?;
        let d = self.d();
        let ratio = |x: &[f64]| -> f64 {
            let base = self.base_density(x).unwrap_or(0.0);
            if base <= 0.0 {
                return 0.0;
            }
            -self.perturbation(x).unwrap_or(0.0) / base
        };
        let centers: Vec<f64> = self.base.iter().map(|b| b.m).collect();
        let mut radii: Vec<f64> = self.base.iter().map(|b| 10.0 * b.s2.sqrt()).collect();
        let per_axis = grid_points_per_axis(d);
        for _ in 0..6 {
            let axes: Vec<Vec<f64>> = centers
                .iter()
                .zip(&radii)
                .map(|(&c, &r)| linspace(c - r, c + r, per_axis))
                .collect();
            let (best_val, best_idx, boundary_val) = grid_search(&axes, &ratio);
            if best_val <= 0.0 {
                return Ok(f64::INFINITY);
            }
            if boundary_val > 1e-6 * best_val {
                for r in &mut radii {
                    *r *= 2.0;
                }
                continue;
            }
            let mut point: Vec<f64> = best_idx
                .iter()
                .enumerate()
                .map(|(i, &k)| axes[i][k])
                .collect();
            let mut step: Vec<f64> = radii.iter().map(|r| 2.0 * r / (per_axis - 1) as f64).collect();
            let refined = refine_max(&ratio, &mut point, &mut step, best_val);
            return Ok(1.0 / refined);
        }
        Err(Error::GridTooCoarse(
            "ratio does not decay on the search box; tail domination may fail".into(),
        ))
    }
}

/// Structural tail-domination check: the tilt density divided by the
/// base density must vanish at infinity faster than any polynomial grows.
fn check_domination(base: &MeixnerSpec, tilt: &MeixnerSpec) -> Result<()> {
    match (base.type_tag, tilt.type_tag) {
        (MeixnerType::NormalI, MeixnerType::NormalI) => {
            if tilt.s2 < base.s2 {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!(
                    "tilt variance {} must be strictly below base variance {}",
                    tilt.s2, base.s2
                )))
            }
        }
        (MeixnerType::GammaII, MeixnerType::GammaII) => {
            if tilt.a * base.a <= 0.0 {
                return Err(Error::InvalidSpec("tilt scale must keep the base orientation".into()));
            }
            if tilt.a.abs() >= base.a.abs() {
                return Err(Error::InvalidSpec(format!(
                    "tilt scale |{}| must be strictly below base scale |{}|",
                    tilt.a, base.a
                )));
            }
            let (c_base, c_tilt) = (base.shift(), tilt.shift());
            if (c_base - c_tilt).abs() > 1e-9 {
                return Err(Error::InvalidSpec(format!(
                    "tilt support endpoint {c_tilt} differs from base endpoint {c_base}"
                )));
            }
            Ok(())
        }
        _ => Err(Error::InvalidSpec(
            "tilted construction supports normal and gamma bases only; use build_finite for \
             discrete laws"
                .into(),
        )),
    }
}

/// Tilt parameters for a continuous base: same class, strictly
/// lighter tail, identical support.
pub fn select_tilt(base: &MeixnerSpec, shrink: f64) -> Result<MeixnerSpec> {
    if !(shrink > 0.0 && shrink < 1.0) {
        return Err(Error::InvalidSpec(format!("shrink must lie in (0,1), got {shrink}")));
    }
    base.validate()?;
    match base.type_tag {
        MeixnerType::NormalI => Ok(MeixnerSpec::normal(base.m, shrink * base.s2)),
        MeixnerType::GammaII => {
            let a_bar = shrink.sqrt() * base.a;
            let s2_bar = shrink * base.s2;
            // Keep the support endpoint: m_bar + s2_bar/a_bar = m + s2/a.
            let m_bar = base.m + base.s2 / base.a - s2_bar / a_bar;
            Ok(MeixnerSpec::gamma(a_bar, m_bar, s2_bar))
        }
        _ => Err(Error::InvalidSpec(
            "tilt selection applies to normal and gamma bases; discrete laws use build_finite"
                .into(),
        )),
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn grid_points_per_axis(d: usize) -> usize {
    // Keep the total grid around 401^2 points regardless of dimension.
    let n = (160_801f64).powf(1.0 / d as f64).round() as usize;
    let n = n.clamp(11, 401);
    if n % 2 == 0 { n + 1 } else { n }
}

/// Number of worker threads: the MM_THREADS environment variable if set,
/// otherwise the available parallelism.
pub fn worker_count() -> usize {
    std::env::var("MM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        })
}

/// Exhaustive evaluation of `f` on the tensor grid, parallel over
/// disjoint chunks of the flat index range. Returns the max value, its
/// multi-index (first attaining index on ties), and the max over points
/// touching the box boundary. The result does not depend on chunking.
fn grid_search<F: Fn(&[f64]) -> f64 + Sync>(
    axes: &[Vec<f64>],
    f: &F,
) -> (f64, Vec<usize>, f64) {
    let d = axes.len();
    let total: usize = axes.iter().map(|a| a.len()).product();
    let workers = worker_count().min(total).max(1);
    let chunk = total.div_ceil(workers);

    let eval_range = |lo: usize, hi: usize| -> (f64, usize, f64) {
        let mut best = f64::NEG_INFINITY;
        let mut best_flat = lo;
        let mut boundary = f64::NEG_INFINITY;
        let mut x = vec![0.0f64; d];
        let mut idx = vec![0usize; d];
        for flat in lo..hi {
            let mut rem = flat;
            let mut on_boundary = false;
            for i in (0..d).rev() {
                let len = axes[i].len();
                idx[i] = rem % len;
                rem /= len;
                if idx[i] == 0 || idx[i] == len - 1 {
                    on_boundary = true;
                }
                x[i] = axes[i][idx[i]];
            }
            let v = f(&x);
            if v > best {
                best = v;
                best_flat = flat;
            }
            if on_boundary && v > boundary {
                boundary = v;
            }
        }
        (best, best_flat, boundary)
    };

    let results: Vec<(f64, usize, f64)> = if workers == 1 {
        vec![eval_range(0, total)]
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let lo = w * chunk;
                    let hi = ((w + 1) * chunk).min(total);
                    let eval = &eval_range;
                    s.spawn(move || eval(lo, hi))
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        })
    };

    let mut best = f64::NEG_INFINITY;
    let mut best_flat = 0;
    let mut boundary = f64::NEG_INFINITY;
    for (v, flat, b) in results {
        if v > best || (v == best && flat < best_flat) {
            best = v;
            best_flat = flat;
        }
        boundary = boundary.max(b);
    }
    let mut idx = vec![0usize; d];
    let mut rem = best_flat;
    for i in (0..d).rev() {
        idx[i] = rem % axes[i].len();
        rem /= axes[i].len();
    }
    (best, idx, boundary)
}

/// Local maximization by a shrinking 5^d pattern around `point`.
fn refine_max<F: Fn(&[f64]) -> f64>(
    f: &F,
    point: &mut Vec<f64>,
    step: &mut Vec<f64>,
    mut best: f64,
) -> f64 {
    let d = point.len();
    let offsets = [-2.0f64, -1.0, 0.0, 1.0, 2.0];
    for _ in 0..60 {
        let mut improved = false;
        let mut candidate = point.clone();
        let mut x = vec![0.0f64; d];
        let total = 5usize.pow(d as u32);
        for flat in 0..total {
            let mut rem = flat;
            for i in 0..d {
                x[i] = point[i] + offsets[rem % 5] * step[i] * 0.5;
                rem /= 5;
            }
            let v = f(&x);
            if v > best {
                best = v;
                candidate.copy_from_slice(&x);
                improved = true;
            }
        }
        if improved {
            point.copy_from_slice(&candidate);
        } else {
            for s in step.iter_mut() {
                *s *= 0.5;
            }
            if step.iter().all(|&s| s < 1e-10) {
                break;
            }
        }
    }
    best
}

/// Named worked presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Stoyanov,
    Example3,
    Example4,
    Example5(usize),
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stoyanov" => Ok(Preset::Stoyanov),
            "example3" => Ok(Preset::Example3),
            "example4" => Ok(Preset::Example4),
            _ => {
                if let Some(ds) = s.strip_prefix("example5:") {
                    let d: usize = ds
                        .parse()
                        .map_err(|_| Error::UnknownPreset(s.to_string()))?;
                    if d < 2 {
                        return Err(Error::UnknownPreset(s.to_string()));
                    }
                    Ok(Preset::Example5(d))
                } else {
                    Err(Error::UnknownPreset(s.to_string()))
                }
            }
        }
    }
}

/// Builds the spec of a named preset over standard normal bases.
/// `shrink` sets the tilt variance (tilt s2 = shrink * base s2); kappa
/// starts at 0 and is filled by the caller or by `kappa_max`.
pub fn preset(name: Preset, shrink: f64) -> Result<ExpansionDensitySpec> {
    let build = |d: usize, entries: &[(&[usize], f64)]| -> Result<ExpansionDensitySpec> {
        let base = vec![MeixnerSpec::normal(0.0, 1.0); d];
        let tilt = base
            .iter()
            .map(|b| select_tilt(b, shrink))
            .collect::<Result<Vec<_>>>()?;
        Ok(ExpansionDensitySpec {
            base,
            tilt,
            table: CoefficientTable::from_entries(d, entries)?,
            n_max: 4,
            kappa: 0.0,
        })
    };
    match name {
        Preset::Example3 => build(2, &[(&[1, 3], -1.0), (&[3, 1], 1.0)]),
        // The classical two-variable construction is the antisymmetric
        // table at tilt variance 1/2. Its traditional constant relates
        // to this spec's kappa by kappa_classical = kappa / tilt
        // variance, because the classical form folds the tilt
        // normalization into its constant.
        Preset::Stoyanov => build(2, &[(&[1, 3], -1.0), (&[3, 1], 1.0)]),
        Preset::Example4 => build(2, &[(&[1, 3], 1.0), (&[3, 1], 1.0), (&[2, 2], -2.0)]),
        Preset::Example5(d) => {
            let mut entries: Vec<(Vec<usize>, f64)> = Vec::new();
            for i in 0..d {
                for j in (i + 1)..d {
                    for (ni, nj, h) in [(1usize, 3usize, 1.0), (3, 1, 1.0), (2, 2, -2.0)] {
                        let mut n = vec![0usize; d];
                        n[i] = ni;
                        n[j] = nj;
                        entries.push((n, h));
                    }
                }
            }
            let refs: Vec<(&[usize], f64)> =
                entries.iter().map(|(n, h)| (n.as_slice(), *h)).collect();
            build(d, &refs)
        }
    }
}

/// Closed-form moment generating functions for the exchangeable presets.
/// `spec` supplies the base variances, tilt variance and kappa.
pub fn mgf_closed_form(name: Preset, spec: &ExpansionDensitySpec, t: &[f64]) -> Result<f64> {
    let d = spec.d();
    if t.len() != d {
        return Err(Error::InvalidSpec("t dimension mismatch".into()));
    }
    let s2_bar = spec.tilt[0].s2;
    let base_exp: f64 = spec
        .base
        .iter()
        .zip(t)
        .map(|(b, &tk)| b.m * tk + 0.5 * b.s2 * tk * tk)
        .sum();
    let tilt_exp: f64 = t.iter().map(|&tk| 0.5 * s2_bar * tk * tk).sum();
    match name {
        Preset::Example4 => {
            if d != 2 {
                return Err(Error::InvalidSpec("example4 is two-dimensional".into()));
            }
            let (t1, t2) = (t[0], t[1]);
            Ok(base_exp.exp()
                + spec.kappa
                    * s2_bar.powi(4)
                    * tilt_exp.exp()
                    * t1
                    * t2
                    * (t1 - t2)
                    * (t1 - t2))
        }
        Preset::Example5(dd) => {
            if dd != d {
                return Err(Error::InvalidSpec("example5 dimension mismatch".into()));
            }
            let mut pair_sum = 0.0;
            for i in 0..d {
                for j in (i + 1)..d {
                    let diff = t[i] - t[j];
                    pair_sum += t[i] * t[j] * diff * diff;
                }
            }
            Ok(base_exp.exp() + spec.kappa * s2_bar.powi(4) * tilt_exp.exp() * pair_sum)
        }
        _ => Err(Error::UnknownPreset(
            "closed-form MGF exists for example4 and example5 only".into(),
        )),
    }
}

/// Perturbed pmf on a finite lattice (all bases of the finite binomial
/// type, no tilt). Returns the support points with their pmf values and
/// the exact kappa_max, a finite minimum over the lattice.
pub fn build_finite(
    base: &[MeixnerSpec],
    table: &CoefficientTable,
    kappa: f64,
) -> Result<(Vec<(Vec<f64>, f64)>, f64)> {
    let d = base.len();
    if d != table.d() {
        return Err(Error::InvalidSpec("base and table dimensions differ".into()));
    }
    for b in base {
        b.validate()?;
        if b.type_tag != MeixnerType::BinomIV {
            return Err(Error::InvalidSpec("build_finite requires finite binomial bases".into()));
        }
    }
    let supports: Vec<Vec<f64>> = base
        .iter()
        .map(|b| Ok(b.support_lattice(0)?.into_iter().map(|(x, _)| x).collect()))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    let mut worst_ratio = 0.0f64;
    let total: usize = supports.iter().map(|s| s.len()).product();
    for flat in 0..total {
        let mut rem = flat;
        let mut x = vec![0.0f64; d];
        for i in (0..d).rev() {
            x[i] = supports[i][rem % supports[i].len()];
            rem /= supports[i].len();
        }
        let mut p = 1.0;
        for (b, &xi) in base.iter().zip(&x) {
            p *= b.density(xi)?;
        }
        let mut sum = 0.0;
        for (n, h) in table.entries() {
            let mut term = h;
            for (i, &ni) in n.iter().enumerate() {
                if ni > 0 {
                    term *= base[i].poly_eval(ni, x[i])?;
                }
            }
            sum += term;
        }
        if p > 0.0 {
            worst_ratio = worst_ratio.max(-sum);
        }
        out.push((x, p * (1.0 + kappa * sum)));
    }
    let kappa_max = if worst_ratio > 0.0 { 1.0 / worst_ratio } else { f64::INFINITY };
    if kappa > kappa_max {
        return Err(Error::InvalidSpec(format!(
            "kappa {kappa} exceeds exact kappa_max {kappa_max}"
        )));
    }
    Ok((out, kappa_max))
}
