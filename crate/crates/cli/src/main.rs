//! Command-line front end: spec construction, verification, sampling
//! and preset reproduction. Exit codes: 0 success, 1 verification
//! failure, 2 usage or input error.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;

use distmatch::copula::epsilon::{check_conditions, prop5_check, EpsilonAssignment, PROP5_D_MAX};
use distmatch::copula::similar::{similar_density, similar_group};
use distmatch::copula::theta::{BaseCopula, CopulaSpec, GammaDescriptor};
use distmatch::density::{preset, ExpansionDensitySpec, Preset};
use distmatch::expansion::RESIDUAL_TOL;
use distmatch::matcher::{MarginalDescriptor, MatchedJoint};
use distmatch::meixner::{runge_residual, runge_residual_multi, MeixnerSpec, MeixnerType};
use distmatch::verify::{
    chi_square_uniform, ks_two_sample, normal_pdf, quad_1d, quad_2d, rejection_sample,
    sum_density_conv, ClaimKind, VerificationReport,
};

/// Default RNG seed for every stochastic subcommand.
const DEFAULT_SEED: u64 = 7297;

#[derive(Parser)]
#[command(name = "distmatch", version, about = "Joint laws matching marginals and sums")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Orthogonal-polynomial identity suite.
    Poly {
        #[command(subcommand)]
        sub: PolyCmd,
    },
    /// Validate an expansion spec and fill in kappa.
    BuildExpansion {
        #[arg(long)]
        spec: PathBuf,
        /// "auto" computes the nonnegativity bound kappa_max.
        #[arg(long, default_value = "auto")]
        kappa: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a copula spec and report its balance conditions.
    BuildCopula {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recombine a copula spec with marginal laws.
    Match {
        #[arg(long)]
        copula: PathBuf,
        /// Marginal descriptor, e.g. normal:0,1. Repeat per coordinate
        /// or give once to use for all coordinates.
        #[arg(long)]
        marginal: Vec<String>,
        /// Emit joint samples (default) or a d=2 density grid.
        #[arg(long, default_value_t = false)]
        density_grid: bool,
        #[arg(long, default_value_t = 1000)]
        n: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 41)]
        grid: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the verification suite on an expansion or copula spec.
    Verify {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_enum, default_value_t = Emit::Json)]
        emit: Emit,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 81)]
        grid: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw joint samples from an expansion or copula spec.
    Sample {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce a named worked example.
    Preset {
        /// stoyanov | example3 | example4 | example5:D | example8:D |
        /// theorem6-normals
        name: String,
        #[arg(long, default_value_t = false)]
        verify: bool,
        #[arg(long, default_value_t = 0.5)]
        shrink: f64,
        #[arg(long, default_value = "auto")]
        kappa: String,
        #[arg(long, value_enum, default_value_t = Emit::Json)]
        emit: Emit,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PolyCmd {
    /// Convolution identities, norms and transform checks.
    Check,
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> Result<u8> {
    match Cli::parse().cmd {
        Cmd::Poly { sub: PolyCmd::Check } => poly_check(),
        Cmd::BuildExpansion { spec, kappa, out } => build_expansion(&spec, &kappa, out.as_deref()),
        Cmd::BuildCopula { spec, out } => build_copula(&spec, out.as_deref()),
        Cmd::Match { copula, marginal, density_grid, n, seed, grid, out } => {
            run_match(&copula, &marginal, density_grid, n as usize, seed, grid as usize, out.as_deref())
        }
        Cmd::Verify { spec, emit, seed, grid, out } => {
            run_verify(&spec, emit, seed, grid as usize, out.as_deref())
        }
        Cmd::Sample { spec, n, seed, out } => run_sample(&spec, n as usize, seed, out.as_deref()),
        Cmd::Preset { name, verify, shrink, kappa, emit, seed, out } => {
            run_preset(&name, verify, shrink, &kappa, emit, seed, out.as_deref())
        }
    }
}

fn write_output(out: Option<&std::path::Path>, data: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, data).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{data}");
            Ok(())
        }
    }
}

fn finish_report(report: &VerificationReport, emit: Emit, out: Option<&std::path::Path>) -> Result<u8> {
    let data = match emit {
        Emit::Json => serde_json::to_string_pretty(report)? + "\n",
        Emit::Csv => report.to_csv(),
    };
    write_output(out, &data)?;
    for c in &report.claims {
        eprintln!(
            "{} {} (metric {:.3e}, threshold {:.3e})",
            if c.pass { "pass" } else { "FAIL" },
            c.name,
            c.metric,
            c.threshold
        );
    }
    Ok(if report.all_pass() { 0 } else { 1 })
}

fn poly_check() -> Result<u8> {
    let mut report = VerificationReport::new();
    let pairs: [(&str, MeixnerSpec, MeixnerSpec); 3] = [
        ("normal", MeixnerSpec::normal(0.0, 1.0), MeixnerSpec::normal(0.5, 2.0)),
        ("gamma", MeixnerSpec::gamma(-1.0, 1.0, 2.0), MeixnerSpec::gamma(-1.0, 0.0, 1.0)),
        ("poisson", MeixnerSpec::poisson(0.5, 0.0, 2.0), MeixnerSpec::poisson(0.5, 1.0, 1.0)),
    ];
    for (name, r1, r2) in &pairs {
        let mut worst: f64 = 0.0;
        for n in 0..=8 {
            for &(x, y) in &[(0.3, -1.1), (1.7, 0.4), (-0.6, 2.2)] {
                let res = runge_residual(r1, r2, n, x, y)?;
                let conv = r1.convolve(r2)?;
                let scale = 1.0 + conv.poly_eval(n, x + y)?.abs();
                worst = worst.max(res.abs() / scale);
            }
        }
        report.record(&format!("runge-{name}"), ClaimKind::Sum, worst, 1e-9, 9, None);
    }
    let specs = vec![
        MeixnerSpec::normal(0.0, 1.0),
        MeixnerSpec::normal(1.0, 0.5),
        MeixnerSpec::normal(-0.5, 2.0),
    ];
    let mut worst: f64 = 0.0;
    for m in 0..=5 {
        worst = worst.max(runge_residual_multi(&specs, m, &[0.3, -0.8, 1.1])?.abs());
    }
    report.record("runge-multi-normal-d3", ClaimKind::Sum, worst, 1e-9, 6, None);

    // Norms against direct quadrature for the normal class.
    let spec = MeixnerSpec::normal(0.3, 1.7);
    let mut worst: f64 = 0.0;
    for n in 0..=4 {
        let moment = quad_1d(
            |x| {
                let p = spec.poly_eval(n, x).unwrap();
                p * p * spec.density(x).unwrap()
            },
            spec.m - 14.0 * spec.s2.sqrt(),
            spec.m + 14.0 * spec.s2.sqrt(),
            1e-11,
        )?;
        let h = spec.poly_norm(n)?;
        worst = worst.max((moment - h).abs() / h);
    }
    report.record("norm-quadrature-normal", ClaimKind::Normalization, worst, 1e-7, 5, None);
    finish_report(&report, Emit::Json, None)
}

fn load_expansion(path: &std::path::Path) -> Result<ExpansionDensitySpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec: ExpansionDensitySpec =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    spec.validate()?;
    Ok(spec)
}

fn load_copula(path: &std::path::Path) -> Result<CopulaSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec: CopulaSpec =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    spec.validate()?;
    Ok(spec)
}

enum AnySpec {
    Expansion(ExpansionDensitySpec),
    Copula(CopulaSpec),
}

fn load_any(path: &std::path::Path) -> Result<AnySpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(spec) = serde_json::from_str::<ExpansionDensitySpec>(&text) {
        spec.validate()?;
        return Ok(AnySpec::Expansion(spec));
    }
    match serde_json::from_str::<CopulaSpec>(&text) {
        Ok(spec) => {
            spec.validate()?;
            Ok(AnySpec::Copula(spec))
        }
        Err(e) => Err(anyhow!("{} is neither an expansion nor a copula spec: {e}", path.display())),
    }
}

fn build_expansion(path: &std::path::Path, kappa: &str, out: Option<&std::path::Path>) -> Result<u8> {
    let spec = load_expansion(path)?;
    let kappa = if kappa == "auto" {
        let k = spec.kappa_max()?;
        eprintln!("kappa_max = {k:.12}");
        k
    } else {
        kappa.parse::<f64>().context("--kappa must be 'auto' or a float")?
    };
    let spec = spec.with_kappa(kappa);
    spec.validate()?;
    write_output(out, &(serde_json::to_string_pretty(&spec)? + "\n"))?;
    Ok(0)
}

fn build_copula(path: &std::path::Path, out: Option<&std::path::Path>) -> Result<u8> {
    let spec = load_copula(path)?;
    let cond = check_conditions(&spec.epsilon, spec.d)?;
    write_output(out, &(serde_json::to_string_pretty(&spec)? + "\n"))?;
    let mut report = VerificationReport::new();
    report.record("condition-23-total", ClaimKind::Normalization, cond.cond23.worst, 0.0, 1, None);
    report.record("condition-24-symmetric", ClaimKind::SymmetricStat, cond.cond24.worst, 0.0, 1, None);
    for (k, c) in cond.cond25.iter().enumerate() {
        report.record(&format!("condition-25-k{}", k + 1), ClaimKind::Subsum, c.worst, 0.0, 1, None);
    }
    report.record("condition-26-marginal", ClaimKind::Marginal, cond.cond26.worst, 0.0, 1, None);
    for c in &report.claims {
        eprintln!("{} {}", if c.pass { "pass" } else { "FAIL" }, c.name);
    }
    Ok(if report.all_pass() { 0 } else { 1 })
}

fn parse_marginal(s: &str) -> Result<MarginalDescriptor> {
    let rest = s
        .strip_prefix("normal:")
        .ok_or_else(|| anyhow!("unsupported marginal '{s}' (expected normal:MEAN,VAR)"))?;
    let (m, v) = rest
        .split_once(',')
        .ok_or_else(|| anyhow!("marginal '{s}' needs MEAN,VAR"))?;
    Ok(MarginalDescriptor::normal(m.trim().parse()?, v.trim().parse()?)?)
}

fn csv_header(d: usize) -> String {
    (1..=d).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",") + "\n"
}

fn samples_csv(samples: &[Vec<f64>], d: usize) -> String {
    let mut s = csv_header(d);
    for row in samples {
        let line = row.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",");
        s.push_str(&line);
        s.push('\n');
    }
    s
}

fn run_match(
    copula_path: &std::path::Path,
    marginal_args: &[String],
    density_grid: bool,
    n: usize,
    seed: u64,
    grid: usize,
    out: Option<&std::path::Path>,
) -> Result<u8> {
    let copula = load_copula(copula_path)?;
    if marginal_args.is_empty() {
        bail!("at least one --marginal is required");
    }
    let mut marginals: Vec<MarginalDescriptor> =
        marginal_args.iter().map(|s| parse_marginal(s)).collect::<Result<_>>()?;
    if marginals.len() == 1 && copula.d > 1 {
        marginals = vec![marginals[0].clone(); copula.d];
    }
    let joint = MatchedJoint::new(copula, marginals)?;
    eprintln!(
        "matching guarantee: {}",
        if joint.guaranteed() { "yes (identical marginals)" } else { "no (non-identical marginals)" }
    );
    if density_grid {
        if joint.copula.d != 2 {
            bail!("--density-grid is implemented for d = 2");
        }
        let mut s = String::from("x1,x2,density\n");
        let axis = |m: &MarginalDescriptor| -> Result<Vec<f64>> {
            let lo = m.quantile(1e-4)?;
            let hi = m.quantile(1.0 - 1e-4)?;
            Ok((0..grid).map(|i| lo + (hi - lo) * i as f64 / (grid - 1) as f64).collect())
        };
        let xs = axis(&joint.marginals[0])?;
        let ys = axis(&joint.marginals[1])?;
        for &x1 in &xs {
            for &x2 in &ys {
                let v = joint.density(&[x1, x2])?;
                writeln!(s, "{x1:.16e},{x2:.16e},{v:.16e}")?;
            }
        }
        write_output(out, &s)?;
    } else {
        let samples = joint.sample(n, seed)?;
        write_output(out, &samples_csv(&samples, joint.copula.d))?;
    }
    Ok(0)
}

fn verify_expansion(
    spec: &ExpansionDensitySpec,
    seed: u64,
    grid: usize,
    report: &mut VerificationReport,
) -> Result<()> {
    let d = spec.d();
    let violations = spec.table.check_marginal_condition().len() as f64;
    report.record("table-marginal-condition", ClaimKind::Marginal, violations, 0.0, 1, None);
    let sum_res = spec.table.check_sum_condition(&spec.tilt)?;
    let worst = sum_res.values().fold(0.0f64, |m, v| m.max(v.abs()));
    report.record("table-sum-condition", ClaimKind::Sum, worst, RESIDUAL_TOL, 1, None);
    if d > 2 {
        for k in 0..d {
            let subset: Vec<usize> = (0..d).filter(|&i| i != k).collect();
            let res = spec.table.check_subsum_condition(&subset, &spec.tilt)?;
            let worst = res.values().fold(0.0f64, |m, v| m.max(v.abs()));
            report.record(
                &format!("table-subsum-excluding-{}", k + 1),
                ClaimKind::Subsum,
                worst,
                RESIDUAL_TOL,
                1,
                None,
            );
        }
    }
    let kmax = spec.kappa_max()?;
    // Informational claim; f64::MAX keeps the threshold JSON-representable.
    report.record("kappa-max", ClaimKind::Normalization, kmax, f64::MAX, 1, None);
    let excess = (spec.kappa - kmax).max(0.0);
    report.record("kappa-within-kappa-max", ClaimKind::Normalization, excess, 1e-9, 1, None);
    if excess > 1e-9 {
        // The numeric checks below assume a genuine density.
        return Ok(());
    }

    if d == 2 {
        let r0 = 12.0 * spec.base[0].s2.sqrt();
        let r1 = 12.0 * spec.base[1].s2.sqrt();
        let (c0, c1) = (spec.base[0].m, spec.base[1].m);
        let mass = quad_2d(
            |x, y| spec.density_eval(&[x, y]).unwrap_or(f64::NAN),
            (c0 - r0, c0 + r0),
            (c1 - r1, c1 + r1),
            1e-9,
        )?;
        report.record("normalization", ClaimKind::Normalization, mass - 1.0, 1e-7, grid as u64, None);

        let mut worst: f64 = 0.0;
        for i in 0..21 {
            let x1 = c0 - 4.0 * spec.base[0].s2.sqrt()
                + 8.0 * spec.base[0].s2.sqrt() * i as f64 / 20.0;
            let m = quad_1d(
                |x2| spec.density_eval(&[x1, x2]).unwrap_or(f64::NAN),
                c1 - r1,
                c1 + r1,
                1e-9,
            )?;
            worst = worst.max((m - spec.base[0].density(x1)?).abs());
        }
        report.record("marginal-grid", ClaimKind::Marginal, worst, 1e-6, 21, None);

        let conv_base = spec.base[0].convolve(&spec.base[1])?;
        let lo = conv_base.m - 8.0 * conv_base.s2.sqrt();
        let hi = conv_base.m + 8.0 * conv_base.s2.sqrt();
        let pts: Vec<f64> =
            (0..grid).map(|i| lo + (hi - lo) * i as f64 / (grid - 1) as f64).collect();
        let conv = sum_density_conv(
            |x, y| spec.density_eval(&[x, y]).unwrap_or(f64::NAN),
            (c0 - r0, c0 + r0),
            &pts,
        )?;
        let mut worst: f64 = 0.0;
        for (s, v) in pts.iter().zip(&conv) {
            worst = worst.max((v - conv_base.density(*s)?).abs());
        }
        report.record("sum-law", ClaimKind::Sum, worst, 1e-6, grid as u64, None);
    } else {
        // Monte Carlo normalization against the product base measure.
        if spec.base.iter().any(|b| b.type_tag != MeixnerType::NormalI) {
            bail!("MC normalization is implemented for normal bases");
        }
        let n = 200_000usize;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        use rand::SeedableRng;
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = spec
                .base
                .iter()
                .map(|b| b.m + b.s2.sqrt() * draw_std_normal(&mut rng))
                .collect();
            vals.push(spec.density_eval(&x)? / spec.base_density(&x)?);
        }
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        report.record(
            "normalization-mc",
            ClaimKind::Normalization,
            mean - 1.0,
            4.0 * se,
            n as u64,
            Some(seed),
        );
    }
    Ok(())
}

fn draw_std_normal<R: Rng>(rng: &mut R) -> f64 {
    let (a, b): (f64, f64) = (rng.random(), rng.random());
    (-2.0 * a.max(1e-300).ln()).sqrt() * (2.0 * std::f64::consts::PI * b).cos()
}

fn verify_copula(spec: &CopulaSpec, seed: u64, report: &mut VerificationReport) -> Result<()> {
    let cond = check_conditions(&spec.epsilon, spec.d)?;
    report.record("condition-23-total", ClaimKind::Normalization, cond.cond23.worst, 0.0, 1, None);
    report.record("condition-24-symmetric", ClaimKind::SymmetricStat, cond.cond24.worst, 0.0, 1, None);
    for (k, c) in cond.cond25.iter().enumerate() {
        report.record(&format!("condition-25-k{}", k + 1), ClaimKind::Subsum, c.worst, 0.0, 1, None);
    }
    report.record("condition-26-marginal", ClaimKind::Marginal, cond.cond26.worst, 0.0, 1, None);
    if spec.d <= PROP5_D_MAX {
        let balanced = prop5_check(&spec.epsilon, spec.d)?;
        report.record(
            "prop5-characterization",
            ClaimKind::Subsum,
            if balanced { 0.0 } else { 1.0 },
            0.0,
            1,
            None,
        );
    }
    if spec.d <= 3 {
        let probes: &[f64] = &[0.12, 0.37, 0.61, 0.88];
        let mut worst: f64 = 0.0;
        for k in 0..spec.d {
            let rest: Vec<f64> = (0..spec.d - 1).map(|i| probes[(i + k) % probes.len()]).collect();
            worst = worst.max((spec.marginal_integrate(k, &rest)? - 1.0).abs());
        }
        report.record("marginal-uniform", ClaimKind::Marginal, worst, 1e-6, probes.len() as u64, None);
    }
    let n = 20_000;
    let samples = spec.sample(n, seed)?;
    let mut min_p = f64::INFINITY;
    for k in 0..spec.d {
        let coord: Vec<f64> = samples.iter().map(|u| u[k]).collect();
        let (_, p) = chi_square_uniform(&coord, 20)?;
        min_p = min_p.min(p);
    }
    report.record(
        "sample-coordinates-uniform",
        ClaimKind::SymmetricStat,
        (0.01 - min_p).max(0.0),
        0.0,
        n as u64,
        Some(seed),
    );
    Ok(())
}

fn run_verify(
    path: &std::path::Path,
    emit: Emit,
    seed: u64,
    grid: usize,
    out: Option<&std::path::Path>,
) -> Result<u8> {
    let mut report = VerificationReport::new();
    match load_any(path)? {
        AnySpec::Expansion(spec) => verify_expansion(&spec, seed, grid, &mut report)?,
        AnySpec::Copula(spec) => verify_copula(&spec, seed, &mut report)?,
    }
    finish_report(&report, emit, out)
}

fn sample_expansion(spec: &ExpansionDensitySpec, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if spec.base.iter().any(|b| b.type_tag != MeixnerType::NormalI) {
        bail!("sampling is implemented for normal bases");
    }
    // Envelope against the product base proposal: 1 + kappa times the
    // two-sided sup of |perturbation| / base, each side obtained from
    // the nonnegativity bound of the corresponding signed table.
    let neg = ExpansionDensitySpec {
        table: spec.table.scaled(-1.0),
        ..spec.clone()
    };
    let sup_ratio = (1.0 / spec.kappa_max()?).max(1.0 / neg.kappa_max()?);
    let envelope = 1.0 + spec.kappa * sup_ratio * 1.000001;
    let bases = spec.base.clone();
    let spec2 = spec.clone();
    let (samples, _rate) = rejection_sample(
        |x: &Vec<f64>| spec2.density_eval(x).unwrap_or(0.0),
        |rng| {
            let x: Vec<f64> =
                bases.iter().map(|b| b.m + b.s2.sqrt() * draw_std_normal(rng)).collect();
            let mut q = 1.0;
            for (b, &xi) in bases.iter().zip(&x) {
                q *= b.density(xi).unwrap();
            }
            (x, q)
        },
        envelope,
        n,
        seed,
    )?;
    Ok(samples)
}

fn run_sample(path: &std::path::Path, n: usize, seed: u64, out: Option<&std::path::Path>) -> Result<u8> {
    let (samples, d) = match load_any(path)? {
        AnySpec::Expansion(spec) => {
            let d = spec.d();
            (sample_expansion(&spec, n, seed)?, d)
        }
        AnySpec::Copula(spec) => {
            let d = spec.d;
            (spec.sample(n, seed)?, d)
        }
    };
    write_output(out, &samples_csv(&samples, d))?;
    Ok(0)
}

fn verify_theorem6_normals(seed: u64, report: &mut VerificationReport) -> Result<()> {
    let p1 = MarginalDescriptor::normal(0.0, 1.0)?;
    let p2 = MarginalDescriptor::normal(0.0, 4.0)?;
    let group = similar_group(&p1, &p2)?;
    let f = |a: f64, b: f64| normal_pdf(a, 0.0, 1.0) * normal_pdf(b, 0.0, 4.0);
    // Constant generator on a compact box inside the reference region;
    // f exceeds 0.0099 on the box and its group images.
    let gamma = |a: f64, b: f64| {
        if (-2.0..-1.0).contains(&a) && (-0.8..-0.2).contains(&b) {
            0.005
        } else {
            0.0
        }
    };
    let mut worst: f64 = 0.0;
    for &x1 in &[-1.6, -0.5, 0.4, 1.3] {
        let m = quad_1d(|x2| similar_density(&f, &group, &gamma, (x1, x2)).unwrap(), -25.0, 25.0, 1e-9)?;
        worst = worst.max((m - p1.pdf(x1)).abs());
    }
    report.record("theorem6-marginal-1", ClaimKind::Marginal, worst, 1e-6, 4, None);
    let mut worst: f64 = 0.0;
    for &x2 in &[-2.4, -0.5, 0.3, 1.9] {
        let m = quad_1d(|x1| similar_density(&f, &group, &gamma, (x1, x2)).unwrap(), -13.0, 13.0, 1e-9)?;
        worst = worst.max((m - p2.pdf(x2)).abs());
    }
    report.record("theorem6-marginal-2", ClaimKind::Marginal, worst, 1e-6, 4, None);

    // Sum law by two-sample KS against the independent pair.
    let n = 100_000;
    let (samples, _rate) = rejection_sample(
        |x: &(f64, f64)| similar_density(&f, &group, &gamma, *x).unwrap_or(0.0),
        |rng| {
            let x = (draw_std_normal(rng), 2.0 * draw_std_normal(rng));
            (x, f(x.0, x.1))
        },
        1.6,
        n,
        seed,
    )?;
    let sums: Vec<f64> = samples.iter().map(|&(a, b)| a + b).collect();
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let reference: Vec<f64> = (0..n).map(|_| 5.0f64.sqrt() * draw_std_normal(&mut rng)).collect();
    let ks = ks_two_sample(&sums, &reference)?;
    report.record(
        "theorem6-sum-ks",
        ClaimKind::Sum,
        ks.statistic,
        ks.crit_1pct,
        n as u64,
        Some(seed),
    );

    // The non-similar pair of the negative example must be rejected.
    let skew = MarginalDescriptor::from_fns(
        std::sync::Arc::new(|x| distmatch::matcher::std_normal_cdf(x).powi(2)),
        std::sync::Arc::new(|x| {
            2.0 * distmatch::matcher::std_normal_cdf(x) * distmatch::verify::std_normal_pdf(x)
        }),
        None,
        (f64::NEG_INFINITY, f64::INFINITY),
        None,
    );
    let rejected = matches!(similar_group(&p1, &skew), Err(distmatch::Error::NotSimilar(_)));
    report.record(
        "non-similar-pair-rejected",
        ClaimKind::Marginal,
        if rejected { 0.0 } else { 1.0 },
        0.0,
        1,
        None,
    );
    Ok(())
}

fn run_preset(
    name: &str,
    verify: bool,
    shrink: f64,
    kappa: &str,
    emit: Emit,
    seed: u64,
    out: Option<&std::path::Path>,
) -> Result<u8> {
    if name == "theorem6-normals" {
        let mut report = VerificationReport::new();
        verify_theorem6_normals(seed, &mut report)?;
        return finish_report(&report, emit, out);
    }
    if let Some(ds) = name.strip_prefix("example8:") {
        let d: usize = ds.parse().context("example8 needs a dimension, e.g. example8:3")?;
        // Default generator: half the uniform admissibility bound of the
        // independence base.
        let spec = CopulaSpec {
            d,
            epsilon: EpsilonAssignment::Signed,
            gamma: GammaDescriptor::Const { value: 0.5 },
            base: BaseCopula::independence(),
        };
        spec.validate()?;
        write_output(out, &(serde_json::to_string_pretty(&spec)? + "\n"))?;
        if verify {
            let mut report = VerificationReport::new();
            verify_copula(&spec, seed, &mut report)?;
            return finish_report(&report, emit, None);
        }
        return Ok(0);
    }
    let preset_name = Preset::from_str(name)?;
    let spec = preset(preset_name, shrink)?;
    let spec = if kappa == "auto" {
        let k = spec.kappa_max()?;
        eprintln!("kappa_max = {k:.12}");
        spec.with_kappa(k)
    } else {
        spec.with_kappa(kappa.parse::<f64>().context("--kappa must be 'auto' or a float")?)
    };
    spec.validate()?;
    write_output(out, &(serde_json::to_string_pretty(&spec)? + "\n"))?;
    if verify {
        let mut report = VerificationReport::new();
        verify_expansion(&spec, seed, 81, &mut report)?;
        return finish_report(&report, emit, None);
    }
    Ok(0)
}
