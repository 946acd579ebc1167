//! Reflection construction for similarly distributed pairs: the map
//! Psi(x) = Phi^-1(1 - Phi(x)), the order-8 reflection group it
//! generates together with the coordinate swap, and the perturbed joint
//! density built from that group.

use crate::error::{Error, Result};
use crate::matcher::MarginalDescriptor;

/// Psi(x) = Phi^-1(1 - Phi(x)), a decreasing involution. Symmetric
/// marginals take the analytic reflection through the median, which is
/// also stable deep in the tails where 1 - Phi(x) rounds to 0 or 1.
pub fn similar_psi(phi: &MarginalDescriptor, x: f64) -> Result<f64> {
    if let Some(m) = phi.symmetric_about {
        return Ok(2.0 * m - x);
    }
    phi.quantile(1.0 - phi.cdf(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gen {
    S1,
    S2,
    S12,
}

/// A group element as a reduced word in the generators, applied right
/// to left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupElement {
    pub word: Vec<Gen>,
}

impl GroupElement {
    /// (-1)^{word length}.
    pub fn parity(&self) -> f64 {
        if self.word.len() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// The eight reflections generated by the two marginal reflections and
/// the coordinate swap, valid when the marginals are similarly
/// distributed.
#[derive(Debug, Clone)]
pub struct SimilarGroup {
    phi1: MarginalDescriptor,
    phi2: MarginalDescriptor,
    pub median: f64,
    analytic_jacobian: bool,
    pub elements: Vec<GroupElement>,
}

const PSI_PROBE_TOL: f64 = 1e-8;

pub fn similar_group(phi1: &MarginalDescriptor, phi2: &MarginalDescriptor) -> Result<SimilarGroup> {
    // Probe the similarity identity Psi_1 = Psi_2 on a quantile grid of
    // the first marginal.
    let mut worst: f64 = 0.0;
    for i in 1..40 {
        let p = i as f64 / 40.0;
        let x = phi1.quantile(p)?;
        let a = similar_psi(phi1, x)?;
        let b = similar_psi(phi2, x)?;
        worst = worst.max((a - b).abs());
    }
    if worst > PSI_PROBE_TOL {
        return Err(Error::NotSimilar(worst));
    }
    let median = phi1.quantile(0.5)?;
    let m2 = phi2.quantile(0.5)?;
    if (median - m2).abs() > PSI_PROBE_TOL {
        return Err(Error::NotSimilar((median - m2).abs()));
    }
    let analytic_jacobian = matches!(
        (phi1.symmetric_about, phi2.symmetric_about),
        (Some(a), Some(b)) if (a - median).abs() < 1e-12 && (b - median).abs() < 1e-12
    );
    let elements = [
        vec![],
        vec![Gen::S1],
        vec![Gen::S2],
        vec![Gen::S12],
        vec![Gen::S1, Gen::S2],
        vec![Gen::S1, Gen::S12],
        vec![Gen::S2, Gen::S12],
        vec![Gen::S1, Gen::S2, Gen::S12],
    ]
    .into_iter()
    .map(|word| GroupElement { word })
    .collect();
    Ok(SimilarGroup {
        phi1: phi1.clone(),
        phi2: phi2.clone(),
        median,
        analytic_jacobian,
        elements,
    })
}

impl SimilarGroup {
    fn apply_gen(&self, g: Gen, x: [f64; 2]) -> Result<[f64; 2]> {
        Ok(match g {
            Gen::S1 => [similar_psi(&self.phi1, x[0])?, x[1]],
            Gen::S2 => [x[0], similar_psi(&self.phi2, x[1])?],
            Gen::S12 => [x[1], x[0]],
        })
    }

    /// Applies a word right to left.
    pub fn apply(&self, elem: &GroupElement, x: [f64; 2]) -> Result<[f64; 2]> {
        let mut y = x;
        for &g in elem.word.iter().rev() {
            y = self.apply_gen(g, y)?;
        }
        Ok(y)
    }

    /// |det J| of the composite map. Analytic (= 1) for symmetric
    /// marginals, otherwise central finite differences with Richardson
    /// extrapolation at base step 1e-5.
    pub fn jacobian(&self, elem: &GroupElement, x: [f64; 2]) -> Result<f64> {
        if self.analytic_jacobian {
            return Ok(1.0);
        }
        let partials = |h: f64| -> Result<[f64; 4]> {
            let mut out = [0.0; 4];
            for j in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                let fp = self.apply(elem, xp)?;
                let fm = self.apply(elem, xm)?;
                for i in 0..2 {
                    out[2 * i + j] = (fp[i] - fm[i]) / (2.0 * h);
                }
            }
            Ok(out)
        };
        let h = 1e-5;
        let coarse = partials(h)?;
        let fine = partials(h / 2.0)?;
        let mut m = [0.0; 4];
        for i in 0..4 {
            m[i] = (4.0 * fine[i] - coarse[i]) / 3.0;
        }
        Ok((m[0] * m[3] - m[1] * m[2]).abs())
    }
}

/// The symmetry-balanced joint density: f minus the signed sum of
/// gamma pulled through the group, restricted to the reference region
/// Delta = {x1 < x2 < m}.
pub fn similar_density<F, G>(f: F, group: &SimilarGroup, gamma: G, x: (f64, f64)) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
    G: Fn(f64, f64) -> f64,
{
    let m = group.median;
    let mut v = f(x.0, x.1);
    for elem in &group.elements {
        let y = group.apply(elem, [x.0, x.1])?;
        if y[0] < y[1] && y[1] < m {
            v -= elem.parity() * gamma(y[0], y[1]) * group.jacobian(elem, [x.0, x.1])?;
        }
    }
    if v < -1e-12 {
        return Err(Error::InvalidSpec(format!(
            "perturbed density is negative ({v}) at ({}, {}): gamma too large",
            x.0, x.1
        )));
    }
    Ok(v)
}
