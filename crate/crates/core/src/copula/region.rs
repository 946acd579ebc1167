//! Hypercube region algebra: coordinate reflections tau_alpha,
//! permutation actions sigma_beta, the 2^d d! region partition with its
//! boundary set, and the insertion maps omega_k / chi_j used by the
//! marginalization conditions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Permutation of {0, .., d-1} stored as an index array: the action on
/// points is sigma(u)_i = u[perm[i]].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Perm(pub Vec<usize>);

impl Perm {
    pub fn identity(d: usize) -> Self {
        Perm((0..d).collect())
    }

    pub fn new(map: Vec<usize>) -> Result<Self> {
        let d = map.len();
        let mut seen = vec![false; d];
        for &v in &map {
            if v >= d || seen[v] {
                return Err(Error::InvalidSpec(format!("{map:?} is not a permutation")));
            }
            seen[v] = true;
        }
        Ok(Perm(map))
    }

    pub fn d(&self) -> usize {
        self.0.len()
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0; self.0.len()];
        for (i, &v) in self.0.iter().enumerate() {
            inv[v] = i;
        }
        Perm(inv)
    }

    /// Signature by cycle counting: (-1)^(d - number of cycles).
    pub fn sgn(&self) -> i32 {
        let d = self.0.len();
        let mut seen = vec![false; d];
        let mut cycles = 0;
        for start in 0..d {
            if seen[start] {
                continue;
            }
            cycles += 1;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = self.0[i];
            }
        }
        if (d - cycles) % 2 == 0 { 1 } else { -1 }
    }

    /// Action on points: out_i = u[perm[i]].
    pub fn apply<T: Copy>(&self, u: &[T]) -> Vec<T> {
        self.0.iter().map(|&j| u[j]).collect()
    }

    /// All permutations of the given dimension in lexicographic order.
    pub fn all(d: usize) -> Vec<Perm> {
        crate::expansion::all_permutations(d).into_iter().map(Perm).collect()
    }
}

/// Coordinatewise reflection: u_i -> 1 - u_i where alpha_i is set.
pub fn tau(alpha: &[bool], u: &[f64]) -> Vec<f64> {
    alpha
        .iter()
        .zip(u)
        .map(|(&a, &ui)| if a { 1.0 - ui } else { ui })
        .collect()
}

pub fn alpha_weight(alpha: &[bool]) -> usize {
    alpha.iter().filter(|&&a| a).count()
}

/// Bit-vectors of length d, enumerated as little-endian masks.
pub fn all_alphas(d: usize) -> Vec<Vec<bool>> {
    (0..1usize << d)
        .map(|mask| (0..d).map(|i| mask >> i & 1 == 1).collect())
        .collect()
}

/// The unique region key of a non-boundary point.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RegionKey {
    pub alpha: Vec<bool>,
    pub beta: Perm,
}

/// The unique (alpha, beta) with sigma_beta(tau_alpha(u)) strictly
/// increasing in (0, 1/2), or None on the boundary set (some u_k equal
/// to 1/2, 0 or 1, or a tie among reflected coordinates).
pub fn classify_region(u: &[f64]) -> Option<RegionKey> {
    let d = u.len();
    let mut alpha = vec![false; d];
    for (i, &ui) in u.iter().enumerate() {
        if ui <= 0.0 || ui >= 1.0 || ui == 0.5 {
            return None;
        }
        alpha[i] = ui > 0.5;
    }
    let t = tau(&alpha, u);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| t[i].total_cmp(&t[j]));
    for w in order.windows(2) {
        if t[w[0]] == t[w[1]] {
            return None;
        }
    }
    Some(RegionKey { alpha, beta: Perm(order) })
}

/// Inserts r at position k (0-based) of v.
pub fn omega<T: Copy>(v: &[T], k: usize, r: T) -> Vec<T> {
    let mut out = Vec::with_capacity(v.len() + 1);
    out.extend_from_slice(&v[..k]);
    out.push(r);
    out.extend_from_slice(&v[k..]);
    out
}

/// The insertion permutation: beta = chi(b, j, k) in S_d maps slot j to
/// value k and threads the S_{d-1} permutation b through the remaining
/// slots, shifting values >= k up by one. All indices 0-based.
pub fn chi(b: &Perm, j: usize, k: usize) -> Result<Perm> {
    let d = b.d() + 1;
    if j >= d || k >= d {
        return Err(Error::InvalidSpec(format!("chi indices ({j}, {k}) out of range for d = {d}")));
    }
    let mut out = Vec::with_capacity(d);
    for i in 0..d {
        if i == j {
            out.push(k);
        } else {
            let w = b.0[if i < j { i } else { i - 1 }];
            out.push(if w < k { w } else { w + 1 });
        }
    }
    Ok(Perm(out))
}

/// Inverse of the insertion: given beta in S_d and a value k, recover
/// the unique (j, b) with chi(b, j, k) = beta.
pub fn chi_inverse(beta: &Perm, k: usize) -> Result<(usize, Perm)> {
    let d = beta.d();
    if k >= d {
        return Err(Error::InvalidSpec(format!("value {k} out of range for d = {d}")));
    }
    let j = beta
        .0
        .iter()
        .position(|&v| v == k)
        .expect("a permutation contains every value");
    let mut b = Vec::with_capacity(d - 1);
    for i in 0..d {
        if i == j {
            continue;
        }
        let w = beta.0[i];
        b.push(if w < k { w } else { w - 1 });
    }
    Ok((j, Perm(b)))
}
