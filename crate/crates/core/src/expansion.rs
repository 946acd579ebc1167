//! Sparse multi-index coefficient tables for the mean-square expansion
//! of a joint law against a product law, and the matching-condition
//! checkers built on them.
//!
//! A table holds coefficients H_n indexed by d-dimensional multi-indices;
//! the zero index is implicit and always equal to 1. Marginal matching,
//! sum matching, sub-sum matching and full symmetric matching are each a
//! linear condition on the coefficients.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meixner::{MeixnerSpec, N_MAX};

/// Largest dimension for which permutation orbits are enumerated (8! = 40320).
pub const ORBIT_D_MAX: usize = 8;

pub type MultiIndex = Vec<usize>;

/// Sparse map from multi-index to coefficient; absent means 0, the zero
/// index means 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableJson", into = "TableJson")]
pub struct CoefficientTable {
    d: usize,
    coeffs: BTreeMap<MultiIndex, f64>,
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    d: usize,
    coeffs: Vec<EntryJson>,
}

#[derive(Serialize, Deserialize)]
struct EntryJson {
    n: MultiIndex,
    #[serde(rename = "H")]
    h: f64,
}

impl From<CoefficientTable> for TableJson {
    fn from(t: CoefficientTable) -> Self {
        TableJson {
            d: t.d,
            coeffs: t.coeffs.into_iter().map(|(n, h)| EntryJson { n, h }).collect(),
        }
    }
}

impl TryFrom<TableJson> for CoefficientTable {
    type Error = Error;
    fn try_from(j: TableJson) -> Result<Self> {
        let mut t = CoefficientTable::new(j.d)?;
        for e in j.coeffs {
            t.insert(e.n, e.h)?;
        }
        Ok(t)
    }
}

impl CoefficientTable {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidSpec(format!("table dimension must be >= 2, got {d}")));
        }
        Ok(CoefficientTable { d, coeffs: BTreeMap::new() })
    }

    /// Convenience constructor from (index, coefficient) pairs.
    pub fn from_entries(d: usize, entries: &[(&[usize], f64)]) -> Result<Self> {
        let mut t = Self::new(d)?;
        for (n, h) in entries {
            t.insert(n.to_vec(), *h)?;
        }
        Ok(t)
    }

    pub fn insert(&mut self, n: MultiIndex, h: f64) -> Result<()> {
        if n.len() != self.d {
            return Err(Error::InvalidSpec(format!(
                "index length {} does not match table dimension {}",
                n.len(),
                self.d
            )));
        }
        let total: usize = n.iter().sum();
        if total > N_MAX {
            return Err(Error::DegreeCap(total, N_MAX));
        }
        if total == 0 {
            // H_{0,...,0} = 1 is implicit; storing any other value is an error.
            if h != 1.0 {
                return Err(Error::InvalidSpec("the zero multi-index must map to 1".into()));
            }
            return Ok(());
        }
        if h == 0.0 {
            self.coeffs.remove(&n);
        } else {
            self.coeffs.insert(n, h);
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn get(&self, n: &[usize]) -> f64 {
        if n.iter().all(|&k| k == 0) {
            return 1.0;
        }
        self.coeffs.get(n).copied().unwrap_or(0.0)
    }

    /// Stored nonzero entries, zero index excluded.
    pub fn entries(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.coeffs.iter().map(|(n, &h)| (n, h))
    }

    pub fn max_total_degree(&self) -> usize {
        self.coeffs.keys().map(|n| n.iter().sum()).max().unwrap_or(0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let coeffs = self.coeffs.iter().map(|(n, h)| (n.clone(), h * factor)).collect();
        CoefficientTable { d: self.d, coeffs }
    }

    /// Indices with exactly one nonzero entry and a nonzero coefficient.
    /// Empty means the marginal laws all match.
    pub fn check_marginal_condition(&self) -> Vec<MultiIndex> {
        self.coeffs
            .iter()
            .filter(|(n, &h)| h != 0.0 && n.iter().filter(|&&k| k > 0).count() == 1)
            .map(|(n, _)| n.clone())
            .collect()
    }

    /// Per-degree residuals of the sum-matching condition:
    /// sum_{<n> = m} H_n prod_i h_{n_i}(r_i) / n_i!. All residuals zero
    /// means the law of the sum matches the independent convolution.
    pub fn check_sum_condition(&self, specs: &[MeixnerSpec]) -> Result<BTreeMap<usize, f64>> {
        let full: Vec<usize> = (0..self.d).collect();
        self.check_subsum_condition(&full, specs)
    }

    /// Sum-matching residuals for the sub-vector indexed by `subset`:
    /// restrict to indices supported on the subset and evaluate the same
    /// per-degree sums over the restricted coordinates.
    pub fn check_subsum_condition(
        &self,
        subset: &[usize],
        specs: &[MeixnerSpec],
    ) -> Result<BTreeMap<usize, f64>> {
        if subset.is_empty() {
            return Err(Error::InvalidSpec("empty index subset".into()));
        }
        if specs.len() != self.d {
            return Err(Error::InvalidSpec(format!(
                "expected {} specs, got {}",
                self.d,
                specs.len()
            )));
        }
        if subset.iter().any(|&i| i >= self.d) {
            return Err(Error::InvalidSpec("subset index out of range".into()));
        }
        for s in specs {
            if !s.same_class(&specs[0]) {
                return Err(Error::ClassMismatch);
            }
        }
        let in_subset = |i: usize| subset.contains(&i);
        let mut residuals: BTreeMap<usize, f64> = BTreeMap::new();
        for (n, h) in self.entries() {
            // Supported on the subset: zero outside it.
            if n.iter().enumerate().any(|(i, &k)| k > 0 && !in_subset(i)) {
                continue;
            }
            let m: usize = n.iter().sum();
            let mut term = h;
            for (i, &ni) in n.iter().enumerate() {
                if ni > 0 {
                    term *= specs[i].poly_norm(ni)? / factorial(ni);
                }
            }
            *residuals.entry(m).or_insert(0.0) += term;
        }
        Ok(residuals)
    }

    /// Orbits (keyed by their sorted representative) whose sum over all
    /// d! coordinate permutations is nonzero; empty means every symmetric
    /// statistic of the perturbed law matches the product law.
    pub fn check_symmetric_condition(&self) -> Result<Vec<MultiIndex>> {
        if self.d > ORBIT_D_MAX {
            return Err(Error::DimensionCap(self.d, ORBIT_D_MAX));
        }
        let perms = all_permutations(self.d);
        let mut reps: Vec<MultiIndex> = Vec::new();
        for n in self.coeffs.keys() {
            let mut rep = n.clone();
            rep.sort_unstable();
            if !reps.contains(&rep) {
                reps.push(rep);
            }
        }
        let mut violating = Vec::new();
        for rep in reps {
            let mut sum = 0.0;
            for beta in &perms {
                let permuted: MultiIndex = beta.iter().map(|&i| rep[i]).collect();
                sum += self.get(&permuted);
            }
            if sum.abs() > RESIDUAL_TOL {
                violating.push(rep);
            }
        }
        Ok(violating)
    }

    /// Square-summability diagnostic: 1 + sum_n H_n^2 prod_i h_{n_i}(r_i)
    /// (the leading 1 is the implicit zero-index term).
    pub fn check_square_summable(&self, specs: &[MeixnerSpec]) -> Result<f64> {
        if specs.len() != self.d {
            return Err(Error::InvalidSpec(format!(
                "expected {} specs, got {}",
                self.d,
                specs.len()
            )));
        }
        let mut total = 1.0;
        for (n, h) in self.entries() {
            let mut term = h * h;
            for (i, &ni) in n.iter().enumerate() {
                term *= specs[i].poly_norm(ni)?;
            }
            total += term;
        }
        Ok(total)
    }
}

/// Residual tolerance for the pure-arithmetic conditions (no quadrature).
pub const RESIDUAL_TOL: f64 = 1e-12;

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// All permutations of 0..d in lexicographic order, as index arrays.
pub fn all_permutations(d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..d).collect();
    loop {
        out.push(cur.clone());
        // Next lexicographic permutation.
        let Some(i) = (0..d.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            break;
        };
        let j = (i + 1..d).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    out
}
