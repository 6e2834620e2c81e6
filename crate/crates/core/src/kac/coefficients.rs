use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest depth whose triangle fits in `u128`.
pub const MAX_COEFFICIENT_DEPTH: usize = 60;

/// The triangle `a_{n,l}` that expands `G^n = (J + K)^n` into terms
/// `B^l K^{n-l}`: `a_{0,0} = 1`, `a_{k+1,l} = Σ_{i ≤ l} a_{k,i}` for
/// `l ≤ k + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientTable {
    rows: Vec<Vec<u128>>,
}

impl CoefficientTable {
    pub fn depth(&self) -> usize {
        self.rows.len() - 1
    }

    /// `a_{n,l}`, zero outside the triangle.
    pub fn get(&self, n: usize, l: usize) -> u128 {
        self.rows.get(n).and_then(|r| r.get(l)).copied().unwrap_or(0)
    }

    pub fn row(&self, n: usize) -> &[u128] {
        &self.rows[n]
    }

    pub fn row_sum(&self, n: usize) -> u128 {
        self.rows[n].iter().sum()
    }
}

pub fn coefficient_table(depth: usize) -> Result<CoefficientTable> {
    if depth > MAX_COEFFICIENT_DEPTH {
        return Err(Error::Domain(format!(
            "coefficient depth {depth} exceeds {MAX_COEFFICIENT_DEPTH}"
        )));
    }
    let mut rows: Vec<Vec<u128>> = vec![vec![1]];
    for k in 0..depth {
        let prev = &rows[k];
        let mut next = Vec::with_capacity(k + 2);
        let mut acc: u128 = 0;
        for l in 0..=k + 1 {
            acc += prev.get(l).copied().unwrap_or(0);
            next.push(acc);
        }
        rows.push(next);
    }
    Ok(CoefficientTable { rows })
}
