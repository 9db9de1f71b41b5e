//! Row-wise view of a block-banded operator.

use crate::block::{Block, SmallVec};
use crate::error::{Error, Result};

/// A square operator of `n × n` blocks of order `m`, described row by row.
pub trait BlockOperator {
    fn n(&self) -> usize;
    fn m(&self) -> usize;

    /// Nonzero-pattern blocks of block row `k` (0-based) as `(column, block)`,
    /// sorted by column.
    fn row_blocks(&self, k: usize) -> Vec<(usize, &Block)>;

    /// `A·x`. Each scalar row is accumulated left to right over global
    /// columns, so the result equals a dense row-major matvec bit for bit.
    fn matvec(&self, x: &[SmallVec]) -> Result<Vec<SmallVec>> {
        let (n, m) = (self.n(), self.m());
        check_block_vector(x, n, m)?;
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let blocks = self.row_blocks(k);
            let mut row = vec![0.0; m];
            for (i, slot) in row.iter_mut().enumerate() {
                let mut s = 0.0;
                for &(col, b) in &blocks {
                    let xc = x[col].as_slice();
                    for (l, &a) in b.row(i).iter().enumerate() {
                        s += a * xc[l];
                    }
                }
                *slot = s;
            }
            out.push(SmallVec::new(row)?);
        }
        Ok(out)
    }

    /// Maximum absolute scalar row sum over the whole operator.
    fn norm_inf(&self) -> f64 {
        let m = self.m();
        let mut best = 0.0f64;
        for k in 0..self.n() {
            let blocks = self.row_blocks(k);
            for i in 0..m {
                let s: f64 = blocks
                    .iter()
                    .map(|(_, b)| b.row(i).iter().map(|v| v.abs()).sum::<f64>())
                    .sum();
                best = best.max(s);
            }
        }
        best
    }
}

pub(crate) fn check_block_vector(x: &[SmallVec], n: usize, m: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::dim(format!("expected {n} block rows, got {}", x.len())));
    }
    if let Some(k) = x.iter().position(|v| v.len() != m) {
        return Err(Error::dim(format!(
            "block row {} has length {}, expected {m}",
            k + 1,
            x[k].len()
        )));
    }
    Ok(())
}

/// Concatenates block rows into one flat vector.
pub fn flatten(x: &[SmallVec]) -> Vec<f64> {
    x.iter().flat_map(|v| v.as_slice().iter().copied()).collect()
}

/// Splits a flat vector into block rows of length `m`.
pub fn unflatten(flat: &[f64], m: usize) -> Result<Vec<SmallVec>> {
    if m == 0 || !flat.len().is_multiple_of(m) {
        return Err(Error::dim(format!(
            "vector of length {} is not a whole number of blocks of order {m}",
            flat.len()
        )));
    }
    flat.chunks(m).map(|c| SmallVec::new(c.to_vec())).collect()
}

/// `max |a - b| / max |b|`, the relative ∞-norm difference used by the
/// oracle comparisons. Returns the absolute difference when `b` is zero.
pub fn rel_inf_diff(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
    let scale = b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Scale-free residual `‖Ax − f‖∞ / (‖A‖∞‖x‖∞ + ‖f‖∞)`; zero when both
/// `x` and `f` vanish.
pub fn residual_inf<A: BlockOperator + ?Sized>(a: &A, x: &[SmallVec], f: &[SmallVec]) -> Result<f64> {
    check_block_vector(f, a.n(), a.m())?;
    let ax = a.matvec(x)?;
    let res = ax
        .iter()
        .zip(f)
        .flat_map(|(p, q)| p.as_slice().iter().zip(q.as_slice()))
        .fold(0.0f64, |acc, (p, q)| acc.max((p - q).abs()));
    let xn = x.iter().fold(0.0f64, |acc, v| acc.max(v.norm_inf()));
    let fnorm = f.iter().fold(0.0f64, |acc, v| acc.max(v.norm_inf()));
    let denom = a.norm_inf() * xn + fnorm;
    Ok(if denom > 0.0 { res / denom } else { res })
}
