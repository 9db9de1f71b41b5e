//! Brute-force reference path: assemble the full `nm × nm` matrix and solve
//! it by Gaussian elimination with partial pivoting.
//!
//! Nothing here calls into the block LU; the elimination below is a separate
//! implementation so an oracle disagreement points at a real defect.

use crate::banded::{BlockPentaMatrix, BlockTriMatrix};
use crate::block::Block;
use crate::cyclic::{CyclicBlockPenta, CyclicBlockTri};
use crate::error::{Error, Result};

/// Dense row-major square matrix. Block `(k, j)` (0-based) of an operator
/// with block order `m` occupies rows `k·m..(k+1)·m`, columns `j·m..(j+1)·m`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSystem {
    dim: usize,
    entries: Vec<f64>,
}

impl DenseSystem {
    pub fn zeros(dim: usize) -> Self {
        DenseSystem {
            dim,
            entries: vec![0.0; dim * dim],
        }
    }

    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::dim(format!(
                "dense {dim}x{dim} needs {} entries, got {}",
                dim * dim,
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dense entry".into()));
        }
        Ok(DenseSystem { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.dim + j] = v;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Writes `b` at block position `(k, j)`.
    pub fn set_block(&mut self, k: usize, j: usize, b: &Block) {
        let m = b.order();
        for r in 0..m {
            for c in 0..m {
                self.set(k * m + r, j * m + c, b.get(r, c));
            }
        }
    }

    /// Copies out the block of order `m` at block position `(k, j)`.
    pub fn block(&self, k: usize, j: usize, m: usize) -> Block {
        let mut b = Block::zeros(m);
        for r in 0..m {
            for c in 0..m {
                b.set(r, c, self.get(k * m + r, j * m + c));
            }
        }
        b
    }

    pub fn nonzeros(&self) -> usize {
        self.entries.iter().filter(|&&v| v != 0.0).count()
    }

    /// Row-major matvec, accumulating each row left to right.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "dense matvec length mismatch");
        self.entries
            .chunks(self.dim)
            .map(|row| {
                let mut s = 0.0;
                for (a, b) in row.iter().zip(x) {
                    s += a * b;
                }
                s
            })
            .collect()
    }

    pub fn norm_inf(&self) -> f64 {
        self.entries
            .chunks(self.dim.max(1))
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn add_assign(&mut self, other: &DenseSystem) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += b;
        }
    }

    pub fn max_abs_diff(&self, other: &DenseSystem) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.entries
            .iter()
            .zip(&other.entries)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// Largest `|a_ii| − Σ_{j≠i} |a_ij|` shortfall; positive means some row
    /// fails strict diagonal dominance.
    pub fn dominance_margin(&self) -> f64 {
        (0..self.dim)
            .map(|i| {
                let off: f64 = (0..self.dim)
                    .filter(|&j| j != i)
                    .map(|j| self.get(i, j).abs())
                    .sum();
                self.get(i, i).abs() - off
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Operators that can be laid out as a dense matrix.
pub trait Assemble {
    fn assemble_dense(&self) -> DenseSystem;
}

pub fn assemble_dense<A: Assemble + ?Sized>(a: &A) -> DenseSystem {
    a.assemble_dense()
}

impl Assemble for CyclicBlockTri {
    fn assemble_dense(&self) -> DenseSystem {
        let (n, m) = (self.n(), self.m());
        let mut d = DenseSystem::zeros(n * m);
        for k in 0..n {
            let left = if k == 0 { n - 1 } else { k - 1 };
            let right = if k == n - 1 { 0 } else { k + 1 };
            d.set_block(k, left, &self.a()[k]);
            d.set_block(k, k, &self.b()[k]);
            d.set_block(k, right, &self.c()[k]);
        }
        d
    }
}

impl Assemble for CyclicBlockPenta {
    fn assemble_dense(&self) -> DenseSystem {
        let (n, m) = (self.n(), self.m());
        let mut d = DenseSystem::zeros(n * m);
        let wrap = |k: usize, off: isize| -> usize { (k as isize + off).rem_euclid(n as isize) as usize };
        for k in 0..n {
            d.set_block(k, wrap(k, -2), &self.e()[k]);
            d.set_block(k, wrap(k, -1), &self.a()[k]);
            d.set_block(k, k, &self.b()[k]);
            d.set_block(k, wrap(k, 1), &self.c()[k]);
            d.set_block(k, wrap(k, 2), &self.d()[k]);
        }
        d
    }
}

impl Assemble for BlockTriMatrix {
    fn assemble_dense(&self) -> DenseSystem {
        let (n, m) = (self.n(), self.m());
        let mut d = DenseSystem::zeros(n * m);
        for k in 0..n {
            d.set_block(k, k, &self.diag()[k]);
        }
        for k in 0..n - 1 {
            d.set_block(k + 1, k, &self.sub()[k]);
            d.set_block(k, k + 1, &self.sup()[k]);
        }
        d
    }
}

impl Assemble for BlockPentaMatrix {
    fn assemble_dense(&self) -> DenseSystem {
        let (n, m) = (self.n(), self.m());
        let mut d = DenseSystem::zeros(n * m);
        for k in 0..n {
            d.set_block(k, k, &self.diag()[k]);
        }
        for k in 0..n - 1 {
            d.set_block(k + 1, k, &self.sub()[k]);
            d.set_block(k, k + 1, &self.sup()[k]);
        }
        for k in 0..n - 2 {
            d.set_block(k + 2, k, &self.subsub()[k]);
            d.set_block(k, k + 2, &self.supsup()[k]);
        }
        d
    }
}

/// Gaussian elimination with partial pivoting on a private copy of `d`.
/// A pivot `|p| <= dim·ε·‖d‖∞` is reported as singular.
pub fn dense_solve(d: &DenseSystem, f: &[f64]) -> Result<Vec<f64>> {
    let n = d.dim;
    if f.len() != n {
        return Err(Error::dim(format!("rhs length {} for a {n}x{n} system", f.len())));
    }
    let tol = n as f64 * f64::EPSILON * d.norm_inf();
    let mut a: Vec<Vec<f64>> = d.entries.chunks(n.max(1)).map(<[f64]>::to_vec).collect();
    let mut b = f.to_vec();

    for col in 0..n {
        let (prow, pval) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pval <= tol {
            return Err(Error::SingularDense { column: col + 1 });
        }
        a.swap(col, prow);
        b.swap(col, prow);
        let (top, rest) = a.split_at_mut(col + 1);
        let pivot_row = &top[col];
        for (off, row) in rest.iter_mut().enumerate() {
            let factor = row[col] / pivot_row[col];
            if factor == 0.0 {
                continue;
            }
            row[col] = 0.0;
            for j in col + 1..n {
                row[j] -= factor * pivot_row[j];
            }
            b[col + 1 + off] -= factor * b[col];
        }
    }

    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Ok(x)
}
