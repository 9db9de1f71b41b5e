//! Seeded random test systems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::block::{axpy, Block, SmallVec};
use crate::cbx::{operator_from_rows, slot_present};
use crate::error::{Error, Result};
use crate::operator::{check_min_n, Kind, Operator};

/// Parameters for [`generate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenSpec {
    pub kind: Kind,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    /// Diagonal boost factor; `>= 1` makes the assembled matrix strictly
    /// row diagonally dominant.
    pub dominance: f64,
}

impl GenSpec {
    pub fn new(kind: Kind, n: usize, m: usize, seed: u64, dominance: f64) -> Self {
        GenSpec {
            kind,
            n,
            m,
            seed,
            dominance,
        }
    }
}

/// Draws an operator and a right-hand side.
///
/// Every in-band block starts with entries uniform in `[-1, 1]`; out-of-band
/// slots of non-cyclic kinds are zero. Block row `k` then gets
/// `B_k = R_k + dominance·s_k·I`, where `s_k` is one plus the largest absolute
/// scalar row sum of the random part of that block row. Right-hand-side
/// entries are uniform in `[-1, 1]`.
pub fn generate(spec: &GenSpec) -> Result<(Operator, Vec<SmallVec>)> {
    let GenSpec {
        kind,
        n,
        m,
        seed,
        dominance,
    } = *spec;
    if m == 0 {
        return Err(Error::dim("block order m must be at least 1"));
    }
    check_min_n(kind, n)?;
    if !dominance.is_finite() || dominance < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "dominance must be finite and >= 0, got {dominance}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_row = kind.blocks_per_row();
    let mut rows: Vec<Vec<Block>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut row = Vec::with_capacity(per_row);
        for s in 0..per_row {
            let vals: Vec<f64> = (0..m * m).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let b = Block::from_row_major(m, vals)?;
            row.push(if slot_present(kind, n, k, s) { b } else { Block::zeros(m) });
        }
        let spread = 1.0
            + (0..m)
                .map(|i| {
                    row.iter()
                        .map(|b| b.row(i).iter().map(|v| v.abs()).sum::<f64>())
                        .sum::<f64>()
                })
                .fold(0.0, f64::max);
        row[1] = axpy(1.0, &Block::scaled_identity(m, dominance * spread), &row[1]);
        rows.push(row);
    }
    let rhs = (0..n)
        .map(|_| SmallVec::new((0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok((operator_from_rows(kind, rows)?, rhs))
}
