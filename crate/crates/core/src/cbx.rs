//! The CBX1 text format.
//!
//! ```text
//! CBX1 <kind> <n> <m>
//! <payload>            per block row k = 1..n: A_k B_k C_k [D_k E_k], each m² reals row-major
//! [RHS <n·m reals>]
//! [SOL <n·m reals>]
//! ```
//!
//! Tokens are separated by ASCII whitespace and `#` starts a comment running
//! to end of line. Non-cyclic kinds (`tri`, `penta`) use the same per-row
//! layout; positions that fall outside the band are written as zeros and must
//! be zero when read. Reals are written with 17 significant digits, which
//! round-trips every finite double exactly.

use std::fmt::Write as _;

use crate::banded::{BlockPentaMatrix, BlockTriMatrix};
use crate::block::{Block, SmallVec};
use crate::cyclic::{CyclicBlockPenta, CyclicBlockTri};
use crate::error::{Error, Result};
use crate::operator::{check_min_n, Kind, Operator};

pub const MAGIC: &str = "CBX1";

/// A parsed CBX1 document.
#[derive(Debug, Clone, PartialEq)]
pub struct CbxFile {
    pub operator: Operator,
    pub rhs: Option<Vec<SmallVec>>,
    pub solution: Option<Vec<SmallVec>>,
}

/// Slot index within a block row: A, B, C, D, E.
const A: usize = 0;
const B: usize = 1;
const C: usize = 2;
const D: usize = 3;
const E: usize = 4;

/// True when slot `s` of block row `k` (0-based) lies inside the operator.
pub(crate) fn slot_present(kind: Kind, n: usize, k: usize, s: usize) -> bool {
    match kind {
        Kind::Cbts | Kind::Cbps => true,
        Kind::Tri | Kind::Penta => match s {
            A => k >= 1,
            B => true,
            C => k + 1 < n,
            D => k + 2 < n,
            E => k >= 2,
            _ => false,
        },
    }
}

/// Builds an operator from per-row slot blocks. Slots outside a non-cyclic
/// band are dropped; the caller decides whether they had to be zero.
pub(crate) fn operator_from_rows(kind: Kind, rows: Vec<Vec<Block>>) -> Result<Operator> {
    let n = rows.len();
    check_min_n(kind, n)?;
    let mut slots: [Vec<Block>; 5] = Default::default();
    for (k, row) in rows.into_iter().enumerate() {
        for (s, b) in row.into_iter().enumerate() {
            if slot_present(kind, n, k, s) {
                slots[s].push(b);
            }
        }
    }
    let [a, b, c, d, e] = slots;
    Ok(match kind {
        Kind::Cbts => CyclicBlockTri::new(a, b, c)?.into(),
        Kind::Cbps => CyclicBlockPenta::new(a, b, c, d, e)?.into(),
        Kind::Tri => BlockTriMatrix::new(a, b, c)?.into(),
        Kind::Penta => BlockPentaMatrix::new(e, a, b, c, d)?.into(),
    })
}

/// Per-row slot blocks with zeros at positions outside the band.
pub(crate) fn operator_rows(op: &Operator) -> Vec<Vec<Block>> {
    let (n, m) = (op.n(), op.m());
    let kind = op.kind();
    let z = Block::zeros(m);
    (0..n)
        .map(|k| {
            (0..kind.blocks_per_row())
                .map(|s| match op {
                    Operator::Cbts(t) => [&t.a()[k], &t.b()[k], &t.c()[k]][s].clone(),
                    Operator::Cbps(p) => [&p.a()[k], &p.b()[k], &p.c()[k], &p.d()[k], &p.e()[k]][s].clone(),
                    Operator::Tri(t) => match s {
                        A if k >= 1 => t.sub()[k - 1].clone(),
                        B => t.diag()[k].clone(),
                        C if k + 1 < n => t.sup()[k].clone(),
                        _ => z.clone(),
                    },
                    Operator::Penta(p) => match s {
                        A if k >= 1 => p.sub()[k - 1].clone(),
                        B => p.diag()[k].clone(),
                        C if k + 1 < n => p.sup()[k].clone(),
                        D if k + 2 < n => p.supsup()[k].clone(),
                        E if k >= 2 => p.subsub()[k - 2].clone(),
                        _ => z.clone(),
                    },
                })
                .collect()
        })
        .collect()
}

fn push_real(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("writing to a String");
}

fn push_vector_section(out: &mut String, tag: &str, v: &[SmallVec]) {
    out.push_str(tag);
    out.push('\n');
    for block in v {
        let mut first = true;
        for &x in block.as_slice() {
            if !first {
                out.push(' ');
            }
            first = false;
            push_real(out, x);
        }
        out.push('\n');
    }
}

/// Serializes an operator with optional right-hand side and solution.
pub fn write_cbx(op: &Operator, rhs: Option<&[SmallVec]>, solution: Option<&[SmallVec]>) -> String {
    let (n, m) = (op.n(), op.m());
    let kind = op.kind();
    let names = ["A", "B", "C", "D", "E"];
    let mut out = String::new();
    writeln!(out, "{MAGIC} {kind} {n} {m}").unwrap();
    for (k, row) in operator_rows(op).iter().enumerate() {
        writeln!(out, "# block row {}", k + 1).unwrap();
        for (s, b) in row.iter().enumerate() {
            writeln!(out, "# {}", names[s]).unwrap();
            for i in 0..m {
                for (j, &v) in b.row(i).iter().enumerate() {
                    if j > 0 {
                        out.push(' ');
                    }
                    push_real(&mut out, v);
                }
                out.push('\n');
            }
        }
    }
    if let Some(r) = rhs {
        push_vector_section(&mut out, "RHS", r);
    }
    if let Some(x) = solution {
        push_vector_section(&mut out, "SOL", x);
    }
    out
}

struct Tokens<'a> {
    items: Vec<&'a str>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let items = text
            .lines()
            .map(|line| line.split('#').next().unwrap_or(""))
            .flat_map(|line| line.split_ascii_whitespace())
            .collect();
        Tokens { items, pos: 0 }
    }

    /// 1-based index of the next token.
    fn index(&self) -> usize {
        self.pos + 1
    }

    fn next(&mut self, what: &str) -> Result<&'a str> {
        let t = self.items.get(self.pos).copied().ok_or_else(|| Error::Format {
            token: self.index(),
            message: format!("unexpected end of input, expected {what}"),
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn peek(&self) -> Option<&'a str> {
        self.items.get(self.pos).copied()
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        let idx = self.index();
        let t = self.next(what)?;
        t.parse().map_err(|_| Error::Format {
            token: idx,
            message: format!("expected {what} (a non-negative integer), found '{t}'"),
        })
    }

    fn real(&mut self) -> Result<f64> {
        let idx = self.index();
        let t = self.next("a real number")?;
        // Rust also accepts "inf"/"nan" spellings; those are rejected below.
        let v: f64 = t.parse().map_err(|_| Error::Format {
            token: idx,
            message: format!("expected a real number, found '{t}'"),
        })?;
        if !v.is_finite() {
            return Err(Error::NonFiniteToken { token: idx });
        }
        Ok(v)
    }

    fn vector(&mut self, n: usize, m: usize) -> Result<Vec<SmallVec>> {
        (0..n)
            .map(|_| {
                let v = (0..m).map(|_| self.real()).collect::<Result<Vec<_>>>()?;
                SmallVec::new(v)
            })
            .collect()
    }
}

/// Parses a CBX1 document.
pub fn parse_cbx(text: &str) -> Result<CbxFile> {
    let mut tok = Tokens::new(text);
    let magic = tok.next("magic token")?;
    if magic != MAGIC {
        return Err(Error::Format {
            token: 1,
            message: format!("expected magic '{MAGIC}', found '{magic}'"),
        });
    }
    let kind_idx = tok.index();
    let kind: Kind = tok.next("kind")?.parse().map_err(|message| Error::Format {
        token: kind_idx,
        message,
    })?;
    let n = tok.usize("n")?;
    let m = tok.usize("m")?;
    if m == 0 {
        return Err(Error::dim("block order m must be at least 1"));
    }
    check_min_n(kind, n)?;

    let per_row = kind.blocks_per_row();
    let mut rows = Vec::with_capacity(n);
    for k in 0..n {
        let mut row = Vec::with_capacity(per_row);
        for s in 0..per_row {
            let start = tok.index();
            let vals = (0..m * m).map(|_| tok.real()).collect::<Result<Vec<_>>>()?;
            if !slot_present(kind, n, k, s) && vals.iter().any(|&v| v != 0.0) {
                return Err(Error::Format {
                    token: start,
                    message: format!(
                        "block {} of row {} lies outside the {kind} band and must be zero",
                        ["A", "B", "C", "D", "E"][s],
                        k + 1
                    ),
                });
            }
            row.push(Block::from_row_major(m, vals)?);
        }
        rows.push(row);
    }
    let operator = operator_from_rows(kind, rows)?;

    let mut rhs = None;
    let mut solution = None;
    while let Some(tag) = tok.peek() {
        let idx = tok.index();
        let slot = match tag {
            "RHS" => &mut rhs,
            "SOL" => &mut solution,
            other => {
                return Err(Error::Format {
                    token: idx,
                    message: format!("expected RHS, SOL or end of input, found '{other}'"),
                })
            }
        };
        if slot.is_some() {
            return Err(Error::Format {
                token: idx,
                message: format!("duplicate {tag} section"),
            });
        }
        tok.next(tag)?;
        *slot = Some(tok.vector(n, m)?);
    }

    Ok(CbxFile {
        operator,
        rhs,
        solution,
    })
}
