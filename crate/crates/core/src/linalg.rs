//! Exact rational linear algebra: rank, kernel bases, span membership.
//!
//! Elimination is fraction-free (Bareiss): rows are scaled to integers and
//! reduced with the two-term determinant update, which keeps intermediate
//! entries as single big integers instead of compounding fractions. The
//! pivot rule is "first nonzero in row-major order" so every basis the
//! module emits is reproducible.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::ratio;

/// A sparse exact-rational matrix. No zero entries are stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    entries: BTreeMap<(usize, usize), BigRational>,
}

impl RationalMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        RationalMatrix { rows, cols, entries: BTreeMap::new() }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n, n);
        for i in 0..n {
            m.set(i, i, ratio::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<BigRational>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged matrix rows".into()));
        }
        let mut m = Self::zero(r, c);
        for (i, row) in rows.into_iter().enumerate() {
            for (j, v) in row.into_iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> BigRational {
        self.entries.get(&(i, j)).cloned().unwrap_or_else(ratio::zero)
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigRational) {
        assert!(i < self.rows && j < self.cols, "matrix index out of range");
        if v.is_zero() {
            self.entries.remove(&(i, j));
        } else {
            self.entries.insert((i, j), v);
        }
    }

    pub fn mul_vec(&self, v: &[BigRational]) -> Result<Vec<BigRational>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against {} columns",
                v.len(),
                self.cols
            )));
        }
        let mut out = vec![ratio::zero(); self.rows];
        for ((i, j), c) in &self.entries {
            out[*i] += c * &v[*j];
        }
        Ok(out)
    }

    fn dense_rows(&self) -> Vec<Vec<BigRational>> {
        let mut rows = vec![vec![ratio::zero(); self.cols]; self.rows];
        for ((i, j), c) in &self.entries {
            rows[*i][*j] = c.clone();
        }
        rows
    }

    pub fn rank(&self) -> usize {
        echelon(self.dense_rows()).pivot_cols.len()
    }

    /// An exact basis of the right kernel: every returned `v` satisfies
    /// `M v = 0`. The basis vectors correspond to the free columns in
    /// ascending order, each with a 1 in its own free coordinate.
    pub fn kernel_basis(&self) -> Vec<Vec<BigRational>> {
        self.rank_and_kernel().1
    }

    /// Rank and right-kernel basis from a single elimination.
    pub fn rank_and_kernel(&self) -> (usize, Vec<Vec<BigRational>>) {
        let ech = echelon(self.dense_rows());
        let rank = ech.pivot_cols.len();
        (rank, kernel_from_echelon(&ech, self.cols))
    }

    /// Exact determinant of a square matrix.
    pub fn determinant(&self) -> Result<BigRational> {
        if self.rows != self.cols {
            return Err(Error::Shape("determinant of a non-square matrix".into()));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(ratio::one());
        }
        // Scale rows to integers, run Bareiss, divide the scales back out.
        let mut scale = ratio::one();
        let mut rows: Vec<Vec<BigInt>> = Vec::with_capacity(n);
        for row in self.dense_rows() {
            let (int_row, s) = clear_denominators(&row);
            scale *= s;
            rows.push(int_row);
        }
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for p in 0..n {
            if rows[p][p].is_zero() {
                let swap = (p + 1..n).find(|&i| !rows[i][p].is_zero());
                match swap {
                    Some(i) => {
                        rows.swap(p, i);
                        sign = -sign;
                    }
                    None => return Ok(ratio::zero()),
                }
            }
            for i in p + 1..n {
                for j in p + 1..n {
                    let num = &rows[i][j] * &rows[p][p] - &rows[i][p] * &rows[p][j];
                    // Exact by Sylvester's identity.
                    rows[i][j] = num / &prev;
                }
                rows[i][p] = BigInt::zero();
            }
            prev = rows[p][p].clone();
        }
        let det_int = BigRational::from_integer(sign * rows[n - 1][n - 1].clone());
        Ok(det_int / scale)
    }

    /// Exact inverse by Gauss-Jordan; errors on a singular matrix.
    pub fn inverse(&self) -> Result<RationalMatrix> {
        if self.rows != self.cols {
            return Err(Error::Shape("inverse of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut left = self.dense_rows();
        let mut right = RationalMatrix::identity(n).dense_rows();
        for p in 0..n {
            let pivot_row = (p..n).find(|&i| !left[i][p].is_zero());
            let Some(pr) = pivot_row else {
                return Err(Error::SingularMatrix);
            };
            left.swap(p, pr);
            right.swap(p, pr);
            let inv = left[p][p].clone().recip();
            for j in 0..n {
                left[p][j] *= &inv;
                right[p][j] *= &inv;
            }
            for i in 0..n {
                if i == p || left[i][p].is_zero() {
                    continue;
                }
                let f = left[i][p].clone();
                for j in 0..n {
                    let lv = &left[p][j] * &f;
                    left[i][j] -= lv;
                    let rv = &right[p][j] * &f;
                    right[i][j] -= rv;
                }
            }
        }
        RationalMatrix::from_rows(right)
    }
}

/// An incrementally built row space for repeated rank and membership
/// queries: rows are kept reduced, sparse, and keyed by leading column.
/// Suited to streams of mostly-dependent sparse vectors where a fresh
/// elimination per query would be wasteful.
#[derive(Clone, Debug, Default)]
pub struct SpanBasis {
    rows: BTreeMap<usize, BTreeMap<usize, BigRational>>,
}

impl SpanBasis {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    fn reduce(&self, v: &[BigRational]) -> BTreeMap<usize, BigRational> {
        let mut work: BTreeMap<usize, BigRational> = v
            .iter()
            .enumerate()
            .filter(|(_, x)| !x.is_zero())
            .map(|(i, x)| (i, x.clone()))
            .collect();
        loop {
            let Some((&lead, _)) = work.iter().next() else { break };
            let Some(row) = self.rows.get(&lead) else { break };
            let factor = work[&lead].clone();
            for (col, coef) in row {
                let delta = coef * &factor;
                match work.entry(*col) {
                    std::collections::btree_map::Entry::Vacant(e) => {
                        e.insert(-delta);
                    }
                    std::collections::btree_map::Entry::Occupied(mut e) => {
                        *e.get_mut() -= delta;
                        if e.get().is_zero() {
                            e.remove();
                        }
                    }
                }
            }
        }
        work
    }

    /// Adds a vector to the span; returns true if it enlarged the span.
    pub fn insert(&mut self, v: &[BigRational]) -> bool {
        let mut residual = self.reduce(v);
        let Some((&lead, _)) = residual.iter().next() else {
            return false;
        };
        let inv = residual[&lead].clone().recip();
        for coef in residual.values_mut() {
            *coef *= &inv;
        }
        self.rows.insert(lead, residual);
        true
    }

    /// Exact membership test.
    pub fn contains(&self, v: &[BigRational]) -> bool {
        self.reduce(v).is_empty()
    }
}

/// Exact membership of `v` in the span of `basis`.
pub fn in_span(v: &[BigRational], basis: &[Vec<BigRational>]) -> Result<bool> {
    if basis.iter().any(|b| b.len() != v.len()) {
        return Err(Error::DimensionMismatch(
            "span vectors of differing lengths".into(),
        ));
    }
    if v.iter().all(Zero::is_zero) {
        return Ok(true);
    }
    if basis.is_empty() {
        return Ok(false);
    }
    let base = RationalMatrix::from_rows(basis.to_vec())?;
    let mut extended = basis.to_vec();
    extended.push(v.to_vec());
    let ext = RationalMatrix::from_rows(extended)?;
    Ok(base.rank() == ext.rank())
}

struct Echelon {
    /// Integer rows in echelon form (fraction-free; row scaling only).
    rows: Vec<Vec<BigInt>>,
    pivot_cols: Vec<usize>,
}

fn clear_denominators(row: &[BigRational]) -> (Vec<BigInt>, BigRational) {
    let mut lcm = BigInt::one();
    for v in row {
        if !v.is_zero() {
            lcm = lcm.lcm(v.denom());
        }
    }
    let ints = row
        .iter()
        .map(|v| (v * BigRational::from_integer(lcm.clone())).to_integer())
        .collect();
    (ints, BigRational::from_integer(lcm))
}

fn normalize_row(row: &mut [BigInt]) {
    let mut g = BigInt::zero();
    for v in row.iter() {
        g = g.gcd(v);
    }
    if g.is_zero() || g.is_one() {
        return;
    }
    for v in row.iter_mut() {
        *v = &*v / &g;
    }
}

/// Fraction-free (Bareiss) row reduction with first-nonzero pivoting.
///
/// Every row below the pivot receives the two-term update, including rows
/// whose head entry is already zero; the update then divides exactly by the
/// previous pivot (Sylvester's identity), which is what keeps the integers
/// from compounding.
fn echelon(rational_rows: Vec<Vec<BigRational>>) -> Echelon {
    let mut rows: Vec<Vec<BigInt>> = rational_rows
        .iter()
        .map(|r| clear_denominators(r).0)
        .collect();
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    let mut pivot_cols = Vec::new();
    let mut pivot_row = 0usize;
    let mut prev = BigInt::one();
    for col in 0..ncols {
        if pivot_row == nrows {
            break;
        }
        let found = (pivot_row..nrows).find(|&i| !rows[i][col].is_zero());
        let Some(pr) = found else { continue };
        rows.swap(pivot_row, pr);
        let (top, below) = rows.split_at_mut(pivot_row + 1);
        let prow = &top[pivot_row];
        for row in below.iter_mut() {
            let head = row[col].clone();
            for j in 0..ncols {
                if j == col {
                    continue;
                }
                let num = &row[j] * &prow[col] - &head * &prow[j];
                row[j] = num / &prev;
            }
            row[col] = BigInt::zero();
        }
        prev = rows[pivot_row][col].clone();
        pivot_cols.push(col);
        pivot_row += 1;
    }
    for row in rows.iter_mut() {
        normalize_row(row);
    }
    Echelon { rows, pivot_cols }
}

fn kernel_from_echelon(ech: &Echelon, cols: usize) -> Vec<Vec<BigRational>> {
    let pivots = &ech.pivot_cols;
    let rank = pivots.len();
    // Back-substitute over the rationals; the echelon phase already kept
    // entry growth in check.
    let rows: Vec<Vec<BigRational>> = ech.rows[..rank]
        .iter()
        .map(|r| r.iter().map(|v| BigRational::from_integer(v.clone())).collect())
        .collect();
    let is_pivot: Vec<bool> = {
        let mut v = vec![false; cols];
        for &p in pivots {
            v[p] = true;
        }
        v
    };
    let mut basis = Vec::new();
    for free in 0..cols {
        if is_pivot[free] {
            continue;
        }
        let mut vec = vec![ratio::zero(); cols];
        vec[free] = ratio::one();
        // Solve for pivot coordinates bottom-up.
        for row_i in (0..rank).rev() {
            let p = pivots[row_i];
            let mut acc = ratio::zero();
            for j in p + 1..cols {
                if !rows[row_i][j].is_zero() && !vec[j].is_zero() {
                    acc += &rows[row_i][j] * &vec[j];
                }
            }
            vec[p] = -acc / &rows[row_i][p];
        }
        basis.push(vec);
    }
    basis
}
