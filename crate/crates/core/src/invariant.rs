//! Generator identifiers, the divisibility existence gate, canonical block
//! forms modulo sign, enumeration of the distinct generator list, and
//! evaluation of generators as polynomials in the form entries.
//!
//! A generator `v_sigma (x) w^eta` is determined up to sign by the two slot
//! partitions its epsilon factors read, so the canonical representation is
//! a pair of sorted partitions plus the sign relating the given arrangement
//! to the sorted one. Two generator ids share a tensor up to sign exactly
//! when their partitions agree, and share it exactly when the signs agree
//! too.

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RationalMatrix;
use crate::perm::{nonzero_assignments, EpsilonProductSpec, Permutation};
use crate::poly::{BVars, SparsePolynomial};
use crate::ratio;
use crate::tensor::{AxisKind, SparseTensor};

/// The Theorem-1 gate: invariants of degree `r` exist iff `n | 2r`
/// and `k | r`.
pub fn existence_gate(n: usize, k: usize, r: usize) -> bool {
    n >= 1 && k >= 1 && r >= 1 && (2 * r) % n == 0 && r % k == 0
}

pub fn require_gate(n: usize, k: usize, r: usize) -> Result<()> {
    if existence_gate(n, k, r) {
        Ok(())
    } else {
        Err(Error::Gate { n, k, r })
    }
}

/// A raw generator: dimensions, degree, and the two permutations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorId {
    pub n: usize,
    pub k: usize,
    pub r: usize,
    pub sigma: Permutation,
    pub eta: Permutation,
}

impl GeneratorId {
    pub fn new(n: usize, k: usize, r: usize, sigma: Permutation, eta: Permutation) -> Result<Self> {
        require_gate(n, k, r)?;
        if sigma.degree() != 2 * r {
            return Err(Error::Shape(format!(
                "sigma has degree {}, expected {}",
                sigma.degree(),
                2 * r
            )));
        }
        if eta.degree() != r {
            return Err(Error::Shape(format!(
                "eta has degree {}, expected {}",
                eta.degree(),
                r
            )));
        }
        Ok(GeneratorId { n, k, r, sigma, eta })
    }

    /// The tensor `v_sigma (x) w^eta` in block layout (V-axes first).
    pub fn tensor(&self) -> Result<SparseTensor> {
        let v = crate::tensor::build_v(self.n, self.r, &self.sigma)?;
        let w = crate::tensor::build_w(self.k, self.r, &self.eta)?;
        v.tensor_product(&w)
    }
}

/// An unordered partition of `{1..total}` into equal-size blocks, plus the
/// sign relating some original ordered arrangement to this sorted form.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pairing {
    pub blocks: Vec<Vec<usize>>,
    pub sign: i32,
}

/// Sorts an ordered block arrangement into canonical form: each block
/// ascending (tracking the rearrangement parity), blocks ordered by least
/// element (no sign; whole epsilon factors commute).
pub fn canonicalize_blocks(ordered_blocks: &[&[usize]]) -> Pairing {
    let mut sign = 1i32;
    let mut blocks: Vec<Vec<usize>> = Vec::with_capacity(ordered_blocks.len());
    for &block in ordered_blocks {
        let mut sorted = block.to_vec();
        // Parity of the sort = parity of the block as a sequence.
        let mut inversions = 0usize;
        for i in 0..sorted.len() {
            for j in i + 1..sorted.len() {
                if sorted[i] > sorted[j] {
                    inversions += 1;
                }
            }
        }
        if inversions % 2 == 1 {
            sign = -sign;
        }
        sorted.sort_unstable();
        blocks.push(sorted);
    }
    blocks.sort_by_key(|b| b[0]);
    Pairing { blocks, sign }
}

/// The ordered blocks a permutation's epsilon product reads:
/// consecutive chunks of the one-line form of its inverse.
pub fn ordered_blocks_of(perm: &Permutation, block_size: usize) -> Result<Vec<Vec<usize>>> {
    if perm.degree() % block_size != 0 {
        return Err(Error::Divisibility { dim: block_size, total: perm.degree() });
    }
    Ok(perm
        .inverse()
        .one_line()
        .chunks(block_size)
        .map(<[usize]>::to_vec)
        .collect())
}

/// The arrangement permutation whose ordered blocks are exactly `blocks`.
pub fn arrangement_perm(blocks: &[Vec<usize>]) -> Result<Permutation> {
    let line: Vec<usize> = blocks.iter().flatten().copied().collect();
    Ok(Permutation::from_images(line)?.inverse())
}

/// Canonical form of a generator: both partitions plus the overall sign.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct BlockForm {
    pub v_blocks: Vec<Vec<usize>>,
    pub w_blocks: Vec<Vec<usize>>,
    pub sign: i32,
}

impl BlockForm {
    pub fn n(&self) -> usize {
        self.v_blocks[0].len()
    }

    pub fn k(&self) -> usize {
        self.w_blocks[0].len()
    }

    pub fn r(&self) -> usize {
        self.w_blocks.len() * self.k()
    }

    /// Rebuilds the tensor of the canonical representative times `sign`.
    pub fn tensor(&self) -> Result<SparseTensor> {
        let g = self.generator_id()?;
        Ok(g.tensor()?.scale(&ratio::from_int(self.sign as i64)))
    }

    /// The canonical-arrangement generator carrying this block form.
    pub fn generator_id(&self) -> Result<GeneratorId> {
        GeneratorId::new(
            self.n(),
            self.k(),
            self.r(),
            arrangement_perm(&self.v_blocks)?,
            arrangement_perm(&self.w_blocks)?,
        )
    }
}

/// Canonicalizes a generator id. Equal blocks mean tensors equal up to
/// sign; equal blocks and sign mean equal tensors.
pub fn canonicalize(g: &GeneratorId) -> Result<BlockForm> {
    let v_ordered = ordered_blocks_of(&g.sigma, g.n)?;
    let w_ordered = ordered_blocks_of(&g.eta, g.k)?;
    let v = canonicalize_blocks(&v_ordered.iter().map(Vec::as_slice).collect::<Vec<_>>());
    let w = canonicalize_blocks(&w_ordered.iter().map(Vec::as_slice).collect::<Vec<_>>());
    Ok(BlockForm {
        v_blocks: v.blocks,
        w_blocks: w.blocks,
        sign: v.sign * w.sign,
    })
}

/// All partitions of `{1..total}` into blocks of `size`, in lexicographic
/// order. Each partition's blocks are ascending and ordered by least
/// element. The count is `total! / (size!^(total/size) (total/size)!)`.
pub fn enumerate_pairings(total: usize, size: usize) -> Result<Vec<Vec<Vec<usize>>>> {
    if size == 0 || total % size != 0 {
        return Err(Error::Divisibility { dim: size, total });
    }
    let mut used = vec![false; total];
    let mut current: Vec<Vec<usize>> = Vec::new();
    let mut out = Vec::new();
    recurse(total, size, &mut used, &mut current, &mut out);
    return Ok(out);

    fn recurse(
        total: usize,
        size: usize,
        used: &mut Vec<bool>,
        current: &mut Vec<Vec<usize>>,
        out: &mut Vec<Vec<Vec<usize>>>,
    ) {
        let first = match (1..=total).find(|&x| !used[x - 1]) {
            Some(x) => x,
            None => {
                out.push(current.clone());
                return;
            }
        };
        used[first - 1] = true;
        let mut block = vec![first];
        pick_rest(total, size, used, current, out, &mut block, first);
        used[first - 1] = false;

        fn pick_rest(
            total: usize,
            size: usize,
            used: &mut Vec<bool>,
            current: &mut Vec<Vec<usize>>,
            out: &mut Vec<Vec<Vec<usize>>>,
            block: &mut Vec<usize>,
            last: usize,
        ) {
            if block.len() == size {
                current.push(block.clone());
                recurse(total, size, used, current, out);
                current.pop();
                return;
            }
            for x in last + 1..=total {
                if used[x - 1] {
                    continue;
                }
                used[x - 1] = true;
                block.push(x);
                pick_rest(total, size, used, current, out, block, x);
                block.pop();
                used[x - 1] = false;
            }
        }
    }
}

/// One representative block form per sign-class, in deterministic
/// (lexicographic) order. The count is `M(2r, n) * M(r, k)` with
/// `M(ab, a) = (ab)! / (a!^b b!)`.
pub fn enumerate_distinct(n: usize, k: usize, r: usize) -> Result<Vec<BlockForm>> {
    require_gate(n, k, r)?;
    let v_parts = enumerate_pairings(2 * r, n)?;
    let w_parts = enumerate_pairings(r, k)?;
    let mut out = Vec::with_capacity(v_parts.len() * w_parts.len());
    for v in &v_parts {
        for w in &w_parts {
            out.push(BlockForm { v_blocks: v.clone(), w_blocks: w.clone(), sign: 1 });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Bilinear forms and evaluation
// ---------------------------------------------------------------------------

/// A concrete vector-valued form: the `k`-tuple of `n x n` matrices
/// `B^a = (B^a_ij)` with exact rational entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BilinearForm {
    pub n: usize,
    pub k: usize,
    entries: Vec<BigRational>,
}

impl BilinearForm {
    pub fn new(n: usize, k: usize, entries: Vec<BigRational>) -> Result<Self> {
        if entries.len() != k * n * n {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {}-tuple of {}x{} matrices",
                entries.len(),
                k,
                n,
                n
            )));
        }
        Ok(BilinearForm { n, k, entries })
    }

    pub fn zero(n: usize, k: usize) -> Self {
        BilinearForm { n, k, entries: vec![ratio::zero(); k * n * n] }
    }

    pub fn get(&self, alpha: usize, i: usize, j: usize) -> &BigRational {
        &self.entries[BVars { n: self.n, k: self.k }.index(alpha, i, j)]
    }

    pub fn set(&mut self, alpha: usize, i: usize, j: usize, v: BigRational) {
        self.entries[BVars { n: self.n, k: self.k }.index(alpha, i, j)] = v;
    }

    /// Entries flattened in the `(a, i, j)` variable order.
    pub fn values(&self) -> &[BigRational] {
        &self.entries
    }
}

/// Evaluates a generator as a polynomial in the `b^a_ij`: the sum over all
/// nonzero epsilon assignments of
/// `e_v(I) e_w(J) b^(J_1)_(I_1 I_2) ... b^(J_r)_(I_(2r-1) I_(2r))`.
///
/// Only the `(n!)^(2r/n) * (k!)^(r/k)` nonzero assignments are visited,
/// never the full index grid.
pub fn evaluate_polynomial(g: &GeneratorId) -> Result<SparsePolynomial> {
    let vars = BVars { n: g.n, k: g.k };
    let v_spec = EpsilonProductSpec::new(g.n, 2 * g.r / g.n, g.sigma.clone())?;
    let w_spec = EpsilonProductSpec::new(g.k, g.r / g.k, g.eta.clone())?;
    crate::tensor::check_support_guard(&v_spec)?;
    crate::tensor::check_support_guard(&w_spec)?;
    let mut poly = SparsePolynomial::zero(vars.count());
    for (i_assign, vsign) in nonzero_assignments(&v_spec) {
        for (j_assign, wsign) in nonzero_assignments(&w_spec) {
            let mut exps = vec![0u16; vars.count()];
            for t in 1..=g.r {
                let idx = vars.index(j_assign[t - 1], i_assign[2 * t - 2], i_assign[2 * t - 1]);
                exps[idx] += 1;
            }
            poly.add_term(exps, ratio::from_int((vsign * wsign) as i64));
        }
    }
    Ok(poly)
}

/// Evaluates a block form: the canonical representative's polynomial times
/// the recorded sign.
pub fn evaluate_polynomial_blocks(bf: &BlockForm) -> Result<SparsePolynomial> {
    let p = evaluate_polynomial(&bf.generator_id()?)?;
    Ok(p.scale(&ratio::from_int(bf.sign as i64)))
}

/// Independent evaluation route: pairs an already-built generator tensor
/// (block layout, `2r` V-axes then `r` dual-W axes) against the symbolic
/// `r`-fold product of the form, entry by entry.
pub fn contract_tensor_symbolic(t: &SparseTensor) -> Result<SparsePolynomial> {
    let axes = t.profile().axes();
    let v_count = axes.iter().filter(|a| a.kind == AxisKind::V).count();
    let w_count = axes.len() - v_count;
    if v_count != 2 * w_count || w_count == 0 {
        return Err(Error::Shape(
            "expected a block-layout generator tensor (2r V-axes then r Wdual-axes)".into(),
        ));
    }
    if axes[..v_count].iter().any(|a| a.kind != AxisKind::V)
        || axes[v_count..].iter().any(|a| a.kind != AxisKind::WDual)
    {
        return Err(Error::Shape("axes are not in block layout".into()));
    }
    let r = w_count;
    let n = axes[0].dim;
    let k = axes[v_count].dim;
    let vars = BVars { n, k };
    let mut poly = SparsePolynomial::zero(vars.count());
    for (idx, c) in t.iter() {
        let mut exps = vec![0u16; vars.count()];
        for t_ in 1..=r {
            let alpha = idx[v_count + t_ - 1];
            let i = idx[2 * t_ - 2];
            let j = idx[2 * t_ - 1];
            exps[vars.index(alpha, i, j)] += 1;
        }
        poly.add_term(exps, c.clone());
    }
    Ok(poly)
}

/// Numeric specialization of `evaluate_polynomial` at a concrete form.
pub fn evaluate_at(g: &GeneratorId, form: &BilinearForm) -> Result<BigRational> {
    if form.n != g.n || form.k != g.k {
        return Err(Error::DimensionMismatch(format!(
            "form of shape (n={}, k={}) against generator (n={}, k={})",
            form.n, form.k, g.n, g.k
        )));
    }
    evaluate_polynomial(g)?.eval(form.values())
}

/// Applies `g = (a, p)` to a form: `B'^a_ij = p^a_b B^b_st (a^-1)^s_i (a^-1)^t_j`.
pub fn transform_form(
    form: &BilinearForm,
    a: &RationalMatrix,
    p: &RationalMatrix,
) -> Result<BilinearForm> {
    let (n, k) = (form.n, form.k);
    if a.rows() != n || a.cols() != n {
        return Err(Error::DimensionMismatch("a must be n x n".into()));
    }
    if p.rows() != k || p.cols() != k {
        return Err(Error::DimensionMismatch("p must be k x k".into()));
    }
    let a_inv = a.inverse()?;
    let mut out = BilinearForm::zero(n, k);
    for alpha in 1..=k {
        for i in 1..=n {
            for j in 1..=n {
                let mut acc = ratio::zero();
                for beta in 1..=k {
                    let p_ab = p.get(alpha - 1, beta - 1);
                    if p_ab.is_zero() {
                        continue;
                    }
                    for s in 1..=n {
                        for t in 1..=n {
                            let term = &p_ab
                                * form.get(beta, s, t)
                                * a_inv.get(s - 1, i - 1)
                                * a_inv.get(t - 1, j - 1);
                            acc += term;
                        }
                    }
                }
                out.set(alpha, i, j, acc);
            }
        }
    }
    Ok(out)
}

/// Checks relative invariance: `f(gB) = det(a)^(-2r/n) det(p)^(r/k) f(B)`.
///
/// The exponent pair comes from contracting each epsilon factor with copies
/// of `a^-1` (one `det(a^-1)` per V-block) and `p` (one `det p` per
/// W-block).
pub fn weight_check(
    g: &GeneratorId,
    form: &BilinearForm,
    a: &RationalMatrix,
    p: &RationalMatrix,
) -> Result<bool> {
    let det_a = a.determinant()?;
    let det_p = p.determinant()?;
    if det_a.is_zero() || det_p.is_zero() {
        return Err(Error::SingularMatrix);
    }
    let transformed = transform_form(form, a, p)?;
    let lhs = evaluate_at(g, &transformed)?;
    let weight = ratio::pow(&det_a, -((2 * g.r / g.n) as i64))?
        * ratio::pow(&det_p, (g.r / g.k) as i64)?;
    let rhs = weight * evaluate_at(g, form)?;
    Ok(lhs == rhs)
}

// ---------------------------------------------------------------------------
// JSON forms
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct FormJson {
    n: usize,
    k: usize,
    matrices: Vec<Vec<Vec<String>>>,
}

impl BilinearForm {
    pub fn to_json_value(&self) -> Result<serde_json::Value> {
        let mut matrices = Vec::with_capacity(self.k);
        for alpha in 1..=self.k {
            let mut rows = Vec::with_capacity(self.n);
            for i in 1..=self.n {
                rows.push(
                    (1..=self.n)
                        .map(|j| ratio::to_string(self.get(alpha, i, j)))
                        .collect(),
                );
            }
            matrices.push(rows);
        }
        Ok(serde_json::to_value(FormJson { n: self.n, k: self.k, matrices })?)
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        let raw: FormJson = serde_json::from_value(value)?;
        if raw.matrices.len() != raw.k {
            return Err(Error::DimensionMismatch(format!(
                "{} matrices for k = {}",
                raw.matrices.len(),
                raw.k
            )));
        }
        let mut form = BilinearForm::zero(raw.n, raw.k);
        for (alpha, matrix) in raw.matrices.iter().enumerate() {
            if matrix.len() != raw.n || matrix.iter().any(|row| row.len() != raw.n) {
                return Err(Error::DimensionMismatch(format!(
                    "matrix {} is not {} x {}",
                    alpha + 1,
                    raw.n,
                    raw.n
                )));
            }
            for (i, row) in matrix.iter().enumerate() {
                for (j, text) in row.iter().enumerate() {
                    form.set(alpha + 1, i + 1, j + 1, ratio::parse(text)?);
                }
            }
        }
        Ok(form)
    }
}

#[derive(Serialize, Deserialize)]
struct GeneratorJson {
    sigma: String,
    eta: String,
    n: usize,
    k: usize,
    r: usize,
}

impl GeneratorId {
    pub fn to_json_value(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(GeneratorJson {
            sigma: self.sigma.cycle_string(),
            eta: self.eta.cycle_string(),
            n: self.n,
            k: self.k,
            r: self.r,
        })?)
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        let raw: GeneratorJson = serde_json::from_value(value)?;
        GeneratorId::new(
            raw.n,
            raw.k,
            raw.r,
            Permutation::from_cycles(&raw.sigma, 2 * raw.r)?,
            Permutation::from_cycles(&raw.eta, raw.r)?,
        )
    }
}

#[derive(Serialize, Deserialize)]
struct BlockFormJson {
    v_blocks: Vec<Vec<usize>>,
    w_blocks: Vec<Vec<usize>>,
    sign: i32,
}

impl Serialize for BlockForm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BlockFormJson {
            v_blocks: self.v_blocks.clone(),
            w_blocks: self.w_blocks.clone(),
            sign: self.sign,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BlockForm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let raw = BlockFormJson::deserialize(d)?;
        if raw.sign != 1 && raw.sign != -1 {
            return Err(DeError::custom("sign must be +1 or -1"));
        }
        if raw.v_blocks.is_empty() || raw.w_blocks.is_empty() {
            return Err(DeError::custom("empty block list"));
        }
        let bf = BlockForm { v_blocks: raw.v_blocks, w_blocks: raw.w_blocks, sign: raw.sign };
        for (blocks, total) in [
            (&bf.v_blocks, bf.v_blocks.len() * bf.n()),
            (&bf.w_blocks, bf.w_blocks.len() * bf.k()),
        ] {
            let mut seen = vec![false; total];
            for b in blocks {
                if b.len() != blocks[0].len() || b.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(DeError::custom("blocks must be sorted and equal-sized"));
                }
                for &x in b {
                    if x == 0 || x > total || seen[x - 1] {
                        return Err(DeError::custom("blocks must partition the slot range"));
                    }
                    seen[x - 1] = true;
                }
            }
            if blocks.windows(2).any(|w| w[0][0] >= w[1][0]) {
                return Err(DeError::custom("blocks must be ordered by least element"));
            }
        }
        Ok(bf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::poly_equal;

    fn perm(text: &str, degree: usize) -> Permutation {
        Permutation::from_cycles(text, degree).unwrap()
    }

    fn q(v: i64) -> BigRational {
        ratio::from_int(v)
    }

    #[test]
    fn gate_truth_table() {
        assert!(existence_gate(2, 2, 4));
        assert!(existence_gate(2, 1, 1));
        assert!(!existence_gate(3, 2, 2));
        assert!(!existence_gate(2, 3, 4));
    }

    #[test]
    fn canonicalize_reports_the_paper_sign_flip() {
        // w^(123) = -w^(23) at k = 2, r = 4.
        let g123 = GeneratorId::new(2, 2, 4, Permutation::identity(8), perm("(123)", 4)).unwrap();
        let g23 = GeneratorId::new(2, 2, 4, Permutation::identity(8), perm("(23)", 4)).unwrap();
        let b123 = canonicalize(&g123).unwrap();
        let b23 = canonicalize(&g23).unwrap();
        assert_eq!(b123.w_blocks, b23.w_blocks);
        assert_eq!(b123.sign, -b23.sign);
        // The worked inverse table: sigma = (123) has inverse images (3,1,2,4).
        assert_eq!(perm("(123)", 4).inverse().one_line(), &[3, 1, 2, 4]);
        assert_eq!(perm("(23)", 4).inverse().one_line(), &[1, 3, 2, 4]);
        assert_eq!(b23.w_blocks, vec![vec![1, 3], vec![2, 4]]);
    }

    #[test]
    fn canonicalize_identity_is_consecutive_blocks_sign_plus() {
        let g = GeneratorId::new(2, 2, 4, Permutation::identity(8), Permutation::identity(4))
            .unwrap();
        let b = canonicalize(&g).unwrap();
        assert_eq!(b.sign, 1);
        assert_eq!(
            b.v_blocks,
            vec![vec![1, 2], vec![3, 4], vec![5, 6], vec![7, 8]]
        );
        assert_eq!(b.w_blocks, vec![vec![1, 2], vec![3, 4]]);
    }

    #[test]
    fn eta_132_and_23_differ_in_blocks() {
        let a = canonicalize(
            &GeneratorId::new(2, 2, 4, Permutation::identity(8), perm("(132)", 4)).unwrap(),
        )
        .unwrap();
        let b = canonicalize(
            &GeneratorId::new(2, 2, 4, Permutation::identity(8), perm("(23)", 4)).unwrap(),
        )
        .unwrap();
        assert_eq!(a.w_blocks, vec![vec![1, 4], vec![2, 3]]);
        assert_ne!(a.w_blocks, b.w_blocks);
    }

    #[test]
    fn canonical_sign_matches_tensor_ratio() {
        use itertools::Itertools;
        // Rebuilding from the block form reproduces the original tensor.
        for eta_img in (1..=4).permutations(4) {
            let eta = Permutation::from_images(eta_img).unwrap();
            let g = GeneratorId::new(2, 2, 4, perm("(23)(67)", 8), eta).unwrap();
            let bf = canonicalize(&g).unwrap();
            assert_eq!(bf.tensor().unwrap(), g.tensor().unwrap());
        }
    }

    #[test]
    fn pairing_counts() {
        // Independent oracle: count partitions by brute force over the
        // symmetric group images.
        assert_eq!(enumerate_pairings(4, 2).unwrap().len(), 3);
        assert_eq!(enumerate_pairings(8, 2).unwrap().len(), 105);
        assert_eq!(enumerate_pairings(2, 1).unwrap().len(), 1);
        assert_eq!(enumerate_pairings(6, 3).unwrap().len(), 10);
        assert_eq!(enumerate_distinct(2, 2, 4).unwrap().len(), 315);
        assert_eq!(enumerate_distinct(2, 1, 1).unwrap().len(), 1);
        assert_eq!(enumerate_distinct(2, 1, 2).unwrap().len(), 3);
    }

    #[test]
    fn pairings_partition_brute_force_check() {
        // Every enumerated partition is valid and they are all distinct.
        let parts = enumerate_pairings(6, 2).unwrap();
        assert_eq!(parts.len(), 15);
        let mut seen = std::collections::BTreeSet::new();
        for p in &parts {
            let mut all: Vec<usize> = p.iter().flatten().copied().collect();
            all.sort_unstable();
            assert_eq!(all, vec![1, 2, 3, 4, 5, 6]);
            assert!(seen.insert(p.clone()));
        }
    }

    #[test]
    fn gate_failure_is_an_explicit_no_invariants_error() {
        assert!(matches!(
            enumerate_distinct(3, 2, 2),
            Err(Error::Gate { n: 3, k: 2, r: 2 })
        ));
    }

    #[test]
    fn the_2_1_1_generator_is_b12_minus_b21() {
        let g = GeneratorId::new(2, 1, 1, Permutation::identity(2), Permutation::identity(1))
            .unwrap();
        let p = evaluate_polynomial(&g).unwrap();
        let vars = BVars { n: 2, k: 1 };
        let mut expected = SparsePolynomial::zero(vars.count());
        let mut e12 = vec![0u16; vars.count()];
        e12[vars.index(1, 1, 2)] = 1;
        expected.add_term(e12, q(1));
        let mut e21 = vec![0u16; vars.count()];
        e21[vars.index(1, 2, 1)] = 1;
        expected.add_term(e21, q(-1));
        assert!(poly_equal(&p, &expected).unwrap());
    }

    #[test]
    fn evaluate_at_substitutes() {
        let g = GeneratorId::new(2, 1, 1, Permutation::identity(2), Permutation::identity(1))
            .unwrap();
        // [[0, 1], [-1, 0]] gives b - c = 1 - (-1) = 2.
        let form = BilinearForm::new(2, 1, vec![q(0), q(1), q(-1), q(0)]).unwrap();
        assert_eq!(evaluate_at(&g, &form).unwrap(), q(2));
        // [[1, 2], [3, 4]] gives 2 - 3 = -1.
        let form2 = BilinearForm::new(2, 1, vec![q(1), q(2), q(3), q(4)]).unwrap();
        assert_eq!(evaluate_at(&g, &form2).unwrap(), q(-1));
    }

    #[test]
    fn evaluate_at_rejects_shape_mismatch() {
        let g = GeneratorId::new(2, 1, 1, Permutation::identity(2), Permutation::identity(1))
            .unwrap();
        let form = BilinearForm::zero(2, 2);
        assert!(matches!(evaluate_at(&g, &form), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn polynomial_is_fixed_under_triple_permutation() {
        use itertools::Itertools;
        // f is unchanged when (sigma, eta) becomes
        // (sigma . lift(tau)^-1, eta . tau^-1): the form power is symmetric
        // under permuting the r triples.
        let sigma = perm("(23)(67)", 8);
        let eta = perm("(23)", 4);
        let g = GeneratorId::new(2, 2, 4, sigma.clone(), eta.clone()).unwrap();
        let reference = evaluate_polynomial(&g).unwrap();
        for tau_img in (1..=4).permutations(4) {
            let tau = Permutation::from_images(tau_img).unwrap();
            let moved = GeneratorId::new(
                2,
                2,
                4,
                sigma.compose(&tau.lift_to_double().inverse()),
                eta.compose(&tau.inverse()),
            )
            .unwrap();
            assert!(
                poly_equal(&reference, &evaluate_polynomial(&moved).unwrap()).unwrap(),
                "tau = {tau}"
            );
        }
    }

    #[test]
    fn numeric_contraction_oracle_matches_evaluate_at() {
        // Independent route: contract the 64-entry tensor of
        // v_(23)(67) (x) w^(23) directly against the 4th power of the form
        // B1 = I, B2 = [[0,1],[1,0]].
        let g = GeneratorId::new(2, 2, 4, perm("(23)(67)", 8), perm("(23)", 4)).unwrap();
        let form = BilinearForm::new(
            2,
            2,
            [1, 0, 0, 1, 0, 1, 1, 0].iter().map(|&v| q(v)).collect(),
        )
        .unwrap();
        let tensor = g.tensor().unwrap();
        let mut oracle = ratio::zero();
        for (idx, c) in tensor.iter() {
            let mut term = c.clone();
            for t in 1..=4 {
                term *= form.get(idx[8 + t - 1], idx[2 * t - 2], idx[2 * t - 1]);
            }
            oracle += term;
        }
        assert_eq!(evaluate_at(&g, &form).unwrap(), oracle);
        assert!(!oracle.is_zero());
    }

    #[test]
    fn two_evaluation_routes_agree() {
        for (sigma, eta) in [
            ("(1)", "(1)"),
            ("(23)(67)", "(23)"),
            ("(23)(67)", "(132)"),
            ("(12345678)", "(1234)"),
        ] {
            let g = GeneratorId::new(2, 2, 4, perm(sigma, 8), perm(eta, 4)).unwrap();
            let direct = evaluate_polynomial(&g).unwrap();
            let contracted = contract_tensor_symbolic(&g.tensor().unwrap()).unwrap();
            assert!(poly_equal(&direct, &contracted).unwrap(), "{sigma} {eta}");
        }
    }

    #[test]
    fn weight_transform_on_the_antisymmetric_part() {
        // For the (2,1,1) generator, a = 2I and p = (3) rescale f by 3/4.
        let g = GeneratorId::new(2, 1, 1, Permutation::identity(2), Permutation::identity(1))
            .unwrap();
        let form = BilinearForm::new(2, 1, vec![q(1), q(5), q(2), q(-1)]).unwrap();
        let a = RationalMatrix::from_rows(vec![vec![q(2), q(0)], vec![q(0), q(2)]]).unwrap();
        let p = RationalMatrix::from_rows(vec![vec![q(3)]]).unwrap();
        let transformed = transform_form(&form, &a, &p).unwrap();
        let lhs = evaluate_at(&g, &transformed).unwrap();
        let rhs = ratio::from_pair(3, 4) * evaluate_at(&g, &form).unwrap();
        assert_eq!(lhs, rhs);
        assert!(weight_check(&g, &form, &a, &p).unwrap());
    }

    #[test]
    fn weight_check_trivial_cases() {
        let g = GeneratorId::new(2, 1, 1, Permutation::identity(2), Permutation::identity(1))
            .unwrap();
        let id2 = RationalMatrix::identity(2);
        let id1 = RationalMatrix::identity(1);
        let form = BilinearForm::new(2, 1, vec![q(1), q(5), q(2), q(-1)]).unwrap();
        assert!(weight_check(&g, &form, &id2, &id1).unwrap());
        assert!(weight_check(&g, &BilinearForm::zero(2, 1), &id2, &id1).unwrap());
        let singular =
            RationalMatrix::from_rows(vec![vec![q(1), q(1)], vec![q(1), q(1)]]).unwrap();
        assert!(weight_check(&g, &form, &singular, &id1).is_err());
    }

    #[test]
    fn json_round_trips() {
        let g = GeneratorId::new(2, 2, 4, perm("(23)(67)", 8), perm("(23)", 4)).unwrap();
        let v = g.to_json_value().unwrap();
        assert_eq!(v["sigma"], "(23)(67)");
        let back = GeneratorId::from_json_value(v).unwrap();
        assert_eq!(back, g);

        let bf = canonicalize(&g).unwrap();
        let v = serde_json::to_value(&bf).unwrap();
        let back: BlockForm = serde_json::from_value(v).unwrap();
        assert_eq!(back, bf);

        let form = BilinearForm::new(2, 1, vec![q(1), ratio::from_pair(1, 2), q(3), q(4)]).unwrap();
        let v = form.to_json_value().unwrap();
        assert_eq!(v["matrices"][0][0][1], "1/2");
        let back = BilinearForm::from_json_value(v).unwrap();
        assert_eq!(back, form);
    }

    #[test]
    fn blockform_json_rejects_malformed_blocks() {
        let bad = serde_json::json!({
            "v_blocks": [[1, 2], [2, 3]],
            "w_blocks": [[1]],
            "sign": 1
        });
        assert!(serde_json::from_value::<BlockForm>(bad).is_err());
    }
}
