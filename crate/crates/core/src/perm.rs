//! Permutations on `{1..m}`, parity, and products of epsilon symbols.
//!
//! Everything here is 1-based: a permutation of degree `m` maps the points
//! `1..=m`, and epsilon symbols take index values in `1..=m`. This matches
//! the subscript conventions used throughout the rest of the engine.

use std::fmt;

use crate::error::{Error, Result};

/// A permutation in one-line notation: `images[i - 1]` is the image of `i`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    /// The identity on `{1..m}`.
    pub fn identity(m: usize) -> Self {
        Permutation {
            images: (1..=m).collect(),
        }
    }

    /// Builds a permutation from its one-line notation (1-based values).
    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let m = images.len();
        let mut seen = vec![false; m];
        for &v in &images {
            if v == 0 || v > m {
                return Err(Error::InvalidPermutation(format!(
                    "value {v} out of range 1..={m}"
                )));
            }
            if seen[v - 1] {
                return Err(Error::InvalidPermutation(format!("value {v} repeated")));
            }
            seen[v - 1] = true;
        }
        Ok(Permutation { images })
    }

    /// Parses cycle notation such as `"(23)(67)"`, with the degree supplied
    /// separately. `"(1)"`, `"()"` and the empty string denote the identity.
    ///
    /// Elements inside a cycle may be separated by spaces or commas. With no
    /// separator each character is read as a single digit, which is only
    /// unambiguous for degree <= 9 (the usual compact notation).
    /// Cycles are composed right to left; disjoint cycles commute so the
    /// order is irrelevant for ordinary input.
    pub fn from_cycles(text: &str, degree: usize) -> Result<Self> {
        let text = text.trim();
        if text.is_empty() {
            return Ok(Self::identity(degree));
        }
        let mut cycles: Vec<Vec<usize>> = Vec::new();
        let mut rest = text;
        while !rest.is_empty() {
            let open = rest
                .find('(')
                .ok_or_else(|| Error::Parse(format!("expected '(' in {text:?}")))?;
            if !rest[..open].trim().is_empty() {
                return Err(Error::Parse(format!("stray text in {text:?}")));
            }
            let close = rest
                .find(')')
                .ok_or_else(|| Error::Parse(format!("unclosed '(' in {text:?}")))?;
            if close < open {
                return Err(Error::Parse(format!("mismatched parens in {text:?}")));
            }
            let body = &rest[open + 1..close];
            rest = &rest[close + 1..];
            let elems = parse_cycle_body(body, degree)?;
            let mut seen = vec![false; degree];
            for &e in &elems {
                if seen[e - 1] {
                    return Err(Error::Parse(format!("element {e} repeated in a cycle")));
                }
                seen[e - 1] = true;
            }
            if elems.len() >= 2 {
                cycles.push(elems);
            }
        }
        // Compose right to left: the rightmost cycle acts first.
        let mut images: Vec<usize> = (1..=degree).collect();
        for cycle in cycles.iter().rev() {
            for i in 1..=degree {
                let x = images[i - 1];
                images[i - 1] = apply_cycle(cycle, x);
            }
        }
        Self::from_images(images)
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    /// Image of the 1-based point `i`.
    pub fn apply(&self, i: usize) -> usize {
        self.images[i - 1]
    }

    pub fn one_line(&self) -> &[usize] {
        &self.images
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &v)| v == i + 1)
    }

    /// Composition `self . other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(
            self.degree(),
            other.degree(),
            "cannot compose permutations of degrees {} and {}",
            self.degree(),
            other.degree()
        );
        Permutation {
            images: (1..=self.degree())
                .map(|i| self.apply(other.apply(i)))
                .collect(),
        }
    }

    pub fn inverse(&self) -> Self {
        let mut images = vec![0; self.degree()];
        for (i, &v) in self.images.iter().enumerate() {
            images[v - 1] = i + 1;
        }
        Permutation { images }
    }

    /// Parity as +1 or -1, by counting inversions with a merge sort.
    pub fn parity(&self) -> i32 {
        let mut values = self.images.clone();
        let mut scratch = vec![0; values.len()];
        let inv = merge_count(&mut values, &mut scratch);
        if inv % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// Doubles a permutation of `{1..r}` into one of `{1..2r}` that moves
    /// the pairs `(2i-1, 2i)` as rigid units: if `i -> j` then
    /// `2i-1 -> 2j-1` and `2i -> 2j`. The result is always even.
    pub fn lift_to_double(&self) -> Self {
        let r = self.degree();
        let mut images = vec![0; 2 * r];
        for i in 1..=r {
            let j = self.apply(i);
            images[2 * i - 2] = 2 * j - 1;
            images[2 * i - 1] = 2 * j;
        }
        Permutation { images }
    }

    /// Canonical disjoint-cycle form, e.g. `"(23)(67)"`, or `"(1)"` for the
    /// identity. Fixed points are omitted; cycles are listed by their
    /// smallest element and start there. Elements are concatenated as single
    /// digits for degree <= 9, otherwise separated by spaces.
    pub fn cycle_string(&self) -> String {
        let m = self.degree();
        let mut seen = vec![false; m];
        let mut out = String::new();
        for start in 1..=m {
            if seen[start - 1] || self.apply(start) == start {
                seen[start - 1] = true;
                continue;
            }
            let mut cycle = vec![start];
            seen[start - 1] = true;
            let mut x = self.apply(start);
            while x != start {
                seen[x - 1] = true;
                cycle.push(x);
                x = self.apply(x);
            }
            out.push('(');
            if m <= 9 {
                for e in &cycle {
                    out.push_str(&e.to_string());
                }
            } else {
                out.push_str(
                    &cycle
                        .iter()
                        .map(|e| e.to_string())
                        .collect::<Vec<_>>()
                        .join(" "),
                );
            }
            out.push(')');
        }
        if out.is_empty() {
            out.push_str("(1)");
        }
        out
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation[deg {}] {}", self.degree(), self.cycle_string())
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.cycle_string())
    }
}

fn apply_cycle(cycle: &[usize], x: usize) -> usize {
    match cycle.iter().position(|&e| e == x) {
        Some(p) => cycle[(p + 1) % cycle.len()],
        None => x,
    }
}

fn parse_cycle_body(body: &str, degree: usize) -> Result<Vec<usize>> {
    let body = body.trim();
    if body.is_empty() {
        return Ok(Vec::new());
    }
    let tokens: Vec<String> = if body.contains(|c: char| c.is_whitespace() || c == ',') {
        body.split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(str::to_owned)
            .collect()
    } else {
        body.chars().map(|c| c.to_string()).collect()
    };
    let mut elems = Vec::with_capacity(tokens.len());
    for t in tokens {
        let v: usize = t
            .parse()
            .map_err(|_| Error::Parse(format!("bad cycle element {t:?}")))?;
        if v == 0 || v > degree {
            return Err(Error::Parse(format!(
                "cycle element {v} out of range 1..={degree}"
            )));
        }
        elems.push(v);
    }
    Ok(elems)
}

/// Counts inversions while merge sorting `values`; returns the count.
fn merge_count(values: &mut [usize], scratch: &mut [usize]) -> u64 {
    let n = values.len();
    if n <= 1 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = {
        let (left, right) = values.split_at_mut(mid);
        merge_count(left, scratch) + merge_count(right, scratch)
    };
    let (mut i, mut j) = (0, mid);
    for s in scratch.iter_mut().take(n) {
        if i < mid && (j >= n || values[i] <= values[j]) {
            *s = values[i];
            i += 1;
        } else {
            inv += (mid - i) as u64;
            *s = values[j];
            j += 1;
        }
    }
    values.copy_from_slice(&scratch[..n]);
    inv
}

/// The totally antisymmetric symbol on `m` letters: +1/-1 for even/odd
/// permutations of `(1..m)`, 0 on a repeated index.
pub fn epsilon(indices: &[usize], m: usize) -> Result<i32> {
    if indices.len() != m {
        return Err(Error::Shape(format!(
            "epsilon expects {m} indices, got {}",
            indices.len()
        )));
    }
    let mut seen = vec![false; m];
    for &i in indices {
        if i == 0 || i > m {
            return Err(Error::IndexOutOfRange { index: i, bound: m });
        }
        if seen[i - 1] {
            return Ok(0);
        }
        seen[i - 1] = true;
    }
    let mut values = indices.to_vec();
    let mut scratch = vec![0; m];
    let inv = merge_count(&mut values, &mut scratch);
    Ok(if inv % 2 == 0 { 1 } else { -1 })
}

/// A product of `d` epsilon symbols on `m` letters, with the blocks of slots
/// selected by a permutation of degree `d * m`.
///
/// Block `t` (1-based) reads the assignment at the slots
/// `(sigma^-1((t-1)m + 1), ..., sigma^-1(t m))`, in that order. Equivalently
/// the ordered blocks are the consecutive length-`m` chunks of the one-line
/// notation of `sigma^-1`.
#[derive(Clone, Debug)]
pub struct EpsilonProductSpec {
    m: usize,
    d: usize,
    sigma: Permutation,
    inverse_line: Vec<usize>,
}

impl EpsilonProductSpec {
    pub fn new(m: usize, d: usize, sigma: Permutation) -> Result<Self> {
        if m == 0 || d == 0 {
            return Err(Error::Shape("epsilon product needs m >= 1, d >= 1".into()));
        }
        if sigma.degree() != m * d {
            return Err(Error::Shape(format!(
                "sigma has degree {}, expected {}",
                sigma.degree(),
                m * d
            )));
        }
        let inverse_line = sigma.inverse().one_line().to_vec();
        Ok(EpsilonProductSpec {
            m,
            d,
            sigma,
            inverse_line,
        })
    }

    pub fn block_size(&self) -> usize {
        self.m
    }

    pub fn block_count(&self) -> usize {
        self.d
    }

    pub fn total(&self) -> usize {
        self.m * self.d
    }

    pub fn sigma(&self) -> &Permutation {
        &self.sigma
    }

    /// The ordered slot blocks, one per epsilon factor.
    pub fn ordered_blocks(&self) -> impl Iterator<Item = &[usize]> {
        self.inverse_line.chunks(self.m)
    }
}

/// Evaluates the epsilon product at a full slot assignment
/// (`assignment[s - 1]` is the value in slot `s`).
pub fn epsilon_product(spec: &EpsilonProductSpec, assignment: &[usize]) -> Result<i32> {
    if assignment.len() != spec.total() {
        return Err(Error::Shape(format!(
            "assignment length {} does not match {} slots",
            assignment.len(),
            spec.total()
        )));
    }
    let mut product = 1;
    let mut block = Vec::with_capacity(spec.block_size());
    for slots in spec.ordered_blocks() {
        block.clear();
        block.extend(slots.iter().map(|&s| assignment[s - 1]));
        let e = epsilon(&block, spec.block_size())?;
        if e == 0 {
            return Ok(0);
        }
        product *= e;
    }
    Ok(product)
}

/// Enumerates every assignment with a nonzero epsilon product, together with
/// its sign. There are exactly `(m!)^d` of them: each block independently
/// receives a permutation of `(1..m)`.
pub fn nonzero_assignments(spec: &EpsilonProductSpec) -> Vec<(Vec<usize>, i32)> {
    use itertools::Itertools;

    let m = spec.block_size();
    let perms: Vec<(Vec<usize>, i32)> = (1..=m)
        .permutations(m)
        .map(|p| {
            let sign = Permutation::from_images(p.clone())
                .expect("permutations iterator yields valid images")
                .parity();
            (p, sign)
        })
        .collect();

    let blocks: Vec<&[usize]> = spec.ordered_blocks().collect();
    let mut out = Vec::with_capacity(perms.len().pow(spec.block_count() as u32));
    let mut assignment = vec![0usize; spec.total()];
    fill(&blocks, &perms, 0, 1, &mut assignment, &mut out);
    return out;

    fn fill(
        blocks: &[&[usize]],
        perms: &[(Vec<usize>, i32)],
        t: usize,
        sign: i32,
        assignment: &mut Vec<usize>,
        out: &mut Vec<(Vec<usize>, i32)>,
    ) {
        if t == blocks.len() {
            out.push((assignment.clone(), sign));
            return;
        }
        for (p, s) in perms {
            for (slot, &v) in blocks[t].iter().zip(p.iter()) {
                assignment[slot - 1] = v;
            }
            fill(blocks, perms, t + 1, sign * s, assignment, out);
        }
    }
}
