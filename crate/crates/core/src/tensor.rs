//! Sparse exact-rational tensors over declared axis profiles.
//!
//! The generator tensors `v_sigma` (on V-axes) and `w^eta` (on dual-W axes)
//! are built here from epsilon products, together with the tensor product,
//! axis shuffles, and the symmetrizer that projects onto the symmetric
//! power by averaging over permutations of `(V, V, W*)` triples.
//!
//! Multi-index values are 1-based (`1..=dim` per axis); axis *positions*
//! are plain 0-based vector indices.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::{nonzero_assignments, EpsilonProductSpec, Permutation};
use crate::ratio;

/// Default guard against materializing entry sets beyond this many cells.
pub const MAX_DENSE_CELLS: u64 = 10_000_000;

/// The active guard: `MAX_DENSE_CELLS` unless overridden by the
/// `BILINV_DENSE_GUARD` environment variable (read once).
pub fn dense_cell_guard() -> u64 {
    static GUARD: std::sync::OnceLock<u64> = std::sync::OnceLock::new();
    *GUARD.get_or_init(|| {
        std::env::var("BILINV_DENSE_GUARD")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(MAX_DENSE_CELLS)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisKind {
    V,
    #[serde(rename = "Wdual")]
    WDual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axis {
    pub kind: AxisKind,
    pub dim: usize,
}

/// The ordered list of axes a tensor lives over.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AxisProfile {
    axes: Vec<Axis>,
}

impl AxisProfile {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.iter().any(|a| a.dim == 0) {
            return Err(Error::Shape("axis of dimension 0".into()));
        }
        let profile = AxisProfile { axes };
        if profile.dense_len().is_none() {
            return Err(Error::Shape("profile index space overflows u64".into()));
        }
        Ok(profile)
    }

    /// The empty profile of a scalar.
    pub fn scalar() -> Self {
        AxisProfile { axes: Vec::new() }
    }

    /// `count` V-axes of dimension `n`.
    pub fn v_axes(n: usize, count: usize) -> Result<Self> {
        Self::new(vec![Axis { kind: AxisKind::V, dim: n }; count])
    }

    /// `count` dual-W axes of dimension `k`.
    pub fn w_axes(k: usize, count: usize) -> Result<Self> {
        Self::new(vec![Axis { kind: AxisKind::WDual, dim: k }; count])
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axes.is_empty()
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        let mut axes = self.axes.clone();
        axes.extend_from_slice(&other.axes);
        Self::new(axes)
    }

    /// Total number of cells of the dense index space, if it fits in u64.
    pub fn dense_len(&self) -> Option<u64> {
        let mut total: u64 = 1;
        for a in &self.axes {
            total = total.checked_mul(a.dim as u64)?;
        }
        Some(total)
    }

    /// Packs a 1-based multi-index into a row-major key. The first axis is
    /// the most significant digit, so key order is lexicographic order on
    /// multi-indices.
    pub fn pack(&self, idx: &[usize]) -> Result<u64> {
        if idx.len() != self.len() {
            return Err(Error::Shape(format!(
                "multi-index of length {} on a profile of {} axes",
                idx.len(),
                self.len()
            )));
        }
        let mut key: u64 = 0;
        for (x, a) in idx.iter().zip(&self.axes) {
            if *x == 0 || *x > a.dim {
                return Err(Error::IndexOutOfRange { index: *x, bound: a.dim });
            }
            key = key * a.dim as u64 + (*x as u64 - 1);
        }
        Ok(key)
    }

    pub fn unpack(&self, mut key: u64) -> Vec<usize> {
        let mut idx = vec![0usize; self.len()];
        for (slot, a) in idx.iter_mut().zip(&self.axes).rev() {
            *slot = (key % a.dim as u64) as usize + 1;
            key /= a.dim as u64;
        }
        idx
    }
}

/// A sparse tensor: a map from multi-indices to nonzero exact rationals.
///
/// Zero coefficients are never stored; the entry map is ordered so every
/// iteration (and therefore every serialization) is deterministic.
#[derive(Clone, PartialEq, Eq)]
pub struct SparseTensor {
    profile: AxisProfile,
    entries: BTreeMap<u64, BigRational>,
}

impl SparseTensor {
    pub fn zero(profile: AxisProfile) -> Self {
        SparseTensor { profile, entries: BTreeMap::new() }
    }

    /// The scalar 1 over the empty profile; the unit of the tensor product.
    pub fn scalar_one() -> Self {
        let mut t = Self::zero(AxisProfile::scalar());
        t.entries.insert(0, ratio::one());
        t
    }

    pub fn profile(&self) -> &AxisProfile {
        &self.profile
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds `coef` at the multi-index, removing the entry if it cancels.
    pub fn add_at(&mut self, idx: &[usize], coef: &BigRational) -> Result<()> {
        let key = self.profile.pack(idx)?;
        self.add_at_key(key, coef);
        Ok(())
    }

    fn add_at_key(&mut self, key: u64, coef: &BigRational) {
        if coef.is_zero() {
            return;
        }
        let entry = self.entries.entry(key).or_insert_with(ratio::zero);
        *entry += coef;
        if entry.is_zero() {
            self.entries.remove(&key);
        }
    }

    pub fn coefficient(&self, idx: &[usize]) -> Result<BigRational> {
        let key = self.profile.pack(idx)?;
        Ok(self.entries.get(&key).cloned().unwrap_or_else(ratio::zero))
    }

    /// Iterates entries as `(multi-index, coefficient)` in lexicographic
    /// multi-index order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, &BigRational)> + '_ {
        self.entries
            .iter()
            .map(|(k, c)| (self.profile.unpack(*k), c))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.profile != other.profile {
            return Err(Error::Shape("adding tensors over different profiles".into()));
        }
        let mut out = self.clone();
        for (k, c) in &other.entries {
            out.add_at_key(*k, c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&ratio::from_int(-1)))
    }

    pub fn scale(&self, factor: &BigRational) -> Self {
        if factor.is_zero() {
            return Self::zero(self.profile.clone());
        }
        let entries = self
            .entries
            .iter()
            .map(|(k, c)| (*k, c * factor))
            .collect();
        SparseTensor { profile: self.profile.clone(), entries }
    }

    pub fn neg(&self) -> Self {
        self.scale(&ratio::from_int(-1))
    }

    /// Tensor product over the concatenated profile. Entries multiply; the
    /// axes are disjoint so there are no collisions to merge.
    pub fn tensor_product(&self, other: &Self) -> Result<Self> {
        let profile = self.profile.concat(&other.profile)?;
        let other_cells = other
            .profile
            .dense_len()
            .expect("validated by AxisProfile::new");
        let mut entries = BTreeMap::new();
        for (ka, ca) in &self.entries {
            for (kb, cb) in &other.entries {
                entries.insert(ka * other_cells + kb, ca * cb);
            }
        }
        Ok(SparseTensor { profile, entries })
    }

    /// Reorders axes. `perm[new] = old`: the axis at old position `perm[i]`
    /// becomes axis `i` of the result.
    pub fn permute_axes(&self, perm: &[usize]) -> Result<Self> {
        let order = self.profile.len();
        if perm.len() != order {
            return Err(Error::Shape("axis permutation length mismatch".into()));
        }
        let mut seen = vec![false; order];
        for &p in perm {
            if p >= order || seen[p] {
                return Err(Error::Shape("invalid axis permutation".into()));
            }
            seen[p] = true;
        }
        let axes = perm.iter().map(|&p| self.profile.axes()[p]).collect();
        let profile = AxisProfile::new(axes)?;
        let mut out = SparseTensor::zero(profile);
        let mut idx = vec![0usize; order];
        for (old_idx, c) in self.iter() {
            for (slot, &p) in idx.iter_mut().zip(perm) {
                *slot = old_idx[p];
            }
            out.add_at(&idx, c)?;
        }
        Ok(out)
    }
}

// A derived Debug would dump packed keys; render multi-indices instead.
impl fmt::Debug for SparseTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SparseTensor[{} axes, {} entries]", self.profile.len(), self.nnz())?;
        for (idx, c) in self.iter().take(32) {
            write!(f, " {:?}={}", idx, ratio::to_string(c))?;
        }
        if self.nnz() > 32 {
            write!(f, " ...")?;
        }
        Ok(())
    }
}

/// `v_sigma`: the product of `2r/n` epsilon symbols on `n` letters packaged
/// as a tensor over `2r` V-axes. Exactly `(n!)^(2r/n)` entries, all of them
/// +1 or -1.
pub fn build_v(n: usize, r: usize, sigma: &Permutation) -> Result<SparseTensor> {
    if n == 0 || r == 0 {
        return Err(Error::Shape("build_v needs n >= 1, r >= 1".into()));
    }
    if (2 * r) % n != 0 {
        return Err(Error::Divisibility { dim: n, total: 2 * r });
    }
    let spec = EpsilonProductSpec::new(n, 2 * r / n, sigma.clone())?;
    build_from_spec(&spec, AxisProfile::v_axes(n, 2 * r)?)
}

/// `w^eta`: the product of `r/k` epsilon symbols on `k` letters over `r`
/// dual-W axes. Exactly `(k!)^(r/k)` entries of +1 or -1.
pub fn build_w(k: usize, r: usize, eta: &Permutation) -> Result<SparseTensor> {
    if k == 0 || r == 0 {
        return Err(Error::Shape("build_w needs k >= 1, r >= 1".into()));
    }
    if r % k != 0 {
        return Err(Error::Divisibility { dim: k, total: r });
    }
    let spec = EpsilonProductSpec::new(k, r / k, eta.clone())?;
    build_from_spec(&spec, AxisProfile::w_axes(k, r)?)
}

/// Number of nonzero entries a spec's tensor will have: `(m!)^d`.
pub(crate) fn support_size(spec: &EpsilonProductSpec) -> Option<u64> {
    let mfact: u64 = (1..=spec.block_size() as u64).product();
    let mut total: u64 = 1;
    for _ in 0..spec.block_count() {
        total = total.checked_mul(mfact)?;
    }
    Some(total)
}

pub(crate) fn check_support_guard(spec: &EpsilonProductSpec) -> Result<()> {
    let guard = dense_cell_guard();
    match support_size(spec) {
        Some(size) if size <= guard => Ok(()),
        size => Err(Error::Budget {
            needed: size.and_then(|s| usize::try_from(s).ok()).unwrap_or(usize::MAX),
            budget: guard as usize,
        }),
    }
}

fn build_from_spec(spec: &EpsilonProductSpec, profile: AxisProfile) -> Result<SparseTensor> {
    check_support_guard(spec)?;
    let mut t = SparseTensor::zero(profile);
    for (assignment, sign) in nonzero_assignments(spec) {
        t.add_at(&assignment, &ratio::from_int(sign as i64))?;
    }
    Ok(t)
}

/// Axis shuffle taking the block layout `V^(2r) (x) W*^r` of a generator
/// product to the interleaved triple layout `(V, V, W*)^r` expected by the
/// symmetrizer. Returned as a `perm[new] = old` mapping for `permute_axes`.
pub fn shuffle_to_triples(r: usize) -> Vec<usize> {
    let mut perm = Vec::with_capacity(3 * r);
    for t in 0..r {
        perm.push(2 * t);
        perm.push(2 * t + 1);
        perm.push(2 * r + t);
    }
    perm
}

/// Inverse of [`shuffle_to_triples`]: interleaved triples back to the block
/// layout with all V-axes first.
pub fn shuffle_to_blocks(r: usize) -> Vec<usize> {
    let mut perm = Vec::with_capacity(3 * r);
    for t in 0..r {
        perm.push(3 * t);
        perm.push(3 * t + 1);
    }
    for t in 0..r {
        perm.push(3 * t + 2);
    }
    perm
}

/// Acts by `tau` on a tensor whose axes form `r` consecutive units of
/// `unit` axes each: the whole unit `g` moves to unit position `tau(g)`.
pub fn act_units(t: &SparseTensor, tau: &Permutation, unit: usize) -> Result<SparseTensor> {
    let order = t.profile().len();
    if unit == 0 || order % unit != 0 {
        return Err(Error::Shape("axis count not a multiple of the unit size".into()));
    }
    let r = order / unit;
    if tau.degree() != r {
        return Err(Error::Shape(format!(
            "permutation of degree {} acting on {} units",
            tau.degree(),
            r
        )));
    }
    let mut perm = vec![0usize; order];
    for g in 1..=r {
        let dest = tau.apply(g);
        for o in 0..unit {
            // Unit g's axes land at unit position tau(g).
            perm[(dest - 1) * unit + o] = (g - 1) * unit + o;
        }
    }
    // perm currently maps new <- old only if the profile is unit-periodic;
    // permute_axes checks the profile it produces, so verify periodicity.
    for g in 1..r {
        for o in 0..unit {
            if t.profile().axes()[g * unit + o] != t.profile().axes()[o] {
                return Err(Error::Shape("axes are not unit-periodic".into()));
            }
        }
    }
    t.permute_axes(&perm)
}

fn check_triple_profile(t: &SparseTensor) -> Result<usize> {
    let axes = t.profile().axes();
    if axes.is_empty() || axes.len() % 3 != 0 {
        return Err(Error::Shape(
            "symmetrizer expects r repeated (V, V, Wdual) triples".into(),
        ));
    }
    let r = axes.len() / 3;
    let n = axes[0].dim;
    let k = axes[2].dim;
    for t_ in 0..r {
        let (a, b, c) = (axes[3 * t_], axes[3 * t_ + 1], axes[3 * t_ + 2]);
        let ok = a.kind == AxisKind::V
            && b.kind == AxisKind::V
            && c.kind == AxisKind::WDual
            && a.dim == n
            && b.dim == n
            && c.dim == k;
        if !ok {
            return Err(Error::Shape(
                "symmetrizer expects r repeated (V, V, Wdual) triples".into(),
            ));
        }
    }
    Ok(r)
}

/// The symmetrizer `S` on `(V (x) V (x) W*)^(x) r` in interleaved triple
/// layout: averages over all permutations of the `r` triples, each triple
/// moving as a rigid unit. Normalized by `1/r!` so that `S . S = S`.
pub fn symmetrize(t: &SparseTensor) -> Result<SparseTensor> {
    let r = check_triple_profile(t)?;
    symmetrize_units(t, r, 3)
}

/// The analogous symmetrizer on `(W*)^(x) r`, averaging over permutations
/// of the single axes.
pub fn symmetrize_w(t: &SparseTensor) -> Result<SparseTensor> {
    let axes = t.profile().axes();
    if axes.is_empty()
        || axes.iter().any(|a| a.kind != AxisKind::WDual || a.dim != axes[0].dim)
    {
        return Err(Error::Shape("w-symmetrizer expects uniform Wdual axes".into()));
    }
    symmetrize_units(t, axes.len(), 1)
}

fn symmetrize_units(t: &SparseTensor, r: usize, unit: usize) -> Result<SparseTensor> {
    use itertools::Itertools;

    let mut acc = SparseTensor::zero(t.profile().clone());
    let mut count: u64 = 0;
    for images in (1..=r).permutations(r) {
        let tau = Permutation::from_images(images)?;
        acc = acc.add(&act_units(t, &tau, unit)?)?;
        count += 1;
    }
    Ok(acc.scale(&BigRational::new(1.into(), count.into())))
}

// ---------------------------------------------------------------------------
// JSON form
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct EntryJson {
    idx: Vec<usize>,
    num: String,
    den: String,
}

#[derive(Serialize, Deserialize)]
struct TensorJson {
    profile: Vec<Axis>,
    entries: Vec<EntryJson>,
}

impl Serialize for SparseTensor {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let entries = self
            .iter()
            .map(|(idx, c)| {
                let (num, den) = ratio::to_parts(c);
                EntryJson { idx, num, den }
            })
            .collect();
        TensorJson { profile: self.profile.axes().to_vec(), entries }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SparseTensor {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let raw = TensorJson::deserialize(deserializer)?;
        let profile = AxisProfile::new(raw.profile).map_err(DeError::custom)?;
        let mut t = SparseTensor::zero(profile);
        for e in raw.entries {
            let c = ratio::parse_parts(&e.num, &e.den).map_err(DeError::custom)?;
            let key = t.profile.pack(&e.idx).map_err(DeError::custom)?;
            if t.entries.contains_key(&key) {
                return Err(DeError::custom(format!("duplicate index {:?}", e.idx)));
            }
            if !c.is_zero() {
                t.entries.insert(key, c);
            }
        }
        Ok(t)
    }
}

impl fmt::Display for SparseTensor {
    /// Renders small tensors as signed sums of basis monomials, V-axes as
    /// `e_i` and dual-W axes as `f^i`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut first = true;
        for (idx, c) in self.iter() {
            let neg = ratio::is_negative(c);
            let abs = if neg { -c.clone() } else { c.clone() };
            if first {
                if neg {
                    f.write_str("-")?;
                }
                first = false;
            } else if neg {
                f.write_str(" - ")?;
            } else {
                f.write_str(" + ")?;
            }
            if !num_traits::One::is_one(&abs) {
                write!(f, "{} ", ratio::to_string(&abs))?;
            }
            let mut parts = Vec::with_capacity(idx.len());
            for (x, a) in idx.iter().zip(self.profile.axes()) {
                parts.push(match a.kind {
                    AxisKind::V => format!("e{x}"),
                    AxisKind::WDual => format!("f^{x}"),
                });
            }
            f.write_str(&parts.join("*"))?;
        }
        Ok(())
    }
}
