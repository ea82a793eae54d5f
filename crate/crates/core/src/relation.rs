//! Relation families among the generators, certified by expansion.
//!
//! Every certificate this module emits is checked before it is returned:
//! the signed sum of its terms is expanded through the tensor constructors
//! (or, for symmetrized certificates, through polynomial evaluation) and
//! must come out identically zero. A certificate that fails its own check
//! is an error, never a silently wrong artifact.
//!
//! The alternating (m+1)-term families come in two constructions. The
//! `literal` one composes the base permutation with the cyclic shifts of
//! the chosen slots; it only expands to zero when the first `m` chosen
//! slots happen to occupy one full epsilon block. When it does not, the
//! `shuffle` construction is used instead: the moving slots are placed
//! directly on a full block of positions plus one distinguished position,
//! which always yields a relation. Certificates record which construction
//! produced them.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invariant::{
    arrangement_perm, canonicalize_blocks, enumerate_pairings, evaluate_polynomial, require_gate,
    BlockForm, GeneratorId,
};
use crate::linalg::RationalMatrix;
use crate::perm::Permutation;
use crate::poly::SparsePolynomial;
use crate::ratio;
use crate::tensor::{build_v, build_w, SparseTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelationKind {
    #[serde(rename = "trivial")]
    Trivial,
    #[serde(rename = "typeA")]
    TypeA,
    #[serde(rename = "typeB")]
    TypeB,
    #[serde(rename = "symmetrized")]
    Symmetrized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Construction {
    #[serde(rename = "literal")]
    Literal,
    #[serde(rename = "shuffle")]
    Shuffle,
}

/// One signed term of a certificate. `sigma` addresses the V side,
/// `eta` the dual-W side; one-sided relations carry only one of them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertTerm {
    pub coef: BigRational,
    pub sigma: Option<Permutation>,
    pub eta: Option<Permutation>,
}

/// A signed integer combination of generators together with the evidence
/// that it expands to zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationCertificate {
    pub kind: RelationKind,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub r: usize,
    pub construction: Option<Construction>,
    pub terms: Vec<CertTerm>,
    pub verified: bool,
    /// Terms whose symmetrized image is zero, removed by
    /// [`symmetrized_relation`].
    pub dropped: Vec<CertTerm>,
}

/// A base permutation plus a sorted set of moving slots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShuffleSpec {
    pub base: Permutation,
    pub slots: Vec<usize>,
}

impl ShuffleSpec {
    /// Validates slot distinctness and range; slots are kept sorted.
    pub fn new(base: Permutation, mut slots: Vec<usize>) -> Result<Self> {
        let total = base.degree();
        slots.sort_unstable();
        if slots.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Usage("shuffle slots must be distinct".into()));
        }
        if slots.iter().any(|&s| s == 0 || s > total) {
            return Err(Error::Usage(format!(
                "shuffle slots must lie in 1..={total}"
            )));
        }
        Ok(ShuffleSpec { base, slots })
    }
}

// ---------------------------------------------------------------------------
// The alternating (m+1)-term families
// ---------------------------------------------------------------------------

/// The literal family: `sigma_j = sigma . gamma_j` where `gamma_j` cycles
/// slot `i_j` to the last chosen slot. Terms are listed with `j`
/// descending, so the first term is `+sigma` itself.
fn literal_family(base: &Permutation, slots: &[usize]) -> Vec<(i32, Permutation)> {
    let count = slots.len();
    let mut out = Vec::with_capacity(count);
    for j in (1..=count).rev() {
        let mut gamma_line: Vec<usize> = (1..=base.degree()).collect();
        // gamma_j: i_j -> i_count, i_t -> i_(t-1) for t > j.
        gamma_line[slots[j - 1] - 1] = slots[count - 1];
        for t in j + 1..=count {
            gamma_line[slots[t - 1] - 1] = slots[t - 2];
        }
        let gamma = Permutation::from_images(gamma_line).expect("gamma is a cycle on the slots");
        let sign = if (j + 1) % 2 == 0 { 1 } else { -1 };
        out.push((sign, base.compose(&gamma)));
    }
    out
}

/// The shuffle family, built directly on block arrangements.
///
/// If the base permutation already sends exactly `m` of the moving slots
/// onto one full label block (with the leftover label elsewhere), that
/// block supplies the home positions and everything else stays where the
/// base put it. Otherwise a deterministic arrangement is rebuilt from
/// scratch: the largest moving slot keeps its position, the first other
/// block becomes the home, and the remaining slots fill up ascending.
fn shuffle_family(base: &Permutation, slots: &[usize], block_size: usize) -> Vec<(i32, Permutation)> {
    let total = base.degree();
    let m = block_size;
    let count = slots.len();
    debug_assert_eq!(count, m + 1);

    let block_of = |label: usize| (label - 1) / m;
    let labels: Vec<usize> = slots.iter().map(|&s| base.apply(s)).collect();

    // Structured derivation: one block's label range fully covered.
    let mut home_block = None;
    'blocks: for b in 0..total / m {
        for l in b * m + 1..=(b + 1) * m {
            if !labels.contains(&l) {
                continue 'blocks;
            }
        }
        home_block = Some(b);
        break;
    }

    let (base_line, home_labels, dist_label) = match home_block {
        Some(b) => {
            let home: Vec<usize> = (b * m + 1..=(b + 1) * m).collect();
            let dist = *labels
                .iter()
                .find(|l| block_of(**l) != b)
                .expect("one moving label lies outside the home block");
            (base.inverse().one_line().to_vec(), home, dist)
        }
        None => {
            // Rebuild: distinguished slot keeps its label position, the
            // first other block hosts the moving slots, the rest fill in
            // ascending order.
            let dist = base.apply(slots[count - 1]);
            let d_block = block_of(dist);
            let h_block = (0..total / m).find(|&b| b != d_block).expect("at least two blocks");
            let home: Vec<usize> = (h_block * m + 1..=(h_block + 1) * m).collect();
            let mut line = vec![0usize; total];
            line[dist - 1] = slots[count - 1];
            for (pos, &s) in home.iter().zip(slots.iter()) {
                line[pos - 1] = s;
            }
            let mut rest: Vec<usize> =
                (1..=total).filter(|s| !slots.contains(s)).collect();
            rest.reverse();
            for v in line.iter_mut() {
                if *v == 0 {
                    *v = rest.pop().expect("exactly enough remaining slots");
                }
            }
            (line, home, dist)
        }
    };

    let mut out = Vec::with_capacity(count);
    for j in (1..=count).rev() {
        let mut line = base_line.clone();
        let movers = slots.iter().filter(|&&s| s != slots[j - 1]);
        for (&pos, &s) in home_labels.iter().zip(movers) {
            line[pos - 1] = s;
        }
        line[dist_label - 1] = slots[j - 1];
        let arrangement = Permutation::from_images(line)
            .expect("moving slots permute their own positions")
            .inverse();
        let sign = if (j + 1) % 2 == 0 { 1 } else { -1 };
        out.push((sign, arrangement));
    }
    out
}

fn expand_family(
    family: &[(i32, Permutation)],
    build: &dyn Fn(&Permutation) -> Result<SparseTensor>,
) -> Result<SparseTensor> {
    let mut acc: Option<SparseTensor> = None;
    for (sign, perm) in family {
        let t = build(perm)?.scale(&ratio::from_int(*sign as i64));
        acc = Some(match acc {
            None => t,
            Some(a) => a.add(&t)?,
        });
    }
    acc.ok_or_else(|| Error::Construction("empty relation family".into()))
}

fn family_certificate(
    kind: RelationKind,
    spec: &ShuffleSpec,
    block_size: usize,
    build: &dyn Fn(&Permutation) -> Result<SparseTensor>,
    to_term: &dyn Fn(i32, Permutation) -> CertTerm,
) -> Result<(Vec<CertTerm>, Construction)> {
    let literal = literal_family(&spec.base, &spec.slots);
    if expand_family(&literal, build)?.is_zero() {
        let terms = literal.into_iter().map(|(s, p)| to_term(s, p)).collect();
        return Ok((terms, Construction::Literal));
    }
    let shuffle = shuffle_family(&spec.base, &spec.slots, block_size);
    if expand_family(&shuffle, build)?.is_zero() {
        let terms = shuffle.into_iter().map(|(s, p)| to_term(s, p)).collect();
        return Ok((terms, Construction::Shuffle));
    }
    Err(Error::Construction(format!(
        "{kind:?} family does not expand to zero for base {} slots {:?}",
        spec.base, spec.slots
    )))
}

/// The alternating relation on the V side: `n + 1` moving slots in
/// `{1..2r}`, signs `(-1)^(j+1)`, certified by expanding
/// `sum_j (-1)^(j+1) v_(sigma_j)` to the zero tensor.
pub fn type_a_relation(n: usize, r: usize, spec: &ShuffleSpec) -> Result<RelationCertificate> {
    if n < 1 || (2 * r) % n != 0 {
        return Err(Error::Divisibility { dim: n, total: 2 * r });
    }
    if spec.base.degree() != 2 * r {
        return Err(Error::Shape(format!(
            "base permutation of degree {}, expected {}",
            spec.base.degree(),
            2 * r
        )));
    }
    if spec.slots.len() != n + 1 {
        return Err(Error::Usage(format!(
            "type A needs n + 1 = {} slots, got {}",
            n + 1,
            spec.slots.len()
        )));
    }
    let build = |p: &Permutation| build_v(n, r, p);
    let term = |s: i32, p: Permutation| CertTerm {
        coef: ratio::from_int(s as i64),
        sigma: Some(p),
        eta: None,
    };
    let (terms, construction) =
        family_certificate(RelationKind::TypeA, spec, n, &build, &term)?;
    Ok(RelationCertificate {
        kind: RelationKind::TypeA,
        n: Some(n),
        k: None,
        r,
        construction: Some(construction),
        terms,
        verified: true,
        dropped: Vec::new(),
    })
}

/// The alternating relation on the dual-W side: `k + 1` moving slots in
/// `{1..r}`. Signs are normalized to `(-1)^(j+1)` so the identity base on
/// slots `{1, 2, 3}` at `k = 2, r = 4` comes out exactly as
/// `w^(1) - w^(23) + w^(132)`.
pub fn type_b_relation(k: usize, r: usize, spec: &ShuffleSpec) -> Result<RelationCertificate> {
    if k < 1 || r % k != 0 {
        return Err(Error::Divisibility { dim: k, total: r });
    }
    if spec.base.degree() != r {
        return Err(Error::Shape(format!(
            "base permutation of degree {}, expected {r}",
            spec.base.degree()
        )));
    }
    if spec.slots.len() != k + 1 {
        return Err(Error::Usage(format!(
            "type B needs k + 1 = {} slots, got {}",
            k + 1,
            spec.slots.len()
        )));
    }
    let build = |p: &Permutation| build_w(k, r, p);
    let term = |s: i32, p: Permutation| CertTerm {
        coef: ratio::from_int(s as i64),
        sigma: None,
        eta: Some(p),
    };
    let (terms, construction) =
        family_certificate(RelationKind::TypeB, spec, k, &build, &term)?;
    Ok(RelationCertificate {
        kind: RelationKind::TypeB,
        n: None,
        k: Some(k),
        r,
        construction: Some(construction),
        terms,
        verified: true,
        dropped: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Trivial relations (column-swap signs)
// ---------------------------------------------------------------------------

/// One representative sign relation per generator class and block: the
/// canonical arrangement plus the same arrangement with the first two
/// entries of one block swapped sums to zero.
pub fn trivial_relations(n: usize, k: usize, r: usize) -> Result<Vec<RelationCertificate>> {
    require_gate(n, k, r)?;
    let mut out = Vec::new();
    let mut side = |pairings: &[Vec<Vec<usize>>], is_v: bool| -> Result<()> {
        for blocks in pairings {
            if blocks[0].len() < 2 {
                continue;
            }
            for b in 0..blocks.len() {
                let rep = arrangement_perm(blocks)?;
                let mut swapped_blocks = blocks.clone();
                swapped_blocks[b].swap(0, 1);
                let swapped = arrangement_perm(&swapped_blocks)?;
                let term = |p: Permutation| CertTerm {
                    coef: ratio::one(),
                    sigma: is_v.then(|| p.clone()),
                    eta: (!is_v).then_some(p),
                };
                let cert = RelationCertificate {
                    kind: RelationKind::Trivial,
                    n: is_v.then_some(n),
                    k: (!is_v).then_some(k),
                    r,
                    construction: None,
                    terms: vec![term(rep), term(swapped)],
                    verified: false,
                    dropped: Vec::new(),
                };
                out.push(verify_certificate(cert)?);
            }
        }
        Ok(())
    };
    side(&enumerate_pairings(2 * r, n)?, true)?;
    side(&enumerate_pairings(r, k)?, false)?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Combining and symmetrizing
// ---------------------------------------------------------------------------

pub enum CombineSide<'a> {
    Relation(&'a RelationCertificate),
    Generator(&'a Permutation),
}

/// Tensors a one-sided relation with a fixed generator on the other side.
/// Exactly one side must be the relation.
pub fn combined_relation(
    n: usize,
    k: usize,
    r: usize,
    v_side: CombineSide,
    w_side: CombineSide,
) -> Result<RelationCertificate> {
    require_gate(n, k, r)?;
    let (rel, generator, rel_is_v) = match (v_side, w_side) {
        (CombineSide::Relation(rel), CombineSide::Generator(g)) => (rel, g, true),
        (CombineSide::Generator(g), CombineSide::Relation(rel)) => (rel, g, false),
        _ => {
            return Err(Error::Usage(
                "exactly one side of a combined relation must be a relation".into(),
            ))
        }
    };
    if rel.r != r {
        return Err(Error::Shape(format!("relation has r = {}, expected {r}", rel.r)));
    }
    let expected_degree = if rel_is_v { r } else { 2 * r };
    if generator.degree() != expected_degree {
        return Err(Error::Shape(format!(
            "generator permutation of degree {}, expected {expected_degree}",
            generator.degree()
        )));
    }
    let mut terms = Vec::with_capacity(rel.terms.len());
    for t in &rel.terms {
        let (sigma, eta) = if rel_is_v {
            match (&t.sigma, &t.eta) {
                (Some(s), None) => (s.clone(), generator.clone()),
                _ => return Err(Error::Usage("v-side relation expected".into())),
            }
        } else {
            match (&t.sigma, &t.eta) {
                (None, Some(e)) => (generator.clone(), e.clone()),
                _ => return Err(Error::Usage("w-side relation expected".into())),
            }
        };
        terms.push(CertTerm { coef: t.coef.clone(), sigma: Some(sigma), eta: Some(eta) });
    }
    let cert = RelationCertificate {
        kind: rel.kind,
        n: Some(n),
        k: Some(k),
        r,
        construction: rel.construction,
        terms,
        verified: false,
        dropped: Vec::new(),
    };
    verify_certificate(cert)
}

/// Pushes a combined relation through the symmetrizer. Each term maps to
/// its invariant polynomial; terms in the kernel (zero polynomial) are
/// dropped and reported on the certificate, and the remaining signed sum
/// is checked to be the zero polynomial.
pub fn symmetrized_relation(cert: &RelationCertificate) -> Result<RelationCertificate> {
    if !cert.verified {
        return Err(Error::Usage("symmetrize only verified certificates".into()));
    }
    let (n, k) = match (cert.n, cert.k) {
        (Some(n), Some(k)) => (n, k),
        _ => {
            return Err(Error::Usage(
                "symmetrized relations need combined (two-sided) terms".into(),
            ))
        }
    };
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut sum = SparsePolynomial::zero(crate::poly::BVars { n, k }.count());
    for t in &cert.terms {
        let (sigma, eta) = match (&t.sigma, &t.eta) {
            (Some(s), Some(e)) => (s, e),
            _ => return Err(Error::Usage("combined terms required".into())),
        };
        let g = GeneratorId::new(n, k, cert.r, sigma.clone(), eta.clone())?;
        let p = evaluate_polynomial(&g)?;
        if p.is_zero() {
            dropped.push(t.clone());
        } else {
            sum = sum.add(&p.scale(&t.coef))?;
            kept.push(t.clone());
        }
    }
    if !sum.is_zero() {
        return Err(Error::Construction(
            "symmetrized relation does not evaluate to the zero polynomial".into(),
        ));
    }
    Ok(RelationCertificate {
        kind: RelationKind::Symmetrized,
        n: cert.n,
        k: cert.k,
        r: cert.r,
        construction: cert.construction,
        terms: kept,
        verified: true,
        dropped,
    })
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

fn expand_term(term: &CertTerm, n: Option<usize>, k: Option<usize>, r: usize) -> Result<SparseTensor> {
    let v = match &term.sigma {
        Some(sigma) => {
            let n = n.ok_or_else(|| Error::Usage("v-side term without n".into()))?;
            build_v(n, r, sigma)?
        }
        None => SparseTensor::scalar_one(),
    };
    let w = match &term.eta {
        Some(eta) => {
            let k = k.ok_or_else(|| Error::Usage("w-side term without k".into()))?;
            build_w(k, r, eta)?
        }
        None => SparseTensor::scalar_one(),
    };
    Ok(v.tensor_product(&w)?.scale(&term.coef))
}

/// Expands the certificate term by term and records whether the sum is the
/// zero tensor (or, for symmetrized certificates, the zero polynomial).
pub fn verify_certificate(mut cert: RelationCertificate) -> Result<RelationCertificate> {
    if cert.terms.is_empty() {
        return Err(Error::Usage("empty certificate".into()));
    }
    let zero = match cert.kind {
        RelationKind::Symmetrized => {
            let (n, k) = match (cert.n, cert.k) {
                (Some(n), Some(k)) => (n, k),
                _ => return Err(Error::Usage("symmetrized certificate needs n and k".into())),
            };
            let mut sum = SparsePolynomial::zero(crate::poly::BVars { n, k }.count());
            for t in &cert.terms {
                let (sigma, eta) = match (&t.sigma, &t.eta) {
                    (Some(s), Some(e)) => (s.clone(), e.clone()),
                    _ => return Err(Error::Usage("combined terms required".into())),
                };
                let g = GeneratorId::new(n, k, cert.r, sigma, eta)?;
                sum = sum.add(&evaluate_polynomial(&g)?.scale(&t.coef))?;
            }
            sum.is_zero()
        }
        _ => {
            let mut acc: Option<SparseTensor> = None;
            for t in &cert.terms {
                let expanded = expand_term(t, cert.n, cert.k, cert.r)?;
                acc = Some(match acc {
                    None => expanded,
                    Some(a) => a.add(&expanded)?,
                });
            }
            acc.expect("nonempty terms").is_zero()
        }
    };
    if !zero {
        return Err(Error::Construction(
            "certificate does not expand to zero".into(),
        ));
    }
    cert.verified = true;
    Ok(cert)
}

// ---------------------------------------------------------------------------
// Canonical instance enumeration
// ---------------------------------------------------------------------------

/// Deterministic type A instances: for every canonical V-side arrangement,
/// every block as the moving home, and every slot outside it.
pub fn enumerate_type_a_specs(n: usize, r: usize) -> Result<Vec<ShuffleSpec>> {
    enumerate_side_specs(n, 2 * r)
}

/// Deterministic type B instances on the dual-W side.
pub fn enumerate_type_b_specs(k: usize, r: usize) -> Result<Vec<ShuffleSpec>> {
    enumerate_side_specs(k, r)
}

fn enumerate_side_specs(block_size: usize, total: usize) -> Result<Vec<ShuffleSpec>> {
    let mut out = Vec::new();
    for blocks in enumerate_pairings(total, block_size)? {
        let base = arrangement_perm(&blocks)?;
        for home in &blocks {
            for s in 1..=total {
                if home.contains(&s) {
                    continue;
                }
                let mut slots = home.clone();
                slots.push(s);
                out.push(ShuffleSpec::new(base.clone(), slots)?);
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Kernel span check (the desk-scale Second Fundamental Theorem)
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct DeficitEntry {
    /// Coefficients over the distinct classes, in enumeration order.
    pub coefficients: Vec<String>,
    /// The same combination spelled out as signed block forms.
    pub terms: Vec<DeficitTerm>,
    /// Its tensor expansion; identically zero entries confirm this really
    /// is a relation the emitted families missed.
    pub tensor: SparseTensor,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeficitTerm {
    pub coef: String,
    pub class: BlockForm,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpanReport {
    pub n: usize,
    pub k: usize,
    pub r: usize,
    pub num_classes: usize,
    pub ambient_dim: u64,
    pub budget: usize,
    pub truncated: bool,
    pub num_type_a_instances: usize,
    pub num_type_b_instances: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relation_span_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deficit_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spanned: Option<bool>,
    pub deficit_basis: Vec<DeficitEntry>,
}

/// The coordinate matrix of one side's class tensors: rows indexed by the
/// union of supports, one column per class arrangement.
fn side_matrix(
    tensors: &[SparseTensor],
) -> Result<RationalMatrix> {
    let mut row_of: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for t in tensors {
        for (idx, _) in t.iter() {
            let next = row_of.len();
            row_of.entry(idx).or_insert(next);
        }
    }
    let mut matrix = RationalMatrix::zero(row_of.len(), tensors.len());
    for (col, t) in tensors.iter().enumerate() {
        for (idx, c) in t.iter() {
            matrix.set(row_of[&idx], col, c.clone());
        }
    }
    Ok(matrix)
}

/// Builds the linear map from the span of distinct classes into the
/// ambient tensor space, computes its kernel exactly, and checks that the
/// kernel is spanned by the emitted type A / type B families (trivial
/// relations vanish in the class quotient). A class count above `budget`
/// yields a truncated report instead of a computation.
///
/// The class tensors factor as `v-class (x) w-class`, so the kernel of the
/// combined map decomposes as `ker(V) (x) all + pivots(V) (x) ker(W)`;
/// only the two one-sided coordinate matrices are ever eliminated.
pub fn kernel_span_check(n: usize, k: usize, r: usize, budget: usize) -> Result<SpanReport> {
    require_gate(n, k, r)?;
    let v_classes = enumerate_pairings(2 * r, n)?;
    let w_classes = enumerate_pairings(r, k)?;
    let num_classes = v_classes.len() * w_classes.len();
    let type_a_specs = enumerate_type_a_specs(n, r)?;
    let type_b_specs = enumerate_type_b_specs(k, r)?;
    let ambient_dim = (n as u64).pow(2 * r as u32) * (k as u64).pow(r as u32);
    let mut report = SpanReport {
        n,
        k,
        r,
        num_classes,
        ambient_dim,
        budget,
        truncated: num_classes > budget,
        num_type_a_instances: type_a_specs.len(),
        num_type_b_instances: type_b_specs.len(),
        kernel_dim: None,
        relation_span_dim: None,
        deficit_dim: None,
        spanned: None,
        deficit_basis: Vec::new(),
    };
    if report.truncated {
        return Ok(report);
    }

    let v_tensors = v_classes
        .iter()
        .map(|b| build_v(n, r, &arrangement_perm(b)?))
        .collect::<Result<Vec<_>>>()?;
    let w_tensors = w_classes
        .iter()
        .map(|b| build_w(k, r, &arrangement_perm(b)?))
        .collect::<Result<Vec<_>>>()?;
    let v_matrix = side_matrix(&v_tensors)?;
    let w_matrix = side_matrix(&w_tensors)?;
    let (v_rank, v_kernel) = v_matrix.rank_and_kernel();
    let (w_rank, w_kernel) = w_matrix.rank_and_kernel();
    for kv in &v_kernel {
        if v_matrix.mul_vec(kv)?.iter().any(|x| !x.is_zero()) {
            return Err(Error::Construction("v-side kernel vector fails M v = 0".into()));
        }
    }
    for kw in &w_kernel {
        if w_matrix.mul_vec(kw)?.iter().any(|x| !x.is_zero()) {
            return Err(Error::Construction("w-side kernel vector fails M v = 0".into()));
        }
    }
    let (nv, nw) = (v_classes.len(), w_classes.len());
    let kernel_dim = num_classes - v_rank * w_rank;

    // A basis of the combined kernel: every v-kernel vector against every
    // w-class, plus v-pivot classes against every w-kernel vector. The
    // v-pivot set is any set of classes completing the v-kernel, here the
    // lexicographically first independent ones.
    let mut v_pivots: Vec<usize> = Vec::new();
    {
        let mut span = crate::linalg::SpanBasis::new();
        for i in 0..v_tensors.len() {
            let mut dense = vec![ratio::zero(); v_matrix.rows()];
            for (row, c) in column_entries(&v_matrix, i) {
                dense[row] = c;
            }
            if span.insert(&dense) {
                v_pivots.push(i);
            }
        }
    }
    debug_assert_eq!(v_pivots.len(), v_rank);
    let mut kernel: Vec<Vec<BigRational>> = Vec::with_capacity(kernel_dim);
    for kv in &v_kernel {
        for cw in 0..nw {
            let mut full = vec![ratio::zero(); num_classes];
            for (cv, value) in kv.iter().enumerate() {
                full[cv * nw + cw] = value.clone();
            }
            kernel.push(full);
        }
    }
    for &cv in &v_pivots {
        for kw in &w_kernel {
            let mut full = vec![ratio::zero(); num_classes];
            for (cw, value) in kw.iter().enumerate() {
                full[cv * nw + cw] = value.clone();
            }
            kernel.push(full);
        }
    }
    debug_assert_eq!(kernel.len(), kernel_dim);

    // Reduce each relation instance to a vector over the classes.
    let v_index: BTreeMap<&Vec<Vec<usize>>, usize> =
        v_classes.iter().enumerate().map(|(i, b)| (b, i)).collect();
    let w_index: BTreeMap<&Vec<Vec<usize>>, usize> =
        w_classes.iter().enumerate().map(|(i, b)| (b, i)).collect();
    let side_vector = |cert: &RelationCertificate,
                       is_v: bool|
     -> Result<Vec<BigRational>> {
        let (index, block_size): (&BTreeMap<_, usize>, usize) =
            if is_v { (&v_index, n) } else { (&w_index, k) };
        let mut vec = vec![ratio::zero(); index.len()];
        for t in &cert.terms {
            let perm = if is_v { &t.sigma } else { &t.eta };
            let perm = perm.as_ref().expect("one-sided certificate");
            let ordered = crate::invariant::ordered_blocks_of(perm, block_size)?;
            let pairing =
                canonicalize_blocks(&ordered.iter().map(Vec::as_slice).collect::<Vec<_>>());
            let class = index[&pairing.blocks];
            vec[class] += &t.coef * ratio::from_int(pairing.sign as i64);
        }
        Ok(vec)
    };

    let mut span = crate::linalg::SpanBasis::new();
    for spec in &type_a_specs {
        let cert = type_a_relation(n, r, spec)?;
        let v_vec = side_vector(&cert, true)?;
        if v_vec.iter().all(Zero::is_zero) {
            continue;
        }
        // Certified relations lie in the kernel of the one-sided map.
        if v_matrix.mul_vec(&v_vec)?.iter().any(|x| !x.is_zero()) {
            return Err(Error::Construction(
                "a certified relation does not lie in the kernel".into(),
            ));
        }
        for cw in 0..nw {
            let mut full = vec![ratio::zero(); num_classes];
            for (cv, value) in v_vec.iter().enumerate() {
                full[cv * nw + cw] = value.clone();
            }
            span.insert(&full);
        }
    }
    for spec in &type_b_specs {
        let cert = type_b_relation(k, r, spec)?;
        let w_vec = side_vector(&cert, false)?;
        if w_vec.iter().all(Zero::is_zero) {
            continue;
        }
        if w_matrix.mul_vec(&w_vec)?.iter().any(|x| !x.is_zero()) {
            return Err(Error::Construction(
                "a certified relation does not lie in the kernel".into(),
            ));
        }
        for cv in 0..nv {
            let mut full = vec![ratio::zero(); num_classes];
            for (cw, value) in w_vec.iter().enumerate() {
                full[cv * nw + cw] = value.clone();
            }
            span.insert(&full);
        }
    }
    let span_dim = span.rank();

    let mut deficit = Vec::new();
    for kv in &kernel {
        if !span.contains(kv) {
            let mut terms = Vec::new();
            let mut tensor: Option<SparseTensor> = None;
            for (class, coef) in kv.iter().enumerate() {
                if coef.is_zero() {
                    continue;
                }
                let (cv, cw) = (class / nw, class % nw);
                let bf = BlockForm {
                    v_blocks: v_classes[cv].clone(),
                    w_blocks: w_classes[cw].clone(),
                    sign: 1,
                };
                let t = v_tensors[cv].tensor_product(&w_tensors[cw])?.scale(coef);
                tensor = Some(match tensor {
                    None => t,
                    Some(a) => a.add(&t)?,
                });
                terms.push(DeficitTerm { coef: ratio::to_string(coef), class: bf });
            }
            deficit.push(DeficitEntry {
                coefficients: kv.iter().map(ratio::to_string).collect(),
                terms,
                tensor: tensor.expect("kernel vectors are nonzero"),
            });
        }
    }

    report.kernel_dim = Some(kernel.len());
    report.relation_span_dim = Some(span_dim);
    report.deficit_dim = Some(deficit.len());
    report.spanned = Some(deficit.is_empty());
    report.deficit_basis = deficit;
    Ok(report)
}

fn column_entries(m: &RationalMatrix, col: usize) -> Vec<(usize, BigRational)> {
    let mut out = Vec::new();
    for row in 0..m.rows() {
        let v = m.get(row, col);
        if !v.is_zero() {
            out.push((row, v));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// JSON form
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TermJson {
    coef: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct CertificateJson {
    kind: RelationKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    r: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    construction: Option<Construction>,
    terms: Vec<TermJson>,
    verified: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    dropped: Vec<TermJson>,
}

impl Serialize for RelationCertificate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let term = |t: &CertTerm| TermJson {
            coef: ratio::to_string(&t.coef),
            sigma: t.sigma.as_ref().map(Permutation::cycle_string),
            eta: t.eta.as_ref().map(Permutation::cycle_string),
        };
        CertificateJson {
            kind: self.kind,
            n: self.n,
            k: self.k,
            r: self.r,
            construction: self.construction,
            terms: self.terms.iter().map(term).collect(),
            verified: self.verified,
            dropped: self.dropped.iter().map(term).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RelationCertificate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let raw = CertificateJson::deserialize(d)?;
        let term = |t: &TermJson| -> Result<CertTerm> {
            Ok(CertTerm {
                coef: ratio::parse(&t.coef)?,
                sigma: t
                    .sigma
                    .as_ref()
                    .map(|s| Permutation::from_cycles(s, 2 * raw.r))
                    .transpose()?,
                eta: t
                    .eta
                    .as_ref()
                    .map(|s| Permutation::from_cycles(s, raw.r))
                    .transpose()?,
            })
        };
        let terms = raw.terms.iter().map(term).collect::<Result<_>>().map_err(DeError::custom)?;
        let dropped = raw.dropped.iter().map(term).collect::<Result<_>>().map_err(DeError::custom)?;
        Ok(RelationCertificate {
            kind: raw.kind,
            n: raw.n,
            k: raw.k,
            r: raw.r,
            construction: raw.construction,
            terms,
            verified: raw.verified,
            dropped,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::Permutation;

    fn perm(text: &str, degree: usize) -> Permutation {
        Permutation::from_cycles(text, degree).unwrap()
    }

    fn spec(base: &str, degree: usize, slots: &[usize]) -> ShuffleSpec {
        ShuffleSpec::new(perm(base, degree), slots.to_vec()).unwrap()
    }

    fn term_names(cert: &RelationCertificate) -> Vec<(String, String)> {
        cert.terms
            .iter()
            .map(|t| {
                let p = t.sigma.as_ref().or(t.eta.as_ref()).unwrap();
                (ratio::to_string(&t.coef), p.cycle_string())
            })
            .collect()
    }

    #[test]
    fn type_b_identity_slots_123_is_sigma() {
        let cert = type_b_relation(2, 4, &spec("(1)", 4, &[1, 2, 3])).unwrap();
        assert!(cert.verified);
        assert_eq!(cert.construction, Some(Construction::Literal));
        assert_eq!(
            term_names(&cert),
            vec![
                ("1".to_string(), "(1)".to_string()),
                ("-1".to_string(), "(23)".to_string()),
                ("1".to_string(), "(132)".to_string()),
            ]
        );
    }

    #[test]
    fn type_a_r2_reproduces_the_three_term_relation() {
        let cert = type_a_relation(2, 2, &spec("(1)", 4, &[1, 2, 3])).unwrap();
        assert_eq!(cert.construction, Some(Construction::Literal));
        assert_eq!(
            term_names(&cert),
            vec![
                ("1".to_string(), "(1)".to_string()),
                ("-1".to_string(), "(23)".to_string()),
                ("1".to_string(), "(132)".to_string()),
            ]
        );
    }

    #[test]
    fn type_a_falls_back_to_shuffle_when_literal_fails() {
        // (23)(67) does not map {1,2} onto one label block, so the literal
        // family is not a relation here; the shuffle construction is.
        let cert = type_a_relation(2, 4, &spec("(23)(67)", 8, &[1, 2, 3])).unwrap();
        assert!(cert.verified);
        assert_eq!(cert.construction, Some(Construction::Shuffle));
        assert_eq!(cert.terms.len(), 3);
    }

    #[test]
    fn type_b_k1_telescopes_in_two_terms() {
        let cert = type_b_relation(1, 2, &spec("(1)", 2, &[1, 2])).unwrap();
        assert_eq!(cert.terms.len(), 2);
        assert!(cert.verified);
    }

    #[test]
    fn type_b_arbitrary_base_and_slots_verifies() {
        let cert = type_b_relation(2, 4, &spec("(23)", 4, &[2, 3, 4])).unwrap();
        assert!(cert.verified);
    }

    #[test]
    fn every_sampled_spec_produces_a_verified_certificate() {
        // Exhaustive over all bases and slot triples at k = 2, r = 4.
        use itertools::Itertools;
        let mut literal = 0usize;
        let mut shuffle = 0usize;
        for base in (1..=4).permutations(4) {
            let base = Permutation::from_images(base).unwrap();
            for slots in (1..=4).combinations(3) {
                let cert =
                    type_b_relation(2, 4, &ShuffleSpec::new(base.clone(), slots).unwrap())
                        .unwrap();
                assert!(cert.verified);
                match cert.construction.unwrap() {
                    Construction::Literal => literal += 1,
                    Construction::Shuffle => shuffle += 1,
                }
            }
        }
        assert!(literal > 0 && shuffle > 0);
    }

    #[test]
    fn trivial_relations_include_the_paper_pair() {
        let certs = trivial_relations(2, 2, 4).unwrap();
        assert!(certs.iter().all(|c| c.verified));
        // w^(23) + w^(123) = 0 appears among the w-side certificates.
        let found = certs.iter().any(|c| {
            c.terms.len() == 2
                && c.terms.iter().all(|t| t.sigma.is_none())
                && {
                    let names: Vec<String> = c
                        .terms
                        .iter()
                        .map(|t| t.eta.as_ref().unwrap().cycle_string())
                        .collect();
                    names.contains(&"(23)".to_string()) && names.contains(&"(123)".to_string())
                }
        });
        assert!(found, "expected the (23)/(123) sign pair");
    }

    #[test]
    fn sigma_rewritten_by_the_trivial_identity_still_verifies() {
        // w^(1) + w^(123) + w^(132) = 0: the alternating relation with the
        // middle term replaced through w^(123) = -w^(23).
        let cert = RelationCertificate {
            kind: RelationKind::TypeB,
            n: None,
            k: Some(2),
            r: 4,
            construction: None,
            terms: ["(1)", "(123)", "(132)"]
                .iter()
                .map(|s| CertTerm {
                    coef: ratio::one(),
                    sigma: None,
                    eta: Some(perm(s, 4)),
                })
                .collect(),
            verified: false,
            dropped: Vec::new(),
        };
        assert!(verify_certificate(cert).unwrap().verified);
    }

    #[test]
    fn combined_relation_with_v2367() {
        let sigma_rel = type_b_relation(2, 4, &spec("(1)", 4, &[1, 2, 3])).unwrap();
        let v = perm("(23)(67)", 8);
        let cert = combined_relation(
            2,
            2,
            4,
            CombineSide::Generator(&v),
            CombineSide::Relation(&sigma_rel),
        )
        .unwrap();
        assert!(cert.verified);
        assert_eq!(cert.kind, RelationKind::TypeB);
        assert!(cert.terms.iter().all(|t| t.sigma.is_some() && t.eta.is_some()));
    }

    #[test]
    fn combined_relation_r2_with_w_identity() {
        let a_rel = type_a_relation(2, 2, &spec("(1)", 4, &[1, 2, 3])).unwrap();
        let w = Permutation::identity(2);
        let cert = combined_relation(
            2,
            2,
            2,
            CombineSide::Relation(&a_rel),
            CombineSide::Generator(&w),
        )
        .unwrap();
        assert!(cert.verified);
    }

    #[test]
    fn combined_rejects_two_relations_or_none() {
        let rel = type_b_relation(2, 4, &spec("(1)", 4, &[1, 2, 3])).unwrap();
        let g = perm("(23)(67)", 8);
        assert!(matches!(
            combined_relation(
                2,
                2,
                4,
                CombineSide::Relation(&rel),
                CombineSide::Relation(&rel)
            ),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            combined_relation(
                2,
                2,
                4,
                CombineSide::Generator(&g),
                CombineSide::Generator(&Permutation::identity(4))
            ),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn symmetrizing_v2367_sigma_drops_the_identity_term() {
        let sigma_rel = type_b_relation(2, 4, &spec("(1)", 4, &[1, 2, 3])).unwrap();
        let v = perm("(23)(67)", 8);
        let combined = combined_relation(
            2,
            2,
            4,
            CombineSide::Generator(&v),
            CombineSide::Relation(&sigma_rel),
        )
        .unwrap();
        let s = symmetrized_relation(&combined).unwrap();
        assert!(s.verified);
        assert_eq!(s.kind, RelationKind::Symmetrized);
        assert_eq!(s.dropped.len(), 1);
        assert_eq!(s.dropped[0].eta.as_ref().unwrap().cycle_string(), "(1)");
        assert_eq!(s.terms.len(), 2);
    }

    #[test]
    fn symmetrizing_the_r2_relation_drops_everything() {
        let a_rel = type_a_relation(2, 2, &spec("(1)", 4, &[1, 2, 3])).unwrap();
        let combined = combined_relation(
            2,
            2,
            2,
            CombineSide::Relation(&a_rel),
            CombineSide::Generator(&Permutation::identity(2)),
        )
        .unwrap();
        let s = symmetrized_relation(&combined).unwrap();
        assert!(s.terms.is_empty());
        assert_eq!(s.dropped.len(), 3);
    }

    #[test]
    fn trivial_w_relation_tensored_with_any_v_generator() {
        let trivials = trivial_relations(2, 2, 4).unwrap();
        let w_side = trivials
            .iter()
            .find(|c| c.terms[0].eta.is_some())
            .expect("some w-side trivial relation");
        let v = perm("(12345678)", 8);
        let cert = combined_relation(
            2,
            2,
            4,
            CombineSide::Generator(&v),
            CombineSide::Relation(w_side),
        )
        .unwrap();
        assert!(cert.verified);
        assert_eq!(cert.kind, RelationKind::Trivial);
    }

    #[test]
    fn symmetrizing_a_trivial_relation_is_a_sign_identity() {
        // Both terms carry the same polynomial up to sign, so the
        // symmetrized certificate verifies (either both kept or both
        // dropped).
        let trivials = trivial_relations(2, 2, 4).unwrap();
        let w_side = trivials
            .iter()
            .find(|c| c.terms[0].eta.is_some())
            .unwrap();
        let v = perm("(23)(67)", 8);
        let combined = combined_relation(
            2,
            2,
            4,
            CombineSide::Generator(&v),
            CombineSide::Relation(w_side),
        )
        .unwrap();
        let s = symmetrized_relation(&combined).unwrap();
        assert!(s.verified);
        assert!(s.terms.len() % 2 == 0);
    }

    #[test]
    fn generator_matrix_kernel_at_2_1_2_is_the_alternating_vector() {
        // The three distinct (2,1,2) v-classes, as 16-dimensional vectors,
        // have rank 2 and kernel spanned by (1, -1, 1) in class order
        // v_(1), v_(23), v_(132).
        let classes = enumerate_pairings(4, 2).unwrap();
        let tensors: Vec<SparseTensor> = classes
            .iter()
            .map(|b| build_v(2, 2, &arrangement_perm(b).unwrap()).unwrap())
            .collect();
        let matrix = super::side_matrix(&tensors).unwrap();
        assert_eq!(matrix.rank(), 2);
        let kernel = matrix.kernel_basis();
        assert_eq!(kernel.len(), 1);
        let kv = &kernel[0];
        let scale = kv[0].clone();
        assert!(!scale.is_zero());
        assert_eq!(kv[1], -scale.clone());
        assert_eq!(kv[2], scale);
    }

    #[test]
    fn span_check_2_1_2() {
        let report = kernel_span_check(2, 1, 2, 1000).unwrap();
        assert!(!report.truncated);
        assert_eq!(report.num_classes, 3);
        assert_eq!(report.ambient_dim, 16);
        assert_eq!(report.kernel_dim, Some(1));
        assert_eq!(report.relation_span_dim, Some(1));
        assert_eq!(report.deficit_dim, Some(0));
        assert_eq!(report.spanned, Some(true));
    }

    #[test]
    fn span_check_2_1_1_has_no_kernel() {
        let report = kernel_span_check(2, 1, 1, 1000).unwrap();
        assert_eq!(report.num_classes, 1);
        assert_eq!(report.kernel_dim, Some(0));
        assert_eq!(report.spanned, Some(true));
    }

    #[test]
    fn span_check_2_2_2_deficit_zero() {
        let report = kernel_span_check(2, 2, 2, 1000).unwrap();
        assert_eq!(report.num_classes, 3);
        assert_eq!(report.ambient_dim, 64);
        assert_eq!(report.kernel_dim, Some(1));
        assert_eq!(report.deficit_dim, Some(0));
    }

    #[test]
    fn span_check_respects_the_budget() {
        let report = kernel_span_check(2, 2, 4, 10).unwrap();
        assert!(report.truncated);
        assert_eq!(report.num_classes, 315);
        assert_eq!(report.kernel_dim, None);
    }

    #[test]
    fn certificate_json_round_trip() {
        let cert = type_b_relation(2, 4, &spec("(1)", 4, &[1, 2, 3])).unwrap();
        let text = serde_json::to_string(&cert).unwrap();
        assert!(text.contains("\"kind\":\"typeB\""));
        assert!(text.contains("\"construction\":\"literal\""));
        let back: RelationCertificate = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cert);
    }
}
