//! Sparse multivariate polynomials over exact rationals, in the form
//! entries `b^a_ij`, plus the determinant pencil `P(x, y)` of a pair of
//! 2x2 forms and its discriminant.
//!
//! Variables are identified by position. For the `b` family the order is
//! lexicographic on `(a, i, j)`; monomials serialize in graded
//! lexicographic order (degree first, then exponent vector descending) so
//! that output is stable enough for golden files.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratio;

/// The variable family `b^a_ij` for a form of shape `(n, k)`:
/// `a in 1..=k`, `i, j in 1..=n`, ordered lexicographically on `(a, i, j)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BVars {
    pub n: usize,
    pub k: usize,
}

impl BVars {
    pub fn count(&self) -> usize {
        self.k * self.n * self.n
    }

    pub fn index(&self, alpha: usize, i: usize, j: usize) -> usize {
        debug_assert!(alpha >= 1 && alpha <= self.k && i >= 1 && i <= self.n && j >= 1 && j <= self.n);
        ((alpha - 1) * self.n + (i - 1)) * self.n + (j - 1)
    }

    /// JSON-facing variable names: `b[a][i][j]`.
    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.count());
        for alpha in 1..=self.k {
            for i in 1..=self.n {
                for j in 1..=self.n {
                    out.push(format!("b[{alpha}][{i}][{j}]"));
                }
            }
        }
        out
    }

    /// Human-facing name of a single variable: `b^a_ij`.
    pub fn pretty_name(&self, var: usize) -> String {
        let j = var % self.n + 1;
        let i = (var / self.n) % self.n + 1;
        let alpha = var / (self.n * self.n) + 1;
        format!("b^{alpha}_{i}{j}")
    }
}

/// A sparse polynomial: exponent vectors mapped to nonzero coefficients.
#[derive(Clone, PartialEq, Eq)]
pub struct SparsePolynomial {
    nvars: usize,
    terms: BTreeMap<Vec<u16>, BigRational>,
}

impl SparsePolynomial {
    pub fn zero(nvars: usize) -> Self {
        SparsePolynomial { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: BigRational) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn var(nvars: usize, index: usize) -> Self {
        assert!(index < nvars, "variable index out of range");
        let mut exps = vec![0u16; nvars];
        exps[index] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(exps, ratio::one());
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, exps: Vec<u16>, c: BigRational) {
        use std::collections::btree_map::Entry;
        assert_eq!(exps.len(), self.nvars, "exponent vector length mismatch");
        if c.is_zero() {
            return;
        }
        match self.terms.entry(exps) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn coefficient(&self, exps: &[u16]) -> BigRational {
        self.terms.get(exps).cloned().unwrap_or_else(ratio::zero)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.nvars != other.nvars {
            return Err(Error::VariableSetMismatch(self.nvars, other.nvars));
        }
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.scale(&ratio::from_int(-1))
    }

    pub fn scale(&self, factor: &BigRational) -> Self {
        if factor.is_zero() {
            return Self::zero(self.nvars);
        }
        SparsePolynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c * factor)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.nvars != other.nvars {
            return Err(Error::VariableSetMismatch(self.nvars, other.nvars));
        }
        let mut out = Self::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let exps = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(exps, ca * cb);
            }
        }
        Ok(out)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().map(|&x| x as u32).sum())
            .max()
            .unwrap_or(0)
    }

    /// Evaluates at a full point, one value per variable.
    pub fn eval(&self, values: &[BigRational]) -> Result<BigRational> {
        if values.len() != self.nvars {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} variables",
                values.len(),
                self.nvars
            )));
        }
        let mut acc = ratio::zero();
        for (exps, c) in &self.terms {
            let mut term = c.clone();
            for (v, &e) in values.iter().zip(exps) {
                for _ in 0..e {
                    term *= v;
                }
            }
            acc += term;
        }
        Ok(acc)
    }

    /// Terms in canonical order: graded lexicographic, highest first.
    pub fn canonical_terms(&self) -> Vec<(&Vec<u16>, &BigRational)> {
        let mut terms: Vec<_> = self.terms.iter().collect();
        terms.sort_by(|(ea, _), (eb, _)| grlex(ea, eb).reverse());
        terms
    }

    /// Renders the polynomial with a caller-supplied variable namer.
    pub fn pretty(&self, name: &dyn Fn(usize) -> String) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (pos, (exps, c)) in self.canonical_terms().into_iter().enumerate() {
            let neg = ratio::is_negative(c);
            let abs = if neg { -c.clone() } else { c.clone() };
            if pos == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mut factors: Vec<String> = Vec::new();
            for (var, &e) in exps.iter().enumerate() {
                match e {
                    0 => {}
                    1 => factors.push(name(var)),
                    _ => factors.push(format!("{}^{e}", name(var))),
                }
            }
            let is_constant = factors.is_empty();
            if !abs.is_one() || is_constant {
                out.push_str(&ratio::to_string(&abs));
                if !is_constant {
                    out.push(' ');
                }
            }
            out.push_str(&factors.join(" "));
        }
        out
    }
}

fn grlex(a: &[u16], b: &[u16]) -> Ordering {
    let da: u32 = a.iter().map(|&x| x as u32).sum();
    let db: u32 = b.iter().map(|&x| x as u32).sum();
    da.cmp(&db).then_with(|| a.cmp(b))
}

impl fmt::Debug for SparsePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SparsePolynomial[{} vars] {}",
            self.nvars,
            self.pretty(&|v| format!("x{v}"))
        )
    }
}

/// Exact coefficientwise equality; errors if the variable sets differ.
pub fn poly_equal(p: &SparsePolynomial, q: &SparsePolynomial) -> Result<bool> {
    if p.nvars != q.nvars {
        return Err(Error::VariableSetMismatch(p.nvars, q.nvars));
    }
    Ok(p == q)
}

// ---------------------------------------------------------------------------
// Determinant pencil of a pair of symbolic 2x2 forms
// ---------------------------------------------------------------------------

/// `A x^2 + B xy + C y^2` with polynomial coefficients in the `b^a_ij`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryQuadratic {
    /// Coefficient of `x^2`.
    pub x2: SparsePolynomial,
    /// Coefficient of `xy`.
    pub xy: SparsePolynomial,
    /// Coefficient of `y^2`.
    pub y2: SparsePolynomial,
}

/// The symbolic pencil `P(x, y) = det(x B1 + y B2)` for `n = k = 2`.
///
/// Coefficients come out as
/// `x^2: b^1_11 b^1_22 - b^1_12 b^1_21`,
/// `xy:  b^1_11 b^2_22 + b^1_22 b^2_11 - b^1_12 b^2_21 - b^1_21 b^2_12`,
/// `y^2: b^2_11 b^2_22 - b^2_12 b^2_21`.
pub fn pencil_determinant() -> BinaryQuadratic {
    let vars = BVars { n: 2, k: 2 };
    let nv = vars.count();
    let b = |alpha: usize, i: usize, j: usize| SparsePolynomial::var(nv, vars.index(alpha, i, j));
    let det = |alpha: usize| {
        b(alpha, 1, 1)
            .mul(&b(alpha, 2, 2))
            .unwrap()
            .sub(&b(alpha, 1, 2).mul(&b(alpha, 2, 1)).unwrap())
            .unwrap()
    };
    let mixed = b(1, 1, 1)
        .mul(&b(2, 2, 2))
        .unwrap()
        .add(&b(1, 2, 2).mul(&b(2, 1, 1)).unwrap())
        .unwrap()
        .sub(&b(1, 1, 2).mul(&b(2, 2, 1)).unwrap())
        .unwrap()
        .sub(&b(1, 2, 1).mul(&b(2, 1, 2)).unwrap())
        .unwrap();
    BinaryQuadratic { x2: det(1), xy: mixed, y2: det(2) }
}

/// `B^2 - 4AC` for `A x^2 + B xy + C y^2`.
pub fn discriminant(q: &BinaryQuadratic) -> Result<SparsePolynomial> {
    let four = SparsePolynomial::constant(q.xy.nvars(), ratio::from_int(4));
    q.xy.mul(&q.xy)?.sub(&four.mul(&q.x2.mul(&q.y2)?)?)
}

// ---------------------------------------------------------------------------
// JSON form
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TermJson {
    exps: Vec<u16>,
    num: String,
    den: String,
}

#[derive(Serialize, Deserialize)]
struct PolyJson {
    vars: Vec<String>,
    terms: Vec<TermJson>,
}

impl SparsePolynomial {
    /// Serializes with the given variable names (one per variable, in
    /// order). Terms are emitted in canonical graded-lex order.
    pub fn to_json_value(&self, vars: &[String]) -> Result<serde_json::Value> {
        if vars.len() != self.nvars {
            return Err(Error::VariableSetMismatch(vars.len(), self.nvars));
        }
        let terms = self
            .canonical_terms()
            .into_iter()
            .map(|(exps, c)| {
                let (num, den) = ratio::to_parts(c);
                TermJson { exps: exps.clone(), num, den }
            })
            .collect();
        Ok(serde_json::to_value(PolyJson { vars: vars.to_vec(), terms })?)
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<(Self, Vec<String>)> {
        let raw: PolyJson = serde_json::from_value(value)?;
        let mut p = Self::zero(raw.vars.len());
        for t in raw.terms {
            if t.exps.len() != raw.vars.len() {
                return Err(Error::Shape("exponent vector length mismatch".into()));
            }
            p.add_term(t.exps, ratio::parse_parts(&t.num, &t.den)?);
        }
        Ok((p, raw.vars))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(v: i64) -> BigRational {
        ratio::from_int(v)
    }

    #[test]
    fn pencil_coefficients_are_the_three_displayed_polynomials() {
        let vars = BVars { n: 2, k: 2 };
        let p = pencil_determinant();
        let mono = |ids: &[(usize, usize, usize)]| {
            let mut exps = vec![0u16; vars.count()];
            for &(a, i, j) in ids {
                exps[vars.index(a, i, j)] += 1;
            }
            exps
        };
        assert_eq!(p.x2.coefficient(&mono(&[(1, 1, 1), (1, 2, 2)])), q(1));
        assert_eq!(p.x2.coefficient(&mono(&[(1, 1, 2), (1, 2, 1)])), q(-1));
        assert_eq!(p.x2.num_terms(), 2);
        assert_eq!(p.xy.coefficient(&mono(&[(1, 1, 1), (2, 2, 2)])), q(1));
        assert_eq!(p.xy.coefficient(&mono(&[(1, 2, 2), (2, 1, 1)])), q(1));
        assert_eq!(p.xy.coefficient(&mono(&[(1, 1, 2), (2, 2, 1)])), q(-1));
        assert_eq!(p.xy.coefficient(&mono(&[(1, 2, 1), (2, 1, 2)])), q(-1));
        assert_eq!(p.xy.num_terms(), 4);
        assert_eq!(p.y2.coefficient(&mono(&[(2, 1, 1), (2, 2, 2)])), q(1));
        assert_eq!(p.y2.coefficient(&mono(&[(2, 1, 2), (2, 2, 1)])), q(-1));
        assert_eq!(p.y2.num_terms(), 2);
    }

    #[test]
    fn pencil_matches_numeric_determinant() {
        // P(x, y) evaluated at a concrete form must equal det(x B1 + y B2).
        let p = pencil_determinant();
        // B1 = [[1,2],[3,4]], B2 = [[0,1],[1,0]], listed in (a, i, j) order.
        let values: Vec<BigRational> =
            [1, 2, 3, 4, 0, 1, 1, 0].iter().map(|&v| q(v)).collect();
        let a = p.x2.eval(&values).unwrap();
        let b = p.xy.eval(&values).unwrap();
        let c = p.y2.eval(&values).unwrap();
        // det(x B1 + y B2) at (x, y) = (2, 3):
        // [[2*1+3*0, 2*2+3*1], [2*3+3*1, 2*4+3*0]] = [[2,7],[9,8]], det = -47.
        let (x, y) = (q(2), q(3));
        let value = &a * &x * &x + &b * &x * &y + &c * &y * &y;
        assert_eq!(value, q(-47));
    }

    #[test]
    fn pencil_is_gl_covariant_with_det_squared() {
        // Replacing (B1, B2) by (a^T B1 a, a^T B2 a) multiplies every
        // coefficient of P by det(a)^2.
        let p = pencil_determinant();
        let vars = BVars { n: 2, k: 2 };
        let a = [[q(2), q(1)], [q(3), q(-1)]];
        let det_a = &a[0][0] * &a[1][1] - &a[0][1] * &a[1][0];
        let b1 = [[q(1), q(2)], [q(3), q(4)]];
        let b2 = [[q(0), q(1)], [q(1), q(5)]];
        let congruent = |m: &[[BigRational; 2]; 2]| {
            let mut out = [[q(0), q(0)], [q(0), q(0)]];
            for i in 0..2 {
                for j in 0..2 {
                    let mut acc = q(0);
                    for s in 0..2 {
                        for t in 0..2 {
                            acc += &a[s][i] * &m[s][t] * &a[t][j];
                        }
                    }
                    out[i][j] = acc;
                }
            }
            out
        };
        let flat = |m1: &[[BigRational; 2]; 2], m2: &[[BigRational; 2]; 2]| {
            let mut values = vec![q(0); vars.count()];
            for (alpha, m) in [m1, m2].into_iter().enumerate() {
                for i in 0..2 {
                    for j in 0..2 {
                        values[vars.index(alpha + 1, i + 1, j + 1)] = m[i][j].clone();
                    }
                }
            }
            values
        };
        let before = flat(&b1, &b2);
        let after = flat(&congruent(&b1), &congruent(&b2));
        let factor = &det_a * &det_a;
        for coeff in [&p.x2, &p.xy, &p.y2] {
            assert_eq!(
                coeff.eval(&after).unwrap(),
                factor.clone() * coeff.eval(&before).unwrap()
            );
        }
    }

    #[test]
    fn discriminant_of_x2_minus_y2_is_four() {
        let nv = 8;
        let quad = BinaryQuadratic {
            x2: SparsePolynomial::constant(nv, q(1)),
            xy: SparsePolynomial::zero(nv),
            y2: SparsePolynomial::constant(nv, q(-1)),
        };
        assert_eq!(discriminant(&quad).unwrap(), SparsePolynomial::constant(nv, q(4)));
    }

    #[test]
    fn discriminant_degenerate_cases() {
        let nv = 8;
        let bc = SparsePolynomial::var(nv, 0);
        let quad = BinaryQuadratic {
            x2: SparsePolynomial::zero(nv),
            xy: bc.clone(),
            y2: SparsePolynomial::zero(nv),
        };
        assert_eq!(discriminant(&quad).unwrap(), bc.mul(&bc).unwrap());
    }

    #[test]
    fn poly_equal_demands_matching_variable_sets() {
        let p = SparsePolynomial::zero(3);
        let r = SparsePolynomial::zero(4);
        assert!(matches!(
            poly_equal(&p, &r),
            Err(Error::VariableSetMismatch(3, 4))
        ));
        let x = SparsePolynomial::var(2, 0);
        let y = SparsePolynomial::var(2, 1);
        let bc = x.sub(&y).unwrap();
        let cb = y.sub(&x).unwrap();
        assert!(!poly_equal(&bc, &cb).unwrap());
        assert!(poly_equal(&bc, &bc.add(&SparsePolynomial::zero(2)).unwrap()).unwrap());
    }

    #[test]
    fn pretty_prints_signs_and_powers() {
        let vars = BVars { n: 2, k: 1 };
        let nv = vars.count();
        let b12 = SparsePolynomial::var(nv, vars.index(1, 1, 2));
        let b21 = SparsePolynomial::var(nv, vars.index(1, 2, 1));
        let p = b12.sub(&b21).unwrap();
        assert_eq!(p.pretty(&|v| vars.pretty_name(v)), "b^1_12 - b^1_21");
        let sq = p.mul(&p).unwrap();
        assert_eq!(
            sq.pretty(&|v| vars.pretty_name(v)),
            "b^1_12^2 - 2 b^1_12 b^1_21 + b^1_21^2"
        );
        assert_eq!(SparsePolynomial::zero(1).pretty(&|_| "x".into()), "0");
    }

    #[test]
    fn json_round_trip() {
        let vars = BVars { n: 2, k: 1 };
        let nv = vars.count();
        let p = SparsePolynomial::var(nv, 1)
            .sub(&SparsePolynomial::var(nv, 2))
            .unwrap();
        let value = p.to_json_value(&vars.names()).unwrap();
        let (back, names) = SparsePolynomial::from_json_value(value).unwrap();
        assert_eq!(back, p);
        assert_eq!(names[0], "b[1][1][1]");
    }

    fn arb_poly(nvars: usize) -> impl Strategy<Value = SparsePolynomial> {
        proptest::collection::vec(
            (proptest::collection::vec(0u16..3, nvars), -4i64..=4),
            0..6,
        )
        .prop_map(move |terms| {
            let mut p = SparsePolynomial::zero(nvars);
            for (exps, c) in terms {
                p.add_term(exps, ratio::from_int(c));
            }
            p
        })
    }

    proptest! {
        #[test]
        fn ring_laws(a in arb_poly(3), b in arb_poly(3), c in arb_poly(3)) {
            // Commutativity, associativity, distributivity.
            prop_assert_eq!(a.mul(&b).unwrap(), b.mul(&a).unwrap());
            prop_assert_eq!(
                a.mul(&b).unwrap().mul(&c).unwrap(),
                a.mul(&b.mul(&c).unwrap()).unwrap()
            );
            prop_assert_eq!(
                a.mul(&b.add(&c).unwrap()).unwrap(),
                a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap()
            );
        }

        #[test]
        fn no_zero_coefficients_survive(a in arb_poly(3), b in arb_poly(3)) {
            let sum = a.add(&b).unwrap();
            prop_assert!(sum.terms.values().all(|c| !c.is_zero()));
            let diff = a.sub(&a).unwrap();
            prop_assert!(diff.is_zero());
        }

        #[test]
        fn pencil_matches_the_numeric_determinant_at_random_points(
            entries in proptest::collection::vec(-5i64..=5, 8),
            x in -4i64..=4,
            y in -4i64..=4,
        ) {
            let p = pencil_determinant();
            let values: Vec<BigRational> = entries.iter().map(|&v| q(v)).collect();
            let at = |alpha: usize, i: usize, j: usize| {
                &values[BVars { n: 2, k: 2 }.index(alpha, i, j)]
            };
            let (x, y) = (q(x), q(y));
            let m = |i: usize, j: usize| &x * at(1, i, j) + &y * at(2, i, j);
            let det = m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
            let via_pencil = p.x2.eval(&values).unwrap() * &x * &x
                + p.xy.eval(&values).unwrap() * &x * &y
                + p.y2.eval(&values).unwrap() * &y * &y;
            prop_assert_eq!(via_pencil, det);
        }
    }
}
