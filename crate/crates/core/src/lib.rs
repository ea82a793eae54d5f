//! Exact-arithmetic engine for the invariant theory of vector-valued
//! bilinear forms.
//!
//! A bilinear map `V x V -> W` (dim V = n, dim W = k) is acted on by
//! `GL(n) x GL(k)`. The engine enumerates the generating invariants built
//! from products of epsilon symbols, certifies the relations among them,
//! symmetrizes them into invariant polynomials in the form entries
//! `b^a_ij`, and performs the supporting exact rational linear algebra.
//!
//! All arithmetic is exact (arbitrary-precision rationals); there is no
//! floating point anywhere in the crate.

pub mod error;
pub mod invariant;
pub mod linalg;
pub mod perm;
pub mod poly;
pub mod ratio;
pub mod relation;
pub mod tensor;

pub use error::{Error, Result};
pub use invariant::{BilinearForm, BlockForm, GeneratorId};
pub use perm::{EpsilonProductSpec, Permutation};
pub use poly::{BinaryQuadratic, SparsePolynomial};
pub use relation::{RelationCertificate, ShuffleSpec, SpanReport};
pub use tensor::{AxisKind, AxisProfile, SparseTensor};
