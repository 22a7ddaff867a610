//! Exact linear algebra over the two-element field.
//!
//! Every group attached to a chart bidegree is a finite-dimensional vector
//! space over F2, and every cycle/boundary computation reduces to echelon
//! forms, coset representatives, and quotient bases of such spaces. Vectors
//! are packed bitsets indexed by the generator basis of one bidegree.
//!
//! Subspaces are kept in reduced row echelon form, so two subspaces are equal
//! iff their bases are identical vectors. This makes subspace and coset
//! comparison structural, which the fact store relies on for deduplication.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum Gf2Error {
    #[error("dimension mismatch: expected ambient dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("subspace is not contained in the claimed enclosing space")]
    NotContained,
}

/// A vector over F2, packed into 64-bit words.
///
/// The length is the ambient dimension of the bidegree it lives in; bit `i`
/// is the coefficient of the `i`-th basis generator.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct F2Vector {
    words: Vec<u64>,
    len: usize,
}

impl F2Vector {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn unit(len: usize, bit: usize) -> Self {
        let mut v = Self::zeros(len);
        v.set(bit, true);
        v
    }

    /// Builds a vector from the indices of its nonzero coordinates.
    pub fn from_support(len: usize, support: &[usize]) -> Self {
        let mut v = Self::zeros(len);
        for &i in support {
            v.flip(i);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(
            i < self.len,
            "bit index {i} out of range (len={})",
            self.len
        );
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(
            i < self.len,
            "bit index {i} out of range (len={})",
            self.len
        );
        if value {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn flip(&mut self, i: usize) {
        assert!(
            i < self.len,
            "bit index {i} out of range (len={})",
            self.len
        );
        self.words[i / 64] ^= 1 << (i % 64);
    }

    /// Addition in F2 is bitwise xor.
    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.len, other.len, "xor of vectors with different lengths");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    /// Index of the lowest set bit, if any.
    pub fn pivot(&self) -> Option<usize> {
        for (wi, &w) in self.words.iter().enumerate() {
            if w != 0 {
                let i = wi * 64 + w.trailing_zeros() as usize;
                if i < self.len {
                    return Some(i);
                }
            }
        }
        None
    }

    /// Iterator over the indices of nonzero coordinates, ascending.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.get(i))
    }
}

impl fmt::Debug for F2Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            write!(f, "{}", u8::from(self.get(i)))?;
        }
        if self.len == 0 {
            write!(f, "()")?;
        }
        Ok(())
    }
}

/// A subspace of F2^n in canonical (reduced row echelon) form.
///
/// Invariants: basis rows are nonzero, pivot positions strictly increase, and
/// every row is reduced against all other rows' pivots. Two subspaces are
/// equal iff their canonical bases are identical.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct F2Subspace {
    basis: Vec<F2Vector>,
    ambient: usize,
}

impl F2Subspace {
    pub fn zero(ambient: usize) -> Self {
        Self {
            basis: Vec::new(),
            ambient,
        }
    }

    pub fn full(ambient: usize) -> Self {
        Self {
            basis: (0..ambient).map(|i| F2Vector::unit(ambient, i)).collect(),
            ambient,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[F2Vector] {
        &self.basis
    }

    pub fn is_zero(&self) -> bool {
        self.basis.is_empty()
    }

    /// Inserts a vector, restoring canonical form. Returns true if the span grew.
    pub fn insert(&mut self, v: &F2Vector) -> Result<bool, Gf2Error> {
        if v.len() != self.ambient {
            return Err(Gf2Error::DimensionMismatch {
                expected: self.ambient,
                got: v.len(),
            });
        }
        let mut v = v.clone();
        for row in &self.basis {
            let p = row.pivot().expect("basis rows are nonzero");
            if v.get(p) {
                v.add_assign(row);
            }
        }
        let Some(pivot) = v.pivot() else {
            return Ok(false);
        };
        // Back-substitute the new pivot out of the existing rows, then place
        // the row so that pivots stay strictly increasing.
        for row in &mut self.basis {
            if row.get(pivot) {
                row.add_assign(&v);
            }
        }
        let at = self
            .basis
            .partition_point(|row| row.pivot().expect("nonzero") < pivot);
        self.basis.insert(at, v);
        Ok(true)
    }

    pub fn contains(&self, v: &F2Vector) -> Result<bool, Gf2Error> {
        Ok(self.reduce(v)?.is_zero())
    }

    pub fn is_subspace_of(&self, other: &F2Subspace) -> Result<bool, Gf2Error> {
        for row in &self.basis {
            if !other.contains(row)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Canonical coset representative of `v + self`: the unique member of the
    /// coset with zeros in all pivot positions of the subspace.
    ///
    /// `reduce(v, s)` is zero iff `v` lies in `s`.
    pub fn reduce(&self, v: &F2Vector) -> Result<F2Vector, Gf2Error> {
        if v.len() != self.ambient {
            return Err(Gf2Error::DimensionMismatch {
                expected: self.ambient,
                got: v.len(),
            });
        }
        let mut out = v.clone();
        for row in &self.basis {
            let p = row.pivot().expect("basis rows are nonzero");
            if out.get(p) {
                out.add_assign(row);
            }
        }
        Ok(out)
    }

    /// Sum of two subspaces of the same ambient space.
    pub fn sum(&self, other: &F2Subspace) -> Result<F2Subspace, Gf2Error> {
        let mut out = self.clone();
        for row in &other.basis {
            out.insert(row)?;
        }
        Ok(out)
    }

    pub fn pivots(&self) -> Vec<usize> {
        self.basis
            .iter()
            .map(|row| row.pivot().expect("nonzero"))
            .collect()
    }
}

impl fmt::Debug for F2Subspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "span{{")?;
        for (i, row) in self.basis.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{row:?}")?;
        }
        write!(f, "}} in F2^{}", self.ambient)
    }
}

/// Canonical reduced echelon basis spanning the given vectors.
///
/// Order-insensitive: any permutation of the input yields the same basis.
pub fn echelonize(vectors: &[F2Vector], ambient: usize) -> Result<F2Subspace, Gf2Error> {
    let mut sub = F2Subspace::zero(ambient);
    for v in vectors {
        sub.insert(v)?;
    }
    Ok(sub)
}

/// Canonical coset representative of `v` modulo `sub`.
pub fn reduce(v: &F2Vector, sub: &F2Subspace) -> Result<F2Vector, Gf2Error> {
    sub.reduce(v)
}

/// Vectors in `z` whose reductions mod `b` form a basis of the quotient z/b.
///
/// Requires `b ⊆ z`; the result has exactly `dim z − dim b` entries, each a
/// canonical representative (reduced mod `b`).
pub fn quotient_basis(z: &F2Subspace, b: &F2Subspace) -> Result<Vec<F2Vector>, Gf2Error> {
    if !b.is_subspace_of(z)? {
        return Err(Gf2Error::NotContained);
    }
    let mut reps = Vec::with_capacity(z.dim() - b.dim());
    let mut seen = b.clone();
    for row in z.basis() {
        let red = seen.reduce(row)?;
        if !red.is_zero() {
            reps.push(b.reduce(row)?);
            seen.insert(row)?;
        }
    }
    Ok(reps)
}

/// Coefficient vectors spanning all linear relations among the given vectors.
///
/// Each returned vector has length `vectors.len()`; a set bit at position `i`
/// means vector `i` participates in the relation. Used to find combinations
/// of differential sources whose values cancel.
pub fn relations(vectors: &[F2Vector], ambient: usize) -> Result<Vec<F2Vector>, Gf2Error> {
    let n = vectors.len();
    // Augmented rows [vector | indicator]; elimination on the vector part.
    let mut rows: Vec<(F2Vector, F2Vector)> = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| (v.clone(), F2Vector::unit(n, i)))
        .collect();
    for (v, _) in &rows {
        if v.len() != ambient {
            return Err(Gf2Error::DimensionMismatch {
                expected: ambient,
                got: v.len(),
            });
        }
    }
    let mut kept: Vec<(F2Vector, F2Vector)> = Vec::new();
    let mut out = Vec::new();
    for (mut v, mut ind) in rows.drain(..) {
        for (kv, ki) in &kept {
            let p = kv.pivot().expect("kept rows nonzero");
            if v.get(p) {
                v.add_assign(kv);
                ind.add_assign(ki);
            }
        }
        if v.is_zero() {
            out.push(ind);
        } else {
            kept.push((v, ind));
        }
    }
    Ok(out)
}
