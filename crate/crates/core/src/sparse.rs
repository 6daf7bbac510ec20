//! Sparse helpers on top of `nalgebra-sparse` CSR matrices.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::coo::CooMatrix;
use num_complex::Complex64 as C64;

use crate::fock::{HilbertSpace, Mode};

pub type CsrMatrix = nalgebra_sparse::CsrMatrix<C64>;

/// Sparse annihilation operator on `mode`.
pub fn ladder(space: &HilbertSpace, mode: Mode) -> CsrMatrix {
    let dim = space.dim();
    let mut coo = CooMatrix::new(dim, dim);
    for m in 0..=space.n_max_m() {
        for b in 0..=space.n_max_b() {
            let col = space.index_of(m, b);
            match mode {
                Mode::M if m > 0 => {
                    coo.push(space.index_of(m - 1, b), col, C64::from((m as f64).sqrt()))
                }
                Mode::B if b > 0 => {
                    coo.push(space.index_of(m, b - 1), col, C64::from((b as f64).sqrt()))
                }
                _ => {}
            }
        }
    }
    CsrMatrix::from(&coo)
}

/// Diagonal number operator of `mode`.
pub fn number(space: &HilbertSpace, mode: Mode) -> CsrMatrix {
    let dim = space.dim();
    let mut coo = CooMatrix::new(dim, dim);
    for i in 0..dim {
        let (m, b) = space.levels(i);
        let n = if mode == Mode::M { m } else { b };
        if n > 0 {
            coo.push(i, i, C64::from(n as f64));
        }
    }
    CsrMatrix::from(&coo)
}

/// Conjugate transpose.
pub fn transpose(a: &CsrMatrix) -> CsrMatrix {
    let mut coo = CooMatrix::new(a.ncols(), a.nrows());
    for (r, c, v) in a.triplet_iter() {
        coo.push(c, r, v.conj());
    }
    CsrMatrix::from(&coo)
}

pub fn product(a: &CsrMatrix, b: &CsrMatrix) -> CsrMatrix {
    a * b
}

pub fn linear_combination(terms: &[(C64, &CsrMatrix)]) -> CsrMatrix {
    let (nrows, ncols) = terms
        .first()
        .map(|(_, m)| (m.nrows(), m.ncols()))
        .unwrap_or((0, 0));
    let mut coo = CooMatrix::new(nrows, ncols);
    for (coef, m) in terms {
        for (r, c, v) in m.triplet_iter() {
            coo.push(r, c, *coef * v);
        }
    }
    CsrMatrix::from(&coo)
}

pub fn to_dense(a: &CsrMatrix) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for (r, c, v) in a.triplet_iter() {
        out[(r, c)] += *v;
    }
    out
}

pub fn matvec(a: &CsrMatrix, x: &DVector<C64>) -> DVector<C64> {
    let mut out = DVector::zeros(a.nrows());
    matvec_into(a, x.as_slice(), out.as_mut_slice());
    out
}

/// `out = a * x`
pub fn matvec_into(a: &CsrMatrix, x: &[C64], out: &mut [C64]) {
    let (offsets, indices, values) = a.csr_data();
    for (row, o) in out.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for k in offsets[row]..offsets[row + 1] {
            acc += values[k] * x[indices[k]];
        }
        *o = acc;
    }
}

/// Sparse times dense (column-major) matrix.
pub fn mul_dense(a: &CsrMatrix, x: &DMatrix<C64>) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(a.nrows(), x.ncols());
    for j in 0..x.ncols() {
        let col = x.column(j);
        let mut dst = out.column_mut(j);
        matvec_into(a, col.as_slice(), dst.as_mut_slice());
    }
    out
}

/// Upper bound on the induced 1-norm (max absolute column sum).
pub fn one_norm(a: &CsrMatrix) -> f64 {
    let mut sums = vec![0.0; a.ncols()];
    for (_, c, v) in a.triplet_iter() {
        sums[c] += v.norm();
    }
    sums.into_iter().fold(0.0, f64::max)
}

/// A fixed linear family `sum_i c_i O_i` sharing one sparsity pattern, so the
/// time-local operator can be reassembled without touching the structure.
#[derive(Clone, Debug)]
pub struct ParametricOperator {
    pattern: CsrMatrix,
    weights: Vec<Vec<C64>>,
}

impl ParametricOperator {
    pub fn new(components: &[CsrMatrix]) -> Self {
        let ncomp = components.len();
        let (nrows, ncols) = components
            .first()
            .map(|m| (m.nrows(), m.ncols()))
            .unwrap_or((0, 0));
        let mut union: BTreeMap<(usize, usize), Vec<C64>> = BTreeMap::new();
        for (i, comp) in components.iter().enumerate() {
            for (r, c, v) in comp.triplet_iter() {
                union
                    .entry((r, c))
                    .or_insert_with(|| vec![C64::new(0.0, 0.0); ncomp])[i] += *v;
            }
        }
        let mut offsets = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(union.len());
        let mut weights = vec![Vec::with_capacity(union.len()); ncomp];
        for (&(r, c), w) in &union {
            offsets[r + 1] += 1;
            indices.push(c);
            for (dst, &val) in weights.iter_mut().zip(w) {
                dst.push(val);
            }
        }
        for r in 0..nrows {
            offsets[r + 1] += offsets[r];
        }
        let values = vec![C64::new(0.0, 0.0); indices.len()];
        let pattern = CsrMatrix::try_from_csr_data(nrows, ncols, offsets, indices, values)
            .expect("union pattern is sorted by construction");
        Self { pattern, weights }
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn assemble(&self, coeffs: &[C64]) -> CsrMatrix {
        let mut out = self.pattern.clone();
        self.assemble_into(coeffs, &mut out);
        out
    }

    /// Overwrites the values of `out`, which must share this pattern.
    pub fn assemble_into(&self, coeffs: &[C64], out: &mut CsrMatrix) {
        assert_eq!(coeffs.len(), self.weights.len());
        let values = out.values_mut();
        values.fill(C64::new(0.0, 0.0));
        for (c, w) in coeffs.iter().zip(&self.weights) {
            if *c == C64::new(0.0, 0.0) {
                continue;
            }
            for (v, x) in values.iter_mut().zip(w) {
                *v += c * x;
            }
        }
    }

    pub fn pattern(&self) -> &CsrMatrix {
        &self.pattern
    }
}
