//! Truncated two-mode Fock space, bosonic operators and state constructors.
//!
//! Basis states |n_m, n_b> are flattened row-major: `index = n_m * (n_max_b + 1) + n_b`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{self, CsrMatrix};

/// Default ceiling on the size of one dense `dim x dim` complex operator.
pub const DEFAULT_MEMORY_BUDGET: usize = 1 << 28;

/// Truncation tolerance for coherent-state tails.
pub const TAIL_TOLERANCE: f64 = 1e-10;

const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Hybridized photon-magnon mode.
    M,
    /// Phonon mode.
    B,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::M => write!(f, "m"),
            Mode::B => write!(f, "b"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HilbertSpace {
    n_max_m: usize,
    n_max_b: usize,
}

impl HilbertSpace {
    pub fn new(n_max_m: usize, n_max_b: usize) -> Result<Self> {
        Self::with_budget(n_max_m, n_max_b, DEFAULT_MEMORY_BUDGET)
    }

    /// Refuses spaces whose dense operators would exceed `budget_bytes`.
    pub fn with_budget(n_max_m: usize, n_max_b: usize, budget_bytes: usize) -> Result<Self> {
        let dim = (n_max_m + 1)
            .checked_mul(n_max_b + 1)
            .ok_or_else(|| Error::InvalidInput("cutoff overflow".into()))?;
        let bytes = dim
            .checked_mul(dim)
            .and_then(|d2| d2.checked_mul(std::mem::size_of::<C64>()))
            .unwrap_or(usize::MAX);
        if bytes > budget_bytes {
            return Err(Error::MemoryBudget {
                dim,
                bytes,
                limit: budget_bytes,
            });
        }
        Ok(Self { n_max_m, n_max_b })
    }

    pub fn n_max_m(&self) -> usize {
        self.n_max_m
    }

    pub fn n_max_b(&self) -> usize {
        self.n_max_b
    }

    pub fn n_max(&self, mode: Mode) -> usize {
        match mode {
            Mode::M => self.n_max_m,
            Mode::B => self.n_max_b,
        }
    }

    pub fn dim(&self) -> usize {
        (self.n_max_m + 1) * (self.n_max_b + 1)
    }

    /// Flat index of |n_m, n_b>. Panics outside the cutoffs.
    pub fn index_of(&self, n_m: usize, n_b: usize) -> usize {
        assert!(
            n_m <= self.n_max_m && n_b <= self.n_max_b,
            "level ({n_m}, {n_b}) outside cutoffs ({}, {})",
            self.n_max_m,
            self.n_max_b
        );
        n_m * (self.n_max_b + 1) + n_b
    }

    pub fn try_index_of(&self, n_m: usize, n_b: usize) -> Result<usize> {
        if n_m > self.n_max_m {
            return Err(Error::OutOfCutoff {
                level: n_m,
                cutoff: self.n_max_m,
            });
        }
        if n_b > self.n_max_b {
            return Err(Error::OutOfCutoff {
                level: n_b,
                cutoff: self.n_max_b,
            });
        }
        Ok(self.index_of(n_m, n_b))
    }

    /// Inverse of [`index_of`](Self::index_of).
    pub fn levels(&self, index: usize) -> (usize, usize) {
        (index / (self.n_max_b + 1), index % (self.n_max_b + 1))
    }

    pub fn excitation(&self, index: usize) -> usize {
        let (m, b) = self.levels(index);
        m + b
    }

    /// Whether every state with `n` total excitations fits under both cutoffs.
    pub fn block_complete(&self, n: usize) -> bool {
        n <= self.n_max_m.min(self.n_max_b)
    }
}

/// Convenience alias for [`HilbertSpace::new`].
pub fn build_space(n_max_m: usize, n_max_b: usize) -> Result<HilbertSpace> {
    HilbertSpace::new(n_max_m, n_max_b)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    space: HilbertSpace,
    amplitudes: DVector<C64>,
}

impl StateVector {
    /// Wraps amplitudes after checking length and normalization.
    pub fn new(space: HilbertSpace, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::InvalidInput(format!(
                "state has {} amplitudes, space dimension is {}",
                amplitudes.len(),
                space.dim()
            )));
        }
        let norm_sq = amplitudes.norm_squared();
        if !norm_sq.is_finite() {
            return Err(Error::NonFinite("state amplitudes".into()));
        }
        if (norm_sq - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(Self { space, amplitudes })
    }

    pub(crate) fn from_raw(space: HilbertSpace, amplitudes: DVector<C64>) -> Self {
        Self { space, amplitudes }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amplitudes
    }

    pub fn amplitude(&self, n_m: usize, n_b: usize) -> C64 {
        self.amplitudes[self.space.index_of(n_m, n_b)]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// <self|other>
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn expectation(&self, op: &OperatorMatrix) -> C64 {
        self.amplitudes.dotc(&(&op.entries * &self.amplitudes))
    }

    /// Mean total excitation <n_m + n_b>.
    pub fn mean_excitation(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| a.norm_sqr() * self.space.excitation(i) as f64)
            .sum()
    }

    /// Mean occupation of one mode.
    pub fn mean_occupation(&self, mode: Mode) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let (m, b) = self.space.levels(i);
                let n = if mode == Mode::M { m } else { b };
                a.norm_sqr() * n as f64
            })
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    space: HilbertSpace,
    entries: DMatrix<C64>,
    hermitian: bool,
}

impl OperatorMatrix {
    /// Wraps a dense matrix. With `hermitian` set the matrix must satisfy
    /// `max |M - M^dagger| < 1e-12`.
    pub fn new(space: HilbertSpace, entries: DMatrix<C64>, hermitian: bool) -> Result<Self> {
        let dim = space.dim();
        if entries.nrows() != dim || entries.ncols() != dim {
            return Err(Error::InvalidInput(format!(
                "operator is {}x{}, space dimension is {dim}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let op = Self {
            space,
            entries,
            hermitian,
        };
        if hermitian {
            let deviation = op.hermiticity_deviation();
            if deviation >= 1e-12 {
                return Err(Error::NotHermitian { deviation });
            }
        }
        Ok(op)
    }

    pub(crate) fn from_raw(space: HilbertSpace, entries: DMatrix<C64>, hermitian: bool) -> Self {
        Self {
            space,
            entries,
            hermitian,
        }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn is_hermitian_flagged(&self) -> bool {
        self.hermitian
    }

    pub fn get(&self, row: (usize, usize), col: (usize, usize)) -> C64 {
        self.entries[(
            self.space.index_of(row.0, row.1),
            self.space.index_of(col.0, col.1),
        )]
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        max_abs(&(&self.entries - self.entries.adjoint()))
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        Self::from_raw(self.space, self.entries.adjoint(), self.hermitian)
    }

    pub fn scale(&self, factor: C64) -> OperatorMatrix {
        Self::from_raw(
            self.space,
            &self.entries * factor,
            self.hermitian && factor.im == 0.0,
        )
    }

    pub fn add(&self, other: &OperatorMatrix) -> OperatorMatrix {
        Self::from_raw(
            self.space,
            &self.entries + &other.entries,
            self.hermitian && other.hermitian,
        )
    }

    pub fn sub(&self, other: &OperatorMatrix) -> OperatorMatrix {
        Self::from_raw(
            self.space,
            &self.entries - &other.entries,
            self.hermitian && other.hermitian,
        )
    }

    pub fn mul(&self, other: &OperatorMatrix) -> OperatorMatrix {
        Self::from_raw(self.space, &self.entries * &other.entries, false)
    }

    /// [self, other]
    pub fn commutator(&self, other: &OperatorMatrix) -> OperatorMatrix {
        Self::from_raw(
            self.space,
            &self.entries * &other.entries - &other.entries * &self.entries,
            false,
        )
    }

    pub fn apply(&self, state: &StateVector) -> DVector<C64> {
        &self.entries * &state.amplitudes
    }

    /// Largest entry modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &OperatorMatrix) -> f64 {
        max_abs(&(&self.entries - &other.entries))
    }

    /// The block acting on states with exactly `n` total excitations, in the
    /// ordering of increasing `n_m`.
    pub fn excitation_block(&self, n: usize) -> DMatrix<C64> {
        let idx = excitation_indices(&self.space, n);
        DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.entries[(idx[r], idx[c])])
    }

    pub fn identity(space: HilbertSpace) -> OperatorMatrix {
        Self::from_raw(space, DMatrix::identity(space.dim(), space.dim()), true)
    }
}

/// Flat indices of the basis states with `n_m + n_b = n`, ordered by `n_m`.
pub fn excitation_indices(space: &HilbertSpace, n: usize) -> Vec<usize> {
    (0..=n)
        .filter(|&m| m <= space.n_max_m() && n - m <= space.n_max_b())
        .map(|m| space.index_of(m, n - m))
        .collect()
}

pub(crate) fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    space: HilbertSpace,
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates Hermiticity (1e-10), unit trace (1e-8) and positivity (-1e-8).
    pub fn new(space: HilbertSpace, entries: DMatrix<C64>) -> Result<Self> {
        let rho = Self { space, entries };
        let dim = space.dim();
        if rho.entries.nrows() != dim || rho.entries.ncols() != dim {
            return Err(Error::InvalidInput("density matrix shape mismatch".into()));
        }
        let deviation = max_abs(&(&rho.entries - rho.entries.adjoint()));
        if deviation > 1e-10 {
            return Err(Error::NotHermitian { deviation });
        }
        let drift = (rho.trace() - 1.0).abs();
        if drift > 1e-8 {
            return Err(Error::TraceDrift { drift, limit: 1e-8 });
        }
        let min_eigenvalue = rho.min_eigenvalue();
        if min_eigenvalue < -1e-8 {
            return Err(Error::NegativeEigenvalue { min_eigenvalue });
        }
        Ok(rho)
    }

    pub fn from_pure(state: &StateVector) -> Self {
        let psi = &state.amplitudes;
        Self {
            space: state.space,
            entries: psi * psi.adjoint(),
        }
    }

    pub(crate) fn from_raw(space: HilbertSpace, entries: DMatrix<C64>) -> Self {
        Self { space, entries }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|z| z.re).sum()
    }

    /// Diagonal element <n_m, n_b| rho |n_m, n_b>.
    pub fn occupation(&self, n_m: usize, n_b: usize) -> f64 {
        let i = self.space.index_of(n_m, n_b);
        self.entries[(i, i)].re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.entries + self.entries.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn mean_occupation(&self, mode: Mode) -> f64 {
        (0..self.space.dim())
            .map(|i| {
                let (m, b) = self.space.levels(i);
                let n = if mode == Mode::M { m } else { b };
                self.entries[(i, i)].re * n as f64
            })
            .sum()
    }
}

/// Dense annihilation operator on `mode`, identity on the other mode.
pub fn annihilation_op(space: &HilbertSpace, mode: Mode) -> OperatorMatrix {
    OperatorMatrix::from_raw(
        *space,
        sparse::to_dense(&sparse::ladder(space, mode)),
        false,
    )
}

pub fn creation_op(space: &HilbertSpace, mode: Mode) -> OperatorMatrix {
    annihilation_op(space, mode).adjoint()
}

pub fn number_op(space: &HilbertSpace, mode: Mode) -> OperatorMatrix {
    let a = annihilation_op(space, mode);
    let n = a.adjoint().mul(&a);
    OperatorMatrix::from_raw(*space, n.entries, true)
}

/// Rotated mode operators `A = cos(theta) m + sin(theta) b`,
/// `B = sin(theta) m - cos(theta) b`.
pub fn hybrid_mode_ops(space: &HilbertSpace, theta: f64) -> (OperatorMatrix, OperatorMatrix) {
    let m = annihilation_op(space, Mode::M);
    let b = annihilation_op(space, Mode::B);
    let (s, c) = theta.sin_cos();
    let a_op = m.scale(C64::from(c)).add(&b.scale(C64::from(s)));
    let b_op = m.scale(C64::from(s)).sub(&b.scale(C64::from(c)));
    (a_op, b_op)
}

pub fn fock_product_state(space: &HilbertSpace, k_m: usize, k_b: usize) -> Result<StateVector> {
    let idx = space.try_index_of(k_m, k_b)?;
    let mut amps = DVector::zeros(space.dim());
    amps[idx] = C64::from(1.0);
    Ok(StateVector::from_raw(*space, amps))
}

/// `(sum_k C_k |k>_m) |0>_b`. Input must already be normalized.
pub fn superposed_initial(
    space: &HilbertSpace,
    coeffs: &BTreeMap<usize, C64>,
) -> Result<StateVector> {
    let norm_sq: f64 = coeffs.values().map(|c| c.norm_sqr()).sum();
    if (norm_sq - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::NotNormalized { norm_sq });
    }
    let mut amps = DVector::zeros(space.dim());
    for (&k, &c) in coeffs {
        amps[space.try_index_of(k, 0)?] = c;
    }
    Ok(StateVector::from_raw(*space, amps))
}

/// Mass of the Poisson(|zeta|^2) distribution above `cutoff`.
pub fn coherent_tail_mass(mean: f64, cutoff: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let ln_mean = mean.ln();
    let mut ln_fact: f64 = (1..=cutoff + 1).map(|k| (k as f64).ln()).sum();
    let mut total = 0.0;
    let mut n = cutoff + 1;
    loop {
        let term = (-mean + n as f64 * ln_mean - ln_fact).exp();
        total += term;
        if n as f64 > mean && term <= total * 1e-18 {
            break;
        }
        n += 1;
        ln_fact += (n as f64).ln();
    }
    total
}

/// Smallest cutoff with coherent tail mass below `tolerance`.
pub fn required_cutoff(mean: f64, tolerance: f64) -> usize {
    let mut cutoff = 0;
    while coherent_tail_mass(mean, cutoff) >= tolerance {
        cutoff += 1;
    }
    cutoff
}

/// Even cat `(|zeta> + |-zeta>) / sqrt(2 + 2 exp(-2|zeta|^2))` on `mode`,
/// other mode in vacuum.
pub fn cat_state(space: &HilbertSpace, zeta: C64, mode: Mode) -> Result<StateVector> {
    let cutoff = space.n_max(mode);
    let mean = zeta.norm_sqr();
    let tail = coherent_tail_mass(mean, cutoff);
    if tail >= TAIL_TOLERANCE {
        return Err(Error::CutoffTooSmall {
            cutoff,
            required: required_cutoff(mean, TAIL_TOLERANCE),
            tail,
            tolerance: TAIL_TOLERANCE,
        });
    }
    let mut amps = DVector::zeros(space.dim());
    for (n, c) in cat_coefficients(zeta, cutoff) {
        let idx = match mode {
            Mode::M => space.index_of(n, 0),
            Mode::B => space.index_of(0, n),
        };
        amps[idx] = c;
    }
    Ok(StateVector::from_raw(*space, amps))
}

/// Fock coefficients of the even cat up to `cutoff`, renormalized after truncation.
pub fn cat_coefficients(zeta: C64, cutoff: usize) -> BTreeMap<usize, C64> {
    let r = zeta.norm();
    let phase = zeta.arg();
    let mean = r * r;
    let ln_norm = -0.5 * mean + 2f64.ln() - 0.5 * (2.0 + 2.0 * (-2.0 * mean).exp()).ln();
    let mut out = BTreeMap::new();
    let mut ln_fact = 0.0;
    for n in 0..=cutoff {
        if n > 0 {
            ln_fact += (n as f64).ln();
        }
        if n % 2 != 0 {
            continue;
        }
        let magnitude = if n == 0 {
            ln_norm.exp()
        } else if r == 0.0 {
            0.0
        } else {
            (ln_norm + n as f64 * r.ln() - 0.5 * ln_fact).exp()
        };
        if magnitude > 0.0 {
            out.insert(n, C64::from_polar(magnitude, n as f64 * phase));
        }
    }
    let norm = out.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for c in out.values_mut() {
        *c /= norm;
    }
    out
}

/// Eigenstate `(A^dagger)^(N-n) (B^dagger)^n |0,0> / sqrt((N-n)! n!)` of the
/// two-mode Hamiltonian with mixing angle `theta`.
pub fn fixed_n_eigenstate(
    space: &HilbertSpace,
    theta: f64,
    total: usize,
    n: usize,
) -> Result<StateVector> {
    if n > total {
        return Err(Error::InvalidInput(format!("n = {n} exceeds N = {total}")));
    }
    if !space.block_complete(total) {
        return Err(Error::OutOfCutoff {
            level: total,
            cutoff: space.n_max_m().min(space.n_max_b()),
        });
    }
    let (s, c) = theta.sin_cos();
    let m_dag = sparse::transpose(&sparse::ladder(space, Mode::M));
    let b_dag = sparse::transpose(&sparse::ladder(space, Mode::B));
    let a_dag = sparse::linear_combination(&[(C64::from(c), &m_dag), (C64::from(s), &b_dag)]);
    let bb_dag = sparse::linear_combination(&[(C64::from(s), &m_dag), (C64::from(-c), &b_dag)]);
    Ok(StateVector::from_raw(
        *space,
        apply_powers(space, &a_dag, total - n, &bb_dag, n),
    ))
}

/// `(a_dag)^p (b_dag)^q |0,0> / sqrt(p! q!)` for commuting raising operators.
pub(crate) fn apply_powers(
    space: &HilbertSpace,
    a_dag: &CsrMatrix,
    p: usize,
    b_dag: &CsrMatrix,
    q: usize,
) -> DVector<C64> {
    let mut v = DVector::zeros(space.dim());
    v[0] = C64::from(1.0);
    for k in 1..=q {
        v = sparse::matvec(b_dag, &v).unscale((k as f64).sqrt());
    }
    for k in 1..=p {
        v = sparse::matvec(a_dag, &v).unscale((k as f64).sqrt());
    }
    v
}
