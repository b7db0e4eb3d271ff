//! Dense complex linear algebra over finite-dimensional coefficient spaces
//! and the block-diagonal (direct-sum) containers built from them.
//!
//! Matrices are small and dense; decompositions are delegated to [`faer`].
//! Everything here is immutable after construction and all operations are
//! pure functions, so blocks can be processed in parallel by callers.

use faer::prelude::Solve;
use faer::{Mat, Scale, Side};
use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the linear-algebra layer.
#[derive(Debug, Error)]
pub enum HilbertError {
    #[error("matrix is not Hermitian: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    NonHermitian { defect: f64, tol: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("interval is empty or infinite: [{a}, {b}]")]
    BadInterval { a: f64, b: f64 },
    #[error("an instance needs at least one block")]
    EmptyInstance,
    #[error("intervals must be disjoint and increasing: block {index} ends at or after block {} starts", index + 1)]
    IntervalOrder { index: usize },
    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
}

/// Square dense complex matrix of dimension `dim >= 1`.
#[derive(Debug, Clone)]
pub struct ComplexMatrix {
    m: Mat<Complex64>,
}

impl ComplexMatrix {
    /// Builds from row-major nested vectors. Fails unless the data is a
    /// nonempty square array.
    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self, HilbertError> {
        let dim = rows.len();
        if dim == 0 {
            return Err(HilbertError::DimensionMismatch { left: 0, right: 0 });
        }
        for row in &rows {
            if row.len() != dim {
                return Err(HilbertError::DimensionMismatch {
                    left: dim,
                    right: row.len(),
                });
            }
        }
        Ok(Self {
            m: Mat::from_fn(dim, dim, |i, j| rows[i][j]),
        })
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        assert!(dim >= 1, "matrix dimension must be >= 1");
        Self {
            m: Mat::from_fn(dim, dim, f),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_fn(dim, |_, _| Complex64::new(0.0, 0.0))
    }

    pub fn diagonal(entries: &[Complex64]) -> Self {
        assert!(!entries.is_empty());
        Self::from_fn(entries.len(), |i, j| {
            if i == j {
                entries[i]
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.m[(i, j)]
    }

    /// Row-major nested copy of the entries (serialization helper).
    pub fn rows(&self) -> Vec<Vec<Complex64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.m[(i, j)]).collect())
            .collect()
    }

    pub fn col(&self, j: usize) -> Vec<Complex64> {
        (0..self.dim()).map(|i| self.m[(i, j)]).collect()
    }

    pub fn from_cols(cols: &[Vec<Complex64>]) -> Self {
        let dim = cols.len();
        assert!(dim >= 1 && cols.iter().all(|c| c.len() == dim));
        Self::from_fn(dim, |i, j| cols[j][i])
    }

    pub fn adjoint(&self) -> Self {
        Self {
            m: self.m.adjoint().to_owned(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self {
            m: &self.m * &other.m,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            m: &self.m + &other.m,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            m: &self.m - &other.m,
        }
    }

    pub fn scale(&self, z: Complex64) -> Self {
        Self {
            m: &self.m * Scale(z),
        }
    }

    pub fn mat_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim());
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.m[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm_l2()
    }

    /// Operator 2-norm (largest singular value). Falls back to the Frobenius
    /// norm, a valid upper bound, if the SVD does not converge.
    pub fn op_norm(&self) -> f64 {
        self.m
            .singular_values()
            .map(|sv| sv.first().copied().unwrap_or(0.0))
            .unwrap_or_else(|_| self.m.norm_l2())
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        (0..self.dim())
            .map(|j| (0..self.dim()).map(|i| self.m[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim());
        let mut d = 0.0f64;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                d = d.max((self.m[(i, j)] - other.m[(i, j)]).norm());
            }
        }
        d
    }

    /// `‖M − M*‖₂`.
    pub fn hermitian_defect(&self) -> f64 {
        self.sub(&self.adjoint()).op_norm()
    }

    pub fn determinant(&self) -> Complex64 {
        self.m.determinant()
    }

    /// Solves `self · X = rhs` by LU with partial pivoting.
    pub fn solve(&self, rhs: &Self) -> Self {
        Self {
            m: self.m.partial_piv_lu().solve(&rhs.m),
        }
    }

    pub fn eigenvalues_general(&self) -> Result<Vec<Complex64>, HilbertError> {
        self.m
            .eigenvalues()
            .map_err(|e| HilbertError::Eigensolver(format!("{e:?}")))
    }

    /// Eigenvalues and (column) eigenvectors of a general complex matrix.
    /// Vectors are not orthogonal in general.
    pub fn eigen_general_pairs(&self) -> Result<(Vec<Complex64>, ComplexMatrix), HilbertError> {
        let e = self
            .m
            .eigen()
            .map_err(|e| HilbertError::Eigensolver(format!("{e:?}")))?;
        let n = self.dim();
        let values = (0..n).map(|i| e.S()[i]).collect();
        let u = ComplexMatrix::from_fn(n, |i, j| e.U()[(i, j)]);
        Ok((values, u))
    }
}

/// Open interval `(a, b)` with finite positive length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    a: f64,
    b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self, HilbertError> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(HilbertError::BadInterval { a, b });
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }
}

/// One subinterval's data: the interval, the Hermitian coefficient matrix
/// `A` (expected spectrum in `[1, ∞)`) and the unitary boundary coupling `W`
/// relating the endpoint values through `u(b) = W u(a)`.
///
/// Construction checks only shapes. The mathematical hypotheses (Hermitian,
/// positivity, unitarity, commutation) are *measured*, not assumed, by
/// [`crate::extension::validate_block`]; blocks violating them are
/// representable on purpose so the validator can be tested against negative
/// controls.
#[derive(Debug, Clone)]
pub struct Block {
    interval: Interval,
    coeff: ComplexMatrix,
    coupling: ComplexMatrix,
}

impl Block {
    pub fn new(
        interval: Interval,
        coeff: ComplexMatrix,
        coupling: ComplexMatrix,
    ) -> Result<Self, HilbertError> {
        if coeff.dim() != coupling.dim() {
            return Err(HilbertError::DimensionMismatch {
                left: coeff.dim(),
                right: coupling.dim(),
            });
        }
        Ok(Self {
            interval,
            coeff,
            coupling,
        })
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    /// The Hermitian coefficient matrix `A`.
    pub fn coeff(&self) -> &ComplexMatrix {
        &self.coeff
    }

    /// The unitary boundary coupling `W`.
    pub fn coupling(&self) -> &ComplexMatrix {
        &self.coupling
    }

    pub fn dim(&self) -> usize {
        self.coeff.dim()
    }
}

/// Ordered finite list of blocks standing in for the full direct sum.
///
/// Intervals must be pairwise disjoint and strictly increasing
/// (`b_n < a_{n+1}`). Blocks may have different dimensions.
#[derive(Debug, Clone)]
pub struct Instance {
    blocks: Vec<Block>,
    h: f64,
}

impl Instance {
    pub fn new(blocks: Vec<Block>) -> Result<Self, HilbertError> {
        if blocks.is_empty() {
            return Err(HilbertError::EmptyInstance);
        }
        for i in 0..blocks.len() - 1 {
            if blocks[i].interval().b() >= blocks[i + 1].interval().a() {
                return Err(HilbertError::IntervalOrder { index: i });
            }
        }
        let h = blocks
            .iter()
            .map(|b| b.interval().length())
            .fold(0.0, f64::max);
        Ok(Self { blocks, h })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Max interval length over the truncation.
    pub fn h(&self) -> f64 {
        self.h
    }
}

/// Inner product `Σ aᵢ · conj(bᵢ)`, linear in the first argument.
pub fn vec_inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn vec_norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigendecomposition of a Hermitian matrix: ascending real eigenvalues and
/// an orthonormal matrix of column eigenvectors.
///
/// The input is rejected if `‖M − M*‖₂ > tol · max(1, ‖M‖₂)`; what is
/// decomposed is the symmetrized part `(M + M*)/2`, so tiny representation
/// noise cannot leak complex eigenvalues downstream.
pub fn hermitian_eigendecomposition(
    m: &ComplexMatrix,
    tol: f64,
) -> Result<(Vec<f64>, ComplexMatrix), HilbertError> {
    let defect = m.hermitian_defect();
    let scale = m.op_norm().max(1.0);
    if defect > tol * scale {
        return Err(HilbertError::NonHermitian {
            defect,
            tol: tol * scale,
        });
    }
    eigh_symmetrized(m)
}

fn eigh_symmetrized(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix), HilbertError> {
    let half = Complex64::new(0.5, 0.0);
    let sym = m.add(&m.adjoint()).scale(half);
    let evd = sym
        .m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| HilbertError::Eigensolver(format!("{e:?}")))?;
    let dim = m.dim();
    let mut order: Vec<usize> = (0..dim).collect();
    let values_raw: Vec<f64> = (0..dim).map(|i| evd.S()[i].re).collect();
    order.sort_by(|&i, &j| values_raw[i].total_cmp(&values_raw[j]));
    let values: Vec<f64> = order.iter().map(|&i| values_raw[i]).collect();
    let u = ComplexMatrix::from_fn(dim, |i, j| evd.U()[(i, order[j])]);
    Ok((values, u))
}

/// `e^{tM}`.
///
/// Hermitian inputs go through the eigendecomposition (exact up to
/// roundoff); everything else through Padé scaling-and-squaring. The routing
/// threshold is a fixed `1e-12` relative Frobenius defect; both routes are
/// correct for matrices near the boundary.
pub fn matrix_exponential(m: &ComplexMatrix, t: f64) -> ComplexMatrix {
    let defect = m.sub(&m.adjoint()).frobenius_norm();
    if defect <= 1e-12 * m.frobenius_norm().max(1.0) {
        let (values, u) = eigh_symmetrized(m).expect("Hermitian eigensolver failed");
        let exp_diag = ComplexMatrix::diagonal(
            &values
                .iter()
                .map(|&lam| Complex64::new((t * lam).exp(), 0.0))
                .collect::<Vec<_>>(),
        );
        u.mul(&exp_diag).mul(&u.adjoint())
    } else {
        matrix_exponential_pade(&m.scale(Complex64::new(t, 0.0)))
    }
}

/// `e^{A}` by degree-13 Padé approximation with scaling and squaring.
///
/// Used directly by the characteristic-equation oracle so that route never
/// touches an eigendecomposition.
pub fn matrix_exponential_pade(a: &ComplexMatrix) -> ComplexMatrix {
    const THETA_13: f64 = 5.371920351148152;
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let dim = a.dim();
    let norm = a.one_norm();
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let a = a.scale(Complex64::new(0.5f64.powi(s as i32), 0.0));
    let id = ComplexMatrix::identity(dim);
    let a2 = a.mul(&a);
    let a4 = a2.mul(&a2);
    let a6 = a2.mul(&a4);
    let c = |k: usize| Complex64::new(B[k], 0.0);

    let u_inner = a6
        .mul(&a6.scale(c(13)).add(&a4.scale(c(11))).add(&a2.scale(c(9))))
        .add(&a6.scale(c(7)))
        .add(&a4.scale(c(5)))
        .add(&a2.scale(c(3)))
        .add(&id.scale(c(1)));
    let u = a.mul(&u_inner);
    let v = a6
        .mul(&a6.scale(c(12)).add(&a4.scale(c(10))).add(&a2.scale(c(8))))
        .add(&a6.scale(c(6)))
        .add(&a4.scale(c(4)))
        .add(&a2.scale(c(2)))
        .add(&id.scale(c(0)));

    let mut x = v.sub(&u).solve(&v.add(&u));
    for _ in 0..s {
        x = x.mul(&x);
    }
    x
}

/// Whether a growth model certifies the untruncated norm family as bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyBound {
    CertifiedBounded,
    CertifiedUnbounded,
    Unknown,
}

/// Supremum of block operator norms over the truncation, together with the
/// caller-supplied verdict about the untruncated family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectSumNorm {
    /// Exact maximum of the supplied list.
    pub truncated_max: f64,
    pub family: FamilyBound,
}

/// `‖⊕ Tₙ‖ = sup ‖Tₙ‖`: on a finite list, the maximum.
///
/// `family` is an analytic certificate about the blocks beyond the
/// truncation, produced by the caller (typically from a growth model); it is
/// passed through untouched.
pub fn direct_sum_norm(block_norms: &[f64], family: FamilyBound) -> DirectSumNorm {
    let truncated_max = block_norms.iter().copied().fold(0.0, f64::max);
    DirectSumNorm {
        truncated_max,
        family,
    }
}

/// An eigenvalue remembered together with the block it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaggedEigenvalue {
    pub value: Complex64,
    /// 1-based block index.
    pub block_index: usize,
}

/// Union of per-block point spectra with multiplicity kept through tags.
/// Coincident values from distinct blocks are both retained.
pub fn point_spectrum_union(block_spectra: &[Vec<Complex64>]) -> Vec<TaggedEigenvalue> {
    let mut out = Vec::with_capacity(block_spectra.iter().map(Vec::len).sum());
    for (idx, spectrum) in block_spectra.iter().enumerate() {
        for &value in spectrum {
            out.push(TaggedEigenvalue {
                value,
                block_index: idx + 1,
            });
        }
    }
    out
}
