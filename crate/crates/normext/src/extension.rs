//! Hypothesis validation for blocks and the joint eigenstructure of the
//! commuting pair `(A, W)`.
//!
//! A block defines a normal boundary-coupled operator exactly when `A` is
//! Hermitian with spectrum in `[1, ∞)`, `W` is unitary, and the two commute.
//! Commutation is checked as `WA = AW` rather than `WA⁻¹ = A⁻¹W`; the two
//! are equivalent because `A` is invertible (smallest eigenvalue ≥ 1), and
//! the multiplicative form avoids an inversion.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

use crate::hilbert::{
    hermitian_eigendecomposition, vec_inner, vec_norm, Block, ComplexMatrix, HilbertError,
};
use crate::tol::Tolerances;

#[derive(Debug, Error)]
pub enum ExtensionError {
    #[error("joint eigenpair residual {residual:.3e} exceeds {tol:.3e}; the pair does not commute well enough")]
    CommutationViolated { residual: f64, tol: f64 },
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
}

/// Why a block failed validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ValidationFailure {
    CoeffNotHermitian,
    CoeffBelowOne,
    CouplingNotUnitary,
    PairNotCommuting,
    BadInterval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Verdict {
    Valid,
    Invalid(Vec<ValidationFailure>),
}

/// Measured defects of one block against the normal-extension hypotheses.
///
/// Defects are absolute operator 2-norms; the verdict compares each against
/// `tol` scaled by the norms of the participating matrices, so it is
/// invariant under unitary conjugation of the pair.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    /// `‖A − A*‖₂`
    pub hermitian_defect: f64,
    /// `λ_min(A) − 1` (computed on the symmetrized part of `A`)
    pub positivity_margin: f64,
    /// `‖W*W − I‖₂`
    pub unitarity_defect: f64,
    /// `‖WA − AW‖₂`
    pub commutation_defect: f64,
    pub interval_ok: bool,
    pub verdict: Verdict,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        matches!(self.verdict, Verdict::Valid)
    }
}

/// Measures every hypothesis defect of a block and renders a verdict at
/// tolerance `tol.validation`.
pub fn validate_block(block: &Block, tol: &Tolerances) -> ValidationReport {
    let a = block.coeff();
    let w = block.coupling();
    let a_scale = a.op_norm().max(1.0);
    let w_scale = w.op_norm().max(1.0);

    let hermitian_defect = a.hermitian_defect();
    let sym = a.add(&a.adjoint()).scale(Complex64::new(0.5, 0.0));
    let (sym_vals, _) = hermitian_eigendecomposition(&sym, 1.0).expect("symmetrized input");
    let positivity_margin = sym_vals.first().copied().unwrap_or(f64::NEG_INFINITY) - 1.0;

    let unitarity_defect = w
        .adjoint()
        .mul(w)
        .sub(&ComplexMatrix::identity(w.dim()))
        .op_norm();
    let commutation_defect = w.mul(a).sub(&a.mul(w)).op_norm();
    let interval_ok = block.interval().length() > 0.0 && block.interval().length().is_finite();

    let mut failures = Vec::new();
    if hermitian_defect > tol.validation * a_scale {
        failures.push(ValidationFailure::CoeffNotHermitian);
    }
    if positivity_margin < -tol.validation * a_scale {
        failures.push(ValidationFailure::CoeffBelowOne);
    }
    if unitarity_defect > tol.validation * w_scale * w_scale {
        failures.push(ValidationFailure::CouplingNotUnitary);
    }
    if commutation_defect > tol.validation * a_scale * w_scale {
        failures.push(ValidationFailure::PairNotCommuting);
    }
    if !interval_ok {
        failures.push(ValidationFailure::BadInterval);
    }

    ValidationReport {
        hermitian_defect,
        positivity_margin,
        unitarity_defect,
        commutation_defect,
        interval_ok,
        verdict: if failures.is_empty() {
            Verdict::Valid
        } else {
            Verdict::Invalid(failures)
        },
    }
}

/// Joint eigendata of `(A, W)` on one shared eigenvector.
#[derive(Debug, Clone)]
pub struct ModePair {
    /// Eigenvalue of `A`; real and ≥ 1 for valid blocks.
    pub alpha: f64,
    /// Eigenvalue of `W` on the same vector; unit modulus for valid blocks.
    pub omega: Complex64,
    /// Unit eigenvector shared by `A` and `W`.
    pub vector: Vec<Complex64>,
    /// 1-based mode index after sorting by ascending `alpha`, ties by
    /// ascending `arg(omega)` in `(−π, π]`.
    pub m: usize,
}

/// Argument of `z` on the branch `(−π, π]`, with `−0.0` normalized away.
pub fn arg_branch(z: Complex64) -> f64 {
    let a = z.arg();
    if a <= -PI {
        a + 2.0 * PI
    } else if a == 0.0 {
        0.0
    } else {
        a
    }
}

/// Reduces any angle to the branch `(−π, π]`.
pub fn reduce_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Orthonormal basis of shared eigenvectors for a commuting pair `(A, W)`.
///
/// `A` is diagonalized first; inside each near-degenerate `A`-eigenspace
/// (gap at most `tol.cluster_rel · max(1, ‖A‖)`) the restriction of `W` is
/// diagonalized through its Hermitian real and imaginary parts, each step
/// contributing an orthonormal change of basis. Eigenpair residuals above
/// `tol.residual` (scaled) abort with [`ExtensionError::CommutationViolated`],
/// which signals that an invalid block slipped past validation.
pub fn simultaneous_eigenbasis(
    block: &Block,
    tol: &Tolerances,
) -> Result<Vec<ModePair>, ExtensionError> {
    let a = block.coeff();
    let w = block.coupling();
    let dim = block.dim();
    let a_scale = a.op_norm().max(1.0);
    let w_scale = w.op_norm().max(1.0);

    let (alphas, u) = hermitian_eigendecomposition(a, tol.validation * 10.0)?;
    let cluster_tol = tol.cluster_rel * a_scale;

    let mut vectors: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
    let mut start = 0;
    while start < dim {
        let mut end = start + 1;
        while end < dim && alphas[end] - alphas[end - 1] <= cluster_tol {
            end += 1;
        }
        let cluster_cols: Vec<Vec<Complex64>> = (start..end).map(|j| u.col(j)).collect();
        let refined = diagonalize_coupling_on(&cluster_cols, w, tol)?;
        vectors.extend(refined);
        start = end;
    }

    let res_tol_a = tol.residual * a_scale;
    let res_tol_w = tol.residual * w_scale;
    let mut pairs = Vec::with_capacity(dim);
    for v in vectors {
        let av = a.mat_vec(&v);
        let wv = w.mat_vec(&v);
        let alpha = vec_inner(&av, &v).re;
        let omega = vec_inner(&wv, &v);
        let res_a = residual(&av, alpha.into(), &v);
        let res_w = residual(&wv, omega, &v);
        let worst = res_a.max(res_w);
        if res_a > res_tol_a || res_w > res_tol_w {
            return Err(ExtensionError::CommutationViolated {
                residual: worst,
                tol: res_tol_a.max(res_tol_w),
            });
        }
        pairs.push(ModePair {
            alpha,
            omega,
            vector: v,
            m: 0,
        });
    }

    pairs.sort_by(|p, q| {
        p.alpha
            .total_cmp(&q.alpha)
            .then(arg_branch(p.omega).total_cmp(&arg_branch(q.omega)))
    });
    for (i, p) in pairs.iter_mut().enumerate() {
        p.m = i + 1;
    }
    Ok(pairs)
}

/// Diagonalizes the restriction of the unitary `w` to `span(cols)`, through
/// the Hermitian matrices `(M + M*)/2` and `(M − M*)/2i` of the compressed
/// `M = U* w U`. Two levels suffice: modes not separated by either part
/// share the same coupling eigenvalue, so any orthonormal basis works.
fn diagonalize_coupling_on(
    cols: &[Vec<Complex64>],
    w: &ComplexMatrix,
    tol: &Tolerances,
) -> Result<Vec<Vec<Complex64>>, ExtensionError> {
    let k = cols.len();
    if k == 1 {
        return Ok(cols.to_vec());
    }
    let m = compress(cols, w);
    let half = Complex64::new(0.5, 0.0);
    let x = m.add(&m.adjoint()).scale(half);
    let (x_vals, p) = hermitian_eigendecomposition(&x, 1.0)?;
    let cols_x = combine(cols, &p);

    let w_scale = w.op_norm().max(1.0);
    let cluster_tol = tol.cluster_rel * w_scale;
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    while start < k {
        let mut end = start + 1;
        while end < k && x_vals[end] - x_vals[end - 1] <= cluster_tol {
            end += 1;
        }
        if end - start == 1 {
            out.push(cols_x[start].clone());
        } else {
            let sub: Vec<Vec<Complex64>> = cols_x[start..end].to_vec();
            let z = compress(&sub, w);
            let y = z
                .sub(&z.adjoint())
                .scale(Complex64::new(0.0, -0.5));
            let (_, r) = hermitian_eigendecomposition(&y, 1.0)?;
            out.extend(combine(&sub, &r));
        }
        start = end;
    }
    Ok(out)
}

/// `U* w U` for the (generally rectangular) column family `cols`.
fn compress(cols: &[Vec<Complex64>], w: &ComplexMatrix) -> ComplexMatrix {
    let k = cols.len();
    let images: Vec<Vec<Complex64>> = cols.iter().map(|c| w.mat_vec(c)).collect();
    ComplexMatrix::from_fn(k, |i, j| vec_inner(&images[j], &cols[i]))
}

/// Columns of `cols · coef`.
fn combine(cols: &[Vec<Complex64>], coef: &ComplexMatrix) -> Vec<Vec<Complex64>> {
    let k = cols.len();
    let n = cols[0].len();
    (0..k)
        .map(|t| {
            let mut v = vec![Complex64::new(0.0, 0.0); n];
            for (j, col) in cols.iter().enumerate() {
                let c = coef.get(j, t);
                for (vi, &ci) in v.iter_mut().zip(col) {
                    *vi += c * ci;
                }
            }
            v
        })
        .collect()
}

fn residual(image: &[Complex64], eig: Complex64, v: &[Complex64]) -> f64 {
    let diff: Vec<Complex64> = image.iter().zip(v).map(|(x, y)| x - eig * y).collect();
    vec_norm(&diff)
}
