//! Independent numerical verification of the closed-form spectrum.
//!
//! Three routes that never touch the joint-eigenbasis path of the formula:
//!
//! * the characteristic residual `|det(e^{(λI−A)(b−a)} − W)|` (Padé matrix
//!   exponential plus LU determinant, no eigendecomposition at all),
//! * a per-mode rederivation of the eigenvalues straight from the boundary
//!   condition `e^{(λ−α)(b−a)} = ω`,
//! * finite-difference discretizations of `u' + Au` with the boundary
//!   closure `u(b) = W u(a)` eliminated into the matrix, solved as a
//!   generalized eigenproblem.
//!
//! Quadrature checks (norm identity, boundary cancellation, eigenfunction
//! Gram matrix) probe the normality structure directly.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::extension::{arg_branch, simultaneous_eigenbasis, ExtensionError};
use crate::hilbert::{
    matrix_exponential_pade, vec_inner, vec_norm, Block, ComplexMatrix, HilbertError,
};
use crate::spectrum::EigenvalueRecord;
use crate::tol::Tolerances;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("discretization stencil is singular or mis-sized: {detail}")]
    SingularStencil { detail: String },
    #[error("grid must have at least {min} steps, got {n}")]
    BadGrid { n: usize, min: usize },
    #[error("requested {count} eigenvalues but the discretization has only {max}")]
    CountTooLarge { count: usize, max: usize },
    #[error("grid function must vanish at both endpoints (|u(a)| = {at_a:.3e}, |u(b)| = {at_b:.3e})")]
    BoundaryNotZero { at_a: f64, at_b: f64 },
    #[error("records from more than one block were supplied")]
    MixedBlocks,
    #[error("eigenvalue extraction failed: {detail}")]
    EigenExtraction { detail: String },
    #[error(transparent)]
    Extension(#[from] ExtensionError),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
}

// ---------------------------------------------------------------------------
// Characteristic equation
// ---------------------------------------------------------------------------

/// Scaled residual of the characteristic equation at `lambda`:
/// `|det(E − W)| / Π_i (‖row_i(E)‖ + ‖row_i(W)‖)` with
/// `E = e^{(λI−A)(b−a)}`, always computed through the Padé route.
///
/// Lies in `[0, 1]` by Hadamard's inequality and vanishes exactly at the
/// eigenvalues of the block operator.
pub fn characteristic_residual(block: &Block, lambda: Complex64) -> f64 {
    let dim = block.dim();
    let length = block.interval().length();
    let shifted = ComplexMatrix::from_fn(dim, |i, j| {
        let a_ij = block.coeff().get(i, j);
        let diag = if i == j { lambda } else { Complex64::new(0.0, 0.0) };
        (diag - a_ij) * length
    });
    let e = matrix_exponential_pade(&shifted);
    let g = e.sub(block.coupling());
    let det = g.determinant().norm();
    let mut scale = 1.0f64;
    for i in 0..dim {
        let row_e: f64 = (0..dim).map(|j| e.get(i, j).norm_sqr()).sum::<f64>().sqrt();
        let row_w: f64 = (0..dim)
            .map(|j| block.coupling().get(i, j).norm_sqr())
            .sum::<f64>()
            .sqrt();
        scale *= row_e + row_w;
    }
    if scale == 0.0 {
        return 0.0;
    }
    det / scale
}

/// Eigenvalues rederived from the boundary condition: per joint mode
/// `(α, ω)`, solutions of `u' + Au = λu` satisfy `u(b) = e^{(λ−α)ℓ} u(a)`
/// on the mode's eigenvector, so `e^{(λ−α)ℓ} = ω` and
/// `λ = α + i(arg ω + 2kπ)/ℓ`.
///
/// As a set this must coincide with the closed-form spectrum; the
/// enumeration convention differs, so compare as sets.
pub fn characteristic_eigenvalues(
    block: &Block,
    k_max: u32,
    tol: &Tolerances,
) -> Result<Vec<Complex64>, OracleError> {
    let length = block.interval().length();
    let modes = simultaneous_eigenbasis(block, tol)?;
    let mut out = Vec::with_capacity(modes.len() * (2 * k_max as usize + 1));
    for mode in &modes {
        let base = arg_branch(mode.omega);
        for k in -(k_max as i64)..=k_max as i64 {
            out.push(Complex64::new(
                mode.alpha,
                (base + 2.0 * PI * k as f64) / length,
            ));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Finite-difference discretization
// ---------------------------------------------------------------------------

/// Discretization scheme for `u' + Au = λu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// `(u_{j+1}−u_j)/h + A(u_j+u_{j+1})/2 = λ(u_j+u_{j+1})/2`; second order.
    ImplicitTrapezoid,
    /// `(u_{j+1}−u_j)/h + A u_{j+1} = λ u_{j+1}`; first order, A-stable.
    OneSidedFirstOrder,
}

/// The boundary-eliminated stencil as a generalized pencil `B u = λ C u` on
/// the unknowns `u_0 .. u_{N−1}`, with `u_N = W u_0` folded into the last
/// block row.
///
/// `C` can be exactly singular (trapezoid scheme whenever `(−1)^N` is an
/// eigenvalue of `W`: the Nyquist mode), so eigenvalues are extracted from
/// `B⁻¹C` — its nonzero eigenvalues are the reciprocals of the pencil's
/// finite eigenvalues, and `B` is invertible for valid blocks because the
/// operator's spectrum stays away from 0.
#[derive(Debug, Clone)]
pub struct DiscretizedOperator {
    dim: usize,
    n_steps: usize,
    scheme: Scheme,
    d0: ComplexMatrix,
    d1: ComplexMatrix,
    c0: ComplexMatrix,
    c1: ComplexMatrix,
    coupling: ComplexMatrix,
    d1_inv: ComplexMatrix,
    close_inv: ComplexMatrix,
}

impl DiscretizedOperator {
    pub fn new(block: &Block, n_steps: usize, scheme: Scheme) -> Result<Self, OracleError> {
        if n_steps < 16 {
            return Err(OracleError::BadGrid { n: n_steps, min: 16 });
        }
        let dim = block.dim();
        let h = block.interval().length() / n_steps as f64;
        let a = block.coeff();
        let id = ComplexMatrix::identity(dim);
        let half = Complex64::new(0.5, 0.0);
        let inv_h = Complex64::new(1.0 / h, 0.0);
        let (d0, d1, c0, c1) = match scheme {
            Scheme::ImplicitTrapezoid => (
                a.scale(half).sub(&id.scale(inv_h)),
                a.scale(half).add(&id.scale(inv_h)),
                id.scale(half),
                id.scale(half),
            ),
            Scheme::OneSidedFirstOrder => (
                id.scale(-inv_h),
                a.add(&id.scale(inv_h)),
                ComplexMatrix::zeros(dim),
                id.clone(),
            ),
        };

        let d1_inv = d1.solve(&id);
        if d1.mul(&d1_inv).max_abs_diff(&id) > 1e-8 {
            return Err(OracleError::SingularStencil {
                detail: "forward step matrix is singular".into(),
            });
        }
        // Forward marching transfer T = −D1⁻¹D0; its (N−1)-th power closes
        // the boundary row. ‖T‖ ≲ 1 for both schemes, so the product chain
        // is stable.
        let t = d1_inv.mul(&d0).scale(Complex64::new(-1.0, 0.0));
        let mut t_pow = ComplexMatrix::identity(dim);
        for _ in 0..n_steps - 1 {
            t_pow = t.mul(&t_pow);
        }
        let close = d1.mul(block.coupling()).add(&d0.mul(&t_pow));
        let close_inv = close.solve(&id);
        if close.mul(&close_inv).max_abs_diff(&id) > 1e-6 * close.op_norm().max(1.0) {
            return Err(OracleError::SingularStencil {
                detail: "boundary closure is singular".into(),
            });
        }

        Ok(Self {
            dim,
            n_steps,
            scheme,
            d0,
            d1,
            c0,
            c1,
            coupling: block.coupling().clone(),
            d1_inv,
            close_inv,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Total unknowns `dim · N`.
    pub fn size(&self) -> usize {
        self.dim * self.n_steps
    }

    fn block_matvec(m: &ComplexMatrix, x: &[Complex64], out: &mut [Complex64]) {
        let d = m.dim();
        for i in 0..d {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..d {
                acc += m.get(i, j) * x[j];
            }
            out[i] = acc;
        }
    }

    /// `C x` on the flat layout.
    fn apply_mass(&self, x: &[Complex64]) -> Vec<Complex64> {
        let d = self.dim;
        let n = self.n_steps;
        let mut out = vec![Complex64::new(0.0, 0.0); d * n];
        let mut tmp0 = vec![Complex64::new(0.0, 0.0); d];
        let mut tmp1 = vec![Complex64::new(0.0, 0.0); d];
        for j in 0..n {
            let next: Vec<Complex64> = if j + 1 < n {
                x[(j + 1) * d..(j + 2) * d].to_vec()
            } else {
                let mut wx0 = vec![Complex64::new(0.0, 0.0); d];
                Self::block_matvec(&self.coupling, &x[0..d], &mut wx0);
                wx0
            };
            Self::block_matvec(&self.c0, &x[j * d..(j + 1) * d], &mut tmp0);
            Self::block_matvec(&self.c1, &next, &mut tmp1);
            for i in 0..d {
                out[j * d + i] = tmp0[i] + tmp1[i];
            }
        }
        out
    }

    /// Solves `B x = rhs` by forward marching with a bordered closure: the
    /// first pass propagates the particular solution, a `dim × dim` solve
    /// pins `x_0`, and a second pass reconstructs the rest.
    fn solve_stiffness(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let d = self.dim;
        let n = self.n_steps;
        let mut tmp = vec![Complex64::new(0.0, 0.0); d];
        let mut p = vec![Complex64::new(0.0, 0.0); d];
        for j in 0..n - 1 {
            // p_{j+1} = D1⁻¹(rhs_j − D0 p_j)
            Self::block_matvec(&self.d0, &p, &mut tmp);
            let mut t: Vec<Complex64> = rhs[j * d..(j + 1) * d]
                .iter()
                .zip(&tmp)
                .map(|(r, q)| r - q)
                .collect();
            Self::block_matvec(&self.d1_inv, &t, &mut tmp);
            std::mem::swap(&mut p, &mut tmp);
            t.clear();
        }
        // Closing row: (D1 W + D0 T^{N−1}) x_0 = rhs_{N−1} − D0 p_{N−1}.
        Self::block_matvec(&self.d0, &p, &mut tmp);
        let t: Vec<Complex64> = rhs[(n - 1) * d..n * d]
            .iter()
            .zip(&tmp)
            .map(|(r, q)| r - q)
            .collect();
        let mut x0 = vec![Complex64::new(0.0, 0.0); d];
        Self::block_matvec(&self.close_inv, &t, &mut x0);

        let mut out = vec![Complex64::new(0.0, 0.0); d * n];
        out[0..d].copy_from_slice(&x0);
        for j in 0..n - 1 {
            let (done, rest) = out.split_at_mut((j + 1) * d);
            let xj = &done[j * d..(j + 1) * d];
            Self::block_matvec(&self.d0, xj, &mut tmp);
            let t: Vec<Complex64> = rhs[j * d..(j + 1) * d]
                .iter()
                .zip(&tmp)
                .map(|(r, q)| r - q)
                .collect();
            Self::block_matvec(&self.d1_inv, &t, &mut rest[0..d]);
        }
        out
    }

    /// One application of `B⁻¹C`, the inverse-propagator the eigensolver
    /// iterates with.
    pub fn apply_inverse_propagator(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.solve_stiffness(&self.apply_mass(x))
    }

    /// Dense `(B, C)` pair; intended for small grids and cross-checks.
    pub fn dense_pencil(&self) -> (ComplexMatrix, ComplexMatrix) {
        let d = self.dim;
        let n = self.n_steps;
        let size = d * n;
        let place = |m: &mut Vec<Vec<Complex64>>, bi: usize, bj: usize, sub: &ComplexMatrix| {
            for i in 0..d {
                for j in 0..d {
                    m[bi * d + i][bj * d + j] += sub.get(i, j);
                }
            }
        };
        let mut b = vec![vec![Complex64::new(0.0, 0.0); size]; size];
        let mut c = vec![vec![Complex64::new(0.0, 0.0); size]; size];
        let fw = self.d1.mul(&self.coupling);
        let cw = self.c1.mul(&self.coupling);
        for j in 0..n {
            place(&mut b, j, j, &self.d0);
            place(&mut c, j, j, &self.c0);
            if j + 1 < n {
                place(&mut b, j, j + 1, &self.d1);
                place(&mut c, j, j + 1, &self.c1);
            } else {
                place(&mut b, j, 0, &fw);
                place(&mut c, j, 0, &cw);
            }
        }
        (
            ComplexMatrix::from_rows(b).expect("square by construction"),
            ComplexMatrix::from_rows(c).expect("square by construction"),
        )
    }
}

/// Keeps reciprocals of the nonzero spectrum of `B⁻¹C`, sorted by ascending
/// modulus.
fn invert_and_sort(thetas: Vec<Complex64>, count: usize) -> Vec<Complex64> {
    let max_theta = thetas.iter().map(|t| t.norm()).fold(0.0, f64::max);
    let mut lambdas: Vec<Complex64> = thetas
        .into_iter()
        .filter(|t| t.norm() > 1e-12 * max_theta.max(1e-300))
        .map(|t| Complex64::new(1.0, 0.0) / t)
        .collect();
    lambdas.sort_by(|p, q| p.norm().total_cmp(&q.norm()));
    lambdas.truncate(count);
    lambdas
}

fn dense_smallest(op: &DiscretizedOperator, count: usize) -> Result<Vec<Complex64>, OracleError> {
    let (b, c) = op.dense_pencil();
    let x = b.solve(&c);
    let thetas = x.eigenvalues_general()?;
    Ok(invert_and_sort(thetas, count))
}

fn arnoldi_smallest(
    op: &DiscretizedOperator,
    count: usize,
) -> Result<Vec<Complex64>, OracleError> {
    let n = op.size();
    let mut m = (4 * count + 28).min(n);
    loop {
        let (hess, sub_norm, m_eff) = arnoldi_factorization(op, m);
        let hm = ComplexMatrix::from_fn(m_eff, |i, j| hess[i][j]);
        let (thetas, vecs) = hm.eigen_general_pairs()?;
        let max_theta = thetas.iter().map(|t| t.norm()).fold(0.0, f64::max);

        let mut ritz: Vec<(Complex64, f64)> = (0..m_eff)
            .map(|r| {
                let col = vecs.col(r);
                let nrm = vec_norm(&col).max(1e-300);
                let res = sub_norm * col[m_eff - 1].norm() / nrm;
                (thetas[r], res)
            })
            .collect();
        ritz.sort_by(|p, q| q.0.norm().total_cmp(&p.0.norm()));

        let wanted: Vec<(Complex64, f64)> = ritz
            .iter()
            .copied()
            .filter(|(t, _)| t.norm() > 1e-12 * max_theta.max(1e-300))
            .take(count)
            .collect();
        let converged = wanted.len() == count
            && wanted.iter().all(|(t, res)| *res <= 1e-8 * t.norm());
        let exhausted = m_eff < m || m >= n;
        if converged || exhausted {
            if wanted.len() < count {
                return Err(OracleError::EigenExtraction {
                    detail: format!("only {} nonzero eigenvalues reachable", wanted.len()),
                });
            }
            return Ok(invert_and_sort(
                wanted.into_iter().map(|(t, _)| t).collect(),
                count,
            ));
        }
        m = (2 * m).min(n);
    }
}

/// Arnoldi factorization of the inverse propagator with one
/// reorthogonalization pass. Returns the square Hessenberg block, the last
/// subdiagonal entry, and the achieved subspace size (smaller on lucky
/// breakdown).
fn arnoldi_factorization(
    op: &DiscretizedOperator,
    m: usize,
) -> (Vec<Vec<Complex64>>, f64, usize) {
    let n = op.size();
    let mut v0: Vec<Complex64> = (0..n)
        .map(|i| {
            let t = (i + 1) as f64;
            Complex64::new(1.0 + 0.25 * (1.7 * t).sin(), 0.25 * (2.3 * t).cos())
        })
        .collect();
    let nrm = vec_norm(&v0);
    v0.iter_mut().for_each(|z| *z /= nrm);

    let mut basis: Vec<Vec<Complex64>> = vec![v0];
    let mut hess: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); m]; m + 1];
    let mut sub_norm = 0.0;
    let mut m_eff = m;

    for j in 0..m {
        let mut w = op.apply_inverse_propagator(&basis[j]);
        for _pass in 0..2 {
            for (i, vi) in basis.iter().enumerate() {
                let coeff = vec_inner(&w, vi);
                hess[i][j] += coeff;
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= coeff * vk;
                }
            }
        }
        let h_next = vec_norm(&w);
        hess[j + 1][j] = Complex64::new(h_next, 0.0);
        if h_next < 1e-13 {
            m_eff = j + 1;
            sub_norm = 0.0;
            break;
        }
        sub_norm = h_next;
        if j + 1 < m {
            w.iter_mut().for_each(|z| *z /= h_next);
            basis.push(w);
        }
    }
    hess.truncate(m_eff + 1);
    hess.iter_mut().for_each(|row| row.truncate(m_eff));
    (hess, sub_norm, m_eff)
}

/// The `count` eigenvalues of the boundary-eliminated discretization closest
/// to the origin, implicit-trapezoid scheme.
///
/// Small systems are solved densely; larger ones by shift-invert Arnoldi on
/// the structured stencil. Both paths converge to the true eigenvalues at
/// the scheme's order (`O(h²)` here) as the grid is refined.
pub fn fd_eigenvalues(
    block: &Block,
    n_steps: usize,
    count: usize,
) -> Result<Vec<Complex64>, OracleError> {
    fd_eigenvalues_scheme(block, n_steps, count, Scheme::ImplicitTrapezoid)
}

/// Same as [`fd_eigenvalues`] with an explicit scheme choice.
pub fn fd_eigenvalues_scheme(
    block: &Block,
    n_steps: usize,
    count: usize,
    scheme: Scheme,
) -> Result<Vec<Complex64>, OracleError> {
    let op = DiscretizedOperator::new(block, n_steps, scheme)?;
    if count > op.size() {
        return Err(OracleError::CountTooLarge {
            count,
            max: op.size(),
        });
    }
    if op.size() <= 384 {
        dense_smallest(&op, count)
    } else {
        arnoldi_smallest(&op, count)
    }
}

/// Pairs each computed eigenvalue with the nearest analytic one, skipping
/// computed values beyond `im_cap` (badly resolved high modes). Returns
/// `(computed, analytic, distance)` triples.
pub fn match_eigenvalues(
    computed: &[Complex64],
    analytic: &[Complex64],
    im_cap: f64,
) -> Vec<(Complex64, Complex64, f64)> {
    let mut out = Vec::new();
    for &c in computed {
        if c.im.abs() > im_cap {
            continue;
        }
        if let Some((best, dist)) = analytic
            .iter()
            .map(|&a| (a, (c - a).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
        {
            out.push((c, best, dist));
        }
    }
    out
}

/// Default cap `π(N/8)/ℓ` on imaginary parts compared against the FD
/// discretization at `N` steps.
pub fn fd_im_cap(block: &Block, n_steps: usize) -> f64 {
    PI * (n_steps as f64 / 8.0) / block.interval().length()
}

// ---------------------------------------------------------------------------
// Quadrature checks
// ---------------------------------------------------------------------------

/// Vector-valued function sampled on `N+1` equispaced nodes of a block's
/// interval, optionally with analytic derivative samples.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub block_index: usize,
    interval: (f64, f64),
    values: Vec<Vec<Complex64>>,
    derivatives: Option<Vec<Vec<Complex64>>>,
}

impl GridFunction {
    pub fn sample(
        block: &Block,
        block_index: usize,
        n_steps: usize,
        f: impl Fn(f64) -> Vec<Complex64>,
    ) -> Self {
        Self::sample_inner(block, block_index, n_steps, f, None::<fn(f64) -> Vec<Complex64>>)
    }

    pub fn sample_with_derivative(
        block: &Block,
        block_index: usize,
        n_steps: usize,
        f: impl Fn(f64) -> Vec<Complex64>,
        df: impl Fn(f64) -> Vec<Complex64>,
    ) -> Self {
        Self::sample_inner(block, block_index, n_steps, f, Some(df))
    }

    fn sample_inner(
        block: &Block,
        block_index: usize,
        n_steps: usize,
        f: impl Fn(f64) -> Vec<Complex64>,
        df: Option<impl Fn(f64) -> Vec<Complex64>>,
    ) -> Self {
        assert!(n_steps >= 2);
        let a = block.interval().a();
        let h = block.interval().length() / n_steps as f64;
        let nodes: Vec<f64> = (0..=n_steps).map(|j| a + j as f64 * h).collect();
        let values: Vec<Vec<Complex64>> = nodes.iter().map(|&t| f(t)).collect();
        let derivatives = df.map(|d| nodes.iter().map(|&t| d(t)).collect());
        Self {
            block_index,
            interval: (block.interval().a(), block.interval().b()),
            values,
            derivatives,
        }
    }

    pub fn node_count(&self) -> usize {
        self.values.len()
    }

    fn spacing(&self) -> f64 {
        (self.interval.1 - self.interval.0) / (self.values.len() - 1) as f64
    }

    /// Derivative samples: analytic when supplied, otherwise second-order
    /// finite differences (central inside, one-sided at the ends).
    fn derivative_values(&self) -> Vec<Vec<Complex64>> {
        if let Some(d) = &self.derivatives {
            return d.clone();
        }
        let h = self.spacing();
        let n = self.values.len();
        let dim = self.values[0].len();
        let mut out = vec![vec![Complex64::new(0.0, 0.0); dim]; n];
        for i in 0..dim {
            out[0][i] = (-3.0 * self.values[0][i] + 4.0 * self.values[1][i]
                - self.values[2][i])
                / (2.0 * h);
            out[n - 1][i] = (3.0 * self.values[n - 1][i] - 4.0 * self.values[n - 2][i]
                + self.values[n - 3][i])
                / (2.0 * h);
            for j in 1..n - 1 {
                out[j][i] = (self.values[j + 1][i] - self.values[j - 1][i]) / (2.0 * h);
            }
        }
        out
    }
}

fn trapezoid(samples: &[f64], h: f64) -> f64 {
    let n = samples.len();
    let mut acc = 0.5 * (samples[0] + samples[n - 1]);
    for s in &samples[1..n - 1] {
        acc += s;
    }
    acc * h
}

#[derive(Debug, Clone, Copy)]
pub struct NormIdentity {
    /// Quadrature of `‖u' + Au‖²`.
    pub lhs: f64,
    /// Quadrature of `‖u'‖² + ‖Au‖²`.
    pub rhs: f64,
    pub discrepancy: f64,
}

/// Checks `‖u' + Au‖² = ‖u'‖² + ‖Au‖²` for a grid function vanishing at both
/// endpoints (the cross terms telescope to the boundary values, which are
/// zero on the minimal domain).
pub fn quadrature_norm_identity(
    block: &Block,
    u: &GridFunction,
) -> Result<NormIdentity, OracleError> {
    let at_a = vec_norm(&u.values[0]);
    let at_b = vec_norm(u.values.last().expect("nonempty grid"));
    if at_a > 1e-12 || at_b > 1e-12 {
        return Err(OracleError::BoundaryNotZero { at_a, at_b });
    }
    let derivs = u.derivative_values();
    let h = u.spacing();
    let mut sum_full = Vec::with_capacity(u.values.len());
    let mut sum_deriv = Vec::with_capacity(u.values.len());
    let mut sum_au = Vec::with_capacity(u.values.len());
    for (v, dv) in u.values.iter().zip(&derivs) {
        let au = block.coeff().mat_vec(v);
        let full: Vec<Complex64> = dv.iter().zip(&au).map(|(d, a)| d + a).collect();
        sum_full.push(vec_norm(&full).powi(2));
        sum_deriv.push(vec_norm(dv).powi(2));
        sum_au.push(vec_norm(&au).powi(2));
    }
    let lhs = trapezoid(&sum_full, h);
    let rhs = trapezoid(&sum_deriv, h) + trapezoid(&sum_au, h);
    Ok(NormIdentity {
        lhs,
        rhs,
        discrepancy: (lhs - rhs).abs(),
    })
}

/// `|(Wu₀, A·Wu₀) − (u₀, A·u₀)|`: the boundary term of the normality
/// computation. Vanishes when `W*AW = A` (commuting unitary coupling) and is
/// macroscopic when the pair fails to commute.
pub fn boundary_cancellation(block: &Block, u0: &[Complex64]) -> f64 {
    let w_u0 = block.coupling().mat_vec(u0);
    let a_w_u0 = block.coeff().mat_vec(&w_u0);
    let a_u0 = block.coeff().mat_vec(u0);
    (vec_inner(&a_w_u0, &w_u0) - vec_inner(&a_u0, u0)).norm()
}

/// Gram matrix of quadrature-normalized eigenfunctions
/// `u_{m,k}(t) = e^{(λ−α)(t−a)} v_m` of one block, under trapezoid
/// quadrature with `n_quad` subintervals.
///
/// Distinct modes are orthogonal through their vectors; distinct `k` within
/// a mode through Fourier orthogonality (the scalar factor has unit
/// modulus). Off-diagonal entries measure quadrature plus formula error.
pub fn eigenfunction_gram(
    block: &Block,
    records: &[EigenvalueRecord],
    n_quad: usize,
    tol: &Tolerances,
) -> Result<ComplexMatrix, OracleError> {
    assert!(!records.is_empty() && n_quad >= 2);
    let first_block = records[0].block_index;
    if records.iter().any(|r| r.block_index != first_block) {
        return Err(OracleError::MixedBlocks);
    }
    let modes = simultaneous_eigenbasis(block, tol)?;
    let length = block.interval().length();
    let h = length / n_quad as f64;
    let count = records.len();

    // Pointwise inner products reduce to vec_inner(v_r, v_s) times a pure
    // phase; integrate the phase factor by trapezoid.
    let mut raw = vec![vec![Complex64::new(0.0, 0.0); count]; count];
    for (r, rec_r) in records.iter().enumerate() {
        for (s, rec_s) in records.iter().enumerate() {
            let v_r = &modes[rec_r.mode_index - 1].vector;
            let v_s = &modes[rec_s.mode_index - 1].vector;
            let vv = vec_inner(v_r, v_s);
            let freq = rec_r.lambda.im - rec_s.lambda.im;
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..=n_quad {
                let t = j as f64 * h;
                let weight = if j == 0 || j == n_quad { 0.5 } else { 1.0 };
                acc += Complex64::from_polar(1.0, freq * t) * weight;
            }
            raw[r][s] = vv * acc * h;
        }
    }
    let gram = ComplexMatrix::from_fn(count, |r, s| {
        let norm = (raw[r][r].re * raw[s][s].re).sqrt();
        raw[r][s] / norm
    });
    Ok(gram)
}
