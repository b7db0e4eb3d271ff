//! Singular values of the inverse operator, Schatten-class membership with
//! certified tail bounds, and discrete-spectrum criteria for the direct sum.
//!
//! The operator is normal, so the singular values of its inverse are the
//! reciprocals `μ_q = 1/|λ_q|` of the eigenvalue moduli. For a finite
//! instance the only infinite summation is the Fourier index `k`; everything
//! beyond the truncation is either covered by a closed-form integral bound
//! (per mode, uniform over the phase `δ`) or certified analytically through
//! a user-declared growth model of the untruncated block family.
//!
//! Verdicts are deliberately three-valued: a partial sum is never
//! extrapolated into `Converges` or `Diverges` without a certificate.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use thiserror::Error;

use crate::hilbert::{FamilyBound, Instance};
use crate::spectrum::{operator_spectrum, SpectrumError, SpectrumSlice};
use crate::tol::Tolerances;

#[derive(Debug, Error)]
pub enum SchattenError {
    #[error("spectrum slice is empty")]
    EmptySpectrum,
    #[error("tail bound diverges for exponent p = {p} (needs p > 1)")]
    DivergentTail { p: f64 },
    #[error("Schatten exponent must satisfy p >= 1, got {p}")]
    BadExponent { p: f64 },
    #[error("probe lies in the spectrum (distance {dist:.3e})")]
    ProbeInSpectrum { dist: f64 },
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

/// Neumaier-compensated accumulator; relative error stays near machine
/// epsilon even over 1e7 terms.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Truncated singular-value series of the inverse operator.
#[derive(Debug, Clone)]
pub struct SingularValueSeries {
    /// `1/|λ_q|`, non-increasing.
    pub mu: Vec<f64>,
    /// Schatten exponent.
    pub p: f64,
    /// `Σ μ^p` over the truncation, compensated summation in ascending
    /// magnitude order.
    pub partial_sum: f64,
    /// Certified bound on the omitted `|k| > k_max` terms of the modes that
    /// were enumerated; infinite when `p ≤ 1`.
    pub tail_bound: f64,
    /// Set when the block/mode enumeration itself was truncated.
    pub mode_tail_note: bool,
}

/// `{1/|λ_q|}` sorted descending.
pub fn singular_values_inverse(slice: &SpectrumSlice) -> Result<Vec<f64>, SchattenError> {
    if slice.records.is_empty() {
        return Err(SchattenError::EmptySpectrum);
    }
    let mut mu: Vec<f64> = slice
        .records
        .iter()
        .map(|r| 1.0 / r.lambda.norm())
        .collect();
    mu.sort_by(|a, b| b.total_cmp(a));
    Ok(mu)
}

/// `Σ μ^p`, summed in ascending order with compensation. The input is
/// expected descending (as produced by [`singular_values_inverse`]).
pub fn schatten_partial_sum(mu: &[f64], p: f64) -> f64 {
    let mut acc = CompensatedSum::default();
    for &m in mu.iter().rev() {
        acc.add(m.powf(p));
    }
    acc.total()
}

/// Certified upper bound on `Σ_{|k| > k_max} (α² + (δ + 2kπ)²/ℓ²)^{−p/2}`,
/// uniform over `δ ∈ (−π, π]` and over `α ≥ 1`.
///
/// Each omitted term is at most `((2|k|π − π)/ℓ)^{−p}`, and that function of
/// `|k|` is decreasing, so the integral comparison gives, per sign of `k`,
///
/// ```text
/// Σ_{k > k_max} ≤ ∫_{k_max}^∞ ((2πx − π)/ℓ)^{−p} dx
///              = (ℓ/2π) · ((2π·k_max − π)/ℓ)^{−(p−1)} / (p − 1).
/// ```
///
/// The bound is finite only for `p > 1`; the `k`-series itself diverges at
/// `p = 1`.
pub fn tail_bound(alpha: f64, length: f64, k_max: u32, p: f64) -> Result<f64, SchattenError> {
    debug_assert!(alpha >= 1.0, "coefficient eigenvalues are at least 1");
    assert!(length > 0.0 && k_max >= 1);
    if p <= 1.0 {
        return Err(SchattenError::DivergentTail { p });
    }
    let u0 = 2.0 * PI * k_max as f64 - PI;
    Ok(2.0 * (length / (2.0 * PI)) * (u0 / length).powf(1.0 - p) / (p - 1.0))
}

/// Singular-value series of a slice together with the per-mode tail bounds.
pub fn singular_value_series(
    slice: &SpectrumSlice,
    p: f64,
) -> Result<SingularValueSeries, SchattenError> {
    if p < 1.0 {
        return Err(SchattenError::BadExponent { p });
    }
    let mu = singular_values_inverse(slice)?;
    let partial_sum = schatten_partial_sum(&mu, p);
    let tail = if p > 1.0 {
        let mut acc = CompensatedSum::default();
        for (_, family) in mode_families(slice) {
            acc.add(tail_bound(family.alpha, family.length, slice.k_max.max(1), p)?);
        }
        acc.total()
    } else {
        f64::INFINITY
    };
    Ok(SingularValueSeries {
        mu,
        p,
        partial_sum,
        tail_bound: tail,
        mode_tail_note: !slice.complete_modes,
    })
}

struct ModeFamily {
    alpha: f64,
    delta: f64,
    length: f64,
}

fn mode_families(slice: &SpectrumSlice) -> BTreeMap<(usize, usize), ModeFamily> {
    let mut out = BTreeMap::new();
    for r in &slice.records {
        out.entry((r.block_index, r.mode_index)).or_insert(ModeFamily {
            alpha: r.lambda.re,
            delta: r.delta,
            length: slice.block_lengths[r.block_index - 1],
        });
    }
    out
}

/// Analytic description of a scalar sequence indexed by `n ≥ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sequence {
    Constant { value: f64 },
    /// `intercept + slope·n`
    Linear { intercept: f64, slope: f64 },
    /// `coeff · n^exponent`
    Power { coeff: f64, exponent: f64 },
    /// Explicit finite table; certifies nothing about the infinite family.
    Table { values: Vec<f64> },
}

impl Sequence {
    /// Value at 1-based index `n`; `None` past the end of a table.
    pub fn value(&self, n: usize) -> Option<f64> {
        match self {
            Sequence::Constant { value } => Some(*value),
            Sequence::Linear { intercept, slope } => Some(intercept + slope * n as f64),
            Sequence::Power { coeff, exponent } => Some(coeff * (n as f64).powf(*exponent)),
            Sequence::Table { values } => values.get(n - 1).copied(),
        }
    }

    /// `Some(true)` when the sequence provably tends to infinity,
    /// `Some(false)` when provably bounded, `None` when the description
    /// cannot decide (tables).
    pub fn tends_to_infinity(&self) -> Option<bool> {
        match self {
            Sequence::Constant { .. } => Some(false),
            Sequence::Linear { slope, .. } => Some(*slope > 0.0),
            Sequence::Power { coeff, exponent } => Some(*coeff > 0.0 && *exponent > 0.0),
            Sequence::Table { .. } => None,
        }
    }

    /// Upper bound valid for all `n ≥ 1`, when one exists.
    pub fn bounded_above(&self) -> Option<f64> {
        match self {
            Sequence::Constant { value } => Some(*value),
            Sequence::Linear { intercept, slope } if *slope <= 0.0 => Some(intercept + slope),
            Sequence::Power { coeff, exponent } if *exponent <= 0.0 => Some(*coeff),
            _ => None,
        }
    }

    /// Power envelope `c·n^e ≤ seq(n)` for all `n ≥ 1`, used to majorize
    /// reciprocals. `None` for tables or non-positive data.
    fn power_lower_envelope(&self) -> Option<(f64, f64)> {
        match self {
            Sequence::Constant { value } if *value > 0.0 => Some((*value, 0.0)),
            Sequence::Linear { intercept, slope } => {
                if *slope > 0.0 && *intercept >= 0.0 {
                    Some((*slope, 1.0))
                } else if *slope > 0.0 {
                    // intercept < 0: a + bn ≥ (a + b)·n requires a(1 − 1/n) ≥ 0; fails.
                    let first = intercept + slope;
                    (first > 0.0).then_some((first.min(*slope), 0.0))
                } else {
                    None
                }
            }
            Sequence::Power { coeff, exponent } if *coeff > 0.0 && *exponent >= 0.0 => {
                Some((*coeff, *exponent))
            }
            _ => None,
        }
    }

    /// Power envelope `seq(n) ≤ c·n^e` for all `n ≥ 1`.
    fn power_upper_envelope(&self) -> Option<(f64, f64)> {
        match self {
            Sequence::Constant { value } => Some((*value, 0.0)),
            Sequence::Linear { intercept, slope } => {
                if *slope >= 0.0 {
                    Some((intercept + slope, 1.0))
                } else {
                    Some((intercept + slope, 0.0))
                }
            }
            Sequence::Power { coeff, exponent } if *exponent >= 0.0 => Some((*coeff, *exponent)),
            _ => None,
        }
    }
}

/// Analytic model of the untruncated block family: the smallest coefficient
/// eigenvalue `λ₁(Aₙ)` and the block dimensions as named sequences.
///
/// `scalar_blocks` declares `Aₙ = λ₁(Aₙ)·I`, the shape of the classical
/// counterexample family; it is what allows a *divergence* certificate
/// (bounded eigenvalues on infinitely many modes). `min_length` declares a
/// positive lower bound on the interval lengths of the untruncated family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthModel {
    pub lambda1: Sequence,
    pub dims: Sequence,
    #[serde(default)]
    pub scalar_blocks: bool,
    #[serde(default)]
    pub min_length: Option<f64>,
}

impl GrowthModel {
    /// `‖Aₙ⁻¹‖ = 1/λ₁(Aₙ) ≤ 1`: bounded whenever the model is sane.
    pub fn inverse_norm_family(&self) -> FamilyBound {
        match self.lambda1.value(1) {
            Some(v) if v >= 1.0 => FamilyBound::CertifiedBounded,
            _ => FamilyBound::Unknown,
        }
    }

    /// Boundedness of `‖Aₙ‖` across the family; decidable only for scalar
    /// blocks (where `‖Aₙ‖ = λ₁(Aₙ)`).
    pub fn coeff_norm_family(&self) -> FamilyBound {
        match self.lambda1.tends_to_infinity() {
            Some(true) => FamilyBound::CertifiedUnbounded,
            Some(false) if self.scalar_blocks => FamilyBound::CertifiedBounded,
            _ => FamilyBound::Unknown,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Converges,
    Diverges,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub enum DivergenceWitness {
    /// At `p = 1` every mode's `k`-series dominates a harmonic series:
    /// `term_k ≥ coeff/k` for `k ≥ 1`.
    HarmonicMinorant { coeff: f64 },
    /// Bounded eigenvalues on scalar blocks with infinite total dimension:
    /// infinitely many terms at least `per_mode_floor`.
    BoundedEigenvaluesInfiniteModes {
        eigenvalue_bound: f64,
        per_mode_floor: f64,
    },
}

#[derive(Debug, Clone, Serialize)]
pub enum ModelConclusion {
    /// `Σₙ dims(n)·λ₁(n)^{−p/2}` certified convergent; the comparison route
    /// for `p > 2` applies, with the computed bound on that majorant.
    ComparisonConverges { majorant_bound: f64 },
    /// Scalar-block family with bounded eigenvalues: certified divergent.
    CertifiedDivergent,
    Inconclusive { reason: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct Evidence {
    pub p: f64,
    pub k_max: u32,
    pub partial_sum: f64,
    pub tail_bound: f64,
    /// `partial_sum + tail_bound` (infinite when the tail bound is).
    pub total_upper: f64,
    pub mode_tail_note: bool,
    pub divergence_witness: Option<DivergenceWitness>,
    pub model_conclusion: Option<ModelConclusion>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MembershipVerdict {
    pub verdict: Verdict,
    pub evidence: Evidence,
}

/// Certified bound on `Σₙ dims(n)·λ₁(n)^{−p/2}` when the envelopes prove it
/// finite: exact partial over the first terms plus an integral tail.
fn majorant_bound(model: &GrowthModel, p: f64) -> Option<f64> {
    let (lam_c, lam_e) = model.lambda1.power_lower_envelope()?;
    let (dim_c, dim_e) = model.dims.power_upper_envelope()?;
    if lam_c <= 0.0 {
        return None;
    }
    // term(n) ≤ dim_c·n^dim_e · (lam_c·n^lam_e)^{−p/2} = C·n^{−q}
    let q = lam_e * p / 2.0 - dim_e;
    if q <= 1.0 {
        return None;
    }
    let n0 = 1000usize;
    let mut acc = CompensatedSum::default();
    for n in (1..=n0).rev() {
        let lam = model.lambda1.value(n)?;
        let dim = model.dims.value(n)?;
        if lam < 1.0 || dim < 1.0 {
            return None;
        }
        acc.add(dim * lam.powf(-p / 2.0));
    }
    let c = dim_c / lam_c.powf(p / 2.0);
    let tail = c * (n0 as f64).powf(1.0 - q) / (q - 1.0);
    Some(acc.total() + tail)
}

/// Schatten-class membership of the inverse at exponent `p`.
///
/// For the concrete (finite) instance the per-mode `k`-series converges iff
/// `p > 1`; the verdict reports the partial sum plus the certified tail. A
/// growth model extends the claim to the untruncated family: a convergent
/// majorant `Σ dims·λ₁^{−p/2}` certifies convergence for `p > 2`, the
/// scalar-block bounded-eigenvalue pattern certifies divergence for every
/// `p`, and anything else leaves the family verdict inconclusive.
pub fn schatten_membership(
    instance: &Instance,
    p: f64,
    k_max: u32,
    model: Option<&GrowthModel>,
    tol: &Tolerances,
) -> Result<MembershipVerdict, SchattenError> {
    if p < 1.0 {
        return Err(SchattenError::BadExponent { p });
    }
    let slice = operator_spectrum(instance, k_max, tol)?;
    let families = mode_families(&slice);

    if p == 1.0 {
        // Each term (α² + (δ+2kπ)²/ℓ²)^{−1/2} ≥ 1/(α + (2k+1)π/ℓ) ≥ coeff/k.
        let coeff = families
            .values()
            .map(|f| 1.0 / (f.alpha + 3.0 * PI / f.length))
            .fold(0.0, f64::max);
        let mu = singular_values_inverse(&slice)?;
        let partial = schatten_partial_sum(&mu, p);
        return Ok(MembershipVerdict {
            verdict: Verdict::Diverges,
            evidence: Evidence {
                p,
                k_max,
                partial_sum: partial,
                tail_bound: f64::INFINITY,
                total_upper: f64::INFINITY,
                mode_tail_note: !slice.complete_modes,
                divergence_witness: Some(DivergenceWitness::HarmonicMinorant { coeff }),
                model_conclusion: None,
            },
        });
    }

    let series = singular_value_series(&slice, p)?;
    let mut verdict = Verdict::Converges;
    let mut witness = None;
    let mut model_conclusion = None;

    if let Some(model) = model {
        let bounded = model.lambda1.bounded_above();
        let min_length = model.min_length.filter(|l| *l > 0.0);
        if let (true, Some(eigenvalue_bound), Some(l)) =
            (model.scalar_blocks, bounded, min_length)
        {
            let floor =
                (eigenvalue_bound * eigenvalue_bound + PI * PI / (l * l)).powf(-p / 2.0);
            verdict = Verdict::Diverges;
            witness = Some(DivergenceWitness::BoundedEigenvaluesInfiniteModes {
                eigenvalue_bound,
                per_mode_floor: floor,
            });
            model_conclusion = Some(ModelConclusion::CertifiedDivergent);
        } else if p > 2.0 {
            match majorant_bound(model, p) {
                Some(bound) => {
                    model_conclusion =
                        Some(ModelConclusion::ComparisonConverges { majorant_bound: bound });
                }
                None => {
                    verdict = Verdict::Inconclusive;
                    model_conclusion = Some(ModelConclusion::Inconclusive {
                        reason: format!(
                            "no convergent majorant for Σ dims·λ₁^(−p/2) at p = {p}"
                        ),
                    });
                }
            }
        } else {
            verdict = Verdict::Inconclusive;
            model_conclusion = Some(ModelConclusion::Inconclusive {
                reason: format!(
                    "comparison route needs p > 2; p = {p} decides only the truncation"
                ),
            });
        }
    }

    let total_upper = series.partial_sum + series.tail_bound;
    Ok(MembershipVerdict {
        verdict,
        evidence: Evidence {
            p,
            k_max,
            partial_sum: series.partial_sum,
            tail_bound: series.tail_bound,
            total_upper,
            mode_tail_note: series.mode_tail_note,
            divergence_witness: witness,
            model_conclusion,
        },
    })
}

/// Distance from `probe` to the closed-form spectrum of one block,
/// minimized exactly over all modes and all `k ∈ ℤ`.
fn spectrum_distance(families: &[&ModeFamily], probe: Complex64) -> f64 {
    let mut best = f64::INFINITY;
    for f in families {
        let dx = probe.re - f.alpha;
        // Im eigenvalues: −(δ + 2kπ)/ℓ; nearest k from the unrounded solve.
        let k_star = (-probe.im * f.length - f.delta) / (2.0 * PI);
        for k in [k_star.floor(), k_star.ceil()] {
            let im = -(f.delta + 2.0 * k * PI) / f.length;
            let dy = probe.im - im;
            best = best.min((dx * dx + dy * dy).sqrt());
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TruncationTrend {
    /// One block: a finite-dimensional problem always has discrete spectrum.
    SingleBlock,
    DecreasingTowardZero,
    NotDecreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FamilyVerdict {
    /// `λ₁(Aₙ) → ∞`: discrete spectrum certified by the growth model.
    DiscreteByEigenvalueGrowth,
    /// Bounded `λ₁` with infinite total dimension: the counterexample
    /// pattern; the criterion fails.
    CounterexampleBoundedEigenvalues,
    ModelInconclusive,
    NoModel,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscreteSpectrumReport {
    /// `‖R_λ(blockₙ)‖ = 1/dist(λ, σₙ)` per block (normality makes this
    /// exact).
    pub resolvent_norms: Vec<f64>,
    pub trend: TruncationTrend,
    pub family: FamilyVerdict,
}

/// Resolvent-norm diagnostics for the discrete-spectrum criterion.
pub fn discrete_spectrum_check(
    instance: &Instance,
    model: Option<&GrowthModel>,
    probe: Complex64,
    tol: &Tolerances,
) -> Result<DiscreteSpectrumReport, SchattenError> {
    let resolvent_norms = block_resolvent_norms(instance, probe, tol)?;

    let trend = if resolvent_norms.len() == 1 {
        TruncationTrend::SingleBlock
    } else {
        let nonincreasing = resolvent_norms
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-12));
        let strictly_less =
            resolvent_norms.last().unwrap() < &(resolvent_norms[0] * (1.0 - 1e-12));
        if nonincreasing && strictly_less {
            TruncationTrend::DecreasingTowardZero
        } else {
            TruncationTrend::NotDecreasing
        }
    };

    let family = match model {
        None => FamilyVerdict::NoModel,
        Some(m) => match m.lambda1.tends_to_infinity() {
            Some(true) => FamilyVerdict::DiscreteByEigenvalueGrowth,
            Some(false) => FamilyVerdict::CounterexampleBoundedEigenvalues,
            None => FamilyVerdict::ModelInconclusive,
        },
    };

    Ok(DiscreteSpectrumReport {
        resolvent_norms,
        trend,
        family,
    })
}

fn block_resolvent_norms(
    instance: &Instance,
    probe: Complex64,
    tol: &Tolerances,
) -> Result<Vec<f64>, SchattenError> {
    let slice = operator_spectrum(instance, 0, tol)?;
    let families = mode_families(&slice);
    let mut norms = Vec::with_capacity(instance.blocks().len());
    for idx in 1..=instance.blocks().len() {
        let block_families: Vec<&ModeFamily> = families
            .iter()
            .filter(|((b, _), _)| *b == idx)
            .map(|(_, f)| f)
            .collect();
        let dist = spectrum_distance(&block_families, probe);
        if dist == 0.0 {
            return Err(SchattenError::ProbeInSpectrum { dist });
        }
        norms.push(1.0 / dist);
    }
    Ok(norms)
}

/// Operator-norm error of truncating the block-diagonal resolvent after `m`
/// blocks, together with the analytic bound `sup_{n ≥ m+1} ‖R_λ(blockₙ)‖`.
/// On a finite instance the two coincide; the pair is returned so the
/// equality can be asserted by callers.
pub fn truncation_error(
    instance: &Instance,
    probe: Complex64,
    m: usize,
    tol: &Tolerances,
) -> Result<(f64, f64), SchattenError> {
    assert!(
        m >= 1 && m < instance.blocks().len(),
        "truncation index must satisfy 1 <= m < block count"
    );
    let norms = block_resolvent_norms(instance, probe, tol)?;
    let tail = &norms[m..];
    let exact = tail.iter().copied().fold(0.0, f64::max);
    let bound = exact;
    debug_assert!(exact <= bound);
    Ok((exact, bound))
}
