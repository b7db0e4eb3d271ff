//! Cross-module invariants: property tests on random inputs and the
//! anti-drift checks tying the closed form to the oracles.

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use normext::extension::{simultaneous_eigenbasis, validate_block, arg_branch};
use normext::hilbert::{
    direct_sum_norm, hermitian_eigendecomposition, matrix_exponential, point_spectrum_union,
    vec_inner, vec_norm, Block, ComplexMatrix, FamilyBound, Instance, Interval,
};
use normext::oracle::{boundary_cancellation, characteristic_eigenvalues, characteristic_residual};
use normext::schatten::{
    schatten_membership, singular_value_series, tail_bound, CompensatedSum, Verdict,
};
use normext::spectrum::{
    block_eigenvalues, directed_distance, operator_spectrum, verify_normal_spectrum_structure,
};
use normext::tol::Tolerances;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_hermitian(dim: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let raw = ComplexMatrix::from_fn(dim, |_, _| {
        c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    raw.add(&raw.adjoint()).scale(c(0.5, 0.0))
}

fn random_unitary(dim: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let h = random_hermitian(dim, rng);
    let (_, q) = hermitian_eigendecomposition(&h, 1.0).unwrap();
    q
}

/// Valid block built by conjugating random diagonals with one random
/// unitary, the construction every formula-vs-oracle check runs on.
fn random_commuting_block(dim: usize, rng: &mut ChaCha8Rng, from: f64) -> Block {
    let q = random_unitary(dim, rng);
    let alphas: Vec<Complex64> = (0..dim)
        .map(|_| c(rng.gen_range(1.0..10.0), 0.0))
        .collect();
    let omegas: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::from_polar(1.0, rng.gen_range(-PI..PI)))
        .collect();
    let a = q.mul(&ComplexMatrix::diagonal(&alphas)).mul(&q.adjoint());
    let w = q.mul(&ComplexMatrix::diagonal(&omegas)).mul(&q.adjoint());
    let length = rng.gen_range(0.1..5.0);
    Block::new(Interval::new(from, from + length).unwrap(), a, w).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eigendecomposition_residual_is_small(seed in 0u64..1 << 48, dim in 1usize..=16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(dim, &mut rng);
        let (values, u) = hermitian_eigendecomposition(&h, 1e-10).unwrap();
        let scale = h.op_norm().max(1.0);
        for j in 0..dim {
            let v = u.col(j);
            let hv = h.mat_vec(&v);
            let resid: Vec<Complex64> = hv
                .iter()
                .zip(&v)
                .map(|(x, y)| x - c(values[j], 0.0) * y)
                .collect();
            prop_assert!(vec_norm(&resid) <= 1e-10 * scale);
        }
        // Ascending order.
        for pair in values.windows(2) {
            prop_assert!(pair[0] <= pair[1]);
        }
    }

    #[test]
    fn expm_inverse_pairing(seed in 0u64..1 << 48, dim in 1usize..=8, t in -10.0f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = random_hermitian(dim, &mut rng);
        // Conditioning of the product grows like e^{|t|·spread}; 0.4 keeps
        // the 1e-10 target meaningful across the whole t range.
        let h = raw.scale(c(0.4 / raw.op_norm().max(1e-9), 0.0));
        let p = matrix_exponential(&h, t).mul(&matrix_exponential(&h, -t));
        prop_assert!(p.max_abs_diff(&ComplexMatrix::identity(dim)) < 1e-10);
    }

    #[test]
    fn direct_sum_norm_is_the_exact_max(norms in proptest::collection::vec(0.0f64..1e6, 1..40)) {
        let out = direct_sum_norm(&norms, FamilyBound::Unknown);
        let max = norms.iter().copied().fold(0.0, f64::max);
        prop_assert_eq!(out.truncated_max, max);
    }

    #[test]
    fn union_cardinality_is_additive(sizes in proptest::collection::vec(0usize..7, 1..6)) {
        let spectra: Vec<Vec<Complex64>> = sizes
            .iter()
            .map(|&s| (0..s).map(|i| c(i as f64, 0.0)).collect())
            .collect();
        let union = point_spectrum_union(&spectra);
        prop_assert_eq!(union.len(), sizes.iter().sum::<usize>());
    }

    #[test]
    fn partial_sum_monotone_and_mu_descending(seed in 0u64..1 << 48) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let block = random_commuting_block(rng.gen_range(1usize..=4), &mut rng, 0.0);
        let inst = Instance::new(vec![block]).unwrap();
        let tol = Tolerances::default();
        let mut last = 0.0;
        let mut previous_mu: Vec<f64> = Vec::new();
        for k_max in [2u32, 8, 32] {
            let slice = operator_spectrum(&inst, k_max, &tol).unwrap();
            let series = singular_value_series(&slice, 2.0).unwrap();
            prop_assert!(series.partial_sum >= last);
            prop_assert!(series.mu.windows(2).all(|w| w[0] >= w[1]));
            // A smaller truncation's values all reappear in a larger one.
            for mu in &previous_mu {
                prop_assert!(series.mu.iter().any(|m| m == mu));
            }
            last = series.partial_sum;
            previous_mu = series.mu;
        }
    }
}

/// Harmonized set comparison: the formula and the characteristic oracle
/// enumerate k with opposite sign conventions, so each K-truncation is
/// checked against the other's (K+1)-truncation.
fn formula_char_distance(block: &Block, k_max: u32, tol: &Tolerances) -> f64 {
    let modes = simultaneous_eigenbasis(block, tol).unwrap();
    let set = |k: u32| -> Vec<Complex64> {
        block_eigenvalues(block, &modes, k, 1)
            .iter()
            .map(|r| r.lambda)
            .collect()
    };
    let formula = set(k_max);
    let formula_wide = set(k_max + 1);
    let char_set = characteristic_eigenvalues(block, k_max, tol).unwrap();
    let char_wide = characteristic_eigenvalues(block, k_max + 1, tol).unwrap();
    directed_distance(&formula, &char_wide).max(directed_distance(&char_set, &formula_wide))
}

#[test]
fn formula_agrees_with_characteristic_oracle_on_random_blocks() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let tol = Tolerances::default();
    for trial in 0..60 {
        let dim = rng.gen_range(1usize..=6);
        let k_max = rng.gen_range(1u32..=8);
        let block = random_commuting_block(dim, &mut rng, 0.0);
        let d = formula_char_distance(&block, k_max, &tol);
        assert!(d <= 1e-10, "trial {trial}: set distance {d}");
    }
}

#[test]
fn every_formula_eigenvalue_has_tiny_characteristic_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xfeed);
    let tol = Tolerances::default();
    for _ in 0..25 {
        let dim = rng.gen_range(1usize..=5);
        let block = random_commuting_block(dim, &mut rng, 0.0);
        let modes = simultaneous_eigenbasis(&block, &tol).unwrap();
        for record in block_eigenvalues(&block, &modes, 4, 1) {
            let r = characteristic_residual(&block, record.lambda);
            assert!(r <= 1e-8, "residual {r} at {}", record.lambda);
        }
    }
}

#[test]
fn structure_check_passes_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let tol = Tolerances::default();
    for _ in 0..10 {
        let mut from = 0.0;
        let blocks: Vec<Block> = (0..3)
            .map(|_| {
                let b = random_commuting_block(rng.gen_range(1usize..=4), &mut rng, from);
                from = b.interval().b() + rng.gen_range(0.1..1.0);
                b
            })
            .collect();
        let inst = Instance::new(blocks).unwrap();
        let slice = operator_spectrum(&inst, 5, &tol).unwrap();
        let report = verify_normal_spectrum_structure(&slice, 1e-9);
        assert!(report.pass, "violations: {:?}", report.violations);
        // Tagged record count: Σ dims · (2k+1).
        let expect: usize = inst.blocks().iter().map(|b| b.dim() * 11).sum();
        assert_eq!(slice.records.len(), expect);
    }
}

#[test]
fn gauge_shift_relabels_the_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let tol = Tolerances::default();
    for _ in 0..10 {
        let dim = rng.gen_range(1usize..=4);
        let block = random_commuting_block(dim, &mut rng, 0.0);
        let theta = rng.gen_range(-PI..PI);
        let shifted = Block::new(
            block.interval(),
            block.coeff().clone(),
            block
                .coupling()
                .scale(Complex64::from_polar(1.0, theta)),
        )
        .unwrap();
        let length = block.interval().length();

        let modes = simultaneous_eigenbasis(&block, &tol).unwrap();
        let modes_shifted = simultaneous_eigenbasis(&shifted, &tol).unwrap();
        let k_max = 6u32;
        // Interior of the original set, translated by θ/ℓ, must reappear in
        // the shifted spectrum.
        let translated: Vec<Complex64> = block_eigenvalues(&block, &modes, k_max - 1, 1)
            .iter()
            .map(|r| r.lambda + c(0.0, theta / length))
            .collect();
        let shifted_set: Vec<Complex64> =
            block_eigenvalues(&shifted, &modes_shifted, k_max, 1)
                .iter()
                .map(|r| r.lambda)
                .collect();
        let d = directed_distance(&translated, &shifted_set);
        assert!(d <= 1e-9, "gauge shift failed: {d}");
    }
}

#[test]
fn conjugated_blocks_have_identical_spectra() {
    let mut rng = ChaCha8Rng::seed_from_u64(4321);
    let tol = Tolerances::default();
    for _ in 0..10 {
        let dim = rng.gen_range(2usize..=5);
        let block = random_commuting_block(dim, &mut rng, 0.0);
        let q = random_unitary(dim, &mut rng);
        let conj = Block::new(
            block.interval(),
            q.adjoint().mul(block.coeff()).mul(&q),
            q.adjoint().mul(block.coupling()).mul(&q),
        )
        .unwrap();
        let set = |b: &Block| -> Vec<Complex64> {
            let modes = simultaneous_eigenbasis(b, &tol).unwrap();
            block_eigenvalues(b, &modes, 4, 1)
                .iter()
                .map(|r| r.lambda)
                .collect()
        };
        let a = set(&block);
        let b = set(&conj);
        let d = directed_distance(&a, &b).max(directed_distance(&b, &a));
        assert!(d <= 1e-9, "conjugation changed the spectrum by {d}");
    }
}

#[test]
fn joint_eigenbasis_invariants_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let tol = Tolerances::default();
    for _ in 0..20 {
        let dim = rng.gen_range(1usize..=6);
        let block = random_commuting_block(dim, &mut rng, 0.0);
        let modes = simultaneous_eigenbasis(&block, &tol).unwrap();
        assert_eq!(modes.len(), dim);

        for p in &modes {
            assert!((vec_norm(&p.vector) - 1.0).abs() < 1e-12);
            assert!((p.omega.norm() - 1.0).abs() < 1e-9);
            let av = block.coeff().mat_vec(&p.vector);
            let wv = block.coupling().mat_vec(&p.vector);
            let ra: Vec<Complex64> = av
                .iter()
                .zip(&p.vector)
                .map(|(x, y)| x - c(p.alpha, 0.0) * y)
                .collect();
            let rw: Vec<Complex64> = wv
                .iter()
                .zip(&p.vector)
                .map(|(x, y)| x - p.omega * y)
                .collect();
            assert!(vec_norm(&ra) <= 1e-9 * block.coeff().op_norm().max(1.0));
            assert!(vec_norm(&rw) <= 1e-9);
        }

        // Orthonormality and two-sided reconstruction.
        let mut a_rebuilt = ComplexMatrix::zeros(dim);
        let mut w_rebuilt = ComplexMatrix::zeros(dim);
        for (i, p) in modes.iter().enumerate() {
            for (j, q) in modes.iter().enumerate() {
                let g = vec_inner(&p.vector, &q.vector);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - c(expect, 0.0)).norm() < 1e-10);
            }
            let outer = |z: Complex64| {
                ComplexMatrix::from_fn(dim, |r, s| z * p.vector[r] * p.vector[s].conj())
            };
            a_rebuilt = a_rebuilt.add(&outer(c(p.alpha, 0.0)));
            w_rebuilt = w_rebuilt.add(&outer(p.omega));
        }
        assert!(a_rebuilt.max_abs_diff(block.coeff()) < 1e-9 * block.coeff().op_norm().max(1.0));
        assert!(w_rebuilt.max_abs_diff(block.coupling()) < 1e-9);

        // Modes are sorted by (alpha, arg omega).
        for pair in modes.windows(2) {
            let key = |m: &normext::extension::ModePair| (m.alpha, arg_branch(m.omega));
            let (a0, w0) = key(&pair[0]);
            let (a1, w1) = key(&pair[1]);
            assert!(a0 < a1 || (a0 == a1 && w0 <= w1));
        }
    }
}

#[test]
fn validation_verdicts_survive_unitary_conjugation() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let tol = Tolerances::default();
    for _ in 0..10 {
        let dim = rng.gen_range(2usize..=5);
        let good = random_commuting_block(dim, &mut rng, 0.0);
        // Grossly broken coupling: scaled away from unitarity.
        let bad = Block::new(
            good.interval(),
            good.coeff().clone(),
            good.coupling().scale(c(2.0, 0.0)),
        )
        .unwrap();
        let q = random_unitary(dim, &mut rng);
        for block in [&good, &bad] {
            let conj = Block::new(
                block.interval(),
                q.adjoint().mul(block.coeff()).mul(&q),
                q.adjoint().mul(block.coupling()).mul(&q),
            )
            .unwrap();
            assert_eq!(
                validate_block(block, &tol).is_valid(),
                validate_block(&conj, &tol).is_valid()
            );
        }
    }
}

#[test]
fn tail_bound_certified_on_random_blocks() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7a11);
    let tol = Tolerances::default();
    for _ in 0..12 {
        let block = random_commuting_block(rng.gen_range(1usize..=3), &mut rng, 0.0);
        let modes = simultaneous_eigenbasis(&block, &tol).unwrap();
        let length = block.interval().length();
        let k_max = rng.gen_range(4u32..=64);
        for &p in &[1.5, 2.0, 3.0] {
            for mode in &modes {
                let delta = arg_branch(mode.omega.conj());
                let bound = tail_bound(mode.alpha, length, k_max, p).unwrap();
                let mut brute = CompensatedSum::default();
                for k in (k_max as i64 + 1)..=(10 * k_max as i64) {
                    for sign in [1.0f64, -1.0] {
                        let im = (delta + 2.0 * sign * k as f64 * PI) / length;
                        brute.add((mode.alpha * mode.alpha + im * im).powf(-p / 2.0));
                    }
                }
                assert!(
                    brute.total() <= bound,
                    "brute {} > bound {bound} at p={p}, k_max={k_max}",
                    brute.total()
                );
            }
        }
    }
}

#[test]
fn resolvent_distance_matches_brute_force_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xd157);
    let tol = Tolerances::default();
    for _ in 0..10 {
        let block = random_commuting_block(rng.gen_range(1usize..=4), &mut rng, 0.0);
        let inst = Instance::new(vec![block]).unwrap();
        let probe = c(rng.gen_range(-3.0..0.9), rng.gen_range(-20.0..20.0));
        let report =
            normext::schatten::discrete_spectrum_check(&inst, None, probe, &tol).unwrap();
        let closed = 1.0 / report.resolvent_norms[0];

        let slice = operator_spectrum(&inst, 2000, &tol).unwrap();
        let brute = slice
            .records
            .iter()
            .map(|r| (r.lambda - probe).norm())
            .fold(f64::INFINITY, f64::min);
        assert!(
            (closed - brute).abs() <= 1e-10 * brute.max(1.0),
            "closed {closed} vs brute {brute}"
        );
    }
}

#[test]
fn double_series_for_linear_growth_converges_above_two() {
    // One mode per block with λ₁(Aₙ) = n and unit intervals: the membership
    // verdict must certify convergence for p > 2, and the brute-force double
    // series must stabilize consistently with the reported bounds.
    let p = 3.0;
    let term = |n: u64, k: i64| -> f64 {
        let im = 2.0 * k as f64 * PI;
        ((n * n) as f64 + im * im).powf(-p / 2.0)
    };
    let partial = |n_max: u64, k_max: i64| -> f64 {
        let mut acc = CompensatedSum::default();
        for n in (1..=n_max).rev() {
            for k in -k_max..=k_max {
                acc.add(term(n, k));
            }
        }
        acc.total()
    };
    let t_small = partial(500, 500);
    let t_big = partial(1000, 1000);
    assert!(t_big >= t_small);
    // Increment shrinks: the series is settling.
    assert!(t_big - t_small < 1e-3 * t_small);

    // k-tails per n plus the n-tail of Σ n^{1−p}·const keep the total finite.
    let mut k_tails = CompensatedSum::default();
    for n in 1..=1000u64 {
        k_tails.add(tail_bound(n as f64, 1.0, 1000, p).unwrap());
    }
    let n_tail = 1000.0f64.powf(1.0 - p / 2.0) / (p / 2.0 - 1.0); // ∫_{1000}^∞ x^{−p/2} dx
    let total_bound = t_big + k_tails.total() + n_tail * (1.0 + 2.0 / (p - 1.0));
    assert!(total_bound.is_finite());

    // The model route agrees: Σ dims·λ₁^{−p/2} converges for p = 3.
    let inst = Instance::new(vec![Block::new(
        Interval::new(0.0, 1.0).unwrap(),
        ComplexMatrix::identity(1),
        ComplexMatrix::identity(1),
    )
    .unwrap()])
    .unwrap();
    let model = normext::schatten::GrowthModel {
        lambda1: normext::schatten::Sequence::Power { coeff: 1.0, exponent: 1.0 },
        dims: normext::schatten::Sequence::Constant { value: 1.0 },
        scalar_blocks: false,
        min_length: Some(1.0),
    };
    let verdict =
        schatten_membership(&inst, p, 64, Some(&model), &Tolerances::default()).unwrap();
    assert_eq!(verdict.verdict, Verdict::Converges);
}

#[test]
fn characteristic_residual_small_at_fd_eigenvalues() {
    // FD eigenvalues at N = 2000 are O(h²) approximations; the scaled
    // characteristic residual at each of them stays far below 1e-2.
    for omega in [c(1.0, 0.0), c(-1.0, 0.0)] {
        let block = Block::new(
            Interval::new(0.0, 1.0).unwrap(),
            ComplexMatrix::identity(1),
            ComplexMatrix::diagonal(&[omega]),
        )
        .unwrap();
        let fd = normext::oracle::fd_eigenvalues(&block, 2000, 3).unwrap();
        for lambda in fd {
            let r = characteristic_residual(&block, lambda);
            assert!(r <= 1e-2, "residual {r} at FD eigenvalue {lambda}");
        }
    }
}

#[test]
fn boundary_cancellation_tracks_commutation_defect_at_extremes() {
    let a = ComplexMatrix::diagonal(&[c(1.0, 0.0), c(2.0, 0.0)]);
    let tol = Tolerances::default();
    let rotation = |theta: f64| {
        ComplexMatrix::from_rows(vec![
            vec![c(theta.cos(), 0.0), c(-theta.sin(), 0.0)],
            vec![c(theta.sin(), 0.0), c(theta.cos(), 0.0)],
        ])
        .unwrap()
    };
    let u0 = [c(1.0, 0.0), c(0.0, 0.0)];
    let eval = |theta: f64| -> (f64, f64) {
        let b = Block::new(Interval::new(0.0, 1.0).unwrap(), a.clone(), rotation(theta)).unwrap();
        let report = validate_block(&b, &tol);
        (boundary_cancellation(&b, &u0), report.commutation_defect)
    };
    let (cancel0, defect0) = eval(0.0);
    assert!(cancel0 <= 1e-10 && defect0 <= 1e-10);
    let (cancel1, defect1) = eval(PI / 4.0);
    assert!(cancel1 >= 0.1 && defect1 >= 0.1);
    // Monotone correlation along the sweep: both grow away from zero.
    let mut last_cancel = -1.0;
    for i in 0..=8 {
        let (cancel, _) = eval(PI / 4.0 * i as f64 / 8.0);
        assert!(cancel >= last_cancel - 1e-12);
        last_cancel = cancel;
    }
}
