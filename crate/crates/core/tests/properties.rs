//! Property sweeps over seeded random instances.

use proptest::prelude::*;
use qpmkit::dilation::{naimark_dilate, stinespring_expectation};
use qpmkit::expectation::{expect, schwarz_gap};
use qpmkit::hulls::{apply_choi, choi_of_kraus, cstar_combine, hypoconvex_sample, kraus_of_choi, replay};
use qpmkit::matkit::{
    abs, c64, diag, eigh, identity, invariant_hull, matrix_power, max_abs, min_eigenvalue, operator_norm, polar_decompose,
    psd_sqrt, rank, svd, trace, CMatrix, Frame, DEFAULT_TOL,
};
use qpmkit::noise::{noise_value, random_noise, NoiseOptions};
use qpmkit::random::{ginibre, haar_unitary, labels, random_hermitian, random_povm, random_qrv, rng_from};
use qpmkit::variance::{left_var, right_var, var};
use qpmkit::QuantumRandomVariable;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn is_unitary_columns(u: &CMatrix, tol: f64) -> bool {
    max_abs(&(u.adjoint() * u - identity(u.ncols()))) <= tol
}

/// Largest singular value by power iteration on `a* a`.
fn power_norm(a: &CMatrix) -> f64 {
    let g = a.adjoint() * a;
    let mut v = CMatrix::from_fn(g.nrows(), 1, |i, _| c64(1.0 + i as f64, 0.5 * i as f64));
    let mut lambda = 0.0;
    for _ in 0..2000 {
        let w = &g * &v;
        let n = w.norm();
        if n == 0.0 {
            return 0.0;
        }
        lambda = n;
        v = w / c64(n, 0.0);
    }
    lambda.sqrt()
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn svd_reconstructs_rank_deficient(seed in any::<u64>(), m in 1usize..8, n in 1usize..8, r in 0usize..8) {
        let mut rng = rng_from(seed);
        let r = r.min(m.min(n));
        let a = ginibre(&mut rng, m, r) * ginibre(&mut rng, r, n);
        let s = svd(&a);
        let k = m.min(n);
        prop_assert_eq!(s.singular_values.len(), k);
        prop_assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(max_abs(&(&s.u * diag(&s.singular_values) * s.v.adjoint() - &a)) <= 1e-12 * (1.0 + max_abs(&a)));
        prop_assert!(is_unitary_columns(&s.u, 1e-12));
        prop_assert!(is_unitary_columns(&s.v, 1e-12));
        prop_assert_eq!(rank(&a, 1e-10), r);
    }

    #[test]
    fn polar_factors_reconstruct(seed in any::<u64>(), n in 1usize..6, r in 0usize..6) {
        let mut rng = rng_from(seed);
        let r = r.min(n);
        let a = ginibre(&mut rng, n, r) * ginibre(&mut rng, r, n);
        let p = polar_decompose(&a).unwrap();
        prop_assert!(is_unitary_columns(&p.unitary, 1e-12));
        prop_assert!(min_eigenvalue(&p.positive) >= -1e-12);
        prop_assert!(max_abs(&(&p.unitary * &p.positive - &a)) <= 1e-11 * (1.0 + max_abs(&a)));
        prop_assert!(max_abs(&(&p.positive - abs(&a))) <= 1e-11 * (1.0 + max_abs(&a)));
    }

    #[test]
    fn sqrt_squares_back(seed in any::<u64>(), n in 1usize..6, r in 0usize..6) {
        let mut rng = rng_from(seed);
        let g = ginibre(&mut rng, n, r.min(n));
        let a = &g * g.adjoint();
        let s = psd_sqrt(&a, DEFAULT_TOL).unwrap();
        prop_assert!(min_eigenvalue(&s) >= -1e-12);
        prop_assert!(max_abs(&(&s * &s - &a)) <= 1e-10 * (1.0 + max_abs(&a)));
    }

    #[test]
    fn eigh_reconstructs(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = rng_from(seed);
        let a = random_hermitian(&mut rng, n);
        let e = eigh(&a);
        prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(is_unitary_columns(&e.vectors, 1e-12));
        prop_assert!(max_abs(&(e.reconstruct_with(|v| v) - &a)) <= 1e-12 * (1.0 + max_abs(&a)));
    }

    #[test]
    fn operator_norm_matches_power_iteration(seed in any::<u64>(), m in 1usize..6, n in 1usize..6) {
        let mut rng = rng_from(seed);
        let a = ginibre(&mut rng, m, n);
        let u = haar_unitary(&mut rng, m);
        prop_assert!((operator_norm(&a) - power_norm(&a)).abs() <= 1e-6 * (1.0 + power_norm(&a)));
        prop_assert!((operator_norm(&(&u * &a)) - operator_norm(&a)).abs() <= 1e-12 * (1.0 + operator_norm(&a)));
    }

    #[test]
    fn tracial_absolute_value_bound(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = rng_from(seed);
        let y = ginibre(&mut rng, n, n);
        prop_assert!(trace(&y).norm() <= trace(&abs(&y)).re + 1e-10);
    }

    #[test]
    fn invariant_hull_recovers_reducing_block(seed in any::<u64>(), n in 1usize..7, s in 1usize..7, k in 1usize..4) {
        let mut rng = rng_from(seed);
        let s = s.min(n);
        let k = k.min(s);
        // z = u (a ⊕ b) u*; a frame inside the first block generates exactly that block
        let u = haar_unitary(&mut rng, n);
        let a = ginibre(&mut rng, s, s);
        let b = ginibre(&mut rng, n - s, n - s);
        let mut block = CMatrix::zeros(n, n);
        block.view_mut((0, 0), (s, s)).copy_from(&a);
        block.view_mut((s, s), (n - s, n - s)).copy_from(&b);
        let z = &u * block * u.adjoint();
        let lead = u.columns(0, s).into_owned();
        let m = Frame::span(&(&lead * ginibre(&mut rng, s, k)), 1e-10);
        let h = invariant_hull(&z, &m, 1e-10).unwrap();
        prop_assert_eq!(h.dim(), s);
        prop_assert!(max_abs(&(h.projector() - &lead * lead.adjoint())) <= 1e-8);
        prop_assert!(is_unitary_columns(h.columns(), 1e-12));
    }

    #[test]
    fn choi_round_trip(seed in any::<u64>(), d in 1usize..4, terms in 1usize..4) {
        let mut rng = rng_from(seed);
        let ts: Vec<CMatrix> = (0..terms).map(|_| ginibre(&mut rng, d, d)).collect();
        let a = ginibre(&mut rng, d, d);
        let direct = ts.iter().fold(CMatrix::zeros(d, d), |acc, t| acc + t.adjoint() * &a * t);
        let c = choi_of_kraus(&ts, d);
        prop_assert!(max_abs(&(apply_choi(&c, &a, d) - &direct)) <= 1e-11 * (1.0 + max_abs(&direct)));
        let back = kraus_of_choi(&c, d, 1e-12).unwrap();
        let again = back.iter().fold(CMatrix::zeros(d, d), |acc, t| acc + t.adjoint() * &a * t);
        prop_assert!(max_abs(&(again - &direct)) <= 1e-10 * (1.0 + max_abs(&direct)));
    }

    #[test]
    fn combine_is_norm_bounded(seed in any::<u64>(), d in 1usize..4, m in 1usize..4) {
        let mut rng = rng_from(seed);
        let nu = random_povm(&mut rng, m, d);
        let ts: Vec<CMatrix> = nu.sqrt_effects().to_vec();
        let atoms: Vec<CMatrix> = (0..m).map(|_| ginibre(&mut rng, d, d)).collect();
        let b = cstar_combine(&ts, &atoms).unwrap();
        let bound = atoms.iter().map(operator_norm).fold(0.0, f64::max);
        prop_assert!(operator_norm(&b) <= bound * (1.0 + 1e-10));
    }

    #[test]
    fn hypoconvex_replay_is_exact(seed in any::<u64>(), d in 1usize..4, m in 1usize..4, moves in 1usize..8) {
        let mut rng = rng_from(seed);
        let elements: Vec<CMatrix> = (0..m).map(|_| random_hermitian(&mut rng, d)).collect();
        let s = hypoconvex_sample(&elements, moves, seed).unwrap();
        prop_assert_eq!(replay(&elements, &s.log).unwrap(), s.value);
    }
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn expectation_is_unital_positive_and_adjoint_preserving(seed in any::<u64>(), d in 1usize..4, n in 1usize..5) {
        let mut rng = rng_from(seed);
        let nu = random_povm(&mut rng, n, d);
        let space = labels(n);
        let one = QuantumRandomVariable::constant(space.clone(), &identity(d));
        prop_assert!(max_abs(&(expect(&nu, &one).unwrap() - identity(d))) <= 1e-12);
        let psi = random_qrv(&mut rng, &space, d, 1.0);
        let e = expect(&nu, &psi).unwrap();
        prop_assert!(max_abs(&(expect(&nu, &psi.adjoint()).unwrap() - e.adjoint())) <= 1e-12);
        let positive = psi.map(|v| v.adjoint() * v);
        prop_assert!(min_eigenvalue(&expect(&nu, &positive).unwrap()) >= -1e-12);
        let stinespring = stinespring_expectation(&nu).compress(&psi).unwrap();
        prop_assert!(max_abs(&(stinespring - &e)) <= 1e-12 * (1.0 + max_abs(&e)));
    }

    #[test]
    fn schwarz_gap_and_variances_are_psd(seed in any::<u64>(), d in 1usize..4, n in 1usize..5) {
        let mut rng = rng_from(seed);
        let nu = random_povm(&mut rng, n, d);
        let psi = random_qrv(&mut rng, &labels(n), d, 1.0);
        let scale = 1.0 + psi.ess_sup_norm(&nu).powi(2);
        prop_assert!(min_eigenvalue(&schwarz_gap(&nu, &psi).unwrap()) >= -1e-12 * scale);
        let l = left_var(&nu, &psi).unwrap();
        let r = right_var(&nu, &psi).unwrap();
        prop_assert!(min_eigenvalue(&l) >= -1e-12 * scale);
        prop_assert!(min_eigenvalue(&r) >= -1e-12 * scale);
        prop_assert!(max_abs(&(left_var(&nu, &psi.adjoint()).unwrap() - &r)) <= 1e-12 * scale);
        prop_assert!(min_eigenvalue(&var(&nu, &psi).unwrap()) >= -1e-12 * scale);
    }

    #[test]
    fn naimark_compresses_to_effects(seed in any::<u64>(), d in 1usize..4, n in 1usize..5) {
        let mut rng = rng_from(seed);
        let nu = random_povm(&mut rng, n, d);
        let dil = naimark_dilate(&nu);
        prop_assert!(is_unitary_columns(&dil.isometry, 1e-12));
        for (b, &j) in dil.support.iter().enumerate() {
            let p = &dil.projections[b];
            prop_assert!(max_abs(&(p * p - p)) <= 1e-14);
            prop_assert!(max_abs(&(dil.compressed_projection(b) - nu.effect(j))) <= 1e-12);
        }
    }

    #[test]
    fn moments_of_scalar_point_mass_are_powers(seed in any::<u64>(), d in 1usize..4, k in 1usize..5) {
        let mut rng = rng_from(seed);
        let z = ginibre(&mut rng, d, d);
        let nu = qpmkit::Povm::point_mass("x", d);
        let psi = QuantumRandomVariable::constant(nu.space().clone(), &z);
        let e = expect(&nu, &psi.pow(k)).unwrap();
        prop_assert!(max_abs(&(e - matrix_power(&z, k))) <= 1e-10 * (1.0 + operator_norm(&z)).powi(k as i32));
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn noise_is_bounded_and_monotone_in_restarts(seed in any::<u64>(), d in 1usize..3, n in 1usize..4) {
        let mut rng = rng_from(seed);
        let nu = random_povm(&mut rng, n, d);
        let few = NoiseOptions { restarts: 1, max_iter: 60, step: 0.1, seed };
        let more = NoiseOptions { restarts: 3, ..few };
        let a = random_noise(&nu, &few).unwrap();
        let b = random_noise(&nu, &more).unwrap();
        prop_assert!(a.value >= 0.0 && b.value <= 1.0 + 1e-9);
        prop_assert!(b.value >= a.value);
        prop_assert!(b.argmax_psi.ess_sup_norm(&nu) <= 1.0 + 1e-9);
        prop_assert!((noise_value(&nu, &b.argmax_psi).unwrap() - b.value).abs() <= 1e-12);
    }
}
