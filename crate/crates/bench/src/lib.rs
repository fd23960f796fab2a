//! Seeded inputs for the kernel benchmarks.

use qpmkit::expectation::expect;
use qpmkit::hulls::essential_range;
use qpmkit::matkit::{CMatrix, DEFAULT_TOL};
use qpmkit::random::{labels, random_povm, random_qrv, rng_from};
use qpmkit::{Povm, QuantumRandomVariable};

/// Random measure and random variable with `n` outcomes in dimension `d`.
pub fn expectation_instance(d: usize, n: usize, seed: u64) -> (Povm, QuantumRandomVariable) {
    let mut rng = rng_from(seed);
    let nu = random_povm(&mut rng, n, d);
    let psi = random_qrv(&mut rng, &labels(n), d, 1.0);
    (nu, psi)
}

/// Target `E[ψ]` and the essential range of `ψ`, a feasible membership problem.
pub fn hull_instance(d: usize, n: usize, seed: u64) -> (CMatrix, Vec<CMatrix>) {
    let (nu, psi) = expectation_instance(d, n, seed);
    let target = expect(&nu, &psi).expect("shapes agree");
    let atoms = essential_range(&nu, &psi, DEFAULT_TOL).expect("shapes agree").elements;
    (target, atoms)
}
