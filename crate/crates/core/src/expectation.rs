//! Quantum expectation `E_ν[ψ] = Σ_j h_j^{1/2} ψ(x_j) h_j^{1/2}`.
//!
//! The symmetric pinching form is used directly; it agrees with the
//! Radon–Nikodým formulation on finite spaces and never divides by small
//! traces. [`expect_density_check`] evaluates the Radon–Nikodým side
//! independently so the two can be compared.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matkit::{self, c64, min_eigenvalue, CMatrix};
use crate::qpm::{radon_nikodym, DensityOperator, OutcomeSpace, Povm, QuantumRandomVariable};
use crate::random::{derive_seed, ginibre, rng_from};

const CP_STREAM: u64 = 0xC0_5EED;

pub(crate) fn check_compatible(nu: &Povm, psi: &QuantumRandomVariable) -> Result<()> {
    if nu.space() != psi.space() {
        return Err(Error::SpaceMismatch);
    }
    if nu.dim() != psi.dim() {
        return Err(Error::DimensionMismatch { expected: nu.dim(), found: psi.dim() });
    }
    Ok(())
}

/// Pinching sum without compatibility checks.
pub(crate) fn expect_values(nu: &Povm, values: &[CMatrix]) -> CMatrix {
    let d = nu.dim();
    let mut out = CMatrix::zeros(d, d);
    for (s, v) in nu.sqrt_effects().iter().zip(values) {
        out += s * v * s;
    }
    out
}

/// Quantum expectation of `psi` under `nu`.
pub fn expect(nu: &Povm, psi: &QuantumRandomVariable) -> Result<CMatrix> {
    check_compatible(nu, psi)?;
    Ok(expect_values(nu, psi.values()))
}

/// Both sides of `tr(ρ E_ν[ψ]) = Σ_j μ_j tr(ρ D_j^{1/2} ψ(x_j) D_j^{1/2})`,
/// with `D = dν/dμ`.
#[derive(Debug, Clone, Copy)]
pub struct DensityCheck {
    pub lhs: Complex64,
    pub rhs: Complex64,
}

impl DensityCheck {
    pub fn discrepancy(&self) -> f64 {
        (self.lhs - self.rhs).norm()
    }
}

pub fn expect_density_check(nu: &Povm, psi: &QuantumRandomVariable, rho: &DensityOperator) -> Result<DensityCheck> {
    check_compatible(nu, psi)?;
    if rho.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: nu.dim(), found: rho.dim() });
    }
    let lhs = matkit::trace(&(rho.matrix() * expect_values(nu, psi.values())));
    let derivative = radon_nikodym(nu);
    let mut rhs = c64(0.0, 0.0);
    for j in nu.support() {
        let root = matkit::psd_sqrt(derivative.value(j), matkit::DEFAULT_TOL)?;
        let integrand = matkit::trace(&(rho.matrix() * &root * psi.value(j) * &root));
        rhs += integrand * nu.weight(j);
    }
    Ok(DensityCheck { lhs, rhs })
}

/// Expectation value plus optional per-state trace identities.
#[derive(Debug, Clone)]
pub struct ExpectationReport {
    pub value: CMatrix,
    pub per_state_checks: Vec<DensityCheck>,
}

pub fn expectation_report(nu: &Povm, psi: &QuantumRandomVariable, states: &[DensityOperator]) -> Result<ExpectationReport> {
    let value = expect(nu, psi)?;
    let per_state_checks = states.iter().map(|rho| expect_density_check(nu, psi, rho)).collect::<Result<_>>()?;
    Ok(ExpectationReport { value, per_state_checks })
}

/// `E_ν[ψ*ψ] − E_ν[ψ]* E_ν[ψ]`, positive by the Schwarz inequality.
pub fn schwarz_gap(nu: &Povm, psi: &QuantumRandomVariable) -> Result<CMatrix> {
    check_compatible(nu, psi)?;
    let m = expect_values(nu, psi.values());
    let second: Vec<CMatrix> = psi.values().iter().map(|v| v.adjoint() * v).collect();
    Ok(matkit::hermitian_part(&(expect_values(nu, &second) - m.adjoint() * &m)))
}

/// `d × d` block `(i, k)` of an `n·d × n·d` matrix.
pub(crate) fn block(m: &CMatrix, d: usize, i: usize, k: usize) -> CMatrix {
    m.view((i * d, k * d), (d, d)).into_owned()
}

/// Applies `map` entrywise to an `n × n` matrix of random variables given
/// pointwise as `n·d × n·d` matrices, and returns the assembled result.
pub(crate) fn amplify<F>(space: &OutcomeSpace, d: usize, n: usize, pointwise: &[CMatrix], map: F) -> Result<CMatrix>
where
    F: Fn(&QuantumRandomVariable) -> Result<CMatrix>,
{
    let mut out = CMatrix::zeros(n * d, n * d);
    for i in 0..n {
        for k in 0..n {
            let values = pointwise.iter().map(|m| block(m, d, i, k)).collect();
            let entry = QuantumRandomVariable::new(space.clone(), d, values)?;
            let image = map(&entry)?;
            out.view_mut((i * d, k * d), (d, d)).copy_from(&image);
        }
    }
    Ok(out)
}

/// Random positive element `B*B` of `M_n(L^∞)`, given pointwise.
pub(crate) fn random_positive_block(seed: u64, outcomes: usize, dim: usize) -> Vec<CMatrix> {
    let mut rng = rng_from(seed);
    let scale = c64(1.0 / (dim as f64).sqrt(), 0.0);
    (0..outcomes)
        .map(|_| {
            let b = ginibre(&mut rng, dim, dim) * scale;
            b.adjoint() * b
        })
        .collect()
}

/// Outcome of [`cp_level_check`].
#[derive(Debug, Clone)]
pub struct CpReport {
    pub level: usize,
    pub trials: usize,
    pub worst_eigenvalue: f64,
    pub failures: usize,
    pub threshold: f64,
}

impl CpReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Threshold for the amplified positivity check.
pub const CP_TOL: f64 = 1e-8;

/// Checks positivity of `E_ν ⊗ id_n` on random positive block matrices.
///
/// Trial `t` draws from the sub-seed `(seed, t)`, so the report does not depend
/// on evaluation order.
pub fn cp_level_check(nu: &Povm, level: usize, trials: usize, seed: u64) -> Result<CpReport> {
    let level = level.max(1);
    let d = nu.dim();
    let mut worst = f64::INFINITY;
    let mut failures = 0;
    for t in 0..trials {
        let pointwise = random_positive_block(derive_seed(seed, CP_STREAM, t as u64), nu.len(), level * d);
        let image = amplify(nu.space(), d, level, &pointwise, |entry| expect(nu, entry))?;
        let min = min_eigenvalue(&image);
        if min < -CP_TOL {
            failures += 1;
        }
        worst = worst.min(min);
    }
    if trials == 0 {
        worst = 0.0;
    }
    Ok(CpReport { level, trials, worst_eigenvalue: worst, failures, threshold: -CP_TOL })
}
