//! Left, right and symmetric operator variance, variance-zero detection and
//! moment sequences.

use crate::error::Result;
use crate::expectation::{check_compatible, expect_values};
use crate::matkit::{self, c64, identity, matrix_power, min_eigenvalue, operator_norm, CMatrix};
use crate::qpm::{Povm, QuantumRandomVariable};

/// `E[ψ*ψ] − E[ψ]*E[ψ]` and `E[ψψ*] − E[ψ]E[ψ]*`, both hermitized.
pub(crate) fn variance_pair(nu: &Povm, values: &[CMatrix]) -> (CMatrix, CMatrix) {
    let m = expect_values(nu, values);
    let left_second: Vec<CMatrix> = values.iter().map(|v| v.adjoint() * v).collect();
    let right_second: Vec<CMatrix> = values.iter().map(|v| v * v.adjoint()).collect();
    let m_star = m.adjoint();
    let left = expect_values(nu, &left_second) - &m_star * &m;
    let right = expect_values(nu, &right_second) - &m * &m_star;
    (matkit::hermitian_part(&left), matkit::hermitian_part(&right))
}

pub(crate) fn symmetric(left: &CMatrix, right: &CMatrix) -> CMatrix {
    (left + right) * c64(0.5, 0.0)
}

pub fn left_var(nu: &Povm, psi: &QuantumRandomVariable) -> Result<CMatrix> {
    check_compatible(nu, psi)?;
    Ok(variance_pair(nu, psi.values()).0)
}

pub fn right_var(nu: &Povm, psi: &QuantumRandomVariable) -> Result<CMatrix> {
    check_compatible(nu, psi)?;
    Ok(variance_pair(nu, psi.values()).1)
}

/// Symmetric variance `(LVar + RVar) / 2`.
pub fn var(nu: &Povm, psi: &QuantumRandomVariable) -> Result<CMatrix> {
    check_compatible(nu, psi)?;
    let (l, r) = variance_pair(nu, psi.values());
    Ok(symmetric(&l, &r))
}

/// All three variances with their minimum eigenvalues.
#[derive(Debug, Clone)]
pub struct VarianceReport {
    pub left: CMatrix,
    pub right: CMatrix,
    pub symmetric: CMatrix,
    /// Minimum eigenvalues of left, right and symmetric variance.
    pub min_eigs: [f64; 3],
}

pub fn variance_report(nu: &Povm, psi: &QuantumRandomVariable) -> Result<VarianceReport> {
    check_compatible(nu, psi)?;
    let (left, right) = variance_pair(nu, psi.values());
    let symmetric = symmetric(&left, &right);
    let min_eigs = [min_eigenvalue(&left), min_eigenvalue(&right), min_eigenvalue(&symmetric)];
    Ok(VarianceReport { left, right, symmetric, min_eigs })
}

/// `λ = E_ν[ψ]` read in the chosen basis (`basis` is the identification `H ≅ C^d`).
#[derive(Debug, Clone)]
pub struct SpectralWitness {
    pub lambda: CMatrix,
    pub basis: CMatrix,
}

#[derive(Debug, Clone)]
pub struct VarianceZero {
    pub flag: bool,
    pub left_gap: f64,
    pub right_gap: f64,
    pub tol: f64,
    pub witness: Option<SpectralWitness>,
}

/// Default variance-zero tolerance `1e-8 · (1 + ||ψ||²)`.
pub fn default_zero_tol(nu: &Povm, psi: &QuantumRandomVariable) -> f64 {
    let n = psi.ess_sup_norm(nu);
    1e-8 * (1.0 + n * n)
}

/// Decides `Var_ν(ψ) = 0` through the two multiplicative-domain equalities
/// `E[ψ*ψ] = E[ψ]*E[ψ]` and `E[ψψ*] = E[ψ]E[ψ]*`.
pub fn is_variance_zero(nu: &Povm, psi: &QuantumRandomVariable, tol: Option<f64>) -> Result<VarianceZero> {
    check_compatible(nu, psi)?;
    let tol = tol.unwrap_or_else(|| default_zero_tol(nu, psi));
    let (left, right) = variance_pair(nu, psi.values());
    let left_gap = operator_norm(&left);
    let right_gap = operator_norm(&right);
    let flag = left_gap <= tol && right_gap <= tol;
    let witness = flag.then(|| SpectralWitness { lambda: expect_values(nu, psi.values()), basis: identity(nu.dim()) });
    Ok(VarianceZero { flag, left_gap, right_gap, tol, witness })
}

/// Moments `g_k = E_ν[ψ^k]` for `k = 0..=K`.
#[derive(Debug, Clone)]
pub struct MomentSequence {
    pub values: Vec<CMatrix>,
}

impl MomentSequence {
    pub fn max_k(&self) -> usize {
        self.values.len().saturating_sub(1)
    }
}

/// Default moment horizon `2 d²`.
pub fn default_max_k(d: usize) -> usize {
    2 * d * d
}

pub fn moment_sequence(nu: &Povm, psi: &QuantumRandomVariable, max_k: usize) -> Result<MomentSequence> {
    check_compatible(nu, psi)?;
    let d = nu.dim();
    let mut values = Vec::with_capacity(max_k + 1);
    values.push(identity(d));
    let mut powers: Vec<CMatrix> = psi.values().iter().map(|_| identity(d)).collect();
    for _ in 1..=max_k {
        for (p, v) in powers.iter_mut().zip(psi.values()) {
            *p = &*p * v;
        }
        values.push(expect_values(nu, &powers));
    }
    Ok(MomentSequence { values })
}

/// Worst relative deviation `||g_k − g_1^k|| / (1 + ||g_1||^k)` over `k`.
pub fn multiplicativity_defect(g: &MomentSequence) -> f64 {
    if g.values.len() < 2 {
        return 0.0;
    }
    let g1 = &g.values[1];
    let n1 = operator_norm(g1);
    (2..g.values.len())
        .map(|k| operator_norm(&(&g.values[k] - matrix_power(g1, k))) / (1.0 + n1.powi(k as i32)))
        .fold(0.0, f64::max)
}

/// True iff `||g_k − g_1^k|| ≤ tol (1 + ||g_1||^k)` for every `k ≤ K`.
pub fn moments_multiplicative(g: &MomentSequence, tol: f64) -> bool {
    multiplicativity_defect(g) <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkit::{diag, from_real_rows, max_abs, DEFAULT_TOL};
    use crate::qpm::OutcomeSpace;
    use crate::random::{random_povm, random_qrv, rng_from};

    fn two() -> OutcomeSpace {
        OutcomeSpace::from_strs(&["a", "b"]).unwrap()
    }

    fn fair_coin() -> (Povm, QuantumRandomVariable) {
        let nu = Povm::classical(two(), &[0.5, 0.5], 1, DEFAULT_TOL).unwrap();
        let psi = QuantumRandomVariable::scalar(two(), &[c64(1.0, 0.0), c64(-1.0, 0.0)], 1).unwrap();
        (nu, psi)
    }

    fn commuting_projective(a: f64, b: f64, c: f64, c2: f64) -> (Povm, QuantumRandomVariable) {
        let nu = Povm::new(two(), vec![diag(&[1.0, 0.0]), diag(&[0.0, 1.0])], DEFAULT_TOL).unwrap();
        let psi = QuantumRandomVariable::new(two(), 2, vec![diag(&[a, c]), diag(&[c2, b])]).unwrap();
        (nu, psi)
    }

    #[test]
    fn fair_coin_variances() {
        let (nu, psi) = fair_coin();
        let r = variance_report(&nu, &psi).unwrap();
        for m in [&r.left, &r.right, &r.symmetric] {
            assert!((m[(0, 0)].re - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn point_mass_has_zero_variance() {
        let nu = Povm::point_mass("x0", 2);
        let psi = QuantumRandomVariable::constant(nu.space().clone(), &from_real_rows(&[&[1.0, 2.0], &[0.0, -1.0]]));
        assert!(operator_norm(&var(&nu, &psi).unwrap()) < 1e-15);
    }

    #[test]
    fn nilpotent_example() {
        let nu = Povm::new(two(), vec![diag(&[1.0, 0.0]), diag(&[0.0, 1.0])], DEFAULT_TOL).unwrap();
        let psi = QuantumRandomVariable::new(two(), 2, vec![from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]), CMatrix::zeros(2, 2)])
            .unwrap();
        let r = variance_report(&nu, &psi).unwrap();
        assert_eq!(r.left, CMatrix::zeros(2, 2));
        assert_eq!(r.right, diag(&[1.0, 0.0]));
        assert_eq!(r.symmetric, diag(&[0.5, 0.0]));
    }

    #[test]
    fn nilpotent_moments_are_multiplicative_but_variance_is_not_zero() {
        // g_k = 0 for k >= 1, yet the right variance is diag(1, 0)
        let nu = Povm::new(two(), vec![diag(&[1.0, 0.0]), diag(&[0.0, 1.0])], DEFAULT_TOL).unwrap();
        let psi = QuantumRandomVariable::new(two(), 2, vec![from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]), CMatrix::zeros(2, 2)])
            .unwrap();
        let g = moment_sequence(&nu, &psi, 8).unwrap();
        assert!(moments_multiplicative(&g, 1e-12));
        assert!(!is_variance_zero(&nu, &psi, None).unwrap().flag);
    }

    #[test]
    fn variance_zero_examples() {
        let (nu, psi) = commuting_projective(2.0, -3.0, 7.0, 5.0);
        let vz = is_variance_zero(&nu, &psi, None).unwrap();
        assert!(vz.flag);
        assert_eq!(vz.witness.unwrap().lambda, diag(&[2.0, -3.0]));

        let (nu, psi) = fair_coin();
        assert!(!is_variance_zero(&nu, &psi, None).unwrap().flag);

        // constant ψ_z with E[ψ_z] = z: z commuting with both effects
        let nu = Povm::new(two(), vec![diag(&[0.3, 0.6]), diag(&[0.7, 0.4])], DEFAULT_TOL).unwrap();
        let psi = QuantumRandomVariable::constant(two(), &diag(&[4.0, -1.0]));
        assert!(max_abs(&(crate::expectation::expect(&nu, &psi).unwrap() - diag(&[4.0, -1.0]))) < 1e-15);
        assert!(is_variance_zero(&nu, &psi, None).unwrap().flag);
    }

    #[test]
    fn moment_examples() {
        let mut rng = rng_from(2);
        let nu = random_povm(&mut rng, 3, 2);
        let one = QuantumRandomVariable::constant(nu.space().clone(), &identity(2));
        let g = moment_sequence(&nu, &one, 5).unwrap();
        assert!(g.values.iter().all(|m| max_abs(&(m - identity(2))) < 1e-12));

        let pm = Povm::point_mass("x0", 2);
        let z = from_real_rows(&[&[1.0, 1.0], &[0.0, 2.0]]);
        let psi = QuantumRandomVariable::constant(pm.space().clone(), &z);
        let g = moment_sequence(&pm, &psi, 4).unwrap();
        for (k, gk) in g.values.iter().enumerate() {
            assert_eq!(gk, &matrix_power(&z, k));
        }
        assert!(moments_multiplicative(&g, 1e-12));

        let (nu, psi) = fair_coin();
        let g = moment_sequence(&nu, &psi, 5).unwrap();
        let expected = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        for (gk, e) in g.values.iter().zip(expected) {
            assert!((gk[(0, 0)].re - e).abs() < 1e-15);
        }
        assert!(!moments_multiplicative(&g, 1e-8));

        let (nu, psi) = commuting_projective(0.5, -1.5, 3.0, 2.0);
        let g = moment_sequence(&nu, &psi, 8).unwrap();
        assert!(moments_multiplicative(&g, 1e-12));
    }

    #[test]
    fn hermitian_values_give_equal_sided_variances() {
        let mut rng = rng_from(8);
        for _ in 0..20 {
            let nu = random_povm(&mut rng, 3, 3);
            let psi = random_qrv(&mut rng, nu.space(), 3, 1.0).map(matkit::hermitian_part);
            assert!(matkit::max_abs(&(left_var(&nu, &psi).unwrap() - right_var(&nu, &psi).unwrap())) < 1e-12);
        }
    }

    #[test]
    fn scalar_reduction_matches_classical_variance() {
        let space = OutcomeSpace::from_strs(&["a", "b", "c"]).unwrap();
        let p = [0.2, 0.5, 0.3];
        let vals = [c64(1.0, 2.0), c64(-0.5, 0.0), c64(0.0, -1.0)];
        let nu = Povm::classical(space.clone(), &p, 1, DEFAULT_TOL).unwrap();
        let psi = QuantumRandomVariable::scalar(space, &vals, 1).unwrap();
        let mean: num_complex::Complex64 = p.iter().zip(&vals).map(|(p, v)| v * p).sum();
        let classical: f64 = p.iter().zip(&vals).map(|(p, v)| p * (v - mean).norm_sqr()).sum();
        let r = variance_report(&nu, &psi).unwrap();
        for m in [&r.left, &r.right, &r.symmetric] {
            assert!((m[(0, 0)].re - classical).abs() < 1e-14);
        }
    }

    #[test]
    fn variance_zero_implies_multiplicative_moments() {
        let (nu, psi) = commuting_projective(1.5, -0.5, 2.0, 4.0);
        assert!(is_variance_zero(&nu, &psi, None).unwrap().flag);
        for k in [0, 1, 3, 8] {
            assert!(moments_multiplicative(&moment_sequence(&nu, &psi, k).unwrap(), 1e-12));
        }
    }
}
