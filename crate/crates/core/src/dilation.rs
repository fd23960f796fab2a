//! Naimark and Stinespring dilations, semi-invariance, and exact realization
//! of matricial-spectrum points on finite outcome spaces.
//!
//! # Semi-invariance by invariant hulls
//!
//! A subspace `M` is semi-invariant for `z` when `M = L1 ⊖ L0` for
//! `z`-invariant subspaces `L0 ⊆ L1`. [`is_semi_invariant`] takes `L1` to be
//! the invariant hull of `M` (the smallest invariant subspace containing it)
//! and `L0 = L1 ⊖ M`, and then tests whether `L0` is invariant. This decides
//! semi-invariance exactly: if some pair `(L0', L1')` witnesses it, then
//! `L1 ⊆ L1'`, and any `x ∈ L0` lies in `L1'` and is orthogonal to `M`, so
//! `x ∈ L0'`. Hence `z x ∈ L1 ∩ L0'`, which is orthogonal to `M`, so
//! `z x ∈ L0`. No bound on the number of powers of `z` is needed.

use crate::error::{Error, Result};
use crate::expectation::{check_compatible, expect_values};
use crate::hulls::kraus_of_choi;
use crate::matkit::{self, c64, identity, invariant_hull, matrix_power, operator_norm, CMatrix, Frame};
use crate::qpm::{OutcomeSpace, Povm, QuantumRandomVariable};

/// Kraus terms with operator norm at or below this are dropped.
pub const KRAUS_ZERO: f64 = 1e-12;

/// Tolerance on `Σ K*K = I` for certificates.
pub const KRAUS_NORMALIZATION_TOL: f64 = 1e-9;

/// Default relative tolerance for the semi-invariance decision.
pub const SEMI_INVARIANCE_TOL: f64 = 1e-8;

fn stacked_isometry(nu: &Povm, support: &[usize]) -> CMatrix {
    let d = nu.dim();
    let mut v = CMatrix::zeros(support.len() * d, d);
    for (b, &j) in support.iter().enumerate() {
        v.view_mut((b * d, 0), (d, d)).copy_from(nu.sqrt_effect(j));
    }
    v
}

/// Projective dilation: `V* P_j V = h_j` with `P_j` diagonal block projections.
#[derive(Debug, Clone)]
pub struct NaimarkDilation {
    pub big_dim: usize,
    /// Supported outcome indices, one block each.
    pub support: Vec<usize>,
    pub isometry: CMatrix,
    /// Projections aligned with `support`.
    pub projections: Vec<CMatrix>,
}

pub fn naimark_dilate(nu: &Povm) -> NaimarkDilation {
    let d = nu.dim();
    let support = nu.support();
    let big_dim = support.len() * d;
    let isometry = stacked_isometry(nu, &support);
    let projections = (0..support.len())
        .map(|b| {
            let mut p = CMatrix::zeros(big_dim, big_dim);
            for i in b * d..(b + 1) * d {
                p[(i, i)] = c64(1.0, 0.0);
            }
            p
        })
        .collect();
    NaimarkDilation { big_dim, support, isometry, projections }
}

impl NaimarkDilation {
    /// `V* P_b V` for support block `b`.
    pub fn compressed_projection(&self, b: usize) -> CMatrix {
        self.isometry.adjoint() * &self.projections[b] * &self.isometry
    }
}

/// Minimal Stinespring dilation `E_ν[ψ] = V* Δ(ψ) V` with
/// `Δ(ψ) = ⊕_{supported j} ψ(x_j)`.
#[derive(Debug, Clone)]
pub struct StinespringDilation {
    pub big_dim: usize,
    pub dim: usize,
    pub support: Vec<usize>,
    pub isometry: CMatrix,
    space: OutcomeSpace,
}

pub fn stinespring_expectation(nu: &Povm) -> StinespringDilation {
    let support = nu.support();
    StinespringDilation {
        big_dim: support.len() * nu.dim(),
        dim: nu.dim(),
        isometry: stacked_isometry(nu, &support),
        support,
        space: nu.space().clone(),
    }
}

impl StinespringDilation {
    /// Block-diagonal representation `Δ(ψ)`.
    pub fn block_map(&self, psi: &QuantumRandomVariable) -> Result<CMatrix> {
        if psi.space() != &self.space {
            return Err(Error::SpaceMismatch);
        }
        if psi.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: psi.dim() });
        }
        let d = self.dim;
        let mut out = CMatrix::zeros(self.big_dim, self.big_dim);
        for (b, &j) in self.support.iter().enumerate() {
            out.view_mut((b * d, b * d), (d, d)).copy_from(psi.value(j));
        }
        Ok(out)
    }

    /// `V* Δ(ψ) V`.
    pub fn compress(&self, psi: &QuantumRandomVariable) -> Result<CMatrix> {
        Ok(self.isometry.adjoint() * self.block_map(psi)? * &self.isometry)
    }

    /// Dimension of `span{Δ(ψ) V ξ}` over matrix-unit random variables.
    pub fn generated_rank(&self) -> usize {
        let d = self.dim;
        let n = self.support.len();
        let mut vectors = CMatrix::zeros(self.big_dim, n * d * d * d);
        let mut col = 0;
        for b in 0..n {
            let root = self.isometry.view((b * d, 0), (d, d));
            for a in 0..d {
                for c in 0..d {
                    // Δ(E_ac at outcome b) V e_k = e_a ⊗ root[c, k] in block b
                    for k in 0..d {
                        vectors[(b * d + a, col)] = root[(c, k)];
                        col += 1;
                    }
                }
            }
        }
        matkit::rank(&vectors, 1e-10)
    }

    pub fn is_minimal(&self) -> bool {
        self.generated_rank() == self.big_dim
    }
}

/// Result of [`is_semi_invariant`].
#[derive(Debug, Clone)]
pub struct SemiInvariance {
    pub flag: bool,
    pub l0: Frame,
    pub l1: Frame,
    /// `||(I − P_{L0}) z P_{L0}|| / ||z||`.
    pub defect: f64,
}

/// Decides whether `m` is semi-invariant for `z`.
///
/// `tol` is relative to `||z||` and also sets the rank cutoff of the hull.
pub fn is_semi_invariant(z: &CMatrix, m: &Frame, tol: f64) -> Result<SemiInvariance> {
    let l1 = invariant_hull(z, m, tol)?;
    let l0 = l1.complement_of(m);
    let znorm = operator_norm(z);
    let defect = if l0.dim() == 0 || znorm == 0.0 {
        0.0
    } else {
        let p0 = l0.columns();
        let image = z * p0;
        let outside = &image - p0 * (p0.adjoint() * &image);
        operator_norm(&outside) / znorm
    };
    Ok(SemiInvariance { flag: defect <= tol, l0, l1, defect })
}

/// Multiplicativity of all moments of `ψ`, decided as semi-invariance of
/// `range(V)` for `Δ(ψ)`.
pub fn moments_via_semiinvariance(nu: &Povm, psi: &QuantumRandomVariable, tol: f64) -> Result<SemiInvariance> {
    check_compatible(nu, psi)?;
    let dilation = stinespring_expectation(nu);
    let z = dilation.block_map(psi)?;
    let range = Frame::span(&dilation.isometry, 1e-12);
    is_semi_invariant(&z, &range, tol)
}

/// Ucp map `θ(f) = Σ_{x,k} K_{x,k}* f(x) K_{x,k}` in Kraus form.
#[derive(Debug, Clone)]
pub struct UcpCertificate {
    pub space: OutcomeSpace,
    pub dim: usize,
    /// Kraus operators per outcome, aligned with `space`.
    pub kraus: Vec<Vec<CMatrix>>,
}

impl UcpCertificate {
    pub fn new(space: OutcomeSpace, dim: usize, kraus: Vec<Vec<CMatrix>>) -> Result<Self> {
        if kraus.len() != space.len() {
            return Err(Error::DimensionMismatch { expected: space.len(), found: kraus.len() });
        }
        for k in kraus.iter().flatten() {
            if k.nrows() != dim || k.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: k.nrows().max(k.ncols()) });
            }
        }
        Ok(UcpCertificate { space, dim, kraus })
    }

    /// Builds the certificate from per-outcome Choi matrices
    /// (`C_x = Σ_ab E_ab ⊗ Φ_x(E_ab)`), eigenvalue cutoff `1e-10`.
    pub fn from_choi(space: OutcomeSpace, dim: usize, choi: &[CMatrix]) -> Result<Self> {
        let kraus = choi.iter().map(|c| kraus_of_choi(c, dim, 1e-10)).collect::<Result<Vec<_>>>()?;
        Self::new(space, dim, kraus)
    }

    /// Point evaluation at `x0`, conjugated by `u`.
    pub fn conjugated_evaluation(space: OutcomeSpace, x0: usize, u: CMatrix) -> Self {
        let dim = u.nrows();
        let kraus = (0..space.len()).map(|j| if j == x0 { vec![u.clone()] } else { vec![] }).collect();
        UcpCertificate { space, dim, kraus }
    }

    /// `||Σ K*K − I||`.
    pub fn normalization_deviation(&self) -> f64 {
        let mut s = CMatrix::zeros(self.dim, self.dim);
        for k in self.kraus.iter().flatten() {
            s += k.adjoint() * k;
        }
        operator_norm(&(s - identity(self.dim)))
    }

    pub fn apply(&self, f: &QuantumRandomVariable) -> Result<CMatrix> {
        if f.space() != &self.space {
            return Err(Error::SpaceMismatch);
        }
        if f.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: f.dim() });
        }
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (ks, v) in self.kraus.iter().zip(f.values()) {
            for k in ks {
                out += k.adjoint() * v * k;
            }
        }
        Ok(out)
    }
}

/// Exact finite-space realization `λ^k = E_ν̃[w̃* ψ̃^k w̃]`.
#[derive(Debug, Clone)]
pub struct Realization {
    /// Measure on the expanded space of nonzero Kraus terms.
    pub measure: Povm,
    /// Unitary polar factors of the Kraus terms.
    pub unitary: QuantumRandomVariable,
    /// `ψ` pulled back to the expanded space.
    pub psi: QuantumRandomVariable,
    pub lambda: CMatrix,
    /// `(outcome index in X, Kraus index)` for every expanded outcome.
    pub origin: Vec<(usize, usize)>,
    pub max_moment_error: f64,
    pub max_k: usize,
}

impl Realization {
    /// Effects `Σ_k K_{x,k}* K_{x,k}` collected back onto the original space.
    pub fn projected_effects(&self, original: &OutcomeSpace) -> Vec<CMatrix> {
        let d = self.lambda.nrows();
        let mut effects = vec![CMatrix::zeros(d, d); original.len()];
        for (i, &(x, _)) in self.origin.iter().enumerate() {
            effects[x] += self.measure.effect(i);
        }
        effects
    }

    /// `E_ν̃[w̃* ψ̃^k w̃]`.
    pub fn moment(&self, k: usize) -> CMatrix {
        let values: Vec<CMatrix> =
            self.psi.values().iter().zip(self.unitary.values()).map(|(p, w)| w.adjoint() * matrix_power(p, k) * w).collect();
        expect_values(&self.measure, &values)
    }
}

/// Builds `(ν̃, w̃, λ)` from a certificate that is multiplicative on powers of `ψ`.
pub fn realize_spectrum_point(
    psi: &QuantumRandomVariable,
    theta: &UcpCertificate,
    max_k: usize,
    tol: f64,
) -> Result<Realization> {
    if psi.space() != &theta.space {
        return Err(Error::SpaceMismatch);
    }
    if psi.dim() != theta.dim {
        return Err(Error::DimensionMismatch { expected: theta.dim, found: psi.dim() });
    }
    let deviation = theta.normalization_deviation();
    if deviation > KRAUS_NORMALIZATION_TOL {
        return Err(Error::KrausNotNormalized { deviation });
    }
    let lambda = theta.apply(psi)?;
    for k in 2..=max_k {
        let error = operator_norm(&(theta.apply(&psi.pow(k))? - matrix_power(&lambda, k)));
        if error > tol {
            return Err(Error::NotMultiplicativeOnRationalAlgebra { power: k, error });
        }
    }

    let mut labels = Vec::new();
    let mut effects = Vec::new();
    let mut unitaries = Vec::new();
    let mut values = Vec::new();
    let mut origin = Vec::new();
    for (x, ks) in theta.kraus.iter().enumerate() {
        for (k, kraus) in ks.iter().enumerate() {
            if operator_norm(kraus) <= KRAUS_ZERO {
                continue;
            }
            let polar = matkit::polar_decompose(kraus)?;
            labels.push(format!("{}#{}", theta.space.label(x), k));
            effects.push(matkit::hermitian_part(&(kraus.adjoint() * kraus)));
            unitaries.push(polar.unitary);
            values.push(psi.value(x).clone());
            origin.push((x, k));
        }
    }
    let space = OutcomeSpace::new(labels)?;
    let measure = Povm::new(space.clone(), effects, KRAUS_NORMALIZATION_TOL * 10.0)?;
    let unitary = QuantumRandomVariable::new(space.clone(), theta.dim, unitaries)?;
    let psi_tilde = QuantumRandomVariable::new(space, theta.dim, values)?;
    let mut realization = Realization { measure, unitary, psi: psi_tilde, lambda, origin, max_moment_error: 0.0, max_k };
    realization.max_moment_error =
        (0..=max_k).map(|k| operator_norm(&(matrix_power(&realization.lambda, k) - realization.moment(k)))).fold(0.0, f64::max);
    Ok(realization)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expectation::expect;
    use crate::hulls::choi_of_kraus;
    use crate::matkit::{diag, from_real_rows, max_abs, DEFAULT_TOL};
    use crate::random::{haar_unitary, random_povm, random_qrv, rng_from};
    use crate::variance::{moment_sequence, moments_multiplicative};

    fn shift3() -> CMatrix {
        from_real_rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0]])
    }

    fn two() -> OutcomeSpace {
        OutcomeSpace::from_strs(&["a", "b"]).unwrap()
    }

    #[test]
    fn naimark_scalar_coin() {
        let nu = Povm::classical(two(), &[0.5, 0.5], 1, DEFAULT_TOL).unwrap();
        let n = naimark_dilate(&nu);
        assert_eq!(n.big_dim, 2);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((n.isometry[(0, 0)].re - r).abs() < 1e-15 && (n.isometry[(1, 0)].re - r).abs() < 1e-15);
        assert!((n.compressed_projection(0)[(0, 0)].re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn naimark_projective_and_point_mass() {
        let nu = Povm::new(two(), vec![diag(&[1.0, 0.0]), diag(&[0.0, 1.0])], DEFAULT_TOL).unwrap();
        let n = naimark_dilate(&nu);
        for b in 0..2 {
            assert_eq!(n.compressed_projection(b), nu.effect(b).clone());
        }
        let pm = naimark_dilate(&Povm::point_mass("x", 3));
        assert_eq!(pm.big_dim, 3);
        assert_eq!(pm.isometry, identity(3));
    }

    #[test]
    fn naimark_invariants_on_random_povms() {
        let mut rng = rng_from(12);
        for _ in 0..50 {
            let nu = random_povm(&mut rng, 3, 2);
            let n = naimark_dilate(&nu);
            assert!(max_abs(&(n.isometry.adjoint() * &n.isometry - identity(2))) < 1e-10);
            let mut total = CMatrix::zeros(n.big_dim, n.big_dim);
            for (b, p) in n.projections.iter().enumerate() {
                total += p;
                for (c, q) in n.projections.iter().enumerate() {
                    let expected = if b == c { p.clone() } else { CMatrix::zeros(n.big_dim, n.big_dim) };
                    assert_eq!(p * q, expected);
                }
                assert!(max_abs(&(n.compressed_projection(b) - nu.effect(n.support[b]))) < 1e-10);
            }
            assert_eq!(total, identity(n.big_dim));
        }
    }

    #[test]
    fn stinespring_examples() {
        let pm = Povm::point_mass("x", 2);
        let s = stinespring_expectation(&pm);
        assert_eq!(s.isometry, identity(2));
        let z = from_real_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let psi = QuantumRandomVariable::constant(pm.space().clone(), &z);
        assert_eq!(s.block_map(&psi).unwrap(), z);

        let coin = Povm::classical(two(), &[0.5, 0.5], 1, DEFAULT_TOL).unwrap();
        let s = stinespring_expectation(&coin);
        assert_eq!(s.big_dim, 2);
        let psi = QuantumRandomVariable::scalar(two(), &[c64(3.0, 0.0), c64(-1.0, 0.0)], 1).unwrap();
        assert!((s.compress(&psi).unwrap()[(0, 0)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn stinespring_drops_zero_block() {
        let space = OutcomeSpace::from_strs(&["a", "b", "c"]).unwrap();
        let nu = Povm::new(space, vec![diag(&[0.5, 0.2]), CMatrix::zeros(2, 2), diag(&[0.5, 0.8])], DEFAULT_TOL).unwrap();
        let s = stinespring_expectation(&nu);
        assert_eq!(s.big_dim, 4);
        assert_eq!(s.support, vec![0, 2]);
        assert_eq!(s.generated_rank(), 4);
        assert!(s.is_minimal());
    }

    #[test]
    fn stinespring_reproduces_expectation() {
        let mut rng = rng_from(21);
        for _ in 0..50 {
            let nu = random_povm(&mut rng, 3, 3);
            let psi = random_qrv(&mut rng, nu.space(), 3, 1.0);
            let s = stinespring_expectation(&nu);
            assert!(operator_norm(&(s.compress(&psi).unwrap() - expect(&nu, &psi).unwrap())) < 1e-9);
            assert!(s.is_minimal());
        }
    }

    #[test]
    fn semi_invariance_examples() {
        let r = is_semi_invariant(&shift3(), &Frame::coordinate(3, &[1]), 1e-9).unwrap();
        assert!(r.flag);
        assert_eq!(r.l1.dim(), 2);
        assert_eq!(r.l0.dim(), 1);

        let m = Frame::coordinate(3, &[0, 2]);
        let r = is_semi_invariant(&shift3(), &m, 1e-9).unwrap();
        assert!(!r.flag);
        assert!((r.defect - 1.0).abs() < 1e-12);
        // Sarason compression check fails at k = 2: p z² p ≠ (p z p)²
        let p = m.projector();
        let z = shift3();
        let lhs = &p * &z * &z * &p;
        let pzp = &p * &z * &p;
        assert!(max_abs(&(lhs - &pzp * &pzp)) > 0.5);

        assert!(is_semi_invariant(&shift3(), &Frame::full(3), 1e-9).unwrap().flag);
    }

    #[test]
    fn moments_route_examples() {
        let pm = Povm::point_mass("x", 2);
        let psi = QuantumRandomVariable::constant(pm.space().clone(), &from_real_rows(&[&[0.0, 1.0], &[1.0, 1.0]]));
        assert!(moments_via_semiinvariance(&pm, &psi, SEMI_INVARIANCE_TOL).unwrap().flag);

        let coin = Povm::classical(two(), &[0.5, 0.5], 1, DEFAULT_TOL).unwrap();
        let psi = QuantumRandomVariable::scalar(two(), &[c64(1.0, 0.0), c64(-1.0, 0.0)], 1).unwrap();
        assert!(!moments_via_semiinvariance(&coin, &psi, SEMI_INVARIANCE_TOL).unwrap().flag);

        let proj = Povm::new(two(), vec![diag(&[1.0, 0.0]), diag(&[0.0, 1.0])], DEFAULT_TOL).unwrap();
        let psi = QuantumRandomVariable::new(two(), 2, vec![diag(&[2.0, 5.0]), diag(&[7.0, -1.0])]).unwrap();
        assert!(moments_via_semiinvariance(&proj, &psi, SEMI_INVARIANCE_TOL).unwrap().flag);
    }

    #[test]
    fn semi_invariance_matches_moment_check_on_random_instances() {
        let mut rng = rng_from(33);
        for t in 0..100 {
            let d = 1 + t % 3;
            let nu = random_povm(&mut rng, 2 + t % 3, d);
            let psi = random_qrv(&mut rng, nu.space(), d, 1.0);
            let big = stinespring_expectation(&nu).big_dim;
            let g = moment_sequence(&nu, &psi, 2 * big).unwrap();
            let route = moments_via_semiinvariance(&nu, &psi, SEMI_INVARIANCE_TOL).unwrap();
            assert_eq!(route.flag, moments_multiplicative(&g, 1e-8));
        }
    }

    #[test]
    fn realization_of_point_evaluation() {
        let space = OutcomeSpace::from_strs(&["a", "b", "c"]).unwrap();
        let mut rng = rng_from(1);
        let psi = random_qrv(&mut rng, &space, 2, 1.0);
        let theta = UcpCertificate::conjugated_evaluation(space.clone(), 1, identity(2));
        let r = realize_spectrum_point(&psi, &theta, 6, 1e-8).unwrap();
        assert_eq!(r.measure.len(), 1);
        assert_eq!(r.lambda, psi.value(1).clone());
        assert!(max_abs(&(r.unitary.value(0) - identity(2))) < 1e-14);
        assert!(r.max_moment_error < 1e-10);
    }

    #[test]
    fn realization_rejects_non_multiplicative_certificate() {
        let psi = QuantumRandomVariable::scalar(two(), &[c64(0.0, 0.0), c64(1.0, 0.0)], 1).unwrap();
        let half = identity(1) * c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let theta = UcpCertificate::new(two(), 1, vec![vec![half.clone()], vec![half]]).unwrap();
        match realize_spectrum_point(&psi, &theta, 4, 1e-8) {
            Err(Error::NotMultiplicativeOnRationalAlgebra { power: 2, error }) => assert!((error - 0.25).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn realization_rejects_unnormalized_kraus() {
        let psi = QuantumRandomVariable::scalar(two(), &[c64(0.0, 0.0), c64(1.0, 0.0)], 1).unwrap();
        let theta = UcpCertificate::new(two(), 1, vec![vec![identity(1)], vec![identity(1)]]).unwrap();
        assert!(matches!(realize_spectrum_point(&psi, &theta, 4, 1e-8), Err(Error::KrausNotNormalized { .. })));
    }

    #[test]
    fn realization_of_conjugated_evaluation() {
        let space = OutcomeSpace::from_strs(&["a", "b"]).unwrap();
        let mut rng = rng_from(77);
        let psi = random_qrv(&mut rng, &space, 3, 1.0);
        let u = haar_unitary(&mut rng, 3);
        let theta = UcpCertificate::conjugated_evaluation(space, 0, u.clone());
        let r = realize_spectrum_point(&psi, &theta, 6, 1e-8).unwrap();
        assert!(max_abs(&(&r.lambda - u.adjoint() * psi.value(0) * &u)) < 1e-12);
        assert!(r.max_moment_error < 1e-10);
    }

    #[test]
    fn certificate_from_choi_matches_kraus() {
        let space = OutcomeSpace::from_strs(&["a", "b"]).unwrap();
        let mut rng = rng_from(5);
        let u = haar_unitary(&mut rng, 2);
        let direct = UcpCertificate::conjugated_evaluation(space.clone(), 1, u.clone());
        let choi = vec![CMatrix::zeros(4, 4), choi_of_kraus(&[u], 2)];
        let via_choi = UcpCertificate::from_choi(space.clone(), 2, &choi).unwrap();
        let psi = random_qrv(&mut rng, &space, 2, 1.0);
        assert!(max_abs(&(direct.apply(&psi).unwrap() - via_choi.apply(&psi).unwrap())) < 1e-12);
    }
}
