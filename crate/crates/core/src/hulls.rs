//! Essential ranges, C*-convex combinations, hull membership and hypoconvex
//! sampling.
//!
//! Choi matrices use the convention `C = Σ_ab E_ab ⊗ Φ(E_ab)`, so that
//! `Φ(a)[c, e] = Σ_ab a[a, b] C[a·d + c, b·d + e]`. Kraus operators `t` act as
//! `Φ(a) = Σ t* a t`.
//!
//! Membership `b ∈ C*conv{a_j}` is the feasibility of per-atom Choi blocks
//! `C_j ⪰ 0` with `Σ_j Φ_j(a_j) = b` and `Σ_j Φ_j(I) = I`. It is solved by
//! alternating projections between the product of PSD cones and the affine
//! constraint set. The constraints are complex linear; the conjugate equation
//! `Σ_j Φ_j(a_j*) = b*` is included so that the affine set is closed under
//! `C ↦ C*` and hermitian iterates stay hermitian.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::expectation::check_compatible;
use crate::matkit::{c64, commutator, eigh, hermitian_part, identity, operator_norm, CMatrix};
use crate::qpm::{Povm, QuantumRandomVariable};
use crate::random::{haar_unitary, rng_from};

/// Tolerance on `Σ t* t = I` for C*-convex coefficients.
pub const COEFFICIENT_TOL: f64 = 1e-9;

/// Choi eigenvalues at or below this are dropped in Kraus extraction.
pub const KRAUS_CUTOFF: f64 = 1e-10;

/// Supported values of a random variable, deduplicated.
#[derive(Debug, Clone)]
pub struct EssentialRange {
    pub elements: Vec<CMatrix>,
    /// For each element, the first outcome index that produced it.
    pub sources: Vec<usize>,
}

pub fn essential_range(nu: &Povm, psi: &QuantumRandomVariable, dedup_tol: f64) -> Result<EssentialRange> {
    check_compatible(nu, psi)?;
    let mut elements: Vec<CMatrix> = Vec::new();
    let mut sources = Vec::new();
    for j in nu.support() {
        let v = psi.value(j);
        if elements.iter().all(|e| operator_norm(&(e - v)) > dedup_tol) {
            elements.push(v.clone());
            sources.push(j);
        }
    }
    Ok(EssentialRange { elements, sources })
}

/// `Σ t* t` for a coefficient list.
fn coefficient_gram(ts: &[CMatrix], d: usize) -> CMatrix {
    let mut s = CMatrix::zeros(d, d);
    for t in ts {
        s += t.adjoint() * t;
    }
    s
}

/// `Σ_j t_j* a_j t_j`.
pub fn cstar_combine(ts: &[CMatrix], atoms: &[CMatrix]) -> Result<CMatrix> {
    if ts.len() != atoms.len() {
        return Err(Error::DimensionMismatch { expected: atoms.len(), found: ts.len() });
    }
    let d = match atoms.first() {
        Some(a) => a.nrows(),
        None => return Err(Error::EmptyFamily),
    };
    for m in ts.iter().chain(atoms) {
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: m.nrows().max(m.ncols()) });
        }
    }
    let deviation = operator_norm(&(coefficient_gram(ts, d) - identity(d)));
    if deviation > COEFFICIENT_TOL {
        return Err(Error::CoefficientsNotNormalized { deviation });
    }
    let mut out = CMatrix::zeros(d, d);
    for (t, a) in ts.iter().zip(atoms) {
        out += t.adjoint() * a * t;
    }
    Ok(out)
}

/// Coefficients and the atoms they multiply.
#[derive(Debug, Clone)]
pub struct CStarCombination {
    pub coefficients: Vec<CMatrix>,
    pub atoms: Vec<CMatrix>,
    /// Index of the source atom of each term.
    pub atom_index: Vec<usize>,
}

impl CStarCombination {
    pub fn combine(&self) -> Result<CMatrix> {
        cstar_combine(&self.coefficients, &self.atoms)
    }

    pub fn normalization_deviation(&self) -> f64 {
        let d = self.atoms.first().map_or(0, |a| a.nrows());
        operator_norm(&(coefficient_gram(&self.coefficients, d) - identity(d)))
    }
}

/// Choi matrix of `a ↦ Σ t* a t`.
pub fn choi_of_kraus(ts: &[CMatrix], d: usize) -> CMatrix {
    let mut c = CMatrix::zeros(d * d, d * d);
    for t in ts {
        // a ↦ A a A* with A = t*; vec index (a, c) ↦ A[c, a]
        let a = t.adjoint();
        let v = CMatrix::from_fn(d * d, 1, |i, _| a[(i % d, i / d)]);
        c += &v * v.adjoint();
    }
    c
}

/// Kraus operators of a PSD Choi matrix, dropping eigenvalues `<= cutoff`.
pub fn kraus_of_choi(c: &CMatrix, d: usize, cutoff: f64) -> Result<Vec<CMatrix>> {
    if c.nrows() != d * d || c.ncols() != d * d {
        return Err(Error::DimensionMismatch { expected: d * d, found: c.nrows().max(c.ncols()) });
    }
    let e = eigh(c);
    let scale = e.values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    if e.min() < -1e-8 * scale {
        return Err(Error::NotPsd { min_eigenvalue: e.min() });
    }
    let mut out = Vec::new();
    for (k, &lambda) in e.values.iter().enumerate() {
        if lambda <= cutoff {
            continue;
        }
        let s = lambda.sqrt();
        let v = e.vectors.column(k);
        let a = CMatrix::from_fn(d, d, |row, col| v[col * d + row] * s);
        out.push(a.adjoint());
    }
    Ok(out)
}

/// Applies the map with Choi matrix `c` to `a`.
pub fn apply_choi(c: &CMatrix, a: &CMatrix, d: usize) -> CMatrix {
    let mut out = CMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let w = a[(i, j)];
            if w == c64(0.0, 0.0) {
                continue;
            }
            out += c.view((i * d, j * d), (d, d)) * w;
        }
    }
    out
}

/// `Φ(I)` for the map with Choi matrix `c`.
pub fn choi_unit_image(c: &CMatrix, d: usize) -> CMatrix {
    apply_choi(c, &identity(d), d)
}

/// Per-atom Choi blocks solving the membership problem for `target`.
#[derive(Debug, Clone)]
pub struct ChoiCertificate {
    pub dim: usize,
    pub atoms: Vec<CMatrix>,
    pub target: CMatrix,
    pub blocks: Vec<CMatrix>,
}

impl ChoiCertificate {
    /// `||Σ Φ_j(a_j) − b||_F`.
    pub fn target_residual(&self) -> f64 {
        let d = self.dim;
        let mut s = -self.target.clone();
        for (c, a) in self.blocks.iter().zip(&self.atoms) {
            s += apply_choi(c, a, d);
        }
        s.norm()
    }

    /// `||Σ Φ_j(I) − I||_F`.
    pub fn unital_residual(&self) -> f64 {
        let d = self.dim;
        let mut s = -identity(d);
        for c in &self.blocks {
            s += choi_unit_image(c, d);
        }
        s.norm()
    }

    pub fn residual(&self) -> f64 {
        self.target_residual().max(self.unital_residual())
    }

    /// Smallest eigenvalue over all blocks.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks.iter().map(|c| eigh(c).min()).fold(f64::INFINITY, f64::min)
    }
}

/// Default iteration budget; slow instances need several tens of thousands.
pub const HULL_MAX_ITER: usize = 200_000;

/// Iteration controls for [`cstar_hull_membership`].
#[derive(Debug, Clone, Copy)]
pub struct HullOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for HullOptions {
    fn default() -> Self {
        HullOptions { max_iter: HULL_MAX_ITER, tol: 1e-7 }
    }
}

#[derive(Debug, Clone)]
pub enum HullVerdict {
    /// Feasible Choi blocks found.
    Member { certificate: ChoiCertificate, residual: f64, iterations: usize },
    /// `||b|| > max ||a_j||`, so `b` cannot be a member.
    Rejected { target_norm: f64, max_atom_norm: f64 },
    /// Alternating projections stalled or ran out of iterations.
    Inconclusive { residual: f64, iterations: usize },
}

impl HullVerdict {
    pub fn is_member(&self) -> bool {
        matches!(self, HullVerdict::Member { .. })
    }
}

/// Dense complex linear constraints `L x = r` on the stacked Choi entries
/// together with the least-squares correction `L⁺`.
struct AffineSet {
    l: CMatrix,
    pinv: CMatrix,
    r: CMatrix,
}

impl AffineSet {
    fn new(b: &CMatrix, atoms: &[CMatrix], d: usize) -> AffineSet {
        let dd = d * d;
        let block = dd * dd;
        let m = atoms.len();
        let rows = 3 * dd;
        let mut l = CMatrix::zeros(rows, m * block);
        let mut r = CMatrix::zeros(rows, 1);
        let entry = |j: usize, row: usize, col: usize| j * block + col * dd + row;
        for c in 0..d {
            for e in 0..d {
                let out = c * d + e;
                r[(out, 0)] = b[(c, e)];
                r[(dd + out, 0)] = b[(e, c)].conj();
                r[(2 * dd + out, 0)] = if c == e { c64(1.0, 0.0) } else { c64(0.0, 0.0) };
                for (j, atom) in atoms.iter().enumerate() {
                    for a in 0..d {
                        for bb in 0..d {
                            let k = entry(j, a * d + c, bb * d + e);
                            l[(out, k)] = atom[(a, bb)];
                            l[(dd + out, k)] = atom[(bb, a)].conj();
                        }
                        l[(2 * dd + out, entry(j, a * d + c, a * d + e))] = c64(1.0, 0.0);
                    }
                }
            }
        }
        let gram = &l * l.adjoint();
        let eg = eigh(&gram);
        let top = eg.max();
        let gram_pinv = eg.reconstruct_with(|v| if v > 1e-12 * top { 1.0 / v } else { 0.0 });
        let pinv = l.adjoint() * gram_pinv;
        AffineSet { l, pinv, r }
    }

    fn project(&self, x: &CMatrix) -> CMatrix {
        let violation = &self.l * x - &self.r;
        x - &self.pinv * violation
    }
}

fn stack(blocks: &[CMatrix]) -> CMatrix {
    let n = blocks[0].len();
    let mut x = CMatrix::zeros(n * blocks.len(), 1);
    for (j, c) in blocks.iter().enumerate() {
        x.view_mut((j * n, 0), (n, 1)).copy_from_slice(c.as_slice());
    }
    x
}

fn unstack(x: &CMatrix, m: usize, side: usize) -> Vec<CMatrix> {
    let n = side * side;
    (0..m).map(|j| CMatrix::from_column_slice(side, side, &x.as_slice()[j * n..(j + 1) * n])).collect()
}

fn psd_clip(c: &CMatrix) -> CMatrix {
    hermitian_part(&eigh(c).reconstruct_with(|v| v.max(0.0)))
}

/// Searches for a ucp map sending the atoms to `b`.
pub fn cstar_hull_membership(b: &CMatrix, atoms: &[CMatrix], opts: HullOptions) -> Result<HullVerdict> {
    let d = b.nrows();
    if atoms.is_empty() {
        return Err(Error::EmptyFamily);
    }
    if b.ncols() != d {
        return Err(Error::NotSquare { rows: b.nrows(), cols: b.ncols() });
    }
    for a in atoms {
        if a.nrows() != d || a.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: a.nrows().max(a.ncols()) });
        }
    }
    let target_norm = operator_norm(b);
    let max_atom_norm = atoms.iter().map(operator_norm).fold(0.0, f64::max);
    if target_norm > max_atom_norm + 1e-9 * max_atom_norm.max(1.0) {
        return Ok(HullVerdict::Rejected { target_norm, max_atom_norm });
    }

    let m = atoms.len();
    let side = d * d;
    let affine = AffineSet::new(b, atoms, d);
    let start = choi_of_kraus(&[identity(d)], d) * c64(1.0 / m as f64, 0.0);
    let mut blocks = vec![start; m];
    let residual_of = |blocks: &[CMatrix]| -> f64 {
        let cert = ChoiCertificate { dim: d, atoms: atoms.to_vec(), target: b.clone(), blocks: blocks.to_vec() };
        cert.residual()
    };
    let mut residual = residual_of(&blocks);
    let mut checkpoint = residual;
    let mut iterations = 0;
    while residual > opts.tol && iterations < opts.max_iter {
        let x = affine.project(&stack(&blocks));
        blocks = unstack(&x, m, side).iter().map(psd_clip).collect();
        iterations += 1;
        residual = residual_of(&blocks);
        if iterations % 1000 == 0 {
            if residual > 0.999 * checkpoint {
                break;
            }
            checkpoint = residual;
        }
    }
    if residual <= opts.tol {
        let certificate = ChoiCertificate { dim: d, atoms: atoms.to_vec(), target: b.clone(), blocks };
        Ok(HullVerdict::Member { certificate, residual, iterations })
    } else {
        Ok(HullVerdict::Inconclusive { residual, iterations })
    }
}

/// Kraus operators of every block, renormalized so that `Σ t* t = I` exactly.
pub fn kraus_extract(certificate: &ChoiCertificate) -> Result<CStarCombination> {
    let d = certificate.dim;
    if certificate.blocks.len() != certificate.atoms.len() {
        return Err(Error::CertificateInfeasible("one Choi block per atom is required".into()));
    }
    let mut coefficients = Vec::new();
    let mut atoms = Vec::new();
    let mut atom_index = Vec::new();
    for (j, c) in certificate.blocks.iter().enumerate() {
        let ts = kraus_of_choi(c, d, KRAUS_CUTOFF).map_err(|e| Error::CertificateInfeasible(format!("block {j}: {e}")))?;
        for t in ts {
            coefficients.push(t);
            atoms.push(certificate.atoms[j].clone());
            atom_index.push(j);
        }
    }
    if coefficients.is_empty() {
        return Err(Error::CertificateInfeasible("all Choi blocks vanish".into()));
    }
    let s = coefficient_gram(&coefficients, d);
    let e = eigh(&s);
    if e.min() <= 0.5 {
        return Err(Error::CertificateInfeasible(format!("Σ t*t is far from the identity (min eigenvalue {:.3e})", e.min())));
    }
    let inv_sqrt = e.reconstruct_with(|v| 1.0 / v.sqrt());
    let coefficients = coefficients.into_iter().map(|t| t * &inv_sqrt).collect();
    Ok(CStarCombination { coefficients, atoms, atom_index })
}

/// One generating move of the hypoconvex hull. New elements are appended to
/// the pool; indices refer to the pool at the time of the move.
#[derive(Debug, Clone, PartialEq)]
pub enum Move {
    /// `u* λ u`.
    Conjugate { element: usize, unitary: CMatrix },
    /// `p λ_1 + (I − p) λ_2` with `p` commuting with both.
    Pinch { first: usize, second: usize, projection: CMatrix },
    /// Pinching requested but no commuting projection exists.
    Skipped { first: usize, second: usize },
}

#[derive(Debug, Clone)]
pub struct HypoconvexSample {
    pub value: CMatrix,
    pub log: Vec<Move>,
}

/// Relative commutation tolerance for pinching projections.
pub const PINCH_TOL: f64 = 1e-9;

fn commutes(p: &CMatrix, a: &CMatrix) -> bool {
    operator_norm(&commutator(p, a)) <= PINCH_TOL * (1.0 + operator_norm(a))
}

/// Proper nonzero projections built from joint eigenprojections that commute
/// with both matrices.
pub fn commuting_projections<R: Rng + ?Sized>(rng: &mut R, a: &CMatrix, b: &CMatrix) -> Vec<CMatrix> {
    let d = a.nrows();
    let i_half = c64(0.0, -0.5);
    let parts = [hermitian_part(a), (a - a.adjoint()) * i_half, hermitian_part(b), (b - b.adjoint()) * i_half];
    let mut h = CMatrix::zeros(d, d);
    for p in &parts {
        h += p * c64(rng.random_range(0.5..1.5), 0.0);
    }
    let e = eigh(&h);
    let scale = e.values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in e.values.iter().enumerate() {
        match clusters.last_mut() {
            Some(c) if (e.values[*c.last().unwrap()] - v).abs() <= 1e-8 * scale => c.push(i),
            _ => clusters.push(vec![i]),
        }
    }
    let k = clusters.len();
    if !(2..=16).contains(&k) {
        return vec![];
    }
    let mut out = Vec::new();
    for mask in 1..(1u32 << k) - 1 {
        let mut p = CMatrix::zeros(d, d);
        for (c, cluster) in clusters.iter().enumerate() {
            if mask & (1 << c) != 0 {
                for &i in cluster {
                    let v = e.vectors.column(i);
                    p += v * v.adjoint();
                }
            }
        }
        let p = hermitian_part(&p);
        if commutes(&p, a) && commutes(&p, b) {
            out.push(p);
        }
    }
    out
}

/// Applies a move to the pool and returns the new element.
pub fn apply_move(pool: &[CMatrix], mv: &Move) -> Result<CMatrix> {
    let get = |i: usize| pool.get(i).ok_or_else(|| Error::InvalidState(format!("move refers to missing element {i}")));
    match mv {
        Move::Conjugate { element, unitary } => Ok(unitary.adjoint() * get(*element)? * unitary),
        Move::Pinch { first, second, projection } => {
            let a = get(*first)?;
            let b = get(*second)?;
            if !commutes(projection, a) || !commutes(projection, b) {
                return Err(Error::InvalidState("pinching projection does not commute with its elements".into()));
            }
            let d = a.nrows();
            Ok(projection * a + (identity(d) - projection) * b)
        }
        Move::Skipped { first, .. } => Ok(get(*first)?.clone()),
    }
}

/// Random element of the hypoconvex hull of `elements` after `moves` moves.
pub fn hypoconvex_sample(elements: &[CMatrix], moves: usize, seed: u64) -> Result<HypoconvexSample> {
    let first = elements.first().ok_or(Error::EmptyFamily)?;
    let d = first.nrows();
    let mut rng = rng_from(seed);
    let mut pool: Vec<CMatrix> = elements.to_vec();
    let mut log = Vec::with_capacity(moves);
    for _ in 0..moves {
        let n = pool.len();
        let mv = if rng.random_bool(0.5) || n < 2 {
            Move::Conjugate { element: rng.random_range(0..n), unitary: haar_unitary(&mut rng, d) }
        } else {
            let i = rng.random_range(0..n);
            let j = (i + rng.random_range(1..n)) % n;
            let candidates = commuting_projections(&mut rng, &pool[i], &pool[j]);
            match candidates.choose(&mut rng) {
                Some(p) => Move::Pinch { first: i, second: j, projection: p.clone() },
                None => Move::Skipped { first: i, second: j },
            }
        };
        let value = apply_move(&pool, &mv)?;
        pool.push(value);
        log.push(mv);
    }
    Ok(HypoconvexSample { value: pool.pop().expect("pool is nonempty"), log })
}

/// Recomputes a sample from its move log.
pub fn replay(elements: &[CMatrix], log: &[Move]) -> Result<CMatrix> {
    let mut pool = elements.to_vec();
    if pool.is_empty() {
        return Err(Error::EmptyFamily);
    }
    for mv in log {
        let v = apply_move(&pool, mv)?;
        pool.push(v);
    }
    Ok(pool.pop().expect("pool is nonempty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expectation::expect;
    use crate::matkit::{diag, max_abs, DEFAULT_TOL};
    use crate::qpm::OutcomeSpace;
    use crate::random::{random_povm, random_qrv};

    fn scalar(v: f64) -> CMatrix {
        diag(&[v])
    }

    #[test]
    fn essential_range_examples() {
        let pm = Povm::point_mass("x", 2);
        let z = diag(&[1.0, 2.0]);
        let psi = QuantumRandomVariable::constant(pm.space().clone(), &z);
        assert_eq!(essential_range(&pm, &psi, 1e-12).unwrap().elements, vec![z.clone()]);

        let space = OutcomeSpace::from_strs(&["a", "b", "c"]).unwrap();
        let nu = Povm::new(space.clone(), vec![diag(&[1.0, 0.5]), diag(&[0.0, 0.5]), CMatrix::zeros(2, 2)], DEFAULT_TOL).unwrap();
        let psi =
            QuantumRandomVariable::new(space.clone(), 2, vec![diag(&[1.0, 1.0]), diag(&[2.0, 2.0]), diag(&[9.0, 9.0])]).unwrap();
        let r = essential_range(&nu, &psi, 1e-12).unwrap();
        assert_eq!(r.sources, vec![0, 1]);

        let psi = QuantumRandomVariable::constant(space, &z);
        assert_eq!(essential_range(&nu, &psi, 1e-12).unwrap().elements.len(), 1);
    }

    #[test]
    fn combine_examples() {
        let mut rng = rng_from(4);
        let nu = random_povm(&mut rng, 3, 2);
        let psi = random_qrv(&mut rng, nu.space(), 2, 1.0);
        let got = cstar_combine(nu.sqrt_effects(), psi.values()).unwrap();
        assert!(max_abs(&(got - expect(&nu, &psi).unwrap())) < 1e-12);

        let a = diag(&[3.0, -1.0]);
        assert_eq!(cstar_combine(&[identity(2)], std::slice::from_ref(&a)).unwrap(), a);

        let p: f64 = 0.3;
        let ts = [scalar(p.sqrt()), scalar((1.0 - p).sqrt())];
        let v = cstar_combine(&ts, &[scalar(0.0), scalar(1.0)]).unwrap();
        assert!((v[(0, 0)].re - (1.0 - p)).abs() < 1e-15);

        assert!(matches!(
            cstar_combine(&[scalar(1.0), scalar(1.0)], &[scalar(0.0), scalar(1.0)]),
            Err(Error::CoefficientsNotNormalized { .. })
        ));
    }

    #[test]
    fn choi_round_trip_identity_and_pinching() {
        let d = 2;
        let ks = kraus_of_choi(&choi_of_kraus(&[identity(d)], d), d, KRAUS_CUTOFF).unwrap();
        assert_eq!(ks.len(), 1);
        assert!(max_abs(&(&ks[0] - identity(d))) < 1e-12);

        let p = diag(&[1.0, 0.0]);
        let q = diag(&[0.0, 1.0]);
        let ks = kraus_of_choi(&choi_of_kraus(&[p.clone(), q.clone()], d), d, KRAUS_CUTOFF).unwrap();
        assert_eq!(ks.len(), 2);
        let mut found: Vec<bool> = vec![false, false];
        for k in &ks {
            if max_abs(&(k - &p)) < 1e-12 {
                found[0] = true;
            }
            if max_abs(&(k - &q)) < 1e-12 {
                found[1] = true;
            }
        }
        assert_eq!(found, vec![true, true]);
    }

    #[test]
    fn apply_choi_matches_kraus() {
        let mut rng = rng_from(8);
        let ts: Vec<CMatrix> = (0..3).map(|_| crate::random::ginibre(&mut rng, 3, 3)).collect();
        let a = crate::random::ginibre(&mut rng, 3, 3);
        let direct = ts.iter().fold(CMatrix::zeros(3, 3), |acc, t| acc + t.adjoint() * &a * t);
        assert!(max_abs(&(apply_choi(&choi_of_kraus(&ts, 3), &a, 3) - direct)) < 1e-12);
    }

    #[test]
    fn scalar_interval_membership() {
        let atoms = [scalar(0.0), scalar(1.0)];
        match cstar_hull_membership(&scalar(0.5), &atoms, HullOptions::default()).unwrap() {
            HullVerdict::Member { certificate, .. } => {
                let comb = kraus_extract(&certificate).unwrap();
                assert!((comb.combine().unwrap()[(0, 0)].re - 0.5).abs() < 1e-6);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            cstar_hull_membership(&scalar(2.0), &atoms, HullOptions::default()).unwrap(),
            HullVerdict::Rejected { .. }
        ));
    }

    #[test]
    fn expectation_is_in_hull_of_essential_range() {
        let mut rng = rng_from(91);
        for t in 0..10 {
            let d = 1 + t % 3;
            let nu = random_povm(&mut rng, 2 + t % 2, d);
            let psi = random_qrv(&mut rng, nu.space(), d, 1.0);
            let b = expect(&nu, &psi).unwrap();
            let range = essential_range(&nu, &psi, 1e-12).unwrap();
            match cstar_hull_membership(&b, &range.elements, HullOptions::default()).unwrap() {
                HullVerdict::Member { certificate, residual, .. } => {
                    assert!(residual <= 1e-7);
                    let comb = kraus_extract(&certificate).unwrap();
                    assert!(comb.normalization_deviation() < 1e-9);
                    assert!(operator_norm(&(comb.combine().unwrap() - &b)) < 1e-6);
                }
                other => panic!("instance {t}: {other:?}"),
            }
        }
    }

    #[test]
    fn hypoconvex_trivial_cases() {
        let a = diag(&[1.0, 2.0]);
        let s = hypoconvex_sample(std::slice::from_ref(&a), 0, 3).unwrap();
        assert_eq!(s.value, a);

        let atoms = [scalar(0.0), scalar(1.0), scalar(-2.0)];
        for seed in 0..20 {
            let s = hypoconvex_sample(&atoms, 8, seed).unwrap();
            assert!(atoms.iter().any(|x| (x[(0, 0)] - s.value[(0, 0)]).norm() < 1e-12));
        }
    }

    #[test]
    fn pinching_commuting_diagonal_pair() {
        let l1 = diag(&[1.0, 3.0]);
        let l2 = diag(&[4.0, 2.0]);
        let mv = Move::Pinch { first: 0, second: 1, projection: diag(&[1.0, 0.0]) };
        assert_eq!(apply_move(&[l1.clone(), l2.clone()], &mv).unwrap(), diag(&[1.0, 2.0]));

        let mut rng = rng_from(0);
        let ps = commuting_projections(&mut rng, &l1, &l2);
        assert_eq!(ps.len(), 2);
        let produced: Vec<CMatrix> = ps.iter().map(|p| p * &l1 + (identity(2) - p) * &l2).collect();
        assert!(produced.iter().any(|v| max_abs(&(v - diag(&[1.0, 2.0]))) < 1e-12));
    }

    #[test]
    fn non_commuting_pinch_is_rejected() {
        let l1 = diag(&[1.0, 3.0]);
        let mv = Move::Pinch { first: 0, second: 0, projection: CMatrix::from_element(2, 2, c64(0.5, 0.0)) };
        assert!(apply_move(&[l1], &mv).is_err());
    }

    #[test]
    fn replay_reproduces_samples() {
        let atoms = [diag(&[1.0, 3.0, 0.0]), diag(&[4.0, 2.0, 1.0])];
        for seed in 0..10 {
            let s = hypoconvex_sample(&atoms, 12, seed).unwrap();
            assert_eq!(replay(&atoms, &s.log).unwrap(), s.value);
            assert!(s.log.iter().any(|m| matches!(m, Move::Conjugate { .. })));
        }
    }
}
