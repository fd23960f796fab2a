//! Seeded random instances: Ginibre matrices, Haar unitaries, random POVMs,
//! states and random variables.
//!
//! All generators take an explicit RNG; sub-streams are derived with
//! [`derive_seed`] so that parallel work is independent of scheduling.

use nalgebra::linalg::QR;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dilation::UcpCertificate;
use crate::matkit::{c64, eigh, CMatrix};
use crate::qpm::{DensityOperator, OutcomeSpace, Povm, QuantumRandomVariable};

pub type SeededRng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic sub-seed for `(seed, stream, index)`.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    mix(mix(mix(seed) ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93)) ^ index)
}

pub fn rng_from(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// Matrix with i.i.d. standard complex Gaussian entries (variance 1 per entry).
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(s * re, s * im)
    })
}

/// Haar-distributed unitary (QR of a Ginibre matrix with phase correction).
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let g = ginibre(rng, n, n);
    let qr = QR::new(g);
    let q = qr.q();
    let r = qr.r();
    let mut u = q.clone();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c64(1.0, 0.0) };
        for i in 0..n {
            u[(i, j)] = q[(i, j)] * phase;
        }
    }
    u
}

/// Random positive semidefinite matrix `G G*`.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> CMatrix {
    let g = ginibre(rng, n, rank.max(1));
    &g * g.adjoint()
}

/// Random hermitian matrix.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let g = ginibre(rng, n, n);
    (&g + g.adjoint()) * c64(0.5, 0.0)
}

pub fn random_density<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DensityOperator {
    let a = random_psd(rng, d, d);
    let t = crate::matkit::trace(&a).re;
    DensityOperator::new(a / c64(t, 0.0), 1e-9).expect("normalized Gram matrix is a state")
}

pub fn labels(n: usize) -> OutcomeSpace {
    OutcomeSpace::new((0..n).map(|i| format!("x{i}")).collect()).expect("distinct labels")
}

/// Normalizes positive matrices `a_j` to `S^{-1/2} a_j S^{-1/2}` where `S = Σ a_j`.
/// A second pass removes the rounding left by an ill-conditioned `S`.
pub fn normalize_effects(raw: &[CMatrix]) -> Vec<CMatrix> {
    let mut effects = raw.to_vec();
    for _ in 0..2 {
        let d = effects[0].nrows();
        let s = effects.iter().fold(CMatrix::zeros(d, d), |acc, a| acc + a);
        let inv_sqrt = eigh(&s).reconstruct_with(|v| if v > 1e-300 { 1.0 / v.sqrt() } else { 0.0 });
        effects = effects.iter().map(|a| crate::matkit::hermitian_part(&(&inv_sqrt * a * &inv_sqrt))).collect();
    }
    effects
}

/// Random POVM with `n` full-rank effects on `C^d`.
pub fn random_povm<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize) -> Povm {
    let raw: Vec<CMatrix> = (0..n).map(|_| random_psd(rng, d, d)).collect();
    Povm::new(labels(n), normalize_effects(&raw), 1e-9).expect("normalized effects form a POVM")
}

/// Random POVM whose effects have rank at most `rank`.
pub fn random_low_rank_povm<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize, rank: usize) -> Povm {
    let raw: Vec<CMatrix> = (0..n).map(|_| random_psd(rng, d, rank)).collect();
    Povm::new(labels(n), normalize_effects(&raw), 1e-9).expect("normalized effects form a POVM")
}

/// Projective POVM: a random unitary basis split into `n` nonempty groups.
pub fn random_projective_povm<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize) -> (Povm, CMatrix, Vec<Vec<usize>>) {
    assert!(n >= 1 && n <= d, "need 1 <= n <= d");
    let u = haar_unitary(rng, d);
    let mut groups: Vec<Vec<usize>> = (0..n).map(|j| vec![j]).collect();
    for i in n..d {
        let g = rng.random_range(0..n);
        groups[g].push(i);
    }
    let effects = groups
        .iter()
        .map(|g| {
            let mut p = CMatrix::zeros(d, d);
            for &i in g {
                let col = u.column(i);
                p += col * col.adjoint();
            }
            crate::matkit::hermitian_part(&p)
        })
        .collect();
    (Povm::new(labels(n), effects, 1e-9).expect("projective resolution"), u, groups)
}

/// Random variable with Ginibre values scaled by `scale`.
pub fn random_qrv<R: Rng + ?Sized>(rng: &mut R, space: &OutcomeSpace, d: usize, scale: f64) -> QuantumRandomVariable {
    let values = (0..space.len()).map(|_| ginibre(rng, d, d) * c64(scale, 0.0)).collect();
    QuantumRandomVariable::new(space.clone(), d, values).expect("consistent shapes")
}

/// Random POVM with `n − 1` full-rank effects and one zero effect at `null_at`.
pub fn random_povm_with_null<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize, null_at: usize) -> Povm {
    assert!(n >= 2 && null_at < n, "need a supported outcome besides the null one");
    let raw: Vec<CMatrix> = (0..n - 1).map(|_| random_psd(rng, d, d)).collect();
    let mut effects = normalize_effects(&raw);
    effects.insert(null_at, CMatrix::zeros(d, d));
    Povm::new(labels(n), effects, 1e-9).expect("normalized effects form a POVM")
}

/// Projective POVM with a random variable whose values commute with their
/// effects: `ψ(x_j) = P_j A_j P_j + (I − P_j) B_j (I − P_j)`.
pub fn commuting_projective_instance<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    d: usize,
    scale: f64,
) -> (Povm, QuantumRandomVariable) {
    let (nu, _, _) = random_projective_povm(rng, n, d);
    let values = nu
        .effects()
        .iter()
        .map(|p| {
            let q = CMatrix::identity(d, d) - p;
            let a = ginibre(rng, d, d) * c64(scale, 0.0);
            let b = ginibre(rng, d, d) * c64(scale, 0.0);
            p * a * p + &q * b * &q
        })
        .collect();
    let psi = QuantumRandomVariable::new(nu.space().clone(), d, values).expect("consistent shapes");
    (nu, psi)
}

/// Certificate `θ(f) = Σ_j u* p_j f(x_j) p_j u` from a projection resolution
/// `p_1 + … + p_r = I` and distinct outcomes `x_1, …, x_r`, together with a
/// random variable whose value at `x_j` commutes with `p_j`, so that `θ` is
/// multiplicative on powers of `ψ`. `u = I` unless `conjugate` is set.
pub fn pinched_evaluation_instance<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    d: usize,
    parts: usize,
    conjugate: bool,
    scale: f64,
) -> (QuantumRandomVariable, UcpCertificate) {
    assert!(parts >= 1 && parts <= n.min(d), "need 1 <= parts <= min(n, d)");
    let (resolution, _, _) = random_projective_povm(rng, parts, d);
    let space = labels(n);
    let mut outcomes: Vec<usize> = (0..n).collect();
    outcomes.shuffle(rng);
    let u = if conjugate { haar_unitary(rng, d) } else { CMatrix::identity(d, d) };
    let mut values: Vec<CMatrix> = (0..n).map(|_| ginibre(rng, d, d) * c64(scale, 0.0)).collect();
    let mut kraus = vec![Vec::new(); n];
    for (j, p) in resolution.effects().iter().enumerate() {
        let x = outcomes[j];
        let q = CMatrix::identity(d, d) - p;
        let a = ginibre(rng, d, d) * c64(scale, 0.0);
        let b = ginibre(rng, d, d) * c64(scale, 0.0);
        values[x] = p * a * p + &q * b * &q;
        kraus[x].push(p * &u);
    }
    let psi = QuantumRandomVariable::new(space.clone(), d, values).expect("consistent shapes");
    let theta = UcpCertificate::new(space, d, kraus).expect("consistent shapes");
    (psi, theta)
}
