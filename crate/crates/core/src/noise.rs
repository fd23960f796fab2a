//! Random quantum noise, randomisation kernels and intrinsic-noise bounds.
//!
//! A kernel `γ` assigns a measure `γ_y` on `X` to every `y ∈ Y`. Together with
//! a measure `ν′` on `Y` it induces the randomised measure
//! `ν(x) = Σ_y h′_y^{1/2} γ_y(x) h′_y^{1/2}` and the smearing map
//! `(Γψ)(y) = E_{γ_y}[ψ]`.
//!
//! Noise values are lower bounds found by projected gradient ascent of
//! `λ_max(Var(ψ))` over the unit ball of `L^∞`. The returned maximiser
//! reproduces the value when the variance is recomputed from scratch.

use crate::error::{Error, Result};
use crate::expectation::{check_compatible, expect_values};
use crate::matkit::{c64, eigh, hermitian_part, identity, kron, operator_norm, svd, CMatrix, DEFAULT_TOL};
use crate::qpm::{OutcomeSpace, Povm, QuantumRandomVariable};
use crate::random::{derive_seed, ginibre, rng_from};
use crate::variance::{symmetric, variance_pair};
use rand::Rng;

const START_STREAM: u64 = 0x4e4f_4953;
const SIGN_STREAM: u64 = 0x5349_474e;
const LAWS_STREAM: u64 = 0x4c41_5753;

/// At most this many deterministic sign starts are used.
pub const MAX_SIGN_STARTS: usize = 64;

/// Tolerance for `randomise_measure(γ, ν′) = ν` in intrinsic-noise families.
pub const REPRODUCTION_TOL: f64 = 1e-8;

/// Kernel `y ↦ γ_y` from `Y` to measures on `X`.
#[derive(Debug, Clone)]
pub struct RandomisationKernel {
    pub target_space: OutcomeSpace,
    pub source_space: OutcomeSpace,
    pub kernels: Vec<Povm>,
}

impl RandomisationKernel {
    pub fn new(target_space: OutcomeSpace, source_space: OutcomeSpace, kernels: Vec<Povm>) -> Result<Self> {
        if kernels.len() != target_space.len() {
            return Err(Error::DimensionMismatch { expected: target_space.len(), found: kernels.len() });
        }
        let d = kernels.first().map(Povm::dim).ok_or(Error::EmptyFamily)?;
        for k in &kernels {
            if k.space() != &source_space {
                return Err(Error::SpaceMismatch);
            }
            if k.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: k.dim() });
            }
        }
        Ok(RandomisationKernel { target_space, source_space, kernels })
    }

    pub fn dim(&self) -> usize {
        self.kernels[0].dim()
    }

    /// `γ_y = δ_y` on `Y = X`.
    pub fn identity(space: &OutcomeSpace, dim: usize) -> Self {
        let kernels = (0..space.len()).map(|y| Povm::point_mass_in(space.clone(), y, dim).expect("index in range")).collect();
        RandomisationKernel { target_space: space.clone(), source_space: space.clone(), kernels }
    }

    /// Single target point carrying `nu`.
    pub fn full_smear(nu: &Povm) -> Self {
        RandomisationKernel {
            target_space: OutcomeSpace::singleton("*"),
            source_space: nu.space().clone(),
            kernels: vec![nu.clone()],
        }
    }

    fn check(&self, nu_prime: &Povm) -> Result<()> {
        if nu_prime.space() != &self.target_space {
            return Err(Error::SpaceMismatch);
        }
        if nu_prime.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: nu_prime.dim() });
        }
        Ok(())
    }
}

/// `ν(x) = Σ_y h′_y^{1/2} γ_y(x) h′_y^{1/2}`.
pub fn randomise_measure(gamma: &RandomisationKernel, nu_prime: &Povm) -> Result<Povm> {
    gamma.check(nu_prime)?;
    let d = gamma.dim();
    let mut effects = vec![CMatrix::zeros(d, d); gamma.source_space.len()];
    for (y, kernel) in gamma.kernels.iter().enumerate() {
        let s = nu_prime.sqrt_effect(y);
        for (x, e) in effects.iter_mut().enumerate() {
            *e += s * kernel.effect(x) * s;
        }
    }
    let effects = effects.iter().map(hermitian_part).collect();
    Povm::new(gamma.source_space.clone(), effects, 10.0 * DEFAULT_TOL)
}

fn smear_values(gamma: &RandomisationKernel, values: &[CMatrix]) -> Vec<CMatrix> {
    gamma.kernels.iter().map(|k| expect_values(k, values)).collect()
}

/// `(Γψ)(y) = E_{γ_y}[ψ]`.
pub fn gamma_apply(gamma: &RandomisationKernel, nu_prime: &Povm, psi: &QuantumRandomVariable) -> Result<QuantumRandomVariable> {
    gamma.check(nu_prime)?;
    if psi.space() != &gamma.source_space {
        return Err(Error::SpaceMismatch);
    }
    if psi.dim() != gamma.dim() {
        return Err(Error::DimensionMismatch { expected: gamma.dim(), found: psi.dim() });
    }
    QuantumRandomVariable::new(gamma.target_space.clone(), gamma.dim(), smear_values(gamma, psi.values()))
}

/// Discrepancies in the three randomisation laws.
#[derive(Debug, Clone)]
pub struct LawsReport {
    /// `||E_ν′[Γψ] − E_ν[ψ]||`.
    pub expectation_gap: f64,
    /// Smallest eigenvalue of `Var_ν(ψ) − Var_ν′(Γψ)`.
    pub contraction_min_eig: f64,
    /// Smallest eigenvalue of `Γ ⊗ id_2` on random positive inputs.
    pub cp_worst_eig: f64,
    pub violations: Vec<String>,
}

impl LawsReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Number of random positive inputs in the level-2 spot check.
pub const LAWS_CP_TRIALS: usize = 8;

/// Checks `E_ν′∘Γ = E_ν`, variance contraction and 2-positivity of `Γ`.
pub fn randomisation_laws_check(
    gamma: &RandomisationKernel,
    nu_prime: &Povm,
    psi: &QuantumRandomVariable,
    tol: f64,
) -> Result<LawsReport> {
    let nu = randomise_measure(gamma, nu_prime)?;
    let smeared = gamma_apply(gamma, nu_prime, psi)?;
    let expectation_gap = operator_norm(&(expect_values(nu_prime, smeared.values()) - expect_values(&nu, psi.values())));

    let (l, r) = variance_pair(&nu, psi.values());
    let (l2, r2) = variance_pair(nu_prime, smeared.values());
    let contraction_min_eig = eigh(&(symmetric(&l, &r) - symmetric(&l2, &r2))).min();

    let d = gamma.dim();
    let n = 2;
    let mut cp_worst_eig = f64::INFINITY;
    for t in 0..LAWS_CP_TRIALS {
        let mut rng = rng_from(derive_seed(0, LAWS_STREAM, t as u64));
        let inputs: Vec<CMatrix> = (0..gamma.source_space.len())
            .map(|_| {
                let b = ginibre(&mut rng, n * d, n * d);
                b.adjoint() * b
            })
            .collect();
        for kernel in &gamma.kernels {
            let mut out = CMatrix::zeros(n * d, n * d);
            for (x, f) in inputs.iter().enumerate() {
                let g = kron(&identity(n), kernel.sqrt_effect(x));
                out += &g * f * &g;
            }
            cp_worst_eig = cp_worst_eig.min(eigh(&out).min());
        }
    }

    let mut violations = Vec::new();
    if expectation_gap > tol {
        violations.push(format!("expectation law: gap {expectation_gap:.3e} > {tol:.1e}"));
    }
    if contraction_min_eig < -tol {
        violations.push(format!("variance contraction: min eigenvalue {contraction_min_eig:.3e} < -{tol:.1e}"));
    }
    if cp_worst_eig < -tol {
        violations.push(format!("complete positivity: min eigenvalue {cp_worst_eig:.3e} < -{tol:.1e}"));
    }
    Ok(LawsReport { expectation_gap, contraction_min_eig, cp_worst_eig, violations })
}

/// Controls for the noise optimizer.
#[derive(Debug, Clone, Copy)]
pub struct NoiseOptions {
    /// Random starts in addition to the deterministic sign starts.
    pub restarts: usize,
    pub max_iter: usize,
    pub step: f64,
    pub seed: u64,
}

impl Default for NoiseOptions {
    fn default() -> Self {
        NoiseOptions { restarts: 16, max_iter: 300, step: 0.1, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct NoiseEstimate {
    pub value: f64,
    pub argmax_psi: QuantumRandomVariable,
    /// Total number of ascent runs (sign starts plus random starts).
    pub restarts_used: usize,
    /// Iterations summed over all runs.
    pub iterations: usize,
    /// Whether the best run stopped on its convergence test.
    pub converged: bool,
}

/// `ψ ↦ Var_{ν′}(Γψ)` on the unit ball of `L^∞(X, ν)`.
struct Objective<'a> {
    ball: &'a Povm,
    smear: Option<&'a RandomisationKernel>,
    outer: &'a Povm,
    support: Vec<usize>,
}

impl<'a> Objective<'a> {
    fn image(&self, psi: &[CMatrix]) -> Vec<CMatrix> {
        match self.smear {
            Some(g) => smear_values(g, psi),
            None => psi.to_vec(),
        }
    }

    fn variance(&self, psi: &[CMatrix]) -> CMatrix {
        let (l, r) = variance_pair(self.outer, &self.image(psi));
        symmetric(&l, &r)
    }

    fn value(&self, psi: &[CMatrix]) -> f64 {
        spectral_norm(&self.variance(psi))
    }

    /// Gradient of `λ_max` with respect to the image values, for a simple
    /// top eigenvalue; `None` when the top eigenvalue is clustered.
    fn outer_gradient(&self, phi: &[CMatrix]) -> Option<Vec<CMatrix>> {
        let (l, r) = variance_pair(self.outer, phi);
        let e = eigh(&symmetric(&l, &r));
        if e.values.len() > 1 && e.values[0] - e.values[1] <= 1e-8 * (1.0 + e.values[0].abs()) {
            return None;
        }
        let v = e.vectors.column(0);
        let p = v * v.adjoint();
        let m = expect_values(self.outer, phi);
        Some(
            phi.iter()
                .enumerate()
                .map(|(y, f)| {
                    let s = self.outer.sqrt_effect(y);
                    let sps = s * &p * s;
                    f * &sps + &sps * f - s * &m * &p * s - s * &p * &m * s
                })
                .collect(),
        )
    }

    fn fd_gradient(&self, psi: &[CMatrix]) -> Vec<CMatrix> {
        let h = 1e-6;
        let d = psi[0].nrows();
        let mut grad = vec![CMatrix::zeros(d, d); psi.len()];
        let mut work = psi.to_vec();
        for &x in &self.support {
            for i in 0..d {
                for j in 0..d {
                    for unit in [c64(1.0, 0.0), c64(0.0, 1.0)] {
                        let orig = work[x][(i, j)];
                        work[x][(i, j)] = orig + unit * h;
                        let up = self.value(&work);
                        work[x][(i, j)] = orig - unit * h;
                        let down = self.value(&work);
                        work[x][(i, j)] = orig;
                        grad[x][(i, j)] += unit * ((up - down) / (2.0 * h));
                    }
                }
            }
        }
        grad
    }

    fn gradient(&self, psi: &[CMatrix]) -> Vec<CMatrix> {
        let phi = self.image(psi);
        let mut grad = match self.outer_gradient(&phi) {
            None => return self.fd_gradient(psi),
            Some(g) => match self.smear {
                None => g,
                Some(gamma) => {
                    let d = psi[0].nrows();
                    let mut back = vec![CMatrix::zeros(d, d); psi.len()];
                    for (kernel, gy) in gamma.kernels.iter().zip(&g) {
                        for (x, b) in back.iter_mut().enumerate() {
                            let s = kernel.sqrt_effect(x);
                            *b += s * gy * s;
                        }
                    }
                    back
                }
            },
        };
        for (x, g) in grad.iter_mut().enumerate() {
            if !self.ball.is_supported(x) {
                g.fill(c64(0.0, 0.0));
            }
        }
        grad
    }

    fn project(&self, psi: &mut [CMatrix]) {
        for (x, v) in psi.iter_mut().enumerate() {
            if !self.ball.is_supported(x) {
                v.fill(c64(0.0, 0.0));
                continue;
            }
            let s = svd(v);
            if s.singular_values.first().copied().unwrap_or(0.0) <= 1.0 {
                continue;
            }
            let clamped: Vec<f64> = s.singular_values.iter().map(|&x| x.min(1.0)).collect();
            let mut u = s.u.clone();
            for (j, &c) in clamped.iter().enumerate() {
                for i in 0..u.nrows() {
                    u[(i, j)] *= c64(c, 0.0);
                }
            }
            *v = u * s.v.adjoint();
        }
    }

    /// Ascent from `start`; returns `(value, ψ, iterations, converged)`.
    fn ascend(&self, mut psi: Vec<CMatrix>, opts: &NoiseOptions) -> (f64, Vec<CMatrix>, usize, bool) {
        self.project(&mut psi);
        let mut value = self.value(&psi);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < opts.max_iter {
            iterations += 1;
            let grad = self.gradient(&psi);
            let gnorm = grad.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt();
            if gnorm <= 1e-12 {
                converged = true;
                break;
            }
            let mut step = opts.step;
            let mut improved = None;
            while step > 1e-10 {
                let mut trial: Vec<CMatrix> = psi.iter().zip(&grad).map(|(p, g)| p + g * c64(step, 0.0)).collect();
                self.project(&mut trial);
                let v = self.value(&trial);
                if v > value {
                    improved = Some((v, trial));
                    break;
                }
                step *= 0.5;
            }
            match improved {
                Some((v, trial)) => {
                    let gain = v - value;
                    psi = trial;
                    value = v;
                    if gain <= 1e-13 * (1.0 + value) {
                        converged = true;
                        break;
                    }
                }
                None => {
                    converged = true;
                    break;
                }
            }
        }
        (value, psi, iterations, converged)
    }

    fn starts(&self, opts: &NoiseOptions) -> Vec<Vec<CMatrix>> {
        let d = self.ball.dim();
        let n = self.ball.len();
        let ns = self.support.len();
        let sign_start = |mask: u64| -> Vec<CMatrix> {
            let mut psi = vec![CMatrix::zeros(d, d); n];
            for (b, &x) in self.support.iter().enumerate() {
                let sign = if b > 0 && mask & (1 << (b - 1)) != 0 { -1.0 } else { 1.0 };
                psi[x] = identity(d) * c64(sign, 0.0);
            }
            psi
        };
        let mut starts = Vec::new();
        let patterns = if ns <= 1 { 1 } else { 1u64 << (ns - 1).min(63) };
        if patterns as usize <= MAX_SIGN_STARTS {
            starts.extend((0..patterns).map(sign_start));
        } else {
            let mut rng = rng_from(derive_seed(opts.seed, SIGN_STREAM, 0));
            starts.push(sign_start(0));
            for _ in 1..MAX_SIGN_STARTS {
                starts.push(sign_start(rng.random_range(0..patterns)));
            }
        }
        for r in 0..opts.restarts {
            let mut rng = rng_from(derive_seed(opts.seed, START_STREAM, r as u64));
            starts.push((0..n).map(|_| ginibre(&mut rng, d, d)).collect());
        }
        starts
    }

    fn maximize(&self, opts: &NoiseOptions) -> Result<NoiseEstimate> {
        let starts = self.starts(opts);
        let restarts_used = starts.len();
        let mut best: Option<(f64, Vec<CMatrix>, bool)> = None;
        let mut iterations = 0;
        for start in starts {
            let (v, psi, it, conv) = self.ascend(start, opts);
            iterations += it;
            if best.as_ref().is_none_or(|(b, _, _)| v > *b) {
                best = Some((v, psi, conv));
            }
        }
        let (value, psi, converged) = best.expect("at least one start");
        let argmax_psi = QuantumRandomVariable::new(self.ball.space().clone(), self.ball.dim(), psi)?;
        Ok(NoiseEstimate { value, argmax_psi, restarts_used, iterations, converged })
    }
}

/// Lower bound on `N(ν) = sup_{||ψ||_∞ ≤ 1} ||Var_ν(ψ)||`.
pub fn random_noise(nu: &Povm, opts: &NoiseOptions) -> Result<NoiseEstimate> {
    let objective = Objective { ball: nu, smear: None, outer: nu, support: nu.support() };
    objective.maximize(opts)
}

/// Lower bound on `sup_{||ψ||_∞ ≤ 1} ||Var_ν′(Γψ)||`.
pub fn smeared_noise(nu: &Povm, gamma: &RandomisationKernel, nu_prime: &Povm, opts: &NoiseOptions) -> Result<NoiseEstimate> {
    gamma.check(nu_prime)?;
    if nu.space() != &gamma.source_space {
        return Err(Error::SpaceMismatch);
    }
    if nu.dim() != gamma.dim() {
        return Err(Error::DimensionMismatch { expected: gamma.dim(), found: nu.dim() });
    }
    let objective = Objective { ball: nu, smear: Some(gamma), outer: nu_prime, support: nu.support() };
    objective.maximize(opts)
}

/// Noise value of `Var(ψ)` recomputed from scratch, for certification.
pub fn noise_value(nu: &Povm, psi: &QuantumRandomVariable) -> Result<f64> {
    check_compatible(nu, psi)?;
    let (l, r) = variance_pair(nu, psi.values());
    Ok(spectral_norm(&symmetric(&l, &r)))
}

/// `||a||` for hermitian `a`, as the largest eigenvalue modulus.
fn spectral_norm(a: &CMatrix) -> f64 {
    let e = eigh(a);
    e.max().max(-e.min())
}

/// A kernel together with the measure on its target space.
#[derive(Debug, Clone)]
pub struct KernelPair {
    pub kernel: RandomisationKernel,
    pub measure: Povm,
    pub name: String,
}

/// Merges outcomes `i < j` into one target point carrying `h_i + h_j`.
///
/// With `S = h_i + h_j` and `Π` the range projection of `S`, the merged point
/// splits back by `γ(x_i) = S^{+1/2} h_i S^{+1/2} + (I − Π)` and
/// `γ(x_j) = S^{+1/2} h_j S^{+1/2}`; all other target points are point masses.
pub fn pairwise_merge(nu: &Povm, i: usize, j: usize) -> Result<KernelPair> {
    let n = nu.len();
    if i >= n || j >= n || i == j {
        return Err(Error::InvalidState(format!("cannot merge outcomes {i} and {j} of {n}")));
    }
    let (i, j) = (i.min(j), i.max(j));
    let d = nu.dim();
    let space = nu.space();
    let s = nu.effect(i) + nu.effect(j);
    let e = eigh(&s);
    let top = e.max().max(f64::MIN_POSITIVE);
    let inv_sqrt = e.reconstruct_with(|v| if v > 1e-12 * top { 1.0 / v.sqrt() } else { 0.0 });
    let range = e.reconstruct_with(|v| if v > 1e-12 * top { 1.0 } else { 0.0 });
    let mut labels = Vec::with_capacity(n - 1);
    let mut kernels = Vec::with_capacity(n - 1);
    let mut effects = Vec::with_capacity(n - 1);
    for k in 0..n {
        if k == j {
            continue;
        }
        if k == i {
            labels.push(format!("{}|{}", space.label(i), space.label(j)));
            let mut split = vec![CMatrix::zeros(d, d); n];
            split[i] = hermitian_part(&(&inv_sqrt * nu.effect(i) * &inv_sqrt + identity(d) - &range));
            split[j] = hermitian_part(&(&inv_sqrt * nu.effect(j) * &inv_sqrt));
            kernels.push(Povm::new(space.clone(), split, 1e-8)?);
            effects.push(hermitian_part(&s));
        } else {
            labels.push(space.label(k).to_string());
            kernels.push(Povm::point_mass_in(space.clone(), k, d)?);
            effects.push(nu.effect(k).clone());
        }
    }
    let target = OutcomeSpace::new(labels)?;
    let measure = Povm::new(target.clone(), effects, 1e-8)?;
    Ok(KernelPair {
        kernel: RandomisationKernel::new(target, space.clone(), kernels)?,
        measure,
        name: format!("merge({},{})", space.label(i), space.label(j)),
    })
}

/// Identity, full smear to a point, and every pairwise merge of supported outcomes.
pub fn builtin_family(nu: &Povm) -> Result<Vec<KernelPair>> {
    let mut family = vec![
        KernelPair { kernel: RandomisationKernel::identity(nu.space(), nu.dim()), measure: nu.clone(), name: "identity".into() },
        KernelPair {
            kernel: RandomisationKernel::full_smear(nu),
            measure: Povm::point_mass("*", nu.dim()),
            name: "full-smear".into(),
        },
    ];
    let support = nu.support();
    for (a, &i) in support.iter().enumerate() {
        for &j in &support[a + 1..] {
            family.push(pairwise_merge(nu, i, j)?);
        }
    }
    Ok(family)
}

/// `max_x ||randomise_measure(γ, ν′)(x) − ν(x)||`.
pub fn reproduction_error(nu: &Povm, pair: &KernelPair) -> Result<f64> {
    if pair.kernel.source_space != *nu.space() {
        return Err(Error::SpaceMismatch);
    }
    let rebuilt = randomise_measure(&pair.kernel, &pair.measure)?;
    Ok(rebuilt.effects().iter().zip(nu.effects()).map(|(a, b)| operator_norm(&(a - b))).fold(0.0, f64::max))
}

#[derive(Debug, Clone)]
pub struct IntrinsicNoise {
    pub value: f64,
    pub per_member: Vec<f64>,
    pub best_index: usize,
}

/// Minimum over the family of the smeared noise: an upper bound on `N_in(ν)`.
pub fn intrinsic_noise_upper(nu: &Povm, family: &[KernelPair], opts: &NoiseOptions) -> Result<IntrinsicNoise> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    for (index, pair) in family.iter().enumerate() {
        let deviation = reproduction_error(nu, pair)?;
        if deviation > REPRODUCTION_TOL {
            return Err(Error::KernelDoesNotReproduceMeasure { index, deviation });
        }
    }
    let mut per_member = Vec::with_capacity(family.len());
    for pair in family {
        per_member.push(smeared_noise(nu, &pair.kernel, &pair.measure, opts)?.value);
    }
    let mut best_index = 0;
    for (k, &v) in per_member.iter().enumerate() {
        if v < per_member[best_index] {
            best_index = k;
        }
    }
    Ok(IntrinsicNoise { value: per_member[best_index], per_member, best_index })
}

/// Random kernel with `|Y| = targets` and its randomised measure.
pub fn random_kernel_pair<R: Rng + ?Sized>(
    rng: &mut R,
    source: &OutcomeSpace,
    targets: usize,
    d: usize,
) -> Result<(KernelPair, Povm)> {
    let target = OutcomeSpace::new((0..targets).map(|i| format!("y{i}")).collect())?;
    let kernels = (0..targets)
        .map(|_| {
            let raw: Vec<CMatrix> = (0..source.len()).map(|_| crate::random::random_psd(rng, d, d)).collect();
            Povm::new(source.clone(), crate::random::normalize_effects(&raw), 1e-9)
        })
        .collect::<Result<Vec<_>>>()?;
    let raw: Vec<CMatrix> = (0..targets).map(|_| crate::random::random_psd(rng, d, d)).collect();
    let measure = Povm::new(target.clone(), crate::random::normalize_effects(&raw), 1e-9)?;
    let kernel = RandomisationKernel::new(target, source.clone(), kernels)?;
    let nu = randomise_measure(&kernel, &measure)?;
    Ok((KernelPair { kernel, measure, name: "random".into() }, nu))
}

/// Exhaustive scalar oracle: `max Σ p|ψ|² − |Σ pψ|²` over `ψ_j = e^{iθ_j}`
/// on a uniform phase grid, with `θ_0 = 0`.
pub fn scalar_phase_grid_noise(probabilities: &[f64], steps: usize) -> f64 {
    let n = probabilities.len();
    if n <= 1 {
        return 0.0;
    }
    let mut best: f64 = 0.0;
    let mut idx = vec![0usize; n - 1];
    loop {
        let mut mean = c64(probabilities[0], 0.0);
        for (k, &i) in idx.iter().enumerate() {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / steps as f64;
            mean += c64(theta.cos(), theta.sin()) * probabilities[k + 1];
        }
        let total: f64 = probabilities.iter().sum();
        best = best.max(total - mean.norm_sqr());
        let mut k = 0;
        while k < idx.len() {
            idx[k] += 1;
            if idx[k] < steps {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == idx.len() {
            return best;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expectation::expect;
    use crate::matkit::{diag, max_abs};
    use crate::random::{random_povm, random_qrv};
    use crate::variance::var;

    fn two() -> OutcomeSpace {
        crate::random::labels(2)
    }

    fn coin(p: f64) -> Povm {
        Povm::classical(two(), &[p, 1.0 - p], 1, DEFAULT_TOL).unwrap()
    }

    fn fast() -> NoiseOptions {
        NoiseOptions { restarts: 4, max_iter: 150, step: 0.1, seed: 3 }
    }

    #[test]
    fn randomise_examples() {
        let mut rng = rng_from(1);
        let nu0 = random_povm(&mut rng, 2, 2);
        let g = RandomisationKernel::full_smear(&nu0);
        let nu = randomise_measure(&g, &Povm::point_mass("*", 2)).unwrap();
        for x in 0..2 {
            assert!(max_abs(&(nu.effect(x) - nu0.effect(x))) < 1e-12);
        }

        let y = OutcomeSpace::from_strs(&["c", "d"]).unwrap();
        let kernels = vec![Povm::point_mass_in(two(), 0, 1).unwrap(), Povm::point_mass_in(two(), 1, 1).unwrap()];
        let g = RandomisationKernel::new(y.clone(), two(), kernels).unwrap();
        let nu = randomise_measure(&g, &Povm::classical(y.clone(), &[0.3, 0.7], 1, DEFAULT_TOL).unwrap()).unwrap();
        assert!((nu.effect(0)[(0, 0)].re - 0.3).abs() < 1e-15);

        let y3 = crate::random::labels(3);
        let nu_prime = Povm::classical(y3.clone(), &[0.2, 0.3, 0.5], 2, DEFAULT_TOL).unwrap();
        let g = RandomisationKernel::new(y3, two(), vec![nu0.clone(); 3]).unwrap();
        let nu = randomise_measure(&g, &nu_prime).unwrap();
        for x in 0..2 {
            assert!(max_abs(&(nu.effect(x) - nu0.effect(x))) < 1e-12);
        }
    }

    #[test]
    fn constant_kernel_pinches_against_noncommuting_measure() {
        // Σ_y s_y c s_y = c needs c to commute with the effects of ν′.
        let y = two();
        let plus = CMatrix::from_element(2, 2, c64(0.5, 0.0));
        let nu_prime = Povm::new(y.clone(), vec![plus.clone(), identity(2) - &plus], DEFAULT_TOL).unwrap();
        let nu0 = Povm::new(two(), vec![diag(&[1.0, 0.0]), diag(&[0.0, 1.0])], DEFAULT_TOL).unwrap();
        let g = RandomisationKernel::new(y, two(), vec![nu0.clone(); 2]).unwrap();
        let nu = randomise_measure(&g, &nu_prime).unwrap();
        assert!((max_abs(&(nu.effect(0) - nu0.effect(0))) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gamma_apply_examples() {
        let mut rng = rng_from(2);
        let (pair, _) = random_kernel_pair(&mut rng, &two(), 3, 2).unwrap();
        let one = QuantumRandomVariable::constant(two(), &identity(2));
        let img = gamma_apply(&pair.kernel, &pair.measure, &one).unwrap();
        for v in img.values() {
            assert!(max_abs(&(v - identity(2))) < 1e-12);
        }

        let nu0 = random_povm(&mut rng, 2, 2);
        let psi = random_qrv(&mut rng, &two(), 2, 1.0);
        let g = RandomisationKernel::full_smear(&nu0);
        let img = gamma_apply(&g, &Povm::point_mass("*", 2), &psi).unwrap();
        assert_eq!(img.value(0), &expect(&nu0, &psi).unwrap());

        let y = OutcomeSpace::from_strs(&["c"]).unwrap();
        let k = Povm::classical(two(), &[0.25, 0.75], 1, DEFAULT_TOL).unwrap();
        let g = RandomisationKernel::new(y, two(), vec![k]).unwrap();
        let psi = QuantumRandomVariable::scalar(two(), &[c64(4.0, 0.0), c64(8.0, 0.0)], 1).unwrap();
        let img = gamma_apply(&g, &Povm::point_mass("c", 1), &psi).unwrap();
        assert!((img.value(0)[(0, 0)].re - 7.0).abs() < 1e-14);
    }

    #[test]
    fn laws_hold_for_identity_and_singleton() {
        let mut rng = rng_from(5);
        let nu = random_povm(&mut rng, 3, 2);
        let psi = random_qrv(&mut rng, nu.space(), 2, 1.0);
        let id = RandomisationKernel::identity(nu.space(), 2);
        let r = randomisation_laws_check(&id, &nu, &psi, 1e-9).unwrap();
        assert!(r.passed(), "{:?}", r.violations);
        assert!(r.expectation_gap < 1e-12);

        let smear = RandomisationKernel::full_smear(&nu);
        let r = randomisation_laws_check(&smear, &Povm::point_mass("*", 2), &psi, 1e-9).unwrap();
        assert!(r.passed(), "{:?}", r.violations);
    }

    #[test]
    fn laws_hold_for_scalar_random_variables() {
        let mut rng = rng_from(6);
        for _ in 0..30 {
            let (pair, _) = random_kernel_pair(&mut rng, &OutcomeSpace::from_strs(&["a", "b", "c"]).unwrap(), 3, 2).unwrap();
            let vals: Vec<_> = (0..3).map(|_| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let psi = QuantumRandomVariable::scalar(pair.kernel.source_space.clone(), &vals, 2).unwrap();
            let r = randomisation_laws_check(&pair.kernel, &pair.measure, &psi, 1e-9).unwrap();
            assert!(r.passed(), "{:?}", r.violations);
        }
    }

    #[test]
    fn merge_kernel_reproduces_measure() {
        let mut rng = rng_from(7);
        for _ in 0..10 {
            let nu = random_povm(&mut rng, 4, 3);
            for pair in builtin_family(&nu).unwrap() {
                assert!(reproduction_error(&nu, &pair).unwrap() < 1e-10, "{}", pair.name);
            }
        }
        let nu = Povm::new(two(), vec![diag(&[1.0, 0.0]), diag(&[0.0, 1.0])], DEFAULT_TOL).unwrap();
        let pair = pairwise_merge(&nu, 0, 1).unwrap();
        assert!(reproduction_error(&nu, &pair).unwrap() < 1e-12);
    }

    #[test]
    fn noise_endpoints() {
        let pm = random_noise(&Povm::point_mass("x", 2), &fast()).unwrap();
        assert!(pm.value <= 1e-9);

        let fair = random_noise(&coin(0.5), &fast()).unwrap();
        assert!((fair.value - 1.0).abs() < 1e-6);
        assert!((scalar_phase_grid_noise(&[0.5, 0.5], 360) - 1.0).abs() < 1e-12);

        let biased = random_noise(&coin(0.75), &fast()).unwrap();
        assert!(biased.value >= 0.75 - 1e-3 && biased.value <= 1.0 + 1e-9);
        assert!((scalar_phase_grid_noise(&[0.75, 0.25], 360) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn estimate_is_certified() {
        let mut rng = rng_from(9);
        for d in 1..=3 {
            let nu = random_povm(&mut rng, 3, d);
            let est = random_noise(&nu, &fast()).unwrap();
            assert!((noise_value(&nu, &est.argmax_psi).unwrap() - est.value).abs() <= 1e-9);
            assert!(est.argmax_psi.values().iter().all(|v| operator_norm(v) <= 1.0 + 1e-9));
            assert!(est.value <= 1.0 + 1e-9);
            assert!(operator_norm(&var(&nu, &est.argmax_psi).unwrap()) <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn null_outcomes_are_frozen() {
        let space = OutcomeSpace::from_strs(&["a", "b", "c"]).unwrap();
        let nu = Povm::classical(space, &[0.5, 0.5, 0.0], 1, DEFAULT_TOL).unwrap();
        let est = random_noise(&nu, &fast()).unwrap();
        assert_eq!(est.argmax_psi.value(2)[(0, 0)], c64(0.0, 0.0));
    }

    #[test]
    fn restarts_are_monotone() {
        let mut rng = rng_from(10);
        let nu = random_povm(&mut rng, 3, 2);
        let mut last = 0.0;
        for restarts in [0, 2, 4, 8] {
            let v = random_noise(&nu, &NoiseOptions { restarts, ..fast() }).unwrap().value;
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = rng_from(11);
        let (pair, nu) = random_kernel_pair(&mut rng, &crate::random::labels(3), 2, 2).unwrap();
        let psi: Vec<CMatrix> = random_qrv(&mut rng, nu.space(), 2, 0.5).values().to_vec();
        for smear in [None, Some(&pair.kernel)] {
            let outer = if smear.is_some() { &pair.measure } else { &nu };
            let obj = Objective { ball: &nu, smear, outer, support: nu.support() };
            let phi = obj.image(&psi);
            assert!(obj.outer_gradient(&phi).is_some());
            let analytic = obj.gradient(&psi);
            let numeric = obj.fd_gradient(&psi);
            for (a, n) in analytic.iter().zip(&numeric) {
                assert!(max_abs(&(a - n)) < 1e-5, "{a} vs {n}");
            }
        }
    }

    #[test]
    fn intrinsic_examples() {
        let mut rng = rng_from(12);
        let nu = random_povm(&mut rng, 3, 2);
        let opts = fast();
        let n = random_noise(&nu, &opts).unwrap().value;
        let id = KernelPair { kernel: RandomisationKernel::identity(nu.space(), 2), measure: nu.clone(), name: "id".into() };
        assert_eq!(intrinsic_noise_upper(&nu, &[id], &opts).unwrap().value, n);

        let smear =
            KernelPair { kernel: RandomisationKernel::full_smear(&nu), measure: Povm::point_mass("*", 2), name: "smear".into() };
        assert!(intrinsic_noise_upper(&nu, &[smear], &opts).unwrap().value.abs() < 1e-12);

        assert!(matches!(intrinsic_noise_upper(&nu, &[], &opts), Err(Error::EmptyFamily)));

        let other = random_povm(&mut rng, 3, 2);
        let bad = KernelPair { kernel: RandomisationKernel::identity(nu.space(), 2), measure: other, name: "bad".into() };
        assert!(matches!(intrinsic_noise_upper(&nu, &[bad], &opts), Err(Error::KernelDoesNotReproduceMeasure { index: 0, .. })));

        let family = builtin_family(&nu).unwrap();
        let r = intrinsic_noise_upper(&nu, &family, &opts).unwrap();
        assert!(r.value >= 0.0 && r.value <= n + 1e-6);
    }
}
